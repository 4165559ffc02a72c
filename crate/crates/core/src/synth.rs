//! Seeded synthetic feature maps with planted channel roles.
//!
//! Every channel of a class plays one of three roles:
//!
//! * **friendly**: a spike-and-floor distribution whose spike count and
//!   height are fixed per (class, channel). The spike fraction sets the
//!   channel's kurtosis, so kurtosis is stable within a class and differs
//!   between classes.
//! * **noisy**: the spike count and height are redrawn for every sample, so
//!   the kurtosis swings widely inside the class.
//! * **flat**: one spike count and height shared by all classes, so the
//!   per-class mean kurtosis barely differs between classes.
//!
//! Channels without a role for a class carry floor noise only. The test
//! split is drawn from the same distributions except that noisy-channel
//! spike heights are multiplied by `exp(shift · z)`, `z ~ N(0, 1)` per
//! sample and channel.
//!
//! Samples are generated from per-sample seeds mixed from the spec seed,
//! the split and the sample index, so output does not depend on generation
//! order.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::boxes::BBox;
use crate::detect::GroundTruth;
use crate::error::{Error, Result};
use crate::feature::{Dataset, FeatureMap, LabeledSample};

const IMAGE_WIDTH: f64 = 500.0;
const IMAGE_HEIGHT: f64 = 375.0;
const FLOOR_SCALE: f64 = 0.02;
const HEIGHT_JITTER: f64 = 0.05;
/// Spike fractions of a 6×6 plane; friendly classes pick distinct ones.
const FRIENDLY_FRACTIONS: [f64; 8] = [
    1.0 / 36.0,
    2.0 / 36.0,
    3.0 / 36.0,
    5.0 / 36.0,
    7.0 / 36.0,
    10.0 / 36.0,
    13.0 / 36.0,
    18.0 / 36.0,
];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub channels: usize,
    pub spatial: usize,
    pub n_per_class: usize,
    pub n_test_per_class: usize,
    /// Per class.
    pub friendly: Vec<Vec<usize>>,
    /// Per class.
    pub noisy: Vec<Vec<usize>>,
    /// Shared by every class.
    pub flat: Vec<usize>,
    pub seed: u64,
    pub shift: f64,
}

impl SynthSpec {
    pub const DEFAULT_SHIFT: f64 = 1.0;

    /// Random role layout: `flat_count` shared flat channels, `noisy_per_class`
    /// noisy channels per class (disjoint between classes) and every other
    /// channel friendly. The layout is a seeded permutation of the channels.
    pub fn with_layout(
        num_classes: usize,
        channels: usize,
        spatial: usize,
        n_per_class: usize,
        noisy_per_class: usize,
        flat_count: usize,
        seed: u64,
    ) -> Result<Self> {
        if flat_count + noisy_per_class * num_classes > channels {
            return Err(Error::Spec("not enough channels for the requested roles"));
        }
        let mut rng = crate::seeded_rng(mix(seed, 0x6c61_796f_7574, 0));
        let mut perm: Vec<usize> = (0..channels).collect();
        perm.shuffle(&mut rng);
        let mut flat: Vec<usize> = perm[..flat_count].to_vec();
        flat.sort_unstable();
        let mut noisy = Vec::with_capacity(num_classes);
        let mut friendly = Vec::with_capacity(num_classes);
        for c in 0..num_classes {
            let start = flat_count + c * noisy_per_class;
            let mut n: Vec<usize> = perm[start..start + noisy_per_class].to_vec();
            n.sort_unstable();
            let f: Vec<usize> = (0..channels)
                .filter(|i| !flat.contains(i) && !n.contains(i))
                .collect();
            noisy.push(n);
            friendly.push(f);
        }
        Ok(SynthSpec {
            num_classes,
            channels,
            spatial,
            n_per_class,
            n_test_per_class: n_per_class,
            friendly,
            noisy,
            flat,
            seed,
            shift: Self::DEFAULT_SHIFT,
        })
    }

    /// Desk-scale default: 3 classes, 32 channels of 6×6, 200 train and
    /// 200 test samples per class, 4 noisy channels per class, 10 flat.
    pub fn desk(seed: u64) -> Self {
        Self::with_layout(3, 32, 6, 200, 4, 10, seed).expect("desk layout fits")
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.channels == 0 || self.spatial == 0 {
            return Err(Error::Spec("classes, channels and spatial must be >= 1"));
        }
        if self.friendly.len() != self.num_classes || self.noisy.len() != self.num_classes {
            return Err(Error::Spec("friendly and noisy need one entry per class"));
        }
        if !self.shift.is_finite() || self.shift < 0.0 {
            return Err(Error::Spec("shift must be finite and >= 0"));
        }
        let in_range = |set: &[usize]| set.iter().all(|&i| i < self.channels);
        if !in_range(&self.flat) {
            return Err(Error::Spec("flat channel index out of range"));
        }
        for c in 0..self.num_classes {
            if !in_range(&self.friendly[c]) || !in_range(&self.noisy[c]) {
                return Err(Error::Spec("channel index out of range"));
            }
            let mut seen = alloc::vec![false; self.channels];
            for &i in self.friendly[c]
                .iter()
                .chain(&self.noisy[c])
                .chain(&self.flat)
            {
                if seen[i] {
                    return Err(Error::Spec("channel roles overlap within a class"));
                }
                seen[i] = true;
            }
        }
        Ok(())
    }
}

/// Generated splits plus the ground truth of every sample's image.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub train: Dataset,
    pub test: Dataset,
    pub train_gt: Vec<GroundTruth>,
    pub test_gt: Vec<GroundTruth>,
}

#[derive(Clone, Copy)]
enum Role {
    Floor,
    Fixed { spikes: usize, height: f64 },
    Noisy,
}

#[derive(Clone, Copy, PartialEq)]
enum Split {
    Train,
    Test,
}

/// SplitMix64 finalizer over the combined inputs.
fn mix(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller; u1 in (0, 1] keeps the log finite
    let u1 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
}

fn spike_bounds(plane: usize) -> (usize, usize) {
    (1, (plane / 2).max(1))
}

fn role_table(spec: &SynthSpec) -> Vec<Vec<Role>> {
    let plane = spec.spatial * spec.spatial;
    let scale = |frac: f64| (libm::round(frac * plane as f64) as usize).clamp(1, plane);
    let mut rng = crate::seeded_rng(mix(spec.seed, 0x726f_6c65, 0));
    let mut table = alloc::vec![alloc::vec![Role::Floor; spec.channels]; spec.num_classes];
    for i in 0..spec.channels {
        let mut fracs = FRIENDLY_FRACTIONS;
        fracs.shuffle(&mut rng);
        for (c, row) in table.iter_mut().enumerate() {
            row[i] = Role::Fixed {
                spikes: scale(fracs[c % fracs.len()]),
                height: rng.gen_range(1.0..3.0),
            };
        }
        let flat = Role::Fixed {
            spikes: scale(FRIENDLY_FRACTIONS[rng.gen_range(0..FRIENDLY_FRACTIONS.len())]),
            height: rng.gen_range(1.0..3.0),
        };
        for (c, row) in table.iter_mut().enumerate() {
            if spec.flat.contains(&i) {
                row[i] = flat;
            } else if spec.noisy[c].contains(&i) {
                row[i] = Role::Noisy;
            } else if !spec.friendly[c].contains(&i) {
                row[i] = Role::Floor;
            }
        }
    }
    table
}

fn fill_plane<R: Rng + ?Sized>(plane: &mut [f32], spikes: usize, height: f64, rng: &mut R) {
    for v in plane.iter_mut() {
        *v = (FLOOR_SCALE * normal(rng).abs()) as f32;
    }
    let n = plane.len();
    for i in rand::seq::index::sample(rng, n, spikes.min(n)) {
        let h = height * (1.0 + HEIGHT_JITTER * normal(rng));
        plane[i] = h.max(0.0) as f32;
    }
}

fn random_box<R: Rng + ?Sized>(rng: &mut R) -> BBox {
    let w = rng.gen_range(40.0..200.0);
    let h = rng.gen_range(40.0..200.0);
    let x1 = rng.gen_range(0.0..IMAGE_WIDTH - w);
    let y1 = rng.gen_range(0.0..IMAGE_HEIGHT - h);
    BBox {
        x1,
        y1,
        x2: x1 + w,
        y2: y1 + h,
    }
    .to_f32_precision()
}

/// Proposal around a ground-truth box: center offsets and log-size changes
/// of about 8% of the box size.
fn jitter<R: Rng + ?Sized>(gt: &BBox, rng: &mut R) -> BBox {
    let (cx, cy) = gt.center();
    let (w, h) = (gt.width(), gt.height());
    BBox::from_center(
        cx + 0.08 * w * normal(rng),
        cy + 0.08 * h * normal(rng),
        w * libm::exp(0.08 * normal(rng)),
        h * libm::exp(0.08 * normal(rng)),
    )
    .to_f32_precision()
}

fn draw_sample(
    spec: &SynthSpec,
    roles: &[Vec<Role>],
    class_id: usize,
    split: Split,
    index: usize,
    image_id: u32,
) -> Result<(LabeledSample, GroundTruth)> {
    let stream = match split {
        Split::Train => 1,
        Split::Test => 2,
    };
    let mut rng = crate::seeded_rng(mix(spec.seed, stream, index as u64));
    let plane = spec.spatial * spec.spatial;
    let (lo, hi) = spike_bounds(plane);
    let mut values = alloc::vec![0.0f32; spec.channels * plane];
    for (i, chunk) in values.chunks_mut(plane).enumerate() {
        let (spikes, height) = match roles[class_id][i] {
            Role::Floor => (0, 0.0),
            Role::Fixed { spikes, height } => (spikes, height),
            Role::Noisy => {
                let spikes = rng.gen_range(lo..=hi);
                let mut height = rng.gen_range(0.5..3.0);
                if split == Split::Test && spec.shift > 0.0 {
                    height *= libm::exp(spec.shift * normal(&mut rng));
                }
                (spikes, height)
            }
        };
        fill_plane(chunk, spikes, height, &mut rng);
    }
    let feature = FeatureMap::new(spec.channels, spec.spatial, values)?;
    let gt_box = random_box(&mut rng);
    let proposal = jitter(&gt_box, &mut rng);
    let gt = GroundTruth {
        image_id,
        class_id: class_id as u32,
        bbox: gt_box,
        difficult: false,
    };
    let sample = LabeledSample::new(feature, class_id as u32, proposal, image_id, false)?;
    Ok((sample, gt))
}

/// Draws the train and test splits. Samples are ordered by class, then by
/// index; every sample is its own image.
pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let roles = role_table(spec);
    let mut train = Dataset::new(spec.num_classes, spec.channels, spec.spatial)?;
    let mut test = Dataset::new(spec.num_classes, spec.channels, spec.spatial)?;
    let mut train_gt = Vec::new();
    let mut test_gt = Vec::new();
    let n_train = spec.num_classes * spec.n_per_class;
    let mut index = 0usize;
    for c in 0..spec.num_classes {
        for _ in 0..spec.n_per_class {
            let (s, g) = draw_sample(spec, &roles, c, Split::Train, index, index as u32)?;
            train.push(s)?;
            train_gt.push(g);
            index += 1;
        }
    }
    let mut index = 0usize;
    for c in 0..spec.num_classes {
        for _ in 0..spec.n_test_per_class {
            let image_id = (n_train + index) as u32;
            let (s, g) = draw_sample(spec, &roles, c, Split::Test, index, image_id)?;
            test.push(s)?;
            test_gt.push(g);
            index += 1;
        }
    }
    Ok(SynthData {
        train,
        test,
        train_gt,
        test_gt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn small(seed: u64) -> SynthSpec {
        let mut s = SynthSpec::with_layout(2, 8, 4, 5, 1, 2, seed).unwrap();
        s.n_test_per_class = 3;
        s
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate(&small(3)).unwrap();
        let b = generate(&small(3)).unwrap();
        assert_eq!(a, b);
        let c = generate(&small(4)).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn layout_and_sizes() {
        let s = SynthSpec::desk(1);
        s.validate().unwrap();
        assert_eq!(s.flat.len(), 10);
        for c in 0..3 {
            assert_eq!(s.noisy[c].len(), 4);
            assert_eq!(s.friendly[c].len(), 18);
        }
        let d = generate(&small(0)).unwrap();
        assert_eq!(d.train.len(), 10);
        assert_eq!(d.test.len(), 6);
        assert_eq!(d.train.class_counts(), vec![5, 5]);
        assert_eq!(d.test_gt[0].image_id, 10);
    }

    #[test]
    fn overlapping_roles_are_rejected() {
        let mut s = small(0);
        s.flat.push(s.noisy[0][0]);
        assert!(matches!(generate(&s), Err(Error::Spec(_))));
        let mut s = small(0);
        s.friendly[1].push(99);
        assert!(matches!(generate(&s), Err(Error::Spec(_))));
    }

    #[test]
    fn zero_shift_keeps_noisy_heights() {
        let mut s = small(9);
        s.shift = 0.0;
        let d = generate(&s).unwrap();
        // without drift every noisy spike stays below 3 · (1 + jitter tail)
        let noisy = s.noisy[0][0];
        for sample in d.test.samples().iter().filter(|x| x.class_id == 0) {
            assert!(sample.feature.channel(noisy).iter().all(|&v| v < 4.5));
        }
    }
}
