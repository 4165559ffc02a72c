//! Kurtosis-variance channel editing.
//!
//! For every class the channels whose kurtosis is least stable across that
//! class's samples (largest intra-class variance) are dropped, together with
//! the channels whose per-class mean kurtosis barely moves between classes
//! (smallest inter-class variance). Both criteria select a fixed number of
//! channels, `⌊frac · C⌋`, ranked by the normalized variance
//! `p_i = V_i / Σ V`; the two drop sets are unioned into one keep mask and
//! dropped channels are zeroed.

use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;

use crate::error::{Error, Result};
use crate::feature::{Dataset, FeatureMap};
use crate::stats::{ChannelStatsMatrix, ProbabilityVector};

/// Intra- and inter-class variance of channel kurtosis.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceProfile {
    num_classes: usize,
    channels: usize,
    /// `T × C`, `V_i^C`.
    intra: Vec<f64>,
    /// `T × C`, per-class mean kurtosis.
    class_means: Vec<f64>,
    /// Unweighted mean of the class means.
    grand_mean: Vec<f64>,
    /// `V_i^A`.
    inter: Vec<f64>,
}

impl VarianceProfile {
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn intra(&self, class_id: usize) -> &[f64] {
        &self.intra[class_id * self.channels..(class_id + 1) * self.channels]
    }

    pub fn class_means(&self, class_id: usize) -> &[f64] {
        &self.class_means[class_id * self.channels..(class_id + 1) * self.channels]
    }

    pub fn grand_mean(&self) -> &[f64] {
        &self.grand_mean
    }

    pub fn inter(&self) -> &[f64] {
        &self.inter
    }
}

/// Builds the variance profile of a stats matrix whose row `j` belongs to
/// class `labels[j]`.
pub fn variance_profile(
    stats: &ChannelStatsMatrix,
    labels: &[u32],
    num_classes: usize,
) -> Result<VarianceProfile> {
    if labels.len() != stats.rows() {
        return Err(Error::Shape {
            expected: stats.rows(),
            actual: labels.len(),
        });
    }
    let c = stats.cols();
    let mut counts = alloc::vec![0usize; num_classes];
    let mut sums = alloc::vec![0.0f64; num_classes * c];
    for (j, &label) in labels.iter().enumerate() {
        let t = label as usize;
        if t >= num_classes {
            return Err(Error::ClassId {
                class_id: label,
                num_classes,
            });
        }
        counts[t] += 1;
        for (acc, v) in sums[t * c..(t + 1) * c].iter_mut().zip(stats.row(j)) {
            *acc += v;
        }
    }
    if let Some(t) = counts.iter().position(|&n| n == 0) {
        return Err(Error::MissingClass(t as u32));
    }

    let mut class_means = sums;
    for (t, &n) in counts.iter().enumerate() {
        for v in &mut class_means[t * c..(t + 1) * c] {
            *v /= n as f64;
        }
    }

    // second pass keeps the variance free of the E[x²] - E[x]² cancellation
    let mut intra = alloc::vec![0.0f64; num_classes * c];
    for (j, &label) in labels.iter().enumerate() {
        let t = label as usize;
        let means = &class_means[t * c..(t + 1) * c];
        for ((acc, v), m) in intra[t * c..(t + 1) * c]
            .iter_mut()
            .zip(stats.row(j))
            .zip(means)
        {
            let d = v - m;
            *acc += d * d;
        }
    }
    for (t, &n) in counts.iter().enumerate() {
        for v in &mut intra[t * c..(t + 1) * c] {
            *v /= n as f64;
        }
    }

    let tf = num_classes as f64;
    let mut grand_mean = alloc::vec![0.0f64; c];
    for t in 0..num_classes {
        for (g, m) in grand_mean.iter_mut().zip(&class_means[t * c..(t + 1) * c]) {
            *g += m;
        }
    }
    for g in &mut grand_mean {
        *g /= tf;
    }
    let mut inter = alloc::vec![0.0f64; c];
    for t in 0..num_classes {
        for ((acc, m), g) in inter
            .iter_mut()
            .zip(&class_means[t * c..(t + 1) * c])
            .zip(&grand_mean)
        {
            let d = m - g;
            *acc += d * d;
        }
    }
    for v in &mut inter {
        *v /= tf;
    }

    Ok(VarianceProfile {
        num_classes,
        channels: c,
        intra,
        class_means,
        grand_mean,
        inter,
    })
}

/// Normalizes a variance vector into a drop distribution. An all-zero
/// vector yields an undefined distribution.
pub fn drop_distribution(v: &[f64]) -> Result<ProbabilityVector> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("variances must be finite"));
    }
    if v.iter().any(|&x| x < 0.0) {
        return Err(Error::Domain("variances must be non-negative"));
    }
    let total: f64 = v.iter().sum();
    if total == 0.0 {
        return Ok(ProbabilityVector::undefined(v.len()));
    }
    Ok(ProbabilityVector::from_normalized(
        v.iter().map(|x| x / total).collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EditConfig {
    pub intra_frac: f64,
    pub inter_frac: f64,
    /// Seed for the random-edit baseline.
    pub seed: u64,
}

impl Default for EditConfig {
    fn default() -> Self {
        EditConfig {
            intra_frac: 0.20,
            inter_frac: 0.30,
            seed: 0,
        }
    }
}

impl EditConfig {
    pub fn validate(&self) -> Result<()> {
        for f in [self.intra_frac, self.inter_frac] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Domain("edit fractions must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// `⌊frac · n⌋`, robust to products like `0.29 * 100 = 28.999…`.
pub(crate) fn drop_count(frac: f64, n: usize) -> usize {
    let raw = libm::floor(frac * n as f64 + 1e-9) as usize;
    raw.min(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    Kept,
    Intra,
    Inter,
    Both,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::Kept => "kept",
            DropReason::Intra => "intra",
            DropReason::Inter => "inter",
            DropReason::Both => "both",
        }
    }
}

/// Per-class channel keep/drop vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditMask {
    pub class_id: u32,
    pub keep: Vec<bool>,
    /// Sorted ascending.
    pub dropped_intra: Vec<usize>,
    /// Sorted ascending.
    pub dropped_inter: Vec<usize>,
}

impl EditMask {
    /// Mask that keeps every channel.
    pub fn keep_all(class_id: u32, channels: usize) -> Self {
        EditMask {
            class_id,
            keep: alloc::vec![true; channels],
            dropped_intra: Vec::new(),
            dropped_inter: Vec::new(),
        }
    }

    /// Mask dropping exactly `dropped` (reported as intra drops).
    pub fn dropping(class_id: u32, channels: usize, dropped: &[usize]) -> Result<Self> {
        let mut keep = alloc::vec![true; channels];
        for &i in dropped {
            if i >= channels {
                return Err(Error::Index {
                    index: i,
                    len: channels,
                });
            }
            keep[i] = false;
        }
        let mut dropped_intra: Vec<usize> = dropped.to_vec();
        dropped_intra.sort_unstable();
        dropped_intra.dedup();
        Ok(EditMask {
            class_id,
            keep,
            dropped_intra,
            dropped_inter: Vec::new(),
        })
    }

    pub fn channels(&self) -> usize {
        self.keep.len()
    }

    pub fn dropped(&self) -> impl Iterator<Item = usize> + '_ {
        self.keep
            .iter()
            .enumerate()
            .filter(|(_, &k)| !k)
            .map(|(i, _)| i)
    }

    pub fn num_dropped(&self) -> usize {
        self.keep.iter().filter(|&&k| !k).count()
    }

    pub fn reason(&self, channel: usize) -> DropReason {
        let intra = self.dropped_intra.binary_search(&channel).is_ok();
        let inter = self.dropped_inter.binary_search(&channel).is_ok();
        match (intra, inter) {
            (false, false) => DropReason::Kept,
            (true, false) => DropReason::Intra,
            (false, true) => DropReason::Inter,
            (true, true) => DropReason::Both,
        }
    }
}

/// `count` channel indices ordered by `p` (descending when `largest`),
/// lower index first on ties; returned sorted ascending.
fn select_channels(p: &[f64], count: usize, largest: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| {
        let by_value = if largest {
            p[b].partial_cmp(&p[a])
        } else {
            p[a].partial_cmp(&p[b])
        };
        by_value.unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });
    order.truncate(count);
    order.sort_unstable();
    order
}

/// Builds the edit mask of one class.
pub fn build_mask(profile: &VarianceProfile, class_id: u32, cfg: &EditConfig) -> Result<EditMask> {
    cfg.validate()?;
    let t = class_id as usize;
    if t >= profile.num_classes() {
        return Err(Error::ClassId {
            class_id,
            num_classes: profile.num_classes(),
        });
    }
    let c = profile.channels();
    let intra = drop_distribution(profile.intra(t))?;
    let inter = drop_distribution(profile.inter())?;
    match (intra.entries(), inter.entries()) {
        (None, None) => {
            let any_intra = (0..profile.num_classes())
                .any(|k| profile.intra(k).iter().any(|&v| v > 0.0));
            return Err(if any_intra {
                Error::DegenerateClass(class_id)
            } else {
                Error::DegenerateDataset
            });
        }
        _ => {}
    }
    let dropped_intra = intra
        .entries()
        .map(|p| select_channels(p, drop_count(cfg.intra_frac, c), true))
        .unwrap_or_default();
    let dropped_inter = inter
        .entries()
        .map(|p| select_channels(p, drop_count(cfg.inter_frac, c), false))
        .unwrap_or_default();

    let mut keep = alloc::vec![true; c];
    for &i in dropped_intra.iter().chain(&dropped_inter) {
        keep[i] = false;
    }
    Ok(EditMask {
        class_id,
        keep,
        dropped_intra,
        dropped_inter,
    })
}

/// Masks for every class of the profile, indexed by class id.
pub fn build_masks(profile: &VarianceProfile, cfg: &EditConfig) -> Result<Vec<EditMask>> {
    (0..profile.num_classes() as u32)
        .map(|t| build_mask(profile, t, cfg))
        .collect()
}

/// Zeroes every channel the mask drops.
pub fn apply_mask(m: &FeatureMap, mask: &EditMask) -> Result<FeatureMap> {
    if mask.channels() != m.channels() {
        return Err(Error::Shape {
            expected: m.channels(),
            actual: mask.channels(),
        });
    }
    let mut out = m.clone();
    for i in mask.dropped() {
        out.channel_mut(i).fill(0.0);
    }
    Ok(out)
}

/// Random-edit baseline: zeroes `⌊k·r/(1+r)⌋` of the `k` units, chosen
/// uniformly without replacement, so that zeros/ones ≈ `drop_ratio`.
pub fn random_edit<R: Rng + ?Sized>(
    m: &FeatureMap,
    drop_ratio: f64,
    rng: &mut R,
) -> Result<FeatureMap> {
    if !(0.0..1.0).contains(&drop_ratio) {
        return Err(Error::Domain("drop ratio must lie in [0, 1)"));
    }
    let k = m.values().len();
    let zeros = libm::floor(k as f64 * drop_ratio / (1.0 + drop_ratio)) as usize;
    let mut values = m.values().to_vec();
    for i in rand::seq::index::sample(rng, k, zeros) {
        values[i] = 0.0;
    }
    FeatureMap::new(m.channels(), m.spatial(), values)
}

fn mask_for(masks: &[EditMask], class_id: u32) -> Result<&EditMask> {
    masks
        .iter()
        .find(|m| m.class_id == class_id)
        .ok_or(Error::MissingClass(class_id))
}

/// Applies each sample's own class mask.
pub fn edit_dataset(d: &Dataset, masks: &[EditMask]) -> Result<Dataset> {
    for t in 0..d.num_classes() as u32 {
        mask_for(masks, t)?;
    }
    d.map_features(|_, s| apply_mask(&s.feature, mask_for(masks, s.class_id)?))
}

/// Which mask the negatives of a one-vs-rest classifier receive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NegativeEdit {
    /// Every sample gets the classifier's class mask.
    #[default]
    ClassifierClass,
    /// Every sample gets its own class mask.
    OwnClass,
    /// Positives get the classifier's mask, negatives stay unedited.
    None,
}

impl NegativeEdit {
    pub fn as_str(self) -> &'static str {
        match self {
            NegativeEdit::ClassifierClass => "classifier-class",
            NegativeEdit::OwnClass => "own-class",
            NegativeEdit::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "classifier-class" => Some(NegativeEdit::ClassifierClass),
            "own-class" => Some(NegativeEdit::OwnClass),
            "none" => Some(NegativeEdit::None),
            _ => None,
        }
    }
}

/// Edited training set for the one-vs-rest classifier of `class_id`.
pub fn edit_for_classifier(
    d: &Dataset,
    masks: &[EditMask],
    class_id: u32,
    mode: NegativeEdit,
) -> Result<Dataset> {
    match mode {
        NegativeEdit::OwnClass => edit_dataset(d, masks),
        NegativeEdit::ClassifierClass => {
            let mask = mask_for(masks, class_id)?;
            d.map_features(|_, s| apply_mask(&s.feature, mask))
        }
        NegativeEdit::None => {
            let mask = mask_for(masks, class_id)?;
            d.map_features(|_, s| {
                if s.class_id == class_id {
                    apply_mask(&s.feature, mask)
                } else {
                    Ok(s.feature.clone())
                }
            })
        }
    }
}

/// Concatenation, `a`'s samples first.
pub fn merge_datasets(a: &Dataset, b: &Dataset) -> Result<Dataset> {
    if !a.same_geometry(b) {
        return Err(Error::Shape {
            expected: a.feature_len(),
            actual: b.feature_len(),
        });
    }
    let mut samples = Vec::with_capacity(a.len() + b.len());
    samples.extend_from_slice(a.samples());
    samples.extend_from_slice(b.samples());
    Dataset::from_samples(a.num_classes(), a.channels(), a.spatial(), samples)
}
