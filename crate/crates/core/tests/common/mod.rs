#![allow(dead_code)]

use featedit_core::{seeded_rng, BBox, Dataset, DetectionRecord, FeatureMap, LabeledSample};
use rand::Rng;

/// Units with a randomly chosen shape per (sample, channel): uniform,
/// sparse spikes over a floor, or a sum of uniforms. Mixing shapes spreads
/// the kurtosis values so no two channels tie.
pub fn random_map<R: Rng>(rng: &mut R, channels: usize, spatial: usize) -> FeatureMap {
    let plane = spatial * spatial;
    let mut values = Vec::with_capacity(channels * plane);
    for _ in 0..channels {
        let shape = rng.gen_range(0..3);
        let scale: f32 = rng.gen_range(0.1..5.0);
        for _ in 0..plane {
            let v: f32 = match shape {
                0 => rng.gen_range(0.0..1.0),
                1 => {
                    if rng.gen_bool(0.15) {
                        rng.gen_range(1.0..4.0)
                    } else {
                        rng.gen_range(0.0..0.05)
                    }
                }
                _ => (0..4).map(|_| rng.gen_range(-1.0f32..1.0)).sum(),
            };
            values.push(v * scale);
        }
    }
    FeatureMap::new(channels, spatial, values).unwrap()
}

/// `n` samples cycling through the classes so every class has rows when
/// `n >= num_classes`.
pub fn random_dataset(seed: u64, num_classes: usize, channels: usize, spatial: usize, n: usize) -> Dataset {
    let mut rng = seeded_rng(seed);
    let mut d = Dataset::new(num_classes, channels, spatial).unwrap();
    for j in 0..n {
        let m = random_map(&mut rng, channels, spatial);
        let bbox = random_box(&mut rng);
        d.push(LabeledSample::new(m, (j % num_classes) as u32, bbox, j as u32, false).unwrap())
            .unwrap();
    }
    d
}

pub fn random_box<R: Rng>(rng: &mut R) -> BBox {
    let x1 = rng.gen_range(0.0..80.0);
    let y1 = rng.gen_range(0.0..80.0);
    let w = rng.gen_range(2.0..40.0);
    let h = rng.gen_range(2.0..40.0);
    BBox::new(x1, y1, x1 + w, y1 + h).unwrap()
}

/// Boxes of one image and class with scores drawn from a small set, so
/// ties occur.
pub fn random_detections<R: Rng>(rng: &mut R, n: usize, image_id: u32, class_id: u32) -> Vec<DetectionRecord> {
    (0..n)
        .map(|_| {
            let score = rng.gen_range(0..12) as f64 / 4.0;
            DetectionRecord::new(image_id, class_id, score, random_box(rng)).unwrap()
        })
        .collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
