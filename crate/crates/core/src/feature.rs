//! Feature maps, labeled region samples and datasets.

use alloc::vec::Vec;

use crate::boxes::BBox;
use crate::error::{Error, Result};

/// One region's `C × S × S` activation tensor, stored channel-major
/// (channel, row, col).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    spatial: usize,
    values: Vec<f32>,
}

impl FeatureMap {
    pub fn new(channels: usize, spatial: usize, values: Vec<f32>) -> Result<Self> {
        if channels == 0 || spatial == 0 {
            return Err(Error::SpatialTooSmall("channels and spatial must be >= 1"));
        }
        let expected = channels * spatial * spatial;
        if values.len() != expected {
            return Err(Error::Shape {
                expected,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Value { sample: 0 });
        }
        Ok(FeatureMap {
            channels,
            spatial,
            values,
        })
    }

    pub fn zeros(channels: usize, spatial: usize) -> Self {
        FeatureMap {
            channels,
            spatial,
            values: alloc::vec![0.0; channels * spatial * spatial],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn spatial(&self) -> usize {
        self.spatial
    }

    /// Units per channel (`S * S`).
    pub fn plane_len(&self) -> usize {
        self.spatial * self.spatial
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn channel(&self, i: usize) -> &[f32] {
        let n = self.plane_len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn channel_mut(&mut self, i: usize) -> &mut [f32] {
        let n = self.plane_len();
        &mut self.values[i * n..(i + 1) * n]
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> f32 {
        self.values[(channel * self.spatial + row) * self.spatial + col]
    }

    /// Flattened channel-major copy in `f64`, the layout linear models use.
    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }

    /// Multiplies every unit by `factor`. Fails if the result overflows.
    pub fn scaled(&self, factor: f32) -> Result<Self> {
        let values: Vec<f32> = self.values.iter().map(|v| v * factor).collect();
        FeatureMap::new(self.channels, self.spatial, values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub feature: FeatureMap,
    pub class_id: u32,
    pub bbox: BBox,
    pub image_id: u32,
    pub difficult: bool,
}

impl LabeledSample {
    /// Box coordinates are rounded to `f32`, the precision they are stored at.
    pub fn new(
        feature: FeatureMap,
        class_id: u32,
        bbox: BBox,
        image_id: u32,
        difficult: bool,
    ) -> Result<Self> {
        let bbox = bbox.to_f32_precision();
        bbox.validate()?;
        Ok(LabeledSample {
            feature,
            class_id,
            bbox,
            image_id,
            difficult,
        })
    }

    pub fn with_feature(&self, feature: FeatureMap) -> Self {
        LabeledSample {
            feature,
            ..self.clone()
        }
    }
}

/// An ordered collection of samples sharing one `(C, S)` geometry and a
/// declared class count `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    num_classes: usize,
    channels: usize,
    spatial: usize,
    samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn new(num_classes: usize, channels: usize, spatial: usize) -> Result<Self> {
        if channels == 0 || spatial == 0 {
            return Err(Error::SpatialTooSmall("channels and spatial must be >= 1"));
        }
        Ok(Dataset {
            num_classes,
            channels,
            spatial,
            samples: Vec::new(),
        })
    }

    pub fn from_samples(
        num_classes: usize,
        channels: usize,
        spatial: usize,
        samples: Vec<LabeledSample>,
    ) -> Result<Self> {
        let mut d = Dataset::new(num_classes, channels, spatial)?;
        d.samples.reserve(samples.len());
        for s in samples {
            d.push(s)?;
        }
        Ok(d)
    }

    pub fn push(&mut self, sample: LabeledSample) -> Result<()> {
        let f = &sample.feature;
        if f.channels() != self.channels {
            return Err(Error::Shape {
                expected: self.channels,
                actual: f.channels(),
            });
        }
        if f.spatial() != self.spatial {
            return Err(Error::Shape {
                expected: self.spatial,
                actual: f.spatial(),
            });
        }
        if sample.class_id as usize >= self.num_classes {
            return Err(Error::ClassId {
                class_id: sample.class_id,
                num_classes: self.num_classes,
            });
        }
        sample.bbox.validate()?;
        self.samples.push(sample);
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn spatial(&self) -> usize {
        self.spatial
    }

    /// Flattened feature length `C * S * S`.
    pub fn feature_len(&self) -> usize {
        self.channels * self.spatial * self.spatial
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> &LabeledSample {
        &self.samples[i]
    }

    pub fn into_samples(self) -> Vec<LabeledSample> {
        self.samples
    }

    pub fn labels(&self) -> Vec<u32> {
        self.samples.iter().map(|s| s.class_id).collect()
    }

    /// Per-class sample counts `N_C`; sums to `len()`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0usize; self.num_classes];
        for s in &self.samples {
            counts[s.class_id as usize] += 1;
        }
        counts
    }

    pub fn same_geometry(&self, other: &Dataset) -> bool {
        self.num_classes == other.num_classes
            && self.channels == other.channels
            && self.spatial == other.spatial
    }

    /// Copy with every sample's feature replaced by `f(index, sample)`.
    pub fn map_features<F>(&self, mut f: F) -> Result<Dataset>
    where
        F: FnMut(usize, &LabeledSample) -> Result<FeatureMap>,
    {
        let mut out = Dataset::new(self.num_classes, self.channels, self.spatial)?;
        out.samples.reserve(self.samples.len());
        for (i, s) in self.samples.iter().enumerate() {
            out.push(s.with_feature(f(i, s)?))?;
        }
        Ok(out)
    }
}

/// One scored detection window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionRecord {
    pub image_id: u32,
    pub class_id: u32,
    pub score: f64,
    pub bbox: BBox,
}

impl DetectionRecord {
    pub fn new(image_id: u32, class_id: u32, score: f64, bbox: BBox) -> Result<Self> {
        if !score.is_finite() {
            return Err(Error::Domain("detection score must be finite"));
        }
        bbox.validate()?;
        Ok(DetectionRecord {
            image_id,
            class_id,
            score,
            bbox,
        })
    }
}
