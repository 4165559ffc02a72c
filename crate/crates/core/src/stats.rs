//! Per-channel statistics over feature maps.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::edit::EditMask;
use crate::error::{Error, Result};
use crate::feature::{Dataset, FeatureMap};
use crate::twofold::Twofold;

/// Excess kurtosis `E[(a - ā)^4] / E[(a - ā)^2]^2 - 3` with population
/// moments. A zero-variance slice has kurtosis 0.
///
/// Moments and the final `- 3` are carried in double-double precision, so
/// the result stays accurate to the last bit even when the kurtosis is
/// close to zero and the subtraction cancels.
pub fn kurtosis(units: &[f32]) -> f64 {
    if units.is_empty() {
        return 0.0;
    }
    let n = Twofold::from_f64(units.len() as f64);
    let sum = units
        .iter()
        .fold(Twofold::ZERO, |acc, &v| acc + Twofold::from_f64(v as f64));
    let mean = sum / n;
    let (mut m2, mut m4) = (Twofold::ZERO, Twofold::ZERO);
    for &v in units {
        let d = Twofold::from_f64(v as f64) - mean;
        let d2 = d * d;
        m2 = m2 + d2;
        m4 = m4 + d2 * d2;
    }
    if m2.hi == 0.0 {
        return 0.0;
    }
    // n·Σd⁴ / (Σd²)² − 3 == E[d⁴] / E[d²]² − 3
    let m2sq = m2 * m2;
    ((n * m4 - Twofold::from_f64(3.0) * m2sq) / m2sq).hi
}

/// Kurtosis of each of the map's `C` channels.
pub fn channel_kurtosis(m: &FeatureMap) -> Vec<f64> {
    (0..m.channels()).map(|i| kurtosis(m.channel(i))).collect()
}

/// Row-major `N × C` matrix of per-sample, per-channel kurtosis.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStatsMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ChannelStatsMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let n = rows.len();
        let mut data = Vec::with_capacity(n * cols);
        for (j, r) in rows.into_iter().enumerate() {
            if r.len() != cols {
                return Err(Error::Shape {
                    expected: cols,
                    actual: r.len(),
                });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::Value { sample: j });
            }
            data.extend(r);
        }
        Ok(ChannelStatsMatrix {
            rows: n,
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }
}

/// Kurtosis matrix for every sample of `d`, in sample order.
pub fn stats_matrix(d: &Dataset) -> Result<ChannelStatsMatrix> {
    if d.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut data = Vec::with_capacity(d.len() * d.channels());
    for s in d.samples() {
        data.extend(channel_kurtosis(&s.feature));
    }
    Ok(ChannelStatsMatrix {
        rows: d.len(),
        cols: d.channels(),
        data,
    })
}

/// First row/column of the central 2×2 window; `{2, 3}` when `S = 6`.
pub fn central_window(spatial: usize) -> Result<usize> {
    if spatial < 2 {
        return Err(Error::SpatialTooSmall(
            "central 2x2 window needs spatial >= 2",
        ));
    }
    Ok((spatial - 1) / 2)
}

fn central_max(m: &FeatureMap, channel: usize, lo: usize) -> f32 {
    let mut best = f32::NEG_INFINITY;
    for r in lo..lo + 2 {
        for c in lo..lo + 2 {
            best = best.max(m.get(channel, r, c));
        }
    }
    best
}

/// Indices of the `k` samples whose `channel` fires hardest inside the
/// central 2×2 window, strongest first; ties go to the lower index.
pub fn rank_channel_activations(d: &Dataset, channel: usize, k: usize) -> Result<Vec<usize>> {
    if channel >= d.channels() {
        return Err(Error::Index {
            index: channel,
            len: d.channels(),
        });
    }
    let lo = central_window(d.spatial())?;
    let mut scored: Vec<(f32, usize)> = d
        .samples()
        .iter()
        .enumerate()
        .map(|(i, s)| (central_max(&s.feature, channel, lo), i))
        .collect();
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });
    Ok(scored.into_iter().take(k).map(|(_, i)| i).collect())
}

/// A distribution over channels, or the marker that its source variances
/// were all zero and no distribution exists.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    len: usize,
    entries: Option<Vec<f64>>,
}

impl ProbabilityVector {
    /// Validates non-negativity and unit mass (within 1e-12).
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Domain("probabilities must be finite and >= 0"));
        }
        let total: f64 = entries.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain("probabilities must sum to 1"));
        }
        Ok(ProbabilityVector {
            len: entries.len(),
            entries: Some(entries),
        })
    }

    pub(crate) fn from_normalized(entries: Vec<f64>) -> Self {
        ProbabilityVector {
            len: entries.len(),
            entries: Some(entries),
        }
    }

    pub fn undefined(len: usize) -> Self {
        ProbabilityVector { len, entries: None }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_defined(&self) -> bool {
        self.entries.is_some()
    }

    pub fn entries(&self) -> Option<&[f64]> {
        self.entries.as_deref()
    }
}

/// `-Σ p ln p` in nats, with `0 ln 0 = 0`.
pub fn shannon_entropy(p: &ProbabilityVector) -> Result<f64> {
    let entries = p.entries().ok_or(Error::UndefinedDistribution)?;
    Ok(-entries
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * libm::log(v))
        .sum::<f64>())
}

/// Probability mass the mask keeps.
pub fn mask_expectation(p: &ProbabilityVector, mask: &EditMask) -> Result<f64> {
    let entries = p.entries().ok_or(Error::UndefinedDistribution)?;
    if entries.len() != mask.keep.len() {
        return Err(Error::Shape {
            expected: entries.len(),
            actual: mask.keep.len(),
        });
    }
    Ok(entries
        .iter()
        .zip(&mask.keep)
        .filter(|(_, &k)| k)
        .map(|(p, _)| p)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxes::BBox;
    use crate::feature::LabeledSample;
    use alloc::vec;

    fn map(channels: usize, spatial: usize, f: impl Fn(usize) -> f32) -> FeatureMap {
        let n = channels * spatial * spatial;
        FeatureMap::new(channels, spatial, (0..n).map(f).collect()).unwrap()
    }

    #[test]
    fn constant_channel_is_zero() {
        let m = map(1, 6, |_| 5.0);
        assert_eq!(channel_kurtosis(&m), vec![0.0]);
    }

    #[test]
    fn two_point_channel_is_minus_two() {
        let m = map(1, 6, |i| if i % 2 == 0 { 1.0 } else { -1.0 });
        assert_eq!(channel_kurtosis(&m), vec![-2.0]);
    }

    #[test]
    fn single_spike_matches_closed_form() {
        // one spike among n units: excess kurtosis = (1 - 6pq)/(pq), p = 1/n
        let m = map(1, 6, |i| if i == 0 { 3.0 } else { 0.0 });
        let p = 1.0 / 36.0;
        let q = 1.0 - p;
        let expected = (1.0 - 6.0 * p * q) / (p * q);
        assert!((channel_kurtosis(&m)[0] - expected).abs() < 1e-9);
    }

    #[test]
    fn stats_matrix_rejects_empty() {
        let d = Dataset::new(1, 2, 2).unwrap();
        assert_eq!(stats_matrix(&d), Err(Error::EmptyInput));
    }

    fn ranked_dataset(centrals: &[f32]) -> Dataset {
        let mut d = Dataset::new(1, 1, 6).unwrap();
        for (i, &c) in centrals.iter().enumerate() {
            // large value outside the window must be ignored
            let m = map(1, 6, |u| match u {
                0 => 100.0,
                14 => c,
                _ => 0.0,
            });
            let b = BBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
            d.push(LabeledSample::new(m, 0, b, i as u32, false).unwrap())
                .unwrap();
        }
        d
    }

    #[test]
    fn ranking_uses_central_window_and_index_ties() {
        let d = ranked_dataset(&[1.0, 9.0]);
        assert_eq!(rank_channel_activations(&d, 0, 9).unwrap(), vec![1, 0]);
        let d = ranked_dataset(&[2.0, 2.0, 3.0]);
        assert_eq!(rank_channel_activations(&d, 0, 2).unwrap(), vec![2, 0]);
        let d = ranked_dataset(&[0.5]);
        assert_eq!(rank_channel_activations(&d, 0, 9).unwrap(), vec![0]);
    }

    #[test]
    fn ranking_errors() {
        let d = ranked_dataset(&[1.0]);
        assert!(matches!(
            rank_channel_activations(&d, 1, 1),
            Err(Error::Index { .. })
        ));
        let mut tiny = Dataset::new(1, 1, 1).unwrap();
        let b = BBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        tiny.push(LabeledSample::new(map(1, 1, |_| 1.0), 0, b, 0, false).unwrap())
            .unwrap();
        assert!(matches!(
            rank_channel_activations(&tiny, 0, 1),
            Err(Error::SpatialTooSmall(_))
        ));
    }

    #[test]
    fn central_window_positions() {
        assert_eq!(central_window(6).unwrap(), 2);
        assert_eq!(central_window(2).unwrap(), 0);
        assert_eq!(central_window(7).unwrap(), 3);
    }

    #[test]
    fn entropy_cases() {
        let uniform = ProbabilityVector::new(vec![1.0 / 256.0; 256]).unwrap();
        let h = shannon_entropy(&uniform).unwrap();
        assert!((h - libm::log(256.0)).abs() < 1e-12);
        assert!((h - 5.545177).abs() < 1e-6);
        let mut one_hot = vec![0.0; 8];
        one_hot[3] = 1.0;
        let one_hot = ProbabilityVector::new(one_hot).unwrap();
        assert_eq!(shannon_entropy(&one_hot).unwrap(), 0.0);
        assert_eq!(
            shannon_entropy(&ProbabilityVector::undefined(4)),
            Err(Error::UndefinedDistribution)
        );
    }

    #[test]
    fn probability_vector_validation() {
        assert!(ProbabilityVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbabilityVector::new(vec![1.5, -0.5]).is_err());
    }
}
