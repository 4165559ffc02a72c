//! IoU, greedy non-maximum suppression and PASCAL-style average precision.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::boxes::BBox;
use crate::error::{Error, Result};
use crate::feature::DetectionRecord;

/// Ground-truth object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    pub image_id: u32,
    pub class_id: u32,
    pub bbox: BBox,
    pub difficult: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ApMode {
    /// VOC2007: mean of the interpolated precision at recall 0, 0.1, …, 1.
    #[default]
    ElevenPoint,
    /// VOC2010+: area under the monotone precision envelope.
    Continuous,
}

impl ApMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ApMode::ElevenPoint => "eleven_point",
            ApMode::Continuous => "continuous",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "eleven_point" => Some(ApMode::ElevenPoint),
            "continuous" => Some(ApMode::Continuous),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    /// Suppression threshold; a box is suppressed when IoU is strictly
    /// greater.
    pub nms_iou: f64,
    /// A detection matches when IoU is at least this.
    pub match_iou: f64,
    pub ap_mode: ApMode,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            nms_iou: 0.30,
            match_iou: 0.50,
            ap_mode: ApMode::ElevenPoint,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        for t in [self.nms_iou, self.match_iou] {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Domain("IoU thresholds must lie in (0, 1)"));
            }
        }
        Ok(())
    }
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Indices sorted by descending score, ascending index on ties.
fn score_order(scores: impl Iterator<Item = f64>) -> Vec<usize> {
    let scores: Vec<f64> = scores.collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Greedy NMS over detections of a single image and class.
pub fn nms(dets: &[DetectionRecord], iou_thresh: f64) -> Result<Vec<DetectionRecord>> {
    if let Some(first) = dets.first() {
        if dets
            .iter()
            .any(|d| d.image_id != first.image_id || d.class_id != first.class_id)
        {
            return Err(Error::InputContract(
                "nms input must share one image and one class",
            ));
        }
    }
    let mut kept: Vec<DetectionRecord> = Vec::new();
    for i in score_order(dets.iter().map(|d| d.score)) {
        let d = dets[i];
        if kept.iter().all(|k| iou(&k.bbox, &d.bbox) <= iou_thresh) {
            kept.push(d);
        }
    }
    Ok(kept)
}

/// NMS applied independently to every (image, class) group; groups are
/// emitted in order of first appearance.
pub fn nms_grouped(dets: &[DetectionRecord], iou_thresh: f64) -> Vec<DetectionRecord> {
    let mut keys: Vec<(u32, u32)> = Vec::new();
    let mut groups: Vec<Vec<DetectionRecord>> = Vec::new();
    for d in dets {
        let key = (d.image_id, d.class_id);
        match keys.iter().position(|k| *k == key) {
            Some(g) => groups[g].push(*d),
            None => {
                keys.push(key);
                groups.push(alloc::vec![*d]);
            }
        }
    }
    groups
        .iter()
        .flat_map(|g| nms(g, iou_thresh).expect("groups share image and class"))
        .collect()
}

/// Precision/recall curve of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub class_id: u32,
    /// `(recall, precision)` after each counted detection, in rank order.
    pub points: Vec<(f64, f64)>,
    pub ap: f64,
    pub num_gt: usize,
    pub num_tp: usize,
    pub num_fp: usize,
    /// Set when the class had no non-difficult ground truth; AP is then 0.
    pub no_ground_truth: bool,
}

/// AP of one class. Every detection (in descending score order) is matched
/// against the ground truth of its image with the highest IoU. If that IoU
/// reaches `match_iou`, the detection is ignored when the object is
/// difficult, counts as a true positive when the object is still unclaimed,
/// and as a false positive otherwise. Everything else is a false positive.
pub fn average_precision(
    class_id: u32,
    dets: &[DetectionRecord],
    gts: &[GroundTruth],
    cfg: &EvalConfig,
) -> Result<PrCurve> {
    if dets.iter().any(|d| d.class_id != class_id) || gts.iter().any(|g| g.class_id != class_id) {
        return Err(Error::InputContract("average_precision input must share one class"));
    }
    let num_gt = gts.iter().filter(|g| !g.difficult).count();
    let mut claimed = alloc::vec![false; gts.len()];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut points = Vec::new();

    for i in score_order(dets.iter().map(|d| d.score)) {
        let d = &dets[i];
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if gt.image_id != d.image_id {
                continue;
            }
            let o = iou(&d.bbox, &gt.bbox);
            if best.map_or(true, |(_, b)| o > b) {
                best = Some((g, o));
            }
        }
        match best {
            Some((g, o)) if o >= cfg.match_iou => {
                if gts[g].difficult {
                    continue;
                }
                if claimed[g] {
                    fp += 1;
                } else {
                    claimed[g] = true;
                    tp += 1;
                }
            }
            _ => fp += 1,
        }
        let recall = if num_gt == 0 {
            0.0
        } else {
            tp as f64 / num_gt as f64
        };
        let precision = tp as f64 / (tp + fp) as f64;
        points.push((recall, precision));
    }

    let ap = if num_gt == 0 {
        0.0
    } else {
        match cfg.ap_mode {
            ApMode::ElevenPoint => eleven_point(&points),
            ApMode::Continuous => continuous(&points),
        }
    };
    Ok(PrCurve {
        class_id,
        points,
        ap,
        num_gt,
        num_tp: tp,
        num_fp: fp,
        no_ground_truth: num_gt == 0,
    })
}

fn eleven_point(points: &[(f64, f64)]) -> f64 {
    let mut total = 0.0;
    for step in 0..=10 {
        let r = step as f64 / 10.0;
        let p = points
            .iter()
            .filter(|(rec, _)| *rec >= r)
            .map(|(_, p)| *p)
            .fold(0.0, f64::max);
        total += p;
    }
    total / 11.0
}

fn continuous(points: &[(f64, f64)]) -> f64 {
    let mut recall = alloc::vec![0.0];
    let mut precision = alloc::vec![0.0];
    for &(r, p) in points {
        recall.push(r);
        precision.push(p);
    }
    recall.push(1.0);
    precision.push(0.0);
    for i in (0..precision.len() - 1).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    (1..recall.len())
        .filter(|&i| recall[i] != recall[i - 1])
        .map(|i| (recall[i] - recall[i - 1]) * precision[i])
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_class: Vec<PrCurve>,
    /// Unweighted mean of per-class AP.
    pub map: f64,
}

/// Per-class AP over all `num_classes` classes and their mean.
pub fn evaluate(
    dets: &[DetectionRecord],
    gts: &[GroundTruth],
    num_classes: usize,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    if num_classes == 0 {
        return Err(Error::EmptyInput);
    }
    let check = |class_id: u32| {
        if class_id as usize >= num_classes {
            Err(Error::ClassId {
                class_id,
                num_classes,
            })
        } else {
            Ok(())
        }
    };
    for d in dets {
        check(d.class_id)?;
    }
    for g in gts {
        check(g.class_id)?;
    }
    let mut per_class = Vec::with_capacity(num_classes);
    for c in 0..num_classes as u32 {
        let cd: Vec<DetectionRecord> = dets.iter().filter(|d| d.class_id == c).copied().collect();
        let cg: Vec<GroundTruth> = gts.iter().filter(|g| g.class_id == c).copied().collect();
        per_class.push(average_precision(c, &cd, &cg, cfg)?);
    }
    let map = per_class.iter().map(|p| p.ap).sum::<f64>() / num_classes as f64;
    Ok(EvalReport { per_class, map })
}
