//! Deliberately naive reference implementations.
//!
//! Each function here transcribes its formula or definition directly, with
//! no calls into the optimized modules (only the plain data types are
//! shared). They exist to cross-check the main code paths in tests and are
//! bounded to small inputs.

use alloc::vec::Vec;

use crate::detect::GroundTruth;
use crate::error::{Error, Result};
use crate::feature::{Dataset, DetectionRecord};

pub const MAX_SAMPLES: usize = 1_000;
pub const MAX_BOXES_PER_IMAGE: usize = 50;

fn limit(size: usize, limit: usize) -> Result<()> {
    if size > limit {
        Err(Error::OracleScale { size, limit })
    } else {
        Ok(())
    }
}

// Extended-precision pairs `(hi, lo)` for the kurtosis oracle, built on
// fused multiply-add rather than operand splitting.
type Pair = (f64, f64);

fn p_norm(s: f64, e: f64) -> Pair {
    let hi = s + e;
    (hi, e - (hi - s))
}

fn p_add(a: Pair, b: Pair) -> Pair {
    let s = a.0 + b.0;
    let v = s - a.0;
    let e = (a.0 - (s - v)) + (b.0 - v);
    p_norm(s, e + a.1 + b.1)
}

fn p_mul(a: Pair, b: Pair) -> Pair {
    let p = a.0 * b.0;
    let e = libm::fma(a.0, b.0, -p);
    p_norm(p, e + a.0 * b.1 + a.1 * b.0)
}

fn p_div(a: Pair, b: Pair) -> Pair {
    let mut q: Pair = (a.0 / b.0, 0.0);
    for _ in 0..2 {
        let r = p_add(a, p_mul((-b.0, -b.1), q));
        q = p_add(q, (r.0 / b.0, 0.0));
    }
    q
}

/// `x(a) = E[o^4] / E^2[o^2] - 3`, `o = a - mean(a)`; zero variance gives 0.
/// Evaluated in extended precision so the `- 3` does not cancel digits.
pub fn oracle_kurtosis(units: &[f32]) -> f64 {
    let n: Pair = (units.len() as f64, 0.0);
    let mut mean: Pair = (0.0, 0.0);
    for &a in units {
        mean = p_add(mean, (a as f64, 0.0));
    }
    mean = p_div(mean, n);
    let mut e2: Pair = (0.0, 0.0);
    let mut e4: Pair = (0.0, 0.0);
    for &a in units {
        let o = p_add((a as f64, 0.0), (-mean.0, -mean.1));
        let o2 = p_mul(o, o);
        e2 = p_add(e2, p_div(o2, n));
        e4 = p_add(e4, p_div(p_mul(o2, o2), n));
    }
    if e2.0 == 0.0 {
        0.0
    } else {
        p_add(p_div(e4, p_mul(e2, e2)), (-3.0, 0.0)).0
    }
}

/// `K[j][i]`: kurtosis of sample `j`, channel `i`.
pub fn oracle_stats(d: &Dataset) -> Result<Vec<Vec<f64>>> {
    limit(d.len(), MAX_SAMPLES)?;
    let plane = d.spatial() * d.spatial();
    let mut out = Vec::new();
    for s in d.samples() {
        let mut row = Vec::new();
        for i in 0..d.channels() {
            let mut units = Vec::new();
            for u in 0..plane {
                units.push(s.feature.values()[i * plane + u]);
            }
            row.push(oracle_kurtosis(&units));
        }
        out.push(row);
    }
    Ok(out)
}

/// Literal variance profile.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleProfile {
    pub intra: Vec<Vec<f64>>,
    pub class_means: Vec<Vec<f64>>,
    pub grand_mean: Vec<f64>,
    pub inter: Vec<f64>,
}

pub fn oracle_profile(stats: &[Vec<f64>], labels: &[u32], num_classes: usize) -> Result<OracleProfile> {
    limit(stats.len(), MAX_SAMPLES)?;
    let c = stats.first().map_or(0, Vec::len);
    let mut intra = Vec::new();
    let mut class_means = Vec::new();
    for t in 0..num_classes {
        let rows: Vec<&Vec<f64>> = stats
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l as usize == t)
            .map(|(r, _)| r)
            .collect();
        if rows.is_empty() {
            return Err(Error::MissingClass(t as u32));
        }
        let n_c = rows.len() as f64;
        let mut means = Vec::new();
        let mut vars = Vec::new();
        for i in 0..c {
            let k_bar: f64 = rows.iter().map(|r| r[i]).sum::<f64>() / n_c;
            let v: f64 = rows.iter().map(|r| libm::pow(r[i] - k_bar, 2.0)).sum::<f64>() / n_c;
            means.push(k_bar);
            vars.push(v);
        }
        class_means.push(means);
        intra.push(vars);
    }
    let t_f = num_classes as f64;
    let mut grand_mean = Vec::new();
    let mut inter = Vec::new();
    for i in 0..c {
        let k_a: f64 = class_means.iter().map(|m| m[i]).sum::<f64>() / t_f;
        let v_a: f64 = class_means.iter().map(|m| libm::pow(m[i] - k_a, 2.0)).sum::<f64>() / t_f;
        grand_mean.push(k_a);
        inter.push(v_a);
    }
    Ok(OracleProfile {
        intra,
        class_means,
        grand_mean,
        inter,
    })
}

/// Sorts every `(p_i, i)` pair by insertion and takes the first `count`.
/// `largest` orders by descending `p`, otherwise ascending; lower index
/// first among equal `p`.
fn full_sort_pick(v: &[f64], count: usize, largest: bool) -> Option<Vec<usize>> {
    let total: f64 = v.iter().sum();
    if total == 0.0 {
        return None;
    }
    let pairs: Vec<(f64, usize)> = v.iter().enumerate().map(|(i, x)| (x / total, i)).collect();
    let before = |a: &(f64, usize), b: &(f64, usize)| -> bool {
        if a.0 == b.0 {
            a.1 < b.1
        } else if largest {
            a.0 > b.0
        } else {
            a.0 < b.0
        }
    };
    let mut sorted: Vec<(f64, usize)> = Vec::new();
    for p in pairs {
        let pos = sorted.iter().position(|q| before(&p, q)).unwrap_or(sorted.len());
        sorted.insert(pos, p);
    }
    let mut picked: Vec<usize> = sorted.iter().take(count).map(|p| p.1).collect();
    picked.sort();
    Some(picked)
}

/// `(dropped_intra, dropped_inter)` for one class; an undefined criterion
/// contributes nothing.
pub fn oracle_mask(
    profile: &OracleProfile,
    class_id: usize,
    intra_frac: f64,
    inter_frac: f64,
) -> (Vec<usize>, Vec<usize>) {
    let c = profile.inter.len();
    let n_intra = libm::floor(intra_frac * c as f64 + 1e-9) as usize;
    let n_inter = libm::floor(inter_frac * c as f64 + 1e-9) as usize;
    let intra = full_sort_pick(&profile.intra[class_id], n_intra, true).unwrap_or_default();
    let inter = full_sort_pick(&profile.inter, n_inter, false).unwrap_or_default();
    (intra, inter)
}

fn oracle_iou(a: &DetectionRecord, b: &DetectionRecord) -> f64 {
    box_iou(
        [a.bbox.x1, a.bbox.y1, a.bbox.x2, a.bbox.y2],
        [b.bbox.x1, b.bbox.y1, b.bbox.x2, b.bbox.y2],
    )
}

fn box_iou(a: [f64; 4], b: [f64; 4]) -> f64 {
    let iw = a[2].min(b[2]) - a[0].max(b[0]);
    let ih = a[3].min(b[3]) - a[1].max(b[1]);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let area_a = (a[2] - a[0]) * (a[3] - a[1]);
    let area_b = (b[2] - b[0]) * (b[3] - b[1]);
    inter / (area_a + area_b - inter)
}

/// Greedy NMS as explicit set manipulation; returns kept input indices in
/// selection order.
pub fn oracle_nms(dets: &[DetectionRecord], iou_thresh: f64) -> Result<Vec<usize>> {
    limit(dets.len(), MAX_BOXES_PER_IMAGE)?;
    let mut remaining: Vec<usize> = (0..dets.len()).collect();
    let mut kept = Vec::new();
    while !remaining.is_empty() {
        let mut top = remaining[0];
        for &j in &remaining {
            if dets[j].score > dets[top].score || (dets[j].score == dets[top].score && j < top) {
                top = j;
            }
        }
        kept.push(top);
        remaining = remaining
            .into_iter()
            .filter(|&j| j != top && oracle_iou(&dets[j], &dets[top]) <= iou_thresh)
            .collect();
    }
    Ok(kept)
}

/// VOC-style AP of one class. `eleven_point` selects the 11-point rule,
/// otherwise the area under the precision envelope.
pub fn oracle_ap(
    dets: &[DetectionRecord],
    gts: &[GroundTruth],
    match_iou: f64,
    eleven_point: bool,
) -> Result<f64> {
    let mut images: Vec<u32> = gts.iter().map(|g| g.image_id).collect();
    images.sort();
    images.dedup();
    for img in &images {
        limit(gts.iter().filter(|g| g.image_id == *img).count(), MAX_BOXES_PER_IMAGE)?;
    }
    limit(dets.len(), MAX_SAMPLES)?;

    let npos = gts.iter().filter(|g| !g.difficult).count();
    // stable sort by descending score keeps insertion order on ties
    let mut order: Vec<usize> = (0..dets.len()).collect();
    for a in 1..order.len() {
        let mut b = a;
        while b > 0 && dets[order[b]].score > dets[order[b - 1]].score {
            order.swap(b, b - 1);
            b -= 1;
        }
    }
    let mut used = alloc::vec![false; gts.len()];
    let mut tp_flags = Vec::new();
    let mut fp_flags = Vec::new();
    for &k in &order {
        let d = &dets[k];
        let mut ovmax = -1.0;
        let mut jmax = usize::MAX;
        for (j, g) in gts.iter().enumerate() {
            if g.image_id != d.image_id {
                continue;
            }
            let ov = box_iou(
                [d.bbox.x1, d.bbox.y1, d.bbox.x2, d.bbox.y2],
                [g.bbox.x1, g.bbox.y1, g.bbox.x2, g.bbox.y2],
            );
            if ov > ovmax {
                ovmax = ov;
                jmax = j;
            }
        }
        if jmax != usize::MAX && ovmax >= match_iou {
            if gts[jmax].difficult {
                continue;
            }
            if used[jmax] {
                tp_flags.push(0.0);
                fp_flags.push(1.0);
            } else {
                used[jmax] = true;
                tp_flags.push(1.0);
                fp_flags.push(0.0);
            }
        } else {
            tp_flags.push(0.0);
            fp_flags.push(1.0);
        }
    }
    if npos == 0 {
        return Ok(0.0);
    }
    let mut rec = Vec::new();
    let mut prec = Vec::new();
    let mut tp_counts = Vec::new();
    let (mut tp, mut fp) = (0.0, 0.0);
    for (t, f) in tp_flags.iter().zip(&fp_flags) {
        tp += t;
        fp += f;
        tp_counts.push(tp as usize);
        rec.push(tp / npos as f64);
        prec.push(tp / (tp + fp));
    }
    if eleven_point {
        let mut ap = 0.0;
        for k in 0..11usize {
            let mut p = 0.0f64;
            for (&count, q) in tp_counts.iter().zip(&prec) {
                // recall >= k/10, decided exactly in integers
                if 10 * count >= k * npos {
                    p = p.max(*q);
                }
            }
            ap += p / 11.0;
        }
        Ok(ap)
    } else {
        let mut mrec = alloc::vec![0.0];
        mrec.extend(&rec);
        mrec.push(1.0);
        let mut mpre = alloc::vec![0.0];
        mpre.extend(&prec);
        mpre.push(0.0);
        let mut i = mpre.len() - 1;
        while i > 0 {
            mpre[i - 1] = mpre[i - 1].max(mpre[i]);
            i -= 1;
        }
        let mut ap = 0.0;
        for i in 1..mrec.len() {
            if mrec[i] != mrec[i - 1] {
                ap += (mrec[i] - mrec[i - 1]) * mpre[i];
            }
        }
        Ok(ap)
    }
}

/// Sorts every sample by its central-window maximum of `channel` with a
/// bubble sort over all `N` samples and returns the first `k`.
pub fn oracle_rank(d: &Dataset, channel: usize, k: usize) -> Result<Vec<usize>> {
    limit(d.len(), MAX_SAMPLES)?;
    let s = d.spatial();
    let lo = (s - 1) / 2;
    let mut entries: Vec<(f32, usize)> = Vec::new();
    for (j, sample) in d.samples().iter().enumerate() {
        let window = [
            sample.feature.get(channel, lo, lo),
            sample.feature.get(channel, lo, lo + 1),
            sample.feature.get(channel, lo + 1, lo),
            sample.feature.get(channel, lo + 1, lo + 1),
        ];
        let mut m = window[0];
        for v in window {
            if v > m {
                m = v;
            }
        }
        entries.push((m, j));
    }
    let n = entries.len();
    for pass in 0..n {
        for a in 0..n.saturating_sub(1 + pass) {
            let (x, y) = (entries[a], entries[a + 1]);
            if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) {
                entries.swap(a, a + 1);
            }
        }
    }
    Ok(entries.into_iter().take(k).map(|e| e.1).collect())
}

/// Best bias for fixed `w`: the hinge sum is piecewise linear in `b`, so its
/// minimum sits on one of the kinks `y_i - w·x_i`; every kink is tried.
fn oracle_best_bias(w: &[f64], xs: &[Vec<f64>], ys: &[f64]) -> f64 {
    let score = |x: &Vec<f64>| -> f64 {
        let mut f = 0.0;
        for j in 0..w.len() {
            f += w[j] * x[j];
        }
        f
    };
    let mut best_b = 0.0;
    let mut best_loss = f64::INFINITY;
    for (xk, yk) in xs.iter().zip(ys) {
        let b = yk - score(xk);
        let mut loss = 0.0;
        for (x, y) in xs.iter().zip(ys) {
            loss += (1.0 - y * (score(x) + b)).max(0.0);
        }
        if loss < best_loss {
            best_loss = loss;
            best_b = b;
        }
    }
    best_b
}

/// Full-batch projected subgradient descent on
/// `λ/2 ‖w‖² + mean hinge`, step `1/(λ t)` on `w` onto the ball
/// `‖w‖ ≤ sqrt(2/λ)`, with the unregularized bias set to its exact
/// minimizer after every step. Returns the best `(weights, bias, objective)`
/// seen over `iterations` steps.
pub fn oracle_svm(
    xs: &[Vec<f64>],
    ys: &[f64],
    lambda: f64,
    iterations: usize,
) -> Result<(Vec<f64>, f64, f64)> {
    limit(xs.len(), MAX_SAMPLES)?;
    let n = xs.len() as f64;
    let d = xs[0].len();
    let objective = |w: &[f64], b: f64| -> f64 {
        let mut reg = 0.0;
        for wj in w {
            reg += wj * wj;
        }
        let mut loss = 0.0;
        for (x, y) in xs.iter().zip(ys) {
            let mut f = b;
            for j in 0..d {
                f += w[j] * x[j];
            }
            loss += (1.0 - y * f).max(0.0);
        }
        lambda / 2.0 * reg + loss / n
    };
    let radius = libm::sqrt(2.0 / lambda);
    let mut w = alloc::vec![0.0; d];
    let mut b = oracle_best_bias(&w, xs, ys);
    let mut best = (w.clone(), b, objective(&w, b));
    for t in 1..=iterations {
        let mut gw: Vec<f64> = w.iter().map(|wj| lambda * wj).collect();
        for (x, y) in xs.iter().zip(ys) {
            let mut f = b;
            for j in 0..d {
                f += w[j] * x[j];
            }
            if y * f < 1.0 {
                for j in 0..d {
                    gw[j] -= y * x[j] / n;
                }
            }
        }
        let eta = 1.0 / (lambda * t as f64);
        for j in 0..d {
            w[j] -= eta * gw[j];
        }
        let norm = libm::sqrt(w.iter().map(|v| v * v).sum::<f64>());
        if norm > radius {
            for wj in w.iter_mut() {
                *wj *= radius / norm;
            }
        }
        b = oracle_best_bias(&w, xs, ys);
        let obj = objective(&w, b);
        if obj < best.2 {
            best = (w.clone(), b, obj);
        }
    }
    Ok(best)
}
