//! Independent reference computations used by the integration and
//! acceptance tests. Nothing here calls into the code paths it checks.

#![allow(dead_code)]

use rand::Rng;
use vastab_core::matcher::MatchConfig;
use vastab_core::model::{BBox, Detection, GroundTruthObject};

/// Windowed fluctuation by direct double loop: returns (values, skipped).
pub fn naive_flux(tp: &[u32], gt: &[u32], n: usize) -> (Vec<f64>, usize) {
    let mut values = Vec::new();
    let mut skipped = 0;
    if tp.len() < n {
        return (values, skipped);
    }
    for i in 0..=tp.len() - n {
        let mut hi = tp[i];
        let mut lo = tp[i];
        let mut total = 0u64;
        for j in i..i + n {
            hi = hi.max(tp[j]);
            lo = lo.min(tp[j]);
            total += u64::from(gt[j]);
        }
        if total == 0 {
            skipped += 1;
        } else {
            values.push(f64::from(hi - lo) / (total as f64 / n as f64));
        }
    }
    (values, skipped)
}

/// Minimum cost over every injective map of the shorter side into the longer.
pub fn brute_force_min_cost(cost: &[Vec<f64>]) -> f64 {
    let rows = cost.len();
    let cols = cost[0].len();
    let transposed: Vec<Vec<f64>>;
    let c: &[Vec<f64>] = if rows <= cols {
        cost
    } else {
        transposed = (0..cols).map(|j| (0..rows).map(|i| cost[i][j]).collect()).collect();
        &transposed
    };
    fn rec(c: &[Vec<f64>], row: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        if row == c.len() {
            if acc < *best {
                *best = acc;
            }
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                rec(c, row + 1, used, acc + c[row][j], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    let width = c[0].len();
    rec(c, 0, &mut vec![false; width], 0.0, &mut best);
    best
}

fn oracle_iou(a: &BBox, b: &BBox) -> f64 {
    let x1 = a.x.max(b.x);
    let y1 = a.y.max(b.y);
    let x2 = (a.x + a.w).min(b.x + b.w);
    let y2 = (a.y + a.h).min(b.y + b.h);
    let inter = (x2 - x1).max(0.0) * (y2 - y1).max(0.0);
    if inter == 0.0 {
        0.0
    } else {
        inter / (a.w * a.h + b.w * b.h - inter)
    }
}

fn allowed(d: &Detection, g: &GroundTruthObject, cfg: &MatchConfig) -> Option<f64> {
    if cfg.class_sensitive && !d.class_label.eq_ignore_ascii_case(&g.class_label) {
        return None;
    }
    let v = oracle_iou(&d.bbox, &g.bbox);
    (v >= cfg.iou_threshold).then_some(v)
}

#[derive(Debug, Clone, Copy)]
pub struct ExhaustiveMatch {
    /// Largest total IoU over all one-to-one pairings of allowed pairs.
    pub best_total_iou: f64,
    /// Number of pairs in that best pairing.
    pub tp_at_best: u32,
    /// Largest number of pairs any one-to-one pairing reaches.
    pub max_cardinality: u32,
}

/// Enumerate every partial one-to-one pairing of detections to ground truth.
pub fn exhaustive_match(dets: &[Detection], gts: &[GroundTruthObject], cfg: &MatchConfig) -> ExhaustiveMatch {
    let w: Vec<Vec<Option<f64>>> = dets
        .iter()
        .map(|d| gts.iter().map(|g| allowed(d, g, cfg)).collect())
        .collect();
    let mut best = ExhaustiveMatch {
        best_total_iou: 0.0,
        tp_at_best: 0,
        max_cardinality: 0,
    };
    fn rec(w: &[Vec<Option<f64>>], di: usize, used: &mut [bool], total: f64, count: u32, best: &mut ExhaustiveMatch) {
        if di == w.len() {
            best.max_cardinality = best.max_cardinality.max(count);
            if total > best.best_total_iou + 1e-12 {
                best.best_total_iou = total;
                best.tp_at_best = count;
            }
            return;
        }
        rec(w, di + 1, used, total, count, best);
        for gi in 0..used.len() {
            if let (false, Some(v)) = (used[gi], w[di][gi]) {
                used[gi] = true;
                rec(w, di + 1, used, total + v, count + 1, best);
                used[gi] = false;
            }
        }
    }
    rec(&w, 0, &mut vec![false; gts.len()], 0.0, 0, &mut best);
    best
}

/// Straightforward greedy matcher: (tp, total IoU).
pub fn naive_greedy(dets: &[Detection], gts: &[GroundTruthObject], cfg: &MatchConfig) -> (u32, f64) {
    let mut remaining: Vec<usize> = (0..dets.len()).collect();
    let mut taken = vec![false; gts.len()];
    let (mut tp, mut total) = (0, 0.0);
    while !remaining.is_empty() {
        // highest confidence, earliest index on ties
        let mut pick = 0;
        for k in 1..remaining.len() {
            if dets[remaining[k]].confidence > dets[remaining[pick]].confidence {
                pick = k;
            }
        }
        let di = remaining.remove(pick);
        let mut best: Option<(usize, f64)> = None;
        for gi in 0..gts.len() {
            if taken[gi] {
                continue;
            }
            if let Some(v) = allowed(&dets[di], &gts[gi], cfg) {
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((gi, v));
                }
            }
        }
        if let Some((gi, v)) = best {
            taken[gi] = true;
            tp += 1;
            total += v;
        }
    }
    (tp, total)
}

/// Standard normal CDF by composite Simpson quadrature of the density.
pub fn normal_cdf(x: f64) -> f64 {
    let steps = 20_000;
    let h = x.abs() / steps as f64;
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut acc = pdf(0.0) + pdf(x.abs());
    for i in 1..steps {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * pdf(i as f64 * h);
    }
    let half = acc * h / 3.0;
    if x >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

pub fn cauchy_cdf(t: f64) -> f64 {
    0.5 + t.atan() / std::f64::consts::PI
}

/// Random box with integer-ish coordinates on a small canvas so overlaps are
/// common.
pub fn random_box(rng: &mut impl Rng) -> BBox {
    BBox::new(
        rng.random_range(0..40) as f64,
        rng.random_range(0..40) as f64,
        rng.random_range(4..30) as f64,
        rng.random_range(4..30) as f64,
    )
    .unwrap()
}

pub fn random_frame(rng: &mut impl Rng, max_objects: usize) -> (Vec<Detection>, Vec<GroundTruthObject>) {
    let classes = ["car", "person"];
    let nd = rng.random_range(0..=max_objects);
    let ng = rng.random_range(0..=max_objects);
    let gts: Vec<GroundTruthObject> = (0..ng)
        .map(|i| GroundTruthObject {
            frame_id: 0,
            object_id: i as i64,
            bbox: random_box(rng),
            class_label: classes[rng.random_range(0..2)].to_string(),
        })
        .collect();
    let dets: Vec<Detection> = (0..nd)
        .map(|_| {
            // half the detections jitter around a ground-truth box
            let bbox = if !gts.is_empty() && rng.random_bool(0.5) {
                let g = &gts[rng.random_range(0..gts.len())].bbox;
                BBox::new(
                    g.x + rng.random_range(-3.0..3.0),
                    g.y + rng.random_range(-3.0..3.0),
                    g.w * rng.random_range(0.8..1.2),
                    g.h * rng.random_range(0.8..1.2),
                )
                .unwrap()
            } else {
                random_box(rng)
            };
            let class = if rng.random_bool(0.2) {
                "CAR"
            } else {
                classes[rng.random_range(0..2)]
            };
            Detection::new(0, class, (rng.random_range(0..10) as f64) / 10.0, bbox).unwrap()
        })
        .collect();
    (dets, gts)
}

/// Static scene of `objects` disjoint boxes over `frames` frames; each object
/// is missed independently with probability `dropout`.
pub fn dropout_scene(rng: &mut impl Rng, objects: usize, frames: u64, dropout: f64) -> Vec<Detection> {
    let mut dets = Vec::new();
    for f in 0..frames {
        for k in 0..objects {
            if rng.random::<f64>() < dropout {
                continue;
            }
            let b = BBox::new(60.0 * k as f64, 10.0, 40.0, 40.0).unwrap();
            dets.push(Detection::new(f, "car", 0.9, b).unwrap());
        }
    }
    dets
}
