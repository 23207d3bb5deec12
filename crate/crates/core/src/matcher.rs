//! Per-frame detection-to-ground-truth matching and the true-positive count
//! series built from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{same_class, BBox, Detection, FrameSet, GroundTruthObject, TpSeries};
use crate::tracker::hungarian;

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = a.right().min(b.right()) - a.x.max(b.x);
    let ih = a.bottom().min(b.bottom()) - a.y.max(b.y);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchStrategy {
    /// Detections in descending confidence (input order on ties) each take the
    /// unmatched ground-truth object with the highest IoU.
    GreedyByConfidence,
    /// One-to-one pairing that maximises total IoU.
    OptimalAssignment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub iou_threshold: f64,
    pub class_sensitive: bool,
    pub strategy: MatchStrategy,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            iou_threshold: 0.5,
            class_sensitive: true,
            strategy: MatchStrategy::GreedyByConfidence,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iou_threshold.is_finite() && self.iou_threshold > 0.0 && self.iou_threshold <= 1.0 {
            Ok(())
        } else {
            Err(Error::invalid(
                "iou_threshold",
                format!("must lie in (0, 1], got {}", self.iou_threshold),
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub detection: usize,
    pub ground_truth: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMatchResult {
    pub frame_id: Option<u64>,
    pub pairs: Vec<MatchPair>,
    pub tp: u32,
    pub fp: u32,
    #[serde(rename = "fn")]
    pub fn_: u32,
}

impl FrameMatchResult {
    pub fn total_iou(&self) -> f64 {
        self.pairs.iter().map(|p| p.iou).sum()
    }
}

fn common_frame(dets: &[Detection], gts: &[GroundTruthObject]) -> Result<Option<u64>> {
    let mut ids = dets.iter().map(|d| d.frame_id).chain(gts.iter().map(|g| g.frame_id));
    let Some(first) = ids.next() else {
        return Ok(None);
    };
    match ids.find(|&f| f != first) {
        Some(other) => Err(Error::MixedFrames { first, other }),
        None => Ok(Some(first)),
    }
}

/// Affinity matrix (`dets` × `gts`); `None` marks pairs that may not match.
fn affinities(dets: &[Detection], gts: &[GroundTruthObject], cfg: &MatchConfig) -> Vec<Vec<Option<f64>>> {
    dets.iter()
        .map(|d| {
            gts.iter()
                .map(|g| {
                    if cfg.class_sensitive && !same_class(&d.class_label, &g.class_label) {
                        return None;
                    }
                    let v = iou(&d.bbox, &g.bbox);
                    (v >= cfg.iou_threshold).then_some(v)
                })
                .collect()
        })
        .collect()
}

fn greedy(aff: &[Vec<Option<f64>>], dets: &[Detection]) -> Vec<MatchPair> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].confidence.total_cmp(&dets[a].confidence).then(a.cmp(&b)));
    let n_gt = aff.first().map_or(0, Vec::len);
    let mut taken = vec![false; n_gt];
    let mut pairs = Vec::new();
    for di in order {
        let mut best: Option<(usize, f64)> = None;
        for (gi, a) in aff[di].iter().enumerate() {
            if let (Some(v), false) = (a, taken[gi]) {
                if best.is_none_or(|(_, bv)| *v > bv) {
                    best = Some((gi, *v));
                }
            }
        }
        if let Some((gi, v)) = best {
            taken[gi] = true;
            pairs.push(MatchPair {
                detection: di,
                ground_truth: gi,
                iou: v,
            });
        }
    }
    pairs
}

fn optimal(aff: &[Vec<Option<f64>>]) -> Vec<MatchPair> {
    // With exactly min(m, n) pairs assigned, minimising Σ(1 - w) maximises Σw;
    // disallowed pairs weigh 0 and so never beat leaving both sides unmatched.
    let cost: Vec<Vec<f64>> = aff
        .iter()
        .map(|row| row.iter().map(|a| 1.0 - a.unwrap_or(0.0)).collect())
        .collect();
    hungarian(&cost)
        .into_iter()
        .filter_map(|(di, gi)| {
            aff[di][gi].map(|v| MatchPair {
                detection: di,
                ground_truth: gi,
                iou: v,
            })
        })
        .collect()
}

pub fn match_frame(dets: &[Detection], gts: &[GroundTruthObject], cfg: &MatchConfig) -> Result<FrameMatchResult> {
    cfg.validate()?;
    let frame_id = common_frame(dets, gts)?;
    let mut pairs = if dets.is_empty() || gts.is_empty() {
        Vec::new()
    } else {
        let aff = affinities(dets, gts, cfg);
        match cfg.strategy {
            MatchStrategy::GreedyByConfidence => greedy(&aff, dets),
            MatchStrategy::OptimalAssignment => optimal(&aff),
        }
    };
    pairs.sort_by_key(|p| p.detection);
    let tp = pairs.len() as u32;
    Ok(FrameMatchResult {
        frame_id,
        tp,
        fp: dets.len() as u32 - tp,
        fn_: gts.len() as u32 - tp,
        pairs,
    })
}

pub fn count_series(fs: &FrameSet, cfg: &MatchConfig) -> Result<TpSeries> {
    cfg.validate()?;
    let mut tp = Vec::with_capacity(fs.len());
    let mut gt = Vec::with_capacity(fs.len());
    for &f in &fs.frames {
        let r = match_frame(fs.detections(f), fs.ground_truth(f), cfg)?;
        tp.push(r.tp);
        gt.push(fs.ground_truth(f).len() as u32);
    }
    TpSeries::new(fs.frames.clone(), tp, gt)
}
