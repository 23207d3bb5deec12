//! SORT-style multi-object tracking and the track-id churn metric.
//!
//! Each frame: predict every live track, associate detections to tracks by
//! optimal assignment on `1 - IoU` (pairs below the IoU gate are forbidden),
//! update matched tracks, spawn a tentative track per unmatched detection and
//! retire tracks that went unmatched for more than `max_age` frames.
//!
//! The number of distinct track ids a run produces is the churn metric: a
//! detector whose output flickers on and off breaks tracks apart and inflates
//! the id count.

pub mod assignment;
pub mod kalman;

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcher::iou;
use crate::model::{BBox, Detection, FrameSet, GroundTruthObject};

pub use assignment::{assignment_cost, hungarian};
pub use kalman::{kalman_predict, kalman_update, KalmanParams, KalmanState};

/// Cost given to pairs that must not be associated.
pub const FORBIDDEN_COST: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub max_age: u32,
    pub min_hits: u32,
    pub iou_gate: f64,
    pub kalman: KalmanParams,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            max_age: 1,
            min_hits: 3,
            iou_gate: 0.3,
            kalman: KalmanParams::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_hits < 1 {
            return Err(Error::invalid("min_hits", "must be at least 1"));
        }
        if !(self.iou_gate.is_finite() && (0.0..=1.0).contains(&self.iou_gate)) {
            return Err(Error::invalid(
                "iou_gate",
                format!("must lie in [0, 1], got {}", self.iou_gate),
            ));
        }
        if !(self.kalman.measurement_sigma.is_finite() && self.kalman.measurement_sigma > 0.0) {
            return Err(Error::invalid("measurement_sigma", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Dead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub state: KalmanState,
    pub hits: u32,
    pub age_since_update: u32,
    pub status: TrackStatus,
    pub first_frame: u64,
    pub last_frame: u64,
}

/// One row of tracker output: a confirmed track updated in `frame_id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub frame_id: u64,
    pub track_id: u64,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChurnReport {
    pub total_track_ids: u64,
    pub confirmed_track_ids: u64,
    pub ground_truth_tracks: Option<u64>,
    /// `confirmed_track_ids / ground_truth_tracks`; absent without ground
    /// truth or when it holds no identities.
    pub churn_ratio: Option<f64>,
}

/// Stateful frame-by-frame tracker.
#[derive(Debug, Clone)]
pub struct SortTracker {
    cfg: TrackerConfig,
    live: Vec<Track>,
    finished: Vec<Track>,
    next_id: u64,
}

impl SortTracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(SortTracker {
            cfg,
            live: Vec::new(),
            finished: Vec::new(),
            next_id: 1,
        })
    }

    pub fn live_tracks(&self) -> &[Track] {
        &self.live
    }

    /// Advance by one frame. Returns the confirmed tracks matched in this
    /// frame.
    pub fn step(&mut self, frame_id: u64, dets: &[Detection]) -> Vec<TrackRow> {
        let params = self.cfg.kalman;
        for t in &mut self.live {
            t.state = kalman_predict(&t.state, &params);
            t.age_since_update += 1;
        }

        let predicted: Vec<Option<BBox>> = self.live.iter().map(|t| t.state.bbox()).collect();
        let mut det_matched = vec![false; dets.len()];
        if !dets.is_empty() && !self.live.is_empty() {
            let cost: Vec<Vec<f64>> = dets
                .iter()
                .map(|d| {
                    predicted
                        .iter()
                        .map(|p| match p {
                            Some(pb) => {
                                let v = iou(&d.bbox, pb);
                                if v >= self.cfg.iou_gate && v > 0.0 {
                                    1.0 - v
                                } else {
                                    FORBIDDEN_COST
                                }
                            }
                            None => FORBIDDEN_COST,
                        })
                        .collect()
                })
                .collect();
            for (di, ti) in hungarian(&cost) {
                if cost[di][ti] >= FORBIDDEN_COST {
                    continue;
                }
                det_matched[di] = true;
                let t = &mut self.live[ti];
                t.state = kalman_update(&t.state, &dets[di].bbox, &params);
                t.hits += 1;
                t.age_since_update = 0;
                t.last_frame = frame_id;
                if t.status == TrackStatus::Tentative && t.hits >= self.cfg.min_hits {
                    t.status = TrackStatus::Confirmed;
                }
            }
        }

        for (d, _) in dets.iter().zip(&det_matched).filter(|(_, m)| !**m) {
            let status = if self.cfg.min_hits <= 1 {
                TrackStatus::Confirmed
            } else {
                TrackStatus::Tentative
            };
            self.live.push(Track {
                id: self.next_id,
                state: KalmanState::from_bbox(&d.bbox, &params),
                hits: 1,
                age_since_update: 0,
                status,
                first_frame: frame_id,
                last_frame: frame_id,
            });
            self.next_id += 1;
        }

        let max_age = self.cfg.max_age;
        let (keep, dead): (Vec<Track>, Vec<Track>) = std::mem::take(&mut self.live)
            .into_iter()
            .partition(|t| t.age_since_update <= max_age);
        self.live = keep;
        self.finished.extend(dead.into_iter().map(|mut t| {
            t.status = TrackStatus::Dead;
            t
        }));

        self.live
            .iter()
            .filter(|t| t.status == TrackStatus::Confirmed && t.age_since_update == 0)
            .filter_map(|t| {
                t.state.bbox().map(|bbox| TrackRow {
                    frame_id,
                    track_id: t.id,
                    bbox,
                })
            })
            .collect()
    }

    /// Every track created so far, ordered by id.
    pub fn all_tracks(&self) -> Vec<Track> {
        let mut all: Vec<Track> = self.finished.iter().chain(&self.live).cloned().collect();
        all.sort_by_key(|t| t.id);
        all
    }

    pub fn churn(&self, ground_truth: Option<&[GroundTruthObject]>) -> ChurnReport {
        let tracks = self.all_tracks();
        let total = tracks.len() as u64;
        // a dead track that had reached Confirmed still counts as confirmed
        let confirmed = tracks.iter().filter(|t| t.hits >= self.cfg.min_hits).count() as u64;
        let ground_truth_tracks =
            ground_truth.map(|g| g.iter().map(|o| o.object_id).collect::<BTreeSet<_>>().len() as u64);
        let churn_ratio = match ground_truth_tracks {
            Some(n) if n > 0 => Some(confirmed as f64 / n as f64),
            _ => None,
        };
        ChurnReport {
            total_track_ids: total,
            confirmed_track_ids: confirmed,
            ground_truth_tracks,
            churn_ratio,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrackingRun {
    pub tracks: Vec<Track>,
    pub rows: Vec<TrackRow>,
    pub report: ChurnReport,
}

/// Run the tracker over the detections of `fs`.
///
/// Frames are visited at every integer id from the first to the last frame of
/// the set, so a frame absent from the log counts as a frame with no
/// detections and ages the live tracks.
pub fn track_sequence(
    fs: &FrameSet,
    cfg: &TrackerConfig,
    ground_truth: Option<&[GroundTruthObject]>,
) -> Result<TrackingRun> {
    let mut tracker = SortTracker::new(*cfg)?;
    let mut rows = Vec::new();
    if let (Some(&first), Some(&last)) = (fs.frames.first(), fs.frames.last()) {
        for frame in first..=last {
            rows.extend(tracker.step(frame, fs.detections(frame)));
        }
    }
    let report = tracker.churn(ground_truth);
    Ok(TrackingRun {
        tracks: tracker.all_tracks(),
        rows,
        report,
    })
}

pub fn write_tracks_csv(rows: &[TrackRow]) -> String {
    let mut s = String::from("frame_id,track_id,x,y,w,h\n");
    for r in rows {
        let b = &r.bbox;
        let _ = writeln!(s, "{},{},{},{},{},{}", r.frame_id, r.track_id, b.x, b.y, b.w, b.h);
    }
    s
}
