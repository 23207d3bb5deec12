//! Windowed fluctuation of true-positive counts.
//!
//! For a window of `n` consecutive positions starting at `i`, the fluctuation
//! is the spread of true positives normalised by the mean ground truth:
//!
//! ```text
//! (max tp[i..i+n] - min tp[i..i+n]) / mean(gt[i..i+n])
//! ```
//!
//! `n = 2` reduces to `|tp(i) - tp(i+1)| / mean(gt(i), gt(i+1))` (the F2
//! metric) and `n = 10` is F10. Windows whose mean ground truth is zero have
//! no defined value; they are skipped and counted.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TpSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxSeries {
    pub window: usize,
    pub values: Vec<f64>,
    /// Frame id at which each valued window starts, parallel to `values`.
    pub window_start_frames: Vec<u64>,
    pub skipped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxSummary {
    pub max: f64,
    pub mean: f64,
    pub window: usize,
}

pub fn f2(series: &TpSeries) -> Result<FluxSeries> {
    fwindow(series, 2)
}

pub fn fwindow(series: &TpSeries, n: usize) -> Result<FluxSeries> {
    if n < 2 {
        return Err(Error::invalid("window", format!("must be at least 2, got {n}")));
    }
    if series.len() < n {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            needed: n,
        });
    }
    let mut values = Vec::with_capacity(series.len() - n + 1);
    let mut starts = Vec::with_capacity(series.len() - n + 1);
    let mut skipped = 0;
    for (i, (tp, gt)) in series.tp.windows(n).zip(series.gt.windows(n)).enumerate() {
        let gt_sum: u64 = gt.iter().map(|&g| u64::from(g)).sum();
        if gt_sum == 0 {
            skipped += 1;
            continue;
        }
        let hi = *tp.iter().max().expect("window is non-empty");
        let lo = *tp.iter().min().expect("window is non-empty");
        let mean_gt = gt_sum as f64 / n as f64;
        values.push(f64::from(hi - lo) / mean_gt);
        starts.push(series.frame_ids[i]);
    }
    Ok(FluxSeries {
        window: n,
        values,
        window_start_frames: starts,
        skipped,
    })
}

pub fn summarize(flux: &FluxSeries) -> Result<FluxSummary> {
    if flux.values.is_empty() {
        return Err(Error::Empty);
    }
    let max = flux.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = flux.values.iter().sum::<f64>() / flux.values.len() as f64;
    // the mean of non-negative values can exceed their max only by rounding
    Ok(FluxSummary {
        max,
        mean: mean.min(max),
        window: flux.window,
    })
}

impl FluxSeries {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("window_start_frame,value\n");
        for (f, v) in self.window_start_frames.iter().zip(&self.values) {
            let _ = writeln!(s, "{f},{v}");
        }
        s
    }
}

impl FluxSummary {
    /// Human-readable line with percentages.
    pub fn describe(&self) -> String {
        format!(
            "F{}: max {:.1}%, mean {:.1}%",
            self.window,
            self.max * 100.0,
            self.mean * 100.0
        )
    }
}
