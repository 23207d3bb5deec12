//! Measurement toolkit for frame-to-frame fluctuation in video-analytics
//! detection output.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds the shared domain types and the detection / ground-truth
//!   log formats.
//! * [`matcher`] turns detections plus ground truth into a per-frame
//!   true-positive count series.
//! * [`flux`] computes the windowed fluctuation metrics over such a series.
//! * [`stats`] runs the repeated-measures (paired) t-test used to compare two
//!   pipelines, including the Student-t special functions it needs.
//! * [`tracker`] is a SORT-style tracker whose track-id count measures how much
//!   fluctuation damages tracking.
//! * [`camsim`] simulates a camera's auto-exposure / auto-gain loop under
//!   flickering light, feeding a surrogate detector.

pub mod camsim;
pub mod error;
pub mod flux;
pub mod matcher;
pub mod model;
pub mod stats;
pub mod tracker;

pub use error::{Error, Result};
pub use model::{BBox, Detection, FrameSet, GroundTruthObject, TpSeries};
