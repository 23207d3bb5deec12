//! Shared domain types and the on-disk log formats.
//!
//! Detection logs come as CSV (`frame_id,class,confidence,x,y,w,h`, header
//! optional) or JSON lines (`{"frame":..,"class":..,"conf":..,"bbox":[x,y,w,h]}`).
//! Ground truth is MOT-style CSV (`frame_id,object_id,x,y,w,h,class`).
//! Count series are emitted and read back as `frame_id,tp,gt`.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(Error::invalid("bbox", "coordinates must be finite"));
        }
        if w <= 0.0 {
            return Err(Error::invalid("w", format!("width must be positive, got {w}")));
        }
        if h <= 0.0 {
            return Err(Error::invalid("h", format!("height must be positive, got {h}")));
        }
        Ok(BBox { x, y, w, h })
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn scaled(&self, s: f64) -> BBox {
        BBox {
            x: self.x * s,
            y: self.y * s,
            w: self.w * s,
            h: self.h * s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame_id: u64,
    pub bbox: BBox,
    pub class_label: String,
    pub confidence: f64,
}

impl Detection {
    pub fn new(frame_id: u64, class_label: impl Into<String>, confidence: f64, bbox: BBox) -> Result<Self> {
        check_confidence(confidence).map_err(|m| Error::invalid("confidence", m))?;
        Ok(Detection {
            frame_id,
            bbox,
            class_label: class_label.into(),
            confidence,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthObject {
    pub frame_id: u64,
    pub object_id: i64,
    pub bbox: BBox,
    pub class_label: String,
}

/// Class labels from different detectors disagree on casing, so labels are
/// compared after ASCII lowercasing.
pub fn same_class(a: &str, b: &str) -> bool {
    a.eq_ignore_ascii_case(b)
}

fn check_confidence(c: f64) -> std::result::Result<(), String> {
    if c.is_finite() && (0.0..=1.0).contains(&c) {
        Ok(())
    } else {
        Err(format!("confidence must lie in [0, 1], got {c}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    Csv,
    Jsonl,
}

impl LogFormat {
    /// Guess the format from a file name: `.jsonl`/`.ndjson`/`.json` are JSON
    /// lines, everything else CSV.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
        {
            Some(ext) if ext == "jsonl" || ext == "ndjson" || ext == "json" => LogFormat::Jsonl,
            _ => LogFormat::Csv,
        }
    }
}

/// Iterate non-blank lines with 1-based line numbers, tolerating CRLF.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn decode(bytes: &[u8]) -> Result<&str> {
    std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        Error::parse(line, "-", "input is not valid UTF-8")
    })
}

fn field<'a>(cols: &[&'a str], idx: usize, name: &str, line: usize) -> Result<&'a str> {
    cols.get(idx)
        .map(|s| s.trim())
        .ok_or_else(|| Error::parse(line, name, "missing column"))
}

fn num<T: std::str::FromStr>(cols: &[&str], idx: usize, name: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = field(cols, idx, name, line)?;
    raw.parse::<T>()
        .map_err(|e| Error::parse(line, name, format!("cannot parse {raw:?}: {e}")))
}

fn bbox_at(line: usize, x: f64, y: f64, w: f64, h: f64) -> Result<BBox> {
    BBox::new(x, y, w, h).map_err(|e| match e {
        Error::InvalidValue { field, message } => Error::Parse { line, field, message },
        other => other,
    })
}

fn is_header(first_col: &str, expected: &str) -> bool {
    first_col.trim().eq_ignore_ascii_case(expected)
}

pub fn parse_detection_log(bytes: &[u8], format: LogFormat) -> Result<Vec<Detection>> {
    let text = decode(bytes)?;
    match format {
        LogFormat::Csv => parse_detection_csv(text),
        LogFormat::Jsonl => parse_detection_jsonl(text),
    }
}

fn parse_detection_csv(text: &str) -> Result<Vec<Detection>> {
    let mut out = Vec::new();
    for (pos, (line, raw)) in lines(text).enumerate() {
        let cols: Vec<&str> = raw.split(',').collect();
        if pos == 0 && is_header(cols[0], "frame_id") {
            continue;
        }
        if cols.len() != 7 {
            return Err(Error::parse(
                line,
                "record",
                format!("expected 7 columns, found {}", cols.len()),
            ));
        }
        let frame_id = num::<u64>(&cols, 0, "frame_id", line)?;
        let class = field(&cols, 1, "class", line)?;
        if class.is_empty() {
            return Err(Error::parse(line, "class", "empty class label"));
        }
        let confidence = num::<f64>(&cols, 2, "confidence", line)?;
        check_confidence(confidence).map_err(|m| Error::parse(line, "confidence", m))?;
        let bbox = bbox_at(
            line,
            num(&cols, 3, "x", line)?,
            num(&cols, 4, "y", line)?,
            num(&cols, 5, "w", line)?,
            num(&cols, 6, "h", line)?,
        )?;
        out.push(Detection {
            frame_id,
            bbox,
            class_label: class.to_string(),
            confidence,
        });
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonDetection {
    frame: u64,
    class: String,
    conf: f64,
    bbox: [f64; 4],
}

fn parse_detection_jsonl(text: &str) -> Result<Vec<Detection>> {
    let mut out = Vec::new();
    for (line, raw) in lines(text) {
        let rec: JsonDetection = serde_json::from_str(raw).map_err(|e| {
            let msg = e.to_string();
            let field = ["frame", "class", "conf", "bbox"]
                .into_iter()
                .find(|f| msg.contains(&format!("`{f}`")))
                .unwrap_or("record");
            Error::parse(line, field, msg)
        })?;
        check_confidence(rec.conf).map_err(|m| Error::parse(line, "conf", m))?;
        let [x, y, w, h] = rec.bbox;
        let bbox = bbox_at(line, x, y, w, h)?;
        out.push(Detection {
            frame_id: rec.frame,
            bbox,
            class_label: rec.class,
            confidence: rec.conf,
        });
    }
    Ok(out)
}

pub fn parse_ground_truth(bytes: &[u8]) -> Result<Vec<GroundTruthObject>> {
    let text = decode(bytes)?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (pos, (line, raw)) in lines(text).enumerate() {
        let cols: Vec<&str> = raw.split(',').collect();
        if pos == 0 && is_header(cols[0], "frame_id") {
            continue;
        }
        if cols.len() != 7 {
            return Err(Error::parse(
                line,
                "record",
                format!("expected 7 columns, found {}", cols.len()),
            ));
        }
        let frame_id = num::<u64>(&cols, 0, "frame_id", line)?;
        let object_id = num::<i64>(&cols, 1, "object_id", line)?;
        let bbox = bbox_at(
            line,
            num(&cols, 2, "x", line)?,
            num(&cols, 3, "y", line)?,
            num(&cols, 4, "w", line)?,
            num(&cols, 5, "h", line)?,
        )?;
        let class = field(&cols, 6, "class", line)?;
        if class.is_empty() {
            return Err(Error::parse(line, "class", "empty class label"));
        }
        if !seen.insert((frame_id, object_id)) {
            return Err(Error::parse(
                line,
                "object_id",
                format!("duplicate object {object_id} in frame {frame_id}"),
            ));
        }
        out.push(GroundTruthObject {
            frame_id,
            object_id,
            bbox,
            class_label: class.to_string(),
        });
    }
    Ok(out)
}

pub fn write_detections_csv(dets: &[Detection]) -> String {
    let mut s = String::from("frame_id,class,confidence,x,y,w,h\n");
    for d in dets {
        let b = &d.bbox;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            d.frame_id, d.class_label, d.confidence, b.x, b.y, b.w, b.h
        );
    }
    s
}

pub fn write_detections_jsonl(dets: &[Detection]) -> String {
    let mut s = String::new();
    for d in dets {
        let rec = JsonDetection {
            frame: d.frame_id,
            class: d.class_label.clone(),
            conf: d.confidence,
            bbox: [d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h],
        };
        s.push_str(&serde_json::to_string(&rec).expect("plain struct serialises"));
        s.push('\n');
    }
    s
}

pub fn write_ground_truth_csv(gts: &[GroundTruthObject]) -> String {
    let mut s = String::from("frame_id,object_id,x,y,w,h,class\n");
    for g in gts {
        let b = &g.bbox;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            g.frame_id, g.object_id, b.x, b.y, b.w, b.h, g.class_label
        );
    }
    s
}

/// Detections and ground truth grouped by frame.
///
/// `frames` is the sorted union of every frame id seen in either input.
/// Records inside a frame are kept in a canonical order (detections by
/// descending confidence then geometry and label, ground truth by object id),
/// which makes construction independent of input order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameSet {
    pub frames: Vec<u64>,
    pub detections_by_frame: BTreeMap<u64, Vec<Detection>>,
    pub ground_truth_by_frame: BTreeMap<u64, Vec<GroundTruthObject>>,
}

impl FrameSet {
    pub fn detections(&self, frame_id: u64) -> &[Detection] {
        self.detections_by_frame.get(&frame_id).map_or(&[], Vec::as_slice)
    }

    pub fn ground_truth(&self, frame_id: u64) -> &[GroundTruthObject] {
        self.ground_truth_by_frame.get(&frame_id).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

fn detection_order(a: &Detection, b: &Detection) -> std::cmp::Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then_with(|| a.bbox.x.total_cmp(&b.bbox.x))
        .then_with(|| a.bbox.y.total_cmp(&b.bbox.y))
        .then_with(|| a.bbox.w.total_cmp(&b.bbox.w))
        .then_with(|| a.bbox.h.total_cmp(&b.bbox.h))
        .then_with(|| a.class_label.cmp(&b.class_label))
}

fn ground_truth_order(a: &GroundTruthObject, b: &GroundTruthObject) -> std::cmp::Ordering {
    a.object_id
        .cmp(&b.object_id)
        .then_with(|| a.bbox.x.total_cmp(&b.bbox.x))
        .then_with(|| a.bbox.y.total_cmp(&b.bbox.y))
        .then_with(|| a.bbox.w.total_cmp(&b.bbox.w))
        .then_with(|| a.bbox.h.total_cmp(&b.bbox.h))
        .then_with(|| a.class_label.cmp(&b.class_label))
}

pub fn build_frameset(dets: &[Detection], gts: &[GroundTruthObject]) -> FrameSet {
    let mut detections_by_frame: BTreeMap<u64, Vec<Detection>> = BTreeMap::new();
    let mut ground_truth_by_frame: BTreeMap<u64, Vec<GroundTruthObject>> = BTreeMap::new();
    for d in dets {
        detections_by_frame.entry(d.frame_id).or_default().push(d.clone());
    }
    for g in gts {
        ground_truth_by_frame.entry(g.frame_id).or_default().push(g.clone());
    }
    for v in detections_by_frame.values_mut() {
        v.sort_by(detection_order);
    }
    for v in ground_truth_by_frame.values_mut() {
        v.sort_by(ground_truth_order);
    }
    let mut frames: Vec<u64> = detections_by_frame
        .keys()
        .chain(ground_truth_by_frame.keys())
        .copied()
        .collect();
    frames.sort_unstable();
    frames.dedup();
    for f in &frames {
        detections_by_frame.entry(*f).or_default();
        ground_truth_by_frame.entry(*f).or_default();
    }
    FrameSet {
        frames,
        detections_by_frame,
        ground_truth_by_frame,
    }
}

/// Per-frame true-positive and ground-truth counts.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TpSeries {
    pub frame_ids: Vec<u64>,
    pub tp: Vec<u32>,
    pub gt: Vec<u32>,
}

impl TpSeries {
    pub fn new(frame_ids: Vec<u64>, tp: Vec<u32>, gt: Vec<u32>) -> Result<Self> {
        if frame_ids.len() != tp.len() {
            return Err(Error::LengthMismatch {
                left: frame_ids.len(),
                right: tp.len(),
            });
        }
        if tp.len() != gt.len() {
            return Err(Error::LengthMismatch {
                left: tp.len(),
                right: gt.len(),
            });
        }
        if let Some(i) = (0..tp.len()).find(|&i| tp[i] > gt[i]) {
            return Err(Error::invalid(
                "tp",
                format!("frame {}: tp {} exceeds gt {}", frame_ids[i], tp[i], gt[i]),
            ));
        }
        Ok(TpSeries { frame_ids, tp, gt })
    }

    /// Series with frame ids `0..n`.
    pub fn from_counts(tp: Vec<u32>, gt: Vec<u32>) -> Result<Self> {
        let ids = (0..tp.len() as u64).collect();
        TpSeries::new(ids, tp, gt)
    }

    pub fn len(&self) -> usize {
        self.tp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tp.is_empty()
    }

    pub fn mean_tp(&self) -> Option<f64> {
        if self.tp.is_empty() {
            return None;
        }
        Some(self.tp.iter().map(|&v| f64::from(v)).sum::<f64>() / self.tp.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("frame_id,tp,gt\n");
        for i in 0..self.len() {
            let _ = writeln!(s, "{},{},{}", self.frame_ids[i], self.tp[i], self.gt[i]);
        }
        s
    }

    pub fn parse_csv(bytes: &[u8]) -> Result<Self> {
        let text = decode(bytes)?;
        let (mut ids, mut tp, mut gt) = (Vec::new(), Vec::new(), Vec::new());
        for (pos, (line, raw)) in lines(text).enumerate() {
            let cols: Vec<&str> = raw.split(',').collect();
            if pos == 0 && is_header(cols[0], "frame_id") {
                continue;
            }
            if cols.len() != 3 {
                return Err(Error::parse(
                    line,
                    "record",
                    format!("expected 3 columns, found {}", cols.len()),
                ));
            }
            ids.push(num::<u64>(&cols, 0, "frame_id", line)?);
            tp.push(num::<u32>(&cols, 1, "tp", line)?);
            gt.push(num::<u32>(&cols, 2, "gt", line)?);
        }
        TpSeries::new(ids, tp, gt)
    }
}
