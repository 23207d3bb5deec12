//! Signal-level simulation of a camera's auto-exposure / auto-gain loop under
//! flickering light, driving a surrogate object detector.
//!
//! Per frame `k` (start time `t_k = k / fps`):
//!
//! * illumination `L(t) = 1 + m·sin²(2π·f_mains·t)`, i.e. flicker at twice the
//!   mains frequency;
//! * captured signal `E_k = g_k · ∫ L(t) dt` over `[t_k, t_k + e_k]`, optionally
//!   quantised to `Q` levels over `[0, 2·E*]`;
//! * noise `σ_k = σ₀·g_k` and per-object SNR `c_j·E_k / σ_k`;
//! * object `j` is detected with probability `1 / (1 + exp(-β(snr - θ)))`.
//!
//! The controller moves exposure first and gain only once exposure is pinned
//! at its maximum, with a proportional-in-log law of strength `alpha`. The
//! captured `E_k` (after quantisation) is what the controller meters, so a
//! coarse quantiser whose levels straddle the target makes the loop hunt.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TpSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CamSimConfig {
    pub fps: f64,
    pub n_frames: usize,
    /// Longest exposure the controller may choose, in seconds.
    pub e_max: f64,
    pub e_min: f64,
    pub g_max: f64,
    /// Flicker depth `m` in `[0, 1]`; 0 is flicker-free light.
    pub flicker_depth: f64,
    pub mains_hz: f64,
    pub target_signal: f64,
    pub controller_alpha: f64,
    pub read_noise: f64,
    /// Number of quantiser levels (compression surrogate); `None` disables it.
    pub quantization_levels: Option<u32>,
    pub seed: u64,
}

impl Default for CamSimConfig {
    fn default() -> Self {
        CamSimConfig {
            fps: 30.0,
            n_frames: 1000,
            e_max: 0.25,
            e_min: 1.0 / 8000.0,
            g_max: 8.0,
            flicker_depth: 0.0,
            mains_hz: 60.0,
            target_signal: 1.0,
            controller_alpha: 0.5,
            read_noise: 0.02,
            quantization_levels: None,
            seed: 0,
        }
    }
}

impl CamSimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be positive, got {v}")))
            }
        };
        positive(self.fps, "fps")?;
        positive(self.e_min, "e_min")?;
        positive(self.e_max, "e_max")?;
        positive(self.mains_hz, "mains_hz")?;
        positive(self.target_signal, "target_signal")?;
        positive(self.read_noise, "read_noise")?;
        if self.n_frames == 0 {
            return Err(Error::invalid("n_frames", "must be at least 1"));
        }
        if self.e_min > self.e_max {
            return Err(Error::invalid(
                "e_min",
                format!("e_min {} exceeds e_max {}", self.e_min, self.e_max),
            ));
        }
        if !(self.g_max.is_finite() && self.g_max >= 1.0) {
            return Err(Error::invalid(
                "g_max",
                format!("must be at least 1, got {}", self.g_max),
            ));
        }
        if !(0.0..=1.0).contains(&self.flicker_depth) {
            return Err(Error::invalid(
                "flicker_depth",
                format!("must lie in [0, 1], got {}", self.flicker_depth),
            ));
        }
        if !(self.controller_alpha > 0.0 && self.controller_alpha <= 1.0) {
            return Err(Error::invalid(
                "controller_alpha",
                format!("must lie in (0, 1], got {}", self.controller_alpha),
            ));
        }
        if let Some(q) = self.quantization_levels {
            if q < 2 {
                return Err(Error::invalid(
                    "quantization_levels",
                    format!("need at least 2 levels, got {q}"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub object_id: u32,
    pub contrast: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub objects: Vec<SceneObject>,
    pub detector_beta: f64,
    pub detector_theta: f64,
}

impl Default for SceneConfig {
    /// Thirty static objects with contrasts spread evenly over [0.05, 0.08].
    /// At the default target signal and read noise these sit around the
    /// detector threshold, where capture changes move detection rates most.
    fn default() -> Self {
        SceneConfig::with_contrast_range(30, 0.05, 0.08)
    }
}

impl SceneConfig {
    pub fn with_contrast_range(count: u32, low: f64, high: f64) -> Self {
        let objects = (0..count)
            .map(|j| {
                let frac = if count > 1 {
                    f64::from(j) / f64::from(count - 1)
                } else {
                    0.0
                };
                SceneObject {
                    object_id: j,
                    contrast: low + (high - low) * frac,
                }
            })
            .collect();
        SceneConfig {
            objects,
            detector_beta: 8.0,
            detector_theta: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(o) = self.objects.iter().find(|o| !(o.contrast > 0.0 && o.contrast <= 1.0)) {
            return Err(Error::invalid(
                "contrast",
                format!(
                    "object {}: contrast must lie in (0, 1], got {}",
                    o.object_id, o.contrast
                ),
            ));
        }
        if !(self.detector_beta.is_finite() && self.detector_beta > 0.0) {
            return Err(Error::invalid("detector_beta", "must be positive"));
        }
        if !self.detector_theta.is_finite() {
            return Err(Error::invalid("detector_theta", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSignal {
    pub frame_id: u64,
    pub exposure: f64,
    pub gain: f64,
    /// Captured signal after optional quantisation.
    pub signal: f64,
    pub noise: f64,
    pub per_object_snr: Vec<f64>,
}

pub fn illumination(t: f64, cfg: &CamSimConfig) -> f64 {
    let s = (2.0 * PI * cfg.mains_hz * t).sin();
    1.0 + cfg.flicker_depth * s * s
}

/// `∫ L(t) dt` over `[t0, t0 + e]`.
///
/// With `ω = 4π·f_mains`, the integral is `e + m·(e/2 - (sin ω(t0+e) - sin ωt0)/(2ω))`;
/// the sine difference is taken in product form to avoid cancellation for
/// short exposures late in a run.
pub fn integrated_illumination(t0: f64, e: f64, cfg: &CamSimConfig) -> f64 {
    let m = cfg.flicker_depth;
    if m == 0.0 {
        return e;
    }
    let omega = 4.0 * PI * cfg.mains_hz;
    let sin_diff = 2.0 * (omega * (t0 + e / 2.0)).cos() * (omega * e / 2.0).sin();
    e + m * (e / 2.0 - sin_diff / (2.0 * omega))
}

/// Mid-rise quantiser with `q` levels over `[0, 2·target]`.
pub fn quantize(signal: f64, q: u32, target: f64) -> f64 {
    let width = 2.0 * target / f64::from(q);
    let bin = (signal / width).floor().clamp(0.0, f64::from(q - 1));
    (bin + 0.5) * width
}

fn frame_start(k: u64, cfg: &CamSimConfig) -> f64 {
    k as f64 / cfg.fps
}

pub fn capture_frame(k: u64, e: f64, g: f64, cfg: &CamSimConfig, scene: &SceneConfig) -> FrameSignal {
    let raw = g * integrated_illumination(frame_start(k, cfg), e, cfg);
    let signal = match cfg.quantization_levels {
        Some(q) => quantize(raw, q, cfg.target_signal),
        None => raw,
    };
    let noise = cfg.read_noise * g;
    FrameSignal {
        frame_id: k,
        exposure: e,
        gain: g,
        signal,
        noise,
        per_object_snr: scene.objects.iter().map(|o| o.contrast * signal / noise).collect(),
    }
}

/// Next `(exposure, gain)` from the previous frame's metered signal.
pub fn auto_controller_step(prev: &FrameSignal, cfg: &CamSimConfig) -> (f64, f64) {
    if prev.signal.is_nan() || prev.signal <= 0.0 {
        return (cfg.e_max, cfg.g_max);
    }
    let factor = (cfg.target_signal / prev.signal).powf(cfg.controller_alpha);
    let e_next = (prev.exposure * factor).clamp(cfg.e_min, cfg.e_max);
    let g_next = if e_next >= cfg.e_max && prev.signal < cfg.target_signal {
        prev.gain * factor
    } else {
        // never raise gain while exposure still has headroom
        prev.gain * factor.min(1.0)
    };
    (e_next, g_next.clamp(1.0, cfg.g_max))
}

pub fn detection_probability(snr: f64, scene: &SceneConfig) -> f64 {
    1.0 / (1.0 + (-scene.detector_beta * (snr - scene.detector_theta)).exp())
}

/// Random stream for one frame: the run seed picks the key, the frame index
/// picks the stream, and objects draw from it in order. Earlier frames and
/// objects are unaffected by how many frames or objects follow.
fn frame_rng(seed: u64, frame: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub signals: Vec<FrameSignal>,
    pub series: TpSeries,
}

/// Closed-loop run. The first frame is captured at `(e_max, 1)`.
pub fn simulate(cam: &CamSimConfig, scene: &SceneConfig) -> Result<SimulationRun> {
    cam.validate()?;
    scene.validate()?;
    let n = cam.n_frames;
    let gt = scene.objects.len() as u32;
    let mut signals = Vec::with_capacity(n);
    let mut tp = Vec::with_capacity(n);
    let (mut e, mut g) = (cam.e_max, 1.0);
    for k in 0..n as u64 {
        let sig = capture_frame(k, e, g, cam, scene);
        let mut rng = frame_rng(cam.seed, k);
        let detected = sig
            .per_object_snr
            .iter()
            .filter(|&&snr| rng.random::<f64>() < detection_probability(snr, scene))
            .count() as u32;
        tp.push(detected);
        (e, g) = auto_controller_step(&sig, cam);
        signals.push(sig);
    }
    let series = TpSeries::from_counts(tp, vec![gt; n])?;
    Ok(SimulationRun { signals, series })
}

pub fn write_signals_csv(signals: &[FrameSignal]) -> String {
    let mut s = String::from("frame_id,exposure_s,gain,E,sigma\n");
    for f in signals {
        let _ = writeln!(s, "{},{},{},{},{}", f.frame_id, f.exposure, f.gain, f.signal, f.noise);
    }
    s
}
