//! Effective configuration: built-in defaults, overlaid by a flat
//! `key = value` file, overlaid by command-line flags.

use std::collections::BTreeMap;

use vastab_core::camsim::{CamSimConfig, SceneConfig};
use vastab_core::matcher::{MatchConfig, MatchStrategy};
use vastab_core::stats::{Alternative, TestOptions};
use vastab_core::tracker::TrackerConfig;

use crate::error::CliError;

/// Groups of keys; each command echoes the groups it reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    Matching,
    Windows,
    Test,
    Tracker,
    Camera,
    Scene,
}

const KEYS: &[(&str, Section)] = &[
    ("iou_threshold", Section::Matching),
    ("class_sensitive", Section::Matching),
    ("strategy", Section::Matching),
    ("windows", Section::Windows),
    ("alpha", Section::Test),
    ("alternative", Section::Test),
    ("max_age", Section::Tracker),
    ("min_hits", Section::Tracker),
    ("iou_gate", Section::Tracker),
    ("measurement_sigma", Section::Tracker),
    ("fps", Section::Camera),
    ("frames", Section::Camera),
    ("e_max", Section::Camera),
    ("e_min", Section::Camera),
    ("g_max", Section::Camera),
    ("flicker_depth", Section::Camera),
    ("mains_hz", Section::Camera),
    ("target_signal", Section::Camera),
    ("controller_alpha", Section::Camera),
    ("read_noise", Section::Camera),
    ("quantization_levels", Section::Camera),
    ("seed", Section::Camera),
    ("objects", Section::Scene),
    ("contrast_low", Section::Scene),
    ("contrast_high", Section::Scene),
    ("detector_beta", Section::Scene),
    ("detector_theta", Section::Scene),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub matching: MatchConfig,
    pub windows: Vec<usize>,
    pub test: TestOptions,
    pub tracker: TrackerConfig,
    pub camera: CamSimConfig,
    pub objects: u32,
    pub contrast_low: f64,
    pub contrast_high: f64,
    pub detector_beta: f64,
    pub detector_theta: f64,
}

impl Default for Settings {
    fn default() -> Self {
        let scene = SceneConfig::default();
        let contrasts: Vec<f64> = scene.objects.iter().map(|o| o.contrast).collect();
        Settings {
            matching: MatchConfig::default(),
            windows: vec![2, 10],
            test: TestOptions::default(),
            tracker: TrackerConfig::default(),
            camera: CamSimConfig::default(),
            objects: scene.objects.len() as u32,
            contrast_low: contrasts.first().copied().unwrap_or(0.05),
            contrast_high: contrasts.last().copied().unwrap_or(0.08),
            detector_beta: scene.detector_beta,
            detector_theta: scene.detector_theta,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Input(format!("config key `{key}`: cannot parse `{value}`")))
}

fn flag(key: &str, value: &str) -> Result<bool, CliError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Input(format!(
            "config key `{key}`: expected true or false, got `{value}`"
        ))),
    }
}

pub fn parse_strategy(value: &str) -> Result<MatchStrategy, CliError> {
    match value {
        "greedy" => Ok(MatchStrategy::GreedyByConfidence),
        "optimal" => Ok(MatchStrategy::OptimalAssignment),
        _ => Err(CliError::Input(format!(
            "strategy must be greedy or optimal, got `{value}`"
        ))),
    }
}

fn strategy_name(s: MatchStrategy) -> &'static str {
    match s {
        MatchStrategy::GreedyByConfidence => "greedy",
        MatchStrategy::OptimalAssignment => "optimal",
    }
}

pub fn parse_alternative(value: &str) -> Result<Alternative, CliError> {
    match value {
        "two-sided" => Ok(Alternative::TwoSided),
        "greater" => Ok(Alternative::Greater),
        "less" => Ok(Alternative::Less),
        _ => Err(CliError::Input(format!(
            "alternative must be two-sided, greater or less, got `{value}`"
        ))),
    }
}

fn alternative_name(a: Alternative) -> &'static str {
    match a {
        Alternative::TwoSided => "two-sided",
        Alternative::Greater => "greater",
        Alternative::Less => "less",
    }
}

/// `N` or `none`.
pub fn parse_levels(value: &str) -> Result<Option<u32>, CliError> {
    if value.eq_ignore_ascii_case("none") {
        Ok(None)
    } else {
        num("quantization_levels", value).map(Some)
    }
}

impl Settings {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        match key {
            "iou_threshold" => self.matching.iou_threshold = num(key, value)?,
            "class_sensitive" => self.matching.class_sensitive = flag(key, value)?,
            "strategy" => self.matching.strategy = parse_strategy(value)?,
            "windows" => {
                self.windows = value.split(',').map(|w| num(key, w.trim())).collect::<Result<_, _>>()?;
            }
            "alpha" => self.test.alpha = num(key, value)?,
            "alternative" => self.test.alternative = parse_alternative(value)?,
            "max_age" => self.tracker.max_age = num(key, value)?,
            "min_hits" => self.tracker.min_hits = num(key, value)?,
            "iou_gate" => self.tracker.iou_gate = num(key, value)?,
            "measurement_sigma" => self.tracker.kalman.measurement_sigma = num(key, value)?,
            "fps" => self.camera.fps = num(key, value)?,
            "frames" => self.camera.n_frames = num(key, value)?,
            "e_max" => self.camera.e_max = num(key, value)?,
            "e_min" => self.camera.e_min = num(key, value)?,
            "g_max" => self.camera.g_max = num(key, value)?,
            "flicker_depth" => self.camera.flicker_depth = num(key, value)?,
            "mains_hz" => self.camera.mains_hz = num(key, value)?,
            "target_signal" => self.camera.target_signal = num(key, value)?,
            "controller_alpha" => self.camera.controller_alpha = num(key, value)?,
            "read_noise" => self.camera.read_noise = num(key, value)?,
            "quantization_levels" => self.camera.quantization_levels = parse_levels(value)?,
            "seed" => self.camera.seed = num(key, value)?,
            "objects" => self.objects = num(key, value)?,
            "contrast_low" => self.contrast_low = num(key, value)?,
            "contrast_high" => self.contrast_high = num(key, value)?,
            "detector_beta" => self.detector_beta = num(key, value)?,
            "detector_theta" => self.detector_theta = num(key, value)?,
            _ => return Err(CliError::Input(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Apply a config file. Blank lines and lines starting with `#` are
    /// ignored; every other line must be `key = value`.
    pub fn apply_file(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Input(format!("{origin}: line {}: expected `key = value`", i + 1)))?;
            self.set(key.trim(), value)
                .map_err(|e| CliError::Input(format!("{origin}: line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    /// Apply a `key=value` override given on the command line.
    pub fn apply_pair(&mut self, pair: &str) -> Result<(), CliError> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("expected key=value, got `{pair}`")))?;
        self.set(key.trim(), value)
    }

    fn get(&self, key: &str) -> String {
        match key {
            "iou_threshold" => self.matching.iou_threshold.to_string(),
            "class_sensitive" => self.matching.class_sensitive.to_string(),
            "strategy" => strategy_name(self.matching.strategy).to_string(),
            "windows" => self.windows.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
            "alpha" => self.test.alpha.to_string(),
            "alternative" => alternative_name(self.test.alternative).to_string(),
            "max_age" => self.tracker.max_age.to_string(),
            "min_hits" => self.tracker.min_hits.to_string(),
            "iou_gate" => self.tracker.iou_gate.to_string(),
            "measurement_sigma" => self.tracker.kalman.measurement_sigma.to_string(),
            "fps" => self.camera.fps.to_string(),
            "frames" => self.camera.n_frames.to_string(),
            "e_max" => self.camera.e_max.to_string(),
            "e_min" => self.camera.e_min.to_string(),
            "g_max" => self.camera.g_max.to_string(),
            "flicker_depth" => self.camera.flicker_depth.to_string(),
            "mains_hz" => self.camera.mains_hz.to_string(),
            "target_signal" => self.camera.target_signal.to_string(),
            "controller_alpha" => self.camera.controller_alpha.to_string(),
            "read_noise" => self.camera.read_noise.to_string(),
            "quantization_levels" => self
                .camera
                .quantization_levels
                .map_or_else(|| "none".to_string(), |q| q.to_string()),
            "seed" => self.camera.seed.to_string(),
            "objects" => self.objects.to_string(),
            "contrast_low" => self.contrast_low.to_string(),
            "contrast_high" => self.contrast_high.to_string(),
            "detector_beta" => self.detector_beta.to_string(),
            "detector_theta" => self.detector_theta.to_string(),
            _ => unreachable!("key table and getter disagree on `{key}`"),
        }
    }

    /// Effective values of the given sections, in config-file form.
    pub fn snapshot(&self, sections: &[Section]) -> BTreeMap<String, String> {
        KEYS.iter()
            .filter(|(_, s)| sections.contains(s))
            .map(|(k, _)| (k.to_string(), self.get(k)))
            .collect()
    }

    pub fn scene(&self) -> SceneConfig {
        SceneConfig {
            detector_beta: self.detector_beta,
            detector_theta: self.detector_theta,
            ..SceneConfig::with_contrast_range(self.objects, self.contrast_low, self.contrast_high)
        }
    }

    /// Range checks for the sections a command uses.
    pub fn validate(&self, sections: &[Section]) -> Result<(), CliError> {
        for s in sections {
            match s {
                Section::Matching => self.matching.validate()?,
                Section::Windows => {
                    if self.windows.is_empty() {
                        return Err(CliError::Input("at least one window is required".into()));
                    }
                    if let Some(w) = self.windows.iter().find(|&&w| w < 2) {
                        return Err(CliError::Input(format!("window must be at least 2, got {w}")));
                    }
                }
                Section::Test => self.test.validate()?,
                Section::Tracker => self.tracker.validate()?,
                Section::Camera => self.camera.validate()?,
                Section::Scene => {
                    if self.objects == 0 {
                        return Err(CliError::Input("objects must be at least 1".into()));
                    }
                    if self.contrast_low > self.contrast_high {
                        return Err(CliError::Input(format!(
                            "contrast_low {} exceeds contrast_high {}",
                            self.contrast_low, self.contrast_high
                        )));
                    }
                    self.scene().validate()?;
                }
            }
        }
        Ok(())
    }
}
