use std::path::{Path, PathBuf};

use serde::Serialize;

use vastab_core::camsim::{simulate, write_signals_csv, SimulationRun};
use vastab_core::flux::{fwindow, summarize, FluxSummary};
use vastab_core::matcher::count_series;
use vastab_core::model::{build_frameset, parse_detection_log, parse_ground_truth, LogFormat};
use vastab_core::stats::{compare_series, PairedTestReport};
use vastab_core::tracker::{track_sequence, write_tracks_csv, ChurnReport};
use vastab_core::{Detection, GroundTruthObject, TpSeries};

use crate::config::{parse_levels, Section, Settings};
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::{Cli, Command, Format, GlobalArgs, MatchArgs, SimArgs, TestArgs, TrackArgs, WindowArgs};

/// Run the parsed command; returns the human-readable summary lines.
pub fn execute(cli: &Cli) -> Result<Vec<String>, CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Analyze {
            detections,
            ground_truth,
            matching,
            windows,
        } => {
            let sections = [Section::Matching, Section::Windows];
            let (settings, manifest) = prepare(g, "analyze", &sections, |s| {
                matching.apply(s)?;
                windows.apply(s);
                Ok(())
            })?;
            analyze(g, settings, manifest, detections, ground_truth)
        }
        Command::Compare {
            run_a,
            run_b,
            ground_truth,
            matching,
            windows,
            test,
        } => {
            let mut sections = vec![Section::Windows, Section::Test];
            if ground_truth.is_some() {
                sections.insert(0, Section::Matching);
            }
            let (settings, manifest) = prepare(g, "compare", &sections, |s| {
                matching.apply(s)?;
                windows.apply(s);
                test.apply(s)
            })?;
            compare(g, settings, manifest, run_a, run_b, ground_truth.as_deref())
        }
        Command::Track {
            detections,
            ground_truth,
            tracker,
        } => {
            let (settings, manifest) = prepare(g, "track", &[Section::Tracker], |s| {
                tracker.apply(s);
                Ok(())
            })?;
            track(g, settings, manifest, detections, ground_truth.as_deref())
        }
        Command::Simulate { sim, ab, windows, test } => {
            let mut sections = vec![Section::Camera, Section::Scene, Section::Windows];
            if ab.is_some() {
                sections.push(Section::Test);
            }
            let (settings, mut manifest) = prepare(g, "simulate", &sections, |s| {
                sim.apply(s)?;
                windows.apply(s);
                test.apply(s)
            })?;
            match ab {
                None => simulate_one(g, settings, manifest),
                Some(ab_arg) => {
                    manifest.config_snapshot.insert("ab".into(), ab_arg.clone());
                    simulate_ab(g, settings, manifest, ab_arg)
                }
            }
        }
    }
}

impl MatchArgs {
    fn apply(&self, s: &mut Settings) -> Result<(), CliError> {
        if let Some(v) = self.iou_threshold {
            s.matching.iou_threshold = v;
        }
        if let Some(v) = &self.strategy {
            s.matching.strategy = crate::config::parse_strategy(v)?;
        }
        if self.class_agnostic {
            s.matching.class_sensitive = false;
        }
        Ok(())
    }
}

impl WindowArgs {
    fn apply(&self, s: &mut Settings) {
        if !self.windows.is_empty() {
            s.windows = self.windows.clone();
        }
    }
}

impl TestArgs {
    fn apply(&self, s: &mut Settings) -> Result<(), CliError> {
        if let Some(v) = self.alpha {
            s.test.alpha = v;
        }
        if let Some(v) = &self.alternative {
            s.test.alternative = crate::config::parse_alternative(v)?;
        }
        Ok(())
    }
}

impl TrackArgs {
    fn apply(&self, s: &mut Settings) {
        if let Some(v) = self.max_age {
            s.tracker.max_age = v;
        }
        if let Some(v) = self.min_hits {
            s.tracker.min_hits = v;
        }
        if let Some(v) = self.iou_gate {
            s.tracker.iou_gate = v;
        }
    }
}

impl SimArgs {
    fn apply(&self, s: &mut Settings) -> Result<(), CliError> {
        let c = &mut s.camera;
        if let Some(v) = self.frames {
            c.n_frames = v;
        }
        if let Some(v) = self.fps {
            c.fps = v;
        }
        if let Some(v) = self.e_max {
            c.e_max = v;
        }
        if let Some(v) = self.e_min {
            c.e_min = v;
        }
        if let Some(v) = self.g_max {
            c.g_max = v;
        }
        if let Some(v) = self.flicker_depth {
            c.flicker_depth = v;
        }
        if let Some(v) = self.mains_hz {
            c.mains_hz = v;
        }
        if let Some(v) = &self.quantization_levels {
            c.quantization_levels = parse_levels(v)?;
        }
        if let Some(v) = self.objects {
            s.objects = v;
        }
        Ok(())
    }
}

/// Merge defaults, config file, `--set` pairs, command flags and `--seed`, in
/// that order, then validate the sections the command reads.
fn prepare(
    g: &GlobalArgs,
    command: &str,
    sections: &[Section],
    flags: impl FnOnce(&mut Settings) -> Result<(), CliError>,
) -> Result<(Settings, RunManifest), CliError> {
    let mut manifest = RunManifest::new(command, Default::default());
    let mut settings = Settings::default();
    if let Some(path) = &g.config {
        let bytes = manifest.read_input(path)?;
        let text = String::from_utf8(bytes).map_err(|_| CliError::Input(format!("{}: not UTF-8", path.display())))?;
        settings.apply_file(&text, &path.display().to_string())?;
    }
    for pair in &g.set {
        settings.apply_pair(pair)?;
    }
    flags(&mut settings)?;
    if let Some(seed) = g.seed {
        settings.camera.seed = seed;
    }
    settings.validate(sections)?;
    manifest.config_snapshot = settings.snapshot(sections);
    Ok((settings, manifest))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialise");
    s.push('\n');
    s
}

/// Write a series artifact as CSV or JSON.
fn write_series<T: Serialize>(
    g: &GlobalArgs,
    dir: &Path,
    stem: &str,
    value: &T,
    csv: impl FnOnce(&T) -> String,
) -> Result<PathBuf, CliError> {
    let text = match g.format {
        Format::Csv => csv(value),
        Format::Json => to_json(value),
    };
    write_file(dir, &format!("{stem}.{}", g.format.extension()), &text)
}

fn load_detections(manifest: &mut RunManifest, path: &Path) -> Result<Vec<Detection>, CliError> {
    let bytes = manifest.read_input(path)?;
    parse_detection_log(&bytes, LogFormat::from_path(path)).map_err(|e| CliError::from(e).context(path.display()))
}

fn load_ground_truth(manifest: &mut RunManifest, path: &Path) -> Result<Vec<GroundTruthObject>, CliError> {
    let bytes = manifest.read_input(path)?;
    parse_ground_truth(&bytes).map_err(|e| CliError::from(e).context(path.display()))
}

fn load_series(manifest: &mut RunManifest, path: &Path) -> Result<TpSeries, CliError> {
    let bytes = manifest.read_input(path)?;
    TpSeries::parse_csv(&bytes).map_err(|e| CliError::from(e).context(path.display()))
}

#[derive(Debug, Clone, Serialize)]
pub struct WindowReport {
    #[serde(flatten)]
    pub summary: FluxSummary,
    pub windows_evaluated: usize,
    pub windows_skipped: usize,
}

/// Flux series and summaries for every configured window.
fn flux_windows(
    series: &TpSeries,
    windows: &[usize],
) -> Result<Vec<(vastab_core::flux::FluxSeries, WindowReport)>, CliError> {
    windows
        .iter()
        .map(|&n| {
            let flux = fwindow(series, n)?;
            let summary = summarize(&flux)
                .map_err(|e| CliError::from(e).context(format!("window {n}: every window has zero ground truth")))?;
            let report = WindowReport {
                summary,
                windows_evaluated: flux.values.len(),
                windows_skipped: flux.skipped,
            };
            Ok((flux, report))
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct FluxReport {
    manifest: RunManifest,
    frames: usize,
    mean_tp: Option<f64>,
    flux: Vec<WindowReport>,
}

fn analyze(
    g: &GlobalArgs,
    settings: Settings,
    mut manifest: RunManifest,
    detections: &Path,
    ground_truth: &Path,
) -> Result<Vec<String>, CliError> {
    let dets = load_detections(&mut manifest, detections)?;
    let gts = load_ground_truth(&mut manifest, ground_truth)?;
    let series = count_series(&build_frameset(&dets, &gts), &settings.matching)?;
    let flux = flux_windows(&series, &settings.windows)?;

    write_series(g, &g.out, "tp_series", &series, TpSeries::to_csv)?;
    let mut lines = vec![format!("{} frames", series.len())];
    let mut reports = Vec::new();
    for (f, report) in flux {
        write_series(g, &g.out, &format!("flux_w{}", f.window), &f, |f| f.to_csv())?;
        lines.push(report.summary.describe());
        reports.push(report);
    }
    let report = FluxReport {
        manifest,
        frames: series.len(),
        mean_tp: series.mean_tp(),
        flux: reports,
    };
    write_file(&g.out, "flux_summary.json", &to_json(&report))?;
    Ok(lines)
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub label: String,
    pub frames: usize,
    pub mean_tp: Option<f64>,
    pub flux: Vec<WindowReport>,
}

#[derive(Debug, Serialize)]
pub struct ComparisonReport {
    pub manifest: RunManifest,
    pub run_a: RunSummary,
    pub run_b: RunSummary,
    /// Paired test on `d = B - A`.
    pub test: PairedTestReport,
}

/// Paired test plus per-run fluctuation summaries.
fn comparison(
    manifest: RunManifest,
    settings: &Settings,
    (label_a, a): (String, &TpSeries),
    (label_b, b): (String, &TpSeries),
) -> Result<(ComparisonReport, Vec<String>), CliError> {
    if a.len() == b.len() {
        if let Some(i) = (0..a.len()).find(|&i| a.frame_ids[i] != b.frame_ids[i]) {
            return Err(CliError::Semantic(format!(
                "runs are not aligned: position {i} is frame {} in A but frame {} in B",
                a.frame_ids[i], b.frame_ids[i]
            )));
        }
    }
    let test = compare_series(a, b, &settings.test)?;
    let summarise = |label: String, s: &TpSeries| -> Result<RunSummary, CliError> {
        Ok(RunSummary {
            label,
            frames: s.len(),
            mean_tp: s.mean_tp(),
            flux: flux_windows(s, &settings.windows)?
                .into_iter()
                .map(|(_, r)| r)
                .collect(),
        })
    };
    let run_a = summarise(label_a, a)?;
    let run_b = summarise(label_b, b)?;

    let mut lines = Vec::new();
    for run in [&run_a, &run_b] {
        let flux: Vec<String> = run.flux.iter().map(|r| r.summary.describe()).collect();
        lines.push(format!("{}: {}", run.label, flux.join("; ")));
    }
    let t = test
        .t_stat
        .map_or_else(|| "undefined".to_string(), |t| format!("{t:.4}"));
    lines.push(format!(
        "mean difference (B - A) {:.4}, {:.0}% CI [{:.4}, {:.4}], t = {t}, p = {:.3e}: {} at alpha {}",
        test.mean_diff,
        (1.0 - test.alpha) * 100.0,
        test.ci_low,
        test.ci_high,
        test.p_value,
        if test.reject_null { "reject H0" } else { "retain H0" },
        test.alpha
    ));
    Ok((
        ComparisonReport {
            manifest,
            run_a,
            run_b,
            test,
        },
        lines,
    ))
}

fn compare(
    g: &GlobalArgs,
    settings: Settings,
    mut manifest: RunManifest,
    run_a: &Path,
    run_b: &Path,
    ground_truth: Option<&Path>,
) -> Result<Vec<String>, CliError> {
    let (a, b) = match ground_truth {
        Some(gt_path) => {
            let gts = load_ground_truth(&mut manifest, gt_path)?;
            let a = load_detections(&mut manifest, run_a)?;
            let b = load_detections(&mut manifest, run_b)?;
            (
                count_series(&build_frameset(&a, &gts), &settings.matching)?,
                count_series(&build_frameset(&b, &gts), &settings.matching)?,
            )
        }
        None => (load_series(&mut manifest, run_a)?, load_series(&mut manifest, run_b)?),
    };
    let (report, lines) = comparison(
        manifest,
        &settings,
        (run_a.display().to_string(), &a),
        (run_b.display().to_string(), &b),
    )?;
    write_file(&g.out, "comparison.json", &to_json(&report))?;
    Ok(lines)
}

#[derive(Debug, Serialize)]
struct ChurnFile {
    manifest: RunManifest,
    #[serde(flatten)]
    report: ChurnReport,
}

fn track(
    g: &GlobalArgs,
    settings: Settings,
    mut manifest: RunManifest,
    detections: &Path,
    ground_truth: Option<&Path>,
) -> Result<Vec<String>, CliError> {
    let dets = load_detections(&mut manifest, detections)?;
    let gts = ground_truth.map(|p| load_ground_truth(&mut manifest, p)).transpose()?;
    let fs = build_frameset(&dets, gts.as_deref().unwrap_or_default());
    let run = track_sequence(&fs, &settings.tracker, gts.as_deref())?;
    write_series(g, &g.out, "tracks", &run.rows, |rows| write_tracks_csv(rows))?;

    let r = &run.report;
    let mut line = format!("{} track ids, {} confirmed", r.total_track_ids, r.confirmed_track_ids);
    if let (Some(gt), Some(ratio)) = (r.ground_truth_tracks, r.churn_ratio) {
        line.push_str(&format!(", {gt} ground-truth tracks, churn ratio {ratio:.3}"));
    }
    let file = ChurnFile {
        manifest,
        report: run.report,
    };
    write_file(&g.out, "churn_report.json", &to_json(&file))?;
    Ok(vec![line])
}

fn run_leg(settings: &Settings) -> Result<SimulationRun, CliError> {
    Ok(simulate(&settings.camera, &settings.scene())?)
}

fn write_leg(g: &GlobalArgs, dir: &Path, run: &SimulationRun) -> Result<(), CliError> {
    write_series(g, dir, "signals", &run.signals, |s| write_signals_csv(s))?;
    write_series(g, dir, "tp_series", &run.series, TpSeries::to_csv)?;
    Ok(())
}

fn simulate_one(g: &GlobalArgs, settings: Settings, manifest: RunManifest) -> Result<Vec<String>, CliError> {
    let run = run_leg(&settings)?;
    let flux = flux_windows(&run.series, &settings.windows)?;
    write_leg(g, &g.out, &run)?;
    let mut lines = vec![format!("{} frames", run.series.len())];
    lines.extend(flux.iter().map(|(_, r)| r.summary.describe()));
    let report = FluxReport {
        manifest,
        frames: run.series.len(),
        mean_tp: run.series.mean_tp(),
        flux: flux.into_iter().map(|(_, r)| r).collect(),
    };
    write_file(&g.out, "simulation_report.json", &to_json(&report))?;
    Ok(lines)
}

/// Parse `key=A,B` into the two leg settings.
fn ab_legs(base: &Settings, ab_arg: &str) -> Result<(Settings, Settings, String, String), CliError> {
    let bad = || CliError::Input(format!("--ab expects KEY=A,B, got `{ab_arg}`"));
    let (key, values) = ab_arg.split_once('=').ok_or_else(bad)?;
    let (va, vb) = values.split_once(',').ok_or_else(bad)?;
    let (key, va, vb) = (key.trim(), va.trim(), vb.trim());
    let mut a = base.clone();
    let mut b = base.clone();
    a.set(key, va)?;
    b.set(key, vb)?;
    let sections = [Section::Camera, Section::Scene];
    a.validate(&sections).map_err(|e| e.context("leg A"))?;
    b.validate(&sections).map_err(|e| e.context("leg B"))?;
    Ok((a, b, format!("{key}={va}"), format!("{key}={vb}")))
}

fn simulate_ab(g: &GlobalArgs, settings: Settings, manifest: RunManifest, ab_arg: &str) -> Result<Vec<String>, CliError> {
    let (sa, sb, label_a, label_b) = ab_legs(&settings, ab_arg)?;
    let (ra, rb) = std::thread::scope(|scope| {
        let leg_b = scope.spawn(|| run_leg(&sb));
        let ra = run_leg(&sa);
        (ra, leg_b.join().expect("simulation leg panicked"))
    });
    let (ra, rb) = (ra?, rb?);
    write_leg(g, &g.out.join("leg_a"), &ra)?;
    write_leg(g, &g.out.join("leg_b"), &rb)?;
    let (report, lines) = comparison(manifest, &settings, (label_a, &ra.series), (label_b, &rb.series))?;
    write_file(&g.out, "comparison.json", &to_json(&report))?;
    Ok(lines)
}
