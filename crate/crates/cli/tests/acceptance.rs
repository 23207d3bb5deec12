//! Acceptance gate: runs every criterion, prints one PASS/FAIL line for each,
//! and fails if any criterion fails.

#[path = "../../core/tests/support/oracles.rs"]
mod oracles;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use sha2::{Digest, Sha256};

use oracles::{
    brute_force_min_cost, cauchy_cdf, dropout_scene, exhaustive_match, naive_flux, naive_greedy, normal_cdf,
    random_box, random_frame,
};
use vastab_core::flux::{f2, fwindow};
use vastab_core::matcher::{match_frame, MatchConfig, MatchStrategy};
use vastab_core::model::{build_frameset, write_detections_csv, write_ground_truth_csv};
use vastab_core::stats::{compare_series, t_cdf, TestOptions};
use vastab_core::tracker::kalman::bbox_to_measurement;
use vastab_core::tracker::{
    assignment_cost, hungarian, kalman_predict, kalman_update, track_sequence, KalmanParams, KalmanState, TrackerConfig,
};
use vastab_core::{BBox, Detection, Error, GroundTruthObject, TpSeries};

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(failures: Vec<String>, ok_detail: String) -> Outcome {
    if failures.is_empty() {
        Outcome {
            pass: true,
            detail: ok_detail,
        }
    } else {
        let shown: Vec<_> = failures.iter().take(3).cloned().collect();
        Outcome {
            pass: false,
            detail: format!("{} failure(s): {}", failures.len(), shown.join("; ")),
        }
    }
}

fn within(elapsed: Duration, limit: Duration, failures: &mut Vec<String>) {
    if elapsed > limit {
        failures.push(format!("took {elapsed:.2?}, limit {limit:?}"));
    }
}

fn metric_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xF1);
    let mut failures = Vec::new();
    for case in 0..1000 {
        let len = rng.random_range(2..=200);
        let gt: Vec<u32> = (0..len).map(|_| rng.random_range(0..=20)).collect();
        let tp: Vec<u32> = gt.iter().map(|&g| rng.random_range(0..=g)).collect();
        let s = TpSeries::from_counts(tp.clone(), gt.clone()).unwrap();
        let two = f2(&s).unwrap();
        if two != fwindow(&s, 2).unwrap() {
            failures.push(format!("case {case}: fwindow(2) differs from f2"));
        }
        let (values, skipped) = naive_flux(&tp, &gt, 2);
        if two.values != values || two.skipped != skipped {
            failures.push(format!("case {case}: f2 differs from oracle"));
        }
        for n in [2, 5, 10] {
            let (values, skipped) = naive_flux(&tp, &gt, n);
            match fwindow(&s, n) {
                Ok(f) if f.values == values && f.skipped == skipped => {}
                Err(Error::SeriesTooShort { .. }) if len < n => {}
                other => failures.push(format!("case {case}, n={n}: {other:?}")),
            }
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(5), &mut failures);
    outcome(failures, format!("1000 series, windows 2/5/10, exact, {elapsed:.2?}"))
}

fn statistics() -> Outcome {
    let mut failures = Vec::new();
    let (mut worst_cauchy, mut worst_normal) = (0.0f64, 0.0f64);
    for i in 0..200 {
        let t = -10.0 + 20.0 * i as f64 / 199.0;
        let ec = (t_cdf(t, 1.0) - cauchy_cdf(t)).abs();
        let en = (t_cdf(t, 1e5) - normal_cdf(t)).abs();
        worst_cauchy = worst_cauchy.max(ec);
        worst_normal = worst_normal.max(en);
        if ec > 1e-10 {
            failures.push(format!("df=1, t={t}: error {ec:e}"));
        }
        if en > 1e-4 {
            failures.push(format!("df=1e5, t={t}: error {en:e}"));
        }
    }
    let a = TpSeries::from_counts(vec![0; 100], vec![1; 100]).unwrap();
    let b = TpSeries::from_counts((0..100).map(|i| u32::from(i % 2 == 0)).collect(), vec![1; 100]).unwrap();
    let r = compare_series(&a, &b, &TestOptions::default()).unwrap();
    let t = r.t_stat.unwrap_or(f64::NAN);
    if t.is_nan() || (t - 9.9499).abs() > 1e-3 {
        failures.push(format!("interleaved t = {t}"));
    }
    if !r.reject_null || r.alpha != 0.01 {
        failures.push("interleaved series not rejected at 0.01".into());
    }
    outcome(
        failures,
        format!("max error {worst_cauchy:.1e} (Cauchy), {worst_normal:.1e} (normal); t = {t:.4}, reject"),
    )
}

fn assignment() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA5);
    let mut failures = Vec::new();
    for case in 0..500 {
        let rows = rng.random_range(1..=7);
        let cols = rng.random_range(1..=7);
        let cost: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..cols).map(|_| rng.random_range(0..100) as f64).collect())
            .collect();
        let pairs = hungarian(&cost);
        let got = assignment_cost(&cost, &pairs);
        let want = brute_force_min_cost(&cost);
        if got != want || pairs.len() != rows.min(cols) {
            failures.push(format!("case {case} ({rows}x{cols}): {got} vs {want}"));
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(10), &mut failures);
    outcome(failures, format!("500 matrices up to 7x7, exact, {elapsed:.2?}"))
}

fn matching() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3A);
    let mut failures = Vec::new();
    for case in 0..500 {
        let (dets, gts) = random_frame(&mut rng, 5);
        let greedy_cfg = MatchConfig::default();
        let optimal_cfg = MatchConfig {
            strategy: MatchStrategy::OptimalAssignment,
            ..greedy_cfg
        };
        let best = exhaustive_match(&dets, &gts, &greedy_cfg);
        let opt = match_frame(&dets, &gts, &optimal_cfg).unwrap();
        let greedy = match_frame(&dets, &gts, &greedy_cfg).unwrap();
        let (greedy_tp, _) = naive_greedy(&dets, &gts, &greedy_cfg);
        if opt.tp != best.tp_at_best || (opt.total_iou() - best.best_total_iou).abs() > 1e-9 {
            failures.push(format!(
                "case {case}: optimal tp {} vs exhaustive {}",
                opt.tp, best.tp_at_best
            ));
        }
        if greedy.tp != greedy_tp || greedy.tp > best.max_cardinality {
            failures.push(format!("case {case}: greedy tp {} vs {greedy_tp}", greedy.tp));
        }
        if opt.total_iou() < greedy.total_iou() - 1e-12 {
            failures.push(format!("case {case}: optimal IoU below greedy"));
        }
    }
    outcome(
        failures,
        "500 frames, both strategies agree with exhaustive pairing".into(),
    )
}

fn tracker_lifecycle() -> Outcome {
    let mut failures = Vec::new();
    let b = BBox::new(100.0, 100.0, 40.0, 30.0).unwrap();
    let det = |f| Detection::new(f, "car", 0.9, b).unwrap();
    let ids = |dets: &[Detection], cfg: TrackerConfig| {
        track_sequence(&build_frameset(dets, &[]), &cfg, None)
            .unwrap()
            .report
            .total_track_ids
    };

    let static_ids = ids(&(0..30).map(det).collect::<Vec<_>>(), TrackerConfig::default());
    if static_ids != 1 {
        failures.push(format!("static box gave {static_ids} ids"));
    }
    let gap: Vec<_> = (0..20).filter(|&f| f != 10).map(det).collect();
    let gap_ids = ids(
        &gap,
        TrackerConfig {
            max_age: 0,
            ..TrackerConfig::default()
        },
    );
    if gap_ids != 2 {
        failures.push(format!("one-frame dropout with max_age=0 gave {gap_ids} ids"));
    }

    let means: Vec<f64> = [0.0, 0.05, 0.1, 0.2]
        .iter()
        .map(|&p| {
            (0..50u64)
                .map(|seed| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    ids(&dropout_scene(&mut rng, 5, 100, p), TrackerConfig::default()) as f64
                })
                .sum::<f64>()
                / 50.0
        })
        .collect();
    if !means.windows(2).all(|w| w[1] >= w[0]) {
        failures.push(format!("mean ids not nondecreasing: {means:?}"));
    }
    outcome(failures, format!("static 1 id, dropout 2 ids, sweep means {means:?}"))
}

fn kalman() -> Outcome {
    let p = KalmanParams::default();
    let mut failures = Vec::new();

    let mut st = KalmanState::from_bbox(&BBox::new(10.0, 20.0, 30.0, 60.0).unwrap(), &p);
    st.mean[4] = 1.5;
    st.mean[5] = -0.5;
    st.mean[6] = 3.0;
    let pred = kalman_predict(&st, &p);
    let post = kalman_update(&pred, &pred.bbox().unwrap(), &p);
    let shift = (0..7).map(|i| (post.mean[i] - pred.mean[i]).abs()).fold(0.0, f64::max);
    if shift > 1e-9 {
        failures.push(format!("zero-innovation update moved the mean by {shift:e}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x6B);
    let mut st = KalmanState::from_bbox(&random_box(&mut rng), &p);
    let (mut worst_asym, mut worst_eig) = (0.0f64, 0.0f64);
    for step in 0..10_000 {
        st = kalman_predict(&st, &p);
        if rng.random_bool(0.7) {
            st = kalman_update(&st, &random_box(&mut rng), &p);
        }
        let c = &st.covariance;
        let scale = c.amax().max(1.0);
        let asym = (c - c.transpose()).amax() / scale;
        let eig = c.symmetric_eigenvalues().min() / scale;
        worst_asym = worst_asym.max(asym);
        worst_eig = worst_eig.min(eig);
        if asym > 1e-12 || eig < -1e-12 {
            failures.push(format!("step {step}: asymmetry {asym:e}, min eigenvalue {eig:e}"));
            break;
        }
    }

    let target = BBox::new(100.0, 50.0, 40.0, 80.0).unwrap();
    let want = bbox_to_measurement(&target);
    let mut st = KalmanState::from_bbox(&target, &p);
    for _ in 0..20 {
        st = kalman_update(&kalman_predict(&st, &p), &target, &p);
    }
    let residual = (0..4).map(|i| (st.mean[i] - want[i]).abs()).fold(0.0, f64::max);
    if residual >= 1e-3 {
        failures.push(format!("static-box residual {residual:e}"));
    }
    outcome(
        failures,
        format!(
            "mean shift {shift:.1e}; 1e4 steps, asymmetry {worst_asym:.1e}, min eigenvalue {worst_eig:.1e}; residual {residual:.1e}"
        ),
    )
}

/// Run `vastab simulate --ab` in-process and return the comparison report.
fn ab_report(dir: &Path, seed: u64, ab: &str, extra: &[&str]) -> Value {
    let out = dir.join(format!("{ab}-{seed}"));
    let seed = seed.to_string();
    let mut args = vec![
        "vastab",
        "simulate",
        "--ab",
        ab,
        "--seed",
        &seed,
        "--frames",
        "1000",
        "--alpha",
        "0.01",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    assert_eq!(vastab_cli::run(args.iter().copied()), 0, "simulate --ab {ab} failed");
    serde_json::from_str(&std::fs::read_to_string(out.join("comparison.json")).unwrap()).unwrap()
}

fn f2_stat(report: &Value, run: &str, stat: &str) -> f64 {
    let flux = report[run]["flux"].as_array().unwrap();
    let w2 = flux.iter().find(|f| f["window"] == 2).expect("window 2 reported");
    w2[stat].as_f64().unwrap()
}

fn exposure_direction(dir: &Path) -> Outcome {
    let start = Instant::now();
    let mut hits = 0;
    let mut misses = Vec::new();
    for seed in 0..50 {
        let r = ab_report(
            dir,
            seed,
            "e_max=0.25,0.008333333333333333",
            &["--flicker-depth", "0.3"],
        );
        let (a, b) = (f2_stat(&r, "run_a", "max"), f2_stat(&r, "run_b", "max"));
        if a > b && r["test"]["reject_null"] == true {
            hits += 1;
        } else {
            misses.push(format!(
                "seed {seed}: max F2 {a} vs {b}, reject {}",
                r["test"]["reject_null"]
            ));
        }
    }
    let elapsed = start.elapsed();
    let mut failures = Vec::new();
    if hits < 45 {
        failures.push(format!("only {hits}/50 seeds ({})", misses.join(", ")));
    }
    within(elapsed, Duration::from_secs(60), &mut failures);
    outcome(failures, format!("{hits}/50 seeds, {elapsed:.2?}"))
}

fn flicker_and_compression(dir: &Path) -> Outcome {
    let mut failures = Vec::new();
    let mut details = Vec::new();
    for ab in ["flicker_depth=0,0.3", "quantization_levels=none,32"] {
        let mut hits = 0;
        let mut misses = Vec::new();
        for seed in 0..50 {
            let r = ab_report(dir, seed, ab, &[]);
            let (a, b) = (f2_stat(&r, "run_a", "mean"), f2_stat(&r, "run_b", "mean"));
            if b >= a && r["test"]["reject_null"] == true {
                hits += 1;
            } else {
                misses.push(format!(
                    "seed {seed}: mean F2 {a} vs {b}, reject {}",
                    r["test"]["reject_null"]
                ));
            }
        }
        if hits < 45 {
            failures.push(format!("{ab}: only {hits}/50 seeds ({})", misses.join(", ")));
        }
        details.push(format!("{ab}: {hits}/50"));
    }
    outcome(failures, details.join(", "))
}

fn digests(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, hex::encode(Sha256::digest(std::fs::read(&path).unwrap())));
            }
        }
    }
    out
}

fn determinism(dir: &Path) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xD7);
    let mut dets = Vec::new();
    let mut dets_b = Vec::new();
    let mut gts = Vec::new();
    for f in 0..60u64 {
        for k in 0..4i64 {
            let b = BBox::new(80.0 * k as f64 + f as f64, 40.0, 30.0, 30.0).unwrap();
            gts.push(GroundTruthObject {
                frame_id: f,
                object_id: k,
                bbox: b,
                class_label: "person".into(),
            });
            if rng.random_bool(0.85) {
                dets.push(Detection::new(f, "person", rng.random_range(0.3..1.0), b).unwrap());
            }
            if rng.random_bool(0.7) {
                dets_b.push(Detection::new(f, "person", rng.random_range(0.3..1.0), b).unwrap());
            }
        }
    }
    let inputs = dir.join("inputs");
    std::fs::create_dir_all(&inputs).unwrap();
    std::fs::write(inputs.join("a.csv"), write_detections_csv(&dets)).unwrap();
    std::fs::write(inputs.join("b.csv"), write_detections_csv(&dets_b)).unwrap();
    std::fs::write(inputs.join("gt.csv"), write_ground_truth_csv(&gts)).unwrap();
    std::fs::write(inputs.join("run.cfg"), "frames = 300\nflicker_depth = 0.3\n").unwrap();

    let commands: Vec<Vec<&str>> = vec![
        vec![
            "analyze",
            "--detections",
            "inputs/a.csv",
            "--ground-truth",
            "inputs/gt.csv",
        ],
        vec![
            "analyze",
            "--detections",
            "inputs/a.csv",
            "--ground-truth",
            "inputs/gt.csv",
            "--format",
            "json",
        ],
        vec![
            "compare",
            "inputs/a.csv",
            "inputs/b.csv",
            "--ground-truth",
            "inputs/gt.csv",
        ],
        vec![
            "track",
            "--detections",
            "inputs/a.csv",
            "--ground-truth",
            "inputs/gt.csv",
        ],
        vec!["track", "--detections", "inputs/b.csv", "--format", "json"],
        vec!["simulate", "--config", "inputs/run.cfg", "--seed", "7"],
        vec![
            "simulate",
            "--seed",
            "7",
            "--frames",
            "300",
            "--ab",
            "e_max=0.25,0.008333",
        ],
    ];
    let mut failures = Vec::new();
    let mut files = 0;
    for (i, args) in commands.iter().enumerate() {
        let mut runs = Vec::new();
        for rep in 0..2 {
            let out = format!("det/{i}-{rep}");
            let status = Command::new(env!("CARGO_BIN_EXE_vastab"))
                .current_dir(dir)
                .args(args)
                .args(["--out", &out])
                .output()
                .unwrap();
            if !status.status.success() {
                failures.push(format!("{}: exit {:?}", args.join(" "), status.status.code()));
            }
            runs.push(digests(&dir.join(&out)));
        }
        if runs[0].is_empty() || runs[0] != runs[1] {
            failures.push(format!("{}: artifacts differ between runs", args.join(" ")));
        }
        files += runs[0].len();
    }
    outcome(
        failures,
        format!("{} command lines, {files} artifacts hash-identical", commands.len()),
    )
}

#[test]
fn acceptance() {
    let dir = tempfile::tempdir().unwrap();
    let criteria: Vec<Criterion> = vec![
        ("1 metric oracle equivalence", Box::new(metric_oracle)),
        ("2 statistics correctness", Box::new(statistics)),
        ("3 assignment optimality", Box::new(assignment)),
        ("4 matching oracle", Box::new(matching)),
        ("5 tracker lifecycle", Box::new(tracker_lifecycle)),
        ("6 kalman sanity", Box::new(kalman)),
        (
            "7 exposure cap lowers fluctuation",
            Box::new(|| exposure_direction(dir.path())),
        ),
        (
            "8 flicker and compression raise fluctuation",
            Box::new(|| flicker_and_compression(dir.path())),
        ),
        ("9 determinism", Box::new(|| determinism(dir.path()))),
    ];
    let mut failed = Vec::new();
    let mut err = std::io::stderr();
    for (name, check) in &criteria {
        let o = check();
        let _ = writeln!(
            err,
            "acceptance {name}: {} ({})",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed.push(*name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
