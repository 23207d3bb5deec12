//! `vastab` command-line front end: count series and fluctuation metrics
//! from detection logs, paired comparisons, tracker churn, and simulated
//! capture runs.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

pub use config::Settings;
pub use error::CliError;
pub use manifest::RunManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "vastab", version, about = "Detection-count stability analysis")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Flat `key = value` config file; flags take precedence over it
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override any config key (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Encoding of series artifacts; reports are always JSON
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Seed for the simulator
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory receiving the artifacts
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Default)]
pub struct MatchArgs {
    #[arg(long)]
    pub iou_threshold: Option<f64>,
    /// greedy or optimal
    #[arg(long)]
    pub strategy: Option<String>,
    /// Ignore class labels when matching
    #[arg(long)]
    pub class_agnostic: bool,
}

#[derive(Debug, Args, Default)]
pub struct WindowArgs {
    /// Fluctuation window length (repeatable; default 2 and 10)
    #[arg(long = "window", value_name = "N")]
    pub windows: Vec<usize>,
}

#[derive(Debug, Args, Default)]
pub struct TestArgs {
    /// Significance level
    #[arg(long)]
    pub alpha: Option<f64>,
    /// two-sided, greater or less (B relative to A)
    #[arg(long)]
    pub alternative: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct TrackArgs {
    #[arg(long)]
    pub max_age: Option<u32>,
    #[arg(long)]
    pub min_hits: Option<u32>,
    #[arg(long)]
    pub iou_gate: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct SimArgs {
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub fps: Option<f64>,
    /// Longest exposure in seconds
    #[arg(long)]
    pub e_max: Option<f64>,
    #[arg(long)]
    pub e_min: Option<f64>,
    #[arg(long)]
    pub g_max: Option<f64>,
    #[arg(long)]
    pub flicker_depth: Option<f64>,
    #[arg(long)]
    pub mains_hz: Option<f64>,
    /// Quantiser levels, or `none`
    #[arg(long)]
    pub quantization_levels: Option<String>,
    /// Number of scene objects
    #[arg(long)]
    pub objects: Option<u32>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// TP series and fluctuation metrics for one detection log
    Analyze {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        #[command(flatten)]
        matching: MatchArgs,
        #[command(flatten)]
        windows: WindowArgs,
    },
    /// Paired t-test between two runs over the same frames
    Compare {
        /// Run A: a detection log when --ground-truth is given, else a TP series CSV
        run_a: PathBuf,
        /// Run B, same kind as run A
        run_b: PathBuf,
        #[arg(long)]
        ground_truth: Option<PathBuf>,
        #[command(flatten)]
        matching: MatchArgs,
        #[command(flatten)]
        windows: WindowArgs,
        #[command(flatten)]
        test: TestArgs,
    },
    /// Run the tracker over a detection log and report identity churn
    Track {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        ground_truth: Option<PathBuf>,
        #[command(flatten)]
        tracker: TrackArgs,
    },
    /// Closed-loop camera simulation
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        /// Run two legs differing in one key and compare them, e.g. e_max=0.25,0.008333
        #[arg(long, value_name = "KEY=A,B")]
        ab: Option<String>,
        #[command(flatten)]
        windows: WindowArgs,
        #[command(flatten)]
        test: TestArgs,
    },
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match commands::execute(&cli) {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
