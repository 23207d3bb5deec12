//! Repeated-measures comparison of two detection pipelines.
//!
//! Two runs A and B over the same frames give count series; their pairwise
//! differences `D = B - A` turn the two-sample question into a one-sample
//! t-test of `mean(D) = 0`. The report also carries the effect size: the mean
//! difference, its confidence interval and the difference relative to the
//! mean of A.

pub mod special;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TpSeries;

pub use special::{incomplete_beta, t_cdf, t_quantile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffSeries {
    pub d: Vec<f64>,
}

impl DiffSeries {
    pub fn new(d: Vec<f64>) -> Result<Self> {
        if d.len() < 2 {
            return Err(Error::SeriesTooShort {
                len: d.len(),
                needed: 2,
            });
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("d", "difference scores must be finite"));
        }
        Ok(DiffSeries { d })
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }
}

/// `d(i) = b.tp(i) - a.tp(i)`, paired by position.
pub fn diff_series(a: &TpSeries, b: &TpSeries) -> Result<DiffSeries> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    DiffSeries::new(
        a.tp.iter()
            .zip(&b.tp)
            .map(|(&x, &y)| f64::from(y) - f64::from(x))
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// B exceeds A on average.
    Greater,
    /// B falls short of A on average.
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOptions {
    pub alpha: f64,
    pub alternative: Alternative,
}

impl Default for TestOptions {
    fn default() -> Self {
        TestOptions {
            alpha: 0.01,
            alternative: Alternative::TwoSided,
        }
    }
}

impl TestOptions {
    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_finite() && self.alpha > 0.0 && self.alpha < 1.0 {
            Ok(())
        } else {
            Err(Error::invalid(
                "alpha",
                format!("must lie in (0, 1), got {}", self.alpha),
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTestReport {
    pub n: usize,
    pub df: usize,
    /// Absent when the differences have zero spread but a non-zero mean.
    pub t_stat: Option<f64>,
    pub p_two_sided: f64,
    /// p-value under `alternative`; equals `p_two_sided` for the default.
    pub p_value: f64,
    pub alternative: Alternative,
    pub alpha: f64,
    pub reject_null: bool,
    pub mean_diff: f64,
    pub sd_diff: f64,
    /// Two-sided `1 - alpha` confidence interval of the mean difference.
    pub ci_low: f64,
    pub ci_high: f64,
    pub baseline_mean: f64,
    /// `mean_diff / baseline_mean`; absent when the baseline mean is zero.
    pub relative_effect: Option<f64>,
    /// Set when every difference is identical, so the t statistic is not
    /// defined by the usual formula.
    pub degenerate: bool,
}

pub fn paired_t_test(d: &DiffSeries, opts: &TestOptions, baseline_mean: f64) -> Result<PairedTestReport> {
    opts.validate()?;
    let n = d.n();
    if n < 2 {
        return Err(Error::SeriesTooShort { len: n, needed: 2 });
    }
    let df = n - 1;
    let nf = n as f64;

    let constant = d.d.iter().all(|&v| v == d.d[0]);
    let (mean, sd) = if constant {
        (d.d[0], 0.0)
    } else {
        let mean = d.d.iter().sum::<f64>() / nf;
        let ss: f64 = d.d.iter().map(|v| (v - mean) * (v - mean)).sum();
        (mean, (ss / (nf - 1.0)).sqrt())
    };

    let (t_stat, p_two, p_value, ci_low, ci_high) = if constant {
        let (p_two, p_value) = if mean == 0.0 {
            (1.0, 1.0)
        } else {
            let one_sided = match opts.alternative {
                Alternative::TwoSided => 0.0,
                Alternative::Greater => {
                    if mean > 0.0 {
                        0.0
                    } else {
                        1.0
                    }
                }
                Alternative::Less => {
                    if mean < 0.0 {
                        0.0
                    } else {
                        1.0
                    }
                }
            };
            (0.0, one_sided)
        };
        let t = (mean == 0.0).then_some(0.0);
        (t, p_two, p_value, mean, mean)
    } else {
        let se = sd / nf.sqrt();
        let t = mean / se;
        let dff = df as f64;
        let p_two = special::t_two_sided_p(t, dff);
        let p_value = match opts.alternative {
            Alternative::TwoSided => p_two,
            Alternative::Greater => special::t_sf(t, dff),
            Alternative::Less => special::t_sf(-t, dff),
        };
        let crit = t_quantile(1.0 - opts.alpha / 2.0, dff);
        (Some(t), p_two, p_value, mean - crit * se, mean + crit * se)
    };

    Ok(PairedTestReport {
        n,
        df,
        t_stat,
        p_two_sided: p_two,
        p_value,
        alternative: opts.alternative,
        alpha: opts.alpha,
        reject_null: p_value < opts.alpha,
        mean_diff: mean,
        sd_diff: sd,
        ci_low,
        ci_high,
        baseline_mean,
        relative_effect: (baseline_mean != 0.0).then(|| mean / baseline_mean),
        degenerate: constant,
    })
}

/// Paired comparison of two count series, using the mean of `a` as the
/// baseline for the relative effect.
pub fn compare_series(a: &TpSeries, b: &TpSeries, opts: &TestOptions) -> Result<PairedTestReport> {
    let d = diff_series(a, b)?;
    let baseline = a.mean_tp().unwrap_or(0.0);
    paired_t_test(&d, opts, baseline)
}
