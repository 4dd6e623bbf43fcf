//! Welch's two-sample t-test and post-hoc power, applied per query instance.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::smc::InstanceEstimate;
use crate::stats::{normal_cdf, normal_quantile, t_two_sided_p};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSummary {
    pub mean: f64,
    pub variance: f64,
    pub n: u64,
}

impl SampleSummary {
    pub fn new(mean: f64, variance: f64, n: u64) -> Self {
        SampleSummary { mean, variance, n }
    }

    fn check(&self) -> Result<(), HypError> {
        if self.n < 2 {
            return Err(HypError::TooFewSamples { n: self.n });
        }
        if !(self.variance >= 0.0) || !self.variance.is_finite() || !self.mean.is_finite() {
            return Err(HypError::InvalidSummary { mean: self.mean, variance: self.variance });
        }
        Ok(())
    }

    fn se2(&self) -> f64 {
        self.variance / self.n as f64
    }
}

impl From<&InstanceEstimate> for SampleSummary {
    fn from(e: &InstanceEstimate) -> Self {
        SampleSummary { mean: e.mean, variance: e.variance, n: e.n }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HypError {
    TooFewSamples { n: u64 },
    InvalidSummary { mean: f64, variance: f64 },
    InvalidAlpha(f64),
    /// Both groups constant with equal means: the statistic is 0/0.
    NoVariation { mean: f64 },
    GridMismatch { index: usize, a: String, b: String },
    LengthMismatch { a: usize, b: usize },
}

impl fmt::Display for HypError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HypError::TooFewSamples { n } => write!(f, "need at least 2 samples per group (got {n})"),
            HypError::InvalidSummary { mean, variance } => {
                write!(f, "invalid sample summary (mean {mean}, variance {variance})")
            }
            HypError::InvalidAlpha(a) => write!(f, "confidence_alpha must lie in (0, 1) (got {a})"),
            HypError::NoVariation { mean } => {
                write!(f, "both groups are constant at {mean}; the test is undefined")
            }
            HypError::GridMismatch { index, a, b } => {
                write!(f, "instance grids differ at position {index}: `{a}` vs `{b}`")
            }
            HypError::LengthMismatch { a, b } => write!(f, "instance grids differ in length ({a} vs {b})"),
        }
    }
}

impl core::error::Error for HypError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchOutcome {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
    pub reject: bool,
    /// Both variances were zero; `p_value` and `reject` follow convention.
    pub degenerate: bool,
}

fn check_alpha(alpha: f64) -> Result<(), HypError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(HypError::InvalidAlpha(alpha))
    }
}

/// Two-sided Welch test of equal means.
pub fn welch_test(a: &SampleSummary, b: &SampleSummary, confidence_alpha: f64) -> Result<WelchOutcome, HypError> {
    a.check()?;
    b.check()?;
    check_alpha(confidence_alpha)?;
    let diff = a.mean - b.mean;
    let (ua, ub) = (a.se2(), b.se2());
    let se2 = ua + ub;
    if se2 == 0.0 {
        if diff == 0.0 {
            return Err(HypError::NoVariation { mean: a.mean });
        }
        return Ok(WelchOutcome {
            t: diff.signum() * f64::INFINITY,
            df: (a.n + b.n - 2) as f64,
            p_value: 0.0,
            reject: true,
            degenerate: true,
        });
    }
    let t = diff / libm::sqrt(se2);
    let df = se2 * se2 / (ua * ua / (a.n - 1) as f64 + ub * ub / (b.n - 1) as f64);
    let p_value = t_two_sided_p(t, df);
    Ok(WelchOutcome { t, df, p_value, reject: p_value < confidence_alpha, degenerate: false })
}

/// Normal-approximation power of the two-sided test, taking the observed
/// difference of means as the true effect.
pub fn power(a: &SampleSummary, b: &SampleSummary, confidence_alpha: f64) -> Result<f64, HypError> {
    a.check()?;
    b.check()?;
    check_alpha(confidence_alpha)?;
    let diff = (a.mean - b.mean).abs();
    let se = libm::sqrt(a.se2() + b.se2());
    if se == 0.0 {
        return if diff == 0.0 { Err(HypError::NoVariation { mean: a.mean }) } else { Ok(1.0) };
    }
    let z = normal_quantile(1.0 - confidence_alpha / 2.0).expect("alpha checked");
    let shift = diff / se;
    Ok(normal_cdf(shift - z) + normal_cdf(-shift - z))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub label: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub reject: bool,
    pub power: f64,
    pub degenerate: bool,
}

/// One Welch test per instance of two estimations over the same grid.
///
/// Instances where both groups are constant with equal means cannot be tested;
/// they are reported as a degenerate non-rejection (`t = 0`, `p = 1`,
/// `power = alpha`) so that a series stays complete.
pub fn compare_series(
    a: &[InstanceEstimate],
    b: &[InstanceEstimate],
    confidence_alpha: f64,
) -> Result<Vec<ComparisonRow>, HypError> {
    check_alpha(confidence_alpha)?;
    if a.len() != b.len() {
        return Err(HypError::LengthMismatch { a: a.len(), b: b.len() });
    }
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(index, (ea, eb))| {
            if ea.label != eb.label || ea.binding != eb.binding {
                return Err(HypError::GridMismatch { index, a: ea.label.clone(), b: eb.label.clone() });
            }
            let (sa, sb) = (SampleSummary::from(ea), SampleSummary::from(eb));
            let row = |w: WelchOutcome, power| ComparisonRow {
                label: ea.label.clone(),
                mean_a: ea.mean,
                mean_b: eb.mean,
                t: w.t,
                df: w.df,
                p: w.p_value,
                reject: w.reject,
                power,
                degenerate: w.degenerate,
            };
            match welch_test(&sa, &sb, confidence_alpha) {
                Ok(w) => Ok(row(w, power(&sa, &sb, confidence_alpha)?)),
                Err(HypError::NoVariation { .. }) => Ok(row(
                    WelchOutcome {
                        t: 0.0,
                        df: (sa.n + sb.n - 2) as f64,
                        p_value: 1.0,
                        reject: false,
                        degenerate: true,
                    },
                    confidence_alpha,
                )),
                Err(e) => Err(e),
            }
        })
        .collect()
}
