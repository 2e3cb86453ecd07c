//! Run classification, iterate averaging and log-linear rate fits.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optimizers::{RunOutcome, RunTrace};
use crate::vector::DenseVector;

/// Final loss at or below this fraction of the initial loss counts as converged.
pub const CONVERGED_FRACTION: f64 = 1e-4;
/// Any loss above this multiple of the initial loss counts as diverged.
pub const DIVERGED_FACTOR: f64 = 10.0;
/// Fewest points a rate fit accepts.
pub const MIN_FIT_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RunStatus {
    Converged,
    NotConverged,
    Diverged,
    Failed,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunStatus::Converged => "CONVERGED",
            RunStatus::NotConverged => "NOT_CONVERGED",
            RunStatus::Diverged => "DIVERGED",
            RunStatus::Failed => "FAILED",
        })
    }
}

/// Divergence wins over failure: a run that blew up and then failed a check
/// still blew up.
pub fn classify(trace: &RunTrace) -> RunStatus {
    let f0 = trace.initial_loss();
    let blew_up = matches!(trace.outcome, RunOutcome::Diverged { .. }) || {
        let max = trace.max_loss();
        max.is_nan() || max > DIVERGED_FACTOR * f0
    };
    if blew_up {
        return RunStatus::Diverged;
    }
    if let RunOutcome::Failed { .. } = trace.outcome {
        return RunStatus::Failed;
    }
    if trace.final_loss <= CONVERGED_FRACTION * f0 {
        RunStatus::Converged
    } else {
        RunStatus::NotConverged
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    /// `log y = c + slope · log t`.
    PowerLaw,
    /// `log y = c + slope · t`.
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub model: RateModel,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Inclusive `[t_start, t_end]` as requested.
    pub window: (usize, usize),
    /// Points actually used.
    pub points: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("window [{0}, {1}] is empty or outside the series")]
    BadWindow(usize, usize),
    #[error("non-finite value at t = {0}")]
    NonFinite(usize),
    #[error("only {0} usable points in window, need {MIN_FIT_POINTS}")]
    TooFewPoints(usize),
    #[error("all usable points share one abscissa")]
    Degenerate,
}

/// Least-squares fit of `log values[t]` over `t ∈ [start, end]`.
///
/// Zero losses are skipped, since the log is undefined there; so is `t = 0`
/// for the power law. Negative or non-finite values are errors.
pub fn fit_rate(values: &[f64], model: RateModel, window: (usize, usize)) -> Result<RateFit, AnalysisError> {
    let (start, end) = window;
    if start > end || end >= values.len() {
        return Err(AnalysisError::BadWindow(start, end));
    }
    let mut xs = Vec::with_capacity(end - start + 1);
    let mut ys = Vec::with_capacity(end - start + 1);
    for (t, &v) in values.iter().enumerate().take(end + 1).skip(start) {
        if !v.is_finite() || v < 0.0 {
            return Err(AnalysisError::NonFinite(t));
        }
        if v == 0.0 {
            continue;
        }
        let x = match model {
            RateModel::PowerLaw if t == 0 => continue,
            RateModel::PowerLaw => (t as f64).ln(),
            RateModel::Geometric => t as f64,
        };
        xs.push(x);
        ys.push(v.ln());
    }
    if xs.len() < MIN_FIT_POINTS {
        return Err(AnalysisError::TooFewPoints(xs.len()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(AnalysisError::Degenerate);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(RateFit { model, slope, intercept, r_squared, window, points: xs.len() })
}

/// Running mean `x̄_T = (1/T) Σ_{t<T} x_t`.
#[derive(Debug, Clone)]
pub struct IterateAverager {
    sum: DenseVector,
    count: usize,
}

impl IterateAverager {
    pub fn new(dim: usize) -> Self {
        Self { sum: DenseVector::zeros(dim), count: 0 }
    }

    pub fn push(&mut self, x: &DenseVector) {
        self.sum.axpy(1.0, x);
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> Option<DenseVector> {
        (self.count > 0).then(|| self.sum.scaled(1.0 / self.count as f64))
    }
}

/// Column-wise mean of equal-length series, truncated to the shortest.
pub fn mean_series(series: &[Vec<f64>]) -> Vec<f64> {
    let len = series.iter().map(Vec::len).min().unwrap_or(0);
    (0..len).map(|t| series.iter().map(|s| s[t]).sum::<f64>() / series.len() as f64).collect()
}
