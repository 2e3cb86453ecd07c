use serde::{Deserialize, Serialize};

use super::{OptimizerError, StepRule};
use crate::compression::CompressionSpec;
use crate::objectives::ObjectiveSpec;
use crate::vector::DenseVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    CsgdAsss,
    ScaledGd,
    NonadaptiveCsgd,
    SgdArmijo,
    DcsgdAsss,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::CsgdAsss => "csgd_asss",
            Algorithm::ScaledGd => "scaled_gd",
            Algorithm::NonadaptiveCsgd => "nonadaptive_csgd",
            Algorithm::SgdArmijo => "sgd_armijo",
            Algorithm::DcsgdAsss => "dcsgd_asss",
        }
    }
}

/// Extra per-round columns of a distributed run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistColumns {
    pub bytes_up: u64,
    pub bytes_down: u64,
    pub worker_alpha_min: f64,
    pub worker_alpha_max: f64,
}

/// State before and work done during iteration `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    /// Sampled component (the first of a batch; worker 0's in distributed runs);
    /// `None` for full-batch steps.
    pub i_t: Option<usize>,
    /// `f(x_t)`.
    pub f_full: f64,
    /// Sampled objective at `x_t`.
    pub f_i: f64,
    /// `‖∇f_{i_t}(x_t)‖²`.
    pub grad_sq: f64,
    pub alpha: f64,
    pub eta: f64,
    /// `‖m_t‖²` before the update.
    pub mem_sq: f64,
    /// `‖x_t − x*‖²` when the objective has a known minimizer.
    pub dist_sq: Option<f64>,
    pub backtracks: u32,
    /// Cumulative objective-value evaluations after this step.
    pub evals: u64,
    pub dist: Option<DistColumns>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed,
    /// Full loss exceeded the divergence threshold or became non-finite at `t`.
    Diverged { t: usize },
    /// The step at `t` could not be carried out; records before `t` are kept.
    Failed { t: usize, error: OptimizerError },
}

/// Everything needed to rerun a trace exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceHeader {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub iterations: usize,
    pub step: StepRule,
    pub comp: CompressionSpec,
    /// Components averaged per stochastic step; 0 for full-batch methods.
    pub batch: usize,
    pub workers: usize,
    pub objective: Option<ObjectiveSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub header: TraceHeader,
    pub records: Vec<StepRecord>,
    /// Iterate after the last completed step.
    pub final_x: DenseVector,
    pub final_loss: f64,
    pub final_dist_sq: Option<f64>,
    pub outcome: RunOutcome,
    /// Largest observed `‖(x_t − x̂_t) − m_t‖ / (1 + ‖m_t‖)`; `None` when unchecked.
    pub identity_max_ratio: Option<f64>,
}

impl RunTrace {
    pub fn initial_loss(&self) -> f64 {
        self.records.first().map_or(self.final_loss, |r| r.f_full)
    }

    /// Largest full loss seen, including the final (possibly diverged) value.
    pub fn max_loss(&self) -> f64 {
        self.records.iter().map(|r| r.f_full).fold(self.final_loss, |a, b| if b > a || b.is_nan() { b } else { a })
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.f_full).collect()
    }

    pub fn completed(&self) -> bool {
        self.outcome == RunOutcome::Completed
    }
}
