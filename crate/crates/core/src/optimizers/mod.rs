//! Single-node loops: CSGD-ASSS, scaled deterministic GD, the fixed-step
//! compressed baseline and uncompressed SGD with Armijo search.
//!
//! All four share one engine. A step samples `i_t`, picks a step size (Armijo
//! search on `f_{i_t}` after the `α_max = ω·α_{t−1}` reset, or a constant),
//! compresses `m_t + η_t∇f_{i_t}(x_t)` with error feedback and moves
//! `x_{t+1} = x_t − g_t`. Lossless compression (`k = d`) keeps the memory at
//! exactly zero, which turns the engine into plain (scaled) Armijo SGD or GD.

mod trace;

pub use trace::{Algorithm, DistColumns, RunOutcome, RunTrace, StepRecord, TraceHeader};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compression::{compress_with_feedback_sparse, CompressionError, CompressionSpec, ErrorMemory, Feedback};
use crate::linesearch::{armijo_search, next_alpha_max, ArmijoConfig, LineSearchError};
use crate::objectives::{FiniteSumObjective, LossTracker, ObjectiveError};
use crate::rng::{streams, Stream};
use crate::vector::DenseVector;

/// Full loss above which a run is stopped and flagged as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;
/// Relative tolerance of the perturbed-iterate identity `x_t − x̂_t = m_t`.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("invalid optimizer input: {0}")]
    InvalidInput(String),
    #[error("line search failed at t = {t}{}: {source}", worker.map(|w| format!(" on worker {w}")).unwrap_or_default())]
    LineSearch { t: usize, worker: Option<usize>, source: LineSearchError },
    #[error("perturbed-iterate identity violated at t = {t}: residual {residual:e} > {bound:e}")]
    IdentityViolation { t: usize, residual: f64, bound: f64 },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Compression(#[from] CompressionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepRule {
    Armijo(ArmijoConfig),
    Fixed { eta: f64 },
}

impl StepRule {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        match self {
            StepRule::Armijo(cfg) => cfg
                .validate()
                .map_err(|e| OptimizerError::InvalidInput(e.to_string())),
            StepRule::Fixed { eta } if !(eta.is_finite() && *eta >= 0.0) => {
                Err(OptimizerError::InvalidInput(format!("fixed step must be non-negative, got {eta}")))
            }
            StepRule::Fixed { .. } => Ok(()),
        }
    }

    fn initial_alpha_prev(&self) -> f64 {
        match self {
            StepRule::Armijo(cfg) => cfg.initial_alpha_prev(),
            StepRule::Fixed { eta } => *eta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sampling {
    /// `batch` indices drawn uniformly with replacement; their mean is the step objective.
    Stochastic { batch: usize },
    /// The step objective is the full mean.
    FullBatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub algorithm: Algorithm,
    pub step: StepRule,
    pub sampling: Sampling,
    pub comp: CompressionSpec,
    pub iterations: usize,
    /// Maintain `x̂_t` and stop with an error if `x_t − x̂_t` drifts from `m_t`.
    pub verify_identity: bool,
}

impl RunSpec {
    pub fn validate(&self, obj: &FiniteSumObjective) -> Result<(), OptimizerError> {
        self.step.validate()?;
        if self.iterations == 0 {
            return Err(OptimizerError::InvalidInput("need at least one iteration".into()));
        }
        if self.comp.d() != obj.dim() {
            return Err(OptimizerError::InvalidInput(format!(
                "compression dimension {} does not match objective dimension {}",
                self.comp.d(),
                obj.dim()
            )));
        }
        if let Sampling::Stochastic { batch: 0 } = self.sampling {
            return Err(OptimizerError::InvalidInput("batch size must be positive".into()));
        }
        Ok(())
    }

    fn batch(&self) -> usize {
        match self.sampling {
            Sampling::Stochastic { batch } => batch,
            Sampling::FullBatch => 0,
        }
    }
}

/// Loop state `(x_t, m_t, α_{t−1}, t)` plus the index sampler.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub x: DenseVector,
    pub mem: ErrorMemory,
    pub alpha_prev: f64,
    pub t: usize,
    pub evals: u64,
    rng: Stream,
}

impl OptimizerState {
    /// `x₀` from the objective, `m₀ = 0`, `α_{−1} = α_max_init/ω`.
    pub fn new(obj: &FiniteSumObjective, cfg: &ArmijoConfig, seed: u64) -> Self {
        Self::with_alpha_prev(obj, cfg.initial_alpha_prev(), seed)
    }

    fn with_alpha_prev(obj: &FiniteSumObjective, alpha_prev: f64, seed: u64) -> Self {
        Self {
            x: obj.initial_point().clone(),
            mem: ErrorMemory::zeros(obj.dim()),
            alpha_prev,
            t: 0,
            evals: 0,
            rng: Stream::new(seed, streams::SAMPLER),
        }
    }
}

/// `x̂_0 = x_0`, `x̂_{t+1} = x̂_t − η_t∇f_{i_t}(x_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedTracker {
    x_hat: DenseVector,
}

impl PerturbedTracker {
    pub fn new(x0: &DenseVector) -> Self {
        Self { x_hat: x0.clone() }
    }

    pub fn x_hat(&self) -> &DenseVector {
        &self.x_hat
    }

    /// Subtract the uncompressed update `η_t∇f_{i_t}(x_t)`.
    pub fn advance(&mut self, update: &DenseVector) {
        self.x_hat.sub_assign(update);
    }

    /// `‖(x − x̂) − m‖`.
    pub fn residual(&self, x: &DenseVector, m: &DenseVector) -> f64 {
        x.iter()
            .zip(self.x_hat.iter())
            .zip(m.iter())
            .map(|((a, b), c)| {
                let r = (a - b) - c;
                r * r
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// What an observer sees before each step and once after the last one.
#[derive(Debug, Clone, Copy)]
pub struct StepView<'a> {
    pub t: usize,
    pub x: &'a DenseVector,
    pub mem: &'a DenseVector,
    pub x_hat: Option<&'a DenseVector>,
}

/// One sampled step on a fixed iterate, shared with the distributed workers.
#[derive(Debug, Clone)]
pub(crate) struct LocalStep {
    pub f_i: f64,
    pub grad_sq: f64,
    pub alpha: f64,
    pub eta: f64,
    pub backtracks: u32,
    /// `η_t ∇f_{i_t}(x_t)`.
    pub update: DenseVector,
    pub feedback: Feedback,
}

/// Search (or fix) the step size on the mean of `indices` at `x` and compress.
/// Updates `alpha_prev` when a search runs; a zero gradient skips the search
/// and reuses the previous step size.
pub(crate) fn local_step(
    obj: &FiniteSumObjective,
    indices: &[usize],
    x: &DenseVector,
    mem: &ErrorMemory,
    alpha_prev: &mut f64,
    step: &StepRule,
    comp: &CompressionSpec,
) -> Result<LocalStep, LocalError> {
    let f_i = obj.batch_value(indices, x)?;
    let grad = obj.batch_grad(indices, x)?;
    let grad_sq = grad.norm_sq();
    let (alpha, eta, backtracks) = match step {
        StepRule::Armijo(cfg) => {
            if grad_sq == 0.0 {
                (*alpha_prev, cfg.scale_a * *alpha_prev, 0)
            } else {
                let alpha_max = next_alpha_max(*alpha_prev, cfg);
                let res = armijo_search(|y| obj.batch_value(indices, y).unwrap_or(f64::NAN), x, &grad, f_i, alpha_max, cfg)
                    .map_err(LocalError::Search)?;
                *alpha_prev = res.alpha;
                (res.alpha, res.eta, res.backtracks)
            }
        }
        StepRule::Fixed { eta } => (*eta, *eta, 0),
    };
    let update = grad.scaled(eta);
    let feedback = compress_with_feedback_sparse(mem, &update, comp)?;
    Ok(LocalStep { f_i, grad_sq, alpha, eta, backtracks, update, feedback })
}

#[derive(Debug)]
pub(crate) enum LocalError {
    Search(LineSearchError),
    Other(OptimizerError),
}

impl From<ObjectiveError> for LocalError {
    fn from(e: ObjectiveError) -> Self {
        LocalError::Other(e.into())
    }
}

impl From<CompressionError> for LocalError {
    fn from(e: CompressionError) -> Self {
        LocalError::Other(e.into())
    }
}

impl LocalError {
    pub(crate) fn at(self, t: usize, worker: Option<usize>) -> OptimizerError {
        match self {
            LocalError::Search(source) => OptimizerError::LineSearch { t, worker, source },
            LocalError::Other(e) => e,
        }
    }
}

/// Full-loss evaluation along a run: direct when `n ≤ d`, otherwise through
/// the incremental quadratic tracker.
pub(crate) enum LossEval<'a> {
    Direct(&'a FiniteSumObjective),
    Tracked(LossTracker<'a>),
}

impl<'a> LossEval<'a> {
    pub(crate) fn new(obj: &'a FiniteSumObjective, x: &DenseVector) -> Self {
        if obj.n() > obj.dim() {
            LossEval::Tracked(LossTracker::new(obj, x))
        } else {
            LossEval::Direct(obj)
        }
    }

    pub(crate) fn value(&self, x: &DenseVector) -> f64 {
        match self {
            LossEval::Direct(obj) => obj.full_value(x).unwrap_or(f64::NAN),
            LossEval::Tracked(t) => t.value(x),
        }
    }

    pub(crate) fn apply_step(&mut self, delta: &DenseVector, x_after: &DenseVector) {
        if let LossEval::Tracked(t) = self {
            t.apply_step(delta, x_after);
        }
    }
}

pub(crate) fn diverged(f: f64, x: &DenseVector) -> bool {
    !f.is_finite() || f > DIVERGENCE_THRESHOLD || !x.is_finite()
}

fn sample(rng: &mut Stream, n: usize, sampling: Sampling) -> Vec<usize> {
    match sampling {
        Sampling::Stochastic { batch } => (0..batch).map(|_| rng.index(n)).collect(),
        Sampling::FullBatch => (0..n).collect(),
    }
}

/// One CSGD-ASSS iteration on `state`; `f_full` in the record is evaluated directly.
pub fn csgd_asss_step(
    obj: &FiniteSumObjective,
    state: &mut OptimizerState,
    cfg: &ArmijoConfig,
    comp: &CompressionSpec,
) -> Result<StepRecord, OptimizerError> {
    let f_full = obj.full_value(&state.x)?;
    let (record, _) = advance(obj, state, &StepRule::Armijo(*cfg), Sampling::Stochastic { batch: 1 }, comp, f_full)?;
    Ok(record)
}

/// Applies one step to `state` and returns its record plus the uncompressed update.
fn advance(
    obj: &FiniteSumObjective,
    state: &mut OptimizerState,
    step: &StepRule,
    sampling: Sampling,
    comp: &CompressionSpec,
    f_full: f64,
) -> Result<(StepRecord, (DenseVector, DenseVector)), OptimizerError> {
    let t = state.t;
    let indices = sample(&mut state.rng, obj.n(), sampling);
    let ls = local_step(obj, &indices, &state.x, &state.mem, &mut state.alpha_prev, step, comp).map_err(|e| e.at(t, None))?;
    state.evals += 1 + u64::from(ls.backtracks);
    let record = StepRecord {
        t,
        i_t: match sampling {
            Sampling::Stochastic { .. } => Some(indices[0]),
            Sampling::FullBatch => None,
        },
        f_full,
        f_i: ls.f_i,
        grad_sq: ls.grad_sq,
        alpha: ls.alpha,
        eta: ls.eta,
        mem_sq: state.mem.norm_sq(),
        dist_sq: obj.minimizer().map(|xs| state.x.dist_sq(xs)),
        backtracks: ls.backtracks,
        evals: state.evals,
        dist: None,
    };
    let Feedback { g, memory, .. } = ls.feedback;
    state.x.sub_assign(&g);
    state.mem = memory;
    state.t += 1;
    Ok((record, (g, ls.update)))
}

/// Run `spec` for `spec.iterations` steps from the objective's initial point.
///
/// Algorithm failures end the run early and are reported in the trace
/// outcome; only invalid inputs produce `Err`.
pub fn run(
    obj: &FiniteSumObjective,
    spec: &RunSpec,
    seed: u64,
    observer: Option<&mut dyn FnMut(&StepView)>,
) -> Result<RunTrace, OptimizerError> {
    spec.validate(obj)?;
    let mut observer = observer;
    let mut state = OptimizerState::with_alpha_prev(obj, spec.step.initial_alpha_prev(), seed);
    let mut tracker = spec.verify_identity.then(|| PerturbedTracker::new(&state.x));
    let mut identity_max: f64 = 0.0;
    let mut loss = LossEval::new(obj, &state.x);
    let mut records = Vec::with_capacity(spec.iterations);
    let mut outcome = RunOutcome::Completed;
    let mut f_full = loss.value(&state.x);

    for t in 0..spec.iterations {
        if diverged(f_full, &state.x) {
            outcome = RunOutcome::Diverged { t };
            break;
        }
        if let Some(obs) = observer.as_mut() {
            obs(&StepView { t, x: &state.x, mem: state.mem.as_vector(), x_hat: tracker.as_ref().map(|k| k.x_hat()) });
        }
        let (record, (g, update)) =
            match advance(obj, &mut state, &spec.step, spec.sampling, &spec.comp, f_full) {
                Ok(v) => v,
                Err(error) => {
                    outcome = RunOutcome::Failed { t, error };
                    break;
                }
            };
        records.push(record);
        loss.apply_step(&g, &state.x);
        f_full = loss.value(&state.x);
        if let Some(k) = tracker.as_mut() {
            k.advance(&update);
            let m = state.mem.as_vector();
            let residual = k.residual(&state.x, m);
            let scale = 1.0 + m.norm();
            identity_max = identity_max.max(residual / scale);
            if residual > IDENTITY_TOLERANCE * scale && !diverged(f_full, &state.x) {
                outcome = RunOutcome::Failed {
                    t: t + 1,
                    error: OptimizerError::IdentityViolation { t: t + 1, residual, bound: IDENTITY_TOLERANCE * scale },
                };
                break;
            }
        }
    }
    if outcome == RunOutcome::Completed {
        if diverged(f_full, &state.x) {
            outcome = RunOutcome::Diverged { t: spec.iterations };
        } else if let Some(obs) = observer.as_mut() {
            obs(&StepView {
                t: spec.iterations,
                x: &state.x,
                mem: state.mem.as_vector(),
                x_hat: tracker.as_ref().map(|k| k.x_hat()),
            });
        }
    }
    Ok(RunTrace {
        header: TraceHeader {
            algorithm: spec.algorithm,
            seed,
            iterations: spec.iterations,
            step: spec.step,
            comp: spec.comp,
            batch: spec.batch(),
            workers: 1,
            objective: None,
        },
        records,
        final_dist_sq: obj.minimizer().map(|xs| state.x.dist_sq(xs)),
        final_x: state.x,
        final_loss: f_full,
        outcome,
        identity_max_ratio: spec.verify_identity.then_some(identity_max),
    })
}

pub fn csgd_asss_spec(cfg: &ArmijoConfig, comp: &CompressionSpec, iterations: usize) -> RunSpec {
    RunSpec {
        algorithm: Algorithm::CsgdAsss,
        step: StepRule::Armijo(*cfg),
        sampling: Sampling::Stochastic { batch: 1 },
        comp: *comp,
        iterations,
        verify_identity: true,
    }
}

/// Algorithm 2 with identity verification enabled.
pub fn run_csgd_asss(
    obj: &FiniteSumObjective,
    cfg: &ArmijoConfig,
    comp: &CompressionSpec,
    iterations: usize,
    seed: u64,
) -> Result<RunTrace, OptimizerError> {
    run(obj, &csgd_asss_spec(cfg, comp, iterations), seed, None)
}

/// Deterministic `x_{t+1} = x_t − aα_t∇f(x_t)` with Armijo search on the full objective.
///
/// The rate guarantee needs `a < 2σ`; larger values still run.
pub fn run_scaled_gd(obj: &FiniteSumObjective, cfg: &ArmijoConfig, iterations: usize) -> Result<RunTrace, OptimizerError> {
    let spec = RunSpec {
        algorithm: Algorithm::ScaledGd,
        step: StepRule::Armijo(*cfg),
        sampling: Sampling::FullBatch,
        comp: CompressionSpec::identity(obj.dim()),
        iterations,
        verify_identity: false,
    };
    run(obj, &spec, 0, None)
}

/// Compressed SGD with error feedback and a constant step `eta_fixed`.
pub fn run_nonadaptive_csgd(
    obj: &FiniteSumObjective,
    eta_fixed: f64,
    comp: &CompressionSpec,
    iterations: usize,
    seed: u64,
) -> Result<RunTrace, OptimizerError> {
    let spec = RunSpec {
        algorithm: Algorithm::NonadaptiveCsgd,
        step: StepRule::Fixed { eta: eta_fixed },
        sampling: Sampling::Stochastic { batch: 1 },
        comp: *comp,
        iterations,
        verify_identity: true,
    };
    run(obj, &spec, seed, None)
}

/// Algorithm 2 without compression (`k = d`).
pub fn run_sgd_armijo_uncompressed(
    obj: &FiniteSumObjective,
    cfg: &ArmijoConfig,
    iterations: usize,
    seed: u64,
) -> Result<RunTrace, OptimizerError> {
    let mut spec = csgd_asss_spec(cfg, &CompressionSpec::identity(obj.dim()), iterations);
    spec.algorithm = Algorithm::SgdArmijo;
    run(obj, &spec, seed, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linesearch::FirstTrial;
    use crate::objectives::{make_diag_quadratic, make_interpolated_regression, make_strongly_convex_mix};

    fn common_columns(r: &StepRecord) -> (usize, f64, f64, f64, f64, f64, f64, u32) {
        (r.t, r.f_full, r.f_i, r.grad_sq, r.alpha, r.eta, r.mem_sq, r.backtracks)
    }

    #[test]
    fn lossless_keeps_memory_zero_and_reduces_to_armijo_gd() {
        let obj = make_diag_quadratic(&[0.5, 0.5]).unwrap();
        let cfg = ArmijoConfig::default();
        let t = run_csgd_asss(&obj, &cfg, &CompressionSpec::identity(2), 20, 1).unwrap();
        assert!(t.completed());
        assert!(t.records.iter().all(|r| r.mem_sq == 0.0));
        // n = 1: stochastic and full-batch steps coincide.
        let gd = run_scaled_gd(&obj, &cfg, 20).unwrap();
        for (a, b) in t.records.iter().zip(&gd.records) {
            assert_eq!(common_columns(a), common_columns(b));
        }
        assert_eq!(t.final_x, gd.final_x);
    }

    #[test]
    fn single_step_hand_trace_with_top1() {
        // f = x₁²/2 + x₂²/2 at [1, 1.5]: ∇f = x. With α_max = 0.5 the first
        // candidate is accepted, so η = a·0.5.
        let obj = make_diag_quadratic(&[0.5, 0.5]).unwrap().with_initial_point(DenseVector::new(vec![1.0, 1.5]).unwrap()).unwrap();
        let cfg = ArmijoConfig { alpha_max_init: 0.5, omega: 1.0, scale_a: 0.2, ..ArmijoConfig::default() };
        let comp = CompressionSpec::new(1, 2).unwrap();
        let mut state = OptimizerState::new(&obj, &cfg, 0);
        let rec = csgd_asss_step(&obj, &mut state, &cfg, &comp).unwrap();
        assert_eq!(rec.alpha, 0.5);
        assert_eq!(rec.backtracks, 1);
        let eta = 0.2 * 0.5;
        assert_eq!(state.x.as_slice(), &[1.0, 1.5 - eta * 1.5]);
        assert_eq!(state.mem.as_vector().as_slice(), &[eta * 1.0, 0.0]);
        assert_eq!(rec.f_full, 0.5 + 0.5 * 2.25);
    }

    #[test]
    fn first_record_matches_direct_evaluation() {
        let obj = make_interpolated_regression(300, 20, 1.0, 4).unwrap();
        let t = run_csgd_asss(&obj, &ArmijoConfig::default(), &CompressionSpec::new(2, 20).unwrap(), 1, 3).unwrap();
        let direct = obj.full_value(obj.initial_point()).unwrap();
        assert!((t.records[0].f_full - direct).abs() <= 1e-12 * direct);
        assert_eq!(t.records.len(), 1);
    }

    #[test]
    fn identity_tracked_on_compressed_runs() {
        let obj = make_strongly_convex_mix(10, 16, 0.1, 7).unwrap();
        let comp = CompressionSpec::new(3, 16).unwrap();
        let cfg = ArmijoConfig { scale_a: 0.02, ..ArmijoConfig::default() };
        let mut worst: f64 = 0.0;
        let mut obs = |v: &StepView| {
            let x_hat = v.x_hat.unwrap();
            let r = v.x.sub(x_hat).sub(v.mem).norm();
            worst = worst.max(r / (1.0 + v.mem.norm()));
        };
        let t = run(&obj, &csgd_asss_spec(&cfg, &comp, 500), 5, Some(&mut obs)).unwrap();
        assert!(t.completed(), "{:?}", t.outcome);
        assert!(worst <= 1e-9);
        assert!(t.identity_max_ratio.unwrap() <= 1e-9);
    }

    #[test]
    fn uncompressed_wrapper_matches_identity_compression() {
        let obj = make_interpolated_regression(50, 8, 1.0, 2).unwrap();
        let cfg = ArmijoConfig::default();
        let a = run_sgd_armijo_uncompressed(&obj, &cfg, 100, 9).unwrap();
        let b = run_csgd_asss(&obj, &cfg, &CompressionSpec::identity(8), 100, 9).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.final_x, b.final_x);
    }

    #[test]
    fn fixed_step_baseline() {
        let obj = make_interpolated_regression(40, 6, 1.0, 8).unwrap();
        let comp = CompressionSpec::new(2, 6).unwrap();
        let frozen = run_nonadaptive_csgd(&obj, 0.0, &comp, 30, 1).unwrap();
        assert_eq!(&frozen.final_x, obj.initial_point());
        assert!(frozen.records.iter().all(|r| r.eta == 0.0));

        let quad = make_diag_quadratic(&[1.0, 0.25, 2.0]).unwrap();
        let gd = run_nonadaptive_csgd(&quad, 0.9 / quad.l_max(), &CompressionSpec::identity(3), 50, 1).unwrap();
        assert!(gd.losses().windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn zero_gradient_skips_search() {
        let obj = make_diag_quadratic(&[1.0]).unwrap().with_initial_point(DenseVector::zeros(1)).unwrap();
        let cfg = ArmijoConfig::default();
        let t = run_csgd_asss(&obj, &cfg, &CompressionSpec::identity(1), 3, 0).unwrap();
        assert!(t.records.iter().all(|r| r.backtracks == 0 && r.alpha == cfg.initial_alpha_prev()));
    }

    #[test]
    fn search_failure_halts_with_trace() {
        let obj = make_diag_quadratic(&[1e6]).unwrap();
        let cfg = ArmijoConfig { max_backtracks: 2, first_trial: FirstTrial::Premultiplied, ..ArmijoConfig::default() };
        let t = run_csgd_asss(&obj, &cfg, &CompressionSpec::identity(1), 10, 0).unwrap();
        assert!(matches!(t.outcome, RunOutcome::Failed { t: 0, error: OptimizerError::LineSearch { .. } }));
        assert!(t.records.is_empty());
    }

    #[test]
    fn divergence_is_detected() {
        let obj = make_diag_quadratic(&[1.0]).unwrap();
        let t = run_nonadaptive_csgd(&obj, 5.0, &CompressionSpec::identity(1), 100, 0).unwrap();
        assert!(matches!(t.outcome, RunOutcome::Diverged { .. }));
        assert!(t.max_loss() > DIVERGENCE_THRESHOLD);
    }

    #[test]
    fn runs_are_deterministic_and_validated() {
        let obj = make_interpolated_regression(60, 10, 1.0, 1).unwrap();
        let comp = CompressionSpec::new(1, 10).unwrap();
        let cfg = ArmijoConfig::default();
        let a = run_csgd_asss(&obj, &cfg, &comp, 200, 4).unwrap();
        let b = run_csgd_asss(&obj, &cfg, &comp, 200, 4).unwrap();
        assert_eq!(a, b);
        assert!(run_csgd_asss(&obj, &cfg, &comp, 0, 4).is_err());
        assert!(run_csgd_asss(&obj, &cfg, &CompressionSpec::new(1, 11).unwrap(), 5, 4).is_err());
    }
}
