//! Synchronous simulator of distributed CSGD-ASSS.
//!
//! `N` workers own contiguous, equally sized shards of the components. In each
//! round every worker samples from its shard, runs its own Armijo search
//! (with its own `α_max = ω·α_{t−1}^{(k)}` reset), compresses
//! `m^{(k)} + aα^{(k)}∇f^{(k)}(x_t)` with its own memory and sends the sparse
//! result. The central node averages the dense reconstructions in worker-id
//! order. Workers run concurrently; results do not depend on scheduling.

pub mod codec;

pub use codec::{CodecError, SparseMessage, ENTRY_BYTES, HEADER_BYTES};

use std::ops::Range;

use rayon::prelude::*;
use thiserror::Error;

use crate::compression::{CompressionSpec, ErrorMemory};
use crate::linesearch::ArmijoConfig;
use crate::objectives::FiniteSumObjective;
use crate::optimizers::{
    diverged, local_step, Algorithm, DistColumns, LossEval, OptimizerError, RunOutcome, RunTrace, StepRecord, StepRule,
    StepView, TraceHeader,
};
use crate::rng::{streams, Stream};
use crate::vector::DenseVector;

/// Relative tolerance of `x_t − x̂_t = (1/N)Σ_k m_t^{(k)}`.
pub const DISTRIBUTED_IDENTITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributedError {
    #[error("invalid distributed input: {0}")]
    InvalidInput(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
}

#[derive(Debug, Clone)]
pub struct WorkerState {
    pub id: usize,
    pub shard: Range<usize>,
    pub mem: ErrorMemory,
    pub alpha_prev: f64,
    rng: Stream,
}

impl WorkerState {
    /// Worker `id` of `workers`, owning shard `id` of a contiguous equal split of `0..n`.
    pub fn new(id: usize, workers: usize, n: usize, dim: usize, cfg: &ArmijoConfig, seed: u64) -> Self {
        let m = n / workers;
        Self {
            id,
            shard: id * m..(id + 1) * m,
            mem: ErrorMemory::zeros(dim),
            alpha_prev: cfg.initial_alpha_prev(),
            rng: Stream::new(seed, streams::SAMPLER + id as u64),
        }
    }
}

/// Local quantities of one worker step, for the trace.
#[derive(Debug, Clone)]
pub struct WorkerReport {
    /// Global index of the sampled component.
    pub i_t: usize,
    pub f_i: f64,
    pub grad_sq: f64,
    pub alpha: f64,
    pub eta: f64,
    pub backtracks: u32,
    /// `‖m^{(k)}‖²` before the step.
    pub mem_sq: f64,
    /// `aα^{(k)}∇f^{(k)}_{i}(x_t)`.
    pub update: DenseVector,
}

/// Sample from the shard, search, compress with feedback and emit the message.
pub fn worker_step(
    worker: &mut WorkerState,
    obj: &FiniteSumObjective,
    x: &DenseVector,
    t: usize,
    cfg: &ArmijoConfig,
    comp: &CompressionSpec,
) -> Result<(SparseMessage, WorkerReport), DistributedError> {
    x.check_dim(obj.dim()).map_err(|e| DistributedError::InvalidInput(e.to_string()))?;
    let i = worker.shard.start + worker.rng.index(worker.shard.len());
    let ls = local_step(obj, &[i], x, &worker.mem, &mut worker.alpha_prev, &StepRule::Armijo(*cfg), comp)
        .map_err(|e| e.at(t, Some(worker.id)))?;
    let report = WorkerReport {
        i_t: i,
        f_i: ls.f_i,
        grad_sq: ls.grad_sq,
        alpha: ls.alpha,
        eta: ls.eta,
        backtracks: ls.backtracks,
        mem_sq: worker.mem.norm_sq(),
        update: ls.update,
    };
    let msg = SparseMessage::from_support(worker.id as u32, t as u64, &ls.feedback.g, &ls.feedback.support);
    worker.mem = ls.feedback.memory;
    Ok((msg, report))
}

/// `x_{t+1} = x_t − (1/N)Σ_k densify(g^{(k)})`, summed in worker-id order.
pub fn central_aggregate(
    messages: &[SparseMessage],
    x: &DenseVector,
    workers: usize,
    t: u64,
) -> Result<DenseVector, DistributedError> {
    let mut next = x.clone();
    next.sub_assign(&aggregate_update(messages, x.dim(), workers, t)?);
    Ok(next)
}

/// The averaged step `(1/N)Σ_k densify(g^{(k)})` after protocol checks.
pub fn aggregate_update(
    messages: &[SparseMessage],
    dim: usize,
    workers: usize,
    t: u64,
) -> Result<DenseVector, DistributedError> {
    if messages.len() != workers {
        return Err(DistributedError::Protocol(format!("expected {workers} messages, got {}", messages.len())));
    }
    let mut order: Vec<&SparseMessage> = messages.iter().collect();
    order.sort_by_key(|m| m.sender);
    for (k, m) in order.iter().enumerate() {
        if m.sender as usize != k {
            return Err(DistributedError::Protocol(format!("missing or duplicate message for worker {k}")));
        }
        if m.iteration != t {
            return Err(DistributedError::Protocol(format!(
                "worker {k} sent iteration {}, expected {t}",
                m.iteration
            )));
        }
    }
    let dense: Vec<DenseVector> = order.iter().map(|m| m.densify(dim)).collect::<Result<_, _>>()?;
    Ok(mean_in_order(&dense))
}

/// `(1/N)Σ v_k`, accumulated from `v_0` in order.
fn mean_in_order(vs: &[DenseVector]) -> DenseVector {
    let mut acc = vs[0].clone();
    for v in &vs[1..] {
        for (a, b) in acc.as_mut_slice().iter_mut().zip(v.iter()) {
            *a += b;
        }
    }
    let n = vs.len() as f64;
    for a in acc.as_mut_slice() {
        *a /= n;
    }
    acc
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let mut count = 0usize;
    let mut sum = 0.0;
    for v in values {
        sum = if count == 0 { v } else { sum + v };
        count += 1;
    }
    sum / count as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributedTrace {
    pub trace: RunTrace,
    /// `worker_alphas[k][t]`: accepted step size of worker `k` in round `t`.
    pub worker_alphas: Vec<Vec<f64>>,
    /// Largest observed `‖(x_t − x̂_t) − (1/N)Σm^{(k)}‖ / (1 + ‖x_t‖)`.
    pub identity_max_ratio: f64,
}

/// `T` synchronous rounds of distributed CSGD-ASSS.
pub fn run_dcsgd(
    obj: &FiniteSumObjective,
    workers: usize,
    cfg: &ArmijoConfig,
    comp: &CompressionSpec,
    iterations: usize,
    seed: u64,
) -> Result<DistributedTrace, DistributedError> {
    run_dcsgd_observed(obj, workers, cfg, comp, iterations, seed, None)
}

/// As [`run_dcsgd`]; the observer sees `x_t`, the averaged memory and `x̂_t`.
pub fn run_dcsgd_observed(
    obj: &FiniteSumObjective,
    workers: usize,
    cfg: &ArmijoConfig,
    comp: &CompressionSpec,
    iterations: usize,
    seed: u64,
    mut observer: Option<&mut dyn FnMut(&StepView)>,
) -> Result<DistributedTrace, DistributedError> {
    let invalid = |m: String| Err(DistributedError::InvalidInput(m));
    if workers == 0 || obj.n() % workers != 0 {
        return invalid(format!("n = {} is not divisible into {workers} equal shards", obj.n()));
    }
    if iterations == 0 {
        return invalid("need at least one round".into());
    }
    if comp.d() != obj.dim() {
        return invalid(format!("compression dimension {} does not match {}", comp.d(), obj.dim()));
    }
    cfg.validate().map_err(|e| DistributedError::InvalidInput(e.to_string()))?;

    let d = obj.dim();
    let mut states: Vec<WorkerState> = (0..workers).map(|k| WorkerState::new(k, workers, obj.n(), d, cfg, seed)).collect();
    let mut x = obj.initial_point().clone();
    let mut x_hat = x.clone();
    let mut loss = LossEval::new(obj, &x);
    let mut f_full = loss.value(&x);
    let mut records = Vec::with_capacity(iterations);
    let mut worker_alphas = vec![Vec::with_capacity(iterations); workers];
    let mut outcome = RunOutcome::Completed;
    let mut evals = 0u64;
    let mut identity_max: f64 = 0.0;
    let bytes_up = (workers * comp.k() * ENTRY_BYTES) as u64;
    let bytes_down = (d * 8) as u64;

    let mean_memory = |states: &[WorkerState]| {
        let mems: Vec<DenseVector> = states.iter().map(|s| s.mem.as_vector().clone()).collect();
        mean_in_order(&mems)
    };

    for t in 0..iterations {
        if diverged(f_full, &x) {
            outcome = RunOutcome::Diverged { t };
            break;
        }
        if let Some(obs) = observer.as_mut() {
            let m = mean_memory(&states);
            obs(&StepView { t, x: &x, mem: &m, x_hat: Some(&x_hat) });
        }
        let results: Vec<Result<(SparseMessage, WorkerReport), DistributedError>> =
            states.par_iter_mut().map(|w| worker_step(w, obj, &x, t, cfg, comp)).collect();
        let mut messages = Vec::with_capacity(workers);
        let mut reports = Vec::with_capacity(workers);
        let mut failure = None;
        for r in results {
            match r {
                Ok((m, rep)) => {
                    messages.push(m);
                    reports.push(rep);
                }
                Err(e) => {
                    failure.get_or_insert(e);
                }
            }
        }
        if let Some(e) = failure {
            let error = match e {
                DistributedError::Optimizer(err) => err,
                other => OptimizerError::InvalidInput(other.to_string()),
            };
            outcome = RunOutcome::Failed { t, error };
            break;
        }
        let step = aggregate_update(&messages, x.dim(), workers, t as u64)?;
        let step_total = backtracks_total(&reports);
        evals += workers as u64 + u64::from(step_total);
        let (amin, amax) = reports.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.alpha), hi.max(r.alpha)));
        records.push(StepRecord {
            t,
            i_t: Some(reports[0].i_t),
            f_full,
            f_i: mean_of(reports.iter().map(|r| r.f_i)),
            grad_sq: mean_of(reports.iter().map(|r| r.grad_sq)),
            alpha: mean_of(reports.iter().map(|r| r.alpha)),
            eta: mean_of(reports.iter().map(|r| r.eta)),
            mem_sq: mean_of(reports.iter().map(|r| r.mem_sq)),
            dist_sq: obj.minimizer().map(|xs| x.dist_sq(xs)),
            backtracks: step_total,
            evals,
            dist: Some(DistColumns { bytes_up, bytes_down, worker_alpha_min: amin, worker_alpha_max: amax }),
        });
        for (k, r) in reports.iter().enumerate() {
            worker_alphas[k].push(r.alpha);
        }
        x.sub_assign(&step);
        loss.apply_step(&step, &x);
        f_full = loss.value(&x);
        let updates: Vec<DenseVector> = reports.into_iter().map(|r| r.update).collect();
        x_hat.sub_assign(&mean_in_order(&updates));

        let m = mean_memory(&states);
        let residual = x.sub(&x_hat).sub(&m).norm();
        let scale = 1.0 + x.norm();
        identity_max = identity_max.max(residual / scale);
        if residual > DISTRIBUTED_IDENTITY_TOLERANCE * scale && !diverged(f_full, &x) {
            outcome = RunOutcome::Failed {
                t: t + 1,
                error: OptimizerError::IdentityViolation {
                    t: t + 1,
                    residual,
                    bound: DISTRIBUTED_IDENTITY_TOLERANCE * scale,
                },
            };
            break;
        }
    }
    if outcome == RunOutcome::Completed {
        if diverged(f_full, &x) {
            outcome = RunOutcome::Diverged { t: iterations };
        } else if let Some(obs) = observer.as_mut() {
            let m = mean_memory(&states);
            obs(&StepView { t: iterations, x: &x, mem: &m, x_hat: Some(&x_hat) });
        }
    }
    let trace = RunTrace {
        header: TraceHeader {
            algorithm: Algorithm::DcsgdAsss,
            seed,
            iterations,
            step: StepRule::Armijo(*cfg),
            comp: *comp,
            batch: 1,
            workers,
            objective: None,
        },
        records,
        final_dist_sq: obj.minimizer().map(|xs| x.dist_sq(xs)),
        final_x: x,
        final_loss: f_full,
        outcome,
        identity_max_ratio: Some(identity_max),
    };
    Ok(DistributedTrace { trace, worker_alphas, identity_max_ratio: identity_max })
}

fn backtracks_total(reports: &[WorkerReport]) -> u32 {
    reports.iter().map(|r| r.backtracks).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{make_interpolated_regression, ridge_from_parts};
    use crate::optimizers::run_csgd_asss;

    #[test]
    fn aggregate_examples() {
        let x = DenseVector::new(vec![5.0, 5.0]).unwrap();
        let m0 = SparseMessage { sender: 0, iteration: 0, entries: vec![(0, 2.0)] };
        let m1 = SparseMessage { sender: 1, iteration: 0, entries: vec![(1, 4.0)] };
        let next = central_aggregate(&[m1.clone(), m0.clone()], &x, 2, 0).unwrap();
        assert_eq!(next.as_slice(), &[4.0, 3.0]);
        let zero = SparseMessage { sender: 0, iteration: 0, entries: vec![(0, 0.0)] };
        assert_eq!(central_aggregate(&[zero], &x, 1, 0).unwrap(), x);
        assert!(matches!(central_aggregate(&[m0.clone()], &x, 2, 0), Err(DistributedError::Protocol(_))));
        assert!(matches!(central_aggregate(&[m0.clone(), m0.clone()], &x, 2, 0), Err(DistributedError::Protocol(_))));
        assert!(matches!(central_aggregate(&[m0, m1], &x, 2, 1), Err(DistributedError::Protocol(_))));
    }

    #[test]
    fn single_worker_matches_single_node_bitwise() {
        let obj = make_interpolated_regression(40, 12, 1.0, 3).unwrap();
        let cfg = ArmijoConfig::default();
        let comp = CompressionSpec::new(2, 12).unwrap();
        let single = run_csgd_asss(&obj, &cfg, &comp, 300, 17).unwrap();
        let dist = run_dcsgd(&obj, 1, &cfg, &comp, 300, 17).unwrap().trace;
        assert_eq!(single.records.len(), dist.records.len());
        for (a, b) in single.records.iter().zip(&dist.records) {
            assert_eq!(StepRecord { dist: None, ..b.clone() }, *a);
        }
        assert_eq!(single.final_x, dist.final_x);
    }

    #[test]
    fn lossless_message_carries_scaled_gradient() {
        let obj = make_interpolated_regression(4, 3, 1.0, 3).unwrap();
        let cfg = ArmijoConfig::default();
        let comp = CompressionSpec::identity(3);
        let mut w = WorkerState::new(0, 2, 4, 3, &cfg, 1);
        let x = obj.initial_point().clone();
        let (msg, rep) = worker_step(&mut w, &obj, &x, 0, &cfg, &comp).unwrap();
        assert_eq!(msg.densify(3).unwrap(), rep.update);
        assert_eq!(w.mem.norm_sq(), 0.0);
        assert!(w.shard.contains(&rep.i_t));
    }

    #[test]
    fn two_worker_round_by_hand() {
        // Shard 0: f = (x₁ + x₂ − 1)²; shard 1: f = (2x₁ − 2)²; both vanish at x* = (1, 0).
        let obj = ridge_from_parts(vec![vec![1.0, 1.0], vec![2.0, 0.0]], vec![1.0, 0.0], vec![0.0, 0.0]).unwrap();
        let cfg = ArmijoConfig { alpha_max_init: 0.05, ..ArmijoConfig::default() };
        let comp = CompressionSpec::new(1, 2).unwrap();
        let out = run_dcsgd(&obj, 2, &cfg, &comp, 1, 0).unwrap();
        // At x₀ = 0: ∇f⁰ = (−2, −2), ∇f¹ = (−8, 0). α = 0.05 passes both Armijo tests
        // (L = 4 and 8, α̃ = 0.45 and 0.225), so η = 0.015.
        let eta = 0.3 * 0.05;
        let g0 = [-2.0 * eta, 0.0];
        let g1 = [-8.0 * eta, 0.0];
        let x1 = &out.trace.final_x;
        assert_eq!(x1.as_slice(), &[0.0 - (g0[0] + g1[0]) / 2.0, 0.0 - (g0[1] + g1[1]) / 2.0]);
        assert_eq!(out.worker_alphas, vec![vec![0.05], vec![0.05]]);
        // m⁰ = (0, −2η), m¹ = 0, so x₁ − x̂₁ = (0, −η).
        assert!(out.identity_max_ratio <= 1e-15);
    }

    #[test]
    fn heterogeneous_shards_order_median_step_sizes() {
        let d = 8;
        let mut rng = Stream::new(5, 0);
        let mut feats = Vec::new();
        for i in 0..40 {
            let scale = if i < 20 { 0.3 } else { 3.0 };
            feats.push(rng.normal_vec(d, scale));
        }
        let xs = rng.normal_vec(d, 1.0);
        let obj = ridge_from_parts(feats, xs, vec![0.0; 40]).unwrap();
        let cfg = ArmijoConfig { alpha_max_init: 10.0, ..ArmijoConfig::default() };
        let out = run_dcsgd(&obj, 2, &cfg, &CompressionSpec::new(2, d).unwrap(), 200, 4).unwrap();
        let median = |v: &[f64]| {
            let mut v = v.to_vec();
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        assert!(median(&out.worker_alphas[1]) < median(&out.worker_alphas[0]));
    }

    #[test]
    fn rejects_uneven_shards() {
        let obj = make_interpolated_regression(10, 3, 1.0, 3).unwrap();
        let r = run_dcsgd(&obj, 3, &ArmijoConfig::default(), &CompressionSpec::identity(3), 5, 0);
        assert!(matches!(r, Err(DistributedError::InvalidInput(_))));
    }
}
