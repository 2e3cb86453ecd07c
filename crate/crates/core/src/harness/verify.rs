//! The invariant suite behind `csgd-lab verify`.
//!
//! Every item recomputes its property from first principles on seeded inputs
//! and reports one pass/fail line. `quick` shrinks sample counts and seed
//! lists; the properties checked are the same.

use std::fmt;
use std::time::Instant;

use crate::compression::{compress_with_feedback, top_k, CompressionSpec, ErrorMemory};
use crate::distributed::codec::SparseMessage;
use crate::distributed::run_dcsgd;
use crate::linesearch::{armijo_search, guaranteed_alpha, AlphaMaxRule, ArmijoConfig, FirstTrial};
use crate::objectives::{
    make_diag_quadratic, make_interpolated_regression, make_strongly_convex_mix, FiniteSumObjective,
};
use crate::optimizers::{csgd_asss_spec, run, run_csgd_asss, run_scaled_gd, Algorithm, RunSpec, Sampling, StepRule, StepView};
use crate::rng::{streams, Stream};
use crate::theory::{
    a1_tilde, capped_mu_bar, nonconvex_delta, pr_epsilon, pr_optimal, pr_slack, rate_constants_convex,
    rate_constants_nonconvex, rate_constants_strongly_convex, solve_sz_program, sz_grid_search, upper_bound_alpha,
    zeta, TheoryInputs,
};
use crate::vector::DenseVector;

use super::analysis::{classify, fit_rate, IterateAverager, RateModel, RunStatus};
use super::output::write_trace;

#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    pub quick: bool,
    /// Fault injection: run every CSGD-ASSS check with `a = 1`.
    pub disable_scaling: bool,
}

#[derive(Debug, Clone)]
pub struct VerifyItem {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for VerifyItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {:<24} {} ({:.2}s)", self.name, self.detail, self.seconds)
    }
}

type Check = fn(&VerifyOptions) -> Result<String, String>;

const CHECKS: [(&str, Check); 16] = [
    ("compression_contraction", compression_contraction),
    ("memory_decomposition", memory_decomposition),
    ("armijo_bounds", armijo_bounds),
    ("sz_program_oracle", sz_program_oracle),
    ("zeta_consistency", zeta_consistency),
    ("pr_epsilon_witness", pr_epsilon_witness),
    ("perturbed_identity", perturbed_identity),
    ("distributed_identity", distributed_identity),
    ("scaling_necessity", scaling_necessity),
    ("convex_bound", convex_bound),
    ("strongly_convex_bound", strongly_convex_bound),
    ("nonconvex_constants", nonconvex_constants),
    ("scaled_gd_ratio", scaled_gd_ratio),
    ("scaled_gd_bound", scaled_gd_bound),
    ("codec_roundtrip", codec_roundtrip),
    ("trace_determinism", trace_determinism),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|(n, _)| *n).collect()
}

pub fn verify(opts: &VerifyOptions) -> Vec<VerifyItem> {
    CHECKS
        .iter()
        .map(|(name, check)| {
            let start = Instant::now();
            let (passed, detail) = match check(opts) {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            VerifyItem { name, passed, detail, seconds: start.elapsed().as_secs_f64() }
        })
        .collect()
}

fn ensure(ok: bool, detail: String) -> Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn scale(opts: &VerifyOptions, a: f64) -> f64 {
    if opts.disable_scaling {
        1.0
    } else {
        a
    }
}

fn gaussian(rng: &mut Stream, d: usize) -> DenseVector {
    DenseVector::new(rng.normal_vec(d, 1.0)).expect("finite normals")
}

fn compression_contraction(opts: &VerifyOptions) -> Result<String, String> {
    let per = if opts.quick { 1_000 } else { 10_000 };
    let mut rng = Stream::new(1, streams::VERIFY);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for (d, k) in [(128, 1), (128, 13), (1024, 10)] {
        let spec = CompressionSpec::new(k, d).map_err(|e| e.to_string())?;
        for _ in 0..per {
            let v = gaussian(&mut rng, d);
            let c = top_k(&v, &spec).map_err(|e| e.to_string())?;
            // Dropped mass, computed from the kept coordinates.
            let kept: f64 = c.iter().map(|x| x * x).sum();
            let total = v.norm_sq();
            let dropped = total - kept;
            worst = worst.max(dropped / ((1.0 - spec.gamma()) * total));
            if v.sub(&c).norm_sq() > (1.0 - spec.gamma()) * total {
                violations += 1;
            }
        }
    }
    ensure(violations == 0, format!("{} vectors, {violations} violations, max ratio {worst:.6}", 3 * per))
}

fn memory_decomposition(opts: &VerifyOptions) -> Result<String, String> {
    let count = if opts.quick { 500 } else { 5_000 };
    let mut rng = Stream::new(2, streams::VERIFY);
    let mut bad = 0;
    for n in 0..count {
        let d = 1 + rng.index(64);
        let k = 1 + rng.index(d);
        let spec = CompressionSpec::new(k, d).map_err(|e| e.to_string())?;
        let m = ErrorMemory::from_vector(gaussian(&mut rng, d));
        let u = gaussian(&mut rng, d);
        let (g, m2) = compress_with_feedback(&m, &u, &spec).map_err(|e| e.to_string())?;
        let target = m.as_vector().add(&u);
        let exact = g.iter().zip(m2.as_vector().iter()).zip(target.iter()).all(|((a, b), c)| a + b == *c);
        let disjoint = g.iter().zip(m2.as_vector().iter()).all(|(a, b)| *a == 0.0 || *b == 0.0);
        if !exact || !disjoint || g.nnz() > k {
            bad += 1;
            if bad == 1 {
                eprintln!("memory_decomposition: first failure at case {n} (d = {d}, k = {k})");
            }
        }
    }
    ensure(bad == 0, format!("{count} cases, {bad} failures"))
}

fn armijo_bounds(opts: &VerifyOptions) -> Result<String, String> {
    let count = if opts.quick { 1_000 } else { 10_000 };
    let mut rng = Stream::new(3, streams::VERIFY);
    let mut bad = 0;
    for _ in 0..count {
        let d = 1 + rng.index(8);
        let c: Vec<f64> = (0..d).map(|_| 0.01 + 10.0 * rng.uniform()).collect();
        let obj = make_diag_quadratic(&c).map_err(|e| e.to_string())?;
        let sigma = 0.05 + 0.9 * rng.uniform();
        let rho = 0.1 + 0.85 * rng.uniform();
        let cfg = ArmijoConfig { sigma, rho, first_trial: FirstTrial::Premultiplied, ..ArmijoConfig::default() };
        let l = obj.l_max();
        let floor = guaranteed_alpha(sigma, l);
        let alpha_max = floor * (1.0 + 20.0 * rng.uniform());
        let x = gaussian(&mut rng, d);
        let grad = obj.full_grad(&x).map_err(|e| e.to_string())?;
        let fx = obj.full_value(&x).map_err(|e| e.to_string())?;
        let f = |y: &DenseVector| obj.full_value(y).unwrap_or(f64::NAN);
        let r = armijo_search(f, &x, &grad, fx, alpha_max, &cfg).map_err(|e| e.to_string())?;
        let in_range = r.alpha >= rho * floor - 1e-12 && r.alpha <= rho * alpha_max;
        let decrease = f(&x.step(r.alpha, &grad)) <= fx - sigma * r.alpha * grad.norm_sq();
        if !in_range || !decrease {
            bad += 1;
        }
    }
    ensure(bad == 0, format!("{count} searches, {bad} violations"))
}

fn sz_program_oracle(_: &VerifyOptions) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let psi = i as f64 / 10.0;
        let (_, _, closed) = solve_sz_program(psi).map_err(|e| e.to_string())?;
        let (_, _, grid) = sz_grid_search(psi).map_err(|e| e.to_string())?;
        worst = worst.max((grid - closed).abs() / closed);
    }
    ensure(worst <= 1e-4, format!("max relative gap {worst:.3e} over psi = 0, 0.1, ..., 0.9"))
}

fn zeta_consistency(_: &VerifyOptions) -> Result<String, String> {
    let mut rng = Stream::new(5, streams::VERIFY);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let sigma = 0.01 + 0.98 * rng.uniform();
        let gamma = 0.01 + 0.98 * rng.uniform();
        let (p, r) = pr_optimal(gamma).map_err(|e| e.to_string())?;
        let want = sigma * gamma / (2.0 - gamma);
        worst = worst.max((a1_tilde(sigma, gamma, p, r) - want).abs() / want);
    }
    let exact = zeta(0.3, 1.0).map_err(|e| e.to_string())? == 0.3;
    ensure(worst <= 1e-12 && exact, format!("max relative error {worst:.3e}; zeta(gamma = 1) = sigma: {exact}"))
}

fn pr_epsilon_witness(_: &VerifyOptions) -> Result<String, String> {
    let mut rng = Stream::new(6, streams::VERIFY);
    let mut bad = 0;
    for _ in 0..200 {
        let sigma = 0.01 + 0.98 * rng.uniform();
        let gamma = 0.01 + 0.99 * rng.uniform();
        let z = sigma * gamma / (2.0 - gamma);
        let eps = z * (0.01 + 0.98 * rng.uniform());
        match pr_epsilon(gamma, sigma, eps) {
            Ok((p, r)) if pr_slack(gamma, p, r) > 0.0 && a1_tilde(sigma, gamma, p, r) > z - eps => {}
            _ => bad += 1,
        }
    }
    ensure(bad == 0, format!("200 draws, {bad} without a valid (p, r)"))
}

fn identity_objectives() -> Result<Vec<(FiniteSumObjective, CompressionSpec)>, String> {
    let s = |e: crate::objectives::ObjectiveError| e.to_string();
    let c = |k, d| CompressionSpec::new(k, d).map_err(|e| e.to_string());
    Ok(vec![
        (make_interpolated_regression(60, 24, 1.0, 1).map_err(s)?, c(2, 24)?),
        (make_interpolated_regression(200, 32, 10f64.sqrt(), 2).map_err(s)?, c(1, 32)?),
        (make_strongly_convex_mix(10, 16, 0.1, 3).map_err(s)?, c(4, 16)?),
        (make_diag_quadratic(&(1..=10).map(|i| 0.5f64.powi(i)).collect::<Vec<_>>()).map_err(s)?, c(3, 10)?),
        (make_interpolated_regression(20, 64, 1.0, 4).map_err(s)?, c(8, 64)?),
    ])
}

fn perturbed_identity(opts: &VerifyOptions) -> Result<String, String> {
    let cfg = ArmijoConfig { scale_a: scale(opts, 0.3), ..ArmijoConfig::default() };
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    for (obj, comp) in identity_objectives()? {
        for seed in [1, 2] {
            let trace = run_csgd_asss(&obj, &cfg, &comp, 500, seed).map_err(|e| e.to_string())?;
            if let crate::optimizers::RunOutcome::Failed { error, .. } = &trace.outcome {
                return Err(error.to_string());
            }
            worst = worst.max(trace.identity_max_ratio.unwrap_or(f64::INFINITY));
            runs += 1;
        }
    }
    ensure(worst <= 1e-9, format!("{runs} runs of 500 steps, max |(x - x_hat) - m| / (1 + |m|) = {worst:.3e}"))
}

fn distributed_identity(opts: &VerifyOptions) -> Result<String, String> {
    let cfg = ArmijoConfig { scale_a: scale(opts, 0.3), ..ArmijoConfig::default() };
    let obj = make_interpolated_regression(80, 24, 1.0, 9).map_err(|e| e.to_string())?;
    let comp = CompressionSpec::new(3, 24).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for n in [2, 4] {
        let t = run_dcsgd(&obj, n, &cfg, &comp, 200, 5).map_err(|e| e.to_string())?;
        if !t.trace.completed() && classify(&t.trace) != RunStatus::Diverged {
            return Err(format!("N = {n}: {:?}", t.trace.outcome));
        }
        worst = worst.max(t.identity_max_ratio);
    }
    let single = run_csgd_asss(&obj, &cfg, &comp, 200, 5).map_err(|e| e.to_string())?;
    let one = run_dcsgd(&obj, 1, &cfg, &comp, 200, 5).map_err(|e| e.to_string())?.trace;
    let same = single.final_x.as_slice().iter().zip(one.final_x.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits())
        && single.records.len() == one.records.len()
        && single.records.iter().zip(&one.records).all(|(a, b)| a.f_full.to_bits() == b.f_full.to_bits() && a.i_t == b.i_t);
    ensure(worst <= 1e-9 && same, format!("N = 2, 4: max relative residual {worst:.3e}; N = 1 bitwise equal: {same}"))
}

/// The compressed-regression scaling experiment; also used by the preset docs.
pub fn scaling_experiment(a: f64, seeds: &[u64]) -> Result<Vec<RunStatus>, String> {
    let (n, d) = (2000, 256);
    let obj = make_interpolated_regression(n, d, 10f64.sqrt(), 7).map_err(|e| e.to_string())?;
    let comp = CompressionSpec::from_ratio(0.01, d).map_err(|e| e.to_string())?;
    let batch = 8;
    let spec = RunSpec {
        algorithm: Algorithm::CsgdAsss,
        step: StepRule::Armijo(ArmijoConfig { scale_a: a, ..ArmijoConfig::default() }),
        sampling: Sampling::Stochastic { batch },
        comp,
        iterations: 50 * n / batch,
        verify_identity: true,
    };
    seeds.iter().map(|&s| run(&obj, &spec, s, None).map(|t| classify(&t)).map_err(|e| e.to_string())).collect()
}

fn scaling_necessity(opts: &VerifyOptions) -> Result<String, String> {
    let seeds: Vec<u64> = if opts.quick { (1..=4).collect() } else { (1..=20).collect() };
    let need = (seeds.len() * 9).div_ceil(10);
    let unscaled = scaling_experiment(1.0, &seeds)?;
    let scaled = scaling_experiment(scale(opts, 0.3), &seeds)?;
    let diverged = unscaled.iter().filter(|s| **s == RunStatus::Diverged).count();
    let converged = scaled.iter().filter(|s| **s == RunStatus::Converged).count();
    ensure(
        diverged >= need && converged >= need,
        format!("a = 1: {diverged}/{} diverged; scaled: {converged}/{} converged (need {need})", seeds.len(), seeds.len()),
    )
}

fn convex_bound(opts: &VerifyOptions) -> Result<String, String> {
    let (n, d, k) = (100, 20, 5);
    let obj = make_interpolated_regression(n, d, 1.0, 11).map_err(|e| e.to_string())?;
    let comp = CompressionSpec::new(k, d).map_err(|e| e.to_string())?;
    let mut ti = TheoryInputs::new(0.1, comp.gamma(), 0.8).map_err(|e| e.to_string())?;
    ti.l_max = obj.l_max();
    let cc = rate_constants_convex(&ti).map_err(|e| e.to_string())?;
    let cfg = ArmijoConfig { scale_a: scale(opts, ti.a), ..ArmijoConfig::default() };
    let (seeds, horizon) = if opts.quick { (5u64, 500) } else { (20, 2000) };
    let fstar = obj.optimal_value().unwrap_or(0.0);
    let mut gap = vec![0.0; horizon + 1];
    for seed in 0..seeds {
        let mut avg = IterateAverager::new(d);
        let mut obs = |v: &StepView| {
            if v.t > 0 {
                let m = avg.mean().expect("non-empty");
                gap[v.t] += (obj.full_value(&m).unwrap_or(f64::INFINITY) - fstar) / seeds as f64;
            }
            avg.push(v.x);
        };
        let trace = run(&obj, &csgd_asss_spec(&cfg, &comp, horizon), seed, Some(&mut obs)).map_err(|e| e.to_string())?;
        if !trace.completed() {
            return Err(format!("seed {seed}: {:?}", trace.outcome));
        }
    }
    let r0 = obj.initial_point().dist_sq(obj.minimizer().expect("regression has x*"));
    let violations = (1..=horizon).filter(|&t| gap[t] > r0 / (cc.delta1 * t as f64)).count();
    ensure(
        violations == 0 && cc.delta1 > 0.0,
        format!("{seeds} seeds, T = 1..{horizon}: {violations} violations (delta1 = {:.3e})", cc.delta1),
    )
}

fn strongly_convex_bound(opts: &VerifyOptions) -> Result<String, String> {
    let obj = make_strongly_convex_mix(10, 16, 0.1, 7).map_err(|e| e.to_string())?;
    let comp = CompressionSpec::new(4, 16).map_err(|e| e.to_string())?;
    let alpha_max = 0.1;
    let mut ti = TheoryInputs::new(0.1, comp.gamma(), 0.8).map_err(|e| e.to_string())?;
    ti.l_max = obj.l_max();
    ti.alpha_max = alpha_max;
    let mu_max = rate_constants_strongly_convex(&ti).map_err(|e| e.to_string())?.mu_max;
    ti.mu_bar = capped_mu_bar(obj.strong_convexity(), mu_max);
    let sc = rate_constants_strongly_convex(&ti).map_err(|e| e.to_string())?;
    let cfg = ArmijoConfig { scale_a: scale(opts, ti.a), alpha_max_cap: Some(alpha_max), ..ArmijoConfig::default() };
    let seeds = if opts.quick { 5u64 } else { 20 };
    let horizon = 300;
    let mut dist = vec![0.0; horizon + 1];
    for seed in 0..seeds {
        let trace = run(&obj, &csgd_asss_spec(&cfg, &comp, horizon), seed, None).map_err(|e| e.to_string())?;
        if !trace.completed() {
            return Err(format!("seed {seed}: {:?}", trace.outcome));
        }
        for r in &trace.records {
            dist[r.t] += r.dist_sq.unwrap_or(f64::NAN) / seeds as f64;
        }
        dist[horizon] += trace.final_dist_sq.unwrap_or(f64::NAN) / seeds as f64;
    }
    let violations = (0..=horizon).filter(|&t| !(dist[t] <= 2.0 * sc.beta_hat.powi(t as i32) * dist[0])).count();
    let fit = fit_rate(&dist, RateModel::Geometric, (0, horizon)).map_err(|e| e.to_string())?;
    let rate_ok = fit.slope <= sc.beta_hat.ln() + 0.05;
    ensure(
        violations == 0 && rate_ok && sc.beta_hat < 1.0,
        format!(
            "{violations} violations over t <= {horizon}; fitted rate {:.3e} vs ln beta_hat {:.3e}",
            fit.slope,
            sc.beta_hat.ln()
        ),
    )
}

fn nonconvex_constants(opts: &VerifyOptions) -> Result<String, String> {
    let sigmas: &[f64] = if opts.quick { &[0.1] } else { &[0.1, 0.5] };
    let mut points = 0;
    let mut bad = Vec::new();
    for &sigma in sigmas {
        for gamma in [0.05, 0.25, 0.5, 0.75, 1.0] {
            for nu in [1.0, 2.0, 5.0, 10.0, 50.0] {
                for theta in [0.5, 1.0, 2.0, 4.0] {
                    let (ps, _) = pr_optimal(gamma).map_err(|e| e.to_string())?;
                    let r_lim = gamma / 2.0;
                    for (p, r) in [(ps, r_lim), (0.5 * ps, r_lim), (ps, 0.5 * r_lim), (2.0 * ps, 0.25 * r_lim), (0.1, 0.1 * r_lim)] {
                        points += 1;
                        let mut ti = TheoryInputs::new(sigma, gamma, 0.8).map_err(|e| e.to_string())?;
                        ti.nu = nu;
                        ti.theta = theta;
                        ti.p = Some(p);
                        ti.r = Some(r);
                        let nc = rate_constants_nonconvex(&ti).map_err(|e| e.to_string())?;
                        let at = guaranteed_alpha(sigma, ti.l_max);
                        let l = nc.l_mean;
                        for fa in [0.25, 0.5, 0.99] {
                            for fm in [0.25, 0.5, 0.99] {
                                let a = fa * nc.a_hat_nc;
                                let am = fm * nc.alpha_hat;
                                let (emax, emin) = if am <= at { (a * am, a * am) } else { (a * am, a * 0.8 * at) };
                                if nonconvex_delta(emax, emin, p, nu, l, nc.g) <= 0.0 {
                                    bad.push(format!("sigma={sigma} gamma={gamma} nu={nu} theta={theta} p={p:.3} r={r:.3}"));
                                }
                            }
                        }
                        let mut prev = f64::INFINITY;
                        for j in 1..=20 {
                            let a = nc.a_hat_nc * j as f64 / 20.0;
                            let ub = upper_bound_alpha(a, nu, l + nc.g, p, at, 0.8);
                            if ub >= prev {
                                bad.push(format!("UB not decreasing at gamma={gamma} nu={nu} theta={theta}"));
                                break;
                            }
                            prev = ub;
                        }
                    }
                }
            }
        }
    }
    bad.dedup();
    ensure(bad.is_empty(), format!("{points} grid points, {} failures{}", bad.len(), bad.first().map(|b| format!(", first: {b}")).unwrap_or_default()))
}

/// `Σ x_i²/2^i` for `i = 1..10`, from the all-ones point.
pub fn asymmetric_quadratic() -> FiniteSumObjective {
    let c: Vec<f64> = (1..=10).map(|i| 0.5f64.powi(i)).collect();
    make_diag_quadratic(&c).expect("positive curvatures")
}

/// Final-loss ratio scaled/unscaled of Armijo GD on [`asymmetric_quadratic`].
pub fn scaled_gd_loss_ratio(a: f64, iterations: usize) -> Result<f64, String> {
    let obj = asymmetric_quadratic();
    let base = ArmijoConfig { alpha_max_rule: AlphaMaxRule::Fixed, alpha_max_init: 1000.0, ..ArmijoConfig::default() };
    let scaled = run_scaled_gd(&obj, &ArmijoConfig { scale_a: a, ..base }, iterations).map_err(|e| e.to_string())?;
    let plain = run_scaled_gd(&obj, &ArmijoConfig { scale_a: 1.0, ..base }, iterations).map_err(|e| e.to_string())?;
    Ok(scaled.final_loss / plain.final_loss)
}

fn scaled_gd_ratio(opts: &VerifyOptions) -> Result<String, String> {
    let ratio = scaled_gd_loss_ratio(scale(opts, 0.15), 500)?;
    ensure(ratio <= 1e-3, format!("scaled/unscaled loss after 500 iterations = {ratio:.3e}"))
}

fn scaled_gd_bound(_: &VerifyOptions) -> Result<String, String> {
    // f(x) = x²/2, σ = 0.5, a = 0.5: f(x̄_T) − f* ≤ ‖x₀ − x*‖²/(α̃ρ(2a − a²/σ)T).
    let obj = make_diag_quadratic(&[0.5]).map_err(|e| e.to_string())?;
    let cfg = ArmijoConfig { sigma: 0.5, scale_a: 0.5, ..ArmijoConfig::default() };
    let horizon = 200;
    let spec = RunSpec {
        algorithm: Algorithm::ScaledGd,
        step: StepRule::Armijo(cfg),
        sampling: Sampling::FullBatch,
        comp: CompressionSpec::identity(1),
        iterations: horizon,
        verify_identity: false,
    };
    let constant = 1.0 / (guaranteed_alpha(cfg.sigma, obj.l_max()) * cfg.rho * (2.0 * cfg.scale_a - cfg.scale_a * cfg.scale_a / cfg.sigma));
    let r0 = obj.initial_point().norm_sq();
    let mut avg = IterateAverager::new(1);
    let mut violations = 0;
    let mut obs = |v: &StepView| {
        if v.t > 0 {
            let m = avg.mean().expect("non-empty");
            if obj.full_value(&m).unwrap_or(f64::INFINITY) > constant * r0 / v.t as f64 {
                violations += 1;
            }
        }
        avg.push(v.x);
    };
    run(&obj, &spec, 0, Some(&mut obs)).map_err(|e| e.to_string())?;
    ensure(violations == 0, format!("T = 1..{horizon}: {violations} violations"))
}

fn codec_roundtrip(opts: &VerifyOptions) -> Result<String, String> {
    let count = if opts.quick { 1_000 } else { 10_000 };
    let mut rng = Stream::new(15, streams::VERIFY);
    let mut bad = 0;
    for _ in 0..count {
        let dim = 1 + rng.index(4096);
        let k = rng.index(dim.min(64) + 1);
        let mut idx: Vec<usize> = (0..k).map(|_| rng.index(dim)).collect();
        idx.sort_unstable();
        idx.dedup();
        let entries: Vec<(u32, f64)> =
            idx.iter().map(|&i| (i as u32, f64::from_bits(rng.next_u64()))).collect();
        let msg = SparseMessage { sender: rng.next_u64() as u32, iteration: rng.next_u64(), entries };
        let bytes = msg.encode();
        let ok = bytes.len() == msg.encoded_len()
            && SparseMessage::decode(&bytes).is_ok_and(|back| {
                back.sender == msg.sender
                    && back.iteration == msg.iteration
                    && back.entries.len() == msg.entries.len()
                    && back.entries.iter().zip(&msg.entries).all(|(a, b)| a.0 == b.0 && a.1.to_bits() == b.1.to_bits())
            });
        if !ok {
            bad += 1;
        }
    }
    ensure(bad == 0, format!("{count} messages, {bad} mismatches"))
}

fn trace_determinism(opts: &VerifyOptions) -> Result<String, String> {
    let obj = make_interpolated_regression(50, 16, 1.0, 21).map_err(|e| e.to_string())?;
    let comp = CompressionSpec::new(2, 16).map_err(|e| e.to_string())?;
    let cfg = ArmijoConfig { scale_a: scale(opts, 0.3), ..ArmijoConfig::default() };
    let csv = || -> Result<Vec<u8>, String> {
        let trace = run_csgd_asss(&obj, &cfg, &comp, 300, 4).map_err(|e| e.to_string())?;
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).map_err(|e| e.to_string())?;
        Ok(buf)
    };
    let dcsv = || -> Result<Vec<u8>, String> {
        let trace = run_dcsgd(&obj, 2, &cfg, &comp, 100, 4).map_err(|e| e.to_string())?.trace;
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).map_err(|e| e.to_string())?;
        Ok(buf)
    };
    let same = csv()? == csv()? && dcsv()? == dcsv()?;
    ensure(same, format!("repeated single-node and distributed traces byte-identical: {same}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        let mut names = check_names();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), CHECKS.len());
    }

    #[test]
    fn fast_items_pass() {
        let opts = VerifyOptions { quick: true, disable_scaling: false };
        for (name, check) in CHECKS {
            if matches!(name, "sz_program_oracle" | "scaling_necessity" | "convex_bound" | "nonconvex_constants") {
                continue;
            }
            assert!(check(&opts).is_ok(), "{name}: {:?}", check(&opts));
        }
    }
}
