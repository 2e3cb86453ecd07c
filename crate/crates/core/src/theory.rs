//! Closed-form convergence constants.
//!
//! Notation: `ζ = σγ/(2−γ)`, `α̃_min = 2(1−σ)/L_max`,
//! `ã₁(p,r) = 2σ / (1 + 1/p + (1−γ)(1+1/r))` and
//! `ã₂(a,p,r) = 2a − a²/σ − a²/(σp) − (1−γ)(1+1/r)a²/σ`.
//!
//! Convex rate: `f(x̄_T) − f* ≤ ‖x₀−x*‖² / (δ₁T)` with
//! `δ₁ = ρ·α̃_min·ã₂(a, p(ε), r(ε))`, valid for `a ≤ â = ζ−ε`.
//!
//! Strongly convex rate: `E‖x_t−x*‖² ≤ 2β̂^t‖x₀−x*‖²`,
//! `β̂ = max(β₁, β₂)`, `β₁ = μ_max·a·α_max + p + (1−γ)(1+r)` and
//! `β₂ = 1 − μ̄·a·(1−σ)·ρ/L_max` (the form without `ρ` is also reported).
//!
//! Non-convex rate under strong growth `ν`: with `G = θ(1−γ)(1+1/r)` and
//! `L` the mean smoothness,
//! `δ = η_max + η_min·p/(1+p) − ν(η_max−η_min) − νLη_max² − νGη_max²`.
//! The published step bounds write the curvature term as `L + θG`, while
//! `δ` itself contains `L + G`. The operative values here use `L + G`, which
//! is what makes `δ > 0` follow from `a ≤ â_nc`, `α_max ≤ α̂`; the literal
//! display values are reported alongside.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("{name} = {value} is outside its domain {domain}")]
    Domain { name: &'static str, value: f64, domain: &'static str },
    #[error("the (s, z) program is infeasible for psi = {0} (need 0 <= psi < 1)")]
    Infeasible(f64),
    #[error("could not construct (p, r) for epsilon = {0}")]
    ConstructionFailed(f64),
}

fn check(name: &'static str, value: f64, ok: bool, domain: &'static str) -> Result<(), TheoryError> {
    if ok && !value.is_nan() {
        Ok(())
    } else {
        Err(TheoryError::Domain { name, value, domain })
    }
}

pub fn zeta(sigma: f64, gamma: f64) -> Result<f64, TheoryError> {
    check("sigma", sigma, sigma > 0.0 && sigma < 1.0, "(0, 1)")?;
    check("gamma", gamma, gamma > 0.0 && gamma <= 1.0, "(0, 1]")?;
    Ok(sigma * gamma / (2.0 - gamma))
}

/// Minimizer of `1/s + ψ/z` subject to `s + ψ(1+z) ≤ 1`:
/// `s* = z* = (1−ψ)/(1+ψ)`, minimum `(1+ψ)²/(1−ψ)`.
pub fn solve_sz_program(psi: f64) -> Result<(f64, f64, f64), TheoryError> {
    if !(psi >= 0.0 && psi < 1.0) {
        return Err(TheoryError::Infeasible(psi));
    }
    let s = (1.0 - psi) / (1.0 + psi);
    Ok((s, s, (1.0 + psi) * (1.0 + psi) / (1.0 - psi)))
}

/// Brute-force minimization of the `(s, z)` program over `[1e-3, 1]²`: a
/// `1e-3` grid followed by local grids down to `1e-6`, each repeated until it
/// stops improving.
pub fn sz_grid_search(psi: f64) -> Result<(f64, f64, f64), TheoryError> {
    if !(psi >= 0.0 && psi < 1.0) {
        return Err(TheoryError::Infeasible(psi));
    }
    let objective = |s: f64, z: f64| 1.0 / s + psi / z;
    let feasible = |s: f64, z: f64| s + psi * (1.0 + z) <= 1.0;
    let mut best = (f64::NAN, f64::NAN, f64::INFINITY);
    let scan = |s_lo: f64, z_lo: f64, step: f64, count: usize, best: &mut (f64, f64, f64)| {
        for i in 0..=count {
            let s = s_lo + i as f64 * step;
            if !(1e-3..=1.0).contains(&s) {
                continue;
            }
            for j in 0..=count {
                let z = z_lo + j as f64 * step;
                if !(1e-3..=1.0).contains(&z) || !feasible(s, z) {
                    continue;
                }
                let g = objective(s, z);
                if g < best.2 {
                    *best = (s, z, g);
                }
            }
        }
    };
    scan(1e-3, 1e-3, 1e-3, 999, &mut best);
    if !best.2.is_finite() {
        return Err(TheoryError::Infeasible(psi));
    }
    // The optimum sits on the constraint, so the best grid point can be far
    // from it along the boundary: re-centre and rescan until nothing improves.
    let mut step = 1e-3;
    while step > 1.5e-6 {
        let fine = step / 10.0;
        for _ in 0..100_000 {
            let before = best.2;
            scan(best.0 - step, best.1 - step, fine, 20, &mut best);
            if best.2 >= before {
                break;
            }
        }
        step = fine;
    }
    Ok(best)
}

/// `(p*, r*) = (γ/(2−γ), γ/(2−γ))`, the minimizer of the denominator of `ã₁`
/// subject to `p + (1−γ)(1+r) ≤ 1`.
pub fn pr_optimal(gamma: f64) -> Result<(f64, f64), TheoryError> {
    check("gamma", gamma, gamma > 0.0 && gamma <= 1.0, "(0, 1]")?;
    let (s, z, _) = solve_sz_program(1.0 - gamma)?;
    Ok((s, z))
}

pub fn a1_tilde(sigma: f64, gamma: f64, p: f64, r: f64) -> f64 {
    2.0 * sigma / (1.0 + 1.0 / p + compression_term(gamma, r))
}

pub fn a2_tilde(sigma: f64, gamma: f64, a: f64, p: f64, r: f64) -> f64 {
    2.0 * a - a * a / sigma - a * a / (sigma * p) - compression_term(gamma, r) * a * a / sigma
}

/// `(1−γ)(1+1/r)`, zero for `γ = 1` regardless of `r`.
fn compression_term(gamma: f64, r: f64) -> f64 {
    if gamma == 1.0 {
        0.0
    } else {
        (1.0 - gamma) * (1.0 + 1.0 / r)
    }
}

/// `1 − p − (1−γ)(1+r)`.
pub fn pr_slack(gamma: f64, p: f64, r: f64) -> f64 {
    1.0 - p - (1.0 - gamma) * (1.0 + r)
}

const PR_MARGIN: f64 = 1e-12;

/// A pair with `p + (1−γ)(1+r) < 1` and `ã₁(p,r) > ζ−ε`, both by at least
/// `1e-12`: `(λp*, λr*)` for the largest such `λ ∈ (0, 1)`, found by bisection.
pub fn pr_epsilon(gamma: f64, sigma: f64, epsilon: f64) -> Result<(f64, f64), TheoryError> {
    let z = zeta(sigma, gamma)?;
    check("epsilon", epsilon, epsilon > 0.0 && epsilon < z, "(0, zeta)")?;
    let (ps, rs) = pr_optimal(gamma)?;
    let slack_ok = |l: f64| pr_slack(gamma, l * ps, l * rs) >= PR_MARGIN;
    let gap_ok = |l: f64| a1_tilde(sigma, gamma, l * ps, l * rs) - (z - epsilon) >= PR_MARGIN;
    // The slack shrinks as λ grows and vanishes at λ = 1; ã₁ grows with λ.
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slack_ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (p, r) = (lo * ps, lo * rs);
    if lo > 0.0 && slack_ok(lo) && gap_ok(lo) {
        Ok((p, r))
    } else {
        Err(TheoryError::ConstructionFailed(epsilon))
    }
}

/// Which `β₂` enters `β̂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Beta2Form {
    /// `1 − μ̄·a·(1−σ)·ρ/L_max`.
    #[default]
    Appendix,
    /// `1 − μ̄·a·(1−σ)/L_max`.
    MainText,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryInputs {
    pub sigma: f64,
    pub gamma: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub a: f64,
    pub alpha_max: f64,
    pub l_max: f64,
    pub mu_bar: f64,
    /// Strong-convexity cap; defaults to `(δ_slack − τ)/(α_max·ζ)` with `τ = δ_slack/2`.
    pub mu_max: Option<f64>,
    pub nu: f64,
    pub theta: f64,
    /// Overrides for `(p(ε), r(ε))`; each defaults to the [`pr_epsilon`] witness.
    pub p: Option<f64>,
    pub r: Option<f64>,
    /// Mean smoothness for the non-convex constants; defaults to `l_max`.
    pub l_mean: Option<f64>,
    /// `ε` of the non-convex constants (`ε < γ`); defaults to `γ/2`.
    pub eps_nc: Option<f64>,
    pub beta2_form: Beta2Form,
}

impl TheoryInputs {
    /// `ε = ζ/10`, `a = 0.9(ζ−ε)`, `α_max = 0.1`, `L_max = 1`, `μ̄ = 0`, `ν = θ = 1`.
    pub fn new(sigma: f64, gamma: f64, rho: f64) -> Result<Self, TheoryError> {
        let z = zeta(sigma, gamma)?;
        let inputs = Self {
            sigma,
            gamma,
            rho,
            epsilon: 0.1 * z,
            a: 0.9 * 0.9 * z,
            alpha_max: 0.1,
            l_max: 1.0,
            mu_bar: 0.0,
            mu_max: None,
            nu: 1.0,
            theta: 1.0,
            p: None,
            r: None,
            l_mean: None,
            eps_nc: None,
            beta2_form: Beta2Form::Appendix,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn validate(&self) -> Result<(), TheoryError> {
        let z = zeta(self.sigma, self.gamma)?;
        check("rho", self.rho, self.rho > 0.0 && self.rho < 1.0, "(0, 1)")?;
        check("epsilon", self.epsilon, self.epsilon > 0.0 && self.epsilon < z, "(0, zeta)")?;
        check("a", self.a, self.a > 0.0 && self.a.is_finite(), "(0, inf)")?;
        check("alpha_max", self.alpha_max, self.alpha_max > 0.0 && self.alpha_max.is_finite(), "(0, inf)")?;
        check("l_max", self.l_max, self.l_max > 0.0 && self.l_max.is_finite(), "(0, inf)")?;
        check("mu_bar", self.mu_bar, self.mu_bar >= 0.0 && self.mu_bar.is_finite(), "[0, inf)")?;
        check("nu", self.nu, self.nu >= 1.0 && self.nu.is_finite(), "[1, inf)")?;
        check("theta", self.theta, self.theta > 0.0 && self.theta.is_finite(), "(0, inf)")?;
        if let Some(m) = self.mu_max {
            check("mu_max", m, m > 0.0 && m.is_finite(), "(0, inf)")?;
        }
        if let Some(p) = self.p {
            check("p", p, p > 0.0 && p.is_finite(), "(0, inf)")?;
        }
        if let Some(r) = self.r {
            check("r", r, r > 0.0 && r.is_finite(), "(0, inf)")?;
        }
        if let Some(l) = self.l_mean {
            check("l_mean", l, l > 0.0 && l <= self.l_max, "(0, l_max]")?;
        }
        if let Some(e) = self.eps_nc {
            check("eps_nc", e, e > 0.0 && e < self.gamma, "(0, gamma)")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TheoryFlag {
    /// `a` exceeds `â = ζ−ε`.
    ScaleAboveAHat,
    /// `δ₁ ≤ 0`.
    VacuousConvexBound,
    /// `μ̄ = 0`: no component is strongly convex.
    NoStrongConvexity,
    /// `β̂ ≥ 1`.
    BetaHatNotBelowOne,
    /// The two published `β₂` forms differ (they agree only for `ρ = 1`).
    Beta2FormsDiffer,
    /// `δ ≤ 0` for the non-convex rate at the given `a`, `α_max`.
    NonconvexDeltaNonPositive,
    /// `UB(â_nc) < α̃_min`, so no `α_max` above `α̃_min` is covered.
    NonconvexIntervalMissing,
    /// `r > γ − ε_nc`.
    ConstraintViolated(String),
    /// `a ≥ 2σ`: the scaled-GD rate constant is infinite.
    ScaledGdVacuous,
}

impl fmt::Display for TheoryFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TheoryFlag::ScaleAboveAHat => write!(f, "scale_above_a_hat"),
            TheoryFlag::VacuousConvexBound => write!(f, "vacuous_convex_bound"),
            TheoryFlag::NoStrongConvexity => write!(f, "no_strong_convexity"),
            TheoryFlag::BetaHatNotBelowOne => write!(f, "beta_hat_not_below_one"),
            TheoryFlag::Beta2FormsDiffer => write!(f, "beta2_forms_differ"),
            TheoryFlag::NonconvexDeltaNonPositive => write!(f, "nonconvex_delta_nonpositive"),
            TheoryFlag::NonconvexIntervalMissing => write!(f, "nonconvex_interval_missing"),
            TheoryFlag::ConstraintViolated(what) => write!(f, "constraint_violated({what})"),
            TheoryFlag::ScaledGdVacuous => write!(f, "scaled_gd_vacuous"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexConstants {
    pub zeta: f64,
    pub p: f64,
    pub r: f64,
    pub a_hat: f64,
    pub a1_tilde: f64,
    pub a2_tilde: f64,
    pub alpha_tilde_min: f64,
    pub delta1: f64,
    pub flags: Vec<TheoryFlag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StronglyConvexConstants {
    pub delta_slack: f64,
    pub tau: f64,
    pub mu_max: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta2_main: f64,
    pub beta_hat: f64,
    pub flags: Vec<TheoryFlag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonconvexConstants {
    pub l_mean: f64,
    pub p: f64,
    pub r: f64,
    pub eps_nc: f64,
    pub g: f64,
    /// 1 when `α_max ≤ α̃_min`, else 2.
    pub case: u8,
    pub eta_min: f64,
    pub eta_max: f64,
    pub delta: f64,
    pub a_hat_nc: f64,
    pub alpha_hat: f64,
    /// `â_nc` and `α̂` with the curvature written as `L + θG`.
    pub a_hat_nc_display: f64,
    pub alpha_hat_display: f64,
    pub flags: Vec<TheoryFlag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryReport {
    pub inputs: TheoryInputs,
    pub zeta: f64,
    pub p_star: f64,
    pub r_star: f64,
    pub convex: ConvexConstants,
    pub strongly_convex: StronglyConvexConstants,
    pub nonconvex: NonconvexConstants,
    pub scaled_gd: ScaledGdRate,
    pub flags: Vec<TheoryFlag>,
}

fn pr_for(inputs: &TheoryInputs) -> Result<(f64, f64), TheoryError> {
    match (inputs.p, inputs.r) {
        (Some(p), Some(r)) => Ok((p, r)),
        (p, r) => {
            let (pe, re) = pr_epsilon(inputs.gamma, inputs.sigma, inputs.epsilon)?;
            Ok((p.unwrap_or(pe), r.unwrap_or(re)))
        }
    }
}

pub fn rate_constants_convex(inputs: &TheoryInputs) -> Result<ConvexConstants, TheoryError> {
    inputs.validate()?;
    let z = zeta(inputs.sigma, inputs.gamma)?;
    let (p, r) = pr_for(inputs)?;
    let alpha_tilde_min = 2.0 * (1.0 - inputs.sigma) / inputs.l_max;
    let a2 = a2_tilde(inputs.sigma, inputs.gamma, inputs.a, p, r);
    let delta1 = inputs.rho * alpha_tilde_min * a2;
    let a_hat = z - inputs.epsilon;
    let mut flags = Vec::new();
    if inputs.a > a_hat {
        flags.push(TheoryFlag::ScaleAboveAHat);
    }
    if delta1 <= 0.0 {
        flags.push(TheoryFlag::VacuousConvexBound);
    }
    Ok(ConvexConstants {
        zeta: z,
        p,
        r,
        a_hat,
        a1_tilde: a1_tilde(inputs.sigma, inputs.gamma, p, r),
        a2_tilde: a2,
        alpha_tilde_min,
        delta1,
        flags,
    })
}

pub fn rate_constants_strongly_convex(inputs: &TheoryInputs) -> Result<StronglyConvexConstants, TheoryError> {
    inputs.validate()?;
    let z = zeta(inputs.sigma, inputs.gamma)?;
    let (p, r) = pr_for(inputs)?;
    let delta_slack = pr_slack(inputs.gamma, p, r);
    let tau = 0.5 * delta_slack;
    let mu_max = inputs.mu_max.unwrap_or((delta_slack - tau) / (inputs.alpha_max * z));
    let beta1 = mu_max * inputs.a * inputs.alpha_max + p + (1.0 - inputs.gamma) * (1.0 + r);
    let main_decrease = inputs.mu_bar * inputs.a * (1.0 - inputs.sigma) / inputs.l_max;
    let beta2_main = 1.0 - main_decrease;
    let beta2 = 1.0 - main_decrease * inputs.rho;
    let beta_hat = match inputs.beta2_form {
        Beta2Form::Appendix => beta1.max(beta2),
        Beta2Form::MainText => beta1.max(beta2_main),
    };
    let mut flags = Vec::new();
    if inputs.mu_bar == 0.0 {
        flags.push(TheoryFlag::NoStrongConvexity);
    }
    if beta_hat >= 1.0 {
        flags.push(TheoryFlag::BetaHatNotBelowOne);
    }
    if beta2 != beta2_main {
        flags.push(TheoryFlag::Beta2FormsDiffer);
    }
    if inputs.a > z - inputs.epsilon {
        flags.push(TheoryFlag::ScaleAboveAHat);
    }
    Ok(StronglyConvexConstants { delta_slack, tau, mu_max, beta1, beta2, beta2_main, beta_hat, flags })
}

/// `UB(a) = [−(ν−1) + √((ν−1)² + 4ν·c_L·a·(ν + p/(1+p))·α̃_min·ρ)] / (2aν·c_L)`,
/// evaluated as `2K / ((ν−1) + √((ν−1)² + 4AK))` to avoid cancellation.
pub fn upper_bound_alpha(a: f64, nu: f64, curvature: f64, p: f64, alpha_tilde_min: f64, rho: f64) -> f64 {
    let big_a = nu * a * curvature;
    let b = nu - 1.0;
    let k = rho * alpha_tilde_min * (nu + p / (1.0 + p));
    2.0 * k / (b + (b * b + 4.0 * big_a * k).sqrt())
}

/// `δ` of the non-convex rate for explicit `η_max`, `η_min`.
pub fn nonconvex_delta(eta_max: f64, eta_min: f64, p: f64, nu: f64, l_mean: f64, g: f64) -> f64 {
    (eta_max + eta_min * p / (1.0 + p)) - (nu * (eta_max - eta_min) + nu * l_mean * eta_max * eta_max + nu * eta_max * eta_max * g)
}

pub fn rate_constants_nonconvex(inputs: &TheoryInputs) -> Result<NonconvexConstants, TheoryError> {
    inputs.validate()?;
    let gamma = inputs.gamma;
    let eps_nc = inputs.eps_nc.unwrap_or(0.5 * gamma);
    check("eps_nc", eps_nc, eps_nc > 0.0 && eps_nc < gamma, "(0, gamma)")?;
    let l = inputs.l_mean.unwrap_or(inputs.l_max);
    let p = match inputs.p {
        Some(p) => p,
        None => pr_optimal(gamma)?.0,
    };
    let r_limit = gamma - eps_nc;
    let r = inputs.r.unwrap_or(r_limit);
    let mut flags = Vec::new();
    if r > r_limit {
        flags.push(TheoryFlag::ConstraintViolated(format!("r = {r} > gamma - eps_nc = {r_limit}")));
    }
    let g = inputs.theta * compression_term(gamma, r);
    let alpha_tilde_min = 2.0 * (1.0 - inputs.sigma) / inputs.l_max;
    let (case, eta_max, eta_min) = if inputs.alpha_max <= alpha_tilde_min {
        (1, inputs.a * inputs.alpha_max, inputs.a * inputs.alpha_max)
    } else {
        (2, inputs.a * inputs.alpha_max, inputs.a * inputs.rho * alpha_tilde_min)
    };
    let delta = nonconvex_delta(eta_max, eta_min, p, inputs.nu, l, g);
    let a_hat_with = |curvature: f64| {
        let first = (p / (p + 1.0) + 1.0) / (alpha_tilde_min * inputs.nu * curvature);
        let second = inputs.theta * eps_nc / (inputs.alpha_max * l * l + alpha_tilde_min * p * l * l);
        first.min(second)
    };
    let a_hat_nc = a_hat_with(l + g);
    let alpha_hat = upper_bound_alpha(a_hat_nc, inputs.nu, l + g, p, alpha_tilde_min, inputs.rho);
    let a_hat_nc_display = a_hat_with(l + inputs.theta * g);
    let alpha_hat_display =
        upper_bound_alpha(a_hat_nc_display, inputs.nu, l + inputs.theta * g, p, alpha_tilde_min, inputs.rho);
    if delta <= 0.0 {
        flags.push(TheoryFlag::NonconvexDeltaNonPositive);
    }
    if alpha_hat < alpha_tilde_min {
        flags.push(TheoryFlag::NonconvexIntervalMissing);
    }
    Ok(NonconvexConstants {
        l_mean: l,
        p,
        r,
        eps_nc,
        g,
        case,
        eta_min,
        eta_max,
        delta,
        a_hat_nc,
        alpha_hat,
        a_hat_nc_display,
        alpha_hat_display,
        flags,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledGdRate {
    /// `1/(α̃_min·ρ·(2a − a²/σ))`; infinite when vacuous.
    pub constant: f64,
    pub vacuous: bool,
}

/// Rate constant `C` of `f(x̄_T) − f* ≤ C‖x₀−x*‖²/T` for scaled deterministic GD.
pub fn scaled_gd_rate(sigma: f64, rho: f64, a: f64, l: f64) -> Result<ScaledGdRate, TheoryError> {
    check("sigma", sigma, sigma > 0.0 && sigma < 1.0, "(0, 1)")?;
    check("rho", rho, rho > 0.0 && rho <= 1.0, "(0, 1]")?;
    check("a", a, a > 0.0 && a.is_finite(), "(0, inf)")?;
    check("L", l, l > 0.0 && l.is_finite(), "(0, inf)")?;
    let bracket = 2.0 * a - a * a / sigma;
    if a >= 2.0 * sigma || bracket <= 0.0 {
        return Ok(ScaledGdRate { constant: f64::INFINITY, vacuous: true });
    }
    let alpha_tilde_min = 2.0 * (1.0 - sigma) / l;
    Ok(ScaledGdRate { constant: 1.0 / (alpha_tilde_min * rho * bracket), vacuous: false })
}

/// `(1/n)Σ min(μ_i, μ_max)`: the mean strong convexity after capping.
pub fn capped_mu_bar(mus: &[f64], mu_max: f64) -> f64 {
    mus.iter().map(|m| m.min(mu_max)).sum::<f64>() / mus.len() as f64
}

pub fn report(inputs: &TheoryInputs) -> Result<TheoryReport, TheoryError> {
    inputs.validate()?;
    let z = zeta(inputs.sigma, inputs.gamma)?;
    let (p_star, r_star) = pr_optimal(inputs.gamma)?;
    let convex = rate_constants_convex(inputs)?;
    let strongly_convex = rate_constants_strongly_convex(inputs)?;
    let nonconvex = rate_constants_nonconvex(inputs)?;
    let scaled_gd = scaled_gd_rate(inputs.sigma, inputs.rho, inputs.a, inputs.l_max)?;
    let mut flags: Vec<TheoryFlag> = Vec::new();
    for f in convex.flags.iter().chain(&strongly_convex.flags).chain(&nonconvex.flags) {
        if !flags.contains(f) {
            flags.push(f.clone());
        }
    }
    if scaled_gd.vacuous {
        flags.push(TheoryFlag::ScaledGdVacuous);
    }
    Ok(TheoryReport { inputs: inputs.clone(), zeta: z, p_star, r_star, convex, strongly_convex, nonconvex, scaled_gd, flags })
}

impl TheoryReport {
    /// `(key, value)` rows in a fixed order.
    pub fn rows(&self) -> Vec<(&'static str, f64)> {
        let c = &self.convex;
        let s = &self.strongly_convex;
        let n = &self.nonconvex;
        vec![
            ("zeta", self.zeta),
            ("p_star", self.p_star),
            ("r_star", self.r_star),
            ("p_eps", c.p),
            ("r_eps", c.r),
            ("a_hat", c.a_hat),
            ("a1_tilde", c.a1_tilde),
            ("a2_tilde", c.a2_tilde),
            ("alpha_tilde_min", c.alpha_tilde_min),
            ("delta1", c.delta1),
            ("delta_slack", s.delta_slack),
            ("mu_max", s.mu_max),
            ("beta1", s.beta1),
            ("beta2", s.beta2),
            ("beta2_main", s.beta2_main),
            ("beta_hat", s.beta_hat),
            ("eta_min", n.eta_min),
            ("eta_max", n.eta_max),
            ("nc_case", f64::from(n.case)),
            ("G", n.g),
            ("delta", n.delta),
            ("a_hat_nc", n.a_hat_nc),
            ("alpha_hat", n.alpha_hat),
            ("a_hat_nc_display", n.a_hat_nc_display),
            ("alpha_hat_display", n.alpha_hat_display),
            ("scaled_gd_constant", self.scaled_gd.constant),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs())
    }

    #[test]
    fn zeta_examples() {
        assert_eq!(zeta(0.3, 1.0).unwrap(), 0.3);
        // 0.1·0.01/1.99 by hand: 0.001/1.99 = 5.025125628…e-4
        assert!(close(zeta(0.1, 0.01).unwrap(), 5.025125628140704e-4, 1e-12));
        assert!(zeta(1.0, 0.5).is_err());
        assert!(zeta(0.5, 0.0).is_err());
    }

    #[test]
    fn sz_program_examples() {
        let (s, z, g) = solve_sz_program(0.5).unwrap();
        assert!(close(s, 1.0 / 3.0, 1e-15) && close(z, 1.0 / 3.0, 1e-15) && close(g, 4.5, 1e-15));
        assert_eq!(solve_sz_program(0.0).unwrap(), (1.0, 1.0, 1.0));
        let (s, _, g) = solve_sz_program(0.9).unwrap();
        assert!(close(s, 1.0 / 19.0, 1e-14) && close(g, 36.1, 1e-12));
        assert_eq!(solve_sz_program(1.0), Err(TheoryError::Infeasible(1.0)));
    }

    #[test]
    fn grid_search_agrees_with_closed_form() {
        for i in 0..10 {
            let psi = i as f64 / 10.0;
            let (_, _, g) = solve_sz_program(psi).unwrap();
            let (_, _, gg) = sz_grid_search(psi).unwrap();
            assert!((gg - g).abs() <= 1e-4 * g, "psi {psi}: {gg} vs {g}");
        }
    }

    #[test]
    fn pr_optimal_examples() {
        let (p, r) = pr_optimal(0.5).unwrap();
        assert!(close(p, 1.0 / 3.0, 1e-15) && close(r, 1.0 / 3.0, 1e-15));
        // Denominator 1 + 3 + 0.5·4 = 6, so ã₁ = 0.2/6 = 1/30.
        assert!(close(a1_tilde(0.1, 0.5, p, r), 1.0 / 30.0, 1e-14));
        assert!(close(zeta(0.1, 0.5).unwrap(), 1.0 / 30.0, 1e-15));
        assert_eq!(pr_optimal(1.0).unwrap(), (1.0, 1.0));
        assert_eq!(a1_tilde(0.1, 1.0, 1.0, 1.0), 0.1);
        let (p, _) = pr_optimal(0.01).unwrap();
        assert!(close(p, 0.01 / 1.99, 1e-14));
        assert!(close(a1_tilde(0.1, 0.01, p, p), zeta(0.1, 0.01).unwrap(), 1e-12));
    }

    #[test]
    fn pr_epsilon_examples() {
        let (p, r) = pr_epsilon(0.5, 0.1, 0.01).unwrap();
        assert!(a1_tilde(0.1, 0.5, p, r) > 1.0 / 30.0 - 0.01);
        assert!(p + 0.5 * (1.0 + r) < 1.0);
        let z = zeta(0.1, 1.0).unwrap();
        for eps in [1e-6, 0.01, 0.05, 0.099] {
            let (p, r) = pr_epsilon(1.0, 0.1, eps).unwrap();
            assert!(p < 1.0);
            assert!(2.0 * 0.1 / (1.0 + 1.0 / p) > z - eps);
            assert!(r > 0.0);
        }
        assert!(pr_epsilon(0.5, 0.1, 1.0).is_err());
    }

    #[test]
    fn convex_examples() {
        // γ = 1, p = r = 1: bracket 2a − 2a²/σ; σ = 0.5, a = 0.25 gives 0.25.
        let mut inputs = TheoryInputs::new(0.5, 1.0, 0.8).unwrap();
        inputs.a = 0.25;
        inputs.p = Some(1.0);
        inputs.r = Some(1.0);
        inputs.l_max = 2.0;
        let c = rate_constants_convex(&inputs).unwrap();
        assert!(close(c.a2_tilde, 0.25, 1e-15));
        assert!(close(c.delta1, 0.8 * (2.0 * 0.5 / 2.0) * 0.25, 1e-15));

        // a = ã₁(p,r) makes the bracket vanish.
        let mut inputs = TheoryInputs::new(0.1, 0.5, 0.8).unwrap();
        let (p, r) = pr_epsilon(0.5, 0.1, inputs.epsilon).unwrap();
        inputs.a = a1_tilde(0.1, 0.5, p, r);
        let c = rate_constants_convex(&inputs).unwrap();
        assert!(c.a2_tilde.abs() <= 1e-15);
        assert!(c.delta1 <= 1e-15);
    }

    #[test]
    fn strongly_convex_examples() {
        let inputs = TheoryInputs::new(0.1, 0.5, 0.8).unwrap();
        let s = rate_constants_strongly_convex(&inputs).unwrap();
        assert!(s.flags.contains(&TheoryFlag::NoStrongConvexity));
        assert_eq!(s.beta2, 1.0);
        let mut inputs = TheoryInputs::new(0.1, 1.0, 0.8).unwrap();
        inputs.mu_bar = 0.5;
        let s = rate_constants_strongly_convex(&inputs).unwrap();
        assert!(s.beta1 < 1.0 && s.beta_hat < 1.0);
        assert!(s.flags.contains(&TheoryFlag::Beta2FormsDiffer));
        assert!(s.beta2 > s.beta2_main);
    }

    #[test]
    fn nonconvex_case1_simplification() {
        // Case 1: δ = η(1 + p/(1+p)) − νη²(L + G).
        let mut inputs = TheoryInputs::new(0.1, 0.5, 0.8).unwrap();
        inputs.alpha_max = 0.5;
        inputs.l_max = 2.0;
        inputs.nu = 3.0;
        inputs.theta = 0.7;
        inputs.a = 0.2;
        let n = rate_constants_nonconvex(&inputs).unwrap();
        assert_eq!(n.case, 1);
        let eta = 0.2 * 0.5;
        let expect = eta * (1.0 + n.p / (1.0 + n.p)) - 3.0 * eta * eta * (n.l_mean + n.g);
        assert!(close(n.delta, expect, 1e-13));
        let bound = (1.0 + n.p / (1.0 + n.p)) / (inputs.alpha_max * 3.0 * (n.l_mean + n.g));
        assert_eq!(n.delta > 0.0, inputs.a < bound);
    }

    #[test]
    fn nonconvex_gamma_one_drops_compression_term() {
        let mut inputs = TheoryInputs::new(0.1, 1.0, 0.8).unwrap();
        inputs.r = Some(0.3);
        inputs.eps_nc = Some(0.5);
        let n = rate_constants_nonconvex(&inputs).unwrap();
        assert_eq!(n.g, 0.0);
        assert_eq!(n.a_hat_nc, n.a_hat_nc_display);
    }

    #[test]
    fn upper_bound_matches_textbook_root() {
        let (nu, c, p, at, rho) = (2.5, 3.0, 0.4, 0.3, 0.8);
        for a in [1e-3, 0.01, 0.5, 2.0] {
            let k = (nu + p / (1.0 + p)) * at * rho;
            let textbook = (-(nu - 1.0) + ((nu - 1.0f64).powi(2) + 4.0 * nu * c * a * k).sqrt()) / (2.0 * a * nu * c);
            assert!(close(upper_bound_alpha(a, nu, c, p, at, rho), textbook, 1e-12));
        }
    }

    #[test]
    fn scaled_gd_examples() {
        let r = scaled_gd_rate(0.5, 1.0, 0.5, 1.0).unwrap();
        assert!(close(r.constant, 2.0, 1e-15) && !r.vacuous);
        assert!(scaled_gd_rate(0.3, 0.8, 0.6, 1.0).unwrap().vacuous);
        // a = σ: constant = L/(2(1−σ)ρσ).
        let r = scaled_gd_rate(0.2, 0.8, 0.2, 3.0).unwrap();
        assert!(close(r.constant, 3.0 / (2.0 * 0.8 * 0.8 * 0.2), 1e-14));
    }

    #[test]
    fn capped_mean() {
        assert_eq!(capped_mu_bar(&[1.0, 0.0, 0.0, 0.0], 10.0), 0.25);
        assert_eq!(capped_mu_bar(&[1.0, 0.5], 0.2), 0.2);
    }

    proptest! {
        #[test]
        fn a1_at_optimum_equals_zeta(sigma in 0.001f64..0.999, gamma in 0.001f64..=1.0) {
            let (p, r) = pr_optimal(gamma).unwrap();
            let z = zeta(sigma, gamma).unwrap();
            prop_assert!(close(a1_tilde(sigma, gamma, p, r), z, 1e-12));
        }

        #[test]
        fn zeta_is_increasing_in_gamma(sigma in 0.01f64..0.99, g1 in 0.001f64..1.0, g2 in 0.001f64..1.0) {
            let (lo, hi) = if g1 < g2 { (g1, g2) } else { (g2, g1) };
            prop_assume!(lo < hi);
            prop_assert!(zeta(sigma, lo).unwrap() < zeta(sigma, hi).unwrap());
            prop_assert!(zeta(sigma, lo).unwrap() < sigma);
        }

        #[test]
        fn a2_sign_tracks_a1(sigma in 0.01f64..0.99, gamma in 0.01f64..=1.0, p in 0.01f64..2.0, r in 0.01f64..2.0, frac in 0.01f64..2.0) {
            let a1 = a1_tilde(sigma, gamma, p, r);
            let a = frac * a1;
            prop_assume!((frac - 1.0).abs() > 1e-9);
            prop_assert_eq!(a2_tilde(sigma, gamma, a, p, r) > 0.0, a < a1);
        }

        #[test]
        fn pr_epsilon_predicates(sigma in 0.01f64..0.99, gamma in 0.01f64..=1.0, frac in 0.001f64..0.999) {
            let z = zeta(sigma, gamma).unwrap();
            let eps = frac * z;
            let (p, r) = pr_epsilon(gamma, sigma, eps).unwrap();
            prop_assert!(pr_slack(gamma, p, r) >= 1e-12);
            prop_assert!(a1_tilde(sigma, gamma, p, r) - (z - eps) >= 1e-12);
        }

        #[test]
        fn delta1_positive_below_a_hat(sigma in 0.01f64..0.99, gamma in 0.01f64..=1.0, ef in 0.01f64..0.99, af in 0.01f64..=1.0) {
            let mut inputs = TheoryInputs::new(sigma, gamma, 0.8).unwrap();
            inputs.epsilon = ef * inputs.epsilon.max(1e-300) * 10.0 * 0.99;
            let z = zeta(sigma, gamma).unwrap();
            prop_assume!(inputs.epsilon > 0.0 && inputs.epsilon < z);
            inputs.a = af * (z - inputs.epsilon);
            let c = rate_constants_convex(&inputs).unwrap();
            prop_assert!(c.delta1 > 0.0);
            let s = rate_constants_strongly_convex(&TheoryInputs { mu_bar: 0.1, ..inputs }).unwrap();
            prop_assert!(s.beta_hat < 1.0);
        }

        #[test]
        fn upper_bound_is_decreasing(nu in 1.0f64..10.0, c in 0.01f64..100.0, p in 0.01f64..2.0, at in 0.001f64..2.0, a1 in 1e-4f64..10.0, ratio in 1.001f64..10.0) {
            let a2 = a1 * ratio;
            prop_assert!(upper_bound_alpha(a1, nu, c, p, at, 0.8) > upper_bound_alpha(a2, nu, c, p, at, 0.8));
        }
    }
}
