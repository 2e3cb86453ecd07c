//! Armijo backtracking with the `α_max = ω·α_{t−1}` reset and post-search scaling.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vector::DenseVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LineSearchError {
    #[error("invalid Armijo configuration: {0}")]
    InvalidConfig(String),
    #[error("gradient is zero; the caller must skip the step")]
    DegenerateInput,
    #[error("no step accepted after {backtracks} trials (last candidate {last_alpha:e})")]
    SearchFailed { last_alpha: f64, backtracks: u32 },
}

/// Which candidate the backtracking loop tests first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FirstTrial {
    /// Shrink before the first test: candidates `ρα_max, ρ²α_max, …`.
    Premultiplied,
    /// Test `α_max` itself first: candidates `α_max, ρα_max, …`.
    #[default]
    AtAlphaMax,
}

/// How `α_max` is chosen before each search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMaxRule {
    /// `α_max = ω·α_{t−1}`.
    #[default]
    Reset,
    /// `α_max = alpha_max_init` at every iteration (classical Armijo).
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmijoConfig {
    pub sigma: f64,
    pub rho: f64,
    pub omega: f64,
    pub scale_a: f64,
    pub alpha_max_init: f64,
    pub max_backtracks: u32,
    pub first_trial: FirstTrial,
    pub alpha_max_rule: AlphaMaxRule,
    /// Upper bound on `α_max` after each reset; `None` lets it grow freely.
    pub alpha_max_cap: Option<f64>,
}

impl Default for ArmijoConfig {
    fn default() -> Self {
        Self {
            sigma: 0.1,
            rho: 0.8,
            omega: 1.2,
            scale_a: 0.3,
            alpha_max_init: 0.1,
            max_backtracks: 200,
            first_trial: FirstTrial::AtAlphaMax,
            alpha_max_rule: AlphaMaxRule::Reset,
            alpha_max_cap: None,
        }
    }
}

impl ArmijoConfig {
    pub fn validate(&self) -> Result<(), LineSearchError> {
        let bad = |msg: &str| Err(LineSearchError::InvalidConfig(msg.into()));
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return bad("sigma must lie in (0, 1)");
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad("rho must lie in (0, 1)");
        }
        if !(self.omega >= 1.0 && self.omega.is_finite()) {
            return bad("omega must be >= 1");
        }
        if !(self.scale_a > 0.0 && self.scale_a.is_finite()) {
            return bad("scale_a must be positive");
        }
        if !(self.alpha_max_init > 0.0 && self.alpha_max_init.is_finite()) {
            return bad("alpha_max_init must be positive");
        }
        if self.max_backtracks == 0 {
            return bad("max_backtracks must be positive");
        }
        if let Some(cap) = self.alpha_max_cap {
            if !(cap > 0.0) {
                return bad("alpha_max_cap must be positive");
            }
        }
        Ok(())
    }

    /// Initial `α_{t−1}`, chosen so the first reset yields `alpha_max_init`.
    pub fn initial_alpha_prev(&self) -> f64 {
        self.alpha_max_init / self.omega
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchResult {
    pub alpha: f64,
    /// `scale_a · alpha`.
    pub eta: f64,
    /// Number of candidates tested, including the accepted one.
    pub backtracks: u32,
    /// Calls to the value function; equal to `backtracks`.
    pub evals: u32,
}

/// Backtrack until `f(x − α·grad) ≤ f(x) − σ·α·‖grad‖²`.
///
/// The acceptance test uses the unscaled `α`; `eta = a·α` is only reported.
pub fn armijo_search<F>(
    mut value_fn: F,
    x: &DenseVector,
    grad: &DenseVector,
    f_at_x: f64,
    alpha_max: f64,
    cfg: &ArmijoConfig,
) -> Result<LineSearchResult, LineSearchError>
where
    F: FnMut(&DenseVector) -> f64,
{
    cfg.validate()?;
    if !(alpha_max > 0.0) {
        return Err(LineSearchError::InvalidConfig("alpha_max must be positive".into()));
    }
    let grad_sq = grad.norm_sq();
    if grad_sq == 0.0 {
        return Err(LineSearchError::DegenerateInput);
    }
    let mut alpha = match cfg.first_trial {
        FirstTrial::Premultiplied => cfg.rho * alpha_max,
        FirstTrial::AtAlphaMax => alpha_max,
    };
    let mut trial = x.clone();
    for backtracks in 1..=cfg.max_backtracks {
        for ((t, xi), gi) in trial.as_mut_slice().iter_mut().zip(x.iter()).zip(grad.iter()) {
            *t = xi - alpha * gi;
        }
        if value_fn(&trial) <= f_at_x - cfg.sigma * alpha * grad_sq {
            return Ok(LineSearchResult { alpha, eta: cfg.scale_a * alpha, backtracks, evals: backtracks });
        }
        if backtracks < cfg.max_backtracks {
            alpha *= cfg.rho;
        }
    }
    Err(LineSearchError::SearchFailed { last_alpha: alpha, backtracks: cfg.max_backtracks })
}

/// `ω · alpha_prev` (or `alpha_max_init` under [`AlphaMaxRule::Fixed`]),
/// clipped to `alpha_max_cap` when one is set.
pub fn next_alpha_max(alpha_prev: f64, cfg: &ArmijoConfig) -> f64 {
    let a = match cfg.alpha_max_rule {
        AlphaMaxRule::Reset => cfg.omega * alpha_prev,
        AlphaMaxRule::Fixed => cfg.alpha_max_init,
    };
    match cfg.alpha_max_cap {
        Some(cap) => a.min(cap),
        None => a,
    }
}

/// `2(1−σ)/L`, below which every step is accepted on an `L`-smooth function.
pub fn guaranteed_alpha(sigma: f64, l_max: f64) -> f64 {
    2.0 * (1.0 - sigma) / l_max
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn half_square(x: &DenseVector) -> f64 {
        0.5 * x.norm_sq()
    }

    fn cfg(sigma: f64, rho: f64, first: FirstTrial) -> ArmijoConfig {
        ArmijoConfig { sigma, rho, first_trial: first, ..ArmijoConfig::default() }
    }

    fn one() -> DenseVector {
        DenseVector::new(vec![1.0]).unwrap()
    }

    #[test]
    fn hand_trace_premultiplied() {
        // Candidates 5, 2.5, 1.25; (1−α)²/2 ≤ 0.5 − 0.1α first holds at 1.25.
        let c = cfg(0.1, 0.5, FirstTrial::Premultiplied);
        let r = armijo_search(half_square, &one(), &one(), 0.5, 10.0, &c).unwrap();
        assert_eq!(r.alpha, 1.25);
        assert_eq!(r.backtracks, 3);
        assert_eq!(r.evals, 3);
        assert_eq!(r.eta, c.scale_a * 1.25);
    }

    #[test]
    fn first_candidate_in_guaranteed_interval() {
        let c = cfg(0.1, 0.5, FirstTrial::Premultiplied);
        let r = armijo_search(half_square, &one(), &one(), 0.5, 1.0, &c).unwrap();
        assert_eq!(r.alpha, 0.5);
        assert_eq!(r.backtracks, 1);
        let c = cfg(0.1, 0.5, FirstTrial::AtAlphaMax);
        let r = armijo_search(half_square, &one(), &one(), 0.5, 1.0, &c).unwrap();
        assert_eq!(r.alpha, 1.0);
        assert_eq!(r.backtracks, 1);
    }

    #[test]
    fn every_alpha_below_guarantee_accepts() {
        let c = cfg(0.1, 0.5, FirstTrial::AtAlphaMax);
        let limit = guaranteed_alpha(0.1, 1.0);
        assert!((limit - 1.8).abs() < 1e-15);
        // The boundary itself holds with equality, so rounding may reject it.
        for i in 1..180 {
            let a = i as f64 / 100.0;
            let r = armijo_search(half_square, &one(), &one(), 0.5, a, &c).unwrap();
            assert_eq!((r.alpha, r.backtracks), (a, 1));
        }
    }

    #[test]
    fn degenerate_and_failed_searches() {
        let c = ArmijoConfig { max_backtracks: 3, ..cfg(0.1, 0.5, FirstTrial::Premultiplied) };
        let zero = DenseVector::zeros(1);
        assert_eq!(armijo_search(half_square, &one(), &zero, 0.5, 1.0, &c), Err(LineSearchError::DegenerateInput));
        // A value function that never decreases.
        let r = armijo_search(|_| 1.0, &one(), &one(), 0.5, 1.0, &c);
        assert_eq!(r, Err(LineSearchError::SearchFailed { last_alpha: 0.125, backtracks: 3 }));
        let bad = ArmijoConfig { sigma: 1.0, ..c };
        assert!(matches!(armijo_search(half_square, &one(), &one(), 0.5, 1.0, &bad), Err(LineSearchError::InvalidConfig(_))));
    }

    #[test]
    fn reset_rule() {
        let c = ArmijoConfig::default();
        assert!((next_alpha_max(0.1, &c) - 0.12).abs() < 1e-15);
        let c1 = ArmijoConfig { omega: 1.0, ..c };
        assert_eq!(next_alpha_max(0.37, &c1), 0.37);
        let capped = ArmijoConfig { alpha_max_cap: Some(0.11), ..c };
        assert_eq!(next_alpha_max(0.1, &capped), 0.11);
        assert_eq!(c.initial_alpha_prev() * c.omega, c.alpha_max_init);
        let fixed = ArmijoConfig { alpha_max_rule: AlphaMaxRule::Fixed, alpha_max_init: 5.0, ..c };
        assert_eq!(next_alpha_max(1e-9, &fixed), 5.0);
        assert_eq!(next_alpha_max(1e9, &fixed), 5.0);
    }

    #[test]
    fn accept_first_dynamics_grow_by_omega_rho() {
        // With ωρ > 1 and a flat enough objective every search accepts its first
        // candidate, so α grows by ωρ per step.
        let c = ArmijoConfig { omega: 2.0, ..cfg(0.1, 0.8, FirstTrial::Premultiplied) };
        let flat = |x: &DenseVector| 1e-9 * x.norm_sq();
        let x = one();
        let g = DenseVector::new(vec![2e-9]).unwrap();
        let mut prev = 1e-3;
        for _ in 0..10 {
            let r = armijo_search(flat, &x, &g, flat(&x), next_alpha_max(prev, &c), &c).unwrap();
            assert_eq!(r.backtracks, 1);
            assert!((r.alpha / prev - 1.6).abs() < 1e-12);
            prev = r.alpha;
        }
    }

    proptest! {
        #[test]
        fn lower_bound_and_scale_independence(
            curv in prop::collection::vec(0.01f64..10.0, 1..6),
            alpha_max in 1e-3f64..50.0,
            sigma in 0.01f64..0.9,
            rho in 0.1f64..0.95,
            a in 0.01f64..3.0,
            premult in any::<bool>(),
        ) {
            let first = if premult { FirstTrial::Premultiplied } else { FirstTrial::AtAlphaMax };
            let c = ArmijoConfig { sigma, rho, scale_a: a, first_trial: first, ..ArmijoConfig::default() };
            let f = |x: &DenseVector| x.iter().zip(&curv).map(|(v, c)| c * v * v).sum::<f64>();
            let x = DenseVector::filled(curv.len(), 1.0);
            let g = DenseVector::new(curv.iter().map(|c| 2.0 * c).collect()).unwrap();
            let l = 2.0 * curv.iter().cloned().fold(0.0, f64::max);
            let mut calls = 0u32;
            let r = armijo_search(|y| { calls += 1; f(y) }, &x, &g, f(&x), alpha_max, &c).unwrap();
            prop_assert_eq!(calls, r.backtracks);
            prop_assert!(f(&x.step(r.alpha, &g)) <= f(&x) - sigma * r.alpha * g.norm_sq());
            prop_assert!(r.alpha >= rho * alpha_max.min(guaranteed_alpha(sigma, l)) - 1e-12);
            let top = if premult { rho * alpha_max } else { alpha_max };
            prop_assert!(r.alpha <= top);
            prop_assert_eq!(r.eta, a * r.alpha);
            let unscaled = ArmijoConfig { scale_a: 1.0, ..c };
            let r1 = armijo_search(f, &x, &g, f(&x), alpha_max, &unscaled).unwrap();
            prop_assert_eq!(r1.alpha, r.alpha);
        }
    }
}
