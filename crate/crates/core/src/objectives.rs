//! Synthetic finite-sum objectives `f(x) = (1/n) Σ f_i(x)` with exact gradients,
//! known smoothness/convexity constants and known minimizers.
//!
//! Every generated objective satisfies the interpolation condition: a single
//! point `x*` zeroes every component gradient. Instance distributions other
//! than the regression features (`N(0, feature_std²)`) and `x* ~ N(0, 1)` are
//! this crate's own choice and documented on each constructor.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{streams, Stream};
use crate::vector::{dot, DenseVector, VectorError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("invalid objective spec: {0}")]
    InvalidSpec(String),
    #[error("component index {index} out of range (n = {n})")]
    IndexOutOfRange { index: usize, n: usize },
    #[error(transparent)]
    Dimension(#[from] VectorError),
    #[error("strong-growth estimation failed: every sampled full gradient vanished")]
    EstimationFailed,
}

/// One summand `f_i`.
#[derive(Debug, Clone, PartialEq)]
pub enum Component {
    /// `Σ_j c_j x_j²`.
    DiagQuadratic { curvatures: Vec<f64> },
    /// `(⟨a, x⟩ − b)² + (μ/2)‖x − center‖²`; the ridge term is absent when `μ = 0`.
    Ridge { features: Vec<f64>, target: f64, mu: f64, center: Vec<f64> },
}

impl Component {
    fn value(&self, x: &[f64]) -> f64 {
        match self {
            Component::DiagQuadratic { curvatures } => {
                curvatures.iter().zip(x).map(|(c, v)| c * v * v).sum()
            }
            Component::Ridge { features, target, mu, center } => {
                let r = dot(features, x) - target;
                let mut v = r * r;
                if *mu > 0.0 {
                    let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                    v += 0.5 * mu * d2;
                }
                v
            }
        }
    }

    fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Component::DiagQuadratic { curvatures } => {
                for ((o, c), v) in out.iter_mut().zip(curvatures).zip(x) {
                    *o = 2.0 * c * v;
                }
            }
            Component::Ridge { features, target, mu, center } => {
                let r2 = 2.0 * (dot(features, x) - target);
                for (o, a) in out.iter_mut().zip(features) {
                    *o = r2 * a;
                }
                if *mu > 0.0 {
                    for ((o, v), c) in out.iter_mut().zip(x).zip(center) {
                        *o += mu * (v - c);
                    }
                }
            }
        }
    }

    fn lipschitz(&self) -> f64 {
        match self {
            Component::DiagQuadratic { curvatures } => {
                2.0 * curvatures.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            }
            Component::Ridge { features, mu, .. } => 2.0 * dot(features, features) + mu,
        }
    }

    fn strong_convexity(&self) -> f64 {
        match self {
            Component::DiagQuadratic { curvatures } => {
                2.0 * curvatures.iter().cloned().fold(f64::INFINITY, f64::min)
            }
            // Least-squares parts count as merely convex even when the design
            // happens to be full rank.
            Component::Ridge { mu, .. } => *mu,
        }
    }

    /// Adds `weight · f_i` expressed as `xᵀQx − 2lᵀx + s` into the accumulators.
    fn accumulate_quadratic(&self, weight: f64, q: &mut [f64], l: &mut [f64], s: &mut f64) {
        let d = l.len();
        match self {
            Component::DiagQuadratic { curvatures } => {
                for (j, c) in curvatures.iter().enumerate() {
                    q[j * d + j] += weight * c;
                }
            }
            Component::Ridge { features, target, mu, center } => {
                for (i, ai) in features.iter().enumerate() {
                    if *ai == 0.0 {
                        continue;
                    }
                    let wai = weight * ai;
                    let row = &mut q[i * d..(i + 1) * d];
                    for (qij, aj) in row.iter_mut().zip(features) {
                        *qij += wai * aj;
                    }
                    l[i] += wai * target;
                }
                *s += weight * target * target;
                if *mu > 0.0 {
                    let h = 0.5 * mu * weight;
                    for (j, c) in center.iter().enumerate() {
                        q[j * d + j] += h;
                        l[j] += h * c;
                        *s += h * c * c;
                    }
                }
            }
        }
    }
}

/// The objective as one quadratic `f(x) = xᵀQx − 2lᵀx + s` (all generated
/// objectives are quadratic). Used for fast full-loss evaluation.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    dim: usize,
    /// Row-major `d × d`, symmetric.
    q: Vec<f64>,
    l: Vec<f64>,
    s: f64,
}

impl QuadraticForm {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Qx − l`, i.e. half the full gradient.
    pub fn half_gradient(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d).map(|i| dot(&self.q[i * d..(i + 1) * d], x) - self.l[i]).collect()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let hg = self.half_gradient(x);
        dot(x, &hg) - dot(&self.l, x) + self.s
    }

    fn column(&self, j: usize) -> &[f64] {
        // Symmetric: row j equals column j.
        &self.q[j * self.dim..(j + 1) * self.dim]
    }
}

/// Tracks `f(x)` along a trajectory whose updates are mostly sparse, in
/// `O(d · nnz(update))` per step instead of `O(n · d)`.
#[derive(Debug, Clone)]
pub struct LossTracker<'a> {
    form: &'a QuadraticForm,
    minimizer: Option<(&'a DenseVector, f64)>,
    half_grad: Vec<f64>,
    updates_since_refresh: usize,
}

const TRACKER_REFRESH: usize = 1024;

impl<'a> LossTracker<'a> {
    pub fn new(obj: &'a FiniteSumObjective, x: &DenseVector) -> Self {
        let form = obj.quadratic_form();
        let minimizer = match (&obj.minimizer, obj.optimal_value) {
            (Some(xs), Some(fs)) => Some((xs, fs)),
            _ => None,
        };
        Self { form, minimizer, half_grad: form.half_gradient(x.as_slice()), updates_since_refresh: 0 }
    }

    /// Account for `x ← x − delta`, where `x_after` is the new iterate.
    pub fn apply_step(&mut self, delta: &DenseVector, x_after: &DenseVector) {
        self.updates_since_refresh += 1;
        let nnz = delta.nnz();
        if self.updates_since_refresh >= TRACKER_REFRESH || 2 * nnz > self.form.dim {
            self.half_grad = self.form.half_gradient(x_after.as_slice());
            self.updates_since_refresh = 0;
            return;
        }
        for (j, dj) in delta.iter().enumerate() {
            if *dj != 0.0 {
                for (h, qj) in self.half_grad.iter_mut().zip(self.form.column(j)) {
                    *h -= dj * qj;
                }
            }
        }
    }

    /// `f(x)` for the iterate the tracker currently describes.
    pub fn value(&self, x: &DenseVector) -> f64 {
        match self.minimizer {
            // f(x) − f* = (x − x*)ᵀQ(x − x*) = (x − x*)ᵀ(Qx − l), better conditioned near x*.
            Some((xs, fs)) => {
                fs + x.iter().zip(xs.iter()).zip(&self.half_grad).map(|((a, b), h)| (a - b) * h).sum::<f64>()
            }
            None => dot(x.as_slice(), &self.half_grad) - dot(&self.form.l, x.as_slice()) + self.form.s,
        }
    }
}

/// `f(x) = (1/n) Σ_i f_i(x)` together with its analytic metadata.
#[derive(Debug, Clone)]
pub struct FiniteSumObjective {
    dim: usize,
    components: Vec<Component>,
    lipschitz: Vec<f64>,
    mu: Vec<f64>,
    minimizer: Option<DenseVector>,
    optimal_value: Option<f64>,
    initial_point: DenseVector,
    quadratic: OnceLock<QuadraticForm>,
}

impl PartialEq for FiniteSumObjective {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.components == other.components
            && self.minimizer == other.minimizer
            && self.optimal_value == other.optimal_value
            && self.initial_point == other.initial_point
    }
}

impl FiniteSumObjective {
    /// Assemble an objective from explicit components. `minimizer`, when given,
    /// must be a common stationary point of every component.
    pub fn from_components(
        dim: usize,
        components: Vec<Component>,
        minimizer: Option<DenseVector>,
        initial_point: DenseVector,
    ) -> Result<Self, ObjectiveError> {
        if dim == 0 {
            return Err(ObjectiveError::InvalidSpec("dimension must be positive".into()));
        }
        if components.is_empty() {
            return Err(ObjectiveError::InvalidSpec("need at least one component".into()));
        }
        for c in &components {
            let len = match c {
                Component::DiagQuadratic { curvatures } => curvatures.len(),
                Component::Ridge { features, center, mu, .. } => {
                    if *mu < 0.0 {
                        return Err(ObjectiveError::InvalidSpec("negative ridge weight".into()));
                    }
                    if *mu > 0.0 && center.len() != dim {
                        return Err(ObjectiveError::InvalidSpec("ridge center has wrong dimension".into()));
                    }
                    features.len()
                }
            };
            if len != dim {
                return Err(ObjectiveError::InvalidSpec(format!(
                    "component has dimension {len}, expected {dim}"
                )));
            }
        }
        initial_point.check_dim(dim)?;
        if let Some(xs) = &minimizer {
            xs.check_dim(dim)?;
        }
        let lipschitz = components.iter().map(Component::lipschitz).collect();
        let mu = components.iter().map(Component::strong_convexity).collect();
        let mut obj = Self {
            dim,
            components,
            lipschitz,
            mu,
            minimizer: None,
            optimal_value: None,
            initial_point,
            quadratic: OnceLock::new(),
        };
        if let Some(xs) = minimizer {
            obj.optimal_value = Some(obj.full_value(&xs)?);
            obj.minimizer = Some(xs);
        }
        Ok(obj)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn lipschitz(&self) -> &[f64] {
        &self.lipschitz
    }

    pub fn strong_convexity(&self) -> &[f64] {
        &self.mu
    }

    pub fn l_max(&self) -> f64 {
        self.lipschitz.iter().cloned().fold(0.0, f64::max)
    }

    pub fn l_mean(&self) -> f64 {
        self.lipschitz.iter().sum::<f64>() / self.n() as f64
    }

    pub fn mu_bar(&self) -> f64 {
        self.mu.iter().sum::<f64>() / self.n() as f64
    }

    pub fn mu_max(&self) -> f64 {
        self.mu.iter().cloned().fold(0.0, f64::max)
    }

    pub fn minimizer(&self) -> Option<&DenseVector> {
        self.minimizer.as_ref()
    }

    pub fn optimal_value(&self) -> Option<f64> {
        self.optimal_value
    }

    pub fn initial_point(&self) -> &DenseVector {
        &self.initial_point
    }

    pub fn with_initial_point(mut self, x0: DenseVector) -> Result<Self, ObjectiveError> {
        x0.check_dim(self.dim)?;
        self.initial_point = x0;
        Ok(self)
    }

    fn check(&self, i: usize, x: &DenseVector) -> Result<(), ObjectiveError> {
        if i >= self.n() {
            return Err(ObjectiveError::IndexOutOfRange { index: i, n: self.n() });
        }
        x.check_dim(self.dim)?;
        Ok(())
    }

    pub fn component_value(&self, i: usize, x: &DenseVector) -> Result<f64, ObjectiveError> {
        self.check(i, x)?;
        Ok(self.components[i].value(x.as_slice()))
    }

    pub fn component_grad(&self, i: usize, x: &DenseVector) -> Result<DenseVector, ObjectiveError> {
        self.check(i, x)?;
        let mut out = vec![0.0; self.dim];
        self.components[i].grad_into(x.as_slice(), &mut out);
        Ok(DenseVector::from_vec_unchecked(out))
    }

    /// Mean of the listed components' values (a mini-batch objective).
    pub fn batch_value(&self, indices: &[usize], x: &DenseVector) -> Result<f64, ObjectiveError> {
        let mut sum = 0.0;
        for (k, &i) in indices.iter().enumerate() {
            let v = self.component_value(i, x)?;
            sum = if k == 0 { v } else { sum + v };
        }
        Ok(sum / indices.len() as f64)
    }

    pub fn batch_grad(&self, indices: &[usize], x: &DenseVector) -> Result<DenseVector, ObjectiveError> {
        let mut acc = self.component_grad(indices[0], x)?;
        for &i in &indices[1..] {
            self.check(i, x)?;
            let mut buf = vec![0.0; self.dim];
            self.components[i].grad_into(x.as_slice(), &mut buf);
            for (a, b) in acc.as_mut_slice().iter_mut().zip(&buf) {
                *a += b;
            }
        }
        let n = indices.len() as f64;
        for a in acc.as_mut_slice() {
            *a /= n;
        }
        Ok(acc)
    }

    /// Arithmetic mean of the component values.
    pub fn full_value(&self, x: &DenseVector) -> Result<f64, ObjectiveError> {
        x.check_dim(self.dim)?;
        let all: Vec<usize> = (0..self.n()).collect();
        self.batch_value(&all, x)
    }

    /// Arithmetic mean of the component gradients.
    pub fn full_grad(&self, x: &DenseVector) -> Result<DenseVector, ObjectiveError> {
        x.check_dim(self.dim)?;
        let all: Vec<usize> = (0..self.n()).collect();
        self.batch_grad(&all, x)
    }

    /// The objective as a single quadratic form; built on first use.
    pub fn quadratic_form(&self) -> &QuadraticForm {
        self.quadratic.get_or_init(|| {
            let d = self.dim;
            let mut q = vec![0.0; d * d];
            let mut l = vec![0.0; d];
            let mut s = 0.0;
            let w = 1.0 / self.n() as f64;
            for c in &self.components {
                c.accumulate_quadratic(w, &mut q, &mut l, &mut s);
            }
            QuadraticForm { dim: d, q, l, s }
        })
    }

    /// `max_i ‖∇f_i(x*)‖`, zero up to rounding for every generated objective.
    pub fn interpolation_residual(&self) -> Option<f64> {
        let xs = self.minimizer.as_ref()?;
        let mut worst: f64 = 0.0;
        for i in 0..self.n() {
            let g = self.component_grad(i, xs).ok()?;
            worst = worst.max(g.norm());
        }
        Some(worst)
    }
}

/// Single-component `f(x) = Σ_j c_j x_j²`, minimized at 0 and started at the
/// all-ones point.
pub fn make_diag_quadratic(curvatures: &[f64]) -> Result<FiniteSumObjective, ObjectiveError> {
    if curvatures.is_empty() {
        return Err(ObjectiveError::InvalidSpec("curvatures must be non-empty".into()));
    }
    if let Some(c) = curvatures.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
        return Err(ObjectiveError::InvalidSpec(format!("curvature must be positive, got {c}")));
    }
    let d = curvatures.len();
    FiniteSumObjective::from_components(
        d,
        vec![Component::DiagQuadratic { curvatures: curvatures.to_vec() }],
        Some(DenseVector::zeros(d)),
        DenseVector::filled(d, 1.0),
    )
}

/// Interpolated least squares `f_i(x) = (⟨a_i, x⟩ − b_i)²` with `b_i = ⟨a_i, x*⟩`.
///
/// `a_i` entries are i.i.d. `N(0, feature_std²)`, `x*` entries are `N(0, 1)`,
/// and the run starts at `x₀ = 0`.
pub fn make_interpolated_regression(
    n: usize,
    d: usize,
    feature_std: f64,
    seed: u64,
) -> Result<FiniteSumObjective, ObjectiveError> {
    if n == 0 || d == 0 {
        return Err(ObjectiveError::InvalidSpec("n and d must be positive".into()));
    }
    if !(feature_std.is_finite() && feature_std > 0.0) {
        return Err(ObjectiveError::InvalidSpec("feature_std must be positive".into()));
    }
    let mut rng = Stream::new(seed, streams::OBJECTIVE);
    let x_star = rng.normal_vec(d, 1.0);
    let features: Vec<Vec<f64>> = (0..n).map(|_| rng.normal_vec(d, feature_std)).collect();
    regression_from_features(features, x_star)
}

/// Regression instance with caller-chosen features and minimizer.
pub fn regression_from_features(
    features: Vec<Vec<f64>>,
    x_star: Vec<f64>,
) -> Result<FiniteSumObjective, ObjectiveError> {
    let mus = vec![0.0; features.len()];
    ridge_from_parts(features, x_star, mus)
}

/// `f_i(x) = (⟨a_i,x⟩ − b_i)² + (μ_i/2)‖x − x*‖²` with `b_i = ⟨a_i, x*⟩`.
pub fn ridge_from_parts(
    features: Vec<Vec<f64>>,
    x_star: Vec<f64>,
    mus: Vec<f64>,
) -> Result<FiniteSumObjective, ObjectiveError> {
    if features.len() != mus.len() {
        return Err(ObjectiveError::InvalidSpec("one ridge weight per component required".into()));
    }
    let d = x_star.len();
    let x_star = DenseVector::new(x_star)?;
    let components = features
        .into_iter()
        .zip(mus)
        .map(|(a, mu)| {
            let target = dot(&a, x_star.as_slice());
            let center = if mu > 0.0 { x_star.as_slice().to_vec() } else { Vec::new() };
            Component::Ridge { features: a, target, mu, center }
        })
        .collect();
    FiniteSumObjective::from_components(d, components, Some(x_star), DenseVector::zeros(d))
}

/// Interpolating mixture in which even-indexed components carry a ridge term.
///
/// Features are i.i.d. `N(0, 1/d)` so that `‖a_i‖² ≈ 1`; `x* ~ N(0, 1)`;
/// component `i` has `μ_i = mu_floor + U(0, 1]` when `i` is even and `μ_i = 0`
/// otherwise, so `μ̄ > 0` for every `n ≥ 1`.
pub fn make_strongly_convex_mix(
    n: usize,
    d: usize,
    mu_floor: f64,
    seed: u64,
) -> Result<FiniteSumObjective, ObjectiveError> {
    if n == 0 || d == 0 {
        return Err(ObjectiveError::InvalidSpec("n and d must be positive".into()));
    }
    if !(mu_floor.is_finite() && mu_floor >= 0.0) {
        return Err(ObjectiveError::InvalidSpec("mu_floor must be non-negative".into()));
    }
    let mut rng = Stream::new(seed, streams::OBJECTIVE);
    let x_star = rng.normal_vec(d, 1.0);
    let std = 1.0 / (d as f64).sqrt();
    let features: Vec<Vec<f64>> = (0..n).map(|_| rng.normal_vec(d, std)).collect();
    let mus = (0..n).map(|i| if i % 2 == 0 { mu_floor + rng.uniform() } else { 0.0 }).collect();
    ridge_from_parts(features, x_star, mus)
}

/// Serializable description of an objective instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    /// Exactly one of `curvatures` or `exponents` (`c_j = 2^-e_j`).
    DiagQuadratic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        curvatures: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        exponents: Option<Vec<f64>>,
    },
    InterpolatedRegression { n: usize, d: usize, feature_std: f64, seed: u64 },
    StronglyConvexMix { n: usize, d: usize, mu_floor: f64, seed: u64 },
}

impl ObjectiveSpec {
    pub fn build(&self) -> Result<FiniteSumObjective, ObjectiveError> {
        match self {
            ObjectiveSpec::DiagQuadratic { curvatures, exponents } => match (curvatures, exponents) {
                (Some(c), None) => make_diag_quadratic(c),
                (None, Some(e)) => {
                    let c: Vec<f64> = e.iter().map(|e| (-e).exp2()).collect();
                    make_diag_quadratic(&c)
                }
                _ => Err(ObjectiveError::InvalidSpec(
                    "diag_quadratic needs exactly one of `curvatures` or `exponents`".into(),
                )),
            },
            ObjectiveSpec::InterpolatedRegression { n, d, feature_std, seed } => {
                make_interpolated_regression(*n, *d, *feature_std, *seed)
            }
            ObjectiveSpec::StronglyConvexMix { n, d, mu_floor, seed } => {
                make_strongly_convex_mix(*n, *d, *mu_floor, *seed)
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ObjectiveSpec::DiagQuadratic { curvatures, exponents } => {
                curvatures.as_ref().or(exponents.as_ref()).map_or(0, Vec::len)
            }
            ObjectiveSpec::InterpolatedRegression { d, .. } | ObjectiveSpec::StronglyConvexMix { d, .. } => *d,
        }
    }
}

/// Lower estimate of the strong-growth constant
/// `ν ≥ (1/n)Σ‖∇f_i(x)‖² / ‖∇f(x)‖²`, maximized over random probe points
/// `x = x* + z` (or `x₀ + z` without a known minimizer), `z ~ N(0, I)`.
/// Probes with `‖∇f(x)‖ < 1e-12` are skipped.
pub fn estimate_sgc_constant(
    obj: &FiniteSumObjective,
    sample_count: usize,
    seed: u64,
) -> Result<f64, ObjectiveError> {
    if sample_count == 0 {
        return Err(ObjectiveError::InvalidSpec("sample_count must be at least 1".into()));
    }
    let center = obj.minimizer().unwrap_or(obj.initial_point()).clone();
    let mut rng = Stream::new(seed, streams::SGC_PROBE);
    let mut best: Option<f64> = None;
    for _ in 0..sample_count {
        let mut x = center.clone();
        for v in x.as_mut_slice() {
            *v += rng.standard_normal();
        }
        if let Some(ratio) = sgc_ratio(obj, &x)? {
            best = Some(best.map_or(ratio, |b| b.max(ratio)));
        }
    }
    best.ok_or(ObjectiveError::EstimationFailed)
}

/// `(1/n)Σ‖∇f_i(x)‖² / ‖∇f(x)‖²`, or `None` when the full gradient vanishes.
pub fn sgc_ratio(obj: &FiniteSumObjective, x: &DenseVector) -> Result<Option<f64>, ObjectiveError> {
    let full = obj.full_grad(x)?;
    let full_sq = full.norm_sq();
    if full_sq.sqrt() < 1e-12 {
        return Ok(None);
    }
    let mut sum = 0.0;
    for i in 0..obj.n() {
        let g = obj.component_grad(i, x)?.norm_sq();
        sum = if i == 0 { g } else { sum + g };
    }
    Ok(Some(sum / obj.n() as f64 / full_sq))
}
