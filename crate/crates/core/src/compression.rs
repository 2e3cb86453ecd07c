//! Top-k sparsification and the error-feedback memory update.
//!
//! Ties in magnitude are broken toward the lowest index, so the selected
//! support is a deterministic function of the input.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vector::{DenseVector, VectorError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompressionError {
    #[error("invalid compression spec: k = {k}, d = {d} (need 1 <= k <= d)")]
    InvalidSpec { k: usize, d: usize },
    #[error(transparent)]
    Dimension(#[from] VectorError),
}

/// Keep `k` of `d` coordinates; `γ = k/d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompressionSpec {
    k: usize,
    d: usize,
}

impl CompressionSpec {
    pub fn new(k: usize, d: usize) -> Result<Self, CompressionError> {
        if k == 0 || k > d {
            return Err(CompressionError::InvalidSpec { k, d });
        }
        Ok(Self { k, d })
    }

    /// The lossless spec `k = d`.
    pub fn identity(d: usize) -> Self {
        assert!(d >= 1);
        Self { k: d, d }
    }

    /// `k = round(ratio · d)`, clamped to `[1, d]`.
    pub fn from_ratio(ratio: f64, d: usize) -> Result<Self, CompressionError> {
        let k = (ratio * d as f64).round().clamp(1.0, d as f64) as usize;
        Self::new(k, d)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn gamma(&self) -> f64 {
        self.k as f64 / self.d as f64
    }

    pub fn is_lossless(&self) -> bool {
        self.k == self.d
    }
}

/// Error-feedback memory `m_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMemory {
    m: DenseVector,
}

impl ErrorMemory {
    pub fn zeros(d: usize) -> Self {
        Self { m: DenseVector::zeros(d) }
    }

    pub fn from_vector(m: DenseVector) -> Self {
        Self { m }
    }

    pub fn as_vector(&self) -> &DenseVector {
        &self.m
    }

    pub fn norm_sq(&self) -> f64 {
        self.m.norm_sq()
    }
}

/// Indices of the `k` largest-magnitude entries, in increasing order.
pub fn top_k_indices(v: &[f64], k: usize) -> Vec<usize> {
    let d = v.len();
    if k >= d {
        return (0..d).collect();
    }
    let mut idx: Vec<usize> = (0..d).collect();
    // Larger magnitude first, then lower index first.
    let order = |a: &usize, b: &usize| -> Ordering {
        v[*b].abs().total_cmp(&v[*a].abs()).then(a.cmp(b))
    };
    if k > 0 {
        idx.select_nth_unstable_by(k - 1, order);
    }
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

pub fn top_k(v: &DenseVector, spec: &CompressionSpec) -> Result<DenseVector, CompressionError> {
    v.check_dim(spec.d)?;
    let mut out = vec![0.0; spec.d];
    for i in top_k_indices(v.as_slice(), spec.k) {
        out[i] = v[i];
    }
    Ok(DenseVector::from_vec_unchecked(out))
}

/// Result of one error-feedback compression.
#[derive(Debug, Clone, PartialEq)]
pub struct Feedback {
    /// `top_k(m + update)`, dense.
    pub g: DenseVector,
    /// `m + update − g`.
    pub memory: ErrorMemory,
    /// The `k` selected coordinates, increasing.
    pub support: Vec<usize>,
}

/// `g = top_k(m + update)`, `m' = m + update − g`.
///
/// Kept coordinates are copied into `g` and zeroed in `m'`, so
/// `g + m' = m + update` holds exactly.
pub fn compress_with_feedback(
    mem: &ErrorMemory,
    update: &DenseVector,
    spec: &CompressionSpec,
) -> Result<(DenseVector, ErrorMemory), CompressionError> {
    let fb = compress_with_feedback_sparse(mem, update, spec)?;
    Ok((fb.g, fb.memory))
}

pub fn compress_with_feedback_sparse(
    mem: &ErrorMemory,
    update: &DenseVector,
    spec: &CompressionSpec,
) -> Result<Feedback, CompressionError> {
    mem.m.check_dim(spec.d)?;
    update.check_dim(spec.d)?;
    let mut acc = mem.m.add(update);
    let support = top_k_indices(acc.as_slice(), spec.k);
    let mut g = vec![0.0; spec.d];
    for &i in &support {
        g[i] = acc[i];
        acc[i] = 0.0;
    }
    Ok(Feedback { g: DenseVector::from_vec_unchecked(g), memory: ErrorMemory { m: acc }, support })
}

/// `‖v − top_k(v)‖² ≤ (1−γ)‖v‖² + 1e-12`.
pub fn contraction_check(v: &DenseVector, spec: &CompressionSpec) -> bool {
    match top_k(v, spec) {
        Ok(c) => v.sub(&c).norm_sq() <= (1.0 - spec.gamma()) * v.norm_sq() + 1e-12,
        Err(_) => false,
    }
}
