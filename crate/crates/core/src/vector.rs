//! Dense real vectors.

use std::ops::{Index, IndexMut};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VectorError {
    #[error("vector must have at least one entry")]
    Empty,
    #[error("entry {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

/// A coordinate vector in `R^d`, `d >= 1`.
///
/// Construction through [`DenseVector::new`] rejects empty and non-finite
/// input. Arithmetic does not re-check finiteness: a diverging run is allowed
/// to overflow and is caught by the divergence detector instead.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(entries: Vec<f64>) -> Result<Self, VectorError> {
        if entries.is_empty() {
            return Err(VectorError::Empty);
        }
        if let Some((index, &value)) = entries.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(VectorError::NonFinite { index, value });
        }
        Ok(Self(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Self(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Self(vec![value; dim])
    }

    pub(crate) fn from_vec_unchecked(entries: Vec<f64>) -> Self {
        debug_assert!(!entries.is_empty());
        Self(entries)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn check_dim(&self, expected: usize) -> Result<(), VectorError> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(VectorError::DimensionMismatch { expected, actual: self.dim() })
        }
    }

    pub fn dot(&self, other: &Self) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `self - other`.
    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// `self + other`.
    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|v| factor * v).collect())
    }

    /// `self - step * dir`, the trial point of a gradient step.
    pub fn step(&self, step: f64, dir: &Self) -> Self {
        debug_assert_eq!(self.dim(), dir.dim());
        Self(self.0.iter().zip(&dir.0).map(|(x, g)| x - step * g).collect())
    }

    /// `self += factor * other`.
    pub fn axpy(&mut self, factor: f64, other: &Self) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += factor * b;
        }
    }

    pub fn sub_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a -= b;
        }
    }

    pub fn dist_sq(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// Number of entries that are not exactly zero.
    pub fn nnz(&self) -> usize {
        self.0.iter().filter(|v| **v != 0.0).count()
    }
}

impl Index<usize> for DenseVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for DenseVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl TryFrom<Vec<f64>> for DenseVector {
    type Error = VectorError;
    fn try_from(v: Vec<f64>) -> Result<Self, VectorError> {
        Self::new(v)
    }
}

impl AsRef<[f64]> for DenseVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
