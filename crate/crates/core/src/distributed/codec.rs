//! Sparse update wire format.
//!
//! Little-endian: `sender: u32`, `iteration: u64`, `count: u32`, then `count`
//! pairs of `index: u32`, `value: f64`. Indices are strictly increasing.

use thiserror::Error;

use crate::vector::DenseVector;

pub const HEADER_BYTES: usize = 4 + 8 + 4;
pub const ENTRY_BYTES: usize = 4 + 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("message truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("{0} trailing bytes after message")]
    TrailingBytes(usize),
    #[error("indices not strictly increasing at entry {0}")]
    BadOrdering(usize),
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: u32, dim: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMessage {
    pub sender: u32,
    pub iteration: u64,
    pub entries: Vec<(u32, f64)>,
}

impl SparseMessage {
    /// Pack the coordinates `support` of `g`; zero values on the support are kept.
    pub fn from_support(sender: u32, iteration: u64, g: &DenseVector, support: &[usize]) -> Self {
        let entries = support.iter().map(|&i| (i as u32, g[i])).collect();
        Self { sender, iteration, entries }
    }

    pub fn check(&self, dim: usize) -> Result<(), CodecError> {
        for (n, w) in self.entries.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(CodecError::BadOrdering(n + 1));
            }
        }
        if let Some(&(index, _)) = self.entries.iter().find(|(i, _)| *i as usize >= dim) {
            return Err(CodecError::IndexOutOfRange { index, dim });
        }
        Ok(())
    }

    pub fn densify(&self, dim: usize) -> Result<DenseVector, CodecError> {
        self.check(dim)?;
        let mut out = vec![0.0; dim];
        for &(i, v) in &self.entries {
            out[i as usize] = v;
        }
        Ok(DenseVector::from_vec_unchecked(out))
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_BYTES + ENTRY_BYTES * self.entries.len()
    }

    /// Payload bytes, excluding the header.
    pub fn payload_len(&self) -> usize {
        ENTRY_BYTES * self.entries.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&self.sender.to_le_bytes());
        out.extend_from_slice(&self.iteration.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for &(i, v) in &self.entries {
            out.extend_from_slice(&i.to_le_bytes());
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let need = |n: usize| {
            if bytes.len() < n {
                Err(CodecError::Truncated { needed: n, available: bytes.len() })
            } else {
                Ok(())
            }
        };
        need(HEADER_BYTES)?;
        let sender = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
        let iteration = u64::from_le_bytes(bytes[4..12].try_into().unwrap());
        let count = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let total = count
            .checked_mul(ENTRY_BYTES)
            .and_then(|b| b.checked_add(HEADER_BYTES))
            .ok_or(CodecError::Truncated { needed: usize::MAX, available: bytes.len() })?;
        need(total)?;
        if bytes.len() > total {
            return Err(CodecError::TrailingBytes(bytes.len() - total));
        }
        let mut entries = Vec::with_capacity(count);
        for chunk in bytes[HEADER_BYTES..].chunks_exact(ENTRY_BYTES) {
            let i = u32::from_le_bytes(chunk[0..4].try_into().unwrap());
            let v = f64::from_le_bytes(chunk[4..12].try_into().unwrap());
            if let Some(&(prev, _)) = entries.last() {
                if i <= prev {
                    return Err(CodecError::BadOrdering(entries.len()));
                }
            }
            entries.push((i, v));
        }
        Ok(Self { sender, iteration, entries })
    }
}
