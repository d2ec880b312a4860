//! The trainable linear adapter.
//!
//! An adapter is a square matrix `W` applied on top of frozen base
//! embeddings, followed by L2 normalization: `g(v) = normalize(W v)`. Pair
//! scores downstream are `cos(g(r), g(j)) / temperature`. `W` starts at the
//! identity, so an untrained adapter scores exactly like raw cosine.

use crate::error::{Error, Result};

/// Adapter parameters: a row-major `dim x dim` matrix plus the scoring
/// temperature and the seed it was (or will be) trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterParams {
    dim: usize,
    temperature: f64,
    seed: u64,
    w: Vec<f64>,
}

impl AdapterParams {
    /// Identity-initialized adapter. `temperature` must be positive.
    pub fn identity(dim: usize, temperature: f64, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParam { name: "dim".into(), detail: "must be positive".into() });
        }
        validate_temperature(temperature)?;
        let mut w = vec![0.0; dim * dim];
        for i in 0..dim {
            w[i * dim + i] = 1.0;
        }
        Ok(AdapterParams { dim, temperature, seed, w })
    }

    /// Adapter with explicit weights, row-major, length `dim * dim`.
    pub fn from_weights(w: Vec<f64>, dim: usize, temperature: f64, seed: u64) -> Result<Self> {
        if w.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                context: "adapter weights".into(),
                expected: dim * dim,
                got: w.len(),
            });
        }
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { context: "adapter weights".into() });
        }
        validate_temperature(temperature)?;
        Ok(AdapterParams { dim, temperature, seed, w })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Row-major weights.
    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    /// Mutable weights, for optimizer updates.
    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.w
    }

    /// True if `W` is exactly the identity.
    pub fn is_identity(&self) -> bool {
        self.w.iter().enumerate().all(|(idx, x)| {
            let (i, j) = (idx / self.dim, idx % self.dim);
            *x == if i == j { 1.0 } else { 0.0 }
        })
    }

    /// `W v`, without normalization.
    pub fn project_raw(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "adapter input".into(),
                expected: self.dim,
                got: v.len(),
            });
        }
        let mut out = vec![0.0; self.dim];
        for i in 0..self.dim {
            let row = &self.w[i * self.dim..(i + 1) * self.dim];
            out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        Ok(out)
    }

    /// `g(v) = normalize(W v)`. Errors if `W v` has zero norm (e.g. a
    /// degenerate `W`) or non-finite entries.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        crate::embedder::normalize(&self.project_raw(v)?)
    }
}

fn validate_temperature(temperature: f64) -> Result<()> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::InvalidParam {
            name: "temperature".into(),
            detail: format!("must be positive and finite, got {temperature}"),
        });
    }
    Ok(())
}
