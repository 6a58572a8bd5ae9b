//! One-hidden-layer tanh network without biases.
//!
//! `sigma = W1 · input`, `phi = transfer(sigma)`, `output = W2 · phi`.
//! Both weight matrices are stored row-major: `w1` is `hidden × in`, `w2` is
//! `out × hidden`.

use serde::{Deserialize, Serialize};

use crate::rng::SeededRng;
use crate::{Error, Result};

/// Largest double strictly below one.
const ONE_MINUS: f64 = 1.0 - f64::EPSILON / 2.0;
const SATURATION_SIGMA: f64 = 40.0;

/// Bipolar sigmoid `(1 - e^-s) / (1 + e^-s)`, which equals `tanh(s / 2)`.
///
/// Saturates to `±(1 - 2^-53)` so the output always stays in the open
/// interval `(-1, 1)`.
#[inline]
pub(crate) fn transfer(sigma: f64) -> f64 {
    if sigma > SATURATION_SIGMA {
        return ONE_MINUS;
    }
    if sigma < -SATURATION_SIGMA {
        return -ONE_MINUS;
    }
    let e = (-sigma).exp();
    ((1.0 - e) / (1.0 + e)).clamp(-ONE_MINUS, ONE_MINUS)
}

/// Checked form of the hidden-layer transfer function.
pub fn tanh_transfer(sigma: f64) -> Result<f64> {
    if !sigma.is_finite() {
        return Err(Error::InvalidInput(format!(
            "transfer input must be finite, got {sigma}"
        )));
    }
    Ok(transfer(sigma))
}

/// Derivative of the transfer function expressed through its output.
#[inline]
pub fn transfer_slope(phi: f64) -> f64 {
    0.5 * (1.0 - phi * phi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoLayerNet {
    in_dim: usize,
    hidden_dim: usize,
    out_dim: usize,
    w1: Vec<f64>,
    w2: Vec<f64>,
}

/// Intermediate quantities of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub sigma: Vec<f64>,
    pub phi: Vec<f64>,
    pub output: Vec<f64>,
}

impl TwoLayerNet {
    pub fn zeros(in_dim: usize, hidden_dim: usize, out_dim: usize) -> Result<Self> {
        if in_dim == 0 || hidden_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidInput(format!(
                "network dimensions must be positive, got {in_dim}x{hidden_dim}x{out_dim}"
            )));
        }
        Ok(Self {
            in_dim,
            hidden_dim,
            out_dim,
            w1: vec![0.0; hidden_dim * in_dim],
            w2: vec![0.0; out_dim * hidden_dim],
        })
    }

    /// Builds a network from row-major weight buffers.
    pub fn from_weights(
        in_dim: usize,
        hidden_dim: usize,
        out_dim: usize,
        w1: Vec<f64>,
        w2: Vec<f64>,
    ) -> Result<Self> {
        let mut net = Self::zeros(in_dim, hidden_dim, out_dim)?;
        if w1.len() != hidden_dim * in_dim || w2.len() != out_dim * hidden_dim {
            return Err(Error::Dimension(format!(
                "expected w1 len {} and w2 len {}, got {} and {}",
                hidden_dim * in_dim,
                out_dim * hidden_dim,
                w1.len(),
                w2.len()
            )));
        }
        if w1.iter().chain(&w2).any(|w| !w.is_finite()) {
            return Err(Error::InvalidInput("weights must be finite".into()));
        }
        net.w1 = w1;
        net.w2 = w2;
        Ok(net)
    }

    /// Draws every entry uniformly from `[-scale, scale]`, `w1` first, both
    /// in row-major order.
    pub fn random(
        in_dim: usize,
        hidden_dim: usize,
        out_dim: usize,
        scale: f64,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "init scale must be positive, got {scale}"
            )));
        }
        let mut net = Self::zeros(in_dim, hidden_dim, out_dim)?;
        for w in net.w1.iter_mut().chain(net.w2.iter_mut()) {
            *w = rng.symmetric(scale);
        }
        Ok(net)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn w1(&self) -> &[f64] {
        &self.w1
    }

    pub fn w2(&self) -> &[f64] {
        &self.w2
    }

    pub fn w1_mut(&mut self) -> &mut [f64] {
        &mut self.w1
    }

    pub fn w2_mut(&mut self) -> &mut [f64] {
        &mut self.w2
    }

    /// Input-to-hidden weight from input `j` to hidden node `i`.
    #[inline]
    pub fn w1_at(&self, i: usize, j: usize) -> f64 {
        self.w1[i * self.in_dim + j]
    }

    /// Hidden-to-output weight from hidden node `j` to output `i`.
    #[inline]
    pub fn w2_at(&self, i: usize, j: usize) -> f64 {
        self.w2[i * self.hidden_dim + j]
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.w1.iter().chain(&self.w2).fold(0.0_f64, |m, w| {
            if w.is_nan() {
                f64::NAN
            } else {
                m.max(w.abs())
            }
        })
    }

    pub fn forward(&self, input: &[f64]) -> Result<ForwardTrace> {
        if input.len() != self.in_dim {
            return Err(Error::Dimension(format!(
                "network expects {} inputs, got {}",
                self.in_dim,
                input.len()
            )));
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("network input must be finite".into()));
        }
        Ok(self.forward_unchecked(input))
    }

    pub(crate) fn forward_unchecked(&self, input: &[f64]) -> ForwardTrace {
        let sigma: Vec<f64> = self
            .w1
            .chunks_exact(self.in_dim)
            .map(|row| row.iter().zip(input).map(|(w, x)| w * x).sum())
            .collect();
        let phi: Vec<f64> = sigma.iter().map(|&s| transfer(s)).collect();
        let output = self
            .w2
            .chunks_exact(self.hidden_dim)
            .map(|row| row.iter().zip(&phi).map(|(w, p)| w * p).sum())
            .collect();
        ForwardTrace { sigma, phi, output }
    }
}

/// Seeded uniform initialization on `[-scale, scale]`.
pub fn init_weights(
    in_dim: usize,
    hidden_dim: usize,
    out_dim: usize,
    rng_seed: u64,
    scale: f64,
) -> Result<TwoLayerNet> {
    let mut rng = SeededRng::new(rng_seed);
    TwoLayerNet::random(in_dim, hidden_dim, out_dim, scale, &mut rng)
}
