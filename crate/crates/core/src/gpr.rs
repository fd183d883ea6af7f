//! Gaussian-process regression with an RBF kernel over a short window of
//! `(slot index, value)` pairs, plus a sliding-window forecaster built on it.

use std::collections::VecDeque;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GprParams {
    /// RBF length-scale ℓ in slots.
    pub length_scale: f64,
    /// Signal variance s² in target units; the window's sample variance when absent.
    pub signal_variance: Option<f64>,
    /// Noise variance σ̂² in target units; `noise_ratio · s²` when absent.
    pub noise_variance: Option<f64>,
    pub noise_ratio: f64,
    /// Diagonal jitter as a fraction of s².
    pub jitter_ratio: f64,
    /// Standardise inputs and targets per window before fitting.
    pub standardize: bool,
}

impl Default for GprParams {
    fn default() -> Self {
        GprParams {
            length_scale: 3.0,
            signal_variance: None,
            noise_variance: None,
            noise_ratio: 1.0,
            jitter_ratio: 1e-8,
            standardize: true,
        }
    }
}

impl GprParams {
    pub fn validate(&self) -> Result<()> {
        let pos = |k: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("gpr.{k}"), "must be > 0"))
            }
        };
        pos("length_scale", self.length_scale)?;
        if let Some(s) = self.signal_variance {
            pos("signal_variance", s)?;
        }
        if let Some(n) = self.noise_variance {
            pos("noise_variance", n)?;
        }
        pos("noise_ratio", self.noise_ratio)?;
        if !(self.jitter_ratio.is_finite() && self.jitter_ratio >= 0.0) {
            return Err(Error::config("gpr.jitter_ratio", "must be >= 0"));
        }
        Ok(())
    }
}

/// `s² · exp(-(a-b)² / (2ℓ²))`.
pub fn rbf(a: f64, b: f64, signal_variance: f64, length_scale: f64) -> f64 {
    let d = a - b;
    signal_variance * (-(d * d) / (2.0 * length_scale * length_scale)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Affine {
    offset: f64,
    scale: f64,
}

impl Affine {
    fn identity() -> Self {
        Affine { offset: 0.0, scale: 1.0 }
    }

    fn fit(values: impl Iterator<Item = f64> + Clone) -> Self {
        let n = values.clone().count() as f64;
        let mean = values.clone().sum::<f64>() / n;
        let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        Affine {
            offset: mean,
            scale: if sd > 0.0 && sd.is_finite() { sd } else { 1.0 },
        }
    }

    fn forward(&self, v: f64) -> f64 {
        (v - self.offset) / self.scale
    }

    fn inverse(&self, v: f64) -> f64 {
        v * self.scale + self.offset
    }
}

/// A fitted GP. Immutable after [`fit`].
#[derive(Debug, Clone)]
pub struct GprModel {
    inputs: Vec<f64>,
    alpha: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    q_map: Affine,
    y_map: Affine,
    length_scale: f64,
    signal_variance: f64,
    noise_variance: f64,
}

/// Fits a GP on `window` (pairs of input and target).
pub fn fit(window: &[(f64, f64)], params: &GprParams) -> Result<GprModel> {
    if window.is_empty() {
        return Err(Error::Numerical("cannot fit a GP on an empty window".into()));
    }
    if window.iter().any(|(q, p)| !q.is_finite() || !p.is_finite()) {
        return Err(Error::Numerical("non-finite training data".into()));
    }
    let (q_map, y_map) = if params.standardize {
        (
            Affine::fit(window.iter().map(|w| w.0)),
            Affine::fit(window.iter().map(|w| w.1)),
        )
    } else {
        (Affine::identity(), Affine::identity())
    };
    let inputs: Vec<f64> = window.iter().map(|w| q_map.forward(w.0)).collect();
    let targets = DVector::from_iterator(window.len(), window.iter().map(|w| y_map.forward(w.1)));

    let y_var = y_map.scale * y_map.scale;
    let signal_variance = match params.signal_variance {
        Some(s) => s / y_var,
        None if params.standardize => 1.0,
        None => {
            let m = targets.mean();
            let v = targets.iter().map(|t| (t - m).powi(2)).sum::<f64>() / targets.len() as f64;
            if v > 0.0 {
                v
            } else {
                1.0
            }
        }
    };
    let noise_variance = match params.noise_variance {
        Some(n) => n / y_var,
        None => params.noise_ratio * signal_variance,
    };
    let length_scale = params.length_scale / q_map.scale;

    let n = inputs.len();
    let mut k = DMatrix::from_fn(n, n, |i, j| rbf(inputs[i], inputs[j], signal_variance, length_scale));
    let diag = noise_variance + params.jitter_ratio * signal_variance;
    for i in 0..n {
        k[(i, i)] += diag;
    }
    let chol = Cholesky::new(k).ok_or_else(|| {
        Error::Numerical("kernel matrix is not positive definite after jitter".into())
    })?;
    let alpha = chol.solve(&targets);
    Ok(GprModel {
        inputs,
        alpha,
        chol,
        q_map,
        y_map,
        length_scale,
        signal_variance,
        noise_variance,
    })
}

impl GprModel {
    fn cross(&self, q: f64) -> DVector<f64> {
        let qs = self.q_map.forward(q);
        DVector::from_iterator(
            self.inputs.len(),
            self.inputs
                .iter()
                .map(|x| rbf(qs, *x, self.signal_variance, self.length_scale)),
        )
    }

    /// Posterior mean at `q`.
    pub fn predict(&self, q: f64) -> f64 {
        self.y_map.inverse(self.cross(q).dot(&self.alpha))
    }

    /// Posterior mean and variance (of the latent function) at `q`.
    pub fn predict_with_variance(&self, q: f64) -> (f64, f64) {
        let ks = self.cross(q);
        let mean = self.y_map.inverse(ks.dot(&self.alpha));
        let v = self.chol.solve(&ks);
        let var = (self.signal_variance - ks.dot(&v)).max(0.0) * self.y_map.scale * self.y_map.scale;
        (mean, var)
    }

    /// Kernel matrix over the (possibly standardised) training inputs, without noise.
    pub fn kernel_matrix(&self) -> DMatrix<f64> {
        let n = self.inputs.len();
        DMatrix::from_fn(n, n, |i, j| {
            rbf(self.inputs[i], self.inputs[j], self.signal_variance, self.length_scale)
        })
    }

    pub fn signal_variance(&self) -> f64 {
        self.signal_variance
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Sliding window of the last `capacity` observations of one quantity, refitted on every push.
///
/// With fewer than two observations it repeats the last one (or `fallback`).
#[derive(Debug, Clone)]
pub struct Forecaster {
    capacity: usize,
    params: GprParams,
    window: VecDeque<(f64, f64)>,
    model: Option<GprModel>,
    fallback: f64,
}

impl Forecaster {
    pub fn new(capacity: usize, params: GprParams, fallback: f64) -> Self {
        assert!(capacity >= 1);
        Forecaster {
            capacity,
            params,
            window: VecDeque::with_capacity(capacity + 1),
            model: None,
            fallback,
        }
    }

    pub fn push(&mut self, q: f64, value: f64) -> Result<()> {
        self.window.push_back((q, value));
        while self.window.len() > self.capacity {
            self.window.pop_front();
        }
        self.model = if self.window.len() >= 2 {
            let pts: Vec<(f64, f64)> = self.window.iter().copied().collect();
            Some(fit(&pts, &self.params)?)
        } else {
            None
        };
        Ok(())
    }

    pub fn predict(&self, q: f64) -> f64 {
        match &self.model {
            Some(m) => m.predict(q),
            None => self.window.back().map(|w| w.1).unwrap_or(self.fallback),
        }
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    pub fn window(&self) -> impl Iterator<Item = &(f64, f64)> {
        self.window.iter()
    }
}
