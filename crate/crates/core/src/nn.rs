//! Small dense network with leaky-ReLU hidden layers, trained by plain SGD on a
//! squared TD error at the taken action.
//!
//! # Parameter file format
//!
//! Plain UTF-8 text, one item per line:
//!
//! ```text
//! apcharge-mlp 1
//! slope <f64>
//! layers <count>
//! dense <inputs> <outputs>
//! <outputs*inputs weights, row-major by output, space separated>
//! <outputs biases, space separated>
//! ... one dense/weights/bias triple per layer
//! ```
//!
//! Numbers use Rust's shortest round-trip formatting, so save/load is lossless.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FORMAT_TAG: &str = "apcharge-mlp";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs × inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn affine(&self, x: &[f64], z: &mut [f64]) {
        for (o, zo) in z.iter_mut().enumerate() {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            *zo = self.bias[o] + dot(row, x);
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Layer sizes and activation of a [`Mlp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpShape {
    pub hidden: Vec<usize>,
    pub leaky_slope: f64,
}

impl Default for MlpShape {
    fn default() -> Self {
        MlpShape {
            hidden: vec![64, 64],
            leaky_slope: 0.01,
        }
    }
}

/// One supervised target: push output `action` of `input` towards `target`.
#[derive(Debug, Clone, Copy)]
pub struct TrainSample<'a> {
    pub input: &'a [f64],
    pub action: usize,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
    slope: f64,
}

/// Gradient of the loss with the same layout as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub layers: Vec<Dense>,
}

impl Gradient {
    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }
}

impl Mlp {
    /// Network with all parameters zero.
    pub fn zeros(sizes: &[usize], slope: f64) -> Self {
        assert!(sizes.len() >= 2, "need at least an input and an output layer");
        let layers = sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Mlp { layers, slope }
    }

    /// Seeded initialisation, uniform in `±1/sqrt(fan_in)` for weights and biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], slope: f64, rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes, slope);
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *w = rng.random_range(-bound..=bound);
            }
        }
        net
    }

    pub fn with_shape<R: Rng + ?Sized>(inputs: usize, outputs: usize, shape: &MlpShape, rng: &mut R) -> Self {
        let mut sizes = vec![inputs];
        sizes.extend(&shape.hidden);
        sizes.push(outputs);
        Self::new(&sizes, shape.leaky_slope, rng)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_size(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_size()];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        let mut it = flat.iter();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = *it.next().unwrap();
            }
        }
    }

    /// Overwrites every parameter with `other`'s (target-network sync).
    pub fn copy_from(&mut self, other: &Mlp) {
        assert_eq!(self.sizes(), other.sizes());
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.copy_from_slice(&b.weights);
            a.bias.copy_from_slice(&b.bias);
        }
        self.slope = other.slope;
    }

    #[inline]
    fn activate(&self, z: &mut [f64]) {
        for v in z {
            if *v < 0.0 {
                *v *= self.slope;
            }
        }
    }

    /// Q-values for one input.
    ///
    /// # Panics
    /// If `input.len()` differs from the input layer width.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        self.forward_into(input, &mut Vec::new(), &mut out);
        out
    }

    /// Allocation-reusing forward pass; `scratch` and `out` are resized as needed.
    pub fn forward_into(&self, input: &[f64], scratch: &mut Vec<f64>, out: &mut Vec<f64>) {
        assert_eq!(input.len(), self.input_size(), "input dimension mismatch");
        let last = self.layers.len() - 1;
        let mut cur: Vec<f64> = std::mem::take(scratch);
        cur.clear();
        cur.extend_from_slice(input);
        for (i, layer) in self.layers.iter().enumerate() {
            out.clear();
            out.resize(layer.outputs, 0.0);
            layer.affine(&cur, out);
            if i != last {
                self.activate(out);
                std::mem::swap(&mut cur, out);
            }
        }
        *scratch = cur;
    }

    /// Mean squared error over the batch at the taken actions, and its gradient.
    pub fn loss_and_gradient(&self, batch: &[TrainSample<'_>]) -> (f64, Gradient) {
        let mut grad = Gradient {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs, l.outputs))
                .collect(),
        };
        if batch.is_empty() {
            return (0.0, grad);
        }
        let n = self.layers.len();
        let scale = 1.0 / batch.len() as f64;
        // acts[0] is the input; acts[i+1] is the activated output of layer i.
        let mut acts: Vec<Vec<f64>> = std::iter::once(self.input_size())
            .chain(self.layers.iter().map(|l| l.outputs))
            .map(|w| vec![0.0; w])
            .collect();
        let mut delta: Vec<f64> = Vec::new();
        let mut prev_delta: Vec<f64> = Vec::new();
        let mut loss = 0.0;

        for s in batch {
            assert_eq!(s.input.len(), self.input_size(), "input dimension mismatch");
            assert!(s.action < self.output_size(), "action index out of range");
            acts[0].copy_from_slice(s.input);
            for i in 0..n {
                let (lo, hi) = acts.split_at_mut(i + 1);
                self.layers[i].affine(&lo[i], &mut hi[0]);
                if i + 1 != n {
                    self.activate(&mut hi[0]);
                }
            }
            let q = acts[n][s.action];
            let err = q - s.target;
            loss += err * err * scale;

            // Output layer: only the taken action carries error.
            let d_out = 2.0 * err * scale;
            let out_layer = &self.layers[n - 1];
            let g = &mut grad.layers[n - 1];
            let k = out_layer.inputs;
            axpy(d_out, &acts[n - 1], &mut g.weights[s.action * k..(s.action + 1) * k]);
            g.bias[s.action] += d_out;
            if n == 1 {
                continue;
            }
            delta.clear();
            delta.extend(
                out_layer.weights[s.action * k..(s.action + 1) * k]
                    .iter()
                    .map(|w| w * d_out),
            );

            for i in (0..n - 1).rev() {
                // delta is dL/d(activated output of layer i); fold in the activation derivative.
                for (d, a) in delta.iter_mut().zip(&acts[i + 1]) {
                    if *a <= 0.0 {
                        *d *= self.slope;
                    }
                }
                let layer = &self.layers[i];
                let g = &mut grad.layers[i];
                let k = layer.inputs;
                for (o, d) in delta.iter().enumerate() {
                    if *d != 0.0 {
                        axpy(*d, &acts[i], &mut g.weights[o * k..(o + 1) * k]);
                    }
                    g.bias[o] += d;
                }
                if i > 0 {
                    prev_delta.clear();
                    prev_delta.resize(k, 0.0);
                    for (o, d) in delta.iter().enumerate() {
                        if *d != 0.0 {
                            axpy(*d, &layer.weights[o * k..(o + 1) * k], &mut prev_delta);
                        }
                    }
                    std::mem::swap(&mut delta, &mut prev_delta);
                }
            }
        }
        (loss, grad)
    }

    /// One SGD step on the batch; returns the pre-step loss.
    pub fn sgd_step(&mut self, batch: &[TrainSample<'_>], learning_rate: f64) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Training("empty minibatch".into()));
        }
        let (loss, grad) = self.loss_and_gradient(batch);
        if !loss.is_finite() || grad.layers.iter().any(|l| l.weights.iter().chain(&l.bias).any(|v| !v.is_finite())) {
            return Err(Error::Training(format!("non-finite loss or gradient (loss = {loss})")));
        }
        if learning_rate == 0.0 {
            return Ok(loss);
        }
        for (p, g) in self.layers.iter_mut().zip(&grad.layers) {
            axpy(-learning_rate, &g.weights, &mut p.weights);
            axpy(-learning_rate, &g.bias, &mut p.bias);
        }
        Ok(loss)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{FORMAT_TAG} {FORMAT_VERSION}");
        let _ = writeln!(s, "slope {}", self.slope);
        let _ = writeln!(s, "layers {}", self.layers.len());
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        for l in &self.layers {
            let _ = writeln!(s, "dense {} {}", l.inputs, l.outputs);
            let _ = writeln!(s, "{}", join(&l.weights));
            let _ = writeln!(s, "{}", join(&l.bias));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Format(m.to_string());
        let mut lines = text.lines();
        let mut next = || lines.next().ok_or_else(|| bad("unexpected end of file"));
        let header = next()?;
        let mut h = header.split_whitespace();
        if h.next() != Some(FORMAT_TAG) {
            return Err(bad("missing format tag"));
        }
        match h.next().and_then(|v| v.parse::<u32>().ok()) {
            Some(FORMAT_VERSION) => {}
            other => return Err(Error::Format(format!("unsupported version {other:?}"))),
        }
        let field = |line: &str, name: &str| -> Result<String> {
            line.strip_prefix(name)
                .map(|r| r.trim().to_string())
                .ok_or_else(|| Error::Format(format!("expected `{name}`")))
        };
        let slope: f64 = field(next()?, "slope")?.parse().map_err(|_| bad("bad slope"))?;
        let count: usize = field(next()?, "layers")?.parse().map_err(|_| bad("bad layer count"))?;
        let parse_vec = |line: &str, len: usize| -> Result<Vec<f64>> {
            let v = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad("bad number"))?;
            if v.len() != len {
                return Err(Error::Format(format!("expected {len} values, found {}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(bad("non-finite parameter"));
            }
            Ok(v)
        };
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let dims = field(next()?, "dense")?;
            let mut d = dims.split_whitespace().map(|t| t.parse::<usize>());
            let (inputs, outputs) = match (d.next(), d.next()) {
                (Some(Ok(i)), Some(Ok(o))) => (i, o),
                _ => return Err(bad("bad layer dimensions")),
            };
            if let Some(prev) = layers.last() {
                let prev: &Dense = prev;
                if prev.outputs != inputs {
                    return Err(bad("consecutive layer dimensions disagree"));
                }
            }
            let weights = parse_vec(next()?, inputs * outputs)?;
            let bias = parse_vec(next()?, outputs)?;
            layers.push(Dense { inputs, outputs, weights, bias });
        }
        if layers.is_empty() {
            return Err(bad("no layers"));
        }
        Ok(Mlp { layers, slope })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Straight-line re-evaluation from the flat parameter list.
    fn reference_forward(sizes: &[usize], flat: &[f64], slope: f64, x: &[f64]) -> Vec<f64> {
        let mut off = 0;
        let mut a = x.to_vec();
        for (li, w) in sizes.windows(2).enumerate() {
            let (nin, nout) = (w[0], w[1]);
            let mut z = vec![0.0; nout];
            for o in 0..nout {
                let mut s = 0.0;
                for i in 0..nin {
                    s += flat[off + o * nin + i] * a[i];
                }
                z[o] = s;
            }
            off += nin * nout;
            for o in 0..nout {
                z[o] += flat[off + o];
            }
            off += nout;
            if li + 2 < sizes.len() {
                for v in &mut z {
                    if *v < 0.0 {
                        *v *= slope;
                    }
                }
            }
            a = z;
        }
        a
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[2, 8, 4], 0.01);
        assert_eq!(net.forward(&[0.3, -2.0]), vec![0.0; 4]);
    }

    #[test]
    fn identity_network_passes_positive_input() {
        let mut net = Mlp::zeros(&[1, 1], 0.01);
        net.layers_mut()[0].weights[0] = 1.0;
        assert_eq!(net.forward(&[0.7]), vec![0.7]);
        let mut net = Mlp::zeros(&[1, 1, 1], 0.01);
        net.layers_mut()[0].weights[0] = 1.0;
        net.layers_mut()[1].weights[0] = 1.0;
        assert_eq!(net.forward(&[2.5]), vec![2.5]);
        assert!((net.forward(&[-2.0])[0] + 0.02).abs() < 1e-15);
    }

    #[test]
    fn forward_matches_reference_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sizes = [2, 16, 4];
        let net = Mlp::new(&sizes, 0.01, &mut rng);
        let flat = net.params_flat();
        for _ in 0..50 {
            let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let a = net.forward(&x);
            let b = reference_forward(&sizes, &flat, 0.01, &x);
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_is_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let net = Mlp::new(&[2, 64, 64, 100], 0.01, &mut rng);
        assert_eq!(net.forward(&[0.2, 0.9]), net.forward(&[0.2, 0.9]));
    }

    #[test]
    #[should_panic(expected = "dimension")]
    fn dimension_mismatch_panics() {
        Mlp::zeros(&[2, 3], 0.01).forward(&[1.0]);
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut net = Mlp::new(&[2, 8, 4], 0.01, &mut rng);
        let before = net.clone();
        let x = [0.5, 0.5];
        net.sgd_step(&[TrainSample { input: &x, action: 1, target: 3.0 }], 0.0)
            .unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn repeated_steps_reduce_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut net = Mlp::new(&[2, 8, 4], 0.01, &mut rng);
        let x = [0.4, -0.3];
        let batch = [TrainSample { input: &x, action: 2, target: 1.5 }];
        let mut last = f64::INFINITY;
        for _ in 0..100 {
            let loss = net.sgd_step(&batch, 0.01).unwrap();
            assert!(loss < last, "{loss} !< {last}");
            last = loss;
        }
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let sizes = [2, 8, 4];
        let net = Mlp::new(&sizes, 0.01, &mut rng);
        let inputs: Vec<[f64; 2]> = (0..6)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let batch: Vec<TrainSample> = inputs
            .iter()
            .enumerate()
            .map(|(i, x)| TrainSample { input: x, action: i % 4, target: rng.random_range(-1.0..1.0) })
            .collect();
        let (_, grad) = net.loss_and_gradient(&batch);
        let analytic = grad.flat();
        let flat = net.params_flat();
        let h = 1e-5;
        let mut probe = net.clone();
        for k in 0..flat.len() {
            let mut p = flat.clone();
            p[k] += h;
            probe.set_params_flat(&p);
            let up = probe.loss_and_gradient(&batch).0;
            p[k] -= 2.0 * h;
            probe.set_params_flat(&p);
            let down = probe.loss_and_gradient(&batch).0;
            let numeric = (up - down) / (2.0 * h);
            let rel = (numeric - analytic[k]).abs() / numeric.abs().max(analytic[k].abs()).max(1e-6);
            assert!(rel < 1e-4, "param {k}: analytic {} numeric {numeric}", analytic[k]);
        }
    }

    #[test]
    fn copy_gives_identical_outputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let a = Mlp::new(&[2, 16, 16, 10], 0.01, &mut rng);
        let mut b = Mlp::new(&[2, 16, 16, 10], 0.01, &mut rng);
        assert_ne!(a.forward(&[0.1, 0.2]), b.forward(&[0.1, 0.2]));
        b.copy_from(&a);
        assert_eq!(a.forward(&[0.1, 0.2]), b.forward(&[0.1, 0.2]));
    }

    #[test]
    fn text_format_is_lossless() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = Mlp::new(&[2, 5, 3], 0.02, &mut rng);
        let b = Mlp::from_text(&a.to_text()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(Mlp::from_text("").is_err());
        assert!(Mlp::from_text("apcharge-mlp 2\nslope 0.01\nlayers 0\n").is_err());
        let good = Mlp::zeros(&[2, 2], 0.01).to_text();
        let truncated: String = good.lines().take(4).collect::<Vec<_>>().join("\n");
        assert!(Mlp::from_text(&truncated).is_err());
    }
}
