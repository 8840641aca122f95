//! Fully connected network with leaky-ReLU hidden layers and a linear
//! output, parameters stored flat so optimizers and clipping see one slice.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    /// Layer widths, input first.
    pub sizes: Vec<usize>,
    /// Leaky-ReLU slope for negative inputs.
    pub slope: f64,
    /// Per layer: weights (`out × in`, row-major) then biases.
    pub params: Vec<f64>,
}

/// Forward activations kept for backpropagation.
pub struct Cache {
    pub batch: usize,
    /// `inputs[l]` is the input of layer `l` (`inputs[0]` is the network input).
    inputs: Vec<Vec<f64>>,
    /// Pre-activations per layer; the last one is the network output.
    pre: Vec<Vec<f64>>,
}

impl Cache {
    pub fn output(&self) -> &[f64] {
        self.pre.last().expect("at least one layer")
    }
}

impl Mlp {
    pub fn zeros(sizes: &[usize], slope: f64) -> Self {
        let n = Self::count(sizes);
        Self {
            sizes: sizes.to_vec(),
            slope,
            params: vec![0.0; n],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot(sizes: &[usize], slope: f64, rng: &mut Rng) -> Self {
        let mut m = Self::zeros(sizes, slope);
        for l in 0..m.n_layers() {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let (w, _) = m.offsets(l);
            for v in &mut m.params[w..w + fan_in * fan_out] {
                *v = rng.random_range(-a..a);
            }
        }
        m
    }

    fn count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty")
    }

    /// Offsets of layer `l`'s weights and biases in `params`.
    fn offsets(&self, l: usize) -> (usize, usize) {
        let w = Self::count(&self.sizes[..=l]);
        (w, w + self.sizes[l] * self.sizes[l + 1])
    }

    fn act(&self, z: f64) -> f64 {
        if z > 0.0 {
            z
        } else {
            self.slope * z
        }
    }

    fn act_grad(&self, z: f64) -> f64 {
        if z > 0.0 {
            1.0
        } else {
            self.slope
        }
    }

    /// Runs a row-major batch through the network.
    pub fn forward(&self, x: &[f64], batch: usize) -> Cache {
        debug_assert_eq!(x.len(), batch * self.input_dim());
        let mut inputs = vec![x.to_vec()];
        let mut pre = Vec::with_capacity(self.n_layers());
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (wo, bo) = self.offsets(l);
            let w = &self.params[wo..bo];
            let b = &self.params[bo..bo + n_out];
            let h = inputs.last().expect("input");
            let mut z = vec![0.0; batch * n_out];
            for i in 0..batch {
                let hi = &h[i * n_in..(i + 1) * n_in];
                for o in 0..n_out {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    z[i * n_out + o] = b[o] + row.iter().zip(hi).map(|(a, c)| a * c).sum::<f64>();
                }
            }
            if l + 1 < self.n_layers() {
                inputs.push(z.iter().map(|&v| self.act(v)).collect());
            }
            pre.push(z);
        }
        Cache { batch, inputs, pre }
    }

    pub fn predict(&self, x: &[f64], batch: usize) -> Vec<f64> {
        self.forward(x, batch).pre.pop().expect("output")
    }

    /// Gradients of `Σ dout ⊙ output` with respect to the parameters and
    /// the inputs.
    pub fn backward(&self, cache: &Cache, dout: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let batch = cache.batch;
        let mut grad = vec![0.0; self.n_params()];
        let mut delta = dout.to_vec();
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (wo, bo) = self.offsets(l);
            let h = &cache.inputs[l];
            for i in 0..batch {
                let d = &delta[i * n_out..(i + 1) * n_out];
                let hi = &h[i * n_in..(i + 1) * n_in];
                for o in 0..n_out {
                    if d[o] == 0.0 {
                        continue;
                    }
                    let g = &mut grad[wo + o * n_in..wo + (o + 1) * n_in];
                    for (gv, hv) in g.iter_mut().zip(hi) {
                        *gv += d[o] * hv;
                    }
                    grad[bo + o] += d[o];
                }
            }
            let w = &self.params[wo..bo];
            let mut below = vec![0.0; batch * n_in];
            for i in 0..batch {
                let d = &delta[i * n_out..(i + 1) * n_out];
                let dst = &mut below[i * n_in..(i + 1) * n_in];
                for o in 0..n_out {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    for (x, wv) in dst.iter_mut().zip(row) {
                        *x += d[o] * wv;
                    }
                }
            }
            if l > 0 {
                let z = &cache.pre[l - 1];
                for (v, &zv) in below.iter_mut().zip(z) {
                    *v *= self.act_grad(zv);
                }
            }
            delta = below;
        }
        (grad, delta)
    }

    /// Input gradient `∇ₓ f(x)` of a scalar-output network, per row.
    pub fn input_gradient(&self, x: &[f64], batch: usize) -> Vec<f64> {
        let cache = self.forward(x, batch);
        self.backward(&cache, &vec![1.0; batch]).1
    }

    /// Gradient penalty `λ · mean_i (‖∇ₓ f(x_i)‖ − 1)²` of a scalar-output
    /// network and its gradient with respect to the parameters.
    ///
    /// The network is piecewise linear, so on each sample the input gradient
    /// is `W₁ᵀ D₁ W₂ᵀ D₂ ⋯ W_Lᵀ` with fixed activation masks `D_l`. For a
    /// direction `u = ∂P/∂g`, `uᵀg` is multilinear in the weight matrices and
    /// `∂(uᵀg)/∂W_l = δ_l t_{l−1}ᵀ`, where `δ_l` is the ordinary backward
    /// signal of the output and `t` is `u` pushed forward through the masked
    /// linear layers. Biases only move the masks, so their gradient is zero.
    pub fn gradient_penalty(&self, x: &[f64], batch: usize, weight: f64) -> (f64, Vec<f64>) {
        assert_eq!(self.output_dim(), 1, "penalty needs a scalar output");
        let cache = self.forward(x, batch);
        let layers = self.n_layers();
        let mut grad = vec![0.0; self.n_params()];
        let mut value = 0.0;
        for i in 0..batch {
            // backward signals δ_l (w.r.t. pre-activations of layer l)
            let mut deltas: Vec<Vec<f64>> = vec![Vec::new(); layers];
            deltas[layers - 1] = vec![1.0];
            let mut g = Vec::new();
            for l in (0..layers).rev() {
                let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
                let (wo, bo) = self.offsets(l);
                let w = &self.params[wo..bo];
                let mut below = vec![0.0; n_in];
                for o in 0..n_out {
                    let d = deltas[l][o];
                    for (x, wv) in below.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *x += d * wv;
                    }
                }
                if l > 0 {
                    let z = &cache.pre[l - 1][i * n_in..(i + 1) * n_in];
                    for (v, &zv) in below.iter_mut().zip(z) {
                        *v *= self.act_grad(zv);
                    }
                    deltas[l - 1] = below;
                } else {
                    g = below;
                }
            }
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            value += (norm - 1.0) * (norm - 1.0);
            if norm == 0.0 {
                continue;
            }
            let scale = 2.0 * weight * (norm - 1.0) / (norm * batch as f64);
            let mut t: Vec<f64> = g.iter().map(|v| v * scale).collect();
            for l in 0..layers {
                let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
                let (wo, bo) = self.offsets(l);
                for o in 0..n_out {
                    let d = deltas[l][o];
                    let gw = &mut grad[wo + o * n_in..wo + (o + 1) * n_in];
                    for (gv, tv) in gw.iter_mut().zip(&t) {
                        *gv += d * tv;
                    }
                }
                if l + 1 < layers {
                    let w = &self.params[wo..bo];
                    let z = &cache.pre[l][i * n_out..(i + 1) * n_out];
                    t = (0..n_out)
                        .map(|o| {
                            let s: f64 = w[o * n_in..(o + 1) * n_in]
                                .iter()
                                .zip(&t)
                                .map(|(a, b)| a * b)
                                .sum();
                            s * self.act_grad(z[o])
                        })
                        .collect();
                }
            }
        }
        (weight * value / batch as f64, grad)
    }
}
