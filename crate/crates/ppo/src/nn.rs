//! Dense layers over a flat parameter vector.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    Elu,
    Tanh,
    Relu,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Self::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
            Self::Tanh => z.tanh(),
            Self::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `y`.
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Self::Elu => {
                if y > 0.0 {
                    1.0
                } else {
                    y + 1.0
                }
            }
            Self::Tanh => 1.0 - y * y,
            Self::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Affine map `y = x W + b` with `W` stored input-major (`n_in x n_out`)
/// at `offset`, followed by the bias.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dense {
    pub offset: usize,
    pub n_in: usize,
    pub n_out: usize,
}

impl Dense {
    pub fn n_params(&self) -> usize {
        (self.n_in + 1) * self.n_out
    }

    fn bias_offset(&self) -> usize {
        self.offset + self.n_in * self.n_out
    }

    /// `x` holds `batch` rows of `n_in`; returns `batch` rows of `n_out`.
    pub fn forward(&self, params: &[f64], x: &[f64], batch: usize) -> Vec<f64> {
        let (n_in, n_out) = (self.n_in, self.n_out);
        debug_assert_eq!(x.len(), batch * n_in);
        let w = &params[self.offset..self.bias_offset()];
        let b = &params[self.bias_offset()..self.bias_offset() + n_out];
        let mut y = vec![0.0; batch * n_out];
        for (xr, yr) in x.chunks_exact(n_in).zip(y.chunks_exact_mut(n_out)) {
            yr.copy_from_slice(b);
            for (xi, wr) in xr.iter().zip(w.chunks_exact(n_out)) {
                if *xi != 0.0 {
                    for (yj, wj) in yr.iter_mut().zip(wr) {
                        *yj += xi * wj;
                    }
                }
            }
        }
        y
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx` when
    /// `need_dx` is set.
    pub fn backward(&self, params: &[f64], x: &[f64], dy: &[f64], batch: usize, grad: &mut [f64], need_dx: bool) -> Vec<f64> {
        let (n_in, n_out) = (self.n_in, self.n_out);
        let (wo, bo) = (self.offset, self.bias_offset());
        let w = &params[wo..bo];
        let mut dx = if need_dx { vec![0.0; batch * n_in] } else { Vec::new() };
        for s in 0..batch {
            let xr = &x[s * n_in..(s + 1) * n_in];
            let dyr = &dy[s * n_out..(s + 1) * n_out];
            {
                let (gw, gb) = grad[wo..bo + n_out].split_at_mut(n_in * n_out);
                for (g, d) in gb.iter_mut().zip(dyr) {
                    *g += d;
                }
                for (xi, gr) in xr.iter().zip(gw.chunks_exact_mut(n_out)) {
                    if *xi != 0.0 {
                        for (g, d) in gr.iter_mut().zip(dyr) {
                            *g += xi * d;
                        }
                    }
                }
            }
            if need_dx {
                for (dxi, wr) in dx[s * n_in..(s + 1) * n_in].iter_mut().zip(w.chunks_exact(n_out)) {
                    *dxi = wr.iter().zip(dyr).map(|(a, b)| a * b).sum();
                }
            }
        }
        dx
    }
}

/// Multi-layer perceptron: activation after every layer but the last.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub activation: Activation,
}

/// Layer inputs and the final output of an MLP forward pass.
#[derive(Clone, Debug)]
pub struct MlpCache {
    pub acts: Vec<Vec<f64>>,
    pub batch: usize,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }
}

impl Mlp {
    /// Lays the layers out contiguously from `offset`.
    pub fn new(offset: usize, n_in: usize, hidden: &[usize], n_out: usize, activation: Activation) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut off = offset;
        let mut prev = n_in;
        for &h in hidden.iter().chain(std::iter::once(&n_out)) {
            let d = Dense { offset: off, n_in: prev, n_out: h };
            off += d.n_params();
            layers.push(d);
            prev = h;
        }
        Self { layers, activation }
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Dense::n_params).sum()
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_out(&self) -> usize {
        self.layers.last().unwrap().n_out
    }

    pub fn forward(&self, params: &[f64], x: Vec<f64>, batch: usize) -> MlpCache {
        let mut acts = vec![x];
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut y = layer.forward(params, acts.last().unwrap(), batch);
            if i < last {
                y.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            acts.push(y);
        }
        MlpCache { acts, batch }
    }

    /// Backpropagates `dout`; returns `dL/dx` when `need_dx` is set.
    pub fn backward(&self, params: &[f64], cache: &MlpCache, dout: Vec<f64>, grad: &mut [f64], need_dx: bool) -> Vec<f64> {
        let mut dy = dout;
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            if i < last {
                for (d, y) in dy.iter_mut().zip(&cache.acts[i + 1]) {
                    *d *= self.activation.derivative_from_output(*y);
                }
            }
            dy = layer.backward(params, &cache.acts[i], &dy, cache.batch, grad, i > 0 || need_dx);
        }
        dy
    }
}
