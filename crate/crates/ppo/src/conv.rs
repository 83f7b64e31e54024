//! Convolutional image encoder over a flat parameter vector.

use serde::{Deserialize, Serialize};

use crate::error::{PpoError, Result};
use crate::nn::{Activation, Dense};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub channels: Vec<usize>,
    pub kernel: usize,
    pub stride: usize,
    pub features: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self { channels: vec![16, 32, 32], kernel: 3, stride: 2, features: 64 }
    }
}

/// Valid (unpadded) 2-D convolution, weights `[out][in][k][k]` then biases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv2d {
    pub offset: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl Conv2d {
    pub fn out_h(&self) -> usize {
        (self.in_h - self.kernel) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w - self.kernel) / self.stride + 1
    }

    pub fn in_len(&self) -> usize {
        self.in_ch * self.in_h * self.in_w
    }

    pub fn out_len(&self) -> usize {
        self.out_ch * self.out_h() * self.out_w()
    }

    pub fn n_params(&self) -> usize {
        self.out_ch * (self.in_ch * self.kernel * self.kernel + 1)
    }

    fn bias_offset(&self) -> usize {
        self.offset + self.out_ch * self.in_ch * self.kernel * self.kernel
    }

    /// One sample, channel-major layout.
    pub fn forward(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let (k, s) = (self.kernel, self.stride);
        let (oh, ow) = (self.out_h(), self.out_w());
        let kk = k * k;
        let mut y = vec![0.0; self.out_len()];
        for o in 0..self.out_ch {
            let bias = params[self.bias_offset() + o];
            let plane = &mut y[o * oh * ow..(o + 1) * oh * ow];
            plane.fill(bias);
            for c in 0..self.in_ch {
                let w = &params[self.offset + (o * self.in_ch + c) * kk..][..kk];
                let xin = &x[c * self.in_h * self.in_w..(c + 1) * self.in_h * self.in_w];
                for ky in 0..k {
                    for kx in 0..k {
                        let wv = w[ky * k + kx];
                        for yy in 0..oh {
                            let row = &xin[(yy * s + ky) * self.in_w + kx..];
                            let out = &mut plane[yy * ow..(yy + 1) * ow];
                            for (xx, v) in out.iter_mut().enumerate() {
                                *v += wv * row[xx * s];
                            }
                        }
                    }
                }
            }
        }
        y
    }

    /// Accumulates parameter gradients for one sample; returns `dL/dx`.
    pub fn backward(&self, params: &[f64], x: &[f64], dy: &[f64], grad: &mut [f64], need_dx: bool) -> Vec<f64> {
        let (k, s) = (self.kernel, self.stride);
        let (oh, ow) = (self.out_h(), self.out_w());
        let kk = k * k;
        let mut dx = if need_dx { vec![0.0; self.in_len()] } else { Vec::new() };
        for o in 0..self.out_ch {
            let dplane = &dy[o * oh * ow..(o + 1) * oh * ow];
            grad[self.bias_offset() + o] += dplane.iter().sum::<f64>();
            for c in 0..self.in_ch {
                let base = self.offset + (o * self.in_ch + c) * kk;
                let plane_off = c * self.in_h * self.in_w;
                let xin = &x[plane_off..plane_off + self.in_h * self.in_w];
                for ky in 0..k {
                    for kx in 0..k {
                        let mut g = 0.0;
                        for yy in 0..oh {
                            let row = &xin[(yy * s + ky) * self.in_w + kx..];
                            let d = &dplane[yy * ow..(yy + 1) * ow];
                            for (xx, dv) in d.iter().enumerate() {
                                g += dv * row[xx * s];
                            }
                        }
                        grad[base + ky * k + kx] += g;
                        if need_dx {
                            let wv = params[base + ky * k + kx];
                            for yy in 0..oh {
                                let d = &dplane[yy * ow..(yy + 1) * ow];
                                let start = plane_off + (yy * s + ky) * self.in_w + kx;
                                for (xx, dv) in d.iter().enumerate() {
                                    dx[start + xx * s] += wv * dv;
                                }
                            }
                        }
                    }
                }
            }
        }
        dx
    }
}

/// Convolutions with an activation after each, flattened into a dense
/// feature layer that is also activated.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvEncoder {
    pub convs: Vec<Conv2d>,
    pub head: Dense,
    pub activation: Activation,
}

/// Per-sample activations of an encoder pass.
#[derive(Clone, Debug)]
pub struct EncoderCache {
    /// Input of each conv layer plus the flattened input of the head.
    acts: Vec<Vec<f64>>,
    features: Vec<f64>,
}

impl EncoderCache {
    pub fn features(&self) -> &[f64] {
        &self.features
    }
}

impl ConvEncoder {
    pub fn new(offset: usize, rows: usize, cols: usize, cfg: &EncoderConfig, activation: Activation) -> Result<Self> {
        if cfg.channels.is_empty() || cfg.kernel == 0 || cfg.stride == 0 || cfg.features == 0 {
            return Err(PpoError::InvalidConfig("encoder needs channels, kernel, stride and features >= 1".into()));
        }
        let mut convs = Vec::new();
        let (mut h, mut w, mut ch, mut off) = (rows, cols, 1, offset);
        for &out_ch in &cfg.channels {
            if h < cfg.kernel || w < cfg.kernel {
                return Err(PpoError::InvalidConfig(format!("image {rows}x{cols} is too small for the encoder")));
            }
            let conv = Conv2d { offset: off, in_ch: ch, out_ch, in_h: h, in_w: w, kernel: cfg.kernel, stride: cfg.stride };
            off += conv.n_params();
            h = conv.out_h();
            w = conv.out_w();
            ch = out_ch;
            convs.push(conv);
        }
        let head = Dense { offset: off, n_in: ch * h * w, n_out: cfg.features };
        Ok(Self { convs, head, activation })
    }

    pub fn n_params(&self) -> usize {
        self.convs.iter().map(Conv2d::n_params).sum::<usize>() + self.head.n_params()
    }

    pub fn n_in(&self) -> usize {
        self.convs[0].in_len()
    }

    pub fn n_out(&self) -> usize {
        self.head.n_out
    }

    pub fn forward(&self, params: &[f64], image: &[f64]) -> EncoderCache {
        let mut acts = vec![image.to_vec()];
        for conv in &self.convs {
            let mut y = conv.forward(params, acts.last().unwrap());
            y.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            acts.push(y);
        }
        let mut features = self.head.forward(params, acts.last().unwrap(), 1);
        features.iter_mut().for_each(|v| *v = self.activation.apply(*v));
        EncoderCache { acts, features }
    }

    /// Accumulates gradients for one sample given `dL/dfeatures`.
    pub fn backward(&self, params: &[f64], cache: &EncoderCache, dfeat: &[f64], grad: &mut [f64]) {
        let mut d: Vec<f64> =
            dfeat.iter().zip(&cache.features).map(|(g, y)| g * self.activation.derivative_from_output(*y)).collect();
        d = self.head.backward(params, cache.acts.last().unwrap(), &d, 1, grad, true);
        for (i, conv) in self.convs.iter().enumerate().rev() {
            for (g, y) in d.iter_mut().zip(&cache.acts[i + 1]) {
                *g *= self.activation.derivative_from_output(*y);
            }
            d = conv.backward(params, &cache.acts[i], &d, grad, i > 0);
        }
    }
}
