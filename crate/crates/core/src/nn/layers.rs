//! Layer implementations: forward, backward, and their caches.
//!
//! Activations are `[batch, channels, height, width]` tensors (or
//! `[batch, features]` after `Flatten`), row-major. Batch-level loops run on
//! rayon with disjoint output slices and all cross-sample reductions happen
//! in a fixed order, so results are bit-identical for any thread count.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone)]
pub struct ConvLayer {
    pub weights: Vec<f64>, // [filters][in_channels][kernel][kernel]
    pub bias: Vec<f64>,    // [filters]
    pub filters: usize,
    pub in_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

#[derive(Debug, Clone)]
pub struct BatchNormLayer {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub channels: usize,
}

#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub weights: Vec<f64>, // [out][in]
    pub bias: Vec<f64>,    // [out]
    pub in_dim: usize,
    pub out_dim: usize,
}

#[derive(Debug, Clone)]
pub enum Layer {
    Conv(ConvLayer),
    BatchNorm(BatchNormLayer),
    ReLU,
    MaxPool { window: usize, stride: usize },
    Dropout { rate: f64 },
    Flatten,
    Dense(DenseLayer),
    Softmax,
}

/// Per-layer state saved by a training-mode forward pass.
#[derive(Debug, Clone)]
pub enum Cache {
    Conv { input: Tensor },
    BatchNorm { x_hat: Vec<f64>, inv_std: Vec<f64>, shape: [usize; 4] },
    ReLU { active: Vec<bool> },
    MaxPool { argmax: Vec<usize>, in_shape: [usize; 4] },
    Dropout { mask: Option<Vec<f64>> },
    Flatten { in_shape: [usize; 4] },
    Dense { input: Tensor },
    Softmax { probs: Tensor },
}

/// Parameter gradients for one layer.
#[derive(Debug, Clone)]
pub enum LayerGrads {
    Conv { dw: Vec<f64>, db: Vec<f64> },
    BatchNorm { dgamma: Vec<f64>, dbeta: Vec<f64> },
    Dense { dw: Vec<f64>, db: Vec<f64> },
    None,
}

pub fn conv_output_extent(input: usize, kernel: usize, stride: usize, padding: usize) -> usize {
    (input + 2 * padding - kernel) / stride + 1
}

fn dims4(x: &Tensor) -> Result<[usize; 4]> {
    match *x.shape() {
        [b, c, h, w] => Ok([b, c, h, w]),
        ref s => Err(Error::argument(format!("expected a 4-D tensor, got {s:?}"))),
    }
}

fn dims2(x: &Tensor) -> Result<[usize; 2]> {
    match *x.shape() {
        [b, n] => Ok([b, n]),
        ref s => Err(Error::argument(format!("expected a 2-D tensor, got {s:?}"))),
    }
}

fn pad_input(x: &Tensor, padding: usize) -> Result<Tensor> {
    let [b, c, h, w] = dims4(x)?;
    if padding == 0 {
        return Ok(x.clone());
    }
    let (hp, wp) = (h + 2 * padding, w + 2 * padding);
    let mut padded = Tensor::zeros(&[b, c, hp, wp]);
    let dst = padded.data_mut();
    for bi in 0..b {
        for ci in 0..c {
            let src_base = (bi * c + ci) * h * w;
            let dst_base = (bi * c + ci) * hp * wp;
            for y in 0..h {
                let src = src_base + y * w;
                let dst_row = dst_base + (y + padding) * wp + padding;
                dst[dst_row..dst_row + w].copy_from_slice(&x.data()[src..src + w]);
            }
        }
    }
    Ok(padded)
}

impl ConvLayer {
    fn output_shape(&self, dims: [usize; 4]) -> Result<[usize; 4]> {
        let [b, c, h, w] = dims;
        if c != self.in_channels {
            return Err(Error::argument(format!(
                "conv expects {} input channels, got {c}",
                self.in_channels
            )));
        }
        if h + 2 * self.padding < self.kernel || w + 2 * self.padding < self.kernel {
            return Err(Error::argument("conv kernel larger than padded input".to_string()));
        }
        Ok([
            b,
            self.filters,
            conv_output_extent(h, self.kernel, self.stride, self.padding),
            conv_output_extent(w, self.kernel, self.stride, self.padding),
        ])
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let dims = dims4(x)?;
        let [b, _, h, w] = dims;
        let [_, f, oh, ow] = self.output_shape(dims)?;
        let (c, k, s, p) = (self.in_channels, self.kernel, self.stride, self.padding);
        let (hp, wp) = (h + 2 * p, w + 2 * p);
        let padded = pad_input(x, p)?;

        // Tap-outer loop order: each (filter, channel, ky, kx) tap does one
        // scaled row accumulation per output row, which keeps the innermost
        // loop a contiguous slice operation.
        let mut out = Tensor::zeros(&[b, f, oh, ow]);
        out.data_mut()
            .par_chunks_mut(f * oh * ow)
            .zip(padded.data().par_chunks(c * hp * wp))
            .for_each(|(ob, xb)| {
                for fi in 0..f {
                    let base = fi * oh * ow;
                    for slot in ob[base..base + oh * ow].iter_mut() {
                        *slot = self.bias[fi];
                    }
                }
                for fi in 0..f {
                    let out_chan = fi * oh * ow;
                    for ci in 0..c {
                        let x_chan = &xb[ci * hp * wp..(ci + 1) * hp * wp];
                        for ky in 0..k {
                            for kx in 0..k {
                                let tap =
                                    self.weights[((fi * c + ci) * k + ky) * k + kx];
                                if tap == 0.0 {
                                    continue;
                                }
                                for oy in 0..oh {
                                    let x_row = (oy * s + ky) * wp + kx;
                                    let o_row = out_chan + oy * ow;
                                    if s == 1 {
                                        let src = &x_chan[x_row..x_row + ow];
                                        let dst = &mut ob[o_row..o_row + ow];
                                        for (d, &v) in dst.iter_mut().zip(src) {
                                            *d += tap * v;
                                        }
                                    } else {
                                        for ox in 0..ow {
                                            ob[o_row + ox] += tap * x_chan[x_row + ox * s];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            });
        Ok(out)
    }

    pub fn backward(&self, input: &Tensor, dout: &Tensor) -> Result<(Tensor, LayerGrads)> {
        let dims = dims4(input)?;
        let [b, _, h, w] = dims;
        let [_, f, oh, ow] = self.output_shape(dims)?;
        let (c, k, s, p) = (self.in_channels, self.kernel, self.stride, self.padding);
        let (hp, wp) = (h + 2 * p, w + 2 * p);
        let padded = pad_input(input, p)?;

        let mut db = vec![0.0f64; f];
        for bi in 0..b {
            let d_sample = &dout.data()[bi * f * oh * ow..(bi + 1) * f * oh * ow];
            for (fi, slot) in db.iter_mut().enumerate() {
                *slot += d_sample[fi * oh * ow..(fi + 1) * oh * ow].iter().sum::<f64>();
            }
        }

        // Per-sample weight gradients computed in parallel, reduced in a
        // fixed order afterwards. Each tap gradient is a sum of row dot
        // products between the output gradient and the shifted input.
        let partials: Vec<Vec<f64>> = (0..b)
            .into_par_iter()
            .map(|bi| {
                let xb = &padded.data()[bi * c * hp * wp..(bi + 1) * c * hp * wp];
                let d_sample = &dout.data()[bi * f * oh * ow..(bi + 1) * f * oh * ow];
                let mut dw = vec![0.0f64; self.weights.len()];
                for fi in 0..f {
                    let d_chan = &d_sample[fi * oh * ow..(fi + 1) * oh * ow];
                    for ci in 0..c {
                        let x_chan = &xb[ci * hp * wp..(ci + 1) * hp * wp];
                        for ky in 0..k {
                            for kx in 0..k {
                                let mut acc = 0.0f64;
                                for oy in 0..oh {
                                    let x_row = (oy * s + ky) * wp + kx;
                                    let d_row = &d_chan[oy * ow..(oy + 1) * ow];
                                    if s == 1 {
                                        let src = &x_chan[x_row..x_row + ow];
                                        for (&d, &v) in d_row.iter().zip(src) {
                                            acc += d * v;
                                        }
                                    } else {
                                        for (ox, &d) in d_row.iter().enumerate() {
                                            acc += d * x_chan[x_row + ox * s];
                                        }
                                    }
                                }
                                dw[((fi * c + ci) * k + ky) * k + kx] += acc;
                            }
                        }
                    }
                }
                dw
            })
            .collect();
        let mut dw = vec![0.0f64; self.weights.len()];
        for partial in &partials {
            for (slot, &v) in dw.iter_mut().zip(partial) {
                *slot += v;
            }
        }

        let mut dx_padded = Tensor::zeros(&[b, c, hp, wp]);
        dx_padded
            .data_mut()
            .par_chunks_mut(c * hp * wp)
            .zip(dout.data().par_chunks(f * oh * ow))
            .for_each(|(dxb, d_sample)| {
                for fi in 0..f {
                    let d_chan = &d_sample[fi * oh * ow..(fi + 1) * oh * ow];
                    for ci in 0..c {
                        let dx_chan = &mut dxb[ci * hp * wp..(ci + 1) * hp * wp];
                        for ky in 0..k {
                            for kx in 0..k {
                                let tap =
                                    self.weights[((fi * c + ci) * k + ky) * k + kx];
                                if tap == 0.0 {
                                    continue;
                                }
                                for oy in 0..oh {
                                    let dx_row = (oy * s + ky) * wp + kx;
                                    let d_row = &d_chan[oy * ow..(oy + 1) * ow];
                                    if s == 1 {
                                        let dst = &mut dx_chan[dx_row..dx_row + ow];
                                        for (d, &g) in dst.iter_mut().zip(d_row) {
                                            *d += tap * g;
                                        }
                                    } else {
                                        for (ox, &g) in d_row.iter().enumerate() {
                                            dx_chan[dx_row + ox * s] += tap * g;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            });

        // Crop the padding back off.
        let dx = if p == 0 {
            dx_padded.reshaped(vec![b, c, h, w])?
        } else {
            let mut dx = Tensor::zeros(&[b, c, h, w]);
            let dst = dx.data_mut();
            for bi in 0..b {
                for ci in 0..c {
                    let src_base = (bi * c + ci) * hp * wp;
                    let dst_base = (bi * c + ci) * h * w;
                    for y in 0..h {
                        let src = src_base + (y + p) * wp + p;
                        let row = dst_base + y * w;
                        dst[row..row + w].copy_from_slice(&dx_padded.data()[src..src + w]);
                    }
                }
            }
            dx
        };
        Ok((dx, LayerGrads::Conv { dw, db }))
    }
}

impl BatchNormLayer {
    pub fn forward_train(&mut self, x: &Tensor) -> Result<(Tensor, Cache)> {
        let [b, c, h, w] = dims4(x)?;
        if c != self.channels {
            return Err(Error::argument(format!(
                "batchnorm expects {} channels, got {c}",
                self.channels
            )));
        }
        let n = (b * h * w) as f64;
        let plane = h * w;
        let mut out = Tensor::zeros(&[b, c, h, w]);
        let mut x_hat = vec![0.0f64; x.len()];
        let mut inv_std = vec![0.0f64; c];
        for ci in 0..c {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for bi in 0..b {
                let base = (bi * c + ci) * plane;
                for &v in &x.data()[base..base + plane] {
                    sum += v;
                    sum_sq += v * v;
                }
            }
            let mean = sum / n;
            let var = (sum_sq / n - mean * mean).max(0.0);
            let istd = 1.0 / (var + BN_EPSILON).sqrt();
            inv_std[ci] = istd;
            self.running_mean[ci] = BN_MOMENTUM * self.running_mean[ci] + (1.0 - BN_MOMENTUM) * mean;
            self.running_var[ci] = BN_MOMENTUM * self.running_var[ci] + (1.0 - BN_MOMENTUM) * var;
            for bi in 0..b {
                let base = (bi * c + ci) * plane;
                for i in base..base + plane {
                    let normalized = (x.data()[i] - mean) * istd;
                    x_hat[i] = normalized;
                    out.data_mut()[i] = self.gamma[ci] * normalized + self.beta[ci];
                }
            }
        }
        Ok((out, Cache::BatchNorm { x_hat, inv_std, shape: [b, c, h, w] }))
    }

    pub fn forward_eval(&self, x: &Tensor) -> Result<Tensor> {
        let [b, c, h, w] = dims4(x)?;
        if c != self.channels {
            return Err(Error::argument(format!(
                "batchnorm expects {} channels, got {c}",
                self.channels
            )));
        }
        let plane = h * w;
        let mut out = Tensor::zeros(&[b, c, h, w]);
        for ci in 0..c {
            let istd = 1.0 / (self.running_var[ci] + BN_EPSILON).sqrt();
            let scale = self.gamma[ci] * istd;
            let shift = self.beta[ci] - scale * self.running_mean[ci];
            for bi in 0..b {
                let base = (bi * c + ci) * plane;
                for i in base..base + plane {
                    out.data_mut()[i] = scale * x.data()[i] + shift;
                }
            }
        }
        Ok(out)
    }

    pub fn backward(
        &self,
        x_hat: &[f64],
        inv_std: &[f64],
        shape: [usize; 4],
        dout: &Tensor,
    ) -> Result<(Tensor, LayerGrads)> {
        let [b, c, h, w] = shape;
        let n = (b * h * w) as f64;
        let plane = h * w;
        let mut dgamma = vec![0.0f64; c];
        let mut dbeta = vec![0.0f64; c];
        let mut dx = Tensor::zeros(&[b, c, h, w]);
        for ci in 0..c {
            let mut sum_d = 0.0;
            let mut sum_dxhat = 0.0;
            for bi in 0..b {
                let base = (bi * c + ci) * plane;
                for i in base..base + plane {
                    let d = dout.data()[i];
                    sum_d += d;
                    sum_dxhat += d * x_hat[i];
                }
            }
            dgamma[ci] = sum_dxhat;
            dbeta[ci] = sum_d;
            let mean_d = sum_d / n;
            let mean_dxhat = sum_dxhat / n;
            let scale = self.gamma[ci] * inv_std[ci];
            for bi in 0..b {
                let base = (bi * c + ci) * plane;
                for i in base..base + plane {
                    dx.data_mut()[i] =
                        scale * (dout.data()[i] - mean_d - x_hat[i] * mean_dxhat);
                }
            }
        }
        Ok((dx, LayerGrads::BatchNorm { dgamma, dbeta }))
    }
}

impl DenseLayer {
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let [b, n] = dims2(x)?;
        if n != self.in_dim {
            return Err(Error::argument(format!(
                "dense expects {} inputs, got {n}",
                self.in_dim
            )));
        }
        let mut out = Tensor::zeros(&[b, self.out_dim]);
        out.data_mut()
            .par_chunks_mut(self.out_dim)
            .zip(x.data().par_chunks(self.in_dim))
            .for_each(|(ob, xb)| {
                for (o, slot) in ob.iter_mut().enumerate() {
                    let w_row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
                    let mut acc = self.bias[o];
                    for i in 0..self.in_dim {
                        acc += w_row[i] * xb[i];
                    }
                    *slot = acc;
                }
            });
        Ok(out)
    }

    pub fn backward(&self, input: &Tensor, dout: &Tensor) -> Result<(Tensor, LayerGrads)> {
        let [b, _] = dims2(input)?;
        let mut db = vec![0.0f64; self.out_dim];
        for bi in 0..b {
            let d_row = &dout.data()[bi * self.out_dim..(bi + 1) * self.out_dim];
            for (slot, &d) in db.iter_mut().zip(d_row) {
                *slot += d;
            }
        }

        // Rows of dw are independent: parallel over output units, fixed
        // sample order inside.
        let mut dw = vec![0.0f64; self.weights.len()];
        dw.par_chunks_mut(self.in_dim).enumerate().for_each(|(o, dw_row)| {
            for bi in 0..b {
                let d = dout.data()[bi * self.out_dim + o];
                if d == 0.0 {
                    continue;
                }
                let x_row = &input.data()[bi * self.in_dim..(bi + 1) * self.in_dim];
                for (slot, &x) in dw_row.iter_mut().zip(x_row) {
                    *slot += d * x;
                }
            }
        });

        let mut dx = Tensor::zeros(&[b, self.in_dim]);
        dx.data_mut()
            .par_chunks_mut(self.in_dim)
            .zip(dout.data().par_chunks(self.out_dim))
            .for_each(|(dxb, d_row)| {
                for (o, &d) in d_row.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let w_row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
                    for (slot, &wv) in dxb.iter_mut().zip(w_row) {
                        *slot += d * wv;
                    }
                }
            });
        Ok((dx, LayerGrads::Dense { dw, db }))
    }
}

pub fn relu_forward(x: &Tensor) -> (Tensor, Vec<bool>) {
    let mut out = x.clone();
    let mut active = vec![false; x.len()];
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        if *v > 0.0 {
            active[i] = true;
        } else {
            *v = 0.0;
        }
    }
    (out, active)
}

pub fn relu_backward(active: &[bool], dout: &Tensor) -> Tensor {
    let mut dx = dout.clone();
    for (v, &keep) in dx.data_mut().iter_mut().zip(active) {
        if !keep {
            *v = 0.0;
        }
    }
    dx
}

pub fn maxpool_forward(
    x: &Tensor,
    window: usize,
    stride: usize,
) -> Result<(Tensor, Vec<usize>)> {
    let [b, c, h, w] = dims4(x)?;
    if window == 0 || stride == 0 || window > h || window > w {
        return Err(Error::argument(format!(
            "maxpool window {window} / stride {stride} incompatible with {h}x{w} input"
        )));
    }
    let oh = (h - window) / stride + 1;
    let ow = (w - window) / stride + 1;
    let mut out = Tensor::zeros(&[b, c, oh, ow]);
    let mut argmax = vec![0usize; b * c * oh * ow];
    for bi in 0..b {
        for ci in 0..c {
            let in_base = (bi * c + ci) * h * w;
            let out_base = (bi * c + ci) * oh * ow;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0usize;
                    for ky in 0..window {
                        let row = in_base + (oy * stride + ky) * w + ox * stride;
                        for kx in 0..window {
                            let v = x.data()[row + kx];
                            if v > best {
                                best = v;
                                best_idx = row + kx;
                            }
                        }
                    }
                    out.data_mut()[out_base + oy * ow + ox] = best;
                    argmax[out_base + oy * ow + ox] = best_idx;
                }
            }
        }
    }
    Ok((out, argmax))
}

pub fn maxpool_backward(argmax: &[usize], in_shape: [usize; 4], dout: &Tensor) -> Tensor {
    let mut dx = Tensor::zeros(&in_shape);
    for (i, &src) in argmax.iter().enumerate() {
        dx.data_mut()[src] += dout.data()[i];
    }
    dx
}

/// Inverted dropout: kept activations are scaled by `1/(1-rate)` so the
/// expected value is unchanged; a rate of 0 is the identity and draws
/// nothing from the generator.
pub fn dropout_forward(x: &Tensor, rate: f64, rng: &mut ChaCha8Rng) -> (Tensor, Option<Vec<f64>>) {
    if rate == 0.0 {
        return (x.clone(), None);
    }
    let scale = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..x.len())
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { scale })
        .collect();
    let mut out = x.clone();
    for (v, &m) in out.data_mut().iter_mut().zip(&mask) {
        *v *= m;
    }
    (out, Some(mask))
}

pub fn dropout_backward(mask: &Option<Vec<f64>>, dout: &Tensor) -> Tensor {
    match mask {
        None => dout.clone(),
        Some(mask) => {
            let mut dx = dout.clone();
            for (v, &m) in dx.data_mut().iter_mut().zip(mask) {
                *v *= m;
            }
            dx
        }
    }
}

/// Row-wise numerically stable softmax.
pub fn softmax_forward(x: &Tensor) -> Result<Tensor> {
    let [b, n] = dims2(x)?;
    let mut out = Tensor::zeros(&[b, n]);
    for bi in 0..b {
        let row = &x.data()[bi * n..(bi + 1) * n];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let out_row = &mut out.data_mut()[bi * n..(bi + 1) * n];
        let mut total = 0.0;
        for (slot, &v) in out_row.iter_mut().zip(row) {
            let e = (v - max).exp();
            *slot = e;
            total += e;
        }
        for slot in out_row.iter_mut() {
            *slot /= total;
        }
    }
    Ok(out)
}

impl Layer {
    pub fn forward_train(&mut self, x: &Tensor, rng: &mut ChaCha8Rng) -> Result<(Tensor, Cache)> {
        match self {
            Layer::Conv(conv) => {
                let out = conv.forward(x)?;
                Ok((out, Cache::Conv { input: x.clone() }))
            }
            Layer::BatchNorm(bn) => bn.forward_train(x),
            Layer::ReLU => {
                let (out, active) = relu_forward(x);
                Ok((out, Cache::ReLU { active }))
            }
            Layer::MaxPool { window, stride } => {
                let [b, c, h, w] = dims4(x)?;
                let (out, argmax) = maxpool_forward(x, *window, *stride)?;
                Ok((out, Cache::MaxPool { argmax, in_shape: [b, c, h, w] }))
            }
            Layer::Dropout { rate } => {
                let (out, mask) = dropout_forward(x, *rate, rng);
                Ok((out, Cache::Dropout { mask }))
            }
            Layer::Flatten => {
                let [b, c, h, w] = dims4(x)?;
                let out = x.clone().reshaped(vec![b, c * h * w])?;
                Ok((out, Cache::Flatten { in_shape: [b, c, h, w] }))
            }
            Layer::Dense(dense) => {
                let out = dense.forward(x)?;
                Ok((out, Cache::Dense { input: x.clone() }))
            }
            Layer::Softmax => {
                let probs = softmax_forward(x)?;
                Ok((probs.clone(), Cache::Softmax { probs }))
            }
        }
    }

    pub fn forward_eval(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Conv(conv) => conv.forward(x),
            Layer::BatchNorm(bn) => bn.forward_eval(x),
            Layer::ReLU => Ok(relu_forward(x).0),
            Layer::MaxPool { window, stride } => Ok(maxpool_forward(x, *window, *stride)?.0),
            Layer::Dropout { .. } => Ok(x.clone()),
            Layer::Flatten => {
                let [b, c, h, w] = dims4(x)?;
                x.clone().reshaped(vec![b, c * h * w])
            }
            Layer::Dense(dense) => dense.forward(x),
            Layer::Softmax => softmax_forward(x),
        }
    }

    /// Propagates `dout` through the layer. `Softmax` is handled jointly
    /// with the cross-entropy loss in the network and must not reach here.
    pub fn backward(&self, cache: &Cache, dout: &Tensor) -> Result<(Tensor, LayerGrads)> {
        match (self, cache) {
            (Layer::Conv(conv), Cache::Conv { input }) => conv.backward(input, dout),
            (Layer::BatchNorm(bn), Cache::BatchNorm { x_hat, inv_std, shape }) => {
                bn.backward(x_hat, inv_std, *shape, dout)
            }
            (Layer::ReLU, Cache::ReLU { active }) => {
                Ok((relu_backward(active, dout), LayerGrads::None))
            }
            (Layer::MaxPool { .. }, Cache::MaxPool { argmax, in_shape }) => {
                Ok((maxpool_backward(argmax, *in_shape, dout), LayerGrads::None))
            }
            (Layer::Dropout { .. }, Cache::Dropout { mask }) => {
                Ok((dropout_backward(mask, dout), LayerGrads::None))
            }
            (Layer::Flatten, Cache::Flatten { in_shape }) => {
                let dx = dout.clone().reshaped(in_shape.to_vec())?;
                Ok((dx, LayerGrads::None))
            }
            (Layer::Dense(dense), Cache::Dense { input }) => dense.backward(input, dout),
            _ => Err(Error::argument(
                "layer/cache mismatch during backward pass".to_string(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn identity_conv_passes_input_through() {
        let conv = ConvLayer {
            weights: vec![1.0],
            bias: vec![0.0],
            filters: 1,
            in_channels: 1,
            kernel: 1,
            stride: 1,
            padding: 0,
        };
        let x = Tensor::from_vec(vec![1, 1, 2, 3], vec![1.0, -2.0, 3.0, 4.0, 0.5, -0.25]).unwrap();
        let out = conv.forward(&x).unwrap();
        assert_eq!(out.shape(), &[1, 1, 2, 3]);
        assert_eq!(out.data(), x.data());
    }

    #[test]
    fn conv_known_sum() {
        // 3x3 box filter over a 3x3 ramp with padding 1: center output is
        // the full sum.
        let conv = ConvLayer {
            weights: vec![1.0; 9],
            bias: vec![0.0],
            filters: 1,
            in_channels: 1,
            kernel: 3,
            stride: 1,
            padding: 1,
        };
        let x = Tensor::from_vec(vec![1, 1, 3, 3], (1..=9).map(f64::from).collect()).unwrap();
        let out = conv.forward(&x).unwrap();
        assert_eq!(out.shape(), &[1, 1, 3, 3]);
        assert_eq!(out.data()[4], 45.0);
        assert_eq!(out.data()[0], 1.0 + 2.0 + 4.0 + 5.0);
    }

    #[test]
    fn conv_extent_formula_matches_enumeration() {
        for input in 1..=16usize {
            for kernel in 1..=5usize.min(input + 4) {
                for stride in 1..=3usize {
                    for padding in 0..=2usize {
                        if input + 2 * padding < kernel {
                            continue;
                        }
                        // Count the window placements directly.
                        let mut count = 0usize;
                        let mut start = 0usize;
                        while start + kernel <= input + 2 * padding {
                            count += 1;
                            start += stride;
                        }
                        assert_eq!(
                            conv_output_extent(input, kernel, stride, padding),
                            count,
                            "in={input} k={kernel} s={stride} p={padding}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn maxpool_of_quad_is_max() {
        let x = Tensor::from_vec(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (out, argmax) = maxpool_forward(&x, 2, 2).unwrap();
        assert_eq!(out.shape(), &[1, 1, 1, 1]);
        assert_eq!(out.data(), &[4.0]);
        assert_eq!(argmax, vec![3]);
    }

    #[test]
    fn maxpool_backward_routes_to_argmax() {
        let x = Tensor::from_vec(vec![1, 1, 2, 2], vec![1.0, 9.0, 3.0, 4.0]).unwrap();
        let (_, argmax) = maxpool_forward(&x, 2, 2).unwrap();
        let dout = Tensor::from_vec(vec![1, 1, 1, 1], vec![2.5]).unwrap();
        let dx = maxpool_backward(&argmax, [1, 1, 2, 2], &dout);
        assert_eq!(dx.data(), &[0.0, 2.5, 0.0, 0.0]);
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let x = Tensor::from_vec(vec![1, 3], vec![0.0, 0.0, 0.0]).unwrap();
        let probs = softmax_forward(&x).unwrap();
        for &p in probs.data() {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rows_are_stochastic() {
        let x = Tensor::from_vec(
            vec![3, 3],
            vec![5.0, -3.0, 0.2, 100.0, 99.0, 98.0, -50.0, -51.0, -49.5],
        )
        .unwrap();
        let probs = softmax_forward(&x).unwrap();
        for row in probs.data().chunks(3) {
            let total: f64 = row.iter().sum();
            assert!((total - 1.0).abs() < 1e-6);
            assert!(row.iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }

    #[test]
    fn batchnorm_normalizes_batch_statistics() {
        let mut bn = BatchNormLayer {
            gamma: vec![1.0; 2],
            beta: vec![0.0; 2],
            running_mean: vec![0.0; 2],
            running_var: vec![1.0; 2],
            channels: 2,
        };
        let mut r = rng(3);
        let data: Vec<f64> = (0..4 * 2 * 4 * 4).map(|_| r.random::<f64>() * 7.0 - 2.0).collect();
        let x = Tensor::from_vec(vec![4, 2, 4, 4], data).unwrap();
        let (_, cache) = bn.forward_train(&x).unwrap();
        let Cache::BatchNorm { x_hat, .. } = cache else { panic!() };
        let n = (4 * 4 * 4) as f64;
        for ci in 0..2 {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for bi in 0..4 {
                let base = (bi * 2 + ci) * 16;
                for &v in &x_hat[base..base + 16] {
                    sum += v;
                    sum_sq += v * v;
                }
            }
            let mean = sum / n;
            let var = sum_sq / n - mean * mean;
            assert!(mean.abs() < 1e-5, "channel {ci} mean {mean}");
            assert!((var - 1.0).abs() < 1e-4, "channel {ci} var {var}");
        }
    }

    #[test]
    fn dropout_eval_is_identity_and_expectation_is_preserved() {
        let x = Tensor::from_vec(vec![1, 1000], vec![1.0; 1000]).unwrap();
        let layer = Layer::Dropout { rate: 0.5 };
        assert_eq!(layer.forward_eval(&x).unwrap().data(), x.data());

        let mut total = 0.0;
        let trials = 200;
        for seed in 0..trials {
            let (out, _) = dropout_forward(&x, 0.5, &mut rng(seed));
            total += out.data().iter().sum::<f64>() / 1000.0;
        }
        let mean = total / trials as f64;
        assert!((mean - 1.0).abs() < 0.02, "dropout mean {mean}");
    }

    #[test]
    fn relu_zeroes_negatives_and_masks_gradient() {
        let x = Tensor::from_vec(vec![1, 4], vec![-1.0, 2.0, 0.0, 3.0]).unwrap();
        let (out, active) = relu_forward(&x);
        assert_eq!(out.data(), &[0.0, 2.0, 0.0, 3.0]);
        let dout = Tensor::from_vec(vec![1, 4], vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let dx = relu_backward(&active, &dout);
        assert_eq!(dx.data(), &[0.0, 1.0, 0.0, 1.0]);
    }
}
