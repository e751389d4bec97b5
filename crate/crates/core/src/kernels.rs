//! Forward and backward numeric kernels.
//!
//! Layouts: feature maps are `[C, H, W]`, convolution weights `[C_out, C_in, 3, 3]`,
//! dense weights `[N_out, N_in]`. Convolution is valid-padded with stride 1 and
//! pooling is a 2x2 window with stride 2. Reductions accumulate in `f64`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::seed::rng_from;
use crate::tensor::Tensor;

pub const KERNEL_SIZE: usize = 3;
pub const POOL_WINDOW: usize = 2;

/// Shape contract of one valid, stride-1, 3x3 convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
}

impl ConvSpec {
    pub fn weight_shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, KERNEL_SIZE, KERNEL_SIZE]
    }

    pub fn output_dim(input: usize) -> Option<usize> {
        (input >= KERNEL_SIZE).then(|| input - KERNEL_SIZE + 1)
    }
}

/// 2x2 max pooling, stride 2, trailing odd row/column dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PoolSpec;

impl PoolSpec {
    pub fn output_dim(input: usize) -> Option<usize> {
        (input >= POOL_WINDOW).then_some(input / POOL_WINDOW)
    }
}

fn dims3(t: &Tensor, context: &'static str) -> Result<(usize, usize, usize)> {
    t.expect_rank(3, context)?;
    let s = t.shape();
    Ok((s[0], s[1], s[2]))
}

fn check_conv_shapes(
    input: &Tensor,
    weights: &Tensor,
    context: &'static str,
) -> Result<(usize, usize, usize, usize, usize, usize)> {
    let (c_in, h, w) = dims3(input, context)?;
    weights.expect_rank(4, context)?;
    let ws = weights.shape();
    if ws[1] != c_in {
        return Err(Error::shape(
            context,
            format!("weight in_channels {} != input channels {c_in}", ws[1]),
        ));
    }
    if ws[2] != KERNEL_SIZE || ws[3] != KERNEL_SIZE {
        return Err(Error::shape(context, format!("kernel must be 3x3, got {}x{}", ws[2], ws[3])));
    }
    let oh = ConvSpec::output_dim(h)
        .ok_or_else(|| Error::shape(context, format!("input height {h} < kernel 3")))?;
    let ow = ConvSpec::output_dim(w)
        .ok_or_else(|| Error::shape(context, format!("input width {w} < kernel 3")))?;
    Ok((ws[0], c_in, h, w, oh, ow))
}

pub fn conv2d_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    const CTX: &str = "conv2d_forward";
    let (c_out, c_in, h, w, oh, ow) = check_conv_shapes(input, weights, CTX)?;
    if bias.shape() != [c_out] {
        return Err(Error::shape(
            CTX,
            format!("bias shape {:?} != [out_channels={c_out}]", bias.shape()),
        ));
    }
    let x = input.data();
    let k = weights.data();
    let mut out = vec![0.0f32; c_out * oh * ow];
    for o in 0..c_out {
        let plane = &mut out[o * oh * ow..(o + 1) * oh * ow];
        plane.fill(bias.data()[o]);
        for c in 0..c_in {
            let chan = &x[c * h * w..(c + 1) * h * w];
            for dy in 0..KERNEL_SIZE {
                for dx in 0..KERNEL_SIZE {
                    let wv = k[((o * c_in + c) * KERNEL_SIZE + dy) * KERNEL_SIZE + dx];
                    for y in 0..oh {
                        let src = &chan[(y + dy) * w + dx..(y + dy) * w + dx + ow];
                        let dst = &mut plane[y * ow..(y + 1) * ow];
                        for (d, &s) in dst.iter_mut().zip(src) {
                            *d += wv * s;
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![c_out, oh, ow], out)
}

#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

pub fn conv2d_backward(input: &Tensor, weights: &Tensor, grad_out: &Tensor) -> Result<ConvGrads> {
    const CTX: &str = "conv2d_backward";
    let (c_out, c_in, h, w, oh, ow) = check_conv_shapes(input, weights, CTX)?;
    grad_out.expect_shape(&[c_out, oh, ow], CTX)?;
    let x = input.data();
    let k = weights.data();
    let g = grad_out.data();

    let mut gx = vec![0.0f32; c_in * h * w];
    let mut gw = vec![0.0f32; weights.numel()];
    let mut gb = vec![0.0f32; c_out];

    for o in 0..c_out {
        let gplane = &g[o * oh * ow..(o + 1) * oh * ow];
        gb[o] = gplane.iter().map(|&v| v as f64).sum::<f64>() as f32;
        for c in 0..c_in {
            let chan = &x[c * h * w..(c + 1) * h * w];
            let gchan = &mut gx[c * h * w..(c + 1) * h * w];
            for dy in 0..KERNEL_SIZE {
                for dx in 0..KERNEL_SIZE {
                    let widx = ((o * c_in + c) * KERNEL_SIZE + dy) * KERNEL_SIZE + dx;
                    let wv = k[widx];
                    let mut acc = 0.0f64;
                    for y in 0..oh {
                        let off = (y + dy) * w + dx;
                        let grow = &gplane[y * ow..(y + 1) * ow];
                        let xrow = &chan[off..off + ow];
                        let mut row_acc = 0.0f32;
                        for (&gv, &xv) in grow.iter().zip(xrow) {
                            row_acc += gv * xv;
                        }
                        acc += row_acc as f64;
                        let dst = &mut gchan[off..off + ow];
                        for (d, &gv) in dst.iter_mut().zip(grow) {
                            *d += wv * gv;
                        }
                    }
                    gw[widx] = acc as f32;
                }
            }
        }
    }

    Ok(ConvGrads {
        input: Tensor::new(input.shape().to_vec(), gx)?,
        weights: Tensor::new(weights.shape().to_vec(), gw)?,
        bias: Tensor::new(vec![c_out], gb)?,
    })
}

/// Winning flat input index for every pooled output cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolIndices {
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
    argmax: Vec<usize>,
}

impl PoolIndices {
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }
}

pub fn maxpool2d_forward(input: &Tensor) -> Result<(Tensor, PoolIndices)> {
    const CTX: &str = "maxpool2d_forward";
    let (c, h, w) = dims3(input, CTX)?;
    let oh = PoolSpec::output_dim(h)
        .ok_or_else(|| Error::shape(CTX, format!("input height {h} < 2")))?;
    let ow = PoolSpec::output_dim(w)
        .ok_or_else(|| Error::shape(CTX, format!("input width {w} < 2")))?;
    let x = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let base = ch * h * w;
        for y in 0..oh {
            for xo in 0..ow {
                let mut best_idx = base + (2 * y) * w + 2 * xo;
                let mut best = x[best_idx];
                // Row-major scan; strict comparison keeps the first maximum.
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * y + dy) * w + 2 * xo + dx;
                    if x[idx] > best {
                        best = x[idx];
                        best_idx = idx;
                    }
                }
                out.push(best);
                argmax.push(best_idx);
            }
        }
    }
    let indices = PoolIndices {
        input_shape: input.shape().to_vec(),
        output_shape: vec![c, oh, ow],
        argmax,
    };
    Ok((Tensor::new(vec![c, oh, ow], out)?, indices))
}

pub fn maxpool2d_backward(indices: &PoolIndices, grad_out: &Tensor) -> Result<Tensor> {
    const CTX: &str = "maxpool2d_backward";
    grad_out.expect_shape(&indices.output_shape, CTX)?;
    let numel: usize = indices.input_shape.iter().product();
    let mut gx = vec![0.0f32; numel];
    for (&idx, &g) in indices.argmax.iter().zip(grad_out.data()) {
        let slot = gx.get_mut(idx).ok_or_else(|| {
            Error::shape(CTX, format!("argmax index {idx} out of range for {numel} inputs"))
        })?;
        *slot += g;
    }
    Tensor::new(indices.input_shape.clone(), gx)
}

pub fn relu(input: &Tensor) -> Tensor {
    input.map(|v| v.max(0.0))
}

pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    grad_out.expect_shape(input.shape(), "relu_backward")?;
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::new(input.shape().to_vec(), data)
}

pub fn sigmoid_scalar(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(input: &Tensor) -> Tensor {
    input.map(sigmoid_scalar)
}

/// Gradient through the sigmoid given its output.
pub fn sigmoid_backward(output: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    grad_out.expect_shape(output.shape(), "sigmoid_backward")?;
    let data = output
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&s, &g)| g * s * (1.0 - s))
        .collect();
    Tensor::new(output.shape().to_vec(), data)
}

pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    logits.expect_rank(1, "softmax")?;
    let max = logits.max();
    let exps: Vec<f64> = logits.data().iter().map(|&s| ((s - max) as f64).exp()).collect();
    let total: f64 = exps.iter().sum();
    Tensor::new(logits.shape().to_vec(), exps.iter().map(|&e| (e / total) as f32).collect())
}

/// Jacobian-vector product of softmax given its output `probs`.
pub fn softmax_backward(probs: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    grad_out.expect_shape(probs.shape(), "softmax_backward")?;
    let dot: f64 =
        probs.data().iter().zip(grad_out.data()).map(|(&p, &g)| p as f64 * g as f64).sum();
    let data = probs
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&p, &g)| (p as f64 * (g as f64 - dot)) as f32)
        .collect();
    Tensor::new(probs.shape().to_vec(), data)
}

fn check_dense(
    input: &Tensor,
    weights: &Tensor,
    context: &'static str,
) -> Result<(usize, usize)> {
    input.expect_rank(1, context)?;
    weights.expect_rank(2, context)?;
    let (n_out, n_in) = (weights.shape()[0], weights.shape()[1]);
    if input.numel() != n_in {
        return Err(Error::shape(
            context,
            format!("input length {} != weight columns {n_in}", input.numel()),
        ));
    }
    Ok((n_out, n_in))
}

/// `W x`, no bias.
pub fn matvec(input: &Tensor, weights: &Tensor) -> Result<Tensor> {
    let (n_out, n_in) = check_dense(input, weights, "matvec")?;
    let x = input.data();
    let out = weights
        .data()
        .chunks_exact(n_in)
        .map(|row| row.iter().zip(x).map(|(&w, &v)| w as f64 * v as f64).sum::<f64>() as f32)
        .collect();
    Tensor::new(vec![n_out], out)
}

pub fn dense_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (n_out, _) = check_dense(input, weights, "dense_forward")?;
    if bias.shape() != [n_out] {
        return Err(Error::shape(
            "dense_forward",
            format!("bias shape {:?} != [{n_out}]", bias.shape()),
        ));
    }
    let mut out = matvec(input, weights)?;
    for (o, &b) in out.data_mut().iter_mut().zip(bias.data()) {
        *o += b;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Returns `(Wᵀg, g⊗x, g)`.
pub fn dense_backward(input: &Tensor, weights: &Tensor, grad_out: &Tensor) -> Result<DenseGrads> {
    let (n_out, n_in) = check_dense(input, weights, "dense_backward")?;
    grad_out.expect_shape(&[n_out], "dense_backward")?;
    let x = input.data();
    let g = grad_out.data();
    let mut gx = vec![0.0f64; n_in];
    let mut gw = vec![0.0f32; n_out * n_in];
    for (o, (row, grow)) in weights.data().chunks_exact(n_in).zip(gw.chunks_exact_mut(n_in)).enumerate() {
        let go = g[o];
        for i in 0..n_in {
            gx[i] += row[i] as f64 * go as f64;
            grow[i] = go * x[i];
        }
    }
    Ok(DenseGrads {
        input: Tensor::new(vec![n_in], gx.into_iter().map(|v| v as f32).collect())?,
        weights: Tensor::new(vec![n_out, n_in], gw)?,
        bias: grad_out.clone(),
    })
}

/// Keep/drop decisions plus the survivor scale of one inverted-dropout call.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    keep: Vec<bool>,
    scale: f32,
}

impl DropoutMask {
    pub fn keep(&self) -> &[bool] {
        &self.keep
    }

    pub fn scale(&self) -> f32 {
        self.scale
    }

    pub fn kept_fraction(&self) -> f64 {
        self.keep.iter().filter(|&&k| k).count() as f64 / self.keep.len() as f64
    }

    fn apply(&self, t: &Tensor) -> Result<Tensor> {
        if t.numel() != self.keep.len() {
            return Err(Error::shape(
                "dropout",
                format!("mask covers {} elements, tensor has {}", self.keep.len(), t.numel()),
            ));
        }
        let data = t
            .data()
            .iter()
            .zip(&self.keep)
            .map(|(&v, &k)| if k { v * self.scale } else { 0.0 })
            .collect();
        Tensor::new(t.shape().to_vec(), data)
    }
}

/// Inverted dropout: `rate` is the probability of zeroing an element.
pub fn dropout_forward(input: &Tensor, rate: f32, seed: u64) -> Result<(Tensor, DropoutMask)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("dropout rate {rate} outside [0, 1)")));
    }
    let keep: Vec<bool> = if rate == 0.0 {
        vec![true; input.numel()]
    } else {
        let mut rng = rng_from(seed, &[]);
        (0..input.numel()).map(|_| rng.random::<f32>() >= rate).collect()
    };
    let mask = DropoutMask { keep, scale: 1.0 / (1.0 - rate) };
    let out = mask.apply(input)?;
    Ok((out, mask))
}

pub fn dropout_backward(mask: &DropoutMask, grad_out: &Tensor) -> Result<Tensor> {
    mask.apply(grad_out)
}

/// Sum of every featuremap over its spatial extent, `[K,H,W] -> [K]`.
pub fn gap(featuremaps: &Tensor) -> Result<Tensor> {
    let (k, h, w) = dims3(featuremaps, "gap")?;
    let out = featuremaps
        .data()
        .chunks_exact(h * w)
        .map(|plane| plane.iter().map(|&v| v as f64).sum::<f64>() as f32)
        .collect();
    Tensor::new(vec![k], out)
}

/// Broadcast of `grad_out[k]` over the spatial extent `h x w`.
pub fn gap_backward(grad_out: &Tensor, h: usize, w: usize) -> Result<Tensor> {
    grad_out.expect_rank(1, "gap_backward")?;
    let k = grad_out.numel();
    let data = grad_out.data().iter().flat_map(|&g| std::iter::repeat_n(g, h * w)).collect();
    Tensor::new(vec![k, h, w], data)
}
