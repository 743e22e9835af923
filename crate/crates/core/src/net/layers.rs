//! Layer kernels with hand-written backward passes.
//!
//! Activations are `[channels][depth][height][width]` in row-major order;
//! 2D data uses depth 1 and kernels of depth 1.

use serde::{Deserialize, Serialize};

/// Activation shape `[c, d, h, w]`.
pub type Shape = [usize; 4];

pub fn shape_len(s: &Shape) -> usize {
    s.iter().product()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerSpec {
    /// Valid convolution, stride 1, cubic (square in 2D) kernel.
    Conv { in_ch: usize, out_ch: usize, kernel: usize },
    MaxPool { window: usize },
    Tanh,
    /// Fully connected on the flattened input.
    Dense { inputs: usize, outputs: usize },
    /// Scales to unit L2 norm; a zero input maps to zero.
    Normalize,
}

impl LayerSpec {
    pub fn param_count(&self, ndim: usize) -> usize {
        match *self {
            LayerSpec::Conv { in_ch, out_ch, kernel } => {
                out_ch * in_ch * kernel.pow(ndim as u32) + out_ch
            }
            LayerSpec::Dense { inputs, outputs } => outputs * inputs + outputs,
            _ => 0,
        }
    }

    /// Output shape, or `None` if `input` is incompatible.
    pub fn output_shape(&self, input: &Shape, ndim: usize) -> Option<Shape> {
        let [c, d, h, w] = *input;
        match *self {
            LayerSpec::Conv { in_ch, out_ch, kernel } => {
                let kd = if ndim == 3 { kernel } else { 1 };
                if c != in_ch || kernel == 0 || h < kernel || w < kernel || d < kd {
                    return None;
                }
                Some([out_ch, d - kd + 1, h - kernel + 1, w - kernel + 1])
            }
            LayerSpec::MaxPool { window } => {
                let wd = if ndim == 3 { window } else { 1 };
                if window == 0 || h < window || w < window || d < wd {
                    return None;
                }
                Some([c, d / wd, h / window, w / window])
            }
            LayerSpec::Tanh | LayerSpec::Normalize => Some(*input),
            LayerSpec::Dense { inputs, outputs } => {
                (shape_len(input) == inputs).then_some([outputs, 1, 1, 1])
            }
        }
    }

    /// Fan-in and fan-out for weight initialization.
    pub fn fans(&self, ndim: usize) -> (usize, usize) {
        match *self {
            LayerSpec::Conv { in_ch, out_ch, kernel } => {
                let k = kernel.pow(ndim as u32);
                (in_ch * k, out_ch * k)
            }
            LayerSpec::Dense { inputs, outputs } => (inputs, outputs),
            _ => (0, 0),
        }
    }
}

/// Per-layer data saved by the forward pass.
#[derive(Debug, Clone)]
pub enum Saved {
    None,
    /// Flat input index of each pooled maximum.
    Argmax(Vec<u32>),
    /// Pre-normalization norm.
    Norm(f64),
}

pub(crate) fn conv_forward(
    x: &[f64],
    xs: &Shape,
    params: &[f64],
    spec: (usize, usize, usize),
    ndim: usize,
    ys: &Shape,
) -> Vec<f64> {
    let (in_ch, out_ch, k) = spec;
    let kd = if ndim == 3 { k } else { 1 };
    let [_, d, h, w] = *xs;
    let [_, od, oh, ow] = *ys;
    let kvol = kd * k * k;
    let bias = &params[out_ch * in_ch * kvol..];
    let mut y = vec![0.0; shape_len(ys)];
    let plane = oh * ow;
    for o in 0..out_ch {
        let out = &mut y[o * od * plane..(o + 1) * od * plane];
        out.iter_mut().for_each(|v| *v = bias[o]);
        for i in 0..in_ch {
            let inp = &x[i * d * h * w..(i + 1) * d * h * w];
            let wbase = (o * in_ch + i) * kvol;
            for kz in 0..kd {
                for ky in 0..k {
                    for kx in 0..k {
                        let wv = params[wbase + (kz * k + ky) * k + kx];
                        for z in 0..od {
                            for yy in 0..oh {
                                let src = ((z + kz) * h + yy + ky) * w + kx;
                                let dst = (z * oh + yy) * ow;
                                let row_in = &inp[src..src + ow];
                                let row_out = &mut out[dst..dst + ow];
                                for (r, s) in row_out.iter_mut().zip(row_in) {
                                    *r += wv * s;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    y
}

/// Accumulates weight gradients into `grad` and returns the input gradient
/// when `want_input` is set.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_backward(
    x: &[f64],
    xs: &Shape,
    params: &[f64],
    spec: (usize, usize, usize),
    ndim: usize,
    ys: &Shape,
    dy: &[f64],
    grad: &mut [f64],
    want_input: bool,
) -> Vec<f64> {
    let (in_ch, out_ch, k) = spec;
    let kd = if ndim == 3 { k } else { 1 };
    let [_, d, h, w] = *xs;
    let [_, od, oh, ow] = *ys;
    let kvol = kd * k * k;
    let nw = out_ch * in_ch * kvol;
    let plane = oh * ow;
    let mut dx = if want_input { vec![0.0; shape_len(xs)] } else { Vec::new() };
    for o in 0..out_ch {
        let g = &dy[o * od * plane..(o + 1) * od * plane];
        grad[nw + o] += g.iter().sum::<f64>();
        for i in 0..in_ch {
            let off_in = i * d * h * w;
            let wbase = (o * in_ch + i) * kvol;
            for kz in 0..kd {
                for ky in 0..k {
                    for kx in 0..k {
                        let widx = wbase + (kz * k + ky) * k + kx;
                        let wv = params[widx];
                        let mut acc = 0.0;
                        for z in 0..od {
                            for yy in 0..oh {
                                let src = off_in + ((z + kz) * h + yy + ky) * w + kx;
                                let dst = (z * oh + yy) * ow;
                                let grow = &g[dst..dst + ow];
                                let xrow = &x[src..src + ow];
                                for (a, b) in grow.iter().zip(xrow) {
                                    acc += a * b;
                                }
                                if want_input {
                                    for (dxv, gv) in dx[src..src + ow].iter_mut().zip(grow) {
                                        *dxv += wv * gv;
                                    }
                                }
                            }
                        }
                        grad[widx] += acc;
                    }
                }
            }
        }
    }
    dx
}

pub(crate) fn pool_forward(x: &[f64], xs: &Shape, window: usize, ndim: usize, ys: &Shape) -> (Vec<f64>, Vec<u32>) {
    let wd = if ndim == 3 { window } else { 1 };
    let [c, d, h, w] = *xs;
    let [_, od, oh, ow] = *ys;
    let mut y = vec![0.0; shape_len(ys)];
    let mut arg = vec![0u32; y.len()];
    for ch in 0..c {
        for z in 0..od {
            for yy in 0..oh {
                for xx in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut bi = 0usize;
                    for a in 0..wd {
                        for b in 0..window {
                            for e in 0..window {
                                let idx = ((ch * d + z * wd + a) * h + yy * window + b) * w
                                    + xx * window
                                    + e;
                                if x[idx] > best {
                                    best = x[idx];
                                    bi = idx;
                                }
                            }
                        }
                    }
                    let o = ((ch * od + z) * oh + yy) * ow + xx;
                    y[o] = best;
                    arg[o] = bi as u32;
                }
            }
        }
    }
    (y, arg)
}

pub(crate) fn pool_backward(xs: &Shape, arg: &[u32], dy: &[f64]) -> Vec<f64> {
    let mut dx = vec![0.0; shape_len(xs)];
    for (a, g) in arg.iter().zip(dy) {
        dx[*a as usize] += g;
    }
    dx
}

pub(crate) fn dense_forward(x: &[f64], params: &[f64], inputs: usize, outputs: usize) -> Vec<f64> {
    let bias = &params[inputs * outputs..];
    (0..outputs)
        .map(|o| {
            let row = &params[o * inputs..(o + 1) * inputs];
            bias[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

pub(crate) fn dense_backward(
    x: &[f64],
    params: &[f64],
    inputs: usize,
    outputs: usize,
    dy: &[f64],
    grad: &mut [f64],
    want_input: bool,
) -> Vec<f64> {
    let mut dx = if want_input { vec![0.0; inputs] } else { Vec::new() };
    for o in 0..outputs {
        let g = dy[o];
        grad[inputs * outputs + o] += g;
        let row = &params[o * inputs..(o + 1) * inputs];
        let grow = &mut grad[o * inputs..(o + 1) * inputs];
        for (gw, xv) in grow.iter_mut().zip(x) {
            *gw += g * xv;
        }
        if want_input {
            for (d, wv) in dx.iter_mut().zip(row) {
                *d += g * wv;
            }
        }
    }
    dx
}

pub(crate) fn normalize_forward(x: &[f64]) -> (Vec<f64>, f64) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        (x.iter().map(|v| v / norm).collect(), norm)
    } else {
        (vec![0.0; x.len()], 0.0)
    }
}

pub(crate) fn normalize_backward(y: &[f64], norm: f64, dy: &[f64]) -> Vec<f64> {
    if norm == 0.0 {
        return vec![0.0; y.len()];
    }
    let proj: f64 = y.iter().zip(dy).map(|(a, b)| a * b).sum();
    y.iter().zip(dy).map(|(yv, g)| (g - yv * proj) / norm).collect()
}
