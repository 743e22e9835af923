//! Feed-forward networks over a flat parameter vector.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{self, shape_len, LayerSpec, Saved, Shape};
use crate::error::{Error, Result};

/// Edge length of descriptor network inputs.
pub const INPUT_SIZE: usize = 36;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub ndim: usize,
    pub input: Shape,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// Checks every layer against its input shape.
    pub fn new(ndim: usize, input: Shape, layers: Vec<LayerSpec>) -> Result<Self> {
        if ndim != 2 && ndim != 3 {
            return Err(Error::InvalidParameter(format!("network ndim {ndim}")));
        }
        if ndim == 2 && input[1] != 1 {
            return Err(Error::DimensionMismatch("2D network input must have depth 1".into()));
        }
        let spec = Self { ndim, input, layers };
        spec.shapes()?;
        Ok(spec)
    }

    /// Descriptor branch: three conv/tanh/pool stages, a dense layer and
    /// normalization. Output is 128 entries in 2D and 256 in 3D.
    pub fn descriptor(ndim: usize, channels: usize) -> Self {
        let s = INPUT_SIZE;
        let input = if ndim == 3 { [channels, s, s, s] } else { [channels, 1, s, s] };
        // 36 -conv5-> 32 -pool-> 16 -conv5-> 12 -pool-> 6 -conv3-> 4 -pool-> 2
        let flat = 32 * 2usize.pow(ndim as u32);
        let out = if ndim == 3 { 256 } else { 128 };
        let layers = vec![
            LayerSpec::Conv { in_ch: channels, out_ch: 4, kernel: 5 },
            LayerSpec::Tanh,
            LayerSpec::MaxPool { window: 2 },
            LayerSpec::Conv { in_ch: 4, out_ch: 16, kernel: 5 },
            LayerSpec::Tanh,
            LayerSpec::MaxPool { window: 2 },
            LayerSpec::Conv { in_ch: 16, out_ch: 32, kernel: 3 },
            LayerSpec::Tanh,
            LayerSpec::MaxPool { window: 2 },
            LayerSpec::Dense { inputs: flat, outputs: out },
            LayerSpec::Normalize,
        ];
        Self::new(ndim, input, layers).expect("descriptor spec is consistent")
    }

    /// Decision layers for the plain hinge objective: concatenated branch
    /// outputs, one hidden tanh layer and a scalar score.
    pub fn decision_head(descriptor_len: usize, hidden: usize) -> Self {
        let layers = vec![
            LayerSpec::Dense { inputs: 2 * descriptor_len, outputs: hidden },
            LayerSpec::Tanh,
            LayerSpec::Dense { inputs: hidden, outputs: 1 },
        ];
        Self::new(2, [2 * descriptor_len, 1, 1, 1], layers).expect("head spec is consistent")
    }

    /// Activation shapes, input first.
    pub fn shapes(&self) -> Result<Vec<Shape>> {
        let mut out = vec![self.input];
        for (i, l) in self.layers.iter().enumerate() {
            let cur = *out.last().unwrap();
            let next = l.output_shape(&cur, self.ndim).ok_or_else(|| {
                Error::DimensionMismatch(format!("layer {i} ({l:?}) cannot take input {cur:?}"))
            })?;
            out.push(next);
        }
        Ok(out)
    }

    pub fn output_len(&self) -> usize {
        shape_len(self.shapes().unwrap().last().unwrap())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count(self.ndim)).sum()
    }

    /// Start of each layer's parameters in the flat vector.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.layers
            .iter()
            .map(|l| {
                let o = acc;
                acc += l.param_count(self.ndim);
                o
            })
            .collect()
    }
}

/// Activations and saved state from one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    pub activations: Vec<Vec<f64>>,
    saved: Vec<Saved>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    shapes: Vec<Shape>,
    offsets: Vec<usize>,
    pub params: Vec<f64>,
}

impl Network {
    /// Xavier-uniform weights and zero biases from `seed`.
    pub fn init(spec: NetworkSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(spec.param_count());
        for l in &spec.layers {
            let n = l.param_count(spec.ndim);
            if n == 0 {
                continue;
            }
            let (fi, fo) = l.fans(spec.ndim);
            let bias = match *l {
                LayerSpec::Conv { out_ch, .. } => out_ch,
                LayerSpec::Dense { outputs, .. } => outputs,
                _ => 0,
            };
            let a = (6.0 / (fi + fo) as f64).sqrt();
            params.extend((0..n - bias).map(|_| rng.gen_range(-a..a)));
            params.extend(std::iter::repeat(0.0).take(bias));
        }
        Self::from_params(spec, params).expect("sized from spec")
    }

    pub fn from_params(spec: NetworkSpec, params: Vec<f64>) -> Result<Self> {
        if params.len() != spec.param_count() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} parameters, got {}",
                spec.param_count(),
                params.len()
            )));
        }
        Ok(Self { shapes: spec.shapes()?, offsets: spec.offsets(), spec, params })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn output_len(&self) -> usize {
        shape_len(self.shapes.last().unwrap())
    }

    fn layer_params(&self, i: usize) -> &[f64] {
        let n = self.spec.layers[i].param_count(self.spec.ndim);
        &self.params[self.offsets[i]..self.offsets[i] + n]
    }

    pub fn forward_trace(&self, input: &[f64]) -> Result<Trace> {
        if input.len() != shape_len(&self.spec.input) {
            return Err(Error::DimensionMismatch(format!(
                "network input has {} values, expected {}",
                input.len(),
                shape_len(&self.spec.input)
            )));
        }
        let nd = self.spec.ndim;
        let mut activations = Vec::with_capacity(self.spec.layers.len() + 1);
        let mut saved = Vec::with_capacity(self.spec.layers.len());
        activations.push(input.to_vec());
        for (i, l) in self.spec.layers.iter().enumerate() {
            let x = activations.last().unwrap();
            let (xs, ys) = (&self.shapes[i], &self.shapes[i + 1]);
            let (y, s) = match *l {
                LayerSpec::Conv { in_ch, out_ch, kernel } => (
                    layers::conv_forward(x, xs, self.layer_params(i), (in_ch, out_ch, kernel), nd, ys),
                    Saved::None,
                ),
                LayerSpec::MaxPool { window } => {
                    let (y, arg) = layers::pool_forward(x, xs, window, nd, ys);
                    (y, Saved::Argmax(arg))
                }
                LayerSpec::Tanh => (x.iter().map(|v| v.tanh()).collect(), Saved::None),
                LayerSpec::Dense { inputs, outputs } => (
                    layers::dense_forward(x, self.layer_params(i), inputs, outputs),
                    Saved::None,
                ),
                LayerSpec::Normalize => {
                    let (y, n) = layers::normalize_forward(x);
                    (y, Saved::Norm(n))
                }
            };
            activations.push(y);
            saved.push(s);
        }
        Ok(Trace { activations, saved })
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(input)?.activations.pop().unwrap())
    }

    /// Backpropagates `d_out`, accumulating parameter gradients into `grad`.
    /// Returns the input gradient when `want_input` is set, else an empty
    /// vector.
    pub fn backward(&self, trace: &Trace, d_out: &[f64], grad: &mut [f64], want_input: bool) -> Vec<f64> {
        assert_eq!(grad.len(), self.params.len());
        let nd = self.spec.ndim;
        let mut g = d_out.to_vec();
        for i in (0..self.spec.layers.len()).rev() {
            let x = &trace.activations[i];
            let y = &trace.activations[i + 1];
            let (xs, ys) = (&self.shapes[i], &self.shapes[i + 1]);
            let need = want_input || i > 0;
            let off = self.offsets[i];
            let np = self.spec.layers[i].param_count(nd);
            g = match (self.spec.layers[i], &trace.saved[i]) {
                (LayerSpec::Conv { in_ch, out_ch, kernel }, _) => layers::conv_backward(
                    x,
                    xs,
                    self.layer_params(i),
                    (in_ch, out_ch, kernel),
                    nd,
                    ys,
                    &g,
                    &mut grad[off..off + np],
                    need,
                ),
                (LayerSpec::MaxPool { .. }, Saved::Argmax(arg)) => layers::pool_backward(xs, arg, &g),
                (LayerSpec::Tanh, _) => g.iter().zip(y).map(|(d, t)| d * (1.0 - t * t)).collect(),
                (LayerSpec::Dense { inputs, outputs }, _) => layers::dense_backward(
                    x,
                    self.layer_params(i),
                    inputs,
                    outputs,
                    &g,
                    &mut grad[off..off + np],
                    need,
                ),
                (LayerSpec::Normalize, Saved::Norm(n)) => layers::normalize_backward(y, *n, &g),
                _ => unreachable!("trace does not match network"),
            };
            if !need {
                return Vec::new();
            }
        }
        g
    }
}
