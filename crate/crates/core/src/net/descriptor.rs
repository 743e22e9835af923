//! Unit-norm descriptors, the density/motion combination and the
//! downsampled baseline.

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::fluid::{Filter, ScalarGrid};

/// Default motion weight during synthesis.
pub const SYNTH_MOTION_WEIGHT: f64 = 0.6;

/// Unit-norm feature vector. A zero pre-normalization vector yields a zero
/// descriptor flagged as degenerate, which never matches anything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    values: Vec<f64>,
    degenerate: bool,
}

impl Descriptor {
    /// Normalizes `v`.
    pub fn from_vector(v: Vec<f64>) -> Self {
        let n = norm(&v);
        if n > 0.0 && n.is_finite() {
            Self { values: v.into_iter().map(|x| x / n).collect(), degenerate: false }
        } else {
            Self::degenerate(v.len())
        }
    }

    pub fn degenerate(len: usize) -> Self {
        Self { values: vec![0.0; len], degenerate: true }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn distance(&self, other: &Descriptor) -> f64 {
        distance(&self.values, &other.values)
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `[d_den; w_m d_mot] / sqrt(1 + w_m^2)`. A degenerate density descriptor
/// gives a degenerate result; a degenerate motion half is dropped.
pub fn combine(d_den: &Descriptor, d_mot: &Descriptor, w_m: f64) -> Descriptor {
    let len = d_den.len() + d_mot.len();
    if d_den.is_degenerate() {
        return Descriptor::degenerate(len);
    }
    let w = if d_mot.is_degenerate() { 0.0 } else { w_m };
    let s = 1.0 / (1.0 + w * w).sqrt();
    let values = d_den
        .values
        .iter()
        .map(|v| v * s)
        .chain(d_mot.values.iter().map(|v| v * w * s))
        .collect();
    Descriptor { values, degenerate: false }
}

/// Spatial layout `(ndim, [w, h, d])` of a `[c, d, h, w]` block.
pub fn block_layout(block: &Tensor) -> Result<(usize, [usize; 3])> {
    let s = block.shape();
    if s.len() != 4 {
        return Err(Error::DimensionMismatch(format!("patch block must be [c, d, h, w], got {s:?}")));
    }
    Ok((if s[1] > 1 { 3 } else { 2 }, [s[3], s[2], s[1]]))
}

fn downsample(data: &[f64], dims: [usize; 3], edge: usize, ndim: usize) -> Result<Vec<f64>> {
    let g = ScalarGrid::from_vec(dims, 1.0, data.to_vec())?;
    let target = if ndim == 3 { [edge; 3] } else { [edge, edge, 1] };
    Ok(g.resample(target)?.into_data())
}

/// Baseline descriptor: density resampled to 7 per axis and each curl
/// channel to 5 per axis, halves normalized separately, then the whole
/// vector normalized. Length 718 in 3D and 74 in 2D.
pub fn simple_descriptor(block: &Tensor) -> Result<Descriptor> {
    let (ndim, dims) = block_layout(block)?;
    let c = block.shape()[0];
    if c < 2 {
        return Err(Error::DimensionMismatch("block needs density and curl channels".into()));
    }
    let plane: usize = dims.iter().product();
    let den = downsample(&block.data()[..plane], dims, 7, ndim)?;
    let mut mot = Vec::new();
    for ch in 1..c {
        mot.extend(downsample(&block.data()[ch * plane..(ch + 1) * plane], dims, 5, ndim)?);
    }
    let half = |v: Vec<f64>| {
        let n = norm(&v);
        if n > 0.0 {
            v.into_iter().map(|x| x / n).collect()
        } else {
            v
        }
    };
    let mut v: Vec<f64> = half(den);
    v.extend(half(mot));
    Ok(Descriptor::from_vector(v))
}
