//! High-resolution density from one synthesized frame.

use rayon::prelude::*;

use super::kernel::for_each_deformed_cell;
use super::runtime::{FrameData, Synthesis, SynthesisParams};
use crate::error::{Error, Result};
use crate::fluid::{sample_lattice, Filter, ScalarGrid, Vec3};
use crate::repository::Repository;

/// Trilinear lookup of a stored `res^d` block at cage coordinates `u`.
pub fn sample_block(block: &[f64], res: usize, ndim: usize, u: &Vec3) -> f64 {
    let dims = [res, res, if ndim == 3 { res } else { 1 }];
    let idx = [u.x * res as f64 - 0.5, u.y * res as f64 - 0.5, u.z * res as f64 - 0.5];
    sample_lattice(block, dims, idx)
}

/// Coarse density upsampled by `factor` without extra smoothing.
pub fn upsample(coarse: &ScalarGrid, factor: usize) -> ScalarGrid {
    let d = coarse.dims();
    let dims = [d[0] * factor, d[1] * factor, if d[2] == 1 { 1 } else { d[2] * factor }];
    let dx = coarse.dx() / factor as f64;
    ScalarGrid::from_fn(dims, dx, |p| coarse.sample(&p))
}

/// Renders one frame at `factor` times the coarse resolution.
///
/// Each patch adds its repository block, mapped to the density range of the
/// upsampled coarse density it covers, weighted by its deformed kernel and
/// `w_j`. The sum is normalized by the accumulated weights, masked by the
/// blurred coarse density, and blended over the upsampled coarse density
/// where coverage is below one.
pub fn render_volume(
    synth: &Synthesis,
    frame: &FrameData,
    repo: &Repository,
    factor: usize,
    params: &SynthesisParams,
) -> Result<ScalarGrid> {
    if factor == 0 {
        return Err(Error::InvalidParameter("upscale factor must be positive".into()));
    }
    if repo.ndim != synth.ndim {
        return Err(Error::DimensionMismatch("repository and frame dimensionality differ".into()));
    }
    let base = upsample(&frame.density, factor);
    let saturation = params.mask_saturation;
    let mask = base.low_pass(params.mask_blur * frame.density.dx());
    let n = base.len();
    let mut acc = vec![0.0; n];
    let mut w_r = vec![0.0; n];
    let topology = synth.topology();
    for snap in &frame.patches {
        if snap.weight <= 0.0 {
            continue;
        }
        let entry = snap.entry as usize;
        if entry >= repo.entries.len() {
            return Err(Error::InvalidParameter(format!("frame refers to missing entry {entry}")));
        }
        let block: Vec<f64> = repo.density_block(entry, snap.cursor as usize)?.iter().map(|&v| f64::from(v)).collect();
        let cage = synth.cage(&topology, snap);
        let mut cells = Vec::new();
        for_each_deformed_cell(&cage, &base, |idx, w, u| cells.push((idx, w, u)));
        if cells.is_empty() {
            continue;
        }
        let (lo, hi) = cells
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), c| (a.min(base.data()[c.0]), b.max(base.data()[c.0])));
        let values: Vec<f64> =
            cells.par_iter().map(|(_, _, u)| sample_block(&block, repo.block_res, repo.ndim, u)).collect();
        for ((idx, w, _), v) in cells.iter().zip(values) {
            let ww = w * snap.weight;
            acc[*idx] += ww * (lo + v * (hi - lo));
            w_r[*idx] += ww;
        }
    }
    let out: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let b = base.data()[i];
            let w = w_r[i];
            if w <= 0.0 {
                return b.max(0.0);
            }
            let m = (mask.data()[i] / saturation).clamp(0.0, 1.0);
            let detail = acc[i] / w.max(params.epsilon) * m;
            let cover = w.min(1.0);
            (cover * detail + (1.0 - cover) * b).max(0.0)
        })
        .collect();
    ScalarGrid::from_vec(base.dims(), base.dx(), out)
}
