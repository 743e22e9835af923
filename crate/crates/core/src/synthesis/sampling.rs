//! Resampling flow data through a (deformed) cage onto a regular lattice.

use rayon::prelude::*;

use crate::cage::PatchCage;
use crate::error::Result;
use crate::fluid::{Curl, ScalarGrid, Vec3};
use crate::net::Tensor;

/// Cage coordinates of the cell centres of a `res^d` lattice, x fastest.
pub fn lattice_points(res: usize, ndim: usize) -> Vec<Vec3> {
    let h = 1.0 / res as f64;
    let nz = if ndim == 3 { res } else { 1 };
    let mut out = Vec::with_capacity(res * res * nz);
    for k in 0..nz {
        for j in 0..res {
            for i in 0..res {
                let z = if ndim == 3 { (k as f64 + 0.5) * h } else { 0.0 };
                out.push(Vec3::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h, z));
            }
        }
    }
    out
}

fn world_points(patch: &PatchCage, res: usize) -> Vec<Vec3> {
    let ndim = patch.topology().ndim();
    let z = patch.positions[0].z;
    lattice_points(res, ndim)
        .par_iter()
        .map(|u| {
            let mut p = patch.to_world(u);
            if ndim == 2 {
                p.z = z;
            }
            p
        })
        .collect()
}

fn block_shape(channels: usize, res: usize, ndim: usize) -> Vec<usize> {
    vec![channels, if ndim == 3 { res } else { 1 }, res, res]
}

/// Density block `[1, d, res, res]` sampled through the cage.
pub fn sample_density(patch: &PatchCage, density: &ScalarGrid, res: usize) -> Result<Tensor> {
    let pts = world_points(patch, res);
    let data = pts.par_iter().map(|p| density.sample(p)).collect();
    Tensor::new(block_shape(1, res, patch.topology().ndim()), data)
}

/// Network input block: density followed by vorticity channels scaled by
/// `curl_scale`. In 3D the vorticity is expressed in the patch's frame so
/// the block does not depend on the patch orientation.
pub fn sample_flow_block(
    patch: &PatchCage,
    density: &ScalarGrid,
    curl: &Curl,
    res: usize,
    curl_scale: f64,
) -> Result<Tensor> {
    let ndim = patch.topology().ndim();
    let pts = world_points(patch, res);
    let comps = curl.components();
    let cc = comps.len();
    let n = pts.len();
    let mut data = vec![0.0; n * (1 + cc)];
    let (den, rest) = data.split_at_mut(n);
    den.par_iter_mut().zip(&pts).for_each(|(d, p)| *d = density.sample(p));
    if cc == 1 {
        rest.par_iter_mut().zip(&pts).for_each(|(d, p)| *d = comps[0].sample(p) * curl_scale);
    } else {
        let ft = patch.frame.transpose();
        let local: Vec<Vec3> = pts
            .par_iter()
            .map(|p| ft * Vec3::new(comps[0].sample(p), comps[1].sample(p), comps[2].sample(p)) * curl_scale)
            .collect();
        for c in 0..3 {
            for (i, v) in local.iter().enumerate() {
                rest[c * n + i] = v[c];
            }
        }
    }
    Tensor::new(block_shape(1 + cc, res, ndim), data)
}
