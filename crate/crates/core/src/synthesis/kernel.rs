//! Spherical patch kernels and the accumulated weight grids.

use rayon::prelude::*;

use crate::cage::PatchCage;
use crate::fluid::{ScalarGrid, Vec3};

/// Radial patch weight: 1 up to `s_p / 6`, then linear down to 0 at `s_p / 2`.
pub fn kernel(r: f64, patch_size: f64) -> f64 {
    let inner = patch_size / 6.0;
    let outer = patch_size / 2.0;
    if r <= inner {
        1.0
    } else if r >= outer {
        0.0
    } else {
        (outer - r) / (outer - inner)
    }
}

fn planar_distance(a: &Vec3, b: &Vec3, ndim: usize) -> f64 {
    if ndim == 2 {
        (a - b).xy().norm()
    } else {
        (a - b).norm()
    }
}

/// Sum of undeformed kernels centred at the given points, evaluated at `x`.
pub fn weight_at(centers: &[Vec3], patch_size: f64, x: &Vec3, ndim: usize) -> f64 {
    centers.iter().map(|c| kernel(planar_distance(c, x, ndim), patch_size)).sum()
}

/// Cell range `[lo, hi)` per axis covering a box, clamped to the grid.
fn cell_range(grid: &ScalarGrid, lo: Vec3, hi: Vec3) -> [(usize, usize); 3] {
    let dims = grid.dims();
    let dx = grid.dx();
    let mut out = [(0, 1); 3];
    for a in 0..grid.ndim() {
        let l = ((lo[a] / dx) - 0.5).floor().max(0.0) as usize;
        let h = (((hi[a] / dx) - 0.5).ceil() + 1.0).max(0.0) as usize;
        out[a] = (l.min(dims[a]), h.min(dims[a]));
    }
    out
}

/// Weight grid of undeformed kernels at cage centroids, each scaled by
/// `scale(patch)`.
pub fn accumulate_undeformed(
    patches: &[PatchCage],
    dims: [usize; 3],
    dx: f64,
    scale: impl Fn(&PatchCage) -> f64,
) -> ScalarGrid {
    let mut grid = ScalarGrid::new(dims, dx);
    let ndim = grid.ndim();
    for p in patches {
        let s = scale(p);
        if s == 0.0 {
            continue;
        }
        let c = p.centroid();
        let half = Vec3::repeat(p.size / 2.0);
        let r = cell_range(&grid, c - half, c + half);
        for k in r[2].0..r[2].1 {
            for j in r[1].0..r[1].1 {
                for i in r[0].0..r[0].1 {
                    let x = grid.cell_center(i, j, k);
                    let w = kernel(planar_distance(&c, &x, ndim), p.size);
                    if w > 0.0 {
                        let idx = grid.index(i, j, k);
                        grid.data_mut()[idx] += s * w;
                    }
                }
            }
        }
    }
    grid
}

/// Deformed kernel of one patch: the kernel is evaluated in rest-shape
/// units at the cage coordinates of `x`, so it follows the deformation.
pub fn deformed_kernel(patch: &PatchCage, x: &Vec3) -> Option<(f64, Vec3)> {
    let u = patch.to_cage(x)?;
    let ndim = patch.topology().ndim();
    let mut d2 = 0.0;
    for a in 0..ndim {
        d2 += (u[a] - 0.5).powi(2);
    }
    Some((kernel(d2.sqrt() * patch.size, patch.size), u))
}

/// Visits every cell of `grid` covered by the deformed kernel of `patch`,
/// passing the cell index, kernel weight and cage coordinates. Cells are
/// evaluated in parallel and delivered in index order.
pub fn for_each_deformed_cell(
    patch: &PatchCage,
    grid: &ScalarGrid,
    mut visit: impl FnMut(usize, f64, Vec3),
) {
    let (lo, hi) = patch.bounds();
    let r = cell_range(grid, lo, hi);
    let cells: Vec<[usize; 3]> = (r[2].0..r[2].1)
        .flat_map(|k| (r[1].0..r[1].1).flat_map(move |j| (r[0].0..r[0].1).map(move |i| [i, j, k])))
        .collect();
    let hits: Vec<Option<(usize, f64, Vec3)>> = cells
        .par_iter()
        .map(|&[i, j, k]| {
            let mut x = grid.cell_center(i, j, k);
            if grid.ndim() == 2 {
                x.z = patch.positions[0].z;
            }
            deformed_kernel(patch, &x)
                .filter(|(w, _)| *w > 0.0)
                .map(|(w, u)| (grid.index(i, j, k), w, u))
        })
        .collect();
    for (idx, w, u) in hits.into_iter().flatten() {
        visit(idx, w, u);
    }
}
