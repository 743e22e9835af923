//! Field operators: semi-Lagrangian transport, Gaussian low-pass, resampling,
//! vorticity and center of mass.

use rayon::prelude::*;

use super::grid::{lin, sample_lattice, ScalarGrid, Vec3, VectorGrid};
use crate::error::{Error, Result};

/// Fields that can be carried along by a velocity field.
pub trait Advect: Sized {
    /// Back-traces every sample one step through `vel`, shifted by the
    /// constant world-space `offset`, and interpolates linearly.
    fn advect(&self, vel: &VectorGrid, dt: f64, offset: Vec3) -> Result<Self>;
}

fn check_cells(vel: &VectorGrid, dims: [usize; 3], dx: f64) -> Result<()> {
    if vel.dims() != dims || vel.dx() != dx {
        return Err(Error::DimensionMismatch(format!(
            "velocity {:?}/{} vs field {:?}/{}",
            vel.dims(),
            vel.dx(),
            dims,
            dx
        )));
    }
    Ok(())
}

/// Semi-Lagrangian advection of one lattice whose samples sit at
/// `(index + offset) * dx`.
fn advect_lattice(
    data: &[f64],
    dims: [usize; 3],
    lattice_offset: [f64; 3],
    vel: &VectorGrid,
    dt: f64,
    shift: Vec3,
) -> Vec<f64> {
    let dx = vel.dx();
    let row = dims[0];
    let mut out = vec![0.0; data.len()];
    out.par_chunks_mut(row).enumerate().for_each(|(r, chunk)| {
        let j = r % dims[1];
        let k = r / dims[1];
        for (i, o) in chunk.iter_mut().enumerate() {
            let p = Vec3::new(
                (i as f64 + lattice_offset[0]) * dx,
                (j as f64 + lattice_offset[1]) * dx,
                (k as f64 + lattice_offset[2]) * dx,
            );
            let disp = vel.sample(&p) * dt + shift;
            let idx = [
                i as f64 - disp.x / dx,
                j as f64 - disp.y / dx,
                if dims[2] > 1 { k as f64 - disp.z / dx } else { k as f64 },
            ];
            *o = sample_lattice(data, dims, idx);
        }
    });
    out
}

impl Advect for ScalarGrid {
    fn advect(&self, vel: &VectorGrid, dt: f64, offset: Vec3) -> Result<Self> {
        check_cells(vel, self.dims(), self.dx())?;
        let data = advect_lattice(self.data(), self.dims(), [0.5; 3], vel, dt, offset);
        ScalarGrid::from_vec(self.dims(), self.dx(), data)
    }
}

impl Advect for VectorGrid {
    fn advect(&self, vel: &VectorGrid, dt: f64, offset: Vec3) -> Result<Self> {
        check_cells(vel, self.dims(), self.dx())?;
        let mut out = VectorGrid::new(self.dims(), self.dx());
        for a in 0..self.ndim() {
            let data = advect_lattice(
                self.comp(a),
                self.comp_dims(a),
                VectorGrid::comp_offset(a),
                vel,
                dt,
                offset,
            );
            *out.comp_mut(a) = data;
        }
        Ok(out)
    }
}

/// Semi-Lagrangian advection (free-function form).
pub fn advect_semi_lagrangian<F: Advect>(
    field: &F,
    vel: &VectorGrid,
    dt: f64,
    offset: Vec3,
) -> Result<F> {
    field.advect(vel, dt, offset)
}

/// Normalized 1D Gaussian taps, truncated at 3 sigma.
pub fn gaussian_taps(sigma_cells: f64) -> Vec<f64> {
    if sigma_cells <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma_cells).ceil() as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|o| {
            let x = o as f64;
            (-x * x / (2.0 * sigma_cells * sigma_cells)).exp()
        })
        .collect();
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

fn blur_axis(data: &[f64], dims: [usize; 3], axis: usize, taps: &[f64]) -> Vec<f64> {
    let n = dims[axis];
    let radius = (taps.len() / 2) as isize;
    let mut out = vec![0.0; data.len()];
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let idx = [i, j, k];
                let mut acc = 0.0;
                for (t, w) in taps.iter().enumerate() {
                    let o = t as isize - radius;
                    let s = (idx[axis] as isize + o).clamp(0, n as isize - 1) as usize;
                    let mut q = idx;
                    q[axis] = s;
                    acc += w * data[lin(dims, q[0], q[1], q[2])];
                }
                out[lin(dims, i, j, k)] = acc;
            }
        }
    }
    out
}

/// Separable Gaussian blur of one lattice with replicate-edge boundaries.
pub(crate) fn blur_lattice(data: &[f64], dims: [usize; 3], sigma_cells: f64) -> Vec<f64> {
    let taps = gaussian_taps(sigma_cells);
    if taps.len() == 1 {
        return data.to_vec();
    }
    let mut cur = data.to_vec();
    for axis in 0..3 {
        if dims[axis] > 1 {
            cur = blur_axis(&cur, dims, axis, &taps);
        }
    }
    cur
}

/// Fields that can be low-pass filtered and resampled.
pub trait Filter: Sized {
    /// Gaussian blur with standard deviation `cutoff_width / 2` (world units).
    fn low_pass(&self, cutoff_width: f64) -> Self;
    /// Linear resampling onto `new_dims` cells covering the same domain.
    fn resample(&self, new_dims: [usize; 3]) -> Result<Self>;
}

fn new_cell_size(dims: [usize; 3], dx: f64, new_dims: [usize; 3]) -> Result<f64> {
    if new_dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidParameter(format!(
            "resample target {new_dims:?} has a zero extent"
        )));
    }
    if (dims[2] == 1) != (new_dims[2] == 1) {
        return Err(Error::DimensionMismatch(
            "resampling cannot change the spatial dimensionality".into(),
        ));
    }
    Ok(dx * dims[0] as f64 / new_dims[0] as f64)
}

impl Filter for ScalarGrid {
    fn low_pass(&self, cutoff_width: f64) -> Self {
        let sigma = 0.5 * cutoff_width / self.dx();
        let data = blur_lattice(self.data(), self.dims(), sigma);
        ScalarGrid::from_vec(self.dims(), self.dx(), data).expect("same shape")
    }

    fn resample(&self, new_dims: [usize; 3]) -> Result<Self> {
        if new_dims == self.dims() {
            return Ok(self.clone());
        }
        let new_dx = new_cell_size(self.dims(), self.dx(), new_dims)?;
        let ratio = new_dx / self.dx();
        let src = if ratio > 1.0 {
            self.low_pass(self.dx() * ratio)
        } else {
            self.clone()
        };
        Ok(ScalarGrid::from_fn(new_dims, new_dx, |p| src.sample(&p)))
    }
}

impl Filter for VectorGrid {
    fn low_pass(&self, cutoff_width: f64) -> Self {
        let sigma = 0.5 * cutoff_width / self.dx();
        let mut out = self.clone();
        for a in 0..self.ndim() {
            *out.comp_mut(a) = blur_lattice(self.comp(a), self.comp_dims(a), sigma);
        }
        out
    }

    fn resample(&self, new_dims: [usize; 3]) -> Result<Self> {
        if new_dims == self.dims() {
            return Ok(self.clone());
        }
        let new_dx = new_cell_size(self.dims(), self.dx(), new_dims)?;
        let ratio = new_dx / self.dx();
        let src = if ratio > 1.0 {
            self.low_pass(self.dx() * ratio)
        } else {
            self.clone()
        };
        Ok(VectorGrid::from_fn(new_dims, new_dx, |p| src.sample(&p)))
    }
}

pub fn low_pass<F: Filter>(field: &F, cutoff_width: f64) -> F {
    field.low_pass(cutoff_width)
}

pub fn resample<F: Filter>(field: &F, new_dims: [usize; 3]) -> Result<F> {
    field.resample(new_dims)
}

/// Vorticity: a scalar in 2D, a vector (three cell-centered grids) in 3D.
#[derive(Debug, Clone, PartialEq)]
pub enum Curl {
    Planar(ScalarGrid),
    Spatial([ScalarGrid; 3]),
}

impl Curl {
    pub fn components(&self) -> Vec<&ScalarGrid> {
        match self {
            Curl::Planar(g) => vec![g],
            Curl::Spatial(gs) => gs.iter().collect(),
        }
    }

    pub fn channel_count(&self) -> usize {
        match self {
            Curl::Planar(_) => 1,
            Curl::Spatial(_) => 3,
        }
    }
}

/// Vorticity of the cell-averaged velocity using central differences inside
/// the domain and one-sided differences on the boundary.
pub fn curl(vel: &VectorGrid) -> Curl {
    let dims = vel.dims();
    let dx = vel.dx();
    let ndim = vel.ndim();
    let mut centered: [ScalarGrid; 3] = [
        ScalarGrid::new(dims, dx),
        ScalarGrid::new(dims, dx),
        ScalarGrid::new(dims, dx),
    ];
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let v = vel.cell_velocity(i, j, k);
                for (a, c) in centered.iter_mut().enumerate().take(ndim) {
                    c.set(i, j, k, v[a]);
                }
            }
        }
    }
    // d(component c)/d(axis a) at every cell.
    let deriv = |c: usize, a: usize, i: usize, j: usize, k: usize| -> f64 {
        let g = &centered[c];
        let n = dims[a];
        if n < 2 {
            return 0.0;
        }
        let idx = [i, j, k];
        let (lo, hi, span) = if idx[a] == 0 {
            (0, 1, 1.0)
        } else if idx[a] == n - 1 {
            (n - 2, n - 1, 1.0)
        } else {
            (idx[a] - 1, idx[a] + 1, 2.0)
        };
        let mut ql = idx;
        let mut qh = idx;
        ql[a] = lo;
        qh[a] = hi;
        (g.get(qh[0], qh[1], qh[2]) - g.get(ql[0], ql[1], ql[2])) / (span * dx)
    };
    if ndim == 2 {
        let mut w = ScalarGrid::new(dims, dx);
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                w.set(i, j, 0, deriv(1, 0, i, j, 0) - deriv(0, 1, i, j, 0));
            }
        }
        Curl::Planar(w)
    } else {
        let mut out = [
            ScalarGrid::new(dims, dx),
            ScalarGrid::new(dims, dx),
            ScalarGrid::new(dims, dx),
        ];
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    out[0].set(i, j, k, deriv(2, 1, i, j, k) - deriv(1, 2, i, j, k));
                    out[1].set(i, j, k, deriv(0, 2, i, j, k) - deriv(2, 0, i, j, k));
                    out[2].set(i, j, k, deriv(1, 0, i, j, k) - deriv(0, 1, i, j, k));
                }
            }
        }
        Curl::Spatial(out)
    }
}

/// Density-weighted mean cell-center position.
pub fn center_of_mass(density: &ScalarGrid) -> Result<Vec3> {
    let dims = density.dims();
    let mut total = 0.0;
    let mut acc = Vec3::zeros();
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let d = density.get(i, j, k);
                if d != 0.0 {
                    total += d;
                    acc += density.cell_center(i, j, k) * d;
                }
            }
        }
    }
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::EmptyField);
    }
    Ok(acc / total)
}
