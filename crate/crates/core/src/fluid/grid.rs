//! Uniform Cartesian fields. Cell-centered scalars and face-centered (MAC)
//! velocities share one convention: arrays are x-fastest, and a grid whose
//! third extent is 1 is treated as two-dimensional.

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Clamped trilinear interpolation on a lattice given in index space.
/// Axes of extent 1 collapse to their single sample.
pub fn sample_lattice(data: &[f64], dims: [usize; 3], idx: [f64; 3]) -> f64 {
    let mut base = [0usize; 3];
    let mut frac = [0.0f64; 3];
    for a in 0..3 {
        let n = dims[a];
        if n <= 1 {
            continue;
        }
        let t = idx[a].clamp(0.0, (n - 1) as f64);
        let i = (t.floor() as usize).min(n - 2);
        base[a] = i;
        frac[a] = t - i as f64;
    }
    let [nx, ny, _] = dims;
    let at = |i: usize, j: usize, k: usize| data[i + nx * (j + ny * k)];
    let step = |a: usize| usize::from(dims[a] > 1);
    let (i0, j0, k0) = (base[0], base[1], base[2]);
    let (i1, j1, k1) = (i0 + step(0), j0 + step(1), k0 + step(2));
    let lerp = |a: f64, b: f64, t: f64| {
        if t == 0.0 {
            a
        } else if t == 1.0 {
            b
        } else {
            a + t * (b - a)
        }
    };

    let c00 = lerp(at(i0, j0, k0), at(i1, j0, k0), frac[0]);
    let c10 = lerp(at(i0, j1, k0), at(i1, j1, k0), frac[0]);
    let c01 = lerp(at(i0, j0, k1), at(i1, j0, k1), frac[0]);
    let c11 = lerp(at(i0, j1, k1), at(i1, j1, k1), frac[0]);
    let c0 = lerp(c00, c10, frac[1]);
    let c1 = lerp(c01, c11, frac[1]);
    lerp(c0, c1, frac[2])
}

#[inline]
pub(crate) fn lin(dims: [usize; 3], i: usize, j: usize, k: usize) -> usize {
    i + dims[0] * (j + dims[1] * k)
}

/// Cell-centered scalar field (density, weights, pressure).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    dims: [usize; 3],
    dx: f64,
    data: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(dims: [usize; 3], dx: f64) -> Self {
        Self::filled(dims, dx, 0.0)
    }

    pub fn filled(dims: [usize; 3], dx: f64, value: f64) -> Self {
        assert!(dims.iter().all(|&d| d >= 1), "grid dims must be >= 1");
        assert!(dx > 0.0, "cell size must be positive");
        Self {
            dims,
            dx,
            data: vec![value; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn from_vec(dims: [usize; 3], dx: f64, data: Vec<f64>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) || !(dx > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grid dims {dims:?} / dx {dx} invalid"
            )));
        }
        if data.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::DimensionMismatch(format!(
                "{} values for dims {dims:?}",
                data.len()
            )));
        }
        Ok(Self { dims, dx, data })
    }

    /// Builds a field by evaluating `f` at every cell center.
    pub fn from_fn(dims: [usize; 3], dx: f64, f: impl Fn(Vec3) -> f64) -> Self {
        let mut g = Self::new(dims, dx);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let p = g.cell_center(i, j, k);
                    g.data[lin(dims, i, j, k)] = f(p);
                }
            }
        }
        g
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
    pub fn len(&self) -> usize {
        self.data.len()
    }
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
    pub fn is_2d(&self) -> bool {
        self.dims[2] == 1
    }
    pub fn ndim(&self) -> usize {
        if self.is_2d() {
            2
        } else {
            3
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        lin(self.dims, i, j, k)
    }
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.index(i, j, k);
        self.data[idx] = v;
    }

    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::new(
            (i as f64 + 0.5) * self.dx,
            (j as f64 + 0.5) * self.dx,
            (k as f64 + 0.5) * self.dx,
        )
    }

    /// World-space extent of the domain per axis.
    pub fn extent(&self) -> Vec3 {
        Vec3::new(
            self.dims[0] as f64 * self.dx,
            self.dims[1] as f64 * self.dx,
            self.dims[2] as f64 * self.dx,
        )
    }

    pub fn center(&self) -> Vec3 {
        self.extent() * 0.5
    }

    pub fn to_index_space(&self, p: &Vec3) -> [f64; 3] {
        [
            p.x / self.dx - 0.5,
            p.y / self.dx - 0.5,
            p.z / self.dx - 0.5,
        ]
    }

    /// Clamped trilinear sample at a world position.
    pub fn sample(&self, p: &Vec3) -> f64 {
        sample_lattice(&self.data, self.dims, self.to_index_space(p))
    }

    pub fn same_shape(&self, other: &ScalarGrid) -> bool {
        self.dims == other.dims && self.dx == other.dx
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map_inplace(&mut self, f: impl Fn(f64) -> f64) {
        for v in &mut self.data {
            *v = f(*v);
        }
    }

    /// Central-difference gradient at a cell, one-sided at the boundary.
    pub fn gradient_at(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let mut g = Vec3::zeros();
        let idx = [i, j, k];
        for a in 0..self.ndim() {
            let n = self.dims[a];
            if n < 2 {
                continue;
            }
            let mut lo = idx;
            let mut hi = idx;
            let span;
            if idx[a] == 0 {
                hi[a] = 1;
                span = 1.0;
            } else if idx[a] == n - 1 {
                lo[a] = n - 2;
                span = 1.0;
            } else {
                lo[a] -= 1;
                hi[a] += 1;
                span = 2.0;
            }
            g[a] = (self.get(hi[0], hi[1], hi[2]) - self.get(lo[0], lo[1], lo[2]))
                / (span * self.dx);
        }
        g
    }
}

/// Staggered (MAC) velocity: component `a` lives on the faces normal to
/// axis `a`, so its array has one extra sample along that axis.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorGrid {
    dims: [usize; 3],
    dx: f64,
    comps: [Vec<f64>; 3],
}

impl VectorGrid {
    pub fn new(dims: [usize; 3], dx: f64) -> Self {
        assert!(dims.iter().all(|&d| d >= 1), "grid dims must be >= 1");
        assert!(dx > 0.0, "cell size must be positive");
        let is_2d = dims[2] == 1;
        let mut comps: [Vec<f64>; 3] = Default::default();
        for (a, c) in comps.iter_mut().enumerate() {
            if a == 2 && is_2d {
                continue;
            }
            let cd = Self::comp_dims_for(dims, a);
            *c = vec![0.0; cd[0] * cd[1] * cd[2]];
        }
        Self { dims, dx, comps }
    }

    fn comp_dims_for(dims: [usize; 3], a: usize) -> [usize; 3] {
        let mut d = dims;
        d[a] += 1;
        d
    }

    /// Builds a velocity by evaluating `f` at each face center.
    pub fn from_fn(dims: [usize; 3], dx: f64, f: impl Fn(Vec3) -> Vec3) -> Self {
        let mut g = Self::new(dims, dx);
        for a in 0..g.ndim() {
            let cd = g.comp_dims(a);
            for k in 0..cd[2] {
                for j in 0..cd[1] {
                    for i in 0..cd[0] {
                        let p = g.face_position(a, i, j, k);
                        g.comps[a][lin(cd, i, j, k)] = f(p)[a];
                    }
                }
            }
        }
        g
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn is_2d(&self) -> bool {
        self.dims[2] == 1
    }
    pub fn ndim(&self) -> usize {
        if self.is_2d() {
            2
        } else {
            3
        }
    }
    pub fn comp_dims(&self, a: usize) -> [usize; 3] {
        Self::comp_dims_for(self.dims, a)
    }
    pub fn comp(&self, a: usize) -> &[f64] {
        &self.comps[a]
    }
    pub fn comp_mut(&mut self, a: usize) -> &mut Vec<f64> {
        &mut self.comps[a]
    }

    /// Index-space offset of component `a`'s lattice relative to the origin.
    pub fn comp_offset(a: usize) -> [f64; 3] {
        let mut o = [0.5; 3];
        o[a] = 0.0;
        o
    }

    pub fn face_position(&self, a: usize, i: usize, j: usize, k: usize) -> Vec3 {
        let o = Self::comp_offset(a);
        Vec3::new(
            (i as f64 + o[0]) * self.dx,
            (j as f64 + o[1]) * self.dx,
            (k as f64 + o[2]) * self.dx,
        )
    }

    pub fn sample_comp(&self, a: usize, p: &Vec3) -> f64 {
        if a >= self.ndim() {
            return 0.0;
        }
        let o = Self::comp_offset(a);
        let idx = [p.x / self.dx - o[0], p.y / self.dx - o[1], p.z / self.dx - o[2]];
        sample_lattice(&self.comps[a], self.comp_dims(a), idx)
    }

    /// Interpolated velocity at a world position (z is zero in 2D).
    pub fn sample(&self, p: &Vec3) -> Vec3 {
        Vec3::new(
            self.sample_comp(0, p),
            self.sample_comp(1, p),
            self.sample_comp(2, p),
        )
    }

    pub fn same_shape(&self, other: &VectorGrid) -> bool {
        self.dims == other.dims && self.dx == other.dx
    }

    pub fn same_cells(&self, other: &ScalarGrid) -> bool {
        self.dims == other.dims() && self.dx == other.dx()
    }

    /// Velocity averaged to cell centers.
    pub fn cell_velocity(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let mut v = Vec3::zeros();
        for a in 0..self.ndim() {
            let cd = self.comp_dims(a);
            let mut hi = [i, j, k];
            hi[a] += 1;
            v[a] = 0.5 * (self.comps[a][lin(cd, i, j, k)] + self.comps[a][lin(cd, hi[0], hi[1], hi[2])]);
        }
        v
    }

    /// Discrete MAC divergence per cell.
    pub fn divergence(&self) -> ScalarGrid {
        let mut div = ScalarGrid::new(self.dims, self.dx);
        let d = self.dims;
        for k in 0..d[2] {
            for j in 0..d[1] {
                for i in 0..d[0] {
                    let mut s = 0.0;
                    for a in 0..self.ndim() {
                        let cd = self.comp_dims(a);
                        let mut hi = [i, j, k];
                        hi[a] += 1;
                        s += self.comps[a][lin(cd, hi[0], hi[1], hi[2])]
                            - self.comps[a][lin(cd, i, j, k)];
                    }
                    div.set(i, j, k, s / self.dx);
                }
            }
        }
        div
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flat_map(|c| c.iter()).all(|v| v.is_finite())
    }

    /// Zeroes the normal component on the domain walls.
    pub fn enforce_closed_box(&mut self) {
        for a in 0..self.ndim() {
            let cd = self.comp_dims(a);
            let comp = &mut self.comps[a];
            for k in 0..cd[2] {
                for j in 0..cd[1] {
                    for i in 0..cd[0] {
                        let idx = [i, j, k];
                        if idx[a] == 0 || idx[a] == cd[a] - 1 {
                            comp[lin(cd, i, j, k)] = 0.0;
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_hits_cell_values_at_centers() {
        let g = ScalarGrid::from_fn([4, 3, 1], 0.5, |p| p.x + 10.0 * p.y);
        for j in 0..3 {
            for i in 0..4 {
                let c = g.cell_center(i, j, 0);
                assert!((g.sample(&c) - g.get(i, j, 0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sample_clamps_outside_domain() {
        let g = ScalarGrid::from_fn([4, 4, 4], 1.0, |p| p.x);
        let far = Vec3::new(-10.0, 2.0, 2.0);
        assert_eq!(g.sample(&far), g.get(0, 2, 2));
    }

    #[test]
    fn face_sampling_reproduces_linear_velocity() {
        let v = VectorGrid::from_fn([6, 6, 1], 1.0, |p| Vec3::new(-p.y, p.x, 0.0));
        let q = Vec3::new(2.3, 3.7, 0.5);
        let s = v.sample(&q);
        assert!((s.x + q.y).abs() < 1e-12);
        assert!((s.y - q.x).abs() < 1e-12);
    }

    #[test]
    fn uniform_velocity_has_zero_divergence() {
        let v = VectorGrid::from_fn([5, 5, 5], 0.3, |_| Vec3::new(1.0, -2.0, 0.5));
        assert!(v.divergence().data().iter().all(|d| d.abs() < 1e-12));
    }
}
