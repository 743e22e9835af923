//! Soft-binned gradient-direction histograms on the sphere (or circle in 2D)
//! and the orientation frame derived from them.

use std::f64::consts::PI;

use nalgebra::Matrix3;

use crate::fluid::{ScalarGrid, Vec3};

/// Polar subdivisions used for orientation.
pub const DEFAULT_BINS: usize = 16;
/// Half-width of the sampled region in cells (a 9^d block).
pub const DEFAULT_RADIUS: usize = 4;

/// Bins indexed `i * n_b + j` with azimuth bin `i < 2 n_b` and polar bin
/// `j < n_b`; in 2D only the `2 n_b` azimuth bins exist.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientHistogram {
    n_b: usize,
    ndim: usize,
    bins: Vec<f64>,
}

/// Integer part and fraction of a coordinate measured in bin units.
/// `w(|d|) = max(0, 1 - |d|)` is nonzero only for the two bracketing centres.
fn split(s: f64) -> (isize, f64) {
    let base = s.floor();
    (base as isize, s - base)
}

impl GradientHistogram {
    pub fn new(n_b: usize, ndim: usize) -> Self {
        assert!(n_b >= 1);
        let len = if ndim == 3 { 2 * n_b * n_b } else { 2 * n_b };
        Self {
            n_b,
            ndim,
            bins: vec![0.0; len],
        }
    }

    pub fn step(&self) -> f64 {
        PI / self.n_b as f64
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    fn azimuth_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.step()
    }

    fn polar_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.step()
    }

    /// Unit central direction of a bin.
    pub fn direction(&self, idx: usize) -> Vec3 {
        if self.ndim == 2 {
            let t = self.azimuth_center(idx);
            return Vec3::new(t.cos(), t.sin(), 0.0);
        }
        let (i, j) = (idx / self.n_b, idx % self.n_b);
        let (t, p) = (self.azimuth_center(i), self.polar_center(j));
        Vec3::new(p.sin() * t.cos(), p.sin() * t.sin(), p.cos())
    }

    /// Solid angle (arc length in 2D) covered by a bin.
    pub fn solid_angle(&self, idx: usize) -> f64 {
        let d = self.step();
        if self.ndim == 2 {
            return d;
        }
        let j = idx % self.n_b;
        let upper = (j + 1) as f64 * d;
        d * ((upper - d).cos() - upper.cos())
    }

    /// Adds a gradient sample with an extra scalar weight.
    pub fn add(&mut self, g: &Vec3, weight: f64) {
        let r = if self.ndim == 2 { g.xy().norm() } else { g.norm() };
        if !(r > 0.0) || !(weight > 0.0) {
            return;
        }
        let d = self.step();
        let n_az = 2 * self.n_b;
        let theta = g.y.atan2(g.x).rem_euclid(2.0 * PI);
        // Tent weights around the two nearest bin centres, in bin units.
        let (a0, fa) = split(theta / d - 0.5);
        let az = [
            ((a0.rem_euclid(n_az as isize)) as usize, 1.0 - fa),
            (((a0 + 1).rem_euclid(n_az as isize)) as usize, fa),
        ];
        if self.ndim == 2 {
            for (i, wa) in az {
                self.bins[i] += wa * r * weight / d;
            }
            return;
        }
        let phi = (g.z / r).clamp(-1.0, 1.0).acos();
        let (p0, fp) = split(phi / d - 0.5);
        for (j, wp) in [(p0, 1.0 - fp), (p0 + 1, fp)] {
            if j < 0 || j >= self.n_b as isize || wp <= 0.0 {
                continue;
            }
            for &(i, wa) in &az {
                if wa <= 0.0 {
                    continue;
                }
                let idx = i * self.n_b + j as usize;
                self.bins[idx] += wp * wa * r * weight / self.solid_angle(idx);
            }
        }
    }

    /// First bin with the largest value, or `None` when all bins are zero.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (idx, &h) in self.bins.iter().enumerate() {
            if h > best.map_or(0.0, |b| b.1) {
                best = Some((idx, h));
            }
        }
        best.map(|b| b.0)
    }
}

/// Density gradients in the sampled block around `x`, each paired with its
/// Gaussian distance weight.
fn region_samples(density: &ScalarGrid, x: &Vec3, radius: usize) -> Vec<(Vec3, f64)> {
    let dims = density.dims();
    let dx = density.dx();
    let sigma = (radius.max(1) as f64) * dx / 2.0;
    let r = radius as isize;
    let mut centre = [0isize; 3];
    for a in 0..3 {
        centre[a] = ((x[a] / dx).floor() as isize).clamp(0, dims[a] as isize - 1);
    }
    let rz = if density.is_2d() { 0 } else { r };
    let mut out = Vec::new();
    for dk in -rz..=rz {
        for dj in -r..=r {
            for di in -r..=r {
                let q = [centre[0] + di, centre[1] + dj, centre[2] + dk];
                let c: Vec<usize> = (0..3)
                    .map(|a| q[a].clamp(0, dims[a] as isize - 1) as usize)
                    .collect();
                let o = density.cell_center(c[0], c[1], c[2]);
                let mut dist2 = (x - o).norm_squared();
                if density.is_2d() {
                    dist2 = (x - o).xy().norm_squared();
                }
                let w = (-dist2 / (2.0 * sigma * sigma)).exp();
                out.push((density.gradient_at(c[0], c[1], c[2]), w));
            }
        }
    }
    out
}

pub fn gradient_histogram(
    density: &ScalarGrid,
    x: &Vec3,
    n_b: usize,
    region_radius: usize,
) -> GradientHistogram {
    let mut h = GradientHistogram::new(n_b, density.ndim());
    for (g, w) in region_samples(density, x, region_radius) {
        h.add(&g, w);
    }
    h
}

fn any_perpendicular(b: &Vec3) -> Vec3 {
    let axis = if b.x.abs() <= b.y.abs() && b.x.abs() <= b.z.abs() {
        Vec3::x()
    } else if b.y.abs() <= b.z.abs() {
        Vec3::y()
    } else {
        Vec3::z()
    };
    (axis - b * b.dot(&axis)).normalize()
}

/// Orthonormal frame `[b_x | b_y | b_x × b_y]` aligned with the dominant
/// gradient directions around `x`; the identity when the region is flat.
pub fn init_orientation(density: &ScalarGrid, x: &Vec3) -> Matrix3<f64> {
    init_orientation_with(density, x, DEFAULT_BINS, DEFAULT_RADIUS)
}

pub fn init_orientation_with(
    density: &ScalarGrid,
    x: &Vec3,
    n_b: usize,
    region_radius: usize,
) -> Matrix3<f64> {
    let samples = region_samples(density, x, region_radius);
    let ndim = density.ndim();
    let mut main = GradientHistogram::new(n_b, ndim);
    for (g, w) in &samples {
        main.add(g, *w);
    }
    let Some(k) = main.argmax() else {
        return Matrix3::identity();
    };
    let bx = main.direction(k);
    let by = if ndim == 2 {
        Vec3::new(-bx.y, bx.x, 0.0)
    } else {
        let mut tangent = GradientHistogram::new(n_b, ndim);
        for (g, w) in &samples {
            tangent.add(&(g - bx * g.dot(&bx)), *w);
        }
        let candidate = tangent.argmax().map(|t| {
            let b = tangent.direction(t);
            b - bx * b.dot(&bx)
        });
        match candidate {
            Some(c) if c.norm() > 1e-6 => c.normalize(),
            _ => any_perpendicular(&bx),
        }
    };
    let bz = if ndim == 2 { Vec3::z() } else { bx.cross(&by) };
    Matrix3::from_columns(&[bx, by, bz])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn angle(a: &Vec3, b: &Vec3) -> f64 {
        (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn flat_density_gives_empty_histogram_and_identity() {
        let g = ScalarGrid::filled([16, 16, 16], 1.0, 0.3);
        let x = Vec3::new(8.0, 8.0, 8.0);
        let h = gradient_histogram(&g, &x, 16, 4);
        assert!(h.bins().iter().all(|&b| b == 0.0));
        assert_eq!(init_orientation(&g, &x), Matrix3::identity());
    }

    #[test]
    fn bin_geometry() {
        let h = GradientHistogram::new(16, 3);
        let total: f64 = (0..h.bins().len()).map(|i| h.solid_angle(i)).sum();
        assert!((total - 4.0 * PI).abs() < 1e-12);
        for i in 0..h.bins().len() {
            assert!((h.direction(i).norm() - 1.0).abs() < 1e-12);
        }
        let h2 = GradientHistogram::new(16, 2);
        let total: f64 = (0..h2.bins().len()).map(|i| h2.solid_angle(i)).sum();
        assert!((total - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn single_sample_splits_by_tent_weights() {
        // Direction at the centre of bin (i=3, j=5) gets the full weight.
        let mut h = GradientHistogram::new(8, 3);
        let d = h.direction(3 * 8 + 5);
        h.add(&(d * 2.0), 1.0);
        let expect = 2.0 / h.solid_angle(3 * 8 + 5);
        assert!((h.bins()[3 * 8 + 5] - expect).abs() < 1e-9);
        assert_eq!(h.argmax(), Some(3 * 8 + 5));
        // Periodic azimuth: a direction just below theta = 0 lands in the last bin.
        let mut h2 = GradientHistogram::new(8, 2);
        let t = -0.25 * h2.step();
        h2.add(&Vec3::new(t.cos(), t.sin(), 0.0), 1.0);
        assert_eq!(h2.argmax(), Some(15));
        assert!((h2.bins()[15] - 0.75 / h2.step()).abs() < 1e-12);
        assert!((h2.bins()[0] - 0.25 / h2.step()).abs() < 1e-12);
    }

    #[test]
    fn ramp_along_x_peaks_at_x_bin() {
        let g = ScalarGrid::from_fn([20, 20, 20], 1.0, |p| 0.1 * p.x);
        let x = Vec3::new(10.0, 10.0, 10.0);
        let h = gradient_histogram(&g, &x, 16, 4);
        let k = h.argmax().unwrap();
        // Azimuth bin 0 covers [0, step); +x sits on its lower edge.
        assert_eq!(k / 16, 0);
        assert!(angle(&h.direction(k), &Vec3::x()) < h.step());
    }

    #[test]
    fn rotating_the_field_rotates_the_peak() {
        let dir = Vec3::new(0.8, 0.35, 0.3).normalize();
        let rotated = Vec3::new(-dir.y, dir.x, dir.z);
        let x = Vec3::new(10.0, 10.0, 10.0);
        let ga = ScalarGrid::from_fn([20, 20, 20], 1.0, |p| dir.dot(&p));
        let gb = ScalarGrid::from_fn([20, 20, 20], 1.0, |p| rotated.dot(&p));
        let ha = gradient_histogram(&ga, &x, 16, 4);
        let hb = gradient_histogram(&gb, &x, 16, 4);
        let (ka, kb) = (ha.argmax().unwrap(), hb.argmax().unwrap());
        let da = ha.direction(ka);
        let turned = Vec3::new(-da.y, da.x, da.z);
        assert!(angle(&turned, &hb.direction(kb)) <= ha.step());
    }

    #[test]
    fn frame_follows_primary_and_secondary_ramps() {
        // Primary axis on the centre of the bin nearest +x so the main
        // direction is not split across bin edges.
        let step = PI / 16.0;
        let p = GradientHistogram::new(16, 3).direction(7);
        let s = (Vec3::y() - p * p.y).normalize();
        let c = Vec3::new(10.0, 10.0, 10.0);
        let g = ScalarGrid::from_fn([20, 20, 20], 1.0, |q| {
            let t = s.dot(&(q - c));
            p.dot(&q) + 0.02 * t * t.abs()
        });
        let f = init_orientation(&g, &c);
        let axes = [p, s, p.cross(&s)];
        for (a, axis) in axes.iter().enumerate() {
            assert!(angle(&f.column(a).into_owned(), axis) <= step, "axis {a}: {f}");
        }
        // The field axes are themselves within a bin of the coordinate axes.
        for (axis, e) in axes.iter().zip([Vec3::x(), Vec3::y(), Vec3::z()]) {
            assert!(angle(axis, &e) <= step);
        }
    }

    #[test]
    fn planar_frame() {
        let g = ScalarGrid::from_fn([20, 20, 1], 1.0, |p| p.y);
        let f = init_orientation(&g, &Vec3::new(10.0, 10.0, 0.5));
        assert!(angle(&f.column(0).into_owned(), &Vec3::y()) <= PI / 16.0);
        assert!((f.determinant() - 1.0).abs() < 1e-12);
        assert_eq!(f.column(2).into_owned(), Vec3::z());
    }

    #[test]
    fn frames_are_orthonormal_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..100 {
            let dims = if trial % 2 == 0 { [12, 12, 12] } else { [16, 16, 1] };
            let data: Vec<f64> = (0..dims.iter().product::<usize>()).map(|_| rng.gen()).collect();
            let g = ScalarGrid::from_vec(dims, 1.0, data).unwrap();
            let x = Vec3::new(rng.gen_range(0.0..12.0), rng.gen_range(0.0..12.0), 0.5);
            let f = init_orientation(&g, &x);
            let err = (f.transpose() * f - Matrix3::identity()).abs().max();
            assert!(err < 1e-6, "trial {trial}: {err}");
            assert!((f.determinant() - 1.0).abs() < 1e-6);
        }
    }
}
