//! Maps between normalized cage coordinates `u in [0,1]^d` and world space
//! through the (possibly deformed) vertex lattice.

use nalgebra::{Matrix2, Matrix3, Vector2};

use super::topology::CageTopology;
use crate::fluid::Vec3;

/// Multilinear interpolation of a cell's corners (bit order as in
/// [`CageTopology::cell_vertices`]) at local coordinates `t`.
pub fn interpolate_cell(corners: &[Vec3], t: &Vec3) -> Vec3 {
    let mut p = Vec3::zeros();
    for (b, c) in corners.iter().enumerate() {
        let mut w = 1.0;
        for a in 0..corners.len().trailing_zeros() as usize {
            w *= if (b >> a) & 1 == 1 { t[a] } else { 1.0 - t[a] };
        }
        p += c * w;
    }
    p
}

fn cell_jacobian(corners: &[Vec3], t: &Vec3) -> Matrix3<f64> {
    let ndim = corners.len().trailing_zeros() as usize;
    let mut jac = Matrix3::zeros();
    for (b, c) in corners.iter().enumerate() {
        for d in 0..ndim {
            let mut w = if (b >> d) & 1 == 1 { 1.0 } else { -1.0 };
            for a in 0..ndim {
                if a != d {
                    w *= if (b >> a) & 1 == 1 { t[a] } else { 1.0 - t[a] };
                }
            }
            for r in 0..3 {
                jac[(r, d)] += c[r] * w;
            }
        }
    }
    jac
}

/// Newton inversion of the cell map. Returns local coordinates when `p`
/// lies inside the cell (with a small tolerance).
pub fn invert_cell(corners: &[Vec3], p: &Vec3) -> Option<Vec3> {
    const SLACK: f64 = 1e-9;
    let ndim = corners.len().trailing_zeros() as usize;
    let scale = corners
        .iter()
        .map(|c| (c - corners[0]).norm())
        .fold(0.0f64, f64::max);
    if !(scale > 0.0) {
        return None;
    }
    let mut t = Vec3::new(0.5, 0.5, if ndim == 3 { 0.5 } else { 0.0 });
    for _ in 0..30 {
        let mut r = interpolate_cell(corners, &t) - p;
        if ndim == 2 {
            r.z = 0.0;
        }
        if r.norm() <= 1e-12 * scale {
            break;
        }
        let jac = cell_jacobian(corners, &t);
        let step = if ndim == 3 {
            jac.lu().solve(&r)?
        } else {
            let j2 = Matrix2::new(jac[(0, 0)], jac[(0, 1)], jac[(1, 0)], jac[(1, 1)]);
            let s = j2.lu().solve(&Vector2::new(r.x, r.y))?;
            Vec3::new(s.x, s.y, 0.0)
        };
        t -= step;
        if !t.iter().all(|x| x.is_finite()) || t.abs().max() > 1e3 {
            return None;
        }
    }
    let mut r = interpolate_cell(corners, &t) - p;
    if ndim == 2 {
        r.z = 0.0;
    }
    if r.norm() > 1e-8 * scale {
        return None;
    }
    if (0..ndim).all(|a| t[a] >= -SLACK && t[a] <= 1.0 + SLACK) {
        for a in 0..ndim {
            t[a] = t[a].clamp(0.0, 1.0);
        }
        Some(t)
    } else {
        None
    }
}

/// World position of normalized cage coordinates.
pub fn cage_to_world(topology: &CageTopology, positions: &[Vec3], u: &Vec3) -> Vec3 {
    let n = topology.n();
    let mut cell = [0usize; 3];
    let mut t = Vec3::zeros();
    for a in 0..topology.ndim() {
        let s = (u[a].clamp(0.0, 1.0)) * n as f64;
        let c = (s.floor() as usize).min(n - 1);
        cell[a] = c;
        t[a] = s - c as f64;
    }
    let corners: Vec<Vec3> = topology
        .cell_vertices(cell)
        .into_iter()
        .map(|v| positions[v])
        .collect();
    interpolate_cell(&corners, &t)
}

/// Axis-aligned bounds of a set of points.
pub fn bounds(points: &[Vec3]) -> (Vec3, Vec3) {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

/// Normalized cage coordinates of a world point, or `None` outside the cage.
pub fn world_to_cage(topology: &CageTopology, positions: &[Vec3], p: &Vec3) -> Option<Vec3> {
    let n = topology.n() as f64;
    for cell in topology.cells() {
        let corners: Vec<Vec3> = topology
            .cell_vertices(cell)
            .into_iter()
            .map(|v| positions[v])
            .collect();
        let (lo, hi) = bounds(&corners);
        let pad = 1e-9 * (hi - lo).norm();
        if (0..topology.ndim()).any(|a| p[a] < lo[a] - pad || p[a] > hi[a] + pad) {
            continue;
        }
        if let Some(t) = invert_cell(&corners, p) {
            let mut u = Vec3::zeros();
            for a in 0..topology.ndim() {
                u[a] = (cell[a] as f64 + t[a]) / n;
            }
            return Some(u);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn warped(topo: &CageTopology) -> Vec<Vec3> {
        (0..topo.vertex_count())
            .map(|v| {
                let l = topo.lattice(v);
                let p = Vec3::new(l[0] as f64, l[1] as f64, l[2] as f64);
                Vec3::new(
                    p.x + 0.15 * (p.y * 1.3).sin(),
                    p.y + 0.1 * p.x * p.x / 3.0,
                    p.z + 0.1 * p.x,
                ) * 2.0
                    + Vec3::new(4.0, 3.0, 2.0)
            })
            .collect()
    }

    #[test]
    fn forward_and_inverse_round_trip() {
        for ndim in [2, 3] {
            let topo = CageTopology::new(3, ndim);
            let mut pos = warped(&topo);
            if ndim == 2 {
                pos.iter_mut().for_each(|p| p.z = 0.5);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            for _ in 0..200 {
                let mut u = Vec3::new(rng.gen(), rng.gen(), rng.gen());
                if ndim == 2 {
                    u.z = 0.0;
                }
                let p = cage_to_world(&topo, &pos, &u);
                let back = world_to_cage(&topo, &pos, &p).expect("inside");
                assert!((back - u).norm() < 1e-8, "{u} -> {back}");
            }
        }
    }

    #[test]
    fn outside_points_are_rejected() {
        let topo = CageTopology::new(2, 3);
        let pos = warped(&topo);
        assert!(world_to_cage(&topo, &pos, &Vec3::new(-10.0, 0.0, 0.0)).is_none());
    }

    #[test]
    fn vertices_map_to_lattice_coordinates() {
        let topo = CageTopology::new(2, 3);
        let pos = warped(&topo);
        let u = Vec3::new(0.5, 1.0, 0.0);
        assert!((cage_to_world(&topo, &pos, &u) - pos[topo.vertex(1, 2, 0)]).norm() < 1e-12);
    }
}
