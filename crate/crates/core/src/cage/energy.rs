//! Differential-coordinate deformation energy and the linearized limiter.

use log::warn;
use nalgebra::Matrix3;

use super::topology::CageTopology;
use crate::error::{Error, Result};
use crate::fluid::Vec3;
use crate::linalg::{conjugate_gradient, LinearOperator, StopRule};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Rotation by 90 degrees about `axis`: `x -> a (a.x) + a × x`.
pub fn rotation_90(axis: &Vec3) -> Result<Matrix3<f64>> {
    let len = axis.norm();
    if !(len > 0.0) || !len.is_finite() {
        return Err(Error::Degenerate("zero-length cage edge".into()));
    }
    let a = axis / len;
    Ok(a * a.transpose() + a.cross_matrix())
}

fn check_triangle(v0: &Vec3, v1: &Vec3, v2: &Vec3) -> Result<()> {
    let e1 = v1 - v0;
    let e2 = v2 - v0;
    let scale = e1.norm_squared().max(e2.norm_squared()).max((v2 - v1).norm_squared());
    let area2 = e1.cross(&e2).norm();
    if !(scale > 0.0) || area2 <= 1e-12 * scale {
        return Err(Error::Degenerate("collinear cage neighbors".into()));
    }
    Ok(())
}

/// Rest-shape position of the fourth tetrahedron vertex opposite `v0, v1, v2`.
pub fn target_vertex_position(v0: &Vec3, v1: &Vec3, v2: &Vec3) -> Result<Vec3> {
    check_triangle(v0, v1, v2)?;
    let vc = (v0 + v1 + v2) / 3.0;
    let r10 = rotation_90(&(v1 - v0))?;
    let r21 = rotation_90(&(v2 - v1))?;
    let r02 = rotation_90(&(v0 - v2))?;
    let sum = r10 * (vc - v2) + r21 * (vc - v0) + r02 * (vc - v1);
    Ok(vc + sum / (3.0 * SQRT2))
}

/// Planar analog: the corner completing the square on `v0 -> v1`, counter-clockwise.
pub fn target_vertex_position_2d(v0: &Vec3, v1: &Vec3) -> Result<Vec3> {
    let e = v1 - v0;
    if !(e.x * e.x + e.y * e.y > 0.0) {
        return Err(Error::Degenerate("zero-length cage edge".into()));
    }
    let mid = (v0 + v1) / 2.0;
    Ok(Vec3::new(mid.x - e.y / 2.0, mid.y + e.x / 2.0, v0.z))
}

/// Coefficients `[A, B, C]` with `v3 = A v0 + B v1 + C v2`.
pub fn corner_coefficients(v0: &Vec3, v1: &Vec3, v2: &Vec3) -> Result<[Matrix3<f64>; 3]> {
    check_triangle(v0, v1, v2)?;
    let r10 = rotation_90(&(v1 - v0))?;
    let r21 = rotation_90(&(v2 - v1))?;
    let r02 = rotation_90(&(v0 - v2))?;
    let third = Matrix3::identity() / 3.0;
    let k = 1.0 / (9.0 * SQRT2);
    Ok([
        third + (r02 + r10 - r21 * 2.0) * k,
        third + (r10 + r21 - r02 * 2.0) * k,
        third + (r21 + r02 - r10 * 2.0) * k,
    ])
}

fn planar_coefficients() -> [Matrix3<f64>; 3] {
    let i2 = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, 0.0));
    let r = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    [(i2 - r) / 2.0, (i2 + r) / 2.0, i2]
}

/// `lambda = (m / n) * lambda0`.
pub fn effective_lambda(topology: &CageTopology, lambda0: f64) -> f64 {
    topology.vertex_count() as f64 / topology.n() as f64 * lambda0
}

/// Block-sparse symmetric `G` with one 3x3 block per coupled vertex pair.
/// In 2D the blocks carry zeros in the z row and column.
#[derive(Debug, Clone)]
pub struct DeformationSystem {
    n: usize,
    rows: Vec<Vec<(usize, Matrix3<f64>)>>,
}

fn add_block(row: &mut Vec<(usize, Matrix3<f64>)>, col: usize, m: Matrix3<f64>) {
    match row.iter_mut().find(|(c, _)| *c == col) {
        Some((_, b)) => *b += m,
        None => row.push((col, m)),
    }
}

impl DeformationSystem {
    /// Builds `G` with rotations evaluated at `positions`.
    pub fn assemble(topology: &CageTopology, positions: &[Vec3]) -> Result<Self> {
        let m = topology.vertex_count();
        if positions.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "cage has {m} vertices, got {} positions",
                positions.len()
            )));
        }
        if positions.iter().any(|p| !p.iter().all(|x| x.is_finite())) {
            return Err(Error::Degenerate("non-finite cage vertex".into()));
        }
        let planar = planar_coefficients();
        let mut rows: Vec<Vec<(usize, Matrix3<f64>)>> = vec![Vec::new(); m];
        for term in topology.terms() {
            let used = if topology.ndim() == 3 { 3 } else { 2 };
            for &nb in &term.neighbors[..used] {
                if positions[nb] == positions[term.vertex] {
                    return Err(Error::Degenerate("zero-length cage edge".into()));
                }
            }
            let (ids, coeffs): (Vec<usize>, Vec<Matrix3<f64>>) = if topology.ndim() == 3 {
                let [a, b, c] = term.neighbors;
                let [ca, cb, cc] =
                    corner_coefficients(&positions[a], &positions[b], &positions[c])?;
                (vec![a, b, c, term.vertex], vec![ca, cb, cc, -Matrix3::identity()])
            } else {
                let [a, b, _] = term.neighbors;
                if (positions[b] - positions[a]).xy().norm_squared() == 0.0 {
                    return Err(Error::Degenerate("zero-length cage edge".into()));
                }
                (vec![a, b, term.vertex], vec![planar[0], planar[1], -planar[2]])
            };
            for (p, &vp) in ids.iter().enumerate() {
                for (q, &vq) in ids.iter().enumerate() {
                    add_block(&mut rows[vp], vq, coeffs[p].transpose() * coeffs[q]);
                }
            }
        }
        for row in &mut rows {
            row.sort_by_key(|(c, _)| *c);
        }
        Ok(Self {
            n: topology.n(),
            rows,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<(usize, Matrix3<f64>)>] {
        &self.rows
    }

    pub fn max_blocks_per_row(&self) -> usize {
        self.rows.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn apply(&self, v: &[Vec3]) -> Vec<Vec3> {
        self.rows
            .iter()
            .map(|row| row.iter().fold(Vec3::zeros(), |acc, (c, b)| acc + b * v[*c]))
            .collect()
    }

    /// `v^T G v`.
    pub fn quadratic_form(&self, v: &[Vec3]) -> f64 {
        self.apply(v).iter().zip(v).map(|(gv, x)| gv.dot(x)).sum()
    }

    /// `E_defo = v^T G v / n`.
    pub fn energy(&self, v: &[Vec3]) -> f64 {
        self.quadratic_form(v) / self.n as f64
    }

    /// Largest entry of `G - G^T`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for (r, row) in self.rows.iter().enumerate() {
            for (c, b) in row {
                let t = self.rows[*c]
                    .iter()
                    .find(|(cc, _)| *cc == r)
                    .map(|(_, m)| m.transpose())
                    .unwrap_or_else(Matrix3::zeros);
                worst = worst.max((b - t).abs().max());
            }
        }
        worst
    }
}

/// Deformation energy of `positions` with rotations taken from the same positions.
pub fn deformation_energy(topology: &CageTopology, positions: &[Vec3]) -> Result<f64> {
    Ok(DeformationSystem::assemble(topology, positions)?.energy(positions))
}

/// Limiter objective: `lambda0 v^T G v / n + sum |v - v'|^2 / m`.
pub fn total_energy(system: &DeformationSystem, v: &[Vec3], advected: &[Vec3], lambda0: f64) -> f64 {
    let m = system.vertex_count() as f64;
    let pull: f64 = v.iter().zip(advected).map(|(a, b)| (a - b).norm_squared()).sum();
    lambda0 * system.energy(v) + pull / m
}

struct Shifted<'a> {
    system: &'a DeformationSystem,
    lambda: f64,
}

impl LinearOperator for Shifted<'_> {
    fn dim(&self) -> usize {
        3 * self.system.vertex_count()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (r, row) in self.system.rows.iter().enumerate() {
            let mut acc = Vec3::zeros();
            for (c, b) in row {
                acc += b * Vec3::new(x[3 * c], x[3 * c + 1], x[3 * c + 2]);
            }
            for a in 0..3 {
                out[3 * r + a] = self.lambda * acc[a] + x[3 * r + a];
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitOutcome {
    pub positions: Vec<Vec3>,
    pub iterations: usize,
    pub converged: bool,
}

/// Solves `(lambda G' + I) v = v'` with `G'` built from the advected positions.
/// If the solver does not converge the advected positions are returned.
pub fn limit_deformation(
    topology: &CageTopology,
    advected: &[Vec3],
    lambda0: f64,
) -> Result<LimitOutcome> {
    if lambda0 < 0.0 || !lambda0.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda0 must be >= 0, got {lambda0}")));
    }
    if lambda0 == 0.0 {
        return Ok(LimitOutcome {
            positions: advected.to_vec(),
            iterations: 0,
            converged: true,
        });
    }
    let system = DeformationSystem::assemble(topology, advected)?;
    let op = Shifted {
        system: &system,
        lambda: effective_lambda(topology, lambda0),
    };
    let b: Vec<f64> = advected.iter().flat_map(|p| p.iter().copied()).collect();
    let norm = crate::linalg::dot(&b, &b).sqrt();
    let mut x = b.clone();
    let max_iter = 10 * b.len();
    let out = conjugate_gradient(&op, &b, &mut x, StopRule::Euclidean(1e-8 * norm), max_iter);
    if !out.converged {
        warn!(
            "deformation limiter did not converge ({} iterations, residual {:.3e})",
            out.iterations, out.residual
        );
        return Ok(LimitOutcome {
            positions: advected.to_vec(),
            iterations: out.iterations,
            converged: false,
        });
    }
    let positions = x.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
    Ok(LimitOutcome {
        positions,
        iterations: out.iterations,
        converged: true,
    })
}
