//! Pressure projection on a closed box with free-slip walls.

use super::grid::{lin, ScalarGrid, VectorGrid};
use crate::linalg::{conjugate_gradient, LinearOperator, StopRule};

/// Negative graph Laplacian over the cells of a closed box (Neumann walls).
/// Positive semi-definite with the constant vector as its null space.
pub struct PoissonOperator {
    dims: [usize; 3],
}

impl PoissonOperator {
    pub fn new(dims: [usize; 3]) -> Self {
        Self { dims }
    }
}

impl LinearOperator for PoissonOperator {
    fn dim(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dims;
        for k in 0..d[2] {
            for j in 0..d[1] {
                for i in 0..d[0] {
                    let c = lin(d, i, j, k);
                    let xc = x[c];
                    let mut acc = 0.0;
                    if i > 0 {
                        acc += xc - x[c - 1];
                    }
                    if i + 1 < d[0] {
                        acc += xc - x[c + 1];
                    }
                    if j > 0 {
                        acc += xc - x[c - d[0]];
                    }
                    if j + 1 < d[1] {
                        acc += xc - x[c + d[0]];
                    }
                    if k > 0 {
                        acc += xc - x[c - d[0] * d[1]];
                    }
                    if k + 1 < d[2] {
                        acc += xc - x[c + d[0] * d[1]];
                    }
                    out[c] = acc;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionReport {
    pub iterations: usize,
    /// Largest remaining cell divergence.
    pub max_divergence: f64,
    pub converged: bool,
}

/// Solves for the potential `phi` with `L phi = -div * dx^2`, starting from
/// `phi`. On return the corrected field `u - grad phi` has
/// `max |div| <= tolerance` when `converged` is set.
pub fn solve_pressure(
    div: &ScalarGrid,
    phi: &mut ScalarGrid,
    tolerance: f64,
    max_iterations: usize,
) -> ProjectionReport {
    let dx2 = div.dx() * div.dx();
    let mut rhs: Vec<f64> = div.data().iter().map(|d| -d * dx2).collect();
    // The closed box only admits zero-mean sources.
    let mean = rhs.iter().sum::<f64>() / rhs.len() as f64;
    rhs.iter_mut().for_each(|r| *r -= mean);
    let op = PoissonOperator::new(div.dims());
    let out = conjugate_gradient(
        &op,
        &rhs,
        phi.data_mut(),
        StopRule::MaxAbs(tolerance * dx2),
        max_iterations,
    );
    ProjectionReport {
        iterations: out.iterations,
        max_divergence: out.residual / dx2,
        converged: out.converged,
    }
}

/// Subtracts the potential gradient from the interior faces; wall faces are
/// held at zero normal velocity.
pub fn apply_pressure(vel: &mut VectorGrid, phi: &ScalarGrid) {
    let dx = vel.dx();
    let dims = vel.dims();
    for a in 0..vel.ndim() {
        let cd = vel.comp_dims(a);
        let comp = vel.comp_mut(a);
        for k in 0..cd[2] {
            for j in 0..cd[1] {
                for i in 0..cd[0] {
                    let idx = [i, j, k];
                    let f = lin(cd, i, j, k);
                    if idx[a] == 0 || idx[a] == dims[a] {
                        comp[f] = 0.0;
                        continue;
                    }
                    let mut lo = idx;
                    lo[a] -= 1;
                    comp[f] -= (phi.get(i, j, k) - phi.get(lo[0], lo[1], lo[2])) / dx;
                }
            }
        }
    }
}

/// Makes `vel` discretely divergence-free. `phi` carries the previous
/// potential as a warm start and receives the new one.
pub fn project_with(
    vel: &VectorGrid,
    phi: &mut ScalarGrid,
    tolerance: f64,
    max_iterations: usize,
) -> (VectorGrid, ProjectionReport) {
    let mut out = vel.clone();
    out.enforce_closed_box();
    let div = out.divergence();
    let report = solve_pressure(&div, phi, tolerance, max_iterations);
    apply_pressure(&mut out, phi);
    (out, report)
}

/// Projection from a zero initial potential.
pub fn project(vel: &VectorGrid, tolerance: f64, max_iterations: usize) -> (VectorGrid, ProjectionReport) {
    let mut phi = ScalarGrid::new(vel.dims(), vel.dx());
    project_with(vel, &mut phi, tolerance, max_iterations)
}
