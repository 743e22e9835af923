//! One solver step: source injection, buoyancy, advection, projection.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::{lin, ScalarGrid, Vec3, VectorGrid};
use super::ops::{center_of_mass, Advect};
use super::project::{project_with, ProjectionReport};
use crate::error::{Error, Result};

/// Spherical smoke emitter in world coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Emitter {
    pub center: [f64; 3],
    pub radius: f64,
    /// Density added per unit time inside the sphere.
    pub rate: f64,
    /// Relative amplitude of the seeded per-cell rate jitter.
    #[serde(default)]
    pub jitter: f64,
    /// Velocity imposed on faces inside the sphere, if any.
    #[serde(default)]
    pub velocity: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    pub dt: f64,
    /// Acceleration per unit density.
    pub buoyancy: [f64; 3],
    pub emitters: Vec<Emitter>,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
    /// Shift all advected quantities so the density center of mass returns
    /// to the grid center every step.
    pub recenter: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: 1.0,
            buoyancy: [0.0, 0.05, 0.0],
            emitters: Vec::new(),
            tolerance: 1e-4,
            max_iterations: 2000,
            seed: 0,
            recenter: false,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "projection tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub density: ScalarGrid,
    pub velocity: VectorGrid,
    /// Last pressure potential, reused as the next solve's initial guess.
    pub pressure: ScalarGrid,
    pub frame: u64,
}

impl SimState {
    pub fn new(dims: [usize; 3], dx: f64) -> Self {
        Self {
            density: ScalarGrid::new(dims, dx),
            velocity: VectorGrid::new(dims, dx),
            pressure: ScalarGrid::new(dims, dx),
            frame: 0,
        }
    }

    pub fn from_fields(density: ScalarGrid, velocity: VectorGrid) -> Result<Self> {
        if !velocity.same_cells(&density) {
            return Err(Error::DimensionMismatch(
                "density and velocity grids differ".into(),
            ));
        }
        let pressure = ScalarGrid::new(density.dims(), density.dx());
        Ok(Self {
            density,
            velocity,
            pressure,
            frame: 0,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.density.dims()
    }

    pub fn dx(&self) -> f64 {
        self.density.dx()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub projection: ProjectionReport,
    pub recenter_offset: Vec3,
}

fn inject_sources(state: &mut SimState, params: &SimParams) {
    if params.emitters.is_empty() {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ state.frame.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let dims = state.dims();
    for e in &params.emitters {
        let c = Vec3::from(e.center);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let mut p = state.density.cell_center(i, j, k);
                    if dims[2] == 1 {
                        p.z = c.z;
                    }
                    if (p - c).norm() > e.radius {
                        continue;
                    }
                    let jitter = if e.jitter > 0.0 {
                        1.0 + e.jitter * (rng.gen::<f64>() - 0.5)
                    } else {
                        1.0
                    };
                    let idx = lin(dims, i, j, k);
                    state.density.data_mut()[idx] += e.rate * params.dt * jitter;
                }
            }
        }
        if let Some(v) = e.velocity {
            let vel = &mut state.velocity;
            for a in 0..vel.ndim() {
                let cd = vel.comp_dims(a);
                for k in 0..cd[2] {
                    for j in 0..cd[1] {
                        for i in 0..cd[0] {
                            let mut p = vel.face_position(a, i, j, k);
                            if dims[2] == 1 {
                                p.z = c.z;
                            }
                            if (p - c).norm() <= e.radius {
                                vel.comp_mut(a)[lin(cd, i, j, k)] = v[a];
                            }
                        }
                    }
                }
            }
        }
    }
}

fn apply_buoyancy(state: &mut SimState, params: &SimParams) {
    let dims = state.dims();
    for a in 0..state.velocity.ndim() {
        let g = params.buoyancy[a];
        if g == 0.0 {
            continue;
        }
        let cd = state.velocity.comp_dims(a);
        for k in 0..cd[2] {
            for j in 0..cd[1] {
                for i in 0..cd[0] {
                    let idx = [i, j, k];
                    // Interior faces only; walls stay closed.
                    if idx[a] == 0 || idx[a] == dims[a] {
                        continue;
                    }
                    let mut lo = idx;
                    lo[a] -= 1;
                    let d = 0.5
                        * (state.density.get(i, j, k) + state.density.get(lo[0], lo[1], lo[2]));
                    state.velocity.comp_mut(a)[lin(cd, i, j, k)] += params.dt * g * d;
                }
            }
        }
    }
}

/// Density-weighted mean cell velocity.
fn mass_velocity(state: &SimState) -> Vec3 {
    let [nx, ny, nz] = state.dims();
    let mut acc = Vec3::zeros();
    let mut mass = 0.0;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let d = state.density.get(i, j, k);
                if d > 0.0 {
                    acc += state.velocity.cell_velocity(i, j, k) * d;
                    mass += d;
                }
            }
        }
    }
    if mass > 0.0 {
        acc / mass
    } else {
        acc
    }
}

/// Advances the state by one frame.
pub fn step(state: &SimState, params: &SimParams) -> Result<(SimState, StepReport)> {
    params.validate()?;
    let mut next = state.clone();
    inject_sources(&mut next, params);
    apply_buoyancy(&mut next, params);

    let mut offset = Vec3::zeros();
    if params.recenter {
        if let Ok(com) = center_of_mass(&next.density) {
            // Aim at where the plume will be after this step's transport.
            offset = next.density.center() - com - mass_velocity(&next) * params.dt;
            if next.density.is_2d() {
                offset.z = 0.0;
            }
        }
    }
    let vel = next.velocity.clone();
    next.density = next.density.advect(&vel, params.dt, offset)?;
    next.velocity = next.velocity.advect(&vel, params.dt, offset)?;
    // Clamped interpolation can leave tiny negative undershoots at sharp fronts.
    next.density.map_inplace(|d| d.max(0.0));

    let (projected, report) = project_with(
        &next.velocity,
        &mut next.pressure,
        params.tolerance,
        params.max_iterations,
    );
    if !report.converged {
        warn!(
            "projection did not converge in {} iterations (max div {:.3e})",
            report.iterations, report.max_divergence
        );
    }
    next.velocity = projected;
    next.frame += 1;
    Ok((
        next,
        StepReport {
            projection: report,
            recenter_offset: offset,
        },
    ))
}
