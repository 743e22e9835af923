//! Deformation-limited Lagrangian patch cages.

pub mod energy;
pub mod histogram;
pub mod mapping;
pub mod topology;

use std::sync::Arc;

use nalgebra::Matrix3;

pub use energy::{
    deformation_energy, effective_lambda, limit_deformation, target_vertex_position,
    target_vertex_position_2d, total_energy, DeformationSystem, LimitOutcome,
};
pub use histogram::{gradient_histogram, init_orientation, GradientHistogram};
pub use topology::CageTopology;

use crate::error::Result;
use crate::fluid::{Vec3, VectorGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Repository match carried by a patch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub entry: u32,
    /// Repository frame shown at the current simulation frame.
    pub cursor: u32,
    /// Descriptor distance at assignment time.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchCage {
    pub id: u64,
    topology: Arc<CageTopology>,
    /// Rest edge length of the whole cage, `s_p = n * dx_cage`.
    pub size: f64,
    pub positions: Vec<Vec3>,
    /// Positions after the last pure advection step, before limiting.
    pub advected: Vec<Vec3>,
    pub age: u32,
    pub weight: f64,
    /// Columns are the orientation axes at creation.
    pub frame: Matrix3<f64>,
    pub assignment: Option<Assignment>,
    pub energy: f64,
}

/// Moves each vertex by one explicit step through `vel`; vertices are kept
/// inside the domain.
pub fn advect_positions(positions: &[Vec3], vel: &VectorGrid, dt: f64, dir: Direction) -> Vec<Vec3> {
    let sign = match dir {
        Direction::Forward => 1.0,
        Direction::Backward => -1.0,
    };
    let dx = vel.dx();
    let dims = vel.dims();
    positions
        .iter()
        .map(|p| {
            let mut q = p + vel.sample(p) * (sign * dt);
            for a in 0..vel.ndim() {
                q[a] = q[a].clamp(0.0, dims[a] as f64 * dx);
            }
            q
        })
        .collect()
}

impl PatchCage {
    /// Undeformed cage of edge length `size` centred at `center`, axes given
    /// by the columns of `frame`.
    pub fn new(
        id: u64,
        topology: Arc<CageTopology>,
        center: Vec3,
        size: f64,
        frame: Matrix3<f64>,
    ) -> Self {
        let n = topology.n() as f64;
        let planar = topology.ndim() == 2;
        let positions: Vec<Vec3> = (0..topology.vertex_count())
            .map(|v| {
                let l = topology.lattice(v);
                let mut local = Vec3::new(
                    (l[0] as f64 / n - 0.5) * size,
                    (l[1] as f64 / n - 0.5) * size,
                    (l[2] as f64 / n - 0.5) * size,
                );
                if planar {
                    local.z = 0.0;
                }
                center + frame * local
            })
            .collect();
        Self {
            id,
            topology,
            size,
            advected: positions.clone(),
            positions,
            age: 0,
            weight: 0.0,
            frame,
            assignment: None,
            energy: 0.0,
        }
    }

    pub fn from_positions(
        id: u64,
        topology: Arc<CageTopology>,
        size: f64,
        positions: Vec<Vec3>,
    ) -> Self {
        Self {
            id,
            topology,
            size,
            advected: positions.clone(),
            positions,
            age: 0,
            weight: 0.0,
            frame: Matrix3::identity(),
            assignment: None,
            energy: 0.0,
        }
    }

    pub fn topology(&self) -> &Arc<CageTopology> {
        &self.topology
    }

    pub fn centroid(&self) -> Vec3 {
        self.positions.iter().sum::<Vec3>() / self.positions.len() as f64
    }

    /// Energy removal threshold scale `s_p^2`.
    pub fn size_squared(&self) -> f64 {
        self.size * self.size
    }

    pub fn update_energy(&mut self) -> Result<f64> {
        self.energy = deformation_energy(&self.topology, &self.positions)?;
        Ok(self.energy)
    }

    /// One deformation-limited advection step; `vel` should already be
    /// low-passed at the cage cell size.
    pub fn step(&mut self, vel: &VectorGrid, dt: f64, dir: Direction, lambda0: f64) -> Result<LimitOutcome> {
        self.advected = advect_positions(&self.positions, vel, dt, dir);
        let out = limit_deformation(&self.topology, &self.advected, lambda0)?;
        self.positions.clone_from(&out.positions);
        self.update_energy()?;
        Ok(out)
    }

    pub fn to_world(&self, u: &Vec3) -> Vec3 {
        mapping::cage_to_world(&self.topology, &self.positions, u)
    }

    pub fn to_cage(&self, p: &Vec3) -> Option<Vec3> {
        mapping::world_to_cage(&self.topology, &self.positions, p)
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        mapping::bounds(&self.positions)
    }
}
