//! Minimal inviscid smoke solver on a staggered grid and the field
//! utilities shared by data generation and synthesis.

pub mod grid;
pub mod io;
pub mod ops;
pub mod project;
pub mod sim;

pub use grid::{sample_lattice, ScalarGrid, Vec3, VectorGrid};
pub use ops::{
    advect_semi_lagrangian, center_of_mass, curl, low_pass, resample, Advect, Curl, Filter,
};
pub use project::{project, project_with, ProjectionReport};
pub use sim::{step, Emitter, SimParams, SimState, StepReport};
