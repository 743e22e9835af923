//! Patch-based smoke flow synthesis.
//!
//! A coarse simulation drives deformation-limited Lagrangian patches; each
//! patch is matched by learned flow descriptors against a repository of
//! high-resolution space-time patches, which are blended into the final
//! volume at render time.

pub mod cage;
pub mod config;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod fluid;
pub mod linalg;
pub mod net;
pub mod pipeline;
pub mod repository;
pub mod synthesis;

pub use error::{Error, Result};
