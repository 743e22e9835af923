//! Paired coarse/fine training data.

pub mod io;
pub mod paired;
pub mod record;
pub mod scene;

pub use io::{load_dataset, save_dataset};
pub use paired::{run_coarse, run_paired, synchronize, PairedSim, PairedSimConfig};
pub use record::{generate, make_negatives, Dataset, RecordedPair};
pub use scene::{initial_state, SceneConfig};
