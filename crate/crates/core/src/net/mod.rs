//! Siamese convolutional descriptor networks.

pub mod descriptor;
pub mod gradcheck;
pub mod io;
pub mod layers;
pub mod loss;
pub mod methods;
pub mod network;
pub mod tensor;
pub mod train;

pub use descriptor::{combine, simple_descriptor, Descriptor, SYNTH_MOTION_WEIGHT};
pub use io::{load_network, save_network};
pub use layers::{LayerSpec, Shape};
pub use loss::{hinge, hinge_embedding, ALPHA_N, ALPHA_P};
pub use network::{Network, NetworkSpec, INPUT_SIZE};
pub use tensor::Tensor;
pub use train::{objective, train, Model, Objective, PairMeta, PairSet, TrainConfig, TrainReport};
pub use methods::{method, DescriptorMethod, NetPair};
