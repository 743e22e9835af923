//! Descriptor methods selectable by name.

use std::path::Path;

use super::descriptor::{combine, simple_descriptor, Descriptor};
use super::io::{load_network, save_network};
use super::network::Network;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Maps a `[channels, d, h, w]` flow block (density first, then vorticity)
/// to a descriptor.
pub trait DescriptorMethod: Send + Sync {
    fn name(&self) -> &str;
    fn describe(&self, block: &Tensor) -> Result<Descriptor>;
}

/// Trained density and motion branches.
#[derive(Debug, Clone, PartialEq)]
pub struct NetPair {
    pub density: Network,
    pub motion: Network,
}

pub const DENSITY_FILE: &str = "density.spnet";
pub const MOTION_FILE: &str = "motion.spnet";

impl NetPair {
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        save_network(&dir.join(DENSITY_FILE), &self.density)?;
        save_network(&dir.join(MOTION_FILE), &self.motion)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Ok(Self { density: load_network(&dir.join(DENSITY_FILE))?, motion: load_network(&dir.join(MOTION_FILE))? })
    }

    pub fn descriptor_len(&self) -> usize {
        self.density.output_len() + self.motion.output_len()
    }
}

fn branch(net: &Network, block: &Tensor, channels: std::ops::Range<usize>) -> Result<Descriptor> {
    let x = block.channels(channels)?;
    Ok(Descriptor::from_vector(net.forward(x.data())?))
}

/// Density and motion descriptors combined with weight `w_m`.
pub struct CnnCombined {
    pub nets: NetPair,
    pub motion_weight: f64,
}

impl DescriptorMethod for CnnCombined {
    fn name(&self) -> &str {
        "cnn"
    }

    fn describe(&self, block: &Tensor) -> Result<Descriptor> {
        let c = block.shape()[0];
        let d = branch(&self.nets.density, block, 0..1)?;
        let m = branch(&self.nets.motion, block, 1..c)?;
        Ok(combine(&d, &m, self.motion_weight))
    }
}

pub struct CnnDensity {
    pub net: Network,
}

impl DescriptorMethod for CnnDensity {
    fn name(&self) -> &str {
        "cnn-density"
    }

    fn describe(&self, block: &Tensor) -> Result<Descriptor> {
        branch(&self.net, block, 0..1)
    }
}

pub struct SimpleL2;

impl DescriptorMethod for SimpleL2 {
    fn name(&self) -> &str {
        "simple-l2"
    }

    fn describe(&self, block: &Tensor) -> Result<Descriptor> {
        simple_descriptor(block)
    }
}

pub const METHOD_NAMES: [&str; 3] = ["cnn", "cnn-density", "simple-l2"];

/// Method registry; CNN methods need trained networks.
pub fn method(name: &str, nets: Option<&NetPair>, motion_weight: f64) -> Result<Box<dyn DescriptorMethod>> {
    let need = || {
        nets.cloned()
            .ok_or_else(|| Error::InvalidParameter(format!("descriptor method '{name}' needs trained networks")))
    };
    match name {
        "cnn" => Ok(Box::new(CnnCombined { nets: need()?, motion_weight })),
        "cnn-density" => Ok(Box::new(CnnDensity { net: need()?.density })),
        "simple-l2" => Ok(Box::new(SimpleL2)),
        other => Err(Error::InvalidParameter(format!(
            "unknown descriptor method '{other}' (expected one of {})",
            METHOD_NAMES.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::NetworkSpec;

    fn block() -> Tensor {
        Tensor::new(vec![2, 1, 36, 36], (0..2 * 1296).map(|i| ((i * 37) % 101) as f64 / 100.0).collect()).unwrap()
    }

    fn nets() -> NetPair {
        NetPair {
            density: Network::init(NetworkSpec::descriptor(2, 1), 1),
            motion: Network::init(NetworkSpec::descriptor(2, 1), 2),
        }
    }

    #[test]
    fn registry_resolves_names() {
        let n = nets();
        for name in METHOD_NAMES {
            let m = method(name, Some(&n), 0.6).unwrap();
            assert_eq!(m.name(), name);
            let d = m.describe(&block()).unwrap();
            assert!(!d.is_degenerate());
        }
        assert!(method("hog", Some(&n), 0.6).is_err());
        assert!(method("cnn", None, 0.6).is_err());
        assert!(method("simple-l2", None, 0.6).is_ok());
    }

    #[test]
    fn combined_length_and_norm() {
        let d = method("cnn", Some(&nets()), 0.6).unwrap().describe(&block()).unwrap();
        assert_eq!(d.len(), 256);
        let n: f64 = d.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_weight_network_gives_degenerate_descriptor() {
        let spec = NetworkSpec::descriptor(2, 1);
        let zero = Network::from_params(spec.clone(), vec![0.0; spec.param_count()]).unwrap();
        let d = CnnDensity { net: zero }.describe(&block()).unwrap();
        assert!(d.is_degenerate());
    }

    #[test]
    fn weights_round_trip_through_directory() {
        let dir = tempfile::tempdir().unwrap();
        let n = nets();
        n.save(dir.path()).unwrap();
        let back = NetPair::load(dir.path()).unwrap();
        assert_eq!(back.density.spec(), n.density.spec());
        assert!(NetPair::load(&dir.path().join("missing")).is_err());
    }
}
