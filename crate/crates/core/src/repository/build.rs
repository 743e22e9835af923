//! Repository construction from tracked patches of high-resolution runs.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Repository, RepositoryEntry};
use crate::cage::Direction;
use crate::datagen::{run_paired, PairedSimConfig};
use crate::error::{Error, Result};
use crate::fluid::curl;
use crate::net::{DescriptorMethod, SYNTH_MOTION_WEIGHT};
use crate::synthesis::{sample_density, sample_flow_block, PatchTracker};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RepoBuildConfig {
    /// Stored density block edge length.
    pub block_res: usize,
    /// Patches tracked for fewer frames are dropped.
    pub min_frames: usize,
    pub motion_weight: f64,
    /// Descriptor method name, see [`crate::net::methods::METHOD_NAMES`].
    pub method: String,
    /// Scenes `first_scene..first_scene + scenes` are recorded.
    pub first_scene: usize,
    pub scenes: usize,
}

impl Default for RepoBuildConfig {
    fn default() -> Self {
        Self { block_res: 24, min_frames: 10, motion_weight: SYNTH_MOTION_WEIGHT, method: "cnn".into(), first_scene: 0, scenes: 1 }
    }
}

#[derive(Default)]
struct Track {
    descriptors: Vec<Vec<f64>>,
    blocks: Vec<Vec<f64>>,
}

/// Tracks patches on the fine solver of the configured scenes and stores
/// one entry per patch lifetime.
pub fn build_from_scene(
    sim: &PairedSimConfig,
    cfg: &RepoBuildConfig,
    method: &dyn DescriptorMethod,
) -> Result<Repository> {
    if cfg.block_res == 0 {
        return Err(Error::InvalidParameter("block_res must be positive".into()));
    }
    let mut entries = Vec::new();
    for scene in cfg.first_scene..cfg.first_scene + cfg.scenes {
        record_scene(sim, cfg, method, scene, &mut entries)?;
    }
    let first = entries.first().ok_or(Error::EmptyRepository)?;
    let frames = first.density.as_ref().map_or(0, |d| d.len()) / cfg.block_res.pow(sim.ndim as u32);
    let dim = first.descriptors.len() / frames.max(1);
    let mut repo = Repository::new(sim.ndim, dim, cfg.block_res, cfg.motion_weight as f32);
    for e in entries {
        repo.push(e)?;
    }
    log::info!("repository: {} entries, {} frames", repo.entries.len(), repo.frame_count());
    Ok(repo)
}

fn record_scene(
    sim: &PairedSimConfig,
    cfg: &RepoBuildConfig,
    method: &dyn DescriptorMethod,
    scene: usize,
    out: &mut Vec<RepositoryEntry>,
) -> Result<()> {
    let mut tracker = PatchTracker::new(sim.tracking.clone(), sim.ndim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed ^ (scene as u64).wrapping_mul(0x2545_f491_4f6c_dd1d));
    let id_base = (scene as u32) << 20;
    let mut live: BTreeMap<u64, Track> = BTreeMap::new();
    let finish = |id: u64, t: Track, out: &mut Vec<RepositoryEntry>| -> Result<()> {
        if t.descriptors.len() >= cfg.min_frames.max(1) {
            out.push(RepositoryEntry::from_raw(id_base | id as u32, t.descriptors, t.blocks)?);
        }
        Ok(())
    };
    run_paired(sim, scene, |s| {
        if s.frame() > 0 {
            for (id, _) in tracker.advance(&s.fine.velocity, sim.dt, Direction::Forward) {
                if let Some(t) = live.remove(&id) {
                    finish(id, t, out)?;
                }
            }
            let retired: Vec<u64> =
                tracker.patches.iter().filter(|p| p.age >= sim.max_patch_age).map(|p| p.id).collect();
            tracker.patches.retain(|p| p.age < sim.max_patch_age);
            for id in retired {
                if let Some(t) = live.remove(&id) {
                    finish(id, t, out)?;
                }
            }
        }
        let w_s = tracker.weights(s.coarse.dims(), s.coarse.dx());
        tracker.seed(&s.coarse.density, &w_s, &mut rng);
        let f_curl = curl(&s.fine.velocity);
        let samples: Vec<(u64, Vec<f64>, Vec<f64>)> = tracker
            .patches
            .par_iter()
            .map(|p| {
                let block = sample_flow_block(p, &s.fine.density, &f_curl, sim.input_res, sim.curl_scale)?;
                let d = method.describe(&block)?;
                let dens = sample_density(p, &s.fine.density, cfg.block_res)?;
                Ok((p.id, d.into_values(), dens.data().to_vec()))
            })
            .collect::<Result<_>>()?;
        for (id, d, b) in samples {
            let t = live.entry(id).or_default();
            t.descriptors.push(d);
            t.blocks.push(b);
        }
        Ok(())
    })?;
    for (id, t) in std::mem::take(&mut live) {
        finish(id, t, out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::methods::SimpleL2;

    fn tiny() -> PairedSimConfig {
        PairedSimConfig { coarse_res: 24, frames: 16, sync_interval: 8, scenes: 1, ..Default::default() }
    }

    #[test]
    fn entries_follow_patch_lifetimes() {
        let cfg = RepoBuildConfig { block_res: 6, min_frames: 4, ..Default::default() };
        let repo = build_from_scene(&tiny(), &cfg, &SimpleL2).unwrap();
        assert_eq!(repo.dim, 74);
        assert!(!repo.entries.is_empty());
        for e in &repo.entries {
            let frames = e.frames(repo.dim);
            assert!((4..=17).contains(&frames));
            let d = e.density.as_ref().unwrap();
            assert_eq!(d.len(), frames * 36);
            assert!(d.iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(e.min <= e.max);
        }
        let ids: std::collections::BTreeSet<u32> = repo.entries.iter().map(|e| e.id).collect();
        assert_eq!(ids.len(), repo.entries.len());
    }

    #[test]
    fn build_is_deterministic() {
        let cfg = RepoBuildConfig { block_res: 4, min_frames: 2, ..Default::default() };
        let a = build_from_scene(&tiny(), &cfg, &SimpleL2).unwrap();
        let b = build_from_scene(&tiny(), &cfg, &SimpleL2).unwrap();
        assert_eq!(a, b);
    }
}
