//! Patch recording on paired runs and the labeled pair sets built from it.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::paired::{run_paired, PairedSimConfig};
use crate::cage::Direction;
use crate::error::{Error, Result};
use crate::fluid::curl;
use crate::net::train::{is_valid_negative, sample_negative};
use crate::net::{PairMeta, PairSet, Tensor};
use crate::synthesis::{sample_flow_block, PatchTracker};

#[derive(Debug, Clone, PartialEq)]
pub struct RecordedPair {
    pub patch: u32,
    pub frame: u32,
    pub label: i8,
    /// `[channels, d, h, w]`: density then vorticity.
    pub coarse: Tensor,
    pub fine: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub ndim: usize,
    pub sync_interval: u32,
    pub pairs: Vec<RecordedPair>,
}

impl Dataset {
    pub fn block_shape(&self) -> Option<&[usize]> {
        self.pairs.first().map(|p| p.coarse.shape())
    }

    pub fn metas(&self) -> Vec<PairMeta> {
        self.pairs.iter().map(|p| PairMeta { patch: u64::from(p.patch), frame: p.frame }).collect()
    }

    /// Minimum frame offset of same-patch negatives: `t_r / 2`.
    pub fn min_frame_gap(&self) -> u32 {
        (self.sync_interval / 2).max(1)
    }

    /// Network inputs restricted to a channel range.
    pub fn pair_set(&self, channels: std::ops::Range<usize>) -> Result<PairSet> {
        let mut set = PairSet::default();
        for p in &self.pairs {
            set.coarse.push(p.coarse.channels(channels.clone())?.data().to_vec());
            set.fine.push(p.fine.channels(channels.clone())?.data().to_vec());
        }
        set.meta = self.metas();
        Ok(set)
    }

    /// Pairs at frames divisible by `stride`.
    pub fn subsample(&self, stride: u32) -> Dataset {
        let stride = stride.max(1);
        let pairs = self.pairs.iter().filter(|p| p.frame % stride == 0).cloned().collect();
        Dataset { ndim: self.ndim, sync_interval: self.sync_interval, pairs }
    }

    /// Splits by patch id: a seeded shuffle of the distinct ids puts
    /// `train_fraction` of them in the first set.
    pub fn split_by_patch(&self, train_fraction: f64, seed: u64) -> (Dataset, Dataset) {
        let ids: BTreeSet<u32> = self.pairs.iter().map(|p| p.patch).collect();
        let mut ids: Vec<u32> = ids.into_iter().collect();
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let cut = ((ids.len() as f64) * train_fraction).round() as usize;
        let train_ids: BTreeSet<u32> = ids[..cut.min(ids.len())].iter().copied().collect();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for p in &self.pairs {
            if train_ids.contains(&p.patch) {
                a.push(p.clone());
            } else {
                b.push(p.clone());
            }
        }
        let mk = |pairs| Dataset { ndim: self.ndim, sync_interval: self.sync_interval, pairs };
        (mk(a), mk(b))
    }
}

/// Runs every scene, tracks patches on the fine flow and records one
/// positive pair per live patch per frame. Patch ids are unique across scenes.
pub fn generate(cfg: &PairedSimConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut pairs = Vec::new();
    for scene in 0..cfg.scenes {
        let before = pairs.len();
        record_scene(cfg, scene, &mut pairs)?;
        log::info!("scene {scene}: {} positive pairs", pairs.len() - before);
    }
    Ok(Dataset { ndim: cfg.ndim, sync_interval: cfg.sync_interval as u32, pairs })
}

fn record_scene(cfg: &PairedSimConfig, scene: usize, out: &mut Vec<RecordedPair>) -> Result<()> {
    let mut tracker = PatchTracker::new(cfg.tracking.clone(), cfg.ndim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (scene as u64).wrapping_mul(0x2545_f491_4f6c_dd1d));
    let id_base = (scene as u32) << 20;
    run_paired(cfg, scene, |sim| {
        if sim.frame() > 0 {
            tracker.advance(&sim.fine.velocity, cfg.dt, Direction::Forward);
            tracker.patches.retain(|p| p.age < cfg.max_patch_age);
        }
        let dims = sim.coarse.dims();
        let w_s = tracker.weights(dims, sim.coarse.dx());
        tracker.seed(&sim.coarse.density, &w_s, &mut rng);
        let c_curl = curl(&sim.coarse.velocity);
        let f_curl = curl(&sim.fine.velocity);
        for p in &tracker.patches {
            out.push(RecordedPair {
                patch: id_base | p.id as u32,
                frame: sim.frame() as u32,
                label: 1,
                coarse: sample_flow_block(p, &sim.coarse.density, &c_curl, cfg.input_res, cfg.curl_scale)?,
                fine: sample_flow_block(p, &sim.fine.density, &f_curl, cfg.input_res, cfg.curl_scale)?,
            });
        }
        Ok(())
    })
}

/// Labeled index pairs `(coarse, fine, label)`: every positive followed by
/// `ratio` negatives whose fine block comes from another patch or from the
/// same patch at least `min_gap` frames away.
pub fn make_negatives(
    metas: &[PairMeta],
    ratio: usize,
    seed: u64,
    min_gap: u32,
) -> Result<Vec<(usize, usize, i8)>> {
    if metas.len() < 2 {
        return Err(Error::InvalidParameter("need at least two positives".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(metas.len() * (1 + ratio));
    for i in 0..metas.len() {
        out.push((i, i, 1));
        for _ in 0..ratio {
            if let Some(j) = sample_negative(&mut rng, metas, i, min_gap) {
                debug_assert!(is_valid_negative(metas, i, j, min_gap));
                out.push((i, j, -1));
            }
        }
    }
    Ok(out)
}
