//! Seeding, deformation-limited advection and removal of patch cages.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{accumulate_undeformed, weight_at};
use crate::cage::{init_orientation, CageTopology, Direction, PatchCage};
use crate::error::{Error, Result};
use crate::fluid::{Filter, ScalarGrid, Vec3, VectorGrid};

/// Geometry and limits shared by every tracked patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackingParams {
    /// Patch edge length in world units.
    pub patch_size: f64,
    /// Cage cells per axis.
    pub cage_cells: usize,
    pub lambda0: f64,
    /// Patches are removed once `E_defo > energy_coefficient * s_p^2`.
    pub energy_coefficient: f64,
    pub seed_threshold: f64,
    /// Jitter of seeding sites as a fraction of the seeding spacing.
    pub seed_jitter: f64,
    /// Sites with lower density do not spawn patches.
    pub min_density: f64,
}

impl Default for TrackingParams {
    fn default() -> Self {
        Self {
            patch_size: 8.0,
            cage_cells: 4,
            lambda0: 0.1,
            energy_coefficient: 0.15,
            seed_threshold: 0.5,
            seed_jitter: 0.5,
            min_density: 0.05,
        }
    }
}

impl TrackingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.patch_size > 0.0) || self.cage_cells == 0 {
            return Err(Error::InvalidParameter("patch size and cage cells must be positive".into()));
        }
        if self.lambda0 < 0.0 || self.energy_coefficient < 0.0 || self.seed_threshold < 0.0 {
            return Err(Error::InvalidParameter("tracking thresholds must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.seed_jitter) {
            return Err(Error::InvalidParameter("seed_jitter must be in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn cage_cell_size(&self) -> f64 {
        self.patch_size / self.cage_cells as f64
    }

    pub fn energy_limit(&self) -> f64 {
        self.energy_coefficient * self.patch_size * self.patch_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Removal {
    Deformed,
    LeftDomain,
    Degenerate,
}

#[derive(Debug, Clone)]
pub struct PatchTracker {
    pub params: TrackingParams,
    topology: Arc<CageTopology>,
    pub patches: Vec<PatchCage>,
    next_id: u64,
}

impl PatchTracker {
    pub fn new(params: TrackingParams, ndim: usize) -> Result<Self> {
        params.validate()?;
        let topology = Arc::new(CageTopology::new(params.cage_cells, ndim));
        Ok(Self { params, topology, patches: Vec::new(), next_id: 0 })
    }

    pub fn topology(&self) -> &Arc<CageTopology> {
        &self.topology
    }

    pub fn ndim(&self) -> usize {
        self.topology.ndim()
    }

    /// Undeformed weight grid `w_s` over all current patches.
    pub fn weights(&self, dims: [usize; 3], dx: f64) -> ScalarGrid {
        accumulate_undeformed(&self.patches, dims, dx, |_| 1.0)
    }

    /// Distance from the walls that keeps a cage inside the domain in any
    /// orientation.
    fn margin(&self) -> f64 {
        0.5 * self.params.patch_size * (self.ndim() as f64).sqrt()
    }

    /// Candidate sites on a jittered grid with spacing `s_p / 2`.
    pub fn seeding_sites<R: Rng>(&self, density: &ScalarGrid, rng: &mut R) -> Vec<Vec3> {
        let h = 0.5 * self.params.patch_size;
        let ext = density.extent();
        let ndim = self.ndim();
        let counts: Vec<usize> = (0..3)
            .map(|a| if a < ndim { (ext[a] / h).floor().max(1.0) as usize } else { 1 })
            .collect();
        let mut sites = Vec::new();
        for k in 0..counts[2] {
            for j in 0..counts[1] {
                for i in 0..counts[0] {
                    let idx = [i, j, k];
                    let mut p = Vec3::new(0.0, 0.0, 0.5 * density.dx());
                    for a in 0..ndim {
                        let jit = self.params.seed_jitter * (rng.gen::<f64>() - 0.5);
                        p[a] = (idx[a] as f64 + 0.5 + jit) * h;
                    }
                    sites.push(p);
                }
            }
        }
        sites
    }

    /// Seeds patches where `w_s` (plus kernels of patches seeded in this
    /// call) is below the threshold and density is present. Returns the
    /// number of new patches; they are appended to `patches`.
    pub fn seed<R: Rng>(&mut self, density: &ScalarGrid, w_s: &ScalarGrid, rng: &mut R) -> usize {
        let ndim = self.ndim();
        let ext = density.extent();
        let margin = self.margin();
        let mut fresh: Vec<Vec3> = Vec::new();
        for site in self.seeding_sites(density, rng) {
            if (0..ndim).any(|a| site[a] < margin || site[a] > ext[a] - margin) {
                continue;
            }
            if density.sample(&site) < self.params.min_density {
                continue;
            }
            let w = w_s.sample(&site) + weight_at(&fresh, self.params.patch_size, &site, ndim);
            if w >= self.params.seed_threshold {
                continue;
            }
            fresh.push(site);
        }
        let n = fresh.len();
        for site in fresh {
            let frame = init_orientation(density, &site);
            let mut p = PatchCage::new(self.next_id, self.topology.clone(), site, self.params.patch_size, frame);
            p.weight = 0.0;
            self.next_id += 1;
            self.patches.push(p);
        }
        n
    }

    /// Inserts an existing cage; used when replaying stored patches.
    pub fn insert(&mut self, patch: PatchCage) {
        self.next_id = self.next_id.max(patch.id + 1);
        self.patches.push(patch);
    }

    /// Advects every patch one step through the velocity low-passed at the
    /// cage cell size, limits deformation, and removes patches that are
    /// too deformed, degenerate, or touching the domain boundary.
    pub fn advance(&mut self, vel: &VectorGrid, dt: f64, dir: Direction) -> Vec<(u64, Removal)> {
        if self.patches.is_empty() {
            return Vec::new();
        }
        let smooth = vel.low_pass(self.params.cage_cell_size());
        self.advance_filtered(&smooth, dt, dir)
    }

    /// As [`advance`](Self::advance) with an already filtered velocity.
    pub fn advance_filtered(&mut self, smooth: &VectorGrid, dt: f64, dir: Direction) -> Vec<(u64, Removal)> {
        let lambda0 = self.params.lambda0;
        let limit = self.params.energy_limit();
        let ext = smooth.dims().map(|d| d as f64 * smooth.dx());
        let ndim = self.ndim();
        let verdicts: Vec<Option<Removal>> = self
            .patches
            .par_iter_mut()
            .map(|p| {
                if p.step(smooth, dt, dir, lambda0).is_err() {
                    return Some(Removal::Degenerate);
                }
                if p.positions.iter().any(|v| (0..ndim).any(|a| v[a] <= 0.0 || v[a] >= ext[a])) {
                    return Some(Removal::LeftDomain);
                }
                if p.energy > limit {
                    return Some(Removal::Deformed);
                }
                p.age += 1;
                None
            })
            .collect();
        let mut removed = Vec::new();
        let mut keep = Vec::with_capacity(self.patches.len());
        for (p, v) in self.patches.drain(..).zip(verdicts) {
            match v {
                Some(r) => removed.push((p.id, r)),
                None => keep.push(p),
            }
        }
        self.patches = keep;
        removed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn blob(dims: [usize; 3]) -> ScalarGrid {
        let c = Vec3::new(dims[0] as f64 / 2.0, dims[1] as f64 / 2.0, dims[2] as f64 / 2.0);
        ScalarGrid::from_fn(dims, 1.0, |p| {
            let mut d = p - c;
            if dims[2] == 1 {
                d.z = 0.0;
            }
            (-d.norm_squared() / 200.0).exp()
        })
    }

    #[test]
    fn seeds_on_nonempty_scene() {
        let d = blob([64, 64, 1]);
        let mut t = PatchTracker::new(TrackingParams::default(), 2).unwrap();
        let w = t.weights(d.dims(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(t.seed(&d, &w, &mut rng) >= 1);
        for p in &t.patches {
            assert_eq!(p.assignment, None);
            assert!(p.energy.abs() < 1e-9);
        }
    }

    #[test]
    fn full_weight_blocks_seeding() {
        let d = blob([64, 64, 1]);
        let mut t = PatchTracker::new(TrackingParams::default(), 2).unwrap();
        let w = ScalarGrid::filled([64, 64, 1], 1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(t.seed(&d, &w, &mut rng), 0);
    }

    #[test]
    fn seeded_patches_keep_their_distance() {
        let d = ScalarGrid::filled([64, 64, 1], 1.0, 1.0);
        let params = TrackingParams::default();
        let min = params.patch_size / 3.0;
        for s in 0..100 {
            let mut t = PatchTracker::new(params.clone(), 2).unwrap();
            let w = t.weights(d.dims(), 1.0);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            t.seed(&d, &w, &mut rng);
            let c: Vec<Vec3> = t.patches.iter().map(|p| p.centroid()).collect();
            for a in 0..c.len() {
                for b in a + 1..c.len() {
                    assert!((c[a] - c[b]).norm() > min, "seed {s}: {}", (c[a] - c[b]).norm());
                }
            }
        }
    }

    #[test]
    fn sheared_patch_is_removed() {
        let d = blob([48, 48, 1]);
        let mut t = PatchTracker::new(TrackingParams::default(), 2).unwrap();
        let w = t.weights(d.dims(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        t.seed(&d, &w, &mut rng);
        let n = t.patches.len();
        assert!(n > 0);
        // Strong shear about the domain centre.
        let vel = VectorGrid::from_fn([48, 48, 1], 1.0, |p| Vec3::new(0.6 * (p.y - 24.0), 0.0, 0.0));
        let mut removed = Vec::new();
        for _ in 0..10 {
            removed.extend(t.advance_filtered(&vel, 1.0, Direction::Forward));
        }
        assert!(removed.iter().any(|(_, r)| *r == Removal::Deformed || *r == Removal::LeftDomain));
        let limit = t.params.energy_limit();
        assert!(t.patches.iter().all(|p| p.energy <= limit));
    }

    #[test]
    fn still_fluid_keeps_patches() {
        let d = blob([48, 48, 1]);
        let mut t = PatchTracker::new(TrackingParams::default(), 2).unwrap();
        let w = t.weights(d.dims(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        t.seed(&d, &w, &mut rng);
        let n = t.patches.len();
        let vel = VectorGrid::new([48, 48, 1], 1.0);
        assert!(t.advance(&vel, 1.0, Direction::Forward).is_empty());
        assert_eq!(t.patches.len(), n);
        assert!(t.patches.iter().all(|p| p.age == 1));
    }
}
