//! Forward matching pass and backward anticipation pass.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampling::sample_flow_block;
use super::tracking::{PatchTracker, Removal, TrackingParams};
use crate::cage::{Assignment, CageTopology, Direction, PatchCage};
use crate::error::{Error, Result};
use crate::fluid::{curl, Filter, ScalarGrid, Vec3, VectorGrid};
use crate::net::{Descriptor, DescriptorMethod, SYNTH_MOTION_WEIGHT};
use crate::repository::{DescriptorIndex, Repository};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisParams {
    pub tracking: TrackingParams,
    /// A matched patch is dropped once its descriptor distance exceeds
    /// `recheck_factor * assigned distance + recheck_offset`.
    pub recheck_factor: f64,
    pub recheck_offset: f64,
    /// Fade length `t_f` in frames.
    pub fade_frames: usize,
    /// Descriptor settings; these must match the repository and the
    /// training data, so they are not configured separately.
    #[serde(skip)]
    pub motion_weight: f64,
    #[serde(skip)]
    pub method: String,
    #[serde(skip)]
    pub input_res: usize,
    #[serde(skip)]
    pub curl_scale: f64,
    /// Frame time step of the source simulation.
    #[serde(skip)]
    pub dt: f64,
    /// Width of the mask blur in coarse cells.
    pub mask_blur: f64,
    /// Coarse density at which the render mask reaches 1.
    pub mask_saturation: f64,
    /// Guard for the division by accumulated render weights.
    pub epsilon: f64,
    pub seed: u64,
    /// Scene index of the source simulation.
    pub scene: usize,
    /// `coarse`: a free coarse run; `paired`: the coarse half of a paired
    /// run, periodically re-initialized from the fine one.
    pub source: String,
    /// Render resolution relative to the coarse grid.
    pub upscale: usize,
}

impl Default for SynthesisParams {
    fn default() -> Self {
        Self {
            tracking: TrackingParams::default(),
            recheck_factor: 2.0,
            recheck_offset: 0.1,
            fade_frames: 40,
            motion_weight: SYNTH_MOTION_WEIGHT,
            method: "cnn".into(),
            input_res: crate::net::INPUT_SIZE,
            curl_scale: 4.0,
            dt: 1.0,
            mask_blur: 2.0,
            mask_saturation: 0.05,
            epsilon: 1e-4,
            seed: 1,
            scene: 0,
            source: "coarse".into(),
            upscale: 4,
        }
    }
}

impl SynthesisParams {
    pub fn validate(&self) -> Result<()> {
        self.tracking.validate()?;
        let vals = [self.recheck_factor, self.recheck_offset, self.mask_blur, self.mask_saturation, self.epsilon];
        if vals.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidParameter("synthesis thresholds must be >= 0".into()));
        }
        if self.epsilon == 0.0 || self.mask_saturation == 0.0 {
            return Err(Error::InvalidParameter("epsilon and mask_saturation must be positive".into()));
        }
        if !(self.dt > 0.0) || self.upscale == 0 {
            return Err(Error::InvalidParameter("dt and upscale must be positive".into()));
        }
        if self.source != "coarse" && self.source != "paired" {
            return Err(Error::InvalidParameter(format!("unknown source '{}' (coarse or paired)", self.source)));
        }
        Ok(())
    }
}

/// State of one displayed patch at one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSnapshot {
    pub id: u64,
    pub entry: u32,
    pub cursor: u32,
    pub weight: f64,
    pub positions: Vec<Vec3>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameData {
    pub frame: u32,
    pub density: ScalarGrid,
    pub velocity: VectorGrid,
    pub patches: Vec<PatchSnapshot>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynthesisStats {
    /// Descriptor distance of every repository assignment.
    pub assignment_distances: Vec<f64>,
    pub removed_deformed: usize,
    pub removed_left_domain: usize,
    pub removed_degenerate: usize,
    pub removed_recheck: usize,
    pub ended: usize,
    pub active: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub ndim: usize,
    pub patch_size: f64,
    pub cage_cells: usize,
    pub frames: Vec<FrameData>,
    pub stats: SynthesisStats,
}

impl Synthesis {
    pub fn topology(&self) -> Arc<CageTopology> {
        Arc::new(CageTopology::new(self.cage_cells, self.ndim))
    }

    /// Cage of a stored snapshot.
    pub fn cage(&self, topology: &Arc<CageTopology>, s: &PatchSnapshot) -> PatchCage {
        PatchCage::from_positions(s.id, topology.clone(), self.patch_size, s.positions.clone())
    }
}

struct Life {
    assigned_at: usize,
    remaining: u32,
    fade: u32,
}

/// Fade-out weight `s` frames after assignment for an entry with
/// `remaining` frames left and a fade of `fade` frames.
pub fn fade_out_weight(s: usize, remaining: u32, fade: u32) -> f64 {
    if fade == 0 {
        return 1.0;
    }
    ((f64::from(remaining) - s as f64) / f64::from(fade)).clamp(0.0, 1.0)
}

/// Fade-in weight of an anticipated snapshot `s` frames before creation.
pub fn fade_in_weight(s: usize, fade: usize) -> f64 {
    if fade == 0 {
        return 1.0;
    }
    (1.0 - s as f64 / fade as f64).clamp(0.0, 1.0)
}

fn describe_all(
    patches: &[PatchCage],
    density: &ScalarGrid,
    vorticity: &crate::fluid::Curl,
    method: &dyn DescriptorMethod,
    params: &SynthesisParams,
) -> Result<Vec<Descriptor>> {
    patches
        .par_iter()
        .map(|p| method.describe(&sample_flow_block(p, density, vorticity, params.input_res, params.curl_scale)?))
        .collect()
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

fn descriptor_distance(d: &Descriptor, stored: &[f32]) -> f64 {
    d.values()
        .iter()
        .zip(stored)
        .map(|(a, b)| {
            let e = *a as f32 as f64 - f64::from(*b);
            e * e
        })
        .sum::<f64>()
        .sqrt()
}

/// Runs the coarse frames through seeding, matching, tracking, re-checks
/// and fade-out, recording one snapshot list per frame.
pub fn forward_pass(
    source: impl IntoIterator<Item = Result<(ScalarGrid, VectorGrid)>>,
    repo: &Repository,
    index: &DescriptorIndex,
    method: &dyn DescriptorMethod,
    params: &SynthesisParams,
) -> Result<Synthesis> {
    params.validate()?;
    if repo.entries.is_empty() || index.is_empty() {
        return Err(Error::EmptyRepository);
    }
    if index.dim() != repo.dim {
        return Err(Error::DimensionMismatch(format!("index dim {} vs repository {}", index.dim(), repo.dim)));
    }
    if (f64::from(repo.motion_weight) - params.motion_weight).abs() > 1e-6 {
        log::warn!("repository motion weight {} differs from {}", repo.motion_weight, params.motion_weight);
    }
    let mut tracker = PatchTracker::new(params.tracking.clone(), repo.ndim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut lives: HashMap<u64, Life> = HashMap::new();
    let mut stats = SynthesisStats::default();
    let mut frames = Vec::new();

    for (t, item) in source.into_iter().enumerate() {
        let (density, velocity) = item?;
        if density.ndim() != repo.ndim {
            return Err(Error::DimensionMismatch(format!(
                "{}D source with a {}D repository",
                density.ndim(),
                repo.ndim
            )));
        }
        if t > 0 {
            for (id, why) in tracker.advance(&velocity, params.dt, Direction::Forward) {
                lives.remove(&id);
                match why {
                    Removal::Deformed => stats.removed_deformed += 1,
                    Removal::LeftDomain => stats.removed_left_domain += 1,
                    Removal::Degenerate => stats.removed_degenerate += 1,
                }
            }
            tracker.patches.retain_mut(|p| {
                let a = p.assignment.as_mut().expect("tracked patches are assigned");
                a.cursor += 1;
                let alive = (a.cursor as usize) < repo.entries[a.entry as usize].frames(repo.dim);
                if !alive {
                    lives.remove(&p.id);
                    stats.ended += 1;
                }
                alive
            });
        }
        let vorticity = curl(&velocity);

        let current = describe_all(&tracker.patches, &density, &vorticity, method, params)?;
        let mut keep = Vec::with_capacity(current.len());
        for (p, d) in tracker.patches.iter().zip(&current) {
            let a = p.assignment.expect("tracked patches are assigned");
            let stored = repo.descriptor(a.entry as usize, a.cursor as usize);
            let ok = !d.is_degenerate()
                && descriptor_distance(d, stored) <= params.recheck_factor * a.distance + params.recheck_offset;
            if !ok {
                lives.remove(&p.id);
                stats.removed_recheck += 1;
            }
            keep.push(ok);
        }
        let mut flags = keep.into_iter();
        tracker.patches.retain(|_| flags.next().unwrap_or(true));

        let w_s = tracker.weights(density.dims(), density.dx());
        let before = tracker.patches.len();
        tracker.seed(&density, &w_s, &mut rng);
        let fresh = describe_all(&tracker.patches[before..], &density, &vorticity, method, params)?;
        let matches: Vec<Option<(usize, usize, f64)>> = fresh
            .par_iter()
            .map(|d| {
                if d.is_degenerate() {
                    return Ok(None);
                }
                if d.len() != index.dim() {
                    return Err(Error::DimensionMismatch(format!(
                        "descriptor length {} vs repository {}",
                        d.len(),
                        index.dim()
                    )));
                }
                let m = index.query(&to_f32(d.values()), 1)?;
                Ok(m.first().map(|m| (m.entry, m.frame, m.distance)))
            })
            .collect::<Result<_>>()?;
        let mut assigned = vec![true; before];
        for (p, m) in tracker.patches[before..].iter_mut().zip(matches) {
            match m {
                Some((entry, frame, distance)) => {
                    p.assignment = Some(Assignment { entry: entry as u32, cursor: frame as u32, distance });
                    let remaining = (repo.entries[entry].frames(repo.dim) - frame) as u32;
                    let fade = remaining.min(params.fade_frames as u32);
                    lives.insert(p.id, Life { assigned_at: t, remaining, fade });
                    stats.assignment_distances.push(distance);
                    assigned.push(true);
                }
                None => assigned.push(false),
            }
        }
        let mut flags = assigned.into_iter();
        tracker.patches.retain(|_| flags.next().unwrap_or(true));

        let mut snaps = Vec::with_capacity(tracker.patches.len());
        for p in &mut tracker.patches {
            let life = &lives[&p.id];
            p.weight = fade_out_weight(t - life.assigned_at, life.remaining, life.fade);
            let a = p.assignment.expect("assigned");
            snaps.push(PatchSnapshot {
                id: p.id,
                entry: a.entry,
                cursor: a.cursor,
                weight: p.weight,
                positions: p.positions.clone(),
            });
        }
        stats.active.push(snaps.len());
        frames.push(FrameData { frame: t as u32, density, velocity, patches: snaps });
    }
    Ok(Synthesis {
        ndim: repo.ndim,
        patch_size: params.tracking.patch_size,
        cage_cells: params.tracking.cage_cells,
        frames,
        stats,
    })
}

/// Adds anticipation: every patch first shown at frame `t` is advected
/// backwards through the stored velocities over `[t - t_f, t)` with
/// deformation limiting, fading in from 0 to 1.
pub fn backward_pass(synth: &mut Synthesis, params: &SynthesisParams) -> Result<()> {
    params.validate()?;
    let topology = synth.topology();
    let mut first_seen: BTreeMap<u64, usize> = BTreeMap::new();
    for (t, f) in synth.frames.iter().enumerate() {
        for s in &f.patches {
            first_seen.entry(s.id).or_insert(t);
        }
    }
    let fade = params.fade_frames;
    let smooth: Vec<VectorGrid> = synth
        .frames
        .par_iter()
        .map(|f| f.velocity.low_pass(params.tracking.cage_cell_size()))
        .collect();
    let limit = params.tracking.energy_limit();
    let mut extra: Vec<Vec<PatchSnapshot>> = vec![Vec::new(); synth.frames.len()];
    for t in (1..synth.frames.len()).rev() {
        let born: Vec<&PatchSnapshot> =
            synth.frames[t].patches.iter().filter(|s| first_seen.get(&s.id) == Some(&t)).collect();
        let tracks: Vec<Vec<(usize, PatchSnapshot)>> = born
            .par_iter()
            .map(|s| {
                let mut cage = synth.cage(&topology, s);
                let ext = smooth[t].dims().map(|d| d as f64 * smooth[t].dx());
                let mut out = Vec::new();
                for step in 1..=fade.min(t) {
                    if cage.step(&smooth[t - step + 1], params.dt, Direction::Backward, params.tracking.lambda0).is_err()
                    {
                        break;
                    }
                    let outside =
                        cage.positions.iter().any(|v| (0..synth.ndim).any(|a| v[a] <= 0.0 || v[a] >= ext[a]));
                    if outside || cage.energy > limit {
                        break;
                    }
                    out.push((
                        t - step,
                        PatchSnapshot {
                            id: s.id,
                            entry: s.entry,
                            cursor: s.cursor.saturating_sub(step as u32),
                            weight: fade_in_weight(step, fade),
                            positions: cage.positions.clone(),
                        },
                    ));
                }
                out
            })
            .collect();
        for (frame, snap) in tracks.into_iter().flatten() {
            extra[frame].push(snap);
        }
    }
    for (f, e) in synth.frames.iter_mut().zip(extra) {
        f.patches.extend(e);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::methods::SimpleL2;
    use crate::repository::RepositoryEntry;

    fn blob_scene(dims: [usize; 3]) -> ScalarGrid {
        let c = Vec3::new(dims[0] as f64 / 2.0, dims[1] as f64 / 2.0, 0.5);
        ScalarGrid::from_fn(dims, 1.0, |p| (-(p - c).xy().norm_squared() / 60.0).exp())
    }

    /// Repository whose entries are the simple descriptors of patches of
    /// the blob scene, each `frames` long.
    fn self_repo(density: &ScalarGrid, frames: usize, params: &SynthesisParams) -> Repository {
        let vel = VectorGrid::new(density.dims(), 1.0);
        let mut tracker = PatchTracker::new(params.tracking.clone(), 2).unwrap();
        let w = tracker.weights(density.dims(), 1.0);
        tracker.seed(density, &w, &mut ChaCha8Rng::seed_from_u64(params.seed));
        let v = curl(&vel);
        let mut repo = Repository::new(2, 74, 4, 0.6);
        for (i, p) in tracker.patches.iter().enumerate() {
            let d = SimpleL2.describe(&sample_flow_block(p, density, &v, 36, 4.0).unwrap()).unwrap();
            let descs = vec![d.into_values(); frames];
            let blocks = (0..frames).map(|f| vec![f as f64; 16]).collect();
            repo.push(RepositoryEntry::from_raw(i as u32, descs, blocks).unwrap()).unwrap();
        }
        repo
    }

    fn still(density: &ScalarGrid, n: usize) -> Vec<Result<(ScalarGrid, VectorGrid)>> {
        (0..n).map(|_| Ok((density.clone(), VectorGrid::new(density.dims(), 1.0)))).collect()
    }

    #[test]
    fn still_scene_matches_itself_and_lives_for_the_entry_length() {
        let params = SynthesisParams { method: "simple-l2".into(), fade_frames: 3, ..Default::default() };
        let density = blob_scene([48, 48, 1]);
        let repo = self_repo(&density, 5, &params);
        let index = repo.index().unwrap();
        let s = forward_pass(still(&density, 12), &repo, &index, &SimpleL2, &params).unwrap();
        // Patches seeded at frame 0 sit where the entries were recorded,
        // show entry frames 0..5 and end.
        let first: Vec<u64> = s.frames[0].patches.iter().map(|p| p.id).collect();
        assert!(!first.is_empty());
        assert!(s.stats.assignment_distances[..first.len()].iter().all(|&d| d < 1e-6));
        for id in &first {
            let shown: Vec<(usize, f64)> = s
                .frames
                .iter()
                .enumerate()
                .filter_map(|(t, f)| f.patches.iter().find(|p| p.id == *id).map(|p| (t, p.weight)))
                .collect();
            assert_eq!(shown.iter().map(|x| x.0).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
            let w: Vec<f64> = shown.iter().map(|x| x.1).collect();
            assert_eq!(w, vec![1.0, 1.0, 1.0, 2.0 / 3.0, 1.0 / 3.0]);
        }
        assert!(s.stats.ended >= first.len());
    }

    #[test]
    fn weights_stay_in_unit_range() {
        let params = SynthesisParams { method: "simple-l2".into(), fade_frames: 4, ..Default::default() };
        let density = blob_scene([48, 48, 1]);
        let repo = self_repo(&density, 9, &params);
        let index = repo.index().unwrap();
        let mut s = forward_pass(still(&density, 14), &repo, &index, &SimpleL2, &params).unwrap();
        backward_pass(&mut s, &params).unwrap();
        for f in &s.frames {
            assert!(f.patches.iter().all(|p| (0.0..=1.0).contains(&p.weight)));
        }
    }

    #[test]
    fn anticipation_in_still_fluid_keeps_the_creation_pose() {
        let params = SynthesisParams { method: "simple-l2".into(), fade_frames: 4, ..Default::default() };
        let density = blob_scene([48, 48, 1]);
        let repo = self_repo(&density, 30, &params);
        let index = repo.index().unwrap();
        let mut src = still(&density, 3);
        // Density appears only at frame 2, so patches are created there.
        src[0] = Ok((ScalarGrid::new(density.dims(), 1.0), VectorGrid::new(density.dims(), 1.0)));
        src[1] = Ok((ScalarGrid::new(density.dims(), 1.0), VectorGrid::new(density.dims(), 1.0)));
        let mut s = forward_pass(src, &repo, &index, &SimpleL2, &params).unwrap();
        assert!(s.frames[1].patches.is_empty());
        backward_pass(&mut s, &params).unwrap();
        let born = s.frames[2].patches.clone();
        assert!(!born.is_empty());
        for (t, w) in [(1, 0.75), (0, 0.5)] {
            let f = &s.frames[t];
            assert_eq!(f.patches.len(), born.len());
            for (a, b) in f.patches.iter().zip(&born) {
                assert_eq!(a.id, b.id);
                assert_eq!(a.weight, w);
                for (p, q) in a.positions.iter().zip(&b.positions) {
                    assert!((p - q).norm() < 1e-9);
                }
            }
        }
        assert_eq!(fade_in_weight(0, 40), 1.0);
        assert_eq!(fade_in_weight(40, 40), 0.0);
        assert_eq!(fade_in_weight(10, 40), 0.75);
    }

    #[test]
    fn anticipation_in_uniform_flow_translates_back() {
        let params = SynthesisParams { method: "simple-l2".into(), fade_frames: 5, ..Default::default() };
        let dims = [64, 48, 1];
        let density = blob_scene(dims);
        let repo = self_repo(&density, 30, &params);
        let u = Vec3::new(0.5, 0.25, 0.0);
        let flow = VectorGrid::from_fn(dims, 1.0, |_| u);
        let empty = ScalarGrid::new(dims, 1.0);
        let mut src: Vec<Result<(ScalarGrid, VectorGrid)>> =
            (0..6).map(|_| Ok((empty.clone(), flow.clone()))).collect();
        src.push(Ok((density.clone(), flow.clone())));
        let index = repo.index().unwrap();
        let mut s = forward_pass(src, &repo, &index, &SimpleL2, &params).unwrap();
        backward_pass(&mut s, &params).unwrap();
        let born = &s.frames[6].patches;
        assert!(!born.is_empty());
        let early = &s.frames[1].patches;
        assert_eq!(early.len(), born.len());
        for (a, b) in early.iter().zip(born) {
            assert_eq!(a.weight, 0.0);
            for (p, q) in a.positions.iter().zip(&b.positions) {
                let expect = q - u * 5.0;
                assert!((p - expect).norm() < 1e-6, "{p:?} vs {expect:?}");
            }
        }
    }

    #[test]
    fn dimension_and_empty_checks() {
        let params = SynthesisParams { method: "simple-l2".into(), ..Default::default() };
        let density = blob_scene([48, 48, 1]);
        let repo = self_repo(&density, 3, &params);
        let index = repo.index().unwrap();
        let empty = Repository::new(2, 74, 4, 0.6);
        assert!(matches!(
            forward_pass(still(&density, 1), &empty, &index, &SimpleL2, &params),
            Err(Error::EmptyRepository)
        ));
        let mut wrong = repo.clone();
        wrong.dim = 10;
        wrong.entries = vec![RepositoryEntry {
            id: 0,
            descriptors: vec![0.0; 10],
            density: None,
            min: 0.0,
            max: 1.0,
        }];
        let wi = wrong.index().unwrap();
        assert!(matches!(
            forward_pass(still(&density, 1), &wrong, &wi, &SimpleL2, &params),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
