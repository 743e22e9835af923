//! End-to-end stages shared by the command line and the tests. Each stage is
//! a function of the configuration and its input artifacts.

use std::path::{Path, PathBuf};

use crate::config::Config;
use crate::datagen::{generate, run_coarse, run_paired, Dataset};
use crate::error::{Error, Result};
use crate::eval::{mean_recall, recall_curve, write_csv, write_svg, EvalSet, RecallTable};
use crate::fluid::io::{save_pgm_mid_slice, save_volume};
use crate::fluid::{ScalarGrid, VectorGrid};
use crate::net::{method, objective, save_network, train, Model, NetPair, Network, NetworkSpec, TrainReport};
use crate::repository::{build_from_scene, Repository};
use crate::synthesis::{backward_pass, forward_pass, load_frame, render_volume, Synthesis};

pub const DENSITY_HEAD_FILE: &str = "density_head.spnet";
pub const MOTION_HEAD_FILE: &str = "motion_head.spnet";

pub fn gen_data(cfg: &Config) -> Result<Dataset> {
    generate(&cfg.paired())
}

/// Training and held-out halves, each thinned to its frame stride.
pub fn split(cfg: &Config, data: &Dataset) -> (Dataset, Dataset) {
    let (train, held) = data.split_by_patch(cfg.eval.train_fraction, cfg.eval.split_seed);
    (train.subsample(cfg.train.frame_stride), held.subsample(cfg.eval.frame_stride))
}

pub struct TrainedNets {
    pub nets: NetPair,
    /// Decision layers, present for objectives that use them.
    pub heads: [Option<Network>; 2],
    pub reports: [TrainReport; 2],
}

impl TrainedNets {
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.nets.save(dir)?;
        for (head, file) in self.heads.iter().zip([DENSITY_HEAD_FILE, MOTION_HEAD_FILE]) {
            if let Some(h) = head {
                save_network(&dir.join(file), h)?;
            }
        }
        Ok(())
    }
}

/// Trains the density branch on channel 0 and the motion branch on the
/// vorticity channels of `data`.
pub fn train_nets(cfg: &Config, data: &Dataset) -> Result<TrainedNets> {
    let shape = data.block_shape().ok_or_else(|| Error::InvalidParameter("dataset has no pairs".into()))?;
    let channels = shape[0];
    if channels < 2 {
        return Err(Error::DimensionMismatch(format!("flow blocks need density and vorticity, got {channels} channels")));
    }
    let mut tc = cfg.train.clone();
    tc.min_frame_gap = data.min_frame_gap();
    let obj = objective(&tc)?;
    let mut nets = Vec::new();
    let mut heads = Vec::new();
    let mut reports = Vec::new();
    for (k, range) in [0..1, 1..channels].into_iter().enumerate() {
        let set = data.pair_set(range.clone())?;
        let spec = NetworkSpec::descriptor(data.ndim, range.len());
        let seed = tc.seed.wrapping_add(k as u64);
        let mut model = Model::new(spec, obj.as_ref(), seed);
        let run = crate::net::TrainConfig { seed, ..tc.clone() };
        let report = train(&mut model, &set, &run, obj.as_ref())?;
        log::info!("branch {k}: epoch losses {:?}", report.epoch_loss);
        nets.push(model.branch);
        heads.push(model.head);
        reports.push(report);
    }
    let motion = nets.pop().expect("two branches");
    let density = nets.pop().expect("two branches");
    let motion_head = heads.pop().flatten();
    let density_head = heads.pop().flatten();
    let motion_report = reports.pop().expect("two reports");
    let density_report = reports.pop().expect("two reports");
    Ok(TrainedNets {
        nets: NetPair { density, motion },
        heads: [density_head, motion_head],
        reports: [density_report, motion_report],
    })
}

pub fn build_repo(cfg: &Config, nets: Option<&NetPair>) -> Result<Repository> {
    let m = method(&cfg.repo.method, nets, cfg.repo.motion_weight)?;
    build_from_scene(&cfg.paired(), &cfg.repo, m.as_ref())
}

/// Coarse density and velocity for every frame of the synthesis scene.
pub fn coarse_frames(cfg: &Config) -> Result<Vec<(ScalarGrid, VectorGrid)>> {
    let sim = cfg.paired();
    let scene = cfg.synth.scene;
    let mut out = Vec::with_capacity(sim.frames + 1);
    match cfg.synth.source.as_str() {
        "coarse" => run_coarse(&sim, scene, |s| {
            out.push((s.density.clone(), s.velocity.clone()));
            Ok(())
        })?,
        "paired" => run_paired(&sim, scene, |s| {
            out.push((s.coarse.density.clone(), s.coarse.velocity.clone()));
            Ok(())
        })?,
        other => return Err(Error::Config(format!("synth.source: unknown source '{other}'"))),
    }
    Ok(out)
}

/// Forward and backward synthesis passes over the coarse source frames.
pub fn synthesize(cfg: &Config, repo: &Repository, nets: Option<&NetPair>) -> Result<Synthesis> {
    if repo.ndim != cfg.sim.ndim {
        return Err(Error::DimensionMismatch(format!(
            "repository is {}D, configuration is {}D",
            repo.ndim, cfg.sim.ndim
        )));
    }
    let mut params = cfg.synthesis();
    params.motion_weight = f64::from(repo.motion_weight);
    let m = method(&params.method, nets, params.motion_weight)?;
    let index = repo.index()?;
    let frames = coarse_frames(cfg)?;
    let mut synth = forward_pass(frames.into_iter().map(Ok), repo, &index, m.as_ref(), &params)?;
    backward_pass(&mut synth, &params)?;
    let s = &synth.stats;
    log::info!(
        "synthesis: {} assignments, removed {} deformed, {} left domain, {} degenerate, {} re-check, {} ended",
        s.assignment_distances.len(),
        s.removed_deformed,
        s.removed_left_domain,
        s.removed_degenerate,
        s.removed_recheck,
        s.ended
    );
    Ok(synth)
}

/// Stored frame files of `dir` in frame order.
pub fn frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::NotFound(dir.to_path_buf()));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "spfrm"));
    files.sort();
    Ok(files)
}

/// Renders each stored frame to `out/frame_NNNNN.spvol` plus a PGM preview
/// of its middle slice.
pub fn render_dir(cfg: &Config, repo: &Repository, frames: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let params = cfg.synthesis();
    std::fs::create_dir_all(out)?;
    let mut written = Vec::new();
    for file in frame_files(frames)? {
        let synth = load_frame(&file)?;
        let f = &synth.frames[0];
        let vol = render_volume(&synth, f, repo, params.upscale, &params)?;
        let path = out.join(format!("frame_{:05}.spvol", f.frame));
        save_volume(&path, &vol)?;
        save_pgm_mid_slice(&path.with_extension("pgm"), &vol)?;
        written.push(path);
    }
    Ok(written)
}

/// Recall curves of the held-out pairs: combined and density-only CNN
/// descriptors for each weight set, and the simple descriptor.
pub fn evaluate(cfg: &Config, held_out: &Dataset, weights: &[(String, NetPair)]) -> Result<RecallTable> {
    let mut table = RecallTable::default();
    let k = cfg.eval.max_rank;
    for (label, nets) in weights {
        for name in ["cnn", "cnn-density"] {
            let m = method(name, Some(nets), cfg.eval.motion_weight)?;
            let curve = recall_curve(&EvalSet::from_dataset(held_out, m.as_ref())?, k);
            table.push(format!("{name}:{label}"), curve)?;
        }
    }
    let simple = method("simple-l2", None, cfg.eval.motion_weight)?;
    table.push("simple-l2", recall_curve(&EvalSet::from_dataset(held_out, simple.as_ref())?, k))?;
    Ok(table)
}

/// Mean recall of every column over the configured rank range.
pub fn summarize(cfg: &Config, table: &RecallTable) -> Vec<(String, f64)> {
    let [lo, hi] = cfg.eval.summary_ranks;
    table.columns.iter().map(|(n, c)| (n.clone(), mean_recall(c, lo, hi.min(c.len())))).collect()
}

pub fn write_eval(dir: &Path, table: &RecallTable) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let csv = dir.join("recall.csv");
    write_csv(std::io::BufWriter::new(std::fs::File::create(&csv)?), table)?;
    let svg = dir.join("recall.svg");
    write_svg(&svg, table)?;
    Ok((csv, svg))
}
