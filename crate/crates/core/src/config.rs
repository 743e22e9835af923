//! JSON configuration with one section per pipeline stage. Every key is
//! optional; missing keys take their defaults and unknown keys are errors.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::datagen::{PairedSimConfig, SceneConfig};
use crate::error::{Error, Result};
use crate::net::{TrainConfig, SYNTH_MOTION_WEIGHT};
use crate::repository::RepoBuildConfig;
use crate::synthesis::{SynthesisParams, TrackingParams};

/// Solver and scene settings shared by every stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub ndim: usize,
    pub coarse_res: usize,
    pub fine_factor: usize,
    pub dt: f64,
    pub buoyancy: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub scene: SceneConfig,
}

/// Paired runs and patch recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatagenSection {
    pub sync_interval: usize,
    pub frames: usize,
    pub scenes: usize,
    pub seed: u64,
    pub tracking: TrackingParams,
    pub input_res: usize,
    pub curl_scale: f64,
    pub max_patch_age: u32,
}

impl Default for SimSection {
    fn default() -> Self {
        Self::from(&PairedSimConfig::default())
    }
}

impl From<&PairedSimConfig> for SimSection {
    fn from(p: &PairedSimConfig) -> Self {
        Self {
            ndim: p.ndim,
            coarse_res: p.coarse_res,
            fine_factor: p.fine_factor,
            dt: p.dt,
            buoyancy: p.buoyancy,
            tolerance: p.tolerance,
            max_iterations: p.max_iterations,
            scene: p.scene.clone(),
        }
    }
}

impl Default for DatagenSection {
    fn default() -> Self {
        Self::from(&PairedSimConfig::default())
    }
}

impl From<&PairedSimConfig> for DatagenSection {
    fn from(p: &PairedSimConfig) -> Self {
        Self {
            sync_interval: p.sync_interval,
            frames: p.frames,
            scenes: p.scenes,
            seed: p.seed,
            tracking: p.tracking.clone(),
            input_res: p.input_res,
            curl_scale: p.curl_scale,
            max_patch_age: p.max_patch_age,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Fraction of patch ids used for training; the rest is evaluated.
    pub train_fraction: f64,
    pub split_seed: u64,
    /// Only pairs at frames divisible by this are evaluated.
    pub frame_stride: u32,
    pub max_rank: usize,
    /// Ranks averaged for the summary recall.
    pub summary_ranks: [usize; 2],
    pub motion_weight: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            split_seed: 7,
            frame_stride: 2,
            max_rank: 20,
            summary_ranks: [5, 20],
            motion_weight: SYNTH_MOTION_WEIGHT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub sim: SimSection,
    pub datagen: DatagenSection,
    pub train: TrainConfig,
    pub repo: RepoBuildConfig,
    pub synth: SynthesisParams,
    pub eval: EvalConfig,
}

impl Config {
    /// 3D defaults for every stage.
    pub fn default_3d() -> Self {
        let p = PairedSimConfig::default_3d();
        Self {
            sim: SimSection::from(&p),
            datagen: DatagenSection::from(&p),
            train: TrainConfig::default_3d(),
            ..Self::default()
        }
    }

    /// Parses a document over the defaults of its dimension: `sim.ndim: 3`
    /// selects [`Config::default_3d`] as the base.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let base = match doc.pointer("/sim/ndim").and_then(Value::as_u64) {
            Some(3) => Self::default_3d(),
            _ => Self::default(),
        };
        let mut merged = serde_json::to_value(&base).expect("config serializes");
        overlay(&mut merged, doc);
        let cfg: Config = serde_path_to_error::deserialize(merged).map_err(|e| {
            let path = e.path().to_string();
            let msg = e.inner().to_string();
            match msg.strip_prefix("unknown field `").and_then(|m| m.split('`').next()) {
                Some(field) => {
                    let key = if path == "." { field.to_string() } else { path };
                    Error::UnknownConfigKey { key }
                }
                None => Error::Config(format!("{path}: {msg}")),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::NotFound(path.to_path_buf()));
        }
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Document with every default materialized.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let as_config = |e: Error| Error::Config(e.to_string());
        self.paired().validate().map_err(as_config)?;
        self.train.validate().map_err(as_config)?;
        self.synthesis().validate().map_err(as_config)?;
        if !(0.0..1.0).contains(&self.eval.train_fraction) || self.eval.frame_stride == 0 || self.eval.max_rank == 0 {
            return Err(Error::Config("eval: train_fraction in [0, 1), positive frame_stride and max_rank".into()));
        }
        Ok(())
    }

    /// Overrides every seed.
    pub fn set_seed(&mut self, seed: u64) {
        self.datagen.seed = seed;
        self.train.seed = seed;
        self.synth.seed = seed;
        self.eval.split_seed = seed;
    }

    pub fn paired(&self) -> PairedSimConfig {
        PairedSimConfig {
            ndim: self.sim.ndim,
            coarse_res: self.sim.coarse_res,
            fine_factor: self.sim.fine_factor,
            sync_interval: self.datagen.sync_interval,
            frames: self.datagen.frames,
            scenes: self.datagen.scenes,
            seed: self.datagen.seed,
            dt: self.sim.dt,
            buoyancy: self.sim.buoyancy,
            tolerance: self.sim.tolerance,
            max_iterations: self.sim.max_iterations,
            scene: self.sim.scene.clone(),
            tracking: self.datagen.tracking.clone(),
            input_res: self.datagen.input_res,
            curl_scale: self.datagen.curl_scale,
            max_patch_age: self.datagen.max_patch_age,
        }
    }

    /// Synthesis settings with the descriptor inputs of the training data
    /// and the repository's method and weight.
    pub fn synthesis(&self) -> SynthesisParams {
        SynthesisParams {
            motion_weight: self.repo.motion_weight,
            method: self.repo.method.clone(),
            input_res: self.datagen.input_res,
            curl_scale: self.datagen.curl_scale,
            dt: self.sim.dt,
            ..self.synth.clone()
        }
    }
}

/// Recursively replaces values of `base` with those of `over`.
fn overlay(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => overlay(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}
