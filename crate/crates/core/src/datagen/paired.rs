//! Coarse and fine solvers in lockstep, with the coarse one periodically
//! re-initialized from the filtered fine state.

use serde::{Deserialize, Serialize};

use super::scene::{initial_state, SceneConfig};
use crate::error::{Error, Result};
use crate::fluid::{step, Filter, ScalarGrid, SimParams, SimState};
use crate::synthesis::TrackingParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PairedSimConfig {
    pub ndim: usize,
    /// Coarse cells per axis; the coarse cell size is one world unit.
    pub coarse_res: usize,
    pub fine_factor: usize,
    /// Synchronization interval `t_r` in frames.
    pub sync_interval: usize,
    pub frames: usize,
    pub scenes: usize,
    pub seed: u64,
    pub dt: f64,
    pub buoyancy: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub scene: SceneConfig,
    pub tracking: TrackingParams,
    /// Network input edge length.
    pub input_res: usize,
    /// Factor applied to vorticity channels of network inputs.
    pub curl_scale: f64,
    /// Patches older than this stop recording and are retired.
    pub max_patch_age: u32,
}

impl Default for PairedSimConfig {
    fn default() -> Self {
        Self {
            ndim: 2,
            coarse_res: 32,
            fine_factor: 4,
            sync_interval: 40,
            frames: 200,
            scenes: 2,
            seed: 1,
            dt: 1.0,
            buoyancy: 0.02,
            tolerance: 1e-4,
            max_iterations: 4000,
            scene: SceneConfig::default(),
            tracking: TrackingParams::default(),
            input_res: crate::net::INPUT_SIZE,
            curl_scale: 4.0,
            max_patch_age: 100,
        }
    }
}

impl PairedSimConfig {
    /// Desk-scale 3D defaults.
    pub fn default_3d() -> Self {
        Self { ndim: 3, coarse_res: 24, frames: 120, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ndim != 2 && self.ndim != 3 {
            return Err(Error::InvalidParameter(format!("ndim must be 2 or 3, got {}", self.ndim)));
        }
        if self.fine_factor < 2 {
            return Err(Error::InvalidParameter("fine_factor must be >= 2".into()));
        }
        if self.sync_interval < 1 {
            return Err(Error::InvalidParameter("sync_interval must be >= 1".into()));
        }
        if self.coarse_res < 4 || self.input_res < 1 {
            return Err(Error::InvalidParameter("resolutions too small".into()));
        }
        self.scene.validate()?;
        self.tracking.validate()
    }

    pub fn coarse_dims(&self) -> [usize; 3] {
        let r = self.coarse_res;
        if self.ndim == 3 {
            [r; 3]
        } else {
            [r, r, 1]
        }
    }

    pub fn fine_dims(&self) -> [usize; 3] {
        let r = self.coarse_res * self.fine_factor;
        if self.ndim == 3 {
            [r; 3]
        } else {
            [r, r, 1]
        }
    }

    pub fn sim_params(&self, dt: f64, seed: u64) -> SimParams {
        let mut b = [0.0; 3];
        b[1] = self.buoyancy;
        SimParams {
            dt,
            buoyancy: b,
            emitters: Vec::new(),
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            seed,
            recenter: true,
        }
    }
}

/// Coarse state derived from the fine state alone: both fields are
/// low-passed and resampled onto the coarse grid; pressure restarts at zero.
pub fn synchronize(fine: &SimState, coarse_dims: [usize; 3], frame: u64) -> Result<SimState> {
    let density = fine.density.resample(coarse_dims)?;
    let velocity = fine.velocity.resample(coarse_dims)?;
    let mut s = SimState::from_fields(density, velocity)?;
    s.frame = frame;
    Ok(s)
}

pub struct PairedSim {
    cfg: PairedSimConfig,
    pub coarse: SimState,
    pub fine: SimState,
    coarse_params: SimParams,
    fine_params: SimParams,
    frame: usize,
}

impl PairedSim {
    pub fn new(cfg: &PairedSimConfig, scene: usize) -> Result<Self> {
        cfg.validate()?;
        let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(scene as u64);
        let fine_dx = 1.0 / cfg.fine_factor as f64;
        let fine = initial_state(&cfg.scene, cfg.fine_dims(), fine_dx, seed)?;
        let coarse = synchronize(&fine, cfg.coarse_dims(), 0)?;
        Ok(Self {
            coarse_params: cfg.sim_params(cfg.dt, seed),
            fine_params: cfg.sim_params(cfg.dt / cfg.fine_factor as f64, seed),
            cfg: cfg.clone(),
            coarse,
            fine,
            frame: 0,
        })
    }

    pub fn frame(&self) -> usize {
        self.frame
    }

    /// Whether the coarse state was just re-initialized from the fine one.
    pub fn just_synchronized(&self) -> bool {
        self.frame % self.cfg.sync_interval == 0
    }

    /// Advances both solvers by one frame; the fine solver takes
    /// `fine_factor` substeps.
    pub fn advance(&mut self) -> Result<()> {
        self.coarse = step(&self.coarse, &self.coarse_params)?.0;
        for _ in 0..self.cfg.fine_factor {
            self.fine = step(&self.fine, &self.fine_params)?.0;
        }
        self.frame += 1;
        if self.frame % self.cfg.sync_interval == 0 {
            self.coarse = synchronize(&self.fine, self.cfg.coarse_dims(), self.coarse.frame)?;
        }
        Ok(())
    }

    /// L2 distance between coarse density and the fine density resampled
    /// to the coarse grid.
    pub fn density_gap(&self) -> Result<f64> {
        let f: ScalarGrid = self.fine.density.resample(self.cfg.coarse_dims())?;
        Ok(f.data()
            .iter()
            .zip(self.coarse.density.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }
}

/// Runs one scene for `cfg.frames` frames, calling `visit` after every frame
/// (including the initial state at frame 0).
pub fn run_paired(
    cfg: &PairedSimConfig,
    scene: usize,
    mut visit: impl FnMut(&PairedSim) -> Result<()>,
) -> Result<()> {
    let mut sim = PairedSim::new(cfg, scene)?;
    visit(&sim)?;
    for _ in 0..cfg.frames {
        sim.advance()?;
        visit(&sim)?;
    }
    Ok(())
}

/// The coarse solver alone, started from the same synchronized state as a
/// paired run of `scene` and never re-initialized.
pub fn run_coarse(
    cfg: &PairedSimConfig,
    scene: usize,
    mut visit: impl FnMut(&SimState) -> Result<()>,
) -> Result<()> {
    let sim = PairedSim::new(cfg, scene)?;
    let mut state = sim.coarse;
    visit(&state)?;
    for _ in 0..cfg.frames {
        state = step(&state, &sim.coarse_params)?.0;
        visit(&state)?;
    }
    Ok(())
}
