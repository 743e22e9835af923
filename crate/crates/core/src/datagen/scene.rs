//! Randomized initial conditions: Gaussian density blobs and a
//! divergence-free velocity perturbation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluid::{project, ScalarGrid, SimState, Vec3, VectorGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub blobs: usize,
    /// Blob radius range in world units.
    pub blob_radius: [f64; 2],
    pub blob_density: [f64; 2],
    /// Peak speed of the velocity perturbation.
    pub velocity_noise: f64,
    /// Number of random Fourier modes in the perturbation potential.
    pub noise_modes: usize,
    /// Wavelength range of those modes in world units.
    pub noise_wavelength: [f64; 2],
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            blobs: 4,
            blob_radius: [2.0, 4.5],
            blob_density: [0.6, 1.0],
            velocity_noise: 0.4,
            noise_modes: 8,
            noise_wavelength: [6.0, 20.0],
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let ordered = |r: [f64; 2]| r[0] > 0.0 && r[0] <= r[1];
        if !ordered(self.blob_radius) || !ordered(self.noise_wavelength) || !(self.blob_density[0] <= self.blob_density[1]) {
            return Err(Error::InvalidParameter("scene ranges must be positive and ordered".into()));
        }
        if self.velocity_noise < 0.0 {
            return Err(Error::InvalidParameter("velocity_noise must be >= 0".into()));
        }
        Ok(())
    }
}

struct Mode {
    k: Vec3,
    phase: f64,
    /// Potential amplitude per component (only z is used in 2D).
    amp: Vec3,
}

/// Velocity `curl(A)` with `A = sum amp * sin(k.x + phase)`; in 2D the
/// potential is the stream function `A_z`.
fn curl_of_modes(modes: &[Mode], p: &Vec3, ndim: usize) -> Vec3 {
    let mut v = Vec3::zeros();
    for m in modes {
        let c = (m.k.dot(p) + m.phase).cos();
        // grad(sin(k.x + phi)) = k cos(...), curl(a s) = grad(s) x a.
        let g = m.k * c;
        if ndim == 2 {
            v += Vec3::new(g.y * m.amp.z, -g.x * m.amp.z, 0.0);
        } else {
            v += g.cross(&m.amp);
        }
    }
    v
}

/// Initial state on a grid covering `[0, extent]^d` with cell size `dx`.
pub fn initial_state(cfg: &SceneConfig, dims: [usize; 3], dx: f64, seed: u64) -> Result<SimState> {
    cfg.validate()?;
    let ndim = if dims[2] == 1 { 2 } else { 3 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ext = Vec3::new(dims[0] as f64 * dx, dims[1] as f64 * dx, dims[2] as f64 * dx);
    let mut blobs = Vec::new();
    for _ in 0..cfg.blobs {
        let r = rng.gen_range(cfg.blob_radius[0]..=cfg.blob_radius[1]);
        let amp = rng.gen_range(cfg.blob_density[0]..=cfg.blob_density[1]);
        let mut c = Vec3::zeros();
        for a in 0..ndim {
            c[a] = rng.gen_range(0.3..0.7) * ext[a];
        }
        blobs.push((c, r, amp));
    }
    let density = ScalarGrid::from_fn(dims, dx, |p| {
        blobs
            .iter()
            .map(|(c, r, amp)| {
                let mut d = p - c;
                if ndim == 2 {
                    d.z = 0.0;
                }
                amp * (-d.norm_squared() / (2.0 * r * r)).exp()
            })
            .sum()
    });
    let mut modes = Vec::new();
    for _ in 0..cfg.noise_modes {
        let lambda = rng.gen_range(cfg.noise_wavelength[0]..=cfg.noise_wavelength[1]);
        let mut dir = Vec3::zeros();
        for a in 0..ndim {
            dir[a] = rng.gen_range(-1.0..1.0);
        }
        if dir.norm() < 1e-3 {
            dir.x = 1.0;
        }
        let k = dir.normalize() * (2.0 * std::f64::consts::PI / lambda);
        let mut amp = Vec3::zeros();
        for a in 0..3 {
            if ndim == 3 || a == 2 {
                amp[a] = rng.gen_range(-1.0..1.0) / k.norm();
            }
        }
        modes.push(Mode { k, phase: rng.gen_range(0.0..std::f64::consts::TAU), amp });
    }
    let raw = VectorGrid::from_fn(dims, dx, |p| curl_of_modes(&modes, &p, ndim));
    let peak = raw.max_abs();
    let mut velocity = raw;
    if peak > 0.0 {
        let s = cfg.velocity_noise / peak;
        for a in 0..ndim {
            velocity.comp_mut(a).iter_mut().for_each(|v| *v *= s);
        }
    }
    velocity.enforce_closed_box();
    let (velocity, _) = project(&velocity, 1e-6, 10_000);
    SimState::from_fields(density, velocity)
}
