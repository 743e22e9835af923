//! Space-time patch repository: per-frame descriptors and normalized
//! high-resolution density blocks, with an exact nearest-neighbor index.

mod build;
mod io;
mod kdtree;

pub use build::{build_from_scene, RepoBuildConfig};
pub use io::{load_descriptors, load_repository, read_repository, save_repository, write_repository, REPO_MAGIC};
pub use kdtree::{brute_force, DescriptorIndex, Match};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RepositoryEntry {
    pub id: u32,
    /// `frames x dim`, row major.
    pub descriptors: Vec<f32>,
    /// `frames x block_len` densities in `[0, 1]`; absent after a
    /// descriptor-only load.
    pub density: Option<Vec<f32>>,
    /// Range of the source densities before normalization.
    pub min: f32,
    pub max: f32,
}

impl RepositoryEntry {
    /// Normalizes raw density blocks to `[0, 1]` using their joint range.
    pub fn from_raw(id: u32, descriptors: Vec<Vec<f64>>, blocks: Vec<Vec<f64>>) -> Result<Self> {
        if descriptors.len() != blocks.len() || descriptors.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} descriptors for {} density blocks",
                descriptors.len(),
                blocks.len()
            )));
        }
        let (lo, hi) = blocks
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let span = hi - lo;
        let density = blocks
            .iter()
            .flatten()
            .map(|&v| if span > 0.0 { ((v - lo) / span) as f32 } else { 0.0 })
            .collect();
        Ok(Self {
            id,
            descriptors: descriptors.into_iter().flatten().map(|v| v as f32).collect(),
            density: Some(density),
            min: lo as f32,
            max: hi as f32,
        })
    }

    pub fn frames(&self, dim: usize) -> usize {
        self.descriptors.len() / dim.max(1)
    }

    /// Source-range density value of a stored sample.
    pub fn denormalize(&self, v: f32) -> f64 {
        f64::from(self.min) + f64::from(v) * (f64::from(self.max) - f64::from(self.min))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Repository {
    pub ndim: usize,
    pub dim: usize,
    /// Edge length of the stored density blocks.
    pub block_res: usize,
    /// Motion weight the descriptors were combined with.
    pub motion_weight: f32,
    pub entries: Vec<RepositoryEntry>,
}

impl Repository {
    pub fn new(ndim: usize, dim: usize, block_res: usize, motion_weight: f32) -> Self {
        Self { ndim, dim, block_res, motion_weight, entries: Vec::new() }
    }

    pub fn block_len(&self) -> usize {
        self.block_res.pow(self.ndim as u32)
    }

    pub fn push(&mut self, entry: RepositoryEntry) -> Result<()> {
        if self.dim == 0 || entry.descriptors.is_empty() || entry.descriptors.len() % self.dim != 0 {
            return Err(Error::DimensionMismatch(format!(
                "entry {} has {} descriptor values, not a multiple of {}",
                entry.id,
                entry.descriptors.len(),
                self.dim
            )));
        }
        if let Some(d) = &entry.density {
            if d.len() != entry.frames(self.dim) * self.block_len() {
                return Err(Error::DimensionMismatch(format!("entry {} density size {}", entry.id, d.len())));
            }
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        self.entries.iter().map(|e| e.frames(self.dim)).sum()
    }

    pub fn descriptor(&self, entry: usize, frame: usize) -> &[f32] {
        &self.entries[entry].descriptors[frame * self.dim..(frame + 1) * self.dim]
    }

    /// Normalized density block of one entry frame.
    pub fn density_block(&self, entry: usize, frame: usize) -> Result<&[f32]> {
        let e = &self.entries[entry];
        let d = e.density.as_ref().ok_or(Error::MissingDensity(e.id))?;
        let n = self.block_len();
        Ok(&d[frame * n..(frame + 1) * n])
    }

    pub fn index(&self) -> Result<DescriptorIndex> {
        DescriptorIndex::build(self)
    }
}
