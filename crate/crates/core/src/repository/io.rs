//! `SPREP` repository files.
//!
//! Little endian. Header: magic `b"SPREP"`, version `u32`, descriptor dim
//! `u32`, ndim `u32`, block edge `u32`, motion weight `f32`, entry count
//! `u32`. Entry table, one row per entry: id `u32`, frame count `u32`,
//! descriptor offset `u64`, density offset `u64`, min `f32`, max `f32`.
//! Then the descriptor segment (all entries) and the density segment, both
//! `f32`. Offsets are absolute byte positions.

use std::io::{Read, Seek, SeekFrom, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{Repository, RepositoryEntry};
use crate::error::{Error, Result};

pub const REPO_MAGIC: &[u8; 5] = b"SPREP";
pub const REPO_VERSION: u32 = 1;
const HEADER_LEN: u64 = 5 + 4 * 6;
const ROW_LEN: u64 = 4 + 4 + 8 + 8 + 4 + 4;

pub fn write_repository<W: Write>(w: &mut W, repo: &Repository) -> Result<()> {
    let block = repo.block_len() as u64;
    w.write_all(REPO_MAGIC)?;
    w.write_u32::<LittleEndian>(REPO_VERSION)?;
    w.write_u32::<LittleEndian>(repo.dim as u32)?;
    w.write_u32::<LittleEndian>(repo.ndim as u32)?;
    w.write_u32::<LittleEndian>(repo.block_res as u32)?;
    w.write_f32::<LittleEndian>(repo.motion_weight)?;
    w.write_u32::<LittleEndian>(repo.entries.len() as u32)?;
    let mut desc_at = HEADER_LEN + ROW_LEN * repo.entries.len() as u64;
    let mut dens_at = desc_at + 4 * repo.entries.iter().map(|e| e.descriptors.len() as u64).sum::<u64>();
    for e in &repo.entries {
        if e.density.is_none() {
            return Err(Error::MissingDensity(e.id));
        }
        let frames = e.frames(repo.dim) as u64;
        w.write_u32::<LittleEndian>(e.id)?;
        w.write_u32::<LittleEndian>(frames as u32)?;
        w.write_u64::<LittleEndian>(desc_at)?;
        w.write_u64::<LittleEndian>(dens_at)?;
        w.write_f32::<LittleEndian>(e.min)?;
        w.write_f32::<LittleEndian>(e.max)?;
        desc_at += 4 * e.descriptors.len() as u64;
        dens_at += 4 * frames * block;
    }
    for e in &repo.entries {
        for &v in &e.descriptors {
            w.write_f32::<LittleEndian>(v)?;
        }
    }
    for e in &repo.entries {
        for &v in e.density.as_deref().unwrap_or_default() {
            w.write_f32::<LittleEndian>(v)?;
        }
    }
    Ok(())
}

struct Row {
    id: u32,
    frames: usize,
    desc_at: u64,
    dens_at: u64,
    min: f32,
    max: f32,
}

fn read_header<R: Read>(r: &mut R, path: &Path) -> Result<(Repository, Vec<Row>)> {
    let bad = |m: String| Error::format(path, m);
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic).map_err(|_| bad("file too short for a header".into()))?;
    if &magic != REPO_MAGIC {
        return Err(bad("bad SPREP magic".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != REPO_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let dim = r.read_u32::<LittleEndian>()? as usize;
    let ndim = r.read_u32::<LittleEndian>()? as usize;
    let block_res = r.read_u32::<LittleEndian>()? as usize;
    let motion_weight = r.read_f32::<LittleEndian>()?;
    let count = r.read_u32::<LittleEndian>()? as usize;
    if dim == 0 || !(2..=3).contains(&ndim) {
        return Err(bad(format!("invalid dim {dim} or ndim {ndim}")));
    }
    let mut rows = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        rows.push(Row {
            id: r.read_u32::<LittleEndian>()?,
            frames: r.read_u32::<LittleEndian>()? as usize,
            desc_at: r.read_u64::<LittleEndian>()?,
            dens_at: r.read_u64::<LittleEndian>()?,
            min: r.read_f32::<LittleEndian>()?,
            max: r.read_f32::<LittleEndian>()?,
        });
    }
    Ok((Repository::new(ndim, dim, block_res, motion_weight), rows))
}

fn read_f32s<R: Read + Seek>(r: &mut R, at: u64, n: usize) -> Result<Vec<f32>> {
    r.seek(SeekFrom::Start(at))?;
    let mut v = vec![0f32; n];
    r.read_f32_into::<LittleEndian>(&mut v)?;
    Ok(v)
}

fn read_with<R: Read + Seek>(r: &mut R, path: &Path, densities: bool) -> Result<Repository> {
    let (mut repo, rows) = read_header(r, path)?;
    let block = repo.block_len();
    for row in rows {
        let descriptors = read_f32s(r, row.desc_at, row.frames * repo.dim)
            .map_err(|e| Error::format(path, format!("entry {}: {e}", row.id)))?;
        let density = if densities {
            Some(
                read_f32s(r, row.dens_at, row.frames * block)
                    .map_err(|e| Error::format(path, format!("entry {} density: {e}", row.id)))?,
            )
        } else {
            None
        };
        repo.push(RepositoryEntry { id: row.id, descriptors, density, min: row.min, max: row.max })
            .map_err(|e| Error::format(path, e.to_string()))?;
    }
    Ok(repo)
}

pub fn read_repository<R: Read + Seek>(r: &mut R, path: &Path) -> Result<Repository> {
    read_with(r, path, true)
}

pub fn save_repository(path: &Path, repo: &Repository) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_repository(&mut w, repo)?;
    w.flush()?;
    Ok(())
}

fn open(path: &Path) -> Result<std::io::BufReader<std::fs::File>> {
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    Ok(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn load_repository(path: &Path) -> Result<Repository> {
    read_with(&mut open(path)?, path, true)
}

/// Loads descriptors and metadata only; density bytes are never read.
pub fn load_descriptors(path: &Path) -> Result<Repository> {
    read_with(&mut open(path)?, path, false)
}
