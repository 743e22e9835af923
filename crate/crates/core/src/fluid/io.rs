//! Flat binary volume export (`SPVOL`) and 8-bit PGM slices.
//!
//! `SPVOL` layout, little endian:
//! magic `b"SPVOL"`, version `u32`, dims `3 x u32`, dx `f32`, then
//! `f32` values in x-fastest order.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::grid::ScalarGrid;
use crate::error::{Error, Result};

pub const VOLUME_MAGIC: &[u8; 5] = b"SPVOL";
pub const VOLUME_VERSION: u32 = 1;

pub fn write_volume<W: Write>(w: &mut W, grid: &ScalarGrid) -> Result<()> {
    w.write_all(VOLUME_MAGIC)?;
    w.write_u32::<LittleEndian>(VOLUME_VERSION)?;
    for d in grid.dims() {
        w.write_u32::<LittleEndian>(d as u32)?;
    }
    w.write_f32::<LittleEndian>(grid.dx() as f32)?;
    for &v in grid.data() {
        w.write_f32::<LittleEndian>(v as f32)?;
    }
    Ok(())
}

pub fn read_volume<R: Read>(r: &mut R, path: &Path) -> Result<ScalarGrid> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != VOLUME_MAGIC {
        return Err(Error::format(path, "bad SPVOL magic"));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VOLUME_VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = r.read_u32::<LittleEndian>()? as usize;
    }
    let dx = r.read_f32::<LittleEndian>()? as f64;
    let n = dims.iter().product::<usize>();
    let mut raw = vec![0f32; n];
    r.read_f32_into::<LittleEndian>(&mut raw)?;
    ScalarGrid::from_vec(dims, dx, raw.into_iter().map(f64::from).collect())
        .map_err(|e| Error::format(path, e.to_string()))
}

pub fn save_volume(path: &Path, grid: &ScalarGrid) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_volume(&mut w, grid)?;
    w.flush()?;
    Ok(())
}

pub fn load_volume(path: &Path) -> Result<ScalarGrid> {
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    read_volume(&mut r, path)
}

/// Middle z-slice as a binary PGM, values clamped to `[0, 1]`.
pub fn write_pgm_mid_slice<W: Write>(w: &mut W, grid: &ScalarGrid) -> Result<()> {
    let [nx, ny, nz] = grid.dims();
    let k = nz / 2;
    write!(w, "P5\n{nx} {ny}\n255\n")?;
    // Image rows run top to bottom, so flip y.
    for j in (0..ny).rev() {
        let row: Vec<u8> = (0..nx)
            .map(|i| (grid.get(i, j, k).clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        w.write_all(&row)?;
    }
    Ok(())
}

pub fn save_pgm_mid_slice(path: &Path, grid: &ScalarGrid) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_pgm_mid_slice(&mut w, grid)?;
    w.flush()?;
    Ok(())
}
