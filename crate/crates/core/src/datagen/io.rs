//! `SPDAT` dataset files.
//!
//! Little endian: magic `b"SPDAT"`, version `u32`, ndim `u32`, sync
//! interval `u32`, block shape `4 x u32`, record count `u32`; then per
//! record patch id `u32`, frame `u32`, label `i8`, coarse block `f32`s and
//! fine block `f32`s.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::record::{Dataset, RecordedPair};
use crate::error::{Error, Result};
use crate::net::Tensor;

pub const DATA_MAGIC: &[u8; 5] = b"SPDAT";
pub const DATA_VERSION: u32 = 1;

pub fn write_dataset<W: Write>(w: &mut W, data: &Dataset) -> Result<()> {
    let shape: Vec<usize> = data.block_shape().map(|s| s.to_vec()).unwrap_or_else(|| vec![0; 4]);
    if shape.len() != 4 {
        return Err(Error::DimensionMismatch(format!("blocks must be 4D, got {shape:?}")));
    }
    w.write_all(DATA_MAGIC)?;
    w.write_u32::<LittleEndian>(DATA_VERSION)?;
    w.write_u32::<LittleEndian>(data.ndim as u32)?;
    w.write_u32::<LittleEndian>(data.sync_interval)?;
    for &d in &shape {
        w.write_u32::<LittleEndian>(d as u32)?;
    }
    w.write_u32::<LittleEndian>(data.pairs.len() as u32)?;
    for p in &data.pairs {
        if p.coarse.shape() != shape.as_slice() || p.fine.shape() != shape.as_slice() {
            return Err(Error::DimensionMismatch("dataset blocks differ in shape".into()));
        }
        w.write_u32::<LittleEndian>(p.patch)?;
        w.write_u32::<LittleEndian>(p.frame)?;
        w.write_i8(p.label)?;
        for &v in p.coarse.data().iter().chain(p.fine.data()) {
            w.write_f32::<LittleEndian>(v as f32)?;
        }
    }
    Ok(())
}

pub fn read_dataset<R: Read>(r: &mut R, path: &Path) -> Result<Dataset> {
    let bad = |m: String| Error::format(path, m);
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != DATA_MAGIC {
        return Err(bad("bad SPDAT magic".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != DATA_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let ndim = r.read_u32::<LittleEndian>()? as usize;
    let sync_interval = r.read_u32::<LittleEndian>()?;
    let mut shape = vec![0usize; 4];
    for d in &mut shape {
        *d = r.read_u32::<LittleEndian>()? as usize;
    }
    let count = r.read_u32::<LittleEndian>()? as usize;
    let n: usize = shape.iter().product();
    let mut pairs = Vec::with_capacity(count.min(1 << 20));
    let mut raw = vec![0f32; 2 * n];
    for _ in 0..count {
        let patch = r.read_u32::<LittleEndian>()?;
        let frame = r.read_u32::<LittleEndian>()?;
        let label = r.read_i8()?;
        if label != 1 && label != -1 {
            return Err(bad(format!("invalid label {label}")));
        }
        r.read_f32_into::<LittleEndian>(&mut raw)?;
        let vals: Vec<f64> = raw.iter().map(|v| f64::from(*v)).collect();
        let coarse = Tensor::new(shape.clone(), vals[..n].to_vec()).map_err(|e| bad(e.to_string()))?;
        let fine = Tensor::new(shape.clone(), vals[n..].to_vec()).map_err(|e| bad(e.to_string()))?;
        pairs.push(RecordedPair { patch, frame, label, coarse, fine });
    }
    Ok(Dataset { ndim, sync_interval, pairs })
}

pub fn save_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_dataset(&mut w, data)?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    read_dataset(&mut r, path)
}
