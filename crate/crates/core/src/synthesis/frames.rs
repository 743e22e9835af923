//! `SPFRM` frame store files, one per frame.
//!
//! Little endian: magic `b"SPFRM"`, version `u32`, frame `u32`, ndim `u32`,
//! dims `3 x u32`, cell size `f32`, patch size `f32`, cage cells `u32`;
//! coarse density `f32`s; velocity components (x, y, then z in 3D) as face
//! arrays of `f32`; patch count `u32`; per patch id `u64`, entry `u32`,
//! cursor `u32`, weight `f32`, vertex count `u32`, vertices `3 x f32`.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::runtime::{FrameData, PatchSnapshot, Synthesis, SynthesisStats};
use crate::error::{Error, Result};
use crate::fluid::{ScalarGrid, Vec3, VectorGrid};

pub const FRAME_MAGIC: &[u8; 5] = b"SPFRM";
pub const FRAME_VERSION: u32 = 1;

fn write_f32s<W: Write>(w: &mut W, v: &[f64]) -> Result<()> {
    for &x in v {
        w.write_f32::<LittleEndian>(x as f32)?;
    }
    Ok(())
}

fn read_f32s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut v = vec![0f32; n];
    r.read_f32_into::<LittleEndian>(&mut v)?;
    Ok(v.into_iter().map(f64::from).collect())
}

pub fn write_frame<W: Write>(w: &mut W, synth: &Synthesis, f: &FrameData) -> Result<()> {
    let dims = f.density.dims();
    w.write_all(FRAME_MAGIC)?;
    w.write_u32::<LittleEndian>(FRAME_VERSION)?;
    w.write_u32::<LittleEndian>(f.frame)?;
    w.write_u32::<LittleEndian>(synth.ndim as u32)?;
    for d in dims {
        w.write_u32::<LittleEndian>(d as u32)?;
    }
    w.write_f32::<LittleEndian>(f.density.dx() as f32)?;
    w.write_f32::<LittleEndian>(synth.patch_size as f32)?;
    w.write_u32::<LittleEndian>(synth.cage_cells as u32)?;
    write_f32s(w, f.density.data())?;
    for a in 0..f.velocity.ndim() {
        write_f32s(w, f.velocity.comp(a))?;
    }
    w.write_u32::<LittleEndian>(f.patches.len() as u32)?;
    for p in &f.patches {
        w.write_u64::<LittleEndian>(p.id)?;
        w.write_u32::<LittleEndian>(p.entry)?;
        w.write_u32::<LittleEndian>(p.cursor)?;
        w.write_f32::<LittleEndian>(p.weight as f32)?;
        w.write_u32::<LittleEndian>(p.positions.len() as u32)?;
        for v in &p.positions {
            write_f32s(w, v.as_slice())?;
        }
    }
    Ok(())
}

/// Frame plus the synthesis settings needed to interpret it.
pub fn read_frame<R: Read>(r: &mut R, path: &Path) -> Result<Synthesis> {
    let bad = |m: String| Error::format(path, m);
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic).map_err(|_| bad("file too short".into()))?;
    if &magic != FRAME_MAGIC {
        return Err(bad("bad SPFRM magic".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != FRAME_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let frame = r.read_u32::<LittleEndian>()?;
    let ndim = r.read_u32::<LittleEndian>()? as usize;
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = r.read_u32::<LittleEndian>()? as usize;
    }
    let dx = f64::from(r.read_f32::<LittleEndian>()?);
    let patch_size = f64::from(r.read_f32::<LittleEndian>()?);
    let cage_cells = r.read_u32::<LittleEndian>()? as usize;
    if !(2..=3).contains(&ndim) || dims.contains(&0) || (dims[2] == 1) != (ndim == 2) || !(dx > 0.0) {
        return Err(bad(format!("invalid grid header {dims:?} ndim {ndim}")));
    }
    let density = ScalarGrid::from_vec(dims, dx, read_f32s(r, dims.iter().product())?)?;
    let mut velocity = VectorGrid::new(dims, dx);
    for a in 0..ndim {
        let n: usize = velocity.comp_dims(a).iter().product();
        *velocity.comp_mut(a) = read_f32s(r, n)?;
    }
    let count = r.read_u32::<LittleEndian>()? as usize;
    let mut patches = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let id = r.read_u64::<LittleEndian>()?;
        let entry = r.read_u32::<LittleEndian>()?;
        let cursor = r.read_u32::<LittleEndian>()?;
        let weight = f64::from(r.read_f32::<LittleEndian>()?);
        let nv = r.read_u32::<LittleEndian>()? as usize;
        let flat = read_f32s(r, 3 * nv)?;
        let positions = flat.chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
        patches.push(PatchSnapshot { id, entry, cursor, weight, positions });
    }
    Ok(Synthesis {
        ndim,
        patch_size,
        cage_cells,
        frames: vec![FrameData { frame, density, velocity, patches }],
        stats: SynthesisStats::default(),
    })
}

pub fn frame_path(dir: &Path, frame: u32) -> PathBuf {
    dir.join(format!("frame_{frame:05}.spfrm"))
}

/// Writes every frame into `dir`.
pub fn save_frames(dir: &Path, synth: &Synthesis) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    synth
        .frames
        .iter()
        .map(|f| {
            let p = frame_path(dir, f.frame);
            let mut w = std::io::BufWriter::new(std::fs::File::create(&p)?);
            write_frame(&mut w, synth, f)?;
            w.flush()?;
            Ok(p)
        })
        .collect()
}

pub fn load_frame(path: &Path) -> Result<Synthesis> {
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    read_frame(&mut std::io::BufReader::new(std::fs::File::open(path)?), path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Synthesis {
        let dims = [6, 5, 1];
        let density = ScalarGrid::from_fn(dims, 1.0, |p| p.x * 0.25 + p.y);
        let velocity = VectorGrid::from_fn(dims, 1.0, |p| Vec3::new(p.y * 0.5, -p.x * 0.25, 0.0));
        let patches = vec![PatchSnapshot {
            id: 1 << 33,
            entry: 4,
            cursor: 17,
            weight: 0.75,
            positions: vec![Vec3::new(1.5, 2.25, 0.5), Vec3::new(3.0, 2.0, 0.5)],
        }];
        Synthesis {
            ndim: 2,
            patch_size: 8.0,
            cage_cells: 4,
            frames: vec![FrameData { frame: 12, density, velocity, patches }],
            stats: SynthesisStats::default(),
        }
    }

    #[test]
    fn frame_round_trip() {
        let s = sample();
        let mut buf = Vec::new();
        write_frame(&mut buf, &s, &s.frames[0]).unwrap();
        let back = read_frame(&mut buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back.frames, s.frames);
        assert_eq!((back.ndim, back.patch_size, back.cage_cells), (2, 8.0, 4));
        let mut again = Vec::new();
        write_frame(&mut again, &back, &back.frames[0]).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn truncated_frame_is_an_error() {
        let s = sample();
        let mut buf = Vec::new();
        write_frame(&mut buf, &s, &s.frames[0]).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_frame(&mut buf.as_slice(), Path::new("mem")).is_err());
        buf[1] = b'X';
        assert!(matches!(read_frame(&mut buf.as_slice(), Path::new("mem")), Err(Error::Format { .. })));
    }

    #[test]
    fn frames_are_written_per_index() {
        let dir = tempfile::tempdir().unwrap();
        let paths = save_frames(dir.path(), &sample()).unwrap();
        assert_eq!(paths, vec![dir.path().join("frame_00012.spfrm")]);
        assert_eq!(load_frame(&paths[0]).unwrap().frames[0].frame, 12);
    }
}
