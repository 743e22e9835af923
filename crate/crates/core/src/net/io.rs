//! `SPNET` weight files.
//!
//! Little endian: magic `b"SPNET"`, version `u32`, layer count `u32`,
//! ndim `u32`, input shape `4 x u32`; then per layer a tag `u32`, a shape
//! int count `u32` with that many `u32` values, a weight count `u32` and
//! `f32` weights.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::layers::LayerSpec;
use super::network::{Network, NetworkSpec};
use crate::error::{Error, Result};

pub const NET_MAGIC: &[u8; 5] = b"SPNET";
pub const NET_VERSION: u32 = 1;

fn tag_and_ints(l: &LayerSpec) -> (u32, Vec<u32>) {
    match *l {
        LayerSpec::Conv { in_ch, out_ch, kernel } => (1, vec![in_ch as u32, out_ch as u32, kernel as u32]),
        LayerSpec::MaxPool { window } => (2, vec![window as u32]),
        LayerSpec::Tanh => (3, vec![]),
        LayerSpec::Dense { inputs, outputs } => (4, vec![inputs as u32, outputs as u32]),
        LayerSpec::Normalize => (5, vec![]),
    }
}

fn layer_from(tag: u32, ints: &[u32]) -> Option<LayerSpec> {
    let u = |i: usize| ints[i] as usize;
    match (tag, ints.len()) {
        (1, 3) => Some(LayerSpec::Conv { in_ch: u(0), out_ch: u(1), kernel: u(2) }),
        (2, 1) => Some(LayerSpec::MaxPool { window: u(0) }),
        (3, 0) => Some(LayerSpec::Tanh),
        (4, 2) => Some(LayerSpec::Dense { inputs: u(0), outputs: u(1) }),
        (5, 0) => Some(LayerSpec::Normalize),
        _ => None,
    }
}

pub fn write_network<W: Write>(w: &mut W, net: &Network) -> Result<()> {
    let spec = net.spec();
    w.write_all(NET_MAGIC)?;
    w.write_u32::<LittleEndian>(NET_VERSION)?;
    w.write_u32::<LittleEndian>(spec.layers.len() as u32)?;
    w.write_u32::<LittleEndian>(spec.ndim as u32)?;
    for d in spec.input {
        w.write_u32::<LittleEndian>(d as u32)?;
    }
    let mut off = 0;
    for l in &spec.layers {
        let (tag, ints) = tag_and_ints(l);
        w.write_u32::<LittleEndian>(tag)?;
        w.write_u32::<LittleEndian>(ints.len() as u32)?;
        for v in ints {
            w.write_u32::<LittleEndian>(v)?;
        }
        let n = l.param_count(spec.ndim);
        w.write_u32::<LittleEndian>(n as u32)?;
        for &p in &net.params[off..off + n] {
            w.write_f32::<LittleEndian>(p as f32)?;
        }
        off += n;
    }
    Ok(())
}

pub fn read_network<R: Read>(r: &mut R, path: &Path) -> Result<Network> {
    let bad = |m: String| Error::format(path, m);
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != NET_MAGIC {
        return Err(bad("bad SPNET magic".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != NET_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let count = r.read_u32::<LittleEndian>()? as usize;
    if count > 1024 {
        return Err(bad(format!("implausible layer count {count}")));
    }
    let ndim = r.read_u32::<LittleEndian>()? as usize;
    let mut input = [0usize; 4];
    for d in &mut input {
        *d = r.read_u32::<LittleEndian>()? as usize;
    }
    let mut layers = Vec::with_capacity(count);
    let mut params = Vec::new();
    for i in 0..count {
        let tag = r.read_u32::<LittleEndian>()?;
        let nints = r.read_u32::<LittleEndian>()? as usize;
        if nints > 8 {
            return Err(bad(format!("layer {i}: {nints} shape ints")));
        }
        let mut ints = vec![0u32; nints];
        r.read_u32_into::<LittleEndian>(&mut ints)?;
        let layer = layer_from(tag, &ints).ok_or_else(|| bad(format!("layer {i}: unknown tag {tag}")))?;
        let n = r.read_u32::<LittleEndian>()? as usize;
        if n != layer.param_count(ndim) {
            return Err(bad(format!("layer {i}: {n} weights, expected {}", layer.param_count(ndim))));
        }
        let mut raw = vec![0f32; n];
        r.read_f32_into::<LittleEndian>(&mut raw)?;
        params.extend(raw.into_iter().map(f64::from));
        layers.push(layer);
    }
    let spec = NetworkSpec::new(ndim, input, layers).map_err(|e| bad(e.to_string()))?;
    Network::from_params(spec, params).map_err(|e| bad(e.to_string()))
}

pub fn save_network(path: &Path, net: &Network) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_network(&mut w, net)?;
    w.flush()?;
    Ok(())
}

pub fn load_network(path: &Path) -> Result<Network> {
    if !path.exists() {
        return Err(Error::NotFound(path.to_path_buf()));
    }
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    read_network(&mut r, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_load_save_is_byte_identical() {
        let net = Network::init(NetworkSpec::descriptor(2, 1), 4);
        let mut a = Vec::new();
        write_network(&mut a, &net).unwrap();
        assert_eq!(&a[..5], b"SPNET");
        assert_eq!(u32::from_le_bytes(a[9..13].try_into().unwrap()), 11);
        let back = read_network(&mut a.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back.spec(), net.spec());
        let mut b = Vec::new();
        write_network(&mut b, &back).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn truncated_file_is_an_error() {
        let net = Network::init(NetworkSpec::decision_head(4, 3), 4);
        let mut a = Vec::new();
        write_network(&mut a, &net).unwrap();
        a.truncate(a.len() - 3);
        assert!(read_network(&mut a.as_slice(), Path::new("mem")).is_err());
    }
}
