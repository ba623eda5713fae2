//! Binary container of named tensors.
//!
//! Layout (little endian): magic `KBPTPARM`, format version byte, tensor
//! count `u32`, then per tensor: name length `u32` + UTF-8 name, group name
//! length `u32` + UTF-8 group, rank `u8`, each dimension as `u64`, and the
//! raw `f64` values.

use std::io::{Read, Write};
use std::path::Path;

use super::{NnError, ParameterStore, Tensor};

pub const MAGIC: &[u8; 8] = b"KBPTPARM";
pub const VERSION: u8 = 1;

pub fn write(store: &ParameterStore, out: &mut impl Write) -> Result<(), NnError> {
    out.write_all(MAGIC)?;
    out.write_all(&[VERSION])?;
    let p = &store.params;
    out.write_all(&(p.len() as u32).to_le_bytes())?;
    for id in p.ids() {
        let t = p.get(id);
        write_str(out, p.name(id))?;
        write_str(out, &store.groups()[p.group_of(id)].name)?;
        out.write_all(&[t.shape().len() as u8])?;
        for &d in t.shape() {
            out.write_all(&(d as u64).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(t.len() * 8);
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

fn write_str(out: &mut impl Write, s: &str) -> Result<(), NnError> {
    out.write_all(&(s.len() as u32).to_le_bytes())?;
    out.write_all(s.as_bytes())?;
    Ok(())
}

/// Reads a container into a fresh store. Groups are created with the
/// learning rate given by `lr_of(group name)`.
pub fn read(input: &mut impl Read, lr_of: impl Fn(&str) -> f64) -> Result<ParameterStore, NnError> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NnError::Checkpoint("bad magic; not a parameter file".into()));
    }
    let version = read_u8(input)?;
    if version != VERSION {
        return Err(NnError::Checkpoint(format!("unsupported format version {version}")));
    }
    let count = read_u32(input)?;
    let mut store = ParameterStore::new();
    for _ in 0..count {
        let name = read_str(input)?;
        let group = read_str(input)?;
        let rank = read_u8(input)? as usize;
        if rank == 0 || rank > 2 {
            return Err(NnError::Checkpoint(format!("{name}: rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let mut b = [0u8; 8];
            input.read_exact(&mut b)?;
            shape.push(u64::from_le_bytes(b) as usize);
        }
        let n: usize = shape.iter().product();
        let mut raw = vec![0u8; n * 8];
        input.read_exact(&mut raw)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        let g = store.group(&group, lr_of(&group));
        store.add(&name, g, Tensor::from_vec(&shape, data)?)?;
    }
    Ok(store)
}

fn read_u8(input: &mut impl Read) -> Result<u8, NnError> {
    let mut b = [0u8; 1];
    input.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u32(input: &mut impl Read) -> Result<u32, NnError> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_str(input: &mut impl Read) -> Result<String, NnError> {
    let len = read_u32(input)? as usize;
    if len > 1 << 20 {
        return Err(NnError::Checkpoint(format!("name length {len} is implausible")));
    }
    let mut b = vec![0u8; len];
    input.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|e| NnError::Checkpoint(e.to_string()))
}

pub fn save(store: &ParameterStore, path: &Path) -> Result<(), NnError> {
    let mut buf = Vec::new();
    write(store, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load(path: &Path, lr_of: impl Fn(&str) -> f64) -> Result<ParameterStore, NnError> {
    let bytes = std::fs::read(path)?;
    read(&mut bytes.as_slice(), lr_of)
}
