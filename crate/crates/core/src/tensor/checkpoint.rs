//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes   "ICDCKPT1"
//! version      u32       1
//! variant      u32 length + UTF-8 bytes
//! config_hash  u64
//! seed         u64
//! count        u32       number of parameters
//! repeated `count` times:
//!   name       u32 length + UTF-8 bytes
//!   kind       u8        0 = weight, 1 = bias, 2 = embedding
//!   ndim       u32
//!   dims       u64 × ndim
//!   data       f64 × product(dims), IEEE-754 little-endian
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::params::{ParamKind, ParamSet};
use super::Tensor;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ICDCKPT1";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub variant: String,
    pub config_hash: u64,
    pub seed: u64,
}

pub fn save_checkpoint(path: &Path, header: &CheckpointHeader, params: &ParamSet) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_all(&mut w, header, params).map_err(|e| Error::io(path, e))
}

fn write_all(w: &mut impl Write, header: &CheckpointHeader, params: &ParamSet) -> std::io::Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    write_str(w, &header.variant)?;
    w.write_all(&header.config_hash.to_le_bytes())?;
    w.write_all(&header.seed.to_le_bytes())?;
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for (_, p) in params.iter() {
        write_str(w, &p.name)?;
        w.write_all(&[p.kind.tag()])?;
        w.write_all(&(p.value.shape().len() as u32).to_le_bytes())?;
        for &d in p.value.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for &x in p.value.data() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()
}

fn write_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<(CheckpointHeader, ParamSet)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    read_all(&mut r).map_err(|e| match e {
        ReadError::Io(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
            Error::Checkpoint(format!("{}: truncated file", path.display()))
        }
        ReadError::Io(e) => Error::io(path, e),
        ReadError::Format(msg) => Error::Checkpoint(format!("{}: {msg}", path.display())),
    })
}

enum ReadError {
    Io(std::io::Error),
    Format(String),
}

impl From<std::io::Error> for ReadError {
    fn from(e: std::io::Error) -> Self {
        ReadError::Io(e)
    }
}

fn read_all(r: &mut impl Read) -> std::result::Result<(CheckpointHeader, ParamSet), ReadError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(ReadError::Format("bad magic".into()));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(ReadError::Format(format!("unsupported version {version}")));
    }
    let variant = read_str(r)?;
    let config_hash = read_u64(r)?;
    let seed = read_u64(r)?;
    let count = read_u32(r)?;
    let mut params = ParamSet::new();
    for _ in 0..count {
        let name = read_str(r)?;
        let mut kind = [0u8; 1];
        r.read_exact(&mut kind)?;
        let kind = ParamKind::from_tag(kind[0])
            .ok_or_else(|| ReadError::Format(format!("unknown parameter kind {}", kind[0])))?;
        let ndim = read_u32(r)? as usize;
        let dims = (0..ndim)
            .map(|_| read_u64(r).map(|d| d as usize))
            .collect::<std::io::Result<Vec<_>>>()?;
        let n: usize = dims.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut buf = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        let value = Tensor::new(dims, data).map_err(|e| ReadError::Format(e.to_string()))?;
        params
            .add(name, kind, value)
            .map_err(|e| ReadError::Format(e.to_string()))?;
    }
    Ok((
        CheckpointHeader {
            variant,
            config_hash,
            seed,
        },
        params,
    ))
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_str(r: &mut impl Read) -> std::result::Result<String, ReadError> {
    let len = read_u32(r)? as usize;
    let mut b = vec![0u8; len];
    r.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|_| ReadError::Format("invalid UTF-8 string".into()))
}
