//! Versioned binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "GTSCKPT\0"
//! version  u32
//! seed     u64
//! meta     u32 length + UTF-8 bytes (free-form, typically JSON)
//! arrays   u32 count, then per array:
//!            name  u32 length + UTF-8 bytes
//!            dims  u32 count + u64 per dim
//!            data  f64 little-endian, prod(dims) values, row-major
//! ```
//!
//! Round-trips are bit-exact: floats are written as raw IEEE-754 bits.

use crate::{Error, Result};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"GTSCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

/// One named array in the container.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayEntry {
    pub name: String,
    pub dims: Vec<u64>,
    pub data: Vec<f64>,
}

/// A parsed checkpoint container.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub version: u32,
    pub seed: u64,
    pub meta: String,
    pub arrays: Vec<ArrayEntry>,
}

pub fn write_container(path: &Path, container: &Container) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&container.version.to_le_bytes())?;
    w.write_all(&container.seed.to_le_bytes())?;
    write_str(&mut w, &container.meta)?;
    w.write_all(&(container.arrays.len() as u32).to_le_bytes())?;
    for array in &container.arrays {
        let expected: u64 = array.dims.iter().product();
        if expected != array.data.len() as u64 {
            return Err(Error::Checkpoint(format!(
                "array {:?}: dims {:?} do not match {} values",
                array.name,
                array.dims,
                array.data.len()
            )));
        }
        write_str(&mut w, &array.name)?;
        w.write_all(&(array.dims.len() as u32).to_le_bytes())?;
        for &d in &array.dims {
            w.write_all(&d.to_le_bytes())?;
        }
        for &v in &array.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_container(path: &Path) -> Result<Container> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported container version {version} (supported: {FORMAT_VERSION})"
        )));
    }
    let seed = read_u64(&mut r)?;
    let meta = read_str(&mut r)?;
    let n_arrays = read_u32(&mut r)? as usize;
    let mut arrays = Vec::with_capacity(n_arrays);
    for _ in 0..n_arrays {
        let name = read_str(&mut r)?;
        let ndims = read_u32(&mut r)? as usize;
        let mut dims = Vec::with_capacity(ndims);
        for _ in 0..ndims {
            dims.push(read_u64(&mut r)?);
        }
        let len: u64 = dims.iter().product();
        let mut data = Vec::with_capacity(len as usize);
        let mut buf = [0u8; 8];
        for _ in 0..len {
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        arrays.push(ArrayEntry { name, dims, data });
    }
    Ok(Container { version, seed, meta, arrays })
}

fn write_str(w: &mut impl Write, s: &str) -> Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_str(r: &mut impl Read) -> Result<String> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Checkpoint(format!("bad UTF-8: {e}")))
}
