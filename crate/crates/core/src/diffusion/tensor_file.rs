//! Minimal binary tensor file: magic, dims header, row-major f64 payload.
//!
//! Layout (little-endian): `b"TNS1"`, `u32` rank, `u64` per dimension,
//! then the values as `f64` in row-major order.

use crate::real::{real, Real};
use std::io::{self, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"TNS1";

/// Writes a tensor; `data` must be row-major and match the shape product.
pub fn save_tensor(path: &Path, shape: &[usize], data: &[f64]) -> io::Result<()> {
    let expected: usize = shape.iter().product();
    if expected != data.len() {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            format!("shape {:?} wants {expected} values, got {}", shape, data.len()),
        ));
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(MAGIC)?;
    f.write_all(&(shape.len() as u32).to_le_bytes())?;
    for &d in shape {
        f.write_all(&(d as u64).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(data.len() * 8);
    for &v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    f.write_all(&buf)
}

/// Reads a tensor, returning its shape and row-major values.
pub fn load_tensor<S: Real>(path: &Path) -> io::Result<(Vec<usize>, Vec<S>)> {
    let mut f = std::fs::File::open(path)?;
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            "not a tensor file (bad magic)",
        ));
    }
    let mut rank_bytes = [0u8; 4];
    f.read_exact(&mut rank_bytes)?;
    let rank = u32::from_le_bytes(rank_bytes) as usize;
    if rank > 8 {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("implausible tensor rank {rank}"),
        ));
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        let mut dim_bytes = [0u8; 8];
        f.read_exact(&mut dim_bytes)?;
        shape.push(u64::from_le_bytes(dim_bytes) as usize);
    }
    let count: usize = shape.iter().product();
    let mut payload = vec![0u8; count * 8];
    f.read_exact(&mut payload)?;
    let mut data = Vec::with_capacity(count);
    for chunk in payload.chunks_exact(8) {
        let v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        data.push(real::<S>(v));
    }
    Ok((shape, data))
}
