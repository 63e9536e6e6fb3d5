//! T3B tensor files: the magic `T3B1`, three little-endian `u64` dims
//! `(n1, n2, n3)`, then `n1 n2 n3` little-endian `f64` values in slice-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Result, TlrrError};
use crate::tensor::Tensor3;

pub const MAGIC: &[u8; 4] = b"T3B1";

pub fn write_t3b<W: Write>(t: &Tensor3, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    let (n1, n2, n3) = t.dims();
    for d in [n1, n2, n3] {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in t.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads until end of input; values beyond the declared size are ignored.
pub fn read_t3b<R: Read>(mut r: R) -> Result<Tensor3> {
    let mut magic = [0u8; 4];
    if r.read_exact(&mut magic).is_err() || &magic != MAGIC {
        return Err(TlrrError::BadMagic);
    }
    let mut dims = [0u64; 3];
    for d in dims.iter_mut() {
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf).map_err(|_| TlrrError::Truncated {
            expected: 3,
            found: 0,
        })?;
        *d = u64::from_le_bytes(buf);
    }
    let overflow = || TlrrError::DimensionOverflow((dims[0], dims[1], dims[2]));
    let count = dims
        .iter()
        .try_fold(1u64, |acc, &d| acc.checked_mul(d))
        .and_then(|c| c.checked_mul(8).map(|_| c))
        .and_then(|c| usize::try_from(c).ok())
        .ok_or_else(overflow)?;
    let n1 = usize::try_from(dims[0]).map_err(|_| overflow())?;
    let n2 = usize::try_from(dims[1]).map_err(|_| overflow())?;
    let n3 = usize::try_from(dims[2]).map_err(|_| overflow())?;

    let mut bytes = Vec::new();
    r.take(count as u64 * 8).read_to_end(&mut bytes)?;
    if bytes.len() < count * 8 {
        return Err(TlrrError::Truncated {
            expected: count,
            found: bytes.len() / 8,
        });
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Tensor3::from_vec((n1, n2, n3), data)
}

pub fn write_tensor(t: &Tensor3, path: impl AsRef<Path>) -> Result<()> {
    write_t3b(t, BufWriter::new(File::create(path)?))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor3> {
    read_t3b(BufReader::new(File::open(path)?))
}
