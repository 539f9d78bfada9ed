//! The MPDO1 operator file format.
//!
//! Layout: the magic bytes `MPDO1\0`, then little-endian `u32 d`, `u32 n`,
//! `f64 L`, `u32 flags` (bit 0: hermitized), then the `n^{2d}` entries as
//! interleaved little-endian `f64` real and imaginary parts in row-major
//! order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::quantize::OperatorMatrix;
use crate::CMatrix;

pub const MAGIC: &[u8; 6] = b"MPDO1\0";

/// Header length in bytes.
pub const HEADER_LEN: usize = 6 + 4 + 4 + 8 + 4;

/// Largest entry payload accepted by [`load_operator`].
pub const MEMORY_BUDGET_BYTES: u64 = 2 * 1024 * 1024 * 1024;

const FLAG_HERMITIZED: u32 = 1;

/// Serializes an operator to MPDO1 bytes.
pub fn encode_operator(h: &OperatorMatrix) -> Vec<u8> {
    let grid = h.grid();
    let m = h.entries();
    let n = m.nrows();
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * n * n);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(grid.points() as u32).to_le_bytes());
    out.extend_from_slice(&grid.half_length().to_le_bytes());
    let flags = if h.is_symmetrized() { FLAG_HERMITIZED } else { 0 };
    out.extend_from_slice(&flags.to_le_bytes());
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    out
}

/// Parsed MPDO1 header.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Header {
    pub dim: u32,
    pub points: u32,
    pub half_length: f64,
    pub flags: u32,
}

impl Header {
    /// Number of matrix entries `n^{2d}`, or `None` on overflow.
    pub fn entries(&self) -> Option<u64> {
        (self.points as u64).checked_pow(2 * self.dim)
    }
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes(b.try_into().expect("4-byte slice"))
}

fn le_f64(b: &[u8]) -> f64 {
    f64::from_le_bytes(b.try_into().expect("8-byte slice"))
}

/// Parses and validates a header, refusing payloads above the budget.
pub fn decode_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "truncated header: {} of {HEADER_LEN} bytes",
            bytes.len()
        )));
    }
    if &bytes[..6] != MAGIC {
        return Err(Error::Format("bad magic, not an MPDO1 file".into()));
    }
    let header = Header {
        dim: le_u32(&bytes[6..10]),
        points: le_u32(&bytes[10..14]),
        half_length: le_f64(&bytes[14..22]),
        flags: le_u32(&bytes[22..26]),
    };
    if !(1..=2).contains(&header.dim) {
        return Err(Error::Format(format!("dimension {} is not 1 or 2", header.dim)));
    }
    if header.points < 2 || header.points % 2 != 0 {
        return Err(Error::Format(format!("point count {} is not even", header.points)));
    }
    if !(header.half_length > 0.0 && header.half_length.is_finite()) {
        return Err(Error::Format(format!("bad half-length {}", header.half_length)));
    }
    let entries = header.entries();
    let bytes_needed = entries.and_then(|e| e.checked_mul(16));
    match (entries, bytes_needed) {
        (Some(_), Some(b)) if b <= MEMORY_BUDGET_BYTES => Ok(header),
        (e, b) => Err(Error::TooLarge {
            entries: e.unwrap_or(u64::MAX),
            bytes: b.unwrap_or(u64::MAX),
            limit: MEMORY_BUDGET_BYTES,
        }),
    }
}

/// Parses MPDO1 bytes. No matrix is produced unless the payload is complete.
pub fn decode_operator(bytes: &[u8]) -> Result<OperatorMatrix> {
    let header = decode_header(bytes)?;
    let entries = header.entries().expect("checked by decode_header") as usize;
    let expected = HEADER_LEN + 16 * entries;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "payload length mismatch: expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let grid = Grid::new(header.dim as usize, header.half_length, header.points as usize)?;
    let n = grid.size();
    let payload = &bytes[HEADER_LEN..];
    let m = CMatrix::from_fn(n, n, |i, j| {
        let o = 16 * (i * n + j);
        Complex64::new(le_f64(&payload[o..o + 8]), le_f64(&payload[o + 8..o + 16]))
    });
    OperatorMatrix::from_parts(grid, "loaded", m, header.flags & FLAG_HERMITIZED != 0)
}

/// Hex SHA-256 of a byte string.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and an atomic rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Saves an operator atomically and returns the file's content hash.
pub fn save_operator(h: &OperatorMatrix, path: impl AsRef<Path>) -> Result<String> {
    let bytes = encode_operator(h);
    write_atomic(path.as_ref(), &bytes)?;
    Ok(content_hash(&bytes))
}

/// Loads an operator, checking the header before reading the payload.
pub fn load_operator(path: impl AsRef<Path>) -> Result<OperatorMatrix> {
    let path = path.as_ref();
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut head = [0u8; HEADER_LEN];
    let mut got = 0;
    while got < HEADER_LEN {
        let k = file.read(&mut head[got..]).map_err(|e| Error::io(path, e))?;
        if k == 0 {
            break;
        }
        got += k;
    }
    decode_header(&head[..got])?;
    let mut bytes = head[..got].to_vec();
    file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    decode_operator(&bytes)
}
