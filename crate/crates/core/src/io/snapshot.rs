//! Raw field files: `"KSPM"`, version, `nx`, `ny` as little-endian `u32`,
//! then `nx·ny` little-endian `f64` in row-major order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

const MAGIC: &[u8; 4] = b"KSPM";
pub const SNAPSHOT_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

/// Size in bytes of a snapshot for `grid`.
pub fn snapshot_byte_len(grid: Grid) -> u64 {
    (HEADER_LEN + 8 * grid.len()) as u64
}

pub fn encode_snapshot(f: &Field) -> Vec<u8> {
    let g = f.grid();
    let mut buf = Vec::with_capacity(snapshot_byte_len(g) as usize);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(g.nx() as u32).to_le_bytes());
    buf.extend_from_slice(&(g.ny() as u32).to_le_bytes());
    for v in f.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<Field, String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!("file has {} bytes, shorter than the header", bytes.len()));
    }
    if &bytes[..4] != MAGIC {
        return Err("bad magic (expected KSPM)".into());
    }
    let word = |k: usize| u32::from_le_bytes(bytes[4 * k..4 * k + 4].try_into().unwrap());
    let version = word(1);
    if version != SNAPSHOT_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let (nx, ny) = (word(2) as usize, word(3) as usize);
    let grid = Grid::new(nx, ny).map_err(|e| e.to_string())?;
    let expected = snapshot_byte_len(grid) as usize;
    if bytes.len() != expected {
        return Err(format!(
            "header declares {nx}x{ny} ({expected} bytes) but file has {} bytes",
            bytes.len()
        ));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Field::new(grid, values).map_err(|e| e.to_string())
}

pub fn write_snapshot(f: &Field, path: &Path) -> Result<()> {
    fs::write(path, encode_snapshot(f)).map_err(|e| Error::Snapshot {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn read_snapshot(path: &Path) -> Result<Field> {
    let bytes = fs::read(path).map_err(|e| Error::Snapshot {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    decode_snapshot(&bytes).map_err(|reason| Error::Snapshot {
        path: path.to_path_buf(),
        reason,
    })
}
