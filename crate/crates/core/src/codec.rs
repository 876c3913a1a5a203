//! On-disk formats.
//!
//! Token grids (`TGRD`) and semantic grids (`SGRD`) share one binary layout:
//!
//! ```text
//! 0..4   magic, ASCII
//! 4..6   version, u16 LE (= 1)
//! 6..8   reserved (written as 0)
//! 8..12  height, u32 LE
//! 12..16 width, u32 LE
//! 16..20 codebook_size (TGRD) or label_count (SGRD), u32 LE
//! 20..   height*width u32 LE values, row-major
//! ```
//!
//! Everything else (distributions, tables, models, manifests) is JSON.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{SemanticGrid, TokenGrid};

pub const TOKEN_MAGIC: &[u8; 4] = b"TGRD";
pub const SEMANTIC_MAGIC: &[u8; 4] = b"SGRD";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 20;

struct RawGrid {
    height: usize,
    width: usize,
    range: usize,
    values: Vec<u32>,
}

fn encode(magic: &[u8; 4], height: usize, width: usize, range: usize, values: &[u32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * values.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    for v in [height, width, range] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode(magic: &[u8; 4], format: &'static str, bytes: &[u8]) -> Result<RawGrid> {
    let fail = |reason: String| Error::Format { format, reason };
    if bytes.len() < HEADER_LEN {
        return Err(fail(format!("truncated header ({} bytes)", bytes.len())));
    }
    if &bytes[0..4] != magic {
        return Err(fail(format!("bad magic {:?}", String::from_utf8_lossy(&bytes[0..4]))));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(fail(format!("unsupported version {version}")));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let (height, width, range) = (word(8), word(12), word(16));
    let count = height
        .checked_mul(width)
        .ok_or_else(|| fail("dimensions overflow".into()))?;
    let expected = count
        .checked_mul(4)
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| fail("dimensions overflow".into()))?;
    if bytes.len() < expected {
        return Err(fail(format!(
            "truncated payload: expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    if bytes.len() > expected {
        return Err(fail(format!(
            "{} trailing bytes after payload",
            bytes.len() - expected
        )));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(RawGrid {
        height,
        width,
        range,
        values,
    })
}

pub fn encode_token_grid(grid: &TokenGrid) -> Vec<u8> {
    encode(
        TOKEN_MAGIC,
        grid.height(),
        grid.width(),
        grid.codebook_size(),
        grid.tokens(),
    )
}

pub fn decode_token_grid(bytes: &[u8]) -> Result<TokenGrid> {
    let raw = decode(TOKEN_MAGIC, "TGRD", bytes)?;
    TokenGrid::new(raw.height, raw.width, raw.range, raw.values)
}

pub fn encode_semantic_grid(grid: &SemanticGrid) -> Vec<u8> {
    encode(
        SEMANTIC_MAGIC,
        grid.height(),
        grid.width(),
        grid.label_count(),
        grid.labels(),
    )
}

pub fn decode_semantic_grid(bytes: &[u8]) -> Result<SemanticGrid> {
    let raw = decode(SEMANTIC_MAGIC, "SGRD", bytes)?;
    SemanticGrid::new(raw.height, raw.width, raw.range, raw.values)
}

pub fn read_token_grid(path: impl AsRef<Path>) -> Result<TokenGrid> {
    decode_token_grid(&fs::read(path)?)
}

pub fn write_token_grid(path: impl AsRef<Path>, grid: &TokenGrid) -> Result<()> {
    Ok(fs::write(path, encode_token_grid(grid))?)
}

pub fn read_semantic_grid(path: impl AsRef<Path>) -> Result<SemanticGrid> {
    decode_semantic_grid(&fs::read(path)?)
}

pub fn write_semantic_grid(path: impl AsRef<Path>, grid: &SemanticGrid) -> Result<()> {
    Ok(fs::write(path, encode_semantic_grid(grid))?)
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut file = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n")?;
    Ok(())
}
