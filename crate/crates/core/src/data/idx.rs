//! IDX binary tensors (big-endian sizes, unsigned-byte payload).

use std::fs;
use std::path::Path;

use crate::error::{invalid, Error, Result};

/// Magic number of a rank-3 image file.
pub const IMAGE_MAGIC: [u8; 4] = [0, 0, 0x08, 0x03];
/// Magic number of a rank-1 label file.
pub const LABEL_MAGIC: [u8; 4] = [0, 0, 0x08, 0x01];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxFile {
    pub magic: [u8; 4],
    pub dims: Vec<usize>,
    pub payload: Vec<u8>,
}

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format { offset, message: message.into() }
}

impl IdxFile {
    pub fn new(dims: Vec<usize>, payload: Vec<u8>) -> Result<Self> {
        if dims.is_empty() || dims.len() > 255 {
            return invalid("IDX tensors have between 1 and 255 dimensions");
        }
        let expected: usize = dims.iter().product();
        if expected != payload.len() {
            return invalid(format!("payload has {} bytes, dims need {expected}", payload.len()));
        }
        Ok(IdxFile { magic: [0, 0, 0x08, dims.len() as u8], dims, payload })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 4 * self.dims.len() + self.payload.len());
        out.extend_from_slice(&self.magic);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_be_bytes());
        }
        out.extend_from_slice(&self.payload);
        out
    }
}

/// Parses an IDX byte stream; the whole buffer must be consumed.
pub fn parse_idx(bytes: &[u8]) -> Result<IdxFile> {
    if bytes.len() < 4 {
        return Err(format_err(bytes.len(), "file ends inside the magic number"));
    }
    let magic = [bytes[0], bytes[1], bytes[2], bytes[3]];
    if magic[0] != 0 || magic[1] != 0 {
        return Err(format_err(0, format!("bad magic prefix {:02x}{:02x}", magic[0], magic[1])));
    }
    if magic[2] != 0x08 {
        return Err(format_err(2, format!("unsupported element type 0x{:02x}", magic[2])));
    }
    let rank = magic[3] as usize;
    if rank == 0 {
        return Err(format_err(3, "tensor rank is zero"));
    }
    let mut dims = Vec::with_capacity(rank);
    let mut offset = 4;
    for _ in 0..rank {
        let Some(chunk) = bytes.get(offset..offset + 4) else {
            return Err(format_err(bytes.len(), "file ends inside the dimension sizes"));
        };
        dims.push(u32::from_be_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as usize);
        offset += 4;
    }
    let expected = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| format_err(4, "dimension product overflows"))?;
    let available = bytes.len() - offset;
    if available < expected {
        return Err(format_err(
            bytes.len(),
            format!("payload truncated: {available} of {expected} bytes present"),
        ));
    }
    if available > expected {
        return Err(format_err(offset + expected, "trailing bytes after the payload"));
    }
    Ok(IdxFile { magic, dims, payload: bytes[offset..].to_vec() })
}

pub fn load_idx(path: &Path) -> Result<IdxFile> {
    parse_idx(&fs::read(path)?)
}

pub fn write_idx(path: &Path, file: &IdxFile) -> Result<()> {
    fs::write(path, file.to_bytes())?;
    Ok(())
}
