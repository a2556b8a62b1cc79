//! `.hrep` binary format.
//!
//! ```text
//! "HREP" | u8 version=1 | u8 level | u8 channel | u8 reserved=0
//!        | u32 T | u32 d | u16 id_len | id (UTF-8) | T*d f32, row-major
//! ```
//! All integers and floats are little-endian.

use std::path::Path;

use crate::error::{Error, Result};

use super::rep::{Channel, Level, RepSequence};

pub const HREP_MAGIC: &[u8; 4] = b"HREP";
pub const HREP_VERSION: u8 = 1;
const FIXED_HEADER: usize = 18;

pub fn encode_reps(rep: &RepSequence) -> Vec<u8> {
    let id = rep.signal_id().as_bytes();
    let mut out = Vec::with_capacity(FIXED_HEADER + id.len() + rep.data().len() * 4);
    out.extend_from_slice(HREP_MAGIC);
    out.push(HREP_VERSION);
    out.push(rep.level().code());
    out.push(rep.channel().code());
    out.push(0);
    out.extend_from_slice(&(rep.frames() as u32).to_le_bytes());
    out.extend_from_slice(&(rep.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(id.len() as u16).to_le_bytes());
    out.extend_from_slice(id);
    for v in rep.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4-byte slice"))
}

pub fn decode_reps(bytes: &[u8]) -> Result<RepSequence> {
    let magic_len = bytes.len().min(4);
    if bytes[..magic_len] != HREP_MAGIC[..magic_len] || bytes.len() < 4 {
        return Err(Error::BadMagic);
    }
    if bytes.len() < FIXED_HEADER {
        return Err(Error::Truncated {
            expected: FIXED_HEADER,
            found: bytes.len(),
        });
    }
    if bytes[4] != HREP_VERSION {
        return Err(Error::Version(bytes[4]));
    }
    let level = Level::from_code(bytes[5]).ok_or_else(|| Error::Malformed(format!("level code {}", bytes[5])))?;
    let channel =
        Channel::from_code(bytes[6]).ok_or_else(|| Error::Malformed(format!("channel code {}", bytes[6])))?;
    if bytes[7] != 0 {
        return Err(Error::Malformed(format!("reserved byte is {}", bytes[7])));
    }
    let frames = u32_at(bytes, 8) as usize;
    let dim = u32_at(bytes, 12) as usize;
    let id_len = usize::from(u16::from_le_bytes([bytes[16], bytes[17]]));
    let payload_at = FIXED_HEADER + id_len;
    let expected = frames
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(payload_at))
        .ok_or_else(|| Error::Malformed(format!("{frames}x{dim} overflows")))?;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::Malformed(format!(
            "{} trailing bytes after payload",
            bytes.len() - expected
        )));
    }
    let signal_id = std::str::from_utf8(&bytes[FIXED_HEADER..payload_at])
        .map_err(|_| Error::Malformed("signal id is not UTF-8".into()))?;
    let data: Vec<f32> = bytes[payload_at..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
        .collect();
    if !data.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("stored representation"));
    }
    RepSequence::new(level, channel, signal_id, frames, dim, data)
}

pub fn write_reps(rep: &RepSequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_reps(rep)).map_err(|e| Error::io(path, e))
}

pub fn read_reps(path: impl AsRef<Path>) -> Result<RepSequence> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_reps(&bytes)
}
