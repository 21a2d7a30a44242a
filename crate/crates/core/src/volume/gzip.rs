//! Single-member gzip framing around raw deflate.

use alloc::string::ToString;
use alloc::vec::Vec;

use miniz_oxide::inflate::TINFLStatus;

use super::VolumeError;

const FTEXT_MASK: u8 = 0x01;
const FHCRC: u8 = 0x02;
const FEXTRA: u8 = 0x04;
const FNAME: u8 = 0x08;
const FCOMMENT: u8 = 0x10;

/// Compresses `data` into a gzip member with a zeroed mtime so output is
/// reproducible.
pub(crate) fn compress(data: &[u8]) -> Vec<u8> {
    let body = miniz_oxide::deflate::compress_to_vec(data, 6);
    let mut out = Vec::with_capacity(body.len() + 18);
    out.extend_from_slice(&[0x1f, 0x8b, 8, 0, 0, 0, 0, 0, 0, 0xff]);
    out.extend_from_slice(&body);
    out.extend_from_slice(&crc32fast::hash(data).to_le_bytes());
    out.extend_from_slice(&(data.len() as u32).to_le_bytes());
    out
}

/// Inflates a gzip member, refusing to produce more than `limit` bytes.
pub(crate) fn decompress(input: &[u8], limit: usize) -> Result<Vec<u8>, VolumeError> {
    let corrupt = |m: &str| VolumeError::Gzip(m.to_string());
    if input.len() < 18 || input[0] != 0x1f || input[1] != 0x8b {
        return Err(corrupt("missing gzip magic"));
    }
    if input[2] != 8 {
        return Err(corrupt("unknown compression method"));
    }
    let flags = input[3] & !FTEXT_MASK;
    let mut pos = 10usize;
    if flags & FEXTRA != 0 {
        let xlen = input.get(pos..pos + 2).ok_or_else(|| corrupt("truncated header"))?;
        pos += 2 + u16::from_le_bytes([xlen[0], xlen[1]]) as usize;
    }
    for flag in [FNAME, FCOMMENT] {
        if flags & flag != 0 {
            let rest = input.get(pos..).ok_or_else(|| corrupt("truncated header"))?;
            let nul = rest.iter().position(|&b| b == 0).ok_or_else(|| corrupt("unterminated header string"))?;
            pos += nul + 1;
        }
    }
    if flags & FHCRC != 0 {
        pos += 2;
    }
    if pos + 8 > input.len() {
        return Err(corrupt("truncated header"));
    }
    let body = &input[pos..input.len() - 8];
    let data = miniz_oxide::inflate::decompress_to_vec_with_limit(body, limit).map_err(|e| match e.status {
        TINFLStatus::HasMoreOutput => VolumeError::SizeMismatch { expected: limit, found: limit.saturating_add(1) },
        _ => corrupt("invalid deflate stream"),
    })?;
    let trailer = &input[input.len() - 8..];
    let crc = u32::from_le_bytes([trailer[0], trailer[1], trailer[2], trailer[3]]);
    let isize = u32::from_le_bytes([trailer[4], trailer[5], trailer[6], trailer[7]]);
    if crc32fast::hash(&data) != crc || isize != data.len() as u32 {
        return Err(corrupt("checksum mismatch"));
    }
    Ok(data)
}
