//! Looping GIF89a animations for the preloaded playback path.
//!
//! The profile is deliberately narrow: one 256-entry global palette, full
//! frames only, no interlace, no transparency, infinite looping. The
//! decoder rejects anything outside that profile instead of guessing.

pub mod lzw;

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::slicer::{slice, SlicePlane};
use crate::volume::VolumeSequence;

pub type Palette = [[u8; 3]; 256];

const MIN_CODE_SIZE: u8 = 8;
const NETSCAPE: &[u8; 11] = b"NETSCAPE2.0";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GifError {
    #[error("not a GIF89a stream")]
    BadMagic,
    #[error("GIF stream ends prematurely")]
    TruncatedStream,
    #[error("unsupported GIF feature: {0}")]
    UnsupportedFeature(String),
    #[error("corrupt GIF data: {0}")]
    Corrupt(String),
    #[error("invalid animation: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GifFrame {
    /// Row-major palette indices, `width * height` long.
    pub indices: Vec<u8>,
    /// Display time in hundredths of a second, at least 1.
    pub delay_cs: u16,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GifAnimation {
    width: u16,
    height: u16,
    palette: Box<Palette>,
    frames: Vec<GifFrame>,
}

/// Entry `i` is `(i, i, i)`.
pub fn grayscale_palette() -> Box<Palette> {
    let mut p = Box::new([[0u8; 3]; 256]);
    for (i, e) in p.iter_mut().enumerate() {
        *e = [i as u8; 3];
    }
    p
}

impl GifAnimation {
    pub fn new(width: u16, height: u16, palette: Box<Palette>, frames: Vec<GifFrame>) -> Result<Self, GifError> {
        if width == 0 || height == 0 {
            return Err(GifError::Invalid("zero-sized screen".into()));
        }
        if frames.is_empty() {
            return Err(GifError::Invalid("no frames".into()));
        }
        let n = width as usize * height as usize;
        for (i, f) in frames.iter().enumerate() {
            if f.indices.len() != n {
                return Err(GifError::Invalid(alloc::format!("frame {i} has {} pixels, expected {n}", f.indices.len())));
            }
            if f.delay_cs == 0 {
                return Err(GifError::Invalid(alloc::format!("frame {i} has zero delay")));
            }
        }
        Ok(Self { width, height, palette, frames })
    }

    /// Grayscale animation with one shared delay.
    pub fn grayscale(width: u16, height: u16, images: Vec<Vec<u8>>, delay_cs: u16) -> Result<Self, GifError> {
        let frames = images.into_iter().map(|indices| GifFrame { indices, delay_cs }).collect();
        Self::new(width, height, grayscale_palette(), frames)
    }

    pub fn width(&self) -> u16 {
        self.width
    }
    pub fn height(&self) -> u16 {
        self.height
    }
    pub fn palette(&self) -> &Palette {
        &self.palette
    }
    pub fn frames(&self) -> &[GifFrame] {
        &self.frames
    }
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }
}

fn push_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}

/// Serialises an animation as GIF89a with the NETSCAPE loop-forever block.
pub fn encode_gif(anim: &GifAnimation) -> Vec<u8> {
    let mut out = Vec::with_capacity(1024 + anim.frames.len() * anim.frames[0].indices.len() / 2);
    out.extend_from_slice(b"GIF89a");
    push_u16(&mut out, anim.width);
    push_u16(&mut out, anim.height);
    // Global table present, 8-bit colour resolution, 256 entries.
    out.extend_from_slice(&[0xF7, 0, 0]);
    for rgb in anim.palette.iter() {
        out.extend_from_slice(rgb);
    }
    out.extend_from_slice(&[0x21, 0xFF, 11]);
    out.extend_from_slice(NETSCAPE);
    out.extend_from_slice(&[3, 1, 0, 0, 0]);

    for frame in &anim.frames {
        // Graphic control: disposal "none", no transparency.
        out.extend_from_slice(&[0x21, 0xF9, 4, 0x04]);
        push_u16(&mut out, frame.delay_cs);
        out.extend_from_slice(&[0, 0]);

        out.push(0x2C);
        push_u16(&mut out, 0);
        push_u16(&mut out, 0);
        push_u16(&mut out, anim.width);
        push_u16(&mut out, anim.height);
        out.push(0);

        out.push(MIN_CODE_SIZE);
        let data = lzw::encode(&frame.indices, MIN_CODE_SIZE);
        for chunk in data.chunks(255) {
            out.push(chunk.len() as u8);
            out.extend_from_slice(chunk);
        }
        out.push(0);
    }
    out.push(0x3B);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], GifError> {
        let end = self.pos.checked_add(n).ok_or(GifError::TruncatedStream)?;
        let s = self.bytes.get(self.pos..end).ok_or(GifError::TruncatedStream)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, GifError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, GifError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    /// Concatenated payload of a data sub-block chain.
    fn sub_blocks(&mut self) -> Result<Vec<u8>, GifError> {
        let mut data = Vec::new();
        loop {
            let n = self.u8()? as usize;
            if n == 0 {
                return Ok(data);
            }
            data.extend_from_slice(self.take(n)?);
        }
    }

    fn skip_sub_blocks(&mut self) -> Result<(), GifError> {
        loop {
            let n = self.u8()? as usize;
            if n == 0 {
                return Ok(());
            }
            self.take(n)?;
        }
    }
}

/// Parses a GIF89a stream in the profile written by [`encode_gif`].
pub fn decode_gif(bytes: &[u8]) -> Result<GifAnimation, GifError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(6).map_err(|_| GifError::BadMagic)?;
    if magic != b"GIF89a" {
        return Err(GifError::BadMagic);
    }
    let width = r.u16()?;
    let height = r.u16()?;
    let packed = r.u8()?;
    r.take(2)?;
    if packed & 0x80 == 0 {
        return Err(GifError::UnsupportedFeature("missing global color table".into()));
    }
    let entries = 2usize << (packed & 0x07);
    let table = r.take(entries * 3)?;
    let mut palette = Box::new([[0u8; 3]; 256]);
    for (slot, rgb) in palette.iter_mut().zip(table.chunks_exact(3)) {
        slot.copy_from_slice(rgb);
    }

    let n_pixels = width as usize * height as usize;
    let mut frames = Vec::new();
    let mut pending_delay: Option<u16> = None;
    let mut loop_count: Option<u16> = None;
    loop {
        match r.u8()? {
            0x21 => match r.u8()? {
                0xF9 => {
                    if r.u8()? != 4 {
                        return Err(GifError::Corrupt("graphic control block size".into()));
                    }
                    let gce_packed = r.u8()?;
                    let delay = r.u16()?;
                    r.u8()?;
                    if r.u8()? != 0 {
                        return Err(GifError::Corrupt("graphic control terminator".into()));
                    }
                    if gce_packed & 0x01 != 0 {
                        return Err(GifError::UnsupportedFeature("transparency".into()));
                    }
                    pending_delay = Some(delay);
                }
                0xFF => {
                    let n = r.u8()? as usize;
                    let ident = r.take(n)?;
                    let data = r.sub_blocks()?;
                    if (ident == NETSCAPE || ident == b"ANIMEXTS1.0") && data.len() >= 3 && data[0] == 1 {
                        loop_count = Some(u16::from_le_bytes([data[1], data[2]]));
                    }
                }
                _ => r.skip_sub_blocks()?,
            },
            0x2C => {
                let (left, top, w, h) = (r.u16()?, r.u16()?, r.u16()?, r.u16()?);
                let img_packed = r.u8()?;
                if img_packed & 0x80 != 0 {
                    return Err(GifError::UnsupportedFeature("local color table".into()));
                }
                if img_packed & 0x40 != 0 {
                    return Err(GifError::UnsupportedFeature("interlacing".into()));
                }
                if (left, top, w, h) != (0, 0, width, height) {
                    return Err(GifError::UnsupportedFeature("partial-frame image".into()));
                }
                let min_code = r.u8()?;
                if !(2..=8).contains(&min_code) {
                    return Err(GifError::Corrupt(alloc::format!("LZW minimum code size {min_code}")));
                }
                let data = r.sub_blocks()?;
                let indices = lzw::decode(&data, min_code, n_pixels).map_err(|e| match e {
                    lzw::LzwError::Truncated => GifError::TruncatedStream,
                    other => GifError::Corrupt(alloc::format!("{other:?}")),
                })?;
                if indices.len() != n_pixels {
                    return Err(GifError::Corrupt(alloc::format!(
                        "frame {} decoded {} of {n_pixels} pixels",
                        frames.len(),
                        indices.len()
                    )));
                }
                // A zero delay plays as "as fast as possible"; hold it for one tick instead.
                let delay_cs = pending_delay.take().unwrap_or(0).max(1);
                frames.push(GifFrame { indices, delay_cs });
            }
            0x3B => break,
            other => return Err(GifError::Corrupt(alloc::format!("unknown block 0x{other:02X}"))),
        }
    }
    match loop_count {
        Some(0) => {}
        Some(n) => return Err(GifError::UnsupportedFeature(alloc::format!("finite loop count {n}"))),
        None => return Err(GifError::UnsupportedFeature("no looping extension".to_string())),
    }
    GifAnimation::new(width, height, palette, frames).map_err(|e| GifError::Corrupt(e.to_string()))
}

/// Frame delay for a volume frame period: nearest centisecond, at least 1.
pub fn delay_cs_for_period(frame_period_ms: f64) -> u16 {
    libm::round(frame_period_ms / 10.0).clamp(1.0, u16::MAX as f64) as u16
}

/// Slices every timepoint of `seq` on `plane` into a grayscale animation.
pub fn sequence_to_gif(seq: &VolumeSequence, plane: &SlicePlane) -> Result<GifAnimation, GifError> {
    let width = u16::try_from(plane.width_px()).map_err(|_| GifError::Invalid("plane wider than 65535 px".into()))?;
    let height = u16::try_from(plane.height_px()).map_err(|_| GifError::Invalid("plane taller than 65535 px".into()))?;
    let delay = delay_cs_for_period(seq.frame_period_ms());
    let images = seq.frames().iter().map(|f| slice(f, plane).pixels).collect();
    GifAnimation::grayscale(width, height, images, delay)
}
