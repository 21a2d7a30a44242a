//! NRRD ("Nearly Raw Raster Data") reading and writing.
//!
//! Supported profile: magic `NRRD0001`..`NRRD0005`, dimension 3 or 4,
//! `raw` or `gzip` encoding, integer and floating scalar types. Anything
//! other than `uint8` is min-max rescaled to 8 bits over the whole file.
//! A 4D file is split into frames along its time axis, which is found by
//! `kinds` (`list`/`time`) or, failing that, by a `none` space direction,
//! wherever it sits in the axis order.
//!
//! Detached headers (`data file:`) are parsed here but the payload has to
//! be supplied by the caller; see [`decode_payload`].

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use super::{gzip, Geometry, VolumeError, VolumeFrame, VolumeSequence, DEFAULT_FRAME_PERIOD_MS};
use crate::math::Vec3;

/// Key/value entry carrying the frame period of single-frame files.
pub const FRAME_PERIOD_KEY: &str = "frame period ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Raw,
    Gzip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endian {
    Little,
    Big,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarType {
    U8,
    I8,
    U16,
    I16,
    U32,
    I32,
    F32,
    F64,
}

impl ScalarType {
    pub fn size(self) -> usize {
        match self {
            ScalarType::U8 | ScalarType::I8 => 1,
            ScalarType::U16 | ScalarType::I16 => 2,
            ScalarType::U32 | ScalarType::I32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "uchar" | "unsigned char" | "uint8" | "uint8_t" => ScalarType::U8,
            "signed char" | "int8" | "int8_t" => ScalarType::I8,
            "ushort" | "unsigned short" | "unsigned short int" | "uint16" | "uint16_t" => ScalarType::U16,
            "short" | "short int" | "signed short" | "signed short int" | "int16" | "int16_t" => ScalarType::I16,
            "uint" | "unsigned int" | "uint32" | "uint32_t" => ScalarType::U32,
            "int" | "signed int" | "int32" | "int32_t" => ScalarType::I32,
            "float" => ScalarType::F32,
            "double" => ScalarType::F64,
            _ => return None,
        })
    }

    fn read(self, bytes: &[u8], endian: Endian) -> f64 {
        macro_rules! rd {
            ($t:ty, $n:literal) => {{
                let mut a = [0u8; $n];
                a.copy_from_slice(bytes);
                match endian {
                    Endian::Little => <$t>::from_le_bytes(a) as f64,
                    Endian::Big => <$t>::from_be_bytes(a) as f64,
                }
            }};
        }
        match self {
            ScalarType::U8 => bytes[0] as f64,
            ScalarType::I8 => bytes[0] as i8 as f64,
            ScalarType::U16 => rd!(u16, 2),
            ScalarType::I16 => rd!(i16, 2),
            ScalarType::U32 => rd!(u32, 4),
            ScalarType::I32 => rd!(i32, 4),
            ScalarType::F32 => rd!(f32, 4),
            ScalarType::F64 => rd!(f64, 8),
        }
    }
}

/// Parsed header fields relevant to volume decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct NrrdHeader {
    pub version: u8,
    pub dimension: usize,
    pub sizes: Vec<usize>,
    pub scalar: ScalarType,
    pub encoding: Encoding,
    pub endian: Endian,
    pub kinds: Option<Vec<String>>,
    /// `None` entries are axes declared `none`.
    pub space_directions: Option<Vec<Option<Vec3>>>,
    pub spacings: Option<Vec<f64>>,
    pub units: Option<Vec<String>>,
    pub space_origin: Option<Vec3>,
    pub data_file: Option<String>,
    pub byte_skip: i64,
    pub line_skip: usize,
    /// `key:=value` pairs, passed through untouched.
    pub key_values: Vec<(String, String)>,
}

impl NrrdHeader {
    /// Number of payload bytes the header declares.
    pub fn payload_len(&self) -> Option<usize> {
        self.sizes.iter().try_fold(self.scalar.size(), |acc, &s| acc.checked_mul(s))
    }

    pub fn key_value(&self, key: &str) -> Option<&str> {
        self.key_values.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParseOptions {
    /// Frame period used when the file does not carry one.
    pub default_frame_period_ms: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self { default_frame_period_ms: DEFAULT_FRAME_PERIOD_MS }
    }
}

fn malformed(msg: impl Into<String>) -> VolumeError {
    VolumeError::MalformedHeader(msg.into())
}

fn unsupported(field: &str, value: &str) -> VolumeError {
    VolumeError::UnsupportedField { field: field.to_owned(), value: value.to_owned() }
}

/// Parses a complete in-memory NRRD stream with default options.
pub fn parse_nrrd(bytes: &[u8]) -> Result<VolumeSequence, VolumeError> {
    parse_nrrd_with(bytes, &ParseOptions::default())
}

pub fn parse_nrrd_with(bytes: &[u8], opts: &ParseOptions) -> Result<VolumeSequence, VolumeError> {
    let (header, offset) = parse_header(bytes)?;
    if let Some(file) = &header.data_file {
        return Err(unsupported("data file (detached payload needs a file reader)", file));
    }
    decode_payload(&header, &bytes[offset..], opts)
}

/// Parses the header, returning it with the byte offset of the attached
/// payload (or the input length for a detached header without a blank
/// terminator line).
pub fn parse_header(bytes: &[u8]) -> Result<(NrrdHeader, usize), VolumeError> {
    let mut lines = LineIter { bytes, pos: 0 };
    let magic = lines.next().ok_or(VolumeError::BadMagic)?;
    let version = match magic {
        [b'N', b'R', b'R', b'D', b'0', b'0', b'0', v @ b'1'..=b'5'] => v - b'0',
        _ => return Err(VolumeError::BadMagic),
    };

    let mut dimension = None;
    let mut sizes = None;
    let mut scalar = None;
    let mut encoding = None;
    let mut endian = None;
    let mut kinds = None;
    let mut space_directions = None;
    let mut spacings = None;
    let mut units = None;
    let mut space_origin = None;
    let mut data_file = None;
    let mut byte_skip = 0i64;
    let mut line_skip = 0usize;
    let mut key_values = Vec::new();
    let mut terminated = false;

    for raw in lines.by_ref() {
        if raw.is_empty() {
            terminated = true;
            break;
        }
        let line = core::str::from_utf8(raw).map_err(|_| malformed("header line is not UTF-8"))?;
        if line.starts_with('#') {
            continue;
        }
        if let Some((k, v)) = line.split_once(":=") {
            key_values.push((k.to_owned(), v.to_owned()));
            continue;
        }
        let (field, value) = line.split_once(": ").ok_or_else(|| malformed(format!("unrecognised line {line:?}")))?;
        let value = value.trim();
        match field {
            "dimension" => {
                let d: usize = value.parse().map_err(|_| malformed("dimension"))?;
                if d != 3 && d != 4 {
                    return Err(unsupported("dimension", value));
                }
                dimension = Some(d);
            }
            "sizes" => sizes = Some(parse_list::<usize>(value, "sizes")?),
            "type" => scalar = Some(ScalarType::from_name(value).ok_or_else(|| unsupported("type", value))?),
            "encoding" => {
                encoding = Some(match value {
                    "raw" => Encoding::Raw,
                    "gzip" | "gz" => Encoding::Gzip,
                    _ => return Err(unsupported("encoding", value)),
                })
            }
            "endian" => {
                endian = Some(match value {
                    "little" => Endian::Little,
                    "big" => Endian::Big,
                    _ => return Err(unsupported("endian", value)),
                })
            }
            "kinds" => kinds = Some(value.split_whitespace().map(str::to_owned).collect::<Vec<_>>()),
            "space directions" => space_directions = Some(parse_directions(value)?),
            "space origin" => space_origin = Some(parse_vector(value)?),
            "spacings" => spacings = Some(parse_spacings(value)?),
            "units" => units = Some(parse_quoted(value)?),
            "data file" | "datafile" => {
                if value.starts_with("LIST") || value.split_whitespace().count() > 1 {
                    return Err(unsupported("data file", value));
                }
                data_file = Some(value.to_owned());
            }
            "byte skip" | "byteskip" => byte_skip = value.parse().map_err(|_| malformed("byte skip"))?,
            "line skip" | "lineskip" => line_skip = value.parse().map_err(|_| malformed("line skip"))?,
            // Informational or orientation-only fields.
            _ => {}
        }
    }
    if !terminated && data_file.is_none() {
        return Err(malformed("missing blank line ending the header"));
    }

    let dimension = dimension.ok_or_else(|| malformed("missing dimension"))?;
    let sizes = sizes.ok_or_else(|| malformed("missing sizes"))?;
    let scalar = scalar.ok_or_else(|| malformed("missing type"))?;
    let encoding = encoding.ok_or_else(|| malformed("missing encoding"))?;
    if sizes.len() != dimension {
        return Err(malformed(format!("sizes has {} entries for dimension {dimension}", sizes.len())));
    }
    if sizes.contains(&0) {
        return Err(malformed("zero axis size"));
    }
    let per_axis_ok = |n: Option<usize>| n.is_none_or(|n| n == dimension);
    if !per_axis_ok(kinds.as_ref().map(Vec::len))
        || !per_axis_ok(space_directions.as_ref().map(Vec::len))
        || !per_axis_ok(spacings.as_ref().map(Vec::len))
        || !per_axis_ok(units.as_ref().map(Vec::len))
    {
        return Err(malformed("per-axis field length does not match dimension"));
    }
    if byte_skip < -1 {
        return Err(malformed("byte skip below -1"));
    }
    if byte_skip == -1 && encoding != Encoding::Raw {
        return Err(unsupported("byte skip -1 with encoding", "gzip"));
    }

    let header = NrrdHeader {
        version,
        dimension,
        sizes,
        scalar,
        encoding,
        endian: endian.unwrap_or(Endian::Little),
        kinds,
        space_directions,
        spacings,
        units,
        space_origin,
        data_file,
        byte_skip,
        line_skip,
        key_values,
    };
    if header.payload_len().is_none() {
        return Err(malformed("declared size overflows"));
    }
    Ok((header, lines.pos))
}

/// Decodes `payload` (the attached bytes after the header, or the content
/// of a detached data file) into a volume sequence.
pub fn decode_payload(header: &NrrdHeader, payload: &[u8], opts: &ParseOptions) -> Result<VolumeSequence, VolumeError> {
    let expected = header.payload_len().ok_or_else(|| malformed("declared size overflows"))?;
    let layout = AxisLayout::resolve(header)?;

    let mut payload = payload;
    if header.line_skip > 0 {
        let mut it = LineIter { bytes: payload, pos: 0 };
        for _ in 0..header.line_skip {
            it.next().ok_or(VolumeError::SizeMismatch { expected, found: 0 })?;
        }
        payload = &payload[it.pos..];
    }

    let decoded;
    let data: &[u8] = match header.encoding {
        Encoding::Raw => skip_bytes(payload, header.byte_skip, expected)?,
        Encoding::Gzip => {
            let skip = header.byte_skip as usize;
            let limit = expected.checked_add(skip).ok_or_else(|| malformed("declared size overflows"))?;
            decoded = gzip::decompress(payload, limit)?;
            skip_bytes(&decoded, header.byte_skip, expected)?
        }
    };

    let voxels = to_u8(data, header.scalar, header.endian);
    let frames = layout.split(&voxels)?;
    let period = frame_period_ms(header, &layout).unwrap_or(opts.default_frame_period_ms);
    VolumeSequence::new(frames, period)
}

fn skip_bytes(data: &[u8], byte_skip: i64, expected: usize) -> Result<&[u8], VolumeError> {
    let rest = if byte_skip == -1 {
        // Payload is the trailing `expected` bytes.
        let start = data.len().checked_sub(expected).ok_or(VolumeError::SizeMismatch { expected, found: data.len() })?;
        &data[start..]
    } else {
        let skip = byte_skip as usize;
        data.get(skip..).ok_or(VolumeError::SizeMismatch { expected, found: 0 })?
    };
    if rest.len() != expected {
        return Err(VolumeError::SizeMismatch { expected, found: rest.len() });
    }
    Ok(rest)
}

fn to_u8(data: &[u8], scalar: ScalarType, endian: Endian) -> Vec<u8> {
    if scalar == ScalarType::U8 {
        return data.to_vec();
    }
    let n = scalar.size();
    let values: Vec<f64> = data.chunks_exact(n).map(|c| scalar.read(c, endian)).collect();
    let (lo, hi) = values
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    values
        .iter()
        .map(|&v| {
            if range.is_nan() || range <= 0.0 || !v.is_finite() {
                0
            } else {
                libm::rint((v - lo) * 255.0 / range).clamp(0.0, 255.0) as u8
            }
        })
        .collect()
}

/// Where the time and spatial axes sit in the file's axis order.
struct AxisLayout {
    sizes: Vec<usize>,
    time_axis: Option<usize>,
    spatial: [usize; 3],
    geometry: Geometry,
}

impl AxisLayout {
    fn resolve(h: &NrrdHeader) -> Result<Self, VolumeError> {
        let time_axis = if h.dimension == 4 { Some(find_time_axis(h)?) } else { None };
        let mut spatial = [0usize; 3];
        let mut k = 0;
        for axis in 0..h.dimension {
            if Some(axis) != time_axis {
                spatial[k] = axis;
                k += 1;
            }
        }

        let mut spacing = [1.0f64; 3];
        for (slot, &axis) in spatial.iter().enumerate() {
            let from_dir = h.space_directions.as_ref().and_then(|d| d[axis]).map(Vec3::norm);
            let from_spacings = h.spacings.as_ref().map(|s| s[axis]).filter(|s| s.is_finite());
            spacing[slot] = match from_dir.or(from_spacings) {
                Some(s) => libm::fabs(s),
                None => 1.0,
            };
        }
        let dims = [h.sizes[spatial[0]], h.sizes[spatial[1]], h.sizes[spatial[2]]];
        let origin = h.space_origin.unwrap_or(Vec3::ZERO);
        let geometry = Geometry::new(dims, spacing, origin).map_err(|e| malformed(e.to_string()))?;
        Ok(Self { sizes: h.sizes.clone(), time_axis, spatial, geometry })
    }

    fn split(&self, voxels: &[u8]) -> Result<Vec<VolumeFrame>, VolumeError> {
        let Some(t_axis) = self.time_axis else {
            return Ok(vec![VolumeFrame::new(self.geometry, voxels.to_vec())?]);
        };
        let nt = self.sizes[t_axis];
        let per_frame = voxels.len() / nt;
        if t_axis == 3 {
            return voxels.chunks_exact(per_frame).map(|c| VolumeFrame::new(self.geometry, c.to_vec())).collect();
        }
        let mut strides = [1usize; 4];
        for a in 1..4 {
            strides[a] = strides[a - 1] * self.sizes[a - 1];
        }
        let [nx, ny, nz] = self.geometry.dims;
        let [ax, ay, az] = self.spatial;
        (0..nt)
            .map(|t| {
                let base_t = t * strides[t_axis];
                let mut out = Vec::with_capacity(per_frame);
                for z in 0..nz {
                    let base_z = base_t + z * strides[az];
                    for y in 0..ny {
                        let base_y = base_z + y * strides[ay];
                        out.extend((0..nx).map(|x| voxels[base_y + x * strides[ax]]));
                    }
                }
                VolumeFrame::new(self.geometry, out)
            })
            .collect()
    }
}

fn find_time_axis(h: &NrrdHeader) -> Result<usize, VolumeError> {
    if let Some(kinds) = &h.kinds {
        let found: Vec<usize> = kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| matches!(k.as_str(), "list" | "time"))
            .map(|(i, _)| i)
            .collect();
        if found.len() == 1 {
            return Ok(found[0]);
        }
    }
    if let Some(dirs) = &h.space_directions {
        let found: Vec<usize> = dirs.iter().enumerate().filter(|(_, d)| d.is_none()).map(|(i, _)| i).collect();
        if found.len() == 1 {
            return Ok(found[0]);
        }
    }
    Err(VolumeError::NoTimeAxis)
}

fn frame_period_ms(h: &NrrdHeader, layout: &AxisLayout) -> Option<f64> {
    let valid = |v: f64| (v > 0.0 && v.is_finite()).then_some(v);
    if let Some(t) = layout.time_axis {
        let spacing = h.spacings.as_ref().and_then(|s| valid(s[t]));
        if let Some(s) = spacing {
            let unit = h.units.as_ref().map(|u| u[t].as_str()).unwrap_or("ms");
            let scale = match unit {
                "s" | "sec" | "second" | "seconds" => 1000.0,
                "us" | "microsecond" | "microseconds" => 1e-3,
                _ => 1.0,
            };
            return valid(s * scale);
        }
    }
    h.key_value(FRAME_PERIOD_KEY).and_then(|v| v.trim().parse().ok()).and_then(valid)
}

/// Serialises a sequence. Single-frame sequences are written as 3D files
/// with the frame period stored as a key/value pair; longer ones as 4D
/// with the time axis last so each frame is one contiguous block.
pub fn write_nrrd(seq: &VolumeSequence, encoding: Encoding) -> Vec<u8> {
    let g = seq.geometry();
    let [nx, ny, nz] = g.dims;
    let [sx, sy, sz] = g.spacing;
    let nt = seq.len();
    let four_d = nt > 1;

    let mut h = String::new();
    // Writes to a String cannot fail.
    let _ = writeln!(h, "NRRD0005");
    let _ = writeln!(h, "# echosim volume sequence");
    let _ = writeln!(h, "type: uint8");
    let _ = writeln!(h, "dimension: {}", if four_d { 4 } else { 3 });
    let _ = writeln!(h, "space dimension: 3");
    if four_d {
        let _ = writeln!(h, "sizes: {nx} {ny} {nz} {nt}");
        let _ = writeln!(h, "space directions: ({sx},0,0) (0,{sy},0) (0,0,{sz}) none");
        let _ = writeln!(h, "kinds: domain domain domain list");
        let _ = writeln!(h, "spacings: nan nan nan {}", seq.frame_period_ms());
        let _ = writeln!(h, "units: \"\" \"\" \"\" \"ms\"");
    } else {
        let _ = writeln!(h, "sizes: {nx} {ny} {nz}");
        let _ = writeln!(h, "space directions: ({sx},0,0) (0,{sy},0) (0,0,{sz})");
        let _ = writeln!(h, "kinds: domain domain domain");
    }
    let _ = writeln!(h, "encoding: {}", match encoding { Encoding::Raw => "raw", Encoding::Gzip => "gzip" });
    let _ = writeln!(h, "space origin: ({},{},{})", g.origin.x, g.origin.y, g.origin.z);
    if !four_d {
        let _ = writeln!(h, "{FRAME_PERIOD_KEY}:={}", seq.frame_period_ms());
    }
    h.push('\n');

    let mut raw = Vec::with_capacity(seq.voxel_bytes());
    for f in seq.frames() {
        raw.extend_from_slice(f.voxels());
    }
    let mut out = h.into_bytes();
    match encoding {
        Encoding::Raw => out.extend_from_slice(&raw),
        Encoding::Gzip => out.extend_from_slice(&gzip::compress(&raw)),
    }
    out
}

/// Lines split on `\n` with an optional trailing `\r` removed.
struct LineIter<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Iterator for LineIter<'a> {
    type Item = &'a [u8];

    fn next(&mut self) -> Option<&'a [u8]> {
        if self.pos >= self.bytes.len() {
            return None;
        }
        let rest = &self.bytes[self.pos..];
        let (line, advance) = match rest.iter().position(|&b| b == b'\n') {
            Some(i) => (&rest[..i], i + 1),
            None => (rest, rest.len()),
        };
        self.pos += advance;
        Some(line.strip_suffix(b"\r").unwrap_or(line))
    }
}

fn parse_list<T: core::str::FromStr>(value: &str, field: &str) -> Result<Vec<T>, VolumeError> {
    value.split_whitespace().map(|t| t.parse().map_err(|_| malformed(format!("{field}: bad value {t:?}")))).collect()
}

fn parse_spacings(value: &str) -> Result<Vec<f64>, VolumeError> {
    value
        .split_whitespace()
        .map(|t| {
            if t.eq_ignore_ascii_case("nan") {
                Ok(f64::NAN)
            } else {
                t.parse().map_err(|_| malformed(format!("spacings: bad value {t:?}")))
            }
        })
        .collect()
}

/// `(a,b,c)` with optional interior whitespace.
fn parse_vector(value: &str) -> Result<Vec3, VolumeError> {
    let inner = value
        .trim()
        .strip_prefix('(')
        .and_then(|v| v.strip_suffix(')'))
        .ok_or_else(|| malformed(format!("expected (x,y,z), got {value:?}")))?;
    let parts: Vec<f64> = inner
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| malformed(format!("bad vector component in {value:?}"))))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [x, y, z] if x.is_finite() && y.is_finite() && z.is_finite() => Ok(Vec3::new(x, y, z)),
        _ => Err(malformed(format!("expected 3 finite components in {value:?}"))),
    }
}

fn parse_directions(value: &str) -> Result<Vec<Option<Vec3>>, VolumeError> {
    let mut out = Vec::new();
    let mut rest = value.trim_start();
    while !rest.is_empty() {
        if let Some(r) = rest.strip_prefix("none") {
            out.push(None);
            rest = r.trim_start();
        } else if rest.starts_with('(') {
            let end = rest.find(')').ok_or_else(|| malformed("unterminated space direction"))?;
            out.push(Some(parse_vector(&rest[..=end])?));
            rest = rest[end + 1..].trim_start();
        } else {
            return Err(malformed(format!("bad space directions {value:?}")));
        }
    }
    Ok(out)
}

fn parse_quoted(value: &str) -> Result<Vec<String>, VolumeError> {
    let mut out = Vec::new();
    let mut rest = value.trim_start();
    while !rest.is_empty() {
        let body = rest.strip_prefix('"').ok_or_else(|| malformed("units must be quoted"))?;
        let end = body.find('"').ok_or_else(|| malformed("unterminated quoted unit"))?;
        out.push(body[..end].to_owned());
        rest = body[end + 1..].trim_start();
    }
    Ok(out)
}
