//! 4D ultrasound volumes: time-ordered stacks of identically shaped 8-bit
//! voxel frames, plus the NRRD codec used to move them in and out.

mod gzip;
pub mod nrrd;

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::math::Vec3;

/// Used when a file carries no time-axis spacing.
pub const DEFAULT_FRAME_PERIOD_MS: f64 = 50.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VolumeError {
    #[error("not an NRRD stream (missing NRRD000x magic)")]
    BadMagic,
    #[error("unsupported {field}: {value}")]
    UnsupportedField { field: String, value: String },
    #[error("payload size mismatch: header declares {expected} bytes, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("4D volume has no identifiable time (list) axis")]
    NoTimeAxis,
    #[error("malformed NRRD header: {0}")]
    MalformedHeader(String),
    #[error("corrupt gzip payload: {0}")]
    Gzip(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("frame {index} does not share the geometry of frame 0")]
    InconsistentGeometry { index: usize },
    #[error("a volume sequence needs at least one frame")]
    Empty,
}

/// Grid shape and placement shared by every frame of a sequence.
///
/// Voxel `(i, j, k)` has its centre at `origin + (i*sx, j*sy, k*sz)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: Vec3,
}

impl Geometry {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: Vec3) -> Result<Self, VolumeError> {
        let g = Self { dims, spacing, origin };
        g.validate()?;
        Ok(g)
    }

    /// Isotropic grid at the origin.
    pub fn isotropic(dims: [usize; 3], spacing: f64) -> Result<Self, VolumeError> {
        Self::new(dims, [spacing; 3], Vec3::ZERO)
    }

    fn validate(&self) -> Result<(), VolumeError> {
        if self.dims.contains(&0) {
            return Err(VolumeError::InvalidGeometry(alloc::format!("zero dimension in {:?}", self.dims)));
        }
        if self.voxel_count().is_none() {
            return Err(VolumeError::InvalidGeometry("voxel count overflows".into()));
        }
        if self.spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(VolumeError::InvalidGeometry(alloc::format!("non-positive spacing {:?}", self.spacing)));
        }
        if !self.origin.is_finite() {
            return Err(VolumeError::InvalidGeometry("non-finite origin".into()));
        }
        Ok(())
    }

    pub fn voxel_count(&self) -> Option<usize> {
        self.dims[0].checked_mul(self.dims[1])?.checked_mul(self.dims[2])
    }

    /// Linear index with x varying fastest.
    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    /// Millimetre position of a voxel centre.
    pub fn voxel_center(&self, x: usize, y: usize, z: usize) -> Vec3 {
        self.origin
            + Vec3::new(
                x as f64 * self.spacing[0],
                y as f64 * self.spacing[1],
                z as f64 * self.spacing[2],
            )
    }

    /// Centre of the voxel-centre bounding box.
    pub fn center(&self) -> Vec3 {
        self.origin
            + Vec3::new(
                (self.dims[0] - 1) as f64 * self.spacing[0] * 0.5,
                (self.dims[1] - 1) as f64 * self.spacing[1] * 0.5,
                (self.dims[2] - 1) as f64 * self.spacing[2] * 0.5,
            )
    }

    /// Extent (mm) of the voxel-centre bounding box along each axis.
    pub fn extent(&self) -> [f64; 3] {
        [
            (self.dims[0] - 1) as f64 * self.spacing[0],
            (self.dims[1] - 1) as f64 * self.spacing[1],
            (self.dims[2] - 1) as f64 * self.spacing[2],
        ]
    }
}

/// One 3D timepoint.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeFrame {
    geometry: Geometry,
    voxels: Vec<u8>,
}

impl VolumeFrame {
    pub fn new(geometry: Geometry, voxels: Vec<u8>) -> Result<Self, VolumeError> {
        geometry.validate()?;
        let expected = geometry.voxel_count().unwrap_or(usize::MAX);
        if voxels.len() != expected {
            return Err(VolumeError::SizeMismatch { expected, found: voxels.len() });
        }
        Ok(Self { geometry, voxels })
    }

    /// Frame where every voxel holds `value`.
    pub fn filled(geometry: Geometry, value: u8) -> Result<Self, VolumeError> {
        geometry.validate()?;
        let n = geometry.voxel_count().unwrap_or(0);
        Ok(Self { geometry, voxels: alloc::vec![value; n] })
    }

    /// Builds a frame by evaluating `f(x, y, z)` at every voxel index.
    pub fn from_fn(geometry: Geometry, mut f: impl FnMut(usize, usize, usize) -> u8) -> Result<Self, VolumeError> {
        geometry.validate()?;
        let [nx, ny, nz] = geometry.dims;
        let mut voxels = Vec::with_capacity(nx * ny * nz);
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    voxels.push(f(x, y, z));
                }
            }
        }
        Ok(Self { geometry, voxels })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geometry.dims
    }

    pub fn voxels(&self) -> &[u8] {
        &self.voxels
    }

    pub fn into_voxels(self) -> Vec<u8> {
        self.voxels
    }

    #[inline]
    pub fn voxel(&self, x: usize, y: usize, z: usize) -> u8 {
        self.voxels[self.geometry.index(x, y, z)]
    }
}

/// Time-ordered frames sharing one geometry (the 4D volume).
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeSequence {
    frames: Vec<VolumeFrame>,
    frame_period_ms: f64,
}

impl VolumeSequence {
    pub fn new(frames: Vec<VolumeFrame>, frame_period_ms: f64) -> Result<Self, VolumeError> {
        let first = frames.first().ok_or(VolumeError::Empty)?;
        if let Some(index) = frames.iter().position(|f| f.geometry != first.geometry) {
            return Err(VolumeError::InconsistentGeometry { index });
        }
        if !(frame_period_ms > 0.0 && frame_period_ms.is_finite()) {
            return Err(VolumeError::InvalidGeometry(alloc::format!(
                "frame period must be positive, got {frame_period_ms}"
            )));
        }
        Ok(Self { frames, frame_period_ms })
    }

    pub fn single(frame: VolumeFrame) -> Self {
        Self { frames: alloc::vec![frame], frame_period_ms: DEFAULT_FRAME_PERIOD_MS }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.frames[0].geometry
    }

    pub fn frames(&self) -> &[VolumeFrame] {
        &self.frames
    }

    pub fn frame(&self, t: usize) -> Option<&VolumeFrame> {
        self.frames.get(t)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    /// Always false; kept for the `len` convention.
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame_period_ms(&self) -> f64 {
        self.frame_period_ms
    }

    pub fn with_frame_period_ms(mut self, ms: f64) -> Result<Self, VolumeError> {
        if !(ms > 0.0 && ms.is_finite()) {
            return Err(VolumeError::InvalidGeometry(alloc::format!("frame period must be positive, got {ms}")));
        }
        self.frame_period_ms = ms;
        Ok(self)
    }

    /// Total voxel bytes across all frames.
    pub fn voxel_bytes(&self) -> usize {
        self.frames.iter().map(|f| f.voxels.len()).sum()
    }

    pub fn into_frames(self) -> Vec<VolumeFrame> {
        self.frames
    }
}
