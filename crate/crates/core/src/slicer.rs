//! Oblique plane resampling of a volume frame (the real-time view path).
//!
//! Voxel centres sit at `origin + index * spacing`. Samples are trilinear
//! over the eight surrounding centres; anything outside the voxel-centre
//! bounding box is background (0).

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::Vec3;
use crate::volume::{Geometry, VolumeFrame};

/// Orthonormality tolerance for plane axes.
pub const AXIS_TOL: f64 = 1e-9;

/// Points this close (in voxel units) to the bounding box count as inside.
const EDGE_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SliceError {
    #[error("plane axes are not orthonormal (|u|={u_norm}, |v|={v_norm}, u.v={dot})")]
    NotOrthonormal { u_norm: f64, v_norm: f64, dot: f64 },
    #[error("plane size must be positive (got {width}x{height} px at {pixel_mm} mm)")]
    BadSize { width: usize, height: usize, pixel_mm: f64 },
    #[error("plane origin is not finite")]
    NonFinite,
}

/// A rectangular sampling grid in volume space. Pixel `(i, j)` (column,
/// row) sits at `origin + i*pixel_mm*u + j*pixel_mm*v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlaneFields", into = "PlaneFields")]
pub struct SlicePlane {
    origin: Vec3,
    u: Vec3,
    v: Vec3,
    width_px: usize,
    height_px: usize,
    pixel_mm: f64,
}

#[derive(Serialize, Deserialize)]
struct PlaneFields {
    origin: [f64; 3],
    u: [f64; 3],
    v: [f64; 3],
    width_px: usize,
    height_px: usize,
    pixel_mm: f64,
}

impl TryFrom<PlaneFields> for SlicePlane {
    type Error = SliceError;
    fn try_from(f: PlaneFields) -> Result<Self, SliceError> {
        SlicePlane::new(f.origin.into(), f.u.into(), f.v.into(), f.width_px, f.height_px, f.pixel_mm)
    }
}

impl From<SlicePlane> for PlaneFields {
    fn from(p: SlicePlane) -> Self {
        PlaneFields {
            origin: p.origin.as_array(),
            u: p.u.as_array(),
            v: p.v.as_array(),
            width_px: p.width_px,
            height_px: p.height_px,
            pixel_mm: p.pixel_mm,
        }
    }
}

impl SlicePlane {
    pub fn new(
        origin: Vec3,
        u: Vec3,
        v: Vec3,
        width_px: usize,
        height_px: usize,
        pixel_mm: f64,
    ) -> Result<Self, SliceError> {
        if !origin.is_finite() {
            return Err(SliceError::NonFinite);
        }
        let (u_norm, v_norm, dot) = (u.norm(), v.norm(), u.dot(v));
        if !((u_norm - 1.0).abs() <= AXIS_TOL && (v_norm - 1.0).abs() <= AXIS_TOL && dot.abs() <= AXIS_TOL) {
            return Err(SliceError::NotOrthonormal { u_norm, v_norm, dot });
        }
        if width_px == 0 || height_px == 0 || !(pixel_mm > 0.0 && pixel_mm.is_finite()) {
            return Err(SliceError::BadSize { width: width_px, height: height_px, pixel_mm });
        }
        Ok(Self { origin, u, v, width_px, height_px, pixel_mm })
    }

    /// Plane spanned by the (normalised, orthogonalised) directions `u` and
    /// `v`, centred on the volume and sized to cover its largest extent.
    pub fn centered(geometry: &Geometry, u: Vec3, v: Vec3, pixel_mm: f64) -> Result<Self, SliceError> {
        let not_ortho = SliceError::NotOrthonormal { u_norm: u.norm(), v_norm: v.norm(), dot: u.dot(v) };
        let u = u.normalized().ok_or(not_ortho.clone())?;
        let v = (v - u * u.dot(v)).normalized().ok_or(not_ortho)?;
        let ext = geometry.extent();
        let diag = libm::sqrt(ext[0] * ext[0] + ext[1] * ext[1] + ext[2] * ext[2]);
        let n = ((diag / pixel_mm) as usize).max(1) + 1;
        let half = (n - 1) as f64 * pixel_mm * 0.5;
        let origin = geometry.center() - u * half - v * half;
        Self::new(origin, u, v, n, n, pixel_mm)
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }
    pub fn u(&self) -> Vec3 {
        self.u
    }
    pub fn v(&self) -> Vec3 {
        self.v
    }
    pub fn normal(&self) -> Vec3 {
        self.u.cross(self.v)
    }
    pub fn width_px(&self) -> usize {
        self.width_px
    }
    pub fn height_px(&self) -> usize {
        self.height_px
    }
    pub fn pixel_mm(&self) -> f64 {
        self.pixel_mm
    }

    /// Volume-space position of pixel `(i, j)`.
    #[inline]
    pub fn point(&self, i: usize, j: usize) -> Vec3 {
        self.origin + self.u * (i as f64 * self.pixel_mm) + self.v * (j as f64 * self.pixel_mm)
    }
}

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl SliceImage {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.pixels[j * self.width + i]
    }
}

/// Trilinear interpolation of the frame at `p` (mm); 0 outside the
/// voxel-centre bounding box.
pub fn sample_trilinear(frame: &VolumeFrame, p: Vec3) -> f64 {
    let g = frame.geometry();
    let rel = p - g.origin;
    let c = [rel.x / g.spacing[0], rel.y / g.spacing[1], rel.z / g.spacing[2]];
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    let mut f = [0f64; 3];
    for a in 0..3 {
        let n = g.dims[a];
        let last = (n - 1) as f64;
        // Also rejects NaN.
        if !(c[a] >= -EDGE_EPS && c[a] <= last + EDGE_EPS) {
            return 0.0;
        }
        let cc = c[a].clamp(0.0, last);
        let i0 = (libm::floor(cc) as usize).min(n.saturating_sub(2));
        lo[a] = i0;
        hi[a] = (i0 + 1).min(n - 1);
        f[a] = if hi[a] == i0 { 0.0 } else { cc - i0 as f64 };
    }
    let v = |x: usize, y: usize, z: usize| frame.voxel(x, y, z) as f64;
    let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
    let c00 = lerp(v(lo[0], lo[1], lo[2]), v(hi[0], lo[1], lo[2]), f[0]);
    let c10 = lerp(v(lo[0], hi[1], lo[2]), v(hi[0], hi[1], lo[2]), f[0]);
    let c01 = lerp(v(lo[0], lo[1], hi[2]), v(hi[0], lo[1], hi[2]), f[0]);
    let c11 = lerp(v(lo[0], hi[1], hi[2]), v(hi[0], hi[1], hi[2]), f[0]);
    lerp(lerp(c00, c10, f[1]), lerp(c01, c11, f[1]), f[2])
}

/// Quantises an intensity to 8 bits: clamp, then round half to even.
#[inline]
pub fn to_u8(value: f64) -> u8 {
    libm::rint(value.clamp(0.0, 255.0)) as u8
}

/// Resamples `frame` on `plane`.
pub fn slice(frame: &VolumeFrame, plane: &SlicePlane) -> SliceImage {
    let (w, h) = (plane.width_px, plane.height_px);
    let mut pixels = Vec::with_capacity(w * h);
    for j in 0..h {
        for i in 0..w {
            pixels.push(to_u8(sample_trilinear(frame, plane.point(i, j))));
        }
    }
    SliceImage { width: w, height: h, pixels }
}

/// Tilts the plane by `tilt_deg` about its `u` axis (through `origin`):
/// `v` and the normal rotate, `u` and `origin` stay put.
pub fn tilted_plane(base: &SlicePlane, tilt_deg: f64) -> SlicePlane {
    let v = base.v.rotated_about(base.u, tilt_deg);
    // Re-orthogonalise so repeated tilts do not drift.
    let v = (v - base.u * base.u.dot(v)).normalized().unwrap_or(base.v);
    SlicePlane { v, ..*base }
}
