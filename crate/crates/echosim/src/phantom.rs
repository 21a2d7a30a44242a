//! Synthetic beating-heart volumes for demos and tests.
//!
//! Two nested ellipsoidal chambers with bright walls in speckled tissue.
//! The chambers contract and relax sinusoidally over the sequence.

use echosim_core::{Geometry, Vec3, VolumeFrame, VolumeSequence};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhantomSpec {
    pub size: usize,
    pub frames: usize,
    pub spacing_mm: f64,
    pub frame_period_ms: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self { size: 48, frames: 12, spacing_mm: 1.0, frame_period_ms: 50.0, seed: 1 }
    }
}

fn speckle(seed: u64, x: usize, y: usize, z: usize) -> f64 {
    let mut h = seed ^ (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    h ^= (y as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    h ^= (z as u64).wrapping_mul(0x1656_67B1_9E37_79F9);
    h ^= h >> 31;
    h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    h ^= h >> 29;
    (h & 0xFFFF) as f64 / 65535.0
}

fn chamber(p: Vec3, center: Vec3, radii: Vec3) -> f64 {
    let d = p - center;
    ((d.x / radii.x).powi(2) + (d.y / radii.y).powi(2) + (d.z / radii.z).powi(2)).sqrt()
}

pub fn phantom(spec: &PhantomSpec) -> VolumeSequence {
    let n = spec.size.max(4);
    let geometry = Geometry::isotropic([n, n, n], spec.spacing_mm).expect("valid phantom geometry");
    let c = geometry.center();
    let half = (n - 1) as f64 * spec.spacing_mm / 2.0;
    let frames = (0..spec.frames.max(1))
        .map(|t| {
            let phase = (t as f64 / spec.frames.max(1) as f64 * std::f64::consts::TAU).sin();
            let beat = 1.0 + 0.12 * phase;
            let lv = Vec3::new(0.35, 0.55, 0.35) * (half * beat);
            let la = Vec3::new(0.25, 0.25, 0.25) * (half * (1.0 - 0.08 * phase));
            let la_center = c + Vec3::new(0.0, 0.62 * half, 0.15 * half);
            VolumeFrame::from_fn(geometry, |x, y, z| {
                let p = geometry.voxel_center(x, y, z);
                let noise = speckle(spec.seed, x, y, z);
                let mut v = 55.0 + 40.0 * noise;
                for r in [chamber(p, c, lv), chamber(p, la_center, la)] {
                    if r < 0.85 {
                        v = 12.0 + 10.0 * noise;
                    } else if r < 1.0 {
                        v = 190.0 + 50.0 * noise;
                    }
                }
                v.round().clamp(0.0, 255.0) as u8
            })
            .expect("phantom frame matches geometry")
        })
        .collect();
    VolumeSequence::new(frames, spec.frame_period_ms).expect("phantom sequence is consistent")
}
