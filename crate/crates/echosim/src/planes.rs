//! Named view planes and the `--plane` argument.

use std::collections::BTreeMap;

use echosim_core::slicer::SliceError;
use echosim_core::{Geometry, SlicePlane, Vec3, View};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlaneArgError {
    #[error("plane {0:?}: expected a view name or 12 comma-separated numbers (origin xyz, u xyz, v xyz, width, height, mm)")]
    Syntax(String),
    #[error("plane {arg:?}: {source}")]
    Invalid { arg: String, source: SliceError },
}

/// In-plane axes for each view, in volume coordinates.
pub fn preset_axes(view: View) -> (Vec3, Vec3) {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match view {
        View::Apical => (Vec3::X, Vec3::Y),
        View::Plax => (Vec3::X, Vec3::Z),
        View::Psax => (Vec3::Y, Vec3::Z),
        View::Subcostal => (Vec3::new(h, h, 0.0), Vec3::Z),
        View::Suprasternal => (Vec3::X, Vec3::new(0.0, h, h)),
    }
}

fn default_pixel_mm(g: &Geometry) -> f64 {
    g.spacing.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// The view's plane, centred on the volume at its finest spacing.
pub fn preset_plane(view: View, geometry: &Geometry) -> SlicePlane {
    let (u, v) = preset_axes(view);
    SlicePlane::centered(geometry, u, v, default_pixel_mm(geometry)).expect("preset axes are orthonormal")
}

pub fn default_planes(geometry: &Geometry) -> BTreeMap<View, SlicePlane> {
    View::ALL.iter().map(|&v| (v, preset_plane(v, geometry))).collect()
}

pub fn parse_plane(arg: &str, geometry: &Geometry) -> Result<SlicePlane, PlaneArgError> {
    if let Ok(view) = arg.parse::<View>() {
        return Ok(preset_plane(view, geometry));
    }
    let syntax = || PlaneArgError::Syntax(arg.to_owned());
    let nums = arg
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| syntax())?;
    let [ox, oy, oz, ux, uy, uz, vx, vy, vz, w, h, mm] = nums[..] else {
        return Err(syntax());
    };
    if w.fract() != 0.0 || h.fract() != 0.0 || w < 1.0 || h < 1.0 {
        return Err(syntax());
    }
    SlicePlane::new(
        Vec3::new(ox, oy, oz),
        Vec3::new(ux, uy, uz),
        Vec3::new(vx, vy, vz),
        w as usize,
        h as usize,
        mm,
    )
    .map_err(|source| PlaneArgError::Invalid { arg: arg.to_owned(), source })
}
