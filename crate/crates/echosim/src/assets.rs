//! The preloaded clip library: one looping GIF per (view, tilt class) and a
//! JSON manifest tying views to their base planes and hall sensors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use echosim_core::gifcodec::{decode_gif, encode_gif, sequence_to_gif};
use echosim_core::session::view_spec;
use echosim_core::{tilted_plane, AssetKey, GifAnimation, GifError, SlicePlane, TiltClass, Variant, View, VolumeSequence};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{read_bytes, write_file, LoadError};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum AssetError {
    #[error("asset {key}: missing file {}", path.display())]
    MissingAsset { key: AssetKey, path: PathBuf },
    #[error("asset {key}: {source}")]
    DecodeError { key: AssetKey, source: GifError },
    #[error("manifest schema error: {0}")]
    SchemaError(String),
    #[error("nothing to build")]
    NoEntries,
    #[error(transparent)]
    Load(#[from] LoadError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetEntry {
    /// Relative to the manifest's directory.
    pub gif_path: String,
    pub source_volume_id: String,
    pub frame_period_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetManifest {
    pub version: u32,
    pub entries: BTreeMap<AssetKey, AssetEntry>,
    pub planes: BTreeMap<View, SlicePlane>,
    pub sensors: BTreeMap<View, usize>,
}

impl AssetManifest {
    pub fn validate(&self) -> Result<(), AssetError> {
        if self.version != MANIFEST_VERSION {
            return Err(AssetError::SchemaError(format!("unsupported manifest version {}", self.version)));
        }
        for (key, entry) in &self.entries {
            if !self.planes.contains_key(&key.view) {
                return Err(AssetError::SchemaError(format!("{key}: view has no plane")));
            }
            if !self.sensors.contains_key(&key.view) {
                return Err(AssetError::SchemaError(format!("{key}: view has no sensor")));
            }
            if !(entry.frame_period_ms > 0.0 && entry.frame_period_ms.is_finite()) {
                return Err(AssetError::SchemaError(format!("{key}: bad frame period")));
            }
            let p = Path::new(&entry.gif_path);
            if p.is_absolute() || p.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
                return Err(AssetError::SchemaError(format!("{key}: gif_path must stay inside the asset directory")));
            }
        }
        if let Some((v, s)) = self.sensors.iter().find(|(_, &s)| s >= echosim_core::telemetry::HALL_CHANNELS) {
            return Err(AssetError::SchemaError(format!("{v}: sensor index {s} out of range")));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, AssetError> {
        let m: AssetManifest = serde_json::from_str(text).map_err(|e| AssetError::SchemaError(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }
}

/// One volume to turn into a clip.
#[derive(Debug, Clone)]
pub struct AssetSource {
    pub id: String,
    pub sequence: VolumeSequence,
    /// Extra tilt about the base plane's `u` axis; 0 for volumes recorded
    /// at the target tilt.
    pub tilt_deg: f64,
}

pub fn gif_file_name(key: &AssetKey) -> String {
    format!("{}_{}.gif", key.view.key(), key.class.key())
}

/// Tilt that produces each class when all clips come from one volume.
pub fn synthetic_tilt(view: View, class: TiltClass) -> f64 {
    let spec = view_spec(view, Variant::Tilt);
    match class {
        TiltClass::NormalView => 0.0,
        TiltClass::Undershot => spec.tilt_lo_deg / 2.0,
        TiltClass::TiltView => (spec.tilt_lo_deg + spec.tilt_hi_deg) / 2.0,
        TiltClass::Overshot => spec.tilt_hi_deg + 10.0,
    }
}

/// Slices every source on its view's plane, writes the GIFs and the
/// manifest into `out_dir`.
pub fn build_assets(
    sources: &BTreeMap<AssetKey, AssetSource>,
    planes: &BTreeMap<View, SlicePlane>,
    sensors: &BTreeMap<View, usize>,
    out_dir: &Path,
) -> Result<AssetManifest, AssetError> {
    if sources.is_empty() {
        return Err(AssetError::NoEntries);
    }
    let mut entries = BTreeMap::new();
    for (key, src) in sources {
        let base = planes
            .get(&key.view)
            .ok_or_else(|| AssetError::SchemaError(format!("{key}: view has no plane")))?;
        let plane = if src.tilt_deg == 0.0 { *base } else { tilted_plane(base, src.tilt_deg) };
        let anim = sequence_to_gif(&src.sequence, &plane).map_err(|source| AssetError::DecodeError { key: *key, source })?;
        let name = gif_file_name(key);
        write_file(&out_dir.join(&name), &encode_gif(&anim))?;
        entries.insert(
            *key,
            AssetEntry { gif_path: name, source_volume_id: src.id.clone(), frame_period_ms: src.sequence.frame_period_ms() },
        );
    }
    let used: Vec<View> = entries.keys().map(|k: &AssetKey| k.view).collect();
    let manifest = AssetManifest {
        version: MANIFEST_VERSION,
        entries,
        planes: planes.iter().filter(|(v, _)| used.contains(v)).map(|(v, p)| (*v, *p)).collect(),
        sensors: used
            .iter()
            .map(|&v| (v, sensors.get(&v).copied().unwrap_or_else(|| v.default_sensor())))
            .collect(),
    };
    manifest.validate()?;
    write_file(&out_dir.join(MANIFEST_FILE), manifest.to_json().as_bytes())?;
    Ok(manifest)
}

/// A manifest with every clip decoded and resident.
#[derive(Debug, Clone)]
pub struct LoadedAssets {
    manifest: AssetManifest,
    dir: PathBuf,
    clips: BTreeMap<AssetKey, Arc<GifAnimation>>,
}

pub fn load_manifest(path: &Path) -> Result<LoadedAssets, AssetError> {
    let text = read_bytes(path)?;
    let text = String::from_utf8(text).map_err(|_| AssetError::SchemaError("manifest is not UTF-8".into()))?;
    let manifest = AssetManifest::from_json(&text)?;
    let dir = path.parent().unwrap_or(Path::new(".")).to_owned();
    let mut clips = BTreeMap::new();
    for (key, entry) in &manifest.entries {
        let gif = dir.join(&entry.gif_path);
        let bytes = std::fs::read(&gif).map_err(|_| AssetError::MissingAsset { key: *key, path: gif.clone() })?;
        let anim = decode_gif(&bytes).map_err(|source| AssetError::DecodeError { key: *key, source })?;
        clips.insert(*key, Arc::new(anim));
    }
    Ok(LoadedAssets { manifest, dir, clips })
}

impl LoadedAssets {
    /// Assets without any clips, for running the service on telemetry alone.
    pub fn empty() -> Self {
        Self {
            manifest: AssetManifest {
                version: MANIFEST_VERSION,
                entries: BTreeMap::new(),
                planes: BTreeMap::new(),
                sensors: BTreeMap::new(),
            },
            dir: PathBuf::from("."),
            clips: BTreeMap::new(),
        }
    }

    pub fn manifest(&self) -> &AssetManifest {
        &self.manifest
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn get(&self, key: &AssetKey) -> Option<&Arc<GifAnimation>> {
        self.clips.get(key)
    }

    /// The clip shown for `key`, falling back to the nearest class.
    pub fn resolve(&self, key: AssetKey) -> Option<(AssetKey, &Arc<GifAnimation>)> {
        key.class.fallbacks().iter().find_map(|&class| {
            let k = AssetKey { view: key.view, class };
            self.clips.get(&k).map(|a| (k, a))
        })
    }

    pub fn sensor_for(&self, view: View) -> Option<usize> {
        self.manifest.sensors.get(&view).copied()
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }
}
