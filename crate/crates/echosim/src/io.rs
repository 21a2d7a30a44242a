//! Volume files on disk and PGM export.

use std::fs;
use std::path::{Path, PathBuf};

use echosim_core::nrrd::{decode_payload, parse_header, ParseOptions};
use echosim_core::{SliceImage, VolumeError, VolumeSequence};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Volume { path: PathBuf, source: VolumeError },
    #[error("no volume files given")]
    NoFiles,
}

impl LoadError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        LoadError::Io { path: path.to_owned(), source }
    }

    fn volume(path: &Path, source: VolumeError) -> Self {
        LoadError::Volume { path: path.to_owned(), source }
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, LoadError> {
    fs::read(path).map_err(|e| LoadError::io(path, e))
}

/// Reads an NRRD file, following a detached `data file` relative to it.
pub fn read_nrrd(path: &Path) -> Result<VolumeSequence, LoadError> {
    let bytes = read_bytes(path)?;
    let (header, offset) = parse_header(&bytes).map_err(|e| LoadError::volume(path, e))?;
    let opts = ParseOptions::default();
    match &header.data_file {
        None => decode_payload(&header, &bytes[offset..], &opts).map_err(|e| LoadError::volume(path, e)),
        Some(name) => {
            let data_path = path.parent().unwrap_or(Path::new(".")).join(name);
            let payload = read_bytes(&data_path)?;
            decode_payload(&header, &payload, &opts).map_err(|e| LoadError::volume(&data_path, e))
        }
    }
}

/// Stacks single-timepoint files into one sequence, in the given order.
pub fn load_frame_directory(paths: &[PathBuf]) -> Result<VolumeSequence, LoadError> {
    let first = paths.first().ok_or(LoadError::NoFiles)?;
    let mut frames = Vec::with_capacity(paths.len());
    let mut period = None;
    for path in paths {
        let seq = read_nrrd(path)?;
        period.get_or_insert(seq.frame_period_ms());
        frames.extend(seq.into_frames());
    }
    VolumeSequence::new(frames, period.unwrap_or(echosim_core::volume::DEFAULT_FRAME_PERIOD_MS))
        .map_err(|e| LoadError::volume(first, e))
}

/// `*.nrrd` / `*.nhdr` files of a directory in lexical order.
pub fn list_volume_files(dir: &Path) -> Result<Vec<PathBuf>, LoadError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| LoadError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("nrrd" | "nhdr")))
        .collect();
    paths.sort();
    Ok(paths)
}

/// A 4D file, or a directory of 3D files treated as timepoints.
pub fn load_volume(path: &Path) -> Result<VolumeSequence, LoadError> {
    if path.is_dir() {
        load_frame_directory(&list_volume_files(path)?)
    } else {
        read_nrrd(path)
    }
}

/// Binary PGM (P5, maxval 255).
pub fn encode_pgm(img: &SliceImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), LoadError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| LoadError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| LoadError::io(path, e))
}
