//! Where probe samples come from: a serial device, a replay file, or the
//! UI's virtual probe.

use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use echosim_core::telemetry::{parse_line, scripted_device, ScriptStep};
use echosim_core::ProbeSample;
use log::warn;
use serde::Deserialize;
use thiserror::Error;

use crate::io::{read_bytes, LoadError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TelemetrySource {
    Serial(PathBuf),
    Replay(PathBuf),
    Virtual,
}

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("telemetry source {0:?}: expected serial:<device>, replay:<file> or virtual")]
    Syntax(String),
    #[error("replay {}: {reason}", path.display())]
    BadReplay { path: PathBuf, reason: String },
    #[error(transparent)]
    Load(#[from] LoadError),
}

impl FromStr for TelemetrySource {
    type Err = SourceError;
    fn from_str(s: &str) -> Result<Self, SourceError> {
        match s.split_once(':') {
            _ if s == "virtual" => Ok(TelemetrySource::Virtual),
            Some(("serial", dev)) if !dev.is_empty() => Ok(TelemetrySource::Serial(dev.into())),
            Some(("replay", file)) if !file.is_empty() => Ok(TelemetrySource::Replay(file.into())),
            _ => Err(SourceError::Syntax(s.to_owned())),
        }
    }
}

impl fmt::Display for TelemetrySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TelemetrySource::Serial(p) => write!(f, "serial:{}", p.display()),
            TelemetrySource::Replay(p) => write!(f, "replay:{}", p.display()),
            TelemetrySource::Virtual => f.write_str("virtual"),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptFile {
    Steps(Vec<ScriptStep>),
    Wrapped { steps: Vec<ScriptStep> },
}

/// Parses a JSON step script.
pub fn parse_script(text: &str) -> Result<Vec<ScriptStep>, String> {
    let steps = match serde_json::from_str::<ScriptFile>(text).map_err(|e| e.to_string())? {
        ScriptFile::Steps(s) | ScriptFile::Wrapped { steps: s } => s,
    };
    if steps.is_empty() {
        return Err("script has no steps".into());
    }
    if let Some(s) = steps.iter().find(|s| !(s.duration_ms >= 0.0 && s.duration_ms.is_finite())) {
        return Err(format!("bad step duration {}", s.duration_ms));
    }
    Ok(steps)
}

pub fn read_script(path: &Path) -> Result<Vec<ScriptStep>, SourceError> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8_lossy(&bytes);
    parse_script(&text).map_err(|reason| SourceError::BadReplay { path: path.to_owned(), reason })
}

/// Loads a replay: a JSON step script expanded at 50 Hz, or recorded
/// protocol lines (malformed lines are skipped with a warning).
pub fn read_replay(path: &Path) -> Result<Vec<ProbeSample>, SourceError> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8_lossy(&bytes);
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') || trimmed.starts_with('{') {
        let steps = parse_script(&text).map_err(|reason| SourceError::BadReplay { path: path.to_owned(), reason })?;
        let device = scripted_device(steps).map_err(|e| SourceError::BadReplay { path: path.to_owned(), reason: e.to_string() })?;
        return Ok(device.collect());
    }
    let samples: Vec<ProbeSample> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .filter_map(|(i, l)| match parse_line(l) {
            Ok(s) => Some(s),
            Err(e) => {
                warn!("{}:{}: {e}", path.display(), i + 1);
                None
            }
        })
        .collect();
    if samples.is_empty() {
        return Err(SourceError::BadReplay { path: path.to_owned(), reason: "no valid samples".into() });
    }
    Ok(samples)
}

/// Blocking line reader over a serial device (configure the port with
/// `stty` beforehand). Calls `sink` per parsed sample until it returns
/// false or the device closes.
pub fn read_serial(dev: &Path, mut sink: impl FnMut(ProbeSample) -> bool) -> Result<(), LoadError> {
    let file = std::fs::File::open(dev).map_err(|e| LoadError::io(dev, e))?;
    let mut reader = BufReader::new(file);
    let mut line = Vec::new();
    loop {
        line.clear();
        let n = reader.read_until(b'\n', &mut line).map_err(|e| LoadError::io(dev, e))?;
        if n == 0 {
            return Ok(());
        }
        match echosim_core::telemetry::parse_line_bytes(&line) {
            Ok(s) => {
                if !sink(s) {
                    return Ok(());
                }
            }
            Err(e) => warn!("{}: {e}", dev.display()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn source_syntax() {
        assert_eq!("virtual".parse::<TelemetrySource>().unwrap(), TelemetrySource::Virtual);
        assert_eq!(
            "serial:/dev/ttyUSB0".parse::<TelemetrySource>().unwrap(),
            TelemetrySource::Serial("/dev/ttyUSB0".into())
        );
        assert_eq!("replay:a.json".parse::<TelemetrySource>().unwrap(), TelemetrySource::Replay("a.json".into()));
        assert!("replay:".parse::<TelemetrySource>().is_err());
        assert!("usb".parse::<TelemetrySource>().is_err());
    }

    #[test]
    fn scripts() {
        let s = parse_script(r#"[{"duration_ms":100,"yaw":90,"pitch":0,"hall":[700,512,512,512,512]}]"#).unwrap();
        assert_eq!(s[0].roll, 0.0);
        assert!(parse_script(r#"{"steps":[]}"#).is_err());
        assert!(parse_script("[").is_err());
    }
}
