//! Probe telemetry: the serial line protocol, orientation calibration,
//! hall-sensor contact thresholding and a scripted stand-in device.
//!
//! Wire grammar, one sample per line:
//!
//! ```text
//! T,<seq>,<yaw>,<pitch>,<roll>,<h1>,<h2>,<h3>,<h4>,<h5>\n
//! ```
//!
//! Angles are degrees written with two decimals; `h1..h5` are raw 10-bit
//! ADC readings (0..=1023) from the five hall sensors.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const HALL_CHANNELS: usize = 5;
pub const ADC_MAX: u16 = 1023;
pub const DEFAULT_SAMPLE_HZ: f64 = 50.0;
pub const DEFAULT_CALIBRATION_WINDOW_S: f64 = 20.0;
pub const DEFAULT_STILLNESS_TOL_DEG: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TelemetryError {
    #[error("malformed telemetry line: {0}")]
    MalformedLine(String),
    #[error("probe moved during calibration ({axis} std dev {std_dev_deg:.3} deg)")]
    NotStill { axis: &'static str, std_dev_deg: f64 },
    #[error("calibration needs at least 2 samples in the window, got {found}")]
    InsufficientSamples { found: usize },
    #[error("device script is empty")]
    EmptyScript,
}

/// One raw reading from the probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSample {
    pub seq: u64,
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
    pub hall_raw: [u16; HALL_CHANNELS],
}

impl ProbeSample {
    pub fn new(seq: u64, yaw_deg: f64, pitch_deg: f64, roll_deg: f64, hall_raw: [u16; HALL_CHANNELS]) -> Self {
        Self { seq, yaw_deg, pitch_deg, roll_deg, hall_raw }
    }
}

fn malformed(msg: impl Into<String>) -> TelemetryError {
    TelemetryError::MalformedLine(msg.into())
}

/// Parses one protocol line. Trailing whitespace (including `\r\n`) is
/// ignored; anything else off-grammar is [`TelemetryError::MalformedLine`].
pub fn parse_line(line: &str) -> Result<ProbeSample, TelemetryError> {
    let line = line.trim_end();
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 5 + HALL_CHANNELS {
        return Err(malformed(alloc::format!("expected {} fields, got {}", 5 + HALL_CHANNELS, fields.len())));
    }
    if fields[0] != "T" {
        return Err(malformed("line must start with 'T'"));
    }
    let seq = fields[1].parse::<u64>().map_err(|_| malformed(alloc::format!("bad seq {:?}", fields[1])))?;
    let angle = |s: &str| {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| malformed(alloc::format!("bad angle {s:?}")))
    };
    let (yaw_deg, pitch_deg, roll_deg) = (angle(fields[2])?, angle(fields[3])?, angle(fields[4])?);
    let mut hall_raw = [0u16; HALL_CHANNELS];
    for (slot, s) in hall_raw.iter_mut().zip(&fields[5..]) {
        *slot = s
            .parse::<u16>()
            .ok()
            .filter(|&v| v <= ADC_MAX)
            .ok_or_else(|| malformed(alloc::format!("bad hall reading {s:?}")))?;
    }
    Ok(ProbeSample { seq, yaw_deg, pitch_deg, roll_deg, hall_raw })
}

/// [`parse_line`] over raw bytes from a serial stream.
pub fn parse_line_bytes(line: &[u8]) -> Result<ProbeSample, TelemetryError> {
    let s = core::str::from_utf8(line).map_err(|_| malformed("not UTF-8"))?;
    parse_line(s)
}

/// Canonical encoding of a sample, without the trailing newline.
pub fn format_line(s: &ProbeSample) -> String {
    let mut out = String::with_capacity(48);
    let _ = write!(out, "T,{},{:.2},{:.2},{:.2}", s.seq, s.yaw_deg, s.pitch_deg, s.roll_deg);
    for h in s.hall_raw {
        let _ = write!(out, ",{h}");
    }
    out
}

/// Wraps an angle into `(-180, 180]`.
pub fn wrap_deg(x: f64) -> f64 {
    let r = libm::fmod(x, 360.0);
    let r = if r < 0.0 { r + 360.0 } else { r };
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub window_s: f64,
    pub stillness_tol_deg: f64,
    /// Nominal device rate; converts `seq` distance into elapsed time.
    pub sample_hz: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            window_s: DEFAULT_CALIBRATION_WINDOW_S,
            stillness_tol_deg: DEFAULT_STILLNESS_TOL_DEG,
            sample_hz: DEFAULT_SAMPLE_HZ,
        }
    }
}

/// Orientation offsets captured with the probe held still and vertical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub yaw_off: f64,
    pub pitch_off: f64,
    pub roll_off: f64,
    pub window_s: f64,
}

impl Calibration {
    pub fn identity() -> Self {
        Self { yaw_off: 0.0, pitch_off: 0.0, roll_off: 0.0, window_s: DEFAULT_CALIBRATION_WINDOW_S }
    }
}

impl Default for Calibration {
    fn default() -> Self {
        Self::identity()
    }
}

/// Circular mean and spread of angles, measured around the first one.
fn angle_stats(values: &[f64]) -> (f64, f64) {
    let reference = values[0];
    let n = values.len() as f64;
    let devs: Vec<f64> = values.iter().map(|&v| wrap_deg(v - reference)).collect();
    let mean = devs.iter().sum::<f64>() / n;
    let var = devs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    (wrap_deg(reference + mean), libm::sqrt(var))
}

/// Averages orientation over the first `window_s` of the stream.
///
/// Fails with [`TelemetryError::NotStill`] when any axis spreads by more
/// than `stillness_tol_deg` (population standard deviation).
pub fn calibrate(
    samples: impl IntoIterator<Item = ProbeSample>,
    cfg: &CalibrationConfig,
) -> Result<Calibration, TelemetryError> {
    let mut it = samples.into_iter();
    let Some(first) = it.next() else {
        return Err(TelemetryError::InsufficientSamples { found: 0 });
    };
    let window_samples = cfg.window_s * cfg.sample_hz;
    let mut yaw = alloc::vec![first.yaw_deg];
    let mut pitch = alloc::vec![first.pitch_deg];
    let mut roll = alloc::vec![first.roll_deg];
    for s in it {
        if s.seq.saturating_sub(first.seq) as f64 >= window_samples {
            break;
        }
        yaw.push(s.yaw_deg);
        pitch.push(s.pitch_deg);
        roll.push(s.roll_deg);
    }
    if yaw.len() < 2 {
        return Err(TelemetryError::InsufficientSamples { found: yaw.len() });
    }
    let mut offsets = [0.0; 3];
    for (i, (axis, values)) in [("yaw", &yaw), ("pitch", &pitch), ("roll", &roll)].into_iter().enumerate() {
        let (mean, sd) = angle_stats(values);
        if sd > cfg.stillness_tol_deg {
            return Err(TelemetryError::NotStill { axis, std_dev_deg: sd });
        }
        offsets[i] = mean;
    }
    Ok(Calibration { yaw_off: offsets[0], pitch_off: offsets[1], roll_off: offsets[2], window_s: cfg.window_s })
}

/// Bipolar hall threshold: contact when a reading departs from `baseline`
/// by at least `delta` in either direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HallConfig {
    pub baseline: u16,
    pub delta: u16,
}

impl Default for HallConfig {
    fn default() -> Self {
        Self { baseline: 512, delta: 100 }
    }
}

impl HallConfig {
    pub fn contact(&self, raw: u16) -> bool {
        (raw as i32 - self.baseline as i32).unsigned_abs() >= self.delta as u32
    }
}

/// Calibrated orientation plus per-sensor contact flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbePose {
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
    pub contacts: [bool; HALL_CHANNELS],
}

impl ProbePose {
    /// Pose from already-calibrated angles; angles are wrapped.
    pub fn new(yaw_deg: f64, pitch_deg: f64, roll_deg: f64, contacts: [bool; HALL_CHANNELS]) -> Self {
        Self { yaw_deg: wrap_deg(yaw_deg), pitch_deg: wrap_deg(pitch_deg), roll_deg: wrap_deg(roll_deg), contacts }
    }

    /// Tilt away from the skin normal; the probe is calibrated vertical.
    pub fn tilt_deg(&self) -> f64 {
        libm::fabs(self.pitch_deg)
    }

    pub fn any_contact(&self) -> bool {
        self.contacts.iter().any(|&c| c)
    }
}

pub fn to_pose(s: &ProbeSample, cal: &Calibration, hall: &HallConfig) -> ProbePose {
    let mut contacts = [false; HALL_CHANNELS];
    for (c, &raw) in contacts.iter_mut().zip(&s.hall_raw) {
        *c = hall.contact(raw);
    }
    ProbePose::new(s.yaw_deg - cal.yaw_off, s.pitch_deg - cal.pitch_off, s.roll_deg - cal.roll_off, contacts)
}

/// Flags `seq` discontinuities in a sample stream.
#[derive(Debug, Clone, Copy, Default)]
pub struct SeqMonitor {
    last: Option<u64>,
    dropped: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeqGap {
    pub expected: u64,
    pub got: u64,
}

impl SeqMonitor {
    /// Records `seq`; returns the gap when samples went missing.
    pub fn observe(&mut self, seq: u64) -> Option<SeqGap> {
        let gap = match self.last {
            Some(prev) if seq > prev && seq - prev > 1 => {
                self.dropped += seq - prev - 1;
                Some(SeqGap { expected: prev + 1, got: seq })
            }
            _ => None,
        };
        self.last = Some(seq);
        gap
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}

/// One step of a device script: hold this reading for `duration_ms`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptStep {
    pub duration_ms: f64,
    pub yaw: f64,
    pub pitch: f64,
    #[serde(default)]
    pub roll: f64,
    pub hall: [u16; HALL_CHANNELS],
}

impl ScriptStep {
    fn sample(&self, seq: u64) -> ProbeSample {
        ProbeSample { seq, yaw_deg: self.yaw, pitch_deg: self.pitch, roll_deg: self.roll, hall_raw: self.hall }
    }

    fn sample_count(&self, rate_hz: f64) -> u64 {
        let n = self.duration_ms * rate_hz / 1000.0 + 1e-9;
        if n > 0.0 { libm::floor(n) as u64 } else { 0 }
    }
}

/// Emits a script as a fixed-rate sample stream with `seq` counting from 0.
#[derive(Debug, Clone)]
pub struct ScriptedDevice {
    steps: Vec<ScriptStep>,
    rate_hz: f64,
    step: usize,
    emitted_in_step: u64,
    seq: u64,
}

impl ScriptedDevice {
    pub fn new(steps: Vec<ScriptStep>, rate_hz: f64) -> Result<Self, TelemetryError> {
        if steps.is_empty() {
            return Err(TelemetryError::EmptyScript);
        }
        Ok(Self { steps, rate_hz, step: 0, emitted_in_step: 0, seq: 0 })
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    /// Milliseconds between consecutive samples.
    pub fn period_ms(&self) -> f64 {
        1000.0 / self.rate_hz
    }
}

impl Iterator for ScriptedDevice {
    type Item = ProbeSample;

    fn next(&mut self) -> Option<ProbeSample> {
        loop {
            let step = self.steps.get(self.step)?;
            if self.emitted_in_step < step.sample_count(self.rate_hz) {
                self.emitted_in_step += 1;
                let s = step.sample(self.seq);
                self.seq += 1;
                return Some(s);
            }
            self.step += 1;
            self.emitted_in_step = 0;
        }
    }
}

/// Scripted stream at the default 50 Hz.
pub fn scripted_device(script: Vec<ScriptStep>) -> Result<ScriptedDevice, TelemetryError> {
    ScriptedDevice::new(script, DEFAULT_SAMPLE_HZ)
}
