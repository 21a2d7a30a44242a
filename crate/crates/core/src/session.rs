//! The staged training state machine.
//!
//! A hands-on attempt targets one [`ViewSpec`] and advances through three
//! stages, each requiring all earlier predicates to hold at once:
//!
//! 1. the probe rests on the target hall sensor and no other,
//! 2. the notch yaw matches the view's clock direction within tolerance,
//! 3. the tilt lands in the band for the target variant, held for a dwell
//!    time, which completes the attempt.
//!
//! The displayed stage (`stage_max`) is a ratchet: it never falls back
//! within an attempt. Every ratchet step appends exactly one feedback event.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::telemetry::{wrap_deg, ProbePose, HALL_CHANNELS};

pub const DEFAULT_TOL_DEG: f64 = 5.0;
pub const DEFAULT_DWELL_MS: f64 = 500.0;
/// Tilt below this reads as "probe upright" and draws no tilt feedback.
pub const DEFAULT_TILT_DEADBAND_DEG: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("{what} out of range: {value}")]
    OutOfRange { what: &'static str, value: String },
    #[error("invalid view spec: {0}")]
    InvalidSpec(String),
    #[error("unknown {what} {value:?}")]
    Unknown { what: &'static str, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Apical,
    Plax,
    Psax,
    Subcostal,
    Suprasternal,
}

impl View {
    pub const ALL: [View; 5] = [View::Apical, View::Plax, View::Psax, View::Subcostal, View::Suprasternal];

    /// Lower-case identifier used in keys, file names and the CLI.
    pub fn key(self) -> &'static str {
        match self {
            View::Apical => "apical",
            View::Plax => "plax",
            View::Psax => "psax",
            View::Subcostal => "subcostal",
            View::Suprasternal => "suprasternal",
        }
    }

    /// Name as shown to trainees.
    pub fn label(self) -> &'static str {
        match self {
            View::Apical => "Apical",
            View::Plax => "PLAX",
            View::Psax => "PSAX",
            View::Subcostal => "Subcostal",
            View::Suprasternal => "Suprasternal",
        }
    }

    /// Default hall sensor for the view's acoustic window.
    pub fn default_sensor(self) -> usize {
        self as usize
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for View {
    type Err = SessionError;
    fn from_str(s: &str) -> Result<Self, SessionError> {
        View::ALL
            .into_iter()
            .find(|v| v.key().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| SessionError::Unknown { what: "view", value: s.to_string() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Normal,
    Tilt,
}

impl Variant {
    pub fn key(self) -> &'static str {
        match self {
            Variant::Normal => "normal",
            Variant::Tilt => "tilt",
        }
    }

    /// Tilt class that satisfies the third stage for this variant.
    pub fn target_class(self) -> TiltClass {
        match self {
            Variant::Normal => TiltClass::NormalView,
            Variant::Tilt => TiltClass::TiltView,
        }
    }
}

impl FromStr for Variant {
    type Err = SessionError;
    fn from_str(s: &str) -> Result<Self, SessionError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" => Ok(Variant::Normal),
            "tilt" => Ok(Variant::Tilt),
            _ => Err(SessionError::Unknown { what: "variant", value: s.to_string() }),
        }
    }
}

/// One acquisition target: where to place the probe, where the notch
/// points, and the tilt band of the tilted variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewSpec {
    pub view: View,
    pub variant: Variant,
    pub notch_clock: u8,
    pub tilt_lo_deg: f64,
    pub tilt_hi_deg: f64,
    pub sensor_index: usize,
}

impl ViewSpec {
    pub fn validate(&self) -> Result<(), SessionError> {
        if !(1..=12).contains(&self.notch_clock) {
            return Err(SessionError::InvalidSpec(alloc::format!("notch clock {} not in 1..=12", self.notch_clock)));
        }
        if self.tilt_lo_deg >= self.tilt_hi_deg || !self.tilt_lo_deg.is_finite() || !self.tilt_hi_deg.is_finite() {
            return Err(SessionError::InvalidSpec(alloc::format!(
                "tilt range {}..{} is empty",
                self.tilt_lo_deg,
                self.tilt_hi_deg
            )));
        }
        if self.sensor_index >= HALL_CHANNELS {
            return Err(SessionError::InvalidSpec(alloc::format!("sensor index {}", self.sensor_index)));
        }
        Ok(())
    }

    /// `"apical:tilt"` style target name.
    pub fn target_name(&self) -> String {
        alloc::format!("{}:{}", self.view.key(), self.variant.key())
    }
}

/// Notch direction (clock hour) and tilt range per view, as taught.
pub const VIEW_TABLE: [(View, u8, f64, f64); 5] = [
    (View::Apical, 3, 5.0, 10.0),
    (View::Plax, 11, 5.0, 10.0),
    (View::Psax, 1, 5.0, 10.0),
    (View::Subcostal, 3, 40.0, 45.0),
    (View::Suprasternal, 1, 5.0, 10.0),
];

/// Built-in spec for a view/variant pair.
pub fn view_spec(view: View, variant: Variant) -> ViewSpec {
    let (_, notch_clock, lo, hi) = VIEW_TABLE[view as usize];
    ViewSpec { view, variant, notch_clock, tilt_lo_deg: lo, tilt_hi_deg: hi, sensor_index: view.default_sensor() }
}

/// All ten built-in targets (five views, normal and tilt).
pub fn default_specs() -> Vec<ViewSpec> {
    View::ALL
        .iter()
        .flat_map(|&v| [view_spec(v, Variant::Normal), view_spec(v, Variant::Tilt)])
        .collect()
}

/// Parses `"<view>:<variant>"` (variant defaults to `normal`).
pub fn parse_target(s: &str) -> Result<(View, Variant), SessionError> {
    let (v, var) = s.split_once(':').unwrap_or((s, "normal"));
    Ok((v.parse()?, var.parse()?))
}

/// A loadable set of view specs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewTable {
    pub specs: Vec<ViewSpec>,
}

impl Default for ViewTable {
    fn default() -> Self {
        Self { specs: default_specs() }
    }
}

impl ViewTable {
    pub fn validate(&self) -> Result<(), SessionError> {
        self.specs.iter().try_for_each(ViewSpec::validate)
    }

    pub fn get(&self, view: View, variant: Variant) -> Option<&ViewSpec> {
        self.specs.iter().find(|s| s.view == view && s.variant == variant)
    }
}

/// Clock hour to degrees clockwise from 12 o'clock.
pub fn clock_to_deg(hour: u8) -> Result<f64, SessionError> {
    if !(1..=12).contains(&hour) {
        return Err(SessionError::OutOfRange { what: "clock hour", value: hour.to_string() });
    }
    Ok((hour % 12) as f64 * 30.0)
}

/// The target sensor is in contact and no other is.
pub fn location_ok(pose: &ProbePose, spec: &ViewSpec) -> bool {
    pose.contacts.iter().enumerate().all(|(i, &c)| c == (i == spec.sensor_index))
}

pub fn notch_error_deg(pose: &ProbePose, spec: &ViewSpec) -> f64 {
    let target = clock_to_deg(spec.notch_clock).unwrap_or(0.0);
    wrap_deg(pose.yaw_deg - target)
}

pub fn notch_ok(pose: &ProbePose, spec: &ViewSpec, tol_deg: f64) -> bool {
    libm::fabs(notch_error_deg(pose, spec)) <= tol_deg
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiltClass {
    NormalView,
    Undershot,
    TiltView,
    Overshot,
}

impl TiltClass {
    pub const ALL: [TiltClass; 4] = [TiltClass::NormalView, TiltClass::Undershot, TiltClass::TiltView, TiltClass::Overshot];

    pub fn key(self) -> &'static str {
        match self {
            TiltClass::NormalView => "normal_view",
            TiltClass::Undershot => "undershot",
            TiltClass::TiltView => "tilt_view",
            TiltClass::Overshot => "overshot",
        }
    }

    /// Classes to try, in order, when looking up a clip for this class.
    /// Off-target clips are optional and fall back to the nearer view.
    pub fn fallbacks(self) -> &'static [TiltClass] {
        use TiltClass::*;
        match self {
            NormalView => &[NormalView, TiltView],
            TiltView => &[TiltView, NormalView],
            Undershot => &[Undershot, NormalView, TiltView],
            Overshot => &[Overshot, TiltView, NormalView],
        }
    }
}

impl FromStr for TiltClass {
    type Err = SessionError;
    fn from_str(s: &str) -> Result<Self, SessionError> {
        TiltClass::ALL
            .into_iter()
            .find(|c| c.key() == s.trim())
            .ok_or_else(|| SessionError::Unknown { what: "tilt class", value: s.to_string() })
    }
}

/// Classifies a tilt magnitude against a spec. First match wins, in the
/// order normal (|tilt| within tolerance), undershot, tilt band, overshot.
pub fn classify_tilt(tilt_deg: f64, spec: &ViewSpec, tol_deg: f64) -> TiltClass {
    let t = libm::fabs(tilt_deg);
    if t <= tol_deg {
        TiltClass::NormalView
    } else if t < spec.tilt_lo_deg {
        TiltClass::Undershot
    } else if t <= spec.tilt_hi_deg {
        TiltClass::TiltView
    } else {
        TiltClass::Overshot
    }
}

/// Identifies one preloaded clip. Serialised as `"view:class"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AssetKey {
    pub view: View,
    pub class: TiltClass,
}

impl fmt::Display for AssetKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.view.key(), self.class.key())
    }
}

impl From<AssetKey> for String {
    fn from(k: AssetKey) -> String {
        k.to_string()
    }
}

impl TryFrom<String> for AssetKey {
    type Error = SessionError;
    fn try_from(s: String) -> Result<Self, SessionError> {
        s.parse()
    }
}

impl FromStr for AssetKey {
    type Err = SessionError;
    fn from_str(s: &str) -> Result<Self, SessionError> {
        let (v, c) = s
            .split_once(':')
            .ok_or_else(|| SessionError::Unknown { what: "asset key", value: s.to_string() })?;
        Ok(AssetKey { view: v.parse()?, class: c.parse()? })
    }
}

/// Which clip to show, if any: nothing until the probe is on the right
/// window with the notch aligned.
pub fn select_visualization(target: &ViewSpec, pose: &ProbePose, tol_deg: f64) -> Option<AssetKey> {
    (location_ok(pose, target) && notch_ok(pose, target, tol_deg))
        .then(|| AssetKey { view: target.view, class: classify_tilt(pose.tilt_deg(), target, tol_deg) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FeedbackEvent {
    WrongLocation,
    LocationOk,
    NotchOk,
    TiltUndershot,
    TiltOvershot,
    ViewAcquired,
}

impl FeedbackEvent {
    pub fn code(self) -> &'static str {
        match self {
            FeedbackEvent::WrongLocation => "WRONG_LOCATION",
            FeedbackEvent::LocationOk => "LOCATION_OK",
            FeedbackEvent::NotchOk => "NOTCH_OK",
            FeedbackEvent::TiltUndershot => "TILT_UNDERSHOT",
            FeedbackEvent::TiltOvershot => "TILT_OVERSHOT",
            FeedbackEvent::ViewAcquired => "VIEW_ACQUIRED",
        }
    }

    fn for_stage(stage: u8) -> FeedbackEvent {
        match stage {
            1 => FeedbackEvent::LocationOk,
            2 => FeedbackEvent::NotchOk,
            _ => FeedbackEvent::ViewAcquired,
        }
    }
}

impl fmt::Display for FeedbackEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEntry {
    /// Session clock when the event fired.
    pub t_ms: f64,
    pub event: FeedbackEvent,
    /// Displayed stage after the event.
    pub stage: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub tol_deg: f64,
    pub dwell_ms: f64,
    pub tilt_deadband_deg: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self { tol_deg: DEFAULT_TOL_DEG, dwell_ms: DEFAULT_DWELL_MS, tilt_deadband_deg: DEFAULT_TILT_DEADBAND_DEG }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    /// 1 = quiz, 2 = hands-on.
    pub level: u8,
    pub target: ViewSpec,
    /// Stage implied by the latest pose alone.
    pub stage: u8,
    /// Highest stage reached this attempt; what the status bar shows.
    pub stage_max: u8,
    pub dwell_ms_accum: f64,
    pub tilt_class: TiltClass,
    pub completed: bool,
    pub feedback: Vec<FeedbackEntry>,
    /// Session clock, advanced by every step.
    pub t_ms: f64,
    pub attempt: u32,
    #[serde(skip)]
    wrong_location: bool,
    #[serde(skip)]
    tilt_zone: Option<FeedbackEvent>,
}

impl SessionState {
    pub fn new(target: ViewSpec) -> Self {
        Self {
            level: 2,
            target,
            stage: 0,
            stage_max: 0,
            dwell_ms_accum: 0.0,
            tilt_class: TiltClass::NormalView,
            completed: false,
            feedback: Vec::new(),
            t_ms: 0.0,
            attempt: 0,
            wrong_location: false,
            tilt_zone: None,
        }
    }

    pub fn events(&self) -> impl Iterator<Item = FeedbackEvent> + '_ {
        self.feedback.iter().map(|e| e.event)
    }
}

/// What one [`Session::step`] changed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutcome {
    pub events: Vec<FeedbackEvent>,
    /// Stage, stage ceiling, tilt class or completion changed.
    pub changed: bool,
}

/// Tilt feedback zone for the current target, independent of the
/// visualisation class: a tilt target reports undershoot for any real
/// tilt short of its band, a normal target reports overshoot past the
/// tolerance.
fn tilt_zone(tilt: f64, spec: &ViewSpec, cfg: &SessionConfig) -> Option<FeedbackEvent> {
    match spec.variant {
        Variant::Normal => (tilt > cfg.tol_deg).then_some(FeedbackEvent::TiltOvershot),
        Variant::Tilt if tilt <= cfg.tilt_deadband_deg => None,
        Variant::Tilt if tilt < spec.tilt_lo_deg => Some(FeedbackEvent::TiltUndershot),
        Variant::Tilt if tilt > spec.tilt_hi_deg => Some(FeedbackEvent::TiltOvershot),
        Variant::Tilt => None,
    }
}

/// Single-writer session engine.
#[derive(Debug, Clone)]
pub struct Session {
    config: SessionConfig,
    state: SessionState,
}

impl Session {
    pub fn new(target: ViewSpec, config: SessionConfig) -> Self {
        Self { config, state: SessionState::new(target) }
    }

    pub fn from_state(state: SessionState, config: SessionConfig) -> Self {
        Self { config, state }
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn into_state(self) -> SessionState {
        self.state
    }

    /// Starts a fresh attempt on the same target. The feedback log is kept.
    pub fn reset_attempt(&mut self) {
        let s = &mut self.state;
        s.stage = 0;
        s.stage_max = 0;
        s.dwell_ms_accum = 0.0;
        s.tilt_class = TiltClass::NormalView;
        s.completed = false;
        s.attempt += 1;
        s.wrong_location = false;
        s.tilt_zone = None;
    }

    /// Switches target (entering hands-on mode) and starts a fresh attempt.
    pub fn select_target(&mut self, target: ViewSpec) {
        self.state.target = target;
        self.state.level = 2;
        self.reset_attempt();
    }

    pub fn set_level(&mut self, level: u8) {
        self.state.level = level;
    }

    pub fn select_visualization(&self, pose: &ProbePose) -> Option<AssetKey> {
        select_visualization(&self.state.target, pose, self.config.tol_deg)
    }

    fn log(&mut self, event: FeedbackEvent, out: &mut Vec<FeedbackEvent>) {
        self.state.feedback.push(FeedbackEntry { t_ms: self.state.t_ms, event, stage: self.state.stage_max });
        out.push(event);
    }

    /// Applies one calibrated pose that was held for `dt_ms`.
    pub fn step(&mut self, pose: &ProbePose, dt_ms: f64) -> StepOutcome {
        let mut out = StepOutcome::default();
        if self.state.level != 2 {
            return out;
        }
        let cfg = self.config;
        let target = self.state.target;
        let before = (self.state.stage, self.state.stage_max, self.state.tilt_class, self.state.completed);
        self.state.t_ms += dt_ms;

        let loc = location_ok(pose, &target);
        let notch = loc && notch_ok(pose, &target, cfg.tol_deg);
        let tilt = pose.tilt_deg();
        let class = classify_tilt(tilt, &target, cfg.tol_deg);
        let all = notch && class == target.variant.target_class();
        self.state.stage = loc as u8 + notch as u8 + all as u8;
        self.state.tilt_class = class;
        self.state.dwell_ms_accum = if all { self.state.dwell_ms_accum + dt_ms } else { 0.0 };

        let wrong = pose.any_contact() && !loc;
        if wrong && !self.state.wrong_location {
            self.log(FeedbackEvent::WrongLocation, &mut out.events);
        }
        self.state.wrong_location = wrong;

        if all && !self.state.completed && self.state.dwell_ms_accum + 1e-9 >= cfg.dwell_ms {
            self.state.completed = true;
        }
        let reached = if self.state.completed { 3 } else { self.state.stage.min(2) };
        while self.state.stage_max < reached {
            self.state.stage_max += 1;
            self.log(FeedbackEvent::for_stage(self.state.stage_max), &mut out.events);
        }

        let zone = if notch { tilt_zone(tilt, &target, &cfg) } else { None };
        if zone.is_some() && zone != self.state.tilt_zone {
            self.log(zone.unwrap_or(FeedbackEvent::TiltUndershot), &mut out.events);
        }
        self.state.tilt_zone = zone;

        let after = (self.state.stage, self.state.stage_max, self.state.tilt_class, self.state.completed);
        out.changed = before != after || !out.events.is_empty();
        out
    }
}

/// Functional form of [`Session::step`].
pub fn step(state: &SessionState, pose: &ProbePose, dt_ms: f64, config: &SessionConfig) -> SessionState {
    let mut s = Session::from_state(state.clone(), *config);
    s.step(pose, dt_ms);
    s.into_state()
}

/// A multiple-choice question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizItem {
    pub id: String,
    pub prompt: String,
    pub options: Vec<String>,
    pub answer_index: usize,
    /// Shown after answering; cites the relevant view fact.
    pub explanation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view: Option<View>,
}

impl QuizItem {
    pub fn answer(&self) -> Option<&str> {
        self.options.get(self.answer_index).map(String::as_str)
    }
}

/// Grades a choice, returning correctness and the explanation.
pub fn check_answer(item: &QuizItem, choice: usize) -> Result<(bool, &str), SessionError> {
    if choice >= item.options.len() {
        return Err(SessionError::OutOfRange { what: "quiz choice", value: choice.to_string() });
    }
    Ok((choice == item.answer_index, item.explanation.as_str()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn contacts(on: &[usize]) -> [bool; 5] {
        let mut c = [false; 5];
        for &i in on {
            c[i] = true;
        }
        c
    }

    fn pose(yaw: f64, pitch: f64, on: &[usize]) -> ProbePose {
        ProbePose::new(yaw, pitch, 0.0, contacts(on))
    }

    #[test]
    fn clock_mapping() {
        assert_eq!(clock_to_deg(12).unwrap(), 0.0);
        assert_eq!(clock_to_deg(3).unwrap(), 90.0);
        assert_eq!(clock_to_deg(11).unwrap(), 330.0);
        assert!(clock_to_deg(0).is_err());
        assert!(clock_to_deg(13).is_err());
    }

    #[test]
    fn table_rows() {
        let a = view_spec(View::Apical, Variant::Tilt);
        assert_eq!((a.notch_clock, a.tilt_lo_deg, a.tilt_hi_deg), (3, 5.0, 10.0));
        let p = view_spec(View::Plax, Variant::Normal);
        assert_eq!(p.notch_clock, 11);
        let s = view_spec(View::Subcostal, Variant::Tilt);
        assert_eq!((s.notch_clock, s.tilt_lo_deg, s.tilt_hi_deg), (3, 40.0, 45.0));
        assert_eq!(view_spec(View::Psax, Variant::Tilt).notch_clock, 1);
        assert_eq!(view_spec(View::Suprasternal, Variant::Tilt).notch_clock, 1);
        assert_eq!(default_specs().len(), 10);
        assert!(ViewTable::default().validate().is_ok());
    }

    #[test]
    fn location_predicate() {
        let spec = ViewSpec { sensor_index: 2, ..view_spec(View::Psax, Variant::Normal) };
        assert!(location_ok(&pose(0.0, 0.0, &[2]), &spec));
        assert!(!location_ok(&pose(0.0, 0.0, &[2, 3]), &spec));
        assert!(!location_ok(&pose(0.0, 0.0, &[]), &spec));
    }

    #[test]
    fn notch_predicate() {
        let apical = view_spec(View::Apical, Variant::Normal);
        assert!(notch_ok(&pose(93.0, 0.0, &[0]), &apical, 5.0));
        assert!(!notch_ok(&pose(96.0, 0.0, &[0]), &apical, 5.0));
        let plax = view_spec(View::Plax, Variant::Normal);
        assert!(notch_ok(&pose(-32.0, 0.0, &[1]), &plax, 5.0));
    }

    #[test]
    fn tilt_classes() {
        let apical = view_spec(View::Apical, Variant::Tilt);
        let sub = view_spec(View::Subcostal, Variant::Tilt);
        assert_eq!(classify_tilt(7.0, &apical, 5.0), TiltClass::TiltView);
        assert_eq!(classify_tilt(20.0, &apical, 5.0), TiltClass::Overshot);
        assert_eq!(classify_tilt(25.0, &sub, 5.0), TiltClass::Undershot);
        assert_eq!(classify_tilt(0.0, &sub, 5.0), TiltClass::NormalView);
        assert_eq!(classify_tilt(5.0, &apical, 5.0), TiltClass::NormalView);
        assert_eq!(classify_tilt(10.0, &apical, 5.0), TiltClass::TiltView);
        assert_eq!(classify_tilt(40.0, &sub, 5.0), TiltClass::TiltView);
    }

    #[test]
    fn visualization_gating() {
        let t = view_spec(View::Apical, Variant::Tilt);
        assert_eq!(select_visualization(&t, &pose(90.0, 2.0, &[]), 5.0), None);
        assert_eq!(
            select_visualization(&t, &pose(90.0, 2.0, &[0]), 5.0),
            Some(AssetKey { view: View::Apical, class: TiltClass::NormalView })
        );
        assert_eq!(
            select_visualization(&t, &pose(90.0, 20.0, &[0]), 5.0),
            Some(AssetKey { view: View::Apical, class: TiltClass::Overshot })
        );
        assert_eq!(select_visualization(&t, &pose(120.0, 7.0, &[0]), 5.0), None);
    }

    fn run(session: &mut Session, p: ProbePose, ms: f64) {
        let mut t = 0.0;
        while t + 1e-9 < ms {
            session.step(&p, 20.0);
            t += 20.0;
        }
    }

    #[test]
    fn staged_progression_to_completion() {
        let mut s = Session::new(view_spec(View::Apical, Variant::Tilt), SessionConfig::default());
        run(&mut s, pose(30.0, 0.0, &[0]), 200.0);
        assert_eq!(s.state().stage_max, 1);
        run(&mut s, pose(92.0, 0.0, &[0]), 200.0);
        assert_eq!(s.state().stage_max, 2);
        run(&mut s, pose(92.0, 7.0, &[0]), 480.0);
        assert!(!s.state().completed);
        assert_eq!(s.state().stage, 3);
        assert_eq!(s.state().stage_max, 2);
        run(&mut s, pose(92.0, 7.0, &[0]), 20.0);
        assert!(s.state().completed);
        assert_eq!(s.state().stage_max, 3);
        let events: Vec<_> = s.state().events().collect();
        assert_eq!(events, vec![FeedbackEvent::LocationOk, FeedbackEvent::NotchOk, FeedbackEvent::ViewAcquired]);
    }

    #[test]
    fn wrong_sensor_never_advances() {
        let mut s = Session::new(view_spec(View::Apical, Variant::Tilt), SessionConfig::default());
        run(&mut s, pose(90.0, 7.0, &[3]), 2000.0);
        assert_eq!(s.state().stage_max, 0);
        assert_eq!(s.state().events().collect::<Vec<_>>(), vec![FeedbackEvent::WrongLocation]);
    }

    #[test]
    fn tilt_without_contact_is_stage_zero() {
        let mut s = Session::new(view_spec(View::Apical, Variant::Tilt), SessionConfig::default());
        run(&mut s, pose(90.0, 7.0, &[]), 2000.0);
        assert_eq!(s.state().stage, 0);
        assert!(s.state().feedback.is_empty());
    }

    #[test]
    fn ratchet_holds_and_reset_clears() {
        let mut s = Session::new(view_spec(View::Plax, Variant::Normal), SessionConfig::default());
        run(&mut s, pose(330.0, 0.0, &[1]), 100.0);
        assert_eq!(s.state().stage_max, 2);
        run(&mut s, pose(0.0, 0.0, &[]), 100.0);
        assert_eq!(s.state().stage, 0);
        assert_eq!(s.state().stage_max, 2);
        s.reset_attempt();
        assert_eq!(s.state().stage_max, 0);
        assert_eq!(s.state().attempt, 1);
    }

    #[test]
    fn boundary_tilts_report_under_and_overshoot() {
        let spec = view_spec(View::Apical, Variant::Tilt);
        for (tilt, expected) in [(4.9, FeedbackEvent::TiltUndershot), (10.1, FeedbackEvent::TiltOvershot)] {
            let mut s = Session::new(spec, SessionConfig::default());
            run(&mut s, pose(90.0, 0.0, &[0]), 100.0);
            run(&mut s, pose(90.0, tilt, &[0]), 2000.0);
            assert!(!s.state().completed);
            assert_eq!(s.state().events().last(), Some(expected));
        }
    }

    #[test]
    fn level_one_ignores_poses() {
        let mut s = Session::new(view_spec(View::Apical, Variant::Normal), SessionConfig::default());
        s.set_level(1);
        assert_eq!(s.step(&pose(90.0, 0.0, &[0]), 20.0), StepOutcome::default());
    }

    #[test]
    fn key_parsing() {
        let k: AssetKey = "apical:tilt_view".parse().unwrap();
        assert_eq!(k, AssetKey { view: View::Apical, class: TiltClass::TiltView });
        assert_eq!(k.to_string(), "apical:tilt_view");
        assert_eq!(parse_target("Subcostal:tilt").unwrap(), (View::Subcostal, Variant::Tilt));
        assert_eq!(parse_target("plax").unwrap(), (View::Plax, Variant::Normal));
        assert!(parse_target("apex:tilt").is_err());
    }

    #[test]
    fn quiz_grading() {
        let item = QuizItem {
            id: "q".into(),
            prompt: "?".into(),
            options: vec!["a".into(), "b".into()],
            answer_index: 1,
            explanation: "because".into(),
            view: None,
        };
        assert_eq!(check_answer(&item, 1).unwrap(), (true, "because"));
        assert!(!check_answer(&item, 0).unwrap().0);
        assert!(check_answer(&item, 2).is_err());
    }
}
