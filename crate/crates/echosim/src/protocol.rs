//! Messages exchanged with UI clients. Each message is one JSON object on
//! one line (one WebSocket text frame), tagged by `"type"`.

use echosim_core::session::SessionState;
use echosim_core::{AssetKey, FeedbackEvent, TiltClass, Variant, View};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateUpdate {
    /// Increments by one per update; a connect snapshot repeats the latest.
    pub seq: u64,
    pub view: View,
    pub variant: Variant,
    pub level: u8,
    pub attempt: u32,
    /// Live stage from the latest pose.
    pub stage: u8,
    /// Displayed (ratcheted) stage.
    pub stage_max: u8,
    pub tilt_class: TiltClass,
    pub completed: bool,
    pub dwell_ms: f64,
    pub feedback_event: Option<FeedbackEvent>,
    /// Clip currently shown, if the probe is placed and aligned.
    pub visual: Option<AssetKey>,
}

impl StateUpdate {
    pub fn from_state(seq: u64, s: &SessionState, visual: Option<AssetKey>) -> Self {
        Self {
            seq,
            view: s.target.view,
            variant: s.target.variant,
            level: s.level,
            attempt: s.attempt,
            stage: s.stage,
            stage_max: s.stage_max,
            tilt_class: s.tilt_class,
            completed: s.completed,
            dwell_ms: s.dwell_ms_accum,
            feedback_event: None,
            visual,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationPhase {
    Collecting,
    Done,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    BadMessage,
    SourceConflict,
    UnknownTarget,
    UnknownItem,
    NotStill,
    SlowClient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum ServerMessage {
    StateUpdate(StateUpdate),
    FrameRef {
        asset_key: AssetKey,
        frame_index: usize,
        frame_count: usize,
    },
    /// Real-time slice of the current volume frame.
    SliceFrame {
        width: usize,
        height: usize,
        /// Base64 of `width * height` row-major gray bytes.
        pixels: String,
        t: usize,
    },
    CalibrationStatus {
        phase: CalibrationPhase,
        seconds_remaining: f64,
    },
    QuizResult {
        item_id: String,
        correct: bool,
        explanation: String,
    },
    Error {
        code: ErrorCode,
        detail: String,
    },
}

impl ServerMessage {
    /// Frames may be dropped for a slow client; nothing else may.
    pub fn is_droppable(&self) -> bool {
        matches!(self, ServerMessage::FrameRef { .. } | ServerMessage::SliceFrame { .. })
    }

    pub fn error(code: ErrorCode, detail: impl Into<String>) -> Self {
        ServerMessage::Error { code, detail: detail.into() }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("server messages serialise")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum ClientMessage {
    SelectTarget {
        view: View,
        variant: Variant,
    },
    VirtualProbe {
        yaw: f64,
        pitch: f64,
        #[serde(default)]
        roll: f64,
        contacts: [bool; 5],
    },
    StartCalibration {},
    ResetAttempt {},
    QuizAnswer {
        item_id: String,
        choice: usize,
    },
}
