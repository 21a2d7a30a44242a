//! Core of the echosim echocardiography trainer.
//!
//! Everything here is pure computation over in-memory buffers so the crate
//! builds with `alloc` only:
//!
//! - [`volume`]: 4D volume sequences and the NRRD codec (raw and gzip).
//! - [`slicer`]: trilinear resampling of a frame along an arbitrary plane.
//! - [`gifcodec`]: GIF89a animation encoder/decoder with its own LZW coder.
//! - [`telemetry`]: probe line protocol, calibration, contact thresholding
//!   and a scripted stand-in device.
//! - [`session`]: view table, clock system, tilt classification and the
//!   staged training state machine.
//! - [`quizbank`]: the built-in level 1 quiz content.
//!
//! File IO, the asset library, the network service and the CLI live in the
//! `echosim` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod gifcodec;
pub mod math;
pub mod quizbank;
pub mod session;
pub mod slicer;
pub mod telemetry;
pub mod volume;

pub use gifcodec::{decode_gif, encode_gif, sequence_to_gif, GifAnimation, GifError, GifFrame};
pub use math::Vec3;
pub use quizbank::{default_bank, QuizBank};
pub use session::{
    check_answer, classify_tilt, clock_to_deg, location_ok, notch_ok, select_visualization, AssetKey,
    FeedbackEvent, QuizItem, Session, SessionConfig, SessionState, TiltClass, Variant, View,
    ViewSpec,
};
pub use slicer::{sample_trilinear, slice, tilted_plane, SliceImage, SlicePlane};
pub use telemetry::{
    calibrate, format_line, parse_line, to_pose, wrap_deg, Calibration, HallConfig, ProbePose,
    ProbeSample, ScriptedDevice, TelemetryError,
};
pub use volume::{nrrd, Geometry, VolumeError, VolumeFrame, VolumeSequence};
