//! Host side of the echosim trainer: volume files, the clip library, the
//! WebSocket session service and the `echosim` command.

pub mod assets;
pub mod cli;
pub mod io;
pub mod phantom;
pub mod planes;
pub mod protocol;
pub mod service;
pub mod source;
