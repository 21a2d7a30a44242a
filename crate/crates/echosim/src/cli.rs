//! Command-line entry point.
//!
//! Exit codes: 0 success, 2 bad input (arguments, file contents, schema),
//! 3 I/O failure, 4 probe not still during calibration. Data and event
//! logs go to stdout, diagnostics to stderr.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::net::IpAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use echosim_core::gifcodec::{encode_gif, sequence_to_gif};
use echosim_core::nrrd::{write_nrrd, Encoding};
use echosim_core::session::{parse_target, view_spec};
use echosim_core::telemetry::{scripted_device, CalibrationConfig, DEFAULT_SAMPLE_HZ};
use echosim_core::{
    calibrate, slice, to_pose, AssetKey, Calibration, HallConfig, Session, SessionConfig, TelemetryError,
    TiltClass, View,
};
use serde::Serialize;

use crate::assets::{build_assets, load_manifest, synthetic_tilt, AssetError, AssetSource, LoadedAssets};
use crate::io::{load_volume, read_bytes, write_file, LoadError};
use crate::phantom::{phantom, PhantomSpec};
use crate::planes::{default_planes, parse_plane, PlaneArgError};
use crate::service::{serve, RealtimeVolume, ServeConfig, ServeError, DEFAULT_PORT, DEFAULT_QUEUE_CAPACITY};
use crate::source::{read_replay, read_script, read_serial, SourceError, TelemetrySource};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NOT_STILL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "echosim", version, about = "Echocardiography training engine")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Slice a volume sequence along a plane into a looping GIF.
    Convert(ConvertArgs),
    /// Write one slice of one timepoint as a PGM image.
    Slice(SliceArgs),
    /// Run the session service.
    Serve(ServeArgs),
    /// Run a probe script through a session and print its event log.
    Simulate(SimulateArgs),
    /// Capture orientation offsets from a still probe.
    Calibrate(CalibrateArgs),
    /// Build the clip library and its manifest.
    BuildAssets(BuildAssetsArgs),
    /// Write a synthetic beating-heart volume.
    Phantom(PhantomArgs),
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// NRRD file, or a directory of single-timepoint NRRD files.
    #[arg(long)]
    pub input: PathBuf,
    /// View name or `ox,oy,oz,ux,uy,uz,vx,vy,vz,width,height,mm`.
    #[arg(long, default_value = "apical")]
    pub plane: String,
    /// Frame delay; defaults to the volume's frame period.
    #[arg(long)]
    pub delay_ms: Option<f64>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SliceArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub t: usize,
    #[arg(long, default_value = "apical")]
    pub plane: String,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Asset manifest; without one the service runs without clips.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_PORT)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: IpAddr,
    /// serial:<device>, replay:<file> or virtual.
    #[arg(long, default_value = "virtual")]
    pub telemetry: String,
    #[arg(long, default_value = "apical:tilt")]
    pub target: String,
    /// Calibration file written by `calibrate`.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Also stream live slices of this volume.
    #[arg(long)]
    pub realtime: Option<PathBuf>,
    /// Directory of UI files served at `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_QUEUE_CAPACITY)]
    pub queue: usize,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Debug, Args)]
pub struct TuningArgs {
    #[arg(long, default_value_t = echosim_core::session::DEFAULT_TOL_DEG)]
    pub tol_deg: f64,
    #[arg(long, default_value_t = echosim_core::session::DEFAULT_DWELL_MS)]
    pub dwell_ms: f64,
    #[arg(long, default_value_t = 512)]
    pub hall_baseline: u16,
    #[arg(long, default_value_t = 100)]
    pub hall_delta: u16,
}

impl TuningArgs {
    fn session(&self) -> Result<SessionConfig, CliError> {
        if !(self.tol_deg >= 0.0 && self.tol_deg.is_finite() && self.dwell_ms >= 0.0 && self.dwell_ms.is_finite()) {
            return Err(CliError::input("tolerance and dwell must be finite and non-negative"));
        }
        Ok(SessionConfig { tol_deg: self.tol_deg, dwell_ms: self.dwell_ms, ..SessionConfig::default() })
    }

    fn hall(&self) -> HallConfig {
        HallConfig { baseline: self.hall_baseline, delta: self.hall_delta }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON list of `{duration_ms, yaw, pitch, roll, hall}` steps.
    #[arg(long)]
    pub script: PathBuf,
    #[arg(long, default_value = "apical:tilt")]
    pub target: String,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// serial:<device> or replay:<file>.
    #[arg(long)]
    pub telemetry: String,
    #[arg(long, default_value_t = echosim_core::telemetry::DEFAULT_CALIBRATION_WINDOW_S)]
    pub seconds: f64,
    #[arg(long, default_value_t = echosim_core::telemetry::DEFAULT_STILLNESS_TOL_DEG)]
    pub stillness_deg: f64,
    #[arg(long, default_value = "calibration.json")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildAssetsArgs {
    /// Output directory for the GIFs and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Derive every clip from a phantom by tilting each view's plane.
    #[arg(long)]
    pub synthetic: bool,
    /// `view:class=path`, e.g. `apical:tilt_view=apical_tilt.nrrd`.
    #[arg(long = "volume")]
    pub volumes: Vec<String>,
    #[arg(long)]
    pub delay_ms: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 48)]
    pub size: usize,
    #[arg(long, default_value_t = 12)]
    pub frames: usize,
    #[arg(long, default_value_t = 50.0)]
    pub frame_period_ms: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub gzip: bool,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        let code = if matches!(e, LoadError::Io { .. }) { EXIT_IO } else { EXIT_INPUT };
        Self { code, message: e.to_string() }
    }
}

impl From<AssetError> for CliError {
    fn from(e: AssetError) -> Self {
        match e {
            AssetError::Load(e) => e.into(),
            AssetError::MissingAsset { .. } => Self { code: EXIT_IO, message: e.to_string() },
            _ => Self::input(e.to_string()),
        }
    }
}

impl From<SourceError> for CliError {
    fn from(e: SourceError) -> Self {
        match e {
            SourceError::Load(e) => e.into(),
            _ => Self::input(e.to_string()),
        }
    }
}

impl From<PlaneArgError> for CliError {
    fn from(e: PlaneArgError) -> Self {
        Self::input(e.to_string())
    }
}

impl From<ServeError> for CliError {
    fn from(e: ServeError) -> Self {
        match e {
            ServeError::Source(e) => e.into(),
            ServeError::UnknownTarget { .. } => Self::input(e.to_string()),
            _ => Self { code: EXIT_IO, message: e.to_string() },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self { code: EXIT_IO, message: e.to_string() }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("echosim: {}", e.message);
            e.code
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Convert(a) => convert(a, out),
        Command::Slice(a) => slice_cmd(a, out),
        Command::Serve(a) => serve_cmd(a),
        Command::Simulate(a) => simulate(a, out),
        Command::Calibrate(a) => calibrate_cmd(a, out),
        Command::BuildAssets(a) => build_assets_cmd(a, out),
        Command::Phantom(a) => phantom_cmd(a, out),
    }
}

fn check_delay(delay_ms: Option<f64>) -> Result<(), CliError> {
    match delay_ms {
        Some(d) if !(d > 0.0 && d.is_finite()) => Err(CliError::input(format!("bad --delay-ms {d}"))),
        _ => Ok(()),
    }
}

fn convert(a: ConvertArgs, out: &mut dyn Write) -> Result<(), CliError> {
    check_delay(a.delay_ms)?;
    let mut seq = load_volume(&a.input)?;
    let plane = parse_plane(&a.plane, seq.geometry())?;
    if let Some(d) = a.delay_ms {
        seq = seq.with_frame_period_ms(d).map_err(|e| CliError::input(e.to_string()))?;
    }
    let anim = sequence_to_gif(&seq, &plane).map_err(|e| CliError::input(e.to_string()))?;
    let bytes = encode_gif(&anim);
    write_file(&a.output, &bytes)?;
    writeln!(
        out,
        "{}: {} frames, {} voxel bytes -> {} GIF bytes ({}x{})",
        a.output.display(),
        anim.frame_count(),
        seq.voxel_bytes(),
        bytes.len(),
        anim.width(),
        anim.height()
    )?;
    Ok(())
}

fn slice_cmd(a: SliceArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let seq = load_volume(&a.input)?;
    let frame = seq
        .frame(a.t)
        .ok_or_else(|| CliError::input(format!("--t {} out of range (volume has {} timepoints)", a.t, seq.len())))?;
    let plane = parse_plane(&a.plane, seq.geometry())?;
    let img = slice(frame, &plane);
    write_file(&a.output, &crate::io::encode_pgm(&img))?;
    writeln!(out, "{}: {}x{}", a.output.display(), img.width, img.height)?;
    Ok(())
}

fn read_calibration(path: &Path) -> Result<Calibration, CliError> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn serve_cmd(a: ServeArgs) -> Result<(), CliError> {
    let source: TelemetrySource = a.telemetry.parse()?;
    let target = parse_target(&a.target).map_err(|e| CliError::input(e.to_string()))?;
    let assets = match &a.manifest {
        Some(p) => load_manifest(p)?,
        None => LoadedAssets::empty(),
    };
    let realtime = match &a.realtime {
        Some(p) => {
            let sequence = load_volume(p)?;
            let mut planes = default_planes(sequence.geometry());
            planes.extend(assets.manifest().planes.iter().map(|(v, p)| (*v, *p)));
            Some(RealtimeVolume { sequence, planes })
        }
        None => None,
    };
    let calibration = match &a.calibration {
        Some(p) => read_calibration(p)?,
        None => Calibration::identity(),
    };
    let cfg = ServeConfig {
        bind: a.bind,
        port: a.port,
        source,
        session: a.tuning.session()?,
        hall: a.tuning.hall(),
        calibration,
        target,
        queue_capacity: a.queue.max(1),
        realtime,
        static_dir: a.static_dir,
        ..ServeConfig::default()
    };
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let server = serve(cfg, assets).await?;
        eprintln!("echosim: listening on ws://{}/ws", server.addr);
        server.wait().await;
        Ok(())
    })
}

#[derive(Serialize)]
struct Summary {
    target: String,
    completed: bool,
    stage_max: u8,
    t_ms: f64,
    events: usize,
}

fn simulate(a: SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (view, variant) = parse_target(&a.target).map_err(|e| CliError::input(e.to_string()))?;
    let spec = view_spec(view, variant);
    let config = a.tuning.session()?;
    let hall = a.tuning.hall();
    let steps = read_script(&a.script)?;
    let device = scripted_device(steps).map_err(|e| CliError::input(e.to_string()))?;
    let period = device.period_ms();
    let cal = Calibration::identity();
    let mut session = Session::new(spec, config);
    let mut printed = 0;
    for sample in device {
        session.step(&to_pose(&sample, &cal, &hall), period);
        for entry in &session.state().feedback[printed..] {
            writeln!(out, "{}", serde_json::to_string(entry).expect("entries serialise"))?;
        }
        printed = session.state().feedback.len();
    }
    let s = session.state();
    let summary = Summary {
        target: spec.target_name(),
        completed: s.completed,
        stage_max: s.stage_max,
        t_ms: s.t_ms,
        events: s.feedback.len(),
    };
    writeln!(out, "{}", serde_json::to_string(&summary).expect("summary serialises"))?;
    Ok(())
}

fn calibrate_cmd(a: CalibrateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !(a.seconds > 0.0 && a.seconds.is_finite()) {
        return Err(CliError::input(format!("bad --seconds {}", a.seconds)));
    }
    let cfg = CalibrationConfig { window_s: a.seconds, stillness_tol_deg: a.stillness_deg, sample_hz: DEFAULT_SAMPLE_HZ };
    let wanted = (a.seconds * DEFAULT_SAMPLE_HZ).ceil() as usize;
    let samples = match a.telemetry.parse::<TelemetrySource>()? {
        TelemetrySource::Replay(p) => read_replay(&p)?,
        TelemetrySource::Serial(dev) => {
            eprintln!("echosim: hold the probe still for {} s", a.seconds);
            let mut got = Vec::with_capacity(wanted);
            read_serial(&dev, |s| {
                got.push(s);
                got.len() < wanted
            })?;
            got
        }
        TelemetrySource::Virtual => return Err(CliError::input("the virtual probe needs no calibration")),
    };
    let cal = calibrate(samples, &cfg).map_err(|e| match e {
        TelemetryError::NotStill { .. } => CliError { code: EXIT_NOT_STILL, message: e.to_string() },
        _ => CliError::input(e.to_string()),
    })?;
    let json = serde_json::to_string_pretty(&cal).expect("calibration serialises");
    write_file(&a.output, json.as_bytes())?;
    writeln!(out, "{json}")?;
    Ok(())
}

fn parse_volume_arg(arg: &str) -> Result<(AssetKey, PathBuf), CliError> {
    let (key, path) = arg
        .split_once('=')
        .ok_or_else(|| CliError::input(format!("--volume {arg:?}: expected view:class=path")))?;
    let key: AssetKey = key.parse().map_err(|e| CliError::input(format!("--volume {arg:?}: {e}")))?;
    Ok((key, PathBuf::from(path)))
}

fn build_assets_cmd(a: BuildAssetsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    check_delay(a.delay_ms)?;
    if a.synthetic == !a.volumes.is_empty() {
        return Err(CliError::input("give either --synthetic or at least one --volume"));
    }
    let retime = |seq: echosim_core::VolumeSequence| match a.delay_ms {
        Some(d) => seq.with_frame_period_ms(d).map_err(|e| CliError::input(e.to_string())),
        None => Ok(seq),
    };
    let mut sources = BTreeMap::new();
    let planes;
    if a.synthetic {
        let seq = retime(phantom(&PhantomSpec::default()))?;
        planes = default_planes(seq.geometry());
        for view in View::ALL {
            for class in TiltClass::ALL {
                let source = AssetSource {
                    id: "phantom".into(),
                    sequence: seq.clone(),
                    tilt_deg: synthetic_tilt(view, class),
                };
                sources.insert(AssetKey { view, class }, source);
            }
        }
    } else {
        let mut first_geometry = None;
        for arg in &a.volumes {
            let (key, path) = parse_volume_arg(arg)?;
            let seq = retime(load_volume(&path)?)?;
            first_geometry.get_or_insert(*seq.geometry());
            let id = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
            sources.insert(key, AssetSource { id, sequence: seq, tilt_deg: 0.0 });
        }
        planes = default_planes(&first_geometry.expect("at least one volume"));
    }
    let sensors = View::ALL.iter().map(|&v| (v, v.default_sensor())).collect();
    let manifest = build_assets(&sources, &planes, &sensors, &a.out)?;
    for (key, entry) in &manifest.entries {
        writeln!(out, "{key}\t{}", entry.gif_path)?;
    }
    writeln!(out, "{}", a.out.join(crate::assets::MANIFEST_FILE).display())?;
    Ok(())
}

fn phantom_cmd(a: PhantomArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.size < 4 || a.size > 512 || a.frames == 0 || !(a.frame_period_ms > 0.0 && a.frame_period_ms.is_finite()) {
        return Err(CliError::input("phantom needs size 4..=512, at least one frame and a positive period"));
    }
    let spec = PhantomSpec { size: a.size, frames: a.frames, spacing_mm: 1.0, frame_period_ms: a.frame_period_ms, seed: a.seed };
    let seq = phantom(&spec);
    let encoding = if a.gzip { Encoding::Gzip } else { Encoding::Raw };
    let bytes = write_nrrd(&seq, encoding);
    write_file(&a.output, &bytes)?;
    writeln!(out, "{}: {} bytes", a.output.display(), bytes.len())?;
    Ok(())
}
