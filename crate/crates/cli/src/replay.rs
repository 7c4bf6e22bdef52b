use crate::Failure;
use anyhow::{anyhow, Context};
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};
use wheelsim_core::input::{read_trace, AxisPipeline, Calibration, DeviceDescriptor};
use wheelsim_core::replay::{inputs_from_trace, replay, replay_report, TraceEnd};
use wheelsim_core::{load_level, ChairParams, SessionConfig, SessionReport};

#[derive(clap::Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["trace", "from_report"]))]
pub struct Args {
    #[arg(long)]
    level: PathBuf,
    /// JSON Lines trace of `{"t", "axes"}` samples.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Re-run the inputs recorded in an earlier report.
    #[arg(long, conflicts_with_all = ["calibration", "device", "assist", "max_duration", "stop_at_trace_end"])]
    from_report: Option<PathBuf>,
    /// Calibration file; trace axes are then raw device values.
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Device descriptor file. Defaults to the built-in descriptor named by
    /// the calibration's device_id ("adc-10bit" or "gamepad").
    #[arg(long)]
    device: Option<PathBuf>,
    /// Where to write the report; stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Steering assist gain (0 disables).
    #[arg(long, default_value_t = 0.0)]
    assist: f64,
    /// Session time limit in seconds.
    #[arg(long, default_value_t = wheelsim_core::session::DEFAULT_MAX_DURATION)]
    max_duration: f64,
    /// End the session once the trace runs out instead of holding its last sample.
    #[arg(long)]
    stop_at_trace_end: bool,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, Failure> {
    let file = fs::File::open(path)
        .with_context(|| format!("cannot read {what} {}", path.display()))
        .map_err(Failure::input)?;
    serde_json::from_reader(BufReader::new(file))
        .with_context(|| format!("invalid {what} {}", path.display()))
        .map_err(Failure::input)
}

fn pipeline(args: &Args) -> Result<AxisPipeline, Failure> {
    let calibration: Option<Calibration> = args
        .calibration
        .as_deref()
        .map(|p| read_json(p, "calibration"))
        .transpose()?;
    let device = match (&args.device, &calibration) {
        (Some(path), _) => read_json::<DeviceDescriptor>(path, "device descriptor")?,
        (None, Some(c)) => match c.device_id.as_str() {
            "adc-10bit" => DeviceDescriptor::adc_10bit(),
            "gamepad" => DeviceDescriptor::gamepad(),
            other => {
                return Err(Failure::input(anyhow!(
                    "no built-in descriptor for device {other:?}; pass --device"
                )))
            }
        },
        (None, None) => return Ok(AxisPipeline::Passthrough),
    };
    AxisPipeline::with_device(device, calibration).map_err(Failure::input)
}

pub fn run(args: Args) -> Result<u8, Failure> {
    let level_bytes = fs::read(&args.level)
        .with_context(|| format!("cannot read level {}", args.level.display()))
        .map_err(Failure::input)?;
    let level = Arc::new(
        load_level(&level_bytes)
            .with_context(|| format!("invalid level {}", args.level.display()))
            .map_err(Failure::input)?,
    );

    let report = if let Some(path) = &args.from_report {
        let recorded: SessionReport = read_json(path, "report")?;
        replay_report(level, &recorded).map_err(Failure::input)?
    } else {
        let path = args.trace.as_deref().expect("clap requires a source");
        let file = fs::File::open(path)
            .with_context(|| format!("cannot read trace {}", path.display()))
            .map_err(Failure::input)?;
        let samples = read_trace(BufReader::new(file)).map_err(Failure::input)?;
        let inputs = inputs_from_trace(&samples, &pipeline(&args)?).map_err(Failure::input)?;
        let config = SessionConfig {
            assist_gain: args.assist,
            max_duration: args.max_duration,
            ..Default::default()
        };
        let at_end = if args.stop_at_trace_end {
            TraceEnd::Stop
        } else {
            TraceEnd::Hold
        };
        replay(level, ChairParams::default(), config, &inputs, at_end).map_err(Failure::input)?
    };

    let now_ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64);
    let mut text =
        serde_json::to_string_pretty(&report.stamped(now_ms)).expect("report serializes");
    text.push('\n');
    match &args.report {
        Some(out) => write_atomically(out, text.as_bytes()).map_err(Failure::runtime)?,
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(Failure::runtime)?,
    }
    let m = &report.metrics;
    eprintln!(
        "{}: {:?} after {:.3} s, on route {:.3} s, off route {:.3} s, {} collisions, {} waypoints",
        report.level_id,
        report.end_reason,
        m.elapsed,
        m.on_route_time,
        m.off_route_time,
        m.collision_count,
        m.waypoints_hit
    );
    Ok(0)
}

fn write_atomically(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot write in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}
