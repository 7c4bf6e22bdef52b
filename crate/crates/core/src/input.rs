//! Interaction devices: descriptors, calibration, deadzone normalization and
//! recorded input traces.
//!
//! Raw readings are integer ADC-style counts. Browser gamepads report floats
//! in `[-1, 1]`, which clients prescale to `[0, 65535]` (see
//! [`prescale_gamepad_axis`]) so every device goes through the same pipeline.

use crate::chair::JoystickSample;
use serde::{Deserialize, Serialize};
use std::io::BufRead;

pub const MIN_CALIBRATION_SAMPLES: usize = 30;
/// Smallest deadzone produced by [`calibrate_center`].
pub const MIN_CALIBRATED_DEADZONE: f64 = 0.05;
pub const GAMEPAD_RAW_MAX: i64 = 65_535;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum InputError {
    #[error("device reports {expected} axes but {actual} raw values were given")]
    DescriptorMismatch { expected: usize, actual: usize },
    #[error("need at least {required} resting samples, got {actual}")]
    InsufficientSamples { required: usize, actual: usize },
    #[error("invalid device descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),
    #[error("resting noise too large: deadzone would be {0:.3}")]
    ExcessiveRestingNoise(f64),
    #[error("axis value {0} is not a finite number")]
    NonFiniteAxis(f64),
    #[error("axis value {0} is not an integer count")]
    NonIntegralAxis(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisRole {
    Lateral,
    Forward,
    /// Axis present on the device but not used for driving.
    Unused,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceDescriptor {
    pub device_id: String,
    /// `(raw_min, raw_max)` per raw axis.
    pub axis_ranges: Vec<(i64, i64)>,
    pub axis_roles: Vec<AxisRole>,
}

impl DeviceDescriptor {
    /// Two-axis 10-bit ADC joystick, lateral then forward.
    pub fn adc_10bit() -> Self {
        Self {
            device_id: "adc-10bit".into(),
            axis_ranges: vec![(0, 1023), (0, 1023)],
            axis_roles: vec![AxisRole::Lateral, AxisRole::Forward],
        }
    }

    /// Browser gamepad stick prescaled to `[0, 65535]`.
    pub fn gamepad() -> Self {
        Self {
            device_id: "gamepad".into(),
            axis_ranges: vec![(0, GAMEPAD_RAW_MAX), (0, GAMEPAD_RAW_MAX)],
            axis_roles: vec![AxisRole::Lateral, AxisRole::Forward],
        }
    }

    pub fn axis_count(&self) -> usize {
        self.axis_ranges.len()
    }

    fn role_index(&self, role: AxisRole) -> usize {
        self.axis_roles
            .iter()
            .position(|r| *r == role)
            .expect("validated descriptor")
    }

    pub fn validate(&self) -> Result<(), InputError> {
        let bad = |m: String| Err(InputError::InvalidDescriptor(m));
        if self.axis_ranges.len() != self.axis_roles.len() {
            return bad(format!(
                "{} axis ranges but {} axis roles",
                self.axis_ranges.len(),
                self.axis_roles.len()
            ));
        }
        if let Some(i) = self.axis_ranges.iter().position(|(lo, hi)| lo >= hi) {
            return bad(format!("axis {i} needs raw_min < raw_max"));
        }
        for role in [AxisRole::Lateral, AxisRole::Forward] {
            let n = self.axis_roles.iter().filter(|r| **r == role).count();
            if n != 1 {
                return bad(format!("expected exactly one {role:?} axis, found {n}"));
            }
        }
        Ok(())
    }
}

/// Per-axis calibration. The JSON form is the calibration file format:
/// `{device_id, center:[...], deadzone, gain:[...], invert:[...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub device_id: String,
    pub center: Vec<i64>,
    /// Radial deadzone in normalized units, `[0, 1)`.
    pub deadzone: f64,
    pub gain: Vec<f64>,
    pub invert: Vec<bool>,
}

impl Calibration {
    /// Range midpoints, unit gain, no inversion.
    pub fn centered(d: &DeviceDescriptor, deadzone: f64) -> Self {
        Self {
            device_id: d.device_id.clone(),
            center: d
                .axis_ranges
                .iter()
                .map(|(lo, hi)| (lo + hi + 1).div_euclid(2))
                .collect(),
            deadzone,
            gain: vec![1.0; d.axis_count()],
            invert: vec![false; d.axis_count()],
        }
    }

    pub fn validate(&self, d: &DeviceDescriptor) -> Result<(), InputError> {
        let bad = |m: String| Err(InputError::InvalidCalibration(m));
        let n = d.axis_count();
        if self.center.len() != n || self.gain.len() != n || self.invert.len() != n {
            return bad(format!("expected {n} entries in center, gain and invert"));
        }
        for (i, (&c, &(lo, hi))) in self.center.iter().zip(&d.axis_ranges).enumerate() {
            if c < lo || c > hi {
                return bad(format!("center {c} of axis {i} outside [{lo}, {hi}]"));
            }
        }
        if !(0.0..1.0).contains(&self.deadzone) {
            return bad(format!("deadzone {} outside [0, 1)", self.deadzone));
        }
        if let Some(g) = self.gain.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return bad(format!("gain {g} must be finite and > 0"));
        }
        Ok(())
    }
}

/// Raw count to `[-1, 1]`, scaling each side of the center by its own span so
/// both range ends reach full deflection.
fn axis_unit(raw: i64, center: i64, (lo, hi): (i64, i64)) -> f64 {
    let raw = raw.clamp(lo, hi);
    let offset = (raw - center) as f64;
    let span = if raw >= center {
        hi - center
    } else {
        center - lo
    };
    if span == 0 {
        0.0
    } else {
        offset / span as f64
    }
}

/// Normalizes one raw reading into a [`JoystickSample`].
///
/// Each axis is scaled around its calibrated center, inverted and amplified,
/// and clamped to `[-1, 1]`. A radial deadzone then zeroes the vector when
/// its magnitude `m` is at most `deadzone`; otherwise the magnitude becomes
/// `(m - deadzone) / (1 - deadzone)` with the direction kept, and each
/// component is clamped to `[-1, 1]` again.
pub fn normalize(
    raw: &[i64],
    d: &DeviceDescriptor,
    c: &Calibration,
    t: f64,
) -> Result<JoystickSample, InputError> {
    if raw.len() != d.axis_count() {
        return Err(InputError::DescriptorMismatch {
            expected: d.axis_count(),
            actual: raw.len(),
        });
    }
    let axis = |i: usize| {
        let u = axis_unit(raw[i], c.center[i], d.axis_ranges[i]);
        let u = if c.invert[i] { -u } else { u };
        (u * c.gain[i]).clamp(-1.0, 1.0)
    };
    let x = axis(d.role_index(AxisRole::Lateral));
    let y = axis(d.role_index(AxisRole::Forward));
    let m = x.hypot(y);
    if m <= c.deadzone {
        return Ok(JoystickSample::new(0.0, 0.0, t));
    }
    let scale = (m - c.deadzone) / (1.0 - c.deadzone) / m;
    Ok(JoystickSample::new(
        (x * scale).clamp(-1.0, 1.0),
        (y * scale).clamp(-1.0, 1.0),
        t,
    ))
}

/// Derives a calibration from readings taken with the stick at rest.
///
/// The center is the per-axis mean rounded to the nearest count; the deadzone
/// is twice the largest resting magnitude seen around that center, but never
/// below [`MIN_CALIBRATED_DEADZONE`].
pub fn calibrate_center(
    resting: &[Vec<i64>],
    d: &DeviceDescriptor,
) -> Result<Calibration, InputError> {
    d.validate()?;
    if resting.len() < MIN_CALIBRATION_SAMPLES {
        return Err(InputError::InsufficientSamples {
            required: MIN_CALIBRATION_SAMPLES,
            actual: resting.len(),
        });
    }
    if let Some(bad) = resting.iter().find(|s| s.len() != d.axis_count()) {
        return Err(InputError::DescriptorMismatch {
            expected: d.axis_count(),
            actual: bad.len(),
        });
    }
    let n = resting.len() as f64;
    let center: Vec<i64> = (0..d.axis_count())
        .map(|i| {
            let (lo, hi) = d.axis_ranges[i];
            let sum: i128 = resting.iter().map(|s| i128::from(s[i].clamp(lo, hi))).sum();
            ((sum as f64 / n).round() as i64).clamp(lo, hi)
        })
        .collect();
    let mut cal = Calibration {
        device_id: d.device_id.clone(),
        center,
        deadzone: 0.0,
        gain: vec![1.0; d.axis_count()],
        invert: vec![false; d.axis_count()],
    };
    let lateral = d.role_index(AxisRole::Lateral);
    let forward = d.role_index(AxisRole::Forward);
    let worst = resting
        .iter()
        .map(|s| {
            let x = axis_unit(s[lateral], cal.center[lateral], d.axis_ranges[lateral]);
            let y = axis_unit(s[forward], cal.center[forward], d.axis_ranges[forward]);
            x.hypot(y)
        })
        .fold(0.0, f64::max);
    let deadzone = (2.0 * worst).max(MIN_CALIBRATED_DEADZONE);
    if deadzone >= 1.0 {
        return Err(InputError::ExcessiveRestingNoise(deadzone));
    }
    cal.deadzone = deadzone;
    Ok(cal)
}

/// Maps a browser gamepad axis in `[-1, 1]` onto `[0, 65535]`.
pub fn prescale_gamepad_axis(value: f64) -> i64 {
    let v = if value.is_finite() {
        value.clamp(-1.0, 1.0)
    } else {
        0.0
    };
    ((v + 1.0) / 2.0 * GAMEPAD_RAW_MAX as f64).round() as i64
}

/// Converts the axes of an input message into a sample.
///
/// With a device, axes must be integral raw counts and go through
/// [`normalize`]. Without one they are already-normalized `[x, y]` floats and
/// are only clamped.
#[derive(Debug, Clone, PartialEq)]
pub enum AxisPipeline {
    Normalize {
        device: DeviceDescriptor,
        calibration: Calibration,
    },
    Passthrough,
}

impl AxisPipeline {
    pub fn with_device(
        device: DeviceDescriptor,
        calibration: Option<Calibration>,
    ) -> Result<Self, InputError> {
        device.validate()?;
        let calibration =
            calibration.unwrap_or_else(|| Calibration::centered(&device, MIN_CALIBRATED_DEADZONE));
        calibration.validate(&device)?;
        Ok(AxisPipeline::Normalize {
            device,
            calibration,
        })
    }

    pub fn sample(&self, axes: &[f64], t: f64) -> Result<JoystickSample, InputError> {
        if let Some(bad) = axes.iter().find(|a| !a.is_finite()) {
            return Err(InputError::NonFiniteAxis(*bad));
        }
        match self {
            AxisPipeline::Normalize {
                device,
                calibration,
            } => {
                let raw = axes
                    .iter()
                    .map(|&a| {
                        if a.fract() == 0.0 {
                            Ok(a as i64)
                        } else {
                            Err(InputError::NonIntegralAxis(a))
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                normalize(&raw, device, calibration, t)
            }
            AxisPipeline::Passthrough => {
                if axes.len() != 2 {
                    return Err(InputError::DescriptorMismatch {
                        expected: 2,
                        actual: axes.len(),
                    });
                }
                Ok(JoystickSample::new(
                    axes[0].clamp(-1.0, 1.0),
                    axes[1].clamp(-1.0, 1.0),
                    t,
                ))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Trace files
// ---------------------------------------------------------------------------

/// One line of a trace file: `{"t": seconds, "axes": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub axes: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trace line {line}: timestamp {t} precedes {previous}")]
    NonMonotonicTimestamps { line: usize, t: f64, previous: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Streams a JSON Lines trace, rejecting decreasing timestamps. Blank lines are skipped.
pub struct TraceReader<R> {
    lines: std::io::Lines<R>,
    line: usize,
    last_t: Option<f64>,
    failed: bool,
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            lines: reader.lines(),
            line: 0,
            last_t: None,
            failed: false,
        }
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<TraceSample, TraceError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let text = match self.lines.next()? {
                Ok(text) => text,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e.into()));
                }
            };
            self.line += 1;
            if text.trim().is_empty() {
                continue;
            }
            let parsed = serde_json::from_str::<TraceSample>(&text)
                .map_err(|e| TraceError::Parse {
                    line: self.line,
                    message: e.to_string(),
                })
                .and_then(|s| {
                    if !s.t.is_finite() {
                        return Err(TraceError::Parse {
                            line: self.line,
                            message: "t is not finite".into(),
                        });
                    }
                    match self.last_t {
                        Some(prev) if s.t < prev => Err(TraceError::NonMonotonicTimestamps {
                            line: self.line,
                            t: s.t,
                            previous: prev,
                        }),
                        _ => Ok(s),
                    }
                });
            match &parsed {
                Ok(s) => self.last_t = Some(s.t),
                Err(_) => self.failed = true,
            }
            return Some(parsed);
        }
    }
}

pub fn trace_source<R: BufRead>(reader: R) -> TraceReader<R> {
    TraceReader::new(reader)
}

/// Reads a whole trace, failing on the first bad line.
pub fn read_trace<R: BufRead>(reader: R) -> Result<Vec<TraceSample>, TraceError> {
    trace_source(reader).collect()
}
