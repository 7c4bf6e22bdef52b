//! Headless replay of recorded input through the session pipeline.
//!
//! Inputs follow a zero-order hold: tick `k` (covering sim time
//! `[(k-1)·dt, k·dt]`) is driven by the latest input with `t <= (k-1)·dt`,
//! and by `(0, 0)` before the first one.

use crate::chair::{ChairParams, JoystickSample};
use crate::input::{AxisPipeline, InputError, TraceSample};
use crate::level::Level;
use crate::session::{EndReason, Frame, Session, SessionConfig, SessionError, SessionReport};
use std::collections::VecDeque;
use std::sync::Arc;

/// Slack when comparing input timestamps against the tick schedule.
pub const SCHEDULE_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedInput {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// What to do once the recorded input runs out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceEnd {
    /// Keep holding the last input until completion or timeout.
    Hold,
    /// End the session one tick after the last input was applied.
    Stop,
}

/// Zero-order hold over timestamped inputs.
///
/// Inputs are queued in timestamp order and become the held value at the
/// first tick starting at or after their `t`; until then the previous value
/// (initially `(0, 0)`) is reused.
#[derive(Debug, Clone, Default)]
pub struct InputHold {
    queue: VecDeque<TimedInput>,
    held: (f64, f64),
    last_t: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("input timestamp {t} precedes the previous one ({previous})")]
pub struct OutOfOrderInput {
    pub t: f64,
    pub previous: f64,
}

impl InputHold {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, input: TimedInput) -> Result<(), OutOfOrderInput> {
        if let Some(previous) = self.last_t {
            if input.t < previous {
                return Err(OutOfOrderInput {
                    t: input.t,
                    previous,
                });
            }
        }
        self.last_t = Some(input.t);
        self.queue.push_back(input);
        Ok(())
    }

    /// Applies every input due by `start` and returns the held `(x, y)`.
    pub fn advance(&mut self, start: f64) -> (f64, f64) {
        while let Some(next) = self.queue.front() {
            if next.t > start + SCHEDULE_EPSILON {
                break;
            }
            self.held = (next.x, next.y);
            self.queue.pop_front();
        }
        self.held
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn last_t(&self) -> Option<f64> {
        self.last_t
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("report was recorded on level {report:?} but level {given:?} was given")]
    LevelMismatch { report: String, given: String },
    #[error("trace sample {index}: {source}")]
    Input { index: usize, source: InputError },
    #[error(transparent)]
    OutOfOrder(#[from] OutOfOrderInput),
    #[error(transparent)]
    Session(#[from] SessionError),
}

pub fn inputs_from_trace(
    samples: &[TraceSample],
    pipeline: &AxisPipeline,
) -> Result<Vec<TimedInput>, ReplayError> {
    samples
        .iter()
        .enumerate()
        .map(|(index, s)| {
            let js = pipeline
                .sample(&s.axes, s.t)
                .map_err(|source| ReplayError::Input { index, source })?;
            Ok(TimedInput {
                t: s.t,
                x: js.x,
                y: js.y,
            })
        })
        .collect()
}

/// Runs a session over `inputs` (sorted by `t`), calling `observe` after each tick.
pub fn replay_with(
    level: Arc<Level>,
    params: ChairParams,
    config: SessionConfig,
    inputs: &[TimedInput],
    at_end: TraceEnd,
    tick_limit: Option<(u64, EndReason)>,
    mut observe: impl FnMut(&Session, &Frame),
) -> Result<SessionReport, ReplayError> {
    let mut session = Session::new(level, params, config)?;
    let dt = config.dt;
    let mut hold = InputHold::new();
    for input in inputs {
        hold.push(*input)?;
    }
    while !session.is_ended() {
        let k = session.tick_count() + 1;
        if let Some((limit, reason)) = tick_limit {
            if k > limit {
                session.end(reason);
                break;
            }
        }
        let start = (k - 1) as f64 * dt;
        let held = hold.advance(start);
        if at_end == TraceEnd::Stop
            && hold.pending() == 0
            && hold
                .last_t()
                .is_none_or(|last| start > last + SCHEDULE_EPSILON)
        {
            session.end(EndReason::TraceEnded);
            break;
        }
        let frame = session.tick(JoystickSample::new(held.0, held.1, start))?;
        observe(&session, &frame);
    }
    Ok(session.finalize()?)
}

pub fn replay(
    level: Arc<Level>,
    params: ChairParams,
    config: SessionConfig,
    inputs: &[TimedInput],
    at_end: TraceEnd,
) -> Result<SessionReport, ReplayError> {
    replay_with(level, params, config, inputs, at_end, None, |_, _| {})
}

/// Re-runs a recorded session from its report, reproducing its tick count
/// and end reason when it was ended from outside.
pub fn replay_report(
    level: Arc<Level>,
    report: &SessionReport,
) -> Result<SessionReport, ReplayError> {
    if level.id != report.level_id {
        return Err(ReplayError::LevelMismatch {
            report: report.level_id.clone(),
            given: level.id.clone(),
        });
    }
    let dt = report.config.dt;
    let inputs: Vec<TimedInput> = report
        .trace
        .iter()
        .map(|e| TimedInput {
            t: (e.tick - 1) as f64 * dt,
            x: e.x,
            y: e.y,
        })
        .collect();
    replay_with(
        level,
        report.params,
        report.config,
        &inputs,
        TraceEnd::Hold,
        Some((report.metrics.ticks, report.end_reason)),
        |_, _| {},
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::{fixtures::STRAIGHT, load_level};

    fn level() -> Arc<Level> {
        Arc::new(load_level(STRAIGHT.as_bytes()).unwrap())
    }

    fn sixty_hz(n: usize, x: f64, y: f64) -> Vec<TimedInput> {
        (0..n)
            .map(|i| TimedInput {
                t: i as f64 / 60.0,
                x,
                y,
            })
            .collect()
    }

    #[test]
    fn stop_at_trace_end_runs_one_tick_per_sample() {
        let inputs = sixty_hz(600, 0.0, 0.0);
        let r = replay(
            level(),
            ChairParams::default(),
            SessionConfig::default(),
            &inputs,
            TraceEnd::Stop,
        )
        .unwrap();
        assert_eq!(r.metrics.ticks, 600);
        assert_eq!(r.end_reason, EndReason::TraceEnded);
        assert!((r.metrics.on_route_time - 10.0).abs() <= 1.0 / 60.0);
        assert_eq!(r.metrics.off_route_time, 0.0);
    }

    #[test]
    fn hold_runs_until_completion() {
        let inputs = sixty_hz(60, 0.0, 1.0);
        let r = replay(
            level(),
            ChairParams::default(),
            SessionConfig::default(),
            &inputs,
            TraceEnd::Hold,
        )
        .unwrap();
        assert!(r.metrics.completed);
        assert_eq!(r.end_reason, EndReason::Completed);
    }

    #[test]
    fn empty_trace_holds_rest_until_timeout() {
        let config = SessionConfig {
            max_duration: 3.0,
            ..SessionConfig::default()
        };
        let r = replay(level(), ChairParams::default(), config, &[], TraceEnd::Hold).unwrap();
        assert_eq!(r.end_reason, EndReason::Timeout);
        assert_eq!(r.metrics.ticks, 180);
        assert!(r
            .events
            .iter()
            .all(|e| e.kind == crate::events::EventKind::SessionTimeout));
    }

    #[test]
    fn late_inputs_apply_from_their_tick() {
        let inputs = [TimedInput {
            t: 0.5,
            x: 0.0,
            y: 1.0,
        }];
        let r = replay(
            level(),
            ChairParams::default(),
            SessionConfig::default(),
            &inputs,
            TraceEnd::Stop,
        )
        .unwrap();
        // Ticks 1..=30 idle, tick 31 starts at t = 0.5 and uses the input.
        assert_eq!(r.trace[0].tick, 1);
        assert_eq!(r.trace[1].tick, 31);
        assert_eq!(r.metrics.ticks, 31);
    }

    #[test]
    fn report_replays_to_identical_report() {
        let inputs: Vec<TimedInput> = (0..900)
            .map(|i| TimedInput {
                t: i as f64 / 60.0,
                x: ((i / 90) as f64 * 0.7).sin(),
                y: 0.6,
            })
            .collect();
        let config = SessionConfig {
            max_duration: 20.0,
            ..SessionConfig::default()
        };
        let original = replay(
            level(),
            ChairParams::default(),
            config,
            &inputs,
            TraceEnd::Stop,
        )
        .unwrap();
        let again = replay_report(level(), &original).unwrap();
        assert_eq!(again.canonical_json(), original.canonical_json());
    }

    #[test]
    fn hold_rejects_out_of_order_and_applies_when_due() {
        let mut hold = InputHold::new();
        hold.push(TimedInput {
            t: 0.1,
            x: 0.5,
            y: 0.0,
        })
        .unwrap();
        hold.push(TimedInput {
            t: 0.1,
            x: 0.6,
            y: 0.0,
        })
        .unwrap();
        assert!(hold
            .push(TimedInput {
                t: 0.05,
                x: 0.0,
                y: 0.0
            })
            .is_err());
        assert_eq!(hold.advance(0.0), (0.0, 0.0));
        assert_eq!(hold.pending(), 2);
        assert_eq!(hold.advance(0.1), (0.6, 0.0));
        assert_eq!(hold.advance(5.0), (0.6, 0.0));
    }

    #[test]
    fn report_for_another_level_is_rejected() {
        let r = replay(
            level(),
            ChairParams::default(),
            SessionConfig::default(),
            &[],
            TraceEnd::Stop,
        )
        .unwrap();
        let mut other = (*level()).clone();
        other.id = "elsewhere".into();
        assert!(matches!(
            replay_report(Arc::new(other), &r),
            Err(ReplayError::LevelMismatch { .. })
        ));
    }
}
