//! Per-course state machine: drives the chair one fixed tick at a time,
//! classifies on/off route, raises feedback events and accumulates metrics.

use crate::chair::{self, ChairParams, ChairState, JoystickSample, SimConfig};
use crate::events::{EventKind, SimEvent};
use crate::level::{goal_reached, Level};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::sync::Arc;

/// Default session length in seconds: sessions of two to three minutes.
pub const DEFAULT_MAX_DURATION: f64 = 180.0;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SessionError {
    #[error("session has already ended")]
    SessionEnded,
    #[error("session has not ended yet")]
    SessionNotEnded,
    #[error("invalid session setup: {}", .0.join("; "))]
    InvalidSetup(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub dt: f64,
    pub assist_gain: f64,
    /// Seconds of simulated time before the session times out.
    pub max_duration: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        let sim = SimConfig::default();
        Self {
            dt: sim.dt,
            assist_gain: sim.assist_gain,
            max_duration: DEFAULT_MAX_DURATION,
        }
    }
}

impl SessionConfig {
    pub fn sim(&self) -> SimConfig {
        SimConfig {
            dt: self.dt,
            assist_gain: self.assist_gain,
        }
    }

    /// Number of ticks after which the session times out.
    pub fn max_ticks(&self) -> u64 {
        (self.max_duration / self.dt - 1e-9).ceil().max(1.0) as u64
    }

    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errors = Vec::new();
        if !(self.dt.is_finite() && self.dt > 0.0) {
            errors.push(format!("dt must be > 0, got {}", self.dt));
        }
        if !(self.assist_gain.is_finite() && self.assist_gain >= 0.0) {
            errors.push(format!(
                "assist_gain must be >= 0, got {}",
                self.assist_gain
            ));
        }
        if !(self.max_duration.is_finite() && self.max_duration > 0.0) {
            errors.push(format!(
                "max_duration must be > 0, got {}",
                self.max_duration
            ));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Completed,
    Timeout,
    /// The client asked to stop.
    ClientEnded,
    Disconnected,
    ServerShutdown,
    /// Offline replay ran out of recorded input.
    TraceEnded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub ticks: u64,
    pub elapsed: f64,
    pub off_route_time: f64,
    pub on_route_time: f64,
    pub collision_count: u64,
    pub waypoints_hit: usize,
    pub completed: bool,
    pub completion_time: Option<f64>,
}

/// One change point of the applied input: from `tick` on, the chair is
/// driven by `(x, y)` until the next entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub tick: u64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub tick: u64,
    pub sim_time: f64,
    pub chair: ChairState,
    pub on_track: bool,
    /// Events since the previous delivered frame.
    pub events: Vec<SimEvent>,
    pub metrics: SessionMetrics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Session {
    level: Arc<Level>,
    params: ChairParams,
    config: SessionConfig,
    state: ChairState,
    tick: u64,
    on_track: bool,
    next_waypoint: usize,
    on_ticks: u64,
    off_ticks: u64,
    collision_count: u64,
    completed_tick: Option<u64>,
    end: Option<EndReason>,
    events: Vec<SimEvent>,
    trace: Vec<TraceEntry>,
}

impl Session {
    pub fn new(
        level: Arc<Level>,
        params: ChairParams,
        config: SessionConfig,
    ) -> Result<Self, SessionError> {
        let mut errors = Vec::new();
        if let Err(e) = params.validate() {
            errors.extend(e);
        }
        if let Err(e) = config.validate() {
            errors.extend(e);
        }
        if !errors.is_empty() {
            return Err(SessionError::InvalidSetup(errors));
        }
        let start = level.start;
        let state = ChairState::at_rest(start.position.x, start.position.y, start.heading);
        let on_track = level.is_on_track(start.position);
        Ok(Self {
            level,
            params,
            config,
            state,
            tick: 0,
            on_track,
            next_waypoint: 0,
            on_ticks: 0,
            off_ticks: 0,
            collision_count: 0,
            completed_tick: None,
            end: None,
            events: Vec::new(),
            trace: Vec::new(),
        })
    }

    pub fn level(&self) -> &Arc<Level> {
        &self.level
    }

    pub fn params(&self) -> &ChairParams {
        &self.params
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn state(&self) -> &ChairState {
        &self.state
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn on_track(&self) -> bool {
        self.on_track
    }

    pub fn end_reason(&self) -> Option<EndReason> {
        self.end
    }

    pub fn is_ended(&self) -> bool {
        self.end.is_some()
    }

    pub fn events(&self) -> &[SimEvent] {
        &self.events
    }

    pub fn metrics(&self) -> SessionMetrics {
        let dt = self.config.dt;
        SessionMetrics {
            ticks: self.tick,
            elapsed: self.tick as f64 * dt,
            off_route_time: self.off_ticks as f64 * dt,
            on_route_time: self.on_ticks as f64 * dt,
            collision_count: self.collision_count,
            waypoints_hit: self.next_waypoint,
            completed: self.completed_tick.is_some(),
            completion_time: self.completed_tick.map(|t| t as f64 * dt),
        }
    }

    /// Advances one tick with `sample` held over it.
    pub fn tick(&mut self, sample: JoystickSample) -> Result<Frame, SessionError> {
        if self.end.is_some() {
            return Err(SessionError::SessionEnded);
        }
        let sample = sanitize(sample);
        self.tick += 1;
        let tick = self.tick;
        if self
            .trace
            .last()
            .is_none_or(|last| last.x != sample.x || last.y != sample.y)
        {
            self.trace.push(TraceEntry {
                tick,
                x: sample.x,
                y: sample.y,
            });
        }

        let out = chair::step(
            &self.state,
            &sample,
            &self.level,
            &self.params,
            &self.config.sim(),
        );
        self.state = out.state;
        let first_new = self.events.len();
        for kind in out.events {
            if matches!(kind, EventKind::Collision { .. }) {
                self.collision_count += 1;
            }
            self.events.push(SimEvent { tick, kind });
        }

        let position = self.state.position();
        let on_track = self.level.is_on_track(position);
        if on_track {
            self.on_ticks += 1;
        } else {
            self.off_ticks += 1;
        }
        if on_track != self.on_track {
            if on_track {
                self.events.push(SimEvent {
                    tick,
                    kind: EventKind::OnTrackEntered,
                });
                self.events.push(SimEvent {
                    tick,
                    kind: EventKind::RewardShown,
                });
            } else {
                self.events.push(SimEvent {
                    tick,
                    kind: EventKind::OnTrackExited,
                });
            }
            self.on_track = on_track;
        }

        while let Some(wp) = self.level.waypoints.get(self.next_waypoint) {
            if !wp.contains_strict(position) {
                break;
            }
            self.events.push(SimEvent {
                tick,
                kind: EventKind::WaypointReached {
                    index: self.next_waypoint,
                },
            });
            self.next_waypoint += 1;
        }

        if goal_reached(position, &self.level) {
            self.completed_tick = Some(tick);
            self.end = Some(EndReason::Completed);
            self.events.push(SimEvent {
                tick,
                kind: EventKind::LevelCompleted,
            });
        } else if tick >= self.config.max_ticks() {
            self.end = Some(EndReason::Timeout);
            self.events.push(SimEvent {
                tick,
                kind: EventKind::SessionTimeout,
            });
        }

        Ok(Frame {
            tick,
            sim_time: tick as f64 * self.config.dt,
            chair: self.state,
            on_track,
            events: self.events[first_new..].to_vec(),
            metrics: self.metrics(),
        })
    }

    /// Ends the session from outside (client request, disconnect, shutdown).
    /// Returns false if it had already ended.
    pub fn end(&mut self, reason: EndReason) -> bool {
        if self.end.is_some() {
            return false;
        }
        self.end = Some(reason);
        true
    }

    pub fn finalize(&self) -> Result<SessionReport, SessionError> {
        let end_reason = self.end.ok_or(SessionError::SessionNotEnded)?;
        Ok(SessionReport {
            level_id: self.level.id.clone(),
            params: self.params,
            config: self.config,
            end_reason,
            metrics: self.metrics(),
            events: self.events.clone(),
            trace: self.trace.clone(),
            generated_at_unix_ms: None,
            canonical_sha256: None,
        })
    }
}

fn sanitize(s: JoystickSample) -> JoystickSample {
    let axis = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
    JoystickSample::new(axis(s.x), axis(s.y), s.t)
}

/// The record of a finished session.
///
/// `generated_at_unix_ms` and `canonical_sha256` are outside the canonical
/// body: two runs on the same inputs produce byte-identical
/// [`SessionReport::canonical_json`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub level_id: String,
    pub params: ChairParams,
    pub config: SessionConfig,
    pub end_reason: EndReason,
    pub metrics: SessionMetrics,
    pub events: Vec<SimEvent>,
    pub trace: Vec<TraceEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at_unix_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical_sha256: Option<String>,
}

impl SessionReport {
    pub fn canonical(&self) -> SessionReport {
        SessionReport {
            generated_at_unix_ms: None,
            canonical_sha256: None,
            ..self.clone()
        }
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(&self.canonical()).expect("report serializes")
    }

    pub fn canonical_digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    /// Adds the wall-clock stamp and the digest of the canonical body.
    pub fn stamped(&self, unix_ms: u64) -> SessionReport {
        SessionReport {
            generated_at_unix_ms: Some(unix_ms),
            canonical_sha256: Some(self.canonical_digest()),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::{fixtures::STRAIGHT, load_level};

    fn session(max_duration: f64) -> Session {
        let level = Arc::new(load_level(STRAIGHT.as_bytes()).unwrap());
        Session::new(
            level,
            ChairParams::default(),
            SessionConfig {
                max_duration,
                ..SessionConfig::default()
            },
        )
        .unwrap()
    }

    fn forward(t: f64) -> JoystickSample {
        JoystickSample::new(0.0, 1.0, t)
    }

    #[test]
    fn idle_session_times_out() {
        let mut s = session(2.0);
        let mut last = None;
        while !s.is_ended() {
            last = Some(s.tick(JoystickSample::new(0.0, 0.0, 0.0)).unwrap());
        }
        let frame = last.unwrap();
        assert_eq!(frame.tick, 120);
        assert_eq!(frame.events.last().unwrap().kind, EventKind::SessionTimeout);
        let report = s.finalize().unwrap();
        assert_eq!(report.end_reason, EndReason::Timeout);
        assert!(!report.metrics.completed);
        assert!((report.metrics.elapsed - 2.0).abs() <= 1.0 / 60.0);
        assert_eq!(report.metrics.collision_count, 0);
        assert_eq!(report.metrics.off_route_time, 0.0);
        assert_eq!(
            s.tick(JoystickSample::new(0.0, 0.0, 0.0)),
            Err(SessionError::SessionEnded)
        );
    }

    #[test]
    fn default_timeout_is_three_minutes() {
        assert_eq!(SessionConfig::default().max_duration, 180.0);
        assert_eq!(SessionConfig::default().max_ticks(), 10_800);
    }

    #[test]
    fn finalize_requires_end() {
        let s = session(5.0);
        assert_eq!(s.finalize().unwrap_err(), SessionError::SessionNotEnded);
    }

    #[test]
    fn driving_forward_completes_the_level() {
        let mut s = session(60.0);
        let mut kinds = Vec::new();
        while !s.is_ended() {
            let f = s.tick(forward(0.0)).unwrap();
            assert_eq!(f.sim_time, f.tick as f64 * (1.0 / 60.0));
            kinds.extend(f.events.iter().map(|e| e.kind));
        }
        let m = s.metrics();
        assert!(m.completed);
        assert_eq!(s.end_reason(), Some(EndReason::Completed));
        assert_eq!(m.completion_time, Some(m.elapsed));
        assert_eq!(m.waypoints_hit, 1);
        assert_eq!(kinds.first(), Some(&EventKind::MoveStarted));
        assert_eq!(kinds.last(), Some(&EventKind::LevelCompleted));
        assert!(kinds.contains(&EventKind::WaypointReached { index: 0 }));
        // Goal rim at x = 9.2 from x = 1: 1.5 s ramp covers 1.125 m, the rest at 1.5 m/s.
        let expected = 1.5 + (8.2 - 1.125) / 1.5;
        assert!((m.elapsed - expected).abs() < 2.0 / 60.0, "{}", m.elapsed);
    }

    #[test]
    fn leaving_and_reentering_the_corridor() {
        let mut s = session(60.0);
        let mut kinds = Vec::new();
        // Turn left and drive out, then come back.
        for i in 0..400 {
            let sample = if i < 40 {
                JoystickSample::new(-1.0, 0.0, 0.0)
            } else {
                forward(0.0)
            };
            kinds.extend(s.tick(sample).unwrap().events.into_iter().map(|e| e.kind));
        }
        assert!(kinds.contains(&EventKind::OnTrackExited));
        let entered = kinds
            .iter()
            .filter(|k| **k == EventKind::OnTrackEntered)
            .count();
        let rewards = kinds
            .iter()
            .filter(|k| **k == EventKind::RewardShown)
            .count();
        assert_eq!(entered, rewards);
        let m = s.metrics();
        assert!(m.off_route_time > 0.0);
        assert!((m.on_route_time + m.off_route_time - m.elapsed).abs() < 1e-9);
    }

    #[test]
    fn client_end_and_report_shape() {
        let mut s = session(60.0);
        for _ in 0..30 {
            s.tick(forward(0.0)).unwrap();
        }
        s.tick(JoystickSample::new(0.0, 0.0, 0.0)).unwrap();
        assert!(s.end(EndReason::ClientEnded));
        assert!(!s.end(EndReason::Disconnected));
        let report = s.finalize().unwrap();
        assert_eq!(report.end_reason, EndReason::ClientEnded);
        assert_eq!(
            report.trace,
            vec![
                TraceEntry {
                    tick: 1,
                    x: 0.0,
                    y: 1.0
                },
                TraceEntry {
                    tick: 31,
                    x: 0.0,
                    y: 0.0
                },
            ]
        );
        let stamped = report.stamped(1_700_000_000_000);
        assert_eq!(stamped.canonical_json(), report.canonical_json());
        assert_eq!(
            stamped.canonical_sha256.as_deref(),
            Some(report.canonical_digest().as_str())
        );
        let json = serde_json::to_string(&stamped).unwrap();
        let back: SessionReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, stamped);
        assert!(!report.canonical_json().contains("generated_at"));
    }

    #[test]
    fn saved_session_resumes_identically() {
        let mut whole = session(30.0);
        let mut split = session(30.0);
        let input = |i: usize| JoystickSample::new(((i as f64) * 0.01).sin(), 0.8, 0.0);
        for i in 0..500 {
            whole.tick(input(i)).unwrap();
        }
        for i in 0..250 {
            split.tick(input(i)).unwrap();
        }
        let saved = serde_json::to_string(&split).unwrap();
        let mut resumed: Session = serde_json::from_str(&saved).unwrap();
        for i in 250..500 {
            resumed.tick(input(i)).unwrap();
        }
        assert_eq!(resumed.metrics(), whole.metrics());
        assert_eq!(resumed.events(), whole.events());
        assert_eq!(resumed.state(), whole.state());
    }

    #[test]
    fn invalid_setup_is_rejected() {
        let level = Arc::new(load_level(STRAIGHT.as_bytes()).unwrap());
        let err = Session::new(
            level,
            ChairParams::default(),
            SessionConfig {
                dt: 0.0,
                ..SessionConfig::default()
            },
        );
        assert!(matches!(err, Err(SessionError::InvalidSetup(_))));
    }
}
