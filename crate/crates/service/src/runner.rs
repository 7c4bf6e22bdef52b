//! Transport-independent part of a live session: Hello handling, input
//! normalization and scheduling, and frame cadence.

use crate::registry::LevelRegistry;
use wheelsim_core::input::AxisPipeline;
use wheelsim_core::protocol::{ErrorCode, ErrorMsg, Hello, Input, Welcome, WireMessage};
use wheelsim_core::replay::{InputHold, TimedInput};
use wheelsim_core::{
    ChairParams, EndReason, Frame, JoystickSample, Session, SessionConfig, SessionReport,
};

fn error(code: ErrorCode, message: impl Into<String>) -> ErrorMsg {
    ErrorMsg {
        code,
        message: message.into(),
    }
}

pub struct SessionRunner {
    session: Session,
    pipeline: AxisPipeline,
    hold: InputHold,
    frame_every: u64,
}

impl SessionRunner {
    /// Validates a Hello and opens the session; returns the Welcome to send.
    pub fn start(
        registry: &LevelRegistry,
        hello: Hello,
        params: ChairParams,
        config: SessionConfig,
        frame_every: u64,
    ) -> Result<(Self, WireMessage), ErrorMsg> {
        let level = registry.get(&hello.level_id).ok_or_else(|| {
            error(
                ErrorCode::UnknownLevel,
                format!("no level {:?}", hello.level_id),
            )
        })?;
        let pipeline = match (hello.device_descriptor, hello.calibration) {
            (Some(device), calibration) => AxisPipeline::with_device(device, calibration)
                .map_err(|e| error(ErrorCode::BadMessage, e.to_string()))?,
            (None, Some(_)) => {
                return Err(error(
                    ErrorCode::BadMessage,
                    "calibration given without device_descriptor",
                ))
            }
            (None, None) => AxisPipeline::Passthrough,
        };
        let session = Session::new(level.clone(), params, config)
            .map_err(|e| error(ErrorCode::BadMessage, e.to_string()))?;
        let welcome = WireMessage::Welcome(Box::new(Welcome {
            level: (*level).clone(),
            params,
            dt: config.dt,
        }));
        Ok((
            Self {
                session,
                pipeline,
                hold: InputHold::new(),
                frame_every: frame_every.max(1),
            },
            welcome,
        ))
    }

    /// Queues an input. `t` is read on the session clock (seconds since Welcome);
    /// the input takes effect at the first tick starting at or after it.
    pub fn on_input(&mut self, input: &Input) -> Result<(), ErrorMsg> {
        if self.session.is_ended() {
            return Err(error(ErrorCode::SessionEnded, "session has ended"));
        }
        let sample = self
            .pipeline
            .sample(&input.axes, input.t)
            .map_err(|e| error(ErrorCode::BadMessage, e.to_string()))?;
        self.hold
            .push(TimedInput {
                t: input.t,
                x: sample.x,
                y: sample.y,
            })
            .map_err(|e| error(ErrorCode::BadMessage, e.to_string()))
    }

    /// Runs one tick. Returns the frame to publish: every `frame_every`-th
    /// tick, and any tick that raised events or ended the session.
    pub fn on_tick(&mut self) -> Option<Frame> {
        if self.session.is_ended() {
            return None;
        }
        let start = self.session.tick_count() as f64 * self.session.config().dt;
        let (x, y) = self.hold.advance(start);
        let frame = self.session.tick(JoystickSample::new(x, y, start)).ok()?;
        let publish = !frame.events.is_empty()
            || frame.tick % self.frame_every == 0
            || self.session.is_ended();
        publish.then_some(frame)
    }

    pub fn end(&mut self, reason: EndReason) -> bool {
        self.session.end(reason)
    }

    pub fn is_ended(&self) -> bool {
        self.session.is_ended()
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn report(&self) -> Option<SessionReport> {
        self.session.finalize().ok()
    }
}
