//! Deterministic electric-wheelchair driving simulation.
//!
//! - [`chair`]: differential-drive kinematics, collisions and obstacle assist.
//! - [`level`]: courses, the route corridor, level files and accessibility checks.
//! - [`input`]: device descriptors, calibration, deadzone normalization, traces.
//! - [`session`]: the per-course state machine, feedback events and metrics.
//! - [`replay`]: offline replay of traces and reports.
//! - [`protocol`]: messages exchanged with UI clients.

pub mod chair;
pub mod events;
pub mod geometry;
pub mod input;
pub mod level;
pub mod protocol;
pub mod replay;
pub mod session;

pub use chair::{ChairParams, ChairState, JoystickSample, SimConfig, WheelCommand};
pub use events::{EventKind, SimEvent};
pub use geometry::Vec2;
pub use level::{load_level, Level, LevelError};
pub use session::{EndReason, Frame, Session, SessionConfig, SessionMetrics, SessionReport};
