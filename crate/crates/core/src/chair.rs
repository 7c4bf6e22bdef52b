//! Fixed-timestep kinematics of the virtual chair.
//!
//! The chair is a differential-drive base: two driven rear wheels separated by
//! `track_width` and two passive front casters. A step runs the pipeline
//! joystick mapping → obstacle assist → per-wheel slew limit → exact-arc pose
//! integration → collision detection and push-out.

use crate::events::EventKind;
use crate::geometry::{normalize_angle, Vec2};
use crate::level::{Level, ObstacleId};
use serde::{Deserialize, Serialize};

/// Below this yaw rate (rad/s) the pose update is a straight line.
pub const STRAIGHT_LINE_YAW_RATE: f64 = 1e-6;
/// Wheel speed (m/s) above which the chair counts as moving.
pub const MOTION_THRESHOLD: f64 = 1e-3;
/// Extra distance (m) added when pushing the chair out of an obstacle.
pub const PUSH_OUT_MARGIN: f64 = 1e-6;
/// A chair already within this clearance (m) of an obstacle is in resting
/// contact; renewed contact with it does not raise another collision event.
pub const CONTACT_SLOP: f64 = 1e-3;
/// Added to the clearance in the assist's repulsive term (m).
pub const ASSIST_EPSILON: f64 = 1e-3;
/// Lookahead of the assist controller, in chair radii.
pub const ASSIST_LOOKAHEAD_RADII: f64 = 3.0;
const MAX_RESOLVE_ITERATIONS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChairParams {
    /// Distance between the driven wheels, m.
    pub track_width: f64,
    pub wheel_radius: f64,
    /// Radius of the collision circle, m.
    pub chair_radius: f64,
    /// Per-wheel speed limit, m/s.
    pub max_speed: f64,
    pub max_yaw_rate: f64,
    /// Per-wheel acceleration limit, m/s².
    pub max_accel: f64,
}

impl Default for ChairParams {
    fn default() -> Self {
        Self {
            track_width: 0.6,
            wheel_radius: 0.17,
            chair_radius: 0.45,
            max_speed: 1.5,
            max_yaw_rate: 1.2,
            max_accel: 1.0,
        }
    }
}

impl ChairParams {
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errors = Vec::new();
        for (name, value) in [
            ("track_width", self.track_width),
            ("wheel_radius", self.wheel_radius),
            ("chair_radius", self.chair_radius),
            ("max_speed", self.max_speed),
            ("max_yaw_rate", self.max_yaw_rate),
            ("max_accel", self.max_accel),
        ] {
            if !(value.is_finite() && value > 0.0) {
                errors.push(format!("{name} must be finite and > 0, got {value}"));
            }
        }
        if errors.is_empty() {
            if self.chair_radius < self.track_width / 2.0 {
                errors.push("chair_radius must be at least track_width / 2".into());
            }
            if self.max_yaw_rate * self.track_width / 2.0 > self.max_speed {
                errors.push("max_yaw_rate * track_width / 2 exceeds max_speed".into());
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

/// Normalized joystick reading: `x` lateral (+ turns right), `y` forward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JoystickSample {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl JoystickSample {
    pub const fn new(x: f64, y: f64, t: f64) -> Self {
        Self { x, y, t }
    }

    pub fn is_valid(&self) -> bool {
        self.x * self.x <= 1.0 && self.y * self.y <= 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WheelCommand {
    pub v_left: f64,
    pub v_right: f64,
}

/// Kinematic state. `wheel_spin` holds rendering angles for
/// `[rear_left, rear_right, front_left, front_right]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChairState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v_left: f64,
    pub v_right: f64,
    pub wheel_spin: [f64; 4],
}

impl ChairState {
    pub fn at_rest(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: normalize_angle(heading),
            v_left: 0.0,
            v_right: 0.0,
            wheel_spin: [0.0; 4],
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Body speed along the heading, m/s.
    pub fn body_speed(&self) -> f64 {
        (self.v_left + self.v_right) / 2.0
    }

    /// Moving when either wheel turns faster than [`MOTION_THRESHOLD`]; spinning in place counts.
    pub fn is_moving(&self) -> bool {
        self.v_left.abs().max(self.v_right.abs()) > MOTION_THRESHOLD
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionInfo {
    pub obstacle_id: ObstacleId,
    /// Unit vector pointing from the obstacle toward the chair center.
    pub contact_normal: Vec2,
    pub penetration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Fixed timestep, s.
    pub dt: f64,
    /// Obstacle-assist gain; 0 disables the assist.
    pub assist_gain: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1.0 / 60.0,
            assist_gain: 0.0,
        }
    }
}

/// Arcade mapping: `y` sets forward speed, `x` sets yaw rate (+x turns clockwise).
pub fn map_joystick(s: &JoystickSample, p: &ChairParams) -> WheelCommand {
    let v = s.y * p.max_speed;
    let omega = -s.x * p.max_yaw_rate;
    let half_track = p.track_width / 2.0;
    WheelCommand {
        v_left: (v - omega * half_track).clamp(-p.max_speed, p.max_speed),
        v_right: (v + omega * half_track).clamp(-p.max_speed, p.max_speed),
    }
}

fn slew(current: f64, target: f64, max_delta: f64) -> f64 {
    let delta = target - current;
    if delta.abs() <= max_delta {
        target
    } else {
        current + max_delta.copysign(delta)
    }
}

/// Moves each wheel speed toward its command by at most `max_accel * dt`.
pub fn apply_slew(
    current: &ChairState,
    cmd: &WheelCommand,
    dt: f64,
    p: &ChairParams,
) -> (f64, f64) {
    let max_delta = p.max_accel * dt;
    (
        slew(current.v_left, cmd.v_left, max_delta),
        slew(current.v_right, cmd.v_right, max_delta),
    )
}

/// Advances the pose with the wheel speeds held constant over `dt`.
///
/// Uses the closed-form unicycle arc; below [`STRAIGHT_LINE_YAW_RATE`] the
/// motion is treated as a straight line.
pub fn integrate_pose(st: &ChairState, dt: f64, p: &ChairParams) -> ChairState {
    let v = (st.v_left + st.v_right) / 2.0;
    let omega = (st.v_right - st.v_left) / p.track_width;
    let mut next = *st;
    if omega.abs() < STRAIGHT_LINE_YAW_RATE {
        next.x += v * st.heading.cos() * dt;
        next.y += v * st.heading.sin() * dt;
    } else {
        let dtheta = omega * dt;
        // Chord of the arc, 2R sin(Δθ/2), along the mid-step heading.
        let chord = 2.0 * (v / omega) * (dtheta / 2.0).sin();
        let mid = st.heading + dtheta / 2.0;
        next.x += chord * mid.cos();
        next.y += chord * mid.sin();
        next.heading = normalize_angle(st.heading + dtheta);
    }
    let left_turn = st.v_left * dt / p.wheel_radius;
    let right_turn = st.v_right * dt / p.wheel_radius;
    // Casters are rendered rolling with the driven wheel on their side.
    for (angle, turn) in next
        .wheel_spin
        .iter_mut()
        .zip([left_turn, right_turn, left_turn, right_turn])
    {
        *angle = normalize_angle(*angle + turn);
    }
    next
}

/// Deepest overlap between the chair circle and any obstacle, if any.
/// Contact exactly at `chair_radius` is not a collision.
pub fn detect_collision(st: &ChairState, level: &Level, p: &ChairParams) -> Option<CollisionInfo> {
    let center = st.position();
    let mut deepest: Option<CollisionInfo> = None;
    for (id, obstacle) in level.obstacles() {
        let sd = obstacle.signed_distance(center);
        if sd.distance < p.chair_radius {
            let penetration = p.chair_radius - sd.distance;
            if deepest.is_none_or(|d| penetration > d.penetration) {
                deepest = Some(CollisionInfo {
                    obstacle_id: id,
                    contact_normal: sd.normal,
                    penetration,
                });
            }
        }
    }
    deepest
}

/// Pushes the chair out along the contact normal and stops it.
pub fn resolve_collision(st: &ChairState, c: &CollisionInfo) -> ChairState {
    let push = c.penetration + PUSH_OUT_MARGIN;
    ChairState {
        x: st.x + c.contact_normal.x * push,
        y: st.y + c.contact_normal.y * push,
        v_left: 0.0,
        v_right: 0.0,
        ..*st
    }
}

/// Assist-as-needed steering: obstacles ahead of the chair within the
/// lookahead add a yaw term of `gain / (clearance + ε)` turning away from
/// them, weighted by how directly ahead they lie and by forward speed.
/// A dead-ahead obstacle turns the chair left.
pub fn assist_adjust(
    st: &ChairState,
    cmd: &WheelCommand,
    level: &Level,
    p: &ChairParams,
    gain: f64,
) -> WheelCommand {
    if gain <= 0.0 {
        return *cmd;
    }
    let forward = (cmd.v_left + cmd.v_right) / 2.0;
    if forward <= 0.0 {
        return *cmd;
    }
    let lookahead = ASSIST_LOOKAHEAD_RADII * p.chair_radius;
    let center = st.position();
    let facing = Vec2::from_angle(st.heading);
    let mut yaw = 0.0;
    for (_, obstacle) in level.obstacles() {
        let sd = obstacle.signed_distance(center);
        if sd.distance > lookahead {
            continue;
        }
        let toward = -sd.normal;
        let ahead = toward.dot(facing);
        if ahead <= 0.0 {
            continue;
        }
        let clearance = (sd.distance - p.chair_radius).max(0.0);
        let away = if facing.cross(toward) > 0.0 {
            -1.0
        } else {
            1.0
        };
        yaw += away * gain * ahead / (clearance + ASSIST_EPSILON);
    }
    if yaw == 0.0 {
        return *cmd;
    }
    let yaw = (yaw * (forward / p.max_speed).min(1.0)).clamp(-p.max_yaw_rate, p.max_yaw_rate);
    let half_track = p.track_width / 2.0;
    WheelCommand {
        v_left: (cmd.v_left - yaw * half_track).clamp(-p.max_speed, p.max_speed),
        v_right: (cmd.v_right + yaw * half_track).clamp(-p.max_speed, p.max_speed),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub state: ChairState,
    pub events: Vec<EventKind>,
}

/// One fixed-timestep update.
///
/// Collisions are resolved iteratively against the deepest overlap. If the
/// chair is still overlapping after that (a tight pocket), it keeps its
/// previous, collision-free position and stops.
pub fn step(
    st: &ChairState,
    sample: &JoystickSample,
    level: &Level,
    p: &ChairParams,
    cfg: &SimConfig,
) -> StepOutput {
    let cmd = map_joystick(sample, p);
    let cmd = assist_adjust(st, &cmd, level, p, cfg.assist_gain);
    let (v_left, v_right) = apply_slew(st, &cmd, cfg.dt, p);
    let mut next = integrate_pose(
        &ChairState {
            v_left,
            v_right,
            ..*st
        },
        cfg.dt,
        p,
    );

    let mut hit: Vec<ObstacleId> = Vec::new();
    let mut resolved = false;
    for _ in 0..MAX_RESOLVE_ITERATIONS {
        match detect_collision(&next, level, p) {
            Some(c) => {
                if !hit.contains(&c.obstacle_id) {
                    hit.push(c.obstacle_id);
                }
                next = resolve_collision(&next, &c);
            }
            None => {
                resolved = true;
                break;
            }
        }
    }
    if !resolved && detect_collision(&next, level, p).is_some() {
        next = ChairState {
            x: st.x,
            y: st.y,
            v_left: 0.0,
            v_right: 0.0,
            ..next
        };
    }

    let mut events = Vec::new();
    match (st.is_moving(), next.is_moving()) {
        (false, true) => events.push(EventKind::MoveStarted),
        (true, false) => events.push(EventKind::MoveStopped),
        _ => {}
    }
    let previous = st.position();
    for id in hit {
        let was_touching = level
            .obstacle(id)
            .is_some_and(|o| o.signed_distance(previous).distance - p.chair_radius <= CONTACT_SLOP);
        if !was_touching {
            events.push(EventKind::Collision { obstacle_id: id });
        }
    }
    StepOutput {
        state: next,
        events,
    }
}
