use crate::level::ObstacleId;
use serde::{Deserialize, Serialize};

/// Feedback events raised by the simulation and the session state machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EventKind {
    /// Chair speed crossed above the motion threshold (start-of-motion sound).
    MoveStarted,
    MoveStopped,
    OnTrackEntered,
    OnTrackExited,
    WaypointReached {
        index: usize,
    },
    Collision {
        obstacle_id: ObstacleId,
    },
    /// Emitted together with every `OnTrackEntered`.
    RewardShown,
    /// End of level: fireworks and applause.
    LevelCompleted,
    SessionTimeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimEvent {
    pub tick: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_shape() {
        let e = SimEvent {
            tick: 7,
            kind: EventKind::Collision {
                obstacle_id: ObstacleId::Rect(2),
            },
        };
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(
            json,
            r#"{"tick":7,"kind":"Collision","obstacle_id":"rect:2"}"#
        );
        assert_eq!(serde_json::from_str::<SimEvent>(&json).unwrap(), e);
        let w = SimEvent {
            tick: 1,
            kind: EventKind::WaypointReached { index: 0 },
        };
        let json = serde_json::to_string(&w).unwrap();
        assert_eq!(json, r#"{"tick":1,"kind":"WaypointReached","index":0}"#);
    }
}
