//! Outgoing message queue for one client.
//!
//! Frames coalesce once a client falls behind: when `frame_slack` frames are
//! already waiting, a new frame replaces the newest of them and inherits its
//! events, so a stalled client skips stale poses but never loses an event.
//! Other messages are delivered in order.

use std::collections::VecDeque;
use std::sync::Mutex;
use tokio::sync::Notify;
use wheelsim_core::protocol::WireMessage;
use wheelsim_core::Frame;

/// Undelivered frames tolerated before coalescing starts (about 0.25 s at 30 Hz).
pub const DEFAULT_FRAME_SLACK: usize = 8;

#[derive(Debug, Default)]
struct State {
    queue: VecDeque<WireMessage>,
    closed: bool,
    dropped_frames: u64,
}

#[derive(Debug)]
pub struct Outbox {
    state: Mutex<State>,
    ready: Notify,
    frame_slack: usize,
}

impl Default for Outbox {
    fn default() -> Self {
        Self::with_frame_slack(DEFAULT_FRAME_SLACK)
    }
}

impl Outbox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_frame_slack(frame_slack: usize) -> Self {
        Self {
            state: Mutex::default(),
            ready: Notify::new(),
            frame_slack: frame_slack.max(1),
        }
    }

    pub fn push_frame(&self, mut frame: Frame) {
        let mut state = self.state.lock().expect("outbox lock");
        if state.closed {
            return;
        }
        let waiting = state
            .queue
            .iter()
            .filter(|m| matches!(m, WireMessage::Frame(_)))
            .count();
        if waiting < self.frame_slack {
            state.queue.push_back(WireMessage::frame(frame));
        } else if let Some(WireMessage::Frame(stale)) = state.queue.back_mut() {
            let mut events = std::mem::take(&mut stale.frame.events);
            events.append(&mut frame.events);
            frame.events = events;
            stale.frame = frame;
            state.dropped_frames += 1;
        } else {
            state.queue.push_back(WireMessage::frame(frame));
        }
        drop(state);
        self.ready.notify_one();
    }

    pub fn push(&self, msg: WireMessage) {
        let mut state = self.state.lock().expect("outbox lock");
        if state.closed {
            return;
        }
        state.queue.push_back(msg);
        drop(state);
        self.ready.notify_one();
    }

    /// No further messages are accepted; queued ones are still delivered.
    pub fn close(&self) {
        self.state.lock().expect("outbox lock").closed = true;
        self.ready.notify_one();
    }

    /// Number of frames superseded before delivery.
    pub fn dropped_frames(&self) -> u64 {
        self.state.lock().expect("outbox lock").dropped_frames
    }

    /// Next message to deliver; `None` once closed and drained.
    pub async fn next(&self) -> Option<WireMessage> {
        loop {
            {
                let mut state = self.state.lock().expect("outbox lock");
                if let Some(msg) = state.queue.pop_front() {
                    return Some(msg);
                }
                if state.closed {
                    return None;
                }
            }
            self.ready.notified().await;
        }
    }
}
