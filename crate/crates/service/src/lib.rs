//! Realtime session service: one simulated session per WebSocket
//! connection, ticked at a fixed rate against the wall clock.

pub mod outbox;
pub mod registry;
pub mod runner;
pub mod server;

pub use registry::{LevelRegistry, RegistryError};
pub use runner::SessionRunner;
pub use server::{router, serve, ServiceConfig};
