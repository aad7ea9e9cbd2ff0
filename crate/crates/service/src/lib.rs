//! Live tuning service: streams composited frames over WebSocket and
//! accepts parameter updates from the browser console.
//!
//! Routes: `GET /healthz`, `GET /backgrounds`, `GET /ranges`, and the
//! WebSocket at `GET /ws?format=png|jpeg`. With a UI directory configured,
//! every other path is served from it.

pub mod config;
pub mod protocol;
pub mod server;
pub mod session;

use std::net::SocketAddr;

pub use config::{builtin_backgrounds, ServiceConfig, SessionMode, SourceSpec};
pub use server::{router, serve, spawn};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },

    #[error("server failed: {0}")]
    Serve(#[source] std::io::Error),

    #[error(transparent)]
    Pipeline(#[from] depthmatte::Error),
}
