//! Snapshot builder, batch exporter and read-only HTTP API for community
//! epidemic portraits.

pub mod api;
pub mod cli;
pub mod config;
pub mod engine;
pub mod export;
pub mod server;
