//! Scenario runner around `gridresp-core`: case/parameter file loading,
//! the end-to-end pipeline (reduce → assemble → solve → metrics), and the
//! report files the binary emits.
//!
//! Everything here is std-only plumbing; the numerics live in the core
//! crate. The library surface exists so integration tests can drive the
//! same code paths as the binary without spawning processes.

pub mod config;
pub mod emit;
pub mod error;
pub mod fitcmd;
pub mod matpower;
pub mod native;
pub mod params;
pub mod scenario;
pub mod sweep;
pub mod synth;
