//! Signaling workload generation and queueing simulation for a virtualized
//! Mobility Management Entity (vMME).
//!
//! The pipeline mirrors how control-plane load reaches a pool of virtual MME
//! instances:
//!
//! 1. [`traffic`] draws per-user application sessions (web, progressive
//!    video, video calls) and lays them out on a timeline.
//! 2. [`mobility`] moves every user across a rectangular grid of cells with a
//!    reflecting fluid-flow model and reports the exact cell-crossing times.
//! 3. [`signaling`] runs the per-user connection state machine (inactivity
//!    timer) to turn activity and crossings into Service Request, Service
//!    Release and Handover procedures.
//! 4. [`qnet`] replays the resulting message trace through the datacenter
//!    chain: balancer, shared database, NFV instances, egress switch.
//!
//! [`analytics`] predicts procedure rates in closed form and [`harness`]
//! wires everything behind a CLI.

pub mod analytics;
pub mod error;
pub mod harness;
pub mod mobility;
pub mod qnet;
pub mod signaling;
pub mod stochastic;
pub mod traffic;

pub use error::{Error, Result};
