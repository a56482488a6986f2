//! Deterministic discrete-event simulation of a process group.

mod checker;
mod config;
mod report;
mod trace;
mod world;

pub use checker::{CheckSummary, InvariantChecker, Violation, ViolationKind};
pub use config::{derive_seed, ConfigError, SimConfig, Workload};
pub use report::{RunReport, SupportStats};
pub use trace::{Note, TraceFile, TraceKind, TraceParseError, TraceRecord};
pub use world::{SimError, SimWorld};
