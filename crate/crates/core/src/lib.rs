// SPDX-License-Identifier: Apache-2.0
//! Cycle-level simulator for fault-tolerant 3D mesh networks-on-chip.

pub mod codec;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod fault;
pub mod model;
pub mod mttf;
pub mod router;
pub mod routing;
pub mod selftest;
pub mod traffic;

pub use error::{Error, Result};
pub use model::{Coord3, Dims, Direction, Flit, FlitKind, NetworkConfig, Packet, RoutingAlgorithm, Variant};
pub use engine::{run, MetricsReport, Network};
pub use experiment::ExperimentConfig;
pub use fault::{Distribution, FaultPlan};
pub use traffic::{TrafficKind, TrafficSource};

/// Campaign summary in floating point.
pub type MttfReport = mttf::MttfSummary<f64>;
/// Campaign summary in exact rational arithmetic.
pub type ExactMttfReport = mttf::MttfSummary<num_rational::Rational64>;
