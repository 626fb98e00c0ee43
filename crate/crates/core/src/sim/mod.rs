// SPDX-License-Identifier: Apache-2.0

//! Synthetic workloads, fault injection and accuracy experiments.

pub mod bench;
pub mod generate;
pub mod inject;
pub mod plan;
pub mod scenario;
pub mod trial;

pub use generate::{generate_policy, GeneratorConfig, Profile};
pub use inject::{inject_faults, InjectConfig};
pub use plan::{Fault, FaultKind, FaultPlan};
pub use trial::{run_sweep, run_trial, Algorithm, ModelScope, SweepRow, TrialParams, TrialResult};
