// SPDX-License-Identifier: Apache-2.0

//! Fault localization for network policy deployment.
//!
//! The pipeline runs policy → [`compiler::compile`] (L-type rules) →
//! [`tcam::deploy`] (T-type rules) → [`equivalence::check_equivalence`]
//! (missing rules) → [`risk`] models augmented with failures →
//! [`localize::scout`] or [`localize::score`] (hypothesis) →
//! [`correlate::correlate`] (physical root causes). [`sim`] generates
//! synthetic policies, injects faults and measures accuracy.

pub mod changelog;
pub mod compiler;
pub mod correlate;
pub mod equivalence;
pub mod error;
pub mod io;
pub mod localize;
pub mod object;
pub mod policy;
pub mod risk;
pub mod sim;
pub mod tcam;

pub use changelog::{ChangeAction, ChangeLog, ChangeLogEntry};
pub use compiler::{compile, CompiledPolicy, Rule, RuleProvenance};
pub use correlate::{correlate, FaultLog, FaultLogEntry, RootCauseReport, SignatureSet};
pub use equivalence::{check_equivalence, MissingRuleReport};
pub use error::{Error, Result};
pub use localize::{score, scout, Hypothesis, Stage};
pub use object::{EpgPair, ObjectId, ObjectKind};
pub use policy::{validate_policy, NetworkPolicy};
pub use risk::{build_controller_model, build_switch_model, FailureSignature, ModelKind, RiskModel, Status};
pub use tcam::{deploy, DeployOptions, Deployment, TcamStore};
