//! Temporal model-based diagnosis.
//!
//! Each component's behavioral modes evolve as a discrete-time Markov chain.
//! At every instant carrying observations an atemporal Horn model yields the
//! candidate mode assignments; consecutive candidates are chained, filtered by
//! a plausibility threshold on their transition probability and ranked by
//! joint probability. Optionally the probabilities are revised against the
//! logically admitted candidates.

pub mod atemporal;
pub mod fixtures;
pub mod format;
pub mod model;
pub mod revision;
pub mod sim;
pub mod stochastic;
pub mod temporal;

pub use atemporal::{ExplanationCriterion, ModeAssignment};
pub use model::{ComponentSpec, HornRule, ModeAtom, Observation, ObservationStream, SystemModel};
pub use stochastic::{ModeDistribution, TransitionMatrix};
pub use temporal::{DiagnosticProblem, TemporalDiagnosis, Threshold, ThresholdMode};
