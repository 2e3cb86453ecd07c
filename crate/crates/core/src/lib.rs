//! Compressed SGD with Armijo step-size search and scaling.
//!
//! * [`objectives`]: interpolating finite-sum test problems with exact metadata.
//! * [`compression`]: top-k sparsification and error feedback.
//! * [`linesearch`]: Armijo backtracking and the `α_max` reset rule.
//! * [`optimizers`]: single-node loops and the perturbed-iterate tracker.
//! * [`theory`]: closed-form convergence constants.
//! * [`distributed`]: synchronous multi-worker simulator and wire codec.
//! * [`harness`]: configuration, CSV traces, rate fitting and the invariant suite.

pub mod compression;
pub mod distributed;
pub mod harness;
pub mod linesearch;
pub mod objectives;
pub mod optimizers;
pub mod rng;
pub mod theory;
pub mod vector;

pub use compression::{compress_with_feedback, contraction_check, top_k, CompressionSpec, ErrorMemory};
pub use linesearch::{armijo_search, next_alpha_max, AlphaMaxRule, ArmijoConfig, FirstTrial, LineSearchResult};
pub use objectives::{FiniteSumObjective, ObjectiveSpec};
pub use optimizers::{RunOutcome, RunTrace, StepRecord};
pub use theory::{TheoryInputs, TheoryReport};
pub use vector::DenseVector;
