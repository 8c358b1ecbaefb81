//! Hybrid world-model learning toolkit.
//!
//! Environment dynamics are split into two streams. The deterministic stream is
//! modeled by a transition program: small interpreted functions that emit
//! structured-document patches, repaired by a validation-gated refinement loop.
//! The stochastic stream is modeled by a Bayesian network whose structure is
//! found by simulated annealing under a knowledge-oracle prior, with per-node
//! quantile or categorical conditional distributions. The combined model drives
//! an MCTS/MPC planner, exercised end-to-end on a coffee-shop simulator.

pub mod coffeeshop;
pub mod cpd;
pub mod doc;
pub mod metrics;
pub mod model;
pub mod planner;
pub mod oracle;
pub mod program;
pub mod refine;
pub mod schema;
pub mod script;
pub mod structure;

pub use doc::{DiffEntry, DiffKind, DocValue, PatchOp, Pointer};
pub use program::{
    classify_error, ErrorKind, FunctionDef, FunctionKind, Prediction, PredictionError,
    TransitionProgram,
};
pub use refine::{refine, Refinement, RefineConfig, RefinementLog};
pub use schema::{ActionSpec, ObservationSchema, Stream, TransitionRecord, VariableSpec};
