//! Dependency-structure learning for the stochastic stream: DAG
//! representation, oracle-seeded initialization, and simulated-annealing
//! search over the fit/sparsity/prior objective.

mod anneal;
mod dag;
mod score;
mod seed;

use thiserror::Error;

use crate::oracle::OracleError;

pub use anneal::{
    anneal, initial_temperature, search, AnnealOutcome, ChainReport, SearchOutcome, TraceEntry,
    TEMPERATURE_FLOOR,
};
pub use dag::{propose_move, DagError, DagNode, DagStructure};
pub use score::{CachedFit, FitCache, ScoreBreakdown, Scorer, SearchConfig};
pub use seed::sample_seed_dag;

#[derive(Debug, Error)]
pub enum StructureError {
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
    #[error("dag: {0}")]
    Dag(#[from] DagError),
    #[error("fitting node {node:?} failed: {detail}")]
    Score { node: String, detail: String },
    #[error("bad search configuration: {0}")]
    Config(String),
    #[error("chain aborted after {} steps: {detail}", trace.len())]
    ChainAborted {
        detail: String,
        trace: Vec<TraceEntry>,
    },
    #[error("all {0} search chains failed")]
    AllChainsFailed(usize),
}
