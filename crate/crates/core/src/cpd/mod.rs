//! Conditional distribution models for the stochastic stream.
//!
//! Each stochastic variable gets its own small model of
//! `p(x_{t,v} | same-step parents, x_{t-1}, a_{t-1}, s_t, s_{t-1})`:
//! quantile regression over a fixed tau grid for numeric variables, a
//! softmax classifier for categorical ones. The module also provides the
//! feature encoding that flattens that conditioning set, inverse-CDF and
//! softmax sampling (including ancestral sampling of a full observation),
//! and the node-wise log-likelihood surrogate consumed by structure search.

mod encode;
mod model;
mod net;
mod sample;

pub use encode::FeatureEncoding;
pub use model::{
    derive_seed, fit_node, node_loglik_surrogate, pinball_loss, CategoricalModel, CpdError,
    FitHyper, NodeModel, QuantileModel, SURROGATE_LOG_FLOOR, TAU_GRID,
};
pub use net::{Dense, Mlp};
pub use sample::{inverse_cdf, sample_joint, sample_node};
