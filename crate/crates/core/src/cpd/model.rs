//! Per-node conditional distribution models: quantile regression for numeric
//! variables, a softmax classifier for categorical ones. Both share the same
//! small network, trained by seeded mini-batch gradient descent, and both
//! expose the scoring surrogate used by structure search.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::encode::FeatureEncoding;
use super::net::Mlp;
use crate::doc::DocValue;
use crate::schema::TransitionRecord;

/// Quantile levels predicted by every numeric node model.
pub const TAU_GRID: [f64; 10] = [0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95];

/// Floor applied to categorical log-probabilities so degenerate (constant)
/// models cannot emit minus infinity into a structure score.
pub const SURROGATE_LOG_FLOOR: f64 = -30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitHyper {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for FitHyper {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 64,
            learning_rate: 1e-3,
            hidden: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum CpdError {
    #[error("node {0:?} is not a stochastic schema variable")]
    UnknownNode(String),
    #[error("no training records")]
    EmptyData,
    #[error("bad target for node {node:?}: {detail}")]
    BadTarget { node: String, detail: String },
    #[error("no fitted model for node {0:?}")]
    MissingModel(String),
}

/// `max(τ(y−ŷ), (τ−1)(y−ŷ))`: the asymmetric absolute error minimized by a
/// τ-quantile estimate.
pub fn pinball_loss(tau: f64, y: f64, yhat: f64) -> f64 {
    debug_assert!(tau > 0.0 && tau < 1.0);
    let diff = y - yhat;
    (tau * diff).max((tau - 1.0) * diff)
}

/// Mixes a node name into a base seed so parallel per-node fits decorrelate
/// while staying reproducible. FNV-1a over the name bytes.
pub fn derive_seed(base: u64, node: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in node.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    base ^ h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileModel {
    pub taus: Vec<f64>,
    /// Raw-unit bounds used to scale targets into [0,1] for training and to
    /// map predictions back.
    pub target_min: f64,
    pub target_max: f64,
    /// Set when the training target had zero variance; predictions are this
    /// constant and no network exists.
    pub constant: Option<f64>,
    /// Mean training loss per epoch (sum of pinball over taus, per sample).
    pub loss_curve: Vec<f64>,
    pub(crate) net: Option<Mlp>,
}

impl QuantileModel {
    /// Fits from pre-encoded feature vectors and raw-unit targets. `bounds`
    /// is the raw-unit (min, max) used for target scaling.
    pub fn fit(
        features: &[Vec<f64>],
        targets: &[f64],
        bounds: (f64, f64),
        hyper: &FitHyper,
    ) -> QuantileModel {
        assert_eq!(features.len(), targets.len());
        assert!(!targets.is_empty(), "caller checks for empty data");
        let (lo, hi) = bounds;
        let spread = targets.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - targets.iter().cloned().fold(f64::INFINITY, f64::min);
        if spread.abs() < 1e-12 {
            return QuantileModel {
                taus: TAU_GRID.to_vec(),
                target_min: lo,
                target_max: hi,
                constant: Some(targets[0]),
                loss_curve: Vec::new(),
                net: None,
            };
        }

        let scale = |y: f64| ((y - lo) / (hi - lo)).clamp(0.0, 1.0);
        let scaled: Vec<f64> = targets.iter().map(|y| scale(*y)).collect();
        let width = features.first().map(Vec::len).unwrap_or(0);
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let mut net = Mlp::new(width, hyper.hidden, TAU_GRID.len(), &mut rng);
        let mut loss_curve = Vec::with_capacity(hyper.epochs);
        let mut order: Vec<usize> = (0..features.len()).collect();

        for _ in 0..hyper.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for batch in order.chunks(hyper.batch_size.max(1)) {
                let mut grads = net.zero_gradients();
                for &i in batch {
                    let trace = net.forward_trace(&features[i]);
                    let out = trace.output();
                    let y = scaled[i];
                    let mut grad_out = vec![0.0; out.len()];
                    for (k, tau) in TAU_GRID.iter().enumerate() {
                        epoch_loss += pinball_loss(*tau, y, out[k]);
                        grad_out[k] = if y > out[k] { -tau } else { 1.0 - tau };
                    }
                    net.backward(&trace, &grad_out, &mut grads);
                }
                net.sgd_step(&grads, hyper.learning_rate, batch.len());
            }
            loss_curve.push(epoch_loss / features.len() as f64);
        }

        QuantileModel {
            taus: TAU_GRID.to_vec(),
            target_min: lo,
            target_max: hi,
            constant: None,
            loss_curve,
            net: Some(net),
        }
    }

    /// Predicted quantiles in raw units, non-decreasing after rearrangement.
    pub fn quantiles(&self, features: &[f64]) -> Vec<f64> {
        if let Some(c) = self.constant {
            return vec![c; self.taus.len()];
        }
        let net = self.net.as_ref().expect("non-constant model has a network");
        let mut out = net.forward(features);
        out.sort_by(|a, b| a.partial_cmp(b).expect("finite quantile outputs"));
        out.iter()
            .map(|z| self.target_min + z * (self.target_max - self.target_min))
            .collect()
    }

    /// Negative mean pinball loss across the tau grid, in raw units.
    pub fn surrogate(&self, features: &[f64], y: f64) -> f64 {
        let qs = self.quantiles(features);
        let total: f64 = self
            .taus
            .iter()
            .zip(&qs)
            .map(|(tau, q)| pinball_loss(*tau, y, *q))
            .sum();
        -total / self.taus.len() as f64
    }

    #[doc(hidden)]
    pub fn from_parts(taus: Vec<f64>, bounds: (f64, f64), net: Mlp) -> QuantileModel {
        QuantileModel {
            taus,
            target_min: bounds.0,
            target_max: bounds.1,
            constant: None,
            loss_curve: Vec::new(),
            net: Some(net),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalModel {
    pub levels: Vec<String>,
    /// Set when training saw a single level; that level has probability one.
    pub constant: Option<usize>,
    /// Mean cross-entropy per epoch.
    pub loss_curve: Vec<f64>,
    pub(crate) net: Option<Mlp>,
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

impl CategoricalModel {
    /// Fits from pre-encoded feature vectors and level indices into `levels`.
    pub fn fit(
        features: &[Vec<f64>],
        target_levels: &[usize],
        levels: Vec<String>,
        hyper: &FitHyper,
    ) -> CategoricalModel {
        assert_eq!(features.len(), target_levels.len());
        assert!(!target_levels.is_empty(), "caller checks for empty data");
        if target_levels.iter().all(|t| *t == target_levels[0]) {
            return CategoricalModel {
                levels,
                constant: Some(target_levels[0]),
                loss_curve: Vec::new(),
                net: None,
            };
        }

        let width = features.first().map(Vec::len).unwrap_or(0);
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let mut net = Mlp::new(width, hyper.hidden, levels.len(), &mut rng);
        let mut loss_curve = Vec::with_capacity(hyper.epochs);
        let mut order: Vec<usize> = (0..features.len()).collect();

        for _ in 0..hyper.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for batch in order.chunks(hyper.batch_size.max(1)) {
                let mut grads = net.zero_gradients();
                for &i in batch {
                    let trace = net.forward_trace(&features[i]);
                    let probs = softmax(trace.output());
                    let target = target_levels[i];
                    epoch_loss += -probs[target].max(1e-300).ln();
                    let mut grad_out = probs;
                    grad_out[target] -= 1.0;
                    net.backward(&trace, &grad_out, &mut grads);
                }
                net.sgd_step(&grads, hyper.learning_rate, batch.len());
            }
            loss_curve.push(epoch_loss / features.len() as f64);
        }

        CategoricalModel {
            levels,
            constant: None,
            loss_curve,
            net: Some(net),
        }
    }

    /// Probabilities over `levels`; sums to one.
    pub fn probabilities(&self, features: &[f64]) -> Vec<f64> {
        if let Some(idx) = self.constant {
            let mut p = vec![0.0; self.levels.len()];
            p[idx] = 1.0;
            return p;
        }
        let net = self.net.as_ref().expect("non-constant model has a network");
        softmax(&net.forward(features))
    }

    /// Log-probability of the observed level, floored at
    /// [`SURROGATE_LOG_FLOOR`].
    pub fn surrogate(&self, features: &[f64], level: usize) -> f64 {
        let p = self.probabilities(features)[level];
        if p <= 0.0 {
            SURROGATE_LOG_FLOOR
        } else {
            p.ln().max(SURROGATE_LOG_FLOOR)
        }
    }

    #[doc(hidden)]
    pub fn from_parts(levels: Vec<String>, net: Mlp) -> CategoricalModel {
        CategoricalModel {
            levels,
            constant: None,
            loss_curve: Vec::new(),
            net: Some(net),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeModel {
    Quantile(QuantileModel),
    Categorical(CategoricalModel),
}

impl NodeModel {
    pub fn is_constant(&self) -> bool {
        match self {
            NodeModel::Quantile(m) => m.constant.is_some(),
            NodeModel::Categorical(m) => m.constant.is_some(),
        }
    }

    pub fn loss_curve(&self) -> &[f64] {
        match self {
            NodeModel::Quantile(m) => &m.loss_curve,
            NodeModel::Categorical(m) => &m.loss_curve,
        }
    }
}

/// Fits the conditional model for one stochastic node given its same-step
/// parents. Deterministic for a given `hyper.seed` (the node name is mixed
/// in, so sibling fits sharing a base seed still differ).
pub fn fit_node(
    node: &str,
    parents: &[String],
    records: &[TransitionRecord],
    encoding: &FeatureEncoding,
    hyper: &FitHyper,
) -> Result<NodeModel, CpdError> {
    if records.is_empty() {
        return Err(CpdError::EmptyData);
    }
    let mut hyper = hyper.clone();
    hyper.seed = derive_seed(hyper.seed, node);
    // Canonical parent order so fit-time and sample-time layouts agree.
    let mut parents = parents.to_vec();
    parents.sort();
    let features: Vec<Vec<f64>> = records
        .iter()
        .map(|r| encoding.encode_record(r, &parents))
        .collect();

    if let Some(levels) = encoding.levels(node) {
        let levels = levels.to_vec();
        let mut targets = Vec::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            let text = r
                .next_sto
                .key(node)
                .and_then(DocValue::as_text)
                .ok_or_else(|| CpdError::BadTarget {
                    node: node.to_string(),
                    detail: format!("record {i} has no text value"),
                })?;
            let idx = levels
                .iter()
                .position(|l| l == text)
                .ok_or_else(|| CpdError::BadTarget {
                    node: node.to_string(),
                    detail: format!("record {i} has level {text:?} not in schema"),
                })?;
            targets.push(idx);
        }
        Ok(NodeModel::Categorical(CategoricalModel::fit(
            &features, &targets, levels, &hyper,
        )))
    } else if let Some(bounds) = encoding.numeric_bounds(node) {
        let mut targets = Vec::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            let y = r
                .next_sto
                .key(node)
                .and_then(DocValue::as_num)
                .filter(|y| y.is_finite())
                .ok_or_else(|| CpdError::BadTarget {
                    node: node.to_string(),
                    detail: format!("record {i} has no finite numeric value"),
                })?;
            targets.push(y);
        }
        Ok(NodeModel::Quantile(QuantileModel::fit(
            &features, &targets, bounds, &hyper,
        )))
    } else {
        Err(CpdError::UnknownNode(node.to_string()))
    }
}

/// Structure-search data term for one observed transition: negative mean
/// pinball loss for numeric nodes, observed-level log-probability for
/// categorical ones. Higher is better in both cases.
pub fn node_loglik_surrogate(
    model: &NodeModel,
    node: &str,
    record: &TransitionRecord,
    parents: &[String],
    encoding: &FeatureEncoding,
) -> Result<f64, CpdError> {
    let mut parents = parents.to_vec();
    parents.sort();
    let features = encoding.encode_record(record, &parents);
    match model {
        NodeModel::Quantile(m) => {
            let y = record
                .next_sto
                .key(node)
                .and_then(DocValue::as_num)
                .filter(|y| y.is_finite())
                .ok_or_else(|| CpdError::BadTarget {
                    node: node.to_string(),
                    detail: "observed value is not finite numeric".to_string(),
                })?;
            Ok(m.surrogate(&features, y))
        }
        NodeModel::Categorical(m) => {
            let text = record
                .next_sto
                .key(node)
                .and_then(DocValue::as_text)
                .ok_or_else(|| CpdError::BadTarget {
                    node: node.to_string(),
                    detail: "observed value is not text".to_string(),
                })?;
            match m.levels.iter().position(|l| l == text) {
                Some(idx) => Ok(m.surrogate(&features, idx)),
                None => Ok(SURROGATE_LOG_FLOOR),
            }
        }
    }
}
