//! Draws values from fitted node models: inverse-CDF sampling through the
//! predicted quantile knots for numeric nodes, softmax draws for categorical
//! ones, and ancestral sampling of a whole stochastic observation.

use std::collections::BTreeMap;

use rand::Rng;

use super::encode::FeatureEncoding;
use super::model::{CpdError, NodeModel};
use crate::doc::DocValue;
use crate::schema::{ObservationSchema, VariableKind};

/// Inverts the piecewise-linear CDF through `(taus[k], quantiles[k])` knots.
/// Flat beyond the outer knots: `u` below the first tau returns the first
/// quantile, above the last tau the last quantile.
pub fn inverse_cdf(taus: &[f64], quantiles: &[f64], u: f64) -> f64 {
    debug_assert_eq!(taus.len(), quantiles.len());
    debug_assert!(!taus.is_empty());
    if u <= taus[0] {
        return quantiles[0];
    }
    if u >= taus[taus.len() - 1] {
        return quantiles[quantiles.len() - 1];
    }
    for k in 0..taus.len() - 1 {
        if u <= taus[k + 1] {
            let span = taus[k + 1] - taus[k];
            let w = if span > 0.0 { (u - taus[k]) / span } else { 0.0 };
            return quantiles[k] + w * (quantiles[k + 1] - quantiles[k]);
        }
    }
    quantiles[quantiles.len() - 1]
}

/// Samples one node value given its encoded conditioning context. Numeric
/// draws clamp to the schema bounds in `bounds`.
pub fn sample_node<R: Rng + ?Sized>(
    model: &NodeModel,
    features: &[f64],
    bounds: (Option<f64>, Option<f64>),
    rng: &mut R,
) -> DocValue {
    match model {
        NodeModel::Quantile(m) => {
            let qs = m.quantiles(features);
            let u: f64 = rng.gen();
            let mut v = inverse_cdf(&m.taus, &qs, u);
            if let Some(lo) = bounds.0 {
                v = v.max(lo);
            }
            if let Some(hi) = bounds.1 {
                v = v.min(hi);
            }
            DocValue::Num(v)
        }
        NodeModel::Categorical(m) => {
            let probs = m.probabilities(features);
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut chosen = m.levels.len() - 1;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    chosen = i;
                    break;
                }
            }
            DocValue::Text(m.levels[chosen].clone())
        }
    }
}

/// Samples a full stochastic observation by ancestral traversal: each node in
/// `order` is drawn conditioned on its already-sampled same-step parents plus
/// the temporal context.
#[allow(clippy::too_many_arguments)]
pub fn sample_joint<R: Rng + ?Sized>(
    order: &[String],
    parents: &BTreeMap<String, Vec<String>>,
    models: &BTreeMap<String, NodeModel>,
    encoding: &FeatureEncoding,
    schema: &ObservationSchema,
    prev_sto: &DocValue,
    action: &DocValue,
    next_det: &DocValue,
    prev_det: &DocValue,
    rng: &mut R,
) -> Result<DocValue, CpdError> {
    let mut drawn: BTreeMap<String, DocValue> = BTreeMap::new();
    for node in order {
        let model = models
            .get(node)
            .ok_or_else(|| CpdError::MissingModel(node.clone()))?;
        let mut node_parents = parents.get(node).cloned().unwrap_or_default();
        node_parents.sort();
        let partial = DocValue::Map(drawn.clone());
        let features = encoding.encode_context(
            &node_parents,
            &partial,
            prev_sto,
            action,
            next_det,
            prev_det,
        );
        let bounds = match schema.variable(node).map(|v| &v.kind) {
            Some(VariableKind::Numerical { lower, upper }) => (*lower, *upper),
            _ => (None, None),
        };
        drawn.insert(node.clone(), sample_node(model, &features, bounds, rng));
    }
    Ok(DocValue::Map(drawn))
}
