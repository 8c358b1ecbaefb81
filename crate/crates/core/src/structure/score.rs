//! Structure objective: per-node data fit plus sparsity plus the
//! knowledge-oracle prior, with caching that makes repeated scoring cheap.
//!
//! `J(E) = data_term − λ₁·|E|/|V|² + λ₂·log p(E | V, environment)`, where the
//! data term is the mean over records of the summed node-likelihood
//! surrogates under the parent sets prescribed by `E`. Node fits depend only
//! on `(node, stochastic parents)`, so they are memoized; the prior is
//! whole-graph and memoized by canonical edge-set key.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cpd::{fit_node, node_loglik_surrogate, FeatureEncoding, FitHyper, NodeModel};
use crate::oracle::KnowledgeOracle;
use crate::schema::{ObservationSchema, TransitionRecord};

use super::dag::DagStructure;
use super::StructureError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub alpha: f64,
    pub steps_per_chain: usize,
    pub chains: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            lambda1: 10.0,
            lambda2: 100.0,
            alpha: 0.99,
            steps_per_chain: 50,
            chains: 5,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), StructureError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(StructureError::Config(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.lambda1 < 0.0 || self.lambda2 < 0.0 {
            return Err(StructureError::Config(
                "lambdas must be non-negative".to_string(),
            ));
        }
        if self.chains == 0 {
            return Err(StructureError::Config("chains must be ≥ 1".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub data_term: f64,
    pub sparsity_term: f64,
    pub prior_term: f64,
    pub total: f64,
}

/// One memoized node fit: the model plus its summed surrogate over the
/// cache's records.
#[derive(Debug, Clone)]
pub struct CachedFit {
    pub model: Arc<NodeModel>,
    pub surrogate_sum: f64,
}

type FitKey = (String, Vec<String>);
type FitCell = Arc<OnceLock<Result<CachedFit, String>>>;

/// At-most-once node fitting over a fixed record set. Shared across chains
/// (and across searches, when the caller keeps it alive) — concurrent
/// lookups of the same key block on a single computation.
pub struct FitCache {
    records: Vec<TransitionRecord>,
    encoding: Arc<FeatureEncoding>,
    hyper: FitHyper,
    cells: Mutex<HashMap<FitKey, FitCell>>,
}

impl FitCache {
    pub fn new(
        records: Vec<TransitionRecord>,
        encoding: Arc<FeatureEncoding>,
        hyper: FitHyper,
    ) -> FitCache {
        FitCache {
            records,
            encoding,
            hyper,
            cells: Mutex::new(HashMap::new()),
        }
    }

    /// Like [`FitCache::new`] but keeps at most `max_records` transitions,
    /// chosen by a seeded shuffle. Trades fidelity for speed during search;
    /// final model fits should use the full data.
    pub fn subsampled(
        mut records: Vec<TransitionRecord>,
        encoding: Arc<FeatureEncoding>,
        hyper: FitHyper,
        max_records: usize,
        seed: u64,
    ) -> FitCache {
        if records.len() > max_records {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            records.shuffle(&mut rng);
            records.truncate(max_records);
        }
        FitCache::new(records, encoding, hyper)
    }

    pub fn record_count(&self) -> usize {
        self.records.len()
    }

    pub fn records(&self) -> &[TransitionRecord] {
        &self.records
    }

    pub fn encoding(&self) -> &FeatureEncoding {
        &self.encoding
    }

    pub fn hyper(&self) -> &FitHyper {
        &self.hyper
    }

    /// Number of distinct (node, parent set) fits computed so far.
    pub fn fitted_pairs(&self) -> usize {
        self.cells.lock().expect("fit cache lock").len()
    }

    /// Fetches or computes the fit for `node` under the given stochastic
    /// parent set.
    pub fn fit(&self, node: &str, parents: &[String]) -> Result<CachedFit, StructureError> {
        let mut key_parents = parents.to_vec();
        key_parents.sort();
        let key = (node.to_string(), key_parents);
        let cell = {
            let mut cells = self.cells.lock().expect("fit cache lock");
            cells.entry(key.clone()).or_default().clone()
        };
        let outcome = cell.get_or_init(|| {
            let model = fit_node(node, &key.1, &self.records, &self.encoding, &self.hyper)
                .map_err(|e| e.to_string())?;
            let mut sum = 0.0;
            for record in &self.records {
                sum += node_loglik_surrogate(&model, node, record, &key.1, &self.encoding)
                    .map_err(|e| e.to_string())?;
            }
            Ok(CachedFit {
                model: Arc::new(model),
                surrogate_sum: sum,
            })
        });
        outcome.clone().map_err(|detail| StructureError::Score {
            node: node.to_string(),
            detail,
        })
    }
}

/// Everything needed to evaluate `J` for candidate structures.
pub struct Scorer<'a> {
    pub cache: &'a FitCache,
    pub oracle: &'a dyn KnowledgeOracle,
    pub schema: &'a ObservationSchema,
    pub cfg: &'a SearchConfig,
    prior_memo: Mutex<HashMap<String, f64>>,
}

impl<'a> Scorer<'a> {
    pub fn new(
        cache: &'a FitCache,
        oracle: &'a dyn KnowledgeOracle,
        schema: &'a ObservationSchema,
        cfg: &'a SearchConfig,
    ) -> Scorer<'a> {
        Scorer {
            cache,
            oracle,
            schema,
            cfg,
            prior_memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn score(&self, dag: &DagStructure) -> Result<ScoreBreakdown, StructureError> {
        if self.cache.record_count() == 0 {
            return Err(StructureError::Config(
                "cannot score structures without data".to_string(),
            ));
        }

        let mut data_sum = 0.0;
        for node in dag.vx_nodes() {
            let parents = dag.vx_parents(&node);
            data_sum += self.cache.fit(&node, &parents)?.surrogate_sum;
        }
        let data_term = data_sum / self.cache.record_count() as f64;

        let v = dag.node_count() as f64;
        let sparsity_term = -self.cfg.lambda1 * dag.edge_count() as f64 / (v * v);

        let key = dag.canonical_key();
        let cached = self.prior_memo.lock().expect("prior memo lock").get(&key).copied();
        let log_prior = match cached {
            Some(v) => v,
            None => {
                let vx = dag.vx_nodes();
                let edges: Vec<(String, String)> = dag.edges().cloned().collect();
                let v = self
                    .oracle
                    .whole_graph_plausibility(&vx, &edges, self.schema)?;
                self.prior_memo
                    .lock()
                    .expect("prior memo lock")
                    .insert(key, v);
                v
            }
        };
        let prior_term = self.cfg.lambda2 * log_prior;

        Ok(ScoreBreakdown {
            data_term,
            sparsity_term,
            prior_term,
            total: data_term + sparsity_term + prior_term,
        })
    }
}
