//! The knowledge-oracle seam: every place the toolkit consults external
//! world knowledge (program synthesis and repair, variable ordering,
//! dependency elicitation, structure plausibility) goes through one trait.
//!
//! Implementations: [`ScriptedOracle`] (deterministic fixture, used by tests
//! and offline runs), [`HttpOracle`] (live chat-completion endpoint),
//! [`RecordingOracle`]/[`ReplayOracle`] (capture a live session, replay it
//! byte-for-byte), and [`MemoOracle`] (plausibility cache).

mod http;
mod prompt;
mod record;
mod scripted;

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpOracle, HttpOracleConfig};
pub use prompt::PromptTemplates;
pub use record::{ReplayOracle, RecordingOracle};
pub use scripted::{ScriptedFixture, ScriptedOracle};

use crate::program::TransitionProgram;
use crate::refine::{ProposalError, ProposalProvider, ProposalRequest, Refinement};
use crate::schema::ObservationSchema;

/// Log-probability assigned when a transport reports no usable answer-token
/// probability: improbable enough to act as a near-hard constraint while
/// keeping structure scores finite.
pub const LOG_PROB_FLOOR: f64 = -30.0;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle unavailable: {0}")]
    Unavailable(String),
    #[error("malformed oracle response: {0}")]
    Malformed(String),
    #[error("initial program incomplete: missing {}", missing.join(", "))]
    InitIncomplete { missing: Vec<String> },
}

/// Plausibility of a dependency structure, as the log-probability of an
/// affirmative answer. Always ≤ 0 (finite via [`LOG_PROB_FLOOR`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlausibilityAnswer {
    pub log_prob_yes: f64,
}

/// External world knowledge behind a uniform, swappable interface.
///
/// Implementations must be internally synchronized: structure-search chains
/// query plausibility concurrently.
pub trait KnowledgeOracle: Send + Sync {
    /// Log-probability that `target` depending exactly on `parents` is
    /// plausible for this environment. One query per call.
    fn plausibility(
        &self,
        target: &str,
        parents: &[String],
        schema: &ObservationSchema,
    ) -> Result<PlausibilityAnswer, OracleError>;

    /// Up to `request.k` candidate single-function edits.
    fn propose_refinements(
        &self,
        request: &ProposalRequest,
    ) -> Result<Vec<Refinement>, OracleError>;

    /// Picks the next variable in a dependency-respecting order. Must return
    /// a member of `remaining`; out-of-set answers are filtered by callers.
    fn topo_next(
        &self,
        ordered: &[String],
        remaining: &[String],
        schema: &ObservationSchema,
    ) -> Result<String, OracleError>;

    /// Which of the already-ordered predecessors plausibly influence `node`.
    fn elicit_parents(
        &self,
        node: &str,
        predecessors: &[String],
        schema: &ObservationSchema,
    ) -> Result<Vec<String>, OracleError>;

    /// Synthesizes the initial transition program for the environment.
    fn init_program(&self, schema: &ObservationSchema) -> Result<TransitionProgram, OracleError>;

    /// Plausibility of an entire edge set at once. The default decomposes
    /// into one per-target query per stochastic node and sums, which keeps
    /// answers cacheable; live clients may override with a single prompt.
    fn whole_graph_plausibility(
        &self,
        nodes: &[String],
        edges: &[(String, String)],
        schema: &ObservationSchema,
    ) -> Result<f64, OracleError> {
        let mut total = 0.0;
        for node in nodes {
            let mut parents: Vec<String> = edges
                .iter()
                .filter(|(_, child)| child == node)
                .map(|(parent, _)| parent.clone())
                .collect();
            parents.sort();
            total += self.plausibility(node, &parents, schema)?.log_prob_yes;
        }
        Ok(total)
    }
}

/// Adapter exposing an oracle as a refinement [`ProposalProvider`].
pub struct OracleProposals<'a, O: KnowledgeOracle + ?Sized>(pub &'a O);

impl<O: KnowledgeOracle + ?Sized> ProposalProvider for OracleProposals<'_, O> {
    fn propose(&mut self, request: &ProposalRequest) -> Result<Vec<Refinement>, ProposalError> {
        self.0
            .propose_refinements(request)
            .map_err(|e| ProposalError(e.to_string()))
    }
}

/// Canonical cache key for a plausibility question: target plus its sorted
/// parent set.
fn plausibility_key(target: &str, parents: &[String]) -> String {
    let mut sorted: Vec<&str> = parents.iter().map(String::as_str).collect();
    sorted.sort_unstable();
    format!("{target}<-{}", sorted.join(","))
}

/// Caches plausibility answers so one canonical question never issues two
/// transport calls within a process. All other queries pass through.
pub struct MemoOracle<O> {
    inner: O,
    cache: Mutex<HashMap<String, PlausibilityAnswer>>,
}

impl<O: KnowledgeOracle> MemoOracle<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn into_inner(self) -> O {
        self.inner
    }

    pub fn cached_answers(&self) -> usize {
        self.cache.lock().expect("memo cache poisoned").len()
    }
}

impl<O: KnowledgeOracle> KnowledgeOracle for MemoOracle<O> {
    fn plausibility(
        &self,
        target: &str,
        parents: &[String],
        schema: &ObservationSchema,
    ) -> Result<PlausibilityAnswer, OracleError> {
        let key = plausibility_key(target, parents);
        if let Some(hit) = self.cache.lock().expect("memo cache poisoned").get(&key) {
            return Ok(*hit);
        }
        let answer = self.inner.plausibility(target, parents, schema)?;
        self.cache
            .lock()
            .expect("memo cache poisoned")
            .insert(key, answer);
        Ok(answer)
    }

    fn propose_refinements(
        &self,
        request: &ProposalRequest,
    ) -> Result<Vec<Refinement>, OracleError> {
        self.inner.propose_refinements(request)
    }

    fn topo_next(
        &self,
        ordered: &[String],
        remaining: &[String],
        schema: &ObservationSchema,
    ) -> Result<String, OracleError> {
        self.inner.topo_next(ordered, remaining, schema)
    }

    fn elicit_parents(
        &self,
        node: &str,
        predecessors: &[String],
        schema: &ObservationSchema,
    ) -> Result<Vec<String>, OracleError> {
        self.inner.elicit_parents(node, predecessors, schema)
    }

    fn init_program(&self, schema: &ObservationSchema) -> Result<TransitionProgram, OracleError> {
        self.inner.init_program(schema)
    }
}

/// Verifies an initial program covers the schema: an action function for
/// every declared action (empty-bodied is fine) and the dynamic function the
/// program type already guarantees.
pub fn check_init_coverage(
    program: &TransitionProgram,
    schema: &ObservationSchema,
) -> Result<(), OracleError> {
    let missing: Vec<String> = schema
        .actions
        .iter()
        .filter(|a| program.action_fn(&a.name).is_none())
        .map(|a| format!("action function for {}", a.name))
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(OracleError::InitIncomplete { missing })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting(AtomicUsize);

    impl KnowledgeOracle for Counting {
        fn plausibility(
            &self,
            _: &str,
            _: &[String],
            _: &ObservationSchema,
        ) -> Result<PlausibilityAnswer, OracleError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Ok(PlausibilityAnswer { log_prob_yes: -0.5 })
        }

        fn propose_refinements(
            &self,
            _: &ProposalRequest,
        ) -> Result<Vec<Refinement>, OracleError> {
            Ok(vec![])
        }

        fn topo_next(
            &self,
            _: &[String],
            remaining: &[String],
            _: &ObservationSchema,
        ) -> Result<String, OracleError> {
            Ok(remaining[0].clone())
        }

        fn elicit_parents(
            &self,
            _: &str,
            _: &[String],
            _: &ObservationSchema,
        ) -> Result<Vec<String>, OracleError> {
            Ok(vec![])
        }

        fn init_program(&self, _: &ObservationSchema) -> Result<TransitionProgram, OracleError> {
            Err(OracleError::Unavailable("not scripted".into()))
        }
    }

    fn empty_schema() -> ObservationSchema {
        ObservationSchema::from_json_str(
            r#"{"variables": [], "actions": [], "environment_doc": ""}"#,
        )
        .unwrap()
    }

    #[test]
    fn memo_issues_one_transport_call_per_canonical_key() {
        let oracle = MemoOracle::new(Counting(AtomicUsize::new(0)));
        let schema = empty_schema();
        let parents_a = vec!["b".to_string(), "a".to_string()];
        let parents_b = vec!["a".to_string(), "b".to_string()];
        let first = oracle.plausibility("x", &parents_a, &schema).unwrap();
        let second = oracle.plausibility("x", &parents_b, &schema).unwrap();
        assert_eq!(first, second);
        assert_eq!(oracle.into_inner().0.into_inner(), 1);
    }

    #[test]
    fn whole_graph_default_decomposes_per_target() {
        let oracle = Counting(AtomicUsize::new(0));
        let schema = empty_schema();
        let nodes = vec!["x".to_string(), "y".to_string()];
        let edges = vec![("x".to_string(), "y".to_string())];
        let total = oracle
            .whole_graph_plausibility(&nodes, &edges, &schema)
            .unwrap();
        assert_eq!(total, -1.0);
        assert_eq!(oracle.0.into_inner(), 2);
    }

    #[test]
    fn plausibility_key_is_order_insensitive() {
        assert_eq!(
            plausibility_key("t", &["b".into(), "a".into()]),
            plausibility_key("t", &["a".into(), "b".into()])
        );
        assert_eq!(plausibility_key("t", &[]), "t<-");
    }
}
