//! Semantically seeded DAG sampling: ask the knowledge oracle for a
//! dependency-respecting variable order, then elicit each stochastic node's
//! parents from among its order-predecessors. Acyclic by construction.

use std::collections::BTreeSet;

use crate::oracle::KnowledgeOracle;
use crate::schema::{ObservationSchema, Stream};

use super::dag::DagStructure;
use super::StructureError;

/// Builds one oracle-guided seed structure.
///
/// The order starts with every conditioning variable (they are exogenous),
/// then the oracle picks the next stochastic variable until none remain. An
/// answer outside the remaining set is re-asked once, after which the first
/// remaining variable in schema order is used and the substitution logged.
///
/// `seed` is reserved for oracle implementations that sample their answers;
/// deterministic oracles ignore it, so chain diversity then comes from the
/// annealing stage alone.
pub fn sample_seed_dag(
    schema: &ObservationSchema,
    oracle: &dyn KnowledgeOracle,
    seed: u64,
) -> Result<DagStructure, StructureError> {
    let _ = seed;
    let mut ordered: Vec<String> = schema
        .stream_vars(Stream::Deterministic)
        .map(|v| v.name.clone())
        .collect();
    let conditioning = ordered.len();
    let mut remaining: Vec<String> = schema
        .stream_vars(Stream::Stochastic)
        .map(|v| v.name.clone())
        .collect();

    while !remaining.is_empty() {
        let mut choice = oracle.topo_next(&ordered, &remaining, schema)?;
        if !remaining.contains(&choice) {
            choice = oracle.topo_next(&ordered, &remaining, schema)?;
        }
        if !remaining.contains(&choice) {
            let fallback = remaining[0].clone();
            eprintln!(
                "seed dag: oracle picked {choice:?} which is not remaining; \
                 falling back to {fallback:?}"
            );
            choice = fallback;
        }
        remaining.retain(|n| n != &choice);
        ordered.push(choice);
    }

    let mut edges = BTreeSet::new();
    for i in conditioning..ordered.len() {
        let node = &ordered[i];
        let predecessors = &ordered[..i];
        let elected = oracle.elicit_parents(node, predecessors, schema)?;
        let mut kept = BTreeSet::new();
        for parent in elected {
            if parent != *node && predecessors.contains(&parent) && kept.insert(parent.clone()) {
                edges.insert((parent, node.clone()));
            }
        }
    }

    let nodes = DagStructure::from_schema(schema)
        .nodes()
        .to_vec();
    Ok(DagStructure::new(nodes, edges)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{
        OracleError, PlausibilityAnswer, ScriptedFixture, ScriptedOracle,
    };
    use crate::program::TransitionProgram;
    use crate::refine::{ProposalRequest, Refinement};
    use std::sync::Mutex;

    fn schema() -> ObservationSchema {
        ObservationSchema::from_json_str(
            r#"{
                "variables": [
                    {"name": "price", "type": "numerical", "stream": "deterministic"},
                    {"name": "customers", "type": "numerical", "stream": "stochastic"},
                    {"name": "revenue", "type": "numerical", "stream": "stochastic"}
                ],
                "environment_doc": "a small shop"
            }"#,
        )
        .expect("schema parses")
    }

    #[test]
    fn scripted_order_and_parents_become_edges() {
        let fixture: ScriptedFixture = serde_json::from_str(
            r#"{
                "topo_order": ["customers", "revenue"],
                "parents": {"revenue": ["customers"]}
            }"#,
        )
        .expect("fixture parses");
        let oracle = ScriptedOracle::new(fixture);
        let dag = sample_seed_dag(&schema(), &oracle, 0).expect("seed dag");
        let edges: Vec<_> = dag.edges().cloned().collect();
        assert_eq!(edges, vec![("customers".to_string(), "revenue".to_string())]);
        assert!(dag.is_acyclic());
    }

    #[test]
    fn zero_parent_elections_yield_empty_edge_set() {
        let fixture: ScriptedFixture = serde_json::from_str(
            r#"{"topo_order": ["customers", "revenue"]}"#,
        )
        .expect("fixture parses");
        let oracle = ScriptedOracle::new(fixture);
        let dag = sample_seed_dag(&schema(), &oracle, 0).expect("seed dag");
        assert_eq!(dag.edge_count(), 0);
    }

    #[test]
    fn no_stochastic_variables_is_an_empty_dag() {
        let schema = ObservationSchema::from_json_str(
            r#"{
                "variables": [
                    {"name": "price", "type": "numerical", "stream": "deterministic"}
                ],
                "environment_doc": "static world"
            }"#,
        )
        .expect("schema parses");
        let oracle = ScriptedOracle::new(ScriptedFixture::default());
        let dag = sample_seed_dag(&schema, &oracle, 0).expect("seed dag");
        assert_eq!(dag.edge_count(), 0);
        assert_eq!(dag.vx_nodes().len(), 0);
        assert_eq!(dag.vs_nodes(), vec!["price".to_string()]);
    }

    /// Always answers with a variable that is never in the remaining set,
    /// and elects predecessors it was never offered.
    struct Misbehaving {
        topo_calls: Mutex<usize>,
    }

    impl KnowledgeOracle for Misbehaving {
        fn plausibility(
            &self,
            _: &str,
            _: &[String],
            _: &ObservationSchema,
        ) -> Result<PlausibilityAnswer, OracleError> {
            Ok(PlausibilityAnswer { log_prob_yes: 0.0 })
        }
        fn propose_refinements(
            &self,
            _: &ProposalRequest,
        ) -> Result<Vec<Refinement>, OracleError> {
            Ok(Vec::new())
        }
        fn topo_next(
            &self,
            _: &[String],
            _: &[String],
            _: &ObservationSchema,
        ) -> Result<String, OracleError> {
            *self.topo_calls.lock().expect("lock") += 1;
            Ok("unicorn".to_string())
        }
        fn elicit_parents(
            &self,
            _: &str,
            _: &[String],
            _: &ObservationSchema,
        ) -> Result<Vec<String>, OracleError> {
            Ok(vec!["unicorn".to_string(), "price".to_string()])
        }
        fn init_program(&self, _: &ObservationSchema) -> Result<TransitionProgram, OracleError> {
            Err(OracleError::Malformed("not used".to_string()))
        }
    }

    #[test]
    fn out_of_set_answers_fall_back_after_one_reask() {
        let oracle = Misbehaving {
            topo_calls: Mutex::new(0),
        };
        let dag = sample_seed_dag(&schema(), &oracle, 0).expect("seed dag");
        // Fallback follows schema order for both stochastic nodes.
        assert!(dag.is_acyclic());
        // Two picks, each asked twice (initial + one re-ask).
        assert_eq!(*oracle.topo_calls.lock().expect("lock"), 4);
        // Elected parents are filtered to actual predecessors: "unicorn" is
        // dropped, "price" (a conditioning variable) survives.
        assert_eq!(dag.parents("customers"), vec!["price".to_string()]);
        assert_eq!(dag.vx_parents("customers"), Vec::<String>::new());
    }
}
