//! Deterministic oracle backed by a JSON fixture. A pure function of the
//! request: full runs under it are reproducible byte-for-byte.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_init_coverage, KnowledgeOracle, OracleError, PlausibilityAnswer};
use crate::program::{FunctionDef, TransitionProgram};
use crate::refine::{ProposalRequest, Refinement};
use crate::schema::ObservationSchema;

/// On-disk fixture shape. Every section is optional so small test fixtures
/// stay small; querying an absent section is an error.
///
/// Plausibility is edge-additive: the answer for `(target, parents)` is the
/// sum over parents of the `"parent->target"` entry (falling back to
/// `edge_default`), so arbitrary parent sets explored by structure search
/// all have defined answers.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScriptedFixture {
    #[serde(default)]
    pub topo_order: Vec<String>,
    #[serde(default)]
    pub parents: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub edge_plausibility: BTreeMap<String, f64>,
    #[serde(default)]
    pub edge_default: f64,
    #[serde(default)]
    pub init_functions: Vec<FunctionDef>,
    /// Candidate edits keyed by `"{error_kind}|{action_type}"`, with `"*"`
    /// as a catch-all.
    #[serde(default)]
    pub refinements: BTreeMap<String, Vec<Refinement>>,
}

#[derive(Debug, Clone)]
pub struct ScriptedOracle {
    fixture: ScriptedFixture,
}

impl ScriptedOracle {
    pub fn new(fixture: ScriptedFixture) -> Self {
        Self { fixture }
    }

    pub fn from_json(text: &str) -> Result<Self, OracleError> {
        let fixture: ScriptedFixture =
            serde_json::from_str(text).map_err(|e| OracleError::Malformed(e.to_string()))?;
        Ok(Self::new(fixture))
    }

    pub fn from_file(path: &Path) -> Result<Self, OracleError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| OracleError::Unavailable(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn fixture(&self) -> &ScriptedFixture {
        &self.fixture
    }
}

impl KnowledgeOracle for ScriptedOracle {
    fn plausibility(
        &self,
        target: &str,
        parents: &[String],
        _schema: &ObservationSchema,
    ) -> Result<PlausibilityAnswer, OracleError> {
        let log_prob_yes = parents
            .iter()
            .map(|p| {
                self.fixture
                    .edge_plausibility
                    .get(&format!("{p}->{target}"))
                    .copied()
                    .unwrap_or(self.fixture.edge_default)
            })
            .sum();
        Ok(PlausibilityAnswer { log_prob_yes })
    }

    fn propose_refinements(
        &self,
        request: &ProposalRequest,
    ) -> Result<Vec<Refinement>, OracleError> {
        let action_type = request
            .action
            .key("type")
            .and_then(|v| v.as_text())
            .unwrap_or("");
        let key = format!("{}|{}", request.error.kind, action_type);
        let scripted = self
            .fixture
            .refinements
            .get(&key)
            .or_else(|| self.fixture.refinements.get("*"))
            .ok_or_else(|| OracleError::Malformed(format!("no scripted refinements for {key}")))?;
        Ok(scripted.iter().take(request.k).cloned().collect())
    }

    fn topo_next(
        &self,
        ordered: &[String],
        remaining: &[String],
        _schema: &ObservationSchema,
    ) -> Result<String, OracleError> {
        self.fixture
            .topo_order
            .iter()
            .find(|n| remaining.contains(n))
            .cloned()
            .ok_or_else(|| {
                OracleError::Malformed(format!(
                    "topo_order fixture covers none of {remaining:?} (ordered so far: {ordered:?})"
                ))
            })
    }

    fn elicit_parents(
        &self,
        node: &str,
        predecessors: &[String],
        _schema: &ObservationSchema,
    ) -> Result<Vec<String>, OracleError> {
        let scripted = self.fixture.parents.get(node).cloned().unwrap_or_default();
        Ok(scripted
            .into_iter()
            .filter(|p| predecessors.contains(p))
            .collect())
    }

    fn init_program(&self, schema: &ObservationSchema) -> Result<TransitionProgram, OracleError> {
        if self.fixture.init_functions.is_empty() {
            return Err(OracleError::Malformed(
                "fixture has no initial program".to_string(),
            ));
        }
        let program = TransitionProgram::from_functions(self.fixture.init_functions.clone())
            .map_err(|e| OracleError::Malformed(e.to_string()))?;
        check_init_coverage(&program, schema)?;
        Ok(program)
    }
}
