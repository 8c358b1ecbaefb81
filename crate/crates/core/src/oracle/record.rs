//! Capture-and-replay around any oracle: every request is canonicalized,
//! hashed, and its response stored, so a live session can be saved to a
//! fixture file and replayed to produce the identical downstream model.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{de::DeserializeOwned, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::{KnowledgeOracle, OracleError, PlausibilityAnswer};
use crate::program::TransitionProgram;
use crate::refine::{ProposalRequest, Refinement};
use crate::schema::ObservationSchema;

/// Hex SHA-256 of the canonical JSON encoding of a request. `serde_json`
/// maps are sorted, so structurally equal requests hash identically.
fn request_hash(request: &serde_json::Value) -> String {
    let canonical = serde_json::to_string(request).expect("request values serialize");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let digest = hasher.finalize();
    digest.iter().fold(String::new(), |mut s, b| {
        use std::fmt::Write;
        write!(s, "{b:02x}").expect("write to string");
        s
    })
}

fn plausibility_request(target: &str, parents: &[String]) -> serde_json::Value {
    let mut sorted = parents.to_vec();
    sorted.sort();
    json!({"kind": "plausibility", "target": target, "parents": sorted})
}

fn refine_request(request: &ProposalRequest) -> serde_json::Value {
    json!({"kind": "propose_refinements", "request": request})
}

fn topo_request(ordered: &[String], remaining: &[String]) -> serde_json::Value {
    json!({"kind": "topo_next", "ordered": ordered, "remaining": remaining})
}

fn parents_request(node: &str, predecessors: &[String]) -> serde_json::Value {
    json!({"kind": "elicit_parents", "node": node, "predecessors": predecessors})
}

fn init_request(schema: &ObservationSchema) -> serde_json::Value {
    json!({"kind": "init_program", "environment_doc": schema.environment_doc})
}

/// Transcript file shape: request hash → recorded response.
pub type Transcript = BTreeMap<String, serde_json::Value>;

/// Wraps an oracle and records every response keyed by request hash.
pub struct RecordingOracle<O> {
    inner: O,
    transcript: Mutex<Transcript>,
}

impl<O: KnowledgeOracle> RecordingOracle<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            transcript: Mutex::new(Transcript::new()),
        }
    }

    pub fn transcript(&self) -> Transcript {
        self.transcript.lock().expect("transcript poisoned").clone()
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(&self.transcript())
            .expect("transcript values serialize");
        std::fs::write(path, text)
    }

    fn record<T: Serialize>(&self, request: serde_json::Value, response: &T) {
        let value = serde_json::to_value(response).expect("responses serialize");
        self.transcript
            .lock()
            .expect("transcript poisoned")
            .insert(request_hash(&request), value);
    }
}

impl<O: KnowledgeOracle> KnowledgeOracle for RecordingOracle<O> {
    fn plausibility(
        &self,
        target: &str,
        parents: &[String],
        schema: &ObservationSchema,
    ) -> Result<PlausibilityAnswer, OracleError> {
        let answer = self.inner.plausibility(target, parents, schema)?;
        self.record(plausibility_request(target, parents), &answer);
        Ok(answer)
    }

    fn propose_refinements(
        &self,
        request: &ProposalRequest,
    ) -> Result<Vec<Refinement>, OracleError> {
        let proposals = self.inner.propose_refinements(request)?;
        self.record(refine_request(request), &proposals);
        Ok(proposals)
    }

    fn topo_next(
        &self,
        ordered: &[String],
        remaining: &[String],
        schema: &ObservationSchema,
    ) -> Result<String, OracleError> {
        let next = self.inner.topo_next(ordered, remaining, schema)?;
        self.record(topo_request(ordered, remaining), &next);
        Ok(next)
    }

    fn elicit_parents(
        &self,
        node: &str,
        predecessors: &[String],
        schema: &ObservationSchema,
    ) -> Result<Vec<String>, OracleError> {
        let parents = self.inner.elicit_parents(node, predecessors, schema)?;
        self.record(parents_request(node, predecessors), &parents);
        Ok(parents)
    }

    fn init_program(&self, schema: &ObservationSchema) -> Result<TransitionProgram, OracleError> {
        let program = self.inner.init_program(schema)?;
        self.record(
            init_request(schema),
            &serde_json::from_str::<serde_json::Value>(&program.to_bundle_json())
                .expect("bundle is valid JSON"),
        );
        Ok(program)
    }
}

/// Replays a recorded transcript; any request outside the transcript is an
/// error, making replayed runs fully offline and deterministic.
pub struct ReplayOracle {
    transcript: Transcript,
}

impl ReplayOracle {
    pub fn new(transcript: Transcript) -> Self {
        Self { transcript }
    }

    pub fn from_file(path: &Path) -> Result<Self, OracleError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| OracleError::Unavailable(format!("{}: {e}", path.display())))?;
        let transcript =
            serde_json::from_str(&text).map_err(|e| OracleError::Malformed(e.to_string()))?;
        Ok(Self::new(transcript))
    }

    fn lookup<T: DeserializeOwned>(&self, request: serde_json::Value) -> Result<T, OracleError> {
        let hash = request_hash(&request);
        let value = self.transcript.get(&hash).ok_or_else(|| {
            OracleError::Unavailable(format!(
                "transcript has no response for request {hash} ({})",
                request["kind"].as_str().unwrap_or("?")
            ))
        })?;
        serde_json::from_value(value.clone()).map_err(|e| OracleError::Malformed(e.to_string()))
    }
}

impl KnowledgeOracle for ReplayOracle {
    fn plausibility(
        &self,
        target: &str,
        parents: &[String],
        _schema: &ObservationSchema,
    ) -> Result<PlausibilityAnswer, OracleError> {
        self.lookup(plausibility_request(target, parents))
    }

    fn propose_refinements(
        &self,
        request: &ProposalRequest,
    ) -> Result<Vec<Refinement>, OracleError> {
        self.lookup(refine_request(request))
    }

    fn topo_next(
        &self,
        ordered: &[String],
        remaining: &[String],
        _schema: &ObservationSchema,
    ) -> Result<String, OracleError> {
        self.lookup(topo_request(ordered, remaining))
    }

    fn elicit_parents(
        &self,
        node: &str,
        predecessors: &[String],
        _schema: &ObservationSchema,
    ) -> Result<Vec<String>, OracleError> {
        self.lookup(parents_request(node, predecessors))
    }

    fn init_program(&self, schema: &ObservationSchema) -> Result<TransitionProgram, OracleError> {
        let bundle: serde_json::Value = self.lookup(init_request(schema))?;
        TransitionProgram::from_bundle_json(&bundle.to_string())
            .map_err(|e| OracleError::Malformed(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::super::{ScriptedOracle, ScriptedFixture};
    use super::*;

    fn schema() -> ObservationSchema {
        ObservationSchema::from_json_str(
            r#"{"variables": [], "actions": [{"name":"wait"}], "environment_doc": "doc"}"#,
        )
        .unwrap()
    }

    fn scripted() -> ScriptedOracle {
        let fixture: ScriptedFixture = serde_json::from_str(
            r#"{
                "topo_order": ["a", "b"],
                "parents": {"b": ["a"]},
                "edge_plausibility": {"a->b": -0.25},
                "edge_default": -2.0,
                "init_functions": [
                    {"id": "wait.apply", "kind": "action", "action_name": "wait", "body": ""},
                    {"id": "tick", "kind": "dynamic", "body": ""}
                ]
            }"#,
        )
        .unwrap();
        ScriptedOracle::new(fixture)
    }

    #[test]
    fn replay_reproduces_recorded_answers() {
        let schema = schema();
        let recorder = RecordingOracle::new(scripted());
        let parents = ["a".to_string()];
        let live_p = recorder.plausibility("b", &parents, &schema).unwrap();
        let live_topo = recorder
            .topo_next(&[], &["a".to_string(), "b".to_string()], &schema)
            .unwrap();
        let live_parents = recorder
            .elicit_parents("b", &["a".to_string()], &schema)
            .unwrap();
        let live_init = recorder.init_program(&schema).unwrap();

        let replay = ReplayOracle::new(recorder.transcript());
        assert_eq!(replay.plausibility("b", &parents, &schema).unwrap(), live_p);
        assert_eq!(
            replay
                .topo_next(&[], &["a".to_string(), "b".to_string()], &schema)
                .unwrap(),
            live_topo
        );
        assert_eq!(
            replay.elicit_parents("b", &["a".to_string()], &schema).unwrap(),
            live_parents
        );
        assert_eq!(
            replay.init_program(&schema).unwrap().to_bundle_json(),
            live_init.to_bundle_json()
        );
    }

    #[test]
    fn replay_misses_are_errors() {
        let replay = ReplayOracle::new(Transcript::new());
        let err = replay.plausibility("b", &[], &schema()).unwrap_err();
        assert!(matches!(err, OracleError::Unavailable(_)));
    }

    #[test]
    fn transcript_round_trips_through_a_file() {
        let schema = schema();
        let recorder = RecordingOracle::new(scripted());
        recorder.plausibility("b", &["a".to_string()], &schema).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("transcript.json");
        recorder.save(&path).unwrap();
        let replay = ReplayOracle::from_file(&path).unwrap();
        assert_eq!(
            replay
                .plausibility("b", &["a".to_string()], &schema)
                .unwrap()
                .log_prob_yes,
            -0.25
        );
    }

    #[test]
    fn hashes_are_stable_across_parent_order() {
        let a = plausibility_request("t", &["x".into(), "y".into()]);
        let b = plausibility_request("t", &["y".into(), "x".into()]);
        assert_eq!(request_hash(&a), request_hash(&b));
    }
}
