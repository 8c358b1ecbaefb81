//! Observation schema: which variables belong to the deterministic vs the
//! stochastic stream, their types and bounds, per-variable descriptions, and
//! the declared action shapes. Also owns transition-record ingestion.

use std::collections::BTreeSet;
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doc::DocValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stream {
    Deterministic,
    Stochastic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum VariableKind {
    Categorical {
        levels: Vec<String>,
    },
    Numerical {
        #[serde(skip_serializing_if = "Option::is_none")]
        lower: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        upper: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: VariableKind,
    pub stream: Stream,
    #[serde(default)]
    pub description: String,
}

/// Declared shape of one action: its name plus the numeric fields it carries
/// (e.g. a purchase quantity). Used by program initialization and by the
/// feature encoder when flattening actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<String>,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSchema {
    pub variables: Vec<VariableSpec>,
    #[serde(default)]
    pub actions: Vec<ActionSpec>,
    pub environment_doc: String,
}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("schema is invalid: {0}")]
    Invalid(String),
    #[error("schema JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl ObservationSchema {
    pub fn from_json_str(text: &str) -> Result<ObservationSchema, SchemaError> {
        let schema: ObservationSchema = serde_json::from_str(text)?;
        schema.check()?;
        Ok(schema)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    fn check(&self) -> Result<(), SchemaError> {
        let mut names = BTreeSet::new();
        for v in &self.variables {
            if !names.insert(v.name.as_str()) {
                return Err(SchemaError::Invalid(format!(
                    "duplicate variable name {:?}",
                    v.name
                )));
            }
            if let VariableKind::Categorical { levels } = &v.kind {
                if levels.is_empty() {
                    return Err(SchemaError::Invalid(format!(
                        "variable {:?} has no levels",
                        v.name
                    )));
                }
                let distinct: BTreeSet<_> = levels.iter().collect();
                if distinct.len() != levels.len() {
                    return Err(SchemaError::Invalid(format!(
                        "variable {:?} has duplicate levels",
                        v.name
                    )));
                }
            }
            if let VariableKind::Numerical {
                lower: Some(lo),
                upper: Some(hi),
            } = v.kind
            {
                if lo > hi {
                    return Err(SchemaError::Invalid(format!(
                        "variable {:?} has lower {lo} > upper {hi}",
                        v.name
                    )));
                }
            }
        }
        let mut action_names = BTreeSet::new();
        for a in &self.actions {
            if !action_names.insert(a.name.as_str()) {
                return Err(SchemaError::Invalid(format!(
                    "duplicate action name {:?}",
                    a.name
                )));
            }
        }
        Ok(())
    }

    pub fn variable(&self, name: &str) -> Option<&VariableSpec> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn stream_vars(&self, stream: Stream) -> impl Iterator<Item = &VariableSpec> {
        self.variables.iter().filter(move |v| v.stream == stream)
    }

    pub fn deterministic_names(&self) -> Vec<String> {
        self.stream_vars(Stream::Deterministic)
            .map(|v| v.name.clone())
            .collect()
    }

    pub fn stochastic_names(&self) -> Vec<String> {
        self.stream_vars(Stream::Stochastic)
            .map(|v| v.name.clone())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub variable: String,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    Missing,
    WrongType { expected: String, got: String },
    OutOfBounds { value: f64 },
    UnknownLevel { value: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::Missing => write!(f, "{}: missing", self.variable),
            ViolationKind::WrongType { expected, got } => {
                write!(f, "{}: expected {expected}, got {got}", self.variable)
            }
            ViolationKind::OutOfBounds { value } => {
                write!(f, "{}: value {value} out of bounds", self.variable)
            }
            ViolationKind::UnknownLevel { value } => {
                write!(f, "{}: unknown level {value:?}", self.variable)
            }
        }
    }
}

/// Checks one observation document against the declared variables of one
/// stream. Undeclared extra keys are tolerated (bookkeeping fields such as a
/// day counter may ride along in the state document).
pub fn validate(obs: &DocValue, schema: &ObservationSchema, stream: Stream) -> Vec<Violation> {
    let mut out = Vec::new();
    for var in schema.stream_vars(stream) {
        let Some(value) = obs.key(&var.name) else {
            out.push(Violation {
                variable: var.name.clone(),
                kind: ViolationKind::Missing,
            });
            continue;
        };
        match (&var.kind, value) {
            (VariableKind::Numerical { lower, upper }, DocValue::Num(n)) => {
                let below = lower.is_some_and(|lo| *n < lo);
                let above = upper.is_some_and(|hi| *n > hi);
                if below || above || !n.is_finite() {
                    out.push(Violation {
                        variable: var.name.clone(),
                        kind: ViolationKind::OutOfBounds { value: *n },
                    });
                }
            }
            (VariableKind::Numerical { .. }, other) => out.push(Violation {
                variable: var.name.clone(),
                kind: ViolationKind::WrongType {
                    expected: "number".into(),
                    got: other.type_name().into(),
                },
            }),
            (VariableKind::Categorical { levels }, DocValue::Text(t)) => {
                if !levels.iter().any(|l| l == t) {
                    out.push(Violation {
                        variable: var.name.clone(),
                        kind: ViolationKind::UnknownLevel { value: t.clone() },
                    });
                }
            }
            (VariableKind::Categorical { .. }, other) => out.push(Violation {
                variable: var.name.clone(),
                kind: ViolationKind::WrongType {
                    expected: "text".into(),
                    got: other.type_name().into(),
                },
            }),
        }
    }
    out
}

/// One observed step: previous state (both streams), the action taken, whether
/// the environment accepted it, and the resulting state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub prev_det: DocValue,
    pub prev_sto: DocValue,
    pub action: DocValue,
    pub valid: bool,
    pub next_det: DocValue,
    pub next_sto: DocValue,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrajectoryLine {
    trajectory_id: u64,
    step: u64,
    #[serde(flatten)]
    record: TransitionRecord,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {source}")]
    Malformed {
        line: usize,
        source: serde_json::Error,
    },
    #[error("read failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: step {step} out of order within trajectory {trajectory}")]
    StepOrder {
        line: usize,
        trajectory: u64,
        step: u64,
    },
}

/// Schema violations found during ingestion, tagged with their line numbers.
/// Violations are data, not errors; the caller decides what to do with them.
#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub violations: Vec<(usize, Violation)>,
}

/// Reads line-delimited JSON transitions, groups them into trajectories by id
/// (in order of first appearance), and validates every observation document.
pub fn load_trajectories(
    source: impl BufRead,
    schema: &ObservationSchema,
) -> Result<(Vec<Vec<TransitionRecord>>, IngestReport), IngestError> {
    let mut trajectories: Vec<(u64, u64, Vec<TransitionRecord>)> = Vec::new();
    let mut report = IngestReport::default();
    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let parsed: TrajectoryLine = serde_json::from_str(&text).map_err(|source| {
            IngestError::Malformed {
                line: line_no,
                source,
            }
        })?;
        for (obs, stream) in [
            (&parsed.record.prev_det, Stream::Deterministic),
            (&parsed.record.next_det, Stream::Deterministic),
            (&parsed.record.prev_sto, Stream::Stochastic),
            (&parsed.record.next_sto, Stream::Stochastic),
        ] {
            for v in validate(obs, schema, stream) {
                report.violations.push((line_no, v));
            }
        }
        match trajectories
            .iter_mut()
            .find(|(id, _, _)| *id == parsed.trajectory_id)
        {
            Some((_, last_step, records)) => {
                if parsed.step <= *last_step {
                    return Err(IngestError::StepOrder {
                        line: line_no,
                        trajectory: parsed.trajectory_id,
                        step: parsed.step,
                    });
                }
                *last_step = parsed.step;
                records.push(parsed.record);
            }
            None => trajectories.push((parsed.trajectory_id, parsed.step, vec![parsed.record])),
        }
    }
    Ok((
        trajectories.into_iter().map(|(_, _, r)| r).collect(),
        report,
    ))
}

/// Serializes trajectories to the line-delimited wire format.
pub fn write_trajectories(trajectories: &[Vec<TransitionRecord>]) -> String {
    let mut out = String::new();
    for (tid, records) in trajectories.iter().enumerate() {
        for (step, record) in records.iter().enumerate() {
            let line = TrajectoryLine {
                trajectory_id: tid as u64,
                step: step as u64,
                record: record.clone(),
            };
            out.push_str(&serde_json::to_string(&line).expect("record serializes"));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn numeric(name: &str, lower: f64, upper: f64, stream: Stream) -> VariableSpec {
        VariableSpec {
            name: name.into(),
            kind: VariableKind::Numerical {
                lower: Some(lower),
                upper: Some(upper),
            },
            stream,
            description: String::new(),
        }
    }

    fn test_schema() -> ObservationSchema {
        ObservationSchema {
            variables: vec![
                numeric("satisfaction", 1.0, 5.0, Stream::Stochastic),
                VariableSpec {
                    name: "weather".into(),
                    kind: VariableKind::Categorical {
                        levels: vec!["sunny".into(), "rainy".into()],
                    },
                    stream: Stream::Stochastic,
                    description: String::new(),
                },
                numeric("price", 0.5, 10.0, Stream::Deterministic),
            ],
            actions: vec![],
            environment_doc: String::new(),
        }
    }

    #[test]
    fn in_bounds_value_passes() {
        let obs = DocValue::from(json!({"satisfaction": 3.0, "weather": "sunny"}));
        assert!(validate(&obs, &test_schema(), Stream::Stochastic).is_empty());
    }

    #[test]
    fn bound_violation_reported() {
        let obs = DocValue::from(json!({"satisfaction": 7.0, "weather": "sunny"}));
        let v = validate(&obs, &test_schema(), Stream::Stochastic);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].variable, "satisfaction");
        assert_eq!(v[0].kind, ViolationKind::OutOfBounds { value: 7.0 });
    }

    #[test]
    fn unknown_level_reported() {
        let obs = DocValue::from(json!({"satisfaction": 3.0, "weather": "hail"}));
        let v = validate(&obs, &test_schema(), Stream::Stochastic);
        assert_eq!(
            v[0].kind,
            ViolationKind::UnknownLevel {
                value: "hail".into()
            }
        );
    }

    #[test]
    fn missing_and_wrong_type_reported_extras_tolerated() {
        let obs = DocValue::from(json!({"satisfaction": "high", "day": 4}));
        let v = validate(&obs, &test_schema(), Stream::Stochastic);
        assert_eq!(v.len(), 2);
        assert!(v
            .iter()
            .any(|x| x.variable == "weather" && x.kind == ViolationKind::Missing));
        assert!(v.iter().any(|x| x.variable == "satisfaction"
            && matches!(x.kind, ViolationKind::WrongType { .. })));
    }

    #[test]
    fn empty_stream_loads_empty() {
        let (t, report) = load_trajectories(std::io::empty(), &test_schema()).unwrap();
        assert!(t.is_empty());
        assert!(report.violations.is_empty());
    }

    #[test]
    fn record_round_trip_via_lines() {
        let record = TransitionRecord {
            prev_det: DocValue::from(json!({"price": 2.5})),
            prev_sto: DocValue::from(json!({"satisfaction": 3.0, "weather": "sunny"})),
            action: DocValue::from(json!({"type": "wait"})),
            valid: true,
            next_det: DocValue::from(json!({"price": 2.5})),
            next_sto: DocValue::from(json!({"satisfaction": 3.1, "weather": "rainy"})),
        };
        let text = write_trajectories(&[vec![record.clone(), record.clone()], vec![record.clone()]]);
        let (loaded, report) = load_trajectories(text.as_bytes(), &test_schema()).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].len(), 2);
        assert_eq!(loaded[0][0], record);
        assert!(report.violations.is_empty());
    }

    #[test]
    fn missing_validity_field_is_ingestion_error() {
        let line = r#"{"trajectory_id":0,"step":0,"prev_det":{},"prev_sto":{},"action":{},"next_det":{},"next_sto":{}}"#;
        let err = load_trajectories(line.as_bytes(), &test_schema()).unwrap_err();
        match err {
            IngestError::Malformed { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn violations_carry_line_numbers() {
        let record = TransitionRecord {
            prev_det: DocValue::from(json!({"price": 99.0})),
            prev_sto: DocValue::from(json!({"satisfaction": 3.0, "weather": "sunny"})),
            action: DocValue::from(json!({"type": "wait"})),
            valid: true,
            next_det: DocValue::from(json!({"price": 2.5})),
            next_sto: DocValue::from(json!({"satisfaction": 3.0, "weather": "sunny"})),
        };
        let text = write_trajectories(&[vec![record]]);
        let (_, report) = load_trajectories(text.as_bytes(), &test_schema()).unwrap();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].0, 1);
        assert_eq!(report.violations[0].1.variable, "price");
    }

    #[test]
    fn schema_json_round_trip() {
        let schema = test_schema();
        let text = schema.to_json_pretty();
        assert_eq!(ObservationSchema::from_json_str(&text).unwrap(), schema);
    }

    #[test]
    fn schema_rejects_bad_bounds_and_duplicate_levels() {
        let mut s = test_schema();
        s.variables.push(numeric("x", 5.0, 1.0, Stream::Stochastic));
        assert!(ObservationSchema::from_json_str(&s.to_json_pretty()).is_err());
        let mut s = test_schema();
        s.variables.push(VariableSpec {
            name: "dup".into(),
            kind: VariableKind::Categorical {
                levels: vec!["a".into(), "a".into()],
            },
            stream: Stream::Stochastic,
            description: String::new(),
        });
        assert!(ObservationSchema::from_json_str(&s.to_json_pretty()).is_err());
    }
}
