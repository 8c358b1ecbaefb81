//! Flattens the conditioning context of a stochastic node into a fixed-width
//! numeric feature vector.
//!
//! Layout, in order: same-step parent values (caller-sorted), previous
//! stochastic observation, action (one-hot over declared action names plus
//! scaled declared fields), current deterministic state, previous
//! deterministic state. Within each block variables appear sorted by name,
//! so the layout is a pure function of the schema and the parent set.
//!
//! The encoding is total: numeric values min-max scale to [0,1] using bounds
//! observed in training data (clamped outside), categorical values one-hot
//! over schema levels, and anything unexpected — unseen level, missing key,
//! wrong type — encodes as all-zeros and logs a warning once per distinct
//! oddity.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::doc::DocValue;
use crate::schema::{ObservationSchema, Stream, TransitionRecord, VariableKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Codec {
    Numeric { min: f64, max: f64 },
    Categorical { levels: Vec<String> },
}

impl Codec {
    fn width(&self) -> usize {
        match self {
            Codec::Numeric { .. } => 1,
            Codec::Categorical { levels } => levels.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Column {
    name: String,
    codec: Codec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ActionField {
    action: String,
    field: String,
    min: f64,
    max: f64,
}

#[derive(Debug, Clone, Default)]
struct Warnings {
    seen: Arc<Mutex<BTreeSet<String>>>,
    count: Arc<AtomicUsize>,
}

impl Warnings {
    fn warn(&self, key: String) {
        self.count.fetch_add(1, Ordering::Relaxed);
        let mut seen = self.seen.lock().expect("warning set lock");
        if seen.insert(key.clone()) {
            eprintln!("feature encoding: {key}");
        }
    }
}

/// Schema- and data-derived recipe for turning a transition context into a
/// feature vector. Immutable after [`FeatureEncoding::build`]; shared freely
/// across parallel node fits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureEncoding {
    sto_columns: Vec<Column>,
    det_columns: Vec<Column>,
    action_names: Vec<String>,
    action_fields: Vec<ActionField>,
    #[serde(skip)]
    warnings: Warnings,
}

impl PartialEq for FeatureEncoding {
    fn eq(&self, other: &Self) -> bool {
        self.sto_columns == other.sto_columns
            && self.det_columns == other.det_columns
            && self.action_names == other.action_names
            && self.action_fields == other.action_fields
    }
}

fn scan_bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for v in values {
        if v.is_finite() {
            min = min.min(v);
            max = max.max(v);
        }
    }
    if min > max {
        (0.0, 1.0)
    } else {
        (min, max)
    }
}

fn scale(v: f64, min: f64, max: f64) -> f64 {
    if max > min {
        ((v - min) / (max - min)).clamp(0.0, 1.0)
    } else {
        0.5
    }
}

impl FeatureEncoding {
    /// Derives the encoding from the schema plus min-max bounds observed in
    /// `records` (both time steps of every numeric variable, and every
    /// declared action field).
    pub fn build(schema: &ObservationSchema, records: &[TransitionRecord]) -> FeatureEncoding {
        let column_for = |stream: Stream| -> Vec<Column> {
            let mut specs: Vec<_> = schema.stream_vars(stream).collect();
            specs.sort_by(|a, b| a.name.cmp(&b.name));
            specs
                .into_iter()
                .map(|spec| {
                    let codec = match &spec.kind {
                        VariableKind::Categorical { levels } => Codec::Categorical {
                            levels: levels.clone(),
                        },
                        VariableKind::Numerical { .. } => {
                            let docs: Vec<&DocValue> = match stream {
                                Stream::Stochastic => records
                                    .iter()
                                    .flat_map(|r| [&r.prev_sto, &r.next_sto])
                                    .collect(),
                                Stream::Deterministic => records
                                    .iter()
                                    .flat_map(|r| [&r.prev_det, &r.next_det])
                                    .collect(),
                            };
                            let (min, max) = scan_bounds(
                                docs.iter().filter_map(|d| d.key(&spec.name)?.as_num()),
                            );
                            Codec::Numeric { min, max }
                        }
                    };
                    Column {
                        name: spec.name.clone(),
                        codec,
                    }
                })
                .collect()
        };

        let mut action_fields = Vec::new();
        for action in &schema.actions {
            for field in &action.fields {
                let (min, max) = scan_bounds(records.iter().filter_map(|r| {
                    let doc = &r.action;
                    if doc.key("type").and_then(DocValue::as_text) == Some(action.name.as_str()) {
                        doc.key(field)?.as_num()
                    } else {
                        None
                    }
                }));
                action_fields.push(ActionField {
                    action: action.name.clone(),
                    field: field.clone(),
                    min,
                    max,
                });
            }
        }

        FeatureEncoding {
            sto_columns: column_for(Stream::Stochastic),
            det_columns: column_for(Stream::Deterministic),
            action_names: schema.actions.iter().map(|a| a.name.clone()).collect(),
            action_fields,
            warnings: Warnings::default(),
        }
    }

    fn column(&self, columns: &[Column], name: &str) -> Option<usize> {
        columns.iter().position(|c| c.name == name)
    }

    fn encode_column(&self, column: &Column, doc: &DocValue, out: &mut Vec<f64>) {
        let value = doc.key(&column.name);
        match &column.codec {
            Codec::Numeric { min, max } => match value.and_then(DocValue::as_num) {
                Some(v) if v.is_finite() => out.push(scale(v, *min, *max)),
                _ => {
                    self.warnings.warn(format!(
                        "variable {:?} missing or non-numeric; encoded as zero",
                        column.name
                    ));
                    out.push(0.0);
                }
            },
            Codec::Categorical { levels } => {
                let text = value.and_then(DocValue::as_text);
                let hit = text.and_then(|t| levels.iter().position(|l| l == t));
                if hit.is_none() {
                    self.warnings.warn(format!(
                        "variable {:?} level {:?} not in schema; encoded as all-zeros",
                        column.name,
                        text.unwrap_or("<missing>")
                    ));
                }
                for (i, _) in levels.iter().enumerate() {
                    out.push(if Some(i) == hit { 1.0 } else { 0.0 });
                }
            }
        }
    }

    fn encode_action(&self, action: &DocValue, out: &mut Vec<f64>) {
        let kind = action.key("type").and_then(DocValue::as_text);
        let hit = kind.and_then(|t| self.action_names.iter().position(|n| n == t));
        if hit.is_none() && !self.action_names.is_empty() {
            self.warnings.warn(format!(
                "action type {:?} not in schema; encoded as all-zeros",
                kind.unwrap_or("<missing>")
            ));
        }
        for (i, _) in self.action_names.iter().enumerate() {
            out.push(if Some(i) == hit { 1.0 } else { 0.0 });
        }
        for slot in &self.action_fields {
            let active = kind == Some(slot.action.as_str());
            let value = if active {
                action.key(&slot.field).and_then(DocValue::as_num)
            } else {
                None
            };
            match value {
                Some(v) if v.is_finite() => out.push(scale(v, slot.min, slot.max)),
                _ if active => {
                    self.warnings.warn(format!(
                        "action {:?} missing numeric field {:?}; encoded as zero",
                        slot.action, slot.field
                    ));
                    out.push(0.0);
                }
                _ => out.push(0.0),
            }
        }
    }

    /// Width of the feature vector for a node with the given same-step
    /// parents.
    pub fn context_width(&self, parents: &[String]) -> usize {
        let parent_width: usize = parents
            .iter()
            .map(|p| {
                self.column(&self.sto_columns, p)
                    .map(|i| self.sto_columns[i].codec.width())
                    .unwrap_or(0)
            })
            .sum();
        let det: usize = self.det_columns.iter().map(|c| c.codec.width()).sum();
        let sto: usize = self.sto_columns.iter().map(|c| c.codec.width()).sum();
        parent_width + sto + self.action_names.len() + self.action_fields.len() + 2 * det
    }

    /// Encodes one conditioning context. `parent_source` supplies same-step
    /// parent values — the observed stochastic document during fitting, or
    /// the partially sampled one during ancestral sampling.
    pub fn encode_context(
        &self,
        parents: &[String],
        parent_source: &DocValue,
        prev_sto: &DocValue,
        action: &DocValue,
        next_det: &DocValue,
        prev_det: &DocValue,
    ) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.context_width(parents));
        for parent in parents {
            if let Some(i) = self.column(&self.sto_columns, parent) {
                self.encode_column(&self.sto_columns[i], parent_source, &mut out);
            } else {
                self.warnings
                    .warn(format!("parent {parent:?} not a stochastic variable; skipped"));
            }
        }
        for column in &self.sto_columns {
            self.encode_column(column, prev_sto, &mut out);
        }
        self.encode_action(action, &mut out);
        for column in &self.det_columns {
            self.encode_column(column, next_det, &mut out);
        }
        for column in &self.det_columns {
            self.encode_column(column, prev_det, &mut out);
        }
        out
    }

    /// Encodes the conditioning context of one observed transition.
    pub fn encode_record(&self, record: &TransitionRecord, parents: &[String]) -> Vec<f64> {
        self.encode_context(
            parents,
            &record.next_sto,
            &record.prev_sto,
            &record.action,
            &record.next_det,
            &record.prev_det,
        )
    }

    /// Training bounds for a numeric stochastic variable (used to scale
    /// regression targets).
    pub fn numeric_bounds(&self, node: &str) -> Option<(f64, f64)> {
        let i = self.column(&self.sto_columns, node)?;
        match self.sto_columns[i].codec {
            Codec::Numeric { min, max } => Some((min, max)),
            Codec::Categorical { .. } => None,
        }
    }

    /// Schema levels for a categorical stochastic variable.
    pub fn levels(&self, node: &str) -> Option<&[String]> {
        let i = self.column(&self.sto_columns, node)?;
        match &self.sto_columns[i].codec {
            Codec::Categorical { levels } => Some(levels),
            Codec::Numeric { .. } => None,
        }
    }

    /// Number of oddities encountered while encoding so far.
    pub fn warning_count(&self) -> usize {
        self.warnings.count.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc::DocValue;

    fn schema() -> ObservationSchema {
        ObservationSchema::from_json_str(
            r#"{
                "variables": [
                    {"name": "money", "type": "numerical", "stream": "deterministic"},
                    {"name": "customers", "type": "numerical", "stream": "stochastic"},
                    {"name": "mood", "type": "categorical", "levels": ["low", "high"],
                     "stream": "stochastic"}
                ],
                "actions": [
                    {"name": "wait"},
                    {"name": "buy_beans", "fields": ["quantity"]}
                ],
                "environment_doc": "test stand"
            }"#,
        )
        .expect("schema parses")
    }

    fn doc(json: &str) -> DocValue {
        DocValue::from_json_str(json).expect("doc parses")
    }

    fn records() -> Vec<TransitionRecord> {
        vec![
            TransitionRecord {
                prev_det: doc(r#"{"money": 100}"#),
                prev_sto: doc(r#"{"customers": 10, "mood": "low"}"#),
                action: doc(r#"{"type": "buy_beans", "quantity": 5}"#),
                valid: true,
                next_det: doc(r#"{"money": 80}"#),
                next_sto: doc(r#"{"customers": 30, "mood": "high"}"#),
            },
            TransitionRecord {
                prev_det: doc(r#"{"money": 80}"#),
                prev_sto: doc(r#"{"customers": 30, "mood": "high"}"#),
                action: doc(r#"{"type": "wait"}"#),
                valid: true,
                next_det: doc(r#"{"money": 60}"#),
                next_sto: doc(r#"{"customers": 20, "mood": "high"}"#),
            },
        ]
    }

    #[test]
    fn layout_is_parents_then_prev_sto_action_dets() {
        let enc = FeatureEncoding::build(&schema(), &records());
        let rec = &records()[0];
        let feats = enc.encode_record(rec, &["customers".into()]);
        // parents: customers@t (30, bounds 10..30 -> 1.0)
        // prev sto sorted: customers (10 -> 0.0), mood one-hot low -> [1, 0]
        // action: one-hot [wait, buy_beans] order of declaration -> [0, 1],
        //         quantity 5 with bounds 5..5 -> 0.5
        // next det: money 80 of 60..100 -> 0.5
        // prev det: money 100 -> 1.0
        assert_eq!(feats, vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.5, 0.5, 1.0]);
        assert_eq!(feats.len(), enc.context_width(&["customers".into()]));
    }

    #[test]
    fn unseen_level_encodes_as_zeros_and_warns() {
        let enc = FeatureEncoding::build(&schema(), &records());
        let rec = TransitionRecord {
            prev_sto: doc(r#"{"customers": 10, "mood": "confused"}"#),
            ..records()[0].clone()
        };
        let feats = enc.encode_record(&rec, &[]);
        assert_eq!(&feats[1..3], &[0.0, 0.0], "one-hot block is all zeros");
        assert!(enc.warning_count() >= 1);
    }

    #[test]
    fn numeric_values_clamp_to_training_range() {
        let enc = FeatureEncoding::build(&schema(), &records());
        let rec = TransitionRecord {
            prev_sto: doc(r#"{"customers": 900, "mood": "low"}"#),
            ..records()[0].clone()
        };
        let feats = enc.encode_record(&rec, &[]);
        assert_eq!(feats[0], 1.0, "above training max clamps to 1");
    }

    #[test]
    fn unknown_action_type_encodes_to_zero_block() {
        let enc = FeatureEncoding::build(&schema(), &records());
        let rec = TransitionRecord {
            action: doc(r#"{"type": "dance"}"#),
            ..records()[0].clone()
        };
        let feats = enc.encode_record(&rec, &[]);
        // action block starts after prev-sto block (1 numeric + 2 one-hot).
        assert_eq!(&feats[3..6], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn target_lookups_expose_bounds_and_levels() {
        let enc = FeatureEncoding::build(&schema(), &records());
        assert_eq!(enc.numeric_bounds("customers"), Some((10.0, 30.0)));
        assert_eq!(
            enc.levels("mood").map(<[String]>::to_vec),
            Some(vec!["low".to_string(), "high".to_string()])
        );
        assert_eq!(enc.numeric_bounds("mood"), None);
        assert_eq!(enc.levels("customers"), None);
    }

    #[test]
    fn serialization_round_trips() {
        let enc = FeatureEncoding::build(&schema(), &records());
        let json = serde_json::to_string(&enc).expect("serializes");
        let back: FeatureEncoding = serde_json::from_str(&json).expect("deserializes");
        assert_eq!(enc, back);
    }
}
