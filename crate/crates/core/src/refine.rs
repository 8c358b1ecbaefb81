//! Program repair: a single-pass evolutionary loop over recorded transitions.
//!
//! Each mispredicted transition yields K candidate single-function edits from
//! a proposal provider. Candidates are scored on the offending transition
//! (precondition edits by validity agreement, patch edits by how much closer
//! the predicted observation lands) and gated on a held-out validation score;
//! the best gated candidate is applied before the loop moves on.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doc::{deep_diff, DiffKind, DocValue};
use crate::program::{
    classify_error, ErrorKind, EvalError, FunctionDef, FunctionKind, Prediction, PredictionError,
    ProgramError, TransitionProgram,
};
use crate::schema::TransitionRecord;

/// A single-function edit to a transition program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Refinement {
    Add { new_function: FunctionDef },
    Remove { target_id: String },
    Replace {
        target_id: String,
        new_function: FunctionDef,
    },
}

impl Refinement {
    /// Applies the edit, re-checking program invariants.
    pub fn apply(&self, program: &TransitionProgram) -> Result<TransitionProgram, RefineError> {
        let mut functions = program.functions().to_vec();
        match self {
            Refinement::Add { new_function } => functions.push(new_function.clone()),
            Refinement::Remove { target_id } => {
                let at = functions
                    .iter()
                    .position(|f| f.id() == target_id)
                    .ok_or_else(|| RefineError::UnknownTarget {
                        target_id: target_id.clone(),
                    })?;
                functions.remove(at);
            }
            Refinement::Replace {
                target_id,
                new_function,
            } => {
                let at = functions
                    .iter()
                    .position(|f| f.id() == target_id)
                    .ok_or_else(|| RefineError::UnknownTarget {
                        target_id: target_id.clone(),
                    })?;
                functions[at] = new_function.clone();
            }
        }
        TransitionProgram::from_functions(functions).map_err(RefineError::Invalid)
    }

    /// The id of the function this edit touches (the new id for add/replace).
    pub fn touched_id(&self) -> &str {
        match self {
            Refinement::Add { new_function } | Refinement::Replace { new_function, .. } => {
                new_function.id()
            }
            Refinement::Remove { target_id } => target_id,
        }
    }

    /// Whether the edit targets a precondition (scored by validity agreement)
    /// rather than a patch-producing function (scored by observation deltas).
    fn edits_precondition(&self, program: &TransitionProgram) -> Result<bool, RefineError> {
        let kind = match self {
            Refinement::Add { new_function } | Refinement::Replace { new_function, .. } => {
                new_function.kind().clone()
            }
            Refinement::Remove { target_id } => program
                .function(target_id)
                .ok_or_else(|| RefineError::UnknownTarget {
                    target_id: target_id.clone(),
                })?
                .kind()
                .clone(),
        };
        Ok(matches!(kind, FunctionKind::Precondition { .. }))
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RefineError {
    #[error("refinement targets unknown function {target_id}")]
    UnknownTarget { target_id: String },
    #[error("refined program is invalid: {0}")]
    Invalid(ProgramError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefineConfig {
    /// Candidate edits requested per erroneous transition.
    pub k_candidates: usize,
    /// Transitions sampled into the held-out validation set.
    pub validation_set_size: usize,
    /// Valid:invalid ratio enforced when assembling the training mix.
    pub train_mix: f64,
    /// Validation score a candidate must strictly exceed to be applied.
    pub vs_threshold: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            k_candidates: 3,
            validation_set_size: 300,
            train_mix: 1.0,
            vs_threshold: 0.0,
        }
    }
}

/// Validity-agreement score for precondition edits: did the new prediction
/// match the recorded validity where the old one did not? Always in
/// {-1, 0, 1}.
pub fn pers(true_valid: bool, old_pred_valid: bool, new_pred_valid: bool) -> i32 {
    (new_pred_valid == true_valid) as i32 - (old_pred_valid == true_valid) as i32
}

/// Observation-difference reduction score in [-1, 1].
///
/// Walks the differences between the prior and the recorded next
/// observation. For each numerical change the prediction earns +1 when it is
/// at least as close to the truth as the prior was, -1 otherwise;
/// non-numerical changes earn +1 only on exact match; structural differences
/// (additions, removals, type changes) always earn -1. The result is the
/// mean; an empty difference set scores 0.
pub fn odrs(prev: &DocValue, truth: &DocValue, pred: &DocValue) -> f64 {
    let diff = deep_diff(prev, truth);
    if diff.is_empty() {
        return 0.0;
    }
    let mut score = 0.0;
    for entry in &diff {
        let pred_value = entry.path.resolve(pred).ok();
        let credit = match entry.kind {
            DiffKind::ValuesChanged if entry.is_numerical() => {
                let truth_n = entry.new_value.as_ref().and_then(DocValue::as_num);
                let prev_n = entry.old_value.as_ref().and_then(DocValue::as_num);
                match (truth_n, prev_n, pred_value.and_then(DocValue::as_num)) {
                    (Some(t), Some(p0), Some(p)) => (t - p).abs() <= (t - p0).abs(),
                    _ => false,
                }
            }
            DiffKind::ValuesChanged => pred_value == entry.new_value.as_ref(),
            _ => false,
        };
        score += if credit { 1.0 } else { -1.0 };
    }
    score / diff.len() as f64
}

/// Scores a candidate edit over a transition set: the mean per-transition
/// improvement of the edited program over the current one. Precondition
/// edits average [`pers`]; patch edits average the [`odrs`] delta. A faulting
/// candidate scores the worst value (-1) on that transition.
pub fn refinement_score(
    candidate: &Refinement,
    program: &TransitionProgram,
    transitions: &[TransitionRecord],
) -> Result<f64, RefineError> {
    let is_precondition = candidate.edits_precondition(program)?;
    let new_program = candidate.apply(program)?;
    let old: Vec<Result<Prediction, EvalError>> = transitions
        .iter()
        .map(|t| program.evaluate(&t.prev_det, &t.prev_sto, &t.action))
        .collect();
    Ok(score_against(
        &new_program,
        is_precondition,
        transitions,
        &old,
    ))
}

fn score_against(
    new_program: &TransitionProgram,
    is_precondition: bool,
    transitions: &[TransitionRecord],
    old_outcomes: &[Result<Prediction, EvalError>],
) -> f64 {
    if transitions.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for (t, old) in transitions.iter().zip(old_outcomes) {
        let new = new_program.evaluate(&t.prev_det, &t.prev_sto, &t.action);
        total += match new {
            Err(_) => -1.0,
            Ok(new) => {
                if is_precondition {
                    // A faulting old program counts as disagreeing with truth.
                    let old_valid = old.as_ref().map(|p| p.pred_valid).unwrap_or(!t.valid);
                    pers(t.valid, old_valid, new.pred_valid) as f64
                } else {
                    let odrs_old = old
                        .as_ref()
                        .map(|p| odrs(&t.prev_det, &t.next_det, &p.pred_det))
                        .unwrap_or(-1.0);
                    odrs(&t.prev_det, &t.next_det, &new.pred_det) - odrs_old
                }
            }
        };
    }
    total / transitions.len() as f64
}

/// Context handed to the proposal provider for one erroneous transition:
/// the classified error, the attempted action, and the function bodies
/// registered for that action plus the dynamic function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProposalRequest {
    pub error: PredictionError,
    pub action: DocValue,
    pub functions: Vec<FunctionDef>,
    pub k: usize,
}

impl ProposalRequest {
    pub fn new(
        program: &TransitionProgram,
        record: &TransitionRecord,
        error: &PredictionError,
        k: usize,
    ) -> Self {
        let mut functions = Vec::new();
        if let Some(name) = record.action.key("type").and_then(DocValue::as_text) {
            functions.extend(program.preconditions_for(name).cloned());
            functions.extend(program.action_fn(name).cloned());
        }
        functions.push(program.dynamic().clone());
        Self {
            error: error.clone(),
            action: record.action.clone(),
            functions,
            k,
        }
    }
}

/// Source of candidate edits (scripted fixture, recorded replay, or a live
/// knowledge oracle).
pub trait ProposalProvider {
    fn propose(&mut self, request: &ProposalRequest) -> Result<Vec<Refinement>, ProposalError>;
}

#[derive(Debug, Clone, Error)]
#[error("proposal provider failed: {0}")]
pub struct ProposalError(pub String);

/// Audit record for one erroneous transition during [`refine`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefineLogEntry {
    pub transition_index: usize,
    pub error_kind: ErrorKind,
    pub candidates: Vec<CandidateOutcome>,
    /// Id of the function touched by the applied edit, if any was accepted.
    pub applied_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateOutcome {
    /// Score on the offending transition; absent when the edit did not apply.
    pub score: Option<f64>,
    /// Score on the validation set; absent when the edit did not apply.
    pub vs: Option<f64>,
    pub accepted: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RefinementLog {
    pub entries: Vec<RefineLogEntry>,
}

impl RefinementLog {
    pub fn to_jsonl(&self) -> String {
        self.entries
            .iter()
            .map(|e| serde_json::to_string(e).expect("log entries serialize"))
            .fold(String::new(), |mut acc, line| {
                acc.push_str(&line);
                acc.push('\n');
                acc
            })
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let entries = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { entries })
    }
}

/// Runs one repair pass over the training transitions.
///
/// For each transition the current program mispredicts, asks the provider
/// for up to `k_candidates` edits, scores each on the offending transition
/// and on the validation set, and applies the best candidate whose
/// validation score strictly exceeds the threshold (ties broken by proposal
/// order). Provider failures skip the transition; the loop never revisits
/// earlier transitions.
pub fn refine<P: ProposalProvider + ?Sized>(
    mut program: TransitionProgram,
    train: &[TransitionRecord],
    val: &[TransitionRecord],
    provider: &mut P,
    cfg: &RefineConfig,
) -> (TransitionProgram, RefinementLog) {
    let mut log = RefinementLog::default();
    // Cached predictions of the current program on the validation set;
    // recomputed only when an edit is accepted.
    let mut val_old: Vec<Result<Prediction, EvalError>> = evaluate_all(&program, val);

    for (index, record) in train.iter().enumerate() {
        let outcome = program.evaluate(&record.prev_det, &record.prev_sto, &record.action);
        let Some(error) = classify_error(&outcome, &record.next_det, record.valid) else {
            continue;
        };
        let request = ProposalRequest::new(&program, record, &error, cfg.k_candidates);
        let proposals = match provider.propose(&request) {
            Ok(p) => p,
            Err(e) => {
                log.entries.push(RefineLogEntry {
                    transition_index: index,
                    error_kind: error.kind,
                    candidates: Vec::new(),
                    applied_id: None,
                    note: Some(e.to_string()),
                });
                continue;
            }
        };

        let current = std::slice::from_ref(record);
        let current_old = std::slice::from_ref(&outcome);
        let mut outcomes = Vec::with_capacity(proposals.len());
        let mut best: Option<(usize, f64, TransitionProgram)> = None;
        for candidate in &proposals {
            let scored = candidate
                .edits_precondition(&program)
                .and_then(|is_pre| Ok((is_pre, candidate.apply(&program)?)));
            let (is_pre, new_program) = match scored {
                Ok(v) => v,
                Err(_) => {
                    outcomes.push(CandidateOutcome {
                        score: None,
                        vs: None,
                        accepted: false,
                    });
                    continue;
                }
            };
            let score = score_against(&new_program, is_pre, current, current_old);
            let vs = score_against(&new_program, is_pre, val, &val_old);
            let passes = vs > cfg.vs_threshold;
            if passes && best.as_ref().map(|(_, s, _)| score > *s).unwrap_or(true) {
                best = Some((outcomes.len(), score, new_program));
            }
            outcomes.push(CandidateOutcome {
                score: Some(score),
                vs: Some(vs),
                accepted: false,
            });
        }

        let mut applied_id = None;
        if let Some((winner, _, new_program)) = best {
            outcomes[winner].accepted = true;
            applied_id = Some(proposals[winner].touched_id().to_string());
            program = new_program;
            val_old = evaluate_all(&program, val);
        }
        log.entries.push(RefineLogEntry {
            transition_index: index,
            error_kind: error.kind,
            candidates: outcomes,
            applied_id,
            note: None,
        });
    }
    (program, log)
}

fn evaluate_all(
    program: &TransitionProgram,
    records: &[TransitionRecord],
) -> Vec<Result<Prediction, EvalError>> {
    records
        .iter()
        .map(|t| program.evaluate(&t.prev_det, &t.prev_sto, &t.action))
        .collect()
}

/// Draws a validation set of up to `size` records (seeded, without
/// replacement), returning `(validation, remainder)` with the remainder in
/// original order.
pub fn split_validation(
    records: &[TransitionRecord],
    size: usize,
    seed: u64,
) -> (Vec<TransitionRecord>, Vec<TransitionRecord>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..records.len()).collect();
    indices.shuffle(&mut rng);
    let chosen: std::collections::BTreeSet<usize> =
        indices.into_iter().take(size.min(records.len())).collect();
    let mut val = Vec::with_capacity(chosen.len());
    let mut rest = Vec::with_capacity(records.len().saturating_sub(chosen.len()));
    for (i, r) in records.iter().enumerate() {
        if chosen.contains(&i) {
            val.push(r.clone());
        } else {
            rest.push(r.clone());
        }
    }
    (val, rest)
}

/// Assembles a training mix with the requested valid:invalid ratio by
/// stratified sampling (seeded). With ratio 1.0 the mix is balanced; classes
/// are capped by availability.
pub fn mix_train(records: &[TransitionRecord], ratio: f64, seed: u64) -> Vec<TransitionRecord> {
    assert!(ratio > 0.0, "ratio must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut valid: Vec<&TransitionRecord> = records.iter().filter(|r| r.valid).collect();
    let mut invalid: Vec<&TransitionRecord> = records.iter().filter(|r| !r.valid).collect();
    valid.shuffle(&mut rng);
    invalid.shuffle(&mut rng);
    let take_invalid = invalid
        .len()
        .min((valid.len() as f64 / ratio).floor() as usize);
    let take_valid = valid
        .len()
        .min((take_invalid as f64 * ratio).round() as usize);
    let mut out: Vec<TransitionRecord> = valid
        .into_iter()
        .take(take_valid)
        .chain(invalid.into_iter().take(take_invalid))
        .cloned()
        .collect();
    out.shuffle(&mut rng);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::FunctionDescription;

    fn doc(json: &str) -> DocValue {
        DocValue::from_json_str(json).unwrap()
    }

    fn def(id: &str, kind: FunctionKind, body: &str) -> FunctionDef {
        FunctionDef::new(id, kind, FunctionDescription::default(), body).unwrap()
    }

    fn dyn_fn(id: &str, body: &str) -> FunctionDef {
        def(id, FunctionKind::Dynamic, body)
    }

    fn pre(id: &str, action: &str, body: &str) -> FunctionDef {
        def(
            id,
            FunctionKind::Precondition {
                action_name: action.to_string(),
            },
            body,
        )
    }

    fn record(prev: &str, action: &str, valid: bool, next: &str) -> TransitionRecord {
        TransitionRecord {
            prev_det: doc(prev),
            prev_sto: doc("{}"),
            action: doc(action),
            valid,
            next_det: doc(next),
            next_sto: doc("{}"),
        }
    }

    #[test]
    fn pers_frozen_values() {
        assert_eq!(pers(true, false, true), 1);
        assert_eq!(pers(true, true, true), 0);
        assert_eq!(pers(true, true, false), -1);
        assert_eq!(pers(false, true, false), 1);
        assert_eq!(pers(false, false, true), -1);
    }

    #[test]
    fn odrs_frozen_values() {
        let prev = doc(r#"{"a":10}"#);
        let truth = doc(r#"{"a":14}"#);
        assert_eq!(odrs(&prev, &truth, &doc(r#"{"a":13}"#)), 1.0);
        assert_eq!(odrs(&prev, &truth, &doc(r#"{"a":5}"#)), -1.0);
        assert_eq!(odrs(&prev, &prev, &doc(r#"{"a":99}"#)), 0.0);
    }

    #[test]
    fn odrs_ties_favor_the_prediction() {
        // Equidistant counts as "at least as close".
        let prev = doc(r#"{"a":10}"#);
        let truth = doc(r#"{"a":14}"#);
        assert_eq!(odrs(&prev, &truth, &doc(r#"{"a":10}"#)), 1.0);
    }

    #[test]
    fn odrs_structural_entries_always_penalize() {
        let prev = doc(r#"{"a":1}"#);
        let truth = doc(r#"{"a":1,"b":2}"#);
        // item_added entries score -1 regardless of the prediction.
        assert_eq!(odrs(&prev, &truth, &truth), -1.0);
    }

    #[test]
    fn odrs_text_changes_need_exact_match() {
        let prev = doc(r#"{"w":"sunny","a":10}"#);
        let truth = doc(r#"{"w":"rainy","a":14}"#);
        let pred = doc(r#"{"w":"rainy","a":14}"#);
        assert_eq!(odrs(&prev, &truth, &pred), 1.0);
        let off = doc(r#"{"w":"cloudy","a":14}"#);
        assert_eq!(odrs(&prev, &truth, &off), 0.0);
    }

    #[test]
    fn odrs_missing_predicted_path_penalizes() {
        let prev = doc(r#"{"a":10}"#);
        let truth = doc(r#"{"a":14}"#);
        assert_eq!(odrs(&prev, &truth, &doc("{}")), -1.0);
    }

    fn drift_program(body: &str) -> TransitionProgram {
        TransitionProgram::from_functions(vec![dyn_fn("drift", body)]).unwrap()
    }

    #[test]
    fn noop_replace_scores_zero() {
        let program = drift_program(r#"emit replace "/a" (get "/a" + 4);"#);
        let candidate = Refinement::Replace {
            target_id: "drift".to_string(),
            new_function: dyn_fn("drift", r#"emit replace "/a" (get "/a" + 4);"#),
        };
        let records = vec![record(r#"{"a":10}"#, r#"{"type":"wait"}"#, true, r#"{"a":14}"#)];
        let score = refinement_score(&candidate, &program, &records).unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn fixing_the_only_drift_scores_two() {
        // Old program moves /a the wrong way (score -1); the candidate lands
        // exactly on the truth (score +1): delta = 2.
        let program = drift_program(r#"emit replace "/a" (get "/a" - 5);"#);
        let candidate = Refinement::Replace {
            target_id: "drift".to_string(),
            new_function: dyn_fn("drift", r#"emit replace "/a" (get "/a" + 4);"#),
        };
        let records = vec![record(r#"{"a":10}"#, r#"{"type":"wait"}"#, true, r#"{"a":14}"#)];
        let score = refinement_score(&candidate, &program, &records).unwrap();
        assert_eq!(score, 2.0);
    }

    #[test]
    fn faulting_candidate_scores_worst() {
        let program = drift_program(r#"emit replace "/a" (get "/a" + 4);"#);
        let candidate = Refinement::Replace {
            target_id: "drift".to_string(),
            new_function: dyn_fn("drift", r#"emit replace "/a" (1 / (get "/a" - 10));"#),
        };
        let records = vec![record(r#"{"a":10}"#, r#"{"type":"wait"}"#, true, r#"{"a":14}"#)];
        let score = refinement_score(&candidate, &program, &records).unwrap();
        assert_eq!(score, -1.0);
    }

    #[test]
    fn scoring_unknown_target_is_an_error() {
        let program = drift_program("");
        let candidate = Refinement::Remove {
            target_id: "ghost".to_string(),
        };
        let records = vec![];
        assert!(matches!(
            refinement_score(&candidate, &program, &records),
            Err(RefineError::UnknownTarget { .. })
        ));
    }

    #[test]
    fn removing_the_dynamic_function_is_invalid() {
        let program = drift_program("");
        let candidate = Refinement::Remove {
            target_id: "drift".to_string(),
        };
        assert!(matches!(
            candidate.apply(&program),
            Err(RefineError::Invalid(ProgramError::MissingDynamic))
        ));
    }

    struct Scripted {
        proposals: Vec<Refinement>,
    }

    impl ProposalProvider for Scripted {
        fn propose(&mut self, _: &ProposalRequest) -> Result<Vec<Refinement>, ProposalError> {
            Ok(self.proposals.clone())
        }
    }

    /// A program whose precondition for `spend` is too permissive: data says
    /// spending needs money >= 100, the program always allows it.
    fn permissive_program() -> TransitionProgram {
        TransitionProgram::from_functions(vec![
            pre("spend.check", "spend", r#"return (true, "");"#),
            dyn_fn("noop", ""),
        ])
        .unwrap()
    }

    fn spend_records() -> Vec<TransitionRecord> {
        vec![
            record(r#"{"money":50}"#, r#"{"type":"spend"}"#, false, r#"{"money":50}"#),
            record(r#"{"money":150}"#, r#"{"type":"spend"}"#, true, r#"{"money":150}"#),
            record(r#"{"money":30}"#, r#"{"type":"spend"}"#, false, r#"{"money":30}"#),
            record(r#"{"money":200}"#, r#"{"type":"spend"}"#, true, r#"{"money":200}"#),
        ]
    }

    #[test]
    fn scripted_fix_repairs_a_permissive_precondition() {
        let fix = Refinement::Replace {
            target_id: "spend.check".to_string(),
            new_function: pre(
                "spend.check",
                "spend",
                r#"return (get "/money" >= 100, "not enough money");"#,
            ),
        };
        let decoy = Refinement::Replace {
            target_id: "spend.check".to_string(),
            new_function: pre("spend.check", "spend", r#"return (false, "never");"#),
        };
        let mut provider = Scripted {
            proposals: vec![decoy, fix],
        };
        let records = spend_records();
        let (train, val) = (records.clone(), records.clone());
        let (repaired, log) = refine(
            permissive_program(),
            &train,
            &val,
            &mut provider,
            &RefineConfig::default(),
        );

        // The offending transition now classifies clean.
        let outcome = repaired.evaluate(&train[0].prev_det, &train[0].prev_sto, &train[0].action);
        assert_eq!(classify_error(&outcome, &train[0].next_det, train[0].valid), None);

        let first = &log.entries[0];
        assert_eq!(first.error_kind, ErrorKind::EPs);
        assert_eq!(first.applied_id.as_deref(), Some("spend.check"));
        assert!(first.candidates[1].accepted);
        assert!(!first.candidates[0].accepted);
        assert!(first.candidates[1].vs.unwrap() > 0.0);
    }

    #[test]
    fn gate_rejects_candidates_without_validation_gain() {
        // The decoy fixes nothing on validation (it flips valid records to
        // invalid), so the program must stay unchanged.
        let decoy = Refinement::Replace {
            target_id: "spend.check".to_string(),
            new_function: pre("spend.check", "spend", r#"return (false, "never");"#),
        };
        let mut provider = Scripted {
            proposals: vec![decoy],
        };
        let records = spend_records();
        let before = permissive_program();
        let (after, log) = refine(
            before.clone(),
            &records,
            &records,
            &mut provider,
            &RefineConfig::default(),
        );
        assert_eq!(after, before);
        assert!(log.entries.iter().all(|e| e.applied_id.is_none()));
        assert!(log
            .entries
            .iter()
            .flat_map(|e| &e.candidates)
            .all(|c| !c.accepted));
    }

    #[test]
    fn error_free_training_set_is_a_noop() {
        let program = drift_program(r#"emit replace "/a" (get "/a" + 1);"#);
        let records = vec![record(r#"{"a":1}"#, r#"{"type":"wait"}"#, true, r#"{"a":2}"#)];
        let mut provider = Scripted { proposals: vec![] };
        let (after, log) = refine(
            program.clone(),
            &records,
            &records,
            &mut provider,
            &RefineConfig::default(),
        );
        assert_eq!(after, program);
        assert!(log.entries.is_empty());
    }

    struct Failing;

    impl ProposalProvider for Failing {
        fn propose(&mut self, _: &ProposalRequest) -> Result<Vec<Refinement>, ProposalError> {
            Err(ProposalError("offline".to_string()))
        }
    }

    #[test]
    fn provider_failure_skips_and_logs() {
        let records = spend_records();
        let (after, log) = refine(
            permissive_program(),
            &records,
            &records,
            &mut Failing,
            &RefineConfig::default(),
        );
        assert_eq!(after, permissive_program());
        assert!(!log.entries.is_empty());
        assert!(log.entries.iter().all(|e| e.note.is_some()));
    }

    #[test]
    fn refine_is_deterministic() {
        let fix = Refinement::Replace {
            target_id: "spend.check".to_string(),
            new_function: pre(
                "spend.check",
                "spend",
                r#"return (get "/money" >= 100, "not enough money");"#,
            ),
        };
        let run = || {
            let mut provider = Scripted {
                proposals: vec![fix.clone()],
            };
            let records = spend_records();
            refine(
                permissive_program(),
                &records,
                &records,
                &mut provider,
                &RefineConfig::default(),
            )
        };
        let (a, log_a) = run();
        let (b, log_b) = run();
        assert_eq!(a.to_bundle_json(), b.to_bundle_json());
        assert_eq!(log_a.to_jsonl(), log_b.to_jsonl());
    }

    #[test]
    fn log_round_trips_as_json_lines() {
        let log = RefinementLog {
            entries: vec![RefineLogEntry {
                transition_index: 7,
                error_kind: ErrorKind::EOd,
                candidates: vec![CandidateOutcome {
                    score: Some(1.5),
                    vs: Some(0.25),
                    accepted: true,
                }],
                applied_id: Some("dyn".to_string()),
                note: None,
            }],
        };
        let text = log.to_jsonl();
        let back = RefinementLog::from_jsonl(&text).unwrap();
        assert_eq!(back.entries.len(), 1);
        assert_eq!(back.to_jsonl(), text);
    }

    #[test]
    fn split_validation_is_disjoint_and_seeded() {
        let records: Vec<TransitionRecord> = (0..20)
            .map(|i| {
                record(
                    &format!(r#"{{"a":{i}}}"#),
                    r#"{"type":"wait"}"#,
                    true,
                    &format!(r#"{{"a":{i}}}"#),
                )
            })
            .collect();
        let (val_a, rest_a) = split_validation(&records, 5, 11);
        let (val_b, rest_b) = split_validation(&records, 5, 11);
        assert_eq!(val_a, val_b);
        assert_eq!(rest_a, rest_b);
        assert_eq!(val_a.len(), 5);
        assert_eq!(rest_a.len(), 15);
        for v in &val_a {
            assert!(!rest_a.contains(v));
        }
    }

    #[test]
    fn mix_train_balances_classes() {
        let mut records = Vec::new();
        for i in 0..30 {
            records.push(record(
                &format!(r#"{{"a":{i}}}"#),
                r#"{"type":"wait"}"#,
                i % 5 == 0, // 6 valid, 24 invalid
                r#"{"a":0}"#,
            ));
        }
        let mixed = mix_train(&records, 1.0, 3);
        let valid = mixed.iter().filter(|r| r.valid).count();
        let invalid = mixed.len() - valid;
        assert_eq!(valid, 6);
        assert_eq!(invalid, 6);
        assert_eq!(mix_train(&records, 1.0, 3), mixed);
    }
}
