//! Transition programs: the deterministic half of the world model.
//!
//! A program is a set of script functions — per-action preconditions, at most
//! one action function per action, and exactly one dynamic function. Evaluating
//! a program against a prior state and an action predicts the next
//! deterministic observation and whether the action was valid. Mispredictions
//! are classified into a small error taxonomy that drives refinement.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::doc::{apply_patch, deep_diff, DiffEntry, DocValue};
use crate::script::{
    eval_patch_body, eval_precondition_body, parse_body, Fault, ParseError, StepBudget, Stmt,
};

/// Role a function plays within a transition program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FunctionKind {
    /// Validity check for one action; body returns `(bool, feedback)`.
    Precondition { action_name: String },
    /// State change applied when the named action is valid.
    Action { action_name: String },
    /// Unconditional per-step state change, applied after any action patch.
    Dynamic,
}

impl FunctionKind {
    pub fn action_name(&self) -> Option<&str> {
        match self {
            FunctionKind::Precondition { action_name } | FunctionKind::Action { action_name } => {
                Some(action_name)
            }
            FunctionKind::Dynamic => None,
        }
    }

    fn label(&self) -> &'static str {
        match self {
            FunctionKind::Precondition { .. } => "precondition",
            FunctionKind::Action { .. } => "action",
            FunctionKind::Dynamic => "dynamic",
        }
    }
}

/// Free-text metadata carried alongside a function body; surfaced to the
/// proposal provider when asking for repairs.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FunctionDescription {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub purpose: String,
    #[serde(default)]
    pub implementation_details: String,
}

/// One compiled function of a transition program. Construction parses the
/// body and enforces kind-specific shape: preconditions must contain a
/// `return` and no `emit`; patch-producing bodies must contain no `return`.
#[derive(Debug, Clone)]
pub struct FunctionDef {
    id: String,
    kind: FunctionKind,
    description: FunctionDescription,
    body: String,
    compiled: Vec<Stmt>,
}

impl PartialEq for FunctionDef {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.kind == other.kind
            && self.description == other.description
            && self.body == other.body
    }
}

impl FunctionDef {
    pub fn new(
        id: impl Into<String>,
        kind: FunctionKind,
        description: FunctionDescription,
        body: impl Into<String>,
    ) -> Result<Self, ProgramError> {
        let id = id.into();
        let body = body.into();
        let compiled = parse_body(&body).map_err(|source| ProgramError::Parse {
            id: id.clone(),
            source,
        })?;
        let has_return = stmts_contain(&compiled, &|s| matches!(s, Stmt::Return { .. }));
        let has_emit = stmts_contain(&compiled, &|s| matches!(s, Stmt::Emit { .. }));
        match kind {
            FunctionKind::Precondition { .. } => {
                if has_emit {
                    return Err(ProgramError::PreconditionEmits { id });
                }
                if !has_return {
                    return Err(ProgramError::PreconditionNeverReturns { id });
                }
            }
            FunctionKind::Action { .. } | FunctionKind::Dynamic => {
                if has_return {
                    return Err(ProgramError::PatchBodyReturns { id });
                }
            }
        }
        Ok(Self {
            id,
            kind,
            description,
            body,
            compiled,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> &FunctionKind {
        &self.kind
    }

    pub fn description(&self) -> &FunctionDescription {
        &self.description
    }

    pub fn body(&self) -> &str {
        &self.body
    }
}

fn stmts_contain(stmts: &[Stmt], pred: &dyn Fn(&Stmt) -> bool) -> bool {
    stmts.iter().any(|s| {
        pred(s)
            || match s {
                Stmt::If {
                    then_body,
                    else_body,
                    ..
                } => stmts_contain(then_body, pred) || stmts_contain(else_body, pred),
                _ => false,
            }
    })
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProgramError {
    #[error("function {id}: {source}")]
    Parse { id: String, source: ParseError },
    #[error("precondition {id} contains an emit statement")]
    PreconditionEmits { id: String },
    #[error("precondition {id} contains no return statement")]
    PreconditionNeverReturns { id: String },
    #[error("patch-producing function {id} contains a return statement")]
    PatchBodyReturns { id: String },
    #[error("duplicate function id {id}")]
    DuplicateId { id: String },
    #[error("action {action_name} has more than one action function")]
    DuplicateActionFunction { action_name: String },
    #[error("program has no dynamic function")]
    MissingDynamic,
    #[error("program has more than one dynamic function")]
    MultipleDynamic,
    #[error("function {id} names unknown action {action_name}")]
    UnknownAction { id: String, action_name: String },
    #[error("malformed program bundle: {0}")]
    Bundle(String),
}

/// The deterministic world model: an ordered set of functions evaluated
/// against `(prev_det, prev_sto, action)` to predict `(next_det, valid)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionProgram {
    functions: Vec<FunctionDef>,
}

impl TransitionProgram {
    /// Builds a program, enforcing unique ids, at most one action function
    /// per action, and exactly one dynamic function.
    pub fn from_functions(functions: Vec<FunctionDef>) -> Result<Self, ProgramError> {
        let mut ids = std::collections::BTreeSet::new();
        let mut action_fns = std::collections::BTreeSet::new();
        let mut dynamics = 0usize;
        for f in &functions {
            if !ids.insert(f.id.clone()) {
                return Err(ProgramError::DuplicateId { id: f.id.clone() });
            }
            match &f.kind {
                FunctionKind::Action { action_name } => {
                    if !action_fns.insert(action_name.clone()) {
                        return Err(ProgramError::DuplicateActionFunction {
                            action_name: action_name.clone(),
                        });
                    }
                }
                FunctionKind::Dynamic => dynamics += 1,
                FunctionKind::Precondition { .. } => {}
            }
        }
        match dynamics {
            0 => Err(ProgramError::MissingDynamic),
            1 => Ok(Self { functions }),
            _ => Err(ProgramError::MultipleDynamic),
        }
    }

    /// Checks that every precondition/action function names an action known
    /// to the given list (typically the schema's action specs).
    pub fn check_action_names(&self, known: &[String]) -> Result<(), ProgramError> {
        for f in &self.functions {
            if let Some(name) = f.kind.action_name() {
                if !known.iter().any(|k| k == name) {
                    return Err(ProgramError::UnknownAction {
                        id: f.id.clone(),
                        action_name: name.to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn functions(&self) -> &[FunctionDef] {
        &self.functions
    }

    pub fn function(&self, id: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| f.id == id)
    }

    pub fn dynamic(&self) -> &FunctionDef {
        self.functions
            .iter()
            .find(|f| f.kind == FunctionKind::Dynamic)
            .expect("construction guarantees a dynamic function")
    }

    pub fn preconditions_for<'a>(
        &'a self,
        action: &'a str,
    ) -> impl Iterator<Item = &'a FunctionDef> {
        self.functions.iter().filter(move |f| {
            matches!(&f.kind, FunctionKind::Precondition { action_name } if action_name == action)
        })
    }

    pub fn action_fn(&self, action: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(
            |f| matches!(&f.kind, FunctionKind::Action { action_name } if action_name == action),
        )
    }

    /// Predicts the next deterministic observation and the action's validity.
    ///
    /// Preconditions for the action run in declaration order; the first false
    /// verdict wins and supplies the feedback, and the action patch is then
    /// skipped. The dynamic function always runs, over the already-patched
    /// state. Patches may read stochastic variables but writes addressing
    /// them — or the document root — are rejected as faults.
    pub fn evaluate(
        &self,
        prev_det: &DocValue,
        prev_sto: &DocValue,
        action: &DocValue,
    ) -> Result<Prediction, EvalError> {
        let (DocValue::Map(det), DocValue::Map(sto)) = (prev_det, prev_sto) else {
            return Err(EvalError::NonMapState);
        };
        let mut merged = det.clone();
        for (k, v) in sto {
            merged.insert(k.clone(), v.clone());
        }
        let mut state = DocValue::Map(merged);

        let action_name = action.key("type").and_then(|v| v.as_text());
        let mut pred_valid = true;
        let mut feedback = String::new();
        if let Some(name) = action_name {
            for pre in self.preconditions_for(name) {
                let mut budget = StepBudget::default();
                let (ok, text) =
                    eval_precondition_body(&pre.compiled, &state, action, &mut budget)
                        .map_err(|fault| EvalError::fault(pre, fault))?;
                if !ok {
                    pred_valid = false;
                    feedback = text;
                    break;
                }
            }
            if pred_valid {
                if let Some(af) = self.action_fn(name) {
                    state = self.run_patch_fn(af, &state, action, sto)?;
                }
            }
        }
        let dynamic = self.dynamic();
        state = self.run_patch_fn(dynamic, &state, action, sto)?;

        let DocValue::Map(mut out) = state else {
            unreachable!("patches never replace the root")
        };
        out.retain(|k, _| !sto.contains_key(k));
        Ok(Prediction {
            pred_det: DocValue::Map(out),
            pred_valid,
            feedback,
        })
    }

    fn run_patch_fn(
        &self,
        f: &FunctionDef,
        state: &DocValue,
        action: &DocValue,
        sto: &BTreeMap<String, DocValue>,
    ) -> Result<DocValue, EvalError> {
        let mut budget = StepBudget::default();
        let ops = eval_patch_body(&f.compiled, state, action, &mut budget)
            .map_err(|fault| EvalError::fault(f, fault))?;
        for op in &ops {
            let path = op.path();
            if path.is_root() {
                return Err(EvalError::Fault {
                    function_id: f.id.clone(),
                    kind: EvalFaultKind::RootWrite,
                });
            }
            if let Some(first) = path.first() {
                if sto.contains_key(first) {
                    return Err(EvalError::Fault {
                        function_id: f.id.clone(),
                        kind: EvalFaultKind::StochasticWrite {
                            path: path.to_string(),
                        },
                    });
                }
            }
        }
        apply_patch(state, &ops).map_err(|e| EvalError::Fault {
            function_id: f.id.clone(),
            kind: EvalFaultKind::Patch(e.to_string()),
        })
    }

    pub fn to_bundle_json(&self) -> String {
        let wire = BundleWire {
            functions: self.functions.iter().map(FunctionWire::from).collect(),
        };
        serde_json::to_string_pretty(&wire).expect("bundle serialization cannot fail")
    }

    pub fn from_bundle_json(text: &str) -> Result<Self, ProgramError> {
        let wire: BundleWire =
            serde_json::from_str(text).map_err(|e| ProgramError::Bundle(e.to_string()))?;
        let functions = wire
            .functions
            .into_iter()
            .map(FunctionDef::try_from)
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_functions(functions)
    }
}

/// Output of a program evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub pred_det: DocValue,
    pub pred_valid: bool,
    /// Feedback from the first failing precondition; empty when valid.
    pub feedback: String,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalFaultKind {
    #[error("{0}")]
    Script(Fault),
    #[error("patch application failed: {0}")]
    Patch(String),
    #[error("patch addresses the document root")]
    RootWrite,
    #[error("patch writes stochastic path {path}")]
    StochasticWrite { path: String },
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("prev_det and prev_sto must be map documents")]
    NonMapState,
    #[error("function {function_id}: {kind}")]
    Fault {
        function_id: String,
        kind: EvalFaultKind,
    },
}

impl EvalError {
    fn fault(f: &FunctionDef, fault: Fault) -> Self {
        EvalError::Fault {
            function_id: f.id.clone(),
            kind: EvalFaultKind::Script(fault),
        }
    }
}

/// Misprediction categories, in classification precedence order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// Evaluation faulted (script fault, bad patch, forbidden write).
    EExec,
    /// Predicted invalid, but the recorded transition was valid.
    EPf,
    /// Predicted valid, but the recorded transition was invalid.
    EPs,
    /// Validity matched but the deterministic observation differed.
    EOd,
}

impl std::fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ErrorKind::EExec => "e_exec",
            ErrorKind::EPf => "e_pf",
            ErrorKind::EPs => "e_ps",
            ErrorKind::EOd => "e_od",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionError {
    pub kind: ErrorKind,
    pub detail: String,
    /// Differences from recorded truth to prediction; populated for `EOd`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diff: Vec<DiffEntry>,
}

/// Compares a prediction against the recorded transition. Returns `None` on
/// exact agreement; otherwise exactly one error, with faults taking
/// precedence over validity mismatches, which take precedence over
/// observation differences.
pub fn classify_error(
    outcome: &Result<Prediction, EvalError>,
    true_det: &DocValue,
    true_valid: bool,
) -> Option<PredictionError> {
    let pred = match outcome {
        Err(e) => {
            return Some(PredictionError {
                kind: ErrorKind::EExec,
                detail: e.to_string(),
                diff: Vec::new(),
            })
        }
        Ok(p) => p,
    };
    match (pred.pred_valid, true_valid) {
        (false, true) => {
            return Some(PredictionError {
                kind: ErrorKind::EPf,
                detail: format!(
                    "predicted invalid but the transition was valid; feedback: {}",
                    pred.feedback
                ),
                diff: Vec::new(),
            })
        }
        (true, false) => {
            return Some(PredictionError {
                kind: ErrorKind::EPs,
                detail: "predicted valid but the transition was invalid".to_string(),
                diff: Vec::new(),
            })
        }
        _ => {}
    }
    if pred.pred_det != *true_det {
        let diff = deep_diff(true_det, &pred.pred_det);
        return Some(PredictionError {
            kind: ErrorKind::EOd,
            detail: format!("{} observation difference(s)", diff.len()),
            diff,
        });
    }
    None
}

#[derive(Serialize, Deserialize)]
struct BundleWire {
    functions: Vec<FunctionWire>,
}

#[derive(Serialize, Deserialize)]
struct FunctionWire {
    id: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    action_name: Option<String>,
    #[serde(default)]
    description: FunctionDescription,
    body: String,
}

impl From<&FunctionDef> for FunctionWire {
    fn from(f: &FunctionDef) -> Self {
        FunctionWire {
            id: f.id.clone(),
            kind: f.kind.label().to_string(),
            action_name: f.kind.action_name().map(str::to_string),
            description: f.description.clone(),
            body: f.body.clone(),
        }
    }
}

impl TryFrom<FunctionWire> for FunctionDef {
    type Error = ProgramError;

    fn try_from(w: FunctionWire) -> Result<Self, ProgramError> {
        let need_action = |name: Option<String>, id: &str| {
            name.ok_or_else(|| {
                ProgramError::Bundle(format!("function {id} is missing action_name"))
            })
        };
        let kind = match w.kind.as_str() {
            "precondition" => FunctionKind::Precondition {
                action_name: need_action(w.action_name, &w.id)?,
            },
            "action" => FunctionKind::Action {
                action_name: need_action(w.action_name, &w.id)?,
            },
            "dynamic" => FunctionKind::Dynamic,
            other => {
                return Err(ProgramError::Bundle(format!(
                    "function {} has unknown kind {other:?}",
                    w.id
                )))
            }
        };
        FunctionDef::new(w.id, kind, w.description, w.body)
    }
}

impl Serialize for FunctionDef {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        FunctionWire::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FunctionDef {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = FunctionWire::deserialize(deserializer)?;
        FunctionDef::try_from(wire).map_err(serde::de::Error::custom)
    }
}
