//! The hybrid world model: one interface over "predict the next observation
//! given the current one and an action", used by the planner for rollouts.
//!
//! The learned implementation pairs the deterministic transition program
//! (next deterministic stream + action validity) with the fitted network
//! conditionals sampled ancestrally along the learned structure. A
//! ground-truth environment can also stand behind the same interface, which
//! is how planning is ablated against a perfect model.

use std::collections::BTreeMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cpd::{fit_node, sample_joint, CpdError, FeatureEncoding, FitHyper, NodeModel};
use crate::doc::DocValue;
use crate::program::{ProgramError, TransitionProgram};
use crate::schema::{ObservationSchema, SchemaError, TransitionRecord};
use crate::structure::DagStructure;

/// One predicted transition.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelStep {
    pub next_det: DocValue,
    pub next_sto: DocValue,
    /// Whether the model believes the action was accepted.
    pub valid: bool,
}

/// A model prediction failed; rollouts treat this as a hard penalty.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("world model fault: {0}")]
pub struct ModelFault(pub String);

/// Anything the planner can roll forward: a learned model or a ground-truth
/// simulator behind the same interface.
pub trait WorldModel {
    /// Sample one transition. Failures are faults, not panics.
    fn step(
        &self,
        prev_det: &DocValue,
        prev_sto: &DocValue,
        action: &DocValue,
        rng: &mut dyn RngCore,
    ) -> Result<ModelStep, ModelFault>;

    /// Whether the model predicts `action` would be accepted in this state.
    /// Used to filter proposals before they enter the search tree; a faulting
    /// prediction counts as invalid.
    fn action_valid(&self, prev_det: &DocValue, prev_sto: &DocValue, action: &DocValue) -> bool;
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Cpd(#[from] CpdError),
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("model bundle: {0}")]
    Bundle(String),
    #[error("structure is cyclic over stochastic nodes")]
    CyclicStructure,
}

/// Learned dynamics: transition program for the deterministic stream and
/// validity, fitted conditionals over the learned structure for the
/// stochastic stream.
pub struct HybridWorldModel {
    program: TransitionProgram,
    dag: DagStructure,
    models: BTreeMap<String, NodeModel>,
    encoding: FeatureEncoding,
    schema: ObservationSchema,
    /// Ancestral sampling order over stochastic nodes (cached from the dag).
    order: Vec<String>,
    parents: BTreeMap<String, Vec<String>>,
}

impl HybridWorldModel {
    pub fn new(
        program: TransitionProgram,
        dag: DagStructure,
        models: BTreeMap<String, NodeModel>,
        encoding: FeatureEncoding,
        schema: ObservationSchema,
    ) -> Result<HybridWorldModel, ModelError> {
        let order = dag.topo_order_vx().ok_or(ModelError::CyclicStructure)?;
        let parents = dag.vx_parent_map();
        Ok(HybridWorldModel {
            program,
            dag,
            models,
            encoding,
            schema,
            order,
            parents,
        })
    }

    /// Fit every stochastic node's conditional on `records` under the given
    /// structure, then assemble the model around `program`.
    pub fn fit(
        program: TransitionProgram,
        dag: DagStructure,
        schema: ObservationSchema,
        records: &[TransitionRecord],
        hyper: &FitHyper,
    ) -> Result<HybridWorldModel, ModelError> {
        let encoding = FeatureEncoding::build(&schema, records);
        let mut models = BTreeMap::new();
        for node in dag.vx_nodes() {
            let parents = dag.vx_parents(&node);
            let model = fit_node(&node, &parents, records, &encoding, hyper)?;
            models.insert(node, model);
        }
        Self::new(program, dag, models, encoding, schema)
    }

    pub fn program(&self) -> &TransitionProgram {
        &self.program
    }

    pub fn dag(&self) -> &DagStructure {
        &self.dag
    }

    pub fn schema(&self) -> &ObservationSchema {
        &self.schema
    }

    pub fn encoding(&self) -> &FeatureEncoding {
        &self.encoding
    }

    pub fn node_models(&self) -> &BTreeMap<String, NodeModel> {
        &self.models
    }

    /// Sample only the stochastic stream given an already-predicted
    /// deterministic frame (the evaluation harness scores streams apart).
    pub fn sample_stochastic(
        &self,
        prev_sto: &DocValue,
        action: &DocValue,
        next_det: &DocValue,
        prev_det: &DocValue,
        rng: &mut dyn RngCore,
    ) -> Result<DocValue, CpdError> {
        sample_joint(
            &self.order,
            &self.parents,
            &self.models,
            &self.encoding,
            &self.schema,
            prev_sto,
            action,
            next_det,
            prev_det,
            rng,
        )
    }

    pub fn to_bundle_json(&self) -> String {
        let wire = BundleWire {
            program: serde_json::from_str(&self.program.to_bundle_json())
                .expect("program bundle is valid JSON"),
            structure: serde_json::from_str(&self.dag.to_json_pretty())
                .expect("structure is valid JSON"),
            models: self.models.clone(),
            encoding: self.encoding.clone(),
            schema: self.schema.clone(),
        };
        serde_json::to_string_pretty(&wire).expect("bundle serializes")
    }

    pub fn from_bundle_json(text: &str) -> Result<HybridWorldModel, ModelError> {
        let wire: BundleWire =
            serde_json::from_str(text).map_err(|e| ModelError::Bundle(e.to_string()))?;
        let program = TransitionProgram::from_bundle_json(&wire.program.to_string())?;
        let dag = DagStructure::from_json_str(&wire.structure.to_string())
            .map_err(|e| ModelError::Bundle(e.to_string()))?;
        Self::new(program, dag, wire.models, wire.encoding, wire.schema)
    }
}

#[derive(Serialize, Deserialize)]
struct BundleWire {
    program: serde_json::Value,
    structure: serde_json::Value,
    models: BTreeMap<String, NodeModel>,
    encoding: FeatureEncoding,
    schema: ObservationSchema,
}

impl WorldModel for HybridWorldModel {
    fn step(
        &self,
        prev_det: &DocValue,
        prev_sto: &DocValue,
        action: &DocValue,
        rng: &mut dyn RngCore,
    ) -> Result<ModelStep, ModelFault> {
        let pred = self
            .program
            .evaluate(prev_det, prev_sto, action)
            .map_err(|e| ModelFault(e.to_string()))?;
        let next_sto = self
            .sample_stochastic(prev_sto, action, &pred.pred_det, prev_det, rng)
            .map_err(|e| ModelFault(e.to_string()))?;
        Ok(ModelStep {
            next_det: pred.pred_det,
            next_sto,
            valid: pred.pred_valid,
        })
    }

    fn action_valid(&self, prev_det: &DocValue, prev_sto: &DocValue, action: &DocValue) -> bool {
        self.program
            .evaluate(prev_det, prev_sto, action)
            .map(|p| p.pred_valid)
            .unwrap_or(false)
    }
}
