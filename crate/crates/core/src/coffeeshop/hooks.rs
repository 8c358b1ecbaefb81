//! Planner hooks for the coffee shop: a menu-based action proposer, the
//! ground-truth simulator behind the world-model interface (the planning
//! ablation's perfect model), and a live environment wrapper.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::doc::DocValue;
use crate::model::{ModelFault, ModelStep, WorldModel};
use crate::planner::{ActionProposer, Environment, ROLLOUT_PENALTY};

use super::dataset::random_action;
use super::env::{step, step_with_noise, CoffeeAction, CoffeeState};

/// Objective the coffee planner maximizes: end-of-horizon cash.
pub fn money_objective(_det: &DocValue, sto: &DocValue) -> f64 {
    sto.key("money")
        .and_then(DocValue::as_num)
        .unwrap_or(ROLLOUT_PENALTY)
}

/// Draws candidate actions from small menus (prices, restock quantities,
/// clean, upgrade, wait) and admits at most one price change per proposal
/// set.
pub struct CoffeeProposer;

impl ActionProposer for CoffeeProposer {
    fn baseline(&self) -> DocValue {
        CoffeeAction::Wait.to_doc()
    }

    fn draw(&self, _det: &DocValue, _sto: &DocValue, rng: &mut dyn RngCore) -> DocValue {
        random_action(rng).to_doc()
    }

    fn admit(&self, chosen: &[DocValue], candidate: &DocValue) -> bool {
        let is_price =
            |a: &DocValue| a.key("type").and_then(DocValue::as_text) == Some("set_price");
        !(is_price(candidate) && chosen.iter().any(is_price))
    }
}

/// The ground-truth simulator exposed as a world model. Planning with it
/// isolates the search from model error.
pub struct CoffeeOracleModel;

impl WorldModel for CoffeeOracleModel {
    fn step(
        &self,
        prev_det: &DocValue,
        prev_sto: &DocValue,
        action: &DocValue,
        rng: &mut dyn RngCore,
    ) -> Result<ModelStep, ModelFault> {
        let state = CoffeeState::from_docs(prev_det, prev_sto)
            .map_err(|e| ModelFault(e.to_string()))?;
        let action = CoffeeAction::from_doc(action).map_err(|e| ModelFault(e.to_string()))?;
        let (next, valid) = step(&state, &action, rng);
        Ok(ModelStep {
            next_det: next.det_doc(),
            next_sto: next.sto_doc(),
            valid,
        })
    }

    fn action_valid(&self, prev_det: &DocValue, prev_sto: &DocValue, action: &DocValue) -> bool {
        let Ok(state) = CoffeeState::from_docs(prev_det, prev_sto) else {
            return false;
        };
        let Ok(action) = CoffeeAction::from_doc(action) else {
            return false;
        };
        // Acceptance is noise-independent, so the zero-noise branch decides.
        step_with_noise(&state, &action, 0.0, 0.0).1
    }
}

/// A live shop the agent acts in: owns the true state and its noise stream.
pub struct CoffeeEnv {
    state: CoffeeState,
    rng: ChaCha8Rng,
}

impl CoffeeEnv {
    pub fn new(seed: u64) -> CoffeeEnv {
        CoffeeEnv {
            state: CoffeeState::initial(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn state(&self) -> &CoffeeState {
        &self.state
    }
}

impl Environment for CoffeeEnv {
    fn observe(&self) -> (DocValue, DocValue) {
        (self.state.det_doc(), self.state.sto_doc())
    }

    fn apply(&mut self, action: &DocValue) -> Result<bool, String> {
        let action = CoffeeAction::from_doc(action).map_err(|e| e.to_string())?;
        let (next, valid) = step(&self.state, &action, &mut self.rng);
        self.state = next;
        Ok(valid)
    }
}
