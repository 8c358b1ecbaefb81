//! Self-contained coffee-shop benchmark environment: ground-truth daily
//! dynamics with two noise channels, an observation schema splitting state
//! across the deterministic and stochastic streams, and seeded trajectory
//! generation for learning and evaluation.

mod dataset;
mod env;
mod fixtures;
mod hooks;

pub use dataset::{
    episode_split, flatten, generate_dataset, generate_validity_mix, heuristic_action,
    random_state, Policy,
};
pub use fixtures::{draft_program, oracle_fixture, reference_program};
pub use hooks::{money_objective, CoffeeEnv, CoffeeOracleModel, CoffeeProposer};
pub use env::{
    coffee_schema, step, step_with_noise, CoffeeAction, CoffeeError, CoffeeState, BASE_DEMAND,
    BEAN_UNIT_COST, CLEAN_BOOST, CLEAN_COST, DEMAND_NOISE, FIXED_COST, LITTER_PER_CUP,
    MAX_UPGRADE, MILK_UNIT_COST, PRICE_MAX, PRICE_MIN, SATISFACTION_NOISE, START_MONEY,
    UPGRADE_COST_STEP, UPGRADE_DEMAND, WALK_IN, WORD_OF_MOUTH,
};
