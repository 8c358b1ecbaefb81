//! Reference coffee-shop environment: the ground truth the hybrid model is
//! learned against. One step is one business day.
//!
//! All constants here are the module's contract. The environment manual
//! describes the mechanics qualitatively; the stochastic coefficients are
//! deliberately absent from it so a learned model has to recover them from
//! data, while action costs and bounds (which the transition program must
//! reproduce exactly) are stated.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doc::DocValue;
use crate::schema::ObservationSchema;

pub const BASE_DEMAND: f64 = 15.0;
pub const UPGRADE_DEMAND: f64 = 8.0;
pub const WORD_OF_MOUTH: f64 = 4.0;
pub const DEMAND_NOISE: f64 = 1.5;
pub const WALK_IN: f64 = 12.0;
pub const SATISFACTION_NOISE: f64 = 0.35;
pub const FIXED_COST: f64 = 20.0;
pub const BEAN_UNIT_COST: f64 = 0.5;
pub const MILK_UNIT_COST: f64 = 0.4;
pub const CLEAN_COST: f64 = 10.0;
pub const CLEAN_BOOST: f64 = 60.0;
pub const LITTER_PER_CUP: f64 = 0.3;
pub const UPGRADE_COST_STEP: f64 = 500.0;
pub const MAX_UPGRADE: u32 = 3;
pub const PRICE_MIN: f64 = 0.5;
pub const PRICE_MAX: f64 = 10.0;
pub const START_MONEY: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoffeeState {
    pub day: u32,
    pub price: f64,
    pub upgrade_level: u32,
    pub money: f64,
    pub coffee_beans: u32,
    pub milk: u32,
    pub customers: u32,
    pub satisfaction: f64,
    pub cleanliness: f64,
}

impl CoffeeState {
    pub fn initial() -> CoffeeState {
        CoffeeState {
            day: 0,
            price: 2.0,
            upgrade_level: 0,
            money: START_MONEY,
            coffee_beans: 30,
            milk: 30,
            customers: 15,
            satisfaction: 3.0,
            cleanliness: 80.0,
        }
    }

    /// Deterministic-stream observation document.
    pub fn det_doc(&self) -> DocValue {
        DocValue::from_json_str(&format!(
            "{{\"day\": {}, \"price\": {}, \"upgrade_level\": {}}}",
            self.day, self.price, self.upgrade_level
        ))
        .expect("valid state doc")
    }

    /// Stochastic-stream observation document.
    pub fn sto_doc(&self) -> DocValue {
        DocValue::from_json_str(&format!(
            "{{\"money\": {}, \"coffee_beans\": {}, \"milk\": {}, \"customers\": {}, \
             \"satisfaction\": {}, \"cleanliness\": {}}}",
            self.money,
            self.coffee_beans,
            self.milk,
            self.customers,
            self.satisfaction,
            self.cleanliness
        ))
        .expect("valid state doc")
    }

    pub fn from_docs(det: &DocValue, sto: &DocValue) -> Result<CoffeeState, CoffeeError> {
        let num = |doc: &DocValue, key: &str| -> Result<f64, CoffeeError> {
            doc.key(key)
                .and_then(DocValue::as_num)
                .ok_or_else(|| CoffeeError::BadState(format!("missing numeric {key:?}")))
        };
        Ok(CoffeeState {
            day: num(det, "day")? as u32,
            price: num(det, "price")?,
            upgrade_level: num(det, "upgrade_level")? as u32,
            money: num(sto, "money")?,
            coffee_beans: num(sto, "coffee_beans")? as u32,
            milk: num(sto, "milk")? as u32,
            customers: num(sto, "customers")? as u32,
            satisfaction: num(sto, "satisfaction")?,
            cleanliness: num(sto, "cleanliness")?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CoffeeAction {
    SetPrice { price: f64 },
    BuyBeans { quantity: u32 },
    BuyMilk { quantity: u32 },
    Clean,
    Upgrade,
    Wait,
}

#[derive(Debug, Error, PartialEq)]
pub enum CoffeeError {
    #[error("malformed action: {0}")]
    BadAction(String),
    #[error("malformed state: {0}")]
    BadState(String),
}

impl CoffeeAction {
    pub fn type_name(&self) -> &'static str {
        match self {
            CoffeeAction::SetPrice { .. } => "set_price",
            CoffeeAction::BuyBeans { .. } => "buy_beans",
            CoffeeAction::BuyMilk { .. } => "buy_milk",
            CoffeeAction::Clean => "clean",
            CoffeeAction::Upgrade => "upgrade",
            CoffeeAction::Wait => "wait",
        }
    }

    /// Structural validity (well-formedness, not affordability).
    pub fn validate(&self) -> Result<(), CoffeeError> {
        match self {
            CoffeeAction::SetPrice { price } => {
                if !(PRICE_MIN..=PRICE_MAX).contains(price) {
                    return Err(CoffeeError::BadAction(format!(
                        "price {price} outside [{PRICE_MIN}, {PRICE_MAX}]"
                    )));
                }
            }
            CoffeeAction::BuyBeans { quantity: 0 } | CoffeeAction::BuyMilk { quantity: 0 } => {
                return Err(CoffeeError::BadAction("quantity must be positive".into()));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn to_doc(&self) -> DocValue {
        let json = serde_json::to_string(self).expect("action serializes");
        DocValue::from_json_str(&json).expect("action doc parses")
    }

    pub fn from_doc(doc: &DocValue) -> Result<CoffeeAction, CoffeeError> {
        let json = doc.to_json_string();
        let action: CoffeeAction =
            serde_json::from_str(&json).map_err(|e| CoffeeError::BadAction(e.to_string()))?;
        action.validate()?;
        Ok(action)
    }
}

/// Cost of `action` if it were accepted, and whether the state can afford
/// it. Rejected actions cost nothing.
fn action_cost_and_validity(state: &CoffeeState, action: &CoffeeAction) -> (f64, bool) {
    match action {
        CoffeeAction::BuyBeans { quantity } => {
            let cost = BEAN_UNIT_COST * f64::from(*quantity);
            (cost, state.money >= cost)
        }
        CoffeeAction::BuyMilk { quantity } => {
            let cost = MILK_UNIT_COST * f64::from(*quantity);
            (cost, state.money >= cost)
        }
        CoffeeAction::Upgrade => {
            let cost = UPGRADE_COST_STEP * f64::from(state.upgrade_level + 1);
            (cost, state.money >= cost && state.upgrade_level < MAX_UPGRADE)
        }
        CoffeeAction::Clean => (CLEAN_COST, true),
        CoffeeAction::SetPrice { .. } | CoffeeAction::Wait => (0.0, true),
    }
}

/// Deterministic core of one day, with the two noise draws passed in.
/// Exposed for exact-value tests; [`step`] samples the noise.
pub fn step_with_noise(
    state: &CoffeeState,
    action: &CoffeeAction,
    demand_noise: f64,
    satisfaction_noise: f64,
) -> (CoffeeState, bool) {
    let (spend, valid) = action_cost_and_validity(state, action);
    let spend = if valid { spend } else { 0.0 };

    // Accepted action effects: price changes and the upgrade apply before
    // the day unfolds; purchased stock arrives in the morning.
    let mut price = state.price;
    let mut upgrade = state.upgrade_level;
    let mut beans_avail = state.coffee_beans;
    let mut milk_avail = state.milk;
    if valid {
        match action {
            CoffeeAction::SetPrice { price: p } => price = *p,
            CoffeeAction::Upgrade => upgrade += 1,
            CoffeeAction::BuyBeans { quantity } => beans_avail += quantity,
            CoffeeAction::BuyMilk { quantity } => milk_avail += quantity,
            _ => {}
        }
    }

    // Same-day shop feel: today's price and build-out, yesterday's floor.
    let satisfaction = (0.7 * state.satisfaction
        + 0.3
            * (3.0 + 0.5 * f64::from(upgrade) - 0.6 * (price - 2.0)
                + 0.02 * (state.cleanliness - 50.0))
        + satisfaction_noise)
        .clamp(1.0, 5.0);

    // Word of mouth from yesterday's satisfaction, plus same-day walk-ins
    // reacting to today's mood shift.
    let potential = (BASE_DEMAND
        + UPGRADE_DEMAND * f64::from(upgrade)
        + WORD_OF_MOUTH * (state.satisfaction - 3.0)
        + demand_noise)
        .round();
    let walk_in = (WALK_IN * (satisfaction - state.satisfaction)).round();
    let demand = (potential + walk_in).max(0.0) as u32;
    let served = demand.min(beans_avail).min(milk_avail);

    let money = state.money + f64::from(served) * price - FIXED_COST - spend;
    let cleaned = valid && matches!(action, CoffeeAction::Clean);
    let cleanliness = (state.cleanliness - LITTER_PER_CUP * f64::from(served)
        + if cleaned { CLEAN_BOOST } else { 0.0 })
    .clamp(0.0, 100.0);

    let next = CoffeeState {
        day: state.day + 1,
        price,
        upgrade_level: upgrade,
        money,
        coffee_beans: beans_avail - served,
        milk: milk_avail - served,
        customers: served,
        satisfaction,
        cleanliness,
    };
    (next, valid)
}

/// One day of shop life. Returns the next state and whether the action was
/// accepted; a rejected action still lets the day unfold (there is no
/// absorbing state — debt is allowed).
pub fn step<R: Rng + ?Sized>(
    state: &CoffeeState,
    action: &CoffeeAction,
    rng: &mut R,
) -> (CoffeeState, bool) {
    let demand = Normal::new(0.0, DEMAND_NOISE).expect("valid normal");
    let mood = Normal::new(0.0, SATISFACTION_NOISE).expect("valid normal");
    let demand_noise = demand.sample(rng);
    let satisfaction_noise = mood.sample(rng);
    step_with_noise(state, action, demand_noise, satisfaction_noise)
}

/// Observation schema for this environment: which variables live in which
/// stream, their bounds, the declared action shapes, and the manual text
/// that knowledge-oracle prompts embed.
pub fn coffee_schema() -> ObservationSchema {
    let manual = include_str!("manual.txt");
    let spec = serde_json::json!({
        "variables": [
            {"name": "price", "type": "numerical", "lower": PRICE_MIN, "upper": PRICE_MAX,
             "stream": "deterministic",
             "description": "per-cup price currently charged"},
            {"name": "upgrade_level", "type": "numerical", "lower": 0.0, "upper": 3.0,
             "stream": "deterministic",
             "description": "how built-out the shop is (0-3)"},
            {"name": "money", "type": "numerical", "stream": "stochastic",
             "description": "cash on hand; may go negative"},
            {"name": "coffee_beans", "type": "numerical", "lower": 0.0,
             "stream": "stochastic", "description": "bean inventory in units"},
            {"name": "milk", "type": "numerical", "lower": 0.0,
             "stream": "stochastic", "description": "milk inventory in units"},
            {"name": "customers", "type": "numerical", "lower": 0.0,
             "stream": "stochastic", "description": "cups served during the day"},
            {"name": "satisfaction", "type": "numerical", "lower": 1.0, "upper": 5.0,
             "stream": "stochastic", "description": "customer mood on a 1-5 scale"},
            {"name": "cleanliness", "type": "numerical", "lower": 0.0, "upper": 100.0,
             "stream": "stochastic", "description": "shop tidiness from 0 to 100"}
        ],
        "actions": [
            {"name": "set_price", "fields": ["price"],
             "description": "change the per-cup price (0.5 to 10)"},
            {"name": "buy_beans", "fields": ["quantity"],
             "description": "restock beans at 0.5 money per unit"},
            {"name": "buy_milk", "fields": ["quantity"],
             "description": "restock milk at 0.4 money per unit"},
            {"name": "clean", "description": "deep-clean the shop for 10 money"},
            {"name": "upgrade",
             "description": "build out one level for 500 times the next level"},
            {"name": "wait", "description": "do nothing"}
        ],
        "environment_doc": manual,
    });
    ObservationSchema::from_json_str(&spec.to_string()).expect("coffee schema is valid")
}
