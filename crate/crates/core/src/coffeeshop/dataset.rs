//! Trajectory generation against the reference environment: a shop-keeping
//! heuristic, an exploring wrapper around it, and seeded episode rollouts
//! flattened into transition records.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::schema::TransitionRecord;

use super::env::{step, CoffeeAction, CoffeeState};

/// Mixing constant for per-episode stream splitting (golden-ratio based).
const EPISODE_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

const PRICE_MENU: [f64; 6] = [1.0, 1.5, 2.0, 2.5, 3.0, 4.0];
const QUANTITY_MENU: [u32; 3] = [10, 20, 40];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    /// Restock when low, clean when dirty, otherwise wait.
    Heuristic,
    /// The heuristic, but with this probability each day pick a uniformly
    /// random action from a small menu instead. Keeps coverage of prices,
    /// purchases, upgrades, and rejections in the data.
    EpsilonRandom(f64),
}

/// The shop-keeping baseline: keeps the shop stocked and tidy.
pub fn heuristic_action(state: &CoffeeState) -> CoffeeAction {
    if state.coffee_beans < 10 {
        CoffeeAction::BuyBeans { quantity: 40 }
    } else if state.milk < 10 {
        CoffeeAction::BuyMilk { quantity: 40 }
    } else if state.cleanliness < 40.0 {
        CoffeeAction::Clean
    } else {
        CoffeeAction::Wait
    }
}

pub(crate) fn random_action<R: Rng + ?Sized>(rng: &mut R) -> CoffeeAction {
    match rng.gen_range(0..6) {
        0 => CoffeeAction::SetPrice {
            price: *PRICE_MENU.choose(rng).expect("menu is non-empty"),
        },
        1 => CoffeeAction::BuyBeans {
            quantity: *QUANTITY_MENU.choose(rng).expect("menu is non-empty"),
        },
        2 => CoffeeAction::BuyMilk {
            quantity: *QUANTITY_MENU.choose(rng).expect("menu is non-empty"),
        },
        3 => CoffeeAction::Clean,
        4 => CoffeeAction::Upgrade,
        _ => CoffeeAction::Wait,
    }
}

fn pick_action<R: Rng>(policy: Policy, state: &CoffeeState, rng: &mut R) -> CoffeeAction {
    match policy {
        Policy::Heuristic => heuristic_action(state),
        Policy::EpsilonRandom(eps) => {
            if rng.gen::<f64>() < eps {
                random_action(rng)
            } else {
                heuristic_action(state)
            }
        }
    }
}

/// Roll `episodes` independent trajectories of `horizon` days from the
/// initial state. Each episode gets its own stream derived from `seed`, so
/// regenerating any single episode is reproducible in isolation.
pub fn generate_dataset(
    policy: Policy,
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Vec<Vec<TransitionRecord>> {
    (0..episodes)
        .map(|episode| {
            let episode_seed = seed ^ (episode as u64).wrapping_mul(EPISODE_STRIDE);
            let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
            let mut state = CoffeeState::initial();
            let mut records = Vec::with_capacity(horizon);
            for _ in 0..horizon {
                let action = pick_action(policy, &state, &mut rng);
                let (next, valid) = step(&state, &action, &mut rng);
                records.push(TransitionRecord {
                    prev_det: state.det_doc(),
                    prev_sto: state.sto_doc(),
                    action: action.to_doc(),
                    valid,
                    next_det: next.det_doc(),
                    next_sto: next.sto_doc(),
                });
                state = next;
            }
            records
        })
        .collect()
}

/// Draw a shop state from wide marginals: every inventory/balance regime the
/// environment can reach, including broke shops and fully upgraded ones.
/// Used to probe validity rules away from the narrow band that on-policy
/// trajectories visit.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R) -> CoffeeState {
    CoffeeState {
        day: rng.gen_range(0..60),
        price: *PRICE_MENU.choose(rng).expect("menu is non-empty"),
        upgrade_level: rng.gen_range(0..=3),
        // Log-ish spread: half the states hover near the affordability
        // boundaries of purchases, the rest reach upgrade territory.
        money: if rng.gen::<bool>() {
            rng.gen_range(0.0..40.0)
        } else {
            rng.gen_range(40.0..2600.0)
        },
        coffee_beans: rng.gen_range(0..120),
        milk: rng.gen_range(0..120),
        customers: rng.gen_range(0..40),
        satisfaction: rng.gen_range(1.0..5.0),
        cleanliness: rng.gen_range(0.0..100.0),
    }
}

/// Build `n` single-step transitions with an exact 1:1 accepted/rejected
/// mix, alternating the target verdict and rejection-sampling (state,
/// action) pairs until the environment agrees. States come from
/// [`random_state`], so the mix exercises every rule boundary.
pub fn generate_validity_mix(n: usize, seed: u64) -> Vec<TransitionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let want_valid = i % 2 == 0;
            loop {
                let state = random_state(&mut rng);
                let action = random_action(&mut rng);
                let (next, valid) = step(&state, &action, &mut rng);
                if valid == want_valid {
                    return TransitionRecord {
                        prev_det: state.det_doc(),
                        prev_sto: state.sto_doc(),
                        action: action.to_doc(),
                        valid,
                        next_det: next.det_doc(),
                        next_sto: next.sto_doc(),
                    };
                }
            }
        })
        .collect()
}

/// Split episodes into train and held-out sets by index: the first
/// `ceil(train_fraction * n)` episodes train, the rest are held out. Entire
/// episodes stay on one side so evaluation never sees a step whose
/// neighbours were trained on.
pub fn episode_split(
    episodes: Vec<Vec<TransitionRecord>>,
    train_fraction: f64,
) -> (Vec<Vec<TransitionRecord>>, Vec<Vec<TransitionRecord>>) {
    assert!(
        (0.0..=1.0).contains(&train_fraction),
        "train_fraction must lie in [0, 1]"
    );
    let n = episodes.len();
    let cut = ((train_fraction * n as f64).ceil() as usize).min(n);
    let mut episodes = episodes;
    let held_out = episodes.split_off(cut);
    (episodes, held_out)
}

/// Flatten episodes into one record list (fit and scoring inputs).
pub fn flatten(episodes: &[Vec<TransitionRecord>]) -> Vec<TransitionRecord> {
    episodes.iter().flatten().cloned().collect()
}
