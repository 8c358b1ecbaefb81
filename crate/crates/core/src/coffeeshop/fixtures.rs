//! Hand-authored transition programs for the coffee shop plus a scripted
//! knowledge-oracle fixture that can repair the flawed draft. These back the
//! command-line quickstart, the repair and structure-search demos, and the
//! evaluation harness.
//!
//! The deterministic stream is small — `day`, `price`, `upgrade_level` — so
//! the reference program is short: purchase/upgrade affordability rules and
//! the upgrade cap as preconditions, price/upgrade writes as action patches,
//! and the day counter as the dynamic step. Inventory, money, and the rest
//! live in the stochastic stream and are out of the program's reach.

use std::collections::BTreeMap;

use crate::oracle::ScriptedFixture;
use crate::program::{FunctionDef, FunctionDescription, FunctionKind, TransitionProgram};
use crate::refine::Refinement;

fn describe(name: &str, purpose: &str) -> FunctionDescription {
    FunctionDescription {
        name: name.to_string(),
        purpose: purpose.to_string(),
        implementation_details: String::new(),
    }
}

fn precondition(id: &str, action: &str, purpose: &str, body: &str) -> FunctionDef {
    FunctionDef::new(
        id,
        FunctionKind::Precondition {
            action_name: action.to_string(),
        },
        describe(id, purpose),
        body,
    )
    .expect("fixture precondition parses")
}

fn action_patch(id: &str, action: &str, purpose: &str, body: &str) -> FunctionDef {
    FunctionDef::new(
        id,
        FunctionKind::Action {
            action_name: action.to_string(),
        },
        describe(id, purpose),
        body,
    )
    .expect("fixture action patch parses")
}

fn dynamic_patch(id: &str, purpose: &str, body: &str) -> FunctionDef {
    FunctionDef::new(id, FunctionKind::Dynamic, describe(id, purpose), body)
        .expect("fixture dynamic patch parses")
}

fn pre_buy_beans() -> FunctionDef {
    precondition(
        "pre_buy_beans_affordable",
        "buy_beans",
        "Bean bags cost 0.5 each and are paid up front.",
        r#"return (get "/money" >= aget "/quantity" * 0.5, "not enough money for that bean order");"#,
    )
}

fn pre_buy_milk() -> FunctionDef {
    precondition(
        "pre_buy_milk_affordable",
        "buy_milk",
        "Milk units cost 0.4 each and are paid up front.",
        r#"return (get "/money" >= aget "/quantity" * 0.4, "not enough money for that milk order");"#,
    )
}

fn pre_upgrade_affordable() -> FunctionDef {
    precondition(
        "pre_upgrade_affordable",
        "upgrade",
        "The next upgrade tier costs 500 times the tier number.",
        r#"return (get "/money" >= (get "/upgrade_level" + 1) * 500, "not enough money for the next upgrade");"#,
    )
}

fn pre_upgrade_cap() -> FunctionDef {
    precondition(
        "pre_upgrade_level_cap",
        "upgrade",
        "There are only three upgrade tiers.",
        r#"return (get "/upgrade_level" < 3, "the shop is already fully upgraded");"#,
    )
}

fn act_set_price() -> FunctionDef {
    action_patch(
        "act_set_price",
        "set_price",
        "An accepted price change takes effect the same day.",
        r#"emit replace "/price" (aget "/price");"#,
    )
}

fn act_upgrade() -> FunctionDef {
    action_patch(
        "act_upgrade",
        "upgrade",
        "An accepted upgrade raises the tier by one.",
        r#"emit replace "/upgrade_level" (get "/upgrade_level" + 1);"#,
    )
}

fn dyn_advance_day() -> FunctionDef {
    dynamic_patch(
        "dyn_advance_day",
        "The calendar advances every step, accepted action or not.",
        r#"emit replace "/day" (get "/day" + 1);"#,
    )
}

/// The correct hand-written program: reproduces the reference environment's
/// deterministic frame and accept/reject verdicts exactly.
pub fn reference_program() -> TransitionProgram {
    TransitionProgram::from_functions(vec![
        pre_buy_beans(),
        pre_buy_milk(),
        pre_upgrade_affordable(),
        pre_upgrade_cap(),
        act_set_price(),
        act_upgrade(),
        dyn_advance_day(),
    ])
    .expect("reference program is well-formed")
}

/// A plausible first draft with four planted mistakes:
///
/// * bean affordability uses a tenfold-overestimated unit cost (rejects
///   orders the shop can afford);
/// * the milk affordability rule is missing entirely (accepts everything);
/// * upgrade affordability charges a flat 500 instead of scaling with the
///   tier, and the three-tier cap is missing (accepts upgrades it shouldn't);
/// * the price write tacks on a phantom +1 surcharge, so accepted price
///   changes land in the predicted observation at the wrong value.
///
/// Every mistake is visibly wrong on data. A *missing* write would not be:
/// the difference-reduction score credits numeric predictions that tie the
/// prior, so a prediction that leaves a field stale scores no worse than one
/// that updates it, and the strictly-positive validation gate could never
/// accept the fix.
pub fn draft_program() -> TransitionProgram {
    let flawed_beans = precondition(
        "pre_buy_beans_affordable",
        "buy_beans",
        "Bean bags are paid up front.",
        r#"return (get "/money" >= aget "/quantity" * 5, "not enough money for that bean order");"#,
    );
    let flawed_upgrade = precondition(
        "pre_upgrade_affordable",
        "upgrade",
        "Upgrades are paid up front.",
        r#"return (get "/money" >= 500, "not enough money for the next upgrade");"#,
    );
    let flawed_set_price = action_patch(
        "act_set_price",
        "set_price",
        "Price changes land with a service surcharge.",
        r#"emit replace "/price" (aget "/price" + 1);"#,
    );
    TransitionProgram::from_functions(vec![
        flawed_beans,
        flawed_upgrade,
        flawed_set_price,
        act_upgrade(),
        dyn_advance_day(),
    ])
    .expect("draft program is well-formed")
}

/// Frozen oracle answers for the coffee shop: a dependency-respecting
/// variable order, each variable's direct causes, per-edge plausibilities,
/// and repair proposals (keyed by error kind and action) that include the
/// genuine fix for every planted draft mistake alongside decoys the
/// validation gate must reject.
///
/// Plausibility values are log-probabilities of "yes, a direct cause". The
/// endorsed causal edges sit near zero so that, at the default structure
/// weights, an endorsed edge costs less than the data-fit gain of a real
/// dependency; the neutral default is costly enough to suppress noise edges,
/// and implausible reversals are priced out entirely.
pub fn oracle_fixture() -> ScriptedFixture {
    let topo_order = vec![
        "satisfaction".to_string(),
        "customers".to_string(),
        "coffee_beans".to_string(),
        "milk".to_string(),
        "money".to_string(),
        "cleanliness".to_string(),
    ];

    let mut parents: BTreeMap<String, Vec<String>> = BTreeMap::new();
    parents.insert("satisfaction".to_string(), vec![]);
    parents.insert("customers".to_string(), vec!["satisfaction".to_string()]);
    parents.insert("coffee_beans".to_string(), vec!["customers".to_string()]);
    parents.insert("milk".to_string(), vec!["customers".to_string()]);
    parents.insert("money".to_string(), vec!["customers".to_string()]);
    parents.insert("cleanliness".to_string(), vec!["customers".to_string()]);

    let mut edge_plausibility: BTreeMap<String, f64> = BTreeMap::new();
    // Same-day flow: the day's mood drives turnout, turnout drives what the
    // till, the pantry, and the floor look like at closing time.
    for edge in [
        "satisfaction->customers",
        "customers->coffee_beans",
        "customers->milk",
        "customers->money",
        "customers->cleanliness",
    ] {
        edge_plausibility.insert(edge.to_string(), -0.001);
    }
    // Reversals of the above are implausible as direct causes.
    for edge in [
        "customers->satisfaction",
        "coffee_beans->customers",
        "milk->customers",
        "money->customers",
        "cleanliness->customers",
        "money->satisfaction",
        "cleanliness->satisfaction",
        "coffee_beans->satisfaction",
        "milk->satisfaction",
    ] {
        edge_plausibility.insert(edge.to_string(), -2.5);
    }

    let mut refinements: BTreeMap<String, Vec<Refinement>> = BTreeMap::new();
    refinements.insert(
        "e_pf|buy_beans".to_string(),
        vec![
            Refinement::Replace {
                target_id: "pre_buy_beans_affordable".to_string(),
                new_function: pre_buy_beans(),
            },
            Refinement::Replace {
                target_id: "pre_buy_beans_affordable".to_string(),
                new_function: precondition(
                    "pre_buy_beans_affordable",
                    "buy_beans",
                    "Bean bags are paid up front.",
                    r#"return (get "/money" >= aget "/quantity" * 0.05, "not enough money for that bean order");"#,
                ),
            },
            Refinement::Remove {
                target_id: "pre_buy_beans_affordable".to_string(),
            },
        ],
    );
    refinements.insert(
        "e_ps|buy_milk".to_string(),
        vec![
            Refinement::Add {
                new_function: pre_buy_milk(),
            },
            Refinement::Add {
                new_function: precondition(
                    "pre_buy_milk_affordable",
                    "buy_milk",
                    "Milk is off the menu.",
                    r#"return (1 < 0, "milk is off the menu");"#,
                ),
            },
            Refinement::Add {
                new_function: precondition(
                    "pre_buy_milk_affordable",
                    "buy_milk",
                    "Milk units are paid up front.",
                    r#"return (get "/money" >= aget "/quantity" * 4, "not enough money for that milk order");"#,
                ),
            },
        ],
    );
    refinements.insert(
        "e_ps|upgrade".to_string(),
        vec![
            Refinement::Replace {
                target_id: "pre_upgrade_affordable".to_string(),
                new_function: pre_upgrade_affordable(),
            },
            Refinement::Add {
                new_function: pre_upgrade_cap(),
            },
            Refinement::Replace {
                target_id: "pre_upgrade_affordable".to_string(),
                new_function: precondition(
                    "pre_upgrade_affordable",
                    "upgrade",
                    "Upgrades are paid up front.",
                    r#"return (get "/money" >= 2000, "not enough money for the next upgrade");"#,
                ),
            },
        ],
    );
    refinements.insert(
        "e_od|set_price".to_string(),
        vec![
            Refinement::Replace {
                target_id: "act_set_price".to_string(),
                new_function: act_set_price(),
            },
            Refinement::Replace {
                target_id: "act_set_price".to_string(),
                new_function: action_patch(
                    "act_set_price",
                    "set_price",
                    "Price changes land with a smaller surcharge.",
                    r#"emit replace "/price" (aget "/price" + 0.5);"#,
                ),
            },
            Refinement::Replace {
                target_id: "act_set_price".to_string(),
                new_function: action_patch(
                    "act_set_price",
                    "set_price",
                    "Price changes scare off customers.",
                    r#"emit replace "/customers" (0);"#,
                ),
            },
        ],
    );
    // Catch-all for error kinds the draft should not produce: a do-nothing
    // rewrite that cannot pass the validation gate.
    refinements.insert(
        "*".to_string(),
        vec![Refinement::Replace {
            target_id: "dyn_advance_day".to_string(),
            new_function: dyn_advance_day(),
        }],
    );

    ScriptedFixture {
        topo_order,
        parents,
        edge_plausibility,
        edge_default: -0.08,
        init_functions: draft_program().functions().to_vec(),
        refinements,
    }
}
