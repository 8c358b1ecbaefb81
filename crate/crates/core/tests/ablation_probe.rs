//! Scratch measurement harness (run with --ignored --nocapture in release).

use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tandem_core::coffeeshop::{
    coffee_schema, episode_split, flatten, generate_dataset, money_objective, reference_program,
    CoffeeEnv, CoffeeOracleModel, CoffeeProposer, Policy,
};
use tandem_core::cpd::FitHyper;
use tandem_core::metrics::{planning_metrics, transition_metrics};
use tandem_core::model::HybridWorldModel;
use tandem_core::planner::{run_episode, PlanConfig, Planner};
use tandem_core::schema::{ObservationSchema, Stream};
use tandem_core::structure::DagStructure;

const EPISODES: u64 = 12;
const DAYS: usize = 50;

fn true_dag(schema: &ObservationSchema) -> DagStructure {
    let nodes = DagStructure::from_schema(schema).nodes().to_vec();
    let edges: BTreeSet<(String, String)> = [
        ("satisfaction", "customers"),
        ("customers", "money"),
        ("customers", "coffee_beans"),
        ("customers", "milk"),
        ("customers", "cleanliness"),
    ]
    .iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect();
    DagStructure::new(nodes, edges).unwrap()
}

fn random_dag(schema: &ObservationSchema, seed: u64) -> DagStructure {
    let nodes = DagStructure::from_schema(schema).nodes().to_vec();
    let mut names: Vec<String> = schema
        .stream_vars(Stream::Stochastic)
        .map(|v| v.name.clone())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    names.shuffle(&mut rng);
    let mut pairs: Vec<(String, String)> = Vec::new();
    for i in 0..names.len() {
        for j in (i + 1)..names.len() {
            pairs.push((names[i].clone(), names[j].clone()));
        }
    }
    pairs.shuffle(&mut rng);
    let edges: BTreeSet<(String, String)> = pairs.into_iter().take(5).collect();
    DagStructure::new(nodes, edges).unwrap()
}

fn plan_episode<M: tandem_core::model::WorldModel + Sync>(
    model: &M,
    episode: u64,
) -> tandem_core::planner::EpisodeLog {
    let mut env = CoffeeEnv::new(1000 + episode);
    let planner = Planner {
        model,
        proposer: &CoffeeProposer,
        objective: money_objective,
        cfg: PlanConfig {
            seed: 3000 + episode,
            ..PlanConfig::default()
        },
    };
    run_episode(&mut env, &planner, DAYS).unwrap()
}

#[test]
#[ignore]
fn ablation_probe() {
    let schema = coffee_schema();
    let data = generate_dataset(Policy::EpsilonRandom(0.25), 100, 50, 910);
    let (train_eps, test_eps) = episode_split(data, 0.9);
    let train = flatten(&train_eps);
    let test = flatten(&test_eps);
    eprintln!("train records: {}", train.len());

    let om = transition_metrics(&CoffeeOracleModel, &test, &schema, 99);
    eprintln!("oracle 1-step rmse {:.4}", om.stochastic_single.num_rmse);

    let t = Instant::now();
    let oracle_eps: Vec<_> = (0..EPISODES).map(|i| plan_episode(&CoffeeOracleModel, i)).collect();
    let report = planning_metrics(&oracle_eps);
    eprintln!(
        "oracle plan: mean {:.1} ± {:.1} survival@50 {:?} in {:?}",
        report.mean_final_money,
        report.ci_half_width,
        report.survival.get(&50),
        t.elapsed()
    );

    let hyper = FitHyper {
        epochs: 1600,
        learning_rate: 1e-2,
        seed: 17,
        ..FitHyper::default()
    };

    for (name, dag) in [
        ("full", true_dag(&schema)),
        ("independent", DagStructure::from_schema(&schema)),
    ] {
        let t1 = Instant::now();
        let model =
            HybridWorldModel::fit(reference_program(), dag, schema.clone(), &train, &hyper)
                .unwrap();
        let m = transition_metrics(&model, &test, &schema, 99);
        eprintln!("{name} per-variable: {:?}", m.stochastic_single.per_variable);
        let episodes: Vec<_> = (0..EPISODES).map(|i| plan_episode(&model, i)).collect();
        let report = planning_metrics(&episodes);
        eprintln!(
            "{name}: rmse {:.4} mean {:.1} ± {:.1} survival@50 {:?} in {:?}",
            m.stochastic_single.num_rmse,
            report.mean_final_money,
            report.ci_half_width,
            report.survival.get(&50),
            t1.elapsed()
        );
        eprintln!(
            "  finals: {:?}",
            episodes.iter().map(|e| e.final_money()).collect::<Vec<_>>()
        );
    }

    // Random-structure arm: a fresh seeded DAG per episode.
    let t2 = Instant::now();
    let mut episodes = Vec::new();
    let mut rmses = Vec::new();
    for i in 0..EPISODES {
        let dag = random_dag(&schema, 7000 + i);
        let model =
            HybridWorldModel::fit(reference_program(), dag, schema.clone(), &train, &hyper)
                .unwrap();
        rmses.push(
            transition_metrics(&model, &test, &schema, 99)
                .stochastic_single
                .num_rmse,
        );
        episodes.push(plan_episode(&model, i));
    }
    let report = planning_metrics(&episodes);
    eprintln!(
        "random(per-episode): rmse {:?} mean {:.1} ± {:.1} survival@50 {:?} in {:?}",
        rmses.iter().map(|r| (r * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
        report.mean_final_money,
        report.ci_half_width,
        report.survival.get(&50),
        t2.elapsed()
    );
    eprintln!(
        "  finals: {:?}",
        episodes.iter().map(|e| e.final_money()).collect::<Vec<_>>()
    );
}
