//! Simulated annealing over structures, plus the multi-chain search driver.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dag::{propose_move, DagStructure};
use super::score::{ScoreBreakdown, Scorer};
use super::seed::sample_seed_dag;
use super::StructureError;

/// Lowest admissible starting temperature.
pub const TEMPERATURE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: usize,
    pub temperature: f64,
    /// Objective of the current graph after this step's accept/reject.
    pub total: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct AnnealOutcome {
    pub best: DagStructure,
    pub score: ScoreBreakdown,
    pub trace: Vec<TraceEntry>,
}

/// Calibrates the starting temperature so the median-magnitude probe move
/// would be accepted with probability 0.8: `T₀ = median|ΔJ| / ln(1/0.8)`,
/// floored at [`TEMPERATURE_FLOOR`]. Scale-free across environments.
pub fn initial_temperature<R: Rng>(
    seed_dag: &DagStructure,
    scorer: &Scorer,
    rng: &mut R,
) -> Result<f64, StructureError> {
    const PROBES: usize = 20;
    let base = scorer.score(seed_dag)?.total;
    let mut magnitudes = Vec::with_capacity(PROBES);
    for _ in 0..PROBES {
        let probe = propose_move(seed_dag, rng);
        magnitudes.push((scorer.score(&probe)?.total - base).abs());
    }
    magnitudes.sort_by(|a, b| a.partial_cmp(b).expect("finite deltas"));
    let median = (magnitudes[PROBES / 2 - 1] + magnitudes[PROBES / 2]) / 2.0;
    Ok((median / (1.0_f64 / 0.8).ln()).max(TEMPERATURE_FLOOR))
}

/// One annealing chain: geometric cooling, accept improving moves always and
/// worsening moves with probability `exp(ΔJ/T)`. Returns the best structure
/// visited. A scoring failure aborts the chain, keeping the partial trace in
/// the error.
pub fn anneal(
    seed_dag: &DagStructure,
    scorer: &Scorer,
    chain_seed: u64,
) -> Result<AnnealOutcome, StructureError> {
    let mut rng = ChaCha8Rng::seed_from_u64(chain_seed);
    let steps = scorer.cfg.steps_per_chain;
    let mut current = seed_dag.clone();
    let mut current_score = scorer.score(&current)?;
    let mut best = current.clone();
    let mut best_score = current_score;
    let mut trace = Vec::with_capacity(steps);

    if steps == 0 {
        return Ok(AnnealOutcome {
            best,
            score: best_score,
            trace,
        });
    }

    let mut temperature = initial_temperature(&current, scorer, &mut rng)?;
    for step in 0..steps {
        let candidate = propose_move(&current, &mut rng);
        let candidate_score = match scorer.score(&candidate) {
            Ok(s) => s,
            Err(e) => {
                return Err(StructureError::ChainAborted {
                    detail: e.to_string(),
                    trace,
                })
            }
        };
        let delta = candidate_score.total - current_score.total;
        let accepted = delta >= 0.0 || rng.gen::<f64>() < (delta / temperature).exp();
        if accepted {
            current = candidate;
            current_score = candidate_score;
            debug_assert!(current.is_acyclic());
            if current_score.total > best_score.total {
                best = current.clone();
                best_score = current_score;
            }
        }
        trace.push(TraceEntry {
            step,
            temperature,
            total: current_score.total,
            accepted,
        });
        temperature *= scorer.cfg.alpha;
    }

    Ok(AnnealOutcome {
        best,
        score: best_score,
        trace,
    })
}

#[derive(Debug)]
pub struct ChainReport {
    pub chain: usize,
    pub seed_dag: Option<DagStructure>,
    pub outcome: Result<AnnealOutcome, StructureError>,
}

#[derive(Debug)]
pub struct SearchOutcome {
    pub best: DagStructure,
    pub score: ScoreBreakdown,
    pub chains: Vec<ChainReport>,
}

/// Multi-chain search: sample one seed structure per chain, anneal each
/// independently (in parallel), return the best by objective. Chain `i` uses
/// seed `cfg.seed + i`, so results are reproducible regardless of thread
/// scheduling.
pub fn search(scorer: &Scorer) -> Result<SearchOutcome, StructureError> {
    let cfg = scorer.cfg;
    cfg.validate()?;
    let chains: Vec<ChainReport> = (0..cfg.chains)
        .into_par_iter()
        .map(|chain| {
            let chain_seed = cfg.seed.wrapping_add(chain as u64);
            match sample_seed_dag(scorer.schema, scorer.oracle, chain_seed) {
                Ok(seed_dag) => {
                    let outcome = anneal(&seed_dag, scorer, chain_seed);
                    ChainReport {
                        chain,
                        seed_dag: Some(seed_dag),
                        outcome,
                    }
                }
                Err(e) => ChainReport {
                    chain,
                    seed_dag: None,
                    outcome: Err(e),
                },
            }
        })
        .collect();

    let mut best: Option<(usize, &AnnealOutcome)> = None;
    for report in &chains {
        if let Ok(outcome) = &report.outcome {
            let better = match best {
                None => true,
                Some((_, held)) => outcome.score.total > held.score.total,
            };
            if better {
                best = Some((report.chain, outcome));
            }
        }
    }
    match best {
        Some((_, outcome)) => Ok(SearchOutcome {
            best: outcome.best.clone(),
            score: outcome.score,
            chains,
        }),
        None => Err(StructureError::AllChainsFailed(cfg.chains)),
    }
}
