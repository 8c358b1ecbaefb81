//! Transition-prediction and planning metrics.
//!
//! Transition metrics score a world model per variable against held-out
//! records: exact-match accuracy for categorical variables, min-max-scaled
//! RMSE for numeric ones (ranges taken from the held-out ground truth),
//! bound-violation rates, and acceptance (validity) accuracy and F1.
//! Stochastic variables are scored on one seeded sample per record, with a
//! ten-sample mean variant reported alongside. Planning metrics summarize
//! episode logs: final budget with a 95% normal-approximation interval and
//! survival checkpoints.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::doc::DocValue;
use crate::model::WorldModel;
use crate::planner::EpisodeLog;
use crate::schema::{ObservationSchema, Stream, TransitionRecord, VariableKind, VariableSpec};

/// Samples drawn per record for the multi-sample stochastic variant.
pub const MULTI_SAMPLES: usize = 10;

/// Survival checkpoints (in days) reported by planning metrics.
pub const SURVIVAL_CHECKPOINTS: [usize; 5] = [10, 20, 30, 40, 50];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamMetrics {
    /// Mean exact-match accuracy over categorical variables; 1.0 and
    /// flagged vacuous when the stream declares none.
    pub cat_acc: f64,
    pub cat_vacuous: bool,
    /// Mean over numeric variables of min-max-scaled RMSE.
    pub num_rmse: f64,
    /// Mean over variables of the bound-violation rate of predictions
    /// (missing or mistyped predictions count as violations).
    pub inv_rate: f64,
    /// Primary score per variable: accuracy for categorical, scaled RMSE
    /// for numeric.
    pub per_variable: BTreeMap<String, f64>,
    pub per_variable_inv: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionReport {
    pub deterministic: StreamMetrics,
    pub stochastic_single: StreamMetrics,
    pub stochastic_multi: StreamMetrics,
    /// Acceptance-prediction accuracy; the positive class is "valid".
    pub sigma_acc: f64,
    pub sigma_f1: f64,
    /// Set when the F1 denominator is empty (no positives present or
    /// predicted), in which case `sigma_f1` is reported as 1.0.
    pub sigma_vacuous: bool,
    /// Records on which the model faulted; excluded from per-variable
    /// scores and counted as predicted-invalid for acceptance.
    pub fault_count: usize,
    pub record_count: usize,
    pub mean_prediction_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanningReport {
    pub episodes: usize,
    pub mean_final_money: f64,
    /// Half-width of the 95% normal-approximation confidence interval.
    pub ci_half_width: f64,
    /// True when fewer than two episodes make the interval meaningless.
    pub ci_degenerate: bool,
    /// Fraction of episodes with money ≥ 0 at each checkpoint day (only
    /// checkpoints within the episode length are present).
    pub survival: BTreeMap<usize, f64>,
}

/// Per-(record, variable) raw observations accumulated before aggregation.
struct VarColumn<'a> {
    spec: &'a VariableSpec,
    truths: Vec<DocValue>,
    preds: Vec<DocValue>,
}

impl<'a> VarColumn<'a> {
    fn new(spec: &'a VariableSpec) -> Self {
        VarColumn {
            spec,
            truths: Vec::new(),
            preds: Vec::new(),
        }
    }

    fn violation_rate(&self) -> f64 {
        if self.preds.is_empty() {
            return 0.0;
        }
        let violations = self
            .preds
            .iter()
            .filter(|p| violates(self.spec, p))
            .count();
        violations as f64 / self.preds.len() as f64
    }

    /// Accuracy (categorical) or scaled RMSE over the held-out truth range
    /// (numeric).
    fn primary_score(&self) -> f64 {
        match &self.spec.kind {
            VariableKind::Categorical { .. } => {
                if self.preds.is_empty() {
                    return 1.0;
                }
                let hits = self
                    .truths
                    .iter()
                    .zip(&self.preds)
                    .filter(|(t, p)| t == p)
                    .count();
                hits as f64 / self.preds.len() as f64
            }
            VariableKind::Numerical { .. } => {
                if self.preds.is_empty() {
                    return 0.0;
                }
                let truth_nums: Vec<Option<f64>> =
                    self.truths.iter().map(|t| t.as_num()).collect();
                let known: Vec<f64> = truth_nums.iter().filter_map(|t| *t).collect();
                let (lo, hi) = known
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                        (lo.min(v), hi.max(v))
                    });
                let range = hi - lo;
                let mut sq_sum = 0.0;
                for (truth, pred) in truth_nums.iter().zip(&self.preds) {
                    let err = match (truth, pred.as_num()) {
                        (Some(t), Some(p)) => {
                            if range > 0.0 {
                                ((p - t) / range).abs().min(1.0)
                            } else if (p - t).abs() < 1e-12 {
                                // Zero-range variable: exact or maximally
                                // wrong, nothing in between to scale.
                                0.0
                            } else {
                                1.0
                            }
                        }
                        // Unusable truth or prediction: maximal error.
                        _ => 1.0,
                    };
                    sq_sum += err * err;
                }
                (sq_sum / self.preds.len() as f64).sqrt()
            }
        }
    }
}

fn violates(spec: &VariableSpec, pred: &DocValue) -> bool {
    match &spec.kind {
        VariableKind::Categorical { levels } => match pred.as_text() {
            Some(t) => !levels.iter().any(|l| l == t),
            None => true,
        },
        VariableKind::Numerical { lower, upper } => match pred.as_num() {
            Some(v) => {
                !v.is_finite()
                    || lower.map(|lo| v < lo).unwrap_or(false)
                    || upper.map(|hi| v > hi).unwrap_or(false)
            }
            None => true,
        },
    }
}

fn aggregate(columns: &[VarColumn<'_>]) -> StreamMetrics {
    let mut per_variable = BTreeMap::new();
    let mut per_variable_inv = BTreeMap::new();
    let (mut cat_sum, mut cat_n) = (0.0, 0usize);
    let (mut num_sum, mut num_n) = (0.0, 0usize);
    let (mut inv_sum, mut inv_n) = (0.0, 0usize);
    for col in columns {
        let score = col.primary_score();
        per_variable.insert(col.spec.name.clone(), score);
        let inv = col.violation_rate();
        per_variable_inv.insert(col.spec.name.clone(), inv);
        inv_sum += inv;
        inv_n += 1;
        match &col.spec.kind {
            VariableKind::Categorical { .. } => {
                cat_sum += score;
                cat_n += 1;
            }
            VariableKind::Numerical { .. } => {
                num_sum += score;
                num_n += 1;
            }
        }
    }
    StreamMetrics {
        cat_acc: if cat_n == 0 { 1.0 } else { cat_sum / cat_n as f64 },
        cat_vacuous: cat_n == 0,
        num_rmse: if num_n == 0 { 0.0 } else { num_sum / num_n as f64 },
        inv_rate: if inv_n == 0 { 0.0 } else { inv_sum / inv_n as f64 },
        per_variable,
        per_variable_inv,
    }
}

fn pull(doc: &DocValue, name: &str) -> DocValue {
    doc.key(name).cloned().unwrap_or(DocValue::Null)
}

/// Combine `MULTI_SAMPLES` stochastic draws into one point prediction:
/// numeric variables average, categorical ones take the modal level (ties
/// to the lexicographically smallest).
fn combine_samples(spec: &VariableSpec, samples: &[DocValue]) -> DocValue {
    match &spec.kind {
        VariableKind::Numerical { .. } => {
            let nums: Vec<f64> = samples.iter().filter_map(|s| s.as_num()).collect();
            if nums.is_empty() {
                DocValue::Null
            } else {
                DocValue::Num(nums.iter().sum::<f64>() / nums.len() as f64)
            }
        }
        VariableKind::Categorical { .. } => {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for s in samples {
                if let Some(t) = s.as_text() {
                    *counts.entry(t).or_default() += 1;
                }
            }
            counts
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(a.0)))
                .map(|(level, _)| DocValue::Text(level.to_string()))
                .unwrap_or(DocValue::Null)
        }
    }
}

/// Score `model` against held-out records. `seed` fixes the per-record
/// sampling streams, so reports are reproducible.
pub fn transition_metrics(
    model: &dyn WorldModel,
    test: &[TransitionRecord],
    schema: &ObservationSchema,
    seed: u64,
) -> TransitionReport {
    assert!(!test.is_empty(), "transition metrics need at least one record");
    let det_vars: Vec<&VariableSpec> = schema.stream_vars(Stream::Deterministic).collect();
    let sto_vars: Vec<&VariableSpec> = schema.stream_vars(Stream::Stochastic).collect();
    let mut det_cols: Vec<VarColumn> = det_vars.iter().map(|v| VarColumn::new(v)).collect();
    let mut sto_single: Vec<VarColumn> = sto_vars.iter().map(|v| VarColumn::new(v)).collect();
    let mut sto_multi: Vec<VarColumn> = sto_vars.iter().map(|v| VarColumn::new(v)).collect();

    let (mut tp, mut fp, mut tn, mut fal_n) = (0usize, 0usize, 0usize, 0usize);
    let mut fault_count = 0usize;
    let mut wall_ms_sum = 0.0;

    for (i, record) in test.iter().enumerate() {
        // The per-record stream keys predictions to the record, not to
        // iteration order, so subsets score identically.
        let record_seed = seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut rng = ChaCha8Rng::seed_from_u64(record_seed);
        let start = Instant::now();
        let stepped = model.step(&record.prev_det, &record.prev_sto, &record.action, &mut rng);
        wall_ms_sum += start.elapsed().as_secs_f64() * 1e3;

        let pred_valid = match &stepped {
            Ok(s) => s.valid,
            Err(_) => false,
        };
        match (record.valid, pred_valid) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
            (true, false) => fal_n += 1,
        }

        let Ok(step) = stepped else {
            fault_count += 1;
            continue;
        };

        for col in det_cols.iter_mut() {
            col.truths.push(pull(&record.next_det, &col.spec.name));
            col.preds.push(pull(&step.next_det, &col.spec.name));
        }
        for col in sto_single.iter_mut() {
            col.truths.push(pull(&record.next_sto, &col.spec.name));
            col.preds.push(pull(&step.next_sto, &col.spec.name));
        }

        // Multi-sample variant: the first draw reuses the single-sample
        // outcome, further draws continue the same record stream.
        let mut samples: Vec<DocValue> = vec![step.next_sto.clone()];
        for _ in 1..MULTI_SAMPLES {
            match model.step(&record.prev_det, &record.prev_sto, &record.action, &mut rng) {
                Ok(s) => samples.push(s.next_sto),
                Err(_) => break,
            }
        }
        for col in sto_multi.iter_mut() {
            let drawn: Vec<DocValue> = samples
                .iter()
                .map(|s| pull(s, &col.spec.name))
                .collect();
            col.truths.push(pull(&record.next_sto, &col.spec.name));
            col.preds.push(combine_samples(col.spec, &drawn));
        }
    }

    let denom = 2 * tp + fp + fal_n;
    let (sigma_f1, sigma_vacuous) = if denom == 0 {
        (1.0, true)
    } else {
        (2.0 * tp as f64 / denom as f64, false)
    };
    TransitionReport {
        deterministic: aggregate(&det_cols),
        stochastic_single: aggregate(&sto_single),
        stochastic_multi: aggregate(&sto_multi),
        sigma_acc: (tp + tn) as f64 / test.len() as f64,
        sigma_f1,
        sigma_vacuous,
        fault_count,
        record_count: test.len(),
        mean_prediction_ms: wall_ms_sum / test.len() as f64,
    }
}

/// Summarize planning episodes: final budget and survival checkpoints.
pub fn planning_metrics(logs: &[EpisodeLog]) -> PlanningReport {
    assert!(!logs.is_empty(), "planning metrics need at least one episode");
    let finals: Vec<f64> = logs.iter().map(EpisodeLog::final_money).collect();
    let n = finals.len() as f64;
    let mean = finals.iter().sum::<f64>() / n;
    let ci_degenerate = finals.len() < 2;
    let ci_half_width = if ci_degenerate {
        0.0
    } else {
        let var = finals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        1.96 * (var / n).sqrt()
    };
    let max_len = logs.iter().map(|l| l.entries.len()).max().unwrap_or(0);
    let mut survival = BTreeMap::new();
    for &day in &SURVIVAL_CHECKPOINTS {
        if day > max_len {
            continue;
        }
        let alive = logs
            .iter()
            .filter(|l| l.entries.get(day - 1).map(|e| e.money >= 0.0).unwrap_or(false))
            .count();
        survival.insert(day, alive as f64 / logs.len() as f64);
    }
    PlanningReport {
        episodes: logs.len(),
        mean_final_money: mean,
        ci_half_width,
        ci_degenerate,
        survival,
    }
}

impl TransitionReport {
    /// Plain-text table rendering of the report.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "transition metrics over {} records ({} faults, {:.3} ms/prediction)",
            self.record_count, self.fault_count, self.mean_prediction_ms
        );
        let _ = writeln!(
            out,
            "{:<22} {:>10} {:>10} {:>10}",
            "stream", "cat_acc", "num_rmse", "inv_rate"
        );
        for (name, m) in [
            ("deterministic", &self.deterministic),
            ("stochastic (1 sample)", &self.stochastic_single),
            ("stochastic (10-mean)", &self.stochastic_multi),
        ] {
            let cat = if m.cat_vacuous {
                "1.000*".to_string()
            } else {
                format!("{:.3}", m.cat_acc)
            };
            let _ = writeln!(
                out,
                "{:<22} {:>10} {:>10.3} {:>10.3}",
                name, cat, m.num_rmse, m.inv_rate
            );
        }
        let f1 = if self.sigma_vacuous {
            "1.000*".to_string()
        } else {
            format!("{:.3}", self.sigma_f1)
        };
        let _ = writeln!(
            out,
            "acceptance: accuracy {:.3}, F1 {} (* = vacuous)",
            self.sigma_acc, f1
        );
        out
    }
}

impl PlanningReport {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let ci = if self.ci_degenerate {
            "± n/a (single episode)".to_string()
        } else {
            format!("± {:.2}", self.ci_half_width)
        };
        let _ = writeln!(
            out,
            "final budget over {} episodes: {:.2} {ci}",
            self.episodes, self.mean_final_money
        );
        let _ = write!(out, "survival:");
        for (day, rate) in &self.survival {
            let _ = write!(out, "  day {day}: {:.0}%", rate * 100.0);
        }
        let _ = writeln!(out);
        out
    }
}
