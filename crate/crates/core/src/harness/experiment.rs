//! Seeded trials of a scenario.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{PipelineKind, ScenarioSpec};
use super::report::ReportRow;
use crate::distributions::kl_divergence;
use crate::error::Result;
use crate::model::{classification_error, model_error, EvalMode, Gen};
use crate::reductions::{direct_learn, forward_learn, reverse_learn, PipelineOutcome};

/// Aggregate of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub scenario: String,
    pub trials: usize,
    pub successes: usize,
    pub success_fraction: f64,
    pub threshold: f64,
    pub accepted: bool,
    pub rows: Vec<ReportRow>,
}

/// Runs one trial and scores the chosen model against the ground truth.
pub fn run_trial(spec: &ScenarioSpec, trial: usize, verbose: bool) -> Result<(ReportRow, PipelineOutcome)> {
    let start = Instant::now();
    let target = spec.target(trial);
    let gen = Gen::new(&target, spec.params.draw_budget);
    let cfg = spec.pipeline_config();
    let seed = spec.trial_seed(trial).child(1);
    let outcome = match spec.pipeline {
        PipelineKind::Forward => forward_learn(&gen, &cfg, seed)?,
        PipelineKind::Reverse => reverse_learn(&gen, &cfg, seed)?,
        PipelineKind::Direct => direct_learn(&gen, &cfg, seed)?,
    };
    let chosen = &outcome.chosen;
    let row = ReportRow {
        scenario: spec.name.clone(),
        trial,
        seed: spec.trial_seed(trial).value(),
        pipeline: spec.pipeline.as_str().to_string(),
        err_t: model_error(&target, chosen, EvalMode::Exact)?.value,
        err_h: classification_error(&target, &chosen.hypothesis)?,
        kl0: kl_divergence(&target.p0, &chosen.q0)?,
        kl1: kl_divergence(&target.p1, &chosen.q1)?,
        chosen_provenance: outcome.chosen_provenance().kind.as_str().to_string(),
        chosen_hypothesis: chosen.hypothesis.to_string(),
        list_size: outcome.candidates.len(),
        distinct_models: outcome.candidates.distinct(),
        m_sel: outcome.selection.sample_size,
        draws_used: outcome.stats.draws_used,
        runtime_ms: verbose.then(|| start.elapsed().as_millis()),
    };
    Ok((row, outcome))
}

/// Runs every trial (in parallel) and collects rows in trial order.
pub fn run_experiment(spec: &ScenarioSpec, verbose: bool) -> Result<ExperimentSummary> {
    let rows = (0..spec.trials)
        .into_par_iter()
        .map(|t| run_trial(spec, t, verbose).map(|(row, _)| row))
        .collect::<Result<Vec<_>>>()?;
    let successes = rows.iter().filter(|r| r.err_t <= spec.params.epsilon).count();
    let success_fraction = successes as f64 / rows.len() as f64;
    Ok(ExperimentSummary {
        scenario: spec.name.clone(),
        trials: rows.len(),
        successes,
        success_fraction,
        threshold: spec.success_threshold,
        accepted: success_fraction >= spec.success_threshold,
        rows,
    })
}
