//! Forward and reverse learning pipelines and maximum-likelihood selection.
//!
//! Both pipelines build a list of candidate models, at least one of which is
//! accurate with high probability, and pick the one with the smallest
//! empirical log-loss on a fresh sample.

use std::collections::HashMap;
use std::f64::consts::{LN_2, PI};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cccn::{learn_with_event, CnSettings, EventLearning};
use crate::distlearn::{direct_threshold_g, direct_unhealthy_learn, separate_and_learn, DistSettings, RobustnessBudget};
use crate::distributions::{kl_divergence, BoundednessBudget, DistributionSpec, Family, OutcomeVector};
use crate::error::{Error, Result};
use crate::events::{approxdist_event, enumerate_event_class, event_probability_exact, likelihood_ratio_event, Event};
use crate::mixture::{em_fit_2mixture, health_check, HealthReport, MixtureFit};
use crate::model::{concept_class, Concept, Gen, HypothesisModel, LabeledPair, TargetModel};
use crate::seed::{stage, SeedPath};

/// Where a candidate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProvenanceKind {
    ForwardEvent,
    ForwardDirect,
    ReverseMixture,
    ReverseDirect,
}

impl ProvenanceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProvenanceKind::ForwardEvent => "forward-event",
            ProvenanceKind::ForwardDirect => "forward-direct",
            ProvenanceKind::ReverseMixture => "reverse-mixture",
            ProvenanceKind::ReverseDirect => "reverse-direct",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: ProvenanceKind,
    /// Index of the event in the pipeline's event list.
    pub event: Option<usize>,
    /// Grid guesses that produced the hypothesis.
    pub p_hat: Option<f64>,
    pub q_hat: Option<f64>,
    /// Index of the fitted spec on each side (or of the direct fit).
    pub fit: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    /// Index into [`CandidateModelList::models`].
    pub model: usize,
    pub provenance: Provenance,
}

/// Distinct candidate models plus one entry per way each was produced.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateModelList {
    pub models: Vec<HypothesisModel>,
    pub entries: Vec<ModelEntry>,
    #[serde(skip)]
    index: HashMap<Vec<u64>, usize>,
}

fn spec_key(spec: &DistributionSpec, key: &mut Vec<u64>) {
    match spec {
        DistributionSpec::BernoulliProduct { biases } => {
            key.push(1);
            key.extend(biases.iter().map(|v| v.to_bits()));
        }
        DistributionSpec::BaryProduct { rows } => {
            key.push(2);
            key.extend(rows.iter().flatten().map(|v| v.to_bits()));
        }
        DistributionSpec::SphericalGaussian { means, sigmas } => {
            key.push(3);
            key.extend(means.iter().chain(sigmas).map(|v| v.to_bits()));
        }
    }
}

fn model_key(model: &HypothesisModel) -> Vec<u64> {
    let c = model.hypothesis.compile();
    let mut key = vec![c.mask, u64::from(c.never)];
    spec_key(&model.q0, &mut key);
    spec_key(&model.q1, &mut key);
    key
}

impl CandidateModelList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, model: HypothesisModel, provenance: Provenance) {
        let key = model_key(&model);
        let next = self.models.len();
        let idx = *self.index.entry(key).or_insert(next);
        if idx == next {
            self.models.push(model);
        }
        self.entries.push(ModelEntry { model: idx, provenance });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn distinct(&self) -> usize {
        self.models.len()
    }

    pub fn entry_model(&self, entry: usize) -> &HypothesisModel {
        &self.models[self.entries[entry].model]
    }

    pub fn count(&self, kind: ProvenanceKind) -> usize {
        self.entries.iter().filter(|e| e.provenance.kind == kind).count()
    }
}

/// Outcome of maximum-likelihood selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MLSelectionReport {
    /// Index of the chosen distinct model.
    pub chosen_model: usize,
    /// First list entry referring to the chosen model.
    pub chosen_entry: usize,
    /// Total log-loss in bits of every distinct model.
    pub losses: Vec<f64>,
    pub sample_size: usize,
    /// Models whose loss needed the per-point clamped evaluator.
    pub clamped_models: usize,
}

/// `ceil(M^2 / (2 eps^2) * ln(3 (|T| + 1) / delta))`.
pub fn ml_sample_size(m_cap: f64, epsilon: f64, list_size: usize, delta: f64) -> usize {
    (m_cap * m_cap / (2.0 * epsilon * epsilon) * (3.0 * (list_size as f64 + 1.0) / delta).ln()).ceil() as usize
}

/// Streaming sufficient statistics for log-loss evaluation, bucketed by
/// context. Discrete families keep per-coordinate symbol counts; Gaussian
/// families keep first and second moments and the raw points, which are
/// used only when a model could hit the evaluator clamp.
pub struct LossAccumulator {
    family: Family,
    width: usize,
    slots: HashMap<u64, usize>,
    contexts: Vec<u64>,
    stats: Vec<f64>,
    raw_bits: Vec<u64>,
    raw_values: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    count: usize,
}

impl LossAccumulator {
    pub fn new(family: &Family) -> Self {
        let k = family.k();
        let width = 1 + match family.alphabet() {
            Some(b) => k * b,
            None => 2 * k,
        };
        LossAccumulator {
            family: family.clone(),
            width,
            slots: HashMap::new(),
            contexts: Vec::new(),
            stats: Vec::new(),
            raw_bits: Vec::new(),
            raw_values: Vec::new(),
            lo: vec![f64::INFINITY; k],
            hi: vec![f64::NEG_INFINITY; k],
            count: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn push(&mut self, pair: &LabeledPair) -> Result<()> {
        let k = self.family.k();
        if pair.outcome.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                actual: pair.outcome.len(),
            });
        }
        let bits = pair.context.bits();
        let next = self.contexts.len();
        let slot = *self.slots.entry(bits).or_insert(next);
        if slot == next {
            self.contexts.push(bits);
            self.stats.extend(std::iter::repeat_n(0.0, self.width));
        }
        let row = &mut self.stats[slot * self.width..(slot + 1) * self.width];
        row[0] += 1.0;
        match (&pair.outcome, self.family.alphabet()) {
            (OutcomeVector::Discrete(v), Some(b)) => {
                for (j, s) in v.iter().enumerate() {
                    if *s as usize >= b {
                        return Err(Error::invalid("outcome", "symbol outside the alphabet"));
                    }
                    row[1 + j * b + *s as usize] += 1.0;
                }
            }
            (OutcomeVector::Real(v), None) => {
                for (j, x) in v.iter().enumerate() {
                    row[1 + 2 * j] += x;
                    row[2 + 2 * j] += x * x;
                    self.lo[j] = self.lo[j].min(*x);
                    self.hi[j] = self.hi[j].max(*x);
                }
                self.raw_bits.push(bits);
                self.raw_values.extend_from_slice(v);
            }
            _ => return Err(Error::FamilyMismatch("outcome kind does not match the family".into())),
        }
        self.count += 1;
        Ok(())
    }

    /// Per-side aggregated statistics for hypothesis `h`.
    fn side_stats(&self, h: &Concept) -> [Vec<f64>; 2] {
        let hc = h.compile();
        let mut sides = [vec![0.0; self.width], vec![0.0; self.width]];
        for (slot, bits) in self.contexts.iter().enumerate() {
            let side = &mut sides[hc.eval(*bits) as usize];
            for (acc, v) in side.iter_mut().zip(&self.stats[slot * self.width..(slot + 1) * self.width]) {
                *acc += v;
            }
        }
        sides
    }

    /// Whether no point of the sample can reach the clamp under `spec`.
    fn clamp_free(&self, spec: &DistributionSpec, m_cap: f64) -> bool {
        match spec {
            DistributionSpec::SphericalGaussian { means, sigmas } => {
                let mut worst = 0.0;
                for j in 0..means.len() {
                    let d = (self.lo[j] - means[j]).abs().max((self.hi[j] - means[j]).abs());
                    worst += d * d / (2.0 * sigmas[j] * sigmas[j]) + (sigmas[j] * (2.0 * PI).sqrt()).ln();
                }
                worst / LN_2 <= m_cap
            }
            _ => spec.min_log_density().is_some_and(|v| v >= -m_cap - 1e-9),
        }
    }

    fn side_loss(&self, spec: &DistributionSpec, stats: &[f64]) -> f64 {
        let n = stats[0];
        if n == 0.0 {
            return 0.0;
        }
        match spec {
            DistributionSpec::SphericalGaussian { means, sigmas } => {
                let mut nats = 0.0;
                for j in 0..means.len() {
                    let (s1, s2) = (stats[1 + 2 * j], stats[2 + 2 * j]);
                    let mu = means[j];
                    let var = sigmas[j] * sigmas[j];
                    nats += (s2 - 2.0 * mu * s1 + n * mu * mu) / (2.0 * var) + n * (sigmas[j] * (2.0 * PI).sqrt()).ln();
                }
                nats / LN_2
            }
            _ => {
                let b = spec.alphabet().unwrap_or(2);
                let mut bits = 0.0;
                for j in 0..spec.k() {
                    for s in 0..b {
                        let c = stats[1 + j * b + s];
                        if c > 0.0 {
                            bits -= c * spec.coordinate_prob(j, s as u8).log2();
                        }
                    }
                }
                bits
            }
        }
    }

    fn pointwise_loss(&self, model: &HypothesisModel, bounds: &BoundednessBudget) -> f64 {
        let k = self.family.k();
        let hc = model.hypothesis.compile();
        let mut loss = 0.0;
        let mut y = OutcomeVector::Real(vec![0.0; k]);
        for (i, bits) in self.raw_bits.iter().enumerate() {
            if let OutcomeVector::Real(v) = &mut y {
                v.copy_from_slice(&self.raw_values[i * k..(i + 1) * k]);
            }
            loss -= model.spec(hc.eval(*bits)).log_density_unchecked(&y).max(-bounds.m_cap);
        }
        loss
    }

    /// Total clamped log-loss of each model, and how many needed the
    /// per-point path.
    pub fn losses(&self, models: &[HypothesisModel], bounds: &BoundednessBudget) -> Result<(Vec<f64>, usize)> {
        let mut by_concept: HashMap<Concept, [Vec<f64>; 2]> = HashMap::new();
        for m in models {
            m.q0.check_compatible(&m.q1)?;
            if m.q0.k() != self.family.k() || m.q0.is_discrete() != self.family.is_discrete() {
                return Err(Error::FamilyMismatch("candidate model does not match the sample".into()));
            }
            if !by_concept.contains_key(&m.hypothesis) {
                by_concept.insert(m.hypothesis.clone(), self.side_stats(&m.hypothesis));
            }
        }
        let per_model: Vec<(f64, bool)> = models
            .par_iter()
            .map(|m| {
                let exact = self.clamp_free(&m.q0, bounds.m_cap) && self.clamp_free(&m.q1, bounds.m_cap);
                if !exact && !self.family.is_discrete() {
                    return (self.pointwise_loss(m, bounds), true);
                }
                let sides = &by_concept[&m.hypothesis];
                (self.side_loss(&m.q0, &sides[0]) + self.side_loss(&m.q1, &sides[1]), !exact)
            })
            .collect();
        if per_model.iter().any(|(_, clamped)| *clamped) && self.family.is_discrete() {
            return Err(Error::invalid(
                "candidate",
                "discrete candidate below the boundedness floor; smooth it with lambda first",
            ));
        }
        let clamped = per_model.iter().filter(|(_, c)| *c).count();
        Ok((per_model.into_iter().map(|(l, _)| l).collect(), clamped))
    }
}

fn select_from(list: &CandidateModelList, acc: &LossAccumulator, bounds: &BoundednessBudget) -> Result<MLSelectionReport> {
    if list.is_empty() {
        return Err(Error::EmptyInput("candidate model list"));
    }
    if acc.is_empty() {
        return Err(Error::EmptyInput("selection sample"));
    }
    let (losses, clamped_models) = acc.losses(&list.models, bounds)?;
    let chosen_model = losses
        .iter()
        .enumerate()
        .fold(0, |best, (i, l)| if *l < losses[best] { i } else { best });
    let chosen_entry = list
        .entries
        .iter()
        .position(|e| e.model == chosen_model)
        .expect("every model has an entry");
    Ok(MLSelectionReport {
        chosen_model,
        chosen_entry,
        losses,
        sample_size: acc.len(),
        clamped_models,
    })
}

/// Picks the candidate with the smallest total log-loss on `sample`
/// (smallest index on ties).
pub fn ml_select(models: &CandidateModelList, sample: &[LabeledPair], family: &Family, bounds: &BoundednessBudget) -> Result<MLSelectionReport> {
    let mut acc = LossAccumulator::new(family);
    for pair in sample {
        acc.push(pair)?;
    }
    select_from(models, &acc, bounds)
}

/// Draws `m` pairs from the oracle and selects on them.
pub fn ml_select_streaming(
    models: &CandidateModelList,
    gen: &Gen<'_>,
    m: usize,
    family: &Family,
    bounds: &BoundednessBudget,
    seed: SeedPath,
) -> Result<MLSelectionReport> {
    let mut acc = LossAccumulator::new(family);
    let mut failure = None;
    gen.stream(m, &mut seed.stream(), |pair| {
        if failure.is_none() {
            if let Err(e) = acc.push(pair) {
                failure = Some(e);
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    select_from(models, &acc, bounds)
}

/// Parameters shared by both pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub family: Family,
    pub bounds: BoundednessBudget,
    pub epsilon: f64,
    pub delta: f64,
    /// Divergence threshold of the event class; `None` means `1/g`.
    pub gamma: Option<f64>,
    /// Separation handed to the labeler in the forward pipeline; `None`
    /// means the event class's guaranteed bound.
    pub xi: Option<f64>,
    pub cn_epsilon: f64,
    pub cn_constant: f64,
    /// Maximum conjunction size of the concept class.
    pub concept_size: usize,
    pub m_p: usize,
    pub separate_max_draws: usize,
    pub restarts: usize,
    pub mixture_sample: usize,
    pub health_eta: f64,
    /// Reverse events with a smaller verified separation are dropped.
    pub xi_min: f64,
    /// Fraction of the verified separation used as the reverse `xi`.
    pub xi_fraction: f64,
    /// Assumed component accuracy of the mixture learner, in bits.
    pub mixture_alpha: f64,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.family.validate()?;
        self.bounds.validate()?;
        let unit = |name: &'static str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("{v} not in (0, 1]")))
            }
        };
        unit("epsilon", self.epsilon)?;
        unit("delta", self.delta)?;
        unit("cn_epsilon", self.cn_epsilon)?;
        unit("xi_fraction", self.xi_fraction)?;
        if let Some(g) = self.gamma {
            if g.is_nan() || g <= 0.0 {
                return Err(Error::invalid("gamma", format!("{g} is not positive")));
            }
        }
        if let Some(x) = self.xi {
            unit("xi", x)?;
        }
        if self.delta > 0.25 {
            return Err(Error::invalid("delta", format!("{} exceeds 1/4", self.delta)));
        }
        if self.cn_constant.is_nan() || self.cn_constant <= 0.0 {
            return Err(Error::invalid("cn_constant", "must be positive"));
        }
        if self.m_p == 0 || self.separate_max_draws == 0 || self.restarts == 0 {
            return Err(Error::invalid("m_p", "m_p, separate_max_draws and restarts must be positive"));
        }
        if self.mixture_sample < crate::mixture::MIN_MIXTURE_SAMPLE {
            return Err(Error::invalid("mixture_sample", "must be at least 20"));
        }
        if !(self.health_eta > 0.0 && self.xi_min > 0.0 && self.mixture_alpha > 0.0) {
            return Err(Error::invalid("health_eta", "health_eta, xi_min and mixture_alpha must be positive"));
        }
        Ok(())
    }

    pub fn g(&self) -> f64 {
        direct_threshold_g(self.bounds.m_cap, self.m_p, self.epsilon)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or_else(|| 1.0 / self.g())
    }

    pub fn dist_settings(&self) -> Result<DistSettings> {
        Ok(DistSettings {
            family: self.family.clone(),
            bounds: self.bounds,
            robustness: RobustnessBudget::new(self.m_p, self.delta)?,
            epsilon: self.epsilon,
            max_draws: self.separate_max_draws,
        })
    }

    pub fn cn_settings(&self) -> CnSettings {
        CnSettings {
            epsilon: self.cn_epsilon,
            delta: self.delta,
            constant: self.cn_constant,
        }
    }
}

/// Bookkeeping reported alongside the chosen model.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PipelineStats {
    pub gamma: f64,
    pub events: usize,
    pub xi: Vec<f64>,
    /// The separation guaranteed by the event class (forward only).
    pub xi_theoretical: Option<f64>,
    pub cn_sample_sizes: Vec<usize>,
    pub pairs_learned: usize,
    pub pairs_skipped: usize,
    pub distinct_hypotheses: usize,
    pub separate_draws: usize,
    pub separate_draws_theoretical: f64,
    pub hypothesis_error_threshold: f64,
    pub selection_size: usize,
    pub eps_dist: f64,
    pub eps_cn: f64,
    pub draws_used: u64,
    pub health: Option<HealthReport>,
    pub mixture: Option<MixtureFit>,
    /// Reverse events skipped for low verified separation.
    pub events_dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineOutcome {
    pub chosen: HypothesisModel,
    pub candidates: CandidateModelList,
    pub selection: MLSelectionReport,
    pub stats: PipelineStats,
}

impl PipelineOutcome {
    pub fn chosen_provenance(&self) -> &Provenance {
        &self.candidates.entries[self.selection.chosen_entry].provenance
    }
}

/// Runs learn-with-event for each event, then separate-and-learn once per
/// distinct hypothesis, adding one entry per (event, grid pair, fit pair).
#[allow(clippy::too_many_arguments)]
fn event_stage(
    gen: &Gen<'_>,
    cfg: &PipelineConfig,
    events: &[(Event, f64)],
    kind: ProvenanceKind,
    class: &[Concept],
    seed: SeedPath,
    list: &mut CandidateModelList,
    stats: &mut PipelineStats,
) -> Result<()> {
    let dist = cfg.dist_settings()?;
    let cn = cfg.cn_settings();
    let mut learned: Vec<EventLearning> = Vec::with_capacity(events.len());
    for (e, (event, xi)) in events.iter().enumerate() {
        let out = learn_with_event(gen, event, *xi, &cn, class, seed.child(stage::EVENTS).child(e as u64))?;
        stats.cn_sample_sizes.push(out.sample_size);
        stats.pairs_skipped += out.skipped;
        stats.pairs_learned += out.entries.len() - out.skipped;
        learned.push(out);
    }
    let mut distinct: Vec<Concept> = Vec::new();
    for out in &learned {
        for h in out.hypotheses() {
            if !distinct.contains(&h) {
                distinct.push(h);
            }
        }
    }
    stats.distinct_hypotheses += distinct.len();
    let separated = distinct
        .par_iter()
        .map(|h| {
            let c = h.compile();
            let s = seed.child(stage::SEPARATE).child(c.mask).child(u64::from(c.never));
            separate_and_learn(gen, h, &dist, s)
        })
        .collect::<Result<Vec<_>>>()?;
    for s in &separated {
        stats.separate_draws += s.draws;
    }
    for (e, out) in learned.iter().enumerate() {
        for entry in &out.entries {
            let crate::cccn::PairOutcome::Learned { concept, .. } = &entry.outcome else {
                continue;
            };
            let sep = &separated[distinct.iter().position(|h| h == concept).expect("collected above")];
            let r1 = sep.models.len() / sep_side_len(sep, 0).max(1);
            for (i, model) in sep.models.iter().enumerate() {
                list.push(
                    model.clone(),
                    Provenance {
                        kind,
                        event: Some(e),
                        p_hat: Some(entry.p_hat),
                        q_hat: Some(entry.q_hat),
                        fit: [i / r1.max(1), i % r1.max(1)],
                    },
                );
            }
        }
    }
    Ok(())
}

fn sep_side_len(sep: &crate::distlearn::SeparateOutcome, side: usize) -> usize {
    sep.side_fits[side].max(1)
}

fn direct_stage(gen: &Gen<'_>, cfg: &PipelineConfig, kind: ProvenanceKind, seed: SeedPath, list: &mut CandidateModelList) -> Result<()> {
    let fits = direct_unhealthy_learn(gen, &cfg.dist_settings()?, seed.child(stage::DIRECT))?;
    if fits.is_empty() {
        return Err(Error::EmptyInput("direct fits"));
    }
    for (i, spec) in fits.into_iter().enumerate() {
        list.push(
            HypothesisModel {
                hypothesis: Concept::ConstantZero,
                q0: spec.clone(),
                q1: spec,
            },
            Provenance {
                kind,
                event: None,
                p_hat: None,
                q_hat: None,
                fit: [i, i],
            },
        );
    }
    Ok(())
}

fn finish(gen: &Gen<'_>, cfg: &PipelineConfig, list: CandidateModelList, mut stats: PipelineStats, seed: SeedPath) -> Result<PipelineOutcome> {
    let m_sel = ml_sample_size(cfg.bounds.m_cap, cfg.epsilon, list.distinct(), cfg.delta);
    stats.selection_size = m_sel;
    let selection = ml_select_streaming(&list, gen, m_sel, &cfg.family, &cfg.bounds, seed.child(stage::SELECT))?;
    stats.draws_used = gen.draws_used();
    Ok(PipelineOutcome {
        chosen: list.models[selection.chosen_model].clone(),
        candidates: list,
        selection,
        stats,
    })
}

fn base_stats(cfg: &PipelineConfig) -> Result<PipelineStats> {
    let dist = cfg.dist_settings()?;
    Ok(PipelineStats {
        gamma: cfg.gamma(),
        separate_draws_theoretical: dist.separate_draws_theoretical(),
        hypothesis_error_threshold: dist.hypothesis_error_threshold(),
        eps_dist: cfg.epsilon / 2.0,
        eps_cn: cfg.cn_epsilon,
        ..PipelineStats::default()
    })
}

/// Forward pipeline: event class, labeler + ERM per event, separate-and-learn
/// per hypothesis, the direct fallback, then ML selection.
pub fn forward_learn(gen: &Gen<'_>, cfg: &PipelineConfig, seed: SeedPath) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let mut stats = base_stats(cfg)?;
    let class = enumerate_event_class(&cfg.family, stats.gamma, &cfg.bounds)?;
    let xi_theory = class.xi_bound.min(1.0);
    let xi = cfg.xi.unwrap_or(xi_theory);
    stats.xi_theoretical = Some(xi_theory);
    stats.events = class.events.len();
    let events: Vec<(Event, f64)> = class.events.into_iter().map(|e| (e, xi)).collect();
    stats.xi = vec![xi; events.len()];
    let concepts = concept_class(gen.n(), cfg.concept_size);
    let mut list = CandidateModelList::new();
    event_stage(gen, cfg, &events, ProvenanceKind::ForwardEvent, &concepts, seed, &mut list, &mut stats)?;
    direct_stage(gen, cfg, ProvenanceKind::ForwardDirect, seed, &mut list)?;
    finish(gen, cfg, list, stats, seed)
}

/// Only the direct fallback: `r` fits of the unconditional outcome
/// distribution, each paired with the constant-zero concept, then selection.
pub fn direct_learn(gen: &Gen<'_>, cfg: &PipelineConfig, seed: SeedPath) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let stats = base_stats(cfg)?;
    let mut list = CandidateModelList::new();
    direct_stage(gen, cfg, ProvenanceKind::ForwardDirect, seed, &mut list)?;
    finish(gen, cfg, list, stats, seed)
}

/// Likelihood-ratio events built from a fitted mixture, both component
/// orders, with their verified separation under the fitted components.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReverseEvent {
    pub event: Event,
    /// `0` for `E(Y0, Y1, .)`, `1` for `E(Y1, Y0, .)`.
    pub order: usize,
    /// `"approx-event"` (from `approxdist_event`, kept when its margin `b` is positive) or `"half-kl"`.
    pub construction: &'static str,
    pub separation: f64,
}

pub fn reverse_events(fit: &MixtureFit, gamma: f64, m_cap: f64, alpha: f64) -> Result<Vec<ReverseEvent>> {
    let mut out = Vec::new();
    for (order, (a, b)) in [(&fit.comp0, &fit.comp1), (&fit.comp1, &fit.comp0)].into_iter().enumerate() {
        let mut candidates = Vec::new();
        let approx = approxdist_event(a, b, gamma, m_cap, alpha)?;
        if approx.b > 0.0 {
            candidates.push((approx.event, "approx-event"));
        }
        let tau = 0.5 * kl_divergence(a, b)?;
        candidates.push((likelihood_ratio_event(a, b, tau)?, "half-kl"));
        for (event, construction) in candidates {
            let separation = verified_separation(a, b, &event)?;
            out.push(ReverseEvent {
                event,
                order,
                construction,
                separation,
            });
        }
    }
    Ok(out)
}

fn verified_separation(a: &DistributionSpec, b: &DistributionSpec, event: &Event) -> Result<f64> {
    Ok((event_probability_exact(a, event)? - event_probability_exact(b, event)?).abs())
}

/// Reverse pipeline: mixture fit, health check, likelihood-ratio events for
/// healthy fits, the direct fallback, then ML selection.
pub fn reverse_learn(gen: &Gen<'_>, cfg: &PipelineConfig, seed: SeedPath) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let mut stats = base_stats(cfg)?;
    let mut rng = seed.child(stage::MIXTURE).stream();
    let mut sample = Vec::with_capacity(cfg.mixture_sample);
    gen.stream(cfg.mixture_sample, &mut rng, |p| sample.push(p.outcome.clone()))?;
    let fit = em_fit_2mixture(&sample, &cfg.family, &cfg.bounds, cfg.restarts, seed.child(stage::MIXTURE).child(1))?;
    let health = health_check(&fit, cfg.health_eta)?;
    let mut list = CandidateModelList::new();
    if health.healthy {
        let candidates = reverse_events(&fit, stats.gamma, cfg.bounds.m_cap, cfg.mixture_alpha)?;
        let mut events = Vec::new();
        for c in candidates {
            if c.separation < cfg.xi_min {
                stats.events_dropped += 1;
                continue;
            }
            events.push((c.event, (cfg.xi_fraction * c.separation).min(1.0)));
        }
        stats.events = events.len();
        stats.xi = events.iter().map(|(_, x)| *x).collect();
        let concepts = concept_class(gen.n(), cfg.concept_size);
        event_stage(gen, cfg, &events, ProvenanceKind::ReverseMixture, &concepts, seed, &mut list, &mut stats)?;
    }
    stats.health = Some(health);
    stats.mixture = Some(fit);
    direct_stage(gen, cfg, ProvenanceKind::ReverseDirect, seed, &mut list)?;
    finish(gen, cfg, list, stats, seed)
}

/// Which path's precondition holds for a target at `gamma = 1/g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaDispatch {
    pub g: f64,
    pub gamma: f64,
    pub max_kl: f64,
    pub min_weight: f64,
    /// `max(KL(P0||P1), KL(P1||P0)) >= gamma`.
    pub event_path: bool,
    /// The mixture is not `1/g`-healthy.
    pub direct_path: bool,
}

impl GammaDispatch {
    pub fn covered(&self) -> bool {
        self.event_path || self.direct_path
    }
}

pub fn gamma_dispatch(target: &TargetModel, cfg: &PipelineConfig) -> Result<GammaDispatch> {
    let g = cfg.g();
    let gamma = cfg.gamma();
    let w1 = target.weight1()?;
    let max_kl = kl_divergence(&target.p0, &target.p1)?.max(kl_divergence(&target.p1, &target.p0)?);
    let eta = 1.0 / g;
    let min_weight = w1.min(1.0 - w1);
    Ok(GammaDispatch {
        g,
        gamma,
        max_kl,
        min_weight,
        event_path: max_kl >= gamma,
        direct_path: !(min_weight >= eta && max_kl >= eta),
    })
}

/// Draws a fresh `m`-pair selection sample (used by planted-list checks).
pub fn selection_sample<R: Rng + ?Sized>(target: &TargetModel, m: usize, rng: &mut R) -> Vec<LabeledPair> {
    crate::model::gen_sample(target, m, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{model_error, ContextDistribution, EvalMode};

    fn bern(b: &[f64]) -> DistributionSpec {
        DistributionSpec::BernoulliProduct { biases: b.to_vec() }
    }

    #[test]
    fn selection_size_example() {
        assert_eq!(ml_sample_size(10.0, 0.1, 9, 0.15), 26492);
    }

    #[test]
    fn identical_models_choose_first() {
        let family = Family::BernoulliProduct { k: 1 };
        let bounds = BoundednessBudget::discrete(1, 1e-3);
        let t = TargetModel {
            n: 2,
            concept: Concept::dictator(1),
            p0: bern(&[0.2]),
            p1: bern(&[0.8]),
            context_dist: ContextDistribution::Uniform,
        };
        let model = HypothesisModel {
            hypothesis: Concept::dictator(1),
            q0: bern(&[0.2]),
            q1: bern(&[0.8]),
        };
        let mut list = CandidateModelList::new();
        for i in 0..3 {
            list.push(
                model.clone(),
                Provenance {
                    kind: ProvenanceKind::ForwardDirect,
                    event: None,
                    p_hat: None,
                    q_hat: None,
                    fit: [i, i],
                },
            );
        }
        assert_eq!(list.distinct(), 1);
        assert_eq!(list.len(), 3);
        let sample = selection_sample(&t, 100, &mut SeedPath::root(1).stream());
        let rep = ml_select(&list, &sample, &family, &bounds).unwrap();
        assert_eq!((rep.chosen_model, rep.chosen_entry), (0, 0));
    }

    #[test]
    fn sufficient_statistics_match_direct_loss() {
        let family = Family::BaryProduct { k: 2, b: 3 };
        let bounds = BoundednessBudget::discrete(2, 1e-3);
        let p0 = DistributionSpec::BaryProduct {
            rows: vec![vec![0.2, 0.3, 0.5], vec![0.6, 0.2, 0.2]],
        };
        let p1 = DistributionSpec::BaryProduct {
            rows: vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.1, 0.8]],
        };
        let t = TargetModel {
            n: 3,
            concept: Concept::conjunction(&[1, 2]),
            p0: p0.clone(),
            p1: p1.clone(),
            context_dist: ContextDistribution::Uniform,
        };
        let sample = selection_sample(&t, 500, &mut SeedPath::root(2).stream());
        let models = vec![
            HypothesisModel {
                hypothesis: t.concept.clone(),
                q0: p0.clone(),
                q1: p1.clone(),
            },
            HypothesisModel {
                hypothesis: Concept::dictator(3),
                q0: p1,
                q1: p0,
            },
        ];
        let mut acc = LossAccumulator::new(&family);
        sample.iter().for_each(|p| acc.push(p).unwrap());
        let (losses, clamped) = acc.losses(&models, &bounds).unwrap();
        assert_eq!(clamped, 0);
        for (m, l) in models.iter().zip(&losses) {
            let direct = crate::model::empirical_log_loss(m, &sample, &bounds).unwrap();
            assert!((direct - l).abs() < 1e-8 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn gaussian_losses_match_direct_and_respect_clamp() {
        let family = Family::SphericalGaussian {
            sigmas: vec![1.0, 0.5],
            mean_range: [0.0, 3.0],
        };
        let g = |m: [f64; 2]| DistributionSpec::SphericalGaussian {
            means: m.to_vec(),
            sigmas: vec![1.0, 0.5],
        };
        let t = TargetModel {
            n: 2,
            concept: Concept::dictator(1),
            p0: g([0.0, 0.0]),
            p1: g([3.0, 3.0]),
            context_dist: ContextDistribution::Uniform,
        };
        let sample = selection_sample(&t, 400, &mut SeedPath::root(3).stream());
        let models = vec![
            HypothesisModel {
                hypothesis: Concept::dictator(1),
                q0: g([0.0, 0.0]),
                q1: g([3.0, 3.0]),
            },
            HypothesisModel {
                hypothesis: Concept::dictator(2),
                q0: g([3.0, 3.0]),
                q1: g([0.0, 0.0]),
            },
        ];
        for bounds in [BoundednessBudget::gaussian(64.0), BoundednessBudget::gaussian(8.0)] {
            let mut acc = LossAccumulator::new(&family);
            sample.iter().for_each(|p| acc.push(p).unwrap());
            let (losses, _) = acc.losses(&models, &bounds).unwrap();
            for (m, l) in models.iter().zip(&losses) {
                let direct = crate::model::empirical_log_loss(m, &sample, &bounds).unwrap();
                assert!((direct - l).abs() < 1e-7 * direct.abs().max(1.0), "{direct} vs {l}");
            }
        }
    }

    #[test]
    fn dispatch_is_covered() {
        let cfg = PipelineConfig {
            family: Family::BernoulliProduct { k: 2 },
            bounds: BoundednessBudget::discrete(2, 1e-3),
            epsilon: 0.1,
            delta: 0.2,
            gamma: None,
            xi: None,
            cn_epsilon: 0.25,
            cn_constant: 4.0,
            concept_size: 2,
            m_p: 200,
            separate_max_draws: 10_000,
            restarts: 2,
            mixture_sample: 100,
            health_eta: 0.05,
            xi_min: 0.05,
            xi_fraction: 0.9,
            mixture_alpha: 0.05,
        };
        for p1 in [[0.3, 0.4], [0.3000001, 0.4], [0.9, 0.1]] {
            let t = TargetModel {
                n: 3,
                concept: Concept::dictator(1),
                p0: bern(&[0.3, 0.4]),
                p1: bern(&p1),
                context_dist: ContextDistribution::Uniform,
            };
            assert!(gamma_dispatch(&t, &cfg).unwrap().covered());
        }
        let t = TargetModel {
            n: 3,
            concept: Concept::dictator(1),
            p0: bern(&[0.3, 0.4]),
            p1: bern(&[0.9, 0.1]),
            context_dist: ContextDistribution::Uniform,
        };
        let d = gamma_dispatch(&t, &cfg).unwrap();
        assert!(d.event_path && !d.direct_path);
        let _ = model_error(&t, &HypothesisModel { hypothesis: Concept::ConstantZero, q0: t.p0.clone(), q1: t.p0.clone() }, EvalMode::Exact).unwrap();
    }
}
