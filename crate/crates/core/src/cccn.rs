//! Turning a distinguishing event into noisy concept labels.
//!
//! `Lab` labels `(x, y)` with `1` with probability `a1` when `y` is in the
//! event and `b1` otherwise. With guesses `p_hat ~ P0(E)`, `q_hat ~ P1(E)` the
//! two class-conditional noise rates both equal `1/2 - xi/4`, so ordinary
//! empirical risk minimisation over a finite class recovers the concept.

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{CompiledEvent, Event};
use crate::model::{CompiledConcept, Concept, ContextVector, Gen, LabeledPair, ENUMERATION_DIM};
use crate::seed::SeedPath;

/// Slack allowed when checking label probabilities against `[0, 1]`.
const PROB_SLACK: f64 = 1e-12;

/// Default constant in the noisy-ERM sample size.
pub const DEFAULT_CN_CONSTANT: f64 = 32.0;

/// Labeling probabilities for one pair of guesses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabParams {
    pub a0: f64,
    pub a1: f64,
    pub b0: f64,
    pub b1: f64,
    pub xi: f64,
    pub p_hat: f64,
    pub q_hat: f64,
}

/// Computes `(a0, a1, b0, b1)` for guesses `(p_hat, q_hat)` and separation `xi`.
///
/// Rejects equal guesses, guesses closer than `xi/2`, and guesses for which
/// the formulas leave `[0, 1]`. The last condition is
/// `|q_hat - p_hat| >= (xi/2) max(p_hat + q_hat, 2 - p_hat - q_hat)`, implied
/// by `|q_hat - p_hat| >= xi`.
pub fn lab_parameters(p_hat: f64, q_hat: f64, xi: f64) -> Result<LabParams> {
    if !(xi > 0.0 && xi <= 1.0) {
        return Err(Error::invalid("xi", format!("{xi} not in (0, 1]")));
    }
    for (name, v) in [("p_hat", p_hat), ("q_hat", q_hat)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(name, format!("{v} not in [0, 1]")));
        }
    }
    if p_hat == q_hat {
        return Err(Error::DegenerateGuesses(p_hat));
    }
    let gap = q_hat - p_hat;
    if gap.abs() < xi / 2.0 {
        return Err(Error::GuardViolation {
            p_hat,
            q_hat,
            xi,
            reason: "guesses closer than xi/2",
        });
    }
    let a0 = 0.5 + xi * (p_hat + q_hat - 2.0) / (4.0 * gap);
    let b0 = 0.5 + xi * (p_hat + q_hat) / (4.0 * gap);
    let valid = |v: f64| (-PROB_SLACK..=1.0 + PROB_SLACK).contains(&v);
    if !(valid(a0) && valid(b0)) {
        return Err(Error::GuardViolation {
            p_hat,
            q_hat,
            xi,
            reason: "label probabilities outside [0, 1]",
        });
    }
    let (a0, b0) = (a0.clamp(0.0, 1.0), b0.clamp(0.0, 1.0));
    Ok(LabParams {
        a0,
        a1: 1.0 - a0,
        b0,
        b1: 1.0 - b0,
        xi,
        p_hat,
        q_hat,
    })
}

/// A context with a (noisy) binary label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoisyLabeledExample {
    pub context: ContextVector,
    pub label: u8,
}

/// Labels one pair: `1` with probability `a1` if `y` is in the event, else `b1`.
pub fn lab_label<R: Rng + ?Sized>(event: &Event, pair: &LabeledPair, params: &LabParams, rng: &mut R) -> NoisyLabeledExample {
    label_with(event.contains(&pair.outcome), pair.context, params, rng)
}

#[inline]
fn label_with<R: Rng + ?Sized>(inside: bool, context: ContextVector, params: &LabParams, rng: &mut R) -> NoisyLabeledExample {
    let p1 = if inside { params.a1 } else { params.b1 };
    NoisyLabeledExample {
        context,
        label: u8::from(rng.random::<f64>() < p1),
    }
}

/// `(eta0, eta1)` with `eta0 = Pr[l=1 | c=0] = p a1 + (1-p) b1` and
/// `eta1 = Pr[l=0 | c=1] = q a0 + (1-q) b0`, where `p = P0(E)`, `q = P1(E)`.
pub fn noise_rates(p: f64, q: f64, params: &LabParams) -> (f64, f64) {
    (
        p * params.a1 + (1.0 - p) * params.b1,
        q * params.a0 + (1.0 - q) * params.b0,
    )
}

/// Candidate guesses `(p_hat, q_hat)` on a grid of step `xi/8`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuessGrid {
    pub delta: f64,
    pub values: Vec<f64>,
    /// Ordered pairs `(values[i], values[j])`, `i != j`, row-major in `(i, j)`.
    pub pairs: Vec<(f64, f64)>,
}

pub fn guess_grid(xi: f64) -> Result<GuessGrid> {
    if !(xi > 0.0 && xi <= 1.0) {
        return Err(Error::invalid("xi", format!("{xi} not in (0, 1]")));
    }
    let delta = xi / 8.0;
    let top = (1.0 / delta - 1e-9).ceil() as usize;
    let values: Vec<f64> = (0..=top).map(|i| (i as f64 * delta).min(1.0)).collect();
    let mut pairs = Vec::with_capacity(values.len() * (values.len() - 1));
    for (i, p) in values.iter().enumerate() {
        for (j, q) in values.iter().enumerate() {
            if i != j {
                pairs.push((*p, *q));
            }
        }
    }
    Ok(GuessGrid { delta, values, pairs })
}

/// Disagreement counts for ERM, accumulated without storing examples when
/// the context space is small enough to histogram.
#[derive(Debug, Clone)]
pub struct ErmAccumulator {
    n: usize,
    /// `hist[2 * x + label]` for `n <= 16`.
    hist: Vec<u32>,
    examples: Vec<(u64, u8)>,
    count: usize,
}

impl ErmAccumulator {
    pub fn new(n: usize) -> Self {
        ErmAccumulator {
            n,
            hist: if n <= ENUMERATION_DIM { vec![0; 2 << n] } else { Vec::new() },
            examples: Vec::new(),
            count: 0,
        }
    }

    #[inline]
    pub fn push(&mut self, bits: u64, label: u8) {
        if self.n <= ENUMERATION_DIM {
            self.hist[(bits as usize) << 1 | label as usize] += 1;
        } else {
            self.examples.push((bits, label));
        }
        self.count += 1;
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Number of examples whose label differs from `c(x)`.
    pub fn disagreements(&self, c: CompiledConcept) -> u64 {
        if self.n <= ENUMERATION_DIM {
            let mut d = 0u64;
            for x in 0..(1usize << self.n) {
                let wrong = 1 - c.eval(x as u64) as usize;
                d += u64::from(self.hist[x << 1 | wrong]);
            }
            d
        } else {
            self.examples.iter().filter(|(x, l)| c.eval(*x) != *l).count() as u64
        }
    }

    /// Index of the minimum-disagreement concept (smallest index on ties)
    /// and its disagreement count.
    pub fn argmin(&self, class: &[CompiledConcept]) -> Result<(usize, u64)> {
        if class.is_empty() {
            return Err(Error::EmptyInput("concept class"));
        }
        if self.count == 0 {
            return Err(Error::EmptyInput("labeled sample"));
        }
        let mut best = (0, u64::MAX);
        for (i, c) in class.iter().enumerate() {
            let d = self.disagreements(*c);
            if d < best.1 {
                best = (i, d);
            }
        }
        Ok(best)
    }
}

/// Empirical risk minimisation on noisy labels over a finite class.
pub fn erm_cccn_learn(examples: &[NoisyLabeledExample], concept_class: &[Concept]) -> Result<Concept> {
    if examples.is_empty() {
        return Err(Error::EmptyInput("labeled sample"));
    }
    let n = examples[0].context.len();
    if let Some(e) = examples.iter().find(|e| e.context.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: e.context.len(),
        });
    }
    let mut acc = ErmAccumulator::new(n);
    for e in examples {
        acc.push(e.context.bits(), e.label);
    }
    let compiled: Vec<CompiledConcept> = concept_class.iter().map(Concept::compile).collect();
    let (i, _) = acc.argmin(&compiled)?;
    Ok(concept_class[i].clone())
}

/// Settings for the event-driven concept learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CnSettings {
    pub epsilon: f64,
    pub delta: f64,
    /// Leading constant of the sample size.
    pub constant: f64,
}

impl CnSettings {
    /// `ceil((C / (xi eps^2)) ln(2 |class| |grid| / delta))`.
    pub fn sample_size(&self, xi: f64, class_size: usize, grid_pairs: usize) -> usize {
        let m = self.constant / (xi * self.epsilon * self.epsilon)
            * (2.0 * class_size as f64 * grid_pairs as f64 / self.delta).ln();
        m.ceil().max(1.0) as usize
    }
}

/// Result of one grid pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum PairOutcome {
    Learned {
        concept: Concept,
        /// Empirical disagreement rate with the noisy labels.
        disagreement: f64,
    },
    Skipped {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridEntry {
    pub p_hat: f64,
    pub q_hat: f64,
    pub outcome: PairOutcome,
}

/// One entry per grid pair, in grid order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventLearning {
    pub entries: Vec<GridEntry>,
    pub skipped: usize,
    pub sample_size: usize,
    pub xi: f64,
}

impl EventLearning {
    /// Learned hypotheses in grid order (skipped pairs contribute nothing).
    pub fn hypotheses(&self) -> Vec<Concept> {
        self.entries
            .iter()
            .filter_map(|e| match &e.outcome {
                PairOutcome::Learned { concept, .. } => Some(concept.clone()),
                PairOutcome::Skipped { .. } => None,
            })
            .collect()
    }
}

/// Runs `Lab` + ERM for every grid pair on a fresh sample per pair.
pub fn learn_with_event(
    gen: &Gen<'_>,
    event: &Event,
    xi: f64,
    settings: &CnSettings,
    concept_class: &[Concept],
    seed: SeedPath,
) -> Result<EventLearning> {
    let grid = guess_grid(xi)?;
    if concept_class.is_empty() {
        return Err(Error::EmptyInput("concept class"));
    }
    let m = settings.sample_size(xi, concept_class.len(), grid.pairs.len());
    let compiled_event = event.compile();
    let compiled: Vec<CompiledConcept> = concept_class.iter().map(Concept::compile).collect();
    let entries: Vec<Result<GridEntry>> = grid
        .pairs
        .par_iter()
        .enumerate()
        .map(|(idx, (p_hat, q_hat))| {
            let outcome = match lab_parameters(*p_hat, *q_hat, xi) {
                Err(e @ (Error::GuardViolation { .. } | Error::DegenerateGuesses(_))) => PairOutcome::Skipped {
                    reason: e.to_string(),
                },
                Err(e) => return Err(e),
                Ok(params) => {
                    let mut rng = seed.child(idx as u64).stream();
                    let (i, d) = labeled_erm(gen, &compiled_event, &params, m, &compiled, &mut rng)?;
                    PairOutcome::Learned {
                        concept: concept_class[i].clone(),
                        disagreement: d as f64 / m as f64,
                    }
                }
            };
            Ok(GridEntry {
                p_hat: *p_hat,
                q_hat: *q_hat,
                outcome,
            })
        })
        .collect();
    let entries = entries.into_iter().collect::<Result<Vec<_>>>()?;
    let skipped = entries
        .iter()
        .filter(|e| matches!(e.outcome, PairOutcome::Skipped { .. }))
        .count();
    Ok(EventLearning {
        entries,
        skipped,
        sample_size: m,
        xi,
    })
}

fn labeled_erm<R: Rng>(
    gen: &Gen<'_>,
    event: &CompiledEvent,
    params: &LabParams,
    m: usize,
    class: &[CompiledConcept],
    rng: &mut R,
) -> Result<(usize, u64)> {
    let mut acc = ErmAccumulator::new(gen.n());
    let mut label_rng = crate::seed::Stream::from_rng(&mut *rng);
    gen.stream(m, rng, |pair| {
        let ex = label_with(event.contains(&pair.outcome), pair.context, params, &mut label_rng);
        acc.push(ex.context.bits(), ex.label);
    })?;
    acc.argmin(class)
}
