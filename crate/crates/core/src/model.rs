//! Contexts, concepts, target and hypothesis models, the sampling oracle and
//! the error functional.
//!
//! A target is `(c, P0, P1)` together with a context distribution `D`; the
//! oracle draws `x ~ D` and returns `(x, y)` with `y ~ P_{c(x)}`. A hypothesis
//! `(h, Q0, Q1)` predicts with `Q_{h(x)}` and its error is
//! `sum_{i,j} Pr_D[c(x)=i, h(x)=j] * KL(P_i || Q_j)`.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{kl_divergence, BoundednessBudget, DistributionSpec, OutcomeVector};
use crate::error::{Error, Result};
use crate::seed::SeedPath;

/// Largest supported context dimension (contexts are packed into a `u64`).
pub const MAX_CONTEXT_DIM: usize = 64;

/// Contexts with at most this many bits are enumerated for exact joint tables.
pub const ENUMERATION_DIM: usize = 16;

/// Default Monte Carlo size for error and probability estimates.
pub const DEFAULT_MC_SAMPLES: usize = 100_000;

/// A binary context of length `n`, packed little-endian: variable `i`
/// (1-based) lives in bit `i - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ContextVector {
    bits: u64,
    n: u8,
}

impl ContextVector {
    pub fn new(bits: u64, n: usize) -> Result<Self> {
        if n == 0 || n > MAX_CONTEXT_DIM {
            return Err(Error::invalid("n", format!("{n} not in [1, {MAX_CONTEXT_DIM}]")));
        }
        if n < 64 && bits >> n != 0 {
            return Err(Error::invalid("context", format!("bits {bits:#x} exceed length {n}")));
        }
        Ok(ContextVector { bits, n: n as u8 })
    }

    pub fn from_bits(values: &[u8]) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| **v > 1) {
            return Err(Error::invalid("context", format!("entry {v} is not binary")));
        }
        let bits = values.iter().enumerate().fold(0u64, |acc, (i, v)| acc | (u64::from(*v) << i));
        Self::new(bits, values.len())
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.n as usize
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Value of variable `i` (1-based).
    pub fn get(&self, i: usize) -> u8 {
        debug_assert!(i >= 1 && i <= self.len());
        ((self.bits >> (i - 1)) & 1) as u8
    }

    pub fn to_vec(&self) -> Vec<u8> {
        (1..=self.len()).map(|i| self.get(i)).collect()
    }
}

impl Serialize for ContextVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_vec().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ContextVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<u8>::deserialize(d)?;
        ContextVector::from_bits(&v).map_err(serde::de::Error::custom)
    }
}

/// A boolean concept over `{0,1}^n`. Variable indices are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Concept {
    ConstantZero,
    ConstantOne,
    Dictator { variable: usize },
    MonotoneConjunction { variables: Vec<usize> },
}

impl Concept {
    pub fn dictator(variable: usize) -> Self {
        Concept::Dictator { variable }
    }

    /// Conjunction over the given variables, sorted and deduplicated.
    pub fn conjunction(vars: &[usize]) -> Self {
        let mut variables = vars.to_vec();
        variables.sort_unstable();
        variables.dedup();
        Concept::MonotoneConjunction { variables }
    }

    pub fn variables(&self) -> Vec<usize> {
        match self {
            Concept::ConstantZero | Concept::ConstantOne => Vec::new(),
            Concept::Dictator { variable } => vec![*variable],
            Concept::MonotoneConjunction { variables } => variables.clone(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let vars = match self {
            Concept::ConstantZero | Concept::ConstantOne => return Ok(()),
            Concept::Dictator { variable } => vec![*variable],
            Concept::MonotoneConjunction { variables } => {
                if variables.is_empty() {
                    return Err(Error::invalid("concept", "a conjunction needs at least one variable"));
                }
                if variables.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::invalid("concept", "conjunction variables must be sorted and distinct"));
                }
                variables.clone()
            }
        };
        if let Some(v) = vars.iter().find(|v| **v == 0 || **v > n) {
            return Err(Error::invalid("concept", format!("variable {v} outside [1, {n}]")));
        }
        Ok(())
    }

    /// Compiled form for fast evaluation.
    pub fn compile(&self) -> CompiledConcept {
        match self {
            Concept::ConstantZero => CompiledConcept { mask: 0, never: true },
            Concept::ConstantOne => CompiledConcept { mask: 0, never: false },
            _ => CompiledConcept {
                mask: self.variables().iter().fold(0u64, |m, v| m | (1u64 << (v - 1))),
                never: false,
            },
        }
    }

    pub fn eval(&self, x: &ContextVector) -> u8 {
        self.compile().eval(x.bits())
    }
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Concept::ConstantZero => write!(f, "0"),
            Concept::ConstantOne => write!(f, "1"),
            Concept::Dictator { variable } => write!(f, "x{variable}"),
            Concept::MonotoneConjunction { variables } => {
                let parts: Vec<String> = variables.iter().map(|v| format!("x{v}")).collect();
                write!(f, "{}", parts.join("&"))
            }
        }
    }
}

/// A concept as a bitmask: true iff every masked bit is set (and not `never`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CompiledConcept {
    pub mask: u64,
    pub never: bool,
}

impl CompiledConcept {
    #[inline]
    pub fn eval(&self, bits: u64) -> u8 {
        u8::from(!self.never && bits & self.mask == self.mask)
    }
}

/// The finite concept class used by the learners: both constants, all
/// dictators, then monotone conjunctions of size 2..=s in lexicographic order.
pub fn concept_class(n: usize, s: usize) -> Vec<Concept> {
    let mut out = vec![Concept::ConstantZero, Concept::ConstantOne];
    out.extend((1..=n).map(Concept::dictator));
    let mut combo = Vec::new();
    for size in 2..=s.min(n) {
        push_combinations(1, n, size, &mut combo, &mut out);
    }
    out
}

fn push_combinations(start: usize, n: usize, size: usize, combo: &mut Vec<usize>, out: &mut Vec<Concept>) {
    if combo.len() == size {
        out.push(Concept::MonotoneConjunction { variables: combo.clone() });
        return;
    }
    for v in start..=n {
        combo.push(v);
        push_combinations(v + 1, n, size, combo, out);
        combo.pop();
    }
}

/// Distribution of contexts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ContextDistribution {
    Uniform,
    IndependentProduct { biases: Vec<f64> },
}

impl ContextDistribution {
    pub fn validate(&self, n: usize) -> Result<()> {
        if let ContextDistribution::IndependentProduct { biases } = self {
            if biases.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: biases.len(),
                });
            }
            if let Some(p) = biases.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::invalid("biases", format!("context bias {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// `Pr[x_i = 1]` for variable `i` (1-based).
    pub fn bias(&self, i: usize) -> f64 {
        match self {
            ContextDistribution::Uniform => 0.5,
            ContextDistribution::IndependentProduct { biases } => biases[i - 1],
        }
    }

    /// `Pr[x_i = 1 for every bit in mask]`.
    pub fn prob_all_set(&self, mask: u64) -> f64 {
        (0..64).filter(|b| mask >> b & 1 == 1).map(|b| self.bias(b + 1)).product()
    }

    /// Probability of one packed context.
    pub fn prob(&self, bits: u64, n: usize) -> f64 {
        (1..=n)
            .map(|i| {
                let p = self.bias(i);
                if bits >> (i - 1) & 1 == 1 {
                    p
                } else {
                    1.0 - p
                }
            })
            .product()
    }

    #[inline]
    pub fn sample_bits<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> u64 {
        match self {
            ContextDistribution::Uniform => {
                let r: u64 = rng.random();
                if n >= 64 {
                    r
                } else {
                    r & ((1u64 << n) - 1)
                }
            }
            ContextDistribution::IndependentProduct { biases } => biases
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, p)| acc | (u64::from(rng.random::<f64>() < *p) << i)),
        }
    }
}

/// Ground truth `(c, P0, P1, D)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetModel {
    pub n: usize,
    pub concept: Concept,
    pub p0: DistributionSpec,
    pub p1: DistributionSpec,
    pub context_dist: ContextDistribution,
}

impl TargetModel {
    pub fn validate(&self, lambda: f64) -> Result<()> {
        if self.n == 0 || self.n > MAX_CONTEXT_DIM {
            return Err(Error::invalid("n", format!("{} not in [1, {MAX_CONTEXT_DIM}]", self.n)));
        }
        self.concept.validate(self.n)?;
        self.context_dist.validate(self.n)?;
        self.p0.validate(lambda)?;
        self.p1.validate(lambda)?;
        self.p0.check_compatible(&self.p1)
    }

    pub fn spec(&self, label: u8) -> &DistributionSpec {
        if label == 1 {
            &self.p1
        } else {
            &self.p0
        }
    }

    /// `Pr_D[c(x) = 1]`.
    pub fn weight1(&self) -> Result<f64> {
        let t = joint_table(&self.context_dist, self.n, &self.concept, &Concept::ConstantOne)?;
        Ok(t[1][1])
    }

    /// Draws one pair into `out`.
    #[inline]
    pub fn draw_into<R: Rng + ?Sized>(&self, compiled: CompiledConcept, rng: &mut R, out: &mut LabeledPair) {
        let bits = self.context_dist.sample_bits(self.n, rng);
        out.context = ContextVector { bits, n: self.n as u8 };
        self.spec(compiled.eval(bits)).sample_into(rng, &mut out.outcome);
    }
}

/// Learner output `(h, Q0, Q1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisModel {
    pub hypothesis: Concept,
    pub q0: DistributionSpec,
    pub q1: DistributionSpec,
}

impl HypothesisModel {
    pub fn spec(&self, label: u8) -> &DistributionSpec {
        if label == 1 {
            &self.q1
        } else {
            &self.q0
        }
    }
}

/// One oracle draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub context: ContextVector,
    pub outcome: OutcomeVector,
}

impl LabeledPair {
    pub fn empty() -> Self {
        LabeledPair {
            context: ContextVector::default(),
            outcome: OutcomeVector::Discrete(Vec::new()),
        }
    }
}

/// Draws `count` i.i.d. pairs from the target.
pub fn gen_sample<R: Rng + ?Sized>(target: &TargetModel, count: usize, rng: &mut R) -> Vec<LabeledPair> {
    let compiled = target.concept.compile();
    (0..count)
        .map(|_| {
            let mut pair = LabeledPair::empty();
            target.draw_into(compiled, rng, &mut pair);
            pair
        })
        .collect()
}

/// Thread-safe draw counter with a hard budget.
#[derive(Debug)]
pub struct DrawMeter {
    used: AtomicU64,
    budget: u64,
}

impl DrawMeter {
    pub fn new(budget: u64) -> Self {
        DrawMeter {
            used: AtomicU64::new(0),
            budget,
        }
    }

    /// Reserves `n` draws or fails without reserving anything.
    pub fn charge(&self, n: u64) -> Result<()> {
        let mut current = self.used.load(Ordering::Relaxed);
        loop {
            let next = current.saturating_add(n);
            if next > self.budget {
                return Err(Error::BudgetExhausted {
                    requested: n,
                    used: current,
                    budget: self.budget,
                });
            }
            match self.used.compare_exchange_weak(current, next, Ordering::Relaxed, Ordering::Relaxed) {
                Ok(_) => return Ok(()),
                Err(actual) => current = actual,
            }
        }
    }

    pub fn used(&self) -> u64 {
        self.used.load(Ordering::Relaxed)
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }
}

/// The metered sampling oracle handed to learners. Learners see pairs only.
#[derive(Debug)]
pub struct Gen<'a> {
    target: &'a TargetModel,
    compiled: CompiledConcept,
    meter: DrawMeter,
}

impl<'a> Gen<'a> {
    pub fn new(target: &'a TargetModel, budget: u64) -> Self {
        Gen {
            target,
            compiled: target.concept.compile(),
            meter: DrawMeter::new(budget),
        }
    }

    pub fn n(&self) -> usize {
        self.target.n
    }

    pub fn draws_used(&self) -> u64 {
        self.meter.used()
    }

    pub fn budget(&self) -> u64 {
        self.meter.budget()
    }

    /// Draws `count` pairs.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<LabeledPair>> {
        let mut out = Vec::with_capacity(count);
        self.stream(count, rng, |p| out.push(p.clone()))?;
        Ok(out)
    }

    /// Draws `count` pairs, handing each to `visit` through a reused buffer.
    pub fn stream<R: Rng + ?Sized, F: FnMut(&LabeledPair)>(&self, count: usize, rng: &mut R, mut visit: F) -> Result<()> {
        self.meter.charge(count as u64)?;
        let mut pair = LabeledPair::empty();
        for _ in 0..count {
            self.target.draw_into(self.compiled, rng, &mut pair);
            visit(&pair);
        }
        Ok(())
    }
}

/// `t[i][j] = Pr_D[c(x) = i, h(x) = j]`.
pub type JointTable = [[f64; 2]; 2];

/// Exact joint table. Enumerates `{0,1}^n` for `n <= 16`; otherwise uses the
/// closed form for monotone conjunctions under a product distribution, which
/// covers every concept in the shipped class.
pub fn joint_table(dist: &ContextDistribution, n: usize, c: &Concept, h: &Concept) -> Result<JointTable> {
    let (cc, hc) = (c.compile(), h.compile());
    let mut t = [[0.0; 2]; 2];
    if n <= ENUMERATION_DIM {
        for bits in 0..(1u64 << n) {
            let p = dist.prob(bits, n);
            t[cc.eval(bits) as usize][hc.eval(bits) as usize] += p;
        }
        return Ok(t);
    }
    let pc = if cc.never { 0.0 } else { dist.prob_all_set(cc.mask) };
    let ph = if hc.never { 0.0 } else { dist.prob_all_set(hc.mask) };
    let pboth = if cc.never || hc.never { 0.0 } else { dist.prob_all_set(cc.mask | hc.mask) };
    t[1][1] = pboth;
    t[1][0] = pc - pboth;
    t[0][1] = ph - pboth;
    t[0][0] = 1.0 - pc - ph + pboth;
    Ok(t)
}

/// `Pr_D[h(x) != c(x)]`.
pub fn classification_error(target: &TargetModel, h: &Concept) -> Result<f64> {
    let t = joint_table(&target.context_dist, target.n, &target.concept, h)?;
    Ok(t[0][1] + t[1][0])
}

/// How `model_error` should be evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalMode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

/// A value with an optional Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: Option<f64>,
}

/// `err(T) = E_x[KL(P_{c(x)} || Q_{h(x)})]` in bits.
pub fn model_error(target: &TargetModel, hyp: &HypothesisModel, mode: EvalMode) -> Result<Estimate> {
    let mut kl = [[0.0; 2]; 2];
    for i in 0..2u8 {
        for j in 0..2u8 {
            kl[i as usize][j as usize] = kl_divergence(target.spec(i), hyp.spec(j))?;
        }
    }
    match mode {
        EvalMode::Exact => {
            let t = joint_table(&target.context_dist, target.n, &target.concept, &hyp.hypothesis)?;
            let mut value = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    if t[i][j] > 0.0 {
                        value += t[i][j] * kl[i][j];
                    }
                }
            }
            Ok(Estimate {
                value: value.max(0.0),
                std_error: None,
            })
        }
        EvalMode::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::invalid("samples", "Monte Carlo needs at least two samples"));
            }
            let (cc, hc) = (target.concept.compile(), hyp.hypothesis.compile());
            let mut rng = SeedPath::root(seed).stream();
            let (mut sum, mut sumsq) = (0.0, 0.0);
            for _ in 0..samples {
                let bits = target.context_dist.sample_bits(target.n, &mut rng);
                let v = kl[cc.eval(bits) as usize][hc.eval(bits) as usize];
                sum += v;
                sumsq += v * v;
            }
            let m = samples as f64;
            let mean = sum / m;
            let var = ((sumsq - m * mean * mean) / (m - 1.0)).max(0.0);
            Ok(Estimate {
                value: mean,
                std_error: Some((var / m).sqrt()),
            })
        }
    }
}

/// `sum_{(x,y)} -log2 Q_{h(x)}(y)` with the clamped evaluator.
pub fn empirical_log_loss(hyp: &HypothesisModel, sample: &[LabeledPair], budget: &BoundednessBudget) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptyInput("log-loss sample"));
    }
    hyp.q0.check_compatible(&hyp.q1)?;
    let hc = hyp.hypothesis.compile();
    let mut loss = 0.0;
    for pair in sample {
        let spec = hyp.spec(hc.eval(pair.context.bits()));
        loss -= spec.log_density(&pair.outcome, budget)?;
    }
    Ok(loss)
}

/// `E_x[H(P_{c(x)})]` in bits.
pub fn expected_entropy(target: &TargetModel) -> Result<f64> {
    let w1 = target.weight1()?;
    Ok((1.0 - w1) * target.p0.entropy() + w1 * target.p1.entropy())
}

/// Log-loss minus entropy, per draw: an unbiased estimate of `err(T)` when the
/// densities are unclamped. Returns the estimate with its standard error.
pub fn decomposition_estimate<R: Rng + ?Sized>(
    target: &TargetModel,
    hyp: &HypothesisModel,
    samples: usize,
    rng: &mut R,
) -> Result<Estimate> {
    if samples < 2 {
        return Err(Error::invalid("samples", "need at least two samples"));
    }
    hyp.q0.check_compatible(&target.p0)?;
    let (cc, hc) = (target.concept.compile(), hyp.hypothesis.compile());
    let h = [target.p0.entropy(), target.p1.entropy()];
    let mut pair = LabeledPair::empty();
    let (mut sum, mut sumsq) = (0.0, 0.0);
    for _ in 0..samples {
        target.draw_into(cc, rng, &mut pair);
        let bits = pair.context.bits();
        let v = -hyp.spec(hc.eval(bits)).log_density_unchecked(&pair.outcome) - h[cc.eval(bits) as usize];
        sum += v;
        sumsq += v * v;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = ((sumsq - m * mean * mean) / (m - 1.0)).max(0.0);
    Ok(Estimate {
        value: mean,
        std_error: Some((var / m).sqrt()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::bernoulli_kl;

    fn bern(b: &[f64]) -> DistributionSpec {
        DistributionSpec::BernoulliProduct { biases: b.to_vec() }
    }

    fn target(n: usize, c: Concept, p0: &[f64], p1: &[f64]) -> TargetModel {
        TargetModel {
            n,
            concept: c,
            p0: bern(p0),
            p1: bern(p1),
            context_dist: ContextDistribution::Uniform,
        }
    }

    #[test]
    fn concept_class_order_and_size() {
        let class = concept_class(10, 2);
        assert_eq!(class.len(), 57);
        assert_eq!(class[0], Concept::ConstantZero);
        assert_eq!(class[1], Concept::ConstantOne);
        assert_eq!(class[2], Concept::dictator(1));
        assert_eq!(class[12], Concept::conjunction(&[1, 2]));
        assert_eq!(class[56], Concept::conjunction(&[9, 10]));
        assert!(class.iter().all(|c| c.validate(10).is_ok()));
    }

    #[test]
    fn concept_validation() {
        assert!(Concept::dictator(0).validate(3).is_err());
        assert!(Concept::dictator(4).validate(3).is_err());
        assert!(Concept::MonotoneConjunction { variables: vec![2, 1] }.validate(3).is_err());
        assert!(Concept::MonotoneConjunction { variables: vec![] }.validate(3).is_err());
    }

    #[test]
    fn context_roundtrip() {
        let x = ContextVector::from_bits(&[1, 0, 1]).unwrap();
        assert_eq!(x.get(1), 1);
        assert_eq!(x.get(2), 0);
        assert_eq!(x.to_vec(), vec![1, 0, 1]);
        assert!(ContextVector::from_bits(&[2]).is_err());
        assert_eq!(Concept::conjunction(&[1, 3]).eval(&x), 1);
        assert_eq!(Concept::conjunction(&[1, 2]).eval(&x), 0);
    }

    #[test]
    fn constant_zero_target_draws_from_p0() {
        let t = target(4, Concept::ConstantZero, &[0.2, 0.7], &[0.9, 0.1]);
        let m = 100_000;
        let mut rng = SeedPath::root(5).stream();
        let sample = gen_sample(&t, m, &mut rng);
        for (j, p) in [0.2, 0.7].iter().enumerate() {
            let ones = sample.iter().filter(|s| s.outcome.as_discrete().unwrap()[j] == 1).count();
            let se = (p * (1.0 - p) / m as f64).sqrt();
            assert!((ones as f64 / m as f64 - p).abs() <= 3.0 * se);
        }
    }

    #[test]
    fn uniform_contexts_are_balanced() {
        let t = target(3, Concept::dictator(1), &[0.5], &[0.5]);
        let mut rng = SeedPath::root(6).stream();
        let sample = gen_sample(&t, 100_000, &mut rng);
        let frac = sample.iter().filter(|s| s.context.get(1) == 1).count() as f64 / 1e5;
        assert!((frac - 0.5).abs() <= 0.005);
    }

    #[test]
    fn gen_sample_is_deterministic() {
        let t = target(4, Concept::conjunction(&[1, 2]), &[0.1, 0.2, 0.3, 0.4], &[0.9, 0.8, 0.7, 0.6]);
        let a = gen_sample(&t, 3, &mut SeedPath::root(42).stream());
        let b = gen_sample(&t, 3, &mut SeedPath::root(42).stream());
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn model_error_examples() {
        let t = target(2, Concept::dictator(1), &[0.25], &[0.75]);
        let same = HypothesisModel {
            hypothesis: t.concept.clone(),
            q0: t.p0.clone(),
            q1: t.p1.clone(),
        };
        assert_eq!(model_error(&t, &same, EvalMode::Exact).unwrap().value, 0.0);

        let crossed = HypothesisModel {
            hypothesis: Concept::dictator(2),
            ..same.clone()
        };
        let expected = 0.25 * bernoulli_kl(0.25, 0.75) + 0.25 * bernoulli_kl(0.75, 0.25);
        let err = model_error(&t, &crossed, EvalMode::Exact).unwrap().value;
        assert!((err - expected).abs() < 1e-12);
        assert!((err - 0.5 * 3f64.log2() * 0.5).abs() < 1e-12);
        assert!((err - 0.3962).abs() < 1e-4);

        let mc = model_error(&t, &crossed, EvalMode::MonteCarlo { samples: 100_000, seed: 1 }).unwrap();
        assert!((mc.value - err).abs() <= 3.0 * mc.std_error.unwrap());

        let flat = target(1, Concept::dictator(1), &[0.4], &[0.4]);
        let h0 = HypothesisModel {
            hypothesis: Concept::ConstantZero,
            q0: bern(&[0.4]),
            q1: bern(&[0.9]),
        };
        assert_eq!(model_error(&flat, &h0, EvalMode::Exact).unwrap().value, 0.0);
    }

    #[test]
    fn closed_form_joint_matches_enumeration() {
        let biases: Vec<f64> = (0..17).map(|i| 0.2 + 0.03 * i as f64).collect();
        let d = ContextDistribution::IndependentProduct { biases: biases.clone() };
        let dshort = ContextDistribution::IndependentProduct { biases: biases[..16].to_vec() };
        for (c, h) in [
            (Concept::conjunction(&[1, 2]), Concept::conjunction(&[2, 5])),
            (Concept::dictator(3), Concept::ConstantZero),
            (Concept::ConstantOne, Concept::conjunction(&[4, 9])),
        ] {
            let a = joint_table(&d, 17, &c, &h).unwrap();
            let b = joint_table(&dshort, 16, &c, &h).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert!((a[i][j] - b[i][j]).abs() < 1e-12, "{c} vs {h}");
                }
            }
        }
    }

    #[test]
    fn log_loss_examples() {
        let budget = BoundednessBudget::discrete(1, 1e-3);
        let hyp = HypothesisModel {
            hypothesis: Concept::ConstantZero,
            q0: bern(&[0.5]),
            q1: bern(&[0.5]),
        };
        let pair = LabeledPair {
            context: ContextVector::from_bits(&[1]).unwrap(),
            outcome: OutcomeVector::Discrete(vec![1]),
        };
        let one = empirical_log_loss(&hyp, std::slice::from_ref(&pair), &budget).unwrap();
        assert_eq!(one, 1.0);
        let two = empirical_log_loss(&hyp, &[pair.clone(), pair], &budget).unwrap();
        assert_eq!(two, 2.0 * one);
        assert!(empirical_log_loss(&hyp, &[], &budget).is_err());
    }

    #[test]
    fn log_loss_of_truth_matches_entropy() {
        let t = target(3, Concept::conjunction(&[1, 2]), &[0.2, 0.5, 0.6], &[0.8, 0.3, 0.1]);
        let hyp = HypothesisModel {
            hypothesis: t.concept.clone(),
            q0: t.p0.clone(),
            q1: t.p1.clone(),
        };
        let m = 100_000;
        let sample = gen_sample(&t, m, &mut SeedPath::root(8).stream());
        let budget = BoundednessBudget::discrete(3, 1e-3);
        let losses: Vec<f64> = sample
            .iter()
            .map(|p| empirical_log_loss(&hyp, std::slice::from_ref(p), &budget).unwrap())
            .collect();
        let mean = losses.iter().sum::<f64>() / m as f64;
        let var = losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        let h = expected_entropy(&t).unwrap();
        assert!((mean - h).abs() <= 3.0 * (var / m as f64).sqrt(), "{mean} vs {h}");
    }

    #[test]
    fn draw_meter_refuses_overdraw() {
        let t = target(2, Concept::ConstantZero, &[0.5], &[0.5]);
        let gen = Gen::new(&t, 10);
        let mut rng = SeedPath::root(1).stream();
        assert_eq!(gen.sample(7, &mut rng).unwrap().len(), 7);
        assert!(matches!(gen.sample(4, &mut rng), Err(Error::BudgetExhausted { requested: 4, used: 7, budget: 10 })));
        assert_eq!(gen.draws_used(), 7);
    }
}
