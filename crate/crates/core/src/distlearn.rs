//! Robust list-output distribution learning.
//!
//! A single run of the base learner on a slightly perturbed stream lands
//! close to the unperturbed target with constant probability (Le Cam's
//! two-point bound); repeating it `r` times and returning every fit turns
//! that into a list containing a good fit with probability `1 - delta`.

use std::f64::consts::LN_2;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{discrete_from_counts, fit_single, kl_divergence, BoundednessBudget, DistributionSpec, Family, OutcomeVector};
use crate::error::{Error, Result};
use crate::model::{Concept, Gen, HypothesisModel};
use crate::seed::SeedPath;

/// Amplification parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessBudget {
    /// Sample size of one base-learner run.
    pub m_p: usize,
    /// Number of independent runs.
    pub r: usize,
    /// Perturbation tolerance `1 / (2 m_p)` in bits.
    pub kl_tolerance: f64,
}

/// Smallest `r` with `(3/4)^r <= delta`, i.e. `ceil(ln(1/delta) / ln(4/3))`.
pub fn amplification_count(delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", format!("{delta} not in (0, 1)")));
    }
    let mut r = 1;
    while 0.75f64.powi(r as i32) > delta {
        r += 1;
    }
    Ok(r)
}

impl RobustnessBudget {
    pub fn new(m_p: usize, delta: f64) -> Result<Self> {
        if m_p == 0 {
            return Err(Error::invalid("m_p", "must be positive"));
        }
        if delta > 0.25 {
            return Err(Error::invalid("delta", format!("{delta} exceeds 1/4")));
        }
        Ok(RobustnessBudget {
            m_p,
            r: amplification_count(delta)?,
            kl_tolerance: 1.0 / (2.0 * m_p as f64),
        })
    }
}

/// Fits one spec per consecutive chunk of `m_p` outcomes, keeping at most
/// `r` fits. Only sufficient statistics are stored.
#[derive(Debug, Clone)]
pub struct ChunkedFitter {
    family: Family,
    bounds: BoundednessBudget,
    m_p: usize,
    r: usize,
    stats: Vec<f64>,
    in_chunk: usize,
    seen: usize,
    fits: Vec<DistributionSpec>,
}

impl ChunkedFitter {
    pub fn new(family: &Family, bounds: &BoundednessBudget, m_p: usize, r: usize) -> Self {
        let width = family.k() * family.alphabet().unwrap_or(1);
        ChunkedFitter {
            family: family.clone(),
            bounds: *bounds,
            m_p,
            r,
            stats: vec![0.0; width],
            in_chunk: 0,
            seen: 0,
            fits: Vec::with_capacity(r),
        }
    }

    pub fn is_full(&self) -> bool {
        self.fits.len() >= self.r
    }

    pub fn seen(&self) -> usize {
        self.seen
    }

    #[inline]
    pub fn push(&mut self, y: &OutcomeVector) {
        self.seen += 1;
        if self.is_full() {
            return;
        }
        match (y, self.family.alphabet()) {
            (OutcomeVector::Discrete(v), Some(b)) => {
                for (j, s) in v.iter().enumerate() {
                    self.stats[j * b + *s as usize] += 1.0;
                }
            }
            (OutcomeVector::Real(v), None) => {
                for (acc, x) in self.stats.iter_mut().zip(v) {
                    *acc += x;
                }
            }
            _ => unreachable!("outcome kind checked by the oracle"),
        }
        self.in_chunk += 1;
        if self.in_chunk == self.m_p {
            let spec = self.current_fit();
            self.fits.push(spec);
            self.stats.iter_mut().for_each(|s| *s = 0.0);
            self.in_chunk = 0;
        }
    }

    fn current_fit(&self) -> DistributionSpec {
        let m = self.in_chunk as f64;
        match &self.family {
            Family::SphericalGaussian { sigmas, mean_range } => DistributionSpec::SphericalGaussian {
                means: self.stats.iter().map(|s| (s / m).clamp(mean_range[0], mean_range[1])).collect(),
                sigmas: sigmas.clone(),
            },
            _ => discrete_from_counts(&self.family, &self.stats, m, self.bounds.lambda),
        }
    }

    /// Completed fits (possibly fewer than `r`).
    pub fn finish(self) -> Vec<DistributionSpec> {
        self.fits
    }
}

/// Runs the base learner on `r` disjoint chunks of `m_p` outcomes.
pub fn robust_learn_list(
    sample: &[OutcomeVector],
    family: &Family,
    budget: &RobustnessBudget,
    bounds: &BoundednessBudget,
) -> Result<Vec<DistributionSpec>> {
    let needed = budget.r * budget.m_p;
    if sample.len() < needed {
        return Err(Error::InsufficientSamples {
            needed,
            available: sample.len(),
        });
    }
    sample
        .chunks_exact(budget.m_p)
        .take(budget.r)
        .map(|chunk| fit_single(family, chunk, bounds))
        .collect()
}

/// Shared settings of the distribution-learning stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistSettings {
    pub family: Family,
    pub bounds: BoundednessBudget,
    pub robustness: RobustnessBudget,
    /// Target accuracy of the final model.
    pub epsilon: f64,
    /// Cap on the draws of one separate-and-learn call.
    pub max_draws: usize,
}

impl DistSettings {
    /// Smallest side probability worth learning, `epsilon / (2M)`.
    pub fn side_floor(&self) -> f64 {
        self.epsilon / (2.0 * self.bounds.m_cap)
    }

    /// Uncapped draw count `4 r m_p / floor`.
    pub fn separate_draws_theoretical(&self) -> f64 {
        4.0 * self.robustness.r as f64 * self.robustness.m_p as f64 / self.side_floor()
    }

    pub fn separate_draws(&self) -> usize {
        (self.separate_draws_theoretical().ceil() as usize).min(self.max_draws)
    }

    /// Hypothesis error below which both sides are close enough to a single
    /// component: `epsilon / (2 M m_p)`.
    pub fn hypothesis_error_threshold(&self) -> f64 {
        self.epsilon / (2.0 * self.bounds.m_cap * self.robustness.m_p as f64)
    }
}

/// Output of [`separate_and_learn`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparateOutcome {
    pub models: Vec<HypothesisModel>,
    /// Points routed to each side by `h`.
    pub side_sizes: [usize; 2],
    /// Fits per side; `0` means the default spec was used.
    pub side_fits: [usize; 2],
    pub draws: usize,
}

/// Splits oracle draws by `h(x)` and learns each side robustly.
///
/// A side with at least `r m_p` points yields `r` fits; one with at least
/// `m_p` points yields `floor(n / m_p)` fits; a starved side yields the
/// family's default spec.
pub fn separate_and_learn(gen: &Gen<'_>, h: &Concept, settings: &DistSettings, seed: SeedPath) -> Result<SeparateOutcome> {
    let rb = &settings.robustness;
    let n = settings.separate_draws();
    let hc = h.compile();
    let mut fitters = [
        ChunkedFitter::new(&settings.family, &settings.bounds, rb.m_p, rb.r),
        ChunkedFitter::new(&settings.family, &settings.bounds, rb.m_p, rb.r),
    ];
    let mut rng = seed.stream();
    gen.stream(n, &mut rng, |pair| {
        fitters[hc.eval(pair.context.bits()) as usize].push(&pair.outcome);
    })?;
    let side_sizes = [fitters[0].seen(), fitters[1].seen()];
    let [f0, f1] = fitters;
    let mut lists = [f0.finish(), f1.finish()];
    let side_fits = [lists[0].len(), lists[1].len()];
    for list in &mut lists {
        if list.is_empty() {
            list.push(settings.family.default_spec());
        }
    }
    let mut models = Vec::with_capacity(lists[0].len() * lists[1].len());
    for q0 in &lists[0] {
        for q1 in &lists[1] {
            models.push(HypothesisModel {
                hypothesis: h.clone(),
                q0: q0.clone(),
                q1: q1.clone(),
            });
        }
    }
    Ok(SeparateOutcome {
        models,
        side_sizes,
        side_fits,
        draws: n,
    })
}

/// Robust list learning on the unconditional outcome stream.
pub fn direct_unhealthy_learn(gen: &Gen<'_>, settings: &DistSettings, seed: SeedPath) -> Result<Vec<DistributionSpec>> {
    let rb = &settings.robustness;
    let mut fitter = ChunkedFitter::new(&settings.family, &settings.bounds, rb.m_p, rb.r);
    let mut rng = seed.stream();
    gen.stream(rb.r * rb.m_p, &mut rng, |pair| fitter.push(&pair.outcome))?;
    Ok(fitter.finish())
}

/// `g = max(2 M m_p / eps, 2 m_p)`; the default divergence threshold is `1/g`.
pub fn direct_threshold_g(m_cap: f64, m_p: usize, epsilon: f64) -> f64 {
    (2.0 * m_cap * m_p as f64 / epsilon).max(2.0 * m_p as f64)
}

/// Result of the two-point testing harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeCamReport {
    pub m: usize,
    /// `KL(Q0 || Q1)` in bits.
    pub kl: f64,
    pub trials: usize,
    /// Measured `Pr_{Q0}[A != 0]`.
    pub err0: f64,
    /// Measured `Pr_{Q1}[A != 1]`.
    pub err1: f64,
    /// `1 - sqrt(m KL ln2 / 2)`.
    pub bound: f64,
    /// Standard error of `err0 + err1`.
    pub std_error: f64,
}

impl LeCamReport {
    pub fn sum(&self) -> f64 {
        self.err0 + self.err1
    }
}

/// `1 - sqrt(m KL / 2)` with KL converted from bits to nats.
pub fn lecam_bound(m: usize, kl_bits: f64) -> f64 {
    1.0 - (m as f64 * kl_bits * LN_2 / 2.0).sqrt()
}

/// Two-point test built from the base learner: fit `m` draws and answer `0`
/// iff the fit is within `epsilon` of `Q0`.
#[allow(clippy::too_many_arguments)]
pub fn lecam_two_point(
    q0: &DistributionSpec,
    q1: &DistributionSpec,
    family: &Family,
    m: usize,
    epsilon: f64,
    trials: usize,
    bounds: &BoundednessBudget,
    seed: SeedPath,
) -> Result<LeCamReport> {
    let kl = kl_divergence(q0, q1)?;
    let run = |source: &DistributionSpec, stream: SeedPath| -> Result<usize> {
        let mut accepts = 0;
        for t in 0..trials {
            let mut rng = stream.child(t as u64).stream();
            let sample: Vec<OutcomeVector> = (0..m).map(|_| source.sample(&mut rng)).collect();
            let fit = fit_single(family, &sample, bounds)?;
            if kl_divergence(q0, &fit)? <= epsilon {
                accepts += 1;
            }
        }
        Ok(accepts)
    };
    let a0 = run(q0, seed.child(0))?;
    let a1 = run(q1, seed.child(1))?;
    let t = trials as f64;
    let err0 = (trials - a0) as f64 / t;
    let err1 = a1 as f64 / t;
    Ok(LeCamReport {
        m,
        kl,
        trials,
        err0,
        err1,
        bound: lecam_bound(m, kl),
        std_error: ((err0 * (1.0 - err0) + err1 * (1.0 - err1)) / t).sqrt(),
    })
}

/// Frequency with which one base-learner run on `m` draws from `q1` lands
/// within `epsilon` of `q0`.
#[allow(clippy::too_many_arguments)]
pub fn stability_frequency(
    q0: &DistributionSpec,
    q1: &DistributionSpec,
    family: &Family,
    m: usize,
    epsilon: f64,
    trials: usize,
    bounds: &BoundednessBudget,
    seed: SeedPath,
) -> Result<f64> {
    let mut hits = 0;
    for t in 0..trials {
        let mut rng = seed.child(t as u64).stream();
        let sample: Vec<OutcomeVector> = (0..m).map(|_| q1.sample(&mut rng)).collect();
        if kl_divergence(q0, &fit_single(family, &sample, bounds)?)? <= epsilon {
            hits += 1;
        }
    }
    Ok(hits as f64 / trials as f64)
}

/// Bernoulli product obtained from `base` by moving coordinate `j` so that
/// `KL(base || result)` equals `kl_bits` (found by bisection).
pub fn perturb_to_kl(base: &[f64], j: usize, kl_bits: f64, lambda: f64) -> Result<DistributionSpec> {
    let p = base[j];
    let f = |q: f64| crate::distributions::bernoulli_kl(p, q);
    let hi = 1.0 - lambda;
    if kl_bits > f(hi) {
        return Err(Error::invalid("kl", format!("{kl_bits} bits not reachable from bias {p}")));
    }
    let (mut lo, mut up) = (p, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + up);
        if f(mid) < kl_bits {
            lo = mid;
        } else {
            up = mid;
        }
    }
    let mut biases = base.to_vec();
    biases[j] = 0.5 * (lo + up);
    Ok(DistributionSpec::BernoulliProduct { biases })
}

/// Draws `count` outcomes from `dist`.
pub fn draw_outcomes<R: Rng + ?Sized>(dist: &DistributionSpec, count: usize, rng: &mut R) -> Vec<OutcomeVector> {
    (0..count).map(|_| dist.sample(rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{model_error, ContextDistribution, EvalMode, TargetModel};

    #[test]
    fn amplification_counts() {
        assert_eq!(amplification_count(0.1).unwrap(), 9);
        assert_eq!(amplification_count(0.25).unwrap(), 5);
        assert_eq!(amplification_count(0.2).unwrap(), 6);
        assert!(RobustnessBudget::new(100, 0.3).is_err());
        let b = RobustnessBudget::new(2000, 0.1).unwrap();
        assert_eq!(b.r, 9);
        assert_eq!(b.kl_tolerance, 1.0 / 4000.0);
    }

    #[test]
    fn robust_list_needs_enough_samples() {
        let family = Family::BernoulliProduct { k: 2 };
        let bounds = BoundednessBudget::discrete(2, 1e-3);
        let budget = RobustnessBudget::new(10, 0.25).unwrap();
        let sample = vec![OutcomeVector::Discrete(vec![0, 1]); 49];
        assert!(matches!(
            robust_learn_list(&sample, &family, &budget, &bounds),
            Err(Error::InsufficientSamples { needed: 50, available: 49 })
        ));
        let sample = vec![OutcomeVector::Discrete(vec![0, 1]); 50];
        assert_eq!(robust_learn_list(&sample, &family, &budget, &bounds).unwrap().len(), 5);
    }

    #[test]
    fn chunked_fitter_matches_fit_single() {
        let family = Family::BaryProduct { k: 3, b: 3 };
        let bounds = BoundednessBudget::discrete(3, 1e-3);
        let spec = DistributionSpec::BaryProduct {
            rows: vec![vec![0.2, 0.3, 0.5], vec![0.1, 0.1, 0.8], vec![0.6, 0.2, 0.2]],
        };
        let sample = draw_outcomes(&spec, 300, &mut SeedPath::root(1).stream());
        let mut fitter = ChunkedFitter::new(&family, &bounds, 100, 2);
        sample.iter().for_each(|y| fitter.push(y));
        let fits = fitter.finish();
        assert_eq!(fits.len(), 2);
        for (i, fit) in fits.iter().enumerate() {
            let direct = fit_single(&family, &sample[i * 100..(i + 1) * 100], &bounds).unwrap();
            assert_eq!(&direct, fit);
        }
    }

    fn target(concept: Concept) -> TargetModel {
        TargetModel {
            n: 6,
            concept,
            p0: DistributionSpec::BernoulliProduct { biases: vec![0.2; 4] },
            p1: DistributionSpec::BernoulliProduct { biases: vec![0.8; 4] },
            context_dist: ContextDistribution::Uniform,
        }
    }

    fn settings() -> DistSettings {
        let family = Family::BernoulliProduct { k: 4 };
        DistSettings {
            bounds: BoundednessBudget::discrete(4, 1e-3),
            robustness: RobustnessBudget::new(500, 0.1).unwrap(),
            epsilon: 0.1,
            max_draws: 40_000,
            family,
        }
    }

    #[test]
    fn separate_with_true_concept() {
        let t = target(Concept::dictator(1));
        let gen = Gen::new(&t, 1_000_000);
        let out = separate_and_learn(&gen, &t.concept, &settings(), SeedPath::root(2)).unwrap();
        assert_eq!(out.models.len(), 81);
        assert_eq!(out.side_fits, [9, 9]);
        assert_eq!(gen.draws_used(), 40_000);
        let best = out
            .models
            .iter()
            .map(|m| model_error(&t, m, EvalMode::Exact).unwrap().value)
            .fold(f64::INFINITY, f64::min);
        assert!(best <= 0.1, "best {best}");
    }

    #[test]
    fn separate_with_starved_side() {
        let t = target(Concept::dictator(1));
        let gen = Gen::new(&t, 1_000_000);
        let out = separate_and_learn(&gen, &Concept::ConstantZero, &settings(), SeedPath::root(3)).unwrap();
        assert_eq!(out.side_sizes[1], 0);
        assert_eq!(out.side_fits[1], 0);
        assert_eq!(out.models.len(), 9);
        assert!(out.models.iter().all(|m| m.q1 == settings().family.default_spec()));
    }

    #[test]
    fn direct_on_identical_components() {
        let mut t = target(Concept::dictator(2));
        t.p1 = t.p0.clone();
        let gen = Gen::new(&t, 1_000_000);
        let list = direct_unhealthy_learn(&gen, &settings(), SeedPath::root(4)).unwrap();
        assert_eq!(list.len(), 9);
        assert!(list.iter().any(|q| kl_divergence(&t.p0, q).unwrap() <= 0.1));
    }

    #[test]
    fn lecam_identical_pair_sums_to_one() {
        let family = Family::BernoulliProduct { k: 2 };
        let bounds = BoundednessBudget::discrete(2, 1e-3);
        let q = DistributionSpec::BernoulliProduct { biases: vec![0.3, 0.6] };
        let rep = lecam_two_point(&q, &q, &family, 50, 0.02, 200, &bounds, SeedPath::root(5)).unwrap();
        assert_eq!(rep.bound, 1.0);
        assert!((rep.sum() - 1.0).abs() <= 3.0 * rep.std_error + 1e-12);
    }

    #[test]
    fn perturbation_hits_requested_kl() {
        let q1 = perturb_to_kl(&[0.3, 0.5], 1, 0.01, 1e-3).unwrap();
        let q0 = DistributionSpec::BernoulliProduct { biases: vec![0.3, 0.5] };
        assert!((kl_divergence(&q0, &q1).unwrap() - 0.01).abs() < 1e-12);
    }
}
