//! Property suites with machine-readable results.
//!
//! Each suite draws its random instances from a fixed seed path, checks a
//! bound or identity against exact (or Monte Carlo with standard error)
//! evaluation, and reports the worst margin it saw.

use std::time::Instant;

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::cccn::{lab_label, lab_parameters, noise_rates, LabParams};
use crate::distlearn::{lecam_two_point, perturb_to_kl, robust_learn_list, RobustnessBudget};
use crate::distributions::{floor_row, kl_divergence, BoundednessBudget, DistributionSpec, Family, OutcomeVector};
use crate::error::{Error, Result};
use crate::events::{
    admit_bound, admit_event, approxdist_event, approxdist_statement_tau, enumerate_event_class, event_probability_exact, Event,
};
use crate::model::{decomposition_estimate, gen_sample, model_error, Concept, ContextDistribution, EvalMode, HypothesisModel, TargetModel};
use crate::reductions::{ml_sample_size, ml_select, CandidateModelList, Provenance, ProvenanceKind};
use crate::seed::{SeedPath, Stream};

pub const SUITES: [&str; 10] = [
    "lab-identity",
    "noise-bounds",
    "admit",
    "approxdist",
    "event-classes",
    "logsum",
    "lecam",
    "robustness",
    "ml-select",
    "decomposition",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub suite: String,
    pub passed: bool,
    pub cases: usize,
    pub violations: usize,
    /// Smallest slack seen (negative means a violation).
    pub worst_margin: f64,
    pub runtime_ms: u128,
    pub details: Value,
}

struct Tally {
    cases: usize,
    violations: usize,
    worst: f64,
}

impl Tally {
    fn new() -> Self {
        Tally {
            cases: 0,
            violations: 0,
            worst: f64::INFINITY,
        }
    }

    fn check(&mut self, margin: f64) {
        self.cases += 1;
        if margin < 0.0 {
            self.violations += 1;
        }
        self.worst = self.worst.min(margin);
    }
}

/// Runs one suite by name, or every suite for `"all"`.
pub fn verify_suite(which: &str, seed: u64) -> Result<Vec<SuiteResult>> {
    if which == "all" {
        return SUITES.iter().map(|s| run_one(s, seed)).collect();
    }
    Ok(vec![run_one(which, seed)?])
}

fn run_one(name: &str, seed: u64) -> Result<SuiteResult> {
    let idx = SUITES
        .iter()
        .position(|s| *s == name)
        .ok_or_else(|| Error::config("suite", format!("unknown suite `{name}`; expected one of {SUITES:?} or all")))?;
    let path = SeedPath::root(seed).child(idx as u64);
    let start = Instant::now();
    let (tally, passed_extra, details) = match name {
        "lab-identity" => lab_identity(path, 100_000),
        "noise-bounds" => noise_bounds(path),
        "admit" => admit(path, 1000),
        "approxdist" => approxdist(path, 1000),
        "event-classes" => event_classes(path, 1000),
        "logsum" => logsum(path, 1000),
        "lecam" => lecam(path),
        "robustness" => robustness(path, 200),
        "ml-select" => ml_select_suite(path, 200),
        "decomposition" => decomposition(path),
        _ => unreachable!(),
    }?;
    Ok(SuiteResult {
        suite: name.to_string(),
        passed: tally.violations == 0 && passed_extra,
        cases: tally.cases,
        violations: tally.violations,
        worst_margin: tally.worst,
        runtime_ms: start.elapsed().as_millis(),
        details,
    })
}

type SuiteOut = Result<(Tally, bool, Value)>;

/// A valid `(p_hat, q_hat, xi)` for the labeler.
pub fn random_lab_triple<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64, f64, LabParams) {
    loop {
        let xi: f64 = rng.random_range(0.01..=1.0);
        let p: f64 = rng.random();
        let q: f64 = rng.random();
        if let Ok(params) = lab_parameters(p, q, xi) {
            return (p, q, xi, params);
        }
    }
}

fn lab_identity(path: SeedPath, cases: usize) -> SuiteOut {
    let mut rng = path.stream();
    let mut tally = Tally::new();
    let mut max_residual: f64 = 0.0;
    for _ in 0..cases {
        let (p, q, xi, a) = random_lab_triple(&mut rng);
        let target = 0.5 - xi / 4.0;
        let r = (q * a.a0 + (1.0 - q) * a.b0 - target)
            .abs()
            .max((p * a.a1 + (1.0 - p) * a.b1 - target).abs());
        max_residual = max_residual.max(r);
        tally.check(1e-12 - r);
    }
    Ok((tally, true, json!({ "max_residual": max_residual, "tolerance": 1e-12 })))
}

fn noise_bounds(path: SeedPath) -> SuiteOut {
    let mut rng = path.child(0).stream();
    let mut tally = Tally::new();
    for _ in 0..10_000 {
        let (p_hat, q_hat, xi, params) = random_lab_triple(&mut rng);
        let delta = xi / 8.0;
        let p = (p_hat + rng.random_range(-delta..=delta)).clamp(0.0, 1.0);
        let q = (q_hat + rng.random_range(-delta..=delta)).clamp(0.0, 1.0);
        let (e0, e1) = noise_rates(p, q, &params);
        tally.check(0.5 - xi / 4.0 + delta - e0.max(e1) + 1e-12);
    }
    let analytic = tally.violations;
    let m = 100_000;
    let mut mc = Vec::new();
    let mut mc_ok = true;
    for case in 0..5u64 {
        let mut rng = path.child(1).child(case).stream();
        let (p_hat, q_hat, xi, params) = random_lab_triple(&mut rng);
        let delta = xi / 8.0;
        let p = (p_hat + rng.random_range(-delta..=delta)).clamp(0.0, 1.0);
        let q = (q_hat + rng.random_range(-delta..=delta)).clamp(0.0, 1.0);
        let target = TargetModel {
            n: 1,
            concept: Concept::dictator(1),
            p0: DistributionSpec::BernoulliProduct { biases: vec![p] },
            p1: DistributionSpec::BernoulliProduct { biases: vec![q] },
            context_dist: ContextDistribution::Uniform,
        };
        let event = Event::CoordinateEquals { j: 1, t: 1 };
        let sample = gen_sample(&target, m, &mut rng);
        let mut flips = [0usize; 2];
        let mut totals = [0usize; 2];
        for pair in &sample {
            let c = pair.context.get(1) as usize;
            totals[c] += 1;
            if lab_label(&event, pair, &params, &mut rng).label as usize != c {
                flips[c] += 1;
            }
        }
        let (e0, e1) = noise_rates(p, q, &params);
        let mut zs = [0.0; 2];
        for (c, eta) in [e0, e1].into_iter().enumerate() {
            let se = (eta * (1.0 - eta) / totals[c] as f64).sqrt().max(1e-12);
            zs[c] = (flips[c] as f64 / totals[c] as f64 - eta) / se;
        }
        let ok = zs.iter().all(|z| z.abs() <= 3.0);
        mc_ok &= ok;
        mc.push(json!({ "p": p, "q": q, "xi": xi, "eta0": e0, "eta1": e1, "z0": zs[0], "z1": zs[1], "within_3se": ok }));
    }
    Ok((tally, mc_ok, json!({ "analytic_violations": analytic, "monte_carlo": mc, "m": m })))
}

/// A random lambda-smoothed discrete spec with at most 2^12 outcomes.
fn random_discrete<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> (Family, DistributionSpec, DistributionSpec) {
    let family = if rng.random_bool(0.5) {
        Family::BernoulliProduct { k: rng.random_range(1..=12) }
    } else {
        let b = rng.random_range(3..=4);
        let kmax = if b == 3 { 7 } else { 6 };
        Family::BaryProduct { k: rng.random_range(1..=kmax), b }
    };
    let p = random_member(&family, lambda, rng);
    let q = random_member(&family, lambda, rng);
    (family, p, q)
}

fn random_member<R: Rng + ?Sized>(family: &Family, lambda: f64, rng: &mut R) -> DistributionSpec {
    match family {
        Family::BernoulliProduct { k } => DistributionSpec::BernoulliProduct {
            biases: (0..*k).map(|_| rng.random_range(lambda..=1.0 - lambda)).collect(),
        },
        Family::BaryProduct { k, b } => DistributionSpec::BaryProduct {
            rows: (0..*k)
                .map(|_| {
                    // Occasional near-zero entries push mass onto the floor.
                    let raw: Vec<f64> = (0..*b).map(|_| rng.random::<f64>().powi(3)).collect();
                    let s: f64 = raw.iter().sum();
                    floor_row(&raw.iter().map(|v| v / s).collect::<Vec<_>>(), lambda)
                })
                .collect(),
        },
        Family::SphericalGaussian { sigmas, mean_range } => DistributionSpec::SphericalGaussian {
            means: (0..sigmas.len()).map(|_| rng.random_range(mean_range[0]..=mean_range[1])).collect(),
            sigmas: sigmas.clone(),
        },
    }
}

fn admit(path: SeedPath, cases: usize) -> SuiteOut {
    let mut rng = path.stream();
    let lambda = 0.01;
    let mut tally = Tally::new();
    let mut min_mass_margin = f64::INFINITY;
    while tally.cases < cases {
        let (family, p, q) = random_discrete(&mut rng, lambda);
        let kl = kl_divergence(&p, &q)?;
        if kl <= 1e-3 {
            continue;
        }
        let gamma = kl.min(1.0);
        let m = BoundednessBudget::discrete(family.k(), lambda).m_cap;
        let e = admit_event(&p, &q, gamma)?;
        let (pe, qe) = (event_probability_exact(&p, &e)?, event_probability_exact(&q, &e)?);
        tally.check(pe - qe - admit_bound(gamma, m) + 1e-12);
        min_mass_margin = min_mass_margin.min(pe - gamma / (2.0 * m));
    }
    Ok((tally, true, json!({ "lambda": lambda, "gamma": "min(KL, 1)", "min_event_mass_margin": min_mass_margin })))
}

fn approxdist(path: SeedPath, cases: usize) -> SuiteOut {
    let mut rng = path.stream();
    let lambda = 0.1;
    let alpha = 1e-15;
    let mut tally = Tally::new();
    let mut positive_bounds = 0;
    let mut premise = 0;
    let mut tau_gap: f64 = 0.0;
    while tally.cases < cases {
        let k = rng.random_range(1..=3);
        let family = Family::BernoulliProduct { k };
        let p = random_member(&family, lambda, &mut rng);
        let q = random_member(&family, lambda, &mut rng);
        let kl = kl_divergence(&p, &q)?;
        if kl < 0.25 {
            continue;
        }
        let gamma = kl.min(1.0);
        let m = BoundednessBudget::discrete(k, lambda).m_cap;
        // Estimates within alpha of the truth: nudge one coordinate.
        let nudge = |d: &DistributionSpec, rng: &mut Stream| -> Result<DistributionSpec> {
            let DistributionSpec::BernoulliProduct { biases } = d else { unreachable!() };
            let j = rng.random_range(0..k);
            let target_kl = alpha * rng.random_range(0.0..0.5);
            let mut out = biases.clone();
            let moved = perturb_to_kl(biases, j, target_kl, 1e-9)
                .or_else(|_| perturb_to_kl(&biases.iter().map(|b| 1.0 - b).collect::<Vec<_>>(), j, target_kl, 1e-9))?;
            let DistributionSpec::BernoulliProduct { biases: nb } = moved else { unreachable!() };
            out[j] = if (nb[j] - biases[j]).abs() < 0.5 { nb[j] } else { 1.0 - nb[j] };
            Ok(DistributionSpec::BernoulliProduct { biases: out })
        };
        let (p_hat, q_hat) = (nudge(&p, &mut rng)?, nudge(&q, &mut rng)?);
        if kl_divergence(&p, &p_hat)? > alpha || kl_divergence(&q, &q_hat)? > alpha {
            continue;
        }
        let a = approxdist_event(&p_hat, &q_hat, gamma, m, alpha)?;
        tau_gap = tau_gap.max((a.tau - approxdist_statement_tau(gamma, m, alpha)).abs());
        if a.bound > 0.0 {
            positive_bounds += 1;
        }
        if a.premise_holds {
            premise += 1;
        }
        let sep = event_probability_exact(&p, &a.event)? - event_probability_exact(&q, &a.event)?;
        tally.check(sep - a.bound + 1e-12);
    }
    Ok((
        tally,
        tau_gap == 0.0,
        json!({
            "alpha": alpha,
            "lambda": lambda,
            "positive_bounds": positive_bounds,
            "premise_holds": premise,
            "statement_tau_max_gap": tau_gap,
        }),
    ))
}

fn best_separation(class: &[Event], p: &DistributionSpec, q: &DistributionSpec) -> Result<f64> {
    let mut best: f64 = 0.0;
    for e in class {
        best = best.max((event_probability_exact(p, e)? - event_probability_exact(q, e)?).abs());
    }
    Ok(best)
}

fn event_classes(path: SeedPath, cases: usize) -> SuiteOut {
    let lambda = 0.01;
    let mut product = Tally::new();
    let mut rng = path.child(0).stream();
    while product.cases < cases {
        let (family, p, q) = random_discrete(&mut rng, lambda);
        let kl = kl_divergence(&p, &q)?;
        if kl <= 1e-3 {
            continue;
        }
        let bounds = BoundednessBudget::discrete(family.k(), lambda);
        let class = enumerate_event_class(&family, kl.min(1.0), &bounds)?;
        product.check(best_separation(&class.events, &p, &q)? - class.xi_bound + 1e-12);
    }
    let mut gaussian = Tally::new();
    let mut rng = path.child(1).stream();
    while gaussian.cases < cases {
        let k = rng.random_range(1..=3);
        let width = rng.random_range(0.5..=3.0);
        let family = Family::SphericalGaussian {
            sigmas: (0..k).map(|_| rng.random_range(0.5..=1.5)).collect(),
            mean_range: [0.0, width],
        };
        let p = random_member(&family, lambda, &mut rng);
        let q = random_member(&family, lambda, &mut rng);
        let kl = kl_divergence(&p, &q)?;
        if kl <= 1e-3 {
            continue;
        }
        let class = enumerate_event_class(&family, kl.min(1.0), &BoundednessBudget::gaussian(64.0))?;
        gaussian.check(best_separation(&class.events, &p, &q)? - class.xi_bound + 1e-12);
    }
    let details = json!({
        "product": { "cases": product.cases, "violations": product.violations, "worst_margin": product.worst },
        "gaussian": { "cases": gaussian.cases, "violations": gaussian.violations, "worst_margin": gaussian.worst },
    });
    let mut tally = product;
    tally.cases += gaussian.cases;
    tally.violations += gaussian.violations;
    tally.worst = tally.worst.min(gaussian.worst);
    Ok((tally, true, details))
}

/// Exact KL over an enumerated domain, in bits.
fn kl_tables(p: &[f64], r: &[f64]) -> f64 {
    p.iter()
        .zip(r)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b).log2())
        .sum()
}

fn logsum(path: SeedPath, cases: usize) -> SuiteOut {
    let mut rng = path.stream();
    let mut tally = Tally::new();
    for _ in 0..cases {
        let (_, p, q) = random_discrete(&mut rng, 0.01);
        let w: f64 = rng.random();
        let pt: Vec<f64> = p.enumerate()?.into_iter().map(|(_, v)| v).collect();
        let qt: Vec<f64> = q.enumerate()?.into_iter().map(|(_, v)| v).collect();
        let rt: Vec<f64> = pt.iter().zip(&qt).map(|(a, b)| (1.0 - w) * a + w * b).collect();
        let lhs = kl_tables(&pt, &rt);
        let rhs = w * kl_tables(&pt, &qt);
        tally.check(rhs - lhs + 1e-12);
    }
    Ok((tally, true, json!({ "mixture": "R = (1 - w) P + w Q" })))
}

fn lecam(path: SeedPath) -> SuiteOut {
    let family = Family::BernoulliProduct { k: 2 };
    let bounds = BoundednessBudget::discrete(2, 0.01);
    let base = [0.4, 0.6];
    let q0 = DistributionSpec::BernoulliProduct { biases: base.to_vec() };
    let (m, trials, epsilon) = (100, 500, 0.01);
    let mut tally = Tally::new();
    let mut rows = Vec::new();
    let mut anchor_ok = true;
    for (i, mkl) in [0.0, 0.1, 0.5].into_iter().enumerate() {
        let q1 = if mkl == 0.0 {
            q0.clone()
        } else {
            perturb_to_kl(&base, 0, mkl / m as f64, 0.01)?
        };
        let rep = lecam_two_point(&q0, &q1, &family, m, epsilon, trials, &bounds, path.child(i as u64))?;
        let margin = rep.sum() - (rep.bound - 3.0 * rep.std_error);
        tally.check(margin);
        if mkl == 0.0 {
            anchor_ok = (rep.sum() - 1.0).abs() <= 3.0 * rep.std_error.max(1e-12);
        }
        rows.push(json!({ "m_kl": mkl, "kl": rep.kl, "err0": rep.err0, "err1": rep.err1, "sum": rep.sum(), "bound": rep.bound, "std_error": rep.std_error }));
    }
    Ok((tally, anchor_ok, json!({ "m": m, "trials": trials, "epsilon": epsilon, "points": rows })))
}

fn robustness(path: SeedPath, trials: usize) -> SuiteOut {
    let (m_p, delta, epsilon, k, lambda) = (200, 0.1, 0.05, 4, 0.01);
    let budget = RobustnessBudget::new(m_p, delta)?;
    let family = Family::BernoulliProduct { k };
    let bounds = BoundednessBudget::discrete(k, lambda);
    let mut hits = 0;
    for t in 0..trials {
        let mut rng = path.child(t as u64).stream();
        let base: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..0.8)).collect();
        let p = DistributionSpec::BernoulliProduct { biases: base.clone() };
        let stream = perturb_to_kl(&base, rng.random_range(0..k), budget.kl_tolerance, lambda)?;
        let sample: Vec<OutcomeVector> = (0..budget.r * m_p).map(|_| stream.sample(&mut rng)).collect();
        let list = robust_learn_list(&sample, &family, &budget, &bounds)?;
        let mut best = f64::INFINITY;
        for fit in &list {
            best = best.min(kl_divergence(&p, fit)?);
        }
        if best <= epsilon {
            hits += 1;
        }
    }
    let freq = hits as f64 / trials as f64;
    let mut tally = Tally::new();
    tally.check(freq - (1.0 - delta));
    Ok((tally, true, json!({ "m_p": m_p, "r": budget.r, "delta": delta, "epsilon": epsilon, "kl_tolerance": budget.kl_tolerance, "success_frequency": freq })))
}

/// The planted list used by the selection suite: eight models with
/// `err >= 4 eps` followed by one with `err <= eps`, placed last so ties
/// cannot favour it.
pub fn planted_list(target: &TargetModel, epsilon: f64) -> Result<(CandidateModelList, Vec<f64>)> {
    let bern = |b: [f64; 2]| DistributionSpec::BernoulliProduct { biases: b.to_vec() };
    let (p0, p1) = (target.p0.clone(), target.p1.clone());
    let good = HypothesisModel {
        hypothesis: target.concept.clone(),
        q0: bern([0.22, 0.3]),
        q1: p1.clone(),
    };
    let mut bad = vec![
        HypothesisModel { hypothesis: Concept::ConstantZero, q0: p0.clone(), q1: p0.clone() },
        HypothesisModel { hypothesis: Concept::ConstantOne, q0: p1.clone(), q1: p1.clone() },
        HypothesisModel { hypothesis: Concept::dictator(2), q0: p0.clone(), q1: p1.clone() },
        HypothesisModel { hypothesis: target.concept.clone(), q0: p1.clone(), q1: p0.clone() },
        HypothesisModel { hypothesis: target.concept.clone(), q0: bern([0.6, 0.6]), q1: bern([0.6, 0.6]) },
        HypothesisModel { hypothesis: Concept::dictator(3), q0: p0.clone(), q1: p1.clone() },
        HypothesisModel { hypothesis: target.concept.clone(), q0: bern([0.75, 0.3]), q1: p1.clone() },
        HypothesisModel { hypothesis: Concept::conjunction(&[1, 2]), q0: p0, q1: p1 },
    ];
    let mut list = CandidateModelList::new();
    let mut errs = Vec::new();
    bad.push(good);
    for (i, m) in bad.into_iter().enumerate() {
        errs.push(model_error(target, &m, EvalMode::Exact)?.value);
        list.push(m, Provenance { kind: ProvenanceKind::ForwardEvent, event: None, p_hat: None, q_hat: None, fit: [i, i] });
    }
    let last = errs.len() - 1;
    if errs[last] > epsilon || errs[..last].iter().any(|e| *e < 4.0 * epsilon) {
        return Err(Error::invalid("planted_list", format!("errors {errs:?} do not bracket epsilon")));
    }
    Ok((list, errs))
}

pub fn planted_target() -> TargetModel {
    TargetModel {
        n: 4,
        concept: Concept::dictator(1),
        p0: DistributionSpec::BernoulliProduct { biases: vec![0.2, 0.3] },
        p1: DistributionSpec::BernoulliProduct { biases: vec![0.8, 0.7] },
        context_dist: ContextDistribution::Uniform,
    }
}

fn ml_select_suite(path: SeedPath, trials: usize) -> SuiteOut {
    let (epsilon, delta, lambda) = (0.1, 0.1, 0.01);
    let target = planted_target();
    let family = Family::BernoulliProduct { k: 2 };
    let bounds = BoundednessBudget::discrete(2, lambda);
    let (list, errs) = planted_list(&target, epsilon)?;
    let m_sel = ml_sample_size(bounds.m_cap, epsilon, list.distinct(), delta);
    let mut failures = 0;
    for t in 0..trials {
        let sample = gen_sample(&target, m_sel, &mut path.child(t as u64).stream());
        let rep = ml_select(&list, &sample, &family, &bounds)?;
        if errs[rep.chosen_model] > 4.0 * epsilon {
            failures += 1;
        }
    }
    let fail = failures as f64 / trials as f64;
    let mut tally = Tally::new();
    tally.check(delta - fail);
    let allowance = delta + 3.0 * (delta * (1.0 - delta) / trials as f64).sqrt();
    Ok((
        tally,
        fail <= allowance,
        json!({ "m_sel": m_sel, "list_size": list.distinct(), "errors": errs, "failure_frequency": fail, "delta": delta }),
    ))
}

fn decomposition(path: SeedPath) -> SuiteOut {
    let m = 100_000;
    let mut tally = Tally::new();
    let mut rows = Vec::new();
    let targets = [
        planted_target(),
        TargetModel {
            n: 5,
            concept: Concept::conjunction(&[1, 3]),
            p0: DistributionSpec::BaryProduct { rows: vec![vec![0.2, 0.3, 0.5], vec![0.6, 0.3, 0.1]] },
            p1: DistributionSpec::BaryProduct { rows: vec![vec![0.5, 0.4, 0.1], vec![0.1, 0.2, 0.7]] },
            context_dist: ContextDistribution::IndependentProduct { biases: vec![0.7, 0.5, 0.6, 0.5, 0.5] },
        },
    ];
    for (ti, target) in targets.iter().enumerate() {
        let hyps = [
            HypothesisModel { hypothesis: target.concept.clone(), q0: target.p0.clone(), q1: target.p1.clone() },
            HypothesisModel { hypothesis: Concept::dictator(2), q0: target.p0.clone(), q1: target.p1.clone() },
            HypothesisModel { hypothesis: target.concept.clone(), q0: target.p1.clone(), q1: target.p0.clone() },
            HypothesisModel { hypothesis: Concept::ConstantZero, q0: target.p0.clone(), q1: target.p0.clone() },
        ];
        for (hi, h) in hyps.iter().enumerate() {
            let exact = model_error(target, h, EvalMode::Exact)?.value;
            let est = decomposition_estimate(target, h, m, &mut path.child(ti as u64).child(hi as u64).stream())?;
            let se = est.std_error.unwrap_or(0.0);
            tally.check(3.0 * se + 1e-12 - (est.value - exact).abs());
            rows.push(json!({ "target": ti, "hypothesis": hi, "exact": exact, "estimate": est.value, "std_error": se }));
        }
    }
    Ok((tally, true, json!({ "m": m, "checks": rows })))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_list_brackets_epsilon() {
        let (list, errs) = planted_list(&planted_target(), 0.1).unwrap();
        assert_eq!(list.distinct(), 9);
        assert!(errs[8] <= 0.1);
    }

    #[test]
    fn unknown_suite_is_an_error() {
        assert!(verify_suite("nope", 1).is_err());
    }
}
