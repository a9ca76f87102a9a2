//! Two-component mixture learning by EM with restarts.
//!
//! M-steps are the exact maximisers under the family constraints (bias
//! clamping, row flooring, mean-box clipping), so the average
//! log-likelihood never decreases.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{floor_row, kl_divergence, BoundednessBudget, DistributionSpec, Family, OutcomeVector};
use crate::error::{Error, Result};
use crate::seed::SeedPath;

/// Smallest sample accepted by [`em_fit_2mixture`].
pub const MIN_MIXTURE_SAMPLE: usize = 20;

/// Stopping tolerance on the average log-likelihood, in bits.
pub const EM_TOLERANCE: f64 = 1e-6;

pub const EM_MAX_ITERATIONS: usize = 500;

/// Allowed numerical decrease between EM iterations.
pub const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureFit {
    pub weight0: f64,
    pub weight1: f64,
    pub comp0: DistributionSpec,
    pub comp1: DistributionSpec,
    /// Final average log-likelihood in bits.
    pub loglik: f64,
    pub restarts_used: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Whether every iteration of the winning restart kept the
    /// log-likelihood non-decreasing.
    pub monotone: bool,
    /// Final log-likelihood of every restart, in restart order.
    pub restart_logliks: Vec<f64>,
    /// Per-iteration log-likelihood of the winning restart.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HealthReport {
    pub eta: f64,
    pub min_weight: f64,
    pub max_kl: f64,
    pub healthy: bool,
}

/// Both weights and the larger directed KL must reach `eta`.
pub fn health_check(fit: &MixtureFit, eta: f64) -> Result<HealthReport> {
    let min_weight = fit.weight0.min(fit.weight1);
    let max_kl = kl_divergence(&fit.comp0, &fit.comp1)?.max(kl_divergence(&fit.comp1, &fit.comp0)?);
    Ok(HealthReport {
        eta,
        min_weight,
        max_kl,
        healthy: min_weight >= eta && max_kl >= eta,
    })
}

/// Sample in the form EM iterates over: distinct discrete outcomes with
/// multiplicities, or raw real vectors.
enum Data {
    Discrete { points: Vec<Vec<u8>>, counts: Vec<f64>, b: usize },
    Real { points: Vec<Vec<f64>> },
}

impl Data {
    fn len(&self) -> usize {
        match self {
            Data::Discrete { points, .. } => points.len(),
            Data::Real { points } => points.len(),
        }
    }

    fn weight(&self, i: usize) -> f64 {
        match self {
            Data::Discrete { counts, .. } => counts[i],
            Data::Real { .. } => 1.0,
        }
    }
}

fn prepare(sample: &[OutcomeVector], family: &Family) -> Result<Data> {
    let k = family.k();
    match family.alphabet() {
        Some(b) => {
            let mut groups: BTreeMap<&[u8], f64> = BTreeMap::new();
            for y in sample {
                let v = y
                    .as_discrete()
                    .ok_or_else(|| Error::FamilyMismatch("real outcome in a discrete sample".into()))?;
                if v.len() != k {
                    return Err(Error::DimensionMismatch { expected: k, actual: v.len() });
                }
                if v.iter().any(|s| *s as usize >= b) {
                    return Err(Error::invalid("outcome", "symbol outside the alphabet"));
                }
                *groups.entry(v).or_insert(0.0) += 1.0;
            }
            let (points, counts) = groups.into_iter().map(|(p, c)| (p.to_vec(), c)).unzip();
            Ok(Data::Discrete { points, counts, b })
        }
        None => {
            let points = sample
                .iter()
                .map(|y| {
                    let v = y
                        .as_real()
                        .ok_or_else(|| Error::FamilyMismatch("discrete outcome in a Gaussian sample".into()))?;
                    if v.len() != k {
                        return Err(Error::DimensionMismatch { expected: k, actual: v.len() });
                    }
                    Ok(v.to_vec())
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Data::Real { points })
        }
    }
}

/// Log-density (nats) of every data point under `spec`.
fn log_densities(data: &Data, spec: &DistributionSpec, out: &mut [f64]) {
    match data {
        Data::Discrete { points, b, .. } => {
            let k = spec.k();
            let mut table = vec![0.0; k * b];
            for j in 0..k {
                for s in 0..*b {
                    table[j * b + s] = spec.coordinate_prob(j, s as u8).ln();
                }
            }
            for (o, p) in out.iter_mut().zip(points) {
                *o = p.iter().enumerate().map(|(j, s)| table[j * b + *s as usize]).sum();
            }
        }
        Data::Real { points } => {
            for (o, p) in out.iter_mut().zip(points) {
                *o = crate::distributions::gaussian_log2_density(spec_means(spec), spec_sigmas(spec), p) * LN_2;
            }
        }
    }
}

fn spec_means(spec: &DistributionSpec) -> &[f64] {
    match spec {
        DistributionSpec::SphericalGaussian { means, .. } => means,
        _ => &[],
    }
}

fn spec_sigmas(spec: &DistributionSpec) -> &[f64] {
    match spec {
        DistributionSpec::SphericalGaussian { sigmas, .. } => sigmas,
        _ => &[],
    }
}

/// Weighted constrained maximum-likelihood fit; `resp[i]` weights point `i`.
fn m_step(data: &Data, family: &Family, lambda: f64, resp: &[f64], previous: &DistributionSpec) -> DistributionSpec {
    let k = family.k();
    let total: f64 = (0..data.len()).map(|i| resp[i] * data.weight(i)).sum();
    if total <= 1e-300 {
        return previous.clone();
    }
    match (data, family) {
        (Data::Discrete { points, b, .. }, _) => {
            let mut counts = vec![0.0; k * b];
            for (i, p) in points.iter().enumerate() {
                let w = resp[i] * data.weight(i);
                for (j, s) in p.iter().enumerate() {
                    counts[j * b + *s as usize] += w;
                }
            }
            match family {
                Family::BernoulliProduct { .. } => DistributionSpec::BernoulliProduct {
                    biases: (0..k).map(|j| (counts[2 * j + 1] / total).clamp(lambda, 1.0 - lambda)).collect(),
                },
                _ => DistributionSpec::BaryProduct {
                    rows: (0..k)
                        .map(|j| floor_row(&counts[j * b..(j + 1) * b].iter().map(|c| c / total).collect::<Vec<_>>(), lambda))
                        .collect(),
                },
            }
        }
        (Data::Real { points }, Family::SphericalGaussian { sigmas, mean_range }) => {
            let mut sums = vec![0.0; k];
            for (i, p) in points.iter().enumerate() {
                for (acc, x) in sums.iter_mut().zip(p) {
                    *acc += resp[i] * x;
                }
            }
            DistributionSpec::SphericalGaussian {
                means: sums.iter().map(|s| (s / total).clamp(mean_range[0], mean_range[1])).collect(),
                sigmas: sigmas.clone(),
            }
        }
        _ => unreachable!("data prepared for this family"),
    }
}

/// Component initialised at one sample point.
fn seed_component(data: &Data, family: &Family, i: usize) -> DistributionSpec {
    match (data, family) {
        (Data::Discrete { points, b, .. }, _) => {
            let rows: Vec<Vec<f64>> = points[i]
                .iter()
                .map(|s| {
                    (0..*b)
                        .map(|t| 0.5 * f64::from(u8::from(t == *s as usize)) + 0.5 / *b as f64)
                        .collect()
                })
                .collect();
            match family {
                Family::BernoulliProduct { .. } => DistributionSpec::BernoulliProduct {
                    biases: rows.iter().map(|r| r[1]).collect(),
                },
                _ => DistributionSpec::BaryProduct { rows },
            }
        }
        (Data::Real { points }, Family::SphericalGaussian { sigmas, mean_range }) => DistributionSpec::SphericalGaussian {
            means: points[i].iter().map(|x| x.clamp(mean_range[0], mean_range[1])).collect(),
            sigmas: sigmas.clone(),
        },
        _ => unreachable!("data prepared for this family"),
    }
}

struct RunResult {
    w: [f64; 2],
    comps: [DistributionSpec; 2],
    loglik: f64,
    converged: bool,
    monotone: bool,
    trace: Vec<f64>,
}

fn run_em(data: &Data, family: &Family, lambda: f64, init: [DistributionSpec; 2], total_weight: f64) -> RunResult {
    let n = data.len();
    let mut comps = init;
    let mut w: [f64; 2] = [0.5, 0.5];
    let mut ld = [vec![0.0; n], vec![0.0; n]];
    let mut resp = [vec![0.0; n], vec![0.0; n]];
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut monotone = true;
    for _ in 0..EM_MAX_ITERATIONS {
        log_densities(data, &comps[0], &mut ld[0]);
        log_densities(data, &comps[1], &mut ld[1]);
        let mut ll = 0.0;
        for i in 0..n {
            let a = if w[0] > 0.0 { w[0].ln() + ld[0][i] } else { f64::NEG_INFINITY };
            let b = if w[1] > 0.0 { w[1].ln() + ld[1][i] } else { f64::NEG_INFINITY };
            let mx = a.max(b);
            let lse = mx + ((a - mx).exp() + (b - mx).exp()).ln();
            resp[0][i] = (a - lse).exp();
            resp[1][i] = (b - lse).exp();
            ll += data.weight(i) * lse;
        }
        let ll_bits = ll / total_weight / LN_2;
        if let Some(&prev) = trace.last() {
            if ll_bits < prev - MONOTONE_SLACK {
                monotone = false;
            }
            if (ll_bits - prev).abs() < EM_TOLERANCE {
                trace.push(ll_bits);
                converged = true;
                break;
            }
        }
        trace.push(ll_bits);
        let r0: f64 = (0..n).map(|i| resp[0][i] * data.weight(i)).sum();
        w = [r0 / total_weight, 1.0 - r0 / total_weight];
        comps = [
            m_step(data, family, lambda, &resp[0], &comps[0]),
            m_step(data, family, lambda, &resp[1], &comps[1]),
        ];
    }
    RunResult {
        w,
        loglik: *trace.last().unwrap_or(&f64::NEG_INFINITY),
        comps,
        converged,
        monotone,
        trace,
    }
}

/// Fits a two-component mixture with `restarts` random initialisations and
/// keeps the best final log-likelihood (earliest restart on ties).
pub fn em_fit_2mixture(
    sample: &[OutcomeVector],
    family: &Family,
    bounds: &BoundednessBudget,
    restarts: usize,
    seed: SeedPath,
) -> Result<MixtureFit> {
    if sample.len() < MIN_MIXTURE_SAMPLE {
        return Err(Error::InsufficientSamples {
            needed: MIN_MIXTURE_SAMPLE,
            available: sample.len(),
        });
    }
    if restarts == 0 {
        return Err(Error::invalid("restarts", "must be at least 1"));
    }
    family.validate()?;
    let data = prepare(sample, family)?;
    let total = sample.len() as f64;
    let lambda = bounds.lambda;

    if data.len() == 1 || sample.iter().all(|y| y == &sample[0]) {
        let single = crate::distributions::fit_single(family, sample, bounds)?;
        let mut ld = vec![0.0; data.len()];
        log_densities(&data, &single, &mut ld);
        let ll = (0..data.len()).map(|i| data.weight(i) * ld[i]).sum::<f64>() / total / LN_2;
        return Ok(MixtureFit {
            weight0: 1.0,
            weight1: 0.0,
            comp0: single.clone(),
            comp1: single,
            loglik: ll,
            restarts_used: 0,
            converged: false,
            iterations: 0,
            monotone: true,
            restart_logliks: Vec::new(),
            trace: vec![ll],
        });
    }

    let runs: Vec<RunResult> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed.child(r as u64).stream();
            let i = pick(&data, &mut rng, None);
            let j = pick(&data, &mut rng, Some(i));
            let init = [seed_component(&data, family, i), seed_component(&data, family, j)];
            run_em(&data, family, lambda, init, total)
        })
        .collect();
    let restart_logliks: Vec<f64> = runs.iter().map(|r| r.loglik).collect();
    let best = restart_logliks
        .iter()
        .enumerate()
        .fold(0, |best, (i, ll)| if *ll > restart_logliks[best] { i } else { best });
    let run = runs.into_iter().nth(best).expect("at least one restart");
    let [c0, c1] = run.comps;
    Ok(MixtureFit {
        weight0: run.w[0],
        weight1: run.w[1],
        comp0: c0,
        comp1: c1,
        loglik: run.loglik,
        restarts_used: restarts,
        converged: run.converged,
        iterations: run.trace.len(),
        monotone: run.monotone,
        restart_logliks,
        trace: run.trace,
    })
}

/// A data index drawn in proportion to multiplicity, different from `avoid`.
fn pick<R: Rng + ?Sized>(data: &Data, rng: &mut R, avoid: Option<usize>) -> usize {
    let n = data.len();
    let total: f64 = (0..n).filter(|i| Some(*i) != avoid).map(|i| data.weight(i)).sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for i in (0..n).filter(|i| Some(*i) != avoid) {
        last = i;
        u -= data.weight(i);
        if u < 0.0 {
            return i;
        }
    }
    last
}
