//! Distinguishing events.
//!
//! An event `E` is xi-distinguishing for `P` and `Q` when `|P(E) - Q(E)| >= xi`.
//! This module provides coordinate events for discrete products, threshold
//! events for Gaussians, likelihood-ratio events
//! `E(P, Q, tau) = {y : P(y) >= 2^tau Q(y)}`, and exact or sampled event
//! probabilities.

use std::f64::consts::{LN_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::distributions::{BoundednessBudget, DistributionSpec, Family, OutcomeVector};
use crate::error::{Error, Result};
use crate::model::{Estimate, EvalMode};
use crate::seed::SeedPath;

/// A measurable subset of outcome space. Coordinate indices are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Event {
    /// `1[y_j = t]`.
    CoordinateEquals { j: usize, t: u8 },
    /// `1[y_j >= t]`.
    CoordinateThreshold { j: usize, t: f64 },
    /// `1[log2 P(y) - log2 Q(y) >= tau]`, unclamped densities.
    LikelihoodRatio {
        p_hat: DistributionSpec,
        q_hat: DistributionSpec,
        tau: f64,
    },
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::CoordinateEquals { .. } => "coordinate-equals",
            Event::CoordinateThreshold { .. } => "coordinate-threshold",
            Event::LikelihoodRatio { .. } => "likelihood-ratio",
        }
    }

    /// Checks the event against an outcome shape.
    pub fn validate(&self, family: &Family) -> Result<()> {
        let k = family.k();
        match self {
            Event::CoordinateEquals { j, t } => {
                check_index(*j, k)?;
                let b = family
                    .alphabet()
                    .ok_or_else(|| Error::FamilyMismatch("coordinate-equals event on a continuous family".into()))?;
                if *t as usize >= b {
                    return Err(Error::invalid("t", format!("symbol {t} outside alphabet of size {b}")));
                }
                Ok(())
            }
            Event::CoordinateThreshold { j, t } => {
                check_index(*j, k)?;
                if t.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("t", "threshold must be finite"))
                }
            }
            Event::LikelihoodRatio { p_hat, q_hat, tau } => {
                p_hat.check_compatible(q_hat)?;
                if p_hat.k() != k {
                    return Err(Error::DimensionMismatch { expected: k, actual: p_hat.k() });
                }
                if tau.is_nan() {
                    return Err(Error::invalid("tau", "must not be NaN"));
                }
                Ok(())
            }
        }
    }

    pub fn contains(&self, y: &OutcomeVector) -> bool {
        match (self, y) {
            (Event::CoordinateEquals { j, t }, OutcomeVector::Discrete(v)) => v[j - 1] == *t,
            (Event::CoordinateThreshold { j, t }, OutcomeVector::Discrete(v)) => f64::from(v[j - 1]) >= *t,
            (Event::CoordinateThreshold { j, t }, OutcomeVector::Real(v)) => v[j - 1] >= *t,
            (Event::LikelihoodRatio { p_hat, q_hat, tau }, _) => {
                p_hat.log_density_unchecked(y) - q_hat.log_density_unchecked(y) >= *tau
            }
            _ => false,
        }
    }

    /// Precomputed membership test.
    pub fn compile(&self) -> CompiledEvent {
        match self {
            Event::CoordinateEquals { j, t } => CompiledEvent::Equals { j: j - 1, t: *t },
            Event::CoordinateThreshold { j, t } => CompiledEvent::Threshold { j: j - 1, t: *t },
            Event::LikelihoodRatio { p_hat, q_hat, tau } => match (p_hat, q_hat) {
                (
                    DistributionSpec::SphericalGaussian { means: mp, sigmas: sp },
                    DistributionSpec::SphericalGaussian { means: mq, sigmas: sq },
                ) => CompiledEvent::Quadratic {
                    coef: gaussian_log_ratio_coefficients(mp, sp, mq, sq),
                    tau: *tau,
                },
                _ => {
                    let b = p_hat.alphabet().unwrap_or(2);
                    let k = p_hat.k();
                    let mut table = vec![0.0; k * b];
                    for j in 0..k {
                        for s in 0..b {
                            table[j * b + s] =
                                p_hat.coordinate_prob(j, s as u8).log2() - q_hat.coordinate_prob(j, s as u8).log2();
                        }
                    }
                    CompiledEvent::Table { table, b, tau: *tau }
                }
            },
        }
    }
}

fn check_index(j: usize, k: usize) -> Result<()> {
    if j == 0 || j > k {
        Err(Error::invalid("j", format!("coordinate {j} outside [1, {k}]")))
    } else {
        Ok(())
    }
}

/// Per-coordinate `(a, b, c)` with `log2 P(y) - log2 Q(y) = sum_j a y^2 + b y + c`.
fn gaussian_log_ratio_coefficients(mp: &[f64], sp: &[f64], mq: &[f64], sq: &[f64]) -> Vec<[f64; 3]> {
    (0..mp.len())
        .map(|j| {
            let (vp, vq) = (sp[j] * sp[j], sq[j] * sq[j]);
            let a = -0.5 / vp + 0.5 / vq;
            let b = mp[j] / vp - mq[j] / vq;
            let c = -0.5 * mp[j] * mp[j] / vp + 0.5 * mq[j] * mq[j] / vq + (sq[j] / sp[j]).ln();
            [a / LN_2, b / LN_2, c / LN_2]
        })
        .collect()
}

/// Event with membership tables prepared for hot loops.
#[derive(Debug, Clone, PartialEq)]
pub enum CompiledEvent {
    Equals { j: usize, t: u8 },
    Threshold { j: usize, t: f64 },
    Table { table: Vec<f64>, b: usize, tau: f64 },
    Quadratic { coef: Vec<[f64; 3]>, tau: f64 },
}

impl CompiledEvent {
    #[inline]
    pub fn contains(&self, y: &OutcomeVector) -> bool {
        match (self, y) {
            (CompiledEvent::Equals { j, t }, OutcomeVector::Discrete(v)) => v[*j] == *t,
            (CompiledEvent::Threshold { j, t }, OutcomeVector::Discrete(v)) => f64::from(v[*j]) >= *t,
            (CompiledEvent::Threshold { j, t }, OutcomeVector::Real(v)) => v[*j] >= *t,
            (CompiledEvent::Table { table, b, tau }, OutcomeVector::Discrete(v)) => {
                v.iter().enumerate().map(|(j, s)| table[j * b + *s as usize]).sum::<f64>() >= *tau
            }
            (CompiledEvent::Quadratic { coef, tau }, OutcomeVector::Real(v)) => {
                v.iter().zip(coef).map(|(y, [a, b, c])| (a * y + b) * y + c).sum::<f64>() >= *tau
            }
            _ => false,
        }
    }
}

/// `E(p_hat, q_hat, tau)`.
pub fn likelihood_ratio_event(p_hat: &DistributionSpec, q_hat: &DistributionSpec, tau: f64) -> Result<Event> {
    p_hat.check_compatible(q_hat)?;
    if tau.is_nan() {
        return Err(Error::invalid("tau", "must not be NaN"));
    }
    Ok(Event::LikelihoodRatio {
        p_hat: p_hat.clone(),
        q_hat: q_hat.clone(),
        tau,
    })
}

fn normal_sf(x: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    n.sf(x)
}

/// Exact event probability where a closed form or enumeration exists.
pub fn event_probability_exact(dist: &DistributionSpec, event: &Event) -> Result<f64> {
    match (event, dist) {
        (Event::CoordinateEquals { j, t }, _) if dist.is_discrete() => {
            check_index(*j, dist.k())?;
            Ok(dist.coordinate_prob(j - 1, *t))
        }
        (Event::CoordinateThreshold { j, t }, DistributionSpec::SphericalGaussian { means, sigmas }) => {
            check_index(*j, dist.k())?;
            Ok(normal_sf((t - means[j - 1]) / sigmas[j - 1]))
        }
        (Event::CoordinateThreshold { j, t }, _) if dist.is_discrete() => {
            check_index(*j, dist.k())?;
            let b = dist.alphabet().unwrap_or(2);
            Ok((0..b).filter(|s| *s as f64 >= *t).map(|s| dist.coordinate_prob(j - 1, s as u8)).sum())
        }
        (Event::LikelihoodRatio { p_hat, q_hat, .. }, _) => {
            dist.check_compatible(p_hat)?;
            p_hat.check_compatible(q_hat)?;
            if dist.is_discrete() {
                let compiled = event.compile();
                let mut total = 0.0;
                for (v, p) in dist.enumerate()? {
                    if compiled.contains(&OutcomeVector::Discrete(v)) {
                        total += p;
                    }
                }
                return Ok(total);
            }
            let CompiledEvent::Quadratic { coef, tau } = event.compile() else {
                unreachable!("Gaussian events compile to quadratics")
            };
            if coef.iter().any(|c| c[0] != 0.0) {
                return Err(Error::ExactInfeasible(
                    "likelihood-ratio event between Gaussians with different variances".into(),
                ));
            }
            let DistributionSpec::SphericalGaussian { means, sigmas } = dist else {
                unreachable!()
            };
            // The log ratio is affine in y, hence Gaussian under `dist`.
            let mean: f64 = coef.iter().zip(means).map(|(c, m)| c[1] * m + c[2]).sum();
            let var: f64 = coef.iter().zip(sigmas).map(|(c, s)| c[1] * c[1] * s * s).sum();
            if var == 0.0 {
                return Ok(if mean >= tau { 1.0 } else { 0.0 });
            }
            Ok(normal_sf((tau - mean) / var.sqrt()))
        }
        _ => Err(Error::FamilyMismatch(format!("{} event on {}", event.kind(), dist.family_name()))),
    }
}

/// Event probability, exact or sampled.
pub fn event_probability(dist: &DistributionSpec, event: &Event, mode: EvalMode) -> Result<Estimate> {
    match mode {
        EvalMode::Exact => Ok(Estimate {
            value: event_probability_exact(dist, event)?,
            std_error: None,
        }),
        EvalMode::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::invalid("samples", "Monte Carlo needs at least two samples"));
            }
            if let Event::LikelihoodRatio { p_hat, .. } = event {
                dist.check_compatible(p_hat)?;
            }
            let compiled = event.compile();
            let mut rng = SeedPath::root(seed).stream();
            Ok(bernoulli_estimate(
                (0..samples).filter(|_| compiled.contains(&dist.sample(&mut rng))).count(),
                samples,
            ))
        }
    }
}

pub(crate) fn bernoulli_estimate(hits: usize, samples: usize) -> Estimate {
    let p = hits as f64 / samples as f64;
    Estimate {
        value: p,
        std_error: Some((p * (1.0 - p) / samples as f64).sqrt()),
    }
}

/// Estimates `Pr[y in E]` from `samples` draws via `draw`.
pub fn sampled_probability<R: Rng + ?Sized>(
    dist: &DistributionSpec,
    event: &CompiledEvent,
    samples: usize,
    rng: &mut R,
) -> Estimate {
    let mut y = dist.sample(rng);
    let mut hits = usize::from(event.contains(&y));
    for _ in 1..samples {
        dist.sample_into(rng, &mut y);
        hits += usize::from(event.contains(&y));
    }
    bernoulli_estimate(hits, samples)
}

/// `P(E) - Q(E)`, exact.
pub fn separation(p: &DistributionSpec, q: &DistributionSpec, event: &Event) -> Result<f64> {
    Ok(event_probability_exact(p, event)? - event_probability_exact(q, event)?)
}

/// A finite class of candidate events with its guaranteed separation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventClass {
    pub gamma: f64,
    pub events: Vec<Event>,
    /// Some event separates any pair with directed KL at least `gamma` by this much.
    pub xi_bound: f64,
    /// Threshold grid step for Gaussian classes.
    pub delta: Option<f64>,
}

/// The linear lower-bound constant for Gaussian threshold events over a
/// mean box of width `width`: half the smallest coordinate density at
/// distance `width` from its mean.
pub fn gaussian_erf_constant(sigmas: &[f64], width: f64) -> f64 {
    sigmas
        .iter()
        .map(|s| (-width * width / (2.0 * s * s)).exp() / (2.0 * (2.0 * PI).sqrt() * s))
        .fold(f64::INFINITY, f64::min)
}

/// Grid step `sigma_min * sqrt(2 gamma / k)`.
///
/// A directed KL of at least `gamma` bits forces some coordinate gap
/// `|mu_j - mu'_j| >= sigma_j sqrt(2 gamma ln2 / k)`, which is at least half
/// this step. Any threshold inside the mean box then separates by at least
/// `gap * phi_{sigma_j}(width)`, hence by `C * step` with the factor-2 slack
/// in [`gaussian_erf_constant`]. With unit sigmas the step is
/// `sqrt(2 gamma / k)`.
pub fn gaussian_grid_step(sigmas: &[f64], gamma: f64) -> f64 {
    let sigma = sigmas.iter().copied().fold(f64::INFINITY, f64::min);
    sigma * (2.0 * gamma / sigmas.len() as f64).sqrt()
}

/// Enumerates the parametric event class for `family` at divergence `gamma`.
pub fn enumerate_event_class(family: &Family, gamma: f64, budget: &BoundednessBudget) -> Result<EventClass> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid("gamma", format!("{gamma} is not positive")));
    }
    family.validate()?;
    let k = family.k();
    match family {
        Family::BernoulliProduct { .. } | Family::BaryProduct { .. } => {
            let b = family.alphabet().unwrap_or(2);
            let events = (1..=k)
                .flat_map(|j| (0..b).map(move |t| Event::CoordinateEquals { j, t: t as u8 }))
                .collect();
            let kb = (k * b) as f64;
            Ok(EventClass {
                gamma,
                events,
                xi_bound: gamma * gamma / (2.0 * kb * kb * budget.m_cap),
                delta: None,
            })
        }
        Family::SphericalGaussian { sigmas, mean_range } => {
            let width = mean_range[1] - mean_range[0];
            let delta = gaussian_grid_step(sigmas, gamma);
            let steps = (width / delta + 1e-9).floor() as usize;
            let events = (1..=k)
                .flat_map(|j| {
                    (0..=steps).map(move |i| Event::CoordinateThreshold {
                        j,
                        t: mean_range[0] + i as f64 * delta,
                    })
                })
                .collect();
            Ok(EventClass {
                gamma,
                events,
                xi_bound: gaussian_erf_constant(sigmas, width) * delta,
                delta: Some(delta),
            })
        }
    }
}

/// The event `E(P, Q, gamma/2)`.
pub fn admit_event(p: &DistributionSpec, q: &DistributionSpec, gamma: f64) -> Result<Event> {
    likelihood_ratio_event(p, q, gamma / 2.0)
}

/// Guaranteed separation `gamma^2 / (8M)` of [`admit_event`] when `KL(P||Q) >= gamma`.
pub fn admit_bound(gamma: f64, m: f64) -> f64 {
    gamma * gamma / (8.0 * m)
}

/// The approximate-distribution construction: with `KL(P||P_hat)`,
/// `KL(Q||Q_hat) <= alpha` and `KL(P||Q) >= gamma`, the event
/// `E(P_hat, Q_hat, b^2)` with `b = gamma^2/(8M) - sqrt(2 alpha)` separates
/// `P` and `Q` by at least `b^4/(2M) - sqrt(2 alpha)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxDistEvent {
    pub event: Event,
    pub b: f64,
    pub tau: f64,
    pub bound: f64,
    /// Whether `gamma > 8M(sqrt(2 alpha) + (8 M^2 alpha)^(1/8))`.
    pub premise_holds: bool,
}

pub fn approxdist_event(
    p_hat: &DistributionSpec,
    q_hat: &DistributionSpec,
    gamma: f64,
    m: f64,
    alpha: f64,
) -> Result<ApproxDistEvent> {
    let b = gamma * gamma / (8.0 * m) - (2.0 * alpha).sqrt();
    let tau = b * b;
    Ok(ApproxDistEvent {
        event: likelihood_ratio_event(p_hat, q_hat, tau)?,
        b,
        tau,
        bound: b.powi(4) / (2.0 * m) - (2.0 * alpha).sqrt(),
        premise_holds: gamma > 8.0 * m * ((2.0 * alpha).sqrt() + (8.0 * m * m * alpha).powf(0.125)),
    })
}

/// Closed-form threshold `(gamma^2/(8M) - sqrt(2 alpha))^2`.
/// Identical to `approxdist_event(..).tau`.
pub fn approxdist_statement_tau(gamma: f64, m: f64, alpha: f64) -> f64 {
    (gamma * gamma / (8.0 * m) - (2.0 * alpha).sqrt()).powi(2)
}
