//! Outcome distribution families.
//!
//! Three product families are supported: Bernoulli products over `{0,1}^k`,
//! b-ary products over `{0,..,b-1}^k`, and axis-aligned Gaussians with known
//! per-coordinate standard deviations. Discrete parameters are kept inside
//! `[lambda, 1 - lambda]` so that `-log2 P(y) <= k * log2(1/lambda)` for every
//! outcome; Gaussian log-densities are clamped at `-m_cap` by the evaluator.
//!
//! All information quantities are in bits.

use std::f64::consts::{LN_2, PI};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on b-ary rows summing to one.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Largest discrete domain that is enumerated exhaustively.
pub const MAX_ENUMERATION: usize = 1 << 20;

/// Default smoothing floor for discrete families.
pub const DEFAULT_LAMBDA: f64 = 1e-3;

/// Default evaluator clamp for Gaussian families, in bits.
pub const DEFAULT_GAUSSIAN_M_CAP: f64 = 64.0;

/// A point in outcome space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OutcomeVector {
    Discrete(Vec<u8>),
    Real(Vec<f64>),
}

impl OutcomeVector {
    pub fn len(&self) -> usize {
        match self {
            OutcomeVector::Discrete(v) => v.len(),
            OutcomeVector::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_discrete(&self) -> Option<&[u8]> {
        match self {
            OutcomeVector::Discrete(v) => Some(v),
            OutcomeVector::Real(_) => None,
        }
    }

    pub fn as_real(&self) -> Option<&[f64]> {
        match self {
            OutcomeVector::Real(v) => Some(v),
            OutcomeVector::Discrete(_) => None,
        }
    }
}

/// A distribution family together with its outcome shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Family {
    BernoulliProduct {
        k: usize,
    },
    BaryProduct {
        k: usize,
        b: usize,
    },
    SphericalGaussian {
        /// Known per-coordinate standard deviations.
        sigmas: Vec<f64>,
        /// Means are constrained to `[lo, hi]^k`.
        #[serde(default = "unit_range")]
        mean_range: [f64; 2],
    },
}

fn unit_range() -> [f64; 2] {
    [0.0, 1.0]
}

impl Family {
    pub fn k(&self) -> usize {
        match self {
            Family::BernoulliProduct { k } | Family::BaryProduct { k, .. } => *k,
            Family::SphericalGaussian { sigmas, .. } => sigmas.len(),
        }
    }

    /// Alphabet size for discrete families.
    pub fn alphabet(&self) -> Option<usize> {
        match self {
            Family::BernoulliProduct { .. } => Some(2),
            Family::BaryProduct { b, .. } => Some(*b),
            Family::SphericalGaussian { .. } => None,
        }
    }

    pub fn is_discrete(&self) -> bool {
        self.alphabet().is_some()
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::BernoulliProduct { .. } => "bernoulli-product",
            Family::BaryProduct { .. } => "bary-product",
            Family::SphericalGaussian { .. } => "spherical-gaussian",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Family::BernoulliProduct { k } => {
                if *k == 0 {
                    return Err(Error::invalid("k", "must be positive"));
                }
            }
            Family::BaryProduct { k, b } => {
                if *k == 0 {
                    return Err(Error::invalid("k", "must be positive"));
                }
                if !(2..=256).contains(b) {
                    return Err(Error::invalid("b", format!("{b} not in [2, 256]")));
                }
            }
            Family::SphericalGaussian { sigmas, mean_range } => {
                if sigmas.is_empty() {
                    return Err(Error::invalid("sigmas", "must be non-empty"));
                }
                if let Some(s) = sigmas.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
                    return Err(Error::invalid("sigmas", format!("{s} is not a positive finite value")));
                }
                if !(mean_range[0].is_finite() && mean_range[1].is_finite() && mean_range[0] < mean_range[1]) {
                    return Err(Error::invalid("mean_range", format!("{mean_range:?} is not a proper interval")));
                }
            }
        }
        Ok(())
    }

    /// The fixed spec used when a learner has nothing to fit: uniform rows for
    /// discrete families, the centre of the mean box for Gaussians.
    pub fn default_spec(&self) -> DistributionSpec {
        match self {
            Family::BernoulliProduct { k } => DistributionSpec::BernoulliProduct { biases: vec![0.5; *k] },
            Family::BaryProduct { k, b } => DistributionSpec::BaryProduct {
                rows: vec![vec![1.0 / *b as f64; *b]; *k],
            },
            Family::SphericalGaussian { sigmas, mean_range } => DistributionSpec::SphericalGaussian {
                means: vec![0.5 * (mean_range[0] + mean_range[1]); sigmas.len()],
                sigmas: sigmas.clone(),
            },
        }
    }

    /// Checks that `spec` is a member of this family under `budget`.
    pub fn check_member(&self, spec: &DistributionSpec, budget: &BoundednessBudget) -> Result<()> {
        spec.validate(budget.lambda)?;
        let ok = match (self, spec) {
            (Family::BernoulliProduct { k }, DistributionSpec::BernoulliProduct { biases }) => biases.len() == *k,
            (Family::BaryProduct { k, b }, DistributionSpec::BaryProduct { rows }) => {
                rows.len() == *k && rows.iter().all(|r| r.len() == *b)
            }
            (Family::SphericalGaussian { sigmas, mean_range }, DistributionSpec::SphericalGaussian { means, sigmas: s }) => {
                if s != sigmas {
                    return Err(Error::FamilyMismatch(format!("sigmas {s:?} differ from the family's {sigmas:?}")));
                }
                if let Some(m) = means.iter().find(|m| **m < mean_range[0] || **m > mean_range[1]) {
                    return Err(Error::invalid("means", format!("{m} outside {mean_range:?}")));
                }
                true
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::FamilyMismatch(format!("{} spec does not belong to {self:?}", spec.family_name())))
        }
    }
}

/// The boundedness contract: `-log2 P(y) <= m_cap` for every evaluated `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundednessBudget {
    pub m_cap: f64,
    pub lambda: f64,
}

impl BoundednessBudget {
    /// `m_cap = k * log2(1/lambda)`, exact for lambda-smoothed discrete products.
    pub fn discrete(k: usize, lambda: f64) -> Self {
        BoundednessBudget {
            m_cap: k as f64 * (1.0 / lambda).log2(),
            lambda,
        }
    }

    pub fn gaussian(m_cap: f64) -> Self {
        BoundednessBudget {
            m_cap,
            lambda: DEFAULT_LAMBDA,
        }
    }

    pub fn for_family(family: &Family, lambda: f64, gaussian_m_cap: f64) -> Self {
        if family.is_discrete() {
            Self::discrete(family.k(), lambda)
        } else {
            BoundednessBudget {
                m_cap: gaussian_m_cap,
                lambda,
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 0.5) {
            return Err(Error::invalid("lambda", format!("{} not in (0, 1/2)", self.lambda)));
        }
        if !(self.m_cap.is_finite() && self.m_cap > 0.0) {
            return Err(Error::invalid("m_cap", format!("{} is not positive", self.m_cap)));
        }
        Ok(())
    }
}

/// A member of one of the supported families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistributionSpec {
    /// `biases[j] = Pr[y_j = 1]`.
    BernoulliProduct { biases: Vec<f64> },
    /// `rows[j][s] = Pr[y_j = s]`.
    BaryProduct { rows: Vec<Vec<f64>> },
    SphericalGaussian { means: Vec<f64>, sigmas: Vec<f64> },
}

impl DistributionSpec {
    /// Bernoulli product with biases clamped into `[lambda, 1 - lambda]`.
    pub fn bernoulli_smoothed(biases: &[f64], lambda: f64) -> Self {
        DistributionSpec::BernoulliProduct {
            biases: biases.iter().map(|p| p.clamp(lambda, 1.0 - lambda)).collect(),
        }
    }

    /// b-ary product with each row projected onto `{p : p_s >= lambda, sum p = 1}`.
    pub fn bary_smoothed(rows: &[Vec<f64>], lambda: f64) -> Self {
        DistributionSpec::BaryProduct {
            rows: rows.iter().map(|r| floor_row(r, lambda)).collect(),
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            DistributionSpec::BernoulliProduct { .. } => "bernoulli-product",
            DistributionSpec::BaryProduct { .. } => "bary-product",
            DistributionSpec::SphericalGaussian { .. } => "spherical-gaussian",
        }
    }

    pub fn k(&self) -> usize {
        match self {
            DistributionSpec::BernoulliProduct { biases } => biases.len(),
            DistributionSpec::BaryProduct { rows } => rows.len(),
            DistributionSpec::SphericalGaussian { means, .. } => means.len(),
        }
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self, DistributionSpec::SphericalGaussian { .. })
    }

    /// Alphabet size of a discrete spec.
    pub fn alphabet(&self) -> Option<usize> {
        match self {
            DistributionSpec::BernoulliProduct { .. } => Some(2),
            DistributionSpec::BaryProduct { rows } => rows.first().map(Vec::len),
            DistributionSpec::SphericalGaussian { .. } => None,
        }
    }

    /// Parameter-range validation against the smoothing floor.
    pub fn validate(&self, lambda: f64) -> Result<()> {
        if self.k() == 0 {
            return Err(Error::invalid("k", "outcome dimension must be positive"));
        }
        match self {
            DistributionSpec::BernoulliProduct { biases } => {
                for (j, p) in biases.iter().enumerate() {
                    if !(p.is_finite() && *p >= lambda && *p <= 1.0 - lambda) {
                        return Err(Error::invalid(
                            "biases",
                            format!("biases[{j}] = {p} outside [{lambda}, {}]", 1.0 - lambda),
                        ));
                    }
                }
            }
            DistributionSpec::BaryProduct { rows } => {
                let b = rows[0].len();
                if b < 2 {
                    return Err(Error::invalid("rows", "alphabet size must be at least 2"));
                }
                for (j, row) in rows.iter().enumerate() {
                    if row.len() != b {
                        return Err(Error::invalid("rows", format!("rows[{j}] has {} entries, expected {b}", row.len())));
                    }
                    if let Some((s, p)) = row.iter().enumerate().find(|(_, p)| !(p.is_finite() && **p >= lambda)) {
                        return Err(Error::invalid("rows", format!("rows[{j}][{s}] = {p} below floor {lambda}")));
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                        return Err(Error::invalid("rows", format!("rows[{j}] sums to {sum}")));
                    }
                }
            }
            DistributionSpec::SphericalGaussian { means, sigmas } => {
                if means.len() != sigmas.len() {
                    return Err(Error::DimensionMismatch {
                        expected: means.len(),
                        actual: sigmas.len(),
                    });
                }
                if let Some(m) = means.iter().find(|m| !m.is_finite()) {
                    return Err(Error::invalid("means", format!("{m} is not finite")));
                }
                if let Some(s) = sigmas.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
                    return Err(Error::invalid("sigmas", format!("{s} is not positive")));
                }
            }
        }
        Ok(())
    }

    /// Errors unless `self` and `other` share family and shape.
    pub fn check_compatible(&self, other: &DistributionSpec) -> Result<()> {
        let same = match (self, other) {
            (DistributionSpec::BernoulliProduct { biases: a }, DistributionSpec::BernoulliProduct { biases: b }) => {
                a.len() == b.len()
            }
            (DistributionSpec::BaryProduct { .. }, DistributionSpec::BaryProduct { .. }) => {
                self.k() == other.k() && self.alphabet() == other.alphabet()
            }
            (DistributionSpec::SphericalGaussian { means: a, .. }, DistributionSpec::SphericalGaussian { means: b, .. }) => {
                a.len() == b.len()
            }
            _ => false,
        };
        if same {
            Ok(())
        } else {
            Err(Error::FamilyMismatch(format!(
                "{} (k={}) vs {} (k={})",
                self.family_name(),
                self.k(),
                other.family_name(),
                other.k()
            )))
        }
    }

    /// Probability of symbol `s` at coordinate `j` for discrete specs.
    #[inline]
    pub fn coordinate_prob(&self, j: usize, s: u8) -> f64 {
        match self {
            DistributionSpec::BernoulliProduct { biases } => {
                if s == 1 {
                    biases[j]
                } else if s == 0 {
                    1.0 - biases[j]
                } else {
                    0.0
                }
            }
            DistributionSpec::BaryProduct { rows } => rows[j].get(s as usize).copied().unwrap_or(0.0),
            DistributionSpec::SphericalGaussian { .. } => 0.0,
        }
    }

    /// Draws one outcome.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> OutcomeVector {
        let mut out = match self {
            DistributionSpec::SphericalGaussian { .. } => OutcomeVector::Real(Vec::with_capacity(self.k())),
            _ => OutcomeVector::Discrete(Vec::with_capacity(self.k())),
        };
        self.sample_into(rng, &mut out);
        out
    }

    /// Draws one outcome into `out`, reusing its allocation.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut OutcomeVector) {
        match self {
            DistributionSpec::BernoulliProduct { biases } => {
                let v = discrete_buffer(out);
                v.extend(biases.iter().map(|p| u8::from(rng.random::<f64>() < *p)));
            }
            DistributionSpec::BaryProduct { rows } => {
                let v = discrete_buffer(out);
                for row in rows {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut sym = row.len() - 1;
                    for (s, p) in row.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            sym = s;
                            break;
                        }
                    }
                    v.push(sym as u8);
                }
            }
            DistributionSpec::SphericalGaussian { means, sigmas } => {
                let v = real_buffer(out);
                v.extend(means.iter().zip(sigmas).map(|(m, s)| {
                    let z: f64 = rng.sample(StandardNormal);
                    m + s * z
                }));
            }
        }
    }

    fn check_outcome(&self, y: &OutcomeVector) -> Result<()> {
        if y.len() != self.k() {
            return Err(Error::DimensionMismatch {
                expected: self.k(),
                actual: y.len(),
            });
        }
        match (self.is_discrete(), y) {
            (true, OutcomeVector::Discrete(v)) => {
                let b = self.alphabet().unwrap_or(2);
                if let Some(s) = v.iter().find(|s| **s as usize >= b) {
                    return Err(Error::invalid("outcome", format!("symbol {s} outside alphabet of size {b}")));
                }
                Ok(())
            }
            (false, OutcomeVector::Real(v)) => {
                if v.iter().all(|x| x.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::invalid("outcome", "real outcome entries must be finite"))
                }
            }
            _ => Err(Error::FamilyMismatch(format!("outcome kind does not match {}", self.family_name()))),
        }
    }

    /// Unclamped `log2` probability (mass or density) of `y`.
    pub fn log_density_exact(&self, y: &OutcomeVector) -> Result<f64> {
        self.check_outcome(y)?;
        Ok(self.log_density_unchecked(y))
    }

    /// `log2` density without shape checks; callers guarantee compatibility.
    #[inline]
    pub(crate) fn log_density_unchecked(&self, y: &OutcomeVector) -> f64 {
        match (self, y) {
            (DistributionSpec::SphericalGaussian { means, sigmas }, OutcomeVector::Real(v)) => {
                gaussian_log2_density(means, sigmas, v)
            }
            (_, OutcomeVector::Discrete(v)) => v
                .iter()
                .enumerate()
                .map(|(j, s)| self.coordinate_prob(j, *s).log2())
                .sum(),
            _ => f64::NEG_INFINITY,
        }
    }

    /// The bounded evaluator: `max(log2 density(y), -m_cap)`.
    pub fn log_density(&self, y: &OutcomeVector, budget: &BoundednessBudget) -> Result<f64> {
        Ok(self.log_density_exact(y)?.max(-budget.m_cap))
    }

    /// Smallest log-probability over the domain (discrete specs only).
    pub fn min_log_density(&self) -> Option<f64> {
        match self {
            DistributionSpec::BernoulliProduct { biases } => {
                Some(biases.iter().map(|p| p.min(1.0 - p).log2()).sum())
            }
            DistributionSpec::BaryProduct { rows } => Some(
                rows.iter()
                    .map(|r| r.iter().copied().fold(f64::INFINITY, f64::min).log2())
                    .sum(),
            ),
            DistributionSpec::SphericalGaussian { .. } => None,
        }
    }

    /// Shannon entropy in bits (differential entropy for Gaussians).
    pub fn entropy(&self) -> f64 {
        match self {
            DistributionSpec::BernoulliProduct { biases } => -biases.iter().map(|p| plogp(*p) + plogp(1.0 - p)).sum::<f64>(),
            DistributionSpec::BaryProduct { rows } => -rows.iter().flat_map(|r| r.iter()).map(|p| plogp(*p)).sum::<f64>(),
            DistributionSpec::SphericalGaussian { sigmas, .. } => sigmas
                .iter()
                .map(|s| 0.5 * (2.0 * PI * std::f64::consts::E * s * s).log2())
                .sum(),
        }
    }

    /// Number of points in a discrete domain, saturating.
    pub fn domain_size(&self) -> Option<usize> {
        let b = self.alphabet()?;
        let mut n: usize = 1;
        for _ in 0..self.k() {
            n = n.checked_mul(b)?;
        }
        Some(n)
    }

    /// Full probability table of a discrete spec, in lexicographic order of
    /// outcomes (coordinate 0 most significant).
    pub fn enumerate(&self) -> Result<Vec<(Vec<u8>, f64)>> {
        let b = self
            .alphabet()
            .ok_or_else(|| Error::ExactInfeasible("continuous outcome space".into()))?;
        let size = self
            .domain_size()
            .filter(|n| *n <= MAX_ENUMERATION)
            .ok_or_else(|| Error::ExactInfeasible(format!("domain {b}^{} exceeds {MAX_ENUMERATION} points", self.k())))?;
        let k = self.k();
        let mut out = Vec::with_capacity(size);
        let mut y = vec![0u8; k];
        for _ in 0..size {
            let p: f64 = y.iter().enumerate().map(|(j, s)| self.coordinate_prob(j, *s)).product();
            out.push((y.clone(), p));
            for j in (0..k).rev() {
                y[j] += 1;
                if (y[j] as usize) < b {
                    break;
                }
                y[j] = 0;
            }
        }
        Ok(out)
    }
}

fn discrete_buffer(out: &mut OutcomeVector) -> &mut Vec<u8> {
    if !matches!(out, OutcomeVector::Discrete(_)) {
        *out = OutcomeVector::Discrete(Vec::new());
    }
    match out {
        OutcomeVector::Discrete(v) => {
            v.clear();
            v
        }
        OutcomeVector::Real(_) => unreachable!(),
    }
}

fn real_buffer(out: &mut OutcomeVector) -> &mut Vec<f64> {
    if !matches!(out, OutcomeVector::Real(_)) {
        *out = OutcomeVector::Real(Vec::new());
    }
    match out {
        OutcomeVector::Real(v) => {
            v.clear();
            v
        }
        OutcomeVector::Discrete(_) => unreachable!(),
    }
}

#[inline]
fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

#[inline]
pub(crate) fn gaussian_log2_density(means: &[f64], sigmas: &[f64], y: &[f64]) -> f64 {
    let mut nats = 0.0;
    for ((m, s), x) in means.iter().zip(sigmas).zip(y) {
        let z = (x - m) / s;
        nats -= 0.5 * z * z + s.ln() + 0.5 * (2.0 * PI).ln();
    }
    nats / LN_2
}

/// Projects a row onto `{p : p_s >= floor, sum p = 1}`, keeping the
/// unclamped entries proportional to their inputs. This is the maximiser of
/// `sum_s row_s * log p_s` over the constrained simplex.
pub(crate) fn floor_row(row: &[f64], floor: f64) -> Vec<f64> {
    let b = row.len();
    let mut clamped = vec![false; b];
    loop {
        let free_mass: f64 = row.iter().zip(&clamped).filter(|(_, c)| !**c).map(|(r, _)| r.max(0.0)).sum();
        let n_clamped = clamped.iter().filter(|c| **c).count();
        let budget = 1.0 - n_clamped as f64 * floor;
        let n_free = b - n_clamped;
        let out: Vec<f64> = row
            .iter()
            .zip(&clamped)
            .map(|(r, c)| {
                if *c {
                    floor
                } else if free_mass > 0.0 {
                    r.max(0.0) * budget / free_mass
                } else {
                    budget / n_free as f64
                }
            })
            .collect();
        let mut changed = false;
        for (s, p) in out.iter().enumerate() {
            if !clamped[s] && *p < floor {
                clamped[s] = true;
                changed = true;
            }
        }
        if !changed {
            return out;
        }
    }
}

/// Closed-form KL divergence `KL(p || q)` in bits.
pub fn kl_divergence(p: &DistributionSpec, q: &DistributionSpec) -> Result<f64> {
    p.check_compatible(q)?;
    Ok(match (p, q) {
        (DistributionSpec::BernoulliProduct { biases: a }, DistributionSpec::BernoulliProduct { biases: b }) => {
            a.iter().zip(b).map(|(x, y)| bernoulli_kl(*x, *y)).sum()
        }
        (DistributionSpec::BaryProduct { rows: a }, DistributionSpec::BaryProduct { rows: b }) => a
            .iter()
            .zip(b)
            .map(|(ra, rb)| categorical_kl(ra, rb))
            .sum(),
        (
            DistributionSpec::SphericalGaussian { means: ma, sigmas: sa },
            DistributionSpec::SphericalGaussian { means: mb, sigmas: sb },
        ) => {
            let mut nats = 0.0;
            for j in 0..ma.len() {
                let d = ma[j] - mb[j];
                let ratio = sa[j] / sb[j];
                nats += (sb[j] / sa[j]).ln() + 0.5 * (ratio * ratio + d * d / (sb[j] * sb[j])) - 0.5;
            }
            nats / LN_2
        }
        _ => unreachable!("compatibility checked above"),
    })
}

/// Bernoulli KL in bits.
pub fn bernoulli_kl(p: f64, q: f64) -> f64 {
    categorical_kl(&[1.0 - p, p], &[1.0 - q, q])
}

fn categorical_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| {
            if *a <= 0.0 {
                0.0
            } else if *b <= 0.0 {
                f64::INFINITY
            } else {
                a * (a / b).log2()
            }
        })
        .sum::<f64>()
        .max(0.0)
}

/// Single-distribution learner: smoothed empirical frequencies for discrete
/// families, the box-clipped empirical mean (known sigma) for Gaussians.
pub fn fit_single(family: &Family, sample: &[OutcomeVector], budget: &BoundednessBudget) -> Result<DistributionSpec> {
    fit_iter(family, sample.iter(), budget)
}

pub(crate) fn fit_iter<'a, I>(family: &Family, sample: I, budget: &BoundednessBudget) -> Result<DistributionSpec>
where
    I: Iterator<Item = &'a OutcomeVector>,
{
    let k = family.k();
    match family {
        Family::BernoulliProduct { .. } | Family::BaryProduct { .. } => {
            let b = family.alphabet().unwrap_or(2);
            let mut counts = vec![0.0; k * b];
            let mut m = 0u64;
            for y in sample {
                let v = y
                    .as_discrete()
                    .ok_or_else(|| Error::FamilyMismatch("real outcome in a discrete sample".into()))?;
                if v.len() != k {
                    return Err(Error::DimensionMismatch { expected: k, actual: v.len() });
                }
                for (j, s) in v.iter().enumerate() {
                    if *s as usize >= b {
                        return Err(Error::invalid("outcome", format!("symbol {s} outside alphabet of size {b}")));
                    }
                    counts[j * b + *s as usize] += 1.0;
                }
                m += 1;
            }
            if m == 0 {
                return Err(Error::EmptyInput("fit_single sample"));
            }
            Ok(discrete_from_counts(family, &counts, m as f64, budget.lambda))
        }
        Family::SphericalGaussian { sigmas, mean_range } => {
            let mut sums = vec![0.0; k];
            let mut m = 0u64;
            for y in sample {
                let v = y
                    .as_real()
                    .ok_or_else(|| Error::FamilyMismatch("discrete outcome in a Gaussian sample".into()))?;
                if v.len() != k {
                    return Err(Error::DimensionMismatch { expected: k, actual: v.len() });
                }
                for (acc, x) in sums.iter_mut().zip(v) {
                    *acc += x;
                }
                m += 1;
            }
            if m == 0 {
                return Err(Error::EmptyInput("fit_single sample"));
            }
            Ok(DistributionSpec::SphericalGaussian {
                means: sums.iter().map(|s| (s / m as f64).clamp(mean_range[0], mean_range[1])).collect(),
                sigmas: sigmas.clone(),
            })
        }
    }
}

/// Builds a smoothed discrete spec from (possibly fractional) symbol counts
/// laid out as `counts[j * b + s]`.
pub(crate) fn discrete_from_counts(family: &Family, counts: &[f64], total: f64, lambda: f64) -> DistributionSpec {
    let k = family.k();
    match family {
        Family::BernoulliProduct { .. } => DistributionSpec::BernoulliProduct {
            biases: (0..k)
                .map(|j| {
                    (counts[j * 2 + 1] / total).clamp(lambda, 1.0 - lambda)
                })
                .collect(),
        },
        Family::BaryProduct { b, .. } => DistributionSpec::BaryProduct {
            rows: (0..k)
                .map(|j| {
                    let freq: Vec<f64> = (0..*b).map(|s| counts[j * b + s] / total).collect();
                    floor_row(&freq, lambda)
                })
                .collect(),
        },
        Family::SphericalGaussian { .. } => unreachable!("discrete families only"),
    }
}

/// Total variation distance between two discrete specs, by enumeration.
pub fn tv_distance(p: &DistributionSpec, q: &DistributionSpec) -> Result<f64> {
    p.check_compatible(q)?;
    let tp = p.enumerate()?;
    let tq = q.enumerate()?;
    Ok(0.5 * tp.iter().zip(&tq).map(|((_, a), (_, b))| (a - b).abs()).sum::<f64>())
}
