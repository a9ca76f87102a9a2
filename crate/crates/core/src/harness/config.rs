//! Scenario documents.
//!
//! A scenario is a single JSON object. Every optional field has an explicit
//! default and [`ScenarioSpec::to_json`] writes all of them, so a saved
//! scenario describes itself completely.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{BoundednessBudget, DistributionSpec, Family, DEFAULT_GAUSSIAN_M_CAP, DEFAULT_LAMBDA};
use crate::error::{Error, Result};
use crate::model::{Concept, ContextDistribution, TargetModel};
use crate::reductions::PipelineConfig;
use crate::seed::SeedPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineKind {
    Forward,
    Reverse,
    /// Only the direct fallback plus selection.
    Direct,
}

impl PipelineKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PipelineKind::Forward => "forward",
            PipelineKind::Reverse => "reverse",
            PipelineKind::Direct => "direct",
        }
    }
}

/// How `(P0, P1)` are produced for each trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PairRecipe {
    Explicit { p0: DistributionSpec, p1: DistributionSpec },
    /// Bernoulli products with biases `center -/+ gap/2`, the sign drawn
    /// per coordinate from the trial seed.
    BernoulliGap { center: f64, gap: f64 },
    /// Gaussians with means `low` and `low + gap` in every coordinate.
    GaussianGap { low: f64, gap: f64 },
    /// `P0 = P1`, drawn per trial: biases uniform in `[0.2, 0.8]`, or means
    /// uniform over the family's mean range.
    RandomIdentical,
}

/// Pipeline knobs. Field meanings follow [`PipelineConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineParams {
    pub epsilon: f64,
    pub delta: f64,
    pub gamma: Option<f64>,
    pub xi: Option<f64>,
    pub cn_epsilon: f64,
    pub cn_constant: f64,
    pub concept_size: usize,
    pub m_p: usize,
    pub separate_max_draws: usize,
    pub restarts: usize,
    pub mixture_sample: usize,
    pub health_eta: f64,
    pub xi_min: f64,
    pub xi_fraction: f64,
    pub mixture_alpha: f64,
    pub draw_budget: u64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            epsilon: 0.1,
            delta: 0.2,
            gamma: None,
            xi: None,
            cn_epsilon: 0.25,
            cn_constant: 4.0,
            concept_size: 2,
            m_p: 200,
            separate_max_draws: 20_000,
            restarts: 4,
            mixture_sample: 2_000,
            health_eta: 0.05,
            xi_min: 0.05,
            xi_fraction: 0.9,
            mixture_alpha: 0.05,
            draw_budget: 10_000_000,
        }
    }
}

fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}

fn default_trials() -> usize {
    1
}

fn default_threshold() -> f64 {
    0.8
}

fn default_context() -> ContextDistribution {
    ContextDistribution::Uniform
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub pipeline: PipelineKind,
    pub n: usize,
    pub family: Family,
    pub concept: Concept,
    #[serde(default = "default_context")]
    pub context_dist: ContextDistribution,
    pub targets: PairRecipe,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// `null` means `k log2(1/lambda)` for discrete families and 64 bits for
    /// Gaussians; filled in at load.
    #[serde(default)]
    pub m_cap: Option<f64>,
    #[serde(default)]
    pub params: PipelineParams,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Minimum success fraction for `--assert`.
    #[serde(default = "default_threshold")]
    pub success_threshold: f64,
}

/// Rewrites a module error as a config error rooted at `prefix`.
fn at(prefix: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => Error::config(format!("{prefix}.{name}"), reason),
        Error::Config { .. } => e,
        other => Error::config(prefix, other.to_string()),
    }
}

impl ScenarioSpec {
    /// Parses, fills defaults and validates. Errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut spec: ScenarioSpec = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path.is_empty() { ".".to_string() } else { path }, e.into_inner().to_string())
        })?;
        spec.resolve();
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    fn resolve(&mut self) {
        if self.m_cap.is_none() {
            self.m_cap = Some(self.bounds().m_cap);
        }
    }

    pub fn bounds(&self) -> BoundednessBudget {
        match self.m_cap {
            Some(m_cap) => BoundednessBudget {
                m_cap,
                lambda: self.lambda,
            },
            None => BoundednessBudget::for_family(&self.family, self.lambda, DEFAULT_GAUSSIAN_M_CAP),
        }
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        let p = &self.params;
        PipelineConfig {
            family: self.family.clone(),
            bounds: self.bounds(),
            epsilon: p.epsilon,
            delta: p.delta,
            gamma: p.gamma,
            xi: p.xi,
            cn_epsilon: p.cn_epsilon,
            cn_constant: p.cn_constant,
            concept_size: p.concept_size,
            m_p: p.m_p,
            separate_max_draws: p.separate_max_draws,
            restarts: p.restarts,
            mixture_sample: p.mixture_sample,
            health_eta: p.health_eta,
            xi_min: p.xi_min,
            xi_fraction: p.xi_fraction,
            mixture_alpha: p.mixture_alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::config("name", "must not be empty"));
        }
        self.family.validate().map_err(|e| at("family", e))?;
        self.bounds().validate().map_err(|e| at("lambda", e))?;
        if self.family.is_discrete() {
            let derived = BoundednessBudget::discrete(self.family.k(), self.lambda).m_cap;
            if self.m_cap.is_some_and(|m| m + 1e-9 < derived) {
                return Err(Error::config("m_cap", format!("below k log2(1/lambda) = {derived}")));
            }
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.success_threshold) {
            return Err(Error::config("success_threshold", "must lie in [0, 1]"));
        }
        if self.params.draw_budget == 0 {
            return Err(Error::config("params.draw_budget", "must be positive"));
        }
        self.pipeline_config().validate().map_err(|e| at("params", e))?;
        match &self.targets {
            PairRecipe::Explicit { p0, p1 } => {
                self.family.check_member(p0, &self.bounds()).map_err(|e| at("targets.p0", e))?;
                self.family.check_member(p1, &self.bounds()).map_err(|e| at("targets.p1", e))?;
            }
            PairRecipe::BernoulliGap { center, gap } => {
                if !matches!(self.family, Family::BernoulliProduct { .. }) {
                    return Err(Error::config("targets.kind", "bernoulli-gap needs a bernoulli-product family"));
                }
                let (lo, hi) = (center - gap / 2.0, center + gap / 2.0);
                if !(*gap >= 0.0 && lo >= self.lambda && hi <= 1.0 - self.lambda) {
                    return Err(Error::config("targets.gap", format!("biases {lo}..{hi} leave [lambda, 1 - lambda]")));
                }
            }
            PairRecipe::GaussianGap { low, gap } => {
                let Family::SphericalGaussian { mean_range, .. } = &self.family else {
                    return Err(Error::config("targets.kind", "gaussian-gap needs a spherical-gaussian family"));
                };
                if !(*gap >= 0.0 && *low >= mean_range[0] && low + gap <= mean_range[1]) {
                    return Err(Error::config("targets.gap", format!("means outside mean_range {mean_range:?}")));
                }
            }
            PairRecipe::RandomIdentical => {}
        }
        let target = self.target(0);
        target.validate(self.lambda).map_err(|e| at("targets", e))?;
        if let Err(e) = target.concept.validate(self.n) {
            return Err(at("concept", e));
        }
        Ok(())
    }

    /// The seed path of one trial.
    pub fn trial_seed(&self, trial: usize) -> SeedPath {
        SeedPath::root(self.seed).child(trial as u64)
    }

    /// Ground truth for `trial`.
    pub fn target(&self, trial: usize) -> TargetModel {
        let mut rng = self.trial_seed(trial).child(0).stream();
        let k = self.family.k();
        let (p0, p1) = match &self.targets {
            PairRecipe::Explicit { p0, p1 } => (p0.clone(), p1.clone()),
            PairRecipe::BernoulliGap { center, gap } => {
                let signs: Vec<f64> = (0..k).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
                let side = |s: f64| DistributionSpec::BernoulliProduct {
                    biases: signs.iter().map(|sign| center + s * sign * gap / 2.0).collect(),
                };
                (side(-1.0), side(1.0))
            }
            PairRecipe::GaussianGap { low, gap } => {
                let sigmas = match &self.family {
                    Family::SphericalGaussian { sigmas, .. } => sigmas.clone(),
                    _ => vec![1.0; k],
                };
                (
                    DistributionSpec::SphericalGaussian {
                        means: vec![*low; k],
                        sigmas: sigmas.clone(),
                    },
                    DistributionSpec::SphericalGaussian {
                        means: vec![low + gap; k],
                        sigmas,
                    },
                )
            }
            PairRecipe::RandomIdentical => {
                let p = match &self.family {
                    Family::BernoulliProduct { k } => DistributionSpec::BernoulliProduct {
                        biases: (0..*k).map(|_| rng.random_range(0.2..0.8)).collect(),
                    },
                    Family::BaryProduct { k, b } => DistributionSpec::BaryProduct {
                        rows: (0..*k)
                            .map(|_| {
                                let raw: Vec<f64> = (0..*b).map(|_| rng.random_range(1.0..2.0)).collect();
                                let s: f64 = raw.iter().sum();
                                raw.into_iter().map(|v| v / s).collect()
                            })
                            .collect(),
                    },
                    Family::SphericalGaussian { sigmas, mean_range } => DistributionSpec::SphericalGaussian {
                        means: (0..sigmas.len()).map(|_| rng.random_range(mean_range[0]..mean_range[1])).collect(),
                        sigmas: sigmas.clone(),
                    },
                };
                (p.clone(), p)
            }
        };
        TargetModel {
            n: self.n,
            concept: self.concept.clone(),
            p0,
            p1,
            context_dist: self.context_dist.clone(),
        }
    }
}

/// Scenarios shipped with the crate, by name.
pub const BUNDLED: [(&str, &str); 4] = [
    ("forward-product-easy", include_str!("../../scenarios/forward-product-easy.json")),
    ("forward-degenerate", include_str!("../../scenarios/forward-degenerate.json")),
    ("reverse-gaussian-easy", include_str!("../../scenarios/reverse-gaussian-easy.json")),
    ("reverse-gaussian-unhealthy", include_str!("../../scenarios/reverse-gaussian-unhealthy.json")),
];

pub fn bundled(name: &str) -> Result<ScenarioSpec> {
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::config("name", format!("no bundled scenario `{name}`")))?;
    ScenarioSpec::from_json(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_round_trip() {
        for (name, _) in BUNDLED {
            let spec = bundled(name).unwrap();
            let again = ScenarioSpec::from_json(&spec.to_json()).unwrap();
            assert_eq!(spec, again);
            assert!(spec.to_json().contains("\"m_cap\""));
        }
    }

    #[test]
    fn bad_bias_names_the_field() {
        let text = r#"{
            "name": "bad", "pipeline": "forward", "n": 3,
            "family": {"kind": "bernoulli-product", "k": 2},
            "concept": {"kind": "dictator", "variable": 1},
            "targets": {"kind": "explicit",
                "p0": {"family": "bernoulli-product", "biases": [0.5, 0.0001]},
                "p1": {"family": "bernoulli-product", "biases": [0.5, 0.5]}}
        }"#;
        match ScenarioSpec::from_json(text) {
            Err(Error::Config { path, .. }) => assert!(path.starts_with("targets.p0"), "{path}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_the_path() {
        let text = r#"{"name": "x", "pipeline": "sideways"}"#;
        match ScenarioSpec::from_json(text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "pipeline"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn gap_recipe_is_seeded() {
        let spec = bundled("forward-product-easy").unwrap();
        assert_eq!(spec.target(3), spec.target(3));
        let t = spec.target(0);
        let (DistributionSpec::BernoulliProduct { biases: a }, DistributionSpec::BernoulliProduct { biases: b }) = (&t.p0, &t.p1) else {
            panic!()
        };
        for (x, y) in a.iter().zip(b) {
            assert!(((x - y).abs() - 0.4).abs() < 1e-12);
        }
    }
}
