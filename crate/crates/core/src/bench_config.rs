//! JSON configuration of the benchmark commands.
//!
//! Every section is optional and falls back to the defaults below; unknown
//! fields are rejected.

use serde::{Deserialize, Serialize};

use crate::bases::Family;
use crate::bench::{default_sets, ModelSet};
use crate::error::{Error, Result};
use crate::lattice::LatticeKind;
use crate::models::{LatticeConfig, ModelConfig, ModelKind};
use crate::noise::EtaRule;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    /// Instance for single-instance commands.
    #[serde(default = "default_model")]
    pub model: ModelConfig,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_families")]
    pub families: Vec<Family>,
    #[serde(default)]
    pub seed: u64,
    /// Directory for cached spectral decompositions.
    #[serde(default)]
    pub cache_dir: Option<String>,
    #[serde(default)]
    pub curve: CurveSection,
    #[serde(default)]
    pub distribution: DistributionSection,
    #[serde(default)]
    pub cost: CostSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub projector: ProjectorSection,
    #[serde(default)]
    pub scaling: ScalingSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurveSection {
    pub eps_min: f64,
    pub eps_max: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistributionSection {
    pub sets: Vec<ModelSet>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostSection {
    /// Target errors; empty means `2ε_K(P)`.
    pub epsilons: Vec<f64>,
    /// Also report every other protocol the basis structure supports.
    pub all_protocols: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    /// Target error; `None` means `2ε_K(P)`.
    pub epsilon: Option<f64>,
    pub trials: usize,
    pub rules: Vec<EtaRule>,
    pub m_min: f64,
    pub m_max: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub tau: f64,
    pub shots: u64,
    pub k_max: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectorSection {
    pub degrees: Vec<usize>,
    /// Values of `n³/(e‖H‖²τ²)`, each in `(0, 1)`.
    pub ratios: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingSource {
    /// Sufficient measurement number from the bound equation.
    Bound,
    /// Necessary measurement number from noise simulation.
    Simulated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingSection {
    /// Subspace dimensions; empty means the largest admitted one per family.
    pub dims: Vec<usize>,
    pub points: usize,
    pub source: ScalingSource,
    pub trials: usize,
    pub ratio: f64,
}

fn default_model() -> ModelConfig {
    ModelConfig {
        model: ModelKind::Heisenberg,
        lattice: LatticeConfig { kind: LatticeKind::Chain, size: 10, seed: None },
        j: 1.0,
        u: None,
    }
}

fn default_d() -> usize {
    5
}

fn default_kappa() -> f64 {
    0.1
}

fn default_families() -> Vec<Family> {
    Family::ALL.to_vec()
}

impl Default for CurveSection {
    fn default() -> Self {
        Self { eps_min: 1e-6, eps_max: 1e-1, points: 41 }
    }
}

impl Default for DistributionSection {
    fn default() -> Self {
        Self { sets: default_sets(10) }
    }
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            epsilon: None,
            trials: 100,
            rules: vec![EtaRule::Tabulated, EtaRule::Threshold10],
            m_min: 1.0,
            m_max: 1e24,
            ratio: 10f64.powf(0.25),
        }
    }
}

impl Default for McSection {
    fn default() -> Self {
        Self { tau: 1.0, shots: 10_000, k_max: 3 }
    }
}

impl Default for ProjectorSection {
    fn default() -> Self {
        Self { degrees: vec![5], ratios: vec![0.25, 0.5, 0.9] }
    }
}

impl Default for ScalingSection {
    fn default() -> Self {
        Self { dims: Vec::new(), points: 25, source: ScalingSource::Bound, trials: 100, ratio: 10f64.powf(0.1) }
    }
}

impl Default for BenchConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults parse")
    }
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if self.d == 0 {
            return bad("d must be positive");
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return bad("kappa must lie in (0, 1)");
        }
        if self.families.is_empty() {
            return bad("families must not be empty");
        }
        let c = &self.curve;
        if !(c.eps_min > 0.0 && c.eps_max >= c.eps_min && c.eps_max.is_finite()) || c.points == 0 {
            return bad("curve needs 0 < eps_min ≤ eps_max and points ≥ 1");
        }
        if self.cost.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return bad("cost epsilons must be positive");
        }
        let n = &self.noise;
        if n.epsilon.is_some_and(|e| !(e > 0.0 && e.is_finite())) || n.trials == 0 || n.rules.is_empty() {
            return bad("noise needs a positive epsilon, trials ≥ 1 and at least one rule");
        }
        if !(n.ratio > 1.0 && n.m_min > 0.0 && n.m_max >= n.m_min && n.m_max.is_finite()) {
            return bad("noise grid needs ratio > 1 and 0 < m_min ≤ m_max");
        }
        let m = &self.mc;
        if !(m.tau > 0.0 && m.tau.is_finite()) || m.shots == 0 || m.k_max == 0 {
            return bad("mc needs tau > 0, shots ≥ 1 and k_max ≥ 1");
        }
        let p = &self.projector;
        if p.degrees.is_empty() || p.ratios.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
            return bad("projector needs degrees and ratios in (0, 1)");
        }
        let s = &self.scaling;
        if s.points < 2 || s.trials == 0 || !(s.ratio > 1.0) || s.dims.contains(&0) {
            return bad("scaling needs points ≥ 2, trials ≥ 1, ratio > 1 and positive dims");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_object_gives_defaults() {
        let c = BenchConfig::from_json("{}").unwrap();
        assert_eq!(c.d, 5);
        assert_eq!(c.families.len(), 7);
        assert_eq!(c.distribution.sets.len(), 6);
        assert_eq!(c, BenchConfig::default());
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let c = BenchConfig::from_json(r#"{"noise": {"trials": 20}, "families": ["GP", "F"]}"#).unwrap();
        assert_eq!(c.noise.trials, 20);
        assert_eq!(c.noise.rules.len(), 2);
        assert_eq!(c.families, vec![Family::GP, Family::F]);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(BenchConfig::from_json(r#"{"dd": 3}"#).is_err());
        assert!(BenchConfig::from_json(r#"{"noise": {"trial": 3}}"#).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(BenchConfig::from_json(r#"{"kappa": 1.5}"#).is_err());
        assert!(BenchConfig::from_json(r#"{"curve": {"eps_min": 0}}"#).is_err());
        assert!(BenchConfig::from_json(r#"{"projector": {"ratios": [1.0]}}"#).is_err());
    }

    #[test]
    fn round_trip() {
        let c = BenchConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(BenchConfig::from_json(&text).unwrap(), c);
    }

    proptest! {
        #[test]
        fn parsing_never_panics(text in "\\PC{0,200}") {
            let _ = BenchConfig::from_json(&text);
        }

        #[test]
        fn accepted_configs_round_trip(d in 1usize..40, kappa in 0.01f64..0.99, trials in 1usize..500) {
            let text = format!(r#"{{"d": {d}, "kappa": {kappa}, "noise": {{"trials": {trials}}}}}"#);
            let c = BenchConfig::from_json(&text).unwrap();
            prop_assert_eq!(BenchConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap(), c);
        }
    }
}
