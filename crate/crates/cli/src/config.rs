//! Experiment configuration: a TOML document with `[experiment]`,
//! `[system]`, `[params]` and `[output]` sections.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    ModuliCheck,
    MollifyVerify,
    Frobenius,
    Surface,
    OdeCheck,
    OdeFunnel,
    PdeCheck,
    PdeSolveSpecial,
    PdeFrames,
    DynTransport,
    DynDominate,
    DynTraces,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::ModuliCheck => "moduli-check",
            Kind::MollifyVerify => "mollify-verify",
            Kind::Frobenius => "frobenius",
            Kind::Surface => "surface",
            Kind::OdeCheck => "ode-check",
            Kind::OdeFunnel => "ode-funnel",
            Kind::PdeCheck => "pde-check",
            Kind::PdeSolveSpecial => "pde-solve-special",
            Kind::PdeFrames => "pde-frames",
            Kind::DynTransport => "dyn-transport",
            Kind::DynDominate => "dyn-dominate",
            Kind::DynTraces => "dyn-traces",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    PaperEx1,
    Peano,
    PaperEx2,
    PaperEx3,
    Contact,
    Involutive,
    CatMap,
    SkewProduct,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    Holds,
    Fails,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CriterionChoice {
    Osgood,
    Limit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expectation>,
    #[serde(default)]
    pub seed: u64,
}

/// Expression strings and coordinates describing the system under study.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct System {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
    /// ODE right-hand sides `ẏ = F(t, y)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhs: Option<Vec<String>>,
    /// PDE coefficients `F^{ij}` or distribution coefficients `a_ij`, by row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<String>>>,
    /// Number of independent variables (rank of a distribution).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Rows of a coframe, as 1-form strings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forms: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moduli: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overall: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulus: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_modulus: Option<String>,
    /// Sampled function for mollification.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_names: Option<Vec<String>>,
    /// Special-form factors `G_i(yⁱ)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<String>>,
    /// Special-form potentials `H_i(x)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inverse: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torus: Option<bool>,
    /// Spanning columns of the starting plane field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<Vec<f64>>>,
    /// Spanning columns of the invariant plane field the iterates approach.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invariant: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expanding: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transverse: Option<Vec<usize>>,
    /// Orthonormal annihilator of the starting field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coframe: Option<Vec<String>>,
    /// Orthonormal annihilator of the invariant field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit_coframe: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    /// Columns of the extended matrix, 1-based.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y0: Option<Vec<f64>>,
}

/// Numeric parameters; unset entries are filled per experiment on resolve.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Exponents `a11 a12 a21 a22 b1 b2` of the mixed PDE.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixed: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_dirs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criterion: Option<CriterionChoice>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub system: System,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub output: Output,
}

impl ExperimentConfig {
    pub fn new(kind: Kind) -> ExperimentConfig {
        ExperimentConfig {
            experiment: Experiment {
                kind,
                preset: None,
                expect: None,
                seed: 0,
            },
            system: System::default(),
            params: Params::default(),
            output: Output::default(),
        }
    }

    /// Parse errors carry the line and column of the offending key.
    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        toml::from_str(text).map_err(|e| anyhow::anyhow!("invalid config: {e}"))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).context("cannot write config as TOML")
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml("[experiment]\nkind = \"frobenius\"\n\n[params]\nalpah = 0.5\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("alpah") && err.contains("line 5"), "{err}");
    }

    #[test]
    fn minimal_config_round_trips() {
        let mut c = ExperimentConfig::new(Kind::OdeCheck);
        c.experiment.preset = Some(Preset::PaperEx1);
        c.params.alpha = Some(0.9);
        c.system.matrix = Some(vec![vec!["x".into(), "0".into()]]);
        let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
