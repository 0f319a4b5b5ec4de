//! Experiment configuration (TOML; unknown keys are rejected).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::basis::BasisSpec;
use crate::datagen::DgpConfig;
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::oracle_lab::{AreOptions, GammaSpec, OracleOptions, ZmOptions};
use crate::selection::PathSpec;
use crate::solver::SolverOptions;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    Theorem1,
    CorollaryLinear,
    SeriesRate,
    LogitMargin,
    GicSelection,
    TauFrequency,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Study::Theorem1 => "theorem1",
            Study::CorollaryLinear => "corollary-linear",
            Study::SeriesRate => "series-rate",
            Study::LogitMargin => "logit-margin",
            Study::GicSelection => "gic-selection",
            Study::TauFrequency => "tau-frequency",
        }
    }
}

/// Rule for `lambda2` given `lambda1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Lambda2Rule {
    /// `lambda2 = lambda1 sqrt(s*) / (2 ||beta*||_2)` from the oracle (or `beta0` for a linear truth).
    Remark4,
    Fixed { value: f64 },
    /// `lambda2 = kappa * lambda1`.
    Ratio { kappa: f64 },
}

/// Which Lipschitz constant enters `zeta` for the quadratic loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LipschitzForm {
    #[default]
    Statement,
    Proof,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PenaltyRule {
    Explicit {
        lambda0: f64,
        lambda1: f64,
        lambda2: Lambda2Rule,
    },
    /// `lambda0 = zeta` from the concentration bound (`t = log p` unless given),
    /// `lambda1 = multiplier * lambda0` with `multiplier >= 8`.
    LemmaQuad {
        #[serde(default = "eight")]
        multiplier: f64,
        lambda2: Lambda2Rule,
        #[serde(default)]
        t: Option<f64>,
        #[serde(default)]
        lipschitz: LipschitzForm,
    },
    /// `lambda0 = c0 sqrt(log(p) log(n) / n)`, `lambda1 = multiplier * lambda0`: the
    /// order of the concentration level with a practical constant.
    RateScaled {
        c0: f64,
        #[serde(default = "eight")]
        multiplier: f64,
        lambda2: Lambda2Rule,
    },
}

fn eight() -> f64 {
    8.0
}

impl PenaltyRule {
    pub fn lambda2_rule(&self) -> Lambda2Rule {
        match *self {
            PenaltyRule::Explicit { lambda2, .. }
            | PenaltyRule::LemmaQuad { lambda2, .. }
            | PenaltyRule::RateScaled { lambda2, .. } => lambda2,
        }
    }

    fn validate(&self) -> Result<()> {
        let l2 = self.lambda2_rule();
        match l2 {
            Lambda2Rule::Fixed { value } if !(value >= 0.0) => {
                return Err(Error::InvalidConfig("lambda2 value must be non-negative".into()))
            }
            Lambda2Rule::Ratio { kappa } if !(kappa >= 0.0) => {
                return Err(Error::InvalidConfig("lambda2 kappa must be non-negative".into()))
            }
            _ => {}
        }
        match *self {
            PenaltyRule::Explicit { lambda0, lambda1, .. } => {
                if !(lambda0 > 0.0) || !(lambda1 > 0.0) {
                    return Err(Error::InvalidConfig("explicit penalty needs lambda0, lambda1 > 0".into()));
                }
            }
            PenaltyRule::LemmaQuad { multiplier, t, .. } => {
                if !(multiplier >= 8.0) {
                    return Err(Error::InvalidConfig(format!(
                        "lemma-quad needs multiplier L >= 8, got {multiplier}"
                    )));
                }
                if let Some(t) = t {
                    if !(t > 0.0) {
                        return Err(Error::InvalidConfig("t must be positive".into()));
                    }
                }
            }
            PenaltyRule::RateScaled { c0, multiplier, .. } => {
                if !(c0 > 0.0) || !(multiplier > 0.0) {
                    return Err(Error::InvalidConfig("rate-scaled needs c0, multiplier > 0".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub gamma: GammaSpec,
    #[serde(default)]
    pub options: Option<OracleOptions>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginSection {
    /// Radius `eta` of the sup-norm neighbourhood.
    pub eta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionSection {
    pub path: PathSpec,
    /// Scales the l1-rate threshold; `0` keeps every selected variable.
    #[serde(default = "one")]
    pub threshold_multiplier: f64,
    #[serde(default)]
    pub parallel_refit: bool,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSection {
    pub n_grid: Vec<usize>,
    /// Fixed `s*`; by default `s* = ceil(lambda0^{-2/(2r+1)})`.
    #[serde(default)]
    pub s_star: Option<usize>,
    /// Compute the oracle bound at each `n` (expensive for large `p`).
    #[serde(default)]
    pub oracle_bound: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub study: Study,
    #[serde(default = "default_loss")]
    pub loss: LossKind,
    pub replications: usize,
    pub master_seed: u64,
    pub dgp: DgpConfig,
    pub basis: BasisSpec,
    /// Required except for `gic-selection`, which tunes along a path.
    #[serde(default)]
    pub penalty: Option<PenaltyRule>,
    /// Radius `G` of `Phi = {||beta||_1 <= G}`; required for the quadratic concentration level.
    #[serde(default)]
    pub ell1_radius: Option<f64>,
    #[serde(default)]
    pub margin: Option<MarginSection>,
    #[serde(default)]
    pub oracle: Option<OracleSection>,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub probes: ZmOptions,
    #[serde(default)]
    pub are: Option<AreOptions>,
    #[serde(default)]
    pub selection: Option<SelectionSection>,
    #[serde(default)]
    pub rate: Option<RateSection>,
    /// Monte Carlo nodes for population expectations without a closed form.
    #[serde(default = "default_mc")]
    pub population_mc_size: usize,
    #[serde(default)]
    pub output: Option<OutputSection>,
}

fn default_loss() -> LossKind {
    LossKind::Quadratic
}

fn default_mc() -> usize {
    20_000
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn penalty_rule(&self) -> Result<&PenaltyRule> {
        self.penalty.as_ref().ok_or(Error::MissingContext("penalty"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be >= 1".into()));
        }
        self.dgp.validate()?;
        self.basis.validate()?;
        match (&self.penalty, self.study) {
            (Some(rule), _) => rule.validate()?,
            (None, Study::GicSelection) => {}
            (None, _) => return Err(Error::InvalidConfig(format!("{} needs a [penalty] section", self.study.name()))),
        }
        self.solver.validate()?;
        if let Some(g) = self.ell1_radius {
            if !(g > 0.0) {
                return Err(Error::InvalidConfig("ell1_radius must be positive".into()));
            }
        }
        if let Some(m) = &self.margin {
            if !(m.eta > 0.0) {
                return Err(Error::InvalidConfig("margin eta must be positive".into()));
            }
        }
        if self.loss == crate::loss::LossKind::Logistic && self.dgp.kind != crate::datagen::DgpKind::Logistic {
            return Err(Error::InvalidConfig("logistic loss needs the logistic process".into()));
        }
        if matches!(self.penalty, Some(PenaltyRule::LemmaQuad { .. }))
            && self.loss == LossKind::Quadratic
            && self.ell1_radius.is_none()
        {
            return Err(Error::InvalidConfig(
                "lemma-quad with quadratic loss needs ell1_radius (the radius G in D_n)".into(),
            ));
        }
        match self.study {
            Study::SeriesRate => {
                let rate = self
                    .rate
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("series-rate needs a [rate] section".into()))?;
                if rate.n_grid.len() < 4 || rate.n_grid.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidConfig(
                        "n_grid must be strictly increasing with at least 4 points".into(),
                    ));
                }
            }
            Study::GicSelection => {
                let sel = self
                    .selection
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("gic-selection needs a [selection] section".into()))?;
                sel.path.validate()?;
                if !(sel.threshold_multiplier >= 0.0) {
                    return Err(Error::InvalidConfig("threshold_multiplier must be >= 0".into()));
                }
            }
            _ => {
                if self.oracle.is_none() {
                    return Err(Error::InvalidConfig(format!(
                        "study {} needs an [oracle] section",
                        self.study.name()
                    )));
                }
                if self.margin.is_none() {
                    return Err(Error::InvalidConfig(format!(
                        "study {} needs a [margin] section",
                        self.study.name()
                    )));
                }
            }
        }
        Ok(())
    }
}
