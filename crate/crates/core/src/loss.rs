//! Pointwise convex losses, Lipschitz data, margin constants and excess risk.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisSpec, DesignMatrix};
use crate::datagen::{DgpConfig, DgpKind, Sample};
use crate::error::{Error, Result};
use crate::population::{Population, PopulationOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Quadratic,
    Logistic,
}

/// Data for the local Lipschitz constant of the quadratic loss on
/// `{max_i |X_i| v |eps_i| <= C_n}` with `Phi = {||beta||_1 <= G}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzContext {
    pub c_n: f64,
    pub f_cn: f64,
    pub g_radius: f64,
    pub k: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossModel {
    pub kind: LossKind,
    pub context: Option<LipschitzContext>,
}

/// `log(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// `e^z / (1 + e^z)` without overflow.
pub fn sigmoid(z: f64) -> f64 {
    crate::datagen::logistic_cdf(z)
}

impl LossModel {
    pub fn quadratic() -> Self {
        Self {
            kind: LossKind::Quadratic,
            context: None,
        }
    }

    pub fn logistic() -> Self {
        Self {
            kind: LossKind::Logistic,
            context: None,
        }
    }

    pub fn new(kind: LossKind) -> Self {
        Self {
            kind,
            context: None,
        }
    }

    pub fn with_context(self, context: LipschitzContext) -> Self {
        Self {
            context: Some(context),
            ..self
        }
    }

    fn check_response(&self, y: f64) -> Result<()> {
        if self.kind == LossKind::Logistic && y != 0.0 && y != 1.0 {
            return Err(Error::Domain(format!(
                "logistic loss needs y in {{0, 1}}, got {y}"
            )));
        }
        Ok(())
    }

    pub fn value(&self, fx: f64, y: f64) -> Result<f64> {
        self.check_response(y)?;
        Ok(self.value_unchecked(fx, y))
    }

    pub fn derivative(&self, fx: f64, y: f64) -> Result<f64> {
        self.check_response(y)?;
        Ok(self.derivative_unchecked(fx, y))
    }

    #[inline]
    pub(crate) fn value_unchecked(&self, fx: f64, y: f64) -> f64 {
        match self.kind {
            LossKind::Quadratic => (y - fx) * (y - fx),
            LossKind::Logistic => -y * fx + softplus(fx),
        }
    }

    #[inline]
    pub(crate) fn derivative_unchecked(&self, fx: f64, y: f64) -> f64 {
        match self.kind {
            LossKind::Quadratic => -2.0 * (y - fx),
            LossKind::Logistic => -y + sigmoid(fx),
        }
    }

    /// Second derivative in `f(x)`.
    #[inline]
    pub fn curvature(&self, fx: f64) -> f64 {
        match self.kind {
            LossKind::Quadratic => 2.0,
            LossKind::Logistic => {
                let s = sigmoid(fx);
                s * (1.0 - s)
            }
        }
    }

    /// Lipschitz constant `D` of the loss in its second argument over the linear span.
    ///
    /// Logistic: 2. Quadratic: `2 (C_n + 2 F_{C_n} + G K)`, the local constant as
    /// stated for the bounded-covariate event (see [`Self::lipschitz_constant_proof_form`]).
    pub fn lipschitz_constant(&self) -> Result<f64> {
        match self.kind {
            LossKind::Logistic => Ok(2.0),
            LossKind::Quadratic => {
                let c = self
                    .context
                    .ok_or(Error::MissingContext("quadratic loss needs (C_n, F_Cn, G, K)"))?;
                quadratic_local_lipschitz(c, 2.0)
            }
        }
    }

    /// `2 (C_n + F_{C_n} + G K)`, the smaller constant obtained by bounding the derivative directly.
    pub fn lipschitz_constant_proof_form(&self) -> Result<f64> {
        match self.kind {
            LossKind::Logistic => Ok(2.0),
            LossKind::Quadratic => {
                let c = self
                    .context
                    .ok_or(Error::MissingContext("quadratic loss needs (C_n, F_Cn, G, K)"))?;
                quadratic_local_lipschitz(c, 1.0)
            }
        }
    }
}

fn quadratic_local_lipschitz(c: LipschitzContext, f_weight: f64) -> Result<f64> {
    if [c.c_n, c.f_cn, c.g_radius, c.k]
        .iter()
        .any(|v| !v.is_finite() || *v < 0.0)
    {
        return Err(Error::InvalidInput(
            "Lipschitz context entries must be finite and non-negative".into(),
        ));
    }
    let d = 2.0 * (c.c_n + f_weight * c.f_cn + c.g_radius * c.k);
    if d <= 0.0 || c.c_n == 0.0 && c.f_cn == 0.0 && c.g_radius == 0.0 {
        return Err(Error::Degenerate(
            "local Lipschitz constant vanishes: C_n, F_Cn and G are all zero".into(),
        ));
    }
    Ok(d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum MarginForm {
    /// `G(u) = c u^2`.
    Quadratic { c: f64 },
    /// `G` sampled at `u_k = k * step`, linearly interpolated, `values[0] = 0`.
    Tabulated { step: f64, values: Vec<f64> },
}

/// Margin function `G` valid on the sup-norm neighbourhood of radius `eta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginSpec {
    pub form: MarginForm,
    pub eta: f64,
}

impl MarginSpec {
    pub fn quadratic(c: f64, eta: f64) -> Result<Self> {
        if !(c > 0.0) || !(eta > 0.0) {
            return Err(Error::InvalidInput(format!(
                "margin needs c > 0 and eta > 0, got c={c}, eta={eta}"
            )));
        }
        Ok(Self {
            form: MarginForm::Quadratic { c },
            eta,
        })
    }

    pub fn tabulated(step: f64, values: Vec<f64>, eta: f64) -> Result<Self> {
        if !(step > 0.0) || values.len() < 3 || values[0] != 0.0 || !(eta > 0.0) {
            return Err(Error::InvalidInput(
                "tabulated margin needs step > 0, eta > 0, at least 3 values and G(0) = 0".into(),
            ));
        }
        // strict convexity of the interpolant: strictly increasing slopes
        let strictly_convex = values
            .windows(3)
            .all(|w| w[2] - w[1] > w[1] - w[0]);
        if !strictly_convex {
            return Err(Error::InvalidInput("tabulated margin is not strictly convex".into()));
        }
        Ok(Self {
            form: MarginForm::Tabulated { step, values },
            eta,
        })
    }

    /// Quadratic constant `c`, when the margin is quadratic.
    pub fn c(&self) -> Option<f64> {
        match self.form {
            MarginForm::Quadratic { c } => Some(c),
            MarginForm::Tabulated { .. } => None,
        }
    }

    /// `G(u)` for `u >= 0`; tabulated margins extend linearly past the last node.
    pub fn g(&self, u: f64) -> f64 {
        match &self.form {
            MarginForm::Quadratic { c } => c * u * u,
            MarginForm::Tabulated { step, values } => {
                let t = u / step;
                let k = (t.floor() as usize).min(values.len() - 2);
                let frac = t - k as f64;
                values[k] + frac * (values[k + 1] - values[k])
            }
        }
    }
}

/// `c = eps0 e^{-eta} / (2 (1 + e^eta / eps0)^2)`.
pub fn logistic_margin_c(eps0: f64, eta: f64) -> Result<f64> {
    if !(eps0 > 0.0 && eps0 <= 0.5) || !(eta >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "need 0 < eps0 <= 1/2 and eta >= 0, got eps0={eps0}, eta={eta}"
        )));
    }
    Ok(eps0 * (-eta).exp() / (2.0 * (1.0 + eta.exp() / eps0).powi(2)))
}

/// Dense-grid minimum of the conditional-risk curvature `e^f/(1+e^f)^2` over
/// `pi in [eps0, 1 - eps0]` and `f in [f0 - eta, f0 + eta]`, `f0 = logit(pi)`.
pub fn logistic_curvature_floor(eps0: f64, eta: f64, grid: usize) -> f64 {
    let logit = |p: f64| (p / (1.0 - p)).ln();
    let grid = grid.max(2);
    let mut m = f64::INFINITY;
    for a in 0..=grid {
        let pi = eps0 + (1.0 - 2.0 * eps0) * a as f64 / grid as f64;
        let f0 = logit(pi);
        for b in 0..=grid {
            let f = f0 - eta + 2.0 * eta * b as f64 / grid as f64;
            let s = sigmoid(f);
            m = m.min(s * (1.0 - s));
        }
    }
    m
}

/// Margin constant: `c = 1` for quadratic loss, the logistic formula otherwise.
///
/// For the binary process the band `eps0` is the declared `pi_floor` (checked
/// against the truth) or, when absent, the tightest band the truth satisfies.
pub fn margin_constant(model: &LossModel, config: &DgpConfig, eta: f64) -> Result<MarginSpec> {
    match model.kind {
        LossKind::Quadratic => MarginSpec::quadratic(1.0, eta),
        LossKind::Logistic => {
            if config.kind != DgpKind::Logistic {
                return Err(Error::InvalidConfig(
                    "logistic margin needs the logistic process".into(),
                ));
            }
            config.validate()?;
            let band = config.pi_band()?;
            let eps0 = match config.pi_floor {
                Some(eps0) if eps0 > band => {
                    return Err(Error::InvalidConfig(format!(
                        "pi(x) leaves [eps0, 1 - eps0] for eps0 = {eps0}: the truth only guarantees {band:.6}"
                    )))
                }
                Some(eps0) => eps0,
                None => band,
            };
            MarginSpec::quadratic(logistic_margin_c(eps0, eta)?, eta)
        }
    }
}

/// `Xi(f_beta)` for a simulated truth. `config = None` marks ingested data.
pub fn excess_risk(
    model: &LossModel,
    beta: &DVector<f64>,
    basis: &BasisSpec,
    config: Option<&DgpConfig>,
    mc_size: usize,
) -> Result<f64> {
    let config = config.ok_or(Error::UnknownTruth)?;
    let pop = Population::build(
        config,
        basis,
        model.kind,
        &PopulationOptions {
            mc_size,
            ..PopulationOptions::for_config(config)
        },
    )?;
    pop.excess_risk(beta)
}

/// Fixed-design quadratic excess risk `(1/n) sum_i (f_beta(x_i) - f0(x_i))^2`,
/// the averaged norm used for independent but non-identical designs.
pub fn fixed_design_excess_risk(
    design: &DesignMatrix,
    sample: &Sample,
    config: &DgpConfig,
    beta: &DVector<f64>,
) -> Result<f64> {
    let truth = config.truth()?;
    let fitted = &design.values * beta;
    let n = sample.n();
    Ok((0..n)
        .map(|i| (fitted[i] - truth.eval(sample.covariate(i))).powi(2))
        .sum::<f64>()
        / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_values() {
        let q = LossModel::quadratic();
        let l = LossModel::logistic();
        assert_eq!(q.value(1.3, 1.3).unwrap(), 0.0);
        assert!((l.value(0.0, 1.0).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        let big = l.value(50.0, 1.0).unwrap();
        assert!(big.is_finite() && (0.0..1e-20).contains(&big));
        assert!(l.value(800.0, 0.0).unwrap().is_finite());
        assert!(matches!(l.value(0.0, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn derivatives() {
        let q = LossModel::quadratic();
        let l = LossModel::logistic();
        assert_eq!(q.derivative(2.0, 2.0).unwrap(), 0.0);
        assert_eq!(l.derivative(0.0, 0.0).unwrap(), 0.5);
        for k in -40..=40 {
            let f = k as f64 * 0.5;
            let d1 = l.derivative(f, 1.0).unwrap();
            let d0 = l.derivative(f, 0.0).unwrap();
            assert!(d1 > -1.0 && d1 <= 0.0 && (0.0..1.0).contains(&d0));
            assert!(d1.abs() <= l.lipschitz_constant().unwrap());
        }
    }

    #[test]
    fn lipschitz_constants() {
        assert_eq!(LossModel::logistic().lipschitz_constant().unwrap(), 2.0);
        let ctx = LipschitzContext {
            c_n: 3.0,
            f_cn: 1.0,
            g_radius: 2.0,
            k: 1.0,
        };
        let q = LossModel::quadratic().with_context(ctx);
        assert_eq!(q.lipschitz_constant().unwrap(), 14.0);
        assert_eq!(q.lipschitz_constant_proof_form().unwrap(), 12.0);
        assert!(matches!(
            LossModel::quadratic().lipschitz_constant(),
            Err(Error::MissingContext(_))
        ));
        let degenerate = LossModel::quadratic().with_context(LipschitzContext {
            c_n: 0.0,
            f_cn: 0.0,
            g_radius: 0.0,
            k: 1.0,
        });
        assert!(matches!(
            degenerate.lipschitz_constant(),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn logistic_margin_formula() {
        let c = logistic_margin_c(0.5, 0.0).unwrap();
        assert!((c - 1.0 / 36.0).abs() < 1e-15);
        let mut last = f64::INFINITY;
        for k in (1..=50).rev() {
            let eps0 = 0.5 * k as f64 / 50.0;
            let c = logistic_margin_c(eps0, 0.3).unwrap();
            assert!(c < last);
            last = c;
        }
        assert!(logistic_margin_c(1e-6, 0.3).unwrap() < 1e-12);
    }

    #[test]
    fn curvature_floor_dominates_twice_margin() {
        for &(eps0, eta) in &[(0.1, 0.5), (0.3, 1.0), (0.05, 0.2), (0.5, 0.0)] {
            let floor = logistic_curvature_floor(eps0, eta, 400);
            assert!(floor >= 2.0 * logistic_margin_c(eps0, eta).unwrap());
        }
    }

    #[test]
    fn margin_constants_for_processes() {
        let cfg = DgpConfig::logistic_linear(vec![0.5, -0.5], 4, 10, 0);
        let m = margin_constant(&LossModel::quadratic(), &cfg, 0.5).unwrap();
        assert_eq!(m.c(), Some(1.0));
        let band = cfg.pi_band().unwrap();
        let m = margin_constant(&LossModel::logistic(), &cfg, 0.5).unwrap();
        assert_eq!(m.c(), Some(logistic_margin_c(band, 0.5).unwrap()));
        let mut declared = cfg.clone();
        declared.pi_floor = Some(0.45);
        let err = margin_constant(&LossModel::logistic(), &declared, 0.5).unwrap_err();
        assert!(err.to_string().contains("eps0"));
    }

    #[test]
    fn excess_risk_needs_truth() {
        let b = DVector::zeros(2);
        let r = excess_risk(&LossModel::quadratic(), &b, &BasisSpec::polynomial(2), None, 10);
        assert!(matches!(r, Err(Error::UnknownTruth)));
    }

    #[test]
    fn tabulated_margin_interpolates() {
        let m = MarginSpec::tabulated(0.5, vec![0.0, 0.25, 1.0, 2.25], 1.0).unwrap();
        assert_eq!(m.g(0.5), 0.25);
        assert!((m.g(0.75) - 0.625).abs() < 1e-15);
        assert!(MarginSpec::tabulated(0.5, vec![0.0, 1.0, 2.0], 1.0).is_err());
    }
}
