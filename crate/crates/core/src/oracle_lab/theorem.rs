//! Deterministic inequality checks on the event `tau = {Z_M* <= lambda0 M*}`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::conjugate::ConjugateSpec;
use super::oracle::OracleReport;
use crate::error::{Error, Result};
use crate::linalg::l1_norm;
use crate::solver::FitResult;

pub const CHECK_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Check {
    pub excess_risk_hat: f64,
    pub l1_distance: f64,
    pub l2_support_distance_sq: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub z_m: f64,
    pub tau_level: f64,
    pub tau_member: bool,
    pub holds: bool,
}

/// `Xi(f_hat) + lambda1 ||beta_hat - beta*||_1 + lambda2 ||beta_hat_{S*} - beta*_{S*}||_2^2
/// <= 6 Xi(f*) + 4 H(...)`, together with `tau` membership from a `Z_{M*}` estimate.
pub fn check_theorem1(
    fit: &FitResult,
    oracle: &OracleReport,
    lambda1: f64,
    lambda2: f64,
    excess_risk: impl Fn(&DVector<f64>) -> Result<f64>,
    z_m_star: f64,
) -> Result<Theorem1Check> {
    if !(lambda1 >= 8.0 * oracle.lambda0 * (1.0 - 1e-12)) {
        return Err(Error::Precondition(format!(
            "lambda1 = {lambda1} is below 8 lambda0 = {}",
            8.0 * oracle.lambda0
        )));
    }
    let b = &fit.beta_hat;
    let s = &oracle.beta_star;
    if b.len() != s.len() {
        return Err(Error::DimensionMismatch {
            context: "fit vs oracle".into(),
            expected: s.len(),
            found: b.len(),
        });
    }
    let xi = excess_risk(b)?;
    let l1 = l1_norm(&(b - s));
    let l2: f64 = oracle.s_star.iter().map(|&j| (b[j] - s[j]).powi(2)).sum();
    let lhs = xi + lambda1 * l1 + lambda2 * l2;
    let rhs = 6.0 * oracle.excess_risk_star + 4.0 * oracle.conjugate_term;
    let tau_level = oracle.lambda0 * oracle.m_star;
    Ok(Theorem1Check {
        excess_risk_hat: xi,
        l1_distance: l1,
        l2_support_distance_sq: l2,
        lhs,
        rhs,
        z_m: z_m_star,
        tau_level,
        tau_member: z_m_star <= tau_level,
        holds: lhs <= rhs + CHECK_SLACK,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearBounds {
    pub risk_lhs: f64,
    pub risk_rhs: f64,
    pub l1_lhs: f64,
    pub l1_rhs: f64,
    pub risk_holds: bool,
    pub l1_holds: bool,
}

/// Linear-truth bounds `Xi(f_hat) <= 4 H(v)` and `||beta_hat - beta0||_1 <= (4/lambda1) H(v)`,
/// `v = (4 lambda1 sqrt|S0| + 4 lambda2 ||beta0||_2) / phi(S0)`.
pub fn check_linear_bounds(
    beta_hat: &DVector<f64>,
    beta0: &DVector<f64>,
    excess_risk_hat: f64,
    lambda1: f64,
    lambda2: f64,
    phi: f64,
    conj: &ConjugateSpec,
) -> Result<LinearBounds> {
    let s0 = beta0.iter().filter(|v| **v != 0.0).count();
    let v = (4.0 * lambda1 * (s0 as f64).sqrt() + 4.0 * lambda2 * beta0.norm()) / phi;
    let h = conj.value(v)?;
    let l1 = l1_norm(&(beta_hat - beta0));
    Ok(LinearBounds {
        risk_lhs: excess_risk_hat,
        risk_rhs: 4.0 * h,
        l1_lhs: l1,
        l1_rhs: 4.0 * h / lambda1,
        risk_holds: excess_risk_hat <= 4.0 * h + CHECK_SLACK,
        l1_holds: l1 <= 4.0 * h / lambda1 + CHECK_SLACK,
    })
}
