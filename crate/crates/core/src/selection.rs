//! Tuning paths, information-criterion selection and thresholded variable selection.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{FitResult, PenaltyConfig, Problem, SolverOptions};

/// How `lambda2` follows `lambda1` along a path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "coupling", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Coupling {
    /// `lambda2 = kappa * lambda1`.
    Free { kappa: f64 },
    Fixed { lambda2: f64 },
    /// `lambda2 = lambda1 sqrt(s) / (2 ||beta||_2)` with `s`, `beta` from the previous path point.
    Plugin,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub n_lambdas: usize,
    pub ratio: f64,
    pub coupling: Coupling,
}

impl PathSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_lambdas == 0 {
            return Err(Error::InvalidConfig("path needs n_lambdas >= 1".into()));
        }
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!("path ratio must lie in (0, 1], got {}", self.ratio)));
        }
        match self.coupling {
            Coupling::Free { kappa } if !(kappa >= 0.0) => {
                Err(Error::InvalidConfig("coupling kappa must be non-negative".into()))
            }
            Coupling::Fixed { lambda2 } if !(lambda2 >= 0.0) => {
                Err(Error::InvalidConfig("fixed lambda2 must be non-negative".into()))
            }
            _ => Ok(()),
        }
    }
}

/// One path point; `lambda2 = None` is resolved during the path fit (plug-in coupling).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda1: f64,
    pub lambda2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaPath {
    pub lambda_max: f64,
    pub points: Vec<PathPoint>,
    pub warning: Option<String>,
}

/// Log-spaced `lambda1` from `lambda_max` down to `ratio * lambda_max`.
pub fn lambda_path(problem: &Problem, spec: &PathSpec) -> Result<LambdaPath> {
    spec.validate()?;
    let lambda_max = problem.lambda_max();
    let lam2 = |l1: f64| match spec.coupling {
        Coupling::Free { kappa } => Some(kappa * l1),
        Coupling::Fixed { lambda2 } => Some(lambda2),
        Coupling::Plugin => None,
    };
    if lambda_max == 0.0 {
        return Ok(LambdaPath {
            lambda_max,
            points: vec![PathPoint {
                lambda1: 0.0,
                lambda2: lam2(0.0),
            }],
            warning: Some("empirical-risk gradient vanishes at zero; single-point path".into()),
        });
    }
    let k = spec.n_lambdas;
    let points = (0..k)
        .map(|i| {
            let frac = if k == 1 { 0.0 } else { i as f64 / (k - 1) as f64 };
            let l1 = lambda_max * spec.ratio.powf(frac);
            PathPoint {
                lambda1: l1,
                lambda2: lam2(l1),
            }
        })
        .collect();
    Ok(LambdaPath {
        lambda_max,
        points,
        warning: None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GicParts {
    pub fit_term: f64,
    pub penalty_term: f64,
    pub gic: f64,
}

/// `GIC = 2 [P_n rho_beta - P_n rho_saturated] + log(log n) log(p) / n * s`; the
/// saturated fit has zero loss for both built-in losses.
pub fn gic(problem: &Problem, fit: &FitResult) -> Result<GicParts> {
    let n = problem.n();
    if n < 3 {
        return Err(Error::InvalidInput(format!("GIC needs n >= 3, got {n}")));
    }
    let risk = problem.risk(&fit.beta_hat)?;
    let nf = n as f64;
    let s = fit.beta_hat.iter().filter(|v| **v != 0.0).count() as f64;
    let fit_term = 2.0 * risk;
    let penalty_term = nf.ln().ln() * (problem.p() as f64).ln() / nf * s;
    Ok(GicParts {
        fit_term,
        penalty_term,
        gic: fit_term + penalty_term,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub lambda1: f64,
    pub lambda2: f64,
    pub s_lambda: usize,
    pub fit_term: f64,
    pub penalty_term: f64,
    pub gic: f64,
    pub converged: bool,
    pub kkt_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub records: Vec<PathRecord>,
    pub chosen: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub beta_hat: DVector<f64>,
    pub support: Vec<usize>,
    /// Path positions where `s_lambda` dropped as `lambda1` decreased.
    pub monotonicity_violations: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectOptions {
    /// Re-fit every point from a cold start in parallel after the warm-started pass.
    pub parallel: bool,
}

/// Fits the path with warm starts and picks the minimal GIC among converged
/// points, breaking ties toward larger `lambda1`.
pub fn select_by_gic(
    problem: &Problem,
    path: &[PathPoint],
    solver: &SolverOptions,
    select: &SelectOptions,
) -> Result<SelectionReport> {
    if path.is_empty() {
        return Err(Error::InvalidInput("selection needs a nonempty path".into()));
    }
    let p = problem.p();
    let mut fits: Vec<(f64, FitResult)> = Vec::with_capacity(path.len());
    let mut warm: Option<DVector<f64>> = None;
    for point in path {
        let lambda2 = match point.lambda2 {
            Some(l2) => l2,
            None => match &warm {
                Some(b) if b.norm() > 0.0 => {
                    let s = b.iter().filter(|v| **v != 0.0).count() as f64;
                    point.lambda1 * s.sqrt() / (2.0 * b.norm())
                }
                _ => 0.0,
            },
        };
        let fit = problem.fit(&PenaltyConfig::new(point.lambda1, lambda2), solver, warm.as_ref())?;
        warm = Some(fit.beta_hat.clone());
        fits.push((lambda2, fit));
    }
    if select.parallel {
        let cold: Vec<Result<FitResult>> = path
            .par_iter()
            .zip(fits.par_iter())
            .map(|(pt, (l2, _))| problem.fit(&PenaltyConfig::new(pt.lambda1, *l2), solver, None))
            .collect();
        for (slot, fit) in fits.iter_mut().zip(cold) {
            slot.1 = fit?;
        }
    }

    let mut records = Vec::with_capacity(fits.len());
    for (point, (lambda2, fit)) in path.iter().zip(&fits) {
        let parts = gic(problem, fit)?;
        records.push(PathRecord {
            lambda1: point.lambda1,
            lambda2: *lambda2,
            s_lambda: fit.support.len(),
            fit_term: parts.fit_term,
            penalty_term: parts.penalty_term,
            gic: parts.gic,
            converged: fit.converged,
            kkt_residual: fit.kkt_residual,
        });
    }
    let mut chosen: Option<usize> = None;
    for (i, r) in records.iter().enumerate() {
        if !r.converged {
            continue;
        }
        chosen = match chosen {
            None => Some(i),
            Some(c) => {
                let cur = &records[c];
                if r.gic < cur.gic || (r.gic == cur.gic && r.lambda1 > cur.lambda1) {
                    Some(i)
                } else {
                    Some(c)
                }
            }
        };
    }
    let chosen = chosen.ok_or(Error::NoConvergedPoints)?;
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[b].lambda1.total_cmp(&records[a].lambda1));
    let monotonicity_violations = order
        .windows(2)
        .filter(|w| records[w[1]].s_lambda < records[w[0]].s_lambda)
        .count();
    let fit = &fits[chosen].1;
    debug_assert_eq!(fit.beta_hat.len(), p);
    Ok(SelectionReport {
        lambda1: records[chosen].lambda1,
        lambda2: records[chosen].lambda2,
        beta_hat: fit.beta_hat.clone(),
        support: fit.support.clone(),
        records,
        chosen,
        monotonicity_violations,
    })
}

/// `beta_tilde_j = beta_hat_j 1{|beta_hat_j| > tau}`.
pub fn threshold(beta_hat: &DVector<f64>, tau: f64) -> Result<(DVector<f64>, Vec<usize>)> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidInput(format!("threshold must be non-negative, got {tau}")));
    }
    let tilde = beta_hat.map(|v| if v.abs() > tau { v } else { 0.0 });
    let support = (0..tilde.len()).filter(|&j| tilde[j] != 0.0).collect();
    Ok((tilde, support))
}

/// Per-coordinate threshold from the l1 rate, `(36 L / c) lambda1 s / phi^2 * multiplier`
/// with `L = 8`; conservative because the l1 rate bounds every coordinate at once.
pub fn default_threshold(lambda1: f64, s0_est: f64, phi2_est: f64, c: f64, multiplier: f64) -> Result<f64> {
    if !(lambda1 > 0.0) || !(s0_est > 0.0) || !(phi2_est > 0.0) || !(c > 0.0) {
        return Err(Error::InvalidInput(format!(
            "threshold needs positive lambda1, s, phi^2 and c, got {lambda1}, {s0_est}, {phi2_est}, {c}"
        )));
    }
    if !(multiplier >= 0.0) {
        return Err(Error::InvalidInput(format!("multiplier must be non-negative, got {multiplier}")));
    }
    const L: f64 = 8.0;
    Ok(36.0 * L / c * lambda1 * s0_est / phi2_est * multiplier)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recovery {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub exact: bool,
    pub screening: bool,
}

pub fn recovery(support: &[usize], truth: &[usize]) -> Recovery {
    let tp = support.iter().filter(|j| truth.contains(j)).count();
    let fp = support.len() - tp;
    let fneg = truth.len() - tp;
    Recovery {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fneg,
        exact: fp == 0 && fneg == 0,
        screening: fneg == 0,
    }
}
