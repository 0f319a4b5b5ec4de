//! Oracle `beta* = argmin_{S_beta in Gamma} {3 Xi(f_beta) + 2 H((4 lambda1 sqrt(s_beta)
//! + 4 lambda2 ||beta||_2) / phi(S_beta))}` and the derived `Delta*`, `M*`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::are::{adaptive_restricted_eigenvalue, compute_l_n, AreOptions, AreResult};
use super::conjugate::ConjugateSpec;
use crate::error::{Error, Result};
use crate::population::Population;
use crate::rng;

/// The collection `Gamma` of admissible supports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GammaSpec {
    /// `{S0}`, the support of a linear truth.
    TrueSupport,
    /// `{{0..k}}`: the first `size` basis functions.
    Prefix { size: usize },
    /// `{{0..k} : 1 <= k <= max_size}`.
    Nested { max_size: usize },
    Explicit { sets: Vec<Vec<usize>> },
}

impl GammaSpec {
    pub fn resolve(&self, p: usize, true_support: Option<&[usize]>) -> Result<Vec<Vec<usize>>> {
        let sets = match self {
            GammaSpec::TrueSupport => vec![true_support
                .ok_or_else(|| Error::InvalidConfig("true-support Gamma needs a linear truth".into()))?
                .to_vec()],
            GammaSpec::Prefix { size } => vec![(0..*size).collect()],
            GammaSpec::Nested { max_size } => (1..=*max_size).map(|k| (0..k).collect()).collect(),
            GammaSpec::Explicit { sets } => sets.clone(),
        };
        if sets.is_empty() {
            return Err(Error::InvalidConfig("Gamma is empty".into()));
        }
        for s in &sets {
            if s.is_empty() {
                return Err(Error::InvalidConfig("Gamma members must be nonempty".into()));
            }
            if let Some(j) = s.iter().find(|&&j| j >= p) {
                return Err(Error::InvalidConfig(format!("Gamma index {j} out of range {p}")));
            }
        }
        Ok(sets)
    }

    pub fn describe(&self) -> String {
        match self {
            GammaSpec::TrueSupport => "{S0}".into(),
            GammaSpec::Prefix { size } => format!("{{{{1..{size}}}}}"),
            GammaSpec::Nested { max_size } => format!("{{{{1..k}} : k <= {max_size}}}"),
            GammaSpec::Explicit { sets } => format!("{} explicit sets", sets.len()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleOptions {
    pub restarts: usize,
    /// Objective evaluations per support set, shared across restarts.
    pub budget: usize,
    pub seed: u64,
    pub are: AreOptions,
    /// Return `beta0` directly when the truth is linear and `Gamma = {S0}`.
    pub linear_shortcut: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            restarts: 5,
            budget: 10_000,
            seed: 0,
            are: AreOptions::default(),
            linear_shortcut: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub beta_star: DVector<f64>,
    pub s_star: Vec<usize>,
    pub s_size: usize,
    pub phi_star: f64,
    pub phi_lower_bound: f64,
    pub l_n: f64,
    pub excess_risk_star: f64,
    /// `H((4 lambda1 sqrt(s*) + 4 lambda2 ||beta*||_2) / phi*)`.
    pub conjugate_term: f64,
    pub delta_star: f64,
    pub m_star: f64,
    pub lambda0: f64,
    /// `4 Delta* = 6 Xi(f*) + 4 H(...)`.
    pub bound_rhs: f64,
    pub gamma: String,
    pub shortcut: bool,
    pub evaluations: usize,
}

struct Candidate {
    beta: DVector<f64>,
    are: AreResult,
    xi: f64,
    h: f64,
    evaluations: usize,
}

fn conjugate_arg(lambda1: f64, lambda2: f64, s: usize, beta_norm: f64, phi: f64) -> f64 {
    (4.0 * lambda1 * (s as f64).sqrt() + 4.0 * lambda2 * beta_norm) / phi
}

/// Hooke-Jeeves pattern search from `x0`, at most `budget` evaluations.
fn pattern_search(
    f: &dyn Fn(&DVector<f64>) -> f64,
    x0: DVector<f64>,
    step0: f64,
    budget: usize,
) -> (DVector<f64>, f64, usize) {
    let mut evals = 1;
    let mut base = x0;
    let mut f_base = f(&base);
    let mut step = step0;
    let explore = |center: &DVector<f64>, f_center: f64, step: f64, evals: &mut usize| {
        let mut x = center.clone();
        let mut fx = f_center;
        for i in 0..x.len() {
            if *evals >= budget {
                break;
            }
            let orig = x[i];
            x[i] = orig + step;
            let up = f(&x);
            *evals += 1;
            if up < fx {
                fx = up;
                continue;
            }
            x[i] = orig - step;
            let down = f(&x);
            *evals += 1;
            if down < fx {
                fx = down;
                continue;
            }
            x[i] = orig;
        }
        (x, fx)
    };
    while evals < budget && step > 1e-11 * (1.0 + base.amax()) {
        let (x, fx) = explore(&base, f_base, step, &mut evals);
        if fx < f_base {
            // pattern moves while they keep paying off
            let mut prev = base;
            base = x;
            f_base = fx;
            loop {
                if evals >= budget {
                    break;
                }
                let probe = &base * 2.0 - &prev;
                let f_probe = f(&probe);
                evals += 1;
                let (y, fy) = explore(&probe, f_probe, step, &mut evals);
                if fy < f_base {
                    prev = std::mem::replace(&mut base, y);
                    f_base = fy;
                } else {
                    break;
                }
            }
        } else {
            step *= 0.5;
        }
    }
    (base, f_base, evals)
}

#[allow(clippy::too_many_arguments)]
fn search_support(
    pop: &Population,
    support: &[usize],
    lambda1: f64,
    lambda2: f64,
    conj: &ConjugateSpec,
    sigma: &DMatrix<f64>,
    opts: &OracleOptions,
    seed: u64,
) -> Result<Option<Candidate>> {
    let restricted = pop.restricted(support)?;
    let seed_beta = pop.restricted_minimizer(support)?;
    let seed_local = restricted.restrict(&seed_beta);
    let s = support.len();
    let are_at = |local: &DVector<f64>| -> Result<AreResult> {
        let l_n = compute_l_n(s, lambda1, lambda2, local.norm())?;
        adaptive_restricted_eigenvalue(sigma, support, l_n, &AreOptions { seed, ..opts.are })
    };
    let are_seed = are_at(&seed_local)?;
    if are_seed.degenerate {
        return Ok(None);
    }
    let phi = are_seed.phi();
    let objective = |local: &DVector<f64>| -> f64 {
        let h = conj
            .value(conjugate_arg(lambda1, lambda2, s, local.norm(), phi))
            .unwrap_or(f64::INFINITY);
        3.0 * restricted.excess_risk(local) + 2.0 * h
    };
    let per_restart = (opts.budget / opts.restarts.max(1)).max(1);
    let mut rng = rng::stream(seed);
    let mut best = seed_local.clone();
    let mut f_best = objective(&best);
    let mut evaluations = 1;
    for r in 0..opts.restarts.max(1) {
        let scale = 0.1 * (1.0 + best.amax());
        let start = if r == 0 {
            seed_local.clone()
        } else {
            DVector::from_fn(s, |i, _| best[i] + scale * rng.sample::<f64, _>(StandardNormal))
        };
        let (x, fx, used) = pattern_search(&objective, start, scale, per_restart);
        evaluations += used;
        if fx < f_best {
            best = x;
            f_best = fx;
        }
    }
    // the cone radius depends on ||beta_S||_2: re-evaluate phi at the minimizer
    let are = are_at(&best)?;
    if are.degenerate {
        return Ok(None);
    }
    let xi = restricted.excess_risk(&best);
    let h = conj.value(conjugate_arg(lambda1, lambda2, s, best.norm(), are.phi()))?;
    Ok(Some(Candidate {
        beta: restricted.embed(&best),
        are,
        xi,
        h,
        evaluations,
    }))
}

/// Searches `gamma` for the oracle. `sigma` is the population second-moment
/// matrix entering the restricted eigenvalue.
#[allow(clippy::too_many_arguments)]
pub fn oracle_search(
    gamma: &[Vec<usize>],
    gamma_desc: &str,
    pop: &Population,
    lambda0: f64,
    lambda1: f64,
    lambda2: f64,
    conj: &ConjugateSpec,
    sigma: &DMatrix<f64>,
    opts: &OracleOptions,
) -> Result<OracleReport> {
    if gamma.is_empty() {
        return Err(Error::InvalidInput("Gamma is empty".into()));
    }
    if !(lambda0 > 0.0) || !(lambda1 > 0.0) || !(lambda2 >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "oracle needs lambda0, lambda1 > 0 and lambda2 >= 0, got {lambda0}, {lambda1}, {lambda2}"
        )));
    }
    let p = pop.columns();
    if sigma.nrows() != p {
        return Err(Error::DimensionMismatch {
            context: "covariance for the oracle".into(),
            expected: p,
            found: sigma.nrows(),
        });
    }

    let truth = pop.linear_truth();
    let shortcut_support = truth
        .as_ref()
        .map(|b| (0..p).filter(|&j| b[j] != 0.0).collect::<Vec<_>>());
    let mut best: Option<Candidate> = None;
    let mut shortcut = false;
    if opts.linear_shortcut && gamma.len() == 1 {
        if let (Some(b0), Some(s0)) = (&truth, &shortcut_support) {
            let mut g = gamma[0].clone();
            g.sort_unstable();
            if &g == s0 && !s0.is_empty() {
                let local = DVector::from_fn(s0.len(), |a, _| b0[s0[a]]);
                let l_n = compute_l_n(s0.len(), lambda1, lambda2, local.norm())?;
                let are = adaptive_restricted_eigenvalue(sigma, s0, l_n, &AreOptions {
                    seed: rng::derive_seed(opts.seed, 0),
                    ..opts.are
                })?;
                if !are.degenerate {
                    let h = conj.value(conjugate_arg(lambda1, lambda2, s0.len(), local.norm(), are.phi()))?;
                    best = Some(Candidate {
                        xi: pop.excess_risk(b0)?,
                        beta: b0.clone(),
                        are,
                        h,
                        evaluations: 1,
                    });
                    shortcut = true;
                }
            }
        }
    }
    if !shortcut {
        for (k, support) in gamma.iter().enumerate() {
            let seed = rng::derive_seed(opts.seed, k as u64);
            if let Some(c) = search_support(pop, support, lambda1, lambda2, conj, sigma, opts, seed)? {
                let val = 3.0 * c.xi + 2.0 * c.h;
                let better = best.as_ref().is_none_or(|b| val < 3.0 * b.xi + 2.0 * b.h);
                if better {
                    best = Some(c);
                }
            }
        }
    }
    let c = best.ok_or_else(|| {
        Error::Infeasible(
            "restricted eigenvalue condition fails: phi(S) = 0 for every S in Gamma".into(),
        )
    })?;
    let delta_star = 0.5 * (3.0 * c.xi + 2.0 * c.h);
    let s_star: Vec<usize> = (0..p).filter(|&j| c.beta[j] != 0.0).collect();
    Ok(OracleReport {
        s_size: c.are.support.len(),
        s_star: c.are.support.clone(),
        phi_star: c.are.phi(),
        phi_lower_bound: c.are.lower_bound.max(0.0).sqrt(),
        l_n: c.are.l_n,
        excess_risk_star: c.xi,
        conjugate_term: c.h,
        delta_star,
        m_star: delta_star / lambda0,
        lambda0,
        bound_rhs: 4.0 * delta_star,
        gamma: gamma_desc.to_string(),
        shortcut,
        evaluations: c.evaluations,
        beta_star: {
            debug_assert!(s_star.iter().all(|j| c.are.support.contains(j)));
            c.beta
        },
    })
}
