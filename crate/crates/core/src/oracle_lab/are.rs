//! Adaptive restricted eigenvalue
//! `phi^2(S) = min { b' Sigma b : ||b_S||_2 = 1, ||b_{S^c}||_1 <= L_n }`.
//!
//! The program is nonconvex in `b_S` but each block is tractable: for fixed
//! `b_S` the `b_{S^c}` problem is a convex QP over an l1 ball, and for fixed
//! `b_{S^c}` the `b_S` problem is a trust-region subproblem on the sphere, solved
//! globally. Block minimization from several starts gives a feasible value,
//! i.e. an upper estimate of `phi^2(S)`; `lambda_min(Sigma)` is a certified lower bound.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{is_symmetric, max_eigenvalue, min_eigenvalue, project_l1_ball, sphere_quadratic_min};
use crate::rng;

/// `L_n = 3 (sqrt|S| + 2 lambda2 ||beta_S||_2 / lambda1)`.
pub fn compute_l_n(support_size: usize, lambda1: f64, lambda2: f64, beta_s_norm: f64) -> Result<f64> {
    if !(lambda1 > 0.0) {
        return Err(Error::InvalidInput(format!("L_n needs lambda1 > 0, got {lambda1}")));
    }
    if !(lambda2 >= 0.0) || !(beta_s_norm >= 0.0) {
        return Err(Error::InvalidInput("L_n needs lambda2 >= 0 and a norm >= 0".into()));
    }
    Ok(3.0 * ((support_size as f64).sqrt() + 2.0 * lambda2 * beta_s_norm / lambda1))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AreOptions {
    pub starts: usize,
    pub max_rounds: usize,
    pub inner_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for AreOptions {
    fn default() -> Self {
        Self {
            starts: 8,
            max_rounds: 500,
            inner_iter: 2000,
            tol: 1e-13,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreResult {
    pub support: Vec<usize>,
    pub l_n: f64,
    pub lower_bound: f64,
    pub estimate: f64,
    /// Value used downstream: the (tighter) estimate, never below the lower bound.
    pub phi2: f64,
    pub degenerate: bool,
}

impl AreResult {
    pub fn phi(&self) -> f64 {
        self.phi2.max(0.0).sqrt()
    }
}

struct Blocks {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    c_top: f64,
}

impl Blocks {
    fn value(&self, u: &DVector<f64>, w: &DVector<f64>) -> f64 {
        u.dot(&(&self.a * u)) + 2.0 * u.dot(&(&self.b * w)) + w.dot(&(&self.c * w))
    }

    /// `min_w w'Cw + 2 q'w` over `||w||_1 <= radius`, accelerated projected gradient.
    fn inner(&self, q: &DVector<f64>, radius: f64, w0: &DVector<f64>, iters: usize) -> DVector<f64> {
        if w0.is_empty() || radius == 0.0 {
            return DVector::zeros(w0.len());
        }
        let step = 1.0 / (2.0 * self.c_top.max(1e-300));
        let f = |w: &DVector<f64>| w.dot(&(&self.c * w)) + 2.0 * q.dot(w);
        let mut x = project_l1_ball(w0, radius);
        let mut fx = f(&x);
        let mut y = x.clone();
        let mut t = 1.0_f64;
        for _ in 0..iters {
            let g = (&self.c * &y + q) * 2.0;
            let mut cand = project_l1_ball(&(&y - g * step), radius);
            let mut fc = f(&cand);
            if fc > fx {
                // restart from x with a plain projected step
                let gx = (&self.c * &x + q) * 2.0;
                cand = project_l1_ball(&(&x - gx * step), radius);
                fc = f(&cand);
                t = 1.0;
                if fc >= fx {
                    break;
                }
                y = cand.clone();
                x = cand;
                fx = fc;
                continue;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let moved = (&cand - &x).amax();
            y = &cand + (&cand - &x) * ((t - 1.0) / t_next);
            t = t_next;
            x = cand;
            fx = fc;
            if moved <= 1e-15 * (1.0 + x.amax()) {
                break;
            }
        }
        x
    }
}

/// Estimates `phi^2(S)` for the cone radius `l_n`.
pub fn adaptive_restricted_eigenvalue(
    sigma: &DMatrix<f64>,
    support: &[usize],
    l_n: f64,
    opts: &AreOptions,
) -> Result<AreResult> {
    let p = sigma.nrows();
    if sigma.ncols() != p {
        return Err(Error::DimensionMismatch {
            context: "covariance matrix".into(),
            expected: p,
            found: sigma.ncols(),
        });
    }
    if support.is_empty() {
        return Err(Error::InvalidInput("restricted eigenvalue needs a nonempty S".into()));
    }
    if let Some(&j) = support.iter().find(|&&j| j >= p) {
        return Err(Error::InvalidInput(format!("support index {j} out of range {p}")));
    }
    if !(l_n >= 0.0) {
        return Err(Error::InvalidInput(format!("cone radius must be non-negative, got {l_n}")));
    }
    let scale = sigma.amax().max(1e-300);
    if sigma.iter().any(|v| !v.is_finite()) || !is_symmetric(sigma, 1e-10 * scale) {
        return Err(Error::InvalidInput("covariance must be finite and symmetric".into()));
    }
    let lower = min_eigenvalue(sigma);
    if lower < -1e-10 * scale {
        return Err(Error::NotPsd { min_eigenvalue: lower });
    }
    let mut s: Vec<usize> = support.to_vec();
    s.sort_unstable();
    s.dedup();
    let sc: Vec<usize> = (0..p).filter(|j| s.binary_search(j).is_err()).collect();
    let (k, m) = (s.len(), sc.len());
    let blocks = Blocks {
        a: DMatrix::from_fn(k, k, |i, j| sigma[(s[i], s[j])]),
        b: DMatrix::from_fn(k, m, |i, j| sigma[(s[i], sc[j])]),
        c: DMatrix::from_fn(m, m, |i, j| sigma[(sc[i], sc[j])]),
        c_top: if m > 0 {
            max_eigenvalue(&DMatrix::from_fn(m, m, |i, j| sigma[(sc[i], sc[j])]))
        } else {
            0.0
        },
    };

    let mut rng = rng::stream(opts.seed);
    let mut best = f64::INFINITY;
    let (_, a_vecs) = crate::linalg::sorted_eigen(&blocks.a);
    for start in 0..opts.starts.max(1) {
        let mut u = match start {
            0 => a_vecs.column(0).into_owned(),
            _ => {
                let v = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
                let nv = v.norm();
                if nv > 0.0 {
                    v / nv
                } else {
                    a_vecs.column(0).into_owned()
                }
            }
        };
        let mut w = DVector::zeros(m);
        if start >= 2 && m > 0 {
            // random feasible complement, to leave the w = 0 basin
            let v = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
            w = project_l1_ball(&(v * l_n), l_n);
        }
        let mut val = blocks.value(&u, &w);
        for _ in 0..opts.max_rounds {
            let q = blocks.b.tr_mul(&u);
            w = blocks.inner(&q, l_n, &w, opts.inner_iter);
            let c_lin = &blocks.b * &w;
            u = sphere_quadratic_min(&blocks.a, &c_lin);
            let next = blocks.value(&u, &w);
            let done = val - next <= opts.tol * val.abs().max(1.0);
            val = next.min(val);
            if done {
                break;
            }
        }
        best = best.min(val);
    }
    let estimate = best.max(lower);
    let phi2 = estimate;
    Ok(AreResult {
        support: s,
        l_n,
        lower_bound: lower,
        estimate,
        phi2,
        degenerate: !(phi2 > 1e-12 * scale),
    })
}
