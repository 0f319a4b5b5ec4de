//! Population expectations under a simulated truth: excess risk, second moments
//! and restricted risk minimizers.
//!
//! Scalar covariates are integrated with composite Gauss-Legendre rules (panels
//! split at zero, where the power targets lose smoothness). Vector covariates
//! with a linear truth use closed-form moments of the product law; the binary
//! model additionally uses a seeded Monte Carlo node set for the log-likelihood.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::basis::{BasisKind, BasisSpec};
use crate::datagen::{logistic_cdf, CovariateLaw, DgpConfig, DgpKind, NoiseProfile, Truth};
use crate::error::{Error, Result};
use crate::loss::{softplus, LossKind};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PopulationOptions {
    /// Monte Carlo size for vector-covariate expectations without a closed form.
    pub mc_size: usize,
    pub seed: u64,
    /// Gauss-Legendre panels on each half of `[-1, 1]`.
    pub panels: usize,
}

impl Default for PopulationOptions {
    fn default() -> Self {
        Self {
            mc_size: 20_000,
            seed: 0,
            panels: 64,
        }
    }
}

impl PopulationOptions {
    pub fn for_config(config: &DgpConfig) -> Self {
        Self {
            seed: rng::derive_seed(config.seed, rng::tag::POPULATION),
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PopulationMethod {
    Quadrature,
    ClosedForm,
    MonteCarlo,
}

#[derive(Clone, Debug)]
struct Nodes {
    features: DMatrix<f64>,
    f0: DVector<f64>,
    weights: DVector<f64>,
    pi: DVector<f64>,
}

/// Population quantities for one (truth, basis, loss) triple.
#[derive(Clone, Debug)]
pub struct Population {
    pub loss: LossKind,
    pub basis: BasisSpec,
    pub truth: Truth,
    pub method: PopulationMethod,
    second: DMatrix<f64>,
    cross: DVector<f64>,
    target_sq: f64,
    noise_var: f64,
    nodes: Option<Nodes>,
    base_log_lik: f64,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; k];
    let mut w = vec![0.0; k];
    let kf = k as f64;
    for i in 0..k {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (kf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=k {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            let pk = if k == 1 { z } else { p1 };
            let pkm1 = if k == 1 { 1.0 } else { p0 };
            dp = kf * (z * pk - pkm1) / (z * z - 1.0);
            let dz = pk / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Composite rule on `[a, b]` with `panels` equal panels of an 8-point rule.
fn composite_rule(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let (gx, gw) = gauss_legendre(8);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * 8);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (x, w) in gx.iter().zip(&gw) {
            out.push((lo + 0.5 * h * (x + 1.0), 0.5 * h * w));
        }
    }
    out
}

/// Probability-weighted nodes of the covariate law on `[-1, 1]`.
fn law_rule(law: &CovariateLaw, panels: usize) -> Vec<(f64, f64)> {
    let mut rule = composite_rule(-1.0, 0.0, panels);
    rule.extend(composite_rule(0.0, 1.0, panels));
    let mut total = 0.0;
    for (x, w) in rule.iter_mut() {
        *w *= law.density(*x);
        total += *w;
    }
    for (_, w) in rule.iter_mut() {
        *w /= total;
    }
    rule
}

fn law_moment(law: &CovariateLaw, panels: usize, k: i32) -> f64 {
    law_rule(law, panels).iter().map(|(x, w)| w * x.powi(k)).sum()
}

/// `E (1 + max_j |x_j|)^2` for `d` i.i.d. coordinates, via `E g(M) = g(0) + int g'(t) P(M > t) dt`.
fn hetero_factor(law: &CovariateLaw, d: usize, panels: usize) -> f64 {
    let mass = |a: f64, b: f64, k: usize| -> f64 {
        composite_rule(a, b, k).iter().map(|(x, w)| w * law.density(*x)).sum()
    };
    let half = mass(0.0, 1.0, panels);
    1.0 + composite_rule(0.0, 1.0, panels)
        .iter()
        .map(|(t, w)| {
            let cdf = (mass(0.0, *t, 8) / half).min(1.0);
            w * 2.0 * (1.0 + t) * (1.0 - cdf.powi(d as i32))
        })
        .sum::<f64>()
}

impl Population {
    pub fn build(
        config: &DgpConfig,
        basis: &BasisSpec,
        loss: LossKind,
        opts: &PopulationOptions,
    ) -> Result<Self> {
        config.validate()?;
        basis.validate()?;
        if loss == LossKind::Logistic && config.kind != DgpKind::Logistic {
            return Err(Error::InvalidConfig(
                "logistic loss needs binary responses from the logistic process".into(),
            ));
        }
        let truth = config.truth()?;
        let d = config.covariate_dim()?;
        let cols = basis.columns();
        let sigma2 = config.noise.sigma.powi(2);
        let binary = config.kind == DgpKind::Logistic;

        if d == 1 {
            let rule = law_rule(&config.covariates, opts.panels);
            let m = rule.len();
            let mut features = DMatrix::zeros(m, cols);
            let mut f0 = DVector::zeros(m);
            let mut weights = DVector::zeros(m);
            let mut noise_var = 0.0;
            for (i, (x, w)) in rule.iter().enumerate() {
                let row = basis.design_row(&[*x])?;
                for (j, v) in row.into_iter().enumerate() {
                    features[(i, j)] = v;
                }
                f0[i] = truth.eval(&[*x]);
                weights[i] = *w;
                noise_var += w * config.noise.scale_at(&[*x]).powi(2);
            }
            let pi = f0.map(logistic_cdf);
            let nodes = Nodes {
                features,
                f0,
                weights,
                pi,
            };
            let (second, cross, target_sq) = moments_from_nodes(&nodes);
            let mut pop = Self {
                loss,
                basis: *basis,
                truth,
                method: PopulationMethod::Quadrature,
                second,
                cross,
                target_sq,
                noise_var: if binary { 0.0 } else { noise_var },
                nodes: Some(nodes),
                base_log_lik: 0.0,
            };
            pop.base_log_lik = pop.log_lik_at(&pop.nodes.as_ref().unwrap().f0.clone());
            return Ok(pop);
        }

        let b0 = match (&truth, basis.kind) {
            (Truth::Linear(b), BasisKind::Identity) if basis.p == d => b.clone(),
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "vector covariates of dimension {d} need the identity basis with p = {d}"
                )))
            }
        };
        let m2 = law_moment(&config.covariates, opts.panels, 2);
        let m1 = law_moment(&config.covariates, opts.panels, 1);
        let off = usize::from(basis.intercept);
        let mut second = DMatrix::zeros(cols, cols);
        for j in 0..d {
            for k in 0..d {
                second[(off + j, off + k)] = if j == k { m2 } else { m1 * m1 };
            }
        }
        if basis.intercept {
            second[(0, 0)] = 1.0;
            for j in 0..d {
                second[(0, off + j)] = m1;
                second[(off + j, 0)] = m1;
            }
        }
        let mut b_full = DVector::zeros(cols);
        for j in 0..d {
            b_full[off + j] = b0[j];
        }
        let cross = &second * &b_full;
        let target_sq = b_full.dot(&cross);
        let noise_var = match config.noise.profile {
            _ if binary => 0.0,
            NoiseProfile::Homoscedastic => sigma2,
            NoiseProfile::Heteroscedastic => {
                sigma2 * hetero_factor(&config.covariates, d, opts.panels)
            }
        };

        let (nodes, method) = if binary {
            let m = opts.mc_size.max(1);
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let mut features = DMatrix::zeros(m, cols);
            let mut f0 = DVector::zeros(m);
            let mut x = vec![0.0; d];
            for i in 0..m {
                for v in x.iter_mut() {
                    *v = config.covariates.draw(&mut rng);
                }
                if basis.intercept {
                    features[(i, 0)] = 1.0;
                }
                for j in 0..d {
                    features[(i, off + j)] = x[j];
                }
                f0[i] = truth.eval(&x);
            }
            let pi = f0.map(logistic_cdf);
            (
                Some(Nodes {
                    features,
                    f0,
                    weights: DVector::from_element(m, 1.0 / m as f64),
                    pi,
                }),
                PopulationMethod::MonteCarlo,
            )
        } else {
            (None, PopulationMethod::ClosedForm)
        };
        let mut pop = Self {
            loss,
            basis: *basis,
            truth,
            method,
            second,
            cross,
            target_sq,
            noise_var,
            nodes,
            base_log_lik: 0.0,
        };
        if let Some(n) = &pop.nodes {
            let f0 = n.f0.clone();
            pop.base_log_lik = pop.log_lik_at(&f0);
        }
        Ok(pop)
    }

    pub fn columns(&self) -> usize {
        self.basis.columns()
    }

    /// `Sigma = E psi psi'`.
    pub fn second_moment(&self) -> &DMatrix<f64> {
        &self.second
    }

    /// `E psi f0`.
    pub fn cross_moment(&self) -> &DVector<f64> {
        &self.cross
    }

    /// Noise variance `E eps^2` (zero for binary responses).
    pub fn noise_variance(&self) -> f64 {
        self.noise_var
    }

    fn check(&self, beta: &DVector<f64>) -> Result<()> {
        if beta.len() != self.columns() {
            return Err(Error::DimensionMismatch {
                context: "coefficient vector".into(),
                expected: self.columns(),
                found: beta.len(),
            });
        }
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("coefficient vector".into()));
        }
        Ok(())
    }

    /// `E (f_beta - f0)^2`.
    pub fn l2_distance_sq(&self, beta: &DVector<f64>) -> Result<f64> {
        self.check(beta)?;
        Ok(self.l2_unchecked(beta))
    }

    fn l2_unchecked(&self, beta: &DVector<f64>) -> f64 {
        let sb = &self.second * beta;
        (beta.dot(&sb) - 2.0 * beta.dot(&self.cross) + self.target_sq).max(0.0)
    }

    fn log_lik_at(&self, f: &DVector<f64>) -> f64 {
        let n = self.nodes.as_ref().expect("nodes");
        (0..f.len())
            .map(|i| n.weights[i] * (-n.pi[i] * f[i] + softplus(f[i])))
            .sum()
    }

    /// `Xi(f_beta) = E rho_beta - E rho_{f0}`.
    pub fn excess_risk(&self, beta: &DVector<f64>) -> Result<f64> {
        self.check(beta)?;
        Ok(self.excess_risk_unchecked(beta))
    }

    pub(crate) fn excess_risk_unchecked(&self, beta: &DVector<f64>) -> f64 {
        match self.loss {
            LossKind::Quadratic => self.l2_unchecked(beta),
            LossKind::Logistic => {
                let n = self.nodes.as_ref().expect("logistic population has nodes");
                let f = &n.features * beta;
                // each term is a pointwise Kullback-Leibler divergence, so clamp rounding only
                (self.log_lik_at(&f) - self.base_log_lik).max(0.0)
            }
        }
    }

    /// `E rho_beta(X, Y)`.
    pub fn expected_loss(&self, beta: &DVector<f64>) -> Result<f64> {
        self.check(beta)?;
        Ok(match self.loss {
            LossKind::Quadratic => self.l2_unchecked(beta) + self.noise_var,
            LossKind::Logistic => {
                let f = &self.nodes.as_ref().unwrap().features * beta;
                self.log_lik_at(&f)
            }
        })
    }

    /// `sup_x |f_beta(x) - f0(x)|` over the covariate support.
    pub fn sup_deviation(&self, beta: &DVector<f64>) -> Result<f64> {
        self.check(beta)?;
        match (&self.nodes, self.method) {
            (Some(n), PopulationMethod::Quadrature) => {
                let f = &n.features * beta;
                Ok((0..f.len()).map(|i| (f[i] - n.f0[i]).abs()).fold(0.0, f64::max))
            }
            _ => {
                // linear truth on the cube: sup |<x, beta - b0> + a| = |a| + ||beta - b0||_1
                let Truth::Linear(b0) = &self.truth else {
                    unreachable!("vector populations have linear truths")
                };
                let off = usize::from(self.basis.intercept);
                let a = if off == 1 { beta[0].abs() } else { 0.0 };
                Ok(a + (0..b0.len()).map(|j| (beta[off + j] - b0[j]).abs()).sum::<f64>())
            }
        }
    }

    /// Coefficients of the truth in the basis, when `f0` lies in the linear span.
    pub fn linear_truth(&self) -> Option<DVector<f64>> {
        match (&self.truth, self.basis.kind) {
            (Truth::Linear(b0), BasisKind::Identity) if b0.len() == self.basis.p => {
                let off = usize::from(self.basis.intercept);
                let mut b = DVector::zeros(self.columns());
                for j in 0..b0.len() {
                    b[off + j] = b0[j];
                }
                Some(b)
            }
            _ => None,
        }
    }

    /// Minimizer of the population risk over coefficients supported on `support`
    /// (plus the intercept, if any).
    pub fn restricted_minimizer(&self, support: &[usize]) -> Result<DVector<f64>> {
        let p = self.columns();
        let mut idx: Vec<usize> = Vec::new();
        if self.basis.intercept {
            idx.push(0);
        }
        for &j in support {
            if j >= p {
                return Err(Error::InvalidInput(format!("support index {j} out of range {p}")));
            }
            if !idx.contains(&j) {
                idx.push(j);
            }
        }
        let mut beta = DVector::zeros(p);
        if idx.is_empty() {
            return Ok(beta);
        }
        let k = idx.len();
        let sub = DMatrix::from_fn(k, k, |a, b| self.second[(idx[a], idx[b])]);
        let rhs = DVector::from_fn(k, |a, _| self.cross[idx[a]]);
        let ridge = 1e-12 * (0..k).map(|a| sub[(a, a)]).fold(0.0, f64::max).max(1e-300);
        let solve = |m: &DMatrix<f64>, r: &DVector<f64>| -> DVector<f64> {
            let mut m = m.clone();
            for a in 0..k {
                m[(a, a)] += ridge;
            }
            match m.clone().cholesky() {
                Some(c) => c.solve(r),
                None => m.svd(true, true).solve(r, 1e-12).unwrap_or_else(|_| DVector::zeros(k)),
            }
        };
        let mut local = solve(&sub, &rhs);
        if self.loss == LossKind::Logistic {
            let n = self.nodes.as_ref().unwrap();
            let xs = DMatrix::from_fn(n.features.nrows(), k, |i, a| n.features[(i, idx[a])]);
            let obj = |c: &DVector<f64>| self.log_lik_at(&(&xs * c));
            // Newton from zero (the least-squares seed is on the wrong scale), with halving
            local = DVector::zeros(k);
            let mut val = obj(&local);
            for _ in 0..100 {
                let f = &xs * &local;
                let mut g = DVector::zeros(k);
                let mut h = DMatrix::zeros(k, k);
                for i in 0..f.len() {
                    let s = logistic_cdf(f[i]);
                    let w = n.weights[i];
                    let row = xs.row(i);
                    let r = w * (s - n.pi[i]);
                    let c = w * s * (1.0 - s);
                    for a in 0..k {
                        g[a] += r * row[a];
                        for b in 0..=a {
                            h[(a, b)] += c * row[a] * row[b];
                        }
                    }
                }
                for a in 0..k {
                    for b in 0..a {
                        h[(b, a)] = h[(a, b)];
                    }
                }
                let step = solve(&h, &g);
                let mut t = 1.0;
                let mut improved = false;
                while t > 1e-10 {
                    let cand = &local - &step * t;
                    let v = obj(&cand);
                    if v <= val {
                        improved = v < val;
                        local = cand;
                        val = v;
                        break;
                    }
                    t *= 0.5;
                }
                if !improved || g.amax() < 1e-13 {
                    break;
                }
            }
        }
        for (a, &j) in idx.iter().enumerate() {
            beta[j] = local[a];
        }
        Ok(beta)
    }
}

/// Excess risk as a function of the coefficients on a fixed index set, without
/// materializing full-length vectors.
#[derive(Clone, Debug)]
pub struct RestrictedRisk<'a> {
    pop: &'a Population,
    pub indices: Vec<usize>,
    second: DMatrix<f64>,
    cross: DVector<f64>,
    features: Option<DMatrix<f64>>,
}

impl RestrictedRisk<'_> {
    pub fn excess_risk(&self, local: &DVector<f64>) -> f64 {
        match &self.features {
            None => (local.dot(&(&self.second * local)) - 2.0 * local.dot(&self.cross)
                + self.pop.target_sq)
                .max(0.0),
            Some(x) => (self.pop.log_lik_at(&(x * local)) - self.pop.base_log_lik).max(0.0),
        }
    }

    pub fn embed(&self, local: &DVector<f64>) -> DVector<f64> {
        let mut beta = DVector::zeros(self.pop.columns());
        for (a, &j) in self.indices.iter().enumerate() {
            beta[j] = local[a];
        }
        beta
    }

    pub fn restrict(&self, beta: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.indices.len(), |a, _| beta[self.indices[a]])
    }
}

impl Population {
    pub fn restricted(&self, indices: &[usize]) -> Result<RestrictedRisk<'_>> {
        let p = self.columns();
        if let Some(&j) = indices.iter().find(|&&j| j >= p) {
            return Err(Error::InvalidInput(format!("index {j} out of range {p}")));
        }
        let idx = indices.to_vec();
        let k = idx.len();
        let features = match self.loss {
            LossKind::Quadratic => None,
            LossKind::Logistic => {
                let n = self.nodes.as_ref().expect("logistic population has nodes");
                Some(DMatrix::from_fn(n.features.nrows(), k, |i, a| n.features[(i, idx[a])]))
            }
        };
        Ok(RestrictedRisk {
            pop: self,
            second: DMatrix::from_fn(k, k, |a, b| self.second[(idx[a], idx[b])]),
            cross: DVector::from_fn(k, |a, _| self.cross[idx[a]]),
            features,
            indices: idx,
        })
    }
}

fn moments_from_nodes(n: &Nodes) -> (DMatrix<f64>, DVector<f64>, f64) {
    let m = n.features.nrows();
    let cols = n.features.ncols();
    let mut weighted = n.features.clone();
    for i in 0..m {
        let w = n.weights[i];
        for j in 0..cols {
            weighted[(i, j)] *= w;
        }
    }
    let second = weighted.transpose() * &n.features;
    let cross = weighted.transpose() * &n.f0;
    let target_sq = (0..m).map(|i| n.weights[i] * n.f0[i] * n.f0[i]).sum();
    (second, cross, target_sq)
}
