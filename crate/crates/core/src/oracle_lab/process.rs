//! Empirical process `V_n(beta) = P_n rho_beta - E rho_beta` and probe-based
//! lower estimates of its local supremum
//! `Z_M = sup_{||beta - beta*||_1 <= M} |V_n(beta) - V_n(beta*)|`.
//!
//! The estimate only ever evaluates feasible points, so it never exceeds the
//! true supremum. A lower estimate can only over-report membership in the
//! event `{Z_M* <= lambda0 M*}`; the inequality check on that event stays honest.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::BasisSpec;
use crate::datagen::{DgpConfig, Sample};
use crate::error::{Error, Result};
use crate::linalg::{l1_norm, project_l1_ball};
use crate::loss::LossModel;
use crate::population::{Population, PopulationOptions};
use crate::rng;
use crate::solver::Problem;

/// `V_n` for one sample against its population.
pub struct EmpiricalProcess<'p, 'd> {
    problem: &'p Problem<'d>,
    population: &'p Population,
}

impl<'p, 'd> EmpiricalProcess<'p, 'd> {
    pub fn new(problem: &'p Problem<'d>, population: &'p Population) -> Result<Self> {
        if problem.p() != population.columns() {
            return Err(Error::DimensionMismatch {
                context: "population basis".into(),
                expected: problem.p(),
                found: population.columns(),
            });
        }
        if problem.loss().kind != population.loss {
            return Err(Error::InvalidInput("sample and population use different losses".into()));
        }
        Ok(Self { problem, population })
    }

    pub fn value(&self, beta: &DVector<f64>) -> Result<f64> {
        Ok(self.problem.risk(beta)? - self.population.expected_loss(beta)?)
    }

    pub fn p(&self) -> usize {
        self.problem.p()
    }
}

/// Convenience wrapper: `V_n(beta)` from a sample and its simulation config.
pub fn empirical_process_value(
    sample: &Sample,
    config: Option<&DgpConfig>,
    loss: &LossModel,
    basis: &BasisSpec,
    beta: &DVector<f64>,
    population: &PopulationOptions,
) -> Result<f64> {
    let config = config.ok_or(Error::UnknownTruth)?;
    let design = basis.design_matrix(sample)?;
    let problem = Problem::new(&design, sample.y(), *loss)?;
    let pop = Population::build(config, basis, loss.kind, population)?;
    EmpiricalProcess::new(&problem, &pop)?.value(beta)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZmOptions {
    /// Random boundary points `beta* + M d`, `d` with Dirichlet magnitudes and random signs.
    pub boundary_probes: usize,
    /// Best probes refined by stochastic hill climbing.
    pub climb_starts: usize,
    pub climb_steps: usize,
    pub seed: u64,
}

impl Default for ZmOptions {
    fn default() -> Self {
        Self {
            boundary_probes: 64,
            climb_starts: 4,
            climb_steps: 60,
            seed: 0,
        }
    }
}

/// Lower estimate of `Z_M`. With `restrict = Some(G)` the supremum is over the
/// part of the ball inside `{||beta||_1 <= G}`.
pub fn estimate_z_m(
    process: &EmpiricalProcess,
    beta_star: &DVector<f64>,
    m: f64,
    restrict: Option<f64>,
    opts: &ZmOptions,
) -> Result<f64> {
    Ok(estimate_z_m_path(process, beta_star, &[m], restrict, opts)?[0])
}

/// Lower estimates of `Z_M` at several radii sharing one probe stream. Probes
/// found at smaller radii count for every larger radius, so the output is
/// non-decreasing in `M`.
pub fn estimate_z_m_path(
    process: &EmpiricalProcess,
    beta_star: &DVector<f64>,
    radii: &[f64],
    restrict: Option<f64>,
    opts: &ZmOptions,
) -> Result<Vec<f64>> {
    let p = process.p();
    if beta_star.len() != p {
        return Err(Error::DimensionMismatch {
            context: "oracle coefficients".into(),
            expected: p,
            found: beta_star.len(),
        });
    }
    if radii.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
        return Err(Error::InvalidInput("radii must be finite and non-negative".into()));
    }
    if let Some(g) = restrict {
        if l1_norm(beta_star) > g * (1.0 + 1e-12) {
            return Err(Error::Infeasible(format!(
                "oracle coefficients leave the l1 ball of radius {g}"
            )));
        }
    }
    let v_star = process.value(beta_star)?;

    // shared unit-l1 directions
    let mut rng = rng::stream(opts.seed);
    let mut dirs: Vec<DVector<f64>> = Vec::with_capacity(2 * p + opts.boundary_probes);
    for j in 0..p {
        for s in [1.0, -1.0] {
            let mut d = DVector::zeros(p);
            d[j] = s;
            dirs.push(d);
        }
    }
    for _ in 0..opts.boundary_probes {
        let w: Vec<f64> = (0..p).map(|_| Exp1.sample(&mut rng)).collect();
        let total: f64 = w.iter().sum();
        dirs.push(DVector::from_fn(p, |j, _| {
            let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
            s * w[j] / total
        }));
    }

    let place = |d: &DVector<f64>, m: f64| -> DVector<f64> {
        let full = beta_star + d * m;
        match restrict {
            Some(g) if l1_norm(&full) > g => {
                // largest theta with ||beta* + theta m d||_1 <= g (convex in theta)
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if l1_norm(&(beta_star + d * (m * mid))) <= g {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                beta_star + d * (m * lo)
            }
            _ => full,
        }
    };
    let gap = |beta: &DVector<f64>| -> Result<f64> { Ok((process.value(beta)? - v_star).abs()) };

    let mut order: Vec<usize> = (0..radii.len()).collect();
    order.sort_by(|&a, &b| radii[a].total_cmp(&radii[b]));
    let mut out = vec![0.0; radii.len()];
    let mut running = 0.0_f64;
    for (rank, &idx) in order.iter().enumerate() {
        let m = radii[idx];
        if m > 0.0 {
            let mut scored: Vec<(f64, usize)> = Vec::with_capacity(dirs.len());
            for (k, d) in dirs.iter().enumerate() {
                scored.push((gap(&place(d, m))?, k));
            }
            scored.sort_by(|a, b| b.0.total_cmp(&a.0));
            let mut best = scored.first().map_or(0.0, |s| s.0);
            let mut climb_rng = rng::stream(rng::derive_seed(opts.seed, rank as u64 + 1));
            for &(score, k) in scored.iter().take(opts.climb_starts) {
                let mut d = dirs[k].clone();
                let mut val = score;
                let mut sigma = 0.5 / (p as f64).sqrt();
                for _ in 0..opts.climb_steps {
                    let noise = DVector::from_fn(p, |_, _| climb_rng.sample::<f64, _>(StandardNormal));
                    let cand = project_l1_ball(&(&d + noise * sigma), 1.0);
                    let v = gap(&place(&cand, m))?;
                    if v > val {
                        val = v;
                        d = cand;
                    } else {
                        sigma *= 0.85;
                    }
                }
                best = best.max(val);
            }
            running = running.max(best);
        }
        out[idx] = running;
    }
    Ok(out)
}
