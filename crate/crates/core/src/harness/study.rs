//! Seeded Monte Carlo studies.
//!
//! Quantities that depend only on the population (the oracle, `phi*`, penalty
//! levels) are computed once per study; each replication draws its own sample
//! from a seed derived from the master seed and its index.

use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Lambda2Rule, LipschitzForm, PenaltyRule, Study};
use super::record::{FitSummary, RecordStatus, ReplicationRecord, SelectionSummary};
use super::summary::{summarize, Summary};
use crate::datagen::{generate, DgpConfig, Truth};
use crate::error::{Error, Result};
use crate::loss::{margin_constant, LossKind, LossModel, MarginSpec};
use crate::oracle_lab::{
    adaptive_restricted_eigenvalue, check_linear_bounds, check_theorem1, compute_l_n, estimate_z_m,
    lambda0_concentration, oracle_search, quadratic_lipschitz_context, AreOptions, Concentration,
    ConjugateSpec, EmpiricalProcess, OracleOptions, OracleReport,
};
use crate::population::{Population, PopulationOptions};
use crate::rng::{self, tag};
use crate::selection::{default_threshold, lambda_path, recovery, select_by_gic, threshold, SelectOptions};
use crate::solver::{PenaltyConfig, Problem};

/// Fraction of aborted replications above which a study fails.
pub const ABORT_LIMIT: f64 = 0.10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Worker threads; `0` or `1` runs serially.
    pub parallel: usize,
    pub master_seed: Option<u64>,
    pub replications: Option<usize>,
}

impl RunOptions {
    pub fn apply(&self, cfg: &ExperimentConfig) -> Result<ExperimentConfig> {
        let mut cfg = cfg.clone();
        if let Some(s) = self.master_seed {
            cfg.master_seed = s;
        }
        if let Some(r) = self.replications {
            cfg.replications = r;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Penalty levels at one sample size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Levels {
    pub lambda0: f64,
    pub lambda1: f64,
    /// Lipschitz constant entering the concentration level, when used.
    pub lipschitz: Option<f64>,
    pub concentration: Option<Concentration>,
}

pub fn penalty_levels(cfg: &ExperimentConfig, n: usize) -> Result<Levels> {
    let p = cfg.basis.p;
    match *cfg.penalty_rule()? {
        PenaltyRule::Explicit { lambda0, lambda1, .. } => Ok(Levels {
            lambda0,
            lambda1,
            lipschitz: None,
            concentration: None,
        }),
        PenaltyRule::LemmaQuad {
            multiplier,
            t,
            lipschitz,
            ..
        } => {
            let mut model = LossModel::new(cfg.loss);
            if cfg.loss == LossKind::Quadratic {
                let g = cfg.ell1_radius.ok_or(Error::MissingContext("ell1_radius"))?;
                model = model.with_context(quadratic_lipschitz_context(&cfg.dgp, &cfg.basis, g, n)?);
            }
            let d = match lipschitz {
                LipschitzForm::Statement => model.lipschitz_constant()?,
                LipschitzForm::Proof => model.lipschitz_constant_proof_form()?,
            };
            let conc = lambda0_concentration(d, cfg.basis.k_bound, n, p, t)?;
            Ok(Levels {
                lambda0: conc.zeta,
                lambda1: multiplier * conc.zeta,
                lipschitz: Some(d),
                concentration: Some(conc),
            })
        }
        PenaltyRule::RateScaled { c0, multiplier, .. } => {
            let nf = n as f64;
            let lambda0 = c0 * ((p as f64).ln().max(1.0) * nf.ln() / nf).sqrt();
            Ok(Levels {
                lambda0,
                lambda1: multiplier * lambda0,
                lipschitz: None,
                concentration: None,
            })
        }
    }
}

/// Population-level quantities shared by all replications at one `n`.
pub struct StudyContext {
    pub config: ExperimentConfig,
    pub dgp: DgpConfig,
    pub population: Population,
    pub levels: Levels,
    pub lambda2: f64,
    pub margin: Option<MarginSpec>,
    pub conjugate: Option<ConjugateSpec>,
    pub oracle: Option<OracleReport>,
    pub beta0: Option<DVector<f64>>,
    pub true_support: Option<Vec<usize>>,
}

fn population_options(cfg: &ExperimentConfig) -> PopulationOptions {
    PopulationOptions {
        mc_size: cfg.population_mc_size,
        seed: rng::derive_seed(cfg.master_seed, tag::POPULATION),
        ..PopulationOptions::default()
    }
}

fn oracle_options(cfg: &ExperimentConfig) -> OracleOptions {
    let base = cfg.oracle.as_ref().and_then(|o| o.options).unwrap_or_default();
    OracleOptions {
        seed: rng::derive_seed(cfg.master_seed, tag::ORACLE),
        are: are_options(cfg),
        ..base
    }
}

fn are_options(cfg: &ExperimentConfig) -> AreOptions {
    AreOptions {
        seed: rng::derive_seed(cfg.master_seed, tag::ARE),
        ..cfg.are.unwrap_or_default()
    }
}

fn coupled_lambda2(lambda1: f64, beta: &DVector<f64>) -> Result<f64> {
    let s = beta.iter().filter(|v| **v != 0.0).count();
    let norm = beta.norm();
    if s == 0 || norm == 0.0 {
        return Err(Error::Degenerate("lambda2 coupling needs a nonzero coefficient vector".into()));
    }
    Ok(lambda1 * (s as f64).sqrt() / (2.0 * norm))
}

impl StudyContext {
    /// Builds the context at sample size `n` (population built from scratch).
    pub fn prepare(cfg: &ExperimentConfig, n: usize) -> Result<Self> {
        let dgp = cfg.dgp.with_n(n);
        let population = Population::build(&dgp, &cfg.basis, cfg.loss, &population_options(cfg))?;
        Self::with_population(cfg, n, population)
    }

    pub fn with_population(cfg: &ExperimentConfig, n: usize, population: Population) -> Result<Self> {
        let dgp = cfg.dgp.with_n(n);
        let levels = match cfg.penalty {
            Some(_) => penalty_levels(cfg, n)?,
            // tuned per replication along the path; zero marks "not applicable"
            None => Levels {
                lambda0: 0.0,
                lambda1: 0.0,
                lipschitz: None,
                concentration: None,
            },
        };
        let beta0 = population.linear_truth();
        let true_support = beta0
            .as_ref()
            .map(|b| (0..b.len()).filter(|&j| b[j] != 0.0).collect::<Vec<_>>());
        let margin = match &cfg.margin {
            Some(m) => Some(margin_constant(&LossModel::new(cfg.loss), &dgp, m.eta)?),
            None => None,
        };
        let conjugate = margin.clone().map(ConjugateSpec::closed_form);

        let mut ctx = Self {
            config: cfg.clone(),
            dgp,
            population,
            levels,
            lambda2: 0.0,
            margin,
            conjugate,
            oracle: None,
            beta0,
            true_support,
        };
        ctx.resolve_oracle()?;
        Ok(ctx)
    }

    fn gamma(&self, s_star: Option<usize>) -> Result<(Vec<Vec<usize>>, String)> {
        match (&self.config.oracle, s_star) {
            (Some(o), _) => Ok((
                o.gamma.resolve(self.population.columns(), self.true_support.as_deref())?,
                o.gamma.describe(),
            )),
            (None, Some(s)) => Ok((vec![(0..s).collect()], format!("{{{{1..{s}}}}}"))),
            (None, None) => match &self.true_support {
                Some(s) => Ok((vec![s.clone()], "{S0}".into())),
                None => Err(Error::InvalidConfig("no Gamma available".into())),
            },
        }
    }

    /// Resolves `lambda2` and, when the study needs it, the oracle.
    fn resolve_oracle(&mut self) -> Result<()> {
        let cfg = &self.config;
        let lambda1 = self.levels.lambda1;
        let needs_oracle = !matches!(cfg.study, Study::GicSelection | Study::SeriesRate)
            || cfg.rate.as_ref().is_some_and(|r| r.oracle_bound);
        let s_star = self.rate_s_star()?;
        let Some(rule) = cfg.penalty else {
            return Ok(());
        };
        match rule.lambda2_rule() {
            Lambda2Rule::Fixed { value } => self.lambda2 = value,
            Lambda2Rule::Ratio { kappa } => self.lambda2 = kappa * lambda1,
            Lambda2Rule::Remark4 => {
                let (gamma, _) = self.gamma(s_star)?;
                let shortcut = match (&self.beta0, &self.true_support) {
                    (Some(b0), Some(s0)) => {
                        gamma.len() == 1 && {
                            let mut g = gamma[0].clone();
                            g.sort_unstable();
                            &g == s0
                        } && !b0.is_empty()
                    }
                    _ => false,
                };
                self.lambda2 = if shortcut {
                    coupled_lambda2(lambda1, self.beta0.as_ref().unwrap())?
                } else {
                    let seed = self.population.restricted_minimizer(&gamma[0])?;
                    coupled_lambda2(lambda1, &seed)?
                };
            }
        }
        if !needs_oracle {
            return Ok(());
        }
        let conj = self
            .conjugate
            .clone()
            .ok_or_else(|| Error::InvalidConfig("oracle needs a [margin] section".into()))?;
        let (gamma, desc) = self.gamma(s_star)?;
        let sigma = self.population.second_moment().clone();
        let opts = oracle_options(cfg);
        let search = |l2: f64| {
            oracle_search(&gamma, &desc, &self.population, self.levels.lambda0, lambda1, l2, &conj, &sigma, &opts)
        };
        let mut report = search(self.lambda2)?;
        if rule.lambda2_rule() == Lambda2Rule::Remark4 && !report.shortcut {
            // one fixed-point update of the coupling at the oracle itself
            self.lambda2 = coupled_lambda2(lambda1, &report.beta_star)?;
            report = search(self.lambda2)?;
        }
        self.oracle = Some(report);
        Ok(())
    }

    /// `s* = ceil(lambda0^{-2/(2r+1)})` clipped to `[1, p]` for rate studies.
    pub fn rate_s_star(&self) -> Result<Option<usize>> {
        let Some(rate) = &self.config.rate else {
            return Ok(None);
        };
        if let Some(s) = rate.s_star {
            return Ok(Some(s.clamp(1, self.config.basis.p)));
        }
        if let Some(s0) = &self.true_support {
            return Ok(Some(s0.len().max(1)));
        }
        let r = match self.dgp.truth()? {
            Truth::Smooth(t) => t.smoothness(),
            // linear in a non-identity basis: smooth of every order
            Truth::Linear(_) => f64::INFINITY,
        };
        let exponent = -2.0 / (2.0 * r + 1.0);
        let s = self.levels.lambda0.powf(exponent).ceil();
        let s = if s.is_finite() { s as usize } else { 1 };
        Ok(Some(s.clamp(1, self.config.basis.p)))
    }

    fn penalty(&self) -> PenaltyConfig {
        PenaltyConfig {
            lambda1: self.levels.lambda1,
            lambda2: self.lambda2,
            ell1_radius: self.config.ell1_radius,
        }
    }

    fn base_record(&self, replication: usize, seed: u64) -> ReplicationRecord {
        let mut r = ReplicationRecord::aborted(self.config.study.name(), replication, seed, self.dgp.n, String::new());
        r.status = RecordStatus::Ok;
        r.error = None;
        r.lambda0 = self.levels.lambda0;
        r.lambda1 = self.levels.lambda1;
        r.lambda2 = self.lambda2;
        r
    }

    /// One replication with seed path `path` (`[replication]` or `[grid index, replication]`).
    pub fn run_replication(&self, replication: usize, path: &[u64]) -> ReplicationRecord {
        let seed = rng::derive_seed_path(self.config.master_seed, path);
        let start = Instant::now();
        let mut record = match self.replication_inner(replication, seed) {
            Ok(r) => r,
            Err(e) => ReplicationRecord::aborted(self.config.study.name(), replication, seed, self.dgp.n, e.to_string()),
        };
        record.timing_ms = start.elapsed().as_secs_f64() * 1e3;
        record
    }

    fn replication_inner(&self, replication: usize, seed: u64) -> Result<ReplicationRecord> {
        let cfg = &self.config;
        let sample = generate(&self.dgp.with_seed(rng::derive_seed(seed, tag::DATA)))?;
        let design = cfg.basis.design_matrix(&sample)?;
        let problem = Problem::new(&design, sample.y(), LossModel::new(cfg.loss))?;
        let mut rec = self.base_record(replication, seed);

        if cfg.study == Study::GicSelection {
            return self.selection_replication(&problem, rec);
        }

        let fit = problem.fit(&self.penalty(), &cfg.solver, None)?;
        rec.fit = Some(FitSummary::from(&fit));
        if cfg.study == Study::SeriesRate {
            rec.mse = Some(self.population.l2_distance_sq(&fit.beta_hat)?);
            rec.s_star = self.rate_s_star()?;
            if self.oracle.is_none() {
                return Ok(rec);
            }
        }
        let oracle = self.oracle.as_ref().expect("oracle resolved for this study");
        let process = EmpiricalProcess::new(&problem, &self.population)?;
        let probes = crate::oracle_lab::ZmOptions {
            seed: rng::derive_seed(seed, tag::PROBES),
            ..cfg.probes
        };
        let z = estimate_z_m(&process, &oracle.beta_star, oracle.m_star, cfg.ell1_radius, &probes)?;
        let check = check_theorem1(
            &fit,
            oracle,
            self.levels.lambda1,
            self.lambda2,
            |b| self.population.excess_risk(b),
            z,
        )?;
        rec.tau_member = Some(check.tau_member);
        rec.mse = Some(self.population.l2_distance_sq(&fit.beta_hat)?);
        if let (Some(b0), true) = (&self.beta0, oracle.shortcut) {
            let conj = self.conjugate.as_ref().expect("conjugate with oracle");
            rec.linear = Some(check_linear_bounds(
                &fit.beta_hat,
                b0,
                check.excess_risk_hat,
                self.levels.lambda1,
                self.lambda2,
                oracle.phi_star,
                conj,
            )?);
        }
        rec.theorem1 = Some(check);
        rec.s_star = Some(oracle.s_size);
        rec.oracle = Some(oracle.clone());
        Ok(rec)
    }

    fn selection_replication(&self, problem: &Problem, mut rec: ReplicationRecord) -> Result<ReplicationRecord> {
        let sel_cfg = self.config.selection.as_ref().expect("validated");
        let path = lambda_path(problem, &sel_cfg.path)?;
        let report = select_by_gic(
            problem,
            &path.points,
            &self.config.solver,
            &SelectOptions {
                parallel: sel_cfg.parallel_refit,
            },
        )?;
        let truth = self.true_support.clone().unwrap_or_default();
        let screening = recovery(&report.support, &truth);
        let tau = if report.support.is_empty() || sel_cfg.threshold_multiplier == 0.0 {
            0.0
        } else {
            let s = report.support.len();
            let gram = problem.design().values.tr_mul(&problem.design().values) / problem.n() as f64;
            let local: f64 = report.support.iter().map(|&j| report.beta_hat[j].powi(2)).sum::<f64>().sqrt();
            let l_n = compute_l_n(s, report.lambda1, report.lambda2, local)?;
            let are = adaptive_restricted_eigenvalue(&gram, &report.support, l_n, &are_options(&self.config))?;
            let c = self.margin.as_ref().and_then(|m| m.c()).unwrap_or(1.0);
            default_threshold(report.lambda1, s as f64, are.phi2, c, sel_cfg.threshold_multiplier)?
        };
        let (beta_tilde, thresholded_support) = threshold(&report.beta_hat, tau)?;
        rec.lambda1 = report.lambda1;
        rec.lambda2 = report.lambda2;
        rec.selection = Some(SelectionSummary {
            lambda1: report.lambda1,
            lambda2: report.lambda2,
            support: report.support.clone(),
            threshold: tau,
            thresholded: recovery(&thresholded_support, &truth),
            thresholded_support,
            screening,
            path_points: report.records.len(),
            non_converged: report.records.iter().filter(|r| !r.converged).count(),
            monotonicity_violations: report.monotonicity_violations,
        });
        rec.mse = Some(self.population.l2_distance_sq(&beta_tilde)?);
        Ok(rec)
    }
}

pub(crate) fn run_pool<T: Send>(parallel: usize, count: usize, f: impl Fn(usize) -> T + Sync + Send) -> Result<Vec<T>> {
    if parallel <= 1 {
        return Ok((0..count).map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..count).into_par_iter().map(f).collect()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyOutcome {
    pub records: Vec<ReplicationRecord>,
    pub summary: Summary,
    pub levels: Levels,
    pub lambda2: f64,
    pub oracle: Option<OracleReport>,
    pub rate: Option<super::rate::RateTable>,
    /// More than the allowed fraction of replications aborted.
    pub failed: bool,
}

pub fn run_study(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<StudyOutcome> {
    let cfg = opts.apply(cfg)?;
    if cfg.study == Study::SeriesRate {
        return super::rate::run_rate_study(&cfg, opts);
    }
    let ctx = StudyContext::prepare(&cfg, cfg.dgp.n)?;
    let records = run_pool(opts.parallel, cfg.replications, |i| ctx.run_replication(i, &[i as u64]))?;
    let summary = summarize(&records)?;
    Ok(StudyOutcome {
        failed: summary.aborted_fraction > ABORT_LIMIT,
        records,
        summary,
        levels: ctx.levels,
        lambda2: ctx.lambda2,
        oracle: ctx.oracle.clone(),
        rate: None,
    })
}

