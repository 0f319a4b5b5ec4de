//! Convergence-rate study over a grid of sample sizes.

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::study::{run_pool, RunOptions, StudyContext, StudyOutcome, ABORT_LIMIT};
use super::summary::{summarize, MeanSe};
use crate::error::{Error, Result};
use crate::population::Population;
use crate::rng::{self, tag};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub s_star: usize,
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub mse: f64,
    pub mse_se: f64,
    pub completed: usize,
    pub aborted: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    /// OLS slope of `log mse` on `log n`.
    pub slope: f64,
    pub slope_se: f64,
    /// Spearman correlation between `n` and the mean MSE.
    pub spearman: f64,
}

/// OLS fit `y = a + b x`; returns `(b, se(b))`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let k = x.len();
    if k != y.len() || k < 3 {
        return Err(Error::InvalidConfig("slope needs at least 3 paired points".into()));
    }
    let kf = k as f64;
    let mx = x.iter().sum::<f64>() / kf;
    let my = y.iter().sum::<f64>() / kf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("constant regressor".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
    Ok((b, (rss / (kf - 2.0) / sxx).sqrt()))
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        // ties share their average rank
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &t in &idx[i..=j] {
            r[t] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidConfig("spearman needs at least 2 paired points".into()));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let m = (x.len() as f64 + 1.0) / 2.0;
    let num: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - m) * (b - m)).sum();
    let dx: f64 = rx.iter().map(|a| (a - m).powi(2)).sum();
    let dy: f64 = ry.iter().map(|b| (b - m).powi(2)).sum();
    if dx == 0.0 || dy == 0.0 {
        return Err(Error::Degenerate("constant ranks".into()));
    }
    Ok(num / (dx * dy).sqrt())
}

pub fn run_rate_study(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<StudyOutcome> {
    let rate = cfg.rate.as_ref().ok_or(Error::MissingContext("rate"))?;
    let pop_opts = crate::population::PopulationOptions {
        mc_size: cfg.population_mc_size,
        seed: rng::derive_seed(cfg.master_seed, tag::POPULATION),
        ..Default::default()
    };
    // the population law does not depend on n
    let population = Population::build(&cfg.dgp, &cfg.basis, cfg.loss, &pop_opts)?;
    let mut records = Vec::new();
    let mut rows = Vec::new();
    let mut last = None;
    for (g, &n) in rate.n_grid.iter().enumerate() {
        let ctx = StudyContext::with_population(cfg, n, population.clone())?;
        let recs = run_pool(opts.parallel, cfg.replications, |i| {
            ctx.run_replication(i, &[g as u64, i as u64])
        })?;
        let mses: Vec<f64> = recs.iter().filter_map(|r| r.mse).collect();
        let stats = MeanSe::of(&mses);
        rows.push(RateRow {
            n,
            s_star: ctx.rate_s_star()?.unwrap_or(0),
            lambda0: ctx.levels.lambda0,
            lambda1: ctx.levels.lambda1,
            lambda2: ctx.lambda2,
            mse: stats.mean,
            mse_se: stats.se,
            completed: mses.len(),
            aborted: recs.len() - mses.len(),
        });
        records.extend(recs);
        last = Some(ctx);
    }
    let ctx = last.ok_or_else(|| Error::InvalidConfig("empty n grid".into()))?;
    let usable: Vec<&RateRow> = rows.iter().filter(|r| r.completed > 0 && r.mse > 0.0).collect();
    let lx: Vec<f64> = usable.iter().map(|r| (r.n as f64).ln()).collect();
    let ly: Vec<f64> = usable.iter().map(|r| r.mse.ln()).collect();
    let (slope, slope_se) = ols_slope(&lx, &ly)?;
    let nx: Vec<f64> = usable.iter().map(|r| r.n as f64).collect();
    let my: Vec<f64> = usable.iter().map(|r| r.mse).collect();
    let spearman = spearman(&nx, &my)?;
    let summary = summarize(&records)?;
    Ok(StudyOutcome {
        failed: summary.aborted_fraction > ABORT_LIMIT,
        records,
        summary,
        levels: ctx.levels,
        lambda2: ctx.lambda2,
        oracle: ctx.oracle.clone(),
        rate: Some(RateTable {
            rows,
            slope,
            slope_se,
            spearman,
        }),
    })
}
