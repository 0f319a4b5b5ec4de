//! Aggregates over replication records; recomputable from the persisted JSONL.

use serde::{Deserialize, Serialize};

use super::record::{RecordStatus, ReplicationRecord};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fraction {
    pub count: usize,
    pub total: usize,
    pub fraction: f64,
    /// Binomial standard error `sqrt(f (1 - f) / total)`.
    pub se: f64,
}

impl Fraction {
    pub fn new(count: usize, total: usize) -> Self {
        let fraction = if total == 0 { f64::NAN } else { count as f64 / total as f64 };
        let se = if total == 0 {
            f64::NAN
        } else {
            (fraction * (1.0 - fraction) / total as f64).sqrt()
        };
        Self {
            count,
            total,
            fraction,
            se,
        }
    }

    fn of<'a>(items: impl Iterator<Item = &'a ReplicationRecord>, pred: impl Fn(&ReplicationRecord) -> Option<bool>) -> Self {
        let (mut c, mut t) = (0, 0);
        for r in items {
            if let Some(b) = pred(r) {
                t += 1;
                c += usize::from(b);
            }
        }
        Self::new(c, t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Self {
        let k = values.len();
        if k == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
                count: 0,
            };
        }
        let mean = values.iter().sum::<f64>() / k as f64;
        let se = if k > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64 / k as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, se, count: k }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub study: String,
    pub records: usize,
    pub aborted: usize,
    pub aborted_fraction: f64,
    pub converged: Fraction,
    pub tau_member: Fraction,
    pub holds: Fraction,
    /// Computed only over records with `tau_member = true`.
    pub holds_given_tau: Fraction,
    /// Records with `tau_member` and a failed inequality; must be zero.
    pub violations: usize,
    pub violating_replications: Vec<usize>,
    pub linear_risk_given_tau: Fraction,
    pub linear_l1_given_tau: Fraction,
    pub mse: MeanSe,
    pub screening: Fraction,
    pub exact_recovery: Fraction,
}

pub fn summarize(records: &[ReplicationRecord]) -> Result<Summary> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no records to summarize".into()));
    }
    let ok: Vec<&ReplicationRecord> = records.iter().filter(|r| r.status == RecordStatus::Ok).collect();
    let aborted = records.len() - ok.len();
    let on_tau = || ok.iter().copied().filter(|r| r.tau_member == Some(true));
    let violating: Vec<usize> = on_tau()
        .filter(|r| r.theorem1.is_some_and(|t| !t.holds))
        .map(|r| r.replication)
        .collect();
    let mse: Vec<f64> = ok.iter().filter_map(|r| r.mse).collect();
    Ok(Summary {
        study: records[0].study.clone(),
        records: records.len(),
        aborted,
        aborted_fraction: aborted as f64 / records.len() as f64,
        converged: Fraction::of(ok.iter().copied(), |r| r.fit.as_ref().map(|f| f.converged)),
        tau_member: Fraction::of(ok.iter().copied(), |r| r.tau_member),
        holds: Fraction::of(ok.iter().copied(), |r| r.theorem1.map(|t| t.holds)),
        holds_given_tau: Fraction::of(on_tau(), |r| r.theorem1.map(|t| t.holds)),
        violations: violating.len(),
        violating_replications: violating,
        linear_risk_given_tau: Fraction::of(on_tau(), |r| r.linear.map(|l| l.risk_holds)),
        linear_l1_given_tau: Fraction::of(on_tau(), |r| r.linear.map(|l| l.l1_holds)),
        mse: MeanSe::of(&mse),
        screening: Fraction::of(ok.iter().copied(), |r| r.selection.as_ref().map(|s| s.screening.screening)),
        exact_recovery: Fraction::of(ok.iter().copied(), |r| r.selection.as_ref().map(|s| s.thresholded.exact)),
    })
}
