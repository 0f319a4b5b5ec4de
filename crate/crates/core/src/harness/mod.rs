//! Experiment harness: configuration, studies, records and summaries.

pub mod config;
pub mod io;
pub mod rate;
pub mod record;
pub mod study;
pub mod summary;

pub use config::{ExperimentConfig, Lambda2Rule, LipschitzForm, OutputFormat, PenaltyRule, Study};
pub use rate::{ols_slope, run_rate_study, spearman, RateRow, RateTable};
pub use record::{FitSummary, RecordStatus, ReplicationRecord, SelectionSummary};
pub use study::{penalty_levels, run_study, Levels, RunOptions, StudyContext, StudyOutcome, ABORT_LIMIT};
pub use summary::{summarize, Fraction, MeanSe, Summary};
