//! Evaluation: ROC/AUC, the Naive Bayes baseline, synthetic
//! conditionally-independent data with exact population statistics, and
//! the experiment and diagnostics harnesses.

mod auc;
mod diag;
mod experiment;
mod nb;
mod synth;

pub use auc::{roc_auc, AucResult};
pub use diag::{diagnostics, spearman, write_diagnostics_csv, DiagnosticsRow, DIAG_CSV_HEADER};
pub use experiment::{
    run_experiment, CorpusSource, ExperimentConfig, ExperimentReport, Method, MethodResult,
};
pub use nb::{naive_bayes, NaiveBayesModel};
pub use synth::{synth_generate, population_stats, MixtureSpec, PopulationStats, SyntheticSpec};
