//! Resampled comparisons of the RDE variants against the Naive Bayes
//! baseline on one corpus.
//!
//! Each resample deterministically shuffles the corpus with seed + index,
//! takes disjoint labeled / test splits, strips the labels off the rest,
//! trains every requested method and reports test AUC.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::artifact;
use crate::corpus::{Dataset, Label};
use crate::ensemble::{train_serde, SelectionConfig};
use crate::error::{Error, Result};
use crate::eval::auc::roc_auc;
use crate::eval::nb::naive_bayes;
use crate::eval::synth::MixtureSpec;
use crate::rde::{build_semiperfect, Polarity, RdeModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Supervised RDE: label as reference, labeled split only.
    SuRde,
    /// The reference-feature ensemble trained semi-supervised.
    SeRde,
    /// Semi-perfect approximation: label as reference over all data.
    PerfRde,
    /// Bernoulli Naive Bayes on the labeled split.
    NaiveBayes,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::SuRde => "surde",
            Method::SeRde => "serde",
            Method::PerfRde => "perfrde",
            Method::NaiveBayes => "nb",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "surde" => Some(Method::SuRde),
            "serde" => Some(Method::SeRde),
            "perfrde" => Some(Method::PerfRde),
            "nb" => Some(Method::NaiveBayes),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub enum CorpusSource {
    /// Generate this many examples from a mixture spec.
    Mixture(MixtureSpec, usize),
    /// A fully labeled dataset supplied by the caller.
    Dataset(Dataset),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub source: CorpusSource,
    pub n_labeled: usize,
    pub n_test: usize,
    pub methods: Vec<Method>,
    pub resamples: usize,
    pub seed: u64,
    pub selection: SelectionConfig,
    pub ridge: f64,
}

#[derive(Debug, Clone)]
pub struct MethodResult {
    pub method: Method,
    pub aucs: Vec<f64>,
}

impl MethodResult {
    pub fn mean(&self) -> f64 {
        self.aucs.iter().sum::<f64>() / self.aucs.len() as f64
    }

    /// Sample standard deviation; 0 for a single resample.
    pub fn std(&self) -> f64 {
        let n = self.aucs.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.mean();
        let var = self
            .aucs
            .iter()
            .map(|a| (a - mean) * (a - mean))
            .sum::<f64>()
            / (n - 1) as f64;
        var.sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub results: Vec<MethodResult>,
    pub resamples: usize,
}

impl ExperimentReport {
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>8} {:>8}  per-resample AUC", "method", "mean", "std");
        for r in &self.results {
            let per: Vec<String> = r.aucs.iter().map(|a| format!("{a:.4}")).collect();
            let _ = writeln!(
                out,
                "{:<10} {:>8.4} {:>8.4}  [{}]",
                r.method.name(),
                r.mean(),
                r.std(),
                per.join(", ")
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path, config: &[(&str, String)]) -> Result<()> {
        let mut w = artifact::writer(path, "experiment", config)?;
        writeln!(w, "method,resample,auc")?;
        for r in &self.results {
            for (i, auc) in r.aucs.iter().enumerate() {
                writeln!(w, "{},{i},{auc}", r.method.name())?;
            }
            writeln!(w, "{},mean,{}", r.method.name(), r.mean())?;
            writeln!(w, "{},std,{}", r.method.name(), r.std())?;
        }
        Ok(())
    }
}

/// Disjoint (labeled, test, unlabeled-rest) index splits for one resample.
fn split_indices(
    m: usize,
    n_labeled: usize,
    n_test: usize,
    seed: u64,
) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(&mut rng);
    let labeled = perm[..n_labeled].to_vec();
    let test = perm[n_labeled..n_labeled + n_test].to_vec();
    let rest = perm[n_labeled + n_test..].to_vec();
    (labeled, test, rest)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let data = match &cfg.source {
        CorpusSource::Mixture(spec, n) => spec.generate(*n),
        CorpusSource::Dataset(d) => d.clone(),
    };
    if cfg.methods.is_empty() {
        return Ok(ExperimentReport {
            results: Vec::new(),
            resamples: cfg.resamples,
        });
    }
    if !data.is_fully_labeled() {
        return Err(Error::InvalidConfig(
            "experiments need a fully labeled corpus; unlabeledness is simulated by splitting"
                .into(),
        ));
    }
    if cfg.n_labeled + cfg.n_test > data.len() {
        return Err(Error::InvalidConfig(format!(
            "splits need {} examples but the corpus has {}",
            cfg.n_labeled + cfg.n_test,
            data.len()
        )));
    }
    if cfg.resamples == 0 {
        return Err(Error::InvalidConfig("resamples must be at least 1".into()));
    }

    let perfect = if cfg.methods.contains(&Method::PerfRde) {
        Some(build_semiperfect(&data, Polarity::Pos)?)
    } else {
        None
    };

    let per_resample: Result<Vec<Vec<f64>>> = (0..cfg.resamples)
        .into_par_iter()
        .map(|i| {
            let (labeled_idx, test_idx, rest_idx) = split_indices(
                data.len(),
                cfg.n_labeled,
                cfg.n_test,
                cfg.seed + i as u64,
            );
            let labeled = data.subset(&labeled_idx, format!("resample {i} labeled"));
            let test = data.subset(&test_idx, format!("resample {i} test"));
            let unlabeled = data
                .subset(&rest_idx, format!("resample {i} unlabeled"))
                .strip_labels();
            let test_labels: Vec<bool> =
                test.labels().iter().map(|l| *l == Label::Pos).collect();
            let auc_of = |scores: &[f64]| -> Result<f64> {
                Ok(roc_auc(scores, &test_labels)?.auc)
            };
            cfg.methods
                .iter()
                .map(|method| match method {
                    Method::SuRde => {
                        let model = build_semiperfect(&labeled, Polarity::Pos)?;
                        auc_of(&model.score_batch(&test))
                    }
                    Method::PerfRde => {
                        let model: &RdeModel = perfect.as_ref().expect("built above");
                        auc_of(&model.score_batch(&test))
                    }
                    Method::SeRde => {
                        let model = train_serde(&labeled, &unlabeled, &cfg.selection, cfg.ridge)?;
                        auc_of(&model.predict_batch(&test))
                    }
                    Method::NaiveBayes => {
                        let model = naive_bayes(&labeled)?;
                        auc_of(&model.score_batch(&test))
                    }
                })
                .collect()
        })
        .collect();
    let per_resample = per_resample?;

    let results = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(m, &method)| MethodResult {
            method,
            aucs: per_resample.iter().map(|row| row[m]).collect(),
        })
        .collect();
    Ok(ExperimentReport {
        results,
        resamples: cfg.resamples,
    })
}
