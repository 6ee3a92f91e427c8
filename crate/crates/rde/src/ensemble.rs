//! Ensembles of pruned RDEs combined by a ridge-regularized logistic
//! classifier.
//!
//! The pipeline: rank candidate reference features by the selection
//! criterion, keep the top k, build one RDE per kept reference from
//! unlabeled co-occurrence counts, prune original features whose
//! co-occurrence deviation exceeds t, then train a logistic combiner over
//! the k standardized member scores using the labeled examples.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::artifact;
use crate::bounds::ranking_score;
use crate::corpus::{Dataset, Label, SparseExample};
use crate::error::{Error, Result};
use crate::rde::{build_rde, RdeModel};
use crate::stats::{count_corpus, imbalance, CountTable, FeatureProbs, ImbalanceVector};

/// Parameters of the reference-selection and pruning steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    /// Number of reference features / ensemble members.
    pub k: usize,
    /// Pruning threshold on |P(j,r)/(P(j)P(r)) - 1|.
    pub t: f64,
    /// Candidates must occur more than this many times in the labeled set.
    pub candidate_min_count: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            k: 100,
            t: 20.0,
            candidate_min_count: 20,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.t > 0.0) {
            return Err(Error::InvalidConfig("t must be positive".into()));
        }
        Ok(())
    }
}

/// Rank candidates by the selection criterion (ascending; ties broken by
/// feature id) and keep the top k. Returns fewer than k when the pool is
/// smaller. Errors if no candidate has a defined I(r).
pub fn select_references(
    candidates: &[u32],
    unlabeled: &impl FeatureProbs,
    labeled: &ImbalanceVector,
    cfg: &SelectionConfig,
) -> Result<Vec<u32>> {
    cfg.validate()?;
    if candidates.is_empty() {
        return Err(Error::InvalidConfig(
            "no candidate reference features".into(),
        ));
    }
    if candidates.iter().all(|&r| labeled.get(r).is_none()) {
        return Err(Error::UndefinedImbalance(
            "every candidate has zero labeled count".into(),
        ));
    }
    let mut ranked: Vec<(f64, u32)> = candidates
        .iter()
        .map(|&r| (ranking_score(unlabeled, labeled.get(r), r), r))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(ranked.into_iter().take(cfg.k).map(|(_, r)| r).collect())
}

/// Prune original features with co-occurrence deviation above `t`. The
/// reference's own feature is always pruned, as is any feature absent from
/// the unlabeled corpus (its deviation is undefined and its weight 0).
pub fn prune(mut model: RdeModel, unlabeled: &impl FeatureProbs, t: f64) -> Result<RdeModel> {
    let r = model.reference().feature_id().ok_or_else(|| {
        Error::InvalidConfig("pruning applies to feature-reference models only".into())
    })?;
    let p_r = unlabeled.p_feature(r);
    if p_r <= 0.0 {
        return Err(Error::EmptyReference { feature: r });
    }
    for j in 0..model.n_features() as u32 {
        if j == r {
            model.set_pruned(j, true);
            continue;
        }
        let p_j = unlabeled.p_feature(j);
        if p_j == 0.0 {
            model.set_pruned(j, true);
            continue;
        }
        let deviation = (unlabeled.p_pair(j, r)? / (p_j * p_r) - 1.0).abs();
        if deviation > t {
            model.set_pruned(j, true);
        }
    }
    Ok(model)
}

/// One ensemble member: a pruned RDE plus the training-set moments used to
/// standardize its score.
#[derive(Debug, Clone)]
pub struct EnsembleMember {
    pub model: RdeModel,
    pub mean: f64,
    pub std: f64,
}

impl EnsembleMember {
    /// Standardized score; members with zero training variance emit 0.
    pub fn feature(&self, x: &SparseExample) -> f64 {
        if self.std > 0.0 {
            (self.model.score(x) - self.mean) / self.std
        } else {
            0.0
        }
    }
}

/// Standardized member-score vector for one example.
pub fn score_features(members: &[EnsembleMember], x: &SparseExample) -> Vec<f64> {
    members.iter().map(|m| m.feature(x)).collect()
}

/// L2-regularized logistic combiner: weights over member scores plus an
/// unpenalized intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRidge {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

/// Loss and gradient of the summed logistic loss with penalty
/// ridge/2 ||w||^2 (intercept unpenalized). `params` is weights followed
/// by the intercept; `rows` is one feature vector per example.
pub fn combiner_loss_grad(
    params: &[f64],
    rows: &[Vec<f64>],
    labels: &[bool],
    ridge: f64,
) -> (f64, Vec<f64>) {
    let k = params.len() - 1;
    let (w, b) = (&params[..k], params[k]);
    let mut loss = 0.0;
    let mut grad = vec![0.0; k + 1];
    for (row, &pos) in rows.iter().zip(labels) {
        let z: f64 = b + row.iter().zip(w).map(|(x, w)| x * w).sum::<f64>();
        let t = if pos { 1.0 } else { -1.0 };
        let u = -t * z;
        // softplus(u) = ln(1 + e^u), computed without overflow
        loss += if u > 0.0 {
            u + (-u).exp().ln_1p()
        } else {
            u.exp().ln_1p()
        };
        // d/dz ln(1 + e^{-tz}) = -t sigma(-tz)
        let s = 1.0 / (1.0 + (-u).exp());
        let g = -t * s;
        for (gi, xi) in grad[..k].iter_mut().zip(row) {
            *gi += g * xi;
        }
        grad[k] += g;
    }
    for (gi, wi) in grad[..k].iter_mut().zip(w) {
        *gi += ridge * wi;
        loss += 0.5 * ridge * wi * wi;
    }
    (loss, grad)
}

fn hessian(params: &[f64], rows: &[Vec<f64>], ridge: f64) -> Vec<Vec<f64>> {
    let k = params.len() - 1;
    let d = k + 1;
    let mut h = vec![vec![0.0; d]; d];
    for row in rows {
        let z: f64 = params[k]
            + row
                .iter()
                .zip(&params[..k])
                .map(|(x, w)| x * w)
                .sum::<f64>();
        let s = 1.0 / (1.0 + (-z).exp());
        let c = s * (1.0 - s);
        for a in 0..d {
            let xa = if a < k { row[a] } else { 1.0 };
            for b in a..d {
                let xb = if b < k { row[b] } else { 1.0 };
                h[a][b] += c * xa * xb;
            }
        }
    }
    for (a, row) in h.iter_mut().enumerate().take(k) {
        row[a] += ridge;
    }
    for a in 0..d {
        for b in 0..a {
            h[a][b] = h[b][a];
        }
    }
    h
}

/// Solve H x = rhs for symmetric positive definite H via Cholesky.
fn solve_spd(mut h: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let d = rhs.len();
    // in-place LL^T factorization
    for a in 0..d {
        for b in 0..=a {
            let mut sum = h[a][b];
            for c in 0..b {
                sum -= h[a][c] * h[b][c];
            }
            if a == b {
                if sum <= 0.0 {
                    return None;
                }
                h[a][a] = sum.sqrt();
            } else {
                h[a][b] = sum / h[b][b];
            }
        }
    }
    // forward then backward substitution
    for a in 0..d {
        for b in 0..a {
            let s = h[a][b] * rhs[b];
            rhs[a] -= s;
        }
        rhs[a] /= h[a][a];
    }
    for a in (0..d).rev() {
        for b in a + 1..d {
            let s = h[b][a] * rhs[b];
            rhs[a] -= s;
        }
        rhs[a] /= h[a][a];
    }
    Some(rhs)
}

/// Fit the combiner by damped Newton iteration to gradient infinity-norm
/// 1e-8. Deterministic: full batch, fixed iteration order.
pub fn train_combiner(rows: &[Vec<f64>], labels: &[bool], ridge: f64) -> Result<LogisticRidge> {
    if rows.len() < 2 || rows.len() != labels.len() {
        return Err(Error::InvalidConfig(
            "combiner needs at least two labeled rows".into(),
        ));
    }
    if ridge < 0.0 {
        return Err(Error::InvalidConfig("ridge must be nonnegative".into()));
    }
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(Error::SingleClass);
    }
    let k = rows[0].len();
    let mut params = vec![0.0; k + 1];
    let (mut loss, mut grad) = combiner_loss_grad(&params, rows, labels, ridge);
    for _ in 0..100 {
        if grad.iter().all(|g| g.abs() <= 1e-8) {
            break;
        }
        let h = hessian(&params, rows, ridge);
        let neg_grad: Vec<f64> = grad.iter().map(|g| -g).collect();
        let step = match solve_spd(h, neg_grad.clone()) {
            Some(s) => s,
            None => {
                // singular Hessian (ridge = 0 with degenerate features):
                // retry with a small diagonal jitter
                let mut h = hessian(&params, rows, ridge);
                for (a, row) in h.iter_mut().enumerate() {
                    row[a] += 1e-10;
                }
                solve_spd(h, neg_grad)
                    .ok_or_else(|| Error::InvalidConfig("combiner Hessian is singular".into()))?
            }
        };
        // backtracking line search on the loss
        let mut eta = 1.0;
        loop {
            let trial: Vec<f64> = params
                .iter()
                .zip(&step)
                .map(|(p, s)| p + eta * s)
                .collect();
            let (trial_loss, trial_grad) = combiner_loss_grad(&trial, rows, labels, ridge);
            if trial_loss <= loss || eta < 1e-12 {
                params = trial;
                loss = trial_loss;
                grad = trial_grad;
                break;
            }
            eta *= 0.5;
        }
    }
    let intercept = params[k];
    params.truncate(k);
    Ok(LogisticRidge {
        weights: params,
        intercept,
    })
}

/// A trained ensemble: members with their normalization moments, the
/// combiner, and fingerprints of the count statistics it was built from.
#[derive(Debug, Clone)]
pub struct EnsembleModel {
    pub members: Vec<EnsembleMember>,
    pub combiner: LogisticRidge,
    pub ridge: f64,
    pub config: SelectionConfig,
    pub labeled_fingerprint: String,
    pub unlabeled_fingerprint: String,
}

impl EnsembleModel {
    /// Pre-sigmoid decision score; monotone in the positive-class
    /// probability.
    pub fn predict(&self, x: &SparseExample) -> f64 {
        let mut z = self.combiner.intercept;
        for (member, w) in self.members.iter().zip(&self.combiner.weights) {
            z += w * member.feature(x);
        }
        z
    }

    pub fn predict_batch(&self, data: &Dataset) -> Vec<f64> {
        data.examples().iter().map(|x| self.predict(x)).collect()
    }

    pub fn save(&self, path: &Path, config: &[(&str, String)]) -> Result<()> {
        let mut w = artifact::writer(path, "ensemble-model", config)?;
        writeln!(w, "k\t{}", self.config.k)?;
        writeln!(w, "t\t{}", artifact::fmt_f64(self.config.t))?;
        writeln!(
            w,
            "candidate_min_count\t{}",
            self.config.candidate_min_count
        )?;
        writeln!(w, "ridge\t{}", artifact::fmt_f64(self.ridge))?;
        writeln!(w, "labeled_fingerprint\t{}", self.labeled_fingerprint)?;
        writeln!(w, "unlabeled_fingerprint\t{}", self.unlabeled_fingerprint)?;
        writeln!(
            w,
            "intercept\t{}",
            artifact::fmt_f64(self.combiner.intercept)
        )?;
        writeln!(w, "members\t{}", self.members.len())?;
        for (i, member) in self.members.iter().enumerate() {
            writeln!(
                w,
                "member\t{i}\t{}\t{}\t{}",
                artifact::fmt_f64(self.combiner.weights[i]),
                artifact::fmt_f64(member.mean),
                artifact::fmt_f64(member.std),
            )?;
            member.model.write_body(&mut w)?;
            writeln!(w, "end_member\t{i}")?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<EnsembleModel> {
        let mut r = artifact::reader(path, "ensemble-model")?;
        let mut k = None;
        let mut t = None;
        let mut min_count = None;
        let mut ridge = None;
        let mut labeled_fp = String::new();
        let mut unlabeled_fp = String::new();
        let mut intercept = None;
        let mut weights = Vec::new();
        let mut members = Vec::new();
        while let Some(line) = r.next_line()? {
            let mut parts = line.split('\t');
            let tag = parts.next().unwrap_or_default();
            let rest: Vec<&str> = parts.collect();
            match (tag, rest.as_slice()) {
                ("k", [v]) => k = v.parse().ok(),
                ("t", [v]) => t = artifact::parse_f64(v),
                ("candidate_min_count", [v]) => min_count = v.parse().ok(),
                ("ridge", [v]) => ridge = artifact::parse_f64(v),
                ("labeled_fingerprint", [v]) => labeled_fp = v.to_string(),
                ("unlabeled_fingerprint", [v]) => unlabeled_fp = v.to_string(),
                ("intercept", [v]) => intercept = artifact::parse_f64(v),
                ("members", [_]) => {}
                ("member", [_, w, mean, std]) => {
                    let w = artifact::parse_f64(w).ok_or_else(|| r.bad("bad member weight"))?;
                    let mean =
                        artifact::parse_f64(mean).ok_or_else(|| r.bad("bad member mean"))?;
                    let std = artifact::parse_f64(std).ok_or_else(|| r.bad("bad member std"))?;
                    let mut body = Vec::new();
                    loop {
                        match r.next_line()? {
                            Some(l) if l.starts_with("end_member\t") => break,
                            Some(l) => body.push(l),
                            None => return Err(r.bad("unterminated member")),
                        }
                    }
                    let model =
                        RdeModel::parse_body(body.iter().map(|s| s.as_str()), |m| r.bad(m))?;
                    weights.push(w);
                    members.push(EnsembleMember { model, mean, std });
                }
                (other, _) => return Err(r.bad(format!("unknown record {other:?}"))),
            }
        }
        Ok(EnsembleModel {
            members,
            combiner: LogisticRidge {
                weights,
                intercept: intercept.ok_or_else(|| r.bad("missing intercept"))?,
            },
            ridge: ridge.ok_or_else(|| r.bad("missing ridge"))?,
            config: SelectionConfig {
                k: k.ok_or_else(|| r.bad("missing k"))?,
                t: t.ok_or_else(|| r.bad("missing t"))?,
                candidate_min_count: min_count.ok_or_else(|| r.bad("missing min count"))?,
            },
            labeled_fingerprint: labeled_fp,
            unlabeled_fingerprint: unlabeled_fp,
        })
    }
}

/// Candidate pool: features occurring more than `min_count` times in the
/// labeled set, ascending by id.
pub fn candidate_pool(labeled_table: &CountTable, min_count: u64) -> Vec<u32> {
    (0..labeled_table.n_features() as u32)
        .filter(|&j| labeled_table.marginal_count(j) > min_count)
        .collect()
}

fn table_fingerprint(table: &CountTable) -> String {
    let mut bytes = Vec::new();
    table.write_body(&mut bytes).expect("in-memory write");
    artifact::sha256_hex(&bytes)
}

/// The full training pipeline over a labeled and an unlabeled corpus.
pub fn train_serde(
    labeled: &Dataset,
    unlabeled: &Dataset,
    cfg: &SelectionConfig,
    ridge: f64,
) -> Result<EnsembleModel> {
    cfg.validate()?;
    if let Some(index) = labeled.labels().iter().position(|l| *l == Label::Unlabeled) {
        return Err(Error::UnlabeledExample { index });
    }
    let labeled_table = count_corpus(labeled, &[])?;
    let imb = imbalance(&labeled_table)?;
    let candidates = candidate_pool(&labeled_table, cfg.candidate_min_count);
    if candidates.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no feature occurs more than {} times in the labeled set",
            cfg.candidate_min_count
        )));
    }
    let unlabeled_table = count_corpus(&unlabeled.strip_labels(), &candidates)?;
    let selected = select_references(&candidates, &unlabeled_table, &imb, cfg)?;
    if selected.len() < cfg.k {
        eprintln!(
            "warning: only {} candidate reference features for k = {}",
            selected.len(),
            cfg.k
        );
    }

    let members: Result<Vec<EnsembleMember>> = selected
        .par_iter()
        .map(|&r| {
            let model = prune(build_rde(&unlabeled_table, r)?, &unlabeled_table, cfg.t)?;
            let scores: Vec<f64> = labeled.examples().iter().map(|x| model.score(x)).collect();
            let m = scores.len() as f64;
            let mean = scores.iter().sum::<f64>() / m;
            let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / m;
            Ok(EnsembleMember {
                model,
                mean,
                std: var.sqrt(),
            })
        })
        .collect();
    let members = members?;

    let rows: Vec<Vec<f64>> = labeled
        .examples()
        .iter()
        .map(|x| score_features(&members, x))
        .collect();
    let labels: Vec<bool> = labeled.labels().iter().map(|l| *l == Label::Pos).collect();
    let combiner = train_combiner(&rows, &labels, ridge)?;

    Ok(EnsembleModel {
        members,
        combiner,
        ridge,
        config: *cfg,
        labeled_fingerprint: table_fingerprint(&labeled_table),
        unlabeled_fingerprint: table_fingerprint(&unlabeled_table),
    })
}
