//! Per-reference diagnostics: how single-RDE test AUC relates to the
//! distance from the semi-perfect model and to the unlabeled-statistics
//! bound that predicts it.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::artifact;
use crate::bounds::{bound_theorem3, distance};
use crate::corpus::{Dataset, Label, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::auc::roc_auc;
use crate::rde::{build_rde, RdeModel};
use crate::stats::{count_corpus, dependence, imbalance, ClassPrior, CountTable};

/// One candidate reference feature. Bound fields are `None` when I(r) is
/// undefined or zero, in which case only the AUC is meaningful.
///
/// The AUC is that of the sign-aligned score `f(x,r) sign(I(r))` — the
/// polarity a user would fix with labeled data, and the one the distance
/// normalization already applies. A reference anticorrelated with the
/// class therefore shows up as a good classifier, not as AUC below 0.5.
#[derive(Debug, Clone)]
pub struct DiagnosticsRow {
    pub reference: u32,
    pub i_r: Option<f64>,
    pub auc: f64,
    pub dist: Option<f64>,
    pub t3_first: Option<f64>,
    pub m: Option<f64>,
    pub sign_ok: Option<bool>,
}

pub const DIAG_CSV_HEADER: &str = "ref_token,i_r,auc,dist,t3_first_term,m,sign_ok";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl DiagnosticsRow {
    pub fn csv_row(&self, token: &str) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            artifact::csv_field(token),
            opt(self.i_r),
            self.auc,
            opt(self.dist),
            opt(self.t3_first),
            opt(self.m),
            self.sign_ok.map(|b| b.to_string()).unwrap_or_default()
        )
    }
}

/// Evaluate every candidate reference feature: single-RDE AUC on the
/// held-out set, distance to `perfect`, and the unlabeled-statistics bound
/// pieces. Rows are sorted by AUC descending. Candidates missing from the
/// unlabeled corpus are skipped.
pub fn diagnostics(
    candidates: &[u32],
    labeled: &Dataset,
    unlabeled_table: &CountTable,
    heldout: &Dataset,
    perfect: &RdeModel,
    prior: &ClassPrior,
) -> Result<Vec<DiagnosticsRow>> {
    let labeled_table = count_corpus(labeled, candidates)?;
    let imb = imbalance(&labeled_table)?;
    let heldout_labels: Vec<bool> = heldout.labels().iter().map(|l| *l == Label::Pos).collect();
    if heldout_labels.iter().all(|&l| l) || heldout_labels.iter().all(|&l| !l) {
        return Err(Error::SingleClass);
    }

    let rows: Result<Vec<Option<DiagnosticsRow>>> = candidates
        .par_iter()
        .map(|&r| {
            let mut model = match build_rde(unlabeled_table, r) {
                Ok(m) => m,
                Err(Error::EmptyReference { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let i_r = imb.get(r).filter(|&i| i != 0.0);
            let mut scores = model.score_batch(heldout);
            if i_r.is_some_and(|i| i < 0.0) {
                for s in &mut scores {
                    *s = -*s;
                }
            }
            let auc = roc_auc(&scores, &heldout_labels)?.auc;
            let (dist, t3_first, m, sign_ok) = match i_r {
                Some(i) => {
                    model.set_ref_imbalance(Some(i));
                    let d = distance(&model, perfect, heldout, prior)?;
                    let dep = dependence(&labeled_table, r)?;
                    let t3 = bound_theorem3(unlabeled_table, &imb, &dep, r)?;
                    (
                        Some(d),
                        Some(t3.first_term),
                        Some(t3.m),
                        Some(t3.condition_holds),
                    )
                }
                None => (None, None, None, None),
            };
            Ok(Some(DiagnosticsRow {
                reference: r,
                i_r,
                auc,
                dist,
                t3_first,
                m,
                sign_ok,
            }))
        })
        .collect();
    let mut rows: Vec<DiagnosticsRow> = rows?.into_iter().flatten().collect();
    rows.sort_by(|a, b| b.auc.total_cmp(&a.auc).then(a.reference.cmp(&b.reference)));
    Ok(rows)
}

pub fn write_diagnostics_csv(
    rows: &[DiagnosticsRow],
    vocab: Option<&Vocabulary>,
    path: &Path,
    config: &[(&str, String)],
) -> Result<()> {
    let mut w = artifact::writer(path, "diagnostics", config)?;
    writeln!(w, "{DIAG_CSV_HEADER}")?;
    for row in rows {
        let token = vocab
            .and_then(|v| v.token(row.reference))
            .map(|t| t.to_string())
            .unwrap_or_else(|| format!("f{}", row.reference));
        writeln!(w, "{}", row.csv_row(&token))?;
    }
    Ok(())
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rank = |vals: &[f64]| -> Vec<f64> {
        let mut order: Vec<usize> = (0..vals.len()).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let mut ranks = vec![0.0; vals.len()];
        let mut i = 0;
        while i < order.len() {
            let mut j = i;
            while j < order.len() && vals[order[j]] == vals[order[i]] {
                j += 1;
            }
            let avg = (i + j - 1) as f64 / 2.0 + 1.0;
            for &idx in &order[i..j] {
                ranks[idx] = avg;
            }
            i = j;
        }
        ranks
    };
    let rx = rank(xs);
    let ry = rank(ys);
    let n = xs.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mean) * (b - mean);
        var_x += (a - mean) * (a - mean);
        var_y += (b - mean) * (b - mean);
    }
    cov / (var_x * var_y).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::candidate_pool;
    use crate::eval::synth::{MixtureSpec, PopulationStats};
    use crate::rde::Polarity;

    #[test]
    fn spearman_perfect_and_reversed() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman(&xs, &[10.0, 20.0, 30.0, 40.0]), 1.0);
        assert_eq!(spearman(&xs, &[9.0, 7.0, 5.0, 3.0]), -1.0);
    }

    #[test]
    fn spearman_handles_ties() {
        let r = spearman(&[1.0, 1.0, 2.0, 2.0], &[1.0, 2.0, 3.0, 4.0]);
        assert!(r > 0.0 && r < 1.0);
    }

    #[test]
    fn diagnostics_rows_sorted_and_blanks_for_undefined() {
        // mixture corpus, candidates include a feature absent from the
        // labeled split so its I(r) is undefined
        let spec = MixtureSpec::random(12, 21);
        let data = spec.generate(800);
        let labeled_idx: Vec<usize> = (0..80).collect();
        let heldout_idx: Vec<usize> = (80..300).collect();
        let rest_idx: Vec<usize> = (300..800).collect();
        let labeled = data.subset(&labeled_idx, "labeled");
        let heldout = data.subset(&heldout_idx, "heldout");
        let unlabeled = data.subset(&rest_idx, "rest").strip_labels();

        let labeled_table = count_corpus(&labeled, &[]).unwrap();
        let candidates = candidate_pool(&labeled_table, 2);
        assert!(candidates.len() >= 4);
        let unlabeled_table = count_corpus(&unlabeled, &candidates).unwrap();

        let pop = PopulationStats::new(spec);
        let perfect = pop.semiperfect(Polarity::Pos);
        let prior = pop.prior();
        let rows = diagnostics(
            &candidates,
            &labeled,
            &unlabeled_table,
            &heldout,
            &perfect,
            &prior,
        )
        .unwrap();
        assert_eq!(rows.len(), candidates.len());
        for pair in rows.windows(2) {
            assert!(pair[0].auc >= pair[1].auc);
        }
        for row in &rows {
            match row.i_r {
                Some(_) => {
                    assert!(row.dist.is_some());
                    assert!(row.t3_first.is_some());
                    assert!(row.dist.unwrap() >= 0.0);
                }
                None => {
                    assert!(row.dist.is_none());
                    assert!(row.t3_first.is_none());
                    assert!(row.m.is_none());
                }
            }
        }
    }
}
