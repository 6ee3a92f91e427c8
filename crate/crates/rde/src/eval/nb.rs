//! Bernoulli Naive Bayes baseline with add-one smoothing, scoring the
//! features present in an example as a log-odds sum.

use std::io::Write;
use std::path::Path;

use crate::artifact;
use crate::corpus::{Dataset, Label, SparseExample};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct NaiveBayesModel {
    prior_log_odds: f64,
    feature_log_odds: Vec<f64>,
}

impl NaiveBayesModel {
    /// log P(y)/P(y-bar) + sum over present features of the smoothed
    /// log-likelihood ratio.
    pub fn score(&self, x: &SparseExample) -> f64 {
        let mut z = self.prior_log_odds;
        for &j in x.ids() {
            z += self.feature_log_odds[j as usize];
        }
        z
    }

    pub fn score_batch(&self, data: &Dataset) -> Vec<f64> {
        data.examples().iter().map(|x| self.score(x)).collect()
    }

    pub fn n_features(&self) -> usize {
        self.feature_log_odds.len()
    }

    pub fn save(&self, path: &Path, config: &[(&str, String)]) -> Result<()> {
        let mut w = artifact::writer(path, "nb-model", config)?;
        writeln!(w, "prior\t{}", artifact::fmt_f64(self.prior_log_odds))?;
        writeln!(w, "n_features\t{}", self.feature_log_odds.len())?;
        for (j, &lo) in self.feature_log_odds.iter().enumerate() {
            writeln!(w, "feature\t{j}\t{}", artifact::fmt_f64(lo))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<NaiveBayesModel> {
        let mut r = artifact::reader(path, "nb-model")?;
        let mut prior = None;
        let mut feature_log_odds: Option<Vec<f64>> = None;
        while let Some(line) = r.next_line()? {
            let parts: Vec<&str> = line.split('\t').collect();
            match parts.as_slice() {
                ["prior", v] => {
                    prior = Some(artifact::parse_f64(v).ok_or_else(|| r.bad("bad prior"))?)
                }
                ["n_features", v] => {
                    let n: usize = v.parse().map_err(|_| r.bad("bad n_features"))?;
                    feature_log_odds = Some(vec![0.0; n]);
                }
                ["feature", j, v] => {
                    let j: usize = j.parse().map_err(|_| r.bad("bad feature id"))?;
                    let v = artifact::parse_f64(v).ok_or_else(|| r.bad("bad log odds"))?;
                    *feature_log_odds
                        .as_mut()
                        .and_then(|f| f.get_mut(j))
                        .ok_or_else(|| r.bad("feature out of range"))? = v;
                }
                _ => return Err(r.bad("unknown record")),
            }
        }
        Ok(NaiveBayesModel {
            prior_log_odds: prior.ok_or_else(|| r.bad("missing prior"))?,
            feature_log_odds: feature_log_odds.ok_or_else(|| r.bad("missing n_features"))?,
        })
    }
}

/// Train on a fully labeled dataset: P(j|class) estimated with add-one
/// smoothing as (N(j,class) + 1) / (m_class + 2).
pub fn naive_bayes(train: &Dataset) -> Result<NaiveBayesModel> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(index) = train.labels().iter().position(|l| *l == Label::Unlabeled) {
        return Err(Error::UnlabeledExample { index });
    }
    let n = train.n_features();
    let mut n_j_pos = vec![0u64; n];
    let mut n_j_neg = vec![0u64; n];
    let mut m_pos = 0u64;
    for (x, label) in train.examples().iter().zip(train.labels()) {
        let pos = *label == Label::Pos;
        m_pos += u64::from(pos);
        let dst = if pos { &mut n_j_pos } else { &mut n_j_neg };
        for &j in x.ids() {
            dst[j as usize] += 1;
        }
    }
    let m_neg = train.len() as u64 - m_pos;
    if m_pos == 0 || m_neg == 0 {
        return Err(Error::SingleClass);
    }
    let feature_log_odds = (0..n)
        .map(|j| {
            let p_pos = (n_j_pos[j] + 1) as f64 / (m_pos + 2) as f64;
            let p_neg = (n_j_neg[j] + 1) as f64 / (m_neg + 2) as f64;
            (p_pos / p_neg).ln()
        })
        .collect();
    Ok(NaiveBayesModel {
        prior_log_odds: (m_pos as f64 / m_neg as f64).ln(),
        feature_log_odds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label::{Neg as N, Pos as P};
    use crate::stats::tests::dataset;

    #[test]
    fn two_doc_hand_computation() {
        // pos: {0}, neg: {1}. m_pos = m_neg = 1.
        let data = dataset(&[(&[0], P), (&[1], N)]);
        let model = naive_bayes(&data).unwrap();
        // P(0|y) = 2/3, P(0|yn) = 1/3; feature 0 log odds = ln 2
        let expect0 = (2.0f64 / 3.0 / (1.0 / 3.0)).ln();
        let expect1 = (1.0f64 / 3.0 / (2.0 / 3.0)).ln();
        assert!((model.feature_log_odds[0] - expect0).abs() < 1e-15);
        assert!((model.feature_log_odds[1] - expect1).abs() < 1e-15);
        assert_eq!(model.prior_log_odds, 0.0);
        let s = model.score(&SparseExample::new(vec![0]));
        assert!((s - expect0).abs() < 1e-15);
    }

    #[test]
    fn class_and_feature_swap_negates_scores() {
        let data = dataset(&[(&[0], P), (&[0, 1], P), (&[1], N), (&[], N), (&[0], P), (&[1], N)]);
        // mirror: swap labels and swap features 0 <-> 1
        let mirrored = dataset(&[(&[1], N), (&[0, 1], N), (&[0], P), (&[], P), (&[1], N), (&[0], P)]);
        let a = naive_bayes(&data).unwrap();
        let b = naive_bayes(&mirrored).unwrap();
        for (ids_a, ids_b) in [
            (&[][..], &[][..]),
            (&[0][..], &[1][..]),
            (&[0, 1][..], &[0, 1][..]),
        ] {
            let sa = a.score(&SparseExample::new(ids_a.to_vec()));
            let sb = b.score(&SparseExample::new(ids_b.to_vec()));
            assert!((sa + sb).abs() < 1e-12, "{sa} vs {sb}");
        }
    }

    #[test]
    fn pos_only_feature_contributes_positively() {
        let data = dataset(&[(&[0], P), (&[0], P), (&[1], N), (&[], N)]);
        let model = naive_bayes(&data).unwrap();
        assert!(model.feature_log_odds[0] > 0.0);
    }

    #[test]
    fn single_class_errors() {
        let data = dataset(&[(&[0], P), (&[1], P)]);
        assert!(matches!(naive_bayes(&data), Err(Error::SingleClass)));
    }

    #[test]
    fn file_round_trip() {
        let data = dataset(&[(&[0], P), (&[0, 1], P), (&[1], N), (&[], N)]);
        let model = naive_bayes(&data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nb.tsv");
        model.save(&path, &[]).unwrap();
        let loaded = NaiveBayesModel::load(&path).unwrap();
        for ids in [&[][..], &[0][..], &[0, 1][..]] {
            let e = SparseExample::new(ids.to_vec());
            assert_eq!(loaded.score(&e).to_bits(), model.score(&e).to_bits());
        }
    }
}
