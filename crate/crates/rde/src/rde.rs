//! Reference distance estimators: linear classifiers whose weight for
//! feature j is P(r|j) - P(r) for some Boolean reference feature r.
//!
//! With the gold label standing in for r the same construction gives the
//! semi-perfect classifier, so supervised and semi-supervised variants share
//! one model type and one scoring path.

use std::io::Write;
use std::path::Path;

use crate::artifact;
use crate::corpus::{Dataset, Label, SparseExample};
use crate::error::{Error, Result};
use crate::stats::FeatureProbs;

/// What the weights were estimated against: an observed feature, or the
/// gold label in one of its two polarities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    Feature(u32),
    GoldPos,
    GoldNeg,
}

impl Reference {
    pub fn feature_id(&self) -> Option<u32> {
        match self {
            Reference::Feature(id) => Some(*id),
            _ => None,
        }
    }
}

/// Which polarity of the gold label acts as the reference feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Pos,
    Neg,
}

/// One linear model: per-feature weights plus a pruning mask.
#[derive(Debug, Clone)]
pub struct RdeModel {
    reference: Reference,
    weights: Vec<f64>,
    pruned: Vec<bool>,
    ref_prob: f64,
    ref_imbalance: Option<f64>,
}

impl RdeModel {
    pub(crate) fn from_parts(
        reference: Reference,
        weights: Vec<f64>,
        ref_prob: f64,
        ref_imbalance: Option<f64>,
    ) -> RdeModel {
        let pruned = vec![false; weights.len()];
        RdeModel {
            reference,
            weights,
            pruned,
            ref_prob,
            ref_imbalance,
        }
    }

    pub fn reference(&self) -> Reference {
        self.reference
    }

    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, j: u32) -> f64 {
        self.weights[j as usize]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// P(r): marginal probability of the reference.
    pub fn ref_prob(&self) -> f64 {
        self.ref_prob
    }

    /// I(r), when labeled data was available to estimate it.
    pub fn ref_imbalance(&self) -> Option<f64> {
        self.ref_imbalance
    }

    pub fn set_ref_imbalance(&mut self, i_r: Option<f64>) {
        self.ref_imbalance = i_r;
    }

    pub fn is_pruned(&self, j: u32) -> bool {
        self.pruned[j as usize]
    }

    pub fn set_pruned(&mut self, j: u32, pruned: bool) {
        self.pruned[j as usize] = pruned;
    }

    pub fn pruned_ids(&self) -> Vec<u32> {
        (0..self.pruned.len() as u32)
            .filter(|&j| self.pruned[j as usize])
            .collect()
    }

    /// Sum the weights of the example's features in ascending id order,
    /// skipping pruned features. Fixed order keeps scores bit-reproducible.
    pub fn score(&self, x: &SparseExample) -> f64 {
        let mut sum = 0.0;
        for &j in x.ids() {
            if !self.pruned[j as usize] {
                sum += self.weights[j as usize];
            }
        }
        sum
    }

    pub fn score_batch(&self, data: &Dataset) -> Vec<f64> {
        data.examples().iter().map(|x| self.score(x)).collect()
    }

    pub fn save(&self, path: &Path, config: &[(&str, String)]) -> Result<()> {
        let mut w = artifact::writer(path, "rde-model", config)?;
        self.write_body(&mut w)?;
        Ok(())
    }

    pub fn write_body(&self, w: &mut impl Write) -> Result<()> {
        let ref_str = match self.reference {
            Reference::Feature(id) => format!("feature:{id}"),
            Reference::GoldPos => "gold_pos".into(),
            Reference::GoldNeg => "gold_neg".into(),
        };
        writeln!(w, "reference\t{ref_str}")?;
        writeln!(w, "ref_prob\t{}", artifact::fmt_f64(self.ref_prob))?;
        match self.ref_imbalance {
            Some(i) => writeln!(w, "ref_imbalance\t{}", artifact::fmt_f64(i))?,
            None => writeln!(w, "ref_imbalance\tnone")?,
        }
        writeln!(w, "n_features\t{}", self.weights.len())?;
        for (j, &wj) in self.weights.iter().enumerate() {
            if wj != 0.0 {
                writeln!(w, "weight\t{j}\t{}", artifact::fmt_f64(wj))?;
            }
        }
        for j in self.pruned_ids() {
            writeln!(w, "pruned\t{j}")?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RdeModel> {
        let mut r = artifact::reader(path, "rde-model")?;
        let mut lines = Vec::new();
        while let Some(line) = r.next_line()? {
            lines.push(line);
        }
        Self::parse_body(lines.iter().map(|s| s.as_str()), |msg| r.bad(msg))
    }

    pub(crate) fn parse_body<'a>(
        lines: impl Iterator<Item = &'a str>,
        bad: impl Fn(String) -> Error,
    ) -> Result<RdeModel> {
        let mut reference = None;
        let mut ref_prob = None;
        let mut ref_imbalance = None;
        let mut weights: Option<Vec<f64>> = None;
        let mut pruned: Option<Vec<bool>> = None;
        for line in lines {
            let mut parts = line.split('\t');
            let tag = parts.next().unwrap_or_default();
            let rest: Vec<&str> = parts.collect();
            match (tag, rest.as_slice()) {
                ("reference", [v]) => {
                    reference = Some(match *v {
                        "gold_pos" => Reference::GoldPos,
                        "gold_neg" => Reference::GoldNeg,
                        other => {
                            let id = other
                                .strip_prefix("feature:")
                                .and_then(|s| s.parse().ok())
                                .ok_or_else(|| bad(format!("bad reference {other:?}")))?;
                            Reference::Feature(id)
                        }
                    });
                }
                ("ref_prob", [v]) => {
                    ref_prob =
                        Some(artifact::parse_f64(v).ok_or_else(|| bad("bad ref_prob".into()))?);
                }
                ("ref_imbalance", ["none"]) => ref_imbalance = None,
                ("ref_imbalance", [v]) => {
                    ref_imbalance = Some(
                        artifact::parse_f64(v).ok_or_else(|| bad("bad ref_imbalance".into()))?,
                    );
                }
                ("n_features", [v]) => {
                    let n: usize = v.parse().map_err(|_| bad("bad n_features".into()))?;
                    weights = Some(vec![0.0; n]);
                    pruned = Some(vec![false; n]);
                }
                ("weight", [j, v]) => {
                    let j: usize = j.parse().map_err(|_| bad("bad weight id".into()))?;
                    let v = artifact::parse_f64(v).ok_or_else(|| bad("bad weight".into()))?;
                    *weights
                        .as_mut()
                        .and_then(|w| w.get_mut(j))
                        .ok_or_else(|| bad("weight before n_features or out of range".into()))? =
                        v;
                }
                ("pruned", [j]) => {
                    let j: usize = j.parse().map_err(|_| bad("bad pruned id".into()))?;
                    *pruned
                        .as_mut()
                        .and_then(|p| p.get_mut(j))
                        .ok_or_else(|| bad("pruned before n_features or out of range".into()))? =
                        true;
                }
                (other, _) => return Err(bad(format!("unknown record {other:?}"))),
            }
        }
        Ok(RdeModel {
            reference: reference.ok_or_else(|| bad("missing reference".into()))?,
            ref_prob: ref_prob.ok_or_else(|| bad("missing ref_prob".into()))?,
            ref_imbalance,
            weights: weights.ok_or_else(|| bad("missing n_features".into()))?,
            pruned: pruned.unwrap(),
        })
    }
}

/// Build an RDE for reference feature `r`: weight P(r|j) - P(r) for every
/// feature with nonzero probability, 0 otherwise.
pub fn build_rde(probs: &impl FeatureProbs, r: u32) -> Result<RdeModel> {
    let p_r = probs.p_feature(r);
    if p_r <= 0.0 {
        return Err(Error::EmptyReference { feature: r });
    }
    let n = probs.n_features();
    let mut weights = Vec::with_capacity(n);
    for j in 0..n as u32 {
        let p_j = probs.p_feature(j);
        if p_j > 0.0 {
            weights.push(probs.p_pair(j, r)? / p_j - p_r);
        } else {
            weights.push(0.0);
        }
    }
    Ok(RdeModel {
        reference: Reference::Feature(r),
        pruned: vec![false; n],
        weights,
        ref_prob: p_r,
        ref_imbalance: None,
    })
}

/// Build the semi-perfect RDE from a fully labeled dataset, treating the
/// class indicator as the reference feature: weights P(y|j) - P(y) for
/// positive polarity.
///
/// The negative polarity is the exact IEEE negation of the positive one, so
/// the antisymmetry f(x, y-bar) = -f(x, y) holds bitwise.
pub fn build_semiperfect(data: &Dataset, polarity: Polarity) -> Result<RdeModel> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(index) = data.labels().iter().position(|l| *l == Label::Unlabeled) {
        return Err(Error::UnlabeledExample { index });
    }
    let n = data.n_features();
    let mut n_j = vec![0u64; n];
    let mut n_j_pos = vec![0u64; n];
    let mut m_pos = 0u64;
    for (x, label) in data.examples().iter().zip(data.labels()) {
        let is_pos = *label == Label::Pos;
        m_pos += u64::from(is_pos);
        for &j in x.ids() {
            n_j[j as usize] += 1;
            n_j_pos[j as usize] += u64::from(is_pos);
        }
    }
    let m = data.len() as u64;
    let m_neg = m - m_pos;
    if m_pos == 0 || m_neg == 0 {
        return Err(Error::SingleClass);
    }
    let p_y = m_pos as f64 / m as f64;
    let alpha = m_pos as f64 / m_neg as f64;
    let pos_weights: Vec<f64> = (0..n)
        .map(|j| {
            if n_j[j] > 0 {
                n_j_pos[j] as f64 / n_j[j] as f64 - p_y
            } else {
                0.0
            }
        })
        .collect();
    let model = match polarity {
        Polarity::Pos => RdeModel {
            reference: Reference::GoldPos,
            weights: pos_weights,
            pruned: vec![false; n],
            ref_prob: p_y,
            ref_imbalance: Some(1.0),
        },
        Polarity::Neg => RdeModel {
            reference: Reference::GoldNeg,
            weights: pos_weights.iter().map(|w| -w).collect(),
            pruned: vec![false; n],
            ref_prob: 1.0 - p_y,
            ref_imbalance: Some(-alpha),
        },
    };
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SparseExample;
    use crate::stats::count_corpus;
    use crate::stats::tests::dataset;
    use crate::corpus::Label::{Neg as N, Pos as P, Unlabeled as U};

    fn x(ids: &[u32]) -> SparseExample {
        SparseExample::new(ids.to_vec())
    }

    #[test]
    fn build_rde_hand_counts() {
        // docs {j,r},{j},{r},{}: P(r|j) = 1/2, P(r) = 1/2 -> w_j = 0.
        let data = dataset(&[(&[0, 1], U), (&[0], U), (&[1], U), (&[], U)]);
        let t = count_corpus(&data, &[1]).unwrap();
        let model = build_rde(&t, 1).unwrap();
        assert_eq!(model.weight(0), 0.0);
        // docs {j,r},{j,r},{j},{}: P(r|j) = 2/3, P(r) = 1/2 -> w_j = 1/6.
        let data = dataset(&[(&[0, 1], U), (&[0, 1], U), (&[0], U), (&[], U)]);
        let t = count_corpus(&data, &[1]).unwrap();
        let model = build_rde(&t, 1).unwrap();
        assert!((model.weight(0) - 1.0 / 6.0).abs() < 1e-15);
        // j = r: P(r|r) = 1 -> w_r = 1 - P(r).
        assert!((model.weight(1) - (1.0 - 0.5)).abs() < 1e-15);
        assert_eq!(model.ref_prob(), 0.5);
        assert_eq!(model.ref_imbalance(), None);
    }

    #[test]
    fn build_rde_zero_count_reference_errors() {
        let data = dataset(&[(&[0], U), (&[2], U)]);
        let t = count_corpus(&data, &[1]).unwrap();
        assert!(matches!(
            build_rde(&t, 1),
            Err(Error::EmptyReference { feature: 1 })
        ));
    }

    #[test]
    fn build_rde_zero_count_feature_gets_zero_weight() {
        let data = dataset(&[(&[0, 3], U), (&[3], U)]);
        let t = count_corpus(&data, &[3]).unwrap();
        let model = build_rde(&t, 3).unwrap();
        assert_eq!(model.weight(1), 0.0);
        assert_eq!(model.weight(2), 0.0);
    }

    #[test]
    fn semiperfect_polarities_negate_bitwise() {
        let data = dataset(&[(&[0, 1], P), (&[1], P), (&[0], N), (&[2], N), (&[], P)]);
        let pos = build_semiperfect(&data, Polarity::Pos).unwrap();
        let neg = build_semiperfect(&data, Polarity::Neg).unwrap();
        for j in 0..data.n_features() as u32 {
            assert_eq!((-pos.weight(j)).to_bits(), neg.weight(j).to_bits());
        }
        for ids in [&[][..], &[0][..], &[0, 1][..], &[1, 2][..]] {
            let e = x(ids);
            // exact (tolerance-free) antisymmetry; the empty sum is +-0.0
            assert_eq!(-pos.score(&e), neg.score(&e));
        }
        assert_eq!(pos.ref_imbalance(), Some(1.0));
        let alpha = 3.0 / 2.0;
        assert_eq!(neg.ref_imbalance(), Some(-alpha));
    }

    #[test]
    fn semiperfect_feature_only_in_positives() {
        let data = dataset(&[(&[0], P), (&[1], P), (&[1], N), (&[], N)]);
        let model = build_semiperfect(&data, Polarity::Pos).unwrap();
        // P(y|0) = 1 -> w = 1 - P(y) = 0.5
        assert_eq!(model.weight(0), 0.5);
    }

    #[test]
    fn semiperfect_balanced_feature_weight_zero() {
        let data = dataset(&[(&[0], P), (&[], P), (&[0], N), (&[], N)]);
        let model = build_semiperfect(&data, Polarity::Pos).unwrap();
        assert_eq!(model.weight(0), 0.0);
    }

    #[test]
    fn semiperfect_rejects_unlabeled() {
        let data = dataset(&[(&[0], P), (&[1], U)]);
        assert!(matches!(
            build_semiperfect(&data, Polarity::Pos),
            Err(Error::UnlabeledExample { index: 1 })
        ));
    }

    #[test]
    fn score_empty_example_is_zero() {
        let data = dataset(&[(&[0, 1], U), (&[0, 1], U), (&[0], U), (&[], U)]);
        let t = count_corpus(&data, &[1]).unwrap();
        let model = build_rde(&t, 1).unwrap();
        assert_eq!(model.score(&x(&[])), 0.0);
        assert!((model.score(&x(&[0])) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn score_skips_pruned_features() {
        let data = dataset(&[(&[0, 1], U), (&[0, 1], U), (&[0], U), (&[], U)]);
        let t = count_corpus(&data, &[1]).unwrap();
        let mut model = build_rde(&t, 1).unwrap();
        model.set_pruned(0, true);
        assert_eq!(model.score(&x(&[0])), 0.0);
    }

    #[test]
    fn model_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let data = dataset(&[(&[0, 1, 2], U), (&[0, 1], U), (&[1], U), (&[], U)]);
        let t = count_corpus(&data, &[1]).unwrap();
        let mut model = build_rde(&t, 1).unwrap();
        model.set_pruned(1, true);
        model.set_ref_imbalance(Some(0.25));
        let path = dir.path().join("model.tsv");
        model.save(&path, &[("ref", "1".into())]).unwrap();
        let loaded = RdeModel::load(&path).unwrap();
        assert_eq!(loaded.reference(), model.reference());
        assert_eq!(loaded.ref_prob().to_bits(), model.ref_prob().to_bits());
        assert_eq!(loaded.ref_imbalance(), model.ref_imbalance());
        for j in 0..model.n_features() as u32 {
            assert_eq!(loaded.weight(j).to_bits(), model.weight(j).to_bits());
            assert_eq!(loaded.is_pruned(j), model.is_pruned(j));
        }
    }
}
