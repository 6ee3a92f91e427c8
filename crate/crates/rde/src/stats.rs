//! Frequency counting and the probability estimates derived from it.
//!
//! All probabilities are raw count ratios; nothing is smoothed. Features
//! whose counts make a quantity undefined are flagged rather than patched,
//! and are excluded from any sum they would otherwise enter.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::artifact;
use crate::corpus::{Dataset, Label};
use crate::error::{Error, Result};

/// Class-prior odds alpha = P(y)/P(y-bar) together with P(y).
#[derive(Debug, Clone, Copy)]
pub struct ClassPrior {
    alpha: f64,
    p_pos: f64,
}

impl ClassPrior {
    pub fn from_counts(m_pos: u64, m_neg: u64) -> Result<ClassPrior> {
        if m_pos == 0 || m_neg == 0 {
            return Err(Error::SingleClass);
        }
        Ok(ClassPrior {
            alpha: m_pos as f64 / m_neg as f64,
            p_pos: m_pos as f64 / (m_pos + m_neg) as f64,
        })
    }

    pub fn from_p_pos(p_pos: f64) -> ClassPrior {
        assert!(p_pos > 0.0 && p_pos < 1.0);
        ClassPrior {
            alpha: p_pos / (1.0 - p_pos),
            p_pos,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn p_pos(&self) -> f64 {
        self.p_pos
    }
}

/// Per-class occurrence and co-occurrence counts; present only when the
/// counted dataset was fully labeled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCounts {
    pub m_pos: u64,
    pub m_neg: u64,
    pub marginal_pos: Vec<u64>,
    pub marginal_neg: Vec<u64>,
    pub pair_pos: Vec<Vec<u64>>,
    pub pair_neg: Vec<Vec<u64>>,
}

/// Occurrence and co-occurrence counts over one corpus.
///
/// Pair counts are kept only for the tracked reference features, one dense
/// row per reference. `pair[k][j]` counts examples containing both
/// `refs[k]` and feature `j`; the diagonal entry equals the marginal count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    n_examples: u64,
    n_features: usize,
    marginal: Vec<u64>,
    refs: Vec<u32>,
    ref_rows: HashMap<u32, usize>,
    pair: Vec<Vec<u64>>,
    class: Option<ClassCounts>,
}

/// A probability query against a [`CountTable`].
#[derive(Debug, Clone, Copy)]
pub enum ProbQuery {
    /// P(A)
    Marginal(u32),
    /// P(A,B)
    Joint(u32, u32),
    /// P(A|B)
    Conditional(u32, u32),
}

/// Source of P(j) and P(j,r) estimates. Implemented by [`CountTable`]
/// (frequency ratios) and by the synthetic population statistics (closed
/// form), so the same model and bound code runs on either.
pub trait FeatureProbs {
    fn n_features(&self) -> usize;
    /// P(j); zero for features that never occur.
    fn p_feature(&self, j: u32) -> f64;
    /// P(a,b); at least one of the two must be a tracked reference.
    fn p_pair(&self, a: u32, b: u32) -> Result<f64>;
}

impl CountTable {
    fn empty(n_features: usize, refs: &[u32], labeled: bool) -> CountTable {
        let ref_rows: HashMap<u32, usize> =
            refs.iter().enumerate().map(|(k, &r)| (r, k)).collect();
        let zeros = || vec![vec![0u64; n_features]; refs.len()];
        CountTable {
            n_examples: 0,
            n_features,
            marginal: vec![0; n_features],
            refs: refs.to_vec(),
            ref_rows,
            pair: zeros(),
            class: labeled.then(|| ClassCounts {
                m_pos: 0,
                m_neg: 0,
                marginal_pos: vec![0; n_features],
                marginal_neg: vec![0; n_features],
                pair_pos: zeros(),
                pair_neg: zeros(),
            }),
        }
    }

    fn count_into(&mut self, data: &Dataset, range: std::ops::Range<usize>) {
        for i in range {
            let x = &data.examples()[i];
            let label = data.labels()[i];
            self.n_examples += 1;
            for &j in x.ids() {
                self.marginal[j as usize] += 1;
            }
            // reference rows present in this example
            for (k, &r) in self.refs.iter().enumerate() {
                if x.contains(r) {
                    let row = &mut self.pair[k];
                    for &j in x.ids() {
                        row[j as usize] += 1;
                    }
                }
            }
            if let Some(class) = &mut self.class {
                let (m, marg, pair) = match label {
                    Label::Pos => (
                        &mut class.m_pos,
                        &mut class.marginal_pos,
                        &mut class.pair_pos,
                    ),
                    Label::Neg => (
                        &mut class.m_neg,
                        &mut class.marginal_neg,
                        &mut class.pair_neg,
                    ),
                    Label::Unlabeled => unreachable!("class counts imply fully labeled data"),
                };
                *m += 1;
                for &j in x.ids() {
                    marg[j as usize] += 1;
                }
                for (k, &r) in self.refs.iter().enumerate() {
                    if x.contains(r) {
                        let row = &mut pair[k];
                        for &j in x.ids() {
                            row[j as usize] += 1;
                        }
                    }
                }
            }
        }
    }

    /// Merge shard counts; pure integer addition, so any shard partition
    /// reproduces the single-threaded table exactly.
    pub fn merge(mut self, other: CountTable) -> CountTable {
        assert_eq!(self.n_features, other.n_features);
        assert_eq!(self.refs, other.refs);
        self.n_examples += other.n_examples;
        for (a, b) in self.marginal.iter_mut().zip(&other.marginal) {
            *a += b;
        }
        for (row_a, row_b) in self.pair.iter_mut().zip(&other.pair) {
            for (a, b) in row_a.iter_mut().zip(row_b) {
                *a += b;
            }
        }
        match (&mut self.class, &other.class) {
            (Some(a), Some(b)) => {
                a.m_pos += b.m_pos;
                a.m_neg += b.m_neg;
                for (x, y) in a.marginal_pos.iter_mut().zip(&b.marginal_pos) {
                    *x += y;
                }
                for (x, y) in a.marginal_neg.iter_mut().zip(&b.marginal_neg) {
                    *x += y;
                }
                for (row_a, row_b) in a.pair_pos.iter_mut().zip(&b.pair_pos) {
                    for (x, y) in row_a.iter_mut().zip(row_b) {
                        *x += y;
                    }
                }
                for (row_a, row_b) in a.pair_neg.iter_mut().zip(&b.pair_neg) {
                    for (x, y) in row_a.iter_mut().zip(row_b) {
                        *x += y;
                    }
                }
            }
            (None, None) => {}
            _ => unreachable!("shards disagree on labeledness"),
        }
        self
    }

    pub fn n_examples(&self) -> u64 {
        self.n_examples
    }

    pub fn marginal_count(&self, j: u32) -> u64 {
        self.marginal[j as usize]
    }

    pub fn pair_count(&self, a: u32, b: u32) -> Result<u64> {
        if a == b {
            return Ok(self.marginal[a as usize]);
        }
        if let Some(&k) = self.ref_rows.get(&b) {
            Ok(self.pair[k][a as usize])
        } else if let Some(&k) = self.ref_rows.get(&a) {
            Ok(self.pair[k][b as usize])
        } else {
            Err(Error::MissingPairCounts { feature: a })
        }
    }

    pub fn refs(&self) -> &[u32] {
        &self.refs
    }

    pub fn is_labeled(&self) -> bool {
        self.class.is_some()
    }

    pub fn class_counts(&self) -> Option<&ClassCounts> {
        self.class.as_ref()
    }

    pub fn prior(&self) -> Result<ClassPrior> {
        let class = self.class.as_ref().ok_or(Error::SingleClass)?;
        ClassPrior::from_counts(class.m_pos, class.m_neg)
    }

    pub fn save(&self, path: &Path, config: &[(&str, String)]) -> Result<()> {
        let mut w = artifact::writer(path, "counts", config)?;
        self.write_body(&mut w)?;
        Ok(())
    }

    pub fn write_body(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "n_examples\t{}", self.n_examples)?;
        writeln!(w, "n_features\t{}", self.n_features)?;
        let refs: Vec<String> = self.refs.iter().map(|r| r.to_string()).collect();
        writeln!(w, "refs\t{}", refs.join(","))?;
        writeln!(w, "labeled\t{}", u8::from(self.class.is_some()))?;
        if let Some(class) = &self.class {
            writeln!(w, "m_pos\t{}", class.m_pos)?;
            writeln!(w, "m_neg\t{}", class.m_neg)?;
        }
        let write_counts = |w: &mut dyn Write, tag: &str, counts: &[u64]| -> Result<()> {
            for (j, &c) in counts.iter().enumerate() {
                if c > 0 {
                    writeln!(w, "{tag}\t{j}\t{c}")?;
                }
            }
            Ok(())
        };
        let write_pairs = |w: &mut dyn Write, tag: &str, rows: &[Vec<u64>]| -> Result<()> {
            for (k, row) in rows.iter().enumerate() {
                for (j, &c) in row.iter().enumerate() {
                    if c > 0 {
                        writeln!(w, "{tag}\t{}\t{j}\t{c}", self.refs[k])?;
                    }
                }
            }
            Ok(())
        };
        write_counts(w, "marginal", &self.marginal)?;
        write_pairs(w, "pair", &self.pair)?;
        if let Some(class) = &self.class {
            write_counts(w, "marginal_pos", &class.marginal_pos)?;
            write_counts(w, "marginal_neg", &class.marginal_neg)?;
            write_pairs(w, "pair_pos", &class.pair_pos)?;
            write_pairs(w, "pair_neg", &class.pair_neg)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<CountTable> {
        let mut r = artifact::reader(path, "counts")?;
        let mut n_examples = None;
        let mut n_features = None;
        let mut refs: Vec<u32> = Vec::new();
        let mut labeled = false;
        let mut m_pos = 0u64;
        let mut m_neg = 0u64;
        let mut header_done = false;
        let mut table: Option<CountTable> = None;

        while let Some(line) = r.next_line()? {
            let mut parts = line.split('\t');
            let tag = parts.next().unwrap_or_default();
            if !header_done {
                match tag {
                    "n_examples" => {
                        n_examples = parts.next().and_then(|v| v.parse().ok());
                        continue;
                    }
                    "n_features" => {
                        n_features = parts.next().and_then(|v| v.parse().ok());
                        continue;
                    }
                    "refs" => {
                        let list = parts.next().unwrap_or_default();
                        if !list.is_empty() {
                            for tok in list.split(',') {
                                refs.push(tok.parse().map_err(|_| r.bad("bad ref id"))?);
                            }
                        }
                        continue;
                    }
                    "labeled" => {
                        labeled = parts.next() == Some("1");
                        continue;
                    }
                    "m_pos" => {
                        m_pos = parts
                            .next()
                            .and_then(|v| v.parse().ok())
                            .ok_or_else(|| r.bad("bad m_pos"))?;
                        continue;
                    }
                    "m_neg" => {
                        m_neg = parts
                            .next()
                            .and_then(|v| v.parse().ok())
                            .ok_or_else(|| r.bad("bad m_neg"))?;
                        continue;
                    }
                    _ => {
                        let n = n_features.ok_or_else(|| r.bad("missing n_features"))?;
                        let mut t = CountTable::empty(n, &refs, labeled);
                        t.n_examples =
                            n_examples.ok_or_else(|| r.bad("missing n_examples"))?;
                        if let Some(class) = &mut t.class {
                            class.m_pos = m_pos;
                            class.m_neg = m_neg;
                        }
                        table = Some(t);
                        header_done = true;
                    }
                }
            }
            let t = table.as_mut().expect("header parsed");
            let fields: Vec<u64> = parts.filter_map(|v| v.parse().ok()).collect();
            match (tag, fields.as_slice()) {
                ("marginal" | "marginal_pos" | "marginal_neg", &[j, c]) => {
                    let dst = match tag {
                        "marginal" => &mut t.marginal,
                        "marginal_pos" => &mut t.class.as_mut().unwrap().marginal_pos,
                        _ => &mut t.class.as_mut().unwrap().marginal_neg,
                    };
                    *dst
                        .get_mut(j as usize)
                        .ok_or_else(|| r.bad("feature out of range"))? = c;
                }
                ("pair" | "pair_pos" | "pair_neg", &[rf, j, c]) => {
                    let k = *t
                        .ref_rows
                        .get(&(rf as u32))
                        .ok_or_else(|| r.bad("pair row for untracked reference"))?;
                    let rows = match tag {
                        "pair" => &mut t.pair,
                        "pair_pos" => &mut t.class.as_mut().unwrap().pair_pos,
                        _ => &mut t.class.as_mut().unwrap().pair_neg,
                    };
                    *rows[k]
                        .get_mut(j as usize)
                        .ok_or_else(|| r.bad("feature out of range"))? = c;
                }
                (other, _) => return Err(r.bad(format!("bad record {other:?}"))),
            }
        }
        match table {
            Some(t) => Ok(t),
            None => {
                // Header-only file (e.g. empty corpus would have been an
                // error earlier; zero-feature tables are still legal).
                let n = n_features.ok_or_else(|| r.bad("missing n_features"))?;
                let mut t = CountTable::empty(n, &refs, labeled);
                t.n_examples = n_examples.ok_or_else(|| r.bad("missing n_examples"))?;
                if let Some(class) = &mut t.class {
                    class.m_pos = m_pos;
                    class.m_neg = m_neg;
                }
                Ok(t)
            }
        }
    }
}

impl FeatureProbs for CountTable {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn p_feature(&self, j: u32) -> f64 {
        self.marginal[j as usize] as f64 / self.n_examples as f64
    }

    fn p_pair(&self, a: u32, b: u32) -> Result<f64> {
        Ok(self.pair_count(a, b)? as f64 / self.n_examples as f64)
    }
}

/// Count marginals for all features and pairs for the given reference
/// features. Class-split counts are filled iff every example is labeled.
///
/// Sharded over example chunks; merge is integer addition, so the result is
/// identical for any thread count.
pub fn count_corpus(data: &Dataset, reference_ids: &[u32]) -> Result<CountTable> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut refs: Vec<u32> = reference_ids.to_vec();
    refs.sort_unstable();
    refs.dedup();
    if let Some(&max) = refs.last() {
        if max as usize >= data.n_features() {
            return Err(Error::InvalidConfig(format!(
                "reference id {max} outside vocabulary of size {}",
                data.n_features()
            )));
        }
    }
    let labeled = data.is_fully_labeled();
    let chunk = 4096;
    let n = data.len();
    let table = (0..n.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let lo = c * chunk;
            let hi = (lo + chunk).min(n);
            let mut shard = CountTable::empty(data.n_features(), &refs, labeled);
            shard.count_into(data, lo..hi);
            shard
        })
        .reduce(
            || CountTable::empty(data.n_features(), &refs, labeled),
            CountTable::merge,
        );
    Ok(table)
}

/// Evaluate a probability query as an exact ratio of counts.
pub fn probability(table: &CountTable, query: ProbQuery) -> Result<f64> {
    match query {
        ProbQuery::Marginal(a) => Ok(table.marginal_count(a) as f64 / table.n_examples as f64),
        ProbQuery::Joint(a, b) => table.p_pair(a, b),
        ProbQuery::Conditional(a, b) => {
            let n_b = table.marginal_count(b);
            if n_b == 0 {
                return Err(Error::UndefinedProbability(format!(
                    "P({a}|{b}) with zero count for feature {b}"
                )));
            }
            Ok(table.pair_count(a, b)? as f64 / n_b as f64)
        }
    }
}

/// Feature imbalance coefficients I(j), in [-alpha, 1]. `None` marks
/// features with zero labeled count, whose I(j) is undefined.
#[derive(Debug, Clone)]
pub struct ImbalanceVector {
    values: Vec<Option<f64>>,
    prior: ClassPrior,
}

impl ImbalanceVector {
    pub fn new(values: Vec<Option<f64>>, prior: ClassPrior) -> ImbalanceVector {
        ImbalanceVector { values, prior }
    }

    pub fn get(&self, j: u32) -> Option<f64> {
        self.values.get(j as usize).copied().flatten()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn prior(&self) -> &ClassPrior {
        &self.prior
    }

    pub fn alpha(&self) -> f64 {
        self.prior.alpha()
    }
}

/// I(j) = (N(j,y) - alpha N(j,y-bar)) / N(j) per feature, from a labeled
/// table. The exact-range invariant is enforced by clamping away the last
/// ulp of rounding.
pub fn imbalance(table: &CountTable) -> Result<ImbalanceVector> {
    let class = table
        .class_counts()
        .ok_or_else(|| Error::UndefinedImbalance("count table has no class counts".into()))?;
    let prior = ClassPrior::from_counts(class.m_pos, class.m_neg)?;
    let alpha = prior.alpha();
    let values = (0..table.n_features)
        .map(|j| {
            let n_j = table.marginal[j];
            (n_j > 0).then(|| {
                let with_pos = class.marginal_pos[j] as f64;
                let with_neg = class.marginal_neg[j] as f64;
                ((with_pos - alpha * with_neg) / n_j as f64).clamp(-alpha, 1.0)
            })
        })
        .collect();
    Ok(ImbalanceVector::new(values, prior))
}

/// Conditional dependence coefficients D(j,r|y) and D(j,r|y-bar) for one
/// reference feature.
#[derive(Debug, Clone)]
pub struct DependenceCoefficients {
    pub reference: u32,
    pub d_pos: Vec<f64>,
    pub d_neg: Vec<f64>,
}

/// D(j,r|l) = P(j,r|l) / (P(j|l) P(r|l)) - 1, or exactly 0 whenever
/// P(j|l) = 0 or P(r|l) = 0.
pub fn dependence(table: &CountTable, r: u32) -> Result<DependenceCoefficients> {
    let class = table
        .class_counts()
        .ok_or_else(|| Error::UndefinedImbalance("count table has no class counts".into()))?;
    if table.marginal_count(r) == 0 {
        return Err(Error::EmptyReference { feature: r });
    }
    let coeff = |m: u64, marg: &[u64], pair_row: Option<&Vec<u64>>, j: u32| -> Result<f64> {
        let n_j = marg[j as usize];
        let n_r = marg[r as usize];
        if n_j == 0 || n_r == 0 || m == 0 {
            return Ok(0.0);
        }
        let n_jr = if j == r {
            n_j
        } else {
            pair_row.ok_or(Error::MissingPairCounts { feature: r })?[j as usize]
        };
        // P(j,r|l) / (P(j|l) P(r|l)) = N(j,r) m / (N(j) N(r))
        Ok((n_jr as f64 * m as f64) / (n_j as f64 * n_r as f64) - 1.0)
    };
    let row = table.ref_rows.get(&r).copied();
    let pos_row = row.map(|k| &class.pair_pos[k]);
    let neg_row = row.map(|k| &class.pair_neg[k]);
    let mut d_pos = Vec::with_capacity(table.n_features);
    let mut d_neg = Vec::with_capacity(table.n_features);
    for j in 0..table.n_features as u32 {
        d_pos.push(coeff(class.m_pos, &class.marginal_pos, pos_row, j)?);
        d_neg.push(coeff(class.m_neg, &class.marginal_neg, neg_row, j)?);
    }
    Ok(DependenceCoefficients {
        reference: r,
        d_pos,
        d_neg,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::corpus::SparseExample;
    use proptest::prelude::*;

    /// Dataset from feature-id sets, n_features inferred.
    pub(crate) fn dataset(rows: &[(&[u32], Label)]) -> Dataset {
        let n = rows
            .iter()
            .flat_map(|(ids, _)| ids.iter())
            .max()
            .map_or(0, |&m| m as usize + 1)
            .max(2);
        let examples = rows
            .iter()
            .map(|(ids, _)| SparseExample::new(ids.to_vec()))
            .collect();
        let labels = rows.iter().map(|&(_, l)| l).collect();
        Dataset::new(examples, labels, n, "test")
    }

    const U: Label = Label::Unlabeled;
    const P: Label = Label::Pos;
    const N: Label = Label::Neg;

    // Corpus from the worked example: docs {j,r},{j},{r},{} with j=0, r=1.
    fn four_doc_table() -> CountTable {
        let data = dataset(&[(&[0, 1], U), (&[0], U), (&[1], U), (&[], U)]);
        count_corpus(&data, &[1]).unwrap()
    }

    #[test]
    fn count_corpus_hand_counts() {
        let t = four_doc_table();
        assert_eq!(t.n_examples(), 4);
        assert_eq!(t.marginal_count(0), 2);
        assert_eq!(t.marginal_count(1), 2);
        assert_eq!(t.pair_count(0, 1).unwrap(), 1);
        assert!(!t.is_labeled());
    }

    #[test]
    fn count_corpus_perfect_cooccurrence() {
        let data = dataset(&[(&[0, 1], U), (&[0, 1], U)]);
        let t = count_corpus(&data, &[1]).unwrap();
        assert_eq!(t.pair_count(0, 1).unwrap(), 2);
        assert_eq!(t.marginal_count(0), 2);
        assert_eq!(t.marginal_count(1), 2);
    }

    #[test]
    fn count_corpus_class_counts() {
        let data = dataset(&[(&[0], P), (&[], N)]);
        let t = count_corpus(&data, &[]).unwrap();
        let class = t.class_counts().unwrap();
        assert_eq!(class.m_pos, 1);
        assert_eq!(class.m_neg, 1);
        assert_eq!(class.marginal_pos[0], 1);
        assert_eq!(class.marginal_neg[0], 0);
    }

    #[test]
    fn count_corpus_rejects_empty_dataset() {
        let data = Dataset::new(vec![], vec![], 2, "empty");
        assert!(matches!(count_corpus(&data, &[]), Err(Error::EmptyDataset)));
    }

    #[test]
    fn count_corpus_mixed_labels_has_no_class_counts() {
        let data = dataset(&[(&[0], P), (&[1], U)]);
        let t = count_corpus(&data, &[]).unwrap();
        assert!(t.class_counts().is_none());
    }

    #[test]
    fn probability_ratios() {
        let t = four_doc_table();
        assert_eq!(probability(&t, ProbQuery::Marginal(0)).unwrap(), 0.5);
        assert_eq!(probability(&t, ProbQuery::Conditional(1, 0)).unwrap(), 0.5);
        assert_eq!(probability(&t, ProbQuery::Joint(0, 1)).unwrap(), 0.25);
    }

    #[test]
    fn probability_conditional_on_zero_count_errors() {
        let data = dataset(&[(&[0], U), (&[1], U), (&[2], U)]);
        let t = count_corpus(&data, &[0, 1]).unwrap();
        // feature 3 exists in the vocabulary range but never occurs
        let data4 = dataset(&[(&[0], U), (&[3], U)]);
        let t4 = count_corpus(&data4, &[3]).unwrap();
        assert!(t4.marginal_count(1) == 0);
        assert!(matches!(
            probability(&t4, ProbQuery::Conditional(3, 1)),
            Err(Error::UndefinedProbability(_))
        ));
        drop(t);
    }

    #[test]
    fn pair_count_untracked_errors() {
        let t = four_doc_table();
        assert!(matches!(
            t.pair_count(0, 0),
            Ok(2) // diagonal falls back to the marginal
        ));
        let data = dataset(&[(&[0, 2], U)]);
        let t = count_corpus(&data, &[]).unwrap();
        assert!(matches!(
            t.pair_count(0, 2),
            Err(Error::MissingPairCounts { .. })
        ));
    }

    #[test]
    fn imbalance_pure_positive_feature() {
        // 2 pos + 2 neg (alpha = 1), feature 0 only in positives.
        let data = dataset(&[(&[0], P), (&[0], P), (&[1], N), (&[1], N)]);
        let t = count_corpus(&data, &[]).unwrap();
        let imb = imbalance(&t).unwrap();
        assert_eq!(imb.alpha(), 1.0);
        assert_eq!(imb.get(0), Some(1.0));
    }

    #[test]
    fn imbalance_balanced_feature_is_zero() {
        let data = dataset(&[(&[0], P), (&[], P), (&[0], N), (&[], N)]);
        let t = count_corpus(&data, &[]).unwrap();
        let imb = imbalance(&t).unwrap();
        assert_eq!(imb.get(0), Some(0.0));
    }

    #[test]
    fn imbalance_negative_indicator_feature() {
        // Feature 1 present exactly on negative examples: I = -alpha.
        let data = dataset(&[(&[0], P), (&[0], P), (&[1], N)]);
        let t = count_corpus(&data, &[]).unwrap();
        let imb = imbalance(&t).unwrap();
        let alpha = imb.alpha();
        assert_eq!(alpha, 2.0);
        assert_eq!(imb.get(1), Some(-alpha));
    }

    #[test]
    fn imbalance_zero_count_feature_undefined() {
        let data = dataset(&[(&[0], P), (&[], N)]);
        let t = count_corpus(&data, &[]).unwrap();
        let imb = imbalance(&t).unwrap();
        assert_eq!(imb.get(1), None);
    }

    #[test]
    fn imbalance_single_class_errors() {
        let data = dataset(&[(&[0], P), (&[1], P)]);
        let t = count_corpus(&data, &[]).unwrap();
        assert!(matches!(imbalance(&t), Err(Error::SingleClass)));
    }

    #[test]
    fn dependence_conditionally_independent_is_zero() {
        // Within each class, features 0 and 1 occur in product form.
        // pos: {01},{0},{1},{} twice over; neg mirrors it.
        let mut rows: Vec<(&[u32], Label)> = Vec::new();
        for &label in &[P, N] {
            rows.extend([
                (&[0u32, 1][..], label),
                (&[0][..], label),
                (&[1][..], label),
                (&[][..], label),
            ]);
        }
        let data = dataset(&rows);
        let t = count_corpus(&data, &[1]).unwrap();
        let dep = dependence(&t, 1).unwrap();
        assert!(dep.d_pos[0].abs() < 1e-15);
        assert!(dep.d_neg[0].abs() < 1e-15);
    }

    #[test]
    fn dependence_zero_conditional_branch() {
        // Feature 0 absent from positives: D(0,r|y) = 0 by the zero branch.
        let data = dataset(&[(&[1], P), (&[0, 1], N), (&[1], N)]);
        let t = count_corpus(&data, &[1]).unwrap();
        let dep = dependence(&t, 1).unwrap();
        assert_eq!(dep.d_pos[0], 0.0);
    }

    #[test]
    fn dependence_self_reference() {
        // P(r|y) = 0.5 -> D(r,r|y) = 1/0.5 - 1 = 1.
        let data = dataset(&[(&[1], P), (&[], P), (&[1], N), (&[], N)]);
        let t = count_corpus(&data, &[1]).unwrap();
        let dep = dependence(&t, 1).unwrap();
        assert_eq!(dep.d_pos[1], 1.0);
        assert_eq!(dep.d_neg[1], 1.0);
    }

    #[test]
    fn dependence_absent_reference_errors() {
        let data = dataset(&[(&[0], P), (&[], N)]);
        let t = count_corpus(&data, &[1]).unwrap();
        assert!(matches!(
            dependence(&t, 1),
            Err(Error::EmptyReference { feature: 1 })
        ));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let data = dataset(&[(&[0, 1, 2], P), (&[0], N), (&[2], N), (&[], P)]);
        let t = count_corpus(&data, &[0, 2]).unwrap();
        let path = dir.path().join("counts.tsv");
        t.save(&path, &[("source", "test".into())]).unwrap();
        let loaded = CountTable::load(&path).unwrap();
        assert_eq!(t, loaded);
    }

    proptest! {
        /// Any shard partition merges to the single-pass table.
        #[test]
        fn shard_merge_matches_serial(
            rows in proptest::collection::vec(
                (proptest::collection::btree_set(0u32..12, 0..6), 0u8..3), 1..40),
            split in 1usize..39,
        ) {
            let rows: Vec<(Vec<u32>, Label)> = rows
                .into_iter()
                .map(|(ids, l)| {
                    let label = match l { 0 => P, 1 => N, _ => U };
                    (ids.into_iter().collect(), label)
                })
                .collect();
            let refs = [0u32, 3, 7];
            let examples: Vec<SparseExample> =
                rows.iter().map(|(ids, _)| SparseExample::new(ids.clone())).collect();
            let labels: Vec<Label> = rows.iter().map(|&(_, l)| l).collect();
            let data = Dataset::new(examples, labels, 12, "prop");
            let whole = count_corpus(&data, &refs).unwrap();

            let split = split.min(data.len() - 1).max(1);
            let labeled = data.is_fully_labeled();
            let mut a = CountTable::empty(data.n_features(), &{
                let mut r = refs.to_vec(); r.sort_unstable(); r
            }, labeled);
            a.count_into(&data, 0..split);
            let mut b = CountTable::empty(data.n_features(), &{
                let mut r = refs.to_vec(); r.sort_unstable(); r
            }, labeled);
            b.count_into(&data, split..data.len());
            prop_assert_eq!(a.merge(b), whole);
        }

        /// I(j) stays inside [-alpha, 1] and class counts add up.
        #[test]
        fn imbalance_range_and_count_consistency(
            rows in proptest::collection::vec(
                (proptest::collection::btree_set(0u32..8, 0..5), proptest::bool::ANY), 2..40),
        ) {
            let rows: Vec<(Vec<u32>, Label)> = rows
                .into_iter()
                .map(|(ids, pos)| (ids.into_iter().collect(), if pos { P } else { N }))
                .collect();
            let borrowed: Vec<(&[u32], Label)> =
                rows.iter().map(|(ids, l)| (ids.as_slice(), *l)).collect();
            let data = dataset(&borrowed);
            let t = count_corpus(&data, &[]).unwrap();
            let class = t.class_counts().unwrap();
            prop_assume!(class.m_pos > 0 && class.m_neg > 0);
            for j in 0..data.n_features() {
                prop_assert_eq!(
                    class.marginal_pos[j] + class.marginal_neg[j],
                    t.marginal_count(j as u32)
                );
            }
            let imb = imbalance(&t).unwrap();
            let alpha = imb.alpha();
            for j in 0..data.n_features() as u32 {
                if let Some(i_j) = imb.get(j) {
                    prop_assert!((-alpha..=1.0).contains(&i_j));
                }
            }
        }
    }
}
