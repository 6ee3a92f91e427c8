//! Corpus ingestion: tokenization, vocabulary construction and sparse
//! binary example vectors.
//!
//! Features are Boolean occurrence indicators. A document is reduced to the
//! set of vocabulary ids of its tokens; multiplicity is discarded.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use crate::artifact;
use crate::error::{Error, Result};

/// Which token features a vocabulary indexes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Unigram,
    Bigram,
    Both,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FeatureKind::Unigram => "unigram",
            FeatureKind::Bigram => "bigram",
            FeatureKind::Both => "both",
        };
        f.write_str(s)
    }
}

impl FromStr for FeatureKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "unigram" => Ok(FeatureKind::Unigram),
            "bigram" => Ok(FeatureKind::Bigram),
            "both" => Ok(FeatureKind::Both),
            other => Err(format!("unknown feature kind {other:?}")),
        }
    }
}

/// Class label of one example. `Unlabeled` is the `?` convention in corpus
/// files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Pos,
    Neg,
    Unlabeled,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Pos => "pos",
            Label::Neg => "neg",
            Label::Unlabeled => "?",
        }
    }
}

/// Lowercase and whitespace-split `text`, emitting unigrams, bigrams of
/// adjacent unigrams joined by `_`, or both. Duplicates are preserved here;
/// vectorization collapses them.
pub fn tokenize(text: &str, kind: FeatureKind) -> Vec<String> {
    let words: Vec<String> = text.split_whitespace().map(|w| w.to_lowercase()).collect();
    let mut out = Vec::new();
    if matches!(kind, FeatureKind::Unigram | FeatureKind::Both) {
        out.extend(words.iter().cloned());
    }
    if matches!(kind, FeatureKind::Bigram | FeatureKind::Both) {
        out.extend(words.windows(2).map(|w| format!("{}_{}", w[0], w[1])));
    }
    out
}

/// Token-string to dense feature-id mapping.
///
/// Ids are assigned in descending document-frequency order, ties broken
/// lexicographically, so identical corpora always yield identical ids.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    index: HashMap<String, u32>,
    tokens: Vec<String>,
    doc_counts: Vec<u64>,
    kind: FeatureKind,
    min_count: u64,
}

impl Vocabulary {
    /// Build from tokenized documents, keeping tokens whose document
    /// frequency is at least `min_count`.
    pub fn build(docs: &[Vec<String>], kind: FeatureKind, min_count: u64) -> Vocabulary {
        assert!(min_count >= 1, "min_count must be at least 1");
        let mut df: HashMap<&str, u64> = HashMap::new();
        let mut seen: Vec<&str> = Vec::new();
        for doc in docs {
            seen.clear();
            for tok in doc {
                seen.push(tok.as_str());
            }
            seen.sort_unstable();
            seen.dedup();
            for tok in &seen {
                *df.entry(tok).or_insert(0) += 1;
            }
        }
        let mut entries: Vec<(&str, u64)> = df
            .into_iter()
            .filter(|&(_, count)| count >= min_count)
            .collect();
        entries.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut index = HashMap::with_capacity(entries.len());
        let mut tokens = Vec::with_capacity(entries.len());
        let mut doc_counts = Vec::with_capacity(entries.len());
        for (id, (tok, count)) in entries.into_iter().enumerate() {
            index.insert(tok.to_string(), id as u32);
            tokens.push(tok.to_string());
            doc_counts.push(count);
        }
        Vocabulary {
            index,
            tokens,
            doc_counts,
            kind,
            min_count,
        }
    }

    /// Vocabulary `f0 .. f{n-1}` naming the features of a synthetic
    /// generator, ids matching the generator's feature indices.
    pub fn synthetic(n_features: usize) -> Vocabulary {
        let tokens: Vec<String> = (0..n_features).map(|j| format!("f{j}")).collect();
        let index = tokens
            .iter()
            .enumerate()
            .map(|(id, t)| (t.clone(), id as u32))
            .collect();
        Vocabulary {
            index,
            tokens,
            doc_counts: vec![0; n_features],
            kind: FeatureKind::Unigram,
            min_count: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(|s| s.as_str())
    }

    pub fn doc_count(&self, id: u32) -> Option<u64> {
        self.doc_counts.get(id as usize).copied()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = artifact::writer(
            path,
            "vocab",
            &[
                ("kind", self.kind.to_string()),
                ("min_count", self.min_count.to_string()),
            ],
        )?;
        for (id, tok) in self.tokens.iter().enumerate() {
            writeln!(w, "{tok}\t{id}\t{}", self.doc_counts[id])?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Vocabulary> {
        let mut reader = artifact::reader(path, "vocab")?;
        let kind: FeatureKind = reader
            .config("kind")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| reader.bad("missing or invalid kind"))?;
        let min_count: u64 = reader
            .config("min_count")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| reader.bad("missing or invalid min_count"))?;

        let mut index = HashMap::new();
        let mut tokens = Vec::new();
        let mut doc_counts = Vec::new();
        while let Some(line) = reader.next_line()? {
            let mut parts = line.split('\t');
            let (tok, id, count) = match (parts.next(), parts.next(), parts.next()) {
                (Some(t), Some(i), Some(c)) => (t, i, c),
                _ => return Err(reader.bad("expected token<TAB>id<TAB>doc_count")),
            };
            let id: u32 = id.parse().map_err(|_| reader.bad("bad id"))?;
            if id as usize != tokens.len() {
                return Err(reader.bad("ids out of order"));
            }
            let count: u64 = count.parse().map_err(|_| reader.bad("bad doc_count"))?;
            index.insert(tok.to_string(), id);
            tokens.push(tok.to_string());
            doc_counts.push(count);
        }
        Ok(Vocabulary {
            index,
            tokens,
            doc_counts,
            kind,
            min_count,
        })
    }
}

/// Boolean feature occurrence vector: strictly increasing feature ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseExample {
    ids: Vec<u32>,
}

impl SparseExample {
    /// Sorts and deduplicates `ids`.
    pub fn new(mut ids: Vec<u32>) -> SparseExample {
        ids.sort_unstable();
        ids.dedup();
        SparseExample { ids }
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn contains(&self, id: u32) -> bool {
        self.ids.binary_search(&id).is_ok()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Map tokens to their vocabulary ids (sorted, deduplicated); tokens outside
/// the vocabulary are dropped.
pub fn vectorize(tokens: &[String], vocab: &Vocabulary) -> SparseExample {
    let ids: Vec<u32> = tokens.iter().filter_map(|t| vocab.id(t)).collect();
    SparseExample::new(ids)
}

/// A set of examples with (possibly partial) labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    examples: Vec<SparseExample>,
    labels: Vec<Label>,
    n_features: usize,
    provenance: String,
}

impl Dataset {
    pub fn new(
        examples: Vec<SparseExample>,
        labels: Vec<Label>,
        n_features: usize,
        provenance: impl Into<String>,
    ) -> Dataset {
        assert_eq!(examples.len(), labels.len());
        debug_assert!(examples
            .iter()
            .all(|x| x.ids().last().map_or(true, |&id| (id as usize) < n_features)));
        Dataset {
            examples,
            labels,
            n_features,
            provenance: provenance.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn examples(&self) -> &[SparseExample] {
        &self.examples
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.labels.iter().all(|l| *l != Label::Unlabeled)
    }

    /// Sub-dataset at the given indices, in order.
    pub fn subset(&self, indices: &[usize], provenance: impl Into<String>) -> Dataset {
        Dataset {
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_features: self.n_features,
            provenance: provenance.into(),
        }
    }

    /// Copy with every label replaced by `?`. Pipelines use this so splits
    /// meant to be unlabeled cannot leak their gold labels.
    pub fn strip_labels(&self) -> Dataset {
        Dataset {
            examples: self.examples.clone(),
            labels: vec![Label::Unlabeled; self.labels.len()],
            n_features: self.n_features,
            provenance: format!("{} (labels stripped)", self.provenance),
        }
    }

    /// Write in the corpus line format, naming each feature by its
    /// vocabulary token.
    pub fn write_corpus(&self, path: &Path, vocab: &Vocabulary) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        for (x, label) in self.examples.iter().zip(&self.labels) {
            let text: Vec<&str> = x.ids().iter().filter_map(|&id| vocab.token(id)).collect();
            writeln!(w, "{}\t{}", label.as_str(), text.join(" "))?;
        }
        Ok(())
    }
}

/// Parse a `<label>\t<text>` corpus file, vectorizing each line through
/// `vocab`. Labels are `pos`, `neg` or `?`.
pub fn load_dataset(path: &Path, vocab: &Vocabulary) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let path_str = path.display().to_string();
    let mut examples = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let (label, text) = line.split_once('\t').ok_or_else(|| Error::MalformedLine {
            path: path_str.clone(),
            line: lineno + 1,
            reason: "missing tab separator".into(),
        })?;
        let label = match label {
            "pos" => Label::Pos,
            "neg" => Label::Neg,
            "?" => Label::Unlabeled,
            other => {
                return Err(Error::MalformedLine {
                    path: path_str.clone(),
                    line: lineno + 1,
                    reason: format!("unknown label {other:?}"),
                })
            }
        };
        let tokens = tokenize(text, vocab.kind());
        examples.push(vectorize(&tokens, vocab));
        labels.push(label);
    }
    Ok(Dataset::new(examples, labels, vocab.len(), path_str))
}

/// Tokenize every line of a corpus file (ignoring labels), for vocabulary
/// construction.
pub fn tokenize_corpus(path: &Path, kind: FeatureKind) -> Result<Vec<Vec<String>>> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let path_str = path.display().to_string();
    let mut docs = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let (_, text) = line.split_once('\t').ok_or_else(|| Error::MalformedLine {
            path: path_str.clone(),
            line: lineno + 1,
            reason: "missing tab separator".into(),
        })?;
        docs.push(tokenize(text, kind));
    }
    Ok(docs)
}
