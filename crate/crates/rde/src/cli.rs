//! The `rde` command line: corpus ingestion, counting, training,
//! evaluation, bounds and the experiment harness as reproducible pipeline
//! steps.
//!
//! Every randomized step takes an explicit seed and every output artifact
//! echoes the parameters that produced it, so rerunning a command with the
//! same inputs yields byte-identical files regardless of `--threads`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::artifact;
use crate::bounds::{bound_report, BoundReport};
use crate::corpus::{
    load_dataset, tokenize_corpus, Dataset, FeatureKind, Label, Vocabulary,
};
use crate::ensemble::{candidate_pool, train_serde, EnsembleModel, SelectionConfig};
use crate::error::{Error, Result};
use crate::eval::{
    diagnostics, naive_bayes, roc_auc, run_experiment, CorpusSource, ExperimentConfig, Method,
    MixtureSpec, NaiveBayesModel, SyntheticSpec,
};
use crate::rde::{build_semiperfect, Polarity, RdeModel};
use crate::stats::{count_corpus, imbalance};

#[derive(Parser)]
#[command(
    name = "rde",
    version,
    about = "Reference distance estimators: semi-supervised linear text classification"
)]
struct Cli {
    /// Worker thread cap; defaults to $RDE_THREADS, then all cores.
    /// Results never depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic corpus from a generator spec file
    Synth(SynthArgs),
    /// Build a vocabulary from a corpus file
    Vocab(VocabArgs),
    /// Count feature occurrences and reference co-occurrences
    Count(CountArgs),
    /// Train a supervised RDE (gold label as reference, labeled rows)
    TrainSurde(TrainSimpleArgs),
    /// Train the semi-perfect RDE approximation (needs a fully labeled corpus)
    TrainPerfrde(TrainSimpleArgs),
    /// Train the reference-feature ensemble on a mixed labeled/unlabeled corpus
    TrainSerde(TrainSerdeArgs),
    /// Train the Naive Bayes baseline (labeled rows)
    TrainNb(TrainSimpleArgs),
    /// Score a corpus with any model file and report AUC
    Eval(EvalArgs),
    /// Distance bounds per candidate reference feature
    Bounds(BoundsArgs),
    /// Per-reference diagnostics: AUC vs distance vs bound
    Diag(DiagArgs),
    /// Resampled method comparison
    Experiment(ExperimentArgs),
}

/// `key=value` per line; `#` starts a comment. Entries override the
/// matching command-line flags.
#[derive(Debug, Default)]
struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    fn load(path: &Path) -> Result<ConfigFile> {
        let text = std::fs::read_to_string(path)?;
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::BadArtifact {
                path: path.display().to_string(),
                reason: format!("line {}: expected key=value", lineno + 1),
            })?;
            values.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    fn check_keys(&self, path: &Path, allowed: &[&str]) -> Result<()> {
        for key in self.values.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::BadArtifact {
                    path: path.display().to_string(),
                    reason: format!("unknown config key {key:?} (allowed: {allowed:?})"),
                });
            }
        }
        Ok(())
    }

    fn set<T: FromStr>(&self, key: &str, dst: &mut T) -> Result<()> {
        if let Some(raw) = self.values.get(key) {
            *dst = raw.parse().map_err(|_| {
                Error::InvalidConfig(format!("config key {key}: cannot parse {raw:?}"))
            })?;
        }
        Ok(())
    }
}

fn load_config(path: &Option<PathBuf>, allowed: &[&str]) -> Result<ConfigFile> {
    match path {
        Some(p) => {
            let cfg = ConfigFile::load(p)?;
            cfg.check_keys(p, allowed)?;
            Ok(cfg)
        }
        None => Ok(ConfigFile::default()),
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Generator spec file (kind, n_features, seed)
    #[arg(long)]
    spec: PathBuf,
    /// Number of examples to draw
    #[arg(long)]
    n: usize,
    /// Output corpus TSV
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VocabArgs {
    #[arg(long, value_name = "CORPUS")]
    r#in: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// unigram, bigram or both
    #[arg(long, default_value = "unigram")]
    kind: String,
    /// Keep tokens with document frequency at least this
    #[arg(long, default_value_t = 1)]
    min_count: u64,
    /// key=value file overriding the flags above
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CountArgs {
    #[arg(long, value_name = "CORPUS")]
    r#in: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Which rows to count: all, labeled or unlabeled
    #[arg(long, default_value = "all")]
    subset: String,
    /// Track pair counts for these tokens (comma separated)
    #[arg(long)]
    ref_tokens: Option<String>,
    /// Track pair counts for every feature occurring more than this many
    /// times in the labeled rows
    #[arg(long)]
    auto_candidates: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainSimpleArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainSerdeArgs {
    /// Mixed corpus: labeled rows train the combiner, `?` rows supply
    /// co-occurrence statistics
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Number of reference features
    #[arg(long, default_value_t = 100)]
    k: usize,
    /// Pruning threshold
    #[arg(long, default_value_t = 20.0)]
    t: f64,
    /// Combiner L2 strength
    #[arg(long, default_value_t = 40.0)]
    ridge: f64,
    /// Candidate references need labeled count above this
    #[arg(long, default_value_t = 20)]
    min_count: u64,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// Write label,score rows here
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write fpr,tpr curve points here
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    /// Labeled corpus for I and D estimates
    #[arg(long)]
    labeled: PathBuf,
    /// Unlabeled corpus for P estimates and RDE weights
    #[arg(long)]
    unlabeled: PathBuf,
    /// Corpus over which the distance expectation runs
    #[arg(long, value_name = "CORPUS")]
    eval: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// Semi-perfect model file (train-perfrde output)
    #[arg(long)]
    perfect: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Candidate reference tokens (comma separated); default: every
    /// feature with labeled count above --min-count
    #[arg(long)]
    ref_tokens: Option<String>,
    #[arg(long, default_value_t = 20)]
    min_count: u64,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct DiagArgs {
    /// Fully labeled corpus; splits are drawn from it
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 500)]
    labeled: usize,
    #[arg(long, default_value_t = 1000)]
    test: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    min_count: u64,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Fully labeled corpus file (with --vocab), or use --synth
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Generator spec file instead of a corpus
    #[arg(long)]
    synth: Option<PathBuf>,
    /// Examples to generate from --synth
    #[arg(long, default_value_t = 50_000)]
    synth_n: usize,
    #[arg(long, default_value_t = 500)]
    labeled: usize,
    #[arg(long, default_value_t = 1000)]
    test: usize,
    /// Comma separated subset of surde,serde,perfrde,nb
    #[arg(long, default_value = "surde,serde,perfrde,nb")]
    methods: String,
    #[arg(long, default_value_t = 5)]
    resamples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long, default_value_t = 20.0)]
    t: f64,
    #[arg(long, default_value_t = 40.0)]
    ridge: f64,
    #[arg(long, default_value_t = 20)]
    min_count: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Entry point; returns the process exit code.
pub fn run<I>(args: I) -> i32
where
    I: IntoIterator<Item = String>,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let threads = cli.threads.or_else(|| {
        std::env::var("RDE_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    let result = match threads {
        Some(n) if n >= 1 => {
            match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                Ok(pool) => pool.install(|| dispatch(cli.command)),
                Err(e) => Err(Error::InvalidConfig(format!("thread pool: {e}"))),
            }
        }
        _ => dispatch(cli.command),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth(args) => cmd_synth(args),
        Command::Vocab(args) => cmd_vocab(args),
        Command::Count(args) => cmd_count(args),
        Command::TrainSurde(args) => cmd_train_simple(args, Trainer::SuRde),
        Command::TrainPerfrde(args) => cmd_train_simple(args, Trainer::PerfRde),
        Command::TrainNb(args) => cmd_train_simple(args, Trainer::NaiveBayes),
        Command::TrainSerde(args) => cmd_train_serde(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Diag(args) => cmd_diag(args),
        Command::Experiment(args) => cmd_experiment(args),
    }
}

/// Generator spec file: kind=text_like|mixture|independent,
/// n_features=<int>, seed=<int>.
fn load_generator_spec(path: &Path) -> Result<MixtureSpec> {
    let cfg = ConfigFile::load(path)?;
    cfg.check_keys(path, &["kind", "n_features", "seed"])?;
    let mut kind = "text_like".to_string();
    let mut n_features = 100usize;
    let mut seed = 0u64;
    cfg.set("kind", &mut kind)?;
    cfg.set("n_features", &mut n_features)?;
    cfg.set("seed", &mut seed)?;
    match kind.as_str() {
        "text_like" => Ok(MixtureSpec::text_like(n_features, seed)),
        "mixture" => Ok(MixtureSpec::random(n_features, seed)),
        "independent" => Ok(SyntheticSpec::random(n_features, seed).to_mixture()),
        other => Err(Error::InvalidConfig(format!(
            "unknown generator kind {other:?}"
        ))),
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let spec = load_generator_spec(&args.spec)?;
    let data = spec.generate(args.n);
    let vocab = Vocabulary::synthetic(spec.n_features());
    data.write_corpus(&args.out, &vocab)?;
    let n_pos = data.labels().iter().filter(|l| **l == Label::Pos).count();
    println!(
        "synth: wrote {} examples ({} pos) with {} features to {}",
        data.len(),
        n_pos,
        spec.n_features(),
        args.out.display()
    );
    Ok(())
}

fn cmd_vocab(mut args: VocabArgs) -> Result<()> {
    let cfg = load_config(&args.config, &["kind", "min_count"])?;
    cfg.set("kind", &mut args.kind)?;
    cfg.set("min_count", &mut args.min_count)?;
    let kind: FeatureKind = args
        .kind
        .parse()
        .map_err(|e: String| Error::InvalidConfig(e))?;
    if args.min_count < 1 {
        return Err(Error::InvalidConfig("min_count must be at least 1".into()));
    }
    let docs = tokenize_corpus(&args.r#in, kind)?;
    let vocab = Vocabulary::build(&docs, kind, args.min_count);
    vocab.save(&args.out)?;
    println!(
        "vocab: {} tokens from {} documents -> {}",
        vocab.len(),
        docs.len(),
        args.out.display()
    );
    Ok(())
}

fn subset_rows(data: &Dataset, subset: &str) -> Result<Dataset> {
    let keep: Vec<usize> = match subset {
        "all" => (0..data.len()).collect(),
        "labeled" => (0..data.len())
            .filter(|&i| data.labels()[i] != Label::Unlabeled)
            .collect(),
        "unlabeled" => (0..data.len())
            .filter(|&i| data.labels()[i] == Label::Unlabeled)
            .collect(),
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown subset {other:?} (all, labeled, unlabeled)"
            )))
        }
    };
    Ok(data.subset(&keep, format!("{} [{subset}]", data.provenance())))
}

fn resolve_tokens(vocab: &Vocabulary, tokens: &str) -> Result<Vec<u32>> {
    tokens
        .split(',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            vocab
                .id(t)
                .ok_or_else(|| Error::InvalidConfig(format!("token {t:?} not in vocabulary")))
        })
        .collect()
}

fn cmd_count(mut args: CountArgs) -> Result<()> {
    let cfg = load_config(
        &args.config,
        &["subset", "ref_tokens", "auto_candidates"],
    )?;
    cfg.set("subset", &mut args.subset)?;
    if let Some(v) = cfg.values.get("ref_tokens") {
        args.ref_tokens = Some(v.clone());
    }
    if let Some(v) = cfg.values.get("auto_candidates") {
        args.auto_candidates = Some(v.parse().map_err(|_| {
            Error::InvalidConfig(format!("auto_candidates: cannot parse {v:?}"))
        })?);
    }
    let vocab = Vocabulary::load(&args.vocab)?;
    let data = load_dataset(&args.r#in, &vocab)?;
    let mut refs: Vec<u32> = match &args.ref_tokens {
        Some(tokens) => resolve_tokens(&vocab, tokens)?,
        None => Vec::new(),
    };
    if let Some(min) = args.auto_candidates {
        let labeled = subset_rows(&data, "labeled")?;
        if labeled.is_empty() {
            return Err(Error::InvalidConfig(
                "auto_candidates needs labeled rows".into(),
            ));
        }
        let labeled_table = count_corpus(&labeled, &[])?;
        refs.extend(candidate_pool(&labeled_table, min));
        refs.sort_unstable();
        refs.dedup();
    }
    let counted = subset_rows(&data, &args.subset)?;
    let table = count_corpus(&counted, &refs)?;
    table.save(
        &args.out,
        &[
            ("corpus", args.r#in.display().to_string()),
            ("subset", args.subset.clone()),
            ("refs", refs.len().to_string()),
        ],
    )?;
    println!(
        "count: {} examples, {} features, {} reference rows -> {}",
        table.n_examples(),
        vocab.len(),
        refs.len(),
        args.out.display()
    );
    Ok(())
}

enum Trainer {
    SuRde,
    PerfRde,
    NaiveBayes,
}

fn cmd_train_simple(args: TrainSimpleArgs, trainer: Trainer) -> Result<()> {
    let vocab = Vocabulary::load(&args.vocab)?;
    let data = load_dataset(&args.corpus, &vocab)?;
    let echo = [
        ("corpus", args.corpus.display().to_string()),
        ("vocab", args.vocab.display().to_string()),
    ];
    let (what, n_train) = match trainer {
        Trainer::SuRde => {
            let labeled = subset_rows(&data, "labeled")?;
            let model = build_semiperfect(&labeled, Polarity::Pos)?;
            model.save(&args.out, &echo)?;
            ("surde", labeled.len())
        }
        Trainer::PerfRde => {
            // the semi-perfect target needs every example labeled
            let model = build_semiperfect(&data, Polarity::Pos)?;
            model.save(&args.out, &echo)?;
            ("perfrde", data.len())
        }
        Trainer::NaiveBayes => {
            let labeled = subset_rows(&data, "labeled")?;
            let model = naive_bayes(&labeled)?;
            model.save(&args.out, &echo)?;
            ("nb", labeled.len())
        }
    };
    println!(
        "train-{what}: {n_train} training examples -> {}",
        args.out.display()
    );
    Ok(())
}

fn cmd_train_serde(mut args: TrainSerdeArgs) -> Result<()> {
    let cfg = load_config(&args.config, &["k", "t", "ridge", "min_count"])?;
    cfg.set("k", &mut args.k)?;
    cfg.set("t", &mut args.t)?;
    cfg.set("ridge", &mut args.ridge)?;
    cfg.set("min_count", &mut args.min_count)?;
    let vocab = Vocabulary::load(&args.vocab)?;
    let data = load_dataset(&args.corpus, &vocab)?;
    let labeled = subset_rows(&data, "labeled")?;
    let unlabeled = subset_rows(&data, "unlabeled")?;
    if unlabeled.is_empty() {
        return Err(Error::InvalidConfig(
            "train-serde needs `?` rows for co-occurrence statistics".into(),
        ));
    }
    let selection = SelectionConfig {
        k: args.k,
        t: args.t,
        candidate_min_count: args.min_count,
    };
    let model = train_serde(&labeled, &unlabeled, &selection, args.ridge)?;
    model.save(
        &args.out,
        &[
            ("corpus", args.corpus.display().to_string()),
            ("k", args.k.to_string()),
            ("t", artifact::fmt_f64(args.t)),
            ("ridge", artifact::fmt_f64(args.ridge)),
            ("min_count", args.min_count.to_string()),
        ],
    )?;
    println!(
        "train-serde: {} members from {} labeled + {} unlabeled -> {}",
        model.members.len(),
        labeled.len(),
        unlabeled.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let vocab = Vocabulary::load(&args.vocab)?;
    let data = load_dataset(&args.corpus, &vocab)?;
    let labeled = subset_rows(&data, "labeled")?;
    if labeled.is_empty() {
        return Err(Error::InvalidConfig("no labeled rows to evaluate".into()));
    }
    let kind = artifact::peek_kind(&args.model)?;
    let scores = match kind.as_str() {
        "rde-model" => RdeModel::load(&args.model)?.score_batch(&labeled),
        "ensemble-model" => EnsembleModel::load(&args.model)?.predict_batch(&labeled),
        "nb-model" => NaiveBayesModel::load(&args.model)?.score_batch(&labeled),
        other => {
            return Err(Error::InvalidConfig(format!(
                "{} is a {other} artifact, not a model",
                args.model.display()
            )))
        }
    };
    let labels: Vec<bool> = labeled.labels().iter().map(|l| *l == Label::Pos).collect();
    let result = roc_auc(&scores, &labels)?;
    if let Some(out) = &args.out {
        let mut w = artifact::writer(
            out,
            "scores",
            &[
                ("model", args.model.display().to_string()),
                ("corpus", args.corpus.display().to_string()),
            ],
        )?;
        writeln!(w, "label,score")?;
        for (label, score) in labeled.labels().iter().zip(&scores) {
            writeln!(w, "{},{score}", label.as_str())?;
        }
    }
    if let Some(curve_path) = &args.curve {
        let mut w = artifact::writer(
            curve_path,
            "roc-curve",
            &[("model", args.model.display().to_string())],
        )?;
        writeln!(w, "fpr,tpr")?;
        for (fpr, tpr) in &result.curve {
            writeln!(w, "{fpr},{tpr}")?;
        }
    }
    println!(
        "eval: auc {:.6} over {} pos / {} neg",
        result.auc, result.n_pos, result.n_neg
    );
    Ok(())
}

fn cmd_bounds(mut args: BoundsArgs) -> Result<()> {
    let cfg = load_config(&args.config, &["ref_tokens", "min_count"])?;
    if let Some(v) = cfg.values.get("ref_tokens") {
        args.ref_tokens = Some(v.clone());
    }
    cfg.set("min_count", &mut args.min_count)?;
    let vocab = Vocabulary::load(&args.vocab)?;
    let labeled = load_dataset(&args.labeled, &vocab)?;
    let unlabeled = load_dataset(&args.unlabeled, &vocab)?.strip_labels();
    let eval_data = load_dataset(&args.eval, &vocab)?;
    let perfect = RdeModel::load(&args.perfect)?;
    if perfect.reference() != crate::rde::Reference::GoldPos {
        return Err(Error::InvalidConfig(
            "--perfect must be a train-perfrde model".into(),
        ));
    }

    let labeled_only = subset_rows(&labeled, "labeled")?;
    let candidates: Vec<u32> = match &args.ref_tokens {
        Some(tokens) => resolve_tokens(&vocab, tokens)?,
        None => {
            let table = count_corpus(&labeled_only, &[])?;
            candidate_pool(&table, args.min_count)
        }
    };
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("no candidate references".into()));
    }
    let labeled_table = count_corpus(&labeled_only, &candidates)?;
    let imb = imbalance(&labeled_table)?;
    let unlabeled_table = count_corpus(&unlabeled, &candidates)?;
    // alpha consistent with the semi-perfect model's training prior
    let p_y = perfect.ref_prob();
    let prior = crate::stats::ClassPrior::from_p_pos(p_y);

    let mut w = artifact::writer(
        &args.out,
        "bounds",
        &[
            ("labeled", args.labeled.display().to_string()),
            ("unlabeled", args.unlabeled.display().to_string()),
            ("eval", args.eval.display().to_string()),
            ("candidates", candidates.len().to_string()),
        ],
    )?;
    writeln!(w, "{}", BoundReport::CSV_HEADER)?;
    let mut emitted = 0;
    let mut skipped = 0;
    for &r in &candidates {
        let token = vocab.token(r).unwrap_or("?");
        let usable = imb.get(r).map_or(false, |i| i != 0.0)
            && unlabeled_table.marginal_count(r) > 0;
        if !usable {
            // undefined or zero I(r): AUC-less blank row keeps the
            // candidate visible
            writeln!(w, "{},,,,,,,", artifact::csv_field(token))?;
            skipped += 1;
            continue;
        }
        let rde = crate::rde::build_rde(&unlabeled_table, r)?;
        let dep = crate::stats::dependence(&labeled_table, r)?;
        let report = bound_report(
            &rde,
            &perfect,
            &eval_data,
            &prior,
            &unlabeled_table,
            &imb,
            &dep,
            r,
        )?;
        writeln!(w, "{}", report.csv_row(token))?;
        emitted += 1;
    }
    println!(
        "bounds: {emitted} reports ({skipped} skipped) -> {}",
        args.out.display()
    );
    Ok(())
}

fn cmd_diag(mut args: DiagArgs) -> Result<()> {
    let cfg = load_config(&args.config, &["labeled", "test", "seed", "min_count"])?;
    cfg.set("labeled", &mut args.labeled)?;
    cfg.set("test", &mut args.test)?;
    cfg.set("seed", &mut args.seed)?;
    cfg.set("min_count", &mut args.min_count)?;
    let vocab = Vocabulary::load(&args.vocab)?;
    let data = load_dataset(&args.corpus, &vocab)?;
    if !data.is_fully_labeled() {
        return Err(Error::InvalidConfig(
            "diag needs a fully labeled corpus".into(),
        ));
    }
    if args.labeled + args.test > data.len() {
        return Err(Error::InvalidConfig("splits exceed corpus size".into()));
    }
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    let mut perm: Vec<usize> = (0..data.len()).collect();
    perm.shuffle(&mut rng);
    let labeled = data.subset(&perm[..args.labeled], "diag labeled");
    let heldout = data.subset(&perm[args.labeled..args.labeled + args.test], "diag test");
    let unlabeled = data
        .subset(&perm[args.labeled + args.test..], "diag unlabeled")
        .strip_labels();

    let labeled_table = count_corpus(&labeled, &[])?;
    let candidates = candidate_pool(&labeled_table, args.min_count);
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("no candidate references".into()));
    }
    let unlabeled_table = count_corpus(&unlabeled, &candidates)?;
    let perfect = build_semiperfect(&data, Polarity::Pos)?;
    let prior = count_corpus(&data, &[])?.prior()?;
    let rows = diagnostics(
        &candidates,
        &labeled,
        &unlabeled_table,
        &heldout,
        &perfect,
        &prior,
    )?;
    crate::eval::write_diagnostics_csv(
        &rows,
        Some(&vocab),
        &args.out,
        &[
            ("corpus", args.corpus.display().to_string()),
            ("labeled", args.labeled.to_string()),
            ("test", args.test.to_string()),
            ("seed", args.seed.to_string()),
            ("min_count", args.min_count.to_string()),
        ],
    )?;
    println!("diag: {} rows -> {}", rows.len(), args.out.display());
    Ok(())
}

fn cmd_experiment(mut args: ExperimentArgs) -> Result<()> {
    let cfg = load_config(
        &args.config,
        &[
            "labeled",
            "test",
            "methods",
            "resamples",
            "seed",
            "k",
            "t",
            "ridge",
            "min_count",
            "synth_n",
        ],
    )?;
    cfg.set("labeled", &mut args.labeled)?;
    cfg.set("test", &mut args.test)?;
    cfg.set("methods", &mut args.methods)?;
    cfg.set("resamples", &mut args.resamples)?;
    cfg.set("seed", &mut args.seed)?;
    cfg.set("k", &mut args.k)?;
    cfg.set("t", &mut args.t)?;
    cfg.set("ridge", &mut args.ridge)?;
    cfg.set("min_count", &mut args.min_count)?;
    cfg.set("synth_n", &mut args.synth_n)?;

    let source = match (&args.synth, &args.corpus) {
        (Some(spec_path), None) => {
            CorpusSource::Mixture(load_generator_spec(spec_path)?, args.synth_n)
        }
        (None, Some(corpus)) => {
            let vocab_path = args.vocab.as_ref().ok_or_else(|| {
                Error::InvalidConfig("--corpus needs --vocab".into())
            })?;
            let vocab = Vocabulary::load(vocab_path)?;
            CorpusSource::Dataset(load_dataset(corpus, &vocab)?)
        }
        _ => {
            return Err(Error::InvalidConfig(
                "give exactly one of --corpus or --synth".into(),
            ))
        }
    };
    let methods: Vec<Method> = args
        .methods
        .split(',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            Method::parse(s)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?}")))
        })
        .collect::<Result<_>>()?;
    let config = ExperimentConfig {
        source,
        n_labeled: args.labeled,
        n_test: args.test,
        methods,
        resamples: args.resamples,
        seed: args.seed,
        selection: SelectionConfig {
            k: args.k,
            t: args.t,
            candidate_min_count: args.min_count,
        },
        ridge: args.ridge,
    };
    let report = run_experiment(&config)?;
    print!("{}", report.table());
    if let Some(out) = &args.out {
        report.write_csv(
            out,
            &[
                ("labeled", args.labeled.to_string()),
                ("test", args.test.to_string()),
                ("methods", args.methods.clone()),
                ("resamples", args.resamples.to_string()),
                ("seed", args.seed.to_string()),
                ("k", args.k.to_string()),
                ("t", artifact::fmt_f64(args.t)),
                ("ridge", artifact::fmt_f64(args.ridge)),
                ("min_count", args.min_count.to_string()),
            ],
        )?;
        println!("experiment: report -> {}", out.display());
    }
    Ok(())
}
