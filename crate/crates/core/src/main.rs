use std::fs::{self, File};
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use alacarte::context::{
    accumulate, feature_windows, ngram_context_sums, read_feature_contexts, word_context_sums,
    StopWords,
};
use alacarte::corpus::{build_vocabulary_from, open_maybe_gzip, DEFAULT_WINDOW};
use alacarte::docembed::{embed_corpus, read_documents, Combine, DEFAULT_ORDER};
use alacarte::evaluation::classifier::{train_linear_classifier, ClassifierOptions};
use alacarte::evaluation::fewshot::{
    read_pairs, run_fewshot_protocol, ContextInducer, FewShotBenchmark, Method, RemovalOrder,
};
use alacarte::evaluation::synthetic::{generate_synthetic_corpus, SyntheticParams};
use alacarte::evaluation::{disambiguate, rank_retrieval, spearman};
use alacarte::linalg::cosine;
use alacarte::transform::{
    apply, fit_report, in_holdout, learn_transform_with, LearnOptions, DEFAULT_RIDGE, DEFAULT_TAU,
};
use alacarte::{
    Corpus, EmbeddingStore, Error, EvalReport, Result, StoreKind, Transform, Vocabulary,
    WeightFunction,
};

/// Induce embeddings for rare words, n-grams and annotated features from a
/// few contexts.
#[derive(Parser)]
#[command(name = "alacarte", version)]
struct Cli {
    /// Worker threads (0 = all cores). Outputs do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count tokens and write the vocabulary as `token<TAB>count`.
    Vocab(VocabArgs),
    /// Context embeddings (average of window sums) for words, n-grams or
    /// annotated features.
    Contexts(ContextsArgs),
    /// Learn the transform from word vectors and their context embeddings.
    Learn(LearnArgs),
    /// Embed features by transforming their context embeddings.
    Induce(InduceArgs),
    /// Document vectors from induced n-gram embeddings.
    Docs(DocsArgs),
    /// Spearman correlation of cosine similarities with human scores.
    EvalSim(EvalSimArgs),
    /// Few-shot similarity protocol over growing context subsets.
    EvalFewshot(EvalFewshotArgs),
    /// Rank of each reference vector among the nearest neighbours of its
    /// induced vector.
    EvalRank(EvalRankArgs),
    /// Cross-validated logistic regression on a document matrix.
    Classify(ClassifyArgs),
    /// Pick the nearest sense for each context line.
    Wsd(WsdArgs),
    /// Sample a corpus from the log-linear word production model.
    Synth(SynthArgs),
}

#[derive(Args)]
struct VocabArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 100)]
    min_count: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ContextMode {
    Words,
    Ngrams,
    Features,
}

#[derive(Args)]
struct ContextsArgs {
    /// Pretrained word vectors.
    #[arg(long)]
    vectors: PathBuf,
    #[arg(long, value_enum, default_value_t = ContextMode::Words)]
    mode: ContextMode,
    /// Corpus for the words and ngrams modes.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// `feature<TAB>context` file for the features mode.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Restrict target words to this vocabulary file (words mode).
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Tokens on each side. In features mode only applies to marked spans
    /// and defaults to the whole line.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    min_ngram_count: u64,
    /// Count the target span itself as context.
    #[arg(long)]
    include_target: bool,
    #[arg(long)]
    binary: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long)]
    vectors: PathBuf,
    /// Context embeddings from `contexts`.
    #[arg(long)]
    contexts: PathBuf,
    /// Vocabulary file with corpus counts; needed for log and threshold
    /// weighting.
    #[arg(long)]
    counts: Option<PathBuf>,
    /// uniform, log or threshold.
    #[arg(long, default_value = "uniform")]
    weighting: String,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: u64,
    /// Relative ridge added to the normal matrix, scaled by trace / d.
    #[arg(long, default_value_t = DEFAULT_RIDGE)]
    ridge: f64,
    /// Window size recorded in the transform header.
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    window: usize,
    /// Fraction of keys held out of training and scored separately.
    #[arg(long, default_value_t = 0.0)]
    holdout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InduceArgs {
    #[arg(long)]
    transform: PathBuf,
    /// Context embeddings to transform.
    #[arg(long, conflicts_with = "features")]
    contexts: Option<PathBuf>,
    /// `feature<TAB>context` file; needs `--vectors`.
    #[arg(long, requires = "vectors")]
    features: Option<PathBuf>,
    #[arg(long)]
    vectors: Option<PathBuf>,
    /// Tokens on each side of a marked span; whole line by default.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    binary: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DocsArgs {
    /// One store per n-gram order, in order 1, 2, ...
    #[arg(long = "store", required = true)]
    stores: Vec<PathBuf>,
    /// `label<TAB>text` file.
    #[arg(long)]
    documents: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    order: usize,
    /// concat or sum.
    #[arg(long, default_value = "concat")]
    combine: String,
    /// Scale every document vector to unit length.
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    binary: bool,
    /// Matrix file; `labels.txt` is written next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvalSimArgs {
    /// `word_a<TAB>word_b<TAB>score` file.
    #[arg(long)]
    pairs: PathBuf,
    /// Vectors for the first word of each pair.
    #[arg(long)]
    vectors: PathBuf,
    /// Vectors for the second word; defaults to `--vectors`.
    #[arg(long)]
    induced: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum MethodName {
    Alacarte,
    Additive,
    AdditiveSum,
    AdditiveNostop,
    Sif,
    Toppc,
    SifToppc,
    ToppcSif,
}

#[derive(Args)]
struct EvalFewshotArgs {
    #[arg(long)]
    pairs: PathBuf,
    /// `rare_word<TAB>context` file.
    #[arg(long)]
    contexts: PathBuf,
    #[arg(long)]
    vectors: PathBuf,
    #[arg(long)]
    transform: Option<PathBuf>,
    /// Vocabulary file with corpus counts for SIF.
    #[arg(long)]
    counts: Option<PathBuf>,
    #[arg(long = "method", value_enum, default_values_t = [MethodName::Alacarte, MethodName::Additive])]
    methods: Vec<MethodName>,
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 4, 8, 16, 32, 64, 128])]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 1e-3)]
    sif_a: f64,
    /// Components removed by the top-component methods.
    #[arg(long, default_value_t = 1)]
    components: usize,
    /// Tokens on each side of a marked span; whole line by default.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalRankArgs {
    #[arg(long)]
    induced: PathBuf,
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Document matrix from `docs`.
    #[arg(long)]
    matrix: PathBuf,
    /// Labels, one per line; defaults to `labels.txt` next to the matrix.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 3)]
    inner_folds: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0])]
    grid: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WsdArgs {
    #[arg(long)]
    vectors: PathBuf,
    #[arg(long)]
    transform: PathBuf,
    /// Sense embeddings.
    #[arg(long)]
    senses: PathBuf,
    /// `candidates<TAB>context[<TAB>gold]` lines, candidates comma-separated.
    #[arg(long)]
    queries: PathBuf,
    /// Predicted sense per query line.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    dim: usize,
    #[arg(long, default_value_t = 500)]
    vocab_size: usize,
    #[arg(long, default_value_t = 200_000)]
    contexts: usize,
    #[arg(long, default_value_t = 10)]
    context_len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_corpus: PathBuf,
    #[arg(long)]
    out_vectors: PathBuf,
}

fn save_store(store: &EmbeddingStore, path: &Path, binary: bool) -> Result<()> {
    if binary {
        store.save_binary(path)
    } else {
        store.save_text(path)
    }
}

fn emit_report(report: &EvalReport, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => report.write(p),
        None => {
            print!("{}", report.to_tsv());
            Ok(())
        }
    }
}

fn load_words(path: &Path) -> Result<EmbeddingStore> {
    EmbeddingStore::load(path, StoreKind::Word)
}

fn cmd_vocab(a: VocabArgs) -> Result<()> {
    let vocab = build_vocabulary_from(&Corpus::open(&a.corpus)?, a.min_count)?;
    info!("{} tokens in vocabulary", vocab.len());
    vocab.write_tsv(&a.out)
}

fn cmd_contexts(a: ContextsArgs) -> Result<()> {
    let vectors = load_words(&a.vectors)?;
    let vocab = Vocabulary::from_keys(vectors.keys());
    let need_corpus = || {
        a.corpus
            .as_ref()
            .ok_or_else(|| Error::invalid("--corpus is required in this mode"))
            .and_then(Corpus::open)
    };
    let window = a.window.unwrap_or(DEFAULT_WINDOW);
    let acc = match a.mode {
        ContextMode::Words => {
            let mut acc =
                word_context_sums(&need_corpus()?, &vocab, &vectors, window, a.include_target)?;
            if let Some(p) = &a.vocab {
                let targets = Vocabulary::read_tsv(p)?;
                acc.retain(|k| targets.id(k).is_some());
            }
            acc
        }
        ContextMode::Ngrams => ngram_context_sums(
            &need_corpus()?,
            &vocab,
            &vectors,
            a.n,
            window,
            a.min_ngram_count,
            a.include_target,
        )?,
        ContextMode::Features => {
            let path = a
                .features
                .as_ref()
                .ok_or_else(|| Error::invalid("--features is required in features mode"))?;
            let feats = read_feature_contexts(path)?;
            accumulate(
                feature_windows(&feats, &vocab, a.window),
                &vocab,
                &vectors,
                a.include_target,
            )?
        }
    };
    let (store, omitted) = acc.finalize()?;
    if !omitted.is_empty() {
        warn!("{} keys had no contexts and were omitted", omitted.len());
    }
    info!("{} context embeddings", store.len());
    save_store(&store, &a.out, a.binary)
}

fn cmd_learn(a: LearnArgs) -> Result<()> {
    let words = load_words(&a.vectors)?;
    let ctx = EmbeddingStore::load(&a.contexts, StoreKind::Feature)?;
    let mut weight: WeightFunction = a.weighting.parse()?;
    if let WeightFunction::HardThreshold(_) = weight {
        if a.weighting == "threshold" {
            weight = WeightFunction::HardThreshold(a.tau);
        }
    }
    let counts = match &a.counts {
        Some(p) => Vocabulary::read_tsv(p)?,
        None if weight != WeightFunction::Uniform => {
            return Err(Error::invalid(format!("{weight} weighting needs --counts")))
        }
        None => Vocabulary::from_keys(std::iter::empty::<&str>()),
    };
    let opts = LearnOptions {
        weight,
        conditioning_ridge: a.ridge,
        window_size: a.window as u32,
    };
    let (fraction, seed) = (a.holdout, a.seed);
    let outcome = learn_transform_with(&words, &ctx, &counts, opts, &|k| {
        fraction == 0.0 || !in_holdout(k, fraction, seed)
    })?;
    info!(
        "{} training pairs, train cosine {:.4}",
        outcome.pairs, outcome.train_cosine
    );
    outcome.transform.save(&a.out)?;
    let report = fit_report(&outcome.transform, &words, &ctx, &counts, fraction, seed)?;
    emit_report(&report, a.report.as_deref())
}

fn cmd_induce(a: InduceArgs) -> Result<()> {
    let transform = Transform::load(&a.transform, None)?;
    let ctx = match (&a.contexts, &a.features) {
        (Some(p), _) => EmbeddingStore::load(p, StoreKind::Feature)?,
        (None, Some(f)) => {
            let vectors = load_words(a.vectors.as_ref().unwrap())?;
            let vocab = Vocabulary::from_keys(vectors.keys());
            let feats = read_feature_contexts(f)?;
            let (store, omitted) =
                accumulate(feature_windows(&feats, &vocab, a.window), &vocab, &vectors, false)?
                    .finalize()?;
            if !omitted.is_empty() {
                warn!("{} features had no contexts and were omitted", omitted.len());
            }
            store
        }
        (None, None) => return Err(Error::invalid("give --contexts or --features")),
    };
    let induced = apply(&transform, &ctx)?;
    save_store(&induced, &a.out, a.binary)
}

fn cmd_docs(a: DocsArgs) -> Result<()> {
    let stores = a
        .stores
        .iter()
        .map(|p| EmbeddingStore::load(p, StoreKind::Feature))
        .collect::<Result<Vec<_>>>()?;
    let combine: Combine = a.combine.parse()?;
    let docs = read_documents(&a.documents)?;
    let m = embed_corpus(&docs, &stores, a.order, combine, a.normalize)?;
    let mut report = EvalReport::new();
    for (n, c) in m.coverage.iter().enumerate() {
        report.push("coverage", format!("n={}", n + 1), *c);
    }
    report.push("documents", "all", m.rows.len() as f64);
    m.write(&a.out, a.binary)?;
    emit_report(&report, a.report.as_deref())
}

fn cmd_eval_sim(a: EvalSimArgs) -> Result<()> {
    let pairs = read_pairs(&a.pairs)?;
    let words = load_words(&a.vectors)?;
    let induced = match &a.induced {
        Some(p) => EmbeddingStore::load(p, StoreKind::Feature)?,
        None => words.clone(),
    };
    let (mut sims, mut human) = (Vec::new(), Vec::new());
    let mut missing = 0;
    for p in &pairs {
        match (words.get(&p.word_a), induced.get(&p.word_b)) {
            (Some(x), Some(y)) => {
                sims.push(cosine(x, y));
                human.push(p.human_score);
            }
            _ => missing += 1,
        }
    }
    if missing > 0 {
        warn!("{missing} pairs skipped for a missing vector");
    }
    let mut report = EvalReport::new();
    report.push("spearman", "all", spearman(&sims, &human)?);
    report.push("pairs", "all", sims.len() as f64);
    report.push("pairs_missing", "all", missing as f64);
    emit_report(&report, a.out.as_deref())
}

fn cmd_eval_fewshot(a: EvalFewshotArgs) -> Result<()> {
    let words = load_words(&a.vectors)?;
    let vocab = Vocabulary::from_keys(words.keys());
    let transform = a.transform.as_deref().map(|p| Transform::load(p, Some(words.dim()))).transpose()?;
    let counts = a.counts.as_deref().map(Vocabulary::read_tsv).transpose()?;
    let mut bench = FewShotBenchmark::load(&a.pairs, &a.contexts)?;
    bench.subset_sizes = a.sizes.clone();
    bench.trials = a.trials;
    let mut report = EvalReport::new();
    for m in &a.methods {
        let method = match m {
            MethodName::Alacarte => Method::AlaCarte,
            MethodName::Additive => Method::Additive {
                per_window_norm: true,
                drop_stopwords: false,
            },
            MethodName::AdditiveSum => Method::Additive {
                per_window_norm: false,
                drop_stopwords: false,
            },
            MethodName::AdditiveNostop => Method::Additive {
                per_window_norm: true,
                drop_stopwords: true,
            },
            MethodName::Sif => Method::Sif { a: a.sif_a },
            MethodName::Toppc => Method::TopComponentRemoval { k: a.components },
            MethodName::SifToppc => Method::SifTopComponentRemoval {
                a: a.sif_a,
                k: a.components,
                order: RemovalOrder::WeightThenRemove,
            },
            MethodName::ToppcSif => Method::SifTopComponentRemoval {
                a: a.sif_a,
                k: a.components,
                order: RemovalOrder::RemoveThenWeight,
            },
        };
        let mut inducer = ContextInducer::new(method, &vocab, &words, transform.as_ref(), counts.as_ref())?;
        inducer.window = a.window;
        inducer.stopwords = StopWords::english();
        let res = run_fewshot_protocol(&bench, &inducer, &words, a.seed)?;
        report.extend(res.to_report());
    }
    emit_report(&report, a.out.as_deref())
}

fn cmd_eval_rank(a: EvalRankArgs) -> Result<()> {
    let induced = EmbeddingStore::load(&a.induced, StoreKind::Feature)?;
    let reference = load_words(&a.reference)?;
    let res = rank_retrieval(&induced, &reference)?;
    emit_report(&res.to_report("all"), a.out.as_deref())
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let reader = open_maybe_gzip(path)?;
    reader
        .lines()
        .map(|l| l.map_err(|e| Error::io(path, e)))
        .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()))
        .collect()
}

fn cmd_classify(a: ClassifyArgs) -> Result<()> {
    let matrix = EmbeddingStore::load(&a.matrix, StoreKind::Feature)?;
    let labels_path = a
        .labels
        .clone()
        .unwrap_or_else(|| a.matrix.with_file_name("labels.txt"));
    let labels = read_lines(&labels_path)?;
    if labels.len() != matrix.len() {
        return Err(Error::invalid(format!(
            "{} rows but {} labels",
            matrix.len(),
            labels.len()
        )));
    }
    let x: Vec<&[f64]> = (0..matrix.len()).map(|i| matrix.row(i)).collect();
    let y: Vec<&str> = labels.iter().map(|s| s.trim()).collect();
    let opts = ClassifierOptions {
        folds: a.folds,
        inner_folds: a.inner_folds,
        reg_grid: a.grid.clone(),
        seed: a.seed,
        ..Default::default()
    };
    let (_, report) = train_linear_classifier(&x, &y, &opts)?;
    emit_report(&report, a.out.as_deref())
}

fn cmd_wsd(a: WsdArgs) -> Result<()> {
    let words = load_words(&a.vectors)?;
    let transform = Transform::load(&a.transform, Some(words.dim()))?;
    let senses = EmbeddingStore::load(&a.senses, StoreKind::Feature)?;
    let reader = open_maybe_gzip(&a.queries)?;
    let f = File::create(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let mut w = BufWriter::new(f);
    let (mut scored, mut hits, mut failed) = (0usize, 0usize, 0usize);
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(&a.queries, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(Error::parse(&a.queries, i + 1, "expected candidates<TAB>context[<TAB>gold]"));
        }
        let candidates: Vec<&str> = fields[0].split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        let predicted = match disambiguate(fields[1], &candidates, &senses, &transform, &words) {
            Ok(p) => p,
            Err(e) => {
                warn!("{}:{}: {e}", a.queries.display(), i + 1);
                failed += 1;
                String::from("-")
            }
        };
        writeln!(w, "{predicted}").map_err(|e| Error::io(&a.out, e))?;
        if let Some(gold) = fields.get(2) {
            scored += 1;
            hits += usize::from(predicted == gold.trim());
        }
    }
    w.flush().map_err(|e| Error::io(&a.out, e))?;
    let mut report = EvalReport::new();
    if scored > 0 {
        report.push("accuracy", "all", hits as f64 / scored as f64);
    }
    report.push("queries_failed", "all", failed as f64);
    emit_report(&report, a.report.as_deref())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let s = generate_synthetic_corpus(SyntheticParams {
        dim: a.dim,
        vocab_size: a.vocab_size,
        num_contexts: a.contexts,
        context_len: a.context_len,
        seed: a.seed,
    })?;
    let mut text = s.lines.join("\n");
    text.push('\n');
    fs::write(&a.out_corpus, text).map_err(|e| Error::io(&a.out_corpus, e))?;
    s.vectors.save_text(&a.out_vectors)
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Vocab(a) => cmd_vocab(a),
        Command::Contexts(a) => cmd_contexts(a),
        Command::Learn(a) => cmd_learn(a),
        Command::Induce(a) => cmd_induce(a),
        Command::Docs(a) => cmd_docs(a),
        Command::EvalSim(a) => cmd_eval_sim(a),
        Command::EvalFewshot(a) => cmd_eval_fewshot(a),
        Command::EvalRank(a) => cmd_eval_rank(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Wsd(a) => cmd_wsd(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let user_error = e.use_stderr();
            let _ = e.print();
            return if user_error { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(_) => {
            eprintln!("internal error");
            ExitCode::from(2)
        }
    }
}
