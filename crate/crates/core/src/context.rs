//! Additive context embeddings and the composition baselines.
//!
//! A [`ContextAccumulator`] keeps, per key, the running sum of context word
//! vectors and the number of windows seen. Sums are merged exactly across
//! shards and only divided in [`ContextAccumulator::finalize`].

use std::borrow::Cow;
use std::collections::HashSet;
use std::ops::Range;
use std::path::Path;

use indexmap::IndexMap;
use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::corpus::{
    count_ngrams, for_each_shard, ngram_key_for_ids, ngram_windows_in_line, open_maybe_gzip,
    tokenize, word_windows_in_line, ContextWindow, Corpus, TokenId, Vocabulary,
};
use crate::embedstore::{validate_key, EmbeddingStore, StoreKind};
use crate::error::{Error, Result};
use crate::linalg::{add_outer, axpy, dot, norm};

/// Names a window emission in the accumulator.
pub trait WindowKey {
    fn key<'a>(&'a self, vocab: &'a Vocabulary) -> Cow<'a, str>;
}

impl WindowKey for TokenId {
    fn key<'a>(&'a self, vocab: &'a Vocabulary) -> Cow<'a, str> {
        Cow::Borrowed(vocab.token(*self))
    }
}

impl WindowKey for Vec<TokenId> {
    fn key<'a>(&'a self, vocab: &'a Vocabulary) -> Cow<'a, str> {
        Cow::Owned(ngram_key_for_ids(vocab, self))
    }
}

impl WindowKey for String {
    fn key<'a>(&'a self, _: &'a Vocabulary) -> Cow<'a, str> {
        Cow::Borrowed(self)
    }
}

impl WindowKey for &str {
    fn key<'a>(&'a self, _: &'a Vocabulary) -> Cow<'a, str> {
        Cow::Borrowed(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccEntry {
    pub sum: Vec<f64>,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextAccumulator {
    dim: usize,
    entries: IndexMap<String, AccEntry>,
}

impl ContextAccumulator {
    pub fn new(dim: usize) -> Self {
        ContextAccumulator {
            dim,
            entries: IndexMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&AccEntry> {
        self.entries.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &AccEntry)> + '_ {
        self.entries.iter().map(|(k, e)| (k.as_str(), e))
    }

    fn entry(&mut self, key: &str) -> &mut AccEntry {
        if !self.entries.contains_key(key) {
            self.entries.insert(
                key.to_owned(),
                AccEntry {
                    sum: vec![0.0; self.dim],
                    count: 0,
                },
            );
        }
        self.entries.get_mut(key).unwrap()
    }

    /// Makes `key` known without any context, so that it shows up in the
    /// finalize report if it never receives one.
    pub fn register(&mut self, key: &str) {
        self.entry(key);
    }

    /// Adds one window whose context vectors sum to `window_sum`.
    pub fn add(&mut self, key: &str, window_sum: &[f64]) {
        let e = self.entry(key);
        axpy(1.0, window_sum, &mut e.sum);
        e.count += 1;
    }

    /// Pointwise sum of both fields. New keys from `other` are appended in
    /// its order, so merging shards in corpus order preserves first-seen
    /// key order.
    pub fn merge(&mut self, other: ContextAccumulator) {
        assert_eq!(self.dim, other.dim, "merging accumulators of different dimension");
        for (k, e) in other.entries {
            match self.entries.get_mut(&k) {
                Some(mine) => {
                    axpy(1.0, &e.sum, &mut mine.sum);
                    mine.count += e.count;
                }
                None => {
                    self.entries.insert(k, e);
                }
            }
        }
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&str) -> bool) {
        self.entries.retain(|k, _| keep(k));
    }

    /// Divides each sum by its window count. Keys without any window are
    /// left out and returned separately.
    pub fn finalize(&self) -> Result<(EmbeddingStore, Vec<String>)> {
        let mut store = EmbeddingStore::new(self.dim, StoreKind::Feature)?;
        let mut omitted = Vec::new();
        let mut v = vec![0.0; self.dim];
        for (k, e) in &self.entries {
            if e.count == 0 {
                omitted.push(k.clone());
                continue;
            }
            let inv = 1.0 / e.count as f64;
            for (o, s) in v.iter_mut().zip(&e.sum) {
                *o = s * inv;
            }
            store.insert(k.clone(), &v)?;
        }
        if !omitted.is_empty() {
            info!("{} keys had no context and were omitted", omitted.len());
        }
        Ok((store, omitted))
    }
}

/// How a single window is turned into a vector.
struct Composer<'a> {
    vectors: &'a EmbeddingStore,
    /// store row per vocabulary id; `None` skips the token
    rows: Vec<Option<usize>>,
    weights: Option<Vec<f64>>,
    per_window_norm: bool,
    include_target: bool,
}

impl<'a> Composer<'a> {
    fn new(vocab: &Vocabulary, vectors: &'a EmbeddingStore) -> Result<Self> {
        if vectors.kind() != StoreKind::Word {
            return Err(Error::invalid("context sums need word vectors"));
        }
        let rows = vocab.iter().map(|(t, _)| vectors.index_of(t)).collect();
        Ok(Composer {
            vectors,
            rows,
            weights: None,
            per_window_norm: false,
            include_target: false,
        })
    }

    fn drop_stopwords(&mut self, vocab: &Vocabulary, stop: &StopWords) {
        for (row, (tok, _)) in self.rows.iter_mut().zip(vocab.iter()) {
            if stop.contains(tok) {
                *row = None;
            }
        }
    }

    /// Writes the window vector into `buf`; `None` when the window has no
    /// usable token and is dropped.
    fn compose(&self, w: &ContextWindow, buf: &mut [f64]) -> Option<()> {
        buf.iter_mut().for_each(|x| *x = 0.0);
        let span = self.include_target.then_some(&w.feature_span);
        let mut used = 0usize;
        for tok in w.context().chain(span.into_iter().flatten().copied()) {
            let Some(id) = tok else { continue };
            let Some(row) = self.rows.get(id as usize).copied().flatten() else {
                continue;
            };
            let a = self.weights.as_ref().map_or(1.0, |ws| ws[id as usize]);
            axpy(a, self.vectors.row(row), buf);
            used += 1;
        }
        if self.per_window_norm {
            if used == 0 {
                return None;
            }
            let inv = 1.0 / used as f64;
            buf.iter_mut().for_each(|x| *x *= inv);
        }
        Some(())
    }

    fn accumulate<K: WindowKey>(
        &self,
        vocab: &Vocabulary,
        windows: impl IntoIterator<Item = (K, ContextWindow)>,
    ) -> ContextAccumulator {
        let mut acc = ContextAccumulator::new(self.vectors.dim());
        let mut buf = vec![0.0; self.vectors.dim()];
        for (k, w) in windows {
            let key = k.key(vocab);
            if self.compose(&w, &mut buf).is_some() {
                acc.add(&key, &buf);
            } else {
                acc.register(&key);
            }
        }
        acc
    }
}

/// Sums in-vocabulary context word vectors per key. Every window counts,
/// including windows whose context is entirely out of vocabulary.
/// `vocab` resolves the token ids carried by the windows.
pub fn accumulate<K: WindowKey>(
    windows: impl IntoIterator<Item = (K, ContextWindow)>,
    vocab: &Vocabulary,
    word_vectors: &EmbeddingStore,
    include_target: bool,
) -> Result<ContextAccumulator> {
    let mut c = Composer::new(vocab, word_vectors)?;
    c.include_target = include_target;
    Ok(c.accumulate(vocab, windows))
}

/// Shard-parallel word context sums over a whole corpus. The shard layout
/// is fixed, so the result does not depend on the thread count.
pub fn word_context_sums(
    corpus: &Corpus,
    vocab: &Vocabulary,
    word_vectors: &EmbeddingStore,
    window_size: usize,
    include_target: bool,
) -> Result<ContextAccumulator> {
    let mut c = Composer::new(vocab, word_vectors)?;
    c.include_target = include_target;
    let mut total = ContextAccumulator::new(word_vectors.dim());
    for_each_shard(
        corpus.lines()?,
        |shard| {
            let windows = shard
                .iter()
                .flat_map(|l| word_windows_in_line(l, vocab, window_size));
            c.accumulate(vocab, windows)
        },
        |acc| total.merge(acc),
    )?;
    Ok(total)
}

/// Shard-parallel n-gram context sums; n-grams seen fewer than
/// `min_ngram_count` times are skipped.
pub fn ngram_context_sums(
    corpus: &Corpus,
    vocab: &Vocabulary,
    word_vectors: &EmbeddingStore,
    n: usize,
    window_size: usize,
    min_ngram_count: u64,
    include_target: bool,
) -> Result<ContextAccumulator> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let mut counts = std::collections::HashMap::new();
    for_each_shard(
        corpus.lines()?,
        |shard| count_ngrams(shard, vocab, n),
        |part| {
            for (g, c) in part {
                *counts.entry(g).or_insert(0u64) += c;
            }
        },
    )?;
    counts.retain(|_, c| *c >= min_ngram_count);
    let mut c = Composer::new(vocab, word_vectors)?;
    c.include_target = include_target;
    let mut total = ContextAccumulator::new(word_vectors.dim());
    for_each_shard(
        corpus.lines()?,
        |shard| {
            let windows = shard.iter().flat_map(|l| {
                ngram_windows_in_line(l, vocab, n, window_size, |g| counts.contains_key(g))
            });
            c.accumulate(vocab, windows)
        },
        |acc| total.merge(acc),
    )?;
    Ok(total)
}

/// One line of an annotated-feature context file: a feature key and the
/// tokenized context, with the marked surface form (if any) as a span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureContext {
    pub key: String,
    pub tokens: Vec<String>,
    pub span: Option<Range<usize>>,
}

const FEAT_OPEN: &str = "<feat>";
const FEAT_CLOSE: &str = "</feat>";

impl FeatureContext {
    pub fn parse(key: &str, text: &str) -> Self {
        let marked = text.find(FEAT_OPEN).and_then(|open| {
            let rest = &text[open + FEAT_OPEN.len()..];
            rest.find(FEAT_CLOSE).map(|close| {
                (
                    &text[..open],
                    &rest[..close],
                    &rest[close + FEAT_CLOSE.len()..],
                )
            })
        });
        match marked {
            Some((pre, mid, post)) => {
                let mut tokens = tokenize(pre);
                let start = tokens.len();
                tokens.extend(tokenize(mid));
                let end = tokens.len();
                tokens.extend(tokenize(post));
                FeatureContext {
                    key: key.to_owned(),
                    tokens,
                    span: Some(start..end),
                }
            }
            None => FeatureContext {
                key: key.to_owned(),
                tokens: tokenize(text),
                span: None,
            },
        }
    }

    /// The context window of this line. With a marked span, `window_size`
    /// (if given) limits the tokens taken on each side; otherwise the whole
    /// line is context.
    pub fn window(&self, vocab: &Vocabulary, window_size: Option<usize>) -> ContextWindow {
        let ids = vocab.encode(&self.tokens);
        let whole = ids.len().max(1);
        match &self.span {
            Some(r) => ContextWindow::around(&ids, r.start, r.len(), window_size.unwrap_or(whole)),
            None => ContextWindow::around(&ids, 0, 0, whole),
        }
    }
}

/// Reads a `feature_key<TAB>context text` file.
pub fn read_feature_contexts(path: &Path) -> Result<Vec<FeatureContext>> {
    use std::io::BufRead;
    let reader = open_maybe_gzip(path)?;
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let (key, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, i + 1, "expected feature_key<TAB>context"))?;
        validate_key(key).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        out.push(FeatureContext::parse(key, text));
    }
    Ok(out)
}

pub fn feature_windows<'a>(
    features: &'a [FeatureContext],
    vocab: &'a Vocabulary,
    window_size: Option<usize>,
) -> impl Iterator<Item = (&'a str, ContextWindow)> + 'a {
    features
        .iter()
        .map(move |f| (f.key.as_str(), f.window(vocab, window_size)))
}

/// Options for [`baseline_additive`].
#[derive(Debug, Clone, Copy, Default)]
pub struct AdditiveOptions<'s> {
    /// Divide each window sum by its number of usable tokens.
    pub per_window_norm: bool,
    pub stopwords: Option<&'s StopWords>,
    pub include_target: bool,
}

/// Average over windows of the (optionally per-window averaged) sum of
/// context word vectors. With `per_window_norm`, a window without usable
/// tokens is dropped and does not count towards its key's window total.
pub fn baseline_additive<K: WindowKey>(
    windows: impl IntoIterator<Item = (K, ContextWindow)>,
    vocab: &Vocabulary,
    word_vectors: &EmbeddingStore,
    opts: AdditiveOptions<'_>,
) -> Result<EmbeddingStore> {
    let mut c = Composer::new(vocab, word_vectors)?;
    c.per_window_norm = opts.per_window_norm;
    c.include_target = opts.include_target;
    if let Some(stop) = opts.stopwords {
        c.drop_stopwords(vocab, stop);
    }
    Ok(c.accumulate(vocab, windows).finalize()?.0)
}

/// SIF token weight `a / (a + p(w))` per vocabulary id, with `p` taken from
/// `counts`. Tokens missing from `counts` get weight 1.
pub fn sif_weights(vocab: &Vocabulary, counts: &Vocabulary, a: f64) -> Vec<f64> {
    let total = counts.total_count() as f64;
    vocab
        .iter()
        .map(|(t, _)| match counts.count_of(t) {
            Some(c) if total > 0.0 => a / (a + c as f64 / total),
            _ => 1.0,
        })
        .collect()
}

/// Average over windows of SIF-weighted window sums.
pub fn baseline_sif_weighted<K: WindowKey>(
    windows: impl IntoIterator<Item = (K, ContextWindow)>,
    vocab: &Vocabulary,
    word_vectors: &EmbeddingStore,
    counts: &Vocabulary,
    a: f64,
) -> Result<EmbeddingStore> {
    if !(a > 0.0) {
        return Err(Error::invalid("SIF parameter a must be positive"));
    }
    let mut c = Composer::new(vocab, word_vectors)?;
    c.weights = Some(sif_weights(vocab, counts, a));
    Ok(c.accumulate(vocab, windows).finalize()?.0)
}

pub const POWER_TOLERANCE: f64 = 1e-9;
pub const POWER_MAX_ITERATIONS: usize = 1000;

/// Top principal directions of a vector set, taken from the uncentered
/// second moment `sum v v^T`.
#[derive(Debug, Clone)]
pub struct TopComponents {
    pub directions: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

impl TopComponents {
    /// Power iteration with deflation.
    pub fn fit(store: &EmbeddingStore, k: usize) -> Result<Self> {
        let d = store.dim();
        if k < 1 || k >= d {
            return Err(Error::invalid(format!(
                "number of components must be in 1..{d}, got {k}"
            )));
        }
        let mut g = vec![0.0; d * d];
        for (_, v) in store.iter() {
            add_outer(&mut g, 1.0, v, v);
        }
        let scale = (0..d).map(|i| g[i * d + i]).sum::<f64>();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut directions = Vec::with_capacity(k);
        let mut eigenvalues = Vec::with_capacity(k);
        for comp in 0..k {
            let mut x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n0 = norm(&x);
            x.iter_mut().for_each(|v| *v /= n0);
            let mut lambda = 0.0;
            let mut converged = false;
            for _ in 0..POWER_MAX_ITERATIONS {
                let y = crate::linalg::matvec(&g, &x);
                lambda = norm(&y);
                if lambda <= scale * 1e-14 || lambda == 0.0 {
                    // nothing left in the spectrum
                    lambda = 0.0;
                    converged = true;
                    break;
                }
                let y: Vec<f64> = y.iter().map(|v| v / lambda).collect();
                let diff = y.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                x = y;
                if diff < POWER_TOLERANCE {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::Numerical(format!(
                    "power iteration for principal component {} did not converge in {} iterations (degenerate spectrum)",
                    comp + 1,
                    POWER_MAX_ITERATIONS
                )));
            }
            if lambda == 0.0 {
                break;
            }
            add_outer(&mut g, -lambda, &x, &x);
            directions.push(x);
            eigenvalues.push(lambda);
        }
        Ok(TopComponents {
            directions,
            eigenvalues,
        })
    }

    /// `v - sum_i <v, p_i> p_i`
    pub fn project_out(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        for p in &self.directions {
            let c = dot(v, p);
            axpy(-c, p, &mut out);
        }
        out
    }

    pub fn remove(&self, store: &EmbeddingStore) -> Result<EmbeddingStore> {
        store.map_vectors(|v| self.project_out(v))
    }
}

/// Removes the projection on the store's own top `k` principal directions.
pub fn remove_top_components(store: &EmbeddingStore, k: usize) -> Result<EmbeddingStore> {
    TopComponents::fit(store, k)?.remove(store)
}

/// Function-word list for the stop-word baselines.
#[derive(Debug, Clone)]
pub struct StopWords {
    words: HashSet<String>,
}

/// Bumped whenever [`ENGLISH_STOPWORDS`] changes.
pub const STOPWORDS_VERSION: u32 = 1;

pub const ENGLISH_STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "either", "else",
    "ever", "every", "few", "for", "from", "further", "had", "has", "have", "having", "he", "her",
    "here", "hers", "herself", "him", "himself", "his", "how", "however", "i", "if", "in", "into",
    "is", "it", "its", "itself", "just", "may", "me", "might", "more", "most", "must", "my",
    "myself", "neither", "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or",
    "other", "ought", "our", "ours", "ourselves", "out", "over", "own", "same", "shall", "she",
    "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them",
    "themselves", "then", "there", "these", "they", "this", "those", "though", "through", "thus",
    "to", "too", "under", "until", "up", "upon", "us", "very", "was", "we", "were", "what",
    "when", "where", "whether", "which", "while", "who", "whom", "whose", "why", "will", "with",
    "within", "without", "would", "yet", "you", "your", "yours", "yourself", "yourselves", "s",
    "t", "'", "\"", ",", ".", ";", ":", "!", "?", "(", ")", "-",
];

impl StopWords {
    pub fn english() -> Self {
        Self::from_words(ENGLISH_STOPWORDS.iter().copied())
    }

    pub fn from_words<S: AsRef<str>>(words: impl IntoIterator<Item = S>) -> Self {
        StopWords {
            words: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }

    /// One word per line; blank lines and `#` comments ignored.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let words: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        if words.is_empty() {
            warn!("{}: empty stop-word list", path.display());
        }
        Ok(Self::from_words(words))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}
