//! Corpus streaming, tokenization, vocabularies and context-window scans.
//!
//! A corpus is plain UTF-8 text with one context (sentence, definition,
//! document) per line. Windows never cross a line boundary.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use indexmap::IndexMap;
use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub type TokenId = u32;

/// Default number of tokens taken on each side of a feature occurrence.
pub const DEFAULT_WINDOW: usize = 10;

/// Lines per shard for parallel scans. Fixed so that results do not depend
/// on the number of worker threads.
pub const SHARD_LINES: usize = 4096;

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(c,
            '\u{00A1}' | '\u{00A7}' | '\u{00AB}' | '\u{00B6}' | '\u{00B7}' | '\u{00BB}' | '\u{00BF}'
            | '\u{2010}'..='\u{2027}'
            | '\u{2030}'..='\u{205E}'
            | '\u{3001}'..='\u{3003}'
            | '\u{3008}'..='\u{3011}')
}

/// Lowercases, splits on whitespace and emits every punctuation character as
/// its own token.
///
/// ```
/// assert_eq!(alacarte::tokenize("The cat sat."), ["the", "cat", "sat", "."]);
/// ```
pub fn tokenize(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in line.chars() {
        if c.is_whitespace() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        } else if is_punct(c) {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            out.extend(c.to_lowercase().map(String::from).take(1));
        } else {
            cur.extend(c.to_lowercase());
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Source of corpus lines: a file on disk (optionally gzip-compressed) or
/// an in-memory list.
#[derive(Debug, Clone)]
pub enum Corpus {
    File(PathBuf),
    Lines(Vec<String>),
}

pub type LineIter = Box<dyn Iterator<Item = Result<String>> + Send>;

impl Corpus {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        File::open(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Corpus::File(path))
    }

    pub fn from_lines<S: Into<String>>(lines: impl IntoIterator<Item = S>) -> Self {
        Corpus::Lines(lines.into_iter().map(Into::into).collect())
    }

    /// Iterates the lines from the beginning. May be called repeatedly.
    pub fn lines(&self) -> Result<LineIter> {
        match self {
            Corpus::Lines(v) => Ok(Box::new(v.clone().into_iter().map(Ok))),
            Corpus::File(path) => {
                let reader = open_maybe_gzip(path)?;
                Ok(Box::new(ByteLines {
                    reader,
                    path: path.clone(),
                    line: 0,
                    warned: false,
                }))
            }
        }
    }
}

/// Opens `path`, transparently decompressing gzip (detected by magic bytes).
pub fn open_maybe_gzip(path: &Path) -> Result<Box<dyn BufRead + Send>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut buf = BufReader::with_capacity(1 << 16, file);
    let magic = buf.fill_buf().map_err(|e| Error::io(path, e))?;
    if magic.len() >= 2 && magic[0] == 0x1f && magic[1] == 0x8b {
        Ok(Box::new(BufReader::with_capacity(
            1 << 16,
            MultiGzDecoder::new(buf),
        )))
    } else {
        Ok(Box::new(buf))
    }
}

struct ByteLines {
    reader: Box<dyn BufRead + Send>,
    path: PathBuf,
    line: usize,
    warned: bool,
}

impl Iterator for ByteLines {
    type Item = Result<String>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut buf = Vec::new();
        match self.reader.read_until(b'\n', &mut buf) {
            Ok(0) => None,
            Ok(_) => {
                self.line += 1;
                while matches!(buf.last(), Some(b'\n' | b'\r')) {
                    buf.pop();
                }
                let s = match String::from_utf8(buf) {
                    Ok(s) => s,
                    Err(e) => {
                        if !self.warned {
                            warn!(
                                "{}:{}: invalid UTF-8 replaced (further occurrences in this file not reported)",
                                self.path.display(),
                                self.line
                            );
                            self.warned = true;
                        }
                        String::from_utf8_lossy(e.as_bytes()).into_owned()
                    }
                };
                Some(Ok(s))
            }
            Err(e) => Some(Err(Error::io(&self.path, e))),
        }
    }
}

/// Splits `lines` into fixed-size shards, maps each shard on the current
/// rayon pool and hands the results to `merge` in corpus order.
pub fn for_each_shard<T, F, M>(lines: LineIter, map: F, mut merge: M) -> Result<()>
where
    T: Send,
    F: Fn(&[String]) -> T + Sync,
    M: FnMut(T),
{
    const SHARDS_PER_BATCH: usize = 32;
    let mut lines = lines.peekable();
    while lines.peek().is_some() {
        let mut batch: Vec<Vec<String>> = Vec::with_capacity(SHARDS_PER_BATCH);
        'fill: for _ in 0..SHARDS_PER_BATCH {
            let mut shard = Vec::with_capacity(SHARD_LINES);
            for _ in 0..SHARD_LINES {
                match lines.next() {
                    Some(line) => shard.push(line?),
                    None => {
                        if !shard.is_empty() {
                            batch.push(shard);
                        }
                        break 'fill;
                    }
                }
            }
            batch.push(shard);
        }
        let results: Vec<T> = batch.par_iter().map(|s| map(s)).collect();
        results.into_iter().for_each(&mut merge);
    }
    Ok(())
}

/// Token <-> id map with corpus counts. Ids are dense and assigned by
/// descending count, ties broken lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: IndexMap<String, u64>,
    min_count: u64,
}

impl Vocabulary {
    /// Keeps the tokens counted at least `min_count` times.
    pub fn from_counts(counts: HashMap<String, u64>, min_count: u64) -> Self {
        let mut kept: Vec<(String, u64)> =
            counts.into_iter().filter(|(_, c)| *c >= min_count).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Vocabulary {
            tokens: kept.into_iter().collect(),
            min_count,
        }
    }

    /// Vocabulary over a fixed key list with unknown (zero) counts, e.g. the
    /// keys of a pretrained embedding file.
    pub fn from_keys<S: AsRef<str>>(keys: impl IntoIterator<Item = S>) -> Self {
        let mut tokens = IndexMap::new();
        for k in keys {
            tokens.entry(k.as_ref().to_owned()).or_insert(0);
        }
        Vocabulary {
            tokens,
            min_count: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.tokens.get_index_of(token).map(|i| i as TokenId)
    }

    pub fn token(&self, id: TokenId) -> &str {
        self.tokens.get_index(id as usize).expect("token id out of range").0
    }

    pub fn count(&self, id: TokenId) -> u64 {
        *self.tokens.get_index(id as usize).expect("token id out of range").1
    }

    pub fn count_of(&self, token: &str) -> Option<u64> {
        self.tokens.get(token).copied()
    }

    pub fn total_count(&self) -> u64 {
        self.tokens.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> + '_ {
        self.tokens.iter().map(|(t, c)| (t.as_str(), *c))
    }

    /// Maps a token sequence to ids, `None` for out-of-vocabulary tokens.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<Option<TokenId>> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (t, c) in self.iter() {
            writeln!(w, "{t}\t{c}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a `token<TAB>count` file. The stored order is re-derived from
    /// the counts so ids match a freshly built vocabulary.
    pub fn read_tsv(path: &Path) -> Result<Self> {
        let reader = open_maybe_gzip(path)?;
        let mut counts = HashMap::new();
        let mut min_count = u64::MAX;
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let (tok, cnt) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, i + 1, "expected token<TAB>count"))?;
            let cnt: u64 = cnt
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad count {cnt:?}")))?;
            if counts.insert(tok.to_owned(), cnt).is_some() {
                return Err(Error::parse(path, i + 1, format!("duplicate token {tok:?}")));
            }
            min_count = min_count.min(cnt);
        }
        if counts.is_empty() {
            return Err(Error::invalid(format!("{}: empty vocabulary", path.display())));
        }
        Ok(Self::from_counts(counts, min_count))
    }
}

/// Counts tokens of the given lines.
pub fn count_tokens<S: AsRef<str>>(lines: impl IntoIterator<Item = S>) -> HashMap<String, u64> {
    let mut counts = HashMap::new();
    for line in lines {
        for tok in tokenize(line.as_ref()) {
            *counts.entry(tok).or_insert(0) += 1;
        }
    }
    counts
}

/// Builds a vocabulary from a line stream, keeping tokens seen at least
/// `min_count` times.
pub fn build_vocabulary<S: AsRef<str>>(
    lines: impl IntoIterator<Item = S>,
    min_count: u64,
) -> Result<Vocabulary> {
    let mut n_lines = 0usize;
    let counts = count_tokens(lines.into_iter().inspect(|_| n_lines += 1));
    finish_vocabulary(counts, n_lines, min_count)
}

/// Shard-parallel [`build_vocabulary`] over a [`Corpus`].
pub fn build_vocabulary_from(corpus: &Corpus, min_count: u64) -> Result<Vocabulary> {
    let mut total: HashMap<String, u64> = HashMap::new();
    let mut n_lines = 0usize;
    for_each_shard(
        corpus.lines()?,
        |shard| (shard.len(), count_tokens(shard)),
        |(n, counts)| {
            n_lines += n;
            for (t, c) in counts {
                *total.entry(t).or_insert(0) += c;
            }
        },
    )?;
    finish_vocabulary(total, n_lines, min_count)
}

fn finish_vocabulary(
    counts: HashMap<String, u64>,
    n_lines: usize,
    min_count: u64,
) -> Result<Vocabulary> {
    if min_count < 1 {
        return Err(Error::invalid("min_count must be at least 1"));
    }
    if n_lines == 0 || counts.is_empty() {
        return Err(Error::invalid("empty corpus"));
    }
    let max = counts.values().copied().max().unwrap_or(0);
    let vocab = Vocabulary::from_counts(counts, min_count);
    if vocab.is_empty() {
        return Err(Error::invalid(format!(
            "no token occurs at least {min_count} times (most frequent: {max})"
        )));
    }
    Ok(vocab)
}

/// Tokens around one occurrence of a feature. Out-of-vocabulary tokens are
/// kept as `None` so positions stay meaningful.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ContextWindow {
    pub feature_span: Vec<Option<TokenId>>,
    pub left: Vec<Option<TokenId>>,
    pub right: Vec<Option<TokenId>>,
    pub window_size: usize,
}

impl ContextWindow {
    /// Window around `ids[start..start + len]`, at most `window_size` tokens
    /// on each side.
    pub fn around(ids: &[Option<TokenId>], start: usize, len: usize, window_size: usize) -> Self {
        let end = start + len;
        ContextWindow {
            feature_span: ids[start..end].to_vec(),
            left: ids[start.saturating_sub(window_size)..start].to_vec(),
            right: ids[end..(end + window_size).min(ids.len())].to_vec(),
            window_size,
        }
    }

    /// Context tokens, left then right. The feature span is not included.
    pub fn context(&self) -> impl Iterator<Item = Option<TokenId>> + '_ {
        self.left.iter().chain(&self.right).copied()
    }
}

fn check_window(window_size: usize) {
    assert!(window_size >= 1, "window_size must be at least 1");
}

/// Windows around every in-vocabulary token of a single line.
pub fn word_windows_in_line(
    line: &str,
    vocab: &Vocabulary,
    window_size: usize,
) -> Vec<(TokenId, ContextWindow)> {
    let ids = vocab.encode(&tokenize(line));
    ids.iter()
        .enumerate()
        .filter_map(|(i, id)| id.map(|id| (id, ContextWindow::around(&ids, i, 1, window_size))))
        .collect()
}

/// One emission per occurrence of each in-vocabulary token.
pub fn scan_word_contexts<'a, S: AsRef<str> + 'a>(
    lines: impl IntoIterator<Item = S> + 'a,
    vocab: &'a Vocabulary,
    window_size: usize,
) -> impl Iterator<Item = (TokenId, ContextWindow)> + 'a {
    check_window(window_size);
    lines
        .into_iter()
        .flat_map(move |line| word_windows_in_line(line.as_ref(), vocab, window_size))
}

/// Positions of n-grams whose tokens are all in the vocabulary.
fn ngram_starts(ids: &[Option<TokenId>], n: usize) -> impl Iterator<Item = usize> + '_ {
    let last = (ids.len() + 1).saturating_sub(n);
    (0..last).filter(move |&i| ids[i..i + n].iter().all(Option::is_some))
}

fn ngram_ids(ids: &[Option<TokenId>], start: usize, n: usize) -> Vec<TokenId> {
    ids[start..start + n].iter().map(|t| t.unwrap()).collect()
}

/// Counts in-vocabulary n-grams.
pub fn count_ngrams<S: AsRef<str>>(
    lines: impl IntoIterator<Item = S>,
    vocab: &Vocabulary,
    n: usize,
) -> HashMap<Vec<TokenId>, u64> {
    let mut counts = HashMap::new();
    for line in lines {
        let ids = vocab.encode(&tokenize(line.as_ref()));
        for i in ngram_starts(&ids, n) {
            *counts.entry(ngram_ids(&ids, i, n)).or_insert(0) += 1;
        }
    }
    counts
}

/// Windows around every n-gram occurrence of a single line whose n-gram is
/// accepted by `keep`.
pub fn ngram_windows_in_line(
    line: &str,
    vocab: &Vocabulary,
    n: usize,
    window_size: usize,
    keep: impl Fn(&[TokenId]) -> bool,
) -> Vec<(Vec<TokenId>, ContextWindow)> {
    let ids = vocab.encode(&tokenize(line));
    ngram_starts(&ids, n)
        .filter_map(|i| {
            let gram = ngram_ids(&ids, i, n);
            keep(&gram).then(|| (gram, ContextWindow::around(&ids, i, n, window_size)))
        })
        .collect()
}

/// Emits every occurrence of an in-vocabulary n-gram seen at least
/// `min_ngram_count` times. Makes a counting pre-pass over `lines`.
pub fn scan_ngram_contexts<'a, I, S>(
    lines: I,
    vocab: &'a Vocabulary,
    n: usize,
    window_size: usize,
    min_ngram_count: u64,
) -> impl Iterator<Item = (Vec<TokenId>, ContextWindow)> + 'a
where
    I: IntoIterator<Item = S> + Clone + 'a,
    S: AsRef<str> + 'a,
{
    assert!(n >= 1, "n must be at least 1");
    check_window(window_size);
    let counts = count_ngrams(lines.clone(), vocab, n);
    lines.into_iter().flat_map(move |line| {
        ngram_windows_in_line(line.as_ref(), vocab, n, window_size, |g| {
            counts.get(g).copied().unwrap_or(0) >= min_ngram_count
        })
    })
}

/// Serializes an n-gram as a single whitespace-free key: tokens joined with
/// `_`, with literal `_` and `\` escaped by a backslash.
pub fn ngram_key<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut key = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            key.push('_');
        }
        for c in t.as_ref().chars() {
            if c == '_' || c == '\\' {
                key.push('\\');
            }
            key.push(c);
        }
    }
    key
}

/// Inverse of [`ngram_key`].
pub fn split_ngram_key(key: &str) -> Vec<String> {
    let mut parts = vec![String::new()];
    let mut chars = key.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => {
                if let Some(next) = chars.next() {
                    parts.last_mut().unwrap().push(next);
                }
            }
            '_' => parts.push(String::new()),
            c => parts.last_mut().unwrap().push(c),
        }
    }
    parts
}

pub fn ngram_key_for_ids(vocab: &Vocabulary, ids: &[TokenId]) -> String {
    let toks: Vec<&str> = ids.iter().map(|&i| vocab.token(i)).collect();
    ngram_key(&toks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vocab_of(tokens: &[&str]) -> Vocabulary {
        Vocabulary::from_keys(tokens)
    }

    #[test]
    fn tokenize_golden() {
        assert_eq!(tokenize("The cat sat."), ["the", "cat", "sat", "."]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("don't stop"), ["don", "'", "t", "stop"]);
        assert_eq!(tokenize("  Hello,   WORLD!! "), ["hello", ",", "world", "!", "!"]);
        assert_eq!(tokenize("Émile «dit» ça"), ["émile", "«", "dit", "»", "ça"]);
    }

    #[test]
    fn vocabulary_counts_and_threshold() {
        let v = build_vocabulary(["a b a", "a c"], 2).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v.count_of("a"), Some(3));
        assert_eq!(v.count_of("b"), None);

        let v = build_vocabulary(["a"], 1).unwrap();
        assert_eq!(v.count_of("a"), Some(1));

        let empty: [&str; 0] = [];
        let err = build_vocabulary(empty, 1).unwrap_err();
        assert!(err.to_string().contains("empty corpus"));
        assert!(build_vocabulary(["a b"], 5).is_err());
    }

    #[test]
    fn vocabulary_order_is_count_then_lexicographic() {
        let v = build_vocabulary(["c b a b c", "d"], 1).unwrap();
        let order: Vec<&str> = v.iter().map(|(t, _)| t).collect();
        assert_eq!(order, ["b", "c", "a", "d"]);
        for (i, (t, _)) in v.iter().enumerate() {
            assert_eq!(v.id(t), Some(i as TokenId));
            assert_eq!(v.token(i as TokenId), t);
        }
    }

    #[test]
    fn vocabulary_tsv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.tsv");
        let v = build_vocabulary(["x y y z z z", "y"], 1).unwrap();
        v.write_tsv(&path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "y\t3\nz\t3\nx\t1\n");
        assert_eq!(Vocabulary::read_tsv(&path).unwrap(), v);
    }

    #[test]
    fn word_windows_by_hand() {
        let v = vocab_of(&["a", "b", "c"]);
        let got: Vec<_> = scan_word_contexts(["a b c"], &v, 1).collect();
        let (a, b, c) = (Some(0), Some(1), Some(2));
        assert_eq!(got.len(), 3);
        assert_eq!((got[0].1.left.clone(), got[0].1.right.clone()), (vec![], vec![b]));
        assert_eq!((got[1].1.left.clone(), got[1].1.right.clone()), (vec![a], vec![c]));
        assert_eq!((got[2].1.left.clone(), got[2].1.right.clone()), (vec![b], vec![]));

        let got: Vec<_> = scan_word_contexts(["a"], &v, 10).collect();
        assert_eq!(got.len(), 1);
        assert!(got[0].1.left.is_empty() && got[0].1.right.is_empty());

        // "a b a", window 2: a -> ([], [b, a]) and ([a, b], [])
        let got: Vec<_> = scan_word_contexts(["a b a"], &v, 2).collect();
        let a_windows: Vec<_> = got.iter().filter(|(k, _)| *k == 0).collect();
        assert_eq!(a_windows.len(), 2);
        assert_eq!(a_windows[0].1.right, vec![b, a]);
        assert_eq!(a_windows[1].1.left, vec![a, b]);
        assert_ne!(a_windows[0].1, a_windows[1].1);
    }

    #[test]
    fn oov_tokens_kept_in_window() {
        let v = vocab_of(&["a"]);
        let got: Vec<_> = scan_word_contexts(["q a r"], &v, 1).collect();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].1.left, vec![None]);
        assert_eq!(got[0].1.right, vec![None]);
    }

    #[test]
    fn windows_do_not_cross_lines() {
        let v = vocab_of(&["a", "b"]);
        let got: Vec<_> = scan_word_contexts(["a", "b"], &v, 5).collect();
        assert!(got.iter().all(|(_, w)| w.left.is_empty() && w.right.is_empty()));
    }

    #[test]
    fn bigram_windows_by_hand() {
        let v = vocab_of(&["a", "b", "c", "d"]);
        let lines = ["a b c d"];
        let got: Vec<_> = scan_ngram_contexts(lines, &v, 2, 1, 1).collect();
        let keys: Vec<String> = got.iter().map(|(g, _)| ngram_key_for_ids(&v, g)).collect();
        assert_eq!(keys, ["a_b", "b_c", "c_d"]);
        assert_eq!(got[0].1.left, vec![]);
        assert_eq!(got[0].1.right, vec![Some(2)]);
        assert_eq!(got[1].1.left, vec![Some(0)]);
        assert_eq!(got[1].1.right, vec![Some(3)]);
        assert_eq!(got[2].1.left, vec![Some(1)]);
        assert_eq!(got[2].1.right, vec![]);
    }

    #[test]
    fn ngram_threshold_and_oov_spans() {
        let v = vocab_of(&["x", "y", "z"]);
        let lines = ["x y z", "z z"];
        let got: Vec<_> = scan_ngram_contexts(lines, &v, 2, 3, 2).collect();
        assert!(got.is_empty());
        let got: Vec<_> = scan_ngram_contexts(["x q y"], &v, 2, 3, 1).collect();
        assert!(got.is_empty(), "spans with OOV tokens are not emitted");
    }

    #[test]
    fn ngram_key_escaping() {
        assert_eq!(ngram_key(&["harry", "potter"]), "harry_potter");
        assert_eq!(ngram_key(&["a_b", "c\\"]), "a\\_b_c\\\\");
        assert_eq!(split_ngram_key("a\\_b_c\\\\"), ["a_b", "c\\"]);
    }

    #[test]
    fn gzip_corpus_is_detected() {
        use flate2::write::GzEncoder;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt.gz");
        let mut enc = GzEncoder::new(File::create(&path).unwrap(), flate2::Compression::fast());
        enc.write_all(b"a b\nc\n").unwrap();
        enc.finish().unwrap();
        let lines: Vec<String> = Corpus::open(&path)
            .unwrap()
            .lines()
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(lines, ["a b", "c"]);
    }

    #[test]
    fn invalid_utf8_is_replaced() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        std::fs::write(&path, b"ok\nbad \xff byte\r\n").unwrap();
        let lines: Vec<String> = Corpus::File(path).lines().unwrap().map(|l| l.unwrap()).collect();
        assert_eq!(lines, ["ok", "bad \u{FFFD} byte"]);
    }

    fn small_corpus() -> impl Strategy<Value = Vec<String>> {
        prop::collection::vec(
            prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e", "."]), 0..8)
                .prop_map(|t| t.join(" ")),
            0..10,
        )
    }

    proptest! {
        #[test]
        fn unigram_scan_matches_word_scan(lines in small_corpus(), w in 1usize..4) {
            let v = vocab_of(&["a", "b", "c", "d"]);
            let words: Vec<_> = scan_word_contexts(&lines, &v, w)
                .map(|(id, win)| (vec![id], win))
                .collect();
            let grams: Vec<_> = scan_ngram_contexts(&lines, &v, 1, w, 1).collect();
            prop_assert_eq!(words, grams);
        }

        #[test]
        fn shard_concatenation_matches_whole(lines in small_corpus(), split in 0usize..10, w in 1usize..4) {
            let v = vocab_of(&["a", "b", "c", "e"]);
            let split = split.min(lines.len());
            let whole: Vec<_> = scan_word_contexts(&lines, &v, w).collect();
            let mut parts: Vec<_> = scan_word_contexts(&lines[..split], &v, w).collect();
            parts.extend(scan_word_contexts(&lines[split..], &v, w));
            prop_assert_eq!(whole, parts);
        }

        #[test]
        fn windows_respect_size(lines in small_corpus(), w in 1usize..4, n in 1usize..4) {
            let v = vocab_of(&["a", "b", "c", "d", "e"]);
            for (_, win) in scan_ngram_contexts(&lines, &v, n, w, 1) {
                prop_assert!(win.left.len() <= w && win.right.len() <= w);
                prop_assert_eq!(win.feature_span.len(), n);
            }
        }
    }
}
