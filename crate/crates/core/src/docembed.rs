//! Document vectors from induced n-gram embeddings: block `n` is the sum of
//! the document's n-gram vectors scaled by `1/n`, and the blocks for orders
//! `1..=N` are concatenated (or summed).

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;

use crate::corpus::{ngram_key, open_maybe_gzip, tokenize};
use crate::embedstore::{EmbeddingStore, StoreKind};
use crate::error::{Error, Result};
use crate::linalg::{axpy, norm};

pub const DEFAULT_ORDER: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Combine {
    #[default]
    Concat,
    Sum,
}

impl fmt::Display for Combine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Combine::Concat => "concat",
            Combine::Sum => "sum",
        })
    }
}

impl FromStr for Combine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concat" => Ok(Combine::Concat),
            "sum" => Ok(Combine::Sum),
            _ => Err(Error::invalid(format!("unknown combine mode {s:?} (concat|sum)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDocument {
    pub label: String,
    pub tokens: Vec<String>,
}

impl LabeledDocument {
    pub fn new(label: impl Into<String>, text: &str) -> Self {
        LabeledDocument {
            label: label.into(),
            tokens: tokenize(text),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocumentEmbedding {
    pub vector: Vec<f64>,
    pub orders: usize,
    /// per order: (n-gram slots with a vector, total n-gram slots)
    pub coverage: Vec<(usize, usize)>,
}

/// Checks that `stores` holds one store per order, all of one dimension.
fn check_stores(stores: &[EmbeddingStore], orders: usize) -> Result<usize> {
    if orders == 0 {
        return Err(Error::invalid("document order N must be at least 1"));
    }
    if stores.len() < orders {
        return Err(Error::invalid(format!(
            "order {orders} needs {orders} n-gram stores, got {}",
            stores.len()
        )));
    }
    let d = stores[0].dim();
    for s in &stores[1..orders] {
        if s.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: s.dim(),
            });
        }
    }
    Ok(d)
}

fn lookup<'s>(store: &'s EmbeddingStore, gram: &[String]) -> Option<&'s [f64]> {
    store
        .get(&ngram_key(gram))
        .or_else(|| if gram.len() == 1 { store.get(&gram[0]) } else { None })
}

/// `stores[n - 1]` holds the order-`n` vectors. Unknown n-grams count as
/// zero vectors.
pub fn embed_document(
    tokens: &[String],
    stores: &[EmbeddingStore],
    orders: usize,
    combine: Combine,
    normalize: bool,
) -> Result<DocumentEmbedding> {
    let d = check_stores(stores, orders)?;
    let width = match combine {
        Combine::Concat => d * orders,
        Combine::Sum => d,
    };
    let mut vector = vec![0.0; width];
    let mut coverage = Vec::with_capacity(orders);
    for n in 1..=orders {
        let mut block = vec![0.0; d];
        let (mut known, mut slots) = (0, 0);
        if tokens.len() >= n {
            for gram in tokens.windows(n) {
                slots += 1;
                if let Some(v) = lookup(&stores[n - 1], gram) {
                    axpy(1.0, v, &mut block);
                    known += 1;
                }
            }
        }
        let target = match combine {
            Combine::Concat => &mut vector[(n - 1) * d..n * d],
            Combine::Sum => &mut vector[..],
        };
        axpy(1.0 / n as f64, &block, target);
        coverage.push((known, slots));
    }
    if normalize {
        let z = norm(&vector);
        if z > 0.0 {
            vector.iter_mut().for_each(|x| *x /= z);
        }
    }
    Ok(DocumentEmbedding {
        vector,
        orders,
        coverage,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocumentMatrix {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<String>,
    /// per order: fraction of n-gram slots with a known vector
    pub coverage: Vec<f64>,
}

impl DocumentMatrix {
    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }

    /// Writes the matrix (text or binary embedding format, rows keyed
    /// `doc0`, `doc1`, ...) and `labels.txt` next to it.
    pub fn write(&self, path: &Path, binary: bool) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::invalid("no documents to write"));
        }
        let mut store = EmbeddingStore::new(self.dim(), StoreKind::Feature)?;
        for (i, r) in self.rows.iter().enumerate() {
            store.insert(format!("doc{i}"), r)?;
        }
        if binary {
            store.save_binary(path)?;
        } else {
            store.save_text(path)?;
        }
        let labels = path.with_file_name("labels.txt");
        let f = File::create(&labels).map_err(|e| Error::io(&labels, e))?;
        let mut w = BufWriter::new(f);
        for l in &self.labels {
            writeln!(w, "{l}").map_err(|e| Error::io(&labels, e))?;
        }
        w.flush().map_err(|e| Error::io(&labels, e))
    }
}

/// Embeds every document in order, in parallel.
pub fn embed_corpus(
    docs: &[LabeledDocument],
    stores: &[EmbeddingStore],
    orders: usize,
    combine: Combine,
    normalize: bool,
) -> Result<DocumentMatrix> {
    check_stores(stores, orders)?;
    if docs.is_empty() {
        warn!("no documents to embed");
    }
    let embedded: Vec<DocumentEmbedding> = docs
        .par_iter()
        .enumerate()
        .map(|(i, doc)| {
            embed_document(&doc.tokens, stores, orders, combine, normalize)
                .map_err(|e| Error::invalid(format!("document {i}: {e}")))
        })
        .collect::<Result<_>>()?;
    let coverage = (0..orders)
        .map(|n| {
            let (k, s) = embedded
                .iter()
                .fold((0, 0), |(k, s), e| (k + e.coverage[n].0, s + e.coverage[n].1));
            if s == 0 {
                0.0
            } else {
                k as f64 / s as f64
            }
        })
        .collect();
    Ok(DocumentMatrix {
        rows: embedded.into_iter().map(|e| e.vector).collect(),
        labels: docs.iter().map(|d| d.label.clone()).collect(),
        coverage,
    })
}

/// Reads `label<TAB>raw text` lines. Documents with no tokens are kept and
/// flagged with a warning.
pub fn read_documents(path: &Path) -> Result<Vec<LabeledDocument>> {
    let reader = open_maybe_gzip(path)?;
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let (label, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, i + 1, "expected label<TAB>text"))?;
        if label.is_empty() {
            return Err(Error::parse(path, i + 1, "empty label"));
        }
        let doc = LabeledDocument::new(label, text);
        if doc.tokens.is_empty() {
            warn!("{}:{}: document has no tokens", path.display(), i + 1);
        }
        docs.push(doc);
    }
    Ok(docs)
}
