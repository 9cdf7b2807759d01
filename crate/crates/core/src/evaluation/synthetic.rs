//! Corpora drawn from a log-linear word production model: each context
//! draws a latent vector `v_c ~ N(0, I_d)` and then emits its words i.i.d.
//! with `P(w | v_c) ∝ exp <v_c, v_w>`.

use std::collections::HashSet;

use indexmap::IndexMap;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::embedstore::{EmbeddingStore, StoreKind};
use crate::error::{Error, Result};
use crate::evaluation::fewshot::{FewShotBenchmark, SimilarityPair};
use crate::linalg::{cosine, dot};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticParams {
    pub dim: usize,
    pub vocab_size: usize,
    pub num_contexts: usize,
    pub context_len: usize,
    pub seed: u64,
}

pub struct SyntheticCorpus {
    pub lines: Vec<String>,
    /// ground-truth word vectors, keyed `w0`, `w1`, ...
    pub vectors: EmbeddingStore,
    pub model: LogLinearModel,
}

pub fn word_name(i: usize) -> String {
    format!("w{i}")
}

/// Word vectors of the generative model.
#[derive(Debug, Clone)]
pub struct LogLinearModel {
    dim: usize,
    vectors: Vec<f64>,
}

impl LogLinearModel {
    /// Word vectors with i.i.d. `N(0, 1/d)` entries (unit expected norm).
    pub fn random(dim: usize, vocab_size: usize, rng: &mut impl Rng) -> Self {
        let normal = Normal::new(0.0, (1.0 / dim as f64).sqrt()).unwrap();
        let vectors = (0..dim * vocab_size).map(|_| normal.sample(rng)).collect();
        LogLinearModel { dim, vectors }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_size(&self) -> usize {
        self.vectors.len() / self.dim
    }

    pub fn vector(&self, w: usize) -> &[f64] {
        &self.vectors[w * self.dim..(w + 1) * self.dim]
    }

    /// Draws `len` word ids i.i.d. from the softmax given `v_c`.
    pub fn sample_words(&self, v_c: &[f64], len: usize, rng: &mut impl Rng) -> Vec<usize> {
        let logits: Vec<f64> = self.vectors.chunks_exact(self.dim).map(|v| dot(v, v_c)).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut cdf = Vec::with_capacity(logits.len());
        let mut total = 0.0;
        for l in logits {
            total += (l - max).exp();
            cdf.push(total);
        }
        (0..len)
            .map(|_| {
                let u = rng.random::<f64>() * total;
                cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
            })
            .collect()
    }

    /// A context line whose latent vector is `center + N(0, I_d)`.
    pub fn sample_line(&self, center: Option<&[f64]>, len: usize, rng: &mut impl Rng) -> String {
        let mut v_c: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(rng)).collect();
        if let Some(c) = center {
            v_c.iter_mut().zip(c).for_each(|(x, m)| *x += m);
        }
        let words = self.sample_words(&v_c, len, rng);
        let names: Vec<String> = words.into_iter().map(word_name).collect();
        names.join(" ")
    }

    pub fn to_store(&self) -> EmbeddingStore {
        let mut s = EmbeddingStore::new(self.dim, StoreKind::Word).unwrap();
        for w in 0..self.vocab_size() {
            s.insert(word_name(w), self.vector(w)).unwrap();
        }
        s
    }
}

/// Samples a corpus and its ground-truth word vectors. Deterministic given
/// the seed.
pub fn generate_synthetic_corpus(params: SyntheticParams) -> Result<SyntheticCorpus> {
    let SyntheticParams {
        dim,
        vocab_size,
        num_contexts,
        context_len,
        seed,
    } = params;
    if dim == 0 || vocab_size < dim {
        return Err(Error::invalid("synthetic corpus needs vocab_size >= dim > 0"));
    }
    if context_len < 2 {
        return Err(Error::invalid("synthetic contexts need at least two words"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = LogLinearModel::random(dim, vocab_size, &mut rng);
    let lines = (0..num_contexts)
        .map(|_| model.sample_line(None, context_len, &mut rng))
        .collect();
    Ok(SyntheticCorpus {
        lines,
        vectors: model.to_store(),
        model,
    })
}

/// A few-shot similarity benchmark carved out of a synthetic corpus.
pub struct SyntheticFewShot {
    pub benchmark: FewShotBenchmark,
    /// ground-truth vectors without the rare words
    pub pretrained: EmbeddingStore,
    pub truth: EmbeddingStore,
    /// corpus lines not used as benchmark contexts
    pub training_lines: Vec<String>,
    pub rare_words: Vec<String>,
}

/// Picks `rare_words` words (seeded) that occur in at least
/// `contexts_per_word` lines, gives each its first `contexts_per_word` lines
/// as contexts (first occurrence marked) and pairs it with
/// `pairs_per_word` random other words scored by true cosine similarity.
/// Benchmark lines are removed from the training lines.
pub fn synthetic_fewshot(
    params: SyntheticParams,
    rare_words: usize,
    pairs_per_word: usize,
    contexts_per_word: usize,
) -> Result<SyntheticFewShot> {
    let corpus = generate_synthetic_corpus(params)?;
    let v = params.vocab_size;
    let mut lines_of: Vec<Vec<usize>> = vec![Vec::new(); v];
    for (i, line) in corpus.lines.iter().enumerate() {
        let mut seen = HashSet::new();
        for tok in line.split(' ') {
            let w: usize = tok[1..].parse().expect("synthetic token");
            if seen.insert(w) {
                lines_of[w].push(i);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x5eed_f00d);
    let mut eligible: Vec<usize> = (0..v).filter(|&w| lines_of[w].len() >= contexts_per_word).collect();
    if eligible.len() < rare_words + pairs_per_word {
        return Err(Error::invalid(format!(
            "only {} words occur in {contexts_per_word} lines",
            eligible.len()
        )));
    }
    eligible.shuffle(&mut rng);
    let mut rare: Vec<usize> = eligible[..rare_words].to_vec();
    rare.sort_unstable();
    let is_rare: HashSet<usize> = rare.iter().copied().collect();
    let others: Vec<usize> = (0..v).filter(|w| !is_rare.contains(w)).collect();

    let mut used = vec![false; corpus.lines.len()];
    let mut contexts = IndexMap::new();
    let mut pairs = Vec::new();
    for &w in &rare {
        let name = word_name(w);
        let ctx: Vec<String> = lines_of[w][..contexts_per_word]
            .iter()
            .map(|&i| {
                used[i] = true;
                let mut marked = false;
                let toks: Vec<String> = corpus.lines[i]
                    .split(' ')
                    .map(|t| {
                        if !marked && t == name {
                            marked = true;
                            format!("<feat>{t}</feat>")
                        } else {
                            t.to_owned()
                        }
                    })
                    .collect();
                toks.join(" ")
            })
            .collect();
        contexts.insert(name.clone(), ctx);
        for &a in others.choose_multiple(&mut rng, pairs_per_word) {
            pairs.push(SimilarityPair {
                word_a: word_name(a),
                word_b: name.clone(),
                human_score: cosine(corpus.model.vector(a), corpus.model.vector(w)),
            });
        }
    }
    let mut pretrained = EmbeddingStore::new(params.dim, StoreKind::Word)?;
    for &w in &others {
        pretrained.insert(word_name(w), corpus.model.vector(w))?;
    }
    let training_lines = corpus
        .lines
        .iter()
        .zip(&used)
        .filter(|(_, u)| !**u)
        .map(|(l, _)| l.clone())
        .collect();
    Ok(SyntheticFewShot {
        benchmark: FewShotBenchmark::new(pairs, contexts),
        pretrained,
        truth: corpus.vectors,
        training_lines,
        rare_words: rare.into_iter().map(word_name).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(seed: u64) -> SyntheticParams {
        SyntheticParams {
            dim: 5,
            vocab_size: 40,
            num_contexts: 300,
            context_len: 6,
            seed,
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let a = generate_synthetic_corpus(params(3)).unwrap();
        let b = generate_synthetic_corpus(params(3)).unwrap();
        assert_eq!(a.lines, b.lines);
        assert_eq!(a.vectors, b.vectors);
        let c = generate_synthetic_corpus(params(4)).unwrap();
        assert_ne!(a.lines, c.lines);
        assert!(a.lines.iter().all(|l| l.split(' ').count() == 6));
    }

    #[test]
    fn preconditions() {
        assert!(generate_synthetic_corpus(SyntheticParams { vocab_size: 4, ..params(0) }).is_err());
        assert!(generate_synthetic_corpus(SyntheticParams { context_len: 1, ..params(0) }).is_err());
    }

    #[test]
    fn sampling_follows_softmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = LogLinearModel {
            dim: 1,
            vectors: vec![0.0, (2.0f64).ln()],
        };
        let words = model.sample_words(&[1.0], 60_000, &mut rng);
        let ones = words.iter().filter(|&&w| w == 1).count() as f64 / 60_000.0;
        assert!((ones - 2.0 / 3.0).abs() < 0.01, "{ones}");
    }

    #[test]
    fn exchangeable_vectors_give_flat_unigrams() {
        // with identical word vectors every word is equally likely
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = LogLinearModel {
            dim: 2,
            vectors: [0.3, -0.4].repeat(10),
        };
        let mut counts = [0usize; 10];
        for _ in 0..2000 {
            let line = model.sample_line(None, 5, &mut rng);
            for w in line.split(' ') {
                counts[w[1..].parse::<usize>().unwrap()] += 1;
            }
        }
        for c in counts {
            assert!((c as f64 - 1000.0).abs() < 120.0, "{counts:?}");
        }
    }
}
