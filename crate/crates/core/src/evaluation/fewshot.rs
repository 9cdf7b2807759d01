//! Few-shot similarity protocol: every rare word gets disjoint context
//! subsets of growing size, an embedding is induced from each subset, and
//! the cosine similarity to a frequent partner word is scored against human
//! ratings with Spearman's rho, averaged over shuffled trials.

use std::fmt;
use std::io::BufRead;
use std::path::Path;

use indexmap::IndexMap;
use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::context::{
    accumulate, baseline_additive, baseline_sif_weighted, feature_windows, AdditiveOptions,
    FeatureContext, StopWords, TopComponents,
};
use crate::corpus::{open_maybe_gzip, Vocabulary};
use crate::embedstore::{EmbeddingStore, StoreKind};
use crate::error::{Error, Result};
use crate::evaluation::metrics::spearman;
use crate::evaluation::report::EvalReport;
use crate::linalg::cosine;
use crate::transform::{apply, Transform};

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityPair {
    /// frequent word with a pretrained vector
    pub word_a: String,
    /// rare word whose vector is induced
    pub word_b: String,
    pub human_score: f64,
}

/// Reads `word_a<TAB>word_b<TAB>score` lines.
pub fn read_pairs(path: &Path) -> Result<Vec<SimilarityPair>> {
    let reader = open_maybe_gzip(path)?;
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(Error::parse(path, i + 1, "expected word_a<TAB>word_b<TAB>score"));
        }
        let score: f64 = f[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("bad score {:?}", f[2])))?;
        if f[0] == f[1] {
            return Err(Error::parse(path, i + 1, "pair of identical words"));
        }
        pairs.push(SimilarityPair {
            word_a: f[0].to_owned(),
            word_b: f[1].to_owned(),
            human_score: score,
        });
    }
    Ok(pairs)
}

pub const DEFAULT_SUBSET_SIZES: [usize; 8] = [1, 2, 4, 8, 16, 32, 64, 128];

#[derive(Debug, Clone)]
pub struct FewShotBenchmark {
    pub pairs: Vec<SimilarityPair>,
    /// raw context lines per rare word, in file order
    pub contexts: IndexMap<String, Vec<String>>,
    pub subset_sizes: Vec<usize>,
    pub trials: usize,
}

impl FewShotBenchmark {
    pub fn new(pairs: Vec<SimilarityPair>, contexts: IndexMap<String, Vec<String>>) -> Self {
        FewShotBenchmark {
            pairs,
            contexts,
            subset_sizes: DEFAULT_SUBSET_SIZES.to_vec(),
            trials: 100,
        }
    }

    /// Pairs file plus a `rare_word<TAB>context` file.
    pub fn load(pairs: &Path, contexts: &Path) -> Result<Self> {
        let pairs = read_pairs(pairs)?;
        let reader = open_maybe_gzip(contexts)?;
        let mut ctx: IndexMap<String, Vec<String>> = IndexMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(contexts, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let (k, text) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(contexts, i + 1, "expected word<TAB>context"))?;
            ctx.entry(k.to_owned()).or_default().push(text.to_owned());
        }
        Ok(Self::new(pairs, ctx))
    }

    /// Contexts needed per word so that all subsets are disjoint.
    pub fn contexts_needed(&self) -> usize {
        self.subset_sizes.iter().sum()
    }
}

/// Turns context lines into embeddings for a batch of features.
pub trait Inducer: Sync {
    fn name(&self) -> String;
    fn induce(&self, features: &[FeatureContext]) -> Result<EmbeddingStore>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemovalOrder {
    /// SIF composition first, then remove the components of the composed
    /// vectors.
    WeightThenRemove,
    /// Remove components from the word vectors, then compose with SIF.
    RemoveThenWeight,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    AlaCarte,
    Additive { per_window_norm: bool, drop_stopwords: bool },
    Sif { a: f64 },
    /// Additive over word vectors with their top `k` components removed.
    TopComponentRemoval { k: usize },
    SifTopComponentRemoval { a: f64, k: usize, order: RemovalOrder },
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Method::AlaCarte => write!(f, "alacarte"),
            Method::Additive {
                per_window_norm,
                drop_stopwords,
            } => {
                write!(f, "additive")?;
                if !per_window_norm {
                    write!(f, "-sum")?;
                }
                if drop_stopwords {
                    write!(f, "-nostop")?;
                }
                Ok(())
            }
            Method::Sif { .. } => write!(f, "sif"),
            Method::TopComponentRemoval { k } => write!(f, "toppc{k}"),
            Method::SifTopComponentRemoval { k, order, .. } => match order {
                RemovalOrder::WeightThenRemove => write!(f, "sif-toppc{k}"),
                RemovalOrder::RemoveThenWeight => write!(f, "toppc{k}-sif"),
            },
        }
    }
}

/// The built-in context composition methods.
pub struct ContextInducer<'a> {
    pub method: Method,
    pub vocab: &'a Vocabulary,
    pub word_vectors: &'a EmbeddingStore,
    pub transform: Option<&'a Transform>,
    pub counts: Option<&'a Vocabulary>,
    pub stopwords: StopWords,
    /// tokens per side around a marked feature; whole line when `None`
    pub window: Option<usize>,
    cleaned: Option<EmbeddingStore>,
}

impl<'a> ContextInducer<'a> {
    pub fn new(
        method: Method,
        vocab: &'a Vocabulary,
        word_vectors: &'a EmbeddingStore,
        transform: Option<&'a Transform>,
        counts: Option<&'a Vocabulary>,
    ) -> Result<Self> {
        match method {
            Method::AlaCarte if transform.is_none() => {
                return Err(Error::invalid("the alacarte method needs a transform"))
            }
            Method::Sif { .. } | Method::SifTopComponentRemoval { .. } if counts.is_none() => {
                return Err(Error::invalid("SIF weighting needs corpus counts"))
            }
            _ => {}
        }
        let cleaned = match method {
            Method::TopComponentRemoval { k }
            | Method::SifTopComponentRemoval {
                k,
                order: RemovalOrder::RemoveThenWeight,
                ..
            } => Some(
                TopComponents::fit(word_vectors, k)?
                    .remove(word_vectors)?
                    .with_kind(StoreKind::Word),
            ),
            _ => None,
        };
        Ok(ContextInducer {
            method,
            vocab,
            word_vectors,
            transform,
            counts,
            stopwords: StopWords::english(),
            window: None,
            cleaned,
        })
    }
}

impl Inducer for ContextInducer<'_> {
    fn name(&self) -> String {
        self.method.to_string()
    }

    fn induce(&self, features: &[FeatureContext]) -> Result<EmbeddingStore> {
        let windows = || feature_windows(features, self.vocab, self.window);
        let vectors = self.cleaned.as_ref().unwrap_or(self.word_vectors);
        match self.method {
            Method::AlaCarte => {
                let (u, _) = accumulate(windows(), self.vocab, vectors, false)?.finalize()?;
                apply(self.transform.unwrap(), &u)
            }
            Method::Additive {
                per_window_norm,
                drop_stopwords,
            } => {
                let opts = AdditiveOptions {
                    per_window_norm,
                    stopwords: drop_stopwords.then_some(&self.stopwords),
                    include_target: false,
                };
                baseline_additive(windows(), self.vocab, vectors, opts)
            }
            Method::TopComponentRemoval { .. } => {
                let opts = AdditiveOptions {
                    per_window_norm: true,
                    ..Default::default()
                };
                baseline_additive(windows(), self.vocab, vectors, opts)
            }
            Method::Sif { a } => {
                baseline_sif_weighted(windows(), self.vocab, vectors, self.counts.unwrap(), a)
            }
            Method::SifTopComponentRemoval { a, k, order } => {
                let sif =
                    baseline_sif_weighted(windows(), self.vocab, vectors, self.counts.unwrap(), a)?;
                match order {
                    RemovalOrder::RemoveThenWeight => Ok(sif),
                    RemovalOrder::WeightThenRemove => {
                        if sif.len() <= k {
                            warn!("too few induced vectors to remove {k} components");
                            return Ok(sif);
                        }
                        TopComponents::fit(&sif, k)?.remove(&sif)
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct FewShotResult {
    pub method: String,
    pub subset_sizes: Vec<usize>,
    /// Spearman per trial and subset size; NaN where undefined
    pub per_trial: Vec<Vec<f64>>,
    /// mean over trials with a defined correlation
    pub mean: Vec<f64>,
    pub excluded_words: Vec<String>,
    pub pairs_used: usize,
}

impl FewShotResult {
    pub fn to_report(&self) -> EvalReport {
        let mut r = EvalReport::new();
        for (s, m) in self.subset_sizes.iter().zip(&self.mean) {
            r.push("spearman", format!("{} size={s}", self.method), *m);
        }
        r.push("pairs", self.method.clone(), self.pairs_used as f64);
        r.push("excluded_words", self.method.clone(), self.excluded_words.len() as f64);
        r.push("trials", self.method.clone(), self.per_trial.len() as f64);
        r
    }
}

/// Seed for trial `t`, independent of how many trials are run.
fn trial_seed(seed: u64, t: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64 + 1);
    rng.random()
}

pub fn run_fewshot_protocol(
    bench: &FewShotBenchmark,
    inducer: &dyn Inducer,
    word_vectors: &EmbeddingStore,
    seed: u64,
) -> Result<FewShotResult> {
    if bench.subset_sizes.is_empty() || bench.trials == 0 {
        return Err(Error::invalid("need at least one subset size and one trial"));
    }
    let needed = bench.contexts_needed();
    let mut excluded = Vec::new();
    let words: Vec<(&String, &Vec<String>)> = bench
        .contexts
        .iter()
        .filter(|(w, c)| {
            let ok = c.len() >= needed;
            if !ok {
                excluded.push((*w).clone());
            }
            ok
        })
        .collect();
    for p in &bench.pairs {
        if !bench.contexts.contains_key(&p.word_b) && !excluded.contains(&p.word_b) {
            excluded.push(p.word_b.clone());
        }
    }
    if !excluded.is_empty() {
        warn!(
            "{} rare words excluded for lacking {needed} contexts",
            excluded.len()
        );
    }
    let pairs: Vec<&SimilarityPair> = bench
        .pairs
        .iter()
        .filter(|p| word_vectors.contains(&p.word_a) && words.iter().any(|(w, _)| **w == p.word_b))
        .collect();
    if pairs.len() < 2 {
        return Err(Error::invalid("fewer than two usable pairs"));
    }
    let human: Vec<f64> = pairs.iter().map(|p| p.human_score).collect();

    let per_trial: Vec<Vec<f64>> = (0..bench.trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<f64>> {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, t));
            let mut subsets: Vec<Vec<FeatureContext>> = vec![Vec::new(); bench.subset_sizes.len()];
            for (w, ctx) in &words {
                let mut order: Vec<&String> = ctx.iter().collect();
                order.shuffle(&mut rng);
                let mut start = 0;
                for (si, &size) in bench.subset_sizes.iter().enumerate() {
                    for line in &order[start..start + size] {
                        subsets[si].push(FeatureContext::parse(w, line));
                    }
                    start += size;
                }
            }
            subsets
                .iter()
                .map(|features| {
                    let induced = inducer.induce(features)?;
                    let sims: Vec<f64> = pairs
                        .iter()
                        .map(|p| {
                            let a = word_vectors.get(&p.word_a).unwrap();
                            induced.get(&p.word_b).map_or(0.0, |b| cosine(a, b))
                        })
                        .collect();
                    Ok(spearman(&sims, &human).unwrap_or(f64::NAN))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mean = (0..bench.subset_sizes.len())
        .map(|si| {
            let vals: Vec<f64> = per_trial.iter().map(|t| t[si]).filter(|v| !v.is_nan()).collect();
            if vals.len() < per_trial.len() {
                warn!(
                    "size {}: {} trials with undefined correlation",
                    bench.subset_sizes[si],
                    per_trial.len() - vals.len()
                );
            }
            if vals.is_empty() {
                f64::NAN
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        })
        .collect();
    Ok(FewShotResult {
        method: inducer.name(),
        subset_sizes: bench.subset_sizes.clone(),
        per_trial,
        mean,
        excluded_words: excluded,
        pairs_used: pairs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Ignores the contexts and returns fixed vectors.
    struct Fixed(EmbeddingStore);

    impl Inducer for Fixed {
        fn name(&self) -> String {
            "fixed".into()
        }
        fn induce(&self, features: &[FeatureContext]) -> Result<EmbeddingStore> {
            let mut out = EmbeddingStore::new(self.0.dim(), StoreKind::Feature)?;
            for f in features {
                if !out.contains(&f.key) {
                    out.insert(f.key.clone(), self.0.get(&f.key).unwrap())?;
                }
            }
            Ok(out)
        }
    }

    fn toy() -> (FewShotBenchmark, EmbeddingStore, EmbeddingStore) {
        let mut words = EmbeddingStore::new(2, StoreKind::Word).unwrap();
        words.insert("a", &[1.0, 0.0]).unwrap();
        words.insert("b", &[0.0, 1.0]).unwrap();
        let mut truth = EmbeddingStore::new(2, StoreKind::Feature).unwrap();
        truth.insert("r1", &[1.0, 0.2]).unwrap();
        truth.insert("r2", &[0.3, 1.0]).unwrap();
        truth.insert("r3", &[1.0, 1.0]).unwrap();
        let mut pairs = Vec::new();
        let mut contexts = IndexMap::new();
        for (i, r) in ["r1", "r2", "r3"].iter().enumerate() {
            for (j, a) in ["a", "b"].iter().enumerate() {
                pairs.push(SimilarityPair {
                    word_a: a.to_string(),
                    word_b: r.to_string(),
                    human_score: (i * 2 + j) as f64 * if j == 0 { 1.0 } else { -1.0 },
                });
            }
            let lines = (0..7)
                .map(|k| {
                    let a = vec!["a"; k % 3 + 1].join(" ");
                    let b = vec!["b"; (k + i) % 4 + 1].join(" ");
                    format!("{a} x {b}")
                })
                .collect();
            contexts.insert(r.to_string(), lines);
        }
        let mut bench = FewShotBenchmark::new(pairs, contexts);
        bench.subset_sizes = vec![1, 2, 4];
        bench.trials = 3;
        (bench, words, truth)
    }

    #[test]
    fn oracle_inducer_gives_flat_curve() {
        let (bench, words, truth) = toy();
        let res = run_fewshot_protocol(&bench, &Fixed(truth.clone()), &words, 0).unwrap();
        let sims: Vec<f64> = bench
            .pairs
            .iter()
            .map(|p| cosine(words.get(&p.word_a).unwrap(), truth.get(&p.word_b).unwrap()))
            .collect();
        let human: Vec<f64> = bench.pairs.iter().map(|p| p.human_score).collect();
        let full = spearman(&sims, &human).unwrap();
        for m in &res.mean {
            assert!((m - full).abs() < 1e-12);
        }
    }

    #[test]
    fn trial_values_do_not_depend_on_trial_count() {
        let (mut bench, words, _) = toy();
        let vocab = Vocabulary::from_keys(words.keys());
        let t = Transform::identity(2);
        let inducer = ContextInducer::new(Method::AlaCarte, &vocab, &words, Some(&t), None).unwrap();
        bench.trials = 1;
        let one = run_fewshot_protocol(&bench, &inducer, &words, 9).unwrap();
        bench.trials = 5;
        let five = run_fewshot_protocol(&bench, &inducer, &words, 9).unwrap();
        assert_eq!(one.per_trial[0], five.per_trial[0]);
        let again = run_fewshot_protocol(&bench, &inducer, &words, 9).unwrap();
        assert_eq!(
            five.per_trial.iter().flatten().map(|x| x.to_bits()).collect::<Vec<_>>(),
            again.per_trial.iter().flatten().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn short_words_are_excluded() {
        let (mut bench, words, truth) = toy();
        bench.contexts.get_mut("r3").unwrap().truncate(6);
        let res = run_fewshot_protocol(&bench, &Fixed(truth), &words, 0).unwrap();
        assert_eq!(res.excluded_words, ["r3"]);
        assert_eq!(res.pairs_used, 4);
    }

    #[test]
    fn methods_need_their_inputs() {
        let (_, words, _) = toy();
        let vocab = Vocabulary::from_keys(words.keys());
        assert!(ContextInducer::new(Method::AlaCarte, &vocab, &words, None, None).is_err());
        assert!(ContextInducer::new(Method::Sif { a: 1e-3 }, &vocab, &words, None, None).is_err());
    }
}
