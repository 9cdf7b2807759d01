//! Learning and applying the context-to-feature transform.
//!
//! Given pretrained vectors `v_w` and context embeddings `u_w`, the
//! transform is the minimizer of `sum_w alpha(c_w) |v_w - A u_w|^2`, solved
//! through the `d x d` normal equations
//!
//! ```text
//! A (sum alpha u u^T + lambda I) = sum alpha v u^T
//! ```
//!
//! with a small conditioning ridge `lambda`. Row `i` of `A` solves a
//! symmetric positive-definite system with the Gram matrix, done by one
//! Cholesky factorization.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;

use crate::corpus::Vocabulary;
use crate::embedstore::{ByteReader, EmbeddingStore, StoreKind};
use crate::error::{Error, Result};
use crate::evaluation::report::EvalReport;
use crate::linalg::{add_outer, cosine, matvec, Cholesky};

pub const DEFAULT_RIDGE: f64 = 1e-8;
pub const DEFAULT_TAU: u64 = 1000;

const MAGIC: &[u8; 4] = b"ALCT";
const VERSION: u32 = 1;

/// Regression weight as a non-decreasing function of corpus count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightFunction {
    Uniform,
    /// `1` when the count reaches the threshold, else `0`.
    HardThreshold(u64),
    /// `max(0, ln c)`.
    LogCount,
}

impl WeightFunction {
    pub fn weight(&self, count: u64) -> f64 {
        match *self {
            WeightFunction::Uniform => 1.0,
            WeightFunction::HardThreshold(tau) => {
                if count >= tau {
                    1.0
                } else {
                    0.0
                }
            }
            WeightFunction::LogCount => (count as f64).ln().max(0.0),
        }
    }

    fn tag(&self) -> u32 {
        match self {
            WeightFunction::Uniform => 0,
            WeightFunction::HardThreshold(_) => 1,
            WeightFunction::LogCount => 2,
        }
    }
}

impl fmt::Display for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightFunction::Uniform => write!(f, "uniform"),
            WeightFunction::HardThreshold(t) => write!(f, "threshold:{t}"),
            WeightFunction::LogCount => write!(f, "log"),
        }
    }
}

impl FromStr for WeightFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(WeightFunction::Uniform),
            "log" => Ok(WeightFunction::LogCount),
            "threshold" => Ok(WeightFunction::HardThreshold(DEFAULT_TAU)),
            _ => match s.strip_prefix("threshold:").map(str::parse::<u64>) {
                Some(Ok(t)) if t >= 1 => Ok(WeightFunction::HardThreshold(t)),
                _ => Err(Error::invalid(format!(
                    "unknown weighting {s:?} (uniform, log, threshold[:TAU])"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransformMeta {
    pub weighting: WeightFunction,
    pub window_size: u32,
    /// Hash of the training pairs.
    pub fingerprint: u64,
}

/// A learned `d x d` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Transform {
    dim: usize,
    matrix: Vec<f64>,
    pub meta: TransformMeta,
}

impl Transform {
    pub fn from_matrix(dim: usize, matrix: Vec<f64>, meta: TransformMeta) -> Result<Self> {
        if dim == 0 || matrix.len() != dim * dim {
            return Err(Error::invalid(format!(
                "transform needs {dim}x{dim} entries, got {}",
                matrix.len()
            )));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("transform has non-finite entries".into()));
        }
        Ok(Transform { dim, matrix, meta })
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = vec![0.0; dim * dim];
        for i in 0..dim {
            m[i * dim + i] = 1.0;
        }
        Transform {
            dim,
            matrix: m,
            meta: TransformMeta {
                weighting: WeightFunction::Uniform,
                window_size: 0,
                fingerprint: 0,
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn apply_vector(&self, u: &[f64]) -> Vec<f64> {
        matvec(&self.matrix, u)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&(self.dim as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&self.meta.weighting.tag().to_le_bytes()).map_err(io)?;
        if let WeightFunction::HardThreshold(tau) = self.meta.weighting {
            w.write_all(&tau.to_le_bytes()).map_err(io)?;
        }
        w.write_all(&self.meta.window_size.to_le_bytes()).map_err(io)?;
        w.write_all(&self.meta.fingerprint.to_le_bytes()).map_err(io)?;
        for x in &self.matrix {
            w.write_all(&x.to_le_bytes()).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    /// Reads a transform file; `expected_dim` guards against pairing it with
    /// embeddings of another dimension.
    pub fn load(path: &Path, expected_dim: Option<usize>) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = ByteReader::new(BufReader::new(file), path);
        if &r.bytes::<4>()? != MAGIC {
            return Err(Error::invalid(format!("{}: not a transform file", path.display())));
        }
        let version = u32::from_le_bytes(r.bytes()?);
        if version != VERSION {
            return Err(Error::invalid(format!(
                "{}: unsupported transform version {version}",
                path.display()
            )));
        }
        let dim = u32::from_le_bytes(r.bytes()?) as usize;
        if let Some(exp) = expected_dim {
            if exp != dim {
                return Err(Error::DimensionMismatch {
                    expected: exp,
                    found: dim,
                });
            }
        }
        let weighting = match u32::from_le_bytes(r.bytes()?) {
            0 => WeightFunction::Uniform,
            1 => WeightFunction::HardThreshold(u64::from_le_bytes(r.bytes()?)),
            2 => WeightFunction::LogCount,
            t => {
                return Err(Error::invalid(format!(
                    "{}: unknown weighting tag {t}",
                    path.display()
                )))
            }
        };
        let window_size = u32::from_le_bytes(r.bytes()?);
        let fingerprint = u64::from_le_bytes(r.bytes()?);
        let mut matrix = Vec::with_capacity(dim * dim);
        for _ in 0..dim * dim {
            matrix.push(f64::from_le_bytes(r.bytes()?));
        }
        if !r.at_end()? {
            return Err(Error::invalid(format!(
                "{}: trailing bytes after transform matrix",
                path.display()
            )));
        }
        Transform::from_matrix(
            dim,
            matrix,
            TransformMeta {
                weighting,
                window_size,
                fingerprint,
            },
        )
    }
}

/// Result of [`learn_transform`].
#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub transform: Transform,
    /// pairs with positive weight
    pub pairs: usize,
    /// weighted mean cosine of `A u_w` and `v_w` over the training pairs
    pub train_cosine: f64,
}

/// Training configuration for [`learn_transform_with`].
#[derive(Debug, Clone, Copy)]
pub struct LearnOptions {
    pub weight: WeightFunction,
    pub conditioning_ridge: f64,
    pub window_size: u32,
}

impl Default for LearnOptions {
    fn default() -> Self {
        LearnOptions {
            weight: WeightFunction::Uniform,
            conditioning_ridge: DEFAULT_RIDGE,
            window_size: crate::corpus::DEFAULT_WINDOW as u32,
        }
    }
}

struct Pair<'a> {
    key: &'a str,
    u: &'a [f64],
    v: &'a [f64],
    alpha: f64,
}

fn training_pairs<'a>(
    word_vectors: &'a EmbeddingStore,
    context_vectors: &'a EmbeddingStore,
    counts: &Vocabulary,
    weight: WeightFunction,
    keep: &dyn Fn(&str) -> bool,
) -> Vec<Pair<'a>> {
    context_vectors
        .iter()
        .filter(|(k, _)| keep(k))
        .filter_map(|(key, u)| {
            let v = word_vectors.get(key)?;
            let alpha = weight.weight(counts.count_of(key).unwrap_or(0));
            (alpha > 0.0).then_some(Pair { key, u, v, alpha })
        })
        .collect()
}

const MOMENT_CHUNK: usize = 1024;

/// Weighted Gram `sum a u u^T` and cross moment `sum a v u^T`, reduced
/// over fixed-size chunks in order.
fn moments(pairs: &[Pair<'_>], d: usize) -> (Vec<f64>, Vec<f64>) {
    let parts: Vec<(Vec<f64>, Vec<f64>)> = pairs
        .par_chunks(MOMENT_CHUNK)
        .map(|chunk| {
            let mut gram = vec![0.0; d * d];
            let mut cross = vec![0.0; d * d];
            for p in chunk {
                add_outer(&mut gram, p.alpha, p.u, p.u);
                add_outer(&mut cross, p.alpha, p.v, p.u);
            }
            (gram, cross)
        })
        .collect();
    let mut gram = vec![0.0; d * d];
    let mut cross = vec![0.0; d * d];
    for (g, c) in parts {
        gram.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        cross.iter_mut().zip(c).for_each(|(a, b)| *a += b);
    }
    (gram, cross)
}

fn fnv1a(hash: &mut u64, bytes: &[u8]) {
    for b in bytes {
        *hash ^= *b as u64;
        *hash = hash.wrapping_mul(0x100000001b3);
    }
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;

fn fingerprint(pairs: &[Pair<'_>]) -> u64 {
    let mut h = FNV_OFFSET;
    for p in pairs {
        fnv1a(&mut h, p.key.as_bytes());
        fnv1a(&mut h, &p.alpha.to_le_bytes());
        for x in p.u.iter().chain(p.v) {
            fnv1a(&mut h, &x.to_le_bytes());
        }
    }
    h
}

/// Deterministic holdout membership from a seeded hash of the key.
pub fn in_holdout(key: &str, fraction: f64, seed: u64) -> bool {
    if fraction <= 0.0 {
        return false;
    }
    let mut h = FNV_OFFSET;
    fnv1a(&mut h, &seed.to_le_bytes());
    fnv1a(&mut h, key.as_bytes());
    // finalizer so nearby keys spread over the unit interval
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51afd7ed558ccd);
    h ^= h >> 33;
    ((h >> 11) as f64 / (1u64 << 53) as f64) < fraction
}

/// Weighted least-squares transform from context embeddings to word vectors
/// over all shared keys.
pub fn learn_transform(
    word_vectors: &EmbeddingStore,
    context_vectors: &EmbeddingStore,
    counts: &Vocabulary,
    weight: WeightFunction,
    conditioning_ridge: f64,
) -> Result<LearnOutcome> {
    let opts = LearnOptions {
        weight,
        conditioning_ridge,
        ..Default::default()
    };
    learn_transform_with(word_vectors, context_vectors, counts, opts, &|_| true)
}

/// [`learn_transform`] restricted to keys accepted by `keep`.
pub fn learn_transform_with(
    word_vectors: &EmbeddingStore,
    context_vectors: &EmbeddingStore,
    counts: &Vocabulary,
    opts: LearnOptions,
    keep: &dyn Fn(&str) -> bool,
) -> Result<LearnOutcome> {
    let d = word_vectors.dim();
    if context_vectors.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: context_vectors.dim(),
        });
    }
    if !(opts.conditioning_ridge >= 0.0) || !opts.conditioning_ridge.is_finite() {
        return Err(Error::invalid("conditioning ridge must be a non-negative number"));
    }
    let pairs = training_pairs(word_vectors, context_vectors, counts, opts.weight, keep);
    if pairs.is_empty() {
        return Err(Error::invalid(format!(
            "no training pairs: no shared key has positive weight under {}",
            opts.weight
        )));
    }
    if pairs.len() < d {
        warn!(
            "only {} training pairs with positive weight for dimension {d}; the fit is underdetermined",
            pairs.len()
        );
    }

    let (mut gram, cross) = moments(&pairs, d);
    let trace: f64 = (0..d).map(|i| gram[i * d + i]).sum();
    let lambda = opts.conditioning_ridge * trace / d as f64;
    for i in 0..d {
        gram[i * d + i] += lambda;
    }
    let chol = Cholesky::factor(&gram, d).map_err(|pivot| {
        if lambda == 0.0 {
            Error::Numerical(format!(
                "normal matrix is singular (pivot {pivot}); use a positive conditioning ridge"
            ))
        } else {
            Error::Numerical(format!(
                "normal matrix is not positive definite at pivot {pivot} even with ridge {}",
                opts.conditioning_ridge
            ))
        }
    })?;

    let mut matrix = cross;
    matrix.par_chunks_mut(d).for_each(|row| chol.solve_in_place(row));

    let transform = Transform::from_matrix(
        d,
        matrix,
        TransformMeta {
            weighting: opts.weight,
            window_size: opts.window_size,
            fingerprint: fingerprint(&pairs),
        },
    )?;
    let (train_cosine, _, _) = weighted_mean_cosine(
        &transform,
        pairs.iter().map(|p| (p.u, p.v, p.alpha)),
    );
    Ok(LearnOutcome {
        transform,
        pairs: pairs.len(),
        train_cosine,
    })
}

/// Returns (weighted mean cosine, pairs used, pairs skipped for a zero
/// vector). The mean is NaN when nothing was used.
fn weighted_mean_cosine<'a>(
    t: &Transform,
    pairs: impl Iterator<Item = (&'a [f64], &'a [f64], f64)>,
) -> (f64, usize, usize) {
    let (mut num, mut den, mut used, mut skipped) = (0.0, 0.0, 0, 0);
    for (u, v, a) in pairs {
        let pred = t.apply_vector(u);
        if pred.iter().all(|x| *x == 0.0) || v.iter().all(|x| *x == 0.0) {
            skipped += 1;
            continue;
        }
        num += a * cosine(&pred, v);
        den += a;
        used += 1;
    }
    let mean = if den > 0.0 { num / den } else { f64::NAN };
    (mean, used, skipped)
}

/// `v_f = A u_f` for every key.
pub fn apply(transform: &Transform, context_vectors: &EmbeddingStore) -> Result<EmbeddingStore> {
    if context_vectors.dim() != transform.dim() {
        return Err(Error::DimensionMismatch {
            expected: transform.dim(),
            found: context_vectors.dim(),
        });
    }
    context_vectors
        .map_vectors(|u| transform.apply_vector(u))
        .map(|s| s.with_kind(StoreKind::Feature))
}

/// Weighted mean cosine of `A u_w` against `v_w`, on the train split and,
/// when `holdout_fraction > 0`, on the held-out split.
pub fn fit_report(
    transform: &Transform,
    word_vectors: &EmbeddingStore,
    context_vectors: &EmbeddingStore,
    counts: &Vocabulary,
    holdout_fraction: f64,
    seed: u64,
) -> Result<EvalReport> {
    if !(0.0..1.0).contains(&holdout_fraction) {
        return Err(Error::invalid("holdout fraction must be in [0, 1)"));
    }
    if word_vectors.dim() != transform.dim() || context_vectors.dim() != transform.dim() {
        return Err(Error::DimensionMismatch {
            expected: transform.dim(),
            found: word_vectors.dim().max(context_vectors.dim()),
        });
    }
    let weight = transform.meta.weighting;
    let mut report = EvalReport::new();
    let splits: &[(&str, bool)] = if holdout_fraction > 0.0 {
        &[("train", false), ("holdout", true)]
    } else {
        &[("train", false)]
    };
    for &(name, held) in splits {
        let keep = |k: &str| in_holdout(k, holdout_fraction, seed) == held;
        let pairs = training_pairs(word_vectors, context_vectors, counts, weight, &keep);
        let (mean, used, skipped) =
            weighted_mean_cosine(transform, pairs.iter().map(|p| (p.u, p.v, p.alpha)));
        report.push("pairs", name, used as f64);
        report.push("skipped_zero", name, skipped as f64);
        if used > 0 {
            report.push("mean_cosine", name, mean);
        } else {
            warn!("no usable pairs in the {name} split");
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_vecs(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect()
    }

    fn stores(us: &[Vec<f64>], vs: &[Vec<f64>]) -> (EmbeddingStore, EmbeddingStore) {
        let d = us[0].len();
        let mut u = EmbeddingStore::new(d, StoreKind::Feature).unwrap();
        let mut v = EmbeddingStore::new(d, StoreKind::Word).unwrap();
        for (i, (a, b)) in us.iter().zip(vs).enumerate() {
            u.insert(format!("w{i}"), a).unwrap();
            v.insert(format!("w{i}"), b).unwrap();
        }
        (v, u)
    }

    fn counts(n: usize, f: impl Fn(usize) -> u64) -> Vocabulary {
        Vocabulary::from_counts((0..n).map(|i| (format!("w{i}"), f(i))).collect(), 0)
    }

    #[test]
    fn weight_functions() {
        assert_eq!(WeightFunction::Uniform.weight(0), 1.0);
        assert_eq!(WeightFunction::HardThreshold(5).weight(4), 0.0);
        assert_eq!(WeightFunction::HardThreshold(5).weight(5), 1.0);
        assert_eq!(WeightFunction::LogCount.weight(0), 0.0);
        assert_eq!(WeightFunction::LogCount.weight(1), 0.0);
        assert!((WeightFunction::LogCount.weight(100) - 100f64.ln()).abs() < 1e-15);
        for w in [WeightFunction::Uniform, WeightFunction::HardThreshold(7), WeightFunction::LogCount] {
            let ws: Vec<f64> = (0..50).map(|c| w.weight(c)).collect();
            assert!(ws.windows(2).all(|p| p[0] <= p[1]), "{w} not monotone");
        }
        assert_eq!("threshold:1000".parse::<WeightFunction>().unwrap(), WeightFunction::HardThreshold(1000));
        assert_eq!("log".parse::<WeightFunction>().unwrap(), WeightFunction::LogCount);
        assert!("threshold:0".parse::<WeightFunction>().is_err());
        assert!("cubic".parse::<WeightFunction>().is_err());
    }

    #[test]
    fn identity_from_exact_fit() {
        let vs = random_vecs(30, 6, 1);
        let (v, u) = stores(&vs, &vs);
        let out = learn_transform(&v, &u.with_kind(StoreKind::Feature), &counts(30, |_| 1), WeightFunction::Uniform, 0.0).unwrap();
        let m = out.transform.matrix();
        let err: f64 = (0..6)
            .flat_map(|i| (0..6).map(move |j| (i, j)))
            .map(|(i, j)| (m[i * 6 + j] - if i == j { 1.0 } else { 0.0 }).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-8, "{err}");
        assert!((out.train_cosine - 1.0).abs() < 1e-9);
    }

    #[test]
    fn threshold_with_no_qualifying_counts_fails() {
        let vs = random_vecs(10, 3, 2);
        let (v, u) = stores(&vs, &vs);
        let err = learn_transform(&v, &u, &counts(10, |_| 5), WeightFunction::HardThreshold(6), 1e-8)
            .unwrap_err();
        assert!(err.to_string().contains("no training pairs"));
    }

    #[test]
    fn singular_without_ridge_is_reported() {
        // all context vectors on a line
        let us: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 + 1.0, 0.0]).collect();
        let vs = random_vecs(5, 2, 3);
        let (v, u) = stores(&us, &vs);
        let err = learn_transform(&v, &u, &counts(5, |_| 1), WeightFunction::Uniform, 0.0).unwrap_err();
        assert!(err.to_string().contains("conditioning ridge"), "{err}");
        assert!(learn_transform(&v, &u, &counts(5, |_| 1), WeightFunction::Uniform, 1e-6).is_ok());
    }

    #[test]
    fn dimension_mismatch() {
        let (v, _) = stores(&random_vecs(4, 3, 1), &random_vecs(4, 3, 2));
        let (_, u) = stores(&random_vecs(4, 2, 1), &random_vecs(4, 2, 2));
        assert!(matches!(
            learn_transform(&v, &u, &counts(4, |_| 1), WeightFunction::Uniform, 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(apply(&Transform::identity(3), &u).is_err());
    }

    #[test]
    fn apply_examples() {
        let mut u = EmbeddingStore::new(2, StoreKind::Feature).unwrap();
        u.insert("f", &[1.0, 3.0]).unwrap();
        assert_eq!(apply(&Transform::identity(2), &u).unwrap(), u);
        let two = Transform::from_matrix(2, vec![2.0, 0.0, 0.0, 2.0], Transform::identity(2).meta).unwrap();
        assert_eq!(apply(&two, &u).unwrap().get("f"), Some(&[2.0, 6.0][..]));
    }

    #[test]
    fn apply_is_linear() {
        let m: Vec<f64> = random_vecs(1, 16, 9).remove(0);
        let t = Transform::from_matrix(4, m, Transform::identity(4).meta).unwrap();
        let xs = random_vecs(2, 4, 10);
        let (a, b) = (0.7, -2.3);
        let combo: Vec<f64> = xs[0].iter().zip(&xs[1]).map(|(x, y)| a * x + b * y).collect();
        let lhs = t.apply_vector(&combo);
        let (p, q) = (t.apply_vector(&xs[0]), t.apply_vector(&xs[1]));
        for i in 0..4 {
            assert!((lhs[i] - (a * p[i] + b * q[i])).abs() < 1e-10);
        }
    }

    #[test]
    fn fit_report_exact_and_holdout() {
        let vs = random_vecs(40, 4, 4);
        let (v, u) = stores(&vs, &vs);
        let c = counts(40, |_| 3);
        let t = learn_transform(&v, &u, &c, WeightFunction::Uniform, 0.0).unwrap().transform;
        let r = fit_report(&t, &v, &u, &c, 0.25, 7).unwrap();
        assert!((r.get("mean_cosine", "train").unwrap() - 1.0).abs() < 1e-9);
        assert!((r.get("mean_cosine", "holdout").unwrap() - 1.0).abs() < 1e-9);
        let n_train = r.get("pairs", "train").unwrap();
        let n_hold = r.get("pairs", "holdout").unwrap();
        assert_eq!(n_train + n_hold, 40.0);
        assert!(n_hold > 0.0);

        let zero = Transform::from_matrix(4, vec![0.0; 16], t.meta).unwrap();
        let r = fit_report(&zero, &v, &u, &c, 0.0, 0).unwrap();
        assert_eq!(r.get("skipped_zero", "train"), Some(40.0));
        assert_eq!(r.get("mean_cosine", "train"), None);
        assert!(fit_report(&t, &v, &u, &c, 1.0, 0).is_err());
    }

    #[test]
    fn holdout_split_is_deterministic() {
        let keys: Vec<String> = (0..1000).map(|i| format!("k{i}")).collect();
        let a: Vec<bool> = keys.iter().map(|k| in_holdout(k, 0.2, 5)).collect();
        let b: Vec<bool> = keys.iter().map(|k| in_holdout(k, 0.2, 5)).collect();
        assert_eq!(a, b);
        let frac = a.iter().filter(|x| **x).count() as f64 / 1000.0;
        assert!((frac - 0.2).abs() < 0.05, "{frac}");
        assert!(keys.iter().all(|k| !in_holdout(k, 0.0, 5)));
    }

    #[test]
    fn file_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.alct");
        let m = random_vecs(1, 9, 3).remove(0);
        let t = Transform::from_matrix(
            3,
            m,
            TransformMeta { weighting: WeightFunction::HardThreshold(1000), window_size: 10, fingerprint: 42 },
        )
        .unwrap();
        t.save(&path).unwrap();
        let back = Transform::load(&path, Some(3)).unwrap();
        assert_eq!(back, t);
        assert!(back.matrix().iter().zip(t.matrix()).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(matches!(Transform::load(&path, Some(4)), Err(Error::DimensionMismatch { .. })));

        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..40]).unwrap();
        match Transform::load(&path, None) {
            Err(Error::Truncated { offset, .. }) => assert_eq!(offset, 40),
            other => panic!("{other:?}"),
        }
        let mut bad = bytes.clone();
        bad[4] = 9;
        std::fs::write(&path, &bad).unwrap();
        assert!(Transform::load(&path, None).unwrap_err().to_string().contains("version"));
    }
}
