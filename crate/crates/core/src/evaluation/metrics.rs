use rayon::prelude::*;

use crate::embedstore::EmbeddingStore;
use crate::error::{Error, Result};
use crate::evaluation::report::EvalReport;
use crate::linalg::cosine;

/// Ranks starting at 1; tied values share the average of their ranks.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with average-rank tie handling.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::invalid(format!(
            "undefined correlation: lengths differ ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::invalid("undefined correlation: fewer than two points"));
    }
    if xs.iter().chain(ys).any(|v| v.is_nan()) {
        return Err(Error::invalid("undefined correlation: NaN input"));
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
        .ok_or_else(|| Error::invalid("undefined correlation: zero rank variance"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    /// per induced key, rank of its reference vector (1 = nearest)
    pub ranks: Vec<(String, usize)>,
    pub mrr: f64,
    pub median_rank: f64,
}

impl RetrievalResult {
    pub fn to_report(&self, condition: &str) -> EvalReport {
        let mut r = EvalReport::new();
        r.push("mrr", condition, self.mrr);
        r.push("median_rank", condition, self.median_rank);
        r.push("queries", condition, self.ranks.len() as f64);
        r
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// For every induced key, the rank of the reference vector under that key
/// among all reference vectors ordered by cosine similarity to the induced
/// vector. Equal similarities are ordered by key.
pub fn rank_retrieval(induced: &EmbeddingStore, reference: &EmbeddingStore) -> Result<RetrievalResult> {
    if induced.dim() != reference.dim() {
        return Err(Error::DimensionMismatch {
            expected: reference.dim(),
            found: induced.dim(),
        });
    }
    let missing: Vec<&str> = induced.keys().filter(|k| !reference.contains(k)).collect();
    if !missing.is_empty() {
        return Err(Error::invalid(format!(
            "induced keys without a reference vector: {}",
            missing.join(", ")
        )));
    }
    if induced.is_empty() {
        return Err(Error::invalid("no induced vectors to rank"));
    }
    let ranks: Vec<(String, usize)> = (0..induced.len())
        .into_par_iter()
        .map(|i| {
            let key = induced.key(i);
            let q = induced.row(i);
            let target = cosine(q, reference.get(key).unwrap());
            let ahead = reference
                .iter()
                .filter(|(k, v)| {
                    let s = cosine(q, v);
                    s > target || (s == target && *k < key)
                })
                .count();
            (key.to_owned(), ahead + 1)
        })
        .collect();
    let mrr = ranks.iter().map(|(_, r)| 1.0 / *r as f64).sum::<f64>() / ranks.len() as f64;
    let mut rs: Vec<f64> = ranks.iter().map(|(_, r)| *r as f64).collect();
    let median_rank = median(&mut rs);
    Ok(RetrievalResult {
        ranks,
        mrr,
        median_rank,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedstore::StoreKind;

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        // ranks (1,2,3,4) vs (2,1,4,3): 1 - 6*4/(4*15) = 0.6
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]).unwrap() - 0.6).abs() < 1e-12);
        assert!(spearman(&[1.0], &[1.0]).is_err());
        assert!(spearman(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(spearman(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn ties_get_average_ranks() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), [3.5, 1.0, 3.5, 2.0]);
    }

    fn store(rows: &[(&str, [f64; 2])]) -> EmbeddingStore {
        let mut s = EmbeddingStore::new(2, StoreKind::Word).unwrap();
        for (k, v) in rows {
            s.insert(*k, v).unwrap();
        }
        s
    }

    #[test]
    fn self_retrieval_is_perfect() {
        let r = store(&[("a", [1.0, 0.0]), ("b", [0.0, 1.0]), ("c", [-1.0, 0.2])]);
        let res = rank_retrieval(&r, &r).unwrap();
        assert_eq!(res.mrr, 1.0);
        assert_eq!(res.median_rank, 1.0);
    }

    #[test]
    fn second_nearest_gets_rank_two() {
        let r = store(&[("a", [1.0, 0.0]), ("b", [0.0, 1.0]), ("c", [-1.0, 0.0])]);
        let induced = store(&[("a", [0.6, 0.8])]);
        let res = rank_retrieval(&induced, &r).unwrap();
        assert_eq!(res.ranks, [("a".to_string(), 2)]);
        assert_eq!(res.mrr, 0.5);
    }

    #[test]
    fn ties_break_by_key() {
        let r = store(&[("b", [1.0, 0.0]), ("a", [1.0, 0.0])]);
        let induced = store(&[("b", [1.0, 0.0]), ("a", [2.0, 0.0])]);
        let res = rank_retrieval(&induced, &r).unwrap();
        assert_eq!(res.ranks, [("b".to_string(), 2), ("a".to_string(), 1)]);
        assert_eq!(res.median_rank, 1.5);
    }

    #[test]
    fn missing_reference_is_listed() {
        let r = store(&[("a", [1.0, 0.0])]);
        let induced = store(&[("zz", [1.0, 0.0]), ("yy", [1.0, 0.0])]);
        let err = rank_retrieval(&induced, &r).unwrap_err().to_string();
        assert!(err.contains("zz") && err.contains("yy"), "{err}");
    }
}
