use crate::context::FeatureContext;
use crate::embedstore::EmbeddingStore;
use crate::error::{Error, Result};
use crate::linalg::{axpy, cosine};
use crate::transform::Transform;

/// Induces an embedding for the context line (sum of its word vectors,
/// excluding a `<feat>`-marked span, mapped through `transform`) and
/// returns the candidate sense whose feature vector is closest in cosine.
/// Equal similarities go to the lexicographically smaller key.
pub fn disambiguate(
    context_line: &str,
    candidates: &[&str],
    feature_vectors: &EmbeddingStore,
    transform: &Transform,
    word_vectors: &EmbeddingStore,
) -> Result<String> {
    let d = transform.dim();
    for s in [feature_vectors, word_vectors] {
        if s.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: s.dim(),
            });
        }
    }
    if candidates.is_empty() {
        return Err(Error::invalid("no candidate senses"));
    }
    let ctx = FeatureContext::parse("", context_line);
    let mut u = vec![0.0; d];
    let mut used = 0;
    for (i, tok) in ctx.tokens.iter().enumerate() {
        if ctx.span.as_ref().is_some_and(|r| r.contains(&i)) {
            continue;
        }
        if let Some(v) = word_vectors.get(tok) {
            axpy(1.0, v, &mut u);
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::invalid("empty context: no token has a word vector"));
    }
    let induced = transform.apply_vector(&u);
    let mut best: Option<(&str, f64)> = None;
    for &c in candidates {
        let v = feature_vectors
            .get(c)
            .ok_or_else(|| Error::invalid(format!("unknown sense {c:?}")))?;
        let s = cosine(&induced, v);
        best = match best {
            Some((k, b)) if b > s || (b == s && k <= c) => Some((k, b)),
            _ => Some((c, s)),
        };
    }
    Ok(best.unwrap().0.to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedstore::StoreKind;

    fn stores() -> (EmbeddingStore, EmbeddingStore) {
        let mut w = EmbeddingStore::new(2, StoreKind::Word).unwrap();
        w.insert("river", &[1.0, 0.0]).unwrap();
        w.insert("money", &[0.0, 1.0]).unwrap();
        w.insert("bank", &[-5.0, -5.0]).unwrap();
        let mut f = EmbeddingStore::new(2, StoreKind::Feature).unwrap();
        f.insert("bank_1", &[0.9, 0.1]).unwrap();
        f.insert("bank_2", &[0.1, 0.9]).unwrap();
        (w, f)
    }

    #[test]
    fn picks_nearest_sense() {
        let (w, f) = stores();
        let t = Transform::identity(2);
        let c = ["bank_1", "bank_2"];
        assert_eq!(disambiguate("the river <feat>bank</feat>", &c, &f, &t, &w).unwrap(), "bank_1");
        assert_eq!(disambiguate("money <feat>bank</feat> money", &c, &f, &t, &w).unwrap(), "bank_2");
    }

    #[test]
    fn ties_go_to_smaller_key() {
        let (w, mut f) = stores();
        f.insert("a_dup", &[0.9, 0.1]).unwrap();
        let t = Transform::identity(2);
        let got = disambiguate("river", &["bank_1", "a_dup"], &f, &t, &w).unwrap();
        assert_eq!(got, "a_dup");
    }

    #[test]
    fn empty_context_is_an_error() {
        let (w, f) = stores();
        let t = Transform::identity(2);
        let err = disambiguate("<feat>bank</feat> zzz", &["bank_1"], &f, &t, &w).unwrap_err();
        assert!(err.to_string().contains("empty context"));
    }
}
