use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use alacarte::{EmbeddingStore, StoreKind, Transform};
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alacarte"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap()
}

#[test]
fn vocab_golden_and_rerun() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("vocab.tsv");
    let corpus = fixture("corpus.txt");
    ok(&["vocab", "--corpus", p(&corpus), "--min-count", "1", "--out", p(&out)]);
    let first = read(&out);
    assert_eq!(
        first,
        "the\t4\na\t2\ncat\t2\ndog\t2\non\t2\nsat\t2\nand\t1\nlog\t1\nmat\t1\n"
    );
    ok(&["vocab", "--corpus", p(&corpus), "--min-count", "1", "--out", p(&out)]);
    assert_eq!(read(&out), first);
    ok(&["vocab", "--corpus", p(&corpus), "--min-count", "2", "--out", p(&out)]);
    assert_eq!(read(&out).lines().count(), 6);
}

#[test]
fn vocab_threshold_above_every_count_fails() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "vocab",
        "--corpus",
        p(&fixture("corpus.txt")),
        "--out",
        p(&dir.path().join("v.tsv")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least 100"));
}

#[test]
fn user_errors_exit_with_one() {
    assert_eq!(run(&["vocab", "--bogus"]).status.code(), Some(1));
    let missing = run(&["vocab", "--corpus", "/nonexistent/x", "--out", "/tmp/x"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/nonexistent/x"));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn help_shows_defaults() {
    let help = ok(&["contexts", "--help"]);
    assert!(help.contains("[default: words]"));
    let help = ok(&["learn", "--help"]);
    for d in ["[default: 1000]", "[default: 10]", "[default: uniform]", "[default: 0]"] {
        assert!(help.contains(d), "{d}");
    }
}

#[test]
fn word_contexts_golden() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("u.txt");
    ok(&[
        "contexts",
        "--corpus",
        p(&fixture("corpus.txt")),
        "--vectors",
        p(&fixture("vectors.txt")),
        "--out",
        p(&out),
    ]);
    let text = read(&out);
    // cat: (the+sat+on+the+mat + a+and+a+dog) / 2 = ((5,3) + (0,0)) / 2
    assert!(text.lines().any(|l| l == "cat 2.5 1.5"), "{text}");
    // dog: ((the+sat+on+the+log) + (a+cat+and+a)) / 2 = ((4,2) + (1,0)) / 2
    assert!(text.lines().any(|l| l == "dog 2.5 1"), "{text}");
    assert_eq!(text.lines().count(), 9);
    assert_eq!(text.lines().next().unwrap().split(' ').next(), Some("the"));
}

#[test]
fn ngram_contexts_respect_min_count() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("u2.txt");
    ok(&[
        "contexts",
        "--mode",
        "ngrams",
        "--n",
        "2",
        "--min-ngram-count",
        "2",
        "--corpus",
        p(&fixture("corpus.txt")),
        "--vectors",
        p(&fixture("vectors.txt")),
        "--out",
        p(&out),
    ]);
    let keys: Vec<String> = read(&out)
        .lines()
        .map(|l| l.split(' ').next().unwrap().to_owned())
        .collect();
    assert_eq!(keys, ["sat_on", "on_the"]);
}

#[test]
fn feature_contexts_keep_keys() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("uf.txt");
    ok(&[
        "contexts",
        "--mode",
        "features",
        "--features",
        p(&fixture("features.tsv")),
        "--vectors",
        p(&fixture("vectors.txt")),
        "--out",
        p(&out),
    ]);
    let store = EmbeddingStore::load_text(&out, Some(2), StoreKind::Feature).unwrap();
    assert_eq!(store.keys().collect::<Vec<_>>(), ["cat_pet", "dog_pet", "number"]);
    // marked span excluded, averaged over the two lines
    assert_eq!(store.get("cat_pet").unwrap(), [2.5, 1.5]);
    assert_eq!(store.get("number").unwrap(), [0.0, 0.0]);
}

#[test]
fn learn_then_induce_matches_library() {
    let dir = TempDir::new().unwrap();
    let u = dir.path().join("u.txt");
    let a = dir.path().join("a.bin");
    let report = dir.path().join("fit.tsv");
    let induced = dir.path().join("induced.txt");
    let vectors = fixture("vectors.txt");
    ok(&["contexts", "--corpus", p(&fixture("corpus.txt")), "--vectors", p(&vectors), "--out", p(&u)]);
    ok(&["learn", "--vectors", p(&vectors), "--contexts", p(&u), "--out", p(&a), "--report", p(&report)]);
    let rep = read(&report);
    assert!(rep.contains("pairs\ttrain\t9"), "{rep}");
    ok(&[
        "induce",
        "--transform",
        p(&a),
        "--features",
        p(&fixture("features.tsv")),
        "--vectors",
        p(&vectors),
        "--out",
        p(&induced),
    ]);
    let t = Transform::load(&a, Some(2)).unwrap();
    let got = EmbeddingStore::load_text(&induced, Some(2), StoreKind::Feature).unwrap();
    let want = t.apply_vector(&[2.5, 1.5]);
    let row = got.get("cat_pet").unwrap();
    for j in 0..2 {
        assert!((row[j] - want[j]).abs() <= 1e-5 * want[j].abs().max(1.0));
    }
}

#[test]
fn learn_needs_counts_for_log_weighting() {
    let dir = TempDir::new().unwrap();
    let v = fixture("vectors.txt");
    let out = run(&[
        "learn",
        "--vectors",
        p(&v),
        "--contexts",
        p(&v),
        "--weighting",
        "log",
        "--out",
        p(&dir.path().join("a.bin")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn docs_golden() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("docs.txt");
    let report = ok(&[
        "docs",
        "--store",
        p(&fixture("vectors.txt")),
        "--store",
        p(&fixture("bigrams.txt")),
        "--order",
        "2",
        "--documents",
        p(&fixture("docs.tsv")),
        "--out",
        p(&out),
    ]);
    assert!(report.contains("coverage\tn=1\t1\n"), "{report}");
    let text = read(&out);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 20);
    // sat mat cat on on sat: unigrams (4, 7), no known bigram
    assert_eq!(rows[0], "doc0 4 7 0 0");
    // cat sat the the mat mat: unigrams (7, 2), cat_sat (0, 2) halved
    assert_eq!(rows[2], "doc2 7 2 0 1");
    let labels = read(&dir.path().join("labels.txt"));
    assert_eq!(labels.lines().take(3).collect::<Vec<_>>(), ["pos", "neg", "pos"]);
}

#[test]
fn classify_fixture_documents() {
    let dir = TempDir::new().unwrap();
    let m = dir.path().join("docs.txt");
    ok(&[
        "docs",
        "--store",
        p(&fixture("vectors.txt")),
        "--order",
        "1",
        "--documents",
        p(&fixture("docs.tsv")),
        "--out",
        p(&m),
    ]);
    let report = ok(&["classify", "--matrix", p(&m), "--folds", "5"]);
    let acc: f64 = report
        .lines()
        .find(|l| l.starts_with("accuracy\t"))
        .and_then(|l| l.rsplit('\t').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(acc >= 0.9, "{report}");
}

#[test]
fn eval_sim_golden() {
    let v = fixture("vectors.txt");
    let report = ok(&["eval-sim", "--pairs", p(&fixture("pairs.tsv")), "--vectors", p(&v)]);
    // sims (0.707, 0, 0, 0) rank (4, 2, 2, 2); human rank (3, 2, 4, 1):
    // Pearson of ranks = 1 / sqrt(15)
    assert!(report.contains("spearman\tall\t0.258199\n"), "{report}");
    assert!(report.contains("pairs\tall\t4\n"));
}

#[test]
fn eval_rank_golden() {
    let v = fixture("vectors.txt");
    let report = ok(&["eval-rank", "--induced", p(&v), "--reference", p(&v)]);
    // collinear groups {a, mat, the} and {cat, on} tie at cosine 1 and are
    // ordered by key: ranks the 3, mat 2, on 2, all others 1
    assert!(report.contains("mrr\tall\t0.814815\n"), "{report}");
    assert!(report.contains("median_rank\tall\t1\n"));
}

#[test]
fn wsd_predictions() {
    let dir = TempDir::new().unwrap();
    let t = dir.path().join("id.bin");
    Transform::identity(2).save(&t).unwrap();
    let out = dir.path().join("pred.txt");
    let v = fixture("vectors.txt");
    let report = ok(&[
        "wsd",
        "--vectors",
        p(&v),
        "--transform",
        p(&t),
        "--senses",
        p(&v),
        "--queries",
        p(&fixture("wsd.tsv")),
        "--out",
        p(&out),
    ]);
    assert_eq!(read(&out), "cat\ndog\n");
    assert!(report.contains("accuracy\tall\t1\n"), "{report}");
}

#[test]
fn synth_is_seeded() {
    let dir = TempDir::new().unwrap();
    let c = dir.path().join("c.txt");
    let v = dir.path().join("v.txt");
    let args = |seed: &'static str| {
        vec![
            "synth".to_string(),
            "--dim".into(),
            "4".into(),
            "--vocab-size".into(),
            "30".into(),
            "--contexts".into(),
            "50".into(),
            "--seed".into(),
            seed.into(),
            "--out-corpus".into(),
            p(&c).into(),
            "--out-vectors".into(),
            p(&v).into(),
        ]
    };
    let a: Vec<String> = args("3");
    ok(&a.iter().map(String::as_str).collect::<Vec<_>>());
    let first = (read(&c), read(&v));
    assert_eq!(first.0.lines().count(), 50);
    assert_eq!(first.1.lines().count(), 30);
    ok(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!((read(&c), read(&v)), first);
    let b: Vec<String> = args("4");
    ok(&b.iter().map(String::as_str).collect::<Vec<_>>());
    assert_ne!(read(&c), first.0);
}
