//! One-vs-rest L2-regularized logistic regression with the regularization
//! strength picked by an inner cross-validation, and nested cross-validated
//! accuracy.
//!
//! Each binary problem minimizes
//! `mean_i log(1 + exp(-y_i (w.x_i + b))) + |w|^2 / (2 C n)`
//! (the intercept is not penalized) by gradient descent with
//! Barzilai-Borwein steps and Armijo backtracking, so the objective never
//! increases between epochs.

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evaluation::report::EvalReport;
use crate::linalg::dot;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierOptions {
    /// outer folds for the accuracy estimate
    pub folds: usize,
    /// folds used to choose `C` on each training portion
    pub inner_folds: usize,
    pub reg_grid: Vec<f64>,
    pub tolerance: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for ClassifierOptions {
    fn default() -> Self {
        ClassifierOptions {
            folds: 10,
            inner_folds: 3,
            reg_grid: (-3..=3).map(|e| 10f64.powi(e)).collect(),
            tolerance: 1e-6,
            max_epochs: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BinaryFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// objective before the first epoch and after every epoch
    pub loss_history: Vec<f64>,
    pub converged: bool,
}

fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Parameters are `[w..., b]`.
fn objective(x: &[&[f64]], y: &[f64], c: f64, p: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let d = p.len() - 1;
    let n = x.len() as f64;
    let (w, b) = (&p[..d], p[d]);
    let mut loss = 0.0;
    let mut g = vec![0.0; d + 1];
    for (xi, &yi) in x.iter().zip(y) {
        let m = yi * (dot(w, xi) + b);
        loss += log1p_exp(-m);
        let coef = -yi * sigmoid(-m) / n;
        for (gj, xj) in g[..d].iter_mut().zip(*xi) {
            *gj += coef * xj;
        }
        g[d] += coef;
    }
    let reg = 1.0 / (c * n);
    for (gj, wj) in g[..d].iter_mut().zip(w) {
        *gj += reg * wj;
    }
    if let Some(out) = grad {
        out.copy_from_slice(&g);
    }
    loss / n + 0.5 * reg * dot(w, w)
}

/// Fits one binary problem; `y` holds `+1` / `-1`.
pub fn fit_binary(x: &[&[f64]], y: &[f64], c: f64, tolerance: f64, max_epochs: usize) -> BinaryFit {
    let d = x.first().map_or(0, |r| r.len());
    let mut p = vec![0.0; d + 1];
    let mut g = vec![0.0; d + 1];
    let mut f = objective(x, y, c, &p, Some(&mut g));
    let mut history = vec![f];
    let mut step = 1.0;
    let mut converged = false;
    let mut trial = vec![0.0; d + 1];
    let mut g_new = vec![0.0; d + 1];
    for _ in 0..max_epochs {
        let gnorm2 = dot(&g, &g);
        if gnorm2.sqrt() < tolerance {
            converged = true;
            break;
        }
        let mut t = step;
        let mut accepted = false;
        for _ in 0..60 {
            for ((q, pj), gj) in trial.iter_mut().zip(&p).zip(&g) {
                *q = pj - t * gj;
            }
            let f_new = objective(x, y, c, &trial, Some(&mut g_new));
            if f_new <= f - 1e-4 * t * gnorm2 {
                // Barzilai-Borwein guess for the next step
                let s: Vec<f64> = trial.iter().zip(&p).map(|(a, b)| a - b).collect();
                let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &yv);
                step = if sy > 0.0 { dot(&s, &s) / sy } else { t * 2.0 };
                std::mem::swap(&mut p, &mut trial);
                std::mem::swap(&mut g, &mut g_new);
                f = f_new;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        history.push(f);
        if !accepted {
            // no decrease representable in floating point
            converged = true;
            break;
        }
    }
    let bias = p.pop().unwrap();
    BinaryFit {
        weights: p,
        bias,
        loss_history: history,
        converged,
    }
}

#[derive(Debug, Clone)]
pub struct LinearClassifier {
    /// sorted class labels
    pub classes: Vec<String>,
    /// one `(weights, bias)` per class
    pub models: Vec<(Vec<f64>, f64)>,
    pub c: f64,
}

impl LinearClassifier {
    pub fn fit(x: &[&[f64]], y: &[&str], c: f64, opts: &ClassifierOptions) -> Result<Self> {
        let mut classes: Vec<String> = y.iter().map(|s| s.to_string()).collect();
        classes.sort();
        classes.dedup();
        Self::fit_classes(x, y, classes, c, opts)
    }

    fn fit_classes(
        x: &[&[f64]],
        y: &[&str],
        classes: Vec<String>,
        c: f64,
        opts: &ClassifierOptions,
    ) -> Result<Self> {
        let mut models = Vec::with_capacity(classes.len());
        for class in &classes {
            let yb: Vec<f64> = y.iter().map(|l| if l == class { 1.0 } else { -1.0 }).collect();
            let fit = fit_binary(x, &yb, c, opts.tolerance, opts.max_epochs);
            if !fit.converged {
                log::debug!("class {class}: stopped after {} epochs", opts.max_epochs);
            }
            models.push((fit.weights, fit.bias));
        }
        Ok(LinearClassifier { classes, models, c })
    }

    /// Class with the highest score; ties go to the earlier (smaller) label.
    pub fn predict(&self, x: &[f64]) -> &str {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, (w, b)) in self.models.iter().enumerate() {
            let s = dot(w, x) + b;
            if s > best_score {
                best = i;
                best_score = s;
            }
        }
        &self.classes[best]
    }

    pub fn accuracy(&self, x: &[&[f64]], y: &[&str]) -> f64 {
        let hits = x.iter().zip(y).filter(|(xi, yi)| self.predict(xi) == **yi).count();
        hits as f64 / x.len().max(1) as f64
    }
}

/// Stratified fold index per example, seeded.
pub fn stratified_folds(y: &[&str], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut classes: Vec<&str> = y.to_vec();
    classes.sort();
    classes.dedup();
    let mut fold = vec![0; y.len()];
    let mut next = 0;
    for c in classes {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            fold[i] = next % k;
            next += 1;
        }
    }
    fold
}

fn split<T: Copy>(v: &[T], fold: &[usize], k: usize) -> (Vec<T>, Vec<T>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (x, &f) in v.iter().zip(fold) {
        if f == k {
            test.push(*x);
        } else {
            train.push(*x);
        }
    }
    (train, test)
}

fn cv_accuracy(
    x: &[&[f64]],
    y: &[&str],
    classes: &[String],
    c: f64,
    folds: usize,
    seed: u64,
    opts: &ClassifierOptions,
) -> Result<f64> {
    let fold = stratified_folds(y, folds, seed);
    let mut hits = 0.0;
    for k in 0..folds {
        let (xtr, xte) = split(x, &fold, k);
        let (ytr, yte) = split(y, &fold, k);
        if xte.is_empty() || xtr.is_empty() {
            continue;
        }
        let clf = LinearClassifier::fit_classes(&xtr, &ytr, classes.to_vec(), c, opts)?;
        hits += clf.accuracy(&xte, &yte) * xte.len() as f64;
    }
    Ok(hits / x.len() as f64)
}

/// Picks the grid value with the best inner CV accuracy (the smallest such
/// `C` on ties) and refits on all of `x`.
fn select_and_fit(
    x: &[&[f64]],
    y: &[&str],
    classes: &[String],
    opts: &ClassifierOptions,
    seed: u64,
) -> Result<LinearClassifier> {
    let folds = opts.inner_folds.min(x.len());
    let mut best = (f64::NEG_INFINITY, opts.reg_grid[0]);
    if folds >= 2 {
        let scores: Vec<f64> = opts
            .reg_grid
            .par_iter()
            .map(|&c| cv_accuracy(x, y, classes, c, folds, seed, opts))
            .collect::<Result<_>>()?;
        for (&c, s) in opts.reg_grid.iter().zip(scores) {
            if s > best.0 || (s == best.0 && c < best.1) {
                best = (s, c);
            }
        }
    }
    LinearClassifier::fit_classes(x, y, classes.to_vec(), best.1, opts)
}

fn check_inputs(x: &[&[f64]], y: &[&str], opts: &ClassifierOptions) -> Result<Vec<String>> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("{} rows but {} labels", x.len(), y.len())));
    }
    if let Some(d) = x.first().map(|r| r.len()) {
        if let Some(r) = x.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: r.len(),
            });
        }
    }
    if opts.reg_grid.is_empty() || opts.reg_grid.iter().any(|c| !(*c > 0.0)) {
        return Err(Error::invalid("regularization grid must be non-empty and positive"));
    }
    if opts.folds < 2 || opts.inner_folds < 2 {
        return Err(Error::invalid("need at least two folds"));
    }
    let mut classes: Vec<String> = y.iter().map(|s| s.to_string()).collect();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::invalid("need at least two classes"));
    }
    if x.len() < opts.folds {
        return Err(Error::invalid(format!(
            "{} examples cannot fill {} folds",
            x.len(),
            opts.folds
        )));
    }
    Ok(classes)
}

/// Nested cross-validated accuracy plus a classifier fit on all the data.
pub fn train_linear_classifier(
    x: &[&[f64]],
    y: &[&str],
    opts: &ClassifierOptions,
) -> Result<(LinearClassifier, EvalReport)> {
    let classes = check_inputs(x, y, opts)?;
    let fold = stratified_folds(y, opts.folds, opts.seed);
    let outer: Vec<(f64, usize, f64)> = (0..opts.folds)
        .into_par_iter()
        .map(|k| -> Result<(f64, usize, f64)> {
            let (xtr, xte) = split(x, &fold, k);
            let (ytr, yte) = split(y, &fold, k);
            let clf = select_and_fit(&xtr, &ytr, &classes, opts, opts.seed.wrapping_add(1 + k as u64))?;
            Ok((clf.accuracy(&xte, &yte) * xte.len() as f64, xte.len(), clf.c))
        })
        .collect::<Result<_>>()?;
    let hits: f64 = outer.iter().map(|o| o.0).sum();
    let total: usize = outer.iter().map(|o| o.1).sum();
    let clf = select_and_fit(x, y, &classes, opts, opts.seed)?;
    let cond = format!("cv{}", opts.folds);
    let mut report = EvalReport::new();
    report.push("accuracy", cond.clone(), hits / total as f64);
    report.push("examples", cond.clone(), x.len() as f64);
    report.push("classes", cond, classes.len() as f64);
    report.push("reg_c", "final", clf.c);
    if x.len() < 10 * classes.len() {
        warn!("few examples per class; the accuracy estimate is noisy");
    }
    Ok((clf, report))
}
