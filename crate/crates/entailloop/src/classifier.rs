//! Ridge-penalized logistic regression, precision/recall/F evaluation, and a
//! paired approximate-randomization significance test.
//!
//! The trainer minimizes `sum_i [softplus(z_i) - y_i z_i] + (lambda/2)||w||^2`
//! (bias unpenalized) over features standardized by train-set mean and
//! standard deviation. Optimization is damped Newton with Armijo
//! backtracking, which makes the objective non-increasing across iterations
//! and the whole procedure deterministic.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::features::FeatureVector;

/// Per-feature standardization statistics.
///
/// Zero-variance features get a standard deviation of 1 so they standardize
/// to a constant zero column and keep weight zero throughout training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    /// Fits means and population standard deviations per column.
    pub fn fit(rows: &[Vec<f64>]) -> Standardizer {
        let n = rows.len().max(1);
        let d = rows.first().map(Vec::len).unwrap_or(0);
        let mut means = vec![0.0; d];
        for row in rows {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n as f64;
        }
        let mut stds = vec![0.0; d];
        for row in rows {
            for ((s, v), m) in stds.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut stds {
            *s = (*s / n as f64).sqrt();
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        Standardizer { means, stds }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// Trainer options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub ridge_lambda: f64,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub decision_threshold: f64,
    /// Reserved for stochastic trainers; the Newton trainer is deterministic.
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            ridge_lambda: 1e-8,
            max_iterations: 200,
            gradient_tolerance: 1e-6,
            decision_threshold: 0.5,
            seed: 42,
        }
    }
}

/// Trained logistic regression model.
///
/// Serializes as `{schema, weights, bias, ridge_lambda, means, stds}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub schema: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub ridge_lambda: f64,
    #[serde(rename = "means")]
    pub feature_means: Vec<f64>,
    #[serde(rename = "stds")]
    pub feature_stds: Vec<f64>,
}

const PROB_EPS: f64 = 1e-15;

fn sigmoid(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// `ln(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LinearModel {
    /// Entailment probability for a feature vector with the model's schema.
    /// Features with the same names in a different order are aligned by name.
    pub fn predict_proba(&self, x: &FeatureVector) -> Result<f64> {
        if x.names == self.schema {
            return Ok(self.predict_proba_values(&x.values));
        }
        let missing: Vec<&str> = self
            .schema
            .iter()
            .filter(|n| !x.names.contains(n))
            .map(String::as_str)
            .collect();
        let extra: Vec<&str> = x
            .names
            .iter()
            .filter(|n| !self.schema.contains(n))
            .map(String::as_str)
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(Error::SchemaMismatch {
                missing: missing.join(", "),
                extra: extra.join(", "),
            });
        }
        let values: Vec<f64> = self
            .schema
            .iter()
            .map(|n| {
                let idx = x.names.iter().position(|xn| xn == n).expect("name present");
                x.values[idx]
            })
            .collect();
        Ok(self.predict_proba_values(&values))
    }

    /// Entailment probability for raw values already in schema order.
    pub fn predict_proba_values(&self, values: &[f64]) -> f64 {
        let mut z = self.bias;
        for ((v, m), (s, w)) in values
            .iter()
            .zip(&self.feature_means)
            .zip(self.feature_stds.iter().zip(&self.weights))
        {
            z += w * (v - m) / s;
        }
        sigmoid(z)
    }

    pub fn standardizer(&self) -> Standardizer {
        Standardizer {
            means: self.feature_means.clone(),
            stds: self.feature_stds.clone(),
        }
    }

    /// Saves the model as JSON; loading reproduces predictions exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("model serializes");
        std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<LinearModel> {
        let content =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&content).map_err(|e| Error::Data(format!("invalid model JSON: {e}")))
    }
}

/// Value of the regularized objective at `(weights, bias)` on raw rows.
pub fn objective(weights: &[f64], bias: f64, rows: &[Vec<f64>], y: &[f64], lambda: f64) -> f64 {
    let mut total = 0.0;
    for (row, &yi) in rows.iter().zip(y) {
        let z = bias + dot(weights, row);
        total += softplus(z) - yi * z;
    }
    total + 0.5 * lambda * dot(weights, weights)
}

/// Analytic gradient of the regularized objective: `(d/dw, d/db)`.
pub fn gradient(
    weights: &[f64],
    bias: f64,
    rows: &[Vec<f64>],
    y: &[f64],
    lambda: f64,
) -> (Vec<f64>, f64) {
    let d = weights.len();
    let mut grad_w = vec![0.0; d];
    let mut grad_b = 0.0;
    for (row, &yi) in rows.iter().zip(y) {
        let resid = sigmoid(bias + dot(weights, row)) - yi;
        for (g, v) in grad_w.iter_mut().zip(row) {
            *g += resid * v;
        }
        grad_b += resid;
    }
    for (g, w) in grad_w.iter_mut().zip(weights) {
        *g += lambda * w;
    }
    (grad_w, grad_b)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` for symmetric positive-definite `A` (row-major, n x n)
/// by Cholesky factorization. Returns None when A is not positive definite.
fn solve_spd(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    // Forward then back substitution.
    let mut x = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            x[i] -= l[i * n + k] * x[k];
        }
        x[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            x[i] -= l[k * n + i] * x[k];
        }
        x[i] /= l[i * n + i];
    }
    Some(x)
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// Trains on pre-extracted feature vectors.
pub fn train(features: &[FeatureVector], labels: &[Label], opts: &TrainOptions) -> Result<LinearModel> {
    let (model, _) = train_with_trace(features, labels, opts)?;
    Ok(model)
}

/// Like [`train`], also returning the objective value at the start of every
/// optimizer iteration (standardized space).
pub fn train_with_trace(
    features: &[FeatureVector],
    labels: &[Label],
    opts: &TrainOptions,
) -> Result<(LinearModel, Vec<f64>)> {
    if features.is_empty() {
        return Err(Error::DegenerateTrainingSet("no training examples".into()));
    }
    if features.len() != labels.len() {
        return Err(Error::Data(format!(
            "feature/label length mismatch: {} vs {}",
            features.len(),
            labels.len()
        )));
    }
    let schema = features[0].names.clone();
    let mut rows = Vec::with_capacity(features.len());
    for f in features {
        if f.names != schema {
            return Err(Error::Data(format!("pair {}: inconsistent feature schema", f.pair_id)));
        }
        if f.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("pair {}: non-finite feature value", f.pair_id)));
        }
        rows.push(f.values.clone());
    }
    let y: Vec<f64> = labels.iter().map(|l| if l.is_positive() { 1.0 } else { 0.0 }).collect();
    train_on_rows(&rows, &y, &schema, opts)
}

/// Core trainer on raw rows; `y` entries must be 0.0 or 1.0.
pub fn train_on_rows(
    rows: &[Vec<f64>],
    y: &[f64],
    schema: &[String],
    opts: &TrainOptions,
) -> Result<(LinearModel, Vec<f64>)> {
    let n_pos = y.iter().filter(|&&v| v == 1.0).count();
    if n_pos == 0 || n_pos == y.len() {
        return Err(Error::DegenerateTrainingSet(
            "training set contains a single class".into(),
        ));
    }
    if opts.ridge_lambda < 0.0 {
        return Err(Error::Config("ridge_lambda must be non-negative".into()));
    }
    if opts.gradient_tolerance <= 0.0 {
        return Err(Error::Config("gradient_tolerance must be positive".into()));
    }

    let standardizer = Standardizer::fit(rows);
    let x: Vec<Vec<f64>> = rows.iter().map(|r| standardizer.transform(r)).collect();
    let d = schema.len();
    let lambda = opts.ridge_lambda;

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut obj = objective(&w, b, &x, y, lambda);
    let mut trace = vec![obj];

    for _ in 0..opts.max_iterations {
        let (grad_w, grad_b) = gradient(&w, b, &x, y, lambda);
        let grad_inf = grad_w
            .iter()
            .chain(std::iter::once(&grad_b))
            .fold(0.0f64, |acc, g| acc.max(g.abs()));
        if grad_inf < opts.gradient_tolerance {
            break;
        }

        // Newton system over (w, b): H = X' S X + lambda I (bias unpenalized).
        let dim = d + 1;
        let mut h = vec![0.0; dim * dim];
        for (row, _) in x.iter().zip(y) {
            let p = sigmoid(b + dot(&w, row));
            let s = p * (1.0 - p);
            for j in 0..d {
                let sj = s * row[j];
                for k in 0..=j {
                    h[j * dim + k] += sj * row[k];
                }
                h[j * dim + d] += sj;
            }
            h[d * dim + d] += s;
        }
        for j in 0..d {
            h[j * dim + j] += lambda;
            for k in 0..j {
                h[k * dim + j] = h[j * dim + k];
            }
            h[d * dim + j] = h[j * dim + d];
        }

        let mut neg_grad: Vec<f64> = grad_w.iter().map(|g| -g).collect();
        neg_grad.push(-grad_b);
        let mut dir = match solve_spd(&h, &neg_grad, dim) {
            Some(dir) => dir,
            None => neg_grad.clone(),
        };
        let mut slope = dot(&dir[..d], &grad_w) + dir[d] * grad_b;
        if slope >= 0.0 {
            dir = neg_grad.clone();
            slope = dot(&dir[..d], &grad_w) + dir[d] * grad_b;
        }

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let w_new: Vec<f64> = w.iter().zip(&dir[..d]).map(|(wi, di)| wi + step * di).collect();
            let b_new = b + step * dir[d];
            let obj_new = objective(&w_new, b_new, &x, y, lambda);
            if obj_new <= obj + ARMIJO_C1 * step * slope {
                w = w_new;
                b = b_new;
                obj = obj_new;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        trace.push(obj);
    }

    Ok((
        LinearModel {
            schema: schema.to_vec(),
            weights: w,
            bias: b,
            ridge_lambda: lambda,
            feature_means: standardizer.means,
            feature_stds: standardizer.stds,
        },
        trace,
    ))
}

/// Confusion counts and derived precision/recall/F1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl EvalResult {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> EvalResult {
        let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
        let recall = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        EvalResult {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            true_negatives: tn,
            precision,
            recall,
            f1,
        }
    }

    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.false_negatives + self.true_negatives
    }
}

/// Thresholds probabilities (predict Entail iff prob >= threshold) and counts
/// against gold labels.
pub fn evaluate(probs: &[f64], gold: &[Label], threshold: f64) -> Result<EvalResult> {
    if probs.len() != gold.len() {
        return Err(Error::Data(format!(
            "prediction/gold length mismatch: {} vs {}",
            probs.len(),
            gold.len()
        )));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config("decision threshold must be in (0,1)".into()));
    }
    let preds: Vec<Label> = probs
        .iter()
        .map(|&p| if p >= threshold { Label::Entail } else { Label::NonEntail })
        .collect();
    Ok(evaluate_labels(&preds, gold))
}

/// Confusion counts for hard label predictions.
pub fn evaluate_labels(preds: &[Label], gold: &[Label]) -> EvalResult {
    let mut tp = 0;
    let mut fp = 0;
    let mut fn_ = 0;
    let mut tn = 0;
    for (p, g) in preds.iter().zip(gold) {
        match (p.is_positive(), g.is_positive()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    EvalResult::from_counts(tp, fp, fn_, tn)
}

fn f_score(preds: &[Label], gold: &[Label]) -> f64 {
    evaluate_labels(preds, gold).f1
}

/// Paired approximate-randomization test on the F-score difference between
/// two systems.
///
/// Each shuffle swaps the two systems' predictions on a random subset of
/// pairs; the p-value is `(count(|dF_shuffled| >= |dF_observed|) + 1) /
/// (patterns + 1)`. When `n_shuffles` covers all `2^n` swap patterns the test
/// enumerates them exhaustively instead of sampling.
pub fn significance_test(
    preds_a: &[Label],
    preds_b: &[Label],
    gold: &[Label],
    n_shuffles: usize,
    seed: u64,
) -> Result<f64> {
    let n = gold.len();
    if n == 0 {
        return Err(Error::Data("significance test on empty predictions".into()));
    }
    if preds_a.len() != n || preds_b.len() != n {
        return Err(Error::Data("prediction lists must align with gold".into()));
    }
    if n_shuffles == 0 {
        return Err(Error::Config("n_shuffles must be positive".into()));
    }

    let delta_obs = (f_score(preds_a, gold) - f_score(preds_b, gold)).abs();
    let mut a = preds_a.to_vec();
    let mut b = preds_b.to_vec();

    let mut exceed = 0usize;
    let patterns: usize;
    if n < 64 && (n_shuffles as u128) >= (1u128 << n) {
        patterns = 1usize << n;
        for mask in 0..patterns as u64 {
            apply_mask(&mut a, &mut b, preds_a, preds_b, |i| mask >> i & 1 == 1);
            let delta = (f_score(&a, gold) - f_score(&b, gold)).abs();
            if delta >= delta_obs {
                exceed += 1;
            }
        }
    } else {
        patterns = n_shuffles;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..n_shuffles {
            let flips: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
            apply_mask(&mut a, &mut b, preds_a, preds_b, |i| flips[i]);
            let delta = (f_score(&a, gold) - f_score(&b, gold)).abs();
            if delta >= delta_obs {
                exceed += 1;
            }
        }
    }
    Ok((exceed + 1) as f64 / (patterns + 1) as f64)
}

fn apply_mask(
    a: &mut [Label],
    b: &mut [Label],
    orig_a: &[Label],
    orig_b: &[Label],
    swap: impl Fn(usize) -> bool,
) {
    for i in 0..a.len() {
        if swap(i) {
            a[i] = orig_b[i];
            b[i] = orig_a[i];
        } else {
            a[i] = orig_a[i];
            b[i] = orig_b[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn fv(id: &str, names: &[&str], values: &[f64]) -> FeatureVector {
        FeatureVector {
            pair_id: id.into(),
            names: names.iter().map(|s| s.to_string()).collect(),
            values: values.to_vec(),
        }
    }

    fn random_instance(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        loop {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect())
                .collect();
            let y: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect();
            let pos = y.iter().filter(|&&v| v == 1.0).count();
            if pos > 0 && pos < n {
                return (rows, y);
            }
        }
    }

    #[test]
    fn separable_two_points_reach_full_accuracy() {
        let features = vec![fv("a", &["x"], &[0.0]), fv("b", &["x"], &[1.0])];
        let labels = vec![Label::NonEntail, Label::Entail];
        let model = train(&features, &labels, &TrainOptions::default()).unwrap();
        assert!(model.predict_proba(&features[0]).unwrap() < 0.5);
        assert!(model.predict_proba(&features[1]).unwrap() >= 0.5);
    }

    #[test]
    fn constant_features_recover_base_rate_log_odds() {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            features.push(fv(&format!("p{i}"), &["c1", "c2"], &[1.0, 2.0]));
            labels.push(if i < 3 { Label::Entail } else { Label::NonEntail });
        }
        let model = train(&features, &labels, &TrainOptions::default()).unwrap();
        let expected = (3.0f64 / 7.0).ln();
        assert!(
            (model.bias - expected).abs() < 1e-6,
            "bias {} vs {expected}",
            model.bias
        );
        for w in &model.weights {
            assert_eq!(*w, 0.0);
        }
    }

    #[test]
    fn optimum_beats_random_probes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (rows, y) = random_instance(&mut rng, 20, 5);
        let schema: Vec<String> = (0..5).map(|j| format!("f{j}")).collect();
        let opts = TrainOptions {
            ridge_lambda: 1e-3,
            ..TrainOptions::default()
        };
        let (model, _) = train_on_rows(&rows, &y, &schema, &opts).unwrap();

        let std = Standardizer {
            means: model.feature_means.clone(),
            stds: model.feature_stds.clone(),
        };
        let x: Vec<Vec<f64>> = rows.iter().map(|r| std.transform(r)).collect();
        let at_optimum = objective(&model.weights, model.bias, &x, &y, opts.ridge_lambda);
        for _ in 0..1000 {
            let w: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
            let b = rng.random::<f64>() * 6.0 - 3.0;
            let probe = objective(&w, b, &x, &y, opts.ridge_lambda);
            assert!(at_optimum <= probe + 1e-9);
        }
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let (rows, y) = random_instance(&mut rng, 10, 3);
            let w: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let b = rng.random::<f64>() * 2.0 - 1.0;
            let lambda = 0.05;
            let (grad_w, grad_b) = gradient(&w, b, &rows, &y, lambda);

            let h = 1e-5;
            for j in 0..3 {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[j] += h;
                wm[j] -= h;
                let fd = (objective(&wp, b, &rows, &y, lambda)
                    - objective(&wm, b, &rows, &y, lambda))
                    / (2.0 * h);
                let rel = (grad_w[j] - fd).abs() / fd.abs().max(1e-8);
                assert!(rel < 1e-6, "weight {j}: analytic {} fd {fd}", grad_w[j]);
            }
            let fd_b = (objective(&w, b + h, &rows, &y, lambda)
                - objective(&w, b - h, &rows, &y, lambda))
                / (2.0 * h);
            let rel = (grad_b - fd_b).abs() / fd_b.abs().max(1e-8);
            assert!(rel < 1e-6);
        }
    }

    #[test]
    fn gradient_small_at_converged_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (rows, y) = random_instance(&mut rng, 30, 4);
        let schema: Vec<String> = (0..4).map(|j| format!("f{j}")).collect();
        let opts = TrainOptions {
            ridge_lambda: 0.1,
            ..TrainOptions::default()
        };
        let (model, _) = train_on_rows(&rows, &y, &schema, &opts).unwrap();
        let std = model.standardizer();
        let x: Vec<Vec<f64>> = rows.iter().map(|r| std.transform(r)).collect();
        let (grad_w, grad_b) = gradient(&model.weights, model.bias, &x, &y, opts.ridge_lambda);
        let inf = grad_w
            .iter()
            .chain(std::iter::once(&grad_b))
            .fold(0.0f64, |acc, g| acc.max(g.abs()));
        assert!(inf < opts.gradient_tolerance, "gradient norm {inf}");
    }

    #[test]
    fn bias_gradient_zero_for_balanced_centered_start() {
        let rows = vec![vec![1.0, -2.0], vec![-1.0, 2.0], vec![0.5, 0.5], vec![-0.5, -0.5]];
        let y = vec![1.0, 1.0, 0.0, 0.0];
        let (_, grad_b) = gradient(&[0.0, 0.0], 0.0, &rows, &y, 0.0);
        assert_eq!(grad_b, 0.0);
    }

    #[test]
    fn objective_trace_is_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = 8 + (rng.random::<f64>() * 12.0) as usize;
            let d = 2 + (rng.random::<f64>() * 4.0) as usize;
            let (rows, y) = random_instance(&mut rng, n, d);
            let schema: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
            let (_, trace) = train_on_rows(&rows, &y, &schema, &TrainOptions::default()).unwrap();
            for pair in trace.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-12, "objective increased: {pair:?}");
            }
        }
    }

    #[test]
    fn trainer_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (rows, y) = random_instance(&mut rng, 25, 4);
        let schema: Vec<String> = (0..4).map(|j| format!("f{j}")).collect();
        let (m1, _) = train_on_rows(&rows, &y, &schema, &TrainOptions::default()).unwrap();
        let (m2, _) = train_on_rows(&rows, &y, &schema, &TrainOptions::default()).unwrap();
        assert_eq!(m1.weights, m2.weights);
        assert_eq!(m1.bias, m2.bias);
    }

    #[test]
    fn single_class_input_is_degenerate() {
        let features = vec![fv("a", &["x"], &[0.0]), fv("b", &["x"], &[1.0])];
        let labels = vec![Label::Entail, Label::Entail];
        let err = train(&features, &labels, &TrainOptions::default()).unwrap_err();
        assert!(err.to_string().contains("degenerate training set"));
    }

    #[test]
    fn non_finite_feature_names_pair() {
        let features = vec![fv("a", &["x"], &[0.0]), fv("bad", &["x"], &[f64::NAN])];
        let labels = vec![Label::Entail, Label::NonEntail];
        let err = train(&features, &labels, &TrainOptions::default()).unwrap_err();
        assert!(err.to_string().contains("bad"));
    }

    #[test]
    fn probabilities_strictly_inside_unit_interval() {
        let model = LinearModel {
            schema: vec!["x".into()],
            weights: vec![1000.0],
            bias: 0.0,
            ridge_lambda: 0.0,
            feature_means: vec![0.0],
            feature_stds: vec![1.0],
        };
        let hi = model.predict_proba_values(&[1000.0]);
        let lo = model.predict_proba_values(&[-1000.0]);
        assert!(hi > 0.999 && hi < 1.0);
        assert!(lo < 0.001 && lo > 0.0);
        assert_eq!(model.predict_proba_values(&[0.0]), 0.5);
    }

    #[test]
    fn schema_mismatch_lists_names() {
        let model = LinearModel {
            schema: vec!["a".into(), "b".into()],
            weights: vec![1.0, 1.0],
            bias: 0.0,
            ridge_lambda: 0.0,
            feature_means: vec![0.0, 0.0],
            feature_stds: vec![1.0, 1.0],
        };
        let err = model.predict_proba(&fv("p", &["a", "c"], &[1.0, 2.0])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("missing [b]"), "{msg}");
        assert!(msg.contains("extra [c]"), "{msg}");

        // Same names in a different order align by name.
        let p1 = model.predict_proba(&fv("p", &["a", "b"], &[1.0, 2.0])).unwrap();
        let p2 = model.predict_proba(&fv("p", &["b", "a"], &[2.0, 1.0])).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn evaluate_reproduces_reported_f_scores() {
        // (precision%, recall%, expected F) from published result tables.
        let rows = [(77, 26, 0.39), (62, 48, 0.54), (34, 39, 0.36)];
        for (p, r, f) in rows {
            let result = eval_from_rates(p, r);
            assert!(
                (result.f1 - f).abs() <= 0.005,
                "P=0.{p} R=0.{r}: F {} vs {f}",
                result.f1
            );
        }
    }

    /// Builds probs/gold realizing exactly P=p/100 and R=r/100, then runs
    /// `evaluate` at threshold 0.5.
    fn eval_from_rates(p: usize, r: usize) -> EvalResult {
        let tp = p * r;
        let fp = 100 * r - tp;
        let fn_ = 100 * p - tp;
        let mut probs = Vec::new();
        let mut gold = Vec::new();
        for _ in 0..tp {
            probs.push(0.9);
            gold.push(Label::Entail);
        }
        for _ in 0..fp {
            probs.push(0.9);
            gold.push(Label::NonEntail);
        }
        for _ in 0..fn_ {
            probs.push(0.1);
            gold.push(Label::Entail);
        }
        probs.push(0.1);
        gold.push(Label::NonEntail);
        evaluate(&probs, &gold, 0.5).unwrap()
    }

    #[test]
    fn evaluate_counts_partition_input() {
        let probs = vec![0.9, 0.4, 0.6, 0.1];
        let gold = vec![Label::Entail, Label::Entail, Label::NonEntail, Label::NonEntail];
        let result = evaluate(&probs, &gold, 0.5).unwrap();
        assert_eq!(result.total(), 4);
        assert_eq!(result.true_positives, 1);
        assert_eq!(result.false_negatives, 1);
        assert_eq!(result.false_positives, 1);
        assert_eq!(result.true_negatives, 1);
        assert!(evaluate(&probs, &gold[..3], 0.5).is_err());
        assert!(evaluate(&probs, &gold, 0.0).is_err());
    }

    #[test]
    fn zero_denominators_yield_zero_metrics() {
        let result = evaluate_labels(
            &[Label::NonEntail, Label::NonEntail],
            &[Label::Entail, Label::NonEntail],
        );
        assert_eq!(result.precision, 0.0);
        assert_eq!(result.recall, 0.0);
        assert_eq!(result.f1, 0.0);
    }

    #[test]
    fn identical_predictions_have_p_one() {
        let preds = vec![Label::Entail, Label::NonEntail, Label::Entail];
        let gold = vec![Label::Entail, Label::Entail, Label::NonEntail];
        let p = significance_test(&preds, &preds, &gold, 1000, 7).unwrap();
        assert_eq!(p, 1.0);
        assert!(significance_test(&[], &[], &[], 100, 7).is_err());
    }

    #[test]
    fn probability_monotone_in_positively_weighted_feature() {
        let model = LinearModel {
            schema: vec!["up".into(), "down".into()],
            weights: vec![2.0, -1.0],
            bias: 0.1,
            ridge_lambda: 0.0,
            feature_means: vec![0.5, 0.5],
            feature_stds: vec![2.0, 3.0],
        };
        let mut last = 0.0;
        for step in 0..20 {
            let p = model.predict_proba_values(&[step as f64 * 0.3, 1.0]);
            assert!(p > last, "not increasing at step {step}");
            last = p;
        }
    }

    #[test]
    fn exhaustive_mode_matches_enumeration_oracle() {
        let preds_a = vec![
            Label::Entail,
            Label::Entail,
            Label::NonEntail,
            Label::Entail,
            Label::NonEntail,
            Label::NonEntail,
        ];
        let preds_b = vec![
            Label::NonEntail,
            Label::Entail,
            Label::Entail,
            Label::NonEntail,
            Label::NonEntail,
            Label::Entail,
        ];
        let gold = vec![
            Label::Entail,
            Label::Entail,
            Label::NonEntail,
            Label::Entail,
            Label::Entail,
            Label::NonEntail,
        ];
        let p = significance_test(&preds_a, &preds_b, &gold, 64, 0).unwrap();

        // Independent oracle: enumerate all 2^6 swap patterns.
        let delta_obs = (f_score(&preds_a, &gold) - f_score(&preds_b, &gold)).abs();
        let mut exceed = 0;
        for mask in 0u64..64 {
            let mut a = preds_a.clone();
            let mut b = preds_b.clone();
            for i in 0..6 {
                if mask >> i & 1 == 1 {
                    std::mem::swap(&mut a[i], &mut b[i]);
                }
            }
            if (f_score(&a, &gold) - f_score(&b, &gold)).abs() >= delta_obs {
                exceed += 1;
            }
        }
        let expected = (exceed + 1) as f64 / 65.0;
        assert_eq!(p, expected);
        assert!(p < 1.0);
    }

    #[test]
    fn sampled_mode_is_seed_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 100;
        let rand_label =
            |rng: &mut ChaCha8Rng| if rng.random::<bool>() { Label::Entail } else { Label::NonEntail };
        let preds_a: Vec<Label> = (0..n).map(|_| rand_label(&mut rng)).collect();
        let preds_b: Vec<Label> = (0..n).map(|_| rand_label(&mut rng)).collect();
        let gold: Vec<Label> = (0..n).map(|_| rand_label(&mut rng)).collect();
        let p1 = significance_test(&preds_a, &preds_b, &gold, 500, 99).unwrap();
        let p2 = significance_test(&preds_a, &preds_b, &gold, 500, 99).unwrap();
        assert_eq!(p1, p2);
        assert!(p1 > 0.0 && p1 <= 1.0);
    }

    #[test]
    fn model_json_round_trip_preserves_predictions() {
        let features = vec![
            fv("a", &["x", "y"], &[0.0, 2.0]),
            fv("b", &["x", "y"], &[1.0, 0.5]),
            fv("c", &["x", "y"], &[0.2, 1.5]),
            fv("d", &["x", "y"], &[0.9, 0.1]),
        ];
        let labels = vec![Label::NonEntail, Label::Entail, Label::NonEntail, Label::Entail];
        let model = train(&features, &labels, &TrainOptions::default()).unwrap();

        let dir = tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save(&path).unwrap();
        let loaded = LinearModel::load(&path).unwrap();
        for f in &features {
            let p0 = model.predict_proba(f).unwrap();
            let p1 = loaded.predict_proba(f).unwrap();
            assert!((p0 - p1).abs() < 1e-12);
        }
    }
}
