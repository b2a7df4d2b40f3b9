//! Simulated pool-based active learning: uncertainty sampling versus random
//! sampling, one instance at a time, averaged over replicate runs.
//!
//! The labeled training set plays the role of the unlabeled pool; acquiring
//! an instance reveals its gold label. Each run seeds its own generator with
//! `seed XOR run_index`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{evaluate, train_on_rows, LinearModel, TrainOptions};
use crate::corpus::{Dataset, Label};
use crate::error::{Error, Result};
use crate::features::{extract_dataset, FeatureExtractor, FeatureVector};

/// Acquisition strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Uncertainty,
    Random,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Uncertainty => f.write_str("uncertainty"),
            Strategy::Random => f.write_str("random"),
        }
    }
}

/// Active-learning simulation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActiveConfig {
    pub strategy: Strategy,
    pub n_runs: usize,
    /// Instances acquired per step.
    pub step: usize,
    /// Maximum acquisitions per run; `None` consumes the whole pool.
    pub budget: Option<usize>,
    /// Retrain after this many acquisitions (1 retrains every step).
    pub retrain_every: usize,
    pub seed: u64,
    pub train_options: TrainOptions,
}

impl Default for ActiveConfig {
    fn default() -> Self {
        ActiveConfig {
            strategy: Strategy::Uncertainty,
            n_runs: 10,
            step: 1,
            budget: None,
            retrain_every: 1,
            seed: 42,
            train_options: TrainOptions::default(),
        }
    }
}

/// One row of a learning curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n_labeled: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub pos_consumed_frac: f64,
    pub neg_consumed_frac: f64,
}

/// One replicate run: the acquisition order plus its curve rows (rows start
/// at the first step where the acquired set contains both classes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub acquired: Vec<(String, Label)>,
    pub points: Vec<CurvePoint>,
}

/// Learning curve of one strategy: per-run records plus the pointwise mean
/// over runs at equal labeled-set sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub strategy: Strategy,
    pub pool_positives: usize,
    pub pool_negatives: usize,
    pub averaged: Vec<CurvePoint>,
    pub runs: Vec<RunRecord>,
}

/// Index of the pool instance whose predicted probability is nearest 0.5;
/// ties go to the lowest pair id. Pool features must follow the model schema
/// order.
pub fn uncertainty_select(model: &LinearModel, pool_features: &[FeatureVector]) -> Result<usize> {
    if pool_features.is_empty() {
        return Err(Error::Data("uncertainty selection from an empty pool".into()));
    }
    let mut best = 0usize;
    let mut best_dist = f64::INFINITY;
    for (i, f) in pool_features.iter().enumerate() {
        let dist = (model.predict_proba_values(&f.values) - 0.5).abs();
        let better = dist < best_dist
            || (dist == best_dist && f.pair_id < pool_features[best].pair_id);
        if better {
            best = i;
            best_dist = dist;
        }
    }
    Ok(best)
}

/// Uniformly random pool index.
pub fn random_select(pool_size: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
    if pool_size == 0 {
        return Err(Error::Data("random selection from an empty pool".into()));
    }
    Ok(rng.random_range(0..pool_size))
}

struct PoolItem {
    id: String,
    values: Vec<f64>,
    label: Label,
}

/// Simulates one strategy over `config.n_runs` replicate runs.
///
/// Each run starts from a single random instance and falls back to random
/// acquisition while the acquired set is single-class; once both classes are
/// present the configured strategy takes over. After every acquisition the
/// model is retrained (subject to `retrain_every`) and evaluated on
/// `eval_set`.
pub fn simulate(
    train_as_pool: &Dataset,
    eval_set: &Dataset,
    extractor: &FeatureExtractor,
    config: &ActiveConfig,
) -> Result<LearningCurve> {
    if config.n_runs == 0 || config.step == 0 || config.retrain_every == 0 {
        return Err(Error::Config("n_runs, step and retrain_every must be positive".into()));
    }
    if train_as_pool.is_empty() {
        return Err(Error::Data("active learning pool is empty".into()));
    }
    let pool_labels = train_as_pool.labels()?;
    let pool_positives = pool_labels.iter().filter(|l| l.is_positive()).count();
    let pool_negatives = pool_labels.len() - pool_positives;
    if pool_positives == 0 || pool_negatives == 0 {
        return Err(Error::DegenerateTrainingSet("pool must contain both classes".into()));
    }

    let (pool_vecs, _) = extract_dataset(train_as_pool, extractor);
    let (eval_vecs, eval_labels) = extract_dataset(eval_set, extractor);
    let eval_labels =
        eval_labels.ok_or_else(|| Error::Data("evaluation set must be labeled".into()))?;
    let eval_rows: Vec<Vec<f64>> = eval_vecs.into_iter().map(|v| v.values).collect();

    let items: Vec<PoolItem> = pool_vecs
        .into_iter()
        .zip(&pool_labels)
        .map(|(v, &label)| PoolItem {
            id: v.pair_id,
            values: v.values,
            label,
        })
        .collect();

    let schema = extractor.schema().to_vec();
    let runs: Vec<RunRecord> = (0..config.n_runs)
        .into_par_iter()
        .map(|run| {
            simulate_run(
                run,
                &items,
                &eval_rows,
                &eval_labels,
                &schema,
                pool_positives,
                pool_negatives,
                config,
            )
        })
        .collect::<Result<_>>()?;

    let averaged = average_runs(&runs);
    Ok(LearningCurve {
        strategy: config.strategy,
        pool_positives,
        pool_negatives,
        averaged,
        runs,
    })
}

#[allow(clippy::too_many_arguments)]
fn simulate_run(
    run: usize,
    items: &[PoolItem],
    eval_rows: &[Vec<f64>],
    eval_labels: &[Label],
    schema: &[String],
    pool_positives: usize,
    pool_negatives: usize,
    config: &ActiveConfig,
) -> Result<RunRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ run as u64);
    let budget = config.budget.unwrap_or(items.len()).min(items.len());

    let mut remaining: Vec<usize> = (0..items.len()).collect();
    let mut acquired: Vec<(String, Label)> = Vec::new();
    let mut labeled_rows: Vec<Vec<f64>> = Vec::new();
    let mut labeled_y: Vec<f64> = Vec::new();
    let mut pos_acquired = 0usize;
    let mut model: Option<LinearModel> = None;
    let mut since_retrain = 0usize;
    let mut points = Vec::new();

    while acquired.len() < budget && !remaining.is_empty() {
        for _ in 0..config.step {
            if acquired.len() >= budget || remaining.is_empty() {
                break;
            }
            let has_both = pos_acquired > 0 && pos_acquired < acquired.len();
            let pick = match (config.strategy, &model) {
                (Strategy::Uncertainty, Some(m)) if has_both => {
                    select_uncertain(m, items, &remaining)
                }
                _ => random_select(remaining.len(), &mut rng)?,
            };
            let item_idx = remaining.swap_remove(pick);
            let item = &items[item_idx];
            acquired.push((item.id.clone(), item.label));
            labeled_rows.push(item.values.clone());
            labeled_y.push(if item.label.is_positive() { 1.0 } else { 0.0 });
            if item.label.is_positive() {
                pos_acquired += 1;
            }
            since_retrain += 1;
        }

        let has_both = pos_acquired > 0 && pos_acquired < acquired.len();
        let due = since_retrain >= config.retrain_every
            || acquired.len() >= budget
            || remaining.is_empty();
        if has_both && (due || model.is_none()) {
            let (m, _) = train_on_rows(&labeled_rows, &labeled_y, schema, &config.train_options)?;
            model = Some(m);
            since_retrain = 0;
        }

        if let Some(m) = &model {
            let probs: Vec<f64> = eval_rows.iter().map(|r| m.predict_proba_values(r)).collect();
            let eval = evaluate(&probs, eval_labels, config.train_options.decision_threshold)?;
            points.push(CurvePoint {
                n_labeled: acquired.len(),
                precision: eval.precision,
                recall: eval.recall,
                f1: eval.f1,
                pos_consumed_frac: pos_acquired as f64 / pool_positives as f64,
                neg_consumed_frac: (acquired.len() - pos_acquired) as f64 / pool_negatives as f64,
            });
        }
    }

    Ok(RunRecord {
        run,
        acquired,
        points,
    })
}

fn select_uncertain(model: &LinearModel, items: &[PoolItem], remaining: &[usize]) -> usize {
    let mut best = 0usize;
    let mut best_dist = f64::INFINITY;
    for (i, &item_idx) in remaining.iter().enumerate() {
        let item = &items[item_idx];
        let dist = (model.predict_proba_values(&item.values) - 0.5).abs();
        let better = dist < best_dist
            || (dist == best_dist && item.id < items[remaining[best]].id);
        if better {
            best = i;
            best_dist = dist;
        }
    }
    best
}

/// Pointwise mean of per-run curves at equal `n_labeled`, over the labeled
/// sizes present in every run.
fn average_runs(runs: &[RunRecord]) -> Vec<CurvePoint> {
    let Some(first_run) = runs.first() else {
        return Vec::new();
    };
    let mut averaged = Vec::new();
    'sizes: for anchor in &first_run.points {
        let n = anchor.n_labeled;
        let mut acc = CurvePoint {
            n_labeled: n,
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
            pos_consumed_frac: 0.0,
            neg_consumed_frac: 0.0,
        };
        for run in runs {
            // Points are sorted by n_labeled within a run.
            let Ok(idx) = run.points.binary_search_by_key(&n, |p| p.n_labeled) else {
                continue 'sizes;
            };
            let p = &run.points[idx];
            acc.precision += p.precision;
            acc.recall += p.recall;
            acc.f1 += p.f1;
            acc.pos_consumed_frac += p.pos_consumed_frac;
            acc.neg_consumed_frac += p.neg_consumed_frac;
        }
        let k = runs.len() as f64;
        acc.precision /= k;
        acc.recall /= k;
        acc.f1 /= k;
        acc.pos_consumed_frac /= k;
        acc.neg_consumed_frac /= k;
        averaged.push(acc);
    }
    averaged
}

/// Consumption curve of one acquisition sequence: after each acquisition, the
/// fraction of the pool acquired and the fractions of pool positives and
/// negatives consumed.
pub fn consumption_curve(
    acquired: &[(String, Label)],
    pool_positives: usize,
    pool_negatives: usize,
) -> Vec<(f64, f64, f64)> {
    let total = (pool_positives + pool_negatives) as f64;
    let mut pos = 0usize;
    let mut neg = 0usize;
    acquired
        .iter()
        .enumerate()
        .map(|(i, (_, label))| {
            if label.is_positive() {
                pos += 1;
            } else {
                neg += 1;
            }
            (
                (i + 1) as f64 / total,
                pos as f64 / pool_positives as f64,
                neg as f64 / pool_negatives as f64,
            )
        })
        .collect()
}

/// Averaged-curve CSV: `strategy,n_labeled,precision,recall,f1,pos_consumed,neg_consumed`.
pub fn curve_to_csv(curve: &LearningCurve) -> String {
    let mut out = String::from("strategy,n_labeled,precision,recall,f1,pos_consumed,neg_consumed\n");
    for p in &curve.averaged {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            curve.strategy,
            p.n_labeled,
            p.precision,
            p.recall,
            p.f1,
            p.pos_consumed_frac,
            p.neg_consumed_frac
        ));
    }
    out
}

/// Per-run long-format CSV with a run column.
pub fn runs_to_csv(curve: &LearningCurve) -> String {
    let mut out =
        String::from("strategy,run,n_labeled,precision,recall,f1,pos_consumed,neg_consumed\n");
    for run in &curve.runs {
        for p in &run.points {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                curve.strategy,
                run.run,
                p.n_labeled,
                p.precision,
                p.recall,
                p.f1,
                p.pos_consumed_frac,
                p.neg_consumed_frac
            ));
        }
    }
    out
}
