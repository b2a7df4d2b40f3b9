//! Iterative self-training: train, pull high-confidence entailing pairs from
//! an unlabeled pool into the labeled set, retrain, and sweep the confidence
//! threshold tau.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{evaluate, train_on_rows, LinearModel, TrainOptions};
use crate::corpus::{Dataset, Label};
use crate::error::{Error, Result};
use crate::features::{extract_dataset, FeatureExtractor};

/// Self-training parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelfTrainConfig {
    /// Confidence threshold: pool pairs with predicted entailment probability
    /// strictly above tau are pseudo-labeled Entail.
    pub tau: f64,
    /// Cap on training iterations; `None` runs to the empty-selection fixed
    /// point.
    pub max_iterations: Option<usize>,
    pub train_options: TrainOptions,
}

impl Default for SelfTrainConfig {
    fn default() -> Self {
        SelfTrainConfig {
            tau: 0.5,
            max_iterations: None,
            train_options: TrainOptions::default(),
        }
    }
}

/// One self-training iteration: sizes after this iteration's additions plus
/// the dev-set evaluation of the model trained this iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub added_count: usize,
    pub labeled_size: usize,
    pub pool_size: usize,
    pub dev_precision: f64,
    pub dev_recall: f64,
    pub dev_f1: f64,
    /// Pool pair ids absorbed this iteration.
    pub added_ids: Vec<String>,
}

/// Per-iteration records of one self-training run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SelfTrainHistory {
    pub records: Vec<IterationRecord>,
}

impl SelfTrainHistory {
    pub fn total_added(&self) -> usize {
        self.records.iter().map(|r| r.added_count).sum()
    }

    /// CSV with header `iteration,added,labeled_size,pool_size,dev_p,dev_r,dev_f1`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,added,labeled_size,pool_size,dev_p,dev_r,dev_f1\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.iteration,
                r.added_count,
                r.labeled_size,
                r.pool_size,
                r.dev_precision,
                r.dev_recall,
                r.dev_f1
            ));
        }
        out
    }
}

/// Feature-space view of the three datasets involved in a run, extracted once
/// so threshold sweeps can share it.
struct Prepared {
    schema: Vec<String>,
    labeled_rows: Vec<Vec<f64>>,
    labeled_y: Vec<f64>,
    pool_ids: Vec<String>,
    pool_rows: Vec<Vec<f64>>,
    dev_rows: Vec<Vec<f64>>,
    dev_labels: Vec<Label>,
}

fn prepare(
    labeled: &Dataset,
    pool: &Dataset,
    dev: &Dataset,
    extractor: &FeatureExtractor,
) -> Result<Prepared> {
    if pool.pairs.iter().any(|p| p.label.is_some()) {
        return Err(Error::Data("self-training pool must be unlabeled".into()));
    }
    let labeled_y: Vec<f64> = labeled
        .labels()?
        .iter()
        .map(|l| if l.is_positive() { 1.0 } else { 0.0 })
        .collect();
    let dev_labels = dev.labels()?;

    let (labeled_vecs, _) = extract_dataset(labeled, extractor);
    let (pool_vecs, _) = extract_dataset(pool, extractor);
    let (dev_vecs, _) = extract_dataset(dev, extractor);

    Ok(Prepared {
        schema: extractor.schema().to_vec(),
        labeled_rows: labeled_vecs.into_iter().map(|v| v.values).collect(),
        labeled_y,
        pool_ids: pool.pairs.iter().map(|p| p.id.clone()).collect(),
        pool_rows: pool_vecs.into_iter().map(|v| v.values).collect(),
        dev_rows: dev_vecs.into_iter().map(|v| v.values).collect(),
        dev_labels,
    })
}

fn run(prepared: &Prepared, config: &SelfTrainConfig) -> Result<(LinearModel, SelfTrainHistory)> {
    if !(config.tau > 0.0 && config.tau < 1.0) {
        return Err(Error::Config("tau must be in (0,1)".into()));
    }

    let mut labeled_rows = prepared.labeled_rows.clone();
    let mut y = prepared.labeled_y.clone();
    let mut pool: Vec<(String, Vec<f64>)> = prepared
        .pool_ids
        .iter()
        .cloned()
        .zip(prepared.pool_rows.iter().cloned())
        .collect();

    let mut history = SelfTrainHistory::default();

    if pool.is_empty() {
        let (model, _) = train_on_rows(&labeled_rows, &y, &prepared.schema, &config.train_options)?;
        return Ok((model, history));
    }

    let mut iteration = 0;
    loop {
        iteration += 1;
        let (model, _) = train_on_rows(&labeled_rows, &y, &prepared.schema, &config.train_options)?;

        let dev_probs: Vec<f64> = prepared
            .dev_rows
            .iter()
            .map(|r| model.predict_proba_values(r))
            .collect();
        let dev_eval = evaluate(
            &dev_probs,
            &prepared.dev_labels,
            config.train_options.decision_threshold,
        )?;

        let selected: Vec<usize> = pool
            .iter()
            .enumerate()
            .filter(|(_, (_, row))| model.predict_proba_values(row) > config.tau)
            .map(|(i, _)| i)
            .collect();

        history.records.push(IterationRecord {
            iteration,
            added_count: selected.len(),
            labeled_size: labeled_rows.len() + selected.len(),
            pool_size: pool.len() - selected.len(),
            dev_precision: dev_eval.precision,
            dev_recall: dev_eval.recall,
            dev_f1: dev_eval.f1,
            added_ids: selected.iter().map(|&i| pool[i].0.clone()).collect(),
        });

        if selected.is_empty() {
            return Ok((model, history));
        }

        let mut keep = vec![true; pool.len()];
        for &i in &selected {
            keep[i] = false;
        }
        let mut remaining = Vec::with_capacity(pool.len() - selected.len());
        for (keep_it, (id, row)) in keep.iter().zip(pool) {
            if *keep_it {
                remaining.push((id, row));
            } else {
                labeled_rows.push(row);
                y.push(1.0);
            }
        }
        pool = remaining;

        if config.max_iterations.is_some_and(|max| iteration >= max) {
            return Ok((model, history));
        }
    }
}

/// Runs the self-training regime: train on the labeled set, absorb pool pairs
/// whose predicted entailment probability exceeds tau (pseudo-labeled
/// Entail), and repeat until no pair crosses the threshold, the pool is
/// exhausted, or the iteration cap is reached. Sub-threshold pairs stay in
/// the pool and are re-scanned every iteration.
pub fn self_train(
    labeled: &Dataset,
    pool: &Dataset,
    dev: &Dataset,
    extractor: &FeatureExtractor,
    config: &SelfTrainConfig,
) -> Result<(LinearModel, SelfTrainHistory)> {
    let prepared = prepare(labeled, pool, dev, extractor)?;
    run(&prepared, config)
}

/// One threshold-sweep grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub tau: f64,
    pub added_total: usize,
    pub dev_precision: f64,
    pub dev_recall: f64,
    pub dev_f1: f64,
}

/// The standard tau grid 0.1, 0.2, ..., 0.9.
pub fn default_tau_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

/// Renders sweep points as CSV with header `tau,added_total,dev_p,dev_r,dev_f1`.
pub fn sweep_to_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("tau,added_total,dev_p,dev_r,dev_f1\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.tau, p.added_total, p.dev_precision, p.dev_recall, p.dev_f1
        ));
    }
    out
}

/// Runs `self_train` once per grid tau, every run starting from the same
/// initial state, and reports the final model's dev metrics per tau. The best
/// tau maximizes dev F1, smaller tau winning ties.
pub fn threshold_sweep(
    labeled: &Dataset,
    pool: &Dataset,
    dev: &Dataset,
    extractor: &FeatureExtractor,
    grid: &[f64],
    base: &SelfTrainConfig,
) -> Result<(f64, Vec<SweepPoint>)> {
    if grid.is_empty() {
        return Err(Error::Config("tau grid must be non-empty".into()));
    }
    let prepared = prepare(labeled, pool, dev, extractor)?;

    let points: Vec<SweepPoint> = grid
        .par_iter()
        .map(|&tau| -> Result<SweepPoint> {
            let config = SelfTrainConfig {
                tau,
                ..base.clone()
            };
            let (model, history) = run(&prepared, &config)?;
            let dev_probs: Vec<f64> = prepared
                .dev_rows
                .iter()
                .map(|r| model.predict_proba_values(r))
                .collect();
            let dev_eval = evaluate(
                &dev_probs,
                &prepared.dev_labels,
                config.train_options.decision_threshold,
            )?;
            Ok(SweepPoint {
                tau,
                added_total: history.total_added(),
                dev_precision: dev_eval.precision,
                dev_recall: dev_eval.recall,
                dev_f1: dev_eval.f1,
            })
        })
        .collect::<Result<_>>()?;

    let mut best = &points[0];
    for p in &points[1..] {
        if p.dev_f1 > best.dev_f1 || (p.dev_f1 == best.dev_f1 && p.tau < best.tau) {
            best = p;
        }
    }
    Ok((best.tau, points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Pair, Role};
    use crate::features::FeatureConfig;

    fn pair(id: &str, text: &str, hyp: &str, label: Option<Label>) -> Pair {
        Pair {
            id: id.into(),
            hypothesis_id: "h0".into(),
            text: text.into(),
            hypothesis: hyp.into(),
            label,
        }
    }

    /// Separable toy task: positives repeat the hypothesis, negatives share
    /// nothing with it.
    fn toy_datasets(n_pool_pos: usize, n_pool_neg: usize) -> (Dataset, Dataset, Dataset) {
        let hyp = "red blue green yellow";
        let mut labeled = Vec::new();
        for i in 0..6 {
            labeled.push(pair(
                &format!("lp{i}"),
                "red blue green yellow extra",
                hyp,
                Some(Label::Entail),
            ));
            labeled.push(pair(
                &format!("ln{i}"),
                "stone iron copper zinc tin",
                hyp,
                Some(Label::NonEntail),
            ));
        }
        let mut pool = Vec::new();
        for i in 0..n_pool_pos {
            pool.push(pair(&format!("up{i}"), "red blue green yellow extra", hyp, None));
        }
        for i in 0..n_pool_neg {
            pool.push(pair(&format!("un{i}"), "stone iron copper zinc tin", hyp, None));
        }
        let mut dev = Vec::new();
        for i in 0..4 {
            dev.push(pair(
                &format!("dp{i}"),
                "red blue green yellow other",
                hyp,
                Some(Label::Entail),
            ));
            dev.push(pair(
                &format!("dn{i}"),
                "wood glass paper cloth felt",
                hyp,
                Some(Label::NonEntail),
            ));
        }
        (
            Dataset::new("labeled", Role::Train, labeled).unwrap(),
            Dataset::new("pool", Role::Unlabeled, pool).unwrap(),
            Dataset::new("dev", Role::Dev, dev).unwrap(),
        )
    }

    fn extractor() -> FeatureExtractor {
        FeatureExtractor::new(FeatureConfig::default()).unwrap()
    }

    #[test]
    fn impossible_threshold_stops_after_one_iteration() {
        let (labeled, pool, dev) = toy_datasets(3, 3);
        let ex = extractor();
        // Heavy regularization keeps probabilities well below the threshold.
        let config = SelfTrainConfig {
            tau: 0.9999999,
            train_options: TrainOptions {
                ridge_lambda: 1.0,
                ..TrainOptions::default()
            },
            ..SelfTrainConfig::default()
        };
        let (model, history) = self_train(&labeled, &pool, &dev, &ex, &config).unwrap();
        assert_eq!(history.records.len(), 1);
        assert_eq!(history.records[0].added_count, 0);

        // The returned model equals a plain baseline trained on the labeled set.
        let (lv, ll) = extract_dataset(&labeled, &ex);
        let labels = ll.unwrap();
        let baseline = crate::classifier::train(&lv, &labels, &config.train_options).unwrap();
        assert_eq!(model.weights, baseline.weights);
        assert_eq!(model.bias, baseline.bias);
    }

    #[test]
    fn copies_of_positives_absorbed_in_first_iteration() {
        let (labeled, pool, dev) = toy_datasets(5, 0);
        let ex = extractor();

        // Pre-check: every pool copy scores above 0.5 under the baseline.
        let (lv, ll) = extract_dataset(&labeled, &ex);
        let baseline =
            crate::classifier::train(&lv, &ll.unwrap(), &TrainOptions::default()).unwrap();
        let (pool_vecs, _) = extract_dataset(&pool, &ex);
        for v in &pool_vecs {
            assert!(baseline.predict_proba(v).unwrap() > 0.5, "{}", v.pair_id);
        }

        let config = SelfTrainConfig {
            tau: 0.5,
            ..SelfTrainConfig::default()
        };
        let (_, history) = self_train(&labeled, &pool, &dev, &ex, &config).unwrap();
        assert_eq!(history.records[0].added_count, 5);
        assert_eq!(history.records[0].pool_size, 0);
    }

    #[test]
    fn bookkeeping_identities_hold() {
        let (labeled, pool, dev) = toy_datasets(4, 8);
        let ex = extractor();
        let config = SelfTrainConfig {
            tau: 0.3,
            ..SelfTrainConfig::default()
        };
        let (_, history) = self_train(&labeled, &pool, &dev, &ex, &config).unwrap();

        let initial_labeled = labeled.len();
        let initial_pool = pool.len();
        let mut expected_labeled = initial_labeled;
        let mut expected_pool = initial_pool;
        for r in &history.records {
            expected_labeled += r.added_count;
            expected_pool -= r.added_count;
            assert_eq!(r.labeled_size, expected_labeled);
            assert_eq!(r.pool_size, expected_pool);
        }

        // No pool pair is ever added twice.
        let mut added: Vec<&str> = history
            .records
            .iter()
            .flat_map(|r| r.added_ids.iter().map(String::as_str))
            .collect();
        let n_added = added.len();
        added.sort_unstable();
        added.dedup();
        assert_eq!(added.len(), n_added);
        assert_eq!(n_added, history.total_added());
        assert!(n_added <= initial_pool);
    }

    #[test]
    fn empty_pool_returns_baseline_with_empty_history() {
        let (labeled, _, dev) = toy_datasets(0, 0);
        let pool = Dataset::new("pool", Role::Unlabeled, vec![]).unwrap();
        let ex = extractor();
        let (_, history) =
            self_train(&labeled, &pool, &dev, &ex, &SelfTrainConfig::default()).unwrap();
        assert!(history.records.is_empty());
    }

    #[test]
    fn labeled_pool_is_rejected() {
        let (labeled, _, dev) = toy_datasets(0, 0);
        let ex = extractor();
        let err = self_train(&labeled, &labeled, &dev, &ex, &SelfTrainConfig::default());
        assert!(err.is_err());
    }

    #[test]
    fn runs_are_deterministic() {
        let (labeled, pool, dev) = toy_datasets(3, 6);
        let ex = extractor();
        let config = SelfTrainConfig {
            tau: 0.4,
            ..SelfTrainConfig::default()
        };
        let (m1, h1) = self_train(&labeled, &pool, &dev, &ex, &config).unwrap();
        let (m2, h2) = self_train(&labeled, &pool, &dev, &ex, &config).unwrap();
        assert_eq!(m1.weights, m2.weights);
        assert_eq!(h1, h2);
    }

    #[test]
    fn default_grid_has_nine_entries() {
        let grid = default_tau_grid();
        assert_eq!(grid.len(), 9);
        assert_eq!(grid[0], 0.1);
        assert_eq!(grid[8], 0.9);
    }

    #[test]
    fn first_iteration_added_counts_non_increasing_in_tau() {
        let (labeled, pool, dev) = toy_datasets(5, 10);
        let ex = extractor();
        let grid = default_tau_grid();
        let mut last_added = usize::MAX;
        for &tau in &grid {
            let config = SelfTrainConfig {
                tau,
                max_iterations: Some(1),
                ..SelfTrainConfig::default()
            };
            let (_, history) = self_train(&labeled, &pool, &dev, &ex, &config).unwrap();
            let added = history.records[0].added_count;
            assert!(added <= last_added, "tau {tau}: {added} > {last_added}");
            last_added = added;
        }
    }

    #[test]
    fn sweep_reports_every_grid_point_and_best_tau() {
        let (labeled, pool, dev) = toy_datasets(4, 8);
        let ex = extractor();
        let grid = default_tau_grid();
        let (best_tau, points) = threshold_sweep(
            &labeled,
            &pool,
            &dev,
            &ex,
            &grid,
            &SelfTrainConfig::default(),
        )
        .unwrap();
        assert_eq!(points.len(), 9);
        assert!(grid.contains(&best_tau));
        let best_f = points
            .iter()
            .find(|p| p.tau == best_tau)
            .unwrap()
            .dev_f1;
        for p in &points {
            assert!(p.dev_f1 <= best_f);
            // Ties resolve toward the smaller tau.
            if p.dev_f1 == best_f {
                assert!(best_tau <= p.tau);
            }
        }

        let csv = sweep_to_csv(&points);
        assert!(csv.starts_with("tau,added_total,dev_p,dev_r,dev_f1\n"));
        assert_eq!(csv.lines().count(), 10);

        let empty: &[f64] = &[];
        assert!(threshold_sweep(&labeled, &pool, &dev, &ex, empty, &SelfTrainConfig::default())
            .is_err());
    }

    #[test]
    fn history_csv_schema() {
        let (labeled, pool, dev) = toy_datasets(2, 2);
        let ex = extractor();
        let (_, history) =
            self_train(&labeled, &pool, &dev, &ex, &SelfTrainConfig::default()).unwrap();
        let csv = history.to_csv();
        assert!(csv.starts_with("iteration,added,labeled_size,pool_size,dev_p,dev_r,dev_f1\n"));
        assert_eq!(csv.lines().count(), history.records.len() + 1);
    }
}
