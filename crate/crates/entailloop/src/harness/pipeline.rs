//! End-to-end experiment pipeline: synthesize corpora, split, featurize,
//! train the supervised baseline, sweep self-training, simulate active
//! learning, compare SMOTE at matched added counts, resample, and write every
//! CSV plus a final JSON report.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::active::{self, ActiveConfig, LearningCurve, Strategy};
use crate::classifier::{self, evaluate, evaluate_labels, EvalResult, LinearModel};
use crate::corpus::{self, class_distribution, ClassDistribution, Dataset, Label};
use crate::csvio;
use crate::error::{Error, Result};
use crate::features::{extract_dataset, matrix_to_csv, FeatureExtractor, FeatureVector};
use crate::harness::config::ExperimentConfig;
use crate::harness::derive_seed;
use crate::imbalance::{self, SmoteConfig};
use crate::retrieval::{predictions_to_csv, topn_baseline};
use crate::selftrain::{self, sweep_to_csv, SelfTrainConfig};

/// Aggregated outcome of one full pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub distributions: BTreeMap<String, ClassDistribution>,
    /// Precision/recall/F per evaluated system.
    pub results: BTreeMap<String, EvalResult>,
    pub best_tau: f64,
    /// Approximate-randomization p-values between systems on the test set.
    pub significance: BTreeMap<String, f64>,
    /// Every file written under the output directory, including this report.
    pub manifest: Vec<String>,
    /// Wall-clock per stage; excluded from determinism comparisons.
    pub timings_ms: BTreeMap<String, u128>,
}

pub const REPORT_FILE: &str = "report.json";

struct OutDir {
    dir: PathBuf,
    manifest: Vec<String>,
}

impl OutDir {
    fn write(&mut self, name: &str, content: &str) -> Result<()> {
        csvio::write_text(&self.dir.join(name), content)?;
        self.manifest.push(name.to_string());
        Ok(())
    }

    fn write_jsonl(&mut self, name: &str, dataset: &Dataset) -> Result<()> {
        corpus::save_jsonl(dataset, &self.dir.join(name))?;
        self.manifest.push(name.to_string());
        Ok(())
    }
}

struct Timings(BTreeMap<String, u128>);

impl Timings {
    fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(|e| Error::Stage {
            stage: name.to_string(),
            source: Box::new(e),
        })?;
        self.0.insert(name.to_string(), start.elapsed().as_millis());
        Ok(out)
    }
}

fn probs_and_labels(
    model: &LinearModel,
    vectors: &[FeatureVector],
    threshold: f64,
) -> (Vec<f64>, Vec<Label>) {
    let probs: Vec<f64> = vectors
        .iter()
        .map(|v| model.predict_proba_values(&v.values))
        .collect();
    let labels = probs
        .iter()
        .map(|&p| if p >= threshold { Label::Entail } else { Label::NonEntail })
        .collect();
    (probs, labels)
}

/// Runs every stage with seeds derived from `config.seed` and writes all
/// artifacts under `config.out_dir`. Byte-identical outputs for identical
/// configs, wall-clock fields aside.
pub fn run_experiment_pipeline(config: &ExperimentConfig) -> Result<RunReport> {
    std::fs::create_dir_all(&config.out_dir)
        .map_err(|e| Error::io(config.out_dir.display().to_string(), e))?;
    let mut out = OutDir {
        dir: config.out_dir.clone(),
        manifest: Vec::new(),
    };
    let mut timings = Timings(BTreeMap::new());
    let mut distributions = BTreeMap::new();
    let mut results = BTreeMap::new();
    let mut significance = BTreeMap::new();
    let threshold = config.train.decision_threshold;

    // Corpora.
    let labeled_corpus = timings.stage("synth", || {
        let synth = corpus::SynthConfig {
            seed: derive_seed(config.seed, "synth", 0),
            ..config.synth.clone()
        };
        let ds = corpus::synth_generate(&synth)?;
        out.write_jsonl("corpus.jsonl", &ds)?;
        Ok(ds)
    })?;
    distributions.insert("corpus".to_string(), class_distribution(&labeled_corpus)?);

    let pool = timings.stage("synth-pool", || {
        let synth = corpus::SynthConfig {
            seed: derive_seed(config.seed, "synth-pool", 0),
            ..config.pool_synth.clone()
        };
        let source = corpus::synth_generate(&synth)?;
        distributions.insert("pool-source".to_string(), class_distribution(&source)?);
        let pool = source.strip_labels("pool");
        out.write_jsonl("pool.jsonl", &pool)?;
        Ok(pool)
    })?;

    let (train, dev, test) = timings.stage("split", || {
        let splits = corpus::split_dataset(
            &labeled_corpus,
            config.split_fractions,
            derive_seed(config.seed, "split", 0),
        )?;
        out.write_jsonl("train.jsonl", &splits.0)?;
        out.write_jsonl("dev.jsonl", &splits.1)?;
        out.write_jsonl("test.jsonl", &splits.2)?;
        Ok(splits)
    })?;
    distributions.insert("train".to_string(), class_distribution(&train)?);
    distributions.insert("dev".to_string(), class_distribution(&dev)?);
    distributions.insert("test".to_string(), class_distribution(&test)?);

    // Features.
    let extractor = FeatureExtractor::new(config.features.clone())?;
    let (train_vecs, train_labels, dev_vecs, dev_labels, test_vecs, test_labels) = timings
        .stage("featurize", || {
            let (train_vecs, train_labels) = extract_dataset(&train, &extractor);
            let (dev_vecs, dev_labels) = extract_dataset(&dev, &extractor);
            let (test_vecs, test_labels) = extract_dataset(&test, &extractor);
            let (pool_vecs, _) = extract_dataset(&pool, &extractor);
            out.write(
                "features_train.csv",
                &matrix_to_csv(&train_vecs, train_labels.as_deref()),
            )?;
            out.write("features_dev.csv", &matrix_to_csv(&dev_vecs, dev_labels.as_deref()))?;
            out.write(
                "features_test.csv",
                &matrix_to_csv(&test_vecs, test_labels.as_deref()),
            )?;
            out.write("features_pool.csv", &matrix_to_csv(&pool_vecs, None))?;
            Ok((
                train_vecs,
                train_labels.expect("train split is labeled"),
                dev_vecs,
                dev_labels.expect("dev split is labeled"),
                test_vecs,
                test_labels.expect("test split is labeled"),
            ))
        })?;

    // Supervised baseline.
    let baseline = timings.stage("train-baseline", || {
        let model = classifier::train(&train_vecs, &train_labels, &config.train)?;
        model.save(&out.dir.join("baseline_model.json"))?;
        out.manifest.push("baseline_model.json".to_string());
        Ok(model)
    })?;
    let (dev_probs, _) = probs_and_labels(&baseline, &dev_vecs, threshold);
    results.insert("baseline-dev".to_string(), evaluate(&dev_probs, &dev_labels, threshold)?);
    let (test_probs, baseline_test_preds) = probs_and_labels(&baseline, &test_vecs, threshold);
    results.insert("baseline-test".to_string(), evaluate(&test_probs, &test_labels, threshold)?);

    // Retrieval baseline.
    let retrieval_test_preds = timings.stage("retrieval", || {
        let preds = topn_baseline(&test, &config.retrieval)?;
        out.write("retrieval_predictions.csv", &predictions_to_csv(&preds))?;
        let labels: Vec<Label> = preds.iter().map(|p| p.label).collect();
        Ok(labels)
    })?;
    results.insert(
        "retrieval-test".to_string(),
        evaluate_labels(&retrieval_test_preds, &test_labels),
    );

    // Self-training sweep, then the best tau on test.
    let selftrain_base = SelfTrainConfig {
        tau: 0.5,
        max_iterations: config.selftrain.max_iterations,
        train_options: config.train.clone(),
    };
    let (best_tau, sweep_points) = timings.stage("selftrain-sweep", || {
        let (best_tau, points) = selftrain::threshold_sweep(
            &train,
            &pool,
            &dev,
            &extractor,
            &config.selftrain.tau_grid,
            &selftrain_base,
        )?;
        out.write("selftrain_sweep.csv", &sweep_to_csv(&points))?;
        Ok((best_tau, points))
    })?;

    let selftrain_test_preds = timings.stage("selftrain-best", || {
        let config_best = SelfTrainConfig {
            tau: best_tau,
            ..selftrain_base.clone()
        };
        let (model, history) = selftrain::self_train(&train, &pool, &dev, &extractor, &config_best)?;
        out.write("selftrain_history.csv", &history.to_csv())?;
        model.save(&out.dir.join("selftrain_model.json"))?;
        out.manifest.push("selftrain_model.json".to_string());
        let (probs, preds) = probs_and_labels(&model, &test_vecs, threshold);
        results.insert("selftrain-test".to_string(), evaluate(&probs, &test_labels, threshold)?);
        Ok(preds)
    })?;

    // Active learning, both strategies.
    let mut consumption = String::from("strategy,frac_added,pos_consumed,neg_consumed\n");
    for strategy in [Strategy::Uncertainty, Strategy::Random] {
        let stage_name = format!("active-{strategy}");
        let curve: LearningCurve = timings.stage(&stage_name, || {
            let active_config = ActiveConfig {
                strategy,
                n_runs: config.active.n_runs,
                step: config.active.step,
                budget: config.active.budget,
                retrain_every: config.active.retrain_every,
                seed: derive_seed(config.seed, &stage_name, 0),
                train_options: config.train.clone(),
            };
            let curve = active::simulate(&train, &test, &extractor, &active_config)?;
            out.write(
                &format!("active_curve_{strategy}.csv"),
                &active::curve_to_csv(&curve),
            )?;
            out.write(
                &format!("active_runs_{strategy}.csv"),
                &active::runs_to_csv(&curve),
            )?;
            Ok(curve)
        })?;
        let pool_total = (curve.pool_positives + curve.pool_negatives) as f64;
        for p in &curve.averaged {
            consumption.push_str(&format!(
                "{strategy},{},{},{}\n",
                p.n_labeled as f64 / pool_total,
                p.pos_consumed_frac,
                p.neg_consumed_frac
            ));
        }
    }
    out.write("active_consumption.csv", &consumption)?;

    // SMOTE versus self-training at matched added counts.
    timings.stage("smote-compare", || {
        let standardizer = baseline.standardizer();
        let minority: Vec<FeatureVector> = train_vecs
            .iter()
            .zip(&train_labels)
            .filter(|(_, l)| l.is_positive())
            .map(|(v, _)| v.clone())
            .collect();
        let mut csv = String::from(
            "tau,added,selftrain_p,selftrain_r,selftrain_f1,smote_p,smote_r,smote_f1\n",
        );
        for (i, point) in sweep_points.iter().enumerate() {
            let smote_config = SmoteConfig {
                k: config.smote.k,
                n_synthetic: point.added_total,
                seed: derive_seed(config.seed, "smote", i as u64),
            };
            let synthetics = imbalance::smote(&minority, Some(&standardizer), &smote_config)?;
            let mut features = train_vecs.clone();
            let mut labels = train_labels.clone();
            for (j, s) in synthetics.iter().enumerate() {
                features.push(s.to_feature_vector(extractor.schema(), j));
                labels.push(Label::Entail);
            }
            let model = classifier::train(&features, &labels, &config.train)?;
            let (probs, _) = probs_and_labels(&model, &dev_vecs, threshold);
            let eval = evaluate(&probs, &dev_labels, threshold)?;
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                point.tau,
                point.added_total,
                point.dev_precision,
                point.dev_recall,
                point.dev_f1,
                eval.precision,
                eval.recall,
                eval.f1
            ));
        }
        out.write("smote_compare.csv", &csv)
    })?;

    // Down/up-sampling against the untouched baseline.
    timings.stage("resample", || {
        let mut csv = String::from("strategy,train_pos,train_neg,dev_p,dev_r,dev_f1\n");
        let n_pos = train_labels.iter().filter(|l| l.is_positive()).count();
        let n_neg = train_labels.len() - n_pos;
        let base_eval = results["baseline-dev"];
        csv.push_str(&format!(
            "none,{},{},{},{},{}\n",
            n_pos, n_neg, base_eval.precision, base_eval.recall, base_eval.f1
        ));
        for name in ["down", "up"] {
            let seed = derive_seed(config.seed, &format!("resample-{name}"), 0);
            let (features, labels) = if name == "down" {
                imbalance::downsample(&train_vecs, &train_labels, seed)?
            } else {
                imbalance::upsample(&train_vecs, &train_labels, seed)?
            };
            let model = classifier::train(&features, &labels, &config.train)?;
            let (probs, _) = probs_and_labels(&model, &dev_vecs, threshold);
            let eval = evaluate(&probs, &dev_labels, threshold)?;
            let pos = labels.iter().filter(|l| l.is_positive()).count();
            csv.push_str(&format!(
                "{name},{},{},{},{},{}\n",
                pos,
                labels.len() - pos,
                eval.precision,
                eval.recall,
                eval.f1
            ));
        }
        out.write("resample.csv", &csv)
    })?;

    // Significance of system differences on test.
    timings.stage("significance", || {
        let gold = &test_labels;
        let p_selftrain = classifier::significance_test(
            &selftrain_test_preds,
            &baseline_test_preds,
            gold,
            config.significance_shuffles,
            derive_seed(config.seed, "significance", 0),
        )?;
        significance.insert("selftrain_vs_baseline".to_string(), p_selftrain);
        let p_retrieval = classifier::significance_test(
            &retrieval_test_preds,
            &baseline_test_preds,
            gold,
            config.significance_shuffles,
            derive_seed(config.seed, "significance", 1),
        )?;
        significance.insert("retrieval_vs_baseline".to_string(), p_retrieval);
        Ok(())
    })?;

    out.manifest.push(REPORT_FILE.to_string());
    let report = RunReport {
        config: config.clone(),
        distributions,
        results,
        best_tau,
        significance,
        manifest: out.manifest.clone(),
        timings_ms: timings.0,
    };
    csvio::write_text(
        &config.out_dir.join(REPORT_FILE),
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    Ok(report)
}

/// Human-readable summary table of a report.
pub fn render_report(report: &RunReport) -> String {
    let mut out = String::new();
    out.push_str("== class distributions ==\n");
    for (name, dist) in &report.distributions {
        out.push_str(&format!("{name:<14} {dist}\n"));
    }
    out.push_str("\n== results ==\n");
    out.push_str(&format!("{:<18} {:>9} {:>9} {:>9}\n", "system", "precision", "recall", "f1"));
    for (name, r) in &report.results {
        out.push_str(&format!(
            "{name:<18} {:>9.3} {:>9.3} {:>9.3}\n",
            r.precision, r.recall, r.f1
        ));
    }
    out.push_str(&format!("\nbest tau: {}\n", report.best_tau));
    out.push_str("\n== significance (approximate randomization) ==\n");
    for (name, p) in &report.significance {
        out.push_str(&format!("{name:<24} p = {p}\n"));
    }
    out.push_str(&format!("\n{} files written\n", report.manifest.len()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SynthConfig;
    use tempfile::tempdir;

    fn small_config(out_dir: PathBuf) -> ExperimentConfig {
        ExperimentConfig {
            out_dir,
            synth: SynthConfig {
                n_hypotheses: 12,
                candidates_per_hypothesis: 10,
                positive_fraction: 0.15,
                ..SynthConfig::default()
            },
            pool_synth: SynthConfig {
                n_hypotheses: 6,
                candidates_per_hypothesis: 10,
                positive_fraction: 0.15,
                ..SynthConfig::default()
            },
            active: crate::harness::config::ActiveStage {
                n_runs: 2,
                budget: Some(40),
                ..Default::default()
            },
            significance_shuffles: 200,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn pipeline_writes_manifest_exactly() {
        let dir = tempdir().unwrap();
        let config = small_config(dir.path().join("out"));
        let report = run_experiment_pipeline(&config).unwrap();

        let mut on_disk: Vec<String> = std::fs::read_dir(&config.out_dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        on_disk.sort();
        let mut manifest = report.manifest.clone();
        manifest.sort();
        assert_eq!(on_disk, manifest);

        assert!(report.results.contains_key("baseline-test"));
        assert!(report.results.contains_key("selftrain-test"));
        assert!(report.results.contains_key("retrieval-test"));
        assert!(report.significance.contains_key("selftrain_vs_baseline"));

        let rendered = render_report(&report);
        assert!(rendered.contains("best tau"));
    }

    #[test]
    fn pipeline_is_deterministic_modulo_timings() {
        let dir = tempdir().unwrap();
        let config_a = small_config(dir.path().join("a"));
        let config_b = small_config(dir.path().join("b"));
        let mut report_a = run_experiment_pipeline(&config_a).unwrap();
        let mut report_b = run_experiment_pipeline(&config_b).unwrap();

        for name in &report_a.manifest {
            if name == REPORT_FILE {
                continue;
            }
            let a = std::fs::read(config_a.out_dir.join(name)).unwrap();
            let b = std::fs::read(config_b.out_dir.join(name)).unwrap();
            assert_eq!(a, b, "artifact {name} differs");
        }

        report_a.timings_ms.clear();
        report_b.timings_ms.clear();
        report_a.config.out_dir = PathBuf::new();
        report_b.config.out_dir = PathBuf::new();
        assert_eq!(report_a, report_b);
    }
}
