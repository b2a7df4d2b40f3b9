//! `entailloop` command line: synthetic corpora, feature extraction,
//! training, evaluation, self-training sweeps, active-learning simulation,
//! resampling experiments, the retrieval baseline, and the full pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/config error.

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use entailloop::active::{self, ActiveConfig, Strategy};
use entailloop::classifier::{self, LinearModel};
use entailloop::corpus::{self, Dataset};
use entailloop::csvio;
use entailloop::features::{extract_dataset, matrix_to_csv, FeatureExtractor};
use entailloop::harness::{self, derive_seed, ExperimentConfig};
use entailloop::imbalance::{self, SmoteConfig};
use entailloop::retrieval::{predictions_to_csv, topn_baseline, RetrievalConfig};
use entailloop::selftrain::{self, SelfTrainConfig};
use entailloop::{Error, Result};

#[derive(Parser)]
#[command(name = "entailloop", version, about = "Entailment-search experiment toolkit")]
struct Cli {
    /// JSON experiment config; command-line flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic imbalanced pair corpus as JSONL.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        hypotheses: Option<usize>,
        #[arg(long)]
        candidates: Option<usize>,
        #[arg(long)]
        positive_fraction: Option<f64>,
    },
    /// Extract the feature matrix of a dataset as CSV.
    Featurize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the entailment classifier and save it as JSON.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        model_out: PathBuf,
        #[arg(long)]
        ridge: Option<f64>,
    },
    /// Evaluate a saved model on a labeled dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Sweep the self-training threshold and evaluate the best tau.
    Selftrain {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        dev: PathBuf,
        #[arg(long)]
        test: Option<PathBuf>,
        /// Grid as start:end:step, e.g. 0.1:0.9:0.1.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Simulate pool-based active learning and emit learning curves.
    Active {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        eval: PathBuf,
        #[arg(long)]
        runs: Option<usize>,
        /// Comma-separated subset of {uncertainty,random}.
        #[arg(long)]
        strategies: Option<String>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        retrain_every: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Compare SMOTE against self-training at matched added counts.
    SmoteCompare {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        dev: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on down-/up-sampled data and compare on a dev set.
    Resample {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Top-N retrieval baseline predictions and evaluation.
    Baseline {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        n_top: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full experiment pipeline and print the aggregated report.
    Report {
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() {
    std::process::exit(run(std::env::args_os()));
}

fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    harness::init_threads_from_env();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            2
        }
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<ExperimentConfig> {
    match path {
        Some(path) => ExperimentConfig::from_file(path),
        None => Ok(ExperimentConfig::default()),
    }
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("grid must be start:end:step, got {spec:?}")));
    }
    let parse = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::Config(format!("invalid grid number {s:?}")))
    };
    let (start, end, step) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
    if step <= 0.0 || end < start {
        return Err(Error::Config("grid step must be positive and end >= start".into()));
    }
    let mut grid = Vec::new();
    let mut tau = start;
    while tau <= end + 1e-12 {
        grid.push((tau * 1e9).round() / 1e9);
        tau += step;
    }
    Ok(grid)
}

fn parse_strategies(spec: &str) -> Result<Vec<Strategy>> {
    spec.split(',')
        .map(|s| match s.trim() {
            "uncertainty" => Ok(Strategy::Uncertainty),
            "random" => Ok(Strategy::Random),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        })
        .collect()
}

fn print_eval(label: &str, eval: &classifier::EvalResult) {
    println!(
        "{label}: precision {:.4}  recall {:.4}  f1 {:.4}  (tp {} fp {} fn {} tn {})",
        eval.precision,
        eval.recall,
        eval.f1,
        eval.true_positives,
        eval.false_positives,
        eval.false_negatives,
        eval.true_negatives
    );
}

fn labeled_probs(model: &LinearModel, dataset: &Dataset, extractor: &FeatureExtractor) -> Result<(Vec<f64>, Vec<corpus::Label>)> {
    let (vectors, labels) = extract_dataset(dataset, extractor);
    let labels = labels.ok_or_else(|| Error::Data(format!("dataset {} is not fully labeled", dataset.name)))?;
    let mut probs = Vec::with_capacity(vectors.len());
    for v in &vectors {
        probs.push(model.predict_proba(v)?);
    }
    Ok((probs, labels))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

fn execute(cli: Cli) -> Result<()> {
    let config = load_config(&cli.config)?;
    let extractor = FeatureExtractor::new(config.features.clone())?;

    match cli.command {
        Command::Synth {
            out,
            seed,
            hypotheses,
            candidates,
            positive_fraction,
        } => {
            let mut synth = config.synth.clone();
            if let Some(seed) = seed {
                synth.seed = seed;
            }
            if let Some(h) = hypotheses {
                synth.n_hypotheses = h;
            }
            if let Some(c) = candidates {
                synth.candidates_per_hypothesis = c;
            }
            if let Some(p) = positive_fraction {
                synth.positive_fraction = p;
            }
            let dataset = corpus::synth_generate(&synth)?;
            corpus::save_jsonl(&dataset, &out)?;
            let dist = corpus::class_distribution(&dataset)?;
            println!("wrote {} pairs ({dist}) to {}", dataset.len(), out.display());
        }

        Command::Featurize { input, out } => {
            let dataset = corpus::load_jsonl(&input)?;
            let (vectors, labels) = extract_dataset(&dataset, &extractor);
            csvio::write_text(&out, &matrix_to_csv(&vectors, labels.as_deref()))?;
            println!("wrote {} feature vectors to {}", vectors.len(), out.display());
        }

        Command::Train {
            train,
            model_out,
            ridge,
        } => {
            let mut opts = config.train.clone();
            if let Some(ridge) = ridge {
                opts.ridge_lambda = ridge;
            }
            let dataset = corpus::load_jsonl(&train)?;
            let (vectors, labels) = extract_dataset(&dataset, &extractor);
            let labels =
                labels.ok_or_else(|| Error::Data("training data must be labeled".into()))?;
            let model = classifier::train(&vectors, &labels, &opts)?;
            model.save(&model_out)?;
            println!("model saved to {}", model_out.display());
        }

        Command::Eval {
            model,
            data,
            threshold,
        } => {
            let model = LinearModel::load(&model)?;
            let dataset = corpus::load_jsonl(&data)?;
            let (probs, labels) = labeled_probs(&model, &dataset, &extractor)?;
            let threshold = threshold.unwrap_or(config.train.decision_threshold);
            let eval = classifier::evaluate(&probs, &labels, threshold)?;
            print_eval(&dataset.name, &eval);
        }

        Command::Selftrain {
            train,
            pool,
            dev,
            test,
            grid,
            out_dir,
        } => {
            ensure_dir(&out_dir)?;
            let train_ds = corpus::load_jsonl(&train)?;
            let pool_ds = corpus::load_jsonl(&pool)?;
            let dev_ds = corpus::load_jsonl(&dev)?;
            let grid = match grid {
                Some(spec) => parse_grid(&spec)?,
                None => config.selftrain.tau_grid.clone(),
            };
            let base = SelfTrainConfig {
                tau: 0.5,
                max_iterations: config.selftrain.max_iterations,
                train_options: config.train.clone(),
            };
            let (best_tau, points) =
                selftrain::threshold_sweep(&train_ds, &pool_ds, &dev_ds, &extractor, &grid, &base)?;
            csvio::write_text(&out_dir.join("selftrain_sweep.csv"), &selftrain::sweep_to_csv(&points))?;

            let best = SelfTrainConfig {
                tau: best_tau,
                ..base
            };
            let (model, history) =
                selftrain::self_train(&train_ds, &pool_ds, &dev_ds, &extractor, &best)?;
            csvio::write_text(&out_dir.join("selftrain_history.csv"), &history.to_csv())?;
            model.save(&out_dir.join("selftrain_model.json"))?;
            println!("best tau {best_tau} (added {} pool pairs)", history.total_added());

            if let Some(test) = test {
                let test_ds = corpus::load_jsonl(&test)?;
                let (probs, labels) = labeled_probs(&model, &test_ds, &extractor)?;
                let eval = classifier::evaluate(&probs, &labels, config.train.decision_threshold)?;
                print_eval("test", &eval);
            }
        }

        Command::Active {
            pool,
            eval,
            runs,
            strategies,
            budget,
            retrain_every,
            seed,
            out_dir,
        } => {
            ensure_dir(&out_dir)?;
            let pool_ds = corpus::load_jsonl(&pool)?;
            let eval_ds = corpus::load_jsonl(&eval)?;
            let strategies = match strategies {
                Some(spec) => parse_strategies(&spec)?,
                None => vec![Strategy::Uncertainty, Strategy::Random],
            };
            let seed = seed.unwrap_or(config.seed);
            for strategy in strategies {
                let active_config = ActiveConfig {
                    strategy,
                    n_runs: runs.unwrap_or(config.active.n_runs),
                    step: config.active.step,
                    budget: budget.or(config.active.budget),
                    retrain_every: retrain_every.unwrap_or(config.active.retrain_every),
                    seed: derive_seed(seed, &format!("active-{strategy}"), 0),
                    train_options: config.train.clone(),
                };
                let curve = active::simulate(&pool_ds, &eval_ds, &extractor, &active_config)?;
                csvio::write_text(
                    &out_dir.join(format!("active_curve_{strategy}.csv")),
                    &active::curve_to_csv(&curve),
                )?;
                csvio::write_text(
                    &out_dir.join(format!("active_runs_{strategy}.csv")),
                    &active::runs_to_csv(&curve),
                )?;
                println!(
                    "{strategy}: {} averaged points over {} runs",
                    curve.averaged.len(),
                    curve.runs.len()
                );
            }
        }

        Command::SmoteCompare {
            train,
            pool,
            dev,
            k,
            out,
        } => {
            let train_ds = corpus::load_jsonl(&train)?;
            let pool_ds = corpus::load_jsonl(&pool)?;
            let dev_ds = corpus::load_jsonl(&dev)?;
            let base = SelfTrainConfig {
                tau: 0.5,
                max_iterations: config.selftrain.max_iterations,
                train_options: config.train.clone(),
            };
            let (_, points) = selftrain::threshold_sweep(
                &train_ds,
                &pool_ds,
                &dev_ds,
                &extractor,
                &config.selftrain.tau_grid,
                &base,
            )?;

            let (train_vecs, train_labels) = extract_dataset(&train_ds, &extractor);
            let train_labels =
                train_labels.ok_or_else(|| Error::Data("training data must be labeled".into()))?;
            let (dev_vecs, dev_labels) = extract_dataset(&dev_ds, &extractor);
            let dev_labels =
                dev_labels.ok_or_else(|| Error::Data("dev data must be labeled".into()))?;
            let baseline = classifier::train(&train_vecs, &train_labels, &config.train)?;
            let standardizer = baseline.standardizer();
            let minority: Vec<_> = train_vecs
                .iter()
                .zip(&train_labels)
                .filter(|(_, l)| l.is_positive())
                .map(|(v, _)| v.clone())
                .collect();

            let mut csv = String::from(
                "tau,added,selftrain_p,selftrain_r,selftrain_f1,smote_p,smote_r,smote_f1\n",
            );
            for (i, point) in points.iter().enumerate() {
                let smote_config = SmoteConfig {
                    k: k.unwrap_or(config.smote.k),
                    n_synthetic: point.added_total,
                    seed: derive_seed(config.seed, "smote", i as u64),
                };
                let synthetics = imbalance::smote(&minority, Some(&standardizer), &smote_config)?;
                let mut features = train_vecs.clone();
                let mut labels = train_labels.clone();
                for (j, s) in synthetics.iter().enumerate() {
                    features.push(s.to_feature_vector(extractor.schema(), j));
                    labels.push(corpus::Label::Entail);
                }
                let model = classifier::train(&features, &labels, &config.train)?;
                let probs: Vec<f64> = dev_vecs
                    .iter()
                    .map(|v| model.predict_proba_values(&v.values))
                    .collect();
                let eval =
                    classifier::evaluate(&probs, &dev_labels, config.train.decision_threshold)?;
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
            csvio::write_text(&out, &csv)?;
            println!("wrote {}", out.display());
        }

        Command::Resample {
            train,
            dev,
            seed,
            out,
        } => {
            let train_ds = corpus::load_jsonl(&train)?;
            let dev_ds = corpus::load_jsonl(&dev)?;
            let (train_vecs, train_labels) = extract_dataset(&train_ds, &extractor);
            let train_labels =
                train_labels.ok_or_else(|| Error::Data("training data must be labeled".into()))?;
            let (dev_vecs, dev_labels) = extract_dataset(&dev_ds, &extractor);
            let dev_labels =
                dev_labels.ok_or_else(|| Error::Data("dev data must be labeled".into()))?;
            let seed = seed.unwrap_or(config.seed);

            let mut csv = String::from("strategy,train_pos,train_neg,dev_p,dev_r,dev_f1\n");
            let mut evaluate_variant = |name: &str,
                                        features: &[entailloop::features::FeatureVector],
                                        labels: &[corpus::Label]|
             -> Result<()> {
                let model = classifier::train(features, labels, &config.train)?;
                let probs: Vec<f64> = dev_vecs
                    .iter()
                    .map(|v| model.predict_proba_values(&v.values))
                    .collect();
                let eval =
                    classifier::evaluate(&probs, &dev_labels, config.train.decision_threshold)?;
                let pos = labels.iter().filter(|l| l.is_positive()).count();
                csv.push_str(&format!(
                    "{name},{},{},{},{},{}\n",
                    pos,
                    labels.len() - pos,
                    eval.precision,
                    eval.recall,
                    eval.f1
                ));
                Ok(())
            };
            evaluate_variant("none", &train_vecs, &train_labels)?;
            let (down_f, down_l) = imbalance::downsample(
                &train_vecs,
                &train_labels,
                derive_seed(seed, "resample-down", 0),
            )?;
            evaluate_variant("down", &down_f, &down_l)?;
            let (up_f, up_l) =
                imbalance::upsample(&train_vecs, &train_labels, derive_seed(seed, "resample-up", 0))?;
            evaluate_variant("up", &up_f, &up_l)?;
            csvio::write_text(&out, &csv)?;
            println!("wrote {}", out.display());
        }

        Command::Baseline { data, n_top, out } => {
            let dataset = corpus::load_jsonl(&data)?;
            let retrieval_config = RetrievalConfig {
                n_top: n_top.unwrap_or(config.retrieval.n_top),
                ..config.retrieval.clone()
            };
            let preds = topn_baseline(&dataset, &retrieval_config)?;
            if let Some(out) = out {
                csvio::write_text(&out, &predictions_to_csv(&preds))?;
            }
            if dataset.pairs.iter().all(|p| p.label.is_some()) {
                let gold = dataset.labels()?;
                let pred_labels: Vec<corpus::Label> = preds.iter().map(|p| p.label).collect();
                let eval = classifier::evaluate_labels(&pred_labels, &gold);
                print_eval(&format!("top-{}", retrieval_config.n_top), &eval);
            } else {
                println!("{} predictions", preds.len());
            }
        }

        Command::Report { out_dir, seed } => {
            let mut pipeline_config = config.clone();
            if let Some(out_dir) = out_dir {
                pipeline_config.out_dir = out_dir;
            }
            if let Some(seed) = seed {
                pipeline_config.seed = seed;
            }
            let report = harness::run_experiment_pipeline(&pipeline_config)?;
            print!("{}", harness::render_report(&report));
            let total: u128 = report.timings_ms.values().sum();
            println!("total stage time: {total} ms");
        }
    }
    Ok(())
}
