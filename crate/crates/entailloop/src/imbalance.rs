//! Class-imbalance countermeasures over extracted feature vectors: balanced
//! down-sampling, balanced up-sampling, and SMOTE synthetic oversampling.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::Standardizer;
use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::features::FeatureVector;

/// SMOTE parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoteConfig {
    /// Neighbor count; clamped to the minority size minus one when the
    /// minority class is tiny.
    pub k: usize,
    pub n_synthetic: usize,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig {
            k: 5,
            n_synthetic: 0,
            seed: 42,
        }
    }
}

/// A SMOTE-generated instance: a point on the segment between a minority
/// sample and one of its k nearest minority neighbors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticInstance {
    pub values: Vec<f64>,
    pub source_id: String,
    pub neighbor_id: String,
    pub lambda: f64,
}

impl SyntheticInstance {
    /// Wraps the synthetic values as a feature vector with id `smote-<idx>`.
    pub fn to_feature_vector(&self, schema: &[String], idx: usize) -> FeatureVector {
        FeatureVector {
            pair_id: format!("smote-{idx}"),
            names: schema.to_vec(),
            values: self.values.clone(),
        }
    }
}

fn split_by_class(labels: &[Label]) -> (Vec<usize>, Vec<usize>) {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        if label.is_positive() {
            pos.push(i);
        } else {
            neg.push(i);
        }
    }
    (pos, neg)
}

/// Removes uniformly chosen majority-class rows (seeded, without replacement)
/// until the classes are balanced. Surviving rows keep their original order
/// and values.
pub fn downsample(
    features: &[FeatureVector],
    labels: &[Label],
    seed: u64,
) -> Result<(Vec<FeatureVector>, Vec<Label>)> {
    let (pos, neg) = split_by_class(labels);
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::DegenerateTrainingSet("both classes required to resample".into()));
    }
    let (minority, mut majority) = if pos.len() <= neg.len() { (pos, neg) } else { (neg, pos) };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    majority.shuffle(&mut rng);
    majority.truncate(minority.len());

    let mut keep = vec![false; labels.len()];
    for &i in minority.iter().chain(&majority) {
        keep[i] = true;
    }
    let kept_features = features
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(f, _)| f.clone())
        .collect();
    let kept_labels = labels
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(l, _)| *l)
        .collect();
    Ok((kept_features, kept_labels))
}

/// Duplicates uniformly chosen minority-class rows (seeded, with replacement)
/// until the classes are balanced; duplicates are appended after the
/// originals.
pub fn upsample(
    features: &[FeatureVector],
    labels: &[Label],
    seed: u64,
) -> Result<(Vec<FeatureVector>, Vec<Label>)> {
    let (pos, neg) = split_by_class(labels);
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::DegenerateTrainingSet("both classes required to resample".into()));
    }
    let (minority, majority) = if pos.len() <= neg.len() { (pos, neg) } else { (neg, pos) };

    let mut out_features = features.to_vec();
    let mut out_labels = labels.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..majority.len() - minority.len() {
        let idx = minority[rng.random_range(0..minority.len())];
        out_features.push(features[idx].clone());
        out_labels.push(labels[idx]);
    }
    Ok((out_features, out_labels))
}

/// Indices of the k nearest points to `points[query_index]` by Euclidean
/// distance, excluding the query itself; ties broken by lower index.
pub fn knn(points: &[Vec<f64>], query_index: usize, k: usize) -> Result<Vec<usize>> {
    if points.len() < 2 || k > points.len() - 1 {
        return Err(Error::Config(format!(
            "k={k} exceeds available neighbors ({})",
            points.len().saturating_sub(1)
        )));
    }
    let query = &points[query_index];
    let mut scored: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != query_index)
        .map(|(i, p)| (squared_distance(query, p), i))
        .collect();
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances").then(a.1.cmp(&b.1)));
    Ok(scored.into_iter().take(k).map(|(_, i)| i).collect())
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Linear interpolation `source + lambda * (neighbor - source)`.
pub fn interpolate(source: &[f64], neighbor: &[f64], lambda: f64) -> Vec<f64> {
    source
        .iter()
        .zip(neighbor)
        .map(|(s, n)| s + lambda * (n - s))
        .collect()
}

/// Generates `n_synthetic` SMOTE instances over the minority class.
///
/// Sources rotate round-robin over the minority rows; for each, a neighbor is
/// drawn uniformly from its k nearest minority neighbors and the new point is
/// a uniform interpolation between the two. Neighbor distances are computed
/// in standardized space when a standardizer is supplied; interpolation
/// always happens on the raw values.
pub fn smote(
    minority: &[FeatureVector],
    standardizer: Option<&Standardizer>,
    config: &SmoteConfig,
) -> Result<Vec<SyntheticInstance>> {
    let m = minority.len();
    if m < 2 {
        return Err(Error::Data(format!(
            "SMOTE needs at least 2 minority instances, found {m}"
        )));
    }
    if config.k == 0 {
        return Err(Error::Config("SMOTE k must be at least 1".into()));
    }
    let k = config.k.min(m - 1);

    let space: Vec<Vec<f64>> = match standardizer {
        Some(s) => minority.iter().map(|f| s.transform(&f.values)).collect(),
        None => minority.iter().map(|f| f.values.clone()).collect(),
    };
    let neighbor_lists: Vec<Vec<usize>> = (0..m)
        .map(|i| knn(&space, i, k))
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut synthetics = Vec::with_capacity(config.n_synthetic);
    for i in 0..config.n_synthetic {
        let source_idx = i % m;
        let neighbor_idx = neighbor_lists[source_idx][rng.random_range(0..k)];
        let lambda: f64 = rng.random();
        synthetics.push(SyntheticInstance {
            values: interpolate(&minority[source_idx].values, &minority[neighbor_idx].values, lambda),
            source_id: minority[source_idx].pair_id.clone(),
            neighbor_id: minority[neighbor_idx].pair_id.clone(),
            lambda,
        });
    }
    Ok(synthetics)
}

/// Renders synthetic instances in the feature-matrix CSV schema with
/// source/neighbor/lambda columns appended.
pub fn synthetics_to_csv(synthetics: &[SyntheticInstance], schema: &[String], label: Label) -> String {
    let mut out = String::from("pair_id,label");
    for name in schema {
        out.push(',');
        out.push_str(name);
    }
    out.push_str(",source_id,neighbor_id,lambda\n");
    for (i, s) in synthetics.iter().enumerate() {
        out.push_str(&format!("smote-{i},{label}"));
        for v in &s.values {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push_str(&format!(
            ",{},{},{}\n",
            crate::csvio::csv_field(&s.source_id),
            crate::csvio::csv_field(&s.neighbor_id),
            s.lambda
        ));
    }
    out
}
