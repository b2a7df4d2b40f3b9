//! Text-hypothesis pair corpus: data model, JSONL/TSV serialization, split
//! management, class-distribution accounting, and a synthetic imbalanced
//! corpus generator.
//!
//! The canonical on-disk format is JSONL: a header line describing the
//! dataset (`{"name":...,"role":...}`) followed by one pair object per line.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gold entailment label of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "entail")]
    Entail,
    #[serde(rename = "nonentail")]
    NonEntail,
}

impl Label {
    pub fn is_positive(self) -> bool {
        matches!(self, Label::Entail)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Entail => f.write_str("entail"),
            Label::NonEntail => f.write_str("nonentail"),
        }
    }
}

/// Which role a dataset plays in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Dev,
    Test,
    Unlabeled,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Role::Train => "train",
            Role::Dev => "dev",
            Role::Test => "test",
            Role::Unlabeled => "unlabeled",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Role::Train),
            "dev" => Ok(Role::Dev),
            "test" => Ok(Role::Test),
            "unlabeled" => Ok(Role::Unlabeled),
            other => Err(Error::Data(format!("unknown role {other:?}"))),
        }
    }
}

/// One text-hypothesis instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub id: String,
    pub hypothesis_id: String,
    pub text: String,
    pub hypothesis: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

/// Named, ordered collection of pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub role: Role,
    pub pairs: Vec<Pair>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    name: String,
    role: Role,
}

impl Dataset {
    /// Builds a dataset, enforcing id uniqueness, non-empty text/hypothesis,
    /// and label presence consistent with the role.
    pub fn new(name: impl Into<String>, role: Role, pairs: Vec<Pair>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for pair in &pairs {
            if !seen.insert(pair.id.as_str()) {
                return Err(Error::DuplicateId(pair.id.clone()));
            }
            if pair.text.trim().is_empty() {
                return Err(Error::Data(format!("pair {}: empty text", pair.id)));
            }
            if pair.hypothesis.trim().is_empty() {
                return Err(Error::Data(format!("pair {}: empty hypothesis", pair.id)));
            }
            match (role, pair.label) {
                (Role::Unlabeled, Some(_)) => {
                    return Err(Error::Data(format!(
                        "pair {}: unlabeled dataset contains a label",
                        pair.id
                    )))
                }
                (Role::Train | Role::Dev | Role::Test, None) => {
                    return Err(Error::Data(format!("pair {}: missing label", pair.id)))
                }
                _ => {}
            }
        }
        Ok(Dataset {
            name: name.into(),
            role,
            pairs,
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Gold labels of all pairs; errors if any pair is unlabeled.
    pub fn labels(&self) -> Result<Vec<Label>> {
        self.pairs
            .iter()
            .map(|p| {
                p.label
                    .ok_or_else(|| Error::Data(format!("pair {}: missing label", p.id)))
            })
            .collect()
    }

    /// Copy with all labels removed and role set to `Unlabeled`.
    pub fn strip_labels(&self, name: impl Into<String>) -> Dataset {
        Dataset {
            name: name.into(),
            role: Role::Unlabeled,
            pairs: self
                .pairs
                .iter()
                .map(|p| Pair {
                    label: None,
                    ..p.clone()
                })
                .collect(),
        }
    }
}

/// Reads a dataset from JSONL: a header line then one pair per line.
pub fn load_jsonl(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let (_, header_line) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "missing header line"))?;
    let header_line = header_line.map_err(|e| Error::io(path.display().to_string(), e))?;
    let header: Header = serde_json::from_str(&header_line)
        .map_err(|e| Error::parse(1, format!("invalid header: {e}")))?;

    let mut pairs = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        pairs.push(pair_from_json(&line, line_no)?);
    }
    Dataset::new(header.name, header.role, pairs)
}

fn pair_from_json(line: &str, line_no: usize) -> Result<Pair> {
    let value: serde_json::Value = serde_json::from_str(line)
        .map_err(|e| Error::parse(line_no, format!("invalid JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::parse(line_no, "expected a JSON object"))?;

    let field = |key: &str| -> Result<String> {
        match obj.get(key) {
            None => Err(Error::parse(line_no, format!("missing field {key}"))),
            Some(serde_json::Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(Error::parse(line_no, format!("field {key} must be a string"))),
        }
    };

    let label = match obj.get("label") {
        None => None,
        Some(serde_json::Value::String(s)) => match s.as_str() {
            "entail" => Some(Label::Entail),
            "nonentail" => Some(Label::NonEntail),
            other => {
                return Err(Error::parse(line_no, format!("unknown label {other:?}")));
            }
        },
        Some(_) => return Err(Error::parse(line_no, "field label must be a string")),
    };

    Ok(Pair {
        id: field("id")?,
        hypothesis_id: field("hypothesis_id")?,
        text: field("text")?,
        hypothesis: field("hypothesis")?,
        label,
    })
}

/// Writes a dataset as JSONL with a header line; UTF-8, LF line endings,
/// canonical field order. `load_jsonl` of the result reproduces the dataset.
pub fn save_jsonl(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    let header = Header {
        name: dataset.name.clone(),
        role: dataset.role,
    };
    writeln!(out, "{}", serde_json::to_string(&header).expect("header serializes"))
        .expect("in-memory write");
    for pair in &dataset.pairs {
        writeln!(out, "{}", serde_json::to_string(pair).expect("pair serializes"))
            .expect("in-memory write");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

const TSV_HEADER: &str = "id\thypothesis_id\tlabel\thypothesis\ttext";

/// Imports a dataset from TSV with columns id, hypothesis_id, label,
/// hypothesis, text. An empty label column means unlabeled.
pub fn load_tsv(path: &Path, name: impl Into<String>, role: Role) -> Result<Dataset> {
    let content =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = content.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "missing header row"))?;
    if header != TSV_HEADER {
        return Err(Error::parse(1, format!("expected header {TSV_HEADER:?}")));
    }
    let mut pairs = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(Error::parse(
                line_no,
                format!("expected 5 tab-separated columns, found {}", cols.len()),
            ));
        }
        let label = match cols[2] {
            "" => None,
            "entail" => Some(Label::Entail),
            "nonentail" => Some(Label::NonEntail),
            other => return Err(Error::parse(line_no, format!("unknown label {other:?}"))),
        };
        pairs.push(Pair {
            id: cols[0].to_string(),
            hypothesis_id: cols[1].to_string(),
            label,
            hypothesis: cols[3].to_string(),
            text: cols[4].to_string(),
        });
    }
    Dataset::new(name, role, pairs)
}

/// Label counts of a fully labeled dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub positives: usize,
    pub negatives: usize,
    pub positive_fraction: f64,
}

impl ClassDistribution {
    pub fn total(&self) -> usize {
        self.positives + self.negatives
    }
}

impl fmt::Display for ClassDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} of {} ({:.1}%)",
            self.positives,
            self.total(),
            self.positive_fraction * 100.0
        )
    }
}

/// Counts entailing/non-entailing pairs. Errors if any pair is unlabeled.
pub fn class_distribution(dataset: &Dataset) -> Result<ClassDistribution> {
    let labels = dataset.labels()?;
    let positives = labels.iter().filter(|l| l.is_positive()).count();
    let negatives = labels.len() - positives;
    let total = positives + negatives;
    let positive_fraction = if total > 0 {
        positives as f64 / total as f64
    } else {
        0.0
    };
    Ok(ClassDistribution {
        positives,
        negatives,
        positive_fraction,
    })
}

/// Configuration of the synthetic imbalanced corpus generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_hypotheses: usize,
    pub candidates_per_hypothesis: usize,
    /// Fraction of entailing pairs over the whole corpus; defaults to 0.05.
    pub positive_fraction: f64,
    pub vocab_size: usize,
    pub hypothesis_len: (usize, usize),
    /// Fraction of hypothesis tokens copied into entailing texts.
    pub overlap_pos: f64,
    /// Maximum token-overlap fraction of non-entailing texts.
    pub overlap_neg: f64,
    pub noise_tokens: (usize, usize),
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_hypotheses: 80,
            candidates_per_hypothesis: 25,
            positive_fraction: 0.05,
            vocab_size: 120,
            hypothesis_len: (3, 6),
            overlap_pos: 0.5,
            overlap_neg: 0.45,
            noise_tokens: (8, 16),
            seed: 42,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.n_hypotheses == 0 || self.candidates_per_hypothesis == 0 {
            return Err(Error::Config("corpus dimensions must be positive".into()));
        }
        if !(self.positive_fraction > 0.0 && self.positive_fraction < 1.0) {
            return Err(Error::Config("positive_fraction must be in (0,1)".into()));
        }
        if !(self.overlap_pos > 0.0 && self.overlap_pos <= 1.0) {
            return Err(Error::Config("overlap_pos must be in (0,1]".into()));
        }
        if !(self.overlap_neg >= 0.0 && self.overlap_neg < self.overlap_pos) {
            return Err(Error::Config("overlap_neg must be in [0, overlap_pos)".into()));
        }
        if self.hypothesis_len.0 == 0 || self.hypothesis_len.0 > self.hypothesis_len.1 {
            return Err(Error::Config("invalid hypothesis_len range".into()));
        }
        if self.noise_tokens.0 > self.noise_tokens.1 {
            return Err(Error::Config("invalid noise_tokens range".into()));
        }
        if self.vocab_size < self.hypothesis_len.1 {
            return Err(Error::Config(
                "vocabulary too small to draw distinct hypothesis tokens".into(),
            ));
        }
        Ok(())
    }
}

const NEGATIVE_SAMPLING_ATTEMPTS: usize = 1000;

/// Generates a labeled synthetic corpus. Entailing texts embed a contiguous
/// span of their hypothesis; non-entailing texts are uniform draws rejected
/// until their token overlap stays at or below `overlap_neg`. The output is a
/// pure function of the config.
pub fn synth_generate(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // Every third word is capitalized so proper-noun-style runs occur and the
    // multiword grouping of the tokenizer sees realistic input.
    let width = config.vocab_size.saturating_sub(1).to_string().len().max(3);
    let vocab: Vec<String> = (0..config.vocab_size)
        .map(|i| {
            if i % 3 == 0 {
                format!("W{i:0width$}")
            } else {
                format!("w{i:0width$}")
            }
        })
        .collect();

    let total = config.n_hypotheses * config.candidates_per_hypothesis;
    let n_pos = (config.positive_fraction * total as f64).round() as usize;
    let mut positive_flags = vec![false; total];
    for flag in positive_flags.iter_mut().take(n_pos) {
        *flag = true;
    }
    positive_flags.shuffle(&mut rng);

    let hyp_width = config.n_hypotheses.saturating_sub(1).to_string().len().max(3);
    let cand_width = config
        .candidates_per_hypothesis
        .saturating_sub(1)
        .to_string()
        .len()
        .max(3);

    let mut pairs = Vec::with_capacity(total);
    for h in 0..config.n_hypotheses {
        let hyp_len = rng.random_range(config.hypothesis_len.0..=config.hypothesis_len.1);
        let hyp_indices = rand::seq::index::sample(&mut rng, config.vocab_size, hyp_len);
        let hyp_tokens: Vec<&str> = hyp_indices.iter().map(|i| vocab[i].as_str()).collect();
        let hyp_set: BTreeSet<&str> = hyp_tokens.iter().copied().collect();
        let hypothesis = hyp_tokens.join(" ");
        let hypothesis_id = format!("h{h:0hyp_width$}");

        let span_len = ((config.overlap_pos * hyp_len as f64).ceil() as usize).clamp(1, hyp_len);

        for c in 0..config.candidates_per_hypothesis {
            let positive = positive_flags[h * config.candidates_per_hypothesis + c];
            let noise_n = rng.random_range(config.noise_tokens.0..=config.noise_tokens.1);

            let text_tokens: Vec<&str> = if positive {
                let start = rng.random_range(0..=hyp_len - span_len);
                let prefix_n = rng.random_range(0..=noise_n);
                let mut tokens = Vec::with_capacity(span_len + noise_n);
                for _ in 0..prefix_n {
                    tokens.push(vocab[rng.random_range(0..config.vocab_size)].as_str());
                }
                tokens.extend(&hyp_tokens[start..start + span_len]);
                for _ in prefix_n..noise_n {
                    tokens.push(vocab[rng.random_range(0..config.vocab_size)].as_str());
                }
                tokens
            } else {
                let text_len = span_len + noise_n;
                let max_shared =
                    (config.overlap_neg * hyp_set.len() as f64).floor() as usize;
                let mut accepted = None;
                for _ in 0..NEGATIVE_SAMPLING_ATTEMPTS {
                    let tokens: Vec<&str> = (0..text_len)
                        .map(|_| vocab[rng.random_range(0..config.vocab_size)].as_str())
                        .collect();
                    let shared = tokens
                        .iter()
                        .collect::<BTreeSet<_>>()
                        .iter()
                        .filter(|t| hyp_set.contains(**t))
                        .count();
                    if shared <= max_shared {
                        accepted = Some(tokens);
                        break;
                    }
                }
                accepted.ok_or_else(|| {
                    Error::Config(
                        "vocabulary too small to satisfy overlap constraints".into(),
                    )
                })?
            };

            pairs.push(Pair {
                id: format!("h{h:0hyp_width$}c{c:0cand_width$}"),
                hypothesis_id: hypothesis_id.clone(),
                text: text_tokens.join(" "),
                hypothesis: hypothesis.clone(),
                label: Some(if positive { Label::Entail } else { Label::NonEntail }),
            });
        }
    }
    Dataset::new("synthetic", Role::Train, pairs)
}

/// Splits a dataset into train/dev/test by hypothesis id, so every candidate
/// of a hypothesis lands in the same split.
///
/// Procedure: collect distinct hypothesis ids in first-appearance order,
/// Fisher-Yates shuffle them with `ChaCha8Rng::seed_from_u64(seed)`, then take
/// the first `round(f_train * H)` ids for train and the next
/// `round((f_train + f_dev) * H) - round(f_train * H)` for dev; the remainder
/// is test. Pairs keep their original relative order within each split.
pub fn split_dataset(
    dataset: &Dataset,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    let (f_train, f_dev, f_test) = fractions;
    if f_train < 0.0 || f_dev < 0.0 || f_test < 0.0 {
        return Err(Error::Config("split fractions must be non-negative".into()));
    }
    if (f_train + f_dev + f_test - 1.0).abs() > 1e-9 {
        return Err(Error::Config("split fractions must sum to 1".into()));
    }

    let mut hyp_ids: Vec<&str> = Vec::new();
    let mut seen = BTreeSet::new();
    for pair in &dataset.pairs {
        if seen.insert(pair.hypothesis_id.as_str()) {
            hyp_ids.push(pair.hypothesis_id.as_str());
        }
    }
    if hyp_ids.len() < 3 {
        return Err(Error::Data(format!(
            "need at least 3 hypotheses to split, found {}",
            hyp_ids.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    hyp_ids.shuffle(&mut rng);

    let h = hyp_ids.len();
    let n_train = (f_train * h as f64).round() as usize;
    let n_train_dev = ((f_train + f_dev) * h as f64).round() as usize;
    let n_train = n_train.min(h);
    let n_train_dev = n_train_dev.clamp(n_train, h);

    let train_ids: BTreeSet<&str> = hyp_ids[..n_train].iter().copied().collect();
    let dev_ids: BTreeSet<&str> = hyp_ids[n_train..n_train_dev].iter().copied().collect();

    let mut train = Vec::new();
    let mut dev = Vec::new();
    let mut test = Vec::new();
    for pair in &dataset.pairs {
        if train_ids.contains(pair.hypothesis_id.as_str()) {
            train.push(pair.clone());
        } else if dev_ids.contains(pair.hypothesis_id.as_str()) {
            dev.push(pair.clone());
        } else {
            test.push(pair.clone());
        }
    }

    Ok((
        Dataset {
            name: format!("{}-train", dataset.name),
            role: Role::Train,
            pairs: train,
        },
        Dataset {
            name: format!("{}-dev", dataset.name),
            role: Role::Dev,
            pairs: dev,
        },
        Dataset {
            name: format!("{}-test", dataset.name),
            role: Role::Test,
            pairs: test,
        },
    ))
}

/// Mean and population standard deviation of text-side length, counted in
/// whitespace-delimited words.
pub fn sentence_length_stats(dataset: &Dataset) -> Result<(f64, f64)> {
    if dataset.is_empty() {
        return Err(Error::Data("cannot compute length stats of an empty dataset".into()));
    }
    let lengths: Vec<f64> = dataset
        .pairs
        .iter()
        .map(|p| p.text.split_whitespace().count() as f64)
        .collect();
    let n = lengths.len() as f64;
    let mean = lengths.iter().sum::<f64>() / n;
    let variance = lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, variance.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use tempfile::tempdir;

    fn pair(id: &str, hyp_id: &str, label: Option<Label>) -> Pair {
        Pair {
            id: id.to_string(),
            hypothesis_id: hyp_id.to_string(),
            text: format!("text of {id}"),
            hypothesis: format!("hypothesis {hyp_id}"),
            label,
        }
    }

    #[test]
    fn load_jsonl_empty_dataset() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "{\"name\":\"e\",\"role\":\"unlabeled\"}\n").unwrap();
        let ds = load_jsonl(&path).unwrap();
        assert_eq!(ds.len(), 0);
        assert_eq!(ds.role, Role::Unlabeled);
    }

    #[test]
    fn load_jsonl_missing_field_names_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            concat!(
                "{\"name\":\"x\",\"role\":\"train\"}\n",
                "{\"id\":\"a\",\"hypothesis_id\":\"h1\",\"text\":\"t\",\"hypothesis\":\"h\",\"label\":\"entail\"}\n",
                "{\"id\":\"b\",\"hypothesis_id\":\"h1\",\"hypothesis\":\"h\",\"label\":\"entail\"}\n",
            ),
        )
        .unwrap();
        let err = load_jsonl(&path).unwrap_err().to_string();
        assert_eq!(err, "line 3: missing field text");
    }

    #[test]
    fn load_jsonl_preserves_order() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("two.jsonl");
        std::fs::write(
            &path,
            concat!(
                "{\"name\":\"x\",\"role\":\"train\"}\n",
                "{\"id\":\"b\",\"hypothesis_id\":\"h1\",\"text\":\"t1\",\"hypothesis\":\"h\",\"label\":\"entail\"}\n",
                "{\"id\":\"a\",\"hypothesis_id\":\"h1\",\"text\":\"t2\",\"hypothesis\":\"h\",\"label\":\"nonentail\"}\n",
            ),
        )
        .unwrap();
        let ds = load_jsonl(&path).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.pairs[0].id, "b");
        assert_eq!(ds.pairs[1].id, "a");
    }

    #[test]
    fn load_jsonl_duplicate_id_is_named() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("dup.jsonl");
        std::fs::write(
            &path,
            concat!(
                "{\"name\":\"x\",\"role\":\"train\"}\n",
                "{\"id\":\"a\",\"hypothesis_id\":\"h1\",\"text\":\"t\",\"hypothesis\":\"h\",\"label\":\"entail\"}\n",
                "{\"id\":\"a\",\"hypothesis_id\":\"h1\",\"text\":\"t\",\"hypothesis\":\"h\",\"label\":\"entail\"}\n",
            ),
        )
        .unwrap();
        let err = load_jsonl(&path).unwrap_err().to_string();
        assert!(err.contains("duplicate pair id a"), "{err}");
    }

    #[test]
    fn save_jsonl_omits_absent_label_and_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("out.jsonl");
        let ds = Dataset::new(
            "pool",
            Role::Unlabeled,
            vec![pair("a", "h1", None), pair("b", "h1", None)],
        )
        .unwrap();
        save_jsonl(&ds, &path).unwrap();
        let content = std::fs::read_to_string(&path).unwrap();
        assert!(!content.contains("\"label\""));
        assert_eq!(load_jsonl(&path).unwrap(), ds);
    }

    #[test]
    fn save_jsonl_empty_dataset_is_header_only() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        let ds = Dataset::new("e", Role::Unlabeled, vec![]).unwrap();
        save_jsonl(&ds, &path).unwrap();
        let content = std::fs::read_to_string(&path).unwrap();
        assert_eq!(content.lines().count(), 1);
    }

    #[test]
    fn tsv_import() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("in.tsv");
        std::fs::write(
            &path,
            "id\thypothesis_id\tlabel\thypothesis\ttext\np1\th1\tentail\tthe hyp\tthe text\np2\th1\t\tthe hyp\tother text\n",
        )
        .unwrap();
        let ds = load_tsv(&path, "fixture", Role::Unlabeled);
        // Mixed labels under role Unlabeled violate the role invariant.
        assert!(ds.is_err());
        let err = load_tsv(&path, "fixture", Role::Train).unwrap_err().to_string();
        assert!(err.contains("missing label"), "{err}");
    }

    #[test]
    fn tsv_import_labeled() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("in.tsv");
        std::fs::write(
            &path,
            "id\thypothesis_id\tlabel\thypothesis\ttext\np1\th1\tentail\tthe hyp\tthe text\np2\th1\tnonentail\tthe hyp\tother text\n",
        )
        .unwrap();
        let ds = load_tsv(&path, "fixture", Role::Train).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.pairs[0].label, Some(Label::Entail));
        assert_eq!(ds.pairs[1].text, "other text");
    }

    #[test]
    fn class_distribution_matches_table_rows() {
        let mut pairs = Vec::new();
        for i in 0..20_104 {
            let label = if i < 810 { Label::Entail } else { Label::NonEntail };
            pairs.push(pair(&format!("p{i}"), "h1", Some(label)));
        }
        let ds = Dataset::new("newswire-train", Role::Train, pairs).unwrap();
        let dist = class_distribution(&ds).unwrap();
        assert_eq!(dist.positives, 810);
        assert!((dist.positive_fraction - 0.0403).abs() < 5e-4);
        assert_eq!(format!("{dist}"), "810 of 20104 (4.0%)");
    }

    #[test]
    fn class_distribution_clinical_row_and_degenerate() {
        let mut pairs = Vec::new();
        for i in 0..7_026 {
            let label = if i < 293 { Label::Entail } else { Label::NonEntail };
            pairs.push(pair(&format!("p{i}"), "h1", Some(label)));
        }
        let ds = Dataset::new("clinical-train", Role::Train, pairs).unwrap();
        let dist = class_distribution(&ds).unwrap();
        assert!((dist.positive_fraction - 0.0417).abs() < 5e-4);

        let all_pos = Dataset::new(
            "pos",
            Role::Train,
            vec![pair("a", "h1", Some(Label::Entail)), pair("b", "h1", Some(Label::Entail))],
        )
        .unwrap();
        assert_eq!(class_distribution(&all_pos).unwrap().positive_fraction, 1.0);
    }

    #[test]
    fn class_distribution_rejects_unlabeled() {
        let ds = Dataset::new("pool", Role::Unlabeled, vec![pair("a", "h1", None)]).unwrap();
        assert!(class_distribution(&ds).is_err());
    }

    #[test]
    fn synth_is_deterministic() {
        let config = SynthConfig {
            n_hypotheses: 10,
            candidates_per_hypothesis: 20,
            ..SynthConfig::default()
        };
        let a = synth_generate(&config).unwrap();
        let b = synth_generate(&config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn synth_realized_positive_count_is_rounded() {
        let config = SynthConfig {
            n_hypotheses: 100,
            candidates_per_hypothesis: 20,
            positive_fraction: 0.05,
            ..SynthConfig::default()
        };
        let ds = synth_generate(&config).unwrap();
        assert_eq!(ds.len(), 2000);
        let dist = class_distribution(&ds).unwrap();
        assert_eq!(dist.positives, 100);
    }

    #[test]
    fn synth_overlap_constraints_hold() {
        let config = SynthConfig {
            n_hypotheses: 20,
            candidates_per_hypothesis: 10,
            positive_fraction: 0.2,
            ..SynthConfig::default()
        };
        let ds = synth_generate(&config).unwrap();
        for p in &ds.pairs {
            // Brute-force token intersection.
            let hyp: BTreeSet<&str> = p.hypothesis.split_whitespace().collect();
            let text: BTreeSet<&str> = p.text.split_whitespace().collect();
            let shared = hyp.intersection(&text).count();
            let frac = shared as f64 / hyp.len() as f64;
            match p.label.unwrap() {
                Label::Entail => assert!(
                    frac >= config.overlap_pos,
                    "positive {} overlap {frac} below {}",
                    p.id,
                    config.overlap_pos
                ),
                Label::NonEntail => assert!(
                    frac <= config.overlap_neg,
                    "negative {} overlap {frac} above {}",
                    p.id,
                    config.overlap_neg
                ),
            }
        }
    }

    #[test]
    fn synth_rejects_impossible_overlap() {
        let config = SynthConfig {
            vocab_size: 10,
            hypothesis_len: (9, 10),
            overlap_neg: 0.0,
            overlap_pos: 0.5,
            noise_tokens: (8, 12),
            ..SynthConfig::default()
        };
        // Nearly every vocab token is a hypothesis token, so a 12-token
        // negative draw cannot avoid all of them.
        assert!(synth_generate(&config).is_err());
    }

    #[test]
    fn split_degenerate_fractions() {
        let ds = synth_generate(&SynthConfig {
            n_hypotheses: 10,
            candidates_per_hypothesis: 5,
            ..SynthConfig::default()
        })
        .unwrap();
        let (train, dev, test) = split_dataset(&ds, (1.0, 0.0, 0.0), 7).unwrap();
        assert_eq!(train.len(), ds.len());
        assert!(dev.is_empty());
        assert!(test.is_empty());
    }

    #[test]
    fn split_groups_by_hypothesis() {
        let ds = synth_generate(&SynthConfig {
            n_hypotheses: 12,
            candidates_per_hypothesis: 6,
            ..SynthConfig::default()
        })
        .unwrap();
        let (train, dev, test) = split_dataset(&ds, (0.5, 0.25, 0.25), 7).unwrap();
        let sets: Vec<BTreeSet<&str>> = [&train, &dev, &test]
            .iter()
            .map(|d| d.pairs.iter().map(|p| p.hypothesis_id.as_str()).collect())
            .collect();
        assert!(sets[0].is_disjoint(&sets[1]));
        assert!(sets[0].is_disjoint(&sets[2]));
        assert!(sets[1].is_disjoint(&sets[2]));
        assert_eq!(train.len() + dev.len() + test.len(), ds.len());
    }

    #[test]
    fn split_matches_documented_shuffle_procedure() {
        // Ten hypotheses, fractions (0.5, 0.25, 0.25), seed 7: rerun the
        // documented procedure independently and compare assignments.
        let mut pairs = Vec::new();
        for h in 0..10 {
            for c in 0..3 {
                pairs.push(pair(
                    &format!("h{h}c{c}"),
                    &format!("h{h}"),
                    Some(if c == 0 { Label::Entail } else { Label::NonEntail }),
                ));
            }
        }
        let ds = Dataset::new("toy", Role::Train, pairs).unwrap();
        let (train, dev, test) = split_dataset(&ds, (0.5, 0.25, 0.25), 7).unwrap();

        let mut expected_ids: Vec<String> = (0..10).map(|h| format!("h{h}")).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        expected_ids.shuffle(&mut rng);
        let n_train = (0.5f64 * 10.0).round() as usize;
        let n_train_dev = (0.75f64 * 10.0).round() as usize;
        let expect_train: BTreeSet<&str> =
            expected_ids[..n_train].iter().map(String::as_str).collect();
        let expect_dev: BTreeSet<&str> = expected_ids[n_train..n_train_dev]
            .iter()
            .map(String::as_str)
            .collect();

        let got_train: BTreeSet<&str> =
            train.pairs.iter().map(|p| p.hypothesis_id.as_str()).collect();
        let got_dev: BTreeSet<&str> = dev.pairs.iter().map(|p| p.hypothesis_id.as_str()).collect();
        assert_eq!(got_train, expect_train);
        assert_eq!(got_dev, expect_dev);
        assert_eq!(test.pairs.len(), 3 * (10 - n_train_dev));
    }

    #[test]
    fn split_needs_three_hypotheses() {
        let ds = Dataset::new(
            "toy",
            Role::Train,
            vec![
                pair("a", "h1", Some(Label::Entail)),
                pair("b", "h2", Some(Label::NonEntail)),
            ],
        )
        .unwrap();
        assert!(split_dataset(&ds, (0.4, 0.3, 0.3), 1).is_err());
    }

    #[test]
    fn length_stats_hand_cases() {
        let mk = |texts: &[&str]| {
            Dataset::new(
                "t",
                Role::Unlabeled,
                texts
                    .iter()
                    .enumerate()
                    .map(|(i, t)| Pair {
                        id: format!("p{i}"),
                        hypothesis_id: "h".into(),
                        text: t.to_string(),
                        hypothesis: "h".into(),
                        label: None,
                    })
                    .collect(),
            )
            .unwrap()
        };
        let (mean, std) = sentence_length_stats(&mk(&["a b c d e f g"; 3])).unwrap();
        assert_eq!((mean, std), (7.0, 0.0));
        let (mean, std) = sentence_length_stats(&mk(&["one", "one two three"])).unwrap();
        assert_eq!((mean, std), (2.0, 1.0));
        assert!(sentence_length_stats(&mk(&[])).is_err());
    }

    #[test]
    fn length_stats_match_two_pass_oracle() {
        let ds = synth_generate(&SynthConfig {
            n_hypotheses: 10,
            candidates_per_hypothesis: 10,
            ..SynthConfig::default()
        })
        .unwrap();
        let (mean, std) = sentence_length_stats(&ds).unwrap();

        let lengths: Vec<f64> = ds
            .pairs
            .iter()
            .map(|p| p.text.split_whitespace().count() as f64)
            .collect();
        let oracle_mean = lengths.iter().sum::<f64>() / lengths.len() as f64;
        let oracle_var = lengths
            .iter()
            .map(|l| (l - oracle_mean) * (l - oracle_mean))
            .sum::<f64>()
            / lengths.len() as f64;
        assert!((mean - oracle_mean).abs() < 1e-12);
        assert!((std - oracle_var.sqrt()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn jsonl_round_trip_identity(
            n_hyp in 1usize..6,
            cands in 1usize..6,
            seed in 0u64..1000,
        ) {
            let config = SynthConfig {
                n_hypotheses: n_hyp.max(3),
                candidates_per_hypothesis: cands,
                positive_fraction: 0.2,
                seed,
                ..SynthConfig::default()
            };
            let ds = synth_generate(&config).unwrap();
            let dir = tempdir().unwrap();
            let path = dir.path().join("rt.jsonl");
            save_jsonl(&ds, &path).unwrap();
            let loaded = load_jsonl(&path).unwrap();
            prop_assert_eq!(&loaded, &ds);
            // Re-saving the loaded dataset reproduces the bytes exactly.
            let path2 = dir.path().join("rt2.jsonl");
            save_jsonl(&loaded, &path2).unwrap();
            prop_assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
        }

        #[test]
        fn split_partitions_every_pair(seed in 0u64..500) {
            let ds = synth_generate(&SynthConfig {
                n_hypotheses: 9,
                candidates_per_hypothesis: 4,
                seed,
                ..SynthConfig::default()
            })
            .unwrap();
            let (train, dev, test) = split_dataset(&ds, (0.6, 0.2, 0.2), seed).unwrap();
            let mut ids: Vec<&str> = train
                .pairs
                .iter()
                .chain(&dev.pairs)
                .chain(&test.pairs)
                .map(|p| p.id.as_str())
                .collect();
            ids.sort_unstable();
            let mut expected: Vec<&str> = ds.pairs.iter().map(|p| p.id.as_str()).collect();
            expected.sort_unstable();
            prop_assert_eq!(ids, expected);
        }
    }
}
