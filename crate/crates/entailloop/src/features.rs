//! Feature extraction: one fixed-order numeric vector per text-hypothesis
//! pair, built from term-matcher output plus passage characteristics.
//!
//! Feature schema (canonical order, all enabled by default):
//! - `exact_agg`: per-hypothesis-token best exact-match confidence, averaged.
//! - `all_agg`: per-hypothesis-token best confidence over all matchers, averaged.
//! - `skip_bigram`: matched hypothesis token pairs preserving text order,
//!   normalized by the number of hypothesis token pairs.
//! - `coverage`: matched hypothesis tokens over unmatched plus one.
//! - `sentence_size`: text token count.
//! - `capitalization_frac`: fraction of fully uppercase text tokens.
//! - `has_punct`: text ends in sentence punctuation.
//! - `list_marker`: text starts with an enumerator such as `1.`.

use std::sync::LazyLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Label, Pair};
use crate::error::{Error, Result};
use crate::matchers::{tokenize, MatcherConfig, MatcherKind, TermMatch, TermMatchers, Token};

/// Feature values for one pair, in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub pair_id: String,
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

/// Which features to emit, plus matcher confidence overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub exact_agg: bool,
    pub all_agg: bool,
    pub skip_bigram: bool,
    pub coverage: bool,
    pub sentence_size: bool,
    pub capitalization_frac: bool,
    pub has_punct: bool,
    pub list_marker: bool,
    pub matcher: MatcherConfig,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            exact_agg: true,
            all_agg: true,
            skip_bigram: true,
            coverage: true,
            sentence_size: true,
            capitalization_frac: true,
            has_punct: true,
            list_marker: true,
            matcher: MatcherConfig::default(),
        }
    }
}

impl FeatureConfig {
    /// Enabled feature names in canonical order. The schema depends only on
    /// the configuration, never on the data.
    pub fn schema(&self) -> Vec<String> {
        let all: [(&str, bool); 8] = [
            ("exact_agg", self.exact_agg),
            ("all_agg", self.all_agg),
            ("skip_bigram", self.skip_bigram),
            ("coverage", self.coverage),
            ("sentence_size", self.sentence_size),
            ("capitalization_frac", self.capitalization_frac),
            ("has_punct", self.has_punct),
            ("list_marker", self.list_marker),
        ];
        all.iter()
            .filter(|(_, on)| *on)
            .map(|(name, _)| name.to_string())
            .collect()
    }
}

/// Stateful extractor: the feature configuration plus the matcher battery.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    config: FeatureConfig,
    matchers: TermMatchers,
    schema: Vec<String>,
}

impl FeatureExtractor {
    pub fn new(config: FeatureConfig) -> Result<Self> {
        let schema = config.schema();
        if schema.is_empty() {
            return Err(Error::Config("at least one feature must be enabled".into()));
        }
        let matchers = TermMatchers::new(config.matcher.clone());
        Ok(FeatureExtractor {
            config,
            matchers,
            schema,
        })
    }

    pub fn schema(&self) -> &[String] {
        &self.schema
    }

    /// Extracts the feature vector of one pair.
    pub fn extract(&self, pair: &Pair) -> FeatureVector {
        let text_tokens = tokenize(&pair.text);
        let hyp_tokens = tokenize(&pair.hypothesis);
        let matches = self.matchers.match_all(&text_tokens, &hyp_tokens);

        let n_hyp = hyp_tokens.len();
        let (exact_agg, all_agg) = aggregate_confidences(&matches, n_hyp);

        let mut values = Vec::with_capacity(self.schema.len());
        if self.config.exact_agg {
            values.push(exact_agg);
        }
        if self.config.all_agg {
            values.push(all_agg);
        }
        if self.config.skip_bigram {
            values.push(skip_bigram_feature(&matches, &hyp_tokens));
        }
        if self.config.coverage {
            values.push(coverage_feature(&matches, &hyp_tokens));
        }
        if self.config.sentence_size {
            values.push(text_tokens.len() as f64);
        }
        if self.config.capitalization_frac {
            values.push(capitalization_fraction(&text_tokens));
        }
        if self.config.has_punct {
            values.push(if ends_in_sentence_punctuation(&pair.text) { 1.0 } else { 0.0 });
        }
        if self.config.list_marker {
            values.push(if starts_with_enumerator(&pair.text) { 1.0 } else { 0.0 });
        }

        FeatureVector {
            pair_id: pair.id.clone(),
            names: self.schema.clone(),
            values,
        }
    }
}

/// Per-hypothesis-token best confidences, averaged over hypothesis length:
/// `(exact-only, all matchers)`.
fn aggregate_confidences(matches: &[TermMatch], n_hyp: usize) -> (f64, f64) {
    if n_hyp == 0 {
        return (0.0, 0.0);
    }
    let mut best_exact = vec![0.0f64; n_hyp];
    let mut best_all = vec![0.0f64; n_hyp];
    for m in matches {
        if m.matcher == MatcherKind::Exact && m.confidence > best_exact[m.hyp_pos] {
            best_exact[m.hyp_pos] = m.confidence;
        }
        if m.confidence > best_all[m.hyp_pos] {
            best_all[m.hyp_pos] = m.confidence;
        }
    }
    let n = n_hyp as f64;
    (
        best_exact.iter().sum::<f64>() / n,
        best_all.iter().sum::<f64>() / n,
    )
}

/// Representative text position per matched hypothesis token: the text
/// position of its highest-confidence match, smaller positions winning ties.
fn representative_positions(matches: &[TermMatch], n_hyp: usize) -> Vec<Option<usize>> {
    let mut best: Vec<Option<(f64, usize)>> = vec![None; n_hyp];
    for m in matches {
        let entry = &mut best[m.hyp_pos];
        let better = match entry {
            None => true,
            Some((conf, pos)) => {
                m.confidence > *conf || (m.confidence == *conf && m.text_pos < *pos)
            }
        };
        if better {
            *entry = Some((m.confidence, m.text_pos));
        }
    }
    best.into_iter().map(|e| e.map(|(_, pos)| pos)).collect()
}

/// Fraction of ordered hypothesis token pairs (i < j) whose representative
/// text positions are also ordered, over C(|hyp|, 2).
pub fn skip_bigram_feature(matches: &[TermMatch], hyp_tokens: &[Token]) -> f64 {
    let n = hyp_tokens.len();
    if n < 2 {
        return 0.0;
    }
    let positions = representative_positions(matches, n);
    let mut ordered = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            if let (Some(pi), Some(pj)) = (positions[i], positions[j]) {
                if pi < pj {
                    ordered += 1;
                }
            }
        }
    }
    let total_pairs = n * (n - 1) / 2;
    ordered as f64 / total_pairs as f64
}

/// Matched hypothesis tokens over unmatched plus one; the +1 keeps the ratio
/// finite when every token matches.
pub fn coverage_feature(matches: &[TermMatch], hyp_tokens: &[Token]) -> f64 {
    let n = hyp_tokens.len();
    let mut matched = vec![false; n];
    for m in matches {
        matched[m.hyp_pos] = true;
    }
    let matched_count = matched.iter().filter(|&&m| m).count();
    let unmatched = n - matched_count;
    matched_count as f64 / (unmatched + 1) as f64
}

fn capitalization_fraction(text_tokens: &[Token]) -> f64 {
    if text_tokens.is_empty() {
        return 0.0;
    }
    let upper = text_tokens.iter().filter(|t| t.is_fully_uppercase()).count();
    upper as f64 / text_tokens.len() as f64
}

fn ends_in_sentence_punctuation(text: &str) -> bool {
    matches!(text.trim_end().chars().last(), Some('.' | '!' | '?'))
}

static ENUMERATOR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\d+[.)](\s|$)").unwrap());

fn starts_with_enumerator(text: &str) -> bool {
    ENUMERATOR.is_match(text.trim_start())
}

/// Extracts one vector per pair, in dataset order, plus the gold labels when
/// every pair is labeled.
pub fn extract_dataset(
    dataset: &Dataset,
    extractor: &FeatureExtractor,
) -> (Vec<FeatureVector>, Option<Vec<Label>>) {
    let vectors: Vec<FeatureVector> = dataset
        .pairs
        .par_iter()
        .map(|p| extractor.extract(p))
        .collect();
    let labels: Option<Vec<Label>> = dataset.pairs.iter().map(|p| p.label).collect();
    (vectors, labels)
}

/// Renders vectors as CSV with header `pair_id,label,<feature names...>`.
/// The label column is empty for unlabeled pairs.
pub fn matrix_to_csv(vectors: &[FeatureVector], labels: Option<&[Label]>) -> String {
    let mut out = String::new();
    let names: &[String] = vectors.first().map(|v| v.names.as_slice()).unwrap_or(&[]);
    out.push_str("pair_id,label");
    for name in names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, v) in vectors.iter().enumerate() {
        out.push_str(&crate::csvio::csv_field(&v.pair_id));
        out.push(',');
        if let Some(labels) = labels {
            out.push_str(&labels[i].to_string());
        }
        for value in &v.values {
            out.push(',');
            out.push_str(&value.to_string());
        }
        out.push('\n');
    }
    out
}
