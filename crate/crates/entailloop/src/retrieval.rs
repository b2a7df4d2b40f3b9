//! Top-N ranked-retrieval baseline: BM25 over each hypothesis's candidate
//! sentences, predicting the N best-ranked candidates as entailing.

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Label};
use crate::error::{Error, Result};
use crate::matchers::tokenize;

/// Retrieval baseline parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub n_top: usize,
    pub k1: f64,
    pub b: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            n_top: 10,
            k1: 1.2,
            b: 0.75,
        }
    }
}

/// One candidate with its BM25 relevance score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub pair_id: String,
    pub score: f64,
}

/// Ranks candidates against a hypothesis with BM25, using the candidate set
/// itself as the corpus for document frequencies and length normalization.
///
/// `IDF(t) = ln(1 + (N - df + 0.5)/(df + 0.5))`, scores sum over distinct
/// hypothesis tokens. Ties order by pair id ascending.
pub fn bm25_rank(
    hypothesis_tokens: &[String],
    candidates: &[(String, Vec<String>)],
    k1: f64,
    b: f64,
) -> Vec<ScoredCandidate> {
    let n_docs = candidates.len();
    let avgdl = if n_docs > 0 {
        candidates.iter().map(|(_, toks)| toks.len()).sum::<usize>() as f64 / n_docs as f64
    } else {
        0.0
    };

    let mut query: Vec<&String> = hypothesis_tokens.iter().collect();
    query.sort_unstable();
    query.dedup();

    let idf: Vec<f64> = query
        .iter()
        .map(|term| {
            let df = candidates.iter().filter(|(_, d)| d.contains(term)).count() as f64;
            (1.0 + (n_docs as f64 - df + 0.5) / (df + 0.5)).ln()
        })
        .collect();

    let mut scored: Vec<ScoredCandidate> = candidates
        .iter()
        .map(|(id, tokens)| {
            let dl = tokens.len() as f64;
            let mut score = 0.0;
            for (term, idf) in query.iter().zip(&idf) {
                let tf = tokens.iter().filter(|t| t == term).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let tf_norm = tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl));
                score += idf * tf_norm;
            }
            ScoredCandidate {
                pair_id: id.clone(),
                score,
            }
        })
        .collect();

    scored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("BM25 scores are finite")
            .then_with(|| a.pair_id.cmp(&b.pair_id))
    });
    scored
}

/// One baseline prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub pair_id: String,
    pub label: Label,
    pub score: f64,
}

/// Per hypothesis, predicts the top `min(n_top, candidates)` BM25-ranked
/// candidates as entailing and the rest as non-entailing. Predictions come
/// back in dataset order.
pub fn topn_baseline(dataset: &Dataset, config: &RetrievalConfig) -> Result<Vec<Prediction>> {
    if config.n_top == 0 {
        return Err(Error::Config("n_top must be at least 1".into()));
    }

    // Group candidate indices by hypothesis id, keeping first-appearance order.
    let mut groups: Vec<(&str, Vec<usize>)> = Vec::new();
    for (i, pair) in dataset.pairs.iter().enumerate() {
        match groups.iter_mut().find(|(h, _)| *h == pair.hypothesis_id) {
            Some((_, idxs)) => idxs.push(i),
            None => groups.push((&pair.hypothesis_id, vec![i])),
        }
    }

    let mut by_id: Vec<Option<Prediction>> = vec![None; dataset.pairs.len()];
    for (_, idxs) in &groups {
        let hyp_tokens: Vec<String> = tokenize(&dataset.pairs[idxs[0]].hypothesis)
            .into_iter()
            .map(|t| t.norm)
            .collect();
        let candidates: Vec<(String, Vec<String>)> = idxs
            .iter()
            .map(|&i| {
                let p = &dataset.pairs[i];
                (p.id.clone(), tokenize(&p.text).into_iter().map(|t| t.norm).collect())
            })
            .collect();
        let ranked = bm25_rank(&hyp_tokens, &candidates, config.k1, config.b);
        let cutoff = config.n_top.min(ranked.len());
        for (rank, cand) in ranked.into_iter().enumerate() {
            let label = if rank < cutoff { Label::Entail } else { Label::NonEntail };
            let idx = idxs
                .iter()
                .find(|&&i| dataset.pairs[i].id == cand.pair_id)
                .copied()
                .expect("ranked candidate comes from this group");
            by_id[idx] = Some(Prediction {
                pair_id: cand.pair_id,
                label,
                score: cand.score,
            });
        }
    }
    Ok(by_id.into_iter().map(|p| p.expect("every pair ranked")).collect())
}

/// CSV with header `pair_id,predicted_label,score`.
pub fn predictions_to_csv(predictions: &[Prediction]) -> String {
    let mut out = String::from("pair_id,predicted_label,score\n");
    for p in predictions {
        out.push_str(&format!(
            "{},{},{}\n",
            crate::csvio::csv_field(&p.pair_id),
            p.label,
            p.score
        ));
    }
    out
}
