//! LDA topic model trained by collapsed Gibbs sampling, plus fold-in
//! inference for unseen descriptions.
//!
//! Each document owns an RNG stream derived from `(seed, document id)` and
//! documents are swept in id order, so the result does not depend on the
//! order in which documents are supplied.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seed;
use crate::text::{TokenizedDoc, Vocabulary};

/// Per-app topic distribution. Entries are strictly positive and sum to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FuncVector(Vec<f64>);

impl FuncVector {
    /// Wraps raw probabilities without checks.
    pub fn new(probs: Vec<f64>) -> Self {
        FuncVector(probs)
    }

    /// Normalizes non-negative weights.
    pub fn normalized(weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        FuncVector(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(k: usize) -> Self {
        FuncVector(vec![1.0 / k as f64; k])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub topics: usize,
    /// Defaults to `50 / topics`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl LdaParams {
    pub fn new(topics: usize, seed: u64) -> Self {
        LdaParams {
            topics,
            alpha: None,
            beta: 0.01,
            iterations: 1000,
            seed,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.topics as f64)
    }

    fn validate(&self) -> Result<()> {
        if self.topics < 2 {
            return Err(Error::InvalidParameter(format!(
                "topic count must be at least 2, got {}",
                self.topics
            )));
        }
        if self.iterations < 1 {
            return Err(Error::InvalidParameter("need at least one Gibbs sweep".into()));
        }
        if !(self.alpha() > 0.0 && self.beta > 0.0) {
            return Err(Error::InvalidParameter("alpha and beta must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
    pub vocab: Vocabulary,
    /// `topics × vocab` row-stochastic matrix.
    pub topic_word: Vec<Vec<f64>>,
}

impl TopicModel {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: TopicModel = serde_json::from_str(&s)?;
        if model.topic_word.len() != model.topics || model.topic_word.iter().any(|r| r.len() != model.vocab.len()) {
            return Err(Error::ModelMismatch(format!(
                "{}: topic_word shape does not match topics/vocabulary",
                path.display()
            )));
        }
        Ok(model)
    }

    /// Hex SHA-256 of the serialized model.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_json_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Trains LDA on `docs` (`(id, tokens)` pairs, ids unique). Returns the
/// model and one smoothed doc-topic row per input document, in input order.
pub fn train_lda(
    docs: &[(String, TokenizedDoc)],
    vocab: Vocabulary,
    params: &LdaParams,
) -> Result<(TopicModel, Vec<FuncVector>)> {
    params.validate()?;
    if let Some(index) = docs.iter().position(|(_, d)| d.is_empty()) {
        return Err(Error::EmptyDocument { index });
    }
    let k = params.topics;
    let v = vocab.len();
    let alpha = params.alpha();
    let beta = params.beta;
    let v_beta = v as f64 * beta;

    for (_, d) in docs {
        if let Some(&w) = d.tokens.iter().find(|&&w| w as usize >= v) {
            return Err(Error::InvalidParameter(format!(
                "token index {w} outside vocabulary of {v}"
            )));
        }
    }

    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.sort_by(|&a, &b| docs[a].0.cmp(&docs[b].0));

    let mut rngs: Vec<ChaCha8Rng> = docs
        .iter()
        .map(|(id, _)| seed::rng(params.seed, &format!("lda/{id}")))
        .collect();

    // word-major layout: counts for word w live at w*k .. w*k+k
    let mut word_topic = vec![0u32; v * k];
    let mut topic_total = vec![0u32; k];
    let mut doc_topic: Vec<Vec<u32>> = vec![vec![0; k]; docs.len()];
    let mut assign: Vec<Vec<u32>> = docs.iter().map(|(_, d)| vec![0; d.len()]).collect();

    for &d in &order {
        for (pos, &w) in docs[d].1.tokens.iter().enumerate() {
            let z = rngs[d].random_range(0..k);
            assign[d][pos] = z as u32;
            doc_topic[d][z] += 1;
            word_topic[w as usize * k + z] += 1;
            topic_total[z] += 1;
        }
    }

    let mut weights = vec![0.0f64; k];
    for _ in 0..params.iterations {
        for &d in &order {
            let rng = &mut rngs[d];
            let dt = &mut doc_topic[d];
            for (pos, &w) in docs[d].1.tokens.iter().enumerate() {
                let w = w as usize;
                let old = assign[d][pos] as usize;
                dt[old] -= 1;
                word_topic[w * k + old] -= 1;
                topic_total[old] -= 1;

                let wt = &word_topic[w * k..w * k + k];
                let mut total = 0.0;
                for t in 0..k {
                    total +=
                        (f64::from(dt[t]) + alpha) * (f64::from(wt[t]) + beta) / (f64::from(topic_total[t]) + v_beta);
                    weights[t] = total;
                }
                let new = sample_cumulative(&weights, total, rng);

                assign[d][pos] = new as u32;
                dt[new] += 1;
                word_topic[w * k + new] += 1;
                topic_total[new] += 1;
            }
        }
    }

    let topic_word = (0..k)
        .map(|t| {
            let denom = f64::from(topic_total[t]) + v_beta;
            (0..v)
                .map(|w| (f64::from(word_topic[w * k + t]) + beta) / denom)
                .collect()
        })
        .collect();

    let func = docs
        .iter()
        .zip(&doc_topic)
        .map(|((_, d), dt)| smoothed_row(dt, d.len(), alpha))
        .collect();

    let model = TopicModel {
        topics: k,
        alpha,
        beta,
        iterations: params.iterations,
        seed: params.seed,
        vocab,
        topic_word,
    };
    Ok((model, func))
}

fn smoothed_row(counts: &[u32], len: usize, alpha: f64) -> FuncVector {
    let denom = len as f64 + counts.len() as f64 * alpha;
    FuncVector(counts.iter().map(|&c| (f64::from(c) + alpha) / denom).collect())
}

fn sample_cumulative(cumulative: &[f64], total: f64, rng: &mut ChaCha8Rng) -> usize {
    let u = rng.random::<f64>() * total;
    cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1)
}

/// What to do when a document has no in-vocabulary tokens.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OovPolicy {
    #[default]
    Error,
    Uniform,
}

/// Fold-in Gibbs sampling for one document with the topic-word matrix held
/// fixed.
pub fn infer(model: &TopicModel, doc: &TokenizedDoc, iterations: usize, seed: u64) -> Result<FuncVector> {
    let k = model.topics;
    let v = model.vocab.len();
    let tokens: Vec<usize> = doc.tokens.iter().map(|&w| w as usize).filter(|&w| w < v).collect();
    if tokens.is_empty() {
        return Err(Error::NoInVocabularyTokens);
    }
    let mut rng = seed::rng(seed, "infer");
    let mut counts = vec![0u32; k];
    let mut assign = Vec::with_capacity(tokens.len());
    for _ in &tokens {
        let z = rng.random_range(0..k);
        counts[z] += 1;
        assign.push(z);
    }
    let mut weights = vec![0.0; k];
    for _ in 0..iterations.max(1) {
        for (pos, &w) in tokens.iter().enumerate() {
            counts[assign[pos]] -= 1;
            let mut total = 0.0;
            for t in 0..k {
                total += (f64::from(counts[t]) + model.alpha) * model.topic_word[t][w];
                weights[t] = total;
            }
            let z = sample_cumulative(&weights, total, &mut rng);
            assign[pos] = z;
            counts[z] += 1;
        }
    }
    Ok(smoothed_row(&counts, tokens.len(), model.alpha))
}

pub fn infer_with_policy(
    model: &TopicModel,
    doc: &TokenizedDoc,
    iterations: usize,
    seed: u64,
    policy: OovPolicy,
) -> Result<FuncVector> {
    match infer(model, doc, iterations, seed) {
        Err(Error::NoInVocabularyTokens) if policy == OovPolicy::Uniform => Ok(FuncVector::uniform(model.topics)),
        other => other,
    }
}

/// One row of the persisted Func matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuncRow {
    pub app_id: String,
    pub probs: FuncVector,
}

pub fn write_func_jsonl<W: Write>(rows: &[FuncRow], mut w: W) -> Result<()> {
    for row in rows {
        let line = serde_json::to_string(row)?;
        writeln!(w, "{line}").map_err(|e| Error::io("<func output>", e))?;
    }
    Ok(())
}

pub fn read_func_jsonl(text: &str) -> Result<Vec<FuncRow>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
