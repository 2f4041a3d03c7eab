//! Synthetic corpus generator with planted ground truth.
//!
//! Each latent topic owns a word list and a ground-truth permission set.
//! Benign apps declare their topic's set, and with probability
//! `overprivilege_rate` also a few planted extras from the risk pool.
//! Malicious apps declare their topic's set plus risk-pool permissions.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    derive_code_permissions, ApiPermissionMap, AppRecord, Corpus, Label, PermSet, PermissionId, PermissionRegistry,
    ProtectionLevel, RawRecord,
};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_benign: usize,
    pub n_malicious: usize,
    pub topics: usize,
    pub vocab_size: usize,
    pub perms_per_topic: usize,
    /// Dangerous permissions reserved for over-declaration.
    pub risk_pool: usize,
    /// Risk-pool permissions declared by each malicious app.
    pub risk_per_malicious: usize,
    pub overprivilege_rate: f64,
    /// Extras planted into each over-privileged benign app.
    pub planted_extras: usize,
    pub min_doc_len: usize,
    pub max_doc_len: usize,
    /// Share of description words drawn from the app's topic.
    pub topic_word_share: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_benign: 200,
            n_malicious: 40,
            topics: 6,
            vocab_size: 300,
            perms_per_topic: 4,
            risk_pool: 16,
            risk_per_malicious: 4,
            overprivilege_rate: 0.4,
            planted_extras: 2,
            min_doc_len: 60,
            max_doc_len: 100,
            topic_word_share: 0.85,
            seed: 1,
        }
    }
}

impl SynthSpec {
    pub fn total_permissions(&self) -> usize {
        self.topics * self.perms_per_topic + self.risk_pool
    }

    fn validate(&self, registry: &PermissionRegistry) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_benign == 0 || self.n_malicious == 0 || self.topics == 0 || self.perms_per_topic == 0 {
            return bad("synthetic corpus counts must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.overprivilege_rate) {
            return bad(format!("overprivilege rate {} not in [0, 1]", self.overprivilege_rate));
        }
        if !(0.0..=1.0).contains(&self.topic_word_share) {
            return bad(format!("topic word share {} not in [0, 1]", self.topic_word_share));
        }
        if self.min_doc_len == 0 || self.min_doc_len > self.max_doc_len {
            return bad("document length range is empty".into());
        }
        if self.vocab_size < 2 * (self.topics + 1) {
            return bad(format!(
                "vocabulary of {} is too small for {} topics",
                self.vocab_size, self.topics
            ));
        }
        if self.total_permissions() > registry.len() {
            return bad(format!(
                "{} permissions requested but the registry holds {}",
                self.total_permissions(),
                registry.len()
            ));
        }
        let dangerous = registry
            .iter()
            .filter(|(_, l)| *l == ProtectionLevel::Dangerous)
            .count();
        if self.risk_pool > dangerous {
            return bad(format!(
                "risk pool of {} exceeds {dangerous} dangerous permissions",
                self.risk_pool
            ));
        }
        if self.planted_extras > self.risk_pool || self.risk_per_malicious > self.risk_pool {
            return bad("cannot draw more risk permissions than the pool holds".into());
        }
        Ok(())
    }
}

/// Ground truth for one generated app.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub app_id: String,
    pub true_min: Vec<PermissionId>,
    pub planted_extras: Vec<PermissionId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthCorpus {
    pub corpus: Corpus,
    pub truth: Vec<TruthRow>,
    pub api_map: ApiPermissionMap,
    pub topic_perms: Vec<PermSet>,
    pub risk_pool: PermSet,
}

impl SynthCorpus {
    /// Corpus JSONL without `code_perms`, so loaders derive them from the
    /// API map.
    pub fn corpus_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.corpus.records {
            let mut raw = RawRecord::from(r);
            raw.code_perms = None;
            out.push_str(&serde_json::to_string(&raw).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn truth_jsonl(&self) -> String {
        let mut out = String::new();
        for t in &self.truth {
            out.push_str(&serde_json::to_string(t).expect("truth serializes"));
            out.push('\n');
        }
        out
    }

    pub fn truth_map(&self) -> BTreeMap<String, PermSet> {
        truth_map(&self.truth)
    }
}

pub fn truth_map(rows: &[TruthRow]) -> BTreeMap<String, PermSet> {
    rows.iter()
        .map(|t| (t.app_id.clone(), t.true_min.iter().cloned().collect()))
        .collect()
}

pub fn read_truth_jsonl(text: &str) -> Result<Vec<TruthRow>> {
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

const ONSETS: [&str; 14] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "t", "v", "z", "br"];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
const CODAS: [&str; 8] = ["k", "m", "n", "p", "r", "t", "x", "z"];

fn make_words(n: usize, rng: &mut impl rand::Rng) -> Vec<String> {
    let mut seen = std::collections::BTreeSet::new();
    let mut words = Vec::with_capacity(n);
    while words.len() < n {
        let syllables = rng.random_range(2..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(ONSETS.choose(rng).expect("non-empty"));
            w.push_str(VOWELS.choose(rng).expect("non-empty"));
        }
        w.push_str(CODAS.choose(rng).expect("non-empty"));
        if seen.insert(w.clone()) {
            words.push(w);
        }
    }
    words
}

fn api_name(p: &PermissionId, j: usize) -> String {
    format!("Landroid/synth/{}Api;->call{j}()V", p.as_str())
}

pub fn generate(spec: &SynthSpec, registry: &PermissionRegistry) -> Result<SynthCorpus> {
    spec.validate(registry)?;
    let mut rng = seed::rng(spec.seed, "synth");

    let mut dangerous: Vec<PermissionId> = registry
        .iter()
        .filter(|(_, l)| *l == ProtectionLevel::Dangerous)
        .map(|(p, _)| p.clone())
        .collect();
    dangerous.shuffle(&mut rng);
    let risk_pool: Vec<PermissionId> = dangerous.into_iter().take(spec.risk_pool).collect();

    let mut rest: Vec<PermissionId> = registry
        .iter()
        .map(|(p, _)| p.clone())
        .filter(|p| !risk_pool.contains(p))
        .collect();
    rest.shuffle(&mut rng);
    let topic_perms: Vec<PermSet> = rest
        .chunks(spec.perms_per_topic)
        .take(spec.topics)
        .map(|c| c.iter().cloned().collect())
        .collect();

    let words = make_words(spec.vocab_size, &mut rng);
    let background_n = (spec.vocab_size / 5).max(1);
    let (background, topical) = words.split_at(background_n);
    let per_topic = topical.len() / spec.topics;
    let topic_words: Vec<&[String]> = (0..spec.topics)
        .map(|t| &topical[t * per_topic..(t + 1) * per_topic])
        .collect();

    let mut api_entries = BTreeMap::new();
    for p in topic_perms.iter().flatten().chain(&risk_pool) {
        for j in 0..2 {
            api_entries.insert(api_name(p, j), PermSet::from([p.clone()]));
        }
    }
    let api_map = ApiPermissionMap::new(api_entries);

    let mut records = Vec::new();
    let mut truth = Vec::new();
    let total = spec.n_benign + spec.n_malicious;
    for i in 0..total {
        let malicious = i >= spec.n_benign;
        let (label, id, topic) = if malicious {
            let j = i - spec.n_benign;
            (
                Label::Malicious,
                format!("malicious-{j:04}"),
                rng.random_range(0..spec.topics),
            )
        } else {
            (Label::Benign, format!("benign-{i:04}"), i % spec.topics)
        };

        let len = rng.random_range(spec.min_doc_len..=spec.max_doc_len);
        let description = (0..len)
            .map(|_| {
                let pool = if rng.random::<f64>() < spec.topic_word_share {
                    topic_words[topic]
                } else {
                    background
                };
                pool.choose(&mut rng).expect("non-empty word pool").as_str()
            })
            .collect::<Vec<_>>()
            .join(" ");

        let true_min = topic_perms[topic].clone();
        let extras: Vec<PermissionId> = if malicious {
            risk_pool.sample(&mut rng, spec.risk_per_malicious).cloned().collect()
        } else if spec.planted_extras > 0 && rng.random::<f64>() < spec.overprivilege_rate {
            risk_pool.sample(&mut rng, spec.planted_extras).cloned().collect()
        } else {
            Vec::new()
        };
        let mut extras_sorted = extras.clone();
        extras_sorted.sort();

        let declared: PermSet = true_min.iter().chain(&extras).cloned().collect();
        // benign extras are never exercised in code; malicious payloads are
        let used: Vec<&PermissionId> = if malicious {
            declared.iter().collect()
        } else {
            true_min.iter().collect()
        };
        let api_calls: Vec<String> = used.into_iter().map(|p| api_name(p, rng.random_range(0..2))).collect();
        let code_perms = derive_code_permissions(&api_calls, &api_map);

        truth.push(TruthRow {
            app_id: id.clone(),
            true_min: true_min.iter().cloned().collect(),
            planted_extras: extras_sorted,
        });
        records.push(AppRecord {
            id,
            description,
            declared,
            api_calls,
            code_perms,
            label,
        });
    }

    Ok(SynthCorpus {
        corpus: Corpus::new(records, registry.clone())?,
        truth,
        api_map,
        topic_perms,
        risk_pool: risk_pool.into_iter().collect(),
    })
}
