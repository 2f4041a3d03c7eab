#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use minperm::corpus::{perm_set, ApiPermissionMap, AppRecord, Corpus, LoadOptions, PermSet, PermissionRegistry};
use minperm::pipeline::{self, MinsetRun, RunConfig, TrainedTopics};
use minperm::text::Stopwords;

pub const BOLLYWOOD: &str = "b00-bollywood-live";

pub fn demo_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/demo")
}

pub fn demo_corpus() -> Corpus {
    let map = ApiPermissionMap::load(demo_dir().join("api_map.json")).unwrap();
    Corpus::load(
        demo_dir().join("corpus.jsonl"),
        PermissionRegistry::builtin(),
        Some(&map),
        LoadOptions::default(),
    )
    .unwrap()
}

pub fn demo_config(seed: u64) -> RunConfig {
    RunConfig {
        topics: 4,
        seed: Some(seed),
        ..RunConfig::default()
    }
}

pub fn train_all(corpus: &Corpus, cfg: &RunConfig) -> TrainedTopics {
    let recs: Vec<&AppRecord> = corpus.records.iter().collect();
    pipeline::train_topics(&recs, &cfg.lda_params().unwrap(), &Stopwords::builtin()).unwrap()
}

pub struct DemoRun {
    pub corpus: Corpus,
    pub topics: TrainedTopics,
    pub run: MinsetRun,
    pub cfg: RunConfig,
}

pub fn demo_run(seed: u64) -> DemoRun {
    let corpus = demo_corpus();
    let cfg = demo_config(seed);
    let topics = train_all(&corpus, &cfg);
    let run = pipeline::run_minset(&corpus, &topics, &cfg).unwrap();
    DemoRun {
        corpus,
        topics,
        run,
        cfg,
    }
}

pub fn bollywood_step_one() -> PermSet {
    perm_set(["CHANGE_WIFI_STATE", "GET_TASKS", "RECEIVE_BOOT_COMPLETED"])
}

pub fn bollywood_final() -> PermSet {
    perm_set([
        "ACCESS_NETWORK_STATE",
        "ACCESS_WIFI_STATE",
        "GET_ACCOUNTS",
        "INTERNET",
        "READ_PHONE_STATE",
        "WAKE_LOCK",
    ])
}

/// Apps other than the Bollywood app whose final set differs from their
/// declared set.
pub fn others_changed(d: &DemoRun) -> BTreeMap<String, PermSet> {
    d.corpus
        .records
        .iter()
        .filter(|r| r.id != BOLLYWOOD)
        .filter_map(|r| {
            let f = d.run.final_sets.get(&r.id)?;
            (f != &r.declared).then(|| (r.id.clone(), r.declared.difference(f).cloned().collect()))
        })
        .collect()
}
