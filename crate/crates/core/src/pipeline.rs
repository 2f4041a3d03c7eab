//! End-to-end stages shared by the CLI, the FFI layer and the tests.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{self, AppRecord, Corpus, Label, PermSet, PermissionId};
use crate::error::{Error, Result};
use crate::eval::{EvalParameters, EvalReport, RankedApp};
use crate::funcperm::{self, mine_support, PermSource, SupportTable};
use crate::minset::{self, iterate_minset, MinsetApp, MinsetOutcome, MinsetParams};
use crate::recommender::{NoNeighborPolicy, RecommenderParams, TrainingApp, TrainingSet};
use crate::risk::{self, Assessment, RiskContext, RiskReport};
use crate::seed;
use crate::text::{tokenize, Stopwords, Vocabulary};
use crate::topics::{self, FuncRow, FuncVector, LdaParams, OovPolicy, TopicModel};

/// Every tunable of the pipeline. Paths are optional so one file can serve
/// several commands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub registry: Option<PathBuf>,
    pub api_map: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    /// Model file; defaults to `<out_dir>/model/model.json`.
    pub model: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub allow_custom_permissions: bool,

    pub topics: usize,
    pub alpha: Option<f64>,
    pub beta: f64,
    pub gibbs_iterations: usize,
    pub infer_iterations: usize,
    pub t_benign: f64,
    pub t_malicious: f64,
    pub theta_support: f64,
    pub top_t: usize,
    pub n_folds: usize,
    pub max_iterations: usize,
    pub test_ratio: f64,
    pub gap_stop: f64,
    pub relevance_floor: f64,
    pub fallback: NoNeighborPolicy,
    pub seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: None,
            registry: None,
            api_map: None,
            truth: None,
            model: None,
            out_dir: PathBuf::from("out"),
            allow_custom_permissions: false,
            topics: 100,
            alpha: None,
            beta: 0.01,
            gibbs_iterations: 1000,
            infer_iterations: 200,
            t_benign: 0.6,
            t_malicious: 0.4,
            theta_support: funcperm::DEFAULT_THETA_SUPPORT,
            top_t: funcperm::DEFAULT_TOP_T,
            n_folds: 5,
            max_iterations: 10,
            test_ratio: 0.2,
            gap_stop: crate::recommender::DEFAULT_GAP_STOP,
            relevance_floor: crate::recommender::DEFAULT_RELEVANCE_FLOOR,
            fallback: NoNeighborPolicy::Unrecommendable,
            seed: None,
        }
    }
}

fn open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be in (0, 1), got {v}")))
    }
}

impl RunConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidParameter(format!("config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&s)
    }

    pub fn validate(&self) -> Result<()> {
        open_unit("t_benign", self.t_benign)?;
        open_unit("t_malicious", self.t_malicious)?;
        open_unit("theta_support", self.theta_support)?;
        open_unit("test_ratio", self.test_ratio)?;
        open_unit("gap_stop", self.gap_stop)?;
        open_unit("relevance_floor", self.relevance_floor)?;
        if self.topics < 2 {
            return Err(Error::InvalidParameter(format!(
                "topics must be at least 2, got {}",
                self.topics
            )));
        }
        if self.gibbs_iterations == 0 || self.infer_iterations == 0 || self.max_iterations == 0 {
            return Err(Error::InvalidParameter("iteration counts must be positive".into()));
        }
        if self.n_folds < 2 {
            return Err(Error::InvalidParameter("n_folds must be at least 2".into()));
        }
        if self.top_t == 0 {
            return Err(Error::InvalidParameter("top_t must be positive".into()));
        }
        if let NoNeighborPolicy::LowerThreshold { step } = self.fallback {
            open_unit("fallback step", step)?;
        }
        Ok(())
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::InvalidParameter("a seed is required (--seed or \"seed\" in the config)".into()))
    }

    pub fn lda_params(&self) -> Result<LdaParams> {
        Ok(LdaParams {
            topics: self.topics,
            alpha: self.alpha,
            beta: self.beta,
            iterations: self.gibbs_iterations,
            seed: seed::derive(self.seed()?, "lda"),
        })
    }

    pub fn benign_params(&self) -> RecommenderParams {
        RecommenderParams {
            threshold: self.t_benign,
            gap_stop: self.gap_stop,
            fallback: self.fallback,
        }
    }

    pub fn malicious_params(&self) -> RecommenderParams {
        RecommenderParams {
            threshold: self.t_malicious,
            gap_stop: self.gap_stop,
            fallback: self.fallback,
        }
    }

    pub fn minset_params(&self) -> Result<MinsetParams> {
        Ok(MinsetParams {
            n_folds: self.n_folds,
            max_iterations: self.max_iterations,
            benign: self.benign_params(),
            malicious: self.malicious_params(),
            relevance_floor: self.relevance_floor,
            seed: seed::derive(self.seed()?, "folds"),
        })
    }

    pub fn model_path(&self) -> PathBuf {
        self.model
            .clone()
            .unwrap_or_else(|| self.out_dir.join("model").join("model.json"))
    }

    pub fn func_path(&self) -> PathBuf {
        self.out_dir.join("func").join("func.jsonl")
    }

    /// Loads the corpus named in the config, with its registry and API map.
    pub fn load_corpus(&self) -> Result<Corpus> {
        let path = self
            .corpus
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("no corpus given (--corpus)".into()))?;
        let registry = match &self.registry {
            Some(p) => corpus::PermissionRegistry::load(p)?,
            None => corpus::PermissionRegistry::builtin(),
        };
        let api_map = self.api_map.as_ref().map(corpus::ApiPermissionMap::load).transpose()?;
        let opts = corpus::LoadOptions {
            allow_custom: self.allow_custom_permissions,
        };
        Corpus::load(path, registry, api_map.as_ref(), opts)
    }

    pub fn load_truth(&self) -> Result<Option<BTreeMap<String, PermSet>>> {
        let Some(path) = &self.truth else {
            return Ok(None);
        };
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Some(crate::synth::truth_map(&crate::synth::read_truth_jsonl(&text)?)))
    }
}

/// A trained model and the Func row of every training app.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedTopics {
    pub model: TopicModel,
    pub funcs: BTreeMap<String, FuncVector>,
}

impl TrainedTopics {
    pub fn func_rows(&self) -> Vec<FuncRow> {
        self.funcs
            .iter()
            .map(|(id, f)| FuncRow {
                app_id: id.clone(),
                probs: f.clone(),
            })
            .collect()
    }
}

/// Trains LDA over the descriptions of `records`. Apps whose description has
/// no usable token are left out of training and get a uniform row.
pub fn train_topics(records: &[&AppRecord], params: &LdaParams, stopwords: &Stopwords) -> Result<TrainedTopics> {
    let words: Vec<(String, Vec<String>)> = records
        .iter()
        .map(|r| (r.id.clone(), tokenize(&r.description, stopwords)))
        .collect();
    let vocab = Vocabulary::build(words.iter().map(|(_, w)| w));
    let mut docs = Vec::with_capacity(words.len());
    let mut skipped = Vec::new();
    for (id, w) in &words {
        let doc = vocab.encode(w);
        if doc.is_empty() {
            log::warn!("app {id}: description has no usable tokens, using a uniform topic row");
            skipped.push(id.clone());
        } else {
            docs.push((id.clone(), doc));
        }
    }
    if docs.is_empty() {
        return Err(Error::MissingInput("no description contains a usable token".into()));
    }
    let (model, rows) = topics::train_lda(&docs, vocab, params)?;
    let mut funcs: BTreeMap<String, FuncVector> = docs.into_iter().map(|(id, _)| id).zip(rows).collect();
    for id in skipped {
        funcs.insert(id, FuncVector::uniform(params.topics));
    }
    Ok(TrainedTopics { model, funcs })
}

/// Fold-in inference for apps outside the training set.
pub fn infer_topics(
    model: &TopicModel,
    records: &[&AppRecord],
    iterations: usize,
    seed: u64,
    stopwords: &Stopwords,
) -> Result<BTreeMap<String, FuncVector>> {
    records
        .par_iter()
        .map(|r| {
            let doc = model.vocab.encode(&tokenize(&r.description, stopwords));
            let s = seed::derive(seed, &format!("infer/{}", r.id));
            topics::infer_with_policy(model, &doc, iterations, s, OovPolicy::Uniform).map(|f| (r.id.clone(), f))
        })
        .collect()
}

fn func_of<'a>(funcs: &'a BTreeMap<String, FuncVector>, id: &str) -> Result<&'a FuncVector> {
    funcs
        .get(id)
        .ok_or_else(|| Error::MissingInput(format!("no topic distribution for app {id}")))
}

pub fn malicious_training_set(
    records: &[&AppRecord],
    funcs: &BTreeMap<String, FuncVector>,
    floor: f64,
) -> Result<TrainingSet> {
    let apps = records
        .iter()
        .map(|r| {
            Ok(TrainingApp {
                id: r.id.clone(),
                func: func_of(funcs, &r.id)?.clone(),
                perms: r.declared.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainingSet::new(apps, floor))
}

/// Benign training set built from per-app permission sets (typically the
/// final minimum sets).
pub fn benign_training_set(
    records: &[&AppRecord],
    funcs: &BTreeMap<String, FuncVector>,
    perms: &BTreeMap<String, PermSet>,
    floor: f64,
) -> Result<TrainingSet> {
    let apps = records
        .iter()
        .map(|r| {
            Ok(TrainingApp {
                id: r.id.clone(),
                func: func_of(funcs, &r.id)?.clone(),
                perms: perms
                    .get(&r.id)
                    .ok_or_else(|| Error::MissingInput(format!("no minimum permission set for app {}", r.id)))?
                    .clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainingSet::new(apps, floor))
}

pub fn initial_minsets(
    benign: &[&AppRecord],
    malicious: &[&AppRecord],
    funcs: &BTreeMap<String, FuncVector>,
    params: &MinsetParams,
) -> Result<MinsetOutcome> {
    let apps = benign
        .iter()
        .map(|r| {
            Ok(MinsetApp {
                id: r.id.clone(),
                func: func_of(funcs, &r.id)?.clone(),
                declared: r.declared.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let malicious = malicious_training_set(malicious, funcs, params.relevance_floor)?;
    iterate_minset(&apps, &malicious, params)
}

/// Declared and code support tables mined over `benign`.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportTables {
    pub declared: SupportTable,
    pub code: SupportTable,
}

pub fn mine_tables(
    benign: &[&AppRecord],
    funcs: &BTreeMap<String, FuncVector>,
    topics: usize,
    fingerprint: &str,
) -> Result<SupportTables> {
    let with_func = benign
        .iter()
        .map(|r| Ok((func_of(funcs, &r.id)?, *r)))
        .collect::<Result<Vec<_>>>()?;
    let declared = mine_support(
        with_func.iter().map(|(f, r)| (*f, &r.declared)),
        topics,
        PermSource::Declared,
        fingerprint,
    )?;
    let code = mine_support(
        with_func.iter().map(|(f, r)| (*f, &r.code_perms)),
        topics,
        PermSource::Code,
        fingerprint,
    )?;
    Ok(SupportTables {
        declared: declared.table,
        code: code.table,
    })
}

pub fn final_sets(
    initial: &BTreeMap<String, PermSet>,
    funcs: &BTreeMap<String, FuncVector>,
    tables: &SupportTables,
    theta: f64,
    top_t: usize,
) -> Result<BTreeMap<String, PermSet>> {
    initial
        .iter()
        .map(|(id, perms)| {
            let f = func_of(funcs, id)?;
            Ok((
                id.clone(),
                funcperm::final_minset(perms, f, &tables.declared, &tables.code, theta, top_t),
            ))
        })
        .collect()
}

/// Everything the `minset` command produces.
#[derive(Clone, Debug, PartialEq)]
pub struct MinsetRun {
    pub outcome: MinsetOutcome,
    pub tables: SupportTables,
    pub final_sets: BTreeMap<String, PermSet>,
}

/// Iterative removal followed by support filtering over a whole corpus.
pub fn run_minset(corpus: &Corpus, topics: &TrainedTopics, cfg: &RunConfig) -> Result<MinsetRun> {
    let benign: Vec<&AppRecord> = corpus.with_label(Label::Benign).collect();
    let malicious: Vec<&AppRecord> = corpus.with_label(Label::Malicious).collect();
    let outcome = initial_minsets(&benign, &malicious, &topics.funcs, &cfg.minset_params()?)?;
    let tables = mine_tables(&benign, &topics.funcs, topics.model.topics, &topics.model.fingerprint())?;
    let final_sets = final_sets(&outcome.min_perms, &topics.funcs, &tables, cfg.theta_support, cfg.top_t)?;
    Ok(MinsetRun {
        outcome,
        tables,
        final_sets,
    })
}

/// Assesses `targets` against every other app of the corpus. Targets are
/// held out of both training sets.
pub fn assess_targets(
    corpus: &Corpus,
    funcs: &BTreeMap<String, FuncVector>,
    final_sets: &BTreeMap<String, PermSet>,
    targets: &[&AppRecord],
    cfg: &RunConfig,
) -> Result<Vec<Assessment>> {
    let held: BTreeSet<&str> = targets.iter().map(|r| r.id.as_str()).collect();
    let keep = |label| -> Vec<&AppRecord> {
        corpus
            .with_label(label)
            .filter(|r| !held.contains(r.id.as_str()))
            .collect()
    };
    let benign = benign_training_set(&keep(Label::Benign), funcs, final_sets, cfg.relevance_floor)?;
    let malicious = malicious_training_set(&keep(Label::Malicious), funcs, cfg.relevance_floor)?;
    let ctx = RiskContext {
        benign: &benign,
        malicious: &malicious,
        benign_params: cfg.benign_params(),
        malicious_params: cfg.malicious_params(),
        registry: &corpus.registry,
    };
    targets
        .par_iter()
        .map(|r| risk::assess(&ctx, &r.id, func_of(funcs, &r.id)?, &r.declared))
        .collect()
}

/// Split, model and initial minimum sets of one evaluation run. Reused
/// across support thresholds in sweeps.
#[derive(Clone, Debug)]
pub struct EvalPrepared {
    pub train: Corpus,
    pub test: Corpus,
    pub model: TopicModel,
    pub funcs: BTreeMap<String, FuncVector>,
    pub initial: MinsetOutcome,
    pub tables: SupportTables,
}

pub fn prepare_eval(corpus: &Corpus, cfg: &RunConfig) -> Result<EvalPrepared> {
    cfg.validate()?;
    let seed = cfg.seed()?;
    let (train, test) = corpus::split(corpus, cfg.test_ratio, seed::derive(seed, "split"))?;
    let stop = Stopwords::builtin();
    let train_refs: Vec<&AppRecord> = train.records.iter().collect();
    let trained = train_topics(&train_refs, &cfg.lda_params()?, &stop)?;
    let test_refs: Vec<&AppRecord> = test.records.iter().collect();
    let mut funcs = trained.funcs;
    funcs.extend(infer_topics(
        &trained.model,
        &test_refs,
        cfg.infer_iterations,
        seed::derive(seed, "infer"),
        &stop,
    )?);

    let benign: Vec<&AppRecord> = train.with_label(Label::Benign).collect();
    let malicious: Vec<&AppRecord> = train.with_label(Label::Malicious).collect();
    let initial = initial_minsets(&benign, &malicious, &funcs, &cfg.minset_params()?)?;
    if !initial.converged {
        log::warn!(
            "minimum-set iteration did not converge in {} passes",
            initial.iterations
        );
    }
    let tables = mine_tables(&benign, &funcs, trained.model.topics, &trained.model.fingerprint())?;
    Ok(EvalPrepared {
        train,
        test,
        model: trained.model,
        funcs,
        initial,
        tables,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOutcome {
    /// Benign-test report first, malicious-test second.
    pub reports: Vec<EvalReport>,
    pub risk: Vec<RiskReport>,
    pub converged: bool,
}

pub fn finish_eval(
    p: &EvalPrepared,
    truth: Option<&BTreeMap<String, PermSet>>,
    cfg: &RunConfig,
) -> Result<EvalOutcome> {
    let final_sets = final_sets(&p.initial.min_perms, &p.funcs, &p.tables, cfg.theta_support, cfg.top_t)?;
    let benign_train: Vec<&AppRecord> = p.train.with_label(Label::Benign).collect();
    let malicious_train: Vec<&AppRecord> = p.train.with_label(Label::Malicious).collect();
    let benign = benign_training_set(&benign_train, &p.funcs, &final_sets, cfg.relevance_floor)?;
    let malicious = malicious_training_set(&malicious_train, &p.funcs, cfg.relevance_floor)?;
    let n_all = benign.permission_universe().len();
    let ctx = RiskContext {
        benign: &benign,
        malicious: &malicious,
        benign_params: cfg.benign_params(),
        malicious_params: cfg.malicious_params(),
        registry: &p.test.registry,
    };
    let params = EvalParameters {
        topics: p.model.topics,
        t_benign: cfg.t_benign,
        t_malicious: cfg.t_malicious,
        theta_support: cfg.theta_support,
        test_ratio: cfg.test_ratio,
        seed: cfg.seed()?,
    };

    let mut reports = Vec::new();
    let mut all_risk = Vec::new();
    for (label, name) in [(Label::Benign, "benign"), (Label::Malicious, "malicious")] {
        let targets: Vec<&AppRecord> = p.test.with_label(label).collect();
        let scored = targets
            .par_iter()
            .map(|r| {
                let func = func_of(&p.funcs, &r.id)?;
                let a = risk::assess(&ctx, &r.id, func, &r.declared)?;
                let ranked = ranked_app(&a, r, func, truth, &p.tables, cfg);
                Ok((a.report, ranked))
            })
            .collect::<Result<Vec<_>>>()?;
        let (risk, ranked): (Vec<RiskReport>, Vec<RankedApp>) = scored.into_iter().unzip();
        reports.push(EvalReport::compute(name, &risk, &ranked, n_all, params.clone()));
        all_risk.extend(risk);
    }
    Ok(EvalOutcome {
        reports,
        risk: all_risk,
        converged: p.initial.converged,
    })
}

fn ranked_app(
    a: &Assessment,
    r: &AppRecord,
    func: &FuncVector,
    truth: Option<&BTreeMap<String, PermSet>>,
    tables: &SupportTables,
    cfg: &RunConfig,
) -> RankedApp {
    let ranking: Vec<PermissionId> = a
        .benign
        .as_ref()
        .filter(|_| a.report.is_assessable())
        .map(|b| b.full.permissions().cloned().collect())
        .unwrap_or_default();
    let necessary = match truth.and_then(|t| t.get(&r.id)) {
        Some(t) => t.clone(),
        None => match (&a.benign, &a.malicious) {
            (Some(b), Some(m)) => {
                let removed = minset::difference_removal(&r.declared, &b.accepted_set(), &m.accepted_set());
                let kept: PermSet = r.declared.difference(&removed).cloned().collect();
                funcperm::final_minset(
                    &kept,
                    func,
                    &tables.declared,
                    &tables.code,
                    cfg.theta_support,
                    cfg.top_t,
                )
            }
            _ => r.declared.clone(),
        },
    };
    RankedApp {
        ranking,
        declared: r.declared.clone(),
        necessary,
    }
}

pub fn evaluate(corpus: &Corpus, truth: Option<&BTreeMap<String, PermSet>>, cfg: &RunConfig) -> Result<EvalOutcome> {
    finish_eval(&prepare_eval(corpus, cfg)?, truth, cfg)
}

pub const SWEEP_TOPICS: [usize; 9] = [60, 65, 70, 75, 80, 85, 90, 95, 100];
pub const SWEEP_THETA: [f64; 7] = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
pub const SWEEP_TEST_RATIO: [f64; 7] = [0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40];

/// Which parameters vary in a sweep; the others stay at the config value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SweepAxes {
    pub topics: bool,
    pub theta: bool,
    pub test_ratio: bool,
}

impl SweepAxes {
    pub fn any(&self) -> bool {
        self.topics || self.theta || self.test_ratio
    }
}

const SWEEP_METRICS: [&str; 7] = ["aupr", "rar", "arisk", "map", "nr", "trr", "unassessable"];

/// Runs the grid and returns CSV text, one row per grid point.
pub fn sweep(
    corpus: &Corpus,
    truth: Option<&BTreeMap<String, PermSet>>,
    cfg: &RunConfig,
    axes: SweepAxes,
) -> Result<String> {
    let ks: Vec<usize> = if axes.topics {
        SWEEP_TOPICS.to_vec()
    } else {
        vec![cfg.topics]
    };
    let thetas: Vec<f64> = if axes.theta {
        SWEEP_THETA.to_vec()
    } else {
        vec![cfg.theta_support]
    };
    let ratios: Vec<f64> = if axes.test_ratio {
        SWEEP_TEST_RATIO.to_vec()
    } else {
        vec![cfg.test_ratio]
    };

    let mut csv = String::from("topics,theta_support,test_ratio");
    for side in ["benign", "malicious"] {
        for m in SWEEP_METRICS {
            let _ = write!(csv, ",{side}_{m}");
        }
    }
    csv.push('\n');
    for &k in &ks {
        for &ratio in &ratios {
            let mut point = cfg.clone();
            point.topics = k;
            point.test_ratio = ratio;
            log::info!("sweep: K={k} test_ratio={ratio}");
            let prepared = prepare_eval(corpus, &point)?;
            for &theta in &thetas {
                point.theta_support = theta;
                let out = finish_eval(&prepared, truth, &point)?;
                let _ = write!(csv, "{k},{theta},{ratio}");
                for r in &out.reports {
                    let _ = write!(
                        csv,
                        ",{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
                        r.aupr, r.rar, r.arisk, r.map_score, r.nr, r.trr, r.unassessable_count
                    );
                }
                csv.push('\n');
            }
        }
    }
    Ok(csv)
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    Ok(())
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn to_jsonl<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    write_text(path, &to_jsonl(rows)?)
}

pub fn write_json_pretty<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_text(path, &s)
}

pub fn min_perm_rows(sets: &BTreeMap<String, PermSet>) -> Vec<minset::MinPermRow> {
    sets.iter()
        .map(|(id, p)| minset::MinPermRow {
            app_id: id.clone(),
            min_perms: p.iter().cloned().collect(),
        })
        .collect()
}

pub fn read_min_perms(path: impl AsRef<Path>) -> Result<BTreeMap<String, PermSet>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let row: minset::MinPermRow = serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            Ok((row.app_id, row.min_perms.into_iter().collect()))
        })
        .collect()
}

pub fn read_funcs(path: impl AsRef<Path>) -> Result<BTreeMap<String, FuncVector>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(topics::read_func_jsonl(&text)?
        .into_iter()
        .map(|r| (r.app_id, r.probs))
        .collect())
}
