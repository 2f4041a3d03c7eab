use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use minperm::corpus::{self, AppRecord, Corpus, Label, PermissionRegistry};
use minperm::error::{Error, Result};
use minperm::eval::render_table;
use minperm::pipeline::{self, RunConfig, SweepAxes, TrainedTopics};
use minperm::recommender::{recommend, NoNeighborPolicy, RecommendationRow};
use minperm::seed;
use minperm::synth::{self, SynthSpec};
use minperm::text::Stopwords;
use minperm::topics::TopicModel;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "minperm",
    version,
    about = "Description-based minimum permission identification"
)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus and write it back with code permissions resolved.
    Ingest(Common),
    /// Train the topic model and write the Func matrix.
    Train(Common),
    /// Compute minimum permission sets for benign apps.
    Minset(Common),
    /// Mine declared and code support tables.
    MineSupport(Common),
    /// Dump permission recommendations for selected apps.
    Recommend {
        #[command(flatten)]
        common: Common,
        /// App ids to recommend for (repeatable); all apps when omitted.
        #[arg(long = "app")]
        apps: Vec<String>,
        #[arg(long, value_enum, default_value = "benign")]
        side: SideArg,
    },
    /// Assess apps for risk permissions.
    Risk {
        #[command(flatten)]
        common: Common,
        #[arg(long = "app", conflicts_with = "all_test")]
        apps: Vec<String>,
        /// Assess the held-out test split.
        #[arg(long)]
        all_test: bool,
    },
    /// Split, train, assess and report corpus-level metrics.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Sweep K over 60..=100 step 5.
        #[arg(long)]
        sweep_topics: bool,
        /// Sweep the support threshold over 0.05, 0.1..=0.6.
        #[arg(long)]
        sweep_theta: bool,
        /// Sweep the test ratio over 0.10..=0.40 step 0.05.
        #[arg(long)]
        sweep_test_ratio: bool,
    },
    /// Generate a synthetic corpus with planted ground truth.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Benign,
    Malicious,
}

#[derive(Args, Default)]
struct Common {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    registry: Option<PathBuf>,
    #[arg(long)]
    api_map: Option<PathBuf>,
    /// Ground-truth JSONL (as written by `synth`).
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long = "out")]
    out_dir: Option<PathBuf>,
    /// Accept permissions missing from the registry.
    #[arg(long)]
    allow_custom: bool,
    #[arg(long, short = 'k')]
    topics: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gibbs_iterations: Option<usize>,
    #[arg(long)]
    infer_iterations: Option<usize>,
    /// Benign similarity threshold.
    #[arg(long)]
    t_benign: Option<f64>,
    /// Malicious similarity threshold.
    #[arg(long)]
    t_malicious: Option<f64>,
    #[arg(long)]
    theta_support: Option<f64>,
    #[arg(long)]
    top_t: Option<usize>,
    #[arg(long)]
    n_folds: Option<usize>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    test_ratio: Option<f64>,
    #[arg(long)]
    gap_stop: Option<f64>,
    #[arg(long)]
    relevance_floor: Option<f64>,
    /// Lower the threshold by this step when a target has no neighbours.
    #[arg(long)]
    fallback_step: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = &self.$f {
                    c.$f = v.clone();
                }
            )*};
        }
        set!(
            topics,
            beta,
            gibbs_iterations,
            infer_iterations,
            t_benign,
            t_malicious,
            theta_support,
            top_t,
            n_folds,
            max_iterations,
            test_ratio,
            gap_stop,
            relevance_floor,
            out_dir
        );
        macro_rules! set_opt {
            ($($f:ident),*) => {$(
                if self.$f.is_some() {
                    c.$f = self.$f.clone();
                }
            )*};
        }
        set_opt!(corpus, registry, api_map, truth, model, alpha, seed);
        if self.allow_custom {
            c.allow_custom_permissions = true;
        }
        if let Some(step) = self.fallback_step {
            c.fallback = NoNeighborPolicy::LowerThreshold { step };
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for corpus.jsonl, truth.jsonl and api_map.json.
    #[arg(long = "out")]
    out_dir: PathBuf,
    /// JSON file with generator settings; flags override it.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_benign: Option<usize>,
    #[arg(long)]
    n_malicious: Option<usize>,
    #[arg(long)]
    topics: Option<usize>,
    #[arg(long)]
    vocab_size: Option<usize>,
    #[arg(long)]
    perms_per_topic: Option<usize>,
    #[arg(long)]
    risk_pool: Option<usize>,
    #[arg(long)]
    overprivilege_rate: Option<f64>,
    #[arg(long)]
    planted_extras: Option<usize>,
    #[arg(long)]
    registry: Option<PathBuf>,
}

enum Outcome {
    Done,
    NotConverged,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match run(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => ExitCode::from(EXIT_NOT_CONVERGED),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { EXIT_USAGE } else { EXIT_DATA })
        }
    }
}

fn run(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Ingest(c) => ingest(&c.config()?),
        Command::Train(c) => train(&c.config()?),
        Command::Minset(c) => minset(&c.config()?),
        Command::MineSupport(c) => mine_support(&c.config()?),
        Command::Recommend { common, apps, side } => recommend_cmd(&common.config()?, &apps, side),
        Command::Risk { common, apps, all_test } => risk(&common.config()?, &apps, all_test),
        Command::Evaluate {
            common,
            sweep_topics,
            sweep_theta,
            sweep_test_ratio,
        } => evaluate(
            &common.config()?,
            SweepAxes {
                topics: sweep_topics,
                theta: sweep_theta,
                test_ratio: sweep_test_ratio,
            },
        ),
        Command::Synth(a) => synth_cmd(&a),
    }
}

fn ingest(cfg: &RunConfig) -> Result<Outcome> {
    let corpus = cfg.load_corpus()?;
    let out = cfg.out_dir.join("ingest").join("corpus.jsonl");
    pipeline::write_text(&out, &corpus.to_jsonl_string())?;
    let perms: BTreeSet<_> = corpus.records.iter().flat_map(|r| r.declared.iter()).collect();
    println!(
        "{} apps ({} benign, {} malicious), {} distinct declared permissions",
        corpus.len(),
        corpus.count(Label::Benign),
        corpus.count(Label::Malicious),
        perms.len()
    );
    println!("wrote {}", out.display());
    Ok(Outcome::Done)
}

fn train_and_write(cfg: &RunConfig, corpus: &Corpus) -> Result<TrainedTopics> {
    let records: Vec<&AppRecord> = corpus.records.iter().collect();
    let trained = pipeline::train_topics(&records, &cfg.lda_params()?, &Stopwords::builtin())?;
    pipeline::write_text(cfg.model_path(), &trained.model.to_json_string())?;
    pipeline::write_jsonl(cfg.func_path(), &trained.func_rows())?;
    Ok(trained)
}

fn train(cfg: &RunConfig) -> Result<Outcome> {
    let corpus = cfg.load_corpus()?;
    let t = train_and_write(cfg, &corpus)?;
    println!(
        "trained K={} on {} apps, vocabulary {} words",
        t.model.topics,
        corpus.len(),
        t.model.vocab.len()
    );
    println!("wrote {} and {}", cfg.model_path().display(), cfg.func_path().display());
    Ok(Outcome::Done)
}

fn load_topics(cfg: &RunConfig) -> Result<TrainedTopics> {
    if !cfg.model_path().exists() {
        return Err(Error::MissingInput(format!(
            "{} not found; run `train` first",
            cfg.model_path().display()
        )));
    }
    let model = TopicModel::load(cfg.model_path())?;
    let funcs = pipeline::read_funcs(cfg.func_path())?;
    if let Some((id, f)) = funcs.iter().find(|(_, f)| f.len() != model.topics) {
        return Err(Error::ModelMismatch(format!(
            "app {id} has {} topic probabilities, model has {} topics",
            f.len(),
            model.topics
        )));
    }
    Ok(TrainedTopics { model, funcs })
}

fn minset(cfg: &RunConfig) -> Result<Outcome> {
    let corpus = cfg.load_corpus()?;
    let topics = if cfg.model_path().exists() {
        load_topics(cfg)?
    } else {
        log::info!("no model at {}, training one", cfg.model_path().display());
        train_and_write(cfg, &corpus)?
    };
    let run = pipeline::run_minset(&corpus, &topics, cfg)?;
    let dir = cfg.out_dir.join("minset");
    pipeline::write_jsonl(dir.join("iteration_log.jsonl"), &run.outcome.log)?;
    pipeline::write_jsonl(
        dir.join("initial_min_perms.jsonl"),
        &pipeline::min_perm_rows(&run.outcome.min_perms),
    )?;
    pipeline::write_jsonl(dir.join("min_perms.jsonl"), &pipeline::min_perm_rows(&run.final_sets))?;
    write_tables(cfg, &run.tables)?;
    let declared: usize = corpus.with_label(Label::Benign).map(|r| r.declared.len()).sum();
    let kept: usize = run.final_sets.values().map(|s| s.len()).sum();
    println!(
        "{} benign apps, {} passes, {} declared permissions reduced to {}",
        run.final_sets.len(),
        run.outcome.iterations,
        declared,
        kept
    );
    if run.outcome.converged {
        Ok(Outcome::Done)
    } else {
        eprintln!("error: no fixed point within {} passes", cfg.max_iterations);
        Ok(Outcome::NotConverged)
    }
}

fn write_tables(cfg: &RunConfig, tables: &pipeline::SupportTables) -> Result<()> {
    let dir = cfg.out_dir.join("support");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    tables.declared.save(dir.join("declared.json"))?;
    tables.code.save(dir.join("code.json"))
}

fn mine_support(cfg: &RunConfig) -> Result<Outcome> {
    let corpus = cfg.load_corpus()?;
    let topics = load_topics(cfg)?;
    let benign: Vec<&AppRecord> = corpus.with_label(Label::Benign).collect();
    let tables = pipeline::mine_tables(&benign, &topics.funcs, topics.model.topics, &topics.model.fingerprint())?;
    write_tables(cfg, &tables)?;
    println!(
        "mined support over {} benign apps and {} topics",
        benign.len(),
        topics.model.topics
    );
    Ok(Outcome::Done)
}

fn select<'a>(corpus: &'a Corpus, ids: &[String]) -> Result<Vec<&'a AppRecord>> {
    if ids.is_empty() {
        return Ok(corpus.records.iter().collect());
    }
    ids.iter()
        .map(|id| {
            corpus
                .get(id)
                .ok_or_else(|| Error::InvalidParameter(format!("unknown app id {id}")))
        })
        .collect()
}

fn min_perms_path(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("minset").join("min_perms.jsonl")
}

fn recommend_cmd(cfg: &RunConfig, ids: &[String], side: SideArg) -> Result<Outcome> {
    let corpus = cfg.load_corpus()?;
    let topics = load_topics(cfg)?;
    let targets = select(&corpus, ids)?;
    let path = min_perms_path(cfg);
    let min_perms = if path.exists() {
        pipeline::read_min_perms(&path)?
    } else {
        log::warn!(
            "{} not found; benign neighbours vote with declared permissions",
            path.display()
        );
        corpus
            .with_label(Label::Benign)
            .map(|r| (r.id.clone(), r.declared.clone()))
            .collect()
    };
    let rows = targets
        .iter()
        .map(|t| {
            let held = |r: &&AppRecord| r.id != t.id;
            let train = match side {
                SideArg::Benign => pipeline::benign_training_set(
                    &corpus.with_label(Label::Benign).filter(held).collect::<Vec<_>>(),
                    &topics.funcs,
                    &min_perms,
                    cfg.relevance_floor,
                )?,
                SideArg::Malicious => pipeline::malicious_training_set(
                    &corpus.with_label(Label::Malicious).filter(held).collect::<Vec<_>>(),
                    &topics.funcs,
                    cfg.relevance_floor,
                )?,
            };
            let params = match side {
                SideArg::Benign => cfg.benign_params(),
                SideArg::Malicious => cfg.malicious_params(),
            };
            let func = topics
                .funcs
                .get(&t.id)
                .ok_or_else(|| Error::MissingInput(format!("no topic distribution for app {}", t.id)))?;
            let rec = recommend(func, &train, &params).ok();
            Ok(RecommendationRow::new(&t.id, rec.as_ref()))
        })
        .collect::<Result<Vec<_>>>()?;
    let out = cfg.out_dir.join("recommend").join("recommendations.jsonl");
    pipeline::write_jsonl(&out, &rows)?;
    println!("wrote {} recommendations to {}", rows.len(), out.display());
    Ok(Outcome::Done)
}

fn risk(cfg: &RunConfig, ids: &[String], all_test: bool) -> Result<Outcome> {
    let corpus = cfg.load_corpus()?;
    let topics = load_topics(cfg)?;
    let path = min_perms_path(cfg);
    if !path.exists() {
        return Err(Error::MissingInput(format!(
            "{} not found; run `minset` first",
            path.display()
        )));
    }
    let min_perms = pipeline::read_min_perms(&path)?;
    let test;
    let targets: Vec<&AppRecord> = if all_test {
        (_, test) = corpus::split(&corpus, cfg.test_ratio, seed::derive(cfg.seed()?, "split"))?;
        test.records
            .iter()
            .map(|r| corpus.get(&r.id).expect("split keeps records"))
            .collect()
    } else {
        select(&corpus, ids)?
    };
    let assessed = pipeline::assess_targets(&corpus, &topics.funcs, &min_perms, &targets, cfg)?;
    let reports: Vec<_> = assessed.into_iter().map(|a| a.report).collect();
    let out = cfg.out_dir.join("risk").join("risk.jsonl");
    pipeline::write_jsonl(&out, &reports)?;
    let risky = reports.iter().filter(|r| r.risky).count();
    let unassessable = reports.iter().filter(|r| !r.is_assessable()).count();
    println!(
        "{} apps assessed: {risky} risky, {unassessable} unassessable",
        reports.len()
    );
    println!("wrote {}", out.display());
    Ok(Outcome::Done)
}

fn evaluate(cfg: &RunConfig, axes: SweepAxes) -> Result<Outcome> {
    let corpus = cfg.load_corpus()?;
    let truth = cfg.load_truth()?;
    let dir = cfg.out_dir.join("eval");
    if axes.any() {
        let csv = pipeline::sweep(&corpus, truth.as_ref(), cfg, axes)?;
        let out = dir.join("sweep.csv");
        pipeline::write_text(&out, &csv)?;
        println!("wrote {} grid points to {}", csv.lines().count() - 1, out.display());
        return Ok(Outcome::Done);
    }
    let result = pipeline::evaluate(&corpus, truth.as_ref(), cfg)?;
    let table = render_table(&result.reports);
    pipeline::write_json_pretty(dir.join("report.json"), &result.reports)?;
    pipeline::write_text(dir.join("table.txt"), &table)?;
    pipeline::write_jsonl(dir.join("risk.jsonl"), &result.risk)?;
    print!("{table}");
    Ok(Outcome::Done)
}

fn synth_cmd(a: &SynthArgs) -> Result<Outcome> {
    let mut spec = match &a.spec {
        Some(p) => {
            let s = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&s).map_err(|e| Error::InvalidParameter(format!("synth spec: {e}")))?
        }
        None => SynthSpec::default(),
    };
    macro_rules! set {
        ($($f:ident),*) => {$(
            if let Some(v) = a.$f {
                spec.$f = v;
            }
        )*};
    }
    set!(
        seed,
        n_benign,
        n_malicious,
        topics,
        vocab_size,
        perms_per_topic,
        risk_pool,
        overprivilege_rate,
        planted_extras
    );
    if a.seed.is_none() && a.spec.is_none() {
        return Err(Error::InvalidParameter("a seed is required (--seed)".into()));
    }
    let registry = match &a.registry {
        Some(p) => PermissionRegistry::load(p)?,
        None => PermissionRegistry::builtin(),
    };
    let s = synth::generate(&spec, &registry)?;
    let dir: &Path = &a.out_dir;
    pipeline::write_text(dir.join("corpus.jsonl"), &s.corpus_jsonl())?;
    pipeline::write_text(dir.join("truth.jsonl"), &s.truth_jsonl())?;
    pipeline::write_text(dir.join("api_map.json"), &s.api_map.to_json_string())?;
    println!(
        "wrote {} apps ({} benign, {} malicious) to {}",
        s.corpus.len(),
        spec.n_benign,
        spec.n_malicious,
        dir.display()
    );
    Ok(Outcome::Done)
}
