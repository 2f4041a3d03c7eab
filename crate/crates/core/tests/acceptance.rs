//! Acceptance criteria. Runs without the libtest harness so that each
//! criterion prints exactly one PASS/FAIL line.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use minperm::corpus::{perm, perm_set, AppRecord, PermSet, PermissionId, PermissionRegistry};
use minperm::eval::{self, RankedApp};
use minperm::funcperm::{self, mine_support, PermSource};
use minperm::pipeline::{self, RunConfig};
use minperm::recommender::{recommend_values, select_neighbors, select_neighbors_exhaustive, TrainingApp, TrainingSet};
use minperm::risk::RiskReport;
use minperm::synth::{generate, SynthCorpus, SynthSpec};
use minperm::text::Stopwords;
use minperm::FuncVector;
use rand::seq::IndexedRandom;
use rand::RngExt;
use rand_chacha::ChaCha8Rng;

const ORACLE_TOL: f64 = 1e-12;
const ORACLE_CASES: usize = 200;
const ORACLE_BUDGET: Duration = Duration::from_secs(10);
const MINSET_MAX_PASSES: usize = 5;
const MINSET_MIN_EXTRAS_REMOVED: f64 = 0.80;
const MINSET_BUDGET: Duration = Duration::from_secs(60);
const THETA_GRID: [f64; 5] = [0.05, 0.1, 0.2, 0.4, 0.6];
const SEPARATION_SEEDS: std::ops::RangeInclusive<u64> = 1..=10;
const INDEX_CORPORA: usize = 100;
const INDEX_APPS: usize = 50;
/// Synthetic runs use the planted topic count.
const SYNTH_K: usize = 6;

const PERMS: [&str; 8] = [
    "INTERNET",
    "CAMERA",
    "SEND_SMS",
    "READ_CONTACTS",
    "WAKE_LOCK",
    "ACCESS_FINE_LOCATION",
    "RECORD_AUDIO",
    "VIBRATE",
];

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn rng(label: &str) -> ChaCha8Rng {
    minperm::seed::rng(20240611, label)
}

fn random_func(r: &mut ChaCha8Rng, k: usize) -> FuncVector {
    let w: Vec<f64> = (0..k).map(|_| r.random_range(0.001..1.0)).collect();
    FuncVector::normalized(w)
}

fn random_perms(r: &mut ChaCha8Rng, pool: &[&str]) -> PermSet {
    pool.iter().filter(|_| r.random_bool(0.5)).map(|p| perm(p)).collect()
}

// ---- oracles -------------------------------------------------------------

fn oracle_distance(x: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        s += (x[i] - y[i]).powi(2);
    }
    s.sqrt()
}

/// Neighbours and recommendation values straight from the formulas.
fn oracle_rv(target: &[f64], apps: &[(Vec<f64>, PermSet)], threshold: f64) -> Option<BTreeMap<PermissionId, f64>> {
    let sims: Vec<(f64, &PermSet)> = apps
        .iter()
        .map(|(f, p)| (1.0 / (1.0 + oracle_distance(target, f)), p))
        .filter(|(s, _)| *s > threshold)
        .collect();
    if sims.is_empty() {
        return None;
    }
    let denom: f64 = sims.iter().map(|(s, _)| s).sum();
    let universe: BTreeSet<&PermissionId> = sims.iter().flat_map(|(_, p)| p.iter()).collect();
    Some(
        universe
            .into_iter()
            .map(|p| {
                let num: f64 = sims.iter().filter(|(_, ps)| ps.contains(p)).map(|(s, _)| s).sum();
                (p.clone(), num / denom)
            })
            .collect(),
    )
}

fn oracle_support(apps: &[(Vec<f64>, PermSet)], topic: usize, p: &PermissionId) -> f64 {
    let all: f64 = apps.iter().map(|(f, _)| f[topic]).sum();
    let holders: f64 = apps
        .iter()
        .filter(|(_, ps)| ps.contains(p))
        .map(|(f, _)| f[topic])
        .sum();
    holders / all
}

fn oracle_ap(ranking: &[PermissionId], relevant: &PermSet) -> f64 {
    let n = ranking.len() as f64;
    (1..=ranking.len())
        .map(|l| {
            let r_l = ranking[..l].iter().filter(|p| relevant.contains(*p)).count() as f64;
            let i_l = if relevant.contains(&ranking[l - 1]) { 1.0 } else { 0.0 };
            r_l / l as f64 * i_l
        })
        .sum::<f64>()
        / n
}

fn oracle_map(apps: &[RankedApp]) -> f64 {
    let scored: Vec<f64> = apps
        .iter()
        .filter(|a| !a.ranking.is_empty())
        .map(|a| oracle_ap(&a.ranking, &a.declared))
        .collect();
    if scored.is_empty() {
        0.0
    } else {
        scored.iter().sum::<f64>() / scored.len() as f64
    }
}

fn oracle_nr(apps: &[RankedApp]) -> f64 {
    let v: Vec<f64> = apps
        .iter()
        .filter(|a| !a.ranking.is_empty() && !a.necessary.is_empty())
        .map(|a| {
            let n = a.necessary.len();
            let top: BTreeSet<&PermissionId> = a.ranking.iter().take(n).collect();
            a.necessary.iter().filter(|p| top.contains(p)).count() as f64 / n as f64
        })
        .collect();
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn oracle_trr(apps: &[RankedApp], n_all: usize) -> f64 {
    let v: Vec<f64> = apps
        .iter()
        .filter(|a| !a.ranking.is_empty() && !a.necessary.is_empty())
        .map(|a| {
            let n_min = (1..=a.ranking.len())
                .find(|&l| a.necessary.iter().all(|p| a.ranking[..l].contains(p)))
                .unwrap_or(n_all);
            n_min as f64 / a.necessary.len() as f64
        })
        .collect();
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn oracle_rates(reports: &[RiskReport]) -> (f64, f64, f64) {
    let m = reports.len() as f64;
    let assessed: Vec<&RiskReport> = reports.iter().filter(|r| r.is_assessable()).collect();
    let up = assessed.iter().filter(|r| !r.unexpected.is_empty()).count() as f64;
    let risky = assessed.iter().filter(|r| !r.flagged.is_empty()).count() as f64;
    let arisk = if assessed.is_empty() {
        0.0
    } else {
        assessed.iter().map(|r| r.risk_value as f64).sum::<f64>() / assessed.len() as f64
    };
    if m == 0.0 {
        (0.0, 0.0, arisk)
    } else {
        (up / m, risky / m, arisk)
    }
}

// ---- criteria ------------------------------------------------------------

fn c1_recommender() -> Check {
    let t0 = Instant::now();
    let mut r = rng("c1");
    let mut worst = 0.0f64;
    let mut compared = 0;
    for case in 0..ORACLE_CASES {
        let k = r.random_range(1..=4usize);
        let n = r.random_range(1..=10usize);
        let pool = &PERMS[..r.random_range(1..=6usize)];
        let apps: Vec<(Vec<f64>, PermSet)> = (0..n)
            .map(|_| (random_func(&mut r, k).probs().to_vec(), random_perms(&mut r, pool)))
            .collect();
        let target = random_func(&mut r, k);
        let threshold = r.random_range(0.3..0.9);
        let train = TrainingSet::new(
            apps.iter()
                .enumerate()
                .map(|(i, (f, p))| TrainingApp {
                    id: format!("a{i}"),
                    func: FuncVector::new(f.clone()),
                    perms: p.clone(),
                })
                .collect(),
            0.05,
        );
        let nb = select_neighbors(&target, &train, threshold);
        let got = recommend_values(nb.members.iter().map(|m| (m.similarity, &train.apps()[m.index].perms))).ok();
        let want = oracle_rv(target.probs(), &apps, threshold);
        match (got, want) {
            (None, None) => {}
            (Some(g), Some(w)) => {
                ensure(g.keys().eq(w.keys()), format!("case {case}: permission sets differ"))?;
                for (p, v) in &w {
                    worst = worst.max((g[p] - v).abs());
                }
                compared += 1;
            }
            (g, w) => {
                return Err(format!(
                    "case {case}: neighbour presence differs ({:?} vs {:?})",
                    g.is_some(),
                    w.is_some()
                ))
            }
        }
    }
    let el = t0.elapsed();
    ensure(worst <= ORACLE_TOL, format!("max error {worst:e}"))?;
    ensure(el < ORACLE_BUDGET, format!("took {el:?}"))?;
    Ok(format!(
        "{ORACLE_CASES} corpora ({compared} with neighbours), max error {worst:.1e}, {el:.2?}"
    ))
}

fn c2_support() -> Check {
    let t0 = Instant::now();
    let mut r = rng("c2");
    let mut worst = 0.0f64;
    for _ in 0..ORACLE_CASES {
        let n = r.random_range(1..=8usize);
        let apps: Vec<(Vec<f64>, PermSet)> = (0..n)
            .map(|_| {
                (
                    random_func(&mut r, 3).probs().to_vec(),
                    random_perms(&mut r, &PERMS[..5]),
                )
            })
            .collect();
        let funcs: Vec<FuncVector> = apps.iter().map(|(f, _)| FuncVector::new(f.clone())).collect();
        let table = mine_support(
            funcs.iter().zip(apps.iter().map(|(_, p)| p)),
            3,
            PermSource::Declared,
            "x",
        )
        .map_err(|e| e.to_string())?
        .table;
        for m in 0..3 {
            for p in &PERMS[..5] {
                let p = perm(p);
                worst = worst.max((table.support(m, &p) - oracle_support(&apps, m, &p)).abs());
            }
        }
        // aggregated score with every topic's permissions counted
        let target = random_func(&mut r, 3);
        let scores = funcperm::topic_perm_scores(&target, &table, 20);
        for p in &PERMS[..5] {
            let p = perm(p);
            let want: f64 = (0..3).map(|m| oracle_support(&apps, m, &p) * target.probs()[m]).sum();
            worst = worst.max((scores.get(&p) - want).abs());
        }
    }
    let el = t0.elapsed();
    ensure(worst <= ORACLE_TOL, format!("max error {worst:e}"))?;
    ensure(el < ORACLE_BUDGET, format!("took {el:?}"))?;
    Ok(format!("{ORACLE_CASES} instances, max error {worst:.1e}, {el:.2?}"))
}

fn c3_metrics() -> Check {
    let map_fixture = eval::map_metric(&[RankedApp {
        ranking: vec![perm("P1"), perm("P2")],
        declared: perm_set(["P1"]),
        necessary: perm_set(["P1"]),
    }])
    .0;
    ensure(
        (map_fixture - 0.5).abs() <= ORACLE_TOL,
        format!("MAP fixture {map_fixture}"),
    )?;
    let trr_fixture = eval::trr(
        &[RankedApp {
            ranking: vec![perm("A"), perm("C"), perm("B")],
            declared: perm_set(["A", "B"]),
            necessary: perm_set(["A", "B"]),
        }],
        10,
    );
    ensure(
        (trr_fixture - 1.5).abs() <= ORACLE_TOL,
        format!("TRR fixture {trr_fixture}"),
    )?;

    let reg = PermissionRegistry::builtin();
    let mut r = rng("c3");
    let mut worst = 0.0f64;
    for _ in 0..ORACLE_CASES {
        let n = r.random_range(1..=8usize);
        let apps: Vec<RankedApp> = (0..n)
            .map(|_| {
                let mut ranking: Vec<PermissionId> = PERMS.iter().map(|p| perm(p)).collect();
                ranking.retain(|_| r.random_bool(0.7));
                use rand::seq::SliceRandom;
                ranking.shuffle(&mut r);
                if r.random_bool(0.1) {
                    ranking.clear();
                }
                RankedApp {
                    ranking,
                    declared: random_perms(&mut r, &PERMS),
                    necessary: random_perms(&mut r, &PERMS),
                }
            })
            .collect();
        let n_all = r.random_range(8..=20usize);
        worst = worst
            .max((eval::map_metric(&apps).0 - oracle_map(&apps)).abs())
            .max((eval::nr(&apps) - oracle_nr(&apps)).abs())
            .max((eval::trr(&apps, n_all) - oracle_trr(&apps, n_all)).abs());

        let reports: Vec<RiskReport> = (0..n)
            .map(|i| {
                if r.random_bool(0.1) {
                    return RiskReport::unassessable(&format!("a{i}"));
                }
                let dp = random_perms(&mut r, &PERMS);
                let rb = random_perms(&mut r, &PERMS);
                let rm = random_perms(&mut r, &PERMS);
                RiskReport::from_sets(&format!("a{i}"), &dp, &rb, &rm, &reg).unwrap()
            })
            .collect();
        let (aupr, rar, arisk) = oracle_rates(&reports);
        worst = worst
            .max((eval::aupr(&reports) - aupr).abs())
            .max((eval::rar(&reports) - rar).abs())
            .max((eval::arisk(&reports) - arisk).abs());
    }
    ensure(worst <= ORACLE_TOL, format!("max error {worst:e}"))?;
    Ok(format!(
        "fixtures MAP={map_fixture} TRR={trr_fixture}, {ORACLE_CASES} random inputs, max error {worst:.1e}"
    ))
}

struct SynthRun {
    syn: SynthCorpus,
    run: pipeline::MinsetRun,
    funcs: BTreeMap<String, FuncVector>,
    elapsed: Duration,
}

fn synth_minset() -> SynthRun {
    let t0 = Instant::now();
    let spec = SynthSpec::default();
    let syn = generate(&spec, &PermissionRegistry::builtin()).unwrap();
    let cfg = RunConfig {
        topics: SYNTH_K,
        seed: Some(spec.seed),
        ..RunConfig::default()
    };
    let recs: Vec<&AppRecord> = syn.corpus.records.iter().collect();
    let topics = pipeline::train_topics(&recs, &cfg.lda_params().unwrap(), &Stopwords::builtin()).unwrap();
    let run = pipeline::run_minset(&syn.corpus, &topics, &cfg).unwrap();
    SynthRun {
        syn,
        run,
        funcs: topics.funcs,
        elapsed: t0.elapsed(),
    }
}

fn c4_minset(s: &SynthRun) -> Check {
    let o = &s.run.outcome;
    let mut lost = 0;
    let mut planted = 0;
    let mut removed = 0;
    for t in s
        .syn
        .truth
        .iter()
        .filter(|t| s.run.outcome.min_perms.contains_key(&t.app_id))
    {
        let m = &o.min_perms[&t.app_id];
        lost += t.true_min.iter().filter(|p| !m.contains(*p)).count();
        planted += t.planted_extras.len();
        removed += t.planted_extras.iter().filter(|p| !m.contains(*p)).count();
    }
    let share = removed as f64 / planted.max(1) as f64;
    let msg = format!(
        "{} passes (converged={}), {lost} ground-truth permissions lost, {removed}/{planted} extras removed ({:.1}%), {:.2?}",
        o.iterations,
        o.converged,
        share * 100.0,
        s.elapsed
    );
    ensure(o.converged && o.iterations <= MINSET_MAX_PASSES, msg.clone())?;
    ensure(
        lost == 0 && planted > 0 && share >= MINSET_MIN_EXTRAS_REMOVED,
        msg.clone(),
    )?;
    ensure(s.elapsed < MINSET_BUDGET, msg.clone())?;
    Ok(msg)
}

fn c5_monotonicity(s: &SynthRun) -> Check {
    let o = &s.run.outcome;
    for (i, w) in o.snapshots.windows(2).enumerate() {
        for (id, later) in &w[1] {
            ensure(later.is_subset(&w[0][id]), format!("{id} grew in pass {}", i + 1))?;
        }
    }
    let per_theta: Vec<BTreeMap<String, PermSet>> = THETA_GRID
        .iter()
        .map(|&theta| pipeline::final_sets(&o.min_perms, &s.funcs, &s.run.tables, theta, 20).unwrap())
        .collect();
    let mut shrinking = 0;
    for (i, w) in per_theta.windows(2).enumerate() {
        for (id, hi) in &w[1] {
            let lo = &w[0][id];
            ensure(
                hi.is_subset(lo),
                format!(
                    "{id} not antitone between theta {} and {}",
                    THETA_GRID[i],
                    THETA_GRID[i + 1]
                ),
            )?;
            if hi.len() < lo.len() {
                shrinking += 1;
            }
        }
    }
    for (id, f) in &per_theta[0] {
        ensure(
            f.is_subset(&o.min_perms[id]),
            format!("{id}: final set outside the initial set"),
        )?;
    }

    let reg = PermissionRegistry::builtin();
    let mut r = rng("c5");
    let pool: Vec<&str> = PERMS.to_vec();
    for _ in 0..2000 {
        let dp = random_perms(&mut r, &pool);
        let extra = perm(pool.choose(&mut r).unwrap());
        let mut bigger = dp.clone();
        bigger.insert(extra);
        let rb = random_perms(&mut r, &pool);
        let rm = random_perms(&mut r, &pool);
        let a = RiskReport::from_sets("x", &dp, &rb, &rm, &reg).unwrap();
        let b = RiskReport::from_sets("x", &bigger, &rb, &rm, &reg).unwrap();
        ensure(!a.risky || b.risky, "risky not monotone in declared permissions")?;
    }
    Ok(format!(
        "{} snapshots non-increasing, antitone over theta grid ({shrinking} strict shrinks), risky monotone on 2000 random cases",
        o.snapshots.len()
    ))
}

fn c6_separation() -> Check {
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in SEPARATION_SEEDS {
        let spec = SynthSpec {
            seed,
            ..SynthSpec::default()
        };
        let syn = generate(&spec, &PermissionRegistry::builtin()).unwrap();
        let cfg = RunConfig {
            topics: SYNTH_K,
            seed: Some(seed),
            ..RunConfig::default()
        };
        let out = pipeline::evaluate(&syn.corpus, Some(&syn.truth_map()), &cfg).map_err(|e| e.to_string())?;
        let (b, m) = (&out.reports[0], &out.reports[1]);
        ok &= m.rar > b.rar && m.arisk > b.arisk;
        lines.push(format!(
            "s{seed}: RAR {:.2}/{:.2} ARISK {:.2}/{:.2}",
            m.rar, b.rar, m.arisk, b.arisk
        ));
    }
    let msg = format!("malicious/benign {}", lines.join("; "));
    ensure(ok, msg.clone())?;
    Ok(msg)
}

fn c7_demo() -> Check {
    let d = demo_run(8);
    let declared = d.corpus.get(BOLLYWOOD).unwrap().declared.clone();
    let step1 = &d.run.outcome.min_perms[BOLLYWOOD];
    let removed1: PermSet = declared.difference(step1).cloned().collect();
    let removed2: PermSet = step1.difference(&d.run.final_sets[BOLLYWOOD]).cloned().collect();
    let trio = perm_set(["SET_WALLPAPER", "READ_LOGS", "SEND_SMS"]);
    ensure(declared.len() == 12, "demo app does not declare 12 permissions")?;
    ensure(removed1 == bollywood_step_one(), format!("step 1 removed {removed1:?}"))?;
    ensure(removed2 == trio, format!("step 2 removed {removed2:?}"))?;
    ensure(d.run.final_sets[BOLLYWOOD] == bollywood_final(), "final set differs")?;
    let others = others_changed(&d);
    ensure(others.is_empty(), format!("other apps changed: {others:?}"))?;
    Ok("12 -> 9 (CHANGE_WIFI_STATE, GET_TASKS, RECEIVE_BOOT_COMPLETED) -> 6 (minus READ_LOGS, SEND_SMS, SET_WALLPAPER)".into())
}

fn bin(args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_minperm"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    match o.status.code() {
        Some(0) => Ok(()),
        c => Err(format!("{args:?} exited {c:?}: {}", String::from_utf8_lossy(&o.stderr))),
    }
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn run_all_commands(root: &Path, threads: &str) -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
    let syn = root.join("synth");
    let out = root.join("out");
    let (syn_s, out_s) = (syn.to_str().unwrap(), out.to_str().unwrap());
    bin(&[
        "--threads",
        threads,
        "synth",
        "--out",
        syn_s,
        "--seed",
        "3",
        "--n-benign",
        "60",
        "--n-malicious",
        "12",
        "--topics",
        "4",
    ])?;
    let corpus = syn.join("corpus.jsonl");
    let api = syn.join("api_map.json");
    let truth = syn.join("truth.jsonl");
    let common = [
        "--corpus",
        corpus.to_str().unwrap(),
        "--api-map",
        api.to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
        "--out",
        out_s,
        "-k",
        "4",
        "--gibbs-iterations",
        "300",
        "--seed",
        "5",
    ];
    for cmd in [
        &["ingest"][..],
        &["train"],
        &["minset"],
        &["mine-support"],
        &["recommend", "--side", "benign"],
        &["risk", "--all-test"],
        &["evaluate"],
    ] {
        let mut args = vec!["--threads", threads];
        args.extend_from_slice(cmd);
        args.extend_from_slice(&common);
        bin(&args)?;
    }
    let mut all = tree(root);
    let eval_dir = root.join("sweep");
    let mut args = vec!["--threads", threads, "evaluate", "--sweep-theta"];
    args.extend_from_slice(&common);
    let idx = args.iter().position(|a| *a == out_s).unwrap();
    let eval_s = eval_dir.to_str().unwrap();
    args[idx] = eval_s;
    bin(&args)?;
    all.extend(
        tree(&eval_dir)
            .into_iter()
            .map(|(p, b)| (Path::new("sweep").join(p), b)),
    );
    Ok(all)
}

fn c8_determinism() -> Check {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = run_all_commands(a.path(), "1")?;
    let second = run_all_commands(b.path(), "4")?;
    ensure(first.keys().eq(second.keys()), "different output file sets")?;
    for (p, bytes) in &first {
        ensure(&second[p] == bytes, format!("{} differs", p.display()))?;
    }
    for needed in [
        "out/model/model.json",
        "out/func/func.jsonl",
        "out/minset/min_perms.jsonl",
        "out/risk/risk.jsonl",
        "out/eval/report.json",
    ] {
        ensure(first.contains_key(Path::new(needed)), format!("{needed} missing"))?;
    }
    Ok(format!(
        "{} output files byte-identical across reruns (1 vs 4 threads)",
        first.len()
    ))
}

fn c9_index() -> Check {
    let mut r = rng("c9");
    let mut queries = 0;
    let mut neighbours = 0;
    for case in 0..INDEX_CORPORA {
        let k = r.random_range(5..=30usize);
        let floor = r.random_range(0.02..0.2);
        let peaked = |r: &mut ChaCha8Rng| {
            let mut w: Vec<f64> = (0..k).map(|_| r.random_range(0.001..1.0)).collect();
            let top = r.random_range(0..k);
            w[top] += r.random_range(0.0..(4.0 * k as f64));
            FuncVector::normalized(w)
        };
        let apps: Vec<TrainingApp> = (0..INDEX_APPS)
            .map(|i| TrainingApp {
                id: format!("a{i}"),
                func: peaked(&mut r),
                perms: PermSet::new(),
            })
            .collect();
        let train = TrainingSet::new(apps, floor);
        for _ in 0..10 {
            let target = peaked(&mut r);
            for threshold in [0.4, 0.6, 0.8] {
                let fast = select_neighbors(&target, &train, threshold);
                let slow = select_neighbors_exhaustive(&target, &train, threshold);
                ensure(
                    fast == slow,
                    format!("corpus {case}: index and scan disagree at T={threshold}"),
                )?;
                queries += 1;
                neighbours += slow.len();
            }
        }
    }
    Ok(format!(
        "{INDEX_CORPORA} corpora x {INDEX_APPS} apps, {queries} queries, {neighbours} neighbours matched"
    ))
}

fn main() {
    // libtest flags such as --nocapture or a name filter are accepted and ignored
    let started = Instant::now();
    let mut failed = 0;
    let mut report = |name: &str, f: &mut dyn FnMut() -> Check| {
        let res = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match res {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    };
    report("C1 recommender oracle", &mut c1_recommender);
    report("C2 support oracle", &mut c2_support);
    report("C3 metric oracles", &mut c3_metrics);
    let synth = panic::catch_unwind(synth_minset);
    match &synth {
        Ok(s) => {
            report("C4 minset convergence and safety", &mut || c4_minset(s));
            report("C5 monotonicity", &mut || c5_monotonicity(s));
        }
        Err(_) => {
            report("C4 minset convergence and safety", &mut || {
                Err("synthetic run panicked".into())
            });
            report("C5 monotonicity", &mut || Err("synthetic run panicked".into()));
        }
    }
    report("C6 malicious/benign separation", &mut c6_separation);
    report("C7 demo walkthrough", &mut c7_demo);
    report("C8 determinism", &mut c8_determinism);
    report("C9 inverted index equivalence", &mut c9_index);
    println!("acceptance: {} of 9 passed in {:.1?}", 9 - failed, started.elapsed());
    if failed > 0 {
        std::process::exit(1);
    }
}
