//! Over-declared permission removal and the fold-wise fixed-point iteration
//! that yields each benign app's initial minimum permission set.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{partition_indices, PermSet, PermissionId};
use crate::error::{Error, Result};
use crate::recommender::{recommend, RecommenderParams, TrainingApp, TrainingSet};
use crate::topics::FuncVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Benign,
    Malicious,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverDeclaredReport {
    pub app_id: String,
    pub removed: PermSet,
    pub kept: PermSet,
    /// Set when one side had no neighbours; nothing is removed then.
    pub no_neighbors: Option<Side>,
}

/// `(RP_M − RP_M ∩ RP_B) ∩ DP`.
pub fn difference_removal(declared: &PermSet, rp_benign: &PermSet, rp_malicious: &PermSet) -> PermSet {
    rp_malicious
        .difference(rp_benign)
        .filter(|p| declared.contains(*p))
        .cloned()
        .collect()
}

pub fn over_declared(
    app_id: &str,
    func: &FuncVector,
    declared: &PermSet,
    benign: &TrainingSet,
    malicious: &TrainingSet,
    benign_params: &RecommenderParams,
    malicious_params: &RecommenderParams,
) -> OverDeclaredReport {
    let unchanged = |side| OverDeclaredReport {
        app_id: app_id.to_string(),
        removed: PermSet::new(),
        kept: declared.clone(),
        no_neighbors: Some(side),
    };
    let rp_b = match recommend(func, benign, benign_params) {
        Ok(r) => r.accepted_set(),
        Err(_) => return unchanged(Side::Benign),
    };
    let rp_m = match recommend(func, malicious, malicious_params) {
        Ok(r) => r.accepted_set(),
        Err(_) => return unchanged(Side::Malicious),
    };
    let removed = difference_removal(declared, &rp_b, &rp_m);
    let kept = declared.difference(&removed).cloned().collect();
    OverDeclaredReport {
        app_id: app_id.to_string(),
        removed,
        kept,
        no_neighbors: None,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinsetApp {
    pub id: String,
    pub func: FuncVector,
    pub declared: PermSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinsetParams {
    pub n_folds: usize,
    pub max_iterations: usize,
    pub benign: RecommenderParams,
    pub malicious: RecommenderParams,
    pub relevance_floor: f64,
    pub seed: u64,
}

impl MinsetParams {
    pub fn new(seed: u64) -> Self {
        MinsetParams {
            n_folds: 5,
            max_iterations: 10,
            benign: RecommenderParams::new(0.6),
            malicious: RecommenderParams::new(0.4),
            relevance_floor: crate::recommender::DEFAULT_RELEVANCE_FLOOR,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLogEntry {
    pub iteration: usize,
    pub app_id: String,
    pub removed: Vec<PermissionId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinsetOutcome {
    pub min_perms: BTreeMap<String, PermSet>,
    pub log: Vec<IterationLogEntry>,
    /// Passes executed, including the final pass that changed nothing.
    pub iterations: usize,
    pub converged: bool,
    /// Permission sets after each pass; `snapshots[0]` is the input.
    pub snapshots: Vec<BTreeMap<String, PermSet>>,
    /// Target evaluations skipped for lack of neighbours.
    pub no_neighbor_events: usize,
}

/// Fold-wise over-declared removal repeated until no set changes.
///
/// Within a pass folds are processed in order and each fold sees the
/// permissions already trimmed by earlier folds. The malicious training set
/// stays fixed.
pub fn iterate_minset(benign: &[MinsetApp], malicious: &TrainingSet, params: &MinsetParams) -> Result<MinsetOutcome> {
    if params.max_iterations < 1 {
        return Err(Error::InvalidParameter("max_iterations must be at least 1".into()));
    }
    let folds = partition_indices(benign.len(), params.n_folds, params.seed)?;
    let mut current: Vec<PermSet> = benign.iter().map(|a| a.declared.clone()).collect();
    let snapshot = |cur: &[PermSet]| -> BTreeMap<String, PermSet> {
        benign.iter().zip(cur).map(|(a, p)| (a.id.clone(), p.clone())).collect()
    };
    let mut snapshots = vec![snapshot(&current)];
    let mut log = Vec::new();
    let mut no_neighbor_events = 0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < params.max_iterations {
        iterations += 1;
        let mut changed = false;
        for (k, fold) in folds.iter().enumerate() {
            let train_apps: Vec<TrainingApp> = folds
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .flat_map(|(_, f)| f.iter())
                .map(|&i| TrainingApp {
                    id: benign[i].id.clone(),
                    func: benign[i].func.clone(),
                    perms: current[i].clone(),
                })
                .collect();
            let train = TrainingSet::new(train_apps, params.relevance_floor);
            let reports: Vec<OverDeclaredReport> = fold
                .par_iter()
                .map(|&i| {
                    over_declared(
                        &benign[i].id,
                        &benign[i].func,
                        &current[i],
                        &train,
                        malicious,
                        &params.benign,
                        &params.malicious,
                    )
                })
                .collect();
            for (&i, report) in fold.iter().zip(reports) {
                if report.no_neighbors.is_some() {
                    no_neighbor_events += 1;
                }
                if !report.removed.is_empty() {
                    changed = true;
                    log.push(IterationLogEntry {
                        iteration: iterations,
                        app_id: report.app_id.clone(),
                        removed: report.removed.iter().cloned().collect(),
                    });
                    current[i] = report.kept;
                }
            }
        }
        snapshots.push(snapshot(&current));
        if !changed {
            converged = true;
            break;
        }
    }
    log.sort_by(|a, b| a.iteration.cmp(&b.iteration).then_with(|| a.app_id.cmp(&b.app_id)));

    Ok(MinsetOutcome {
        min_perms: snapshot(&current),
        log,
        iterations,
        converged,
        snapshots,
        no_neighbor_events,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinPermRow {
    pub app_id: String,
    pub min_perms: Vec<PermissionId>,
}
