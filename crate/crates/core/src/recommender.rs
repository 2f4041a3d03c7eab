//! Threshold-neighbourhood collaborative filtering over topic vectors.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{PermSet, PermissionId};
use crate::error::{Error, Result};
use crate::topics::FuncVector;

/// Euclidean distance between two topic vectors.
pub fn distance(x: &FuncVector, y: &FuncVector) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(squared_distance(x.probs(), y.probs()).sqrt())
}

fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `1 / (1 + distance)`, in (0, 1].
pub fn similarity(x: &FuncVector, y: &FuncVector) -> Result<f64> {
    distance(x, y).map(|d| 1.0 / (1.0 + d))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingApp {
    pub id: String,
    pub func: FuncVector,
    pub perms: PermSet,
}

/// Posting lists: topic → training apps whose probability on that topic
/// exceeds `floor`.
#[derive(Clone, Debug, PartialEq)]
pub struct InvertedIndex {
    floor: f64,
    postings: Vec<Vec<usize>>,
}

impl InvertedIndex {
    pub fn build(apps: &[TrainingApp], floor: f64) -> Self {
        let k = apps.first().map_or(0, |a| a.func.len());
        let mut postings = vec![Vec::new(); k];
        for (i, app) in apps.iter().enumerate() {
            for (t, &p) in app.func.probs().iter().enumerate() {
                if p > floor {
                    postings[t].push(i);
                }
            }
        }
        InvertedIndex { floor, postings }
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }
}

/// Training apps of one label with their topic vectors, indexed.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    apps: Vec<TrainingApp>,
    index: InvertedIndex,
}

pub const DEFAULT_RELEVANCE_FLOOR: f64 = 0.05;

impl TrainingSet {
    pub fn new(apps: Vec<TrainingApp>, relevance_floor: f64) -> Self {
        let index = InvertedIndex::build(&apps, relevance_floor);
        TrainingSet { apps, index }
    }

    pub fn apps(&self) -> &[TrainingApp] {
        &self.apps
    }

    pub fn len(&self) -> usize {
        self.apps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.apps.is_empty()
    }

    /// Distinct permissions held by any training app.
    pub fn permission_universe(&self) -> PermSet {
        self.apps.iter().flat_map(|a| a.perms.iter().cloned()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    /// Position in the training set.
    pub index: usize,
    pub similarity: f64,
}

/// Training apps strictly more similar than the threshold, in training-set
/// order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NeighborSet {
    pub members: Vec<Neighbor>,
}

impl NeighborSet {
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }
}

fn check_threshold(threshold: f64) {
    assert!(
        threshold > 0.0 && threshold < 1.0,
        "similarity threshold must be in (0, 1), got {threshold}"
    );
}

pub fn select_neighbors_exhaustive(target: &FuncVector, train: &TrainingSet, threshold: f64) -> NeighborSet {
    check_threshold(threshold);
    scan(target, train, threshold, 0..train.apps.len())
}

fn scan(
    target: &FuncVector,
    train: &TrainingSet,
    threshold: f64,
    candidates: impl IntoIterator<Item = usize>,
) -> NeighborSet {
    let members = candidates
        .into_iter()
        .filter_map(|i| {
            let d = squared_distance(target.probs(), train.apps[i].func.probs()).sqrt();
            let s = 1.0 / (1.0 + d);
            (s > threshold).then_some(Neighbor {
                index: i,
                similarity: s,
            })
        })
        .collect();
    NeighborSet { members }
}

/// Neighbour selection through the inverted index.
///
/// Candidates are the posting lists of the target's relevant topics. Any
/// other app has probability at most `floor` on every one of those topics,
/// so its distance to the target is at least the distance from the target to
/// that capped simplex. When that bound already rules out the threshold the
/// candidate scan is exact; otherwise the whole training set is scanned.
pub fn select_neighbors(target: &FuncVector, train: &TrainingSet, threshold: f64) -> NeighborSet {
    check_threshold(threshold);
    let floor = train.index.floor;
    let relevant: Vec<usize> = target
        .probs()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > floor)
        .map(|(t, _)| t)
        .collect();
    if relevant.is_empty() || train.index.postings.len() != target.len() {
        return scan(target, train, threshold, 0..train.apps.len());
    }

    let max_distance = 1.0 / threshold - 1.0;
    let mut caps = vec![f64::INFINITY; target.len()];
    for &t in &relevant {
        caps[t] = floor;
    }
    let bound = capped_simplex_distance(target.probs(), &caps);
    if bound - 1e-9 < max_distance {
        return scan(target, train, threshold, 0..train.apps.len());
    }

    let mut candidates: Vec<usize> = relevant
        .iter()
        .flat_map(|&t| train.index.postings[t].iter().copied())
        .collect();
    candidates.sort_unstable();
    candidates.dedup();
    scan(target, train, threshold, candidates)
}

/// Euclidean distance from `x` to `{y : 0 <= y_i <= caps_i, sum y = 1}`.
/// Projection is `y_i = clamp(x_i - tau, 0, caps_i)` with `tau` found by
/// bisection.
fn capped_simplex_distance(x: &[f64], caps: &[f64]) -> f64 {
    let mass = |tau: f64| -> f64 { x.iter().zip(caps).map(|(&xi, &c)| (xi - tau).clamp(0.0, c)).sum() };
    let capacity: f64 = caps.iter().map(|c| c.min(1.0)).sum();
    if capacity < 1.0 {
        return f64::INFINITY;
    }
    let mut lo = x.iter().fold(f64::INFINITY, |m, &v| m.min(v)) - 1.0;
    let mut hi = x.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    x.iter()
        .zip(caps)
        .map(|(&xi, &c)| {
            let yi = (xi - tau).clamp(0.0, c);
            (xi - yi) * (xi - yi)
        })
        .sum::<f64>()
        .sqrt()
}

/// No training app passed the similarity threshold.
#[derive(Clone, Copy, Debug, PartialEq, thiserror::Error)]
#[error("no training app is more similar than {threshold}")]
pub struct NoNeighbors {
    pub threshold: f64,
}

/// Similarity-weighted vote: `Rv(p) = Σ sim_j [p ∈ P_j] / Σ sim_j`.
pub fn recommend_values<'a, I>(members: I) -> Result<BTreeMap<PermissionId, f64>, NoNeighbors>
where
    I: IntoIterator<Item = (f64, &'a PermSet)>,
{
    let mut total = 0.0;
    let mut votes: BTreeMap<PermissionId, f64> = BTreeMap::new();
    let mut any = false;
    for (sim, perms) in members {
        any = true;
        total += sim;
        for p in perms {
            *votes.entry(p.clone()).or_insert(0.0) += sim;
        }
    }
    if !any {
        return Err(NoNeighbors { threshold: f64::NAN });
    }
    for v in votes.values_mut() {
        *v = (*v / total).min(1.0);
    }
    Ok(votes)
}

/// Permissions with recommendation values, sorted by descending value then
/// ascending name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RecommendationList {
    pub ranked: Vec<(PermissionId, f64)>,
}

impl RecommendationList {
    pub fn from_values(values: &BTreeMap<PermissionId, f64>) -> Self {
        let mut ranked: Vec<(PermissionId, f64)> = values.iter().map(|(p, v)| (p.clone(), *v)).collect();
        ranked.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
        });
        RecommendationList { ranked }
    }

    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    pub fn permissions(&self) -> impl Iterator<Item = &PermissionId> {
        self.ranked.iter().map(|(p, _)| p)
    }

    pub fn truncated(&self, len: usize) -> RecommendationList {
        RecommendationList {
            ranked: self.ranked[..len.min(self.ranked.len())].to_vec(),
        }
    }
}

pub const DEFAULT_GAP_STOP: f64 = 0.5;

/// Length of the accepted prefix of a descending ranking.
///
/// Repeatedly finds the largest relative gap `(v_i - v_{i+1}) / v_i` among
/// the not-yet-accepted positions; while it reaches `stop_ratio`, everything
/// up to that gap is accepted. If no gap ever qualifies the ranking is
/// already balanced and all of it is accepted.
pub fn cutoff_len(ranked: &[(PermissionId, f64)], stop_ratio: f64) -> usize {
    let mut accepted = 0;
    while ranked.len() - accepted >= 2 {
        let rest = &ranked[accepted..];
        let mut best = (0usize, f64::NEG_INFINITY);
        for i in 0..rest.len() - 1 {
            let (hi, lo) = (rest[i].1, rest[i + 1].1);
            let gap = if hi > 0.0 { (hi - lo) / hi } else { 0.0 };
            if gap > best.1 {
                best = (i, gap);
            }
        }
        if best.1 < stop_ratio {
            break;
        }
        accepted += best.0 + 1;
    }
    if accepted == 0 {
        ranked.len()
    } else {
        accepted
    }
}

pub fn adaptive_cutoff(values: &BTreeMap<PermissionId, f64>, stop_ratio: f64) -> RecommendationList {
    let full = RecommendationList::from_values(values);
    let n = cutoff_len(&full.ranked, stop_ratio);
    full.truncated(n)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "policy")]
pub enum NoNeighborPolicy {
    /// Report the target as unrecommendable.
    #[default]
    Unrecommendable,
    /// Lower the threshold in fixed steps until someone qualifies.
    LowerThreshold { step: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecommenderParams {
    pub threshold: f64,
    pub gap_stop: f64,
    pub fallback: NoNeighborPolicy,
}

impl RecommenderParams {
    pub fn new(threshold: f64) -> Self {
        RecommenderParams {
            threshold,
            gap_stop: DEFAULT_GAP_STOP,
            fallback: NoNeighborPolicy::Unrecommendable,
        }
    }
}

/// Full ranking plus the adaptive-cutoff prefix length.
#[derive(Clone, Debug, PartialEq)]
pub struct Recommendation {
    pub full: RecommendationList,
    pub truncated_at: usize,
    pub neighbors: usize,
    pub threshold_used: f64,
}

impl Recommendation {
    pub fn accepted(&self) -> &[(PermissionId, f64)] {
        &self.full.ranked[..self.truncated_at]
    }

    pub fn accepted_set(&self) -> PermSet {
        self.accepted().iter().map(|(p, _)| p.clone()).collect()
    }
}

/// Neighbour selection, weighted vote and adaptive cutoff for one target.
pub fn recommend(
    target: &FuncVector,
    train: &TrainingSet,
    params: &RecommenderParams,
) -> Result<Recommendation, NoNeighbors> {
    let mut threshold = params.threshold;
    let neighbors = loop {
        let n = select_neighbors(target, train, threshold);
        if !n.is_empty() {
            break n;
        }
        match params.fallback {
            NoNeighborPolicy::LowerThreshold { step } if step > 0.0 && threshold - step > 0.0 => {
                threshold -= step;
            }
            _ => {
                return Err(NoNeighbors {
                    threshold: params.threshold,
                })
            }
        }
    };
    let values = recommend_values(
        neighbors
            .members
            .iter()
            .map(|n| (n.similarity, &train.apps[n.index].perms)),
    )
    .map_err(|_| NoNeighbors { threshold })?;
    let full = RecommendationList::from_values(&values);
    let truncated_at = cutoff_len(&full.ranked, params.gap_stop);
    Ok(Recommendation {
        full,
        truncated_at,
        neighbors: neighbors.len(),
        threshold_used: threshold,
    })
}

/// JSONL row for recommendation dumps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecommendationRow {
    pub app_id: String,
    pub ranked: Vec<RankedPermission>,
    pub truncated_at: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedPermission {
    pub perm: PermissionId,
    pub rv: f64,
}

impl RecommendationRow {
    pub fn new(app_id: &str, rec: Option<&Recommendation>) -> Self {
        RecommendationRow {
            app_id: app_id.to_string(),
            ranked: rec
                .map(|r| {
                    r.full
                        .ranked
                        .iter()
                        .map(|(p, v)| RankedPermission {
                            perm: p.clone(),
                            rv: *v,
                        })
                        .collect()
                })
                .unwrap_or_default(),
            truncated_at: rec.map(|r| r.truncated_at),
        }
    }
}
