//! Corpus-level detection metrics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{PermSet, PermissionId};
use crate::risk::RiskReport;

/// Per-app inputs for the ranking metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedApp {
    /// Full benign-side ranking; empty when the app was unassessable.
    pub ranking: Vec<PermissionId>,
    /// Permissions the app actually declares.
    pub declared: PermSet,
    /// Necessary permissions (ground truth or final minimum set).
    pub necessary: PermSet,
}

/// Mean of `(1/N) Σ_l (R_l / l) I_l` over apps with a non-empty ranking.
/// Returns `(map, skipped)`.
pub fn map_metric(apps: &[RankedApp]) -> (f64, usize) {
    let mut total = 0.0;
    let mut counted = 0usize;
    for app in apps {
        if app.ranking.is_empty() {
            continue;
        }
        total += average_precision(&app.ranking, &app.declared);
        counted += 1;
    }
    (mean(total, counted), apps.len() - counted)
}

fn average_precision(ranking: &[PermissionId], relevant: &PermSet) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, p) in ranking.iter().enumerate() {
        if relevant.contains(p) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / ranking.len() as f64
}

fn mean(total: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

/// Fraction of apps with at least one unexpected permission. Unassessable
/// apps count in the denominator with indicator 0.
pub fn aupr(reports: &[RiskReport]) -> f64 {
    let hits = reports
        .iter()
        .filter(|r| r.is_assessable() && !r.unexpected.is_empty())
        .count();
    mean(hits as f64, reports.len())
}

/// Fraction of risky apps.
pub fn rar(reports: &[RiskReport]) -> f64 {
    let hits = reports.iter().filter(|r| r.is_assessable() && r.risky).count();
    mean(hits as f64, reports.len())
}

/// Mean risk value over assessable apps.
pub fn arisk(reports: &[RiskReport]) -> f64 {
    let assessed: Vec<&RiskReport> = reports.iter().filter(|r| r.is_assessable()).collect();
    mean(assessed.iter().map(|r| f64::from(r.risk_value)).sum(), assessed.len())
}

/// Mean over apps of `|necessary ∩ top-n| / n`, `n = |necessary|`. Apps
/// with no ranking or no necessary permissions are skipped.
pub fn nr(apps: &[RankedApp]) -> f64 {
    let mut total = 0.0;
    let mut counted = 0;
    for app in apps {
        let n = app.necessary.len();
        if app.ranking.is_empty() || n == 0 {
            continue;
        }
        let hits = app
            .ranking
            .iter()
            .take(n)
            .filter(|p| app.necessary.contains(*p))
            .count();
        total += hits as f64 / n as f64;
        counted += 1;
    }
    mean(total, counted)
}

/// Mean over apps of `n_min / |necessary|`, where `n_min` is the shortest
/// ranking prefix containing every necessary permission, or `n_all` when the
/// ranking never achieves total recall.
pub fn trr(apps: &[RankedApp], n_all: usize) -> f64 {
    let mut total = 0.0;
    let mut counted = 0;
    for app in apps {
        let n = app.necessary.len();
        if app.ranking.is_empty() || n == 0 {
            continue;
        }
        let mut found = 0;
        let mut prefix = None;
        for (i, p) in app.ranking.iter().enumerate() {
            if app.necessary.contains(p) {
                found += 1;
                if found == n {
                    prefix = Some(i + 1);
                    break;
                }
            }
        }
        total += prefix.unwrap_or(n_all) as f64 / n as f64;
        counted += 1;
    }
    mean(total, counted)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalParameters {
    pub topics: usize,
    pub t_benign: f64,
    pub t_malicious: f64,
    pub theta_support: f64,
    pub test_ratio: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub test_set: String,
    pub aupr: f64,
    pub rar: f64,
    pub arisk: f64,
    pub map_score: f64,
    pub nr: f64,
    pub trr: f64,
    pub m: usize,
    pub unassessable_count: usize,
    pub parameters: EvalParameters,
}

impl EvalReport {
    pub fn compute(
        test_set: &str,
        reports: &[RiskReport],
        ranked: &[RankedApp],
        n_all: usize,
        parameters: EvalParameters,
    ) -> Self {
        EvalReport {
            test_set: test_set.to_string(),
            aupr: aupr(reports),
            rar: rar(reports),
            arisk: arisk(reports),
            map_score: map_metric(ranked).0,
            nr: nr(ranked),
            trr: trr(ranked, n_all),
            m: reports.len(),
            unassessable_count: reports.iter().filter(|r| !r.is_assessable()).count(),
            parameters,
        }
    }
}

pub const TABLE_COLUMNS: [&str; 6] = ["AUPR", "RAR", "ARISK", "MAP", "NR", "TRR"];

/// Plain-text table, one row per report.
pub fn render_table(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<12}", "Test set");
    for c in TABLE_COLUMNS {
        let _ = write!(out, " {c:>7}");
    }
    out.push('\n');
    for r in reports {
        let _ = writeln!(
            out,
            "{:<12} {:>7.3} {:>7.3} {:>7.3} {:>7.3} {:>7.3} {:>7.3}",
            r.test_set, r.aupr, r.rar, r.arisk, r.map_score, r.nr, r.trr
        );
    }
    out
}
