//! Topic/permission support mining and the support-based refinement of the
//! initial minimum permission set.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{PermSet, PermissionId};
use crate::error::{Error, Result};
use crate::topics::FuncVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PermSource {
    Declared,
    Code,
}

/// Per-topic support of each permission, in [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportTable {
    pub source: PermSource,
    pub model_fingerprint: String,
    #[serde(with = "topic_rows")]
    pub topics: Vec<BTreeMap<PermissionId, f64>>,
}

mod topic_rows {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::corpus::PermissionId;

    type Row = BTreeMap<PermissionId, f64>;

    pub fn serialize<S: Serializer>(rows: &[Row], s: S) -> Result<S::Ok, S::Error> {
        let map: BTreeMap<usize, &Row> = rows.iter().enumerate().collect();
        map.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Row>, D::Error> {
        let map: BTreeMap<usize, Row> = BTreeMap::deserialize(d)?;
        let n = map.keys().next_back().map_or(0, |k| k + 1);
        let mut rows = vec![Row::new(); n];
        for (k, row) in map {
            rows[k] = row;
        }
        Ok(rows)
    }
}

impl SupportTable {
    pub fn num_topics(&self) -> usize {
        self.topics.len()
    }

    pub fn support(&self, topic: usize, p: &PermissionId) -> f64 {
        self.topics
            .get(topic)
            .and_then(|row| row.get(p))
            .copied()
            .unwrap_or(0.0)
    }

    /// Whether the permission has support in any topic.
    pub fn mentions(&self, p: &PermissionId) -> bool {
        self.topics.iter().any(|row| row.contains_key(p))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let s = serde_json::to_string_pretty(self)?;
        fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }

    pub fn ensure_fingerprint(&self, fingerprint: &str) -> Result<()> {
        if self.model_fingerprint == fingerprint {
            Ok(())
        } else {
            Err(Error::ModelMismatch(format!(
                "{:?} support table was mined with model {}, current model is {}",
                self.source, self.model_fingerprint, fingerprint
            )))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinedSupport {
    pub table: SupportTable,
    /// Topics with no probability mass (left empty).
    pub empty_topics: Vec<usize>,
}

/// Mines `support(m, l) = Σ_{apps holding l} Pr_m / Σ_{all apps} Pr_m`.
pub fn mine_support<'a, I>(apps: I, topics: usize, source: PermSource, model_fingerprint: &str) -> Result<MinedSupport>
where
    I: IntoIterator<Item = (&'a FuncVector, &'a PermSet)>,
{
    let mut numer: Vec<BTreeMap<PermissionId, f64>> = vec![BTreeMap::new(); topics];
    let mut denom = vec![0.0f64; topics];
    for (func, perms) in apps {
        if func.len() != topics {
            return Err(Error::LengthMismatch {
                left: func.len(),
                right: topics,
            });
        }
        for (m, &pr) in func.probs().iter().enumerate() {
            denom[m] += pr;
            for p in perms {
                *numer[m].entry(p.clone()).or_insert(0.0) += pr;
            }
        }
    }
    let mut empty_topics = Vec::new();
    let rows = numer
        .into_iter()
        .zip(&denom)
        .enumerate()
        .map(|(m, (row, &d))| {
            if d <= 0.0 {
                log::warn!("topic {m} has no probability mass; its support row is empty");
                empty_topics.push(m);
                return BTreeMap::new();
            }
            row.into_iter().map(|(p, n)| (p, (n / d).min(1.0))).collect()
        })
        .collect();
    Ok(MinedSupport {
        table: SupportTable {
            source,
            model_fingerprint: model_fingerprint.to_string(),
            topics: rows,
        },
        empty_topics,
    })
}

/// Aggregated per-app permission scores, sorted descending (ties by name).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TopicPermScore {
    pub scores: Vec<(PermissionId, f64)>,
}

impl TopicPermScore {
    pub fn get(&self, p: &PermissionId) -> f64 {
        self.scores.iter().find(|(q, _)| q == p).map_or(0.0, |(_, s)| *s)
    }

    pub fn above(&self, theta: f64) -> PermSet {
        self.scores
            .iter()
            .filter(|(_, s)| *s >= theta)
            .map(|(p, _)| p.clone())
            .collect()
    }
}

/// For each topic, takes its `top_t` permissions by support, weights them by
/// the app's topic probability and sums across topics.
pub fn topic_perm_scores(app: &FuncVector, table: &SupportTable, top_t: usize) -> TopicPermScore {
    let mut acc: BTreeMap<PermissionId, f64> = BTreeMap::new();
    for (row, &pr) in table.topics.iter().zip(app.probs()) {
        let mut entries: Vec<(&PermissionId, f64)> = row.iter().map(|(p, s)| (p, *s)).collect();
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        for (p, s) in entries.into_iter().take(top_t) {
            *acc.entry(p.clone()).or_insert(0.0) += s * pr;
        }
    }
    let mut scores: Vec<(PermissionId, f64)> = acc.into_iter().collect();
    scores.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    TopicPermScore { scores }
}

pub const DEFAULT_THETA_SUPPORT: f64 = 0.1;
pub const DEFAULT_TOP_T: usize = 20;

/// Drops permissions of `initial` whose aggregated support is below `theta`
/// in both tables. Permissions neither table knows about are kept.
pub fn final_minset(
    initial: &PermSet,
    app: &FuncVector,
    declared_table: &SupportTable,
    code_table: &SupportTable,
    theta: f64,
    top_t: usize,
) -> PermSet {
    let from_declared = topic_perm_scores(app, declared_table, top_t).above(theta);
    let from_code = topic_perm_scores(app, code_table, top_t).above(theta);
    initial
        .iter()
        .filter(|p| {
            from_declared.contains(*p)
                || from_code.contains(*p)
                || !(declared_table.mentions(p) || code_table.mentions(p))
        })
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{perm, perm_set};

    fn fv(v: &[f64]) -> FuncVector {
        FuncVector::new(v.to_vec())
    }

    fn table(rows: &[&[(&str, f64)]]) -> SupportTable {
        SupportTable {
            source: PermSource::Declared,
            model_fingerprint: "test".into(),
            topics: rows
                .iter()
                .map(|r| r.iter().map(|(p, s)| (perm(p), *s)).collect())
                .collect(),
        }
    }

    #[test]
    fn universal_permission_has_full_support() {
        let f1 = fv(&[0.3, 0.7]);
        let f2 = fv(&[0.6, 0.4]);
        let p = perm_set(["INTERNET"]);
        let t = mine_support([(&f1, &p), (&f2, &p)], 2, PermSource::Declared, "x").unwrap();
        assert!((t.table.support(0, &perm("INTERNET")) - 1.0).abs() < 1e-15);
        assert!((t.table.support(1, &perm("INTERNET")) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_app_support_hand_case() {
        let f1 = fv(&[0.8, 0.2]);
        let f2 = fv(&[0.2, 0.8]);
        let holds = perm_set(["P"]);
        let empty = PermSet::new();
        let t = mine_support([(&f1, &holds), (&f2, &empty)], 2, PermSource::Code, "x").unwrap();
        assert!((t.table.support(0, &perm("P")) - 0.8).abs() < 1e-12);
        assert!((t.table.support(1, &perm("P")) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn massless_topic_is_empty() {
        let f = fv(&[1.0, 0.0]);
        let p = perm_set(["P"]);
        let t = mine_support([(&f, &p)], 2, PermSource::Declared, "x").unwrap();
        assert_eq!(t.empty_topics, vec![1]);
        assert!(t.table.topics[1].is_empty());
    }

    #[test]
    fn single_topic_scores_equal_support_row() {
        let t = table(&[&[("A", 0.9), ("B", 0.4)], &[("C", 0.7)]]);
        let s = topic_perm_scores(&fv(&[1.0, 0.0]), &t, 20);
        assert_eq!(s.get(&perm("A")), 0.9);
        assert_eq!(s.get(&perm("B")), 0.4);
        assert_eq!(s.get(&perm("C")), 0.0);
    }

    #[test]
    fn split_topics_halve_scores() {
        let t = table(&[&[("A", 0.9)], &[("C", 0.7)]]);
        let s = topic_perm_scores(&fv(&[0.5, 0.5]), &t, 20);
        assert!((s.get(&perm("A")) - 0.45).abs() < 1e-15);
        assert!((s.get(&perm("C")) - 0.35).abs() < 1e-15);
        assert_eq!(s.scores[0].0, perm("A"));
    }

    #[test]
    fn top_t_truncates_per_topic() {
        let t = table(&[&[("A", 0.9), ("B", 0.5), ("C", 0.1)]]);
        let s = topic_perm_scores(&fv(&[1.0]), &t, 2);
        assert_eq!(s.scores.len(), 2);
        assert_eq!(s.get(&perm("C")), 0.0);
        assert_eq!(topic_perm_scores(&fv(&[1.0]), &t, 50).scores.len(), 3);
    }

    #[test]
    fn six_permission_walkthrough() {
        // P5 has support far below the threshold; the others are well above it
        let declared = table(&[
            &[("P1", 0.9), ("P2", 0.8), ("P4", 0.6), ("P5", 0.02)],
            &[("P1", 0.5), ("P5", 0.01)],
        ]);
        let code = table(&[&[("P4", 0.7)], &[("P2", 0.3)]]);
        let app = fv(&[0.7, 0.3]);
        let initial = perm_set(["P1", "P2", "P4", "P5"]);
        let out = final_minset(&initial, &app, &declared, &code, 0.1, 20);
        assert_eq!(out, perm_set(["P1", "P2", "P4"]));
        assert_eq!(final_minset(&initial, &app, &declared, &code, 0.0, 20), initial);
    }

    #[test]
    fn unknown_permissions_are_retained() {
        let declared = table(&[&[("A", 0.9)]]);
        let code = table(&[&[]]);
        let out = final_minset(&perm_set(["A", "Z"]), &fv(&[1.0]), &declared, &code, 0.5, 20);
        assert_eq!(out, perm_set(["A", "Z"]));
    }

    #[test]
    fn table_json_roundtrip() {
        let t = table(&[&[("A", 0.25)], &[], &[("B", 0.5)]]);
        let s = serde_json::to_string(&t).unwrap();
        assert!(s.contains("\"0\":{\"A\":0.25}"));
        let back: SupportTable = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }
}
