//! Unexpected permissions, risk permissions and the app risk value.

use serde::{Deserialize, Serialize};

use crate::corpus::{PermSet, PermissionRegistry};
use crate::error::{Error, Result};
use crate::minset::Side;
use crate::recommender::{recommend, Recommendation, RecommenderParams, TrainingSet};
use crate::topics::FuncVector;

/// Declared permissions the benign side did not recommend: `DP − RP_B ∩ DP`.
pub fn unexpected(declared: &PermSet, rp_benign: &PermSet) -> PermSet {
    declared.difference(rp_benign).cloned().collect()
}

/// Recommended by the malicious side only: `RP_M − RP_M ∩ RP_B`.
pub fn risk_permissions(rp_malicious: &PermSet, rp_benign: &PermSet) -> PermSet {
    rp_malicious.difference(rp_benign).cloned().collect()
}

/// Sum of protection scores (normal 1, dangerous 2).
pub fn risk_value(flagged: &PermSet, registry: &PermissionRegistry) -> Result<u32> {
    flagged.iter().try_fold(0u32, |acc, p| {
        registry
            .score(p)
            .map(|s| acc + s)
            .ok_or_else(|| Error::MissingPermission(p.to_string()))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskStatus {
    Assessed,
    Unassessable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub app_id: String,
    pub unexpected: PermSet,
    pub risk_perms: PermSet,
    pub flagged: PermSet,
    pub risky: bool,
    pub risk_value: u32,
    pub status: RiskStatus,
}

impl RiskReport {
    pub fn unassessable(app_id: &str) -> Self {
        RiskReport {
            app_id: app_id.to_string(),
            unexpected: PermSet::new(),
            risk_perms: PermSet::new(),
            flagged: PermSet::new(),
            risky: false,
            risk_value: 0,
            status: RiskStatus::Unassessable,
        }
    }

    pub fn is_assessable(&self) -> bool {
        self.status == RiskStatus::Assessed
    }

    /// Builds a report from already-truncated recommendation sets.
    pub fn from_sets(
        app_id: &str,
        declared: &PermSet,
        rp_benign: &PermSet,
        rp_malicious: &PermSet,
        registry: &PermissionRegistry,
    ) -> Result<Self> {
        let unexpected = unexpected(declared, rp_benign);
        let risk_perms = risk_permissions(rp_malicious, rp_benign);
        let flagged: PermSet = unexpected.intersection(&risk_perms).cloned().collect();
        let risk_value = risk_value(&flagged, registry)?;
        Ok(RiskReport {
            app_id: app_id.to_string(),
            risky: !flagged.is_empty(),
            unexpected,
            risk_perms,
            flagged,
            risk_value,
            status: RiskStatus::Assessed,
        })
    }
}

/// A risk report together with the recommendations behind it.
#[derive(Clone, Debug, PartialEq)]
pub struct Assessment {
    pub report: RiskReport,
    pub benign: Option<Recommendation>,
    pub malicious: Option<Recommendation>,
    pub no_neighbors: Option<Side>,
}

/// Training data and parameters shared by every assessed target.
#[derive(Clone, Copy, Debug)]
pub struct RiskContext<'a> {
    pub benign: &'a TrainingSet,
    pub malicious: &'a TrainingSet,
    pub benign_params: RecommenderParams,
    pub malicious_params: RecommenderParams,
    pub registry: &'a PermissionRegistry,
}

pub fn assess(ctx: &RiskContext<'_>, app_id: &str, func: &FuncVector, declared: &PermSet) -> Result<Assessment> {
    let rec_b = recommend(func, ctx.benign, &ctx.benign_params).ok();
    let rec_m = recommend(func, ctx.malicious, &ctx.malicious_params).ok();
    let (b, m) = match (&rec_b, &rec_m) {
        (Some(b), Some(m)) => (b, m),
        _ => {
            let side = if rec_b.is_none() { Side::Benign } else { Side::Malicious };
            return Ok(Assessment {
                report: RiskReport::unassessable(app_id),
                benign: rec_b,
                malicious: rec_m,
                no_neighbors: Some(side),
            });
        }
    };
    let report = RiskReport::from_sets(app_id, declared, &b.accepted_set(), &m.accepted_set(), ctx.registry)?;
    Ok(Assessment {
        report,
        benign: rec_b,
        malicious: rec_m,
        no_neighbors: None,
    })
}
