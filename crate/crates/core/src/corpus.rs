//! App corpus data model: permission registry, app records, API→permission
//! map, JSONL loading and stratified splitting.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

const ANDROID_PREFIX: &str = "android.permission.";

const BUILTIN_REGISTRY: &str = include_str!("../data/registry.json");

/// A system permission in canonical short form (`INTERNET`, not
/// `android.permission.INTERNET`).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PermissionId(String);

impl PermissionId {
    /// Canonicalizes a raw permission name. Returns `None` for blank input.
    pub fn new(raw: &str) -> Option<Self> {
        let trimmed = raw.trim();
        let short = trimmed.strip_prefix(ANDROID_PREFIX).unwrap_or(trimmed);
        if short.is_empty() {
            None
        } else {
            Some(PermissionId(short.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PermissionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Shorthand used in tests and fixtures. Panics on blank names.
pub fn perm(name: &str) -> PermissionId {
    PermissionId::new(name).expect("blank permission name")
}

pub type PermSet = BTreeSet<PermissionId>;

pub fn perm_set<'a>(names: impl IntoIterator<Item = &'a str>) -> PermSet {
    names.into_iter().map(perm).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtectionLevel {
    Normal,
    Dangerous,
}

impl ProtectionLevel {
    /// Risk score of a permission at this level.
    pub fn score(self) -> u32 {
        match self {
            ProtectionLevel::Normal => 1,
            ProtectionLevel::Dangerous => 2,
        }
    }
}

#[derive(Deserialize, Serialize)]
struct RegistryEntry {
    name: String,
    level: ProtectionLevel,
}

/// System permissions and their (two-level) protection classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermissionRegistry {
    entries: BTreeMap<PermissionId, ProtectionLevel>,
}

impl PermissionRegistry {
    /// The shipped registry of 285 system permissions.
    pub fn builtin() -> Self {
        Self::from_json_str(BUILTIN_REGISTRY).expect("builtin registry is valid")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: Vec<RegistryEntry> = serde_json::from_str(s)?;
        let mut entries = BTreeMap::new();
        for e in raw {
            let id = PermissionId::new(&e.name).ok_or_else(|| Error::Registry("blank permission name".into()))?;
            if entries.insert(id.clone(), e.level).is_some() {
                return Err(Error::Registry(format!("duplicate permission `{id}`")));
            }
        }
        Ok(PermissionRegistry { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&s)
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (PermissionId, ProtectionLevel)>) -> Self {
        PermissionRegistry {
            entries: entries.into_iter().collect(),
        }
    }

    pub fn level(&self, p: &PermissionId) -> Option<ProtectionLevel> {
        self.entries.get(p).copied()
    }

    pub fn score(&self, p: &PermissionId) -> Option<u32> {
        self.level(p).map(ProtectionLevel::score)
    }

    pub fn contains(&self, p: &PermissionId) -> bool {
        self.entries.contains_key(p)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PermissionId, ProtectionLevel)> {
        self.entries.iter().map(|(k, v)| (k, *v))
    }

    pub fn to_json_string(&self) -> String {
        let raw: Vec<RegistryEntry> = self
            .entries
            .iter()
            .map(|(k, v)| RegistryEntry {
                name: format!("{ANDROID_PREFIX}{k}"),
                level: *v,
            })
            .collect();
        serde_json::to_string_pretty(&raw).expect("registry serializes")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Benign,
    Malicious,
}

/// One app of the corpus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AppRecord {
    pub id: String,
    pub description: String,
    /// Permissions declared in the manifest.
    pub declared: PermSet,
    pub api_calls: Vec<String>,
    /// Permissions implied by the API calls.
    pub code_perms: PermSet,
    pub label: Label,
}

/// API signature → permissions it requires.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ApiPermissionMap {
    entries: BTreeMap<String, PermSet>,
}

impl ApiPermissionMap {
    pub fn new(entries: BTreeMap<String, PermSet>) -> Self {
        ApiPermissionMap { entries }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: BTreeMap<String, Vec<String>> = serde_json::from_str(s)?;
        let mut entries = BTreeMap::new();
        for (api, perms) in raw {
            let set = perms
                .iter()
                .map(|p| {
                    PermissionId::new(p)
                        .ok_or_else(|| Error::InvalidParameter(format!("blank permission for API `{api}`")))
                })
                .collect::<Result<PermSet>>()?;
            entries.insert(api, set);
        }
        Ok(ApiPermissionMap { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&s)
    }

    /// Unmapped APIs yield the empty set.
    pub fn lookup(&self, api: &str) -> Option<&PermSet> {
        self.entries.get(api)
    }

    /// Checks every mapped permission against the registry.
    pub fn validate(&self, registry: &PermissionRegistry) -> Result<()> {
        for perms in self.entries.values() {
            if let Some(p) = perms.iter().find(|p| !registry.contains(p)) {
                return Err(Error::MissingPermission(p.to_string()));
            }
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("api map serializes")
    }
}

/// Union of the permissions required by each call. Unmapped calls contribute
/// nothing.
pub fn derive_code_permissions<S: AsRef<str>>(api_calls: &[S], map: &ApiPermissionMap) -> PermSet {
    api_calls
        .iter()
        .filter_map(|a| map.lookup(a.as_ref()))
        .flatten()
        .cloned()
        .collect()
}

/// Wire form of one corpus line.
#[derive(Debug, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub description: String,
    #[serde(default)]
    pub declared: Vec<String>,
    #[serde(default)]
    pub api_calls: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code_perms: Option<Vec<String>>,
    pub label: Label,
}

impl From<&AppRecord> for RawRecord {
    fn from(r: &AppRecord) -> Self {
        RawRecord {
            id: r.id.clone(),
            description: r.description.clone(),
            declared: r.declared.iter().map(|p| p.to_string()).collect(),
            api_calls: r.api_calls.clone(),
            code_perms: Some(r.code_perms.iter().map(|p| p.to_string()).collect()),
            label: r.label,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct LoadOptions {
    /// Drop (with a warning) permissions missing from the registry instead
    /// of failing.
    pub allow_custom: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub records: Vec<AppRecord>,
    pub registry: PermissionRegistry,
}

impl Corpus {
    /// Builds a corpus from already-canonical records, checking invariants.
    pub fn new(records: Vec<AppRecord>, registry: PermissionRegistry) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateApp(r.id.clone()));
            }
            for p in r.declared.iter().chain(&r.code_perms) {
                if !registry.contains(p) {
                    return Err(Error::UnknownPermission {
                        app: r.id.clone(),
                        permission: p.to_string(),
                    });
                }
            }
        }
        Ok(Corpus { records, registry })
    }

    pub fn parse_jsonl(
        text: &str,
        registry: PermissionRegistry,
        api_map: Option<&ApiPermissionMap>,
        opts: LoadOptions,
    ) -> Result<Self> {
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if !seen.insert(raw.id.clone()) {
                return Err(Error::DuplicateApp(raw.id));
            }
            let declared = canonical_set(&raw.id, &raw.declared, &registry, opts, line_no)?;
            let code_perms = match (&raw.code_perms, api_map) {
                (Some(cp), _) => canonical_set(&raw.id, cp, &registry, opts, line_no)?,
                (None, Some(map)) => {
                    let derived = derive_code_permissions(&raw.api_calls, map);
                    let names: Vec<String> = derived.iter().map(|p| p.to_string()).collect();
                    canonical_set(&raw.id, &names, &registry, opts, line_no)?
                }
                (None, None) => PermSet::new(),
            };
            records.push(AppRecord {
                id: raw.id,
                description: raw.description,
                declared,
                api_calls: raw.api_calls,
                code_perms,
                label: raw.label,
            });
        }
        Ok(Corpus { records, registry })
    }

    pub fn load(
        path: impl AsRef<Path>,
        registry: PermissionRegistry,
        api_map: Option<&ApiPermissionMap>,
        opts: LoadOptions,
    ) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_jsonl(&text, registry, api_map, opts)
    }

    /// Writes the corpus as JSONL with `code_perms` materialized.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            let line = serde_json::to_string(&RawRecord::from(r))?;
            writeln!(w, "{line}").map_err(|e| Error::io("<corpus output>", e))?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("utf-8 json")
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&AppRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn with_label(&self, label: Label) -> impl Iterator<Item = &AppRecord> {
        self.records.iter().filter(move |r| r.label == label)
    }

    pub fn count(&self, label: Label) -> usize {
        self.with_label(label).count()
    }

    /// Same registry, different records.
    pub fn subset(&self, records: Vec<AppRecord>) -> Corpus {
        Corpus {
            records,
            registry: self.registry.clone(),
        }
    }
}

fn canonical_set(
    app: &str,
    names: &[String],
    registry: &PermissionRegistry,
    opts: LoadOptions,
    line: usize,
) -> Result<PermSet> {
    let mut out = PermSet::new();
    for name in names {
        let id = PermissionId::new(name).ok_or_else(|| Error::Parse {
            line,
            message: format!("app `{app}` has a blank permission name"),
        })?;
        if registry.contains(&id) {
            out.insert(id);
        } else if opts.allow_custom {
            log::warn!("app `{app}`: ignoring non-system permission `{name}`");
        } else {
            return Err(Error::UnknownPermission {
                app: app.to_string(),
                permission: name.clone(),
            });
        }
    }
    Ok(out)
}

/// Stratified random split. Each label is shuffled independently and
/// `floor(n * test_ratio)` of its records go to the test side. Both sides keep
/// the original record order.
pub fn split(corpus: &Corpus, test_ratio: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    if !(test_ratio > 0.0 && test_ratio < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test ratio must be in (0, 1), got {test_ratio}"
        )));
    }
    let mut test_idx = BTreeSet::new();
    for (label, tag) in [(Label::Benign, "split/benign"), (Label::Malicious, "split/malicious")] {
        let mut idx: Vec<usize> = corpus
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.label == label)
            .map(|(i, _)| i)
            .collect();
        let n_test = (idx.len() as f64 * test_ratio + 1e-9).floor() as usize;
        idx.shuffle(&mut seed::rng(seed, tag));
        test_idx.extend(idx.into_iter().take(n_test));
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, r) in corpus.records.iter().enumerate() {
        if test_idx.contains(&i) {
            test.push(r.clone());
        } else {
            train.push(r.clone());
        }
    }
    Ok((corpus.subset(train), corpus.subset(test)))
}

/// Shuffles `0..n` and deals it into `n_folds` folds whose sizes differ by
/// at most one (the first `n % n_folds` folds get the extra item). Indices
/// within a fold are ascending.
pub fn partition_indices(n: usize, n_folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if n_folds < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {n_folds}")));
    }
    if n_folds > n {
        return Err(Error::InvalidParameter(format!(
            "{n_folds} folds requested for {n} records"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(seed, "partition"));
    let base = n / n_folds;
    let extra = n % n_folds;
    let mut folds = Vec::with_capacity(n_folds);
    let mut it = idx.into_iter();
    for k in 0..n_folds {
        let size = base + usize::from(k < extra);
        let mut fold: Vec<usize> = it.by_ref().take(size).collect();
        fold.sort_unstable();
        folds.push(fold);
    }
    Ok(folds)
}

pub fn partition(benign: &[AppRecord], n_folds: usize, seed: u64) -> Result<Vec<Vec<AppRecord>>> {
    Ok(partition_indices(benign.len(), n_folds, seed)?
        .into_iter()
        .map(|fold| fold.into_iter().map(|i| benign[i].clone()).collect())
        .collect())
}
