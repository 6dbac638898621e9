//! Single-unit OCR error statistics mined from aligned reference/hypothesis
//! pairs.
//!
//! Entries are ordered by count (descending), then by `(kind, source, target)`
//! with kinds ordered insert < delete < substitute and units in code-point
//! order. Model files are JSON with every non-ASCII character written as a
//! `\u` escape.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textmetrics::{self, NormalizationPolicy, OpKind, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Insert,
    Delete,
    Substitute,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 3] = [ErrorKind::Insert, ErrorKind::Delete, ErrorKind::Substitute];

    fn short(self) -> &'static str {
        match self {
            ErrorKind::Insert => "ins",
            ErrorKind::Delete => "del",
            ErrorKind::Substitute => "sub",
        }
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorKind::Insert => "insert",
            ErrorKind::Delete => "delete",
            ErrorKind::Substitute => "substitute",
        })
    }
}

impl FromStr for ErrorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ins" | "insert" | "insertion" => Ok(ErrorKind::Insert),
            "del" | "delete" | "deletion" => Ok(ErrorKind::Delete),
            "sub" | "substitute" | "substitution" | "replace" => Ok(ErrorKind::Substitute),
            other => Err(Error::InvalidArgument(format!("unknown error kind `{other}`"))),
        }
    }
}

/// A subset of error kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct KindSet {
    pub insert: bool,
    pub delete: bool,
    pub substitute: bool,
}

impl KindSet {
    pub const ALL: KindSet = KindSet {
        insert: true,
        delete: true,
        substitute: true,
    };

    pub fn only(kind: ErrorKind) -> Self {
        let mut k = KindSet::default();
        k.set(kind);
        k
    }

    pub fn set(&mut self, kind: ErrorKind) {
        match kind {
            ErrorKind::Insert => self.insert = true,
            ErrorKind::Delete => self.delete = true,
            ErrorKind::Substitute => self.substitute = true,
        }
    }

    pub fn contains(&self, kind: ErrorKind) -> bool {
        match kind {
            ErrorKind::Insert => self.insert,
            ErrorKind::Delete => self.delete,
            ErrorKind::Substitute => self.substitute,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.insert || self.delete || self.substitute)
    }

    /// Bit mask: insert = 1, delete = 2, substitute = 4.
    pub fn bits(&self) -> u8 {
        u8::from(self.insert) | (u8::from(self.delete) << 1) | (u8::from(self.substitute) << 2)
    }

    pub fn from_bits(bits: u8) -> Self {
        KindSet {
            insert: bits & 1 != 0,
            delete: bits & 2 != 0,
            substitute: bits & 4 != 0,
        }
    }

    /// Short label used in file names: `all`, `sub`, `ins+del`, ...
    pub fn label(&self) -> String {
        if *self == KindSet::ALL {
            return "all".into();
        }
        ErrorKind::ALL
            .iter()
            .filter(|k| self.contains(**k))
            .map(|k| k.short())
            .collect::<Vec<_>>()
            .join("+")
    }
}

impl FromStr for KindSet {
    type Err = Error;

    /// Parses `all` or a `,`/`+` separated list such as `sub,del`.
    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(KindSet::ALL);
        }
        let mut set = KindSet::default();
        for part in s.split([',', '+']).filter(|p| !p.trim().is_empty()) {
            set.set(part.parse()?);
        }
        if set.is_empty() {
            return Err(Error::InvalidArgument("empty kind set".into()));
        }
        Ok(set)
    }
}

impl fmt::Display for KindSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ErrorKey {
    pub kind: ErrorKind,
    pub source: Option<Unit>,
    pub target: Option<Unit>,
}

impl ErrorKey {
    pub fn insert(target: impl Into<Unit>) -> Self {
        ErrorKey {
            kind: ErrorKind::Insert,
            source: None,
            target: Some(target.into()),
        }
    }

    pub fn delete(source: impl Into<Unit>) -> Self {
        ErrorKey {
            kind: ErrorKind::Delete,
            source: Some(source.into()),
            target: None,
        }
    }

    pub fn substitute(source: impl Into<Unit>, target: impl Into<Unit>) -> Self {
        ErrorKey {
            kind: ErrorKind::Substitute,
            source: Some(source.into()),
            target: Some(target.into()),
        }
    }

    fn is_well_formed(&self) -> bool {
        match self.kind {
            ErrorKind::Insert => self.source.is_none() && self.target.is_some(),
            ErrorKind::Delete => self.source.is_some() && self.target.is_none(),
            ErrorKind::Substitute => {
                self.source.is_some() && self.target.is_some() && self.source != self.target
            }
        }
    }
}

impl fmt::Display for ErrorKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |u: &Option<Unit>| u.as_ref().map(|u| format!("{:?}", u.as_str())).unwrap_or_default();
        match self.kind {
            ErrorKind::Insert => write!(f, "insert {}", show(&self.target)),
            ErrorKind::Delete => write!(f, "delete {}", show(&self.source)),
            ErrorKind::Substitute => {
                write!(f, "substitute {} -> {}", show(&self.source), show(&self.target))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEntry {
    pub kind: ErrorKind,
    pub source: Option<Unit>,
    pub target: Option<Unit>,
    pub count: u64,
    pub freq: f64,
}

impl ErrorEntry {
    pub fn key(&self) -> ErrorKey {
        ErrorKey {
            kind: self.kind,
            source: self.source.clone(),
            target: self.target.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub language: String,
    pub total_error_count: u64,
    pub entries: Vec<ErrorEntry>,
}

impl ErrorModel {
    /// Build a model from raw counts; entries are sorted and normalized.
    pub fn from_counts(language: impl Into<String>, counts: impl IntoIterator<Item = (ErrorKey, u64)>) -> Self {
        let mut entries: Vec<ErrorEntry> = counts
            .into_iter()
            .filter(|(_, c)| *c > 0)
            .map(|(k, count)| ErrorEntry {
                kind: k.kind,
                source: k.source,
                target: k.target,
                count,
                freq: 0.0,
            })
            .collect();
        sort_entries(&mut entries);
        let total = entries.iter().map(|e| e.count).sum();
        let mut model = ErrorModel {
            language: language.into(),
            total_error_count: total,
            entries,
        };
        model.renormalize();
        model
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    fn renormalize(&mut self) {
        let kept: u64 = self.entries.iter().map(|e| e.count).sum();
        for e in &mut self.entries {
            e.freq = e.count as f64 / kept as f64;
        }
    }

    /// ASCII-only pretty JSON; deterministic for a given model.
    pub fn to_json(&self) -> Result<String> {
        ascii_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut model: ErrorModel = serde_json::from_str(text)?;
        let mut seen = std::collections::HashSet::new();
        for e in &model.entries {
            let key = e.key();
            if !key.is_well_formed() {
                return Err(Error::Format(format!("malformed error entry: {key}")));
            }
            if !(e.freq.is_finite() && e.freq >= 0.0) {
                return Err(Error::Format(format!("bad frequency for {key}")));
            }
            if !seen.insert(key.clone()) {
                return Err(Error::Format(format!("duplicate error entry: {key}")));
            }
        }
        sort_entries(&mut model.entries);
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn sort_entries(entries: &mut [ErrorEntry]) {
    entries.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then_with(|| (a.kind, &a.source, &a.target).cmp(&(b.kind, &b.source, &b.target)))
    });
}

/// Serialize to pretty JSON and escape every non-ASCII character as `\uXXXX`
/// (surrogate pairs above the BMP). Non-ASCII can only occur inside JSON
/// strings, so the escaped document parses to the same value.
pub fn ascii_json<T: Serialize>(value: &T) -> Result<String> {
    let raw = serde_json::to_string_pretty(value)?;
    let mut out = String::with_capacity(raw.len());
    let mut buf = [0u16; 2];
    for c in raw.chars() {
        if c.is_ascii() {
            out.push(c);
        } else {
            for unit in c.encode_utf16(&mut buf) {
                out.push_str(&format!("\\u{:04x}", unit));
            }
        }
    }
    Ok(out)
}

/// Accumulates error counts from aligned pairs. Counts merge commutatively.
#[derive(Debug, Clone, Default)]
pub struct ErrorMiner {
    policy: NormalizationPolicy,
    counts: HashMap<ErrorKey, u64>,
}

impl ErrorMiner {
    pub fn new(policy: NormalizationPolicy) -> Self {
        ErrorMiner {
            policy,
            counts: HashMap::new(),
        }
    }

    pub fn add_pair(&mut self, reference: &str, hypothesis: &str) -> Result<()> {
        let r = textmetrics::normalize(reference, &self.policy);
        let h = textmetrics::normalize(hypothesis, &self.policy);
        if r.is_empty() {
            return Err(Error::EmptyReference { article_id: None });
        }
        for op in textmetrics::align_units(&r, &h).ops {
            let key = match op.kind {
                OpKind::Match => continue,
                OpKind::Substitute => ErrorKey {
                    kind: ErrorKind::Substitute,
                    source: op.ref_unit,
                    target: op.hyp_unit,
                },
                OpKind::Delete => ErrorKey {
                    kind: ErrorKind::Delete,
                    source: op.ref_unit,
                    target: None,
                },
                OpKind::Insert => ErrorKey {
                    kind: ErrorKind::Insert,
                    source: None,
                    target: op.hyp_unit,
                },
            };
            *self.counts.entry(key).or_insert(0) += 1;
        }
        Ok(())
    }

    pub fn merge(mut self, other: ErrorMiner) -> Self {
        for (k, c) in other.counts {
            *self.counts.entry(k).or_insert(0) += c;
        }
        self
    }

    pub fn finish(self, language: impl Into<String>) -> ErrorModel {
        ErrorModel::from_counts(language, self.counts)
    }
}

/// Mine an error model from `(reference, hypothesis)` pairs.
pub fn mine<S: AsRef<str> + Sync>(
    language: &str,
    pairs: &[(S, S)],
    policy: &NormalizationPolicy,
) -> Result<ErrorModel> {
    let miner = pairs
        .par_iter()
        .enumerate()
        .try_fold(
            || ErrorMiner::new(*policy),
            |mut m, (i, (r, h))| {
                m.add_pair(r.as_ref(), h.as_ref()).map_err(|e| match e {
                    Error::EmptyReference { .. } => Error::EmptyReference {
                        article_id: Some(format!("pair #{i}")),
                    },
                    other => other,
                })?;
                Ok::<_, Error>(m)
            },
        )
        .try_reduce(|| ErrorMiner::new(*policy), |a, b| Ok(a.merge(b)))?;
    Ok(miner.finish(language))
}

/// Keep the first `k` entries and renormalize their frequencies.
pub fn top_k(model: &ErrorModel, k: usize) -> Result<ErrorModel> {
    if k == 0 {
        return Err(Error::InvalidArgument("top-k needs k >= 1".into()));
    }
    let mut out = model.clone();
    out.entries.truncate(k);
    out.renormalize();
    Ok(out)
}

/// Restrict to `kinds` and renormalize.
pub fn filter_kinds(model: &ErrorModel, kinds: &KindSet) -> Result<ErrorModel> {
    if kinds.is_empty() {
        return Err(Error::InvalidArgument("kind set is empty".into()));
    }
    let mut out = model.clone();
    out.entries.retain(|e| kinds.contains(e.kind));
    if out.entries.is_empty() {
        return Err(Error::EmptyModel);
    }
    out.renormalize();
    Ok(out)
}
