//! Unicode-aware edit distance, alignment traces and character error rate.
//!
//! A "character" is one [`Unit`]: by default an NFC code point, optionally an
//! extended grapheme cluster. Reference and hypothesis always go through the
//! same [`NormalizationPolicy`].
//!
//! Alignment uses a full cost/direction matrix when both sides have at most
//! [`FULL_MATRIX_MAX_UNITS`] units and a divide-and-conquer linear-space
//! alignment above that. Both paths return the optimal distance; when several
//! minimal traces exist the full-matrix backtrace prefers
//! match > substitute > delete > insert at every step.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;
use unicode_segmentation::UnicodeSegmentation;

use crate::error::{Error, Result};

/// Inputs longer than this on either side use the linear-space alignment.
pub const FULL_MATRIX_MAX_UNITS: usize = 4096;

// Sub-problems at or below this many cells are finished with the full matrix.
const LINEAR_BASE_CELLS: usize = 1 << 16;

/// One text unit: a code point or a grapheme cluster.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Unit(String);

impl Unit {
    pub fn new(s: impl Into<String>) -> Self {
        Unit(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_whitespace(&self) -> bool {
        !self.0.is_empty() && self.0.chars().all(char::is_whitespace)
    }
}

impl From<char> for Unit {
    fn from(c: char) -> Self {
        Unit(c.to_string())
    }
}

impl From<&str> for Unit {
    fn from(s: &str) -> Self {
        Unit(s.to_string())
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Concatenate units back into a string.
pub fn units_to_string(units: &[Unit]) -> String {
    units.iter().map(Unit::as_str).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnicodeForm {
    #[default]
    Nfc,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    #[default]
    CodePoint,
    GraphemeCluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Whitespace {
    #[default]
    Preserve,
    /// Every maximal run of whitespace becomes a single U+0020.
    CollapseRuns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NormalizationPolicy {
    pub unicode_form: UnicodeForm,
    pub unit: UnitKind,
    pub whitespace: Whitespace,
}

/// Split `text` into units under `policy`.
pub fn normalize(text: &str, policy: &NormalizationPolicy) -> Vec<Unit> {
    let composed: String = match policy.unicode_form {
        UnicodeForm::Nfc => text.nfc().collect(),
        UnicodeForm::None => text.to_string(),
    };
    let spaced = match policy.whitespace {
        Whitespace::Preserve => composed,
        Whitespace::CollapseRuns => {
            let mut out = String::with_capacity(composed.len());
            let mut in_run = false;
            for c in composed.chars() {
                if c.is_whitespace() {
                    if !in_run {
                        out.push(' ');
                    }
                    in_run = true;
                } else {
                    out.push(c);
                    in_run = false;
                }
            }
            out
        }
    };
    match policy.unit {
        UnitKind::CodePoint => spaced.chars().map(Unit::from).collect(),
        UnitKind::GraphemeCluster => spaced.graphemes(true).map(Unit::from).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Match,
    Substitute,
    Insert,
    Delete,
}

/// One step of an alignment trace.
///
/// `ref_index` is the position in the reference of the consumed unit, or for
/// an insertion the gap (number of reference units consumed so far).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditOp<T = Unit> {
    pub kind: OpKind,
    pub ref_unit: Option<T>,
    pub hyp_unit: Option<T>,
    pub ref_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment<T = Unit> {
    pub ops: Vec<EditOp<T>>,
    pub distance: usize,
}

impl<T: Clone> Alignment<T> {
    /// Rebuild the hypothesis by replaying the trace.
    pub fn hypothesis(&self) -> Vec<T> {
        self.ops.iter().filter_map(|op| op.hyp_unit.clone()).collect()
    }

    /// Rebuild the reference from the trace.
    pub fn reference(&self) -> Vec<T> {
        self.ops.iter().filter_map(|op| op.ref_unit.clone()).collect()
    }

    pub fn counts(&self) -> OpCounts {
        let mut counts = OpCounts::default();
        for op in &self.ops {
            counts.add(op.kind);
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OpCounts {
    pub matches: usize,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
}

impl OpCounts {
    fn add(&mut self, kind: OpKind) {
        match kind {
            OpKind::Match => self.matches += 1,
            OpKind::Substitute => self.substitutions += 1,
            OpKind::Insert => self.insertions += 1,
            OpKind::Delete => self.deletions += 1,
        }
    }

    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }
}

/// Levenshtein distance with unit costs, O(min(n, m)) memory.
pub fn edit_distance<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> usize {
    let (long, short) = if reference.len() >= hypothesis.len() {
        (reference, hypothesis)
    } else {
        (hypothesis, reference)
    };
    if short.is_empty() {
        return long.len();
    }
    let mut prev: Vec<usize> = (0..=short.len()).collect();
    let mut cur = vec![0usize; short.len() + 1];
    for (i, a) in long.iter().enumerate() {
        cur[0] = i + 1;
        for (j, b) in short.iter().enumerate() {
            let diag = prev[j] + usize::from(a != b);
            cur[j + 1] = diag.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[short.len()]
}

/// Align with the strategy chosen by input size.
pub fn align<T: PartialEq + Clone>(reference: &[T], hypothesis: &[T]) -> Alignment<T> {
    if reference.len().max(hypothesis.len()) <= FULL_MATRIX_MAX_UNITS {
        align_full(reference, hypothesis)
    } else {
        align_linear(reference, hypothesis)
    }
}

/// Full O(n·m) matrix alignment with the deterministic tie-break.
pub fn align_full<T: PartialEq + Clone>(reference: &[T], hypothesis: &[T]) -> Alignment<T> {
    let mut kinds = Vec::with_capacity(reference.len().max(hypothesis.len()));
    full_matrix_ops(reference, hypothesis, &mut kinds);
    materialize(reference, hypothesis, &kinds)
}

/// Divide-and-conquer alignment in linear space.
pub fn align_linear<T: PartialEq + Clone>(reference: &[T], hypothesis: &[T]) -> Alignment<T> {
    let mut kinds = Vec::with_capacity(reference.len().max(hypothesis.len()));
    linear_ops(reference, hypothesis, &mut kinds);
    materialize(reference, hypothesis, &kinds)
}

fn materialize<T: Clone>(reference: &[T], hypothesis: &[T], kinds: &[OpKind]) -> Alignment<T> {
    let (mut i, mut j) = (0usize, 0usize);
    let mut distance = 0;
    let ops = kinds
        .iter()
        .map(|&kind| {
            let op = match kind {
                OpKind::Match | OpKind::Substitute => {
                    let op = EditOp {
                        kind,
                        ref_unit: Some(reference[i].clone()),
                        hyp_unit: Some(hypothesis[j].clone()),
                        ref_index: i,
                    };
                    i += 1;
                    j += 1;
                    op
                }
                OpKind::Delete => {
                    let op = EditOp {
                        kind,
                        ref_unit: Some(reference[i].clone()),
                        hyp_unit: None,
                        ref_index: i,
                    };
                    i += 1;
                    op
                }
                OpKind::Insert => {
                    let op = EditOp {
                        kind,
                        ref_unit: None,
                        hyp_unit: Some(hypothesis[j].clone()),
                        ref_index: i,
                    };
                    j += 1;
                    op
                }
            };
            if kind != OpKind::Match {
                distance += 1;
            }
            op
        })
        .collect();
    debug_assert_eq!((i, j), (reference.len(), hypothesis.len()));
    Alignment { ops, distance }
}

const DIR_MATCH: u8 = 0;
const DIR_SUB: u8 = 1;
const DIR_DEL: u8 = 2;
const DIR_INS: u8 = 3;

fn full_matrix_ops<T: PartialEq>(a: &[T], b: &[T], out: &mut Vec<OpKind>) {
    let (n, m) = (a.len(), b.len());
    let width = m + 1;
    let mut dirs = vec![DIR_INS; (n + 1) * width];
    let mut prev: Vec<usize> = (0..=m).collect();
    let mut cur = vec![0usize; width];
    for i in 1..=n {
        cur[0] = i;
        dirs[i * width] = DIR_DEL;
        for j in 1..=m {
            let same = a[i - 1] == b[j - 1];
            let diag = prev[j - 1] + usize::from(!same);
            let up = prev[j] + 1;
            let left = cur[j - 1] + 1;
            let best = diag.min(up).min(left);
            cur[j] = best;
            dirs[i * width + j] = if diag == best {
                if same {
                    DIR_MATCH
                } else {
                    DIR_SUB
                }
            } else if up == best {
                DIR_DEL
            } else {
                DIR_INS
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let start = out.len();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        match dirs[i * width + j] {
            DIR_MATCH => {
                out.push(OpKind::Match);
                i -= 1;
                j -= 1;
            }
            DIR_SUB => {
                out.push(OpKind::Substitute);
                i -= 1;
                j -= 1;
            }
            DIR_DEL => {
                out.push(OpKind::Delete);
                i -= 1;
            }
            _ => {
                out.push(OpKind::Insert);
                j -= 1;
            }
        }
    }
    out[start..].reverse();
}

// Last row of the DP table for `a` against every prefix of `b`.
fn forward_row<T: PartialEq>(a: &[T], b: &[T]) -> Vec<usize> {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(x != y))
                .min(prev[j + 1] + 1)
                .min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev
}

// costs[j] = distance(a, b[j..]).
fn reverse_row<T: PartialEq>(a: &[T], b: &[T]) -> Vec<usize> {
    let m = b.len();
    let mut prev: Vec<usize> = (0..=m).map(|j| m - j).collect();
    let mut cur = vec![0usize; m + 1];
    for (k, x) in a.iter().rev().enumerate() {
        cur[m] = k + 1;
        for j in (0..m).rev() {
            cur[j] = (prev[j + 1] + usize::from(*x != b[j]))
                .min(prev[j] + 1)
                .min(cur[j + 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev
}

fn linear_ops<T: PartialEq>(a: &[T], b: &[T], out: &mut Vec<OpKind>) {
    if a.is_empty() {
        out.extend(std::iter::repeat_n(OpKind::Insert, b.len()));
        return;
    }
    if b.is_empty() {
        out.extend(std::iter::repeat_n(OpKind::Delete, a.len()));
        return;
    }
    if a.len() == 1 || (a.len() + 1) * (b.len() + 1) <= LINEAR_BASE_CELLS {
        full_matrix_ops(a, b, out);
        return;
    }
    let mid = a.len() / 2;
    let fwd = forward_row(&a[..mid], b);
    let rev = reverse_row(&a[mid..], b);
    // Ties go to the largest split so insertions land as early as the
    // full-matrix backtrace would place them.
    let mut split = 0;
    let mut best = usize::MAX;
    for j in 0..=b.len() {
        let cost = fwd[j] + rev[j];
        if cost <= best {
            best = cost;
            split = j;
        }
    }
    linear_ops(&a[..mid], &b[..split], out);
    linear_ops(&a[mid..], &b[split..], out);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CerReport {
    pub distance: usize,
    pub ref_len: usize,
    pub hyp_len: usize,
    /// Percent; may exceed 100 under heavy insertion.
    pub cer: f64,
    pub counts: OpCounts,
}

// Map units to dense ids so the DP compares integers.
fn intern<'a>(reference: &'a [Unit], hypothesis: &'a [Unit]) -> (Vec<u32>, Vec<u32>) {
    let mut ids: HashMap<&'a Unit, u32> = HashMap::new();
    let mut id_of = |u: &'a Unit| -> u32 {
        let next = ids.len() as u32;
        *ids.entry(u).or_insert(next)
    };
    let r = reference.iter().map(&mut id_of).collect();
    let h = hypothesis.iter().map(&mut id_of).collect();
    (r, h)
}

/// Align two unit sequences, comparing interned ids internally.
pub fn align_units(reference: &[Unit], hypothesis: &[Unit]) -> Alignment<Unit> {
    let (r, h) = intern(reference, hypothesis);
    let mut kinds = Vec::with_capacity(r.len().max(h.len()));
    if r.len().max(h.len()) <= FULL_MATRIX_MAX_UNITS {
        full_matrix_ops(&r, &h, &mut kinds);
    } else {
        linear_ops(&r, &h, &mut kinds);
    }
    materialize(reference, hypothesis, &kinds)
}

/// Character error rate of `hypothesis` against `reference`, in percent.
pub fn cer(reference: &str, hypothesis: &str, policy: &NormalizationPolicy) -> Result<CerReport> {
    let r = normalize(reference, policy);
    let h = normalize(hypothesis, policy);
    cer_units(&r, &h)
}

pub fn cer_units(reference: &[Unit], hypothesis: &[Unit]) -> Result<CerReport> {
    if reference.is_empty() {
        return Err(Error::EmptyReference { article_id: None });
    }
    let alignment = align_units(reference, hypothesis);
    Ok(CerReport {
        distance: alignment.distance,
        ref_len: reference.len(),
        hyp_len: hypothesis.len(),
        cer: 100.0 * alignment.distance as f64 / reference.len() as f64,
        counts: alignment.counts(),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct TextPair<'a> {
    pub id: &'a str,
    pub reference: &'a str,
    pub hypothesis: &'a str,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleCer {
    pub id: String,
    pub report: CerReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusCer {
    /// 100 × Σ distance / Σ ref_len.
    pub micro_cer: f64,
    /// Mean of per-article CER.
    pub macro_cer: f64,
    pub total_distance: usize,
    pub total_ref_len: usize,
    pub per_article: Vec<ArticleCer>,
}

/// Corpus-level CER, computed in parallel; output keeps input order.
pub fn corpus_cer(pairs: &[TextPair<'_>], policy: &NormalizationPolicy) -> Result<CorpusCer> {
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let results: Vec<Result<ArticleCer>> = pairs
        .par_iter()
        .map(|p| {
            cer(p.reference, p.hypothesis, policy)
                .map(|report| ArticleCer {
                    id: p.id.to_string(),
                    report,
                })
                .map_err(|e| match e {
                    Error::EmptyReference { .. } => Error::EmptyReference {
                        article_id: Some(p.id.to_string()),
                    },
                    other => other,
                })
        })
        .collect();
    let per_article = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(summarize_articles(per_article))
}

pub(crate) fn summarize_articles(per_article: Vec<ArticleCer>) -> CorpusCer {
    let total_distance: usize = per_article.iter().map(|a| a.report.distance).sum();
    let total_ref_len: usize = per_article.iter().map(|a| a.report.ref_len).sum();
    let macro_cer =
        per_article.iter().map(|a| a.report.cer).sum::<f64>() / per_article.len() as f64;
    CorpusCer {
        micro_cer: 100.0 * total_distance as f64 / total_ref_len as f64,
        macro_cer,
        total_distance,
        total_ref_len,
        per_article,
    }
}
