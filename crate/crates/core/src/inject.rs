//! Apply an error model to clean text at a target CER, and generate
//! rate × error-kind sweep datasets.
//!
//! Edits are planned against unit positions of the original (normalized)
//! text: each unit receives at most one delete/substitute, and each of the
//! N + 1 gaps at most one insertion. The number of edits is
//! `round(target / 100 × N)`. The achieved CER is measured afterwards, since
//! neighbouring edits can admit a cheaper alignment than the plan.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::errormodel::{self, ascii_json, ErrorKind, ErrorModel, KindSet};
use crate::textmetrics::{self, NormalizationPolicy, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectionConfig {
    /// Percent, 0..=100.
    pub target_cer: f64,
    pub kinds: KindSet,
    pub seed: u64,
    /// Allowed |achieved − target| before the warning flag is raised.
    pub tolerance: f64,
    pub policy: NormalizationPolicy,
}

impl Default for InjectionConfig {
    fn default() -> Self {
        InjectionConfig {
            target_cer: 0.0,
            kinds: KindSet::ALL,
            seed: 0,
            tolerance: 0.5,
            policy: NormalizationPolicy::default(),
        }
    }
}

impl InjectionConfig {
    fn validate(&self) -> Result<()> {
        if !(self.target_cer.is_finite() && (0.0..=100.0).contains(&self.target_cer)) {
            return Err(Error::InvalidArgument(format!(
                "target CER must be within [0, 100], got {}",
                self.target_cer
            )));
        }
        if self.tolerance.is_nan() || self.tolerance < 0.0 {
            return Err(Error::InvalidArgument("tolerance must be >= 0".into()));
        }
        if self.kinds.is_empty() {
            return Err(Error::InvalidArgument("kind set is empty".into()));
        }
        Ok(())
    }
}

/// One planned edit. For insertions `position` is a gap index in `0..=N`
/// (gap `p` sits before unit `p`); otherwise it is a unit index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedEdit {
    pub position: usize,
    pub kind: ErrorKind,
    pub source: Option<Unit>,
    pub target: Option<Unit>,
}

impl PlannedEdit {
    // Gap p orders before unit p.
    fn slot(&self) -> (usize, u8) {
        (self.position, u8::from(self.kind != ErrorKind::Insert))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditPlan {
    pub policy: NormalizationPolicy,
    /// N, the unit count of the normalized original.
    pub unit_count: usize,
    /// Sorted by position, insertion before unit edit at the same index.
    pub edits: Vec<PlannedEdit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionResult {
    pub noisy_text: String,
    pub target_cer: f64,
    pub achieved_cer: f64,
    pub distance: usize,
    pub ref_len: usize,
    pub plan: EditPlan,
    pub seed: u64,
    /// Set when |achieved − target| exceeds the configured tolerance.
    pub warning: bool,
}

/// Number of edits for a target CER over `n` units.
pub fn edit_count(target_cer: f64, n: usize) -> usize {
    (target_cer / 100.0 * n as f64).round() as usize
}

pub fn plan_edits(text: &str, model: &ErrorModel, config: &InjectionConfig) -> Result<EditPlan> {
    let units = textmetrics::normalize(text, &config.policy);
    plan_units(&units, model, config)
}

/// Sample an edit plan over already-normalized units.
///
/// Each draw picks an entry with probability proportional to its frequency.
/// Deletes and substitutions take a uniformly random unused occurrence of
/// their source unit; insertions take a uniformly random unused gap. An entry
/// whose sites are exhausted is dropped from the distribution and the draw is
/// repeated.
pub fn plan_units(units: &[Unit], model: &ErrorModel, config: &InjectionConfig) -> Result<EditPlan> {
    config.validate()?;
    if units.is_empty() {
        return Err(Error::EmptyReference { article_id: None });
    }
    let model = errormodel::filter_kinds(model, &config.kinds)?;
    let entries: Vec<_> = model.entries.iter().filter(|e| e.freq > 0.0).collect();
    if entries.is_empty() {
        return Err(Error::EmptyModel);
    }
    let n = units.len();
    let requested = edit_count(config.target_cer, n);
    let mut plan = EditPlan {
        policy: config.policy,
        unit_count: n,
        edits: Vec::with_capacity(requested),
    };
    if requested == 0 {
        return Ok(plan);
    }

    // Site pools: occurrences per source unit, shared by deletes and
    // substitutions of that unit, plus one pool of gaps.
    let mut pools: HashMap<&Unit, Vec<usize>> = HashMap::new();
    for e in &entries {
        if let Some(src) = &e.source {
            pools.entry(src).or_default();
        }
    }
    for (i, u) in units.iter().enumerate() {
        if let Some(p) = pools.get_mut(u) {
            p.push(i);
        }
    }
    let has_insert = entries.iter().any(|e| e.kind == ErrorKind::Insert);
    let mut gaps: Vec<usize> = if has_insert { (0..=n).collect() } else { Vec::new() };

    let max_achievable = pools.values().map(Vec::len).sum::<usize>() + gaps.len();
    if max_achievable < requested {
        return Err(Error::Unreachable {
            requested,
            max_achievable,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut weights: Vec<f64> = entries.iter().map(|e| e.freq).collect();
    while plan.edits.len() < requested {
        let total: f64 = weights.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::Unreachable {
                requested,
                max_achievable: plan.edits.len(),
            });
        }
        let mut u = rng.gen::<f64>() * total;
        let mut pick = weights.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if *w > 0.0 && u < *w {
                pick = i;
                break;
            }
            u -= w;
        }
        // Guard the float tail: fall back to the last live entry.
        if weights[pick] == 0.0 {
            pick = weights.iter().rposition(|w| *w > 0.0).unwrap_or(pick);
        }
        let entry = entries[pick];
        let pool = match &entry.source {
            Some(src) => pools.get_mut(src).expect("pool exists for every source"),
            None => &mut gaps,
        };
        if pool.is_empty() {
            weights[pick] = 0.0;
            continue;
        }
        let idx = rng.gen_range(0..pool.len());
        let position = pool.swap_remove(idx);
        plan.edits.push(PlannedEdit {
            position,
            kind: entry.kind,
            source: entry.source.clone(),
            target: entry.target.clone(),
        });
    }
    plan.edits.sort_by_key(PlannedEdit::slot);
    Ok(plan)
}

/// Apply a plan to the text it was built for.
///
/// Edits are addressed by original indices, so the result does not depend on
/// application order. An empty plan returns the text untouched.
pub fn apply_plan(text: &str, plan: &EditPlan) -> Result<String> {
    if plan.edits.is_empty() {
        return Ok(text.to_string());
    }
    let units = textmetrics::normalize(text, &plan.policy);
    apply_plan_units(&units, plan)
}

pub fn apply_plan_units(units: &[Unit], plan: &EditPlan) -> Result<String> {
    let n = units.len();
    if plan.unit_count != n {
        return Err(Error::PlanMismatch(format!(
            "plan built for {} units, text has {n}",
            plan.unit_count
        )));
    }
    let mut inserts: Vec<Option<&Unit>> = vec![None; n + 1];
    let mut edits: Vec<Option<&PlannedEdit>> = vec![None; n];
    for e in &plan.edits {
        match e.kind {
            ErrorKind::Insert => {
                let target = e
                    .target
                    .as_ref()
                    .ok_or_else(|| Error::PlanMismatch("insertion without target".into()))?;
                let slot = inserts
                    .get_mut(e.position)
                    .ok_or_else(|| Error::PlanMismatch(format!("gap {} out of range", e.position)))?;
                if slot.replace(target).is_some() {
                    return Err(Error::PlanMismatch(format!("two insertions at gap {}", e.position)));
                }
            }
            ErrorKind::Delete | ErrorKind::Substitute => {
                if e.position >= n {
                    return Err(Error::PlanMismatch(format!("position {} out of range", e.position)));
                }
                if e.source.as_ref() != Some(&units[e.position]) {
                    return Err(Error::PlanMismatch(format!(
                        "position {} holds {:?}, plan expects {:?}",
                        e.position,
                        units[e.position].as_str(),
                        e.source.as_ref().map(Unit::as_str)
                    )));
                }
                if e.kind == ErrorKind::Substitute && e.target.is_none() {
                    return Err(Error::PlanMismatch("substitution without target".into()));
                }
                if edits[e.position].replace(e).is_some() {
                    return Err(Error::PlanMismatch(format!("two edits at position {}", e.position)));
                }
            }
        }
    }
    let mut out = String::new();
    for i in 0..=n {
        if let Some(t) = inserts[i] {
            out.push_str(t.as_str());
        }
        if i == n {
            break;
        }
        match edits[i] {
            None => out.push_str(units[i].as_str()),
            Some(e) if e.kind == ErrorKind::Substitute => {
                out.push_str(e.target.as_ref().map(Unit::as_str).unwrap_or_default())
            }
            Some(_) => {}
        }
    }
    Ok(out)
}

/// Plan, apply and measure.
pub fn inject(text: &str, model: &ErrorModel, config: &InjectionConfig) -> Result<InjectionResult> {
    let units = textmetrics::normalize(text, &config.policy);
    let plan = plan_units(&units, model, config)?;
    let noisy_text = if plan.edits.is_empty() {
        text.to_string()
    } else {
        apply_plan_units(&units, &plan)?
    };
    let report = textmetrics::cer(text, &noisy_text, &config.policy)?;
    Ok(InjectionResult {
        warning: (report.cer - config.target_cer).abs() > config.tolerance,
        noisy_text,
        target_cer: config.target_cer,
        achieved_cer: report.cer,
        distance: report.distance,
        ref_len: report.ref_len,
        plan,
        seed: config.seed,
    })
}

/// Per-text seed: `seed ⊕ h(rate, kinds, index)` with `h` the first eight
/// bytes of a SHA-256 digest.
pub fn derive_seed(seed: u64, rate: f64, kinds: KindSet, index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(rate.to_bits().to_le_bytes());
    h.update([kinds.bits()]);
    h.update((index as u64).to_le_bytes());
    let digest = h.finalize();
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    seed ^ u64::from_le_bytes(first)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextOutcome {
    pub index: usize,
    pub seed: u64,
    pub ref_len: usize,
    pub edits: usize,
    pub distance: Option<usize>,
    pub achieved_cer: Option<f64>,
    pub warning: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusInjection {
    pub target_cer: f64,
    pub kinds: String,
    /// Texts are noised one by one; the rate is enforced per text.
    pub rate_enforcement: String,
    /// 100 × Σ distance / Σ ref_len over texts that were noised.
    pub corpus_micro_cer: Option<f64>,
    pub texts: Vec<TextOutcome>,
    #[serde(skip)]
    pub noisy: Vec<String>,
}

/// Inject into every text of a corpus with per-text derived seeds.
///
/// Texts that cannot be noised (empty, or too few eligible sites) are kept
/// unchanged and the failure is recorded in their outcome.
pub fn inject_corpus(
    corpus: &[String],
    model: &ErrorModel,
    config: &InjectionConfig,
) -> Result<CorpusInjection> {
    config.validate()?;
    errormodel::filter_kinds(model, &config.kinds)?;
    let results: Vec<(String, TextOutcome)> = corpus
        .par_iter()
        .enumerate()
        .map(|(index, text)| {
            let seed = derive_seed(config.seed, config.target_cer, config.kinds, index);
            let cfg = InjectionConfig { seed, ..*config };
            match inject(text, model, &cfg) {
                Ok(r) => {
                    let outcome = TextOutcome {
                        index,
                        seed,
                        ref_len: r.ref_len,
                        edits: r.plan.edits.len(),
                        distance: Some(r.distance),
                        achieved_cer: Some(r.achieved_cer),
                        warning: r.warning,
                        error: None,
                    };
                    (r.noisy_text, outcome)
                }
                Err(e) => {
                    let outcome = TextOutcome {
                        index,
                        seed,
                        ref_len: textmetrics::normalize(text, &config.policy).len(),
                        edits: 0,
                        distance: None,
                        achieved_cer: None,
                        warning: true,
                        error: Some(e.to_string()),
                    };
                    (text.clone(), outcome)
                }
            }
        })
        .collect();
    let (noisy, texts): (Vec<String>, Vec<TextOutcome>) = results.into_iter().unzip();
    let (dist, len) = texts
        .iter()
        .filter_map(|t| t.distance.map(|d| (d, t.ref_len)))
        .fold((0usize, 0usize), |(a, b), (d, l)| (a + d, b + l));
    Ok(CorpusInjection {
        target_cer: config.target_cer,
        kinds: config.kinds.label(),
        rate_enforcement: "per-text".into(),
        corpus_micro_cer: (len > 0).then(|| 100.0 * dist as f64 / len as f64),
        texts,
        noisy,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub rates: Vec<f64>,
    pub kind_sets: Vec<KindSet>,
    pub seed: u64,
    pub tolerance: f64,
    pub policy: NormalizationPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub rate: f64,
    pub kinds: String,
    /// Noisy corpus, one text per line, aligned with `clean`.
    pub noisy: String,
    pub clean: String,
    pub metrics: String,
    pub corpus_micro_cer: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepIndex {
    pub seed: u64,
    pub texts: usize,
    pub outputs: Vec<SweepEntry>,
}

pub const CLEAN_FILE: &str = "clean.txt";
pub const INDEX_FILE: &str = "sweep.json";

/// `2` → `02`, `12.5` → `12.5`.
pub fn format_rate(rate: f64) -> String {
    if rate.fract() == 0.0 {
        format!("{:02}", rate as u64)
    } else {
        format!("{rate}")
    }
}

/// Base name (without extension) of the output for one sweep cell.
pub fn sweep_stem(rate: f64, kinds: KindSet) -> String {
    format!("rate-{}_{}", format_rate(rate), kinds.label())
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn lines_file(texts: &[String]) -> String {
    let mut out = String::new();
    for t in texts {
        out.push_str(t);
        out.push('\n');
    }
    out
}

/// Write one noisy corpus and one metrics sidecar per (rate, kind set), plus
/// the clean corpus and an index pairing each noisy file with it.
pub fn sweep(corpus: &[String], model: &ErrorModel, spec: &SweepSpec, out_dir: &Path) -> Result<SweepIndex> {
    if let Some(t) = corpus.iter().find(|t| t.contains(['\n', '\r'])) {
        return Err(Error::InvalidArgument(format!(
            "corpus texts must be single lines: {:?}",
            t.chars().take(40).collect::<String>()
        )));
    }
    if model
        .entries
        .iter()
        .any(|e| e.target.as_ref().is_some_and(|t| t.as_str().contains(['\n', '\r'])))
    {
        return Err(Error::InvalidArgument(
            "model inserts line breaks; line-based export would lose alignment".into(),
        ));
    }
    if spec.kind_sets.is_empty() || spec.rates.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one rate and one kind set".into()));
    }
    for &rate in &spec.rates {
        if !(rate.is_finite() && (0.0..=100.0).contains(&rate)) {
            return Err(Error::InvalidArgument(format!("rate {rate} outside [0, 100]")));
        }
    }
    for kinds in &spec.kind_sets {
        errormodel::filter_kinds(model, kinds)?;
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_file(&out_dir.join(CLEAN_FILE), &lines_file(corpus))?;

    let mut outputs = Vec::new();
    for &rate in &spec.rates {
        for &kinds in &spec.kind_sets {
            let cfg = InjectionConfig {
                target_cer: rate,
                kinds,
                seed: spec.seed,
                tolerance: spec.tolerance,
                policy: spec.policy,
            };
            let run = inject_corpus(corpus, model, &cfg)?;
            let stem = sweep_stem(rate, kinds);
            let noisy: PathBuf = format!("{stem}.txt").into();
            let metrics: PathBuf = format!("{stem}.metrics.json").into();
            write_file(&out_dir.join(&noisy), &lines_file(&run.noisy))?;
            write_file(&out_dir.join(&metrics), &(ascii_json(&run)? + "\n"))?;
            outputs.push(SweepEntry {
                rate,
                kinds: kinds.label(),
                noisy: noisy.to_string_lossy().into_owned(),
                clean: CLEAN_FILE.into(),
                metrics: metrics.to_string_lossy().into_owned(),
                corpus_micro_cer: run.corpus_micro_cer,
            });
        }
    }
    let index = SweepIndex {
        seed: spec.seed,
        texts: corpus.len(),
        outputs,
    };
    write_file(&out_dir.join(INDEX_FILE), &(ascii_json(&index)? + "\n"))?;
    Ok(index)
}
