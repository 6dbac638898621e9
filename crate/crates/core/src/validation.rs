//! Annotation QA: flag articles whose CER lies more than k population
//! standard deviations from their group mean.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Manifest;
use crate::error::{Error, Result};
use crate::textmetrics::{self, NormalizationPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    #[default]
    TwoSided,
    HighOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    #[default]
    PerLanguage,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub sigma_multiplier: f64,
    pub side: Side,
    pub grouping: Grouping,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            sigma_multiplier: 2.0,
            side: Side::TwoSided,
            grouping: Grouping::PerLanguage,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CerRecord {
    pub article_id: String,
    pub language: String,
    pub cer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyFlag {
    pub article_id: String,
    pub language: String,
    pub cer: f64,
    pub mean: f64,
    pub stddev: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, Copy)]
struct GroupStats {
    mean: f64,
    stddev: f64,
}

fn population_stats(values: &[f64]) -> GroupStats {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    GroupStats {
        mean,
        stddev: var.sqrt(),
    }
}

/// One flag record per input, in input order.
pub fn flag_anomalies(records: &[CerRecord], config: &ValidationConfig) -> Result<Vec<AnomalyFlag>> {
    if config.sigma_multiplier.is_nan() || config.sigma_multiplier <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "sigma multiplier must be > 0, got {}",
            config.sigma_multiplier
        )));
    }
    if let Some(r) = records.iter().find(|r| !r.cer.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "article `{}` has non-finite CER",
            r.article_id
        )));
    }
    let key = |r: &CerRecord| -> String {
        match config.grouping {
            Grouping::PerLanguage => r.language.clone(),
            Grouping::Global => "*".to_string(),
        }
    };
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in records {
        groups.entry(key(r)).or_default().push(r.cer);
    }
    let stats: BTreeMap<String, GroupStats> = groups
        .into_par_iter()
        .map(|(g, values)| {
            if values.len() < 2 {
                Err(Error::GroupTooSmall {
                    group: g,
                    size: values.len(),
                })
            } else {
                Ok((g, population_stats(&values)))
            }
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_>>()?;

    Ok(records
        .iter()
        .map(|r| {
            let s = stats[&key(r)];
            let deviation = r.cer - s.mean;
            let threshold = config.sigma_multiplier * s.stddev;
            let flagged = match config.side {
                Side::TwoSided => deviation.abs() > threshold,
                Side::HighOnly => deviation > threshold,
            };
            AnomalyFlag {
                article_id: r.article_id.clone(),
                language: r.language.clone(),
                cer: r.cer,
                mean: s.mean,
                stddev: s.stddev,
                flagged,
            }
        })
        .collect())
}

/// Per-article CER for every manifest entry; all entries need a hypothesis.
pub fn article_cers(manifest: &Manifest, policy: &NormalizationPolicy) -> Result<Vec<CerRecord>> {
    manifest
        .entries
        .par_iter()
        .map(|e| {
            let hyp = e
                .hypothesis_text
                .as_deref()
                .ok_or_else(|| Error::MissingHypothesis(e.article_id.clone()))?;
            let report = textmetrics::cer(&e.reference_text, hyp, policy).map_err(|err| match err {
                Error::EmptyReference { .. } => Error::EmptyReference {
                    article_id: Some(e.article_id.clone()),
                },
                other => other,
            })?;
            Ok(CerRecord {
                article_id: e.article_id.clone(),
                language: e.language.clone(),
                cer: report.cer,
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Drives repeated validation rounds. Re-annotation happens outside; each
/// round is run against the updated manifest until no article is flagged.
#[derive(Debug, Clone)]
pub struct RevalidationLoop {
    config: ValidationConfig,
    policy: NormalizationPolicy,
    rounds: Vec<Vec<AnomalyFlag>>,
}

impl RevalidationLoop {
    pub fn new(config: ValidationConfig, policy: NormalizationPolicy) -> Self {
        RevalidationLoop {
            config,
            policy,
            rounds: Vec::new(),
        }
    }

    /// Run one round and return the flagged articles.
    pub fn run_round(&mut self, manifest: &Manifest) -> Result<&[AnomalyFlag]> {
        let records = article_cers(manifest, &self.policy)?;
        let flagged = flag_anomalies(&records, &self.config)?
            .into_iter()
            .filter(|f| f.flagged)
            .collect();
        self.rounds.push(flagged);
        Ok(self.rounds.last().map(Vec::as_slice).unwrap_or_default())
    }

    pub fn rounds(&self) -> &[Vec<AnomalyFlag>] {
        &self.rounds
    }

    pub fn is_converged(&self) -> bool {
        matches!(self.rounds.last(), Some(r) if r.is_empty())
    }
}

/// CSV columns: article_id, language, cer, mean, stddev, flagged.
pub fn write_flags_csv<W: Write>(flags: &[AnomalyFlag], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["article_id", "language", "cer", "mean", "stddev", "flagged"])?;
    for f in flags {
        w.write_record([
            f.article_id.clone(),
            f.language.clone(),
            format!("{:.4}", f.cer),
            format!("{:.4}", f.mean),
            format!("{:.4}", f.stddev),
            f.flagged.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
