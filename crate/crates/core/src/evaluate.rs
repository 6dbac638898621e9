//! Run an engine over a manifest and score it per language.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ArticlePair, Manifest};
use crate::engines::{OcrEngine, OcrResult, RecognizeRequest};
use crate::error::{Error, Result};
use crate::report::LanguageReport;
use crate::textmetrics::{self, NormalizationPolicy, TextPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvaluationConfig {
    /// Maximum in-flight recognitions.
    pub parallelism: usize,
    pub policy: NormalizationPolicy,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            parallelism: 1,
            policy: NormalizationPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleScore {
    pub language: String,
    pub article_id: String,
    pub cer: f64,
    pub distance: usize,
    pub ref_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// In manifest order.
    pub results: Vec<OcrResult>,
    pub articles: Vec<ArticleScore>,
    /// One per language, micro-averaged, sorted by language.
    pub reports: Vec<LanguageReport>,
}

impl Evaluation {
    /// The input manifest with hypotheses filled in from the engine.
    pub fn hypothesis_manifest(&self, manifest: &Manifest) -> Result<Manifest> {
        let entries = manifest
            .entries
            .iter()
            .zip(&self.results)
            .map(|(e, r)| ArticlePair {
                hypothesis_text: Some(r.hypothesis_text.clone()),
                ..e.clone()
            })
            .collect();
        Manifest::new(manifest.dataset_label.clone(), entries)
    }
}

fn recognize_one(engine: &dyn OcrEngine, entry: &ArticlePair) -> Result<OcrResult> {
    let image = entry.image_ref.as_deref().ok_or_else(|| {
        Error::InvalidArgument(format!("article `{}` has no image", entry.article_id))
    })?;
    Ok(engine.recognize(&RecognizeRequest {
        image,
        language: &entry.language,
        article_id: &entry.article_id,
    })?)
}

/// Recognize every manifest image on a pool of `parallelism` threads, then
/// compute per-language micro CER.
pub fn evaluate(manifest: &Manifest, engine: &dyn OcrEngine, config: &EvaluationConfig) -> Result<Evaluation> {
    if manifest.entries.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if config.parallelism == 0 {
        return Err(Error::InvalidArgument("parallelism must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let results: Vec<OcrResult> = pool.install(|| {
        manifest
            .entries
            .par_iter()
            .map(|e| recognize_one(engine, e))
            .collect::<Vec<_>>()
            .into_iter()
            .collect::<Result<_>>()
    })?;

    let mut by_language: BTreeMap<&str, Vec<TextPair<'_>>> = BTreeMap::new();
    for (entry, result) in manifest.entries.iter().zip(&results) {
        by_language.entry(&entry.language).or_default().push(TextPair {
            id: &entry.article_id,
            reference: &entry.reference_text,
            hypothesis: &result.hypothesis_text,
        });
    }
    let mut articles = Vec::with_capacity(results.len());
    let mut reports = Vec::with_capacity(by_language.len());
    for (language, pairs) in by_language {
        let scored = textmetrics::corpus_cer(&pairs, &config.policy)?;
        for a in &scored.per_article {
            articles.push(ArticleScore {
                language: language.to_string(),
                article_id: a.id.clone(),
                cer: a.report.cer,
                distance: a.report.distance,
                ref_len: a.report.ref_len,
            });
        }
        reports.push(LanguageReport::new(
            language,
            &manifest.dataset_label,
            engine.name(),
            scored.micro_cer,
        ));
    }
    Ok(Evaluation {
        results,
        articles,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engines::{CachedEngine, MockEngine};
    use crate::report::AccuracyClass;
    use std::fs;
    use std::path::Path;
    use std::time::Duration;

    fn manifest(dir: &Path, pages: &[(&str, &str, &str)]) -> Manifest {
        let entries = pages
            .iter()
            .map(|(lang, id, text)| {
                let img = dir.join(format!("{id}.png"));
                fs::write(&img, format!("img {id}")).unwrap();
                fs::write(dir.join(format!("{id}.gt.txt")), text).unwrap();
                ArticlePair {
                    language: lang.to_string(),
                    article_id: id.to_string(),
                    reference_text: text.to_string(),
                    image_ref: Some(img),
                    hypothesis_text: None,
                }
            })
            .collect();
        Manifest::new("flores", entries).unwrap()
    }

    #[test]
    fn identity_engine_scores_zero() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(dir.path(), &[("hin", "a", "नमस्ते"), ("hin", "b", "दुनिया"), ("khm", "c", "សួស្តី")]);
        let ev = evaluate(&m, &MockEngine::identity(), &Default::default()).unwrap();
        assert_eq!(ev.reports.len(), 2);
        assert!(ev.reports.iter().all(|r| r.cer == 0.0 && r.class == AccuracyClass::Good));
        assert_eq!(ev.reports[0].dataset, "flores");
        assert_eq!(ev.hypothesis_manifest(&m).unwrap().entries[0].hypothesis_text.as_deref(), Some("नमस्ते"));
    }

    #[test]
    fn empty_manifest_is_an_error() {
        let m = Manifest::new("x", vec![]).unwrap();
        assert!(matches!(
            evaluate(&m, &MockEngine::identity(), &Default::default()),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn concurrency_is_bounded() {
        let dir = tempfile::tempdir().unwrap();
        let ids: Vec<String> = (0..24).map(|i| format!("p{i:02}")).collect();
        let pages: Vec<(&str, &str, &str)> = ids.iter().map(|id| ("eng", id.as_str(), "text")).collect();
        let m = manifest(dir.path(), &pages);
        let engine = MockEngine::identity().delay(Duration::from_millis(10));
        let config = EvaluationConfig {
            parallelism: 3,
            ..Default::default()
        };
        evaluate(&m, &engine, &config).unwrap();
        assert!(engine.peak_concurrency() <= 3);
        assert_eq!(engine.calls(), 24);
    }

    #[test]
    fn engine_errors_propagate() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(dir.path(), &[("eng", "a", "x")]);
        let replay = CachedEngine::replay_only("mock", dir.path().join("empty-cache"));
        let err = evaluate(&m, &replay, &Default::default()).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
