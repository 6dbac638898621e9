//! Benchmark manifests: JSON Lines files pairing ground-truth texts with page
//! images and (optionally) OCR hypotheses.
//!
//! Each non-blank line is one object:
//!
//! ```json
//! {"lang": "npi", "id": "npi/001", "ref_path": "npi/001.txt", "image_path": "npi/001.png"}
//! ```
//!
//! Fields: `lang`, `id`, one of `ref_text` / `ref_path`, optional
//! `image_path`, optional `hyp_text` / `hyp_path`, optional `dataset`.
//! Inline text wins over a path. Relative paths resolve against the
//! manifest's directory. Texts are kept exactly as read.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::languages;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticlePair {
    pub language: String,
    pub article_id: String,
    pub reference_text: String,
    pub image_ref: Option<PathBuf>,
    pub hypothesis_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset_label: String,
    pub entries: Vec<ArticlePair>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestLine {
    lang: String,
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dataset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ref_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ref_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hyp_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hyp_path: Option<String>,
}

impl Manifest {
    /// Build a manifest, rejecting duplicate ids and sorting by (language, id).
    pub fn new(dataset_label: impl Into<String>, mut entries: Vec<ArticlePair>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.article_id.as_str()) {
                return Err(Error::DuplicateId(e.article_id.clone()));
            }
        }
        entries.sort_by(|a, b| {
            (a.language.as_str(), a.article_id.as_str())
                .cmp(&(b.language.as_str(), b.article_id.as_str()))
        });
        Ok(Manifest {
            dataset_label: dataset_label.into(),
            entries,
        })
    }

    pub fn languages(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|e| e.language.as_str()).collect()
    }

    /// Serialize as JSON Lines with inline texts.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.entries {
            let line = ManifestLine {
                lang: e.language.clone(),
                id: e.article_id.clone(),
                dataset: Some(self.dataset_label.clone()),
                ref_text: Some(e.reference_text.clone()),
                ref_path: None,
                image_path: e.image_ref.as_ref().map(|p| p.to_string_lossy().into_owned()),
                hyp_text: e.hypothesis_text.clone(),
                hyp_path: None,
            };
            out.push_str(&serde_json::to_string(&line)?);
            out.push('\n');
        }
        Ok(out)
    }
}

fn read_text(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Load a JSONL manifest. An empty file yields an empty manifest labelled
/// with the file stem.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let raw = read_text(path)?;
    let base = path
        .parent()
        .map(|p| if p.as_os_str().is_empty() { Path::new(".") } else { p })
        .unwrap_or(Path::new("."));
    let base = base.canonicalize().map_err(|e| Error::io(base, e))?;
    let resolve = |p: &str| -> PathBuf { base.join(p) };

    let mut label: Option<String> = None;
    let mut entries = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ManifestLine =
            serde_json::from_str(line).map_err(|e| Error::ManifestLine {
                line: line_no,
                message: e.to_string(),
            })?;
        if rec.lang.trim().is_empty() {
            return Err(Error::ManifestLine {
                line: line_no,
                message: "empty `lang`".into(),
            });
        }
        if rec.id.is_empty() {
            return Err(Error::ManifestLine {
                line: line_no,
                message: "empty `id`".into(),
            });
        }
        if let Some(d) = rec.dataset {
            match &label {
                Some(l) if *l != d => {
                    return Err(Error::ManifestLine {
                        line: line_no,
                        message: format!("dataset `{d}` differs from earlier `{l}`"),
                    })
                }
                _ => label = Some(d),
            }
        }
        let reference_text = match (rec.ref_text, rec.ref_path) {
            (Some(t), _) => t,
            (None, Some(p)) => read_text(&resolve(&p))?,
            (None, None) => {
                return Err(Error::ManifestLine {
                    line: line_no,
                    message: "one of `ref_text` or `ref_path` is required".into(),
                })
            }
        };
        let hypothesis_text = match (rec.hyp_text, rec.hyp_path) {
            (Some(t), _) => Some(t),
            (None, Some(p)) => Some(read_text(&resolve(&p))?),
            (None, None) => None,
        };
        let image_ref = match rec.image_path {
            Some(p) => {
                let full = resolve(&p);
                if !full.exists() {
                    return Err(Error::MissingFile(full));
                }
                Some(full)
            }
            None => None,
        };
        entries.push(ArticlePair {
            language: rec.lang,
            article_id: rec.id,
            reference_text,
            image_ref,
            hypothesis_text,
        });
    }
    let label = label.unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    Manifest::new(label, entries)
}

pub fn save_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    fs::write(path, manifest.to_jsonl()?).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WarningKind {
    UnknownGroup,
    EmptyHypothesis,
    EmptyReference,
}

impl fmt::Display for WarningKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WarningKind::UnknownGroup => "unknown-group",
            WarningKind::EmptyHypothesis => "empty-hypothesis",
            WarningKind::EmptyReference => "empty-reference",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestWarning {
    pub article_id: String,
    pub kind: WarningKind,
    pub message: String,
}

/// Report unknown language codes, empty hypotheses and empty references.
pub fn validate_manifest(manifest: &Manifest) -> Vec<ManifestWarning> {
    let mut warnings = Vec::new();
    for e in &manifest.entries {
        let mut warn = |kind, message: String| {
            warnings.push(ManifestWarning {
                article_id: e.article_id.clone(),
                kind,
                message,
            })
        };
        if languages::lookup(&e.language).is_none() {
            warn(
                WarningKind::UnknownGroup,
                format!("language `{}` has no script group", e.language),
            );
        }
        if e.reference_text.is_empty() {
            warn(WarningKind::EmptyReference, "reference text is empty".into());
        }
        if matches!(&e.hypothesis_text, Some(h) if h.is_empty()) {
            warn(WarningKind::EmptyHypothesis, "hypothesis text is empty".into());
        }
    }
    warnings
}
