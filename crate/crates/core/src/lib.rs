//! OCR quality evaluation and OCR-noise tooling for low-resource scripts.
//!
//! - [`textmetrics`]: Unicode-aware edit distance, alignment and CER.
//! - [`corpus`]: JSONL benchmark manifests.
//! - [`validation`]: per-language anomaly flagging of article CERs.
//! - [`errormodel`]: mining single-character OCR error statistics.
//! - [`inject`]: noising clean text at a target CER and rate sweeps.
//! - [`augment`]: page-image noise and styled-document descriptors.
//! - [`engines`]: OCR engine adapters with a record/replay cache.
//! - [`evaluate`]: manifest → engine → per-language CER reports.
//! - [`report`]: accuracy bands, script-group averages and report files.

pub mod augment;
pub mod corpus;
pub mod engines;
pub mod error;
pub mod errormodel;
pub mod evaluate;
pub mod inject;
pub mod languages;
pub mod report;
pub mod textmetrics;
pub mod validation;

pub use error::{EngineError, Error, Result};
