//! Accuracy bands, script-group averages and report files.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::languages::{self, ScriptGroup};

/// Upper bound (inclusive) of the Good band, CER in percent.
pub const GOOD_MAX: f64 = 2.0;
/// Upper bound (inclusive) of the Average band, CER in percent.
pub const AVERAGE_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccuracyClass {
    Good,
    Average,
    Poor,
}

impl AccuracyClass {
    pub const ALL: [AccuracyClass; 3] = [AccuracyClass::Good, AccuracyClass::Average, AccuracyClass::Poor];

    pub fn as_str(self) -> &'static str {
        match self {
            AccuracyClass::Good => "good",
            AccuracyClass::Average => "average",
            AccuracyClass::Poor => "poor",
        }
    }
}

impl fmt::Display for AccuracyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AccuracyClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "good" => Ok(AccuracyClass::Good),
            "average" => Ok(AccuracyClass::Average),
            "poor" => Ok(AccuracyClass::Poor),
            other => Err(Error::Format(format!("unknown accuracy class `{other}`"))),
        }
    }
}

/// Good: cer ≤ 2. Average: 2 < cer ≤ 10. Poor: cer > 10 (and NaN).
pub fn classify(cer: f64) -> AccuracyClass {
    if cer <= GOOD_MAX {
        AccuracyClass::Good
    } else if cer <= AVERAGE_MAX {
        AccuracyClass::Average
    } else {
        AccuracyClass::Poor
    }
}

/// Half-up rounding to one decimal, tolerant of binary representation
/// error (13.15 rounds to 13.2).
pub fn round1(x: f64) -> f64 {
    (x * 10.0 + 1e-9).round() / 10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageReport {
    pub language: String,
    pub script: String,
    pub group: Option<ScriptGroup>,
    pub dataset: String,
    pub engine: String,
    /// Percent.
    pub cer: f64,
    pub class: AccuracyClass,
}

impl LanguageReport {
    /// Script and group come from the embedded language table when known.
    pub fn new(language: &str, dataset: &str, engine: &str, cer: f64) -> Self {
        let info = languages::lookup(language);
        LanguageReport {
            language: language.to_string(),
            script: info.map(|i| i.script.to_string()).unwrap_or_default(),
            group: info.map(|i| i.group),
            dataset: dataset.to_string(),
            engine: engine.to_string(),
            cer,
            class: classify(cer),
        }
    }

    fn resolved_group(&self) -> Result<ScriptGroup> {
        self.group
            .or_else(|| languages::group_of(&self.language))
            .ok_or_else(|| Error::UnknownGroup(self.language.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    pub engine: String,
    pub dataset: String,
    pub languages: usize,
    pub good: usize,
    pub average: usize,
    pub poor: usize,
    pub good_pct: f64,
    pub average_pct: f64,
    pub poor_pct: f64,
    pub average_cer: f64,
}

fn by_column(reports: &[LanguageReport]) -> BTreeMap<(String, String), Vec<&LanguageReport>> {
    let mut columns: BTreeMap<(String, String), Vec<&LanguageReport>> = BTreeMap::new();
    for r in reports {
        columns
            .entry((r.dataset.clone(), r.engine.clone()))
            .or_default()
            .push(r);
    }
    columns
}

/// Band percentages and mean CER per (dataset, engine), rounded to one
/// decimal. Classes are recomputed from `cer`.
pub fn summarize(reports: &[LanguageReport]) -> Result<Vec<BandSummary>> {
    if reports.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(by_column(reports)
        .into_iter()
        .map(|((dataset, engine), rows)| {
            let n = rows.len();
            let count = |c: AccuracyClass| rows.iter().filter(|r| classify(r.cer) == c).count();
            let (good, average, poor) = (
                count(AccuracyClass::Good),
                count(AccuracyClass::Average),
                count(AccuracyClass::Poor),
            );
            let pct = |k: usize| round1(100.0 * k as f64 / n as f64);
            let mean = rows.iter().map(|r| r.cer).sum::<f64>() / n as f64;
            BandSummary {
                engine,
                dataset,
                languages: n,
                good,
                average,
                poor,
                good_pct: pct(good),
                average_pct: pct(average),
                poor_pct: pct(poor),
                average_cer: round1(mean),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAverage {
    pub engine: String,
    pub dataset: String,
    pub group: ScriptGroup,
    pub languages: usize,
    /// Unrounded mean CER; see [`round1`].
    pub mean_cer: f64,
}

/// Mean CER per script group and (dataset, engine).
pub fn group_averages(reports: &[LanguageReport]) -> Result<Vec<GroupAverage>> {
    let mut acc: BTreeMap<(String, String, ScriptGroup), (usize, f64)> = BTreeMap::new();
    for r in reports {
        let group = r.resolved_group()?;
        let slot = acc
            .entry((r.dataset.clone(), r.engine.clone(), group))
            .or_default();
        slot.0 += 1;
        slot.1 += r.cer;
    }
    Ok(acc
        .into_iter()
        .map(|((dataset, engine, group), (n, sum))| GroupAverage {
            engine,
            dataset,
            group,
            languages: n,
            mean_cer: sum / n as f64,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            other => Err(Error::InvalidArgument(format!("unknown report format `{other}`"))),
        }
    }
}

pub const CSV_COLUMNS: [&str; 7] = ["language", "script", "group", "engine", "dataset", "cer", "class"];

fn sorted(reports: &[LanguageReport]) -> Vec<&LanguageReport> {
    let mut rows: Vec<&LanguageReport> = reports.iter().collect();
    rows.sort_by(|a, b| {
        (&a.script, &a.language, &a.dataset, &a.engine).cmp(&(&b.script, &b.language, &b.dataset, &b.engine))
    });
    rows
}

fn group_label(g: Option<ScriptGroup>) -> String {
    g.map(|g| g.to_string()).unwrap_or_default()
}

/// Write `reports` sorted by (script, language).
pub fn emit<W: Write>(reports: &[LanguageReport], format: ReportFormat, mut out: W) -> Result<()> {
    let rows = sorted(reports);
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_COLUMNS)?;
            for r in rows {
                w.write_record([
                    r.language.clone(),
                    r.script.clone(),
                    group_label(r.group),
                    r.engine.clone(),
                    r.dataset.clone(),
                    r.cer.to_string(),
                    classify(r.cer).to_string(),
                ])?;
            }
            w.flush().map_err(|e| Error::io("<report>", e))?;
        }
        ReportFormat::Json => {
            let mut text = serde_json::to_string_pretty(&rows)?;
            text.push('\n');
            out.write_all(text.as_bytes()).map_err(|e| Error::io("<report>", e))?;
        }
        ReportFormat::Markdown => {
            out.write_all(markdown_table(&rows).as_bytes())
                .map_err(|e| Error::io("<report>", e))?;
        }
    }
    Ok(())
}

pub fn emit_to_path(reports: &[LanguageReport], format: ReportFormat, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    emit(reports, format, &mut buf)?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// One row per language, one CER column per (dataset, engine), and a final
/// average row.
fn markdown_table(rows: &[&LanguageReport]) -> String {
    let columns: Vec<(String, String)> = by_column(&rows.iter().map(|r| (*r).clone()).collect::<Vec<_>>())
        .into_keys()
        .collect();
    let mut lines: Vec<(String, String, String)> = Vec::new();
    let mut cells: BTreeMap<(String, (String, String)), f64> = BTreeMap::new();
    for r in rows {
        let key = (r.script.clone(), r.language.clone(), group_label(r.group));
        if !lines.contains(&key) {
            lines.push(key);
        }
        cells.insert((r.language.clone(), (r.dataset.clone(), r.engine.clone())), r.cer);
    }
    let mut s = String::from("| Language | Script | Group |");
    for (dataset, engine) in &columns {
        s.push_str(&format!(" {dataset} {engine} |"));
    }
    s.push_str("\n|---|---|---|");
    s.push_str(&"---:|".repeat(columns.len()));
    s.push('\n');
    for (script, language, group) in &lines {
        s.push_str(&format!("| {language} | {script} | {group} |"));
        for col in &columns {
            match cells.get(&(language.clone(), col.clone())) {
                Some(c) => s.push_str(&format!(" {:.1} |", c)),
                None => s.push_str(" - |"),
            }
        }
        s.push('\n');
    }
    s.push_str("| **Average error** | | |");
    for col in &columns {
        let vals: Vec<f64> = cells
            .iter()
            .filter(|((_, c), _)| c == col)
            .map(|(_, v)| *v)
            .collect();
        s.push_str(&format!(" {:.1} |", round1(vals.iter().sum::<f64>() / vals.len() as f64)));
    }
    s.push('\n');
    s
}

/// Write band summaries (one row per dataset and engine).
pub fn emit_summary<W: Write>(summaries: &[BandSummary], format: ReportFormat, mut out: W) -> Result<()> {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record([
                "dataset",
                "engine",
                "languages",
                "good_pct",
                "average_pct",
                "poor_pct",
                "average_cer",
            ])?;
            for s in summaries {
                w.write_record([
                    s.dataset.clone(),
                    s.engine.clone(),
                    s.languages.to_string(),
                    format!("{:.1}", s.good_pct),
                    format!("{:.1}", s.average_pct),
                    format!("{:.1}", s.poor_pct),
                    format!("{:.1}", s.average_cer),
                ])?;
            }
            w.flush().map_err(|e| Error::io("<summary>", e))?;
        }
        ReportFormat::Json => {
            let mut text = serde_json::to_string_pretty(summaries)?;
            text.push('\n');
            out.write_all(text.as_bytes()).map_err(|e| Error::io("<summary>", e))?;
        }
        ReportFormat::Markdown => {
            let mut s = String::from("| OCR accuracy |");
            for x in summaries {
                s.push_str(&format!(" {} {} |", x.dataset, x.engine));
            }
            s.push_str("\n|---|");
            s.push_str(&"---:|".repeat(summaries.len()));
            s.push('\n');
            type Band = (&'static str, fn(&BandSummary) -> f64);
            let bands: [Band; 3] = [
                ("Good (CER <= 2%)", |x| x.good_pct),
                ("Average (CER 2-10%)", |x| x.average_pct),
                ("Poor (CER > 10%)", |x| x.poor_pct),
            ];
            for (label, get) in bands {
                s.push_str(&format!("| {label} |"));
                for x in summaries {
                    s.push_str(&format!(" {:.1}% |", get(x)));
                }
                s.push('\n');
            }
            s.push_str("| Average CER |");
            for x in summaries {
                s.push_str(&format!(" {:.1} |", x.average_cer));
            }
            s.push('\n');
            out.write_all(s.as_bytes()).map_err(|e| Error::io("<summary>", e))?;
        }
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    language: String,
    #[serde(default)]
    script: String,
    #[serde(default)]
    group: String,
    engine: String,
    dataset: String,
    cer: f64,
    #[serde(default)]
    class: Option<String>,
}

/// Load reports from `.json` (as written by [`emit`]) or `.csv`. A CSV
/// `class` column is optional and, when present, must agree with `cer`.
pub fn load_reports(path: &Path) -> Result<Vec<LanguageReport>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let is_json = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let reports: Vec<LanguageReport> = if is_json {
        serde_json::from_str(&text)?
    } else {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let mut out = Vec::new();
        for row in reader.deserialize::<CsvRow>() {
            let row = row?;
            let group = if row.group.trim().is_empty() {
                languages::group_of(&row.language)
            } else {
                Some(row.group.parse()?)
            };
            let report = LanguageReport {
                script: if row.script.is_empty() {
                    languages::lookup(&row.language)
                        .map(|i| i.script.to_string())
                        .unwrap_or_default()
                } else {
                    row.script
                },
                group,
                language: row.language,
                dataset: row.dataset,
                engine: row.engine,
                cer: row.cer,
                class: classify(row.cer),
            };
            if let Some(class) = row.class.filter(|c| !c.trim().is_empty()) {
                if class.parse::<AccuracyClass>()? != report.class {
                    return Err(Error::Format(format!(
                        "{}: class `{class}` disagrees with cer {}",
                        report.language, report.cer
                    )));
                }
            }
            out.push(report);
        }
        out
    };
    for r in &reports {
        if r.class != classify(r.cer) {
            return Err(Error::Format(format!(
                "{}: class {} disagrees with cer {}",
                r.language, r.class, r.cer
            )));
        }
    }
    Ok(reports)
}
