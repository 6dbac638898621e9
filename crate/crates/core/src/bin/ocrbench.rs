use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ocrbench::augment::{self, PageImage, StyleSpec};
use ocrbench::corpus::{self, Manifest};
use ocrbench::engines::{CachedEngine, ExternalCommandEngine, HttpEngine, MockEngine, OcrEngine};
use ocrbench::errormodel::{self, ErrorModel, KindSet};
use ocrbench::evaluate::{self, EvaluationConfig};
use ocrbench::inject::{self, InjectionConfig, SweepSpec};
use ocrbench::report::{self, ReportFormat};
use ocrbench::textmetrics::{self, NormalizationPolicy, TextPair, UnicodeForm, UnitKind, Whitespace};
use ocrbench::validation::{self, Grouping, Side, ValidationConfig};
use ocrbench::{Error, Result};

const UNITS_HELP: &str = "\
CER is reported in percent: 100 x edit distance / reference length (can exceed 100).
Accuracy bands: Good = CER <= 2, Average = 2 < CER <= 10, Poor = CER > 10.
Exit codes: 0 ok, 1 I/O error, 2 invalid input or domain error, 3 OCR engine error.";

#[derive(Parser)]
#[command(name = "ocrbench", version, about = "OCR evaluation and OCR-noise tooling", after_help = UNITS_HELP)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Global {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (>= 1).
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    parallelism: u64,
    /// Unicode normalization applied before comparison.
    #[arg(long, global = true, value_enum, default_value_t = FormArg::Nfc)]
    unicode_form: FormArg,
    /// Comparison unit.
    #[arg(long, global = true, value_enum, default_value_t = UnitArg::Codepoint)]
    unit: UnitArg,
    /// Whitespace handling.
    #[arg(long, global = true, value_enum, default_value_t = WsArg::Preserve)]
    whitespace: WsArg,
    /// Engine transcript cache directory (record/replay).
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    Nfc,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitArg {
    Codepoint,
    Grapheme,
}

#[derive(Clone, Copy, ValueEnum)]
enum WsArg {
    Preserve,
    Collapse,
}

impl Global {
    fn policy(&self) -> NormalizationPolicy {
        NormalizationPolicy {
            unicode_form: match self.unicode_form {
                FormArg::Nfc => UnicodeForm::Nfc,
                FormArg::None => UnicodeForm::None,
            },
            unit: match self.unit {
                UnitArg::Codepoint => UnitKind::CodePoint,
                UnitArg::Grapheme => UnitKind::GraphemeCluster,
            },
            whitespace: match self.whitespace {
                WsArg::Preserve => Whitespace::Preserve,
                WsArg::Collapse => Whitespace::CollapseRuns,
            },
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Character error rate of one pair of files or of every manifest entry.
    #[command(after_help = UNITS_HELP)]
    Cer(CerArgs),
    /// Flag articles whose CER is more than k standard deviations from the mean.
    #[command(after_help = UNITS_HELP)]
    Validate(ValidateArgs),
    /// Mine a character error model from reference/hypothesis pairs.
    #[command(after_help = UNITS_HELP)]
    Mine(MineArgs),
    /// Noise clean text (one text per line) to a target CER.
    #[command(after_help = UNITS_HELP)]
    Inject(InjectArgs),
    /// Noise a corpus at every (rate, kind set) combination.
    #[command(after_help = UNITS_HELP)]
    Sweep(SweepArgs),
    /// Page-image augmentation or styled-document output.
    #[command(after_help = UNITS_HELP)]
    Augment(AugmentArgs),
    /// Run an OCR engine over a manifest and report per-language CER.
    #[command(after_help = UNITS_HELP)]
    Evaluate(EvaluateArgs),
    /// Render per-language reports, band summaries or script-group averages.
    #[command(after_help = UNITS_HELP)]
    Report(ReportArgs),
}

#[derive(Args)]
struct CerArgs {
    /// Reference text file.
    #[arg(long = "ref", requires = "hyp", conflicts_with = "manifest")]
    reference: Option<PathBuf>,
    /// Hypothesis text file.
    #[arg(long, requires = "reference")]
    hyp: Option<PathBuf>,
    /// JSONL manifest whose entries carry hypotheses.
    #[arg(long, required_unless_present = "reference")]
    manifest: Option<PathBuf>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    TwoSided,
    HighOnly,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupingArg {
    PerLanguage,
    Global,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Flag when |CER - mean| > sigma x stddev.
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    #[arg(long, value_enum, default_value_t = SideArg::TwoSided)]
    side: SideArg,
    #[arg(long, value_enum, default_value_t = GroupingArg::PerLanguage)]
    grouping: GroupingArg,
    /// Only list flagged articles.
    #[arg(long)]
    flagged_only: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MineArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Keep the k most frequent errors.
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    /// Restrict to error kinds, e.g. `all`, `sub`, `ins+del`.
    #[arg(long, default_value = "all")]
    kinds: KindSet,
    /// Only mine entries of this language.
    #[arg(long)]
    language: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InjectArgs {
    #[arg(long)]
    model: PathBuf,
    /// Clean text, one text per line.
    #[arg(long)]
    input: PathBuf,
    /// Target CER in percent.
    #[arg(long)]
    rate: f64,
    #[arg(long, default_value = "all")]
    kinds: KindSet,
    /// Warn when achieved CER differs from the target by more than this.
    #[arg(long, default_value_t = 0.5)]
    tolerance: f64,
    #[arg(long)]
    out: PathBuf,
    /// Per-text metrics as JSON.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    model: PathBuf,
    /// Clean text, one text per line.
    #[arg(long)]
    input: PathBuf,
    /// Target CERs in percent.
    #[arg(long, value_delimiter = ',', default_value = "0,2,4,6,8,10,12,14,16,18,20")]
    rates: Vec<f64>,
    /// Kind sets, e.g. `all,sub,ins,del`.
    #[arg(long, value_delimiter = ',', default_value = "all,sub,ins,del")]
    kinds: Vec<KindSet>,
    #[arg(long, default_value_t = 0.5)]
    tolerance: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum AugmentOp {
    Saltpepper,
    Skew,
    Opacity,
    Style,
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long, value_enum)]
    op: AugmentOp,
    /// Input image (PNG or PGM); for `style`, a UTF-8 text file.
    #[arg(long)]
    input: PathBuf,
    /// Output image, or HTML file for `style`.
    #[arg(long)]
    output: PathBuf,
    /// Salt & pepper corruption probability per pixel.
    #[arg(long, default_value_t = augment::DEFAULT_NOISE_DENSITY)]
    density: f64,
    /// Counter-clockwise rotation in degrees.
    #[arg(long, default_value_t = augment::DEFAULT_SKEW_DEG, allow_hyphen_values = true)]
    angle: f64,
    /// Gray level for uncovered pixels after rotation.
    #[arg(long, default_value_t = 255)]
    fill: u8,
    /// Opacity in (0, 1]; blends the image toward white.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Script tag selecting the default fonts (style only).
    #[arg(long)]
    script: Option<String>,
    #[arg(long, default_value = "Times New Roman")]
    font_family: String,
    /// Points.
    #[arg(long, default_value_t = 12.0)]
    font_size: f64,
    #[arg(long)]
    bold: bool,
    #[arg(long)]
    italic: bool,
    /// em units.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    letter_spacing: f64,
    /// Text opacity for `style`.
    #[arg(long, default_value_t = 1.0)]
    text_opacity: f64,
    /// Text colour as `#rrggbb`.
    #[arg(long, default_value = "#000000")]
    color: String,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EngineArg {
    Mock,
    Tesseract,
    Command,
    Http,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CacheModeArg {
    Record,
    Replay,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum)]
    engine: EngineArg,
    /// Record fills the cache on misses; replay never calls the engine.
    #[arg(long, value_enum, default_value_t = CacheModeArg::Record, requires = "cache_dir")]
    cache_mode: CacheModeArg,
    /// Mock: error model applied to the sidecar transcripts.
    #[arg(long, requires = "mock_rate")]
    mock_model: Option<PathBuf>,
    /// Mock: target CER in percent for the applied noise.
    #[arg(long)]
    mock_rate: Option<f64>,
    /// Command/tesseract: program to run.
    #[arg(long)]
    program: Option<PathBuf>,
    /// Command: argument template; `{image}` and `{lang}` are substituted.
    #[arg(long = "arg", allow_hyphen_values = true)]
    args: Vec<String>,
    /// Command/HTTP: map ISO codes through this engine's code table.
    #[arg(long)]
    code_table: Option<String>,
    /// HTTP: endpoint receiving the image bytes.
    #[arg(long)]
    url: Option<String>,
    /// HTTP: environment variable holding the bearer token.
    #[arg(long)]
    token_env: Option<String>,
    /// HTTP: JSON pointer to the text in the reply.
    #[arg(long, default_value = "/text")]
    text_pointer: String,
    /// HTTP: extra query parameters as key=value.
    #[arg(long = "option")]
    options: Vec<String>,
    /// HTTP: minimum milliseconds between requests.
    #[arg(long, default_value_t = 0)]
    min_interval_ms: u64,
    /// Per-call timeout.
    #[arg(long, default_value_t = 120_000)]
    timeout_ms: u64,
    /// Per-language report (format from extension: .csv, .json, .md).
    #[arg(long)]
    out: PathBuf,
    /// Per-article CSV.
    #[arg(long)]
    articles_out: Option<PathBuf>,
    /// Copy of the manifest with engine hypotheses inlined.
    #[arg(long)]
    hyp_manifest_out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormatArg {
    Csv,
    Json,
    Markdown,
}

impl From<ReportFormatArg> for ReportFormat {
    fn from(f: ReportFormatArg) -> Self {
        match f {
            ReportFormatArg::Csv => ReportFormat::Csv,
            ReportFormatArg::Json => ReportFormat::Json,
            ReportFormatArg::Markdown => ReportFormat::Markdown,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportView {
    /// One row per language.
    Languages,
    /// Share of languages per accuracy band, and mean CER.
    Summary,
    /// Mean CER per script group.
    Groups,
}

#[derive(Args)]
struct ReportArgs {
    /// Reports as CSV or JSON.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormatArg::Markdown)]
    format: ReportFormatArg,
    #[arg(long, value_enum, default_value_t = ReportView::Languages)]
    view: ReportView,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.parallelism as usize)
        .build_global()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let g = &cli.global;
    match cli.command {
        Cmd::Cer(a) => cmd_cer(g, a),
        Cmd::Validate(a) => cmd_validate(g, a),
        Cmd::Mine(a) => cmd_mine(g, a),
        Cmd::Inject(a) => cmd_inject(g, a),
        Cmd::Sweep(a) => cmd_sweep(g, a),
        Cmd::Augment(a) => cmd_augment(g, a),
        Cmd::Evaluate(a) => cmd_evaluate(g, a),
        Cmd::Report(a) => cmd_report(a),
    }
}

fn read_text(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    Ok(read_text(path)?.lines().map(str::to_string).collect())
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| Error::io(p, e)),
        None => io::stdout().write_all(bytes).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn csv_bytes(rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner()
        .map_err(|e| Error::Format(format!("csv: {e}")))
}

fn cmd_cer(g: &Global, a: CerArgs) -> Result<()> {
    let policy = g.policy();
    let f4 = |x: f64| format!("{x:.4}");
    let rows = if let (Some(r), Some(h)) = (&a.reference, &a.hyp) {
        let rep = textmetrics::cer(&read_text(r)?, &read_text(h)?, &policy)?;
        vec![
            ["distance", "ref_len", "hyp_len", "substitutions", "insertions", "deletions", "cer"]
                .map(String::from)
                .to_vec(),
            vec![
                rep.distance.to_string(),
                rep.ref_len.to_string(),
                rep.hyp_len.to_string(),
                rep.counts.substitutions.to_string(),
                rep.counts.insertions.to_string(),
                rep.counts.deletions.to_string(),
                f4(rep.cer),
            ],
        ]
    } else {
        let m = corpus::load_manifest(a.manifest.as_deref().expect("clap requires manifest"))?;
        let pairs = m
            .entries
            .iter()
            .map(|e| {
                Ok(TextPair {
                    id: &e.article_id,
                    reference: &e.reference_text,
                    hypothesis: e
                        .hypothesis_text
                        .as_deref()
                        .ok_or_else(|| Error::MissingHypothesis(e.article_id.clone()))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let c = textmetrics::corpus_cer(&pairs, &policy)?;
        let mut rows = vec![["article_id", "language", "distance", "ref_len", "cer", "macro_cer"]
            .map(String::from)
            .to_vec()];
        for (e, art) in m.entries.iter().zip(&c.per_article) {
            rows.push(vec![
                art.id.clone(),
                e.language.clone(),
                art.report.distance.to_string(),
                art.report.ref_len.to_string(),
                f4(art.report.cer),
                String::new(),
            ]);
        }
        rows.push(vec![
            "TOTAL".into(),
            String::new(),
            c.total_distance.to_string(),
            c.total_ref_len.to_string(),
            f4(c.micro_cer),
            f4(c.macro_cer),
        ]);
        rows
    };
    write_out(a.out.as_deref(), &csv_bytes(&rows)?)
}

fn cmd_validate(g: &Global, a: ValidateArgs) -> Result<()> {
    let m = corpus::load_manifest(&a.manifest)?;
    for w in corpus::validate_manifest(&m) {
        eprintln!("warning: {}: {}", w.article_id, w.message);
    }
    let config = ValidationConfig {
        sigma_multiplier: a.sigma,
        side: match a.side {
            SideArg::TwoSided => Side::TwoSided,
            SideArg::HighOnly => Side::HighOnly,
        },
        grouping: match a.grouping {
            GroupingArg::PerLanguage => Grouping::PerLanguage,
            GroupingArg::Global => Grouping::Global,
        },
    };
    let records = validation::article_cers(&m, &g.policy())?;
    let mut flags = validation::flag_anomalies(&records, &config)?;
    let flagged = flags.iter().filter(|f| f.flagged).count();
    if a.flagged_only {
        flags.retain(|f| f.flagged);
    }
    let mut buf = Vec::new();
    validation::write_flags_csv(&flags, &mut buf)?;
    write_out(a.out.as_deref(), &buf)?;
    eprintln!("{flagged} of {} articles flagged", records.len());
    Ok(())
}

fn cmd_mine(g: &Global, a: MineArgs) -> Result<()> {
    let m = corpus::load_manifest(&a.manifest)?;
    let entries: Vec<_> = m
        .entries
        .iter()
        .filter(|e| a.language.as_deref().is_none_or(|l| e.language == l))
        .collect();
    let pairs = entries
        .iter()
        .map(|e| {
            let hyp = e
                .hypothesis_text
                .clone()
                .ok_or_else(|| Error::MissingHypothesis(e.article_id.clone()))?;
            Ok((e.reference_text.clone(), hyp))
        })
        .collect::<Result<Vec<_>>>()?;
    let language = match &a.language {
        Some(l) => l.clone(),
        None => {
            let langs = m.languages();
            if langs.len() == 1 {
                langs.into_iter().next().unwrap_or_default().to_string()
            } else {
                "mul".to_string()
            }
        }
    };
    let mut model = errormodel::mine(&language, &pairs, &g.policy())?;
    if a.kinds != KindSet::ALL && !model.is_empty() {
        model = errormodel::filter_kinds(&model, &a.kinds)?;
    }
    let model = errormodel::top_k(&model, a.top_k)?;
    model.save(&a.out)?;
    eprintln!(
        "{} error types kept of {} observed errors",
        model.len(),
        model.total_error_count
    );
    Ok(())
}

fn injection_config(g: &Global, rate: f64, kinds: KindSet, tolerance: f64) -> InjectionConfig {
    InjectionConfig {
        target_cer: rate,
        kinds,
        seed: g.seed,
        tolerance,
        policy: g.policy(),
    }
}

fn cmd_inject(g: &Global, a: InjectArgs) -> Result<()> {
    let model = ErrorModel::load(&a.model)?;
    let texts = read_lines(&a.input)?;
    let config = injection_config(g, a.rate, a.kinds, a.tolerance);
    let result = inject::inject_corpus(&texts, &model, &config)?;
    let mut body = result.noisy.join("\n");
    if !texts.is_empty() {
        body.push('\n');
    }
    fs::write(&a.out, body).map_err(|e| Error::io(&a.out, e))?;
    if let Some(p) = &a.metrics {
        let mut json = serde_json::to_string_pretty(&result)?;
        json.push('\n');
        fs::write(p, json).map_err(|e| Error::io(p, e))?;
    }
    let failed = result.texts.iter().filter(|t| t.error.is_some()).count();
    if failed > 0 {
        eprintln!("warning: {failed} text(s) left unchanged");
    }
    if let Some(c) = result.corpus_micro_cer {
        eprintln!("achieved CER {c:.4} (target {})", a.rate);
    }
    Ok(())
}

fn cmd_sweep(g: &Global, a: SweepArgs) -> Result<()> {
    let model = ErrorModel::load(&a.model)?;
    let texts = read_lines(&a.input)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let spec = SweepSpec {
        rates: a.rates,
        kind_sets: a.kinds,
        seed: g.seed,
        tolerance: a.tolerance,
        policy: g.policy(),
    };
    let index = inject::sweep(&texts, &model, &spec, &a.out_dir)?;
    eprintln!("{} noisy corpora written to {}", index.outputs.len(), a.out_dir.display());
    Ok(())
}

fn parse_color(s: &str) -> Result<[u8; 3]> {
    let hex = s.trim().trim_start_matches('#');
    let bad = || Error::InvalidArgument(format!("colour `{s}` is not #rrggbb"));
    if hex.len() != 6 || !hex.is_ascii() {
        return Err(bad());
    }
    let byte = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).map_err(|_| bad());
    Ok([byte(0)?, byte(2)?, byte(4)?])
}

fn cmd_augment(g: &Global, a: AugmentArgs) -> Result<()> {
    if let AugmentOp::Style = a.op {
        let text = read_text(&a.input)?;
        let style = StyleSpec {
            font_family: a.font_family,
            font_size: a.font_size,
            bold: a.bold,
            italic: a.italic,
            letter_spacing: a.letter_spacing,
            opacity: a.text_opacity,
            color: parse_color(&a.color)?,
        };
        let doc = augment::emit_styled_document(&text, &style, a.script.as_deref())?;
        for w in &doc.warnings {
            eprintln!("warning: {w}");
        }
        return fs::write(&a.output, doc.html).map_err(|e| Error::io(&a.output, e));
    }
    let img = PageImage::load(&a.input)?;
    let out = match a.op {
        AugmentOp::Saltpepper => augment::salt_pepper(&img, a.density, g.seed)?,
        AugmentOp::Skew => augment::skew(&img, a.angle, a.fill)?,
        AugmentOp::Opacity => augment::opacity(&img, a.alpha)?,
        AugmentOp::Style => unreachable!("handled above"),
    };
    out.save(&a.output)
}

fn build_engine(g: &Global, a: &EvaluateArgs) -> Result<Box<dyn OcrEngine>> {
    let timeout = Duration::from_millis(a.timeout_ms);
    let engine: Box<dyn OcrEngine> = match a.engine {
        EngineArg::Mock => match (&a.mock_model, a.mock_rate) {
            (Some(model), Some(rate)) => {
                let model = ErrorModel::load(model)?;
                Box::new(MockEngine::with_noise(model, injection_config(g, rate, KindSet::ALL, 0.5)))
            }
            _ => Box::new(MockEngine::identity()),
        },
        EngineArg::Tesseract => {
            let mut e = ExternalCommandEngine::tesseract(a.program.clone().unwrap_or_else(|| "tesseract".into()));
            e.timeout = timeout;
            Box::new(e)
        }
        EngineArg::Command => {
            let program = a
                .program
                .clone()
                .ok_or_else(|| Error::InvalidArgument("--engine command needs --program".into()))?;
            let name = program
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "command".into());
            let mut e = ExternalCommandEngine::new(name, program, a.args.clone());
            e.timeout = timeout;
            e.code_table = a.code_table.clone();
            Box::new(e)
        }
        EngineArg::Http => {
            let url = a
                .url
                .clone()
                .ok_or_else(|| Error::InvalidArgument("--engine http needs --url".into()))?;
            let mut e = HttpEngine::new("http", url, a.text_pointer.clone());
            e.timeout = timeout;
            e.token_env = a.token_env.clone();
            e.min_interval = Duration::from_millis(a.min_interval_ms);
            e.code_table = a.code_table.clone();
            for opt in &a.options {
                let (k, v) = opt
                    .split_once('=')
                    .ok_or_else(|| Error::InvalidArgument(format!("option `{opt}` is not key=value")))?;
                e.options.insert(k.to_string(), v.to_string());
            }
            Box::new(e)
        }
    };
    Ok(match &g.cache_dir {
        None => engine,
        Some(dir) => match a.cache_mode {
            CacheModeArg::Record => Box::new(CachedEngine::record(engine, dir)),
            CacheModeArg::Replay => Box::new(CachedEngine::replay(engine, dir)),
        },
    })
}

fn format_for(path: &Path) -> ReportFormat {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("json") => ReportFormat::Json,
        Some("md") | Some("markdown") => ReportFormat::Markdown,
        _ => ReportFormat::Csv,
    }
}

fn cmd_evaluate(g: &Global, a: EvaluateArgs) -> Result<()> {
    let manifest: Manifest = corpus::load_manifest(&a.manifest)?;
    for w in corpus::validate_manifest(&manifest) {
        eprintln!("warning: {}: {}", w.article_id, w.message);
    }
    let engine = build_engine(g, &a)?;
    let config = EvaluationConfig {
        parallelism: g.parallelism as usize,
        policy: g.policy(),
    };
    let ev = evaluate::evaluate(&manifest, engine.as_ref(), &config)?;
    report::emit_to_path(&ev.reports, format_for(&a.out), &a.out)?;
    if let Some(p) = &a.articles_out {
        let mut rows = vec![["language", "article_id", "distance", "ref_len", "cer"].map(String::from).to_vec()];
        for s in &ev.articles {
            rows.push(vec![
                s.language.clone(),
                s.article_id.clone(),
                s.distance.to_string(),
                s.ref_len.to_string(),
                format!("{:.4}", s.cer),
            ]);
        }
        write_out(Some(p), &csv_bytes(&rows)?)?;
    }
    if let Some(p) = &a.hyp_manifest_out {
        corpus::save_manifest(&ev.hypothesis_manifest(&manifest)?, p)?;
    }
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let reports = report::load_reports(&a.input)?;
    let format: ReportFormat = a.format.into();
    let mut buf = Vec::new();
    match a.view {
        ReportView::Languages => report::emit(&reports, format, &mut buf)?,
        ReportView::Summary => report::emit_summary(&report::summarize(&reports)?, format, &mut buf)?,
        ReportView::Groups => {
            let groups = report::group_averages(&reports)?;
            match format {
                ReportFormat::Json => {
                    buf = serde_json::to_vec_pretty(&groups)?;
                    buf.push(b'\n');
                }
                ReportFormat::Csv => {
                    let mut rows = vec![["dataset", "engine", "group", "languages", "mean_cer"]
                        .map(String::from)
                        .to_vec()];
                    for x in &groups {
                        rows.push(vec![
                            x.dataset.clone(),
                            x.engine.clone(),
                            x.group.to_string(),
                            x.languages.to_string(),
                            format!("{:.1}", report::round1(x.mean_cer)),
                        ]);
                    }
                    buf = csv_bytes(&rows)?;
                }
                ReportFormat::Markdown => {
                    let mut s = String::from("| Dataset | Engine | Group | Languages | Mean CER |\n|---|---|---|---:|---:|\n");
                    for x in &groups {
                        s.push_str(&format!(
                            "| {} | {} | {} | {} | {:.1} |\n",
                            x.dataset,
                            x.engine,
                            x.group,
                            x.languages,
                            report::round1(x.mean_cer)
                        ));
                    }
                    buf = s.into_bytes();
                }
            }
        }
    }
    write_out(a.out.as_deref(), &buf)
}
