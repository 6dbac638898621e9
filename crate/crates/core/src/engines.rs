//! OCR engine adapters: a sidecar-transcript mock, an external command, an
//! HTTP service, and a record/replay cache wrapping any of them.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{Read, Write as _};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wait_timeout::ChildExt;

use crate::error::{EngineError, Error, Result};
use crate::errormodel::ErrorModel;
use crate::inject::{self, InjectionConfig};
use crate::textmetrics::edit_distance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    ExternalCommand,
    HttpService,
    Mock,
}

#[derive(Debug, Clone, Copy)]
pub struct RecognizeRequest<'a> {
    pub image: &'a Path,
    pub language: &'a str,
    pub article_id: &'a str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OcrResult {
    pub engine: String,
    pub language: String,
    pub article_id: String,
    /// Verbatim engine output; may be empty.
    pub hypothesis_text: String,
    pub latency_ms: u64,
}

pub trait OcrEngine: Send + Sync {
    fn name(&self) -> &str;
    fn kind(&self) -> EngineKind;
    fn supports(&self, language: &str) -> bool;
    fn recognize(&self, request: &RecognizeRequest<'_>) -> Result<OcrResult, EngineError>;
}

fn unavailable(engine: &str, detail: impl Into<String>) -> EngineError {
    EngineError::Unavailable {
        engine: engine.to_string(),
        detail: detail.into(),
    }
}

fn check_supported(engine: &dyn OcrEngine, language: &str) -> Result<(), EngineError> {
    if engine.supports(language) {
        Ok(())
    } else {
        Err(EngineError::UnsupportedLanguage {
            engine: engine.name().to_string(),
            language: language.to_string(),
        })
    }
}

fn elapsed_ms(start: Instant) -> u64 {
    start.elapsed().as_millis().try_into().unwrap_or(u64::MAX)
}

// ---------------------------------------------------------------------------
// Language codes

/// ISO 639-3 code, Tesseract model, Google Vision language hint.
static CODE_TABLE: &[(&str, &str, &str)] = &[
    ("amh", "amh", "am"),
    ("ara", "ara", "ar"),
    ("ast", "script/Latin", "ast"),
    ("bel", "bel", "be"),
    ("ben", "ben", "bn"),
    ("bul", "bul", "bg"),
    ("ceb", "ceb", "ceb"),
    ("ckb", "script/Arabic", "ckb"),
    ("ell", "ell", "el"),
    ("eng", "eng", "eng"),
    ("ful", "script/Latin", "ff"),
    ("guj", "guj", "gu"),
    ("heb", "heb", "he"),
    ("hin", "hin", "hi"),
    ("hye", "hye", "hy"),
    ("isl", "isl", "is"),
    ("jpn", "jpn", "ja"),
    ("kan", "kan", "kn"),
    ("kat", "kat", "ka"),
    ("kaz", "kaz", "kk"),
    ("khm", "khm", "km"),
    ("kir", "kir", "ky"),
    ("kor", "kor", "ko"),
    ("lao", "lao", "lo"),
    ("lin", "script/Latin", "ln"),
    ("lug", "script/Latin", "lg"),
    ("mal", "mal", "ml"),
    ("mar", "mar", "mr"),
    ("mkd", "mkd", "mk"),
    ("mon", "mon", "mn"),
    ("mri", "mri", "mi"),
    ("mya", "mya", "my"),
    ("npi", "nep", "ne"),
    ("nya", "script/Latin", "ny"),
    ("orm", "script/Latin", "om"),
    ("pan", "pan", "pa"),
    ("pol", "pol", "pl"),
    ("por", "por", "pt"),
    ("pus", "pus", "ps"),
    ("ron", "ron", "ro"),
    ("rus", "rus", "ru"),
    ("slk", "slk", "sk"),
    ("slv", "slv", "sl"),
    ("sna", "script/Latin", "sn"),
    ("som", "script/Latin", "so"),
    ("srp", "srp", "sr"),
    ("swe", "swe", "sv"),
    ("swh", "swa", "sw"),
    ("tam", "tam", "ta"),
    ("tel", "tel", "te"),
    ("tgk", "tgk", "tg"),
    ("tha", "tha", "th"),
    ("tur", "tur", "tr"),
    ("ukr", "ukr", "uk"),
    ("umb", "script/Latin", "umb"),
    ("urd", "urd", "ur"),
    ("uzb", "uzb", "uz"),
    ("vie", "vie", "vi"),
    ("wol", "script/Latin", "wo"),
    ("zho", "chi_sim", "zh"),
    ("zul", "script/Latin", "zu"),
];

/// Engines with a shipped code table.
pub const MAPPED_ENGINES: [&str; 3] = ["tesseract", "google-vision", "mock"];

fn canonical_engine(engine: &str) -> Option<&'static str> {
    match engine.trim().to_ascii_lowercase().as_str() {
        "tesseract" | "command" | "external" => Some("tesseract"),
        "google-vision" | "google" | "gcv" | "http" => Some("google-vision"),
        "mock" => Some("mock"),
        _ => None,
    }
}

/// ISO 639-3 → engine-specific code. Unknown codes fail with the three
/// nearest known codes by edit distance.
pub fn map_language_code(iso: &str, engine: &str) -> Result<String> {
    let table = canonical_engine(engine).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "no code table for engine `{engine}` (known: {})",
            MAPPED_ENGINES.join(", ")
        ))
    })?;
    match CODE_TABLE.binary_search_by(|row| row.0.cmp(iso)) {
        Ok(i) => {
            let (code, tess, google) = CODE_TABLE[i];
            Ok(match table {
                "tesseract" => tess,
                "google-vision" => google,
                _ => code,
            }
            .to_string())
        }
        Err(_) => {
            let probe: Vec<char> = iso.chars().collect();
            let mut scored: Vec<(usize, &str)> = CODE_TABLE
                .iter()
                .map(|row| (edit_distance(&probe, &row.0.chars().collect::<Vec<_>>()), row.0))
                .collect();
            scored.sort();
            Err(Error::UnknownMapping {
                code: iso.to_string(),
                engine: table.to_string(),
                nearest: scored.iter().take(3).map(|(_, c)| c.to_string()).collect(),
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Mock

/// Optional noise applied by [`MockEngine`] to each transcript.
#[derive(Debug, Clone)]
pub struct MockNoise {
    pub model: ErrorModel,
    pub config: InjectionConfig,
}

/// Returns the sidecar transcript `<image stem>.gt.txt`, optionally noised.
///
/// Noise seeds are `config.seed` mixed with a hash of the article id, so
/// output depends on neither call order nor thread count.
#[derive(Debug)]
pub struct MockEngine {
    name: String,
    languages: Option<BTreeSet<String>>,
    noise: Option<MockNoise>,
    delay: Duration,
    in_flight: AtomicUsize,
    peak: AtomicUsize,
    calls: AtomicUsize,
}

impl MockEngine {
    pub fn identity() -> Self {
        MockEngine {
            name: "mock".into(),
            languages: None,
            noise: None,
            delay: Duration::ZERO,
            in_flight: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn with_noise(model: ErrorModel, config: InjectionConfig) -> Self {
        MockEngine {
            noise: Some(MockNoise { model, config }),
            ..MockEngine::identity()
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn languages<I: IntoIterator<Item = S>, S: Into<String>>(mut self, langs: I) -> Self {
        self.languages = Some(langs.into_iter().map(Into::into).collect());
        self
    }

    /// Sleep this long inside each call (makes concurrency observable).
    pub fn delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    /// Highest number of simultaneous `recognize` calls seen.
    pub fn peak_concurrency(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn sidecar_path(image: &Path) -> PathBuf {
        let stem = image.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        image.with_file_name(format!("{stem}.gt.txt"))
    }

    fn article_seed(seed: u64, article_id: &str) -> u64 {
        let digest = Sha256::digest(article_id.as_bytes());
        let mut first = [0u8; 8];
        first.copy_from_slice(&digest[..8]);
        seed ^ u64::from_le_bytes(first)
    }

    fn transcribe(&self, request: &RecognizeRequest<'_>) -> Result<String, EngineError> {
        let sidecar = Self::sidecar_path(request.image);
        let text = fs::read_to_string(&sidecar)
            .map_err(|e| unavailable(&self.name, format!("{}: {e}", sidecar.display())))?;
        let text = text.strip_suffix('\n').unwrap_or(&text).to_string();
        match &self.noise {
            None => Ok(text),
            Some(noise) => {
                let config = InjectionConfig {
                    seed: Self::article_seed(noise.config.seed, request.article_id),
                    ..noise.config
                };
                inject::inject(&text, &noise.model, &config)
                    .map(|r| r.noisy_text)
                    .map_err(|e| unavailable(&self.name, e.to_string()))
            }
        }
    }
}

impl OcrEngine for MockEngine {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> EngineKind {
        EngineKind::Mock
    }

    fn supports(&self, language: &str) -> bool {
        self.languages.as_ref().is_none_or(|l| l.contains(language))
    }

    fn recognize(&self, request: &RecognizeRequest<'_>) -> Result<OcrResult, EngineError> {
        check_supported(self, request.language)?;
        let start = Instant::now();
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        self.calls.fetch_add(1, Ordering::SeqCst);
        if !self.delay.is_zero() {
            thread::sleep(self.delay);
        }
        let text = self.transcribe(request);
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        Ok(OcrResult {
            engine: self.name.clone(),
            language: request.language.to_string(),
            article_id: request.article_id.to_string(),
            hypothesis_text: text?,
            latency_ms: elapsed_ms(start),
        })
    }
}

// ---------------------------------------------------------------------------
// External command

/// Runs `program args…` per image and reads UTF-8 text from stdout.
///
/// `{image}` and `{lang}` in arguments are replaced by the image path and
/// the language code (mapped through `code_table` when set).
#[derive(Debug, Clone)]
pub struct ExternalCommandEngine {
    pub name: String,
    pub program: PathBuf,
    pub args: Vec<String>,
    pub timeout: Duration,
    pub languages: Option<BTreeSet<String>>,
    pub code_table: Option<String>,
}

impl ExternalCommandEngine {
    pub fn new(name: impl Into<String>, program: impl Into<PathBuf>, args: Vec<String>) -> Self {
        ExternalCommandEngine {
            name: name.into(),
            program: program.into(),
            args,
            timeout: Duration::from_secs(120),
            languages: None,
            code_table: None,
        }
    }

    /// `tesseract <image> stdout -l <lang>` with the Tesseract code table.
    pub fn tesseract(program: impl Into<PathBuf>) -> Self {
        let mut e = ExternalCommandEngine::new(
            "tesseract",
            program,
            ["{image}", "stdout", "-l", "{lang}"].map(String::from).to_vec(),
        );
        e.code_table = Some("tesseract".into());
        e
    }

    fn engine_code(&self, language: &str) -> Result<String, EngineError> {
        match &self.code_table {
            None => Ok(language.to_string()),
            Some(table) => map_language_code(language, table).map_err(|_| EngineError::UnsupportedLanguage {
                engine: self.name.clone(),
                language: language.to_string(),
            }),
        }
    }
}

impl OcrEngine for ExternalCommandEngine {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> EngineKind {
        EngineKind::ExternalCommand
    }

    fn supports(&self, language: &str) -> bool {
        let listed = self.languages.as_ref().is_none_or(|l| l.contains(language));
        listed && self.engine_code(language).is_ok()
    }

    fn recognize(&self, request: &RecognizeRequest<'_>) -> Result<OcrResult, EngineError> {
        check_supported(self, request.language)?;
        let code = self.engine_code(request.language)?;
        let image = request.image.to_string_lossy();
        let args: Vec<String> = self
            .args
            .iter()
            .map(|a| a.replace("{image}", &image).replace("{lang}", &code))
            .collect();
        let start = Instant::now();
        let mut child = Command::new(&self.program)
            .args(&args)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| unavailable(&self.name, format!("cannot start {}: {e}", self.program.display())))?;
        let mut stdout = child.stdout.take().expect("piped stdout");
        let mut stderr = child.stderr.take().expect("piped stderr");
        let out_reader = thread::spawn(move || {
            let mut buf = Vec::new();
            stdout.read_to_end(&mut buf).map(|_| buf)
        });
        let err_reader = thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stderr.read_to_end(&mut buf);
            buf
        });
        let status = match child.wait_timeout(self.timeout) {
            Ok(Some(status)) => status,
            Ok(None) => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(EngineError::Timeout {
                    engine: self.name.clone(),
                    millis: self.timeout.as_millis().try_into().unwrap_or(u64::MAX),
                });
            }
            Err(e) => return Err(unavailable(&self.name, format!("wait failed: {e}"))),
        };
        let stdout = out_reader
            .join()
            .map_err(|_| unavailable(&self.name, "stdout reader panicked"))?
            .map_err(|e| unavailable(&self.name, format!("reading stdout: {e}")))?;
        let stderr = err_reader.join().unwrap_or_default();
        if !status.success() {
            return Err(unavailable(
                &self.name,
                format!("{status}: {}", String::from_utf8_lossy(&stderr).trim()),
            ));
        }
        let text = String::from_utf8(stdout).map_err(|_| unavailable(&self.name, "stdout is not UTF-8"))?;
        Ok(OcrResult {
            engine: self.name.clone(),
            language: request.language.to_string(),
            article_id: request.article_id.to_string(),
            hypothesis_text: text,
            latency_ms: elapsed_ms(start),
        })
    }
}

// ---------------------------------------------------------------------------
// HTTP

/// POSTs image bytes and extracts the text at a JSON pointer in the reply.
///
/// The bearer token, if any, is read from the environment variable named by
/// `token_env` on every call. The language goes in the `lang` query
/// parameter along with any `options`. Transport errors, 429 and 5xx are
/// retried with exponential backoff up to `max_attempts` total attempts.
#[derive(Debug)]
pub struct HttpEngine {
    pub name: String,
    pub url: String,
    pub token_env: Option<String>,
    pub text_pointer: String,
    pub timeout: Duration,
    pub max_attempts: u32,
    pub backoff: Duration,
    /// Minimum spacing between requests.
    pub min_interval: Duration,
    pub options: BTreeMap<String, String>,
    pub languages: Option<BTreeSet<String>>,
    pub code_table: Option<String>,
    next_slot: Mutex<Option<Instant>>,
}

impl HttpEngine {
    pub fn new(name: impl Into<String>, url: impl Into<String>, text_pointer: impl Into<String>) -> Self {
        HttpEngine {
            name: name.into(),
            url: url.into(),
            token_env: None,
            text_pointer: text_pointer.into(),
            timeout: Duration::from_secs(60),
            max_attempts: 3,
            backoff: Duration::from_millis(500),
            min_interval: Duration::ZERO,
            options: BTreeMap::new(),
            languages: None,
            code_table: None,
            next_slot: Mutex::new(None),
        }
    }

    fn wait_for_slot(&self) {
        if self.min_interval.is_zero() {
            return;
        }
        let wait = {
            let mut slot = self.next_slot.lock().unwrap_or_else(|p| p.into_inner());
            let now = Instant::now();
            let at = slot.map_or(now, |s| s.max(now));
            *slot = Some(at + self.min_interval);
            at - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }

    fn engine_code(&self, language: &str) -> Result<String, EngineError> {
        match &self.code_table {
            None => Ok(language.to_string()),
            Some(table) => map_language_code(language, table).map_err(|_| EngineError::UnsupportedLanguage {
                engine: self.name.clone(),
                language: language.to_string(),
            }),
        }
    }

    fn extract(&self, body: &str) -> Result<String, EngineError> {
        let json: serde_json::Value =
            serde_json::from_str(body).map_err(|e| unavailable(&self.name, format!("bad JSON reply: {e}")))?;
        match json.pointer(&self.text_pointer) {
            Some(serde_json::Value::String(s)) => Ok(s.clone()),
            Some(serde_json::Value::Null) => Ok(String::new()),
            _ => Err(unavailable(
                &self.name,
                format!("reply has no string at `{}`", self.text_pointer),
            )),
        }
    }
}

impl OcrEngine for HttpEngine {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> EngineKind {
        EngineKind::HttpService
    }

    fn supports(&self, language: &str) -> bool {
        let listed = self.languages.as_ref().is_none_or(|l| l.contains(language));
        listed && self.engine_code(language).is_ok()
    }

    fn recognize(&self, request: &RecognizeRequest<'_>) -> Result<OcrResult, EngineError> {
        check_supported(self, request.language)?;
        let code = self.engine_code(request.language)?;
        let bytes = fs::read(request.image)
            .map_err(|e| unavailable(&self.name, format!("{}: {e}", request.image.display())))?;
        let token = match &self.token_env {
            None => None,
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| unavailable(&self.name, format!("environment variable {var} is not set")))?,
            ),
        };
        let agent = ureq::AgentBuilder::new().timeout(self.timeout).build();
        let start = Instant::now();
        let mut last_error = String::new();
        for attempt in 0..self.max_attempts.max(1) {
            if attempt > 0 {
                thread::sleep(self.backoff * 2u32.pow(attempt - 1));
            }
            self.wait_for_slot();
            let mut req = agent
                .post(&self.url)
                .query("lang", &code)
                .set("Content-Type", "application/octet-stream");
            for (k, v) in &self.options {
                req = req.query(k, v);
            }
            if let Some(t) = &token {
                req = req.set("Authorization", &format!("Bearer {t}"));
            }
            match req.send_bytes(&bytes) {
                Ok(resp) => {
                    let body = resp
                        .into_string()
                        .map_err(|e| unavailable(&self.name, format!("reading reply: {e}")))?;
                    return Ok(OcrResult {
                        engine: self.name.clone(),
                        language: request.language.to_string(),
                        article_id: request.article_id.to_string(),
                        hypothesis_text: self.extract(&body)?,
                        latency_ms: elapsed_ms(start),
                    });
                }
                Err(ureq::Error::Status(code, resp)) => {
                    let body = resp.into_string().unwrap_or_default();
                    last_error = format!("HTTP {code}: {}", body.trim());
                    if code != 429 && code < 500 {
                        break;
                    }
                }
                Err(ureq::Error::Transport(t)) => last_error = t.to_string(),
            }
        }
        Err(unavailable(&self.name, last_error))
    }
}

// ---------------------------------------------------------------------------
// Cache

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheMode {
    /// Serve hits; call the engine and store the transcript on a miss.
    Record,
    /// Serve hits; a miss is an error. No engine is called.
    Replay,
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    engine: String,
    language: String,
    image_sha256: String,
    hypothesis_text: String,
    latency_ms: u64,
}

/// Content-addressed transcript cache keyed by (engine name, image bytes,
/// language). Entries are written atomically, so concurrent writers at
/// worst store the same entry twice.
pub struct CachedEngine {
    name: String,
    inner: Option<Box<dyn OcrEngine>>,
    dir: PathBuf,
    mode: CacheMode,
}

impl CachedEngine {
    pub fn record(inner: Box<dyn OcrEngine>, dir: impl Into<PathBuf>) -> Self {
        CachedEngine {
            name: inner.name().to_string(),
            inner: Some(inner),
            dir: dir.into(),
            mode: CacheMode::Record,
        }
    }

    /// Replay with the engine attached (it is never called).
    pub fn replay(inner: Box<dyn OcrEngine>, dir: impl Into<PathBuf>) -> Self {
        CachedEngine {
            mode: CacheMode::Replay,
            ..CachedEngine::record(inner, dir)
        }
    }

    /// Replay recordings of `engine_name` with no engine at all.
    pub fn replay_only(engine_name: impl Into<String>, dir: impl Into<PathBuf>) -> Self {
        CachedEngine {
            name: engine_name.into(),
            inner: None,
            dir: dir.into(),
            mode: CacheMode::Replay,
        }
    }

    pub fn mode(&self) -> CacheMode {
        self.mode
    }

    pub fn cache_key(engine: &str, image_sha256: &str, language: &str) -> String {
        let mut h = Sha256::new();
        for part in [engine, image_sha256, language] {
            h.update(part.as_bytes());
            h.update([0u8]);
        }
        hex(&h.finalize())
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    fn store(&self, path: &Path, entry: &CacheEntry) -> std::io::Result<()> {
        let parent = path.parent().expect("entry path has a parent");
        fs::create_dir_all(parent)?;
        let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
        let text = serde_json::to_string_pretty(entry).map_err(std::io::Error::other)?;
        tmp.write_all(text.as_bytes())?;
        tmp.persist(path).map_err(|e| e.error)?;
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl OcrEngine for CachedEngine {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> EngineKind {
        self.inner.as_ref().map_or(EngineKind::Mock, |e| e.kind())
    }

    fn supports(&self, language: &str) -> bool {
        self.inner.as_ref().is_none_or(|e| e.supports(language))
    }

    fn recognize(&self, request: &RecognizeRequest<'_>) -> Result<OcrResult, EngineError> {
        let bytes = fs::read(request.image)
            .map_err(|e| unavailable(&self.name, format!("{}: {e}", request.image.display())))?;
        let image_sha256 = hex(&Sha256::digest(&bytes));
        let key = Self::cache_key(&self.name, &image_sha256, request.language);
        let path = self.entry_path(&key);
        if let Ok(text) = fs::read_to_string(&path) {
            let entry: CacheEntry = serde_json::from_str(&text)
                .map_err(|e| unavailable(&self.name, format!("corrupt cache entry {}: {e}", path.display())))?;
            return Ok(OcrResult {
                engine: self.name.clone(),
                language: request.language.to_string(),
                article_id: request.article_id.to_string(),
                hypothesis_text: entry.hypothesis_text,
                latency_ms: entry.latency_ms,
            });
        }
        let inner = match (self.mode, &self.inner) {
            (CacheMode::Record, Some(inner)) => inner,
            _ => {
                return Err(EngineError::CacheMiss {
                    engine: self.name.clone(),
                    image: image_sha256,
                    language: request.language.to_string(),
                })
            }
        };
        let result = inner.recognize(request)?;
        let entry = CacheEntry {
            engine: self.name.clone(),
            language: request.language.to_string(),
            image_sha256,
            hypothesis_text: result.hypothesis_text.clone(),
            latency_ms: result.latency_ms,
        };
        self.store(&path, &entry)
            .map_err(|e| unavailable(&self.name, format!("writing cache {}: {e}", path.display())))?;
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::errormodel::ErrorKey;

    fn page(dir: &Path, stem: &str, transcript: &str) -> PathBuf {
        let img = dir.join(format!("{stem}.png"));
        fs::write(&img, format!("fake image {stem}")).unwrap();
        fs::write(dir.join(format!("{stem}.gt.txt")), transcript).unwrap();
        img
    }

    fn req<'a>(image: &'a Path, language: &'a str) -> RecognizeRequest<'a> {
        RecognizeRequest {
            image,
            language,
            article_id: "a1",
        }
    }

    #[test]
    fn code_table_is_sorted_and_complete() {
        assert!(CODE_TABLE.windows(2).all(|w| w[0].0 < w[1].0));
        for info in crate::languages::LANGUAGES {
            assert!(map_language_code(info.code, "tesseract").is_ok(), "{}", info.code);
        }
    }

    #[test]
    fn mapping_examples() {
        assert_eq!(map_language_code("hin", "tesseract").unwrap(), "hin");
        assert_eq!(map_language_code("npi", "tesseract").unwrap(), "nep");
        for engine in MAPPED_ENGINES {
            assert_eq!(map_language_code("eng", engine).unwrap(), "eng");
        }
        match map_language_code("zzz", "mock") {
            Err(Error::UnknownMapping { nearest, .. }) => assert_eq!(nearest.len(), 3),
            other => panic!("{other:?}"),
        }
        match map_language_code("hinn", "tesseract") {
            Err(Error::UnknownMapping { nearest, .. }) => assert_eq!(nearest[0], "hin"),
            other => panic!("{other:?}"),
        }
        assert!(map_language_code("hin", "abbyy").is_err());
    }

    #[test]
    fn mock_identity_reads_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let img = page(dir.path(), "p1", "नमस्ते दुनिया\n");
        let r = MockEngine::identity().recognize(&req(&img, "hin")).unwrap();
        assert_eq!(r.hypothesis_text, "नमस्ते दुनिया");
    }

    #[test]
    fn mock_language_restriction() {
        let dir = tempfile::tempdir().unwrap();
        let img = page(dir.path(), "p1", "x");
        let e = MockEngine::identity().languages(["hin"]);
        assert!(matches!(
            e.recognize(&req(&img, "khm")),
            Err(EngineError::UnsupportedLanguage { .. })
        ));
    }

    #[test]
    fn mock_noise_is_deterministic_per_article() {
        let dir = tempfile::tempdir().unwrap();
        let text = "abcdefghij".repeat(20);
        let img = page(dir.path(), "p1", &text);
        let model = ErrorModel::from_counts("x", [(ErrorKey::substitute('a', 'o'), 1)]);
        let config = InjectionConfig {
            target_cer: 5.0,
            seed: 9,
            ..Default::default()
        };
        let e = MockEngine::with_noise(model, config);
        let a = e.recognize(&req(&img, "eng")).unwrap().hypothesis_text;
        let b = e.recognize(&req(&img, "eng")).unwrap().hypothesis_text;
        assert_eq!(a, b);
        assert_ne!(a, text);
    }

    #[test]
    fn missing_binary_is_unavailable() {
        let dir = tempfile::tempdir().unwrap();
        let img = page(dir.path(), "p1", "x");
        let e = ExternalCommandEngine::new("nope", "/nonexistent/ocr-binary", vec!["{image}".into()]);
        assert!(matches!(
            e.recognize(&req(&img, "eng")),
            Err(EngineError::Unavailable { .. })
        ));
    }

    #[cfg(unix)]
    #[test]
    fn external_command_substitutes_arguments() {
        let dir = tempfile::tempdir().unwrap();
        let img = page(dir.path(), "p1", "x");
        let mut e = ExternalCommandEngine::new("echo", "sh", vec!["-c".into(), "printf %s {lang}".into()]);
        e.code_table = Some("tesseract".into());
        let r = e.recognize(&req(&img, "npi")).unwrap();
        assert_eq!(r.hypothesis_text, "nep");
    }

    #[cfg(unix)]
    #[test]
    fn external_command_timeout_and_failure() {
        let dir = tempfile::tempdir().unwrap();
        let img = page(dir.path(), "p1", "x");
        let mut slow = ExternalCommandEngine::new("slow", "sleep", vec!["5".into()]);
        slow.timeout = Duration::from_millis(100);
        assert!(matches!(slow.recognize(&req(&img, "eng")), Err(EngineError::Timeout { .. })));
        let failing = ExternalCommandEngine::new("fail", "sh", vec!["-c".into(), "echo boom >&2; exit 3".into()]);
        match failing.recognize(&req(&img, "eng")) {
            Err(EngineError::Unavailable { detail, .. }) => assert!(detail.contains("boom")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cache_record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let cache = dir.path().join("cache");
        let img = page(dir.path(), "p1", "hello");
        let rec = CachedEngine::record(Box::new(MockEngine::identity()), &cache);
        assert_eq!(rec.recognize(&req(&img, "eng")).unwrap().hypothesis_text, "hello");
        // the sidecar changes, the cached transcript does not
        fs::write(dir.path().join("p1.gt.txt"), "changed").unwrap();
        let replay = CachedEngine::replay_only("mock", &cache);
        assert_eq!(replay.recognize(&req(&img, "eng")).unwrap().hypothesis_text, "hello");
        assert!(matches!(
            replay.recognize(&req(&img, "hin")),
            Err(EngineError::CacheMiss { .. })
        ));
    }

    #[test]
    fn cache_key_depends_on_all_parts() {
        let k = CachedEngine::cache_key("a", "b", "c");
        assert_ne!(k, CachedEngine::cache_key("a", "b", "d"));
        assert_ne!(k, CachedEngine::cache_key("ab", "", "c"));
        assert_eq!(k.len(), 64);
    }

    /// Serves canned responses, one per connection.
    fn serve(responses: Vec<(u16, &'static str)>) -> (String, thread::JoinHandle<Vec<String>>) {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/ocr", listener.local_addr().unwrap());
        let handle = thread::spawn(move || {
            let mut requests = Vec::new();
            for (status, body) in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut buf = vec![0u8; 65536];
                let mut got = Vec::new();
                loop {
                    let n = stream.read(&mut buf).unwrap();
                    got.extend_from_slice(&buf[..n]);
                    let text = String::from_utf8_lossy(&got).to_string();
                    if let Some(end) = text.find("\r\n\r\n") {
                        let len = text
                            .lines()
                            .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse::<usize>().unwrap()))
                            .unwrap_or(0);
                        if got.len() >= end + 4 + len {
                            requests.push(text);
                            break;
                        }
                    }
                    if n == 0 {
                        break;
                    }
                }
                let reply = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(reply.as_bytes()).unwrap();
            }
            requests
        });
        (url, handle)
    }

    #[test]
    fn http_retries_then_extracts_pointer() {
        let dir = tempfile::tempdir().unwrap();
        let img = page(dir.path(), "p1", "x");
        let (url, server) = serve(vec![(503, "{}"), (200, r#"{"result":{"text":"ሰላም"}}"#)]);
        let mut e = HttpEngine::new("svc", url, "/result/text");
        e.backoff = Duration::from_millis(10);
        e.token_env = Some("OCRBENCH_TEST_TOKEN_A".into());
        std::env::set_var("OCRBENCH_TEST_TOKEN_A", "s3cret");
        let r = e.recognize(&req(&img, "amh")).unwrap();
        assert_eq!(r.hypothesis_text, "ሰላም");
        let requests = server.join().unwrap();
        assert_eq!(requests.len(), 2);
        assert!(requests[1].contains("lang=amh"));
        assert!(requests[1].contains("Bearer s3cret"));
    }

    #[test]
    fn http_gives_up_after_three_attempts() {
        let dir = tempfile::tempdir().unwrap();
        let img = page(dir.path(), "p1", "x");
        let (url, server) = serve(vec![(500, "{}"), (500, "{}"), (500, "{}")]);
        let mut e = HttpEngine::new("svc", url, "/text");
        e.backoff = Duration::from_millis(5);
        assert!(matches!(e.recognize(&req(&img, "eng")), Err(EngineError::Unavailable { .. })));
        assert_eq!(server.join().unwrap().len(), 3);
    }

    #[test]
    fn http_client_errors_are_not_retried() {
        let dir = tempfile::tempdir().unwrap();
        let img = page(dir.path(), "p1", "x");
        let (url, server) = serve(vec![(401, "{}")]);
        let e = HttpEngine::new("svc", url, "/text");
        match e.recognize(&req(&img, "eng")) {
            Err(EngineError::Unavailable { detail, .. }) => assert!(detail.contains("401")),
            other => panic!("{other:?}"),
        }
        assert_eq!(server.join().unwrap().len(), 1);
    }

    #[test]
    fn http_missing_token_variable() {
        let dir = tempfile::tempdir().unwrap();
        let img = page(dir.path(), "p1", "x");
        let mut e = HttpEngine::new("svc", "http://127.0.0.1:9/", "/text");
        e.token_env = Some("OCRBENCH_TEST_TOKEN_UNSET".into());
        assert!(matches!(e.recognize(&req(&img, "eng")), Err(EngineError::Unavailable { .. })));
    }
}
