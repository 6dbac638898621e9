//! Page-image augmentation (salt & pepper noise, skew, opacity) and
//! styled-document descriptors for an external HTML renderer.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Skew angle used when none is given, in degrees.
pub const DEFAULT_SKEW_DEG: f64 = 5.0;
/// Salt & pepper density used when none is given.
pub const DEFAULT_NOISE_DENSITY: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channels {
    Gray8,
    Rgb8,
}

impl Channels {
    pub fn count(self) -> usize {
        match self {
            Channels::Gray8 => 1,
            Channels::Rgb8 => 3,
        }
    }
}

/// Row-major 8-bit raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageImage {
    width: u32,
    height: u32,
    channels: Channels,
    data: Vec<u8>,
}

impl PageImage {
    pub fn new(width: u32, height: u32, channels: Channels, data: Vec<u8>) -> Result<Self> {
        let expected = width as usize * height as usize * channels.count();
        if data.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "buffer has {} bytes, {width}x{height} {channels:?} needs {expected}",
                data.len()
            )));
        }
        Ok(PageImage {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, channels: Channels, value: u8) -> Self {
        let len = width as usize * height as usize * channels.count();
        PageImage {
            width,
            height,
            channels,
            data: vec![value; len],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> Channels {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let c = self.channels.count();
        let i = (y as usize * self.width as usize + x as usize) * c;
        &self.data[i..i + c]
    }

    /// Σ (255 − v) over all samples.
    pub fn ink(&self) -> u64 {
        self.data.iter().map(|&v| u64::from(255 - v)).sum()
    }

    /// Load a PNG or a binary/ASCII PGM (chosen by extension).
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        if has_extension(path, "pgm") {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            return decode_pgm(&bytes);
        }
        let img = image::open(path)?;
        let (w, h) = (img.width(), img.height());
        if img.color().has_color() {
            PageImage::new(w, h, Channels::Rgb8, img.into_rgb8().into_raw())
        } else {
            PageImage::new(w, h, Channels::Gray8, img.into_luma8().into_raw())
        }
    }

    /// Save as PGM (grayscale only) or PNG, by extension.
    pub fn save(&self, path: &Path) -> Result<()> {
        if has_extension(path, "pgm") {
            let bytes = encode_pgm(self)?;
            return fs::write(path, bytes).map_err(|e| Error::io(path, e));
        }
        let color = match self.channels {
            Channels::Gray8 => image::ExtendedColorType::L8,
            Channels::Rgb8 => image::ExtendedColorType::Rgb8,
        };
        image::save_buffer_with_format(
            path,
            &self.data,
            self.width,
            self.height,
            color,
            image::ImageFormat::Png,
        )?;
        Ok(())
    }
}

fn has_extension(path: &Path, ext: &str) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

pub fn encode_pgm(img: &PageImage) -> Result<Vec<u8>> {
    if img.channels != Channels::Gray8 {
        return Err(Error::InvalidArgument("PGM holds grayscale images only".into()));
    }
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    Ok(out)
}

pub fn decode_pgm(bytes: &[u8]) -> Result<PageImage> {
    let bad = |m: &str| Error::Format(format!("PGM: {m}"));
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Option<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        (pos > start).then(|| String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token(bytes).ok_or_else(|| bad("missing magic"))?;
    let mut num = |what: &str| -> Result<u32> {
        token(bytes)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(&format!("bad {what}")))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(bad("only 8-bit maxval is supported"));
    }
    let n = width as usize * height as usize;
    let scale = |v: u32| -> u8 { ((v * 255 + maxval / 2) / maxval) as u8 };
    let data = match magic.as_str() {
        "P5" => {
            // exactly one whitespace byte separates the header from the raster
            let start = pos + 1;
            let raster = bytes.get(start..start + n).ok_or_else(|| bad("truncated raster"))?;
            raster.iter().map(|&v| scale(u32::from(v).min(maxval))).collect()
        }
        "P2" => {
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                let v = num("sample")?;
                data.push(scale(v.min(maxval)));
            }
            data
        }
        other => return Err(bad(&format!("unsupported magic `{other}`"))),
    };
    PageImage::new(width, height, Channels::Gray8, data)
}

/// Salt & pepper noise.
///
/// Pixels are visited in raster order. Each pixel consumes one uniform
/// `f64` draw; if it is below `density` the pixel is corrupted and one more
/// `bool` draw picks black (`false`) or white (`true`). All channels of a
/// corrupted pixel are set together. Returns the image and the number of
/// corruption draws.
pub fn salt_pepper_counted(img: &PageImage, density: f64, seed: u64) -> Result<(PageImage, usize)> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidArgument(format!("density {density} outside [0, 1]")));
    }
    let mut out = img.clone();
    let c = img.channels.count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corrupted = 0;
    for px in out.data.chunks_exact_mut(c) {
        if rng.gen::<f64>() < density {
            corrupted += 1;
            let v = if rng.gen::<bool>() { 255 } else { 0 };
            px.fill(v);
        }
    }
    Ok((out, corrupted))
}

pub fn salt_pepper(img: &PageImage, density: f64, seed: u64) -> Result<PageImage> {
    salt_pepper_counted(img, density, seed).map(|(img, _)| img)
}

/// Blend toward white: `alpha·v + (1 − alpha)·255`, rounded half up.
pub fn opacity(img: &PageImage, alpha: f64) -> Result<PageImage> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1]")));
    }
    let mut out = img.clone();
    for v in &mut out.data {
        let blended = alpha * f64::from(*v) + (1.0 - alpha) * 255.0;
        *v = (blended + 0.5).floor().clamp(0.0, 255.0) as u8;
    }
    Ok(out)
}

fn quarter_turns(angle_deg: f64) -> Option<u8> {
    let a = angle_deg.rem_euclid(360.0);
    [0.0, 90.0, 180.0, 270.0]
        .iter()
        .position(|q| a == *q)
        .map(|i| i as u8)
}

fn rotate_quarter(img: &PageImage, turns: u8) -> PageImage {
    let (w, h) = (img.width, img.height);
    let c = img.channels.count();
    let (nw, nh) = if turns % 2 == 1 { (h, w) } else { (w, h) };
    let mut data = Vec::with_capacity(img.data.len());
    for y in 0..nh {
        for x in 0..nw {
            // Counter-clockwise turns as seen on screen.
            let (sx, sy) = match turns {
                0 => (x, y),
                1 => (w - 1 - y, x),
                2 => (w - 1 - x, h - 1 - y),
                _ => (y, h - 1 - x),
            };
            data.extend_from_slice(&img.data[(sy as usize * w as usize + sx as usize) * c..][..c]);
        }
    }
    PageImage {
        width: nw,
        height: nh,
        channels: img.channels,
        data,
    }
}

/// Rotate counter-clockwise (as displayed) by `angle_deg` about the centre.
///
/// The canvas grows to hold the whole rotated page; uncovered pixels take
/// `fill`. Multiples of 90° are exact pixel permutations; other angles must
/// satisfy |angle| ≤ 45 and use bilinear resampling.
pub fn skew(img: &PageImage, angle_deg: f64, fill: u8) -> Result<PageImage> {
    if !angle_deg.is_finite() {
        return Err(Error::InvalidArgument("angle must be finite".into()));
    }
    if let Some(turns) = quarter_turns(angle_deg) {
        return Ok(rotate_quarter(img, turns));
    }
    if angle_deg.abs() > 45.0 {
        return Err(Error::InvalidArgument(format!(
            "skew angle {angle_deg} outside [-45, 45] (multiples of 90 are also accepted)"
        )));
    }
    let theta = angle_deg.to_radians();
    let (s, co) = theta.sin_cos();
    let (w, h) = (f64::from(img.width), f64::from(img.height));
    let nw = (w * co.abs() + h * s.abs() - 1e-9).ceil().max(1.0) as u32;
    let nh = (w * s.abs() + h * co.abs() - 1e-9).ceil().max(1.0) as u32;
    let (cx, cy) = (w / 2.0, h / 2.0);
    let (ncx, ncy) = (f64::from(nw) / 2.0, f64::from(nh) / 2.0);
    let c = img.channels.count();
    let iw = img.width as i64;
    let ih = img.height as i64;
    let sample = |x: i64, y: i64, ch: usize| -> f64 {
        if x < 0 || y < 0 || x >= iw || y >= ih {
            f64::from(fill)
        } else {
            f64::from(img.data[(y as usize * img.width as usize + x as usize) * c + ch])
        }
    };
    let mut data = Vec::with_capacity(nw as usize * nh as usize * c);
    for oy in 0..nh {
        for ox in 0..nw {
            let px = f64::from(ox) + 0.5 - ncx;
            let py = f64::from(oy) + 0.5 - ncy;
            let sx = px * co - py * s + cx - 0.5;
            let sy = px * s + py * co + cy - 0.5;
            let x0 = sx.floor();
            let y0 = sy.floor();
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as i64, y0 as i64);
            for ch in 0..c {
                let top = sample(x0, y0, ch) * (1.0 - fx) + sample(x0 + 1, y0, ch) * fx;
                let bottom = sample(x0, y0 + 1, ch) * (1.0 - fx) + sample(x0 + 1, y0 + 1, ch) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                data.push((v + 0.5).floor().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Ok(PageImage {
        width: nw,
        height: nh,
        channels: img.channels,
        data,
    })
}

/// Centre crop; used to compare a round-tripped rotation with its source.
pub fn crop_center(img: &PageImage, width: u32, height: u32) -> Result<PageImage> {
    if width > img.width || height > img.height {
        return Err(Error::InvalidArgument("crop larger than image".into()));
    }
    let x0 = (img.width - width) / 2;
    let y0 = (img.height - height) / 2;
    let c = img.channels.count();
    let mut data = Vec::with_capacity(width as usize * height as usize * c);
    for y in y0..y0 + height {
        let start = (y as usize * img.width as usize + x0 as usize) * c;
        data.extend_from_slice(&img.data[start..start + width as usize * c]);
    }
    PageImage::new(width, height, img.channels, data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleSpec {
    pub font_family: String,
    /// Points.
    pub font_size: f64,
    pub bold: bool,
    pub italic: bool,
    /// em units.
    pub letter_spacing: f64,
    pub opacity: f64,
    pub color: [u8; 3],
}

impl Default for StyleSpec {
    fn default() -> Self {
        StyleSpec {
            font_family: "Times New Roman".into(),
            font_size: 12.0,
            bold: false,
            italic: false,
            letter_spacing: 0.0,
            opacity: 1.0,
            color: [0, 0, 0],
        }
    }
}

/// Default fonts per script tag, first choice first.
pub static SCRIPT_FONTS: &[(&str, &[&str])] = &[
    ("arabic", &["Times New Roman", "Arial"]),
    ("cyrillic", &["Arial", "Verdana"]),
    ("devanagari", &["Noto Sans Devanagari"]),
    ("hant", &["PMingLiu"]),
    ("latin", &["Times New Roman"]),
    ("pashto", &["Calibri"]),
    ("thai", &["Browalia New"]),
    ("urdu", &["Jameel Noori Nastaleeq"]),
];

const RTL_SCRIPTS: &[&str] = &["arabic", "hebrew", "pashto", "urdu"];

pub fn fonts_for_script(tag: &str) -> Option<&'static [&'static str]> {
    let tag = tag.trim().to_ascii_lowercase();
    SCRIPT_FONTS
        .iter()
        .find(|(t, _)| *t == tag)
        .map(|(_, fonts)| *fonts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StyledDocument {
    pub html: String,
    pub warnings: Vec<String>,
}

fn escape_html(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

fn css_string(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Self-contained HTML page rendering `text` with `style`.
///
/// A known `script` tag selects the font list from [`SCRIPT_FONTS`]; an
/// unknown tag falls back to `style.font_family` and adds a warning.
pub fn emit_styled_document(text: &str, style: &StyleSpec, script: Option<&str>) -> Result<StyledDocument> {
    if !(style.font_size > 0.0 && style.font_size.is_finite()) {
        return Err(Error::InvalidArgument("font size must be > 0".into()));
    }
    if !(style.opacity > 0.0 && style.opacity <= 1.0) {
        return Err(Error::InvalidArgument("opacity must be in (0, 1]".into()));
    }
    if !style.letter_spacing.is_finite() {
        return Err(Error::InvalidArgument("letter spacing must be finite".into()));
    }
    let mut warnings = Vec::new();
    let fonts: Vec<String> = match script {
        None => vec![css_string(&style.font_family)],
        Some(tag) => match fonts_for_script(tag) {
            Some(list) => list.iter().map(|f| css_string(f)).collect(),
            None => {
                warnings.push(format!(
                    "unknown script `{tag}`; using font family `{}`",
                    style.font_family
                ));
                vec![css_string(&style.font_family)]
            }
        },
    };
    let dir = match script {
        Some(tag) if RTL_SCRIPTS.contains(&tag.trim().to_ascii_lowercase().as_str()) => "rtl",
        _ => "ltr",
    };
    let [r, g, b] = style.color;
    let mut html = String::new();
    html.push_str("<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<style>\n");
    html.push_str(".page {\n");
    let _ = writeln!(html, "  font-family: {};", fonts.join(", "));
    let _ = writeln!(html, "  font-size: {}pt;", style.font_size);
    let _ = writeln!(html, "  font-weight: {};", if style.bold { "bold" } else { "normal" });
    let _ = writeln!(html, "  font-style: {};", if style.italic { "italic" } else { "normal" });
    let _ = writeln!(html, "  letter-spacing: {}em;", style.letter_spacing);
    let _ = writeln!(html, "  opacity: {};", style.opacity);
    let _ = writeln!(html, "  color: #{r:02x}{g:02x}{b:02x};");
    html.push_str("  white-space: pre-wrap;\n}\n</style>\n</head>\n");
    let _ = write!(
        html,
        "<body>\n<div class=\"page\" dir=\"{dir}\">{}</div>\n</body>\n</html>\n",
        escape_html(text)
    );
    Ok(StyledDocument { html, warnings })
}
