//! Embedded table of benchmark languages: ISO 639-3 code, display name,
//! script and script group.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ScriptGroup {
    Latin,
    Cyrillic,
    #[serde(rename = "Perso-Arabic")]
    PersoArabic,
    #[serde(rename = "North Indic")]
    NorthIndic,
    #[serde(rename = "South Indic")]
    SouthIndic,
    #[serde(rename = "SEA")]
    Sea,
    #[serde(rename = "CJK")]
    Cjk,
    Other,
}

impl ScriptGroup {
    pub const ALL: [ScriptGroup; 8] = [
        ScriptGroup::Latin,
        ScriptGroup::Cyrillic,
        ScriptGroup::PersoArabic,
        ScriptGroup::NorthIndic,
        ScriptGroup::SouthIndic,
        ScriptGroup::Sea,
        ScriptGroup::Cjk,
        ScriptGroup::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScriptGroup::Latin => "Latin",
            ScriptGroup::Cyrillic => "Cyrillic",
            ScriptGroup::PersoArabic => "Perso-Arabic",
            ScriptGroup::NorthIndic => "North Indic",
            ScriptGroup::SouthIndic => "South Indic",
            ScriptGroup::Sea => "SEA",
            ScriptGroup::Cjk => "CJK",
            ScriptGroup::Other => "Other",
        }
    }
}

impl fmt::Display for ScriptGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScriptGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        // "Indo-Aryan" and "Dravidian" are accepted as aliases of the Indic groups.
        match s.trim().to_ascii_lowercase().as_str() {
            "latin" => Ok(ScriptGroup::Latin),
            "cyrillic" => Ok(ScriptGroup::Cyrillic),
            "perso-arabic" => Ok(ScriptGroup::PersoArabic),
            "north indic" | "indo-aryan" => Ok(ScriptGroup::NorthIndic),
            "south indic" | "dravidian" | "dradivian" => Ok(ScriptGroup::SouthIndic),
            "sea" | "southeast asian" => Ok(ScriptGroup::Sea),
            "cjk" => Ok(ScriptGroup::Cjk),
            "other" | "others" => Ok(ScriptGroup::Other),
            _ => Err(Error::Format(format!("unknown script group `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LanguageInfo {
    pub code: &'static str,
    pub name: &'static str,
    pub script: &'static str,
    pub group: ScriptGroup,
}

const fn lang(
    code: &'static str,
    name: &'static str,
    script: &'static str,
    group: ScriptGroup,
) -> LanguageInfo {
    LanguageInfo {
        code,
        name,
        script,
        group,
    }
}

use ScriptGroup::*;

/// The 60 benchmark languages plus English, sorted by code.
pub static LANGUAGES: &[LanguageInfo] = &[
    lang("amh", "Amharic", "Ge'ez", Other),
    lang("ara", "Arabic", "Arabic", PersoArabic),
    lang("ast", "Asturian", "Latin", Latin),
    lang("bel", "Belarusian", "Cyrillic", Cyrillic),
    lang("ben", "Bengali", "Bengali", NorthIndic),
    lang("bul", "Bulgarian", "Cyrillic", Cyrillic),
    lang("ceb", "Cebuano", "Latin", Latin),
    lang("ckb", "Sorani Kurdish", "Arabic", PersoArabic),
    lang("ell", "Greek", "Greek", Other),
    lang("eng", "English", "Latin", Latin),
    lang("ful", "Fula", "Latin", Latin),
    lang("guj", "Gujarati", "Gujarati", NorthIndic),
    lang("heb", "Hebrew", "Hebrew", Other),
    lang("hin", "Hindi", "Devanagari", NorthIndic),
    lang("hye", "Armenian", "Armenian", Other),
    lang("isl", "Icelandic", "Latin", Latin),
    lang("jpn", "Japanese", "Han, Hiragana, Katakana", Cjk),
    lang("kan", "Kannada", "Telugu-Kannada", SouthIndic),
    lang("kat", "Georgian", "Georgian", Other),
    lang("kaz", "Kazakh", "Cyrillic", Cyrillic),
    lang("khm", "Khmer", "Khmer", Sea),
    lang("kir", "Kyrgyz", "Cyrillic", Cyrillic),
    lang("kor", "Korean", "Hangul", Cjk),
    lang("lao", "Lao", "Lao", Sea),
    lang("lin", "Lingala", "Latin", Latin),
    lang("lug", "Ganda", "Latin", Latin),
    lang("mal", "Malayalam", "Malayalam", SouthIndic),
    lang("mar", "Marathi", "Devanagari", NorthIndic),
    lang("mkd", "Macedonian", "Cyrillic", Cyrillic),
    lang("mon", "Mongolian", "Cyrillic", Cyrillic),
    lang("mri", "Maori", "Latin", Latin),
    lang("mya", "Burmese", "Myanmar", Sea),
    lang("npi", "Nepali", "Devanagari", NorthIndic),
    lang("nya", "Nyanja", "Latin", Latin),
    lang("orm", "Oromo", "Latin", Latin),
    lang("pan", "Punjabi", "Gurmukhi", NorthIndic),
    lang("pol", "Polish", "Latin", Latin),
    lang("por", "Portuguese (Portugal)", "Latin", Latin),
    lang("pus", "Pashto", "Perso-Arabic", PersoArabic),
    lang("ron", "Romanian", "Latin", Latin),
    lang("rus", "Russian", "Cyrillic", Cyrillic),
    lang("slk", "Slovak", "Latin", Latin),
    lang("slv", "Slovenian", "Latin", Latin),
    lang("sna", "Shona", "Latin", Latin),
    lang("som", "Somali", "Latin", Latin),
    lang("srp", "Serbian", "Cyrillic", Cyrillic),
    lang("swe", "Swedish", "Latin", Latin),
    lang("swh", "Swahili", "Latin", Latin),
    lang("tam", "Tamil", "Tamil", SouthIndic),
    lang("tel", "Telugu", "Telugu-Kannada", SouthIndic),
    lang("tgk", "Tajik", "Cyrillic", Cyrillic),
    lang("tha", "Thai", "Thai", Sea),
    lang("tur", "Turkish", "Latin", Latin),
    lang("ukr", "Ukrainian", "Cyrillic", Cyrillic),
    lang("umb", "Umbundu", "Latin", Latin),
    lang("urd", "Urdu", "Perso-Arabic", PersoArabic),
    lang("uzb", "Uzbek", "Latin", Latin),
    lang("vie", "Vietnamese", "Latin", Latin),
    lang("wol", "Wolof", "Latin", Latin),
    lang("zho", "Chinese Simpl", "Hant", Cjk),
    lang("zul", "Zulu", "Latin", Latin),
];

pub fn lookup(code: &str) -> Option<&'static LanguageInfo> {
    LANGUAGES
        .binary_search_by(|l| l.code.cmp(code))
        .ok()
        .map(|i| &LANGUAGES[i])
}

pub fn group_of(code: &str) -> Option<ScriptGroup> {
    lookup(code).map(|l| l.group)
}
