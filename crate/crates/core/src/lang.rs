//! Language registry, Unicode script classes and text segmentation.
//!
//! Script data comes from the Unicode Script property as shipped by the
//! `unicode-script` crate, pinned at 0.5.8 (Unicode 17.0.0).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_script::{Script, UnicodeScript};

/// The fifteen benchmark languages plus `und` (undetermined).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LanguageCode {
    Ar,
    De,
    En,
    Es,
    Fr,
    Hi,
    Id,
    It,
    Ja,
    Ko,
    Pt,
    Ru,
    Tr,
    Vi,
    Zh,
    Und,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown language code {0:?}")]
pub struct UnknownLanguage(pub String);

impl LanguageCode {
    /// Benchmark languages in code order; `und` is excluded.
    pub const ALL: [LanguageCode; 15] = [
        LanguageCode::Ar,
        LanguageCode::De,
        LanguageCode::En,
        LanguageCode::Es,
        LanguageCode::Fr,
        LanguageCode::Hi,
        LanguageCode::Id,
        LanguageCode::It,
        LanguageCode::Ja,
        LanguageCode::Ko,
        LanguageCode::Pt,
        LanguageCode::Ru,
        LanguageCode::Tr,
        LanguageCode::Vi,
        LanguageCode::Zh,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LanguageCode::Ar => "ar",
            LanguageCode::De => "de",
            LanguageCode::En => "en",
            LanguageCode::Es => "es",
            LanguageCode::Fr => "fr",
            LanguageCode::Hi => "hi",
            LanguageCode::Id => "id",
            LanguageCode::It => "it",
            LanguageCode::Ja => "ja",
            LanguageCode::Ko => "ko",
            LanguageCode::Pt => "pt",
            LanguageCode::Ru => "ru",
            LanguageCode::Tr => "tr",
            LanguageCode::Vi => "vi",
            LanguageCode::Zh => "zh",
            LanguageCode::Und => "und",
        }
    }

    /// English display name, used in instruction templates ("Respond in French.").
    pub fn english_name(self) -> &'static str {
        match self {
            LanguageCode::Ar => "Arabic",
            LanguageCode::De => "German",
            LanguageCode::En => "English",
            LanguageCode::Es => "Spanish",
            LanguageCode::Fr => "French",
            LanguageCode::Hi => "Hindi",
            LanguageCode::Id => "Indonesian",
            LanguageCode::It => "Italian",
            LanguageCode::Ja => "Japanese",
            LanguageCode::Ko => "Korean",
            LanguageCode::Pt => "Portuguese",
            LanguageCode::Ru => "Russian",
            LanguageCode::Tr => "Turkish",
            LanguageCode::Vi => "Vietnamese",
            LanguageCode::Zh => "Chinese",
            LanguageCode::Und => "Undetermined",
        }
    }

    pub fn profile(self) -> ScriptProfile {
        use ScriptClass::*;
        let writing_system: &'static [ScriptClass] = match self {
            LanguageCode::Ar => &[Arabic, Common],
            LanguageCode::Hi => &[Devanagari, Common],
            LanguageCode::Ja => &[Kana, Han, Common],
            LanguageCode::Ko => &[Hangul, Common],
            LanguageCode::Ru => &[Cyrillic, Common],
            LanguageCode::Zh => &[Han, Common],
            LanguageCode::Und => &[Common],
            _ => &[Latin, Common],
        };
        ScriptProfile {
            language: self,
            writing_system,
            latin_script: writing_system.contains(&Latin),
        }
    }

    /// Languages segmented without spaces, where word units are estimated
    /// from character counts.
    pub fn is_unsegmented(self) -> bool {
        matches!(self, LanguageCode::Ja | LanguageCode::Zh)
    }
}

impl fmt::Display for LanguageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LanguageCode {
    type Err = UnknownLanguage;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "und" {
            return Ok(LanguageCode::Und);
        }
        LanguageCode::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| UnknownLanguage(s.to_string()))
    }
}

impl TryFrom<String> for LanguageCode {
    type Error = UnknownLanguage;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<LanguageCode> for String {
    fn from(l: LanguageCode) -> Self {
        l.as_str().to_string()
    }
}

/// Coarse script classes relevant to the benchmark languages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ScriptClass {
    Latin,
    Arabic,
    Devanagari,
    Cyrillic,
    Hangul,
    Han,
    Kana,
    Common,
    Other,
}

impl ScriptClass {
    /// Everything except `Common` denotes letters of some script.
    pub fn is_letter_class(self) -> bool {
        self != ScriptClass::Common
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScriptProfile {
    pub language: LanguageCode,
    pub writing_system: &'static [ScriptClass],
    pub latin_script: bool,
}

/// Total mapping from a scalar to its script class.
///
/// Only letters and combining marks carry a script; digits (including
/// script-specific digits), punctuation, symbols, whitespace and emoji are
/// `Common`. Inherited marks are `Common` too.
pub fn script_of_char(c: char) -> ScriptClass {
    if !(c.is_alphabetic() || is_combining_mark(c)) {
        return ScriptClass::Common;
    }
    match c.script() {
        Script::Latin => ScriptClass::Latin,
        Script::Arabic => ScriptClass::Arabic,
        Script::Devanagari => ScriptClass::Devanagari,
        Script::Cyrillic => ScriptClass::Cyrillic,
        Script::Hangul => ScriptClass::Hangul,
        Script::Han => ScriptClass::Han,
        Script::Hiragana | Script::Katakana => ScriptClass::Kana,
        Script::Common | Script::Inherited | Script::Unknown => ScriptClass::Common,
        _ => ScriptClass::Other,
    }
}

/// A byte range into a parent string.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TokenSpan<'a> {
    pub start: usize,
    pub end: usize,
    pub text: &'a str,
}

impl<'a> TokenSpan<'a> {
    fn new(parent: &'a str, start: usize, end: usize) -> Self {
        TokenSpan {
            start,
            end,
            text: &parent[start..end],
        }
    }
}

/// Splits on LF (a preceding CR is part of the break), trims each line and
/// drops lines that are empty after trimming.
pub fn segment_lines(text: &str) -> Vec<TokenSpan<'_>> {
    let mut out = Vec::new();
    let mut line_start = 0;
    for piece in text.split('\n') {
        let trimmed_start = piece.len() - piece.trim_start().len();
        let trimmed = piece.trim();
        if !trimmed.is_empty() {
            let start = line_start + trimmed_start;
            out.push(TokenSpan::new(text, start, start + trimmed.len()));
        }
        line_start += piece.len() + 1;
    }
    out
}

/// Maximal runs of non-whitespace characters.
pub fn whitespace_tokens(text: &str) -> Vec<TokenSpan<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(TokenSpan::new(text, s, i));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(TokenSpan::new(text, s, text.len()));
    }
    out
}

/// Word units of a line, used by the short-line guard.
///
/// Whitespace tokens for segmented languages. For `ja`/`zh` two Han or Kana
/// characters count as one unit, and the larger of the two estimates wins.
pub fn count_units(line: &str, lang: LanguageCode) -> usize {
    let ws = line.split_whitespace().count();
    if !lang.is_unsegmented() {
        return ws;
    }
    let cjk = line
        .chars()
        .filter(|&c| matches!(script_of_char(c), ScriptClass::Han | ScriptClass::Kana))
        .count();
    ws.max(cjk.div_ceil(2))
}

/// Maximal runs of ASCII letters, excluding runs inside URL or e-mail tokens
/// (whitespace-delimited tokens containing `://` or `@`, or starting with `www.`).
pub fn latin_runs(text: &str) -> Vec<TokenSpan<'_>> {
    let mut out = Vec::new();
    for tok in whitespace_tokens(text) {
        let t = tok.text;
        if t.contains("://") || t.contains('@') || t.to_ascii_lowercase().starts_with("www.") {
            continue;
        }
        let mut run_start = None;
        for (i, c) in t.char_indices() {
            match (c.is_ascii_alphabetic(), run_start) {
                (true, None) => run_start = Some(i),
                (false, Some(s)) => {
                    out.push(TokenSpan::new(text, tok.start + s, tok.start + i));
                    run_start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = run_start {
            out.push(TokenSpan::new(text, tok.start + s, tok.end));
        }
    }
    out
}
