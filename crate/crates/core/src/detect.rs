//! Line- and word-level confusion detection for single responses.
//!
//! Line level: every non-blank line longer than the guard is classified by a
//! [`LineClassifier`]; a confident prediction other than the target fails
//! the line. Word level runs only when no line failed. Non-Latin targets
//! flag lowercase English dictionary words written in ASCII letters; Latin
//! targets flag tokens containing letters from any non-Latin script.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Dataset, PromptRecord, ResponseRecord, Setting};
use crate::lang::{
    count_units, latin_runs, script_of_char, segment_lines, whitespace_tokens, LanguageCode,
    ScriptClass,
};
use crate::lid::LineClassifier;
use crate::par::{self, Execution};

/// Lines with at most this many units are not judged.
pub const DEFAULT_GUARD_UNITS: usize = 4;

const BUILTIN_WORDS: &str = include_str!("../data/english_words.txt");

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnglishWordDictionary {
    words: HashSet<String>,
    source_digest: String,
}

impl EnglishWordDictionary {
    /// One word per line. Entries starting with an uppercase letter, shorter
    /// than two characters, or containing anything but ASCII letters are
    /// dropped; the rest are lowercased.
    pub fn from_text(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|w| {
                w.len() >= 2
                    && w.bytes().all(|b| b.is_ascii_alphabetic())
                    && !w.as_bytes()[0].is_ascii_uppercase()
            })
            .map(str::to_ascii_lowercase)
            .collect();
        EnglishWordDictionary {
            words,
            source_digest: hex_sha256(text.as_bytes()),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        Ok(Self::from_text(&std::fs::read_to_string(path)?))
    }

    /// The bundled word list (SCOWL-derived, see `data/english_words.COPYRIGHT`).
    pub fn builtin() -> &'static Self {
        static DICT: OnceLock<EnglishWordDictionary> = OnceLock::new();
        DICT.get_or_init(|| Self::from_text(BUILTIN_WORDS))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// SHA-256 of the source text, hex encoded.
    pub fn source_digest(&self) -> &str {
        &self.source_digest
    }

    /// The dictionary rule for one ASCII letter run: not capitalized, at
    /// least two letters, lowercase form in the dictionary.
    pub fn is_flaggable(&self, run: &str) -> bool {
        run.len() >= 2
            && !run.as_bytes()[0].is_ascii_uppercase()
            && self.words.contains(&run.to_ascii_lowercase())
    }
}

fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineStatus {
    Passed,
    Failed,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineJudgment {
    pub line_index: usize,
    /// Byte range of the trimmed line in the response text.
    pub start: usize,
    pub end: usize,
    pub status: LineStatus,
    pub predicted: LanguageCode,
    pub confidence: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagReason {
    DictionaryEnglishWord,
    ForeignScriptLetter,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordFlag {
    pub line_index: usize,
    /// Byte range of the flagged token in the response text.
    pub start: usize,
    pub end: usize,
    pub token: String,
    pub reason: FlagReason,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub response_id: String,
    pub prompt_id: String,
    pub model: String,
    pub dataset: Dataset,
    pub setting: Setting,
    pub target: LanguageCode,
    pub line_judgments: Vec<LineJudgment>,
    pub word_flags: Vec<WordFlag>,
    pub has_line_error: bool,
    pub has_word_error: bool,
    /// Every line was skipped (or there were none); counted as a line pass.
    pub skipped_only: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum DetectError {
    #[error("response {response_id}: prompt {prompt_id:?} not found")]
    UnknownPrompt {
        response_id: String,
        prompt_id: String,
    },
    #[error("target {target} is not valid for {rule}")]
    WrongScriptGroup {
        target: LanguageCode,
        rule: &'static str,
    },
}

pub fn detect_line_confusion(
    response_id: &str,
    text: &str,
    target: LanguageCode,
    lid: &dyn LineClassifier,
    guard_units: usize,
) -> Vec<LineJudgment> {
    segment_lines(text)
        .into_iter()
        .enumerate()
        .map(|(line_index, span)| {
            let base = LineJudgment {
                line_index,
                start: span.start,
                end: span.end,
                status: LineStatus::Skipped,
                predicted: LanguageCode::Und,
                confidence: 0.0,
            };
            if count_units(span.text, target) <= guard_units {
                return base;
            }
            let pred = lid.classify_line(response_id, line_index, span.text);
            let status = if pred.language == LanguageCode::Und {
                LineStatus::Skipped
            } else if pred.language == target {
                LineStatus::Passed
            } else {
                LineStatus::Failed
            };
            LineJudgment {
                status,
                predicted: pred.language,
                confidence: pred.confidence,
                ..base
            }
        })
        .collect()
}

/// Dictionary rule for `ar`, `hi`, `ja`, `ko`, `ru`, `zh`.
pub fn detect_word_confusion_nonlatin(
    text: &str,
    target: LanguageCode,
    dictionary: &EnglishWordDictionary,
) -> Result<Vec<WordFlag>, DetectError> {
    if target.profile().latin_script || target == LanguageCode::Und {
        return Err(DetectError::WrongScriptGroup {
            target,
            rule: "the dictionary rule",
        });
    }
    let mut out = Vec::new();
    for (line_index, line) in segment_lines(text).into_iter().enumerate() {
        for run in latin_runs(line.text) {
            if dictionary.is_flaggable(run.text) {
                out.push(WordFlag {
                    line_index,
                    start: line.start + run.start,
                    end: line.start + run.end,
                    token: run.text.to_string(),
                    reason: FlagReason::DictionaryEnglishWord,
                });
            }
        }
    }
    Ok(out)
}

/// Script rule for Latin-script targets. Each whitespace token is trimmed of
/// leading and trailing non-letters and flagged when it holds a letter from
/// a script other than Latin.
pub fn detect_word_confusion_latin(
    text: &str,
    target: LanguageCode,
) -> Result<Vec<WordFlag>, DetectError> {
    if !target.profile().latin_script {
        return Err(DetectError::WrongScriptGroup {
            target,
            rule: "the script rule",
        });
    }
    let is_common = |c: char| script_of_char(c) == ScriptClass::Common;
    let mut out = Vec::new();
    for (line_index, line) in segment_lines(text).into_iter().enumerate() {
        for tok in whitespace_tokens(line.text) {
            let lead = tok.text.len() - tok.text.trim_start_matches(is_common).len();
            let core = tok.text.trim_matches(is_common);
            let foreign = core.chars().any(|c| {
                let s = script_of_char(c);
                s.is_letter_class() && s != ScriptClass::Latin
            });
            if foreign {
                let start = line.start + tok.start + lead;
                out.push(WordFlag {
                    line_index,
                    start,
                    end: start + core.len(),
                    token: core.to_string(),
                    reason: FlagReason::ForeignScriptLetter,
                });
            }
        }
    }
    Ok(out)
}

/// Shared inputs for detection.
#[derive(Clone, Copy)]
pub struct Detector<'a> {
    pub lid: &'a dyn LineClassifier,
    pub dictionary: &'a EnglishWordDictionary,
    pub guard_units: usize,
}

impl<'a> Detector<'a> {
    pub fn new(lid: &'a dyn LineClassifier, dictionary: &'a EnglishWordDictionary) -> Self {
        Detector {
            lid,
            dictionary,
            guard_units: DEFAULT_GUARD_UNITS,
        }
    }

    /// Line judgments and word flags for one text.
    pub fn judge(
        &self,
        response_id: &str,
        text: &str,
        target: LanguageCode,
    ) -> (Vec<LineJudgment>, Vec<WordFlag>) {
        let lines = detect_line_confusion(response_id, text, target, self.lid, self.guard_units);
        if lines.iter().any(|j| j.status == LineStatus::Failed) {
            return (lines, Vec::new());
        }
        let flags = if target.profile().latin_script {
            detect_word_confusion_latin(text, target)
        } else {
            detect_word_confusion_nonlatin(text, target, self.dictionary)
        }
        .unwrap_or_default();
        (lines, flags)
    }

    pub fn detect(&self, response: &ResponseRecord, prompt: &PromptRecord) -> DetectionRecord {
        let response_id = response.response_id();
        let (line_judgments, word_flags) = self.judge(&response_id, &response.text, prompt.target);
        let has_line_error = line_judgments.iter().any(|j| j.status == LineStatus::Failed);
        DetectionRecord {
            response_id,
            prompt_id: prompt.id.clone(),
            model: response.model.clone(),
            dataset: prompt.dataset,
            setting: prompt.setting,
            target: prompt.target,
            skipped_only: line_judgments.iter().all(|j| j.status == LineStatus::Skipped),
            has_word_error: !word_flags.is_empty(),
            has_line_error,
            line_judgments,
            word_flags,
        }
    }

    /// Detects every response, in input order. A response whose prompt is
    /// missing yields an error in its slot without stopping the batch.
    pub fn detect_all(
        &self,
        responses: &[ResponseRecord],
        prompts: &[PromptRecord],
        exec: Execution,
    ) -> Vec<Result<DetectionRecord, DetectError>> {
        let by_id: HashMap<&str, &PromptRecord> =
            prompts.iter().map(|p| (p.id.as_str(), p)).collect();
        par::map(exec, responses, |r| match by_id.get(r.prompt_id.as_str()) {
            Some(p) => Ok(self.detect(r, p)),
            None => Err(DetectError::UnknownPrompt {
                response_id: r.response_id(),
                prompt_id: r.prompt_id.clone(),
            }),
        })
    }
}
