//! Benchmark data model: prompts, responses, filtering, and prompt assembly.

mod filter;
mod prompting;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decoding::SamplingConfig;
use crate::jsonl::{read_jsonl, write_jsonl, JsonlError};
use crate::lang::LanguageCode;

pub use filter::{filter_prompts, FilterConfig, FilterReport, FilterRule};
pub use prompting::{
    amend_crosslingual, build_fewshot, crosslingual_variants, load_templates, ChatRole, ChatTurn,
    FewShotExample, FewShotPrompt, FewShotStyle, DEFAULT_TEMPLATES,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Aya,
    Dolly,
    Okapi,
    Sharegpt,
    Native,
    Complex,
    Custom,
}

impl Dataset {
    pub fn as_str(self) -> &'static str {
        match self {
            Dataset::Aya => "aya",
            Dataset::Dolly => "dolly",
            Dataset::Okapi => "okapi",
            Dataset::Sharegpt => "sharegpt",
            Dataset::Native => "native",
            Dataset::Complex => "complex",
            Dataset::Custom => "custom",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    Monolingual,
    Crosslingual,
}

impl Setting {
    pub fn as_str(self) -> &'static str {
        match self {
            Setting::Monolingual => "monolingual",
            Setting::Crosslingual => "crosslingual",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstructionPosition {
    Start,
    End,
    Integrated,
}

impl InstructionPosition {
    pub fn as_str(self) -> &'static str {
        match self {
            InstructionPosition::Start => "start",
            InstructionPosition::End => "end",
            InstructionPosition::Integrated => "integrated",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub id: String,
    pub dataset: Dataset,
    pub setting: Setting,
    pub text: String,
    pub target: LanguageCode,
    pub instruction_language: LanguageCode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction_position: Option<InstructionPosition>,
    /// Reference completion shipped with some source datasets; only used
    /// by the short-completion filter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("field `{field}`: {message}")]
pub struct InvariantViolation {
    pub field: &'static str,
    pub message: String,
}

impl PromptRecord {
    pub fn validate(&self) -> Result<(), InvariantViolation> {
        let fail = |field, message: &str| {
            Err(InvariantViolation {
                field,
                message: message.to_string(),
            })
        };
        if self.id.is_empty() {
            return fail("id", "must not be empty");
        }
        if self.target == LanguageCode::Und {
            return fail("target", "must be a benchmark language");
        }
        match self.setting {
            Setting::Monolingual => {
                if self.instruction_language != self.target {
                    return fail(
                        "instruction_language",
                        "monolingual prompts must be written in the target language",
                    );
                }
                if self.instruction_position.is_some() {
                    return fail(
                        "instruction_position",
                        "monolingual prompts carry no instruction position",
                    );
                }
            }
            Setting::Crosslingual => {
                if self.instruction_language != LanguageCode::En {
                    return fail(
                        "instruction_language",
                        "cross-lingual prompts are instructed in English",
                    );
                }
                if self.target == LanguageCode::En {
                    return fail("target", "cross-lingual targets must differ from en");
                }
                if self.instruction_position.is_none() {
                    return fail(
                        "instruction_position",
                        "cross-lingual prompts require an instruction position",
                    );
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    /// Optional explicit id; see [`ResponseRecord::response_id`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub prompt_id: String,
    pub model: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<String>,
}

impl ResponseRecord {
    /// `id` when present, otherwise `model:prompt_id`.
    pub fn response_id(&self) -> String {
        match &self.id {
            Some(id) => id.clone(),
            None => format!("{}:{}", self.model, self.prompt_id),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("{path}: record {index} (id {id:?}): {source}")]
    Invariant {
        path: String,
        index: usize,
        id: String,
        source: InvariantViolation,
    },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn load_prompts(path: impl AsRef<Path>) -> Result<Vec<PromptRecord>, CorpusError> {
    let path = path.as_ref();
    let prompts: Vec<PromptRecord> = read_jsonl(path)?;
    for (index, p) in prompts.iter().enumerate() {
        p.validate().map_err(|source| CorpusError::Invariant {
            path: path.display().to_string(),
            index: index + 1,
            id: p.id.clone(),
            source,
        })?;
    }
    Ok(prompts)
}

pub fn save_prompts(path: impl AsRef<Path>, prompts: &[PromptRecord]) -> Result<(), CorpusError> {
    Ok(write_jsonl(path, prompts)?)
}

pub fn load_responses(path: impl AsRef<Path>) -> Result<Vec<ResponseRecord>, CorpusError> {
    Ok(read_jsonl(path)?)
}

pub fn save_responses(path: impl AsRef<Path>, responses: &[ResponseRecord]) -> Result<(), CorpusError> {
    Ok(write_jsonl(path, responses)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn mono(id: &str, lang: LanguageCode, text: &str) -> PromptRecord {
        PromptRecord {
            id: id.into(),
            dataset: Dataset::Aya,
            setting: Setting::Monolingual,
            text: text.into(),
            target: lang,
            instruction_language: lang,
            instruction_position: None,
            completion: None,
        }
    }

    #[test]
    fn loads_valid_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        let prompts = vec![
            mono("a", LanguageCode::Zh, "问：如何清洗和保养筷子？"),
            mono("b", LanguageCode::Es, "¿Cómo escapar de un helicóptero atrapado en el agua?"),
            mono("c", LanguageCode::De, "Erklären Sie, wie der Gini-Index berechnet wird."),
        ];
        save_prompts(&path, &prompts).unwrap();
        assert_eq!(load_prompts(&path).unwrap(), prompts);
    }

    #[test]
    fn crosslingual_without_position_names_the_field() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(
            f,
            r#"{{"id":"x","dataset":"okapi","setting":"crosslingual","text":"Write a poem. Reply in Korean.","target":"ko","instruction_language":"en"}}"#
        )
        .unwrap();
        let err = load_prompts(&path).unwrap_err().to_string();
        assert!(err.contains("instruction_position"), "{err}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        std::fs::write(
            &path,
            "{\"id\":\"a\",\"dataset\":\"aya\",\"setting\":\"monolingual\",\"text\":\"t\",\"target\":\"en\",\"instruction_language\":\"en\"}\n{broken\n",
        )
        .unwrap();
        let err = load_prompts(&path).unwrap_err();
        assert!(matches!(err, CorpusError::Jsonl(JsonlError::Parse { line: 2, .. })), "{err}");
    }

    #[test]
    fn monolingual_invariants() {
        let mut p = mono("a", LanguageCode::Fr, "Bonjour");
        assert!(p.validate().is_ok());
        p.instruction_language = LanguageCode::En;
        assert_eq!(p.validate().unwrap_err().field, "instruction_language");
    }

    #[test]
    fn response_id_defaults_to_model_and_prompt() {
        let r = ResponseRecord {
            id: None,
            prompt_id: "p1".into(),
            model: "m".into(),
            text: String::new(),
            sampling: None,
            trace_path: None,
        };
        assert_eq!(r.response_id(), "m:p1");
    }
}
