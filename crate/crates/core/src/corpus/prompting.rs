use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, InstructionPosition, PromptRecord, Setting};
use crate::lang::LanguageCode;

/// Instruction templates; `{Language}` is replaced by the English language name.
pub const DEFAULT_TEMPLATES: &[&str] = &[
    "Respond in {Language}.",
    "Reply in {Language}.",
    "Answer in {Language}.",
    "Write your answer in {Language}.",
    "Please respond in {Language}.",
];

/// One template per non-blank line.
pub fn load_templates(path: impl AsRef<Path>) -> Result<Vec<String>, CorpusError> {
    Ok(std::fs::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

/// Turns an English prompt into a cross-lingual one by attaching an English
/// instruction at the start or the end.
///
/// The template is drawn uniformly with a generator seeded from `seed`.
/// Integrated instructions are hand-written data and cannot be synthesized.
pub fn amend_crosslingual(
    source: &PromptRecord,
    target: LanguageCode,
    position: InstructionPosition,
    templates: &[String],
    seed: u64,
) -> Result<PromptRecord, CorpusError> {
    if source.target != LanguageCode::En {
        return Err(CorpusError::Invalid(format!(
            "prompt {} is not an English prompt",
            source.id
        )));
    }
    if matches!(target, LanguageCode::En | LanguageCode::Und) {
        return Err(CorpusError::Invalid(format!(
            "cross-lingual target must be a non-English benchmark language, got {target}"
        )));
    }
    if templates.is_empty() {
        return Err(CorpusError::Invalid("instruction template set is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let template = &templates[rng.gen_range(0..templates.len())];
    let instruction = template.replace("{Language}", target.english_name());
    let text = match position {
        InstructionPosition::Start => format!("{instruction} {}", source.text),
        InstructionPosition::End => format!("{} {instruction}", source.text),
        InstructionPosition::Integrated => {
            return Err(CorpusError::Invalid(
                "integrated instructions are authored by hand, not synthesized".into(),
            ))
        }
    };
    Ok(PromptRecord {
        id: format!("{}-{}-{}", source.id, target, position.as_str()),
        dataset: source.dataset,
        setting: Setting::Crosslingual,
        text,
        target,
        instruction_language: LanguageCode::En,
        instruction_position: Some(position),
        completion: None,
    })
}

/// Start and end variants for every (source, target) pair. Each variant gets
/// its own seed derived from `seed` and the variant identity, so the output
/// does not depend on iteration order.
pub fn crosslingual_variants(
    sources: &[PromptRecord],
    targets: &[LanguageCode],
    templates: &[String],
    seed: u64,
) -> Result<Vec<PromptRecord>, CorpusError> {
    let mut out = Vec::new();
    for source in sources {
        for &target in targets {
            for position in [InstructionPosition::Start, InstructionPosition::End] {
                let variant_seed = seed ^ fnv1a(&format!("{}\t{}\t{}", source.id, target, position.as_str()));
                out.push(amend_crosslingual(source, target, position, templates, variant_seed)?);
            }
        }
    }
    Ok(out)
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub question: String,
    pub answer: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FewShotStyle {
    /// A single `Q:` / `A:` string, for base models.
    QaTemplate,
    /// Alternating user/assistant turns, for chat models.
    ChatTurns,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: ChatRole,
    pub content: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FewShotPrompt {
    Text(String),
    Turns(Vec<ChatTurn>),
}

/// Cuts `answer` to at most `budget` characters, backing off to the last
/// whitespace so no word is split.
fn truncate_answer(answer: &str, budget: Option<usize>) -> &str {
    let Some(budget) = budget else {
        return answer;
    };
    let Some((cut, _)) = answer.char_indices().nth(budget) else {
        return answer;
    };
    let head = &answer[..cut];
    match head.rfind(char::is_whitespace) {
        Some(ws) if ws > 0 => head[..ws].trim_end(),
        _ => head,
    }
}

pub fn build_fewshot(
    examples: &[FewShotExample],
    query: &str,
    style: FewShotStyle,
    answer_budget: Option<usize>,
) -> FewShotPrompt {
    match style {
        FewShotStyle::QaTemplate => {
            let mut s = String::new();
            for ex in examples {
                s.push_str("Q: ");
                s.push_str(&ex.question);
                s.push_str("\n\nA: ");
                s.push_str(truncate_answer(&ex.answer, answer_budget));
                s.push_str("\n\n");
            }
            s.push_str("Q: ");
            s.push_str(query);
            s.push_str("\n\nA:");
            FewShotPrompt::Text(s)
        }
        FewShotStyle::ChatTurns => {
            let mut turns = Vec::with_capacity(examples.len() * 2 + 1);
            for ex in examples {
                turns.push(ChatTurn {
                    role: ChatRole::User,
                    content: ex.question.clone(),
                });
                turns.push(ChatTurn {
                    role: ChatRole::Assistant,
                    content: truncate_answer(&ex.answer, answer_budget).to_string(),
                });
            }
            turns.push(ChatTurn {
                role: ChatRole::User,
                content: query.to_string(),
            });
            FewShotPrompt::Turns(turns)
        }
    }
}
