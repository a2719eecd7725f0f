use std::collections::HashMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sampling::{sample_step, SamplingConfig};
use super::trace::TraceStep;
use super::DecodingError;

/// The bundled "the quick brown" fixture: five candidates after the prompt
/// (` fox`, ` dog`, ` cube`, ` 狐狸`, ` after`), then end of sequence.
pub const QUICK_BROWN_FOX: &str = include_str!("../../data/quick_brown_fox.json");

#[derive(Serialize, Deserialize)]
struct LmFile {
    vocabulary: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    end_token: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    prompt: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    intruders: Vec<String>,
    rows: Vec<RowFile>,
}

#[derive(Serialize, Deserialize)]
struct RowFile {
    context: Vec<String>,
    /// `null` encodes a masked (`-inf`) logit.
    logits: Vec<Option<f64>>,
}

/// A next-token table keyed by context.
///
/// Lookup uses the longest suffix of the running sequence (prompt included)
/// that has a row; the empty context, if present, is the catch-all.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyLm {
    vocabulary: Vec<String>,
    end: Option<usize>,
    prompt: Vec<String>,
    intruders: Vec<usize>,
    rows: HashMap<Vec<String>, Vec<f64>>,
    max_context: usize,
}

impl ToyLm {
    pub fn new(
        vocabulary: Vec<String>,
        end_token: Option<&str>,
        prompt: Vec<String>,
        intruders: &[&str],
        rows: Vec<(Vec<String>, Vec<f64>)>,
    ) -> Result<Self, DecodingError> {
        let bad = |m: String| Err(DecodingError::InvalidLm(m));
        if vocabulary.is_empty() {
            return bad("empty vocabulary".into());
        }
        let index = |tok: &str| vocabulary.iter().position(|v| v == tok);
        for (i, v) in vocabulary.iter().enumerate() {
            if index(v) != Some(i) {
                return bad(format!("duplicate vocabulary token {v:?}"));
            }
        }
        let end = match end_token {
            Some(t) => match index(t) {
                Some(i) => Some(i),
                None => return bad(format!("end token {t:?} not in vocabulary")),
            },
            None => None,
        };
        let mut intr = Vec::new();
        for t in intruders {
            match index(t) {
                Some(i) => intr.push(i),
                None => return bad(format!("intruder {t:?} not in vocabulary")),
            }
        }
        intr.sort_unstable();
        intr.dedup();
        let mut table = HashMap::new();
        let mut max_context = 0;
        for (context, logits) in rows {
            if logits.len() != vocabulary.len() {
                return bad(format!(
                    "row {context:?} has {} logits for {} tokens",
                    logits.len(),
                    vocabulary.len()
                ));
            }
            if logits.iter().any(|z| z.is_nan() || *z == f64::INFINITY)
                || logits.iter().all(|z| *z == f64::NEG_INFINITY)
            {
                return bad(format!("row {context:?} has no usable logits"));
            }
            max_context = max_context.max(context.len());
            if table.insert(context.clone(), logits).is_some() {
                return bad(format!("duplicate context {context:?}"));
            }
        }
        Ok(ToyLm {
            vocabulary,
            end,
            prompt,
            intruders: intr,
            rows: table,
            max_context,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, DecodingError> {
        let f: LmFile = serde_json::from_str(text)?;
        let rows = f
            .rows
            .into_iter()
            .map(|r| {
                let logits = r
                    .logits
                    .into_iter()
                    .map(|z| z.unwrap_or(f64::NEG_INFINITY))
                    .collect();
                (r.context, logits)
            })
            .collect();
        let intruders: Vec<&str> = f.intruders.iter().map(String::as_str).collect();
        ToyLm::new(f.vocabulary, f.end_token.as_deref(), f.prompt, &intruders, rows)
    }

    /// Rows are written sorted by context so the output is stable.
    pub fn to_json(&self) -> String {
        let mut rows: Vec<RowFile> = self
            .rows
            .iter()
            .map(|(c, l)| RowFile {
                context: c.clone(),
                logits: l.iter().map(|&z| z.is_finite().then_some(z)).collect(),
            })
            .collect();
        rows.sort_by(|a, b| a.context.cmp(&b.context));
        let f = LmFile {
            vocabulary: self.vocabulary.clone(),
            end_token: self.end.map(|i| self.vocabulary[i].clone()),
            prompt: self.prompt.clone(),
            intruders: self.intruders.iter().map(|&i| self.vocabulary[i].clone()).collect(),
            rows,
        };
        serde_json::to_string_pretty(&f).expect("toy LM serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DecodingError> {
        ToyLm::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn quick_brown_fox() -> Self {
        ToyLm::from_json(QUICK_BROWN_FOX).expect("bundled toy LM is valid")
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn token(&self, index: usize) -> &str {
        &self.vocabulary[index]
    }

    pub fn token_index(&self, token: &str) -> Option<usize> {
        self.vocabulary.iter().position(|v| v == token)
    }

    pub fn end_index(&self) -> Option<usize> {
        self.end
    }

    pub fn default_prompt(&self) -> &[String] {
        &self.prompt
    }

    /// Token indices marked as wrong-language intruders.
    pub fn intruders(&self) -> &[usize] {
        &self.intruders
    }

    pub fn logits(&self, context: &[String]) -> Result<&[f64], DecodingError> {
        let longest = self.max_context.min(context.len());
        for len in (0..=longest).rev() {
            if let Some(row) = self.rows.get(&context[context.len() - len..]) {
                return Ok(row);
            }
        }
        Err(DecodingError::MissingContext(context.to_vec()))
    }

    pub(super) fn context_with(&self, prompt: &[String], tokens: &[usize]) -> Vec<String> {
        prompt
            .iter()
            .cloned()
            .chain(tokens.iter().map(|&t| self.vocabulary[t].clone()))
            .collect()
    }
}

/// Sampled continuation; `tokens` includes the end token when one was drawn.
#[derive(Clone, Debug, PartialEq)]
pub struct Generation {
    pub tokens: Vec<usize>,
    pub trace: Vec<TraceStep>,
}

impl Generation {
    pub fn text(&self, lm: &ToyLm) -> String {
        self.tokens
            .iter()
            .filter(|&&t| Some(t) != lm.end_index())
            .map(|&t| lm.token(t))
            .collect()
    }
}

/// Samples until the end token or `config.max_tokens` steps.
pub fn generate(
    lm: &ToyLm,
    prompt: &[String],
    config: &SamplingConfig,
) -> Result<Generation, DecodingError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut tokens = Vec::new();
    let mut trace = Vec::new();
    let mut context: Vec<String> = prompt.to_vec();
    while tokens.len() < config.max_tokens {
        let step = sample_step(lm.logits(&context)?, config, &mut rng)?;
        trace.push(TraceStep {
            candidates: lm.vocabulary.iter().cloned().zip(step.probs).collect(),
            sampled: step.sampled,
            truncated: false,
        });
        tokens.push(step.sampled);
        if Some(step.sampled) == lm.end {
            break;
        }
        context.push(lm.vocabulary[step.sampled].clone());
    }
    Ok(Generation { tokens, trace })
}
