use std::cmp::Ordering;

use super::sampling::log_softmax;
use super::toylm::ToyLm;
use super::DecodingError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamConfig {
    pub beam_size: usize,
    pub max_tokens: usize,
    /// Rank by mean log-probability per token instead of the sum.
    pub length_normalization: bool,
}

impl BeamConfig {
    pub fn new(beam_size: usize, max_tokens: usize) -> Self {
        BeamConfig {
            beam_size,
            max_tokens,
            length_normalization: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<usize>,
    /// Sum of natural-log token probabilities at T = 1.
    pub log_score: f64,
    pub finished: bool,
}

impl Hypothesis {
    fn rank_score(&self, normalize: bool) -> f64 {
        if normalize && !self.tokens.is_empty() {
            self.log_score / self.tokens.len() as f64
        } else {
            self.log_score
        }
    }
}

/// Higher score first; equal scores fall back to the lexicographically
/// smaller token-index sequence.
fn rank(a: &Hypothesis, b: &Hypothesis, normalize: bool) -> Ordering {
    b.rank_score(normalize)
        .total_cmp(&a.rank_score(normalize))
        .then_with(|| a.tokens.cmp(&b.tokens))
}

/// Argmax decoding, lowest index on ties.
pub fn greedy(lm: &ToyLm, prompt: &[String], max_tokens: usize) -> Result<Vec<usize>, DecodingError> {
    let mut tokens = Vec::new();
    while tokens.len() < max_tokens {
        let logits = lm.logits(&lm.context_with(prompt, &tokens))?;
        let mut best = 0;
        for (i, &z) in logits.iter().enumerate() {
            if z > logits[best] {
                best = i;
            }
        }
        tokens.push(best);
        if Some(best) == lm.end_index() {
            break;
        }
    }
    Ok(tokens)
}

/// Returns up to `beam_size` hypotheses, best first.
pub fn beam_search(
    lm: &ToyLm,
    prompt: &[String],
    config: &BeamConfig,
) -> Result<Vec<Hypothesis>, DecodingError> {
    if config.beam_size == 0 {
        return Err(DecodingError::InvalidConfig("beam_size must be >= 1".into()));
    }
    let norm = config.length_normalization;
    let mut beams = vec![Hypothesis {
        tokens: Vec::new(),
        log_score: 0.0,
        finished: false,
    }];
    for _ in 0..config.max_tokens {
        if beams.iter().all(|b| b.finished) {
            break;
        }
        let mut next = Vec::new();
        for b in &beams {
            if b.finished {
                next.push(b.clone());
                continue;
            }
            let lp = log_softmax(lm.logits(&lm.context_with(prompt, &b.tokens))?)?;
            for (tok, &l) in lp.iter().enumerate() {
                if l == f64::NEG_INFINITY {
                    continue;
                }
                let mut tokens = b.tokens.clone();
                tokens.push(tok);
                next.push(Hypothesis {
                    tokens,
                    log_score: b.log_score + l,
                    finished: Some(tok) == lm.end_index(),
                });
            }
        }
        next.sort_by(|a, b| rank(a, b, norm));
        next.truncate(config.beam_size);
        beams = next;
    }
    beams.sort_by(|a, b| rank(a, b, norm));
    Ok(beams)
}
