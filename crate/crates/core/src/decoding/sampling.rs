use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DecodingError;

fn default_max_tokens() -> usize {
    100
}

/// Decoding parameters. Defaults match the benchmark's generation setup
/// (T = 0.3, p = 0.75, 100 tokens).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub temperature: f64,
    pub top_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            temperature: 0.3,
            top_p: 0.75,
            top_k: None,
            seed: 0,
            max_tokens: 100,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<(), DecodingError> {
        let bad = |m: String| Err(DecodingError::InvalidConfig(m));
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return bad(format!("temperature must be >= 0, got {}", self.temperature));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad(format!("top_p must be in (0, 1], got {}", self.top_p));
        }
        if self.top_k == Some(0) {
            return bad("top_k must be positive".into());
        }
        if self.max_tokens == 0 {
            return bad("max_tokens must be positive".into());
        }
        Ok(())
    }
}

fn check_logits(logits: &[f64]) -> Result<(), DecodingError> {
    if logits.is_empty() {
        return Err(DecodingError::EmptyLogits);
    }
    for (index, &value) in logits.iter().enumerate() {
        if value.is_nan() || value == f64::INFINITY {
            return Err(DecodingError::BadLogit { index, value });
        }
    }
    if logits.iter().all(|&z| z == f64::NEG_INFINITY) {
        return Err(DecodingError::AllMasked);
    }
    Ok(())
}

/// Index of the largest logit, lowest index on ties.
fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &z) in logits.iter().enumerate() {
        if z > logits[best] {
            best = i;
        }
    }
    best
}

/// Temperature softmax with max-subtraction. `-inf` logits get probability
/// zero. `T = 0` is the greedy limit: one-hot at the argmax.
pub fn softmax_t(logits: &[f64], temperature: f64) -> Result<Vec<f64>, DecodingError> {
    check_logits(logits)?;
    if !(temperature >= 0.0 && temperature.is_finite()) {
        return Err(DecodingError::InvalidConfig(format!(
            "temperature must be >= 0, got {temperature}"
        )));
    }
    if temperature == 0.0 {
        let mut out = vec![0.0; logits.len()];
        out[argmax(logits)] = 1.0;
        return Ok(out);
    }
    let max = logits[argmax(logits)];
    let exps: Vec<f64> = logits
        .iter()
        .map(|&z| ((z - max) / temperature).exp())
        .collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Natural-log softmax at T = 1, used for beam scores.
pub fn log_softmax(logits: &[f64]) -> Result<Vec<f64>, DecodingError> {
    check_logits(logits)?;
    let max = logits[argmax(logits)];
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    Ok(logits.iter().map(|&z| z - lse).collect())
}

/// Masks everything outside the `k` largest logits with `-inf`
/// (ties kept by lower index).
pub fn top_k_mask(logits: &[f64], k: usize) -> Vec<f64> {
    if k >= logits.len() {
        return logits.to_vec();
    }
    let order = descending_order(logits);
    let mut out = vec![f64::NEG_INFINITY; logits.len()];
    for &i in &order[..k] {
        out[i] = logits[i];
    }
    out
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

pub(super) fn check_distribution(probs: &[f64]) -> Result<(), DecodingError> {
    if probs.is_empty() {
        return Err(DecodingError::InvalidDistribution("empty".into()));
    }
    if let Some((i, p)) = probs
        .iter()
        .enumerate()
        .find(|(_, &p)| !(p.is_finite() && p >= 0.0))
    {
        return Err(DecodingError::InvalidDistribution(format!(
            "entry {i} is {p}"
        )));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(DecodingError::InvalidDistribution(format!(
            "sums to {total}"
        )));
    }
    Ok(())
}

/// Smallest set of indices, in descending probability order (lower index
/// first on ties), whose mass reaches `p`.
///
/// A slack of 1e-12 absorbs rounding so that `p = 1` does not drag in
/// zero-probability tokens.
pub fn nucleus(probs: &[f64], p: f64) -> Result<Vec<usize>, DecodingError> {
    check_distribution(probs)?;
    if !(p > 0.0 && p <= 1.0) {
        return Err(DecodingError::InvalidConfig(format!(
            "top_p must be in (0, 1], got {p}"
        )));
    }
    let mut out = Vec::new();
    let mut mass = 0.0;
    for i in descending_order(probs) {
        if probs[i] == 0.0 {
            break;
        }
        out.push(i);
        mass += probs[i];
        if mass >= p - 1e-12 {
            break;
        }
    }
    Ok(out)
}

/// Renormalized nucleus as `(token index, probability)` pairs in nucleus order.
pub fn nucleus_distribution(
    logits: &[f64],
    config: &SamplingConfig,
) -> Result<Vec<(usize, f64)>, DecodingError> {
    Ok(prepare(logits, config)?.1)
}

fn prepare(
    logits: &[f64],
    config: &SamplingConfig,
) -> Result<(Vec<f64>, Vec<(usize, f64)>), DecodingError> {
    config.validate()?;
    let masked;
    let logits = match config.top_k {
        Some(k) => {
            check_logits(logits)?;
            masked = top_k_mask(logits, k);
            &masked[..]
        }
        None => logits,
    };
    let probs = softmax_t(logits, config.temperature)?;
    let kept = nucleus(&probs, config.top_p)?;
    let mass: f64 = kept.iter().map(|&i| probs[i]).sum();
    let dist = kept.into_iter().map(|i| (i, probs[i] / mass)).collect();
    Ok((probs, dist))
}

/// What happened at one sampling step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    /// Full distribution after top-k and temperature, before the nucleus cut.
    pub probs: Vec<f64>,
    /// Renormalized nucleus in nucleus order.
    pub nucleus: Vec<(usize, f64)>,
    pub sampled: usize,
}

/// One draw. The generator is advanced by exactly one `f64`.
pub fn sample_step(
    logits: &[f64],
    config: &SamplingConfig,
    rng: &mut ChaCha8Rng,
) -> Result<StepRecord, DecodingError> {
    let (probs, dist) = prepare(logits, config)?;
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut sampled = dist[dist.len() - 1].0;
    for &(i, q) in &dist {
        acc += q;
        if u < acc {
            sampled = i;
            break;
        }
    }
    Ok(StepRecord {
        probs,
        nucleus: dist,
        sampled,
    })
}
