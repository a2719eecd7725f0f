use serde::{Deserialize, Serialize};

use super::sampling::SamplingConfig;
use super::toylm::{generate, Generation, ToyLm};
use super::DecodingError;
use crate::par::{self, Execution};

/// Runs `n_runs` independent generations. Run `i` uses seed
/// `config.seed + i` (wrapping), so results do not depend on scheduling.
pub fn simulate(
    lm: &ToyLm,
    prompt: &[String],
    config: &SamplingConfig,
    n_runs: usize,
    exec: Execution,
) -> Result<Vec<Generation>, DecodingError> {
    config.validate()?;
    par::map_range(exec, n_runs, |run| {
        let cfg = SamplingConfig {
            seed: config.seed.wrapping_add(run as u64),
            ..config.clone()
        };
        generate(lm, prompt, &cfg)
    })
    .into_iter()
    .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenFrequency {
    pub token: String,
    /// Total emissions across all runs.
    pub count: usize,
    /// Runs that emitted the token at least once.
    pub runs: usize,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n_runs: usize,
    pub intruder_runs: usize,
    /// Fraction of runs that emitted any intruder token.
    pub intruder_rate: f64,
    /// One entry per vocabulary token, in vocabulary order.
    pub tokens: Vec<TokenFrequency>,
}

pub fn frequency_summary(lm: &ToyLm, runs: &[Generation]) -> RunSummary {
    let v = lm.vocabulary().len();
    let mut count = vec![0usize; v];
    let mut seen_in = vec![0usize; v];
    let mut intruder_runs = 0;
    let mut seen = vec![false; v];
    for g in runs {
        seen.iter_mut().for_each(|s| *s = false);
        for &t in &g.tokens {
            count[t] += 1;
            seen[t] = true;
        }
        for (t, &s) in seen.iter().enumerate() {
            seen_in[t] += usize::from(s);
        }
        intruder_runs += usize::from(lm.intruders().iter().any(|&i| seen[i]));
    }
    let n = runs.len();
    let rate = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    RunSummary {
        n_runs: n,
        intruder_runs,
        intruder_rate: rate(intruder_runs),
        tokens: (0..v)
            .map(|t| TokenFrequency {
                token: lm.token(t).to_string(),
                count: count[t],
                runs: seen_in[t],
                rate: rate(seen_in[t]),
            })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub temperature: f64,
    pub top_p: f64,
    pub n_runs: usize,
    pub intruder_runs: usize,
    pub intruder_rate: f64,
}

/// Parses a grid such as `T=0.3/0.7/1.0,p=0.75/0.9`. A missing axis falls
/// back to the single value in `base`.
pub fn sweep_grid(spec: &str, base: &SamplingConfig) -> Result<(Vec<f64>, Vec<f64>), DecodingError> {
    let mut temps = vec![base.temperature];
    let mut ps = vec![base.top_p];
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, values) = part.split_once('=').ok_or_else(|| {
            DecodingError::InvalidConfig(format!("sweep axis {part:?} is not KEY=v1/v2/..."))
        })?;
        let values: Vec<f64> = values
            .split('/')
            .map(|v| {
                v.trim().parse::<f64>().map_err(|e| {
                    DecodingError::InvalidConfig(format!("sweep value {v:?}: {e}"))
                })
            })
            .collect::<Result<_, _>>()?;
        match key.trim() {
            "T" | "t" | "temperature" => temps = values,
            "p" | "top_p" => ps = values,
            other => {
                return Err(DecodingError::InvalidConfig(format!(
                    "unknown sweep axis {other:?} (expected T or p)"
                )))
            }
        }
    }
    Ok((temps, ps))
}

/// Intruder rate for every (T, p) pair, temperatures outermost. Every cell
/// reuses the same per-run seeds.
pub fn sweep(
    lm: &ToyLm,
    prompt: &[String],
    base: &SamplingConfig,
    temperatures: &[f64],
    top_ps: &[f64],
    n_runs: usize,
    exec: Execution,
) -> Result<Vec<SweepCell>, DecodingError> {
    let mut out = Vec::with_capacity(temperatures.len() * top_ps.len());
    for &temperature in temperatures {
        for &top_p in top_ps {
            let cfg = SamplingConfig {
                temperature,
                top_p,
                ..base.clone()
            };
            let runs = simulate(lm, prompt, &cfg, n_runs, exec)?;
            let s = frequency_summary(lm, &runs);
            out.push(SweepCell {
                temperature,
                top_p,
                n_runs,
                intruder_runs: s.intruder_runs,
                intruder_rate: s.intruder_rate,
            });
        }
    }
    Ok(out)
}
