use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use langconf_client::{Client, ClientError, EndpointConfig, HttpTransport};
use langconf_core::corpus::load_prompts;

use crate::data::{load_examples, parse_style};
use crate::output::{emit, guard_inputs, jsonl};
use crate::{SamplingArgs, Status};

#[derive(Args)]
pub struct GenerateArgs {
    /// Endpoint config (JSON): base_url, model, api_key_env, timeout_secs,
    /// max_retries, parallelism, logprobs_top_n, backoff_ms.
    #[arg(long)]
    endpoint: PathBuf,
    /// Prompts (JSON lines).
    #[arg(long)]
    prompts: PathBuf,
    /// Cache, traces and manifest.jsonl live here; reruns replay from it.
    #[arg(long)]
    run_dir: PathBuf,
    #[command(flatten)]
    sampling: SamplingArgs,
    /// Few-shot demonstrations (JSON lines) to wrap every prompt in.
    #[arg(long)]
    fewshot_examples: Option<PathBuf>,
    /// Few-shot style: qa_template or chat_turns.
    #[arg(long, default_value = "chat_turns")]
    style: String,
    /// Responses (JSON lines); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn generate(a: GenerateArgs) -> anyhow::Result<Status> {
    let mut inputs = vec![a.endpoint.as_path(), a.prompts.as_path()];
    inputs.extend(a.fewshot_examples.as_deref());
    guard_inputs(a.out.as_deref(), &inputs)?;
    let cfg = EndpointConfig::load(&a.endpoint)?;
    let sampling = a.sampling.config()?;
    let prompts = load_prompts(&a.prompts).with_context(|| format!("reading {}", a.prompts.display()))?;
    if prompts.is_empty() {
        bail!("{} contains no prompts", a.prompts.display());
    }
    let examples = match &a.fewshot_examples {
        Some(p) => Some(load_examples(p)?),
        None => None,
    };
    let style = parse_style(&a.style)?;
    let fewshot = examples.as_deref().map(|e| (e, style));

    let transport = HttpTransport::new();
    let client = Client::new(cfg, &transport, Some(&a.run_dir))?;
    let outcome = match client.batch_generate(&prompts, &sampling, fewshot) {
        Ok(o) => o,
        Err(e @ ClientError::Cache(_)) => return Err(e.into()),
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(Status::Remote);
        }
    };
    for e in outcome.manifest.iter().filter(|e| e.error.is_some()) {
        eprintln!("warning: {}: {}", e.prompt_id, e.error.as_deref().unwrap_or_default());
    }
    eprintln!(
        "{} responses, {} cache hits, {} failures",
        outcome.responses.len(),
        outcome.cache_hits(),
        outcome.failures()
    );
    emit(a.out.as_deref(), &jsonl(&outcome.responses)?)?;
    Ok(if outcome.any_failure_of("auth") || outcome.responses.is_empty() {
        Status::Remote
    } else if outcome.failures() > 0 {
        Status::Partial
    } else {
        Status::Ok
    })
}
