//! `langconf`: measure language confusion in model outputs.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 partial failure,
//! 4 remote or authentication failure.

mod data;
mod decode;
mod evaluate;
mod output;
mod remote;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use langconf_core::decoding::SamplingConfig;

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 0;

#[derive(Parser)]
#[command(name = "langconf", version, about = "Detect, score and simulate language confusion in LLM outputs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the character n-gram language identifier.
    TrainLid(evaluate::TrainLidArgs),
    /// Judge every response for line- and word-level confusion.
    Detect(evaluate::DetectArgs),
    /// Compute LPR, WPR, LCPR and line accuracy from detections.
    Score(evaluate::ScoreArgs),
    /// Sample from a toy LM and count wrong-language tokens.
    Simulate(decode::SimulateArgs),
    /// Summarize nucleus size and entropy around confusion points.
    AnalyzeCps(decode::AnalyzeCpsArgs),
    /// Build cross-lingual prompts from English ones.
    Amend(data::AmendArgs),
    /// Drop prompts that make poor confusion probes.
    Filter(data::FilterArgs),
    /// Wrap prompts in few-shot demonstrations.
    Fewshot(data::FewshotArgs),
    /// Collect responses from an OpenAI-compatible endpoint.
    Generate(remote::GenerateArgs),
}

/// Sampling flags shared by `simulate` and `generate`.
#[derive(Args, Clone, Debug)]
pub struct SamplingArgs {
    /// Softmax temperature; 0 means greedy.
    #[arg(long, default_value_t = 0.3)]
    temperature: f64,
    /// Nucleus mass p in (0, 1].
    #[arg(long, default_value_t = 0.75)]
    top_p: f64,
    /// Keep only the k most likely tokens before the nucleus cut.
    #[arg(long)]
    top_k: Option<usize>,
    /// Maximum number of generated tokens.
    #[arg(long, default_value_t = 100)]
    max_tokens: usize,
    /// Seed for every random choice.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

impl SamplingArgs {
    pub fn config(&self) -> anyhow::Result<SamplingConfig> {
        let c = SamplingConfig {
            temperature: self.temperature,
            top_p: self.top_p,
            top_k: self.top_k,
            seed: self.seed,
            max_tokens: self.max_tokens,
        };
        c.validate()?;
        Ok(c)
    }
}

/// Non-error outcomes that still deserve a non-zero exit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Partial,
    Remote,
}

fn run(cli: Cli) -> anyhow::Result<Status> {
    match cli.command {
        Command::TrainLid(a) => evaluate::train_lid(a),
        Command::Detect(a) => evaluate::detect(a),
        Command::Score(a) => evaluate::score(a),
        Command::Simulate(a) => decode::simulate(a),
        Command::AnalyzeCps(a) => decode::analyze_cps(a),
        Command::Amend(a) => data::amend(a),
        Command::Filter(a) => data::filter(a),
        Command::Fewshot(a) => data::fewshot(a),
        Command::Generate(a) => remote::generate(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Partial) => ExitCode::from(3),
        Ok(Status::Remote) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
