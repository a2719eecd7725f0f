use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use langconf_core::corpus::{
    build_fewshot, crosslingual_variants, filter_prompts, load_prompts, load_templates,
    FewShotExample, FewShotPrompt, FewShotStyle, FilterConfig, FilterRule, DEFAULT_TEMPLATES,
};
use langconf_core::lang::LanguageCode;
use langconf_core::read_jsonl;
use serde::Serialize;

use crate::output::{emit, guard_inputs, jsonl, parse_list, pretty};
use crate::{Status, DEFAULT_SEED};

#[derive(Args)]
pub struct AmendArgs {
    /// English prompts (JSON lines); non-English prompts are skipped.
    #[arg(long)]
    prompts: PathBuf,
    /// Comma-separated target languages, e.g. `fr,ja,zh`.
    #[arg(long)]
    targets: String,
    /// Instruction templates, one per line, with a `{Language}` slot; the
    /// built-in set when omitted.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Seed for template choice.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output prompts (JSON lines); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn amend(a: AmendArgs) -> anyhow::Result<Status> {
    let mut inputs: Vec<&Path> = vec![&a.prompts];
    inputs.extend(a.templates.as_deref());
    guard_inputs(a.out.as_deref(), &inputs)?;
    let targets: Vec<LanguageCode> = parse_list(&a.targets)?;
    if targets.is_empty() {
        bail!("--targets is empty");
    }
    let templates: Vec<String> = match &a.templates {
        Some(p) => load_templates(p).with_context(|| format!("reading {}", p.display()))?,
        None => DEFAULT_TEMPLATES.iter().map(|s| s.to_string()).collect(),
    };
    let prompts = load_prompts(&a.prompts).with_context(|| format!("reading {}", a.prompts.display()))?;
    let sources: Vec<_> = prompts.into_iter().filter(|p| p.target == LanguageCode::En).collect();
    if sources.is_empty() {
        bail!("{} has no English prompts to amend", a.prompts.display());
    }
    let out = crosslingual_variants(&sources, &targets, &templates, a.seed)?;
    emit(a.out.as_deref(), &jsonl(&out)?)?;
    Ok(Status::Ok)
}

#[derive(Args)]
pub struct FilterArgs {
    /// Prompts (JSON lines).
    #[arg(long)]
    prompts: PathBuf,
    /// Comma-separated rules to apply; all rules when omitted. Rules:
    /// too_short_completion, single_word_answerable, multiple_choice,
    /// list_request, code_or_math, explicit_blocklist.
    #[arg(long)]
    rules: Option<String>,
    /// Prompt ids to drop, one per line.
    #[arg(long)]
    blocklist: Option<PathBuf>,
    /// Removal reasons per dropped prompt (JSON).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Kept prompts (JSON lines); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn filter(a: FilterArgs) -> anyhow::Result<Status> {
    let mut inputs: Vec<&Path> = vec![&a.prompts];
    inputs.extend(a.blocklist.as_deref());
    guard_inputs(a.out.as_deref(), &inputs)?;
    guard_inputs(a.report.as_deref(), &inputs)?;
    let blocklist: HashSet<String> = match &a.blocklist {
        Some(p) => std::fs::read_to_string(p)
            .with_context(|| format!("reading {}", p.display()))?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect(),
        None => HashSet::new(),
    };
    let config = match &a.rules {
        Some(r) => FilterConfig {
            rules: parse_list::<FilterRule, _>(r)?.into_iter().collect::<BTreeSet<_>>(),
            blocklist,
        },
        None => FilterConfig::all_rules(blocklist),
    };
    let prompts = load_prompts(&a.prompts).with_context(|| format!("reading {}", a.prompts.display()))?;
    let (kept, report) = filter_prompts(&prompts, &config);
    eprintln!("kept {} of {} prompts", kept.len(), prompts.len());
    if let Some(p) = &a.report {
        emit(Some(p), &pretty(&report)?)?;
    }
    emit(a.out.as_deref(), &jsonl(&kept)?)?;
    Ok(Status::Ok)
}

#[derive(Args)]
pub struct FewshotArgs {
    /// Demonstrations (JSON lines of `{"question": .., "answer": ..}`).
    #[arg(long)]
    examples: PathBuf,
    /// Prompts to wrap (JSON lines).
    #[arg(long)]
    prompts: PathBuf,
    /// `qa_template` (one Q/A string) or `chat_turns` (alternating turns).
    #[arg(long, default_value = "qa_template")]
    style: String,
    /// Cut demonstration answers to this many characters.
    #[arg(long)]
    answer_budget: Option<usize>,
    /// Output (JSON lines of `{"prompt_id": .., "prompt": ..}`); stdout
    /// when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn parse_style(s: &str) -> anyhow::Result<FewShotStyle> {
    match s {
        "qa_template" | "qa" => Ok(FewShotStyle::QaTemplate),
        "chat_turns" | "chat" => Ok(FewShotStyle::ChatTurns),
        other => bail!("unknown few-shot style {other:?} (expected qa_template or chat_turns)"),
    }
}

pub fn load_examples(path: &Path) -> anyhow::Result<Vec<FewShotExample>> {
    let ex: Vec<FewShotExample> = read_jsonl(path).with_context(|| format!("reading {}", path.display()))?;
    if ex.is_empty() {
        bail!("{} has no demonstrations", path.display());
    }
    Ok(ex)
}

#[derive(Serialize)]
struct Wrapped<'a> {
    prompt_id: &'a str,
    prompt: FewShotPrompt,
}

pub fn fewshot(a: FewshotArgs) -> anyhow::Result<Status> {
    guard_inputs(a.out.as_deref(), &[&a.examples, &a.prompts])?;
    let style = parse_style(&a.style)?;
    let examples = load_examples(&a.examples)?;
    let prompts = load_prompts(&a.prompts).with_context(|| format!("reading {}", a.prompts.display()))?;
    let out: Vec<Wrapped> = prompts
        .iter()
        .map(|p| Wrapped {
            prompt_id: &p.id,
            prompt: build_fewshot(&examples, &p.text, style, a.answer_budget),
        })
        .collect();
    emit(a.out.as_deref(), &jsonl(&out)?)?;
    Ok(Status::Ok)
}
