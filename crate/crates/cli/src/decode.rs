use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use langconf_core::decoding::{
    cp_aggregate, find_confusion_points, frequency_summary, load_cp_annotations, read_trace,
    simulate as run_simulation, sweep, sweep_grid, CpMatrix, CpReport, RunSummary, SweepCell,
    ToyLm,
};
use langconf_core::detect::EnglishWordDictionary;
use langconf_core::lang::LanguageCode;
use langconf_core::par::Execution;
use serde::Serialize;

use crate::output::{emit, guard_inputs, jsonl, pretty};
use crate::{SamplingArgs, Status};

#[derive(Args)]
pub struct SimulateArgs {
    /// Toy LM (JSON); the bundled "the quick brown" model when omitted.
    #[arg(long)]
    lm: Option<PathBuf>,
    /// Prompt as a JSON array of tokens; the model's own prompt when omitted.
    #[arg(long)]
    prompt: Option<String>,
    #[command(flatten)]
    sampling: SamplingArgs,
    /// Number of independent runs; run i uses seed + i.
    #[arg(long, default_value_t = 10_000)]
    runs: usize,
    /// Grid such as `T=0.3/0.7/1.0,p=0.75/0.9`; reports the intruder rate
    /// per cell instead of per-token counts.
    #[arg(long)]
    sweep: Option<String>,
    /// Summary format: csv, md or json.
    #[arg(long, default_value = "json")]
    format: String,
    /// Per-run tokens and traces (JSON lines).
    #[arg(long)]
    traces_out: Option<PathBuf>,
    /// Summary output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct RunLine<'a> {
    run: usize,
    seed: u64,
    text: String,
    tokens: Vec<&'a str>,
    trace: &'a [langconf_core::decoding::TraceStep],
}

#[derive(Clone, Copy, PartialEq)]
enum Format {
    Csv,
    Md,
    Json,
}

fn format(s: &str) -> anyhow::Result<Format> {
    Ok(match s {
        "csv" => Format::Csv,
        "md" | "markdown" => Format::Md,
        "json" => Format::Json,
        other => bail!("unknown format {other:?} (expected csv, md or json)"),
    })
}

pub fn simulate(a: SimulateArgs) -> anyhow::Result<Status> {
    let fmt = format(&a.format)?;
    let base = a.sampling.config()?;
    if a.runs == 0 {
        bail!("--runs must be positive");
    }
    let lm = match &a.lm {
        Some(p) => ToyLm::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => ToyLm::quick_brown_fox(),
    };
    if let Some(p) = &a.lm {
        guard_inputs(a.out.as_deref(), &[p])?;
        guard_inputs(a.traces_out.as_deref(), &[p])?;
    }
    let prompt: Vec<String> = match &a.prompt {
        Some(s) => serde_json::from_str(s).context("--prompt must be a JSON array of strings")?,
        None => lm.default_prompt().to_vec(),
    };

    if let Some(spec) = &a.sweep {
        let (temps, ps) = sweep_grid(spec, &base)?;
        let cells = sweep(&lm, &prompt, &base, &temps, &ps, a.runs, Execution::default())?;
        emit(a.out.as_deref(), &render_sweep(&cells, fmt)?)?;
        return Ok(Status::Ok);
    }

    let runs = run_simulation(&lm, &prompt, &base, a.runs, Execution::default())?;
    if let Some(path) = &a.traces_out {
        let lines: Vec<RunLine> = runs
            .iter()
            .enumerate()
            .map(|(i, g)| RunLine {
                run: i,
                seed: base.seed.wrapping_add(i as u64),
                text: g.text(&lm),
                tokens: g.tokens.iter().map(|&t| lm.token(t)).collect(),
                trace: &g.trace,
            })
            .collect();
        emit(Some(path), &jsonl(&lines)?)?;
    }
    let summary = frequency_summary(&lm, &runs);
    emit(a.out.as_deref(), &render_summary(&summary, fmt)?)?;
    Ok(Status::Ok)
}

fn render_summary(s: &RunSummary, fmt: Format) -> anyhow::Result<String> {
    let mut out = String::new();
    match fmt {
        Format::Json => return pretty(s),
        Format::Csv => {
            out.push_str("token,count,runs,rate\n");
            for t in &s.tokens {
                let token = serde_json::to_string(&t.token)?;
                writeln!(out, "{token},{},{},{:.4}", t.count, t.runs, t.rate)?;
            }
        }
        Format::Md => {
            writeln!(out, "{} runs, intruder rate {:.4}\n", s.n_runs, s.intruder_rate)?;
            out.push_str("| token | count | runs | rate |\n|---|---:|---:|---:|\n");
            for t in &s.tokens {
                writeln!(out, "| `{}` | {} | {} | {:.4} |", t.token, t.count, t.runs, t.rate)?;
            }
        }
    }
    Ok(out)
}

fn render_sweep(cells: &[SweepCell], fmt: Format) -> anyhow::Result<String> {
    let mut out = String::new();
    match fmt {
        Format::Json => return pretty(cells),
        Format::Csv => {
            out.push_str("temperature,top_p,n_runs,intruder_runs,intruder_rate\n");
            for c in cells {
                writeln!(
                    out,
                    "{},{},{},{},{:.4}",
                    c.temperature, c.top_p, c.n_runs, c.intruder_runs, c.intruder_rate
                )?;
            }
        }
        Format::Md => {
            // temperatures down, nucleus masses across
            let mut ps: Vec<f64> = Vec::new();
            for c in cells {
                if !ps.contains(&c.top_p) {
                    ps.push(c.top_p);
                }
            }
            let header: Vec<String> = ps.iter().map(|p| format!("p={p}")).collect();
            writeln!(out, "| T | {} |", header.join(" | "))?;
            writeln!(out, "|---|{}", "---:|".repeat(ps.len()))?;
            let mut rows: Vec<(f64, Vec<String>)> = Vec::new();
            for c in cells {
                if rows.last().map(|r| r.0) != Some(c.temperature) {
                    rows.push((c.temperature, Vec::new()));
                }
                rows.last_mut().unwrap().1.push(format!("{:.4}", c.intruder_rate));
            }
            for (t, vals) in rows {
                writeln!(out, "| {t} | {} |", vals.join(" | "))?;
            }
        }
    }
    Ok(out)
}

#[derive(Args)]
pub struct AnalyzeCpsArgs {
    /// Trace files (JSON lines, one step per line). The file stem is the
    /// response id used by --annotations.
    #[arg(long, num_args = 1.., required = true)]
    traces: Vec<PathBuf>,
    /// Target language of the traced responses (non-Latin script).
    #[arg(long)]
    target: LanguageCode,
    /// Nucleus mass used to count nucleus sizes.
    #[arg(long, default_value_t = 0.75)]
    top_p: f64,
    /// TSV `response_id<TAB>step_index` overriding the heuristic for the
    /// listed responses.
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// English word list; the bundled list when omitted.
    #[arg(long)]
    dictionary: Option<PathBuf>,
    /// Report format: md or json.
    #[arg(long, default_value = "json")]
    format: String,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct CpOutput<'a> {
    trace_ids: Vec<String>,
    annotated: Vec<String>,
    report: &'a CpReport,
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn analyze_cps(a: AnalyzeCpsArgs) -> anyhow::Result<Status> {
    let fmt = format(&a.format)?;
    if fmt == Format::Csv {
        bail!("analyze-cps supports md or json");
    }
    let mut inputs: Vec<&Path> = a.traces.iter().map(PathBuf::as_path).collect();
    inputs.extend(a.annotations.as_deref());
    inputs.extend(a.dictionary.as_deref());
    guard_inputs(a.out.as_deref(), &inputs)?;

    let owned_dict;
    let dictionary = match &a.dictionary {
        Some(p) => {
            owned_dict = EnglishWordDictionary::load(p).with_context(|| format!("reading {}", p.display()))?;
            &owned_dict
        }
        None => EnglishWordDictionary::builtin(),
    };
    let annotations = match &a.annotations {
        Some(p) => load_cp_annotations(p).with_context(|| format!("reading {}", p.display()))?,
        None => BTreeMap::new(),
    };
    // order by id so the report does not depend on argument order
    let mut files: BTreeMap<String, &PathBuf> = BTreeMap::new();
    for p in &a.traces {
        if files.insert(stem(p), p).is_some() {
            bail!("two trace files share the id {:?}", stem(p));
        }
    }
    let mut traces = Vec::with_capacity(files.len());
    let mut cps = Vec::with_capacity(files.len());
    let mut annotated = Vec::new();
    for (id, path) in &files {
        let trace = read_trace(path).with_context(|| format!("reading {}", path.display()))?;
        let points = match annotations.get(id) {
            Some(p) => {
                annotated.push(id.clone());
                p.clone()
            }
            None => find_confusion_points(&trace, a.target, dictionary)?,
        };
        traces.push(trace);
        cps.push(points);
    }
    let report = cp_aggregate(&traces, &cps, a.top_p)?;
    let text = match fmt {
        Format::Json => pretty(&CpOutput {
            trace_ids: files.keys().cloned().collect(),
            annotated,
            report: &report,
        })?,
        _ => render_cp_markdown(&report)?,
    };
    emit(a.out.as_deref(), &text)?;
    Ok(Status::Ok)
}

fn render_cp_markdown(r: &CpReport) -> anyhow::Result<String> {
    let mut out = String::new();
    writeln!(
        out,
        "{} traces, {} with a confusion point, p = {}{}\n",
        r.n_traces,
        r.n_with_cp,
        r.top_p,
        if r.lower_bound { " (nucleus sizes are lower bounds)" } else { "" }
    )?;
    let cell = |c: langconf_core::decoding::CpCell| c.mean.map(|m| format!("{m:.3}")).unwrap_or_else(|| "-".into());
    for (name, m) in [("Nucleus size", &r.avg_nucleus_size), ("Entropy", &r.avg_entropy)] {
        let m: &CpMatrix = m;
        writeln!(out, "### {name}\n")?;
        out.push_str("| traces | overall | @CP | not @CP |\n|---|---:|---:|---:|\n");
        for (label, row) in [("has CP", m.has_cp), ("no CP", m.no_cp), ("all", m.all)] {
            writeln!(
                out,
                "| {label} | {} | {} | {} |",
                cell(row.overall),
                cell(row.at_cp),
                cell(row.not_at_cp)
            )?;
        }
        out.push('\n');
    }
    Ok(out)
}
