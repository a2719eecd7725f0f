use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use langconf_core::corpus::{load_prompts, load_responses};
use langconf_core::detect::{DetectionRecord, Detector, EnglishWordDictionary};
use langconf_core::lid::{
    cross_validate, load_external_predictions, load_model, load_training_corpus,
    parse_training_corpus, save_model, LineClassifier, NGramLidModel, TrainConfig, BUILTIN_CORPUS,
};
use langconf_core::metrics::{aggregate, render_report, GroupField, ReportFormat};
use langconf_core::par::Execution;
use langconf_core::read_jsonl;

use crate::output::{emit, guard_inputs, jsonl};
use crate::Status;

#[derive(Args)]
pub struct TrainLidArgs {
    /// TSV corpus `lang<TAB>text`; the bundled corpus when omitted.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Smallest character n-gram.
    #[arg(long, default_value_t = 1)]
    n_min: usize,
    /// Largest character n-gram.
    #[arg(long, default_value_t = 3)]
    n_max: usize,
    /// Additive smoothing constant.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Posterior below which a line is reported as undetermined.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Also report k-fold held-out accuracy on stderr.
    #[arg(long)]
    eval_folds: Option<usize>,
    /// Where to write the binary model.
    #[arg(long)]
    out: PathBuf,
}

pub fn train_lid(a: TrainLidArgs) -> anyhow::Result<Status> {
    let corpus = match &a.corpus {
        Some(p) => {
            guard_inputs(Some(&a.out), &[p])?;
            load_training_corpus(p).with_context(|| format!("reading {}", p.display()))?
        }
        None => parse_training_corpus(BUILTIN_CORPUS)?,
    };
    let cfg = TrainConfig {
        n_min: a.n_min,
        n_max: a.n_max,
        alpha: a.alpha,
        threshold: a.threshold,
    };
    let model = NGramLidModel::train(&corpus, &cfg)?;
    if let Some(k) = a.eval_folds {
        let r = cross_validate(&corpus, k, &cfg, 5, Execution::default())?;
        eprintln!(
            "held-out accuracy {:.4} over {} lines ({} folds)",
            r.accuracy(),
            r.total(),
            k
        );
    }
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    save_model(&model, &a.out)?;
    Ok(Status::Ok)
}

#[derive(Args)]
pub struct DetectArgs {
    /// Prompts (JSON lines).
    #[arg(long)]
    prompts: PathBuf,
    /// Responses (JSON lines).
    #[arg(long)]
    responses: PathBuf,
    /// Trained n-gram model; the built-in model when neither this nor
    /// --external-lid is given.
    #[arg(long, conflicts_with = "external_lid")]
    lid_model: Option<PathBuf>,
    /// Per-line predictions from another LID tool, TSV
    /// `response_id<TAB>line_index<TAB>lang<TAB>confidence`.
    #[arg(long)]
    external_lid: Option<PathBuf>,
    /// English word list, one word per line; the bundled list when omitted.
    #[arg(long)]
    dictionary: Option<PathBuf>,
    /// Lines with at most this many units are not judged.
    #[arg(long, default_value_t = langconf_core::detect::DEFAULT_GUARD_UNITS)]
    guard_units: usize,
    /// Output file for detection records (JSON lines); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn detect(a: DetectArgs) -> anyhow::Result<Status> {
    let mut inputs: Vec<&Path> = vec![&a.prompts, &a.responses];
    inputs.extend(a.lid_model.as_deref());
    inputs.extend(a.external_lid.as_deref());
    inputs.extend(a.dictionary.as_deref());
    guard_inputs(a.out.as_deref(), &inputs)?;

    let prompts = load_prompts(&a.prompts).with_context(|| format!("reading {}", a.prompts.display()))?;
    let responses =
        load_responses(&a.responses).with_context(|| format!("reading {}", a.responses.display()))?;
    if responses.is_empty() {
        bail!("{} contains no responses", a.responses.display());
    }
    let owned_dict;
    let dictionary = match &a.dictionary {
        Some(p) => {
            owned_dict = EnglishWordDictionary::load(p).with_context(|| format!("reading {}", p.display()))?;
            &owned_dict
        }
        None => EnglishWordDictionary::builtin(),
    };
    let lid: Box<dyn LineClassifier> = match (&a.lid_model, &a.external_lid) {
        (Some(p), _) => Box::new(load_model(p).with_context(|| format!("reading {}", p.display()))?),
        (None, Some(p)) => {
            Box::new(load_external_predictions(p).with_context(|| format!("reading {}", p.display()))?)
        }
        (None, None) => Box::new(NGramLidModel::builtin()),
    };
    let detector = Detector {
        lid: lid.as_ref(),
        dictionary,
        guard_units: a.guard_units,
    };
    let results = detector.detect_all(&responses, &prompts, Execution::default());
    let mut records = Vec::with_capacity(results.len());
    let mut failures = 0;
    for r in results {
        match r {
            Ok(d) => records.push(d),
            Err(e) => {
                eprintln!("warning: {e}");
                failures += 1;
            }
        }
    }
    emit(a.out.as_deref(), &jsonl(&records)?)?;
    Ok(if failures > 0 { Status::Partial } else { Status::Ok })
}

#[derive(Args)]
pub struct ScoreArgs {
    /// Detection records from `detect` (JSON lines).
    #[arg(long)]
    detections: PathBuf,
    /// Comma-separated grouping fields: model, language, dataset, setting.
    #[arg(long, default_value = "")]
    group_by: String,
    /// Report format: csv, md or json.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn score(a: ScoreArgs) -> anyhow::Result<Status> {
    let format: ReportFormat = a.format.parse()?;
    let fields = GroupField::parse_list(&a.group_by)?;
    guard_inputs(a.out.as_deref(), &[&a.detections])?;
    let records: Vec<DetectionRecord> =
        read_jsonl(&a.detections).with_context(|| format!("reading {}", a.detections.display()))?;
    let frames = aggregate(&records, &fields, Execution::default())?;
    emit(a.out.as_deref(), &render_report(&frames, format)?)?;
    Ok(Status::Ok)
}
