//! Pass rates over detection records.
//!
//! * LPR: share of responses without a line-level error.
//! * WPR: among those, share without a word-level error.
//! * LCPR: harmonic mean of LPR and WPR.
//! * Line accuracy: share of judged (non-skipped) lines in the target language.

mod report;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::detect::{DetectionRecord, LineStatus};
use crate::par::{self, Execution};

pub use report::{render_report, ReportFormat};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("no records to score")]
    Empty,
    #[error("no judged lines; line accuracy is undefined")]
    NoJudgedLines,
    #[error("unknown group-by field {0:?} (expected model, language, dataset or setting)")]
    UnknownField(String),
    #[error("unknown report format {0:?} (expected csv, md or json)")]
    UnknownFormat(String),
    #[error("nothing to render")]
    NoFrames,
    #[error("report rendering failed: {0}")]
    Render(String),
}

pub fn lpr(records: &[DetectionRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let pass = records.iter().filter(|r| !r.has_line_error).count();
    Ok(pass as f64 / records.len() as f64)
}

/// Returns `(1.0, false)` when every response has a line error.
pub fn wpr(records: &[DetectionRecord]) -> Result<(f64, bool), MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let (mut base, mut pass) = (0usize, 0usize);
    for r in records.iter().filter(|r| !r.has_line_error) {
        base += 1;
        pass += usize::from(!r.has_word_error);
    }
    if base == 0 {
        return Ok((1.0, false));
    }
    Ok((pass as f64 / base as f64, true))
}

pub fn lcpr(lpr: f64, wpr: f64) -> f64 {
    if lpr == 0.0 || wpr == 0.0 {
        0.0
    } else {
        2.0 * lpr * wpr / (lpr + wpr)
    }
}

pub fn line_accuracy(records: &[DetectionRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let (judged, passed) = line_counts(records);
    if judged == 0 {
        return Err(MetricsError::NoJudgedLines);
    }
    Ok(passed as f64 / judged as f64)
}

fn line_counts(records: &[DetectionRecord]) -> (usize, usize) {
    let mut judged = 0;
    let mut passed = 0;
    for j in records.iter().flat_map(|r| &r.line_judgments) {
        match j.status {
            LineStatus::Skipped => {}
            LineStatus::Passed => {
                judged += 1;
                passed += 1;
            }
            LineStatus::Failed => judged += 1,
        }
    }
    (judged, passed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupField {
    Model,
    Language,
    Dataset,
    Setting,
}

impl GroupField {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupField::Model => "model",
            GroupField::Language => "language",
            GroupField::Dataset => "dataset",
            GroupField::Setting => "setting",
        }
    }

    /// Parses a comma-separated list such as `model,language`.
    pub fn parse_list(s: &str) -> Result<Vec<GroupField>, MetricsError> {
        let mut out: Vec<GroupField> = s
            .split(',')
            .map(str::trim)
            .filter(|f| !f.is_empty())
            .map(str::parse)
            .collect::<Result<_, _>>()?;
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }
}

impl FromStr for GroupField {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "model" => Ok(GroupField::Model),
            "language" | "lang" | "target" => Ok(GroupField::Language),
            "dataset" => Ok(GroupField::Dataset),
            "setting" => Ok(GroupField::Setting),
            other => Err(MetricsError::UnknownField(other.to_string())),
        }
    }
}

impl fmt::Display for GroupField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const WILDCARD: &str = "*";
pub const AVG: &str = "avg";

/// Grouping key. Fields that are not grouped on hold `*`; the per-language
/// average frames hold `avg` as language.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub model: String,
    pub language: String,
    pub dataset: String,
    pub setting: String,
}

impl GroupKey {
    pub fn all() -> Self {
        GroupKey {
            model: WILDCARD.into(),
            language: WILDCARD.into(),
            dataset: WILDCARD.into(),
            setting: WILDCARD.into(),
        }
    }

    pub fn of(record: &DetectionRecord, fields: &[GroupField]) -> Self {
        let mut k = GroupKey::all();
        for f in fields {
            match f {
                GroupField::Model => k.model = record.model.clone(),
                GroupField::Language => k.language = record.target.as_str().into(),
                GroupField::Dataset => k.dataset = record.dataset.as_str().into(),
                GroupField::Setting => k.setting = record.setting.as_str().into(),
            }
        }
        k
    }

    pub fn is_avg(&self) -> bool {
        self.language == AVG
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricFrame {
    pub group: GroupKey,
    pub n_responses: usize,
    pub lpr: f64,
    pub wpr: f64,
    pub wpr_defined: bool,
    pub lcpr: f64,
    /// `None` when the group has no judged lines.
    pub line_accuracy: Option<f64>,
}

impl MetricFrame {
    pub fn compute(group: GroupKey, records: &[DetectionRecord]) -> Result<Self, MetricsError> {
        let l = lpr(records)?;
        let (w, wpr_defined) = wpr(records)?;
        Ok(MetricFrame {
            group,
            n_responses: records.len(),
            lpr: l,
            wpr: w,
            wpr_defined,
            lcpr: lcpr(l, w),
            line_accuracy: line_accuracy(records).ok(),
        })
    }
}

/// Unweighted mean over per-language frames. WPR averages only the frames
/// where it is defined; LCPR is recomputed from the averaged LPR and WPR.
fn average(group: GroupKey, frames: &[&MetricFrame]) -> MetricFrame {
    let mean = |xs: Vec<f64>| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
    let l = mean(frames.iter().map(|f| f.lpr).collect()).unwrap_or(0.0);
    let defined: Vec<f64> = frames.iter().filter(|f| f.wpr_defined).map(|f| f.wpr).collect();
    let wpr_defined = !defined.is_empty();
    let w = mean(defined).unwrap_or(1.0);
    MetricFrame {
        group,
        n_responses: frames.iter().map(|f| f.n_responses).sum(),
        lpr: l,
        wpr: w,
        wpr_defined,
        lcpr: lcpr(l, w),
        line_accuracy: mean(frames.iter().filter_map(|f| f.line_accuracy).collect()),
    }
}

/// One frame per distinct key, sorted by key. When grouping by language,
/// `avg` frames (one per combination of the other grouped fields) follow,
/// also sorted.
pub fn aggregate(
    records: &[DetectionRecord],
    group_by: &[GroupField],
    exec: Execution,
) -> Result<Vec<MetricFrame>, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut groups: BTreeMap<GroupKey, Vec<DetectionRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(GroupKey::of(r, group_by)).or_default().push(r.clone());
    }
    let groups: Vec<(GroupKey, Vec<DetectionRecord>)> = groups.into_iter().collect();
    let mut frames = par::try_map(exec, &groups, |(k, rs)| MetricFrame::compute(k.clone(), rs))?;

    if group_by.contains(&GroupField::Language) {
        let mut by_rest: BTreeMap<GroupKey, Vec<&MetricFrame>> = BTreeMap::new();
        for f in &frames {
            let k = GroupKey {
                language: AVG.into(),
                ..f.group.clone()
            };
            by_rest.entry(k).or_default().push(f);
        }
        let avgs: Vec<MetricFrame> = by_rest
            .into_iter()
            .map(|(k, fs)| average(k, &fs))
            .collect();
        frames.extend(avgs);
    }
    Ok(frames)
}
