use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use super::{MetricFrame, MetricsError, AVG, WILDCARD};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
    Json,
}

impl FromStr for ReportFormat {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "json" => Ok(ReportFormat::Json),
            other => Err(MetricsError::UnknownFormat(other.to_string())),
        }
    }
}

fn pct(x: f64) -> String {
    format!("{:.1}", x * 100.0)
}

/// Tables (CSV, markdown) show percentages with one decimal; JSON keeps
/// full-precision ratios.
pub fn render_report(frames: &[MetricFrame], format: ReportFormat) -> Result<String, MetricsError> {
    if frames.is_empty() {
        return Err(MetricsError::NoFrames);
    }
    match format {
        ReportFormat::Csv => csv(frames),
        ReportFormat::Markdown => Ok(markdown(frames)),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(frames)
                .map_err(|e| MetricsError::Render(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
    }
}

fn csv(frames: &[MetricFrame]) -> Result<String, MetricsError> {
    let err = |e: csv::Error| MetricsError::Render(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "model",
        "language",
        "dataset",
        "setting",
        "n_responses",
        "lpr",
        "wpr",
        "wpr_defined",
        "lcpr",
        "line_accuracy",
    ])
    .map_err(err)?;
    for f in frames {
        let n = f.n_responses.to_string();
        let (l, wp, lc) = (pct(f.lpr), pct(f.wpr), pct(f.lcpr));
        let acc = f.line_accuracy.map(pct).unwrap_or_default();
        w.write_record([
            f.group.model.as_str(),
            &f.group.language,
            &f.group.dataset,
            &f.group.setting,
            &n,
            &l,
            &wp,
            if f.wpr_defined { "true" } else { "false" },
            &lc,
            &acc,
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| MetricsError::Render(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| MetricsError::Render(e.to_string()))
}

fn row_label(f: &MetricFrame) -> String {
    let parts: Vec<&str> = [&f.group.model, &f.group.dataset, &f.group.setting]
        .into_iter()
        .map(String::as_str)
        .filter(|s| *s != WILDCARD)
        .collect();
    if parts.is_empty() {
        "all".into()
    } else {
        parts.join(" / ")
    }
}

fn markdown(frames: &[MetricFrame]) -> String {
    let pivot = frames.iter().any(|f| f.group.language != WILDCARD);
    let mut out = String::new();
    if !pivot {
        out.push_str("| group | n | LPR | WPR | LCPR | line acc. |\n");
        out.push_str("|---|---:|---:|---:|---:|---:|\n");
        for f in frames {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {}{} | {} | {} |",
                row_label(f),
                f.n_responses,
                pct(f.lpr),
                pct(f.wpr),
                if f.wpr_defined { "" } else { "*" },
                pct(f.lcpr),
                f.line_accuracy.map(pct).unwrap_or_else(|| "-".into()),
            );
        }
        return out;
    }

    // Rows are models (plus any other grouped fields), columns are languages
    // with avg last; one table per metric.
    let mut langs: BTreeSet<&str> = BTreeSet::new();
    let mut has_avg = false;
    let mut cells: BTreeMap<String, BTreeMap<&str, &MetricFrame>> = BTreeMap::new();
    for f in frames {
        if f.group.is_avg() {
            has_avg = true;
        } else {
            langs.insert(&f.group.language);
        }
        cells.entry(row_label(f)).or_default().insert(&f.group.language, f);
    }
    let mut columns: Vec<&str> = langs.into_iter().collect();
    if has_avg {
        columns.push(AVG);
    }
    let metrics: [(&str, fn(&MetricFrame) -> Option<f64>); 4] = [
        ("LPR", |f| Some(f.lpr)),
        ("WPR", |f| Some(f.wpr)),
        ("LCPR", |f| Some(f.lcpr)),
        ("Line accuracy", |f| f.line_accuracy),
    ];
    for (mi, (name, get)) in metrics.iter().enumerate() {
        if mi > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "### {name}\n");
        let _ = writeln!(out, "| model | {} |", columns.join(" | "));
        let _ = writeln!(out, "|---|{}", "---:|".repeat(columns.len()));
        for (label, row) in &cells {
            let vals: Vec<String> = columns
                .iter()
                .map(|c| {
                    row.get(c)
                        .and_then(|f| get(f))
                        .map(pct)
                        .unwrap_or_else(|| "-".into())
                })
                .collect();
            let _ = writeln!(out, "| {label} | {} |", vals.join(" | "));
        }
    }
    out
}
