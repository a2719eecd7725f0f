//! Confusion points: the first step of each wrong-language stretch in a
//! sampled continuation, and nucleus-size / entropy statistics around them.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sampling::{check_distribution, nucleus};
use super::trace::TraceStep;
use super::DecodingError;
use crate::detect::EnglishWordDictionary;
use crate::lang::{latin_runs, script_of_char, LanguageCode, ScriptClass};

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(probs: &[f64]) -> Result<f64, DecodingError> {
    check_distribution(probs)?;
    Ok(-probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStatistics {
    pub nucleus_size: usize,
    pub entropy: f64,
    /// Computed on a top-N slice, so the nucleus size is a lower bound.
    pub truncated: bool,
}

/// Renormalizes the available candidates, then measures the step.
pub fn step_statistics(step: &TraceStep, top_p: f64) -> Result<StepStatistics, DecodingError> {
    step.validate()?;
    let mass: f64 = step.candidates.iter().map(|c| c.1).sum();
    if mass <= 0.0 {
        return Err(DecodingError::InvalidDistribution(
            "step has no probability mass".into(),
        ));
    }
    let probs: Vec<f64> = step.candidates.iter().map(|c| c.1 / mass).collect();
    Ok(StepStatistics {
        nucleus_size: nucleus(&probs, top_p)?.len(),
        entropy: entropy(&probs)?,
        truncated: step.truncated,
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum StepClass {
    /// Whitespace or punctuation only; does not end a region.
    Neutral,
    Wrong,
    Target,
}

fn classify(token: &str) -> StepClass {
    let core = token.trim_matches(|c| script_of_char(c) == ScriptClass::Common);
    if core.is_empty() {
        return StepClass::Neutral;
    }
    let all_latin = core
        .chars()
        .map(script_of_char)
        .filter(|s| s.is_letter_class())
        .all(|s| s == ScriptClass::Latin);
    if all_latin {
        StepClass::Wrong
    } else {
        StepClass::Target
    }
}

/// Heuristic confusion points for a non-Latin target.
///
/// Steps whose sampled token is made of Latin letters form wrong-language
/// regions; punctuation and whitespace tokens neither open nor close a
/// region. A region counts when it holds a dictionary word (see
/// [`EnglishWordDictionary::is_flaggable`]) or at least two Latin tokens,
/// so a lone acronym is not a confusion point. The first step of each
/// counted region is returned.
pub fn find_confusion_points(
    trace: &[TraceStep],
    target: LanguageCode,
    dictionary: &EnglishWordDictionary,
) -> Result<Vec<usize>, DecodingError> {
    if target.profile().latin_script || target == LanguageCode::Und {
        return Err(DecodingError::InvalidConfig(format!(
            "confusion-point heuristic needs a non-Latin target, got {target}"
        )));
    }
    let mut out = Vec::new();
    let mut region: Option<(usize, usize, bool)> = None; // (start, latin tokens, dictionary hit)
    let close = |region: &mut Option<(usize, usize, bool)>, out: &mut Vec<usize>| {
        if let Some((start, n, hit)) = region.take() {
            if hit || n >= 2 {
                out.push(start);
            }
        }
    };
    for (i, step) in trace.iter().enumerate() {
        let token = step.sampled_token().ok_or_else(|| {
            DecodingError::Misaligned(format!(
                "step {i}: sampled index {} with {} candidates",
                step.sampled,
                step.candidates.len()
            ))
        })?;
        match classify(token) {
            StepClass::Neutral => {}
            StepClass::Target => close(&mut region, &mut out),
            StepClass::Wrong => {
                let hit = latin_runs(token)
                    .iter()
                    .any(|r| dictionary.is_flaggable(r.text));
                let r = region.get_or_insert((i, 0, false));
                r.1 += 1;
                r.2 |= hit;
            }
        }
    }
    close(&mut region, &mut out);
    Ok(out)
}

/// Manual annotations, TSV `response_id\tstep_index`. Indices per response
/// come back sorted and deduplicated.
pub fn parse_cp_annotations(text: &str) -> Result<BTreeMap<String, Vec<usize>>, DecodingError> {
    let mut map: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let err = |message: String| DecodingError::Parse { line: i + 1, message };
        let (id, idx) = raw
            .split_once('\t')
            .ok_or_else(|| err("expected response_id<TAB>step_index".into()))?;
        let idx: usize = idx
            .trim()
            .parse()
            .map_err(|e| err(format!("step_index: {e}")))?;
        map.entry(id.to_string()).or_default().push(idx);
    }
    for v in map.values_mut() {
        v.sort_unstable();
        v.dedup();
    }
    Ok(map)
}

pub fn load_cp_annotations(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<usize>>, DecodingError> {
    parse_cp_annotations(&std::fs::read_to_string(path)?)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CpCell {
    pub count: usize,
    pub sum: f64,
    /// Absent when `count` is zero.
    pub mean: Option<f64>,
}

impl CpCell {
    fn from_parts(count: usize, sum: f64) -> Self {
        CpCell {
            count,
            sum,
            mean: (count > 0).then(|| sum / count as f64),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CpRow {
    pub overall: CpCell,
    pub at_cp: CpCell,
    pub not_at_cp: CpCell,
}

impl CpRow {
    fn from_parts(at: (usize, f64), not: (usize, f64)) -> Self {
        CpRow {
            overall: CpCell::from_parts(at.0 + not.0, at.1 + not.1),
            at_cp: CpCell::from_parts(at.0, at.1),
            not_at_cp: CpCell::from_parts(not.0, not.1),
        }
    }

    /// `overall` is the count-weighted combination of the two other cells.
    pub fn identity_holds(&self) -> bool {
        self.overall.count == self.at_cp.count + self.not_at_cp.count
            && self.overall.sum == self.at_cp.sum + self.not_at_cp.sum
    }
}

/// Rows: traces with a confusion point, traces without, all traces.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CpMatrix {
    pub has_cp: CpRow,
    pub no_cp: CpRow,
    pub all: CpRow,
}

impl CpMatrix {
    pub fn identity_holds(&self) -> bool {
        let rows_ok = [self.has_cp, self.no_cp, self.all]
            .iter()
            .all(CpRow::identity_holds);
        let cell_sum = |f: fn(&CpRow) -> CpCell| {
            let (h, n, a) = (f(&self.has_cp), f(&self.no_cp), f(&self.all));
            a.count == h.count + n.count && a.sum == h.sum + n.sum
        };
        rows_ok && cell_sum(|r| r.at_cp) && cell_sum(|r| r.not_at_cp)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpReport {
    pub n_traces: usize,
    pub n_with_cp: usize,
    pub cp_positions: Vec<Vec<usize>>,
    pub top_p: f64,
    pub avg_nucleus_size: CpMatrix,
    pub avg_entropy: CpMatrix,
    /// Some step was truncated; nucleus sizes are lower bounds.
    pub lower_bound: bool,
}

#[derive(Clone, Copy, Default)]
struct Acc {
    at: (usize, f64),
    not: (usize, f64),
}

fn matrix(has: Acc, no: Acc) -> CpMatrix {
    let add = |a: (usize, f64), b: (usize, f64)| (a.0 + b.0, a.1 + b.1);
    CpMatrix {
        has_cp: CpRow::from_parts(has.at, has.not),
        no_cp: CpRow::from_parts(no.at, no.not),
        all: CpRow::from_parts(add(has.at, no.at), add(has.not, no.not)),
    }
}

/// Fills the has-CP / no-CP / all by overall / @CP / not-@CP matrices.
pub fn cp_aggregate(
    traces: &[Vec<TraceStep>],
    cps: &[Vec<usize>],
    top_p: f64,
) -> Result<CpReport, DecodingError> {
    if traces.len() != cps.len() {
        return Err(DecodingError::Misaligned(format!(
            "{} traces but {} confusion-point lists",
            traces.len(),
            cps.len()
        )));
    }
    let mut size = [Acc::default(); 2];
    let mut ent = [Acc::default(); 2];
    let mut positions = Vec::with_capacity(traces.len());
    let mut lower_bound = false;
    let mut n_with_cp = 0;
    for (t, (trace, points)) in traces.iter().zip(cps).enumerate() {
        let mut points = points.clone();
        points.sort_unstable();
        points.dedup();
        if let Some(&bad) = points.iter().find(|&&i| i >= trace.len()) {
            return Err(DecodingError::Misaligned(format!(
                "trace {t}: confusion point {bad} beyond {} steps",
                trace.len()
            )));
        }
        let row = usize::from(points.is_empty());
        n_with_cp += usize::from(!points.is_empty());
        for (i, step) in trace.iter().enumerate() {
            let s = step_statistics(step, top_p)?;
            lower_bound |= s.truncated;
            let (sz, en) = if points.binary_search(&i).is_ok() {
                (&mut size[row].at, &mut ent[row].at)
            } else {
                (&mut size[row].not, &mut ent[row].not)
            };
            sz.0 += 1;
            sz.1 += s.nucleus_size as f64;
            en.0 += 1;
            en.1 += s.entropy;
        }
        positions.push(points);
    }
    Ok(CpReport {
        n_traces: traces.len(),
        n_with_cp,
        cp_positions: positions,
        top_p,
        avg_nucleus_size: matrix(size[0], size[1]),
        avg_entropy: matrix(ent[0], ent[1]),
        lower_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(cands: &[(&str, f64)], sampled: usize) -> TraceStep {
        TraceStep {
            candidates: cands.iter().map(|(t, p)| (t.to_string(), *p)).collect(),
            sampled,
            truncated: false,
        }
    }

    fn one(tok: &str) -> TraceStep {
        step(&[(tok, 1.0)], 0)
    }

    fn dict() -> EnglishWordDictionary {
        EnglishWordDictionary::from_text("called\nwould\nthe\nfox\n")
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&[0.0, 1.0, 0.0]).unwrap(), 0.0);
        assert!((entropy(&[0.25; 4]).unwrap() - 4f64.ln()).abs() < 1e-12);
        let h = entropy(&[0.418, 0.241, 0.179, 0.162]).unwrap();
        // -sum p ln p, term by term
        let oracle = 0.418 * (1.0f64 / 0.418).ln()
            + 0.241 * (1.0f64 / 0.241).ln()
            + 0.179 * (1.0f64 / 0.179).ln()
            + 0.162 * (1.0f64 / 0.162).ln();
        assert!((h - oracle).abs() < 1e-12);
        assert!((h - 1.310).abs() < 0.002, "{h}");
        assert!(entropy(&[0.5, 0.2]).is_err());
    }

    #[test]
    fn no_cp_in_target_script() {
        let trace: Vec<_> = ["我", "们", "，", "今天"].iter().map(|t| one(t)).collect();
        assert!(find_confusion_points(&trace, LanguageCode::Zh, &dict()).unwrap().is_empty());
    }

    #[test]
    fn called_at_step_seven() {
        let mut trace: Vec<_> = ["这", "个", "方法", "在", "计算", "机", "中"].iter().map(|t| one(t)).collect();
        trace.push(step(&[("被", 0.35), ("称为", 0.30), (" called", 0.221), ("叫", 0.129)], 2));
        trace.push(one(" 快速"));
        assert_eq!(find_confusion_points(&trace, LanguageCode::Zh, &dict()).unwrap(), [7]);
    }

    #[test]
    fn english_from_the_start() {
        let trace: Vec<_> = ["The", " quick", " brown", " fox", "."].iter().map(|t| one(t)).collect();
        assert_eq!(find_confusion_points(&trace, LanguageCode::Ja, &dict()).unwrap(), [0]);
    }

    #[test]
    fn lone_acronym_is_not_a_cp() {
        let trace: Vec<_> = ["AI", " ", "に", "関する"].iter().map(|t| one(t)).collect();
        assert!(find_confusion_points(&trace, LanguageCode::Ja, &dict()).unwrap().is_empty());
    }

    #[test]
    fn latin_target_rejected() {
        assert!(find_confusion_points(&[], LanguageCode::Fr, &dict()).is_err());
    }

    #[test]
    fn annotations_parse() {
        let m = parse_cp_annotations("r1\t7\nr1\t3\nr2\t0\nr1\t7\n").unwrap();
        assert_eq!(m["r1"], [3, 7]);
        assert!(matches!(parse_cp_annotations("r1\tx\n"), Err(DecodingError::Parse { line: 1, .. })));
    }

    #[test]
    fn aggregate_without_cps() {
        let traces = vec![vec![step(&[("a", 0.5), ("b", 0.5)], 0), one("c")]];
        let r = cp_aggregate(&traces, &[vec![]], 0.75).unwrap();
        assert_eq!(r.n_with_cp, 0);
        assert!(r.avg_nucleus_size.all.at_cp.mean.is_none());
        assert_eq!(r.avg_nucleus_size.all.overall, r.avg_nucleus_size.all.not_at_cp);
        assert_eq!(r.avg_nucleus_size.all.overall.mean, Some(1.5));
        assert!(r.avg_entropy.identity_holds());
    }

    #[test]
    fn truncated_steps_are_renormalized() {
        let s = TraceStep {
            candidates: vec![("a".into(), 0.3), ("b".into(), 0.3)],
            sampled: 0,
            truncated: true,
        };
        let st = step_statistics(&s, 0.75).unwrap();
        assert_eq!(st.nucleus_size, 2);
        assert!((st.entropy - 2f64.ln()).abs() < 1e-12);
        assert!(st.truncated);
    }

    #[test]
    fn misaligned_points_rejected() {
        let traces = vec![vec![one("a")]];
        assert!(cp_aggregate(&traces, &[vec![3]], 0.75).is_err());
        assert!(cp_aggregate(&traces, &[], 0.75).is_err());
    }
}
