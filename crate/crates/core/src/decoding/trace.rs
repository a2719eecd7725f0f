use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DecodingError;
use crate::jsonl::{read_jsonl, write_jsonl};

/// One decoding step as stored in a trace file.
///
/// `candidates` is the full next-token distribution before the nucleus cut,
/// or the top-N slice of it when `truncated` is set. `sampled` indexes into
/// `candidates`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub candidates: Vec<(String, f64)>,
    pub sampled: usize,
    #[serde(default)]
    pub truncated: bool,
}

impl TraceStep {
    pub fn sampled_token(&self) -> Option<&str> {
        self.candidates.get(self.sampled).map(|c| c.0.as_str())
    }

    pub fn validate(&self) -> Result<(), DecodingError> {
        if self.sampled >= self.candidates.len() {
            return Err(DecodingError::Misaligned(format!(
                "sampled index {} with {} candidates",
                self.sampled,
                self.candidates.len()
            )));
        }
        let mut total = 0.0;
        for (tok, p) in &self.candidates {
            if !(p.is_finite() && *p >= 0.0) {
                return Err(DecodingError::InvalidDistribution(format!(
                    "candidate {tok:?} has probability {p}"
                )));
            }
            total += p;
        }
        if total > 1.0 + 1e-9 {
            return Err(DecodingError::InvalidDistribution(format!(
                "candidate probabilities sum to {total}"
            )));
        }
        Ok(())
    }
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<TraceStep>, DecodingError> {
    let steps: Vec<TraceStep> = read_jsonl(path)?;
    for (i, s) in steps.iter().enumerate() {
        s.validate().map_err(|e| DecodingError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
    }
    Ok(steps)
}

pub fn write_trace(path: impl AsRef<Path>, steps: &[TraceStep]) -> Result<(), DecodingError> {
    Ok(write_jsonl(path, steps)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_shape() {
        let s = TraceStep {
            candidates: vec![(" fox".into(), 0.5), (" 狐狸".into(), 0.5)],
            sampled: 1,
            truncated: false,
        };
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"candidates":[[" fox",0.5],[" 狐狸",0.5]],"sampled":1,"truncated":false}"#);
        assert_eq!(s.sampled_token(), Some(" 狐狸"));
    }

    #[test]
    fn round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let steps = vec![
            TraceStep { candidates: vec![("a".into(), 0.25), ("b".into(), 0.75)], sampled: 0, truncated: false },
            TraceStep { candidates: vec![("c".into(), 0.6)], sampled: 0, truncated: true },
        ];
        write_trace(&path, &steps).unwrap();
        assert_eq!(read_trace(&path).unwrap(), steps);

        std::fs::write(&path, "{\"candidates\":[[\"a\",1.0]],\"sampled\":0}\n{\"candidates\":[[\"a\",1.0]],\"sampled\":3}\n").unwrap();
        assert!(matches!(read_trace(&path), Err(DecodingError::Parse { line: 2, .. })));
        std::fs::write(&path, "{\"candidates\":[[\"a\",0.7],[\"b\",0.7]],\"sampled\":0}\n").unwrap();
        assert!(read_trace(&path).is_err());
    }
}
