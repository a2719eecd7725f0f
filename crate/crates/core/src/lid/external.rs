use std::collections::HashMap;
use std::path::Path;

use super::{LidError, LidPrediction, LineClassifier};
use crate::lang::LanguageCode;

/// Predictions produced by an external LID tool, keyed by
/// `(response_id, line_index)`. Line indices refer to the non-blank lines
/// returned by [`crate::lang::segment_lines`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExternalPredictions {
    map: HashMap<(String, usize), LidPrediction>,
}

impl ExternalPredictions {
    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, response_id: &str, line_index: usize) -> Option<LidPrediction> {
        self.map.get(&(response_id.to_string(), line_index)).copied()
    }

    /// Parses TSV rows `response_id\tline_index\tlang\tconfidence`.
    pub fn parse(text: &str) -> Result<Self, LidError> {
        let mut map = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let err = |message: String| LidError::Parse { line, message };
            let cols: Vec<&str> = raw.split('\t').collect();
            if cols.len() != 4 {
                return Err(err(format!("expected 4 tab-separated columns, got {}", cols.len())));
            }
            let response_id = cols[0].to_string();
            let line_index: usize = cols[1]
                .trim()
                .parse()
                .map_err(|e| err(format!("line_index: {e}")))?;
            let language: LanguageCode = cols[2]
                .trim()
                .parse()
                .map_err(|e| err(format!("lang: {e}")))?;
            let confidence: f64 = cols[3]
                .trim()
                .parse()
                .map_err(|e| err(format!("confidence: {e}")))?;
            if !(0.0..=1.0).contains(&confidence) {
                return Err(err(format!("confidence {confidence} outside [0, 1]")));
            }
            let key = (response_id, line_index);
            if map.contains_key(&key) {
                return Err(LidError::DuplicateKey {
                    response_id: key.0,
                    line_index,
                    line,
                });
            }
            map.insert(
                key,
                LidPrediction {
                    language,
                    confidence,
                },
            );
        }
        Ok(ExternalPredictions { map })
    }
}

pub fn load_external_predictions(path: impl AsRef<Path>) -> Result<ExternalPredictions, LidError> {
    ExternalPredictions::parse(&std::fs::read_to_string(path)?)
}

impl LineClassifier for ExternalPredictions {
    /// Lines without a prediction are undetermined.
    fn classify_line(&self, response_id: &str, line_index: usize, _line: &str) -> LidPrediction {
        self.get(response_id, line_index)
            .unwrap_or(LidPrediction::UNDETERMINED)
    }
}
