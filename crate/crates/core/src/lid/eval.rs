use std::collections::BTreeMap;

use super::model::{NGramLidModel, TrainConfig};
use super::LidError;
use crate::lang::{count_units, LanguageCode};
use crate::par::{self, Execution};

/// Held-out predictions, counted per source language.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HeldOutReport {
    /// source language -> (correct, total)
    pub per_language: BTreeMap<LanguageCode, (usize, usize)>,
    /// (source, predicted) -> count, errors only
    pub confusions: BTreeMap<(LanguageCode, LanguageCode), usize>,
}

impl HeldOutReport {
    pub fn total(&self) -> usize {
        self.per_language.values().map(|v| v.1).sum()
    }

    pub fn correct(&self) -> usize {
        self.per_language.values().map(|v| v.0).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.correct() as f64 / self.total().max(1) as f64
    }

    /// Accuracy restricted to samples whose source language is in `langs`.
    pub fn accuracy_within(&self, langs: &[LanguageCode]) -> f64 {
        let (c, t) = self
            .per_language
            .iter()
            .filter(|(l, _)| langs.contains(l))
            .fold((0, 0), |acc, (_, v)| (acc.0 + v.0, acc.1 + v.1));
        c as f64 / t.max(1) as f64
    }
}

/// k-fold cross-validation. Within each language, sample `i` (in corpus
/// order) goes to fold `i % folds`. Only held-out samples with at least
/// `min_units` units are scored.
pub fn cross_validate(
    corpus: &[(LanguageCode, String)],
    folds: usize,
    config: &TrainConfig,
    min_units: usize,
    exec: Execution,
) -> Result<HeldOutReport, LidError> {
    if folds < 2 {
        return Err(LidError::InvalidConfig("need at least 2 folds".into()));
    }
    let mut seen: BTreeMap<LanguageCode, usize> = BTreeMap::new();
    let assigned: Vec<usize> = corpus
        .iter()
        .map(|(l, _)| {
            let n = seen.entry(*l).or_default();
            *n += 1;
            (*n - 1) % folds
        })
        .collect();
    let per_fold = par::try_map(exec, &(0..folds).collect::<Vec<_>>(), |&fold| {
        let train: Vec<(LanguageCode, String)> = corpus
            .iter()
            .zip(&assigned)
            .filter(|(_, &f)| f != fold)
            .map(|(s, _)| s.clone())
            .collect();
        let model = NGramLidModel::train(&train, config)?;
        Ok::<_, LidError>(
            corpus
                .iter()
                .zip(&assigned)
                .filter(|((l, t), &f)| f == fold && count_units(t, *l) >= min_units)
                .map(|((l, t), _)| (*l, model.predict(t).language))
                .collect::<Vec<_>>(),
        )
    })?;
    let mut report = HeldOutReport::default();
    for (gold, pred) in per_fold.into_iter().flatten() {
        let e = report.per_language.entry(gold).or_default();
        e.1 += 1;
        if gold == pred {
            e.0 += 1;
        } else {
            *report.confusions.entry((gold, pred)).or_default() += 1;
        }
    }
    Ok(report)
}
