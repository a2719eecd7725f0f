use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use super::features::{extract_ngrams, normalize};
use super::{LidError, LidPrediction, LineClassifier};
use crate::lang::{script_of_char, LanguageCode, ScriptClass};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub n_min: usize,
    pub n_max: usize,
    /// Additive smoothing constant.
    pub alpha: f64,
    /// Winners below this posterior are reported as `und`.
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_min: 1,
            n_max: 3,
            alpha: 0.5,
            threshold: 0.5,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), LidError> {
        if self.n_min == 0 || self.n_min > self.n_max || self.n_max > 8 {
            return Err(LidError::InvalidConfig(format!(
                "n-gram range {}..={} must satisfy 1 <= n_min <= n_max <= 8",
                self.n_min, self.n_max
            )));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(LidError::InvalidConfig(format!(
                "smoothing alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(LidError::InvalidConfig(format!(
                "threshold must be in [0, 1], got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Character n-gram Naive-Bayes language classifier.
///
/// For every language `l` and order `n`, the smoothed event space is the set
/// `V_n` of order-`n` grams observed in any language. Observed grams get
/// `ln((c + alpha) / (N_ln + alpha |V_n|))`, grams in `V_n` unseen for `l` get
/// `ln(alpha / (N_ln + alpha |V_n|))`, so each (language, order) distribution
/// sums to one over `V_n`. Grams outside every `V_n` are ignored at
/// prediction time.
#[derive(Clone, Debug, PartialEq)]
pub struct NGramLidModel {
    pub(super) languages: Vec<LanguageCode>,
    pub(super) n_min: usize,
    pub(super) n_max: usize,
    pub(super) alpha: f64,
    pub(super) threshold: f64,
    pub(super) log_priors: Vec<f64>,
    /// Row-major `[language][order - n_min]`.
    pub(super) unseen: Vec<f64>,
    /// gram -> per-language log-probability, `None` where unseen.
    pub(super) table: BTreeMap<String, Vec<Option<f64>>>,
}

impl NGramLidModel {
    /// Trains on `(language, text)` samples. The result does not depend on
    /// sample order.
    pub fn train(corpus: &[(LanguageCode, String)], config: &TrainConfig) -> Result<Self, LidError> {
        config.validate()?;
        if corpus.is_empty() {
            return Err(LidError::EmptyCorpus);
        }
        let orders = config.n_max - config.n_min + 1;
        let mut docs: BTreeMap<LanguageCode, u64> = BTreeMap::new();
        let mut counts: BTreeMap<LanguageCode, HashMap<String, u64>> = BTreeMap::new();
        for (lang, text) in corpus {
            if *lang == LanguageCode::Und {
                return Err(LidError::InvalidConfig(
                    "training samples must not be labelled und".into(),
                ));
            }
            *docs.entry(*lang).or_default() += 1;
            let entry = counts.entry(*lang).or_default();
            for g in extract_ngrams(&normalize(text), config.n_min, config.n_max) {
                *entry.entry(g).or_default() += 1;
            }
        }
        let languages: Vec<LanguageCode> = docs.keys().copied().collect();
        let total_docs: u64 = docs.values().sum();

        let order_of = |g: &str| g.chars().count() - config.n_min;
        let mut vocab_size = vec![0u64; orders];
        let mut vocab: BTreeSet<&str> = BTreeSet::new();
        for c in counts.values() {
            vocab.extend(c.keys().map(String::as_str));
        }
        for g in &vocab {
            vocab_size[order_of(g)] += 1;
        }

        let mut unseen = vec![0.0; languages.len() * orders];
        let mut denominators = vec![0.0; languages.len() * orders];
        for (li, lang) in languages.iter().enumerate() {
            let c = &counts[lang];
            let mut totals = vec![0u64; orders];
            for (g, n) in c {
                totals[order_of(g)] += n;
            }
            if totals.iter().all(|&t| t == 0) {
                return Err(LidError::NoUsableCharacters(*lang));
            }
            for o in 0..orders {
                let denom = totals[o] as f64 + config.alpha * vocab_size[o] as f64;
                denominators[li * orders + o] = denom;
                unseen[li * orders + o] = (config.alpha / denom).ln();
            }
        }

        let mut table = BTreeMap::new();
        for g in vocab {
            let o = order_of(g);
            let row = languages
                .iter()
                .enumerate()
                .map(|(li, lang)| {
                    counts[lang].get(g).map(|&n| {
                        ((n as f64 + config.alpha) / denominators[li * orders + o]).ln()
                    })
                })
                .collect();
            table.insert(g.to_string(), row);
        }

        let log_priors = languages
            .iter()
            .map(|l| (docs[l] as f64 / total_docs as f64).ln())
            .collect();

        Ok(NGramLidModel {
            languages,
            n_min: config.n_min,
            n_max: config.n_max,
            alpha: config.alpha,
            threshold: config.threshold,
            log_priors,
            unseen,
            table,
        })
    }

    /// Trains on the bundled 15-language mini-corpus.
    pub fn builtin() -> Self {
        let corpus = parse_training_corpus(super::BUILTIN_CORPUS).expect("bundled corpus parses");
        Self::train(&corpus, &TrainConfig::default()).expect("bundled corpus trains")
    }

    pub fn languages(&self) -> &[LanguageCode] {
        &self.languages
    }

    pub fn ngram_range(&self) -> (usize, usize) {
        (self.n_min, self.n_max)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    /// Number of distinct grams across all orders.
    pub fn vocabulary_len(&self) -> usize {
        self.table.len()
    }

    /// Log-probability of `gram` under `lang`, including the smoothing mass
    /// for in-vocabulary grams the language never produced. `None` for grams
    /// outside the vocabulary or languages not in the model.
    pub fn log_likelihood(&self, lang: LanguageCode, gram: &str) -> Option<f64> {
        let li = self.languages.iter().position(|&l| l == lang)?;
        let row = self.table.get(gram)?;
        let o = gram.chars().count() - self.n_min;
        Some(row[li].unwrap_or(self.unseen[li * self.orders() + o]))
    }

    pub(super) fn orders(&self) -> usize {
        self.n_max - self.n_min + 1
    }

    /// Language whose writing system alone explains every letter in the
    /// text, when that is unambiguous among the model languages.
    fn script_short_circuit(&self, normalized: &str) -> Option<LanguageCode> {
        let mut class = None;
        for c in normalized.chars() {
            let s = script_of_char(c);
            if s == ScriptClass::Common {
                continue;
            }
            match class {
                None => class = Some(s),
                Some(prev) if prev != s => return None,
                _ => {}
            }
        }
        let class = class?;
        if class == ScriptClass::Latin || class == ScriptClass::Other {
            return None;
        }
        let mut owners = self
            .languages
            .iter()
            .filter(|l| l.profile().writing_system.contains(&class));
        match (owners.next(), owners.next()) {
            (Some(&l), None) => Some(l),
            _ => None,
        }
    }

    /// Posterior over the model languages, in model language order.
    ///
    /// Empty when the text yields no in-vocabulary n-grams.
    pub fn posteriors(&self, text: &str) -> Vec<(LanguageCode, f64)> {
        let normalized = normalize(text);
        if let Some(lang) = self.script_short_circuit(&normalized) {
            return self
                .languages
                .iter()
                .map(|&l| (l, if l == lang { 1.0 } else { 0.0 }))
                .collect();
        }
        let orders = self.orders();
        let mut scores = self.log_priors.clone();
        let mut matched = false;
        for g in extract_ngrams(&normalized, self.n_min, self.n_max) {
            let Some(row) = self.table.get(&g) else {
                continue;
            };
            matched = true;
            let o = g.chars().count() - self.n_min;
            for (li, s) in scores.iter_mut().enumerate() {
                *s += row[li].unwrap_or(self.unseen[li * orders + o]);
            }
        }
        if !matched {
            return Vec::new();
        }
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        self.languages
            .iter()
            .zip(exps)
            .map(|(&l, e)| (l, e / z))
            .collect()
    }

    /// Argmax of the smoothed posterior. Ties go to the lexicographically
    /// smaller language code; winners under the threshold become `und`.
    pub fn predict(&self, text: &str) -> LidPrediction {
        let post = self.posteriors(text);
        let mut best: Option<(LanguageCode, f64)> = None;
        for (l, p) in post {
            if best.map_or(true, |(_, bp)| p > bp) {
                best = Some((l, p));
            }
        }
        match best {
            None => LidPrediction::UNDETERMINED,
            Some((_, p)) if p < self.threshold => LidPrediction {
                language: LanguageCode::Und,
                confidence: p,
            },
            Some((language, confidence)) => LidPrediction {
                language,
                confidence,
            },
        }
    }
}

impl LineClassifier for NGramLidModel {
    fn classify_line(&self, _response_id: &str, _line_index: usize, line: &str) -> LidPrediction {
        self.predict(line)
    }
}

/// Parses `lang\ttext` lines. Blank lines and `#` comments are skipped.
pub fn parse_training_corpus(text: &str) -> Result<Vec<(LanguageCode, String)>, LidError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (lang, sample) = line.split_once('\t').ok_or_else(|| LidError::Parse {
            line: i + 1,
            message: "expected `lang<TAB>text`".into(),
        })?;
        let lang: LanguageCode = lang.trim().parse().map_err(|e| LidError::Parse {
            line: i + 1,
            message: format!("{e}"),
        })?;
        out.push((lang, sample.to_string()));
    }
    Ok(out)
}

pub fn load_training_corpus(path: impl AsRef<Path>) -> Result<Vec<(LanguageCode, String)>, LidError> {
    parse_training_corpus(&std::fs::read_to_string(path)?)
}
