//! Heuristic prompt filters that approximate manual curation for LID suitability.
//!
//! | rule | fires when |
//! |------|------------|
//! | `too_short_completion` | a reference completion exists and has fewer than 5 word units |
//! | `single_word_answerable` | a question of at most 5 units, or an English factoid opener (`who was`, `how many`, `what year`, ...) in a prompt of at most 12 units |
//! | `multiple_choice` | at least two distinct option markers among `A)`, `B)`, `(a)`, `(b)` |
//! | `list_request` | `list of`, `list the`, `make a list`, `give me a list`, `enumerate`, `bullet points`, `name N ...` |
//! | `code_or_math` | a fenced code block, or 3+ operator characters (`+*/=^<>×÷−±≤≥`) within any 20-character window |
//! | `explicit_blocklist` | the prompt id is on the blocklist |

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::PromptRecord;
use crate::lang::count_units;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterRule {
    TooShortCompletion,
    SingleWordAnswerable,
    MultipleChoice,
    ListRequest,
    CodeOrMath,
    ExplicitBlocklist,
}

impl FilterRule {
    pub const ALL: [FilterRule; 6] = [
        FilterRule::TooShortCompletion,
        FilterRule::SingleWordAnswerable,
        FilterRule::MultipleChoice,
        FilterRule::ListRequest,
        FilterRule::CodeOrMath,
        FilterRule::ExplicitBlocklist,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FilterRule::TooShortCompletion => "too_short_completion",
            FilterRule::SingleWordAnswerable => "single_word_answerable",
            FilterRule::MultipleChoice => "multiple_choice",
            FilterRule::ListRequest => "list_request",
            FilterRule::CodeOrMath => "code_or_math",
            FilterRule::ExplicitBlocklist => "explicit_blocklist",
        }
    }
}

impl fmt::Display for FilterRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FilterRule::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown filter rule {s:?}"))
    }
}

#[derive(Clone, Debug, Default)]
pub struct FilterConfig {
    pub rules: BTreeSet<FilterRule>,
    pub blocklist: HashSet<String>,
}

impl FilterConfig {
    pub fn all_rules(blocklist: HashSet<String>) -> Self {
        FilterConfig {
            rules: FilterRule::ALL.into_iter().collect(),
            blocklist,
        }
    }
}

/// Removal reasons per removed prompt id. Kept prompts do not appear.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub removed: BTreeMap<String, Vec<FilterRule>>,
}

pub fn filter_prompts(
    prompts: &[PromptRecord],
    config: &FilterConfig,
) -> (Vec<PromptRecord>, FilterReport) {
    let mut kept = Vec::new();
    let mut report = FilterReport::default();
    for p in prompts {
        let reasons: Vec<FilterRule> = config
            .rules
            .iter()
            .copied()
            .filter(|&rule| fires(rule, p, &config.blocklist))
            .collect();
        if reasons.is_empty() {
            kept.push(p.clone());
        } else {
            report.removed.insert(p.id.clone(), reasons);
        }
    }
    (kept, report)
}

fn fires(rule: FilterRule, p: &PromptRecord, blocklist: &HashSet<String>) -> bool {
    match rule {
        FilterRule::TooShortCompletion => p
            .completion
            .as_deref()
            .is_some_and(|c| count_units(c, p.target) < 5),
        FilterRule::SingleWordAnswerable => single_word_answerable(p),
        FilterRule::MultipleChoice => multiple_choice(&p.text),
        FilterRule::ListRequest => list_request().is_match(&p.text),
        FilterRule::CodeOrMath => code_or_math(&p.text),
        FilterRule::ExplicitBlocklist => blocklist.contains(&p.id),
    }
}

fn single_word_answerable(p: &PromptRecord) -> bool {
    static FACTOID: OnceLock<Regex> = OnceLock::new();
    let factoid = FACTOID.get_or_init(|| {
        Regex::new(
            r"(?i)^\s*(who (is|was|were)|when (is|was|did)|what year|in (what|which) year|how (many|much|old)|what is the (name|capital)|name the|true or false|yes or no)\b",
        )
        .unwrap()
    });
    let text = p.text.trim();
    let units = count_units(text, p.target);
    let is_question = text.ends_with(['?', '？', '؟']);
    (is_question && units <= 5) || (units <= 12 && factoid.is_match(text))
}

fn multiple_choice(text: &str) -> bool {
    static MARKERS: OnceLock<[Regex; 4]> = OnceLock::new();
    let markers = MARKERS.get_or_init(|| {
        [
            Regex::new(r"(^|[^\w(])A\)").unwrap(),
            Regex::new(r"(^|[^\w(])B\)").unwrap(),
            Regex::new(r"\(a\)").unwrap(),
            Regex::new(r"\(b\)").unwrap(),
        ]
    });
    markers.iter().filter(|m| m.is_match(text)).count() >= 2
}

fn list_request() -> &'static Regex {
    static LIST: OnceLock<Regex> = OnceLock::new();
    LIST.get_or_init(|| {
        Regex::new(
            r"(?i)\b(list of|list the|list some|list all|make a list|give me a list|enumerate|bullet points?)\b|\bname (\d+|two|three|four|five|six|seven|eight|nine|ten)\b",
        )
        .unwrap()
    })
}

fn code_or_math(text: &str) -> bool {
    if text.contains("```") {
        return true;
    }
    const OPS: &[char] = &['+', '*', '/', '=', '^', '<', '>', '×', '÷', '−', '±', '≤', '≥'];
    let chars: Vec<char> = text.chars().collect();
    let is_op: Vec<bool> = chars.iter().map(|c| OPS.contains(c)).collect();
    let window = 20.min(is_op.len());
    if window == 0 {
        return false;
    }
    let mut count = is_op[..window].iter().filter(|&&b| b).count();
    if count >= 3 {
        return true;
    }
    for i in window..is_op.len() {
        count += is_op[i] as usize;
        count -= is_op[i - window] as usize;
        if count >= 3 {
            return true;
        }
    }
    false
}
