//! Reading ranked action predictions out of LLM completions.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::triplet::{segments, split_triplet, VERB_RELATION};
use crate::taxonomy::DIRECT_OBJECT;

/// Number of predictions requested from the model.
pub const DEFAULT_PREDICTIONS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionPair {
    pub verb: String,
    pub noun: String,
}

impl ActionPair {
    pub fn new(verb: impl Into<String>, noun: impl Into<String>) -> Self {
        Self {
            verb: verb.into(),
            noun: noun.into(),
        }
    }
}

/// Ranked predictions, best first, without repeats.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionPrediction {
    pub pairs: Vec<ActionPair>,
}

fn item_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?m)(Graph|Action)\s+\d+\s*:\s*(.*?)\s*$").expect("valid regex"))
}

fn from_graph(text: &str) -> Option<ActionPair> {
    let mut verb = None;
    let mut noun = None;
    for (_, seg) in segments(text) {
        match split_triplet(seg) {
            Some((_, r, v)) if r == VERB_RELATION && verb.is_none() => verb = Some(v),
            Some((_, r, n)) if r == DIRECT_OBJECT && noun.is_none() => noun = Some(n),
            _ => {}
        }
    }
    Some(ActionPair::new(verb?, noun?))
}

fn from_action(text: &str) -> Option<ActionPair> {
    let text = text.trim().trim_end_matches('.');
    let (verb, noun) = text.split_once(char::is_whitespace)?;
    let noun = noun.split_whitespace().collect::<Vec<_>>().join(" ");
    (!noun.is_empty()).then(|| ActionPair::new(verb, noun))
}

/// Up to `n` (verb, noun) pairs in completion order.
///
/// `Graph N: ...` items yield the verb and first direct object of the
/// predicted graph; `Action N: verb noun` items split on the first word.
/// Unparseable items are skipped, so garbage yields an empty prediction.
pub fn parse_action_predictions(completion: &str, n: usize) -> ActionPrediction {
    let mut pairs: Vec<ActionPair> = Vec::new();
    for cap in item_re().captures_iter(completion) {
        let body = &cap[2];
        let pair = match &cap[1] {
            "Graph" => from_graph(body),
            _ => from_action(body),
        };
        if let Some(p) = pair {
            if !pairs.contains(&p) {
                pairs.push(p);
            }
        }
        if pairs.len() == n {
            break;
        }
    }
    ActionPrediction { pairs }
}
