//! Sentence form: `CW wash car with sponge`.

use crate::graph::canonical_edges;
use crate::model::{ActionGraph, NodeRef};

use super::triplet::SubjectToken;

/// Hyphenated labels such as `pick-up` read as separate words.
pub(crate) fn words(label: &str) -> String {
    label.replace('-', " ")
}

/// Sentence with the `CW` subject.
pub fn to_sentence(g: &ActionGraph) -> String {
    to_sentence_with(g, SubjectToken::Cw)
}

/// `<subject> <verb> <direct objects> [<relation> <noun>]...` with the
/// direct objects comma-separated and the remaining edges in canonical
/// order, each rendered as its relation followed by the target's class.
pub fn to_sentence_with(g: &ActionGraph, subject: SubjectToken) -> String {
    let label = |r: NodeRef| words(g.label_of(r).unwrap_or("?"));
    let mut out = format!("{} {}", subject.as_str(), words(g.verb().unwrap_or("?")));
    let edges = canonical_edges(g);
    let dobjs: Vec<String> = edges
        .iter()
        .filter(|e| e.is_direct_object())
        .map(|e| label(e.dst))
        .collect();
    if !dobjs.is_empty() {
        out.push(' ');
        out.push_str(&dobjs.join(", "));
    }
    for e in edges
        .iter()
        .filter(|e| !e.is_action() && !e.is_direct_object())
    {
        out.push(' ');
        out.push_str(&e.relation);
        out.push(' ');
        out.push_str(&label(e.dst));
    }
    out
}
