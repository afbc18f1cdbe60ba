//! Triplet strings: `A - rel - B` joined by `; `.
//!
//! The first triplet names the verb as `<subject> - verb - <verb>`; the
//! `action` edge is implicit in text form. Next come the `direct object`
//! triplets, then every other edge in canonical order.

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::canonical_edges;
use crate::model::{ActionGraph, Edge, FrameTriplet, Grounding, Node, NodeRef, Provenance};
use crate::taxonomy::{LabelKind, Taxonomy, ACTION};

/// Relation word used in the leading triplet.
pub const VERB_RELATION: &str = "verb";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SubjectToken {
    #[serde(rename = "CW")]
    Cw,
    #[default]
    #[serde(rename = "Camera wearer")]
    CameraWearer,
}

impl SubjectToken {
    pub fn as_str(self) -> &'static str {
        match self {
            SubjectToken::Cw => "CW",
            SubjectToken::CameraWearer => "Camera wearer",
        }
    }

    fn matches(s: &str) -> bool {
        s.eq_ignore_ascii_case("cw") || s.eq_ignore_ascii_case("camera wearer")
    }
}

pub fn to_triplet_string(g: &ActionGraph, subject: SubjectToken) -> String {
    let label = |r: NodeRef| g.label_of(r).unwrap_or("?");
    let verb = g.verb().unwrap_or("?");
    let mut parts = vec![format!("{} - {VERB_RELATION} - {verb}", subject.as_str())];
    let edges = canonical_edges(g);
    let (dobj, rest): (Vec<&Edge>, Vec<&Edge>) = edges
        .into_iter()
        .filter(|e| !e.is_action())
        .partition(|e| e.is_direct_object());
    for e in dobj.into_iter().chain(rest) {
        parts.push(format!(
            "{} - {} - {}",
            label(e.src),
            e.relation,
            label(e.dst)
        ));
    }
    parts.join("; ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnknownLabel {
    pub kind: LabelKind,
    pub label: String,
    /// Character offset of the triplet holding the label.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedGraph {
    pub graph: ActionGraph,
    /// Labels outside the taxonomy, kept verbatim in the graph.
    pub unknown: Vec<UnknownLabel>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TripletParseError {
    #[error("no triplets found")]
    Empty,
    #[error("at offset {offset}: expected {expected}, found {found:?}")]
    Malformed {
        offset: usize,
        expected: &'static str,
        found: String,
    },
    #[error("at offset {offset}: second edge between {src:?} and {dst:?}")]
    DuplicateEdge {
        offset: usize,
        src: String,
        dst: String,
    },
}

impl TripletParseError {
    pub fn offset(&self) -> Option<usize> {
        match self {
            TripletParseError::Empty => None,
            TripletParseError::Malformed { offset, .. }
            | TripletParseError::DuplicateEdge { offset, .. } => Some(*offset),
        }
    }
}

fn prefix_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^\s*(?:Prediction:\s*)?(?:Graph\s+\d+\s*:)?").expect("valid regex")
    })
}

fn sep_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\s+-\s+").expect("valid regex"))
}

/// Splits one `A - rel - B` triplet. Shared with completion parsing.
pub(crate) fn split_triplet(s: &str) -> Option<(&str, &str, &str)> {
    let parts: Vec<&str> = sep_re().split(s.trim()).map(str::trim).collect();
    match parts.as_slice() {
        [a, r, b] if !a.is_empty() && !r.is_empty() && !b.is_empty() => Some((a, r, b)),
        _ => None,
    }
}

/// Segments of a triplet string with their char offsets, after removing a
/// leading `Graph N:` and trailing punctuation.
pub(crate) fn segments(text: &str) -> Vec<(usize, &str)> {
    let skip = prefix_re().find(text).map_or(0, |m| m.end());
    let body = text[skip..].trim_end().trim_end_matches('.');
    let mut out = Vec::new();
    let mut start = skip;
    for seg in body.split(';') {
        let lead = seg.len() - seg.trim_start().len();
        if !seg.trim().is_empty() {
            let byte = start + lead;
            out.push((text[..byte].chars().count(), seg.trim()));
        }
        start += seg.len() + 1;
    }
    out
}

/// Reads a triplet string back into a graph.
///
/// Node ids follow order of appearance. A source label equal to the verb
/// refers to the verb node; any other label names an object, reusing the
/// first object of that class. The result carries no groundings, frames or
/// clip id and is not validated.
pub fn parse_triplet_string(
    text: &str,
    taxonomy: &Taxonomy,
) -> Result<ParsedGraph, TripletParseError> {
    let segs = segments(text);
    let Some(&(first_off, first)) = segs.first() else {
        return Err(TripletParseError::Empty);
    };
    let mut unknown = Vec::new();
    let mut note = |kind, label: &str, offset| {
        if !taxonomy.contains(kind, label) {
            unknown.push(UnknownLabel {
                kind,
                label: label.to_string(),
                offset,
            });
        }
    };

    let verb = match split_triplet(first) {
        Some((s, r, v)) if SubjectToken::matches(s) && r == VERB_RELATION => v.to_string(),
        _ => {
            return Err(TripletParseError::Malformed {
                offset: first_off,
                expected: "`<subject> - verb - <verb>`",
                found: first.to_string(),
            })
        }
    };
    note(LabelKind::Verb, &verb, first_off);

    let mut nodes = vec![Node::CameraWearer, Node::verb(verb.clone())];
    let mut edges = vec![Edge::new(NodeRef::CameraWearer, NodeRef::Verb, ACTION)];
    let mut objects: HashMap<String, u32> = HashMap::new();
    for &(offset, seg) in &segs[1..] {
        let Some((s, r, d)) = split_triplet(seg) else {
            return Err(TripletParseError::Malformed {
                offset,
                expected: "`A - relation - B`",
                found: seg.to_string(),
            });
        };
        if r == VERB_RELATION || r == ACTION {
            return Err(TripletParseError::Malformed {
                offset,
                expected: "a single leading verb triplet",
                found: seg.to_string(),
            });
        }
        note(LabelKind::Relation, r, offset);
        let mut object = |noun: &str, note: &mut dyn FnMut(LabelKind, &str, usize)| {
            if let Some(id) = objects.get(noun) {
                return NodeRef::Object(*id);
            }
            let id = objects.len() as u32;
            objects.insert(noun.to_string(), id);
            nodes.push(Node::object(id, noun, Grounding::default()));
            note(LabelKind::Noun, noun, offset);
            NodeRef::Object(id)
        };
        let src = if s == verb {
            NodeRef::Verb
        } else {
            object(s, &mut note)
        };
        let dst = object(d, &mut note);
        if edges.iter().any(|e| e.src == src && e.dst == dst) {
            return Err(TripletParseError::DuplicateEdge {
                offset,
                src: s.to_string(),
                dst: d.to_string(),
            });
        }
        edges.push(Edge::new(src, dst, r));
    }

    Ok(ParsedGraph {
        graph: ActionGraph {
            clip_id: String::new(),
            timestep: 1,
            frames: FrameTriplet::default(),
            nodes,
            edges,
            provenance: Provenance::Parsed,
        },
        unknown,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::structure;

    fn tax() -> &'static Taxonomy {
        Taxonomy::ego4d_easg()
    }

    fn parse(s: &str) -> ActionGraph {
        parse_triplet_string(s, tax()).unwrap().graph
    }

    #[test]
    fn wash_car_with_sponge() {
        let text = "CW - verb - wash; wash - direct object - car; wash - with - sponge";
        let g = parse(text);
        assert_eq!(to_triplet_string(&g, SubjectToken::Cw), text);
    }

    #[test]
    fn remove_dough_completion() {
        let p = parse_triplet_string(
            "Graph 6: Camera wearer - verb - remove; remove - direct object - dough; remove - from - scale; remove - to - bowl",
            tax(),
        )
        .unwrap();
        let g = p.graph;
        assert_eq!(g.verb(), Some("remove"));
        assert_eq!(crate::graph::direct_objects(&g), vec![NodeRef::Object(0)]);
        assert_eq!(g.object(0).unwrap().noun, "dough");
        assert!(p.unknown.is_empty());
        assert!(crate::validate::validate_graph(&g).is_empty());
    }

    #[test]
    fn take_flour_camera_wearer() {
        let text = "Camera wearer - verb - take; take - direct object - flour; take - from - package; take - with - right hand";
        let p = parse_triplet_string(text, tax()).unwrap();
        assert_eq!(
            to_triplet_string(&p.graph, SubjectToken::CameraWearer),
            text
        );
        // `package` is not in the published noun list
        assert_eq!(p.unknown.len(), 1);
        assert_eq!(p.unknown[0].label, "package");
        assert_eq!(p.unknown[0].offset, text.find("take - from").unwrap());
    }

    #[test]
    fn two_triplets_for_minimal_graph() {
        let g = parse("CW - verb - take; take - direct object - bowl");
        let s = to_triplet_string(&g, SubjectToken::Cw);
        assert_eq!(s.split("; ").count(), 2);
    }

    #[test]
    fn malformed_reports_offset() {
        let err = parse_triplet_string("wash -- car", tax()).unwrap_err();
        assert_eq!(err.offset(), Some(0));
        let err = parse_triplet_string("CW - verb - wash; wash -- car", tax()).unwrap_err();
        assert_eq!(err.offset(), Some(18));
        assert_eq!(
            parse_triplet_string("  ", tax()).unwrap_err(),
            TripletParseError::Empty
        );
    }

    #[test]
    fn object_object_edges_round_trip() {
        let text = "Camera wearer - verb - add; add - direct object - flour; add - to - bowl; add - with - right hand; bowl - with - dough";
        let g = parse(text);
        assert_eq!(to_triplet_string(&g, SubjectToken::CameraWearer), text);
        let again = parse(&to_triplet_string(&g, SubjectToken::CameraWearer));
        assert_eq!(structure(&again), structure(&g));
    }
}
