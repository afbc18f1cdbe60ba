//! Invariant checking for single-timestep graphs.
//!
//! Violations are data: [`validate_graph`] never fails, it lists every broken
//! invariant with a stable machine-readable code.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{ActionGraph, Node, NodeRef};
use crate::taxonomy::{LabelKind, Taxonomy, ACTION, DIRECT_OBJECT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    InvalidTimestep,
    FrameOrder,
    MissingCwNode,
    DuplicateCwNode,
    MissingVerbNode,
    DuplicateVerbNode,
    EmptyLabel,
    DuplicateInstanceId,
    InvalidBox,
    DanglingEdge,
    SelfEdge,
    DuplicateEdge,
    MissingActionEdge,
    MisplacedAction,
    MisplacedDirectObject,
    InvalidCwEdge,
    UnreachableObject,
    UnknownVerb,
    UnknownNoun,
    UnknownRelation,
    DuplicateClip,
    ClipMismatch,
    TimestepSequence,
    InconsistentInstance,
    /// Warning: no object is linked by `direct object`.
    NoDirectObject,
    /// Warning: the verb has several direct objects.
    MultipleDirectObjects,
}

impl ViolationCode {
    pub fn severity(self) -> Severity {
        match self {
            ViolationCode::NoDirectObject | ViolationCode::MultipleDirectObjects => {
                Severity::Warning
            }
            _ => Severity::Error,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::InvalidTimestep => "INVALID_TIMESTEP",
            ViolationCode::FrameOrder => "FRAME_ORDER",
            ViolationCode::MissingCwNode => "MISSING_CW_NODE",
            ViolationCode::DuplicateCwNode => "DUPLICATE_CW_NODE",
            ViolationCode::MissingVerbNode => "MISSING_VERB_NODE",
            ViolationCode::DuplicateVerbNode => "DUPLICATE_VERB_NODE",
            ViolationCode::EmptyLabel => "EMPTY_LABEL",
            ViolationCode::DuplicateInstanceId => "DUPLICATE_INSTANCE_ID",
            ViolationCode::InvalidBox => "INVALID_BOX",
            ViolationCode::DanglingEdge => "DANGLING_EDGE",
            ViolationCode::SelfEdge => "SELF_EDGE",
            ViolationCode::DuplicateEdge => "DUPLICATE_EDGE",
            ViolationCode::MissingActionEdge => "MISSING_ACTION_EDGE",
            ViolationCode::MisplacedAction => "MISPLACED_ACTION",
            ViolationCode::MisplacedDirectObject => "MISPLACED_DIRECT_OBJECT",
            ViolationCode::InvalidCwEdge => "INVALID_CW_EDGE",
            ViolationCode::UnreachableObject => "UNREACHABLE_OBJECT",
            ViolationCode::UnknownVerb => "UNKNOWN_VERB",
            ViolationCode::UnknownNoun => "UNKNOWN_NOUN",
            ViolationCode::UnknownRelation => "UNKNOWN_RELATION",
            ViolationCode::DuplicateClip => "DUPLICATE_CLIP",
            ViolationCode::ClipMismatch => "CLIP_MISMATCH",
            ViolationCode::TimestepSequence => "TIMESTEP_SEQUENCE",
            ViolationCode::InconsistentInstance => "INCONSISTENT_INSTANCE",
            ViolationCode::NoDirectObject => "NO_DIRECT_OBJECT",
            ViolationCode::MultipleDirectObjects => "MULTIPLE_DIRECT_OBJECTS",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn push(&mut self, code: ViolationCode, message: impl Into<String>) {
        self.violations.push(Violation {
            code,
            severity: code.severity(),
            message: message.into(),
        });
    }

    /// No violations of either severity.
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    /// No error-level violations (warnings allowed).
    pub fn is_valid(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(|v| v.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Violation> {
        self.violations
            .iter()
            .filter(|v| v.severity == Severity::Warning)
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    pub fn codes(&self) -> BTreeSet<ViolationCode> {
        self.violations.iter().map(|v| v.code).collect()
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }

    /// Appends `other` with every message prefixed by `context`.
    pub fn extend_with_context(&mut self, context: &str, other: ValidationReport) {
        self.violations
            .extend(other.violations.into_iter().map(|mut v| {
                v.message = format!("{context}: {}", v.message);
                v
            }));
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("no violations");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Structural invariants of one graph.
pub fn validate_graph(g: &ActionGraph) -> ValidationReport {
    use ViolationCode::*;
    let mut r = ValidationReport::default();

    if g.timestep < 1 {
        r.push(InvalidTimestep, format!("timestep {} < 1", g.timestep));
    }
    if !g.frames.is_ordered() {
        r.push(
            FrameOrder,
            format!(
                "frames not ordered: pre {} pnr {} post {}",
                g.frames.pre.frame, g.frames.pnr.frame, g.frames.post.frame
            ),
        );
    }

    let cw_count = g
        .nodes
        .iter()
        .filter(|n| matches!(n, Node::CameraWearer))
        .count();
    let verb_count = g
        .nodes
        .iter()
        .filter(|n| matches!(n, Node::Verb { .. }))
        .count();
    match cw_count {
        0 => r.push(MissingCwNode, "graph has no camera wearer node"),
        1 => {}
        n => r.push(
            DuplicateCwNode,
            format!("graph has {n} camera wearer nodes"),
        ),
    }
    match verb_count {
        0 => r.push(MissingVerbNode, "graph has no verb node"),
        1 => {}
        n => r.push(DuplicateVerbNode, format!("graph has {n} verb nodes")),
    }

    let mut ids = HashSet::new();
    for node in &g.nodes {
        match node {
            Node::CameraWearer => {}
            Node::Verb { verb } => {
                if verb.trim().is_empty() {
                    r.push(EmptyLabel, "verb node has an empty class");
                }
            }
            Node::Object(o) => {
                if o.noun.trim().is_empty() {
                    r.push(
                        EmptyLabel,
                        format!("object#{} has an empty class", o.instance_id),
                    );
                }
                if !ids.insert(o.instance_id) {
                    r.push(
                        DuplicateInstanceId,
                        format!("instance id {} used by several objects", o.instance_id),
                    );
                }
                for (slot, b) in o.grounding.boxes() {
                    if !b.is_valid() {
                        r.push(
                            InvalidBox,
                            format!(
                                "object#{} {} box {:?} is degenerate",
                                o.instance_id,
                                slot.as_str(),
                                b
                            ),
                        );
                    }
                }
            }
        }
    }

    let mut pairs = HashSet::new();
    let mut action_edges = 0usize;
    let mut dobj_targets = BTreeSet::new();
    // adjacency used for the reachability rule
    let mut neighbours: HashMap<NodeRef, Vec<NodeRef>> = HashMap::new();
    for e in &g.edges {
        let dangling: Vec<_> = [e.src, e.dst]
            .into_iter()
            .filter(|n| !g.has_node(*n))
            .collect();
        if !dangling.is_empty() {
            r.push(
                DanglingEdge,
                format!("edge {} -> {} references a missing node", e.src, e.dst),
            );
        }
        if e.src == e.dst {
            r.push(SelfEdge, format!("self edge on {}", e.src));
        }
        if !pairs.insert((e.src, e.dst)) {
            r.push(
                DuplicateEdge,
                format!("more than one edge {} -> {}", e.src, e.dst),
            );
        }
        if e.relation.trim().is_empty() {
            r.push(
                EmptyLabel,
                format!("edge {} -> {} has no relation", e.src, e.dst),
            );
        }
        let involves_cw = e.src == NodeRef::CameraWearer || e.dst == NodeRef::CameraWearer;
        if e.relation == ACTION {
            if e.src == NodeRef::CameraWearer && e.dst == NodeRef::Verb {
                action_edges += 1;
            } else {
                r.push(
                    MisplacedAction,
                    format!("`action` on {} -> {}", e.src, e.dst),
                );
            }
        } else if involves_cw {
            r.push(
                InvalidCwEdge,
                format!(
                    "camera wearer takes part only in the action edge, found {} -> {} ({})",
                    e.src, e.dst, e.relation
                ),
            );
        }
        if e.relation == DIRECT_OBJECT {
            if e.src == NodeRef::Verb && matches!(e.dst, NodeRef::Object(_)) {
                dobj_targets.insert(e.dst);
            } else {
                r.push(
                    MisplacedDirectObject,
                    format!("`direct object` on {} -> {}", e.src, e.dst),
                );
            }
        }
        neighbours.entry(e.src).or_default().push(e.dst);
        neighbours.entry(e.dst).or_default().push(e.src);
    }

    if action_edges == 0 {
        r.push(
            MissingActionEdge,
            "no `action` edge from camera wearer to verb",
        );
    }

    for o in g.objects() {
        let me = NodeRef::Object(o.instance_id);
        if dobj_targets.contains(&me) {
            continue;
        }
        let linked = neighbours
            .get(&me)
            .into_iter()
            .flatten()
            .any(|n| *n == NodeRef::Verb || dobj_targets.contains(n));
        if !linked {
            r.push(
                UnreachableObject,
                format!(
                    "object#{} ({}) is neither a direct object nor linked to the verb or a direct object",
                    o.instance_id, o.noun
                ),
            );
        }
    }

    match dobj_targets.len() {
        0 => r.push(NoDirectObject, "verb has no direct object"),
        1 => {}
        n => r.push(
            MultipleDirectObjects,
            format!("verb has {n} direct objects"),
        ),
    }
    r
}

/// Structural invariants plus taxonomy membership of every label.
pub fn validate_graph_against(g: &ActionGraph, taxonomy: &Taxonomy) -> ValidationReport {
    use ViolationCode::*;
    let mut r = validate_graph(g);
    for node in &g.nodes {
        match node {
            Node::Verb { verb } if !taxonomy.contains(LabelKind::Verb, verb) => {
                r.push(UnknownVerb, format!("unknown verb {verb:?}"))
            }
            Node::Object(o) if !taxonomy.contains(LabelKind::Noun, &o.noun) => {
                r.push(UnknownNoun, format!("unknown noun {:?}", o.noun))
            }
            _ => {}
        }
    }
    for e in &g.edges {
        if !taxonomy.contains(LabelKind::Relation, &e.relation) {
            r.push(
                UnknownRelation,
                format!("unknown relation {:?}", e.relation),
            );
        }
    }
    r
}
