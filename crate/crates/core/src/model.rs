//! Scene graph data types.
//!
//! All types are plain values. Graph fields are public so that callers (and
//! tests) can build graphs that violate invariants; [`crate::validate`] is the
//! single place those invariants are checked.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::taxonomy::{ACTION, DIRECT_OBJECT};

/// Axis-aligned box in pixels, anchored at the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    /// Positive extent, non-negative origin, all coordinates finite.
    pub fn is_valid(&self) -> bool {
        [self.x, self.y, self.w, self.h]
            .iter()
            .all(|v| v.is_finite())
            && self.w > 0.0
            && self.h > 0.0
            && self.x >= 0.0
            && self.y >= 0.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameSlot {
    Pre,
    Pnr,
    Post,
}

impl FrameSlot {
    pub const ALL: [FrameSlot; 3] = [FrameSlot::Pre, FrameSlot::Pnr, FrameSlot::Post];

    pub fn as_str(self) -> &'static str {
        match self {
            FrameSlot::Pre => "pre",
            FrameSlot::Pnr => "pnr",
            FrameSlot::Post => "post",
        }
    }
}

impl std::str::FromStr for FrameSlot {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pre" => Ok(FrameSlot::Pre),
            "pnr" => Ok(FrameSlot::Pnr),
            "post" => Ok(FrameSlot::Post),
            other => Err(format!("unknown frame slot {other:?}")),
        }
    }
}

/// A key frame of the clip.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameRef {
    pub frame: u64,
    /// Seconds from the start of the source video.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uri: Option<String>,
}

impl FrameRef {
    pub fn at(frame: u64) -> Self {
        Self {
            frame,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameTriplet {
    pub pre: FrameRef,
    pub pnr: FrameRef,
    pub post: FrameRef,
}

impl FrameTriplet {
    pub fn new(pre: u64, pnr: u64, post: u64) -> Self {
        Self {
            pre: FrameRef::at(pre),
            pnr: FrameRef::at(pnr),
            post: FrameRef::at(post),
        }
    }

    pub fn get(&self, slot: FrameSlot) -> &FrameRef {
        match slot {
            FrameSlot::Pre => &self.pre,
            FrameSlot::Pnr => &self.pnr,
            FrameSlot::Post => &self.post,
        }
    }

    pub fn is_ordered(&self) -> bool {
        self.pre.frame <= self.pnr.frame && self.pnr.frame <= self.post.frame
    }
}

/// Per-frame boxes of an object. Absent boxes (occlusion, out of view) are
/// `None`, never zero-area boxes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Grounding {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre: Option<BBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pnr: Option<BBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post: Option<BBox>,
}

impl Grounding {
    pub fn uniform(b: BBox) -> Self {
        Self {
            pre: Some(b),
            pnr: Some(b),
            post: Some(b),
        }
    }

    pub fn get(&self, slot: FrameSlot) -> Option<&BBox> {
        match slot {
            FrameSlot::Pre => self.pre.as_ref(),
            FrameSlot::Pnr => self.pnr.as_ref(),
            FrameSlot::Post => self.post.as_ref(),
        }
    }

    pub fn boxes(&self) -> impl Iterator<Item = (FrameSlot, &BBox)> {
        FrameSlot::ALL
            .into_iter()
            .filter_map(move |s| self.get(s).map(|b| (s, b)))
    }

    pub fn count(&self) -> usize {
        self.boxes().count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectNode {
    pub instance_id: u32,
    pub noun: String,
    #[serde(default)]
    pub grounding: Grounding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    /// The camera wearer; carries no attributes.
    #[serde(rename = "cw")]
    CameraWearer,
    Verb {
        verb: String,
    },
    Object(ObjectNode),
}

impl Node {
    pub fn object(instance_id: u32, noun: impl Into<String>, grounding: Grounding) -> Self {
        Node::Object(ObjectNode {
            instance_id,
            noun: noun.into(),
            grounding,
        })
    }

    pub fn verb(verb: impl Into<String>) -> Self {
        Node::Verb { verb: verb.into() }
    }

    pub fn as_object(&self) -> Option<&ObjectNode> {
        match self {
            Node::Object(o) => Some(o),
            _ => None,
        }
    }

    pub fn node_ref(&self) -> NodeRef {
        match self {
            Node::CameraWearer => NodeRef::CameraWearer,
            Node::Verb { .. } => NodeRef::Verb,
            Node::Object(o) => NodeRef::Object(o.instance_id),
        }
    }

    /// Label rendered in text forms (`None` for the camera wearer).
    pub fn label(&self) -> Option<&str> {
        match self {
            Node::CameraWearer => None,
            Node::Verb { verb } => Some(verb),
            Node::Object(o) => Some(&o.noun),
        }
    }

    fn kind_rank(&self) -> u8 {
        match self {
            Node::CameraWearer => 0,
            Node::Verb { .. } => 1,
            Node::Object(_) => 2,
        }
    }
}

/// Reference to a node inside one graph. Camera wearer and verb are unique
/// per graph; objects are addressed by instance id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRef {
    #[serde(rename = "cw")]
    CameraWearer,
    Verb,
    Object(u32),
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeRef::CameraWearer => f.write_str("cw"),
            NodeRef::Verb => f.write_str("verb"),
            NodeRef::Object(id) => write!(f, "object#{id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub src: NodeRef,
    pub dst: NodeRef,
    pub relation: String,
}

impl Edge {
    pub fn new(src: NodeRef, dst: NodeRef, relation: impl Into<String>) -> Self {
        Self {
            src,
            dst,
            relation: relation.into(),
        }
    }

    pub fn is_action(&self) -> bool {
        self.relation == ACTION
    }

    pub fn is_direct_object(&self) -> bool {
        self.relation == DIRECT_OBJECT
    }
}

/// How a grounding of a consensus object was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundingRule {
    /// The annotator designated by a validation answer.
    Answer,
    /// Lowest annotator id among the annotators that drew the object.
    LowestAnnotatorId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingSource {
    pub instance_id: u32,
    pub annotator_id: String,
    pub rule: GroundingRule,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    Seed,
    Annotator {
        annotator_id: String,
    },
    Consensus {
        #[serde(default)]
        groundings: Vec<GroundingSource>,
        /// Free-text corrections left for manual review.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        review: Vec<String>,
    },
    /// Read back from a triplet string.
    Parsed,
}

/// One timestep of an egocentric action scene graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionGraph {
    pub clip_id: String,
    pub timestep: u32,
    pub frames: FrameTriplet,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub provenance: Provenance,
}

impl ActionGraph {
    /// The verb label of the first verb node.
    pub fn verb(&self) -> Option<&str> {
        self.nodes.iter().find_map(|n| match n {
            Node::Verb { verb } => Some(verb.as_str()),
            _ => None,
        })
    }

    pub fn objects(&self) -> impl Iterator<Item = &ObjectNode> {
        self.nodes.iter().filter_map(Node::as_object)
    }

    pub fn object(&self, instance_id: u32) -> Option<&ObjectNode> {
        self.objects().find(|o| o.instance_id == instance_id)
    }

    /// Objects ordered by instance id. Evaluation slots index into this list.
    pub fn objects_by_id(&self) -> Vec<&ObjectNode> {
        let mut objs: Vec<_> = self.objects().collect();
        objs.sort_by_key(|o| o.instance_id);
        objs
    }

    pub fn has_node(&self, r: NodeRef) -> bool {
        self.nodes.iter().any(|n| n.node_ref() == r)
    }

    pub fn node(&self, r: NodeRef) -> Option<&Node> {
        self.nodes.iter().find(|n| n.node_ref() == r)
    }

    /// Text label of a node reference, `None` for the camera wearer or a
    /// dangling reference.
    pub fn label_of(&self, r: NodeRef) -> Option<&str> {
        self.node(r).and_then(Node::label)
    }

    pub fn edge(&self, src: NodeRef, dst: NodeRef) -> Option<&Edge> {
        self.edges.iter().find(|e| e.src == src && e.dst == dst)
    }

    pub fn next_instance_id(&self) -> u32 {
        self.objects().map(|o| o.instance_id + 1).max().unwrap_or(0)
    }

    /// Total-order key for a node reference used by canonical ordering:
    /// kind, class label, instance id. Dangling references sort last.
    pub(crate) fn node_key(&self, r: NodeRef) -> (u8, &str, u32) {
        match self.node(r) {
            Some(n) => {
                let id = match n {
                    Node::Object(o) => o.instance_id,
                    _ => 0,
                };
                (n.kind_rank(), n.label().unwrap_or(""), id)
            }
            None => (
                3,
                "",
                match r {
                    NodeRef::Object(id) => id,
                    _ => 0,
                },
            ),
        }
    }

    pub(crate) fn node_sort_key(n: &Node) -> (u8, &str, u32) {
        let id = match n {
            Node::Object(o) => o.instance_id,
            _ => 0,
        };
        (n.kind_rank(), n.label().unwrap_or(""), id)
    }

    /// Equality of canonical forms, ignoring provenance.
    pub fn content_eq(&self, other: &ActionGraph) -> bool {
        let a = crate::graph::canonicalize(self);
        let b = crate::graph::canonicalize(other);
        a.clip_id == b.clip_id
            && a.timestep == b.timestep
            && a.frames == b.frames
            && a.nodes == b.nodes
            && a.edges == b.edges
    }
}

/// A state-change annotation that seeds a graph: the object of change, the
/// hands and the matched narration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedAnnotation {
    pub clip_id: String,
    pub timestep: u32,
    pub frames: FrameTriplet,
    pub verb: String,
    pub noun: String,
    pub box_object: Grounding,
    #[serde(default)]
    pub box_left_hand: Grounding,
    #[serde(default)]
    pub box_right_hand: Grounding,
    #[serde(default)]
    pub narration: String,
}

impl SeedAnnotation {
    /// A seed with frames 0/1/2, no boxes and no narration.
    pub fn new(
        clip_id: impl Into<String>,
        timestep: u32,
        verb: impl Into<String>,
        noun: impl Into<String>,
    ) -> Self {
        Self {
            clip_id: clip_id.into(),
            timestep,
            frames: FrameTriplet::new(0, 1, 2),
            verb: verb.into(),
            noun: noun.into(),
            box_object: Grounding::default(),
            box_left_hand: Grounding::default(),
            box_right_hand: Grounding::default(),
            narration: String::new(),
        }
    }

    /// Hand boxes to use when an annotator adds a hand node.
    pub fn hand_grounding(&self, noun: &str) -> Option<Grounding> {
        match noun {
            crate::taxonomy::LEFT_HAND => Some(self.box_left_hand),
            crate::taxonomy::RIGHT_HAND => Some(self.box_right_hand),
            _ => None,
        }
    }
}
