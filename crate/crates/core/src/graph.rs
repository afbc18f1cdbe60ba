//! Construction and refinement of single-timestep graphs.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::model::{ActionGraph, Edge, Grounding, Node, NodeRef, Provenance, SeedAnnotation};
use crate::taxonomy::{is_reserved_relation, LabelKind, Taxonomy, ACTION, DIRECT_OBJECT};
use crate::validate::{validate_graph, ValidationReport};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("unknown {kind} {label:?}")]
    UnknownLabel { kind: LabelKind, label: String },
    #[error("relation {0:?} is reserved and cannot be added during refinement")]
    ReservedRelation(String),
    #[error("anchor {0} must be the verb node or a direct object")]
    InvalidAnchor(NodeRef),
    #[error("degenerate box in grounding of {0:?}")]
    InvalidBox(String),
    #[error("resulting graph is invalid: {0}")]
    Invalid(ValidationReport),
}

fn check_label(taxonomy: &Taxonomy, kind: LabelKind, label: &str) -> Result<(), ModelError> {
    if taxonomy.contains(kind, label) {
        Ok(())
    } else {
        Err(ModelError::UnknownLabel {
            kind,
            label: label.to_string(),
        })
    }
}

/// Seed graph: camera wearer, verb, and the object of change as the single
/// direct object, grounded with the seed's object boxes. Hands are not added
/// here; they enter during refinement.
pub fn init_graph(seed: &SeedAnnotation, taxonomy: &Taxonomy) -> Result<ActionGraph, ModelError> {
    check_label(taxonomy, LabelKind::Verb, &seed.verb)?;
    check_label(taxonomy, LabelKind::Noun, &seed.noun)?;
    if seed.box_object.boxes().any(|(_, b)| !b.is_valid()) {
        return Err(ModelError::InvalidBox(seed.noun.clone()));
    }
    let g = ActionGraph {
        clip_id: seed.clip_id.clone(),
        timestep: seed.timestep,
        frames: seed.frames.clone(),
        nodes: vec![
            Node::CameraWearer,
            Node::verb(seed.verb.clone()),
            Node::object(0, seed.noun.clone(), seed.box_object),
        ],
        edges: vec![
            Edge::new(NodeRef::CameraWearer, NodeRef::Verb, ACTION),
            Edge::new(NodeRef::Verb, NodeRef::Object(0), DIRECT_OBJECT),
        ],
        provenance: Provenance::Seed,
    };
    let report = validate_graph(&g);
    if !report.is_valid() {
        return Err(ModelError::Invalid(report));
    }
    Ok(g)
}

/// Adds an indirect object linked from `anchor` with a preposition.
///
/// The anchor must be the verb node or an existing direct object. The new
/// object gets the next free instance id.
pub fn add_object_node(
    g: &ActionGraph,
    taxonomy: &Taxonomy,
    noun: &str,
    grounding: Grounding,
    anchor: NodeRef,
    relation: &str,
) -> Result<ActionGraph, ModelError> {
    if is_reserved_relation(relation) {
        return Err(ModelError::ReservedRelation(relation.to_string()));
    }
    check_label(taxonomy, LabelKind::Noun, noun)?;
    check_label(taxonomy, LabelKind::Relation, relation)?;
    let anchor_ok = match anchor {
        NodeRef::Verb => g.has_node(NodeRef::Verb),
        NodeRef::Object(_) => direct_objects(g).contains(&anchor),
        NodeRef::CameraWearer => false,
    };
    if !anchor_ok {
        return Err(ModelError::InvalidAnchor(anchor));
    }
    if grounding.boxes().any(|(_, b)| !b.is_valid()) {
        return Err(ModelError::InvalidBox(noun.to_string()));
    }

    let id = g.next_instance_id();
    let mut out = g.clone();
    out.nodes.push(Node::object(id, noun, grounding));
    out.edges
        .push(Edge::new(anchor, NodeRef::Object(id), relation));
    let report = validate_graph(&out);
    if !report.is_valid() {
        return Err(ModelError::Invalid(report));
    }
    Ok(out)
}

/// Targets of `direct object` edges from the verb, in instance id order.
pub fn direct_objects(g: &ActionGraph) -> Vec<NodeRef> {
    let ids: BTreeSet<u32> = g
        .edges
        .iter()
        .filter(|e| e.is_direct_object() && e.src == NodeRef::Verb)
        .filter_map(|e| match e.dst {
            NodeRef::Object(id) => Some(id),
            _ => None,
        })
        .collect();
    ids.into_iter().map(NodeRef::Object).collect()
}

/// Sorts nodes by (kind, class, instance id) and edges by (src, dst,
/// relation) in that node order. Idempotent and independent of insertion
/// order.
pub fn canonicalize(g: &ActionGraph) -> ActionGraph {
    let mut out = g.clone();
    out.nodes.sort_by(|a, b| {
        ActionGraph::node_sort_key(a)
            .cmp(&ActionGraph::node_sort_key(b))
            .then_with(|| format!("{a:?}").cmp(&format!("{b:?}")))
    });
    out.edges.sort_by(|a, b| {
        (g.node_key(a.src), g.node_key(a.dst), &a.relation).cmp(&(
            g.node_key(b.src),
            g.node_key(b.dst),
            &b.relation,
        ))
    });
    out
}

/// Edges in canonical order.
pub(crate) fn canonical_edges(g: &ActionGraph) -> Vec<&Edge> {
    let mut edges: Vec<&Edge> = g.edges.iter().collect();
    edges.sort_by(|a, b| {
        (g.node_key(a.src), g.node_key(a.dst), &a.relation).cmp(&(
            g.node_key(b.src),
            g.node_key(b.dst),
            &b.relation,
        ))
    });
    edges
}

/// Label-level structure of a graph: what the text forms can express.
///
/// Two graphs with the same structure differ at most in instance ids,
/// groundings, frames and provenance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct GraphStructure {
    pub verb: Option<String>,
    pub objects: Vec<String>,
    pub edges: Vec<(String, String, String)>,
}

pub fn structure(g: &ActionGraph) -> GraphStructure {
    let label = |r: NodeRef| match r {
        NodeRef::CameraWearer => "<cw>".to_string(),
        _ => g.label_of(r).unwrap_or("<missing>").to_string(),
    };
    let mut objects: Vec<String> = g.objects().map(|o| o.noun.clone()).collect();
    objects.sort();
    let mut edges: Vec<(String, String, String)> = g
        .edges
        .iter()
        .map(|e| (label(e.src), e.relation.clone(), label(e.dst)))
        .collect();
    edges.sort();
    GraphStructure {
        verb: g.verb().map(str::to_string),
        objects,
        edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BBox, FrameTriplet};
    use crate::validate::ViolationCode;

    fn seed(verb: &str, noun: &str) -> SeedAnnotation {
        SeedAnnotation {
            clip_id: "clip".into(),
            timestep: 1,
            frames: FrameTriplet::new(10, 20, 30),
            verb: verb.into(),
            noun: noun.into(),
            box_object: Grounding::uniform(BBox::new(1.0, 2.0, 30.0, 40.0)),
            box_left_hand: Grounding::default(),
            box_right_hand: Grounding::uniform(BBox::new(5.0, 5.0, 10.0, 10.0)),
            narration: format!("#C C {verb}s the {noun}"),
        }
    }

    fn tax() -> &'static Taxonomy {
        Taxonomy::ego4d_easg()
    }

    #[test]
    fn init_builds_take_bowl() {
        let g = init_graph(&seed("take", "bowl"), tax()).unwrap();
        assert_eq!(g.verb(), Some("take"));
        assert_eq!(g.nodes.len(), 3);
        assert_eq!(
            g.edge(NodeRef::CameraWearer, NodeRef::Verb)
                .unwrap()
                .relation,
            ACTION
        );
        assert_eq!(
            g.edge(NodeRef::Verb, NodeRef::Object(0)).unwrap().relation,
            DIRECT_OBJECT
        );
        assert_eq!(g.object(0).unwrap().noun, "bowl");
        assert_eq!(g.provenance, Provenance::Seed);
        assert!(validate_graph(&g).is_empty());
    }

    #[test]
    fn init_adds_no_hand_nodes() {
        let g = init_graph(&seed("take", "bowl"), tax()).unwrap();
        assert!(g.objects().all(|o| !crate::taxonomy::is_hand(&o.noun)));
    }

    #[test]
    fn init_rejects_unknown_labels() {
        let err = init_graph(&seed("yeet", "bowl"), tax()).unwrap_err();
        assert_eq!(
            err,
            ModelError::UnknownLabel {
                kind: LabelKind::Verb,
                label: "yeet".into()
            }
        );
        let err = init_graph(&seed("take", "spaceship"), tax()).unwrap_err();
        assert!(err.to_string().contains("spaceship"));
    }

    #[test]
    fn add_hand_with_preposition() {
        let g = init_graph(&seed("take", "bowl"), tax()).unwrap();
        let g = add_object_node(
            &g,
            tax(),
            "right hand",
            Grounding::default(),
            NodeRef::Verb,
            "with",
        )
        .unwrap();
        let e = g.edge(NodeRef::Verb, NodeRef::Object(1)).unwrap();
        assert_eq!(e.relation, "with");
        assert_eq!(g.object(1).unwrap().noun, "right hand");
        assert!(validate_graph(&g).is_empty());
    }

    #[test]
    fn add_anchored_at_direct_object() {
        // neither class is in the published noun list
        let tax = Taxonomy::new(["put"], ["package", "carrot"], ["with"]).unwrap();
        let g = init_graph(&seed("put", "package"), &tax).unwrap();
        let g = add_object_node(
            &g,
            &tax,
            "carrot",
            Grounding::default(),
            NodeRef::Object(0),
            "with",
        )
        .unwrap();
        assert_eq!(
            g.edge(NodeRef::Object(0), NodeRef::Object(1))
                .unwrap()
                .relation,
            "with"
        );
    }

    #[test]
    fn add_rejects_reserved_relations_and_indirect_anchor() {
        let g = init_graph(&seed("take", "bowl"), tax()).unwrap();
        for rel in [ACTION, DIRECT_OBJECT] {
            assert_eq!(
                add_object_node(&g, tax(), "plate", Grounding::default(), NodeRef::Verb, rel)
                    .unwrap_err(),
                ModelError::ReservedRelation(rel.into())
            );
        }
        let g = add_object_node(
            &g,
            tax(),
            "table",
            Grounding::default(),
            NodeRef::Verb,
            "from",
        )
        .unwrap();
        assert_eq!(
            add_object_node(
                &g,
                tax(),
                "cloth",
                Grounding::default(),
                NodeRef::Object(1),
                "on"
            )
            .unwrap_err(),
            ModelError::InvalidAnchor(NodeRef::Object(1))
        );
    }

    #[test]
    fn direct_objects_cases() {
        let g = init_graph(&seed("take", "bowl"), tax()).unwrap();
        assert_eq!(direct_objects(&g), vec![NodeRef::Object(0)]);
        let mut h = g.clone();
        h.edges.retain(|e| !e.is_direct_object());
        assert!(direct_objects(&h).is_empty());
        assert!(validate_graph(&h).has(ViolationCode::NoDirectObject));
    }

    #[test]
    fn canonical_form_ignores_insertion_order() {
        let g = init_graph(&seed("take", "bowl"), tax()).unwrap();
        let g = add_object_node(
            &g,
            tax(),
            "right hand",
            Grounding::default(),
            NodeRef::Verb,
            "with",
        )
        .unwrap();
        let g = add_object_node(
            &g,
            tax(),
            "flour",
            Grounding::default(),
            NodeRef::Object(0),
            "with",
        )
        .unwrap();
        let mut shuffled = g.clone();
        shuffled.edges.reverse();
        shuffled.nodes.rotate_left(2);
        assert_ne!(shuffled, g);
        assert_eq!(canonicalize(&shuffled), canonicalize(&g));
        assert_eq!(canonicalize(&canonicalize(&g)), canonicalize(&g));
    }

    #[test]
    fn one_relation_change_differs_in_one_edge_record() {
        let g = init_graph(&seed("take", "bowl"), tax()).unwrap();
        let a = add_object_node(
            &g,
            tax(),
            "left hand",
            Grounding::default(),
            NodeRef::Verb,
            "with",
        )
        .unwrap();
        let b = add_object_node(
            &g,
            tax(),
            "left hand",
            Grounding::default(),
            NodeRef::Verb,
            "on",
        )
        .unwrap();
        let (ca, cb) = (canonicalize(&a), canonicalize(&b));
        assert_eq!(ca.nodes, cb.nodes);
        let diffs = ca
            .edges
            .iter()
            .zip(&cb.edges)
            .filter(|(x, y)| x != y)
            .count();
        assert_eq!(diffs, 1);
    }
}
