//! Random valid graphs and single-invariant mutations.

use easg_core::eval::{GraphPredictions, LabelScore, PairPrediction, Slot};
use easg_core::formats::{ClipRecord, DataSplit, DatasetFile};
use easg_core::taxonomy::{is_reserved_relation, ACTION, DIRECT_OBJECT};
use easg_core::temporal::{recollect, CorrespondenceOverride};
use easg_core::{
    add_object_node, direct_objects, init_graph, ActionGraph, BBox, Edge, FrameTriplet, Grounding,
    Node, NodeRef, SeedAnnotation, Taxonomy, ViolationCode,
};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn random_bbox<R: Rng>(rng: &mut R) -> BBox {
    BBox::new(
        rng.gen_range(0.0..1000.0),
        rng.gen_range(0.0..1000.0),
        rng.gen_range(1.0..300.0),
        rng.gen_range(1.0..300.0),
    )
}

pub fn random_grounding<R: Rng>(rng: &mut R) -> Grounding {
    let slot = |rng: &mut R| rng.gen_bool(0.8).then(|| random_bbox(rng));
    Grounding {
        pre: slot(rng),
        pnr: slot(rng),
        post: slot(rng),
    }
}

fn pick<'a, R: Rng>(rng: &mut R, items: &'a [String]) -> &'a str {
    items.choose(rng).expect("non-empty label list")
}

/// Prepositions usable during refinement.
pub fn prepositions(tax: &Taxonomy) -> Vec<String> {
    tax.relations()
        .iter()
        .filter(|r| !is_reserved_relation(r))
        .cloned()
        .collect()
}

/// A valid graph built through the public constructors, with up to
/// `max_objects` objects. Some graphs get extra direct objects.
pub fn random_graph<R: Rng>(rng: &mut R, tax: &Taxonomy, max_objects: usize) -> ActionGraph {
    let preps = prepositions(tax);
    let pre = rng.gen_range(0..10_000u64);
    let pnr = pre + rng.gen_range(0..60);
    let post = pnr + rng.gen_range(0..60);
    let mut frames = FrameTriplet::new(pre, pnr, post);
    if rng.gen_bool(0.5) {
        frames.pre.timestamp = Some(pre as f64 / 30.0);
        frames.pnr.timestamp = Some(pnr as f64 / 30.0);
        frames.post.timestamp = Some(post as f64 / 30.0);
    }
    let mut seed = SeedAnnotation::new(
        format!("clip-{:04}", rng.gen_range(0..10_000)),
        rng.gen_range(1..=40),
        pick(rng, tax.verbs()),
        pick(rng, tax.nouns()),
    );
    seed.frames = frames;
    seed.box_object = random_grounding(rng);
    let mut g = init_graph(&seed, tax).expect("seed labels come from the taxonomy");
    let extra = rng.gen_range(0..max_objects.max(1));
    for _ in 0..extra {
        let dobjs = direct_objects(&g);
        let anchor = if rng.gen_bool(0.5) {
            NodeRef::Verb
        } else {
            *dobjs.choose(rng).expect("seed has a direct object")
        };
        let noun = pick(rng, tax.nouns());
        let rel = pick(rng, &preps);
        g = add_object_node(&g, tax, noun, random_grounding(rng), anchor, rel)
            .expect("constructor keeps invariants");
        if anchor == NodeRef::Verb && rng.gen_bool(0.15) {
            // promote the new object to a second direct object
            let id = g.next_instance_id() - 1;
            if let Some(e) = g.edges.iter_mut().find(|e| e.dst == NodeRef::Object(id)) {
                e.relation = DIRECT_OBJECT.to_string();
            }
        }
    }
    g
}

/// A valid graph with exactly `objects` objects.
pub fn random_graph_with<R: Rng>(rng: &mut R, tax: &Taxonomy, objects: usize) -> ActionGraph {
    loop {
        let g = random_graph(rng, tax, objects);
        if g.objects().count() == objects.max(1) {
            return g;
        }
    }
}

/// Every invariant the mutator can break.
pub const MUTATIONS: [ViolationCode; 20] = [
    ViolationCode::InvalidTimestep,
    ViolationCode::FrameOrder,
    ViolationCode::MissingCwNode,
    ViolationCode::DuplicateCwNode,
    ViolationCode::MissingVerbNode,
    ViolationCode::DuplicateVerbNode,
    ViolationCode::EmptyLabel,
    ViolationCode::DuplicateInstanceId,
    ViolationCode::InvalidBox,
    ViolationCode::DanglingEdge,
    ViolationCode::SelfEdge,
    ViolationCode::DuplicateEdge,
    ViolationCode::MissingActionEdge,
    ViolationCode::MisplacedAction,
    ViolationCode::MisplacedDirectObject,
    ViolationCode::InvalidCwEdge,
    ViolationCode::UnreachableObject,
    ViolationCode::UnknownVerb,
    ViolationCode::UnknownNoun,
    ViolationCode::UnknownRelation,
];

fn first_object(g: &ActionGraph) -> u32 {
    g.objects().next().expect("graph has an object").instance_id
}

/// Breaks exactly the invariant named by `code` in a valid graph.
pub fn mutate<R: Rng>(rng: &mut R, g: &ActionGraph, code: ViolationCode) -> ActionGraph {
    use ViolationCode::*;
    let mut m = g.clone();
    let obj = NodeRef::Object(first_object(g));
    match code {
        InvalidTimestep => m.timestep = 0,
        FrameOrder => m.frames.pre.frame = m.frames.post.frame + rng.gen_range(1..100),
        MissingCwNode => m.nodes.retain(|n| !matches!(n, Node::CameraWearer)),
        DuplicateCwNode => m.nodes.push(Node::CameraWearer),
        MissingVerbNode => m.nodes.retain(|n| !matches!(n, Node::Verb { .. })),
        DuplicateVerbNode => m
            .nodes
            .push(Node::verb(pick(rng, Taxonomy::ego4d_easg().verbs()))),
        EmptyLabel => {
            if let Some(Node::Object(o)) = m.nodes.iter_mut().find(|n| matches!(n, Node::Object(_)))
            {
                o.noun = String::new();
            }
        }
        DuplicateInstanceId => {
            let copy = g.objects().next().cloned().expect("object");
            m.nodes.push(Node::Object(copy));
        }
        InvalidBox => {
            if let Some(Node::Object(o)) = m.nodes.iter_mut().find(|n| matches!(n, Node::Object(_)))
            {
                o.grounding.pnr = Some(BBox::new(0.0, 0.0, -rng.gen_range(0.0..5.0), 10.0));
            }
        }
        DanglingEdge => m.edges.push(Edge::new(
            NodeRef::Verb,
            NodeRef::Object(g.next_instance_id() + 7),
            "with",
        )),
        SelfEdge => m.edges.push(Edge::new(obj, obj, "on")),
        DuplicateEdge => {
            let e = g
                .edges
                .iter()
                .find(|e| e.src == NodeRef::Verb)
                .cloned()
                .expect("verb edge");
            m.edges.push(Edge::new(
                e.src,
                e.dst,
                if e.relation == "in" { "on" } else { "in" },
            ));
        }
        MissingActionEdge => m.edges.retain(|e| e.relation != ACTION),
        MisplacedAction => m.edges.push(Edge::new(obj, NodeRef::Verb, ACTION)),
        MisplacedDirectObject => m.edges.push(Edge::new(obj, NodeRef::Verb, DIRECT_OBJECT)),
        InvalidCwEdge => m.edges.push(Edge::new(NodeRef::CameraWearer, obj, "with")),
        UnreachableObject => m.nodes.push(Node::object(
            g.next_instance_id(),
            pick(rng, Taxonomy::ego4d_easg().nouns()),
            Grounding::default(),
        )),
        UnknownVerb => {
            if let Some(Node::Verb { verb }) =
                m.nodes.iter_mut().find(|n| matches!(n, Node::Verb { .. }))
            {
                *verb = "teleport".into();
            }
        }
        UnknownNoun => {
            if let Some(Node::Object(o)) = m.nodes.iter_mut().find(|n| matches!(n, Node::Object(_)))
            {
                o.noun = "hoverboard".into();
            }
        }
        UnknownRelation => {
            if let Some(e) = m.edges.iter_mut().find(|e| e.relation == DIRECT_OBJECT) {
                e.relation = "beside".into();
            }
        }
        other => panic!("no mutation for {other:?}"),
    }
    m
}

fn random_scores<R: Rng>(
    rng: &mut R,
    labels: &[String],
    gt: Option<&str>,
    max: usize,
) -> Vec<LabelScore> {
    let n = rng.gen_range(1..=max.min(labels.len()));
    let mut chosen: Vec<&String> = labels.choose_multiple(rng, n).collect();
    if let Some(gt) = gt {
        if rng.gen_bool(0.6) && !chosen.iter().any(|l| *l == gt) {
            if let Some(l) = labels.iter().find(|l| *l == gt) {
                chosen[0] = l;
            }
        }
    }
    // coarse scores produce ties that exercise the tie-breaking rules
    let coarse = rng.gen_bool(0.5);
    chosen
        .into_iter()
        .map(|l| {
            let s = if coarse {
                rng.gen_range(0..=4) as f64 / 4.0
            } else {
                rng.gen::<f64>()
            };
            LabelScore::new(l.clone(), s)
        })
        .collect()
}

/// A random ground-truth graph with at most `max_objects` objects and
/// random slot-aligned predictions over the ground-truth pairs plus a few
/// other pairs.
pub fn random_instance<R: Rng>(
    rng: &mut R,
    tax: &Taxonomy,
    max_objects: usize,
) -> (ActionGraph, GraphPredictions) {
    let g = random_graph(rng, tax, max_objects);
    let objects = g.objects_by_id();
    let n = objects.len() as u32;
    let slots: Vec<Slot> = std::iter::once(Slot::Verb)
        .chain((0..n).map(Slot::Object))
        .collect();
    let mut pairs: Vec<(Slot, Slot)> = easg_core::eval::gt_triplets(&g, true)
        .into_iter()
        .map(|t| (t.src, t.dst))
        .collect();
    for _ in 0..rng.gen_range(0..3) {
        let a = *slots.choose(rng).expect("slots");
        let b = *slots.choose(rng).expect("slots");
        if a != b && !pairs.contains(&(a, b)) {
            pairs.push((a, b));
        }
    }
    pairs.shuffle(rng);
    let triplets = easg_core::eval::gt_triplets(&g, true);
    let relations = pairs
        .into_iter()
        .map(|(src, dst)| {
            let gt = triplets
                .iter()
                .find(|t| t.src == src && t.dst == dst)
                .map(|t| t.relation.as_str());
            PairPrediction {
                src,
                dst,
                relations: random_scores(rng, tax.relations(), gt, 16),
            }
        })
        .collect();
    let p = GraphPredictions {
        clip_id: g.clip_id.clone(),
        timestep: g.timestep,
        verbs: random_scores(rng, tax.verbs(), g.verb(), 6),
        objects: objects
            .iter()
            .map(|o| random_scores(rng, tax.nouns(), Some(&o.noun), 6))
            .collect(),
        relations,
    };
    (g, p)
}

/// Whether the triplet text form can express `g`: object classes are
/// unique and none equals the verb.
pub fn has_text_form(g: &ActionGraph) -> bool {
    let mut seen = std::collections::HashSet::new();
    g.objects()
        .all(|o| Some(o.noun.as_str()) != g.verb() && seen.insert(o.noun.as_str()))
}

/// A random graph that [`has_text_form`].
pub fn random_text_graph<R: Rng>(rng: &mut R, tax: &Taxonomy, max_objects: usize) -> ActionGraph {
    loop {
        let g = random_graph(rng, tax, max_objects);
        if has_text_form(&g) {
            return g;
        }
    }
}

/// A loadable dataset of `clips` clips with 1..=`max_len` graphs each and
/// consistent instance ids.
pub fn random_dataset<R: Rng>(
    rng: &mut R,
    tax: &Taxonomy,
    clips: usize,
    max_len: u32,
) -> DatasetFile {
    let mut d = DatasetFile::new(tax.clone());
    for c in 0..clips {
        let clip_id = format!("clip-{c:03}");
        let len = rng.gen_range(1..=max_len);
        let graphs: Vec<ActionGraph> = (1..=len)
            .map(|t| {
                let mut g = random_graph(rng, tax, 4);
                g.clip_id = clip_id.clone();
                g.timestep = t;
                g
            })
            .collect();
        let graphs = recollect(&graphs, &CorrespondenceOverride::default())
            .expect("contiguous single-clip sequence")
            .graph
            .graphs;
        d.clips.push(ClipRecord {
            clip_id,
            scenario: ["Cooking", "Cleaning / laundry", "Car mechanic"][c % 3].into(),
            split: if rng.gen_bool(0.7) {
                DataSplit::Train
            } else {
                DataSplit::Val
            },
            graphs,
            narrations: (0..rng.gen_range(0..3))
                .map(|i| format!("#C C step {i}"))
                .collect(),
            summary: rng.gen_bool(0.5).then(|| "C cooks.".to_string()),
        });
    }
    d
}
