//! Temporal recollection: one instance id per physical object across a clip.
//!
//! By default every occurrence of a noun class in a clip is the same
//! instance. When one graph holds several objects of the same class they are
//! matched by rank (lowest local id first) and a warning is emitted.
//! [`CorrespondenceOverride`] can split a class into several instances or fuse
//! occurrences of different classes.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{canonicalize, direct_objects};
use crate::model::{ActionGraph, Node, NodeRef};
use crate::validate::{validate_graph, ValidationReport};

/// An object node at one timestep, addressed by its id in the input graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Occurrence {
    pub timestep: u32,
    pub instance_id: u32,
}

impl Occurrence {
    pub fn new(timestep: u32, instance_id: u32) -> Self {
        Self {
            timestep,
            instance_id,
        }
    }
}

impl fmt::Display for Occurrence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}/object#{}", self.timestep, self.instance_id)
    }
}

/// Assertion that two occurrences are different instances. `first` must
/// precede `second`; every later occurrence linked to `second` follows it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub first: Occurrence,
    pub second: Occurrence,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrespondenceOverride {
    /// Each group asserts that its occurrences are one instance.
    #[serde(default)]
    pub groups: Vec<Vec<Occurrence>>,
    #[serde(default)]
    pub splits: Vec<Split>,
}

impl CorrespondenceOverride {
    pub fn is_empty(&self) -> bool {
        self.groups.is_empty() && self.splits.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicGraph {
    pub clip_id: String,
    pub graphs: Vec<ActionGraph>,
}

impl DynamicGraph {
    /// Number of timesteps T.
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Checks the sequence invariants: shared clip id, contiguous increasing
    /// timesteps, valid graphs, one noun class per instance id.
    pub fn check(&self) -> Result<(), TemporalError> {
        check_sequence(&self.graphs)?;
        let mut bound: HashMap<u32, (&str, u32)> = HashMap::new();
        for g in &self.graphs {
            for o in g.objects() {
                match bound.get(&o.instance_id) {
                    Some((noun, t)) if *noun != o.noun => {
                        return Err(TemporalError::InconsistentInstance {
                            instance_id: o.instance_id,
                            first: format!("{noun}@t{t}"),
                            second: format!("{}@t{}", o.noun, g.timestep),
                        })
                    }
                    Some(_) => {}
                    None => {
                        bound.insert(o.instance_id, (&o.noun, g.timestep));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TemporalError {
    #[error("no graphs to recollect")]
    Empty,
    #[error("graph for clip {found:?} in sequence of clip {expected:?}")]
    ClipMismatch { expected: String, found: String },
    #[error("timesteps are not contiguous: {prev} followed by {next}")]
    NonContiguous { prev: u32, next: u32 },
    #[error("graph at timestep {timestep} is invalid: {report}")]
    InvalidGraph {
        timestep: u32,
        report: ValidationReport,
    },
    #[error("override refers to missing object {0}")]
    UnknownOccurrence(Occurrence),
    #[error("{0} appears in more than one override group")]
    OverlappingGroups(Occurrence),
    #[error("split {first} / {second} must join two occurrences of one class in time order")]
    InvalidSplit {
        first: Occurrence,
        second: Occurrence,
    },
    #[error("contradictory overrides: {0}")]
    Contradiction(String),
    #[error("instance {instance_id} bound to {first} and {second}")]
    InconsistentInstance {
        instance_id: u32,
        first: String,
        second: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recollection {
    pub graph: DynamicGraph,
    pub warnings: Vec<String>,
}

fn check_sequence(graphs: &[ActionGraph]) -> Result<(), TemporalError> {
    let first = graphs.first().ok_or(TemporalError::Empty)?;
    for g in graphs {
        if g.clip_id != first.clip_id {
            return Err(TemporalError::ClipMismatch {
                expected: first.clip_id.clone(),
                found: g.clip_id.clone(),
            });
        }
        let report = validate_graph(g);
        if !report.is_valid() {
            return Err(TemporalError::InvalidGraph {
                timestep: g.timestep,
                report,
            });
        }
    }
    for w in graphs.windows(2) {
        if w[1].timestep != w[0].timestep + 1 {
            return Err(TemporalError::NonContiguous {
                prev: w[0].timestep,
                next: w[1].timestep,
            });
        }
    }
    Ok(())
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let p = self.0[x];
        if p == x {
            return x;
        }
        let r = self.find(p);
        self.0[x] = r;
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Rewrites object instance ids so each physical instance has one id across
/// the clip. Graphs may be given in any order; they are sorted by timestep.
///
/// Ids are dense and assigned in order of first appearance (timestep, then
/// noun class, then input id). When a group fuses different classes, every
/// occurrence takes the class of the earliest one.
pub fn recollect(
    graphs: &[ActionGraph],
    overrides: &CorrespondenceOverride,
) -> Result<Recollection, TemporalError> {
    let mut sorted: Vec<&ActionGraph> = graphs.iter().collect();
    sorted.sort_by_key(|g| g.timestep);
    let owned: Vec<ActionGraph> = sorted.iter().map(|g| (*g).clone()).collect();
    check_sequence(&owned)?;
    let clip_id = owned[0].clip_id.clone();
    let mut warnings = Vec::new();

    // occurrences in first-appearance order, with their default chain
    let mut occs: Vec<(Occurrence, String)> = Vec::new();
    let mut chain_of: Vec<(String, u32)> = Vec::new();
    for g in &owned {
        let mut objs: Vec<_> = g.objects().collect();
        objs.sort_by(|a, b| (&a.noun, a.instance_id).cmp(&(&b.noun, b.instance_id)));
        let mut rank: HashMap<&str, u32> = HashMap::new();
        for o in objs {
            let r = rank.entry(o.noun.as_str()).or_insert(0);
            if *r == 1 {
                warnings.push(format!(
                    "timestep {} has several {:?} objects; matched by rank",
                    g.timestep, o.noun
                ));
            }
            occs.push((Occurrence::new(g.timestep, o.instance_id), o.noun.clone()));
            chain_of.push((o.noun.clone(), *r));
            *r += 1;
        }
    }
    let index: HashMap<Occurrence, usize> =
        occs.iter().enumerate().map(|(i, (o, _))| (*o, i)).collect();
    let lookup = |o: &Occurrence| {
        index
            .get(o)
            .copied()
            .ok_or(TemporalError::UnknownOccurrence(*o))
    };

    // splits cut chains into segments
    let mut cuts = HashSet::new();
    for s in &overrides.splits {
        let (a, b) = (lookup(&s.first)?, lookup(&s.second)?);
        if occs[a].1 != occs[b].1 || a >= b {
            return Err(TemporalError::InvalidSplit {
                first: s.first,
                second: s.second,
            });
        }
        cuts.insert(b);
    }
    let mut uf = UnionFind((0..occs.len()).collect());
    let mut last_of_chain: HashMap<&(String, u32), usize> = HashMap::new();
    for (i, chain) in chain_of.iter().enumerate() {
        if let Some(&prev) = last_of_chain.get(chain) {
            if !cuts.contains(&i) {
                uf.union(prev, i);
            }
        }
        last_of_chain.insert(chain, i);
    }

    // groups fuse segments
    let mut grouped = HashSet::new();
    for group in &overrides.groups {
        let mut members = Vec::with_capacity(group.len());
        for o in group {
            if !grouped.insert(*o) {
                return Err(TemporalError::OverlappingGroups(*o));
            }
            members.push(lookup(o)?);
        }
        for w in members.windows(2) {
            uf.union(w[0], w[1]);
        }
    }
    for s in &overrides.splits {
        let (a, b) = (lookup(&s.first)?, lookup(&s.second)?);
        if uf.find(a) == uf.find(b) {
            return Err(TemporalError::Contradiction(format!(
                "split {} / {} is undone by a group",
                s.first, s.second
            )));
        }
    }
    let mut in_graph: HashMap<(u32, usize), Occurrence> = HashMap::new();
    for (i, (o, _)) in occs.iter().enumerate() {
        let root = uf.find(i);
        if let Some(other) = in_graph.insert((o.timestep, root), *o) {
            return Err(TemporalError::Contradiction(format!(
                "{other} and {o} would be the same instance within one graph"
            )));
        }
    }

    // dense ids by first appearance, class of the first occurrence
    let mut ids: HashMap<usize, (u32, String)> = HashMap::new();
    let mut assigned: HashMap<Occurrence, (u32, String)> = HashMap::new();
    for (i, (o, noun)) in occs.iter().enumerate() {
        let root = uf.find(i);
        let next = ids.len() as u32;
        let entry = ids.entry(root).or_insert_with(|| (next, noun.clone()));
        if &entry.1 != noun {
            warnings.push(format!(
                "{o} ({noun}) relabelled as {:?} by an override group",
                entry.1
            ));
        }
        assigned.insert(*o, entry.clone());
    }

    let graphs = owned
        .iter()
        .map(|g| {
            let map = |r: NodeRef| match r {
                NodeRef::Object(id) => {
                    NodeRef::Object(assigned[&Occurrence::new(g.timestep, id)].0)
                }
                other => other,
            };
            let mut out = g.clone();
            for n in &mut out.nodes {
                if let Node::Object(o) = n {
                    let (id, noun) = &assigned[&Occurrence::new(g.timestep, o.instance_id)];
                    o.instance_id = *id;
                    o.noun = noun.clone();
                }
            }
            for e in &mut out.edges {
                e.src = map(e.src);
                e.dst = map(e.dst);
            }
            canonicalize(&out)
        })
        .collect();
    let graph = DynamicGraph { clip_id, graphs };
    graph.check()?;
    Ok(Recollection { graph, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Direct,
    Indirect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceTrack {
    pub instance_id: u32,
    pub noun: String,
    pub timesteps: Vec<u32>,
    pub roles: Vec<Role>,
}

/// One track per instance id, ordered by id, with the object's role at each
/// timestep it appears in.
pub fn instance_tracks(dg: &DynamicGraph) -> Vec<InstanceTrack> {
    let mut tracks: BTreeMap<u32, InstanceTrack> = BTreeMap::new();
    for g in &dg.graphs {
        let direct = direct_objects(g);
        for o in g.objects() {
            let t = tracks
                .entry(o.instance_id)
                .or_insert_with(|| InstanceTrack {
                    instance_id: o.instance_id,
                    noun: o.noun.clone(),
                    timesteps: Vec::new(),
                    roles: Vec::new(),
                });
            t.timesteps.push(g.timestep);
            t.roles
                .push(if direct.contains(&NodeRef::Object(o.instance_id)) {
                    Role::Direct
                } else {
                    Role::Indirect
                });
        }
    }
    tracks.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{add_object_node, init_graph};
    use crate::model::{BBox, FrameTriplet, Grounding, SeedAnnotation};
    use crate::taxonomy::Taxonomy;

    fn graph(t: u32, verb: &str, noun: &str, extra: &[(&str, &str)]) -> ActionGraph {
        let tax = Taxonomy::ego4d_easg();
        let seed = SeedAnnotation {
            clip_id: "clip".into(),
            timestep: t,
            frames: FrameTriplet::new(t as u64 * 10, t as u64 * 10 + 1, t as u64 * 10 + 2),
            verb: verb.into(),
            noun: noun.into(),
            box_object: Grounding::uniform(BBox::new(0.0, 0.0, 5.0, 5.0)),
            box_left_hand: Grounding::default(),
            box_right_hand: Grounding::default(),
            narration: String::new(),
        };
        let mut g = init_graph(&seed, tax).unwrap();
        for (rel, n) in extra {
            g = add_object_node(&g, tax, n, Grounding::default(), NodeRef::Verb, rel).unwrap();
        }
        g
    }

    fn ids_of(g: &ActionGraph, noun: &str) -> Vec<u32> {
        g.objects()
            .filter(|o| o.noun == noun)
            .map(|o| o.instance_id)
            .collect()
    }

    #[test]
    fn same_plate_same_index() {
        let gs = vec![
            graph(1, "take", "cup", &[("from", "plate")]),
            graph(2, "wash", "plate", &[]),
        ];
        let r = recollect(&gs, &CorrespondenceOverride::default()).unwrap();
        let dg = r.graph;
        assert_eq!(
            ids_of(&dg.graphs[0], "plate"),
            ids_of(&dg.graphs[1], "plate")
        );
        assert_eq!(ids_of(&dg.graphs[0], "cup"), vec![0]);
        assert_eq!(ids_of(&dg.graphs[0], "plate"), vec![1]);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn idempotent() {
        let gs = vec![
            graph(1, "take", "cup", &[("from", "plate")]),
            graph(2, "wash", "plate", &[("with", "sponge")]),
            graph(3, "rinse", "sponge", &[]),
        ];
        let once = recollect(&gs, &CorrespondenceOverride::default())
            .unwrap()
            .graph;
        let twice = recollect(&once.graphs, &CorrespondenceOverride::default())
            .unwrap()
            .graph;
        assert_eq!(once, twice);
    }

    #[test]
    fn split_gives_two_bowls() {
        let gs = vec![graph(1, "take", "bowl", &[]), graph(2, "take", "bowl", &[])];
        let ov = CorrespondenceOverride {
            groups: vec![],
            splits: vec![Split {
                first: Occurrence::new(1, 0),
                second: Occurrence::new(2, 0),
            }],
        };
        let dg = recollect(&gs, &ov).unwrap().graph;
        assert_eq!(ids_of(&dg.graphs[0], "bowl"), vec![0]);
        assert_eq!(ids_of(&dg.graphs[1], "bowl"), vec![1]);
    }

    #[test]
    fn contradictory_overrides() {
        let gs = vec![graph(1, "take", "bowl", &[]), graph(2, "take", "bowl", &[])];
        let ov = CorrespondenceOverride {
            groups: vec![vec![Occurrence::new(1, 0), Occurrence::new(2, 0)]],
            splits: vec![Split {
                first: Occurrence::new(1, 0),
                second: Occurrence::new(2, 0),
            }],
        };
        let err = recollect(&gs, &ov).unwrap_err();
        assert!(matches!(err, TemporalError::Contradiction(_)));
        assert!(err.to_string().contains("t1/object#0"));
    }

    #[test]
    fn synonyms_fuse_under_first_class() {
        let gs = vec![graph(1, "take", "cup", &[]), graph(2, "wash", "mug", &[])];
        let ov = CorrespondenceOverride {
            groups: vec![vec![Occurrence::new(1, 0), Occurrence::new(2, 0)]],
            splits: vec![],
        };
        let r = recollect(&gs, &ov).unwrap();
        assert_eq!(ids_of(&r.graph.graphs[1], "cup"), vec![0]);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn gaps_and_mixed_clips_are_rejected() {
        let gs = vec![graph(1, "take", "bowl", &[]), graph(3, "take", "bowl", &[])];
        assert_eq!(
            recollect(&gs, &CorrespondenceOverride::default()).unwrap_err(),
            TemporalError::NonContiguous { prev: 1, next: 3 }
        );
        let mut other = graph(2, "take", "bowl", &[]);
        other.clip_id = "other".into();
        let gs = vec![graph(1, "take", "bowl", &[]), other];
        assert!(matches!(
            recollect(&gs, &CorrespondenceOverride::default()).unwrap_err(),
            TemporalError::ClipMismatch { .. }
        ));
    }

    #[test]
    fn indirect_becomes_direct() {
        let gs = vec![
            graph(1, "wash", "car", &[("with", "sponge")]),
            graph(2, "rinse", "sponge", &[]),
        ];
        let dg = recollect(&gs, &CorrespondenceOverride::default())
            .unwrap()
            .graph;
        let tracks = instance_tracks(&dg);
        let sponge = tracks.iter().find(|t| t.noun == "sponge").unwrap();
        assert_eq!(sponge.timesteps, vec![1, 2]);
        assert_eq!(sponge.roles, vec![Role::Indirect, Role::Direct]);
        let total: usize = tracks.iter().map(|t| t.timesteps.len()).sum();
        assert_eq!(total, 3);
    }
}
