//! Recall@K for the three graph generation tasks.
//!
//! Predictions address nodes by slot: the verb, or the i-th object of the
//! ground-truth graph ordered by instance id. Candidate triplets combine one
//! label from each task-relevant list of a node pair:
//!
//! | task       | components                                        |
//! |------------|---------------------------------------------------|
//! | `EdgeCls`  | relation                                          |
//! | `SgCls`    | relation, class of each object endpoint           |
//! | `EasgCls`  | relation, class of each object endpoint, the verb |
//!
//! A candidate's score is the product of its component scores, multiplied
//! left to right as relation, source, destination. Candidates are ranked by
//! score (desc), then the component scores (desc, lexicographic), then
//! source slot, destination slot and component labels (taxonomy id, then
//! name). The top K are matched against the ground-truth triplets.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ActionGraph, NodeRef};
use crate::taxonomy::{LabelKind, Taxonomy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Verb,
    Object(u32),
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::Verb => f.write_str("verb"),
            Slot::Object(i) => write!(f, "object[{i}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub label: String,
    pub score: f64,
}

impl LabelScore {
    pub fn new(label: impl Into<String>, score: f64) -> Self {
        Self {
            label: label.into(),
            score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPrediction {
    pub src: Slot,
    pub dst: Slot,
    pub relations: Vec<LabelScore>,
}

/// Scored predictions for one ground-truth graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphPredictions {
    pub clip_id: String,
    pub timestep: u32,
    #[serde(default)]
    pub verbs: Vec<LabelScore>,
    /// Class scores per object slot.
    #[serde(default)]
    pub objects: Vec<Vec<LabelScore>>,
    #[serde(default)]
    pub relations: Vec<PairPrediction>,
}

impl GraphPredictions {
    pub fn empty(clip_id: impl Into<String>, timestep: u32) -> Self {
        Self {
            clip_id: clip_id.into(),
            timestep,
            verbs: Vec::new(),
            objects: Vec::new(),
            relations: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub graphs: Vec<GraphPredictions>,
}

impl PredictionSet {
    pub fn index(&self) -> HashMap<(&str, u32), &GraphPredictions> {
        self.graphs
            .iter()
            .map(|g| ((g.clip_id.as_str(), g.timestep), g))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    EdgeCls,
    SgCls,
    EasgCls,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::EdgeCls, Task::SgCls, Task::EasgCls];

    pub fn title(self) -> &'static str {
        match self {
            Task::EdgeCls => "Edge Cls",
            Task::SgCls => "SG Cls",
            Task::EasgCls => "EASG Cls",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.title())
    }
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "edge_cls" | "edge" => Ok(Task::EdgeCls),
            "sg_cls" | "sg" => Ok(Task::SgCls),
            "easg_cls" | "easg" => Ok(Task::EasgCls),
            other => Err(format!("unknown task {other:?}")),
        }
    }
}

/// Standard cut-offs.
pub const KS: [usize; 3] = [10, 20, 50];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Count `direct object` edges as ground truth.
    pub include_direct_object: bool,
    /// Pool triplets over all graphs instead of averaging per graph.
    pub micro: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            include_direct_object: true,
            micro: false,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("predictions for {clip_id}@{timestep} do not align with the ground truth: {detail}")]
    Misaligned {
        clip_id: String,
        timestep: u32,
        detail: String,
    },
    #[error(
        "score {score} for {label:?} in {clip_id}@{timestep} is not a finite non-negative number"
    )]
    InvalidScore {
        clip_id: String,
        timestep: u32,
        label: String,
        score: f64,
    },
    #[error("trials must be at least 1")]
    NoTrials,
}

/// A ground-truth edge in slot form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GtTriplet {
    pub src: Slot,
    pub dst: Slot,
    pub relation: String,
    pub src_label: String,
    pub dst_label: String,
}

/// Slot of every node of `g` other than the camera wearer.
pub fn slot_map(g: &ActionGraph) -> HashMap<NodeRef, Slot> {
    let mut m = HashMap::new();
    m.insert(NodeRef::Verb, Slot::Verb);
    for (i, o) in g.objects_by_id().iter().enumerate() {
        m.insert(NodeRef::Object(o.instance_id), Slot::Object(i as u32));
    }
    m
}

/// Ground-truth triplets of a graph; `action` edges are never included.
pub fn gt_triplets(g: &ActionGraph, include_direct_object: bool) -> Vec<GtTriplet> {
    let slots = slot_map(g);
    let mut out: Vec<GtTriplet> = g
        .edges
        .iter()
        .filter(|e| !e.is_action() && (include_direct_object || !e.is_direct_object()))
        .filter_map(|e| {
            Some(GtTriplet {
                src: *slots.get(&e.src)?,
                dst: *slots.get(&e.dst)?,
                relation: e.relation.clone(),
                src_label: g.label_of(e.src)?.to_string(),
                dst_label: g.label_of(e.dst)?.to_string(),
            })
        })
        .collect();
    out.sort();
    out
}

/// A ranked candidate triplet. Labels of endpoints that the task does not
/// predict are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub src: Slot,
    pub dst: Slot,
    pub relation: String,
    pub src_label: Option<String>,
    pub dst_label: Option<String>,
    pub score: f64,
    pub components: Vec<f64>,
    /// (taxonomy id, label) of each component, in component order.
    pub keys: Vec<(u32, String)>,
}

impl Candidate {
    pub fn matches(&self, t: &GtTriplet) -> bool {
        self.src == t.src
            && self.dst == t.dst
            && self.relation == t.relation
            && self.src_label.as_ref().is_none_or(|l| *l == t.src_label)
            && self.dst_label.as_ref().is_none_or(|l| *l == t.dst_label)
    }
}

fn cmp_scores(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match y.total_cmp(x) {
            Ordering::Equal => {}
            o => return o,
        }
    }
    b.len().cmp(&a.len())
}

/// The ranking order: `Less` means `a` ranks ahead of `b`.
pub fn rank_cmp(a: &Candidate, b: &Candidate) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| cmp_scores(&a.components, &b.components))
        .then_with(|| a.src.cmp(&b.src))
        .then_with(|| a.dst.cmp(&b.dst))
        .then_with(|| a.keys.cmp(&b.keys))
}

/// Product of component scores, left to right.
pub fn product(components: &[f64]) -> f64 {
    components.iter().fold(1.0, |acc, s| acc * s)
}

#[derive(Clone, Copy)]
struct Comp<'a> {
    score: f64,
    id: u32,
    label: &'a str,
}

fn sorted_list<'a>(items: &'a [LabelScore], kind: LabelKind, tax: &Taxonomy) -> Vec<Comp<'a>> {
    let mut v: Vec<Comp> = items
        .iter()
        .map(|l| Comp {
            score: l.score,
            id: tax.id(kind, &l.label).unwrap_or(u32::MAX),
            label: &l.label,
        })
        .collect();
    v.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.id.cmp(&b.id))
            .then(a.label.cmp(b.label))
    });
    v
}

/// Best-scoring label of a list under the ranking order (ties by taxonomy
/// id, then name).
pub fn top_label<'a>(
    items: &'a [LabelScore],
    kind: LabelKind,
    tax: &Taxonomy,
) -> Option<&'a LabelScore> {
    let best = sorted_list(items, kind, tax).first().map(|c| c.label)?;
    items.iter().find(|l| l.label == best)
}

struct HeapItem<'a> {
    idx: Vec<usize>,
    score: f64,
    comps: Vec<f64>,
    keys: Vec<(u32, &'a str)>,
}

impl HeapItem<'_> {
    /// `Less` when self ranks ahead.
    fn rank(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then_with(|| cmp_scores(&self.comps, &other.comps))
            .then_with(|| self.keys.cmp(&other.keys))
    }
}

impl PartialEq for HeapItem<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.rank(other) == Ordering::Equal
    }
}

impl Eq for HeapItem<'_> {}

impl PartialOrd for HeapItem<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap pops the item ranked first
        other.rank(self)
    }
}

/// The `k` best index tuples over the product of sorted lists. Every
/// successor of a tuple ranks after it, so a lazy frontier suffices.
fn k_best<'a>(lists: &[Vec<Comp<'a>>], k: usize) -> Vec<HeapItem<'a>> {
    if k == 0 || lists.iter().any(Vec::is_empty) {
        return Vec::new();
    }
    let make = |idx: Vec<usize>| {
        let comps: Vec<f64> = idx.iter().zip(lists).map(|(&i, l)| l[i].score).collect();
        let keys = idx
            .iter()
            .zip(lists)
            .map(|(&i, l)| (l[i].id, l[i].label))
            .collect();
        HeapItem {
            score: product(&comps),
            comps,
            keys,
            idx,
        }
    };
    let mut heap = BinaryHeap::new();
    let mut seen = HashSet::new();
    let start = vec![0; lists.len()];
    seen.insert(start.clone());
    heap.push(make(start));
    let mut out = Vec::with_capacity(k);
    while let Some(item) = heap.pop() {
        for d in 0..lists.len() {
            if item.idx[d] + 1 < lists[d].len() {
                let mut next = item.idx.clone();
                next[d] += 1;
                if seen.insert(next.clone()) {
                    heap.push(make(next));
                }
            }
        }
        out.push(item);
        if out.len() == k {
            break;
        }
    }
    out
}

fn check_scores(p: &GraphPredictions) -> Result<(), EvalError> {
    let all = p
        .verbs
        .iter()
        .chain(p.objects.iter().flatten())
        .chain(p.relations.iter().flat_map(|r| &r.relations));
    for l in all {
        if !l.score.is_finite() || l.score.is_sign_negative() {
            return Err(EvalError::InvalidScore {
                clip_id: p.clip_id.clone(),
                timestep: p.timestep,
                label: l.label.clone(),
                score: l.score,
            });
        }
    }
    Ok(())
}

/// Checks slot ranges, duplicate pairs, duplicate labels and scores.
pub fn check_alignment(p: &GraphPredictions, gt: &ActionGraph) -> Result<(), EvalError> {
    let n = gt.objects().count();
    let bad = |detail: String| EvalError::Misaligned {
        clip_id: p.clip_id.clone(),
        timestep: p.timestep,
        detail,
    };
    if p.objects.len() > n {
        return Err(bad(format!(
            "{} object slots predicted, graph has {n}",
            p.objects.len()
        )));
    }
    let in_range = |s: Slot| match s {
        Slot::Verb => true,
        Slot::Object(i) => (i as usize) < n,
    };
    let unique = |items: &[LabelScore], what: &str| -> Result<(), EvalError> {
        let mut seen = HashSet::new();
        for l in items {
            if !seen.insert(l.label.as_str()) {
                return Err(bad(format!("label {:?} repeated in {what}", l.label)));
            }
        }
        Ok(())
    };
    unique(&p.verbs, "verbs")?;
    for (i, o) in p.objects.iter().enumerate() {
        unique(o, &format!("object[{i}]"))?;
    }
    let mut pairs = HashSet::new();
    for r in &p.relations {
        if !in_range(r.src) || !in_range(r.dst) {
            return Err(bad(format!("pair {} -> {} is out of range", r.src, r.dst)));
        }
        if r.src == r.dst {
            return Err(bad(format!("self pair on {}", r.src)));
        }
        if !pairs.insert((r.src, r.dst)) {
            return Err(bad(format!("pair {} -> {} listed twice", r.src, r.dst)));
        }
        unique(&r.relations, &format!("{} -> {}", r.src, r.dst))?;
    }
    check_scores(p)
}

/// Keeps the top relation of every pair and the top verb and object
/// classes.
pub fn constrain_graph(p: &GraphPredictions, tax: &Taxonomy) -> GraphPredictions {
    let top = |items: &[LabelScore], kind| -> Vec<LabelScore> {
        top_label(items, kind, tax).cloned().into_iter().collect()
    };
    GraphPredictions {
        clip_id: p.clip_id.clone(),
        timestep: p.timestep,
        verbs: top(&p.verbs, LabelKind::Verb),
        objects: p.objects.iter().map(|o| top(o, LabelKind::Noun)).collect(),
        relations: p
            .relations
            .iter()
            .map(|r| PairPrediction {
                src: r.src,
                dst: r.dst,
                relations: top(&r.relations, LabelKind::Relation),
            })
            .collect(),
    }
}

pub fn apply_constraint(p: &PredictionSet, tax: &Taxonomy) -> PredictionSet {
    PredictionSet {
        graphs: p.graphs.iter().map(|g| constrain_graph(g, tax)).collect(),
    }
}

/// The top `k` candidates of one graph's predictions, in rank order.
pub fn ranked_candidates(
    p: &GraphPredictions,
    task: Task,
    k: usize,
    tax: &Taxonomy,
) -> Vec<Candidate> {
    let verbs = sorted_list(&p.verbs, LabelKind::Verb, tax);
    let objects: Vec<Vec<Comp>> = p
        .objects
        .iter()
        .map(|o| sorted_list(o, LabelKind::Noun, tax))
        .collect();
    let no_objects = Vec::new();
    let endpoint = |s: Slot| -> Option<&Vec<Comp>> {
        match (task, s) {
            (Task::EdgeCls, _) | (Task::SgCls, Slot::Verb) => None,
            (Task::EasgCls, Slot::Verb) => Some(&verbs),
            (_, Slot::Object(i)) => Some(objects.get(i as usize).unwrap_or(&no_objects)),
        }
    };
    let mut all = Vec::new();
    for pair in &p.relations {
        let rels = sorted_list(&pair.relations, LabelKind::Relation, tax);
        let src = endpoint(pair.src);
        let dst = endpoint(pair.dst);
        let mut lists = vec![rels];
        lists.extend(src.cloned());
        lists.extend(dst.cloned());
        for item in k_best(&lists, k) {
            let mut labels = item.keys.iter().map(|(_, l)| l.to_string());
            let relation = labels.next().expect("relation component");
            let src_label = src.map(|_| labels.next().expect("source component"));
            let dst_label = dst.map(|_| labels.next().expect("destination component"));
            all.push(Candidate {
                src: pair.src,
                dst: pair.dst,
                relation,
                src_label,
                dst_label,
                score: item.score,
                components: item.comps,
                keys: item
                    .keys
                    .iter()
                    .map(|(id, l)| (*id, l.to_string()))
                    .collect(),
            });
        }
    }
    all.sort_by(rank_cmp);
    all.truncate(k);
    all
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recall {
    pub matched: usize,
    pub total: usize,
}

impl Recall {
    pub fn fraction(&self) -> Option<f64> {
        (self.total > 0).then(|| self.matched as f64 / self.total as f64)
    }
}

/// Matched ground-truth triplets at each cut-off in `ks`. Missing
/// predictions match nothing.
pub fn graph_recalls(
    p: Option<&GraphPredictions>,
    gt: &ActionGraph,
    task: Task,
    constrained: bool,
    ks: &[usize],
    cfg: &EvalConfig,
    tax: &Taxonomy,
) -> Result<Vec<Recall>, EvalError> {
    let triplets = gt_triplets(gt, cfg.include_direct_object);
    let total = triplets.len();
    let Some(p) = p else {
        return Ok(vec![Recall { matched: 0, total }; ks.len()]);
    };
    check_alignment(p, gt)?;
    let constrained_p;
    let p = if constrained {
        constrained_p = constrain_graph(p, tax);
        &constrained_p
    } else {
        p
    };
    let kmax = ks.iter().copied().max().unwrap_or(0);
    let ranked = ranked_candidates(p, task, kmax, tax);
    Ok(ks
        .iter()
        .map(|&k| {
            let top = &ranked[..k.min(ranked.len())];
            let matched = triplets
                .iter()
                .filter(|t| top.iter().any(|c| c.matches(t)))
                .count();
            Recall { matched, total }
        })
        .collect())
}

/// Recall@K of one graph, `None` when it has no ground-truth triplets.
pub fn recall_at_k(
    p: &GraphPredictions,
    gt: &ActionGraph,
    k: usize,
    task: Task,
    constrained: bool,
    cfg: &EvalConfig,
    tax: &Taxonomy,
) -> Result<Option<f64>, EvalError> {
    Ok(graph_recalls(Some(p), gt, task, constrained, &[k], cfg, tax)?[0].fraction())
}

/// Running aggregate of per-graph recalls.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RecallSum {
    pub fraction_sum: f64,
    pub graphs: usize,
    pub matched: usize,
    pub total: usize,
}

impl RecallSum {
    pub fn add(&mut self, r: Recall) {
        if let Some(f) = r.fraction() {
            self.fraction_sum += f;
            self.graphs += 1;
        }
        self.matched += r.matched;
        self.total += r.total;
    }

    /// Macro (per-graph mean) or micro (pooled) recall; graphs without
    /// ground-truth triplets are skipped. 0 when nothing was counted.
    pub fn value(&self, micro: bool) -> f64 {
        if micro {
            if self.total == 0 {
                0.0
            } else {
                self.matched as f64 / self.total as f64
            }
        } else if self.graphs == 0 {
            0.0
        } else {
            self.fraction_sum / self.graphs as f64
        }
    }
}

/// Recall@K over many graphs, for each cut-off in `ks`.
pub fn dataset_recalls(
    preds: &PredictionSet,
    gts: &[ActionGraph],
    task: Task,
    constrained: bool,
    ks: &[usize],
    cfg: &EvalConfig,
    tax: &Taxonomy,
) -> Result<Vec<f64>, EvalError> {
    let index = preds.index();
    let mut sums = vec![RecallSum::default(); ks.len()];
    for g in gts {
        let p = index.get(&(g.clip_id.as_str(), g.timestep)).copied();
        for (s, r) in sums
            .iter_mut()
            .zip(graph_recalls(p, g, task, constrained, ks, cfg, tax)?)
        {
            s.add(r);
        }
    }
    Ok(sums.iter().map(|s| s.value(cfg.micro)).collect())
}

/// One Recall@K value of a generation table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationCell {
    pub constrained: bool,
    pub task: Task,
    pub k: usize,
    pub recall: f64,
}

/// Recall@K for every regime, task and standard cut-off.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationTable {
    pub cells: Vec<GenerationCell>,
}

impl GenerationTable {
    pub fn get(&self, constrained: bool, task: Task, k: usize) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.constrained == constrained && c.task == task && c.k == k)
            .map(|c| c.recall)
    }
}

/// Regimes in table order: with constraint first.
pub const REGIMES: [bool; 2] = [true, false];

pub fn evaluate_generation(
    preds: &PredictionSet,
    gts: &[ActionGraph],
    cfg: &EvalConfig,
    tax: &Taxonomy,
) -> Result<GenerationTable, EvalError> {
    let mut cells = Vec::new();
    for constrained in REGIMES {
        for task in Task::ALL {
            let values = dataset_recalls(preds, gts, task, constrained, &KS, cfg, tax)?;
            cells.extend(KS.iter().zip(values).map(|(&k, recall)| GenerationCell {
                constrained,
                task,
                k,
                recall,
            }));
        }
    }
    Ok(GenerationTable { cells })
}
