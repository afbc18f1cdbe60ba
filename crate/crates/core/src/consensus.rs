//! Consensus of three annotator graphs.
//!
//! Objects are matched across annotators by noun class (plus an ordinal when
//! one annotator drew several objects of the same class). Items supported by
//! at least two annotators are accepted without a question. Conflicts produce
//! [`ValidationQuestion`]s of four kinds:
//!
//! 1. `VerbNounChoice` whenever the (verb, direct object) pairs are not
//!    unanimous.
//! 2. `PrepositionChoice` for every node pair labelled with different
//!    relations.
//! 3. `HandChoice` when annotators attach different hands to the same anchor
//!    with the same relation.
//! 4. `SpatialYesNo` for object-object edges proposed by exactly one
//!    annotator.
//!
//! Question ids are derived from content, so answers do not depend on the
//! order the annotator graphs are given in. Verb-object edges proposed by a
//! single annotator and not covered by a question are dropped.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    ActionGraph, Edge, GroundingRule, GroundingSource, Node, NodeRef, ObjectNode, Provenance,
};
use crate::taxonomy::{is_hand, ACTION, BOTH_HANDS, DIRECT_OBJECT, LEFT_HAND, RIGHT_HAND};
use crate::validate::{validate_graph, ValidationReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorGraph {
    pub annotator_id: String,
    pub graph: ActionGraph,
}

impl AnnotatorGraph {
    pub fn new(annotator_id: impl Into<String>, graph: ActionGraph) -> Self {
        Self {
            annotator_id: annotator_id.into(),
            graph,
        }
    }
}

/// Identity of a node across annotators.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKey {
    Verb,
    Object { noun: String, ordinal: u32 },
}

impl SlotKey {
    fn object(noun: &str, ordinal: u32) -> Self {
        SlotKey::Object {
            noun: noun.to_string(),
            ordinal,
        }
    }

    fn noun(&self) -> Option<&str> {
        match self {
            SlotKey::Verb => None,
            SlotKey::Object { noun, .. } => Some(noun),
        }
    }
}

impl fmt::Display for SlotKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotKey::Verb => f.write_str("verb"),
            SlotKey::Object { noun, ordinal: 0 } => f.write_str(noun),
            SlotKey::Object { noun, ordinal } => write!(f, "{noun}#{ordinal}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    VerbNounChoice,
    PrepositionChoice,
    HandChoice,
    SpatialYesNo,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VerbNounPair {
    pub verb: String,
    pub nouns: Vec<String>,
}

impl fmt::Display for VerbNounPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.verb)?;
        if !self.nouns.is_empty() {
            write!(f, " {}", self.nouns.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum QuestionSubject {
    VerbNoun {
        candidates: Vec<VerbNounPair>,
    },
    Pair {
        src: SlotKey,
        dst: SlotKey,
    },
    Hand {
        anchor: SlotKey,
        relation: String,
    },
    Spatial {
        src: SlotKey,
        dst: SlotKey,
        relation: String,
    },
}

/// A disambiguation question shown to a validation annotator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationQuestion {
    pub id: String,
    pub kind: QuestionKind,
    pub clip_id: String,
    pub timestep: u32,
    pub subject: QuestionSubject,
    pub text: String,
    /// Candidate answers for the choice kinds (at least two).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
    /// The statement to confirm, for `SpatialYesNo`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statement: Option<String>,
}

impl ValidationQuestion {
    /// Checks the shape invariant: two or more options for choices, exactly
    /// one statement for yes/no.
    pub fn is_well_formed(&self) -> bool {
        match self.kind {
            QuestionKind::SpatialYesNo => self.statement.is_some() && self.options.is_empty(),
            _ => self.options.len() >= 2 && self.statement.is_none(),
        }
    }

    pub fn accepts(&self, choice: &AnswerChoice) -> bool {
        match (self.kind, choice) {
            (QuestionKind::SpatialYesNo, AnswerChoice::YesNo(_)) => true,
            (QuestionKind::VerbNounChoice, AnswerChoice::FreeText(t)) => !t.trim().is_empty(),
            (QuestionKind::SpatialYesNo, _) => false,
            (_, AnswerChoice::Option(o)) => self.options.contains(o),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerChoice {
    Option(String),
    YesNo(bool),
    /// Correction outside the offered options, kept for manual review.
    /// Only accepted for verb-noun questions.
    FreeText(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub question_id: String,
    pub choice: AnswerChoice,
    pub respondent: String,
}

impl Answer {
    pub fn option(question_id: &str, option: &str, respondent: &str) -> Self {
        Self {
            question_id: question_id.into(),
            choice: AnswerChoice::Option(option.into()),
            respondent: respondent.into(),
        }
    }

    pub fn yes_no(question_id: &str, yes: bool, respondent: &str) -> Self {
        Self {
            question_id: question_id.into(),
            choice: AnswerChoice::YesNo(yes),
            respondent: respondent.into(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConsensusError {
    #[error("expected 3 annotator graphs, got {0}")]
    AnnotatorCount(usize),
    #[error("annotator id {0:?} appears more than once")]
    DuplicateAnnotator(String),
    #[error("annotator graphs disagree on clip/timestep: {0}")]
    Mismatch(String),
    #[error("graph of annotator {annotator:?} is invalid: {report}")]
    InvalidInput {
        annotator: String,
        report: ValidationReport,
    },
    #[error("unanswered questions: {}", .0.join(", "))]
    Unanswered(Vec<String>),
    #[error("answer references unknown question {0:?}")]
    UnknownQuestion(String),
    #[error("answer to {question:?} is not acceptable: {detail}")]
    InvalidAnswer { question: String, detail: String },
    #[error("conflicting answers for question {0:?}")]
    ConflictingAnswers(String),
    #[error("consensus graph is invalid: {0}")]
    Internal(ValidationReport),
}

/// One annotator graph keyed by cross-annotator slots.
struct View<'a> {
    id: &'a str,
    graph: &'a ActionGraph,
    keys: HashMap<u32, SlotKey>,
    pair: VerbNounPair,
    dobjs: Vec<SlotKey>,
    /// Edges other than `action` and `direct object`.
    edges: BTreeMap<(SlotKey, SlotKey), String>,
}

impl<'a> View<'a> {
    fn new(a: &'a AnnotatorGraph) -> Self {
        let g = &a.graph;
        let mut objs: Vec<&ObjectNode> = g.objects().collect();
        objs.sort_by(|x, y| (&x.noun, x.instance_id).cmp(&(&y.noun, y.instance_id)));
        let mut keys = HashMap::new();
        let mut seen: HashMap<&str, u32> = HashMap::new();
        for o in objs {
            let ord = seen.entry(o.noun.as_str()).or_insert(0);
            keys.insert(o.instance_id, SlotKey::object(&o.noun, *ord));
            *ord += 1;
        }
        let key_of = |r: NodeRef| -> Option<SlotKey> {
            match r {
                NodeRef::Verb => Some(SlotKey::Verb),
                NodeRef::Object(id) => keys.get(&id).cloned(),
                NodeRef::CameraWearer => None,
            }
        };
        let mut dobjs = Vec::new();
        let mut edges = BTreeMap::new();
        for e in &g.edges {
            if e.relation == ACTION {
                continue;
            }
            let (Some(s), Some(d)) = (key_of(e.src), key_of(e.dst)) else {
                continue;
            };
            if e.relation == DIRECT_OBJECT {
                dobjs.push(d);
            } else {
                edges.insert((s, d), e.relation.clone());
            }
        }
        dobjs.sort();
        let pair = VerbNounPair {
            verb: g.verb().unwrap_or_default().to_string(),
            nouns: dobjs
                .iter()
                .filter_map(|k| k.noun().map(str::to_string))
                .collect(),
        };
        Self {
            id: &a.annotator_id,
            graph: g,
            keys,
            pair,
            dobjs,
            edges,
        }
    }

    fn object_for(&self, key: &SlotKey) -> Option<&'a ObjectNode> {
        let id = self
            .keys
            .iter()
            .find_map(|(id, k)| (k == key).then_some(*id))?;
        self.graph.object(id)
    }

    fn hand_sets(&self) -> BTreeMap<(SlotKey, String), BTreeSet<String>> {
        let mut out: BTreeMap<(SlotKey, String), BTreeSet<String>> = BTreeMap::new();
        for ((s, d), rel) in &self.edges {
            if let Some(noun) = d.noun().filter(|n| is_hand(n)) {
                out.entry((s.clone(), rel.clone()))
                    .or_default()
                    .insert(noun.to_string());
            }
        }
        out
    }
}

/// Support-ordered options: most supported first, then by name.
fn ranked<T: Ord + Clone>(support: &BTreeMap<T, Vec<usize>>) -> Vec<T> {
    let mut items: Vec<(&T, usize)> = support.iter().map(|(k, v)| (k, v.len())).collect();
    items.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    items.into_iter().map(|(k, _)| k.clone()).collect()
}

struct Analysis<'a> {
    views: Vec<View<'a>>,
    clip_id: String,
    timestep: u32,
    questions: Vec<ValidationQuestion>,
    pair_support: BTreeMap<VerbNounPair, Vec<usize>>,
    /// relation -> proposing views, per node pair
    relations: BTreeMap<(SlotKey, SlotKey), BTreeMap<String, Vec<usize>>>,
    /// hand noun -> views, per questioned (anchor, relation)
    hand_groups: BTreeMap<(SlotKey, String), BTreeMap<String, Vec<usize>>>,
}

const HAND_ORDER: [&str; 3] = [RIGHT_HAND, LEFT_HAND, BOTH_HANDS];

/// "a", "a or b", "a, b or c"
fn or_list(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} or {last}", init.join(", ")),
    }
}

fn vn_question_id() -> String {
    "verb-noun".to_string()
}

fn prep_question_id(src: &SlotKey, dst: &SlotKey) -> String {
    format!("preposition:{src}>{dst}")
}

fn hand_question_id(anchor: &SlotKey, relation: &str) -> String {
    format!("hand:{anchor}:{relation}")
}

fn spatial_question_id(src: &SlotKey, dst: &SlotKey, relation: &str) -> String {
    format!("spatial:{src}>{dst}:{relation}")
}

fn analyze(inputs: &[AnnotatorGraph]) -> Result<Analysis<'_>, ConsensusError> {
    if inputs.len() != 3 {
        return Err(ConsensusError::AnnotatorCount(inputs.len()));
    }
    let mut ids = HashSet::new();
    for a in inputs {
        if !ids.insert(a.annotator_id.as_str()) {
            return Err(ConsensusError::DuplicateAnnotator(a.annotator_id.clone()));
        }
        let report = validate_graph(&a.graph);
        if !report.is_valid() {
            return Err(ConsensusError::InvalidInput {
                annotator: a.annotator_id.clone(),
                report,
            });
        }
    }
    let first = &inputs[0].graph;
    if let Some(other) = inputs
        .iter()
        .find(|a| a.graph.clip_id != first.clip_id || a.graph.timestep != first.timestep)
    {
        return Err(ConsensusError::Mismatch(format!(
            "{}@{} vs {}@{}",
            first.clip_id, first.timestep, other.graph.clip_id, other.graph.timestep
        )));
    }

    let mut sorted: Vec<&AnnotatorGraph> = inputs.iter().collect();
    sorted.sort_by(|a, b| a.annotator_id.cmp(&b.annotator_id));
    let views: Vec<View> = sorted.into_iter().map(View::new).collect();
    let clip_id = first.clip_id.clone();
    let timestep = first.timestep;
    let mut questions = Vec::new();
    let question =
        |kind, id: String, subject, text: String, options, statement| ValidationQuestion {
            id,
            kind,
            clip_id: clip_id.clone(),
            timestep,
            subject,
            text,
            options,
            statement,
        };

    // 1. verb-noun pair
    let mut pair_support: BTreeMap<VerbNounPair, Vec<usize>> = BTreeMap::new();
    for (i, v) in views.iter().enumerate() {
        pair_support.entry(v.pair.clone()).or_default().push(i);
    }
    let pairs = ranked(&pair_support);
    if pairs.len() > 1 {
        let options: Vec<String> = pairs.iter().map(ToString::to_string).collect();
        questions.push(question(
            QuestionKind::VerbNounChoice,
            vn_question_id(),
            QuestionSubject::VerbNoun {
                candidates: pairs.clone(),
            },
            format!("Does CW {}?", or_list(&options)),
            options,
            None,
        ));
    }
    let action_phrase = pairs[0].to_string();

    // 2. prepositions
    let mut relations: BTreeMap<(SlotKey, SlotKey), BTreeMap<String, Vec<usize>>> = BTreeMap::new();
    for (i, v) in views.iter().enumerate() {
        for (pair, rel) in &v.edges {
            relations
                .entry(pair.clone())
                .or_default()
                .entry(rel.clone())
                .or_default()
                .push(i);
        }
    }
    let describe = |k: &SlotKey| match k {
        SlotKey::Verb => format!("CW {action_phrase}"),
        other => format!("the {other}"),
    };
    for ((src, dst), rels) in &relations {
        if rels.len() > 1 {
            questions.push(question(
                QuestionKind::PrepositionChoice,
                prep_question_id(src, dst),
                QuestionSubject::Pair {
                    src: src.clone(),
                    dst: dst.clone(),
                },
                format!(
                    "Select the preposition which is more appropriate: {}",
                    ranked(rels)
                        .iter()
                        .map(|r| format!("{} {r} {dst}", describe(src)))
                        .collect::<Vec<_>>()
                        .join(" / ")
                ),
                ranked(rels),
                None,
            ));
        }
    }

    // 3. hands
    // (anchor, relation) -> hand sets per view
    type HandSets = Vec<(usize, BTreeSet<String>)>;
    let mut hand_sets: BTreeMap<(SlotKey, String), HandSets> = BTreeMap::new();
    for (i, v) in views.iter().enumerate() {
        for (group, set) in v.hand_sets() {
            hand_sets.entry(group).or_default().push((i, set));
        }
    }
    let mut hand_groups = BTreeMap::new();
    for ((anchor, rel), sets) in hand_sets {
        let disagree = sets.windows(2).any(|w| w[0].1 != w[1].1);
        if !disagree {
            continue;
        }
        let mut support: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, set) in &sets {
            for hand in set {
                support.entry(hand.clone()).or_default().push(*i);
            }
        }
        let mut options: Vec<String> = support.keys().cloned().collect();
        options.sort_by_key(|h| HAND_ORDER.iter().position(|x| x == h));
        let phrases: Vec<String> = options.iter().map(|h| format!("{rel} {h}")).collect();
        let text = format!("Does {} {}?", describe(&anchor), or_list(&phrases));
        questions.push(question(
            QuestionKind::HandChoice,
            hand_question_id(&anchor, &rel),
            QuestionSubject::Hand {
                anchor: anchor.clone(),
                relation: rel.clone(),
            },
            text,
            options,
            None,
        ));
        hand_groups.insert((anchor, rel), support);
    }

    // 4. spatial relations proposed by a single annotator
    for ((src, dst), rels) in &relations {
        if rels.len() != 1 || src == &SlotKey::Verb || dst == &SlotKey::Verb {
            continue;
        }
        let (rel, who) = rels.iter().next().expect("one relation");
        if who.len() != 1 {
            continue;
        }
        let hand_governed = dst.noun().is_some_and(is_hand)
            && hand_groups.contains_key(&(src.clone(), rel.clone()));
        if hand_governed {
            continue;
        }
        let statement = format!("The {src} is {rel} {dst}");
        questions.push(question(
            QuestionKind::SpatialYesNo,
            spatial_question_id(src, dst, rel),
            QuestionSubject::Spatial {
                src: src.clone(),
                dst: dst.clone(),
                relation: rel.clone(),
            },
            format!("Is the following statement correct: {statement}"),
            Vec::new(),
            Some(statement),
        ));
    }

    questions.sort_by(|a, b| a.kind.cmp(&b.kind).then_with(|| a.id.cmp(&b.id)));
    Ok(Analysis {
        views,
        clip_id,
        timestep,
        questions,
        pair_support,
        relations,
        hand_groups,
    })
}

/// Questions needed to reconcile three annotator graphs of one timestep.
/// Empty when the graphs agree.
pub fn detect_disagreements(
    inputs: &[AnnotatorGraph],
) -> Result<Vec<ValidationQuestion>, ConsensusError> {
    Ok(analyze(inputs)?.questions)
}

fn resolve_answers<'q>(
    questions: &'q [ValidationQuestion],
    answers: &[Answer],
) -> Result<HashMap<&'q str, AnswerChoice>, ConsensusError> {
    let by_id: HashMap<&str, &ValidationQuestion> =
        questions.iter().map(|q| (q.id.as_str(), q)).collect();
    let mut chosen: HashMap<&'q str, AnswerChoice> = HashMap::new();
    for a in answers {
        let Some(q) = by_id.get(a.question_id.as_str()) else {
            return Err(ConsensusError::UnknownQuestion(a.question_id.clone()));
        };
        if !q.accepts(&a.choice) {
            return Err(ConsensusError::InvalidAnswer {
                question: q.id.clone(),
                detail: format!("{:?}", a.choice),
            });
        }
        match chosen.get(q.id.as_str()) {
            Some(prev) if prev != &a.choice => {
                return Err(ConsensusError::ConflictingAnswers(q.id.clone()))
            }
            _ => {
                chosen.insert(q.id.as_str(), a.choice.clone());
            }
        }
    }
    let missing: Vec<String> = questions
        .iter()
        .filter(|q| !chosen.contains_key(q.id.as_str()))
        .map(|q| q.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(ConsensusError::Unanswered(missing));
    }
    Ok(chosen)
}

/// Merges three annotator graphs into one consensus graph using the answers
/// to the questions from [`detect_disagreements`].
///
/// Groundings of a kept object come from the annotator designated by an
/// answer about that object, otherwise from the lowest annotator id among
/// those who drew it. The chosen source is recorded in the provenance.
pub fn merge(inputs: &[AnnotatorGraph], answers: &[Answer]) -> Result<ActionGraph, ConsensusError> {
    let a = analyze(inputs)?;
    let chosen = resolve_answers(&a.questions, answers)?;
    let option_of = |id: &str| match chosen.get(id) {
        Some(AnswerChoice::Option(o)) => Some(o.clone()),
        _ => None,
    };
    let mut review = Vec::new();
    // slot -> views designated by an answer (first designation wins)
    let mut designated: BTreeMap<SlotKey, Vec<usize>> = BTreeMap::new();

    // verb and direct objects
    let ranked_pairs = ranked(&a.pair_support);
    let pair = match chosen.get(vn_question_id().as_str()) {
        None => ranked_pairs[0].clone(),
        Some(AnswerChoice::Option(o)) => ranked_pairs
            .iter()
            .find(|p| &p.to_string() == o)
            .cloned()
            .expect("validated option"),
        Some(AnswerChoice::FreeText(t)) => {
            review.push(format!("verb-noun correction for review: {t}"));
            ranked_pairs[0].clone()
        }
        Some(AnswerChoice::YesNo(_)) => unreachable!("rejected by accepts()"),
    };
    let vn_views = a.pair_support[&pair].clone();
    let dobj_keys = a.views[vn_views[0]].dobjs.clone();
    if chosen.contains_key(vn_question_id().as_str()) {
        for k in &dobj_keys {
            designated
                .entry(k.clone())
                .or_insert_with(|| vn_views.clone());
        }
    }

    // hand answers: which hand edges are dropped, which are forced
    let mut dropped: HashSet<(SlotKey, SlotKey, String)> = HashSet::new();
    let mut forced: HashSet<(SlotKey, SlotKey)> = HashSet::new();
    let mut hand_designations = Vec::new();
    for ((anchor, rel), support) in &a.hand_groups {
        let pick = option_of(&hand_question_id(anchor, rel)).expect("answered");
        for (hand, who) in support {
            let hand_keys: BTreeSet<SlotKey> = who
                .iter()
                .flat_map(|&i| {
                    a.views[i]
                        .edges
                        .iter()
                        .filter(|((s, d), r)| {
                            s == anchor && *r == rel && d.noun() == Some(hand.as_str())
                        })
                        .map(|((_, d), _)| d.clone())
                })
                .collect();
            for hk in hand_keys {
                if hand == &pick {
                    forced.insert((anchor.clone(), hk.clone()));
                    hand_designations.push((hk, who.clone()));
                } else {
                    dropped.insert((anchor.clone(), hk, rel.clone()));
                }
            }
        }
    }

    // relations
    let mut kept: BTreeMap<(SlotKey, SlotKey), String> = BTreeMap::new();
    let mut prep_designations = Vec::new();
    let mut spatial_designations = Vec::new();
    for ((src, dst), rels) in &a.relations {
        if src == &SlotKey::Verb && dobj_keys.contains(dst) {
            continue;
        }
        let key = (src.clone(), dst.clone());
        if rels.len() > 1 {
            let rel = option_of(&prep_question_id(src, dst)).expect("answered");
            let who = rels[&rel].clone();
            for k in [src, dst] {
                if k != &SlotKey::Verb {
                    prep_designations.push((k.clone(), who.clone()));
                }
            }
            kept.insert(key, rel);
            continue;
        }
        let (rel, who) = rels.iter().next().expect("non-empty");
        if dropped.contains(&(src.clone(), dst.clone(), rel.clone())) {
            continue;
        }
        let support = who.len();
        let spatial = chosen.get(spatial_question_id(src, dst, rel).as_str());
        let keep = support >= 2
            || forced.contains(&key)
            || matches!(spatial, Some(AnswerChoice::YesNo(true)));
        if keep {
            if spatial.is_some() {
                spatial_designations.push((src.clone(), who.clone()));
                spatial_designations.push((dst.clone(), who.clone()));
            }
            kept.insert(key, rel.clone());
        }
    }
    for (k, who) in prep_designations
        .into_iter()
        .chain(hand_designations)
        .chain(spatial_designations)
    {
        designated.entry(k).or_insert(who);
    }

    // drop edges whose object is not linked to the verb or a direct object
    let dobj_set: BTreeSet<&SlotKey> = dobj_keys.iter().collect();
    let linked: BTreeSet<SlotKey> = kept
        .keys()
        .flat_map(|(s, d)| {
            let mut v = Vec::new();
            if s == &SlotKey::Verb || dobj_set.contains(s) {
                v.push(d.clone());
            }
            if d == &SlotKey::Verb || dobj_set.contains(d) {
                v.push(s.clone());
            }
            v
        })
        .chain(dobj_keys.iter().cloned())
        .collect();
    kept.retain(|(s, d), _| {
        (s == &SlotKey::Verb || linked.contains(s)) && (d == &SlotKey::Verb || linked.contains(d))
    });
    let objects: BTreeSet<SlotKey> = linked.into_iter().filter(|k| k != &SlotKey::Verb).collect();

    // instance ids and groundings
    let mut sources: BTreeMap<SlotKey, (usize, GroundingRule)> = BTreeMap::new();
    for k in &objects {
        let src = match designated.get(k) {
            Some(who) => who
                .iter()
                .copied()
                .filter(|&i| a.views[i].object_for(k).is_some())
                .min()
                .map(|i| (i, GroundingRule::Answer)),
            None => None,
        };
        let src = src.or_else(|| {
            (0..a.views.len())
                .find(|&i| a.views[i].object_for(k).is_some())
                .map(|i| (i, GroundingRule::LowestAnnotatorId))
        });
        sources.insert(k.clone(), src.expect("object drawn by some annotator"));
    }
    let mut ids: BTreeMap<SlotKey, u32> = BTreeMap::new();
    let mut used = HashSet::new();
    let mut pending = Vec::new();
    for (k, (view, _)) in &sources {
        let id = a.views[*view].object_for(k).expect("source").instance_id;
        if used.insert(id) {
            ids.insert(k.clone(), id);
        } else {
            pending.push(k.clone());
        }
    }
    let first_free = used.iter().max().map_or(0, |m| m + 1);
    for (next, k) in (first_free..).zip(pending) {
        ids.insert(k, next);
    }

    let frames = a.views[0].graph.frames.clone();
    let mut nodes = vec![Node::CameraWearer, Node::verb(pair.verb.clone())];
    let mut groundings = Vec::new();
    for (k, (view, rule)) in &sources {
        let obj = a.views[*view].object_for(k).expect("source");
        let id = ids[k];
        nodes.push(Node::object(id, obj.noun.clone(), obj.grounding));
        groundings.push(GroundingSource {
            instance_id: id,
            annotator_id: a.views[*view].id.to_string(),
            rule: *rule,
        });
    }
    groundings.sort_by_key(|g| g.instance_id);

    let node_ref = |k: &SlotKey| match k {
        SlotKey::Verb => NodeRef::Verb,
        other => NodeRef::Object(ids[other]),
    };
    let mut edges = vec![Edge::new(NodeRef::CameraWearer, NodeRef::Verb, ACTION)];
    for k in &dobj_keys {
        edges.push(Edge::new(NodeRef::Verb, node_ref(k), DIRECT_OBJECT));
    }
    for ((s, d), rel) in &kept {
        edges.push(Edge::new(node_ref(s), node_ref(d), rel.clone()));
    }

    let g = ActionGraph {
        clip_id: a.clip_id,
        timestep: a.timestep,
        frames,
        nodes,
        edges,
        provenance: Provenance::Consensus { groundings, review },
    };
    let g = crate::graph::canonicalize(&g);
    let report = validate_graph(&g);
    if !report.is_valid() {
        return Err(ConsensusError::Internal(report));
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{add_object_node, init_graph};
    use crate::model::{BBox, FrameTriplet, Grounding, SeedAnnotation};
    use crate::taxonomy::Taxonomy;

    fn tax() -> &'static Taxonomy {
        Taxonomy::ego4d_easg()
    }

    fn base(verb: &str, noun: &str, who: &str, x: f64) -> ActionGraph {
        let seed = SeedAnnotation {
            clip_id: "c1".into(),
            timestep: 3,
            frames: FrameTriplet::new(1, 2, 3),
            verb: verb.into(),
            noun: noun.into(),
            box_object: Grounding::uniform(BBox::new(x, 0.0, 10.0, 10.0)),
            box_left_hand: Grounding::default(),
            box_right_hand: Grounding::default(),
            narration: String::new(),
        };
        let mut g = init_graph(&seed, tax()).unwrap();
        g.provenance = Provenance::Annotator {
            annotator_id: who.into(),
        };
        g
    }

    fn add(g: ActionGraph, noun: &str, anchor: NodeRef, rel: &str) -> ActionGraph {
        add_object_node(&g, tax(), noun, Grounding::default(), anchor, rel).unwrap()
    }

    #[test]
    fn unanimous_graphs_need_no_questions() {
        let g = add(
            base("take", "bowl", "a", 1.0),
            "left hand",
            NodeRef::Verb,
            "with",
        );
        let inputs = vec![
            AnnotatorGraph::new("a", g.clone()),
            AnnotatorGraph::new("b", g.clone()),
            AnnotatorGraph::new("c", g.clone()),
        ];
        assert!(detect_disagreements(&inputs).unwrap().is_empty());
        let merged = merge(&inputs, &[]).unwrap();
        assert!(merged.content_eq(&g));
        assert!(matches!(merged.provenance, Provenance::Consensus { .. }));
    }

    #[test]
    fn verb_noun_question_options() {
        let inputs = vec![
            AnnotatorGraph::new("a", base("take", "bowl", "a", 1.0)),
            AnnotatorGraph::new("b", base("take", "bowl", "b", 1.0)),
            AnnotatorGraph::new("c", base("press", "dough", "c", 1.0)),
        ];
        let qs = detect_disagreements(&inputs).unwrap();
        assert_eq!(qs.len(), 1);
        assert_eq!(qs[0].kind, QuestionKind::VerbNounChoice);
        assert_eq!(qs[0].options, vec!["take bowl", "press dough"]);
        assert_eq!(qs[0].text, "Does CW take bowl or press dough?");
    }

    #[test]
    fn preposition_question_options() {
        let b = base("take", "bowl", "a", 1.0);
        let inputs = vec![
            AnnotatorGraph::new("a", add(b.clone(), "left hand", NodeRef::Verb, "with")),
            AnnotatorGraph::new("b", add(b.clone(), "left hand", NodeRef::Verb, "with")),
            AnnotatorGraph::new("c", add(b, "left hand", NodeRef::Verb, "on")),
        ];
        let qs = detect_disagreements(&inputs).unwrap();
        assert_eq!(qs.len(), 1);
        assert_eq!(qs[0].kind, QuestionKind::PrepositionChoice);
        assert_eq!(qs[0].options, vec!["with", "on"]);
        // minority label loses once answered
        let merged = merge(&inputs, &[Answer::option(&qs[0].id, "with", "v")]).unwrap();
        assert_eq!(
            merged.edges.iter().filter(|e| e.relation == "with").count(),
            1
        );
    }

    fn disagreement() -> Vec<AnnotatorGraph> {
        let a1 = base("take", "bowl", "a1", 1.0);
        let a1 = add(a1, "left hand", NodeRef::Verb, "with");
        let a1 = add(a1, "flour", NodeRef::Object(0), "with");
        let a2 = base("take", "bowl", "a2", 2.0);
        let a2 = add(a2, "left hand", NodeRef::Verb, "on");
        let a2 = add(a2, "right hand", NodeRef::Verb, "with");
        let a2 = add(a2, "scale", NodeRef::Object(0), "from");
        let a3 = base("press", "dough", "a3", 3.0);
        let a3 = add(a3, "left hand", NodeRef::Verb, "with");
        let a3 = add(a3, "both hands", NodeRef::Verb, "with");
        vec![
            AnnotatorGraph::new("a1", a1),
            AnnotatorGraph::new("a2", a2),
            AnnotatorGraph::new("a3", a3),
        ]
    }

    #[test]
    fn disagreement_questions_and_answers() {
        let inputs = disagreement();
        let qs = detect_disagreements(&inputs).unwrap();
        let kinds: Vec<_> = qs.iter().map(|q| q.kind).collect();
        assert_eq!(
            kinds,
            vec![
                QuestionKind::VerbNounChoice,
                QuestionKind::PrepositionChoice,
                QuestionKind::HandChoice,
                QuestionKind::SpatialYesNo,
                QuestionKind::SpatialYesNo
            ]
        );
        assert!(qs.iter().all(ValidationQuestion::is_well_formed));
        assert_eq!(qs[0].text, "Does CW take bowl or press dough?");
        assert_eq!(qs[1].options, vec!["with", "on"]);
        assert_eq!(
            qs[2].text,
            "Does CW take bowl with right hand, with left hand or with both hands?"
        );
        let statements: Vec<_> = qs[3..].iter().filter_map(|q| q.statement.clone()).collect();
        assert_eq!(
            statements,
            vec!["The bowl is with flour", "The bowl is from scale"]
        );

        let answers = vec![
            Answer::option(&qs[0].id, "take bowl", "v"),
            Answer::option(&qs[1].id, "with", "v"),
            Answer::option(&qs[2].id, "left hand", "v"),
            Answer::yes_no(&qs[3].id, true, "v"),
            Answer::yes_no(&qs[4].id, false, "v"),
        ];
        let g = merge(&inputs, &answers).unwrap();
        let s = crate::graph::structure(&g);
        let edges: Vec<(&str, &str, &str)> = s
            .edges
            .iter()
            .map(|(a, r, b)| (a.as_str(), r.as_str(), b.as_str()))
            .collect();
        assert_eq!(
            edges,
            vec![
                ("<cw>", "action", "take"),
                ("bowl", "with", "flour"),
                ("take", "direct object", "bowl"),
                ("take", "with", "left hand"),
            ]
        );
        let mut reversed = inputs.clone();
        reversed.reverse();
        assert_eq!(merge(&reversed, &answers).unwrap(), g);
    }

    #[test]
    fn merge_errors() {
        let inputs = vec![
            AnnotatorGraph::new("a", base("take", "bowl", "a", 1.0)),
            AnnotatorGraph::new("b", base("take", "bowl", "b", 1.0)),
            AnnotatorGraph::new("c", base("press", "dough", "c", 1.0)),
        ];
        assert_eq!(
            merge(&inputs, &[]).unwrap_err(),
            ConsensusError::Unanswered(vec!["verb-noun".into()])
        );
        let stray = Answer::yes_no("spatial:x>y:on", true, "v");
        assert_eq!(
            merge(&inputs, &[stray]).unwrap_err(),
            ConsensusError::UnknownQuestion("spatial:x>y:on".into())
        );
        let bad = Answer::option("verb-noun", "cut onion", "v");
        assert!(matches!(
            merge(&inputs, &[bad]).unwrap_err(),
            ConsensusError::InvalidAnswer { .. }
        ));
        let mut other = inputs.clone();
        other[2].graph.timestep = 4;
        assert!(matches!(
            detect_disagreements(&other).unwrap_err(),
            ConsensusError::Mismatch(_)
        ));
        assert_eq!(
            detect_disagreements(&inputs[..2]).unwrap_err(),
            ConsensusError::AnnotatorCount(2)
        );
    }

    #[test]
    fn free_text_correction_is_flagged() {
        let inputs = vec![
            AnnotatorGraph::new("a", base("take", "bowl", "a", 1.0)),
            AnnotatorGraph::new("b", base("take", "bowl", "b", 1.0)),
            AnnotatorGraph::new("c", base("press", "dough", "c", 1.0)),
        ];
        let ans = Answer {
            question_id: "verb-noun".into(),
            choice: AnswerChoice::FreeText("lift bowl".into()),
            respondent: "v".into(),
        };
        let g = merge(&inputs, &[ans]).unwrap();
        match &g.provenance {
            Provenance::Consensus { review, .. } => assert_eq!(review.len(), 1),
            other => panic!("unexpected provenance {other:?}"),
        }
        assert_eq!(g.verb(), Some("take"));
    }

    #[test]
    fn grounding_comes_from_lowest_id_supporter() {
        let inputs = vec![
            AnnotatorGraph::new("zed", base("take", "bowl", "zed", 9.0)),
            AnnotatorGraph::new("amy", base("take", "bowl", "amy", 2.0)),
            AnnotatorGraph::new("bob", base("take", "bowl", "bob", 5.0)),
        ];
        let g = merge(&inputs, &[]).unwrap();
        assert_eq!(g.object(0).unwrap().grounding.pre.unwrap().x, 2.0);
        match &g.provenance {
            Provenance::Consensus { groundings, .. } => {
                assert_eq!(groundings[0].annotator_id, "amy");
                assert_eq!(groundings[0].rule, GroundingRule::LowestAnnotatorId);
            }
            other => panic!("unexpected provenance {other:?}"),
        }
    }
}
