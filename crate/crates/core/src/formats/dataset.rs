//! The dataset document: one UTF-8 JSON file holding the taxonomy, the
//! clips with their graph sequences, and the annotation artifacts.
//!
//! [`save_dataset`] writes a canonical form: sorted object keys, clips by id,
//! graphs by timestep with canonical node and edge order, two-space
//! indentation and a trailing newline. Equal values give equal bytes.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::{merge, AnnotatorGraph, Answer, ConsensusError, ValidationQuestion};
use crate::graph::canonicalize;
use crate::model::ActionGraph;
use crate::taxonomy::Taxonomy;
use crate::temporal::{CorrespondenceOverride, DynamicGraph};
use crate::validate::{validate_graph_against, ValidationReport, ViolationCode};

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSplit {
    Train,
    Val,
}

impl DataSplit {
    pub fn as_str(self) -> &'static str {
        match self {
            DataSplit::Train => "train",
            DataSplit::Val => "val",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipRecord {
    pub clip_id: String,
    pub scenario: String,
    pub split: DataSplit,
    /// Consensus graphs ordered by timestep.
    #[serde(default)]
    pub graphs: Vec<ActionGraph>,
    /// Original narrations, one per timestep when present.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub narrations: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
}

impl ClipRecord {
    pub fn dynamic_graph(&self) -> DynamicGraph {
        DynamicGraph {
            clip_id: self.clip_id.clone(),
            graphs: self.graphs.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimestepAnnotations {
    pub timestep: u32,
    #[serde(default)]
    pub annotator_graphs: Vec<AnnotatorGraph>,
    #[serde(default)]
    pub questions: Vec<ValidationQuestion>,
    #[serde(default)]
    pub answers: Vec<Answer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipAnnotations {
    pub clip_id: String,
    #[serde(default)]
    pub timesteps: Vec<TimestepAnnotations>,
    #[serde(default)]
    pub overrides: CorrespondenceOverride,
}

#[derive(Debug, Error, PartialEq)]
#[error("timestep {timestep}: {source}")]
pub struct MergeClipError {
    pub timestep: u32,
    #[source]
    pub source: ConsensusError,
}

impl ClipAnnotations {
    /// Consensus graph of every annotated timestep, in timestep order.
    pub fn merge(&self) -> Result<Vec<ActionGraph>, MergeClipError> {
        let mut steps: Vec<&TimestepAnnotations> = self.timesteps.iter().collect();
        steps.sort_by_key(|t| t.timestep);
        steps
            .into_iter()
            .map(|t| {
                merge(&t.annotator_graphs, &t.answers).map_err(|source| MergeClipError {
                    timestep: t.timestep,
                    source,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub schema_version: String,
    pub taxonomy: Taxonomy,
    pub clips: Vec<ClipRecord>,
    #[serde(default)]
    pub annotations: Vec<ClipAnnotations>,
}

impl DatasetFile {
    pub fn new(taxonomy: Taxonomy) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            taxonomy,
            clips: Vec::new(),
            annotations: Vec::new(),
        }
    }

    pub fn clip(&self, clip_id: &str) -> Option<&ClipRecord> {
        self.clips.iter().find(|c| c.clip_id == clip_id)
    }

    pub fn annotations_for(&self, clip_id: &str) -> Option<&ClipAnnotations> {
        self.annotations.iter().find(|a| a.clip_id == clip_id)
    }

    /// Sorted clips, annotations and graphs in canonical form.
    pub fn canonical(&self) -> DatasetFile {
        let mut out = self.clone();
        out.clips.sort_by(|a, b| a.clip_id.cmp(&b.clip_id));
        for c in &mut out.clips {
            c.graphs.sort_by_key(|g| g.timestep);
            c.graphs = c.graphs.iter().map(canonicalize).collect();
        }
        out.annotations.sort_by(|a, b| a.clip_id.cmp(&b.clip_id));
        for a in &mut out.annotations {
            a.timesteps.sort_by_key(|t| t.timestep);
            for t in &mut a.timesteps {
                t.annotator_graphs
                    .sort_by(|x, y| x.annotator_id.cmp(&y.annotator_id));
                for ag in &mut t.annotator_graphs {
                    ag.graph = canonicalize(&ag.graph);
                }
                t.questions
                    .sort_by(|x, y| (x.kind, &x.id).cmp(&(y.kind, &y.id)));
                t.answers.sort_by(|x, y| {
                    (&x.question_id, &x.respondent).cmp(&(&y.question_id, &y.respondent))
                });
            }
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("dataset violates invariants: {0}")]
    Invalid(ValidationReport),
}

impl DatasetError {
    pub fn report(&self) -> Option<&ValidationReport> {
        match self {
            DatasetError::Invalid(r) => Some(r),
            _ => None,
        }
    }
}

/// Parses and type-checks a document without checking graph invariants.
pub fn parse_dataset(bytes: &[u8]) -> Result<DatasetFile, DatasetError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let file: DatasetFile = match serde_path_to_error::deserialize(&mut de) {
        Ok(f) => f,
        Err(err) => {
            let path = err.path().to_string();
            let inner = err.into_inner();
            return Err(if inner.is_data() {
                DatasetError::Schema {
                    path,
                    message: inner.to_string(),
                }
            } else {
                DatasetError::Syntax {
                    line: inner.line(),
                    column: inner.column(),
                    message: inner.to_string(),
                }
            });
        }
    };
    de.end().map_err(|e| DatasetError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let major = file.schema_version.split('.').next().unwrap_or("");
    if major != SCHEMA_VERSION.split('.').next().unwrap_or("") {
        return Err(DatasetError::Schema {
            path: "schema_version".into(),
            message: format!(
                "unsupported schema version {:?} (expected {SCHEMA_VERSION})",
                file.schema_version
            ),
        });
    }
    Ok(file)
}

/// Every invariant of the document, aggregated.
pub fn validate_dataset(d: &DatasetFile) -> ValidationReport {
    let mut r = ValidationReport::default();
    let mut seen = HashSet::new();
    for c in &d.clips {
        if !seen.insert(c.clip_id.as_str()) {
            r.push(
                ViolationCode::DuplicateClip,
                format!("clip {:?} listed more than once", c.clip_id),
            );
        }
        for g in &c.graphs {
            if g.clip_id != c.clip_id {
                r.push(
                    ViolationCode::ClipMismatch,
                    format!("graph of clip {:?} stored under {:?}", g.clip_id, c.clip_id),
                );
            }
            r.extend_with_context(
                &format!("clip {} t{}", c.clip_id, g.timestep),
                validate_graph_against(g, &d.taxonomy),
            );
        }
        let steps: Vec<u32> = c.graphs.iter().map(|g| g.timestep).collect();
        let mut sorted = steps.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[1] != w[0] + 1) {
            r.push(
                ViolationCode::TimestepSequence,
                format!("clip {}: timesteps {steps:?} are not contiguous", c.clip_id),
            );
        }
        let mut bound: HashMap<u32, &str> = HashMap::new();
        for g in &c.graphs {
            for o in g.objects() {
                let noun = *bound.entry(o.instance_id).or_insert(&o.noun);
                if noun != o.noun {
                    r.push(
                        ViolationCode::InconsistentInstance,
                        format!(
                            "clip {} t{}: instance {} is {:?} here and {noun:?} elsewhere",
                            c.clip_id, g.timestep, o.instance_id, o.noun
                        ),
                    );
                }
            }
        }
    }

    let clips: BTreeSet<&str> = d.clips.iter().map(|c| c.clip_id.as_str()).collect();
    let mut seen = HashSet::new();
    for a in &d.annotations {
        if !clips.contains(a.clip_id.as_str()) {
            r.push(
                ViolationCode::ClipMismatch,
                format!("annotations for unknown clip {:?}", a.clip_id),
            );
        }
        if !seen.insert(a.clip_id.as_str()) {
            r.push(
                ViolationCode::DuplicateClip,
                format!("annotations for clip {:?} listed more than once", a.clip_id),
            );
        }
        for t in &a.timesteps {
            for ag in &t.annotator_graphs {
                if ag.graph.clip_id != a.clip_id || ag.graph.timestep != t.timestep {
                    r.push(
                        ViolationCode::ClipMismatch,
                        format!(
                            "annotator {} graph {}@t{} stored under {}@t{}",
                            ag.annotator_id,
                            ag.graph.clip_id,
                            ag.graph.timestep,
                            a.clip_id,
                            t.timestep
                        ),
                    );
                }
                r.extend_with_context(
                    &format!(
                        "clip {} t{} annotator {}",
                        a.clip_id, t.timestep, ag.annotator_id
                    ),
                    validate_graph_against(&ag.graph, &d.taxonomy),
                );
            }
        }
    }
    r
}

/// Parses a document and checks every invariant. Warnings do not fail the
/// load; any error-level violation returns the whole report.
pub fn load_dataset(bytes: &[u8]) -> Result<DatasetFile, DatasetError> {
    let file = parse_dataset(bytes)?;
    let report = validate_dataset(&file);
    if !report.is_valid() {
        return Err(DatasetError::Invalid(report));
    }
    Ok(file)
}

/// Canonical bytes of the document.
pub fn save_dataset(d: &DatasetFile) -> Vec<u8> {
    // serde_json maps keep keys sorted, so going through Value sorts them
    let value = serde_json::to_value(d.canonical()).expect("dataset serializes to JSON");
    let mut out = serde_json::to_vec_pretty(&value).expect("JSON value serializes");
    out.push(b'\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::triplet::parse_triplet_string;

    fn small() -> DatasetFile {
        let tax = Taxonomy::ego4d_easg().clone();
        let mut graphs = Vec::new();
        for (t, text) in [
            "CW - verb - take; take - direct object - bowl",
            "CW - verb - wash; wash - direct object - bowl; wash - with - sponge",
        ]
        .iter()
        .enumerate()
        {
            let mut g = parse_triplet_string(text, &tax).unwrap().graph;
            g.clip_id = "c1".into();
            g.timestep = t as u32 + 1;
            graphs.push(g);
        }
        let mut d = DatasetFile::new(tax);
        d.clips.push(ClipRecord {
            clip_id: "c1".into(),
            scenario: "cooking".into(),
            split: DataSplit::Train,
            graphs,
            narrations: vec![],
            summary: Some("washing dishes".into()),
        });
        d
    }

    #[test]
    fn round_trip_and_determinism() {
        let d = small();
        let bytes = save_dataset(&d);
        let back = load_dataset(&bytes).unwrap();
        assert_eq!(save_dataset(&back), bytes);
        assert_eq!(back, d.canonical());
        assert!(bytes.ends_with(b"}\n"));
    }

    #[test]
    fn unknown_relation_is_named() {
        let d = small();
        let text = String::from_utf8(save_dataset(&d))
            .unwrap()
            .replace("\"relation\": \"with\"", "\"relation\": \"beside\"");
        let err = load_dataset(text.as_bytes()).unwrap_err();
        let report = err.report().unwrap();
        assert!(report.has(ViolationCode::UnknownRelation));
        assert!(err.to_string().contains("beside"));
    }

    #[test]
    fn schema_errors_carry_paths() {
        let d = small();
        let text = String::from_utf8(save_dataset(&d))
            .unwrap()
            .replace("\"split\": \"train\"", "\"split\": \"test\"");
        match load_dataset(text.as_bytes()).unwrap_err() {
            DatasetError::Schema { path, .. } => assert_eq!(path, "clips[0].split"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            load_dataset(b"{\"schema_version\": ").unwrap_err(),
            DatasetError::Syntax { .. }
        ));
    }
}
