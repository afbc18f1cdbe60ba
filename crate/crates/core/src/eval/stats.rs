//! Dataset statistics.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::formats::DatasetFile;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub sequences: usize,
    /// Summed sequence length over clips with timestamps.
    pub total_hours: f64,
    pub avg_sequence_seconds: f64,
    /// Clips that entered the duration figures.
    pub timed_sequences: usize,
    pub avg_graphs_per_sequence: f64,
    pub object_classes: usize,
    pub verb_classes: usize,
    pub relation_classes: usize,
    /// Graphs per sequence -> number of sequences.
    pub length_histogram: BTreeMap<usize, usize>,
    pub scenarios: BTreeMap<String, usize>,
    pub boxes_per_split: BTreeMap<String, usize>,
    pub sequences_per_split: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// A sequence lasts from the PRE frame of its first graph to the POST frame
/// of its last one. Clips lacking either timestamp are left out of the
/// duration figures with a warning. Averages are unweighted over sequences.
pub fn compute_stats(d: &DatasetFile) -> StatsReport {
    let mut r = StatsReport {
        sequences: d.clips.len(),
        ..StatsReport::default()
    };
    let (mut objects, mut verbs, mut relations) =
        (BTreeSet::new(), BTreeSet::new(), BTreeSet::new());
    let mut seconds = Vec::new();
    let mut graphs = 0usize;
    for clip in &d.clips {
        graphs += clip.graphs.len();
        *r.length_histogram.entry(clip.graphs.len()).or_insert(0) += 1;
        *r.scenarios.entry(clip.scenario.clone()).or_insert(0) += 1;
        let split = clip.split.as_str().to_string();
        *r.sequences_per_split.entry(split.clone()).or_insert(0) += 1;
        let boxes = r.boxes_per_split.entry(split).or_insert(0);
        for g in &clip.graphs {
            verbs.extend(g.verb());
            for o in g.objects() {
                objects.insert(o.noun.as_str());
                *boxes += o.grounding.count();
            }
            relations.extend(g.edges.iter().map(|e| e.relation.as_str()));
        }
        let first = clip.graphs.iter().min_by_key(|g| g.timestep);
        let last = clip.graphs.iter().max_by_key(|g| g.timestep);
        match (
            first.and_then(|g| g.frames.pre.timestamp),
            last.and_then(|g| g.frames.post.timestamp),
        ) {
            (Some(a), Some(b)) if b >= a => seconds.push(b - a),
            (Some(_), Some(_)) => r
                .warnings
                .push(format!("{}: sequence ends before it starts", clip.clip_id)),
            _ => r
                .warnings
                .push(format!("{}: missing PRE or POST timestamp", clip.clip_id)),
        }
    }
    r.timed_sequences = seconds.len();
    let total: f64 = seconds.iter().sum();
    r.total_hours = total / 3600.0;
    if !seconds.is_empty() {
        r.avg_sequence_seconds = total / seconds.len() as f64;
    }
    if r.sequences > 0 {
        r.avg_graphs_per_sequence = graphs as f64 / r.sequences as f64;
    }
    r.object_classes = objects.len();
    r.verb_classes = verbs.len();
    r.relation_classes = relations.len();
    r
}
