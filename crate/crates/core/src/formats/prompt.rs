//! One-shot prompts for action anticipation and activity summarization.
//!
//! Every prompt has a task description (system text) and a user text made of
//! an input example, its completion, and the input sequence.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::direct_objects;
use crate::model::ActionGraph;

use super::completion::ActionPair;
use super::dataset::ClipRecord;
use super::sentence::{to_sentence_with, words};
use super::triplet::{to_triplet_string, SubjectToken};

pub const ANTICIPATION_EASG_SYSTEM: &str = "You are an assistant which models human behaviour very well. You'll be provided with a sequence of graphs (1..N-1) describing the actions retrieved from a first-person view video. Your task is to predict the next graph (N).";

pub const ANTICIPATION_VN_SYSTEM: &str = "You are an assistant which models human behaviour very well. You'll be provided with a sequence of verb-noun pairs (1..N-1) describing the actions retrieved from a first-person view video. Your task is to predict the next action (N).";

pub const SUMMARIZATION_EASG_SYSTEM: &str = "You are an assistant who can model human behaviour very well. You'll be provided with a sequence of actions retrieved from a first-person view video. Your task is to understand the general activity and describe it in one sentence. Please, provide a very general summary and try to avoid listing all the \"atomic\" activities.";

pub const SUMMARIZATION_VN_SYSTEM: &str = "You are an assistant which can model human behaviour very well. You'll be provided with a sequence of verb-noun pairs describing the actions retrieved from a first-person view video. Your task is to understand the general activity and describe it in one sentence. Please, provide a very general summary and try to avoid listing all the \"atomic\" activities.";

const ANTICIPATION_EASG_EXAMPLE: &str = "\
Graph 1: Camera wearer - verb - take; take - direct object - flour; take - from - package; take - with - right hand
Graph 2: Camera wearer - verb - add; add - direct object - flour; add - to - bowl; bowl - with - dough; add - with - right hand
Graph 3: Camera wearer - verb - press; press - direct object - dough; press - with - both hands
Graph 4: Camera wearer - verb - move; move - direct object - dough; move - from - bowl; move - to - scale
Graph 5: Camera wearer - verb - move; move - direct object - dough; move - from - bowl; move - to - scale";

const ANTICIPATION_EASG_COMPLETION: &str = "Graph 6: Camera wearer - verb - remove; remove - direct object - dough; remove - from - scale; remove - to - bowl";

const ANTICIPATION_VN_EXAMPLE: &str = "\
Action 1: take flour
Action 2: add flour
Action 3: press dough
Action 4: move dough
Action 5: put dough";

const ANTICIPATION_VN_COMPLETION: &str = "Action 6: remove dough";

const SUMMARIZATION_EASG_EXAMPLE: &str = "\
Action 1: Camera wearer pick up hose
Action 2: Camera wearer point hose towards car
Action 3: Camera wearer spray car with water hose
Action 4: Camera wearer wash car
Action 5: Camera wearer raise wiper
Action 6: Camera wearer wash car
Action 7: Camera wearer push down wiper";

const SUMMARIZATION_VN_EXAMPLE: &str = "\
Action 1: pick up hose
Action 2: point hose
Action 3: spray car
Action 4: wash car
Action 5: raise wiper
Action 6: wash car
Action 7: push down wiper";

const SUMMARIZATION_COMPLETION: &str =
    "Camera wearer is washing and cleaning a car with a water hose and wiper.";

/// Sequence lengths used for anticipation.
pub const ANTICIPATION_LENGTHS: [usize; 2] = [5, 20];
/// Shortest sequence accepted for summarization.
pub const MIN_SUMMARY_LENGTH: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    GraphPrediction,
    ActionPrediction,
    Summary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub system_text: String,
    pub user_text: String,
    pub expected_output_kind: OutputKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnticipationMode {
    Easg,
    Vn,
}

/// Input of a summarization prompt.
#[derive(Debug, Clone, Copy)]
pub enum SummaryInput<'a> {
    Easg(&'a [ActionGraph]),
    Vn(&'a [ActionGraph]),
    Narration(&'a [String]),
}

impl SummaryInput<'_> {
    pub fn len(&self) -> usize {
        match self {
            SummaryInput::Easg(s) | SummaryInput::Vn(s) => s.len(),
            SummaryInput::Narration(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("anticipation needs a sequence of 5 or 20 graphs, got {0}")]
    UnsupportedLength(usize),
    #[error("summarization needs at least {MIN_SUMMARY_LENGTH} actions, got {0}")]
    TooShort(usize),
}

/// `verb noun` with the first direct object, hyphens read as spaces.
pub fn verb_noun(g: &ActionGraph) -> String {
    let verb = words(g.verb().unwrap_or("?"));
    match direct_objects(g).first().and_then(|r| g.label_of(*r)) {
        Some(noun) => format!("{verb} {}", words(noun)),
        None => verb,
    }
}

fn numbered(prefix: &str, items: impl IntoIterator<Item = String>) -> String {
    items
        .into_iter()
        .enumerate()
        .map(|(i, s)| format!("{prefix} {}: {s}", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

fn user_text(example: &str, head: &str, completion: &str, sequence: &str) -> String {
    format!("Example:\n{example}\n{head}\n{completion}\n\n{sequence}\n{head}")
}

pub fn build_anticipation_prompt(
    seq: &[ActionGraph],
    mode: AnticipationMode,
) -> Result<Prompt, PromptError> {
    if !ANTICIPATION_LENGTHS.contains(&seq.len()) {
        return Err(PromptError::UnsupportedLength(seq.len()));
    }
    let prompt = match mode {
        AnticipationMode::Easg => Prompt {
            system_text: ANTICIPATION_EASG_SYSTEM.into(),
            user_text: user_text(
                ANTICIPATION_EASG_EXAMPLE,
                "Prediction:",
                ANTICIPATION_EASG_COMPLETION,
                &numbered(
                    "Graph",
                    seq.iter()
                        .map(|g| to_triplet_string(g, SubjectToken::CameraWearer)),
                ),
            ),
            expected_output_kind: OutputKind::GraphPrediction,
        },
        AnticipationMode::Vn => Prompt {
            system_text: ANTICIPATION_VN_SYSTEM.into(),
            user_text: user_text(
                ANTICIPATION_VN_EXAMPLE,
                "Prediction:",
                ANTICIPATION_VN_COMPLETION,
                &numbered("Action", seq.iter().map(verb_noun)),
            ),
            expected_output_kind: OutputKind::ActionPrediction,
        },
    };
    Ok(prompt)
}

/// Narration sequences reuse the graph-mode task description and example.
pub fn build_summarization_prompt(input: SummaryInput<'_>) -> Result<Prompt, PromptError> {
    if input.len() < MIN_SUMMARY_LENGTH {
        return Err(PromptError::TooShort(input.len()));
    }
    let (system, example, lines) = match input {
        SummaryInput::Easg(seq) => (
            SUMMARIZATION_EASG_SYSTEM,
            SUMMARIZATION_EASG_EXAMPLE,
            seq.iter()
                .map(|g| to_sentence_with(g, SubjectToken::CameraWearer))
                .collect::<Vec<_>>(),
        ),
        SummaryInput::Vn(seq) => (
            SUMMARIZATION_VN_SYSTEM,
            SUMMARIZATION_VN_EXAMPLE,
            seq.iter().map(verb_noun).collect(),
        ),
        SummaryInput::Narration(seq) => (
            SUMMARIZATION_EASG_SYSTEM,
            SUMMARIZATION_EASG_EXAMPLE,
            seq.iter().map(|s| s.trim().to_string()).collect(),
        ),
    };
    Ok(Prompt {
        system_text: system.into(),
        user_text: user_text(
            example,
            "Summary:",
            SUMMARIZATION_COMPLETION,
            &numbered("Action", lines),
        ),
        expected_output_kind: OutputKind::Summary,
    })
}

/// The action a graph shows: its verb and first direct object.
pub fn action_of(g: &ActionGraph) -> Option<ActionPair> {
    let noun = direct_objects(g).first().and_then(|r| g.label_of(*r))?;
    Some(ActionPair::new(g.verb()?, noun))
}

/// A window counts only when its last input graph is at or after this
/// timestep, so both sequence lengths are scored on the same targets.
pub const ANTICIPATION_MIN_END: u32 = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnticipationExample {
    pub clip_id: String,
    /// Timestep of the first input graph.
    pub start: u32,
    pub prompt: Prompt,
    pub target: ActionPair,
}

/// Every window of `len` consecutive graphs followed by a graph with an
/// action, stride one, whose last input timestep is at least `min_end`.
pub fn anticipation_examples(
    clip_id: &str,
    graphs: &[ActionGraph],
    len: usize,
    mode: AnticipationMode,
    min_end: u32,
) -> Result<Vec<AnticipationExample>, PromptError> {
    if !ANTICIPATION_LENGTHS.contains(&len) {
        return Err(PromptError::UnsupportedLength(len));
    }
    let mut seq = graphs.to_vec();
    seq.sort_by_key(|g| g.timestep);
    let mut out = Vec::new();
    for w in seq.windows(len + 1) {
        let (inputs, next) = w.split_at(len);
        if inputs[len - 1].timestep < min_end {
            continue;
        }
        let Some(target) = action_of(&next[0]) else {
            continue;
        };
        out.push(AnticipationExample {
            clip_id: clip_id.to_string(),
            start: inputs[0].timestep,
            prompt: build_anticipation_prompt(inputs, mode)?,
            target,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryMode {
    Easg,
    Vn,
    Narration,
}

/// Summarization prompt over a whole clip.
pub fn clip_summary_prompt(clip: &ClipRecord, mode: SummaryMode) -> Result<Prompt, PromptError> {
    let mut graphs = clip.graphs.clone();
    graphs.sort_by_key(|g| g.timestep);
    build_summarization_prompt(match mode {
        SummaryMode::Easg => SummaryInput::Easg(&graphs),
        SummaryMode::Vn => SummaryInput::Vn(&graphs),
        SummaryMode::Narration => SummaryInput::Narration(&clip.narrations),
    })
}
