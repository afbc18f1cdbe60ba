//! Events and the state derived from them.
//!
//! Every mutation of the service is an [`Event`] appended to the log. The
//! in-memory [`State`] is a pure fold over the log, so replaying the same
//! events always rebuilds the same state.

use std::collections::BTreeMap;

use easg_core::consensus::{AnnotatorGraph, Answer, ValidationQuestion};
use easg_core::formats::{DataSplit, OutputKind, Prompt};
use easg_core::temporal::CorrespondenceOverride;
use easg_core::{ActionGraph, SeedAnnotation};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Refinement,
    Validation,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Refinement => "refinement",
            TaskKind::Validation => "validation",
        }
    }

    pub fn task_id(self, clip_id: &str, timestep: u32) -> String {
        match self {
            TaskKind::Refinement => format!("ref-{clip_id}-{timestep}"),
            TaskKind::Validation => format!("val-{clip_id}-{timestep}"),
        }
    }
}

impl std::str::FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "refinement" => Ok(TaskKind::Refinement),
            "validation" => Ok(TaskKind::Validation),
            other => Err(format!("unknown task kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum TaskPayload {
    /// The seed graph to refine; frame URIs travel inside `seed.frames`.
    Refinement {
        seed: ActionGraph,
    },
    Validation {
        questions: Vec<ValidationQuestion>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TaskState {
    Open,
    Claimed {
        annotator: String,
        lease_expiry_ms: u64,
    },
    Done,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: String,
    pub kind: TaskKind,
    pub clip_id: String,
    pub timestep: u32,
    pub payload: TaskPayload,
    pub state: TaskState,
    /// Annotators whose responses were accepted, in submission order.
    pub respondents: Vec<String>,
    pub required: usize,
    #[serde(default)]
    pub flagged_for_review: bool,
}

impl TaskRecord {
    /// Holder of a live lease at `now_ms`.
    pub fn holder(&self, now_ms: u64) -> Option<&str> {
        match &self.state {
            TaskState::Claimed {
                annotator,
                lease_expiry_ms,
            } if *lease_expiry_ms > now_ms => Some(annotator),
            _ => None,
        }
    }

    /// Open, or claimed under a lease that has run out.
    pub fn is_claimable(&self, now_ms: u64) -> bool {
        self.state != TaskState::Done && self.holder(now_ms).is_none()
    }

    pub fn answered_by(&self, annotator: &str) -> bool {
        self.respondents.iter().any(|a| a == annotator)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum TaskResponse {
    Refinement { graph: ActionGraph },
    Validation { answers: Vec<Answer> },
}

/// A corrected (verb, noun) pair sent outside the validation flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerbNounCorrection {
    pub timestep: u32,
    pub annotator: String,
    pub verb: String,
    pub noun: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Set by the service: both labels are in the taxonomy.
    #[serde(default)]
    pub in_taxonomy: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimestepState {
    pub seed: SeedAnnotation,
    pub seed_graph: ActionGraph,
    pub refinements: Vec<AnnotatorGraph>,
    /// Set once all refinements are in.
    pub questions: Option<Vec<ValidationQuestion>>,
    pub answers: Vec<Answer>,
}

impl TimestepState {
    /// Refinements complete and every question answered.
    pub fn ready(&self, required: usize) -> bool {
        self.refinements.len() >= required
            && match &self.questions {
                None => false,
                Some(q) => q.is_empty() || !self.answers.is_empty(),
            }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipState {
    pub clip_id: String,
    pub scenario: String,
    pub split: DataSplit,
    pub timesteps: BTreeMap<u32, TimestepState>,
    pub corrections: Vec<VerbNounCorrection>,
    pub overrides: CorrespondenceOverride,
    pub consensus: Option<Vec<ActionGraph>>,
    pub recollected: Option<Vec<ActionGraph>>,
    pub recollect_warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: SeedAnnotation,
    pub graph: ActionGraph,
}

/// Raw completion kept for offline rescoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRecord {
    pub model: String,
    pub kind: OutputKind,
    pub prompt: Prompt,
    pub completion: String,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventKind {
    SeedsCreated {
        clip_id: String,
        scenario: String,
        split: DataSplit,
        required: usize,
        seeds: Vec<SeedRecord>,
    },
    TaskClaimed {
        task_id: String,
        annotator: String,
        lease_expiry_ms: u64,
    },
    ResponseSubmitted {
        task_id: String,
        annotator: String,
        response: TaskResponse,
    },
    ValidationTaskCreated {
        clip_id: String,
        timestep: u32,
        questions: Vec<ValidationQuestion>,
    },
    CorrectionRecorded {
        clip_id: String,
        correction: VerbNounCorrection,
    },
    MergeProduced {
        clip_id: String,
        graphs: Vec<ActionGraph>,
    },
    OverridesSet {
        clip_id: String,
        overrides: CorrespondenceOverride,
    },
    RecollectProduced {
        clip_id: String,
        graphs: Vec<ActionGraph>,
        warnings: Vec<String>,
    },
    LlmCompleted {
        record: LlmRecord,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub at_ms: u64,
    pub event: EventKind,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub last_seq: u64,
    pub tasks: BTreeMap<String, TaskRecord>,
    pub clips: BTreeMap<String, ClipState>,
    pub llm: Vec<LlmRecord>,
}

impl State {
    pub fn task(&self, task_id: &str) -> Option<&TaskRecord> {
        self.tasks.get(task_id)
    }

    pub fn clip(&self, clip_id: &str) -> Option<&ClipState> {
        self.clips.get(clip_id)
    }

    pub fn timestep(&self, clip_id: &str, timestep: u32) -> Option<&TimestepState> {
        self.clips.get(clip_id)?.timesteps.get(&timestep)
    }

    fn task_mut(&mut self, task_id: &str) -> Result<&mut TaskRecord, String> {
        self.tasks
            .get_mut(task_id)
            .ok_or_else(|| format!("unknown task {task_id}"))
    }

    fn clip_mut(&mut self, clip_id: &str) -> Result<&mut ClipState, String> {
        self.clips
            .get_mut(clip_id)
            .ok_or_else(|| format!("unknown clip {clip_id}"))
    }

    fn timestep_mut(&mut self, clip_id: &str, timestep: u32) -> Result<&mut TimestepState, String> {
        self.clip_mut(clip_id)?
            .timesteps
            .get_mut(&timestep)
            .ok_or_else(|| format!("unknown timestep {clip_id}/{timestep}"))
    }

    /// Applies one event. Commands check their preconditions before emitting
    /// events, so an error here means the log does not belong to this state.
    pub fn apply(&mut self, e: &Event) -> Result<(), String> {
        if e.seq != self.last_seq + 1 {
            return Err(format!(
                "expected seq {}, found {}",
                self.last_seq + 1,
                e.seq
            ));
        }
        match &e.event {
            EventKind::SeedsCreated {
                clip_id,
                scenario,
                split,
                required,
                seeds,
            } => {
                if self.clips.contains_key(clip_id) {
                    return Err(format!("clip {clip_id} already exists"));
                }
                let mut timesteps = BTreeMap::new();
                for s in seeds {
                    let t = s.seed.timestep;
                    let task_id = TaskKind::Refinement.task_id(clip_id, t);
                    self.tasks.insert(
                        task_id.clone(),
                        TaskRecord {
                            task_id,
                            kind: TaskKind::Refinement,
                            clip_id: clip_id.clone(),
                            timestep: t,
                            payload: TaskPayload::Refinement {
                                seed: s.graph.clone(),
                            },
                            state: TaskState::Open,
                            respondents: Vec::new(),
                            required: *required,
                            flagged_for_review: false,
                        },
                    );
                    timesteps.insert(
                        t,
                        TimestepState {
                            seed: s.seed.clone(),
                            seed_graph: s.graph.clone(),
                            refinements: Vec::new(),
                            questions: None,
                            answers: Vec::new(),
                        },
                    );
                }
                self.clips.insert(
                    clip_id.clone(),
                    ClipState {
                        clip_id: clip_id.clone(),
                        scenario: scenario.clone(),
                        split: *split,
                        timesteps,
                        corrections: Vec::new(),
                        overrides: CorrespondenceOverride::default(),
                        consensus: None,
                        recollected: None,
                        recollect_warnings: Vec::new(),
                    },
                );
            }
            EventKind::TaskClaimed {
                task_id,
                annotator,
                lease_expiry_ms,
            } => {
                let t = self.task_mut(task_id)?;
                if t.state == TaskState::Done {
                    return Err(format!("claim on finished task {task_id}"));
                }
                t.state = TaskState::Claimed {
                    annotator: annotator.clone(),
                    lease_expiry_ms: *lease_expiry_ms,
                };
            }
            EventKind::ResponseSubmitted {
                task_id,
                annotator,
                response,
            } => {
                let t = self.task_mut(task_id)?;
                t.respondents.push(annotator.clone());
                t.state = if t.respondents.len() >= t.required {
                    TaskState::Done
                } else {
                    TaskState::Open
                };
                let (clip_id, timestep) = (t.clip_id.clone(), t.timestep);
                let ts = self.timestep_mut(&clip_id, timestep)?;
                match response {
                    TaskResponse::Refinement { graph } => ts
                        .refinements
                        .push(AnnotatorGraph::new(annotator.clone(), graph.clone())),
                    TaskResponse::Validation { answers } => {
                        ts.answers.extend(answers.iter().cloned())
                    }
                }
                // all refinements in and nothing to ask: mark as settled
                let required = self.tasks[task_id].required;
                let ts = self.timestep_mut(&clip_id, timestep)?;
                if matches!(response, TaskResponse::Refinement { .. })
                    && ts.refinements.len() >= required
                    && ts.questions.is_none()
                {
                    ts.questions = Some(Vec::new());
                }
            }
            EventKind::ValidationTaskCreated {
                clip_id,
                timestep,
                questions,
            } => {
                let ts = self.timestep_mut(clip_id, *timestep)?;
                ts.questions = Some(questions.clone());
                let task_id = TaskKind::Validation.task_id(clip_id, *timestep);
                self.tasks.insert(
                    task_id.clone(),
                    TaskRecord {
                        task_id,
                        kind: TaskKind::Validation,
                        clip_id: clip_id.clone(),
                        timestep: *timestep,
                        payload: TaskPayload::Validation {
                            questions: questions.clone(),
                        },
                        state: TaskState::Open,
                        respondents: Vec::new(),
                        required: 1,
                        flagged_for_review: false,
                    },
                );
            }
            EventKind::CorrectionRecorded {
                clip_id,
                correction,
            } => {
                self.clip_mut(clip_id)?.corrections.push(correction.clone());
                let task_id = TaskKind::Refinement.task_id(clip_id, correction.timestep);
                self.task_mut(&task_id)?.flagged_for_review = true;
            }
            EventKind::MergeProduced { clip_id, graphs } => {
                self.clip_mut(clip_id)?.consensus = Some(graphs.clone());
            }
            EventKind::OverridesSet { clip_id, overrides } => {
                let c = self.clip_mut(clip_id)?;
                c.overrides = overrides.clone();
                c.recollected = None;
                c.recollect_warnings.clear();
            }
            EventKind::RecollectProduced {
                clip_id,
                graphs,
                warnings,
            } => {
                let c = self.clip_mut(clip_id)?;
                c.recollected = Some(graphs.clone());
                c.recollect_warnings = warnings.clone();
            }
            EventKind::LlmCompleted { record } => self.llm.push(record.clone()),
        }
        self.last_seq = e.seq;
        Ok(())
    }
}

/// Frame URIs of one timestep, as seen by the UI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameView {
    pub timestep: u32,
    pub frame: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uri: Option<String>,
}
