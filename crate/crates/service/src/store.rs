//! The service: a single writer over the event log plus read snapshots.
//!
//! Commands take the writer lock, check their preconditions against the
//! current state, and turn into events. Events are applied to a copy of the
//! state, appended to the log and flushed to disk before the new state is
//! published. Readers clone an `Arc` of the latest published state and never
//! wait on a write in progress.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use easg_core::consensus::{detect_disagreements, merge, AnnotatorGraph, Answer, AnswerChoice};
use easg_core::eval::{anticipation_topk, summary_scores, SummaryScores, TopKHits};
use easg_core::formats::completion::DEFAULT_PREDICTIONS;
use easg_core::formats::{
    build_anticipation_prompt, build_summarization_prompt, parse_action_predictions, ActionPair,
    ActionPrediction, AnticipationMode, ClipAnnotations, ClipRecord, DataSplit, DatasetFile,
    OutputKind, Prompt, SummaryInput, TimestepAnnotations,
};
use easg_core::temporal::{recollect, CorrespondenceOverride};
use easg_core::{
    init_graph, validate_graph_against, ActionGraph, FrameSlot, LabelKind, Provenance,
    SeedAnnotation, Taxonomy, ValidationReport, ViolationCode,
};
use serde::{Deserialize, Serialize};

use crate::clock::{Clock, SystemClock};
use crate::config::ServiceConfig;
use crate::error::ServiceError;
use crate::llm::LlmClient;
use crate::state::{
    Event, EventKind, FrameView, LlmRecord, SeedRecord, State, TaskKind, TaskPayload, TaskRecord,
    TaskResponse, VerbNounCorrection,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedBatch {
    pub clip_id: String,
    pub scenario: String,
    pub split: DataSplit,
    pub seeds: Vec<SeedAnnotation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitOutcome {
    pub task: TaskRecord,
    /// Validation task opened by this submission, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_task: Option<String>,
    /// Warnings about the submitted graph (errors are rejected).
    #[serde(default, skip_serializing_if = "ValidationReport::is_empty")]
    pub warnings: ValidationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeOutcome {
    pub clip_id: String,
    pub graphs: Vec<ActionGraph>,
    /// Questions asked for each timestep, in timestep order.
    pub questions: BTreeMap<u32, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecollectOutcome {
    pub clip_id: String,
    pub graphs: Vec<ActionGraph>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphStage {
    Seed,
    Consensus,
    Recollected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipGraphs {
    pub clip_id: String,
    pub scenario: String,
    pub split: DataSplit,
    /// The most processed graphs available.
    pub stage: GraphStage,
    pub graphs: Vec<ActionGraph>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnticipateRequest {
    pub sequence: Vec<ActionGraph>,
    #[serde(default = "default_mode")]
    pub mode: AnticipationMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<ActionPair>,
}

fn default_mode() -> AnticipationMode {
    AnticipationMode::Easg
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnticipationHits {
    pub top1: TopKHits,
    pub top5: TopKHits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnticipateResponse {
    pub prompt: Prompt,
    pub completion: String,
    pub predictions: ActionPrediction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hits: Option<AnticipationHits>,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SummarizeInput {
    Easg { graphs: Vec<ActionGraph> },
    Vn { graphs: Vec<ActionGraph> },
    Narration { narrations: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarizeRequest {
    pub input: SummarizeInput,
    #[serde(default)]
    pub references: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarizeResponse {
    pub prompt: Prompt,
    pub completion: String,
    pub summary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<SummaryScores>,
    pub attempts: u32,
}

struct Writer {
    log: File,
    len: u64,
    state: State,
}

pub struct Service {
    config: ServiceConfig,
    taxonomy: &'static Taxonomy,
    clock: Arc<dyn Clock>,
    llm: Option<LlmClient>,
    writer: Mutex<Writer>,
    snapshot: RwLock<Arc<State>>,
}

/// Reads a log, dropping a torn final line left by a crash mid-append.
/// Returns the events and the byte length of the intact prefix.
fn read_log(path: &Path) -> Result<(Vec<Event>, u64), ServiceError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((Vec::new(), 0)),
        Err(e) => return Err(e.into()),
    };
    let mut reader = BufReader::new(file);
    let mut events = Vec::new();
    let mut len = 0u64;
    let mut line = String::new();
    let mut n = 0;
    loop {
        line.clear();
        let read = reader.read_line(&mut line)?;
        if read == 0 {
            break;
        }
        n += 1;
        if !line.ends_with('\n') {
            // torn write; the request that produced it never got a reply
            break;
        }
        let e: Event =
            serde_json::from_str(line.trim_end()).map_err(|e| ServiceError::CorruptLog {
                line: n,
                message: e.to_string(),
            })?;
        events.push(e);
        len += read as u64;
    }
    Ok((events, len))
}

/// Folds a log file into a state, without opening it for writing.
pub fn replay(path: &Path) -> Result<State, ServiceError> {
    let (events, _) = read_log(path)?;
    fold(&events)
}

fn fold(events: &[Event]) -> Result<State, ServiceError> {
    let mut state = State::default();
    for (i, e) in events.iter().enumerate() {
        state.apply(e).map_err(|message| ServiceError::CorruptLog {
            line: i + 1,
            message,
        })?;
    }
    Ok(state)
}

impl Service {
    /// Opens (or creates) the log under `config.data_dir` and replays it.
    pub fn open(config: ServiceConfig) -> Result<Self, ServiceError> {
        Self::open_with(config, Arc::new(SystemClock), None)
    }

    pub fn open_with(
        config: ServiceConfig,
        clock: Arc<dyn Clock>,
        llm: Option<LlmClient>,
    ) -> Result<Self, ServiceError> {
        std::fs::create_dir_all(&config.data_dir)?;
        let path = config.log_path();
        let (events, len) = read_log(&path)?;
        let state = fold(&events)?;
        let log = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)?;
        log.set_len(len)?;
        let mut log = log;
        std::io::Seek::seek(&mut log, std::io::SeekFrom::Start(len))?;
        Ok(Self {
            config,
            taxonomy: Taxonomy::ego4d_easg(),
            clock,
            llm,
            snapshot: RwLock::new(Arc::new(state.clone())),
            writer: Mutex::new(Writer { log, len, state }),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn taxonomy(&self) -> &'static Taxonomy {
        self.taxonomy
    }

    pub fn log_path(&self) -> PathBuf {
        self.config.log_path()
    }

    /// The latest committed state.
    pub fn snapshot(&self) -> Arc<State> {
        self.snapshot
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
    }

    /// Runs a command under the writer lock and commits the events it
    /// returns. Nothing is published unless the log write is durable.
    fn execute<T>(
        &self,
        command: impl FnOnce(&State, u64) -> Result<(Vec<EventKind>, T), ServiceError>,
    ) -> Result<T, ServiceError> {
        let mut w = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let now = self.clock.now_ms();
        let (kinds, out) = command(&w.state, now)?;
        if kinds.is_empty() {
            return Ok(out);
        }
        let mut next = w.state.clone();
        let mut buf = Vec::new();
        for kind in kinds {
            let e = Event {
                seq: next.last_seq + 1,
                at_ms: now,
                event: kind,
            };
            next.apply(&e).map_err(|message| ServiceError::CorruptLog {
                line: e.seq as usize,
                message,
            })?;
            serde_json::to_writer(&mut buf, &e).map_err(std::io::Error::other)?;
            buf.push(b'\n');
        }
        let written = w.log.write_all(&buf).and_then(|_| w.log.sync_data());
        if let Err(e) = written {
            // drop whatever part of the batch reached the file
            let len = w.len;
            let _ = w.log.set_len(len);
            let _ = std::io::Seek::seek(&mut w.log, std::io::SeekFrom::Start(len));
            return Err(e.into());
        }
        w.len += buf.len() as u64;
        let published = Arc::new(next.clone());
        w.state = next;
        *self.snapshot.write().unwrap_or_else(|e| e.into_inner()) = published;
        Ok(out)
    }

    pub fn create_seeds(&self, batch: SeedBatch) -> Result<ClipGraphs, ServiceError> {
        if batch.clip_id.trim().is_empty() {
            return Err(ServiceError::BadRequest("empty clip id".into()));
        }
        if batch.seeds.is_empty() {
            return Err(ServiceError::BadRequest("no seeds".into()));
        }
        let mut records = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for s in &batch.seeds {
            if s.clip_id != batch.clip_id {
                return Err(ServiceError::Unprocessable(format!(
                    "seed for clip {:?} in batch for {:?}",
                    s.clip_id, batch.clip_id
                )));
            }
            if !seen.insert(s.timestep) {
                return Err(ServiceError::Unprocessable(format!(
                    "timestep {} seeded twice",
                    s.timestep
                )));
            }
            let graph = init_graph(s, self.taxonomy).map_err(|e| match e {
                easg_core::ModelError::Invalid(r) => ServiceError::Invalid(r),
                other => ServiceError::Unprocessable(other.to_string()),
            })?;
            records.push(SeedRecord {
                seed: s.clone(),
                graph,
            });
        }
        records.sort_by_key(|r| r.seed.timestep);
        let required = self.config.refinements_required;
        let clip_id = batch.clip_id.clone();
        self.execute(|state, _| {
            if state.clips.contains_key(&clip_id) {
                return Err(ServiceError::Conflict(format!(
                    "clip {clip_id} already exists"
                )));
            }
            Ok((
                vec![EventKind::SeedsCreated {
                    clip_id: batch.clip_id,
                    scenario: batch.scenario,
                    split: batch.split,
                    required,
                    seeds: records,
                }],
                (),
            ))
        })?;
        self.graphs(&clip_id)
    }

    fn may_take(&self, state: &State, t: &TaskRecord, annotator: &str) -> bool {
        if t.answered_by(annotator) {
            return false;
        }
        if t.kind == TaskKind::Validation && self.config.distinct_validators {
            let refined = state
                .timestep(&t.clip_id, t.timestep)
                .is_some_and(|ts| ts.refinements.iter().any(|r| r.annotator_id == annotator));
            if refined {
                return false;
            }
        }
        true
    }

    fn lease_expiry(&self, now: u64) -> u64 {
        now + self.config.lease.as_millis() as u64
    }

    /// Claims `task_id` for `annotator`. Re-claiming a held task renews
    /// nothing and returns it as is.
    pub fn claim(&self, task_id: &str, annotator: &str) -> Result<TaskRecord, ServiceError> {
        check_annotator(annotator)?;
        self.execute(|state, now| {
            let t = state
                .task(task_id)
                .ok_or_else(|| ServiceError::NotFound(format!("task {task_id}")))?;
            if t.holder(now) == Some(annotator) {
                return Ok((Vec::new(), t.clone()));
            }
            if !self.may_take(state, t, annotator) {
                return Err(ServiceError::Conflict(format!(
                    "{annotator} may not take task {task_id}"
                )));
            }
            if !t.is_claimable(now) {
                return Err(ServiceError::Conflict(format!(
                    "task {task_id} is not available"
                )));
            }
            let mut claimed = t.clone();
            let lease_expiry_ms = self.lease_expiry(now);
            claimed.state = crate::state::TaskState::Claimed {
                annotator: annotator.to_string(),
                lease_expiry_ms,
            };
            Ok((
                vec![EventKind::TaskClaimed {
                    task_id: task_id.to_string(),
                    annotator: annotator.to_string(),
                    lease_expiry_ms,
                }],
                claimed,
            ))
        })
    }

    /// Claims the next task this annotator may work on: one they already
    /// hold, else the earliest open one by clip and timestep.
    pub fn claim_next(
        &self,
        kind: Option<TaskKind>,
        annotator: &str,
    ) -> Result<Option<TaskRecord>, ServiceError> {
        check_annotator(annotator)?;
        self.execute(|state, now| {
            let eligible = state
                .tasks
                .values()
                .filter(|t| kind.is_none_or(|k| t.kind == k))
                .filter(|t| self.may_take(state, t, annotator));
            let mut held = None;
            let mut best: Option<&TaskRecord> = None;
            for t in eligible {
                if t.holder(now) == Some(annotator) {
                    held = Some(t);
                    break;
                }
                if t.is_claimable(now)
                    && best.is_none_or(|b| {
                        (&t.clip_id, t.timestep, t.kind) < (&b.clip_id, b.timestep, b.kind)
                    })
                {
                    best = Some(t);
                }
            }
            if let Some(t) = held {
                return Ok((Vec::new(), Some(t.clone())));
            }
            let Some(t) = best else {
                return Ok((Vec::new(), None));
            };
            let lease_expiry_ms = self.lease_expiry(now);
            let mut claimed = t.clone();
            claimed.state = crate::state::TaskState::Claimed {
                annotator: annotator.to_string(),
                lease_expiry_ms,
            };
            Ok((
                vec![EventKind::TaskClaimed {
                    task_id: t.task_id.clone(),
                    annotator: annotator.to_string(),
                    lease_expiry_ms,
                }],
                Some(claimed),
            ))
        })
    }

    pub fn submit(
        &self,
        task_id: &str,
        annotator: &str,
        response: TaskResponse,
    ) -> Result<SubmitOutcome, ServiceError> {
        check_annotator(annotator)?;
        self.execute(|state, now| {
            let t = state
                .task(task_id)
                .ok_or_else(|| ServiceError::NotFound(format!("task {task_id}")))?;
            if t.holder(now) != Some(annotator) {
                return Err(ServiceError::Conflict(format!(
                    "{annotator} holds no live lease on task {task_id}"
                )));
            }
            let mut events = Vec::new();
            let mut warnings = ValidationReport::default();
            let mut validation_task = None;
            let response = match (t.kind, response) {
                (TaskKind::Refinement, TaskResponse::Refinement { mut graph }) => {
                    warnings = self.check_refinement(t, &graph)?;
                    graph.provenance = Provenance::Annotator {
                        annotator_id: annotator.to_string(),
                    };
                    let ts = state
                        .timestep(&t.clip_id, t.timestep)
                        .ok_or_else(|| ServiceError::NotFound(format!("timestep of {task_id}")))?;
                    if ts.refinements.len() + 1 >= t.required {
                        let mut inputs = ts.refinements.clone();
                        inputs.push(AnnotatorGraph::new(annotator, graph.clone()));
                        let questions = detect_disagreements(&inputs)
                            .map_err(|e| ServiceError::Unprocessable(e.to_string()))?;
                        if !questions.is_empty() {
                            validation_task =
                                Some(TaskKind::Validation.task_id(&t.clip_id, t.timestep));
                            events.push(EventKind::ValidationTaskCreated {
                                clip_id: t.clip_id.clone(),
                                timestep: t.timestep,
                                questions,
                            });
                        }
                    }
                    TaskResponse::Refinement { graph }
                }
                (TaskKind::Validation, TaskResponse::Validation { answers }) => {
                    let TaskPayload::Validation { questions } = &t.payload else {
                        return Err(ServiceError::Unprocessable("task has no questions".into()));
                    };
                    TaskResponse::Validation {
                        answers: check_answers(questions, answers, annotator)?,
                    }
                }
                (kind, _) => {
                    return Err(ServiceError::Unprocessable(format!(
                        "response does not fit a {} task",
                        kind.as_str()
                    )))
                }
            };
            events.insert(
                0,
                EventKind::ResponseSubmitted {
                    task_id: task_id.to_string(),
                    annotator: annotator.to_string(),
                    response,
                },
            );
            let mut task = t.clone();
            task.respondents.push(annotator.to_string());
            task.state = if task.respondents.len() >= task.required {
                crate::state::TaskState::Done
            } else {
                crate::state::TaskState::Open
            };
            Ok((
                events,
                SubmitOutcome {
                    task,
                    validation_task,
                    warnings,
                },
            ))
        })
    }

    fn check_refinement(
        &self,
        t: &TaskRecord,
        g: &ActionGraph,
    ) -> Result<ValidationReport, ServiceError> {
        let mut report = validate_graph_against(g, self.taxonomy);
        if g.clip_id != t.clip_id || g.timestep != t.timestep {
            report.push(
                ViolationCode::ClipMismatch,
                format!(
                    "graph is for {}/{}, task is for {}/{}",
                    g.clip_id, g.timestep, t.clip_id, t.timestep
                ),
            );
        }
        if report.is_valid() {
            Ok(report)
        } else {
            Err(ServiceError::Invalid(report))
        }
    }

    pub fn record_correction(
        &self,
        clip_id: &str,
        mut correction: VerbNounCorrection,
    ) -> Result<VerbNounCorrection, ServiceError> {
        check_annotator(&correction.annotator)?;
        if correction.verb.trim().is_empty() || correction.noun.trim().is_empty() {
            return Err(ServiceError::Unprocessable(
                "verb and noun must be non-empty".into(),
            ));
        }
        correction.in_taxonomy = self.taxonomy.contains(LabelKind::Verb, &correction.verb)
            && self.taxonomy.contains(LabelKind::Noun, &correction.noun);
        self.execute(|state, _| {
            state
                .timestep(clip_id, correction.timestep)
                .ok_or_else(|| {
                    ServiceError::NotFound(format!(
                        "clip {clip_id} timestep {}",
                        correction.timestep
                    ))
                })?;
            Ok((
                vec![EventKind::CorrectionRecorded {
                    clip_id: clip_id.to_string(),
                    correction: correction.clone(),
                }],
                correction,
            ))
        })
    }

    /// Merges every timestep of the clip. Refuses until all refinements and
    /// answers are in; afterwards returns the stored result.
    pub fn merge_clip(&self, clip_id: &str) -> Result<MergeOutcome, ServiceError> {
        let required = self.config.refinements_required;
        self.execute(|state, _| {
            let clip = state
                .clip(clip_id)
                .ok_or_else(|| ServiceError::NotFound(format!("clip {clip_id}")))?;
            let questions: BTreeMap<u32, usize> = clip
                .timesteps
                .iter()
                .map(|(t, ts)| (*t, ts.questions.as_ref().map_or(0, Vec::len)))
                .collect();
            if let Some(graphs) = &clip.consensus {
                let out = MergeOutcome {
                    clip_id: clip_id.to_string(),
                    graphs: graphs.clone(),
                    questions,
                };
                return Ok((Vec::new(), out));
            }
            let missing: Vec<String> = clip
                .timesteps
                .iter()
                .filter(|(_, ts)| !ts.ready(required))
                .map(|(t, ts)| {
                    if ts.refinements.len() < required {
                        format!(
                            "timestep {t}: {}/{required} refinements",
                            ts.refinements.len()
                        )
                    } else {
                        format!("timestep {t}: validation answers pending")
                    }
                })
                .collect();
            if !missing.is_empty() {
                return Err(ServiceError::Incomplete { missing });
            }
            let mut graphs = Vec::new();
            for (t, ts) in &clip.timesteps {
                let g = merge(&ts.refinements, &ts.answers)
                    .map_err(|e| ServiceError::Unprocessable(format!("timestep {t}: {e}")))?;
                graphs.push(g);
            }
            let out = MergeOutcome {
                clip_id: clip_id.to_string(),
                graphs: graphs.clone(),
                questions,
            };
            Ok((
                vec![EventKind::MergeProduced {
                    clip_id: clip_id.to_string(),
                    graphs,
                }],
                out,
            ))
        })
    }

    pub fn set_overrides(
        &self,
        clip_id: &str,
        overrides: CorrespondenceOverride,
    ) -> Result<CorrespondenceOverride, ServiceError> {
        self.execute(|state, _| {
            let clip = state
                .clip(clip_id)
                .ok_or_else(|| ServiceError::NotFound(format!("clip {clip_id}")))?;
            if clip.overrides == overrides {
                return Ok((Vec::new(), overrides));
            }
            Ok((
                vec![EventKind::OverridesSet {
                    clip_id: clip_id.to_string(),
                    overrides: overrides.clone(),
                }],
                overrides,
            ))
        })
    }

    /// Recollects the merged graphs of a clip with its stored overrides.
    pub fn recollect_clip(&self, clip_id: &str) -> Result<RecollectOutcome, ServiceError> {
        self.execute(|state, _| {
            let clip = state
                .clip(clip_id)
                .ok_or_else(|| ServiceError::NotFound(format!("clip {clip_id}")))?;
            let consensus = clip
                .consensus
                .as_ref()
                .ok_or_else(|| ServiceError::Incomplete {
                    missing: vec![format!("clip {clip_id} has not been merged")],
                })?;
            let r = recollect(consensus, &clip.overrides)
                .map_err(|e| ServiceError::Unprocessable(e.to_string()))?;
            let out = RecollectOutcome {
                clip_id: clip_id.to_string(),
                graphs: r.graph.graphs,
                warnings: r.warnings,
            };
            if clip.recollected.as_ref() == Some(&out.graphs)
                && clip.recollect_warnings == out.warnings
            {
                return Ok((Vec::new(), out));
            }
            Ok((
                vec![EventKind::RecollectProduced {
                    clip_id: clip_id.to_string(),
                    graphs: out.graphs.clone(),
                    warnings: out.warnings.clone(),
                }],
                out,
            ))
        })
    }

    pub fn task(&self, task_id: &str) -> Result<TaskRecord, ServiceError> {
        self.snapshot()
            .task(task_id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("task {task_id}")))
    }

    pub fn graphs(&self, clip_id: &str) -> Result<ClipGraphs, ServiceError> {
        let state = self.snapshot();
        let clip = state
            .clip(clip_id)
            .ok_or_else(|| ServiceError::NotFound(format!("clip {clip_id}")))?;
        let (stage, graphs, warnings) = match (&clip.recollected, &clip.consensus) {
            (Some(g), _) => (
                GraphStage::Recollected,
                g.clone(),
                clip.recollect_warnings.clone(),
            ),
            (None, Some(g)) => (GraphStage::Consensus, g.clone(), Vec::new()),
            (None, None) => (
                GraphStage::Seed,
                clip.timesteps
                    .values()
                    .map(|ts| ts.seed_graph.clone())
                    .collect(),
                Vec::new(),
            ),
        };
        Ok(ClipGraphs {
            clip_id: clip.clip_id.clone(),
            scenario: clip.scenario.clone(),
            split: clip.split,
            stage,
            graphs,
            warnings,
        })
    }

    pub fn frames(&self, clip_id: &str, slot: FrameSlot) -> Result<Vec<FrameView>, ServiceError> {
        let state = self.snapshot();
        let clip = state
            .clip(clip_id)
            .ok_or_else(|| ServiceError::NotFound(format!("clip {clip_id}")))?;
        Ok(clip
            .timesteps
            .iter()
            .map(|(t, ts)| {
                let f = ts.seed.frames.get(slot);
                FrameView {
                    timestep: *t,
                    frame: f.frame,
                    timestamp: f.timestamp,
                    uri: f.uri.clone(),
                }
            })
            .collect())
    }

    /// Merged clips as a dataset document, with the annotations behind them.
    pub fn export(&self) -> DatasetFile {
        let state = self.snapshot();
        let mut d = DatasetFile::new(self.taxonomy.clone());
        for clip in state.clips.values() {
            let Some(graphs) = clip.recollected.as_ref().or(clip.consensus.as_ref()) else {
                continue;
            };
            let narrations: Vec<String> = clip
                .timesteps
                .values()
                .map(|ts| ts.seed.narration.clone())
                .collect();
            d.clips.push(ClipRecord {
                clip_id: clip.clip_id.clone(),
                scenario: clip.scenario.clone(),
                split: clip.split,
                graphs: graphs.clone(),
                narrations: if narrations.iter().all(String::is_empty) {
                    Vec::new()
                } else {
                    narrations
                },
                summary: None,
            });
            d.annotations.push(ClipAnnotations {
                clip_id: clip.clip_id.clone(),
                timesteps: clip
                    .timesteps
                    .iter()
                    .map(|(t, ts)| TimestepAnnotations {
                        timestep: *t,
                        annotator_graphs: ts.refinements.clone(),
                        questions: ts.questions.clone().unwrap_or_default(),
                        answers: ts.answers.clone(),
                    })
                    .collect(),
                overrides: clip.overrides.clone(),
            });
        }
        d.canonical()
    }

    fn llm(&self) -> Result<&LlmClient, ServiceError> {
        self.llm.as_ref().ok_or(ServiceError::LlmUnavailable)
    }

    async fn run_prompt(&self, prompt: &Prompt) -> Result<(String, u32), ServiceError> {
        let client = self.llm()?;
        let c = client
            .complete(prompt)
            .await
            .map_err(|e| ServiceError::Upstream {
                message: e.message,
                attempts: e.attempts,
                retry_after_ms: e.retry_after_ms,
            })?;
        let record = LlmRecord {
            model: client.config().model.clone(),
            kind: prompt.expected_output_kind,
            prompt: prompt.clone(),
            completion: c.text.clone(),
            attempts: c.attempts,
        };
        self.execute(|_, _| Ok((vec![EventKind::LlmCompleted { record }], ())))?;
        Ok((c.text, c.attempts))
    }

    pub async fn anticipate(
        &self,
        req: AnticipateRequest,
    ) -> Result<AnticipateResponse, ServiceError> {
        let prompt = build_anticipation_prompt(&req.sequence, req.mode)
            .map_err(|e| ServiceError::Unprocessable(e.to_string()))?;
        let (completion, attempts) = self.run_prompt(&prompt).await?;
        let predictions = parse_action_predictions(&completion, DEFAULT_PREDICTIONS);
        let hits = req.ground_truth.as_ref().map(|gt| AnticipationHits {
            top1: anticipation_topk(&predictions, gt, 1),
            top5: anticipation_topk(&predictions, gt, 5),
        });
        Ok(AnticipateResponse {
            prompt,
            completion,
            predictions,
            hits,
            attempts,
        })
    }

    pub async fn summarize(
        &self,
        req: SummarizeRequest,
    ) -> Result<SummarizeResponse, ServiceError> {
        let input = match &req.input {
            SummarizeInput::Easg { graphs } => SummaryInput::Easg(graphs),
            SummarizeInput::Vn { graphs } => SummaryInput::Vn(graphs),
            SummarizeInput::Narration { narrations } => SummaryInput::Narration(narrations),
        };
        let prompt = build_summarization_prompt(input)
            .map_err(|e| ServiceError::Unprocessable(e.to_string()))?;
        debug_assert_eq!(prompt.expected_output_kind, OutputKind::Summary);
        let (completion, attempts) = self.run_prompt(&prompt).await?;
        let summary = completion.trim().to_string();
        let scores = (!req.references.is_empty()).then(|| {
            summary_scores(
                std::slice::from_ref(&summary),
                std::slice::from_ref(&req.references),
            )
        });
        Ok(SummarizeResponse {
            prompt,
            completion,
            summary,
            scores,
            attempts,
        })
    }
}

fn check_annotator(annotator: &str) -> Result<(), ServiceError> {
    if annotator.trim().is_empty() {
        Err(ServiceError::BadRequest("annotator id is required".into()))
    } else {
        Ok(())
    }
}

/// One accepted answer per question, attributed to the submitting annotator.
fn check_answers(
    questions: &[easg_core::consensus::ValidationQuestion],
    answers: Vec<Answer>,
    annotator: &str,
) -> Result<Vec<Answer>, ServiceError> {
    let mut by_id: BTreeMap<&str, AnswerChoice> = BTreeMap::new();
    for a in &answers {
        let q = questions
            .iter()
            .find(|q| q.id == a.question_id)
            .ok_or_else(|| {
                ServiceError::Unprocessable(format!("unknown question {}", a.question_id))
            })?;
        if !q.accepts(&a.choice) {
            return Err(ServiceError::Unprocessable(format!(
                "answer {:?} does not fit question {}",
                a.choice, q.id
            )));
        }
        if by_id.insert(q.id.as_str(), a.choice.clone()).is_some() {
            return Err(ServiceError::Unprocessable(format!(
                "question {} answered twice",
                q.id
            )));
        }
    }
    let missing: Vec<&str> = questions
        .iter()
        .map(|q| q.id.as_str())
        .filter(|id| !by_id.contains_key(id))
        .collect();
    if !missing.is_empty() {
        return Err(ServiceError::Unprocessable(format!(
            "unanswered questions: {}",
            missing.join(", ")
        )));
    }
    Ok(questions
        .iter()
        .map(|q| Answer {
            question_id: q.id.clone(),
            choice: by_id[q.id.as_str()].clone(),
            respondent: annotator.to_string(),
        })
        .collect())
}
