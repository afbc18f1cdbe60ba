//! `easg`: validate, merge and inspect scene graph datasets, build LLM
//! prompts and score experiment outputs.
//!
//! Exit codes: 0 success, 1 other failure, 2 I/O, 3 malformed input,
//! 4 invariant violations, 5 upstream model failure.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use easg_core::eval::report::{
    render_anticipation, render_generation, render_stats, render_summary,
};
use easg_core::eval::{
    compute_stats, evaluate_anticipation, evaluate_generation, random_baseline, summary_scores,
    EvalConfig, GenerationTable, PredictionSet, Task,
};
use easg_core::formats::completion::DEFAULT_PREDICTIONS;
use easg_core::formats::{
    anticipation_examples, clip_summary_prompt, load_dataset, parse_action_predictions,
    parse_dataset, save_dataset, validate_dataset, ActionPair, ActionPrediction,
    AnticipationExample, AnticipationMode, DatasetError, DatasetFile, Prompt, SummaryMode,
    ANTICIPATION_MIN_END,
};
use easg_core::temporal::{recollect, CorrespondenceOverride};
use easg_core::ActionGraph;
use easg_service::llm::LlmError;
use easg_service::{HttpTransport, LlmClient, MockTransport, ServiceConfig};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "easg", version, about = "Egocentric action scene graph tools")]
struct Cli {
    /// Print machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a dataset file against the schema and graph invariants.
    Validate { dataset: PathBuf },
    /// Consensus graphs of a clip from its stored annotations.
    Merge {
        dataset: PathBuf,
        clip: String,
        /// Write the dataset with the merged graphs here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Consistent object instance ids across a clip.
    Recollect {
        dataset: PathBuf,
        clip: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dataset statistics.
    Stats { dataset: PathBuf },
    #[command(subcommand)]
    Eval(EvalCmd),
    #[command(subcommand)]
    Prompt(PromptCmd),
    /// Run prompts through the configured chat-completion endpoint.
    #[command(subcommand)]
    RunLlm(RunCmd),
    /// Recall@K of uniform random scores.
    RandomBaseline {
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[command(flatten)]
        opts: RecallOpts,
    },
}

#[derive(Args, Clone)]
struct RecallOpts {
    /// Only this task.
    #[arg(long)]
    task: Option<Task>,
    /// Only this cut-off.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum, default_value_t = Constraint::Both)]
    constraint: Constraint,
    /// Pool triplets over all graphs instead of averaging per graph.
    #[arg(long)]
    micro: bool,
    /// Leave `direct object` edges out of the ground truth.
    #[arg(long)]
    no_dobj: bool,
}

impl RecallOpts {
    fn config(&self) -> EvalConfig {
        EvalConfig {
            include_direct_object: !self.no_dobj,
            micro: self.micro,
        }
    }

    fn filter(&self, t: GenerationTable) -> GenerationTable {
        GenerationTable {
            cells: t
                .cells
                .into_iter()
                .filter(|c| self.task.is_none_or(|t| t == c.task))
                .filter(|c| self.k.is_none_or(|k| k == c.k))
                .filter(|c| match self.constraint {
                    Constraint::Both => true,
                    Constraint::With => c.constrained,
                    Constraint::Without => !c.constrained,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Constraint {
    With,
    Without,
    Both,
}

#[derive(Subcommand)]
enum EvalCmd {
    /// Recall@K of scored predictions against the dataset graphs.
    Generation {
        dataset: PathBuf,
        predictions: PathBuf,
        #[command(flatten)]
        opts: RecallOpts,
    },
    /// Top-1 and top-5 accuracy. Predictions are parsed pairs or raw
    /// completions, one per ground-truth pair.
    Anticipation {
        ground_truth: PathBuf,
        predictions: PathBuf,
    },
    /// CIDEr, ROUGE-L and BLEU of candidate summaries.
    Summarization {
        references: PathBuf,
        candidates: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Easg,
    Vn,
    Narration,
}

impl Mode {
    fn anticipation(self) -> Result<AnticipationMode> {
        match self {
            Mode::Easg => Ok(AnticipationMode::Easg),
            Mode::Vn => Ok(AnticipationMode::Vn),
            Mode::Narration => Err(anyhow!(Usage("anticipation has no narration mode".into()))),
        }
    }

    fn summary(self) -> SummaryMode {
        match self {
            Mode::Easg => SummaryMode::Easg,
            Mode::Vn => SummaryMode::Vn,
            Mode::Narration => SummaryMode::Narration,
        }
    }
}

#[derive(Args, Clone)]
struct AnticipationArgs {
    dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Easg)]
    mode: Mode,
    /// Input sequence length (5 or 20).
    #[arg(long = "len", short = 'T', default_value_t = 5)]
    len: usize,
    /// Smallest timestep of the last input graph.
    #[arg(long, default_value_t = ANTICIPATION_MIN_END)]
    min_end: u32,
}

#[derive(Args, Clone)]
struct SummarizationArgs {
    dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Easg)]
    mode: Mode,
}

#[derive(Subcommand)]
enum PromptCmd {
    Anticipation(AnticipationArgs),
    Summarization(SummarizationArgs),
}

#[derive(Subcommand)]
enum RunCmd {
    Anticipation {
        #[command(flatten)]
        args: AnticipationArgs,
        #[command(flatten)]
        llm: LlmArgs,
    },
    Summarization {
        #[command(flatten)]
        args: SummarizationArgs,
        #[command(flatten)]
        llm: LlmArgs,
    },
}

#[derive(Args, Clone)]
struct LlmArgs {
    /// Answer from recorded completions (JSON object: user text ->
    /// completion) instead of calling the endpoint.
    #[arg(long)]
    replay: Option<PathBuf>,
}

/// Input that parsed but does not fit the command.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// Exit code for an error, from the first recognised cause.
fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(d) = cause.downcast_ref::<DatasetError>() {
            return match d {
                DatasetError::Invalid(_) => 4,
                _ => 3,
            };
        }
        if cause.is::<serde_json::Error>() || cause.is::<Usage>() {
            return 3;
        }
        if cause.is::<LlmError>() {
            return 5;
        }
        if cause.is::<std::io::Error>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read(path)?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn dataset(path: &Path) -> Result<DatasetFile> {
    load_dataset(&read(path)?).with_context(|| format!("loading {}", path.display()))
}

fn emit<T: Serialize>(json: bool, value: &T, text: impl FnOnce() -> String) -> Result<()> {
    let mut out = std::io::stdout().lock();
    if json {
        serde_json::to_writer_pretty(&mut out, value)?;
        writeln!(out)?;
    } else {
        out.write_all(text().as_bytes())?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<u8> {
    let json = cli.json;
    match &cli.cmd {
        Cmd::Validate { dataset } => validate(json, dataset),
        Cmd::Merge {
            dataset: p,
            clip,
            out,
        } => {
            let mut d = dataset(p)?;
            let ann = d
                .annotations_for(clip)
                .ok_or_else(|| Usage(format!("no annotations for clip {clip:?}")))?;
            let merged = ann.merge().with_context(|| format!("merging {clip}"))?;
            if let Some(out) = out {
                // new graphs need ids consistent with the rest of the clip
                replace_graphs(&mut d, clip, &merged)?;
                let c = d.clip(clip).expect("clip exists after replace");
                let overrides = overrides_of(&d, clip);
                let r = recollect(&c.graphs, &overrides)
                    .with_context(|| format!("recollecting {clip}"))?;
                replace_graphs(&mut d, clip, &r.graph.graphs)?;
                write_dataset(out, &d)?;
            }
            emit(json, &merged, || graphs_text(&merged))?;
            Ok(0)
        }
        Cmd::Recollect {
            dataset: p,
            clip,
            out,
        } => {
            let mut d = dataset(p)?;
            let c = d
                .clip(clip)
                .ok_or_else(|| Usage(format!("no clip {clip:?}")))?;
            let overrides = overrides_of(&d, clip);
            let r =
                recollect(&c.graphs, &overrides).with_context(|| format!("recollecting {clip}"))?;
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(out) = out {
                replace_graphs(&mut d, clip, &r.graph.graphs)?;
                write_dataset(out, &d)?;
            }
            emit(json, &r.graph.graphs, || graphs_text(&r.graph.graphs))?;
            Ok(0)
        }
        Cmd::Stats { dataset: p } => {
            let s = compute_stats(&dataset(p)?);
            emit(json, &s, || render_stats(&s))?;
            Ok(0)
        }
        Cmd::Eval(e) => eval(json, e),
        Cmd::Prompt(PromptCmd::Anticipation(a)) => {
            let ex = anticipation_set(a)?;
            emit(json, &ex, || {
                ex.iter()
                    .map(|e| {
                        format!(
                            "## {} from t={} -> {} {}\n{}\n\n",
                            e.clip_id, e.start, e.target.verb, e.target.noun, e.prompt.user_text
                        )
                    })
                    .collect()
            })?;
            Ok(0)
        }
        Cmd::Prompt(PromptCmd::Summarization(a)) => {
            let items = summary_set(a)?;
            emit(json, &items, || {
                items
                    .iter()
                    .map(|i| format!("## {}\n{}\n\n", i.clip_id, i.prompt.user_text))
                    .collect()
            })?;
            Ok(0)
        }
        Cmd::RunLlm(r) => run_llm(json, r),
        Cmd::RandomBaseline {
            dataset: p,
            seed,
            trials,
            opts,
        } => {
            let d = dataset(p)?;
            let t = random_baseline(&all_graphs(&d), &d.taxonomy, *seed, *trials, &opts.config())?;
            let t = opts.filter(t);
            emit(json, &t, || render_generation(&t))?;
            Ok(0)
        }
    }
}

#[derive(Serialize)]
struct ValidateOutput<'a> {
    valid: bool,
    errors: usize,
    warnings: usize,
    violations: &'a [easg_core::Violation],
}

fn validate(json: bool, path: &Path) -> Result<u8> {
    let d = parse_dataset(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    let report = validate_dataset(&d);
    let out = ValidateOutput {
        valid: report.is_valid(),
        errors: report.errors().count(),
        warnings: report.warnings().count(),
        violations: &report.violations,
    };
    emit(json, &out, || {
        let mut s: String = report.violations.iter().map(|v| format!("{v}\n")).collect();
        s.push_str(&format!(
            "{}: {} error(s), {} warning(s)\n",
            if out.valid { "valid" } else { "invalid" },
            out.errors,
            out.warnings
        ));
        s
    })?;
    Ok(if out.valid { 0 } else { 4 })
}

fn all_graphs(d: &DatasetFile) -> Vec<ActionGraph> {
    d.clips
        .iter()
        .flat_map(|c| c.graphs.iter().cloned())
        .collect()
}

fn graphs_text(graphs: &[ActionGraph]) -> String {
    graphs
        .iter()
        .map(|g| {
            let objects: Vec<String> = g
                .objects()
                .map(|o| format!("{}#{}", o.noun, o.instance_id))
                .collect();
            format!(
                "t={} {} [{}]\n",
                g.timestep,
                g.verb().unwrap_or("?"),
                objects.join(", ")
            )
        })
        .collect()
}

fn overrides_of(d: &DatasetFile, clip: &str) -> CorrespondenceOverride {
    d.annotations_for(clip)
        .map(|a| a.overrides.clone())
        .unwrap_or_default()
}

fn replace_graphs(d: &mut DatasetFile, clip: &str, graphs: &[ActionGraph]) -> Result<()> {
    let c = d
        .clips
        .iter_mut()
        .find(|c| c.clip_id == clip)
        .ok_or_else(|| Usage(format!("no clip {clip:?}")))?;
    for g in graphs {
        match c.graphs.iter_mut().find(|x| x.timestep == g.timestep) {
            Some(slot) => *slot = g.clone(),
            None => c.graphs.push(g.clone()),
        }
    }
    c.graphs.sort_by_key(|g| g.timestep);
    Ok(())
}

fn write_dataset(path: &Path, d: &DatasetFile) -> Result<()> {
    std::fs::write(path, save_dataset(d)).with_context(|| format!("writing {}", path.display()))
}

/// One anticipation prediction: parsed pairs, a bare pair list, or the raw
/// completion text.
#[derive(Deserialize)]
#[serde(untagged)]
enum PredictionInput {
    Parsed(ActionPrediction),
    Pairs(Vec<ActionPair>),
    Completion(String),
}

impl PredictionInput {
    fn into_prediction(self) -> ActionPrediction {
        match self {
            PredictionInput::Parsed(p) => p,
            PredictionInput::Pairs(pairs) => ActionPrediction { pairs },
            PredictionInput::Completion(text) => {
                parse_action_predictions(&text, DEFAULT_PREDICTIONS)
            }
        }
    }
}

/// A reference set: one string or several.
#[derive(Deserialize)]
#[serde(untagged)]
enum References {
    One(String),
    Many(Vec<String>),
}

impl References {
    fn into_vec(self) -> Vec<String> {
        match self {
            References::One(s) => vec![s],
            References::Many(v) => v,
        }
    }
}

fn eval(json: bool, e: &EvalCmd) -> Result<u8> {
    match e {
        EvalCmd::Generation {
            dataset: p,
            predictions,
            opts,
        } => {
            let d = dataset(p)?;
            let preds: PredictionSet = read_json(predictions)?;
            let t = evaluate_generation(&preds, &all_graphs(&d), &opts.config(), &d.taxonomy)
                .map_err(|e| Usage(e.to_string()))?;
            let t = opts.filter(t);
            emit(json, &t, || render_generation(&t))?;
        }
        EvalCmd::Anticipation {
            ground_truth,
            predictions,
        } => {
            let gt: Vec<ActionPair> = read_json(ground_truth)?;
            let preds: Vec<PredictionInput> = read_json(predictions)?;
            if gt.len() != preds.len() {
                bail!(Usage(format!(
                    "{} ground-truth pairs but {} predictions",
                    gt.len(),
                    preds.len()
                )));
            }
            let cases: Vec<_> = preds
                .into_iter()
                .map(PredictionInput::into_prediction)
                .zip(gt)
                .collect();
            let r = evaluate_anticipation(&cases);
            emit(json, &r, || render_anticipation(&r))?;
        }
        EvalCmd::Summarization {
            references,
            candidates,
        } => {
            let refs: Vec<References> = read_json(references)?;
            let cands: Vec<String> = read_json(candidates)?;
            if refs.len() != cands.len() {
                bail!(Usage(format!(
                    "{} reference sets but {} candidates",
                    refs.len(),
                    cands.len()
                )));
            }
            let refs: Vec<Vec<String>> = refs.into_iter().map(References::into_vec).collect();
            let s = summary_scores(&cands, &refs);
            emit(json, &s, || render_summary(&s))?;
        }
    }
    Ok(0)
}

fn anticipation_set(a: &AnticipationArgs) -> Result<Vec<AnticipationExample>> {
    let d = dataset(&a.dataset)?;
    let mode = a.mode.anticipation()?;
    let mut out = Vec::new();
    for c in &d.clips {
        out.extend(
            anticipation_examples(&c.clip_id, &c.graphs, a.len, mode, a.min_end)
                .map_err(|e| Usage(e.to_string()))?,
        );
    }
    Ok(out)
}

#[derive(Serialize)]
struct SummaryItem {
    clip_id: String,
    prompt: Prompt,
    reference: String,
}

/// Prompts for clips that have a reference summary and a long enough input.
fn summary_set(a: &SummarizationArgs) -> Result<Vec<SummaryItem>> {
    let d = dataset(&a.dataset)?;
    let mut out = Vec::new();
    for c in &d.clips {
        let Some(reference) = &c.summary else {
            continue;
        };
        match clip_summary_prompt(c, a.mode.summary()) {
            Ok(prompt) => out.push(SummaryItem {
                clip_id: c.clip_id.clone(),
                prompt,
                reference: reference.clone(),
            }),
            Err(e) => eprintln!("skipping {}: {e}", c.clip_id),
        }
    }
    Ok(out)
}

fn client(llm: &LlmArgs) -> Result<LlmClient> {
    let cfg = ServiceConfig::from_env()?.llm;
    if let Some(path) = &llm.replay {
        let recorded: HashMap<String, String> = read_json(path)?;
        return Ok(LlmClient::new(
            Box::new(MockTransport::recorded(recorded)),
            cfg,
        ));
    }
    let transport =
        HttpTransport::new(&cfg).map_err(|e| anyhow!("{e}; set EASG_LLM_URL or pass --replay"))?;
    Ok(LlmClient::new(Box::new(transport), cfg))
}

#[derive(Serialize)]
struct AnticipationRun {
    clip_id: String,
    start: u32,
    target: ActionPair,
    completion: String,
    predictions: ActionPrediction,
}

#[derive(Serialize)]
struct AnticipationRunOutput {
    runs: Vec<AnticipationRun>,
    report: easg_core::eval::AnticipationReport,
}

#[derive(Serialize)]
struct SummaryRun {
    clip_id: String,
    summary: String,
    reference: String,
}

#[derive(Serialize)]
struct SummaryRunOutput {
    runs: Vec<SummaryRun>,
    scores: easg_core::eval::SummaryScores,
}

fn run_llm(json: bool, r: &RunCmd) -> Result<u8> {
    let rt = tokio::runtime::Builder::new_current_thread()
        .enable_time()
        .enable_io()
        .build()?;
    match r {
        RunCmd::Anticipation { args, llm } => {
            let examples = anticipation_set(args)?;
            let client = client(llm)?;
            let mut runs = Vec::new();
            for e in examples {
                let c = rt
                    .block_on(client.complete(&e.prompt))
                    .with_context(|| format!("{} from t={}", e.clip_id, e.start))?;
                runs.push(AnticipationRun {
                    predictions: parse_action_predictions(&c.text, DEFAULT_PREDICTIONS),
                    clip_id: e.clip_id,
                    start: e.start,
                    target: e.target,
                    completion: c.text,
                });
            }
            let cases: Vec<_> = runs
                .iter()
                .map(|r| (r.predictions.clone(), r.target.clone()))
                .collect();
            let out = AnticipationRunOutput {
                report: evaluate_anticipation(&cases),
                runs,
            };
            emit(json, &out, || render_anticipation(&out.report))?;
        }
        RunCmd::Summarization { args, llm } => {
            let items = summary_set(args)?;
            let client = client(llm)?;
            let mut runs = Vec::new();
            for i in items {
                let c = rt
                    .block_on(client.complete(&i.prompt))
                    .with_context(|| i.clip_id.clone())?;
                runs.push(SummaryRun {
                    clip_id: i.clip_id,
                    summary: c.text.trim().to_string(),
                    reference: i.reference,
                });
            }
            let cands: Vec<&str> = runs.iter().map(|r| r.summary.as_str()).collect();
            let refs: Vec<Vec<&str>> = runs.iter().map(|r| vec![r.reference.as_str()]).collect();
            let out = SummaryRunOutput {
                scores: summary_scores(&cands, &refs),
                runs,
            };
            emit(json, &out, || render_summary(&out.scores))?;
        }
    }
    Ok(0)
}
