#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use easg_core::consensus::AnnotatorGraph;
use easg_core::formats::DataSplit;
use easg_core::ActionGraph;
use easg_service::store::SeedBatch;
use easg_service::{LlmClient, LlmConfig, ManualClock, Service, ServiceConfig};
use easg_testkit::fixtures::{disagreement_inputs, graph, seed_of};

pub const T0: u64 = 1_700_000_000_000;
pub const CLIP: &str = "kitchen-01";

pub fn config(dir: &Path) -> ServiceConfig {
    ServiceConfig::new(dir)
}

pub fn quick_llm() -> LlmConfig {
    LlmConfig {
        initial_backoff: Duration::from_millis(1),
        max_backoff: Duration::from_millis(5),
        max_retries: 2,
        ..LlmConfig::default()
    }
}

pub fn open(dir: &Path, clock: Arc<ManualClock>, llm: Option<LlmClient>) -> Service {
    Service::open_with(config(dir), clock, llm).expect("open service")
}

/// Timestep 1: the three disagreeing refinements.
pub fn disagreeing() -> Vec<AnnotatorGraph> {
    disagreement_inputs(CLIP, 1)
}

/// Timestep 2: one graph all three annotators submit unchanged.
pub fn unanimous() -> ActionGraph {
    graph(
        "CW - verb - put; put - direct object - bowl; put - on - table; put - with - right hand",
        CLIP,
        2,
        10.0,
    )
}

pub fn seeds() -> SeedBatch {
    SeedBatch {
        clip_id: CLIP.into(),
        scenario: "Cooking".into(),
        split: DataSplit::Train,
        seeds: vec![seed_of(&disagreeing()[0].graph), seed_of(&unanimous())],
    }
}

/// The refinement annotator `ann` submits for `timestep`.
pub fn refinement(ann: &str, timestep: u32) -> ActionGraph {
    match timestep {
        1 => {
            disagreeing()
                .into_iter()
                .find(|a| a.annotator_id == ann)
                .expect("known annotator")
                .graph
        }
        _ => unanimous(),
    }
}

pub const ANNOTATORS: [&str; 3] = ["ann-1", "ann-2", "ann-3"];
