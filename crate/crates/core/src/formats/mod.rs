//! Text and file formats: the dataset JSON document, triplet strings,
//! sentences, LLM prompts and completion parsing.

pub mod completion;
pub mod dataset;
pub mod prompt;
pub mod sentence;
pub mod triplet;

pub use completion::{parse_action_predictions, ActionPair, ActionPrediction};
pub use dataset::{
    load_dataset, parse_dataset, save_dataset, validate_dataset, ClipAnnotations, ClipRecord,
    DataSplit, DatasetError, DatasetFile, MergeClipError, TimestepAnnotations, SCHEMA_VERSION,
};
pub use prompt::{
    action_of, anticipation_examples, build_anticipation_prompt, build_summarization_prompt,
    clip_summary_prompt, AnticipationExample, AnticipationMode, OutputKind, Prompt, PromptError,
    SummaryInput, SummaryMode, ANTICIPATION_MIN_END,
};
pub use sentence::{to_sentence, to_sentence_with};
pub use triplet::{
    parse_triplet_string, to_triplet_string, ParsedGraph, SubjectToken, TripletParseError,
    UnknownLabel,
};
