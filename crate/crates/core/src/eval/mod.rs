//! Evaluation: graph generation recall, anticipation accuracy, summary text
//! metrics, the random baseline and dataset statistics.

pub mod anticipation;
pub mod baseline;
pub mod generation;
pub mod nlg;
pub mod report;
pub mod stats;

pub use anticipation::{
    anticipation_topk, evaluate_anticipation, Accuracy, AnticipationReport, TopKHits,
};
pub use baseline::{random_baseline, random_baseline_with, random_predictions};
pub use generation::{
    apply_constraint, constrain_graph, dataset_recalls, evaluate_generation, graph_recalls,
    gt_triplets, ranked_candidates, recall_at_k, Candidate, EvalConfig, EvalError, GenerationCell,
    GenerationTable, GraphPredictions, GtTriplet, LabelScore, PairPrediction, PredictionSet,
    Recall, Slot, Task, KS,
};
pub use nlg::{
    bleu, cider, corpus_bleu, rouge_l, rouge_n, summary_scores, tokenize, CiderScore, SummaryScores,
};
pub use stats::{compute_stats, StatsReport};
