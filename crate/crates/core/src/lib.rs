//! Egocentric action scene graphs.
//!
//! A scene graph describes one camera-wearer action per timestep: a fixed
//! camera-wearer node, a verb node, and the object nodes taking part in the
//! action, each grounded with boxes in the PRE / PNR / POST frames. A clip is
//! a sequence of such graphs whose object instance ids are kept consistent
//! over time.
//!
//! The crate is organised around the life cycle of the data:
//!
//! - [`model`], [`graph`] and [`validate`]: the graph types, construction
//!   and refinement operations, and invariant checking.
//! - [`consensus`]: merging three annotator graphs through validation
//!   questions.
//! - [`temporal`]: turning per-timestep graphs into a dynamic graph.
//! - [`formats`]: the dataset file, triplet and sentence text forms, LLM
//!   prompts and completion parsing.
//! - [`eval`]: Recall@K for graph generation, anticipation accuracy, text
//!   metrics and dataset statistics.

pub mod consensus;
pub mod eval;
pub mod formats;
pub mod graph;
pub mod model;
pub mod taxonomy;
pub mod temporal;
pub mod validate;

pub use graph::{add_object_node, canonicalize, direct_objects, init_graph, ModelError};
pub use model::{
    ActionGraph, BBox, Edge, FrameRef, FrameSlot, FrameTriplet, Grounding, Node, NodeRef,
    ObjectNode, Provenance, SeedAnnotation,
};
pub use taxonomy::{LabelKind, Taxonomy, TaxonomyError};
pub use validate::{
    validate_graph, validate_graph_against, Severity, ValidationReport, Violation, ViolationCode,
};
