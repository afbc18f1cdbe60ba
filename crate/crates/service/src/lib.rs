//! Annotation backend for egocentric action scene graphs.
//!
//! Annotators claim refinement tasks (one per seeded timestep), submit
//! refined graphs, and answer the validation questions raised when the three
//! refinements disagree. Completed clips are merged and recollected on
//! request. All writes go through an append-only event log; see [`store`].
//!
//! The crate also holds the chat-completion client used to run the
//! anticipation and summarization experiments, see [`llm`].

pub mod clock;
pub mod config;
pub mod error;
pub mod http;
pub mod llm;
pub mod state;
pub mod store;

pub use clock::{Clock, ManualClock, SystemClock};
pub use config::{ConfigError, LlmConfig, ServiceConfig};
pub use error::ServiceError;
pub use http::{router, ClaimRequest, SubmitRequest};
pub use llm::{
    ChatRequest, ChatTransport, HttpTransport, LlmClient, MockTransport, TransportError,
};
pub use state::{Event, EventKind, State, TaskKind, TaskRecord, TaskResponse, TaskState};
pub use store::{replay, Service};
