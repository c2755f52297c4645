//! Interaction logging, the amplification-ratio metric, replay, and export
//! of shown-versus-taken feedback data.

pub mod event;
mod export;
mod log;
mod metrics;
mod replay;

pub use event::{EventKind, InteractionEvent, LoggedToken};
pub use export::{export_feedback, ChosenAction, FeedbackDataset, FeedbackHeader, FeedbackRecord, FEEDBACK_SCHEMA};
pub use log::{now_ms, Ack, EventLog, LogHeader, LOG_SCHEMA, LOG_VERSION};
pub use metrics::{amplification_ratio, surprisal_bits, ActionBits, ActionKind, AmplificationReport};
pub use replay::{replay, ReplayOutcome};
