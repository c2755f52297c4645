//! Interaction-required co-writing engine.
//!
//! Two ways of writing with a language model where the person stays in the
//! loop for every step:
//!
//! * [`predictive`]: the user types the assistant's reply with top-k
//!   predictive-text buttons (each showing a short greedy preview) or by
//!   typing freely.
//! * [`highlight`]: the model scores the user's own document and marks the
//!   tokens where it would have chosen differently, with a one-token
//!   alternative available on every word.
//!
//! Interactions are logged ([`feedback`]) so sessions can be replayed, scored
//! with the amplification ratio, and exported as shown-versus-taken feedback
//! data. [`service`] exposes everything over HTTP, and [`cli`] backs the
//! `cowrite` binary.

pub mod backend;
pub mod chat;
pub mod cli;
mod error;
pub mod feedback;
pub mod highlight;
pub mod predictive;
pub mod samples;
mod serde_ext;
pub mod service;

pub use backend::{Backend, MockBackend, TokenId};
pub use chat::{ChatMessage, Conversation, Role};
pub use error::{Error, Result};
pub use feedback::{AmplificationReport, EventLog};
pub use highlight::{HighlightEngine, HighlightReport, HighlightSpan};
pub use predictive::{Session, SessionConfig, Suggestion};
