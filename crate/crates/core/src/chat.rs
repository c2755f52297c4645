use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

pub type Conversation = Vec<ChatMessage>;

/// Checks that `messages` is non-empty and alternates user/assistant starting
/// with the user. Only the final assistant turn may be empty.
pub fn validate_conversation(messages: &[ChatMessage]) -> Result<()> {
    if messages.is_empty() {
        return Err(Error::Protocol("conversation is empty".into()));
    }
    for (i, message) in messages.iter().enumerate() {
        let expected = if i % 2 == 0 { Role::User } else { Role::Assistant };
        if message.role != expected {
            return Err(Error::Protocol(format!(
                "message {i} has role {:?}, expected {:?}",
                message.role, expected
            )));
        }
        let last = i + 1 == messages.len();
        if message.content.is_empty() && !(last && message.role == Role::Assistant) {
            return Err(Error::Protocol(format!("message {i} is empty")));
        }
    }
    Ok(())
}
