use serde::{Deserialize, Serialize};

use crate::fabric::ConfigField;
use crate::monitor::AlertEvent;
use crate::nlu::{Clarification, ContextStack, ReplyTracker};

/// How masked input appears in logs and over every interface.
pub const MASK: &str = "*****";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Author {
    User,
    Bot,
    Operator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub author: Author,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<String>>,
    pub masked: bool,
    pub cursor: u64,
}

/// The one thing a session is waiting on, if anything.
#[derive(Debug, Clone, Default)]
pub enum Pending {
    #[default]
    None,
    Clarification {
        clarification: Clarification,
        tracker: ReplyTracker,
    },
    WizardSelect {
        /// (serial, friendly name) in registry order.
        devices: Vec<(String, String)>,
        tracker: ReplyTracker,
    },
    WizardField {
        serial: String,
        name: String,
        fields: Vec<ConfigField>,
        index: usize,
    },
    EscalationPrompt {
        alert: AlertEvent,
        reprompted: bool,
    },
}

impl Pending {
    pub fn is_none(&self) -> bool {
        matches!(self, Pending::None)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Pending::None => "none",
            Pending::Clarification { .. } => "clarification",
            Pending::WizardSelect { .. } | Pending::WizardField { .. } => "wizard_step",
            Pending::EscalationPrompt { .. } => "escalation_prompt",
        }
    }

    /// True when the next user reply is a secret.
    pub fn expects_masked(&self) -> bool {
        matches!(self, Pending::WizardField { fields, index, .. } if fields.get(*index).is_some_and(|f| f.masked))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Mode {
    Bot,
    /// Waiting in the operator queue (`operator` is `None`) or held.
    HumanOperator {
        operator: Option<String>,
    },
}

#[derive(Debug)]
pub struct Session {
    pub session_id: String,
    pub principal: String,
    pub contexts: ContextStack,
    pub pending: Pending,
    pub mode: Mode,
    pub turns: u64,
    pub escalated_at: Option<u64>,
    pub deferred_alerts: Vec<AlertEvent>,
    log: Vec<ChatMessage>,
}

impl Session {
    pub fn new(session_id: String, principal: String, contexts: ContextStack) -> Self {
        Session {
            session_id,
            principal,
            contexts,
            pending: Pending::None,
            mode: Mode::Bot,
            turns: 0,
            escalated_at: None,
            deferred_alerts: Vec::new(),
            log: Vec::new(),
        }
    }

    /// Appends to the log; cursors are 1-based and gap-free.
    pub fn push(
        &mut self,
        author: Author,
        text: &str,
        options: Option<Vec<String>>,
        masked: bool,
    ) -> ChatMessage {
        let msg = ChatMessage {
            author,
            text: if masked {
                MASK.to_string()
            } else {
                text.to_string()
            },
            options,
            masked,
            cursor: self.log.len() as u64 + 1,
        };
        self.log.push(msg.clone());
        msg
    }

    pub fn bot(&mut self, text: &str) -> ChatMessage {
        self.push(Author::Bot, text, None, false)
    }

    pub fn log(&self) -> &[ChatMessage] {
        &self.log
    }

    /// Messages with cursor greater than `cursor`.
    pub fn since(&self, cursor: u64) -> &[ChatMessage] {
        let start = (cursor as usize).min(self.log.len());
        &self.log[start..]
    }

    pub fn held_by(&self, operator: &str) -> bool {
        matches!(&self.mode, Mode::HumanOperator { operator: Some(op) } if op == operator)
    }

    pub fn last_user_text(&self) -> Option<&str> {
        self.log
            .iter()
            .rev()
            .find(|m| m.author == Author::User)
            .map(|m| m.text.as_str())
    }
}
