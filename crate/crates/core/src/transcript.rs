//! Golden transcript format and replay.
//!
//! One directive per line: `U: <text>` user turn, `B: <text>` expected bot
//! line, `O: <text>` operator message, `A: <serial> offline <hours>` outage,
//! `T: <seconds>` clock advance, `#` comment. Blank lines are ignored.

use std::collections::VecDeque;
use std::path::Path;

use crate::gateway::{Author, Gateway, GatewayError};

/// Operator identity used for `O:` lines.
pub const REPLAY_OPERATOR: &str = "operator";

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    User(String),
    Bot(String),
    Operator(String),
    Offline { serial: String, hours: f64 },
    Advance(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub number: usize,
    pub step: Step,
}

#[derive(Debug, thiserror::Error)]
pub enum TranscriptError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("cannot read transcript: {0}")]
    Io(#[from] std::io::Error),
}

pub fn parse(text: &str) -> Result<Vec<Line>, TranscriptError> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let number = i + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let syntax = |message: String| TranscriptError::Syntax {
            line: number,
            message,
        };
        let (tag, body) = raw
            .split_once(": ")
            .or_else(|| raw.strip_suffix(':').map(|t| (t, "")))
            .ok_or_else(|| syntax(format!("expected `<tag>: <text>`, got {raw:?}")))?;
        let step = match tag {
            "U" => Step::User(body.to_string()),
            "B" => Step::Bot(body.to_string()),
            "O" => Step::Operator(body.to_string()),
            "T" => Step::Advance(
                body.trim()
                    .parse()
                    .map_err(|_| syntax(format!("bad clock advance {body:?}")))?,
            ),
            "A" => {
                let parts: Vec<&str> = body.split_whitespace().collect();
                match parts.as_slice() {
                    [serial, "offline", hours] => Step::Offline {
                        serial: serial.to_string(),
                        hours: hours
                            .parse()
                            .ok()
                            .filter(|h: &f64| h.is_finite() && *h > 0.0)
                            .ok_or_else(|| syntax(format!("bad hours {hours:?}")))?,
                    },
                    _ => {
                        return Err(syntax(format!(
                            "expected `A: <serial> offline <hours>`, got {body:?}"
                        )))
                    }
                }
            }
            other => return Err(syntax(format!("unknown tag {other:?}"))),
        };
        lines.push(Line { number, step });
    }
    Ok(lines)
}

pub fn parse_file(path: impl AsRef<Path>) -> Result<Vec<Line>, TranscriptError> {
    parse(&std::fs::read_to_string(path)?)
}

/// Why a replay did not match.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    /// A `B:` line differs from what the bot said.
    Mismatch {
        line: usize,
        expected: String,
        actual: String,
    },
    /// A `B:` line with no bot output left to match.
    Missing { line: usize, expected: String },
    /// The bot said something the transcript does not list.
    Unexpected { line: usize, actual: String },
    /// A directive the gateway rejected.
    Rejected { line: usize, error: String },
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Mismatch {
                line,
                expected,
                actual,
            } => {
                write!(f, "line {line}: expected {expected:?}, bot said {actual:?}")
            }
            Failure::Missing { line, expected } => {
                write!(f, "line {line}: expected {expected:?}, bot said nothing")
            }
            Failure::Unexpected { line, actual } => {
                write!(f, "before line {line}: unexpected bot line {actual:?}")
            }
            Failure::Rejected { line, error } => write!(f, "line {line}: {error}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReplayOutcome {
    pub bot_lines_checked: usize,
    pub failure: Option<Failure>,
}

impl ReplayOutcome {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Replays `lines` against `gateway` in a fresh session for `principal`.
pub fn replay(
    gateway: &Gateway,
    principal: &str,
    lines: &[Line],
) -> Result<ReplayOutcome, GatewayError> {
    let session = gateway.open_session(principal)?;
    let mut cursor = 0u64;
    let mut said: VecDeque<String> = VecDeque::new();
    let mut outcome = ReplayOutcome::default();

    let collect = |said: &mut VecDeque<String>, cursor: &mut u64| -> Result<(), GatewayError> {
        for msg in gateway.messages_since(&session, *cursor)? {
            *cursor = msg.cursor;
            if msg.author == Author::Bot {
                said.push_back(msg.text);
            }
        }
        Ok(())
    };
    collect(&mut said, &mut cursor)?;

    for line in lines {
        let fail = |failure: Failure| ReplayOutcome {
            failure: Some(failure),
            ..outcome.clone()
        };
        if let Step::Bot(expected) = &line.step {
            match said.pop_front() {
                Some(actual) if &actual == expected => outcome.bot_lines_checked += 1,
                Some(actual) => {
                    return Ok(fail(Failure::Mismatch {
                        line: line.number,
                        expected: expected.clone(),
                        actual,
                    }))
                }
                None => {
                    return Ok(fail(Failure::Missing {
                        line: line.number,
                        expected: expected.clone(),
                    }))
                }
            }
            continue;
        }
        if let Some(actual) = said.pop_front() {
            return Ok(fail(Failure::Unexpected {
                line: line.number,
                actual,
            }));
        }
        let result = match &line.step {
            Step::User(text) => gateway.handle_utterance(&session, text).map(drop),
            Step::Operator(text) => operator_line(gateway, &session, text),
            Step::Offline { serial, hours } => gateway.set_offline(serial, *hours),
            Step::Advance(seconds) => {
                gateway.advance_clock(*seconds);
                Ok(())
            }
            Step::Bot(_) => unreachable!(),
        };
        if let Err(err) = result {
            return Ok(fail(Failure::Rejected {
                line: line.number,
                error: format!("{} ({})", err, err.code()),
            }));
        }
        collect(&mut said, &mut cursor)?;
    }
    if let Some(actual) = said.pop_front() {
        let line = lines.last().map_or(0, |l| l.number + 1);
        outcome.failure = Some(Failure::Unexpected { line, actual });
    }
    Ok(outcome)
}

fn operator_line(gateway: &Gateway, session: &str, text: &str) -> Result<(), GatewayError> {
    if gateway
        .operator_queue()
        .iter()
        .any(|q| q.session_id == session)
    {
        gateway.take_over(REPLAY_OPERATOR, session)?;
    }
    gateway
        .operator_send(REPLAY_OPERATOR, session, text)
        .map(drop)
}
