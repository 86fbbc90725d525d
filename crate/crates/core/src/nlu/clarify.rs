use serde::{Deserialize, Serialize};

use super::normalize::{is_integer, normalize};

/// Consecutive unusable replies after which a clarification is dropped.
pub const MAX_CLARIFY_FAILURES: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplyInterpretation {
    /// Indices into the option list, in option order.
    Selected(Vec<usize>),
    Reprompt,
}

/// Reads a reply to an enumerated question: a 1-based index, an option name
/// (case-insensitive, optional leading "the"), or "both"/"all".
pub fn interpret_clarification_reply(reply: &str, options: &[String]) -> ReplyInterpretation {
    let mut tokens = normalize(reply);
    if tokens.first().is_some_and(|t| t == "the") && tokens.len() > 1 {
        tokens.remove(0);
    }
    if tokens.len() == 1 {
        let tok = tokens[0].as_str();
        if tok == "both" || tok == "all" {
            return ReplyInterpretation::Selected((0..options.len()).collect());
        }
        if is_integer(tok) {
            return match tok.parse::<usize>() {
                Ok(n) if (1..=options.len()).contains(&n) => {
                    ReplyInterpretation::Selected(vec![n - 1])
                }
                _ => ReplyInterpretation::Reprompt,
            };
        }
    }
    if tokens.is_empty() {
        return ReplyInterpretation::Reprompt;
    }
    options
        .iter()
        .position(|opt| normalize(opt) == tokens)
        .map(|i| ReplyInterpretation::Selected(vec![i]))
        .unwrap_or(ReplyInterpretation::Reprompt)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplyOutcome {
    Selected(Vec<usize>),
    Reprompt,
    Abandoned,
}

/// Failure counter wrapped around [`interpret_clarification_reply`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplyTracker {
    pub failures: u32,
}

impl ReplyTracker {
    pub fn reply(&mut self, reply: &str, options: &[String]) -> ReplyOutcome {
        match interpret_clarification_reply(reply, options) {
            ReplyInterpretation::Selected(sel) => {
                self.failures = 0;
                ReplyOutcome::Selected(sel)
            }
            ReplyInterpretation::Reprompt => self.fail(),
        }
    }

    /// Records a failure that the caller detected itself.
    pub fn fail(&mut self) -> ReplyOutcome {
        self.failures += 1;
        if self.failures >= MAX_CLARIFY_FAILURES {
            ReplyOutcome::Abandoned
        } else {
            ReplyOutcome::Reprompt
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn both_selects_everything() {
        assert_eq!(
            interpret_clarification_reply("Both", &opts(&["Lamp", "Table Light"])),
            ReplyInterpretation::Selected(vec![0, 1])
        );
    }

    #[test]
    fn numeric_and_named_replies() {
        let menu = opts(&["Smart Lock", "Smart Kettle", "Smart light"]);
        assert_eq!(
            interpret_clarification_reply("1", &menu),
            ReplyInterpretation::Selected(vec![0])
        );
        assert_eq!(
            interpret_clarification_reply("smart LIGHT", &menu),
            ReplyInterpretation::Selected(vec![2])
        );
        assert_eq!(
            interpret_clarification_reply("The Smart Kettle.", &menu),
            ReplyInterpretation::Selected(vec![1])
        );
        assert_eq!(
            interpret_clarification_reply("7", &opts(&["a", "b"])),
            ReplyInterpretation::Reprompt
        );
        assert_eq!(
            interpret_clarification_reply("0", &opts(&["a", "b"])),
            ReplyInterpretation::Reprompt
        );
        assert_eq!(
            interpret_clarification_reply("", &opts(&["a", "b"])),
            ReplyInterpretation::Reprompt
        );
    }

    #[test]
    fn third_failure_abandons() {
        let o = opts(&["a", "b"]);
        let mut t = ReplyTracker::default();
        assert_eq!(t.reply("x", &o), ReplyOutcome::Reprompt);
        assert_eq!(t.reply("y", &o), ReplyOutcome::Reprompt);
        assert_eq!(t.reply("z", &o), ReplyOutcome::Abandoned);
    }

    #[test]
    fn success_resets_the_count() {
        let o = opts(&["a", "b"]);
        let mut t = ReplyTracker::default();
        t.reply("x", &o);
        t.reply("x", &o);
        assert_eq!(t.reply("2", &o), ReplyOutcome::Selected(vec![1]));
        assert_eq!(t.failures, 0);
    }
}
