use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Named slot bindings that outlive the utterance that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextFrame {
    pub name: String,
    pub bindings: Map<String, Value>,
    /// User turns left before the frame is dropped. Always >= 1 while live.
    pub lifespan_remaining: u32,
}

/// A session's live context frames, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextStack {
    frames: Vec<ContextFrame>,
    default_lifespan: u32,
}

impl ContextStack {
    pub fn new(default_lifespan: u32) -> Self {
        ContextStack {
            frames: Vec::new(),
            default_lifespan: default_lifespan.max(1),
        }
    }

    pub fn default_lifespan(&self) -> u32 {
        self.default_lifespan
    }

    pub fn frames(&self) -> &[ContextFrame] {
        &self.frames
    }

    pub fn is_live(&self, name: &str) -> bool {
        self.frames.iter().any(|f| f.name == name)
    }

    /// Pushes a frame, replacing any live frame of the same name. A zero
    /// lifespan means "use the default".
    pub fn push(&mut self, mut frame: ContextFrame) {
        if frame.lifespan_remaining == 0 {
            frame.lifespan_remaining = self.default_lifespan;
        }
        self.frames.retain(|f| f.name != frame.name);
        self.frames.push(frame);
    }

    /// Most recently pushed binding for `slot`, with the owning frame name.
    pub fn lookup(&self, slot: &str) -> Option<(&str, &Value)> {
        self.frames
            .iter()
            .rev()
            .find_map(|f| f.bindings.get(slot).map(|v| (f.name.as_str(), v)))
    }

    /// End-of-turn decay. Frames named in `consumed` get their lifespan reset
    /// to the default; every other frame loses one turn and is dropped at 0.
    pub fn decay(&mut self, consumed: &BTreeSet<String>) {
        let reset = self.default_lifespan;
        self.frames.retain_mut(|f| {
            if consumed.contains(&f.name) {
                f.lifespan_remaining = reset;
                true
            } else {
                f.lifespan_remaining = f.lifespan_remaining.saturating_sub(1);
                f.lifespan_remaining > 0
            }
        });
    }

    /// Full turn bookkeeping: decay, then apply this turn's pushes.
    pub fn end_turn(&mut self, consumed: &BTreeSet<String>, pushes: Vec<ContextFrame>) {
        self.decay(consumed);
        for frame in pushes {
            self.push(frame);
        }
    }
}

impl ContextFrame {
    pub fn single(name: &str, slot: &str, value: Value) -> Self {
        let mut bindings = Map::new();
        bindings.insert(slot.to_string(), value);
        ContextFrame {
            name: name.to_string(),
            bindings,
            lifespan_remaining: 0,
        }
    }
}
