use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::context::ContextStack;
use super::entities::EntityMatch;
use super::lexicon::EntityType;
use super::NluError;

/// One element of an intent trigger pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternElement {
    Literal(String),
    /// `@type` or `@type=Value`; the value constrains the entity's primary
    /// attribute (case-insensitive).
    Wildcard {
        entity_type: EntityType,
        value: Option<String>,
    },
}

impl PatternElement {
    fn parse(raw: &str) -> Result<Self, NluError> {
        if let Some(rest) = raw.strip_prefix('@') {
            let (ty, value) = match rest.split_once('=') {
                Some((ty, v)) => (ty, Some(v.replace('_', " "))),
                None => (rest, None),
            };
            let entity_type =
                EntityType::parse(ty).ok_or_else(|| NluError::InvalidPattern(raw.to_string()))?;
            return Ok(PatternElement::Wildcard { entity_type, value });
        }
        if raw.is_empty()
            || raw
                .chars()
                .any(|c| !(c.is_alphanumeric() || c == '.') || c.is_uppercase())
        {
            return Err(NluError::InvalidPattern(raw.to_string()));
        }
        Ok(PatternElement::Literal(raw.to_string()))
    }

    pub fn matches(&self, item: &Item<'_>) -> bool {
        match (self, item) {
            (PatternElement::Literal(lit), Item::Token(tok)) => lit == tok,
            (PatternElement::Wildcard { entity_type, value }, Item::Entity(ent)) => {
                ent.entity_type == *entity_type
                    && value.as_ref().is_none_or(|want| {
                        ent.primary_value()
                            .map(value_text)
                            .is_some_and(|got| got.eq_ignore_ascii_case(want))
                    })
            }
            _ => false,
        }
    }
}

/// Renders a scalar as plain text (strings unquoted).
pub fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// A trigger pattern plus parameters it fixes when it is the winning pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub elements: Vec<PatternElement>,
    pub fixed_params: Map<String, Value>,
}

/// A slot an intent may fill from entities or live contexts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotDef {
    pub name: String,
    pub entity_type: EntityType,
    #[serde(default)]
    pub required: bool,
    /// Attribute read from the entity; defaults to its primary attribute.
    #[serde(default)]
    pub attribute: Option<String>,
    /// Context frame pushed when the slot is filled from an entity.
    #[serde(default)]
    pub context: Option<String>,
}

/// Serialized pattern: plain text, or text with fixed parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PatternSpec {
    Text(String),
    WithParams {
        text: String,
        #[serde(default)]
        params: Map<String, Value>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContextBoost {
    pub context: String,
    pub bonus: u32,
}

/// Serialized shape of an intent in the configuration document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntentSpec {
    pub name: String,
    pub action: String,
    pub patterns: Vec<PatternSpec>,
    #[serde(default)]
    pub slots: Vec<SlotDef>,
    /// The action's parameter schema.
    #[serde(default)]
    pub parameters: Vec<String>,
    #[serde(default)]
    pub context_boosts: Vec<ContextBoost>,
    /// Device kind targeted when no iot entity names one.
    #[serde(default)]
    pub device_kind: Option<String>,
    /// Clarification question; `{choices}` and `{kind}` are substituted.
    #[serde(default)]
    pub clarify: Option<String>,
    /// Example phrase shown by help.
    #[serde(default)]
    pub example: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntentDef {
    pub name: String,
    pub action_name: String,
    pub trigger_patterns: Vec<Pattern>,
    pub slots: Vec<SlotDef>,
    pub parameters: Vec<String>,
    pub context_boosts: Vec<(String, u32)>,
    pub device_kind: Option<String>,
    pub clarify: Option<String>,
    pub example: Option<String>,
}

impl IntentDef {
    pub fn from_spec(spec: &IntentSpec) -> Result<Self, NluError> {
        let trigger_patterns = spec
            .patterns
            .iter()
            .map(|p| {
                let (text, params) = match p {
                    PatternSpec::Text(t) => (t, Map::new()),
                    PatternSpec::WithParams { text, params } => (text, params.clone()),
                };
                let elements = text
                    .split_whitespace()
                    .map(PatternElement::parse)
                    .collect::<Result<Vec<_>, _>>()?;
                if elements.is_empty() {
                    return Err(NluError::InvalidPattern(text.clone()));
                }
                Ok(Pattern {
                    elements,
                    fixed_params: params,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if trigger_patterns.is_empty() {
            return Err(NluError::NoPatterns(spec.name.clone()));
        }
        for slot in spec.slots.iter().filter(|s| s.required) {
            if !spec.parameters.contains(&slot.name) {
                return Err(NluError::UnknownSlot {
                    intent: spec.name.clone(),
                    slot: slot.name.clone(),
                });
            }
        }
        Ok(IntentDef {
            name: spec.name.clone(),
            action_name: spec.action.clone(),
            trigger_patterns,
            slots: spec.slots.clone(),
            parameters: spec.parameters.clone(),
            context_boosts: spec
                .context_boosts
                .iter()
                .map(|b| (b.context.clone(), b.bonus))
                .collect(),
            device_kind: spec.device_kind.clone(),
            clarify: spec.clarify.clone(),
            example: spec.example.clone(),
        })
    }

    pub fn required_slots(&self) -> impl Iterator<Item = &SlotDef> {
        self.slots.iter().filter(|s| s.required)
    }
}

/// Validates a full intent set, rejecting duplicate names.
pub fn build_intents(specs: &[IntentSpec]) -> Result<Vec<IntentDef>, NluError> {
    let mut seen = std::collections::BTreeSet::new();
    specs
        .iter()
        .map(|s| {
            if !seen.insert(s.name.as_str()) {
                return Err(NluError::DuplicateIntent(s.name.clone()));
            }
            IntentDef::from_spec(s)
        })
        .collect()
}

/// A token or an extracted entity, in utterance order.
#[derive(Debug, Clone, Copy)]
pub enum Item<'a> {
    Token(&'a str),
    Entity(&'a EntityMatch),
}

/// Collapses every entity span into a single item.
pub fn items<'a>(tokens: &'a [String], entities: &'a [EntityMatch]) -> Vec<Item<'a>> {
    let mut out = Vec::with_capacity(tokens.len());
    let mut ents = entities.iter().peekable();
    let mut i = 0;
    while i < tokens.len() {
        match ents.peek() {
            Some(e) if e.span.0 == i => {
                out.push(Item::Entity(e));
                i = e.span.1.max(i + 1);
                ents.next();
            }
            _ => {
                out.push(Item::Token(&tokens[i]));
                i += 1;
            }
        }
    }
    out
}

/// Number of pattern elements matched in order: the longest common
/// subsequence of pattern and items.
pub fn pattern_score(pattern: &[PatternElement], items: &[Item<'_>]) -> u32 {
    let mut prev = vec![0u32; items.len() + 1];
    let mut cur = vec![0u32; items.len() + 1];
    for el in pattern {
        for (j, item) in items.iter().enumerate() {
            cur[j + 1] = if el.matches(item) {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[items.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntentMatch {
    pub intent: usize,
    pub pattern: usize,
    pub score: u32,
}

/// Scores every intent and returns the winner.
///
/// An intent's score is its best pattern's match count plus the bonuses of
/// its live boost contexts; bonuses only count once a pattern element matched.
/// Ties go to the lexicographically smallest name.
pub fn match_intent(
    tokens: &[String],
    entities: &[EntityMatch],
    contexts: &ContextStack,
    intents: &[IntentDef],
) -> Option<IntentMatch> {
    let items = items(tokens, entities);
    let mut best: Option<(IntentMatch, &str)> = None;
    for (idx, intent) in intents.iter().enumerate() {
        let mut top = (0u32, 0usize);
        for (p, pattern) in intent.trigger_patterns.iter().enumerate() {
            let s = pattern_score(&pattern.elements, &items);
            if s > top.0 {
                top = (s, p);
            }
        }
        if top.0 == 0 {
            continue;
        }
        let bonus: u32 = intent
            .context_boosts
            .iter()
            .filter(|(name, _)| contexts.is_live(name))
            .map(|(_, b)| *b)
            .sum();
        let candidate = IntentMatch {
            intent: idx,
            pattern: top.1,
            score: top.0 + bonus,
        };
        let better = match &best {
            None => true,
            Some((b, name)) => {
                candidate.score > b.score
                    || (candidate.score == b.score && intent.name.as_str() < *name)
            }
        };
        if better {
            best = Some((candidate, &intent.name));
        }
    }
    best.map(|(m, _)| m)
}
