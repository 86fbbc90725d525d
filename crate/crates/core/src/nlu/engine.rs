use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::context::ContextStack;
use super::entities::{EntityExtractor, EntityMatch};
use super::intents::{build_intents, match_intent, IntentDef, IntentSpec};
use super::lexicon::{EntityType, Lexicon, LexiconEntrySpec};
use super::normalize::normalize;
use super::slots::{
    bind_devices, kind_of_entity, resolve_slots, Clarification, DeviceRef, FallbackReason,
    ParseResult, Understanding,
};
use super::NluError;

/// One user message as seen by the engine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub session_id: String,
    pub text: String,
    pub turn_index: u64,
}

/// The pluggable understanding boundary. The gateway only talks to this.
pub trait Understander: Send + Sync {
    fn understand(
        &self,
        utterance: &Utterance,
        contexts: &ContextStack,
        candidates: &[DeviceRef],
    ) -> Understanding;

    /// Finishes a clarification once the user picked `selected` options.
    /// `None` means the selection does not fit the question.
    fn complete_clarification(
        &self,
        pending: &Clarification,
        selected: &[usize],
        candidates: &[DeviceRef],
    ) -> Option<Understanding>;

    fn intents(&self) -> &[IntentDef];

    /// Tokens and entities for `text`, for inspection endpoints.
    fn inspect(&self, text: &str) -> (Vec<String>, Vec<EntityMatch>);

    fn new_context_stack(&self) -> ContextStack;
}

/// Deterministic lexicon-and-pattern engine.
#[derive(Debug, Clone)]
pub struct RuleEngine {
    extractor: EntityExtractor,
    intents: Vec<IntentDef>,
    default_lifespan: u32,
}

impl RuleEngine {
    pub fn new(lexicon: Lexicon, intents: Vec<IntentDef>, default_lifespan: u32) -> Self {
        RuleEngine {
            extractor: EntityExtractor::new(&lexicon),
            intents,
            default_lifespan,
        }
    }

    pub fn from_specs(
        entities: &[LexiconEntrySpec],
        intents: &[IntentSpec],
        default_lifespan: u32,
    ) -> Result<Self, NluError> {
        if default_lifespan == 0 {
            return Err(NluError::ZeroLifespan);
        }
        Ok(RuleEngine::new(
            Lexicon::from_specs(entities)?,
            build_intents(intents)?,
            default_lifespan,
        ))
    }

    pub fn default_lifespan(&self) -> u32 {
        self.default_lifespan
    }

    pub fn lexicon(&self) -> &Lexicon {
        self.extractor.lexicon()
    }

    pub fn new_context_stack(&self) -> ContextStack {
        ContextStack::new(self.default_lifespan)
    }

    /// Tokens and entities for `text`; backs the inspection endpoints.
    pub fn inspect(&self, text: &str) -> (Vec<String>, Vec<EntityMatch>) {
        let tokens = normalize(text);
        let entities = self.extractor.extract(&tokens);
        (tokens, entities)
    }

    pub fn intent(&self, name: &str) -> Option<&IntentDef> {
        self.intents.iter().find(|i| i.name == name)
    }
}

impl Understander for RuleEngine {
    fn understand(
        &self,
        utterance: &Utterance,
        contexts: &ContextStack,
        candidates: &[DeviceRef],
    ) -> Understanding {
        let (tokens, entities) = self.inspect(&utterance.text);
        let Some(m) = match_intent(&tokens, &entities, contexts, &self.intents) else {
            return Understanding::fallback(FallbackReason::NoIntent);
        };
        let intent = &self.intents[m.intent];
        let mut out = resolve_slots(
            intent,
            &intent.trigger_patterns[m.pattern],
            &entities,
            contexts,
            candidates,
        );
        out.score = Some(m.score);
        out
    }

    fn complete_clarification(
        &self,
        pending: &Clarification,
        selected: &[usize],
        candidates: &[DeviceRef],
    ) -> Option<Understanding> {
        if selected.is_empty() || selected.iter().any(|&i| i >= pending.options.len()) {
            return None;
        }
        let mut action = pending.partial.clone();
        if pending.pending_slot == "device" {
            action.targets = selected
                .iter()
                .map(|&i| pending.options[i].value.clone())
                .collect();
            return Some(Understanding {
                result: ParseResult::ResolvedAction(action),
                score: None,
                consumed_contexts: Default::default(),
                pushes: Vec::new(),
            });
        }
        let [only] = selected else { return None };
        let intent = self.intent(&action.matched_intent)?;
        action.parameters.insert(
            pending.pending_slot.clone(),
            Value::String(pending.options[*only].value.clone()),
        );
        let kind = action
            .consumed_entities
            .iter()
            .find(|e| e.entity_type == EntityType::Iot)
            .and_then(kind_of_entity)
            .or_else(|| intent.device_kind.clone());
        let targets_devices = intent.device_kind.is_some()
            || intent
                .slots
                .iter()
                .any(|s| s.entity_type == EntityType::Iot);
        Some(bind_devices(
            intent,
            kind.as_deref(),
            action,
            &[],
            candidates,
            targets_devices,
        ))
    }

    fn intents(&self) -> &[IntentDef] {
        &self.intents
    }

    fn inspect(&self, text: &str) -> (Vec<String>, Vec<EntityMatch>) {
        RuleEngine::inspect(self, text)
    }

    fn new_context_stack(&self) -> ContextStack {
        RuleEngine::new_context_stack(self)
    }
}
