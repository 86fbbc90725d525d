use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::context::{ContextFrame, ContextStack};
use super::entities::EntityMatch;
use super::intents::{value_text, IntentDef, Pattern};
use super::lexicon::EntityType;

/// The engine's view of one device it may bind an action to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceRef {
    pub serial: String,
    pub kind: String,
    pub name: String,
    pub location: String,
}

/// An action with every required parameter bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedAction {
    pub action_name: String,
    pub parameters: Map<String, Value>,
    pub matched_intent: String,
    pub consumed_entities: Vec<EntityMatch>,
    /// Serials of the devices the action applies to, in registry order.
    pub targets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClarifyOption {
    pub label: String,
    pub value: String,
}

/// A question whose answer fills `pending_slot` of `partial`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clarification {
    pub question: String,
    pub options: Vec<ClarifyOption>,
    pub pending_slot: String,
    pub partial: ResolvedAction,
}

impl Clarification {
    pub fn labels(&self) -> Vec<String> {
        self.options.iter().map(|o| o.label.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum FallbackReason {
    NoIntent,
    MissingSlot {
        slot: String,
    },
    NoDevice {
        kind: Option<String>,
        location: Option<String>,
    },
    Abandoned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum ParseResult {
    ResolvedAction(ResolvedAction),
    Clarification(Clarification),
    Fallback { reason: FallbackReason },
}

/// A parse plus the context bookkeeping it implies for this turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Understanding {
    pub result: ParseResult,
    pub score: Option<u32>,
    pub consumed_contexts: BTreeSet<String>,
    pub pushes: Vec<ContextFrame>,
}

impl Understanding {
    pub fn fallback(reason: FallbackReason) -> Self {
        Understanding {
            result: ParseResult::Fallback { reason },
            score: None,
            consumed_contexts: BTreeSet::new(),
            pushes: Vec::new(),
        }
    }
}

/// Joins choices the way the bot asks them: "The A or B", "The A, B or C".
pub fn choice_list(labels: &[String]) -> String {
    match labels {
        [] => String::new(),
        [only] => format!("The {only}"),
        [init @ .., last] => format!("The {} or {last}", init.join(", ")),
    }
}

pub(crate) fn kind_of_entity(ent: &EntityMatch) -> Option<String> {
    ent.attribute_str("device").map(str::to_lowercase)
}

fn same_text(a: &str, b: &str) -> bool {
    a.to_lowercase() == b.to_lowercase()
}

/// Fills the intent's slots and binds target devices.
///
/// Slots come from entities first, then from the most recent live context.
/// A device choice with several candidates, or a missing required location
/// with several possible values, becomes a clarification.
pub fn resolve_slots(
    intent: &IntentDef,
    pattern: &Pattern,
    entities: &[EntityMatch],
    contexts: &ContextStack,
    candidates: &[DeviceRef],
) -> Understanding {
    let mut params = pattern.fixed_params.clone();
    let mut consumed_entities = Vec::new();
    let mut consumed_contexts = BTreeSet::new();
    let mut from_context: Vec<(String, String)> = Vec::new();
    let mut pushes = Vec::new();
    let mut used = vec![false; entities.len()];

    for slot in &intent.slots {
        let hit = entities
            .iter()
            .enumerate()
            .find(|(i, e)| !used[*i] && e.entity_type == slot.entity_type);
        if let Some((i, ent)) = hit {
            let value = match &slot.attribute {
                Some(attr) => ent.attributes.get(attr).cloned(),
                None => ent.primary_value().cloned(),
            };
            if let Some(value) = value {
                used[i] = true;
                consumed_entities.push(ent.clone());
                if let Some(ctx) = &slot.context {
                    pushes.push(ContextFrame::single(ctx, &slot.name, value.clone()));
                }
                params.insert(slot.name.clone(), value);
                continue;
            }
        }
        if let Some((frame, value)) = contexts.lookup(&slot.name) {
            params.insert(slot.name.clone(), value.clone());
            consumed_contexts.insert(frame.to_string());
            from_context.push((slot.name.clone(), frame.to_string()));
        }
    }

    let iot = entities
        .iter()
        .enumerate()
        .find(|(_, e)| e.entity_type == EntityType::Iot);
    let kind = iot
        .and_then(|(_, e)| kind_of_entity(e))
        .or_else(|| intent.device_kind.clone());
    if let Some((i, ent)) = iot {
        if !used[i] {
            consumed_entities.push(ent.clone());
        }
    }
    let targets_devices = intent.device_kind.is_some()
        || intent
            .slots
            .iter()
            .any(|s| s.entity_type == EntityType::Iot);

    let partial = ResolvedAction {
        action_name: intent.action_name.clone(),
        parameters: params,
        matched_intent: intent.name.clone(),
        consumed_entities,
        targets: Vec::new(),
    };
    let mut understanding = bind_devices(
        intent,
        kind.as_deref(),
        partial,
        &from_context,
        candidates,
        targets_devices,
    );
    if let ParseResult::Fallback { .. } = understanding.result {
        return understanding;
    }
    // Context-sourced values that were dropped while binding are not consumed.
    let kept: BTreeSet<String> = from_context
        .iter()
        .filter(|(slot, _)| match &understanding.result {
            ParseResult::ResolvedAction(a) => a.parameters.contains_key(slot),
            ParseResult::Clarification(c) => c.partial.parameters.contains_key(slot),
            ParseResult::Fallback { .. } => false,
        })
        .map(|(_, frame)| frame.clone())
        .collect();
    understanding.consumed_contexts = consumed_contexts.intersection(&kept).cloned().collect();
    understanding.pushes = pushes;
    understanding
}

/// Binds target devices for a partially filled action. Also used to finish a
/// non-device clarification once its slot is answered.
pub fn bind_devices(
    intent: &IntentDef,
    kind: Option<&str>,
    mut partial: ResolvedAction,
    from_context: &[(String, String)],
    candidates: &[DeviceRef],
    targets_devices: bool,
) -> Understanding {
    let of_kind: Vec<&DeviceRef> = candidates
        .iter()
        .filter(|d| kind.is_none_or(|k| same_text(&d.kind, k)))
        .collect();

    for slot in intent.required_slots() {
        if partial.parameters.contains_key(&slot.name) {
            continue;
        }
        if slot.entity_type != EntityType::Location || !targets_devices {
            return Understanding::fallback(FallbackReason::MissingSlot {
                slot: slot.name.clone(),
            });
        }
        let mut locations: Vec<&str> = Vec::new();
        for d in &of_kind {
            if !locations.iter().any(|l| same_text(l, &d.location)) {
                locations.push(&d.location);
            }
        }
        match locations.as_slice() {
            [] => {
                return Understanding::fallback(FallbackReason::NoDevice {
                    kind: kind.map(String::from),
                    location: None,
                })
            }
            [only] => {
                partial
                    .parameters
                    .insert(slot.name.clone(), Value::String(only.to_string()));
            }
            many => {
                let options: Vec<ClarifyOption> = many
                    .iter()
                    .map(|l| ClarifyOption {
                        label: l.to_string(),
                        value: l.to_string(),
                    })
                    .collect();
                let labels: Vec<String> = options.iter().map(|o| o.label.clone()).collect();
                let question =
                    format!("Which {} do you mean? {}?", slot.name, choice_list(&labels));
                return clarification(question, options, &slot.name, partial);
            }
        }
    }

    if !targets_devices {
        return resolved(partial);
    }

    let location = partial.parameters.get("location").map(value_text);
    let mut matching: Vec<&DeviceRef> = of_kind
        .iter()
        .copied()
        .filter(|d| {
            location
                .as_deref()
                .is_none_or(|l| same_text(&d.location, l))
        })
        .collect();
    if matching.is_empty() && location.is_some() {
        let ctx_location = from_context.iter().any(|(slot, _)| slot == "location");
        let required = intent.required_slots().any(|s| s.name == "location");
        if ctx_location && !required {
            partial.parameters.remove("location");
            matching = of_kind.clone();
        }
    }
    match matching.as_slice() {
        [] => Understanding::fallback(FallbackReason::NoDevice {
            kind: kind.map(String::from),
            location: partial.parameters.get("location").map(value_text),
        }),
        [one] => {
            partial.targets = vec![one.serial.clone()];
            resolved(partial)
        }
        many => {
            let options: Vec<ClarifyOption> = many
                .iter()
                .map(|d| ClarifyOption {
                    label: d.name.clone(),
                    value: d.serial.clone(),
                })
                .collect();
            let labels: Vec<String> = options.iter().map(|o| o.label.clone()).collect();
            let kind_word = kind.unwrap_or("device");
            let template = intent
                .clarify
                .clone()
                .unwrap_or_else(|| "Which {kind} do you mean? {choices}?".to_string());
            let question = template
                .replace("{kind}", kind_word)
                .replace("{choices}", &choice_list(&labels));
            clarification(question, options, "device", partial)
        }
    }
}

fn resolved(action: ResolvedAction) -> Understanding {
    Understanding {
        result: ParseResult::ResolvedAction(action),
        score: None,
        consumed_contexts: BTreeSet::new(),
        pushes: Vec::new(),
    }
}

fn clarification(
    question: String,
    options: Vec<ClarifyOption>,
    slot: &str,
    partial: ResolvedAction,
) -> Understanding {
    Understanding {
        result: ParseResult::Clarification(Clarification {
            question,
            options,
            pending_slot: slot.to_string(),
            partial,
        }),
        score: None,
        consumed_contexts: BTreeSet::new(),
        pushes: Vec::new(),
    }
}
