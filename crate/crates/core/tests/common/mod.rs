//! Shared helpers and naive reference implementations for integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use iotchat::config::Config;
use iotchat::gateway::Gateway;
use iotchat::nlu::intents::ContextBoost;
use iotchat::nlu::{IntentSpec, LexiconEntrySpec};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Map, Value};

pub fn shipped() -> Config {
    Config::shipped()
}

pub fn gateway() -> Gateway {
    Gateway::from_config(&shipped()).expect("shipped config builds")
}

pub fn transcript_path(name: &str) -> String {
    format!("{}/transcripts/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn texts(messages: &[iotchat::gateway::ChatMessage]) -> Vec<String> {
    messages.iter().map(|m| m.text.clone()).collect()
}

// ---- entity oracle ------------------------------------------------------------

fn digits(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_digit())
}

fn oracle_is_number(t: &str) -> bool {
    match t.split_once('.') {
        None => digits(t),
        Some((a, b)) => digits(a) && digits(b),
    }
}

/// Capture produced when phrase element `el` accepts `tok`.
fn element_accepts(el: &str, tok: &str) -> Option<Option<String>> {
    match el {
        "<num>" => oracle_is_number(tok).then(|| Some(tok.to_string())),
        "<int>" => digits(tok).then(|| Some(tok.to_string())),
        "<money>" => tok
            .strip_prefix('$')
            .filter(|r| digits(r))
            .map(|r| Some(r.to_string())),
        lit => (lit == tok).then_some(None),
    }
}

fn capture_value(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveEntity {
    pub entity_type: String,
    pub attributes: Map<String, Value>,
    pub span: (usize, usize),
}

/// Tries every phrase of every entry at every position; keeps the longest,
/// earliest entry, earliest phrase; then skips past it.
pub fn naive_entities(tokens: &[String], lexicon: &[LexiconEntrySpec]) -> Vec<NaiveEntity> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let mut best: Option<(usize, usize, usize, Vec<String>)> = None; // len, entry, phrase, captures
        for (e, entry) in lexicon.iter().enumerate() {
            for (p, phrase) in entry.phrases.iter().enumerate() {
                let els: Vec<&str> = phrase.split_whitespace().collect();
                if i + els.len() > tokens.len() {
                    continue;
                }
                let mut caps = Vec::new();
                let ok =
                    els.iter()
                        .zip(&tokens[i..])
                        .all(|(el, tok)| match element_accepts(el, tok) {
                            Some(Some(c)) => {
                                caps.push(c);
                                true
                            }
                            Some(None) => true,
                            None => false,
                        });
                if ok && best.as_ref().is_none_or(|b| els.len() > b.0) {
                    best = Some((els.len(), e, p, caps));
                }
            }
        }
        match best {
            Some((len, e, _, caps)) => {
                let entry = &lexicon[e];
                let attributes = entry
                    .attributes
                    .iter()
                    .map(|(k, v)| {
                        let idx = v
                            .as_str()
                            .and_then(|s| s.strip_prefix('<'))
                            .and_then(|s| s.strip_suffix('>'))
                            .and_then(|s| s.parse::<usize>().ok());
                        let value = match idx.and_then(|i| caps.get(i)) {
                            Some(c) => capture_value(c),
                            None => v.clone(),
                        };
                        (k.clone(), value)
                    })
                    .collect();
                out.push(NaiveEntity {
                    entity_type: entry.entity_type.as_str().to_string(),
                    attributes,
                    span: (i, i + len),
                });
                i += len;
            }
            None => i += 1,
        }
    }
    out
}

// ---- intent oracle --------------------------------------------------------------

enum Unit<'a> {
    Tok(&'a str),
    Ent(&'a NaiveEntity),
}

fn units<'a>(tokens: &'a [String], ents: &'a [NaiveEntity]) -> Vec<Unit<'a>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if let Some(e) = ents.iter().find(|e| e.span.0 == i) {
            out.push(Unit::Ent(e));
            i = e.span.1;
        } else {
            out.push(Unit::Tok(&tokens[i]));
            i += 1;
        }
    }
    out
}

fn primary(e: &NaiveEntity) -> Option<String> {
    e.attributes
        .iter()
        .find(|(k, _)| k.as_str() != "type")
        .map(|(_, v)| match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        })
}

fn element_matches(el: &str, unit: &Unit<'_>) -> bool {
    match (el.strip_prefix('@'), unit) {
        (None, Unit::Tok(t)) => el == *t,
        (Some(spec), Unit::Ent(e)) => {
            let (ty, want) = match spec.split_once('=') {
                Some((ty, v)) => (ty, Some(v.replace('_', " "))),
                None => (spec, None),
            };
            ty == e.entity_type
                && want.is_none_or(|w| {
                    primary(e).is_some_and(|p| p.to_lowercase() == w.to_lowercase())
                })
        }
        _ => false,
    }
}

/// Largest subset of pattern elements that embeds, in order, in `units`.
fn exhaustive_score(pattern: &[&str], units: &[Unit<'_>]) -> u32 {
    let n = pattern.len();
    let mut best = 0;
    for mask in 0u32..(1 << n) {
        let size = mask.count_ones();
        if size <= best {
            continue;
        }
        let mut pos = 0;
        let mut ok = true;
        for (k, el) in pattern.iter().enumerate() {
            if mask & (1 << k) == 0 {
                continue;
            }
            match units[pos..].iter().position(|u| element_matches(el, u)) {
                Some(off) => pos += off + 1,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            best = size;
        }
    }
    best
}

/// (intent name, score) of the winner, or `None` when nothing scores.
pub fn naive_intent(
    tokens: &[String],
    ents: &[NaiveEntity],
    live: &BTreeSet<String>,
    intents: &[IntentSpec],
) -> Option<(String, u32)> {
    let units = units(tokens, ents);
    let mut scored: Vec<(String, u32)> = Vec::new();
    for intent in intents {
        let best = intent
            .patterns
            .iter()
            .map(|p| {
                let text = match serde_json::to_value(p).unwrap() {
                    Value::String(s) => s,
                    other => other["text"].as_str().unwrap().to_string(),
                };
                let els: Vec<&str> = text.split_whitespace().collect();
                exhaustive_score(&els, &units)
            })
            .max()
            .unwrap_or(0);
        if best == 0 {
            continue;
        }
        let bonus: u32 = intent
            .context_boosts
            .iter()
            .filter(|b| live.contains(&b.context))
            .map(|b| b.bonus)
            .sum();
        scored.push((intent.name.clone(), best + bonus));
    }
    scored.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.into_iter().next()
}

// ---- random instances -------------------------------------------------------------

pub const WORDS: &[&str] = &[
    "on", "off", "light", "lamp", "the", "room", "red", "turn", "set", "car", "hot", "in",
];

#[derive(Debug, Clone)]
pub struct Instance {
    pub lexicon: Vec<LexiconEntrySpec>,
    pub intents: Vec<IntentSpec>,
    pub tokens: Vec<String>,
    pub live: BTreeSet<String>,
}

const TYPES: &[&str] = &["iot", "location", "color", "number", "datetime"];
const CONTEXTS: &[&str] = &["location", "device", "mood"];

fn word(rng: &mut StdRng) -> String {
    match rng.gen_range(0..10) {
        0 => rng.gen_range(0..100).to_string(),
        1 => format!("{}.{}", rng.gen_range(0..10), rng.gen_range(0..10)),
        2 => format!("${}", rng.gen_range(1..50)),
        _ => WORDS.choose(rng).unwrap().to_string(),
    }
}

fn phrase(rng: &mut StdRng, allow_capture: bool) -> String {
    let len = rng.gen_range(1..=3);
    (0..len)
        .map(|_| {
            if allow_capture && rng.gen_bool(0.15) {
                ["<num>", "<int>", "<money>"]
                    .choose(rng)
                    .unwrap()
                    .to_string()
            } else {
                WORDS.choose(rng).unwrap().to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn random_instance(rng: &mut StdRng) -> Instance {
    let n_entries = rng.gen_range(1..=20);
    let lexicon: Vec<LexiconEntrySpec> = (0..n_entries)
        .map(|i| {
            let ty = *TYPES.choose(rng).unwrap();
            let phrases: Vec<String> = (0..rng.gen_range(1..=3))
                .map(|_| phrase(rng, true))
                .collect();
            let min_caps = phrases
                .iter()
                .map(|p| p.split_whitespace().filter(|t| t.starts_with('<')).count())
                .min()
                .unwrap();
            let value = if min_caps > 0 && rng.gen_bool(0.7) {
                json!("<0>")
            } else {
                json!(format!("v{i}"))
            };
            let attrs = json!({ "type": ty, "value": value, "entry": i });
            LexiconEntrySpec {
                entity_type: serde_json::from_value(json!(ty)).unwrap(),
                phrases,
                attributes: attrs.as_object().unwrap().clone(),
            }
        })
        .collect();
    let n_intents = rng.gen_range(1..=10);
    let intents: Vec<IntentSpec> = (0..n_intents)
        .map(|i| {
            let patterns: Vec<Value> = (0..rng.gen_range(1..=3))
                .map(|_| {
                    let len = rng.gen_range(1..=5);
                    let els: Vec<String> = (0..len)
                        .map(|_| match rng.gen_range(0..5) {
                            0 => format!("@{}", TYPES.choose(rng).unwrap()),
                            1 => format!(
                                "@{}=v{}",
                                TYPES.choose(rng).unwrap(),
                                rng.gen_range(0..n_entries)
                            ),
                            _ => WORDS.choose(rng).unwrap().to_string(),
                        })
                        .collect();
                    json!(els.join(" "))
                })
                .collect();
            let mut boosts = Vec::new();
            for c in CONTEXTS {
                if rng.gen_bool(0.2) {
                    boosts.push(ContextBoost {
                        context: c.to_string(),
                        bonus: rng.gen_range(1..=2),
                    });
                }
            }
            serde_json::from_value(json!({
                "name": format!("intent_{:02}", rng.gen_range(0..40) * 10 + i),
                "action": "test.action",
                "patterns": patterns,
                "context_boosts": boosts,
            }))
            .unwrap()
        })
        .collect();
    let tokens = (0..rng.gen_range(0..=12)).map(|_| word(rng)).collect();
    let live = CONTEXTS
        .iter()
        .filter(|_| rng.gen_bool(0.4))
        .map(|c| c.to_string())
        .collect();
    Instance {
        lexicon,
        intents,
        tokens,
        live,
    }
}

// ---- permission oracle ------------------------------------------------------------

/// Whether the shipped permission table lets `principal` touch a device.
pub fn shipped_allows(principal: &str, kind: &str, location: &str) -> bool {
    match principal {
        "owner" => true,
        "guest" => kind == "light" && location == "guest bedroom",
        _ => false,
    }
}
