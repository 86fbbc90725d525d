use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::lexicon::{EntityType, Lexicon, PhraseToken};

/// A canonical decoding of a surface phrase found in an utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityMatch {
    pub entity_type: EntityType,
    pub attributes: Map<String, Value>,
    /// Half-open token range `[start, end)` in the normalized token stream.
    pub span: (usize, usize),
}

impl EntityMatch {
    /// The attribute used when this entity fills a slot: the first attribute
    /// other than `type`.
    pub fn primary_value(&self) -> Option<&Value> {
        self.attributes
            .iter()
            .find(|(k, _)| k.as_str() != "type")
            .map(|(_, v)| v)
    }

    pub fn attribute_str(&self, key: &str) -> Option<&str> {
        self.attributes.get(key).and_then(Value::as_str)
    }
}

#[derive(Debug, Clone, Default)]
struct Node {
    literal: HashMap<String, usize>,
    number: Option<usize>,
    integer: Option<usize>,
    money: Option<usize>,
    /// Smallest (entry, phrase) index whose phrase ends here.
    terminal: Option<(usize, usize)>,
}

/// Greedy longest-match extractor over a prefix trie of every lexicon phrase.
#[derive(Debug, Clone)]
pub struct EntityExtractor {
    lexicon: Lexicon,
    nodes: Vec<Node>,
}

impl EntityExtractor {
    pub fn new(lexicon: &Lexicon) -> Self {
        let mut nodes = vec![Node::default()];
        for (e, entry) in lexicon.entries().iter().enumerate() {
            for (p, phrase) in entry.surface_phrases.iter().enumerate() {
                let mut at = 0;
                for tok in phrase {
                    let next_id = nodes.len();
                    let slot = match tok {
                        PhraseToken::Literal(lit) => {
                            *nodes[at].literal.entry(lit.clone()).or_insert(next_id)
                        }
                        PhraseToken::Number => *nodes[at].number.get_or_insert(next_id),
                        PhraseToken::Integer => *nodes[at].integer.get_or_insert(next_id),
                        PhraseToken::Money => *nodes[at].money.get_or_insert(next_id),
                    };
                    if slot == next_id {
                        nodes.push(Node::default());
                    }
                    at = slot;
                }
                // Entries are inserted in order, so the first terminal is the smallest.
                nodes[at].terminal.get_or_insert((e, p));
            }
        }
        EntityExtractor {
            lexicon: lexicon.clone(),
            nodes,
        }
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    /// Scans left to right; at each position takes the longest phrase, ties
    /// going to the earliest lexicon entry. Matched tokens are consumed.
    pub fn extract(&self, tokens: &[String]) -> Vec<EntityMatch> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            match self.longest_at(tokens, i) {
                Some(found) => {
                    let entry = &self.lexicon.entries()[found.entry];
                    out.push(EntityMatch {
                        entity_type: entry.entity_type,
                        attributes: entry.decode(&found.captures),
                        span: (i, i + found.len),
                    });
                    i += found.len;
                }
                None => i += 1,
            }
        }
        out
    }

    fn longest_at<'t>(&self, tokens: &'t [String], start: usize) -> Option<Found<'t>> {
        let mut best: Option<Found<'t>> = None;
        let mut stack: Vec<(usize, usize, Vec<&'t str>)> = vec![(0, start, Vec::new())];
        while let Some((node_id, pos, captures)) = stack.pop() {
            let node = &self.nodes[node_id];
            if let Some((entry, phrase)) = node.terminal {
                let len = pos - start;
                let better = match &best {
                    None => true,
                    Some(b) => {
                        len > b.len || (len == b.len && (entry, phrase) < (b.entry, b.phrase))
                    }
                };
                if better && len > 0 {
                    best = Some(Found {
                        len,
                        entry,
                        phrase,
                        captures: captures.clone(),
                    });
                }
            }
            let Some(tok) = tokens.get(pos) else { continue };
            if let Some(&child) = node.literal.get(tok.as_str()) {
                stack.push((child, pos + 1, captures.clone()));
            }
            for (child, kind) in [
                (node.number, PhraseToken::Number),
                (node.integer, PhraseToken::Integer),
                (node.money, PhraseToken::Money),
            ] {
                if let Some(child) = child {
                    if let Some(Some(cap)) = kind.matches(tok) {
                        let mut caps = captures.clone();
                        caps.push(cap);
                        stack.push((child, pos + 1, caps));
                    }
                }
            }
        }
        best
    }
}

struct Found<'t> {
    len: usize,
    entry: usize,
    phrase: usize,
    captures: Vec<&'t str>,
}

/// Convenience wrapper building a throwaway extractor.
pub fn extract_entities(tokens: &[String], lexicon: &Lexicon) -> Vec<EntityMatch> {
    EntityExtractor::new(lexicon).extract(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nlu::lexicon::LexiconEntrySpec;
    use crate::nlu::normalize::normalize;
    use serde_json::json;

    fn lexicon(v: Value) -> Lexicon {
        let specs: Vec<LexiconEntrySpec> = serde_json::from_value(v).unwrap();
        Lexicon::from_specs(&specs).unwrap()
    }

    fn sample() -> Lexicon {
        lexicon(json!([
            {"entity_type": "iot", "phrases": ["thermostat", "heat", "heating", "ac", "air conditioning"],
             "attributes": {"type": "iot", "device": "Thermostat"}},
            {"entity_type": "location", "phrases": ["living room", "room"],
             "attributes": {"type": "location", "location": "living room"}},
            {"entity_type": "location", "phrases": ["living room"],
             "attributes": {"type": "location", "location": "shadowed"}},
            {"entity_type": "money", "phrases": ["<money>", "<int> dollars"],
             "attributes": {"type": "money", "amount": "<0>", "currency": "dollars"}},
            {"entity_type": "number", "phrases": ["<num>"],
             "attributes": {"type": "number", "value": "<0>"}}
        ]))
    }

    #[test]
    fn longest_match_wins() {
        let lex = sample();
        let found = extract_entities(&normalize("turn on the air conditioning"), &lex);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].span, (3, 5));
        assert_eq!(
            Value::Object(found[0].attributes.clone()),
            json!({"type": "iot", "device": "Thermostat"})
        );
    }

    #[test]
    fn tie_goes_to_earliest_entry() {
        let lex = sample();
        let found = extract_entities(&normalize("the living room"), &lex);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].attribute_str("location"), Some("living room"));
    }

    #[test]
    fn money_beats_number_by_length() {
        let lex = sample();
        let found = extract_entities(&normalize("pay 15 dollars then 3"), &lex);
        assert_eq!(found.len(), 2);
        assert_eq!(found[0].entity_type, EntityType::Money);
        assert_eq!(found[0].attributes.get("amount"), Some(&json!(15)));
        assert_eq!(found[1].entity_type, EntityType::Number);
        assert_eq!(found[1].span, (4, 5));
    }

    #[test]
    fn decimal_dollars_are_not_money() {
        let lex = sample();
        let found = extract_entities(&normalize("$12.50"), &lex);
        assert!(found.is_empty());
    }

    #[test]
    fn nothing_in_plain_chatter() {
        assert!(extract_entities(&normalize("hello there"), &sample()).is_empty());
    }
}
