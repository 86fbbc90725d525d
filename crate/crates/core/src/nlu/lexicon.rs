use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::normalize::{is_integer, is_number, money_amount};
use super::NluError;

/// Kinds of entity the engine can extract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityType {
    Iot,
    Location,
    Money,
    Color,
    Datetime,
    Number,
    OptionRef,
}

impl EntityType {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityType::Iot => "iot",
            EntityType::Location => "location",
            EntityType::Money => "money",
            EntityType::Color => "color",
            EntityType::Datetime => "datetime",
            EntityType::Number => "number",
            EntityType::OptionRef => "option_ref",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "iot" => EntityType::Iot,
            "location" => EntityType::Location,
            "money" => EntityType::Money,
            "color" => EntityType::Color,
            "datetime" => EntityType::Datetime,
            "number" => EntityType::Number,
            "option_ref" => EntityType::OptionRef,
            _ => return None,
        })
    }
}

/// One element of a surface phrase.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PhraseToken {
    Literal(String),
    /// `<num>`: any decimal literal; captured.
    Number,
    /// `<int>`: an integer literal; captured.
    Integer,
    /// `<money>`: a `$N` integer literal; captures `N`.
    Money,
}

impl PhraseToken {
    /// Returns the captured text when `token` matches this element.
    pub fn matches<'t>(&self, token: &'t str) -> Option<Option<&'t str>> {
        match self {
            PhraseToken::Literal(lit) => (lit == token).then_some(None),
            PhraseToken::Number => is_number(token).then_some(Some(token)),
            PhraseToken::Integer => is_integer(token).then_some(Some(token)),
            PhraseToken::Money => money_amount(token).map(Some),
        }
    }

    fn parse(raw: &str) -> Result<Self, NluError> {
        match raw {
            "<num>" => Ok(PhraseToken::Number),
            "<int>" => Ok(PhraseToken::Integer),
            "<money>" => Ok(PhraseToken::Money),
            lit if !lit.is_empty()
                && lit.chars().all(|c| c.is_alphanumeric() || c == '.')
                && lit.chars().all(|c| !c.is_uppercase()) =>
            {
                Ok(PhraseToken::Literal(lit.to_string()))
            }
            other => Err(NluError::InvalidPhrase(other.to_string())),
        }
    }
}

/// A validated lexicon entry mapping surface phrases to one canonical decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEntry {
    pub surface_phrases: Vec<Vec<PhraseToken>>,
    pub entity_type: EntityType,
    /// Canonical attributes. A string value `"<k>"` is replaced by the k-th
    /// capture of the matched phrase, parsed as a number.
    pub canonical_attributes: Map<String, Value>,
}

/// Serialized shape of a lexicon entry in the configuration document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LexiconEntrySpec {
    pub entity_type: EntityType,
    pub phrases: Vec<String>,
    pub attributes: Map<String, Value>,
}

impl LexiconEntry {
    pub fn from_spec(spec: &LexiconEntrySpec) -> Result<Self, NluError> {
        let surface_phrases = spec
            .phrases
            .iter()
            .map(|p| {
                let toks = p
                    .split_whitespace()
                    .map(PhraseToken::parse)
                    .collect::<Result<Vec<_>, _>>()?;
                if toks.is_empty() {
                    return Err(NluError::InvalidPhrase(p.clone()));
                }
                Ok(toks)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(surface_phrases, spec.entity_type, spec.attributes.clone())
    }

    pub fn new(
        surface_phrases: Vec<Vec<PhraseToken>>,
        entity_type: EntityType,
        canonical_attributes: Map<String, Value>,
    ) -> Result<Self, NluError> {
        if surface_phrases.is_empty() || surface_phrases.iter().any(Vec::is_empty) {
            return Err(NluError::EmptyPhrases(entity_type.as_str().into()));
        }
        if canonical_attributes.is_empty() {
            return Err(NluError::EmptyAttributes(entity_type.as_str().into()));
        }
        if entity_type == EntityType::Money
            && !(canonical_attributes.contains_key("amount")
                && canonical_attributes.contains_key("currency"))
        {
            return Err(NluError::MoneyFields);
        }
        for value in canonical_attributes.values() {
            match value {
                Value::Array(_) | Value::Object(_) | Value::Null => {
                    return Err(NluError::NonScalarAttribute)
                }
                Value::String(s) => {
                    if let Some(idx) = capture_index(s) {
                        let min_captures = surface_phrases
                            .iter()
                            .map(|p| {
                                p.iter()
                                    .filter(|t| !matches!(t, PhraseToken::Literal(_)))
                                    .count()
                            })
                            .min()
                            .unwrap_or(0);
                        if idx >= min_captures {
                            return Err(NluError::BadCapture(s.clone()));
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(LexiconEntry {
            surface_phrases,
            entity_type,
            canonical_attributes,
        })
    }

    /// Builds the decoded attribute map for a match with the given captures.
    pub fn decode(&self, captures: &[&str]) -> Map<String, Value> {
        self.canonical_attributes
            .iter()
            .map(|(k, v)| {
                let value = match v {
                    Value::String(s) => match capture_index(s).and_then(|i| captures.get(i)) {
                        Some(cap) => number_value(cap),
                        None => v.clone(),
                    },
                    _ => v.clone(),
                };
                (k.clone(), value)
            })
            .collect()
    }
}

fn capture_index(s: &str) -> Option<usize> {
    s.strip_prefix('<')?.strip_suffix('>')?.parse().ok()
}

/// Integer literals become JSON integers, decimals become floats.
pub fn number_value(text: &str) -> Value {
    if is_integer(text) {
        if let Ok(n) = text.parse::<u64>() {
            return Value::from(n);
        }
    }
    text.parse::<f64>()
        .ok()
        .and_then(serde_json::Number::from_f64)
        .map(Value::Number)
        .unwrap_or_else(|| Value::String(text.to_string()))
}

/// An ordered, validated list of lexicon entries. Order matters for tie-breaks.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
}

impl Lexicon {
    pub fn new(entries: Vec<LexiconEntry>) -> Self {
        Lexicon { entries }
    }

    pub fn from_specs(specs: &[LexiconEntrySpec]) -> Result<Self, NluError> {
        specs
            .iter()
            .map(LexiconEntry::from_spec)
            .collect::<Result<Vec<_>, _>>()
            .map(Lexicon::new)
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn attrs(v: Value) -> Map<String, Value> {
        v.as_object().cloned().unwrap()
    }

    #[test]
    fn rejects_invalid_entries() {
        let spec = |phrases: Vec<&str>, attributes: Value, t| LexiconEntrySpec {
            entity_type: t,
            phrases: phrases.into_iter().map(String::from).collect(),
            attributes: attrs(attributes),
        };
        assert!(LexiconEntry::from_spec(&spec(vec![], json!({"a": 1}), EntityType::Iot)).is_err());
        assert!(
            LexiconEntry::from_spec(&spec(vec!["Heat"], json!({"a": 1}), EntityType::Iot)).is_err()
        );
        assert!(
            LexiconEntry::from_spec(&spec(vec!["heat!"], json!({"a": 1}), EntityType::Iot))
                .is_err()
        );
        assert!(LexiconEntry::from_spec(&spec(vec!["heat"], json!({}), EntityType::Iot)).is_err());
        assert!(matches!(
            LexiconEntry::from_spec(&spec(
                vec!["<money>"],
                json!({"amount": "<0>"}),
                EntityType::Money
            )),
            Err(NluError::MoneyFields)
        ));
        assert!(matches!(
            LexiconEntry::from_spec(&spec(
                vec!["cash"],
                json!({"amount": "<0>", "currency": "x"}),
                EntityType::Money
            )),
            Err(NluError::BadCapture(_))
        ));
    }

    #[test]
    fn decode_substitutes_captures_as_numbers() {
        let entry = LexiconEntry::from_spec(&LexiconEntrySpec {
            entity_type: EntityType::Money,
            phrases: vec!["<money>".into(), "<int> dollars".into()],
            attributes: attrs(json!({"type": "money", "amount": "<0>", "currency": "dollars"})),
        })
        .unwrap();
        let decoded = entry.decode(&["15"]);
        assert_eq!(
            Value::Object(decoded),
            json!({"type": "money", "amount": 15, "currency": "dollars"})
        );
        assert_eq!(number_value("21.5"), json!(21.5));
    }
}
