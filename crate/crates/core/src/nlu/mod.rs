//! Rule-based language understanding: normalization, entity extraction,
//! intent matching, context frames and slot resolution.

pub mod clarify;
pub mod context;
pub mod engine;
pub mod entities;
pub mod intents;
pub mod lexicon;
pub mod normalize;
pub mod slots;

pub use clarify::{interpret_clarification_reply, ReplyInterpretation, ReplyOutcome, ReplyTracker};
pub use context::{ContextFrame, ContextStack};
pub use engine::{RuleEngine, Understander, Utterance};
pub use entities::{extract_entities, EntityExtractor, EntityMatch};
pub use intents::{match_intent, IntentDef, IntentMatch, IntentSpec, PatternElement};
pub use lexicon::{EntityType, Lexicon, LexiconEntry, LexiconEntrySpec, PhraseToken};
pub use normalize::normalize;
pub use slots::{
    resolve_slots, Clarification, ClarifyOption, DeviceRef, FallbackReason, ParseResult,
    ResolvedAction, Understanding,
};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum NluError {
    #[error("lexicon entry for {0} has no phrases")]
    EmptyPhrases(String),
    #[error("lexicon entry for {0} has no attributes")]
    EmptyAttributes(String),
    #[error("invalid phrase token {0:?}: phrases must be lowercase and punctuation-free")]
    InvalidPhrase(String),
    #[error("money entries must carry amount and currency attributes")]
    MoneyFields,
    #[error("attribute values must be scalars")]
    NonScalarAttribute,
    #[error("capture reference {0} exceeds the phrase's captures")]
    BadCapture(String),
    #[error("invalid pattern element {0:?}")]
    InvalidPattern(String),
    #[error("intent {0} has no patterns")]
    NoPatterns(String),
    #[error("duplicate intent name {0}")]
    DuplicateIntent(String),
    #[error("intent {intent}: required slot {slot} is not an action parameter")]
    UnknownSlot { intent: String, slot: String },
    #[error("default lifespan must be at least 1")]
    ZeroLifespan,
}
