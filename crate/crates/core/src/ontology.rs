//! Symbolic vocabulary of a dataset: domains, topics, slots, intents and
//! atomic system actions.
//!
//! An [`Ontology`] is loaded from a JSON document, validated as a whole, and
//! then carries a derived, lexicographically sorted action catalog. It is
//! immutable after construction.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Reserved label used for unknown / failed annotations in every category.
pub const UNK: &str = "unk";

/// Domain token used by domain-independent actions.
pub const GENERAL: &str = "GENERAL";

const MAX_IDENT_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("validation error at {path}: {message}")]
    Validation { path: String, message: String },
    #[error("unknown preset `{0}` (expected simple, medium or hard)")]
    UnknownPreset(String),
    #[error("malformed action id `{0}`")]
    BadActionId(String),
}

impl OntologyError {
    fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        OntologyError::Validation {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotCategory {
    Mandatory,
    Desired,
    Optional,
}

impl SlotCategory {
    /// Mandatory and desired slots may be requested by the system; optional
    /// slots are only ever volunteered.
    pub fn is_requestable(self) -> bool {
        !matches!(self, SlotCategory::Optional)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSpec {
    pub name: String,
    pub category: SlotCategory,
    pub values: Vec<String>,
}

/// Per-topic declaration of which slots get CONFIRM / INFORM action ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Emission {
    #[serde(default)]
    pub confirm: Vec<String>,
    #[serde(default)]
    pub inform: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicSpec {
    pub name: String,
    pub slots: Vec<SlotSpec>,
    #[serde(default)]
    pub emit: Emission,
}

impl TopicSpec {
    pub fn slot(&self, name: &str) -> Option<&SlotSpec> {
        self.slots.iter().find(|s| s.name == name)
    }

    pub fn mandatory(&self) -> impl Iterator<Item = &SlotSpec> {
        self.slots
            .iter()
            .filter(|s| s.category == SlotCategory::Mandatory)
    }

    pub fn confirms(&self, slot: &str) -> bool {
        self.emit.confirm.iter().any(|s| s == slot)
    }

    pub fn informs(&self, slot: &str) -> bool {
        self.emit.inform.iter().any(|s| s == slot)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub name: String,
    pub topics: Vec<TopicSpec>,
}

/// The nine user intent kinds. Closed set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentKind {
    InformIntent,
    Inform,
    Affirm,
    Negate,
    Request,
    Thank,
    Goodbye,
    Unk,
    ChitChat,
}

impl IntentKind {
    pub const ALL: [IntentKind; 9] = [
        IntentKind::InformIntent,
        IntentKind::Inform,
        IntentKind::Affirm,
        IntentKind::Negate,
        IntentKind::Request,
        IntentKind::Thank,
        IntentKind::Goodbye,
        IntentKind::Unk,
        IntentKind::ChitChat,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IntentKind::InformIntent => "inform_intent",
            IntentKind::Inform => "inform",
            IntentKind::Affirm => "affirm",
            IntentKind::Negate => "negate",
            IntentKind::Request => "request",
            IntentKind::Thank => "thank",
            IntentKind::Goodbye => "goodbye",
            IntentKind::Unk => "unk",
            IntentKind::ChitChat => "chit_chat",
        }
    }

    pub fn index(self) -> usize {
        IntentKind::ALL.iter().position(|k| *k == self).unwrap()
    }
}

impl fmt::Display for IntentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IntentKind {
    type Err = OntologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        IntentKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| OntologyError::Schema(format!("unknown intent `{s}`")))
    }
}

/// The six system action kinds. Closed set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionKind {
    Inform,
    Request,
    Confirm,
    Notify,
    ReqMore,
    AnswerChitChat,
}

impl ActionKind {
    pub const ALL: [ActionKind; 6] = [
        ActionKind::Inform,
        ActionKind::Request,
        ActionKind::Confirm,
        ActionKind::Notify,
        ActionKind::ReqMore,
        ActionKind::AnswerChitChat,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Inform => "INFORM",
            ActionKind::Request => "REQUEST",
            ActionKind::Confirm => "CONFIRM",
            ActionKind::Notify => "NOTIFY",
            ActionKind::ReqMore => "REQ_MORE",
            ActionKind::AnswerChitChat => "ANSWER_CHIT_CHAT",
        }
    }

    /// Kinds that address the dialogue as a whole rather than a domain.
    pub fn is_general(self) -> bool {
        matches!(self, ActionKind::ReqMore | ActionKind::AnswerChitChat)
    }

    pub fn takes_slot(self) -> bool {
        matches!(
            self,
            ActionKind::Inform | ActionKind::Request | ActionKind::Confirm
        )
    }
}

impl FromStr for ActionKind {
    type Err = OntologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActionKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| OntologyError::BadActionId(s.to_string()))
    }
}

/// An atomic system action: `domain-KIND[-slot]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomicActionId {
    domain: String,
    kind: ActionKind,
    slot: Option<String>,
}

impl AtomicActionId {
    pub fn general(kind: ActionKind) -> Self {
        debug_assert!(kind.is_general());
        AtomicActionId {
            domain: GENERAL.to_string(),
            kind,
            slot: None,
        }
    }

    pub fn notify(domain: &str) -> Self {
        AtomicActionId {
            domain: domain.to_string(),
            kind: ActionKind::Notify,
            slot: None,
        }
    }

    pub fn slotted(domain: &str, kind: ActionKind, slot: &str) -> Self {
        debug_assert!(kind.takes_slot());
        AtomicActionId {
            domain: domain.to_string(),
            kind,
            slot: Some(slot.to_string()),
        }
    }

    pub fn answer_chit_chat() -> Self {
        Self::general(ActionKind::AnswerChitChat)
    }

    pub fn req_more() -> Self {
        Self::general(ActionKind::ReqMore)
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn kind(&self) -> ActionKind {
        self.kind
    }

    pub fn slot(&self) -> Option<&str> {
        self.slot.as_deref()
    }

    pub fn is_general(&self) -> bool {
        self.domain == GENERAL
    }
}

impl fmt::Display for AtomicActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.domain, self.kind.as_str())?;
        if let Some(slot) = &self.slot {
            write!(f, "-{slot}")?;
        }
        Ok(())
    }
}

impl FromStr for AtomicActionId {
    type Err = OntologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || OntologyError::BadActionId(s.to_string());
        let mut parts = s.split('-');
        let domain = parts.next().ok_or_else(bad)?;
        let kind: ActionKind = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let slot = parts.next();
        if parts.next().is_some() {
            return Err(bad());
        }
        let domain_ok = if kind.is_general() {
            domain == GENERAL
        } else {
            is_identifier(domain)
        };
        let slot_ok = match slot {
            Some(slot) => kind.takes_slot() && is_identifier(slot),
            None => !kind.takes_slot(),
        };
        if !domain_ok || !slot_ok {
            return Err(bad());
        }
        Ok(AtomicActionId {
            domain: domain.to_string(),
            kind,
            slot: slot.map(str::to_string),
        })
    }
}

impl Serialize for AtomicActionId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AtomicActionId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `[a-z0-9_]{1,32}`
pub fn is_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.len() <= MAX_IDENT_LEN
        && s.bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

#[derive(Debug, Serialize, Deserialize)]
struct OntologyDoc {
    domains: Vec<DomainSpec>,
}

/// A validated ontology with its derived action catalog.
#[derive(Debug, Clone)]
pub struct Ontology {
    domains: Vec<DomainSpec>,
    actions: Vec<AtomicActionId>,
    action_index: HashMap<AtomicActionId, usize>,
    slot_names: Vec<String>,
}

impl PartialEq for Ontology {
    fn eq(&self, other: &Self) -> bool {
        self.domains == other.domains
    }
}

impl Ontology {
    /// Build from already-parsed domains, validating every invariant.
    pub fn new(domains: Vec<DomainSpec>) -> Result<Self, OntologyError> {
        validate(&domains)?;
        let actions = enumerate_atomic_actions(&domains);
        let action_index = actions.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();
        let slot_names: BTreeSet<String> = domains
            .iter()
            .flat_map(|d| d.topics.iter())
            .flat_map(|t| t.slots.iter().map(|s| s.name.clone()))
            .collect();
        Ok(Ontology {
            domains,
            actions,
            action_index,
            slot_names: slot_names.into_iter().collect(),
        })
    }

    pub fn domains(&self) -> &[DomainSpec] {
        &self.domains
    }

    pub fn domain(&self, name: &str) -> Option<&DomainSpec> {
        self.domains.iter().find(|d| d.name == name)
    }

    pub fn topic(&self, domain: &str, topic: &str) -> Option<&TopicSpec> {
        self.domain(domain)?.topics.iter().find(|t| t.name == topic)
    }

    /// All `(domain, topic)` pairs in declaration order.
    pub fn topics(&self) -> impl Iterator<Item = (&DomainSpec, &TopicSpec)> {
        self.domains
            .iter()
            .flat_map(|d| d.topics.iter().map(move |t| (d, t)))
    }

    pub fn intent_catalog(&self) -> &'static [IntentKind; 9] {
        &IntentKind::ALL
    }

    /// Sorted action catalog.
    pub fn action_catalog(&self) -> &[AtomicActionId] {
        &self.actions
    }

    pub fn action_position(&self, id: &AtomicActionId) -> Option<usize> {
        self.action_index.get(id).copied()
    }

    pub fn contains_action(&self, id: &AtomicActionId) -> bool {
        self.action_index.contains_key(id)
    }

    /// Distinct slot names across all topics, sorted.
    pub fn slot_catalog(&self) -> &[String] {
        &self.slot_names
    }

    /// Total number of (domain, topic, slot) entries.
    pub fn total_slots(&self) -> usize {
        self.topics().map(|(_, t)| t.slots.len()).sum()
    }

    pub fn to_json(&self) -> String {
        let doc = OntologyDoc {
            domains: self.domains.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("ontology serializes")
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::json!({ "domains": self.domains })
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, OntologyError> {
        let doc: OntologyDoc =
            serde_json::from_value(value).map_err(|e| OntologyError::Schema(e.to_string()))?;
        Ontology::new(doc.domains)
    }

    /// Hex SHA-256 over the compact canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.to_value()).expect("ontology serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Parse and validate an ontology document.
pub fn load_ontology(source: &str) -> Result<Ontology, OntologyError> {
    let doc: OntologyDoc = serde_json::from_str(source).map_err(|e| OntologyError::Schema(e.to_string()))?;
    Ontology::new(doc.domains)
}

fn check_ident(path: &str, what: &str, name: &str) -> Result<(), OntologyError> {
    if !is_identifier(name) {
        return Err(OntologyError::invalid(
            path,
            format!("{what} `{name}` must match [a-z0-9_]{{1,32}}"),
        ));
    }
    if name == UNK {
        return Err(OntologyError::invalid(
            path,
            format!("{what} name `{UNK}` is reserved"),
        ));
    }
    Ok(())
}

fn validate(domains: &[DomainSpec]) -> Result<(), OntologyError> {
    let mut domain_names = BTreeSet::new();
    for domain in domains {
        let dpath = format!("domains.{}", domain.name);
        check_ident(&dpath, "domain", &domain.name)?;
        if !domain_names.insert(&domain.name) {
            return Err(OntologyError::invalid(dpath, "duplicate domain name"));
        }
        if domain.topics.is_empty() {
            return Err(OntologyError::invalid(dpath, "domain has no topics"));
        }
        let mut topic_names = BTreeSet::new();
        for topic in &domain.topics {
            let tpath = format!("{dpath}.topics.{}", topic.name);
            check_ident(&tpath, "topic", &topic.name)?;
            if !topic_names.insert(&topic.name) {
                return Err(OntologyError::invalid(tpath, "duplicate topic name"));
            }
            if topic.mandatory().next().is_none() {
                return Err(OntologyError::invalid(
                    tpath,
                    format!("topic `{}` has no mandatory slot", topic.name),
                ));
            }
            let mut slot_names = BTreeSet::new();
            for slot in &topic.slots {
                let spath = format!("{tpath}.slots.{}", slot.name);
                check_ident(&spath, "slot", &slot.name)?;
                if !slot_names.insert(&slot.name) {
                    return Err(OntologyError::invalid(spath, "duplicate slot name"));
                }
                if slot.values.is_empty() {
                    return Err(OntologyError::invalid(spath, "slot has no values"));
                }
                let mut values = BTreeSet::new();
                for value in &slot.values {
                    check_ident(&spath, "value", value)?;
                    if !values.insert(value) {
                        return Err(OntologyError::invalid(
                            &spath,
                            format!("duplicate value `{value}`"),
                        ));
                    }
                }
            }
            for (list, label) in [(&topic.emit.confirm, "confirm"), (&topic.emit.inform, "inform")] {
                let mut seen = BTreeSet::new();
                for slot in list {
                    let epath = format!("{tpath}.emit.{label}");
                    if !slot_names.contains(slot) {
                        return Err(OntologyError::invalid(epath, format!("unknown slot `{slot}`")));
                    }
                    if !seen.insert(slot) {
                        return Err(OntologyError::invalid(epath, format!("duplicate slot `{slot}`")));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Derive the sorted atomic action catalog from a list of domains.
///
/// Always contains `GENERAL-ANSWER_CHIT_CHAT`; `GENERAL-REQ_MORE` and one
/// `NOTIFY` per domain as soon as any domain exists; a `REQUEST` for every
/// mandatory or desired slot; `CONFIRM`/`INFORM` for the slots listed in each
/// topic's emission table.
pub fn enumerate_atomic_actions(domains: &[DomainSpec]) -> Vec<AtomicActionId> {
    let mut set = BTreeSet::new();
    set.insert(AtomicActionId::answer_chit_chat());
    if !domains.is_empty() {
        set.insert(AtomicActionId::req_more());
    }
    for domain in domains {
        set.insert(AtomicActionId::notify(&domain.name));
        for topic in &domain.topics {
            for slot in &topic.slots {
                if slot.category.is_requestable() {
                    set.insert(AtomicActionId::slotted(
                        &domain.name,
                        ActionKind::Request,
                        &slot.name,
                    ));
                }
            }
            for slot in &topic.emit.confirm {
                set.insert(AtomicActionId::slotted(&domain.name, ActionKind::Confirm, slot));
            }
            for slot in &topic.emit.inform {
                set.insert(AtomicActionId::slotted(&domain.name, ActionKind::Inform, slot));
            }
        }
    }
    let mut actions: Vec<_> = set.into_iter().collect();
    actions.sort_by_key(|a| a.to_string());
    actions
}
