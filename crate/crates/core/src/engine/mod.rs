//! Dialogue generation: a seeded user simulator talking to the rule-based
//! policy, which operates on a stack of topic frames.

mod generate;
mod policy;
mod user;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::{IntentKind, TopicSpec};

pub use generate::{
    generate_dataset, generate_dialogue, generate_traced, split_sizes, Dataset, DatasetInfo, Split,
    TracedDialogue, MAX_TURNS,
};
pub use policy::{select_actions, step_policy, track_user_acts, ReplayMode, TurnUpdate};
pub use user::{sample_user_turn, TaskGoal, UserGoal};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("slot-bearing act with an empty stack")]
    EmptyStack,
    #[error("act references unknown {what} `{name}`")]
    UnknownReference { what: &'static str, name: String },
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("dialogue {index} exceeded {turns} turns")]
    GenerationOverflow { index: usize, turns: usize },
}

/// One user dialogue act.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserAct {
    pub intent: IntentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

impl UserAct {
    pub fn bare(intent: IntentKind) -> Self {
        UserAct {
            intent,
            domain: None,
            topic: None,
            slot: None,
            value: None,
        }
    }

    pub fn inform_intent(domain: &str, topic: &str) -> Self {
        UserAct {
            domain: Some(domain.to_string()),
            topic: Some(topic.to_string()),
            ..Self::bare(IntentKind::InformIntent)
        }
    }

    pub fn inform(slot: &str, value: &str) -> Self {
        UserAct {
            slot: Some(slot.to_string()),
            value: Some(value.to_string()),
            ..Self::bare(IntentKind::Inform)
        }
    }

    /// INFORM without a value: the user withdraws a slot.
    pub fn clear(slot: &str) -> Self {
        UserAct {
            slot: Some(slot.to_string()),
            ..Self::bare(IntentKind::Inform)
        }
    }

    pub fn request(slot: &str) -> Self {
        UserAct {
            slot: Some(slot.to_string()),
            ..Self::bare(IntentKind::Request)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ChitChat,
    MindChange,
    DomainChange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Eliciting,
    Notified,
    Wrapup,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Eliciting, Phase::Notified, Phase::Wrapup];
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Eliciting => "eliciting",
            Phase::Notified => "notified",
            Phase::Wrapup => "wrapup",
        })
    }
}

/// Context for one topic. Survives untouched while other frames sit above it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicFrame {
    pub domain: String,
    pub topic: String,
    pub fills: BTreeMap<String, Option<String>>,
    pub requested_desired: BTreeSet<String>,
    pub phase: Phase,
}

impl TopicFrame {
    pub fn new(domain: &str, spec: &TopicSpec) -> Self {
        TopicFrame {
            domain: domain.to_string(),
            topic: spec.name.clone(),
            fills: spec.slots.iter().map(|s| (s.name.clone(), None)).collect(),
            requested_desired: BTreeSet::new(),
            phase: Phase::Eliciting,
        }
    }

    pub fn is_filled(&self, slot: &str) -> bool {
        matches!(self.fills.get(slot), Some(Some(_)))
    }

    pub fn filled_slots(&self) -> impl Iterator<Item = &str> {
        self.fills
            .iter()
            .filter(|(_, v)| v.is_some())
            .map(|(k, _)| k.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DialogueStack {
    pub frames: Vec<TopicFrame>,
}

impl DialogueStack {
    pub fn depth(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn top(&self) -> Option<&TopicFrame> {
        self.frames.last()
    }

    pub fn top_mut(&mut self) -> Option<&mut TopicFrame> {
        self.frames.last_mut()
    }

    pub fn push(&mut self, frame: TopicFrame) {
        self.frames.push(frame);
    }

    pub fn pop(&mut self) -> Option<TopicFrame> {
        self.frames.pop()
    }
}

/// One exchange: the user's acts and the system's gold atomic actions.
///
/// System acts are kept as label strings so perturbed datasets (with `unk`
/// or relabeled ids) share the same container.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueTurn {
    pub user_acts: Vec<UserAct>,
    pub system_acts: Vec<String>,
    pub event: Option<EventKind>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialogue {
    pub id: String,
    pub seed: u64,
    pub turns: Vec<DialogueTurn>,
    pub events_log: Vec<(usize, EventKind)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_dialogues: usize,
    pub p_chitchat: f64,
    pub p_mind_change: f64,
    pub p_domain_change: f64,
    pub max_stack_depth: usize,
    pub seed: u64,
    pub split_fractions: [f64; 3],
    /// Chance of volunteering an extra slot alongside an answer.
    pub p_volunteer: f64,
    /// Chance that a dialogue goal carries a second task in the same domain.
    pub p_follow_up: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_dialogues: 2000,
            p_chitchat: 0.2,
            p_mind_change: 0.2,
            p_domain_change: 0.2,
            max_stack_depth: 2,
            seed: 0,
            split_fractions: [0.6, 0.2, 0.2],
            p_volunteer: 0.25,
            p_follow_up: 0.2,
        }
    }
}

impl GeneratorConfig {
    /// Same config with every event switched off.
    pub fn events_off(mut self) -> Self {
        self.p_chitchat = 0.0;
        self.p_mind_change = 0.0;
        self.p_domain_change = 0.0;
        self
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::InvalidConfig(m));
        if self.n_dialogues == 0 {
            return bad("n_dialogues must be positive".into());
        }
        if self.max_stack_depth == 0 {
            return bad("max_stack_depth must be positive".into());
        }
        for (name, p) in [
            ("p_chitchat", self.p_chitchat),
            ("p_mind_change", self.p_mind_change),
            ("p_domain_change", self.p_domain_change),
            ("p_volunteer", self.p_volunteer),
            ("p_follow_up", self.p_follow_up),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name}={p} is outside [0, 1]"));
            }
        }
        if self.split_fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return bad("split fractions must lie in [0, 1]".into());
        }
        let sum: f64 = self.split_fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("split fractions sum to {sum}, expected 1"));
        }
        Ok(())
    }
}
