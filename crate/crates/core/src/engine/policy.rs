//! The rule-based dialogue policy.
//!
//! A policy step is split into two halves so the encoder can snapshot the
//! tracked state between them:
//!
//! * [`track_user_acts`] applies the user's acts to the stack (push, fill,
//!   pop), the way a state tracker would;
//! * [`select_actions`] applies the action rules to the resulting top frame.
//!
//! Rule order inside a step: chit-chat answer, CONFIRM per INFORM, INFORM
//! per user REQUEST, then exactly one of REQUEST (mandatory first, then
//! not-yet-asked desired), NOTIFY, or REQ_MORE. Closing acts in the wrap-up
//! phase pop the frame before the rules run, so the resumed frame is
//! addressed in the same turn.

use crate::ontology::{ActionKind, AtomicActionId, IntentKind, Ontology, SlotCategory};

use super::{DialogueStack, EngineError, Phase, TopicFrame, UserAct};

/// How to treat acts that do not fit the current context.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayMode {
    /// Reject them (generation).
    Strict,
    /// Ignore them (replaying possibly perturbed data).
    Lenient,
}

/// What the user's acts did to the stack in one turn.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TurnUpdate {
    pub chit_chat: bool,
    pub only_chit_chat: bool,
    pub pushed: bool,
    pub popped: bool,
    pub stack_emptied: bool,
    /// Slots of the top frame whose value changed this turn.
    pub changed: Vec<String>,
    pub confirms: Vec<AtomicActionId>,
    pub informs: Vec<AtomicActionId>,
}

impl TurnUpdate {
    /// True when the top of the stack now holds a different frame than
    /// before the turn.
    pub fn top_replaced(&self) -> bool {
        self.pushed || self.popped
    }
}

fn has(acts: &[UserAct], kind: IntentKind) -> bool {
    acts.iter().any(|a| a.intent == kind)
}

/// Apply one turn of user acts to the stack.
pub fn track_user_acts(
    ontology: &Ontology,
    stack: &mut DialogueStack,
    acts: &[UserAct],
    mode: ReplayMode,
) -> Result<TurnUpdate, EngineError> {
    let strict = mode == ReplayMode::Strict;
    let mut update = TurnUpdate {
        chit_chat: has(acts, IntentKind::ChitChat),
        ..TurnUpdate::default()
    };
    if !acts.is_empty() && acts.iter().all(|a| a.intent == IntentKind::ChitChat) {
        update.only_chit_chat = true;
        return Ok(update);
    }

    if let Some(act) = acts.iter().find(|a| a.intent == IntentKind::InformIntent) {
        let target = match (&act.domain, &act.topic) {
            (Some(d), Some(t)) => ontology.topic(d, t).map(|spec| (d.as_str(), spec)),
            _ => None,
        };
        match target {
            Some((domain, spec)) => {
                let replaces =
                    has(acts, IntentKind::Affirm) && stack.top().is_some_and(|f| f.phase == Phase::Wrapup);
                if replaces {
                    stack.pop();
                }
                stack.push(TopicFrame::new(domain, spec));
                update.pushed = true;
            }
            None if strict => {
                return Err(EngineError::UnknownReference {
                    what: "topic",
                    name: format!(
                        "{}/{}",
                        act.domain.as_deref().unwrap_or("?"),
                        act.topic.as_deref().unwrap_or("?")
                    ),
                })
            }
            None => {}
        }
    }

    for act in acts {
        let (is_inform, is_request) = match act.intent {
            IntentKind::Inform => (true, false),
            IntentKind::Request => (false, true),
            _ => continue,
        };
        let Some(frame) = stack.top_mut() else {
            if strict {
                return Err(EngineError::EmptyStack);
            }
            continue;
        };
        let spec = ontology
            .topic(&frame.domain, &frame.topic)
            .expect("frames are built from ontology topics");
        let slot = match act.slot.as_deref() {
            Some(slot) if spec.slot(slot).is_some() => slot,
            other => {
                if strict {
                    return Err(EngineError::UnknownReference {
                        what: "slot",
                        name: other.unwrap_or("<none>").to_string(),
                    });
                }
                continue;
            }
        };
        if is_inform {
            if strict {
                if let Some(value) = &act.value {
                    if !spec.slot(slot).unwrap().values.contains(value) {
                        return Err(EngineError::UnknownReference {
                            what: "value",
                            name: value.clone(),
                        });
                    }
                }
            }
            let entry = frame.fills.get_mut(slot).unwrap();
            if *entry != act.value {
                *entry = act.value.clone();
                if !update.changed.iter().any(|s| s == slot) {
                    update.changed.push(slot.to_string());
                }
            }
            if spec.confirms(slot) {
                update
                    .confirms
                    .push(AtomicActionId::slotted(&frame.domain, ActionKind::Confirm, slot));
            }
        } else if is_request && spec.informs(slot) {
            update
                .informs
                .push(AtomicActionId::slotted(&frame.domain, ActionKind::Inform, slot));
        }
    }

    let closing =
        has(acts, IntentKind::Negate) || has(acts, IntentKind::Thank) || has(acts, IntentKind::Goodbye);
    if closing && !update.pushed && stack.top().is_some_and(|f| f.phase == Phase::Wrapup) {
        stack.pop();
        update.popped = true;
        update.stack_emptied = stack.is_empty();
        update.changed.clear();
    }
    Ok(update)
}

/// Apply the action rules to the top frame after [`track_user_acts`].
pub fn select_actions(
    ontology: &Ontology,
    stack: &mut DialogueStack,
    update: &TurnUpdate,
) -> Vec<AtomicActionId> {
    let mut out = Vec::new();
    let emit = |id: AtomicActionId, out: &mut Vec<AtomicActionId>| {
        if !out.contains(&id) {
            out.push(id);
        }
    };
    if update.chit_chat {
        emit(AtomicActionId::answer_chit_chat(), &mut out);
    }
    if update.only_chit_chat {
        return out;
    }
    for id in update.confirms.iter().chain(&update.informs) {
        emit(id.clone(), &mut out);
    }

    match stack.top_mut() {
        Some(frame) => {
            let spec = ontology
                .topic(&frame.domain, &frame.topic)
                .expect("frames are built from ontology topics");
            let missing_mandatory = spec
                .mandatory()
                .find(|s| !frame.is_filled(&s.name))
                .map(|s| s.name.clone());
            let unasked_desired = spec
                .slots
                .iter()
                .filter(|s| s.category == SlotCategory::Desired)
                .find(|s| !frame.is_filled(&s.name) && !frame.requested_desired.contains(&s.name))
                .map(|s| s.name.clone());
            if let Some(slot) = missing_mandatory {
                frame.phase = Phase::Eliciting;
                emit(
                    AtomicActionId::slotted(&frame.domain, ActionKind::Request, &slot),
                    &mut out,
                );
            } else if let Some(slot) = unasked_desired {
                emit(
                    AtomicActionId::slotted(&frame.domain, ActionKind::Request, &slot),
                    &mut out,
                );
                frame.requested_desired.insert(slot);
            } else {
                match frame.phase {
                    Phase::Eliciting => {
                        emit(AtomicActionId::notify(&frame.domain), &mut out);
                        frame.phase = Phase::Notified;
                    }
                    Phase::Notified => {
                        emit(AtomicActionId::req_more(), &mut out);
                        frame.phase = Phase::Wrapup;
                    }
                    Phase::Wrapup => {}
                }
            }
        }
        None if update.stack_emptied => {
            // Farewell once the last task is closed: the only domain-free reply.
            emit(AtomicActionId::answer_chit_chat(), &mut out);
        }
        None => {}
    }
    out
}

/// One full policy step in strict mode.
pub fn step_policy(
    ontology: &Ontology,
    stack: &mut DialogueStack,
    user_acts: &[UserAct],
) -> Result<Vec<AtomicActionId>, EngineError> {
    let update = track_user_acts(ontology, stack, user_acts, ReplayMode::Strict)?;
    Ok(select_actions(ontology, stack, &update))
}
