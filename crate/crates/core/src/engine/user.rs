//! Seeded user simulator: a scripted goal perturbed by per-turn events.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::ontology::{ActionKind, AtomicActionId, IntentKind, Ontology, SlotCategory};
use crate::rng::StageRng;

use super::{DialogueStack, EventKind, GeneratorConfig, Phase, UserAct};

/// What the user wants from one topic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskGoal {
    pub domain: String,
    pub topic: String,
    pub values: BTreeMap<String, String>,
    /// Order in which the user volunteers information.
    pub volunteer_order: Vec<String>,
    pub follow_up: Option<Box<TaskGoal>>,
    /// Set once a domain change has interrupted this task.
    pub interrupted: bool,
}

impl TaskGoal {
    /// Draw a goal for one topic. Mandatory slots are always wanted; desired
    /// and optional slots each with probability one half.
    pub fn draw(ontology: &Ontology, domain: &str, topic: &str, rng: &mut StageRng) -> Self {
        let spec = ontology.topic(domain, topic).expect("goal topic exists");
        let mut values = BTreeMap::new();
        for slot in &spec.slots {
            let wanted = slot.category == SlotCategory::Mandatory || rng.random::<f64>() < 0.5;
            if wanted {
                let value = &slot.values[rng.random_range(0..slot.values.len())];
                values.insert(slot.name.clone(), value.clone());
            }
        }
        let mut volunteer_order: Vec<String> = values.keys().cloned().collect();
        volunteer_order.shuffle(rng);
        TaskGoal {
            domain: domain.to_string(),
            topic: topic.to_string(),
            values,
            volunteer_order,
            follow_up: None,
            interrupted: false,
        }
    }

    /// A fully specified goal with no randomness, mainly for tests.
    pub fn scripted(domain: &str, topic: &str, values: &[(&str, &str)]) -> Self {
        TaskGoal {
            domain: domain.to_string(),
            topic: topic.to_string(),
            values: values
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            volunteer_order: values.iter().map(|(k, _)| k.to_string()).collect(),
            follow_up: None,
            interrupted: false,
        }
    }
}

/// The user's side of the conversation: a goal stack aligned with the
/// dialogue stack plus the slot the system last asked for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserGoal {
    root: Option<TaskGoal>,
    pub tasks: Vec<TaskGoal>,
    pub pending_request: Option<String>,
}

impl UserGoal {
    pub fn new(root: TaskGoal) -> Self {
        UserGoal {
            root: Some(root),
            tasks: Vec::new(),
            pending_request: None,
        }
    }

    /// Goal already in progress (used to start mid-dialogue in tests).
    pub fn in_progress(tasks: Vec<TaskGoal>, pending_request: Option<&str>) -> Self {
        UserGoal {
            root: None,
            tasks,
            pending_request: pending_request.map(str::to_string),
        }
    }

    /// Draw a root task uniformly over all topics, with an optional
    /// follow-up task in the same domain.
    pub fn draw(ontology: &Ontology, cfg: &GeneratorConfig, rng: &mut StageRng) -> Self {
        let topics: Vec<(String, String)> = ontology
            .topics()
            .map(|(d, t)| (d.name.clone(), t.name.clone()))
            .collect();
        let (domain, topic) = &topics[rng.random_range(0..topics.len())];
        let mut root = TaskGoal::draw(ontology, domain, topic, rng);
        if rng.random::<f64>() < cfg.p_follow_up {
            let same_domain = &ontology.domain(domain).unwrap().topics;
            let next = &same_domain[rng.random_range(0..same_domain.len())].name;
            root.follow_up = Some(Box::new(TaskGoal::draw(ontology, domain, next, rng)));
        }
        UserGoal::new(root)
    }

    /// Record the system's reply so the next answer targets the right slot.
    pub fn observe(&mut self, system_acts: &[AtomicActionId]) {
        let only_chit_chat = system_acts.iter().all(|a| a.kind() == ActionKind::AnswerChitChat);
        if only_chit_chat {
            return;
        }
        self.pending_request = system_acts
            .iter()
            .rev()
            .find(|a| a.kind() == ActionKind::Request)
            .and_then(|a| a.slot().map(str::to_string));
    }
}

fn volunteer(
    task: &TaskGoal,
    stack_top_filled: &dyn Fn(&str) -> bool,
    skip: Option<&str>,
    max: usize,
) -> Vec<UserAct> {
    task.volunteer_order
        .iter()
        .filter(|s| Some(s.as_str()) != skip && !stack_top_filled(s))
        .take(max)
        .map(|s| UserAct::inform(s, &task.values[s]))
        .collect()
}

/// How many extra slots to volunteer: one with `p`, a second with `p` again.
fn volunteer_count(rng: &mut StageRng, p: f64) -> usize {
    let mut n = 0;
    if rng.random::<f64>() < p {
        n += 1;
        if rng.random::<f64>() < p {
            n += 1;
        }
    }
    n
}

/// Produce the user's acts for the next turn.
///
/// Three uniforms are drawn every turn for the chit-chat, mind-change and
/// domain-change events, evaluated in that order; the first one that fires
/// and is applicable wins. Mind and domain changes only interrupt a frame
/// that is still collecting slots.
pub fn sample_user_turn(
    ontology: &Ontology,
    stack: &DialogueStack,
    goal: &mut UserGoal,
    rng: &mut StageRng,
    cfg: &GeneratorConfig,
) -> (Vec<UserAct>, Option<EventKind>) {
    let Some(frame) = stack.top() else {
        return match goal.root.take() {
            Some(root) => {
                let n = volunteer_count(rng, cfg.p_volunteer);
                let mut acts = vec![UserAct::inform_intent(&root.domain, &root.topic)];
                acts.extend(volunteer(&root, &|_| false, None, n));
                goal.tasks.push(root);
                (acts, None)
            }
            None => (vec![UserAct::bare(IntentKind::Goodbye)], None),
        };
    };

    let draws: [f64; 3] = [rng.random(), rng.random(), rng.random()];
    let eliciting = frame.phase == Phase::Eliciting;

    if draws[0] < cfg.p_chitchat {
        return (
            vec![UserAct::bare(IntentKind::ChitChat)],
            Some(EventKind::ChitChat),
        );
    }

    let filled: Vec<&str> = frame.filled_slots().collect();
    if draws[1] < cfg.p_mind_change && eliciting && !filled.is_empty() {
        let slot = filled[rng.random_range(0..filled.len())].to_string();
        let spec = ontology.topic(&frame.domain, &frame.topic).unwrap();
        let slot_spec = spec.slot(&slot).unwrap();
        let current = frame.fills[&slot].clone().unwrap();
        let alternatives: Vec<&String> = slot_spec.values.iter().filter(|v| **v != current).collect();
        let task = goal
            .tasks
            .last_mut()
            .expect("goal stack follows the dialogue stack");
        let act = if alternatives.is_empty() || rng.random::<f64>() < 0.5 {
            if slot_spec.category == SlotCategory::Mandatory {
                let fresh = &slot_spec.values[rng.random_range(0..slot_spec.values.len())];
                task.values.insert(slot.clone(), fresh.clone());
            } else {
                task.values.remove(&slot);
                task.volunteer_order.retain(|s| *s != slot);
            }
            UserAct::clear(&slot)
        } else {
            let value = alternatives[rng.random_range(0..alternatives.len())].clone();
            task.values.insert(slot.clone(), value.clone());
            if !task.volunteer_order.contains(&slot) {
                task.volunteer_order.push(slot.clone());
            }
            UserAct::inform(&slot, &value)
        };
        return (vec![act], Some(EventKind::MindChange));
    }

    let task_interrupted = goal.tasks.last().is_some_and(|t| t.interrupted);
    if draws[2] < cfg.p_domain_change && eliciting && stack.depth() < cfg.max_stack_depth && !task_interrupted
    {
        let candidates: Vec<(String, String)> = ontology
            .topics()
            .filter(|(d, t)| {
                !stack
                    .frames
                    .iter()
                    .any(|f| f.domain == d.name && f.topic == t.name)
            })
            .map(|(d, t)| (d.name.clone(), t.name.clone()))
            .collect();
        if !candidates.is_empty() {
            let (domain, topic) = &candidates[rng.random_range(0..candidates.len())];
            let task = TaskGoal::draw(ontology, domain, topic, rng);
            let n = volunteer_count(rng, cfg.p_volunteer);
            let mut acts = vec![UserAct::inform_intent(domain, topic)];
            acts.extend(volunteer(&task, &|_| false, None, n));
            goal.tasks.last_mut().unwrap().interrupted = true;
            goal.tasks.push(task);
            return (acts, Some(EventKind::DomainChange));
        }
    }

    (scripted_turn(stack, goal, rng, cfg), None)
}

fn scripted_turn(
    stack: &DialogueStack,
    goal: &mut UserGoal,
    rng: &mut StageRng,
    cfg: &GeneratorConfig,
) -> Vec<UserAct> {
    let frame = stack.top().unwrap();
    match frame.phase {
        Phase::Eliciting => {
            let task = goal.tasks.last().expect("goal stack follows the dialogue stack");
            let is_filled = |s: &str| frame.is_filled(s);
            let pending = goal
                .pending_request
                .as_deref()
                .filter(|s| frame.fills.contains_key(*s) && !frame.is_filled(s));
            match pending {
                Some(slot) => match task.values.get(slot) {
                    Some(value) => {
                        let mut acts = vec![UserAct::inform(slot, value)];
                        if rng.random::<f64>() < cfg.p_volunteer {
                            acts.extend(volunteer(task, &is_filled, Some(slot), 1));
                        }
                        acts
                    }
                    None => vec![UserAct::bare(IntentKind::Negate)],
                },
                None => {
                    let n = 1 + usize::from(rng.random::<f64>() < cfg.p_volunteer);
                    let acts = volunteer(task, &is_filled, None, n);
                    if acts.is_empty() {
                        vec![UserAct::bare(IntentKind::Negate)]
                    } else {
                        acts
                    }
                }
            }
        }
        Phase::Notified => vec![UserAct::bare(IntentKind::Thank)],
        Phase::Wrapup => {
            let mut task = goal.tasks.pop().expect("goal stack follows the dialogue stack");
            if let Some(next) = task.follow_up.take() {
                let n = volunteer_count(rng, cfg.p_volunteer);
                let mut acts = vec![
                    UserAct::bare(IntentKind::Affirm),
                    UserAct::inform_intent(&next.domain, &next.topic),
                ];
                acts.extend(volunteer(&next, &|_| false, None, n));
                goal.tasks.push(*next);
                acts
            } else if stack.depth() > 1 {
                vec![UserAct::bare(IntentKind::Negate)]
            } else {
                vec![
                    UserAct::bare(IntentKind::Negate),
                    UserAct::bare(IntentKind::Thank),
                    UserAct::bare(IntentKind::Goodbye),
                ]
            }
        }
    }
}
