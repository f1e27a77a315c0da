//! Helpers shared by the integration tests.
//!
//! `check_invariants` audits a traced dialogue from the outside: it only
//! looks at the user acts, the emitted action ids and the stack snapshots,
//! never at policy internals.

#![allow(dead_code)]

pub mod numeric;

use std::collections::BTreeMap;

use dialoforge::engine::{
    Dataset, DialogueStack, GeneratorConfig, Phase, TopicFrame, TracedDialogue, MAX_TURNS,
};
use dialoforge::ontology::{IntentKind, Ontology, SlotCategory};

const CHIT_CHAT_ANSWER: &str = "GENERAL-ANSWER_CHIT_CHAT";

fn parse_id(id: &str) -> (&str, &str, Option<&str>) {
    let mut parts = id.splitn(3, '-');
    let domain = parts.next().unwrap();
    let kind = parts.next().unwrap_or("");
    (domain, kind, parts.next())
}

fn mandatory_filled(ont: &Ontology, frame: &TopicFrame) -> bool {
    ont.topic(&frame.domain, &frame.topic)
        .unwrap()
        .mandatory()
        .all(|s| frame.fills[&s.name].is_some())
}

/// Every violated invariant of one dialogue, as readable messages.
pub fn check_invariants(ont: &Ontology, cfg: &GeneratorConfig, t: &TracedDialogue) -> Vec<String> {
    let mut v = Vec::new();
    let turns = &t.dialogue.turns;
    if turns.len() != t.stacks.len() {
        v.push("one stack snapshot per turn".into());
        return v;
    }
    if turns.is_empty() || turns.len() >= MAX_TURNS {
        v.push(format!("dialogue length {}", turns.len()));
    }
    match t.stacks.iter().position(DialogueStack::is_empty) {
        Some(i) if i + 1 == turns.len() => {}
        other => v.push(format!("stack first empty at {other:?}, {} turns", turns.len())),
    }

    // Frame instance ids aligned with the stack, plus desired requests per id.
    let mut ids: Vec<usize> = Vec::new();
    let mut next_id = 0;
    let mut desired_asked: BTreeMap<(usize, String), usize> = BTreeMap::new();
    let empty = DialogueStack::default();

    for (i, turn) in turns.iter().enumerate() {
        let prev = if i == 0 { &empty } else { &t.stacks[i - 1] };
        let cur = &t.stacks[i];
        let user = &turn.user_acts;
        let sys: Vec<&str> = turn.system_acts.iter().map(String::as_str).collect();
        let at = |m: String| format!("turn {i}: {m}");

        for a in &sys {
            if !ont.action_catalog().iter().any(|c| c.to_string() == *a) {
                v.push(at(format!("{a} not in the catalog")));
            }
        }
        if cur.depth() > cfg.max_stack_depth {
            v.push(at(format!("depth {} over the bound", cur.depth())));
        }

        let pushed = user.iter().any(|a| a.intent == IntentKind::InformIntent);
        let old_ids = ids.clone();
        ids.truncate(cur.depth().saturating_sub(usize::from(pushed)));
        if pushed {
            ids.push(next_id);
            next_id += 1;
        }
        if ids.len() != cur.depth() {
            v.push(at("stack depth does not follow the user's acts".into()));
            return v;
        }

        // Context preservation: frames below the top are untouched, and a
        // frame resumed by a pop keeps its fills. Its phase may still move,
        // since the rules address it in the same turn.
        for (j, id) in ids.iter().enumerate() {
            if old_ids.get(j) != Some(id) {
                continue;
            }
            let (a, b) = (&prev.frames[j], &cur.frames[j]);
            let was_top = j + 1 == prev.depth();
            let is_top = j + 1 == cur.depth();
            let intact = if was_top && is_top {
                true
            } else if is_top {
                a.fills == b.fills && a.requested_desired.is_subset(&b.requested_desired)
            } else {
                a == b
            };
            if !intact {
                v.push(at(format!("frame {j} changed while off the top")));
            }
        }

        let chit_chat = user.iter().any(|a| a.intent == IntentKind::ChitChat);
        if chit_chat && !sys.contains(&CHIT_CHAT_ANSWER) {
            v.push(at("chit-chat left unanswered".into()));
        }
        if !user.is_empty() && user.iter().all(|a| a.intent == IntentKind::ChitChat) {
            if sys != [CHIT_CHAT_ANSWER] || prev != cur {
                v.push(at("pure chit-chat turn must only be answered".into()));
            }
            continue;
        }

        let top = cur.top();
        let top_spec = top.map(|f| ont.topic(&f.domain, &f.topic).unwrap());
        let informed: Vec<&str> = user
            .iter()
            .filter(|a| a.intent == IntentKind::Inform)
            .filter_map(|a| a.slot.as_deref())
            .collect();

        // CONFIRM answers an INFORM of the same turn, and every confirmable
        // INFORM gets one.
        let confirmed: Vec<&str> = sys
            .iter()
            .map(|a| parse_id(a))
            .filter(|(_, k, _)| *k == "CONFIRM")
            .filter_map(|(_, _, s)| s)
            .collect();
        for s in &confirmed {
            if !informed.contains(s) {
                v.push(at(format!("CONFIRM-{s} without INFORM")));
            }
        }
        // INFORMs land on the pushed frame, else on the frame on top before
        // any closing pop.
        let receiver = if pushed { top } else { prev.top() };
        if let Some(frame) = receiver {
            let spec = ont.topic(&frame.domain, &frame.topic).unwrap();
            for s in &informed {
                if spec.confirms(s) && !confirmed.contains(s) {
                    v.push(at(format!("INFORM({s}) not confirmed")));
                }
            }
        }

        for a in &sys {
            let (domain, kind, slot) = parse_id(a);
            match kind {
                "REQUEST" => {
                    let (Some(frame), Some(spec)) = (top, top_spec) else {
                        v.push(at(format!("{a} on an empty stack")));
                        continue;
                    };
                    let slot = slot.unwrap_or("");
                    let Some(s) = spec.slot(slot).filter(|_| frame.domain == domain) else {
                        v.push(at(format!("{a} does not address the top frame")));
                        continue;
                    };
                    match s.category {
                        SlotCategory::Optional => v.push(at(format!("OPTIONAL slot requested: {a}"))),
                        SlotCategory::Desired => {
                            let n = desired_asked
                                .entry((ids[ids.len() - 1], slot.to_string()))
                                .or_default();
                            *n += 1;
                            if *n > 1 {
                                v.push(at(format!("desired slot asked twice: {a}")));
                            }
                        }
                        SlotCategory::Mandatory => {}
                    }
                    if frame.fills[slot].is_some() {
                        v.push(at(format!("{a} for a filled slot")));
                    }
                }
                "NOTIFY" => match top {
                    Some(frame) if frame.domain == domain => {
                        if !mandatory_filled(ont, frame) {
                            v.push(at("NOTIFY with a mandatory slot empty".into()));
                        }
                        if frame.phase != Phase::Notified {
                            v.push(at("NOTIFY without entering the notified phase".into()));
                        }
                    }
                    _ => v.push(at(format!("{a} does not address the top frame"))),
                },
                _ => {}
            }
        }

        // NOTIFY is emitted exactly when the top frame becomes notified.
        if let Some(frame) = top {
            let same_frame = !pushed && cur.depth() == prev.depth();
            let was_notified = same_frame && prev.top().unwrap().phase == Phase::Notified;
            let notified_now = frame.phase == Phase::Notified && !was_notified;
            let has_notify = sys.iter().any(|a| parse_id(a).1 == "NOTIFY");
            if notified_now != has_notify {
                v.push(at(format!(
                    "NOTIFY emitted={has_notify} but frame became notified={notified_now}"
                )));
            }
        }
        // Frames leave the stack only once wrapped up.
        if cur.depth() < prev.depth() + usize::from(pushed) {
            let left = &prev.frames[prev.depth() - 1];
            if left.phase != Phase::Wrapup {
                v.push(at(format!("frame popped in phase {}", left.phase)));
            }
        }
    }

    for (turn, kind) in &t.dialogue.events_log {
        if turns.get(*turn).and_then(|x| x.event) != Some(*kind) {
            v.push(format!(
                "events_log entry ({turn}, {kind:?}) does not match the turn"
            ));
        }
    }
    let tagged = turns.iter().filter(|x| x.event.is_some()).count();
    if tagged != t.dialogue.events_log.len() {
        v.push("events_log misses tagged turns".into());
    }
    v
}

/// Run the CLI binary with a clean seed environment.
pub fn run_cli(args: &[&str], envs: &[(&str, &str)]) -> std::process::Output {
    let mut cmd = std::process::Command::new(env!("CARGO_BIN_EXE_dialoforge"));
    cmd.args(args)
        .env_remove("DIALOFORGE_SEED")
        .env_remove("SOURCE_DATE_EPOCH")
        .env("RUST_LOG", "warn");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("CLI binary runs")
}

/// Run the CLI and require success.
pub fn cli_ok(args: &[&str]) -> std::process::Output {
    let out = run_cli(args, &[]);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Every file under `dir`, keyed by relative path.
pub fn dir_contents(dir: &std::path::Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &std::path::Path, dir: &std::path::Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// Every label of the dataset in a fixed order, per category.
pub fn labels(ds: &Dataset) -> [Vec<String>; 3] {
    let mut out: [Vec<String>; 3] = Default::default();
    for d in ds.dialogues() {
        for t in &d.turns {
            for a in &t.user_acts {
                out[0].push(a.intent.as_str().to_string());
                if let Some(s) = &a.slot {
                    out[2].push(s.clone());
                }
            }
            out[1].extend(t.system_acts.iter().cloned());
        }
    }
    out
}

/// Number of positions whose label differs, per category.
pub fn diff_counts(a: &Dataset, b: &Dataset) -> [usize; 3] {
    let (la, lb) = (labels(a), labels(b));
    let mut out = [0; 3];
    for k in 0..3 {
        assert_eq!(la[k].len(), lb[k].len());
        out[k] = la[k].iter().zip(&lb[k]).filter(|(x, y)| x != y).count();
    }
    out
}
