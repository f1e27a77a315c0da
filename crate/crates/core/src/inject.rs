//! Seeded label noise: relabeling and UNK substitution of user intents,
//! system actions and slot names, with an audit log that can undo it.
//!
//! Every element consumes the same three uniforms (hit, mode, replacement)
//! whether or not it is perturbed, so with a fixed seed the set perturbed at
//! rate `p` is contained in the set perturbed at any rate above `p`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Dataset, Dialogue, Split};
use crate::ontology::{IntentKind, Ontology, UNK};
use crate::rng::{derive_seed, seeded, StageRng};

#[derive(Debug, Error)]
pub enum InjectError {
    #[error("relabeling needs at least 2 catalog entries, got {0}")]
    CatalogTooSmall(usize),
    #[error("{kind} label `{label}` in dialogue {dialogue} turn {turn} is not in the ontology")]
    UnknownLabel {
        kind: ElementKind,
        label: String,
        dialogue: String,
        turn: usize,
    },
    #[error("invalid error config: {0}")]
    InvalidConfig(String),
    #[error("perturbation record does not match the dataset: {0}")]
    RecordMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ElementKind {
    Intent,
    Action,
    Slot,
}

impl ElementKind {
    pub const ALL: [ElementKind; 3] = [ElementKind::Intent, ElementKind::Action, ElementKind::Slot];

    fn tag(self) -> &'static str {
        match self {
            ElementKind::Intent => "inject-intent",
            ElementKind::Action => "inject-action",
            ElementKind::Slot => "inject-slot",
        }
    }
}

impl std::fmt::Display for ElementKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ElementKind::Intent => "intent",
            ElementKind::Action => "action",
            ElementKind::Slot => "slot",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PerturbMode {
    Relabel,
    Unk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorConfig {
    pub p_intent: f64,
    pub p_action: f64,
    pub p_slot: f64,
    /// (relabel, unk) weights for choosing the mode of a hit.
    pub mode_weights: (f64, f64),
    pub seed: u64,
    /// Leave val and test untouched.
    #[serde(default)]
    pub train_only: bool,
}

impl Default for ErrorConfig {
    fn default() -> Self {
        ErrorConfig {
            p_intent: 0.0,
            p_action: 0.0,
            p_slot: 0.0,
            mode_weights: (0.5, 0.5),
            seed: 0,
            train_only: false,
        }
    }
}

impl ErrorConfig {
    /// Same probability for all three categories.
    pub fn uniform(rate: f64, seed: u64) -> Self {
        ErrorConfig {
            p_intent: rate,
            p_action: rate,
            p_slot: rate,
            seed,
            ..ErrorConfig::default()
        }
    }

    pub fn probability(&self, kind: ElementKind) -> f64 {
        match kind {
            ElementKind::Intent => self.p_intent,
            ElementKind::Action => self.p_action,
            ElementKind::Slot => self.p_slot,
        }
    }

    pub fn validate(&self) -> Result<(), InjectError> {
        for kind in ElementKind::ALL {
            let p = self.probability(kind);
            if !(0.0..=1.0).contains(&p) {
                return Err(InjectError::InvalidConfig(format!(
                    "p_{kind}={p} is outside [0, 1]"
                )));
            }
        }
        let (r, u) = self.mode_weights;
        if !(r.is_finite() && u.is_finite()) || r < 0.0 || u < 0.0 || r + u == 0.0 {
            return Err(InjectError::InvalidConfig(format!(
                "mode weights ({r}, {u}) must be non-negative and not both zero"
            )));
        }
        Ok(())
    }

    fn relabel_share(&self) -> f64 {
        let (r, u) = self.mode_weights;
        r / (r + u)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationRecord {
    pub split: Split,
    pub dialogue: String,
    pub turn: usize,
    pub kind: ElementKind,
    /// Index of the user act (intent, slot) or system act (action) in the turn.
    pub position: usize,
    pub original: String,
    pub new: String,
    pub mode: PerturbMode,
}

/// Per-category counts of one injection run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub total: usize,
    pub perturbed: usize,
    pub relabeled: usize,
    pub unk: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionStats {
    pub intent: CategoryStats,
    pub action: CategoryStats,
    pub slot: CategoryStats,
}

impl InjectionStats {
    pub fn get(&self, kind: ElementKind) -> &CategoryStats {
        match kind {
            ElementKind::Intent => &self.intent,
            ElementKind::Action => &self.action,
            ElementKind::Slot => &self.slot,
        }
    }

    fn get_mut(&mut self, kind: ElementKind) -> &mut CategoryStats {
        match kind {
            ElementKind::Intent => &mut self.intent,
            ElementKind::Action => &mut self.action,
            ElementKind::Slot => &mut self.slot,
        }
    }

    fn merge(mut self, other: InjectionStats) -> Self {
        for kind in ElementKind::ALL {
            let a = self.get_mut(kind);
            let b = other.get(kind);
            a.total += b.total;
            a.perturbed += b.perturbed;
            a.relabeled += b.relabeled;
            a.unk += b.unk;
        }
        self
    }
}

/// Replace `label`: a uniform draw from `catalog` minus `label` for RELABEL,
/// the reserved UNK token otherwise.
pub fn perturb_label<R: Rng + ?Sized>(
    label: &str,
    catalog: &[&str],
    rng: &mut R,
    mode: PerturbMode,
) -> Result<String, InjectError> {
    match mode {
        PerturbMode::Unk => Ok(UNK.to_string()),
        PerturbMode::Relabel => {
            if catalog.len() < 2 {
                return Err(InjectError::CatalogTooSmall(catalog.len()));
            }
            Ok(relabel(label, catalog, rng.random::<f64>()).to_string())
        }
    }
}

/// Pick from `catalog \ {label}` with the uniform `u` in [0, 1).
fn relabel<'a>(label: &str, catalog: &[&'a str], u: f64) -> &'a str {
    let skip = catalog.iter().position(|c| *c == label);
    let n = catalog.len() - usize::from(skip.is_some());
    let mut k = ((u * n as f64) as usize).min(n - 1);
    if let Some(s) = skip {
        if k >= s {
            k += 1;
        }
    }
    catalog[k]
}

struct Catalogs {
    intents: Vec<&'static str>,
    actions: Vec<String>,
    slots: Vec<String>,
}

impl Catalogs {
    fn new(ontology: &Ontology) -> Self {
        Catalogs {
            intents: IntentKind::ALL.iter().map(|k| k.as_str()).collect(),
            actions: ontology.action_catalog().iter().map(|a| a.to_string()).collect(),
            slots: ontology.slot_catalog().to_vec(),
        }
    }

    fn contains(&self, kind: ElementKind, label: &str) -> bool {
        label == UNK
            || match kind {
                ElementKind::Intent => self.intents.contains(&label),
                ElementKind::Action => self.actions.iter().any(|a| a == label),
                ElementKind::Slot => self.slots.iter().any(|s| s == label),
            }
    }

    fn list(&self, kind: ElementKind) -> Vec<&str> {
        match kind {
            ElementKind::Intent => self.intents.clone(),
            ElementKind::Action => self.actions.iter().map(String::as_str).collect(),
            ElementKind::Slot => self.slots.iter().map(String::as_str).collect(),
        }
    }
}

struct Perturber<'a> {
    cfg: &'a ErrorConfig,
    kind: ElementKind,
    catalog: Vec<&'a str>,
    rng: StageRng,
}

impl Perturber<'_> {
    /// Draw for one element; `Some((new, mode))` on a hit.
    fn draw(&mut self, label: &str) -> Result<Option<(String, PerturbMode)>, InjectError> {
        let hit = self.rng.random::<f64>();
        let mode_u = self.rng.random::<f64>();
        let pick = self.rng.random::<f64>();
        if hit >= self.cfg.probability(self.kind) {
            return Ok(None);
        }
        let mode = if mode_u < self.cfg.relabel_share() {
            PerturbMode::Relabel
        } else {
            PerturbMode::Unk
        };
        let new = match mode {
            PerturbMode::Unk => UNK.to_string(),
            PerturbMode::Relabel => {
                if self.catalog.len() < 2 {
                    return Err(InjectError::CatalogTooSmall(self.catalog.len()));
                }
                relabel(label, &self.catalog, pick).to_string()
            }
        };
        // UNK on a label that already is UNK changes nothing.
        Ok((new != label).then_some((new, mode)))
    }
}

fn perturb_dialogue(
    dialogue: &mut Dialogue,
    split: Split,
    global_index: u64,
    catalogs: &Catalogs,
    cfg: &ErrorConfig,
) -> Result<(Vec<PerturbationRecord>, InjectionStats), InjectError> {
    let mut records = Vec::new();
    let mut stats = InjectionStats::default();
    let mut perturbers: Vec<Perturber> = ElementKind::ALL
        .iter()
        .map(|&kind| Perturber {
            cfg,
            kind,
            catalog: catalogs.list(kind),
            rng: seeded(derive_seed(cfg.seed, kind.tag(), global_index)),
        })
        .collect();
    let id = dialogue.id.clone();
    for (turn_index, turn) in dialogue.turns.iter_mut().enumerate() {
        let mut elements: Vec<(ElementKind, usize, &mut dyn LabelSlot)> = Vec::new();
        for (i, act) in turn.user_acts.iter_mut().enumerate() {
            elements.push((ElementKind::Intent, i, &mut act.intent));
            if let Some(slot) = act.slot.as_mut() {
                elements.push((ElementKind::Slot, i, slot));
            }
        }
        for (i, action) in turn.system_acts.iter_mut().enumerate() {
            elements.push((ElementKind::Action, i, action));
        }
        for (kind, position, element) in elements {
            let label = element.label();
            if !catalogs.contains(kind, &label) {
                return Err(InjectError::UnknownLabel {
                    kind,
                    label,
                    dialogue: id.clone(),
                    turn: turn_index,
                });
            }
            let perturber = &mut perturbers[kind as usize];
            let counts = stats.get_mut(kind);
            counts.total += 1;
            if let Some((new, mode)) = perturber.draw(&label)? {
                element.set(&new);
                counts.perturbed += 1;
                match mode {
                    PerturbMode::Relabel => counts.relabeled += 1,
                    PerturbMode::Unk => counts.unk += 1,
                }
                records.push(PerturbationRecord {
                    split,
                    dialogue: id.clone(),
                    turn: turn_index,
                    kind,
                    position,
                    original: label,
                    new,
                    mode,
                });
            }
        }
    }
    Ok((records, stats))
}

/// A label stored either as an intent enum or as a plain string.
trait LabelSlot {
    fn label(&self) -> String;
    fn set(&mut self, label: &str);
}

impl LabelSlot for IntentKind {
    fn label(&self) -> String {
        self.as_str().to_string()
    }

    fn set(&mut self, label: &str) {
        *self = label.parse().expect("intent labels come from the intent catalog");
    }
}

impl LabelSlot for String {
    fn label(&self) -> String {
        self.clone()
    }

    fn set(&mut self, label: &str) {
        *self = label.to_string();
    }
}

/// Perturbed copy of `dataset`, the audit log in dataset order, and counts.
pub fn inject_errors(
    dataset: &Dataset,
    ontology: &Ontology,
    cfg: &ErrorConfig,
) -> Result<(Dataset, Vec<PerturbationRecord>, InjectionStats), InjectError> {
    cfg.validate()?;
    let catalogs = Catalogs::new(ontology);
    let mut out = dataset.clone();
    let mut records = Vec::new();
    let mut stats = InjectionStats::default();
    let mut offset = 0u64;
    for split in Split::ALL {
        let dialogues = out.split_mut(split);
        let n = dialogues.len() as u64;
        if cfg.train_only && split != Split::Train {
            offset += n;
            continue;
        }
        let results = dialogues
            .par_iter_mut()
            .enumerate()
            .map(|(i, d)| perturb_dialogue(d, split, offset + i as u64, &catalogs, cfg))
            .collect::<Result<Vec<_>, _>>()?;
        for (r, s) in results {
            records.extend(r);
            stats = stats.merge(s);
        }
        offset += n;
    }
    Ok((out, records, stats))
}

/// Undo `records` on a perturbed dataset.
pub fn revert(dataset: &Dataset, records: &[PerturbationRecord]) -> Result<Dataset, InjectError> {
    let mut out = dataset.clone();
    let mismatch = |r: &PerturbationRecord, why: &str| {
        InjectError::RecordMismatch(format!(
            "{} turn {} {} #{}: {why}",
            r.dialogue, r.turn, r.kind, r.position
        ))
    };
    for record in records.iter().rev() {
        let dialogue = out
            .split_mut(record.split)
            .iter_mut()
            .find(|d| d.id == record.dialogue)
            .ok_or_else(|| mismatch(record, "no such dialogue"))?;
        let turn = dialogue
            .turns
            .get_mut(record.turn)
            .ok_or_else(|| mismatch(record, "no such turn"))?;
        let element: &mut dyn LabelSlot = match record.kind {
            ElementKind::Intent => turn
                .user_acts
                .get_mut(record.position)
                .map(|a| &mut a.intent as &mut dyn LabelSlot),
            ElementKind::Slot => turn
                .user_acts
                .get_mut(record.position)
                .and_then(|a| a.slot.as_mut())
                .map(|s| s as &mut dyn LabelSlot),
            ElementKind::Action => turn
                .system_acts
                .get_mut(record.position)
                .map(|s| s as &mut dyn LabelSlot),
        }
        .ok_or_else(|| mismatch(record, "no such element"))?;
        if element.label() != record.new {
            return Err(mismatch(record, "current label differs from the logged one"));
        }
        element.set(&record.original);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::generate_dataset;
    use crate::presets::{preset_config, preset_ontology};

    fn small(n: usize) -> (Ontology, Dataset) {
        let ontology = preset_ontology("simple").unwrap();
        let mut cfg = preset_config("simple").unwrap();
        cfg.n_dialogues = n;
        cfg.split_fractions = [0.6, 0.2, 0.2];
        let ds = generate_dataset(&ontology, &cfg).unwrap();
        (ontology, ds)
    }

    #[test]
    fn unk_mode_is_constant() {
        let mut rng = seeded(1);
        let catalog = ["a", "b"];
        assert_eq!(
            perturb_label("a", &catalog, &mut rng, PerturbMode::Unk).unwrap(),
            UNK
        );
    }

    #[test]
    fn relabel_needs_two_entries() {
        let mut rng = seeded(1);
        assert!(matches!(
            perturb_label("a", &["a"], &mut rng, PerturbMode::Relabel),
            Err(InjectError::CatalogTooSmall(1))
        ));
    }

    #[test]
    fn relabel_never_returns_the_original() {
        let catalog = ["a", "b", "c"];
        for i in 0..1000 {
            let u = i as f64 / 1000.0;
            assert_ne!(relabel("b", &catalog, u), "b");
        }
        assert_eq!(relabel("a", &catalog, 0.0), "b");
        assert_eq!(relabel("a", &catalog, 0.999), "c");
        assert_eq!(relabel("zzz", &catalog, 0.999), "c");
    }

    #[test]
    fn zero_rate_is_identity() {
        let (ontology, ds) = small(50);
        let (out, records, stats) = inject_errors(&ds, &ontology, &ErrorConfig::default()).unwrap();
        assert_eq!(out, ds);
        assert!(records.is_empty());
        assert!(stats.action.total > 0);
    }

    #[test]
    fn certain_unk_on_intents() {
        let (ontology, ds) = small(20);
        let cfg = ErrorConfig {
            p_intent: 1.0,
            mode_weights: (0.0, 1.0),
            ..ErrorConfig::default()
        };
        let (out, _, _) = inject_errors(&ds, &ontology, &cfg).unwrap();
        for d in out.dialogues() {
            for t in &d.turns {
                assert!(t.user_acts.iter().all(|a| a.intent == IntentKind::Unk));
            }
        }
        let orig: Vec<_> = ds.dialogues().flat_map(|d| d.turns.clone()).collect();
        let new: Vec<_> = out.dialogues().flat_map(|d| d.turns.clone()).collect();
        for (a, b) in orig.iter().zip(&new) {
            assert_eq!(a.system_acts, b.system_acts);
        }
    }

    #[test]
    fn revert_restores_and_train_only_skips_eval_splits() {
        let (ontology, ds) = small(40);
        let cfg = ErrorConfig {
            train_only: true,
            ..ErrorConfig::uniform(0.5, 9)
        };
        let (out, records, _) = inject_errors(&ds, &ontology, &cfg).unwrap();
        assert!(!records.is_empty());
        assert_eq!(out.val, ds.val);
        assert_eq!(out.test, ds.test);
        assert_ne!(out.train, ds.train);
        assert_eq!(revert(&out, &records).unwrap(), ds);
    }

    #[test]
    fn hits_are_nested_across_rates() {
        let (ontology, ds) = small(30);
        let key = |r: &PerturbationRecord| (r.dialogue.clone(), r.turn, r.kind, r.position);
        let (_, low, _) = inject_errors(&ds, &ontology, &ErrorConfig::uniform(0.2, 5)).unwrap();
        let (_, high, _) = inject_errors(&ds, &ontology, &ErrorConfig::uniform(0.6, 5)).unwrap();
        let high_keys: std::collections::HashSet<_> = high.iter().map(key).collect();
        assert!(low.iter().all(|r| high_keys.contains(&key(r))));
    }

    #[test]
    fn rejects_bad_configs_and_labels() {
        let (ontology, mut ds) = small(5);
        let cfg = ErrorConfig {
            mode_weights: (0.0, 0.0),
            ..ErrorConfig::default()
        };
        assert!(matches!(
            inject_errors(&ds, &ontology, &cfg),
            Err(InjectError::InvalidConfig(_))
        ));
        ds.train[0].turns[0].system_acts[0] = "nowhere-NOTIFY".into();
        assert!(matches!(
            inject_errors(&ds, &ontology, &ErrorConfig::default()),
            Err(InjectError::UnknownLabel { .. })
        ));
    }
}
