//! Supervised view of a dataset: one (state, target) bit-vector pair per turn.
//!
//! State layout, in order:
//!
//! | block            | width                 | content                                    |
//! |------------------|-----------------------|--------------------------------------------|
//! | slots            | 2 per topic slot      | (filled, changed) for the top frame        |
//! | user intents     | 9                     | multi-hot over this turn's user act kinds  |
//! | system actions   | actions x window      | previous turns' system acts, newest first  |
//! | dialogue manager | 4                     | depth > 1, phase one-hot                   |
//!
//! The state is taken after the user's acts are tracked and before the
//! system answers. Slot bits belong to `(domain, topic, slot)` triples, so
//! the position of a fill tells which topic is active; when a frame becomes
//! the top of the stack (pushed or resumed) all of its changed bits are set.
//! Replay is lenient: acts that do not fit the context (perturbed labels)
//! are ignored, so a corrupted slot encodes as unfilled.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use bitvec::prelude::*;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    select_actions, track_user_acts, Dataset, Dialogue, DialogueStack, EngineError, Phase, ReplayMode, Split,
};
use crate::ontology::{AtomicActionId, IntentKind, Ontology, UNK};

pub type Bits = BitVec<u8, Msb0>;
pub type StateVector = Bits;
pub type TargetVector = Bits;

/// Bumped whenever the meaning of a state bit changes.
pub const LAYOUT_VERSION: u32 = 1;
const MAGIC: &str = "dialoforge-encoded";

#[derive(Debug, Error)]
pub enum EncodingError {
    #[error("turn {turn} out of range for a dialogue of {len} turns")]
    IndexOutOfRange { turn: usize, len: usize },
    #[error("unknown action label `{label}`{location}")]
    UnknownLabel { label: String, location: String },
    #[error("expected width {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("encoded container: {0}")]
    Container(String),
    #[error("history window must be at least 1")]
    BadWindow,
    #[error(transparent)]
    Replay(#[from] EngineError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SlotRef {
    pub domain: String,
    pub topic: String,
    pub slot: String,
}

/// Self-describing bit layout, stored next to the encoded data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub version: u32,
    pub slots: Vec<SlotRef>,
    pub intents: Vec<String>,
    pub actions: Vec<String>,
    pub window: usize,
}

impl Layout {
    pub fn new(ontology: &Ontology, window: usize) -> Result<Self, EncodingError> {
        if window == 0 {
            return Err(EncodingError::BadWindow);
        }
        Ok(Layout {
            version: LAYOUT_VERSION,
            slots: ontology
                .topics()
                .flat_map(|(d, t)| {
                    t.slots.iter().map(move |s| SlotRef {
                        domain: d.name.clone(),
                        topic: t.name.clone(),
                        slot: s.name.clone(),
                    })
                })
                .collect(),
            intents: IntentKind::ALL.iter().map(|k| k.as_str().to_string()).collect(),
            actions: ontology.action_catalog().iter().map(|a| a.to_string()).collect(),
            window,
        })
    }

    pub fn intent_offset(&self) -> usize {
        2 * self.slots.len()
    }

    pub fn action_offset(&self) -> usize {
        self.intent_offset() + self.intents.len()
    }

    pub fn dm_offset(&self) -> usize {
        self.action_offset() + self.actions.len() * self.window
    }

    pub fn width(&self) -> usize {
        self.dm_offset() + 4
    }

    pub fn target_width(&self) -> usize {
        self.actions.len()
    }
}

/// Readable form of one state vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedState {
    pub filled: Vec<SlotRef>,
    pub changed: Vec<SlotRef>,
    pub intents: Vec<IntentKind>,
    /// `previous_actions[k]` holds the system acts of turn `t - 1 - k`.
    pub previous_actions: Vec<Vec<String>>,
    pub deep_stack: bool,
    pub phase: Option<Phase>,
}

pub fn decode_state(state: &StateVector, layout: &Layout) -> Result<DecodedState, EncodingError> {
    check_width(layout.width(), state.len())?;
    let mut out = DecodedState {
        filled: Vec::new(),
        changed: Vec::new(),
        intents: Vec::new(),
        previous_actions: vec![Vec::new(); layout.window],
        deep_stack: state[layout.dm_offset()],
        phase: None,
    };
    for (i, slot) in layout.slots.iter().enumerate() {
        if state[2 * i] {
            out.filled.push(slot.clone());
        }
        if state[2 * i + 1] {
            out.changed.push(slot.clone());
        }
    }
    for (i, kind) in IntentKind::ALL.iter().enumerate() {
        if state[layout.intent_offset() + i] {
            out.intents.push(*kind);
        }
    }
    let a = layout.actions.len();
    for (k, acts) in out.previous_actions.iter_mut().enumerate() {
        for (i, name) in layout.actions.iter().enumerate() {
            if state[layout.action_offset() + k * a + i] {
                acts.push(name.clone());
            }
        }
    }
    for (i, phase) in Phase::ALL.iter().enumerate() {
        if state[layout.dm_offset() + 1 + i] {
            out.phase = Some(*phase);
        }
    }
    Ok(out)
}

pub fn decode_target(target: &TargetVector, layout: &Layout) -> Result<Vec<String>, EncodingError> {
    check_width(layout.target_width(), target.len())?;
    Ok(target.iter_ones().map(|i| layout.actions[i].clone()).collect())
}

fn check_width(expected: usize, got: usize) -> Result<(), EncodingError> {
    if expected == got {
        Ok(())
    } else {
        Err(EncodingError::WidthMismatch { expected, got })
    }
}

/// Multi-hot target over the action catalog.
pub fn encode_actions(
    system_acts: &[AtomicActionId],
    ontology: &Ontology,
) -> Result<TargetVector, EncodingError> {
    let mut bits = Bits::repeat(false, ontology.action_catalog().len());
    for act in system_acts {
        let i = ontology
            .action_position(act)
            .ok_or_else(|| EncodingError::UnknownLabel {
                label: act.to_string(),
                location: String::new(),
            })?;
        bits.set(i, true);
    }
    Ok(bits)
}

struct Encoder<'a> {
    ontology: &'a Ontology,
    layout: &'a Layout,
    slot_index: HashMap<(&'a str, &'a str, &'a str), usize>,
}

impl<'a> Encoder<'a> {
    fn new(ontology: &'a Ontology, layout: &'a Layout) -> Self {
        let slot_index = layout
            .slots
            .iter()
            .enumerate()
            .map(|(i, s)| ((s.domain.as_str(), s.topic.as_str(), s.slot.as_str()), i))
            .collect();
        Encoder {
            ontology,
            layout,
            slot_index,
        }
    }

    /// Gold labels of a turn as catalog positions; UNK labels carry no bit.
    fn action_positions(&self, dialogue: &Dialogue, turn: usize) -> Result<Vec<usize>, EncodingError> {
        let mut out = Vec::new();
        for label in &dialogue.turns[turn].system_acts {
            if label == UNK {
                continue;
            }
            let position = label
                .parse::<AtomicActionId>()
                .ok()
                .and_then(|id| self.ontology.action_position(&id))
                .ok_or_else(|| EncodingError::UnknownLabel {
                    label: label.clone(),
                    location: format!(" in dialogue {} turn {turn}", dialogue.id),
                })?;
            out.push(position);
        }
        Ok(out)
    }

    /// Encode turns `0..=last` of a dialogue in one replay pass.
    fn encode(
        &self,
        dialogue: &Dialogue,
        last: usize,
    ) -> Result<Vec<(StateVector, TargetVector)>, EncodingError> {
        let layout = self.layout;
        let n_actions = layout.actions.len();
        let mut stack = DialogueStack::default();
        let mut history: Vec<Vec<usize>> = Vec::new();
        let mut out = Vec::with_capacity(last + 1);
        for t in 0..=last {
            let turn = &dialogue.turns[t];
            let update = track_user_acts(self.ontology, &mut stack, &turn.user_acts, ReplayMode::Lenient)?;
            let mut state = Bits::repeat(false, layout.width());
            if let Some(frame) = stack.top() {
                let index = |slot: &str| {
                    self.slot_index
                        .get(&(frame.domain.as_str(), frame.topic.as_str(), slot))
                        .copied()
                        .expect("frames are built from ontology topics")
                };
                for (slot, value) in &frame.fills {
                    let i = index(slot);
                    if value.is_some() {
                        state.set(2 * i, true);
                    }
                    if update.top_replaced() || update.changed.iter().any(|c| c == slot) {
                        state.set(2 * i + 1, true);
                    }
                }
                state.set(layout.dm_offset() + 1 + phase_index(frame.phase), true);
            }
            for act in &turn.user_acts {
                state.set(layout.intent_offset() + act.intent.index(), true);
            }
            for (k, acts) in history.iter().rev().take(layout.window).enumerate() {
                for &i in acts {
                    state.set(layout.action_offset() + k * n_actions + i, true);
                }
            }
            state.set(layout.dm_offset(), stack.depth() > 1);

            let gold = self.action_positions(dialogue, t)?;
            let mut target = Bits::repeat(false, n_actions);
            for &i in &gold {
                target.set(i, true);
            }
            out.push((state, target));
            history.push(gold);
            // Advance phases and asked-desired marks; the policy's own
            // choice is discarded in favor of the (possibly perturbed) gold.
            select_actions(self.ontology, &mut stack, &update);
        }
        Ok(out)
    }
}

fn phase_index(phase: Phase) -> usize {
    Phase::ALL.iter().position(|p| *p == phase).unwrap()
}

/// State vector of one turn, with a one-turn history window.
pub fn encode_state(
    dialogue: &Dialogue,
    turn_index: usize,
    ontology: &Ontology,
) -> Result<StateVector, EncodingError> {
    let layout = Layout::new(ontology, 1)?;
    encode_state_with(dialogue, turn_index, ontology, &layout)
}

pub fn encode_state_with(
    dialogue: &Dialogue,
    turn_index: usize,
    ontology: &Ontology,
    layout: &Layout,
) -> Result<StateVector, EncodingError> {
    if turn_index >= dialogue.turns.len() {
        return Err(EncodingError::IndexOutOfRange {
            turn: turn_index,
            len: dialogue.turns.len(),
        });
    }
    let mut rows = Encoder::new(ontology, layout).encode(dialogue, turn_index)?;
    Ok(rows.pop().unwrap().0)
}

pub fn encode_dialogue(
    dialogue: &Dialogue,
    ontology: &Ontology,
    layout: &Layout,
) -> Result<Vec<(StateVector, TargetVector)>, EncodingError> {
    if dialogue.turns.is_empty() {
        return Ok(Vec::new());
    }
    Encoder::new(ontology, layout).encode(dialogue, dialogue.turns.len() - 1)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EncodedSplit {
    pub states: Vec<StateVector>,
    pub targets: Vec<TargetVector>,
}

impl EncodedSplit {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&StateVector, &TargetVector)> {
        self.states.iter().zip(&self.targets)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedDataset {
    pub layout: Layout,
    pub ontology_hash: String,
    pub train: EncodedSplit,
    pub val: EncodedSplit,
    pub test: EncodedSplit,
}

impl EncodedDataset {
    pub fn split(&self, split: Split) -> &EncodedSplit {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    fn split_mut(&mut self, split: Split) -> &mut EncodedSplit {
        match split {
            Split::Train => &mut self.train,
            Split::Val => &mut self.val,
            Split::Test => &mut self.test,
        }
    }
}

pub fn encode_split(
    dialogues: &[Dialogue],
    ontology: &Ontology,
    layout: &Layout,
) -> Result<EncodedSplit, EncodingError> {
    let per_dialogue = dialogues
        .par_iter()
        .map(|d| encode_dialogue(d, ontology, layout))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = EncodedSplit::default();
    for (state, target) in per_dialogue.into_iter().flatten() {
        out.states.push(state);
        out.targets.push(target);
    }
    Ok(out)
}

pub fn encode_dataset(
    dataset: &Dataset,
    ontology: &Ontology,
    window: usize,
) -> Result<EncodedDataset, EncodingError> {
    let layout = Layout::new(ontology, window)?;
    let mut out = EncodedDataset {
        ontology_hash: ontology.hash(),
        train: EncodedSplit::default(),
        val: EncodedSplit::default(),
        test: EncodedSplit::default(),
        layout,
    };
    for split in Split::ALL {
        *out.split_mut(split) = encode_split(dataset.split(split), ontology, &out.layout)?;
    }
    Ok(out)
}

/// A state seen with more than one distinct target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conflict {
    pub state: StateVector,
    /// Distinct targets with their counts, most frequent first.
    pub targets: Vec<(TargetVector, usize)>,
}

/// States of `split` that map to more than one target set.
pub fn find_conflicts(split: &EncodedSplit) -> Vec<Conflict> {
    let mut seen: HashMap<&StateVector, BTreeMap<Vec<u8>, (TargetVector, usize)>> = HashMap::new();
    let mut order = Vec::new();
    for (state, target) in split.rows() {
        let entry = seen.entry(state).or_insert_with(|| {
            order.push(state);
            BTreeMap::new()
        });
        entry
            .entry(target.as_raw_slice().to_vec())
            .or_insert_with(|| (target.clone(), 0))
            .1 += 1;
    }
    order
        .into_iter()
        .filter_map(|state| {
            let targets = &seen[state];
            (targets.len() > 1).then(|| {
                let mut targets: Vec<_> = targets.values().cloned().collect();
                targets.sort_by_key(|t| std::cmp::Reverse(t.1));
                Conflict {
                    state: state.clone(),
                    targets,
                }
            })
        })
        .collect()
}

fn bytes_for(bits: usize) -> usize {
    bits.div_ceil(8)
}

/// Binary container: a plain-text header ending in `end`, then one
/// row per pair with the state and target bits packed MSB-first, each
/// padded to a whole byte.
pub fn write_split_bin<W: Write>(
    out: &mut W,
    split: &EncodedSplit,
    layout: &Layout,
    ontology_hash: &str,
) -> std::io::Result<()> {
    writeln!(out, "{MAGIC} {}", layout.version)?;
    writeln!(out, "rows {}", split.len())?;
    writeln!(out, "state_width {}", layout.width())?;
    writeln!(out, "target_width {}", layout.target_width())?;
    writeln!(out, "ontology {ontology_hash}")?;
    writeln!(out, "end")?;
    for (state, target) in split.rows() {
        out.write_all(state.as_raw_slice())?;
        out.write_all(target.as_raw_slice())?;
    }
    Ok(())
}

struct Header {
    version: u32,
    rows: usize,
    state_width: usize,
    target_width: usize,
    ontology: String,
}

fn parse_header<R: BufRead>(input: &mut R) -> Result<Header, EncodingError> {
    let bad = |m: &str| EncodingError::Container(m.to_string());
    let mut fields = HashMap::new();
    let mut version = None;
    loop {
        let mut line = String::new();
        if input.read_line(&mut line).map_err(|e| bad(&e.to_string()))? == 0 {
            return Err(bad("header is not terminated"));
        }
        let line = line.trim_end_matches('\n');
        if line == "end" {
            break;
        }
        let (key, value) = line.split_once(' ').ok_or_else(|| bad("malformed header line"))?;
        if key == MAGIC {
            version = Some(value.parse().map_err(|_| bad("bad version"))?);
        } else {
            fields.insert(key.to_string(), value.to_string());
        }
    }
    let number = |key: &str| -> Result<usize, EncodingError> {
        fields
            .get(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(&format!("missing or bad `{key}`")))
    };
    Ok(Header {
        version: version.ok_or_else(|| bad("not an encoded split"))?,
        rows: number("rows")?,
        state_width: number("state_width")?,
        target_width: number("target_width")?,
        ontology: fields.get("ontology").cloned().unwrap_or_default(),
    })
}

pub fn read_split_bin<R: Read>(
    input: R,
    layout: &Layout,
    ontology_hash: &str,
) -> Result<EncodedSplit, EncodingError> {
    let mut input = BufReader::new(input);
    let header = parse_header(&mut input)?;
    if header.version != layout.version {
        return Err(EncodingError::Container(format!(
            "layout version {} does not match {}",
            header.version, layout.version
        )));
    }
    if header.ontology != ontology_hash {
        return Err(EncodingError::Container("ontology hash mismatch".into()));
    }
    check_width(layout.width(), header.state_width)?;
    check_width(layout.target_width(), header.target_width)?;
    let (sb, tb) = (bytes_for(header.state_width), bytes_for(header.target_width));
    let mut row = vec![0u8; sb + tb];
    let mut out = EncodedSplit::default();
    for _ in 0..header.rows {
        input
            .read_exact(&mut row)
            .map_err(|_| EncodingError::Container("truncated data".into()))?;
        let mut state = Bits::from_slice(&row[..sb]);
        state.truncate(header.state_width);
        let mut target = Bits::from_slice(&row[sb..]);
        target.truncate(header.target_width);
        out.states.push(state);
        out.targets.push(target);
    }
    if input.fill_buf().map(|b| !b.is_empty()).unwrap_or(false) {
        return Err(EncodingError::Container(
            "trailing bytes after the last row".into(),
        ));
    }
    Ok(out)
}

/// 0/1 CSV, one row per pair, columns named after the layout.
pub fn write_split_csv<W: Write>(out: &mut W, split: &EncodedSplit, layout: &Layout) -> std::io::Result<()> {
    let mut names = Vec::with_capacity(layout.width() + layout.target_width());
    for s in &layout.slots {
        names.push(format!("filled:{}/{}/{}", s.domain, s.topic, s.slot));
        names.push(format!("changed:{}/{}/{}", s.domain, s.topic, s.slot));
    }
    names.extend(layout.intents.iter().map(|i| format!("intent:{i}")));
    for k in 0..layout.window {
        names.extend(layout.actions.iter().map(|a| format!("prev{}:{a}", k + 1)));
    }
    names.push("dm:deep_stack".into());
    names.extend(Phase::ALL.iter().map(|p| format!("dm:{p}")));
    names.extend(layout.actions.iter().map(|a| format!("target:{a}")));
    writeln!(out, "{}", names.join(","))?;
    for (state, target) in split.rows() {
        let cells: Vec<&str> = state
            .iter()
            .chain(target.iter())
            .map(|b| if *b { "1" } else { "0" })
            .collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

pub const LAYOUT_FILE: &str = "layout.json";

pub fn split_bin_name(split: Split) -> String {
    format!("{}.bin", split.as_str())
}

/// Write `layout.json` and one `.bin` per split into `dir`.
pub fn write_encoded_dir(dir: &Path, encoded: &EncodedDataset) -> crate::Result<()> {
    fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
    #[derive(Serialize)]
    struct LayoutDoc<'a> {
        ontology_hash: &'a str,
        width: usize,
        target_width: usize,
        layout: &'a Layout,
    }
    crate::io::write_json(
        &dir.join(LAYOUT_FILE),
        &LayoutDoc {
            ontology_hash: &encoded.ontology_hash,
            width: encoded.layout.width(),
            target_width: encoded.layout.target_width(),
            layout: &encoded.layout,
        },
    )?;
    for split in Split::ALL {
        let path = dir.join(split_bin_name(split));
        let mut file =
            std::io::BufWriter::new(fs::File::create(&path).map_err(|e| crate::Error::io(&path, e))?);
        write_split_bin(
            &mut file,
            encoded.split(split),
            &encoded.layout,
            &encoded.ontology_hash,
        )
        .and_then(|_| file.flush())
        .map_err(|e| crate::Error::io(&path, e))?;
    }
    Ok(())
}

pub fn read_encoded_dir(dir: &Path) -> crate::Result<EncodedDataset> {
    #[derive(Deserialize)]
    struct LayoutDoc {
        ontology_hash: String,
        layout: Layout,
    }
    let doc: LayoutDoc = crate::io::read_json(&dir.join(LAYOUT_FILE))?;
    let mut out = EncodedDataset {
        layout: doc.layout,
        ontology_hash: doc.ontology_hash,
        train: EncodedSplit::default(),
        val: EncodedSplit::default(),
        test: EncodedSplit::default(),
    };
    for split in Split::ALL {
        let path = dir.join(split_bin_name(split));
        let file = fs::File::open(&path).map_err(|e| crate::Error::io(&path, e))?;
        *out.split_mut(split) = read_split_bin(file, &out.layout, &out.ontology_hash)?;
    }
    Ok(out)
}
