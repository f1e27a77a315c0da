use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ontology::Ontology;
use crate::rng::{derive_seed, seeded};

use super::{
    sample_user_turn, step_policy, Dialogue, DialogueStack, DialogueTurn, EngineError, GeneratorConfig,
    UserGoal,
};

/// Hard cap on dialogue length. Hitting it means a preset or config bug.
pub const MAX_TURNS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        Split::ALL.into_iter().find(|sp| sp.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub ontology_hash: String,
    pub config: GeneratorConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<Dialogue>,
    pub val: Vec<Dialogue>,
    pub test: Vec<Dialogue>,
    pub info: DatasetInfo,
}

impl Dataset {
    pub fn split(&self, split: Split) -> &[Dialogue] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn split_mut(&mut self, split: Split) -> &mut Vec<Dialogue> {
        match split {
            Split::Train => &mut self.train,
            Split::Val => &mut self.val,
            Split::Test => &mut self.test,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dialogues(&self) -> impl Iterator<Item = &Dialogue> {
        self.train.iter().chain(&self.val).chain(&self.test)
    }

    pub fn total_turns(&self) -> usize {
        self.dialogues().map(|d| d.turns.len()).sum()
    }
}

/// Generated dialogue plus the stack after every turn.
#[derive(Debug, Clone)]
pub struct TracedDialogue {
    pub dialogue: Dialogue,
    pub stacks: Vec<DialogueStack>,
}

/// Run the user simulator against the policy until the last frame closes,
/// keeping a snapshot of the stack after each turn.
pub fn generate_traced(
    ontology: &Ontology,
    cfg: &GeneratorConfig,
    dialogue_seed: u64,
) -> Result<TracedDialogue, EngineError> {
    cfg.validate()?;
    let mut rng = seeded(dialogue_seed);
    let mut goal = UserGoal::draw(ontology, cfg, &mut rng);
    let mut stack = DialogueStack::default();
    let mut turns = Vec::new();
    let mut events_log = Vec::new();
    let mut stacks = Vec::new();
    loop {
        if turns.len() == MAX_TURNS {
            return Err(EngineError::GenerationOverflow {
                index: 0,
                turns: MAX_TURNS,
            });
        }
        let (user_acts, event) = sample_user_turn(ontology, &stack, &mut goal, &mut rng, cfg);
        let system = step_policy(ontology, &mut stack, &user_acts)?;
        goal.observe(&system);
        if let Some(kind) = event {
            events_log.push((turns.len(), kind));
        }
        turns.push(DialogueTurn {
            user_acts,
            system_acts: system.iter().map(|a| a.to_string()).collect(),
            event,
        });
        stacks.push(stack.clone());
        if stack.is_empty() {
            break;
        }
    }
    Ok(TracedDialogue {
        dialogue: Dialogue {
            id: format!("{dialogue_seed:016x}"),
            seed: dialogue_seed,
            turns,
            events_log,
        },
        stacks,
    })
}

pub fn generate_dialogue(
    ontology: &Ontology,
    cfg: &GeneratorConfig,
    dialogue_seed: u64,
) -> Result<Dialogue, EngineError> {
    generate_traced(ontology, cfg, dialogue_seed).map(|t| t.dialogue)
}

/// Floor-based split sizes; any remainder goes to train.
pub fn split_sizes(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let part = |f: f64| ((n as f64) * f + 1e-9).floor() as usize;
    let val = part(fractions[1]);
    let test = part(fractions[2]);
    [n - val - test, val, test]
}

/// Generate `cfg.n_dialogues` dialogues in parallel; output order and bytes
/// depend only on `cfg` and the ontology.
pub fn generate_dataset(ontology: &Ontology, cfg: &GeneratorConfig) -> Result<Dataset, EngineError> {
    cfg.validate()?;
    let mut dialogues = (0..cfg.n_dialogues)
        .into_par_iter()
        .map(|index| {
            let seed = derive_seed(cfg.seed, "dialogue", index as u64);
            generate_dialogue(ontology, cfg, seed)
                .map(|mut d| {
                    d.id = format!("dlg-{index:06}");
                    d
                })
                .map_err(|e| match e {
                    EngineError::GenerationOverflow { turns, .. } => {
                        EngineError::GenerationOverflow { index, turns }
                    }
                    other => other,
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let [n_train, n_val, _] = split_sizes(cfg.n_dialogues, cfg.split_fractions);
    let test = dialogues.split_off(n_train + n_val);
    let val = dialogues.split_off(n_train);
    Ok(Dataset {
        train: dialogues,
        val,
        test,
        info: DatasetInfo {
            ontology_hash: ontology.hash(),
            config: cfg.clone(),
            seed: cfg.seed,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes_floor_with_remainder_to_train() {
        assert_eq!(split_sizes(1, [0.6, 0.2, 0.2]), [1, 0, 0]);
        assert_eq!(split_sizes(2000, [0.6, 0.2, 0.2]), [1200, 400, 400]);
        let n = 10438;
        let f = [8438.0 / n as f64, 1000.0 / n as f64, 1000.0 / n as f64];
        assert_eq!(split_sizes(n, f), [8438, 1000, 1000]);
        assert_eq!(split_sizes(7, [0.5, 0.25, 0.25]), [5, 1, 1]);
    }

    #[test]
    fn split_names() {
        for s in Split::ALL {
            assert_eq!(Split::parse(s.as_str()), Some(s));
        }
        assert_eq!(Split::parse("dev"), None);
    }
}
