use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::encoding::{Bits, EncodedSplit, StateVector, TargetVector};

use super::EvalError;

/// Lookup table from training states to their majority target set.
#[derive(Debug, Clone, PartialEq)]
pub struct MemorizerModel {
    pub state_width: usize,
    pub table: HashMap<StateVector, TargetVector>,
    pub fallback: TargetVector,
}

/// Sort key for tie-breaks: the target as a 0/1 string.
fn serialized(target: &TargetVector) -> String {
    target.iter().map(|b| if *b { '1' } else { '0' }).collect()
}

/// Most frequent target; ties go to the lexicographically smallest 0/1 string.
fn majority<'a>(counts: impl Iterator<Item = (&'a TargetVector, usize)>) -> Option<TargetVector> {
    counts
        .map(|(t, n)| (n, serialized(t), t))
        .min_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)))
        .map(|(_, _, t)| t.clone())
}

pub fn train_memorizer(train: &EncodedSplit) -> Result<MemorizerModel, EvalError> {
    if train.is_empty() {
        return Err(EvalError::EmptySplit);
    }
    let mut per_state: HashMap<&StateVector, HashMap<&TargetVector, usize>> = HashMap::new();
    let mut overall: HashMap<&TargetVector, usize> = HashMap::new();
    for (state, target) in train.rows() {
        *per_state.entry(state).or_default().entry(target).or_default() += 1;
        *overall.entry(target).or_default() += 1;
    }
    let table = per_state
        .into_iter()
        .map(|(state, counts)| {
            let best = majority(counts.into_iter()).expect("every state has a target");
            (state.clone(), best)
        })
        .collect();
    Ok(MemorizerModel {
        state_width: train.states[0].len(),
        table,
        fallback: majority(overall.into_iter()).expect("split is non-empty"),
    })
}

impl MemorizerModel {
    pub fn predict(&self, state: &StateVector) -> Result<TargetVector, EvalError> {
        if state.len() != self.state_width {
            return Err(EvalError::WidthMismatch {
                expected: self.state_width,
                got: state.len(),
            });
        }
        Ok(self.table.get(state).unwrap_or(&self.fallback).clone())
    }
}

#[derive(Serialize, Deserialize)]
struct MemorizerDoc {
    state_width: usize,
    target_width: usize,
    fallback: String,
    /// (state, target) as 0/1 strings, sorted by state.
    table: Vec<(String, String)>,
}

fn parse_bits(s: &str, width: usize) -> Result<Bits, EvalError> {
    if s.len() != width || !s.bytes().all(|b| b == b'0' || b == b'1') {
        return Err(EvalError::InvalidConfig(format!(
            "bad bit string of length {} (expected {width})",
            s.len()
        )));
    }
    Ok(s.bytes().map(|b| b == b'1').collect())
}

impl Serialize for MemorizerModel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut table: Vec<(String, String)> = self
            .table
            .iter()
            .map(|(s, t)| (serialized(s), serialized(t)))
            .collect();
        table.sort();
        MemorizerDoc {
            state_width: self.state_width,
            target_width: self.fallback.len(),
            fallback: serialized(&self.fallback),
            table,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MemorizerModel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let doc = MemorizerDoc::deserialize(deserializer)?;
        let fallback = parse_bits(&doc.fallback, doc.target_width).map_err(D::Error::custom)?;
        let mut table = HashMap::with_capacity(doc.table.len());
        for (s, t) in &doc.table {
            table.insert(
                parse_bits(s, doc.state_width).map_err(D::Error::custom)?,
                parse_bits(t, doc.target_width).map_err(D::Error::custom)?,
            );
        }
        Ok(MemorizerModel {
            state_width: doc.state_width,
            table,
            fallback,
        })
    }
}
