//! Bundled ontologies and their default dataset sizes.

use crate::engine::GeneratorConfig;
use crate::ontology::{load_ontology, Ontology, OntologyError};

pub const PRESET_NAMES: [&str; 3] = ["simple", "medium", "hard"];

const SIMPLE: &str = include_str!("../presets/simple.json");
const MEDIUM: &str = include_str!("../presets/medium.json");
const HARD: &str = include_str!("../presets/hard.json");

/// Raw JSON source of a bundled preset.
pub fn preset_source(name: &str) -> Result<&'static str, OntologyError> {
    match name {
        "simple" => Ok(SIMPLE),
        "medium" => Ok(MEDIUM),
        "hard" => Ok(HARD),
        other => Err(OntologyError::UnknownPreset(other.to_string())),
    }
}

pub fn preset_ontology(name: &str) -> Result<Ontology, OntologyError> {
    load_ontology(preset_source(name)?)
}

/// Dialogue count and (train, val, test) sizes for each preset.
pub fn preset_sizes(name: &str) -> Result<(usize, [usize; 3]), OntologyError> {
    match name {
        "simple" => Ok((2000, [1200, 400, 400])),
        "medium" => Ok((6000, [3600, 1200, 1200])),
        "hard" => Ok((10438, [8438, 1000, 1000])),
        other => Err(OntologyError::UnknownPreset(other.to_string())),
    }
}

/// Default generator configuration for a preset.
pub fn preset_config(name: &str) -> Result<GeneratorConfig, OntologyError> {
    let (n, [train, val, test]) = preset_sizes(name)?;
    let total = n as f64;
    Ok(GeneratorConfig {
        n_dialogues: n,
        split_fractions: [train as f64 / total, val as f64 / total, test as f64 / total],
        ..GeneratorConfig::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_counts() {
        for (name, domains, actions) in [("simple", 2, 8), ("medium", 5, 13), ("hard", 7, 26)] {
            let ont = preset_ontology(name).unwrap();
            assert_eq!(ont.domains().len(), domains, "{name}");
            assert_eq!(ont.action_catalog().len(), actions, "{name}");
        }
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(
            preset_ontology("huge"),
            Err(OntologyError::UnknownPreset(_))
        ));
    }

    #[test]
    fn preset_splits_sum() {
        for name in PRESET_NAMES {
            let (n, sizes) = preset_sizes(name).unwrap();
            assert_eq!(sizes.iter().sum::<usize>(), n);
            let cfg = preset_config(name).unwrap();
            assert!((cfg.split_fractions.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
