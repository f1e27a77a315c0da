//! Dataset directories: `manifest.json`, one JSON-Lines file per split, an
//! optional `perturbations.jsonl` sidecar and an optional `encoded/` folder.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{Dataset, DatasetInfo, Dialogue, GeneratorConfig, Split};
use crate::error::{Error, Result};
use crate::inject::PerturbationRecord;
use crate::ontology::Ontology;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PERTURBATIONS_FILE: &str = "perturbations.jsonl";
pub const ENCODED_DIR: &str = "encoded";
pub const TOOL_NAME: &str = "dialoforge";

/// Dataset-level facts carried from stage to stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub ontology_hash: String,
    pub ontology: serde_json::Value,
    pub generator: GeneratorConfig,
    pub splits: BTreeMap<String, usize>,
    #[serde(default)]
    pub perturbation: Option<serde_json::Value>,
    #[serde(default)]
    pub encoding: Option<serde_json::Value>,
}

/// Written into every output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config: serde_json::Value,
    pub seed: u64,
    #[serde(default)]
    pub input_hashes: BTreeMap<String, String>,
    /// Only set from `SOURCE_DATE_EPOCH`; wall-clock time would break
    /// byte-identical re-runs.
    pub timestamp: Option<String>,
    #[serde(default)]
    pub dataset: Option<DatasetManifest>,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: serde_json::Value, seed: u64) -> Self {
        RunManifest {
            tool: TOOL_NAME.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            config,
            seed,
            input_hashes: BTreeMap::new(),
            timestamp: std::env::var("SOURCE_DATE_EPOCH").ok(),
            dataset: None,
        }
    }

    /// Manifest for a dataset straight out of the generator.
    pub fn for_generated(dataset: &Dataset, ontology: &Ontology) -> Self {
        let cfg = &dataset.info.config;
        let config = serde_json::to_value(cfg).expect("generator config serializes");
        let mut manifest = RunManifest::new("generate", config, cfg.seed);
        manifest.dataset = Some(DatasetManifest::describe(dataset, ontology));
        manifest
    }
}

impl DatasetManifest {
    pub fn describe(dataset: &Dataset, ontology: &Ontology) -> Self {
        DatasetManifest {
            ontology_hash: ontology.hash(),
            ontology: ontology.to_value(),
            generator: dataset.info.config.clone(),
            splits: Split::ALL
                .iter()
                .map(|s| (s.as_str().to_string(), dataset.split(*s).len()))
                .collect(),
            perturbation: None,
            encoding: None,
        }
    }
}

pub fn split_file(dir: &Path, split: Split) -> PathBuf {
    dir.join(format!("{}.jsonl", split.as_str()))
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e))
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut out, item).map_err(|e| Error::format(path, e))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut items = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item =
            serde_json::from_str(&line).map_err(|e| Error::format(path, format!("line {}: {e}", n + 1)))?;
        items.push(item);
    }
    Ok(items)
}

/// Create `dir` for output, refusing to write into `input`.
pub fn prepare_output_dir(dir: &Path, input: Option<&Path>) -> Result<()> {
    if let Some(input) = input {
        let same = match (fs::canonicalize(dir), fs::canonicalize(input)) {
            (Ok(a), Ok(b)) => a == b,
            _ => false,
        };
        if same {
            return Err(Error::Usage(format!(
                "output directory {} is the input directory",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Write the split files of `dataset` plus `manifest` into `dir`.
pub fn write_dataset_dir(dir: &Path, dataset: &Dataset, manifest: &RunManifest) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for split in Split::ALL {
        write_jsonl(&split_file(dir, split), dataset.split(split))?;
    }
    write_json(&dir.join(MANIFEST_FILE), manifest)
}

/// A dataset directory loaded back into memory.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub ontology: Ontology,
    pub manifest: RunManifest,
}

pub fn read_dataset_dir(dir: &Path) -> Result<LoadedDataset> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest: RunManifest = read_json(&manifest_path)?;
    let info = manifest
        .dataset
        .clone()
        .ok_or_else(|| Error::format(&manifest_path, "manifest does not describe a dataset"))?;
    let ontology = Ontology::from_value(info.ontology.clone())?;
    if ontology.hash() != info.ontology_hash {
        return Err(Error::format(&manifest_path, "ontology hash mismatch"));
    }
    let load = |split: Split| -> Result<Vec<Dialogue>> { read_jsonl(&split_file(dir, split)) };
    let dataset = Dataset {
        train: load(Split::Train)?,
        val: load(Split::Val)?,
        test: load(Split::Test)?,
        info: DatasetInfo {
            ontology_hash: info.ontology_hash.clone(),
            config: info.generator.clone(),
            seed: info.generator.seed,
        },
    };
    Ok(LoadedDataset {
        dataset,
        ontology,
        manifest,
    })
}

/// Hashes of every regular file directly inside `dir`, keyed by file name.
pub fn hash_dir_files(dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_file() {
            let name = entry.file_name().to_string_lossy().into_owned();
            out.insert(name, hash_file(&path)?);
        }
    }
    Ok(out)
}

pub fn write_perturbations(dir: &Path, records: &[PerturbationRecord]) -> Result<()> {
    write_jsonl(&dir.join(PERTURBATIONS_FILE), records)
}

pub fn read_perturbations(dir: &Path) -> Result<Vec<PerturbationRecord>> {
    read_jsonl(&dir.join(PERTURBATIONS_FILE))
}
