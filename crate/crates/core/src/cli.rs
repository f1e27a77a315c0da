//! Command-line front end. `run_cli` returns the process exit code:
//! 0 success, 1 invalid input definitions or settings, 2 runtime failure,
//! 64 usage error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::encoding::{
    encode_dataset, find_conflicts, read_encoded_dir, write_encoded_dir, write_split_csv, EncodedDataset,
    Layout,
};
use crate::engine::{generate_dataset, GeneratorConfig, Split};
use crate::error::{Error, Result};
use crate::eval::{robustness_sweep, train_linear, LinearConfig, Model, ModelKind, SweepConfig, TrainingLog};
use crate::inject::{inject_errors, ErrorConfig};
use crate::io::{
    hash_dir_files, hash_file, prepare_output_dir, read_dataset_dir, write_dataset_dir, write_json,
    write_perturbations, DatasetManifest, RunManifest, ENCODED_DIR, MANIFEST_FILE,
};
use crate::ontology::{load_ontology, Ontology};
use crate::presets::{preset_config, preset_ontology};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

pub const SEED_ENV: &str = "DIALOFORGE_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "dialoforge",
    version,
    about = "Synthetic task-oriented dialogue generator and label-noise benchmark"
)]
struct Cli {
    /// Worker threads (0 = one per core). Never changes output.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check an ontology file.
    Validate { ontology: PathBuf },
    /// Generate a dataset directory.
    Generate(GenerateArgs),
    /// Write a copy of a dataset with label noise.
    Inject(InjectArgs),
    /// Add binary state/target encodings to a dataset.
    Encode(EncodeArgs),
    /// Fit a baseline policy.
    Train(TrainArgs),
    /// Score a trained model on one split.
    Eval(EvalArgs),
    /// Error-rate robustness sweep.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false)]
struct SourceArgs {
    /// Bundled ontology: simple, medium or hard.
    #[arg(long, group = "source")]
    preset: Option<String>,
    /// Ontology JSON file.
    #[arg(long, group = "source")]
    ontology: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    dialogues: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    p_chitchat: Option<f64>,
    #[arg(long)]
    p_mind_change: Option<f64>,
    #[arg(long)]
    p_domain_change: Option<f64>,
    #[arg(long)]
    max_stack_depth: Option<usize>,
    #[arg(long)]
    p_volunteer: Option<f64>,
    #[arg(long)]
    p_follow_up: Option<f64>,
    /// Switch all three events off.
    #[arg(long)]
    events_off: bool,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    gen: GenArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Relabel,
    Unk,
    Mixed,
}

impl ModeArg {
    fn weights(self) -> (f64, f64) {
        match self {
            ModeArg::Relabel => (1.0, 0.0),
            ModeArg::Unk => (0.0, 1.0),
            ModeArg::Mixed => (0.5, 0.5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitsArg {
    All,
    Train,
}

#[derive(Debug, Args)]
struct InjectArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    p_intent: f64,
    #[arg(long, default_value_t = 0.0)]
    p_action: f64,
    #[arg(long, default_value_t = 0.0)]
    p_slot: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Mixed)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = SplitsArg::All)]
    splits: SplitsArg,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Number of previous system turns in the state.
    #[arg(long, default_value_t = 1)]
    window: usize,
    /// Also write encoded/{split}.csv with 0/1 cells.
    #[arg(long)]
    csv: bool,
}

#[derive(Debug, Args)]
struct LinearArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
}

impl LinearArgs {
    fn resolve(&self, seed: u64) -> LinearConfig {
        let d = LinearConfig::default();
        LinearConfig {
            epochs: self.epochs.unwrap_or(d.epochs),
            learning_rate: self.lr.unwrap_or(d.learning_rate),
            l2: self.l2.unwrap_or(d.l2),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            threshold: self.threshold.unwrap_or(d.threshold),
            seed,
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    model: String,
    /// Dataset directory (encoded or not).
    #[arg(long = "in")]
    input: PathBuf,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "train")]
    split: String,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    linear: LinearArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Pretty,
    Json,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    /// Report directory; without it the report goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Pretty)]
    format: FormatArg,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    gen: GenArgs,
    /// Comma-separated, strictly increasing.
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', default_value = "memorizer")]
    models: Vec<String>,
    /// Number of seeds per point, counting up from --seed.
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Mixed)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = SplitsArg::All)]
    splits: SplitsArg,
    #[arg(long, default_value_t = 1)]
    window: usize,
    #[command(flatten)]
    linear: LinearArgs,
    #[arg(long)]
    out: PathBuf,
}

/// `--seed`, overridden by `DIALOFORGE_SEED` when set.
fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Usage(format!("{SEED_ENV}={v} is not an unsigned integer"))),
        Err(_) => Ok(flag.unwrap_or(0)),
    }
}

fn load_source(source: &SourceArgs) -> Result<(Ontology, Option<GeneratorConfig>, String)> {
    match (&source.preset, &source.ontology) {
        (Some(name), _) => Ok((
            preset_ontology(name)?,
            Some(preset_config(name)?),
            format!("preset:{name}"),
        )),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            Ok((load_ontology(&text)?, None, hash_file(path)?))
        }
        (None, None) => Err(Error::Usage("one of --preset or --ontology is required".into())),
    }
}

fn resolve_generator(base: Option<GeneratorConfig>, args: &GenArgs) -> Result<GeneratorConfig> {
    let mut cfg = base.unwrap_or_default();
    if let Some(n) = args.dialogues {
        cfg.n_dialogues = n;
    }
    cfg.seed = resolve_seed(args.seed)?;
    if args.events_off {
        cfg = cfg.events_off();
    }
    let set = |field: &mut f64, value: Option<f64>| {
        if let Some(v) = value {
            *field = v;
        }
    };
    set(&mut cfg.p_chitchat, args.p_chitchat);
    set(&mut cfg.p_mind_change, args.p_mind_change);
    set(&mut cfg.p_domain_change, args.p_domain_change);
    set(&mut cfg.p_volunteer, args.p_volunteer);
    set(&mut cfg.p_follow_up, args.p_follow_up);
    if let Some(d) = args.max_stack_depth {
        cfg.max_stack_depth = d;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn to_value<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("configs serialize")
}

fn cmd_validate(path: &Path) -> Result<()> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ontology = load_ontology(&text)?;
    eprintln!(
        "{}: ok ({} domains, {} topic slots, {} actions)",
        path.display(),
        ontology.domains().len(),
        ontology.total_slots(),
        ontology.action_catalog().len()
    );
    Ok(())
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let (ontology, base, source) = load_source(&args.source)?;
    let cfg = resolve_generator(base, &args.gen)?;
    prepare_output_dir(&args.out, None)?;
    let dataset = generate_dataset(&ontology, &cfg)?;
    let mut manifest = RunManifest::for_generated(&dataset, &ontology);
    manifest.input_hashes.insert("ontology".into(), source);
    write_dataset_dir(&args.out, &dataset, &manifest)?;
    info!(
        "generated {} dialogues ({} turns) into {}",
        dataset.len(),
        dataset.total_turns(),
        args.out.display()
    );
    Ok(())
}

fn cmd_inject(args: &InjectArgs) -> Result<()> {
    let loaded = read_dataset_dir(&args.input)?;
    let cfg = ErrorConfig {
        p_intent: args.p_intent,
        p_action: args.p_action,
        p_slot: args.p_slot,
        mode_weights: args.mode.weights(),
        seed: resolve_seed(args.seed)?,
        train_only: args.splits == SplitsArg::Train,
    };
    cfg.validate()?;
    prepare_output_dir(&args.out, Some(&args.input))?;
    let (noisy, records, stats) = inject_errors(&loaded.dataset, &loaded.ontology, &cfg)?;
    let mut manifest = RunManifest::new("inject", to_value(&cfg), cfg.seed);
    manifest.input_hashes = hash_dir_files(&args.input)?;
    let mut dataset = DatasetManifest::describe(&noisy, &loaded.ontology);
    dataset.perturbation = Some(serde_json::json!({ "config": cfg, "stats": stats }));
    manifest.dataset = Some(dataset);
    write_dataset_dir(&args.out, &noisy, &manifest)?;
    write_perturbations(&args.out, &records)?;
    info!("{} labels perturbed", records.len());
    Ok(())
}

fn cmd_encode(args: &EncodeArgs) -> Result<()> {
    let loaded = read_dataset_dir(&args.input)?;
    prepare_output_dir(&args.out, Some(&args.input))?;
    let encoded = encode_dataset(&loaded.dataset, &loaded.ontology, args.window)?;
    let mut conflicts = serde_json::Map::new();
    for split in Split::ALL {
        let n = find_conflicts(encoded.split(split)).len();
        if n > 0 {
            warn!("{}: {n} states map to more than one target set", split.as_str());
        }
        conflicts.insert(split.as_str().into(), n.into());
    }
    let config = serde_json::json!({ "window": args.window, "csv": args.csv });
    let mut manifest = RunManifest::new("encode", config, loaded.manifest.seed);
    manifest.input_hashes = hash_dir_files(&args.input)?;
    let mut dataset = loaded
        .manifest
        .dataset
        .clone()
        .expect("read_dataset_dir checked the dataset section");
    dataset.encoding = Some(serde_json::json!({
        "layout_version": encoded.layout.version,
        "window": encoded.layout.window,
        "state_width": encoded.layout.width(),
        "target_width": encoded.layout.target_width(),
        "conflicting_states": conflicts,
    }));
    manifest.dataset = Some(dataset);
    write_dataset_dir(&args.out, &loaded.dataset, &manifest)?;
    if loaded
        .manifest
        .dataset
        .as_ref()
        .is_some_and(|d| d.perturbation.is_some())
    {
        let records = crate::io::read_perturbations(&args.input)?;
        write_perturbations(&args.out, &records)?;
    }
    let dir = args.out.join(ENCODED_DIR);
    write_encoded_dir(&dir, &encoded)?;
    if args.csv {
        for split in Split::ALL {
            let path = dir.join(format!("{}.csv", split.as_str()));
            let mut file = std::io::BufWriter::new(fs::File::create(&path).map_err(|e| Error::io(&path, e))?);
            write_split_csv(&mut file, encoded.split(split), &encoded.layout)
                .and_then(|_| std::io::Write::flush(&mut file))
                .map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(())
}

/// Encoded view of a dataset directory: read from `encoded/` when present,
/// otherwise computed with a one-turn window (or the given layout's).
fn load_encoded(dir: &Path, window: Option<usize>) -> Result<EncodedDataset> {
    let encoded_dir = dir.join(ENCODED_DIR);
    if encoded_dir.is_dir() {
        return read_encoded_dir(&encoded_dir);
    }
    let loaded = read_dataset_dir(dir)?;
    Ok(encode_dataset(
        &loaded.dataset,
        &loaded.ontology,
        window.unwrap_or(1),
    )?)
}

fn parse_split(name: &str) -> Result<Split> {
    Split::parse(name).ok_or_else(|| Error::Usage(format!("unknown split `{name}`")))
}

/// What `train` writes.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub manifest: RunManifest,
    pub ontology_hash: String,
    pub layout: Layout,
    pub training: Option<TrainingLog>,
    pub model: Model,
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let kind: ModelKind = args.model.parse()?;
    let split = parse_split(&args.split)?;
    let seed = resolve_seed(args.seed)?;
    let linear = args.linear.resolve(seed);
    linear.validate()?;
    let encoded = load_encoded(&args.input, None)?;
    let rows = encoded.split(split);
    let (model, training) = match kind {
        ModelKind::Memorizer => (Model::train(kind, rows, &linear)?, None),
        ModelKind::Linear => {
            let (m, log) = train_linear(rows, &linear)?;
            info!(
                "loss {:.5} -> {:.5} ({} backtracks)",
                log.losses[0],
                log.losses.last().unwrap(),
                log.backtracks
            );
            (Model::Linear(m), Some(log))
        }
    };
    let config = serde_json::json!({ "model": kind, "split": split, "linear": linear });
    let mut manifest = RunManifest::new("train", config, seed);
    manifest.input_hashes = hash_dir_files(&args.input)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    write_json(
        &args.out,
        &ModelFile {
            manifest,
            ontology_hash: encoded.ontology_hash.clone(),
            layout: encoded.layout.clone(),
            training,
            model,
        },
    )
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let split = parse_split(&args.split)?;
    let file: ModelFile = crate::io::read_json(&args.model)?;
    let encoded = load_encoded(&args.input, Some(file.layout.window))?;
    if encoded.ontology_hash != file.ontology_hash || encoded.layout != file.layout {
        return Err(Error::Usage(format!(
            "{} was trained on a different ontology or layout",
            args.model.display()
        )));
    }
    let report = file
        .model
        .evaluate(encoded.split(split), &encoded.layout.actions)?;
    let pretty = report.to_pretty();
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    match &args.out {
        Some(dir) => {
            prepare_output_dir(dir, Some(&args.input))?;
            let config = serde_json::json!({ "split": split, "model": file.model.kind() });
            let mut manifest = RunManifest::new("eval", config, file.manifest.seed);
            manifest.input_hashes = hash_dir_files(&args.input)?;
            manifest
                .input_hashes
                .insert("model".into(), hash_file(&args.model)?);
            write_json(&dir.join(MANIFEST_FILE), &manifest)?;
            let report_txt = dir.join("report.txt");
            fs::write(&report_txt, &pretty).map_err(|e| Error::io(&report_txt, e))?;
            let report_json = dir.join("report.json");
            fs::write(&report_json, &json).map_err(|e| Error::io(&report_json, e))?;
        }
        None => match args.format {
            FormatArg::Pretty => print!("{pretty}"),
            FormatArg::Json => print!("{json}"),
        },
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let (ontology, base, source) = load_source(&args.source)?;
    let generator = resolve_generator(base, &args.gen)?;
    let models = args
        .models
        .iter()
        .map(|m| m.parse::<ModelKind>())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if args.seeds == 0 {
        return Err(Error::Usage("--seeds must be positive".into()));
    }
    let cfg = SweepConfig {
        rates: args
            .rates
            .clone()
            .unwrap_or_else(|| crate::eval::DEFAULT_RATES.to_vec()),
        models,
        seeds: (0..args.seeds).map(|i| generator.seed.wrapping_add(i)).collect(),
        mode_weights: args.mode.weights(),
        train_only: args.splits == SplitsArg::Train,
        window: args.window,
        linear: args.linear.resolve(0),
    };
    cfg.validate()?;
    prepare_output_dir(&args.out, None)?;
    let result = robustness_sweep(&ontology, &generator, &cfg)?;
    let write = |name: &str, text: &str| {
        let path = args.out.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    };
    write("sweep.csv", &result.to_csv())?;
    write("sweep_long.csv", &result.to_long_csv())?;
    let fits: serde_json::Map<String, serde_json::Value> = cfg
        .models
        .iter()
        .map(|m| (m.to_string(), to_value(&result.fit(*m))))
        .collect();
    write_json(
        &args.out.join("summary.json"),
        &serde_json::json!({ "points": result.summary(), "fits": fits }),
    )?;
    let config = serde_json::json!({ "generator": generator, "sweep": cfg });
    let mut manifest = RunManifest::new("sweep", config, generator.seed);
    manifest.input_hashes.insert("ontology".into(), source);
    write_json(&args.out.join(MANIFEST_FILE), &manifest)?;
    for point in result.summary() {
        info!(
            "rate {:.2} {:<9} micro-F1 {:.4} (+/- {:.4})",
            point.rate, point.model, point.mean_micro_f1, point.std_micro_f1
        );
    }
    Ok(())
}

fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Validate { ontology } => cmd_validate(ontology),
        Command::Generate(a) => cmd_generate(a),
        Command::Inject(a) => cmd_inject(a),
        Command::Encode(a) => cmd_encode(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

/// Parse `argv` (program name first) and run the command.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start {} workers: {e}", cli.jobs);
            return EXIT_RUNTIME;
        }
    };
    match pool.install(|| dispatch(&cli.command)) {
        Ok(()) => EXIT_OK,
        Err(Error::Usage(message)) => {
            eprintln!("error: {message}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            }
        }
    }
}
