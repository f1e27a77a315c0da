//! C ABI over the dialoforge pipeline.
//!
//! Objects cross the boundary as opaque handles created by `df_*_new`-style
//! functions and released with the matching `df_*_free`. Every fallible call
//! returns a [`DfStatus`]; on failure the message is available from
//! [`df_last_error`] on the same thread. Strings handed out by the library
//! must be released with [`df_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use dialoforge::encoding::{encode_dataset, EncodedDataset, EncodedSplit};
use dialoforge::engine::{generate_dataset, Dataset, GeneratorConfig, Split};
use dialoforge::eval::{LinearConfig, Model, ModelKind};
use dialoforge::inject::{inject_errors, ErrorConfig};
use dialoforge::io::{write_dataset_dir, RunManifest};
use dialoforge::ontology::{load_ontology, Ontology};
use dialoforge::presets::{preset_config, preset_ontology};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Invalid ontology, config or argument value.
    Validation = 3,
    /// Failure while running a pipeline stage.
    Runtime = 4,
    /// File system error.
    Io = 5,
    /// Index or size outside the valid range.
    OutOfRange = 6,
    /// The library panicked; the handle arguments should be considered lost.
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfSplit {
    Train = 0,
    Val = 1,
    Test = 2,
}

impl From<DfSplit> for Split {
    fn from(s: DfSplit) -> Self {
        match s {
            DfSplit::Train => Split::Train,
            DfSplit::Val => Split::Val,
            DfSplit::Test => Split::Test,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfModelKind {
    Memorizer = 0,
    Linear = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DfGeneratorConfig {
    pub n_dialogues: usize,
    pub p_chitchat: f64,
    pub p_mind_change: f64,
    pub p_domain_change: f64,
    pub max_stack_depth: usize,
    pub seed: u64,
    pub split_train: f64,
    pub split_val: f64,
    pub split_test: f64,
    pub p_volunteer: f64,
    pub p_follow_up: f64,
}

impl From<&GeneratorConfig> for DfGeneratorConfig {
    fn from(c: &GeneratorConfig) -> Self {
        DfGeneratorConfig {
            n_dialogues: c.n_dialogues,
            p_chitchat: c.p_chitchat,
            p_mind_change: c.p_mind_change,
            p_domain_change: c.p_domain_change,
            max_stack_depth: c.max_stack_depth,
            seed: c.seed,
            split_train: c.split_fractions[0],
            split_val: c.split_fractions[1],
            split_test: c.split_fractions[2],
            p_volunteer: c.p_volunteer,
            p_follow_up: c.p_follow_up,
        }
    }
}

impl From<&DfGeneratorConfig> for GeneratorConfig {
    fn from(c: &DfGeneratorConfig) -> Self {
        GeneratorConfig {
            n_dialogues: c.n_dialogues,
            p_chitchat: c.p_chitchat,
            p_mind_change: c.p_mind_change,
            p_domain_change: c.p_domain_change,
            max_stack_depth: c.max_stack_depth,
            seed: c.seed,
            split_fractions: [c.split_train, c.split_val, c.split_test],
            p_volunteer: c.p_volunteer,
            p_follow_up: c.p_follow_up,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DfErrorConfig {
    pub p_intent: f64,
    pub p_action: f64,
    pub p_slot: f64,
    pub relabel_weight: f64,
    pub unk_weight: f64,
    pub seed: u64,
    /// Non-zero leaves val and test untouched.
    pub train_only: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DfLinearConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl From<&LinearConfig> for DfLinearConfig {
    fn from(c: &LinearConfig) -> Self {
        DfLinearConfig {
            epochs: c.epochs,
            learning_rate: c.learning_rate,
            l2: c.l2,
            batch_size: c.batch_size,
            threshold: c.threshold,
            seed: c.seed,
        }
    }
}

impl From<&DfLinearConfig> for LinearConfig {
    fn from(c: &DfLinearConfig) -> Self {
        LinearConfig {
            epochs: c.epochs,
            learning_rate: c.learning_rate,
            l2: c.l2,
            batch_size: c.batch_size,
            threshold: c.threshold,
            seed: c.seed,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DfMetrics {
    pub rows: usize,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

/// Opaque validated ontology.
pub struct DfOntology(Ontology);

/// Opaque generated (or perturbed) dataset together with its ontology.
pub struct DfDataset {
    ontology: Ontology,
    dataset: Dataset,
}

/// Opaque encoded dataset.
pub struct DfEncoded(EncodedDataset);

/// Opaque trained model.
pub struct DfModel(Model);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(message).ok());
}

struct Failure(DfStatus, String);

impl From<dialoforge::Error> for Failure {
    fn from(e: dialoforge::Error) -> Self {
        let status = if e.is_validation() {
            DfStatus::Validation
        } else if matches!(e, dialoforge::Error::Io { .. }) {
            DfStatus::Io
        } else {
            DfStatus::Runtime
        };
        Failure(status, e.to_string())
    }
}

macro_rules! impl_failure_from {
    ($($t:ty),*) => {
        $(impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                dialoforge::Error::from(e).into()
            }
        })*
    };
}

impl_failure_from!(
    dialoforge::ontology::OntologyError,
    dialoforge::engine::EngineError,
    dialoforge::inject::InjectError,
    dialoforge::encoding::EncodingError,
    dialoforge::eval::EvalError
);

fn fail<T>(status: DfStatus, message: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, message.into()))
}

/// Run `body`, translating errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> DfStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DfStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            DfStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        fail(DfStatus::NullArgument, format!("`{name}` is NULL"))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be NULL or a NUL-terminated string.
unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    non_null(p, name)?;
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(DfStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

/// # Safety
/// `p` must be NULL or point to a live handle of type `T`.
unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    non_null(p, name)?;
    Ok(&*p)
}

/// # Safety
/// `out` must be NULL or valid for a write of `T`.
unsafe fn write_out<T>(out: *mut T, value: T, name: &str) -> Result<(), Failure> {
    non_null(out, name)?;
    out.write(value);
    Ok(())
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .or_else(|_| fail(DfStatus::Runtime, "string contains NUL"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn df_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next library call on the same thread.
#[no_mangle]
pub extern "C" fn df_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Release a string returned by the library. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn df_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse and validate an ontology JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn df_ontology_from_json(json: *const c_char, out: *mut *mut DfOntology) -> DfStatus {
    guard(|| {
        non_null(out, "out")?;
        let ontology = load_ontology(str_arg(json, "json")?)?;
        write_out(out, Box::into_raw(Box::new(DfOntology(ontology))), "out")
    })
}

/// Load a bundled preset (`simple`, `medium`, `hard`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn df_ontology_preset(name: *const c_char, out: *mut *mut DfOntology) -> DfStatus {
    guard(|| {
        non_null(out, "out")?;
        let ontology = preset_ontology(str_arg(name, "name")?)?;
        write_out(out, Box::into_raw(Box::new(DfOntology(ontology))), "out")
    })
}

/// # Safety
/// `ontology` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn df_ontology_free(ontology: *mut DfOntology) {
    if !ontology.is_null() {
        drop(Box::from_raw(ontology));
    }
}

/// Number of domains and atomic actions.
///
/// # Safety
/// `ontology` must be a live handle; the out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn df_ontology_counts(
    ontology: *const DfOntology,
    n_domains: *mut usize,
    n_actions: *mut usize,
) -> DfStatus {
    guard(|| {
        let o = &handle(ontology, "ontology")?.0;
        write_out(n_domains, o.domains().len(), "n_domains")?;
        write_out(n_actions, o.action_catalog().len(), "n_actions")
    })
}

/// Id of the `index`-th catalog action; free with [`df_string_free`].
///
/// # Safety
/// `ontology` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn df_ontology_action_name(
    ontology: *const DfOntology,
    index: usize,
    out: *mut *mut c_char,
) -> DfStatus {
    guard(|| {
        let o = &handle(ontology, "ontology")?.0;
        non_null(out, "out")?;
        let Some(action) = o.action_catalog().get(index) else {
            return fail(DfStatus::OutOfRange, format!("action index {index} out of range"));
        };
        write_out(out, into_c_string(action.to_string())?, "out")
    })
}

/// Hex SHA-256 of the ontology; free with [`df_string_free`].
///
/// # Safety
/// `ontology` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn df_ontology_hash(ontology: *const DfOntology, out: *mut *mut c_char) -> DfStatus {
    guard(|| {
        let o = &handle(ontology, "ontology")?.0;
        non_null(out, "out")?;
        write_out(out, into_c_string(o.hash())?, "out")
    })
}

/// Default generator settings, or a preset's settings when `preset` is
/// not NULL.
///
/// # Safety
/// `preset` must be NULL or a NUL-terminated string; `out` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn df_generator_config_default(
    preset: *const c_char,
    out: *mut DfGeneratorConfig,
) -> DfStatus {
    guard(|| {
        let cfg = if preset.is_null() {
            GeneratorConfig::default()
        } else {
            preset_config(str_arg(preset, "preset")?)?
        };
        write_out(out, DfGeneratorConfig::from(&cfg), "out")
    })
}

/// Generate a dataset.
///
/// # Safety
/// `ontology` and `cfg` must be valid; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn df_generate(
    ontology: *const DfOntology,
    cfg: *const DfGeneratorConfig,
    out: *mut *mut DfDataset,
) -> DfStatus {
    guard(|| {
        let o = &handle(ontology, "ontology")?.0;
        let cfg = GeneratorConfig::from(handle(cfg, "cfg")?);
        non_null(out, "out")?;
        let dataset = generate_dataset(o, &cfg)?;
        let handle = Box::new(DfDataset {
            ontology: o.clone(),
            dataset,
        });
        write_out(out, Box::into_raw(handle), "out")
    })
}

/// # Safety
/// `dataset` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn df_dataset_free(dataset: *mut DfDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Dialogue and turn counts of one split.
///
/// # Safety
/// `dataset` must be a live handle; out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn df_dataset_split_size(
    dataset: *const DfDataset,
    split: DfSplit,
    n_dialogues: *mut usize,
    n_turns: *mut usize,
) -> DfStatus {
    guard(|| {
        let d = handle(dataset, "dataset")?;
        let dialogues = d.dataset.split(split.into());
        write_out(n_dialogues, dialogues.len(), "n_dialogues")?;
        write_out(n_turns, dialogues.iter().map(|d| d.turns.len()).sum(), "n_turns")
    })
}

/// Write the dataset directory (split files and manifest) to `dir`.
///
/// # Safety
/// `dataset` must be a live handle; `dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn df_dataset_write_dir(dataset: *const DfDataset, dir: *const c_char) -> DfStatus {
    guard(|| {
        let d = handle(dataset, "dataset")?;
        let dir = Path::new(str_arg(dir, "dir")?);
        let manifest = RunManifest::for_generated(&d.dataset, &d.ontology);
        write_dataset_dir(dir, &d.dataset, &manifest)?;
        Ok(())
    })
}

/// Perturbed copy of `dataset`; `n_perturbed` (may be NULL) receives the
/// number of changed labels.
///
/// # Safety
/// `dataset` and `cfg` must be valid; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn df_dataset_inject(
    dataset: *const DfDataset,
    cfg: *const DfErrorConfig,
    out: *mut *mut DfDataset,
    n_perturbed: *mut usize,
) -> DfStatus {
    guard(|| {
        let d = handle(dataset, "dataset")?;
        let c = handle(cfg, "cfg")?;
        non_null(out, "out")?;
        let cfg = ErrorConfig {
            p_intent: c.p_intent,
            p_action: c.p_action,
            p_slot: c.p_slot,
            mode_weights: (c.relabel_weight, c.unk_weight),
            seed: c.seed,
            train_only: c.train_only != 0,
        };
        let (noisy, records, _) = inject_errors(&d.dataset, &d.ontology, &cfg)?;
        if !n_perturbed.is_null() {
            n_perturbed.write(records.len());
        }
        let handle = Box::new(DfDataset {
            ontology: d.ontology.clone(),
            dataset: noisy,
        });
        write_out(out, Box::into_raw(handle), "out")
    })
}

/// Encode every split with a history window of `window` system turns.
///
/// # Safety
/// `dataset` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn df_dataset_encode(
    dataset: *const DfDataset,
    window: usize,
    out: *mut *mut DfEncoded,
) -> DfStatus {
    guard(|| {
        let d = handle(dataset, "dataset")?;
        non_null(out, "out")?;
        let encoded = encode_dataset(&d.dataset, &d.ontology, window)?;
        write_out(out, Box::into_raw(Box::new(DfEncoded(encoded))), "out")
    })
}

/// # Safety
/// `encoded` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn df_encoded_free(encoded: *mut DfEncoded) {
    if !encoded.is_null() {
        drop(Box::from_raw(encoded));
    }
}

/// Row count of a split plus the state and target widths.
///
/// # Safety
/// `encoded` must be a live handle; out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn df_encoded_shape(
    encoded: *const DfEncoded,
    split: DfSplit,
    rows: *mut usize,
    state_width: *mut usize,
    target_width: *mut usize,
) -> DfStatus {
    guard(|| {
        let e = &handle(encoded, "encoded")?.0;
        write_out(rows, e.split(split.into()).len(), "rows")?;
        write_out(state_width, e.layout.width(), "state_width")?;
        write_out(target_width, e.layout.target_width(), "target_width")
    })
}

fn copy_bits(bits: &dialoforge::encoding::Bits, out: *mut u8, len: usize) -> Result<(), Failure> {
    if len != bits.len() {
        return fail(
            DfStatus::OutOfRange,
            format!("buffer holds {len} entries, row has {}", bits.len()),
        );
    }
    for (i, b) in bits.iter().enumerate() {
        // SAFETY: the caller guarantees `out` holds `len` bytes.
        unsafe { out.add(i).write(u8::from(*b)) };
    }
    Ok(())
}

/// Copy one encoded row as 0/1 bytes into caller buffers of exactly the
/// state and target widths.
///
/// # Safety
/// `state` must hold `state_len` bytes and `target` `target_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn df_encoded_row(
    encoded: *const DfEncoded,
    split: DfSplit,
    row: usize,
    state: *mut u8,
    state_len: usize,
    target: *mut u8,
    target_len: usize,
) -> DfStatus {
    guard(|| {
        let e = &handle(encoded, "encoded")?.0;
        non_null(state, "state")?;
        non_null(target, "target")?;
        let s: &EncodedSplit = e.split(split.into());
        if row >= s.len() {
            return fail(DfStatus::OutOfRange, format!("row {row} out of range"));
        }
        copy_bits(&s.states[row], state, state_len)?;
        copy_bits(&s.targets[row], target, target_len)
    })
}

/// Default linear training settings.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn df_linear_config_default(out: *mut DfLinearConfig) -> DfStatus {
    guard(|| write_out(out, DfLinearConfig::from(&LinearConfig::default()), "out"))
}

/// Train a model on one split. `linear` may be NULL for defaults and is
/// ignored for the memorizer.
///
/// # Safety
/// `encoded` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn df_model_train(
    encoded: *const DfEncoded,
    split: DfSplit,
    kind: DfModelKind,
    linear: *const DfLinearConfig,
    out: *mut *mut DfModel,
) -> DfStatus {
    guard(|| {
        let e = &handle(encoded, "encoded")?.0;
        non_null(out, "out")?;
        let linear = if linear.is_null() {
            LinearConfig::default()
        } else {
            LinearConfig::from(&*linear)
        };
        let kind = match kind {
            DfModelKind::Memorizer => ModelKind::Memorizer,
            DfModelKind::Linear => ModelKind::Linear,
        };
        let model = Model::train(kind, e.split(split.into()), &linear)?;
        write_out(out, Box::into_raw(Box::new(DfModel(model))), "out")
    })
}

/// # Safety
/// `model` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn df_model_free(model: *mut DfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Predict one state given as `state_len` 0/1 bytes; writes the target as
/// `target_len` 0/1 bytes.
///
/// # Safety
/// `state` must hold `state_len` bytes and `target` `target_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn df_model_predict(
    model: *const DfModel,
    state: *const u8,
    state_len: usize,
    target: *mut u8,
    target_len: usize,
) -> DfStatus {
    guard(|| {
        let m = &handle(model, "model")?.0;
        non_null(state, "state")?;
        non_null(target, "target")?;
        let input = std::slice::from_raw_parts(state, state_len);
        let bits: dialoforge::encoding::Bits = input.iter().map(|b| *b != 0).collect();
        let prediction = m.predict(&bits)?;
        copy_bits(&prediction, target, target_len)
    })
}

/// Score a model on one split.
///
/// # Safety
/// Handles must be live; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn df_model_evaluate(
    model: *const DfModel,
    encoded: *const DfEncoded,
    split: DfSplit,
    out: *mut DfMetrics,
) -> DfStatus {
    guard(|| {
        let m = &handle(model, "model")?.0;
        let e = &handle(encoded, "encoded")?.0;
        non_null(out, "out")?;
        let r = m.evaluate(e.split(split.into()), &e.layout.actions)?;
        let metrics = DfMetrics {
            rows: r.rows,
            micro_precision: r.micro.precision,
            micro_recall: r.micro.recall,
            micro_f1: r.micro.f1,
            macro_precision: r.macro_.precision,
            macro_recall: r.macro_.recall,
            macro_f1: r.macro_.f1,
        };
        write_out(out, metrics, "out")
    })
}
