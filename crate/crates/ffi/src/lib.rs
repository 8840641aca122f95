//! C ABI over `synth-eval`.
//!
//! Every function returns an [`SeStatus`]; results come back through out
//! pointers. Handles are opaque and owned by the caller once returned, to be
//! released with the matching `*_free`. On failure `se_last_error` gives a
//! message for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use synth_eval::generators::{fit_gmm_sampler, vanilla_gan_risk, GeneratorModel, Proportions};
use synth_eval::harness::{distinguishability, nndr};
use synth_eval::ingest::{read_csv, write_csv, ReadOptions, SchemaHint};
use synth_eval::learners::ClassifierSpec;
use synth_eval::linalg::Matrix;
use synth_eval::quality::{diagnostic_report, gate_scores, quality_report, GateThresholds};
use synth_eval::stattests::{
    frobenius_covariance_test, hotelling_t2_regularized, mmd_test, TestConfig,
};
use synth_eval::{Error, Table};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Parse = 5,
    Schema = 6,
    Degenerate = 7,
    NonFinite = 8,
    Unsupported = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeTest {
    Hotelling = 0,
    Frobenius = 1,
    Mmd = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeClassifier {
    RandomForest = 0,
    Logistic = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SePermutationResult {
    pub observed: f64,
    pub p_value: f64,
    pub null_mean: f64,
    pub null_sd: f64,
    pub permutations: usize,
    pub reject: bool,
}

/// A loaded table.
pub struct SeTable {
    inner: Table,
}

/// A fitted generator.
pub struct SeGenerator {
    inner: GeneratorModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SeStatus {
    match e {
        Error::Io { .. } => SeStatus::Io,
        Error::ParseError { .. }
        | Error::MissingValue { .. }
        | Error::EmptyFile
        | Error::RaggedRow(_)
        | Error::Csv(_)
        | Error::Json(_) => SeStatus::Parse,
        Error::UnknownColumn(_)
        | Error::NoLabelColumn
        | Error::SchemaMismatch(_)
        | Error::InvalidSchema(_)
        | Error::NoNumericColumns
        | Error::NoSharedColumns
        | Error::CategoryMismatch
        | Error::TooFewNumericColumns(_)
        | Error::DimensionMismatch(_)
        | Error::ShapeMismatch(_) => SeStatus::Schema,
        Error::EmptyColumn(_)
        | Error::DegenerateInput(_)
        | Error::TooFewReferenceRows(_)
        | Error::BadK { .. } => SeStatus::Degenerate,
        Error::NonFiniteLoss { .. } | Error::DomainError { .. } => SeStatus::NonFinite,
        Error::Unsupported(_) => SeStatus::Unsupported,
        Error::MissingLabels | Error::InvalidArgument(_) => SeStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), SeStatus>) -> SeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SeStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            SeStatus::Panic
        }
    }
}

fn lib<T>(r: synth_eval::Result<T>) -> Result<T, SeStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn fail(status: SeStatus, msg: &str) -> SeStatus {
    set_error(msg.to_string());
    status
}

unsafe fn cstr<'a>(p: *const c_char) -> Result<Option<&'a str>, SeStatus> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| fail(SeStatus::InvalidUtf8, "string is not valid UTF-8"))
}

unsafe fn required<'a>(p: *const c_char, what: &str) -> Result<&'a str, SeStatus> {
    cstr(p)?.ok_or_else(|| fail(SeStatus::NullPointer, &format!("{what} is null")))
}

unsafe fn table<'a>(p: *const SeTable) -> Result<&'a Table, SeStatus> {
    p.as_ref()
        .map(|t| &t.inner)
        .ok_or_else(|| fail(SeStatus::NullPointer, "table handle is null"))
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, SeStatus> {
    p.as_mut()
        .ok_or_else(|| fail(SeStatus::NullPointer, "output pointer is null"))
}

unsafe fn slice<'a>(p: *const f64, n: usize) -> Result<&'a [f64], SeStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(SeStatus::NullPointer, "array is null"));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call on the same thread.
#[no_mangle]
pub extern "C" fn se_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn se_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Reads a CSV file. `label` and `schema_path` may be null.
///
/// # Safety
/// String arguments must be null or nul-terminated; `out_table` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn se_table_read_csv(
    path: *const c_char,
    label: *const c_char,
    schema_path: *const c_char,
    out_table: *mut *mut SeTable,
) -> SeStatus {
    guard(|| {
        let slot = out(out_table)?;
        *slot = ptr::null_mut();
        let path = required(path, "path")?;
        let opts = ReadOptions {
            label: cstr(label)?.map(str::to_string),
            schema_hint: match cstr(schema_path)? {
                Some(p) => Some(lib(SchemaHint::read(p))?),
                None => None,
            },
        };
        let t = lib(read_csv(path, &opts))?;
        *slot = Box::into_raw(Box::new(SeTable { inner: t }));
        Ok(())
    })
}

/// Reads a CSV file using another table's schema, so that column kinds and
/// the label agree.
///
/// # Safety
/// `like` must be a live table handle; see [`se_table_read_csv`].
#[no_mangle]
pub unsafe extern "C" fn se_table_read_csv_like(
    path: *const c_char,
    like: *const SeTable,
    out_table: *mut *mut SeTable,
) -> SeStatus {
    guard(|| {
        let slot = out(out_table)?;
        *slot = ptr::null_mut();
        let path = required(path, "path")?;
        let like = table(like)?;
        let opts = ReadOptions {
            label: like.label_name().map(str::to_string),
            schema_hint: Some(SchemaHint::of(like)),
        };
        let t = lib(read_csv(path, &opts))?;
        *slot = Box::into_raw(Box::new(SeTable { inner: t }));
        Ok(())
    })
}

/// # Safety
/// `t` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn se_table_write_csv(t: *const SeTable, path: *const c_char) -> SeStatus {
    guard(|| {
        let t = table(t)?;
        lib(write_csv(required(path, "path")?, t))
    })
}

/// # Safety
/// `t` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn se_table_shape(
    t: *const SeTable,
    rows: *mut usize,
    cols: *mut usize,
) -> SeStatus {
    guard(|| {
        let t = table(t)?;
        *out(rows)? = t.n_rows();
        *out(cols)? = t.n_cols();
        Ok(())
    })
}

/// Releases a table. Null is ignored.
///
/// # Safety
/// `t` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn se_table_free(t: *mut SeTable) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Overall quality score in [0, 1].
///
/// # Safety
/// Handles must be live; `score` must be writable.
#[no_mangle]
pub unsafe extern "C" fn se_quality_overall(
    real: *const SeTable,
    synth: *const SeTable,
    score: *mut f64,
) -> SeStatus {
    guard(|| {
        let r = lib(quality_report(table(real)?, table(synth)?))?;
        *out(score)? = r.overall;
        Ok(())
    })
}

/// Overall diagnostic score in [0, 1].
///
/// # Safety
/// Handles must be live; `score` must be writable.
#[no_mangle]
pub unsafe extern "C" fn se_diagnostic_overall(
    real: *const SeTable,
    synth: *const SeTable,
    score: *mut f64,
) -> SeStatus {
    guard(|| {
        let r = lib(diagnostic_report(table(real)?, table(synth)?))?;
        *out(score)? = r.overall;
        Ok(())
    })
}

/// Gate decision on two overall scores (inclusive thresholds).
///
/// # Safety
/// `pass` must be writable.
#[no_mangle]
pub unsafe extern "C" fn se_gate(
    quality: f64,
    diagnostic: f64,
    quality_threshold: f64,
    diagnostic_threshold: f64,
    pass: *mut bool,
) -> SeStatus {
    guard(|| {
        let t = GateThresholds {
            quality: quality_threshold,
            diagnostic: diagnostic_threshold,
        };
        *out(pass)? = gate_scores(quality, diagnostic, t).pass;
        Ok(())
    })
}

/// Real-vs-synthetic classification; writes ROC-AUC and the synthetic
/// class F1.
///
/// # Safety
/// Handles must be live; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn se_distinguishability(
    real: *const SeTable,
    synth: *const SeTable,
    classifier: SeClassifier,
    seed: u64,
    roc_auc: *mut f64,
    f1: *mut f64,
) -> SeStatus {
    guard(|| {
        let spec = match classifier {
            SeClassifier::RandomForest => ClassifierSpec::forest(seed),
            SeClassifier::Logistic => ClassifierSpec::logistic(),
        };
        let r = lib(distinguishability(table(real)?, table(synth)?, &spec, seed))?;
        *out(roc_auc)? = r.roc_auc;
        *out(f1)? = r.f1;
        Ok(())
    })
}

/// Permutation two-sample test on row-major `n1×p` and `n2×p` matrices.
///
/// # Safety
/// `x` and `y` must hold `n1·p` and `n2·p` values; `result` must be
/// writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn se_permutation_test(
    test: SeTest,
    x: *const f64,
    n1: usize,
    y: *const f64,
    n2: usize,
    p: usize,
    permutations: usize,
    alpha: f64,
    seed: u64,
    result: *mut SePermutationResult,
) -> SeStatus {
    guard(|| {
        let size = |n: usize| {
            n.checked_mul(p)
                .ok_or_else(|| fail(SeStatus::InvalidArgument, "matrix size overflows"))
        };
        let x = lib(Matrix::new(n1, p, slice(x, size(n1)?)?.to_vec()))?;
        let y = lib(Matrix::new(n2, p, slice(y, size(n2)?)?.to_vec()))?;
        let cfg = TestConfig {
            permutations,
            alpha,
            ..TestConfig::with_seed(seed)
        };
        let r = lib(match test {
            SeTest::Hotelling => hotelling_t2_regularized(&x, &y, &cfg),
            SeTest::Frobenius => frobenius_covariance_test(&x, &y, &cfg),
            SeTest::Mmd => mmd_test(&x, &y, &cfg),
        })?;
        *out(result)? = SePermutationResult {
            observed: r.observed,
            p_value: r.p_value,
            null_mean: r.null_mean,
            null_sd: r.null_sd,
            permutations: r.permutations,
            reject: r.reject,
        };
        Ok(())
    })
}

/// Mean nearest/second-nearest distance ratio from `synth` rows to
/// `reference` rows.
///
/// # Safety
/// Handles must be live; `score` must be writable.
#[no_mangle]
pub unsafe extern "C" fn se_nndr(
    synth: *const SeTable,
    reference: *const SeTable,
    score: *mut f64,
) -> SeStatus {
    guard(|| {
        *out(score)? = lib(nndr(table(synth)?, table(reference)?))?;
        Ok(())
    })
}

/// `mean ln d_real + mean ln(1 − d_fake)` on clamped probabilities.
///
/// # Safety
/// Arrays must hold the stated number of values.
#[no_mangle]
pub unsafe extern "C" fn se_vanilla_gan_risk(
    d_real: *const f64,
    n_real: usize,
    d_fake: *const f64,
    n_fake: usize,
    risk: *mut f64,
) -> SeStatus {
    guard(|| {
        let v = lib(vanilla_gan_risk(
            slice(d_real, n_real)?,
            slice(d_fake, n_fake)?,
        ))?;
        *out(risk)? = v;
        Ok(())
    })
}

/// Fits a per-class Gaussian-mixture sampler with `k` components.
///
/// # Safety
/// `train` must be live; `out_gen` must be writable.
#[no_mangle]
pub unsafe extern "C" fn se_gmm_fit(
    train: *const SeTable,
    k: usize,
    ridge: f64,
    seed: u64,
    out_gen: *mut *mut SeGenerator,
) -> SeStatus {
    guard(|| {
        let slot = out(out_gen)?;
        *slot = ptr::null_mut();
        let s = lib(fit_gmm_sampler(table(train)?, k, ridge, seed))?;
        *slot = Box::into_raw(Box::new(SeGenerator {
            inner: GeneratorModel::Gmm(s),
        }));
        Ok(())
    })
}

/// Loads a generator saved by the command-line tool.
///
/// # Safety
/// `path` must be nul-terminated; `out_gen` must be writable.
#[no_mangle]
pub unsafe extern "C" fn se_generator_load(
    path: *const c_char,
    out_gen: *mut *mut SeGenerator,
) -> SeStatus {
    guard(|| {
        let slot = out(out_gen)?;
        *slot = ptr::null_mut();
        let m = lib(GeneratorModel::load(required(path, "path")?))?;
        *slot = Box::into_raw(Box::new(SeGenerator { inner: m }));
        Ok(())
    })
}

/// # Safety
/// `gen` must be live; `path` nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn se_generator_save(
    gen: *const SeGenerator,
    path: *const c_char,
) -> SeStatus {
    guard(|| {
        let g = gen
            .as_ref()
            .ok_or_else(|| fail(SeStatus::NullPointer, "generator handle is null"))?;
        lib(g.inner.save(required(path, "path")?))
    })
}

/// Draws `n` rows; `uniform` selects equal class counts instead of the
/// training proportions.
///
/// # Safety
/// `gen` must be live; `out_table` must be writable.
#[no_mangle]
pub unsafe extern "C" fn se_generator_sample(
    gen: *const SeGenerator,
    n: usize,
    uniform: bool,
    seed: u64,
    out_table: *mut *mut SeTable,
) -> SeStatus {
    guard(|| {
        let slot = out(out_table)?;
        *slot = ptr::null_mut();
        let g = gen
            .as_ref()
            .ok_or_else(|| fail(SeStatus::NullPointer, "generator handle is null"))?;
        let proportions = if uniform {
            Proportions::Uniform
        } else {
            Proportions::MatchReal
        };
        let t = lib(g.inner.sample(n, proportions, seed))?;
        *slot = Box::into_raw(Box::new(SeTable { inner: t }));
        Ok(())
    })
}

/// Releases a generator. Null is ignored.
///
/// # Safety
/// `gen` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn se_generator_free(gen: *mut SeGenerator) {
    if !gen.is_null() {
        drop(Box::from_raw(gen));
    }
}

/// Runs the command-line tool with `argv[0..argc]` and returns its exit
/// code (64 on unusable arguments).
///
/// # Safety
/// `argv` must point to `argc` nul-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn se_cli_run(argc: c_int, argv: *const *const c_char) -> c_int {
    if argc < 0 || (argc > 0 && argv.is_null()) {
        set_error("argv is null".into());
        return synth_eval::cli::EXIT_USAGE;
    }
    let mut args = Vec::with_capacity(argc as usize);
    for i in 0..argc as usize {
        match cstr(*argv.add(i)) {
            Ok(Some(s)) => args.push(s.to_string()),
            _ => {
                set_error(format!("argv[{i}] is null or not UTF-8"));
                return synth_eval::cli::EXIT_USAGE;
            }
        }
    }
    catch_unwind(|| synth_eval::cli::run(args)).unwrap_or(synth_eval::cli::EXIT_ERROR)
}
