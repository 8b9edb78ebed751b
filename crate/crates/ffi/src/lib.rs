//! C ABI over `jot_core`.
//!
//! Every fallible call returns a `JotStatus`; on failure the message is kept
//! per thread and can be read with `jot_last_error`. Objects are opaque
//! handles created by `jot_*_new`/`jot_sample_*`/`jot_urn_*` and released with
//! the matching `*_free`. Passing NULL to a `*_free` is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use jot_core::diagnostics::lecam_check;
use jot_core::featmat::FeatureMatrix;
use jot_core::levy::{dickman_pdf, LevyDensity, TruncationRule};
use jot_core::measures::{sample_jot, total_mass, ScalingLaw, UnitaryMeasure};
use jot_core::special::RngStream;
use jot_core::urns::{poisson_bfry_pmf, UrnModel, UrnState};
use jot_core::Error;

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JotStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    NonConvergence = 3,
    Numerical = 4,
    Capacity = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JotScalingKind {
    LargestJump = 0,
    Fixed = 1,
    Gamma = 2,
    ZetaGamma = 3,
}

/// Law of the scaling value. Unused fields are ignored: `a` for `Fixed`,
/// `shape`/`rate` for `Gamma` and `ZetaGamma`, `alpha` for `ZetaGamma`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct JotScaling {
    pub kind: JotScalingKind,
    pub a: f64,
    pub shape: f64,
    pub rate: f64,
    pub alpha: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JotTruncationKind {
    FixedCount = 0,
    RelativeFloor = 1,
    RelativeMass = 2,
    TailMass = 3,
}

/// `value` is the count for `FixedCount`, eps for the relative rules and tau
/// for `TailMass`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct JotTruncation {
    pub kind: JotTruncationKind,
    pub value: f64,
}

pub struct JotRng(RngStream);
pub struct JotLevy(LevyDensity);
pub struct JotMeasure(UnitaryMeasure);
pub struct JotMatrix(FeatureMatrix);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = clean);
}

fn status_of(e: &Error) -> JotStatus {
    match e {
        Error::InvalidParameter(_) | Error::Config { .. } | Error::Io(_) => JotStatus::InvalidArgument,
        Error::NonConvergence { .. } => JotStatus::NonConvergence,
        Error::Numerical(_) | Error::Construction(_) => JotStatus::Numerical,
        Error::Capacity(_) => JotStatus::Capacity,
    }
}

enum Fail {
    Core(Error),
    Null(&'static str),
    Buffer(usize),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> JotStatus {
    let status = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => JotStatus::Ok,
        Ok(Err(Fail::Core(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            JotStatus::NullPointer
        }
        Ok(Err(Fail::Buffer(need))) => {
            set_error(&format!("buffer too small: {need} elements needed"));
            JotStatus::BufferTooSmall
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            JotStatus::Panic
        }
    };
    if status == JotStatus::Ok {
        set_error("");
    }
    status
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn get_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn fill<T: Copy>(src: &[T], buf: *mut T, cap: usize, out_len: *mut usize) -> Result<(), Fail> {
    put(out_len, src.len(), "out_len")?;
    if src.len() > cap {
        return Err(Fail::Buffer(src.len()));
    }
    if !src.is_empty() {
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    }
    Ok(())
}

fn scaling_law(s: &JotScaling) -> ScalingLaw {
    match s.kind {
        JotScalingKind::LargestJump => ScalingLaw::LargestJump,
        JotScalingKind::Fixed => ScalingLaw::Fixed { a: s.a },
        JotScalingKind::Gamma => ScalingLaw::Gamma { shape: s.shape, rate: s.rate },
        JotScalingKind::ZetaGamma => ScalingLaw::ZetaGamma {
            alpha: s.alpha,
            shape: s.shape,
            rate: s.rate,
        },
    }
}

fn truncation(t: &JotTruncation) -> Result<TruncationRule, Fail> {
    let rule = match t.kind {
        JotTruncationKind::FixedCount => {
            if !(t.value >= 1.0 && t.value.fract() == 0.0 && t.value <= usize::MAX as f64) {
                return Err(Error::InvalidParameter(format!("fixed count must be a positive integer, got {}", t.value)).into());
            }
            TruncationRule::FixedCount { count: t.value as usize }
        }
        JotTruncationKind::RelativeFloor => TruncationRule::relative(t.value),
        JotTruncationKind::RelativeMass => TruncationRule::RelativeMass { eps: t.value },
        JotTruncationKind::TailMass => TruncationRule::TailMass { tau: t.value },
    };
    rule.validate()?;
    Ok(rule)
}

/// Message of the last failed call on this thread, or "" after a success.
/// The pointer stays valid until the next `jot_*` call on the same thread.
#[no_mangle]
pub extern "C" fn jot_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a pointer obtained from this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn jot_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub extern "C" fn jot_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------------------
// random streams

/// Independent stream `stream_id` of the generator seeded with `seed`.
#[no_mangle]
pub extern "C" fn jot_rng_new(seed: u64, stream_id: u64) -> *mut JotRng {
    Box::into_raw(Box::new(JotRng(RngStream::new(seed, stream_id))))
}

/// # Safety
/// `rng` must be NULL or a handle from `jot_rng_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn jot_rng_free(rng: *mut JotRng) {
    if !rng.is_null() {
        drop(Box::from_raw(rng));
    }
}

/// # Safety
/// `rng` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn jot_rng_uniform(rng: *mut JotRng, out: *mut f64) -> JotStatus {
    guard(|| {
        let r = get_mut(rng, "rng")?;
        put(out, r.0.uniform(), "out")
    })
}

// ---------------------------------------------------------------------------
// Lévy densities

unsafe fn make_levy(out: *mut *mut JotLevy, f: impl FnOnce() -> jot_core::Result<LevyDensity>) -> JotStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let lv = f()?;
        out.write(Box::into_raw(Box::new(JotLevy(lv))));
        Ok(())
    })
}

/// `θ s^{-1}` on (0, 1].
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jot_levy_scale_invariant(theta: f64, out: *mut *mut JotLevy) -> JotStatus {
    make_levy(out, || LevyDensity::scale_invariant(theta))
}

/// `c s^{-1-alpha}` on (0, ∞).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jot_levy_stable(c: f64, alpha: f64, out: *mut *mut JotLevy) -> JotStatus {
    make_levy(out, || LevyDensity::stable(c, alpha))
}

/// `c θ s^{-1}(1-s)^{θ-1}` on (0, 1).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jot_levy_beta_process(c: f64, theta: f64, out: *mut *mut JotLevy) -> JotStatus {
    make_levy(out, || LevyDensity::beta_process(c, theta))
}

/// `coef s^{-1-alpha}(1-s)^{θ+alpha-1}` on (0, 1).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jot_levy_stable_beta(coef: f64, theta: f64, alpha: f64, out: *mut *mut JotLevy) -> JotStatus {
    make_levy(out, || LevyDensity::stable_beta(coef, theta, alpha))
}

/// `θ s^{-1} e^{-s}` on (0, ∞).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jot_levy_gamma(theta: f64, out: *mut *mut JotLevy) -> JotStatus {
    make_levy(out, || LevyDensity::gamma(theta))
}

/// # Safety
/// `lv` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jot_levy_free(lv: *mut JotLevy) {
    if !lv.is_null() {
        drop(Box::from_raw(lv));
    }
}

/// Tail mass `Λ(s) = ∫_s^∞ λ`.
///
/// # Safety
/// `lv` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn jot_levy_tail(lv: *const JotLevy, s: f64, out: *mut f64) -> JotStatus {
    guard(|| {
        let v = get(lv, "lv")?.0.tail(s)?;
        put(out, v, "out")
    })
}

/// # Safety
/// `lv` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn jot_levy_density(lv: *const JotLevy, s: f64, out: *mut f64) -> JotStatus {
    guard(|| {
        let v = get(lv, "lv")?.0.density(s);
        put(out, v, "out")
    })
}

// ---------------------------------------------------------------------------
// unitary measures

/// Draws a JOT measure: a scaling value from `scaling`, then ranked weights
/// under `trunc`.
///
/// # Safety
/// All pointers must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn jot_sample_jot(
    lv: *const JotLevy,
    scaling: *const JotScaling,
    trunc: *const JotTruncation,
    rng: *mut JotRng,
    out: *mut *mut JotMeasure,
) -> JotStatus {
    guard(|| {
        let lv = get(lv, "lv")?;
        let law = scaling_law(get(scaling, "scaling")?);
        let rule = truncation(get(trunc, "trunc")?)?;
        let rng = get_mut(rng, "rng")?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let m = sample_jot(&lv.0, &law, &rule, &mut rng.0)?;
        out.write(Box::into_raw(Box::new(JotMeasure(m))));
        Ok(())
    })
}

/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jot_measure_free(m: *mut JotMeasure) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of kept weights; 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jot_measure_len(m: *const JotMeasure) -> usize {
    m.as_ref().map_or(0, |m| m.0.len())
}

/// Copies the weights in decreasing order into `buf`. `out_len` always
/// receives the number of weights; `JOT_STATUS_BUFFER_TOO_SMALL` is returned
/// when it exceeds `cap`.
///
/// # Safety
/// `buf` must hold `cap` doubles; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jot_measure_weights(
    m: *const JotMeasure,
    buf: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> JotStatus {
    guard(|| fill(&get(m, "m")?.0.weights, buf, cap, out_len))
}

/// Sum of kept weights and a bound on the mass lost to truncation.
///
/// # Safety
/// `m` must be a live handle; `sum` and `tail_bound` writable.
#[no_mangle]
pub unsafe extern "C" fn jot_measure_mass(m: *const JotMeasure, sum: *mut f64, tail_bound: *mut f64) -> JotStatus {
    guard(|| {
        let s = total_mass(&get(m, "m")?.0);
        put(sum, s.sum, "sum")?;
        put(tail_bound, s.tail_mass_bound, "tail_bound")
    })
}

// ---------------------------------------------------------------------------
// feature matrices

unsafe fn run_urn(model: UrnModel, n: usize, rng: *mut JotRng, out: *mut *mut JotMatrix) -> JotStatus {
    guard(|| {
        let rng = get_mut(rng, "rng")?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let z = UrnState::new(model)?.run(n, &mut rng.0)?;
        out.write(Box::into_raw(Box::new(JotMatrix(z))));
        Ok(())
    })
}

/// `n` rows of the two-parameter IBP urn.
///
/// # Safety
/// `rng` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn jot_urn_ibp(c: f64, theta: f64, n: usize, rng: *mut JotRng, out: *mut *mut JotMatrix) -> JotStatus {
    run_urn(UrnModel::Ibp { c, theta }, n, rng, out)
}

/// `n` rows of the stable JOT urn with scaling law `scaling`.
///
/// # Safety
/// `scaling` and `rng` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn jot_urn_stable(
    alpha: f64,
    scaling: *const JotScaling,
    n: usize,
    rng: *mut JotRng,
    out: *mut *mut JotMatrix,
) -> JotStatus {
    let law = match scaling.as_ref() {
        Some(s) => scaling_law(s),
        None => return guard(|| Err(Fail::Null("scaling"))),
    };
    run_urn(UrnModel::StableJot { alpha, pstar: law }, n, rng, out)
}

/// `n` rows of the BFRY urn scaling the density `lv`.
///
/// # Safety
/// `lv` and `rng` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn jot_urn_bfry(
    sigma: f64,
    lv: *const JotLevy,
    n: usize,
    rng: *mut JotRng,
    out: *mut *mut JotMatrix,
) -> JotStatus {
    let lv = match lv.as_ref() {
        Some(l) => l.0.clone(),
        None => return guard(|| Err(Fail::Null("lv"))),
    };
    run_urn(UrnModel::Bfry { sigma, lv }, n, rng, out)
}

/// # Safety
/// `z` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jot_matrix_free(z: *mut JotMatrix) {
    if !z.is_null() {
        drop(Box::from_raw(z));
    }
}

/// # Safety
/// `z` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jot_matrix_rows(z: *const JotMatrix) -> usize {
    z.as_ref().map_or(0, |z| z.0.n_rows())
}

/// # Safety
/// `z` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jot_matrix_cols(z: *const JotMatrix) -> usize {
    z.as_ref().map_or(0, |z| z.0.columns().len())
}

/// Row-major 0/1 entries of the canonical (left-ordered) matrix.
///
/// # Safety
/// `buf` must hold `cap` bytes; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jot_matrix_dense(z: *const JotMatrix, buf: *mut u8, cap: usize, out_len: *mut usize) -> JotStatus {
    guard(|| {
        let flat: Vec<u8> = get(z, "z")?.0.canonicalize().to_dense().concat();
        fill(&flat, buf, cap, out_len)
    })
}

/// CSV text of the matrix; release with `jot_string_free`.
///
/// # Safety
/// `z` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn jot_matrix_csv(z: *const JotMatrix, out: *mut *mut c_char) -> JotStatus {
    guard(|| {
        let csv = get(z, "z")?.0.to_csv();
        let s = CString::new(csv).map_err(|e| Error::Numerical(e.to_string()))?;
        put(out, s.into_raw(), "out")
    })
}

// ---------------------------------------------------------------------------
// scalar functions

/// Density at `t` of the Dickman law with parameter `c`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jot_dickman_pdf(c: f64, t: f64, out: *mut f64) -> JotStatus {
    guard(|| put(out, dickman_pdf(c, t)?, "out"))
}

/// `P(H = j)` for the Poisson-BFRY law with parameters `sigma`, `tau`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jot_poisson_bfry_pmf(sigma: f64, tau: f64, j: u64, out: *mut f64) -> JotStatus {
    guard(|| put(out, poisson_bfry_pmf(sigma, tau, j)?, "out"))
}

/// Exact total variation between a sum of independent Bernoulli(w_i) and
/// Poisson(Σ w_i), and the bound Σ w_i².
///
/// # Safety
/// `weights` must hold `len` doubles; `tv` and `bound` writable.
#[no_mangle]
pub unsafe extern "C" fn jot_lecam(weights: *const f64, len: usize, tv: *mut f64, bound: *mut f64) -> JotStatus {
    guard(|| {
        let w: &[f64] = if len == 0 {
            &[]
        } else {
            std::slice::from_raw_parts(get(weights, "weights")?, len)
        };
        let r = lecam_check(w)?;
        put(tv, r.tv_exact, "tv")?;
        put(bound, r.bound, "bound")
    })
}

/// Runs the `jot` command line with `argc` arguments (argv[0] is the program
/// name) and returns its exit code.
///
/// # Safety
/// `argv` must hold `argc` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn jot_cli_main(argc: usize, argv: *const *const c_char) -> i32 {
    if argv.is_null() && argc > 0 {
        set_error("null pointer: argv");
        return jot_core::cli::EXIT_CONFIG;
    }
    let args: Option<Vec<String>> = (0..argc)
        .map(|i| {
            let p = *argv.add(i);
            (!p.is_null()).then(|| CStr::from_ptr(p).to_string_lossy().into_owned())
        })
        .collect();
    match args {
        Some(a) => catch_unwind(|| jot_core::cli::main_with(a)).unwrap_or(jot_core::cli::EXIT_NUMERICAL),
        _ => {
            set_error("null pointer: argv entry");
            jot_core::cli::EXIT_CONFIG
        }
    }
}
