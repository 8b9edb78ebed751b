use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use jot_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(jot_last_error()) }.to_string_lossy().into_owned()
}

fn levy_stable(c: f64, alpha: f64) -> *mut JotLevy {
    let mut lv = ptr::null_mut();
    assert_eq!(unsafe { jot_levy_stable(c, alpha, &mut lv) }, JotStatus::Ok);
    assert!(!lv.is_null());
    lv
}

const LARGEST: JotScaling = JotScaling {
    kind: JotScalingKind::LargestJump,
    a: 0.0,
    shape: 0.0,
    rate: 0.0,
    alpha: 0.0,
};

#[test]
fn invalid_parameters_set_status_and_message() {
    let mut lv = ptr::null_mut();
    let st = unsafe { jot_levy_stable(1.0, 1.5, &mut lv) };
    assert_eq!(st, JotStatus::InvalidArgument);
    assert!(lv.is_null());
    assert!(last_error().contains("alpha"), "{}", last_error());

    let mut x = 0.0;
    assert_eq!(unsafe { jot_dickman_pdf(1.0, 0.5, &mut x) }, JotStatus::Ok);
    assert_eq!(last_error(), "");
}

#[test]
fn null_pointers_are_reported() {
    assert_eq!(unsafe { jot_dickman_pdf(1.0, 0.5, ptr::null_mut()) }, JotStatus::NullPointer);
    assert!(last_error().contains("out"));
    let mut x = 0.0;
    assert_eq!(unsafe { jot_levy_tail(ptr::null(), 0.5, &mut x) }, JotStatus::NullPointer);
    unsafe {
        jot_levy_free(ptr::null_mut());
        jot_rng_free(ptr::null_mut());
        jot_measure_free(ptr::null_mut());
        jot_matrix_free(ptr::null_mut());
        jot_string_free(ptr::null_mut());
        assert_eq!(jot_measure_len(ptr::null()), 0);
    }
}

#[test]
fn dickman_value_on_first_interval() {
    // f(t) = e^{-γ} on (0, 1] for c = 1.
    let mut x = 0.0;
    assert_eq!(unsafe { jot_dickman_pdf(1.0, 0.7, &mut x) }, JotStatus::Ok);
    assert!((x - 0.561_459_483_566_885_2).abs() < 1e-10, "{x}");
}

#[test]
fn lecam_two_halves() {
    // Bernoulli(.5)+Bernoulli(.5) vs Poisson(1), enumerated by hand.
    let w = [0.5, 0.5];
    let (mut tv, mut bound) = (0.0, 0.0);
    assert_eq!(unsafe { jot_lecam(w.as_ptr(), 2, &mut tv, &mut bound) }, JotStatus::Ok);
    let e = (-1.0f64).exp();
    let oracle = 0.5 * ((0.25 - e).abs() + (0.5 - e).abs() + (0.25 - e / 2.0).abs() + (1.0 - 2.5 * e));
    assert!((tv - oracle).abs() < 1e-12, "{tv} vs {oracle}");
    assert_eq!(bound, 0.5);

    let bad = [1.5];
    assert_eq!(unsafe { jot_lecam(bad.as_ptr(), 1, &mut tv, &mut bound) }, JotStatus::InvalidArgument);
}

#[test]
fn poisson_bfry_zero_mass() {
    // P(H = 0) = (1 + τ)^σ - τ^σ.
    let mut p = 0.0;
    assert_eq!(unsafe { jot_poisson_bfry_pmf(0.5, 1.0, 0, &mut p) }, JotStatus::Ok);
    assert!((p - (2f64.sqrt() - 1.0)).abs() < 1e-10, "{p}");
}

#[test]
fn jot_measure_roundtrip_is_seeded() {
    let lv = levy_stable(0.5, 0.5);
    let trunc = JotTruncation {
        kind: JotTruncationKind::RelativeFloor,
        value: 1e-6,
    };
    let draw = |seed| unsafe {
        let rng = jot_rng_new(seed, 0);
        let mut m = ptr::null_mut();
        assert_eq!(jot_sample_jot(lv, &LARGEST, &trunc, rng, &mut m), JotStatus::Ok, "{}", last_error());
        let n = jot_measure_len(m);
        let mut len = 0usize;
        assert_eq!(jot_measure_weights(m, ptr::null_mut(), 0, &mut len), JotStatus::BufferTooSmall);
        assert_eq!(len, n);
        let mut buf = vec![0.0; n];
        assert_eq!(jot_measure_weights(m, buf.as_mut_ptr(), n, &mut len), JotStatus::Ok);
        let (mut sum, mut tail) = (0.0, 0.0);
        assert_eq!(jot_measure_mass(m, &mut sum, &mut tail), JotStatus::Ok);
        jot_measure_free(m);
        jot_rng_free(rng);
        (buf, sum, tail)
    };
    let (a, sum, tail) = draw(7);
    let (b, _, _) = draw(7);
    assert_eq!(a, b);
    assert!(!a.is_empty() && a.iter().all(|&w| w > 0.0 && w <= 1.0));
    assert!(a.windows(2).all(|w| w[0] >= w[1]));
    assert!((sum - a.iter().sum::<f64>()).abs() < 1e-9 && tail >= 0.0);
    unsafe { jot_levy_free(lv) };
}

#[test]
fn bad_truncation_is_rejected() {
    let lv = levy_stable(1.0, 0.5);
    let rng = jot_rng_new(1, 0);
    let trunc = JotTruncation {
        kind: JotTruncationKind::FixedCount,
        value: 2.5,
    };
    let mut m = ptr::null_mut();
    let st = unsafe { jot_sample_jot(lv, &LARGEST, &trunc, rng, &mut m) };
    assert_eq!(st, JotStatus::InvalidArgument);
    assert!(m.is_null());
    unsafe {
        jot_rng_free(rng);
        jot_levy_free(lv);
    }
}

#[test]
fn ibp_urn_matrix_accessors() {
    unsafe {
        let rng = jot_rng_new(42, 3);
        let mut z = ptr::null_mut();
        assert_eq!(jot_urn_ibp(2.0, 1.0, 6, rng, &mut z), JotStatus::Ok);
        let (rows, cols) = (jot_matrix_rows(z), jot_matrix_cols(z));
        assert_eq!(rows, 6);
        let mut len = 0;
        let mut buf = vec![9u8; rows * cols];
        assert_eq!(jot_matrix_dense(z, buf.as_mut_ptr(), buf.len(), &mut len), JotStatus::Ok);
        assert_eq!(len, rows * cols);
        assert!(buf.iter().all(|&b| b <= 1));
        // every feature is owned by some row
        for k in 0..cols {
            assert!((0..rows).any(|i| buf[i * cols + k] == 1));
        }
        let mut csv = ptr::null_mut();
        assert_eq!(jot_matrix_csv(z, &mut csv), JotStatus::Ok);
        let text = CStr::from_ptr(csv).to_string_lossy().into_owned();
        assert_eq!(text.lines().count(), rows + 1);
        jot_string_free(csv);
        jot_matrix_free(z);
        jot_rng_free(rng);
    }
}

#[test]
fn stable_and_bfry_urns_run() {
    unsafe {
        let rng = jot_rng_new(5, 0);
        let mut z = ptr::null_mut();
        assert_eq!(jot_urn_stable(0.5, &LARGEST, 4, rng, &mut z), JotStatus::Ok, "{}", last_error());
        assert_eq!(jot_matrix_rows(z), 4);
        jot_matrix_free(z);

        let mut lv = ptr::null_mut();
        assert_eq!(jot_levy_stable_beta(0.3, 1.0, 0.3, &mut lv), JotStatus::Ok);
        let mut z = ptr::null_mut();
        assert_eq!(jot_urn_bfry(0.5, lv, 4, rng, &mut z), JotStatus::Ok, "{}", last_error());
        assert_eq!(jot_matrix_rows(z), 4);
        jot_matrix_free(z);
        assert_eq!(jot_urn_bfry(1.5, lv, 4, rng, &mut z), JotStatus::InvalidArgument);
        jot_levy_free(lv);
        jot_rng_free(rng);
    }
}

#[test]
fn levy_tail_matches_closed_form() {
    let mut lv = ptr::null_mut();
    assert_eq!(unsafe { jot_levy_scale_invariant(2.0, &mut lv) }, JotStatus::Ok);
    let mut t = 0.0;
    assert_eq!(unsafe { jot_levy_tail(lv, 0.25, &mut t) }, JotStatus::Ok);
    // θ log(1/s)
    assert!((t - 2.0 * 4f64.ln()).abs() < 1e-12, "{t}");
    unsafe { jot_levy_free(lv) };
}

#[test]
fn rng_streams_differ_and_repeat() {
    let u = |seed, id| unsafe {
        let r = jot_rng_new(seed, id);
        let mut x = 0.0;
        assert_eq!(jot_rng_uniform(r, &mut x), JotStatus::Ok);
        jot_rng_free(r);
        x
    };
    assert_eq!(u(1, 0), u(1, 0));
    assert_ne!(u(1, 0), u(1, 1));
    assert!((0.0..1.0).contains(&u(9, 9)));
}

#[test]
fn cli_entry_reports_exit_codes() {
    let args: Vec<CString> = ["jot", "--help"].iter().map(|s| CString::new(*s).unwrap()).collect();
    let ptrs: Vec<_> = args.iter().map(|a| a.as_ptr()).collect();
    assert_eq!(unsafe { jot_cli_main(ptrs.len(), ptrs.as_ptr()) }, 0);
    let args: Vec<CString> = ["jot", "no-such-command"].iter().map(|s| CString::new(*s).unwrap()).collect();
    let ptrs: Vec<_> = args.iter().map(|a| a.as_ptr()).collect();
    assert_eq!(unsafe { jot_cli_main(ptrs.len(), ptrs.as_ptr()) }, 1);
    assert_eq!(unsafe { jot_cli_main(2, ptr::null()) }, 1);
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/jot.h")).unwrap();
    let src = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() > 20);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from jot.h");
    }
    for ty in ["typedef struct JotLevy JotLevy;", "JOT_STATUS_BUFFER_TOO_SMALL = 6"] {
        assert!(header.contains(ty), "{ty}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(out) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/jot.h"))
        .output()
    else {
        eprintln!("cc not found; skipping C syntax check");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
