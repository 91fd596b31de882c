use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use gsma_ffi::*;

fn last_error() -> String {
    let p = gsma_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

/// E = diag(1, 1, 0), A with a nonsingular static entry.
fn small_pencil() -> *mut GsmaPencil {
    let e = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
    let a = [-1.0, 0.5, 0.2, -0.5, -2.0, 0.1, 0.3, 0.4, 1.5];
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { gsma_pencil_from_dense(3, e.as_ptr(), a.as_ptr(), &mut p) }, GsmaStatus::Ok);
    p
}

fn solve(p: *const GsmaPencil, spec: &str) -> (GsmaStatus, *mut GsmaSolution) {
    let spec = CString::new(spec).unwrap();
    let mut s = ptr::null_mut();
    (unsafe { gsma_solve(p, spec.as_ptr(), &mut s) }, s)
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(gsma_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn solve_round_trip_matches_eigen_equation() {
    let p = small_pencil();
    assert_eq!(unsafe { gsma_pencil_dim(p) }, 3);
    let (status, s) = solve(p, r#"{"algorithm": 6, "initial": {"kind": "canonical", "n": 1}}"#);
    assert_eq!(status, GsmaStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { gsma_solution_mode_count(s) }, 1);
    let (mut re, mut im) = (0.0, 0.0);
    assert_eq!(unsafe { gsma_solution_eigenvalue(s, 0, &mut re, &mut im) }, GsmaStatus::Ok);
    let mut v = [0.0; 6];
    assert_eq!(unsafe { gsma_solution_right_vector(s, 0, v.as_mut_ptr(), 6) }, GsmaStatus::Ok);
    let a = [[-1.0, -0.5, 0.3], [0.5, -2.0, 0.4], [0.2, 0.1, 1.5]];
    let ev = [1.0, 1.0, 0.0];
    for (i, row) in a.iter().enumerate() {
        let av: (f64, f64) = row.iter().enumerate().fold((0.0, 0.0), |acc, (j, x)| (acc.0 + x * v[2 * j], acc.1 + x * v[2 * j + 1]));
        let lev = (ev[i] * (re * v[2 * i] - im * v[2 * i + 1]), ev[i] * (re * v[2 * i + 1] + im * v[2 * i]));
        assert!((av.0 - lev.0).abs() < 1e-9 && (av.1 - lev.1).abs() < 1e-9, "row {i}");
    }
    let report = unsafe { CStr::from_ptr(gsma_solution_report_json(s)) }.to_str().unwrap();
    let json: serde_json::Value = serde_json::from_str(report).unwrap();
    assert_eq!(json["modes"][0]["status"], "converged");
    unsafe {
        gsma_solution_free(s);
        gsma_pencil_free(p);
    }
}

#[test]
fn bad_inputs_map_to_status_codes() {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { gsma_pencil_from_dense(2, ptr::null(), ptr::null(), &mut p) }, GsmaStatus::NullArgument);
    assert!(last_error().contains("null"));
    let not_projection = [2.0, 0.0, 0.0, 1.0];
    let a = [1.0, 0.0, 0.0, 1.0];
    assert_eq!(unsafe { gsma_pencil_from_dense(2, not_projection.as_ptr(), a.as_ptr(), &mut p) }, GsmaStatus::InvalidInput);
    assert!(last_error().starts_with("invalid_pencil"));
    let good = small_pencil();
    assert_eq!(solve(good, "{not json").0, GsmaStatus::InvalidInput);
    assert_eq!(solve(good, r#"{"algorithm": 9, "initial": {"kind": "canonical", "n": 1}}"#).0, GsmaStatus::InvalidInput);
    let missing = CString::new("/nonexistent/manifest.json").unwrap();
    assert_eq!(unsafe { gsma_pencil_load(missing.as_ptr(), &mut p) }, GsmaStatus::Io);
    unsafe {
        gsma_pencil_free(good);
        gsma_pencil_free(ptr::null_mut());
        gsma_solution_free(ptr::null_mut());
        assert_eq!(gsma_pencil_dim(ptr::null()), 0);
    }
}

#[test]
fn solver_failure_is_reported() {
    let p = small_pencil();
    let (status, s) = solve(p, r#"{"algorithm": 3, "initial": {"kind": "canonical", "n": 1}, "options": {"max_iter": 1, "tol": 1e-300}}"#);
    assert_eq!(status, GsmaStatus::SolverFailure);
    assert!(s.is_null());
    assert!(last_error().starts_with("max_iterations") || last_error().starts_with("diverged"), "{}", last_error());
    unsafe { gsma_pencil_free(p) };
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn static_library() -> PathBuf {
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    [deps.join("libgsma_ffi.a"), deps.parent().unwrap().join("libgsma_ffi.a")]
        .into_iter()
        .find(|p| p.exists())
        .expect("cargo builds the static library alongside the tests")
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = crate_dir().join("include/gsma.h");
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let out = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Wextra", "-Werror", "-x", lang])
            .arg(&header)
            .output()
            .expect("a C toolchain is installed");
        assert!(out.status.success(), "{compiler}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn c_program_links_and_solves() {
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let out = Command::new("cc")
        .args(["-std=c11", "-Wall", "-Werror", "-I"])
        .arg(crate_dir().join("include"))
        .arg(crate_dir().join("tests/c/smoke.c"))
        .arg(static_library())
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}: {}", run.status.code(), String::from_utf8_lossy(&run.stderr));
    let json: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(json["modes"].as_array().unwrap().len(), 1);
}
