use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use pofl::sim::ScenarioConfig;
use pofl_ffi::*;

fn last_error() -> String {
    let p = pofl_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn reference_params() -> PoflTradeParams {
    PoflTradeParams {
        eps1: 0.4,
        eps2: 0.4,
        m_bar: 1.0,
        ds_bar: 1.0,
        alpha: 1.5,
        beta: 1.0,
        eta: 1.8,
        q: 8.0,
        alpha_t: 1.5,
        beta_t: 1.0,
        reputation: 0.5,
    }
}

#[test]
fn equilibrium_matches_core() {
    let mut out = PoflEquilibrium::default();
    let st = unsafe { pofl_equilibrium(&reference_params(), &mut out) };
    assert_eq!(st, PoflStatus::Ok);
    assert!((out.m_star - 5.9642857).abs() < 1e-6);
    assert!(out.p >= 0.0 && out.p <= 1.0);
}

#[test]
fn equilibrium_errors() {
    let mut out = PoflEquilibrium::default();
    assert_eq!(unsafe { pofl_equilibrium(ptr::null(), &mut out) }, PoflStatus::NullPointer);
    let mut bad = reference_params();
    bad.eps1 = 0.9;
    assert_eq!(unsafe { pofl_equilibrium(&bad, &mut out) }, PoflStatus::InvalidArgument);
    assert!(!last_error().is_empty());
    // a successful call clears the message
    unsafe { pofl_equilibrium(&reference_params(), &mut out) };
    assert!(pofl_last_error().is_null());
}

#[test]
fn gc_count() {
    let pred = [1u32, 2, 3, 0];
    let act = [1u32, 2, 0, 0];
    let mut n = 0;
    let st = unsafe { pofl_gc_match_count(pred.as_ptr(), act.as_ptr(), 4, 2, 9, &mut n) };
    assert_eq!(st, PoflStatus::Ok);
    assert_eq!(n, 3);
    let st = unsafe { pofl_gc_match_count(pred.as_ptr(), act.as_ptr(), 4, 1, 9, &mut n) };
    assert_eq!(st, PoflStatus::InvalidArgument);
}

fn quick_config() -> CString {
    let mut cfg = ScenarioConfig::example();
    cfg.requester.test_records = 16;
    cfg.training.max_epochs = 5;
    cfg.training.deadline = 5;
    cfg.full_nodes = 1;
    CString::new(cfg.to_toml()).unwrap()
}

#[test]
fn simulator_lifecycle() {
    let cfg = quick_config();
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { pofl_simulator_new(cfg.as_ptr(), &mut sim) }, PoflStatus::Ok);
    let mut json = PoflBuffer { data: ptr::null_mut(), len: 0 };
    assert_eq!(unsafe { pofl_simulator_run_round(sim, &mut json) }, PoflStatus::Ok);
    let text = unsafe { std::slice::from_raw_parts(json.data, json.len) };
    let report: serde_json::Value = serde_json::from_slice(text).unwrap();
    assert_eq!(report["task_id"], "task-1");
    unsafe { pofl_buffer_free(json) };

    let mut dump = PoflBuffer { data: ptr::null_mut(), len: 0 };
    assert_eq!(unsafe { pofl_simulator_chain_dump(sim, &mut dump) }, PoflStatus::Ok);
    let mut blocks = u64::MAX;
    assert_eq!(unsafe { pofl_chain_validate(dump.data, dump.len, &mut blocks) }, PoflStatus::Ok);
    assert!(blocks <= 1);
    let mut tampered = unsafe { std::slice::from_raw_parts(dump.data, dump.len) }.to_vec();
    if let Some(b) = tampered.get_mut(20) {
        *b ^= 1;
    }
    assert_eq!(unsafe { pofl_chain_validate(tampered.as_ptr(), tampered.len(), ptr::null_mut()) }, PoflStatus::ChainInvalid);
    unsafe { pofl_buffer_free(dump) };
    unsafe { pofl_simulator_free(sim) };
}

#[test]
fn bad_config_reports_stage() {
    let cfg = CString::new("seed = 1").unwrap();
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { pofl_simulator_new(cfg.as_ptr(), &mut sim) }, PoflStatus::Config);
    assert!(sim.is_null());
    assert!(last_error().contains("stage config"));
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok_and(|o| o.status.success())
}

#[test]
fn header_compiles_and_links_from_c() {
    if !have_cc() {
        eprintln!("skipping: no C compiler");
        return;
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let src = tmp.join("pofl_smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "pofl.h"
int main(void) {
    PoflTradeParams p = {0.4, 0.4, 1.0, 1.0, 1.5, 1.0, 1.8, 8.0, 1.5, 1.0, 0.5};
    PoflEquilibrium eq;
    if (pofl_equilibrium(&p, &eq) != POFL_STATUS_OK) return 1;
    uint32_t a[3] = {1, 0, 1}, b[3] = {1, 1, 1};
    uint64_t n = 0;
    if (pofl_gc_match_count(a, b, 3, 1, 5, &n) != POFL_STATUS_OK || n != 2) return 2;
    if (pofl_equilibrium(NULL, &eq) != POFL_STATUS_NULL_POINTER || pofl_last_error() == NULL) return 3;
    printf("%.7f\n", eq.m_star);
    return 0;
}
"#,
    )
    .unwrap();
    let include = manifest.join("include");
    let syntax = Command::new("cc").arg("-fsyntax-only").arg("-I").arg(&include).arg(&src).status().unwrap();
    assert!(syntax.success());

    // The static library sits next to the test's profile directory.
    let profile_dir = tmp.parent().unwrap().join(if cfg!(debug_assertions) { "debug" } else { "release" });
    let lib = profile_dir.join("libpofl_ffi.a");
    if !lib.exists() {
        eprintln!("skipping link step: {} not built", lib.display());
        return;
    }
    let exe = tmp.join("pofl_smoke");
    let link = Command::new("cc")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(link.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "5.9642857");
}
