//! C ABI over the simulator.
//!
//! Every fallible call returns a [`PoflStatus`]; on failure the message is
//! available from [`pofl_last_error`] on the same thread. Buffers handed out
//! by the library must be released with [`pofl_buffer_free`], simulators
//! with [`pofl_simulator_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use pofl::chain::verify_dump;
use pofl::gc::{compare_labels, OtBackend};
use pofl::sim::{ScenarioConfig, Simulator};
use pofl::trading::{solve_equilibrium, MarketParams, PoolEconomics, ProviderEconomics, Reputation};
use pofl::transcript::Transcript;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoflStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Config = 4,
    Pipeline = 5,
    ChainInvalid = 6,
    Panic = 7,
}

/// Market, provider and pool parameters of one trade.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PoflTradeParams {
    pub eps1: f64,
    pub eps2: f64,
    pub m_bar: f64,
    pub ds_bar: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub q: f64,
    pub alpha_t: f64,
    pub beta_t: f64,
    pub reputation: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PoflEquilibrium {
    pub m_star: f64,
    pub ds_star: f64,
    pub p: f64,
    pub pool_utility: f64,
    pub provider_utility: f64,
}

/// Library-owned bytes.
#[repr(C)]
#[derive(Debug)]
pub struct PoflBuffer {
    pub data: *mut u8,
    pub len: usize,
}

/// Opaque simulator handle.
pub struct PoflSimulator {
    inner: Simulator,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<Vec<u8>>) {
    let mut bytes = msg.into();
    bytes.retain(|&b| b != 0);
    let c = CString::new(bytes).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: PoflStatus, msg: impl std::fmt::Display) -> PoflStatus {
    set_error(msg.to_string());
    status
}

fn guard(f: impl FnOnce() -> PoflStatus) -> PoflStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(PoflStatus::Panic, "internal panic"),
    }
}

fn buffer(bytes: Vec<u8>) -> PoflBuffer {
    let mut b = bytes.into_boxed_slice();
    let out = PoflBuffer { data: b.as_mut_ptr(), len: b.len() };
    std::mem::forget(b);
    out
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn pofl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Solves the trading equilibrium for `params`.
///
/// # Safety
/// `params` and `out` must be valid pointers or null.
#[no_mangle]
pub unsafe extern "C" fn pofl_equilibrium(params: *const PoflTradeParams, out: *mut PoflEquilibrium) -> PoflStatus {
    guard(|| {
        if params.is_null() || out.is_null() {
            return fail(PoflStatus::NullPointer, "null argument");
        }
        let p = *params;
        let solved = (|| {
            let mk = MarketParams::new(p.eps1, p.eps2, p.m_bar, p.ds_bar)?;
            let pe = ProviderEconomics::new(p.alpha, p.beta, p.eta)?;
            let po = PoolEconomics::new(p.q, p.alpha_t, p.beta_t)?;
            po.paired_with(&pe)?;
            solve_equilibrium(Reputation::new(p.reputation)?, &mk, &pe, &po)
        })();
        match solved {
            Ok(eq) => {
                *out = PoflEquilibrium {
                    m_star: eq.m_star,
                    ds_star: eq.ds_star,
                    p: eq.p,
                    pool_utility: eq.pool_utility,
                    provider_utility: eq.provider_utility,
                };
                PoflStatus::Ok
            }
            Err(e) => fail(PoflStatus::InvalidArgument, e),
        }
    })
}

/// Counts matching labels through the garbled comparison.
///
/// # Safety
/// `predicted` and `actual` must point to `len` readable values; `out_n`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn pofl_gc_match_count(
    predicted: *const u32,
    actual: *const u32,
    len: usize,
    label_bits: u32,
    seed: u64,
    out_n: *mut u64,
) -> PoflStatus {
    guard(|| {
        if out_n.is_null() || (len > 0 && (predicted.is_null() || actual.is_null())) {
            return fail(PoflStatus::NullPointer, "null argument");
        }
        let (pred, act) = if len == 0 {
            (&[][..], &[][..])
        } else {
            (std::slice::from_raw_parts(predicted, len), std::slice::from_raw_parts(actual, len))
        };
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut log = Transcript::new("ffi");
        match compare_labels(pred, act, label_bits, seed, OtBackend::DiscreteLog, &mut rng, &mut log) {
            Ok(run) => {
                *out_n = run.n;
                PoflStatus::Ok
            }
            Err(e) => fail(PoflStatus::InvalidArgument, e),
        }
    })
}

/// Creates a simulator from a TOML scenario.
///
/// # Safety
/// `config_toml` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pofl_simulator_new(config_toml: *const c_char, out: *mut *mut PoflSimulator) -> PoflStatus {
    guard(|| {
        if config_toml.is_null() || out.is_null() {
            return fail(PoflStatus::NullPointer, "null argument");
        }
        *out = ptr::null_mut();
        let Ok(text) = CStr::from_ptr(config_toml).to_str() else {
            return fail(PoflStatus::InvalidUtf8, "config is not UTF-8");
        };
        match ScenarioConfig::from_toml(text).and_then(Simulator::new) {
            Ok(sim) => {
                *out = Box::into_raw(Box::new(PoflSimulator { inner: sim }));
                PoflStatus::Ok
            }
            Err(e) => fail(PoflStatus::Config, e),
        }
    })
}

/// Runs one round and returns its JSON report.
///
/// # Safety
/// `sim` must come from [`pofl_simulator_new`]; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pofl_simulator_run_round(sim: *mut PoflSimulator, out_json: *mut PoflBuffer) -> PoflStatus {
    guard(|| {
        if sim.is_null() || out_json.is_null() {
            return fail(PoflStatus::NullPointer, "null argument");
        }
        match (*sim).inner.run_round() {
            Ok(rep) => {
                *out_json = buffer(rep.to_json().into_bytes());
                PoflStatus::Ok
            }
            Err(e) => fail(PoflStatus::Pipeline, e),
        }
    })
}

/// Canonical dump of the simulator's chain.
///
/// # Safety
/// `sim` must come from [`pofl_simulator_new`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pofl_simulator_chain_dump(sim: *const PoflSimulator, out: *mut PoflBuffer) -> PoflStatus {
    guard(|| {
        if sim.is_null() || out.is_null() {
            return fail(PoflStatus::NullPointer, "null argument");
        }
        *out = buffer((*sim).inner.chain_dump());
        PoflStatus::Ok
    })
}

/// # Safety
/// `sim` must come from [`pofl_simulator_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pofl_simulator_free(sim: *mut PoflSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Checks a chain dump; writes the block count on success.
///
/// # Safety
/// `data` must point to `len` readable bytes; `out_blocks` may be null.
#[no_mangle]
pub unsafe extern "C" fn pofl_chain_validate(data: *const u8, len: usize, out_blocks: *mut u64) -> PoflStatus {
    guard(|| {
        if data.is_null() {
            return fail(PoflStatus::NullPointer, "null argument");
        }
        match verify_dump(std::slice::from_raw_parts(data, len)) {
            Ok(chain) => {
                if !out_blocks.is_null() {
                    *out_blocks = chain.len() as u64;
                }
                PoflStatus::Ok
            }
            Err(e) => fail(PoflStatus::ChainInvalid, e),
        }
    })
}

/// # Safety
/// `buf` must have been produced by this library and not freed before.
#[no_mangle]
pub unsafe extern "C" fn pofl_buffer_free(buf: PoflBuffer) {
    if !buf.data.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(buf.data, buf.len)));
    }
}
