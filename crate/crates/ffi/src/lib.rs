//! C ABI over the `apcharge` simulator.
//!
//! Every fallible function returns an [`ApcStatus`]; on failure the message is
//! kept per thread and can be copied out with [`apc_last_error_message`].
//! Handles are opaque and must be released with their `_free` function.
//! Panics never cross the boundary: they are caught and reported as
//! `APC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use apcharge::agents::{no_policy_power, AgentKind, Policy};
use apcharge::config::SimConfig;
use apcharge::env::{data_rate, energy_efficiency, Environment, Observation, SlotOutcome};
use apcharge::harness;
use apcharge::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Bad configuration value or unparsable TOML.
    Config = 3,
    Io = 4,
    /// Simulation or training failure.
    Runtime = 5,
    Panic = 6,
    /// Output buffer too small; the required size was still reported.
    BufferTooSmall = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApcAgent {
    Dqn = 0,
    Trl = 1,
    Mpc = 2,
    Greedy = 3,
    Random = 4,
    NoPolicy = 5,
}

impl From<ApcAgent> for AgentKind {
    fn from(a: ApcAgent) -> Self {
        match a {
            ApcAgent::Dqn => AgentKind::Dqn,
            ApcAgent::Trl => AgentKind::Trl,
            ApcAgent::Mpc => AgentKind::Mpc,
            ApcAgent::Greedy => AgentKind::Greedy,
            ApcAgent::Random => AgentKind::Random,
            ApcAgent::NoPolicy => AgentKind::NoPolicy,
        }
    }
}

/// Start-of-slot view of the access point. `last_arrival` is NaN before the first slot.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ApcObservation {
    pub slot: u64,
    pub user: usize,
    pub user_gain: f64,
    pub battery: f64,
    pub last_arrival: f64,
    pub device_count: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ApcSlotOutcome {
    pub slot: u64,
    /// Executed power, mW.
    pub power: f64,
    /// Served user's rate, bit/s.
    pub rate: f64,
    /// 1/W; zero unless both user types are satisfied.
    pub efficiency: f64,
    /// Energy harvested by the panel, mJ.
    pub arrival: f64,
    pub activated: usize,
    pub all_devices: bool,
    pub user_satisfied: bool,
}

impl From<&SlotOutcome> for ApcSlotOutcome {
    fn from(o: &SlotOutcome) -> Self {
        ApcSlotOutcome {
            slot: o.slot,
            power: o.power,
            rate: o.rate,
            efficiency: o.efficiency,
            arrival: o.arrival,
            activated: o.activated,
            all_devices: o.all_devices,
            user_satisfied: o.user_satisfied,
        }
    }
}

impl From<&Observation> for ApcObservation {
    fn from(o: &Observation) -> Self {
        ApcObservation {
            slot: o.slot,
            user: o.user,
            user_gain: o.user_gain,
            battery: o.battery,
            last_arrival: o.last_arrival.unwrap_or(f64::NAN),
            device_count: o.device_batteries.len(),
        }
    }
}

/// Simulation configuration.
pub struct ApcConfig {
    inner: SimConfig,
}

/// One seeded environment.
pub struct ApcEnv {
    inner: Environment,
}

/// A controller bound to the environment it was created for.
pub struct ApcPolicy {
    inner: Box<dyn Policy>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    let c = CString::new(msg).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> ApcStatus {
    match err {
        Error::Config { .. } | Error::Parse(_) => ApcStatus::Config,
        Error::Io(_) | Error::Csv(_) => ApcStatus::Io,
        _ => ApcStatus::Runtime,
    }
}

fn fail(status: ApcStatus, msg: impl Into<String>) -> ApcStatus {
    set_error(msg);
    status
}

fn from_error(err: Error) -> ApcStatus {
    fail(status_of(&err), err.to_string())
}

/// Runs `f`, turning a panic into `Panic` and clearing the error on success.
fn guarded<F: FnOnce() -> ApcStatus>(f: F) -> ApcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(ApcStatus::Ok) => {
            clear_error();
            ApcStatus::Ok
        }
        Ok(s) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(ApcStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, ApcStatus> {
    if p.is_null() {
        return Err(fail(ApcStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(ApcStatus::InvalidArgument, format!("`{name}` is not UTF-8")))
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! non_null {
    ($p:expr, $name:literal) => {
        if $p.is_null() {
            return fail(ApcStatus::NullPointer, concat!("`", $name, "` is null"));
        }
    };
}

/// Copies `text` plus a NUL into `buf` when it fits; `needed` receives the
/// byte length without the NUL.
unsafe fn copy_out(text: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> ApcStatus {
    if !needed.is_null() {
        *needed = text.len();
    }
    if buf.is_null() || len <= text.len() {
        return if buf.is_null() && len == 0 {
            ApcStatus::Ok
        } else {
            fail(ApcStatus::BufferTooSmall, format!("need {} bytes", text.len() + 1))
        };
    }
    ptr::copy_nonoverlapping(text.as_ptr(), buf.cast::<u8>(), text.len());
    *buf.add(text.len()) = 0;
    ApcStatus::Ok
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn apc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns its full length. Returns 0 when
/// the last call succeeded.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn apc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Built-in defaults.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn apc_config_new_default(out: *mut *mut ApcConfig) -> ApcStatus {
    guarded(|| {
        non_null!(out, "out");
        *out = Box::into_raw(Box::new(ApcConfig {
            inner: SimConfig::default(),
        }));
        ApcStatus::Ok
    })
}

/// Parses and validates TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn apc_config_from_toml(toml: *const c_char, out: *mut *mut ApcConfig) -> ApcStatus {
    guarded(|| {
        non_null!(out, "out");
        let text = try_ffi!(str_arg(toml, "toml"));
        let cfg = try_ffi!(SimConfig::from_toml_str(text).map_err(from_error));
        *out = Box::into_raw(Box::new(ApcConfig { inner: cfg }));
        ApcStatus::Ok
    })
}

/// Reads, parses and validates a TOML file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn apc_config_load(path: *const c_char, out: *mut *mut ApcConfig) -> ApcStatus {
    guarded(|| {
        non_null!(out, "out");
        let path = try_ffi!(str_arg(path, "path"));
        let cfg = try_ffi!(SimConfig::load(Path::new(path)).map_err(from_error));
        *out = Box::into_raw(Box::new(ApcConfig { inner: cfg }));
        ApcStatus::Ok
    })
}

/// Serialises the configuration with every default filled in.
/// Call with a null `buf` to learn the size via `needed`.
///
/// # Safety
/// `config` must come from this library; `buf` null or `len` writable bytes;
/// `needed` null or valid.
#[no_mangle]
pub unsafe extern "C" fn apc_config_to_toml(
    config: *const ApcConfig,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> ApcStatus {
    guarded(|| {
        non_null!(config, "config");
        copy_out(&(*config).inner.to_toml_string(), buf, len, needed)
    })
}

/// Replaces the configured seed list with `count` seeds.
///
/// # Safety
/// `config` must come from this library; `seeds` must point to `count` values.
#[no_mangle]
pub unsafe extern "C" fn apc_config_set_seeds(config: *mut ApcConfig, seeds: *const u64, count: usize) -> ApcStatus {
    guarded(|| {
        non_null!(config, "config");
        non_null!(seeds, "seeds");
        let mut next = (*config).inner.clone();
        next.experiment.seeds = std::slice::from_raw_parts(seeds, count).to_vec();
        try_ffi!(next.validate().map_err(from_error));
        (*config).inner = next;
        ApcStatus::Ok
    })
}

/// # Safety
/// `config` must be null or come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn apc_config_free(config: *mut ApcConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Environment for `seed` under the configuration's scenario and physics.
///
/// # Safety
/// `config` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn apc_env_new(config: *const ApcConfig, seed: u64, out: *mut *mut ApcEnv) -> ApcStatus {
    guarded(|| {
        non_null!(config, "config");
        non_null!(out, "out");
        let env = try_ffi!(Environment::new((*config).inner.env_spec(), seed).map_err(from_error));
        *out = Box::into_raw(Box::new(ApcEnv { inner: env }));
        ApcStatus::Ok
    })
}

/// # Safety
/// `env` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn apc_env_observe(env: *const ApcEnv, out: *mut ApcObservation) -> ApcStatus {
    guarded(|| {
        non_null!(env, "env");
        non_null!(out, "out");
        *out = ApcObservation::from(&(*env).inner.observe());
        ApcStatus::Ok
    })
}

/// Copies the true device battery levels (mJ). `count` receives the number
/// of devices; a short buffer yields `APC_STATUS_BUFFER_TOO_SMALL`.
///
/// # Safety
/// `env` valid; `buf` null or `len` writable values; `count` null or valid.
#[no_mangle]
pub unsafe extern "C" fn apc_env_device_batteries(
    env: *const ApcEnv,
    buf: *mut f64,
    len: usize,
    count: *mut usize,
) -> ApcStatus {
    guarded(|| {
        non_null!(env, "env");
        let devices = (*env).inner.devices();
        if !count.is_null() {
            *count = devices.len();
        }
        if buf.is_null() || len < devices.len() {
            return fail(ApcStatus::BufferTooSmall, format!("need {} values", devices.len()));
        }
        for (i, d) in devices.iter().enumerate() {
            *buf.add(i) = d.battery;
        }
        ApcStatus::Ok
    })
}

/// Advances one slot with `power` mW (clamped to the battery and `P_max`).
///
/// # Safety
/// `env` must be valid; `out` null or valid.
#[no_mangle]
pub unsafe extern "C" fn apc_env_step(env: *mut ApcEnv, power: f64, out: *mut ApcSlotOutcome) -> ApcStatus {
    guarded(|| {
        non_null!(env, "env");
        if !power.is_finite() || power < 0.0 {
            return fail(ApcStatus::InvalidArgument, format!("power {power} must be finite and >= 0"));
        }
        let env = &mut (*env).inner;
        let outcome = env.step(power.min(env.power_cap()));
        if !out.is_null() {
            *out = ApcSlotOutcome::from(&outcome);
        }
        ApcStatus::Ok
    })
}

/// # Safety
/// `env` must be null or come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn apc_env_free(env: *mut ApcEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Builds `agent` for the network inside `env`, seeded with `seed`.
///
/// # Safety
/// `config`, `env` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn apc_policy_new(
    config: *const ApcConfig,
    env: *const ApcEnv,
    agent: ApcAgent,
    seed: u64,
    out: *mut *mut ApcPolicy,
) -> ApcStatus {
    guarded(|| {
        non_null!(config, "config");
        non_null!(env, "env");
        non_null!(out, "out");
        let policy = harness::build_policy(agent.into(), &(*config).inner, &(*env).inner, seed);
        *out = Box::into_raw(Box::new(ApcPolicy { inner: policy }));
        ApcStatus::Ok
    })
}

/// Power the policy would spend in the environment's current slot, without stepping.
///
/// # Safety
/// `policy`, `env` and `power` must be valid.
#[no_mangle]
pub unsafe extern "C" fn apc_policy_decide(policy: *mut ApcPolicy, env: *const ApcEnv, power: *mut f64) -> ApcStatus {
    guarded(|| {
        non_null!(policy, "policy");
        non_null!(env, "env");
        non_null!(power, "power");
        *power = (*policy).inner.decide(&(*env).inner.observe());
        ApcStatus::Ok
    })
}

/// One full slot: observe, decide, step, and feed the outcome back to the policy.
///
/// # Safety
/// `policy` and `env` must be valid; `out` null or valid.
#[no_mangle]
pub unsafe extern "C" fn apc_policy_step(policy: *mut ApcPolicy, env: *mut ApcEnv, out: *mut ApcSlotOutcome) -> ApcStatus {
    guarded(|| {
        non_null!(policy, "policy");
        non_null!(env, "env");
        let policy = &mut (*policy).inner;
        let env = &mut (*env).inner;
        let obs = env.observe();
        let power = policy.decide(&obs);
        let outcome = env.step(power);
        let next = env.observe();
        try_ffi!(policy.feedback(&obs, power, &outcome, &next).map_err(from_error));
        if !out.is_null() {
            *out = ApcSlotOutcome::from(&outcome);
        }
        ApcStatus::Ok
    })
}

/// # Safety
/// `policy` must be null or come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn apc_policy_free(policy: *mut ApcPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Runs the configured experiment with `workers` threads (0: all cores) and
/// writes `episodes.csv`, `summary.csv` and `summary.txt` into `output_dir`.
///
/// # Safety
/// `config` valid; `output_dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn apc_run_experiment(
    config: *const ApcConfig,
    output_dir: *const c_char,
    workers: usize,
) -> ApcStatus {
    guarded(|| {
        non_null!(config, "config");
        let dir = try_ffi!(str_arg(output_dir, "output_dir"));
        let result = try_ffi!(harness::run_experiment(&(*config).inner, workers).map_err(from_error));
        try_ffi!(harness::write_run_outputs(Path::new(dir), &result).map_err(from_error));
        ApcStatus::Ok
    })
}

/// Runs the configuration's `[sweep]` and writes the sweep CSVs into `output_dir`.
///
/// # Safety
/// `config` valid; `output_dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn apc_run_sweep(config: *const ApcConfig, output_dir: *const c_char, workers: usize) -> ApcStatus {
    guarded(|| {
        non_null!(config, "config");
        let dir = try_ffi!(str_arg(output_dir, "output_dir"));
        let cfg = &(*config).inner;
        let Some(sw) = cfg.sweep.as_ref() else {
            return fail(ApcStatus::Config, "the configuration has no [sweep] table");
        };
        let result = try_ffi!(harness::sweep(cfg, sw.axis, &sw.values, workers).map_err(from_error));
        let exp = &cfg.experiment;
        try_ffi!(harness::write_sweep_outputs(Path::new(dir), &result, exp.episode_length, exp.collection_slot)
            .map_err(from_error));
        ApcStatus::Ok
    })
}

/// Shannon rate (bit/s) for `power_mw`, linear gain, bandwidth (Hz) and noise (W).
#[no_mangle]
pub extern "C" fn apc_data_rate(power_mw: f64, gain: f64, bandwidth: f64, noise_w: f64) -> f64 {
    data_rate(power_mw, gain, bandwidth, noise_w)
}

/// Power (mW) that just meets `rate_requirement`, capped by battery and `max_power`.
#[no_mangle]
pub extern "C" fn apc_no_policy_power(
    user_gain: f64,
    rate_requirement: f64,
    bandwidth: f64,
    noise_w: f64,
    battery: f64,
    max_power: f64,
) -> f64 {
    no_policy_power(user_gain, rate_requirement, bandwidth, noise_w, battery, max_power)
}

/// `1000 / power_mw` (1/W) when both user types are satisfied, else 0.
#[no_mangle]
pub extern "C" fn apc_energy_efficiency(all_devices: bool, user_satisfied: bool, power_mw: f64) -> f64 {
    energy_efficiency(all_devices, user_satisfied, power_mw)
}
