use std::ffi::{c_char, CStr, CString};
use std::ptr;

use apcharge_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    unsafe { apc_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn config(toml: &str) -> *mut ApcConfig {
    let text = CString::new(toml).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { apc_config_from_toml(text.as_ptr(), &mut cfg) }, ApcStatus::Ok, "{}", last_error());
    cfg
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(apc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn physics_exports_match_closed_forms() {
    // 100 mW, g = 1e-3, N0 = 1e-9 W: SNR = 1e-4 / 1e-9 = 1e5.
    let r = apc_data_rate(100.0, 1e-3, 1e6, 1e-9);
    assert!((r - 1e6 * (1.0f64 + 1e5).log2()).abs() < 1e-6);
    let p = apc_no_policy_power(1e-3, 2e6, 1e6, 1e-9, 1e9, 1e9);
    // 2 bit/s/Hz needs SNR 3: 3e-9 W / 1e-3 = 3e-6 W = 3e-3 mW.
    assert!((p - 3e-3).abs() < 1e-12);
    assert_eq!(apc_energy_efficiency(true, true, 200.0), 5.0);
    assert_eq!(apc_energy_efficiency(true, false, 200.0), 0.0);
}

#[test]
fn bad_toml_reports_config_error() {
    let text = CString::new("[experiment]\ntotal_slots = 7\n").unwrap();
    let mut cfg = ptr::null_mut();
    let s = unsafe { apc_config_from_toml(text.as_ptr(), &mut cfg) };
    assert_eq!(s, ApcStatus::Config);
    assert!(cfg.is_null());
    assert!(last_error().contains("total_slots"));
}

#[test]
fn null_arguments_are_rejected() {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { apc_config_from_toml(ptr::null(), &mut cfg) }, ApcStatus::NullPointer);
    assert!(last_error().contains("toml"));
    assert_eq!(unsafe { apc_env_step(ptr::null_mut(), 1.0, ptr::null_mut()) }, ApcStatus::NullPointer);
    unsafe {
        apc_config_free(ptr::null_mut());
        apc_env_free(ptr::null_mut());
        apc_policy_free(ptr::null_mut());
    }
}

#[test]
fn success_clears_the_error() {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { apc_config_from_toml(ptr::null(), &mut cfg) }, ApcStatus::NullPointer);
    assert_eq!(unsafe { apc_config_new_default(&mut cfg) }, ApcStatus::Ok);
    assert_eq!(unsafe { apc_last_error_message(ptr::null_mut(), 0) }, 0);
    unsafe { apc_config_free(cfg) };
}

#[test]
fn toml_round_trip_with_size_query() {
    let cfg = config("[model]\nmax_power = 150.0\n");
    let mut needed = 0usize;
    assert_eq!(unsafe { apc_config_to_toml(cfg, ptr::null_mut(), 0, &mut needed) }, ApcStatus::Ok);
    let mut small = vec![0 as c_char; 4];
    assert_eq!(
        unsafe { apc_config_to_toml(cfg, small.as_mut_ptr(), small.len(), &mut needed) },
        ApcStatus::BufferTooSmall
    );
    let mut buf = vec![0 as c_char; needed + 1];
    assert_eq!(unsafe { apc_config_to_toml(cfg, buf.as_mut_ptr(), buf.len(), ptr::null_mut()) }, ApcStatus::Ok);
    let text = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_owned();
    assert_eq!(text.len(), needed);
    assert!(text.contains("max_power = 150.0"));
    let again = config(&text);
    unsafe {
        apc_config_free(cfg);
        apc_config_free(again);
    }
}

#[test]
fn stepping_respects_the_battery() {
    let cfg = config("[experiment]\nscenario = \"solar\"\n[model]\ninitial_ap_battery = 50.0\n");
    let mut env = ptr::null_mut();
    assert_eq!(unsafe { apc_env_new(cfg, 3, &mut env) }, ApcStatus::Ok);
    let mut obs = ApcObservation::default();
    assert_eq!(unsafe { apc_env_observe(env, &mut obs) }, ApcStatus::Ok);
    assert_eq!(obs.slot, 0);
    assert_eq!(obs.battery, 50.0);
    assert!(obs.last_arrival.is_nan());
    let mut out = ApcSlotOutcome::default();
    assert_eq!(unsafe { apc_env_step(env, 200.0, &mut out) }, ApcStatus::Ok);
    assert_eq!(out.power, 50.0);
    assert_eq!(unsafe { apc_env_step(env, f64::NAN, &mut out) }, ApcStatus::InvalidArgument);
    assert_eq!(unsafe { apc_env_step(env, -1.0, &mut out) }, ApcStatus::InvalidArgument);

    let mut n = 0usize;
    assert_eq!(
        unsafe { apc_env_device_batteries(env, ptr::null_mut(), 0, &mut n) },
        ApcStatus::BufferTooSmall
    );
    assert_eq!(n, obs.device_count);
    let mut levels = vec![0.0; n];
    assert_eq!(unsafe { apc_env_device_batteries(env, levels.as_mut_ptr(), n, &mut n) }, ApcStatus::Ok);
    assert!(levels.iter().all(|b| *b >= 0.0));
    unsafe {
        apc_env_free(env);
        apc_config_free(cfg);
    }
}

/// Steps `agent` for `slots` slots and returns the outcomes.
fn trajectory(agent: ApcAgent, seed: u64, slots: usize) -> Vec<(f64, usize, bool)> {
    let cfg = config("");
    let mut env = ptr::null_mut();
    let mut policy = ptr::null_mut();
    let mut rows = Vec::new();
    unsafe {
        assert_eq!(apc_env_new(cfg, seed, &mut env), ApcStatus::Ok);
        assert_eq!(apc_policy_new(cfg, env, agent, seed, &mut policy), ApcStatus::Ok);
        for _ in 0..slots {
            let mut out = ApcSlotOutcome::default();
            assert_eq!(apc_policy_step(policy, env, &mut out), ApcStatus::Ok, "{}", last_error());
            rows.push((out.power, out.activated, out.user_satisfied));
        }
        apc_policy_free(policy);
        apc_env_free(env);
        apc_config_free(cfg);
    }
    rows
}

#[test]
fn policy_handles_are_deterministic() {
    for agent in [ApcAgent::Dqn, ApcAgent::Trl, ApcAgent::Mpc, ApcAgent::Random] {
        assert_eq!(trajectory(agent, 9, 60), trajectory(agent, 9, 60));
    }
}

#[test]
fn greedy_handle_spends_full_power_from_a_full_battery() {
    let rows = trajectory(ApcAgent::Greedy, 1, 5);
    assert!(rows.iter().all(|r| r.0 == 200.0));
}

#[test]
fn decide_does_not_advance_the_environment() {
    let cfg = config("");
    unsafe {
        let mut env = ptr::null_mut();
        let mut policy = ptr::null_mut();
        apc_env_new(cfg, 4, &mut env);
        apc_policy_new(cfg, env, ApcAgent::NoPolicy, 4, &mut policy);
        let mut p = -1.0;
        assert_eq!(apc_policy_decide(policy, env, &mut p), ApcStatus::Ok);
        assert!((0.0..=200.0).contains(&p));
        let mut obs = ApcObservation::default();
        apc_env_observe(env, &mut obs);
        assert_eq!(obs.slot, 0);
        apc_policy_free(policy);
        apc_env_free(env);
        apc_config_free(cfg);
    }
}

#[test]
fn experiment_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        "[experiment]\nagents = [\"greedy\", \"random\"]\ntotal_slots = 600\nepisode_length = 300\ncollection_slot = 300\nseeds = [1, 2]\n",
    );
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { apc_run_experiment(cfg, out.as_ptr(), 1) }, ApcStatus::Ok, "{}", last_error());
    let episodes = std::fs::read_to_string(dir.path().join("episodes.csv")).unwrap();
    // Header plus 2 agents × 2 seeds × 2 episodes.
    assert_eq!(episodes.lines().count(), 9);
    assert_eq!(unsafe { apc_run_sweep(cfg, out.as_ptr(), 1) }, ApcStatus::Config);
    assert!(last_error().contains("sweep"));
    unsafe { apc_config_free(cfg) };
}

#[test]
fn seed_override_is_validated() {
    let cfg = config("");
    let seeds = [5u64, 6];
    assert_eq!(unsafe { apc_config_set_seeds(cfg, seeds.as_ptr(), 2) }, ApcStatus::Ok);
    let dup = [5u64, 5];
    assert_eq!(unsafe { apc_config_set_seeds(cfg, dup.as_ptr(), 2) }, ApcStatus::Config);
    let mut needed = 0;
    unsafe { apc_config_to_toml(cfg, ptr::null_mut(), 0, &mut needed) };
    let mut buf = vec![0 as c_char; needed + 1];
    unsafe { apc_config_to_toml(cfg, buf.as_mut_ptr(), buf.len(), ptr::null_mut()) };
    let text = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned();
    assert!(text.contains("seeds = [\n    5,\n    6,\n]") || text.contains("seeds = [5, 6]"), "{text}");
    unsafe { apc_config_free(cfg) };
}
