use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use neurohaptic::bandit::{AgentConfig, AgentState, Reward, RewardSource};
use neurohaptic::engine::config::preset;
use neurohaptic::engine::session::simulate_session;
use neurohaptic_ffi::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    unsafe { nh_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn agent_matches_core_trajectory() {
    let mut agent = ptr::null_mut();
    assert_eq!(unsafe { nh_agent_new(ptr::null(), 42, &mut agent) }, NhStatus::Ok);

    let cfg = AgentConfig::default();
    let mut state = AgentState::new(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let rewards = [0.1, 0.9, 0.4, 0.7];
    for _ in 0..40 {
        let mut a = 0u8;
        assert_eq!(unsafe { nh_agent_select_action(agent, &mut a) }, NhStatus::Ok);
        let expect = state.select_action(&cfg, &mut rng);
        assert_eq!(a as usize, expect.index());
        let r = rewards[a as usize];
        assert_eq!(unsafe { nh_agent_update(agent, a, r) }, NhStatus::Ok);
        state
            .update_q(expect, Reward::new(r, RewardSource::Explicit).unwrap(), &cfg)
            .unwrap();
    }
    let mut snap = NhAgentSnapshot::default();
    assert_eq!(unsafe { nh_agent_snapshot(agent, &mut snap) }, NhStatus::Ok);
    assert_eq!(snap.q.map(f64::to_bits), state.q.map(f64::to_bits));
    assert_eq!(snap.n, state.n);
    assert_eq!(snap.t, 40);
    assert_eq!(snap.alpha, state.alpha_t);
    assert_eq!(snap.converged, state.check_convergence(&cfg).map_or(-1, |c| c.index() as i32));
    unsafe { nh_agent_free(agent) };
}

#[test]
fn errors_are_reported() {
    let mut agent = ptr::null_mut();
    assert_eq!(unsafe { nh_agent_new(ptr::null(), 1, ptr::null_mut()) }, NhStatus::NullPointer);
    let mut bad = nh_agent_config_default();
    bad.gamma = 2.0;
    assert_eq!(unsafe { nh_agent_new(&bad, 1, &mut agent) }, NhStatus::Config);
    assert!(last_error().contains("gamma"), "{}", last_error());

    assert_eq!(unsafe { nh_agent_new(ptr::null(), 1, &mut agent) }, NhStatus::Ok);
    assert_eq!(unsafe { nh_agent_update(agent, 7, 0.5) }, NhStatus::InvalidAction);
    assert_eq!(unsafe { nh_agent_update(agent, 0, f64::NAN) }, NhStatus::NonFinite);
    assert_eq!(unsafe { nh_agent_select_action(ptr::null_mut(), ptr::null_mut()) }, NhStatus::NullPointer);
    unsafe { nh_agent_free(agent) };
    unsafe { nh_agent_free(ptr::null_mut()) };

    let name = unsafe { CStr::from_ptr(nh_status_name(NhStatus::InvalidAction)) };
    assert_eq!(name.to_str().unwrap(), "invalid_action");
}

#[test]
fn decoder_scores_like_core() {
    let mut cfg = preset("zero-noise").unwrap();
    cfg.seed = 4;
    let session = simulate_session(&cfg, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("decoder.json");
    session.bundle.save(&path).unwrap();

    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut dec = ptr::null_mut();
    assert_eq!(unsafe { nh_decoder_load(c_path.as_ptr(), &mut dec) }, NhStatus::Ok);
    for epoch in session.training.epochs.iter().take(5) {
        let mut samples = Vec::with_capacity(nh_epoch_len());
        for ch in 0..64 {
            samples.extend_from_slice(epoch.channel(ch));
        }
        let mut out = f64::NAN;
        assert_eq!(
            unsafe { nh_decoder_score_epoch(dec, samples.as_ptr(), samples.len(), &mut out) },
            NhStatus::Ok
        );
        assert_eq!(out, session.bundle.score_epoch(epoch).unwrap().value());
    }
    let mut out = 0.0;
    let short = [0.0; 10];
    assert_eq!(unsafe { nh_decoder_score_epoch(dec, short.as_ptr(), 10, &mut out) }, NhStatus::Shape);
    unsafe { nh_decoder_free(dec) };

    let missing = CString::new("/nonexistent/decoder.json").unwrap();
    assert_eq!(unsafe { nh_decoder_load(missing.as_ptr(), &mut dec) }, NhStatus::Io);
}

#[test]
fn header_is_valid_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        "#include \"neurohaptic.h\"\nint main(void) { NhAgentConfig c = nh_agent_config_default(); (void)c; return NhStatus_Ok; }\n",
    )
    .unwrap();
    let out = Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .output()
        .expect("C compiler available");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
