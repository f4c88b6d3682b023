//! C ABI over the bandit agent and the decoder bundle.
//!
//! Every call returns an [`NhStatus`]; on failure the message is available
//! from [`nh_last_error`] on the same thread. Handles are opaque and must be
//! released with the matching `*_free` function. Panics never cross the
//! boundary; they surface as `NhStatus_Internal`.

use std::cell::RefCell;
use std::ffi::{CStr, CString, c_char};
use std::panic::{AssertUnwindSafe, catch_unwind};
use std::path::Path;

use neurohaptic::bandit::{ActionId, AgentConfig, AgentState, NUM_ACTIONS, Reward, RewardSource};
use neurohaptic::decoder::{DecoderBundle, Epoch, Preprocessor};
use neurohaptic::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NhStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidAction = 3,
    NonFinite = 4,
    Config = 5,
    Shape = 6,
    Io = 7,
    Parse = 8,
    Internal = 9,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> NhStatus {
    match e {
        Error::Config(_) => NhStatus::Config,
        Error::NonFiniteReward(_) | Error::NonFinite(_) => NhStatus::NonFinite,
        Error::InvalidAction(_) => NhStatus::InvalidAction,
        Error::Shape(_) => NhStatus::Shape,
        Error::Io(_) => NhStatus::Io,
        Error::Parse { .. } | Error::Json(_) => NhStatus::Parse,
        _ => NhStatus::InvalidArgument,
    }
}

fn fail(status: NhStatus, msg: impl Into<String>) -> NhStatus {
    set_error(msg.into());
    status
}

fn guard(f: impl FnOnce() -> Result<(), NhStatus>) -> NhStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NhStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(NhStatus::Internal, "internal panic"),
    }
}

fn check(r: neurohaptic::Result<()>) -> Result<(), NhStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

/// Agent parameters; see `nh_agent_config_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NhAgentConfig {
    pub c: f64,
    pub alpha0: f64,
    pub alpha_min: f64,
    pub epsilon0: f64,
    pub epsilon_min: f64,
    pub gamma: f64,
    pub q_init: f64,
    pub convergence_k: u32,
    pub max_trials: u32,
}

impl From<&NhAgentConfig> for AgentConfig {
    fn from(c: &NhAgentConfig) -> Self {
        AgentConfig {
            c: c.c,
            alpha0: c.alpha0,
            alpha_min: c.alpha_min,
            epsilon0: c.epsilon0,
            epsilon_min: c.epsilon_min,
            gamma: c.gamma,
            q_init: c.q_init,
            convergence_k: c.convergence_k as usize,
            max_trials: c.max_trials as usize,
            ..AgentConfig::default()
        }
    }
}

/// Agent state after the latest update.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NhAgentSnapshot {
    pub q: [f64; 4],
    pub n: [u64; 4],
    pub t: u64,
    pub alpha: f64,
    pub epsilon: f64,
    /// Converged action, or -1.
    pub converged: i32,
}

/// Opaque agent handle: configuration, state and its own seeded RNG.
pub struct NhAgent {
    config: AgentConfig,
    state: AgentState,
    rng: ChaCha8Rng,
}

/// Opaque handle to a fitted decoder bundle.
pub struct NhDecoder {
    bundle: DecoderBundle,
    pre: Preprocessor,
}

/// Static, NUL-terminated name of a status code.
#[unsafe(no_mangle)]
pub extern "C" fn nh_status_name(status: NhStatus) -> *const c_char {
    let s: &'static CStr = match status {
        NhStatus::Ok => c"ok",
        NhStatus::NullPointer => c"null_pointer",
        NhStatus::InvalidArgument => c"invalid_argument",
        NhStatus::InvalidAction => c"invalid_action",
        NhStatus::NonFinite => c"non_finite",
        NhStatus::Config => c"config",
        NhStatus::Shape => c"shape",
        NhStatus::Io => c"io",
        NhStatus::Parse => c"parse",
        NhStatus::Internal => c"internal",
    };
    s.as_ptr()
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `len > 0`). Returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn nh_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map_or(&[][..], |c| c.as_bytes());
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            // SAFETY: caller guarantees `len` writable bytes at `buf`.
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

#[unsafe(no_mangle)]
pub extern "C" fn nh_agent_config_default() -> NhAgentConfig {
    let d = AgentConfig::default();
    NhAgentConfig {
        c: d.c,
        alpha0: d.alpha0,
        alpha_min: d.alpha_min,
        epsilon0: d.epsilon0,
        epsilon_min: d.epsilon_min,
        gamma: d.gamma,
        q_init: d.q_init,
        convergence_k: d.convergence_k as u32,
        max_trials: d.max_trials as u32,
    }
}

/// Creates an agent. `config` may be null for the defaults.
///
/// # Safety
/// `config` must be null or valid; `out` must be valid for writes.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn nh_agent_new(config: *const NhAgentConfig, seed: u64, out: *mut *mut NhAgent) -> NhStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(NhStatus::NullPointer, "out is null"));
        }
        // SAFETY: checked for null; caller guarantees validity.
        let config = match unsafe { config.as_ref() } {
            Some(c) => AgentConfig::from(c),
            None => AgentConfig::default(),
        };
        check(config.validate())?;
        let agent = NhAgent {
            state: AgentState::new(&config),
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        // SAFETY: checked for null above.
        unsafe { *out = Box::into_raw(Box::new(agent)) };
        Ok(())
    })
}

/// # Safety
/// `agent` must be null or a handle from `nh_agent_new` not yet freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn nh_agent_free(agent: *mut NhAgent) {
    if !agent.is_null() {
        // SAFETY: handle came from Box::into_raw in nh_agent_new.
        drop(unsafe { Box::from_raw(agent) });
    }
}

unsafe fn agent_mut<'a>(agent: *mut NhAgent) -> Result<&'a mut NhAgent, NhStatus> {
    // SAFETY: forwarded from the caller's contract.
    unsafe { agent.as_mut() }.ok_or_else(|| fail(NhStatus::NullPointer, "agent is null"))
}

/// Draws the next condition (0..4) from the agent's policy.
///
/// # Safety
/// `agent` must be a live handle; `out_action` valid for writes.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn nh_agent_select_action(agent: *mut NhAgent, out_action: *mut u8) -> NhStatus {
    guard(|| {
        // SAFETY: caller contract.
        let a = unsafe { agent_mut(agent) }?;
        if out_action.is_null() {
            return Err(fail(NhStatus::NullPointer, "out_action is null"));
        }
        let pick = a.state.select_action(&a.config, &mut a.rng);
        // SAFETY: checked for null above.
        unsafe { *out_action = pick.index() as u8 };
        Ok(())
    })
}

/// Applies one reward (clamped to [0, 1]) for `action`.
///
/// # Safety
/// `agent` must be a live handle.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn nh_agent_update(agent: *mut NhAgent, action: u8, reward: f64) -> NhStatus {
    guard(|| {
        // SAFETY: caller contract.
        let a = unsafe { agent_mut(agent) }?;
        let action = ActionId::new(action as usize).map_err(|e| fail(status_of(&e), e.to_string()))?;
        let reward = Reward::new(reward, RewardSource::Explicit).map_err(|e| fail(status_of(&e), e.to_string()))?;
        check(a.state.update_q(action, reward, &a.config))
    })
}

/// # Safety
/// `agent` must be a live handle; `out` valid for writes.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn nh_agent_snapshot(agent: *const NhAgent, out: *mut NhAgentSnapshot) -> NhStatus {
    guard(|| {
        // SAFETY: caller contract.
        let a = unsafe { agent.as_ref() }.ok_or_else(|| fail(NhStatus::NullPointer, "agent is null"))?;
        if out.is_null() {
            return Err(fail(NhStatus::NullPointer, "out is null"));
        }
        let s = &a.state;
        let snap = NhAgentSnapshot {
            q: s.q,
            n: s.n,
            t: s.t,
            alpha: s.alpha_t,
            epsilon: s.epsilon_t,
            converged: s.check_convergence(&a.config).map_or(-1, |c| c.index() as i32),
        };
        // SAFETY: checked for null above.
        unsafe { *out = snap };
        Ok(())
    })
}

/// Loads a decoder bundle JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` valid for writes.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn nh_decoder_load(path: *const c_char, out: *mut *mut NhDecoder) -> NhStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return Err(fail(NhStatus::NullPointer, "path or out is null"));
        }
        // SAFETY: caller guarantees a NUL-terminated string.
        let path = unsafe { CStr::from_ptr(path) }
            .to_str()
            .map_err(|_| fail(NhStatus::InvalidArgument, "path is not UTF-8"))?;
        let bundle = DecoderBundle::load(Path::new(path)).map_err(|e| fail(status_of(&e), e.to_string()))?;
        let dec = NhDecoder {
            bundle,
            pre: Preprocessor::new(),
        };
        // SAFETY: checked for null above.
        unsafe { *out = Box::into_raw(Box::new(dec)) };
        Ok(())
    })
}

/// # Safety
/// `decoder` must be null or a handle from `nh_decoder_load` not yet freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn nh_decoder_free(decoder: *mut NhDecoder) {
    if !decoder.is_null() {
        // SAFETY: handle came from Box::into_raw in nh_decoder_load.
        drop(unsafe { Box::from_raw(decoder) });
    }
}

/// Number of samples `nh_decoder_score_epoch` expects (channels x samples).
#[unsafe(no_mangle)]
pub extern "C" fn nh_epoch_len() -> usize {
    neurohaptic::decoder::CHANNELS * neurohaptic::decoder::SAMPLES
}

/// Scores one raw channel-major epoch and writes the normalized reward.
///
/// # Safety
/// `decoder` must be a live handle; `samples` must point to `len` doubles;
/// `out_reward` valid for writes.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn nh_decoder_score_epoch(
    decoder: *const NhDecoder,
    samples: *const f64,
    len: usize,
    out_reward: *mut f64,
) -> NhStatus {
    guard(|| {
        // SAFETY: caller contract.
        let d = unsafe { decoder.as_ref() }.ok_or_else(|| fail(NhStatus::NullPointer, "decoder is null"))?;
        if samples.is_null() || out_reward.is_null() {
            return Err(fail(NhStatus::NullPointer, "samples or out_reward is null"));
        }
        // SAFETY: caller guarantees `len` readable doubles.
        let data = unsafe { std::slice::from_raw_parts(samples, len) }.to_vec();
        let epoch = Epoch::new(data, 0, ActionId::VISUAL, 0.5).map_err(|e| fail(status_of(&e), e.to_string()))?;
        let reward = d.bundle.score_epoch_with(&d.pre, &epoch).map_err(|e| fail(status_of(&e), e.to_string()))?;
        // SAFETY: checked for null above.
        unsafe { *out_reward = reward.value() };
        Ok(())
    })
}

const _: () = assert!(NUM_ACTIONS == 4);
