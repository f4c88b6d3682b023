//! Four-armed bandit agent.
//!
//! Action selection is ε-greedy over an upper-confidence-bound ranking:
//!
//! ```text
//! UCB(a) = Q(a) + c * sqrt(log10(t) / N(a))      (+inf when N(a) = 0)
//! ```
//!
//! After a reward `r` the chosen arm is updated against the current best
//! estimate rather than a next-state value:
//!
//! ```text
//! Q(a) <- (1 - α) Q(a) + α (r - γ max_a' Q(a'))
//! ```
//!
//! Learning and exploration rates decay in closed form:
//! `α(t) = max(α_min, α0 - log10(t+1)/40)` and
//! `ε(t) = max(ε_min, ε0 - log10(t+1)/20)`.
//!
//! Time bookkeeping: `t` in [`AgentState`] is the number of completed
//! updates. The schedules are evaluated at `t`; the UCB bonus uses the
//! decision index `t + 1` so the first decision sees `log10(1) = 0`.

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_ACTIONS: usize = 4;

/// One of the four interface conditions.
///
/// | index | condition                  |
/// |-------|----------------------------|
/// | 0     | visual baseline            |
/// | 1     | visual + sound             |
/// | 2     | visual + vibrotactile      |
/// | 3     | visual + sound + vibrotactile |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct ActionId(u8);

impl ActionId {
    pub const VISUAL: ActionId = ActionId(0);
    pub const VISUAL_SOUND: ActionId = ActionId(1);
    pub const VISUAL_VIBRO: ActionId = ActionId(2);
    pub const VISUAL_SOUND_VIBRO: ActionId = ActionId(3);

    pub const ALL: [ActionId; NUM_ACTIONS] = [
        Self::VISUAL,
        Self::VISUAL_SOUND,
        Self::VISUAL_VIBRO,
        Self::VISUAL_SOUND_VIBRO,
    ];

    pub fn new(index: usize) -> Result<Self> {
        if index < NUM_ACTIONS {
            Ok(ActionId(index as u8))
        } else {
            Err(Error::InvalidAction(index))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        match self.0 {
            0 => "visual",
            1 => "visual+sound",
            2 => "visual+vibrotactile",
            _ => "visual+sound+vibrotactile",
        }
    }

    pub fn has_sound(self) -> bool {
        self.0 == 1 || self.0 == 3
    }

    pub fn has_vibration(self) -> bool {
        self.0 >= 2
    }
}

impl TryFrom<usize> for ActionId {
    type Error = Error;

    fn try_from(value: usize) -> Result<Self> {
        ActionId::new(value)
    }
}

impl From<ActionId> for usize {
    fn from(a: ActionId) -> usize {
        a.index()
    }
}

impl std::fmt::Display for ActionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub num_actions: usize,
    /// UCB exploration constant.
    pub c: f64,
    pub alpha0: f64,
    pub alpha_min: f64,
    pub epsilon0: f64,
    pub epsilon_min: f64,
    pub gamma: f64,
    pub q_init: f64,
    /// Identical consecutive picks required to declare convergence.
    pub convergence_k: usize,
    /// Trial cap for one adaptive block.
    pub max_trials: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            num_actions: NUM_ACTIONS,
            c: 0.25,
            alpha0: 0.5,
            alpha_min: 0.001,
            epsilon0: 1.0,
            epsilon_min: 0.01,
            gamma: 0.95,
            q_init: 1.0,
            convergence_k: 5,
            max_trials: 60,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(format!("agent.{msg}")));
        if self.num_actions != NUM_ACTIONS {
            return fail("num_actions must be 4");
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return fail("c must be finite and >= 0");
        }
        if !(0.0 <= self.alpha_min && self.alpha_min <= self.alpha0 && self.alpha0 <= 1.0) {
            return fail("alpha: require 0 <= alpha_min <= alpha0 <= 1");
        }
        if !(0.0 <= self.epsilon_min && self.epsilon_min <= self.epsilon0 && self.epsilon0 <= 1.0) {
            return fail("epsilon: require 0 <= epsilon_min <= epsilon0 <= 1");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail("gamma must lie in [0, 1]");
        }
        if !self.q_init.is_finite() {
            return fail("q_init must be finite");
        }
        if self.convergence_k < 1 {
            return fail("convergence_k must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardSource {
    Explicit,
    Implicit,
}

/// A reward in `[0, 1]`. Construction clamps; non-finite values are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reward {
    value: f64,
    source: RewardSource,
}

impl Reward {
    pub fn new(value: f64, source: RewardSource) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFiniteReward(value));
        }
        Ok(Self {
            value: value.clamp(0.0, 1.0),
            source,
        })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn source(&self) -> RewardSource {
        self.source
    }
}

pub fn alpha_schedule(t: u64, config: &AgentConfig) -> f64 {
    let decay = ((t + 1) as f64).log10() / 40.0;
    config.alpha_min.max(config.alpha0 - decay)
}

pub fn epsilon_schedule(t: u64, config: &AgentConfig) -> f64 {
    let decay = ((t + 1) as f64).log10() / 20.0;
    config.epsilon_min.max(config.epsilon0 - decay)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub q: [f64; NUM_ACTIONS],
    pub n: [u64; NUM_ACTIONS],
    /// Completed updates.
    pub t: u64,
    pub pick_history: Vec<ActionId>,
    pub alpha_t: f64,
    pub epsilon_t: f64,
}

impl AgentState {
    pub fn new(config: &AgentConfig) -> Self {
        Self {
            q: [config.q_init; NUM_ACTIONS],
            n: [0; NUM_ACTIONS],
            t: 0,
            pick_history: Vec::new(),
            alpha_t: alpha_schedule(0, config),
            epsilon_t: epsilon_schedule(0, config),
        }
    }

    /// Index of the upcoming decision as seen by the UCB bonus.
    pub fn decision_index(&self) -> u64 {
        self.t + 1
    }

    pub fn ucb_value(&self, a: ActionId, config: &AgentConfig) -> f64 {
        let visits = self.n[a.index()];
        if visits == 0 {
            return f64::INFINITY;
        }
        let log_t = (self.decision_index() as f64).log10();
        self.q[a.index()] + config.c * (log_t / visits as f64).sqrt()
    }

    /// Arg-max of the UCB values; ties go to the lowest index.
    pub fn greedy_action(&self, config: &AgentConfig) -> ActionId {
        let mut best = ActionId::VISUAL;
        let mut best_value = self.ucb_value(best, config);
        for a in &ActionId::ALL[1..] {
            let v = self.ucb_value(*a, config);
            if v > best_value {
                best = *a;
                best_value = v;
            }
        }
        best
    }

    /// Draws the explore/exploit coin, then a uniform arm. Both values are
    /// drawn on every call so the random stream stays aligned across trials.
    pub fn select_action<R: Rng + ?Sized>(&self, config: &AgentConfig, rng: &mut R) -> ActionId {
        let coin: f64 = rng.random();
        let uniform = ActionId(rng.random_range(0..NUM_ACTIONS as u8));
        if coin < self.epsilon_t {
            uniform
        } else {
            self.greedy_action(config)
        }
    }

    pub fn update_q(&mut self, a: ActionId, r: Reward, config: &AgentConfig) -> Result<()> {
        if !r.value().is_finite() {
            return Err(Error::NonFiniteReward(r.value()));
        }
        let alpha = self.alpha_t;
        let max_q = self.q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let i = a.index();
        self.q[i] = (1.0 - alpha) * self.q[i] + alpha * (r.value() - config.gamma * max_q);
        self.n[i] += 1;
        self.t += 1;
        self.pick_history.push(a);
        self.alpha_t = alpha_schedule(self.t, config);
        self.epsilon_t = epsilon_schedule(self.t, config);
        Ok(())
    }

    /// Returns the arm if the last `convergence_k` picks are identical.
    pub fn check_convergence(&self, config: &AgentConfig) -> Option<ActionId> {
        let k = config.convergence_k;
        let h = &self.pick_history;
        if k == 0 || h.len() < k {
            return None;
        }
        let tail = &h[h.len() - k..];
        let first = tail[0];
        tail.iter().all(|&a| a == first).then_some(first)
    }
}
