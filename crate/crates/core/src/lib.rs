//! Closed-loop neuroadaptive feedback simulator.
//!
//! A four-armed bandit agent learns which multisensory feedback condition a
//! participant prefers, either from explicit slider ratings or from implicit
//! scores produced by a shrinkage-LDA decoder over post-grab EEG epochs.
//!
//! Layout:
//! - [`bandit`]: hybrid ε-greedy/UCB agent with the anchored Q-update.
//! - [`decoder`]: band-pass, windowed ERP features, feature selection,
//!   Ledoit-Wolf LDA, score normalization and classifier metrics.
//! - [`sim`]: simulated raters and a synthetic EEG generator.
//! - [`engine`]: training block, adaptive blocks, full sessions, Monte Carlo,
//!   session logs and the live console server.
//! - [`analysis`]: convergence statistics (TOST, Pearson, t-tests, contingency).

pub mod analysis;
pub mod bandit;
pub mod decoder;
pub mod engine;
pub mod error;
pub mod sim;
pub mod stats;

pub use bandit::{ActionId, AgentConfig, AgentState, Reward, RewardSource};
pub use error::{Error, Result};
