//! Experiment protocol: configuration, the simulated training and adaptive
//! blocks, Monte Carlo batches, session logs and the live console server.

pub mod config;
pub mod live;
pub mod log;
pub mod monte_carlo;
pub mod session;

pub use config::{BlockOrder, ExperimentConfig, preset};
pub use log::{Block, LogWriter, TrialRecord, read_log, replay_block, write_log};
pub use monte_carlo::{MonteCarloSummary, monte_carlo, run_batch, seed_list};
pub use session::{
    AdaptiveRun, DeterministicOracle, FeedbackEndpoint, SessionResult, run_adaptive_block, run_full_session,
    run_session, run_training_block, simulate_session,
};
