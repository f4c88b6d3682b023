//! Training block, adaptive blocks and full simulated sessions.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{Outcome, SessionOutcome, training_means, truth_from_means};
use crate::bandit::{ActionId, AgentConfig, AgentState, NUM_ACTIONS, Reward, RewardSource};
use crate::decoder::{
    BundleSummary, CleaningConfig, DatasetSummary, DecoderBundle, Epoch, PreparedDataset, Preprocessor,
    grid_search_fit_with, prepare_dataset,
};
use crate::engine::config::ExperimentConfig;
use crate::engine::log::{Block, TrialRecord, replay_block_with_decisions};
use crate::error::{Error, Result};
use crate::sim::{ErpModel, PreferenceProfile, SimulatedParticipant, explicit_rating, implicit_feedback_with};

/// Virtual duration of one simulated trial.
pub const SIMULATED_TRIAL_MS: u64 = 8_000;

/// Independent ChaCha streams derived from the session seed.
pub mod stream {
    pub const TRAINING_ORDER: u64 = 1;
    pub const PARTICIPANT: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const EXPLICIT_AGENT: u64 = 4;
    pub const EXPLICIT_ORACLE: u64 = 5;
    pub const IMPLICIT_AGENT: u64 = 6;
    pub const IMPLICIT_ORACLE: u64 = 7;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Source of rewards for an adaptive block.
pub trait FeedbackEndpoint {
    /// Reward for presenting `condition`; `t` is the 0-based trial index
    /// counted over the whole session.
    fn feedback(&mut self, condition: ActionId, t: u64) -> Result<Reward>;
}

pub struct ExplicitOracle<'a, R> {
    pub profile: &'a PreferenceProfile,
    pub rng: R,
}

impl<R: Rng> FeedbackEndpoint for ExplicitOracle<'_, R> {
    fn feedback(&mut self, condition: ActionId, t: u64) -> Result<Reward> {
        Ok(explicit_rating(self.profile, condition, t, &mut self.rng).reward)
    }
}

pub struct ImplicitOracle<'a, R> {
    pub bundle: &'a DecoderBundle,
    pub erp: &'a ErpModel,
    pub profile: &'a PreferenceProfile,
    pub pre: Preprocessor,
    pub rng: R,
}

impl<R: Rng> FeedbackEndpoint for ImplicitOracle<'_, R> {
    fn feedback(&mut self, condition: ActionId, t: u64) -> Result<Reward> {
        implicit_feedback_with(&self.pre, self.bundle, self.erp, self.profile, condition, t, &mut self.rng)
            .map(|o| o.reward)
    }
}

/// Fixed per-condition reward, e.g. 1 for the best arm and 0 otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeterministicOracle(pub [f64; NUM_ACTIONS]);

impl DeterministicOracle {
    pub fn one_hot(best: ActionId) -> Self {
        let mut r = [0.0; NUM_ACTIONS];
        r[best.index()] = 1.0;
        Self(r)
    }
}

impl FeedbackEndpoint for DeterministicOracle {
    fn feedback(&mut self, condition: ActionId, _t: u64) -> Result<Reward> {
        Reward::new(self.0[condition.index()], RewardSource::Explicit)
    }
}

/// Step-wise adaptive block: ask for the next condition, present it, submit
/// the reward. Used directly by the live server; [`run_adaptive_block`]
/// drives it from a [`FeedbackEndpoint`].
#[derive(Debug, Clone)]
pub struct AdaptiveRun {
    config: AgentConfig,
    block: Block,
    state: AgentState,
    records: Vec<TrialRecord>,
    pending: Option<ActionId>,
    converged: Option<ActionId>,
}

impl AdaptiveRun {
    pub fn new(config: &AgentConfig, block: Block) -> Self {
        Self {
            config: config.clone(),
            block,
            state: AgentState::new(config),
            records: Vec::new(),
            pending: None,
            converged: None,
        }
    }

    /// Rebuilds a run from its checkpointed records, re-drawing every logged
    /// decision from `rng` so the stream continues where it stopped.
    pub fn resume<R: Rng + ?Sized>(config: &AgentConfig, block: Block, records: Vec<TrialRecord>, rng: &mut R) -> Result<Self> {
        let state = replay_block_with_decisions(&records, config, rng)?;
        let converged = records.last().and_then(|r| r.converged);
        Ok(Self {
            config: config.clone(),
            block,
            state,
            records,
            pending: None,
            converged,
        })
    }

    pub fn is_finished(&self) -> bool {
        self.converged.is_some() || self.records.len() >= self.config.max_trials
    }

    /// Condition for the next trial, or `None` once the block is over.
    /// Repeated calls without a submit return the same pending condition.
    pub fn next_condition<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<ActionId> {
        if self.is_finished() {
            return None;
        }
        if self.pending.is_none() {
            self.pending = Some(self.state.select_action(&self.config, rng));
        }
        self.pending
    }

    pub fn pending(&self) -> Option<ActionId> {
        self.pending
    }

    pub fn submit(&mut self, reward: Reward, wall_time_ms: u64) -> Result<&TrialRecord> {
        let condition = self
            .pending
            .take()
            .ok_or_else(|| Error::Live("reward submitted with no trial in progress".into()))?;
        let (alpha_t, epsilon_t) = (self.state.alpha_t, self.state.epsilon_t);
        self.state.update_q(condition, reward, &self.config)?;
        self.converged = self.state.check_convergence(&self.config);
        self.records.push(TrialRecord {
            t: self.records.len() as u64 + 1,
            block: self.block,
            condition,
            reward: reward.value(),
            q_snapshot: self.state.q,
            alpha_t,
            epsilon_t,
            converged: self.converged,
            wall_time_ms,
        });
        Ok(self.records.last().expect("just pushed"))
    }

    pub fn converged(&self) -> Option<ActionId> {
        self.converged
    }

    pub fn state(&self) -> &AgentState {
        &self.state
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TrialRecord> {
        self.records
    }
}

/// Runs one adaptive block to convergence or `max_trials`. `t_offset` is the
/// number of session trials before this block (drift and the virtual clock
/// continue across blocks).
pub fn run_adaptive_block<R: Rng + ?Sized>(
    config: &AgentConfig,
    block: Block,
    endpoint: &mut dyn FeedbackEndpoint,
    agent_rng: &mut R,
    t_offset: u64,
) -> Result<Vec<TrialRecord>> {
    let mut run = AdaptiveRun::new(config, block);
    while let Some(condition) = run.next_condition(agent_rng) {
        let t = t_offset + run.records().len() as u64;
        let reward = endpoint.feedback(condition, t)?;
        run.submit(reward, (t + 1) * SIMULATED_TRIAL_MS)?;
    }
    Ok(run.into_records())
}

/// Seeded permutation of `per_condition` presentations of every condition.
pub fn training_order<R: Rng + ?Sized>(per_condition: usize, rng: &mut R) -> Vec<ActionId> {
    let mut order: Vec<ActionId> = ActionId::ALL
        .iter()
        .flat_map(|&a| std::iter::repeat_n(a, per_condition))
        .collect();
    order.shuffle(rng);
    order
}

/// Record for a rated, non-adaptive trial. The agent does not learn from the
/// training block, so the snapshot is the untouched initial state.
pub fn training_record(config: &AgentConfig, t: u64, condition: ActionId, rating: f64, wall_time_ms: u64) -> TrialRecord {
    let fresh = AgentState::new(config);
    TrialRecord {
        t,
        block: Block::Training,
        condition,
        reward: rating,
        q_snapshot: fresh.q,
        alpha_t: fresh.alpha_t,
        epsilon_t: fresh.epsilon_t,
        converged: None,
        wall_time_ms,
    }
}

/// Everything the simulated training block produced.
#[derive(Debug, Clone)]
pub struct TrainingBlock {
    pub order: Vec<ActionId>,
    pub records: Vec<TrialRecord>,
    pub epochs: Vec<Epoch>,
    pub placement_errors: Vec<f64>,
    pub prepared: PreparedDataset,
    pub means: [f64; NUM_ACTIONS],
    pub truth: ActionId,
}

pub fn run_training_block<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    config: &ExperimentConfig,
    order_rng: &mut R1,
    participant_rng: &mut R2,
) -> Result<TrainingBlock> {
    let participant = SimulatedParticipant {
        profile: config.profile.clone(),
        erp: config.erp.clone(),
    };
    let order = training_order(config.trials_per_condition, order_rng);
    let mut records = Vec::with_capacity(order.len());
    let mut epochs = Vec::with_capacity(order.len());
    let mut placement_errors = Vec::with_capacity(order.len());
    for (i, &condition) in order.iter().enumerate() {
        let t = i as u64;
        let sample = participant.training_trial(condition, t, participant_rng)?;
        records.push(training_record(
            &config.agent,
            t + 1,
            condition,
            sample.rating.reward.value(),
            (t + 1) * SIMULATED_TRIAL_MS,
        ));
        epochs.push(sample.epoch);
        placement_errors.push(sample.placement_error);
    }
    let prepared = prepare_dataset(&epochs, Some(&placement_errors), None, CleaningConfig::from(&config.cleaning))?;
    let means = training_means(&records);
    let truth = truth_from_means(&means).ok_or_else(|| Error::InsufficientData("empty training block".into()))?;
    Ok(TrainingBlock {
        order,
        records,
        epochs,
        placement_errors,
        prepared,
        means,
        truth,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub seed: u64,
    pub explicit_first: bool,
    pub training: DatasetSummary,
    pub rejected_amplitude: usize,
    pub rejected_behavior: usize,
    pub bundle: BundleSummary,
    pub training_means: [f64; NUM_ACTIONS],
    pub truth: ActionId,
    pub training_log: Vec<TrialRecord>,
    pub explicit_log: Vec<TrialRecord>,
    pub implicit_log: Vec<TrialRecord>,
    pub explicit_outcome: Outcome,
    pub implicit_outcome: Outcome,
    pub steps_explicit: Option<usize>,
    pub steps_implicit: Option<usize>,
    pub max_trials: usize,
}

impl SessionResult {
    /// Full session log: training, then the adaptive blocks in the order run.
    pub fn log(&self) -> Vec<TrialRecord> {
        let (first, second) = if self.explicit_first {
            (&self.explicit_log, &self.implicit_log)
        } else {
            (&self.implicit_log, &self.explicit_log)
        };
        self.training_log.iter().chain(first).chain(second).cloned().collect()
    }

    pub fn outcome(&self) -> SessionOutcome {
        SessionOutcome {
            truth: self.truth,
            explicit_outcome: self.explicit_outcome,
            implicit_outcome: self.implicit_outcome,
            steps_explicit: self.steps_explicit,
            steps_implicit: self.steps_implicit,
            max_trials: self.max_trials,
        }
    }
}

/// A simulated session plus the fitted decoder and raw training data.
#[derive(Debug, Clone)]
pub struct SimulatedSession {
    pub result: SessionResult,
    pub training: TrainingBlock,
    pub bundle: DecoderBundle,
}

fn block_outcome(log: &[TrialRecord], truth: ActionId) -> (Outcome, Option<usize>) {
    let converged = log.last().and_then(|r| r.converged);
    (Outcome::classify(converged, truth), converged.map(|_| log.len()))
}

/// Training block, decoder fit, both adaptive blocks, outcome classification.
/// `run_index` selects the counterbalanced order in batch mode.
pub fn simulate_session(config: &ExperimentConfig, run_index: Option<usize>) -> Result<SimulatedSession> {
    config.validate()?;
    let seed = config.seed;
    let training = run_training_block(
        config,
        &mut stream_rng(seed, stream::TRAINING_ORDER),
        &mut stream_rng(seed, stream::PARTICIPANT),
    )?;
    let pre = Preprocessor::new();
    let bundle = grid_search_fit_with(&training.prepared.dataset, &config.decoder, &mut stream_rng(seed, stream::SPLIT))?;

    let explicit_first = config.explicit_first(run_index);
    let n_train = training.records.len() as u64;
    let mut explicit_log = Vec::new();
    let mut implicit_log = Vec::new();
    let mut offset = n_train;
    for block in if explicit_first {
        [Block::Explicit, Block::Implicit]
    } else {
        [Block::Implicit, Block::Explicit]
    } {
        match block {
            Block::Explicit => {
                let mut oracle = ExplicitOracle {
                    profile: &config.profile,
                    rng: stream_rng(seed, stream::EXPLICIT_ORACLE),
                };
                let mut rng = stream_rng(seed, stream::EXPLICIT_AGENT);
                explicit_log = run_adaptive_block(&config.agent, block, &mut oracle, &mut rng, offset)?;
                offset += explicit_log.len() as u64;
            }
            Block::Implicit => {
                let mut oracle = ImplicitOracle {
                    bundle: &bundle,
                    erp: &config.erp,
                    profile: &config.profile,
                    pre: pre.clone(),
                    rng: stream_rng(seed, stream::IMPLICIT_ORACLE),
                };
                let mut rng = stream_rng(seed, stream::IMPLICIT_AGENT);
                implicit_log = run_adaptive_block(&config.agent, block, &mut oracle, &mut rng, offset)?;
                offset += implicit_log.len() as u64;
            }
            Block::Training => unreachable!(),
        }
    }

    let (explicit_outcome, steps_explicit) = block_outcome(&explicit_log, training.truth);
    let (implicit_outcome, steps_implicit) = block_outcome(&implicit_log, training.truth);
    let result = SessionResult {
        seed,
        explicit_first,
        training: training.prepared.dataset.summary(),
        rejected_amplitude: training.prepared.rejected_amplitude.len(),
        rejected_behavior: training.prepared.rejected_behavior.len(),
        bundle: bundle.summary(),
        training_means: training.means,
        truth: training.truth,
        training_log: training.records.clone(),
        explicit_log,
        implicit_log,
        explicit_outcome,
        implicit_outcome,
        steps_explicit,
        steps_implicit,
        max_trials: config.max_trials(),
    };
    Ok(SimulatedSession {
        result,
        training,
        bundle,
    })
}

pub fn run_session(config: &ExperimentConfig, run_index: Option<usize>) -> Result<SessionResult> {
    simulate_session(config, run_index).map(|s| s.result)
}

pub fn run_full_session(config: &ExperimentConfig) -> Result<SessionResult> {
    run_session(config, None)
}
