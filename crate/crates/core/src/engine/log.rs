//! Session logs: append-only JSON Lines of [`TrialRecord`].
//!
//! A log holds the training block followed by the two adaptive blocks in the
//! order they ran. Replaying an adaptive block's conditions and rewards
//! through a fresh agent must reproduce every `q_snapshot` bit for bit.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::{ActionId, AgentConfig, AgentState, NUM_ACTIONS, Reward, RewardSource};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Training,
    Explicit,
    Implicit,
}

impl Block {
    pub fn reward_source(self) -> RewardSource {
        match self {
            Block::Implicit => RewardSource::Implicit,
            _ => RewardSource::Explicit,
        }
    }
}

/// One trial. `t` counts from 1 within its block; `q_snapshot` is taken after
/// the update; `alpha_t` / `epsilon_t` are the rates in effect for the trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialRecord {
    pub t: u64,
    pub block: Block,
    pub condition: ActionId,
    pub reward: f64,
    pub q_snapshot: [f64; NUM_ACTIONS],
    pub alpha_t: f64,
    pub epsilon_t: f64,
    pub converged: Option<ActionId>,
    pub wall_time_ms: u64,
}

pub fn write_log(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_log(path: &Path) -> Result<Vec<TrialRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Append-only log that flushes after every record.
#[derive(Debug)]
pub struct LogWriter {
    path: PathBuf,
    file: File,
}

impl LogWriter {
    pub fn append(path: &Path) -> Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn push(&mut self, record: &TrialRecord) -> Result<()> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.flush()?;
        Ok(())
    }
}

pub fn block_records(records: &[TrialRecord], block: Block) -> Vec<TrialRecord> {
    records.iter().filter(|r| r.block == block).cloned().collect()
}

/// Replays one adaptive block's rewards through a fresh agent and checks
/// every snapshot, rate and convergence flag bit for bit. Returns the final
/// agent state.
pub fn replay_block(records: &[TrialRecord], config: &AgentConfig) -> Result<AgentState> {
    let mut state = AgentState::new(config);
    for (i, r) in records.iter().enumerate() {
        check_record_against(&state, r, i as u64 + 1, None)?;
        let reward = Reward::new(r.reward, r.block.reward_source())?;
        state.update_q(r.condition, reward, config)?;
        check_after_update(&state, r, config)?;
    }
    Ok(state)
}

/// Like [`replay_block`] but also re-draws every decision from `rng` and
/// checks it against the logged condition.
pub fn replay_block_with_decisions<R: Rng + ?Sized>(
    records: &[TrialRecord],
    config: &AgentConfig,
    rng: &mut R,
) -> Result<AgentState> {
    let mut state = AgentState::new(config);
    for (i, r) in records.iter().enumerate() {
        let pick = state.select_action(config, rng);
        check_record_against(&state, r, i as u64 + 1, Some(pick))?;
        let reward = Reward::new(r.reward, r.block.reward_source())?;
        state.update_q(r.condition, reward, config)?;
        check_after_update(&state, r, config)?;
    }
    Ok(state)
}

fn check_record_against(state: &AgentState, r: &TrialRecord, expect_t: u64, pick: Option<ActionId>) -> Result<()> {
    let fail = |msg: String| Err(Error::ReplayMismatch { t: r.t, msg });
    if r.block == Block::Training {
        return fail("training records are not agent decisions".into());
    }
    if r.t != expect_t {
        return fail(format!("expected t = {expect_t}"));
    }
    if r.alpha_t.to_bits() != state.alpha_t.to_bits() || r.epsilon_t.to_bits() != state.epsilon_t.to_bits() {
        return fail(format!(
            "rates differ: logged ({}, {}) vs replay ({}, {})",
            r.alpha_t, r.epsilon_t, state.alpha_t, state.epsilon_t
        ));
    }
    if let Some(p) = pick.filter(|p| *p != r.condition) {
        return fail(format!("decision differs: logged {} vs replay {}", r.condition, p));
    }
    Ok(())
}

fn check_after_update(state: &AgentState, r: &TrialRecord, config: &AgentConfig) -> Result<()> {
    let same = state.q.iter().zip(&r.q_snapshot).all(|(a, b)| a.to_bits() == b.to_bits());
    if !same {
        return Err(Error::ReplayMismatch {
            t: r.t,
            msg: format!("q differs: logged {:?} vs replay {:?}", r.q_snapshot, state.q),
        });
    }
    if state.check_convergence(config) != r.converged {
        return Err(Error::ReplayMismatch {
            t: r.t,
            msg: "convergence flag differs".into(),
        });
    }
    Ok(())
}
