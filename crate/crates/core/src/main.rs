use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use neurohaptic::analysis::{self, NonConverged, SessionOutcome};
use neurohaptic::decoder::{DatasetRecord, MetricsReport, dataset::load_prepared, grid_search_fit_with, write_dataset};
use neurohaptic::engine::config::ExperimentConfig;
use neurohaptic::engine::live::LiveServer;
use neurohaptic::engine::log::{Block, block_records, read_log, replay_block, replay_block_with_decisions, write_log};
use neurohaptic::engine::monte_carlo::{MonteCarloSummary, monte_carlo, seed_list, summarize};
use neurohaptic::engine::session::{SessionResult, simulate_session, stream, stream_rng};
use neurohaptic::{Error, Result};

#[derive(Parser)]
#[command(name = "neurohaptic", version, about = "Closed-loop bandit and EEG decoder simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Config file, or `preset:<name>`.
    #[arg(long, default_value = "preset:paper-calibrated")]
    config: String,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if absent).
    #[arg(long)]
    out: PathBuf,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded simulated sessions; writes one log per run and report.json.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        runs: usize,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        parallelism: usize,
        /// Also write each run's training epochs as a decoder dataset.
        #[arg(long)]
        export_training: bool,
    },
    /// Fit a decoder bundle from a JSONL epoch dataset.
    TrainDecoder {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Serve a live explicit-feedback session to the web console.
    RunSession {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "127.0.0.1:8765")]
        listen: String,
    },
    /// Contingency, step-difference TOST and drift statistics over session logs.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Log files or directories of `*.jsonl` logs.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Count non-converged blocks as max_trials steps instead of dropping them.
        #[arg(long)]
        impute: bool,
    },
    /// Replay a session log through the agent and verify every snapshot.
    Replay {
        /// Config the log was produced with.
        #[arg(long, default_value = "preset:paper-calibrated")]
        config: String,
        /// Session seed; when given, decisions are re-drawn and checked too.
        #[arg(long)]
        seed: Option<u64>,
        log: PathBuf,
    },
}

#[derive(Serialize)]
struct ErrorJson<'a> {
    error: &'a str,
    message: String,
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn prepare_out(dir: &Path, files: &[PathBuf], force: bool) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    if !force && let Some(f) = files.iter().find(|f| f.exists()) {
        return Err(Error::Config(format!("{} exists; pass --force to overwrite", f.display())));
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Serialize)]
struct RunLine {
    run: usize,
    seed: u64,
    log: String,
    explicit_first: bool,
    truth: neurohaptic::ActionId,
    explicit_outcome: analysis::Outcome,
    implicit_outcome: analysis::Outcome,
    steps_explicit: Option<usize>,
    steps_implicit: Option<usize>,
    rejected: usize,
    n_features: usize,
    cv_f1: f64,
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    config: &'a ExperimentConfig,
    summary: &'a MonteCarloSummary,
    runs: Vec<RunLine>,
}

fn log_name(run: usize, seed: u64) -> String {
    format!("run-{run:04}-seed-{seed}.jsonl")
}

fn simulate(common: &Common, runs: usize, parallelism: usize, export: bool) -> Result<()> {
    let cfg = load_config(common)?;
    let seeds = seed_list(cfg.seed, runs);
    let mut targets: Vec<PathBuf> = seeds.iter().enumerate().map(|(i, &s)| common.out.join(log_name(i, s))).collect();
    targets.push(common.out.join("report.json"));
    if export {
        targets.extend(seeds.iter().map(|s| common.out.join(format!("training-seed-{s}.jsonl"))));
    }
    prepare_out(&common.out, &targets, common.force)?;

    let (results, summary): (Vec<SessionResult>, MonteCarloSummary) = if export {
        let mut results = Vec::new();
        for (i, &seed) in seeds.iter().enumerate() {
            let run_cfg = ExperimentConfig { seed, ..cfg.clone() };
            let s = simulate_session(&run_cfg, Some(i))?;
            let records: Vec<DatasetRecord> = s
                .training
                .epochs
                .iter()
                .zip(&s.training.placement_errors)
                .map(|(e, &b)| DatasetRecord::from_epoch(e, None, Some(b)))
                .collect();
            write_dataset(&common.out.join(format!("training-seed-{seed}.jsonl")), &records)?;
            results.push(s.result);
        }
        let summary = summarize(&seeds, &results);
        (results, summary)
    } else {
        monte_carlo(&cfg, &seeds, parallelism)?
    };

    let mut lines = Vec::new();
    for (i, r) in results.iter().enumerate() {
        let name = log_name(i, r.seed);
        write_log(&common.out.join(&name), &r.log())?;
        lines.push(RunLine {
            run: i,
            seed: r.seed,
            log: name,
            explicit_first: r.explicit_first,
            truth: r.truth,
            explicit_outcome: r.explicit_outcome,
            implicit_outcome: r.implicit_outcome,
            steps_explicit: r.steps_explicit,
            steps_implicit: r.steps_implicit,
            rejected: r.rejected_amplitude + r.rejected_behavior,
            n_features: r.bundle.n_features,
            cv_f1: r.bundle.cv_f1,
        });
    }
    write_json(
        &common.out.join("report.json"),
        &SimulateReport {
            config: &cfg,
            summary: &summary,
            runs: lines,
        },
    )?;
    println!(
        "{} run(s): explicit converged-correct {:.3}, implicit converged-correct {:.3}; report at {}",
        summary.runs,
        summary.explicit_correct_rate,
        summary.implicit_correct_rate,
        common.out.join("report.json").display()
    );
    Ok(())
}

#[derive(Serialize)]
struct DecoderMetrics<'a> {
    trials: usize,
    rejected_amplitude: Vec<u64>,
    rejected_behavior: Vec<u64>,
    n_features: usize,
    cv_accuracy: f64,
    cv_f1: f64,
    holdout: &'a MetricsReport,
}

fn train_decoder(common: &Common, dataset: &Path) -> Result<()> {
    let cfg = load_config(common)?;
    let bundle_path = common.out.join("decoder.json");
    let metrics_path = common.out.join("metrics.json");
    prepare_out(&common.out, &[bundle_path.clone(), metrics_path.clone()], common.force)?;
    let prepared = load_prepared(dataset, (&cfg.cleaning).into())?;
    let bundle = grid_search_fit_with(&prepared.dataset, &cfg.decoder, &mut stream_rng(cfg.seed, stream::SPLIT))?;
    bundle.save(&bundle_path)?;
    write_json(
        &metrics_path,
        &DecoderMetrics {
            trials: prepared.dataset.labels.len(),
            rejected_amplitude: prepared.rejected_amplitude,
            rejected_behavior: prepared.rejected_behavior,
            n_features: bundle.selected_features.len(),
            cv_accuracy: bundle.cv_accuracy,
            cv_f1: bundle.cv_f1,
            holdout: &bundle.holdout_metrics,
        },
    )?;
    println!(
        "accuracy {:.3}  f1 {:.3}  features {}  auc {:.3}",
        bundle.cv_accuracy,
        bundle.cv_f1,
        bundle.selected_features.len(),
        bundle.holdout_metrics.auc
    );
    Ok(())
}

fn run_live(common: &Common, listen: &str) -> Result<()> {
    let cfg = load_config(common)?;
    std::fs::create_dir_all(&common.out)?;
    let log = common.out.join("session.jsonl");
    let report = common.out.join("session.json");
    if common.force {
        for f in [&log, &report] {
            if f.exists() {
                std::fs::remove_file(f)?;
            }
        }
    } else if report.exists() {
        return Err(Error::Config(format!(
            "{} exists (session complete); pass --force to start over",
            report.display()
        )));
    } else if log.exists() {
        println!("resuming from {}", log.display());
    }
    let server = LiveServer::bind(listen, cfg, &log, Some(&report))?;
    println!("listening on ws://{}", server.local_addr()?);
    std::io::stdout().flush()?;
    let r = server.serve()?;
    println!(
        "session complete: {} trial(s), converged {}",
        r.trials,
        r.converged.map_or("none".to_string(), |a| a.name().to_string())
    );
    Ok(())
}

fn collect_logs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    f.extension().is_some_and(|e| e == "jsonl")
                        && !f.file_name().is_some_and(|n| n.to_string_lossy().starts_with("training-"))
                })
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(Error::InsufficientData("no session logs found".into()));
    }
    Ok(out)
}

fn analyze(common: &Common, inputs: &[PathBuf], impute: bool) -> Result<()> {
    let cfg = load_config(common)?;
    let targets = ["analysis.json", "runs.csv", "contingency.csv", "drift.csv"].map(|f| common.out.join(f));
    prepare_out(&common.out, &targets, common.force)?;
    let files = collect_logs(inputs)?;
    let logs = files.iter().map(|f| read_log(f)).collect::<Result<Vec<_>>>()?;
    let outcomes = logs
        .iter()
        .map(|l| SessionOutcome::from_log(l, cfg.max_trials()))
        .collect::<Result<Vec<_>>>()?;
    let drift: Vec<_> = logs.iter().map(|l| analysis::drift_correlations(l)).collect();
    let policy = if impute { NonConverged::ImputeMax } else { NonConverged::Exclude };
    let report = analysis::analyze(&outcomes, &drift, policy);
    write_json(&common.out.join("analysis.json"), &report)?;
    let names: Vec<String> = files.iter().map(|f| f.file_name().unwrap_or_default().to_string_lossy().into_owned()).collect();
    analysis::write_csv_tables(&common.out, &names, &outcomes, &report)?;
    let sd = &report.step_difference;
    println!(
        "{} session(s); step difference n={} mean={} sd={}",
        report.sessions,
        sd.n,
        sd.mean.map_or("-".into(), |v| format!("{v:.3}")),
        sd.sd.map_or("-".into(), |v| format!("{v:.3}")),
    );
    if let Some(t) = &sd.tost {
        println!(
            "TOST ±{}: t_lower={:.3} p={:.3}  t_upper={:.3} p={:.3}  equivalent={}",
            analysis::EQUIVALENCE_BOUND_STEPS,
            t.t_lower,
            t.p_lower,
            t.t_upper,
            t.p_upper,
            t.equivalent
        );
    }
    Ok(())
}

fn replay(config: &str, seed: Option<u64>, log: &Path) -> Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    let records = read_log(log)?;
    for (block, agent_stream) in [(Block::Explicit, stream::EXPLICIT_AGENT), (Block::Implicit, stream::IMPLICIT_AGENT)] {
        let recs = block_records(&records, block);
        if recs.is_empty() {
            continue;
        }
        let state = match seed {
            Some(s) => replay_block_with_decisions(&recs, &cfg.agent, &mut stream_rng(s, agent_stream))?,
            None => replay_block(&recs, &cfg.agent)?,
        };
        println!(
            "{block:?}: {} trial(s) reproduced bit-exactly{}; final q {:?}",
            recs.len(),
            if seed.is_some() { " (decisions checked)" } else { "" },
            state.q
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            common,
            runs,
            parallelism,
            export_training,
        } => simulate(&common, runs, parallelism, export_training),
        Command::TrainDecoder { common, dataset } => train_decoder(&common, &dataset),
        Command::RunSession { common, listen } => run_live(&common, &listen),
        Command::Analyze { common, inputs, impute } => analyze(&common, &inputs, impute),
        Command::Replay { config, seed, log } => replay(&config, seed, &log),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let json = serde_json::to_string(&ErrorJson {
                error: e.code(),
                message: e.to_string(),
            })
            .unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", e.code()));
            eprintln!("{json}");
            ExitCode::FAILURE
        }
    }
}
