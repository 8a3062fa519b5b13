//! The `train`, `eval` and `replay` commands as library functions.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::eval::{evaluate_starts, EvaluationReport, StartSpec};
use super::plot::{time_series_svg, trajectory_svg, PlotMeta};
use super::{create_file, load_run_config, write_string, Checkpoint, CliOverrides, HarnessError, Profile, RunConfig, RunLock};
use crate::agent::Agent;
use crate::env::{read_trajectory, write_trajectory, BerthingEnv, TrajectoryRow};
use crate::par::Execution;
use crate::ppo::{EpisodeSummary, RewardRow, TrainEvent, TrainStats, Trainer, REWARD_COLUMNS, STATS_COLUMNS};

pub const DIAGNOSTIC_COLUMNS: [&str; 9] = [
    "update_idx",
    "initial_ratio_max_dev",
    "initial_clip_frac",
    "replay_mismatches",
    "grad_norm",
    "rejected_arrays",
    "excluded_samples",
    "samples",
    "learning_rate",
];

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub config: PathBuf,
    pub seed: u64,
    pub out: PathBuf,
    pub profile: Option<Profile>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub updates: u64,
    pub episodes: u64,
    pub global_steps: u64,
    /// Update index of the checkpoint saved as `best.json`.
    pub best_update: u64,
    pub best_validation_successes: usize,
    pub best_validation_mean_final_d: f64,
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub checkpoint: PathBuf,
    pub starts: String,
    pub out: PathBuf,
    pub early_stop: bool,
}

/// Paths of the files a training run writes into its directory.
pub mod files {
    pub const CONFIG: &str = "config.json";
    pub const REWARDS: &str = "rewards.csv";
    pub const STATS: &str = "train_stats.csv";
    pub const DIAGNOSTICS: &str = "diagnostics.csv";
    pub const EPISODES: &str = "episodes.csv";
    pub const VALIDATION: &str = "validation.csv";
    pub const CHECKPOINTS: &str = "checkpoints";
    pub const FINAL: &str = "checkpoints/final.json";
    pub const BEST: &str = "checkpoints/best.json";
    pub const SUMMARY: &str = "summary.json";
}

fn csv_writer(path: &Path, header: &[&str]) -> Result<csv::Writer<File>, HarnessError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(create_file(path)?);
    w.write_record(header)?;
    Ok(w)
}

fn plot_meta(env: &BerthingEnv) -> PlotMeta {
    let lim = env.model().limits();
    PlotMeta {
        length: env.length(),
        goal: env.goal().clone(),
        delta_max: lim.delta_max,
        n_min: lim.n_min,
        n_max: lim.n_max,
    }
}

/// Resolve the config file and train. See [`train_run`].
pub fn cli_train(opts: &TrainOptions) -> Result<TrainSummary, HarnessError> {
    let cli = CliOverrides {
        profile: opts.profile,
        seed: Some(opts.seed),
        workers: opts.workers,
    };
    let config = load_run_config(&opts.config, &cli)?;
    train_run(&config, &opts.out)
}

struct Best {
    update: u64,
    successes: usize,
    mean_final_d: f64,
}

impl Best {
    fn improves(&self, report: &EvaluationReport) -> bool {
        let s = report.successes();
        s > self.successes || (s == self.successes && report.mean_final_d < self.mean_final_d)
    }
}

/// Train from a resolved config, writing every artifact into `out`.
pub fn train_run(config: &RunConfig, out: &Path) -> Result<TrainSummary, HarnessError> {
    let _lock = RunLock::acquire(out)?;
    let pretty = serde_json::to_string_pretty(config).map_err(|e| HarnessError::Config(e.to_string()))?;
    write_string(&out.join(files::CONFIG), &(pretty + "\n"))?;

    let exec = Execution::default();
    let mut trainer = Trainer::new(
        config.agent.clone(),
        &config.ship,
        config.env.clone(),
        config.ppo.clone(),
        config.seed,
        config.workers,
        exec,
    )?;
    let validation = StartSpec::Random {
        count: config.run.validation_starts,
        seed: config.run.validation_seed,
    }
    .starts(&config.env);
    let mut eval_env = trainer.env().clone();
    eval_env.set_early_stop(false);

    let mut rewards = csv_writer(&out.join(files::REWARDS), &REWARD_COLUMNS)?;
    let mut stats_w = csv_writer(&out.join(files::STATS), &STATS_COLUMNS)?;
    let mut diag_w = csv_writer(&out.join(files::DIAGNOSTICS), &DIAGNOSTIC_COLUMNS)?;
    let mut episodes_w = csv::Writer::from_writer(create_file(&out.join(files::EPISODES))?);
    let mut validation_w = csv_writer(
        &out.join(files::VALIDATION),
        &["update_idx", "successes", "starts", "mean_final_d"],
    )?;
    std::fs::create_dir_all(out.join(files::CHECKPOINTS)).map_err(|e| HarnessError::io(out, e))?;

    let mut best = Best {
        update: 0,
        successes: 0,
        mean_final_d: f64::INFINITY,
    };
    let save = |trainer: &Trainer, path: &Path| Checkpoint::new(config.clone(), trainer.state()).save(path);
    let validate = |trainer: &Trainer,
                    best: &mut Best,
                    w: &mut csv::Writer<File>|
     -> Result<(), HarnessError> {
        if validation.is_empty() {
            return Ok(());
        }
        let (report, _) = evaluate_starts(trainer.agent(), &eval_env, &validation, exec)?;
        w.write_record([
            trainer.update_idx().to_string(),
            report.successes().to_string(),
            validation.len().to_string(),
            report.mean_final_d.to_string(),
        ])?;
        if best.improves(&report) {
            *best = Best {
                update: trainer.update_idx(),
                successes: report.successes(),
                mean_final_d: report.mean_final_d,
            };
            save(trainer, &out.join(files::BEST))?;
        }
        Ok(())
    };

    let run = &config.run;
    trainer.run(|event| {
        let r: Result<(), HarnessError> = (|| {
            match event {
                TrainEvent::Rewards(rows) => {
                    for row in rows {
                        write_reward(&mut rewards, row)?;
                    }
                }
                TrainEvent::EpisodeEnd(s) => {
                    write_episode(&mut episodes_w, s)?;
                    log::debug!(
                        "episode {} return {:.3} min d {:.2} final d {:.2} {:?}",
                        s.episode,
                        s.episode_return,
                        s.min_d,
                        s.final_d,
                        s.termination
                    );
                }
                TrainEvent::Update { stats, trainer } => {
                    write_stats(&mut stats_w, &mut diag_w, stats)?;
                    let idx = stats.update_idx;
                    if idx % run.checkpoint_every == 0 {
                        save(trainer, &out.join(files::CHECKPOINTS).join(format!("ckpt_{idx:06}.json")))?;
                        rewards.flush().map_err(|e| HarnessError::io(out, e))?;
                    }
                    if run.eval_every > 0 && idx % run.eval_every == 0 {
                        validate(trainer, &mut best, &mut validation_w)?;
                    }
                    if idx % 50 == 0 {
                        log::info!(
                            "update {idx}: episodes {} steps {} policy {:.4} value {:.4} entropy {:.3} kl {:.4}",
                            trainer.episodes_done(),
                            trainer.global_step(),
                            stats.policy_loss,
                            stats.value_loss,
                            stats.entropy,
                            stats.kl
                        );
                    }
                }
            }
            Ok(())
        })();
        r.map_err(|e| e.to_string())
    })?;

    save(&trainer, &out.join(files::FINAL))?;
    validate(&trainer, &mut best, &mut validation_w)?;
    if !out.join(files::BEST).exists() {
        save(&trainer, &out.join(files::BEST))?;
        best.update = trainer.update_idx();
    }
    for w in [&mut rewards, &mut stats_w, &mut diag_w, &mut validation_w, &mut episodes_w] {
        w.flush().map_err(|e| HarnessError::io(out, e))?;
    }
    let summary = TrainSummary {
        updates: trainer.update_idx(),
        episodes: trainer.episodes_done(),
        global_steps: trainer.global_step(),
        best_update: best.update,
        best_validation_successes: best.successes,
        best_validation_mean_final_d: best.mean_final_d,
    };
    let text = serde_json::to_string_pretty(&summary).map_err(|e| HarnessError::Config(e.to_string()))?;
    write_string(&out.join(files::SUMMARY), &(text + "\n"))?;
    Ok(summary)
}

fn write_reward(w: &mut csv::Writer<File>, row: &RewardRow) -> Result<(), HarnessError> {
    w.write_record([
        row.global_step.to_string(),
        row.episode.to_string(),
        row.step_reward.to_string(),
        row.episode_return.to_string(),
        row.smoothed.to_string(),
    ])?;
    Ok(())
}

fn write_episode(w: &mut csv::Writer<File>, s: &EpisodeSummary) -> Result<(), HarnessError> {
    #[derive(Serialize)]
    struct Row<'a> {
        episode: u64,
        worker: usize,
        steps: usize,
        episode_return: f64,
        final_d: f64,
        min_d: f64,
        termination: &'a str,
    }
    let termination = format!("{:?}", s.termination);
    w.serialize(Row {
        episode: s.episode,
        worker: s.worker,
        steps: s.steps,
        episode_return: s.episode_return,
        final_d: s.final_d,
        min_d: s.min_d,
        termination: &termination,
    })?;
    Ok(())
}

fn write_stats(stats_w: &mut csv::Writer<File>, diag_w: &mut csv::Writer<File>, s: &TrainStats) -> Result<(), HarnessError> {
    stats_w.write_record([
        s.update_idx.to_string(),
        s.policy_loss.to_string(),
        s.value_loss.to_string(),
        s.entropy.to_string(),
        s.kl.to_string(),
        s.clip_frac.to_string(),
    ])?;
    diag_w.write_record([
        s.update_idx.to_string(),
        s.initial_ratio_max_dev.to_string(),
        s.initial_clip_frac.to_string(),
        s.replay_mismatches.to_string(),
        s.grad_norm.to_string(),
        s.rejected_arrays.to_string(),
        s.excluded_samples.to_string(),
        s.samples.to_string(),
        s.learning_rate.to_string(),
    ])?;
    Ok(())
}

/// Write a trajectory CSV, its plot sidecar and both plots. Returns the CSV path.
pub fn write_trajectory_artifacts(
    dir: &Path,
    stem: &str,
    rows: &[TrajectoryRow],
    meta: &PlotMeta,
) -> Result<PathBuf, HarnessError> {
    let csv_path = dir.join(format!("{stem}.csv"));
    write_trajectory(create_file(&csv_path)?, rows)?;
    let meta_json = serde_json::to_string_pretty(meta).map_err(|e| HarnessError::Config(e.to_string()))?;
    write_string(&dir.join(format!("{stem}.meta.json")), &(meta_json + "\n"))?;
    render_plots(dir, stem, rows, meta)?;
    Ok(csv_path)
}

fn render_plots(dir: &Path, stem: &str, rows: &[TrajectoryRow], meta: &PlotMeta) -> Result<Vec<PathBuf>, HarnessError> {
    let traj = dir.join(format!("{stem}.svg"));
    let series = dir.join(format!("{stem}_series.svg"));
    write_string(&traj, &trajectory_svg(rows, meta))?;
    write_string(&series, &time_series_svg(rows, meta))?;
    Ok(vec![traj, series])
}

/// Evaluate a checkpoint from a list of starts with the mean action.
pub fn cli_eval(opts: &EvalOptions) -> Result<EvaluationReport, HarnessError> {
    let ckpt = Checkpoint::load(&opts.checkpoint)?;
    let agent = ckpt.agent()?;
    let mut env = ckpt.env()?;
    env.set_early_stop(opts.early_stop);
    let starts = StartSpec::parse(&opts.starts)?.starts(env.config());
    eval_to_dir(&agent, &env, &starts, &opts.out)
}

/// Evaluate and write the report, trajectories and plots into `out`.
pub fn eval_to_dir(
    agent: &Agent,
    env: &BerthingEnv,
    starts: &[super::Start],
    out: &Path,
) -> Result<EvaluationReport, HarnessError> {
    let (report, trajectories) = evaluate_starts(agent, env, starts, Execution::default())?;
    let mut w = csv::Writer::from_writer(create_file(&out.join("report.csv"))?);
    for row in &report.rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| HarnessError::io(out, e))?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| HarnessError::Config(e.to_string()))?;
    write_string(&out.join("report.json"), &(json + "\n"))?;
    let meta = plot_meta(env);
    for (i, rows) in trajectories.iter().enumerate() {
        write_trajectory_artifacts(out, &format!("traj_{i:03}"), rows, &meta)?;
    }
    Ok(report)
}

/// Re-render the plots of a logged trajectory. Scale and goal come from the
/// `.meta.json` sidecar next to the CSV, or from the reference ship when absent.
pub fn cli_replay(traj: &Path, out: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let file = File::open(traj).map_err(|e| HarnessError::io(traj, e))?;
    let rows = read_trajectory(file)?;
    let stem = traj
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("trajectory")
        .to_string();
    let sidecar = traj.with_extension("meta.json");
    let meta = if sidecar.exists() {
        let text = std::fs::read_to_string(&sidecar).map_err(|e| HarnessError::io(&sidecar, e))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", sidecar.display())))?
    } else {
        log::warn!("{} not found; using the reference ship scale and default goal", sidecar.display());
        let config = RunConfig::reference(Profile::Paper, 0);
        plot_meta(&BerthingEnv::new(&config.ship, config.env)?)
    };
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    render_plots(out, &stem, &rows, &meta)
}
