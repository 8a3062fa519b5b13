//! Deterministic evaluation from lists of start poses.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::agent::Agent;
use crate::env::{bearing_to_goal, sample_initial_state, BerthingEnv, EnvConfig, TrajectoryRow};
use crate::par::Execution;

pub const REPORT_COLUMNS: [&str; 11] = [
    "index",
    "eta0",
    "xi0",
    "psi0_deg",
    "final_d",
    "min_d",
    "success",
    "steps",
    "mean_abs_delta",
    "label",
    "termination",
];

/// Initial pose in ship lengths and degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Start {
    pub eta0: f64,
    pub xi0: f64,
    pub psi0_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Interpolated,
    Extrapolated,
}

impl Label {
    /// Interpolated iff the position lies in the training start box.
    pub fn of(env: &EnvConfig, eta: f64, xi: f64) -> Self {
        if env.init.contains(eta, xi) {
            Label::Interpolated
        } else {
            Label::Extrapolated
        }
    }
}

/// Where evaluation starts come from.
#[derive(Debug, Clone, PartialEq)]
pub enum StartSpec {
    /// `grid:RxC`: a rows × cols lattice spanning the start box, bow on the goal.
    Grid { rows: usize, cols: usize },
    /// `random:COUNT:SEED`: draws from the training start distribution.
    Random { count: usize, seed: u64 },
    /// `extrap:COUNT:SEED`: positions outside the start box, bow near the goal.
    Extrap { count: usize, seed: u64 },
    /// A CSV file with columns `eta0,xi0,psi0_deg`, or an explicit list.
    List(Vec<Start>),
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, HarnessError> {
    s.parse()
        .map_err(|_| HarnessError::Starts(format!("`{s}` is not a valid {what}")))
}

impl StartSpec {
    /// Parse a generator spec; anything else is read as a CSV path.
    pub fn parse(spec: &str) -> Result<Self, HarnessError> {
        let parts: Vec<&str> = spec.split(':').collect();
        match parts.as_slice() {
            ["grid", dims] => {
                let (r, c) = dims
                    .split_once('x')
                    .ok_or_else(|| HarnessError::Starts(format!("grid needs RxC, got `{dims}`")))?;
                let (rows, cols) = (parse_num(r, "row count")?, parse_num(c, "column count")?);
                if rows == 0 || cols == 0 {
                    return Err(HarnessError::Starts("grid dimensions must be >= 1".into()));
                }
                Ok(StartSpec::Grid { rows, cols })
            }
            ["random", n, seed] => Ok(StartSpec::Random {
                count: parse_num(n, "count")?,
                seed: parse_num(seed, "seed")?,
            }),
            ["extrap", n, seed] => Ok(StartSpec::Extrap {
                count: parse_num(n, "count")?,
                seed: parse_num(seed, "seed")?,
            }),
            [kind, ..] if ["grid", "random", "extrap"].contains(kind) => Err(HarnessError::Starts(format!(
                "malformed `{spec}` (expected grid:RxC, random:COUNT:SEED or extrap:COUNT:SEED)"
            ))),
            _ => Self::read_csv(Path::new(spec)).map(StartSpec::List),
        }
    }

    fn read_csv(path: &Path) -> Result<Vec<Start>, HarnessError> {
        let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
        let mut reader = csv::Reader::from_reader(file);
        let headers = reader.headers()?.clone();
        let expected = ["eta0", "xi0", "psi0_deg"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(HarnessError::Starts(format!(
                "{}: header must be `eta0,xi0,psi0_deg`, found `{}`",
                path.display(),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        Ok(reader.deserialize().collect::<Result<Vec<Start>, _>>()?)
    }

    pub fn starts(&self, env: &EnvConfig) -> Vec<Start> {
        let goal = &env.goal;
        let toward = |eta: f64, xi: f64| bearing_to_goal(eta, xi, goal).to_degrees();
        match self {
            StartSpec::Grid { rows, cols } => {
                let at = |lo: f64, hi: f64, k: usize, n: usize| {
                    if n == 1 {
                        0.5 * (lo + hi)
                    } else {
                        lo + (hi - lo) * k as f64 / (n - 1) as f64
                    }
                };
                let mut out = Vec::with_capacity(rows * cols);
                for i in 0..*rows {
                    for j in 0..*cols {
                        let eta = at(env.init.eta[0], env.init.eta[1], j, *cols);
                        let xi = at(env.init.xi[0], env.init.xi[1], i, *rows);
                        out.push(Start {
                            eta0: eta,
                            xi0: xi,
                            psi0_deg: toward(eta, xi),
                        });
                    }
                }
                out
            }
            StartSpec::Random { count, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..*count)
                    .map(|_| {
                        let s = sample_initial_state(&mut rng, &env.init, goal, 1.0, 0.0);
                        Start {
                            eta0: s.x,
                            xi0: s.y,
                            psi0_deg: s.psi.to_degrees(),
                        }
                    })
                    .collect()
            }
            StartSpec::Extrap { count, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let (e, x) = (env.init.eta, env.init.xi);
                let half = env.init.heading_perturbation_deg;
                let mut out = Vec::with_capacity(*count);
                while out.len() < *count {
                    let eta = rng.random_range(e[0] - 4.0..e[1] + 4.0);
                    let xi = rng.random_range((x[0] - 1.0).max(goal.g_y)..x[1] + 4.0);
                    if env.init.contains(eta, xi) || crate::env::distance_to_goal(eta, xi, goal) < 3.0 {
                        continue;
                    }
                    let pert = rng.random_range(-half..=half);
                    out.push(Start {
                        eta0: eta,
                        xi0: xi,
                        psi0_deg: toward(eta, xi) + pert,
                    });
                }
                out
            }
            StartSpec::List(list) => list.clone(),
        }
    }
}

/// One row of the evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub index: usize,
    pub eta0: f64,
    pub xi0: f64,
    pub psi0_deg: f64,
    pub final_d: f64,
    pub min_d: f64,
    pub success: bool,
    pub steps: usize,
    pub mean_abs_delta: f64,
    pub label: Label,
    pub termination: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub tolerance: f64,
    pub early_stop: bool,
    pub interpolated: usize,
    pub interpolated_success: usize,
    pub extrapolated: usize,
    pub extrapolated_success: usize,
    pub mean_final_d: f64,
    pub rows: Vec<EvalRow>,
}

impl EvaluationReport {
    fn from_rows(rows: Vec<EvalRow>, tolerance: f64, early_stop: bool) -> Self {
        let count = |label: Label, ok: bool| {
            rows.iter()
                .filter(|r| r.label == label && (!ok || r.success))
                .count()
        };
        let mean_final_d = rows.iter().map(|r| r.final_d).sum::<f64>() / rows.len().max(1) as f64;
        Self {
            tolerance,
            early_stop,
            interpolated: count(Label::Interpolated, false),
            interpolated_success: count(Label::Interpolated, true),
            extrapolated: count(Label::Extrapolated, false),
            extrapolated_success: count(Label::Extrapolated, true),
            mean_final_d,
            rows,
        }
    }

    pub fn successes(&self) -> usize {
        self.interpolated_success + self.extrapolated_success
    }
}

/// Roll one episode with the mean action. Returns the logged trajectory
/// (including the start row) and the report row.
pub fn rollout_deterministic(
    agent: &Agent,
    env: &mut BerthingEnv,
    start: &Start,
    index: usize,
) -> Result<(Vec<TrajectoryRow>, EvalRow), HarnessError> {
    let pose = env.start_pose(start.eta0, start.xi0, start.psi0_deg.to_radians());
    let obs = env.reset_to(pose);
    let mut history = agent.new_history();
    history.push(&agent.encode(&obs));
    let mut rec = agent.initial_state();
    let mut rows = vec![env.trajectory_row()];
    let mut min_d = obs.d;
    let mut final_d = obs.d;
    let mut abs_delta = 0.0;
    let mut termination = String::from("Running");
    while !env.is_done() {
        let (out, next) = agent.forward(&agent.network_input(&history), &rec)?;
        let step = env.step(agent.deterministic_action(&out))?;
        rec = next;
        history.push(&agent.encode(&step.observation));
        rows.push(env.trajectory_row());
        min_d = min_d.min(step.info.d);
        final_d = step.info.d;
        abs_delta += step.info.delta_actual.abs();
        termination = format!("{:?}", step.info.termination);
    }
    let steps = env.steps();
    Ok((
        rows,
        EvalRow {
            index,
            eta0: start.eta0,
            xi0: start.xi0,
            psi0_deg: start.psi0_deg,
            final_d,
            min_d,
            success: final_d <= env.goal().tolerance,
            steps,
            mean_abs_delta: abs_delta / steps.max(1) as f64,
            label: Label::of(env.config(), start.eta0, start.xi0),
            termination,
        },
    ))
}

/// Evaluate every start; trajectories come back in start order.
pub fn evaluate_starts(
    agent: &Agent,
    env: &BerthingEnv,
    starts: &[Start],
    exec: Execution,
) -> Result<(EvaluationReport, Vec<Vec<TrajectoryRow>>), HarnessError> {
    let indexed: Vec<(usize, Start)> = starts.iter().copied().enumerate().collect();
    let results = exec.map(&indexed, |(i, s)| {
        let mut env = env.clone();
        rollout_deterministic(agent, &mut env, s, *i)
    });
    let mut rows = Vec::with_capacity(starts.len());
    let mut trajectories = Vec::with_capacity(starts.len());
    for r in results {
        let (traj, row) = r?;
        rows.push(row);
        trajectories.push(traj);
    }
    Ok((
        EvaluationReport::from_rows(rows, env.goal().tolerance, env.config().early_stop),
        trajectories,
    ))
}
