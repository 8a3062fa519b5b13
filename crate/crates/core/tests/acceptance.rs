//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! `BERTH_ACCEPT=1,2,5` restricts the run to the listed criteria. Criteria
//! 6, 7, 8 and 10 share one set of desk-profile training runs.

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use berth_core::dynamics::{Action, ActuatorState, RigidState, ShipConfig, ShipModel};
use berth_core::env::{read_trajectory, reward, BerthingEnv};
use berth_core::harness::{eval_to_dir, files, train_run, Checkpoint, Label, Profile, RunConfig, StartSpec, TrainSummary};
use berth_core::ppo::compute_gae;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod tol {
    pub const REWARD_ABS: f64 = 1e-12;
    pub const REWARD_TIME: f64 = 10.0;
    pub const GRAD_DRAWS: u64 = 100;
    pub const GRAD_TIME: f64 = 300.0;
    pub const MIRROR_REL: f64 = 1e-9;
    pub const MIRROR_TIME: f64 = 5.0;
    pub const EQUILIBRIUM_ABS: f64 = 1e-6;
    pub const GAE_ABS: f64 = 1e-10;
    pub const RATIO_DEV: f64 = 1e-10;
    pub const LEARNING_FACTOR: f64 = 3.0;
    pub const LEARNING_SEEDS: [u64; 3] = [0, 1, 2];
    pub const MIN_EPISODES: u64 = 300;
    pub const SUCCESSES: usize = 7;
    pub const EVAL_STARTS: usize = 10;
    pub const EVAL_SEED: u64 = 2024;
    pub const DELTA_MAX: f64 = 35.0;
    pub const DELTA_RATE: f64 = 3.0 + 1e-9;
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------------------
// 1. reward

/// Algorithm 3, one statement per line.
fn reward_transcribed(d: f64, psi_prime: f64, delta: f64, u: f64, tol: f64) -> f64 {
    let mut r_t = 0.0;
    if d <= tol {
        r_t = r_t + 10.0;
        if -15.0 <= psi_prime && psi_prime <= 15.0 {
            r_t = r_t + 2.0;
        }
    }
    r_t = r_t - delta.abs() / 500.0;
    if u < 0.0 {
        r_t = r_t + u / 10.0;
    }
    r_t / 10.0
}

fn criterion_reward() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for i in 0..1_000_000 {
        let tol = rng.random_range(0.05..2.0);
        // Every eighth draw sits exactly on a branch boundary.
        let (d, psi, u) = match i % 8 {
            0 => (tol, if rng.random::<bool>() { 15.0 } else { -15.0 }, 0.0),
            _ => (
                rng.random_range(0.0..4.0),
                rng.random_range(-180.0..180.0),
                rng.random_range(-3.0..8.0),
            ),
        };
        let delta = rng.random_range(-35.0..35.0);
        let diff = (reward(d, psi, delta, u, tol) - reward_transcribed(d, psi, delta, u, tol)).abs();
        worst = worst.max(diff);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= tol::REWARD_ABS && secs < tol::REWARD_TIME,
        format!("max |diff| {worst:.1e} over 1e6 inputs (limit {:.0e}), {secs:.2} s (limit {} s)", tol::REWARD_ABS, tol::REWARD_TIME),
    )
}

// ---------------------------------------------------------------------------
// 2. gradients

fn criterion_gradients() -> Outcome {
    let start = Instant::now();
    let agent = RunConfig::reference(Profile::Desk, 0).agent;
    let (mut worst, mut worst_abs): (f64, f64) = (0.0, 0.0);
    let mut failures = 0;
    let mut checked = 0;
    for seed in 0..tol::GRAD_DRAWS {
        let c = common::gradient_check_draw(agent.clone(), 10_000 + seed);
        worst = worst.max(c.max_rel);
        worst_abs = worst_abs.max(c.max_abs);
        failures += c.failures;
        checked += c.checked;
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures == 0 && secs < tol::GRAD_TIME,
        format!(
            "{} draws, {checked} components, {failures} with rel err > {:.0e} and abs err > {:.0e}; max abs err {worst_abs:.1e}, max rel err {worst:.1e} among abs err > floor; {secs:.1} s (limit {} s)",
            tol::GRAD_DRAWS,
            common::REL_TOL,
            common::ABS_FLOOR,
            tol::GRAD_TIME
        ),
    )
}

// ---------------------------------------------------------------------------
// 3. mirror symmetry

fn criterion_mirror() -> Outcome {
    let start = Instant::now();
    let model = ShipModel::new(&ShipConfig::reference()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let runs = 10;
    for _ in 0..runs {
        let mut a = RigidState {
            x: rng.random_range(500.0..2000.0),
            y: rng.random_range(300.0..1500.0),
            psi: rng.random_range(-3.0..3.0),
            u: rng.random_range(1.0..6.0),
            ..Default::default()
        };
        let mut b = a.mirrored();
        let (mut aa, mut ab) = (ActuatorState { delta: 0.0, n: 1.0 }, ActuatorState { delta: 0.0, n: 1.0 });
        let mut hold = (0.0, 1.0);
        let mut scale = [0.0f64; 6];
        let mut err = [0.0f64; 6];
        for k in 0..500 {
            if k % 25 == 0 {
                hold = (rng.random_range(-35.0..35.0), rng.random_range(-1.0..1.0));
            }
            let (delta, n) = hold;
            (a, aa) = model.step(&a, &aa, Action { delta_cmd: delta, n_cmd: n }, 1.0).unwrap();
            (b, ab) = model.step(&b, &ab, Action { delta_cmd: -delta, n_cmd: n }, 1.0).unwrap();
            let m = b.mirrored();
            let pairs = [(a.x, m.x), (a.y, m.y), (a.psi, m.psi), (a.u, m.u), (a.v, m.v), (a.r, m.r)];
            for (i, (p, q)) in pairs.into_iter().enumerate() {
                scale[i] = scale[i].max(p.abs());
                err[i] = err[i].max((p - q).abs());
            }
        }
        for i in 0..6 {
            if scale[i] > 0.0 {
                worst = worst.max(err[i] / scale[i]);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= tol::MIRROR_REL && secs < tol::MIRROR_TIME,
        format!("{runs} pairs of 500-step runs, max rel deviation {worst:.1e} (limit {:.0e}), {secs:.2} s", tol::MIRROR_REL),
    )
}

// ---------------------------------------------------------------------------
// 4. self-propulsion

fn balance_speed(cfg: &ShipConfig, n: f64) -> f64 {
    let (g, c) = (&cfg.geometry, &cfg.coefficients);
    let d = g.prop_diameter;
    let surge = |u: f64| {
        let j = (1.0 - c.wake_fraction) * u / (n * d);
        let kt = c.kt_0 + c.kt_1 * j + c.kt_2 * j * j;
        (1.0 - c.thrust_deduction) * c.water_density * n * n * d.powi(4) * kt
            + 0.5 * c.water_density * g.length_pp * g.draft * c.x_uu * u * u
    };
    let (mut lo, mut hi) = (0.0, 20.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if surge(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn criterion_equilibrium() -> Outcome {
    let cfg = ShipConfig::reference();
    let model = ShipModel::new(&cfg).unwrap();
    let n = model.limits().n_max;
    let mut s = RigidState::default();
    let mut act = ActuatorState { delta: 0.0, n };
    let mut lateral_zero = true;
    for _ in 0..8000 {
        (s, act) = model.step(&s, &act, Action { delta_cmd: 0.0, n_cmd: n }, 1.0).unwrap();
        lateral_zero &= s.v == 0.0 && s.r == 0.0 && s.x == 0.0 && s.psi == 0.0;
    }
    let want = balance_speed(&cfg, n);
    let err = (s.u - want).abs();
    outcome(
        err <= tol::EQUILIBRIUM_ABS && lateral_zero,
        format!(
            "terminal u {:.9} m/s vs balance {want:.9} m/s, |err| {err:.1e} (limit {:.0e}); v, r exactly 0: {lateral_zero}",
            s.u,
            tol::EQUILIBRIUM_ABS
        ),
    )
}

// ---------------------------------------------------------------------------
// 5. GAE

/// Advantage as an explicit discounted sum of TD errors, cut at the first
/// episode end.
fn gae_brute(r: &[f64], v: &[f64], done: &[bool], boot: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = r.len();
    let value_after = |t: usize| if done[t] { 0.0 } else if t + 1 < n { v[t + 1] } else { boot };
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            for k in t..n {
                let td = r[k] + gamma * value_after(k) - v[k];
                sum += (gamma * lambda).powi((k - t) as i32) * td;
                if done[k] {
                    break;
                }
            }
            sum
        })
        .collect()
}

fn criterion_gae() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let trials = 20_000;
    for i in 0..trials {
        let n = 1 + i % 32;
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let done: Vec<bool> = (0..n).map(|_| rng.random_bool(0.15)).collect();
        let boot = rng.random_range(-5.0..5.0);
        let gamma = rng.random_range(0.8..1.0);
        let lambda = rng.random_range(0.0..1.0);
        let (adv, ret) = compute_gae(&r, &v, &done, boot, gamma, lambda).unwrap();
        let want = gae_brute(&r, &v, &done, boot, gamma, lambda);
        for t in 0..n {
            worst = worst.max((adv[t] - want[t]).abs());
            worst = worst.max((ret[t] - (want[t] + v[t])).abs());
        }
    }
    outcome(
        worst <= tol::GAE_ABS,
        format!("{trials} sequences of length 1..=32, max |diff| {worst:.1e} (limit {:.0e})", tol::GAE_ABS),
    )
}

// ---------------------------------------------------------------------------
// Shared desk training runs

struct Run {
    seed: u64,
    dir: PathBuf,
    summary: TrainSummary,
    elapsed: Duration,
}

struct Runs {
    learners: Vec<Run>,
    null: Run,
}

fn work_dir() -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

fn fresh_dir(name: &str) -> PathBuf {
    let dir = work_dir().join(name);
    if dir.exists() {
        fs::remove_dir_all(&dir).unwrap();
    }
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn train(name: &str, config: &RunConfig) -> Run {
    let dir = fresh_dir(name);
    let start = Instant::now();
    let summary = train_run(config, &dir).unwrap_or_else(|e| panic!("training {name}: {e}"));
    Run {
        seed: config.seed,
        dir,
        summary,
        elapsed: start.elapsed(),
    }
}

fn training_runs() -> &'static Runs {
    static RUNS: std::sync::OnceLock<Runs> = std::sync::OnceLock::new();
    RUNS.get_or_init(|| {
        let learners = tol::LEARNING_SEEDS
            .iter()
            .map(|&seed| train(&format!("seed{seed}"), &RunConfig::reference(Profile::Desk, seed)))
            .collect();
        let mut null = RunConfig::reference(Profile::Desk, 0);
        null.ppo.learning_rate = 0.0;
        Runs {
            learners,
            null: train("null_lr0", &null),
        }
    })
}

fn csv_column(path: &Path, column: &str) -> Vec<f64> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let idx = reader.headers().unwrap().iter().position(|h| h == column).unwrap();
    reader.records().map(|r| r.unwrap()[idx].parse().unwrap()).collect()
}

// ---------------------------------------------------------------------------
// 6. first-pass ratio identity

fn criterion_ratio_identity() -> Outcome {
    let runs = training_runs();
    let mut worst: f64 = 0.0;
    let mut clip: f64 = 0.0;
    let mut buffers = 0;
    for run in runs.learners.iter().chain([&runs.null]) {
        let path = run.dir.join(files::DIAGNOSTICS);
        let dev = csv_column(&path, "initial_ratio_max_dev");
        let frac = csv_column(&path, "initial_clip_frac");
        buffers += dev.len();
        worst = dev.iter().fold(worst, |m, &x| m.max(x));
        clip = frac.iter().fold(clip, |m, &x| m.max(x));
    }
    outcome(
        buffers > 0 && worst <= tol::RATIO_DEV && clip == 0.0,
        format!("{buffers} buffers, max |ratio - 1| {worst:.1e} (limit {:.0e}), max clip fraction {clip}", tol::RATIO_DEV),
    )
}

// ---------------------------------------------------------------------------
// 7. learning signal

struct Trend {
    first: f64,
    last: f64,
}

impl Trend {
    fn of(run: &Run) -> Self {
        let s = csv_column(&run.dir.join(files::REWARDS), "smoothed");
        let k = (s.len() / 10).max(1);
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
        Trend {
            first: mean(&s[..k]),
            last: mean(&s[s.len() - k..]),
        }
    }

    /// Final tenth at least `factor` times the first tenth, measured as a
    /// gain of `(factor - 1) |first|` so a negative start still counts.
    fn improved(&self, factor: f64) -> bool {
        self.last > 0.0 && self.last - self.first >= (factor - 1.0) * self.first.abs()
    }
}

fn criterion_learning() -> Outcome {
    let runs = training_runs();
    let mut parts = Vec::new();
    let mut improved = 0;
    let mut enough_episodes = true;
    let mut minutes = 0.0;
    for run in &runs.learners {
        let t = Trend::of(run);
        let ok = t.improved(tol::LEARNING_FACTOR);
        improved += ok as usize;
        enough_episodes &= run.summary.episodes >= tol::MIN_EPISODES;
        minutes += run.elapsed.as_secs_f64() / 60.0;
        parts.push(format!(
            "seed {} {:.4} -> {:.4} ({} ep){}",
            run.seed,
            t.first,
            t.last,
            run.summary.episodes,
            if ok { " up" } else { "" }
        ));
    }
    let null = Trend::of(&runs.null);
    let null_improved = null.improved(tol::LEARNING_FACTOR);
    minutes += runs.null.elapsed.as_secs_f64() / 60.0;
    parts.push(format!("lr=0 {:.4} -> {:.4}{}", null.first, null.last, if null_improved { " up" } else { "" }));
    outcome(
        improved >= 2 && !null_improved && enough_episodes,
        format!("{}; {improved}/3 seeds reach x{}; {minutes:.1} min", parts.join(", "), tol::LEARNING_FACTOR),
    )
}

// ---------------------------------------------------------------------------
// 8. berthing success

struct Evaluations {
    best_seed: u64,
    interpolated: berth_core::harness::EvaluationReport,
    extrapolated: berth_core::harness::EvaluationReport,
    dirs: Vec<PathBuf>,
}

fn evaluations() -> &'static Evaluations {
    static EVALS: std::sync::OnceLock<Evaluations> = std::sync::OnceLock::new();
    EVALS.get_or_init(|| {
        let runs = training_runs();
        let best = runs
            .learners
            .iter()
            .max_by(|a, b| {
                let (sa, sb) = (&a.summary, &b.summary);
                sa.best_validation_successes
                    .cmp(&sb.best_validation_successes)
                    .then(sb.best_validation_mean_final_d.total_cmp(&sa.best_validation_mean_final_d))
            })
            .unwrap();
        let ckpt = Checkpoint::load(&best.dir.join(files::BEST)).unwrap();
        let agent = ckpt.agent().unwrap();
        let env: BerthingEnv = ckpt.env().unwrap();
        let eval = |name: &str, spec: StartSpec| {
            let dir = fresh_dir(name);
            let starts = spec.starts(env.config());
            (eval_to_dir(&agent, &env, &starts, &dir).unwrap(), dir)
        };
        let (interpolated, d1) = eval(
            "eval_interpolated",
            StartSpec::Random {
                count: tol::EVAL_STARTS,
                seed: tol::EVAL_SEED,
            },
        );
        let (extrapolated, d2) = eval(
            "eval_extrapolated",
            StartSpec::Extrap {
                count: tol::EVAL_STARTS,
                seed: tol::EVAL_SEED,
            },
        );
        Evaluations {
            best_seed: best.seed,
            interpolated,
            extrapolated,
            dirs: vec![d1, d2],
        }
    })
}

fn criterion_success() -> Outcome {
    let e = evaluations();
    let interp = &e.interpolated;
    let all_inside = interp.rows.iter().all(|r| r.label == Label::Interpolated);
    let ok = interp.interpolated_success;
    outcome(
        all_inside && ok >= tol::SUCCESSES,
        format!(
            "best checkpoint from seed {}: {ok}/{} interpolated starts within tolerance (need {}), mean final d {:.2} L; extrapolated (reported only): {}/{}, mean final d {:.2} L",
            e.best_seed,
            interp.rows.len(),
            tol::SUCCESSES,
            interp.mean_final_d,
            e.extrapolated.extrapolated_success,
            e.extrapolated.rows.len(),
            e.extrapolated.mean_final_d
        ),
    )
}

// ---------------------------------------------------------------------------
// 9. determinism

fn dir_files(dir: &Path) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    out.sort();
    out
}

fn criterion_determinism() -> Outcome {
    let mut config = RunConfig::reference(Profile::Desk, 9);
    config.ppo.episodes = 6;
    config.workers = 1;
    config.run.checkpoint_every = 3;
    config.run.eval_every = 5;
    let a = train("determinism_a", &config);
    let b = train("determinism_b", &config);
    let mut compared = 0;
    let mut differing = Vec::new();
    let mut targets = vec![PathBuf::from(files::REWARDS)];
    targets.extend(
        dir_files(&a.dir.join(files::CHECKPOINTS))
            .into_iter()
            .map(|p| Path::new(files::CHECKPOINTS).join(p.file_name().unwrap())),
    );
    for rel in &targets {
        compared += 1;
        let (fa, fb) = (fs::read(a.dir.join(rel)).ok(), fs::read(b.dir.join(rel)).ok());
        if fa.is_none() || fa != fb {
            differing.push(rel.display().to_string());
        }
    }
    let extra = dir_files(&b.dir.join(files::CHECKPOINTS)).len() + 1 != targets.len();
    outcome(
        differing.is_empty() && !extra && compared > 2,
        format!("{compared} files compared (rewards CSV + checkpoints), differing: {differing:?}"),
    )
}

// ---------------------------------------------------------------------------
// 10. actuator constraints

fn criterion_constraints() -> Outcome {
    let e = evaluations();
    let limits = ShipConfig::reference().actuators;
    let mut files_seen = 0;
    let mut rows_seen = 0;
    let mut violations = Vec::new();
    for dir in &e.dirs {
        for path in dir_files(dir) {
            let is_traj = path.extension().is_some_and(|x| x == "csv")
                && path.file_name().unwrap().to_string_lossy().starts_with("traj_");
            if !is_traj {
                continue;
            }
            files_seen += 1;
            let rows = read_trajectory(fs::File::open(&path).unwrap()).unwrap();
            for (i, row) in rows.iter().enumerate() {
                rows_seen += 1;
                let mut bad = row.delta_deg.abs() > tol::DELTA_MAX || row.n < limits.n_min || row.n > limits.n_max;
                if i > 0 {
                    let prev = &rows[i - 1];
                    let rate = (row.delta_deg - prev.delta_deg).abs() / (row.t - prev.t);
                    bad |= rate > tol::DELTA_RATE;
                }
                if bad {
                    violations.push(format!("{}:{i}", path.file_name().unwrap().to_string_lossy()));
                }
            }
        }
    }
    outcome(
        violations.is_empty() && files_seen > 0,
        format!("{files_seen} trajectories, {rows_seen} rows, {} violations {:?}", violations.len(), violations.iter().take(5).collect::<Vec<_>>()),
    )
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let only: Option<BTreeSet<u32>> = std::env::var("BERTH_ACCEPT")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "reward oracle", criterion_reward),
        (2, "gradient check", criterion_gradients),
        (3, "mirror symmetry", criterion_mirror),
        (4, "self-propulsion", criterion_equilibrium),
        (5, "GAE brute force", criterion_gae),
        (6, "first-pass ratio", criterion_ratio_identity),
        (7, "learning signal", criterion_learning),
        (8, "berthing success", criterion_success),
        (9, "determinism", criterion_determinism),
        (10, "actuator limits", criterion_constraints),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, check) in criteria {
        if only.as_ref().is_some_and(|s| !s.contains(&id)) {
            continue;
        }
        ran += 1;
        let o = check();
        failed += !o.pass as usize;
        println!("{} [{id:>2}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {}/{ran} passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
