//! The berthing decision process.
//!
//! Positions handed to the agent are normalized by the ship length `L`
//! (`eta = x / L`, `xi = y / L`) and the goal lives in the same units.
//! Headings are clockwise from +y; the local heading error `psi'` is the
//! bearing to the goal minus the heading, wrapped to (-180°, 180°].

mod trajectory;

pub use trajectory::{read_trajectory, write_trajectory, TrajectoryError, TrajectoryRow, TRAJECTORY_COLUMNS};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::dynamics::Action;
use crate::dynamics::{ActuatorState, DynamicsError, RigidState, ShipConfig, ShipModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("episode already finished; call reset first")]
    EpisodeFinished,
    #[error("ship is exactly at the goal; heading error undefined")]
    AtGoalSingularity,
    #[error("invalid env config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Berthing goal and acceptance radius, in ship lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Goal {
    pub g_x: f64,
    pub g_y: f64,
    pub tolerance: f64,
}

impl Default for Goal {
    fn default() -> Self {
        Self { g_x: 1.5, g_y: 1.5, tolerance: 0.5 }
    }
}

/// Ranges for random initial positions (ship lengths) and heading perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitRanges {
    pub eta: [f64; 2],
    pub xi: [f64; 2],
    /// Half-width of the uniform heading perturbation around the bearing to the goal.
    pub heading_perturbation_deg: f64,
    /// Initial surge speed in m/s; `None` means self-propulsion speed at `n0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub surge: Option<f64>,
    /// Initial propeller rate; `None` means `n_max`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n0: Option<f64>,
}

impl Default for InitRanges {
    fn default() -> Self {
        Self {
            eta: [7.0, 12.0],
            xi: [2.0, 9.0],
            heading_perturbation_deg: 15.0,
            surge: None,
            n0: None,
        }
    }
}

impl InitRanges {
    /// True when `(eta, xi)` lies in the training start box.
    pub fn contains(&self, eta: f64, xi: f64) -> bool {
        (self.eta[0]..=self.eta[1]).contains(&eta) && (self.xi[0]..=self.xi[1]).contains(&xi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub goal: Goal,
    pub init: InitRanges,
    pub max_steps: usize,
    /// Episodes abort when `eta` or `xi` leaves `[abort_box[0], abort_box[1]]`.
    pub abort_box: [f64; 2],
    /// End the episode as soon as the ship is inside the tolerance circle.
    pub early_stop: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            goal: Goal::default(),
            init: InitRanges::default(),
            max_steps: 3000,
            abort_box: [-2.0, 20.0],
            early_stop: false,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |msg: &str| Err(EnvError::InvalidConfig(msg.to_string()));
        if !(self.goal.tolerance > 0.0) {
            return bad("goal.tolerance must be > 0");
        }
        if !(self.init.eta[0] <= self.init.eta[1]) || !(self.init.xi[0] <= self.init.xi[1]) {
            return bad("init ranges must be non-empty");
        }
        if !(self.init.heading_perturbation_deg >= 0.0) {
            return bad("init.heading_perturbation_deg must be >= 0");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be >= 1");
        }
        if !(self.abort_box[0] < self.abort_box[1]) {
            return bad("abort_box must be non-empty");
        }
        Ok(())
    }
}

/// The seven-component state fed to the agent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Observation {
    pub eta: f64,
    pub xi: f64,
    pub d: f64,
    /// Heading in radians, wrapped to (-π, π].
    pub psi: f64,
    pub u: f64,
    pub v: f64,
    pub r: f64,
}

impl Observation {
    pub fn from_state(state: &RigidState, goal: &Goal, length: f64) -> Self {
        let (eta, xi) = normalize_position(state.x, state.y, length);
        Self {
            eta,
            xi,
            d: distance_to_goal(eta, xi, goal),
            psi: wrap_radians(state.psi),
            u: state.u,
            v: state.v,
            r: state.r,
        }
    }

    pub fn to_array(&self) -> [f64; 7] {
        [self.eta, self.xi, self.d, self.psi, self.u, self.v, self.r]
    }
}

pub fn normalize_position(x: f64, y: f64, length: f64) -> (f64, f64) {
    (x / length, y / length)
}

pub fn distance_to_goal(eta: f64, xi: f64, goal: &Goal) -> f64 {
    let dx = goal.g_x - eta;
    let dy = goal.g_y - xi;
    (dx * dx + dy * dy).sqrt()
}

/// Bearing from `(eta, xi)` to the goal in radians, clockwise from +y.
pub fn bearing_to_goal(eta: f64, xi: f64, goal: &Goal) -> f64 {
    (goal.g_x - eta).atan2(goal.g_y - xi)
}

/// Wrap an angle in degrees to (-180, 180].
pub fn wrap_degrees(angle: f64) -> f64 {
    let w = angle.rem_euclid(360.0);
    if w > 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// Wrap an angle in radians to (-π, π].
pub fn wrap_radians(angle: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let w = angle.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Heading error toward the goal in degrees; zero when the bow points at it.
pub fn local_heading_error(state: &RigidState, goal: &Goal, length: f64) -> Result<f64, EnvError> {
    let (eta, xi) = normalize_position(state.x, state.y, length);
    if distance_to_goal(eta, xi, goal) == 0.0 {
        return Err(EnvError::AtGoalSingularity);
    }
    let bearing = bearing_to_goal(eta, xi, goal).to_degrees();
    Ok(wrap_degrees(bearing - state.psi.to_degrees()))
}

/// Per-step reward.
///
/// Inside the tolerance circle the ship earns 10, plus 2 more when the bow
/// is within ±15° of the goal direction. Rudder use costs `|delta| / 500`
/// and going astern adds `u / 10`. The sum is divided by 10.
pub fn reward(d: f64, psi_prime: f64, delta: f64, u: f64, tolerance: f64) -> f64 {
    let mut r = 0.0;
    if d <= tolerance {
        r += 10.0;
        if (-15.0..=15.0).contains(&psi_prime) {
            r += 2.0;
        }
    }
    r -= delta.abs() / 500.0;
    if u < 0.0 {
        r += u / 10.0;
    }
    r / 10.0
}

/// Draw a start pose: position uniform in the init box, heading toward the
/// goal plus a uniform perturbation, straight-ahead surge `surge`.
pub fn sample_initial_state<R: Rng + ?Sized>(
    rng: &mut R,
    init: &InitRanges,
    goal: &Goal,
    length: f64,
    surge: f64,
) -> RigidState {
    let eta = uniform(rng, init.eta[0], init.eta[1]);
    let xi = uniform(rng, init.xi[0], init.xi[1]);
    let half = init.heading_perturbation_deg;
    let perturbation = uniform(rng, -half, half);
    let psi = bearing_to_goal(eta, xi, goal) + perturbation.to_radians();
    RigidState {
        x: eta * length,
        y: xi * length,
        psi,
        u: surge,
        v: 0.0,
        r: 0.0,
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Why an episode ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    Running,
    TimeLimit,
    OutOfBounds,
    GoalReached,
    Diverged(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub d: f64,
    /// Heading error in degrees (0 when exactly at the goal).
    pub psi_prime: f64,
    pub at_goal_singularity: bool,
    pub delta_actual: f64,
    pub n_actual: f64,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// One berthing episode's worth of mutable state.
#[derive(Debug, Clone)]
pub struct BerthingEnv {
    model: ShipModel,
    config: EnvConfig,
    initial_surge: f64,
    initial_n: f64,
    state: RigidState,
    actuators: ActuatorState,
    last_reward: f64,
    steps: usize,
    done: bool,
}

impl BerthingEnv {
    pub fn new(ship: &ShipConfig, config: EnvConfig) -> Result<Self, EnvError> {
        config.validate()?;
        let model = ShipModel::new(ship)?;
        let limits = model.limits();
        let initial_n = config.init.n0.unwrap_or(limits.n_max).clamp(limits.n_min, limits.n_max);
        let initial_surge = config
            .init
            .surge
            .unwrap_or_else(|| model.self_propulsion_speed(initial_n));
        let mut env = Self {
            model,
            config,
            initial_surge,
            initial_n,
            state: RigidState::default(),
            actuators: ActuatorState::default(),
            last_reward: 0.0,
            steps: 0,
            done: true,
        };
        let g = env.config.goal;
        let start = env.start_pose(g.g_x + 1.0, g.g_y + 1.0, 0.0);
        env.reset_to(start);
        Ok(env)
    }

    pub fn model(&self) -> &ShipModel {
        &self.model
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn goal(&self) -> &Goal {
        &self.config.goal
    }

    pub fn dt(&self) -> f64 {
        self.model.integrator().dt
    }

    pub fn length(&self) -> f64 {
        self.model.length()
    }

    pub fn state(&self) -> &RigidState {
        &self.state
    }

    pub fn actuators(&self) -> &ActuatorState {
        &self.actuators
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn initial_surge(&self) -> f64 {
        self.initial_surge
    }

    pub fn set_early_stop(&mut self, early_stop: bool) {
        self.config.early_stop = early_stop;
    }

    /// Start pose at `(eta, xi)` ship lengths and heading `psi` radians,
    /// moving ahead at the configured initial surge speed.
    pub fn start_pose(&self, eta: f64, xi: f64, psi: f64) -> RigidState {
        let l = self.length();
        RigidState {
            x: eta * l,
            y: xi * l,
            psi,
            u: self.initial_surge,
            v: 0.0,
            r: 0.0,
        }
    }

    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Observation {
        let start = sample_initial_state(
            rng,
            &self.config.init,
            &self.config.goal,
            self.length(),
            self.initial_surge,
        );
        self.reset_to(start)
    }

    pub fn reset_to(&mut self, start: RigidState) -> Observation {
        self.state = start;
        self.actuators = ActuatorState { delta: 0.0, n: self.initial_n };
        self.steps = 0;
        self.last_reward = 0.0;
        self.done = false;
        self.observation()
    }

    pub fn observation(&self) -> Observation {
        Observation::from_state(&self.state, &self.config.goal, self.length())
    }

    fn heading_error(&self) -> (f64, bool) {
        match local_heading_error(&self.state, &self.config.goal, self.length()) {
            Ok(a) => (a, false),
            Err(_) => (0.0, true),
        }
    }

    fn info(&self, termination: Termination) -> StepInfo {
        let (psi_prime, at_goal_singularity) = self.heading_error();
        StepInfo {
            d: self.observation().d,
            psi_prime,
            at_goal_singularity,
            delta_actual: self.actuators.delta,
            n_actual: self.actuators.n,
            termination,
        }
    }

    pub fn step(&mut self, action: Action) -> Result<Step, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        let cmd = self.model.limits().clamp(action);
        let dt = self.dt();
        self.steps += 1;
        let next = self.model.step(&self.state, &self.actuators, cmd, dt);
        let (state, actuators) = match next {
            Ok(pair) => pair,
            Err(DynamicsError::IntegratorDiverged(cause)) => {
                self.done = true;
                self.last_reward = 0.0;
                return Ok(Step {
                    observation: self.observation(),
                    reward: 0.0,
                    done: true,
                    info: self.info(Termination::Diverged(cause)),
                });
            }
            Err(e) => return Err(e.into()),
        };
        self.state = state;
        self.actuators = actuators;

        let observation = self.observation();
        let (psi_prime, at_goal_singularity) = self.heading_error();
        let tol = self.config.goal.tolerance;
        let [lo, hi] = self.config.abort_box;
        let inside_box = (lo..=hi).contains(&observation.eta) && (lo..=hi).contains(&observation.xi);

        let (reward, termination) = if !inside_box {
            (0.0, Termination::OutOfBounds)
        } else {
            let r = reward(observation.d, psi_prime, cmd.delta_cmd, observation.u, tol);
            let t = if self.config.early_stop && observation.d <= tol {
                Termination::GoalReached
            } else if self.steps >= self.config.max_steps {
                Termination::TimeLimit
            } else {
                Termination::Running
            };
            (r, t)
        };
        self.done = termination != Termination::Running;
        self.last_reward = reward;
        Ok(Step {
            observation,
            reward,
            done: self.done,
            info: StepInfo {
                d: observation.d,
                psi_prime,
                at_goal_singularity,
                delta_actual: self.actuators.delta,
                n_actual: self.actuators.n,
                termination,
            },
        })
    }

    /// Log row for the current state, tagged with the most recent reward.
    pub fn trajectory_row(&self) -> TrajectoryRow {
        let obs = self.observation();
        let (psi_prime, _) = self.heading_error();
        TrajectoryRow {
            t: self.steps as f64 * self.dt(),
            x: self.state.x,
            y: self.state.y,
            psi_deg: wrap_degrees(self.state.psi.to_degrees()),
            u: self.state.u,
            v: self.state.v,
            r: self.state.r,
            delta_deg: self.actuators.delta,
            n: self.actuators.n,
            reward: self.last_reward,
            d: obs.d,
            psi_prime_deg: psi_prime,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn env() -> BerthingEnv {
        BerthingEnv::new(&ShipConfig::reference(), EnvConfig::default()).unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_position(350.0, 175.0, 175.0), (2.0, 1.0));
        assert_eq!(normalize_position(0.0, 0.0, 175.0), (0.0, 0.0));
        assert_eq!(normalize_position(1312.5, 962.5, 175.0), (7.5, 5.5));
    }

    #[test]
    fn distance_examples() {
        let g = Goal::default();
        assert_eq!(distance_to_goal(1.5, 1.5, &g), 0.0);
        assert_eq!(distance_to_goal(4.5, 5.5, &g), 5.0);
        let d = distance_to_goal(12.0, 9.0, &g);
        assert!((d - (10.5f64 * 10.5 + 7.5 * 7.5).sqrt()).abs() < 1e-15);
        assert!((d - 12.903_487_9).abs() < 1e-6);
    }

    #[test]
    fn heading_error_examples() {
        let g = Goal::default();
        let l = 175.0;
        let (eta, xi) = (6.0, 4.0);
        let bearing = bearing_to_goal(eta, xi, &g);
        let s = RigidState { x: eta * l, y: xi * l, psi: bearing, ..Default::default() };
        assert!(local_heading_error(&s, &g, l).unwrap().abs() < 1e-12);
        let rotated = RigidState { psi: bearing + std::f64::consts::FRAC_PI_2, ..s };
        assert!((local_heading_error(&rotated, &g, l).unwrap() + 90.0).abs() < 1e-9);
        let at_goal = RigidState { x: 1.5 * l, y: 1.5 * l, ..Default::default() };
        assert_eq!(local_heading_error(&at_goal, &g, l), Err(EnvError::AtGoalSingularity));
    }

    #[test]
    fn wrap_maps_half_turn_to_positive() {
        assert_eq!(wrap_degrees(180.0), 180.0);
        assert_eq!(wrap_degrees(-180.0), 180.0);
        assert_eq!(wrap_degrees(190.0), -170.0);
        assert_eq!(wrap_degrees(-540.0), 180.0);
    }

    #[test]
    fn reward_examples() {
        assert!((reward(0.2, 10.0, 20.0, 1.0, 0.5) - 1.196).abs() < 1e-12);
        assert_eq!(reward(5.0, 0.0, 0.0, 0.5, 0.5), 0.0);
        assert!((reward(5.0, 0.0, 35.0, -0.2, 0.5) + 0.009).abs() < 1e-12);
        assert_eq!(reward(0.0, 0.0, 0.0, 0.0, 0.5), 1.2);
    }

    #[test]
    fn unperturbed_start_points_at_goal() {
        let init = InitRanges { heading_perturbation_deg: 0.0, ..Default::default() };
        let g = Goal::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let s = sample_initial_state(&mut rng, &init, &g, 175.0, 4.0);
            assert!(local_heading_error(&s, &g, 175.0).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn seeded_resets_repeat() {
        let mut a = env();
        let mut b = env();
        let mut ra = ChaCha8Rng::seed_from_u64(11);
        let mut rb = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            assert_eq!(a.reset(&mut ra), b.reset(&mut rb));
            assert_eq!(a.state(), b.state());
        }
    }

    #[test]
    fn time_limit_ends_episode() {
        let ship = ShipConfig::reference();
        let cfg = EnvConfig { max_steps: 5, ..Default::default() };
        let mut e = BerthingEnv::new(&ship, cfg).unwrap();
        let start = e.start_pose(8.0, 5.0, 0.0);
        e.reset_to(start);
        for k in 1..=5 {
            let s = e.step(Action { delta_cmd: 0.0, n_cmd: 1.0 }).unwrap();
            assert_eq!(s.done, k == 5);
        }
        assert_eq!(e.step(Action::default()), Err(EnvError::EpisodeFinished));
    }

    #[test]
    fn at_goal_with_aligned_bow_earns_full_reward() {
        let mut e = env();
        let g = *e.goal();
        // Just south of the goal, pointing north at it, stopped.
        let mut s = e.start_pose(g.g_x, g.g_y - 0.1, 0.0);
        s.u = 0.0;
        e.reset_to(s);
        let step = e.step(Action { delta_cmd: 0.0, n_cmd: 0.0 }).unwrap();
        assert_eq!(step.reward, 1.2);
    }

    #[test]
    fn leaving_the_box_aborts_with_zero_reward() {
        let mut e = env();
        let s = e.start_pose(19.99, 10.0, std::f64::consts::FRAC_PI_2);
        e.reset_to(s);
        let step = e.step(Action { delta_cmd: 30.0, n_cmd: 1.0 }).unwrap();
        assert!(step.done);
        assert_eq!(step.reward, 0.0);
        assert_eq!(step.info.termination, Termination::OutOfBounds);
    }

    #[test]
    fn straight_run_advances_along_heading() {
        let mut e = env();
        let psi = 0.7f64;
        let s = e.start_pose(10.0, 6.0, psi);
        let o0 = e.reset_to(s);
        let u0 = s.u;
        // Hold the self-propulsion speed: u stays at its equilibrium.
        let o1 = e.step(Action { delta_cmd: 0.0, n_cmd: 1.0 }).unwrap().observation;
        let expect = u0 * e.dt() / e.length();
        let moved = ((o1.eta - o0.eta).powi(2) + (o1.xi - o0.xi).powi(2)).sqrt();
        assert!((moved - expect).abs() < 1e-9, "{moved} vs {expect}");
        assert!(((o1.eta - o0.eta) / moved - psi.sin()).abs() < 1e-9);
    }
}
