//! 3-DOF surge/sway/yaw maneuvering model.
//!
//! Forces follow the modular (MMG-style) split into hull, propeller and rudder
//! contributions. Coordinates: `x` east, `y` north, heading `psi` measured
//! clockwise from north (+y). Body axes: `u` forward, `v` to starboard, `r`
//! clockwise. A positive rudder angle turns the ship to starboard.
//!
//! Rudder angles are in degrees and propeller rates in revolutions per second
//! at every public boundary. Everything else is SI.

mod forces;
mod integrate;

pub use forces::{
    advance_ratio_limit, hull_and_rudder_forces, hull_forces, propeller_surge_force,
    rudder_forces, thrust_coefficient, Forces,
};
pub use integrate::{step_dynamics, ShipModel};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("non-finite input `{0}`")]
    NonFinite(&'static str),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("integrator diverged: {0}")]
    IntegratorDiverged(String),
}

pub type Result<T> = std::result::Result<T, DynamicsError>;

fn require(cond: bool, name: &'static str, reason: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(DynamicsError::InvalidParameter {
            name,
            reason: reason.to_string(),
        })
    }
}

pub(crate) fn check_finite(value: f64, name: &'static str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(DynamicsError::NonFinite(name))
    }
}

/// Principal particulars of the hull, rudder and propeller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShipGeometry {
    /// Length between perpendiculars; the reference length `L` everywhere.
    pub length_pp: f64,
    pub length_oa: f64,
    pub breadth: f64,
    pub draft: f64,
    pub block_coeff: f64,
    pub rudder_height: f64,
    /// Rudder area divided by `L * draft`.
    pub rudder_area_ratio: f64,
    pub rudder_aspect: f64,
    pub prop_diameter: f64,
    pub pitch_ratio: f64,
    pub expanded_area_ratio: f64,
}

impl ShipGeometry {
    /// The single-screw container ship used throughout this crate
    /// (175 m between perpendiculars, Cb = 0.559).
    pub fn reference() -> Self {
        Self {
            length_pp: 175.0,
            length_oa: 188.0,
            breadth: 25.4,
            draft: 8.5,
            block_coeff: 0.559,
            rudder_height: 7.7,
            rudder_area_ratio: 1.0 / 45.8,
            rudder_aspect: 1.827,
            prop_diameter: 6.5,
            pitch_ratio: 1.055,
            expanded_area_ratio: 0.73,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("length_pp", self.length_pp),
            ("length_oa", self.length_oa),
            ("breadth", self.breadth),
            ("draft", self.draft),
            ("block_coeff", self.block_coeff),
            ("rudder_height", self.rudder_height),
            ("rudder_area_ratio", self.rudder_area_ratio),
            ("rudder_aspect", self.rudder_aspect),
            ("prop_diameter", self.prop_diameter),
            ("pitch_ratio", self.pitch_ratio),
            ("expanded_area_ratio", self.expanded_area_ratio),
        ];
        for (name, value) in fields {
            require(value.is_finite() && value > 0.0, name, "must be finite and > 0")?;
        }
        require(self.block_coeff < 1.0, "block_coeff", "must lie in (0, 1)")?;
        require(self.rudder_area_ratio < 1.0, "rudder_area_ratio", "must lie in (0, 1)")?;
        Ok(())
    }

    /// Displaced volume `L B d Cb` in m³.
    pub fn displacement(&self) -> f64 {
        self.length_pp * self.breadth * self.draft * self.block_coeff
    }

    /// Rudder area in m².
    pub fn rudder_area(&self) -> f64 {
        self.rudder_area_ratio * self.length_pp * self.draft
    }

    /// Rudder normal-force lift slope from Fujii's aspect-ratio formula.
    pub fn rudder_lift_slope(&self) -> f64 {
        6.13 * self.rudder_aspect / (self.rudder_aspect + 2.25)
    }
}

/// Mass properties and hydrodynamic coefficients.
///
/// Hull derivatives are nondimensional: forces by `½ρ L d U²`, the yaw moment
/// by `½ρ L² d U²`. Longitudinal positions (`x_h`, `x_r`, `l_r`) are fractions
/// of `L`, positive forward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydroCoeffs {
    /// Ship mass in kg.
    pub mass: f64,
    /// Yaw moment of inertia in kg·m².
    pub inertia_z: f64,
    /// Surge added mass; defaults to `0.05 m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub added_mass_x: Option<f64>,
    /// Sway added mass; defaults to `0.9 m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub added_mass_y: Option<f64>,
    /// Added yaw inertia; defaults to `0.5 I_z`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub added_inertia_z: Option<f64>,

    pub x_uu: f64,
    pub x_vr: f64,
    pub y_v: f64,
    pub y_r: f64,
    pub y_vvv: f64,
    pub y_vvr: f64,
    pub y_vrr: f64,
    pub y_rrr: f64,
    pub n_v: f64,
    pub n_r: f64,
    pub n_vvv: f64,
    pub n_vvr: f64,
    pub n_vrr: f64,
    pub n_rrr: f64,

    pub wake_fraction: f64,
    pub thrust_deduction: f64,
    /// `K_T(J) = kt_0 + kt_1 J + kt_2 J²`.
    pub kt_0: f64,
    pub kt_1: f64,
    pub kt_2: f64,

    /// Steering resistance deduction.
    pub t_r: f64,
    /// Rudder force increase factor on the hull.
    pub a_h: f64,
    /// Position of the hull's additional lateral force (fraction of L).
    pub x_h: f64,
    /// Rudder position (fraction of L).
    pub x_r: f64,
    /// Effective longitudinal coordinate for the rudder inflow angle (fraction of L).
    pub l_r: f64,
    /// Flow straightening coefficient.
    pub gamma_r: f64,
    /// Ratio of wake fraction at the rudder to that at the propeller.
    pub epsilon: f64,
    /// Propeller slipstream acceleration factor at the rudder.
    pub kappa: f64,

    pub water_density: f64,
    /// Fraction of bollard thrust delivered when running astern.
    #[serde(default = "default_astern_efficiency")]
    pub astern_efficiency: f64,
    /// Propeller rates with `|n|` at or below this many RPS produce no thrust.
    #[serde(default = "default_n_deadband")]
    pub n_deadband: f64,
}

fn default_astern_efficiency() -> f64 {
    0.7
}

fn default_n_deadband() -> f64 {
    1e-3
}

impl HydroCoeffs {
    /// Representative coefficients for a single-screw cargo hull of block
    /// coefficient ≈ 0.56. Not measured values for any particular ship.
    pub fn representative() -> Self {
        let geom = ShipGeometry::reference();
        let mass = 1025.0 * geom.displacement();
        let gyration = 0.25 * geom.length_pp;
        Self {
            mass,
            inertia_z: mass * gyration * gyration,
            added_mass_x: None,
            added_mass_y: None,
            added_inertia_z: None,
            x_uu: -0.012,
            x_vr: -0.04,
            y_v: -0.26,
            y_r: 0.07,
            y_vvv: -1.5,
            y_vvr: 0.38,
            y_vrr: -0.39,
            y_rrr: 0.008,
            n_v: -0.09,
            n_r: -0.05,
            n_vvv: -0.03,
            n_vvr: -0.29,
            n_vrr: 0.055,
            n_rrr: -0.013,
            wake_fraction: 0.3,
            thrust_deduction: 0.175,
            kt_0: 0.2931,
            kt_1: -0.2753,
            kt_2: -0.1359,
            t_r: 0.3,
            a_h: 0.25,
            x_h: -0.45,
            x_r: -0.5,
            l_r: -0.75,
            gamma_r: 0.5,
            epsilon: 1.05,
            kappa: 0.5,
            water_density: 1025.0,
            astern_efficiency: default_astern_efficiency(),
            n_deadband: default_n_deadband(),
        }
    }

    pub fn added_mass_x(&self) -> f64 {
        self.added_mass_x.unwrap_or(0.05 * self.mass)
    }

    pub fn added_mass_y(&self) -> f64 {
        self.added_mass_y.unwrap_or(0.9 * self.mass)
    }

    pub fn added_inertia_z(&self) -> f64 {
        self.added_inertia_z.unwrap_or(0.5 * self.inertia_z)
    }

    pub fn validate(&self) -> Result<()> {
        require(self.mass.is_finite() && self.mass > 0.0, "mass", "must be > 0")?;
        require(self.inertia_z.is_finite() && self.inertia_z > 0.0, "inertia_z", "must be > 0")?;
        for (name, value) in [
            ("added_mass_x", self.added_mass_x()),
            ("added_mass_y", self.added_mass_y()),
            ("added_inertia_z", self.added_inertia_z()),
        ] {
            require(value.is_finite() && value >= 0.0, name, "must be >= 0")?;
        }
        for (name, value) in [
            ("wake_fraction", self.wake_fraction),
            ("thrust_deduction", self.thrust_deduction),
            ("t_r", self.t_r),
        ] {
            require((0.0..1.0).contains(&value), name, "must lie in [0, 1)")?;
        }
        require(self.kt_0 > 0.0, "kt_0", "K_T(0) must be > 0")?;
        require(self.water_density > 0.0, "water_density", "must be > 0")?;
        require(self.astern_efficiency >= 0.0, "astern_efficiency", "must be >= 0")?;
        require(self.n_deadband > 0.0, "n_deadband", "must be > 0")?;
        let rest = [
            ("x_uu", self.x_uu),
            ("x_vr", self.x_vr),
            ("y_v", self.y_v),
            ("y_r", self.y_r),
            ("y_vvv", self.y_vvv),
            ("y_vvr", self.y_vvr),
            ("y_vrr", self.y_vrr),
            ("y_rrr", self.y_rrr),
            ("n_v", self.n_v),
            ("n_r", self.n_r),
            ("n_vvv", self.n_vvv),
            ("n_vvr", self.n_vvr),
            ("n_vrr", self.n_vrr),
            ("n_rrr", self.n_rrr),
            ("kt_1", self.kt_1),
            ("kt_2", self.kt_2),
            ("a_h", self.a_h),
            ("x_h", self.x_h),
            ("x_r", self.x_r),
            ("l_r", self.l_r),
            ("gamma_r", self.gamma_r),
            ("epsilon", self.epsilon),
            ("kappa", self.kappa),
        ];
        for (name, value) in rest {
            require(value.is_finite(), name, "must be finite")?;
        }
        Ok(())
    }
}

/// Propeller and rudder limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActuatorLimits {
    pub n_min: f64,
    pub n_max: f64,
    pub delta_max: f64,
    pub delta_rate_max: f64,
}

impl Default for ActuatorLimits {
    fn default() -> Self {
        Self {
            n_min: -1.0,
            n_max: 1.0,
            delta_max: 35.0,
            delta_rate_max: 3.0,
        }
    }
}

impl ActuatorLimits {
    pub fn validate(&self) -> Result<()> {
        require(
            self.n_min.is_finite() && self.n_max.is_finite() && self.n_min <= self.n_max,
            "n_min",
            "need finite n_min <= n_max",
        )?;
        require(self.delta_max > 0.0 && self.delta_max.is_finite(), "delta_max", "must be > 0")?;
        require(
            self.delta_rate_max > 0.0 && self.delta_rate_max.is_finite(),
            "delta_rate_max",
            "must be > 0",
        )?;
        Ok(())
    }

    /// Clamp a command into the static limits.
    pub fn clamp(&self, cmd: Action) -> Action {
        Action {
            delta_cmd: clamp_nan_safe(cmd.delta_cmd, -self.delta_max, self.delta_max),
            n_cmd: clamp_nan_safe(cmd.n_cmd, self.n_min, self.n_max),
        }
    }

    /// Move the rudder toward `delta_cmd` by at most `delta_rate_max * dt` degrees.
    pub fn rate_limit(&self, delta_actual: f64, delta_cmd: f64, dt: f64) -> Result<f64> {
        check_finite(delta_actual, "delta_actual")?;
        check_finite(delta_cmd, "delta_cmd")?;
        check_finite(dt, "dt")?;
        require(dt > 0.0, "dt", "must be > 0")?;
        let max_step = self.delta_rate_max * dt;
        let next = delta_actual + (delta_cmd - delta_actual).clamp(-max_step, max_step);
        Ok(next.clamp(-self.delta_max, self.delta_max))
    }
}

fn clamp_nan_safe(x: f64, lo: f64, hi: f64) -> f64 {
    if x.is_nan() {
        0.0_f64.clamp(lo, hi)
    } else {
        x.clamp(lo, hi)
    }
}

/// Rate-limit the rudder with the default 3 deg/s, ±35 deg limits.
pub fn rate_limit_rudder(delta_actual: f64, delta_cmd: f64, dt: f64) -> Result<f64> {
    ActuatorLimits::default().rate_limit(delta_actual, delta_cmd, dt)
}

/// Fixed-step integration settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    /// Control step in seconds (one agent action per step).
    pub dt: f64,
    /// RK4 substep in seconds; `dt` must be an integer multiple.
    pub substep: f64,
    /// Sanity bound on |u| and |v| in m/s.
    pub u_max: f64,
    /// Sanity bound on |r| in rad/s.
    pub r_max: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 1.0,
            substep: 0.1,
            u_max: 20.0,
            r_max: 1.0,
        }
    }
}

impl IntegratorConfig {
    /// Number of substeps per `dt`, or an error if `dt` is not a multiple of `substep`.
    pub fn substeps_for(&self, dt: f64) -> Result<usize> {
        require(dt.is_finite() && dt > 0.0, "dt", "must be finite and > 0")?;
        require(
            self.substep.is_finite() && self.substep > 0.0,
            "substep",
            "must be finite and > 0",
        )?;
        let k = (dt / self.substep).round();
        require(
            k >= 1.0 && (k * self.substep - dt).abs() <= 1e-9 * dt.max(1.0),
            "dt",
            "must be an integer multiple of the substep",
        )?;
        Ok(k as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.substeps_for(self.dt)?;
        require(self.u_max > 0.0, "u_max", "must be > 0")?;
        require(self.r_max > 0.0, "r_max", "must be > 0")?;
        Ok(())
    }
}

/// Ship particulars, coefficients, actuator limits and integrator settings:
/// the content of a ship configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShipConfig {
    pub geometry: ShipGeometry,
    pub coefficients: HydroCoeffs,
    #[serde(default)]
    pub actuators: ActuatorLimits,
    #[serde(default)]
    pub integrator: IntegratorConfig,
}

impl ShipConfig {
    pub fn reference() -> Self {
        Self {
            geometry: ShipGeometry::reference(),
            coefficients: HydroCoeffs::representative(),
            actuators: ActuatorLimits::default(),
            integrator: IntegratorConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.coefficients.validate()?;
        self.actuators.validate()?;
        self.integrator.validate()
    }
}

/// Pose in the global frame and velocities in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RigidState {
    pub x: f64,
    pub y: f64,
    /// Heading in radians, clockwise from +y.
    pub psi: f64,
    pub u: f64,
    pub v: f64,
    pub r: f64,
}

impl RigidState {
    pub fn is_finite(&self) -> bool {
        [self.x, self.y, self.psi, self.u, self.v, self.r]
            .iter()
            .all(|c| c.is_finite())
    }

    /// Reflection about the north axis through the origin.
    pub fn mirrored(&self) -> Self {
        Self {
            x: -self.x,
            y: self.y,
            psi: -self.psi,
            u: self.u,
            v: -self.v,
            r: -self.r,
        }
    }
}

/// Actual rudder angle (degrees) and propeller rate (RPS).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActuatorState {
    pub delta: f64,
    pub n: f64,
}

/// Commanded rudder angle (degrees) and propeller rate (RPS).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub delta_cmd: f64,
    pub n_cmd: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_limit_examples() {
        assert_eq!(rate_limit_rudder(0.0, 35.0, 1.0).unwrap(), 3.0);
        assert_eq!(rate_limit_rudder(10.0, 10.0, 1.0).unwrap(), 10.0);
        assert_eq!(rate_limit_rudder(-5.0, -35.0, 2.0).unwrap(), -11.0);
    }

    #[test]
    fn rate_limit_rejects_non_finite() {
        assert!(rate_limit_rudder(f64::NAN, 0.0, 1.0).is_err());
        assert!(rate_limit_rudder(0.0, f64::INFINITY, 1.0).is_err());
        assert!(rate_limit_rudder(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn reference_config_is_valid() {
        ShipConfig::reference().validate().unwrap();
        let c = HydroCoeffs::representative();
        assert_eq!(c.added_mass_x(), 0.05 * c.mass);
        assert_eq!(c.added_mass_y(), 0.9 * c.mass);
        assert_eq!(c.added_inertia_z(), 0.5 * c.inertia_z);
    }

    #[test]
    fn geometry_invariants_rejected() {
        let mut g = ShipGeometry::reference();
        g.block_coeff = 1.2;
        assert!(g.validate().is_err());
        let mut g = ShipGeometry::reference();
        g.draft = 0.0;
        assert!(g.validate().is_err());
        let mut c = HydroCoeffs::representative();
        c.wake_fraction = 1.0;
        assert!(c.validate().is_err());
        c = HydroCoeffs::representative();
        c.kt_0 = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn substep_multiples() {
        let cfg = IntegratorConfig::default();
        assert_eq!(cfg.substeps_for(1.0).unwrap(), 10);
        assert_eq!(cfg.substeps_for(2.0).unwrap(), 20);
        assert!(cfg.substeps_for(0.25).is_err());
    }

    #[test]
    fn clamp_is_idempotent() {
        let lim = ActuatorLimits::default();
        let a = lim.clamp(Action { delta_cmd: 50.0, n_cmd: -3.0 });
        assert_eq!(a, Action { delta_cmd: 35.0, n_cmd: -1.0 });
        assert_eq!(lim.clamp(a), a);
    }
}
