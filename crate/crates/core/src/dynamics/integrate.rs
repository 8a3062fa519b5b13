use super::forces::{hull_forces, propeller_thrust, rudder_forces};
use super::{
    Action, ActuatorLimits, ActuatorState, DynamicsError, HydroCoeffs, IntegratorConfig, Result,
    RigidState, ShipConfig, ShipGeometry,
};

/// A validated ship configuration ready for integration.
#[derive(Debug, Clone)]
pub struct ShipModel {
    geometry: ShipGeometry,
    coeffs: HydroCoeffs,
    limits: ActuatorLimits,
    integrator: IntegratorConfig,
    mass_surge: f64,
    mass_sway: f64,
    inertia_yaw: f64,
}

impl ShipModel {
    pub fn new(config: &ShipConfig) -> Result<Self> {
        config.validate()?;
        let c = &config.coefficients;
        Ok(Self {
            geometry: config.geometry.clone(),
            coeffs: c.clone(),
            limits: config.actuators.clone(),
            integrator: config.integrator.clone(),
            mass_surge: c.mass + c.added_mass_x(),
            mass_sway: c.mass + c.added_mass_y(),
            inertia_yaw: c.inertia_z + c.added_inertia_z(),
        })
    }

    pub fn geometry(&self) -> &ShipGeometry {
        &self.geometry
    }

    pub fn coeffs(&self) -> &HydroCoeffs {
        &self.coeffs
    }

    pub fn limits(&self) -> &ActuatorLimits {
        &self.limits
    }

    pub fn integrator(&self) -> &IntegratorConfig {
        &self.integrator
    }

    /// Reference length `L`.
    pub fn length(&self) -> f64 {
        self.geometry.length_pp
    }

    /// Time derivative of `(x, y, psi, u, v, r)`.
    pub fn derivative(&self, s: &RigidState, act: &ActuatorState) -> [f64; 6] {
        let hull = hull_forces(s, &self.geometry, &self.coeffs);
        let rudder = rudder_forces(s, act, &self.geometry, &self.coeffs);
        let thrust = propeller_thrust(s.u, act.n, &self.geometry, &self.coeffs);
        let fx = hull.x + rudder.x + thrust;
        let fy = hull.y + rudder.y;
        let fn_ = hull.n + rudder.n;

        let u_dot = (fx + self.mass_sway * s.v * s.r) / self.mass_surge;
        let v_dot = (fy - self.mass_surge * s.u * s.r) / self.mass_sway;
        let r_dot = fn_ / self.inertia_yaw;
        let (sin_psi, cos_psi) = s.psi.sin_cos();
        [
            s.u * sin_psi + s.v * cos_psi,
            s.u * cos_psi - s.v * sin_psi,
            s.r,
            u_dot,
            v_dot,
            r_dot,
        ]
    }

    fn rk4(&self, s: &RigidState, act: &ActuatorState, h: f64) -> RigidState {
        let offset = |k: &[f64; 6], scale: f64| RigidState {
            x: s.x + scale * k[0],
            y: s.y + scale * k[1],
            psi: s.psi + scale * k[2],
            u: s.u + scale * k[3],
            v: s.v + scale * k[4],
            r: s.r + scale * k[5],
        };
        let k1 = self.derivative(s, act);
        let k2 = self.derivative(&offset(&k1, 0.5 * h), act);
        let k3 = self.derivative(&offset(&k2, 0.5 * h), act);
        let k4 = self.derivative(&offset(&k3, h), act);
        let w = h / 6.0;
        let comb = |i: usize| w * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        RigidState {
            x: s.x + comb(0),
            y: s.y + comb(1),
            psi: s.psi + comb(2),
            u: s.u + comb(3),
            v: s.v + comb(4),
            r: s.r + comb(5),
        }
    }

    fn check_sane(&self, s: &RigidState) -> Result<()> {
        let b = &self.integrator;
        if !s.is_finite() {
            return Err(DynamicsError::IntegratorDiverged(format!("non-finite state {s:?}")));
        }
        if s.u.abs() > b.u_max || s.v.abs() > b.u_max || s.r.abs() > b.r_max {
            return Err(DynamicsError::IntegratorDiverged(format!(
                "velocity out of bounds (u = {}, v = {}, r = {})",
                s.u, s.v, s.r
            )));
        }
        Ok(())
    }

    /// Advance one control step. The rudder is rate limited once per control
    /// step and held with the propeller rate over all RK4 substeps.
    pub fn step(
        &self,
        state: &RigidState,
        act: &ActuatorState,
        cmd: Action,
        dt: f64,
    ) -> Result<(RigidState, ActuatorState)> {
        let substeps = self.integrator.substeps_for(dt)?;
        let h = dt / substeps as f64;
        self.step_with(state, act, cmd, dt, substeps, h)
    }

    /// Like [`ShipModel::step`] but with an explicit substep size.
    pub fn step_with_substep(
        &self,
        state: &RigidState,
        act: &ActuatorState,
        cmd: Action,
        dt: f64,
        h: f64,
    ) -> Result<(RigidState, ActuatorState)> {
        let cfg = IntegratorConfig { substep: h, ..self.integrator.clone() };
        let substeps = cfg.substeps_for(dt)?;
        self.step_with(state, act, cmd, dt, substeps, dt / substeps as f64)
    }

    fn step_with(
        &self,
        state: &RigidState,
        act: &ActuatorState,
        cmd: Action,
        dt: f64,
        substeps: usize,
        h: f64,
    ) -> Result<(RigidState, ActuatorState)> {
        if !state.is_finite() {
            return Err(DynamicsError::NonFinite("state"));
        }
        super::check_finite(cmd.delta_cmd, "delta_cmd")?;
        super::check_finite(cmd.n_cmd, "n_cmd")?;
        let cmd = self.limits.clamp(cmd);
        let next_act = ActuatorState {
            delta: self.limits.rate_limit(act.delta, cmd.delta_cmd, dt)?,
            n: cmd.n_cmd,
        };
        let mut s = *state;
        for _ in 0..substeps {
            s = self.rk4(&s, &next_act, h);
            self.check_sane(&s)?;
        }
        Ok((s, next_act))
    }

    /// Steady straight-ahead speed at propeller rate `n` with the rudder
    /// amidships, found by bisection on the surge force balance.
    pub fn self_propulsion_speed(&self, n: f64) -> f64 {
        let surge = |u: f64| {
            let s = RigidState { u, ..Default::default() };
            hull_forces(&s, &self.geometry, &self.coeffs).x
                + propeller_thrust(u, n, &self.geometry, &self.coeffs)
        };
        let (mut lo, mut hi) = (0.0, self.integrator.u_max);
        if surge(lo) <= 0.0 {
            return 0.0;
        }
        if surge(hi) > 0.0 {
            return hi;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if surge(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Advance the ship one control step of `dt` seconds.
pub fn step_dynamics(
    model: &ShipModel,
    state: &RigidState,
    act: &ActuatorState,
    cmd: Action,
    dt: f64,
) -> Result<(RigidState, ActuatorState)> {
    model.step(state, act, cmd, dt)
}
