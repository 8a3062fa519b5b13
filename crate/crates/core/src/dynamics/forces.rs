use std::f64::consts::PI;
use std::ops::Add;

use super::{check_finite, ActuatorState, HydroCoeffs, Result, RigidState, ShipGeometry};

/// Surge force, sway force and yaw moment in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Forces {
    pub x: f64,
    pub y: f64,
    pub n: f64,
}

impl Add for Forces {
    type Output = Forces;

    fn add(self, rhs: Forces) -> Forces {
        Forces {
            x: self.x + rhs.x,
            y: self.y + rhs.y,
            n: self.n + rhs.n,
        }
    }
}

/// Open-water thrust coefficient `K_T(J)`.
pub fn thrust_coefficient(coeffs: &HydroCoeffs, j: f64) -> f64 {
    coeffs.kt_0 + j * (coeffs.kt_1 + j * coeffs.kt_2)
}

/// Upper end of the advance-ratio range: the smallest positive root of
/// `K_T`, or infinity when the polynomial stays positive.
pub fn advance_ratio_limit(coeffs: &HydroCoeffs) -> f64 {
    let (a, b, c) = (coeffs.kt_2, coeffs.kt_1, coeffs.kt_0);
    if a == 0.0 {
        return if b < 0.0 { -c / b } else { f64::INFINITY };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let sq = disc.sqrt();
    [(-b + sq) / (2.0 * a), (-b - sq) / (2.0 * a)]
        .into_iter()
        .filter(|j| *j > 0.0)
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn propeller_thrust(u: f64, n: f64, geom: &ShipGeometry, coeffs: &HydroCoeffs) -> f64 {
    let d = geom.prop_diameter;
    let d4 = d * d * d * d;
    let rho = coeffs.water_density;
    if n > coeffs.n_deadband {
        let j = ((1.0 - coeffs.wake_fraction) * u / (n * d)).clamp(0.0, advance_ratio_limit(coeffs));
        (1.0 - coeffs.thrust_deduction) * rho * n * n * d4 * thrust_coefficient(coeffs, j)
    } else if n < -coeffs.n_deadband {
        -coeffs.astern_efficiency * rho * n * n * d4 * coeffs.kt_0
    } else {
        0.0
    }
}

/// Effective propeller surge force `X_P` in newtons.
///
/// Ahead: `(1 - t_p) ρ n² D⁴ K_T(J)` with `J = (1 - w) u / (n D)` clamped to
/// `[0, J_max]`. Astern: bollard thrust scaled by the astern efficiency.
/// Inside the dead band: zero.
pub fn propeller_surge_force(
    u: f64,
    n: f64,
    geom: &ShipGeometry,
    coeffs: &HydroCoeffs,
) -> Result<f64> {
    check_finite(u, "u")?;
    check_finite(n, "n")?;
    Ok(propeller_thrust(u, n, geom, coeffs))
}

/// Bare-hull forces. The nondimensionalizing speed includes the yaw-induced
/// speed of the ship's ends so the polynomial stays bounded at low speed.
pub fn hull_forces(state: &RigidState, geom: &ShipGeometry, coeffs: &HydroCoeffs) -> Forces {
    let c = coeffs;
    let l = geom.length_pp;
    let half = 0.5 * c.water_density * l * geom.draft;
    let (u, v) = (state.u, state.v);
    let rl = state.r * l;
    let speed = (u * u + v * v + 0.25 * rl * rl).sqrt();

    let (cubic_y, cubic_n) = if speed > 0.0 {
        let y = (c.y_vvv * v * v * v + c.y_vvr * v * v * rl + c.y_vrr * v * rl * rl + c.y_rrr * rl * rl * rl)
            / speed;
        let n = (c.n_vvv * v * v * v + c.n_vvr * v * v * rl + c.n_vrr * v * rl * rl + c.n_rrr * rl * rl * rl)
            / speed;
        (y, n)
    } else {
        (0.0, 0.0)
    };

    Forces {
        x: half * (c.x_uu * u * u.abs() + c.x_vr * v * rl),
        y: half * (c.y_v * v * speed + c.y_r * rl * speed + cubic_y),
        n: half * l * (c.n_v * v * speed + c.n_r * rl * speed + cubic_n),
    }
}

/// Rudder forces from the normal-force model, including the propeller
/// slipstream at the rudder.
pub fn rudder_forces(
    state: &RigidState,
    act: &ActuatorState,
    geom: &ShipGeometry,
    coeffs: &HydroCoeffs,
) -> Forces {
    let c = coeffs;
    let l = geom.length_pp;
    let d = geom.prop_diameter;
    let u_p = (1.0 - c.wake_fraction) * state.u;
    let n = act.n;

    let u_r = if n > c.n_deadband {
        let j = (u_p / (n * d)).clamp(0.0, advance_ratio_limit(c));
        let kt = thrust_coefficient(c, j);
        let ahead = u_p.max(0.0);
        let slipstream = (ahead * ahead + 8.0 * kt * n * n * d * d / PI).sqrt();
        let accelerated = ahead + c.kappa * (slipstream - ahead);
        let eta = (d / geom.rudder_height).min(1.0);
        c.epsilon * (eta * accelerated * accelerated + (1.0 - eta) * u_p * u_p).sqrt()
    } else {
        c.epsilon * u_p
    };
    let v_r = c.gamma_r * (-state.v - c.l_r * l * state.r);

    let speed_sq = u_r * u_r + v_r * v_r;
    if speed_sq == 0.0 {
        return Forces::default();
    }
    let delta = act.delta.to_radians();
    let alpha = delta - v_r.atan2(u_r.abs());
    let direction = if u_r < 0.0 { -1.0 } else { 1.0 };
    let normal = direction
        * 0.5
        * c.water_density
        * geom.rudder_area()
        * geom.rudder_lift_slope()
        * speed_sq
        * alpha.sin();

    let (sin_d, cos_d) = delta.sin_cos();
    Forces {
        x: -(1.0 - c.t_r) * normal * sin_d,
        y: -(1.0 + c.a_h) * normal * cos_d,
        n: -(c.x_r + c.a_h * c.x_h) * l * normal * cos_d,
    }
}

/// Hull plus rudder forces; the propeller is handled by [`propeller_surge_force`].
pub fn hull_and_rudder_forces(
    state: &RigidState,
    act: &ActuatorState,
    geom: &ShipGeometry,
    coeffs: &HydroCoeffs,
) -> Result<Forces> {
    if !state.is_finite() {
        return Err(super::DynamicsError::NonFinite("state"));
    }
    check_finite(act.delta, "delta")?;
    check_finite(act.n, "n")?;
    Ok(hull_forces(state, geom, coeffs) + rudder_forces(state, act, geom, coeffs))
}
