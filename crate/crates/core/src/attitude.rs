//! Rigid-spacecraft attitude regulation.
//!
//! Two controller families drive the body to the zero attitude at rest:
//!
//! * LQR on the 3-2-1 Euler-angle model, with the gain from the CARE of the
//!   model linearized about the origin and applied to the nonlinear dynamics;
//! * the quaternion feedback `U = −K_p·q_e − K_d·ω`.
//!
//! Both objectives integrate `½∫UᵀU dt` as an extra state until the angles
//! and rates fall below the convergence thresholds.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::matrixkit::{cross, solve_care, Mat, MatrixError};
use crate::pdparam::{assemble, PenaltyParams};
use crate::propagate::{
    integrate, Direction, Dynamics, Evaluation, EventSpec, IntegratorConfig, Outcome, PropagateError, Trajectory,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Maneuver {
    Detumbling,
    RestToRest,
}

/// Initial body rates of the detumbling maneuver, rad/s.
///
/// The reference cost values are reproduced with these rates; the printed
/// value of 0.1 rad/s per axis is available as [`PRINTED_DETUMBLING_RATES`].
pub const DETUMBLING_RATES: [f64; 3] = [0.01, -0.01, 0.01];
pub const PRINTED_DETUMBLING_RATES: [f64; 3] = [0.1, -0.1, 0.1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttScenario {
    /// Principal moments of inertia, kg·m².
    pub inertia: [f64; 3],
    /// Initial (ψ, θ, φ) in degrees.
    pub euler0_deg: [f64; 3],
    /// Initial (p, q, r) in rad/s.
    pub rates0: [f64; 3],
    pub angle_tol: f64,
    pub rate_tol: f64,
    pub max_time: f64,
    pub tol: f64,
    /// Normalize the quaternion before computing feedback.
    pub renormalize: bool,
    pub max_steps: usize,
}

impl Default for AttScenario {
    fn default() -> Self {
        Self::new(Maneuver::Detumbling)
    }
}

impl AttScenario {
    pub fn new(maneuver: Maneuver) -> Self {
        Self {
            inertia: [10.0, 15.0, 20.0],
            euler0_deg: [60.0, 80.0, -60.0],
            rates0: match maneuver {
                Maneuver::Detumbling => DETUMBLING_RATES,
                Maneuver::RestToRest => [0.0; 3],
            },
            angle_tol: 1e-3,
            rate_tol: 1e-4,
            max_time: 100.0,
            tol: 1e-8,
            renormalize: true,
            max_steps: 200_000,
        }
    }

    pub fn euler0(&self) -> [f64; 3] {
        self.euler0_deg.map(f64::to_radians)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.inertia.iter().any(|&j| !(j > 0.0)) {
            return Err("inertia entries must be positive".into());
        }
        if !(self.angle_tol > 0.0 && self.rate_tol > 0.0 && self.max_time > 0.0 && self.tol > 0.0) {
            return Err("tolerances and max_time must be positive".into());
        }
        Ok(())
    }

    /// Initial state `[ψ, θ, φ, p, q, r]`.
    pub fn euler_state0(&self) -> [f64; 6] {
        let e = self.euler0();
        [e[0], e[1], e[2], self.rates0[0], self.rates0[1], self.rates0[2]]
    }

    /// Initial state `[q₀, q₁, q₂, q₃, p, q, r]`.
    pub fn quat_state0(&self) -> [f64; 7] {
        let q = quat_from_euler321(self.euler0());
        [q[0], q[1], q[2], q[3], self.rates0[0], self.rates0[1], self.rates0[2]]
    }
}

/// Euler's rotational equations `I⁻¹(U − ω × Iω)`.
pub fn body_rate_derivative(inertia: &[f64; 3], w: &[f64], u: &[f64; 3]) -> [f64; 3] {
    let w = [w[0], w[1], w[2]];
    let iw = [inertia[0] * w[0], inertia[1] * w[1], inertia[2] * w[2]];
    let g = cross(&w, &iw);
    [
        (u[0] - g[0]) / inertia[0],
        (u[1] - g[1]) / inertia[1],
        (u[2] - g[2]) / inertia[2],
    ]
}

/// 3-2-1 kinematics: `(ψ̇, θ̇, φ̇)` from body rates.
pub fn euler321_rates(psi_theta_phi: &[f64], w: &[f64]) -> [f64; 3] {
    let (theta, phi) = (psi_theta_phi[1], psi_theta_phi[2]);
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let (p, q, r) = (w[0], w[1], w[2]);
    [
        (sp * q + cp * r) / ct,
        cp * q - sp * r,
        p + (sp * st * q + cp * st * r) / ct,
    ]
}

/// Scalar-first unit quaternion of a 3-2-1 (ψ, θ, φ) rotation.
pub fn quat_from_euler321(e: [f64; 3]) -> [f64; 4] {
    let (s1, c1) = (0.5 * e[0]).sin_cos();
    let (s2, c2) = (0.5 * e[1]).sin_cos();
    let (s3, c3) = (0.5 * e[2]).sin_cos();
    [
        c3 * c2 * c1 + s3 * s2 * s1,
        s3 * c2 * c1 - c3 * s2 * s1,
        c3 * s2 * c1 + s3 * c2 * s1,
        c3 * c2 * s1 - s3 * s2 * c1,
    ]
}

/// 3-2-1 (ψ, θ, φ) of a scalar-first quaternion.
pub fn euler321_from_quat(q: &[f64]) -> [f64; 3] {
    let (q0, q1, q2, q3) = (q[0], q[1], q[2], q[3]);
    let psi = (2.0 * (q1 * q2 + q0 * q3)).atan2(q0 * q0 + q1 * q1 - q2 * q2 - q3 * q3);
    let theta = (-2.0 * (q1 * q3 - q0 * q2)).clamp(-1.0, 1.0).asin();
    let phi = (2.0 * (q2 * q3 + q0 * q1)).atan2(q0 * q0 - q1 * q1 - q2 * q2 + q3 * q3);
    [psi, theta, phi]
}

/// `½Ω(ω)q` for a scalar-first quaternion.
pub fn quat_rates(q: &[f64], w: &[f64]) -> [f64; 4] {
    let (p, qq, r) = (w[0], w[1], w[2]);
    [
        0.5 * (-q[1] * p - q[2] * qq - q[3] * r),
        0.5 * (q[0] * p - q[3] * qq + q[2] * r),
        0.5 * (q[3] * p + q[0] * qq - q[1] * r),
        0.5 * (-q[2] * p + q[1] * qq + q[0] * r),
    ]
}

/// Vector part of the error quaternion relative to the identity attitude,
/// sign-selected so the scalar part is nonnegative.
pub fn quat_error(q: &[f64]) -> [f64; 3] {
    let s = if q[0] < 0.0 { -1.0 } else { 1.0 };
    [s * q[1], s * q[2], s * q[3]]
}

/// Linearization of the Euler-angle model about the origin.
pub fn linearized_euler(inertia: &[f64; 3]) -> (Mat, Mat) {
    let mut a = Mat::zeros(6, 6);
    // ψ̇ = r, θ̇ = q, φ̇ = p
    a[(0, 5)] = 1.0;
    a[(1, 4)] = 1.0;
    a[(2, 3)] = 1.0;
    let mut b = Mat::zeros(6, 3);
    for k in 0..3 {
        b[(3 + k, k)] = 1.0 / inertia[k];
    }
    (a, b)
}

pub fn lqr_gain(qmat: &Mat, rmat: &Mat, inertia: &[f64; 3]) -> Result<Mat, MatrixError> {
    let (a, b) = linearized_euler(inertia);
    Ok(solve_care(&a, &b, qmat, rmat)?.gain)
}

fn converged_event<'a>(
    scenario: &AttScenario,
    angles: impl Fn(&[f64]) -> [f64; 3] + 'a,
    rate_offset: usize,
) -> EventSpec<'a> {
    let (at, rt) = (scenario.angle_tol, scenario.rate_tol);
    EventSpec::terminal(Direction::Falling, move |_t, x: &[f64]| {
        let ang = angles(x).iter().fold(0.0f64, |m, v| m.max(v.abs())) / at;
        let rate = x[rate_offset..rate_offset + 3]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            / rt;
        // strictly below both thresholds ⇔ g < 0
        ang.max(rate) - 1.0
    })
}

pub struct EulerLqrDynamics<'a> {
    pub gain: &'a Mat,
    pub inertia: [f64; 3],
}

impl Dynamics for EulerLqrDynamics<'_> {
    type Control = [f64; 3];

    fn control(&self, _t: f64, x: &[f64]) -> [f64; 3] {
        let u = self.gain.mul_vec(&x[..6]);
        [-u[0], -u[1], -u[2]]
    }

    fn rhs(&self, _t: f64, x: &[f64], u: &[f64; 3], dx: &mut [f64]) {
        let e = euler321_rates(&x[..3], &x[3..6]);
        let w = body_rate_derivative(&self.inertia, &x[3..6], u);
        dx[..3].copy_from_slice(&e);
        dx[3..6].copy_from_slice(&w);
        dx[6] = 0.5 * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
    }
}

pub struct QuatLyapDynamics<'a> {
    pub kp: &'a Mat,
    pub kd: &'a Mat,
    pub inertia: [f64; 3],
    pub renormalize: bool,
}

pub fn quat_lyap_control(x: &[f64], kp: &Mat, kd: &Mat) -> [f64; 3] {
    let qe = quat_error(&x[..4]);
    let a = kp.mul_vec(&qe);
    let b = kd.mul_vec(&x[4..7]);
    [-a[0] - b[0], -a[1] - b[1], -a[2] - b[2]]
}

impl Dynamics for QuatLyapDynamics<'_> {
    type Control = [f64; 3];

    fn control(&self, _t: f64, x: &[f64]) -> [f64; 3] {
        if self.renormalize {
            let n = x[..4].iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut y = [0.0; 7];
            for i in 0..4 {
                y[i] = x[i] / n;
            }
            y[4..7].copy_from_slice(&x[4..7]);
            quat_lyap_control(&y, self.kp, self.kd)
        } else {
            quat_lyap_control(x, self.kp, self.kd)
        }
    }

    fn rhs(&self, _t: f64, x: &[f64], u: &[f64; 3], dx: &mut [f64]) {
        let qd = quat_rates(&x[..4], &x[4..7]);
        let w = body_rate_derivative(&self.inertia, &x[4..7], u);
        dx[..4].copy_from_slice(&qd);
        dx[4..7].copy_from_slice(&w);
        dx[7] = 0.5 * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
    }
}

fn already_converged(angles: &[f64], rates: &[f64], s: &AttScenario) -> bool {
    angles.iter().all(|a| a.abs() < s.angle_tol) && rates.iter().all(|r| r.abs() < s.rate_tol)
}

/// Nonlinear Euler-angle propagation under `U = −K·x`.
/// State `[ψ, θ, φ, p, q, r, energy]`.
pub fn simulate_lqr(gain: &Mat, scenario: &AttScenario, record: bool) -> Result<Trajectory<[f64; 3]>, PropagateError> {
    let cfg = IntegratorConfig {
        record,
        max_steps: scenario.max_steps,
        ..IntegratorConfig::with_tol(scenario.tol, scenario.max_time)
    };
    let s0 = scenario.euler_state0();
    let mut x0 = [0.0; 7];
    x0[..6].copy_from_slice(&s0);
    let dynamics = EulerLqrDynamics {
        gain,
        inertia: scenario.inertia,
    };
    let events = [
        converged_event(scenario, |x| [x[0], x[1], x[2]], 3),
        // kinematic singularity guard
        EventSpec::terminal(Direction::Falling, |_t, x: &[f64]| FRAC_PI_2 - 1e-6 - x[1].abs()),
    ];
    if already_converged(&s0[..3], &s0[3..], scenario) {
        return Ok(stationary(x0.to_vec()));
    }
    integrate(&dynamics, 0.0, &x0, &cfg, &events)
}

/// Quaternion propagation under the Lyapunov feedback.
/// State `[q₀, q₁, q₂, q₃, p, q, r, energy]`.
pub fn simulate_quat(
    kp: &Mat,
    kd: &Mat,
    scenario: &AttScenario,
    record: bool,
) -> Result<Trajectory<[f64; 3]>, PropagateError> {
    let cfg = IntegratorConfig {
        record,
        max_steps: scenario.max_steps,
        ..IntegratorConfig::with_tol(scenario.tol, scenario.max_time)
    };
    let s0 = scenario.quat_state0();
    let mut x0 = [0.0; 8];
    x0[..7].copy_from_slice(&s0);
    let dynamics = QuatLyapDynamics {
        kp,
        kd,
        inertia: scenario.inertia,
        renormalize: scenario.renormalize,
    };
    let events = [converged_event(scenario, |x| euler321_from_quat(&x[..4]), 4)];
    if already_converged(&euler321_from_quat(&s0[..4]), &s0[4..], scenario) {
        return Ok(stationary(x0.to_vec()));
    }
    integrate(&dynamics, 0.0, &x0, &cfg, &events)
}

fn stationary(x0: Vec<f64>) -> Trajectory<[f64; 3]> {
    Trajectory {
        times: vec![0.0],
        states: vec![x0.clone()],
        controls: vec![[0.0; 3]],
        final_time: 0.0,
        final_state: x0,
        outcome: Outcome::Event { index: 0, t: 0.0 },
        event_log: Vec::new(),
        accepted_steps: 0,
        rejected_steps: 0,
    }
}

/// Scores a run; the timeout residual is the norm of `x[first..energy_idx]`.
fn evaluate(tr: Result<Trajectory<[f64; 3]>, PropagateError>, first: usize, energy_idx: usize) -> Evaluation {
    match tr {
        Ok(tr) => match tr.outcome {
            Outcome::Event { index: 0, t } => Evaluation::converged(tr.final_state[energy_idx], t),
            Outcome::Event { .. } => Evaluation::invalid("Euler-angle kinematic singularity reached"),
            Outcome::TimeoutWithoutEvent => {
                let residual = tr.final_state[first..energy_idx]
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt();
                Evaluation::timeout(residual, tr.final_time)
            }
        },
        Err(e) => Evaluation::invalid(e.to_string()),
    }
}

/// Control energy of the LQR controller on the nonlinear Euler-angle model.
pub fn lqr_objective(qmat: &Mat, rmat: &Mat, scenario: &AttScenario) -> Evaluation {
    let gain = match lqr_gain(qmat, rmat, &scenario.inertia) {
        Ok(g) => g,
        Err(e) => return Evaluation::invalid(e.to_string()),
    };
    evaluate(simulate_lqr(&gain, scenario, false), 0, 6)
}

/// Control energy of the quaternion Lyapunov controller.
pub fn quat_lyap_objective(kp: &Mat, kd: &Mat, scenario: &AttScenario) -> Evaluation {
    if !kp.is_positive_definite() || !kd.is_positive_definite() {
        return Evaluation::invalid("gain matrix not positive definite");
    }
    evaluate(simulate_quat(kp, kd, scenario, false), 1, 7)
}

pub fn lqr_objective_from_params(q: &PenaltyParams, r: &PenaltyParams, scenario: &AttScenario) -> Evaluation {
    match (assemble(q), assemble(r)) {
        (Ok(q), Ok(r)) => lqr_objective(&q, &r, scenario),
        (Err(e), _) | (_, Err(e)) => Evaluation::invalid(e.to_string()),
    }
}

pub fn quat_objective_from_params(kp: &PenaltyParams, kd: &PenaltyParams, scenario: &AttScenario) -> Evaluation {
    match (assemble(kp), assemble(kd)) {
        (Ok(kp), Ok(kd)) => quat_lyap_objective(&kp, &kd, scenario),
        (Err(e), _) | (_, Err(e)) => Evaluation::invalid(e.to_string()),
    }
}
