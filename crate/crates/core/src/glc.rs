//! Generic Lyapunov steering for low-thrust transfers.
//!
//! Each case defines an error vector `w(r, v)` that vanishes on the target
//! orbit. With `V = ½wᵀKw` the thrust direction is the normalized steepest
//! descent `α̂ = −∂V/∂v / ‖∂V/∂v‖`, and the spacecraft thrusts at full
//! throttle until `w` is inside the convergence box. The gradient is exact:
//! `w` is evaluated on dual numbers seeded with the velocity.

use std::cell::Cell;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::astro::{
    coe_from_state, hvec_evec, inclination, norm3, raan, rotate_x, state_from_coe, AstroError, OrbitalElements,
    TransferCase, TransferProblem,
};
use crate::dual::{Dual, Scalar};
use crate::matrixkit::Mat;
use crate::pdparam::{assemble, PenaltyParams};
use crate::propagate::{
    integrate, Direction, Dynamics, Evaluation, EventSpec, IntegratorConfig, Outcome, PropagateError, Trajectory,
};

/// Below this gradient norm the thrust direction is undefined.
pub const MIN_GRADIENT: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GlcError {
    #[error("penalty matrix is {got}x{got}, case {case} needs {need}x{need}")]
    DimensionMismatch {
        case: &'static str,
        need: usize,
        got: usize,
    },
    #[error("gradient of V with respect to velocity vanishes")]
    ZeroGradient,
    #[error(transparent)]
    Astro(#[from] AstroError),
}

/// Target quantities for one case's error vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSpec {
    pub case: TransferCase,
    pub h_t: f64,
    pub e_t: f64,
    pub i_t: f64,
    pub raan_t: f64,
    pub hvec_t: [f64; 3],
    pub evec_t: [f64; 3],
}

impl ErrorSpec {
    /// Targets from a transfer problem (canonical units, `μ = 1`).
    pub fn new(problem: &TransferProblem) -> Result<Self, AstroError> {
        let t = problem.target;
        let coe = t.as_elements();
        let (r, v) = state_from_coe(&coe, 1.0)?;
        let (hvec_t, evec_t) = hvec_evec(&r, &v, 1.0);
        let needs = |x: Option<f64>, name: &str| {
            x.ok_or_else(|| {
                AstroError::UnsupportedOrbit(format!("case {} needs a target {name}", problem.case.label()))
            })
        };
        let (i_t, raan_t) = match problem.case {
            TransferCase::A | TransferCase::C => (0.0, 0.0),
            TransferCase::B => (needs(t.i, "inclination")?, 0.0),
            TransferCase::D => (needs(t.i, "inclination")?, needs(t.raan, "node")?.rem_euclid(TAU)),
            TransferCase::E | TransferCase::EStar => {
                needs(t.i, "inclination")?;
                needs(t.raan, "node")?;
                needs(t.argp, "argument of periapsis")?;
                (coe.i, coe.raan)
            }
        };
        Ok(Self {
            case: problem.case,
            h_t: coe.semi_latus_rectum().sqrt(),
            e_t: t.e,
            i_t,
            raan_t,
            hvec_t,
            evec_t,
        })
    }

    pub fn dim(&self) -> usize {
        match self.case {
            TransferCase::A | TransferCase::C => 2,
            TransferCase::B => 3,
            TransferCase::D => 4,
            TransferCase::E | TransferCase::EStar => 6,
        }
    }
}

/// Error vector; only the first `spec.dim()` entries are meaningful.
pub fn error_vector<S: Scalar>(r: &[S; 3], v: &[S; 3], spec: &ErrorSpec) -> [S; 6] {
    let (h, e) = hvec_evec(r, v, 1.0);
    let z = S::cst(0.0);
    match spec.case {
        TransferCase::E | TransferCase::EStar => [
            h[0] - spec.hvec_t[0],
            h[1] - spec.hvec_t[1],
            h[2] - spec.hvec_t[2],
            e[0] - spec.evec_t[0],
            e[1] - spec.evec_t[1],
            e[2] - spec.evec_t[2],
        ],
        case => {
            let hw = norm3(&h) - spec.h_t;
            let ew = norm3(&e) - spec.e_t;
            match case {
                TransferCase::B => [hw, ew, inclination(&h) - spec.i_t, z, z, z],
                TransferCase::D => [hw, ew, inclination(&h) - spec.i_t, raan(&h) - spec.raan_t, z, z],
                _ => [hw, ew, z, z, z, z],
            }
        }
    }
}

fn real_error(r: &[f64; 3], v: &[f64; 3], spec: &ErrorSpec) -> Vec<f64> {
    error_vector(r, v, spec)[..spec.dim()].to_vec()
}

/// `V = ½wᵀKw`.
pub fn lyapunov(r: &[f64; 3], v: &[f64; 3], k: &Mat, spec: &ErrorSpec) -> f64 {
    let w = real_error(r, v, spec);
    0.5 * k.bilinear(&w, &w)
}

/// `∂V/∂v` by forward-mode differentiation of `w`.
pub fn lyapunov_velocity_gradient(r: &[f64; 3], v: &[f64; 3], k: &Mat, spec: &ErrorSpec) -> [f64; 3] {
    let rd = r.map(Dual::<3>::constant);
    let vd = Dual::<3>::variables(*v);
    let w = error_vector(&rd, &vd, spec);
    let n = spec.dim();
    let mut g = [0.0; 3];
    for a in 0..n {
        for b in 0..n {
            // ∂(½wᵀKw) = (Kw)ᵀ ∂w
            let kab = k[(a, b)];
            for (j, gj) in g.iter_mut().enumerate() {
                *gj += kab * w[b].re * w[a].eps[j];
            }
        }
    }
    g
}

/// Analytic `∂[h⃗; e⃗]/∂v` (6×3), used to cross-check the dual-number path.
pub fn analytic_he_jacobian(r: &[f64; 3], v: &[f64; 3], mu: f64) -> [[f64; 3]; 6] {
    let rv = r[0] * v[0] + r[1] * v[1] + r[2] * v[2];
    let mut jac = [[0.0; 3]; 6];
    // h = r × v  ⇒  ∂h/∂v = [r]×
    jac[0] = [0.0, -r[2], r[1]];
    jac[1] = [r[2], 0.0, -r[0]];
    jac[2] = [-r[1], r[0], 0.0];
    for i in 0..3 {
        for j in 0..3 {
            let d = if i == j { rv } else { 0.0 };
            jac[3 + i][j] = (2.0 * v[j] * r[i] - r[j] * v[i] - d) / mu;
        }
    }
    jac
}

/// Steepest-descent thrust direction.
pub fn thrust_direction(r: &[f64; 3], v: &[f64; 3], k: &Mat, spec: &ErrorSpec) -> Result<[f64; 3], GlcError> {
    let g = lyapunov_velocity_gradient(r, v, k, spec);
    let n = norm3(&g);
    if !(n > MIN_GRADIENT) {
        return Err(GlcError::ZeroGradient);
    }
    Ok(g.map(|x| -x / n))
}

/// Convergence box and integration tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlcSettings {
    /// Per-component bound on `|w|` that ends the transfer.
    pub event_tol: f64,
    /// Absolute and relative integration tolerance.
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for GlcSettings {
    fn default() -> Self {
        Self {
            event_tol: 1e-3,
            tol: 1e-10,
            max_steps: 250_000,
        }
    }
}

/// Cartesian two-body motion with full-throttle Lyapunov steering.
/// State `[r, v, m]` in DU, DU/TU and kg.
pub struct GlcDynamics<'a> {
    pub k: &'a Mat,
    pub spec: ErrorSpec,
    pub problem: TransferProblem,
    zero_gradient: Cell<usize>,
}

impl<'a> GlcDynamics<'a> {
    pub fn new(k: &'a Mat, spec: ErrorSpec, problem: TransferProblem) -> Self {
        Self {
            k,
            spec,
            problem,
            zero_gradient: Cell::new(0),
        }
    }

    /// Control samples where the direction was undefined and the craft coasted.
    pub fn zero_gradient_samples(&self) -> usize {
        self.zero_gradient.get()
    }
}

fn split(x: &[f64]) -> ([f64; 3], [f64; 3]) {
    ([x[0], x[1], x[2]], [x[3], x[4], x[5]])
}

impl Dynamics for GlcDynamics<'_> {
    /// Thrust unit vector; zero while coasting.
    type Control = [f64; 3];

    fn control(&self, _t: f64, x: &[f64]) -> [f64; 3] {
        let (r, v) = split(x);
        match thrust_direction(&r, &v, self.k, &self.spec) {
            Ok(a) => a,
            Err(_) => {
                self.zero_gradient.set(self.zero_gradient.get() + 1);
                [0.0; 3]
            }
        }
    }

    fn rhs(&self, _t: f64, x: &[f64], u: &[f64; 3], dx: &mut [f64]) {
        let (r, v) = split(x);
        let rn = norm3(&r);
        let mu_r3 = 1.0 / (rn * rn * rn);
        let thrusting = u.iter().any(|c| *c != 0.0);
        let at = if thrusting {
            self.problem.thrust.accel(x[6], &self.problem.frame)
        } else {
            0.0
        };
        for j in 0..3 {
            dx[j] = v[j];
            dx[3 + j] = -mu_r3 * r[j] + at * u[j];
        }
        dx[6] = if thrusting {
            -self.problem.thrust.mass_flow(&self.problem.frame)
        } else {
            0.0
        };
    }
}

fn check_dim(k: &Mat, spec: &ErrorSpec) -> Result<(), GlcError> {
    let need = spec.dim();
    if k.rows() != need || k.cols() != need {
        return Err(GlcError::DimensionMismatch {
            case: spec.case.label(),
            need,
            got: k.rows(),
        });
    }
    Ok(())
}

/// Propagates to the convergence box or the problem's time cap.
pub fn simulate(
    k: &Mat,
    problem: &TransferProblem,
    settings: &GlcSettings,
    record: bool,
) -> Result<(Trajectory<[f64; 3]>, usize), GlcError> {
    let spec = ErrorSpec::new(problem)?;
    check_dim(k, &spec)?;
    let x0 = problem.initial_state()?.to_array();
    let dynamics = GlcDynamics::new(k, spec, *problem);
    let cfg = IntegratorConfig {
        record,
        max_steps: settings.max_steps,
        ..IntegratorConfig::with_tol(settings.tol, problem.max_time_tu())
    };
    let box_tol = settings.event_tol;
    let event = EventSpec::terminal(Direction::Falling, move |_t, x: &[f64]| {
        let (r, v) = split(x);
        let w = real_error(&r, &v, &spec);
        w.iter().fold(0.0f64, |m, c| m.max(c.abs())) / box_tol - 1.0
    });
    let tr = integrate(&dynamics, 0.0, &x0, &cfg, &[event])
        .map_err(|e: PropagateError| AstroError::UnsupportedOrbit(format!("integration failed: {e}")))?;
    Ok((tr, dynamics.zero_gradient_samples()))
}

/// Minimum-time objective: time of flight in days.
pub fn glc_objective(k: &Mat, problem: &TransferProblem, settings: &GlcSettings) -> Evaluation {
    if !k.is_positive_definite() {
        return Evaluation::invalid("penalty matrix not positive definite");
    }
    match simulate(k, problem, settings, false) {
        Ok((tr, zero)) => {
            if zero > 0 {
                log::debug!(
                    "glc case {}: coasted on {zero} zero-gradient samples",
                    problem.case.label()
                );
            }
            let days = problem.frame.tu_to_days(tr.final_time);
            match tr.outcome {
                Outcome::Event { .. } => Evaluation::converged(days, days),
                Outcome::TimeoutWithoutEvent => {
                    let spec = ErrorSpec::new(problem).expect("validated in simulate");
                    let (r, v) = split(&tr.final_state);
                    let w = real_error(&r, &v, &spec);
                    let residual = w.iter().map(|c| c * c).sum::<f64>().sqrt();
                    Evaluation::timeout(residual, days)
                }
            }
        }
        Err(e) => Evaluation::invalid(e.to_string()),
    }
}

pub fn objective_from_params(params: &PenaltyParams, problem: &TransferProblem, settings: &GlcSettings) -> Evaluation {
    match assemble(params) {
        Ok(k) => glc_objective(&k, problem, settings),
        Err(e) => Evaluation::invalid(e.to_string()),
    }
}

/// One output row of a GLC trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlcSample {
    pub t_days: f64,
    pub a_km: f64,
    pub e: f64,
    pub i_deg: f64,
    pub raan_deg: f64,
    pub argp_deg: f64,
    pub nu_deg: f64,
    pub mass: f64,
    pub alpha_x: f64,
    pub alpha_y: f64,
    pub alpha_z: f64,
    pub w_norm: f64,
    #[serde(rename = "V")]
    pub v: f64,
}

/// Converts a recorded trajectory to output rows.
pub fn samples(tr: &Trajectory<[f64; 3]>, k: &Mat, problem: &TransferProblem) -> Result<Vec<GlcSample>, GlcError> {
    let spec = ErrorSpec::new(problem)?;
    let f = &problem.frame;
    Ok(tr
        .times
        .iter()
        .zip(&tr.states)
        .zip(&tr.controls)
        .map(|((t, x), u)| {
            let (r, v) = split(x);
            let (coe, _): (OrbitalElements, _) = coe_from_state(&r, &v, 1.0);
            let w = real_error(&r, &v, &spec);
            GlcSample {
                t_days: f.tu_to_days(*t),
                a_km: f.du_to_km(coe.a),
                e: coe.e,
                i_deg: coe.i.to_degrees(),
                raan_deg: coe.raan.to_degrees(),
                argp_deg: coe.argp.to_degrees(),
                nu_deg: coe.nu.to_degrees(),
                mass: x[6],
                alpha_x: u[0],
                alpha_y: u[1],
                alpha_z: u[2],
                w_norm: w.iter().map(|c| c * c).sum::<f64>().sqrt(),
                v: 0.5 * k.bilinear(&w, &w),
            }
        })
        .collect())
}

/// Rotates a Case E state into the E* frame (30° about x).
pub fn to_estar_frame(r: &[f64; 3], v: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let ang = 30f64.to_radians();
    (rotate_x(r, ang), rotate_x(v, ang))
}

/// Published Case E penalty matrices (diagonal, full).
pub fn appendix_case_e() -> (Mat, Mat) {
    let k1 = Mat::from_diag(&[6.5225, 98.1494, 8.9658, 10.2037, 97.3815, 20.7142]);
    let k2 = Mat::from_rows(&[
        [39.4746, 17.5941, -2.0538, -3.3242, 0.1723, -0.3125],
        [17.5941, 68.1822, -3.7857, -6.9744, 0.1840, -0.5589],
        [-2.0538, -3.7857, 4.6930, 0.5193, 2.9905, 0.2195],
        [-3.3242, -6.9744, 0.5193, 11.5512, 0.4138, -5.6421],
        [0.1723, 0.1840, 2.9905, 0.4138, 77.1079, 1.5671],
        [-0.3125, -0.5589, 0.2195, -5.6421, 1.5671, 81.3064],
    ]);
    (k1, k2)
}
