//! Planar regulator with nonlinear drift and a quadratic control Lyapunov
//! function.
//!
//! Dynamics `ẋ = u + f(x)` with `f(x) = −[x, y]ᵀ·cos y·sin x`. The control
//! `u = −f(x) − Kx` cancels the drift, so `V = ½xᵀKx` has `V̇ = −xᵀKKx`.
//! The objective is the control energy `½∫uᵀu dt`, carried as a third state.

use serde::{Deserialize, Serialize};

use crate::matrixkit::Mat;
use crate::pdparam::{assemble, PenaltyParams};
use crate::propagate::{
    integrate, Direction, Dynamics, Evaluation, EventSpec, IntegratorConfig, Outcome, PropagateError, Trajectory,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZermeloScenario {
    pub x0: [f64; 2],
    /// Convergence radius on ‖x‖.
    pub radius: f64,
    pub max_time: f64,
    pub tol: f64,
}

impl Default for ZermeloScenario {
    fn default() -> Self {
        Self {
            x0: [-8.0, 6.0],
            radius: 1e-3,
            max_time: 100.0,
            tol: 1e-10,
        }
    }
}

pub fn drift(x: &[f64]) -> [f64; 2] {
    let c = -x[1].cos() * x[0].sin();
    [c * x[0], c * x[1]]
}

pub fn zermelo_control(x: &[f64], k: &Mat) -> [f64; 2] {
    let f = drift(x);
    let kx = k.mul_vec(&x[..2]);
    [-f[0] - kx[0], -f[1] - kx[1]]
}

pub fn lyapunov(x: &[f64], k: &Mat) -> f64 {
    0.5 * k.bilinear(&x[..2], &x[..2])
}

/// `V̇ = xᵀK(u + f)` under the control law.
pub fn lyapunov_rate(x: &[f64], k: &Mat) -> f64 {
    let u = zermelo_control(x, k);
    let f = drift(x);
    let kx = k.mul_vec(&x[..2]);
    kx[0] * (u[0] + f[0]) + kx[1] * (u[1] + f[1])
}

pub struct ZermeloDynamics<'a> {
    pub k: &'a Mat,
}

impl Dynamics for ZermeloDynamics<'_> {
    type Control = [f64; 2];

    fn control(&self, _t: f64, x: &[f64]) -> [f64; 2] {
        zermelo_control(x, self.k)
    }

    fn rhs(&self, _t: f64, x: &[f64], u: &[f64; 2], dx: &mut [f64]) {
        let f = drift(x);
        dx[0] = u[0] + f[0];
        dx[1] = u[1] + f[1];
        dx[2] = 0.5 * (u[0] * u[0] + u[1] * u[1]);
    }
}

/// Propagates `[x, y, energy]` to the convergence event or the time cap.
pub fn simulate(k: &Mat, scenario: &ZermeloScenario, record: bool) -> Result<Trajectory<[f64; 2]>, PropagateError> {
    let cfg = IntegratorConfig {
        record,
        ..IntegratorConfig::with_tol(scenario.tol, scenario.max_time)
    };
    let radius = scenario.radius;
    let ev = EventSpec::terminal(Direction::Falling, move |_t, x: &[f64]| x[0].hypot(x[1]) - radius);
    let x0 = [scenario.x0[0], scenario.x0[1], 0.0];
    if x0[0].hypot(x0[1]) <= radius {
        let mut tr = integrate(
            &ZermeloDynamics { k },
            0.0,
            &x0,
            &IntegratorConfig { max_time: 1e-12, ..cfg },
            &[],
        )?;
        tr.outcome = Outcome::Event { index: 0, t: 0.0 };
        tr.final_time = 0.0;
        tr.final_state = x0.to_vec();
        return Ok(tr);
    }
    integrate(&ZermeloDynamics { k }, 0.0, &x0, &cfg, &[ev])
}

/// Control energy to reach the convergence radius.
pub fn zermelo_objective(k: &Mat, scenario: &ZermeloScenario) -> Evaluation {
    if !k.is_positive_definite() {
        return Evaluation::invalid("penalty matrix not positive definite");
    }
    match simulate(k, scenario, false) {
        Ok(tr) => match tr.outcome {
            Outcome::Event { t, .. } => Evaluation::converged(tr.final_state[2], t),
            Outcome::TimeoutWithoutEvent => {
                Evaluation::timeout(tr.final_state[0].hypot(tr.final_state[1]), tr.final_time)
            }
        },
        Err(e) => Evaluation::invalid(e.to_string()),
    }
}

pub fn objective_from_params(params: &PenaltyParams, scenario: &ZermeloScenario) -> Evaluation {
    match assemble(params) {
        Ok(k) => zermelo_objective(&k, scenario),
        Err(e) => Evaluation::invalid(e.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for SurfaceGrid {
    fn default() -> Self {
        Self {
            x_min: -10.0,
            x_max: 10.0,
            y_min: -10.0,
            y_max: 10.0,
            nx: 101,
            ny: 101,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceRow {
    pub x: f64,
    pub y: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "Vdot")]
    pub vdot: f64,
    pub u_norm: f64,
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// `V`, `V̇` and `‖u‖` on a rectangular grid, x-major.
pub fn export_surfaces(k: &Mat, grid: &SurfaceGrid) -> Vec<SurfaceRow> {
    let xs = axis(grid.x_min, grid.x_max, grid.nx);
    let ys = axis(grid.y_min, grid.y_max, grid.ny);
    let mut rows = Vec::with_capacity(xs.len() * ys.len());
    for &x in &xs {
        for &y in &ys {
            let p = [x, y];
            let u = zermelo_control(&p, k);
            rows.push(SurfaceRow {
                x,
                y,
                v: lyapunov(&p, k),
                vdot: lyapunov_rate(&p, k),
                u_norm: u[0].hypot(u[1]),
            });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k1() -> Mat {
        Mat::from_diag(&[0.8094, 0.1611])
    }

    fn k2() -> Mat {
        Mat::from_rows(&[[1.7421, 0.9560], [0.9560, 1.1414]])
    }

    #[test]
    fn control_examples() {
        assert_eq!(zermelo_control(&[0.0, 0.0], &k2()), [0.0, 0.0]);
        let u = zermelo_control(&[1.0, 0.0], &Mat::identity(2));
        assert!((u[0] - (1f64.sin() - 1.0)).abs() < 1e-15);
        assert!((u[0] + 0.158529).abs() < 1e-6);
        assert_eq!(u[1], 0.0);

        let (x, y) = (-8.0f64, 6.0f64);
        let c = y.cos() * x.sin();
        let u = zermelo_control(&[x, y], &k1());
        assert!((u[0] - (x * c - 0.8094 * x)).abs() < 1e-12);
        assert!((u[1] - (y * c - 0.1611 * y)).abs() < 1e-12);
    }

    #[test]
    fn surface_examples() {
        let g = SurfaceGrid {
            x_min: 1.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 1.0,
            nx: 1,
            ny: 2,
        };
        let r = export_surfaces(&Mat::identity(2), &g);
        assert!((r[0].v - 0.5).abs() < 1e-15);
        let r = export_surfaces(&k2(), &g);
        assert!((r[1].v - 2.39775).abs() < 1e-12);
        for row in export_surfaces(&k2(), &SurfaceGrid::default()) {
            assert!(row.vdot <= 0.0);
        }
    }

    #[test]
    fn origin_has_zero_energy() {
        let s = ZermeloScenario {
            x0: [0.0, 0.0],
            ..Default::default()
        };
        let e = zermelo_objective(&k2(), &s);
        assert!(e.converged);
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn replay_values() {
        let s = ZermeloScenario::default();
        let j1 = zermelo_objective(&k1(), &s);
        let j2 = zermelo_objective(&k2(), &s);
        assert!(j1.converged && j2.converged);
        assert!((j1.value / 26.52 - 1.0).abs() < 0.02, "J1 = {}", j1.value);
        assert!((j2.value / 24.83 - 1.0).abs() < 0.02, "J2 = {}", j2.value);
    }

    #[test]
    fn lyapunov_nonincreasing_along_trajectory() {
        let tr = simulate(&k2(), &ZermeloScenario::default(), true).unwrap();
        let k = k2();
        for w in tr.states.windows(2) {
            assert!(lyapunov(&w[1], &k) <= lyapunov(&w[0], &k) + 1e-9);
        }
    }
}
