//! Adaptive Dormand–Prince 5(4) propagation with event location and optional
//! zero-order-hold control.
//!
//! A [`Dynamics`] implementation separates the feedback law from the state
//! derivative. Without a hold interval the control is re-evaluated at every
//! stage (continuous feedback). With a hold interval the control is sampled
//! once per hold-grid node and frozen until the next node; steps never cross a
//! grid node.

use std::fmt::Debug;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PropagateError {
    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StiffnessFailure { t: f64, h: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
}

/// Controlled dynamics `ẋ = f(t, x, u)` with feedback `u = κ(t, x)`.
pub trait Dynamics {
    type Control: Clone + Debug;
    fn control(&self, t: f64, x: &[f64]) -> Self::Control;
    fn rhs(&self, t: f64, x: &[f64], u: &Self::Control, dx: &mut [f64]);
}

/// Autonomous-control adaptor: plain `f(t, x, dx)` closures.
pub struct Uncontrolled<F>(pub F);

impl<F> Dynamics for Uncontrolled<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    type Control = ();
    fn control(&self, _t: f64, _x: &[f64]) {}
    fn rhs(&self, t: f64, x: &[f64], _u: &(), dx: &mut [f64]) {
        (self.0)(t, x, dx)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
    pub max_time: f64,
    pub hold_interval: Option<f64>,
    /// Log every accepted step (and hold-grid node) into the trajectory.
    pub record: bool,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-8,
            rel_tol: 1e-8,
            max_step: f64::INFINITY,
            max_time: 100.0,
            hold_interval: None,
            record: false,
            max_steps: 50_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tol(tol: f64, max_time: f64) -> Self {
        Self {
            abs_tol: tol,
            rel_tol: tol,
            max_time,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<(), PropagateError> {
        let bad = |m: &str| Err(PropagateError::InvalidConfig(m.into()));
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.max_time > 0.0) {
            return bad("max_time must be positive");
        }
        if !(self.max_step > 0.0) {
            return bad("max_step must be positive");
        }
        if let Some(h) = self.hold_interval {
            if !(h > 0.0 && h.is_finite()) {
                return bad("hold_interval must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Any,
    Rising,
    Falling,
}

/// Zero-crossing event `g(t, x) = 0`.
pub struct EventSpec<'a> {
    pub function: Box<dyn Fn(f64, &[f64]) -> f64 + 'a>,
    pub direction: Direction,
    pub terminal: bool,
    pub refine_tol: f64,
}

impl<'a> EventSpec<'a> {
    pub fn terminal(direction: Direction, f: impl Fn(f64, &[f64]) -> f64 + 'a) -> Self {
        Self {
            function: Box::new(f),
            direction,
            terminal: true,
            refine_tol: 1e-9,
        }
    }

    pub fn with_refine_tol(mut self, tol: f64) -> Self {
        self.refine_tol = tol;
        self
    }

    fn triggered(&self, g0: f64, g1: f64) -> bool {
        let rising = g0 < 0.0 && g1 >= 0.0;
        let falling = g0 > 0.0 && g1 <= 0.0;
        match self.direction {
            Direction::Any => rising || falling,
            Direction::Rising => rising,
            Direction::Falling => falling,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    /// A terminal event fired.
    Event { index: usize, t: f64 },
    /// `max_time` reached without a terminal event. Non-fatal.
    TimeoutWithoutEvent,
}

#[derive(Debug, Clone)]
pub struct Trajectory<U> {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Control in effect at each logged sample.
    pub controls: Vec<U>,
    pub final_time: f64,
    pub final_state: Vec<f64>,
    pub outcome: Outcome,
    /// Non-terminal event occurrences as (event index, time).
    pub event_log: Vec<(usize, f64)>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl<U> Trajectory<U> {
    pub fn terminated_by(&self, index: usize) -> bool {
        matches!(self.outcome, Outcome::Event { index: i, .. } if i == index)
    }
}

/// Objective value added on top of a terminal-error measure when a run times
/// out or fails to converge.
pub const TIMEOUT_PENALTY: f64 = 1e6;
/// Objective value for decision vectors that do not assemble a valid
/// controller (non-PD matrix, Riccati failure, integration breakdown).
pub const INVALID_PENALTY: f64 = 1e9;

/// Scalar objective outcome shared by every testbed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub value: f64,
    pub converged: bool,
    pub final_time: f64,
    /// Reason the run was penalized, if it was.
    pub note: Option<String>,
}

impl Evaluation {
    pub fn converged(value: f64, final_time: f64) -> Self {
        Self {
            value,
            converged: true,
            final_time,
            note: None,
        }
    }

    pub fn timeout(residual: f64, final_time: f64) -> Self {
        Self {
            value: TIMEOUT_PENALTY + residual,
            converged: false,
            final_time,
            note: Some("timeout without convergence event".into()),
        }
    }

    pub fn invalid(reason: impl Into<String>) -> Self {
        let note = reason.into();
        log::debug!("penalized evaluation: {note}");
        Self {
            value: INVALID_PENALTY,
            converged: false,
            final_time: f64::NAN,
            note: Some(note),
        }
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A21: f64 = 0.2;
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
// b − b̂ (error weights), last entry multiplies the FSAL stage.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

enum Mode<U> {
    Continuous,
    Held(U),
}

struct Stepper<'d, D: Dynamics> {
    dynamics: &'d D,
    n: usize,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    rhs_evals: usize,
}

impl<'d, D: Dynamics> Stepper<'d, D> {
    fn new(dynamics: &'d D, n: usize) -> Self {
        Self {
            dynamics,
            n,
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            rhs_evals: 0,
        }
    }

    fn eval(&mut self, mode: &Mode<D::Control>, t: f64, x: &[f64], out_idx: usize) {
        self.rhs_evals += 1;
        let mut dx = std::mem::take(&mut self.k[out_idx]);
        match mode {
            Mode::Held(u) => self.dynamics.rhs(t, x, u, &mut dx),
            Mode::Continuous => {
                let u = self.dynamics.control(t, x);
                self.dynamics.rhs(t, x, &u, &mut dx)
            }
        }
        self.k[out_idx] = dx;
    }

    /// One DP step of size h from (t, x); k[0] must hold f(t, x).
    /// Writes the 5th-order solution into `x_new` and returns the error norm.
    fn step(
        &mut self,
        mode: &Mode<D::Control>,
        t: f64,
        x: &[f64],
        h: f64,
        x_new: &mut [f64],
        cfg: &IntegratorConfig,
    ) -> f64 {
        let n = self.n;
        let mut tmp = std::mem::take(&mut self.tmp);
        for i in 0..n {
            tmp[i] = x[i] + h * A21 * self.k[0][i];
        }
        self.eval(mode, t + C[1] * h, &tmp, 1);
        for i in 0..n {
            tmp[i] = x[i] + h * (A3[0] * self.k[0][i] + A3[1] * self.k[1][i]);
        }
        self.eval(mode, t + C[2] * h, &tmp, 2);
        for i in 0..n {
            tmp[i] = x[i] + h * (A4[0] * self.k[0][i] + A4[1] * self.k[1][i] + A4[2] * self.k[2][i]);
        }
        self.eval(mode, t + C[3] * h, &tmp, 3);
        for i in 0..n {
            tmp[i] =
                x[i] + h * (A5[0] * self.k[0][i] + A5[1] * self.k[1][i] + A5[2] * self.k[2][i] + A5[3] * self.k[3][i]);
        }
        self.eval(mode, t + C[4] * h, &tmp, 4);
        for i in 0..n {
            tmp[i] = x[i]
                + h * (A6[0] * self.k[0][i]
                    + A6[1] * self.k[1][i]
                    + A6[2] * self.k[2][i]
                    + A6[3] * self.k[3][i]
                    + A6[4] * self.k[4][i]);
        }
        self.eval(mode, t + C[5] * h, &tmp, 5);
        for i in 0..n {
            x_new[i] = x[i]
                + h * (B[0] * self.k[0][i]
                    + B[2] * self.k[2][i]
                    + B[3] * self.k[3][i]
                    + B[4] * self.k[4][i]
                    + B[5] * self.k[5][i]);
        }
        self.eval(mode, t + h, x_new, 6);
        let mut err: f64 = 0.0;
        for i in 0..n {
            let e = h
                * (E[0] * self.k[0][i]
                    + E[2] * self.k[2][i]
                    + E[3] * self.k[3][i]
                    + E[4] * self.k[4][i]
                    + E[5] * self.k[5][i]
                    + E[6] * self.k[6][i]);
            let sc = cfg.abs_tol + cfg.rel_tol * x[i].abs().max(x_new[i].abs());
            err = err.max((e / sc).abs());
        }
        self.tmp = tmp;
        if x_new.iter().any(|v| !v.is_finite()) {
            f64::INFINITY
        } else {
            err
        }
    }
}

fn initial_step(f0: &[f64], x0: &[f64], cfg: &IntegratorConfig, span: f64) -> f64 {
    let mut d0: f64 = 0.0;
    let mut d1: f64 = 0.0;
    for i in 0..x0.len() {
        let sc = cfg.abs_tol + cfg.rel_tol * x0[i].abs();
        d0 = d0.max((x0[i] / sc).abs());
        d1 = d1.max((f0[i] / sc).abs());
    }
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span).min(cfg.max_step).max(1e-12 * span)
}

/// Integrates `dynamics` from `(t0, x0)` until a terminal event or `max_time`.
pub fn integrate<D: Dynamics>(
    dynamics: &D,
    t0: f64,
    x0: &[f64],
    cfg: &IntegratorConfig,
    events: &[EventSpec<'_>],
) -> Result<Trajectory<D::Control>, PropagateError> {
    cfg.validate()?;
    let n = x0.len();
    let t_end = t0 + cfg.max_time;
    let mut stepper = Stepper::new(dynamics, n);
    let mut t = t0;
    let mut x = x0.to_vec();
    let mut x_new = vec![0.0; n];
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        controls: Vec::new(),
        final_time: t0,
        final_state: x0.to_vec(),
        outcome: Outcome::TimeoutWithoutEvent,
        event_log: Vec::new(),
        accepted_steps: 0,
        rejected_steps: 0,
    };
    let mut g_prev: Vec<f64> = events.iter().map(|e| (e.function)(t, &x)).collect();

    let mut h = f64::NAN;
    let mut fac_old: f64 = 1e-4;
    let mut grid_index: u64 = 0;

    loop {
        // segment [t, seg_end] with a fixed control mode
        let (mode, seg_end) = match cfg.hold_interval {
            Some(hold) => {
                let u = dynamics.control(t, &x);
                grid_index += 1;
                let end = (t0 + grid_index as f64 * hold).min(t_end);
                (Mode::Held(u), end)
            }
            None => (Mode::Continuous, t_end),
        };
        stepper.eval(&mode, t, &x, 0);
        if h.is_nan() {
            h = initial_step(&stepper.k[0], &x, cfg, seg_end - t);
        }
        if cfg.record {
            traj.times.push(t);
            traj.states.push(x.clone());
            traj.controls.push(match &mode {
                Mode::Held(u) => u.clone(),
                Mode::Continuous => dynamics.control(t, &x),
            });
        }

        while t < seg_end {
            if traj.accepted_steps + traj.rejected_steps >= cfg.max_steps {
                return Err(PropagateError::TooManySteps(cfg.max_steps));
            }
            let remaining = seg_end - t;
            let mut h_try = h.min(cfg.max_step);
            let last = h_try >= remaining * (1.0 - 1e-12);
            if last {
                h_try = remaining;
            }
            if h_try < 1e-14 * t.abs().max(1.0) && !last {
                return Err(PropagateError::StiffnessFailure { t, h: h_try });
            }
            let err = stepper.step(&mode, t, &x, h_try, &mut x_new, cfg);
            const SAFE: f64 = 0.9;
            const BETA: f64 = 0.04;
            const EXPO: f64 = 0.2 - BETA * 0.75;
            if err <= 1.0 {
                let fac11 = err.max(1e-300).powf(EXPO);
                let fac = (fac11 / fac_old.powf(BETA) / SAFE).clamp(0.1, 5.0);
                let h_next = h_try / fac;
                fac_old = err.max(1e-4);
                traj.accepted_steps += 1;
                let t_new = if last { seg_end } else { t + h_try };

                // events over [t, t_new]
                let mut fired: Option<(usize, f64, Vec<f64>)> = None;
                for (idx, ev) in events.iter().enumerate() {
                    let g_new = (ev.function)(t_new, &x_new);
                    if ev.triggered(g_prev[idx], g_new) {
                        let (te, xe) = locate_event(&mut stepper, &mode, ev, g_prev[idx], t, &x, t_new - t, cfg);
                        if ev.terminal {
                            if fired.as_ref().is_none_or(|f| te < f.1) {
                                fired = Some((idx, te, xe));
                            }
                        } else {
                            traj.event_log.push((idx, te));
                        }
                    }
                    g_prev[idx] = g_new;
                }
                if let Some((idx, te, xe)) = fired {
                    if cfg.record {
                        let u = match &mode {
                            Mode::Held(u) => u.clone(),
                            Mode::Continuous => dynamics.control(te, &xe),
                        };
                        traj.times.push(te);
                        traj.states.push(xe.clone());
                        traj.controls.push(u);
                    }
                    traj.final_time = te;
                    traj.final_state = xe;
                    traj.outcome = Outcome::Event { index: idx, t: te };
                    return Ok(traj);
                }

                t = t_new;
                std::mem::swap(&mut x, &mut x_new);
                stepper.k.swap(0, 6);
                h = h_next;
                if cfg.record && t < seg_end {
                    traj.times.push(t);
                    traj.states.push(x.clone());
                    traj.controls.push(match &mode {
                        Mode::Held(u) => u.clone(),
                        Mode::Continuous => dynamics.control(t, &x),
                    });
                }
            } else {
                traj.rejected_steps += 1;
                if !err.is_finite() {
                    h = h_try * 0.1;
                } else {
                    let fac11 = err.powf(EXPO);
                    h = h_try / (fac11 / SAFE).min(10.0);
                }
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(PropagateError::StiffnessFailure { t, h });
                }
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(PropagateError::NonFinite { t });
        }
        if t >= t_end {
            if cfg.record {
                traj.times.push(t);
                traj.states.push(x.clone());
                traj.controls.push(match &mode {
                    Mode::Held(u) => u.clone(),
                    Mode::Continuous => dynamics.control(t, &x),
                });
            }
            traj.final_time = t;
            traj.final_state = x;
            traj.outcome = Outcome::TimeoutWithoutEvent;
            return Ok(traj);
        }
    }
}

/// Bisection on the sub-step length, re-stepping from the start of the
/// accepted step. Returns the first bracketed time at which the event has fired.
#[allow(clippy::too_many_arguments)]
fn locate_event<D: Dynamics>(
    stepper: &mut Stepper<'_, D>,
    mode: &Mode<D::Control>,
    ev: &EventSpec<'_>,
    g0: f64,
    t: f64,
    x: &[f64],
    h: f64,
    cfg: &IntegratorConfig,
) -> (f64, Vec<f64>) {
    let k0 = stepper.k[0].clone();
    let mut lo = 0.0;
    let mut hi = h;
    let mut x_hi = vec![0.0; x.len()];
    let mut x_mid = vec![0.0; x.len()];
    stepper.k[0].clone_from(&k0);
    stepper.step(mode, t, x, hi, &mut x_hi, cfg);
    while hi - lo > ev.refine_tol && hi - lo > 4.0 * f64::EPSILON * t.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        stepper.k[0].clone_from(&k0);
        stepper.step(mode, t, x, mid, &mut x_mid, cfg);
        let g_mid = (ev.function)(t + mid, &x_mid);
        if ev.triggered(g0, g_mid) {
            hi = mid;
            std::mem::swap(&mut x_hi, &mut x_mid);
        } else {
            lo = mid;
        }
    }
    stepper.k[0] = k0;
    (t + hi, x_hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let f = Uncontrolled(|_t: f64, x: &[f64], dx: &mut [f64]| dx[0] = -x[0]);
        let cfg = IntegratorConfig::with_tol(1e-10, 1.0);
        let tr = integrate(&f, 0.0, &[1.0], &cfg, &[]).unwrap();
        assert_eq!(tr.outcome, Outcome::TimeoutWithoutEvent);
        assert_eq!(tr.final_time, 1.0);
        assert!((tr.final_state[0] - (-1f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn linear_crossing_event() {
        let f = Uncontrolled(|_t: f64, _x: &[f64], dx: &mut [f64]| dx[0] = 1.0);
        let cfg = IntegratorConfig::with_tol(1e-10, 10.0);
        let ev = EventSpec::terminal(Direction::Rising, |_t, x: &[f64]| x[0] - 0.5);
        let tr = integrate(&f, 0.0, &[0.0], &cfg, &[ev]).unwrap();
        match tr.outcome {
            Outcome::Event { index: 0, t } => assert!((t - 0.5).abs() <= 1e-9, "t = {t}"),
            o => panic!("unexpected outcome {o:?}"),
        }
    }

    #[test]
    fn direction_filter() {
        // x = sin t crosses zero falling at π, rising at 2π
        let f = Uncontrolled(|t: f64, _x: &[f64], dx: &mut [f64]| dx[0] = t.cos());
        let cfg = IntegratorConfig::with_tol(1e-11, 10.0);
        let ev = EventSpec::terminal(Direction::Rising, |_t, x: &[f64]| x[0]);
        let tr = integrate(&f, 0.0, &[1e-3f64.sin()], &cfg, &[ev]).unwrap();
        let Outcome::Event { t, .. } = tr.outcome else { panic!() };
        assert!((t - (2.0 * std::f64::consts::PI - 1e-3)).abs() < 1e-8, "t = {t}");
    }

    #[test]
    fn harmonic_energy_drift() {
        let f = Uncontrolled(|_t: f64, x: &[f64], dx: &mut [f64]| {
            dx[0] = x[1];
            dx[1] = -x[0];
        });
        let cfg = IntegratorConfig::with_tol(1e-10, 2.0 * std::f64::consts::PI);
        let tr = integrate(&f, 0.0, &[1.0, 0.0], &cfg, &[]).unwrap();
        let e = 0.5 * (tr.final_state[0].powi(2) + tr.final_state[1].powi(2));
        assert!((e - 0.5).abs() < 1e-7);
    }

    struct HeldRamp;
    impl Dynamics for HeldRamp {
        type Control = f64;
        fn control(&self, t: f64, _x: &[f64]) -> f64 {
            t
        }
        fn rhs(&self, _t: f64, _x: &[f64], u: &f64, dx: &mut [f64]) {
            dx[0] = *u;
        }
    }

    #[test]
    fn zero_order_hold_grid() {
        let cfg = IntegratorConfig {
            hold_interval: Some(0.25),
            record: true,
            ..IntegratorConfig::with_tol(1e-10, 1.0)
        };
        let tr = integrate(&HeldRamp, 0.0, &[0.0], &cfg, &[]).unwrap();
        // x(1) = Σ 0.25·t_k over t_k = 0, .25, .5, .75
        assert!((tr.final_state[0] - 0.25 * 1.5).abs() < 1e-12);
        for (t, u) in tr.times.iter().zip(&tr.controls) {
            let node = (t / 0.25).floor() * 0.25;
            let node = if *t == 1.0 { 0.75 } else { node };
            assert!((u - node).abs() < 1e-12, "t={t} u={u}");
        }
    }

    #[test]
    fn stiffness_failure_reported() {
        // finite-time blow-up ẋ = x², x(0)=1 → singular at t=1
        let f = Uncontrolled(|_t: f64, x: &[f64], dx: &mut [f64]| dx[0] = x[0] * x[0]);
        let cfg = IntegratorConfig::with_tol(1e-10, 2.0);
        let r = integrate(&f, 0.0, &[1.0], &cfg, &[]);
        assert!(r.is_err(), "{:?}", r.map(|t| t.final_state));
    }

    #[test]
    fn rejects_bad_config() {
        let f = Uncontrolled(|_t: f64, _x: &[f64], dx: &mut [f64]| dx[0] = 0.0);
        let cfg = IntegratorConfig {
            max_time: -1.0,
            ..Default::default()
        };
        assert!(matches!(
            integrate(&f, 0.0, &[0.0], &cfg, &[]),
            Err(PropagateError::InvalidConfig(_))
        ));
    }
}
