//! Two-body astrodynamics in canonical units.
//!
//! Positions are in DU, velocities in DU/TU and `μ = 1` unless a function
//! takes `mu` explicitly. Angles are radians; degrees appear only at I/O.
//! The vector helpers are generic over [`Scalar`] so guidance laws can
//! differentiate them with dual numbers.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dual::Scalar;

pub const G0: f64 = 9.80665;
pub const MU_EARTH: f64 = 398_600.49;
pub const DU_EARTH: f64 = 6378.1366;
pub const MU_VESTA: f64 = 17.8;
pub const DU_VESTA: f64 = 289.0;
/// Circular/equatorial degeneracy threshold.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AstroError {
    #[error("unsupported orbit: {0}")]
    UnsupportedOrbit(String),
    #[error("inconsistent canonical frame: {0}")]
    InconsistentFrame(String),
}

/// Canonical distance and time units for a central body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalFrame {
    /// Gravitational parameter, km³/s².
    pub mu: f64,
    /// Distance unit, km.
    pub du: f64,
    /// Time unit, s.
    pub tu: f64,
}

impl CanonicalFrame {
    /// Frame with `TU = √(DU³/μ)`.
    pub fn new(mu: f64, du: f64) -> Self {
        Self {
            mu,
            du,
            tu: (du.powi(3) / mu).sqrt(),
        }
    }

    pub fn earth() -> Self {
        Self::new(MU_EARTH, DU_EARTH)
    }

    pub fn vesta() -> Self {
        Self::new(MU_VESTA, DU_VESTA)
    }

    /// Checks `μ·TU²/DU³ = 1` to `rel_tol`.
    pub fn validate(&self, rel_tol: f64) -> Result<(), AstroError> {
        if !(self.mu > 0.0 && self.du > 0.0 && self.tu > 0.0) {
            return Err(AstroError::InconsistentFrame("mu, DU and TU must be positive".into()));
        }
        let mu_canonical = self.mu * self.tu * self.tu / self.du.powi(3);
        if (mu_canonical - 1.0).abs() > rel_tol {
            return Err(AstroError::InconsistentFrame(format!(
                "mu in canonical units is {mu_canonical:.12}, expected 1 (TU must equal sqrt(DU^3/mu))"
            )));
        }
        Ok(())
    }

    pub fn km_to_du(&self, km: f64) -> f64 {
        km / self.du
    }

    pub fn du_to_km(&self, du: f64) -> f64 {
        du * self.du
    }

    pub fn seconds_to_tu(&self, s: f64) -> f64 {
        s / self.tu
    }

    pub fn tu_to_days(&self, tu: f64) -> f64 {
        tu * self.tu / 86_400.0
    }

    /// Converts an acceleration in m/s² to DU/TU².
    pub fn accel_to_canonical(&self, m_per_s2: f64) -> f64 {
        m_per_s2 / 1000.0 * self.tu * self.tu / self.du
    }
}

/// Low-thrust propulsion constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThrustModel {
    /// Maximum thrust, N.
    pub thrust: f64,
    /// Specific impulse, s.
    pub isp: f64,
    /// Initial mass, kg.
    pub m0: f64,
}

impl ThrustModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.thrust > 0.0 && self.isp > 0.0 && self.m0 > 0.0) {
            return Err("thrust, isp and m0 must be positive".into());
        }
        Ok(())
    }

    /// Thrust acceleration `T/m` in DU/TU² at mass `m` kg.
    pub fn accel(&self, m: f64, frame: &CanonicalFrame) -> f64 {
        frame.accel_to_canonical(self.thrust / m)
    }

    /// Mass flow at full throttle, kg per TU.
    pub fn mass_flow(&self, frame: &CanonicalFrame) -> f64 {
        self.thrust / (self.isp * G0) * frame.tu
    }
}

/// Classical orbital elements (a in DU, angles in radians).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitalElements {
    pub a: f64,
    pub e: f64,
    pub i: f64,
    pub raan: f64,
    pub argp: f64,
    pub nu: f64,
}

impl OrbitalElements {
    /// Elements from km and degrees.
    pub fn from_km_deg(frame: &CanonicalFrame, a_km: f64, e: f64, i: f64, raan: f64, argp: f64, nu: f64) -> Self {
        Self {
            a: frame.km_to_du(a_km),
            e,
            i: i.to_radians(),
            raan: raan.to_radians(),
            argp: argp.to_radians(),
            nu: nu.to_radians(),
        }
    }

    pub fn semi_latus_rectum(&self) -> f64 {
        self.a * (1.0 - self.e * self.e)
    }

    pub fn periapsis_radius(&self) -> f64 {
        self.a * (1.0 - self.e)
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.a, self.e, self.i, self.raan, self.argp, self.nu]
    }
}

/// Cartesian state: DU, DU/TU and kg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacecraftState {
    pub r: [f64; 3],
    pub v: [f64; 3],
    pub m: f64,
}

impl SpacecraftState {
    pub fn to_array(&self) -> [f64; 7] {
        [self.r[0], self.r[1], self.r[2], self.v[0], self.v[1], self.v[2], self.m]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            r: [x[0], x[1], x[2]],
            v: [x[3], x[4], x[5]],
            m: x[6],
        }
    }
}

/// Which angles fell back to a reference convention.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ambiguity {
    /// e below threshold: ω := 0, ν measured from the node (or x-axis).
    pub circular: bool,
    /// sin i below threshold: Ω := 0, ω measured from the x-axis.
    pub equatorial: bool,
}

impl Ambiguity {
    pub fn any(&self) -> bool {
        self.circular || self.equatorial
    }
}

pub fn cross3<S: Scalar>(a: &[S; 3], b: &[S; 3]) -> [S; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn dot3<S: Scalar>(a: &[S; 3], b: &[S; 3]) -> S {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm3<S: Scalar>(a: &[S; 3]) -> S {
    dot3(a, a).sqrt()
}

/// Specific angular momentum and eccentricity vectors.
pub fn hvec_evec<S: Scalar>(r: &[S; 3], v: &[S; 3], mu: f64) -> ([S; 3], [S; 3]) {
    let h = cross3(r, v);
    let rn = norm3(r);
    let v2 = dot3(v, v);
    let rv = dot3(r, v);
    let c = v2 - S::cst(mu) / rn;
    let e = std::array::from_fn(|k| (c * r[k] - rv * v[k]) / mu);
    (h, e)
}

/// Inclination `acos(h_z/h)`.
pub fn inclination<S: Scalar>(h: &[S; 3]) -> S {
    let c = h[2] / norm3(h);
    // clamp without breaking the derivative chain in the interior
    if c.re() >= 1.0 {
        S::cst(0.0)
    } else if c.re() <= -1.0 {
        S::cst(PI)
    } else {
        c.acos()
    }
}

/// Right ascension from the node vector `n = ẑ × h`, in `[0, 2π)`.
pub fn raan<S: Scalar>(h: &[S; 3]) -> S {
    let nx = -h[1];
    let ny = h[0];
    let nn = (nx * nx + ny * ny).sqrt();
    let c = nx / nn;
    let ang = if c.re() >= 1.0 {
        S::cst(0.0)
    } else if c.re() <= -1.0 {
        S::cst(PI)
    } else {
        c.acos()
    };
    if ny.re() < 0.0 {
        S::cst(TAU) - ang
    } else {
        ang
    }
}

fn angle_between(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let c = dot3(a, b) / (norm3(a) * norm3(b));
    c.clamp(-1.0, 1.0).acos()
}

/// Classical elements of a Cartesian state, with degeneracy flags.
pub fn coe_from_state(r: &[f64; 3], v: &[f64; 3], mu: f64) -> (OrbitalElements, Ambiguity) {
    let (h, evec) = hvec_evec(r, v, mu);
    let hn = norm3(&h);
    let rn = norm3(r);
    let e = norm3(&evec);
    let energy = 0.5 * dot3(v, v) - mu / rn;
    let a = -mu / (2.0 * energy);
    let i = inclination(&h);
    let n = [-h[1], h[0], 0.0];
    let nn = norm3(&n);
    let amb = Ambiguity {
        circular: e < DEGENERACY_TOL,
        equatorial: nn / hn < DEGENERACY_TOL,
    };
    let rv = dot3(r, v);

    let (raan, argp, nu) = match (amb.circular, amb.equatorial) {
        (false, false) => {
            let raan = raan(&h);
            let mut argp = angle_between(&n, &evec);
            if evec[2] < 0.0 {
                argp = TAU - argp;
            }
            let mut nu = angle_between(&evec, r);
            if rv < 0.0 {
                nu = TAU - nu;
            }
            (raan, argp, nu)
        }
        (false, true) => {
            // longitude of periapsis from x̂, sense set by h_z
            let mut argp = evec[1].atan2(evec[0]);
            if h[2] < 0.0 {
                argp = -argp;
            }
            let mut nu = angle_between(&evec, r);
            if rv < 0.0 {
                nu = TAU - nu;
            }
            (0.0, argp.rem_euclid(TAU), nu)
        }
        (true, false) => {
            let raan = raan(&h);
            let mut u = angle_between(&n, r);
            if r[2] < 0.0 {
                u = TAU - u;
            }
            (raan, 0.0, u)
        }
        (true, true) => {
            let mut l = r[1].atan2(r[0]);
            if h[2] < 0.0 {
                l = -l;
            }
            (0.0, 0.0, l.rem_euclid(TAU))
        }
    };
    (
        OrbitalElements {
            a,
            e,
            i,
            raan,
            argp,
            nu,
        },
        amb,
    )
}

/// Perifocal-to-inertial rotation applied to `(x, y)` perifocal components.
fn perifocal_to_inertial(raan: f64, i: f64, argp: f64, x: f64, y: f64) -> [f64; 3] {
    let (so, co) = raan.sin_cos();
    let (si, ci) = i.sin_cos();
    let (sw, cw) = argp.sin_cos();
    let p = [co * cw - so * sw * ci, so * cw + co * sw * ci, sw * si];
    let q = [-co * sw - so * cw * ci, -so * sw + co * cw * ci, cw * si];
    [p[0] * x + q[0] * y, p[1] * x + q[1] * y, p[2] * x + q[2] * y]
}

/// Cartesian position and velocity of elliptic elements.
pub fn state_from_coe(coe: &OrbitalElements, mu: f64) -> Result<([f64; 3], [f64; 3]), AstroError> {
    if !(coe.e >= 0.0 && coe.e < 1.0) {
        return Err(AstroError::UnsupportedOrbit(format!(
            "eccentricity {} outside [0, 1)",
            coe.e
        )));
    }
    if !(coe.a > 0.0) {
        return Err(AstroError::UnsupportedOrbit(format!(
            "semi-major axis {} not positive",
            coe.a
        )));
    }
    let p = coe.semi_latus_rectum();
    let (sn, cn) = coe.nu.sin_cos();
    let rn = p / (1.0 + coe.e * cn);
    let k = (mu / p).sqrt();
    let r = perifocal_to_inertial(coe.raan, coe.i, coe.argp, rn * cn, rn * sn);
    let v = perifocal_to_inertial(coe.raan, coe.i, coe.argp, -k * sn, k * (coe.e + cn));
    Ok((r, v))
}

/// Rotates a vector by `angle` about the x-axis.
pub fn rotate_x(a: &[f64; 3], angle: f64) -> [f64; 3] {
    let (s, c) = angle.sin_cos();
    [a[0], c * a[1] - s * a[2], s * a[1] + c * a[2]]
}

/// Rigid rotation of a state about the x-axis.
pub fn rotate_state_x(state: &SpacecraftState, angle: f64) -> SpacecraftState {
    SpacecraftState {
        r: rotate_x(&state.r, angle),
        v: rotate_x(&state.v, angle),
        m: state.m,
    }
}

/// Rotation of elliptic elements about the x-axis (through Cartesian space).
pub fn rotate_coe_x(coe: &OrbitalElements, angle: f64, mu: f64) -> Result<OrbitalElements, AstroError> {
    let (r, v) = state_from_coe(coe, mu)?;
    Ok(coe_from_state(&rotate_x(&r, angle), &rotate_x(&v, angle), mu).0)
}

/// Angle difference wrapped to `(−π, π]`.
pub fn wrap_pi(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

pub fn period(a: f64, mu: f64) -> f64 {
    TAU * (a.powi(3) / mu).sqrt()
}

/// Two-body acceleration `−μr/|r|³`.
pub fn gravity(r: &[f64], mu: f64) -> [f64; 3] {
    let rn = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    let k = -mu / (rn * rn * rn);
    [k * r[0], k * r[1], k * r[2]]
}

/// Target orbit; `None` leaves an element free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetOrbit {
    pub a: f64,
    pub e: f64,
    pub i: Option<f64>,
    pub raan: Option<f64>,
    pub argp: Option<f64>,
}

impl TargetOrbit {
    /// Elements with free slots filled by zeros (for Cartesian target vectors
    /// only the targeted slots matter).
    pub fn as_elements(&self) -> OrbitalElements {
        OrbitalElements {
            a: self.a,
            e: self.e,
            i: self.i.unwrap_or(0.0),
            raan: self.raan.unwrap_or(0.0),
            argp: self.argp.unwrap_or(0.0),
            nu: 0.0,
        }
    }
}

/// Benchmark low-thrust transfers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransferCase {
    A,
    B,
    C,
    D,
    E,
    /// Case E expressed in an inertial frame rotated 30° about x.
    #[serde(rename = "E*", alias = "EStar")]
    EStar,
}

impl TransferCase {
    pub const ALL: [TransferCase; 6] = [
        TransferCase::A,
        TransferCase::B,
        TransferCase::C,
        TransferCase::D,
        TransferCase::E,
        TransferCase::EStar,
    ];

    pub fn label(self) -> &'static str {
        match self {
            TransferCase::A => "A",
            TransferCase::B => "B",
            TransferCase::C => "C",
            TransferCase::D => "D",
            TransferCase::E => "E",
            TransferCase::EStar => "E*",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Some(TransferCase::A),
            "B" => Some(TransferCase::B),
            "C" => Some(TransferCase::C),
            "D" => Some(TransferCase::D),
            "E" => Some(TransferCase::E),
            "E*" | "ESTAR" => Some(TransferCase::EStar),
            _ => None,
        }
    }
}

/// A transfer problem in canonical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferProblem {
    pub case: TransferCase,
    pub frame: CanonicalFrame,
    pub thrust: ThrustModel,
    pub initial: OrbitalElements,
    pub target: TargetOrbit,
    /// Propagation cap, days.
    pub max_days: f64,
}

impl TransferProblem {
    /// Built-in boundary conditions (km, degrees, N, kg, s converted here).
    /// Initial true anomaly is zero in every case.
    pub fn builtin(case: TransferCase) -> Self {
        let earth = CanonicalFrame::earth();
        let vesta = CanonicalFrame::vesta();
        let deg = f64::to_radians;
        let tm = |thrust, m0, isp| ThrustModel { thrust, isp, m0 };
        let (frame, thrust, init, target, max_days) = match case {
            TransferCase::A => (
                earth,
                tm(1.0, 300.0, 3100.0),
                (7000.0, 0.01, 0.05, 0.0, 0.0),
                (42000.0, 0.01, None, None, None),
                60.0,
            ),
            TransferCase::B => (
                earth,
                tm(0.35, 2000.0, 2000.0),
                (24505.9, 0.725, 7.05, 0.0, 0.0),
                (42165.0, 0.001, Some(0.05), None, None),
                400.0,
            ),
            TransferCase::C => (
                earth,
                tm(9.3, 300.0, 3100.0),
                (9222.7, 0.2, 0.573, 0.0, 0.0),
                (30000.0, 0.7, None, None, None),
                10.0,
            ),
            TransferCase::D => (
                vesta,
                tm(0.045, 950.0, 3045.0),
                (944.64, 0.015, 90.06, -24.60, 156.90),
                (401.72, 0.012, Some(90.01), Some(-40.73), None),
                100.0,
            ),
            TransferCase::E => (
                earth,
                tm(2.0, 2000.0, 2000.0),
                (24505.9, 0.725, 0.06, 0.0, 0.0),
                (26500.0, 0.7, Some(116.0), Some(180.0), Some(180.0)),
                300.0,
            ),
            TransferCase::EStar => (
                earth,
                tm(2.0, 2000.0, 2000.0),
                (24505.9, 0.725, 30.06, 0.0, 0.0),
                (26500.0, 0.7, Some(86.0), Some(180.0), Some(180.0)),
                300.0,
            ),
        };
        Self {
            case,
            frame,
            thrust,
            initial: OrbitalElements::from_km_deg(&frame, init.0, init.1, init.2, init.3, init.4, 0.0),
            target: TargetOrbit {
                a: frame.km_to_du(target.0),
                e: target.1,
                i: target.2.map(deg),
                raan: target.3.map(|v: f64| deg(v).rem_euclid(TAU)),
                argp: target.4.map(deg),
            },
            max_days,
        }
    }

    pub fn initial_state(&self) -> Result<SpacecraftState, AstroError> {
        let (r, v) = state_from_coe(&self.initial, 1.0)?;
        Ok(SpacecraftState {
            r,
            v,
            m: self.thrust.m0,
        })
    }

    pub fn max_time_tu(&self) -> f64 {
        self.frame.seconds_to_tu(self.max_days * 86_400.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_units() {
        let e = CanonicalFrame::earth();
        assert!((e.tu - 806.8110).abs() < 1e-3);
        e.validate(1e-12).unwrap();
        let v = CanonicalFrame::vesta();
        assert!((v.tu - 1164.4927).abs() < 1e-3);
        let printed = CanonicalFrame {
            mu: MU_EARTH,
            du: DU_EARTH,
            tu: 806.8110,
        };
        printed.validate(1e-8).unwrap();
        let bad = CanonicalFrame { tu: 800.0, ..printed };
        assert!(bad.validate(1e-8).is_err());
        assert!((e.km_to_du(7000.0) - 1.09750).abs() < 1e-5);
    }

    #[test]
    fn h_and_e_examples() {
        let (h, e) = hvec_evec(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], 1.0);
        assert_eq!(h, [0.0, 0.0, 1.0]);
        assert!(norm3(&e) < 1e-15);
        let (_, e) = hvec_evec(&[1.0, 0.0, 0.0], &[0.0, 1.1, 0.0], 1.0);
        assert!((e[0] - 0.21).abs() < 1e-14 && e[1] == 0.0 && e[2] == 0.0);
        let (_, e) = hvec_evec(&[1.0, 0.0, 0.0], &[0.0, 2f64.sqrt(), 0.0], 1.0);
        assert!((norm3(&e) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_flags() {
        let (coe, amb) = coe_from_state(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], 1.0);
        assert!(amb.circular && amb.equatorial);
        assert_eq!(coe.i, 0.0);
        assert!((coe.a - 1.0).abs() < 1e-14);
        assert!((inclination(&[0.0, 1.0, 0.0]) - FRAC_PI_2).abs() < 1e-15);
    }

    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn circular_equatorial_state() {
        let coe = OrbitalElements {
            a: 1.0,
            e: 0.0,
            i: 0.0,
            raan: 0.0,
            argp: 0.0,
            nu: 0.0,
        };
        let (r, v) = state_from_coe(&coe, 1.0).unwrap();
        for k in 0..3 {
            assert!((r[k] - [1.0, 0.0, 0.0][k]).abs() < 1e-15);
            assert!((v[k] - [0.0, 1.0, 0.0][k]).abs() < 1e-15);
        }
        let hyper = OrbitalElements { e: 1.2, ..coe };
        assert!(matches!(
            state_from_coe(&hyper, 1.0),
            Err(AstroError::UnsupportedOrbit(_))
        ));
    }

    #[test]
    fn rotation_examples() {
        let r = rotate_x(&[0.0, 1.0, 0.0], FRAC_PI_2);
        assert!(r[0] == 0.0 && r[1].abs() < 1e-16 && (r[2] - 1.0).abs() < 1e-16);
        assert_eq!(rotate_x(&[0.3, -0.2, 0.7], 0.0), [0.3, -0.2, 0.7]);
    }

    #[test]
    fn case_e_frames_related_by_x_rotation() {
        let f = CanonicalFrame::earth();
        let e = OrbitalElements::from_km_deg(&f, 24505.9, 0.725, 0.06, 0.0, 0.0, 0.0);
        let rotated = rotate_coe_x(&e, 30f64.to_radians(), 1.0).unwrap();
        assert!((rotated.i.to_degrees() - 30.06).abs() < 1e-9);
        assert!(rotated.raan.abs() < 1e-9 || (rotated.raan - TAU).abs() < 1e-9);
        let target = OrbitalElements::from_km_deg(&f, 26500.0, 0.7, 116.0, 180.0, 180.0, 0.0);
        let rt = rotate_coe_x(&target, 30f64.to_radians(), 1.0).unwrap();
        assert!((rt.i.to_degrees() - 86.0).abs() < 1e-9, "{}", rt.i.to_degrees());
        assert!((rt.raan.to_degrees() - 180.0).abs() < 1e-9);
        assert!((rt.argp.to_degrees() - 180.0).abs() < 1e-9);
        let back = rotate_coe_x(&rt, -30f64.to_radians(), 1.0).unwrap();
        assert!((back.i - target.i).abs() < 1e-12);
    }

    #[test]
    fn builtin_cases() {
        let a = TransferProblem::builtin(TransferCase::A);
        assert!((a.initial.a - 1.09750).abs() < 1e-5);
        assert_eq!(a.thrust.thrust, 1.0);
        assert_eq!(a.thrust.m0, 300.0);
        assert_eq!(a.thrust.isp, 3100.0);
        let es = TransferProblem::builtin(TransferCase::EStar);
        assert!((es.initial.i.to_degrees() - 30.06).abs() < 1e-12);
        let d = TransferProblem::builtin(TransferCase::D);
        assert!((d.frame.tu - 1164.4927).abs() < 1e-3);
        assert!((d.target.raan.unwrap().to_degrees() - 319.27).abs() < 1e-9);
        for c in TransferCase::ALL {
            let p = TransferProblem::builtin(c);
            let s = p.initial_state().unwrap();
            let (coe, _) = coe_from_state(&s.r, &s.v, 1.0);
            assert!((coe.a - p.initial.a).abs() < 1e-12);
            assert_eq!(TransferCase::parse(c.label()), Some(c));
        }
    }

    #[test]
    fn wrap_pi_range() {
        assert!((wrap_pi(3.5 * PI) - (-0.5 * PI)).abs() < 1e-12);
        assert_eq!(wrap_pi(PI), PI);
        assert!((wrap_pi(-PI) - PI).abs() < 1e-15);
    }
}
