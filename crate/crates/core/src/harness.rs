//! Scenario files, multi-seed tuning, appendix-matrix replay and CSV/JSON
//! output.
//!
//! Scenario files are JSON in km, degrees, seconds, newtons and kilograms.
//! Loading validates them and resolves a [`Scenario`] in canonical units.
//! Every output carries the SHA-256 of the resolved configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::astro::{
    rotate_coe_x, CanonicalFrame, OrbitalElements, TargetOrbit, ThrustModel, TransferCase, TransferProblem,
};
use crate::attitude::{self, AttScenario, Maneuver};
use crate::glc::{self, ErrorSpec, GlcSettings};
use crate::matrixkit::Mat;
use crate::pdparam::{assemble, bounds_for, PenaltyKind, PenaltyParams};
use crate::propagate::Evaluation;
use crate::qlaw::{self, QlawConfig, QlawMode, QlawSettings};
use crate::swarm::{optimize, SwarmConfig, SwarmError};
use crate::zermelo::{self, SurfaceGrid, ZermeloScenario};

pub const BUILD_ID: &str = concat!(env!("CARGO_PKG_NAME"), "-", env!("CARGO_PKG_VERSION"));
/// Tolerance on `μ·TU²/DU³ = 1` when loading a frame.
pub const FRAME_REL_TOL: f64 = 1e-6;
/// Relative agreement required when a record is re-evaluated.
pub const REEVAL_REL_TOL: f64 = 1e-9;
/// Trajectory CSVs are thinned to at most this many rows.
pub const MAX_TRAJECTORY_ROWS: usize = 20_000;
/// Rotation between the Case E and E* frames, degrees about x.
pub const ESTAR_ROTATION_DEG: f64 = 30.0;

pub const BUNDLED_SCENARIOS: &[(&str, &str)] = &[
    ("caseA", include_str!("../scenarios/caseA.json")),
    ("caseB", include_str!("../scenarios/caseB.json")),
    ("caseC", include_str!("../scenarios/caseC.json")),
    ("caseD", include_str!("../scenarios/caseD.json")),
    ("caseE", include_str!("../scenarios/caseE.json")),
    ("qlaw_caseA", include_str!("../scenarios/qlaw_caseA.json")),
    ("qlaw_caseB", include_str!("../scenarios/qlaw_caseB.json")),
    ("qlaw_caseC", include_str!("../scenarios/qlaw_caseC.json")),
    ("qlaw_caseD", include_str!("../scenarios/qlaw_caseD.json")),
    ("qlaw_caseE", include_str!("../scenarios/qlaw_caseE.json")),
    (
        "qlaw_caseE_minfuel",
        include_str!("../scenarios/qlaw_caseE_minfuel.json"),
    ),
    ("zermelo", include_str!("../scenarios/zermelo.json")),
    (
        "attitude_lqr_detumbling",
        include_str!("../scenarios/attitude_lqr_detumbling.json"),
    ),
    ("attitude_lqr_rest", include_str!("../scenarios/attitude_lqr_rest.json")),
    (
        "attitude_lyap_detumbling",
        include_str!("../scenarios/attitude_lyap_detumbling.json"),
    ),
    (
        "attitude_lyap_rest",
        include_str!("../scenarios/attitude_lyap_rest.json"),
    ),
];

pub const APPENDIX_FIXTURES: &[(&str, &str)] = &[
    ("A1", include_str!("../fixtures/appendix_A1.json")),
    ("A2", include_str!("../fixtures/appendix_A2.json")),
    ("A3", include_str!("../fixtures/appendix_A3.json")),
    ("A4", include_str!("../fixtures/appendix_A4.json")),
    ("A5", include_str!("../fixtures/appendix_A5.json")),
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{field}: {message}")]
    Schema { field: String, message: String },
    #[error("unknown scenario or fixture '{0}' (not a file and not a bundled name)")]
    Unknown(String),
}

impl ConfigError {
    fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Schema {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("simulation failed: {0}")]
    Simulation(String),
    #[error(transparent)]
    Swarm(#[from] SwarmError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl HarnessError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Simulation(_) => 3,
            HarnessError::Swarm(SwarmError::OptimizationDegenerate { .. }) => 4,
            HarnessError::Swarm(_) => 2,
            HarnessError::Io(_) => 1,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Testbed {
    Zermelo,
    AttitudeLqr,
    AttitudeLyap,
    Glc,
    Qlaw,
}

impl Testbed {
    pub fn label(self) -> &'static str {
        match self {
            Testbed::Zermelo => "zermelo",
            Testbed::AttitudeLqr => "attitude-lqr",
            Testbed::AttitudeLyap => "attitude-lyap",
            Testbed::Glc => "glc",
            Testbed::Qlaw => "qlaw",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    MinEnergy,
    MinTime,
    MinFuel,
}

/// Diagonal penalty matrices or full ones from the configured parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Diag,
    Full,
}

impl MatrixKind {
    pub const BOTH: [MatrixKind; 2] = [MatrixKind::Diag, MatrixKind::Full];

    pub fn label(self) -> &'static str {
        match self {
            MatrixKind::Diag => "diag",
            MatrixKind::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "diag" => Some(MatrixKind::Diag),
            "full" => Some(MatrixKind::Full),
            _ => None,
        }
    }
}

/// Box on diagonal entries and eigenvalues. Angles are always `[0, 2π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub eig_lo: f64,
    pub eig_hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    pub swarm_size: usize,
    pub max_iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameConfig {
    /// km³/s².
    pub mu: f64,
    pub du_km: f64,
    pub tu_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThrustConfig {
    pub thrust_n: f64,
    pub isp_s: f64,
    pub m0_kg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementsConfig {
    pub a_km: f64,
    pub e: f64,
    pub i_deg: f64,
    pub raan_deg: f64,
    pub argp_deg: f64,
    #[serde(default)]
    pub nu_deg: f64,
}

/// Target orbit; omitted angles are free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub a_km: f64,
    pub e: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raan_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub argp_deg: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferConfig {
    pub case: TransferCase,
    pub frame: FrameConfig,
    pub thrust: ThrustConfig,
    pub initial: ElementsConfig,
    pub target: TargetConfig,
    pub max_days: f64,
    /// Rotate both orbits 30° about x before propagating (Case E → E*).
    #[serde(default)]
    pub estar_frame: bool,
}

/// Attitude maneuver; omitted fields take the maneuver's defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttitudeConfig {
    pub maneuver: Maneuver,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inertia: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub euler0_deg: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates0: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub renormalize: Option<bool>,
}

impl AttitudeConfig {
    pub fn resolve(&self) -> AttScenario {
        let mut s = AttScenario::new(self.maneuver);
        if let Some(v) = self.inertia {
            s.inertia = v;
        }
        if let Some(v) = self.euler0_deg {
            s.euler0_deg = v;
        }
        if let Some(v) = self.rates0 {
            s.rates0 = v;
        }
        if let Some(v) = self.angle_tol {
            s.angle_tol = v;
        }
        if let Some(v) = self.rate_tol {
            s.rate_tol = v;
        }
        if let Some(v) = self.max_time {
            s.max_time = v;
        }
        if let Some(v) = self.tol {
            s.tol = v;
        }
        if let Some(v) = self.max_steps {
            s.max_steps = v;
        }
        if let Some(v) = self.renormalize {
            s.renormalize = v;
        }
        s
    }
}

fn default_eta_cut_max() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QlawSection {
    #[serde(default)]
    pub settings: QlawSettings,
    /// Coasting cutoff for replays; tuned in minimum-fuel mode.
    #[serde(default)]
    pub eta_cut: f64,
    #[serde(default = "default_eta_cut_max")]
    pub eta_cut_max: f64,
    /// Targeted elements in (a, e, i, ω, Ω) order; defaults per case.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<[bool; 5]>,
}

fn default_full_kind() -> PenaltyKind {
    PenaltyKind::DEFAULT_FULL
}

fn default_runs() -> usize {
    3
}

/// On-disk scenario schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub testbed: Testbed,
    pub objective: ObjectiveKind,
    /// Parameterization used for `full` matrices.
    #[serde(default = "default_full_kind")]
    pub full_kind: PenaltyKind,
    pub bounds: Bounds,
    #[serde(default)]
    pub swarm: SwarmConfig,
    /// Budget selected by `--full-budget`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_budget: Option<Budget>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zermelo: Option<ZermeloScenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface_grid: Option<SurfaceGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attitude: Option<AttitudeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer: Option<TransferConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub glc: Option<GlcSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qlaw: Option<QlawSection>,
}

impl ScenarioConfig {
    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Resolved problem in canonical units.
#[derive(Debug, Clone)]
pub enum Problem {
    Zermelo(ZermeloScenario),
    AttitudeLqr(AttScenario),
    AttitudeLyap(AttScenario),
    Glc {
        problem: TransferProblem,
        settings: GlcSettings,
        dim: usize,
    },
    Qlaw {
        problem: TransferProblem,
        settings: QlawSettings,
        base: QlawConfig,
        eta_cut_max: f64,
    },
}

/// Penalty matrices by name plus the optional Q-law coasting cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Controller {
    pub matrices: BTreeMap<String, Mat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_cut: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub problem: Problem,
    pub config_hash: String,
}

fn finite_positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::field(
            field,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

fn require<'a, T>(section: &'a Option<T>, field: &str, testbed: Testbed) -> Result<&'a T, ConfigError> {
    section
        .as_ref()
        .ok_or_else(|| ConfigError::field(field, format!("required for testbed {}", testbed.label())))
}

fn check_elements(field: &str, a_km: f64, e: f64) -> Result<(), ConfigError> {
    finite_positive(&format!("{field}.a_km"), a_km)?;
    if !(0.0..1.0).contains(&e) {
        return Err(ConfigError::field(
            format!("{field}.e"),
            format!("must lie in [0, 1), got {e}"),
        ));
    }
    Ok(())
}

/// Converts the transfer section to canonical units.
pub fn resolve_transfer(t: &TransferConfig) -> Result<TransferProblem, ConfigError> {
    let f = &t.frame;
    finite_positive("transfer.frame.mu", f.mu)?;
    finite_positive("transfer.frame.du_km", f.du_km)?;
    finite_positive("transfer.frame.tu_s", f.tu_s)?;
    let frame = CanonicalFrame {
        mu: f.mu,
        du: f.du_km,
        tu: f.tu_s,
    };
    frame
        .validate(FRAME_REL_TOL)
        .map_err(|e| ConfigError::field("transfer.frame.tu_s", e.to_string()))?;
    let thrust = ThrustModel {
        thrust: t.thrust.thrust_n,
        isp: t.thrust.isp_s,
        m0: t.thrust.m0_kg,
    };
    finite_positive("transfer.thrust.thrust_n", thrust.thrust)?;
    finite_positive("transfer.thrust.isp_s", thrust.isp)?;
    finite_positive("transfer.thrust.m0_kg", thrust.m0)?;
    finite_positive("transfer.max_days", t.max_days)?;
    check_elements("transfer.initial", t.initial.a_km, t.initial.e)?;
    check_elements("transfer.target", t.target.a_km, t.target.e)?;

    let i = &t.initial;
    let mut initial = OrbitalElements::from_km_deg(&frame, i.a_km, i.e, i.i_deg, i.raan_deg, i.argp_deg, i.nu_deg);
    let tg = &t.target;
    let deg = |v: Option<f64>| v.map(f64::to_radians);
    let mut target = TargetOrbit {
        a: frame.km_to_du(tg.a_km),
        e: tg.e,
        i: deg(tg.i_deg),
        raan: deg(tg.raan_deg).map(|v| v.rem_euclid(std::f64::consts::TAU)),
        argp: deg(tg.argp_deg),
    };
    let mut case = t.case;
    if t.estar_frame {
        if t.case != TransferCase::E {
            return Err(ConfigError::field("transfer.estar_frame", "only defined for case E"));
        }
        if target.i.is_none() || target.raan.is_none() || target.argp.is_none() {
            return Err(ConfigError::field(
                "transfer.target",
                "the E* rotation needs i, raan and argp targeted",
            ));
        }
        let ang = ESTAR_ROTATION_DEG.to_radians();
        let bad = |field: &'static str| {
            move |e: crate::astro::AstroError| ConfigError::field(field, format!("cannot rotate: {e}"))
        };
        initial = rotate_coe_x(&initial, ang, 1.0).map_err(bad("transfer.initial"))?;
        let rt = rotate_coe_x(&target.as_elements(), ang, 1.0).map_err(bad("transfer.target"))?;
        target = TargetOrbit {
            a: target.a,
            e: target.e,
            i: Some(rt.i),
            raan: Some(rt.raan),
            argp: Some(rt.argp),
        };
        case = TransferCase::EStar;
    }
    Ok(TransferProblem {
        case,
        frame,
        thrust,
        initial,
        target,
        max_days: t.max_days,
    })
}

impl Scenario {
    /// Validates a parsed configuration and converts it to canonical units.
    pub fn from_config(config: ScenarioConfig) -> Result<Self, ConfigError> {
        let tb = config.testbed;
        let b = config.bounds;
        if !(b.eig_lo.is_finite() && b.eig_hi.is_finite() && b.eig_lo >= 0.0 && b.eig_lo < b.eig_hi) {
            return Err(ConfigError::field("bounds", "need 0 <= eig_lo < eig_hi"));
        }
        config
            .swarm
            .validate()
            .map_err(|e| ConfigError::field("swarm", e.to_string()))?;
        if let Some(fb) = config.full_budget {
            if fb.swarm_size < 2 || fb.max_iters < 1 {
                return Err(ConfigError::field("full_budget", "swarm_size >= 2 and max_iters >= 1"));
            }
        }
        if config.runs < 1 {
            return Err(ConfigError::field("runs", "must be at least 1"));
        }
        let objective_ok = match tb {
            Testbed::Zermelo | Testbed::AttitudeLqr | Testbed::AttitudeLyap => {
                config.objective == ObjectiveKind::MinEnergy
            }
            Testbed::Glc => config.objective == ObjectiveKind::MinTime,
            Testbed::Qlaw => config.objective != ObjectiveKind::MinEnergy,
        };
        if !objective_ok {
            return Err(ConfigError::field(
                "objective",
                format!("{:?} is not available on testbed {}", config.objective, tb.label()),
            ));
        }
        let problem = match tb {
            Testbed::Zermelo => {
                let z = config.zermelo.clone().unwrap_or_default();
                finite_positive("zermelo.radius", z.radius)?;
                finite_positive("zermelo.max_time", z.max_time)?;
                finite_positive("zermelo.tol", z.tol)?;
                Problem::Zermelo(z)
            }
            Testbed::AttitudeLqr | Testbed::AttitudeLyap => {
                let s = require(&config.attitude, "attitude", tb)?.resolve();
                s.validate().map_err(|m| ConfigError::field("attitude", m))?;
                if tb == Testbed::AttitudeLqr {
                    Problem::AttitudeLqr(s)
                } else {
                    Problem::AttitudeLyap(s)
                }
            }
            Testbed::Glc => {
                let problem = resolve_transfer(require(&config.transfer, "transfer", tb)?)?;
                let settings = config.glc.unwrap_or_default();
                finite_positive("glc.event_tol", settings.event_tol)?;
                finite_positive("glc.tol", settings.tol)?;
                let dim = ErrorSpec::new(&problem)
                    .map_err(|e| ConfigError::field("transfer.target", e.to_string()))?
                    .dim();
                Problem::Glc { problem, settings, dim }
            }
            Testbed::Qlaw => {
                let problem = resolve_transfer(require(&config.transfer, "transfer", tb)?)?;
                let section = config.qlaw.clone().unwrap_or(QlawSection {
                    settings: QlawSettings::default(),
                    eta_cut: 0.0,
                    eta_cut_max: default_eta_cut_max(),
                    mask: None,
                });
                let mode = match config.objective {
                    ObjectiveKind::MinFuel => QlawMode::MinFuel,
                    _ => QlawMode::MinTime,
                };
                let mut base = QlawConfig::new(Mat::identity(5), problem.case, mode);
                base.eta_cut = section.eta_cut;
                if let Some(m) = section.mask {
                    base.mask = m;
                }
                base.validate().map_err(|e| ConfigError::field("qlaw", e.to_string()))?;
                if !(section.eta_cut_max > 0.0 && section.eta_cut_max < 1.0) {
                    return Err(ConfigError::field("qlaw.eta_cut_max", "must lie in (0, 1)"));
                }
                let s = section.settings;
                finite_positive("qlaw.settings.tol", s.tol)?;
                finite_positive("qlaw.settings.hold_s", s.hold_s)?;
                Problem::Qlaw {
                    problem,
                    settings: s,
                    base,
                    eta_cut_max: section.eta_cut_max,
                }
            }
        };
        let config_hash = config.hash();
        Ok(Self {
            config,
            problem,
            config_hash,
        })
    }

    pub fn name(&self) -> &str {
        &self.config.name
    }

    pub fn testbed(&self) -> Testbed {
        self.config.testbed
    }

    /// Named square matrices making up one controller.
    pub fn slots(&self) -> Vec<(&'static str, usize)> {
        match &self.problem {
            Problem::Zermelo(_) => vec![("K", 2)],
            Problem::AttitudeLqr(_) => vec![("Q", 6), ("R", 3)],
            Problem::AttitudeLyap(_) => vec![("Kp", 3), ("Kd", 3)],
            Problem::Glc { dim, .. } => vec![("K", *dim)],
            Problem::Qlaw { .. } => vec![("K", 5)],
        }
    }

    /// Minimum-fuel Q-law appends `η_cut` to the decision vector.
    pub fn tunes_eta(&self) -> bool {
        matches!(&self.problem, Problem::Qlaw { base, .. } if base.mode == QlawMode::MinFuel)
    }

    pub fn penalty_kind(&self, kind: MatrixKind) -> PenaltyKind {
        match kind {
            MatrixKind::Diag => PenaltyKind::Diagonal,
            MatrixKind::Full => self.config.full_kind,
        }
    }

    /// Decision-vector box for a parameterization.
    pub fn search_box(&self, kind: PenaltyKind) -> (Vec<f64>, Vec<f64>) {
        let b = self.config.bounds;
        let (mut lo, mut hi) = (Vec::new(), Vec::new());
        for (_, n) in self.slots() {
            let (l, h) = bounds_for(kind, n, b.eig_lo, b.eig_hi);
            lo.extend(l);
            hi.extend(h);
        }
        if let Problem::Qlaw { eta_cut_max, .. } = &self.problem {
            if self.tunes_eta() {
                lo.push(0.0);
                hi.push(*eta_cut_max);
            }
        }
        (lo, hi)
    }

    /// Assembles a decision vector into penalty matrices.
    pub fn decode(&self, kind: PenaltyKind, x: &[f64]) -> Result<Controller, String> {
        let mut matrices = BTreeMap::new();
        let mut at = 0;
        for (name, n) in self.slots() {
            let m = kind.param_count(n);
            if x.len() < at + m {
                return Err(format!("decision vector has {} entries, too short for {name}", x.len()));
            }
            let params = PenaltyParams::new(kind, n, x[at..at + m].to_vec()).map_err(|e| e.to_string())?;
            matrices.insert(name.to_string(), assemble(&params).map_err(|e| e.to_string())?);
            at += m;
        }
        let eta_cut = if self.tunes_eta() {
            let v = *x.get(at).ok_or("decision vector is missing eta_cut")?;
            at += 1;
            Some(v)
        } else {
            None
        };
        if at != x.len() {
            return Err(format!("decision vector has {} entries, expected {at}", x.len()));
        }
        Ok(Controller { matrices, eta_cut })
    }

    /// Checks that a controller has exactly the matrices this testbed uses.
    pub fn check_controller(&self, c: &Controller) -> Result<(), ConfigError> {
        let slots = self.slots();
        for (name, n) in &slots {
            let m = c
                .matrices
                .get(*name)
                .ok_or_else(|| ConfigError::field(format!("matrices.{name}"), "missing"))?;
            if m.rows() != *n || m.cols() != *n {
                return Err(ConfigError::field(
                    format!("matrices.{name}"),
                    format!(
                        "dimension mismatch: {}x{} given, testbed {} needs {n}x{n}",
                        m.rows(),
                        m.cols(),
                        self.testbed().label()
                    ),
                ));
            }
        }
        if let Some(extra) = c.matrices.keys().find(|k| !slots.iter().any(|(s, _)| s == k)) {
            return Err(ConfigError::field(
                format!("matrices.{extra}"),
                "not used by this testbed",
            ));
        }
        Ok(())
    }

    /// Identity penalty matrices.
    pub fn identity_controller(&self) -> Controller {
        Controller {
            matrices: self
                .slots()
                .into_iter()
                .map(|(name, n)| (name.to_string(), Mat::identity(n)))
                .collect(),
            eta_cut: None,
        }
    }

    fn qlaw_config(&self, base: &QlawConfig, c: &Controller) -> QlawConfig {
        QlawConfig {
            k: c.matrices["K"].clone(),
            eta_cut: c.eta_cut.unwrap_or(base.eta_cut),
            ..base.clone()
        }
    }

    /// Runs the testbed objective for a controller.
    pub fn evaluate_controller(&self, c: &Controller) -> Evaluation {
        if let Err(e) = self.check_controller(c) {
            return Evaluation::invalid(e.to_string());
        }
        let m = |name: &str| &c.matrices[name];
        match &self.problem {
            Problem::Zermelo(z) => zermelo::zermelo_objective(m("K"), z),
            Problem::AttitudeLqr(s) => attitude::lqr_objective(m("Q"), m("R"), s),
            Problem::AttitudeLyap(s) => attitude::quat_lyap_objective(m("Kp"), m("Kd"), s),
            Problem::Glc { problem, settings, .. } => glc::glc_objective(m("K"), problem, settings),
            Problem::Qlaw {
                problem,
                settings,
                base,
                ..
            } => {
                let cfg = self.qlaw_config(base, c);
                if let Err(e) = cfg.validate() {
                    return Evaluation::invalid(e.to_string());
                }
                qlaw::qlaw_objective(&cfg, problem, settings)
            }
        }
    }

    pub fn evaluate_params(&self, kind: PenaltyKind, x: &[f64]) -> Evaluation {
        match self.decode(kind, x) {
            Ok(c) => self.evaluate_controller(&c),
            Err(e) => Evaluation::invalid(e),
        }
    }

    /// Propagates once with logging and renders the trajectory as CSV.
    pub fn trajectory_csv(&self, c: &Controller) -> Result<String, HarnessError> {
        self.check_controller(c)?;
        let sim = |e: &dyn std::fmt::Display| HarnessError::Simulation(e.to_string());
        let m = |name: &str| &c.matrices[name];
        match &self.problem {
            Problem::Zermelo(z) => {
                let tr = zermelo::simulate(m("K"), z, true).map_err(|e| sim(&e))?;
                let rows = thin(tr.times.len())
                    .into_iter()
                    .map(|k| {
                        let x = &tr.states[k];
                        let u = tr.controls[k];
                        vec![tr.times[k], x[0], x[1], x[2], u[0], u[1]]
                    })
                    .collect::<Vec<_>>();
                table_csv(&["t", "x", "y", "energy", "ux", "uy"], &rows)
            }
            Problem::AttitudeLqr(s) => {
                let inertia = s.inertia;
                let gain = attitude::lqr_gain(m("Q"), m("R"), &inertia).map_err(|e| sim(&e))?;
                let tr = attitude::simulate_lqr(&gain, s, true).map_err(|e| sim(&e))?;
                let rows = thin(tr.times.len())
                    .into_iter()
                    .map(|k| {
                        let x = &tr.states[k];
                        let u = tr.controls[k];
                        vec![
                            tr.times[k],
                            x[0].to_degrees(),
                            x[1].to_degrees(),
                            x[2].to_degrees(),
                            x[3],
                            x[4],
                            x[5],
                            x[6],
                            u[0],
                            u[1],
                            u[2],
                        ]
                    })
                    .collect::<Vec<_>>();
                table_csv(
                    &[
                        "t",
                        "psi_deg",
                        "theta_deg",
                        "phi_deg",
                        "p",
                        "q",
                        "r",
                        "energy",
                        "u1",
                        "u2",
                        "u3",
                    ],
                    &rows,
                )
            }
            Problem::AttitudeLyap(s) => {
                let tr = attitude::simulate_quat(m("Kp"), m("Kd"), s, true).map_err(|e| sim(&e))?;
                let rows = thin(tr.times.len())
                    .into_iter()
                    .map(|k| {
                        let x = &tr.states[k];
                        let u = tr.controls[k];
                        let mut row = vec![tr.times[k]];
                        row.extend_from_slice(&x[..8]);
                        row.extend_from_slice(&u);
                        row
                    })
                    .collect::<Vec<_>>();
                table_csv(
                    &["t", "q0", "q1", "q2", "q3", "p", "q", "r", "energy", "u1", "u2", "u3"],
                    &rows,
                )
            }
            Problem::Glc { problem, settings, .. } => {
                let (tr, _) = glc::simulate(m("K"), problem, settings, true).map_err(|e| sim(&e))?;
                let samples = glc::samples(&tr, m("K"), problem).map_err(|e| sim(&e))?;
                let keep = thin(samples.len());
                serde_csv(keep.into_iter().map(|k| samples[k]))
            }
            Problem::Qlaw {
                problem,
                settings,
                base,
                ..
            } => {
                let cfg = self.qlaw_config(base, c);
                let tr = qlaw::simulate(&cfg, problem, settings, true).map_err(|e| sim(&e))?;
                let samples = qlaw::samples(&tr, problem);
                let keep = thin(samples.len());
                serde_csv(keep.into_iter().map(|k| samples[k]))
            }
        }
    }

    /// One-line description of the resolved problem in canonical units.
    pub fn describe(&self) -> String {
        let head = format!(
            "{} ({}, {:?}), hash {}",
            self.name(),
            self.testbed().label(),
            self.config.objective,
            &self.config_hash[..12]
        );
        let body = match &self.problem {
            Problem::Zermelo(z) => format!("x0 = {:?}, radius {}", z.x0, z.radius),
            Problem::AttitudeLqr(s) | Problem::AttitudeLyap(s) => format!(
                "inertia {:?} kg m^2, euler0 {:?} deg, rates0 {:?} rad/s",
                s.inertia, s.euler0_deg, s.rates0
            ),
            Problem::Glc { problem: p, .. } | Problem::Qlaw { problem: p, .. } => {
                let i = &p.initial;
                format!(
                    "case {}: a0 = {:.5} DU, e0 = {:.6}, i0 = {:.2} deg, a_T = {:.5} DU, thrust {} N, m0 {} kg, Isp {} s, DU {} km, TU {:.4} s",
                    p.case.label(),
                    i.a,
                    i.e,
                    i.i.to_degrees(),
                    p.target.a,
                    p.thrust.thrust,
                    p.thrust.m0,
                    p.thrust.isp,
                    p.frame.du,
                    p.frame.tu
                )
            }
        };
        format!("{head}\n  {body}")
    }
}

/// Indices of at most [`MAX_TRAJECTORY_ROWS`] evenly spaced rows, always
/// keeping the last one.
fn thin(n: usize) -> Vec<usize> {
    if n <= MAX_TRAJECTORY_ROWS {
        return (0..n).collect();
    }
    let stride = n.div_ceil(MAX_TRAJECTORY_ROWS - 1);
    let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
    if *idx.last().unwrap() != n - 1 {
        idx.push(n - 1);
    }
    idx
}

fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let ioe = |e: csv::Error| HarnessError::Io(e.to_string());
    w.write_record(header).map_err(ioe)?;
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string())).map_err(ioe)?;
    }
    finish_csv(w)
}

fn serde_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| HarnessError::Io(e.to_string()))?;
    }
    finish_csv(w)
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String, HarnessError> {
    let bytes = w.into_inner().map_err(|e| HarnessError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| HarnessError::Io(e.to_string()))
}

/// Parses scenario JSON; schema errors name the offending field path.
pub fn parse_scenario(text: &str) -> Result<Scenario, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::Schema {
            field: if path == "." { "<root>".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })?;
    Scenario::from_config(config)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_scenario(&text)
}

pub fn bundled_scenario(name: &str) -> Result<Scenario, ConfigError> {
    let (_, text) = BUNDLED_SCENARIOS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| ConfigError::Unknown(name.into()))?;
    parse_scenario(text)
}

/// A file path if one exists, otherwise a bundled scenario name.
pub fn resolve_scenario(arg: &str) -> Result<Scenario, ConfigError> {
    let p = Path::new(arg);
    if p.is_file() {
        load_scenario(p)
    } else {
        bundled_scenario(arg)
    }
}

/// One matrix as written in the appendix: a diagonal or full rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum MatrixEntry {
    Diag(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

impl MatrixEntry {
    pub fn to_mat(&self) -> Result<Mat, String> {
        match self {
            MatrixEntry::Diag(d) if !d.is_empty() => Ok(Mat::from_diag(d)),
            MatrixEntry::Rows(r) if !r.is_empty() && r.iter().all(|row| row.len() == r.len()) => {
                Mat::from_vec(r.len(), r.len(), r.concat()).map_err(|e| e.to_string())
            }
            _ => Err("matrix must be a nonempty diagonal or square rows".into()),
        }
    }
}

/// Published penalty matrices for one testbed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFixture {
    pub testbed: Testbed,
    pub case: String,
    pub objective: ObjectiveKind,
    pub diag: BTreeMap<String, MatrixEntry>,
    pub full: BTreeMap<String, MatrixEntry>,
}

impl MatrixFixture {
    pub fn controller(&self, kind: MatrixKind) -> Result<Controller, ConfigError> {
        let set = match kind {
            MatrixKind::Diag => &self.diag,
            MatrixKind::Full => &self.full,
        };
        let mut matrices = BTreeMap::new();
        for (name, entry) in set {
            let m = entry
                .to_mat()
                .map_err(|e| ConfigError::field(format!("{}.{name}", kind.label()), e))?;
            matrices.insert(name.clone(), m);
        }
        Ok(Controller {
            matrices,
            eta_cut: None,
        })
    }

    /// SHA-256 over the canonical serialization of the parsed values.
    pub fn checksum(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("fixture serializes")))
    }
}

pub fn parse_fixture(text: &str) -> Result<MatrixFixture, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Schema {
        field: e.path().to_string(),
        message: e.into_inner().to_string(),
    })
}

/// A fixture file path, or a bundled appendix name (`A1` … `A5`).
pub fn resolve_fixture(arg: &str) -> Result<MatrixFixture, ConfigError> {
    let p = Path::new(arg);
    if p.is_file() {
        let text = fs::read_to_string(p).map_err(|e| ConfigError::Io {
            path: arg.into(),
            message: e.to_string(),
        })?;
        return parse_fixture(&text);
    }
    let key = arg.trim_start_matches("appendix_").trim_end_matches(".json");
    let (_, text) = APPENDIX_FIXTURES
        .iter()
        .find(|(n, _)| *n == key)
        .ok_or_else(|| ConfigError::Unknown(arg.into()))?;
    parse_fixture(text)
}

/// Outcome of one tuning run or replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub case: String,
    pub matrix_kind: MatrixKind,
    pub penalty_kind: PenaltyKind,
    pub run: usize,
    pub seed: u64,
    pub wall_time_s: f64,
    /// Empty for replays, which start from matrices.
    pub best_params: Vec<f64>,
    pub controller: Option<Controller>,
    pub objective: f64,
    pub converged: bool,
    /// Final time in the testbed's reporting unit (s or days).
    pub final_time: f64,
    pub note: Option<String>,
    pub evaluations: usize,
    pub trajectory_file: Option<String>,
    pub config_hash: String,
    pub build_id: String,
}

impl RunRecord {
    /// Recomputes the objective from the stored parameters or matrices.
    pub fn reevaluate(&self, s: &Scenario) -> Evaluation {
        if !self.best_params.is_empty() {
            s.evaluate_params(self.penalty_kind, &self.best_params)
        } else {
            match &self.controller {
                Some(c) => s.evaluate_controller(c),
                None => Evaluation::invalid("record has neither parameters nor matrices"),
            }
        }
    }

    /// Checks the config hash and the re-evaluated objective.
    pub fn verify(&self, s: &Scenario) -> Result<(), HarnessError> {
        if self.config_hash != s.config_hash {
            return Err(ConfigError::field("config_hash", "record was produced by a different scenario").into());
        }
        let v = self.reevaluate(s).value;
        let scale = self.objective.abs().max(1e-300);
        if (v - self.objective).abs() > REEVAL_REL_TOL * scale {
            return Err(HarnessError::Simulation(format!(
                "objective re-evaluated to {v}, record holds {}",
                self.objective
            )));
        }
        Ok(())
    }
}

fn record_from(
    s: &Scenario,
    kind: MatrixKind,
    run: usize,
    seed: u64,
    params: Vec<f64>,
    controller: Option<Controller>,
    eval: Evaluation,
    evaluations: usize,
    wall: f64,
) -> RunRecord {
    RunRecord {
        case: s.name().to_string(),
        matrix_kind: kind,
        penalty_kind: s.penalty_kind(kind),
        run,
        seed,
        wall_time_s: wall,
        best_params: params,
        controller,
        objective: eval.value,
        converged: eval.converged,
        final_time: eval.final_time,
        note: eval.note,
        evaluations,
        trajectory_file: None,
        config_hash: s.config_hash.clone(),
        build_id: BUILD_ID.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOptions {
    pub kind: MatrixKind,
    pub runs: usize,
    pub seed: u64,
    /// Overrides the swarm size and iteration count of the scenario.
    pub budget: Option<Budget>,
}

impl TuneOptions {
    pub fn from_scenario(s: &Scenario, kind: MatrixKind) -> Self {
        Self {
            kind,
            runs: s.config.runs,
            seed: s.config.seed,
            budget: None,
        }
    }
}

/// Independent swarm runs with seeds `seed..seed+runs`, executed concurrently.
pub fn tune(s: &Scenario, opts: &TuneOptions) -> Result<Vec<RunRecord>, HarnessError> {
    if opts.runs < 1 {
        return Err(ConfigError::field("runs", "must be at least 1").into());
    }
    let pk = s.penalty_kind(opts.kind);
    let (lo, hi) = s.search_box(pk);
    (0..opts.runs)
        .into_par_iter()
        .map(|run| {
            let seed = opts.seed + run as u64;
            let mut cfg = SwarmConfig {
                seed,
                ..s.config.swarm.clone()
            };
            if let Some(b) = opts.budget {
                cfg.swarm_size = b.swarm_size;
                cfg.max_iters = b.max_iters;
            }
            let t0 = Instant::now();
            let res = optimize(|x: &[f64]| s.evaluate_params(pk, x).value, &lo, &hi, &cfg)?;
            let eval = s.evaluate_params(pk, &res.best_params);
            let controller = s.decode(pk, &res.best_params).ok();
            log::info!(
                "{} {} run {run} (seed {seed}): {:.6} after {} evaluations",
                s.name(),
                opts.kind.label(),
                eval.value,
                res.evaluations
            );
            Ok(record_from(
                s,
                opts.kind,
                run,
                seed,
                res.best_params,
                controller,
                eval,
                res.evaluations,
                t0.elapsed().as_secs_f64(),
            ))
        })
        .collect()
}

/// Single simulation with fixed matrices; never calls the optimizer.
pub fn replay(s: &Scenario, kind: MatrixKind, controller: &Controller) -> Result<RunRecord, HarnessError> {
    s.check_controller(controller)?;
    let t0 = Instant::now();
    let eval = s.evaluate_controller(controller);
    Ok(record_from(
        s,
        kind,
        0,
        0,
        Vec::new(),
        Some(controller.clone()),
        eval,
        1,
        t0.elapsed().as_secs_f64(),
    ))
}

/// Replays a fixture after checking it belongs to the scenario's testbed.
pub fn replay_fixture(s: &Scenario, fixture: &MatrixFixture, kind: MatrixKind) -> Result<RunRecord, HarnessError> {
    if fixture.testbed != s.testbed() {
        return Err(ConfigError::field(
            "testbed",
            format!(
                "fixture is for {}, scenario is {}",
                fixture.testbed.label(),
                s.testbed().label()
            ),
        )
        .into());
    }
    replay(s, kind, &fixture.controller(kind)?)
}

/// One row of the per-run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub case: String,
    pub matrix_kind: MatrixKind,
    pub run: usize,
    pub seed: u64,
    pub objective: f64,
    pub mean: f64,
    pub best: f64,
}

/// Diagonal vs full comparison for one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub case: String,
    pub mean_diag: f64,
    pub mean_full: f64,
    pub best_diag: f64,
    pub best_full: f64,
    #[serde(rename = "mean(J(K2))-mean(J(K1))")]
    pub mean_difference: f64,
}

fn group_stats(records: &[RunRecord]) -> BTreeMap<(String, MatrixKind), (f64, f64)> {
    let mut groups: BTreeMap<(String, MatrixKind), Vec<f64>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.case.clone(), r.matrix_kind))
            .or_default()
            .push(r.objective);
    }
    groups
        .into_iter()
        .map(|(k, v)| {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let best = v.iter().copied().fold(f64::INFINITY, f64::min);
            (k, (mean, best))
        })
        .collect()
}

/// Per-run rows with the mean and best of their (case, kind) group.
pub fn summary_rows(records: &[RunRecord]) -> Vec<SummaryRow> {
    let stats = group_stats(records);
    records
        .iter()
        .map(|r| {
            let (mean, best) = stats[&(r.case.clone(), r.matrix_kind)];
            SummaryRow {
                case: r.case.clone(),
                matrix_kind: r.matrix_kind,
                run: r.run,
                seed: r.seed,
                objective: r.objective,
                mean,
                best,
            }
        })
        .collect()
}

/// Cases that have both diagonal and full runs.
pub fn comparison_rows(records: &[RunRecord]) -> Vec<ComparisonRow> {
    let stats = group_stats(records);
    let cases: Vec<String> = stats.keys().map(|(c, _)| c.clone()).collect();
    let mut out: Vec<ComparisonRow> = Vec::new();
    for case in cases {
        if out.iter().any(|r| r.case == case) {
            continue;
        }
        if let (Some(d), Some(f)) = (
            stats.get(&(case.clone(), MatrixKind::Diag)),
            stats.get(&(case.clone(), MatrixKind::Full)),
        ) {
            out.push(ComparisonRow {
                case,
                mean_diag: d.0,
                mean_full: f.0,
                best_diag: d.1,
                best_full: f.1,
                mean_difference: f.0 - d.0,
            });
        }
    }
    out
}

/// Machine-readable output; loads back into the same scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitDoc {
    pub config: ScenarioConfig,
    pub config_hash: String,
    pub build_id: String,
    pub records: Vec<RunRecord>,
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn file_stem(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes `summary.csv`, `comparison.csv` (when both kinds are present),
/// per-run trajectory CSVs on request, and `runs.json`. Files are written
/// one at a time.
pub fn emit(
    s: &Scenario,
    records: &mut [RunRecord],
    out_dir: &Path,
    trajectories: bool,
) -> Result<Vec<PathBuf>, HarnessError> {
    if records.is_empty() {
        return Err(ConfigError::field("records", "nothing to emit").into());
    }
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let mut written = Vec::new();
    if trajectories {
        for r in records.iter_mut() {
            let Some(c) = &r.controller else { continue };
            let name = format!(
                "trajectory_{}_{}_run{}.csv",
                file_stem(&r.case),
                r.matrix_kind.label(),
                r.run
            );
            let path = out_dir.join(&name);
            write_file(&path, &s.trajectory_csv(c)?)?;
            r.trajectory_file = Some(name);
            written.push(path);
        }
    }
    let summary = out_dir.join("summary.csv");
    write_file(&summary, &serde_csv(summary_rows(records))?)?;
    written.push(summary);
    let cmp = comparison_rows(records);
    if !cmp.is_empty() {
        let path = out_dir.join("comparison.csv");
        write_file(&path, &serde_csv(cmp)?)?;
        written.push(path);
    }
    let doc = EmitDoc {
        config: s.config.clone(),
        config_hash: s.config_hash.clone(),
        build_id: BUILD_ID.to_string(),
        records: records.to_vec(),
    };
    let json = out_dir.join("runs.json");
    let text = serde_json::to_string_pretty(&doc).map_err(|e| HarnessError::Io(e.to_string()))?;
    write_file(&json, &text)?;
    written.push(json);
    Ok(written)
}

/// Reads `runs.json` back and rebuilds its scenario.
pub fn load_emitted(path: &Path) -> Result<(Scenario, Vec<RunRecord>), HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let doc: EmitDoc = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Schema {
        field: e.path().to_string(),
        message: e.into_inner().to_string(),
    })?;
    let s = Scenario::from_config(doc.config)?;
    if s.config_hash != doc.config_hash {
        return Err(ConfigError::field("config_hash", "does not match the embedded config").into());
    }
    Ok((s, doc.records))
}

/// Zermelo `V`, `V̇` and `‖u‖` on the scenario's grid.
pub fn emit_surfaces(s: &Scenario, c: &Controller, out_dir: &Path) -> Result<PathBuf, HarnessError> {
    if s.testbed() != Testbed::Zermelo {
        return Err(ConfigError::field("testbed", "surfaces are only defined for zermelo").into());
    }
    s.check_controller(c)?;
    let grid = s.config.surface_grid.unwrap_or_default();
    let rows = zermelo::export_surfaces(&c.matrices["K"], &grid);
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let path = out_dir.join(format!("surfaces_{}.csv", file_stem(s.name())));
    write_file(&path, &serde_csv(rows)?)?;
    Ok(path)
}
