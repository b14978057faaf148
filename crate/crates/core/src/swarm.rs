//! Bounded-box particle swarm optimizer.
//!
//! Global-best PSO with inertia weight. All random draws come from one
//! ChaCha stream consumed in particle order before each evaluation sweep, and
//! sweep results are reduced by particle index, so the outcome depends only on
//! the seed and configuration, never on how many threads evaluated the swarm.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SwarmError {
    #[error("invalid swarm configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
    #[error("optimization degenerate: every objective value in sweep {iteration} was NaN")]
    OptimizationDegenerate { iteration: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwarmConfig {
    pub swarm_size: usize,
    pub max_iters: usize,
    pub seed: u64,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub stall_tolerance: f64,
    pub stall_window: usize,
    /// Evaluate each sweep on the rayon pool.
    pub parallel: bool,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            swarm_size: 50,
            max_iters: 100,
            seed: 0,
            inertia: 0.7298,
            cognitive: 1.49618,
            social: 1.49618,
            stall_tolerance: 1e-8,
            stall_window: 50,
            parallel: true,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<(), SwarmError> {
        let bad = |m: &str| Err(SwarmError::InvalidConfig(m.to_string()));
        if self.swarm_size < 2 {
            return bad("swarm_size must be at least 2");
        }
        if self.max_iters < 1 {
            return bad("max_iters must be at least 1");
        }
        if !(self.inertia > 0.0 && self.inertia < 1.0) {
            return bad("inertia must lie in (0, 1)");
        }
        if !(self.cognitive > 0.0 && self.social > 0.0) {
            return bad("cognitive and social coefficients must be positive");
        }
        if self.stall_window < 1 || !(self.stall_tolerance >= 0.0) {
            return bad("stall_window must be ≥ 1 and stall_tolerance ≥ 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best_value: f64,
    pub best_params: Vec<f64>,
    pub evaluations: usize,
    /// Best-so-far value after the initial sweep and after every iteration.
    pub history: Vec<f64>,
    /// Objective calls that returned NaN (scored as +∞).
    pub nan_count: usize,
}

struct Particle {
    x: Vec<f64>,
    v: Vec<f64>,
    best_x: Vec<f64>,
    best_f: f64,
}

fn check_bounds(lower: &[f64], upper: &[f64]) -> Result<(), SwarmError> {
    if lower.is_empty() || lower.len() != upper.len() {
        return Err(SwarmError::InvalidBounds(format!(
            "lower has {} entries, upper has {}",
            lower.len(),
            upper.len()
        )));
    }
    for (i, (l, u)) in lower.iter().zip(upper).enumerate() {
        if !(l.is_finite() && u.is_finite() && l < u) {
            return Err(SwarmError::InvalidBounds(format!("slot {i}: [{l}, {u}]")));
        }
    }
    Ok(())
}

fn evaluate<F>(objective: &F, points: &[Vec<f64>], parallel: bool) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if parallel {
        points.par_iter().map(|x| objective(x)).collect()
    } else {
        points.iter().map(|x| objective(x)).collect()
    }
}

/// Minimizes `objective` over the box `[lower, upper]`.
///
/// NaN objective values are scored as +∞ and counted; a sweep in which every
/// value is NaN aborts with [`SwarmError::OptimizationDegenerate`].
pub fn optimize<F>(objective: F, lower: &[f64], upper: &[f64], config: &SwarmConfig) -> Result<TuneResult, SwarmError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate()?;
    check_bounds(lower, upper)?;
    let dim = lower.len();
    let span: Vec<f64> = lower.iter().zip(upper).map(|(l, u)| u - l).collect();
    let vmax: Vec<f64> = span.iter().map(|s| 0.5 * s).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut particles: Vec<Particle> = (0..config.swarm_size)
        .map(|_| {
            let x: Vec<f64> = (0..dim).map(|d| lower[d] + rng.random::<f64>() * span[d]).collect();
            let v: Vec<f64> = (0..dim).map(|d| (2.0 * rng.random::<f64>() - 1.0) * vmax[d]).collect();
            Particle {
                best_x: x.clone(),
                x,
                v,
                best_f: f64::INFINITY,
            }
        })
        .collect();

    let mut nan_count = 0usize;
    let mut evaluations = 0usize;
    let mut score = |values: Vec<f64>, iteration: usize| -> Result<Vec<f64>, SwarmError> {
        evaluations += values.len();
        let nans = values.iter().filter(|v| v.is_nan()).count();
        if nans == values.len() {
            return Err(SwarmError::OptimizationDegenerate { iteration });
        }
        nan_count += nans;
        Ok(values
            .into_iter()
            .map(|v| if v.is_nan() { f64::INFINITY } else { v })
            .collect())
    };

    let positions: Vec<Vec<f64>> = particles.iter().map(|p| p.x.clone()).collect();
    let values = score(evaluate(&objective, &positions, config.parallel), 0)?;
    let mut global_f = f64::INFINITY;
    let mut global_x = particles[0].x.clone();
    for (p, f) in particles.iter_mut().zip(values) {
        p.best_f = f;
        if f < global_f {
            global_f = f;
            global_x = p.x.clone();
        }
    }
    let mut history = vec![global_f];

    for iteration in 1..=config.max_iters {
        for p in particles.iter_mut() {
            for d in 0..dim {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let mut v = config.inertia * p.v[d]
                    + config.cognitive * r1 * (p.best_x[d] - p.x[d])
                    + config.social * r2 * (global_x[d] - p.x[d]);
                v = v.clamp(-vmax[d], vmax[d]);
                let mut x = p.x[d] + v;
                if x < lower[d] {
                    x = lower[d];
                    v = 0.0;
                } else if x > upper[d] {
                    x = upper[d];
                    v = 0.0;
                }
                p.x[d] = x;
                p.v[d] = v;
            }
        }
        let positions: Vec<Vec<f64>> = particles.iter().map(|p| p.x.clone()).collect();
        let values = score(evaluate(&objective, &positions, config.parallel), iteration)?;
        for (p, f) in particles.iter_mut().zip(values) {
            if f < p.best_f {
                p.best_f = f;
                p.best_x = p.x.clone();
            }
            if f < global_f {
                global_f = f;
                global_x = p.x.clone();
            }
        }
        history.push(global_f);

        let w = config.stall_window;
        if history.len() > w {
            let old = history[history.len() - 1 - w];
            let tol = config.stall_tolerance * global_f.abs().max(1.0);
            if old.is_finite() && old - global_f < tol {
                log::debug!("swarm stalled at iteration {iteration} (best {global_f:.6e})");
                break;
            }
        }
    }

    Ok(TuneResult {
        best_value: global_f,
        best_params: global_x,
        evaluations,
        history,
        nan_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn sphere_converges() {
        let cfg = SwarmConfig {
            swarm_size: 50,
            max_iters: 200,
            seed: 7,
            ..Default::default()
        };
        let r = optimize(sphere, &[-5.0; 3], &[5.0; 3], &cfg).unwrap();
        assert!(r.best_value < 1e-6, "best {}", r.best_value);
        assert_eq!(r.best_value, sphere(&r.best_params));
    }

    #[test]
    fn rosenbrock_converges() {
        assert_eq!(rosenbrock(&[1.0, 1.0]), 0.0);
        let cfg = SwarmConfig {
            swarm_size: 100,
            max_iters: 500,
            seed: 3,
            ..Default::default()
        };
        let r = optimize(rosenbrock, &[-2.0; 2], &[2.0; 2], &cfg).unwrap();
        assert!(r.best_value < 1e-3, "best {}", r.best_value);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let cfg = SwarmConfig {
            seed: 42,
            max_iters: 60,
            ..Default::default()
        };
        let a = optimize(rosenbrock, &[-2.0; 2], &[2.0; 2], &cfg).unwrap();
        let b = optimize(rosenbrock, &[-2.0; 2], &[2.0; 2], &cfg).unwrap();
        assert_eq!(a, b);
        let serial = SwarmConfig { parallel: false, ..cfg };
        assert_eq!(a, optimize(rosenbrock, &[-2.0; 2], &[2.0; 2], &serial).unwrap());
    }

    #[test]
    fn nan_is_scored_as_infinite() {
        let cfg = SwarmConfig {
            max_iters: 30,
            ..Default::default()
        };
        let f = |x: &[f64]| if x[0] > 0.0 { f64::NAN } else { x[0] * x[0] };
        let r = optimize(f, &[-1.0], &[1.0], &cfg).unwrap();
        assert!(r.nan_count > 0);
        assert!(r.best_params[0] <= 0.0);
        assert!(r.best_value < 1e-4);
    }

    #[test]
    fn all_nan_is_degenerate() {
        let r = optimize(|_: &[f64]| f64::NAN, &[0.0], &[1.0], &SwarmConfig::default());
        assert!(matches!(r, Err(SwarmError::OptimizationDegenerate { iteration: 0 })));
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = SwarmConfig::default();
        assert!(matches!(
            optimize(sphere, &[1.0], &[0.0], &cfg),
            Err(SwarmError::InvalidBounds(_))
        ));
        assert!(matches!(
            optimize(sphere, &[0.0, 0.0], &[1.0], &cfg),
            Err(SwarmError::InvalidBounds(_))
        ));
        let cfg = SwarmConfig {
            swarm_size: 1,
            ..Default::default()
        };
        assert!(matches!(
            optimize(sphere, &[0.0], &[1.0], &cfg),
            Err(SwarmError::InvalidConfig(_))
        ));
        let cfg = SwarmConfig {
            inertia: 1.2,
            ..Default::default()
        };
        assert!(matches!(
            optimize(sphere, &[0.0], &[1.0], &cfg),
            Err(SwarmError::InvalidConfig(_))
        ));
    }
}
