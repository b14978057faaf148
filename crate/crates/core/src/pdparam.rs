//! Positive-definite penalty matrices from unconstrained decision vectors.
//!
//! A full penalty matrix is assembled as `K = Q·Λ·Qᵀ` with strictly positive
//! eigenvalues `Λ` and an orthogonal `Q` built from `N(N−1)/2` parameters by one
//! of three constructions:
//!
//! * [`ortho_geagsp`]: generalized spherical angles, each unit vector projected
//!   onto an orthonormal basis of the null space of the columns built so far;
//! * [`ortho_cayley`]: `Q = (I + X)(I − X)⁻¹` for skew-symmetric `X`;
//! * [`ortho_givens`]: a fixed-order product of plane rotations.
//!
//! The plain diagonal form and the direct symmetric form (PD checked after the
//! fact) are kept as baselines.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrixkit::{self, linsolve, sym_eig, Mat, MatrixError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("dimension mismatch: expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("parameter {index} must be strictly positive, got {value}")]
    NonPositive { index: usize, value: f64 },
    #[error("assembled matrix is not positive definite (min eigenvalue {min_eig:.3e})")]
    NotPositiveDefinite { min_eig: f64 },
    #[error("non-finite parameter at index {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    Diagonal,
    EigenGeagsp,
    EigenCayley,
    EigenGivens,
    DirectSymmetric,
}

impl PenaltyKind {
    /// Parameterization used for "full" matrices unless configured otherwise.
    pub const DEFAULT_FULL: PenaltyKind = PenaltyKind::EigenGeagsp;

    pub fn is_eigen(self) -> bool {
        matches!(
            self,
            PenaltyKind::EigenGeagsp | PenaltyKind::EigenCayley | PenaltyKind::EigenGivens
        )
    }

    /// Number of decision variables for an `n`×`n` matrix.
    pub fn param_count(self, n: usize) -> usize {
        match self {
            PenaltyKind::Diagonal => n,
            PenaltyKind::DirectSymmetric => (n * n + n) / 2,
            _ => n + rotation_param_count(n),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PenaltyKind::Diagonal => "diag",
            PenaltyKind::EigenGeagsp => "full-geagsp",
            PenaltyKind::EigenCayley => "full-cayley",
            PenaltyKind::EigenGivens => "full-givens",
            PenaltyKind::DirectSymmetric => "full-direct",
        }
    }
}

pub fn rotation_param_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// A decision vector that deterministically assembles an `n`×`n` penalty matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    pub kind: PenaltyKind,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl PenaltyParams {
    pub fn new(kind: PenaltyKind, dim: usize, values: Vec<f64>) -> Result<Self, ParamError> {
        let p = Self { kind, dim, values };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let expected = self.kind.param_count(self.dim);
        if self.values.len() != expected {
            return Err(ParamError::DimensionMismatch {
                expected,
                got: self.values.len(),
            });
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(ParamError::NonFinite(i));
        }
        let positive_slots = match self.kind {
            PenaltyKind::DirectSymmetric => 0,
            _ => self.dim,
        };
        for (index, &value) in self.values.iter().take(positive_slots).enumerate() {
            if value <= 0.0 {
                return Err(ParamError::NonPositive { index, value });
            }
        }
        Ok(())
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values[..self.dim]
    }

    pub fn rotation_params(&self) -> &[f64] {
        &self.values[self.dim..]
    }
}

fn check_count(n: usize, got: usize) -> Result<(), ParamError> {
    let expected = rotation_param_count(n);
    if got != expected {
        return Err(ParamError::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Solves `n(n−1)/2 = m` for `n`.
pub fn dim_from_rotation_count(m: usize) -> Option<usize> {
    (1..=64).find(|&n| rotation_param_count(n) == m)
}

/// Unit vector in `angles.len() + 1` dimensions from generalized spherical angles.
fn spherical_unit(angles: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(angles.len() + 1);
    let mut sin_prod = 1.0;
    for &a in angles {
        v.push(sin_prod * a.cos());
        sin_prod *= a.sin();
    }
    v.push(sin_prod);
    v
}

/// Modified Gram–Schmidt with one re-orthogonalization pass.
fn orthogonalize(v: &mut [f64], against: &[Vec<f64>]) {
    for _pass in 0..2 {
        for u in against {
            let c = matrixkit::dot(v, u);
            v.iter_mut().zip(u).for_each(|(x, y)| *x -= c * y);
        }
    }
}

/// Orthonormal basis of the orthogonal complement of `cols`, obtained by
/// completing with standard basis vectors and dropping near-dependent ones.
fn complement_basis(n: usize, cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let need = n - cols.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(need);
    for k in 0..n {
        if basis.len() == need {
            break;
        }
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        orthogonalize(&mut e, cols);
        orthogonalize(&mut e, &basis);
        let nrm = matrixkit::norm(&e);
        if nrm > 1e-10 {
            e.iter_mut().for_each(|x| *x /= nrm);
            // one more pass after normalization keeps ‖QᵀQ − I‖ at round-off level
            orthogonalize(&mut e, cols);
            orthogonalize(&mut e, &basis);
            let nrm = matrixkit::norm(&e);
            e.iter_mut().for_each(|x| *x /= nrm);
            basis.push(e);
        }
    }
    basis
}

/// Orthogonal matrix from generalized Euler angles and Gram–Schmidt projection.
///
/// `angles` holds θ_{i,j} for i = 1..N, j = 1..N−i in row order. Column i is the
/// spherical unit vector built from θ_{i,·} expressed in an orthonormal basis
/// of the complement of columns 1..i−1. The last column is one-dimensional and
/// is oriented so that det(Q) = +1, which reproduces the planar rotation
/// `[[cos θ, −sin θ], [sin θ, cos θ]]` for N = 2.
pub fn ortho_geagsp(angles: &[f64]) -> Result<Mat, ParamError> {
    let n = dim_from_rotation_count(angles.len()).ok_or(ParamError::DimensionMismatch {
        expected: rotation_param_count(2),
        got: angles.len(),
    })?;
    check_count(n, angles.len())?;
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut offset = 0;
    for i in 0..n {
        let count = n - 1 - i;
        let vp = spherical_unit(&angles[offset..offset + count]);
        offset += count;
        let basis = complement_basis(n, &cols);
        let mut v = vec![0.0; n];
        for (b, &c) in basis.iter().zip(&vp) {
            v.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
        }
        cols.push(v);
    }
    let mut q = Mat::zeros(n, n);
    for (j, c) in cols.iter().enumerate() {
        q.set_col(j, c);
    }
    if q.det() < 0.0 {
        for i in 0..n {
            q[(i, n - 1)] = -q[(i, n - 1)];
        }
    }
    Ok(q)
}

/// Skew-symmetric X with X[i][j] = x, X[j][i] = −x over (i, j), i > j, in
/// lexicographic order (2,1), (3,1), (3,2), (4,1), ...
pub fn skew_from_params(params: &[f64]) -> Result<Mat, ParamError> {
    let n = dim_from_rotation_count(params.len()).ok_or(ParamError::DimensionMismatch {
        expected: rotation_param_count(2),
        got: params.len(),
    })?;
    let mut x = Mat::zeros(n, n);
    let mut k = 0;
    for i in 1..n {
        for j in 0..i {
            x[(i, j)] = params[k];
            x[(j, i)] = -params[k];
            k += 1;
        }
    }
    Ok(x)
}

/// Cayley transform `Q = (I + X)(I − X)⁻¹`; always special orthogonal.
pub fn ortho_cayley(skew_params: &[f64]) -> Result<Mat, ParamError> {
    let x = skew_from_params(skew_params)?;
    let n = x.rows();
    let eye = Mat::identity(n);
    // Q = (I+X)(I−X)⁻¹  ⇔  (I−X)ᵀ Qᵀ = (I+X)ᵀ
    let lhs = (&eye - &x).transpose();
    let rhs = (&eye + &x).transpose();
    Ok(linsolve(&lhs, &rhs)?.transpose())
}

/// Plane rotation G(i, j, θ) with i > j (zero-based indices).
pub fn givens(n: usize, i: usize, j: usize, theta: f64) -> Mat {
    let mut g = Mat::identity(n);
    let (s, c) = theta.sin_cos();
    g[(i, i)] = c;
    g[(j, j)] = c;
    g[(j, i)] = s;
    g[(i, j)] = -s;
    g
}

/// `Q = G₁ᵀ·G₂ᵀ·…·G_Mᵀ` with planes ordered lexicographically over i > j.
pub fn ortho_givens(angles: &[f64]) -> Result<Mat, ParamError> {
    let n = dim_from_rotation_count(angles.len()).ok_or(ParamError::DimensionMismatch {
        expected: rotation_param_count(2),
        got: angles.len(),
    })?;
    let mut q = Mat::identity(n);
    let mut k = 0;
    for i in 1..n {
        for j in 0..i {
            q = q.matmul(&givens(n, i, j, angles[k]).transpose());
            k += 1;
        }
    }
    Ok(q)
}

/// Orthogonal factor for an Eigen* kind.
pub fn ortho_for(kind: PenaltyKind, n: usize, params: &[f64]) -> Result<Mat, ParamError> {
    check_count(n, params.len())?;
    if n == 1 {
        return Ok(Mat::identity(1));
    }
    match kind {
        PenaltyKind::EigenGeagsp => ortho_geagsp(params),
        PenaltyKind::EigenCayley => ortho_cayley(params),
        PenaltyKind::EigenGivens => ortho_givens(params),
        _ => unreachable!("ortho_for called with non-eigen kind"),
    }
}

/// Symmetric matrix from its upper triangle listed row by row.
pub fn symmetric_from_upper(n: usize, values: &[f64]) -> Mat {
    let mut k = Mat::zeros(n, n);
    let mut idx = 0;
    for i in 0..n {
        for j in i..n {
            k[(i, j)] = values[idx];
            k[(j, i)] = values[idx];
            idx += 1;
        }
    }
    k
}

/// Assembles the penalty matrix described by `params`.
pub fn assemble(params: &PenaltyParams) -> Result<Mat, ParamError> {
    params.validate()?;
    let n = params.dim;
    match params.kind {
        PenaltyKind::Diagonal => Ok(Mat::from_diag(&params.values)),
        PenaltyKind::DirectSymmetric => {
            let k = symmetric_from_upper(n, &params.values);
            let min_eig = sym_eig(&k)?.min();
            if min_eig <= 0.0 {
                return Err(ParamError::NotPositiveDefinite { min_eig });
            }
            Ok(k)
        }
        kind => {
            let q = ortho_for(kind, n, params.rotation_params())?;
            let lambda = Mat::from_diag(params.eigenvalues());
            Ok(q.matmul(&lambda).matmul(&q.transpose()).symmetrize())
        }
    }
}

/// Search-box bounds for a kind: eigenvalue/diagonal slots in
/// `[eig_lo, eig_hi]`, angles in `[0, 2π]`, Cayley skew slots in `[−10, 10]`,
/// direct off-diagonal slots in `[−eig_hi, eig_hi]`.
pub fn bounds_for(kind: PenaltyKind, n: usize, eig_lo: f64, eig_hi: f64) -> (Vec<f64>, Vec<f64>) {
    let m = rotation_param_count(n);
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    match kind {
        PenaltyKind::Diagonal => {
            lo.resize(n, eig_lo);
            hi.resize(n, eig_hi);
        }
        PenaltyKind::DirectSymmetric => {
            for i in 0..n {
                for j in i..n {
                    if i == j {
                        lo.push(eig_lo);
                        hi.push(eig_hi);
                    } else {
                        lo.push(-eig_hi);
                        hi.push(eig_hi);
                    }
                }
            }
        }
        PenaltyKind::EigenCayley => {
            lo.resize(n, eig_lo);
            hi.resize(n, eig_hi);
            lo.extend(std::iter::repeat_n(-CAYLEY_BOUND, m));
            hi.extend(std::iter::repeat_n(CAYLEY_BOUND, m));
        }
        PenaltyKind::EigenGeagsp | PenaltyKind::EigenGivens => {
            lo.resize(n, eig_lo);
            hi.resize(n, eig_hi);
            lo.extend(std::iter::repeat_n(0.0, m));
            hi.extend(std::iter::repeat_n(TAU, m));
        }
    }
    (lo, hi)
}

pub const CAYLEY_BOUND: f64 = 10.0;

/// Eigenvector angle of a 2×2 PD matrix such that
/// `assemble(EigenGeagsp, [λ₁, λ₂, θ])` reproduces it.
pub fn geagsp_params_2d(k: &Mat) -> Result<Vec<f64>, ParamError> {
    let e = sym_eig(k)?;
    let v = e.eigenvectors.col(0);
    let theta = v[1].atan2(v[0]).rem_euclid(TAU);
    Ok(vec![e.eigenvalues[0], e.eigenvalues[1], theta])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn near(a: &Mat, b: &Mat, tol: f64) -> bool {
        (a - b).max_abs() <= tol
    }

    fn orth_err(q: &Mat) -> f64 {
        (&q.transpose().matmul(q) - &Mat::identity(q.rows())).norm_inf()
    }

    #[test]
    fn geagsp_examples() {
        assert!(near(&ortho_geagsp(&[0.0]).unwrap(), &Mat::identity(2), 0.0));
        let q = ortho_geagsp(&[FRAC_PI_2]).unwrap();
        assert!(near(&q, &Mat::from_rows(&[[0.0, -1.0], [1.0, 0.0]]), 1e-15));
        assert!(near(&ortho_geagsp(&[0.0; 3]).unwrap(), &Mat::identity(3), 1e-15));
        for theta in [0.3, 1.9, 3.5, 5.9] {
            let q = ortho_geagsp(&[theta]).unwrap();
            let (s, c) = f64::sin_cos(theta);
            assert!(near(&q, &Mat::from_rows(&[[c, -s], [s, c]]), 1e-15));
        }
    }

    #[test]
    fn geagsp_first_column_is_spherical() {
        let angles = [0.4, 1.1, 2.0, 0.3, 0.9, 1.7];
        let q = ortho_geagsp(&angles).unwrap();
        let v = spherical_unit(&angles[..3]);
        for i in 0..4 {
            assert!((q[(i, 0)] - v[i]).abs() < 1e-15);
        }
        assert!(orth_err(&q) < 1e-13);
    }

    #[test]
    fn cayley_examples() {
        assert!(near(&ortho_cayley(&[0.0; 3]).unwrap(), &Mat::identity(3), 0.0));
        let q = ortho_cayley(&[1.0]).unwrap();
        assert!(near(&q, &Mat::from_rows(&[[0.0, -1.0], [1.0, 0.0]]), 1e-15));
        let q = ortho_cayley(&[(15f64).to_radians().tan(), 0.0, 0.0]).unwrap();
        let (s, c) = (30f64).to_radians().sin_cos();
        let rz = Mat::from_rows(&[[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]);
        assert!(near(&q, &rz, 1e-15));
    }

    #[test]
    fn givens_examples() {
        assert!(near(&ortho_givens(&[0.0; 6]).unwrap(), &Mat::identity(4), 0.0));
        let g = ortho_givens(&[FRAC_PI_2]).unwrap();
        assert!(near(&g, &ortho_geagsp(&[FRAC_PI_2]).unwrap(), 1e-15));
        let a = 0.7;
        let q = ortho_givens(&[a, 0.0, 0.0]).unwrap();
        let (s, c) = f64::sin_cos(a);
        let want = Mat::from_rows(&[[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]);
        assert!(near(&q, &want, 1e-15));
    }

    #[test]
    fn wrong_counts_rejected() {
        assert!(matches!(
            ortho_geagsp(&[0.0; 4]),
            Err(ParamError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            ortho_cayley(&[0.0; 2]),
            Err(ParamError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            PenaltyParams::new(PenaltyKind::EigenGivens, 3, vec![1.0; 5]),
            Err(ParamError::DimensionMismatch { expected: 6, got: 5 })
        ));
        assert!(matches!(
            PenaltyParams::new(PenaltyKind::Diagonal, 2, vec![1.0, 0.0]),
            Err(ParamError::NonPositive { index: 1, .. })
        ));
    }

    #[test]
    fn assemble_identity_rotation() {
        for kind in [
            PenaltyKind::EigenGeagsp,
            PenaltyKind::EigenCayley,
            PenaltyKind::EigenGivens,
        ] {
            let p = PenaltyParams::new(kind, 2, vec![2.0, 1.0, 0.0]).unwrap();
            assert!(near(&assemble(&p).unwrap(), &Mat::from_diag(&[2.0, 1.0]), 1e-15));
        }
    }

    #[test]
    fn assemble_reconstructs_zermelo_full_gain() {
        let k2 = Mat::from_rows(&[[1.7421, 0.9560], [0.9560, 1.1414]]);
        let vals = geagsp_params_2d(&k2).unwrap();
        assert!((vals[0] - 2.4438).abs() < 1e-4 && (vals[1] - 0.4397).abs() < 1e-4);
        let p = PenaltyParams::new(PenaltyKind::EigenGeagsp, 2, vals).unwrap();
        assert!(near(&assemble(&p).unwrap(), &k2, 1e-12));
        // the four-digit rounded parameters still reproduce the printed matrix
        let theta = p.values[2];
        let rounded = PenaltyParams::new(PenaltyKind::EigenGeagsp, 2, vec![2.4438, 0.4397, theta]).unwrap();
        assert!(near(&assemble(&rounded).unwrap(), &k2, 1e-3));
    }

    #[test]
    fn direct_symmetric_rejects_indefinite() {
        let p = PenaltyParams::new(PenaltyKind::DirectSymmetric, 2, vec![1.0, 2.0, 1.0]).unwrap();
        match assemble(&p) {
            Err(ParamError::NotPositiveDefinite { min_eig }) => assert!((min_eig + 1.0).abs() < 1e-12),
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
        let p = PenaltyParams::new(PenaltyKind::DirectSymmetric, 2, vec![2.0, 1.0, 2.0]).unwrap();
        assert!(near(
            &assemble(&p).unwrap(),
            &Mat::from_rows(&[[2.0, 1.0], [1.0, 2.0]]),
            0.0
        ));
    }

    #[test]
    fn bounds_examples() {
        let (lo, hi) = bounds_for(PenaltyKind::Diagonal, 3, 1e-8, 10.0);
        assert_eq!(lo, vec![1e-8; 3]);
        assert_eq!(hi, vec![10.0; 3]);
        let (lo, hi) = bounds_for(PenaltyKind::EigenGeagsp, 2, 0.0, 100.0);
        assert_eq!(lo, vec![0.0, 0.0, 0.0]);
        assert_eq!(hi, vec![100.0, 100.0, 2.0 * PI]);
        let (lo, hi) = bounds_for(PenaltyKind::EigenGivens, 3, 1e-8, 10.0);
        assert_eq!(lo.len(), 6);
        assert_eq!(&hi[3..], &[2.0 * PI; 3]);
        let (lo, hi) = bounds_for(PenaltyKind::EigenCayley, 3, 1e-8, 10.0);
        assert_eq!(&lo[3..], &[-10.0; 3]);
        assert_eq!(&hi[3..], &[10.0; 3]);
        assert_eq!(bounds_for(PenaltyKind::DirectSymmetric, 3, 1.0, 5.0).0.len(), 6);
    }

    #[test]
    fn det_signs() {
        for a in [0.1, 2.0, 4.0] {
            assert!((ortho_cayley(&[a, -a, 0.5 * a]).unwrap().det() - 1.0).abs() < 1e-12);
            assert!((ortho_geagsp(&[a, 1.0 - a, 0.3]).unwrap().det() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn serde_kind_names() {
        assert_eq!(
            serde_json::to_string(&PenaltyKind::EigenGeagsp).unwrap(),
            "\"eigen_geagsp\""
        );
        assert_eq!(serde_json::to_string(&PenaltyKind::Diagonal).unwrap(), "\"diagonal\"");
    }
}
