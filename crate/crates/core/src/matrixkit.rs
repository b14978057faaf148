//! Small dense-matrix numerics.
//!
//! Everything in the toolkit works at dimension ≤ 8 (≤ 36 for Kronecker-form
//! Lyapunov solves), so the routines here favour accuracy and determinism over
//! asymptotic speed: cyclic Jacobi for symmetric eigenproblems, LU with partial
//! pivoting for linear solves, and a matrix-sign-function extraction of the
//! Hamiltonian stable subspace (polished by Newton–Kleinman) for the CARE.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatrixError {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("singular or ill-conditioned system (condition estimate {cond:.3e})")]
    SingularSystem { cond: f64 },
    #[error("Riccati solve failed: {0}")]
    RiccatiFailure(String),
}

pub type Result<T> = std::result::Result<T, MatrixError>;

/// Dense row-major matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(MatrixError::InvalidMatrix(format!(
                "{} entries for a {rows}×{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(MatrixError::InvalidMatrix("non-finite entry".into()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row slices. Panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), ncols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: nrows,
            cols: ncols,
            data,
        }
    }

    pub fn column(v: &[f64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[f64]) {
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// xᵀ·A·y.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(self.mul_vec(y)).map(|(a, b)| a * b).sum()
    }

    /// Induced ∞-norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn symmetrize(&self) -> Mat {
        (self + &self.transpose()).scale(0.5)
    }

    /// Symmetric within `rel_tol·max|a|`.
    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let tol = rel_tol * self.max_abs().max(f64::MIN_POSITIVE);
        (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Copies `block` into `self` with its top-left corner at (r0, c0).
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Mat) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Mat {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = self[(r0 + i, c0 + j)];
            }
        }
        m
    }

    /// Determinant via LU (zero for exactly singular input).
    pub fn det(&self) -> f64 {
        assert!(self.is_square());
        match Lu::factor(self) {
            Some(lu) => lu.det(),
            None => 0.0,
        }
    }

    pub fn inverse(&self) -> Result<Mat> {
        linsolve(self, &Mat::identity(self.rows))
    }

    /// Cholesky factor L (lower) with A = L·Lᵀ, or `None` if not positive definite.
    pub fn cholesky(&self) -> Option<Mat> {
        if !self.is_square() {
            return None;
        }
        let n = self.rows;
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= 0.0 || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Some(l)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.is_symmetric(1e-9) && self.cholesky().is_some()
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}×{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &Mat {
    type Output = Mat;
    fn add(self, rhs: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Mat {
    type Output = Mat;
    fn sub(self, rhs: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &Mat {
    type Output = Mat;
    fn mul(self, rhs: &Mat) -> Mat {
        self.matmul(rhs)
    }
}

impl Neg for &Mat {
    type Output = Mat;
    fn neg(self) -> Mat {
        self.scale(-1.0)
    }
}

impl TryFrom<Vec<Vec<f64>>> for Mat {
    type Error = MatrixError;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(MatrixError::InvalidMatrix("ragged rows".into()));
        }
        let nrows = rows.len();
        Mat::from_vec(nrows, ncols, rows.into_iter().flatten().collect())
    }
}

impl From<Mat> for Vec<Vec<f64>> {
    fn from(m: Mat) -> Self {
        (0..m.rows).map(|i| m.row(i).to_vec()).collect()
    }
}

struct Lu {
    lu: Mat,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    fn factor(a: &Mat) -> Option<Lu> {
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax == 0.0 {
                return None;
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let piv = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / piv;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu.data[i * n + j] -= f * lu.data[k * n + j];
                    }
                }
            }
        }
        Some(Lu { lu, perm, sign })
    }

    fn det(&self) -> f64 {
        self.lu.diag().iter().product::<f64>() * self.sign
    }

    fn solve(&self, b: &Mat) -> Mat {
        let n = self.lu.rows;
        let mut x = Mat::zeros(n, b.cols);
        for c in 0..b.cols {
            let mut y: Vec<f64> = self.perm.iter().map(|&p| b[(p, c)]).collect();
            for i in 0..n {
                let mut s = y[i];
                for k in 0..i {
                    s -= self.lu[(i, k)] * y[k];
                }
                y[i] = s;
            }
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in i + 1..n {
                    s -= self.lu[(i, k)] * y[k];
                }
                y[i] = s / self.lu[(i, i)];
            }
            x.set_col(c, &y);
        }
        x
    }
}

const MAX_CONDITION: f64 = 1e12;

/// Solves `a·x = b` by LU with partial pivoting and one step of iterative refinement.
pub fn linsolve(a: &Mat, b: &Mat) -> Result<Mat> {
    if !a.is_square() || a.rows != b.rows {
        return Err(MatrixError::InvalidMatrix(format!(
            "linsolve expects square a and matching b, got {}×{} and {}×{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let lu = Lu::factor(a).ok_or(MatrixError::SingularSystem { cond: f64::INFINITY })?;
    let inv = lu.solve(&Mat::identity(a.rows));
    let cond = a.norm_one() * inv.norm_one();
    if !(cond < MAX_CONDITION) {
        return Err(MatrixError::SingularSystem { cond });
    }
    let mut x = lu.solve(b);
    let r = b - &a.matmul(&x);
    let dx = lu.solve(&r);
    x = &x + &dx;
    Ok(x)
}

/// Least-squares solution of an overdetermined `a·x = b` by Householder QR.
///
/// Avoids the normal equations, whose conditioning is the square of `a`'s.
pub fn lstsq(a: &Mat, b: &Mat) -> Result<Mat> {
    let (rows, cols) = (a.rows, a.cols);
    if rows < cols || b.rows != rows {
        return Err(MatrixError::InvalidMatrix(format!(
            "lstsq expects a tall a and matching b, got {}×{} and {}×{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut r = a.clone();
    let mut y = b.clone();
    for k in 0..cols {
        let alpha = (k..rows).map(|i| r[(i, k)] * r[(i, k)]).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let alpha = if r[(k, k)] > 0.0 { -alpha } else { alpha };
        let mut v: Vec<f64> = (k..rows).map(|i| r[(i, k)]).collect();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        if vv == 0.0 {
            continue;
        }
        for j in k..cols {
            let s = 2.0 * (k..rows).map(|i| v[i - k] * r[(i, j)]).sum::<f64>() / vv;
            for i in k..rows {
                r[(i, j)] -= s * v[i - k];
            }
        }
        for j in 0..y.cols {
            let s = 2.0 * (k..rows).map(|i| v[i - k] * y[(i, j)]).sum::<f64>() / vv;
            for i in k..rows {
                y[(i, j)] -= s * v[i - k];
            }
        }
    }
    let diag: Vec<f64> = (0..cols).map(|k| r[(k, k)].abs()).collect();
    let dmax = diag.iter().cloned().fold(0.0, f64::max);
    let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let cond = dmax / dmin;
    if !(cond < MAX_CONDITION) {
        return Err(MatrixError::SingularSystem { cond });
    }
    // back substitution on the leading cols×cols triangle
    let mut x = Mat::zeros(cols, b.cols);
    for j in 0..b.cols {
        for k in (0..cols).rev() {
            let s: f64 = (k + 1..cols).map(|l| r[(k, l)] * x[(l, j)]).sum();
            x[(k, j)] = (y[(k, j)] - s) / r[(k, k)];
        }
    }
    Ok(x)
}

/// Symmetric eigendecomposition, eigenvalues in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEig {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns.
    pub eigenvectors: Mat,
}

impl SymEig {
    pub fn reconstruct(&self) -> Mat {
        let v = &self.eigenvectors;
        v.matmul(&Mat::from_diag(&self.eigenvalues)).matmul(&v.transpose())
    }

    pub fn min(&self) -> f64 {
        *self.eigenvalues.last().expect("empty decomposition")
    }
}

/// Cyclic Jacobi eigensolver for symmetric matrices.
///
/// Eigenvector sign is fixed so that the first nonzero component of each
/// column is positive.
pub fn sym_eig(a: &Mat) -> Result<SymEig> {
    if !a.is_square() {
        return Err(MatrixError::InvalidMatrix(format!(
            "sym_eig expects a square matrix, got {}×{}",
            a.rows, a.cols
        )));
    }
    if !a.is_finite() {
        return Err(MatrixError::InvalidMatrix("non-finite entry".into()));
    }
    if !a.is_symmetric(1e-12) {
        return Err(MatrixError::InvalidMatrix("matrix is not symmetric".into()));
    }
    let n = a.rows;
    let mut m = a.symmetrize();
    let mut v = Mat::identity(n);
    let scale = m.norm_fro().max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vecs = Mat::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        let mut col = v.col(i);
        let tol = 1e-12;
        if let Some(first) = col.iter().find(|x| x.abs() > tol) {
            if *first < 0.0 {
                col.iter_mut().for_each(|x| *x = -*x);
            }
        }
        vecs.set_col(c, &col);
    }
    Ok(SymEig {
        eigenvalues,
        eigenvectors: vecs,
    })
}

/// Solves the continuous Lyapunov equation `aᵀ·X + X·a = -c` through its
/// Kronecker form. Returns a symmetrized X when `c` is symmetric.
pub fn solve_lyapunov(a: &Mat, c: &Mat) -> Result<Mat> {
    let n = a.rows;
    if !a.is_square() || c.rows != n || c.cols != n {
        return Err(MatrixError::InvalidMatrix("lyapunov dimension mismatch".into()));
    }
    // vec(AᵀX + XA) = (I⊗Aᵀ + Aᵀ⊗I) vec(X) with column-stacking vec.
    let nn = n * n;
    let mut big = Mat::zeros(nn, nn);
    for j in 0..n {
        for i in 0..n {
            let row = j * n + i;
            for k in 0..n {
                // (AᵀX)_{ij} = Σ_k A_{ki} X_{kj}
                big[(row, j * n + k)] += a[(k, i)];
                // (XA)_{ij} = Σ_k X_{ik} A_{kj}
                big[(row, k * n + i)] += a[(k, j)];
            }
        }
    }
    let mut rhs = Mat::zeros(nn, 1);
    for j in 0..n {
        for i in 0..n {
            rhs[(j * n + i, 0)] = -c[(i, j)];
        }
    }
    let x = linsolve(&big, &rhs)?;
    let mut out = Mat::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            out[(i, j)] = x[(j * n + i, 0)];
        }
    }
    Ok(out)
}

/// True when every eigenvalue of `a` has negative real part.
///
/// Uses the Lyapunov characterization: `a` is Hurwitz iff `aᵀX + Xa = -I`
/// has a positive-definite solution.
pub fn is_hurwitz(a: &Mat) -> bool {
    match solve_lyapunov(a, &Mat::identity(a.rows)) {
        Ok(x) => x.is_finite() && x.symmetrize().cholesky().is_some(),
        Err(_) => false,
    }
}

/// Stabilizing CARE solution and the associated LQR gain.
#[derive(Debug, Clone)]
pub struct CareSolution {
    pub p: Mat,
    /// K = R⁻¹·Bᵀ·P.
    pub gain: Mat,
}

/// Residual AᵀP + PA − PBR⁻¹BᵀP + Q.
pub fn care_residual(a: &Mat, b: &Mat, q: &Mat, r: &Mat, p: &Mat) -> Result<Mat> {
    let rinv_bt = linsolve(r, &b.transpose())?;
    let at_p = a.transpose().matmul(p);
    let pb_rinv_bt_p = p.matmul(b).matmul(&rinv_bt).matmul(p);
    Ok(&(&(&at_p + &at_p.transpose()) - &pb_rinv_bt_p) + q)
}

/// Solves AᵀP + PA − PBR⁻¹BᵀP + Q = 0 for the stabilizing P.
pub fn solve_care(a: &Mat, b: &Mat, q: &Mat, r: &Mat) -> Result<CareSolution> {
    let n = a.rows;
    let m = b.cols;
    if !a.is_square() || b.rows != n || q.rows != n || q.cols != n || r.rows != m || r.cols != m {
        return Err(MatrixError::InvalidMatrix("CARE dimension mismatch".into()));
    }
    if !q.is_symmetric(1e-9) {
        return Err(MatrixError::InvalidMatrix("Q is not symmetric".into()));
    }
    if !r.is_positive_definite() {
        return Err(MatrixError::RiccatiFailure("R is not positive definite".into()));
    }
    let bt = b.transpose();
    let rinv_bt = linsolve(r, &bt).map_err(|e| MatrixError::RiccatiFailure(format!("R solve failed: {e}")))?;
    let g = b.matmul(&rinv_bt);

    let mut h = Mat::zeros(2 * n, 2 * n);
    h.set_block(0, 0, a);
    h.set_block(0, n, &-&g);
    h.set_block(n, 0, &-q);
    h.set_block(n, n, &-&a.transpose());

    let w = matrix_sign(&h)?;
    // Stable invariant subspace = ker(W + I): [W12; W22 + I]·P = −[W11 + I; W21].
    let eye = Mat::identity(n);
    let mut lhs = Mat::zeros(2 * n, n);
    lhs.set_block(0, 0, &w.block(0, n, n, n));
    lhs.set_block(n, 0, &(&w.block(n, n, n, n) + &eye));
    let mut rhs = Mat::zeros(2 * n, n);
    rhs.set_block(0, 0, &(&w.block(0, 0, n, n) + &eye));
    rhs.set_block(n, 0, &w.block(n, 0, n, n));
    let mut p = lstsq(&lhs, &-&rhs)
        .map_err(|e| {
            MatrixError::RiccatiFailure(format!(
                "stable subspace is not a graph over the state space (pair not stabilizable?): {e}"
            ))
        })?
        .symmetrize();

    // Newton–Kleinman polish.
    let qscale = q.norm_inf().max(g.norm_inf()).max(1e-300);
    let mut best = p.clone();
    let mut best_res = care_residual(a, b, q, r, &p)?.norm_inf();
    for _ in 0..8 {
        if best_res <= 1e-13 * qscale {
            break;
        }
        let k = rinv_bt.matmul(&p);
        let acl = a - &b.matmul(&k);
        let c = q + &k.transpose().matmul(r).matmul(&k);
        let next = match solve_lyapunov(&acl, &c) {
            Ok(x) => x.symmetrize(),
            Err(_) => break,
        };
        let res = care_residual(a, b, q, r, &next)?.norm_inf();
        p = next;
        if res < best_res {
            best_res = res;
            best = p.clone();
        } else {
            break;
        }
    }
    let p = best;
    if !p.is_finite() {
        return Err(MatrixError::RiccatiFailure("non-finite solution".into()));
    }
    let gain = rinv_bt.matmul(&p);
    let acl = a - &b.matmul(&gain);
    if !is_hurwitz(&acl) {
        return Err(MatrixError::RiccatiFailure(
            "closed loop A − BK is not Hurwitz (pair not stabilizable or Q not detectable)".into(),
        ));
    }
    Ok(CareSolution { p, gain })
}

/// Matrix sign function by scaled Newton iteration.
fn matrix_sign(h: &Mat) -> Result<Mat> {
    let n = h.rows as f64;
    let mut z = h.clone();
    for _ in 0..100 {
        let zinv = z.inverse().map_err(|e| {
            MatrixError::RiccatiFailure(format!("Hamiltonian has eigenvalues on the imaginary axis: {e}"))
        })?;
        let det = z.det().abs();
        let c = if det.is_finite() && det > 0.0 {
            det.powf(1.0 / n)
        } else {
            1.0
        };
        let next = (&z.scale(1.0 / c) + &zinv.scale(c)).scale(0.5);
        let delta = (&next - &z).norm_one();
        let done = delta <= 1e-13 * next.norm_one();
        z = next;
        if done {
            return Ok(z);
        }
    }
    Err(MatrixError::RiccatiFailure(
        "matrix sign iteration did not converge".into(),
    ))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn eig_identity() {
        let e = sym_eig(&Mat::identity(3)).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn eig_two_by_two() {
        // λ² − 2λ − 3 = 0 → λ = 3, −1
        let e = sym_eig(&Mat::from_rows(&[[1.0, 2.0], [2.0, 1.0]])).unwrap();
        assert!(close(e.eigenvalues[0], 3.0, 1e-14));
        assert!(close(e.eigenvalues[1], -1.0, 1e-14));
        // first nonzero component positive
        for c in 0..2 {
            assert!(e.eigenvectors[(0, c)] > 0.0);
        }
    }

    #[test]
    fn eig_zermelo_full_gain() {
        let k = Mat::from_rows(&[[1.7421, 0.9560], [0.9560, 1.1414]]);
        let tr: f64 = 1.7421 + 1.1414;
        let det = 1.7421 * 1.1414 - 0.9560 * 0.9560;
        let disc = (tr * tr / 4.0 - det).sqrt();
        let e = sym_eig(&k).unwrap();
        assert!(close(e.eigenvalues[0], tr / 2.0 + disc, 1e-13));
        assert!(close(e.eigenvalues[1], tr / 2.0 - disc, 1e-13));
        assert!(close(e.eigenvalues[0], 2.4438, 1e-4));
        assert!(close(e.eigenvalues[1], 0.4397, 1e-4));
    }

    #[test]
    fn eig_rejects_bad_input() {
        let r = sym_eig(&Mat::zeros(2, 3));
        assert!(matches!(r, Err(MatrixError::InvalidMatrix(_))));
        let r = sym_eig(&Mat::from_rows(&[[1.0, 2.0], [0.0, 1.0]]));
        assert!(matches!(r, Err(MatrixError::InvalidMatrix(_))));
    }

    #[test]
    fn linsolve_examples() {
        let b = Mat::column(&[3.0, -1.0]);
        assert_eq!(linsolve(&Mat::identity(2), &b).unwrap(), b);

        let a = Mat::from_diag(&[2.0, 4.0]);
        let x = linsolve(&a, &Mat::column(&[2.0, 8.0])).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 2.0]);

        let x_skew = Mat::from_rows(&[[0.0, -1.0], [1.0, 0.0]]);
        let inv = linsolve(&(&Mat::identity(2) - &x_skew), &Mat::identity(2)).unwrap();
        let expect = Mat::from_rows(&[[0.5, -0.5], [0.5, 0.5]]);
        assert!((&inv - &expect).max_abs() < 1e-15);
    }

    #[test]
    fn linsolve_singular() {
        let a = Mat::from_rows(&[[1.0, 2.0], [2.0, 4.0]]);
        assert!(matches!(
            linsolve(&a, &Mat::identity(2)),
            Err(MatrixError::SingularSystem { .. })
        ));
        let a = Mat::from_rows(&[[1.0, 1.0], [1.0, 1.0 + 1e-14]]);
        assert!(matches!(
            linsolve(&a, &Mat::identity(2)),
            Err(MatrixError::SingularSystem { .. })
        ));
    }

    #[test]
    fn care_double_integrator() {
        let a = Mat::from_rows(&[[0.0, 1.0], [0.0, 0.0]]);
        let b = Mat::column(&[0.0, 1.0]);
        let sol = solve_care(&a, &b, &Mat::identity(2), &Mat::identity(1)).unwrap();
        assert!(close(sol.gain[(0, 0)], 1.0, 1e-12));
        assert!(close(sol.gain[(0, 1)], 3f64.sqrt(), 1e-12));
    }

    #[test]
    fn care_zero_state_cost_on_stable_plant() {
        let a = -&Mat::identity(2);
        let sol = solve_care(&a, &Mat::identity(2), &Mat::zeros(2, 2), &Mat::identity(2)).unwrap();
        assert!(sol.p.max_abs() < 1e-12);
        assert!(sol.gain.max_abs() < 1e-12);
    }

    #[test]
    fn care_scalar() {
        let one = Mat::identity(1);
        let sol = solve_care(&Mat::zeros(1, 1), &one, &one, &one).unwrap();
        assert!(close(sol.p[(0, 0)], 1.0, 1e-13));
        assert!(close(sol.gain[(0, 0)], 1.0, 1e-13));
    }

    #[test]
    fn care_unstabilizable() {
        // unstable mode with no actuation
        let a = Mat::identity(2);
        let b = Mat::column(&[0.0, 0.0]);
        let r = solve_care(&a, &b, &Mat::identity(2), &Mat::identity(1));
        assert!(matches!(r, Err(MatrixError::RiccatiFailure(_))), "{r:?}");
    }

    #[test]
    fn care_weakly_stabilizable() {
        // single input, PBH margin 0.015 at the fastest unstable mode; reference P from scipy
        let a = Mat::from_rows(&[
            [
                1.1146026482227878,
                0.48883689631125843,
                1.2982141992845637,
                0.8823917720185012,
                0.0,
            ],
            [0.0, 0.0, -0.5982139979235257, 1.9978257133954986, -0.5706688266474629],
            [0.0, 0.0, 1.3164325355589672, 0.7050987053664954, 1.5206950185342873],
            [
                -0.6905967028638011,
                0.827933920913149,
                -0.11767221107437095,
                1.7287593822987501,
                0.0,
            ],
            [
                0.8743845280633918,
                -0.5956244671984848,
                0.0,
                -1.786850918125386,
                1.2997664133473097,
            ],
        ]);
        let b = Mat::column(&[
            2.7706460015528505,
            0.0,
            0.4574647465695001,
            1.3600766611348964,
            -1.493042194096334,
        ]);
        let sol = solve_care(&a, &b, &Mat::identity(5).scale(0.1), &Mat::from_diag(&[0.5])).unwrap();
        assert!(close(sol.p[(0, 0)], 69476.34511484005, 1e-6 * 69476.0));
        assert!(close(sol.p[(1, 1)], 11446.069780340997, 1e-6 * 69476.0));
        let trace: f64 = sol.p.diag().iter().sum();
        assert!(close(trace, 347476.9085191114, 1e-6 * 347476.0));
    }

    #[test]
    fn lstsq_matches_exact_solution() {
        let a = Mat::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        let x = Mat::column(&[0.5, -1.5]);
        let b = a.matmul(&x);
        let got = lstsq(&a, &b).unwrap();
        assert!(close(got[(0, 0)], 0.5, 1e-13) && close(got[(1, 0)], -1.5, 1e-13));
        assert!(lstsq(&Mat::from_rows(&[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]), &b).is_err());
    }

    #[test]
    fn care_indefinite_r() {
        let r = solve_care(
            &Mat::zeros(1, 1),
            &Mat::identity(1),
            &Mat::identity(1),
            &Mat::from_diag(&[-1.0]),
        );
        assert!(matches!(r, Err(MatrixError::RiccatiFailure(_))));
    }

    #[test]
    fn hurwitz_check() {
        assert!(is_hurwitz(&Mat::from_rows(&[[-1.0, 5.0], [0.0, -2.0]])));
        assert!(!is_hurwitz(&Mat::from_rows(&[[0.0, 1.0], [-1.0, 0.0]])));
        assert!(!is_hurwitz(&Mat::from_rows(&[[0.1, 0.0], [0.0, -2.0]])));
    }

    #[test]
    fn lyapunov_residual() {
        let a = Mat::from_rows(&[[-1.0, 2.0, 0.0], [0.0, -3.0, 1.0], [0.5, 0.0, -2.0]]);
        let c = Mat::from_rows(&[[2.0, 0.5, 0.0], [0.5, 1.0, 0.1], [0.0, 0.1, 3.0]]);
        let x = solve_lyapunov(&a, &c).unwrap();
        let res = &(&a.transpose().matmul(&x) + &x.matmul(&a)) + &c;
        assert!(res.max_abs() < 1e-13);
    }

    #[test]
    fn serde_as_nested_rows() {
        let m = Mat::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[1.0,2.0],[3.0,4.0]]");
        let back: Mat = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<Mat>("[[1.0],[2.0,3.0]]").is_err());
    }
}
