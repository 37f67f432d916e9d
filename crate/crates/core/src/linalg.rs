//! Small dense linear algebra for low-dimensional flows (d <= 16).
//!
//! Provides vectors, symmetric matrices with a Jacobi eigensolver, the
//! principal PSD square root, covariance estimation, and multivariate
//! Gaussian sampling. Everything is generic over the [`Real`] scalar.

use rand::Rng as RandRng;
use serde::{Deserialize, Serialize};

use crate::{Error, Real};

/// Symmetry / PSD tolerance used by the eigensolver and `psd_sqrt`.
pub const TOL_SYM: f64 = 1e-10;
/// Ridge added to estimated covariances so near-degenerate classes stay PSD.
pub const EPS_REG: f64 = 1e-6;

const MAX_JACOBI_SWEEPS: usize = 100;

/// Dense vector of fixed small dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real", transparent)]
pub struct Vector<S>(pub Vec<S>);

impl<S: Real> Vector<S> {
    pub fn zeros(d: usize) -> Self {
        Vector(vec![S::zero(); d])
    }

    pub fn from_f64(entries: &[f64]) -> Self {
        Vector(entries.iter().map(|&v| S::c(v)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.iter().zip(&other.0).map(|(&a, &b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.iter().zip(&other.0).map(|(&a, &b)| a - b).collect())
    }

    pub fn scale(&self, k: S) -> Self {
        Vector(self.0.iter().map(|&a| a * k).collect())
    }

    pub fn dot(&self, other: &Self) -> S {
        self.0.iter().zip(&other.0).map(|(&a, &b)| a * b).sum()
    }

    pub fn norm(&self) -> S {
        self.dot(self).sqrt()
    }

    pub fn dist(&self, other: &Self) -> S {
        self.sub(other).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// self + k * other, in place.
    pub fn axpy(&mut self, k: S, other: &Self) {
        for (a, &b) in self.0.iter_mut().zip(&other.0) {
            *a += k * b;
        }
    }
}

/// Dense (not necessarily symmetric) matrix, row-major. Used for
/// eigenvector bases and small general products.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<S> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<S>,
}

impl<S: Real> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = S::one();
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> S {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.cols + j] = v;
    }

    pub fn matvec(&self, x: &Vector<S>) -> Vector<S> {
        debug_assert_eq!(self.cols, x.dim());
        let mut out = Vector::zeros(self.rows);
        for i in 0..self.rows {
            let mut acc = S::zero();
            for j in 0..self.cols {
                acc += self.get(i, j) * x.0[j];
            }
            out.0[i] = acc;
        }
        out
    }

    /// Column `j` as a vector.
    pub fn column(&self, j: usize) -> Vector<S> {
        Vector((0..self.rows).map(|i| self.get(i, j)).collect())
    }
}

/// Symmetric d x d matrix with full row-major storage.
///
/// Setters write both triangles so the symmetry invariant holds by
/// construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct SymMatrix<S> {
    n: usize,
    data: Vec<S>,
}

impl<S: Real> SymMatrix<S> {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![S::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = S::one();
        }
        m
    }

    pub fn diag(entries: &[S]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = entries[i];
        }
        m
    }

    pub fn scaled_identity(n: usize, k: S) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = k;
        }
        m
    }

    /// Build from row-major entries, averaging the two triangles.
    pub fn from_rows(n: usize, rows: &[f64]) -> Self {
        assert_eq!(rows.len(), n * n);
        let mut m = Self::zeros(n);
        let half = S::c(0.5);
        for i in 0..n {
            for j in 0..n {
                let v = (S::c(rows[i * n + j]) + S::c(rows[j * n + i])) * half;
                m.data[i * n + j] = v;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> S {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.n, other.n);
        SymMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }

    pub fn scale(&self, k: S) -> Self {
        SymMatrix {
            n: self.n,
            data: self.data.iter().map(|&a| a * k).collect(),
        }
    }

    pub fn matvec(&self, x: &Vector<S>) -> Vector<S> {
        debug_assert_eq!(self.n, x.dim());
        let mut out = Vector::zeros(self.n);
        for i in 0..self.n {
            let mut acc = S::zero();
            for j in 0..self.n {
                acc += self.get(i, j) * x.0[j];
            }
            out.0[i] = acc;
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Mat<S> {
        debug_assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = S::zero();
                for k in 0..n {
                    acc += self.get(i, k) * other.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> S {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(S::zero(), S::max)
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues sorted descending with matching orthonormal
/// eigenvector columns, so `V diag(lambda) V^T` reconstructs the input.
pub fn sym_eigen<S: Real>(m: &SymMatrix<S>) -> Result<(Vec<S>, Mat<S>), Error> {
    let n = m.dim();
    let mut a = m.clone();
    let mut v = Mat::identity(n);
    let tol = S::c(TOL_SYM) * S::c(1e-3);

    let mut converged = false;
    for _sweep in 0..MAX_JACOBI_SWEEPS {
        let mut off = S::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(a.get(i, j).abs());
            }
        }
        if off <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() <= tol * S::c(1e-2) {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (S::c(2.0) * apq);
                let t = {
                    let sign = if theta >= S::zero() { S::one() } else { -S::one() };
                    sign / (theta.abs() + (theta * theta + S::one()).sqrt())
                };
                let c = S::one() / (t * t + S::one()).sqrt();
                let s = t * c;

                // rotate rows/columns p, q of a
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                // the (p,p), (q,q), (p,q) entries need the exact update;
                // redo them from the originals to keep symmetry tight
                let new_pp = c * c * app - S::c(2.0) * s * c * apq + s * s * aqq;
                let new_qq = s * s * app + S::c(2.0) * s * c * apq + c * c * aqq;
                a.set(p, p, new_pp);
                a.set(q, q, new_qq);
                a.set(p, q, S::zero());

                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    if !converged {
        // final check after the last sweep
        let mut off = S::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(a.get(i, j).abs());
            }
        }
        if off > tol {
            return Err(Error::NoConvergence(MAX_JACOBI_SWEEPS));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let eig: Vec<S> = (0..n).map(|i| a.get(i, i)).collect();
    order.sort_by(|&i, &j| eig[j].partial_cmp(&eig[i]).unwrap());

    let values: Vec<S> = order.iter().map(|&i| eig[i]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..n {
            vectors.set(i, new_j, v.get(i, old_j));
        }
    }
    Ok((values, vectors))
}

/// Principal symmetric PSD square root via eigendecomposition.
///
/// Eigenvalues in `[-TOL_SYM, 0)` are clamped to zero; anything below
/// `-TOL_SYM` is rejected as not PSD.
pub fn psd_sqrt<S: Real>(m: &SymMatrix<S>) -> Result<SymMatrix<S>, Error> {
    let (values, vectors) = sym_eigen(m)?;
    let tol = S::c(TOL_SYM);
    let n = m.dim();
    let mut roots = Vec::with_capacity(n);
    for &lam in &values {
        if lam < -tol {
            return Err(Error::NotPsd(lam.to_f64()));
        }
        roots.push(lam.max(S::zero()).sqrt());
    }
    // V diag(sqrt) V^T
    let mut out = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            let mut acc = S::zero();
            for k in 0..n {
                acc += vectors.get(i, k) * roots[k] * vectors.get(j, k);
            }
            out.set(i, j, acc);
        }
    }
    Ok(out)
}

/// Sample mean and ridge-regularized unbiased covariance of a point cloud.
///
/// The covariance uses the (n-1) normalization plus `EPS_REG * I`; a single
/// point yields `EPS_REG * I` alone.
pub fn sample_mean_cov<S: Real>(points: &[Vector<S>]) -> Result<(Vector<S>, SymMatrix<S>), Error> {
    if points.is_empty() {
        return Err(Error::Empty("sample_mean_cov got no points".into()));
    }
    let d = points[0].dim();
    let n = points.len();
    let mut mean = Vector::zeros(d);
    for p in points {
        if p.dim() != d {
            return Err(Error::DimMismatch("mixed dimensions in point cloud".into()));
        }
        mean.axpy(S::one(), p);
    }
    mean = mean.scale(S::one() / S::c(n as f64));

    let mut cov = SymMatrix::zeros(d);
    if n > 1 {
        let norm = S::one() / S::c((n - 1) as f64);
        for p in points {
            let r = p.sub(&mean);
            for i in 0..d {
                for j in i..d {
                    let v = cov.get(i, j) + r.0[i] * r.0[j] * norm;
                    cov.set(i, j, v);
                }
            }
        }
    }
    let eps = S::c(EPS_REG);
    for i in 0..d {
        cov.set(i, i, cov.get(i, i) + eps);
    }
    Ok((mean, cov))
}

/// Draw `mean + sqrt_cov * z` with `z` standard normal.
pub fn mvn_sample<S: Real, R: RandRng + ?Sized>(
    mean: &Vector<S>,
    sqrt_cov: &SymMatrix<S>,
    rng: &mut R,
) -> Result<Vector<S>, Error> {
    let d = mean.dim();
    if sqrt_cov.dim() != d {
        return Err(Error::DimMismatch(format!(
            "mean has dim {d}, sqrt_cov has dim {}",
            sqrt_cov.dim()
        )));
    }
    let z = Vector((0..d).map(|_| S::std_normal(rng)).collect());
    Ok(mean.add(&sqrt_cov.matvec(&z)))
}

/// Draw a d-dimensional standard normal vector.
pub fn std_normal_vec<S: Real, R: RandRng + ?Sized>(d: usize, rng: &mut R) -> Vector<S> {
    Vector((0..d).map(|_| S::std_normal(rng)).collect())
}

/// Largest singular value of a dense matrix by power iteration on `A^T A`.
pub fn spectral_norm<S: Real>(m: &Mat<S>) -> S {
    let n = m.cols;
    let mut v = Vector((0..n).map(|i| S::c(1.0 + 0.1 * i as f64)).collect());
    let nv = v.norm();
    if nv == S::zero() {
        return S::zero();
    }
    v = v.scale(S::one() / nv);
    let mut sigma = S::zero();
    for _ in 0..200 {
        // w = A^T (A v)
        let av = m.matvec(&v);
        let mut w = Vector::zeros(n);
        for j in 0..n {
            let mut acc = S::zero();
            for i in 0..m.rows {
                acc += m.get(i, j) * av.0[i];
            }
            w.0[j] = acc;
        }
        let nw = w.norm();
        if nw == S::zero() {
            return S::zero();
        }
        v = w.scale(S::one() / nw);
        let new_sigma = nw.sqrt();
        if (new_sigma - sigma).abs() <= S::c(1e-12) * new_sigma.max(S::one()) {
            return new_sigma;
        }
        sigma = new_sigma;
    }
    sigma
}
