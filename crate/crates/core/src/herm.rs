//! Dense complex Hermitian matrices and the spectral primitives built on them.

use crate::error::{Error, Result};
use faer::{c64, Mat, Side};
use serde::{Deserialize, Serialize};

/// Dense complex Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct HermMat {
    m: Mat<c64>,
}

/// Eigenvalues in ascending order with orthonormal eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct EigDecomp {
    pub values: Vec<f64>,
    pub vectors: Mat<c64>,
}

impl HermMat {
    pub fn zeros(n: usize) -> Self {
        HermMat { m: Mat::zeros(n, n) }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = c64::new(s, 0.0);
        }
        HermMat { m }
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Mat::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = c64::new(v, 0.0);
        }
        HermMat { m }
    }

    /// Builds from an entry function, then Hermitizes.
    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> c64) -> Self {
        HermMat::from_mat_hermitized(Mat::from_fn(n, n, f))
    }

    /// Wraps a matrix after checking the Hermitian drift bound.
    pub fn from_mat(m: Mat<c64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimMismatch { expected: m.nrows(), got: m.ncols() });
        }
        let n = m.nrows();
        let mut scale = 0.0f64;
        let mut drift = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                scale = scale.max(m[(i, j)].norm());
                drift = drift.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        if drift > 1e-12 * (1.0 + scale) {
            return Err(Error::InvalidState(format!("matrix is not Hermitian (drift {drift:e})")));
        }
        Ok(HermMat::from_mat_hermitized(m))
    }

    /// Wraps a matrix, replacing it by `(M + M^*)/2`.
    pub fn from_mat_hermitized(m: Mat<c64>) -> Self {
        let mut h = HermMat { m };
        h.hermitize();
        h
    }

    /// Rank-one projector `v v^*`.
    pub fn outer(v: &[c64]) -> Self {
        let n = v.len();
        HermMat { m: Mat::from_fn(n, n, |i, j| v[i] * v[j].conj()) }
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_mat(&self) -> &Mat<c64> {
        &self.m
    }

    pub fn into_mat(self) -> Mat<c64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.m[(i, j)]
    }

    /// Sets entry `(i, j)` and its mirror `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: c64) {
        if i == j {
            self.m[(i, i)] = c64::new(v.re, 0.0);
        } else {
            self.m[(i, j)] = v;
            self.m[(j, i)] = v.conj();
        }
    }

    pub(crate) fn col(&self, j: usize) -> &[c64] {
        self.m.col_as_slice(j)
    }

    pub(crate) fn col_mut(&mut self, j: usize) -> &mut [c64] {
        self.m.col_as_slice_mut(j)
    }

    /// Replaces the matrix by `(M + M^*)/2`.
    pub fn hermitize(&mut self) {
        let n = self.n();
        for j in 0..n {
            let d = self.m[(j, j)].re;
            self.m[(j, j)] = c64::new(d, 0.0);
            for i in j + 1..n {
                let a = (self.m[(i, j)] + self.m[(j, i)].conj()) * 0.5;
                self.m[(i, j)] = a;
                self.m[(j, i)] = a.conj();
            }
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n()).map(|i| self.m[(i, i)].re).sum()
    }

    /// `Re Tr(self * other)`. Panics on a size mismatch; see [`inner`].
    pub fn dot(&self, other: &HermMat) -> f64 {
        assert_eq!(self.n(), other.n(), "size mismatch in trace inner product");
        let mut s = 0.0;
        for j in 0..self.n() {
            for (a, b) in self.col(j).iter().zip(other.col(j)) {
                s += a.re * b.re + a.im * b.im;
            }
        }
        s
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for j in 0..self.n() {
            for a in self.col(j) {
                m = m.max(a.norm());
            }
        }
        m
    }

    fn zip_map(&self, other: &HermMat, f: impl Fn(c64, c64) -> c64) -> HermMat {
        assert_eq!(self.n(), other.n(), "size mismatch");
        let n = self.n();
        let mut out = Mat::zeros(n, n);
        for j in 0..n {
            let (a, b) = (self.col(j), other.col(j));
            for (i, o) in out.col_as_slice_mut(j).iter_mut().enumerate() {
                *o = f(a[i], b[i]);
            }
        }
        HermMat { m: out }
    }

    pub fn add(&self, other: &HermMat) -> HermMat {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &HermMat) -> HermMat {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> HermMat {
        let mut out = self.clone();
        out.scale_mut(s);
        out
    }

    pub fn scale_mut(&mut self, s: f64) {
        for j in 0..self.n() {
            for a in self.col_mut(j) {
                *a *= s;
            }
        }
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &HermMat) {
        assert_eq!(self.n(), x.n(), "size mismatch");
        for j in 0..self.n() {
            let xs = x.m.col_as_slice(j);
            for (s, v) in self.m.col_as_slice_mut(j).iter_mut().zip(xs) {
                *s += *v * a;
            }
        }
    }

    /// `a * x + b * y`.
    pub fn lin_comb(a: f64, x: &HermMat, b: f64, y: &HermMat) -> HermMat {
        x.zip_map(y, |p, q| p * a + q * b)
    }

    pub fn add_identity(&mut self, s: f64) {
        for i in 0..self.n() {
            self.m[(i, i)].re += s;
        }
    }

    /// Plain matrix product (not Hermitian in general).
    pub fn matmul(&self, other: &HermMat) -> Mat<c64> {
        &self.m * &other.m
    }

    /// `A self A^*` for a general square `A`.
    pub fn congruence(&self, a: &Mat<c64>) -> HermMat {
        let t = a * &self.m;
        HermMat::from_mat_hermitized(&t * a.adjoint())
    }

    /// `Z self Z` for a Hermitian `Z`.
    pub fn sandwich(&self, z: &HermMat) -> HermMat {
        let t = &z.m * &self.m;
        HermMat::from_mat_hermitized(&t * &z.m)
    }

    pub fn eig(&self) -> Result<EigDecomp> {
        let e = self.m.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigen)?;
        let s = e.S().column_vector();
        let values = (0..self.n()).map(|i| s[i].re).collect();
        Ok(EigDecomp { values, vectors: e.U().to_owned() })
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        self.m.self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::Eigen)
    }

    pub fn lambda_min(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.first().copied().unwrap_or(0.0))
    }

    pub fn lambda_max(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.last().copied().unwrap_or(0.0))
    }

    pub fn to_json(&self) -> HermJson {
        let n = self.n();
        HermJson {
            n,
            re: (0..n).map(|i| (0..n).map(|j| self.m[(i, j)].re).collect()).collect(),
            im: (0..n).map(|i| (0..n).map(|j| self.m[(i, j)].im).collect()).collect(),
        }
    }

    /// Reads the JSON form, rejecting ragged or non-Hermitian input.
    pub fn from_json(j: &HermJson) -> Result<Self> {
        let n = j.n;
        let shape_ok = j.re.len() == n
            && j.im.len() == n
            && j.re.iter().all(|r| r.len() == n)
            && j.im.iter().all(|r| r.len() == n);
        if !shape_ok {
            return Err(Error::InvalidState(format!("matrix JSON is not {n}x{n}")));
        }
        HermMat::from_mat(Mat::from_fn(n, n, |r, c| c64::new(j.re[r][c], j.im[r][c])))
    }
}

/// Serialized Hermitian matrix: `{"n": int, "re": [[...]], "im": [[...]]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct HermJson {
    pub n: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl EigDecomp {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// `V f(Lambda) V^*`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> HermMat {
        let fv: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let mut scaled = self.vectors.clone();
        for (j, &s) in fv.iter().enumerate() {
            for a in scaled.col_as_slice_mut(j) {
                *a *= s;
            }
        }
        HermMat::from_mat_hermitized(&scaled * self.vectors.adjoint())
    }

    pub fn reconstruct(&self) -> HermMat {
        self.map(|l| l)
    }

    pub fn vector(&self, j: usize) -> &[c64] {
        self.vectors.col_as_slice(j)
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.n() - 1]
    }
}

/// Size-checked trace inner product `Re Tr(A B)`.
pub fn inner(a: &HermMat, b: &HermMat) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::DimMismatch { expected: a.n(), got: b.n() });
    }
    Ok(a.dot(b))
}

/// Euclidean projection onto the unit simplex by sort and threshold.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (j + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Projection onto the spectraplex `{Y >= 0, Tr Y = 1}`.
pub fn project_spectraplex(x: &HermMat) -> Result<HermMat> {
    let e = x.eig()?;
    let p = project_simplex(&e.values);
    let mut keep = e.vectors.clone();
    for (j, &s) in p.iter().enumerate() {
        let s = s.sqrt();
        for a in keep.col_as_slice_mut(j) {
            *a *= s;
        }
    }
    Ok(HermMat::from_mat_hermitized(&keep * keep.adjoint()))
}

/// `argmin_{S in spectraplex} G . S`, the projector onto a bottom eigenvector.
pub fn lmo_spectraplex(g: &HermMat) -> Result<HermMat> {
    let e = g.eig()?;
    Ok(HermMat::outer(e.vector(0)))
}

/// Transposes each `n_h x n_h` block of a `(d_a n_h)`-square matrix in place.
pub fn partial_transpose_t(x: &HermMat, d_a: usize, n_h: usize) -> Result<HermMat> {
    if d_a * n_h != x.n() {
        return Err(Error::DimMismatch { expected: d_a * n_h, got: x.n() });
    }
    Ok(partial_transpose_unchecked(x, n_h))
}

pub(crate) fn partial_transpose_unchecked(x: &HermMat, n_h: usize) -> HermMat {
    let n = x.n();
    let mut out = Mat::zeros(n, n);
    for c in 0..n {
        let (b, j) = (c / n_h, c % n_h);
        let col = out.col_as_slice_mut(c);
        for (r, o) in col.iter_mut().enumerate() {
            let (a, i) = (r / n_h, r % n_h);
            *o = x.m[(a * n_h + j, b * n_h + i)];
        }
    }
    HermMat { m: out }
}

/// `Tr_a` of a matrix on `H_a (x) H_b`: the sum of the diagonal `d_b` blocks.
pub fn partial_trace_a(x: &HermMat, d_a: usize, d_b: usize) -> Result<HermMat> {
    if d_a * d_b != x.n() {
        return Err(Error::DimMismatch { expected: d_a * d_b, got: x.n() });
    }
    let mut out = Mat::zeros(d_b, d_b);
    for a in 0..d_a {
        for j in 0..d_b {
            for i in 0..d_b {
                out[(i, j)] += x.m[(a * d_b + i, a * d_b + j)];
            }
        }
    }
    Ok(HermMat::from_mat_hermitized(out))
}

/// Kronecker product of two Hermitian matrices.
pub fn kron(a: &HermMat, b: &HermMat) -> HermMat {
    let (na, nb) = (a.n(), b.n());
    HermMat {
        m: Mat::from_fn(na * nb, na * nb, |r, c| a.m[(r / nb, c / nb)] * b.m[(r % nb, c % nb)]),
    }
}
