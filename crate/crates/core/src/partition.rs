//! The compact hierarchy operators.
//!
//! `A^*` maps `Herm(H_a (x) H_b)` to `Herm(H_a (x) H)`, where `H` is the
//! `d_k`-dimensional coordinate space of the symmetric subspace, by applying
//! `M(U) = sum_ij U_ij M_ij` to every `d_b x d_b` block. `A` applies the
//! adjoint `M^*` to every `d_k x d_k` block. Each `M_ij` is stored as a list
//! of `(row, col, weight)` triples.

use crate::error::{Error, Result};
use crate::herm::{partial_transpose_unchecked, HermMat};
use crate::sym_index::{dim_sym, SeqTable};
use faer::{c64, Mat};

/// Sparse description of `A` and `A^*` for given `(d_a, d_b, k)`.
#[derive(Clone, Debug)]
pub struct PartitionOp {
    d_a: usize,
    d: usize,
    k: usize,
    dk: usize,
    table: SeqTable,
    table_km1: SeqTable,
    /// Triples of `M_ij`, indexed by `i * d + j`.
    mij: Vec<Vec<(u32, u32, f64)>>,
    ak: f64,
    bk: f64,
    ck: f64,
}

impl PartitionOp {
    pub fn new(d_a: usize, d: usize, k: usize) -> Result<Self> {
        if d_a == 0 || d == 0 || k == 0 {
            return Err(Error::InvalidParam(format!(
                "dimensions and level must be positive (d_a={d_a}, d_b={d}, k={k})"
            )));
        }
        let table = SeqTable::new(d, k)?;
        let table_km1 = SeqTable::new(d, k - 1)?;
        let kf = k as f64;
        let mut mij = vec![Vec::with_capacity(table_km1.len()); d * d];
        let mut plus = vec![0usize; d];
        for l in 0..table_km1.len() {
            let counts = table_km1.counts(l);
            let mut merged = counts.to_vec();
            for (i, p) in plus.iter_mut().enumerate() {
                merged[i] += 1;
                *p = table.rank(&merged)?;
                merged[i] -= 1;
            }
            for i in 0..d {
                for j in 0..d {
                    let w = (((counts[i] + 1) * (counts[j] + 1)) as f64).sqrt() / kf;
                    mij[i * d + j].push((plus[i] as u32, plus[j] as u32, w));
                }
            }
        }
        let dk = table.len();
        let mut op = PartitionOp { d_a, d, k, dk, table, table_km1, mij, ak: 0.0, bk: 0.0, ck: 0.0 };
        let (ak, bk, ck) = op.gram_sums();
        op.ak = ak;
        op.bk = bk;
        op.ck = ck;
        Ok(op)
    }

    /// `a_k = M_ii . M_ii`, `b_k = M_ij . M_ij` (i != j), `c_k = M_ii . M_jj`.
    fn gram_sums(&self) -> (f64, f64, f64) {
        let d = self.d;
        let sq = |i: usize, j: usize| self.mij[i * d + j].iter().map(|t| t.2 * t.2).sum::<f64>();
        let ak = sq(0, 0);
        if d == 1 {
            return (ak, ak, 0.0);
        }
        let bk = sq(0, 1);
        let mut diag0 = vec![0.0; self.dk];
        for &(r, _, w) in &self.mij[0] {
            diag0[r as usize] += w;
        }
        let ck = self.mij[d + 1].iter().map(|&(r, _, w)| w * diag0[r as usize]).sum();
        (ak, bk, ck)
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn d_b(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `d_k`, the dimension of the coordinate space `H`.
    pub fn dk(&self) -> usize {
        self.dk
    }

    /// Side length `d_a d_b` of matrices on `H_ab`.
    pub fn n_ab(&self) -> usize {
        self.d_a * self.d
    }

    /// Side length `d_a d_k` of matrices on `H_a (x) H`.
    pub fn n_h(&self) -> usize {
        self.d_a * self.dk
    }

    pub fn table(&self) -> &SeqTable {
        &self.table
    }

    pub fn table_km1(&self) -> &SeqTable {
        &self.table_km1
    }

    /// Triples of `M_ij`.
    pub fn mij(&self, i: usize, j: usize) -> &[(u32, u32, f64)] {
        &self.mij[i * self.d + j]
    }

    pub fn nnz(&self) -> usize {
        self.mij.iter().map(Vec::len).sum()
    }

    /// `(a_k, b_k, c_k)`.
    pub fn gram_constants(&self) -> (f64, f64, f64) {
        (self.ak, self.bk, self.ck)
    }

    /// The identity `I_a (x) I_H`.
    pub fn identity_h(&self) -> HermMat {
        HermMat::identity(self.n_h())
    }

    /// `M(U)` for a `d_b x d_b` matrix.
    pub fn apply_m(&self, u: &HermMat) -> Result<HermMat> {
        check(u, self.d)?;
        let mut out = Mat::<c64>::zeros(self.dk, self.dk);
        for i in 0..self.d {
            for j in 0..self.d {
                let uij = u.get(i, j);
                for &(r, c, w) in self.mij(i, j) {
                    out[(r as usize, c as usize)] += uij * w;
                }
            }
        }
        Ok(HermMat::from_mat_hermitized(out))
    }

    /// `M^*(V)` for a `d_k x d_k` matrix.
    pub fn apply_m_adjoint(&self, v: &HermMat) -> Result<HermMat> {
        check(v, self.dk)?;
        let out = Mat::from_fn(self.d, self.d, |i, j| {
            self.mij(i, j).iter().map(|&(r, c, w)| v.get(r as usize, c as usize) * w).sum()
        });
        Ok(HermMat::from_mat_hermitized(out))
    }

    /// `A^*(W)`: `M` applied to each `d_b x d_b` block.
    pub fn apply_a_adjoint(&self, w: &HermMat) -> Result<HermMat> {
        check(w, self.n_ab())?;
        Ok(self.a_adj(w))
    }

    pub(crate) fn a_adj(&self, w: &HermMat) -> HermMat {
        let (d, dk) = (self.d, self.dk);
        let mut out = Mat::<c64>::zeros(self.n_h(), self.n_h());
        for be in 0..self.d_a {
            for al in 0..self.d_a {
                for j in 0..d {
                    for i in 0..d {
                        let v = w.get(al * d + i, be * d + j);
                        if v == c64::new(0.0, 0.0) {
                            continue;
                        }
                        for &(r, c, wt) in self.mij(i, j) {
                            out[(al * dk + r as usize, be * dk + c as usize)] += v * wt;
                        }
                    }
                }
            }
        }
        HermMat::from_mat_hermitized(out)
    }

    /// `A(X)`: `M^*` applied to each `d_k x d_k` block.
    pub fn apply_a(&self, x: &HermMat) -> Result<HermMat> {
        check(x, self.n_h())?;
        Ok(self.a(x))
    }

    pub(crate) fn a(&self, x: &HermMat) -> HermMat {
        let (d, dk) = (self.d, self.dk);
        let out = Mat::from_fn(self.n_ab(), self.n_ab(), |p, q| {
            let (al, i, be, j) = (p / d, p % d, q / d, q % d);
            self.mij(i, j)
                .iter()
                .map(|&(r, c, w)| x.get(al * dk + r as usize, be * dk + c as usize) * w)
                .sum()
        });
        HermMat::from_mat_hermitized(out)
    }

    /// Transpose of every `d_k x d_k` block of a matrix on `H_a (x) H`.
    pub fn t(&self, x: &HermMat) -> HermMat {
        assert_eq!(x.n(), self.n_h(), "size mismatch");
        partial_transpose_unchecked(x, self.dk)
    }

    /// `(A A^*)(R)`, blockwise `b_k U + c_k Tr(U) I`.
    pub fn apply_gram(&self, r: &HermMat) -> Result<HermMat> {
        check(r, self.n_ab())?;
        Ok(self.blockwise_gram(r, self.bk, self.ck))
    }

    /// `(A A^*)^{-1}(R)` by the Sherman-Morrison formula on each block.
    pub fn solve_gram(&self, r: &HermMat) -> Result<HermMat> {
        check(r, self.n_ab())?;
        let (b, c) = (self.bk, self.ck);
        let df = self.d as f64;
        Ok(self.blockwise_gram(r, 1.0 / b, -c / (b * (b + df * c))))
    }

    fn blockwise_gram(&self, r: &HermMat, s: f64, t: f64) -> HermMat {
        let d = self.d;
        let mut out = r.scale(s).into_mat();
        for al in 0..self.d_a {
            for be in 0..self.d_a {
                let tr: c64 = (0..d).map(|i| r.get(al * d + i, be * d + i)).sum();
                for i in 0..d {
                    out[(al * d + i, be * d + i)] += tr * t;
                }
            }
        }
        HermMat::from_mat_hermitized(out)
    }

    /// The scalar `lambda_I` with `A(I_a (x) I_H) = lambda_I I_ab`.
    pub fn identity_multiplier(&self) -> f64 {
        let a = self.a(&self.identity_h());
        a.trace() / self.n_ab() as f64
    }
}

fn check(x: &HermMat, n: usize) -> Result<()> {
    if x.n() != n {
        return Err(Error::DimMismatch { expected: n, got: x.n() });
    }
    Ok(())
}

/// Explicit partition isometry for tiny instances, used as an oracle.
#[derive(Clone, Debug)]
pub struct DenseOracle {
    d_a: usize,
    d: usize,
    k: usize,
    /// Unscaled 0/1 map, `d^k x d_k`.
    pub p_tilde: Mat<f64>,
    /// Isometry `P = P~ Diag(p~)^{-1/2}`.
    pub p: Mat<f64>,
}

impl DenseOracle {
    /// Largest `d^k` admitted.
    pub const MAX_FULL_DIM: usize = 4096;

    pub fn new(d_a: usize, d: usize, k: usize) -> Result<Self> {
        let full = d.checked_pow(k as u32).filter(|&f| f <= Self::MAX_FULL_DIM).ok_or_else(|| {
            Error::InvalidParam(format!("dense oracle limited to d^k <= {}", Self::MAX_FULL_DIM))
        })?;
        let table = SeqTable::new(d, k)?;
        let dk = dim_sym(d, k)?;
        let mut p_tilde = Mat::<f64>::zeros(full, dk);
        let mut digits = vec![0usize; k];
        for row in 0..full {
            let mut x = row;
            for pos in (0..k).rev() {
                digits[pos] = x % d;
                x /= d;
            }
            let mut s = digits.clone();
            s.sort_unstable();
            p_tilde[(row, table.rank_symbols(&s)?)] = 1.0;
        }
        let p = Mat::from_fn(full, dk, |r, c| p_tilde[(r, c)] / (table.perm(c) as f64).sqrt());
        Ok(DenseOracle { d_a, d, k, p_tilde, p })
    }

    fn full(&self) -> usize {
        self.p.nrows()
    }

    fn complex_p(&self) -> Mat<c64> {
        Mat::from_fn(self.p.nrows(), self.p.ncols(), |r, c| c64::new(self.p[(r, c)], 0.0))
    }

    /// `P^* (U (x) I) P`.
    pub fn apply_m(&self, u: &HermMat) -> HermMat {
        let rest = self.full() / self.d;
        let big = crate::herm::kron(u, &HermMat::identity(rest));
        let p = self.complex_p();
        HermMat::from_mat_hermitized(p.adjoint() * big.as_mat() * &p)
    }

    /// `(I (x) P^*)(W (x) I)(I (x) P)`.
    pub fn apply_a_adjoint(&self, w: &HermMat) -> HermMat {
        let rest = self.full() / self.d;
        let big = crate::herm::kron(w, &HermMat::identity(rest));
        let ip = self.lifted_p();
        HermMat::from_mat_hermitized(ip.adjoint() * big.as_mat() * &ip)
    }

    /// `Tr_{b_2..b_k}((I (x) P) X (I (x) P^*))`.
    pub fn apply_a(&self, x: &HermMat) -> HermMat {
        let ip = self.lifted_p();
        let big = &ip * x.as_mat() * ip.adjoint();
        let rest = self.full() / self.d;
        let nab = self.d_a * self.d;
        let out = Mat::from_fn(nab, nab, |p, q| (0..rest).map(|t| big[(p * rest + t, q * rest + t)]).sum());
        HermMat::from_mat_hermitized(out)
    }

    fn lifted_p(&self) -> Mat<c64> {
        let p = self.complex_p();
        let (f, dk) = (p.nrows(), p.ncols());
        let mut out = Mat::<c64>::zeros(self.d_a * f, self.d_a * dk);
        for a in 0..self.d_a {
            for c in 0..dk {
                for r in 0..f {
                    out[(a * f + r, a * dk + c)] = p[(r, c)];
                }
            }
        }
        out
    }

    pub fn k(&self) -> usize {
        self.k
    }
}
