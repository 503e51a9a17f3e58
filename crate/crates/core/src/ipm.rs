//! Feasible primal-dual interior-point methods with Nesterov-Todd scaling.
//!
//! EXT pair: `min mu` s.t. `A X - mu I = rho`, `X >= 0`, and
//! `max rho . W` s.t. `-I . W = 1`, `A^* W + S = 0`, `S >= 0`.
//! PST adds the cone `T X >= 0` on the primal side and `Z >= 0` with
//! `A^* W + S + T Z = 0` on the dual side. Every iterate is feasible, so a
//! positive `rho . W` is a witness as soon as it appears.
//!
//! The Newton system is reduced to the `d_ab^2 x d_ab^2` real system
//! `(A D A^*) dW = dmu I + R`, assembled in an orthonormal basis `B_a` of
//! `Herm(H_a (x) H_b)` as `L[a][b] = A^* B_a . D(A^* B_b)`.

use crate::error::{Error, Result};
use crate::herm::{EigDecomp, HermMat};
use crate::outcome::{Outcome, Status, Witness};
use crate::partition::PartitionOp;
use crate::Hierarchy;
use faer::linalg::solvers::Solve;
use faer::{c64, Mat, Side};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Largest `n = d_a d_k` for which the PST inner operator is factored densely.
pub const DENSE_INNER_MAX_N: usize = 40;

/// How `D = (D_s^{-1} + T D_z^{-1} T)^{-1}` is applied in PST steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerSolve {
    /// Dense when `n <= DENSE_INNER_MAX_N`, conjugate gradients otherwise.
    Auto,
    /// Cholesky factorization of the `n^2 x n^2` matrix of `D^{-1}`.
    Dense,
    /// Conjugate gradients preconditioned by `D_s`.
    Cg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IpmConfig {
    /// Centering parameter in `[0, 1)`.
    pub sigma: f64,
    /// Fraction-to-boundary factor in `(0, 1)`.
    pub ftb: f64,
    pub gap_tol: f64,
    pub max_iters: usize,
    pub detect_margin_tol: f64,
    pub inner: InnerSolve,
    /// Relative residual at which the inner conjugate-gradient solve stops.
    pub cg_tol: f64,
}

impl Default for IpmConfig {
    fn default() -> Self {
        IpmConfig {
            sigma: 0.25,
            ftb: 0.99,
            gap_tol: 1e-8,
            max_iters: 100,
            detect_margin_tol: 1e-12,
            inner: InnerSolve::Auto,
            cg_tol: 1e-10,
        }
    }
}

impl IpmConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..1.0).contains(&self.sigma)
            && self.ftb > 0.0
            && self.ftb < 1.0
            && self.gap_tol > 0.0
            && self.max_iters >= 1
            && self.detect_margin_tol >= 0.0
            && self.cg_tol > 0.0;
        if !ok {
            return Err(Error::InvalidParam(format!("invalid IPM configuration {self:?}")));
        }
        Ok(())
    }
}

/// Primal-dual iterate. `z` is present for PST.
#[derive(Clone, Debug)]
pub struct IpmState {
    pub x: HermMat,
    pub mu: f64,
    pub w: HermMat,
    pub s: HermMat,
    pub z: Option<HermMat>,
}

/// Search direction. `dz` is present for PST.
#[derive(Clone, Debug)]
pub struct NewtonStep {
    pub dx: HermMat,
    pub dmu: f64,
    pub dw: HermMat,
    pub ds: HermMat,
    pub dz: Option<HermMat>,
}

/// Feasibility residuals of an iterate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residuals {
    /// `|A X - mu I - rho| / (1 + |rho|)`.
    pub primal: f64,
    /// `|A^* W + S (+ T Z)| / (1 + |W|)`.
    pub dual: f64,
    /// `|-I . W - 1|`.
    pub trace: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.trace)
    }
}

pub fn residuals(op: &PartitionOp, rho: &HermMat, st: &IpmState) -> Residuals {
    let (rp, rd) = raw_residuals(op, rho, st);
    Residuals {
        primal: rp.norm() / (1.0 + rho.norm()),
        dual: rd.norm() / (1.0 + st.w.norm()),
        trace: (-st.w.trace() - 1.0).abs(),
    }
}

/// `(A X - mu I - rho, A^* W + S + T Z)`.
fn raw_residuals(op: &PartitionOp, rho: &HermMat, st: &IpmState) -> (HermMat, HermMat) {
    let mut rp = op.a(&st.x).sub(rho);
    rp.add_identity(-st.mu);
    let mut rd = op.a_adj(&st.w).add(&st.s);
    if let Some(z) = &st.z {
        rd.axpy(1.0, &op.t(z));
    }
    (rp, rd)
}

fn positive_eig(x: &HermMat, what: &str) -> Result<EigDecomp> {
    let e = x.eig()?;
    if e.min().is_nan() || e.min() <= 0.0 {
        return Err(Error::NotPositiveDefinite(format!("{what}: lambda_min = {:e}", e.min())));
    }
    Ok(e)
}

/// Nesterov-Todd scaling point `S^{-1/2} (S^{1/2} X S^{1/2})^{1/2} S^{-1/2}`,
/// the unique positive definite `Z` with `Z S Z = X`.
pub fn nt_scaling(x: &HermMat, s: &HermMat) -> Result<HermMat> {
    if x.n() != s.n() {
        return Err(Error::DimMismatch { expected: x.n(), got: s.n() });
    }
    positive_eig(x, "X")?;
    nt_from_eig(x, &positive_eig(s, "S")?)
}

fn nt_from_eig(x: &HermMat, es: &EigDecomp) -> Result<HermMat> {
    let s_half = es.map(f64::sqrt);
    let s_ihalf = es.map(|l| 1.0 / l.sqrt());
    let mid = positive_eig(&x.sandwich(&s_half), "S^1/2 X S^1/2")?.map(f64::sqrt);
    Ok(mid.sandwich(&s_ihalf))
}

/// Largest `alpha` with `X + alpha dX >= 0`, given `X^{-1/2}`.
fn max_step(x_ihalf: &HermMat, dx: &HermMat) -> Result<f64> {
    let lmin = dx.sandwich(x_ihalf).lambda_min()?;
    Ok(if lmin >= 0.0 { f64::INFINITY } else { -1.0 / lmin })
}

/// Orthonormal basis of `Herm(C^n)`: `E_pp`, `(E_pq + E_qp)/sqrt 2`,
/// `i (E_qp - E_pq)/sqrt 2` for `p < q`, in the order used by [`coords`].
fn herm_basis(n: usize) -> Vec<HermMat> {
    let mut e = vec![0.0; n * n];
    (0..n * n)
        .map(|a| {
            e[a] = 1.0;
            let b = from_coords(&e, n);
            e[a] = 0.0;
            b
        })
        .collect()
}

fn coords(h: &HermMat) -> Vec<f64> {
    let n = h.n();
    let s = std::f64::consts::SQRT_2;
    let mut out = Vec::with_capacity(n * n);
    for p in 0..n {
        for q in p..n {
            let v = h.get(q, p);
            if p == q {
                out.push(v.re);
            } else {
                out.push(s * v.re);
                out.push(s * v.im);
            }
        }
    }
    out
}

fn from_coords(c: &[f64], n: usize) -> HermMat {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut h = HermMat::zeros(n);
    let mut it = c.iter();
    for p in 0..n {
        for q in p..n {
            if p == q {
                h.set(p, p, c64::new(*it.next().unwrap(), 0.0));
            } else {
                let (re, im) = (*it.next().unwrap(), *it.next().unwrap());
                h.set(q, p, c64::new(r * re, r * im));
            }
        }
    }
    h
}

/// Conjugation by a positive definite matrix `Y -> P Y P`.
struct Conj(HermMat);

impl Conj {
    fn apply(&self, y: &HermMat) -> HermMat {
        y.sandwich(&self.0)
    }
}

/// The primal scaling operator `D` of one Newton step.
enum Scaling {
    /// EXT: `D(Y) = Z Y Z`.
    Ext(Conj),
    /// PST: `D = (D_s^{-1} + T D_z^{-1} T)^{-1}` with `D_s^{-1}(Y) = P Y P`,
    /// `D_z^{-1}(Y) = Q Y Q` and `D_s(Y) = Z_s Y Z_s` as preconditioner.
    Pst { p: Conj, q: Conj, ds: Conj, dense: Option<faer::linalg::solvers::Llt<c64>>, n_h: usize, cg_tol: f64 },
}

impl Scaling {
    fn pst(op: &PartitionOp, zs: HermMat, zz: &HermMat, inner: InnerSolve, cg_tol: f64) -> Result<Self> {
        let p = Conj(positive_eig(&zs, "Z_s")?.map(|l| 1.0 / l));
        let q = Conj(positive_eig(zz, "Z_z")?.map(|l| 1.0 / l));
        let n = op.n_h();
        let dense = match inner {
            InnerSolve::Dense => true,
            InnerSolve::Cg => false,
            InnerSolve::Auto => n <= DENSE_INNER_MAX_N,
        };
        let dense = if dense { Some(dense_inverse_factor(&p.0, &q.0, op.dk())?) } else { None };
        Ok(Scaling::Pst { p, q, ds: Conj(zs), dense, n_h: op.dk(), cg_tol })
    }

    fn apply(&self, v: &HermMat) -> Result<HermMat> {
        match self {
            Scaling::Ext(z) => Ok(z.apply(v)),
            Scaling::Pst { dense: Some(llt), .. } => {
                let n = v.n();
                let mut rhs = Mat::from_fn(n * n, 1, |i, _| v.get(i % n, i / n));
                llt.solve_in_place(rhs.as_mut());
                Ok(HermMat::from_mat_hermitized(Mat::from_fn(n, n, |r, c| rhs[(r + c * n, 0)])))
            }
            Scaling::Pst { p, q, ds, dense: None, n_h, cg_tol } => pcg(|y| inverse_apply(p, q, *n_h, y), ds, v, *cg_tol),
        }
    }
}

/// `D^{-1}(Y) = P Y P + T(Q T(Y) Q)`.
fn inverse_apply(p: &Conj, q: &Conj, n_h: usize, y: &HermMat) -> HermMat {
    let t = |m: &HermMat| crate::herm::partial_transpose_unchecked(m, n_h);
    p.apply(y).add(&t(&q.apply(&t(y))))
}

/// Cholesky factor of the matrix of `D^{-1}` on column-major `vec(Y)`.
fn dense_inverse_factor(p: &HermMat, q: &HermMat, n_h: usize) -> Result<faer::linalg::solvers::Llt<c64>> {
    let n = p.n();
    let idx = |r: usize, c: usize| r + c * n;
    // Block transpose as an index map: (alpha i, beta j) -> (alpha j, beta i).
    let perm = |r: usize, c: usize| {
        let (al, i, be, j) = (r / n_h, r % n_h, c / n_h, c % n_h);
        (al * n_h + j, be * n_h + i)
    };
    let mut k = Mat::<c64>::zeros(n * n, n * n);
    for c2 in 0..n {
        for r2 in 0..n {
            let row = idx(r2, c2);
            let (s2, t2) = perm(r2, c2);
            for c in 0..n {
                for r in 0..n {
                    let (s, t) = perm(r, c);
                    k[(row, idx(r, c))] += p.get(r2, r) * p.get(c, c2);
                    k[(row, idx(s, t))] += q.get(s2, r) * q.get(c, t2);
                }
            }
        }
    }
    k.llt(Side::Lower).map_err(|_| Error::Solver("inner PST operator is not positive definite".into()))
}

/// Preconditioned conjugate gradients for `K(Y) = V` on Hermitian matrices.
fn pcg(k: impl Fn(&HermMat) -> HermMat, pre: &Conj, v: &HermMat, tol: f64) -> Result<HermMat> {
    let vnorm = v.norm();
    if vnorm == 0.0 {
        return Ok(HermMat::zeros(v.n()));
    }
    let max_iters = 20 * v.n() + 200;
    let mut y = pre.apply(v);
    let mut r = v.sub(&k(&y));
    let mut zr = pre.apply(&r);
    let mut p = zr.clone();
    let mut rz = r.dot(&zr);
    for _ in 0..max_iters {
        if r.norm() <= tol * vnorm {
            return Ok(y);
        }
        let kp = k(&p);
        let alpha = rz / p.dot(&kp);
        y.axpy(alpha, &p);
        r.axpy(-alpha, &kp);
        zr = pre.apply(&r);
        let rz_new = r.dot(&zr);
        p = HermMat::lin_comb(1.0, &zr, rz_new / rz, &p);
        rz = rz_new;
    }
    let rel = r.norm() / vnorm;
    if rel <= tol.sqrt() {
        return Ok(y);
    }
    Err(Error::Solver(format!("inner CG stalled at relative residual {rel:e} after {max_iters} iterations")))
}

/// Images `A^* B_a` of the orthonormal basis, fixed for a level.
struct Lifted {
    v: Vec<HermMat>,
}

impl Lifted {
    fn new(op: &PartitionOp) -> Self {
        Lifted { v: herm_basis(op.n_ab()).iter().map(|b| op.a_adj(b)).collect() }
    }

    /// Solves `(A D A^*) dW = dmu I + R` with `tr dW = t`.
    fn solve(&self, op: &PartitionOp, d: &Scaling, r: &HermMat, t: f64) -> Result<(f64, HermMat)> {
        let m = self.v.len();
        let dv: Vec<HermMat> = self.v.iter().map(|v| d.apply(v)).collect::<Result<_>>()?;
        let mut l = Mat::<f64>::zeros(m, m);
        for b in 0..m {
            for a in b..m {
                let x = self.v[a].dot(&dv[b]);
                l[(a, b)] = x;
                l[(b, a)] = x;
            }
        }
        // Symmetric diagonal equilibration before factoring.
        let scale: Vec<f64> = (0..m).map(|i| 1.0 / l[(i, i)].max(f64::MIN_POSITIVE).sqrt()).collect();
        for b in 0..m {
            for a in 0..m {
                l[(a, b)] *= scale[a] * scale[b];
            }
        }
        let n_ab = op.n_ab();
        let mut rhs = Mat::<f64>::zeros(m, 2);
        for (i, c) in coords(&HermMat::identity(n_ab)).into_iter().enumerate() {
            rhs[(i, 0)] = c * scale[i];
        }
        for (i, c) in coords(r).into_iter().enumerate() {
            rhs[(i, 1)] = c * scale[i];
        }
        match l.llt(Side::Lower) {
            Ok(llt) => llt.solve_in_place(rhs.as_mut()),
            Err(_) => l.partial_piv_lu().solve_in_place(rhs.as_mut()),
        }
        if !rhs.is_all_finite() {
            return Err(Error::Solver("A D A^* system is singular".into()));
        }
        for j in 0..2 {
            for (i, s) in scale.iter().enumerate() {
                rhs[(i, j)] *= s;
            }
        }
        let col = |j: usize| (0..m).map(|i| rhs[(i, j)]).collect::<Vec<_>>();
        let (a, b) = (from_coords(&col(0), n_ab), from_coords(&col(1), n_ab));
        let dmu = (t - b.trace()) / a.trace();
        Ok((dmu, HermMat::lin_comb(1.0, &b, dmu, &a)))
    }
}

/// `W_0 = -I/d_ab` and `X_0 = A^* (A A^*)^{-1} rho + (mu_0/lambda_I) I` with
/// `mu_0 = d_k` doubled until `X_0` (and `T X_0` when `pst`) is positive definite.
fn init_primal(op: &PartitionOp, rho: &HermMat, pst: bool) -> Result<(HermMat, f64)> {
    if rho.n() != op.n_ab() {
        return Err(Error::DimMismatch { expected: op.n_ab(), got: rho.n() });
    }
    let xbar = op.a_adj(&op.solve_gram(rho)?);
    let lam = op.identity_multiplier();
    let mut mu = op.dk() as f64;
    for _ in 0..64 {
        let mut x = xbar.clone();
        x.add_identity(mu / lam);
        let ok = x.lambda_min()? > 0.0 && (!pst || op.t(&x).lambda_min()? > 0.0);
        if ok {
            return Ok((x, mu));
        }
        mu *= 2.0;
    }
    Err(Error::Solver("could not find a positive definite starting point".into()))
}

pub fn init_ext(op: &PartitionOp, rho: &HermMat) -> Result<IpmState> {
    let (x, mu) = init_primal(op, rho, false)?;
    let d = op.n_ab() as f64;
    Ok(IpmState { x, mu, w: HermMat::scaled_identity(op.n_ab(), -1.0 / d), s: HermMat::scaled_identity(op.n_h(), 1.0 / d), z: None })
}

pub fn init_pst(op: &PartitionOp, rho: &HermMat) -> Result<IpmState> {
    let (x, mu) = init_primal(op, rho, true)?;
    let d = op.n_ab() as f64;
    let half = HermMat::scaled_identity(op.n_h(), 0.5 / d);
    Ok(IpmState { x, mu, w: HermMat::scaled_identity(op.n_ab(), -1.0 / d), s: half.clone(), z: Some(half) })
}

/// Newton direction toward the central point with parameter `tau`.
/// Residuals of the current iterate are folded in, so the step restores
/// feasibility lost to rounding.
pub fn newton_step_ext(op: &PartitionOp, rho: &HermMat, st: &IpmState, tau: f64) -> Result<NewtonStep> {
    let es = positive_eig(&st.s, "S")?;
    let z = nt_from_eig(&st.x, &es)?;
    newton_ext(op, rho, st, tau, &Lifted::new(op), &es, Conj(z))
}

fn newton_ext(op: &PartitionOp, rho: &HermMat, st: &IpmState, tau: f64, lifted: &Lifted, es: &EigDecomp, z: Conj) -> Result<NewtonStep> {
    let (rp, rd) = raw_residuals(op, rho, st);
    // X dS-part target: tau S^{-1} - X.
    let target = es.map(|l| tau / l).sub(&st.x);
    let r = op.a(&target).scale(-1.0).sub(&rp);
    let d = Scaling::Ext(z);
    let (dmu, dw) = lifted.solve(op, &d, &r, -1.0 - st.w.trace())?;
    let ds = op.a_adj(&dw).add(&rd).scale(-1.0);
    let dx = target.sub(&d.apply(&ds)?);
    Ok(NewtonStep { dx, dmu, dw, ds, dz: None })
}

/// PST Newton direction, with the inner operator applied per `inner`.
pub fn newton_step_pst(op: &PartitionOp, rho: &HermMat, st: &IpmState, tau: f64, inner: InnerSolve) -> Result<NewtonStep> {
    let z = st.z.as_ref().ok_or_else(|| Error::InvalidState("PST step requires Z".into()))?;
    let es = positive_eig(&st.s, "S")?;
    let ez = positive_eig(z, "Z")?;
    let tx = op.t(&st.x);
    let cfg = IpmConfig::default();
    newton_pst(op, rho, st, tau, &Lifted::new(op), &es, &ez, &tx, inner, cfg.cg_tol)
}

#[allow(clippy::too_many_arguments)]
fn newton_pst(
    op: &PartitionOp,
    rho: &HermMat,
    st: &IpmState,
    tau: f64,
    lifted: &Lifted,
    es: &EigDecomp,
    ez: &EigDecomp,
    tx: &HermMat,
    inner: InnerSolve,
    cg_tol: f64,
) -> Result<NewtonStep> {
    let zmat = st.z.as_ref().expect("PST state");
    let (rp, rd) = raw_residuals(op, rho, st);
    let zs = nt_from_eig(&st.x, es)?;
    let zz = nt_from_eig(tx, ez)?;
    let d = Scaling::pst(op, zs, &zz, inner, cg_tol)?;
    // G = S - tau X^{-1} + T(Z - tau (T X)^{-1}) + r_d.
    let xinv = positive_eig(&st.x, "X")?.map(|l| 1.0 / l);
    let txinv = positive_eig(tx, "T X")?.map(|l| 1.0 / l);
    let mut g = HermMat::lin_comb(1.0, &st.s, -tau, &xinv);
    g.axpy(1.0, &op.t(&HermMat::lin_comb(1.0, zmat, -tau, &txinv)));
    g.axpy(1.0, &rd);
    let r = op.a(&d.apply(&g)?).sub(&rp);
    let (dmu, dw) = lifted.solve(op, &d, &r, -1.0 - st.w.trace())?;
    let dx = d.apply(&op.a_adj(&dw).sub(&g))?;
    // dS = D_s^{-1}(tau S^{-1} - X - dX), dZ = D_z^{-1}(tau Z^{-1} - T X - T dX).
    let Scaling::Pst { p, q, .. } = &d else { unreachable!() };
    let ds = p.apply(&es.map(|l| tau / l).sub(&st.x).sub(&dx));
    let dz = q.apply(&ez.map(|l| tau / l).sub(tx).sub(&op.t(&dx)));
    Ok(NewtonStep { dx, dmu, dw, ds, dz: Some(dz) })
}

/// Runs the IPM for the given hierarchy at level `op.k()`.
pub fn solve_ipm(op: &PartitionOp, rho: &HermMat, h: Hierarchy, cfg: &IpmConfig) -> Result<Outcome> {
    cfg.validate()?;
    let start = Instant::now();
    let pst = h == Hierarchy::Pst;
    let mut st = if pst { init_pst(op, rho)? } else { init_ext(op, rho)? };
    let lifted = Lifted::new(op);
    let n = op.n_h() as f64;
    let id_norm = (op.n_ab() as f64).sqrt();
    let mut history = Vec::new();
    let mut max_res: f64 = 0.0;
    let finish = |status, t, gap, history: &Vec<(usize, f64)>, max_res| Outcome {
        status,
        witness: None,
        margin: None,
        proximity: None,
        membership: false,
        iterations: t,
        wall_seconds: start.elapsed().as_secs_f64(),
        final_gap: gap,
        gap_history: history.clone(),
        max_residual: Some(max_res),
    };
    for t in 0..=cfg.max_iters {
        max_res = max_res.max(residuals(op, rho, &st).max());
        let margin = rho.dot(&st.w);
        let gap = st.mu - margin;
        history.push((t, gap));
        if margin > cfg.detect_margin_tol {
            let wit = Witness::normalize(st.w.clone(), st.z.clone());
            let mut o = finish(Status::Witness, t, gap, &history, max_res);
            o.margin = Some(rho.dot(&wit.w));
            o.witness = Some(wit);
            return Ok(o);
        }
        if gap < cfg.gap_tol || t == cfg.max_iters {
            let status = if gap < cfg.gap_tol { Status::Proximity } else { Status::IterationCap };
            let mut o = finish(status, t, gap, &history, max_res);
            o.membership = status == Status::Proximity && st.mu <= 0.0;
            o.proximity = Some(st.mu.max(0.0) * id_norm);
            return Ok(o);
        }

        let ex = positive_eig(&st.x, "X")?;
        let es = positive_eig(&st.s, "S")?;
        let x_ih = ex.map(|l| 1.0 / l.sqrt());
        let s_ih = es.map(|l| 1.0 / l.sqrt());
        let (step, mut amax) = if pst {
            let z = st.z.as_ref().expect("PST state");
            let tx = op.t(&st.x);
            let ez = positive_eig(z, "Z")?;
            let etx = positive_eig(&tx, "T X")?;
            let tau = cfg.sigma * (st.x.dot(&st.s) + tx.dot(z)) / (2.0 * n);
            let step = newton_pst(op, rho, &st, tau, &lifted, &es, &ez, &tx, cfg.inner, cfg.cg_tol)?;
            let dz = step.dz.as_ref().expect("PST step");
            let a = max_step(&ez.map(|l| 1.0 / l.sqrt()), dz)?
                .min(max_step(&etx.map(|l| 1.0 / l.sqrt()), &op.t(&step.dx))?);
            (step, a)
        } else {
            let tau = cfg.sigma * st.x.dot(&st.s) / n;
            let z = Conj(nt_from_eig(&st.x, &es)?);
            (newton_ext(op, rho, &st, tau, &lifted, &es, z)?, f64::INFINITY)
        };
        amax = amax.min(max_step(&x_ih, &step.dx)?).min(max_step(&s_ih, &step.ds)?);
        let alpha = (cfg.ftb * amax).min(1.0);
        st.x.axpy(alpha, &step.dx);
        st.mu += alpha * step.dmu;
        st.w.axpy(alpha, &step.dw);
        st.s.axpy(alpha, &step.ds);
        if let (Some(z), Some(dz)) = (st.z.as_mut(), step.dz.as_ref()) {
            z.axpy(alpha, dz);
        }
    }
    unreachable!("loop returns at t = max_iters")
}

pub fn solve_ext_ipm(op: &PartitionOp, rho: &HermMat, cfg: &IpmConfig) -> Result<Outcome> {
    solve_ipm(op, rho, Hierarchy::Ext, cfg)
}

pub fn solve_pst_ipm(op: &PartitionOp, rho: &HermMat, cfg: &IpmConfig) -> Result<Outcome> {
    solve_ipm(op, rho, Hierarchy::Pst, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::herm::testutil::{random_density, random_herm};
    use crate::states::{horodecki_3x3, isotropic, upb_tiles, DensityMat};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_pd(n: usize, rng: &mut ChaCha8Rng) -> HermMat {
        let mut x = random_density(n, rng);
        x.add_identity(0.05);
        x
    }

    #[test]
    fn basis_coordinates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let basis = herm_basis(4);
        for (a, ba) in basis.iter().enumerate() {
            for (b, bb) in basis.iter().enumerate() {
                assert!((ba.dot(bb) - if a == b { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
        let h = random_herm(4, &mut rng);
        let c = coords(&h);
        assert!(from_coords(&c, 4).sub(&h).max_abs() < 1e-15);
        for (a, ba) in basis.iter().enumerate() {
            assert!((ba.dot(&h) - c[a]).abs() < 1e-14);
        }
    }

    #[test]
    fn nt_scaling_identities() {
        let a = HermMat::scaled_identity(3, 4.0);
        let b = HermMat::scaled_identity(3, 0.25);
        assert!(nt_scaling(&a, &b).unwrap().sub(&HermMat::scaled_identity(3, 4.0)).max_abs() < 1e-13);
        assert!(nt_scaling(&a, &a).unwrap().sub(&HermMat::identity(3)).max_abs() < 1e-13);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let (x, s) = (random_pd(6, &mut rng), random_pd(6, &mut rng));
            let z = nt_scaling(&x, &s).unwrap();
            assert!(z.lambda_min().unwrap() > 0.0);
            assert!(s.sandwich(&z).sub(&x).norm() <= 1e-8 * x.norm());
            let zi = z.eig().unwrap().map(|l| 1.0 / l);
            assert!(x.sandwich(&zi).sub(&s).norm() <= 1e-8 * s.norm());
        }
        assert!(nt_scaling(&HermMat::zeros(2), &HermMat::identity(2)).is_err());
    }

    #[test]
    fn initial_points_feasible() {
        for (db, k) in [(2, 2), (2, 3), (2, 4), (3, 2), (3, 3), (3, 4)] {
            let op = PartitionOp::new(2, db, k).unwrap();
            let lam = op.identity_multiplier();
            assert!((lam - op.dk() as f64 / db as f64).abs() < 1e-12);
        }
        let rho = horodecki_3x3(0.5).unwrap();
        let op = PartitionOp::new(3, 3, 2).unwrap();
        for st in [init_ext(&op, rho.matrix()).unwrap(), init_pst(&op, rho.matrix()).unwrap()] {
            assert!(residuals(&op, rho.matrix(), &st).max() <= 1e-10);
            assert!((-st.w.trace() - 1.0).abs() < 1e-14);
            assert!(st.x.lambda_min().unwrap() > 0.0);
        }
        let st = init_pst(&op, rho.matrix()).unwrap();
        assert!(st.z.as_ref().unwrap().sub(&HermMat::scaled_identity(op.n_h(), 1.0 / 18.0)).max_abs() < 1e-15);
        assert!(op.t(&st.x).lambda_min().unwrap() > 0.0);
    }

    /// A feasible interior iterate built from random positive definite parts.
    fn random_feasible(op: &PartitionOp, rng: &mut ChaCha8Rng, pst: bool) -> (HermMat, IpmState) {
        let mut x = random_density(op.n_h(), rng).scale(0.1);
        x.add_identity(0.2);
        let mu = 0.3;
        let mut rho = op.a(&x);
        rho.add_identity(-mu);
        let mut w = random_herm(op.n_ab(), rng).scale(0.01);
        w.add_identity(-(1.0 + w.trace()) / op.n_ab() as f64);
        let z = pst.then(|| random_pd(op.n_h(), rng).scale(0.01));
        let mut s = op.a_adj(&w).scale(-1.0);
        if let Some(z) = &z {
            s.axpy(-1.0, &op.t(z));
        }
        assert!(s.lambda_min().unwrap() > 0.0);
        (rho, IpmState { x, mu, w, s, z })
    }

    #[test]
    fn ext_step_solves_linearization() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let op = PartitionOp::new(2, 2, 3).unwrap();
        let (rho, st) = random_feasible(&op, &mut rng, false);
        let tau = 0.02;
        let step = newton_step_ext(&op, &rho, &st, tau).unwrap();
        let mut prim = op.a(&step.dx);
        prim.add_identity(-step.dmu);
        assert!(prim.norm() < 1e-9);
        assert!(op.a_adj(&step.dw).add(&step.ds).norm() < 1e-9);
        assert!(step.dw.trace().abs() < 1e-12);
        // dX + D(dS) = tau S^{-1} - X with D(Y) = Z Y Z, Z S Z = X.
        let z = nt_scaling(&st.x, &st.s).unwrap();
        let sinv = st.s.eig().unwrap().map(|l| 1.0 / l);
        let lhs = step.dx.add(&step.ds.sandwich(&z));
        let rhs = sinv.scale(tau).sub(&st.x);
        assert!(lhs.sub(&rhs).norm() <= 1e-7 * (1.0 + rhs.norm()));
    }

    #[test]
    fn ext_step_vanishes_on_central_point() {
        // X = I/n and W = -I/d_ab are central for rho = A(X) - mu I.
        let op = PartitionOp::new(2, 2, 2).unwrap();
        let n = op.n_h() as f64;
        let st0 = init_ext(&op, &DensityMat::maximally_mixed(2, 2).matrix().clone()).unwrap();
        let x = HermMat::scaled_identity(op.n_h(), 1.0 / n);
        let mu = 0.1;
        let mut rho = op.a(&x);
        rho.add_identity(-mu);
        let st = IpmState { x: x.clone(), mu, ..st0 };
        let tau = x.dot(&st.s) / n;
        let step = newton_step_ext(&op, &rho, &st, tau).unwrap();
        assert!(step.dx.norm() < 1e-12 && step.dw.norm() < 1e-12 && step.ds.norm() < 1e-12);
    }

    #[test]
    fn pst_step_solves_linearization() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let op = PartitionOp::new(2, 2, 2).unwrap();
        let (rho, st) = random_feasible(&op, &mut rng, true);
        let tau = 0.01;
        let dense = newton_step_pst(&op, &rho, &st, tau, InnerSolve::Dense).unwrap();
        let cg = newton_step_pst(&op, &rho, &st, tau, InnerSolve::Cg).unwrap();
        assert!(dense.dx.sub(&cg.dx).norm() <= 1e-7 * (1.0 + dense.dx.norm()));
        assert!((dense.dmu - cg.dmu).abs() <= 1e-7 * (1.0 + dense.dmu.abs()));
        for step in [dense, cg] {
            let z = st.z.as_ref().unwrap();
            let dz = step.dz.as_ref().unwrap();
            let mut prim = op.a(&step.dx);
            prim.add_identity(-step.dmu);
            assert!(prim.norm() < 1e-8);
            assert!(op.a_adj(&step.dw).add(&step.ds).add(&op.t(dz)).norm() < 1e-8);
            let ds_scale = nt_scaling(&st.x, &st.s).unwrap();
            let tx = op.t(&st.x);
            let dz_scale = nt_scaling(&tx, z).unwrap();
            let inv = |m: &HermMat| m.eig().unwrap().map(|l| 1.0 / l);
            let r1 = step.dx.add(&step.ds.sandwich(&ds_scale)).sub(&inv(&st.s).scale(tau).sub(&st.x));
            let r2 = op.t(&step.dx).add(&dz.sandwich(&dz_scale)).sub(&inv(z).scale(tau).sub(&tx));
            assert!(r1.norm() <= 1e-6 && r2.norm() <= 1e-6, "{} {}", r1.norm(), r2.norm());
        }
    }

    #[test]
    fn ext_detection_and_feasibility() {
        let rho = isotropic(3, 0.5).unwrap();
        let op = PartitionOp::new(3, 3, 5).unwrap();
        let o = solve_ext_ipm(&op, rho.matrix(), &IpmConfig::default()).unwrap();
        assert_eq!(o.status, Status::Witness);
        assert!(o.max_residual.unwrap() <= 1e-7 * (1.0 + rho.matrix().norm()));
        let wit = o.witness.unwrap();
        assert!(op.a_adj(&wit.w).lambda_max().unwrap() <= 1e-8);
        assert!((-wit.w.trace() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn maximally_mixed_undetected() {
        let rho = DensityMat::maximally_mixed(2, 2);
        for h in [Hierarchy::Ext, Hierarchy::Pst] {
            let op = PartitionOp::new(2, 2, 2).unwrap();
            let o = solve_ipm(&op, rho.matrix(), h, &IpmConfig::default()).unwrap();
            assert_eq!(o.status, Status::Proximity, "{h}");
            assert!(o.membership, "{h}");
            assert!(o.final_gap < 1e-8 && o.final_gap >= -1e-9);
        }
    }

    #[test]
    fn pst_detects_upb() {
        let rho = upb_tiles().unwrap();
        let op = PartitionOp::new(3, 3, 2).unwrap();
        let o = solve_pst_ipm(&op, rho.matrix(), &IpmConfig::default()).unwrap();
        assert_eq!(o.status, Status::Witness);
        assert!(o.margin.unwrap() > 0.0);
        let wit = o.witness.unwrap();
        let z = wit.z.unwrap();
        assert!(z.lambda_min().unwrap() >= -1e-8);
        assert!(op.a_adj(&wit.w).add(&op.t(&z)).lambda_max().unwrap() <= 1e-8);
    }
}
