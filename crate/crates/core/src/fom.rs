//! First-order methods for the least-squares formulations.
//!
//! EXT: `min 1/2 |A X - rho|^2` over the spectraplex. PST: additionally a
//! copy `Y` of `T X` in the spectraplex, `min 1/2 |A X - rho|^2 + 1/2 |T X - Y|^2`.
//! Both are written as `min 1/2 |L(P) - b|^2` for a block point `P`, with
//! `L(X) = [A X]` or `L(X, Y) = [A X, T X - Y]`. The dual variables are the
//! block residuals `(u)` or `(u, z)`, averaged for PG and FPG.

use crate::error::{Error, Result};
use crate::herm::{project_spectraplex, EigDecomp, HermMat};
use crate::outcome::{Outcome, Status, Witness};
use crate::partition::PartitionOp;
use crate::Hierarchy;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FomMethod {
    FwOpenLoop,
    FwLineSearch,
    Pg,
    Fpg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepsizeMode {
    /// The constant step `1/L` from the Lipschitz bound of the objective.
    FixedSafe,
    /// Double the previous step, halve until sufficient decrease holds,
    /// never going below the safe step.
    Backtracking,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FomConfig {
    pub method: FomMethod,
    pub max_iters: usize,
    pub gap_tol: f64,
    /// Detection when the dual expression is below `-detect_tol`.
    pub detect_tol: f64,
    pub stepsize_mode: StepsizeMode,
    /// Return as soon as a witness is found. Disable to study convergence.
    pub stop_on_detection: bool,
}

impl Default for FomConfig {
    fn default() -> Self {
        FomConfig {
            method: FomMethod::Fpg,
            max_iters: 1000,
            gap_tol: 1e-7,
            detect_tol: 0.0,
            stepsize_mode: StepsizeMode::Backtracking,
            stop_on_detection: true,
        }
    }
}

impl FomConfig {
    pub fn with_method(method: FomMethod) -> Self {
        FomConfig { method, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 || self.gap_tol.is_nan() || self.gap_tol < 0.0 || self.detect_tol.is_nan() || self.detect_tol < 0.0 {
            return Err(Error::InvalidParam(
                "max_iters must be >= 1 and tolerances nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Envelope on the duality gap at iteration `t` guaranteed by the analysis
/// of each method, for the given `(d_b, d_k)`.
pub fn gap_bound(method: FomMethod, h: Hierarchy, t: usize, d_b: usize, d_k: usize) -> f64 {
    let (db, dk, t) = (d_b as f64, d_k as f64, t as f64);
    match (method, h) {
        (FomMethod::FwOpenLoop | FomMethod::FwLineSearch, Hierarchy::Ext) => 4.0 / (t + 2.0),
        (FomMethod::FwOpenLoop | FomMethod::FwLineSearch, Hierarchy::Pst) => 20.0 / (t + 2.0),
        (FomMethod::Pg, Hierarchy::Ext) => 2.0 * dk / (db * t),
        (FomMethod::Pg, Hierarchy::Pst) => 8.0 * (dk + 2.0 * db) / (db * t),
        (FomMethod::Fpg, Hierarchy::Ext) => 8.0 * dk / (db * (t + 1.0).powi(2)),
        (FomMethod::Fpg, Hierarchy::Pst) => 32.0 * (dk + 2.0 * db) / (db * (t + 1.0).powi(2)),
    }
}

/// Lipschitz constant of the gradient: `d_k/d_b` (EXT) or `(d_k + 2 d_b)/d_b` (PST).
pub fn lipschitz(op: &PartitionOp, h: Hierarchy) -> f64 {
    let (db, dk) = (op.d_b() as f64, op.dk() as f64);
    match h {
        Hierarchy::Ext => dk / db,
        Hierarchy::Pst => (dk + 2.0 * db) / db,
    }
}

/// The safe projected-gradient step `1/L`.
pub fn pg_stepsize(op: &PartitionOp, h: Hierarchy) -> f64 {
    1.0 / lipschitz(op, h)
}

/// Frank-Wolfe step: `2/(t+2)`, or the exact minimizer over `[0, 1]` of
/// `|A(X + g(S - X)) - rho|^2` given `a = A(S - X)` and `u = A X - rho`.
pub fn fw_stepsize(line_search: bool, t: usize, u: &[HermMat], a: &[HermMat]) -> f64 {
    if !line_search {
        return 2.0 / (t as f64 + 2.0);
    }
    let den = bnorm_sq(a);
    if den < 1e-18 {
        return 1.0;
    }
    (-bdot(u, a) / den).clamp(0.0, 1.0)
}

type Blocks = Vec<HermMat>;

fn bdot(a: &[HermMat], b: &[HermMat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn bnorm_sq(a: &[HermMat]) -> f64 {
    a.iter().map(HermMat::norm_sq).sum()
}

fn bcomb(a: f64, x: &[HermMat], b: f64, y: &[HermMat]) -> Blocks {
    x.iter().zip(y).map(|(p, q)| HermMat::lin_comb(a, p, b, q)).collect()
}

fn baxpy(acc: &mut [HermMat], a: f64, x: &[HermMat]) {
    for (s, v) in acc.iter_mut().zip(x) {
        s.axpy(a, v);
    }
}

fn bscale(x: &[HermMat], s: f64) -> Blocks {
    x.iter().map(|b| b.scale(s)).collect()
}

fn bproject(x: &[HermMat]) -> Result<Blocks> {
    x.iter().map(project_spectraplex).collect()
}

/// Least-squares problem data for one hierarchy level.
pub struct LsProblem<'a> {
    op: &'a PartitionOp,
    rho: &'a HermMat,
    h: Hierarchy,
}

/// Dual expression `rho . u + sum_i lambda_max(-L^*(dual)_i)` and its parts.
struct DualEval {
    value: f64,
    lambdas: Vec<f64>,
    eigs: Option<Vec<EigDecomp>>,
}

impl<'a> LsProblem<'a> {
    pub fn new(op: &'a PartitionOp, rho: &'a HermMat, h: Hierarchy) -> Result<Self> {
        if rho.n() != op.n_ab() {
            return Err(Error::DimMismatch { expected: op.n_ab(), got: rho.n() });
        }
        Ok(LsProblem { op, rho, h })
    }

    fn start(&self) -> Blocks {
        let n = self.op.n_h();
        let x0 = HermMat::scaled_identity(n, 1.0 / n as f64);
        match self.h {
            Hierarchy::Ext => vec![x0],
            Hierarchy::Pst => vec![x0.clone(), x0],
        }
    }

    /// `L(P)`.
    fn lin(&self, p: &[HermMat]) -> Blocks {
        let ax = self.op.a(&p[0]);
        match self.h {
            Hierarchy::Ext => vec![ax],
            Hierarchy::Pst => vec![ax, self.op.t(&p[0]).sub(&p[1])],
        }
    }

    /// `L(P) - b`.
    fn residual(&self, p: &[HermMat]) -> Blocks {
        let mut r = self.lin(p);
        r[0].axpy(-1.0, self.rho);
        r
    }

    /// `L^*(v)`: `[A^* u]` or `[A^* u + T z, -z]`.
    fn adj(&self, v: &[HermMat]) -> Blocks {
        let mut g = self.op.a_adj(&v[0]);
        match self.h {
            Hierarchy::Ext => vec![g],
            Hierarchy::Pst => {
                g.axpy(1.0, &self.op.t(&v[1]));
                vec![g, v[1].scale(-1.0)]
            }
        }
    }

    fn dual_eval(&self, dual: &[HermMat], vectors: bool) -> Result<DualEval> {
        let g = self.adj(dual);
        let mut lambdas = Vec::with_capacity(g.len());
        let mut eigs = Vec::new();
        for gi in &g {
            if vectors {
                let e = gi.eig()?;
                lambdas.push(-e.min());
                eigs.push(e);
            } else {
                lambdas.push(-gi.lambda_min()?);
            }
        }
        let value = self.rho.dot(&dual[0]) + lambdas.iter().sum::<f64>();
        Ok(DualEval { value, lambdas, eigs: vectors.then_some(eigs) })
    }

    /// Duality gap of a primal point and a dual candidate.
    pub fn gap(&self, p: &[HermMat], dual: &[HermMat]) -> Result<f64> {
        let ev = self.dual_eval(dual, false)?;
        Ok(0.5 * bnorm_sq(&self.residual(p)) + 0.5 * bnorm_sq(dual) + ev.value)
    }

    /// `W = -u - (sum lambda) I`, `Z = -z + lambda_2 I`, normalized.
    fn witness(&self, dual: &[HermMat], lambdas: &[f64]) -> Witness {
        let mut w = dual[0].scale(-1.0);
        w.add_identity(-lambdas.iter().sum::<f64>());
        let z = (self.h == Hierarchy::Pst).then(|| {
            let mut z = dual[1].scale(-1.0);
            z.add_identity(lambdas[1]);
            z
        });
        Witness::normalize(w, z)
    }
}

/// Gap of the EXT least-squares pair at `(X, u)`.
pub fn gap_ext(op: &PartitionOp, rho: &HermMat, x: &HermMat, u: &HermMat) -> Result<f64> {
    let p = LsProblem::new(op, rho, Hierarchy::Ext)?;
    p.gap(std::slice::from_ref(x), std::slice::from_ref(u))
}

/// Gap of the PST least-squares pair at `(X, Y, u, z)` with `z` the
/// multiplier of `T X - Y`.
pub fn gap_pst(op: &PartitionOp, rho: &HermMat, x: &HermMat, y: &HermMat, u: &HermMat, z: &HermMat) -> Result<f64> {
    let p = LsProblem::new(op, rho, Hierarchy::Pst)?;
    p.gap(&[x.clone(), y.clone()], &[u.clone(), z.clone()])
}

struct Tracker<'c> {
    cfg: &'c FomConfig,
    start: Instant,
    history: Vec<(usize, f64)>,
}

impl Tracker<'_> {
    fn finish(&self, status: Status, iterations: usize, gap: f64) -> Outcome {
        Outcome {
            status,
            witness: None,
            margin: None,
            proximity: None,
            membership: false,
            iterations,
            wall_seconds: self.start.elapsed().as_secs_f64(),
            final_gap: gap,
            gap_history: self.history.clone(),
            max_residual: None,
        }
    }

    /// Records the gap and returns an outcome if the run should stop.
    fn evaluate(
        &mut self,
        prob: &LsProblem,
        t: usize,
        res: &[HermMat],
        dual: &[HermMat],
        ev: &DualEval,
    ) -> Option<Outcome> {
        let gap = 0.5 * bnorm_sq(res) + 0.5 * bnorm_sq(dual) + ev.value;
        self.history.push((t, gap));
        if ev.value < -self.cfg.detect_tol && self.cfg.stop_on_detection {
            let wit = prob.witness(dual, &ev.lambdas);
            let mut o = self.finish(Status::Witness, t.max(1), gap);
            o.margin = Some(prob.rho.dot(&wit.w));
            o.witness = Some(wit);
            return Some(o);
        }
        if gap < self.cfg.gap_tol {
            let mut o = self.finish(Status::Proximity, t.max(1), gap);
            o.proximity = Some(bnorm_sq(res).sqrt());
            return Some(o);
        }
        None
    }

    fn cap(&self, prob: &LsProblem, p: &[HermMat]) -> Outcome {
        let gap = self.history.last().map_or(f64::INFINITY, |h| h.1);
        let mut o = self.finish(Status::IterationCap, self.cfg.max_iters, gap);
        o.proximity = Some(bnorm_sq(&prob.residual(p)).sqrt());
        o
    }
}

/// Runs the configured first-order method on the EXT or PST formulation.
pub fn solve_fom(op: &PartitionOp, rho: &HermMat, h: Hierarchy, cfg: &FomConfig) -> Result<Outcome> {
    cfg.validate()?;
    let prob = LsProblem::new(op, rho, h)?;
    let mut tr = Tracker { cfg, start: Instant::now(), history: Vec::new() };
    match cfg.method {
        FomMethod::FwOpenLoop => frank_wolfe(&prob, &mut tr, false),
        FomMethod::FwLineSearch => frank_wolfe(&prob, &mut tr, true),
        FomMethod::Pg => projected_gradient(&prob, &mut tr),
        FomMethod::Fpg => fast_projected_gradient(&prob, &mut tr),
    }
}

/// EXT first-order solve at level `op.k()`.
pub fn solve_ext_fom(op: &PartitionOp, rho: &HermMat, cfg: &FomConfig) -> Result<Outcome> {
    solve_fom(op, rho, Hierarchy::Ext, cfg)
}

/// PST first-order solve at level `op.k()`.
pub fn solve_pst_fom(op: &PartitionOp, rho: &HermMat, cfg: &FomConfig) -> Result<Outcome> {
    solve_fom(op, rho, Hierarchy::Pst, cfg)
}

fn frank_wolfe(prob: &LsProblem, tr: &mut Tracker, line_search: bool) -> Result<Outcome> {
    let mut x = prob.start();
    for t in 0..tr.cfg.max_iters {
        let res = prob.residual(&x);
        let ev = prob.dual_eval(&res, true)?;
        if let Some(o) = tr.evaluate(prob, t, &res, &res, &ev) {
            return Ok(Outcome { iterations: t + 1, ..o });
        }
        let s: Blocks = ev.eigs.as_ref().expect("eigenvectors requested").iter().map(|e| HermMat::outer(e.vector(0))).collect();
        let gamma = if line_search {
            fw_stepsize(true, t, &res, &prob.lin(&bcomb(1.0, &s, -1.0, &x)))
        } else {
            fw_stepsize(false, t, &res, &[])
        };
        x = bcomb(1.0 - gamma, &x, gamma, &s);
    }
    Ok(tr.cap(prob, &x))
}

fn projected_gradient(prob: &LsProblem, tr: &mut Tracker) -> Result<Outcome> {
    let safe = 1.0 / lipschitz(prob.op, prob.h);
    let backtrack = tr.cfg.stepsize_mode == StepsizeMode::Backtracking;
    let mut x = prob.start();
    let mut usum: Option<Blocks> = None;
    let mut total = 0.0;
    let mut tau_prev = safe;
    for t in 0..=tr.cfg.max_iters {
        let res = prob.residual(&x);
        if let Some(us) = &usum {
            let dual = bscale(us, 1.0 / total);
            let ev = prob.dual_eval(&dual, false)?;
            if let Some(o) = tr.evaluate(prob, t, &res, &dual, &ev) {
                return Ok(o);
            }
        }
        if t == tr.cfg.max_iters {
            break;
        }
        let grad = prob.adj(&res);
        let mut tau = if backtrack { (2.0 * tau_prev).max(safe) } else { safe };
        let xn = loop {
            let xn = bproject(&bcomb(1.0, &x, -tau, &grad))?;
            if tau <= safe {
                break xn;
            }
            let d = bcomb(1.0, &xn, -1.0, &x);
            if 0.5 * bnorm_sq(&prob.lin(&d)) <= bnorm_sq(&d) / (2.0 * tau) {
                break xn;
            }
            tau = (0.5 * tau).max(safe);
        };
        match &mut usum {
            Some(us) => baxpy(us, tau, &res),
            None => usum = Some(bscale(&res, tau)),
        }
        total += tau;
        tau_prev = tau;
        x = xn;
    }
    Ok(tr.cap(prob, &x))
}

fn fast_projected_gradient(prob: &LsProblem, tr: &mut Tracker) -> Result<Outcome> {
    let safe = 1.0 / lipschitz(prob.op, prob.h);
    let backtrack = tr.cfg.stepsize_mode == StepsizeMode::Backtracking;
    let mut x = prob.start();
    let mut s_prev = x.clone();
    let mut usum: Option<Blocks> = None;
    let mut total = 0.0;
    let mut eta_prev = safe;
    for t in 0..=tr.cfg.max_iters {
        if let Some(us) = &usum {
            let dual = bscale(us, 1.0 / total);
            let ev = prob.dual_eval(&dual, false)?;
            if let Some(o) = tr.evaluate(prob, t, &prob.residual(&x), &dual, &ev) {
                return Ok(o);
            }
        }
        if t == tr.cfg.max_iters {
            break;
        }
        // tau_t solves tau^2 = eta (T_{t-1} + tau), so that tau_t theta_t = eta.
        let mut eta = if backtrack { (2.0 * eta_prev).max(safe) } else { safe };
        let (tau, rt, s, xn) = loop {
            let tau = 0.5 * (eta + (eta * eta + 4.0 * eta * total).sqrt());
            let theta = tau / (total + tau);
            let xt = bcomb(1.0 - theta, &x, theta, &s_prev);
            let rt = prob.residual(&xt);
            let grad = prob.adj(&rt);
            let s = bproject(&bcomb(1.0, &s_prev, -tau, &grad))?;
            let xn = bcomb(1.0 - theta, &x, theta, &s);
            if eta <= safe {
                break (tau, rt, s, xn);
            }
            let ds = bcomb(1.0, &s, -1.0, &s_prev);
            if eta * bnorm_sq(&prob.lin(&ds)) <= bnorm_sq(&ds) {
                break (tau, rt, s, xn);
            }
            eta = (0.5 * eta).max(safe);
        };
        match &mut usum {
            Some(us) => baxpy(us, tau, &rt),
            None => usum = Some(bscale(&rt, tau)),
        }
        total += tau;
        eta_prev = eta;
        x = xn;
        s_prev = s;
    }
    Ok(tr.cap(prob, &x))
}
