//! Benchmark state families, the lopsided transform and preconditioning.

use crate::error::{Error, Result};
use crate::herm::{kron, partial_trace_a, partial_transpose_t, HermMat};
use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Seed used for checkerboard sampling when none is given.
pub const DEFAULT_CHECKERBOARD_SEED: u64 = 1;

/// Seeds of the four checkerboard instances in the `table7` suite.
pub const BENCH_CHECKERBOARD_SEEDS: [u64; 4] = [6, 10, 14, 20];

/// A bipartite density matrix on `C^{d_a} (x) C^{d_b}`.
#[derive(Clone, Debug)]
pub struct DensityMat {
    rho: HermMat,
    d_a: usize,
    d_b: usize,
}

impl DensityMat {
    /// Validates trace one and positivity, each to `1e-10`.
    pub fn new(rho: HermMat, d_a: usize, d_b: usize) -> Result<Self> {
        if rho.n() != d_a * d_b {
            return Err(Error::DimMismatch { expected: d_a * d_b, got: rho.n() });
        }
        let tr = rho.trace();
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let lmin = rho.lambda_min()?;
        if lmin < -1e-10 {
            return Err(Error::InvalidState(format!("minimum eigenvalue {lmin:e} is negative")));
        }
        Ok(DensityMat { rho, d_a, d_b })
    }

    pub fn maximally_mixed(d_a: usize, d_b: usize) -> Self {
        let n = d_a * d_b;
        DensityMat { rho: HermMat::scaled_identity(n, 1.0 / n as f64), d_a, d_b }
    }

    pub fn matrix(&self) -> &HermMat {
        &self.rho
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn d_b(&self) -> usize {
        self.d_b
    }

    /// Partial transpose on the `b` factor.
    pub fn partial_transpose(&self) -> HermMat {
        partial_transpose_t(&self.rho, self.d_a, self.d_b).expect("dimensions checked on construction")
    }

    /// Smallest eigenvalue of the partial transpose.
    pub fn ppt_min_eigenvalue(&self) -> Result<f64> {
        self.partial_transpose().lambda_min()
    }

    pub fn reduced_b(&self) -> HermMat {
        partial_trace_a(&self.rho, self.d_a, self.d_b).expect("dimensions checked on construction")
    }
}

fn check_unit(name: &str, v: f64, hi: f64) -> Result<()> {
    if !(0.0..=hi).contains(&v) {
        return Err(Error::InvalidParam(format!("{name}={v} outside [0, {hi}]")));
    }
    Ok(())
}

fn ket(n: usize, entries: &[(usize, c64)]) -> Vec<c64> {
    let mut v = vec![c64::new(0.0, 0.0); n];
    for &(i, a) in entries {
        v[i] += a;
    }
    v
}

fn re(x: f64) -> c64 {
    c64::new(x, 0.0)
}

fn max_entangled(d: usize) -> Vec<c64> {
    let s = 1.0 / (d as f64).sqrt();
    ket(d * d, &(0..d).map(|i| (i * d + i, re(s))).collect::<Vec<_>>())
}

/// The SWAP operator on `C^d (x) C^d`.
pub fn swap(d: usize) -> HermMat {
    let n = d * d;
    HermMat::from_fn(n, |r, c| {
        let (i, j) = (r / d, r % d);
        if c == j * d + i { re(1.0) } else { re(0.0) }
    })
}

/// `lambda |psi><psi| + (1 - lambda)/(d^2 - 1) (I - |psi><psi|)`.
pub fn isotropic(d: usize, lambda: f64) -> Result<DensityMat> {
    check_unit("lambda", lambda, 1.0)?;
    if d < 2 {
        return Err(Error::InvalidParam("isotropic states need d >= 2".into()));
    }
    let n = d * d;
    let p = HermMat::outer(&max_entangled(d));
    let q = (1.0 - lambda) / (n as f64 - 1.0);
    let mut rho = p.scale(lambda - q);
    rho.add_identity(q);
    DensityMat::new(rho, d, d)
}

/// `lambda/(d(d+1)) (I + SWAP) + (1 - lambda)/(d(d-1)) (I - SWAP)`.
pub fn werner(d: usize, lambda: f64) -> Result<DensityMat> {
    check_unit("lambda", lambda, 1.0)?;
    if d < 2 {
        return Err(Error::InvalidParam("Werner states need d >= 2".into()));
    }
    let df = d as f64;
    let (p, q) = (lambda / (df * (df + 1.0)), (1.0 - lambda) / (df * (df - 1.0)));
    let mut rho = swap(d).scale(p - q);
    rho.add_identity(p + q);
    DensityMat::new(rho, d, d)
}

/// The 3x3 bound entangled family with parameter `y`.
pub fn horodecki_3x3(y: f64) -> Result<DensityMat> {
    check_unit("y", y, 1.0)?;
    let mut m = Mat::<c64>::zeros(9, 9);
    for i in [0, 1, 2, 3, 4, 5] {
        m[(i, i)] = re(y);
    }
    // Off-diagonal blocks B, C, D each carry one entry y.
    for (r, c) in [(0, 4), (0, 8), (4, 8)] {
        m[(r, c)] = re(y);
        m[(c, r)] = re(y);
    }
    let h = 0.5 * (1.0 - y * y).sqrt();
    m[(6, 6)] = re(0.5 * (1.0 + y));
    m[(8, 8)] = re(0.5 * (1.0 + y));
    m[(7, 7)] = re(y);
    m[(6, 8)] = re(h);
    m[(8, 6)] = re(h);
    let rho = HermMat::from_mat_hermitized(m).scale(1.0 / (8.0 * y + 1.0));
    DensityMat::new(rho, 3, 3)
}

/// The 2x4 bound entangled family with parameter `x`.
pub fn horodecki_2x4(x: f64) -> Result<DensityMat> {
    check_unit("x", x, 1.0)?;
    let mut m = Mat::<c64>::zeros(8, 8);
    for i in [0, 1, 2, 3, 5, 6] {
        m[(i, i)] = re(x);
    }
    for (r, c) in [(0, 5), (1, 6), (2, 7)] {
        m[(r, c)] = re(x);
        m[(c, r)] = re(x);
    }
    let h = 0.5 * (1.0 - x * x).sqrt();
    m[(4, 4)] = re(0.5 * (1.0 + x));
    m[(7, 7)] = re(0.5 * (1.0 + x));
    m[(4, 7)] = re(h);
    m[(7, 4)] = re(h);
    let rho = HermMat::from_mat_hermitized(m).scale(1.0 / (7.0 * x + 1.0));
    DensityMat::new(rho, 2, 4)
}

/// `(2/7)|psi+><psi+| + (alpha/7) sigma+ + ((5 - alpha)/7) S sigma+ S`.
///
/// `sigma+` is the uniform mixture of `|01>, |12>, |20>`, so each projector
/// carries weight 1/3 and the state has unit trace.
pub fn qutrit_family(alpha: f64) -> Result<DensityMat> {
    check_unit("alpha", alpha, 2.5)?;
    let mut rho = HermMat::outer(&max_entangled(3)).scale(2.0 / 7.0);
    for (i, j) in [(0, 1), (1, 2), (2, 0)] {
        rho.axpy(alpha / 21.0, &HermMat::diag(&unit_diag(9, 3 * i + j)));
        rho.axpy((5.0 - alpha) / 21.0, &HermMat::diag(&unit_diag(9, 3 * j + i)));
    }
    DensityMat::new(rho, 3, 3)
}

fn unit_diag(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

/// The five product vectors of the Tiles unextendible product basis.
pub fn upb_tiles_vectors() -> Vec<Vec<c64>> {
    let s = 1.0 / 2f64.sqrt();
    let prod = |a: [f64; 3], b: [f64; 3], scale: f64| -> Vec<c64> {
        (0..9).map(|r| re(scale * a[r / 3] * b[r % 3])).collect()
    };
    vec![
        prod([1.0, 0.0, 0.0], [1.0, -1.0, 0.0], s),
        prod([1.0, -1.0, 0.0], [0.0, 0.0, 1.0], s),
        prod([0.0, 0.0, 1.0], [0.0, 1.0, -1.0], s),
        prod([0.0, 1.0, -1.0], [1.0, 0.0, 0.0], s),
        prod([1.0, 1.0, 1.0], [1.0, 1.0, 1.0], 1.0 / 3.0),
    ]
}

/// `(1/4)(I - sum |chi_i><chi_i|)` over the normalized Tiles vectors.
pub fn upb_tiles() -> Result<DensityMat> {
    let mut rho = HermMat::identity(9);
    for v in upb_tiles_vectors() {
        let nrm: f64 = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let u: Vec<c64> = v.iter().map(|a| a / nrm).collect();
        rho.axpy(-1.0, &HermMat::outer(&u));
    }
    DensityMat::new(rho.scale(0.25), 3, 3)
}

/// Parameters of a 3x3 checkerboard state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckerboardParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub m: f64,
    pub n: f64,
    pub s: [f64; 2],
    pub t: [f64; 2],
}

impl CheckerboardParams {
    fn s(&self) -> c64 {
        c64::new(self.s[0], self.s[1])
    }

    fn t(&self) -> c64 {
        c64::new(self.t[0], self.t[1])
    }

    /// `|mc - bs|` and `|nd - tb|`; the state is entangled when both are nonzero.
    pub fn range_margins(&self) -> (f64, f64) {
        ((re(self.m * self.c) - self.s() * self.b).norm(), (re(self.n * self.d) - self.t() * self.b).norm())
    }

    /// Parameters on the PPT branch of the family: `s = ac/n` and `t = ad/m`
    /// (real), for which the partial transpose of the state equals the state.
    pub fn ppt(a: f64, b: f64, c: f64, d: f64, m: f64, n: f64) -> Self {
        let (s, t) = (a * c / n, a * d / m);
        CheckerboardParams { a, b, c, d, m, n, s: [s, 0.0], t: [t, 0.0] }
    }

    /// Draws `a, b, c, d, m, n` i.i.d. uniform on `[-1, 1]` and sets `s, t` as in
    /// [`CheckerboardParams::ppt`], until `|s|, |t| <= 1`, `c, d, s, t` are
    /// nonzero and both range margins exceed 0.05.
    pub fn sample(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let mut u = || rng.gen_range(-1.0..=1.0);
            let (a, b, c, d, m, n) = (u(), u(), u(), u(), u(), u());
            let p = CheckerboardParams::ppt(a, b, c, d, m, n);
            if !(p.s[0].abs() <= 1.0 && p.t[0].abs() <= 1.0) {
                continue;
            }
            let (e1, e2) = p.range_margins();
            let nonzero = [c.abs(), d.abs(), p.s[0].abs(), p.t[0].abs()].iter().all(|&x| x > 1e-3);
            if nonzero && e1 > 0.05 && e2 > 0.05 {
                return p;
            }
        }
    }
}

/// `(1/N) sum_i |v_i><v_i|` for the four checkerboard vectors.
pub fn checkerboard(p: &CheckerboardParams) -> Result<DensityMat> {
    let k = |i: usize, j: usize| 3 * i + j;
    let vs = [
        ket(9, &[(k(0, 0), re(p.m)), (k(1, 1), re(p.n)), (k(2, 0), p.s())]),
        ket(9, &[(k(0, 1), re(p.b)), (k(1, 0), re(p.a)), (k(2, 1), re(p.c))]),
        ket(9, &[(k(0, 0), re(p.n)), (k(1, 1), re(-p.m)), (k(0, 2), p.t())]),
        ket(9, &[(k(0, 1), re(-p.a)), (k(1, 0), re(p.b)), (k(1, 2), re(p.d))]),
    ];
    let mut rho = HermMat::zeros(9);
    for v in &vs {
        rho.axpy(1.0, &HermMat::outer(v));
    }
    let norm = rho.trace();
    if norm <= 1e-14 {
        return Err(Error::InvalidParam("all checkerboard vectors vanish".into()));
    }
    DensityMat::new(rho.scale(1.0 / norm), 3, 3)
}

/// `c (I_a (x) D_gamma) rho (I_a (x) D_gamma)` with `D_gamma = diag(1, gamma, ..., gamma)`.
pub fn lopsided(rho: &DensityMat, gamma: f64) -> Result<DensityMat> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParam(format!("gamma={gamma} must be positive")));
    }
    let mut dg = vec![gamma; rho.d_b];
    dg[0] = 1.0;
    let t = kron(&HermMat::identity(rho.d_a), &HermMat::diag(&dg));
    let out = rho.rho.sandwich(&t);
    let tr = out.trace();
    DensityMat::new(out.scale(1.0 / tr), rho.d_a, rho.d_b)
}

/// `(1/d_b)(I_a (x) rho_b^{-1/2}) rho (I_a (x) rho_b^{-1/2})` with `rho_b = Tr_a rho`.
pub fn precondition(rho: &DensityMat) -> Result<DensityMat> {
    let e = rho.reduced_b().eig()?;
    if e.min() <= 1e-12 {
        return Err(Error::SingularReduced(e.min()));
    }
    let inv_sqrt = e.map(|l| 1.0 / l.sqrt());
    let t = kron(&HermMat::identity(rho.d_a), &inv_sqrt);
    let out = rho.rho.sandwich(&t).scale(1.0 / rho.d_b as f64);
    DensityMat::new(out, rho.d_a, rho.d_b)
}

/// State family tags.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Isotropic,
    Werner,
    #[serde(rename = "horodecki_3x3", alias = "horodecki3x3")]
    Horodecki3x3,
    #[serde(rename = "horodecki_2x4", alias = "horodecki2x4")]
    Horodecki2x4,
    Qutrit,
    Upb,
    Checkerboard,
    MaximallyMixed,
}

impl Family {
    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(Value::String(s.to_string()))
            .map_err(|_| Error::InvalidParam(format!("unknown state family '{s}'")))
    }
}

/// A state family with its parameters, as read from the CLI or JSON.
///
/// Recognized parameters: `d`, `lambda` (isotropic, werner); `y`
/// (horodecki_3x3); `x` (horodecki_2x4); `alpha` (qutrit); `a, b, c, d, m,
/// n, s, t` (checkerboard, with `s` and `t` as `[re, im]`); `d_a, d_b`
/// (maximally_mixed). Any family accepts `gamma` to apply the lopsided
/// transform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    pub family: Family,
    #[serde(default)]
    pub params: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl StateSpec {
    pub fn new(family: Family, params: Value) -> Self {
        let params = match params {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        StateSpec { family, params, seed: None }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    fn f64_param(&self, name: &str) -> Result<Option<f64>> {
        match self.params.get(name) {
            None => Ok(None),
            Some(v) => v
                .as_f64()
                .map(Some)
                .ok_or_else(|| Error::InvalidParam(format!("parameter '{name}' must be a number"))),
        }
    }

    fn required(&self, name: &str) -> Result<f64> {
        self.f64_param(name)?
            .ok_or_else(|| Error::InvalidParam(format!("{:?} requires parameter '{name}'", self.family)))
    }

    fn dim_param(&self, name: &str, default: usize) -> Result<usize> {
        match self.f64_param(name)? {
            None => Ok(default),
            Some(x) if x >= 1.0 && x.fract() == 0.0 => Ok(x as usize),
            Some(x) => Err(Error::InvalidParam(format!("parameter '{name}'={x} must be a positive integer"))),
        }
    }

    fn complex_param(&self, name: &str) -> Result<[f64; 2]> {
        match self.params.get(name) {
            Some(Value::Number(n)) => Ok([n.as_f64().unwrap_or(0.0), 0.0]),
            Some(Value::Array(a)) if a.len() == 2 && a.iter().all(Value::is_number) => {
                Ok([a[0].as_f64().unwrap_or(0.0), a[1].as_f64().unwrap_or(0.0)])
            }
            _ => Err(Error::InvalidParam(format!("checkerboard requires '{name}' as a number or [re, im]"))),
        }
    }

    /// Checkerboard parameters: explicit if `a` is given (with `s, t` on the PPT
    /// branch when omitted), otherwise sampled.
    pub fn checkerboard_params(&self) -> Result<CheckerboardParams> {
        if self.params.contains_key("a") && !self.params.contains_key("s") && !self.params.contains_key("t") {
            Ok(CheckerboardParams::ppt(
                self.required("a")?,
                self.required("b")?,
                self.required("c")?,
                self.required("d")?,
                self.required("m")?,
                self.required("n")?,
            ))
        } else if self.params.contains_key("a") {
            Ok(CheckerboardParams {
                a: self.required("a")?,
                b: self.required("b")?,
                c: self.required("c")?,
                d: self.required("d")?,
                m: self.required("m")?,
                n: self.required("n")?,
                s: self.complex_param("s")?,
                t: self.complex_param("t")?,
            })
        } else {
            Ok(CheckerboardParams::sample(self.seed.unwrap_or(DEFAULT_CHECKERBOARD_SEED)))
        }
    }

    pub fn build(&self) -> Result<DensityMat> {
        let rho = match self.family {
            Family::Isotropic => isotropic(self.dim_param("d", 3)?, self.required("lambda")?)?,
            Family::Werner => werner(self.dim_param("d", 3)?, self.required("lambda")?)?,
            Family::Horodecki3x3 => horodecki_3x3(self.required("y")?)?,
            Family::Horodecki2x4 => horodecki_2x4(self.required("x")?)?,
            Family::Qutrit => qutrit_family(self.required("alpha")?)?,
            Family::Upb => upb_tiles()?,
            Family::Checkerboard => checkerboard(&self.checkerboard_params()?)?,
            Family::MaximallyMixed => {
                DensityMat::maximally_mixed(self.dim_param("d_a", 3)?, self.dim_param("d_b", 3)?)
            }
        };
        match self.f64_param("gamma")? {
            Some(g) => lopsided(&rho, g),
            None => Ok(rho),
        }
    }
}
