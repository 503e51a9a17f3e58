//! Acceptance criteria 1-14. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use entdetect::fom::{gap_bound, solve_fom, FomConfig, FomMethod};
use entdetect::herm::partial_trace_a;
use entdetect::partition::DenseOracle;
use entdetect::report::{detect, run_benchmark, verify_witness, BenchOptions, DetectOptions, Detection, LevelStatus, Method, SUITES};
use entdetect::states::{
    horodecki_3x3, lopsided, precondition, CheckerboardParams, Family, StateSpec, BENCH_CHECKERBOARD_SEEDS,
};
use entdetect::sym_index::SeqTable;
use entdetect::{HermMat, Hierarchy, PartitionOp};
use faer::c64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

const EXT: Hierarchy = Hierarchy::Ext;
const PST: Hierarchy = Hierarchy::Pst;
const FOMS: [Method; 4] = [Method::Fw, Method::FwOpenloop, Method::Pg, Method::Fpg];

/// Collects sub-checks of one criterion.
#[derive(Default)]
struct Check {
    ok: bool,
    notes: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check { ok: true, notes: Vec::new() }
    }

    fn expect(&mut self, cond: bool, note: String) {
        if !cond {
            self.ok = false;
            self.notes.push(format!("FAILED {note}"));
        } else {
            self.notes.push(note);
        }
    }
}

fn random_herm_seeded(n: usize, rng: &mut ChaCha8Rng) -> HermMat {
    let mut m = HermMat::from_fn(n, |_, _| c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    m.hermitize();
    m
}

fn spec(family: Family, params: serde_json::Value) -> StateSpec {
    StateSpec::new(family, params)
}

/// Sweeps `k = 1..=kmax` and rechecks any witness against a fresh build of the state.
fn sweep(s: &StateSpec, h: Hierarchy, m: Method, kmax: usize) -> Detection {
    let mut opts = DetectOptions::new(m);
    opts.kmax = kmax;
    let d = detect(s, h, m, &opts).expect("sweep runs");
    if let Some(w) = &d.witness {
        let v = verify_witness(w, &s.build().unwrap()).unwrap();
        assert!(v.passes, "witness of {s:?} {h} {m} fails verify: {v:?}");
    }
    d
}

fn margin(d: &Detection) -> f64 {
    d.report.final_record().and_then(|l| l.margin).unwrap_or(f64::NAN)
}

fn summary(d: &Detection) -> String {
    let r = &d.report;
    let last = r.final_record().unwrap();
    match r.detected_at() {
        Some(k) => format!("{} {} detected k={k} itns={} margin={:.3e}", r.hierarchy, r.method, last.iterations, margin(d)),
        None => format!("{} {} undetected through {} ({:?})", r.hierarchy, r.method, r.kmax, last.status),
    }
}

/// Detected at exactly level `k`, with margin above `min_margin`.
fn expect_level(c: &mut Check, d: &Detection, k: usize, min_margin: f64) {
    let ok = d.report.detected_at() == Some(k) && margin(d) > min_margin;
    c.expect(ok, format!("{} (want k={k}, margin>{min_margin:e})", summary(d)));
}

fn expect_undetected(c: &mut Check, d: &Detection, max_prox: f64) {
    let prox = d.report.levels.iter().map(|l| l.proximity.unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
    let ok = d.report.detected_at().is_none()
        && d.report.levels.iter().all(|l| l.status != LevelStatus::Error)
        && prox <= max_prox;
    c.expect(ok, format!("{} max proximity={prox:.3e} (want <= {max_prox:e})", summary(d)));
}

fn c1() -> Check {
    let mut c = Check::new();
    let s = spec(Family::Isotropic, json!({"d": 3, "lambda": 0.5}));
    let t = Instant::now();
    expect_level(&mut c, &sweep(&s, PST, Method::Ipm, 8), 1, 1e-3);
    expect_level(&mut c, &sweep(&s, EXT, Method::Ipm, 8), 5, 0.0);
    let secs = t.elapsed().as_secs_f64();
    c.expect(secs < 120.0, format!("runtime {secs:.1}s (want < 120s)"));
    c
}

fn c2() -> Check {
    let mut c = Check::new();
    let s = spec(Family::Isotropic, json!({"d": 3, "lambda": 0.35}));
    expect_level(&mut c, &sweep(&s, PST, Method::Ipm, 8), 1, 0.0);
    expect_undetected(&mut c, &sweep(&s, EXT, Method::Ipm, 8), 1e-4);
    c
}

fn c3() -> Check {
    let mut c = Check::new();
    let s = spec(Family::Werner, json!({"d": 3, "lambda": 0.3}));
    expect_level(&mut c, &sweep(&s, PST, Method::Ipm, 8), 1, 1e-2);
    for m in FOMS {
        let d = sweep(&s, EXT, m, 15);
        let itns = d.report.final_record().unwrap().iterations;
        c.expect(d.report.detected_at() == Some(3) && itns <= 5, format!("{} (want k=3, itns<=5)", summary(&d)));
    }
    c
}

fn c4() -> Check {
    let mut c = Check::new();
    let s = spec(Family::Werner, json!({"d": 3, "lambda": 0.45}));
    expect_level(&mut c, &sweep(&s, PST, Method::Ipm, 8), 1, 0.0);
    let d = sweep(&s, EXT, Method::Ipm, 12);
    c.expect(d.report.detected_at().is_some_and(|k| k <= 12), format!("{} (want k<=12)", summary(&d)));
    c
}

fn c5() -> Check {
    let mut c = Check::new();
    let s = spec(Family::Horodecki3x3, json!({"y": 0.5}));
    let lmin = s.build().unwrap().ppt_min_eigenvalue().unwrap();
    c.expect(lmin >= -1e-10, format!("PT lambda_min={lmin:.3e}"));
    expect_undetected(&mut c, &sweep(&s, EXT, Method::Fpg, 15), 5e-3);
    expect_level(&mut c, &sweep(&s, PST, Method::Ipm, 8), 2, 1e-4);
    c
}

fn c6() -> Check {
    let mut c = Check::new();
    let s = spec(Family::Horodecki2x4, json!({"x": 0.5}));
    expect_level(&mut c, &sweep(&s, PST, Method::Ipm, 8), 2, 5e-4);
    expect_level(&mut c, &sweep(&s, EXT, Method::Ipm, 8), 5, 0.0);
    expect_level(&mut c, &sweep(&s, PST, Method::Fpg, 15), 2, 0.0);
    c
}

fn c7() -> Check {
    let mut c = Check::new();
    let q1 = spec(Family::Qutrit, json!({"alpha": 1.0}));
    expect_level(&mut c, &sweep(&q1, EXT, Method::Ipm, 8), 5, 0.0);
    expect_level(&mut c, &sweep(&q1, PST, Method::Ipm, 8), 2, 0.0);
    let q19 = spec(Family::Qutrit, json!({"alpha": 1.9}));
    expect_level(&mut c, &sweep(&q19, PST, Method::Ipm, 8), 2, 1e-5);
    expect_undetected(&mut c, &sweep(&q19, EXT, Method::Ipm, 8), f64::INFINITY);
    c
}

fn c8() -> Check {
    let mut c = Check::new();
    let s = spec(Family::Upb, json!({}));
    expect_level(&mut c, &sweep(&s, EXT, Method::Ipm, 8), 3, 0.0);
    expect_level(&mut c, &sweep(&s, PST, Method::Ipm, 8), 2, 1e-3);
    c
}

fn c9() -> Check {
    let mut c = Check::new();
    for seed in BENCH_CHECKERBOARD_SEEDS {
        let (m1, m2) = CheckerboardParams::sample(seed).range_margins();
        c.expect(m1 > 0.05 && m2 > 0.05, format!("seed {seed}: range margins {m1:.3}, {m2:.3}"));
        let s = spec(Family::Checkerboard, json!({})).with_seed(seed);
        for m in Method::TABLE {
            let d = sweep(&s, PST, m, 3);
            expect_level(&mut c, &d, 2, 0.0);
        }
    }
    c
}

fn c10() -> Check {
    let mut c = Check::new();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut id_err, mut adj_err, mut dense_err) = (0.0f64, 0.0f64, 0.0f64);
    for d_a in 1..=3 {
        for d in 1..=3 {
            for k in 1..=3 {
                let op = PartitionOp::new(d_a, d, k).unwrap();
                let oracle = DenseOracle::new(d_a, d, k).unwrap();
                let ident = op.apply_a_adjoint(&HermMat::identity(op.n_ab())).unwrap();
                id_err = id_err.max(ident.sub(&op.identity_h()).max_abs());
                for _ in 0..50 {
                    let x = random_herm_seeded(op.n_h(), &mut rng);
                    let w = random_herm_seeded(op.n_ab(), &mut rng);
                    let ax = op.apply_a(&x).unwrap();
                    let aw = op.apply_a_adjoint(&w).unwrap();
                    let (l, r) = (ax.dot(&w), x.dot(&aw));
                    adj_err = adj_err.max((l - r).abs() / (1.0 + l.abs().max(r.abs())));
                    dense_err = dense_err.max(ax.sub(&oracle.apply_a(&x)).max_abs());
                    dense_err = dense_err.max(aw.sub(&oracle.apply_a_adjoint(&w)).max_abs());
                }
            }
        }
    }
    c.expect(id_err == 0.0, format!("A*(I) - I max error {id_err:e} (want exactly 0)"));
    c.expect(adj_err <= 1e-10, format!("adjointness relative error {adj_err:.3e}"));
    c.expect(dense_err <= 1e-12, format!("dense oracle max error {dense_err:.3e}"));
    c
}

fn power_iteration(op: &PartitionOp, rng: &mut ChaCha8Rng) -> f64 {
    let mut x = random_herm_seeded(op.n_h(), rng);
    let mut lambda = 0.0;
    for _ in 0..5000 {
        let nx = x.norm();
        x.scale_mut(1.0 / nx);
        let y = op.apply_a_adjoint(&op.apply_a(&x).unwrap()).unwrap();
        let next = x.dot(&y);
        x = y;
        if (next - lambda).abs() <= 1e-14 * next {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// `k^2 (a_k, b_k, c_k)` as exact integers, summing over sequences.
fn gram_integers(d: usize, k: usize) -> (u128, u128, u128) {
    let t = SeqTable::new(d, k).unwrap();
    let km1 = SeqTable::new(d, k - 1).unwrap();
    let mut a = 0u128;
    let mut cc = 0u128;
    for r in 0..t.len() {
        let s = t.counts(r);
        a += (s[0] as u128).pow(2);
        if d > 1 {
            cc += s[0] as u128 * s[1] as u128;
        }
    }
    let b = if d > 1 {
        (0..km1.len()).map(|r| (km1.counts(r)[0] as u128 + 1) * (km1.counts(r)[1] as u128 + 1)).sum()
    } else {
        a
    };
    (a, b, cc)
}

fn c11() -> Check {
    let mut c = Check::new();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for d_b in [2, 3] {
        for k in 2..=6 {
            let op = PartitionOp::new(2, d_b, k).unwrap();
            let want = op.dk() as f64 / d_b as f64;
            worst = worst.max((power_iteration(&op, &mut rng) - want).abs() / want);
        }
    }
    c.expect(worst <= 1e-6, format!("||A*A|| vs d_k/d_b worst relative error {worst:.3e}"));
    let (mut exact, mut float_err) = (true, 0.0f64);
    for d in 2..=5 {
        for k in 1..=8 {
            let (a, b, cc) = gram_integers(d, k);
            exact &= a == b + cc;
            let k2 = (k * k) as f64;
            let (fa, fb, fc) = PartitionOp::new(1, d, k).unwrap().gram_constants();
            for (x, y) in [(fa, a), (fb, b), (fc, cc)] {
                float_err = float_err.max((x - y as f64 / k2).abs() / (y as f64 / k2).max(1e-300));
            }
        }
    }
    c.expect(exact, "a_k = b_k + c_k exactly in integers (d<=5, k<=8)".into());
    c.expect(float_err <= 1e-12, format!("operator Gram constants vs exact sums relative error {float_err:.3e}"));
    c
}

fn random_density(n: usize, rng: &mut ChaCha8Rng) -> HermMat {
    let g = random_herm_seeded(n, rng);
    let mut r = HermMat::identity(n).sandwich(&g);
    r.add_identity(1e-3);
    let tr = r.trace();
    r.scale(1.0 / tr)
}

fn c12() -> Check {
    let mut c = Check::new();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let op = PartitionOp::new(3, 3, 3).unwrap();
    let methods = [FomMethod::FwOpenLoop, FomMethod::FwLineSearch, FomMethod::Pg, FomMethod::Fpg];
    let mut worst = 0.0f64;
    let mut points = 0usize;
    for _ in 0..5 {
        let rho = random_density(9, &mut rng);
        for h in [EXT, PST] {
            for m in methods {
                let cfg = FomConfig { max_iters: 200, gap_tol: 0.0, stop_on_detection: false, ..FomConfig::with_method(m) };
                let o = solve_fom(&op, &rho, h, &cfg).unwrap();
                for &(t, g) in &o.gap_history {
                    let b = gap_bound(m, h, t, op.d_b(), op.dk());
                    if b.is_finite() {
                        worst = worst.max(g / b);
                        points += 1;
                    }
                }
            }
        }
    }
    c.expect(points > 5 * 8 * 190, format!("{points} recorded gaps checked"));
    c.expect(worst <= 1.01, format!("max gap/bound ratio {worst:.4} (want <= 1.01)"));
    c
}

fn c13() -> Check {
    let mut c = Check::new();
    let bopts = BenchOptions { methods: vec![Method::Ipm], ..BenchOptions::default() };
    let (mut cells, mut worst, mut witnesses, mut verified) = (0, 0.0f64, 0, 0);
    for suite in SUITES {
        for cell in run_benchmark(suite, &bopts, |_| {}).unwrap() {
            cells += 1;
            let rep = &cell.detection.report;
            let rho = rep.state.build().unwrap();
            let scale = 1.0 + rho.matrix().norm();
            for l in &rep.levels {
                match l.max_residual {
                    Some(r) => worst = worst.max(r / scale),
                    None => c.expect(false, format!("{} {} k={}: no residual ({:?})", cell.row.instance, rep.hierarchy, l.k, l.error)),
                }
            }
            if let Some(w) = &cell.detection.witness {
                witnesses += 1;
                if verify_witness(w, &rho).map(|v| v.passes).unwrap_or(false) {
                    verified += 1;
                }
            }
        }
    }
    c.expect(worst <= 1e-7, format!("{cells} IPM cells, max residual/(1+||rho||) {worst:.3e}"));
    c.expect(witnesses == verified, format!("{verified}/{witnesses} witnesses pass verify"));
    c
}

fn c14() -> Check {
    let mut c = Check::new();
    let h3 = horodecki_3x3(0.5).unwrap();
    for gamma in [0.2, 5.0] {
        let p = precondition(&lopsided(&h3, gamma).unwrap()).unwrap();
        let err = partial_trace_a(p.matrix(), 3, 3).unwrap().sub(&HermMat::scaled_identity(3, 1.0 / 3.0)).max_abs();
        c.expect(err <= 1e-10, format!("gamma={gamma}: Tr_a error {err:.3e}"));
        let s = spec(Family::Horodecki3x3, json!({"y": 0.5, "gamma": gamma}));
        let mut opts = DetectOptions::new(Method::Ipm);
        opts.kmax = 2;
        opts.precondition = true;
        let d = detect(&s, PST, Method::Ipm, &opts).unwrap();
        c.expect(d.report.detected_at() == Some(2), format!("gamma={gamma}: preconditioned {}", summary(&d)));
    }
    let iso = spec(Family::Isotropic, json!({"d": 3, "lambda": 1.0 / 3.0}));
    let mut runs = 0;
    for m in [Method::Fw, Method::FwOpenloop, Method::Pg, Method::Fpg, Method::Ipm] {
        for h in [EXT, PST] {
            for pre in [false, true] {
                let mut opts = DetectOptions::new(m);
                opts.kmax = 3;
                opts.precondition = pre;
                let d = detect(&iso, h, m, &opts).unwrap();
                runs += 1;
                if d.report.detected_at().is_some() {
                    c.expect(false, format!("isotropic(3,1/3) precondition={pre}: {}", summary(&d)));
                }
            }
        }
    }
    c.expect(true, format!("isotropic(3,1/3) undetected in {runs} configurations"));
    c
}

type Criterion = (u32, &'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 14] = [
        (1, "isotropic(3,0.5) levels", c1),
        (2, "isotropic(3,0.35) levels", c2),
        (3, "werner(3,0.3) levels", c3),
        (4, "werner(3,0.45) levels", c4),
        (5, "horodecki_3x3(0.5) levels", c5),
        (6, "horodecki_2x4(0.5) levels", c6),
        (7, "qutrit family levels", c7),
        (8, "upb_tiles levels", c8),
        (9, "checkerboard PST k=2", c9),
        (10, "operator identities", c10),
        (11, "Gram spectrum and constants", c11),
        (12, "FOM convergence envelopes", c12),
        (13, "IPM feasibility and verify", c13),
        (14, "preconditioning and soundness", c14),
    ];
    let only: Vec<u32> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut failed = Vec::new();
    for (n, name, f) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let check = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Check { ok: false, notes: vec![format!("panicked: {}", msg.unwrap_or_default())] }
        });
        let verdict = if check.ok { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {n:>2} {name} [{:.1}s]: {}", t.elapsed().as_secs_f64(), check.notes.join("; "));
        if !check.ok {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        println!("acceptance: criteria {failed:?} failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
