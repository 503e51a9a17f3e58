//! Hierarchy sweeps, witness files and the benchmark suites.

use crate::error::{Error, Result};
use crate::fom::{solve_fom, FomConfig, FomMethod};
use crate::herm::HermMat;
use crate::ipm::{solve_ipm, IpmConfig};
use crate::outcome::{check_witness, Outcome, Status, WitnessCheck, WitnessFile};
use crate::partition::PartitionOp;
use crate::states::{precondition, DensityMat, Family, StateSpec, BENCH_CHECKERBOARD_SEEDS};
use crate::Hierarchy;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::Path;
use std::time::Instant;

pub const SCHEMA: &str = "entdetect/1";

/// Tolerance for the cone and trace checks of a witness.
pub const WITNESS_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Frank-Wolfe with exact line search.
    Fw,
    /// Frank-Wolfe with the open-loop step `2/(t+2)`.
    FwOpenloop,
    Pg,
    Fpg,
    Ipm,
}

impl Method {
    pub const TABLE: [Method; 4] = [Method::Fw, Method::Pg, Method::Fpg, Method::Ipm];

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fw" | "fw-linesearch" => Ok(Method::Fw),
            "fw-openloop" => Ok(Method::FwOpenloop),
            "pg" => Ok(Method::Pg),
            "fpg" => Ok(Method::Fpg),
            "ipm" => Ok(Method::Ipm),
            _ => Err(Error::InvalidParam(format!("unknown method '{s}'"))),
        }
    }

    pub fn fom(self) -> Option<FomMethod> {
        match self {
            Method::Fw => Some(FomMethod::FwLineSearch),
            Method::FwOpenloop => Some(FomMethod::FwOpenLoop),
            Method::Pg => Some(FomMethod::Pg),
            Method::Fpg => Some(FomMethod::Fpg),
            Method::Ipm => None,
        }
    }

    /// 15 for first-order methods, 8 for the IPM.
    pub fn default_kmax(self) -> usize {
        if self == Method::Ipm {
            8
        } else {
            15
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Fw => "fw",
            Method::FwOpenloop => "fw-openloop",
            Method::Pg => "pg",
            Method::Fpg => "fpg",
            Method::Ipm => "ipm",
        })
    }
}

/// Settings of a detection sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectOptions {
    pub kmax: usize,
    pub precondition: bool,
    pub fom: FomConfig,
    pub ipm: IpmConfig,
}

impl DetectOptions {
    pub fn new(method: Method) -> Self {
        DetectOptions {
            kmax: method.default_kmax(),
            precondition: false,
            fom: FomConfig::with_method(method.fom().unwrap_or(FomMethod::Fpg)),
            ipm: IpmConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelStatus {
    Detected,
    Undetected,
    IterationCap,
    Error,
}

/// Result at one level of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub k: usize,
    pub status: LevelStatus,
    pub iterations: usize,
    pub wall_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proximity: Option<f64>,
    /// The IPM proved `rho` lies in the hierarchy level.
    #[serde(default)]
    pub membership: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "k", rename_all = "kebab-case")]
pub enum Verdict {
    DetectedAt(usize),
    UndetectedThrough(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub schema: String,
    pub state: StateSpec,
    pub hierarchy: Hierarchy,
    pub method: Method,
    pub kmax: usize,
    pub precondition: bool,
    pub levels: Vec<LevelRecord>,
    #[serde(flatten)]
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_file: Option<String>,
}

impl DetectionReport {
    pub fn detected_at(&self) -> Option<usize> {
        match self.verdict {
            Verdict::DetectedAt(k) => Some(k),
            Verdict::UndetectedThrough(_) => None,
        }
    }

    /// The record deciding the verdict: the detecting level or the last one.
    pub fn final_record(&self) -> Option<&LevelRecord> {
        self.levels.last()
    }

    /// The JSON form with timing fields removed.
    pub fn without_timing(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Some(levels) = v.get_mut("levels").and_then(|l| l.as_array_mut()) {
            for l in levels {
                if let Some(o) = l.as_object_mut() {
                    o.remove("wall_seconds");
                }
            }
        }
        v
    }
}

/// A finished sweep with the witness of the detecting level, if any.
#[derive(Clone, Debug)]
pub struct Detection {
    pub report: DetectionReport,
    pub witness: Option<WitnessFile>,
}

/// Builds the state of a spec, preconditioned when asked.
pub fn build_state(spec: &StateSpec, precond: bool) -> Result<DensityMat> {
    let rho = spec.build()?;
    if precond {
        precondition(&rho)
    } else {
        Ok(rho)
    }
}

/// One solve of `method` at the level of `op`.
pub fn solve_level(op: &PartitionOp, rho: &HermMat, h: Hierarchy, method: Method, opts: &DetectOptions) -> Result<Outcome> {
    match method.fom() {
        Some(m) => solve_fom(op, rho, h, &FomConfig { method: m, ..opts.fom.clone() }),
        None => solve_ipm(op, rho, h, &opts.ipm),
    }
}

/// Packages a witness with freshly recomputed residuals.
pub fn export_witness(op: &PartitionOp, rho: &HermMat, h: Hierarchy, w: &HermMat, z: Option<&HermMat>, preconditioned: bool) -> Result<WitnessFile> {
    let residuals = check_witness(op, rho, w, z, h)?;
    Ok(WitnessFile {
        schema: SCHEMA.to_string(),
        hierarchy: h,
        k: op.k(),
        d_a: op.d_a(),
        d_b: op.d_b(),
        preconditioned,
        margin: residuals.margin,
        residuals,
        w: w.to_json(),
        z: z.map(HermMat::to_json),
    })
}

/// Runs levels `k = 1..=kmax` until the first verified detection.
pub fn detect(spec: &StateSpec, h: Hierarchy, method: Method, opts: &DetectOptions) -> Result<Detection> {
    if opts.kmax == 0 {
        return Err(Error::InvalidParam("kmax must be at least 1".into()));
    }
    opts.fom.validate()?;
    opts.ipm.validate()?;
    let rho = build_state(spec, opts.precondition)?;
    let mut levels = Vec::new();
    let mut witness = None;
    for k in 1..=opts.kmax {
        let start = Instant::now();
        let res = PartitionOp::new(rho.d_a(), rho.d_b(), k).and_then(|op| {
            let o = solve_level(&op, rho.matrix(), h, method, opts)?;
            let file = match &o.witness {
                Some(wit) if o.status == Status::Witness => {
                    Some(export_witness(&op, rho.matrix(), h, &wit.w, wit.z.as_ref(), opts.precondition)?)
                }
                _ => None,
            };
            Ok((o, file))
        });
        let rec = match res {
            Ok((o, file)) => {
                let mut rec = LevelRecord {
                    k,
                    status: match o.status {
                        Status::Witness => LevelStatus::Detected,
                        Status::Proximity => LevelStatus::Undetected,
                        Status::IterationCap => LevelStatus::IterationCap,
                    },
                    iterations: o.iterations,
                    wall_seconds: o.wall_seconds,
                    margin: o.margin,
                    proximity: o.proximity,
                    membership: o.membership,
                    final_gap: Some(o.final_gap),
                    max_residual: o.max_residual,
                    error: None,
                };
                if let Some(f) = file {
                    if f.residuals.passes(WITNESS_TOL) {
                        rec.margin = Some(f.margin);
                        witness = Some(f);
                    } else {
                        rec.status = LevelStatus::Error;
                        rec.margin = None;
                        rec.error = Some(format!("witness failed verification: {:?}", f.residuals));
                    }
                }
                rec
            }
            Err(e) => LevelRecord {
                k,
                status: LevelStatus::Error,
                iterations: 0,
                wall_seconds: start.elapsed().as_secs_f64(),
                margin: None,
                proximity: None,
                membership: false,
                final_gap: None,
                max_residual: None,
                error: Some(e.to_string()),
            },
        };
        levels.push(rec);
        if witness.is_some() {
            break;
        }
    }
    let verdict = match &witness {
        Some(w) => Verdict::DetectedAt(w.k),
        None => Verdict::UndetectedThrough(opts.kmax),
    };
    Ok(Detection {
        report: DetectionReport {
            schema: SCHEMA.to_string(),
            state: spec.clone(),
            hierarchy: h,
            method,
            kmax: opts.kmax,
            precondition: opts.precondition,
            levels,
            verdict,
            witness_file: None,
        },
        witness,
    })
}

/// Outcome of re-checking a witness file against a state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub check: WitnessCheck,
    /// The recorded margin agrees with the recomputed one.
    pub margin_consistent: bool,
    pub passes: bool,
}

/// Rechecks a witness file against the state it claims to separate,
/// rebuilding `A^*` from scratch.
pub fn verify_witness(file: &WitnessFile, state: &DensityMat) -> Result<VerifyReport> {
    if file.schema != SCHEMA {
        return Err(Error::InvalidState(format!("unknown witness schema '{}'", file.schema)));
    }
    if (file.d_a, file.d_b) != (state.d_a(), state.d_b()) {
        return Err(Error::InvalidState(format!(
            "witness is for {}x{} but the state is {}x{}",
            file.d_a,
            file.d_b,
            state.d_a(),
            state.d_b()
        )));
    }
    let rho = if file.preconditioned { precondition(state)? } else { state.clone() };
    let op = PartitionOp::new(file.d_a, file.d_b, file.k)?;
    let w = HermMat::from_json(&file.w)?;
    let z = file.z.as_ref().map(HermMat::from_json).transpose()?;
    let check = check_witness(&op, rho.matrix(), &w, z.as_ref(), file.hierarchy)?;
    let margin_consistent = (check.margin - file.margin).abs() <= 1e-9 * (1.0 + check.margin.abs());
    Ok(VerifyReport { check, margin_consistent, passes: margin_consistent && check.passes(WITNESS_TOL) })
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_witness(path: &Path) -> Result<WitnessFile> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

pub const SUITES: [&str; 7] = ["table1", "table2", "table3", "table4", "table5", "table6", "table7"];

/// Named state instances of a benchmark suite.
pub fn suite_states(suite: &str) -> Result<Vec<(String, StateSpec)>> {
    let one = |label: &str, family: Family, params: serde_json::Value| (label.to_string(), StateSpec::new(family, params));
    Ok(match suite {
        "table1" => vec![
            one("isotropic(3,0.5)", Family::Isotropic, json!({"d": 3, "lambda": 0.5})),
            one("isotropic(3,0.35)", Family::Isotropic, json!({"d": 3, "lambda": 0.35})),
        ],
        "table2" => vec![
            one("werner(3,0.3)", Family::Werner, json!({"d": 3, "lambda": 0.3})),
            one("werner(3,0.45)", Family::Werner, json!({"d": 3, "lambda": 0.45})),
        ],
        "table3" => vec![one("horodecki_3x3(0.5)", Family::Horodecki3x3, json!({"y": 0.5}))],
        "table4" => vec![one("horodecki_2x4(0.5)", Family::Horodecki2x4, json!({"x": 0.5}))],
        "table5" => vec![
            one("qutrit(1.0)", Family::Qutrit, json!({"alpha": 1.0})),
            one("qutrit(1.9)", Family::Qutrit, json!({"alpha": 1.9})),
        ],
        "table6" => vec![one("upb_tiles", Family::Upb, json!({}))],
        "table7" => BENCH_CHECKERBOARD_SEEDS
            .iter()
            .map(|&s| (format!("checkerboard(seed={s})"), StateSpec::new(Family::Checkerboard, json!({})).with_seed(s)))
            .collect(),
        _ => return Err(Error::InvalidParam(format!("unknown suite '{suite}' (expected table1..table7)"))),
    })
}

/// One row of a benchmark table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub suite: String,
    pub instance: String,
    pub hierarchy: Hierarchy,
    pub method: Method,
    /// `detected`, `undetected` or `error`.
    pub entangled: String,
    pub k: usize,
    pub itns: usize,
    /// Wall-clock seconds on this machine, not comparable to CPU times elsewhere.
    pub wall_seconds: f64,
    pub margin: Option<f64>,
    pub proximity: Option<f64>,
}

impl BenchRow {
    fn from_report(suite: &str, instance: &str, r: &DetectionReport) -> Self {
        let last = r.final_record();
        let entangled = match (r.detected_at(), last.map(|l| l.status)) {
            (Some(_), _) => "detected",
            (None, Some(LevelStatus::Error)) => "error",
            _ => "undetected",
        };
        BenchRow {
            suite: suite.to_string(),
            instance: instance.to_string(),
            hierarchy: r.hierarchy,
            method: r.method,
            entangled: entangled.to_string(),
            k: last.map_or(0, |l| l.k),
            itns: last.map_or(0, |l| l.iterations),
            wall_seconds: r.levels.iter().map(|l| l.wall_seconds).sum(),
            margin: last.and_then(|l| l.margin),
            proximity: last.and_then(|l| l.proximity),
        }
    }
}

/// Limits applied to every cell of a benchmark run.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchOptions {
    pub fom_kmax: usize,
    pub ipm_kmax: usize,
    pub methods: Vec<Method>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions { fom_kmax: Method::Fw.default_kmax(), ipm_kmax: Method::Ipm.default_kmax(), methods: Method::TABLE.to_vec() }
    }
}

/// A benchmark cell: its table row, the full report and the witness.
#[derive(Clone, Debug)]
pub struct BenchCell {
    pub row: BenchRow,
    pub detection: Detection,
}

/// Runs every (state, hierarchy, method) cell of a suite. Cell failures are
/// recorded as `error` rows.
pub fn run_benchmark(suite: &str, bopts: &BenchOptions, mut progress: impl FnMut(&BenchRow)) -> Result<Vec<BenchCell>> {
    let mut cells = Vec::new();
    for (label, spec) in suite_states(suite)? {
        for h in [Hierarchy::Ext, Hierarchy::Pst] {
            for &m in &bopts.methods {
                let mut opts = DetectOptions::new(m);
                opts.kmax = if m == Method::Ipm { bopts.ipm_kmax } else { bopts.fom_kmax };
                let detection = match detect(&spec, h, m, &opts) {
                    Ok(d) => d,
                    Err(e) => Detection {
                        report: DetectionReport {
                            schema: SCHEMA.to_string(),
                            state: spec.clone(),
                            hierarchy: h,
                            method: m,
                            kmax: opts.kmax,
                            precondition: false,
                            levels: vec![LevelRecord {
                                k: 0,
                                status: LevelStatus::Error,
                                iterations: 0,
                                wall_seconds: 0.0,
                                margin: None,
                                proximity: None,
                                membership: false,
                                final_gap: None,
                                max_residual: None,
                                error: Some(e.to_string()),
                            }],
                            verdict: Verdict::UndetectedThrough(opts.kmax),
                            witness_file: None,
                        },
                        witness: None,
                    },
                };
                let row = BenchRow::from_report(suite, &label, &detection.report);
                progress(&row);
                cells.push(BenchCell { row, detection });
            }
        }
    }
    Ok(cells)
}

pub fn write_csv(rows: &[BenchRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}
