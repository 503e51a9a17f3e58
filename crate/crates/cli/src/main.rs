//! `entdetect`: hierarchy sweeps, benchmark suites and witness verification.
//!
//! Exit codes: 0 when a run completes (either verdict), 1 when `verify`
//! rejects a witness, 2 on invalid input, 3 on solver failure.

use clap::{Args, Parser, Subcommand, ValueEnum};
use entdetect::report::{
    self, detect, read_witness, run_benchmark, suite_states, verify_witness, write_csv, write_json, BenchOptions,
    DetectOptions, LevelStatus, Method, Verdict,
};
use entdetect::states::{Family, StateSpec};
use entdetect::{Error, Hierarchy};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "entdetect", version, about = "Entanglement detection with the EXT and PST hierarchies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep k = 1..kmax until the state is detected as entangled.
    Detect(DetectArgs),
    /// Run benchmark suites and write CSV and JSON tables.
    Bench(BenchArgs),
    /// Recheck a witness file against a state.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct StateArgs {
    /// State family, e.g. isotropic, werner, horodecki_3x3, upb, checkerboard.
    #[arg(long)]
    state: String,
    /// Family parameters as a JSON object.
    #[arg(long, default_value = "{}")]
    params: String,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum HierarchyArg {
    Ext,
    Pst,
}

impl From<HierarchyArg> for Hierarchy {
    fn from(h: HierarchyArg) -> Self {
        match h {
            HierarchyArg::Ext => Hierarchy::Ext,
            HierarchyArg::Pst => Hierarchy::Pst,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    /// Frank-Wolfe with exact line search.
    Fw,
    FwOpenloop,
    Pg,
    Fpg,
    Ipm,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Fw => Method::Fw,
            MethodArg::FwOpenloop => Method::FwOpenloop,
            MethodArg::Pg => Method::Pg,
            MethodArg::Fpg => Method::Fpg,
            MethodArg::Ipm => Method::Ipm,
        }
    }
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    state: StateArgs,
    #[arg(long, value_enum)]
    hierarchy: HierarchyArg,
    #[arg(long, value_enum, default_value = "fpg")]
    method: MethodArg,
    /// Highest level tried; 15 for first-order methods and 8 for ipm by default.
    #[arg(long)]
    kmax: Option<usize>,
    /// Rescale the state so that its B marginal is maximally mixed.
    #[arg(long)]
    precondition: bool,
    #[arg(long)]
    gap_tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Report path; a detected witness goes to `<stem>.witness.json` beside it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Suite name (table1..table7); repeatable. No suite runs nothing.
    #[arg(long)]
    suite: Vec<String>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Restrict to these methods (default: fw, pg, fpg, ipm).
    #[arg(long, value_enum)]
    method: Vec<MethodArg>,
    #[arg(long, default_value_t = 15)]
    fom_kmax: usize,
    #[arg(long, default_value_t = 8)]
    ipm_kmax: usize,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    witness: PathBuf,
    #[command(flatten)]
    state: StateArgs,
    #[arg(long, value_enum)]
    hierarchy: HierarchyArg,
    #[arg(short = 'k', long = "k")]
    k: usize,
}

enum Failure {
    Input(String),
    Solver(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_input() {
            Failure::Input(e.to_string())
        } else {
            Failure::Solver(e.to_string())
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}

fn parse_state(a: &StateArgs) -> Result<StateSpec, Failure> {
    let family = Family::parse(&a.state)?;
    let params: Value =
        serde_json::from_str(&a.params).map_err(|e| Failure::Input(format!("--params is not valid JSON: {e}")))?;
    if !params.is_object() {
        return Err(Failure::Input("--params must be a JSON object".into()));
    }
    let mut spec = StateSpec::new(family, params);
    spec.seed = a.seed;
    Ok(spec)
}

fn witness_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "report".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.witness.json"))
}

fn run_detect(a: &DetectArgs) -> Result<ExitCode, Failure> {
    let spec = parse_state(&a.state)?;
    let method = Method::from(a.method);
    let mut opts = DetectOptions::new(method);
    if let Some(k) = a.kmax {
        opts.kmax = k;
    }
    opts.precondition = a.precondition;
    if let Some(t) = a.gap_tol {
        opts.fom.gap_tol = t;
        opts.ipm.gap_tol = t;
    }
    if let Some(n) = a.max_iters {
        opts.fom.max_iters = n;
        opts.ipm.max_iters = n;
    }
    let mut d = detect(&spec, a.hierarchy.into(), method, &opts)?;
    for l in &d.report.levels {
        if let Some(e) = &l.error {
            eprintln!("warning: k={}: {e}", l.k);
        }
    }
    if let Some(w) = &d.witness {
        let wp = witness_path(&a.out);
        write_json(w, &wp).map_err(|e| io_err(&wp, e))?;
        d.report.witness_file = Some(wp.to_string_lossy().into_owned());
    }
    write_json(&d.report, &a.out).map_err(|e| io_err(&a.out, e))?;
    let last = d.report.levels.last().expect("at least one level");
    match d.report.verdict {
        Verdict::DetectedAt(k) => println!("detected at k={k} margin={:.6e}", last.margin.unwrap_or(f64::NAN)),
        Verdict::UndetectedThrough(k) => {
            println!("undetected through k={k} proximity={:.6e}", last.proximity.unwrap_or(f64::NAN))
        }
    }
    if d.report.levels.iter().all(|l| l.status == LevelStatus::Error) {
        return Err(Failure::Solver("every level failed".into()));
    }
    Ok(ExitCode::SUCCESS)
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' }).collect()
}

fn run_bench(a: &BenchArgs) -> Result<ExitCode, Failure> {
    for s in &a.suite {
        suite_states(s)?;
    }
    if a.fom_kmax == 0 || a.ipm_kmax == 0 {
        return Err(Failure::Input("kmax must be at least 1".into()));
    }
    std::fs::create_dir_all(&a.out_dir).map_err(|e| io_err(&a.out_dir, e))?;
    let bopts = BenchOptions {
        fom_kmax: a.fom_kmax,
        ipm_kmax: a.ipm_kmax,
        methods: if a.method.is_empty() { Method::TABLE.to_vec() } else { a.method.iter().map(|&m| m.into()).collect() },
    };
    for suite in &a.suite {
        let cells = run_benchmark(suite, &bopts, |r| {
            eprintln!(
                "{suite} {} {} {}: {} k={} itns={} {:.2}s",
                r.instance, r.hierarchy, r.method, r.entangled, r.k, r.itns, r.wall_seconds
            )
        })?;
        let wdir = a.out_dir.join(format!("{suite}_witnesses"));
        let mut reports = Vec::new();
        for c in &cells {
            let mut rep = c.detection.report.clone();
            if let Some(w) = &c.detection.witness {
                std::fs::create_dir_all(&wdir).map_err(|e| io_err(&wdir, e))?;
                let p = wdir.join(format!(
                    "{}_{}_{}.witness.json",
                    sanitize(&c.row.instance),
                    c.row.hierarchy,
                    c.row.method
                ));
                write_json(w, &p).map_err(|e| io_err(&p, e))?;
                rep.witness_file = Some(p.to_string_lossy().into_owned());
            }
            reports.push(rep);
        }
        let rows: Vec<_> = cells.iter().map(|c| c.row.clone()).collect();
        let csv_path = a.out_dir.join(format!("{suite}.csv"));
        write_csv(&rows, &csv_path).map_err(|e| io_err(&csv_path, e))?;
        let json_path = a.out_dir.join(format!("{suite}.json"));
        let doc = json!({"schema": report::SCHEMA, "suite": suite, "rows": rows, "reports": reports});
        write_json(&doc, &json_path).map_err(|e| io_err(&json_path, e))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn run_verify(a: &VerifyArgs) -> Result<ExitCode, Failure> {
    let spec = parse_state(&a.state)?;
    let file = read_witness(&a.witness).map_err(|e| io_err(&a.witness, e))?;
    let h = Hierarchy::from(a.hierarchy);
    if file.hierarchy != h || file.k != a.k {
        return Err(Failure::Input(format!(
            "witness is for {} k={}, not {h} k={}",
            file.hierarchy, file.k, a.k
        )));
    }
    let rho = spec.build()?;
    let v = verify_witness(&file, &rho)?;
    println!("{}", serde_json::to_string_pretty(&v).expect("verify report serializes"));
    Ok(if v.passes { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Detect(a) => run_detect(a),
        Command::Bench(a) => run_bench(a),
        Command::Verify(a) => run_verify(a),
    };
    match res {
        Ok(code) => code,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(m)) => {
            eprintln!("solver failure: {m}");
            ExitCode::from(3)
        }
    }
}
