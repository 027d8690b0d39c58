//! `swipt`: batch front-end for the rate-energy solvers.
//!
//! Exit codes: 0 success, 1 oracle deviation above tolerance, 2 bad
//! configuration, 3 solver failure (artifacts still written and flagged).

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use swipt_core::region::{
    oracle_sweep, scheme_q_max, solve_point_with_tol, sweep_region_with_tol, write_regions_csv, write_regions_json, Case,
    OracleResolution, ORACLE_MAX_STATES,
};
use swipt_core::{FadingEnsemble, NonlinearEhParams, RERegion, Scheme, SystemParams};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "swipt", version, about = "Rate-energy regions of power-splitting SWIPT receivers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep rate-energy regions and write one CSV/JSON pair per case and SNR.
    Region(Common),
    /// Solve every selected scheme at one energy threshold; prints JSON.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Energy threshold in J.
        #[arg(long, conflicts_with = "q_frac")]
        q: Option<f64>,
        /// Energy threshold as a fraction of the scheme's maximum.
        #[arg(long)]
        q_frac: Option<f64>,
    },
    /// Compare the optimal solvers with the brute-force oracle.
    OracleCheck(Common),
    /// Print the largest reachable energy of every selected scheme as CSV.
    Qmax(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment file; built-in defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "SWIPT_OUT_DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated scheme labels.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    #[arg(long, value_parser = ["csir", "csi"])]
    case: Option<String>,
    #[arg(long)]
    n_states: Option<usize>,
    #[arg(long)]
    q_points: Option<usize>,
}

enum Failure {
    Check(String),
    Config(String),
    Solver(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check(_) => 1,
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Check(m) | Failure::Config(m) | Failure::Solver(m) => m,
        }
    }
}

type Outcome = Result<(), Failure>;

/// Resolved run settings.
struct Run {
    cfg: ExperimentConfig,
    config_path: Option<PathBuf>,
    out_dir: PathBuf,
}

impl Common {
    fn resolve(&self) -> Result<Run, Failure> {
        let mut cfg = config::load(self.config.as_deref()).map_err(Failure::Config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(s) = &self.schemes {
            cfg.schemes = s.clone();
        }
        if let Some(c) = &self.case {
            cfg.cases = vec![c.clone()];
        }
        if let Some(n) = self.n_states {
            cfg.n_states = n;
        }
        if let Some(n) = self.q_points {
            cfg.q_points = n;
        }
        cfg.validate().map_err(Failure::Config)?;
        let out_dir = self
            .out
            .clone()
            .or_else(|| cfg.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("swipt-out"));
        Ok(Run {
            cfg,
            config_path: self.config.clone(),
            out_dir,
        })
    }
}

impl Run {
    fn ensemble(&self) -> Result<FadingEnsemble, Failure> {
        self.cfg.ensemble().map_err(Failure::Config)
    }

    fn params(&self, ens: &FadingEnsemble, snr: f64) -> Result<(NonlinearEhParams, SystemParams), Failure> {
        self.cfg.params(ens, snr).map_err(Failure::Config)
    }

    fn create_out_dir(&self) -> Result<(), Failure> {
        std::fs::create_dir_all(&self.out_dir)
            .map_err(|e| Failure::Config(format!("cannot create {}: {e}", self.out_dir.display())))
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, Failure> {
        let path = self.out_dir.join(name);
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|e| Failure::Solver(format!("cannot write {}: {e}", path.display())))
    }
}

fn snr_tag(snr: f64) -> String {
    format!("{snr}").replace('-', "m")
}

#[derive(Serialize)]
struct ManifestEntry {
    file: String,
    case: String,
    snr_db: Option<f64>,
    schemes: Vec<String>,
    points: usize,
    failures: usize,
    status: &'static str,
    seconds: f64,
}

#[derive(Serialize)]
struct EnsembleInfo {
    meta: String,
    n_states: usize,
    mean_gain: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    cli_version: &'static str,
    core_version: &'static str,
    command: &'static str,
    config_path: Option<String>,
    config: &'a ExperimentConfig,
    ensemble: EnsembleInfo,
    outputs: Vec<ManifestEntry>,
    status: &'static str,
    total_seconds: f64,
}

fn write_manifest(run: &Run, command: &'static str, ens: &FadingEnsemble, outputs: Vec<ManifestEntry>, start: Instant) -> Outcome {
    let status = if outputs.iter().all(|o| o.status == "ok") { "ok" } else { "partial" };
    let manifest = Manifest {
        tool: "swipt",
        cli_version: env!("CARGO_PKG_VERSION"),
        core_version: swipt_core::VERSION,
        command,
        config_path: run.config_path.as_ref().map(|p| p.display().to_string()),
        config: &run.cfg,
        ensemble: EnsembleInfo {
            meta: ens.meta.clone(),
            n_states: ens.len(),
            mean_gain: ens.mean_gain(),
        },
        outputs,
        status,
        total_seconds: start.elapsed().as_secs_f64(),
    };
    let mut w = run.create("manifest.json")?;
    serde_json::to_writer_pretty(&mut w, &manifest).map_err(|e| Failure::Solver(e.to_string()))?;
    w.flush().map_err(|e| Failure::Solver(e.to_string()))
}

fn run_region(common: &Common) -> Outcome {
    let start = Instant::now();
    let run = common.resolve()?;
    let ens = run.ensemble()?;
    let set = run.cfg.scheme_set().map_err(Failure::Config)?;
    let mut jobs = Vec::new();
    for &snr in &run.cfg.snr_db {
        let (eh, sys) = run.params(&ens, snr)?;
        jobs.push((snr, eh, sys));
    }
    run.create_out_dir()?;
    let mut outputs = Vec::new();
    let mut errors = Vec::new();
    for (snr, eh, sys) in &jobs {
        for (case, schemes) in &set {
            let t = Instant::now();
            let mut regions: Vec<RERegion> = Vec::new();
            for &scheme in schemes {
                match sweep_region_with_tol(scheme, &ens, run.cfg.q_points, eh, sys, run.cfg.solver.tol) {
                    Ok(r) => {
                        for f in &r.failures {
                            errors.push(format!("{} at {snr} dB, q={:e}: {}", scheme.name(), f.q_target, f.error));
                        }
                        regions.push(r);
                    }
                    Err(e) => errors.push(format!("{} at {snr} dB: {e}", scheme.name())),
                }
            }
            let stem = format!("region_{}_snr{}dB", case.label(), snr_tag(*snr));
            let mut csv = run.create(&format!("{stem}.csv"))?;
            write_regions_csv(&regions, &mut csv).map_err(|e| Failure::Solver(e.to_string()))?;
            let mut json = run.create(&format!("{stem}.json"))?;
            write_regions_json(&regions, &mut json).map_err(|e| Failure::Solver(e.to_string()))?;
            let failed_here = regions.iter().map(|r| r.failures.len()).sum::<usize>() + schemes.len() - regions.len();
            let seconds = t.elapsed().as_secs_f64();
            let points = regions.iter().map(|r| r.points.len()).sum();
            let names: Vec<String> = schemes.iter().map(|s| s.label().to_string()).collect();
            let status = if failed_here == 0 { "ok" } else { "partial" };
            for file in [format!("{stem}.csv"), format!("{stem}.json")] {
                outputs.push(ManifestEntry {
                    file,
                    case: case.label().into(),
                    snr_db: Some(*snr),
                    schemes: names.clone(),
                    points,
                    failures: failed_here,
                    status,
                    seconds,
                });
            }
            eprintln!("{stem}: {points} points, {seconds:.2}s{}", if failed_here > 0 { ", with failures" } else { "" });
        }
    }
    write_manifest(&run, "region", &ens, outputs, start)?;
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Failure::Solver(errors.join("\n")))
    }
}

fn run_solve(common: &Common, q: Option<f64>, q_frac: Option<f64>) -> Outcome {
    let run = common.resolve()?;
    let ens = run.ensemble()?;
    let set = run.cfg.scheme_set().map_err(Failure::Config)?;
    if q.is_none() && q_frac.is_none() {
        return Err(Failure::Config("solve needs --q or --q-frac".into()));
    }
    if let Some(f) = q_frac {
        if !(0.0..=1.0).contains(&f) {
            return Err(Failure::Config(format!("--q-frac must lie in [0, 1], got {f}")));
        }
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for &snr in &run.cfg.snr_db {
        let (eh, sys) = run.params(&ens, snr)?;
        for (case, schemes) in &set {
            for &scheme in schemes {
                let q_max = scheme_q_max(scheme, &ens, &eh, &sys).map_err(|e| Failure::Solver(e.to_string()))?;
                let target = q.unwrap_or_else(|| q_frac.unwrap_or(0.0) * q_max);
                let sol = solve_point_with_tol(scheme, &ens, target, &eh, &sys, None, run.cfg.solver.tol)
                    .map_err(|e| Failure::Solver(format!("{} at {snr} dB: {e}", scheme.name())))?;
                let line = serde_json::json!({
                    "snr_db": snr,
                    "case": case.label(),
                    "scheme": scheme.label(),
                    "q_target": target,
                    "q_max": q_max,
                    "solution": sol,
                });
                writeln!(out, "{line}").map_err(|e| Failure::Solver(e.to_string()))?;
            }
        }
    }
    Ok(())
}

fn run_qmax(common: &Common) -> Outcome {
    let run = common.resolve()?;
    let ens = run.ensemble()?;
    let set = run.cfg.scheme_set().map_err(Failure::Config)?;
    println!("snr_db,case,scheme,q_max");
    for &snr in &run.cfg.snr_db {
        let (eh, sys) = run.params(&ens, snr)?;
        for (case, schemes) in &set {
            for &scheme in schemes {
                let q = scheme_q_max(scheme, &ens, &eh, &sys).map_err(|e| Failure::Solver(e.to_string()))?;
                println!("{snr},{},{},{q:e}", case.label(), scheme.label());
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleRow {
    snr_db: f64,
    case: String,
    q_target: f64,
    solver_rate: f64,
    oracle_rate: f64,
    rel_dev: f64,
}

fn optimal_scheme(case: Case) -> Scheme {
    match case {
        Case::Csir => Scheme::CsirOptimal,
        Case::Csi => Scheme::CsiOptimal,
    }
}

fn run_oracle_check(common: &Common) -> Outcome {
    let start = Instant::now();
    let run = common.resolve()?;
    if run.cfg.n_states > ORACLE_MAX_STATES {
        return Err(Failure::Config(format!(
            "oracle-check accepts at most {ORACLE_MAX_STATES} states, got {}",
            run.cfg.n_states
        )));
    }
    let ens = run.ensemble()?;
    let cases = run.cfg.case_list().map_err(Failure::Config)?;
    let n = run.cfg.q_points;
    let mut rows = Vec::new();
    for &snr in &run.cfg.snr_db {
        let (eh, sys) = run.params(&ens, snr)?;
        for &case in &cases {
            let scheme = optimal_scheme(case);
            let q_max = scheme_q_max(scheme, &ens, &eh, &sys).map_err(|e| Failure::Solver(e.to_string()))?;
            let qs: Vec<f64> = (0..n).map(|k| q_max * k as f64 / n as f64).collect();
            let oracle = oracle_sweep(&ens, &qs, case, &eh, &sys, &OracleResolution::for_case(case))
                .map_err(|e| Failure::Solver(e.to_string()))?;
            for (&q, o) in qs.iter().zip(&oracle) {
                let sol = solve_point_with_tol(scheme, &ens, q, &eh, &sys, None, run.cfg.solver.tol)
                    .map_err(|e| Failure::Solver(format!("{} at {snr} dB, q={q:e}: {e}", scheme.name())))?;
                let rate = sol.point(q).rate;
                let rel_dev = if rate == o.rate { 0.0 } else { (rate - o.rate).abs() / o.rate.abs() };
                rows.push(OracleRow {
                    snr_db: snr,
                    case: case.label().into(),
                    q_target: q,
                    solver_rate: rate,
                    oracle_rate: o.rate,
                    rel_dev,
                });
            }
        }
    }
    run.create_out_dir()?;
    let report = "oracle_check.csv";
    write_report(&run.out_dir.join(report), &rows)?;
    let worst = rows.iter().map(|r| r.rel_dev).fold(0.0, f64::max);
    let pass = worst <= run.cfg.oracle.tol;
    let entry = ManifestEntry {
        file: report.into(),
        case: cases.iter().map(|c| c.label()).collect::<Vec<_>>().join(","),
        snr_db: None,
        schemes: vec!["optimal".into()],
        points: rows.len(),
        failures: rows.iter().filter(|r| r.rel_dev > run.cfg.oracle.tol).count(),
        status: if pass { "ok" } else { "partial" },
        seconds: start.elapsed().as_secs_f64(),
    };
    write_manifest(&run, "oracle-check", &ens, vec![entry], start)?;
    println!("max relative rate deviation {worst:e} (tolerance {:e})", run.cfg.oracle.tol);
    if pass {
        Ok(())
    } else {
        Err(Failure::Check(format!("oracle deviation {worst:e} exceeds {:e}", run.cfg.oracle.tol)))
    }
}

fn write_report(path: &Path, rows: &[OracleRow]) -> Outcome {
    let file = File::create(path).map_err(|e| Failure::Solver(format!("cannot write {}: {e}", path.display())))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r).map_err(|e| Failure::Solver(e.to_string()))?;
    }
    w.flush().map_err(|e| Failure::Solver(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Region(c) => run_region(c),
        Command::Solve { common, q, q_frac } => run_solve(common, *q, *q_frac),
        Command::OracleCheck(c) => run_oracle_check(c),
        Command::Qmax(c) => run_qmax(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
