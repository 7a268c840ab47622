//! `plaque-fsi` command line: run, mms, diagnose, check-compat.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;

use plaque_fsi::diagnostics::{self, DiagnosticReport};
use plaque_fsi::driver::{nonnegativity_audit, Problem};
use plaque_fsi::grid::{check_compatibility, Side};
use plaque_fsi::io::{self, Manifest, RunConfig};
use plaque_fsi::linear::{HeatOperator, OuterBoundary, StokesOperator};
use plaque_fsi::mms::{self, Suite};
use plaque_fsi::spaces::multiplication_constant;
use plaque_fsi::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

/// Threshold of the nonnegativity audit, relative to `‖c⁰‖_∞`.
const NONNEG_RTOL: f64 = 1e-10;

#[derive(Parser)]
#[command(name = "plaque-fsi", version, about = "Growing-plaque FSI solver")]
struct Cli {
    /// Worker threads for independent sweep entries.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the coupled problem and write trajectory, reports and manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write the linear operators in MatrixMarket format.
        #[arg(long)]
        dump_matrices: bool,
    },
    /// Manufactured-solution convergence table (`all` runs every suite).
    Mms {
        suite: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Add the backward-Euler temporal order where it applies.
        #[arg(long)]
        temporal: bool,
    },
    /// Property report as JSON.
    Diagnose {
        what: What,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the compatibility conditions of the initial data.
    CheckCompat {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum What {
    Contraction,
    Extension,
    Kinematics,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Geometry(_) | Error::Parse(_) | Error::Compatibility(_) => EXIT_CONFIG,
        _ => EXIT_SOLVER,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("thread pool is set once");
    }
    let res = match cli.cmd {
        Cmd::Run { config, out, dump_matrices } => run(&config, &out, dump_matrices),
        Cmd::Mms { suite, out, temporal } => run_mms(&suite, out.as_deref(), temporal),
        Cmd::Diagnose { what, config, out } => diagnose(what, config.as_deref(), out.as_deref()),
        Cmd::CheckCompat { config } => check_compat(&config),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load(path: Option<&Path>) -> plaque_fsi::Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => RunConfig::preset("zero"),
    }
}

fn run(config: &Path, out: &Path, dump_matrices: bool) -> plaque_fsi::Result<u8> {
    let cfg = RunConfig::load(config)?;
    let hash = cfg.hash();
    let d = cfg.domain()?;
    let w0 = cfg.initial_data(&d)?;
    let m_q = cfg.numerics.m_q.unwrap_or_else(|| multiplication_constant(&d, cfg.numerics.norm.q, 16, 0));
    let problem = Problem { d: &d, params: &cfg.params, cfg: &cfg.numerics, m_q };
    let mut manifest = Manifest::new("run", &hash, &d);

    if dump_matrices {
        let dt = cfg.numerics.dt;
        let mats = [
            ("stokes.mtx", StokesOperator::new(&d, &cfg.params, dt, OuterBoundary::Traction)?.matrix_market()),
            ("heat_fluid.mtx", HeatOperator::new(&d, Side::Fluid, &cfg.params, dt)?.matrix_market()),
            ("heat_solid.mtx", HeatOperator::new(&d, Side::Solid, &cfg.params, dt)?.matrix_market()),
        ];
        for (name, text) in mats {
            let (head, rest) = text.split_once('\n').expect("MatrixMarket header line");
            std::fs::write(io::out_file(out, name)?, format!("{head}\n% config_sha256={hash}\n{rest}"))?;
            manifest.files.push(name.into());
        }
    }

    info!("running to t = {} with m_q = {m_q}", cfg.numerics.t_final);
    let traj = problem.run_continuation(&w0, cfg.numerics.t_final)?;

    if cfg.output.trajectory {
        let f = File::create(io::out_file(out, "trajectory.csv")?)?;
        io::write_trajectory_csv(BufWriter::new(f), &d, &traj, cfg.output.every, &hash)?;
        manifest.files.push("trajectory.csv".into());
    }
    io::write_json(&io::out_file(out, "reports.json")?, &io::with_hash(&hash, &json!({ "windows": traj.reports }))?)?;
    manifest.files.push("reports.json".into());

    let c: Vec<_> = traj.levels.iter().map(|l| l.c.clone()).collect();
    let nonneg = nonnegativity_audit(&c, NONNEG_RTOL);
    io::write_json(&io::out_file(out, "nonnegativity.json")?, &io::with_hash(&hash, &nonneg)?)?;
    manifest.files.push("nonnegativity.json".into());
    if !nonneg.pass() {
        log::warn!("concentration dipped below {:e} at {} levels", nonneg.threshold, nonneg.flagged.len());
    }

    manifest.files.push("manifest.json".into());
    io::write_json(&io::out_file(out, "manifest.json")?, &manifest)?;
    let iters: usize = traj.reports.iter().map(|r| r.iterates).sum();
    println!("ok: {} windows, {iters} Picard iterations, t = {}", traj.reports.len(), traj.last().t);
    Ok(0)
}

fn run_mms(suite: &str, out: Option<&Path>, temporal: bool) -> plaque_fsi::Result<u8> {
    let suites: Vec<Suite> = if suite == "all" { Suite::ALL.to_vec() } else { vec![suite.parse()?] };
    let mut csv = String::new();
    for s in suites {
        let mut tables = mms::run_suite(s, &mms::LEVELS)?;
        if temporal && s != Suite::Elliptic {
            tables.push(mms::temporal_order(s, 16, &[8, 16, 32], 0.5)?);
        }
        for t in tables {
            let body = t.to_csv();
            if csv.is_empty() {
                csv.push_str(&body);
            } else {
                csv.push_str(body.split_once('\n').map(|x| x.1).unwrap_or(""));
            }
            eprintln!("{} {}: order {:.3}", t.suite, t.quantity, t.order);
        }
    }
    match out {
        Some(dir) => std::fs::write(io::out_file(dir, &format!("mms_{suite}.csv"))?, csv)?,
        None => print!("{csv}"),
    }
    Ok(0)
}

fn diagnose(what: What, config: Option<&Path>, out: Option<&Path>) -> plaque_fsi::Result<u8> {
    let cfg = load(config)?;
    let hash = cfg.hash();
    let rep: DiagnosticReport = match what {
        What::Contraction => {
            let d = cfg.domain()?;
            diagnostics::contraction_diagnose(&d, &cfg.params, &cfg.numerics.norm, 3, 0)?
        }
        What::Extension => diagnostics::extension_diagnose(64, 0.05, 5, 0)?,
        What::Kinematics => diagnostics::kinematics_diagnose(cfg.numerics.norm.q)?,
    };
    let mut doc = io::with_hash(&hash, &rep)?;
    doc["pass"] = rep.pass().into();
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Parse(e.to_string()))?;
    match out {
        Some(dir) => std::fs::write(io::out_file(dir, &format!("diagnose_{}.json", rep.what))?, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(0)
}

fn check_compat(config: &Path) -> plaque_fsi::Result<u8> {
    let cfg = RunConfig::load(config)?;
    let d = cfg.domain()?;
    let w0 = cfg.initial_data(&d)?;
    let scale = 1.0f64.max(w0.v0.max_abs()).max(w0.c0.max_abs());
    let rep = check_compatibility(&d, &w0, &cfg.params, cfg.numerics.compat_rtol * scale)?;
    let doc = io::with_hash(&cfg.hash(), &rep)?;
    println!("{}", serde_json::to_string_pretty(&doc).map_err(|e| Error::Parse(e.to_string()))?);
    Ok(if rep.pass() { 0 } else { EXIT_CONFIG })
}
