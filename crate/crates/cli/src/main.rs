//! `mlstab`: simulate multi-order fractional delay systems, compute
//! Mittag-Leffler decay certificates and check trajectories against them.

mod output;
mod plot;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use mlstab::certificate::{certify, scope_of, Certificate, CertificateError, Scope};
use mlstab::checks::{check_structure, CertificateVector, CheckReport};
use mlstab::config::{ConfigError, Resolved, RunConfig, DEFAULT_SAMPLES, DEFAULT_SEARCH_BUDGET, DEFAULT_SEED};
use mlstab::model::BuiltinId;
use mlstab::pipeline::{choose_vector, run_example, simulate, verify_all, ExampleRun};
use mlstab::solver::SolverConfig;
use mlstab::trajectory::Trajectory;
use mlstab::verify::{VerificationReport, VerifyError};

use output::{write_atomic, write_json};

const EXIT_IO: u8 = 1;
const EXIT_FAILED: u8 = 2;
const EXIT_ASSUMPTIONS: u8 = 3;
const EXIT_NO_VECTOR: u8 = 4;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;
const EXIT_NO_INPUT: u8 = 66;
const EXIT_SOFTWARE: u8 = 70;

#[derive(Parser)]
#[command(name = "mlstab", version, about = "Mittag-Leffler stability of multi-order fractional delay systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in example end to end.
    Example {
        /// example1 or example2
        id: String,
        /// Output directory (default: ./<id>)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        #[arg(long, default_value_t = 20.0)]
        horizon: f64,
    },
    /// Solve a configured system and write traj.csv.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Also write plot.svg.
        #[arg(long)]
        plot: bool,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Check the assumptions and compute a decay certificate.
    Certify {
        #[arg(long)]
        config: PathBuf,
        /// History norm ||phi||_v to certify for (defaults to the config's phi).
        #[arg(long)]
        phi_norm: Option<f64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Check a trajectory against a certificate.
    Verify {
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        cert: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl std::fmt::Display) -> Self {
        Self { code, message: message.to_string() }
    }
}

fn io_failure(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::new(EXIT_IO, format!("{}: {e}", path.display()))
}

fn config_failure(e: ConfigError) -> Failure {
    match e {
        ConfigError::Io { .. } => Failure::new(EXIT_NO_INPUT, e),
        _ => Failure::new(EXIT_DATA, e),
    }
}

/// `MLSTAB_SEED` wins over the config's seed.
fn seed(config_seed: u64) -> Result<u64, Failure> {
    match std::env::var("MLSTAB_SEED") {
        Ok(s) => s.trim().parse().map_err(|_| Failure::new(EXIT_USAGE, format!("MLSTAB_SEED is not an unsigned integer: {s:?}"))),
        Err(_) => Ok(config_seed),
    }
}

fn load(path: &Path) -> Result<Resolved, Failure> {
    let cfg = RunConfig::from_path(path).map_err(config_failure)?;
    let mut resolved = cfg.resolve().map_err(config_failure)?;
    resolved.seed = seed(resolved.seed)?;
    Ok(resolved)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Example { id, out, step, horizon } => cmd_example(&id, out, step, horizon),
        Command::Simulate { config, plot, out } => cmd_simulate(&config, plot, &out),
        Command::Certify { config, phi_norm, out } => cmd_certify(&config, phi_norm, &out),
        Command::Verify { traj, cert, out } => cmd_verify(&traj, &cert, &out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("mlstab: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[derive(Serialize)]
struct ChecksFile<'a> {
    seed: u64,
    checks: &'a [CheckReport],
    certificate_vector: Option<&'a CertificateVector>,
    #[serde(skip_serializing_if = "Option::is_none")]
    search_error: Option<String>,
}

fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), Failure> {
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).map_err(io_failure(path))?;
    write_atomic(path, &buf).map_err(io_failure(path))
}

fn write_plot(path: &Path, title: &str, traj: &Trajectory, cert: Option<&Certificate>) -> Result<(), Failure> {
    let svg = plot::render(title, traj, cert).map_err(|e| Failure::new(EXIT_SOFTWARE, e))?;
    write_atomic(path, svg.as_bytes()).map_err(io_failure(path))
}

fn cmd_example(id: &str, out: Option<PathBuf>, step: f64, horizon: f64) -> Result<u8, Failure> {
    let builtin: BuiltinId = id.parse().map_err(|e| Failure::new(EXIT_USAGE, e))?;
    let out = out.unwrap_or_else(|| PathBuf::from(id));
    let solver = SolverConfig::new(step, horizon);
    solver.validate(1.0, true).map_err(|e| Failure::new(EXIT_USAGE, e))?;
    let seed = seed(DEFAULT_SEED)?;
    let run = run_example(builtin, &solver, seed).map_err(|e| Failure::new(EXIT_SOFTWARE, e))?;
    write_example(&run, &out, seed)?;

    for r in &run.runs {
        let rep = &r.report;
        let checks: Vec<String> =
            rep.checks.iter().map(|c| format!("{}={}", serde_json::to_value(c.check).unwrap().as_str().unwrap(), if c.pass { "pass" } else { "fail" })).collect();
        println!(
            "{} phi_{} ({:?}): {} [{}] expected {:?}: {}",
            run.id,
            rep.phi_index + 1,
            rep.phi_0,
            match &r.certificate {
                Some(c) => format!("c = {:.6e}, nu = {:.6}", c.c, c.nu),
                None => "no certificate".to_string(),
            },
            checks.join(" "),
            rep.expected,
            if rep.as_expected { "ok" } else { "MISMATCH" }
        );
    }
    if run.as_expected() {
        Ok(0)
    } else {
        eprintln!("mlstab: {id}: results differ from the expected verdicts");
        Ok(EXIT_FAILED)
    }
}

fn write_example(run: &ExampleRun, out: &Path, seed: u64) -> Result<(), Failure> {
    let checks_path = out.join("checks.json");
    let file = ChecksFile { seed, checks: &run.checks, certificate_vector: Some(&run.vector), search_error: None };
    write_json(&checks_path, &file).map_err(io_failure(&checks_path))?;
    for r in &run.runs {
        let dir = out.join(format!("phi_{}", r.report.phi_index + 1));
        write_trajectory(&dir.join("traj.csv"), &r.simulation.trajectory)?;
        let cert_path = dir.join("certificate.json");
        match &r.certificate {
            Some(cert) => write_json(&cert_path, cert).map_err(io_failure(&cert_path))?,
            None => {
                // a stale certificate from an earlier run must not survive
                if cert_path.exists() {
                    std::fs::remove_file(&cert_path).map_err(io_failure(&cert_path))?;
                }
            }
        }
        let report_path = dir.join("report.json");
        write_json(&report_path, &r.report).map_err(io_failure(&report_path))?;
        let title = format!("{} with phi = {:?}", run.id, r.report.phi_0);
        write_plot(&dir.join("plot.svg"), &title, &r.simulation.trajectory, r.certificate.as_ref())?;
    }
    Ok(())
}

fn cmd_simulate(config: &Path, plot: bool, out: &Path) -> Result<u8, Failure> {
    let resolved = load(config)?;
    let phi = resolved.phi.as_ref().ok_or_else(|| Failure::new(EXIT_DATA, ConfigError::MissingPhi))?;
    let sim = simulate(&resolved.system, phi, &resolved.solver).map_err(|e| Failure::new(EXIT_DATA, e))?;
    let traj_path = out.join("traj.csv");
    write_trajectory(&traj_path, &sim.trajectory)?;
    if plot {
        write_plot(&out.join("plot.svg"), "simulation", &sim.trajectory, None)?;
    }
    println!("wrote {} ({} grid points)", traj_path.display(), sim.trajectory.len());
    match sim.diverged_at {
        Some(t) => {
            eprintln!("mlstab: solution diverged at t = {t}; partial trajectory written");
            Ok(EXIT_FAILED)
        }
        None => Ok(0),
    }
}

fn cmd_certify(config: &Path, phi_norm: Option<f64>, out: &Path) -> Result<u8, Failure> {
    let resolved = load(config)?;
    let system = &resolved.system;
    let checks = check_structure(system, DEFAULT_SAMPLES, resolved.seed);
    let checks_path = out.join("checks.json");
    let write_checks = |vector: Option<&CertificateVector>, search_error: Option<String>| {
        let file = ChecksFile { seed: resolved.seed, checks: &checks, certificate_vector: vector, search_error };
        write_json(&checks_path, &file).map_err(io_failure(&checks_path))
    };
    if !checks.iter().all(CheckReport::passed) {
        write_checks(None, None)?;
        for c in checks.iter().filter(|c| !c.passed()) {
            eprintln!("mlstab: assumption {:?} not confirmed for {}: {:?}", c.assumption, c.subject, c.verdict);
        }
        return Ok(EXIT_ASSUMPTIONS);
    }
    let vector = match choose_vector(system, resolved.candidate_v.as_deref(), DEFAULT_SEARCH_BUDGET, resolved.seed) {
        Ok(v) => v,
        Err(e) => {
            write_checks(None, Some(e.to_string()))?;
            eprintln!("mlstab: {e}");
            return Ok(EXIT_NO_VECTOR);
        }
    };
    write_checks(Some(&vector), None)?;

    let norm = match (phi_norm, &resolved.phi) {
        (Some(x), _) => x,
        (None, Some(phi)) => phi
            .weighted_norm(&vector.v, system.r(), resolved.solver.step)
            .map_err(|e| Failure::new(EXIT_DATA, e))?,
        // the envelope then scales linearly with ‖φ‖_v
        (None, None) if scope_of(system) == Scope::Global => 1.0,
        (None, None) => {
            eprintln!("mlstab: local certificate needs a history: give --phi-norm or \"phi\" in the config");
            return Ok(EXIT_ASSUMPTIONS);
        }
    };
    let cert = match certify(system, &vector, norm) {
        Ok(c) => c,
        Err(e @ CertificateError::ScopeViolation(_)) => {
            eprintln!("mlstab: {e}");
            return Ok(EXIT_ASSUMPTIONS);
        }
        Err(e @ CertificateError::BadPhiNorm(_)) => return Err(Failure::new(EXIT_USAGE, e)),
        Err(e @ CertificateError::Infeasible { .. }) => {
            eprintln!("mlstab: {e}");
            return Ok(EXIT_NO_VECTOR);
        }
        Err(e) => return Err(Failure::new(EXIT_SOFTWARE, e)),
    };
    let cert_path = out.join("certificate.json");
    write_json(&cert_path, &cert).map_err(io_failure(&cert_path))?;
    println!(
        "{} certificate: beta = {}, c = {:.6e}, nu = {:.6}, v = {:?}",
        serde_json::to_value(cert.scope).unwrap().as_str().unwrap(),
        cert.beta,
        cert.c,
        cert.nu,
        cert.v
    );
    Ok(0)
}

#[derive(Serialize)]
struct VerifyFile {
    pass: bool,
    checks: Vec<VerificationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn cmd_verify(traj_path: &Path, cert_path: &Path, out: &Path) -> Result<u8, Failure> {
    let open = |p: &Path| File::open(p).map_err(|e| Failure::new(EXIT_NO_INPUT, format!("{}: {e}", p.display())));
    let traj = Trajectory::read_csv(BufReader::new(open(traj_path)?))
        .map_err(|e| Failure::new(EXIT_DATA, format!("{}: {e}", traj_path.display())))?;
    let cert: Certificate = serde_json::from_reader(BufReader::new(open(cert_path)?))
        .map_err(|e| Failure::new(EXIT_DATA, format!("{}: {e}", cert_path.display())))?;
    if cert.v.len() != traj.dim() || cert.v.iter().any(|&x| !(x > 0.0)) {
        return Err(Failure::new(
            EXIT_DATA,
            format!("certificate has dimension {} but the trajectory has {}", cert.v.len(), traj.dim()),
        ));
    }
    let report_path = out.join("report.json");
    let file = match verify_all(&traj, &cert) {
        Ok(checks) => VerifyFile { pass: checks.iter().all(|c| c.pass), checks, error: None },
        Err(e @ (VerifyError::Scope(_) | VerifyError::PhiNormExceedsCertificate { .. })) => {
            VerifyFile { pass: false, checks: vec![], error: Some(e.to_string()) }
        }
        Err(e) => return Err(Failure::new(EXIT_DATA, e)),
    };
    write_json(&report_path, &file).map_err(io_failure(&report_path))?;
    for c in &file.checks {
        println!(
            "{}: {} (worst {:.3e} at t = {})",
            serde_json::to_value(c.check).unwrap().as_str().unwrap(),
            if c.pass { "pass" } else { "FAIL" },
            c.worst_violation,
            c.at_t
        );
    }
    if let Some(e) = &file.error {
        eprintln!("mlstab: {e}");
    }
    Ok(if file.pass { 0 } else { EXIT_FAILED })
}
