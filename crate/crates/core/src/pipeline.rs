//! End-to-end runs: structure checks, certificate vector, rate constant,
//! simulation and verification, as used by the command-line tool.

use serde::{Deserialize, Serialize};

use crate::certificate::{certify, Certificate, CertificateError};
use crate::checks::{
    check_structure, find_certificate_vector, validate_certificate_vector, CertificateVector, CheckReport, SearchError,
};
use crate::config::{DEFAULT_SAMPLES, DEFAULT_SEARCH_BUDGET};
use crate::model::{builtin_example, BuiltinId, InitialCondition, SystemSpec};
use crate::solver::{solve, SolveError, SolverConfig};
use crate::trajectory::{SolverWarning, Trajectory};
use crate::verify::{
    detect_nonconvergence, verify_envelope, verify_norm_bound, verify_positivity, VerificationReport, VerifyError,
    DEFAULT_WINDOW, ENVELOPE_TOL, NORM_BOUND_TOL, POSITIVITY_TOL,
};

/// Tries `candidate` first and searches only if it is not feasible.
pub fn choose_vector(
    system: &SystemSpec,
    candidate: Option<&[f64]>,
    budget: usize,
    seed: u64,
) -> Result<CertificateVector, SearchError> {
    if let Some(v) = candidate {
        if let Ok(found) = validate_certificate_vector(system, v) {
            return Ok(found);
        }
    }
    find_certificate_vector(system, budget, seed)
}

/// A solve that keeps the partial trajectory when the state blows up.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub trajectory: Trajectory,
    pub diverged_at: Option<f64>,
}

pub fn simulate(system: &SystemSpec, phi: &InitialCondition, config: &SolverConfig) -> Result<Simulation, SolveError> {
    match solve(system, phi, config) {
        Ok(trajectory) => Ok(Simulation { trajectory, diverged_at: None }),
        Err(SolveError::Diverged { t, partial }) => Ok(Simulation { trajectory: *partial, diverged_at: Some(t) }),
        Err(e) => Err(e),
    }
}

/// Positivity, norm bound at `cert.v`, envelope and convergence.
pub fn verify_all(traj: &Trajectory, cert: &Certificate) -> Result<Vec<VerificationReport>, VerifyError> {
    Ok(vec![
        verify_positivity(traj, POSITIVITY_TOL),
        verify_norm_bound(traj, &cert.v, NORM_BOUND_TOL)?,
        verify_envelope(traj, cert, ENVELOPE_TOL)?,
        detect_nonconvergence(traj, DEFAULT_WINDOW)?,
    ])
}

/// What a reference history is expected to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    /// Certificate issued and every check passes.
    Stable,
    /// Outside the local certificate's domain and visibly not converging.
    NonConvergent,
}

pub fn expectation(id: BuiltinId, phi_index: usize) -> Expectation {
    match (id, phi_index) {
        (BuiltinId::Example1, 1) => Expectation::NonConvergent,
        _ => Expectation::Stable,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CertificateOutcome {
    Issued,
    Refused { reason: String },
}

/// Everything recorded for one reference history.
#[derive(Debug, Clone, Serialize)]
pub struct PhiReport {
    pub example: String,
    pub phi_index: usize,
    pub phi_0: Vec<f64>,
    pub v: Vec<f64>,
    pub phi_norm: f64,
    pub step: f64,
    pub horizon: f64,
    pub diverged_at: Option<f64>,
    pub warnings: Vec<SolverWarning>,
    pub certificate: CertificateOutcome,
    pub checks: Vec<VerificationReport>,
    pub expected: Expectation,
    pub as_expected: bool,
}

#[derive(Debug, Clone)]
pub struct PhiRun {
    pub simulation: Simulation,
    pub certificate: Option<Certificate>,
    pub report: PhiReport,
}

#[derive(Debug, Clone)]
pub struct ExampleRun {
    pub id: BuiltinId,
    pub checks: Vec<CheckReport>,
    pub vector: CertificateVector,
    pub runs: Vec<PhiRun>,
}

impl ExampleRun {
    pub fn as_expected(&self) -> bool {
        self.checks.iter().all(CheckReport::passed) && self.runs.iter().all(|r| r.report.as_expected)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
}

fn run_phi(
    id: BuiltinId,
    index: usize,
    system: &SystemSpec,
    vector: &CertificateVector,
    phi: &InitialCondition,
    solver: &SolverConfig,
) -> Result<PhiRun, PipelineError> {
    let simulation = simulate(system, phi, solver)?;
    let traj = &simulation.trajectory;
    let phi_norm = phi.weighted_norm(&vector.v, system.r(), solver.step).map_err(VerifyError::from)?;
    let certificate = match certify(system, vector, phi_norm) {
        Ok(c) => Ok(c),
        Err(e @ CertificateError::ScopeViolation(_)) => Err(e.to_string()),
        Err(e) => return Err(e.into()),
    };
    let mut checks = vec![
        verify_positivity(traj, POSITIVITY_TOL),
        verify_norm_bound(traj, &vector.v, NORM_BOUND_TOL)?,
    ];
    if let Ok(cert) = &certificate {
        checks.push(verify_envelope(traj, cert, ENVELOPE_TOL)?);
    }
    checks.push(detect_nonconvergence(traj, DEFAULT_WINDOW)?);

    let expected = expectation(id, index);
    let converged = checks.last().is_some_and(|r| r.pass);
    let as_expected = match expected {
        Expectation::Stable => certificate.is_ok() && simulation.diverged_at.is_none() && checks.iter().all(|r| r.pass),
        Expectation::NonConvergent => certificate.is_err() && !converged,
    };
    let report = PhiReport {
        example: id.to_string(),
        phi_index: index,
        phi_0: phi.eval(0.0),
        v: vector.v.clone(),
        phi_norm,
        step: solver.step,
        horizon: solver.horizon,
        diverged_at: simulation.diverged_at,
        warnings: traj.warnings().to_vec(),
        certificate: match &certificate {
            Ok(_) => CertificateOutcome::Issued,
            Err(reason) => CertificateOutcome::Refused { reason: reason.clone() },
        },
        checks,
        expected,
        as_expected,
    };
    Ok(PhiRun { simulation, certificate: certificate.ok(), report })
}

/// Runs every reference history of a built-in example, in parallel.
pub fn run_example(id: BuiltinId, solver: &SolverConfig, seed: u64) -> Result<ExampleRun, PipelineError> {
    let ex = builtin_example(id);
    let checks = check_structure(&ex.system, DEFAULT_SAMPLES, seed);
    let vector = choose_vector(&ex.system, Some(&ex.suggested_v), DEFAULT_SEARCH_BUDGET, seed)?;
    let results: Vec<Result<PhiRun, PipelineError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = ex
            .phis
            .iter()
            .enumerate()
            .map(|(index, phi)| {
                let (system, vector) = (&ex.system, &vector);
                scope.spawn(move || run_phi(id, index, system, vector, phi, solver))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(ExampleRun { id, checks, vector, runs })
}
