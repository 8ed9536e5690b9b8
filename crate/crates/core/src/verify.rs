//! Checks of simulated trajectories against positivity, the weighted-norm
//! bound and the Mittag-Leffler envelope, plus a non-convergence heuristic.
//!
//! All tolerances are absolute: trajectories decay towards zero, where
//! relative tolerances stop meaning anything.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certificate::{Certificate, Scope};
use crate::model::{weighted_norm, ModelError};
use crate::special::SpecialError;
use crate::trajectory::Trajectory;

pub const POSITIVITY_TOL: f64 = 1e-6;
pub const NORM_BOUND_TOL: f64 = 1e-6;
pub const ENVELOPE_TOL: f64 = 1e-4;
pub const DEFAULT_WINDOW: f64 = 0.25;
/// Required decay factor of `‖w‖_∞` over the run.
pub const DECAY_FACTOR: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Positivity,
    NormBound,
    Envelope,
    Convergence,
}

/// The first point where a check exceeded its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t: f64,
    pub component: usize,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: Check,
    pub pass: bool,
    /// Largest excess over the bound (negative when every point is inside).
    pub worst_violation: f64,
    pub at_t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_violation: Option<Violation>,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("local certificate applied to a history with ||phi||_v = {0} >= 1")]
    Scope(f64),
    #[error("history norm {traj} exceeds the norm {cert} the certificate was computed for")]
    PhiNormExceedsCertificate { traj: f64, cert: f64 },
    #[error("window fraction must lie in (0, 1), got {0}")]
    BadWindow(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Special(#[from] SpecialError),
}

/// Tracks the worst excess and the first excess beyond tolerance.
struct Tally {
    worst: f64,
    at_t: f64,
    first: Option<Violation>,
    tol: f64,
}

impl Tally {
    fn new(tol: f64) -> Self {
        Self { worst: f64::NEG_INFINITY, at_t: 0.0, first: None, tol }
    }

    fn record(&mut self, t: f64, component: usize, excess: f64) {
        // NaN counts as an unbounded violation.
        let excess = if excess.is_nan() { f64::INFINITY } else { excess };
        if excess > self.worst {
            self.worst = excess;
            self.at_t = t;
        }
        if excess > self.tol && self.first.is_none() {
            self.first = Some(Violation { t, component, amount: excess });
        }
    }

    fn finish(self, check: Check, detail: Option<String>) -> VerificationReport {
        VerificationReport {
            check,
            pass: self.first.is_none(),
            worst_violation: self.worst,
            at_t: self.at_t,
            first_violation: self.first,
            tolerance: self.tol,
            detail,
        }
    }
}

/// Every stored component must be `≥ −tol`.
pub fn verify_positivity(traj: &Trajectory, tol: f64) -> VerificationReport {
    let mut tally = Tally::new(tol);
    for (t, w) in traj.states() {
        for (i, &x) in w.iter().enumerate() {
            tally.record(t, i, -x);
        }
    }
    tally.finish(Check::Positivity, None)
}

/// `‖φ‖_v` over the trajectory's history sampling grid.
pub fn history_norm(traj: &Trajectory, v: &[f64]) -> Result<f64, ModelError> {
    traj.phi().weighted_norm(v, traj.r(), traj.step())
}

/// `‖w(t)‖_v ≤ ‖φ‖_v + tol` at every grid time.
pub fn verify_norm_bound(traj: &Trajectory, v: &[f64], tol: f64) -> Result<VerificationReport, VerifyError> {
    let bound = history_norm(traj, v)?;
    let mut tally = Tally::new(tol);
    for (t, w) in traj.states() {
        let n = weighted_norm(w, v)?;
        let worst_component = w
            .iter()
            .zip(v)
            .enumerate()
            .max_by(|a, b| (a.1 .0.abs() / a.1 .1).total_cmp(&(b.1 .0.abs() / b.1 .1)))
            .map_or(0, |(i, _)| i);
        tally.record(t, worst_component, n - bound);
    }
    Ok(tally.finish(Check::NormBound, Some(format!("||phi||_v = {bound}"))))
}

/// `wᵢ(t) ≤ ν vᵢ E_β(−c t^β) + tol` at every grid time.
pub fn verify_envelope(traj: &Trajectory, cert: &Certificate, tol: f64) -> Result<VerificationReport, VerifyError> {
    if traj.dim() != cert.dim() {
        return Err(ModelError::DimensionMismatch { expected: cert.dim(), got: traj.dim() }.into());
    }
    let phi_norm = history_norm(traj, &cert.v)?;
    if cert.scope == Scope::Local && phi_norm >= 1.0 {
        return Err(VerifyError::Scope(phi_norm));
    }
    if phi_norm > cert.phi_norm * (1.0 + 1e-12) {
        return Err(VerifyError::PhiNormExceedsCertificate { traj: phi_norm, cert: cert.phi_norm });
    }
    let mut tally = Tally::new(tol);
    for (t, w) in traj.states() {
        let e = cert.decay(t)?;
        for (i, (&x, &vi)) in w.iter().zip(&cert.v).enumerate() {
            tally.record(t, i, x - cert.nu * vi * e);
        }
    }
    Ok(tally.finish(Check::Envelope, None))
}

/// Flags runs that show no `100×` decay of `‖w‖_∞` within the trailing
/// `window` fraction of the simulated time *and* are not still decreasing
/// across that window. `pass` means convergent.
///
/// Slow algebraic decay `t^{−β}` may need far longer than any practical
/// horizon to reach the factor 100, so a run that keeps shrinking over the
/// window counts as convergent. Runs cut short by divergence grow over
/// their own window and are flagged.
pub fn detect_nonconvergence(traj: &Trajectory, window: f64) -> Result<VerificationReport, VerifyError> {
    if !(window > 0.0 && window < 1.0) {
        return Err(VerifyError::BadWindow(window));
    }
    let sup = |w: &[f64]| w.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let n = traj.len();
    let initial = sup(traj.state(0));
    let threshold = DECAY_FACTOR * initial;
    let last = traj.last_time();
    let start_t = last * (1.0 - window);
    let start = ((start_t / traj.step()).floor() as usize).min(n - 1);

    let (mut min_norm, mut at_t) = (f64::INFINITY, traj.time(start));
    for k in start..n {
        let m = sup(traj.state(k));
        if m < min_norm || m.is_nan() {
            min_norm = m;
            at_t = traj.time(k);
        }
    }
    let start_norm = sup(traj.state(start));
    let end_norm = sup(traj.state(n - 1));
    let decayed = min_norm <= threshold;
    let still_decreasing = end_norm < start_norm;
    let pass = decayed || still_decreasing;
    let first_violation = (!pass).then(|| Violation { t: at_t, component: 0, amount: min_norm - threshold });
    Ok(VerificationReport {
        check: Check::Convergence,
        pass,
        worst_violation: min_norm - threshold,
        at_t,
        first_violation,
        tolerance: 0.0,
        detail: Some(format!(
            "window [{start_t}, {last}]: min ||w||_inf = {min_norm:e}, threshold {threshold:e}, start {start_norm:e}, end {end_norm:e}"
        )),
    })
}
