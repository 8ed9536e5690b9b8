//! Mittag-Leffler decay certificates.
//!
//! Given a certificate vector `v`, the rate `c` is the largest value in
//! `(0, 1)` for which, in every component,
//!
//! ```text
//! fᵢ(v)/vᵢ + Σⱼ gᵢ⁽ʲ⁾(v) / (E_β(−c r^β)^{qⱼ} vᵢ) + ν^{1−p} · c · sup_{t≥1} Iᵢ(t) ≤ 0
//! Iᵢ(t) = t^{β−αᵢ} E_{β,β+1−αᵢ}(−c t^β) / E_β(−c t^β)^p
//! ```
//!
//! with `β = min αᵢ / p` and `ν = ‖φ‖_v / E_β(−c)`. Solutions then satisfy
//! `wᵢ(t) ≤ ν vᵢ E_β(−c t^β)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checks::CertificateVector;
use crate::model::{Orders, SystemSpec};
use crate::special::{gamma, ml1, mittag_leffler, MlQuery, SpecialError};

/// Grid maxima are inflated by this factor before entering the inequality.
pub const SUP_SAFETY: f64 = 1.01;
pub const DEFAULT_RATE_TOL: f64 = 1e-6;
const C_MIN: f64 = 1e-12;
const C_MAX: f64 = 1.0 - 1e-12;
const C_GRID: usize = 48;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertificateError {
    #[error("parameters outside 0 < beta <= alpha <= 1, 0 < c < 1, p >= 1: beta={beta}, alpha={alpha}, c={c}, p={p}")]
    Domain { beta: f64, alpha: f64, c: f64, p: f64 },
    #[error("local certificate needs ||phi||_v < 1, got {0}")]
    ScopeViolation(f64),
    #[error("history norm must be positive and finite, got {0}")]
    BadPhiNorm(f64),
    #[error("no rate constant in (1e-12, 1) satisfies the inequality; worst left side at c = 1e-12 is {worst_lhs:e}")]
    Infeasible { worst_lhs: f64 },
    #[error("certificate vector has dimension {got}, system has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Special(#[from] SpecialError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    /// Valid only for histories with `‖φ‖_v < 1`.
    Local,
    Global,
}

/// Scope is global exactly when every delayed degree equals `p`.
pub fn scope_of(system: &SystemSpec) -> Scope {
    if system.degrees_equal() {
        Scope::Global
    } else {
        Scope::Local
    }
}

pub fn compute_beta(orders: &Orders, p: f64) -> f64 {
    orders.min() / p
}

/// Log-spaced sampling of `t ∈ [lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for LogGrid {
    fn default() -> Self {
        Self { lo: 1.0, hi: 1e8, points: 400 }
    }
}

impl LogGrid {
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.points.max(2);
        let (a, b) = (self.lo.ln(), self.hi.ln());
        (0..n).map(move |k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
    }
}

fn check_domain(beta: f64, alpha: f64, c: f64, p: f64) -> Result<(), CertificateError> {
    // β ≤ α up to rounding in min αᵢ / p
    if beta > 0.0 && beta <= alpha * (1.0 + 1e-15) && alpha <= 1.0 && c > 0.0 && c < 1.0 && p >= 1.0 {
        Ok(())
    } else {
        Err(CertificateError::Domain { beta, alpha, c, p })
    }
}

/// `E_{β,β+1−α}(−c t^β) / E_β(−c t^β)`, which tends to `Γ(1−β)/Γ(1−α)`
/// as `t → ∞` when `β < 1`.
pub fn envelope_ratio(beta: f64, alpha: f64, c: f64, t: f64) -> Result<f64, SpecialError> {
    let x = -c * t.powf(beta);
    let num = mittag_leffler(MlQuery::new(beta, beta + 1.0 - alpha, x))?;
    Ok(num / ml1(beta, x)?)
}

/// `Iᵢ(t)` for homogeneity degree `p`.
pub fn i_value(beta: f64, alpha: f64, c: f64, p: f64, t: f64) -> Result<f64, CertificateError> {
    check_domain(beta, alpha, c, p)?;
    let x = -c * t.powf(beta);
    let num = mittag_leffler(MlQuery::new(beta, beta + 1.0 - alpha, x))?;
    let den = ml1(beta, x)?.powf(p);
    Ok(t.powf(beta - alpha) * num / den)
}

/// Limit of `Iᵢ(t)` as `t → ∞`, or the conservative ratio limit when `p = 1`.
fn tail_value(beta: f64, alpha: f64, c: f64, p: f64) -> Result<f64, CertificateError> {
    if beta >= 1.0 || alpha >= 1.0 {
        // E_1 ratios have no algebraic tail; the grid decides.
        return Ok(0.0);
    }
    let ratio = gamma(1.0 - beta)? / gamma(1.0 - alpha)?;
    if p == 1.0 {
        return Ok(ratio);
    }
    if ((p * beta) - alpha).abs() <= 1e-12 * alpha {
        Ok(c.powf(p - 1.0) * gamma(1.0 - beta)?.powf(p - 1.0) * ratio)
    } else {
        Ok(0.0)
    }
}

/// `sup_{t≥1} Iᵢ(t)`: the larger of the grid maximum and the analytic tail.
pub fn sup_i(beta: f64, alpha: f64, c: f64, p: f64, grid: LogGrid) -> Result<f64, CertificateError> {
    check_domain(beta, alpha, c, p)?;
    let mut best = tail_value(beta, alpha, c, p)?;
    for t in grid.iter() {
        best = best.max(i_value(beta, alpha, c, p, t)?);
    }
    Ok(best)
}

/// Left sides of the rate inequality for each component at rate `c`.
pub fn inequality_lhs(
    system: &SystemSpec,
    v: &[f64],
    phi_norm: f64,
    c: f64,
    grid: LogGrid,
) -> Result<(Vec<f64>, Vec<f64>), CertificateError> {
    let d = system.dim();
    if v.len() != d {
        return Err(CertificateError::DimensionMismatch { expected: d, got: v.len() });
    }
    let p = system.p();
    let beta = compute_beta(system.orders(), p);
    let e_c = ml1(beta, -c)?;
    let e_r = ml1(beta, -c * system.r().powf(beta))?;
    let nu = phi_norm / e_c;
    let memory_factor = nu.powf(1.0 - p) * c;

    let mut lhs = system.f().eval(v);
    let mut buf = vec![0.0; d];
    for term in system.delays() {
        term.field.eval_into(v, &mut buf);
        let scale = e_r.powf(term.field.degree());
        for (l, g) in lhs.iter_mut().zip(&buf) {
            *l += g / scale;
        }
    }
    let mut sups = Vec::with_capacity(d);
    for (i, l) in lhs.iter_mut().enumerate() {
        let alpha = system.orders().as_slice()[i];
        let s = sup_i(beta, alpha, c, p, grid)?;
        *l = *l / v[i] + memory_factor * SUP_SAFETY * s;
        sups.push(s);
    }
    Ok((lhs, sups))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub v: Vec<f64>,
    pub slack: Vec<f64>,
    pub orders: Vec<f64>,
    pub p: f64,
    pub beta: f64,
    pub c: f64,
    pub nu: f64,
    pub phi_norm: f64,
    pub scope: Scope,
    #[serde(rename = "sup_I")]
    pub sup_i: Vec<f64>,
    /// Left sides of the rate inequality at `c`, all `≤ 0`.
    pub lhs: Vec<f64>,
}

impl Certificate {
    pub fn dim(&self) -> usize {
        self.v.len()
    }

    /// `ν vᵢ E_β(−c t^β)`.
    pub fn envelope(&self, t: f64) -> Result<Vec<f64>, SpecialError> {
        let e = self.decay(t)?;
        Ok(self.v.iter().map(|vi| self.nu * vi * e).collect())
    }

    /// `E_β(−c t^β)`.
    pub fn decay(&self, t: f64) -> Result<f64, SpecialError> {
        ml1(self.beta, -self.c * t.max(0.0).powf(self.beta))
    }
}

/// Largest `c ∈ (0, 1)` satisfying the rate inequality in every component,
/// located on a log grid and refined by bisection to relative width `tol`.
/// The feasible end of the final bracket is returned.
pub fn find_rate_constant(
    system: &SystemSpec,
    cert_v: &CertificateVector,
    phi_norm: f64,
    tol: f64,
) -> Result<f64, CertificateError> {
    admissible_phi_norm(system, phi_norm)?;
    let grid = LogGrid::default();
    let feasible = |c: f64| -> Result<(bool, f64), CertificateError> {
        let (lhs, _) = inequality_lhs(system, &cert_v.v, phi_norm, c, grid)?;
        let worst = lhs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok((worst <= 0.0, worst))
    };
    let (lo_ln, hi_ln) = (C_MIN.ln(), C_MAX.ln());
    let cs: Vec<f64> = (0..C_GRID).map(|k| (lo_ln + (hi_ln - lo_ln) * k as f64 / (C_GRID - 1) as f64).exp()).collect();
    let (ok, worst) = feasible(cs[0])?;
    if !ok {
        return Err(CertificateError::Infeasible { worst_lhs: worst });
    }
    let mut lo = cs[0];
    let mut hi = None;
    for &c in &cs[1..] {
        if feasible(c)?.0 {
            lo = c;
        } else {
            hi = Some(c);
            break;
        }
    }
    let Some(mut hi) = hi else { return Ok(lo) };
    while hi - lo > tol * lo {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)?.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

fn admissible_phi_norm(system: &SystemSpec, phi_norm: f64) -> Result<(), CertificateError> {
    if !(phi_norm > 0.0 && phi_norm.is_finite()) {
        return Err(CertificateError::BadPhiNorm(phi_norm));
    }
    if scope_of(system) == Scope::Local && phi_norm >= 1.0 {
        return Err(CertificateError::ScopeViolation(phi_norm));
    }
    Ok(())
}

/// Rate, prefactor and envelope data for histories with `‖φ‖_v = phi_norm`.
pub fn certify(system: &SystemSpec, cert_v: &CertificateVector, phi_norm: f64) -> Result<Certificate, CertificateError> {
    if cert_v.v.len() != system.dim() {
        return Err(CertificateError::DimensionMismatch { expected: system.dim(), got: cert_v.v.len() });
    }
    let c = find_rate_constant(system, cert_v, phi_norm, DEFAULT_RATE_TOL)?;
    let p = system.p();
    let beta = compute_beta(system.orders(), p);
    let (lhs, sup_i) = inequality_lhs(system, &cert_v.v, phi_norm, c, LogGrid::default())?;
    let nu = phi_norm / ml1(beta, -c)?;
    Ok(Certificate {
        v: cert_v.v.clone(),
        slack: cert_v.slack.clone(),
        orders: system.orders().as_slice().to_vec(),
        p,
        beta,
        c,
        nu,
        phi_norm,
        scope: scope_of(system),
        sup_i,
        lhs,
    })
}

/// Rate `η = minᵢ (−slackᵢ / vᵢ)` for the commensurate case with `p = qⱼ = 1`,
/// giving the envelope `‖φ‖_v vᵢ E_{α₀}(−η t^{α₀})`.
pub fn commensurate_eta(cert_v: &CertificateVector) -> f64 {
    cert_v.slack.iter().zip(&cert_v.v).map(|(s, v)| -s / v).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checks::validate_certificate_vector;
    use crate::model::{builtin_example, BuiltinId, DelayTerm, Delay, VectorField};

    #[test]
    fn beta_values() {
        let o = |a: Vec<f64>| Orders::new(a).unwrap();
        assert_eq!(compute_beta(&o(vec![0.71, 0.61]), 1.0), 0.61);
        assert_eq!(compute_beta(&o(vec![0.95, 0.7]), 2.0), 0.35);
        assert_eq!(compute_beta(&o(vec![0.5, 0.5]), 1.0), 0.5);
    }

    #[test]
    fn sup_is_one_when_orders_match() {
        for &c in &[0.01, 0.3, 0.9] {
            let s = sup_i(0.61, 0.61, c, 1.0, LogGrid::default()).unwrap();
            assert!((s - 1.0).abs() < 1e-12, "c={c}: {s}");
        }
    }

    #[test]
    fn sup_domain_errors() {
        assert!(matches!(sup_i(0.7, 0.5, 0.1, 1.0, LogGrid::default()), Err(CertificateError::Domain { .. })));
        assert!(matches!(sup_i(0.5, 0.7, 1.0, 1.0, LogGrid::default()), Err(CertificateError::Domain { .. })));
        assert!(matches!(sup_i(0.5, 0.7, 0.1, 0.5, LogGrid::default()), Err(CertificateError::Domain { .. })));
    }

    #[test]
    fn sup_is_finite_and_nonnegative_for_builtins() {
        for &(beta, alpha, p) in &[(0.61, 0.71, 1.0), (0.61, 0.61, 1.0), (0.35, 0.95, 2.0), (0.35, 0.7, 2.0)] {
            for &c in &[1e-6, 0.01, 0.5, 0.99] {
                let s = sup_i(beta, alpha, c, p, LogGrid::default()).unwrap();
                assert!((0.0..=1e6).contains(&s), "beta={beta} alpha={alpha} c={c}: {s}");
            }
        }
    }

    #[test]
    fn ratio_tail_at_large_time() {
        let want = gamma(0.65).unwrap() / gamma(0.3).unwrap();
        let got = envelope_ratio(0.35, 0.7, 0.1, 1e8).unwrap();
        assert!(((got - want) / want).abs() < 0.05, "{got} vs {want}");
    }

    #[test]
    fn example1_certificate_self_consistent() {
        let ex = builtin_example(BuiltinId::Example1);
        let v = validate_certificate_vector(&ex.system, &[0.3, 0.2]).unwrap();
        let cert = certify(&ex.system, &v, 0.75).unwrap();
        assert_eq!(cert.scope, Scope::Local);
        assert_eq!(cert.beta, 0.61);
        assert!(cert.c > 0.0 && cert.c < 1.0);
        assert!(cert.lhs.iter().all(|&l| l <= 1e-12), "{:?}", cert.lhs);
        let (back, _) = inequality_lhs(&ex.system, &cert.v, 0.75, cert.c, LogGrid::default()).unwrap();
        assert_eq!(back, cert.lhs);
        // a slightly larger rate must break the inequality somewhere
        let (above, _) = inequality_lhs(&ex.system, &cert.v, 0.75, cert.c * (1.0 + 1e-5), LogGrid::default()).unwrap();
        assert!(above.iter().any(|&l| l > 0.0));
        let env0 = cert.envelope(0.0).unwrap();
        assert!(env0[0] >= 0.2 && env0[1] >= 0.15);
        assert!((cert.nu - 0.75 / ml1(0.61, -cert.c).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn local_scope_refuses_large_history() {
        let ex = builtin_example(BuiltinId::Example1);
        let v = validate_certificate_vector(&ex.system, &[0.3, 0.2]).unwrap();
        assert_eq!(certify(&ex.system, &v, 4.0), Err(CertificateError::ScopeViolation(4.0)));
        assert_eq!(certify(&ex.system, &v, 1.0), Err(CertificateError::ScopeViolation(1.0)));
    }

    #[test]
    fn example2_is_global() {
        let ex = builtin_example(BuiltinId::Example2);
        let v = validate_certificate_vector(&ex.system, &[0.75, 1.0]).unwrap();
        for phi_norm in [0.4, 2.3 / 0.75] {
            let cert = certify(&ex.system, &v, phi_norm).unwrap();
            assert_eq!(cert.scope, Scope::Global);
            assert_eq!(cert.beta, 0.35);
            assert!(cert.lhs.iter().all(|&l| l <= 0.0));
        }
    }

    #[test]
    fn zero_slack_is_infeasible() {
        // f(w) = -w, g(w) = w: f(v) + g(v) = 0 for every v.
        let f = VectorField::linear("neg", vec![vec![-1.0]]).unwrap();
        let g = VectorField::linear("pos", vec![vec![1.0]]).unwrap();
        let sys = SystemSpec::new(
            Orders::new(vec![0.5]).unwrap(),
            f,
            vec![DelayTerm::new(g, Delay::Constant(0.5), 0.5).unwrap()],
        )
        .unwrap();
        let v = CertificateVector { v: vec![1.0], slack: sys.slack(&[1.0]) };
        assert!(matches!(certify(&sys, &v, 0.5), Err(CertificateError::Infeasible { .. })));
    }

    #[test]
    fn envelope_is_monotone() {
        let ex = builtin_example(BuiltinId::Example1);
        let v = validate_certificate_vector(&ex.system, &[0.3, 0.2]).unwrap();
        let cert = certify(&ex.system, &v, 0.75).unwrap();
        let mut prev = cert.envelope(0.0).unwrap();
        assert!((prev[0] - cert.nu * 0.3).abs() < 1e-15);
        for k in 1..200 {
            let e = cert.envelope(k as f64 * 0.25).unwrap();
            assert!(e[0] < prev[0] && e[1] < prev[1]);
            prev = e;
        }
    }

    #[test]
    fn json_field_names() {
        let ex = builtin_example(BuiltinId::Example1);
        let v = validate_certificate_vector(&ex.system, &[0.3, 0.2]).unwrap();
        let cert = certify(&ex.system, &v, 0.75).unwrap();
        let json: serde_json::Value = serde_json::to_value(&cert).unwrap();
        for key in ["v", "beta", "c", "nu", "scope", "sup_I"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert_eq!(json["scope"], "local");
        let back: Certificate = serde_json::from_value(json).unwrap();
        assert_eq!(back, cert);
    }
}
