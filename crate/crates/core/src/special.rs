//! Gamma and Mittag-Leffler functions on the real line.
//!
//! `E_{α,β}(x) = Σ_k x^k / Γ(αk + β)` is evaluated with three regimes:
//!
//! * the power series (Kahan-summed) where it does not cancel badly,
//! * the Gorenflo–Loutchko–Luchko integral representation for moderate
//!   negative arguments,
//! * the algebraic asymptotic expansion `-Σ_k x^{-k} / Γ(β - αk)` for
//!   `x < -50`.
//!
//! Negative arguments are the regime that matters for decay envelopes.

use std::f64::consts::PI;

use thiserror::Error;

use crate::quad;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecialError {
    #[error("gamma has a pole at {0}")]
    Pole(f64),
    #[error("gamma overflows at {0}")]
    Overflow(f64),
    #[error("Mittag-Leffler parameters must satisfy alpha > 0, beta > 0 (got alpha={alpha}, beta={beta})")]
    Domain { alpha: f64, beta: f64 },
    #[error("argument {0} is not finite")]
    NonFinite(f64),
    #[error("series for E_{{{alpha},{beta}}}({x}) did not converge")]
    NoConvergence { alpha: f64, beta: f64, x: f64 },
    #[error("envelope derivative needs 0 < beta <= alpha <= 1, c > 0, t > 0 (got beta={beta}, alpha={alpha}, c={c}, t={t})")]
    EnvelopeDomain { beta: f64, alpha: f64, c: f64, t: f64 },
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const GAMMA_MAX_ARG: f64 = 171.624_376_956_302_7;

/// `sin(πx)` with exact zeros at the integers.
fn sin_pi(x: f64) -> f64 {
    let r = x.rem_euclid(2.0);
    if r == 0.0 || r == 1.0 {
        return 0.0;
    }
    // sin(π r) for r in (0, 2): fold onto [0, 1/2].
    let (r, sign) = if r > 1.0 { (r - 1.0, -1.0) } else { (r, 1.0) };
    let r = if r > 0.5 { 1.0 - r } else { r };
    sign * (PI * r).sin()
}

fn lanczos_sum(z: f64) -> f64 {
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    acc
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

/// Γ(x) for real `x`.
///
/// Lanczos approximation (g = 7) for `x ≥ 1/2`, reflection below that.
/// Small positive integers return the exact factorial.
pub fn gamma(x: f64) -> Result<f64, SpecialError> {
    if !x.is_finite() {
        return Err(SpecialError::NonFinite(x));
    }
    if is_nonpositive_integer(x) {
        return Err(SpecialError::Pole(x));
    }
    if x > GAMMA_MAX_ARG {
        return Err(SpecialError::Overflow(x));
    }
    if x == x.floor() && x <= 30.0 {
        let mut f = 1.0;
        let mut k = 2.0;
        while k < x {
            f *= k;
            k += 1.0;
        }
        return Ok(f);
    }
    if x < 0.5 {
        let s = sin_pi(x);
        let g = gamma(1.0 - x)?;
        return Ok(PI / (s * g));
    }
    let z = x - 1.0;
    let w = z + LANCZOS_G + 0.5;
    // w^(z+1/2) is split to stay finite near the top of the range.
    let half_pow = w.powf(0.5 * (z + 0.5));
    Ok((2.0 * PI).sqrt() * half_pow * (half_pow * (-w).exp()) * lanczos_sum(z))
}

/// ln|Γ(x)|.
pub fn ln_gamma(x: f64) -> Result<f64, SpecialError> {
    if !x.is_finite() {
        return Err(SpecialError::NonFinite(x));
    }
    if is_nonpositive_integer(x) {
        return Err(SpecialError::Pole(x));
    }
    if x < 0.5 {
        let s = sin_pi(x).abs();
        return Ok(PI.ln() - s.ln() - ln_gamma(1.0 - x)?);
    }
    let z = x - 1.0;
    let w = z + LANCZOS_G + 0.5;
    Ok(0.5 * (2.0 * PI).ln() + (z + 0.5) * w.ln() - w + lanczos_sum(z).ln())
}

/// 1/Γ(x): zero at the poles, zero on overflow of Γ.
pub fn rgamma(x: f64) -> f64 {
    if is_nonpositive_integer(x) {
        return 0.0;
    }
    if x > GAMMA_MAX_ARG {
        return 0.0;
    }
    if x < 0.5 && 1.0 - x > GAMMA_MAX_ARG {
        // Γ(1-x) overflows; go through logs.
        let s = sin_pi(x);
        let lg = ln_gamma(1.0 - x).unwrap_or(f64::INFINITY);
        return s * (lg - PI.ln()).exp();
    }
    match gamma(x) {
        Ok(g) => 1.0 / g,
        Err(_) => 0.0,
    }
}

/// Arguments of a two-parameter Mittag-Leffler evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlQuery {
    pub alpha: f64,
    pub beta: f64,
    pub x: f64,
}

impl MlQuery {
    pub fn new(alpha: f64, beta: f64, x: f64) -> Self {
        Self { alpha, beta, x }
    }

    fn validate(&self) -> Result<(), SpecialError> {
        if !(self.alpha > 0.0 && self.beta > 0.0) || !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(SpecialError::Domain { alpha: self.alpha, beta: self.beta });
        }
        if !self.x.is_finite() {
            return Err(SpecialError::NonFinite(self.x));
        }
        Ok(())
    }
}

const SERIES_CAP: usize = 500;
const ASYMPTOTIC_THRESHOLD: f64 = -50.0;
const INTEGRAL_TOL: f64 = 1e-14;

/// E_{α,β}(x).
pub fn mittag_leffler(q: MlQuery) -> Result<f64, SpecialError> {
    q.validate()?;
    let MlQuery { alpha, beta, x } = q;
    if x == 0.0 {
        return Ok(rgamma(beta));
    }
    if alpha == 1.0 && beta == 1.0 {
        return Ok(x.exp());
    }
    if x >= -1.0 || alpha > 1.0 {
        return series(alpha, beta, x);
    }
    if alpha == 1.0 {
        return Ok(ml_alpha_one(beta, x));
    }
    if x < ASYMPTOTIC_THRESHOLD {
        return Ok(asymptotic(alpha, beta, x));
    }
    Ok(integral(alpha, beta, x))
}

/// E_α(x) = E_{α,1}(x).
pub fn ml1(alpha: f64, x: f64) -> Result<f64, SpecialError> {
    mittag_leffler(MlQuery::new(alpha, 1.0, x))
}

fn series(alpha: f64, beta: f64, x: f64) -> Result<f64, SpecialError> {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    let ln_abs = x.abs().ln();
    // Terms may grow before they shrink while αk + β is still small.
    let min_terms = (2.0 / alpha).ceil() as usize + 1;
    for k in 0..SERIES_CAP {
        let kf = k as f64;
        let arg = alpha * kf + beta;
        let term = if x.abs() <= 1.0 {
            x.powi(k as i32) * rgamma(arg)
        } else {
            // log-space keeps x^k finite; Γ(arg) > 0 here since arg > 0.
            let mag = (kf * ln_abs - ln_gamma(arg)?).exp();
            if x < 0.0 && k % 2 == 1 {
                -mag
            } else {
                mag
            }
        };
        if !term.is_finite() {
            return Err(SpecialError::NoConvergence { alpha, beta, x });
        }
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if k >= min_terms && term.abs() < 1e-16 * sum.abs() {
            return Ok(sum);
        }
        if k >= min_terms && term == 0.0 {
            return Ok(sum);
        }
    }
    Err(SpecialError::NoConvergence { alpha, beta, x })
}

/// Algebraic expansion for large negative arguments (0 < α < 1).
fn asymptotic(alpha: f64, beta: f64, x: f64) -> f64 {
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let inv = 1.0 / x;
    let mut pow = 1.0;
    for k in 1..=80 {
        pow *= inv;
        let term = pow * rgamma(beta - alpha * k as f64);
        let mag = term.abs();
        if mag > prev && prev > 0.0 {
            break;
        }
        sum -= term;
        if mag != 0.0 {
            prev = mag;
        }
        if mag != 0.0 && mag < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Integral representation for 0 < α < 1, x < 0. For β > 1 the recurrence
/// E_{α,β}(x) = (E_{α,β-α}(x) - 1/Γ(β-α)) / x first lowers β into (0, 1],
/// where the kernel has no singularity at the origin.
fn integral(alpha: f64, beta: f64, x: f64) -> f64 {
    if beta > 1.0 {
        let lower = integral(alpha, beta - alpha, x);
        return (lower - rgamma(beta - alpha)) / x;
    }
    let z = x;
    let expo = (1.0 - beta) / alpha;
    let s1 = (PI * (1.0 - beta)).sin();
    let s2 = (PI * (1.0 - beta + alpha)).sin();
    let cos = (PI * alpha).cos();
    let kernel = move |chi: f64| -> f64 {
        let num = chi * s1 - z * s2;
        let den = chi * chi - 2.0 * chi * z * cos + z * z;
        chi.powf(expo) * (-chi.powf(1.0 / alpha)).exp() * num / den
    };
    let a = z.abs();
    let mut cuts = vec![0.0, 1.0, 2.0, a];
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += quad::tanh_sinh(kernel, w[0], w[1], INTEGRAL_TOL);
    }
    let tail_start = *cuts.last().unwrap();
    total += quad::exp_sinh(kernel, tail_start, INTEGRAL_TOL);
    total / (alpha * PI)
}

/// E_{1,β}(x) for x < -1.
///
/// β > 1: E_{1,β}(x) = (1/Γ(β-1)) ∫₀¹ e^{xs} (1-s)^{β-2} ds.
/// β < 1: E_{1,β}(x) = 1/Γ(β) + x E_{1,β+1}(x).
fn ml_alpha_one(beta: f64, x: f64) -> f64 {
    if beta == 1.0 {
        return x.exp();
    }
    if beta < 1.0 {
        return rgamma(beta) + x * ml_alpha_one(beta + 1.0, x);
    }
    // u = 1 - s puts the (1-s)^{β-2} singularity on the exact endpoint 0.
    let expo = beta - 2.0;
    let body = quad::tanh_sinh(|u| (x * (1.0 - u)).exp() * u.powf(expo), 0.0, 1.0, INTEGRAL_TOL);
    body * rgamma(beta - 1.0)
}

/// Caputo derivative of order `alpha` of `t ↦ E_β(-c t^β)`:
/// `-c t^{β-α} E_{β,1+β-α}(-c t^β)`.
pub fn caputo_derivative_of_envelope(beta: f64, alpha: f64, c: f64, t: f64) -> Result<f64, SpecialError> {
    if !(beta > 0.0 && beta <= alpha && alpha <= 1.0 && c > 0.0 && t > 0.0) {
        return Err(SpecialError::EnvelopeDomain { beta, alpha, c, t });
    }
    let e = mittag_leffler(MlQuery::new(beta, 1.0 + beta - alpha, -c * t.powf(beta)))?;
    Ok(-c * t.powf(beta - alpha) * e)
}
