//! Sampling-based checks of the structural assumptions: cooperativity of
//! `f`, homogeneity degrees, order preservation of the delayed fields, and
//! a search for a certificate vector `v ≻ 0` with `f(v) + Σ g⁽ʲ⁾(v) ≺ 0`.
//!
//! A pass means "no counterexample on N reproducible samples", not a proof.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{jacobian_fd, SystemSpec, VectorField};

pub const DEFAULT_METZLER_TOL: f64 = 1e-8;
pub const DEFAULT_FD_STEP: f64 = 1e-5;
/// Certificate vectors need every slack component at or below this.
pub const SLACK_MARGIN: f64 = -1e-10;

const MAX_WITNESSES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assumption {
    Cooperative,
    Homogeneous,
    OrderPreserving,
    CertificateVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// A sampled point with the evidence computed there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub sample: usize,
    pub point: Vec<f64>,
    pub value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub assumption: Assumption,
    pub subject: String,
    pub verdict: Verdict,
    pub witnesses: Vec<Witness>,
    pub sample_count: usize,
    pub rng_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<f64>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckError {
    #[error("field {0} vanishes or is undefined on every sample; degree is inconclusive")]
    DegreeInconclusive(String),
}

/// Points `ρ·u` with `ρ` log-uniform in `[lo, hi]` and `u` uniform on the
/// unit sphere intersected with the nonnegative orthant.
fn orthant_points(rng: &mut ChaCha8Rng, d: usize, n: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let mut u: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal).abs()).collect();
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            let radius = (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp();
            u.iter_mut().for_each(|x| *x *= radius / norm);
            u
        })
        .collect()
}

/// Is `Df(x)` Metzler at sampled `x ∈ ℝᵈ_{≥0} \ {0}`?
///
/// Off-diagonal entries must be `≥ −tol·max(1, max|Df|)`; the finite
/// difference step is `h·max(1, ‖x‖_∞)`.
pub fn check_cooperative(f: &VectorField, n_samples: usize, h: f64, tol: f64, seed: u64) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = orthant_points(&mut rng, f.dim(), n_samples.max(1), 1e-3, 1e3);
    let mut witnesses = Vec::new();
    let mut failed = false;
    let mut undefined = 0usize;
    for (idx, x) in points.iter().enumerate() {
        let scale = x.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let jac = jacobian_fd(f, x, h * scale);
        if jac.iter().flatten().any(|v| !v.is_finite()) {
            undefined += 1;
            continue;
        }
        let big = jac.iter().flatten().fold(1.0_f64, |m, v| m.max(v.abs()));
        for (i, row) in jac.iter().enumerate() {
            for (j, &entry) in row.iter().enumerate() {
                if i != j && entry < -tol * big {
                    failed = true;
                    if witnesses.len() < MAX_WITNESSES {
                        witnesses.push(Witness {
                            sample: idx,
                            point: x.clone(),
                            value: entry,
                            detail: format!("Df[{i}][{j}] = {entry:e} < 0"),
                        });
                    }
                }
            }
        }
    }
    let verdict = if failed {
        Verdict::Fail
    } else if undefined > 0 {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    CheckReport {
        assumption: Assumption::Cooperative,
        subject: f.name().to_string(),
        verdict,
        witnesses,
        sample_count: points.len(),
        rng_seed: seed,
        estimate: None,
    }
}

/// Least-squares slope of `log‖F(λx)‖` against `log λ`, with a separate
/// intercept for each sampled `x`.
pub fn estimate_degree(field: &VectorField, n_samples: usize, seed: u64) -> Result<f64, CheckError> {
    const LAMBDAS_PER_POINT: usize = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = orthant_points(&mut rng, field.dim(), n_samples.max(1), 0.1, 10.0);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    let mut scaled = vec![0.0; field.dim()];
    let mut out = vec![0.0; field.dim()];
    for x in &points {
        let lambdas: Vec<f64> = (0..LAMBDAS_PER_POINT).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * 10f64.ln()).collect();
        let mut pairs = Vec::with_capacity(LAMBDAS_PER_POINT);
        for &l in &lambdas {
            let lam = l.exp();
            scaled.iter_mut().zip(x).for_each(|(s, v)| *s = lam * v);
            field.eval_into(&scaled, &mut out);
            let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 && norm.is_finite() {
                pairs.push((l, norm.ln()));
            }
        }
        if pairs.len() < 2 {
            continue;
        }
        let lm = pairs.iter().map(|p| p.0).sum::<f64>() / pairs.len() as f64;
        let ym = pairs.iter().map(|p| p.1).sum::<f64>() / pairs.len() as f64;
        for (l, y) in pairs {
            sxy += (l - lm) * (y - ym);
            sxx += (l - lm) * (l - lm);
        }
    }
    if sxx == 0.0 {
        return Err(CheckError::DegreeInconclusive(field.name().to_string()));
    }
    Ok(sxy / sxx)
}

/// Compares the estimated degree with the declared one and checks
/// `F(λx) = λ^p F(x)` pointwise to relative tolerance `tol`.
pub fn check_homogeneous(field: &VectorField, n_samples: usize, tol: f64, seed: u64) -> CheckReport {
    let declared = field.degree();
    let mut witnesses = Vec::new();
    let estimate = estimate_degree(field, n_samples, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let points = orthant_points(&mut rng, field.dim(), n_samples.max(1), 1e-2, 1e2);
    let mut failed = false;
    for (idx, x) in points.iter().enumerate() {
        let lam = (rng.random::<f64>() * 10.0).max(1e-3);
        let fx = field.eval(x);
        let scaled: Vec<f64> = x.iter().map(|v| lam * v).collect();
        let flx = field.eval(&scaled);
        let factor = lam.powf(declared);
        for i in 0..fx.len() {
            let want = factor * fx[i];
            let err = (flx[i] - want).abs();
            if err > tol * want.abs().max(flx[i].abs()).max(f64::MIN_POSITIVE) && err > 1e-300 {
                failed = true;
                if witnesses.len() < MAX_WITNESSES {
                    witnesses.push(Witness {
                        sample: idx,
                        point: x.clone(),
                        value: err,
                        detail: format!("component {i}: F(λx) = {:e}, λ^p F(x) = {want:e} at λ = {lam}", flx[i]),
                    });
                }
            }
        }
    }
    let (verdict, est) = match estimate {
        Ok(e) => {
            if (e - declared).abs() > 1e-6 && !failed {
                failed = true;
                witnesses.push(Witness {
                    sample: 0,
                    point: vec![],
                    value: e,
                    detail: format!("estimated degree {e} differs from declared {declared}"),
                });
            }
            (if failed { Verdict::Fail } else { Verdict::Pass }, Some(e))
        }
        Err(_) => (if failed { Verdict::Fail } else { Verdict::Inconclusive }, None),
    };
    CheckReport {
        assumption: Assumption::Homogeneous,
        subject: field.name().to_string(),
        verdict,
        witnesses,
        sample_count: points.len(),
        rng_seed: seed,
        estimate: est,
    }
}

/// Samples `u ⪰ w ⪰ 0` and checks `g(u) ⪰ g(w) − tol·max(1, |g(u)|)`.
pub fn check_order_preserving(g: &VectorField, n_pairs: usize, tol: f64, seed: u64) -> CheckReport {
    let d = g.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut witnesses = Vec::new();
    let mut failed = false;
    let n = n_pairs.max(1);
    let mut gu = vec![0.0; d];
    let mut gw = vec![0.0; d];
    for idx in 0..n {
        let w: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 5.0).collect();
        // Some coordinates stay equal so that partial orders get exercised.
        let u: Vec<f64> = w
            .iter()
            .map(|&wi| if rng.random::<bool>() { wi + rng.random::<f64>() * 2.0 } else { wi })
            .collect();
        g.eval_into(&u, &mut gu);
        g.eval_into(&w, &mut gw);
        for i in 0..d {
            let allowed = tol * gu[i].abs().max(1.0);
            if gu[i] < gw[i] - allowed {
                failed = true;
                if witnesses.len() < MAX_WITNESSES {
                    let mut point = u.clone();
                    point.extend_from_slice(&w);
                    witnesses.push(Witness {
                        sample: idx,
                        point,
                        value: gu[i] - gw[i],
                        detail: format!("component {i}: g(u) = {:e} < g(w) = {:e} (point lists u then w)", gu[i], gw[i]),
                    });
                }
            }
        }
    }
    CheckReport {
        assumption: Assumption::OrderPreserving,
        subject: g.name().to_string(),
        verdict: if failed { Verdict::Fail } else { Verdict::Pass },
        witnesses,
        sample_count: n,
        rng_seed: seed,
        estimate: None,
    }
}

/// Relative tolerance of the pointwise homogeneity check.
pub const HOMOGENEITY_TOL: f64 = 1e-9;
/// Absolute slack allowed by the order-preservation check.
pub const ORDER_TOL: f64 = 1e-9;

/// Cooperativity and homogeneity of `f`, then homogeneity and order
/// preservation of every delayed field. Check `k` uses seed `seed + k`.
pub fn check_structure(system: &SystemSpec, n_samples: usize, seed: u64) -> Vec<CheckReport> {
    let mut reports = vec![
        check_cooperative(system.f(), n_samples, DEFAULT_FD_STEP, DEFAULT_METZLER_TOL, seed),
        check_homogeneous(system.f(), n_samples, HOMOGENEITY_TOL, seed.wrapping_add(1)),
    ];
    for (j, term) in system.delays().iter().enumerate() {
        let base = seed.wrapping_add(2 + 2 * j as u64);
        reports.push(check_homogeneous(&term.field, n_samples, HOMOGENEITY_TOL, base));
        reports.push(check_order_preserving(&term.field, n_samples, ORDER_TOL, base.wrapping_add(1)));
    }
    reports
}

/// A strictly positive `v` with `f(v) + Σ g⁽ʲ⁾(v) ≺ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateVector {
    pub v: Vec<f64>,
    pub slack: Vec<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("no certificate vector within {evaluations} evaluations; best v = {best_v:?} with slack {best_slack:?}")]
    Exhausted { evaluations: usize, best_v: Vec<f64>, best_slack: Vec<f64> },
    #[error("candidate v = {v:?} is not feasible: slack {slack:?}")]
    Infeasible { v: Vec<f64>, slack: Vec<f64> },
    #[error("candidate has dimension {got}, system has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Accepts `v` iff `v ≻ 0` and every slack component is `≤ −1e−10`.
pub fn validate_certificate_vector(system: &SystemSpec, v: &[f64]) -> Result<CertificateVector, SearchError> {
    if v.len() != system.dim() {
        return Err(SearchError::DimensionMismatch { expected: system.dim(), got: v.len() });
    }
    let slack = system.slack(v);
    if v.iter().all(|&x| x > 0.0 && x.is_finite()) && slack.iter().all(|&s| s <= SLACK_MARGIN) {
        Ok(CertificateVector { v: v.to_vec(), slack })
    } else {
        Err(SearchError::Infeasible { v: v.to_vec(), slack })
    }
}

struct Search<'a> {
    system: &'a SystemSpec,
    evaluations: usize,
    budget: usize,
    best: Option<(f64, Vec<f64>, Vec<f64>)>,
}

impl Search<'_> {
    /// `max_i slack_i(v) / (v_i ‖v‖_∞^{p−1})`, with the budget charged. The
    /// normalisation makes the objective scale free when all degrees are `p`.
    fn objective(&mut self, v: &[f64]) -> Option<(f64, Vec<f64>)> {
        if self.evaluations >= self.budget {
            return None;
        }
        self.evaluations += 1;
        let slack = self.system.slack(v);
        let top = v.iter().copied().fold(0.0_f64, f64::max).powf(self.system.p() - 1.0);
        let obj = slack.iter().zip(v).map(|(s, x)| s / (x * top)).fold(f64::NEG_INFINITY, f64::max);
        let obj = if obj.is_nan() { f64::INFINITY } else { obj };
        if self.best.as_ref().is_none_or(|b| obj < b.0) {
            self.best = Some((obj, v.to_vec(), slack.clone()));
        }
        Some((obj, slack))
    }
}

fn feasible(slack: &[f64]) -> bool {
    slack.iter().all(|&s| s <= SLACK_MARGIN)
}

/// Random restarts over directions with `max vᵢ = 1`, a geometric scale
/// scan, then coordinate pattern search on `log v` minimizing
/// `max_i slack_i(v)/(v_i ‖v‖_∞^{p−1})`. Stops at the first strictly feasible point.
///
/// When every delayed degree equals `p` feasibility is scale free and the
/// result is normalized to `‖v‖_∞ = 1`; otherwise the found scale is kept.
pub fn find_certificate_vector(system: &SystemSpec, budget: usize, seed: u64) -> Result<CertificateVector, SearchError> {
    const SCALES: i32 = 30;
    let d = system.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut search = Search { system, evaluations: 0, budget, best: None };

    let finish = |v: Vec<f64>| -> CertificateVector {
        if system.degrees_equal() {
            let m = v.iter().copied().fold(0.0_f64, f64::max);
            let normalized: Vec<f64> = v.iter().map(|x| x / m).collect();
            if let Ok(c) = validate_certificate_vector(system, &normalized) {
                return c;
            }
        }
        let slack = system.slack(&v);
        CertificateVector { v, slack }
    };

    'restarts: while search.evaluations < budget {
        let mut dir: Vec<f64> = (0..d).map(|_| 0.05 + 0.95 * rng.random::<f64>()).collect();
        let top = rng.random_range(0..d);
        dir[top] = 1.0;

        let mut start: Option<(f64, Vec<f64>)> = None;
        for k in 0..=SCALES {
            let lam = 0.5f64.powi(k);
            let v: Vec<f64> = dir.iter().map(|x| x * lam).collect();
            let Some((obj, slack)) = search.objective(&v) else { break 'restarts };
            if feasible(&slack) {
                return Ok(finish(v));
            }
            if start.as_ref().is_none_or(|s| obj < s.0) {
                start = Some((obj, v));
            }
        }
        let (mut obj, v) = start.expect("at least one scale evaluated");
        let mut logv: Vec<f64> = v.iter().map(|x| x.ln()).collect();
        let mut step = 0.5;
        while step > 1e-6 {
            let mut improved = false;
            for i in 0..d {
                for sign in [1.0, -1.0] {
                    let mut trial = logv.clone();
                    trial[i] += sign * step;
                    let cand: Vec<f64> = trial.iter().map(|x| x.exp()).collect();
                    let Some((o, slack)) = search.objective(&cand) else { break 'restarts };
                    if feasible(&slack) {
                        return Ok(finish(cand));
                    }
                    if o < obj {
                        obj = o;
                        logv = trial;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
    }
    let (_, best_v, best_slack) = search.best.unwrap_or((f64::INFINITY, vec![], vec![]));
    Err(SearchError::Exhausted { evaluations: search.evaluations, best_v, best_slack })
}
