//! Fractional Adams–Bashforth–Moulton integration of multi-order delay
//! systems.
//!
//! Each component i solves the Volterra form
//!
//! ```text
//! wᵢ(t) = φᵢ(0) + 1/Γ(αᵢ) ∫₀ᵗ (t − s)^{αᵢ−1} Fᵢ(s) ds
//! ```
//!
//! with a product-rectangle predictor and a product-trapezoidal corrector
//! on a uniform grid. Delayed states come from the trajectory built so far
//! (or φ for negative times); a delayed time inside the current step uses
//! the current predictor/corrector iterate.

use thiserror::Error;

use crate::model::{History, InitialCondition, ModelError, SystemSpec};
use crate::special::gamma;
use crate::trajectory::{SolverWarning, Trajectory};

/// States below this are reported, states in `[−NEG_CLAMP, 0)` are zeroed.
pub const NEG_CLAMP: f64 = 1e-9;
/// Any state with absolute value beyond this counts as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;
pub const MAX_CORRECTOR_ITERATIONS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub step: f64,
    pub horizon: f64,
    pub corrector_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { step: 1e-3, horizon: 20.0, corrector_iterations: 1 }
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("step {step} exceeds horizon {horizon}")]
    StepExceedsHorizon { step: f64, horizon: f64 },
    #[error("horizon {horizon} is not an integer multiple of step {step}")]
    HorizonNotMultiple { step: f64, horizon: f64 },
    #[error("step {step} exceeds half the delay bound r = {r}")]
    StepTooLargeForDelay { step: f64, r: f64 },
    #[error("corrector iterations must be in 1..=5, got {0}")]
    BadIterations(usize),
    #[error("initial condition has dimension {got}, system has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("solution diverged at t = {t} (|w| > 1e12 or not finite)")]
    Diverged { t: f64, partial: Box<Trajectory> },
}

impl SolverConfig {
    pub fn new(step: f64, horizon: f64) -> Self {
        Self { step, horizon, corrector_iterations: 1 }
    }

    /// Number of steps `N = T / h`.
    pub fn steps(&self) -> usize {
        (self.horizon / self.step).round() as usize
    }

    pub fn validate(&self, r: f64, has_delays: bool) -> Result<(), SolveError> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(SolveError::BadStep(self.step));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(SolveError::BadHorizon(self.horizon));
        }
        if self.step > self.horizon {
            return Err(SolveError::StepExceedsHorizon { step: self.step, horizon: self.horizon });
        }
        let ratio = self.horizon / self.step;
        if (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) {
            return Err(SolveError::HorizonNotMultiple { step: self.step, horizon: self.horizon });
        }
        if has_delays && self.step > r / 2.0 {
            return Err(SolveError::StepTooLargeForDelay { step: self.step, r });
        }
        if self.corrector_iterations == 0 || self.corrector_iterations > MAX_CORRECTOR_ITERATIONS {
            return Err(SolveError::BadIterations(self.corrector_iterations));
        }
        Ok(())
    }
}

/// Explicit ABM weights for advancing to step `n` (from the `n` known
/// points `t_0 … t_{n−1}`).
#[derive(Debug, Clone, PartialEq)]
pub struct AbmWeights {
    /// `b_{k,n}`, k = 0..n−1.
    pub predictor: Vec<f64>,
    /// `a_{k,n}`, k = 0..n; the last entry multiplies the predicted value.
    pub corrector: Vec<f64>,
}

/// Predictor and corrector weights of the fractional ABM scheme, scaled by
/// `h^α / Γ(α+1)` and `h^α / Γ(α+2)` respectively.
pub fn abm_weights(alpha: f64, n: usize, step: f64) -> AbmWeights {
    assert!(n >= 1, "abm_weights needs n >= 1");
    let kernel = MemoryKernel::new(alpha, step, n);
    let nf = n as f64;
    let predictor = (0..n).map(|k| kernel.pred_scale * kernel.pred[n - 1 - k]).collect();
    let mut corrector = Vec::with_capacity(n + 1);
    let m = nf - 1.0;
    corrector.push(kernel.corr_scale * (m.powf(alpha + 1.0) - (m - alpha) * nf.powf(alpha)));
    for k in 1..n {
        corrector.push(kernel.corr_scale * kernel.corr[n - k]);
    }
    corrector.push(kernel.corr_scale);
    AbmWeights { predictor, corrector }
}

/// Convolution weights for one order α.
#[derive(Debug, Clone)]
struct MemoryKernel {
    alpha: f64,
    pred_scale: f64,
    corr_scale: f64,
    /// `(j+1)^α − j^α`
    pred: Vec<f64>,
    /// `(j+1)^{α+1} − 2 j^{α+1} + (j−1)^{α+1}` for j ≥ 1 (index 0 unused)
    corr: Vec<f64>,
}

impl MemoryKernel {
    fn new(alpha: f64, step: f64, steps: usize) -> Self {
        let ha = step.powf(alpha);
        let pred_scale = ha / gamma(alpha + 1.0).expect("alpha in (0,1]");
        let corr_scale = ha / gamma(alpha + 2.0).expect("alpha in (0,1]");
        let a1 = alpha + 1.0;
        let pow_a: Vec<f64> = (0..=steps + 1).map(|j| (j as f64).powf(alpha)).collect();
        let pow_a1: Vec<f64> = (0..=steps + 1).map(|j| (j as f64).powf(a1)).collect();
        let pred = (0..=steps).map(|j| pow_a[j + 1] - pow_a[j]).collect();
        let mut corr = vec![0.0; steps + 1];
        for j in 1..=steps {
            corr[j] = pow_a1[j + 1] - 2.0 * pow_a1[j] + pow_a1[j - 1];
        }
        Self { alpha, pred_scale, corr_scale, pred, corr }
    }

    /// Memory sums for advancing from step n to n+1 given `F_0 … F_n`:
    /// the full predictor sum and the corrector sum without the implicit
    /// `F_{n+1}` term.
    fn history_sums(&self, forcing: &[f64]) -> (f64, f64) {
        let n = forcing.len() - 1;
        let mut pred = 0.0;
        for (f, w) in forcing.iter().zip(self.pred[..=n].iter().rev()) {
            pred += w * f;
        }
        let nf = n as f64;
        let a0 = nf.powf(self.alpha + 1.0) - (nf - self.alpha) * (nf + 1.0).powf(self.alpha);
        let mut corr = a0 * forcing[0];
        // k = 1..=n uses corr[n + 1 − k]
        for (f, w) in forcing[1..].iter().zip(self.corr[1..=n].iter().rev()) {
            corr += w * f;
        }
        (self.pred_scale * pred, self.corr_scale * corr)
    }
}

/// History view while a step is in progress: stored states `0..=n`, plus a
/// tentative state at `n+1`.
struct StepHistory<'a> {
    traj: &'a Trajectory,
    tentative: Option<&'a [f64]>,
}

impl History for StepHistory<'_> {
    fn lookup_into(&self, t: f64, out: &mut [f64]) -> Result<(), ModelError> {
        let last = self.traj.last_time();
        match self.tentative {
            Some(next) if t > last => {
                let h = self.traj.step();
                let frac = (t - last) / h;
                if frac > 1.0 + 1e-9 {
                    return Err(ModelError::LookupOutOfRange { t, lo: -self.traj.r(), hi: last + h });
                }
                let cur = self.traj.state(self.traj.len() - 1);
                for (o, (a, b)) in out.iter_mut().zip(cur.iter().zip(next)) {
                    *o = a + frac.min(1.0) * (b - a);
                }
                Ok(())
            }
            _ => self.traj.lookup_into(t, out),
        }
    }
}

#[derive(Default)]
struct WarningLog {
    neg_first: Option<f64>,
    neg_count: usize,
    neg_min: f64,
    rad_first: Option<f64>,
    rad_count: usize,
}

impl WarningLog {
    fn radicand(&mut self, t: f64) {
        self.rad_first.get_or_insert(t);
        self.rad_count += 1;
    }

    fn negative(&mut self, t: f64, v: f64) {
        self.neg_first.get_or_insert(t);
        self.neg_count += 1;
        self.neg_min = self.neg_min.min(v);
    }

    fn finish(self) -> Vec<SolverWarning> {
        let mut out = Vec::new();
        if let Some(first_t) = self.neg_first {
            out.push(SolverWarning::NegativeClamp { first_t, count: self.neg_count, most_negative: self.neg_min });
        }
        if let Some(first_t) = self.rad_first {
            out.push(SolverWarning::RadicandClamp { first_t, count: self.rad_count });
        }
        out
    }
}

/// Integrates `system` from history `phi` over `[0, T]`.
pub fn solve(system: &SystemSpec, phi: &InitialCondition, config: &SolverConfig) -> Result<Trajectory, SolveError> {
    let d = system.dim();
    if phi.dim() != d {
        return Err(SolveError::DimensionMismatch { expected: d, got: phi.dim() });
    }
    config.validate(system.r(), !system.delays().is_empty())?;
    phi.validate(system.r(), config.step)?;

    let steps = config.steps();
    let h = config.step;
    let kernels: Vec<MemoryKernel> = system.orders().as_slice().iter().map(|&a| MemoryKernel::new(a, h, steps)).collect();

    let mut traj = Trajectory::with_capacity(h, d, system.r(), phi.clone(), steps);
    let w0 = phi.eval(0.0);
    traj.push_state(&w0);

    let mut log = WarningLog::default();
    // forcing[i][k] = Fᵢ(t_k)
    let mut forcing: Vec<Vec<f64>> = (0..d).map(|_| Vec::with_capacity(steps + 1)).collect();
    let mut f_buf = vec![0.0; d];
    let mut scratch = vec![0.0; 2 * d];

    {
        let hist = StepHistory { traj: &traj, tentative: None };
        if system.rhs_into(0.0, &w0, &hist, &mut f_buf, &mut scratch)? {
            log.radicand(0.0);
        }
    }
    for i in 0..d {
        forcing[i].push(f_buf[i]);
    }

    let mut pred_sum = vec![0.0; d];
    let mut corr_sum = vec![0.0; d];
    let mut w_pred = vec![0.0; d];
    let mut w_next = vec![0.0; d];

    for n in 0..steps {
        let t_next = (n + 1) as f64 * h;
        for i in 0..d {
            let (p, c) = kernels[i].history_sums(&forcing[i]);
            pred_sum[i] = p;
            corr_sum[i] = c;
            w_pred[i] = w0[i] + p;
        }
        w_next.copy_from_slice(&w_pred);
        for _ in 0..config.corrector_iterations {
            {
                let hist = StepHistory { traj: &traj, tentative: Some(&w_next) };
                if system.rhs_into(t_next, &w_next, &hist, &mut f_buf, &mut scratch)? {
                    log.radicand(t_next);
                }
            }
            for i in 0..d {
                w_next[i] = w0[i] + corr_sum[i] + kernels[i].corr_scale * f_buf[i];
            }
        }
        for v in w_next.iter_mut() {
            if *v < 0.0 && *v >= -NEG_CLAMP {
                log.negative(t_next, *v);
                *v = 0.0;
            }
        }
        traj.push_state(&w_next);
        if w_next.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
            traj.set_warnings(log.finish());
            return Err(SolveError::Diverged { t: t_next, partial: Box::new(traj) });
        }
        {
            let hist = StepHistory { traj: &traj, tentative: None };
            if system.rhs_into(t_next, &w_next, &hist, &mut f_buf, &mut scratch)? {
                log.radicand(t_next);
            }
        }
        for i in 0..d {
            forcing[i].push(f_buf[i]);
        }
    }
    traj.set_warnings(log.finish());
    Ok(traj)
}
