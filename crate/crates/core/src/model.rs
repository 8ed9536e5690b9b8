//! Multi-order fractional delay systems
//!
//! ```text
//! ᶜD^{αᵢ} wᵢ(t) = fᵢ(w(t)) + Σⱼ gᵢ⁽ʲ⁾(w(t − τⱼ(t))),   t > 0
//! w(s) = φ(s),                                     s ∈ [−r, 0]
//! ```
//!
//! Vector fields are native callables tagged with their homogeneity degree.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("order alpha[{index}] = {value} is outside (0, 1]")]
    OrderOutOfRange { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("homogeneity degree {0} is below 1")]
    DegreeBelowOne(f64),
    #[error("delay term {index} has degree {q} below the non-delayed degree {p}")]
    DelayDegreeBelowP { index: usize, q: f64, p: f64 },
    #[error("delay bound {0} must be positive and finite")]
    BadDelayBound(f64),
    #[error("delay {index} leaves [0, {bound}] at t = {t} (tau = {tau})")]
    DelayOutOfRange { index: usize, t: f64, tau: f64, bound: f64 },
    #[error("delay range [{lo}, {hi}] is not inside [0, {bound}]")]
    DelayRangeOutsideBound { lo: f64, hi: f64, bound: f64 },
    #[error("weight vector must be strictly positive (component {index} is {value})")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("initial condition is negative at s = {s} (component {index} = {value})")]
    NegativeHistory { s: f64, index: usize, value: f64 },
    #[error("initial condition is not finite at s = {0}")]
    NonFiniteHistory(f64),
    #[error("history sample grid needs at least two samples when r > 0")]
    TooFewSamples,
    #[error("history lookup at t = {t} outside the covered range [{lo}, {hi}]")]
    LookupOutOfRange { t: f64, lo: f64, hi: f64 },
    #[error("unknown built-in example {0:?}")]
    UnknownExample(String),
    #[error("system dimension must be at least 1")]
    EmptySystem,
}

/// Caputo orders, one per component.
#[derive(Debug, Clone, PartialEq)]
pub struct Orders(Vec<f64>);

impl Orders {
    pub fn new(alpha: Vec<f64>) -> Result<Self, ModelError> {
        if alpha.is_empty() {
            return Err(ModelError::EmptySystem);
        }
        for (index, &value) in alpha.iter().enumerate() {
            if !(value > 0.0 && value <= 1.0) {
                return Err(ModelError::OrderOutOfRange { index, value });
            }
        }
        Ok(Self(alpha))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Field body: writes the value at `x` into `out`; returns `true` if a
/// negative square-root radicand had to be clamped to zero.
pub type FieldFn = dyn Fn(&[f64], &mut [f64]) -> bool + Send + Sync;

/// A vector field ℝᵈ → ℝᵈ with a declared homogeneity degree.
#[derive(Clone)]
pub struct VectorField {
    name: String,
    dim: usize,
    degree: f64,
    func: Arc<FieldFn>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("degree", &self.degree)
            .finish()
    }
}

impl VectorField {
    pub fn new<F>(name: impl Into<String>, dim: usize, degree: f64, func: F) -> Result<Self, ModelError>
    where
        F: Fn(&[f64], &mut [f64]) -> bool + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(ModelError::EmptySystem);
        }
        if !(degree >= 1.0) || !degree.is_finite() {
            return Err(ModelError::DegreeBelowOne(degree));
        }
        Ok(Self { name: name.into(), dim, degree, func: Arc::new(func) })
    }

    /// `w ↦ A w`, homogeneous of degree 1.
    pub fn linear(name: impl Into<String>, matrix: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let d = matrix.len();
        for row in &matrix {
            if row.len() != d {
                return Err(ModelError::DimensionMismatch { expected: d, got: row.len() });
            }
        }
        Self::new(name, d, 1.0, move |x, out| {
            for (o, row) in out.iter_mut().zip(&matrix) {
                *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
            }
            false
        })
    }

    /// `x ↦ ‖x‖₂^{p−1} A x`, homogeneous of degree `p`.
    pub fn homogeneous_linear(name: impl Into<String>, matrix: Vec<Vec<f64>>, degree: f64) -> Result<Self, ModelError> {
        let d = matrix.len();
        for row in &matrix {
            if row.len() != d {
                return Err(ModelError::DimensionMismatch { expected: d, got: row.len() });
            }
        }
        Self::new(name, d, degree, move |x, out| {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let scale = if degree == 1.0 { 1.0 } else { norm.powf(degree - 1.0) };
            for (o, row) in out.iter_mut().zip(&matrix) {
                *o = scale * row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            }
            false
        })
    }

    pub fn zero(dim: usize, degree: f64) -> Result<Self, ModelError> {
        Self::new("zero", dim, degree, |_, out| {
            out.fill(0.0);
            false
        })
    }

    pub fn identity(dim: usize) -> Result<Self, ModelError> {
        Self::new("identity", dim, 1.0, |x, out| {
            out.copy_from_slice(x);
            false
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> f64 {
        self.degree
    }

    /// Evaluates into `out`; returns whether a radicand was clamped.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> bool {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        (self.func)(x, out)
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, &mut out);
        out
    }
}

/// √x with negative radicands clamped to zero; sets `clamped` when that happens.
pub fn sqrt_clamped(x: f64, clamped: &mut bool) -> f64 {
    if x < 0.0 {
        *clamped = true;
        0.0
    } else {
        x.sqrt()
    }
}

/// Time-varying delay τ(t).
#[derive(Clone)]
pub enum Delay {
    Constant(f64),
    /// `mean + amplitude · sin(omega · t)`
    Sinusoid { mean: f64, amplitude: f64, omega: f64 },
    /// `(2 + sin t) / 3`
    Example1,
    /// `1/2 + 1/(2 + t²)`
    Example2,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Delay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delay::Constant(v) => write!(f, "Constant({v})"),
            Delay::Sinusoid { mean, amplitude, omega } => {
                write!(f, "Sinusoid {{ mean: {mean}, amplitude: {amplitude}, omega: {omega} }}")
            }
            Delay::Example1 => write!(f, "Example1"),
            Delay::Example2 => write!(f, "Example2"),
            Delay::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Delay {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Delay::Constant(v) => *v,
            Delay::Sinusoid { mean, amplitude, omega } => mean + amplitude * (omega * t).sin(),
            Delay::Example1 => (2.0 + t.sin()) / 3.0,
            Delay::Example2 => 0.5 + 1.0 / (2.0 + t * t),
            Delay::Custom(f) => f(t),
        }
    }

    /// Range of τ over t ≥ 0 where it is known in closed form.
    fn range(&self) -> Option<(f64, f64)> {
        match self {
            Delay::Constant(v) => Some((*v, *v)),
            Delay::Sinusoid { mean, amplitude, .. } => Some((mean - amplitude.abs(), mean + amplitude.abs())),
            Delay::Example1 => Some((1.0 / 3.0, 1.0)),
            Delay::Example2 => Some((0.5, 1.0)),
            Delay::Custom(_) => None,
        }
    }
}

/// One lagged term `g⁽ʲ⁾(w(t − τⱼ(t)))` with `0 ≤ τⱼ ≤ bound`.
#[derive(Debug, Clone)]
pub struct DelayTerm {
    pub field: VectorField,
    pub tau: Delay,
    pub bound: f64,
}

impl DelayTerm {
    pub fn new(field: VectorField, tau: Delay, bound: f64) -> Result<Self, ModelError> {
        if !(bound > 0.0) || !bound.is_finite() {
            return Err(ModelError::BadDelayBound(bound));
        }
        if let Some((lo, hi)) = tau.range() {
            if lo < 0.0 || hi > bound {
                return Err(ModelError::DelayRangeOutsideBound { lo, hi, bound });
            }
        }
        Ok(Self { field, tau, bound })
    }
}

/// Lookup of the solution history `t′ ↦ w(t′)`.
pub trait History {
    fn lookup_into(&self, t: f64, out: &mut [f64]) -> Result<(), ModelError>;
}

impl<F> History for F
where
    F: Fn(f64) -> Vec<f64>,
{
    fn lookup_into(&self, t: f64, out: &mut [f64]) -> Result<(), ModelError> {
        let v = self(t);
        if v.len() != out.len() {
            return Err(ModelError::DimensionMismatch { expected: out.len(), got: v.len() });
        }
        out.copy_from_slice(&v);
        Ok(())
    }
}

/// A complete system: orders, non-delayed field and delay terms.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    orders: Orders,
    f: VectorField,
    delays: Vec<DelayTerm>,
    r: f64,
}

impl SystemSpec {
    pub fn new(orders: Orders, f: VectorField, delays: Vec<DelayTerm>) -> Result<Self, ModelError> {
        let d = orders.len();
        if f.dim() != d {
            return Err(ModelError::DimensionMismatch { expected: d, got: f.dim() });
        }
        let p = f.degree();
        for (index, term) in delays.iter().enumerate() {
            if term.field.dim() != d {
                return Err(ModelError::DimensionMismatch { expected: d, got: term.field.dim() });
            }
            if term.field.degree() < p {
                return Err(ModelError::DelayDegreeBelowP { index, q: term.field.degree(), p });
            }
        }
        let r = delays.iter().map(|t| t.bound).fold(0.0, f64::max);
        Ok(Self { orders, f, delays, r })
    }

    pub fn dim(&self) -> usize {
        self.orders.len()
    }

    pub fn orders(&self) -> &Orders {
        &self.orders
    }

    pub fn f(&self) -> &VectorField {
        &self.f
    }

    pub fn delays(&self) -> &[DelayTerm] {
        &self.delays
    }

    /// Largest delay bound (0 without delays).
    pub fn r(&self) -> f64 {
        self.r
    }

    /// Degree p of the non-delayed field.
    pub fn p(&self) -> f64 {
        self.f.degree()
    }

    /// True when every delayed field shares the degree of `f`.
    pub fn degrees_equal(&self) -> bool {
        self.delays.iter().all(|t| t.field.degree() == self.p())
    }

    /// `f(v) + Σⱼ g⁽ʲ⁾(v)`, i.e. the right-hand side at a constant state.
    pub fn slack(&self, v: &[f64]) -> Vec<f64> {
        let mut total = self.f.eval(v);
        let mut buf = vec![0.0; self.dim()];
        for term in &self.delays {
            term.field.eval_into(v, &mut buf);
            for (t, b) in total.iter_mut().zip(&buf) {
                *t += b;
            }
        }
        total
    }

    /// Right-hand side `f(w_now) + Σⱼ g⁽ʲ⁾(history(t − τⱼ(t)))` written into
    /// `out`. `scratch` must have length `2d`. Returns whether any radicand
    /// was clamped.
    pub fn rhs_into(
        &self,
        t: f64,
        w_now: &[f64],
        history: &dyn History,
        out: &mut [f64],
        scratch: &mut [f64],
    ) -> Result<bool, ModelError> {
        let d = self.dim();
        if w_now.len() != d {
            return Err(ModelError::DimensionMismatch { expected: d, got: w_now.len() });
        }
        let mut clamped = self.f.eval_into(w_now, out);
        let (lagged, g_out) = scratch.split_at_mut(d);
        for (index, term) in self.delays.iter().enumerate() {
            let tau = term.tau.at(t);
            if !(tau >= 0.0 && tau <= term.bound) {
                return Err(ModelError::DelayOutOfRange { index, t, tau, bound: term.bound });
            }
            history.lookup_into(t - tau, lagged)?;
            clamped |= term.field.eval_into(lagged, &mut g_out[..d]);
            for (o, g) in out.iter_mut().zip(g_out.iter()) {
                *o += g;
            }
        }
        Ok(clamped)
    }

    pub fn rhs(&self, t: f64, w_now: &[f64], history: &dyn History) -> Result<Vec<f64>, ModelError> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        let mut scratch = vec![0.0; 2 * d];
        self.rhs_into(t, w_now, history, &mut out, &mut scratch)?;
        Ok(out)
    }
}

/// `max |wᵢ| / vᵢ`.
pub fn weighted_norm(w: &[f64], v: &[f64]) -> Result<f64, ModelError> {
    if w.len() != v.len() {
        return Err(ModelError::DimensionMismatch { expected: v.len(), got: w.len() });
    }
    let mut m = 0.0_f64;
    for (index, (&wi, &vi)) in w.iter().zip(v).enumerate() {
        if !(vi > 0.0) {
            return Err(ModelError::NonPositiveWeight { index, value: vi });
        }
        m = m.max(wi.abs() / vi);
    }
    Ok(m)
}

/// Central-difference Jacobian `Df(x)`; row i holds ∂fᵢ/∂xⱼ.
pub fn jacobian_fd(field: &VectorField, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let d = field.dim();
    let mut jac = vec![vec![0.0; d]; d];
    let mut xp = x.to_vec();
    let mut fp = vec![0.0; d];
    let mut fm = vec![0.0; d];
    for j in 0..d {
        xp[j] = x[j] + h;
        field.eval_into(&xp, &mut fp);
        xp[j] = x[j] - h;
        field.eval_into(&xp, &mut fm);
        xp[j] = x[j];
        for i in 0..d {
            jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

/// History on `[−r, 0]`.
#[derive(Clone)]
pub enum InitialCondition {
    Constant(Vec<f64>),
    /// Values on the uniform grid `s_k = −r + k·r/(n−1)`, linearly interpolated.
    Samples { r: f64, values: Vec<Vec<f64>> },
    Function { dim: usize, func: Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync> },
}

impl fmt::Debug for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialCondition::Constant(c) => write!(f, "Constant({c:?})"),
            InitialCondition::Samples { r, values } => write!(f, "Samples {{ r: {r}, n: {} }}", values.len()),
            InitialCondition::Function { dim, .. } => write!(f, "Function {{ dim: {dim} }}"),
        }
    }
}

impl InitialCondition {
    pub fn constant(value: Vec<f64>) -> Result<Self, ModelError> {
        check_nonneg(0.0, &value)?;
        Ok(Self::Constant(value))
    }

    pub fn samples(r: f64, values: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let Some(first) = values.first() else {
            return Err(ModelError::TooFewSamples);
        };
        let d = first.len();
        if r > 0.0 && values.len() < 2 {
            return Err(ModelError::TooFewSamples);
        }
        let n = values.len();
        for (k, row) in values.iter().enumerate() {
            if row.len() != d {
                return Err(ModelError::DimensionMismatch { expected: d, got: row.len() });
            }
            let s = if n > 1 { -r + r * k as f64 / (n - 1) as f64 } else { 0.0 };
            check_nonneg(s, row)?;
        }
        Ok(Self::Samples { r, values })
    }

    pub fn function<F>(dim: usize, func: F) -> Self
    where
        F: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    {
        Self::Function { dim, func: Arc::new(func) }
    }

    pub fn dim(&self) -> usize {
        match self {
            InitialCondition::Constant(c) => c.len(),
            InitialCondition::Samples { values, .. } => values[0].len(),
            InitialCondition::Function { dim, .. } => *dim,
        }
    }

    /// φ(s) for s ≤ 0. Samples clamp to their first row below `−r`.
    pub fn eval_into(&self, s: f64, out: &mut [f64]) {
        match self {
            InitialCondition::Constant(c) => out.copy_from_slice(c),
            InitialCondition::Samples { r, values } => {
                let n = values.len();
                if n == 1 || *r == 0.0 {
                    out.copy_from_slice(&values[n - 1]);
                    return;
                }
                let step = r / (n - 1) as f64;
                let pos = ((s + r) / step).clamp(0.0, (n - 1) as f64);
                let k = (pos.floor() as usize).min(n - 2);
                let frac = pos - k as f64;
                if frac == 0.0 {
                    out.copy_from_slice(&values[k]);
                } else {
                    for (o, (a, b)) in out.iter_mut().zip(values[k].iter().zip(&values[k + 1])) {
                        *o = a + frac * (b - a);
                    }
                }
            }
            InitialCondition::Function { func, .. } => out.copy_from_slice(&func(s)),
        }
    }

    pub fn eval(&self, s: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(s, &mut out);
        out
    }

    /// Sampling grid over `[−r, 0]` (inclusive of both ends): the stored grid
    /// for sampled histories, otherwise spacing `step`.
    pub fn sampling_grid(&self, r: f64, step: f64) -> Vec<f64> {
        match self {
            InitialCondition::Samples { r: rs, values } if values.len() > 1 => {
                let n = values.len();
                (0..n).map(|k| -rs + rs * k as f64 / (n - 1) as f64).collect()
            }
            _ => {
                if r <= 0.0 {
                    return vec![0.0];
                }
                let n = (r / step).round().max(1.0) as usize;
                let mut grid: Vec<f64> = (0..n).map(|k| -r + k as f64 * (r / n as f64)).collect();
                grid.push(0.0);
                grid
            }
        }
    }

    /// Checks φ ⪰ 0 on the sampling grid.
    pub fn validate(&self, r: f64, step: f64) -> Result<(), ModelError> {
        let mut buf = vec![0.0; self.dim()];
        for s in self.sampling_grid(r, step) {
            self.eval_into(s, &mut buf);
            check_nonneg(s, &buf)?;
        }
        Ok(())
    }

    /// ‖φ‖_v = max over the sampling grid of ‖φ(s)‖_v.
    pub fn weighted_norm(&self, v: &[f64], r: f64, step: f64) -> Result<f64, ModelError> {
        let mut buf = vec![0.0; self.dim()];
        let mut m = 0.0_f64;
        for s in self.sampling_grid(r, step) {
            self.eval_into(s, &mut buf);
            m = m.max(weighted_norm(&buf, v)?);
        }
        Ok(m)
    }
}

fn check_nonneg(s: f64, value: &[f64]) -> Result<(), ModelError> {
    for (index, &v) in value.iter().enumerate() {
        if !v.is_finite() {
            return Err(ModelError::NonFiniteHistory(s));
        }
        if v < 0.0 {
            return Err(ModelError::NegativeHistory { s, index, value: v });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinId {
    Example1,
    Example2,
}

impl BuiltinId {
    pub fn as_str(&self) -> &'static str {
        match self {
            BuiltinId::Example1 => "example1",
            BuiltinId::Example2 => "example2",
        }
    }
}

impl FromStr for BuiltinId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "example1" => Ok(BuiltinId::Example1),
            "example2" => Ok(BuiltinId::Example2),
            other => Err(ModelError::UnknownExample(other.to_string())),
        }
    }
}

impl fmt::Display for BuiltinId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A ready-made system with the weight vector printed alongside it and the
/// reference initial histories.
#[derive(Debug, Clone)]
pub struct BuiltinExample {
    pub id: BuiltinId,
    pub system: SystemSpec,
    /// The weight vector printed with the example. It is a suggestion only:
    /// for example 2 it does not satisfy f(v) + g(v) ≺ 0 and callers fall
    /// back to a search.
    pub suggested_v: Vec<f64>,
    pub phis: Vec<InitialCondition>,
}

/// Example 1 non-delayed field: (−4w₁ + 3w₂, w₁ − 3w₂).
///
/// The printed Jacobian has entry (2,2) = −2; differentiating the printed
/// field gives −3. The field is implemented as printed.
pub fn example1_f() -> VectorField {
    VectorField::new("example1.f", 2, 1.0, |w, out| {
        out[0] = -4.0 * w[0] + 3.0 * w[1];
        out[1] = w[0] - 3.0 * w[1];
        false
    })
    .expect("static field")
}

/// Example 1 delayed field: (w₁² + 3√(w₁³w₂), w₁w₂ + 2w₂²).
pub fn example1_g() -> VectorField {
    VectorField::new("example1.g", 2, 2.0, |w, out| {
        let mut clamped = false;
        let root = sqrt_clamped(w[0] * w[0] * w[0] * w[1], &mut clamped);
        out[0] = w[0] * w[0] + 3.0 * root;
        out[1] = w[0] * w[1] + 2.0 * w[1] * w[1];
        clamped
    })
    .expect("static field")
}

/// Example 2 non-delayed field: (−8w₁² + w₂², 2w₁² − 9w₂²).
pub fn example2_f() -> VectorField {
    VectorField::new("example2.f", 2, 2.0, |w, out| {
        out[0] = -8.0 * w[0] * w[0] + w[1] * w[1];
        out[1] = 2.0 * w[0] * w[0] - 9.0 * w[1] * w[1];
        false
    })
    .expect("static field")
}

/// Example 2 delayed field: (3w₁w₂ + w₂², (w₁ + 2w₂)√(w₁² + 7w₂²)).
pub fn example2_g() -> VectorField {
    VectorField::new("example2.g", 2, 2.0, |w, out| {
        let mut clamped = false;
        let root = sqrt_clamped(w[0] * w[0] + 7.0 * w[1] * w[1], &mut clamped);
        out[0] = 3.0 * w[0] * w[1] + w[1] * w[1];
        out[1] = (w[0] + 2.0 * w[1]) * root;
        clamped
    })
    .expect("static field")
}

pub fn builtin_example(id: BuiltinId) -> BuiltinExample {
    let (orders, f, g, tau, suggested_v, phis) = match id {
        BuiltinId::Example1 => (
            vec![0.71, 0.61],
            example1_f(),
            example1_g(),
            Delay::Example1,
            vec![0.3, 0.2],
            vec![vec![0.2, 0.15], vec![1.2, 0.4]],
        ),
        BuiltinId::Example2 => (
            vec![0.95, 0.7],
            example2_f(),
            example2_g(),
            Delay::Example2,
            vec![1.0, 1.0],
            vec![vec![0.2, 0.4], vec![2.3, 0.2]],
        ),
    };
    let orders = Orders::new(orders).expect("static orders");
    let term = DelayTerm::new(g, tau, 1.0).expect("static delay");
    let system = SystemSpec::new(orders, f, vec![term]).expect("static system");
    let phis = phis.into_iter().map(|p| InitialCondition::constant(p).expect("static phi")).collect();
    BuiltinExample { id, system, suggested_v, phis }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_history(c: Vec<f64>) -> impl Fn(f64) -> Vec<f64> {
        move |_| c.clone()
    }

    #[test]
    fn orders_validation() {
        assert!(Orders::new(vec![0.5, 1.0]).is_ok());
        assert_eq!(Orders::new(vec![1.2]), Err(ModelError::OrderOutOfRange { index: 0, value: 1.2 }));
        assert!(Orders::new(vec![0.0]).is_err());
        assert_eq!(Orders::new(vec![]), Err(ModelError::EmptySystem));
    }

    #[test]
    fn weighted_norm_examples() {
        assert!((weighted_norm(&[0.2, 0.15], &[0.3, 0.2]).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(weighted_norm(&[0.0, 0.0], &[0.3, 0.2]).unwrap(), 0.0);
        assert_eq!(weighted_norm(&[0.3, 0.2], &[0.3, 0.2]).unwrap(), 1.0);
        assert!(matches!(weighted_norm(&[1.0], &[1.0, 2.0]), Err(ModelError::DimensionMismatch { .. })));
        assert!(matches!(weighted_norm(&[1.0], &[0.0]), Err(ModelError::NonPositiveWeight { .. })));
    }

    #[test]
    fn example1_rhs_at_suggested_v() {
        let ex = builtin_example(BuiltinId::Example1);
        let v = vec![0.3, 0.2];
        let h = constant_history(v.clone());
        let out = ex.system.rhs(0.7, &v, &h).unwrap();
        // 0.09 + 3√0.0054 − 0.6 and 0.06 + 0.08 − 0.3
        let first = 0.09 + 3.0 * 0.0054f64.sqrt() - 0.6;
        assert!((out[0] - first).abs() < 1e-15);
        assert!((out[0] - -0.289_545_4).abs() < 1e-6);
        assert!((out[1] - -0.16).abs() < 1e-12);
    }

    #[test]
    fn example2_rhs_at_ones() {
        let ex = builtin_example(BuiltinId::Example2);
        let h = constant_history(vec![1.0, 1.0]);
        let out = ex.system.rhs(0.0, &[1.0, 1.0], &h).unwrap();
        // f = (−7, −7), g = (4, 3√8)
        assert!((out[0] - -3.0).abs() < 1e-14);
        assert!((out[1] - (-7.0 + 3.0 * 8f64.sqrt())).abs() < 1e-14);
        assert!(out[1] > 1.48);
    }

    #[test]
    fn zero_fields_give_zero_rhs() {
        let orders = Orders::new(vec![0.5, 0.5]).unwrap();
        let g = DelayTerm::new(VectorField::zero(2, 1.0).unwrap(), Delay::Constant(0.5), 1.0).unwrap();
        let sys = SystemSpec::new(orders, VectorField::zero(2, 1.0).unwrap(), vec![g]).unwrap();
        let h = constant_history(vec![3.0, 4.0]);
        assert_eq!(sys.rhs(1.0, &[1.0, 2.0], &h).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn rhs_without_delays_is_f() {
        let orders = Orders::new(vec![0.5, 0.9]).unwrap();
        let f = example1_f();
        let sys = SystemSpec::new(orders, f.clone(), vec![]).unwrap();
        let h = |_t: f64| -> Vec<f64> { panic!("no history needed") };
        let w = [0.37, 1.91];
        assert_eq!(sys.rhs(2.0, &w, &h).unwrap(), f.eval(&w));
        assert_eq!(sys.r(), 0.0);
    }

    #[test]
    fn jacobians_of_builtins() {
        let j = jacobian_fd(&example1_f(), &[1.0, 1.0], 1e-5);
        let want = [[-4.0, 3.0], [1.0, -3.0]];
        for i in 0..2 {
            for k in 0..2 {
                assert!((j[i][k] - want[i][k]).abs() < 1e-6);
            }
        }
        let j = jacobian_fd(&example2_f(), &[1.0, 1.0], 1e-5);
        let want = [[-16.0, 2.0], [4.0, -18.0]];
        for i in 0..2 {
            for k in 0..2 {
                assert!((j[i][k] - want[i][k]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn jacobian_of_linear_field_is_matrix() {
        let a = vec![vec![-1.0, 0.5, 0.0], vec![2.0, -3.0, 1.0], vec![0.0, 0.25, -2.0]];
        let f = VectorField::linear("lin", a.clone()).unwrap();
        let j = jacobian_fd(&f, &[0.3, 7.0, 2.0], 1e-3);
        for i in 0..3 {
            for k in 0..3 {
                assert!((j[i][k] - a[i][k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn builtin_parameters() {
        let e1 = builtin_example(BuiltinId::Example1);
        assert_eq!(e1.system.orders().as_slice(), &[0.71, 0.61]);
        assert_eq!(e1.system.r(), 1.0);
        assert_eq!(e1.system.p(), 1.0);
        assert_eq!(e1.system.delays()[0].field.degree(), 2.0);
        assert!(!e1.system.degrees_equal());
        let e2 = builtin_example(BuiltinId::Example2);
        assert_eq!(e2.system.orders().as_slice(), &[0.95, 0.7]);
        assert_eq!(e2.system.r(), 1.0);
        assert!(e2.system.degrees_equal());
        assert!("example3".parse::<BuiltinId>().is_err());
    }

    #[test]
    fn delays_stay_in_range() {
        for d in [Delay::Example1, Delay::Example2] {
            for k in 0..10_000 {
                let t = k as f64 * 0.01;
                let tau = d.at(t);
                assert!((0.0..=1.0).contains(&tau));
            }
        }
        assert!(DelayTerm::new(example1_g(), Delay::Constant(2.0), 1.0).is_err());
    }

    #[test]
    fn sqrt_radicand_clamps() {
        let g = example1_g();
        let mut out = [0.0; 2];
        assert!(g.eval_into(&[1.0, -1e-12], &mut out));
        assert!(!g.eval_into(&[1.0, 1.0], &mut out));
    }

    #[test]
    fn sampled_history_interpolates() {
        let phi = InitialCondition::samples(1.0, vec![vec![0.0, 1.0], vec![1.0, 1.0], vec![2.0, 3.0]]).unwrap();
        assert_eq!(phi.eval(-1.0), vec![0.0, 1.0]);
        assert_eq!(phi.eval(-0.5), vec![1.0, 1.0]);
        assert_eq!(phi.eval(-0.25), vec![1.5, 2.0]);
        assert_eq!(phi.eval(0.0), vec![2.0, 3.0]);
        assert!(InitialCondition::samples(1.0, vec![vec![-1.0], vec![0.0]]).is_err());
        let n = phi.weighted_norm(&[1.0, 1.0], 1.0, 0.1).unwrap();
        assert_eq!(n, 3.0);
    }

    #[test]
    fn degree_order_enforced() {
        let orders = Orders::new(vec![0.5, 0.5]).unwrap();
        let g = DelayTerm::new(example1_f(), Delay::Constant(0.5), 1.0).unwrap();
        assert!(matches!(
            SystemSpec::new(orders, example2_f(), vec![g]),
            Err(ModelError::DelayDegreeBelowP { .. })
        ));
    }
}
