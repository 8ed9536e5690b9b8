//! Dense numerical solutions on a uniform grid, with history lookup and CSV
//! serialization.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{History, InitialCondition, ModelError};

/// Something the solver had to patch up while integrating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverWarning {
    /// States in `[−1e−9, 0)` were set to zero. `first_t` is the first grid
    /// time this happened.
    NegativeClamp { first_t: f64, count: usize, most_negative: f64 },
    /// A vector field met a negative square-root radicand and used zero.
    RadicandClamp { first_t: f64, count: usize },
}

/// Solution `Φ(·, φ)` on `[−r, T]`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    step: f64,
    dim: usize,
    r: f64,
    phi: InitialCondition,
    states: Vec<f64>,
    warnings: Vec<SolverWarning>,
}

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV header must start with \"t\" followed by w_1..w_d, got {0:?}")]
    BadHeader(String),
    #[error("line {line}: {msg}")]
    BadRow { line: usize, msg: String },
    #[error("CSV has no rows at t >= 0")]
    NoStates,
    #[error("grid is not uniform near t = {0}")]
    NonUniform(f64),
    #[error("initial history: {0}")]
    History(#[from] ModelError),
}

impl Trajectory {
    pub(crate) fn with_capacity(step: f64, dim: usize, r: f64, phi: InitialCondition, steps: usize) -> Self {
        Self { step, dim, r, phi, states: Vec::with_capacity((steps + 1) * dim), warnings: Vec::new() }
    }

    /// Builds a trajectory from stored grid states (row `k` is the state at
    /// `k·step`).
    pub fn from_states(step: f64, r: f64, phi: InitialCondition, states: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let dim = phi.dim();
        let mut flat = Vec::with_capacity(states.len() * dim);
        for row in &states {
            if row.len() != dim {
                return Err(ModelError::DimensionMismatch { expected: dim, got: row.len() });
            }
            flat.extend_from_slice(row);
        }
        Ok(Self { step, dim, r, phi, states: flat, warnings: Vec::new() })
    }

    pub(crate) fn push_state(&mut self, w: &[f64]) {
        debug_assert_eq!(w.len(), self.dim);
        self.states.extend_from_slice(w);
    }

    pub(crate) fn set_warnings(&mut self, warnings: Vec<SolverWarning>) {
        self.warnings = warnings;
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn phi(&self) -> &InitialCondition {
        &self.phi
    }

    pub fn warnings(&self) -> &[SolverWarning] {
        &self.warnings
    }

    /// Number of stored grid points (`N + 1` for a complete solve).
    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    pub fn last_time(&self) -> f64 {
        self.time(self.len().saturating_sub(1))
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.states.chunks_exact(self.dim).enumerate().map(move |(k, w)| (self.time(k), w))
    }

    /// `Φ(t)` for `t ∈ [−r, last_time]`: φ on the history interval, exact
    /// stored values at grid points, linear interpolation in between.
    pub fn lookup_into(&self, t: f64, out: &mut [f64]) -> Result<(), ModelError> {
        let hi = self.last_time();
        let slack = 1e-12 * (1.0 + hi.abs());
        if t < -self.r - slack || t > hi + slack || t.is_nan() {
            return Err(ModelError::LookupOutOfRange { t, lo: -self.r, hi });
        }
        if t < 0.0 {
            self.phi.eval_into(t, out);
            return Ok(());
        }
        let pos = t / self.step;
        let nearest = pos.round();
        let last = self.len() - 1;
        if (pos - nearest).abs() <= 1e-9 {
            out.copy_from_slice(self.state((nearest as usize).min(last)));
            return Ok(());
        }
        let k = (pos.floor() as usize).min(last.saturating_sub(1));
        let frac = pos - k as f64;
        let (a, b) = (self.state(k), self.state(k + 1));
        for (o, (x, y)) in out.iter_mut().zip(a.iter().zip(b)) {
            *o = x + frac * (y - x);
        }
        Ok(())
    }

    pub fn lookup(&self, t: f64) -> Result<Vec<f64>, ModelError> {
        let mut out = vec![0.0; self.dim];
        self.lookup_into(t, &mut out)?;
        Ok(out)
    }

    /// Writes `t,w_1,…,w_d`: history rows on the φ sampling grid for
    /// `s ∈ [−r, 0)`, then one row per grid point. Floats carry 17
    /// significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = String::from("t");
        for i in 1..=self.dim {
            header.push_str(&format!(",w_{i}"));
        }
        writeln!(out, "{header}")?;
        let mut buf = vec![0.0; self.dim];
        for s in self.phi.sampling_grid(self.r, self.step) {
            if s >= 0.0 {
                continue;
            }
            self.phi.eval_into(s, &mut buf);
            write_row(&mut out, s, &buf)?;
        }
        for (t, w) in self.states() {
            write_row(&mut out, t, w)?;
        }
        Ok(())
    }

    /// Reads a CSV produced by [`Trajectory::write_csv`]. The history rows
    /// become a sampled initial condition.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self, CsvError> {
        let mut lines = input.lines();
        let header = lines.next().ok_or(CsvError::NoStates)??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 2 || cols[0] != "t" || cols[1..].iter().enumerate().any(|(i, c)| *c != format!("w_{}", i + 1)) {
            return Err(CsvError::BadHeader(header));
        }
        let dim = cols.len() - 1;
        let mut history: Vec<(f64, Vec<f64>)> = Vec::new();
        let mut grid: Vec<(f64, Vec<f64>)> = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line = line?;
            let line_no = idx + 2;
            if line.trim().is_empty() {
                continue;
            }
            let mut vals = Vec::with_capacity(dim + 1);
            for field in line.split(',') {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|e| CsvError::BadRow { line: line_no, msg: format!("{e}: {field:?}") })?;
                vals.push(v);
            }
            if vals.len() != dim + 1 {
                return Err(CsvError::BadRow { line: line_no, msg: format!("expected {} columns, got {}", dim + 1, vals.len()) });
            }
            let t = vals[0];
            let w = vals[1..].to_vec();
            if t < 0.0 {
                if !grid.is_empty() {
                    return Err(CsvError::BadRow { line: line_no, msg: "negative time after t >= 0 rows".into() });
                }
                history.push((t, w));
            } else {
                grid.push((t, w));
            }
        }
        if grid.is_empty() {
            return Err(CsvError::NoStates);
        }
        let step = if grid.len() > 1 { grid[1].0 - grid[0].0 } else { 1.0 };
        check_uniform(grid.iter().map(|(t, _)| *t), step)?;
        let phi = if history.is_empty() {
            InitialCondition::constant(grid[0].1.clone())?
        } else {
            let r = -history[0].0;
            let hstep = if history.len() > 1 { history[1].0 - history[0].0 } else { r };
            let mut times: Vec<f64> = history.iter().map(|(t, _)| *t).collect();
            times.push(0.0);
            check_uniform(times.into_iter(), hstep)?;
            let mut values: Vec<Vec<f64>> = history.into_iter().map(|(_, w)| w).collect();
            values.push(grid[0].1.clone());
            InitialCondition::samples(r, values)?
        };
        let r = match &phi {
            InitialCondition::Samples { r, .. } => *r,
            _ => 0.0,
        };
        Ok(Self::from_states(step, r, phi, grid.into_iter().map(|(_, w)| w).collect())?)
    }
}

impl History for Trajectory {
    fn lookup_into(&self, t: f64, out: &mut [f64]) -> Result<(), ModelError> {
        Trajectory::lookup_into(self, t, out)
    }
}

fn write_row<W: Write>(out: &mut W, t: f64, w: &[f64]) -> std::io::Result<()> {
    write!(out, "{}", fmt17(t))?;
    for v in w {
        write!(out, ",{}", fmt17(*v))?;
    }
    writeln!(out)
}

/// 17 significant digits, scientific notation.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn check_uniform(times: impl Iterator<Item = f64>, step: f64) -> Result<(), CsvError> {
    let mut prev: Option<f64> = None;
    for t in times {
        if let Some(p) = prev {
            if ((t - p) - step).abs() > 1e-6 * step.abs().max(1e-300) || !(step > 0.0) {
                return Err(CsvError::NonUniform(t));
            }
        }
        prev = Some(t);
    }
    Ok(())
}
