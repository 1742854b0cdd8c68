//! Derivative-free minimisers.
//!
//! [`Method::Cobyla`] is an unconstrained implementation of Powell's
//! linear-approximation trust-region method (COBYLA, 1994): the objective is
//! interpolated linearly on a simplex of `n + 1` points, a step of length
//! `rho` is taken along the negative model gradient, and the simplex is kept
//! well shaped by occasional geometry steps. `rho` is halved when steps stop
//! paying off, down to `convergence_tol`.
//!
//! [`Method::NelderMead`] is the classic reflection/expansion/contraction
//! simplex search, kept as a fallback.
//!
//! Every objective evaluation is recorded in the [`OptimizationTrace`]; the
//! trace is what the tail statistics average over.

use std::error::Error as StdError;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error("objective failed at iteration {iteration}: {source}")]
    Objective {
        iteration: usize,
        #[source]
        source: Box<dyn StdError + Send + Sync>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cobyla,
    #[serde(rename = "simplex")]
    NelderMead,
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cobyla" => Ok(Method::Cobyla),
            "simplex" | "nelder-mead" => Ok(Method::NelderMead),
            other => Err(format!("unknown optimizer '{other}' (cobyla|simplex)")),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Cobyla => "cobyla",
            Method::NelderMead => "simplex",
        })
    }
}

/// Optimiser settings. `initial_step` is in radians; `convergence_tol` is
/// the final trust-region radius (COBYLA) or simplex diameter (Nelder–Mead).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizerConfig {
    pub method: Method,
    /// Cap on objective evaluations.
    pub max_iterations: usize,
    pub initial_step: f64,
    pub convergence_tol: f64,
    pub seed: u64,
}

impl OptimizerConfig {
    /// Defaults for a noiseless objective.
    pub fn exact() -> Self {
        Self {
            method: Method::Cobyla,
            max_iterations: 50_000,
            initial_step: 0.5,
            convergence_tol: 1e-6,
            seed: 0,
        }
    }

    /// Defaults for a shot-noise objective.
    pub fn sampled() -> Self {
        Self {
            max_iterations: 300,
            convergence_tol: 1e-4,
            ..Self::exact()
        }
    }

    fn validate(&self) -> Result<(), OptimizeError> {
        if self.max_iterations == 0 {
            return Err(OptimizeError::InvalidConfig(
                "max_iterations must be positive".into(),
            ));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(OptimizeError::InvalidConfig(
                "initial_step must be positive".into(),
            ));
        }
        if !(self.convergence_tol > 0.0 && self.convergence_tol.is_finite()) {
            return Err(OptimizeError::InvalidConfig(
                "convergence_tol must be positive".into(),
            ));
        }
        if self.convergence_tol > self.initial_step {
            return Err(OptimizeError::InvalidConfig(
                "convergence_tol must not exceed initial_step".into(),
            ));
        }
        Ok(())
    }
}

/// One objective evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub parameters: Vec<f64>,
    pub energy: f64,
    pub stderr: f64,
}

/// Record of a minimisation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationTrace {
    pub evaluations: Vec<Evaluation>,
    pub best_parameters: Vec<f64>,
    pub best_energy: f64,
    pub iterations_used: usize,
    pub converged: bool,
}

impl OptimizationTrace {
    pub fn energies(&self) -> Vec<f64> {
        self.evaluations.iter().map(|e| e.energy).collect()
    }

    /// Lowest energy seen up to and including each evaluation.
    pub fn running_best(&self) -> Vec<f64> {
        self.evaluations
            .iter()
            .scan(f64::INFINITY, |best, e| {
                *best = best.min(e.energy);
                Some(*best)
            })
            .collect()
    }
}

/// Mean and population standard deviation of the last `window` energies.
pub fn tail_statistics(trace: &OptimizationTrace, window: usize) -> (f64, f64) {
    let energies = trace.energies();
    assert!(!energies.is_empty(), "trace is empty");
    let tail = &energies[energies.len().saturating_sub(window.max(1))..];
    let n = tail.len() as f64;
    let mean = tail.iter().sum::<f64>() / n;
    let variance = tail.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    (mean, variance.sqrt())
}

/// Wraps the objective, records the trace and enforces the budget.
struct Recorder<F> {
    objective: F,
    trace: Vec<Evaluation>,
    budget: usize,
}

/// Signals that the evaluation budget is spent.
struct Exhausted;

impl<F, E> Recorder<F>
where
    F: FnMut(&[f64]) -> Result<(f64, f64), E>,
    E: StdError + Send + Sync + 'static,
{
    fn eval(&mut self, x: &DVector<f64>) -> Result<Result<f64, Exhausted>, OptimizeError> {
        if self.trace.len() >= self.budget {
            return Ok(Err(Exhausted));
        }
        let parameters: Vec<f64> = x.iter().copied().collect();
        let (energy, stderr) =
            (self.objective)(&parameters).map_err(|e| OptimizeError::Objective {
                iteration: self.trace.len(),
                source: Box::new(e),
            })?;
        self.trace.push(Evaluation {
            parameters,
            energy,
            stderr,
        });
        Ok(Ok(energy))
    }

    fn finish(self, converged: bool) -> OptimizationTrace {
        let best = self
            .trace
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.energy.total_cmp(&b.1.energy).then(a.0.cmp(&b.0)))
            .map(|(_, e)| e.clone())
            .expect("at least one evaluation");
        OptimizationTrace {
            iterations_used: self.trace.len(),
            evaluations: self.trace,
            best_parameters: best.parameters,
            best_energy: best.energy,
            converged,
        }
    }
}

/// Minimises `objective`, starting from `initial`. The objective returns
/// `(energy, stderr)`; errors are reported with the evaluation index.
pub fn minimize<F, E>(
    objective: F,
    initial: &[f64],
    config: &OptimizerConfig,
) -> Result<OptimizationTrace, OptimizeError>
where
    F: FnMut(&[f64]) -> Result<(f64, f64), E>,
    E: StdError + Send + Sync + 'static,
{
    config.validate()?;
    if initial.is_empty() {
        return Err(OptimizeError::InvalidConfig(
            "parameter vector is empty".into(),
        ));
    }
    let mut recorder = Recorder {
        objective,
        trace: Vec::new(),
        budget: config.max_iterations,
    };
    let x0 = DVector::from_column_slice(initial);
    let converged = match config.method {
        Method::Cobyla => cobyla(&mut recorder, x0, config)?,
        Method::NelderMead => nelder_mead(&mut recorder, x0, config)?,
    };
    Ok(recorder.finish(converged))
}

macro_rules! eval_or_stop {
    ($rec:expr, $x:expr) => {
        match $rec.eval($x)? {
            Ok(f) => f,
            Err(Exhausted) => return Ok(false),
        }
    };
}

/// Simplex acceptability thresholds, relative to `rho`.
const ALPHA: f64 = 0.25;
const BETA: f64 = 2.1;
/// Geometry step length, relative to `rho`.
const GAMMA: f64 = 0.5;
/// Distance beyond which a vertex is dropped, relative to `rho`.
const DELTA: f64 = 1.1;

fn cobyla<F, E>(
    rec: &mut Recorder<F>,
    x0: DVector<f64>,
    config: &OptimizerConfig,
) -> Result<bool, OptimizeError>
where
    F: FnMut(&[f64]) -> Result<(f64, f64), E>,
    E: StdError + Send + Sync + 'static,
{
    let n = x0.len();
    let rhoend = config.convergence_tol;
    let mut rho = config.initial_step;

    // Simplex: base point plus offsets sim[:, j] to the other vertices.
    let mut base = x0;
    let mut fbase = eval_or_stop!(rec, &base);
    let mut sim = DMatrix::<f64>::identity(n, n) * rho;
    let mut fval = DVector::<f64>::zeros(n);
    for j in 0..n {
        let x = &base + sim.column(j);
        let f = eval_or_stop!(rec, &x);
        fval[j] = f;
        if f < fbase {
            // The new point becomes the base; the old base takes its slot.
            let shift = sim.column(j).clone_owned();
            for k in 0..n {
                let column = sim.column(k) - &shift;
                sim.set_column(k, &column);
            }
            sim.set_column(j, &-shift.clone());
            base += shift;
            fval[j] = fbase;
            fbase = f;
        }
    }

    let mut ibrnch = false;
    loop {
        // Make the best vertex the base.
        if let Some(j) = (0..n)
            .filter(|&j| fval[j] < fbase)
            .min_by(|&a, &b| fval[a].total_cmp(&fval[b]))
        {
            let shift = sim.column(j).clone_owned();
            for k in 0..n {
                let column = sim.column(k) - &shift;
                sim.set_column(k, &column);
            }
            sim.set_column(j, &-shift.clone());
            base += shift;
            std::mem::swap(&mut fval[j], &mut fbase);
        }

        // Rows of `simi` are dual to the offsets: simi * sim = I.
        let Some(simi) = sim.clone().try_inverse() else {
            // Degenerate simplex: rebuild it around the base point.
            sim = DMatrix::identity(n, n) * rho;
            for j in 0..n {
                fval[j] = eval_or_stop!(rec, &(&base + sim.column(j)));
            }
            ibrnch = false;
            continue;
        };
        // Linear model f(base + d) ≈ fbase + g·d.
        let df = DVector::from_fn(n, |j, _| fval[j] - fbase);
        let g = simi.transpose() * df;

        let vsig: Vec<f64> = (0..n).map(|j| 1.0 / simi.row(j).norm()).collect();
        let veta: Vec<f64> = (0..n).map(|j| sim.column(j).norm()).collect();
        let (parsig, pareta) = (ALPHA * rho, BETA * rho);
        let acceptable = (0..n).all(|j| vsig[j] >= parsig && veta[j] <= pareta);

        if !ibrnch && !acceptable {
            // Geometry step: replace the worst-shaped vertex.
            let jdrop = match (0..n)
                .filter(|&j| veta[j] > pareta)
                .max_by(|&a, &b| veta[a].total_cmp(&veta[b]))
            {
                Some(j) => j,
                None => (0..n)
                    .filter(|&j| vsig[j] < parsig)
                    .min_by(|&a, &b| vsig[a].total_cmp(&vsig[b]))
                    .expect("unacceptable simplex has a bad vertex"),
            };
            let mut dx = simi.row(jdrop).transpose() * (GAMMA * rho * vsig[jdrop]);
            if g.dot(&dx) > 0.0 {
                dx = -dx;
            }
            let f = eval_or_stop!(rec, &(&base + &dx));
            sim.set_column(jdrop, &dx);
            fval[jdrop] = f;
            continue;
        }

        // Trust-region step along the negative model gradient.
        let gnorm = g.norm();
        let mut good_step = false;
        if gnorm > 0.0 && gnorm.is_finite() {
            let dx = &g * (-rho / gnorm);
            let prerem = rho * gnorm;
            let fnew = eval_or_stop!(rec, &(&base + &dx));
            let trured = fbase - fnew;

            // Vertex to drop: the one whose dual coordinate of dx is largest,
            // overridden by any vertex that is too far away.
            let mut ratio = if trured <= 0.0 { 1.0 } else { 0.0 };
            let mut jdrop = None;
            let mut sigbar = vec![0.0; n];
            for j in 0..n {
                let temp = simi.row(j).transpose().dot(&dx).abs();
                if temp > ratio {
                    jdrop = Some(j);
                    ratio = temp;
                }
                sigbar[j] = temp * vsig[j];
            }
            let mut edgmax = DELTA * rho;
            for j in 0..n {
                if sigbar[j] >= parsig || sigbar[j] >= vsig[j] {
                    let distance = if trured > 0.0 {
                        (&dx - sim.column(j)).norm()
                    } else {
                        veta[j]
                    };
                    if distance > edgmax {
                        jdrop = Some(j);
                        edgmax = distance;
                    }
                }
            }
            if let Some(j) = jdrop {
                sim.set_column(j, &dx);
                fval[j] = fnew;
                if trured > 0.0 && trured >= 0.1 * prerem {
                    good_step = true;
                }
            }
        }
        if good_step {
            ibrnch = true;
            continue;
        }
        if !acceptable {
            ibrnch = false;
            continue;
        }
        if rho <= rhoend {
            return Ok(true);
        }
        rho *= 0.5;
        if rho <= 1.5 * rhoend {
            rho = rhoend;
        }
        ibrnch = true;
    }
}

fn nelder_mead<F, E>(
    rec: &mut Recorder<F>,
    x0: DVector<f64>,
    config: &OptimizerConfig,
) -> Result<bool, OptimizeError>
where
    F: FnMut(&[f64]) -> Result<(f64, f64), E>,
    E: StdError + Send + Sync + 'static,
{
    const REFLECT: f64 = 1.0;
    const EXPAND: f64 = 2.0;
    const CONTRACT: f64 = 0.5;
    const SHRINK: f64 = 0.5;

    let n = x0.len();
    let mut points = vec![x0.clone()];
    let mut values = vec![eval_or_stop!(rec, &x0)];
    for j in 0..n {
        let mut x = x0.clone();
        x[j] += config.initial_step;
        values.push(eval_or_stop!(rec, &x));
        points.push(x);
    }
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        points = order.iter().map(|&i| points[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let diameter = points[1..]
            .iter()
            .map(|p| (p - &points[0]).norm())
            .fold(0.0, f64::max);
        let spread = values[n] - values[0];
        if diameter < config.convergence_tol || spread <= 1e-15 * (1.0 + values[0].abs()) {
            return Ok(true);
        }

        let centroid = points[..n].iter().fold(DVector::zeros(n), |acc, p| acc + p) / n as f64;
        let reflected = &centroid + (&centroid - &points[n]) * REFLECT;
        let fr = eval_or_stop!(rec, &reflected);
        if fr < values[0] {
            let expanded = &centroid + (&reflected - &centroid) * EXPAND;
            let fe = eval_or_stop!(rec, &expanded);
            if fe < fr {
                points[n] = expanded;
                values[n] = fe;
            } else {
                points[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            points[n] = reflected;
            values[n] = fr;
            continue;
        }
        let (target, ft) = if fr < values[n] {
            (&centroid + (&reflected - &centroid) * CONTRACT, fr)
        } else {
            (&centroid + (&points[n] - &centroid) * CONTRACT, values[n])
        };
        let fc = eval_or_stop!(rec, &target);
        if fc < ft {
            points[n] = target;
            values[n] = fc;
            continue;
        }
        for j in 1..=n {
            points[j] = &points[0] + (&points[j] - &points[0]) * SHRINK;
            values[j] = eval_or_stop!(rec, &points[j]);
        }
    }
}
