//! Limited-memory BFGS minimizer with a strong-Wolfe line search.
//!
//! The search direction comes from the two-loop recursion over the most
//! recent `memory` curvature pairs `(s, y)`, with the initial inverse
//! Hessian scaled by `sᵀy / yᵀy` of the newest pair. Step lengths satisfy
//! the strong Wolfe conditions: bracketing from a unit first trial, then
//! zooming with safeguarded cubic interpolation.
//!
//! Objective evaluations that return a non-finite value or gradient are
//! treated as rejected trial points: the line search shrinks the step.
//! Errors returned by the objective abort the run and carry the best point
//! reached so far.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbfgsConfig {
    /// Number of stored curvature pairs.
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when the max-norm of the gradient falls to this value.
    pub gradient_tolerance: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    /// Objective evaluations allowed per line search.
    pub max_line_search_steps: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iterations: 200,
            gradient_tolerance: 1e-6,
            c1: 1e-4,
            c2: 0.9,
            max_line_search_steps: 40,
        }
    }
}

impl LbfgsConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(format!(
                "Wolfe constants must satisfy 0 < c1 < c2 < 1 (c1 = {}, c2 = {})",
                self.c1, self.c2
            ));
        }
        if self.memory == 0 {
            return Err("memory must be at least 1".into());
        }
        if self.max_line_search_steps == 0 {
            return Err("max_line_search_steps must be at least 1".into());
        }
        if !(self.gradient_tolerance >= 0.0) {
            return Err("gradient_tolerance must be nonnegative".into());
        }
        Ok(())
    }
}

/// One objective evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveEval {
    pub point: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
}

impl ObjectiveEval {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.gradient.iter().all(|g| g.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    LineSearchFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub value: f64,
    pub gradient_max_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    pub trace: Vec<TraceEntry>,
    pub config: LbfgsConfig,
}

#[derive(Debug, Error)]
pub enum LbfgsError<E: std::error::Error + 'static> {
    #[error("invalid optimizer configuration: {0}")]
    Config(String),
    #[error("objective is not finite at the starting point")]
    NonFiniteStart,
    #[error("objective returned {got} gradient entries for a {expected}-dimensional point")]
    GradientLength { expected: usize, got: usize },
    #[error("objective failed after {iterations} iterations: {source}")]
    Objective {
        #[source]
        source: E,
        best_point: Vec<f64>,
        best_value: f64,
        iterations: usize,
    },
}

/// A stored `(s, y)` pair: step taken and the resulting gradient change.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvaturePair {
    pub s: Vec<f64>,
    pub y: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Two-loop recursion: returns `-H g` where `H` is the limited-memory
/// inverse Hessian built from `history` (oldest first). Pairs must have
/// `sᵀy > 0`.
pub fn two_loop_direction(gradient: &[f64], history: &[CurvaturePair]) -> Vec<f64> {
    let mut q = gradient.to_vec();
    let mut alphas = vec![0.0; history.len()];
    for (i, pair) in history.iter().enumerate().rev() {
        let rho = 1.0 / dot(&pair.y, &pair.s);
        alphas[i] = rho * dot(&pair.s, &q);
        axpy(-alphas[i], &pair.y, &mut q);
    }
    let gamma = history
        .last()
        .map(|p| dot(&p.s, &p.y) / dot(&p.y, &p.y))
        .unwrap_or(1.0);
    for v in q.iter_mut() {
        *v *= gamma;
    }
    for (i, pair) in history.iter().enumerate() {
        let rho = 1.0 / dot(&pair.y, &pair.s);
        let beta = rho * dot(&pair.y, &q);
        axpy(alphas[i] - beta, &pair.s, &mut q);
    }
    for v in q.iter_mut() {
        *v = -*v;
    }
    q
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    alpha: f64,
    value: f64,
    slope: f64,
}

impl Sample {
    fn finite(&self) -> bool {
        self.value.is_finite() && self.slope.is_finite()
    }
}

enum LineSearch {
    Accepted(ObjectiveEval),
    /// Carries the lowest point seen below the starting value, if any.
    Failed(Option<ObjectiveEval>),
}

/// Minimizer of the cubic matching values and slopes at `a` and `b`, kept
/// inside the central 80% of the interval; bisection when the cubic is
/// unusable. When `flat` the two values differ only by rounding, so the
/// secant root of the slopes is used instead.
fn cubic_step(a: &Sample, b: &Sample, flat: bool) -> f64 {
    let (lo, hi) = (a.alpha.min(b.alpha), a.alpha.max(b.alpha));
    let margin = 0.1 * (hi - lo);
    let mid = 0.5 * (lo + hi);
    if !(a.finite() && b.finite()) {
        return mid;
    }
    let t = if flat {
        a.alpha - a.slope * (b.alpha - a.alpha) / (b.slope - a.slope)
    } else {
        let d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.alpha - b.alpha);
        let disc = d1 * d1 - a.slope * b.slope;
        if !(disc >= 0.0) {
            return mid;
        }
        let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
        b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2)
    };
    if t.is_finite() {
        t.clamp(lo + margin, hi - margin)
    } else {
        mid
    }
}

struct Searcher<'a, F> {
    objective: &'a mut F,
    x: &'a [f64],
    dir: &'a [f64],
    f0: f64,
    slope0: f64,
    cfg: &'a LbfgsConfig,
    evals: usize,
    best: Option<ObjectiveEval>,
}

impl<F, E> Searcher<'_, F>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), E>,
{
    fn eval(&mut self, alpha: f64) -> Result<(Sample, ObjectiveEval), E> {
        self.evals += 1;
        let point: Vec<f64> = self.x.iter().zip(self.dir).map(|(x, d)| x + alpha * d).collect();
        let (value, gradient) = (self.objective)(&point)?;
        let ev = ObjectiveEval {
            point,
            value,
            gradient,
        };
        if !ev.is_finite() || ev.gradient.len() != self.x.len() {
            return Ok((
                Sample {
                    alpha,
                    value: f64::INFINITY,
                    slope: f64::NAN,
                },
                ev,
            ));
        }
        let s = Sample {
            alpha,
            value: ev.value,
            slope: dot(&ev.gradient, self.dir),
        };
        if ev.value < self.f0 && self.best.as_ref().is_none_or(|b| ev.value < b.value) {
            self.best = Some(ev.clone());
        }
        Ok((s, ev))
    }

    /// Values this close to `f0` are indistinguishable from it.
    fn value_tol(&self) -> f64 {
        1e-12 * self.f0.abs().max(1.0)
    }

    fn flat(&self, a: &Sample, b: &Sample) -> bool {
        (a.value - b.value).abs() <= self.value_tol()
    }

    /// Sufficient decrease. Near rounding level the value test is replaced
    /// by its slope form `φ'(α) ≤ (2c1 - 1)φ'(0)`, exact for quadratics.
    fn armijo_fails(&self, s: &Sample) -> bool {
        let exact = s.value <= self.f0 + self.cfg.c1 * s.alpha * self.slope0;
        let approx = s.value <= self.f0 + self.value_tol()
            && s.slope <= (2.0 * self.cfg.c1 - 1.0) * self.slope0;
        !(exact || approx)
    }

    fn curvature_ok(&self, s: &Sample) -> bool {
        s.slope.abs() <= -self.cfg.c2 * self.slope0
    }

    fn run(mut self) -> Result<(LineSearch, usize), E> {
        let mut prev = Sample {
            alpha: 0.0,
            value: self.f0,
            slope: self.slope0,
        };
        let mut alpha = 1.0;
        let mut first = true;
        loop {
            if self.evals >= self.cfg.max_line_search_steps {
                return Ok((LineSearch::Failed(self.best.take()), self.evals));
            }
            let (s, ev) = self.eval(alpha)?;
            let rose = !first && s.value >= prev.value && !self.flat(&s, &prev);
            if !s.finite() || self.armijo_fails(&s) || rose {
                return self.zoom(prev, s);
            }
            if self.curvature_ok(&s) {
                return Ok((LineSearch::Accepted(ev), self.evals));
            }
            if s.slope >= 0.0 {
                return self.zoom(s, prev);
            }
            first = false;
            prev = s;
            alpha *= 2.0;
        }
    }

    fn zoom(mut self, mut lo: Sample, mut hi: Sample) -> Result<(LineSearch, usize), E> {
        loop {
            if self.evals >= self.cfg.max_line_search_steps
                || (hi.alpha - lo.alpha).abs() <= 1e-16 * lo.alpha.abs().max(hi.alpha.abs())
            {
                return Ok((LineSearch::Failed(self.best.take()), self.evals));
            }
            let alpha = cubic_step(&lo, &hi, self.flat(&lo, &hi));
            let (s, ev) = self.eval(alpha)?;
            let rose = s.value >= lo.value && !self.flat(&s, &lo);
            if !s.finite() || self.armijo_fails(&s) || rose {
                hi = s;
                continue;
            }
            if self.curvature_ok(&s) {
                return Ok((LineSearch::Accepted(ev), self.evals));
            }
            if s.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = s;
        }
    }
}

/// Minimizes `objective` from `x0`. The objective maps a point to its value
/// and gradient.
pub fn minimize<F, E>(
    mut objective: F,
    x0: &[f64],
    cfg: &LbfgsConfig,
) -> Result<OptResult, LbfgsError<E>>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), E>,
    E: std::error::Error + 'static,
{
    cfg.validate().map_err(LbfgsError::Config)?;
    let p = x0.len();
    let (f0, g0) = objective(x0).map_err(|source| LbfgsError::Objective {
        source,
        best_point: x0.to_vec(),
        best_value: f64::NAN,
        iterations: 0,
    })?;
    if g0.len() != p {
        return Err(LbfgsError::GradientLength {
            expected: p,
            got: g0.len(),
        });
    }
    let mut cur = ObjectiveEval {
        point: x0.to_vec(),
        value: f0,
        gradient: g0,
    };
    if !cur.is_finite() {
        return Err(LbfgsError::NonFiniteStart);
    }

    let mut history: VecDeque<CurvaturePair> = VecDeque::with_capacity(cfg.memory);
    let mut trace = vec![TraceEntry {
        iteration: 0,
        value: cur.value,
        gradient_max_norm: max_norm(&cur.gradient),
    }];
    let mut iterations = 0;
    let mut evaluations = 1;

    let termination = loop {
        if max_norm(&cur.gradient) <= cfg.gradient_tolerance {
            break Termination::GradientTolerance;
        }
        if iterations >= cfg.max_iterations {
            break Termination::MaxIterations;
        }

        let pairs: Vec<CurvaturePair> = history.iter().cloned().collect();
        let mut dir = two_loop_direction(&cur.gradient, &pairs);
        let mut slope = dot(&dir, &cur.gradient);
        if !(slope < 0.0) {
            history.clear();
            dir = cur.gradient.iter().map(|g| -g).collect();
            slope = dot(&dir, &cur.gradient);
        }

        let searcher = Searcher {
            objective: &mut objective,
            x: &cur.point,
            dir: &dir,
            f0: cur.value,
            slope0: slope,
            cfg,
            evals: 0,
            best: None,
        };
        let (outcome, used) = match searcher.run() {
            Ok(r) => r,
            Err(source) => {
                return Err(LbfgsError::Objective {
                    source,
                    best_point: cur.point,
                    best_value: cur.value,
                    iterations,
                })
            }
        };
        evaluations += used;

        match outcome {
            LineSearch::Accepted(next) => {
                let s: Vec<f64> = next.point.iter().zip(&cur.point).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = next.gradient.iter().zip(&cur.gradient).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                if sy > 1e-10 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
                    if history.len() == cfg.memory {
                        history.pop_front();
                    }
                    history.push_back(CurvaturePair { s, y });
                }
                cur = next;
                iterations += 1;
                trace.push(TraceEntry {
                    iteration: iterations,
                    value: cur.value,
                    gradient_max_norm: max_norm(&cur.gradient),
                });
            }
            LineSearch::Failed(best) => {
                if let Some(best) = best {
                    cur = best;
                    iterations += 1;
                    trace.push(TraceEntry {
                        iteration: iterations,
                        value: cur.value,
                        gradient_max_norm: max_norm(&cur.gradient),
                    });
                }
                if max_norm(&cur.gradient) <= cfg.gradient_tolerance {
                    break Termination::GradientTolerance;
                }
                break Termination::LineSearchFailure;
            }
        }
    };

    Ok(OptResult {
        x: cur.point,
        value: cur.value,
        gradient: cur.gradient,
        iterations,
        evaluations,
        termination,
        trace,
        config: cfg.clone(),
    })
}
