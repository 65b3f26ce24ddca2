//! Dense BFGS with a strong-Wolfe line search.
//!
//! The inverse Hessian starts as the identity, is rescaled by `sᵀy / yᵀy`
//! after the first accepted step, and receives the standard rank-two update
//! whenever the curvature `sᵀy` is positive. If the line search cannot find
//! an acceptable step the iteration restarts from the identity with a
//! steepest-descent step, halving the length until the objective decreases.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Function to be minimised.
pub trait Objective {
    fn value(&mut self, x: &[f64]) -> Result<f64>;
    fn value_and_gradient(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// Wraps a closure that returns the value and gradient together.
pub struct FnObjective<F>(pub F);

impl<F: FnMut(&[f64]) -> (f64, Vec<f64>)> Objective for FnObjective<F> {
    fn value(&mut self, x: &[f64]) -> Result<f64> {
        Ok((self.0)(x).0)
    }

    fn value_and_gradient(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((self.0)(x))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the gradient max-norm.
    pub gtol: f64,
    /// Compare the first gradient with central differences before iterating.
    pub check_gradient: bool,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self { max_iterations: 200, gtol: 1e-5, check_gradient: true }
    }
}

/// Accepted agreement between the analytic gradient and central differences.
pub const GRADIENT_CHECK_TOL: f64 = 1e-5;
const GRADIENT_CHECK_STEP: f64 = 1e-6;

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_BRACKET: usize = 20;
const MAX_ZOOM: usize = 30;
const MAX_HALVINGS: usize = 60;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    LineSearchFailed,
    Aborted { reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub value: f64,
    pub best_value: f64,
    /// Max-norm of the gradient at this iterate.
    pub grad_norm: f64,
    pub x: Vec<f64>,
    pub elapsed_s: f64,
}

#[derive(Clone, Debug)]
pub struct Minimization {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub trace: Vec<IterationRecord>,
    pub termination: Termination,
    pub evaluations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn all_finite(f: f64, g: &[f64]) -> bool {
    f.is_finite() && g.iter().all(|v| v.is_finite())
}

#[derive(Clone, Debug)]
struct Probe {
    alpha: f64,
    f: f64,
    g: Vec<f64>,
    slope: f64,
}

enum Search {
    Wolfe(Probe),
    /// Sufficient decrease only; the curvature condition could not be met.
    Armijo(Probe),
    Failed,
}

struct Evaluator<'a, O: Objective> {
    objective: &'a mut O,
    count: usize,
}

impl<O: Objective> Evaluator<'_, O> {
    fn full(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.count += 1;
        self.objective.value_and_gradient(x)
    }

    fn value(&mut self, x: &[f64]) -> Result<f64> {
        self.count += 1;
        self.objective.value(x)
    }

    fn probe(&mut self, x: &[f64], p: &[f64], alpha: f64) -> Result<Probe> {
        let trial: Vec<f64> = x.iter().zip(p).map(|(a, b)| a + alpha * b).collect();
        let (f, g) = self.full(&trial)?;
        if !all_finite(f, &g) {
            // Treated as an overshoot by the caller.
            return Ok(Probe { alpha, f: f64::INFINITY, g, slope: f64::NAN });
        }
        let slope = dot(&g, p);
        Ok(Probe { alpha, f, g, slope })
    }
}

/// Minimiser of the cubic through two probes, or bisection when that is unusable.
fn interpolate(lo: &Probe, hi: &Probe) -> f64 {
    let (a, b) = (lo.alpha, hi.alpha);
    let mid = 0.5 * (a + b);
    if !(lo.f.is_finite() && hi.f.is_finite() && lo.slope.is_finite() && hi.slope.is_finite()) {
        return mid;
    }
    let d1 = lo.slope + hi.slope - 3.0 * (lo.f - hi.f) / (a - b);
    let disc = d1 * d1 - lo.slope * hi.slope;
    if disc < 0.0 {
        return mid;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let cand = b - (b - a) * (hi.slope + d2 - d1) / (hi.slope - lo.slope + 2.0 * d2);
    let (left, right) = if a < b { (a, b) } else { (b, a) };
    let margin = 0.1 * (right - left);
    if cand.is_finite() && cand > left + margin && cand < right - margin {
        cand
    } else {
        mid
    }
}

fn zoom<O: Objective>(
    eval: &mut Evaluator<'_, O>,
    x: &[f64],
    p: &[f64],
    f0: f64,
    slope0: f64,
    mut lo: Probe,
    mut hi: Probe,
) -> Result<Search> {
    for _ in 0..MAX_ZOOM {
        let alpha = interpolate(&lo, &hi);
        let trial = eval.probe(x, p, alpha)?;
        if trial.f > f0 + C1 * alpha * slope0 || trial.f >= lo.f {
            hi = trial;
        } else {
            if trial.slope.abs() <= -C2 * slope0 {
                return Ok(Search::Wolfe(trial));
            }
            if trial.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = trial;
        }
        if (hi.alpha - lo.alpha).abs() <= 1e-14 * lo.alpha.abs().max(1e-14) {
            break;
        }
    }
    Ok(if lo.alpha > 0.0 { Search::Armijo(lo) } else { Search::Failed })
}

fn line_search<O: Objective>(
    eval: &mut Evaluator<'_, O>,
    x: &[f64],
    f0: f64,
    g0: &[f64],
    p: &[f64],
    alpha_init: f64,
) -> Result<Search> {
    let slope0 = dot(g0, p);
    let start = Probe { alpha: 0.0, f: f0, g: g0.to_vec(), slope: slope0 };
    let mut prev = start;
    let mut alpha = alpha_init;
    for i in 0..MAX_BRACKET {
        let cur = eval.probe(x, p, alpha)?;
        if cur.f > f0 + C1 * alpha * slope0 || (i > 0 && cur.f >= prev.f) {
            return zoom(eval, x, p, f0, slope0, prev, cur);
        }
        if cur.slope.abs() <= -C2 * slope0 {
            return Ok(Search::Wolfe(cur));
        }
        if cur.slope >= 0.0 {
            return zoom(eval, x, p, f0, slope0, cur, prev);
        }
        prev = cur;
        alpha *= 2.0;
    }
    Ok(Search::Armijo(prev))
}

fn check_gradient<O: Objective>(eval: &mut Evaluator<'_, O>, x: &[f64], g: &[f64]) -> Result<()> {
    let mut v = x.to_vec();
    for j in 0..x.len() {
        let h = GRADIENT_CHECK_STEP * x[j].abs().max(1.0);
        let orig = v[j];
        v[j] = orig + h;
        let up = eval.value(&v)?;
        v[j] = orig - h;
        let down = eval.value(&v)?;
        v[j] = orig;
        let fd = (up - down) / (2.0 * h);
        if (fd - g[j]).abs() > GRADIENT_CHECK_TOL * fd.abs().max(1.0) {
            return Err(Error::Numerical(format!(
                "gradient check failed at component {j}: analytic {} vs finite difference {fd}",
                g[j]
            )));
        }
    }
    Ok(())
}

pub fn minimize<O: Objective>(objective: &mut O, x0: Vec<f64>, options: &MinimizeOptions) -> Result<Minimization> {
    if !(options.gtol > 0.0) {
        return Err(Error::Config(format!("gtol must be positive, got {}", options.gtol)));
    }
    let n = x0.len();
    let started = Instant::now();
    let mut eval = Evaluator { objective, count: 0 };
    let mut x = x0;
    let (mut f, mut g) = eval.full(&x)?;
    let mut trace = Vec::new();
    let record = |trace: &mut Vec<IterationRecord>, iteration, f: f64, g: &[f64], x: &[f64]| {
        let best_value = trace.last().map_or(f, |r: &IterationRecord| r.best_value.min(f));
        trace.push(IterationRecord {
            iteration,
            value: f,
            best_value,
            grad_norm: max_norm(g),
            x: x.to_vec(),
            elapsed_s: started.elapsed().as_secs_f64(),
        });
    };
    let finish = |x, f, g, trace, termination, evaluations| Minimization {
        x,
        value: f,
        gradient: g,
        trace,
        termination,
        evaluations,
    };

    if !all_finite(f, &g) {
        let reason = format!("non-finite objective at the starting point (value {f})");
        log::error!("{reason}");
        record(&mut trace, 0, f, &g, &x);
        return Ok(finish(x, f, g, trace, Termination::Aborted { reason }, eval.count));
    }
    if options.check_gradient {
        check_gradient(&mut eval, &x, &g)?;
    }
    record(&mut trace, 0, f, &g, &x);

    let mut hinv = identity(n);
    let mut scaled = false;
    let mut termination = Termination::MaxIterations;
    for iteration in 1..=options.max_iterations {
        if max_norm(&g) < options.gtol {
            termination = Termination::Converged;
            break;
        }
        let mut p = matvec_neg(&hinv, &g);
        if dot(&p, &g) >= 0.0 {
            hinv = identity(n);
            p = g.iter().map(|v| -v).collect();
        }
        let alpha_init = if iteration == 1 { (1.01 / dot(&g, &g).sqrt()).min(1.0) } else { 1.0 };

        let step = match line_search(&mut eval, &x, f, &g, &p, alpha_init)? {
            Search::Wolfe(pr) | Search::Armijo(pr) => Some(pr),
            Search::Failed => None,
        };
        let (probe, dir) = match step {
            Some(pr) => (pr, p),
            None => {
                log::warn!("line search failed at iteration {iteration}; taking a steepest-descent step");
                hinv = identity(n);
                scaled = false;
                match descent_fallback(&mut eval, &x, f, &g)? {
                    Some(pr) => (pr, g.iter().map(|v| -v).collect()),
                    None => {
                        termination = Termination::LineSearchFailed;
                        break;
                    }
                }
            }
        };
        if !all_finite(probe.f, &probe.g) {
            let reason = format!("non-finite objective at iteration {iteration}");
            log::error!("{reason}");
            termination = Termination::Aborted { reason };
            break;
        }

        let s: Vec<f64> = dir.iter().map(|v| probe.alpha * v).collect();
        let x_new: Vec<f64> = x.iter().zip(&s).map(|(a, b)| a + b).collect();
        let y: Vec<f64> = probe.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if !scaled {
                let gamma = sy / dot(&y, &y);
                hinv.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..n {
                    hinv[i * n + i] = gamma;
                }
                scaled = true;
            }
            bfgs_update(&mut hinv, &s, &y, sy);
        }
        x = x_new;
        f = probe.f;
        g = probe.g;
        record(&mut trace, iteration, f, &g, &x);
    }
    if termination == Termination::MaxIterations && max_norm(&g) < options.gtol {
        termination = Termination::Converged;
    }
    Ok(finish(x, f, g, trace, termination, eval.count))
}

fn descent_fallback<O: Objective>(eval: &mut Evaluator<'_, O>, x: &[f64], f: f64, g: &[f64]) -> Result<Option<Probe>> {
    let gg = dot(g, g);
    let mut alpha = 1.0 / gg.sqrt().max(1.0);
    for _ in 0..MAX_HALVINGS {
        let trial: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - alpha * b).collect();
        let ft = eval.value(&trial)?;
        if ft.is_finite() && ft <= f - C1 * alpha * gg {
            let (ft, gt) = eval.full(&trial)?;
            let p: Vec<f64> = g.iter().map(|v| -v).collect();
            let slope = dot(&gt, &p);
            return Ok(Some(Probe { alpha, f: ft, g: gt, slope }));
        }
        alpha *= 0.5;
    }
    Ok(None)
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

fn matvec_neg(m: &[f64], v: &[f64]) -> Vec<f64> {
    m.chunks(v.len()).map(|row| -dot(row, v)).collect()
}

/// `H ← (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ` with `ρ = 1/sᵀy`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = h.chunks(n).map(|row| dot(row, y)).collect();
    let yhy = dot(y, &hy);
    let coef = rho * rho * yhy + rho;
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + coef * s[i] * s[j];
        }
    }
}
