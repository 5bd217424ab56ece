//! Limited-memory BFGS with a strong Wolfe line search.

use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbfgsOptions {
    /// Number of stored curvature pairs.
    pub history: usize,
    pub max_iter: usize,
    /// Stop when `‖∇f‖∞` drops to this value.
    pub grad_tol: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    /// Function evaluations allowed per line search.
    pub max_line_search: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            history: 10,
            max_iter: 100,
            grad_tol: 1e-6,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    LineSearchFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    pub theta: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    /// Seconds since the start of the run.
    pub elapsed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptTrace {
    /// Starting point followed by every accepted iterate.
    pub iterates: Vec<Iterate>,
    pub converged: bool,
    pub reason: StopReason,
    pub evaluations: usize,
}

impl OptTrace {
    pub fn iterations(&self) -> usize {
        self.iterates.len().saturating_sub(1)
    }

    pub fn last(&self) -> &Iterate {
        self.iterates.last().expect("trace always holds the starting point")
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn axpy(x: &[f64], alpha: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + alpha * b).collect()
}

struct Point {
    alpha: f64,
    f: f64,
    g: Vec<f64>,
    slope: f64,
}

enum Search {
    Found(Point),
    /// No step met both Wolfe conditions; best sufficient-decrease point, if any.
    Failed(Option<Point>),
}

struct Evaluator<'a, F> {
    f: &'a mut F,
    count: usize,
}

impl<F> Evaluator<'_, F>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    fn eval(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.count += 1;
        (self.f)(x)
    }

    fn probe(&mut self, x: &[f64], d: &[f64], alpha: f64) -> Result<Point> {
        let (f, g) = self.eval(&axpy(x, alpha, d))?;
        let slope = dot(&g, d);
        // Non-finite values are treated as "far too long a step".
        let f = if f.is_finite() { f } else { f64::INFINITY };
        Ok(Point { alpha, f, g, slope })
    }
}

/// Minimizer of the cubic interpolating two points with slopes, clamped to
/// the interval between them.
fn cubic_step(a: &Point, b: &Point) -> f64 {
    let (lo, hi) = if a.alpha < b.alpha {
        (a.alpha, b.alpha)
    } else {
        (b.alpha, a.alpha)
    };
    if !(a.f.is_finite() && b.f.is_finite()) {
        return 0.5 * (lo + hi);
    }
    let d1 = a.slope + b.slope - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    if disc < 0.0 {
        return 0.5 * (lo + hi);
    }
    let d2 = disc.sqrt() * (b.alpha - a.alpha).signum();
    let t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
    if t.is_finite() {
        t.clamp(lo, hi)
    } else {
        0.5 * (lo + hi)
    }
}

fn line_search<F>(
    ev: &mut Evaluator<'_, F>,
    x: &[f64],
    f0: f64,
    g0: &[f64],
    d: &[f64],
    alpha0: f64,
    opts: &LbfgsOptions,
) -> Result<Search>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let slope0 = dot(g0, d);
    let armijo = |p: &Point| p.f <= f0 + opts.c1 * p.alpha * slope0;
    let curvature = |p: &Point| p.slope.abs() <= -opts.c2 * slope0;
    let mut best: Option<Point> = None;
    let keep_best = |p: &Point, best: &mut Option<Point>| {
        if armijo(p) && p.f < f0 && best.as_ref().is_none_or(|b| p.f < b.f) {
            *best = Some(Point {
                alpha: p.alpha,
                f: p.f,
                g: p.g.clone(),
                slope: p.slope,
            });
        }
    };

    let mut prev = Point {
        alpha: 0.0,
        f: f0,
        g: g0.to_vec(),
        slope: slope0,
    };
    let mut alpha = alpha0;
    let mut used = 0;
    let (mut lo, mut hi) = loop {
        if used >= opts.max_line_search {
            return Ok(Search::Failed(best));
        }
        let cur = ev.probe(x, d, alpha)?;
        used += 1;
        keep_best(&cur, &mut best);
        if !armijo(&cur) || (used > 1 && cur.f >= prev.f) {
            break (prev, cur);
        }
        if curvature(&cur) {
            return Ok(Search::Found(cur));
        }
        if cur.slope >= 0.0 {
            break (cur, prev);
        }
        alpha = 2.0 * cur.alpha;
        prev = cur;
    };

    // Zoom: `lo` satisfies sufficient decrease and has the lowest value seen.
    while used < opts.max_line_search {
        let width = (hi.alpha - lo.alpha).abs();
        if width <= 1e-14 * lo.alpha.abs().max(1.0) {
            break;
        }
        let mut trial = cubic_step(&lo, &hi);
        let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
        if trial - a < 0.1 * width || b - trial < 0.1 * width {
            trial = 0.5 * (a + b);
        }
        let cur = ev.probe(x, d, trial)?;
        used += 1;
        keep_best(&cur, &mut best);
        if !armijo(&cur) || cur.f >= lo.f {
            hi = cur;
        } else {
            if curvature(&cur) {
                return Ok(Search::Found(cur));
            }
            if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    Ok(Search::Failed(best))
}

/// Minimizes `f` from `x0`. `f` returns the value and the gradient.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &LbfgsOptions) -> Result<(Vec<f64>, OptTrace)>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let start = Instant::now();
    let mut ev = Evaluator { f: &mut f, count: 0 };
    let mut x = x0.to_vec();
    let (mut fx, mut g) = ev.eval(&x)?;
    let mut iterates = vec![Iterate {
        theta: x.clone(),
        value: fx,
        grad_norm: inf_norm(&g),
        elapsed: start.elapsed().as_secs_f64(),
    }];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.history);
    let mut reason = StopReason::MaxIterations;

    for _ in 0..opts.max_iter {
        if inf_norm(&g) <= opts.grad_tol {
            reason = StopReason::GradientTolerance;
            break;
        }
        let mut d = two_loop(&g, &pairs);
        if dot(&d, &g) >= 0.0 {
            pairs.clear();
            d = g.iter().map(|v| -v).collect();
        }
        // Without curvature information, try a unit-length step first.
        let alpha0 = if pairs.is_empty() {
            1.0 / dot(&d, &d).sqrt()
        } else {
            1.0
        };
        let point = match line_search(&mut ev, &x, fx, &g, &d, alpha0, opts)? {
            Search::Found(p) => p,
            Search::Failed(Some(p)) if !pairs.is_empty() => {
                // Accept the decrease but restart the curvature memory.
                pairs.clear();
                p
            }
            Search::Failed(_) => {
                reason = StopReason::LineSearchFailure;
                break;
            }
        };

        let x_new = axpy(&x, point.alpha, &d);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = point.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if pairs.len() == opts.history {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        x = x_new;
        fx = point.f;
        g = point.g;
        iterates.push(Iterate {
            theta: x.clone(),
            value: fx,
            grad_norm: inf_norm(&g),
            elapsed: start.elapsed().as_secs_f64(),
        });
    }
    if reason == StopReason::MaxIterations && inf_norm(&g) <= opts.grad_tol {
        reason = StopReason::GradientTolerance;
    }
    let trace = OptTrace {
        iterates,
        converged: reason == StopReason::GradientTolerance,
        reason,
        evaluations: ev.count,
    };
    Ok((x, trace))
}

fn two_loop(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}
