//! Log-barrier interior point method with damped Newton centering.

use nalgebra::{DMatrix, DVector};

use super::{InequalitySystem, SolveStatus, SolverConfig};
use crate::objectives::terms;
use crate::objectives::Criterion;

/// Smooth convex function with dense derivatives.
pub(crate) trait Smooth {
    fn dim(&self) -> usize;
    /// `+inf` outside the domain.
    fn value(&self, x: &[f64]) -> f64;
    /// Adds `scale * grad` and `scale * hess` (row-major `n x n`).
    /// Returns `false` outside the domain.
    fn add_derivatives(&self, x: &[f64], scale: f64, grad: &mut [f64], hess: &mut [f64]) -> bool;
}

/// `sum_k psi(c + L x)` over the user margin pairs.
pub(crate) struct MarginSmooth<'a> {
    pub kind: Criterion,
    pub c: &'a [f64],
    /// Row-major `2K x n`.
    pub l: &'a [f64],
    pub n: usize,
}

impl MarginSmooth<'_> {
    fn margins(&self, x: &[f64]) -> Vec<f64> {
        self.c
            .iter()
            .enumerate()
            .map(|(r, c)| c + self.l[r * self.n..(r + 1) * self.n].iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }
}

impl Smooth for MarginSmooth<'_> {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        let m = self.margins(x);
        m.chunks_exact(2).map(|p| terms::value(self.kind, p[0], p[1])).sum()
    }

    fn add_derivatives(&self, x: &[f64], scale: f64, grad: &mut [f64], hess: &mut [f64]) -> bool {
        let n = self.n;
        let m = self.margins(x);
        for (k, p) in m.chunks_exact(2).enumerate() {
            let (Some((du, dv)), Some((uu, uv, vv))) =
                (terms::gradient(self.kind, p[0], p[1]), terms::hessian(self.kind, p[0], p[1]))
            else {
                return false;
            };
            let a = &self.l[2 * k * n..(2 * k + 1) * n];
            let b = &self.l[(2 * k + 1) * n..(2 * k + 2) * n];
            for i in 0..n {
                grad[i] += scale * (du * a[i] + dv * b[i]);
                let ai = scale * (uu * a[i] + uv * b[i]);
                let bi = scale * (uv * a[i] + vv * b[i]);
                for j in 0..n {
                    hess[i * n + j] += ai * a[j] + bi * b[j];
                }
            }
        }
        true
    }
}

/// `c^T x`.
pub(crate) struct Linear(pub Vec<f64>);

impl Smooth for Linear {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    fn add_derivatives(&self, _x: &[f64], scale: f64, grad: &mut [f64], _hess: &mut [f64]) -> bool {
        for (g, c) in grad.iter_mut().zip(&self.0) {
            *g += scale * c;
        }
        true
    }
}

pub(crate) struct BarrierRun {
    pub x: Vec<f64>,
    pub value: f64,
    pub gap: f64,
    pub status: SolveStatus,
    pub newton_steps: usize,
    /// Inequality multiplier estimates `(1 + G_i dx / s_i) / (t s_i)`, with
    /// `dx` the Newton step at the final point.
    pub multipliers: Vec<f64>,
}

/// What the outer loop does after each centering step.
pub(crate) enum Verdict {
    Continue,
    Stop(SolveStatus),
}

const ARMIJO: f64 = 0.01;
const BACKTRACK: f64 = 0.5;
const MIN_STEP: f64 = 1e-12;

/// Minimizes `f` over the strict interior of `sys` starting at the strictly
/// feasible `x0`. `check` sees `(x, value, gap)` after every centering and may
/// stop the run; `peek` sees every Newton iterate and may stop it early.
/// With `rescale` the weight also jumps to `m / f(x)` when that is larger,
/// which suits nonnegative objectives spanning many orders of magnitude.
#[allow(clippy::too_many_arguments)]
pub(crate) fn minimize(
    f: &dyn Smooth,
    sys: &InequalitySystem,
    x0: Vec<f64>,
    t0: f64,
    cfg: &SolverConfig,
    check: &mut dyn FnMut(&[f64], f64, f64) -> Verdict,
    peek: &mut dyn FnMut(&[f64]) -> bool,
    rescale: bool,
) -> BarrierRun {
    let m = sys.len() as f64;
    let mut st = State::new(f, sys, x0);
    let mut t = t0;
    let mut last = (f64::INFINITY, t);
    for _ in 0..cfg.max_outer {
        let (lam2, peeked) = st.center(t, cfg.newton_tol, cfg.max_inner, peek);
        let gap = (m + lam2) / t;
        if peeked {
            return st.finish(gap, t, SolveStatus::Converged);
        }
        last = (gap, t);
        if let Verdict::Stop(status) = check(&st.x, st.value, gap) {
            if status == SolveStatus::Converged {
                // a few extra Newton steps sharpen the multiplier estimates
                st.center(t, cfg.newton_tol * 1e-6, 4, &mut |_| false);
            }
            return st.finish(gap, t, status);
        }
        let mut next = t * cfg.mu;
        if rescale && st.value > 0.0 && st.value.is_finite() {
            next = next.max(m / st.value);
        }
        t = next;
    }
    st.finish(last.0, last.1, SolveStatus::MaxIter)
}

struct State<'a> {
    f: &'a dyn Smooth,
    sys: &'a InequalitySystem,
    x: Vec<f64>,
    slack: Vec<f64>,
    value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
    steps: usize,
}

impl<'a> State<'a> {
    fn new(f: &'a dyn Smooth, sys: &'a InequalitySystem, x: Vec<f64>) -> Self {
        let n = f.dim();
        Self {
            f,
            sys,
            slack: sys.slacks(&x),
            value: f.value(&x),
            x,
            grad: vec![0.0; n],
            hess: vec![0.0; n * n],
            steps: 0,
        }
    }

    fn finish(mut self, gap: f64, t: f64, status: SolveStatus) -> BarrierRun {
        let dx = self.direction(t).unwrap_or_else(|| vec![0.0; self.x.len()]);
        let multipliers = (0..self.sys.len())
            .map(|i| {
                let s = self.slack[i];
                let ds: f64 = self.sys.row(i).iter().zip(&dx).map(|(a, d)| a * d).sum();
                ((1.0 + ds / s) / (t * s)).max(0.0)
            })
            .collect();
        BarrierRun { x: self.x, value: self.value, gap, status, newton_steps: self.steps, multipliers }
    }

    /// Newton step at the current point, leaving the barrier gradient in `grad`.
    fn direction(&mut self, t: f64) -> Option<Vec<f64>> {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
        self.hess.iter_mut().for_each(|h| *h = 0.0);
        if !self.f.add_derivatives(&self.x, t, &mut self.grad, &mut self.hess) {
            return None;
        }
        self.sys.add_barrier_derivatives(&self.slack, &mut self.grad, &mut self.hess);
        newton_direction(self.f.dim(), &self.hess, &self.grad)
    }

    /// Damped Newton on `t f - sum ln(slack)`. Returns the last squared
    /// decrement and whether `peek` asked to stop.
    fn center(&mut self, t: f64, tol: f64, max_inner: usize, peek: &mut dyn FnMut(&[f64]) -> bool) -> (f64, bool) {
        let mut lam2 = 0.0;
        for _ in 0..max_inner {
            let Some(dx) = self.direction(t) else { break };
            lam2 = -self.grad.iter().zip(&dx).map(|(g, d)| g * d).sum::<f64>();
            if !(lam2 >= 0.0) || lam2 / 2.0 <= tol {
                lam2 = lam2.max(0.0);
                break;
            }
            let logs: f64 = self.slack.iter().map(|s| s.ln()).sum();
            let psi = t * self.value - logs;
            let slop = 4.0 * f64::EPSILON * (t * self.value.abs() + self.slack.iter().map(|s| s.ln().abs()).sum::<f64>());
            let mut step = self.sys.max_step(&self.slack, &dx).map_or(1.0, |s| (0.99 * s).min(1.0));
            let mut accepted = None;
            while step >= MIN_STEP {
                let xn: Vec<f64> = self.x.iter().zip(&dx).map(|(a, d)| a + step * d).collect();
                let sn = self.sys.slacks(&xn);
                if sn.iter().all(|&s| s > 0.0) {
                    let vn = self.f.value(&xn);
                    if vn.is_finite() {
                        let psin = t * vn - sn.iter().map(|s| s.ln()).sum::<f64>();
                        if psin <= psi - ARMIJO * step * lam2 + slop {
                            accepted = Some((xn, sn, vn));
                            break;
                        }
                    }
                }
                step *= BACKTRACK;
            }
            let Some((xn, sn, vn)) = accepted else { break };
            self.x = xn;
            self.slack = sn;
            self.value = vn;
            self.steps += 1;
            if peek(&self.x) {
                return (lam2, true);
            }
        }
        (lam2, false)
    }
}

/// Solves `H d = -g` by Cholesky, adding growing diagonal regularization
/// when the factorization fails.
fn newton_direction(n: usize, hess: &[f64], grad: &[f64]) -> Option<Vec<f64>> {
    let scale = (0..n).map(|i| hess[i * n + i].abs()).fold(1.0, f64::max);
    let rhs = DVector::from_iterator(n, grad.iter().map(|g| -g));
    let mut reg = 0.0;
    for _ in 0..8 {
        let mut h = DMatrix::from_row_slice(n, n, hess);
        for i in 0..n {
            h[(i, i)] += reg;
        }
        if let Some(ch) = h.cholesky() {
            let d = ch.solve(&rhs);
            if d.iter().all(|v| v.is_finite()) {
                return Some(d.as_slice().to_vec());
            }
        }
        reg = if reg == 0.0 { 1e-12 * scale } else { reg * 100.0 };
    }
    None
}
