//! Convex-hull relaxation of the discrete precoding problem and a small
//! log-barrier solver for the relaxed problems and the conditioned
//! subproblems of branch-and-bound.

pub(crate) mod barrier;
mod polyhedron;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::RealVector;
use crate::objectives::{Criterion, Objective};
use barrier::{minimize, Linear, MarginSmooth, Smooth, Verdict};

pub use polyhedron::{build_polyhedron, restrict_polyhedron, Polyhedron, SubPolyhedron};
pub(crate) use polyhedron::restrict_unchecked;

/// Phase I stops as soon as every inequality has at least this much slack.
pub const FEASIBILITY_SLACK: f64 = 1e-6;
/// Phase I declares a system infeasible once its certified lower bound on
/// the best achievable worst-case violation is above `-INFEASIBILITY_TOL`.
pub const INFEASIBILITY_TOL: f64 = 1e-10;

/// Barrier method settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Initial barrier weight. `None` picks `m / g(x0)` so the first gap
    /// estimate matches the objective's scale.
    pub t0: Option<f64>,
    pub mu: f64,
    /// Centering stops when half the squared Newton decrement drops below this.
    pub newton_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Target for `gap / g`, the relative duality gap.
    pub eps_solve: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { t0: None, mu: 20.0, newton_tol: 1e-9, max_outer: 50, max_inner: 100, eps_solve: 1e-8 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.mu > 1.0
            && self.newton_tol > 0.0
            && self.eps_solve > 0.0
            && self.max_outer > 0
            && self.max_inner > 0
            && self.t0.is_none_or(|t| t > 0.0 && t.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("invalid solver configuration {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    /// Stopped early against a caller-supplied threshold (see [`Cutoff`]).
    CutOff,
    MaxIter,
    Infeasible,
}

/// Early-exit rule for bound computations that only need to be compared
/// against a threshold, as in branch-and-bound pruning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    /// Stop once the certified lower bound reaches this value.
    pub threshold: f64,
    /// Stop once the objective is below `threshold` and the relative gap is
    /// at most this.
    pub below_rel_gap: f64,
}

/// Output of a relaxed solve.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedSolution {
    /// Minimizer over the free coordinates (empty when infeasible).
    pub x_r_lb: RealVector,
    /// Objective in its defining form.
    pub value: f64,
    /// Objective in the nonnegative normalized form.
    pub normalized: f64,
    /// Certified bound on `normalized - optimum`.
    pub gap: f64,
    pub status: SolveStatus,
    /// Barrier estimates of the inequality multipliers, polyhedron rows first.
    pub multipliers: Vec<f64>,
    pub newton_steps: usize,
}

impl RelaxedSolution {
    fn infeasible() -> Self {
        Self {
            x_r_lb: RealVector(Vec::new()),
            value: f64::INFINITY,
            normalized: f64::INFINITY,
            gap: 0.0,
            status: SolveStatus::Infeasible,
            multipliers: Vec::new(),
            newton_steps: 0,
        }
    }

    /// Sound lower bound on the normalized optimum (`+inf` when infeasible).
    pub fn lower_bound(&self) -> f64 {
        if self.status == SolveStatus::Infeasible {
            f64::INFINITY
        } else {
            (self.normalized - self.gap).max(0.0)
        }
    }
}

/// Dense system `G x <= h` that remembers each row's nonzero columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InequalitySystem {
    n: usize,
    rows: Vec<f64>,
    rhs: Vec<f64>,
    nz: Vec<Vec<usize>>,
}

impl InequalitySystem {
    pub fn new(n: usize) -> Self {
        Self { n, ..Self::default() }
    }

    pub fn from_dense(a: &DMatrix<f64>, b: &[f64]) -> Self {
        let mut s = Self::new(a.ncols());
        for r in 0..a.nrows() {
            let row: Vec<f64> = a.row(r).iter().copied().collect();
            s.push(&row, b[r]);
        }
        s
    }

    pub fn push(&mut self, row: &[f64], rhs: f64) {
        assert_eq!(row.len(), self.n, "row length");
        self.nz.push((0..self.n).filter(|&c| row[c] != 0.0).collect());
        self.rows.extend_from_slice(row);
        self.rhs.push(rhs);
    }

    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.n..(i + 1) * self.n]
    }

    pub fn rhs(&self, i: usize) -> f64 {
        self.rhs[i]
    }

    fn dot(&self, i: usize, x: &[f64]) -> f64 {
        let row = self.row(i);
        self.nz[i].iter().map(|&c| row[c] * x[c]).sum()
    }

    /// `h - G x`.
    pub fn slacks(&self, x: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|i| self.rhs[i] - self.dot(i, x)).collect()
    }

    pub fn min_slack(&self, x: &[f64]) -> f64 {
        self.slacks(x).into_iter().fold(f64::INFINITY, f64::min)
    }

    fn add_barrier_derivatives(&self, slack: &[f64], grad: &mut [f64], hess: &mut [f64]) {
        let n = self.n;
        for (i, s) in slack.iter().enumerate() {
            let row = self.row(i);
            let inv = 1.0 / s;
            let inv2 = inv * inv;
            for &a in &self.nz[i] {
                grad[a] += row[a] * inv;
                let ra = row[a] * inv2;
                for &b in &self.nz[i] {
                    hess[a * n + b] += ra * row[b];
                }
            }
        }
    }

    /// Largest step along `dx` that keeps all slacks nonnegative.
    fn max_step(&self, slack: &[f64], dx: &[f64]) -> Option<f64> {
        (0..self.len())
            .filter_map(|i| {
                let d = self.dot(i, dx);
                (d > 0.0).then(|| slack[i] / d)
            })
            .reduce(f64::min)
    }
}

/// Result of a phase I search.
#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible { x: RealVector, min_slack: f64 },
    Infeasible,
}

/// Finds a strictly feasible point of `sys` by minimizing the worst
/// violation `s` subject to `G x - h <= s` with the barrier method.
///
/// Returns as soon as every slack reaches [`FEASIBILITY_SLACK`]. A point
/// with smaller but positive slack is returned when nothing better exists.
pub fn find_strictly_feasible(sys: &InequalitySystem, cfg: &SolverConfig) -> Feasibility {
    find_from(sys, vec![0.0; sys.dim()], cfg)
}

fn find_from(sys: &InequalitySystem, x0: Vec<f64>, cfg: &SolverConfig) -> Feasibility {
    let n = sys.dim();
    let start_slack = sys.min_slack(&x0);
    if start_slack >= FEASIBILITY_SLACK {
        return Feasibility::Feasible { x: RealVector(x0), min_slack: start_slack };
    }
    let mut aug = InequalitySystem::new(n + 1);
    let mut row = vec![0.0; n + 1];
    for i in 0..sys.len() {
        row[..n].copy_from_slice(sys.row(i));
        row[n] = -1.0;
        aug.push(&row, sys.rhs(i));
    }
    let mut z0 = x0;
    z0.push(1.0 - start_slack);
    let mut cost = vec![0.0; n + 1];
    cost[n] = 1.0;
    let f = Linear(cost);
    let mut check = |_: &[f64], s: f64, gap: f64| {
        if s <= -FEASIBILITY_SLACK || gap <= 1e-12 * s.abs().max(1.0) {
            Verdict::Stop(SolveStatus::Converged)
        } else if s - gap >= -INFEASIBILITY_TOL {
            Verdict::Stop(SolveStatus::Infeasible)
        } else {
            Verdict::Continue
        }
    };
    let mut peek = |z: &[f64]| sys.min_slack(&z[..n]) >= FEASIBILITY_SLACK;
    let cfg = SolverConfig { max_outer: cfg.max_outer.max(60), ..*cfg };
    let run = minimize(&f, &aug, z0, 1.0, &cfg, &mut check, &mut peek, false);
    let mut x = run.x;
    x.truncate(n);
    let min_slack = sys.min_slack(&x);
    if run.status != SolveStatus::Infeasible && min_slack > 0.0 {
        Feasibility::Feasible { x: RealVector(x), min_slack }
    } else {
        Feasibility::Infeasible
    }
}

/// Minimizes the criterion over the convex hull. For UBMSEP the
/// nonnegative-margin rows are appended to the polyhedron rows, which keeps
/// the problem convex.
pub fn solve_relaxed(objective: &Objective, poly: &Polyhedron, cfg: &SolverConfig) -> Result<RelaxedSolution> {
    check_dims(objective, poly.antennas)?;
    cfg.validate()?;
    let n = 2 * poly.antennas;
    let mm = objective.margin_matrix();
    let c = vec![0.0; 2 * mm.users()];
    let l: Vec<f64> = (0..2 * mm.users()).flat_map(|r| mm.row(r).iter().copied()).collect();
    Ok(solve_margin_problem(objective.criterion(), objective.offset(), &c, &l, n, &poly.to_system(), cfg, None))
}

/// Minimizes `g([f_r; v_r])` over the free tail `v_r` in the sub-polyhedron.
/// The prefix enters only through the constant margin offset `F f_r`.
pub fn solve_subproblem(
    objective: &Objective,
    f_r: &[f64],
    sub: &SubPolyhedron,
    cfg: &SolverConfig,
) -> Result<RelaxedSolution> {
    if f_r.len() != 2 * sub.fixed {
        return Err(Error::Dimension(format!("prefix has length {}, expected {}", f_r.len(), 2 * sub.fixed)));
    }
    check_dims(objective, sub.fixed + sub.free_dim() / 2)?;
    cfg.validate()?;
    Ok(solve_conditioned(objective, f_r, &sub.to_system(), cfg))
}

fn check_dims(objective: &Objective, antennas: usize) -> Result<()> {
    let dim = objective.margin_matrix().dim();
    if dim != 2 * antennas {
        return Err(Error::Dimension(format!("objective has {dim} real coordinates, polyhedron {}", 2 * antennas)));
    }
    Ok(())
}

/// Subproblem solve against a prebuilt tail system. No validation.
pub(crate) fn solve_conditioned(
    objective: &Objective,
    f_r: &[f64],
    tail: &InequalitySystem,
    cfg: &SolverConfig,
) -> RelaxedSolution {
    solve_conditioned_cut(objective, f_r, tail, cfg, None)
}

pub(crate) fn solve_conditioned_cut(
    objective: &Objective,
    f_r: &[f64],
    tail: &InequalitySystem,
    cfg: &SolverConfig,
    cutoff: Option<Cutoff>,
) -> RelaxedSolution {
    let mm = objective.margin_matrix();
    let first = f_r.len();
    let n = tail.dim();
    let rows = 2 * mm.users();
    let mut c = Vec::with_capacity(rows);
    let mut l = Vec::with_capacity(rows * n);
    for r in 0..rows {
        let row = mm.row(r);
        c.push(row[..first].iter().zip(f_r).map(|(a, b)| a * b).sum());
        l.extend_from_slice(&row[first..]);
    }
    solve_margin_problem(objective.criterion(), objective.offset(), &c, &l, n, tail, cfg, cutoff)
}

#[allow(clippy::too_many_arguments)]
fn solve_margin_problem(
    kind: Criterion,
    offset: f64,
    c: &[f64],
    l: &[f64],
    n: usize,
    base: &InequalitySystem,
    cfg: &SolverConfig,
    cutoff: Option<Cutoff>,
) -> RelaxedSolution {
    let mut sys = base.clone();
    if kind == Criterion::Ubmsep {
        let mut row = vec![0.0; n];
        for (r, &cr) in c.iter().enumerate() {
            for (d, s) in row.iter_mut().zip(&l[r * n..(r + 1) * n]) {
                *d = -s;
            }
            sys.push(&row, cr);
        }
    }
    let f = MarginSmooth { kind, c, l, n };
    let mut x0 = vec![0.0; n];
    if sys.min_slack(&x0) < FEASIBILITY_SLACK || !f.value(&x0).is_finite() {
        match find_from(&sys, x0, cfg) {
            Feasibility::Feasible { x, .. } => x0 = x.0,
            Feasibility::Infeasible => return RelaxedSolution::infeasible(),
        }
    }
    let v0 = f.value(&x0);
    if !v0.is_finite() {
        return RelaxedSolution::infeasible();
    }
    let m = sys.len() as f64;
    let t0 = cfg.t0.unwrap_or(m / v0.max(1e-300));
    let eps = cfg.eps_solve;
    let mut check = |_: &[f64], v: f64, gap: f64| {
        if gap <= eps * v.max(f64::MIN_POSITIVE) {
            return Verdict::Stop(SolveStatus::Converged);
        }
        match cutoff {
            Some(c) if v - gap >= c.threshold || (v < c.threshold && gap <= c.below_rel_gap * v) => {
                Verdict::Stop(SolveStatus::CutOff)
            }
            _ => Verdict::Continue,
        }
    };
    let run = minimize(&f, &sys, x0, t0, cfg, &mut check, &mut |_| false, true);
    RelaxedSolution {
        value: run.value - offset,
        normalized: run.value,
        gap: run.gap,
        status: run.status,
        multipliers: run.multipliers,
        newton_steps: run.newton_steps,
        x_r_lb: RealVector(run.x),
    }
}
