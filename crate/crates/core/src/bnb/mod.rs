//! Optimal discrete precoding by breadth-first branch-and-bound, its
//! QoS early-exit variant, and exhaustive-search references.

mod exhaustive;

use num_complex::Complex64;

use crate::convex::{
    build_polyhedron, restrict_unchecked, solve_conditioned_cut, solve_relaxed, Cutoff, InequalitySystem, SolveStatus,
    SolverConfig,
};
use crate::error::{Error, Result};
use crate::model::{to_complex, to_real, PrecodingInstance};
use crate::objectives::{Criterion, Objective, SymbolObjective};
use crate::par::{self, Execution};
use crate::projection::{full_gs_from, project_tail, GsOptions, ProjectionMethod};

pub use exhaustive::{
    exhaustive_mmddt, exhaustive_mmddt_with_cap, exhaustive_msep, exhaustive_msep_with_cap, ExhaustiveResult,
    DEFAULT_ENUMERATION_CAP,
};

/// Entrywise distance under which the relaxed root solution counts as discrete.
pub const ROOT_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BnbConfig {
    /// Pruning slack: a node survives iff `g_lb < (1 - delta * g_best) * g_best`.
    pub delta: f64,
    pub criterion: Criterion,
    /// Projection used to build upper bounds from relaxed solutions.
    pub projection: ProjectionMethod,
    pub gs: GsOptions,
    pub solver: SolverConfig,
    /// Stop once this many tree nodes have been generated.
    pub node_budget: Option<usize>,
    /// Largest `alpha_x^M` searched exhaustively when the tree search cannot run.
    pub enumeration_cap: u128,
    /// How the subproblems of one layer are solved.
    pub execution: Execution,
    /// Let subproblem solves stop once their bound is decided against the
    /// incumbent: at the pruning threshold, or below it with this relative
    /// gap. `None` solves every subproblem to the solver tolerance.
    pub early_stop_gap: Option<f64>,
}

impl BnbConfig {
    pub fn new(criterion: Criterion) -> Self {
        Self {
            delta: 5e-7,
            criterion,
            projection: ProjectionMethod::FullGs,
            gs: GsOptions::default(),
            solver: SolverConfig::default(),
            node_budget: Some(1_000_000),
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            execution: Execution::Sequential,
            early_stop_gap: Some(1e-3),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Parameter(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        self.solver.validate()
    }
}

/// A tree node: a fixed prefix of antenna symbols and its conditioned bound.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub prefix: Vec<usize>,
    /// Lower bound on the normalized objective of every completion.
    pub lower_bound: f64,
    /// Relaxed tail minimizer (empty when the subproblem was infeasible).
    pub tail_lb: Vec<Complex64>,
}

/// Best discrete vector seen so far and its normalized objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    pub indices: Vec<usize>,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Optimal,
    QosSatisfied,
    Budget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BnbCounters {
    /// Tree nodes generated below the root, leaves included.
    pub nodes_expanded: usize,
    /// Convex solves, the root relaxation included.
    pub subproblems_solved: usize,
    pub nodes_pruned: usize,
    pub layers_completed: usize,
    pub infeasible_subproblems: usize,
    /// Solves that hit the iteration limit; their bounds are still used.
    pub solver_max_iter: usize,
    /// Solves stopped early against the incumbent.
    pub solver_cutoffs: usize,
    pub newton_steps: usize,
    /// The tree search could not run (UBMSEP with no margin-feasible
    /// region) and the plain objective was minimized instead.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnbOutcome {
    pub indices: Vec<usize>,
    pub x: Vec<Complex64>,
    /// Objective in its defining form.
    pub objective: f64,
    pub normalized: f64,
    pub termination: Termination,
    pub counters: BnbCounters,
}

/// Bounds strictly below this value survive against incumbent value `best`.
pub fn prune_threshold(best: f64, delta: f64) -> f64 {
    if best == f64::INFINITY {
        f64::INFINITY
    } else if best > 0.0 {
        let gamma = (delta * best).min(1.0);
        (1.0 - gamma) * best
    } else {
        best - delta * best.abs() - 1e-12
    }
}

/// Whether a node with bound `lb` survives against incumbent value `best`.
pub fn survives(lb: f64, best: f64, delta: f64) -> bool {
    if lb.is_nan() || lb == f64::INFINITY {
        return false;
    }
    best == f64::INFINITY || lb < prune_threshold(best, delta)
}

/// Keeps the records whose bound can still beat the incumbent.
pub fn prune(records: Vec<NodeRecord>, incumbent: &Incumbent, delta: f64) -> Vec<NodeRecord> {
    records.into_iter().filter(|r| survives(r.lower_bound, incumbent.value, delta)).collect()
}

/// Optimal vector for the configured criterion.
pub fn solve_bnb(instance: &PrecodingInstance, cfg: &BnbConfig) -> Result<BnbOutcome> {
    cfg.validate()?;
    Search::new(instance, cfg, None)?.run()
}

/// Like [`solve_bnb`], but returns the first constructed upper bound whose
/// per-user SEP is at most `lambda`.
pub fn solve_bnb_qos(instance: &PrecodingInstance, cfg: &BnbConfig, lambda: &[f64]) -> Result<BnbOutcome> {
    cfg.validate()?;
    if lambda.len() != instance.users() {
        return Err(Error::Dimension(format!("{} QoS targets for {} users", lambda.len(), instance.users())));
    }
    if lambda.iter().any(|&l| !(l > 0.0 && l <= 1.0)) {
        return Err(Error::Parameter("QoS targets must lie in (0, 1]".into()));
    }
    Search::new(instance, cfg, Some(lambda))?.run()
}

struct Search<'a> {
    instance: &'a PrecodingInstance,
    cfg: &'a BnbConfig,
    lambda: Option<&'a [f64]>,
    objective: Objective,
    symbols: SymbolObjective,
    counters: BnbCounters,
}

struct Expansion {
    record: NodeRecord,
    status: SolveStatus,
    newton_steps: usize,
    upper: Option<Incumbent>,
}

impl<'a> Search<'a> {
    fn new(instance: &'a PrecodingInstance, cfg: &'a BnbConfig, lambda: Option<&'a [f64]>) -> Result<Self> {
        let objective = Objective::build(instance, cfg.criterion)?;
        let symbols = SymbolObjective::new(&objective, instance.transmit_alphabet()).with_margin_constraints(true);
        Ok(Self { instance, cfg, lambda, objective, symbols, counters: BnbCounters::default() })
    }

    fn finish(&self, indices: Vec<usize>, normalized: f64, termination: Termination) -> BnbOutcome {
        BnbOutcome {
            x: self.instance.transmit_vector(&indices),
            indices,
            objective: normalized - self.symbols.offset(),
            normalized,
            termination,
            counters: self.counters,
        }
    }

    fn qos_met(&self, indices: &[usize]) -> bool {
        let Some(lambda) = self.lambda else { return false };
        self.objective.sep(&self.instance.transmit_vector(indices)).is_ok_and(|s| s.satisfies(lambda))
    }

    fn run(mut self) -> Result<BnbOutcome> {
        let m = self.instance.antennas();
        let order = self.instance.alpha_x;
        let poly = build_polyhedron(m, order)?;
        let tails: Vec<InequalitySystem> = (0..m).map(|p| restrict_unchecked(&poly, p).to_system()).collect();

        let root = solve_relaxed(&self.objective, &poly, &self.cfg.solver)?;
        self.counters.subproblems_solved += 1;
        self.note_status(root.status, root.newton_steps);
        if root.status == SolveStatus::Infeasible {
            return Ok(self.fallback());
        }
        let x_lb = to_complex(&root.x_r_lb)?;
        let x_ub = project_tail(self.cfg.projection, &[], &x_lb, &self.symbols, self.cfg.gs);
        let alphabet = self.instance.transmit_alphabet();
        let v_ub = self.symbols.value(&x_ub);
        if x_lb.iter().zip(&x_ub).all(|(z, &i)| (z - alphabet.point(i)).norm() <= ROOT_MATCH_TOL) && v_ub.is_finite() {
            return Ok(self.finish(x_ub, v_ub, Termination::Optimal));
        }
        let mut best = Incumbent { indices: x_ub, value: v_ub };
        if self.qos_met(&best.indices) {
            return Ok(self.finish(best.indices, best.value, Termination::QosSatisfied));
        }
        let root_node = NodeRecord { prefix: Vec::new(), lower_bound: root.lower_bound(), tail_lb: x_lb };
        let mut survivors = self.prune_counted(vec![root_node], &best);

        for p in 1..m {
            if survivors.is_empty() {
                break;
            }
            let children: Vec<Vec<usize>> = survivors
                .iter()
                .flat_map(|s| {
                    (0..order).map(move |a| {
                        let mut c = s.prefix.clone();
                        c.push(a);
                        c
                    })
                })
                .collect();
            if self.over_budget(children.len()) {
                return Ok(self.finish(best.indices, best.value, Termination::Budget));
            }
            let tail = &tails[p];
            let cutoff = self.cutoff(&best);
            let expansions = par::map(&children, self.cfg.execution, |prefix| self.expand(prefix, tail, cutoff));
            let mut records = Vec::with_capacity(expansions.len());
            for e in expansions {
                self.counters.nodes_expanded += 1;
                self.counters.subproblems_solved += 1;
                self.note_status(e.status, e.newton_steps);
                if let Some(ub) = e.upper {
                    if ub.value < best.value {
                        best = ub.clone();
                    }
                    if self.qos_met(&ub.indices) {
                        return Ok(self.finish(ub.indices, ub.value, Termination::QosSatisfied));
                    }
                }
                records.push(e.record);
            }
            survivors = self.prune_counted(records, &best);
            self.counters.layers_completed += 1;
        }

        let leaves = survivors.len() * order;
        if self.over_budget(leaves) {
            return Ok(self.finish(best.indices, best.value, Termination::Budget));
        }
        let mut margins = vec![0.0; self.symbols.width()];
        for s in &survivors {
            let base = self.symbols.margins(&s.prefix);
            for a in 0..order {
                margins.copy_from_slice(&base);
                self.symbols.accumulate(&mut margins, m - 1, a, 1.0);
                let v = self.symbols.value_at_margins(&margins);
                self.counters.nodes_expanded += 1;
                if v < best.value || (v == best.value && lex_less(&s.prefix, a, &best.indices)) {
                    let mut idx = s.prefix.clone();
                    idx.push(a);
                    best = Incumbent { indices: idx, value: v };
                }
            }
        }
        self.counters.layers_completed += 1;
        if best.value == f64::INFINITY {
            return Ok(self.fallback());
        }
        Ok(self.finish(best.indices, best.value, Termination::Optimal))
    }

    /// Bounds at or above the layer-start pruning threshold are pruned
    /// whatever happens later in the layer, so subproblems may stop there.
    fn cutoff(&self, best: &Incumbent) -> Option<Cutoff> {
        let rel = self.cfg.early_stop_gap?;
        let threshold = prune_threshold(best.value, self.cfg.delta);
        threshold.is_finite().then_some(Cutoff { threshold, below_rel_gap: rel })
    }

    fn expand(&self, prefix: &[usize], tail: &InequalitySystem, cutoff: Option<Cutoff>) -> Expansion {
        let f_r = to_real(&self.instance.transmit_vector(prefix));
        let sol = solve_conditioned_cut(&self.objective, &f_r, tail, &self.cfg.solver, cutoff);
        if sol.status == SolveStatus::Infeasible {
            let record = NodeRecord { prefix: prefix.to_vec(), lower_bound: f64::INFINITY, tail_lb: Vec::new() };
            return Expansion { record, status: sol.status, newton_steps: sol.newton_steps, upper: None };
        }
        let tail_lb = to_complex(&sol.x_r_lb).expect("even length");
        let mut indices = prefix.to_vec();
        indices.extend(project_tail(self.cfg.projection, prefix, &tail_lb, &self.symbols, self.cfg.gs));
        let value = self.symbols.value(&indices);
        Expansion {
            record: NodeRecord { prefix: prefix.to_vec(), lower_bound: sol.lower_bound(), tail_lb },
            status: sol.status,
            newton_steps: sol.newton_steps,
            upper: Some(Incumbent { indices, value }),
        }
    }

    fn note_status(&mut self, status: SolveStatus, steps: usize) {
        self.counters.newton_steps += steps;
        match status {
            SolveStatus::Infeasible => self.counters.infeasible_subproblems += 1,
            SolveStatus::MaxIter => self.counters.solver_max_iter += 1,
            SolveStatus::CutOff => self.counters.solver_cutoffs += 1,
            SolveStatus::Converged => {}
        }
    }

    fn prune_counted(&mut self, records: Vec<NodeRecord>, best: &Incumbent) -> Vec<NodeRecord> {
        let before = records.len();
        let kept = prune(records, best, self.cfg.delta);
        self.counters.nodes_pruned += before - kept.len();
        kept
    }

    fn over_budget(&self, extra: usize) -> bool {
        self.cfg.node_budget.is_some_and(|b| self.counters.nodes_expanded + extra > b)
    }

    /// Minimizes the plain objective when the margin-constrained problem has
    /// no feasible point.
    fn fallback(&mut self) -> BnbOutcome {
        self.counters.fallback = true;
        let free = self.symbols.clone().with_margin_constraints(false);
        let fits = exhaustive::candidate_count(self.instance.alpha_x, self.instance.antennas())
            .is_some_and(|n| n <= self.cfg.enumeration_cap);
        let indices = if fits {
            exhaustive::enumerate_min(&free, &|m| free.value_at_margins(m)).0
        } else {
            let start = vec![0; self.instance.antennas()];
            full_gs_from(&start, &free, 0, GsOptions { until_fixpoint: true })
        };
        let value = free.value(&indices);
        self.finish(indices, value, Termination::Optimal)
    }
}

/// `prefix ++ [last] < other` lexicographically.
fn lex_less(prefix: &[usize], last: usize, other: &[usize]) -> bool {
    prefix.iter().copied().chain(std::iter::once(last)).lt(other.iter().copied())
}

#[cfg(test)]
mod tests;
