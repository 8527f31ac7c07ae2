use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::PrecodingInstance;
use crate::objectives::{build_ubmsep, Criterion, Objective, SymbolObjective};

/// Default limit on `alpha_x^M` for full enumeration.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 20;

/// Best vector found by full enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveResult {
    pub indices: Vec<usize>,
    pub x: Vec<Complex64>,
    /// Objective in its defining form (for MMDDT: the worst-case threshold distance).
    pub objective: f64,
    /// Normalized objective (for MMDDT: equal to `objective`).
    pub normalized: f64,
    /// UBMSEP only: no vector kept every margin nonnegative, so the
    /// unconstrained objective was minimized instead.
    pub unconstrained: bool,
}

pub(crate) fn candidate_count(order: usize, antennas: usize) -> Option<u128> {
    (order as u128).checked_pow(antennas as u32)
}

fn check_cap(order: usize, antennas: usize, cap: u128) -> Result<()> {
    match candidate_count(order, antennas) {
        Some(n) if n <= cap => Ok(()),
        n => Err(Error::EnumerationCap { candidates: n.unwrap_or(u128::MAX), cap }),
    }
}

/// Depth-first enumeration of all index tuples with incremental margins.
/// Returns the first tuple (in lexicographic order) minimizing `cost`.
pub(crate) fn enumerate_min(so: &SymbolObjective, cost: &dyn Fn(&[f64]) -> f64) -> (Vec<usize>, f64) {
    let m = so.antennas();
    let order = so.alphabet().order();
    let width = so.width();
    let mut stack = vec![0.0; (m + 1) * width];
    let mut idx = vec![0usize; m];
    let mut best = (vec![0; m], f64::INFINITY);
    let mut depth = 0;
    // idx[d] is the next candidate to try at depth d
    loop {
        if depth == m {
            let c = cost(&stack[m * width..]);
            if c < best.1 {
                best = (idx.iter().map(|&i| i - 1).collect(), c);
            }
            depth -= 1;
            continue;
        }
        if idx[depth] == order {
            if depth == 0 {
                break;
            }
            idx[depth] = 0;
            depth -= 1;
            continue;
        }
        let (lo, hi) = stack.split_at_mut((depth + 1) * width);
        let next = &mut hi[..width];
        next.copy_from_slice(&lo[depth * width..]);
        so.accumulate(next, depth, idx[depth], 1.0);
        idx[depth] += 1;
        depth += 1;
    }
    if best.1 == f64::INFINITY {
        // every candidate scored +inf; the lexicographically first one wins
        best.0 = vec![0; m];
    }
    best
}

/// Minimizes the criterion over all of `X^M`. For UBMSEP the
/// nonnegative-margin reformulation is solved, falling back to the plain
/// objective when no vector satisfies it.
pub fn exhaustive_msep(instance: &PrecodingInstance, criterion: Criterion) -> Result<ExhaustiveResult> {
    exhaustive_msep_with_cap(instance, criterion, DEFAULT_ENUMERATION_CAP)
}

pub fn exhaustive_msep_with_cap(instance: &PrecodingInstance, criterion: Criterion, cap: u128) -> Result<ExhaustiveResult> {
    check_cap(instance.alpha_x, instance.antennas(), cap)?;
    let obj = Objective::build(instance, criterion)?;
    let so = SymbolObjective::new(&obj, instance.transmit_alphabet()).with_margin_constraints(true);
    Ok(exhaustive_over(instance, &so))
}

pub(crate) fn exhaustive_over(instance: &PrecodingInstance, so: &SymbolObjective) -> ExhaustiveResult {
    let (mut indices, mut normalized) = enumerate_min(so, &|m| so.value_at_margins(m));
    let mut unconstrained = false;
    if normalized == f64::INFINITY && so.enforces_margins() {
        let free = so.clone().with_margin_constraints(false);
        (indices, normalized) = enumerate_min(&free, &|m| free.value_at_margins(m));
        unconstrained = true;
    }
    ExhaustiveResult {
        x: instance.transmit_vector(&indices),
        indices,
        objective: normalized - so.offset(),
        normalized,
        unconstrained,
    }
}

/// Maximizes the smallest decision-threshold distance over all users.
pub fn exhaustive_mmddt(instance: &PrecodingInstance) -> Result<ExhaustiveResult> {
    exhaustive_mmddt_with_cap(instance, DEFAULT_ENUMERATION_CAP)
}

pub fn exhaustive_mmddt_with_cap(instance: &PrecodingInstance, cap: u128) -> Result<ExhaustiveResult> {
    check_cap(instance.alpha_x, instance.antennas(), cap)?;
    let obj = Objective::Ubmsep(build_ubmsep(instance)?);
    let so = SymbolObjective::new(&obj, instance.transmit_alphabet());
    let (indices, neg) = enumerate_min(&so, &|m| -m.iter().copied().fold(f64::INFINITY, f64::min));
    // margins are distances scaled by 1 / sigma_w
    let margin = -neg * instance.sigma_w;
    Ok(ExhaustiveResult {
        x: instance.transmit_vector(&indices),
        indices,
        objective: margin,
        normalized: margin,
        unconstrained: false,
    })
}
