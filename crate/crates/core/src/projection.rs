//! Mapping relaxed solutions onto the transmit alphabet.
//!
//! Discrete vectors are carried as alphabet index tuples; use
//! [`PskAlphabet::point`] or [`crate::model::PrecodingInstance::transmit_vector`]
//! to turn them back into complex entries.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::PskAlphabet;
use crate::objectives::SymbolObjective;

/// An entry of the relaxed solution closer than this to an alphabet point
/// counts as already discrete.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProjectionMethod {
    /// Entrywise nearest alphabet point.
    Uq,
    /// Quantize, then re-optimize the entries that were not already discrete.
    PartialGs,
    /// Quantize, then re-optimize every entry once.
    FullGs,
}

impl fmt::Display for ProjectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProjectionMethod::Uq => "UQ",
            ProjectionMethod::PartialGs => "PartialGS",
            ProjectionMethod::FullGs => "FullGS",
        })
    }
}

impl FromStr for ProjectionMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "uq" => Ok(ProjectionMethod::Uq),
            "partialgs" => Ok(ProjectionMethod::PartialGs),
            "fullgs" => Ok(ProjectionMethod::FullGs),
            _ => Err(Error::Parameter(format!("unknown projection {s:?}"))),
        }
    }
}

/// Greedy-search options.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GsOptions {
    /// Repeat sweeps until no entry changes instead of a single sweep.
    pub until_fixpoint: bool,
}

const MAX_SWEEPS: usize = 64;

/// Nearest alphabet index per entry, ties to the lowest index.
pub fn project_uq(x: &[Complex64], alphabet: &PskAlphabet) -> Vec<usize> {
    x.iter().map(|&z| alphabet.nearest(z)).collect()
}

/// Re-optimizes, in ascending order, each entry whose relaxed value is not
/// an alphabet point. Entries before `start` are left alone.
pub fn project_partial_gs(x_ub: &[usize], x_lb: &[Complex64], g: &SymbolObjective) -> Vec<usize> {
    partial_gs_from(x_ub, x_lb, g, 0, GsOptions::default())
}

/// Single ascending sweep setting every entry to its conditional argmin.
pub fn project_full_gs(x_ub: &[usize], g: &SymbolObjective) -> Vec<usize> {
    full_gs_from(x_ub, g, 0, GsOptions::default())
}

/// Partial GS over entries `start..`; `x_lb` holds those tail entries only.
pub fn partial_gs_from(x_ub: &[usize], x_lb_tail: &[Complex64], g: &SymbolObjective, start: usize, opts: GsOptions) -> Vec<usize> {
    let targets: Vec<usize> = x_lb_tail
        .iter()
        .enumerate()
        .filter(|(_, &z)| g.alphabet().distance(z) > MEMBERSHIP_TOL)
        .map(|(i, _)| start + i)
        .collect();
    sweep(x_ub, g, &targets, opts)
}

/// Full GS over entries `start..`.
pub fn full_gs_from(x_ub: &[usize], g: &SymbolObjective, start: usize, opts: GsOptions) -> Vec<usize> {
    let targets: Vec<usize> = (start..x_ub.len()).collect();
    sweep(x_ub, g, &targets, opts)
}

/// Applies `method` to a relaxed tail, returning the projected tail indices.
/// The prefix only conditions the objective.
pub fn project_tail(
    method: ProjectionMethod,
    prefix: &[usize],
    tail_lb: &[Complex64],
    g: &SymbolObjective,
    opts: GsOptions,
) -> Vec<usize> {
    let mut full = prefix.to_vec();
    full.extend(project_uq(tail_lb, g.alphabet()));
    let out = match method {
        ProjectionMethod::Uq => full,
        ProjectionMethod::PartialGs => partial_gs_from(&full, tail_lb, g, prefix.len(), opts),
        ProjectionMethod::FullGs => full_gs_from(&full, g, prefix.len(), opts),
    };
    out[prefix.len()..].to_vec()
}

fn sweep(x_ub: &[usize], g: &SymbolObjective, targets: &[usize], opts: GsOptions) -> Vec<usize> {
    let mut x = x_ub.to_vec();
    if targets.is_empty() {
        return x;
    }
    let order = g.alphabet().order();
    let mut margins = g.margins(&x);
    let mut trial = vec![0.0; margins.len()];
    for _ in 0..if opts.until_fixpoint { MAX_SWEEPS } else { 1 } {
        let mut changed = false;
        for &p in targets {
            g.accumulate(&mut margins, p, x[p], -1.0);
            let mut best = 0;
            let mut best_v = f64::INFINITY;
            for a in 0..order {
                trial.copy_from_slice(&margins);
                g.accumulate(&mut trial, p, a, 1.0);
                let v = g.value_at_margins(&trial);
                if v < best_v {
                    best_v = v;
                    best = a;
                }
            }
            changed |= best != x[p];
            x[p] = best;
            g.accumulate(&mut margins, p, best, 1.0);
        }
        if !changed {
            break;
        }
        // drift from repeated incremental updates stays far below any tie, but
        // refresh anyway so each sweep starts from exact margins
        margins = g.margins(&x);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_channel, PrecodingInstance};
    use crate::objectives::{Criterion, Objective};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn objective(seed: u64, k: usize, m: usize, alpha_s: usize, alpha_x: usize, criterion: Criterion) -> SymbolObjective {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = generate_channel(k, m, 1.0, &mut rng).unwrap();
        let symbols = (0..k).map(|_| rng.gen_range(0..alpha_s)).collect();
        let inst = PrecodingInstance::new(h, symbols, 0.5, alpha_s, alpha_x).unwrap();
        SymbolObjective::new(&Objective::build(&inst, criterion).unwrap(), inst.transmit_alphabet())
    }

    #[test]
    fn uq_examples() {
        let a = PskAlphabet::unit(4).unwrap();
        let z = Complex64::from_polar(0.9, PI / 3.0);
        assert_eq!(project_uq(&[z], &a), vec![0]);
        assert!(((z - a.point(0)).norm_sqr() - 0.0710).abs() < 1e-3);
        assert!(((z - a.point(1)).norm_sqr() - 1.3441).abs() < 1e-4);
        assert_eq!(project_uq(&[a.point(2)], &a), vec![2]);
        assert_eq!(project_uq(&[Complex64::new(0.0, 0.0)], &a), vec![0]);
    }

    #[test]
    fn uq_is_idempotent_and_rotation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for order in [4, 8] {
            let a = PskAlphabet::unit(order).unwrap();
            let rot = Complex64::from_polar(1.0, 2.0 * PI / order as f64);
            for _ in 0..500 {
                let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let q = project_uq(&[z], &a)[0];
                assert_eq!(project_uq(&[a.point(q)], &a)[0], q);
                assert_eq!(project_uq(&[z * rot], &a)[0], (q + 1) % order);
            }
        }
    }

    #[test]
    fn partial_gs_skips_discrete_entries() {
        let g = objective(1, 2, 3, 4, 4, Criterion::Qmsep);
        let a = *g.alphabet();
        let x_lb: Vec<Complex64> = [3, 1, 2].iter().map(|&i| a.point(i)).collect();
        let x_ub = project_uq(&x_lb, &a);
        assert_eq!(project_partial_gs(&x_ub, &x_lb, &g), x_ub);
    }

    fn sweep_oracle(x: &[usize], targets: &[usize], g: &SymbolObjective) -> Vec<usize> {
        let mut x = x.to_vec();
        for &p in targets {
            let mut best = (f64::INFINITY, 0);
            for a in 0..g.alphabet().order() {
                let mut y = x.clone();
                y[p] = a;
                let v = g.value(&y);
                if v < best.0 {
                    best = (v, a);
                }
            }
            x[p] = best.1;
        }
        x
    }

    #[test]
    fn gs_matches_direct_reevaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..30 {
            for (alpha_s, alpha_x, c) in [(4, 4, Criterion::Qmsep), (8, 8, Criterion::Ubmsep)] {
                let g = objective(seed, 2, 3, alpha_s, alpha_x, c);
                let a = *g.alphabet();
                let x_lb: Vec<Complex64> = (0..3)
                    .map(|i| if i == 1 { a.point(rng.gen_range(0..alpha_x)) } else { Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)) })
                    .collect();
                let x_ub = project_uq(&x_lb, &a);
                let part = project_partial_gs(&x_ub, &x_lb, &g);
                assert_eq!(part, sweep_oracle(&x_ub, &[0, 2], &g));
                assert!(g.value(&part) <= g.value(&x_ub));
                let full = project_full_gs(&x_ub, &g);
                assert_eq!(full, sweep_oracle(&x_ub, &[0, 1, 2], &g));
                assert!(g.value(&full) <= g.value(&x_ub));
            }
        }
    }

    #[test]
    fn partial_with_all_entries_free_is_full() {
        for seed in 0..20 {
            let g = objective(seed, 3, 4, 4, 4, Criterion::Ubmsep);
            let x_lb: Vec<Complex64> = (0..4).map(|i| Complex64::new(0.1 * i as f64 - 0.13, 0.07)).collect();
            let x_ub = project_uq(&x_lb, g.alphabet());
            assert_eq!(project_partial_gs(&x_ub, &x_lb, &g), project_full_gs(&x_ub, &g));
        }
    }

    #[test]
    fn repeated_sweeps_never_increase() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for seed in 0..20 {
            let g = objective(seed, 2, 5, 8, 8, Criterion::Ubmsep);
            let start: Vec<usize> = (0..5).map(|_| rng.gen_range(0..8)).collect();
            let one = project_full_gs(&start, &g);
            let two = project_full_gs(&one, &g);
            let (v0, v1, v2) = (g.value(&start), g.value(&one), g.value(&two));
            assert!(v1 <= v0 && v2 <= v1);
            if v0.is_finite() {
                assert!(v1 - v2 <= v0 - v1 + 1e-15);
            }
            let fix = full_gs_from(&start, &g, 0, GsOptions { until_fixpoint: true });
            assert_eq!(project_full_gs(&fix, &g), fix);
        }
    }

    #[test]
    fn tail_projection_keeps_prefix_out() {
        let g = objective(4, 2, 4, 4, 4, Criterion::Qmsep);
        let tail = [Complex64::new(0.2, -0.1), Complex64::new(-0.3, 0.25)];
        let t = project_tail(ProjectionMethod::FullGs, &[1, 2], &tail, &g, GsOptions::default());
        assert_eq!(t.len(), 2);
        let uq = project_tail(ProjectionMethod::Uq, &[1, 2], &tail, &g, GsOptions::default());
        assert_eq!(uq, project_uq(&tail, g.alphabet()));
        assert!(g.value(&[1, 2, t[0], t[1]]) <= g.value(&[1, 2, uq[0], uq[1]]));
    }
}
