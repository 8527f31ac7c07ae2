use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::convex::solve_conditioned;
use crate::model::generate_channel;

fn instance(seed: u64, k: usize, m: usize, alpha_s: usize, alpha_x: usize, sigma: f64) -> PrecodingInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = generate_channel(k, m, 1.0, &mut rng).unwrap();
    let symbols = (0..k).map(|_| rng.gen_range(0..alpha_s)).collect();
    PrecodingInstance::new(h, symbols, sigma, alpha_s, alpha_x).unwrap()
}

fn assert_matches_exhaustive(inst: &PrecodingInstance, cfg: &BnbConfig, tag: &str) -> BnbOutcome {
    let out = solve_bnb(inst, cfg).unwrap();
    let ex = exhaustive_msep(inst, cfg.criterion).unwrap();
    assert_eq!(out.termination, Termination::Optimal, "{tag}");
    assert!((out.normalized - ex.normalized).abs() <= 1e-9, "{tag}: bnb {} vs exhaustive {}", out.normalized, ex.normalized);
    out
}

#[test]
fn small_trees_match_enumeration() {
    for seed in 0..40 {
        for criterion in [Criterion::Qmsep, Criterion::Ubmsep] {
            let inst = instance(seed, 1, 2, 4, 4, 0.3 + 0.02 * seed as f64);
            assert_matches_exhaustive(&inst, &BnbConfig::new(criterion), &format!("seed {seed} {criterion}"));
        }
    }
}

#[test]
fn k2_m5_matches_enumeration() {
    for seed in 0..6 {
        for (alpha_s, criterion, sigma) in
            [(4, Criterion::Qmsep, 1.0), (4, Criterion::Qmsep, 0.2), (4, Criterion::Ubmsep, 0.3), (8, Criterion::Ubmsep, 0.5)]
        {
            let inst = instance(50 + seed, 2, 5, alpha_s, 4, sigma);
            assert_matches_exhaustive(&inst, &BnbConfig::new(criterion), &format!("seed {seed} {criterion} {sigma}"));
        }
    }
}

#[test]
fn every_projection_reaches_the_optimum() {
    for seed in 0..5 {
        let inst = instance(90 + seed, 2, 4, 8, 8, 0.4);
        for projection in [ProjectionMethod::Uq, ProjectionMethod::PartialGs, ProjectionMethod::FullGs] {
            let cfg = BnbConfig { projection, ..BnbConfig::new(Criterion::Ubmsep) };
            assert_matches_exhaustive(&inst, &cfg, &format!("seed {seed} {projection}"));
        }
    }
}

#[test]
fn aligned_root_exits_immediately() {
    let h = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    let inst = PrecodingInstance::new(h, vec![0], 0.5, 4, 4).unwrap();
    let out = solve_bnb(&inst, &BnbConfig::new(Criterion::Qmsep)).unwrap();
    assert_eq!(out.indices, vec![0]);
    assert_eq!(out.termination, Termination::Optimal);
    assert_eq!(out.counters.nodes_expanded, 0);
    assert_eq!(out.counters.subproblems_solved, 1);
}

#[test]
fn prune_boundaries() {
    let inc = Incumbent { indices: vec![0], value: 0.8 };
    let rec = |lb: f64| NodeRecord { prefix: vec![0], lower_bound: lb, tail_lb: vec![] };
    let kept = prune(vec![rec(0.8), rec(0.8 * (1.0 - 1e-3)), rec(f64::INFINITY), rec(0.1)], &inc, 5e-7);
    assert_eq!(kept.iter().map(|r| r.lower_bound).collect::<Vec<_>>(), vec![0.8 * (1.0 - 1e-3), 0.1]);
    // tiny delta keeps anything strictly below
    assert!(survives(0.8 - 1e-12, 0.8, 1e-30));
    assert!(!survives(0.8, 0.8, 1e-30));
    // nonpositive incumbent
    assert!(!survives(-1.0, -1.0, 5e-7));
    assert!(survives(-1.1, -1.0, 5e-7));
    // no incumbent yet
    assert!(survives(3.0, f64::INFINITY, 5e-7));
    assert!(!survives(f64::INFINITY, f64::INFINITY, 5e-7));
}

#[test]
fn optimal_prefixes_survive_every_layer() {
    // run the layers by hand and confirm the exhaustive optimum's prefix is kept
    let cfg = BnbConfig::new(Criterion::Qmsep);
    for seed in 0..5 {
        let inst = instance(120 + seed, 2, 4, 4, 4, 0.4);
        let ex = exhaustive_msep(&inst, Criterion::Qmsep).unwrap();
        let out = solve_bnb(&inst, &cfg).unwrap();
        let obj = Objective::build(&inst, Criterion::Qmsep).unwrap();
        let poly = build_polyhedron(4, 4).unwrap();
        for p in 1..4 {
            let prefix = &ex.indices[..p];
            let f_r = to_real(&inst.transmit_vector(prefix));
            let sol = solve_conditioned(&obj, &f_r, &restrict_unchecked(&poly, p).to_system(), &cfg.solver);
            assert!(sol.lower_bound() <= ex.normalized * (1.0 + 1e-12));
            assert!(survives(sol.lower_bound(), out.normalized, cfg.delta) || sol.lower_bound() >= ex.normalized * (1.0 - cfg.delta * ex.normalized));
        }
    }
}

#[test]
fn qos_vacuous_targets_exit_at_first_upper_bound() {
    let inst = instance(7, 2, 5, 4, 4, 0.5);
    for criterion in [Criterion::Qmsep, Criterion::Ubmsep] {
        let out = solve_bnb_qos(&inst, &BnbConfig::new(criterion), &[1.0, 1.0]).unwrap();
        assert!(matches!(out.termination, Termination::QosSatisfied | Termination::Optimal));
        assert_eq!(out.counters.nodes_expanded, 0);
        assert_eq!(out.counters.subproblems_solved, 1);
    }
    assert!(solve_bnb_qos(&inst, &BnbConfig::new(Criterion::Qmsep), &[0.0, 1.0]).is_err());
    assert!(solve_bnb_qos(&inst, &BnbConfig::new(Criterion::Qmsep), &[0.5]).is_err());
}

#[test]
fn qos_unreachable_targets_reproduce_plain_search() {
    for seed in 0..10 {
        for criterion in [Criterion::Qmsep, Criterion::Ubmsep] {
            let inst = instance(200 + seed, 2, 4, 4, 4, 0.45);
            let cfg = BnbConfig::new(criterion);
            let plain = solve_bnb(&inst, &cfg).unwrap();
            let ex = exhaustive_msep(&inst, criterion).unwrap();
            let obj = Objective::build(&inst, criterion).unwrap();
            let sep = obj.sep(&ex.x).unwrap();
            let lambda: Vec<f64> = sep.values.iter().map(|p| (p - 1e-9).max(1e-300)).collect();
            let qos = solve_bnb_qos(&inst, &cfg, &lambda).unwrap();
            assert_eq!(qos.indices, plain.indices, "seed {seed} {criterion}");
            assert_eq!(qos.counters, plain.counters);
            assert_eq!(qos.termination, Termination::Optimal);
        }
    }
}

#[test]
fn qos_never_expands_more_nodes() {
    for seed in 0..25 {
        let inst = instance(300 + seed, 2, 4, 8, 8, 0.5);
        let cfg = BnbConfig::new(Criterion::Ubmsep);
        let plain = solve_bnb(&inst, &cfg).unwrap();
        let obj = Objective::build(&inst, Criterion::Ubmsep).unwrap();
        let target: Vec<f64> = obj.sep(&plain.x).unwrap().values.iter().map(|p| (p * 1.5).min(1.0)).collect();
        let qos = solve_bnb_qos(&inst, &cfg, &target).unwrap();
        assert!(qos.counters.nodes_expanded <= plain.counters.nodes_expanded);
        assert!(obj.sep(&qos.x).unwrap().satisfies(&target) || qos.termination == Termination::Optimal);
    }
}

#[test]
fn budget_stops_with_incumbent() {
    let inst = instance(11, 3, 5, 8, 8, 0.6);
    let cfg = BnbConfig { node_budget: Some(3), ..BnbConfig::new(Criterion::Ubmsep) };
    let out = solve_bnb(&inst, &cfg).unwrap();
    if out.counters.subproblems_solved > 1 || out.termination == Termination::Budget {
        assert_eq!(out.termination, Termination::Budget);
        assert_eq!(out.counters.nodes_expanded, 0);
    }
    assert_eq!(out.indices.len(), 5);
}

#[test]
fn layer_execution_mode_does_not_change_results() {
    for seed in 0..4 {
        let inst = instance(400 + seed, 2, 5, 8, 8, 0.4);
        let seq = BnbConfig { execution: Execution::Sequential, ..BnbConfig::new(Criterion::Ubmsep) };
        let par = BnbConfig { execution: Execution::Parallel, ..seq };
        assert_eq!(solve_bnb(&inst, &seq).unwrap(), solve_bnb(&inst, &par).unwrap());
    }
}

#[test]
fn exhaustive_single_antenna_matches_scan() {
    let inst = instance(1, 2, 1, 8, 8, 0.4);
    let obj = Objective::build(&inst, Criterion::Ubmsep).unwrap();
    let so = SymbolObjective::new(&obj, inst.transmit_alphabet()).with_margin_constraints(true);
    let ex = exhaustive_msep(&inst, Criterion::Ubmsep).unwrap();
    let scan = (0..8).map(|a| so.value(&[a])).fold(f64::INFINITY, f64::min);
    if scan.is_finite() {
        assert_eq!(ex.normalized, scan);
        assert!(!ex.unconstrained);
    } else {
        assert!(ex.unconstrained);
    }
    let mm = exhaustive_mmddt(&inst).unwrap();
    let data = crate::objectives::build_ubmsep(&inst).unwrap();
    let best = (0..8)
        .map(|a| {
            crate::objectives::mddt(&data, &inst.transmit_vector(&[a]))
                .unwrap()
                .iter()
                .map(|&(u, v)| u.min(v))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((mm.objective - best).abs() < 1e-12);
}

#[test]
fn exhaustive_beats_random_samples_and_mmddt_dominates() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let inst = instance(5, 2, 5, 4, 4, 0.3);
    let obj = Objective::build(&inst, Criterion::Qmsep).unwrap();
    let so = SymbolObjective::new(&obj, inst.transmit_alphabet());
    let ex = exhaustive_msep(&inst, Criterion::Qmsep).unwrap();
    for _ in 0..1000 {
        let idx: Vec<usize> = (0..5).map(|_| rng.gen_range(0..4)).collect();
        assert!(ex.normalized <= so.value(&idx));
    }
    let mm = exhaustive_mmddt(&inst).unwrap();
    let data = crate::objectives::build_ubmsep(&inst).unwrap();
    let at_opt = crate::objectives::mddt(&data, &ex.x).unwrap().iter().map(|&(u, v)| u.min(v)).fold(f64::INFINITY, f64::min);
    assert!(mm.objective >= at_opt - 1e-15);
    assert!(matches!(
        exhaustive_msep_with_cap(&inst, Criterion::Qmsep, 100),
        Err(Error::EnumerationCap { candidates: 1024, cap: 100 })
    ));
}
