//! Property suites with fixed seeds. Every property reports pass/fail and,
//! on failure, the first offending instance.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use msep::bnb::{exhaustive_msep, solve_bnb, BnbConfig};
use msep::convex::{build_polyhedron, restrict_polyhedron, solve_subproblem, SolverConfig};
use msep::model::{complex_gaussian, generate_channel, hard_detect, to_real, PrecodingInstance};
use msep::objectives::{build_qmsep, build_ubmsep, sep_qmsep, sep_ubmsep_bound, Criterion, Objective, SymbolObjective};
use msep::sim::snr_to_sigma;

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Gradients,
    Hessians,
    Bounds,
    BnbVsExhaustive,
    SepVsMc,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Gradients, Suite::Hessians, Suite::Bounds, Suite::BnbVsExhaustive, Suite::SepVsMc];
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Gradients => "gradients",
            Suite::Hessians => "hessians",
            Suite::Bounds => "bounds",
            Suite::BnbVsExhaustive => "bnb-vs-exhaustive",
            Suite::SepVsMc => "sep-vs-mc",
        })
    }
}

impl FromStr for Suite {
    type Err = Failure;
    fn from_str(s: &str) -> Result<Self, Failure> {
        Suite::ALL.into_iter().find(|x| x.to_string() == s).ok_or_else(|| {
            let names: Vec<String> = Suite::ALL.iter().map(|x| x.to_string()).collect();
            Failure::Invalid(format!("unknown suite `{s}` (known: {})", names.join(", ")))
        })
    }
}

/// Problem data of a failing check, serializable for bug reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub alpha_s: usize,
    pub alpha_x: usize,
    pub sigma_w: f64,
    pub symbols: Vec<usize>,
    /// Channel rows, real parts.
    pub h_re: Vec<Vec<f64>>,
    pub h_im: Vec<Vec<f64>>,
    /// Real-composite evaluation point, if any.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub point: Vec<f64>,
    /// Fixed antenna symbols, if any.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub prefix: Vec<usize>,
    pub note: String,
}

impl Counterexample {
    fn new(inst: &PrecodingInstance, note: String) -> Self {
        let rows = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..inst.users()).map(|k| (0..inst.antennas()).map(|m| f(&inst.h[(k, m)])).collect()).collect()
        };
        Self {
            alpha_s: inst.alpha_s,
            alpha_x: inst.alpha_x,
            sigma_w: inst.sigma_w,
            symbols: inst.symbols.clone(),
            h_re: rows(|z| z.re),
            h_im: rows(|z| z.im),
            point: Vec::new(),
            prefix: Vec::new(),
            note,
        }
    }

    fn at(mut self, point: &[f64]) -> Self {
        self.point = point.to_vec();
        self
    }

    fn with_prefix(mut self, prefix: &[usize]) -> Self {
        self.prefix = prefix.to_vec();
        self
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("# unserializable counterexample: {e}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Property {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub counterexample: Option<Counterexample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub properties: Vec<Property>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(|p| p.passed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    /// Points, prefixes, instances or triples per property.
    pub count: usize,
    pub seed: u64,
    /// Noise draws per triple in the Monte Carlo suite.
    pub noise_draws: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { count: 100, seed: 1, noise_draws: 1_000_000 }
    }
}

impl SuiteOptions {
    /// Default size of each suite: 20 triples for the Monte Carlo check,
    /// 100 cases per property otherwise.
    pub fn for_suite(suite: Suite) -> Self {
        let count = if suite == Suite::SepVsMc { 20 } else { 100 };
        Self { count, ..Self::default() }
    }
}

pub const GRADIENT_TOL: f64 = 1e-6;
pub const HESSIAN_TOL: f64 = 1e-5;
pub const PSD_TOL: f64 = 1e-8;
pub const OBJECTIVE_MATCH_TOL: f64 = 1e-9;
/// System sizes `(K, M, alpha_x)` of the tree search cross-check.
pub const BNB_CONFIGS: [(usize, usize, usize); 4] = [(1, 4, 4), (2, 5, 4), (2, 4, 8), (3, 5, 4)];

pub fn run_suite(suite: Suite, opts: &SuiteOptions) -> SuiteReport {
    let properties = match suite {
        Suite::Gradients => gradients_with(opts, &|o, x| o.gradient(x)),
        Suite::Hessians => hessians(opts),
        Suite::Bounds => bounds(opts),
        Suite::BnbVsExhaustive => bnb_vs_exhaustive(opts, &BNB_CONFIGS),
        Suite::SepVsMc => sep_vs_mc(opts),
    };
    SuiteReport { suite, properties }
}

/// Tracks the worst value of a check and the first failure.
struct Tally {
    name: String,
    worst: f64,
    checked: usize,
    failure: Option<Counterexample>,
}

impl Tally {
    fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), worst: 0.0, checked: 0, failure: None }
    }

    fn record(&mut self, value: f64, ok: bool, cex: impl FnOnce() -> Counterexample) {
        self.checked += 1;
        if !(value <= self.worst) {
            self.worst = value;
        }
        if !ok && self.failure.is_none() {
            self.failure = Some(cex());
        }
    }

    fn finish(self, what: &str) -> Property {
        Property {
            passed: self.failure.is_none() && self.checked > 0,
            detail: format!("worst {what} {:.3e} over {} cases", self.worst, self.checked),
            name: self.name,
            counterexample: self.failure,
        }
    }
}

fn random_instance(rng: &mut ChaCha8Rng, k: usize, m: usize, alpha_s: usize, alpha_x: usize, snr: (f64, f64)) -> PrecodingInstance {
    let h = generate_channel(k, m, 1.0, rng).expect("positive sizes");
    let symbols = (0..k).map(|_| rng.gen_range(0..alpha_s)).collect();
    let sigma = snr_to_sigma(rng.gen_range(snr.0..=snr.1), 1.0);
    PrecodingInstance::new(h, symbols, sigma, alpha_s, alpha_x).expect("valid instance")
}

/// Uniform point of the box that contains the convex hull of the alphabet.
fn box_point(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let a = 1.0 / (m as f64).sqrt();
    (0..2 * m).map(|_| rng.gen_range(-a..a)).collect()
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

const FD_STEP: f64 = 1e-6;

fn fd_gradient(o: &Objective, x: &[f64]) -> Option<Vec<f64>> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + FD_STEP;
            let up = o.value(&y);
            y[i] = x[i] - FD_STEP;
            let down = o.value(&y);
            y[i] = x[i];
            let d = (up - down) / (2.0 * FD_STEP);
            d.is_finite().then_some(d)
        })
        .collect()
}

fn fd_hessian(o: &Objective, x: &[f64]) -> Option<DMatrix<f64>> {
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    let mut y = x.to_vec();
    for j in 0..n {
        y[j] = x[j] + FD_STEP;
        let up = o.gradient(&y).ok()?;
        y[j] = x[j] - FD_STEP;
        let down = o.gradient(&y).ok()?;
        y[j] = x[j];
        for i in 0..n {
            h[(i, j)] = (up[i] - down[i]) / (2.0 * FD_STEP);
        }
    }
    Some(h)
}

/// Instance and point drawn for a criterion; UBMSEP points lie in the
/// objective's domain, with all margins nonnegative if `nonneg`.
fn sample(rng: &mut ChaCha8Rng, criterion: Criterion, nonneg: bool) -> (PrecodingInstance, Objective, Vec<f64>) {
    let (alpha_s, alpha_x) = match criterion {
        Criterion::Qmsep => (4, 4),
        Criterion::Ubmsep => (8, 8),
    };
    loop {
        let inst = random_instance(rng, 2, 4, alpha_s, alpha_x, (0.0, 10.0));
        let o = Objective::build(&inst, criterion).expect("matching alphabet");
        for _ in 0..200 {
            let x = box_point(rng, 4);
            let ok = match criterion {
                Criterion::Qmsep => true,
                Criterion::Ubmsep if nonneg => o.margin_matrix().margins(&x).iter().all(|&m| m >= 0.0),
                Criterion::Ubmsep => o.value(&x).is_finite() && fd_hessian(&o, &x).is_some(),
            };
            if ok {
                return (inst, o, x);
            }
        }
    }
}

type GradientFn<'a> = dyn Fn(&Objective, &[f64]) -> msep::Result<Vec<f64>> + 'a;

/// Gradient suite with a replaceable gradient, so that a broken gradient can
/// be shown to fail.
pub fn gradients_with(opts: &SuiteOptions, grad: &GradientFn) -> Vec<Property> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    [Criterion::Qmsep, Criterion::Ubmsep]
        .into_iter()
        .map(|c| {
            let mut t = Tally::new(format!("{c} gradient vs central differences"));
            let mut done = 0;
            while done < opts.count {
                let (inst, o, x) = sample(&mut rng, c, false);
                let Some(fd) = fd_gradient(&o, &x) else { continue };
                done += 1;
                let (err, note) = match grad(&o, &x) {
                    Ok(g) => {
                        let e = norm(g.iter().zip(&fd).map(|(a, b)| a - b)) / norm(g.iter().copied()).max(1e-12);
                        (e, format!("analytic {g:?}, finite differences {fd:?}"))
                    }
                    Err(e) => (f64::INFINITY, e.to_string()),
                };
                t.record(err, err <= GRADIENT_TOL, || Counterexample::new(&inst, note).at(&x));
            }
            t.finish("relative error")
        })
        .collect()
}

pub fn hessians(opts: &SuiteOptions) -> Vec<Property> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = Vec::new();
    for c in [Criterion::Qmsep, Criterion::Ubmsep] {
        let mut t = Tally::new(format!("{c} Hessian vs differenced gradient"));
        for _ in 0..opts.count {
            let (inst, o, x) = sample(&mut rng, c, false);
            let h = o.hessian(&x).expect("point in domain");
            let fd = fd_hessian(&o, &x).expect("point in domain");
            let err = (&h - &fd).norm() / h.norm().max(1e-12);
            t.record(err, err <= HESSIAN_TOL, || {
                Counterexample::new(&inst, format!("relative Frobenius error {err:e}")).at(&x)
            });
        }
        out.push(t.finish("relative error"));
    }
    for (c, nonneg, label) in [
        (Criterion::Qmsep, false, "QMSEP Hessian PSD at arbitrary points"),
        (Criterion::Ubmsep, true, "UBMSEP Hessian PSD at nonnegative-margin points"),
    ] {
        let mut t = Tally::new(label);
        for _ in 0..opts.count {
            let (inst, o, x) = sample(&mut rng, c, nonneg);
            let h = o.hessian(&x).expect("point in domain");
            let eig = SymmetricEigen::new(h).eigenvalues;
            let scale = eig.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
            let worst = -eig.min() / scale;
            t.record(worst, worst <= PSD_TOL, || {
                Counterexample::new(&inst, format!("min eigenvalue {:e}, scale {scale:e}", eig.min())).at(&x)
            });
        }
        out.push(t.finish("relative negative eigenvalue"));
    }
    out
}

/// Minimum of the normalized (margin-constrained) objective over all
/// completions of `prefix`.
fn best_completion(g: &SymbolObjective, prefix: &[usize]) -> f64 {
    let m = g.antennas();
    let order = g.alphabet().order();
    let free = m - prefix.len();
    let mut idx: Vec<usize> = prefix.iter().copied().chain(std::iter::repeat_n(0, free)).collect();
    let mut best = f64::INFINITY;
    loop {
        best = best.min(g.value(&idx));
        let mut p = m;
        loop {
            if p == prefix.len() {
                return best;
            }
            p -= 1;
            idx[p] += 1;
            if idx[p] < order {
                break;
            }
            idx[p] = 0;
        }
    }
}

pub fn bounds(opts: &SuiteOptions) -> Vec<Property> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let cfg = SolverConfig::default();
    let mut certified = Tally::new("certified subproblem bound <= best completion");
    let mut value = Tally::new("subproblem value - eps_solve <= best completion");
    for i in 0..opts.count {
        let criterion = if i % 2 == 0 { Criterion::Qmsep } else { Criterion::Ubmsep };
        let alpha_s = if criterion == Criterion::Qmsep || rng.gen_bool(0.5) { 4 } else { 8 };
        let m = rng.gen_range(3..=5);
        let inst = random_instance(&mut rng, 2, m, alpha_s, 4, (0.0, 15.0));
        let p = rng.gen_range(1..m);
        let prefix: Vec<usize> = (0..p).map(|_| rng.gen_range(0..4)).collect();
        let o = Objective::build(&inst, criterion).expect("matching alphabet");
        let poly = build_polyhedron(m, 4).expect("valid size");
        let sub = restrict_polyhedron(&poly, p).expect("valid prefix length");
        let f_r = to_real(&inst.transmit_vector(&prefix));
        let sol = solve_subproblem(&o, &f_r, &sub, &cfg).expect("consistent dimensions");
        let g = SymbolObjective::new(&o, inst.transmit_alphabet()).with_margin_constraints(true);
        let best = best_completion(&g, &prefix);
        let lb = sol.lower_bound();
        let note = || format!("{criterion}: bound {lb:e}, value {:e}, best completion {best:e}", sol.normalized);
        let excess = if lb <= best { 0.0 } else { lb - best };
        certified.record(excess, lb <= best, || Counterexample::new(&inst, note()).with_prefix(&prefix));
        let slack = sol.normalized - cfg.eps_solve * sol.normalized.max(1.0);
        let ok = slack <= best || (sol.lower_bound() == f64::INFINITY && best == f64::INFINITY);
        value.record(if ok { 0.0 } else { slack - best }, ok, || Counterexample::new(&inst, note()).with_prefix(&prefix));
    }
    vec![certified.finish("excess"), value.finish("excess")]
}

pub fn bnb_vs_exhaustive(opts: &SuiteOptions, configs: &[(usize, usize, usize)]) -> Vec<Property> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = Vec::new();
    for &(k, m, alpha_x) in configs {
        for criterion in [Criterion::Qmsep, Criterion::Ubmsep] {
            let alpha_s = if criterion == Criterion::Qmsep { 4 } else { alpha_x };
            let cfg = BnbConfig::new(criterion);
            let mut t = Tally::new(format!("{criterion} K={k} M={m} alpha_x={alpha_x}: B&B objective = exhaustive"));
            for _ in 0..opts.count {
                let inst = random_instance(&mut rng, k, m, alpha_s, alpha_x, (0.0, 20.0));
                let (b, e) = match (solve_bnb(&inst, &cfg), exhaustive_msep(&inst, criterion)) {
                    (Ok(b), Ok(e)) => (b, e),
                    (b, e) => {
                        let note = format!("solver error: {:?} / {:?}", b.err(), e.err());
                        t.record(f64::INFINITY, false, || Counterexample::new(&inst, note));
                        continue;
                    }
                };
                let diff = (b.objective - e.objective).abs();
                t.record(diff, diff <= OBJECTIVE_MATCH_TOL, || {
                    let note = format!(
                        "B&B {:?} -> {:e}, exhaustive {:?} -> {:e}",
                        b.indices, b.objective, e.indices, e.objective
                    );
                    Counterexample::new(&inst, note).at(&to_real(&b.x))
                });
            }
            out.push(t.finish("objective difference"));
        }
    }
    out
}

pub fn sep_vs_mc(opts: &SuiteOptions) -> Vec<Property> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut exact = Tally::new("QMSEP closed form within 3 SE of Monte Carlo rate");
    let mut bound = Tally::new("union bound >= Monte Carlo rate - 3 SE");
    let n = opts.noise_draws;
    for _ in 0..opts.count {
        let inst = random_instance(&mut rng, 2, 5, 4, 4, (0.0, 10.0));
        let x = exhaustive_msep(&inst, Criterion::Qmsep).expect("small search").x;
        let sep = sep_qmsep(&build_qmsep(&inst).expect("QPSK"), &x).expect("dimensions");
        let ub = sep_ubmsep_bound(&build_ubmsep(&inst).expect("valid"), &x).expect("dimensions");
        let y = inst.noiseless(&x).expect("dimensions");
        let alphabet = inst.data_alphabet();
        let mut errors = vec![0u64; inst.users()];
        for _ in 0..n {
            for (k, e) in errors.iter_mut().enumerate() {
                if hard_detect(y[k] + complex_gaussian(&mut rng, inst.sigma_w), &alphabet) != inst.symbols[k] {
                    *e += 1;
                }
            }
        }
        for (k, &e) in errors.iter().enumerate() {
            let rate = e as f64 / n as f64;
            let p = sep.values[k];
            let se = (p * (1.0 - p) / n as f64).sqrt();
            let z = (rate - p).abs() / se.max(f64::MIN_POSITIVE);
            let note = || format!("user {k}: empirical {rate:e}, closed form {p:e}, union bound {:e}", ub.values[k]);
            exact.record(z, z <= 3.0, || Counterexample::new(&inst, note()).at(&to_real(&x)));
            let se_emp = (rate * (1.0 - rate) / n as f64).sqrt();
            let short = (rate - 3.0 * se_emp - ub.values[k]) / se_emp.max(f64::MIN_POSITIVE);
            bound.record(short, ub.values[k] >= rate - 3.0 * se_emp, || Counterexample::new(&inst, note()).at(&to_real(&x)));
        }
    }
    vec![exact.finish("deviation in SE"), bound.finish("bound shortfall in SE")]
}
