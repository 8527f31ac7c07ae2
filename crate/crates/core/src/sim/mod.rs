//! Monte Carlo symbol error rate experiments over i.i.d. Rayleigh channels.
//!
//! Every channel realization owns its random streams, derived from the
//! experiment seed and the channel index alone. All methods and all SNR
//! points of one run therefore see the same channels, data symbols and
//! (unit-variance) noise, and results do not depend on scheduling.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bnb::{exhaustive_mmddt, exhaustive_msep, solve_bnb, solve_bnb_qos, BnbConfig};
use crate::convex::{build_polyhedron, solve_relaxed, SolveStatus, SolverConfig};
use crate::error::{Error, Result};
use crate::model::{complex_gaussian, generate_channel, hard_detect, to_complex, PrecodingInstance, PskAlphabet};
use crate::objectives::{Criterion, Objective, SymbolObjective};
use crate::par::{self, Execution};
use crate::projection::{project_tail, GsOptions, ProjectionMethod};

/// How the transmit vector is computed for each data vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Optimal vector by branch-and-bound.
    Bnb(Criterion),
    /// Relaxed solution mapped onto the alphabet.
    Projection(Criterion, ProjectionMethod),
    /// Optimal vector by full enumeration.
    Exhaustive(Criterion),
    /// Enumeration maximizing the worst-case distance to a decision threshold.
    MmddtExhaustive,
    /// Uniformly random alphabet entries, ignoring the channel. Diagnostic only.
    Random,
}

impl Method {
    /// The methods with a published name, in a fixed order.
    pub const ALL: [Method; 11] = [
        Method::Bnb(Criterion::Qmsep),
        Method::Bnb(Criterion::Ubmsep),
        Method::Projection(Criterion::Qmsep, ProjectionMethod::Uq),
        Method::Projection(Criterion::Ubmsep, ProjectionMethod::Uq),
        Method::Projection(Criterion::Qmsep, ProjectionMethod::PartialGs),
        Method::Projection(Criterion::Qmsep, ProjectionMethod::FullGs),
        Method::Projection(Criterion::Ubmsep, ProjectionMethod::PartialGs),
        Method::Projection(Criterion::Ubmsep, ProjectionMethod::FullGs),
        Method::Exhaustive(Criterion::Qmsep),
        Method::Exhaustive(Criterion::Ubmsep),
        Method::MmddtExhaustive,
    ];

    pub fn criterion(self) -> Option<Criterion> {
        match self {
            Method::Bnb(c) | Method::Projection(c, _) | Method::Exhaustive(c) => Some(c),
            Method::MmddtExhaustive | Method::Random => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Bnb(c) => write!(f, "{c}-BnB"),
            Method::Projection(c, p) => write!(f, "{c}-{p}"),
            Method::Exhaustive(c) => write!(f, "{c}-Exhaustive"),
            Method::MmddtExhaustive => f.write_str("MMDDT-Exhaustive"),
            Method::Random => f.write_str("Random"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("random") {
            return Ok(Method::Random);
        }
        let (head, tail) = s.split_once('-').ok_or_else(|| Error::Parameter(format!("unknown method {s:?}")))?;
        if head.eq_ignore_ascii_case("MMDDT") && tail.eq_ignore_ascii_case("exhaustive") {
            return Ok(Method::MmddtExhaustive);
        }
        let criterion: Criterion = head.parse().map_err(|_| Error::Parameter(format!("unknown method {s:?}")))?;
        if tail.eq_ignore_ascii_case("bnb") {
            Ok(Method::Bnb(criterion))
        } else if tail.eq_ignore_ascii_case("exhaustive") {
            Ok(Method::Exhaustive(criterion))
        } else {
            let p = tail.parse().map_err(|_| Error::Parameter(format!("unknown method {s:?}")))?;
            Ok(Method::Projection(criterion, p))
        }
    }
}

/// One SER experiment: a system size, an SNR grid and a trial layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub users: usize,
    pub antennas: usize,
    pub alpha_s: usize,
    pub alpha_x: usize,
    pub snr_grid_db: Vec<f64>,
    /// Channel realizations.
    pub trials: usize,
    /// Data vectors per channel; the transmit vector is recomputed for each.
    pub symbols_per_channel: usize,
    /// Independent noise realizations per transmitted vector.
    pub noise_draws_per_symbol: usize,
    pub seed: u64,
    pub method: Method,
    /// Per-user SEP targets for the branch-and-bound methods.
    pub qos: Option<Vec<f64>>,
    /// Whether channel realizations are processed in parallel.
    pub execution: Execution,
}

impl ExperimentConfig {
    /// Smoke-test layout: 500 channels with 20 data vectors each, one noise draw.
    pub fn new(users: usize, antennas: usize, alpha_s: usize, alpha_x: usize, method: Method) -> Self {
        Self {
            users,
            antennas,
            alpha_s,
            alpha_x,
            snr_grid_db: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            trials: 500,
            symbols_per_channel: 20,
            noise_draws_per_symbol: 1,
            seed: 0,
            method,
            qos: None,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("users", self.users),
            ("antennas", self.antennas),
            ("trials", self.trials),
            ("symbols_per_channel", self.symbols_per_channel),
            ("noise_draws_per_symbol", self.noise_draws_per_symbol),
        ] {
            if v == 0 {
                return Err(Error::Parameter(format!("{name} must be at least 1")));
            }
        }
        if self.alpha_s < 2 || self.alpha_x < 2 {
            return Err(Error::Parameter("alphabet orders must be >= 2".into()));
        }
        if self.snr_grid_db.is_empty() || self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Parameter("SNR grid must be non-empty and finite".into()));
        }
        if let Some(q) = &self.qos {
            if q.len() != self.users {
                return Err(Error::Dimension(format!("{} QoS targets for {} users", q.len(), self.users)));
            }
            if q.iter().any(|&l| !(l > 0.0 && l <= 1.0)) {
                return Err(Error::Parameter("QoS targets must lie in (0, 1]".into()));
            }
        }
        Ok(())
    }

    /// Data vectors per SNR point.
    pub fn instances_per_point(&self) -> usize {
        self.trials * self.symbols_per_channel
    }

    /// User decisions per SNR point and method.
    pub fn decisions_per_point(&self) -> u64 {
        (self.instances_per_point() * self.noise_draws_per_symbol * self.users) as u64
    }
}

/// Empirical SER of one method at one SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct SerPoint {
    pub method: Method,
    pub snr_db: f64,
    pub ser: f64,
    /// Binomial standard error `sqrt(ser (1 - ser) / decisions)`.
    pub std_err: f64,
    /// Standard error of the mean per-channel error rate. Errors cluster
    /// on poorly conditioned channels, so this is the honest spread of `ser`
    /// when several data vectors or noise draws share a channel.
    pub cluster_std_err: f64,
    pub error_count: u64,
    pub decision_count: u64,
    /// Instances dropped because the precoder failed on them.
    pub skipped: usize,
    /// Time spent computing transmit vectors, summed over instances.
    pub wall_time: Duration,
    /// Fingerprint of the channels, symbols and noise behind this point.
    pub stream_checksum: u64,
}

/// Result of [`compare_methods`]: every method at every SNR point on
/// common random numbers, with per-instance error counts for paired tests.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub methods: Vec<Method>,
    pub snr_grid_db: Vec<f64>,
    /// Method-major: all SNR points of `methods[0]` first.
    pub points: Vec<SerPoint>,
    decisions_per_instance: u64,
    symbols_per_channel: usize,
    /// `[snr][method][instance]`, channel-major, `None` where the precoder failed.
    instance_errors: Vec<Vec<Vec<Option<u32>>>>,
}

/// Paired difference `SER(a) - SER(b)`, with channel realizations as the
/// paired samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedDiff {
    pub mean: f64,
    pub std_err: f64,
    pub channels: usize,
}

impl PairedDiff {
    /// Mean difference in standard errors; infinite when the instances
    /// disagree in one direction only.
    pub fn z(&self) -> f64 {
        if self.std_err > 0.0 {
            self.mean / self.std_err
        } else if self.mean == 0.0 {
            0.0
        } else {
            self.mean.signum() * f64::INFINITY
        }
    }
}

impl Comparison {
    pub fn point(&self, method: Method, snr_db: f64) -> Option<&SerPoint> {
        self.points.iter().find(|p| p.method == method && p.snr_db == snr_db)
    }

    /// Per-instance error counts of `method` at grid index `snr`.
    pub fn instance_errors(&self, method: Method, snr: usize) -> Option<&[Option<u32>]> {
        let m = self.methods.iter().position(|&x| x == method)?;
        self.instance_errors.get(snr).map(|row| row[m].as_slice())
    }

    /// Paired comparison of two methods at grid index `snr`. Instances where
    /// either precoder failed are left out.
    pub fn paired(&self, a: Method, b: Method, snr: usize) -> Option<PairedDiff> {
        let ea = self.instance_errors(a, snr)?;
        let eb = self.instance_errors(b, snr)?;
        let diffs: Vec<f64> = ea
            .chunks(self.symbols_per_channel)
            .zip(eb.chunks(self.symbols_per_channel))
            .filter_map(|(ca, cb)| {
                let (sum, n) = ca
                    .iter()
                    .zip(cb)
                    .filter_map(|(x, y)| Some(i64::from((*x)?) - i64::from((*y)?)))
                    .fold((0i64, 0u64), |(s, n), d| (s + d, n + 1));
                (n > 0).then(|| sum as f64 / (n * self.decisions_per_instance) as f64)
            })
            .collect();
        let (mean, std_err) = mean_and_se(&diffs)?;
        Some(PairedDiff { mean, std_err, channels: diffs.len() })
    }
}

/// Noise standard deviation for a given SNR `= tx_power / N0` in dB, with
/// `N0 = sigma_w^2`. The model's transmit alphabet has `tx_power = 1`.
pub fn snr_to_sigma(snr_db: f64, tx_power: f64) -> f64 {
    (tx_power * 10f64.powf(-snr_db / 10.0)).sqrt()
}

/// Inverse of [`snr_to_sigma`].
pub fn sigma_to_snr(sigma_w: f64, tx_power: f64) -> f64 {
    10.0 * (tx_power / (sigma_w * sigma_w)).log10()
}

/// Transmit-alphabet indices chosen by `method`. `rng` is only used by
/// [`Method::Random`].
pub fn precode<R: Rng + ?Sized>(
    method: Method,
    instance: &PrecodingInstance,
    qos: Option<&[f64]>,
    rng: &mut R,
) -> Result<Vec<usize>> {
    match method {
        Method::Bnb(c) => {
            let cfg = BnbConfig::new(c);
            let out = match qos {
                Some(l) => solve_bnb_qos(instance, &cfg, l)?,
                None => solve_bnb(instance, &cfg)?,
            };
            Ok(out.indices)
        }
        Method::Projection(c, p) => {
            let objective = Objective::build(instance, c)?;
            let poly = build_polyhedron(instance.antennas(), instance.alpha_x)?;
            let relaxed = solve_relaxed(&objective, &poly, &SolverConfig::default())?;
            if relaxed.status == SolveStatus::Infeasible {
                return Err(Error::Infeasible);
            }
            let x_lb = to_complex(&relaxed.x_r_lb)?;
            let g = SymbolObjective::new(&objective, instance.transmit_alphabet());
            Ok(project_tail(p, &[], &x_lb, &g, GsOptions::default()))
        }
        Method::Exhaustive(c) => Ok(exhaustive_msep(instance, c)?.indices),
        Method::MmddtExhaustive => Ok(exhaustive_mmddt(instance)?.indices),
        Method::Random => Ok((0..instance.antennas()).map(|_| rng.gen_range(0..instance.alpha_x)).collect()),
    }
}

/// SER curve of `config.method`.
pub fn run_ser(config: &ExperimentConfig) -> Result<Vec<SerPoint>> {
    Ok(compare_methods(config, &[config.method])?.points)
}

/// Runs every method in `methods` on the layout of `base` (its `method`
/// field is ignored), sharing channels, data and noise.
pub fn compare_methods(base: &ExperimentConfig, methods: &[Method]) -> Result<Comparison> {
    base.validate()?;
    if methods.is_empty() {
        return Err(Error::Parameter("no methods to compare".into()));
    }
    for m in methods {
        if m.criterion() == Some(Criterion::Qmsep) && base.alpha_s != 4 {
            return Err(Error::Criterion(format!("{m} requires QPSK data symbols, got {}-PSK", base.alpha_s)));
        }
    }
    let sigmas: Vec<f64> = base.snr_grid_db.iter().map(|&s| snr_to_sigma(s, 1.0)).collect();
    let channels = par::map_range(base.trials, base.execution, |c| run_channel(base, methods, &sigmas, c));
    let channels = channels.into_iter().collect::<Result<Vec<_>>>()?;

    let decisions_per_instance = (base.users * base.noise_draws_per_symbol) as u64;
    let n_snr = sigmas.len();
    let mut instance_errors = vec![vec![Vec::with_capacity(base.instances_per_point()); methods.len()]; n_snr];
    let mut checksums = vec![FNV_OFFSET; n_snr];
    let mut times = vec![vec![Duration::ZERO; methods.len()]; n_snr];
    for ch in &channels {
        for (s, out) in ch.iter().enumerate() {
            checksums[s] = mix(checksums[s], out.checksum);
            for (m, errs) in out.errors.iter().enumerate() {
                instance_errors[s][m].extend_from_slice(errs);
                times[s][m] += out.times[m];
            }
        }
    }

    let mut points = Vec::with_capacity(methods.len() * n_snr);
    for (m, &method) in methods.iter().enumerate() {
        for (s, &snr_db) in base.snr_grid_db.iter().enumerate() {
            let errs = &instance_errors[s][m];
            let ok: Vec<u64> = errs.iter().flatten().map(|&e| u64::from(e)).collect();
            let error_count: u64 = ok.iter().sum();
            let decision_count = ok.len() as u64 * decisions_per_instance;
            let ser = if decision_count == 0 { 0.0 } else { error_count as f64 / decision_count as f64 };
            points.push(SerPoint {
                method,
                snr_db,
                ser,
                std_err: binomial_se(ser, decision_count),
                cluster_std_err: cluster_se(errs, base.symbols_per_channel, decisions_per_instance),
                error_count,
                decision_count,
                skipped: errs.len() - ok.len(),
                wall_time: times[s][m],
                stream_checksum: checksums[s],
            });
        }
    }
    Ok(Comparison {
        methods: methods.to_vec(),
        snr_grid_db: base.snr_grid_db.clone(),
        points,
        decisions_per_instance,
        symbols_per_channel: base.symbols_per_channel,
        instance_errors,
    })
}

fn binomial_se(p: f64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        (p * (1.0 - p) / n as f64).sqrt()
    }
}

/// Sample mean and its standard error; `None` below two samples.
fn mean_and_se(v: &[f64]) -> Option<(f64, f64)> {
    let n = v.len();
    if n < 2 {
        return None;
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Some((mean, (var / n as f64).sqrt()))
}

fn cluster_se(errs: &[Option<u32>], per_channel: usize, decisions_per_instance: u64) -> f64 {
    let rates: Vec<f64> = errs
        .chunks(per_channel)
        .filter_map(|c| {
            let (e, n) = c.iter().flatten().fold((0u64, 0u64), |(e, n), &x| (e + u64::from(x), n + 1));
            (n > 0).then(|| e as f64 / (n * decisions_per_instance) as f64)
        })
        .collect();
    mean_and_se(&rates).map_or(0.0, |(_, se)| se)
}

/// Stream purposes within one channel realization.
const STREAM_CHANNEL: u64 = 0;
const STREAM_SYMBOLS: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_RANDOM_X: u64 = 3;
const STREAMS: u64 = 4;

fn stream(seed: u64, channel: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(channel as u64 * STREAMS + purpose);
    rng
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;

fn mix(h: u64, v: u64) -> u64 {
    (h ^ v).wrapping_mul(0x0000_0100_0000_01b3)
}

fn mix_complex(h: u64, z: Complex64) -> u64 {
    mix(mix(h, z.re.to_bits()), z.im.to_bits())
}

/// Outcome of one channel realization at one SNR point.
struct PointOut {
    /// `[method][instance]`.
    errors: Vec<Vec<Option<u32>>>,
    times: Vec<Duration>,
    checksum: u64,
}

fn run_channel(cfg: &ExperimentConfig, methods: &[Method], sigmas: &[f64], c: usize) -> Result<Vec<PointOut>> {
    let h = generate_channel(cfg.users, cfg.antennas, 1.0, &mut stream(cfg.seed, c, STREAM_CHANNEL))?;
    let mut sym_rng = stream(cfg.seed, c, STREAM_SYMBOLS);
    let symbols: Vec<Vec<usize>> = (0..cfg.symbols_per_channel)
        .map(|_| (0..cfg.users).map(|_| sym_rng.gen_range(0..cfg.alpha_s)).collect())
        .collect();
    let base = h.iter().fold(FNV_OFFSET, |acc, &z| mix_complex(acc, z));
    let base = symbols.iter().flatten().fold(base, |acc, &s| mix(acc, s as u64));

    sigmas
        .iter()
        .map(|&sigma| {
            let mut noise_rng = stream(cfg.seed, c, STREAM_NOISE);
            let mut x_rng = stream(cfg.seed, c, STREAM_RANDOM_X);
            let mut out = PointOut {
                errors: vec![Vec::with_capacity(symbols.len()); methods.len()],
                times: vec![Duration::ZERO; methods.len()],
                checksum: base,
            };
            let detector = PskAlphabet::unit(cfg.alpha_s)?;
            for s in &symbols {
                let inst = PrecodingInstance::new(h.clone(), s.clone(), sigma, cfg.alpha_s, cfg.alpha_x)?;
                let received: Vec<Option<Vec<Complex64>>> = methods
                    .iter()
                    .enumerate()
                    .map(|(m, &method)| {
                        let start = Instant::now();
                        let x = precode(method, &inst, cfg.qos.as_deref(), &mut x_rng);
                        out.times[m] += start.elapsed();
                        let x = x.ok()?;
                        inst.noiseless(&inst.transmit_vector(&x)).ok()
                    })
                    .collect();
                let mut errors = vec![0u32; methods.len()];
                for _ in 0..cfg.noise_draws_per_symbol {
                    let w: Vec<Complex64> = (0..cfg.users).map(|_| complex_gaussian(&mut noise_rng, sigma)).collect();
                    out.checksum = w.iter().fold(out.checksum, |acc, &z| mix_complex(acc, z));
                    for (e, y) in errors.iter_mut().zip(&received) {
                        let Some(y) = y else { continue };
                        *e += y
                            .iter()
                            .zip(&w)
                            .zip(s)
                            .filter(|((&yk, &wk), &sk)| hard_detect(yk + wk, &detector) != sk)
                            .count() as u32;
                    }
                }
                for (m, y) in received.iter().enumerate() {
                    out.errors[m].push(y.as_ref().map(|_| errors[m]));
                }
            }
            Ok(out)
        })
        .collect()
}

#[cfg(test)]
mod tests;
