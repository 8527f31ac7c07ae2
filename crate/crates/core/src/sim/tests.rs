use super::*;
use crate::objectives::sep_qmsep;
use crate::objectives::build_qmsep;

fn small(method: Method) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(2, 4, 4, 4, method);
    cfg.trials = 40;
    cfg.symbols_per_channel = 5;
    cfg.noise_draws_per_symbol = 4;
    cfg.snr_grid_db = vec![0.0, 10.0];
    cfg.seed = 11;
    cfg
}

fn same_numbers(a: &[SerPoint], b: &[SerPoint]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.method == y.method
                && x.snr_db == y.snr_db
                && x.ser.to_bits() == y.ser.to_bits()
                && x.error_count == y.error_count
                && x.decision_count == y.decision_count
                && x.stream_checksum == y.stream_checksum
        })
}

#[test]
fn snr_sigma_examples() {
    assert_eq!(snr_to_sigma(0.0, 1.0), 1.0);
    assert!((snr_to_sigma(20.0, 1.0) - 0.1).abs() < 1e-15);
    for snr in [-10.0, -3.3, 0.0, 7.5, 20.0, 41.0] {
        let s = snr_to_sigma(snr, 1.0);
        assert!((10.0 * (1.0 / (s * s)).log10() - snr).abs() < 1e-12);
        assert!((sigma_to_snr(s, 1.0) - snr).abs() < 1e-12);
    }
    // doubling the transmit power needs sqrt(2) more noise for the same SNR
    assert!((snr_to_sigma(10.0, 2.0) / snr_to_sigma(10.0, 1.0) - 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn method_names_round_trip() {
    for m in Method::ALL.iter().copied().chain([Method::Random]) {
        assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
    }
    assert_eq!("QMSEP-BnB".parse::<Method>().unwrap(), Method::Bnb(Criterion::Qmsep));
    assert_eq!(
        "UBMSEP-PartialGS".parse::<Method>().unwrap(),
        Method::Projection(Criterion::Ubmsep, ProjectionMethod::PartialGs)
    );
    for bad in ["", "BnB", "QMSEP", "QMSEP-Fast", "MMSE-Exhaustive", "MMDDT-BnB"] {
        assert!(bad.parse::<Method>().is_err(), "{bad}");
    }
}

#[test]
fn config_validation() {
    let ok = small(Method::Random);
    assert!(ok.validate().is_ok());
    let mut c = ok.clone();
    c.trials = 0;
    assert!(c.validate().is_err());
    let mut c = ok.clone();
    c.noise_draws_per_symbol = 0;
    assert!(c.validate().is_err());
    let mut c = ok.clone();
    c.snr_grid_db = vec![0.0, f64::NAN];
    assert!(c.validate().is_err());
    let mut c = ok.clone();
    c.snr_grid_db.clear();
    assert!(c.validate().is_err());
    let mut c = ok.clone();
    c.qos = Some(vec![0.1]);
    assert!(c.validate().is_err());
    let mut c = ok.clone();
    c.qos = Some(vec![0.1, 0.0]);
    assert!(c.validate().is_err());
    let mut c = ok;
    c.alpha_s = 8;
    c.method = Method::Bnb(Criterion::Qmsep);
    assert!(matches!(run_ser(&c), Err(Error::Criterion(_))));
}

#[test]
fn decision_accounting() {
    let cfg = small(Method::Random);
    assert_eq!(cfg.decisions_per_point(), 40 * 5 * 4 * 2);
    let pts = run_ser(&cfg).unwrap();
    assert_eq!(pts.len(), 2);
    for p in &pts {
        assert_eq!(p.decision_count, cfg.decisions_per_point());
        assert_eq!(p.ser, p.error_count as f64 / p.decision_count as f64);
        assert!((p.std_err - (p.ser * (1.0 - p.ser) / p.decision_count as f64).sqrt()).abs() < 1e-15);
        assert_eq!(p.skipped, 0);
    }
}

#[test]
fn noiseless_limit_is_error_free() {
    let methods = [
        Method::Bnb(Criterion::Qmsep),
        Method::Projection(Criterion::Qmsep, ProjectionMethod::FullGs),
        Method::Exhaustive(Criterion::Ubmsep),
        Method::MmddtExhaustive,
    ];
    let mut cfg = ExperimentConfig::new(1, 4, 4, 4, methods[0]);
    cfg.snr_grid_db = vec![60.0];
    cfg.trials = 500;
    cfg.symbols_per_channel = 20;
    cfg.seed = 5;
    let c = compare_methods(&cfg, &methods).unwrap();
    for p in &c.points {
        assert_eq!(p.decision_count, 10_000);
        assert_eq!(p.error_count, 0, "{}", p.method);
    }
}

#[test]
fn random_vectors_guess_uniformly() {
    let mut cfg = ExperimentConfig::new(2, 4, 4, 4, Method::Random);
    cfg.snr_grid_db = vec![20.0];
    cfg.trials = 2000;
    cfg.symbols_per_channel = 5;
    let p = &run_ser(&cfg).unwrap()[0];
    assert!((p.ser - 0.75).abs() < 3.0 * p.cluster_std_err.max(p.std_err), "{p:?}");
}

#[test]
fn closed_form_matches_empirical_rate() {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let alphabet = PskAlphabet::unit(4).unwrap();
    for _ in 0..4 {
        let h = generate_channel(2, 3, 1.0, &mut rng).unwrap();
        let inst = PrecodingInstance::new(h, vec![1, 2], snr_to_sigma(3.0, 1.0), 4, 4).unwrap();
        let x = inst.transmit_vector(&[0, 3, 1]);
        let sep = sep_qmsep(&build_qmsep(&inst).unwrap(), &x).unwrap();
        let y = inst.noiseless(&x).unwrap();
        let n = 200_000;
        for k in 0..2 {
            let errors =
                (0..n).filter(|_| hard_detect(y[k] + complex_gaussian(&mut rng, inst.sigma_w), &alphabet) != inst.symbols[k]).count();
            let p = sep.values[k];
            let rate = errors as f64 / n as f64;
            assert!((rate - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt() + 1e-12, "{rate} vs {p}");
        }
    }
}

#[test]
fn bnb_and_exhaustive_decide_identically() {
    let a = Method::Bnb(Criterion::Qmsep);
    let b = Method::Exhaustive(Criterion::Qmsep);
    let cfg = small(a);
    let c = compare_methods(&cfg, &[a, b]).unwrap();
    for s in 0..cfg.snr_grid_db.len() {
        assert_eq!(c.instance_errors(a, s), c.instance_errors(b, s));
        let d = c.paired(a, b, s).unwrap();
        assert_eq!((d.mean, d.std_err, d.z()), (0.0, 0.0, 0.0));
    }
}

#[test]
fn comparison_layout_and_common_streams() {
    let methods = [Method::Random, Method::MmddtExhaustive, Method::Projection(Criterion::Qmsep, ProjectionMethod::Uq)];
    let cfg = small(methods[0]);
    let c = compare_methods(&cfg, &methods).unwrap();
    assert_eq!(c.points.len(), methods.len() * cfg.snr_grid_db.len());
    for (i, p) in c.points.iter().enumerate() {
        assert_eq!(p.method, methods[i / cfg.snr_grid_db.len()]);
        assert_eq!(p.snr_db, cfg.snr_grid_db[i % cfg.snr_grid_db.len()]);
    }
    for &snr in &cfg.snr_grid_db {
        let sums: Vec<u64> = methods.iter().map(|&m| c.point(m, snr).unwrap().stream_checksum).collect();
        assert!(sums.windows(2).all(|w| w[0] == w[1]));
    }
    // a method sees the same streams alone as in company
    for &m in &methods {
        let mut one = cfg.clone();
        one.method = m;
        let alone = run_ser(&one).unwrap();
        let together: Vec<SerPoint> = c.points.iter().filter(|p| p.method == m).cloned().collect();
        assert!(same_numbers(&alone, &together), "{m}");
    }
    // a different seed changes the streams
    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(run_ser(&other).unwrap()[0].stream_checksum, c.points[0].stream_checksum);
}

#[test]
fn reruns_and_execution_modes_agree() {
    let mut cfg = small(Method::Bnb(Criterion::Ubmsep));
    cfg.execution = Execution::Sequential;
    let a = run_ser(&cfg).unwrap();
    let b = run_ser(&cfg).unwrap();
    cfg.execution = Execution::Parallel;
    let c = run_ser(&cfg).unwrap();
    assert!(same_numbers(&a, &b));
    assert!(same_numbers(&a, &c));
}

#[test]
fn greedy_search_does_not_lose_to_quantization() {
    let uq = Method::Projection(Criterion::Qmsep, ProjectionMethod::Uq);
    let gs = Method::Projection(Criterion::Qmsep, ProjectionMethod::FullGs);
    let mut cfg = ExperimentConfig::new(2, 5, 4, 4, uq);
    cfg.snr_grid_db = vec![10.0, 15.0];
    cfg.trials = 400;
    cfg.symbols_per_channel = 1;
    cfg.noise_draws_per_symbol = 50;
    cfg.seed = 21;
    let c = compare_methods(&cfg, &[gs, uq]).unwrap();
    for s in 0..2 {
        let d = c.paired(gs, uq, s).unwrap();
        assert!(d.mean <= 3.0 * d.std_err, "{d:?}");
    }
}

#[test]
fn qos_targets_reach_the_precoder() {
    let mut cfg = small(Method::Bnb(Criterion::Qmsep));
    cfg.qos = Some(vec![1.0, 1.0]);
    // vacuous targets accept the first upper bound, which is still a valid vector
    let p = run_ser(&cfg).unwrap();
    assert!(p.iter().all(|p| p.skipped == 0 && p.decision_count > 0));
}
