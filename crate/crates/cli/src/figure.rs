//! Reproduction of the reference SER figures with tolerance bands.

use serde::Deserialize;

use msep::sim::{Comparison, ExperimentConfig, Method};

use crate::Failure;

/// Below this many decisions per cell the band check is not meaningful.
pub const MIN_DECISIONS: u64 = 200_000;

pub const FIGURE_NAMES: [&str; 2] = ["fig-qpsk-k2m5", "fig-8psk-k2m5"];

const QPSK_DATA: &str = include_str!("../data/fig-qpsk-k2m5.csv");
const PSK8_DATA: &str = include_str!("../data/fig-8psk-k2m5.csv");

/// Full-scale layout: one data vector per channel, so that channel
/// realizations, the dominant source of variance, are as many as possible;
/// ten noise draws per vector.
pub const DEFAULT_TRIALS: usize = 10_000;
pub const NOISE_DRAWS: usize = 10;

#[derive(Debug, Clone, PartialEq, Deserialize)]
struct RawCell {
    method: String,
    snr_db: f64,
    ser: f64,
    rel_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceCell {
    pub method: Method,
    pub snr_db: f64,
    pub ser: f64,
    pub rel_tol: f64,
}

impl ReferenceCell {
    pub fn band(&self) -> (f64, f64) {
        (self.ser * (1.0 - self.rel_tol), self.ser * (1.0 + self.rel_tol))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub name: &'static str,
    pub users: usize,
    pub antennas: usize,
    pub alpha: usize,
    pub cells: Vec<ReferenceCell>,
}

impl Figure {
    /// Methods in order of first appearance.
    pub fn methods(&self) -> Vec<Method> {
        let mut out = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.method) {
                out.push(c.method);
            }
        }
        out
    }

    pub fn snr_grid(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for c in &self.cells {
            if !out.contains(&c.snr_db) {
                out.push(c.snr_db);
            }
        }
        out.sort_by(f64::total_cmp);
        out
    }

    /// Experiment reproducing the figure; `trials` overrides the number
    /// of channel realizations.
    pub fn experiment(&self, trials: Option<usize>, seed: u64) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(self.users, self.antennas, self.alpha, self.alpha, self.methods()[0]);
        cfg.snr_grid_db = self.snr_grid();
        cfg.trials = trials.unwrap_or(DEFAULT_TRIALS);
        cfg.symbols_per_channel = 1;
        cfg.noise_draws_per_symbol = NOISE_DRAWS;
        cfg.seed = seed;
        cfg
    }
}

fn parse_cells(text: &str) -> Result<Vec<ReferenceCell>, Failure> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    rdr.deserialize::<RawCell>()
        .map(|r| {
            let r = r.map_err(|e| Failure::Runtime(format!("reference data: {e}")))?;
            let method = r.method.parse().map_err(|e| Failure::Runtime(format!("reference data: {e}")))?;
            Ok(ReferenceCell { method, snr_db: r.snr_db, ser: r.ser, rel_tol: r.rel_tol })
        })
        .collect()
}

pub fn figure(name: &str) -> Result<Figure, Failure> {
    let (name, alpha, data) = match name {
        "fig-qpsk-k2m5" => (FIGURE_NAMES[0], 4, QPSK_DATA),
        "fig-8psk-k2m5" => (FIGURE_NAMES[1], 8, PSK8_DATA),
        other => {
            return Err(Failure::Invalid(format!("unknown figure `{other}` (known: {})", FIGURE_NAMES.join(", "))))
        }
    };
    Ok(Figure { name, users: 2, antennas: 5, alpha, cells: parse_cells(data)? })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellCheck {
    pub cell: ReferenceCell,
    pub measured: f64,
    pub std_err: f64,
    pub decisions: u64,
    pub within: bool,
}

impl CellCheck {
    pub fn rel_deviation(&self) -> f64 {
        (self.measured - self.cell.ser) / self.cell.ser
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Assessment {
    /// Too few decisions for a meaningful comparison.
    Skipped { decisions: u64 },
    Checked(Vec<CellCheck>),
}

impl Assessment {
    pub fn passed(&self) -> bool {
        match self {
            Assessment::Skipped { .. } => true,
            Assessment::Checked(c) => c.iter().all(|c| c.within),
        }
    }
}

pub fn assess(fig: &Figure, result: &Comparison) -> Result<Assessment, Failure> {
    let mut checks = Vec::with_capacity(fig.cells.len());
    for cell in &fig.cells {
        let p = result
            .point(cell.method, cell.snr_db)
            .ok_or_else(|| Failure::Runtime(format!("no result for {} at {} dB", cell.method, cell.snr_db)))?;
        let (lo, hi) = cell.band();
        checks.push(CellCheck {
            cell: *cell,
            measured: p.ser,
            std_err: p.cluster_std_err,
            decisions: p.decision_count,
            within: (lo..=hi).contains(&p.ser) && p.skipped == 0,
        });
    }
    let fewest = checks.iter().map(|c| c.decisions).min().unwrap_or(0);
    Ok(if fewest < MIN_DECISIONS { Assessment::Skipped { decisions: fewest } } else { Assessment::Checked(checks) })
}

pub fn describe(check: &CellCheck) -> String {
    let (lo, hi) = check.cell.band();
    format!(
        "{} {:<12} {:>4} dB  measured {:.6e} +- {:.1e}  reference {:.6e}  band [{:.4e}, {:.4e}]  deviation {:+.1}%",
        if check.within { "within " } else { "OUTSIDE" },
        check.cell.method.to_string(),
        check.cell.snr_db,
        check.measured,
        check.std_err,
        check.cell.ser,
        lo,
        hi,
        100.0 * check.rel_deviation()
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use msep::objectives::Criterion;

    #[test]
    fn embedded_tables_parse() {
        let q = figure("fig-qpsk-k2m5").unwrap();
        assert_eq!(q.cells.len(), 6);
        assert_eq!(q.methods(), vec![Method::Bnb(Criterion::Qmsep), Method::Bnb(Criterion::Ubmsep)]);
        assert_eq!(q.snr_grid(), vec![0.0, 10.0, 15.0]);
        let e = figure("fig-8psk-k2m5").unwrap();
        assert_eq!(e.alpha, 8);
        assert_eq!(e.snr_grid(), vec![0.0, 10.0, 20.0]);
        assert_eq!(e.cells[2].rel_tol, 0.25);
        assert!(matches!(figure("fig-nope"), Err(Failure::Invalid(_))));
    }

    #[test]
    fn full_scale_layout_meets_the_decision_floor() {
        for name in FIGURE_NAMES {
            let cfg = figure(name).unwrap().experiment(None, 0);
            assert!(cfg.decisions_per_point() >= MIN_DECISIONS);
        }
    }
}
