use super::{terms, value_at_margins, Criterion, Objective};
use crate::model::PskAlphabet;

/// Margins may dip this far below zero and still count as satisfying the
/// nonnegative-margin constraint of the reformulated UBMSEP problem.
pub(crate) const MARGIN_TOL: f64 = 1e-12;

/// Objective over transmit-alphabet index tuples.
///
/// The margin contribution of every (antenna, alphabet point) pair is
/// tabulated once, so changing one antenna costs `O(K)` and a full
/// evaluation `O(MK)`. Values are in the nonnegative normalized form
/// (see [`Objective::offset`]).
#[derive(Debug, Clone)]
pub struct SymbolObjective {
    criterion: Criterion,
    alphabet: PskAlphabet,
    antennas: usize,
    width: usize,
    contrib: Vec<f64>,
    offset: f64,
    enforce_margins: bool,
}

impl SymbolObjective {
    pub fn new(objective: &Objective, alphabet: PskAlphabet) -> Self {
        let mm = objective.margin_matrix();
        let antennas = mm.dim() / 2;
        let width = 2 * mm.users();
        let order = alphabet.order();
        let mut contrib = Vec::with_capacity(antennas * order * width);
        for m in 0..antennas {
            for a in 0..order {
                let p = alphabet.point(a);
                for r in 0..width {
                    contrib.push(mm.at(r, 2 * m) * p.re + mm.at(r, 2 * m + 1) * p.im);
                }
            }
        }
        Self {
            criterion: objective.criterion(),
            alphabet,
            antennas,
            width,
            contrib,
            offset: objective.offset(),
            enforce_margins: false,
        }
    }

    /// Treat tuples with a negative UBMSEP margin as infeasible (`+inf`).
    /// No effect for QMSEP.
    pub fn with_margin_constraints(mut self, enforce: bool) -> Self {
        self.enforce_margins = enforce && self.criterion == Criterion::Ubmsep;
        self
    }

    pub fn criterion(&self) -> Criterion {
        self.criterion
    }

    pub fn alphabet(&self) -> &PskAlphabet {
        &self.alphabet
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    /// Number of margins, `2K`.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn enforces_margins(&self) -> bool {
        self.enforce_margins
    }

    #[inline]
    pub fn contribution(&self, antenna: usize, point: usize) -> &[f64] {
        let start = (antenna * self.alphabet.order() + point) * self.width;
        &self.contrib[start..start + self.width]
    }

    /// `margins += sign * contribution(antenna, point)`.
    #[inline]
    pub fn accumulate(&self, margins: &mut [f64], antenna: usize, point: usize, sign: f64) {
        for (m, c) in margins.iter_mut().zip(self.contribution(antenna, point)) {
            *m += sign * c;
        }
    }

    /// Margins of a (possibly partial) tuple; missing antennas contribute nothing.
    pub fn margins(&self, indices: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        for (m, &a) in indices.iter().enumerate() {
            self.accumulate(&mut out, m, a, 1.0);
        }
        out
    }

    pub fn margins_feasible(&self, margins: &[f64]) -> bool {
        margins.iter().all(|&m| m >= -MARGIN_TOL)
    }

    #[inline]
    pub fn value_at_margins(&self, margins: &[f64]) -> f64 {
        if self.enforce_margins && !self.margins_feasible(margins) {
            return f64::INFINITY;
        }
        value_at_margins(self.criterion, margins)
    }

    /// Normalized objective of a full index tuple.
    pub fn value(&self, indices: &[usize]) -> f64 {
        self.value_at_margins(&self.margins(indices))
    }

    /// Objective of a full index tuple in its defining form.
    pub fn raw_value(&self, indices: &[usize]) -> f64 {
        self.value(indices) - self.offset
    }

    /// Per-user normalized terms, for diagnostics.
    pub fn user_terms(&self, indices: &[usize]) -> Vec<f64> {
        self.margins(indices).chunks_exact(2).map(|p| terms::value(self.criterion, p[0], p[1])).collect()
    }
}
