//! Real-valued problem data for the two MSEP criteria: objective, gradient,
//! Hessian, decision-threshold distances and closed-form symbol error
//! probabilities.

mod discrete;
mod qmsep;
pub(crate) mod terms;
mod ubmsep;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::PrecodingInstance;

pub use discrete::SymbolObjective;
pub use qmsep::{
    build_qmsep, qmsep_gradient, qmsep_hessian, qmsep_objective, sep_qmsep, QmsepData,
};
pub use ubmsep::{
    build_ubmsep, mddt, sep_ubmsep_bound, ubmsep_gradient, ubmsep_hessian, ubmsep_objective,
    UbmsepData,
};

/// Design criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Criterion {
    /// Exact symbol error probability for QPSK data.
    Qmsep,
    /// Union-bound symbol error probability for any PSK order.
    Ubmsep,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Qmsep => "QMSEP",
            Criterion::Ubmsep => "UBMSEP",
        })
    }
}

impl FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "QMSEP" => Ok(Criterion::Qmsep),
            "UBMSEP" => Ok(Criterion::Ubmsep),
            _ => Err(Error::Parameter(format!("unknown criterion {s:?}"))),
        }
    }
}

/// Per-user symbol error probabilities. For the union bound `values` is
/// clipped to `[0, 1]` and `raw` keeps the unclipped sum of the two tails.
#[derive(Debug, Clone, PartialEq)]
pub struct SepVector {
    pub values: Vec<f64>,
    pub raw: Vec<f64>,
}

impl SepVector {
    /// Entrywise `values <= lambda`.
    pub fn satisfies(&self, lambda: &[f64]) -> bool {
        self.values.iter().zip(lambda).all(|(p, l)| p <= l)
    }
}

/// The `2K x n` matrix of margin rows. Row `2k` and `2k + 1` are the two
/// margins of user `k`: `(h_R,k, h_I,k)` for QMSEP and `(h_1,k, h_2,k)` for
/// UBMSEP.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginMatrix {
    users: usize,
    dim: usize,
    rows: Vec<f64>,
}

impl MarginMatrix {
    pub(crate) fn from_pairs(first: &DMatrix<f64>, second: &DMatrix<f64>) -> Self {
        let (users, dim) = first.shape();
        let mut rows = Vec::with_capacity(2 * users * dim);
        for k in 0..users {
            rows.extend(first.row(k).iter());
            rows.extend(second.row(k).iter());
        }
        Self { users, dim, rows }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    /// Number of real coordinates, `2M`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.rows[r * self.dim..(r + 1) * self.dim]
    }

    /// Entry of row `r`, column `c`.
    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.rows[r * self.dim + c]
    }

    pub fn margins(&self, x_r: &[f64]) -> Vec<f64> {
        (0..2 * self.users)
            .map(|r| self.row(r).iter().zip(x_r).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(2 * self.users, self.dim, &self.rows)
    }

    fn check(&self, x_r: &[f64]) -> Result<()> {
        if x_r.len() != self.dim {
            return Err(Error::Dimension(format!(
                "real vector has length {}, expected {}",
                x_r.len(),
                self.dim
            )));
        }
        Ok(())
    }
}

/// Sum of the nonnegative per-user terms at the given margins.
pub(crate) fn value_at_margins(kind: Criterion, margins: &[f64]) -> f64 {
    margins.chunks_exact(2).map(|p| terms::value(kind, p[0], p[1])).sum()
}

fn gradient_of(kind: Criterion, mm: &MarginMatrix, x_r: &[f64]) -> Result<Vec<f64>> {
    mm.check(x_r)?;
    let m = mm.margins(x_r);
    let mut g = vec![0.0; mm.dim];
    for k in 0..mm.users {
        let (du, dv) = terms::gradient(kind, m[2 * k], m[2 * k + 1]).ok_or(Error::Domain { user: k })?;
        for (gc, (a, b)) in g.iter_mut().zip(mm.row(2 * k).iter().zip(mm.row(2 * k + 1))) {
            *gc += du * a + dv * b;
        }
    }
    Ok(g)
}

fn hessian_of(kind: Criterion, mm: &MarginMatrix, x_r: &[f64]) -> Result<DMatrix<f64>> {
    mm.check(x_r)?;
    let m = mm.margins(x_r);
    let n = mm.dim;
    let mut h = DMatrix::zeros(n, n);
    for k in 0..mm.users {
        let (uu, uv, vv) = terms::hessian(kind, m[2 * k], m[2 * k + 1]).ok_or(Error::Domain { user: k })?;
        let a = mm.row(2 * k);
        let b = mm.row(2 * k + 1);
        for i in 0..n {
            for j in i..n {
                let v = uu * a[i] * a[j] + uv * (a[i] * b[j] + b[i] * a[j]) + vv * b[i] * b[j];
                h[(i, j)] += v;
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            h[(i, j)] = h[(j, i)];
        }
    }
    Ok(h)
}

/// Either criterion's problem data behind one handle.
#[derive(Debug, Clone)]
pub enum Objective {
    Qmsep(QmsepData),
    Ubmsep(UbmsepData),
}

impl Objective {
    pub fn build(instance: &PrecodingInstance, criterion: Criterion) -> Result<Self> {
        Ok(match criterion {
            Criterion::Qmsep => Objective::Qmsep(build_qmsep(instance)?),
            Criterion::Ubmsep => Objective::Ubmsep(build_ubmsep(instance)?),
        })
    }

    pub fn criterion(&self) -> Criterion {
        match self {
            Objective::Qmsep(_) => Criterion::Qmsep,
            Objective::Ubmsep(_) => Criterion::Ubmsep,
        }
    }

    pub fn margin_matrix(&self) -> &MarginMatrix {
        match self {
            Objective::Qmsep(d) => d.margin_matrix(),
            Objective::Ubmsep(d) => d.margin_matrix(),
        }
    }

    pub fn users(&self) -> usize {
        self.margin_matrix().users()
    }

    /// Constant `c` such that `value + c` is nonnegative (`K ln 2` for UBMSEP, 0 for QMSEP).
    pub fn offset(&self) -> f64 {
        self.users() as f64 * terms::offset_per_user(self.criterion())
    }

    /// Objective in its defining form (`+inf` outside the UBMSEP domain).
    pub fn value(&self, x_r: &[f64]) -> f64 {
        match self {
            Objective::Qmsep(d) => qmsep_objective(d, x_r),
            Objective::Ubmsep(d) => ubmsep_objective(d, x_r),
        }
    }

    /// Objective plus [`offset`](Self::offset).
    pub fn normalized_value(&self, x_r: &[f64]) -> f64 {
        value_at_margins(self.criterion(), &self.margin_matrix().margins(x_r))
    }

    pub fn gradient(&self, x_r: &[f64]) -> Result<Vec<f64>> {
        gradient_of(self.criterion(), self.margin_matrix(), x_r)
    }

    pub fn hessian(&self, x_r: &[f64]) -> Result<DMatrix<f64>> {
        hessian_of(self.criterion(), self.margin_matrix(), x_r)
    }

    /// Per-user SEP (exact for QMSEP, clipped union bound for UBMSEP).
    pub fn sep(&self, x: &[num_complex::Complex64]) -> Result<SepVector> {
        match self {
            Objective::Qmsep(d) => sep_qmsep(d, x),
            Objective::Ubmsep(d) => sep_ubmsep_bound(d, x),
        }
    }
}
