use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{gradient_of, hessian_of, value_at_margins, Criterion, MarginMatrix, SepVector};
use crate::error::{Error, Result};
use crate::model::PrecodingInstance;
use crate::special::q_function;

/// QPSK problem data. `h_r` and `h_i` hold the rows `h_R,k` and `h_I,k` with
/// `h_R,k x_r = (sqrt2/sigma_w) sign(Re s_k) Re{h_k x}` and likewise for the
/// imaginary part.
#[derive(Debug, Clone)]
pub struct QmsepData {
    pub h_r: DMatrix<f64>,
    pub h_i: DMatrix<f64>,
    /// Diagonal of `S_r = (sqrt2/sigma_w) diag(sign Re s)`.
    pub s_r: Vec<f64>,
    /// Diagonal of `S_i = (sqrt2/sigma_w) diag(sign Im s)`.
    pub s_i: Vec<f64>,
    pub h: DMatrix<Complex64>,
    pub symbols: Vec<Complex64>,
    pub sigma_w: f64,
    margins: MarginMatrix,
}

impl QmsepData {
    pub fn margin_matrix(&self) -> &MarginMatrix {
        &self.margins
    }

    /// `(S_r Re{h_k x}, S_i Im{h_k x})` per user, computed in the complex domain.
    pub fn complex_margins(&self, x: &[Complex64]) -> Result<Vec<(f64, f64)>> {
        if x.len() != self.h.ncols() {
            return Err(Error::Dimension(format!("{} entries for {} antennas", x.len(), self.h.ncols())));
        }
        Ok((0..self.h.nrows())
            .map(|k| {
                let y: Complex64 = (0..x.len()).map(|m| self.h[(k, m)] * x[m]).sum();
                (self.s_r[k] * y.re, self.s_i[k] * y.im)
            })
            .collect())
    }
}

pub fn build_qmsep(instance: &PrecodingInstance) -> Result<QmsepData> {
    if instance.alpha_s != 4 {
        return Err(Error::Criterion(format!(
            "QMSEP requires QPSK data symbols, got {}-PSK",
            instance.alpha_s
        )));
    }
    let (k, m) = instance.h.shape();
    let symbols = instance.symbol_values();
    let scale = SQRT_2 / instance.sigma_w;
    let s_r: Vec<f64> = symbols.iter().map(|s| scale * s.re.signum()).collect();
    let s_i: Vec<f64> = symbols.iter().map(|s| scale * s.im.signum()).collect();
    let mut h_r = DMatrix::zeros(k, 2 * m);
    let mut h_i = DMatrix::zeros(k, 2 * m);
    for r in 0..k {
        for c in 0..m {
            let h = instance.h[(r, c)];
            h_r[(r, 2 * c)] = s_r[r] * h.re;
            h_r[(r, 2 * c + 1)] = -s_r[r] * h.im;
            h_i[(r, 2 * c)] = s_i[r] * h.im;
            h_i[(r, 2 * c + 1)] = s_i[r] * h.re;
        }
    }
    let margins = MarginMatrix::from_pairs(&h_r, &h_i);
    Ok(QmsepData { h_r, h_i, s_r, s_i, h: instance.h.clone(), symbols, sigma_w: instance.sigma_w, margins })
}

/// `-sum_k [ln Phi(h_R,k x_r) + ln Phi(h_I,k x_r)]`.
pub fn qmsep_objective(data: &QmsepData, x_r: &[f64]) -> f64 {
    value_at_margins(Criterion::Qmsep, &data.margins.margins(x_r))
}

pub fn qmsep_gradient(data: &QmsepData, x_r: &[f64]) -> Result<Vec<f64>> {
    gradient_of(Criterion::Qmsep, &data.margins, x_r)
}

pub fn qmsep_hessian(data: &QmsepData, x_r: &[f64]) -> Result<DMatrix<f64>> {
    hessian_of(Criterion::Qmsep, &data.margins, x_r)
}

/// Exact per-user SEP `1 - Phi(S_r Re{Hx}) Phi(S_i Im{Hx})`.
pub fn sep_qmsep(data: &QmsepData, x: &[Complex64]) -> Result<SepVector> {
    let values: Vec<f64> = data
        .complex_margins(x)?
        .into_iter()
        .map(|(a, b)| {
            let (qa, qb) = (q_function(a), q_function(b));
            qa + qb - qa * qb
        })
        .collect();
    Ok(SepVector { raw: values.clone(), values })
}
