use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{gradient_of, hessian_of, value_at_margins, Criterion, MarginMatrix, SepVector};
use crate::error::{Error, Result};
use crate::model::PrecodingInstance;
use crate::special::erfc;

/// Union-bound problem data for `alpha_s`-PSK.
#[derive(Debug, Clone)]
pub struct UbmsepData {
    /// `(sin theta / sigma_w) H_R^{s*}`.
    pub h_r_theta: DMatrix<f64>,
    /// `(cos theta / sigma_w) H_I^{s*}`.
    pub h_i_theta: DMatrix<f64>,
    /// Rows `h_1,k = h_R,theta,k - h_I,theta,k`.
    pub h1: DMatrix<f64>,
    /// Rows `h_2,k = h_R,theta,k + h_I,theta,k`.
    pub h2: DMatrix<f64>,
    /// `(sin theta / sigma_w) diag(s*) H`.
    pub h_s: DMatrix<Complex64>,
    /// `(cos theta / sigma_w) diag(s*) H`.
    pub h_c: DMatrix<Complex64>,
    pub theta: f64,
    pub h: DMatrix<Complex64>,
    pub symbols: Vec<Complex64>,
    pub sigma_w: f64,
    margins: MarginMatrix,
}

impl UbmsepData {
    pub fn margin_matrix(&self) -> &MarginMatrix {
        &self.margins
    }
}

pub fn build_ubmsep(instance: &PrecodingInstance) -> Result<UbmsepData> {
    let (k, m) = instance.h.shape();
    let symbols = instance.symbol_values();
    let theta = std::f64::consts::PI / instance.alpha_s as f64;
    let (sin_t, cos_t) = theta.sin_cos();
    let sigma = instance.sigma_w;
    let mut h_star = instance.h.clone();
    for r in 0..k {
        let sc = symbols[r].conj();
        for c in 0..m {
            h_star[(r, c)] *= sc;
        }
    }
    let mut h_r_theta = DMatrix::zeros(k, 2 * m);
    let mut h_i_theta = DMatrix::zeros(k, 2 * m);
    for r in 0..k {
        for c in 0..m {
            let g = h_star[(r, c)];
            h_r_theta[(r, 2 * c)] = sin_t / sigma * g.re;
            h_r_theta[(r, 2 * c + 1)] = -sin_t / sigma * g.im;
            h_i_theta[(r, 2 * c)] = cos_t / sigma * g.im;
            h_i_theta[(r, 2 * c + 1)] = cos_t / sigma * g.re;
        }
    }
    let h1 = &h_r_theta - &h_i_theta;
    let h2 = &h_r_theta + &h_i_theta;
    let h_s = h_star.map(|g| g * (sin_t / sigma));
    let h_c = h_star.map(|g| g * (cos_t / sigma));
    let margins = MarginMatrix::from_pairs(&h1, &h2);
    Ok(UbmsepData {
        h_r_theta,
        h_i_theta,
        h1,
        h2,
        h_s,
        h_c,
        theta,
        h: instance.h.clone(),
        symbols,
        sigma_w: sigma,
        margins,
    })
}

/// `-sum_k ln(erf(h_1,k x_r) + erf(h_2,k x_r))`, `+inf` if any sum is not positive.
pub fn ubmsep_objective(data: &UbmsepData, x_r: &[f64]) -> f64 {
    let users = data.margins.users() as f64;
    value_at_margins(Criterion::Ubmsep, &data.margins.margins(x_r)) - users * std::f64::consts::LN_2
}

pub fn ubmsep_gradient(data: &UbmsepData, x_r: &[f64]) -> Result<Vec<f64>> {
    gradient_of(Criterion::Ubmsep, &data.margins, x_r)
}

pub fn ubmsep_hessian(data: &UbmsepData, x_r: &[f64]) -> Result<DMatrix<f64>> {
    hessian_of(Criterion::Ubmsep, &data.margins, x_r)
}

/// Complex-domain distances to the two decision thresholds, not scaled by
/// `sigma_w`: `d_1 = Re{w} sin(theta) - Im{w} cos(theta)`,
/// `d_2 = Re{w} sin(theta) + Im{w} cos(theta)` with `w = s_k^* h_k x`.
pub fn mddt(data: &UbmsepData, x: &[Complex64]) -> Result<Vec<(f64, f64)>> {
    if x.len() != data.h.ncols() {
        return Err(Error::Dimension(format!("{} entries for {} antennas", x.len(), data.h.ncols())));
    }
    let (sin_t, cos_t) = data.theta.sin_cos();
    Ok((0..data.h.nrows())
        .map(|k| {
            let y: Complex64 = (0..x.len()).map(|m| data.h[(k, m)] * x[m]).sum();
            let w = data.symbols[k].conj() * y;
            (w.re * sin_t - w.im * cos_t, w.re * sin_t + w.im * cos_t)
        })
        .collect())
}

/// Union bound `Q(sqrt2 d_1/sigma_w) + Q(sqrt2 d_2/sigma_w)` per user.
pub fn sep_ubmsep_bound(data: &UbmsepData, x: &[Complex64]) -> Result<SepVector> {
    let raw: Vec<f64> = mddt(data, x)?
        .into_iter()
        .map(|(d1, d2)| 0.5 * (erfc(d1 / data.sigma_w) + erfc(d2 / data.sigma_w)))
        .collect();
    let values = raw.iter().map(|p| p.clamp(0.0, 1.0)).collect();
    Ok(SepVector { values, raw })
}
