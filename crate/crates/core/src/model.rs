//! PSK alphabets, complex/real coordinate maps, channel and noise
//! generation, hard detection.

use std::f64::consts::{PI, TAU};
use std::ops::Deref;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// An `order`-point PSK constellation with points
/// `amplitude * exp(j pi (2i + 1) / order)` for `i = 0..order`.
///
/// Index 0 is the point at angle `pi/order`; angles increase with the index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PskAlphabet {
    order: usize,
    amplitude: f64,
}

impl PskAlphabet {
    pub fn new(order: usize, amplitude: f64) -> Result<Self> {
        if order < 2 {
            return Err(Error::Parameter(format!("PSK order must be >= 2, got {order}")));
        }
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::Parameter(format!("PSK amplitude must be positive, got {amplitude}")));
        }
        Ok(Self { order, amplitude })
    }

    /// Unit-modulus alphabet, used for data symbols.
    pub fn unit(order: usize) -> Result<Self> {
        Self::new(order, 1.0)
    }

    /// Transmit alphabet for `m` antennas: amplitude `1/sqrt(m)` so that every
    /// transmit vector has unit energy.
    pub fn transmit(order: usize, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Parameter("antenna count must be >= 1".into()));
        }
        Self::new(order, 1.0 / (m as f64).sqrt())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Half sector width `pi / order`.
    pub fn theta(&self) -> f64 {
        PI / self.order as f64
    }

    pub fn angle(&self, i: usize) -> f64 {
        PI * (2 * i + 1) as f64 / self.order as f64
    }

    pub fn point(&self, i: usize) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.angle(i))
    }

    pub fn points(&self) -> Vec<Complex64> {
        (0..self.order).map(|i| self.point(i)).collect()
    }

    /// Nearest point in Euclidean distance, ties to the lowest index.
    pub fn nearest(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for i in 0..self.order {
            let d = (z - self.point(i)).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Distance from `z` to the closest alphabet point.
    pub fn distance(&self, z: Complex64) -> f64 {
        (z - self.point(self.nearest(z))).norm()
    }
}

/// Real-valued description of a complex vector: `[Re x1, Im x1, ..., Re xM, Im xM]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RealVector(pub Vec<f64>);

impl Deref for RealVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for RealVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

pub fn to_real(x: &[Complex64]) -> RealVector {
    RealVector(x.iter().flat_map(|c| [c.re, c.im]).collect())
}

pub fn to_complex(x_r: &[f64]) -> Result<Vec<Complex64>> {
    if !x_r.len().is_multiple_of(2) {
        return Err(Error::Dimension(format!("real vector length {} is odd", x_r.len())));
    }
    Ok(x_r.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect())
}

/// Full input of one precoding problem.
#[derive(Debug, Clone)]
pub struct PrecodingInstance {
    pub h: DMatrix<Complex64>,
    /// Data-alphabet index per user.
    pub symbols: Vec<usize>,
    pub sigma_w: f64,
    pub alpha_s: usize,
    pub alpha_x: usize,
}

impl PrecodingInstance {
    pub fn new(
        h: DMatrix<Complex64>,
        symbols: Vec<usize>,
        sigma_w: f64,
        alpha_s: usize,
        alpha_x: usize,
    ) -> Result<Self> {
        if h.nrows() == 0 || h.ncols() == 0 {
            return Err(Error::Dimension("channel must be at least 1x1".into()));
        }
        if symbols.len() != h.nrows() {
            return Err(Error::Dimension(format!(
                "{} symbols for {} users",
                symbols.len(),
                h.nrows()
            )));
        }
        if alpha_s < 2 || alpha_x < 2 {
            return Err(Error::Parameter("alphabet orders must be >= 2".into()));
        }
        if let Some(&bad) = symbols.iter().find(|&&s| s >= alpha_s) {
            return Err(Error::OutOfRange { index: bad, max: alpha_s - 1 });
        }
        if !(sigma_w > 0.0 && sigma_w.is_finite()) {
            return Err(Error::Parameter(format!("sigma_w must be positive, got {sigma_w}")));
        }
        Ok(Self { h, symbols, sigma_w, alpha_s, alpha_x })
    }

    pub fn users(&self) -> usize {
        self.h.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.h.ncols()
    }

    pub fn data_alphabet(&self) -> PskAlphabet {
        PskAlphabet { order: self.alpha_s, amplitude: 1.0 }
    }

    pub fn transmit_alphabet(&self) -> PskAlphabet {
        PskAlphabet { order: self.alpha_x, amplitude: 1.0 / (self.antennas() as f64).sqrt() }
    }

    pub fn symbol_values(&self) -> Vec<Complex64> {
        let a = self.data_alphabet();
        self.symbols.iter().map(|&i| a.point(i)).collect()
    }

    /// Transmit vector for a tuple of transmit-alphabet indices.
    pub fn transmit_vector(&self, indices: &[usize]) -> Vec<Complex64> {
        let a = self.transmit_alphabet();
        indices.iter().map(|&i| a.point(i)).collect()
    }

    /// Noiseless receive vector `y = H x`.
    pub fn noiseless(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.antennas() {
            return Err(Error::Dimension(format!(
                "transmit vector has {} entries, channel has {} antennas",
                x.len(),
                self.antennas()
            )));
        }
        Ok((0..self.users())
            .map(|k| (0..self.antennas()).map(|m| self.h[(k, m)] * x[m]).sum())
            .collect())
    }
}

/// Receiver-side observation for one channel use.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedSample {
    pub z: Vec<Complex64>,
    pub y: Vec<Complex64>,
}

/// One draw of `CN(0, sigma^2)`: independent real and imaginary parts with
/// variance `sigma^2 / 2` each.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> Complex64 {
    let s = sigma * std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// I.i.d. Rayleigh channel, entries `CN(0, sigma_g^2)`, drawn row-major.
pub fn generate_channel<R: Rng + ?Sized>(
    k: usize,
    m: usize,
    sigma_g: f64,
    rng: &mut R,
) -> Result<DMatrix<Complex64>> {
    if k == 0 || m == 0 {
        return Err(Error::Dimension("channel must be at least 1x1".into()));
    }
    if !(sigma_g > 0.0 && sigma_g.is_finite()) {
        return Err(Error::Parameter(format!("sigma_g must be positive, got {sigma_g}")));
    }
    let mut h = DMatrix::zeros(k, m);
    for r in 0..k {
        for c in 0..m {
            h[(r, c)] = complex_gaussian(rng, sigma_g);
        }
    }
    Ok(h)
}

/// `z = H x + w`, `w_k ~ CN(0, sigma_w^2)` i.i.d.
pub fn transmit<R: Rng + ?Sized>(
    instance: &PrecodingInstance,
    x: &[Complex64],
    rng: &mut R,
) -> Result<ReceivedSample> {
    let y = instance.noiseless(x)?;
    let z = y.iter().map(|&yk| yk + complex_gaussian(rng, instance.sigma_w)).collect();
    Ok(ReceivedSample { z, y })
}

/// Noise-disabled transmission: `z = y = H x`.
pub fn transmit_noiseless(instance: &PrecodingInstance, x: &[Complex64]) -> Result<ReceivedSample> {
    let y = instance.noiseless(x)?;
    Ok(ReceivedSample { z: y.clone(), y })
}

/// Hard PSK detection by sector membership. Sector `i` covers angles
/// `[2 pi i / order, 2 pi (i+1) / order)`; magnitude is ignored. Points on a
/// boundary and `z = 0` resolve to the lowest adjacent index.
pub fn hard_detect(z: Complex64, alphabet: &PskAlphabet) -> usize {
    let n = alphabet.order();
    if z.re == 0.0 && z.im == 0.0 {
        return 0;
    }
    let mut phi = z.im.atan2(z.re);
    if phi < 0.0 {
        phi += TAU;
    }
    let pos = phi * n as f64 / TAU;
    let sector = (pos.floor() as usize).min(n - 1);
    if pos == pos.floor() {
        // exactly on the boundary between sector-1 and sector
        let below = (sector + n - 1) % n;
        return below.min(sector);
    }
    sector
}

pub fn count_symbol_errors(symbols: &[usize], z: &[Complex64], alphabet: &PskAlphabet) -> Result<usize> {
    if symbols.len() != z.len() {
        return Err(Error::Dimension(format!("{} symbols vs {} observations", symbols.len(), z.len())));
    }
    Ok(symbols.iter().zip(z).filter(|(&s, &zk)| hard_detect(zk, alphabet) != s).count())
}
