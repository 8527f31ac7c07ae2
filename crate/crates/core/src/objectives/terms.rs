//! Per-user objective terms as functions of the user's two margins.
//!
//! Both criteria are sums over users of a scalar function of two linear
//! margins `(u, v) = (a_k x_r, b_k x_r)`. The terms here are offset so that
//! they are nonnegative: the UBMSEP term is `-ln((erf u + erf v) / 2)`, which
//! differs from the raw `-ln(erf u + erf v)` by `ln 2` per user.

use std::f64::consts::LN_2;

use crate::special::{erf_prime, erfc, inv_mills, inv_mills_curvature, log_norm_cdf};

use super::Criterion;

/// `(erf u + erf v) / 2` evaluated without cancellation in either tail.
/// Returns a nonpositive value when the sum is not positive.
pub(crate) fn half_erf_sum(u: f64, v: f64) -> f64 {
    match (u >= 0.0, v >= 0.0) {
        (true, true) => 1.0 - 0.5 * (erfc(u) + erfc(v)),
        (false, true) => 0.5 * (erfc(-u) - erfc(v)),
        (true, false) => 0.5 * (erfc(-v) - erfc(u)),
        (false, false) => -1.0,
    }
}

/// Nonnegative per-user term; `+inf` outside the UBMSEP domain.
#[inline]
pub(crate) fn value(kind: Criterion, u: f64, v: f64) -> f64 {
    match kind {
        Criterion::Qmsep => -log_norm_cdf(u) - log_norm_cdf(v),
        Criterion::Ubmsep => {
            if u >= 0.0 && v >= 0.0 {
                // -ln(1 - (erfc u + erfc v)/2), accurate when the tails are tiny
                -(-0.5 * (erfc(u) + erfc(v))).ln_1p()
            } else {
                let h = half_erf_sum(u, v);
                if h > 0.0 {
                    -h.ln()
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

/// Constant added to the raw objective to obtain the nonnegative form.
pub(crate) fn offset_per_user(kind: Criterion) -> f64 {
    match kind {
        Criterion::Qmsep => 0.0,
        Criterion::Ubmsep => LN_2,
    }
}

/// Partial derivatives `(d/du, d/dv)`; `None` outside the domain.
#[inline]
pub(crate) fn gradient(kind: Criterion, u: f64, v: f64) -> Option<(f64, f64)> {
    match kind {
        Criterion::Qmsep => Some((-inv_mills(u), -inv_mills(v))),
        Criterion::Ubmsep => {
            let s = 2.0 * half_erf_sum(u, v);
            if s > 0.0 {
                Some((-erf_prime(u) / s, -erf_prime(v) / s))
            } else {
                None
            }
        }
    }
}

/// Second derivatives `(uu, uv, vv)`; `None` outside the domain.
#[inline]
pub(crate) fn hessian(kind: Criterion, u: f64, v: f64) -> Option<(f64, f64, f64)> {
    match kind {
        Criterion::Qmsep => Some((inv_mills_curvature(u), 0.0, inv_mills_curvature(v))),
        Criterion::Ubmsep => {
            let s = 2.0 * half_erf_sum(u, v);
            if s > 0.0 {
                let eu = erf_prime(u);
                let ev = erf_prime(v);
                let s2 = s * s;
                Some((2.0 * u * eu / s + eu * eu / s2, eu * ev / s2, 2.0 * v * ev / s + ev * ev / s2))
            } else {
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::erf;

    #[test]
    fn half_sum_branches_match_direct_formula() {
        for &(u, v) in &[(0.3, 1.2), (-0.4, 1.1), (2.0, -0.5), (0.0, 0.0), (-1.0, -0.2)] {
            let direct = 0.5 * (erf(u) + erf(v));
            let h = half_erf_sum(u, v);
            if direct > 0.0 {
                assert!((h - direct).abs() < 1e-15, "({u}, {v})");
            } else {
                assert!(h <= 0.0);
            }
        }
    }

    #[test]
    fn ubmsep_term_domain() {
        assert_eq!(value(Criterion::Ubmsep, 0.0, 0.0), f64::INFINITY);
        assert_eq!(value(Criterion::Ubmsep, -1.0, 0.5), f64::INFINITY);
        assert!(value(Criterion::Ubmsep, -0.5, 1.0).is_finite());
        assert!(gradient(Criterion::Ubmsep, -1.0, -1.0).is_none());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6;
        for kind in [Criterion::Qmsep, Criterion::Ubmsep] {
            for &(u, v) in &[(0.4, 0.9), (1.5, 0.2), (-0.3, 1.4)] {
                let (gu, gv) = gradient(kind, u, v).unwrap();
                let fu = (value(kind, u + h, v) - value(kind, u - h, v)) / (2.0 * h);
                let fv = (value(kind, u, v + h) - value(kind, u, v - h)) / (2.0 * h);
                assert!((gu - fu).abs() < 1e-7 * (1.0 + gu.abs()));
                assert!((gv - fv).abs() < 1e-7 * (1.0 + gv.abs()));
                let (huu, huv, hvv) = hessian(kind, u, v).unwrap();
                let du = gradient(kind, u + h, v).unwrap();
                let dl = gradient(kind, u - h, v).unwrap();
                assert!((huu - (du.0 - dl.0) / (2.0 * h)).abs() < 1e-6 * (1.0 + huu.abs()));
                assert!((huv - (du.1 - dl.1) / (2.0 * h)).abs() < 1e-6 * (1.0 + huv.abs()));
                let dvu = gradient(kind, u, v + h).unwrap();
                let dvl = gradient(kind, u, v - h).unwrap();
                assert!((hvv - (dvu.1 - dvl.1) / (2.0 * h)).abs() < 1e-6 * (1.0 + hvv.abs()));
            }
        }
    }
}
