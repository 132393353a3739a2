//! Jacobi elliptic functions and complete elliptic integrals of the first kind.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum distance from a pole of sn, cn, dn accepted by [`jacobi`].
pub const POLE_CLEARANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticModulus {
    k: f64,
    kprime: f64,
}

impl EllipticModulus {
    pub fn new(k: f64) -> Result<Self> {
        if !(k > 0.0 && k < 1.0) {
            return Err(Error::InvalidModulus(k));
        }
        Ok(Self { k, kprime: ((1.0 - k) * (1.0 + k)).sqrt() })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn kprime(&self) -> f64 {
        self.kprime
    }

    /// The modulus with the roles of k and k' exchanged.
    pub fn complementary(&self) -> Self {
        Self { k: self.kprime, kprime: self.k }
    }

    pub fn quarter_period(&self) -> f64 {
        agm_quarter_period(self.kprime)
    }

    pub fn quarter_period_imag(&self) -> f64 {
        agm_quarter_period(self.k)
    }
}

fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    0.5 * (a + b)
}

fn agm_quarter_period(kprime: f64) -> f64 {
    PI / (2.0 * agm(1.0, kprime))
}

/// K(k) = ∫₀^{π/2} dθ / √(1 − k² sin²θ).
pub fn complete_k(k: f64) -> Result<f64> {
    if k.is_nan() || k < 0.0 {
        return Err(Error::InvalidModulus(k));
    }
    if k >= 1.0 {
        return Err(Error::Divergent(k));
    }
    Ok(agm_quarter_period(((1.0 - k) * (1.0 + k)).sqrt()))
}

/// K'(k) = K(√(1 − k²)).
pub fn complete_kprime(k: f64) -> Result<f64> {
    if k.is_nan() || !(0.0..=1.0).contains(&k) {
        return Err(Error::InvalidModulus(k));
    }
    if k == 0.0 {
        return Err(Error::Divergent(k));
    }
    complete_k(((1.0 - k) * (1.0 + k)).sqrt())
}

/// (sn, cn, dn) for a real argument by the descending Landen (AGM) scheme.
pub fn jacobi_real(u: f64, m: &EllipticModulus) -> (f64, f64, f64) {
    let (k, kp) = (m.k, m.kprime);
    let period = 4.0 * m.quarter_period();
    let u = u - period * (u / period).round();

    let mut a = vec![1.0];
    let mut c = vec![k];
    let mut b = kp;
    while c.last().unwrap().abs() > 1e-17 && a.len() < 32 {
        let an = *a.last().unwrap();
        let next_a = 0.5 * (an + b);
        let next_c = 0.5 * (an - b);
        b = (an * b).sqrt();
        a.push(next_a);
        c.push(next_c);
    }
    let n = a.len() - 1;
    let mut phi = (1u64 << n) as f64 * a[n] * u;
    for j in (1..=n).rev() {
        phi = 0.5 * (phi + (c[j] / a[j] * phi.sin()).asin());
    }
    let sn = phi.sin();
    let cn = phi.cos();
    let ks2 = k * k * sn * sn;
    let dn = if ks2 < 0.5 { (1.0 - ks2).sqrt() } else { (kp * kp + k * k * cn * cn).sqrt() };
    (sn, cn, dn)
}

/// Nearest pole of sn, cn, dn: the lattice iK' + 2mK + 2niK'.
pub fn nearest_pole(u: Complex64, m: &EllipticModulus) -> Complex64 {
    let kk = m.quarter_period();
    let kkp = m.quarter_period_imag();
    let mi = (u.re / (2.0 * kk)).round();
    let ni = ((u.im - kkp) / (2.0 * kkp)).round();
    Complex64::new(2.0 * mi * kk, kkp + 2.0 * ni * kkp)
}

/// (sn, cn, dn) at a complex argument via the addition theorem on u = x + iy.
pub fn jacobi(u: Complex64, m: &EllipticModulus) -> Result<(Complex64, Complex64, Complex64)> {
    let d = (u - nearest_pole(u, m)).norm();
    if d < POLE_CLEARANCE {
        return Err(Error::PoleProximity { u, distance: d });
    }
    let (s, c, dd) = jacobi_real(u.re, m);
    if u.im == 0.0 {
        return Ok((s.into(), c.into(), dd.into()));
    }
    let (s1, c1, d1) = jacobi_real(u.im, &m.complementary());
    let k2 = m.k * m.k;
    let delta = c1 * c1 + k2 * s * s * s1 * s1;
    let sn = Complex64::new(s * d1, c * dd * s1 * c1) / delta;
    let cn = Complex64::new(c * c1, -s * dd * s1 * d1) / delta;
    let dn = Complex64::new(dd * c1 * d1, -k2 * s * c * s1) / delta;
    Ok((sn, cn, dn))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Theta-series evaluation, independent of the AGM/addition route.
    fn theta_oracle(u: Complex64, k: f64) -> (Complex64, Complex64, Complex64) {
        let kk = trapezoid_k(k);
        let kkp = trapezoid_k((1.0 - k * k).sqrt());
        let q = (-PI * kkp / kk).exp();
        let v = u * (PI / (2.0 * kk));
        let th = |which: u8, v: Complex64| -> Complex64 {
            let mut s = Complex64::new(0.0, 0.0);
            for n in 0..60i32 {
                let nf = n as f64;
                let term = match which {
                    1 => 2.0 * q.powf((nf + 0.5).powi(2)) * (if n % 2 == 0 { 1.0 } else { -1.0 }) * ((2.0 * nf + 1.0) * v).sin(),
                    2 => 2.0 * q.powf((nf + 0.5).powi(2)) * ((2.0 * nf + 1.0) * v).cos(),
                    3 => {
                        if n == 0 {
                            Complex64::new(1.0, 0.0)
                        } else {
                            2.0 * q.powf(nf * nf) * (2.0 * nf * v).cos()
                        }
                    }
                    _ => {
                        if n == 0 {
                            Complex64::new(1.0, 0.0)
                        } else {
                            2.0 * q.powf(nf * nf) * (if n % 2 == 0 { 1.0 } else { -1.0 }) * (2.0 * nf * v).cos()
                        }
                    }
                };
                s += term;
            }
            s
        };
        let zero = Complex64::new(0.0, 0.0);
        let (t2, t3, t4) = (th(2, zero), th(3, zero), th(4, zero));
        let (t1v, t2v, t3v, t4v) = (th(1, v), th(2, v), th(3, v), th(4, v));
        (t3 * t1v / (t2 * t4v), t4 * t2v / (t2 * t4v), t4 * t3v / (t3 * t4v))
    }

    /// Trapezoid rule on the periodic integrand: spectrally accurate.
    fn trapezoid_k(k: f64) -> f64 {
        let n = 4000;
        let h = PI / 2.0 / n as f64;
        let f = |t: f64| 1.0 / (1.0 - k * k * t.sin().powi(2)).sqrt();
        let mut s = 0.5 * (f(0.0) + f(PI / 2.0));
        for i in 1..n {
            s += f(i as f64 * h);
        }
        s * h
    }

    #[test]
    fn trivial_values() {
        let m = EllipticModulus::new(0.5).unwrap();
        let (s, c, d) = jacobi(Complex64::new(0.0, 0.0), &m).unwrap();
        assert_eq!((s.re, c.re, d.re), (0.0, 1.0, 1.0));
        for k in [0.1, 0.5, 0.9, 0.999] {
            let m = EllipticModulus::new(k).unwrap();
            let (s, c, d) = jacobi_real(m.quarter_period(), &m);
            assert!((s - 1.0).abs() < 1e-14);
            assert!(c.abs() < 1e-12);
            assert!((d - m.kprime()).abs() < 1e-12);
        }
    }

    #[test]
    fn complex_value_matches_theta_series() {
        let m = EllipticModulus::new(0.6).unwrap();
        let u = Complex64::new(0.7, 0.3);
        let (s, c, d) = jacobi(u, &m).unwrap();
        let (so, co, dor) = theta_oracle(u, 0.6);
        assert!((s - so).norm() < 1e-12, "{s} vs {so}");
        assert!((c - co).norm() < 1e-12);
        assert!((d - dor).norm() < 1e-12);
    }

    #[test]
    fn complete_integral_values() {
        assert_eq!(complete_k(0.0).unwrap(), PI / 2.0);
        assert!((complete_k(0.5).unwrap() - trapezoid_k(0.5)).abs() < 1e-12);
        assert!(complete_k(0.999999).unwrap().is_finite());
        assert!(matches!(complete_k(1.0), Err(Error::Divergent(_))));
        assert!(complete_k(0.3).unwrap() < complete_k(0.31).unwrap());
    }

    #[test]
    fn rejects_bad_modulus_and_poles() {
        assert!(matches!(EllipticModulus::new(1.0), Err(Error::InvalidModulus(_))));
        assert!(matches!(EllipticModulus::new(0.0), Err(Error::InvalidModulus(_))));
        let m = EllipticModulus::new(0.5).unwrap();
        let pole = Complex64::new(2.0 * m.quarter_period(), 3.0 * m.quarter_period_imag());
        assert!(matches!(jacobi(pole + 1e-10, &m), Err(Error::PoleProximity { .. })));
        assert!(jacobi(pole + 1e-6, &m).is_ok());
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1.0)
    }

    proptest! {
        #[test]
        fn pythagorean_identities(x in -8.0f64..8.0, y in -4.0f64..4.0, k in 0.01f64..0.99) {
            let m = EllipticModulus::new(k).unwrap();
            let u = Complex64::new(x, y);
            prop_assume!((u - nearest_pole(u, &m)).norm() > 0.05);
            let (s, c, d) = jacobi(u, &m).unwrap();
            let one = Complex64::new(1.0, 0.0);
            let scale = 1.0 + s.norm_sqr();
            prop_assert!((s * s + c * c - one).norm() / scale < 1e-12);
            prop_assert!((d * d + k * k * s * s - one).norm() / scale < 1e-12);
        }

        #[test]
        fn double_periodicity(x in -3.0f64..3.0, y in -1.0f64..1.0, k in 0.05f64..0.95) {
            let m = EllipticModulus::new(k).unwrap();
            let u = Complex64::new(x, y);
            prop_assume!((u - nearest_pole(u, &m)).norm() > 0.05);
            let (s, c, d) = jacobi(u, &m).unwrap();
            for shift in [Complex64::new(4.0 * m.quarter_period(), 0.0), Complex64::new(0.0, 4.0 * m.quarter_period_imag())] {
                let (s2, c2, d2) = jacobi(u + shift, &m).unwrap();
                prop_assert!(rel(s2, s) < 1e-10);
                prop_assert!(rel(c2, c) < 1e-10);
                prop_assert!(rel(d2, d) < 1e-10);
            }
        }

        #[test]
        fn parity(x in -5.0f64..5.0, y in -2.0f64..2.0, k in 0.05f64..0.95) {
            let m = EllipticModulus::new(k).unwrap();
            let u = Complex64::new(x, y);
            prop_assume!((u - nearest_pole(u, &m)).norm() > 0.05);
            let (s, c, d) = jacobi(u, &m).unwrap();
            let (sm, cm, dm) = jacobi(-u, &m).unwrap();
            prop_assert!(rel(sm, -s) < 1e-12);
            prop_assert!(rel(cm, c) < 1e-12);
            prop_assert!(rel(dm, d) < 1e-12);
        }

        #[test]
        fn agrees_with_theta_series(x in -2.0f64..2.0, y in -0.8f64..0.8, k in 0.2f64..0.9) {
            let m = EllipticModulus::new(k).unwrap();
            let u = Complex64::new(x, y);
            prop_assume!((u - nearest_pole(u, &m)).norm() > 0.2);
            let (s, c, d) = jacobi(u, &m).unwrap();
            let (so, co, dor) = theta_oracle(u, k);
            prop_assert!(rel(s, so) < 1e-10);
            prop_assert!(rel(c, co) < 1e-10);
            prop_assert!(rel(d, dor) < 1e-10);
        }
    }
}
