use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense polynomial with complex coefficients in ascending order.
/// Trailing zero coefficients are trimmed, so the zero polynomial has no coefficients.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "Vec<Complex64>", into = "Vec<Complex64>")]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl From<Vec<Complex64>> for Polynomial {
    fn from(v: Vec<Complex64>) -> Self {
        Self::new(v)
    }
}

impl From<Polynomial> for Vec<Complex64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.last().is_some_and(|c| *c == ZERO) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![c])
    }

    pub fn one() -> Self {
        Self::constant(ONE)
    }

    /// z − c.
    pub fn linear(c: Complex64) -> Self {
        Self::new(vec![-c, ONE])
    }

    /// ∏ (z − rᵢ).
    pub fn from_roots(roots: &[Complex64]) -> Self {
        roots.iter().fold(Self::one(), |acc, r| &acc * &Self::linear(*r))
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> Complex64 {
        self.coeffs.get(i).copied().unwrap_or(ZERO)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs.last().copied().unwrap_or(ZERO)
    }

    /// Euclidean norm of the coefficient vector.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, c| acc * z + c)
    }

    /// Σ |aᵢ| |z|ⁱ, the natural magnitude against which |p(z)| is judged.
    pub fn eval_scale(&self, z: Complex64) -> f64 {
        let r = z.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn derivative(&self) -> Self {
        Self::new(self.coeffs.iter().enumerate().skip(1).map(|(i, c)| c * i as f64).collect())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn monic(&self) -> Self {
        self.scale(1.0 / self.leading())
    }

    pub fn pow(&self, n: usize) -> Self {
        (0..n).fold(Self::one(), |acc, _| &acc * self)
    }

    /// Quotient and remainder of Euclidean division.
    pub fn div_rem(&self, d: &Self) -> (Self, Self) {
        let dd = d.degree().expect("division by the zero polynomial");
        let Some(nd) = self.degree() else {
            return (Self::zero(), Self::zero());
        };
        if nd < dd {
            return (Self::zero(), self.clone());
        }
        let mut rem = self.coeffs.clone();
        let mut q = vec![ZERO; nd - dd + 1];
        let lead = d.leading();
        for i in (0..=nd - dd).rev() {
            let f = rem[i + dd] / lead;
            q[i] = f;
            for (j, dc) in d.coeffs.iter().enumerate() {
                rem[i + j] -= f * dc;
            }
            rem[i + dd] = ZERO;
        }
        rem.truncate(dd);
        (Self::new(q), Self::new(rem))
    }

    /// Divides by (z − c); returns the quotient and the remainder p(c).
    pub fn deflate(&self, c: Complex64) -> (Self, Complex64) {
        let n = self.coeffs.len();
        if n == 0 {
            return (Self::zero(), ZERO);
        }
        let mut q = vec![ZERO; n - 1];
        let mut acc = ZERO;
        for i in (0..n).rev() {
            acc = acc * c + self.coeffs[i];
            if i > 0 {
                q[i - 1] = acc;
            }
        }
        (Self::new(q), acc)
    }

    /// Coefficients of p(c + w) in powers of w.
    pub fn taylor_at(&self, c: Complex64) -> Self {
        let mut a = self.coeffs.clone();
        let n = a.len();
        for i in 0..n {
            for j in (i..n - 1).rev() {
                let t = a[j + 1] * c;
                a[j] += t;
            }
        }
        Self::new(a)
    }

    /// Reversal zⁿ p(1/z) with n the degree.
    pub fn reversed(&self) -> Self {
        Self::new(self.coeffs.iter().rev().copied().collect())
    }

    /// Roots by eigenvalues of the companion matrix, each polished by Newton steps.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        let n = match self.degree() {
            None => return Err(Error::InvalidParams("roots of the zero polynomial".into())),
            Some(0) => return Ok(Vec::new()),
            Some(n) => n,
        };
        let m = self.monic();
        let mut comp = DMatrix::<Complex64>::zeros(n, n);
        for i in 1..n {
            comp[(i, i - 1)] = ONE;
        }
        for i in 0..n {
            comp[(i, n - 1)] = -m.coeffs[i];
        }
        let roots = match Schur::try_new(comp, f64::EPSILON, 200 * n).and_then(|s| s.eigenvalues()) {
            Some(eig) => eig.iter().copied().collect(),
            None => m.aberth()?,
        };
        Ok(roots.into_iter().map(|z| m.polish_root(z)).collect())
    }

    /// Simultaneous Aberth-Ehrlich iteration for a monic polynomial; used when the
    /// companion QR iteration stalls.
    fn aberth(&self) -> Result<Vec<Complex64>> {
        let n = self.degree().unwrap_or(0);
        let dp = self.derivative();
        let radius = 1.0 + self.coeffs[..n].iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mut z: Vec<Complex64> = (0..n)
            .map(|j| Complex64::from_polar(0.5 * radius, 2.0 * std::f64::consts::PI * (j as f64 + 0.25) / n as f64 + 0.4))
            .collect();
        for _ in 0..2000 {
            let mut worst: f64 = 0.0;
            for i in 0..n {
                let ratio = self.eval(z[i]) / dp.eval(z[i]);
                let repulsion: Complex64 = (0..n).filter(|&j| j != i).map(|j| 1.0 / (z[i] - z[j])).sum();
                let step = ratio / (1.0 - ratio * repulsion);
                if step.is_finite() {
                    z[i] -= step;
                    worst = worst.max(step.norm() / (1.0 + z[i].norm()));
                }
            }
            if worst < 1e-15 {
                return Ok(z);
            }
        }
        if z.iter().all(|r| r.is_finite()) {
            Ok(z)
        } else {
            Err(Error::InvalidParams("polynomial root iteration did not converge".into()))
        }
    }

    /// Newton iteration from `z`, kept only while it reduces |p|.
    pub fn polish_root(&self, mut z: Complex64) -> Complex64 {
        let dp = self.derivative();
        let mut best = self.eval(z).norm();
        for _ in 0..30 {
            if best <= 1e-14 * self.eval_scale(z) {
                break;
            }
            let d = dp.eval(z);
            if d == ZERO {
                break;
            }
            let cand = z - self.eval(z) / d;
            let v = self.eval(cand).norm();
            if v < best {
                z = cand;
                best = v;
            } else {
                break;
            }
        }
        z
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if *c == ZERO {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match i {
                0 => write!(f, "({c})")?,
                1 => write!(f, "({c})z")?,
                _ => write!(f, "({c})z^{i}")?,
            }
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, o: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(o.coeffs.len());
        Polynomial::new((0..n).map(|i| self.coeff(i) + o.coeff(i)).collect())
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, o: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(o.coeffs.len());
        Polynomial::new((0..n).map(|i| self.coeff(i) - o.coeff(i)).collect())
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, o: &Polynomial) -> Polynomial {
        if self.is_zero() || o.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![ZERO; self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-ONE)
    }
}

/// Power series a / b truncated to `n` terms; requires b(0) ≠ 0.
pub fn series_div(a: &[Complex64], b: &[Complex64], n: usize) -> Vec<Complex64> {
    let get = |v: &[Complex64], i: usize| v.get(i).copied().unwrap_or(ZERO);
    let b0 = get(b, 0);
    let mut out = vec![ZERO; n];
    for i in 0..n {
        let mut s = get(a, i);
        for j in 1..=i {
            s -= get(b, j) * out[i - j];
        }
        out[i] = s / b0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn arithmetic_and_division() {
        let p = Polynomial::from_real(&[1.0, -2.0, 0.0, 3.0]);
        let d = Polynomial::from_real(&[-1.0, 1.0]);
        let (q, r) = p.div_rem(&d);
        let back = &(&q * &d) + &r;
        assert_eq!(back, p);
        assert_eq!(r.coeff(0), p.eval(ONE));
        let (q2, rem) = p.deflate(ONE);
        assert_eq!(q2, q);
        assert_eq!(rem, r.coeff(0));
        assert_eq!(Polynomial::from_real(&[0.0, 0.0]).degree(), None);
    }

    #[test]
    fn symmetric_double_roots() {
        let kp = 0.75f64.sqrt();
        let base = [c(0.5, 0.0), c(-0.5, 0.0), c(0.0, kp), c(0.0, -kp)];
        let p = Polynomial::from_roots(&[base, base].concat());
        for z in p.roots().unwrap().into_iter().chain(p.monic().aberth().unwrap()) {
            let nearest = base.iter().map(|b| (z - b).norm()).fold(f64::INFINITY, f64::min);
            assert!(nearest < 1e-6, "{z}");
        }
    }

    #[test]
    fn roots_of_known_polynomial() {
        let roots = [c(0.5, 0.0), c(-0.5, 0.0), c(0.0, 0.8), c(0.0, -0.8), c(1.5, 0.3)];
        let p = Polynomial::from_roots(&roots);
        let found = p.roots().unwrap();
        for r in roots {
            assert!(found.iter().any(|f| (f - r).norm() < 1e-13), "missing {r}");
        }
        for f in &found {
            assert!(p.eval(*f).norm() < 1e-10 * p.norm());
        }
    }

    #[test]
    fn taylor_shift() {
        let p = Polynomial::from_real(&[1.0, 2.0, 3.0]);
        let t = p.taylor_at(c(2.0, 0.0));
        // p(2 + w) = 17 + 14 w + 3 w²
        assert_eq!(t, Polynomial::from_real(&[17.0, 14.0, 3.0]));
    }

    #[test]
    fn series_division() {
        // 1 / (1 − x) = Σ xⁿ
        let s = series_div(&[ONE], &[ONE, -ONE], 5);
        assert!(s.iter().all(|v| *v == ONE));
    }

    proptest! {
        #[test]
        fn derivative_matches_finite_difference(
            coeffs in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..9),
            x in -1.5f64..1.5, y in -1.5f64..1.5,
        ) {
            let p = Polynomial::new(coeffs.into_iter().map(|(a, b)| c(a, b)).collect());
            let z = c(x, y);
            let h = 1e-5;
            let fd = (p.eval(z + h) - p.eval(z - h)) / (2.0 * h);
            let exact = p.derivative().eval(z);
            prop_assert!((fd - exact).norm() <= 1e-7 * (1.0 + exact.norm()) + 1e-9 * p.eval_scale(z));
        }

        #[test]
        fn random_roots_are_recovered(
            rs in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..9),
        ) {
            let roots: Vec<_> = rs.into_iter().map(|(a, b)| c(a, b)).collect();
            let mut sep = f64::INFINITY;
            for i in 0..roots.len() {
                for j in (i + 1)..roots.len() {
                    sep = sep.min((roots[i] - roots[j]).norm());
                }
            }
            prop_assume!(sep > 0.05);
            let p = Polynomial::from_roots(&roots);
            let found = p.roots().unwrap();
            for f in &found {
                prop_assert!(p.eval(*f).norm() < 1e-10 * p.norm());
            }
            for r in &roots {
                prop_assert!(found.iter().any(|f| (f - r).norm() < 1e-8));
            }
        }
    }
}
