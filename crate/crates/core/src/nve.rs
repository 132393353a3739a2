//! Normal variational equation along the particular family: the time-domain
//! coefficient a(t), its algebraic form in z = k·cn(ωt), the reduced form
//! W″ = r(z)W and the local expansion at z = ∞.

use num_complex::Complex64;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratfun::{Pole, Polynomial, RationalFunction, RationalJson, SingularSet};
use crate::solutions::{Branch, ParticularSolution};

/// |g|·ω³ above this means the second solution at infinity carries a logarithm.
pub const LOG_THRESHOLD: f64 = 1e-10;
/// Log coefficients between the threshold and this value are flagged as near-threshold.
pub const LOG_WARNING_BAND: f64 = 1e-6;
const FROBENIUS_ORDER: usize = 6;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Second-order normal equation Q̈ + a(t)Q = 0 along the family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NveTime {
    sol: ParticularSolution,
    xi: f64,
}

impl NveTime {
    pub fn new(sol: ParticularSolution, xi: f64) -> Self {
        Self { sol, xi }
    }

    pub fn from_params(c: f64, k: f64, xi: f64) -> Result<Self> {
        Ok(Self::new(ParticularSolution::from_c(c, k)?, xi))
    }

    pub fn solution(&self) -> &ParticularSolution {
        &self.sol
    }

    pub fn k(&self) -> f64 {
        self.sol.k()
    }

    pub fn omega(&self) -> f64 {
        self.sol.omega
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn branch(&self) -> Branch {
        self.sol.branch
    }

    pub fn period(&self) -> f64 {
        self.sol.periods().0
    }

    /// a(t) = p₁² − 3(C−1)sin²q₁ − ξ with p₁ = M₁ and sin q₁ = S₃.
    pub fn a(&self, t: f64) -> f64 {
        let p = self.sol.phi_real(t);
        p.m1 * p.m1 - 3.0 * (self.sol.c - 1.0) * p.s3 * p.s3 - self.xi
    }

    pub fn a_complex(&self, t: Complex64) -> Result<Complex64> {
        let p = self.sol.phi(t)?;
        Ok(p.m1 * p.m1 - 3.0 * (self.sol.c - 1.0) * p.s3 * p.s3 - self.xi)
    }

    /// Tangent (Q̇₁, Ṗ₁, Q̇₂, Ṗ₂) of the variational block in the invariant-plane directions.
    pub fn variational_rhs(&self, t: Complex64, y: &[Complex64; 4]) -> Result<[Complex64; 4]> {
        let p = self.sol.phi(t)?;
        let s3sq = p.s3 * p.s3;
        let cos2q1 = 1.0 - 2.0 * s3sq;
        let a = p.m1 * p.m1 - 3.0 * (self.sol.c - 1.0) * s3sq - self.xi;
        Ok([y[1], cos2q1 * (3.0 * (1.0 - self.sol.c)) * y[0], y[3], -a * y[2]])
    }

    pub fn variational_rhs_real(&self, t: f64, y: &[f64; 4]) -> [f64; 4] {
        let p = self.sol.phi_real(t);
        let s3sq = p.s3 * p.s3;
        let a = p.m1 * p.m1 - 3.0 * (self.sol.c - 1.0) * s3sq - self.xi;
        [y[1], 3.0 * (1.0 - self.sol.c) * (1.0 - 2.0 * s3sq) * y[0], y[3], -a * y[2]]
    }
}

/// Parameters of a member of the satellite family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyMeta {
    #[serde(rename = "C")]
    pub c: f64,
    pub k: f64,
    pub omega: f64,
    pub xi: f64,
    pub branch: Branch,
}

impl FamilyMeta {
    pub fn kprime(&self) -> f64 {
        ((1.0 - self.k) * (1.0 + self.k)).sqrt()
    }

    /// True when 2ξ = 3(1 − C), the level where the logarithm at infinity disappears.
    pub fn on_abelian_level(&self, tol: f64) -> bool {
        (2.0 * self.xi - 3.0 * (1.0 - self.c)).abs() <= tol
    }
}

/// Singular points of the normal equation in z, ordered k, −k, −ik′, ik′.
pub fn family_poles(k: f64, kprime: f64) -> [Complex64; 4] {
    [Complex64::new(k, 0.0), Complex64::new(-k, 0.0), -I * kprime, I * kprime]
}

/// Q″ + p(z)Q′ + q(z)Q = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraicNve {
    pub p: RationalFunction,
    pub q: RationalFunction,
    pub meta: FamilyMeta,
}

/// Rewrites the normal equation in the variable z = k·cn(ωt).
pub fn algebraize(sol: &ParticularSolution, xi: f64) -> Result<AlgebraicNve> {
    let (k, kp, w) = (sol.k(), sol.kprime(), sol.omega);
    let (k2, kp2, w2) = (k * k, kp * kp, w * w);
    let poles: Vec<Pole> = family_poles(k, kp).into_iter().map(|at| Pole { at, order: 1 }).collect();
    // With T = (k² − z²)(z² + k′²) = −∏(z − c), numerators are taken over the monic ∏(z − c).
    let p_num = Polynomial::from_real(&[0.0, 1.0 - 2.0 * k2, 0.0, 2.0]);
    let n0 = match sol.branch {
        Branch::CLessThanOne => 1.0 - xi + w2 * kp2,
        Branch::CGreaterThanOne => 1.0 - xi - w2 * k2,
    };
    let q_num = Polynomial::from_real(&[-n0 / w2, -(2.0 * w) / w2, -(w2 + w2) / w2]);
    let meta = FamilyMeta { c: sol.c, k, omega: w, xi, branch: sol.branch };
    Ok(AlgebraicNve {
        p: RationalFunction::from_parts(p_num, poles.clone())?,
        q: RationalFunction::from_parts(q_num, poles)?,
        meta,
    })
}

/// Data at a finite singular point of W″ = rW: r = a/(z−c)² + b/(z−c) + …
#[derive(Debug, Clone, PartialEq)]
pub struct SingularPoint {
    pub at: Complex64,
    pub order: usize,
    pub a: Complex64,
    pub b: Complex64,
    pub a_exact: Option<Rational64>,
}

/// r = a/z² + O(z⁻³) at infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct InfinityPoint {
    pub order: usize,
    pub a: Complex64,
    pub a_exact: Option<Rational64>,
}

/// W″ = r(z)W with only regular singular points.
#[derive(Debug, Clone, PartialEq)]
pub struct FuchsianProblem {
    pub r: RationalFunction,
    pub singular_set: SingularSet,
    pub points: Vec<SingularPoint>,
    pub infinity: InfinityPoint,
    pub meta: Option<FamilyMeta>,
}

impl FuchsianProblem {
    pub fn from_r(r: RationalFunction) -> Result<Self> {
        let singular_set = r.singular_set();
        if !singular_set.is_fuchsian() {
            return Err(Error::NotFuchsian(format!(
                "pole orders {:?}, order {} at infinity",
                singular_set.finite.iter().map(|p| p.order).collect::<Vec<_>>(),
                singular_set.order_infinity
            )));
        }
        let pf = r.partial_fractions();
        let points = pf
            .parts
            .iter()
            .map(|part| SingularPoint { at: part.at, order: part.order, a: part.double(), b: part.residue(), a_exact: None })
            .collect();
        let a_inf = r.laurent_at_infinity(3).coeff(-2);
        let infinity = InfinityPoint { order: singular_set.order_infinity, a: a_inf, a_exact: None };
        Ok(Self { r, singular_set, points, infinity, meta: None })
    }

    /// The reduced normal equation of the satellite family at (C, k, ξ).
    pub fn family(c: f64, k: f64, xi: f64) -> Result<Self> {
        let sol = ParticularSolution::from_c(c, k)?;
        let alg = algebraize(&sol, xi)?;
        let mut fp = reduce(&alg.p, &alg.q)?;
        fp.meta = Some(alg.meta);
        Ok(fp)
    }

    pub fn point_at(&self, c: Complex64) -> Option<&SingularPoint> {
        self.points.iter().min_by(|x, y| (x.at - c).norm().total_cmp(&(y.at - c).norm()))
    }

    pub fn to_json(&self) -> FuchsianJson {
        FuchsianJson { r: self.r.to_json(), meta: self.meta }
    }

    pub fn from_json(j: &FuchsianJson) -> Result<Self> {
        let r = RationalFunction::from_json(&j.r)?;
        let Some(meta) = j.meta else {
            return Self::from_r(r);
        };
        let fp = Self::family(meta.c, meta.k, meta.xi)?;
        let probe = Complex64::new(0.3, 0.2);
        let (lhs, rhs) = (r.eval(probe), fp.r.eval(probe));
        if (lhs - rhs).norm() > 1e-8 * (1.0 + rhs.norm()) {
            return Err(Error::Parse("rational function does not match its metadata".into()));
        }
        Ok(fp)
    }
}

/// Textual form: the rational function plus the optional family parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuchsianJson {
    #[serde(flatten)]
    pub r: RationalJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<FamilyMeta>,
}

/// Converts a dyadic float to the rational it represents, if small enough.
pub fn exact_ratio(x: f64) -> Option<Rational64> {
    let r = Rational64::approximate_float(x)?;
    (*r.numer() as f64 / *r.denom() as f64 == x).then_some(r)
}

/// λ with p = λ·D′/D, D the monic denominator of p, when p has that shape.
fn log_derivative_weight(p: &RationalFunction) -> Option<Rational64> {
    if p.poles().iter().any(|c| c.order != 1) || p.poles().is_empty() {
        return None;
    }
    let n = p.poles().len();
    let lead = p.numerator().coeff(n - 1);
    let lambda = lead / n as f64;
    let diff = p.numerator() - &p.denominator().derivative().scale(lambda);
    if lambda.im != 0.0 || diff.norm() > 1e-12 * p.numerator().norm() {
        return None;
    }
    exact_ratio(lambda.re)
}

fn exact_limit(x: Complex64) -> Option<Rational64> {
    if x.im != 0.0 {
        return None;
    }
    exact_ratio(x.re)
}

/// Removes the first-derivative term: Q = W·exp(−½∫p) turns the equation into W″ = rW,
/// r = −q + ½p′ + ¼p².
pub fn reduce(p: &RationalFunction, q: &RationalFunction) -> Result<FuchsianProblem> {
    let r = q
        .scale((-1.0).into())
        .add(&p.derivative().scale(0.5.into()))
        .add(&p.mul(p).scale(0.25.into()));
    let mut fp = FuchsianProblem::from_r(r)?;

    // When p is a weighted logarithmic derivative and q has simple poles, the exponent
    // data are rational functions of the weight alone and can be carried exactly.
    let Some(lambda) = log_derivative_weight(p) else {
        return Ok(fp);
    };
    if q.poles().iter().any(|c| c.order > 1) {
        return Ok(fp);
    }
    let quarter = Rational64::new(1, 4);
    let half = Rational64::new(1, 2);
    for pt in fp.points.iter_mut() {
        let on_p = p.poles().iter().any(|c| (c.at - pt.at).norm() < 1e-9 * (1.0 + pt.at.norm()));
        pt.a_exact = Some(if on_p { quarter * lambda * lambda - half * lambda } else { Rational64::from_integer(0) });
    }
    let p_inf = lambda * Rational64::from_integer(p.poles().len() as i64);
    let dq = q.denominator().degree().unwrap_or(0);
    let q_inf = match q.numerator().degree() {
        None => Some(Rational64::from_integer(0)),
        Some(d) if d + 2 < dq => Some(Rational64::from_integer(0)),
        Some(d) if d + 2 == dq => exact_limit(q.numerator().leading()),
        Some(_) => None,
    };
    if let Some(q_inf) = q_inf {
        fp.infinity.a_exact = Some(-q_inf - half * p_inf + quarter * p_inf * p_inf);
    }
    Ok(fp)
}

/// exp(4·½∫p) when it is a rational function, i.e. the fourth power of the multiplier
/// relating Q and W. Requires 2·res p ∈ ℤ at every pole, no higher poles, no polynomial part.
pub fn multiplier_fourth_power(p: &RationalFunction) -> Option<RationalFunction> {
    let pf = p.partial_fractions();
    if !pf.polynomial.is_zero() {
        return None;
    }
    let mut num = Polynomial::one();
    let mut poles = Vec::new();
    for part in &pf.parts {
        if part.order != 1 {
            return None;
        }
        let e = 2.0 * part.residue();
        let n = e.re.round();
        if (e - n).norm() > 1e-10 {
            return None;
        }
        let n = n as i64;
        if n > 0 {
            num = &num * &Polynomial::linear(part.at).pow(n as usize);
        } else if n < 0 {
            poles.push(Pole { at: part.at, order: (-n) as usize });
        }
    }
    RationalFunction::from_parts(num, poles).ok()
}

/// Local data of the larger-exponent solution at infinity, ζ = 1/z:
/// W₊ = ζ^ρ₊ (1 + f₁ζ + f₂ζ² + …), and the coefficient g of the logarithm in W₋.
#[derive(Debug, Clone, PartialEq)]
pub struct FrobeniusData {
    /// (ρ₋, ρ₊).
    pub exponents: (f64, f64),
    pub gap: usize,
    pub f1: Complex64,
    pub f2: Complex64,
    pub f3: Complex64,
    /// Coefficient of ζ^gap in 1/f(ζ)²; for gap 3 this is −2(2f₁³ − 3f₁f₂ + f₃).
    pub g: Complex64,
    pub log_present: bool,
    pub near_threshold: bool,
}

pub fn frobenius_infinity(fp: &FuchsianProblem) -> Result<FrobeniusData> {
    let n = FROBENIUS_ORDER;
    let laurent = fp.r.laurent_at_infinity(n + 4);
    if laurent.leading_power > -2 && !fp.r.numerator().is_zero() {
        return Err(Error::NotFuchsian("r does not decay like z⁻² at infinity".into()));
    }
    // R(ζ) = ζ⁻² r(1/ζ) = Σ c_j ζʲ
    let c: Vec<Complex64> = (0..=n).map(|j| laurent.coeff(-2 - j as i64)).collect();
    let c0 = match fp.infinity.a_exact {
        Some(a) => Complex64::new(*a.numer() as f64 / *a.denom() as f64, 0.0),
        None => c[0],
    };
    let disc = (1.0 + 4.0 * c0).sqrt();
    let m = disc.re.round();
    if (disc - m).norm() > 1e-9 || m < 0.0 {
        return Err(Error::NonIntegerExponentGap(disc.re));
    }
    let gap = m as usize;
    let exponents = ((-1.0 - m) / 2.0, (-1.0 + m) / 2.0);

    // ζ²W″ + 2ζW′ − R W = 0; with ρ = ρ₊, fₙ·n(n + gap) = Σ_{j≥1} c_j f_{n−j}.
    let mut f = vec![Complex64::new(1.0, 0.0)];
    for k in 1..=n {
        let s: Complex64 = (1..=k).map(|j| c[j] * f[k - j]).sum();
        f.push(s / (k * (k + gap)) as f64);
    }
    let g = if gap == 0 {
        Complex64::new(1.0, 0.0)
    } else {
        let fsq = crate::ratfun::series_div(&[Complex64::new(1.0, 0.0)], &square(&f), gap + 1);
        fsq[gap]
    };
    let scale = fp.meta.map_or(1.0, |m| m.omega.powi(3));
    let size = g.norm() * scale;
    Ok(FrobeniusData {
        exponents,
        gap,
        f1: f[1],
        f2: f[2],
        f3: f[3],
        g,
        log_present: gap == 0 || size > LOG_THRESHOLD,
        near_threshold: gap > 0 && size > LOG_THRESHOLD * 1e-2 && size <= LOG_WARNING_BAND,
    })
}

fn square(f: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); f.len()];
    for i in 0..f.len() {
        for j in 0..f.len() - i {
            out[i + j] += f[i] * f[j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::{jacobi_real, EllipticModulus};
    use crate::reduction::{ReducedState, ReducedSystem};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn arb_family() -> impl Strategy<Value = (f64, f64, f64)> {
        (prop_oneof![0.05f64..0.95, 1.05f64..3.0], 0.05f64..0.95, -2.0f64..2.0)
    }

    #[test]
    fn coefficient_at_origin() {
        let nve = NveTime::from_params(1.5, 0.5, 0.2).unwrap();
        let w = nve.omega();
        assert!((nve.a(0.0) - ((1.0 + 0.5 * w).powi(2) - 0.2)).abs() < 1e-14);
    }

    #[test]
    fn coefficient_is_the_transverse_hessian() {
        for &(cc, k, xi) in &[(1.5, 0.5, 0.2), (0.5, 0.6, 0.75), (2.3, 0.8, -0.4)] {
            let nve = NveTime::from_params(cc, k, xi).unwrap();
            let sys = ReducedSystem::new(cc, xi);
            let h = 1e-4;
            for i in 0..7 {
                let t = 0.37 * i as f64;
                let x = nve.solution().reduced(t);
                let at = |d: f64| sys.hamiltonian(&ReducedState { q2: x.q2 + d, ..x }).unwrap();
                let hess = (at(h) - 2.0 * at(0.0) + at(-h)) / (h * h);
                assert!((hess - nve.a(t)).abs() < 1e-6 * (1.0 + hess.abs()), "{hess} vs {}", nve.a(t));
                // the flow's Jacobian entry ∂ṗ₂/∂q₂ is −a
                let fp = sys.rhs(&ReducedState { q2: x.q2 + h, ..x }).unwrap();
                let fm = sys.rhs(&ReducedState { q2: x.q2 - h, ..x }).unwrap();
                let jac = (fp[3] - fm[3]) / (2.0 * h);
                assert!((jac + nve.a(t)).abs() < 1e-6 * (1.0 + jac.abs()));
            }
        }
    }

    #[test]
    fn normal_block_is_closed_and_matches_a() {
        let nve = NveTime::from_params(1.5, 0.5, 0.2).unwrap();
        let t = c(0.8, 0.1);
        let only_q2 = nve.variational_rhs(t, &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(only_q2[0], c(0.0, 0.0));
        assert_eq!(only_q2[1], c(0.0, 0.0));
        assert!((only_q2[3] + nve.a_complex(t).unwrap()).norm() < 1e-14);
        let only_q1 = nve.variational_rhs(t, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(only_q1[3], c(0.0, 0.0));
        let pole = nve.solution().poles()[0];
        assert!(matches!(nve.a_complex(pole), Err(Error::PoleProximity { .. })));
    }

    #[test]
    fn p_has_the_four_simple_poles() {
        for &cc in &[0.5, 1.5] {
            let alg = algebraize(&ParticularSolution::from_c(cc, 0.6).unwrap(), 0.2).unwrap();
            let poles = alg.p.poles();
            assert_eq!(poles.len(), 4);
            for (pole, want) in poles.iter().zip(family_poles(0.6, 0.8)) {
                assert_eq!(pole.order, 1);
                assert!((pole.at - want).norm() < 1e-15);
            }
            for part in &alg.p.partial_fractions().parts {
                assert!((part.residue() - 0.5).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn branches_differ_only_in_q() {
        let lo = algebraize(&ParticularSolution::from_c(0.5, 0.6).unwrap(), 0.3).unwrap();
        let hi = algebraize(&ParticularSolution::from_c(1.5, 0.6).unwrap(), 0.3).unwrap();
        assert_eq!(lo.p, hi.p);
        assert_eq!(lo.q.poles(), hi.q.poles());
        // q numerators differ by ω²(z² + k′²) + ω²(k² − z²) = ω² over ω²T, i.e. in the constant term only
        let d = lo.q.numerator() - hi.q.numerator();
        assert_eq!(d.degree(), Some(0));
        assert!((d.coeff(0) + 1.0).norm() < 1e-14);
    }

    fn check_pullback(cc: f64, k: f64, xi: f64, t: f64) -> (f64, f64) {
        let nve = NveTime::from_params(cc, k, xi).unwrap();
        let alg = algebraize(nve.solution(), xi).unwrap();
        let w = nve.omega();
        let (sn, cn, dn) = jacobi_real(w * t, &EllipticModulus::new(k).unwrap());
        let z = c(k * cn, 0.0);
        let zdot = -k * w * sn * dn;
        let zddot = -k * w * w * cn * (dn * dn - k * k * sn * sn);
        // Q(t) = Q(z(t)): Q̈ + aQ = ż²Q″ + z̈Q′ + aQ, so z̈ = ż²p and a = ż²q
        let rp = (zdot * zdot * alg.p.eval(z) - zddot).norm() / (1.0 + zddot.abs());
        let rq = (zdot * zdot * alg.q.eval(z) - nve.a(t)).norm() / (1.0 + nve.a(t).abs());
        (rp, rq)
    }

    #[test]
    fn pullback_on_twenty_samples() {
        for &(cc, k, xi) in &[(1.5, 0.5, 0.2), (0.5, 0.6, 0.75)] {
            let period = NveTime::from_params(cc, k, xi).unwrap().period();
            for i in 0..20 {
                let t = period * (i as f64 + 0.31) / 20.0;
                let (rp, rq) = check_pullback(cc, k, xi, t);
                assert!(rp < 1e-8 && rq < 1e-8, "t = {t}: {rp:e} {rq:e}");
            }
        }
    }

    #[test]
    fn exact_exponent_data() {
        for &cc in &[0.5, 1.5] {
            let fp = FuchsianProblem::family(cc, 0.6, 0.3).unwrap();
            for pt in &fp.points {
                assert_eq!(pt.a_exact, Some(Rational64::new(-3, 16)));
                assert!((pt.a + 3.0 / 16.0).norm() < 1e-12);
                assert_eq!(pt.order, 2);
            }
            assert_eq!(fp.infinity.a_exact, Some(Rational64::from_integer(2)));
            assert!((fp.infinity.a - 2.0).norm() < 1e-12);
            assert_eq!(fp.infinity.order, 2);
        }
    }

    #[test]
    fn fourth_power_of_the_multiplier_is_rational() {
        let alg = algebraize(&ParticularSolution::from_c(1.5, 0.7).unwrap(), 0.2).unwrap();
        let m4 = multiplier_fourth_power(&alg.p).expect("rational");
        assert!(m4.poles().is_empty());
        // (k² − z²)(z² + k′²) up to the sign of its leading coefficient
        let k2 = 0.49;
        let t = Polynomial::from_real(&[k2 * (1.0 - k2), 0.0, 2.0 * k2 - 1.0, 0.0, -1.0]);
        assert!((&m4.numerator().scale((-1.0).into()) - &t).norm() < 1e-14);
        // a weight of 1/3 is not a fourth root of anything rational
        let third = alg.p.scale((2.0 / 3.0).into());
        assert!(multiplier_fourth_power(&third).is_none());
    }

    #[test]
    fn log_coefficient_example() {
        let fp = FuchsianProblem::family(0.5, 0.4, 0.2).unwrap();
        let fr = frobenius_infinity(&fp).unwrap();
        let want = 1.1 / (9.0 * 1.5f64.powf(1.5));
        assert!((fr.g.re - want).abs() < 1e-12 && (want - 0.066529).abs() < 1e-6);
        assert!(fr.log_present);
        assert_eq!(fr.exponents, (-2.0, 1.0));
        assert_eq!(fr.gap, 3);
    }

    #[test]
    fn no_log_on_the_special_level() {
        let fp = FuchsianProblem::family(0.5, 0.6, 0.75).unwrap();
        let fr = frobenius_infinity(&fp).unwrap();
        assert!(fr.g.norm() < 1e-13);
        assert!(!fr.log_present);
    }

    #[test]
    fn foreign_gap_is_rejected() {
        // r = a/z² with 1 + 4a = 2
        let r = RationalFunction::from_parts(Polynomial::constant(c(0.25, 0.0)), vec![Pole { at: c(0.0, 0.0), order: 2 }]).unwrap();
        let fp = FuchsianProblem::from_r(r).unwrap();
        assert!(matches!(frobenius_infinity(&fp), Err(Error::NonIntegerExponentGap(_))));
        let cubic = RationalFunction::from_parts(Polynomial::one(), vec![Pole { at: c(0.0, 0.0), order: 3 }]).unwrap();
        assert!(matches!(FuchsianProblem::from_r(cubic), Err(Error::NotFuchsian(_))));
    }

    #[test]
    fn json_round_trip_keeps_exact_data() {
        let fp = FuchsianProblem::family(1.5, 0.5, 0.2).unwrap();
        let text = serde_json::to_string(&fp.to_json()).unwrap();
        assert!(text.contains("\"branch\":\"C_greater_1\""));
        let back = FuchsianProblem::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.points[0].a_exact, Some(Rational64::new(-3, 16)));
        let mut tampered: FuchsianJson = serde_json::from_str(&text).unwrap();
        tampered.meta.as_mut().unwrap().xi = 0.9;
        assert!(FuchsianProblem::from_json(&tampered).is_err());
    }

    // H = ½(p₁² + p₂²) + ¼(q₁⁴ + q₂⁴) + (e/2)q₁²q₂² along q₁ = p₁ = 0, q₂ = cn(t, 1/√2):
    // the normal block of the Jacobian is [[0, 1], [−e·q₂², 0]].
    #[test]
    fn quartic_hamiltonian_normal_block() {
        let e = 0.7;
        let field = |x: [f64; 4]| {
            let [q1, q2, p1, p2] = x;
            [p1, p2, -q1 * q1 * q1 - e * q1 * q2 * q2, -q2 * q2 * q2 - e * q1 * q1 * q2]
        };
        let m = EllipticModulus::new(std::f64::consts::FRAC_1_SQRT_2).unwrap();
        let h = 1e-6;
        for i in 0..10 {
            let t = 0.53 * i as f64;
            let (sn, cn, dn) = jacobi_real(t, &m);
            let x = [0.0, cn, 0.0, -sn * dn];
            // the curve solves Hamilton's equations: q̈₂ = −q₂³
            let (sn2, cn2, dn2) = jacobi_real(t + h, &m);
            let (sn0, cn0, dn0) = jacobi_real(t - h, &m);
            let q2dd = (cn2 - 2.0 * cn + cn0) / (h * h);
            assert!((q2dd + cn * cn * cn).abs() < 1e-3);
            assert!(((-sn2 * dn2) - (-sn0 * dn0) - 2.0 * h * field(x)[3]).abs() < 1e-9);
            let d = |i: usize, j: usize| {
                let (mut a, mut b) = (x, x);
                a[j] += h;
                b[j] -= h;
                (field(a)[i] - field(b)[i]) / (2.0 * h)
            };
            // rows (q̇₁, ṗ₁) depend on (q₁, p₁) only: ξ̇ = η, η̇ = −e·q₂²·ξ
            assert!((d(0, 2) - 1.0).abs() < 1e-9 && d(0, 0).abs() < 1e-9);
            assert!((d(2, 0) + e * cn * cn).abs() < 1e-8 && d(2, 2).abs() < 1e-9);
            assert!(d(0, 1).abs() < 1e-9 && d(0, 3).abs() < 1e-9 && d(2, 1).abs() < 1e-9 && d(2, 3).abs() < 1e-9);
        }
    }

    fn b_closed_forms(branch: Branch, k: f64, w: f64, xi: f64) -> [Complex64; 4] {
        let kp = (1.0 - k * k).sqrt();
        let w2 = w * w;
        let (b1, b3) = match branch {
            Branch::CLessThanOne => (
                c((3.0 * w2 * (3.0 + 4.0 * k * k) + 8.0 * (1.0 - xi + 2.0 * k * w)) / (16.0 * k * w2), 0.0),
                I * (c(w2 * (12.0 * kp * kp + 1.0) + 8.0 * (xi - 1.0), 16.0 * kp * w)) / (16.0 * kp * w2),
            ),
            Branch::CGreaterThanOne => (
                c((w2 * (12.0 * k * k + 1.0) + 8.0 * (1.0 - xi + 2.0 * k * w)) / (16.0 * k * w2), 0.0),
                I * (c(3.0 * w2 * (3.0 + 4.0 * kp * kp) + 8.0 * (xi - 1.0), 16.0 * kp * w)) / (16.0 * kp * w2),
            ),
        };
        [b1, -b1 + 2.0 / w, b3, b3.conj()]
    }

    fn frobenius_closed_forms(branch: Branch, k: f64, w: f64, xi: f64) -> [f64; 4] {
        let (k2, w2) = (k * k, w * w);
        match branch {
            Branch::CLessThanOne => [
                1.0 / (2.0 * w),
                (w2 * (4.0 * k2 - 1.0) + 2.0 * (2.0 - xi)) / (20.0 * w2),
                (w2 * (108.0 * k2 - 47.0) + 2.0 * (9.0 - 7.0 * xi)) / (360.0 * w2 * w),
                (w2 - 2.0 * xi) / (9.0 * w2 * w),
            ],
            Branch::CGreaterThanOne => [
                1.0 / (2.0 * w),
                (4.0 * k2 * w2 - 3.0 * w2 - 2.0 * xi + 4.0) / (20.0 * w2),
                (108.0 * k2 * w2 - 61.0 * w2 - 14.0 * xi + 18.0) / (360.0 * w2 * w),
                -(w2 + 2.0 * xi) / (9.0 * w2 * w),
            ],
        }
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1.0)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn pullback_residual((cc, k, xi) in arb_family(), t in 0.0f64..20.0) {
            let (rp, rq) = check_pullback(cc, k, xi, t);
            prop_assert!(rp < 1e-8 && rq < 1e-8);
        }

        #[test]
        fn partial_fractions_match_closed_forms((cc, k, xi) in arb_family()) {
            let fp = FuchsianProblem::family(cc, k, xi).unwrap();
            let meta = fp.meta.unwrap();
            let want = b_closed_forms(meta.branch, k, meta.omega, xi);
            for (pole, b) in family_poles(k, meta.kprime()).iter().zip(want) {
                let pt = fp.point_at(*pole).unwrap();
                prop_assert!(rel(pt.b, b) < 1e-12, "{} vs {}", pt.b, b);
                prop_assert_eq!(pt.a_exact, Some(Rational64::new(-3, 16)));
            }
            prop_assert!((fp.r.laurent_at_infinity(3).coeff(-2) - 2.0).norm() < 1e-12);
        }

        #[test]
        fn frobenius_matches_closed_forms((cc, k, xi) in arb_family()) {
            let fp = FuchsianProblem::family(cc, k, xi).unwrap();
            let meta = fp.meta.unwrap();
            let fr = frobenius_infinity(&fp).unwrap();
            let want = frobenius_closed_forms(meta.branch, k, meta.omega, xi);
            prop_assert_eq!(fr.exponents, (-2.0, 1.0));
            for (got, w) in [fr.f1, fr.f2, fr.f3, fr.g].into_iter().zip(want) {
                prop_assert!((got - w).norm() <= 1e-12 * w.abs().max(1.0), "{} vs {}", got, w);
            }
            let g_from_f = -2.0 * (2.0 * fr.f1.powi(3) - 3.0 * fr.f1 * fr.f2 + fr.f3);
            prop_assert!((g_from_f - fr.g).norm() < 1e-12 * fr.g.norm().max(1.0));
        }

        #[test]
        fn conjugate_symmetry((cc, k, xi) in arb_family(), x in -2.0f64..2.0, y in -2.0f64..2.0) {
            let fp = FuchsianProblem::family(cc, k, xi).unwrap();
            let z = c(x, y);
            prop_assume!(fp.points.iter().all(|p| (p.at - z).norm() > 0.05));
            let a = fp.r.eval(z.conj());
            let b = fp.r.eval(z).conj();
            prop_assert!((a - b).norm() < 1e-11 * (1.0 + b.norm()));
        }
    }
}
