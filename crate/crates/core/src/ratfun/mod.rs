//! Rational functions over ℂ with a factored monic denominator.
//!
//! Keeping the denominator as a list of (pole, order) pairs means arithmetic never
//! has to rediscover pole locations: sums, products and derivatives carry them
//! over exactly, and only the numerator is expanded.

mod poly;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use poly::{series_div, Polynomial};

use crate::error::{Error, Result};

/// Distinct denominator roots closer than this are rejected.
pub const MIN_ROOT_SEPARATION: f64 = 1e-6;
/// Relative size of N(c) below which a pole c is cancelled against the numerator.
pub const DEFLATION_TOL: f64 = 1e-10;
/// Relative size of N(c) below which, if not cancellable, the input is ambiguous.
const AMBIGUOUS_TOL: f64 = 1e-6;
/// Poles closer than this (relative) are identified when combining functions.
const POLE_MATCH_TOL: f64 = 1e-9;
/// Leading numerator coefficients this small relative to the largest are treated as zero.
const NEGLIGIBLE: f64 = 1e-14;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    pub at: Complex64,
    pub order: usize,
}

/// Principal part at one pole: `coeffs[j]` multiplies (z − at)^−(j+1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrincipalPart {
    pub at: Complex64,
    pub order: usize,
    pub coeffs: Vec<Complex64>,
}

impl PrincipalPart {
    /// Coefficient of (z − c)⁻².
    pub fn double(&self) -> Complex64 {
        self.coeffs.get(1).copied().unwrap_or(ZERO)
    }

    /// Residue, the coefficient of (z − c)⁻¹.
    pub fn residue(&self) -> Complex64 {
        self.coeffs.first().copied().unwrap_or(ZERO)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialFractions {
    pub polynomial: Polynomial,
    pub parts: Vec<PrincipalPart>,
}

impl PartialFractions {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut s = self.polynomial.eval(z);
        for p in &self.parts {
            let w = 1.0 / (z - p.at);
            let mut wp = w;
            for c in &p.coeffs {
                s += c * wp;
                wp *= w;
            }
        }
        s
    }

    pub fn part_at(&self, c: Complex64) -> Option<&PrincipalPart> {
        self.parts.iter().find(|p| same_point(p.at, c))
    }
}

/// Expansion r(z) = Σⱼ coeffs[j] z^(leading_power − j) near infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentSeries {
    pub leading_power: i64,
    pub coeffs: Vec<Complex64>,
}

impl LaurentSeries {
    pub fn coeff(&self, power: i64) -> Complex64 {
        let j = self.leading_power - power;
        if j < 0 {
            return ZERO;
        }
        self.coeffs.get(j as usize).copied().unwrap_or(ZERO)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().enumerate().map(|(j, c)| c * z.powi((self.leading_power - j as i64) as i32)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularSet {
    pub finite: Vec<Pole>,
    pub order_infinity: usize,
}

impl SingularSet {
    pub fn is_fuchsian(&self) -> bool {
        self.order_infinity <= 2 && self.finite.iter().all(|p| p.order <= 2)
    }
}

fn same_point(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= POLE_MATCH_TOL * (1.0 + a.norm().max(b.norm()))
}

/// r(z) = num(z) / ∏ (z − c)^order with the poles distinct and not shared with the numerator.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalFunction {
    num: Polynomial,
    poles: Vec<Pole>,
    den: Polynomial,
    pf: PartialFractions,
}

impl RationalFunction {
    /// Builds from a numerator and a factored denominator, cancelling common factors.
    pub fn from_parts(num: Polynomial, poles: Vec<Pole>) -> Result<Self> {
        check_separation(&poles)?;
        let (num, poles) = cancel(num, poles, false)?;
        Ok(Self::assemble(num, poles))
    }

    fn from_parts_unchecked(num: Polynomial, poles: Vec<Pole>) -> Self {
        let (num, poles) = cancel(num, poles, false).expect("lenient cancellation cannot fail");
        Self::assemble(num, poles)
    }

    fn assemble(num: Polynomial, mut poles: Vec<Pole>) -> Self {
        poles.retain(|p| p.order > 0);
        let num = trim_leading(num);
        let den = poles.iter().fold(Polynomial::one(), |acc, p| &acc * &Polynomial::linear(p.at).pow(p.order));
        let pf = partial_fractions_of(&num, &poles, &den);
        Self { num, poles, den, pf }
    }

    pub fn polynomial(p: Polynomial) -> Self {
        Self::assemble(p, Vec::new())
    }

    pub fn constant(c: Complex64) -> Self {
        Self::polynomial(Polynomial::constant(c))
    }

    /// Builds from expanded numerator and denominator polynomials, locating the
    /// denominator roots and their multiplicities.
    pub fn from_num_den(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::Parse("zero denominator".into()));
        }
        let lead = den.leading();
        let num = num.scale(1.0 / lead);
        let den = den.monic();
        let poles = factor_roots(&den)?;
        check_separation(&poles)?;
        let (num, poles) = cancel(num, poles, true)?;
        Ok(Self::assemble(num, poles))
    }

    pub fn numerator(&self) -> &Polynomial {
        &self.num
    }

    /// Monic denominator ∏ (z − c)^order, expanded.
    pub fn denominator(&self) -> &Polynomial {
        &self.den
    }

    pub fn poles(&self) -> &[Pole] {
        &self.poles
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut d = Complex64::new(1.0, 0.0);
        for p in &self.poles {
            d *= (z - p.at).powi(p.order as i32);
        }
        self.num.eval(z) / d
    }

    pub fn partial_fractions(&self) -> &PartialFractions {
        &self.pf
    }

    fn squarefree_den(&self) -> Polynomial {
        Polynomial::from_roots(&self.poles.iter().map(|p| p.at).collect::<Vec<_>>())
    }

    pub fn derivative(&self) -> Self {
        if self.poles.is_empty() {
            return Self::polynomial(self.num.derivative());
        }
        let sq = self.squarefree_den();
        // D'/D = Σ m_c ∏_{c'≠c}(z − c') / ∏(z − c)
        let mut log_num = Polynomial::zero();
        for (i, p) in self.poles.iter().enumerate() {
            let others: Vec<_> = self.poles.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, q)| q.at).collect();
            log_num = &log_num + &Polynomial::from_roots(&others).scale((p.order as f64).into());
        }
        let num = &(&self.num.derivative() * &sq) - &(&self.num * &log_num);
        let poles = self.poles.iter().map(|p| Pole { at: p.at, order: p.order + 1 }).collect();
        Self::from_parts_unchecked(num, poles)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::from_parts_unchecked(self.num.scale(s), self.poles.clone())
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut poles = self.poles.clone();
        for q in &o.poles {
            match poles.iter_mut().find(|p| same_point(p.at, q.at)) {
                Some(p) => p.order += q.order,
                None => poles.push(*q),
            }
        }
        Self::from_parts_unchecked(&self.num * &o.num, poles)
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut poles = self.poles.clone();
        for q in &o.poles {
            match poles.iter_mut().find(|p| same_point(p.at, q.at)) {
                Some(p) => p.order = p.order.max(q.order),
                None => poles.push(*q),
            }
        }
        let lift = |f: &Self| -> Polynomial {
            poles.iter().fold(f.num.clone(), |acc, p| {
                let have = f.poles.iter().find(|q| same_point(q.at, p.at)).map_or(0, |q| q.order);
                &acc * &Polynomial::linear(p.at).pow(p.order - have)
            })
        };
        let num = &lift(self) + &lift(o);
        Self::from_parts_unchecked(num, poles)
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale((-1.0).into()))
    }

    pub fn laurent_at_infinity(&self, n_terms: usize) -> LaurentSeries {
        let Some(dn) = self.num.degree() else {
            return LaurentSeries { leading_power: 0, coeffs: vec![ZERO; n_terms] };
        };
        let dd = self.den.degree().unwrap_or(0);
        let coeffs = series_div(self.num.reversed().coeffs(), self.den.reversed().coeffs(), n_terms);
        LaurentSeries { leading_power: dn as i64 - dd as i64, coeffs }
    }

    pub fn singular_set(&self) -> SingularSet {
        let order_infinity = match self.num.degree() {
            None => 0,
            Some(ds) => (4 + ds as i64 - self.den.degree().unwrap_or(0) as i64).max(0) as usize,
        };
        SingularSet { finite: self.poles.clone(), order_infinity }
    }

    pub fn to_json(&self) -> RationalJson {
        RationalJson { num: pairs(&self.num), den: pairs(&self.den) }
    }

    pub fn from_json(j: &RationalJson) -> Result<Self> {
        let unpair = |v: &[[f64; 2]]| Polynomial::new(v.iter().map(|[a, b]| Complex64::new(*a, *b)).collect());
        Self::from_num_den(unpair(&j.num), unpair(&j.den))
    }
}

/// Drops leading coefficients that are rounding residue of a cancellation.
fn trim_leading(p: Polynomial) -> Polynomial {
    let cutoff = NEGLIGIBLE * p.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut c = p.coeffs().to_vec();
    while c.last().is_some_and(|x| x.norm() <= cutoff) {
        c.pop();
    }
    Polynomial::new(c)
}

fn pairs(p: &Polynomial) -> Vec<[f64; 2]> {
    p.coeffs().iter().map(|c| [c.re, c.im]).collect()
}

/// Textual form `{num: [[re, im], ...], den: [...]}` with ascending coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalJson {
    pub num: Vec<[f64; 2]>,
    pub den: Vec<[f64; 2]>,
}

fn check_separation(poles: &[Pole]) -> Result<()> {
    for i in 0..poles.len() {
        for j in (i + 1)..poles.len() {
            if (poles[i].at - poles[j].at).norm() < MIN_ROOT_SEPARATION {
                return Err(Error::ClusteredRoots(poles[i].at, poles[j].at));
            }
        }
    }
    Ok(())
}

/// Removes factors (z − c) shared by numerator and denominator.
fn cancel(mut num: Polynomial, mut poles: Vec<Pole>, strict: bool) -> Result<(Polynomial, Vec<Pole>)> {
    for p in poles.iter_mut() {
        while p.order > 0 && !num.is_zero() {
            let scale = num.eval_scale(p.at);
            let (q, rem) = num.deflate(p.at);
            let rel = rem.norm() / scale.max(f64::MIN_POSITIVE);
            if rel <= DEFLATION_TOL {
                num = q;
                p.order -= 1;
            } else {
                if strict && rel <= AMBIGUOUS_TOL {
                    return Err(Error::NearCommonFactor(p.at));
                }
                break;
            }
        }
    }
    if num.is_zero() {
        poles.clear();
    }
    poles.retain(|p| p.order > 0);
    Ok((num, poles))
}

/// Roots of a monic polynomial grouped into (root, multiplicity).
fn factor_roots(den: &Polynomial) -> Result<Vec<Pole>> {
    let roots = den.roots()?;
    let mut used = vec![false; roots.len()];
    let mut out = Vec::new();
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let radius = 1e-3 * (1.0 + roots[i].norm());
        let mut cluster = vec![roots[i]];
        for j in (i + 1)..roots.len() {
            if !used[j] && (roots[j] - roots[i]).norm() < radius {
                used[j] = true;
                cluster.push(roots[j]);
            }
        }
        if cluster.len() == 1 {
            out.push(Pole { at: roots[i], order: 1 });
            continue;
        }
        let m = cluster.len();
        let center = cluster.iter().sum::<Complex64>() / m as f64;
        let mut deriv = den.clone();
        let mut is_multiple = true;
        for _ in 0..m - 1 {
            if deriv.eval(center).norm() > 1e-8 * deriv.eval_scale(center) {
                is_multiple = false;
                break;
            }
            deriv = deriv.derivative();
        }
        if is_multiple {
            out.push(Pole { at: deriv.polish_root(center), order: m });
        } else {
            out.extend(cluster.into_iter().map(|at| Pole { at, order: 1 }));
        }
    }
    Ok(out)
}

fn partial_fractions_of(num: &Polynomial, poles: &[Pole], den: &Polynomial) -> PartialFractions {
    let polynomial = num.div_rem(den).0;
    let parts = poles
        .iter()
        .enumerate()
        .map(|(i, p)| {
            // G(c + w) = ∏_{c'≠c} (w + c − c')^{m'}
            let g = poles
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .fold(Polynomial::one(), |acc, (_, q)| {
                    &acc * &Polynomial::new(vec![p.at - q.at, Complex64::new(1.0, 0.0)]).pow(q.order)
                });
            let series = series_div(num.taylor_at(p.at).coeffs(), g.coeffs(), p.order);
            // series[j] multiplies w^(j − m); store by increasing negative power.
            let coeffs = (0..p.order).map(|j| series[p.order - 1 - j]).collect();
            PrincipalPart { at: p.at, order: p.order, coeffs }
        })
        .collect();
    PartialFractions { polynomial, parts }
}
