//! Kovacic's algorithm, cases I and II, for Fuchsian equations W″ = rW, and the
//! Galois-group classification of the satellite family built on top of it.
//!
//! Exponents at infinity follow the convention in which the degree bound reads
//! d = 1 − Σe (case I) and d = 2 − ½Σe (case II), the sums running over every
//! singular point including ∞. The exponent sets at ∞ are symmetric under the
//! corresponding relabelling, so they coincide with the classical ones.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_rational::Rational64;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::nve::{frobenius_infinity, FamilyMeta, FrobeniusData, FuchsianProblem};
use crate::ratfun::{Polynomial, RationalFunction};

pub const DEFAULT_TOL: f64 = 1e-9;
/// Exponent differences within this distance of p/q (q ≤ 64) are snapped to the rational.
pub const SNAP_TOL: f64 = 1e-9;
const SNAP_MAX_DENOM: i64 = 64;
const INTEGER_TOL: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A number that may have been recognised as a small rational.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snapped {
    pub value: Complex64,
    pub exact: Option<Rational64>,
}

impl Snapped {
    fn exact(r: Rational64) -> Self {
        Self { value: Complex64::new(*r.numer() as f64 / *r.denom() as f64, 0.0), exact: Some(r) }
    }

    fn float(value: Complex64) -> Self {
        if value.im.abs() > SNAP_TOL {
            return Self { value, exact: None };
        }
        for q in 1..=SNAP_MAX_DENOM {
            let p = (value.re * q as f64).round();
            if (value.re - p / q as f64).abs() < SNAP_TOL {
                return Self::exact(Rational64::new(p as i64, q));
            }
        }
        Self { value, exact: None }
    }

    fn to_json_value(self) -> serde_json::Value {
        match self.exact {
            Some(r) if *r.denom() == 1 => serde_json::json!(r.numer()),
            Some(r) => serde_json::json!(format!("{}/{}", r.numer(), r.denom())),
            None if self.value.im == 0.0 => serde_json::json!(self.value.re),
            None => serde_json::json!([self.value.re, self.value.im]),
        }
    }
}

impl Serialize for Snapped {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json_value().serialize(s)
    }
}

fn exact_sqrt(r: Rational64) -> Option<Rational64> {
    let isqrt = |n: i64| -> Option<i64> {
        if n < 0 {
            return None;
        }
        let s = (n as f64).sqrt().round() as i64;
        (s * s == n).then_some(s)
    };
    Some(Rational64::new(isqrt(*r.numer())?, isqrt(*r.denom())?))
}

/// √(1 + 4a), exact when a is a rational with a rational root.
fn exponent_difference(a: Complex64, a_exact: Option<Rational64>) -> Snapped {
    if let Some(r) = a_exact.and_then(|a| exact_sqrt(Rational64::from_integer(1) + Rational64::from_integer(4) * a)) {
        return Snapped::exact(r);
    }
    Snapped::float((1.0 + 4.0 * a).sqrt())
}

/// Where a singular point sits: a finite location or infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Site {
    Infinity,
    Finite(Complex64),
}

impl Serialize for Site {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Site::Infinity => "infinity".serialize(s),
            Site::Finite(z) => [z.re, z.im].serialize(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiteExponents {
    pub site: Site,
    pub order: usize,
    pub a: Snapped,
    pub delta: Snapped,
    pub case1: Vec<Snapped>,
    pub case2: Vec<Snapped>,
}

/// Exponent sets E_c for both cases; entry 0 is infinity, then the finite points in order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentData {
    pub sites: Vec<SiteExponents>,
}

fn case2_set(delta: Snapped) -> Vec<Snapped> {
    let mut out = vec![Snapped::exact(Rational64::from_integer(2))];
    for s in [1.0, -1.0] {
        let v = 2.0 + 2.0 * s * delta.value;
        let n = v.re.round();
        if (v - n).norm() < INTEGER_TOL {
            let e = Snapped::exact(Rational64::from_integer(n as i64));
            if !out.contains(&e) {
                out.push(e);
            }
        }
    }
    out
}

impl ExponentData {
    pub fn new(fp: &FuchsianProblem) -> Result<Self> {
        let mut sites = Vec::with_capacity(fp.points.len() + 1);
        let inf = &fp.infinity;
        let delta_inf = exponent_difference(inf.a, inf.a_exact);
        sites.push(SiteExponents {
            site: Site::Infinity,
            order: inf.order,
            a: inf.a_exact.map_or(Snapped::float(inf.a), Snapped::exact),
            delta: delta_inf,
            case1: halves(delta_inf),
            case2: case2_set(delta_inf),
        });
        for p in &fp.points {
            let a = p.a_exact.map_or(Snapped::float(p.a), Snapped::exact);
            match p.order {
                1 => sites.push(SiteExponents {
                    site: Site::Finite(p.at),
                    order: 1,
                    a,
                    delta: Snapped::exact(Rational64::from_integer(1)),
                    case1: vec![Snapped::exact(Rational64::from_integer(1))],
                    case2: vec![Snapped::exact(Rational64::from_integer(4))],
                }),
                2 => {
                    let delta = exponent_difference(p.a, p.a_exact);
                    sites.push(SiteExponents {
                        site: Site::Finite(p.at),
                        order: 2,
                        a,
                        delta,
                        case1: halves(delta),
                        case2: case2_set(delta),
                    })
                }
                o => return Err(Error::NotFuchsian(format!("pole of order {o} at {}", p.at))),
            }
        }
        Ok(Self { sites })
    }
}

fn halves(delta: Snapped) -> Vec<Snapped> {
    let one = Rational64::from_integer(1);
    let half = Rational64::new(1, 2);
    match delta.exact {
        Some(d) => {
            let (a, b) = (half * (one + d), half * (one - d));
            if a == b { vec![Snapped::exact(a)] } else { vec![Snapped::exact(a), Snapped::exact(b)] }
        }
        None => vec![Snapped::float(0.5 * (1.0 + delta.value)), Snapped::float(0.5 * (1.0 - delta.value))],
    }
}

/// One element of E = E_∞ × ∏E_c with its polynomial degree bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub e: Vec<Snapped>,
    pub d: usize,
    /// Least-squares residual of the polynomial condition, relative to max(1, ‖r‖).
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseResult {
    pub found: bool,
    pub candidate: Option<Candidate>,
    /// Monic polynomial P of the solution, ascending coefficients.
    #[serde(rename = "P")]
    pub p: Option<Polynomial>,
    pub residual: Option<f64>,
    /// Rational part of the logarithmic derivative: w (case I) or θ (case II).
    #[serde(rename = "omega_kovacic", serialize_with = "ser_rational")]
    pub rational_part: Option<RationalFunction>,
    pub retained: usize,
    pub candidates: Vec<Candidate>,
}

fn ser_rational<S: Serializer>(r: &Option<RationalFunction>, s: S) -> std::result::Result<S::Ok, S::Error> {
    r.as_ref().map(|r| r.to_json()).serialize(s)
}

impl CaseResult {
    fn from_trials(trials: Vec<Trial>, tol: f64) -> Self {
        let retained = trials.len();
        let best = trials.iter().position(|t| t.candidate.residual < tol);
        let candidates = trials.iter().map(|t| t.candidate.clone()).collect();
        match best {
            Some(i) => {
                let t = trials.into_iter().nth(i).unwrap();
                Self {
                    found: true,
                    residual: Some(t.candidate.residual),
                    candidate: Some(t.candidate),
                    p: Some(t.p),
                    rational_part: Some(t.rational_part),
                    retained,
                    candidates,
                }
            }
            None => Self { found: false, candidate: None, p: None, residual: None, rational_part: None, retained, candidates },
        }
    }

    /// ψ = θ + P′/P for a case II solution.
    pub fn psi(&self) -> Option<RationalFunction> {
        let p = self.p.as_ref()?;
        let theta = self.rational_part.as_ref()?;
        let log_p = RationalFunction::from_num_den(p.derivative(), p.clone()).ok()?;
        Some(theta.add(&log_p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    Reducible,
    Case2Solvable,
    SL2,
    Inconclusive,
}

impl Classification {
    pub fn summary(&self) -> &'static str {
        match self {
            Classification::Reducible => "Reducible — exponential solution exists; identity component Abelian",
            Classification::Case2Solvable => "Case2Solvable — identity component Abelian; necessary condition satisfied",
            Classification::SL2 => "SL2 — necessary condition for integrability violated",
            Classification::Inconclusive => "Inconclusive — cases I and II fail and no logarithm detected",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrobeniusSummary {
    pub exponents: (f64, f64),
    pub g3: f64,
    pub log_present: bool,
    pub near_threshold: bool,
}

impl From<&FrobeniusData> for FrobeniusSummary {
    fn from(f: &FrobeniusData) -> Self {
        Self { exponents: f.exponents, g3: f.g.re, log_present: f.log_present, near_threshold: f.near_threshold }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KovacicReport {
    pub params: Option<FamilyMeta>,
    pub exponents: ExponentData,
    pub case1: CaseResult,
    pub case2: Option<CaseResult>,
    pub frobenius: Option<FrobeniusSummary>,
    pub classification: Classification,
    pub diagnostics: Vec<String>,
}

/// A rational function N/Dᵏ over the squarefree denominator D of r.
#[derive(Debug, Clone)]
struct OverD {
    num: Polynomial,
    k: usize,
}

struct Basis {
    d: Polynomial,
    dd: Polynomial,
}

impl Basis {
    fn new(fp: &FuchsianProblem) -> Self {
        let roots: Vec<_> = fp.points.iter().map(|p| p.at).collect();
        let d = Polynomial::from_roots(&roots);
        let dd = d.derivative();
        Self { d, dd }
    }

    fn lift(&self, f: &OverD, k: usize) -> Polynomial {
        (f.k..k).fold(f.num.clone(), |acc, _| &acc * &self.d)
    }

    fn add(&self, a: &OverD, b: &OverD) -> OverD {
        let k = a.k.max(b.k);
        OverD { num: &self.lift(a, k) + &self.lift(b, k), k }
    }

    fn mul(&self, a: &OverD, b: &OverD) -> OverD {
        OverD { num: &a.num * &b.num, k: a.k + b.k }
    }

    fn scale(&self, a: &OverD, s: f64) -> OverD {
        OverD { num: a.num.scale(s.into()), k: a.k }
    }

    fn deriv(&self, a: &OverD) -> OverD {
        let num = &(&a.num.derivative() * &self.d) - &(&a.num * &self.dd).scale((a.k as f64).into());
        OverD { num, k: a.k + 1 }
    }

    /// r as N/D², valid since every pole has order at most two.
    fn r(&self, fp: &FuchsianProblem) -> OverD {
        let num = fp.points.iter().fold(fp.r.numerator().clone(), |acc, p| {
            let have = fp.r.poles().iter().find(|q| (q.at - p.at).norm() < 1e-9 * (1.0 + p.at.norm())).map_or(0, |q| q.order);
            &acc * &Polynomial::linear(p.at).pow(2 - have)
        });
        OverD { num, k: 2 }
    }

    /// Σ weights_c / (z − c) as B/D.
    fn simple_sum(&self, fp: &FuchsianProblem, weights: &[Complex64]) -> OverD {
        let mut num = Polynomial::zero();
        for (i, w) in weights.iter().enumerate() {
            let others: Vec<_> = fp.points.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| p.at).collect();
            num = &num + &Polynomial::from_roots(&others).scale(*w);
        }
        OverD { num, k: 1 }
    }
}

struct Trial {
    candidate: Candidate,
    p: Polynomial,
    rational_part: RationalFunction,
}

/// Coefficient functions (lowest derivative first) of a linear operator on P, all over Dᵏ.
struct Operator {
    coeffs: Vec<Polynomial>,
}

impl Operator {
    fn apply(&self, p: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        let mut dp = p.clone();
        for c in &self.coeffs {
            out = &out + &(c * &dp);
            dp = dp.derivative();
        }
        out
    }

    /// Monic P of degree d minimising ‖L(P)‖ over its lower coefficients.
    fn solve_monic(&self, d: usize) -> (Polynomial, f64) {
        let mono = |i: usize| {
            let mut v = vec![ZERO; i + 1];
            v[i] = Complex64::new(1.0, 0.0);
            Polynomial::new(v)
        };
        let lead = self.apply(&mono(d));
        if d == 0 {
            return (mono(0), lead.norm());
        }
        let cols: Vec<Polynomial> = (0..d).map(|i| self.apply(&mono(i))).collect();
        let rows = cols.iter().chain([&lead]).map(|c| c.coeffs().len()).max().unwrap_or(0).max(1);
        let a = DMatrix::from_fn(rows, d, |i, j| cols[j].coeff(i));
        let b = DVector::from_fn(rows, |i, _| -lead.coeff(i));
        let x = a.clone().svd(true, true).solve(&b, 1e-14).unwrap_or_else(|_| DVector::zeros(d));
        let mut coeffs: Vec<Complex64> = x.iter().copied().collect();
        coeffs.push(Complex64::new(1.0, 0.0));
        let p = Polynomial::new(coeffs);
        let resid = (&a * &x - &b).norm();
        (p, resid)
    }
}

fn r_scale(fp: &FuchsianProblem) -> f64 {
    fp.r.numerator().norm().max(1.0)
}

fn enumerate(sets: &[Vec<Snapped>]) -> Vec<Vec<Snapped>> {
    sets.iter().fold(vec![Vec::new()], |acc, set| {
        acc.into_iter()
            .flat_map(|prefix| {
                set.iter().map(move |e| {
                    let mut v = prefix.clone();
                    v.push(*e);
                    v
                })
            })
            .collect()
    })
}

/// A non-negative integer within tolerance, computed exactly when every entry is exact.
fn degree_bound(base: i64, weight: Rational64, e: &[Snapped]) -> Option<usize> {
    if e.iter().all(|x| x.exact.is_some()) {
        let s: Rational64 = e.iter().map(|x| x.exact.unwrap()).sum();
        let d = Rational64::from_integer(base) - weight * s;
        return (d.is_integer() && *d.numer() >= 0).then(|| *d.numer() as usize);
    }
    let s: Complex64 = e.iter().map(|x| x.value).sum();
    let w = *weight.numer() as f64 / *weight.denom() as f64;
    let d = base as f64 - w * s;
    let n = d.re.round();
    ((d - n).norm() < INTEGER_TOL && n >= 0.0).then_some(n as usize)
}

fn require_fuchsian(fp: &FuchsianProblem) -> Result<()> {
    if !fp.singular_set.is_fuchsian() {
        return Err(Error::NotFuchsian("input has irregular singular points".into()));
    }
    Ok(())
}

/// Case I: solutions W = P·exp∫w with w = Σ e_c/(z − c).
pub fn case1(fp: &FuchsianProblem, tol: f64) -> Result<CaseResult> {
    require_fuchsian(fp)?;
    let ex = ExponentData::new(fp)?;
    let sets: Vec<_> = ex.sites.iter().map(|s| s.case1.clone()).collect();
    let basis = Basis::new(fp);
    let r = basis.r(fp);
    let scale = r_scale(fp);
    let kept: Vec<(Vec<Snapped>, usize)> =
        enumerate(&sets).into_iter().filter_map(|e| degree_bound(1, Rational64::from_integer(1), &e).map(|d| (e, d))).collect();
    let trials: Vec<Trial> = kept
        .into_par_iter()
        .map(|(e, d)| {
            let weights: Vec<_> = e[1..].iter().map(|x| x.value).collect();
            let w = basis.simple_sum(fp, &weights);
            // D²P″ + 2wD²P′ + (w′ + w² − r)D²P
            let c0 = basis.add(&basis.add(&basis.deriv(&w), &basis.mul(&w, &w)), &basis.scale(&r, -1.0));
            let c1 = basis.scale(&w, 2.0);
            let op = Operator {
                coeffs: vec![basis.lift(&c0, 2), basis.lift(&c1, 2), basis.lift(&OverD { num: Polynomial::one(), k: 0 }, 2)],
            };
            let (p, resid) = op.solve_monic(d);
            let rational_part = rational_over_d(fp, &w);
            Trial { candidate: Candidate { e, d, residual: resid / scale }, p, rational_part }
        })
        .collect();
    Ok(CaseResult::from_trials(trials, tol))
}

/// Case II: W = exp∫ω with ω a root of ω² − ψω + ½ψ′ + ½ψ² − r, ψ = θ + P′/P.
pub fn case2(fp: &FuchsianProblem, tol: f64) -> Result<CaseResult> {
    require_fuchsian(fp)?;
    let ex = ExponentData::new(fp)?;
    let sets: Vec<_> = ex.sites.iter().map(|s| s.case2.clone()).collect();
    let basis = Basis::new(fp);
    let r = basis.r(fp);
    let dr = basis.deriv(&r);
    let scale = r_scale(fp);
    let kept: Vec<(Vec<Snapped>, usize)> =
        enumerate(&sets).into_iter().filter_map(|e| degree_bound(2, Rational64::new(1, 2), &e).map(|d| (e, d))).collect();
    let trials: Vec<Trial> = kept
        .into_par_iter()
        .map(|(e, d)| {
            let weights: Vec<_> = e[1..].iter().map(|x| 0.5 * x.value).collect();
            let th = basis.simple_sum(fp, &weights);
            let dth = basis.deriv(&th);
            let ddth = basis.deriv(&dth);
            let th2 = basis.mul(&th, &th);
            // P‴ + 3θP″ + (3θ² + 3θ′ − 4r)P′ + (θ″ + 3θθ′ + θ³ − 4rθ − 2r′)P
            let c2 = basis.scale(&th, 3.0);
            let c1 = basis.add(&basis.add(&basis.scale(&th2, 3.0), &basis.scale(&dth, 3.0)), &basis.scale(&r, -4.0));
            let c0 = [
                ddth.clone(),
                basis.scale(&basis.mul(&th, &dth), 3.0),
                basis.mul(&th2, &th),
                basis.scale(&basis.mul(&r, &th), -4.0),
                basis.scale(&dr, -2.0),
            ]
            .iter()
            .fold(OverD { num: Polynomial::zero(), k: 0 }, |acc, t| basis.add(&acc, t));
            let op = Operator {
                coeffs: vec![
                    basis.lift(&c0, 3),
                    basis.lift(&c1, 3),
                    basis.lift(&c2, 3),
                    basis.lift(&OverD { num: Polynomial::one(), k: 0 }, 3),
                ],
            };
            let (p, resid) = op.solve_monic(d);
            Trial { candidate: Candidate { e, d, residual: resid / scale }, p, rational_part: rational_over_d(fp, &th) }
        })
        .collect();
    Ok(CaseResult::from_trials(trials, tol))
}

fn rational_over_d(fp: &FuchsianProblem, f: &OverD) -> RationalFunction {
    let poles = fp.points.iter().map(|p| crate::ratfun::Pole { at: p.at, order: f.k }).collect();
    RationalFunction::from_parts(f.num.clone(), poles).unwrap_or_else(|_| RationalFunction::polynomial(Polynomial::zero()))
}

/// Reducible if case I succeeds, else Case2Solvable if case II does, else SL2 when the
/// local monodromy at infinity has a logarithm, else Inconclusive.
pub fn classify(fp: &FuchsianProblem, tol: f64) -> Result<KovacicReport> {
    let exponents = ExponentData::new(fp)?;
    let mut diagnostics = Vec::new();
    let frob = match frobenius_infinity(fp) {
        Ok(f) => {
            if f.near_threshold {
                diagnostics.push(format!("log coefficient {:e} is close to the detection threshold", f.g.norm()));
            }
            Some(f)
        }
        Err(e) => {
            diagnostics.push(format!("no Frobenius data at infinity: {e}"));
            None
        }
    };
    let c1 = case1(fp, tol)?;
    let (c2, classification) = if c1.found {
        (None, Classification::Reducible)
    } else {
        let c2 = case2(fp, tol)?;
        let cls = if c2.found {
            Classification::Case2Solvable
        } else if frob.as_ref().is_some_and(|f| f.log_present) {
            Classification::SL2
        } else {
            Classification::Inconclusive
        };
        (Some(c2), cls)
    };
    Ok(KovacicReport {
        params: fp.meta,
        exponents,
        case1: c1,
        case2: c2,
        frobenius: frob.as_ref().map(FrobeniusSummary::from),
        classification,
        diagnostics,
    })
}
