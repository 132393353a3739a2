//! Numerical monodromy of linear 2×2 systems Y′ = A(z)Y, in particular the
//! companion system of W″ = rW, by transporting a fundamental matrix along
//! closed polylines in the complex plane.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::nve::FuchsianProblem;
use crate::ode::{Dopri5, Tolerance};

pub type Mat2 = Matrix2<Complex64>;

pub const DEFAULT_TOL: f64 = 1e-12;
/// Loops keep at least this distance (relative to the singularity scale) from every singularity.
pub const CLEARANCE: f64 = 1e-3;
pub const PETAL_SIDES: usize = 32;
const INFINITY_SIDES: usize = 64;
/// |tr M − 2| below this counts as a unipotent spectrum.
pub const TRACE_TOL: f64 = 1e-6;
/// ‖M − I‖ above this makes a unipotent matrix nontrivial.
pub const NONTRIVIAL_TOL: f64 = 1e-3;
/// ‖M − I‖ below this makes it the identity.
pub const IDENTITY_TOL: f64 = 1e-6;
pub const ALIGNMENT_TOL: f64 = 1e-6;
pub const COMMUTATOR_TOL: f64 = 1e-3;

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// No singularity inside: a contractible loop.
    Nothing,
    Finite(usize),
    Infinity,
}

/// Closed polyline starting and ending at `base_point`, positively oriented about its target.
#[derive(Debug, Clone, PartialEq)]
pub struct Loop {
    pub base_point: Complex64,
    pub vertices: Vec<Complex64>,
    pub target: Target,
}

impl Loop {
    pub fn reversed(&self) -> Self {
        let mut v = self.vertices.clone();
        v.reverse();
        Self { base_point: self.base_point, vertices: v, target: self.target }
    }

    /// Winding number of the polyline about `c`.
    pub fn winding(&self, c: Complex64) -> f64 {
        let total: f64 = self.vertices.windows(2).map(|w| ((w[1] - c) / (w[0] - c)).arg()).sum();
        total / (2.0 * PI)
    }

    /// Checks closure, clearance and winding numbers against `singularities`.
    pub fn validate(&self, singularities: &[Complex64], clearance: f64) -> Result<()> {
        let (first, last) = (self.vertices.first(), self.vertices.last());
        if first != Some(&self.base_point) || last != Some(&self.base_point) {
            return Err(Error::BadLoop("polyline is not closed at the base point".into()));
        }
        for &c in singularities {
            for w in self.vertices.windows(2) {
                let d = segment_distance(w[0], w[1], c);
                if d <= clearance {
                    return Err(Error::ClearanceViolation { at: c, distance: d });
                }
            }
        }
        for (i, &c) in singularities.iter().enumerate() {
            let want = match self.target {
                Target::Finite(j) if j == i => 1.0,
                Target::Infinity => -1.0,
                _ => 0.0,
            };
            let got = self.winding(c);
            if (got - want).abs() > 1e-6 {
                return Err(Error::BadLoop(format!("winding {got:.3} about {c}, expected {want}")));
            }
        }
        Ok(())
    }
}

fn segment_distance(a: Complex64, b: Complex64, c: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (c - a).norm();
    }
    let s = (((c - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (a + ab * s - c).norm()
}

/// Counterclockwise regular polygon about `center` through `center + radius·e^{iφ}`.
fn polygon(center: Complex64, radius: f64, phase: f64, sides: usize, clockwise: bool) -> Vec<Complex64> {
    let sign = if clockwise { -1.0 } else { 1.0 };
    let mut v: Vec<Complex64> =
        (0..sides).map(|j| center + Complex64::from_polar(radius, phase + sign * 2.0 * PI * j as f64 / sides as f64)).collect();
    v.push(v[0]);
    v
}

/// Radial approach from the base point, a small polygon about `singularities[target]`, and return.
pub fn petal(base: Complex64, singularities: &[Complex64], target: usize) -> Loop {
    let c = singularities[target];
    let gap = singularities
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != target)
        .map(|(_, s)| (s - c).norm())
        .chain([(base - c).norm()])
        .fold(f64::INFINITY, f64::min);
    let radius = gap / 3.0;
    let phase = (base - c).arg();
    let mut vertices = vec![base];
    vertices.extend(polygon(c, radius, phase, PETAL_SIDES, false));
    vertices.push(base);
    Loop { base_point: base, vertices, target: Target::Finite(target) }
}

/// Direction from the base point bisecting the widest angular gap between singularities.
pub fn exit_angle(base: Complex64, singularities: &[Complex64]) -> f64 {
    let mut args: Vec<f64> = singularities.iter().map(|s| (s - base).arg()).collect();
    if args.is_empty() {
        return 0.0;
    }
    args.sort_by(f64::total_cmp);
    let mut best = (args[0] + 2.0 * PI - args[args.len() - 1], args[args.len() - 1]);
    for w in args.windows(2) {
        if w[1] - w[0] > best.0 {
            best = (w[1] - w[0], w[0]);
        }
    }
    best.1 + 0.5 * best.0
}

/// Large polygon of radius 10·max|c| traversed clockwise, reached along the exit spoke.
pub fn infinity_loop(base: Complex64, singularities: &[Complex64]) -> Loop {
    let scale = singularities.iter().map(|s| (s - base).norm()).fold(0.0, f64::max).max(1e-3);
    let radius = 10.0 * scale;
    let phase = exit_angle(base, singularities);
    let mut vertices = vec![base];
    vertices.extend(polygon(base, radius, phase, INFINITY_SIDES, true));
    vertices.push(base);
    Loop { base_point: base, vertices, target: Target::Infinity }
}

/// Finite singularity indices ordered by ascending argument, measured from the exit angle.
pub fn sphere_order(base: Complex64, singularities: &[Complex64]) -> Vec<usize> {
    let phase = exit_angle(base, singularities);
    let mut idx: Vec<usize> = (0..singularities.len()).collect();
    let rel = |i: usize| ((singularities[i] - base).arg() - phase).rem_euclid(2.0 * PI);
    idx.sort_by(|&a, &b| rel(a).total_cmp(&rel(b)));
    idx
}

/// Transports Y′ = A(z)Y from Y = I at the base point around `lp`.
pub fn transport_system<A>(a: A, singularities: &[Complex64], lp: &Loop, tol: f64) -> Result<Mat2>
where
    A: Fn(Complex64) -> Mat2,
{
    let scale = singularities.iter().map(|s| s.norm()).fold(1.0, f64::max);
    lp.validate(singularities, CLEARANCE * scale)?;
    let solver = Dopri5::new(Tolerance::uniform(tol));
    let y0 = [ONE, ZERO, ZERO, ONE];
    // entries stored row-major: y = [Y00, Y01, Y10, Y11]
    let y = solver.solve_path(
        |z, y: &[Complex64], dy: &mut [Complex64]| {
            let m = a(z);
            dy[0] = m[(0, 0)] * y[0] + m[(0, 1)] * y[2];
            dy[1] = m[(0, 0)] * y[1] + m[(0, 1)] * y[3];
            dy[2] = m[(1, 0)] * y[0] + m[(1, 1)] * y[2];
            dy[3] = m[(1, 0)] * y[1] + m[(1, 1)] * y[3];
        },
        &lp.vertices,
        &y0,
    )?;
    Ok(Mat2::new(y[0], y[1], y[2], y[3]))
}

fn finite_singularities(fp: &FuchsianProblem) -> Vec<Complex64> {
    fp.points.iter().map(|p| p.at).collect()
}

/// Monodromy of the companion system [[0, 1], [r, 0]] of W″ = rW along `lp`.
pub fn transport(fp: &FuchsianProblem, lp: &Loop, tol: f64) -> Result<MonodromyMatrix> {
    let sing = finite_singularities(fp);
    let m = transport_system(|z| Mat2::new(ZERO, ONE, fp.r.eval(z), ZERO), &sing, lp, tol)?;
    Ok(MonodromyMatrix::new(m, lp.target))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum MatrixClass {
    Identity,
    UnipotentNontrivial,
    /// Unipotent spectrum with ‖M − I‖ between the identity and nontriviality thresholds.
    UnipotentAmbiguous,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonodromyMatrix {
    pub m: Mat2,
    pub target: Target,
}

impl MonodromyMatrix {
    pub fn new(m: Mat2, target: Target) -> Self {
        Self { m, target }
    }

    pub fn trace(&self) -> Complex64 {
        self.m.trace()
    }

    pub fn det(&self) -> Complex64 {
        self.m.determinant()
    }

    pub fn eigenvalues(&self) -> [Complex64; 2] {
        eigenvalues(&self.m)
    }

    pub fn distance_to_identity(&self) -> f64 {
        (self.m - Mat2::identity()).norm()
    }

    pub fn classify(&self) -> MatrixClass {
        let dist = self.distance_to_identity();
        if dist < IDENTITY_TOL {
            MatrixClass::Identity
        } else if (self.trace() - 2.0).norm() < TRACE_TOL {
            if dist > NONTRIVIAL_TOL { MatrixClass::UnipotentNontrivial } else { MatrixClass::UnipotentAmbiguous }
        } else {
            MatrixClass::Other
        }
    }
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

impl Serialize for MonodromyMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("MonodromyMatrix", 6)?;
        st.serialize_field("target", &self.target)?;
        let entries = [[pair(self.m[(0, 0)]), pair(self.m[(0, 1)])], [pair(self.m[(1, 0)]), pair(self.m[(1, 1)])]];
        st.serialize_field("entries", &entries)?;
        st.serialize_field("trace", &pair(self.trace()))?;
        st.serialize_field("det", &pair(self.det()))?;
        st.serialize_field("eigenvalues", &self.eigenvalues().map(pair))?;
        st.serialize_field("classification", &self.classify())?;
        st.end()
    }
}

pub fn eigenvalues(m: &Mat2) -> [Complex64; 2] {
    let tr = m.trace();
    let det = m.determinant();
    let disc = (tr * tr - 4.0 * det).sqrt();
    [(tr + disc) / 2.0, (tr - disc) / 2.0]
}

fn eigenvectors(m: &Mat2) -> Vec<[Complex64; 2]> {
    let scale = m.norm().max(1e-300);
    eigenvalues(m)
        .iter()
        .map(|&l| {
            let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
            let v1 = [b, l - a];
            let v2 = [l - d, c];
            let n1 = v1[0].norm() + v1[1].norm();
            let n2 = v2[0].norm() + v2[1].norm();
            if n1.max(n2) < 1e-12 * scale {
                [ONE, ZERO]
            } else if n1 >= n2 {
                v1
            } else {
                v2
            }
        })
        .collect()
}

/// sin of the angle between v and Mv; zero iff v is an eigenvector of M.
fn misalignment(m: &Mat2, v: &[Complex64; 2]) -> f64 {
    let w = [m[(0, 0)] * v[0] + m[(0, 1)] * v[1], m[(1, 0)] * v[0] + m[(1, 1)] * v[1]];
    let cross = (v[0] * w[1] - v[1] * w[0]).norm();
    let nv = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    let nw = (w[0].norm_sqr() + w[1].norm_sqr()).sqrt();
    if nw == 0.0 {
        return 0.0;
    }
    cross / (nv * nw)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalMonodromy {
    pub matrix: MonodromyMatrix,
    pub classification: MatrixClass,
    pub radius: f64,
    pub warning: Option<String>,
}

/// Monodromy around a large circle enclosing every finite singularity.
pub fn local_monodromy_infinity(fp: &FuchsianProblem, tol: f64) -> Result<LocalMonodromy> {
    let sing = finite_singularities(fp);
    let lp = infinity_loop(Complex64::new(0.0, 0.0), &sing);
    let radius = (lp.vertices[1] - lp.base_point).norm();
    let matrix = transport(fp, &lp, tol)?;
    let classification = matrix.classify();
    let warning = (classification == MatrixClass::UnipotentAmbiguous)
        .then(|| format!("‖M − I‖ = {:e} lies between the identity and nontriviality thresholds", matrix.distance_to_identity()));
    Ok(LocalMonodromy { matrix, classification, radius, warning })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Commutator {
    pub i: usize,
    pub j: usize,
    pub distance_to_identity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupRelations {
    pub base_point: [f64; 2],
    pub singularities: Vec<[f64; 2]>,
    /// Finite loop indices in the order used by the product relation.
    pub order: Vec<usize>,
    pub finite: Vec<MonodromyMatrix>,
    pub infinity: MonodromyMatrix,
    /// ‖M_∞·M_n⋯M_1 − I‖ with M_1 first in `order`.
    pub sphere_residual: f64,
    pub max_det_defect: f64,
    pub commutators: Vec<Commutator>,
    pub max_commutator: f64,
    /// Smallest over candidate vectors of the largest misalignment across generators.
    pub eigenvector_alignment: f64,
    pub common_eigenvector: bool,
}

/// Monodromy of every finite singularity and of infinity from a common base point,
/// with the product relation and irreducibility and commutativity probes.
pub fn group_relations(fp: &FuchsianProblem, tol: f64) -> Result<GroupRelations> {
    group_relations_from(fp, Complex64::new(0.0, 0.0), tol)
}

pub fn group_relations_from(fp: &FuchsianProblem, base: Complex64, tol: f64) -> Result<GroupRelations> {
    let sing = finite_singularities(fp);
    let mut loops: Vec<Loop> = (0..sing.len()).map(|i| petal(base, &sing, i)).collect();
    loops.push(infinity_loop(base, &sing));
    let mats: Vec<MonodromyMatrix> = loops.par_iter().map(|lp| transport(fp, lp, tol)).collect::<Result<_>>()?;
    let (infinity, finite) = mats.split_last().expect("infinity loop present");
    let finite = finite.to_vec();
    let order = sphere_order(base, &sing);
    let product = order.iter().fold(Mat2::identity(), |acc, &i| finite[i].m * acc);
    let sphere_residual = (infinity.m * product - Mat2::identity()).norm();
    let max_det_defect = mats.iter().map(|m| (m.det() - 1.0).norm()).fold(0.0, f64::max);

    let mut commutators = Vec::new();
    for i in 0..finite.len() {
        for j in (i + 1)..finite.len() {
            let (a, b) = (finite[i].m, finite[j].m);
            let inv = |m: Mat2| m.try_inverse().unwrap_or_else(Mat2::identity);
            let c = a * b * inv(a) * inv(b);
            commutators.push(Commutator { i, j, distance_to_identity: (c - Mat2::identity()).norm() });
        }
    }
    let max_commutator = commutators.iter().map(|c| c.distance_to_identity).fold(0.0, f64::max);

    let gens: Vec<Mat2> = mats.iter().map(|m| m.m).collect();
    let eigenvector_alignment = gens
        .iter()
        .flat_map(eigenvectors)
        .map(|v| gens.iter().map(|g| misalignment(g, &v)).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min);

    Ok(GroupRelations {
        base_point: pair(base),
        singularities: sing.iter().map(|&c| pair(c)).collect(),
        order,
        finite,
        infinity: *infinity,
        sphere_residual,
        max_det_defect,
        commutators,
        max_commutator,
        eigenvector_alignment,
        common_eigenvector: eigenvector_alignment <= ALIGNMENT_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparatrixRow {
    pub k: f64,
    pub infinity: MonodromyMatrix,
    pub max_entry: f64,
}

/// Monodromy at infinity along a sequence of moduli approaching 1; a diagnostic only.
pub fn approach_separatrix(c: f64, xi: f64, ks: &[f64], tol: f64) -> Result<Vec<SeparatrixRow>> {
    ks.par_iter()
        .map(|&k| {
            let fp = FuchsianProblem::family(c, k, xi)?;
            let inf = local_monodromy_infinity(&fp, tol)?.matrix;
            let max_entry = inf.m.iter().map(|z| z.norm()).fold(0.0, f64::max);
            Ok(SeparatrixRow { k, infinity: inf, max_entry })
        })
        .collect()
}
