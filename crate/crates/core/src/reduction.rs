//! Canonical 3-1-3 Euler-angle coordinates on the physical leaf and the reduced
//! two-degree-of-freedom system at fixed M₃.

use serde::{Deserialize, Serialize};

use crate::dynamics::ExtendedState;
use crate::error::{Error, Result};

/// Smallest |sin q₂| accepted before the chart is considered singular.
pub const CHART_GUARD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalState {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedState {
    pub q1: f64,
    pub q2: f64,
    pub p1: f64,
    pub p2: f64,
}

impl ReducedState {
    pub fn to_array(&self) -> [f64; 4] {
        [self.q1, self.q2, self.p1, self.p2]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self { q1: v[0], q2: v[1], p1: v[2], p2: v[3] }
    }
}

fn guarded_sin(q2: f64) -> Result<f64> {
    let s2 = q2.sin();
    if s2.abs() < CHART_GUARD {
        return Err(Error::CoordinateSingularity(s2.abs()));
    }
    Ok(s2)
}

/// Momenta p = K M, where the first row of K is the orbit normal N.
pub fn momenta(q2: f64, q3: f64, m: &[f64; 3]) -> [f64; 3] {
    let (s2, c2) = q2.sin_cos();
    let (s3, c3) = q3.sin_cos();
    [s3 * s2 * m[0] + c3 * s2 * m[1] + c2 * m[2], c3 * m[0] - s3 * m[1], m[2]]
}

pub fn canonical_to_mns(c: &CanonicalState) -> Result<ExtendedState<f64>> {
    let s2 = guarded_sin(c.q2)?;
    let c2 = c.q2.cos();
    let (s1, c1) = c.q1.sin_cos();
    let (s3, c3) = c.q3.sin_cos();
    let m3 = c.p3;
    let a = (c.p1 - c2 * m3) / s2;
    let m = [s3 * a + c3 * c.p2, c3 * a - s3 * c.p2, m3];
    let n = [s3 * s2, c3 * s2, c2];
    let s = [-s3 * c2 * s1 + c3 * c1, -c3 * c2 * s1 - s3 * c1, s2 * s1];
    Ok(ExtendedState { m, n, s })
}

/// Inverse chart; the input must lie on the physical leaf.
pub fn mns_to_canonical(x: &ExtendedState<f64>) -> Result<CanonicalState> {
    let q2 = x.n[2].clamp(-1.0, 1.0).acos();
    let s2 = guarded_sin(q2)?;
    let q3 = x.n[0].atan2(x.n[1]);
    let (s3, c3) = q3.sin_cos();
    let q1 = (x.s[2] / s2).atan2(c3 * x.s[0] - s3 * x.s[1]);
    let p = momenta(q2, q3, &x.m);
    Ok(CanonicalState { q1, q2, q3, p1: p[0], p2: p[1], p3: p[2] })
}

/// Energy in canonical coordinates for A = B = 1, ω_O = ω_K = 1, L = e₃.
/// Includes the constant 3/2 so that it coincides with the energy in (M, N, S).
pub fn hamiltonian_canonical(c: &CanonicalState, cc: f64, xi: f64) -> Result<f64> {
    let s2 = guarded_sin(c.q2)?;
    let c2 = c.q2.cos();
    let u = (c.p3 * c2 - c.p1) / s2;
    let s1 = c.q1.sin();
    Ok(0.5 * u * u + 0.5 * c.p2 * c.p2 + c.p3 * c.p3 / (2.0 * cc) - c.p1 + 1.5 * (cc - 1.0) * s1 * s1 * s2 * s2
        - 0.5 * xi * c2 * c2
        + 1.5)
}

/// Hamilton's equations of the canonical energy, ordered (q̇₁, q̇₂, q̇₃, ṗ₁, ṗ₂, ṗ₃).
pub fn canonical_rhs(c: &CanonicalState, cc: f64, xi: f64) -> Result<[f64; 6]> {
    let s2 = guarded_sin(c.q2)?;
    let c2 = c.q2.cos();
    let (s1, c1) = c.q1.sin_cos();
    let u = (c.p3 * c2 - c.p1) / s2;
    let dh_dp1 = -u / s2 - 1.0;
    let dh_dp2 = c.p2;
    let dh_dp3 = u * c2 / s2 + c.p3 / cc;
    let dh_dq1 = 3.0 * (cc - 1.0) * s1 * c1 * s2 * s2;
    let dh_dq2 = u * (-c.p3 - u * c2 / s2) + 3.0 * (cc - 1.0) * s1 * s1 * s2 * c2 + xi * s2 * c2;
    Ok([dh_dp1, dh_dp2, dh_dp3, -dh_dq1, -dh_dq2, 0.0])
}

/// Two-degree-of-freedom system obtained by fixing the cyclic momentum p₃.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedSystem {
    pub c: f64,
    pub xi: f64,
    pub p3: f64,
}

impl ReducedSystem {
    pub fn new(c: f64, xi: f64) -> Self {
        Self { c, xi, p3: 0.0 }
    }

    fn lift(&self, x: &ReducedState) -> CanonicalState {
        CanonicalState { q1: x.q1, q2: x.q2, q3: 0.0, p1: x.p1, p2: x.p2, p3: self.p3 }
    }

    /// Reduced Hamiltonian; at p₃ = 0 it is ½p₁²/sin²q₂ + ½p₂² − p₁ + (3/2)(C−1)sin²q₁ sin²q₂ − ½ξcos²q₂.
    pub fn hamiltonian(&self, x: &ReducedState) -> Result<f64> {
        if self.p3 == 0.0 {
            let s2 = guarded_sin(x.q2)?;
            let c2 = x.q2.cos();
            let s1 = x.q1.sin();
            return Ok(0.5 * x.p1 * x.p1 / (s2 * s2) + 0.5 * x.p2 * x.p2 - x.p1
                + 1.5 * (self.c - 1.0) * s1 * s1 * s2 * s2
                - 0.5 * self.xi * c2 * c2);
        }
        Ok(hamiltonian_canonical(&self.lift(x), self.c, self.xi)? - 1.5)
    }

    /// Canonical equations (q̇₁, q̇₂, ṗ₁, ṗ₂).
    pub fn rhs(&self, x: &ReducedState) -> Result<[f64; 4]> {
        let f = canonical_rhs(&self.lift(x), self.c, self.xi)?;
        Ok([f[0], f[1], f[3], f[4]])
    }
}
