//! The one-parameter family of pendulum-like particular solutions living on the
//! invariant plane M₂ = M₃ = N₂ = N₃ = S₁ = 0, N₁ = 1.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::ExtendedState;
use crate::elliptic::{jacobi, jacobi_real, nearest_pole, EllipticModulus};
use crate::error::{Error, Result};
use crate::reduction::ReducedState;

/// Minimum distance in t from a pole accepted by [`ParticularSolution::phi`].
pub const POLE_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    #[serde(rename = "C_less_1")]
    CLessThanOne,
    #[serde(rename = "C_greater_1")]
    CGreaterThanOne,
}

impl Branch {
    pub fn of(c: f64) -> Result<Self> {
        if !c.is_finite() || c <= 0.0 {
            return Err(Error::InvalidParams(format!("C must be positive and finite, got {c}")));
        }
        if c == 1.0 {
            return Err(Error::InvalidParams("C = 1 makes ω = √(3|C−1|) vanish; the family degenerates".into()));
        }
        Ok(if c < 1.0 { Branch::CLessThanOne } else { Branch::CGreaterThanOne })
    }
}

/// ω = √(3|C − 1|).
pub fn omega_of(c: f64) -> f64 {
    (3.0 * (c - 1.0).abs()).sqrt()
}

/// Components (M₁, S₂, S₃) of a point on the family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarPoint<T> {
    pub m1: T,
    pub s2: T,
    pub s3: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticularSolution {
    pub modulus: EllipticModulus,
    pub c: f64,
    pub branch: Branch,
    pub omega: f64,
}

impl ParticularSolution {
    pub fn new(c: f64, k: f64, branch: Branch) -> Result<Self> {
        let actual = Branch::of(c)?;
        if actual != branch {
            return Err(Error::InvalidParams(format!("C = {c} is inconsistent with branch {branch:?}")));
        }
        Ok(Self { modulus: EllipticModulus::new(k)?, c, branch, omega: omega_of(c) })
    }

    /// Branch inferred from the sign of C − 1.
    pub fn from_c(c: f64, k: f64) -> Result<Self> {
        Self::new(c, k, Branch::of(c)?)
    }

    pub fn k(&self) -> f64 {
        self.modulus.k()
    }

    pub fn kprime(&self) -> f64 {
        self.modulus.kprime()
    }

    /// Energy E = ½φ̇² − ω²cos φ of the underlying pendulum, from k² = (ω² + E)/(2ω²).
    pub fn pendulum_energy(&self) -> f64 {
        self.omega * self.omega * (2.0 * self.k() * self.k() - 1.0)
    }

    fn assemble<T>(&self, m1: T, sn: T, dn: T) -> PlanarPoint<T>
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Neg<Output = T>,
    {
        let k = self.k();
        match self.branch {
            Branch::CGreaterThanOne => PlanarPoint { m1, s2: -dn, s3: sn * k },
            Branch::CLessThanOne => PlanarPoint { m1, s2: sn * k, s3: dn },
        }
    }

    /// (M₁, S₂, S₃) at complex time.
    pub fn phi(&self, t: Complex64) -> Result<PlanarPoint<Complex64>> {
        let u = t * self.omega;
        let pole = nearest_pole(u, &self.modulus) / self.omega;
        let d = (t - pole).norm();
        if d < POLE_GUARD {
            return Err(Error::PoleProximity { u: t, distance: d });
        }
        let (sn, cn, dn) = jacobi(u, &self.modulus)?;
        Ok(self.assemble(1.0 + cn * (self.omega * self.k()), sn, dn))
    }

    pub fn phi_real(&self, t: f64) -> PlanarPoint<f64> {
        let (sn, cn, dn) = jacobi_real(self.omega * t, &self.modulus);
        self.assemble(1.0 + self.omega * self.k() * cn, sn, dn)
    }

    pub fn state(&self, t: f64) -> ExtendedState<f64> {
        let p = self.phi_real(t);
        ExtendedState { m: [p.m1, 0.0, 0.0], n: [1.0, 0.0, 0.0], s: [0.0, p.s2, p.s3] }
    }

    pub fn state_complex(&self, t: Complex64) -> Result<ExtendedState<Complex64>> {
        let p = self.phi(t)?;
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        Ok(ExtendedState { m: [p.m1, z, z], n: [one, z, z], s: [z, p.s2, p.s3] })
    }

    /// (sin q₁, cos q₁) with S₂ = −cos q₁, S₃ = sin q₁.
    pub fn angle_sin_cos(&self, t: f64) -> (f64, f64) {
        let p = self.phi_real(t);
        (p.s3, -p.s2)
    }

    /// The same point in reduced canonical coordinates (q₁, π/2, p₁, 0).
    pub fn reduced(&self, t: f64) -> ReducedState {
        let p = self.phi_real(t);
        ReducedState { q1: p.s3.atan2(-p.s2), q2: std::f64::consts::FRAC_PI_2, p1: p.m1, p2: 0.0 }
    }

    /// Real period T = 4K/ω and imaginary period T' = 4iK'/ω.
    pub fn periods(&self) -> (f64, Complex64) {
        let t = 4.0 * self.modulus.quarter_period() / self.omega;
        let tp = Complex64::new(0.0, 4.0 * self.modulus.quarter_period_imag() / self.omega);
        (t, tp)
    }

    /// The four simple poles in the period cell [0, T) × [0, T'/i).
    pub fn poles(&self) -> [Complex64; 4] {
        let (t, tp) = self.periods();
        let reduce = |z: Complex64| {
            let re = z.re - t * (z.re / t).floor();
            let im = z.im - tp.im * (z.im / tp.im).floor();
            Complex64::new(re, im)
        };
        let tau1 = t / 2.0 + tp / 4.0;
        let tau2 = tau1 + tp / 2.0;
        let tau3 = tau2 + t / 2.0;
        let tau4 = tau3 - tp / 2.0;
        [reduce(tau1), reduce(tau2), reduce(tau3), reduce(tau4)]
    }

    /// Energy of the full system along the solution.
    pub fn energy_level(&self) -> f64 {
        let base = 0.5 * self.omega * self.omega * self.k() * self.k();
        match self.branch {
            Branch::CGreaterThanOne => base + 1.0,
            Branch::CLessThanOne => base + 0.5 * (3.0 * self.c - 1.0),
        }
    }

    /// Residuals of the two quadrics cutting out the orbit: energy level and ⟨S,S⟩ = 1.
    pub fn quadric_residuals<T>(&self, p: &PlanarPoint<T>) -> (T, T)
    where
        T: Copy
            + std::ops::Add<Output = T>
            + std::ops::Sub<Output = T>
            + std::ops::Mul<Output = T>
            + std::ops::Mul<f64, Output = T>
            + From<f64>,
    {
        let e = p.m1 * p.m1 * 0.5 - p.m1 + (p.s2 * p.s2 + p.s3 * p.s3 * self.c) * 1.5 - T::from(self.energy_level());
        let s = p.s2 * p.s2 + p.s3 * p.s3 - T::from(1.0);
        (e, s)
    }
}

/// The k = 1 member: a heteroclinic connection of the hyperbolic equilibria.
pub fn separatrix(c: f64, t: f64) -> Result<PlanarPoint<f64>> {
    let branch = Branch::of(c)?;
    let w = omega_of(c);
    let sech = 1.0 / (w * t).cosh();
    let tanh = (w * t).tanh();
    Ok(match branch {
        Branch::CGreaterThanOne => PlanarPoint { m1: 1.0 + w * sech, s2: -sech, s3: tanh },
        Branch::CLessThanOne => PlanarPoint { m1: 1.0 + w * sech, s2: tanh, s3: sech },
    })
}
