//! Euler-Poisson equations of a rigid satellite on a circular orbit under
//! gravity-gradient and induced-magnetic torques.

use std::io::Write;

use nalgebra::SMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{Dopri5, Scalar, Tolerance, Trajectory};

pub type Vec3<T> = [T; 3];

fn cross<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn add<T: Scalar>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale<T: Scalar>(a: &Vec3<T>, s: f64) -> Vec3<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Angular momentum M, orbit normal N and radial direction S, all in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtendedState<T> {
    pub m: Vec3<T>,
    pub n: Vec3<T>,
    pub s: Vec3<T>,
}

impl<T: Scalar> ExtendedState<T> {
    pub fn to_array(&self) -> [T; 9] {
        [self.m[0], self.m[1], self.m[2], self.n[0], self.n[1], self.n[2], self.s[0], self.s[1], self.s[2]]
    }

    pub fn from_slice(v: &[T]) -> Self {
        Self { m: [v[0], v[1], v[2]], n: [v[3], v[4], v[5]], s: [v[6], v[7], v[8]] }
    }

    /// Values of ⟨S,S⟩, ⟨N,N⟩, ⟨N,S⟩.
    pub fn casimirs(&self) -> (T, T, T) {
        (dot(&self.s, &self.s), dot(&self.n, &self.n), dot(&self.n, &self.s))
    }
}

impl ExtendedState<f64> {
    /// Normalizes `n` and orthonormalizes `s` against it, giving a point on the physical leaf.
    pub fn on_leaf(m: Vec3<f64>, n: Vec3<f64>, s: Vec3<f64>) -> Result<Self> {
        let nn = dot(&n, &n).sqrt();
        if nn == 0.0 {
            return Err(Error::InvalidParams("zero orbit-normal direction".into()));
        }
        let n = scale(&n, 1.0 / nn);
        let proj = dot(&s, &n);
        let s = add(&s, &scale(&n, -proj));
        let ns = dot(&s, &s).sqrt();
        if ns < 1e-12 {
            return Err(Error::InvalidParams("radial direction parallel to orbit normal".into()));
        }
        Ok(Self { m, n, s: scale(&s, 1.0 / ns) })
    }

    pub fn complexify(&self) -> ExtendedState<Complex64> {
        let c = |v: &Vec3<f64>| v.map(|x| Complex64::new(x, 0.0));
        ExtendedState { m: c(&self.m), n: c(&self.n), s: c(&self.s) }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.to_array().iter().zip(other.to_array()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }
}

/// Physical parameters. Defaults follow the normalization A = B = 1, ω_O = ω_K = 1, L = e₃.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatelliteParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub omega_o: f64,
    pub omega_k: f64,
    pub l: Vec3<f64>,
    pub xi: f64,
}

impl SatelliteParams {
    /// Axially symmetric satellite (A = B = 1) with the normalized orbit and L = e₃.
    pub fn symmetric(c: f64, xi: f64) -> Self {
        Self { a: 1.0, b: 1.0, c, omega_o: 1.0, omega_k: 1.0, l: [0.0, 0.0, 1.0], xi }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b, c) = (self.a, self.b, self.c);
        if !(a > 0.0 && b > 0.0 && c > 0.0) {
            return Err(Error::InvalidParams(format!("principal moments must be positive, got ({a}, {b}, {c})")));
        }
        if !(a < b + c && b < c + a && c < a + b) {
            return Err(Error::InvalidParams(format!("principal moments ({a}, {b}, {c}) violate the triangle inequalities")));
        }
        if !(self.omega_o.is_finite() && self.omega_k.is_finite() && self.xi.is_finite()) {
            return Err(Error::InvalidParams("rates and xi must be finite".into()));
        }
        let ll = dot(&self.l, &self.l);
        if (ll - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParams(format!("magnetic axis L must be a unit vector, |L|² = {ll}")));
        }
        Ok(())
    }

    fn is_normalized_symmetric(&self) -> bool {
        self.a == 1.0 && self.b == 1.0 && self.omega_o == 1.0 && self.omega_k == 1.0 && self.l == [0.0, 0.0, 1.0]
    }

    fn inertia(&self) -> Vec3<f64> {
        [self.a, self.b, self.c]
    }
}

fn mul_diag<T: Scalar>(d: &Vec3<f64>, v: &Vec3<T>) -> Vec3<T> {
    [v[0] * d[0], v[1] * d[1], v[2] * d[2]]
}

/// 3ω_K² S × IS.
pub fn torque_gravity<T: Scalar>(s: &Vec3<T>, p: &SatelliteParams) -> Vec3<T> {
    scale(&cross(s, &mul_diag(&p.inertia(), s)), 3.0 * p.omega_k * p.omega_k)
}

/// ξ⟨L,N⟩ L × N.
pub fn torque_magnetic<T: Scalar>(n: &Vec3<T>, p: &SatelliteParams) -> Vec3<T> {
    let l: Vec3<T> = p.l.map(T::from_real);
    let ln = dot(&l, n) * p.xi;
    let lxn = cross(&l, n);
    [lxn[0] * ln, lxn[1] * ln, lxn[2] * ln]
}

pub fn rhs<T: Scalar>(x: &ExtendedState<T>, p: &SatelliteParams) -> ExtendedState<T> {
    let omega = mul_diag(&[1.0 / p.a, 1.0 / p.b, 1.0 / p.c], &x.m);
    let dm = add(&add(&cross(&x.m, &omega), &torque_gravity(&x.s, p)), &torque_magnetic(&x.n, p));
    let dn = cross(&x.n, &omega);
    let rel = add(&omega, &scale(&x.n, -p.omega_o));
    let ds = cross(&x.s, &rel);
    ExtendedState { m: dm, n: dn, s: ds }
}

/// Gradient of the energy with respect to (M, N, S).
pub fn energy_gradient(x: &ExtendedState<f64>, p: &SatelliteParams) -> [f64; 9] {
    let omega = mul_diag(&[1.0 / p.a, 1.0 / p.b, 1.0 / p.c], &x.m);
    let ln = dot(&p.l, &x.n);
    let gm = add(&omega, &scale(&x.n, -p.omega_o));
    let gn = add(&scale(&x.m, -p.omega_o), &scale(&p.l, -p.xi * ln));
    let gs = scale(&mul_diag(&p.inertia(), &x.s), 3.0 * p.omega_k * p.omega_k);
    [gm[0], gm[1], gm[2], gn[0], gn[1], gn[2], gs[0], gs[1], gs[2]]
}

fn hat(a: &Vec3<f64>) -> SMatrix<f64, 3, 3> {
    SMatrix::<f64, 3, 3>::new(0.0, -a[2], a[1], a[2], 0.0, -a[0], -a[1], a[0], 0.0)
}

/// Matrix of the Lie-Poisson bracket: {M_i, M_j} = −ε_ijk M_k, {M_i, N_j} = −ε_ijk N_k,
/// {M_i, S_j} = −ε_ijk S_k, all brackets among N and S vanish.
pub fn structure_matrix(x: &ExtendedState<f64>) -> SMatrix<f64, 9, 9> {
    let mut b = SMatrix::<f64, 9, 9>::zeros();
    let (hm, hn, hs) = (hat(&x.m), hat(&x.n), hat(&x.s));
    b.fixed_view_mut::<3, 3>(0, 0).copy_from(&hm);
    b.fixed_view_mut::<3, 3>(0, 3).copy_from(&hn);
    b.fixed_view_mut::<3, 3>(3, 0).copy_from(&hn);
    b.fixed_view_mut::<3, 3>(0, 6).copy_from(&hs);
    b.fixed_view_mut::<3, 3>(6, 0).copy_from(&hs);
    b
}

/// B(x)·g evaluated blockwise with cross products, so Casimir gradients cancel exactly.
pub fn poisson_apply(x: &ExtendedState<f64>, g: &[f64; 9]) -> [f64; 9] {
    let gm = [g[0], g[1], g[2]];
    let gn = [g[3], g[4], g[5]];
    let gs = [g[6], g[7], g[8]];
    let dm = add(&add(&cross(&x.m, &gm), &cross(&x.n, &gn)), &cross(&x.s, &gs));
    let dn = cross(&x.n, &gm);
    let ds = cross(&x.s, &gm);
    [dm[0], dm[1], dm[2], dn[0], dn[1], dn[2], ds[0], ds[1], ds[2]]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstIntegrals {
    pub h: f64,
    pub h2: f64,
    pub h3: f64,
    pub h4: f64,
    /// M₃, an integral only when A = B.
    pub h5: Option<f64>,
}

pub fn energy<T: Scalar>(x: &ExtendedState<T>, p: &SatelliteParams) -> T {
    let inv = mul_diag(&[1.0 / p.a, 1.0 / p.b, 1.0 / p.c], &x.m);
    let l: Vec3<T> = p.l.map(T::from_real);
    let ln = dot(&l, &x.n);
    dot(&x.m, &inv) * 0.5 - dot(&x.m, &x.n) * p.omega_o
        + dot(&x.s, &mul_diag(&p.inertia(), &x.s)) * (1.5 * p.omega_k * p.omega_k)
        - ln * ln * (0.5 * p.xi)
}

pub fn first_integrals(x: &ExtendedState<f64>, p: &SatelliteParams) -> FirstIntegrals {
    let (h2, h3, h4) = x.casimirs();
    FirstIntegrals { h: energy(x, p), h2, h3, h4, h5: (p.a == p.b).then_some(x.m[2]) }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(1e-14..=1e-4).contains(&tol) {
        return Err(Error::InvalidParams(format!("tolerance {tol:e} outside [1e-14, 1e-4]")));
    }
    Ok(())
}

/// Dense trajectory of the full system over real time.
pub fn integrate(x0: &ExtendedState<f64>, p: &SatelliteParams, t0: f64, t1: f64, tol: f64) -> Result<Trajectory<f64>> {
    check_tol(tol)?;
    Dopri5::new(Tolerance::uniform(tol)).solve(
        |_, y: &[f64], dy: &mut [f64]| dy.copy_from_slice(&rhs(&ExtendedState::from_slice(y), p).to_array()),
        t0,
        &x0.to_array(),
        t1,
    )
}

/// Complex-time integration along a polyline; returns the state at every vertex.
pub fn integrate_path(
    x0: &ExtendedState<Complex64>,
    p: &SatelliteParams,
    path: &[Complex64],
    tol: f64,
) -> Result<Vec<(Complex64, ExtendedState<Complex64>)>> {
    check_tol(tol)?;
    let solver = Dopri5::new(Tolerance::uniform(tol));
    let mut f = |_: Complex64, y: &[Complex64], dy: &mut [Complex64]| {
        dy.copy_from_slice(&rhs(&ExtendedState::from_slice(y), p).to_array())
    };
    let mut y = x0.to_array().to_vec();
    let mut out = Vec::with_capacity(path.len());
    if let Some(first) = path.first() {
        out.push((*first, *x0));
    }
    for seg in path.windows(2) {
        y = solver.solve_segment(&mut f, seg[0], seg[1], &y)?.y_end().to_vec();
        out.push((seg[1], ExtendedState::from_slice(&y)));
    }
    Ok(out)
}

pub fn write_csv<W: Write>(traj: &Trajectory<f64>, mut w: W) -> std::io::Result<()> {
    writeln!(w, "t,M1,M2,M3,N1,N2,N3,S1,S2,S3")?;
    for (t, y) in traj.nodes() {
        write!(w, "{t:.16e}")?;
        for v in y {
            write!(w, ",{v:.16e}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_csv_complex<W: Write>(samples: &[(Complex64, ExtendedState<Complex64>)], mut w: W) -> std::io::Result<()> {
    writeln!(w, "t_re,t_im,M1,M2,M3,N1,N2,N3,S1,S2,S3")?;
    for (t, x) in samples {
        write!(w, "{:.16e},{:.16e}", t.re, t.im)?;
        for v in x.to_array() {
            write!(w, ",{:.16e}{:+.16e}i", v.re, v.im)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquilibriumLabel {
    SPlus,
    SMinus,
    UPlus,
    UMinus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Equilibrium {
    pub label: EquilibriumLabel,
    pub state: ExtendedState<f64>,
    /// Angle φ on the invariant plane (S₂ = −cos φ, S₃ = sin φ).
    pub phi: f64,
    /// Eigenvalues ±λ of the restricted planar linearization, as (re, im) of λ.
    pub lambda: (f64, f64),
    pub hyperbolic: bool,
}

/// The four relative equilibria lying on the invariant plane.
pub fn equilibria(p: &SatelliteParams) -> Result<Vec<Equilibrium>> {
    p.validate()?;
    if !p.is_normalized_symmetric() {
        return Err(Error::UnsupportedParams("equilibria are tabulated for A = B = 1, ω_O = ω_K = 1, L = e₃".into()));
    }
    let half_pi = std::f64::consts::FRAC_PI_2;
    let table = [
        (EquilibriumLabel::SPlus, [0.0, -1.0, 0.0], 0.0),
        (EquilibriumLabel::SMinus, [0.0, 1.0, 0.0], std::f64::consts::PI),
        (EquilibriumLabel::UPlus, [0.0, 0.0, 1.0], half_pi),
        (EquilibriumLabel::UMinus, [0.0, 0.0, -1.0], -half_pi),
    ];
    Ok(table
        .into_iter()
        .map(|(label, s, phi)| {
            let state = ExtendedState { m: [1.0, 0.0, 0.0], n: [1.0, 0.0, 0.0], s };
            let (cos2, _) = if matches!(label, EquilibriumLabel::SPlus | EquilibriumLabel::SMinus) { (1.0, 0) } else { (-1.0, 0) };
            let lam2 = -3.0 * (p.c - p.b) * cos2;
            let lambda = Complex64::new(lam2, 0.0).sqrt();
            Equilibrium { label, state, phi, lambda: (lambda.re, lambda.im), hyperbolic: lambda.re.abs() > 1e-8 }
        })
        .collect())
}

/// Planar system on the invariant manifold: returns (φ̇, Ṁ₁).
pub fn restricted_rhs(phi: f64, m1: f64, p: &SatelliteParams) -> (f64, f64) {
    (m1 - 1.0, -3.0 * (p.c - p.b) * phi.sin() * phi.cos())
}

/// Energy restricted to the invariant manifold.
pub fn restricted_energy(phi: f64, m1: f64, p: &SatelliteParams) -> f64 {
    let (s2, s3) = (-phi.cos(), phi.sin());
    0.5 * m1 * m1 - m1 + 1.5 * (p.b * s2 * s2 + p.c * s3 * s3)
}

/// Lift of a planar point (φ, M₁) to the full phase space.
pub fn lift_restricted(phi: f64, m1: f64) -> ExtendedState<f64> {
    ExtendedState { m: [m1, 0.0, 0.0], n: [1.0, 0.0, 0.0], s: [0.0, -phi.cos(), phi.sin()] }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> SatelliteParams {
        SatelliteParams::symmetric(1.7, 0.3)
    }

    fn general_params() -> SatelliteParams {
        let l = [0.3, -0.4, (1.0f64 - 0.25).sqrt()];
        SatelliteParams { a: 0.8, b: 1.1, c: 1.5, omega_o: 1.0, omega_k: 1.2, l, xi: 0.7 }
    }

    #[test]
    fn torque_examples() {
        let p = params();
        assert_eq!(torque_gravity(&[1.0, 0.0, 0.0], &p), [0.0, 0.0, 0.0]);
        assert_eq!(torque_gravity(&[0.0, -1.0, 0.0], &p), [0.0, 0.0, 0.0]);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let t = torque_gravity(&[0.0, r, r], &p);
        // direct oracle: 3 (S2·C·S3 − S3·B·S2) = 3·0.5·0.7
        assert!((t[0] - 1.05).abs() < 1e-14 && t[1].abs() < 1e-15 && t[2].abs() < 1e-15);

        let mut p = params();
        p.xi = 2.0;
        assert_eq!(torque_magnetic(&[0.0, 0.0, 1.0], &p), [0.0, 0.0, 0.0]);
        assert_eq!(torque_magnetic(&[1.0, 0.0, 0.0], &p), [0.0, 0.0, 0.0]);
        let th = std::f64::consts::FRAC_PI_4;
        let n = [th.sin(), 0.0, th.cos()];
        let t = torque_magnetic(&n, &p);
        // direct oracle: L × N = (L₂N₃ − L₃N₂, L₃N₁ − L₁N₃, L₁N₂ − L₂N₁) = (0, sin θ, 0)
        let expect = [0.0, 2.0 * th.cos() * th.sin(), 0.0];
        for i in 0..3 {
            assert!((t[i] - expect[i]).abs() < 1e-14, "{t:?}");
        }
    }

    #[test]
    fn u_plus_is_fixed_and_invariant_plane_is_preserved() {
        let p = params();
        let u = ExtendedState { m: [1.0, 0.0, 0.0], n: [1.0, 0.0, 0.0], s: [0.0, 0.0, 1.0] };
        assert_eq!(rhs(&u, &p).to_array(), [0.0; 9]);
        let x = lift_restricted(0.4, 1.3);
        let d = rhs(&x, &p);
        assert_eq!([d.m[1], d.m[2], d.n[1], d.n[2], d.s[0]], [0.0; 5]);
    }

    #[test]
    fn structure_matrix_reproduces_rhs() {
        let p = general_params();
        let x = ExtendedState::on_leaf([0.3, -1.2, 0.8], [0.2, 0.5, -0.9], [1.0, 0.1, 0.4]).unwrap();
        let b = structure_matrix(&x);
        assert_eq!(b + b.transpose(), SMatrix::<f64, 9, 9>::zeros());
        // {M1, M2} = −M3
        assert_eq!(b[(0, 1)], -x.m[2]);
        // finite-difference gradient oracle
        let h = 1e-6;
        let y = x.to_array();
        let mut g = [0.0; 9];
        for i in 0..9 {
            let (mut yp, mut ym) = (y, y);
            yp[i] += h;
            ym[i] -= h;
            g[i] = (energy(&ExtendedState::from_slice(&yp), &p) - energy(&ExtendedState::from_slice(&ym), &p)) / (2.0 * h);
        }
        let bg = b * nalgebra::SVector::<f64, 9>::from_row_slice(&g);
        let f = rhs(&x, &p).to_array();
        for i in 0..9 {
            assert!((bg[i] - f[i]).abs() < 1e-8, "component {i}: {} vs {}", bg[i], f[i]);
        }
        let ga = energy_gradient(&x, &p);
        for i in 0..9 {
            assert!((ga[i] - g[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn equilibria_and_stability() {
        let eq = equilibria(&SatelliteParams::symmetric(1.7, 0.3)).unwrap();
        for e in &eq {
            let r = rhs(&e.state, &SatelliteParams::symmetric(1.7, 0.3)).to_array();
            assert!(r.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-12);
            let expect = matches!(e.label, EquilibriumLabel::UPlus | EquilibriumLabel::UMinus);
            assert_eq!(e.hyperbolic, expect, "{:?}", e.label);
        }
        let eq = equilibria(&SatelliteParams::symmetric(0.5, 0.3)).unwrap();
        for e in &eq {
            let expect = matches!(e.label, EquilibriumLabel::SPlus | EquilibriumLabel::SMinus);
            assert_eq!(e.hyperbolic, expect, "{:?}", e.label);
        }
        assert!(matches!(equilibria(&general_params()), Err(Error::UnsupportedParams(_))));
    }

    #[test]
    fn restricted_system() {
        let p = params();
        assert_eq!(restricted_rhs(0.0, 1.4, &p).1, 0.0);
        // ϕ = 2φ obeys the pendulum equation ϕ̈ = −3(C − B) sin ϕ
        let (phi, m1) = (0.37, 1.2);
        let (dphi, dm1) = restricted_rhs(phi, m1, &p);
        assert!((dphi - (m1 - 1.0)).abs() < 1e-15);
        let ddvarphi = 2.0 * dm1;
        assert!((ddvarphi + 3.0 * (p.c - p.b) * (2.0 * phi).sin()).abs() < 1e-14);

        let solver = Dopri5::new(Tolerance::uniform(1e-12));
        let traj = solver
            .solve(|_, y: &[f64], dy: &mut [f64]| {
                let (a, b) = restricted_rhs(y[0], y[1], &p);
                dy[0] = a;
                dy[1] = b;
            }, 0.0, &[0.3, 1.9], 30.0)
            .unwrap();
        let e0 = restricted_energy(0.3, 1.9, &p);
        for (_, y) in traj.nodes() {
            assert!((restricted_energy(y[0], y[1], &p) - e0).abs() < 1e-10);
        }
        // lift is consistent with the full energy
        let x = lift_restricted(0.3, 1.9);
        assert!((energy(&x, &p) - e0).abs() < 1e-14);
    }

    #[test]
    fn invariant_manifold_is_invariant() {
        let p = params();
        let x0 = lift_restricted(0.8, 1.1);
        let traj = integrate(&x0, &p, 0.0, 30.0, 1e-12).unwrap();
        for (_, y) in traj.nodes() {
            for i in [1, 2, 4, 5, 6] {
                assert!(y[i].abs() < 1e-8);
            }
            assert!((y[3] - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_length_span() {
        let x0 = lift_restricted(0.8, 1.1);
        let traj = integrate(&x0, &params(), 3.0, 3.0, 1e-10).unwrap();
        assert_eq!(traj.y_end(), &x0.to_array());
        assert!(integrate(&x0, &params(), 0.0, 1.0, 1e-3).is_err());
    }

    #[test]
    fn complex_path_returns_to_real_axis_consistently() {
        let p = params();
        let x0 = lift_restricted(0.5, 1.2);
        let path = [Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.3), Complex64::new(1.0, 0.0)];
        let out = integrate_path(&x0.complexify(), &p, &path, 1e-12).unwrap();
        let real = integrate(&x0, &p, 0.0, 1.0, 1e-12).unwrap();
        let end = out.last().unwrap().1.to_array();
        for (a, b) in end.iter().zip(real.y_end()) {
            assert!((a - b).norm() < 1e-9);
        }
        let mut buf = Vec::new();
        write_csv_complex(&out, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("t_re,t_im,M1"));
    }

    proptest! {
        #[test]
        fn casimirs_are_annihilated_exactly(v in proptest::array::uniform9(-2.0f64..2.0)) {
            let x = ExtendedState::from_slice(&v);
            let grads = [
                [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0 * v[6], 2.0 * v[7], 2.0 * v[8]],
                [0.0, 0.0, 0.0, 2.0 * v[3], 2.0 * v[4], 2.0 * v[5], 0.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, v[6], v[7], v[8], v[3], v[4], v[5]],
            ];
            for g in &grads {
                prop_assert_eq!(poisson_apply(&x, g), [0.0; 9]);
            }
            let b = structure_matrix(&x);
            for g in &grads[..2] {
                let bg = b * nalgebra::SVector::<f64, 9>::from_row_slice(g);
                prop_assert!(bg.iter().all(|c| *c == 0.0));
            }
        }

        #[test]
        fn blockwise_and_matrix_forms_agree(v in proptest::array::uniform9(-2.0f64..2.0)) {
            let x = ExtendedState::from_slice(&v);
            let p = general_params();
            let g = energy_gradient(&x, &p);
            let a = poisson_apply(&x, &g);
            let f = rhs(&x, &p).to_array();
            for i in 0..9 {
                prop_assert!((a[i] - f[i]).abs() < 1e-12);
            }
        }
    }
}
