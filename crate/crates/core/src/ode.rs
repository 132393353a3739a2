//! Dormand-Prince 5(4) with Hairer's quintic dense output.
//!
//! The state type is generic so one integrator serves both real trajectories and
//! complex transport. The independent variable is always real; complex paths are
//! handled by [`Dopri5::solve_path`], which parametrizes each segment of a
//! polyline by arclength.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
    + Mul<Output = Self>
    + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn from_real(x: f64) -> Self;
    fn modulus(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Tolerance {
    pub fn uniform(tol: f64) -> Self {
        Self { rtol: tol, atol: tol }
    }
}

/// One accepted step with its continuous extension.
#[derive(Debug, Clone)]
pub struct DenseStep<T> {
    pub t0: f64,
    pub h: f64,
    cont: [Vec<T>; 5],
    y1: Vec<T>,
}

impl<T: Scalar> DenseStep<T> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn y0(&self) -> &[T] {
        &self.cont[0]
    }

    pub fn y1(&self) -> &[T] {
        &self.y1
    }

    /// Interpolated state at `t`, which should lie inside the step.
    pub fn eval(&self, t: f64) -> Vec<T> {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.cont;
        (0..r1.len())
            .map(|i| r1[i] + (r2[i] + (r3[i] + (r4[i] + r5[i] * theta1) * theta) * theta1) * theta)
            .collect()
    }
}

pub enum Control {
    Continue,
    Stop,
}

/// Sequence of dense steps covering `[t0, t_end]` (or the reverse when integrating backwards).
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub t0: f64,
    pub y0: Vec<T>,
    pub steps: Vec<DenseStep<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn t_end(&self) -> f64 {
        self.steps.last().map_or(self.t0, |s| s.t1())
    }

    pub fn y_end(&self) -> &[T] {
        self.steps.last().map_or(&self.y0, |s| s.y1())
    }

    /// Step endpoints, starting with the initial point.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, &[T])> {
        std::iter::once((self.t0, self.y0.as_slice()))
            .chain(self.steps.iter().map(|s| (s.t1(), s.y1())))
    }

    /// Dense-output evaluation anywhere on the covered interval.
    pub fn sample(&self, t: f64) -> Vec<T> {
        if self.steps.is_empty() {
            return self.y0.clone();
        }
        let forward = self.steps[0].h > 0.0;
        let idx = self.steps.partition_point(|s| {
            if forward {
                s.t1() < t
            } else {
                s.t1() > t
            }
        });
        let idx = idx.min(self.steps.len() - 1);
        self.steps[idx].eval(t)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub tol: Tolerance,
    pub max_steps: usize,
    pub h_max: f64,
}

impl Dopri5 {
    pub fn new(tol: Tolerance) -> Self {
        Self { tol, max_steps: 5_000_000, h_max: f64::INFINITY }
    }

    pub fn with_max_step(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }

    fn err_norm<T: Scalar>(&self, y0: &[T], y1: &[T], err: &[T]) -> f64 {
        let n = y0.len().max(1) as f64;
        let sum: f64 = y0
            .iter()
            .zip(y1)
            .zip(err)
            .map(|((a, b), e)| {
                let sk = self.tol.atol + self.tol.rtol * a.modulus().max(b.modulus());
                (e.modulus() / sk).powi(2)
            })
            .sum();
        (sum / n).sqrt()
    }

    fn initial_step<T: Scalar, F>(&self, f: &mut F, t0: f64, y0: &[T], f0: &[T], dir: f64) -> f64
    where
        F: FnMut(f64, &[T], &mut [T]),
    {
        let n = y0.len().max(1) as f64;
        let scaled = |v: &[T]| -> f64 {
            let s: f64 = v
                .iter()
                .zip(y0)
                .map(|(x, y)| (x.modulus() / (self.tol.atol + self.tol.rtol * y.modulus())).powi(2))
                .sum();
            (s / n).sqrt()
        };
        let d0 = scaled(y0);
        let d1 = scaled(f0);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(self.h_max);
        let y1: Vec<T> = y0.iter().zip(f0).map(|(y, k)| *y + *k * (dir * h0)).collect();
        let mut f1 = vec![T::zero(); y0.len()];
        f(t0 + dir * h0, &y1, &mut f1);
        let diff: Vec<T> = f1.iter().zip(f0).map(|(a, b)| *a - *b).collect();
        let d2 = scaled(&diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.h_max)
    }

    /// Integrates from `t0` to `t1`, handing each accepted step to `observer`.
    /// Returns the final time and state; the final time is earlier than `t1`
    /// only when the observer stops the run.
    pub fn solve_with<T, F, O>(&self, mut f: F, t0: f64, y0: &[T], t1: f64, mut observer: O) -> Result<(f64, Vec<T>)>
    where
        T: Scalar,
        F: FnMut(f64, &[T], &mut [T]),
        O: FnMut(&DenseStep<T>) -> Result<Control>,
    {
        let n = y0.len();
        let span = t1 - t0;
        if span == 0.0 {
            return Ok((t0, y0.to_vec()));
        }
        let dir = span.signum();
        let mut t = t0;
        let mut y = y0.to_vec();
        let mut k1 = vec![T::zero(); n];
        f(t, &y, &mut k1);
        let mut h = self.initial_step(&mut f, t, &y, &k1, dir).min(span.abs());
        let mut k2 = vec![T::zero(); n];
        let mut k3 = vec![T::zero(); n];
        let mut k4 = vec![T::zero(); n];
        let mut k5 = vec![T::zero(); n];
        let mut k6 = vec![T::zero(); n];
        let mut k7 = vec![T::zero(); n];
        let mut ys = vec![T::zero(); n];
        let mut y1 = vec![T::zero(); n];
        let mut last_rejected = false;
        let mut steps = 0usize;

        loop {
            let remaining = (t1 - t) * dir;
            if remaining <= 0.0 {
                return Ok((t, y));
            }
            let mut last = false;
            if h >= remaining || (remaining - h) < 1e-12 * remaining.max(h) {
                h = remaining;
                last = true;
            }
            if h < 1e-14 * t.abs().max(1.0) || !h.is_finite() {
                return Err(Error::StepFailure { t });
            }
            steps += 1;
            if steps > self.max_steps {
                return Err(Error::StepFailure { t });
            }
            let hs = dir * h;

            for i in 0..n {
                ys[i] = y[i] + k1[i] * (hs * A21);
            }
            f(t + C2 * hs, &ys, &mut k2);
            for i in 0..n {
                ys[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * hs;
            }
            f(t + C3 * hs, &ys, &mut k3);
            for i in 0..n {
                ys[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * hs;
            }
            f(t + C4 * hs, &ys, &mut k4);
            for i in 0..n {
                ys[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * hs;
            }
            f(t + C5 * hs, &ys, &mut k5);
            for i in 0..n {
                ys[i] = y[i] + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * hs;
            }
            let t_new = if last { t1 } else { t + hs };
            f(t + hs, &ys, &mut k6);
            for i in 0..n {
                y1[i] = y[i] + (k1[i] * A71 + k3[i] * A73 + k4[i] * A74 + k5[i] * A75 + k6[i] * A76) * hs;
            }
            f(t_new, &y1, &mut k7);

            let err: Vec<T> = (0..n)
                .map(|i| (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * hs)
                .collect();
            let en = self.err_norm(&y, &y1, &err);
            if !en.is_finite() {
                h *= 0.2;
                last_rejected = true;
                continue;
            }

            if en <= 1.0 {
                let mut r2 = vec![T::zero(); n];
                let mut r3 = vec![T::zero(); n];
                let mut r4 = vec![T::zero(); n];
                let mut r5 = vec![T::zero(); n];
                for i in 0..n {
                    let dy = y1[i] - y[i];
                    let bspl = k1[i] * hs - dy;
                    r2[i] = dy;
                    r3[i] = bspl;
                    r4[i] = dy - k7[i] * hs - bspl;
                    r5[i] = (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7) * hs;
                }
                let step = DenseStep { t0: t, h: hs, cont: [y.clone(), r2, r3, r4, r5], y1: y1.clone() };
                t = t_new;
                std::mem::swap(&mut y, &mut y1);
                std::mem::swap(&mut k1, &mut k7);
                if let Control::Stop = observer(&step)? {
                    return Ok((t, y));
                }
                if last {
                    return Ok((t, y));
                }
                let mut fac = 0.9 * en.max(1e-10).powf(-0.2);
                fac = fac.clamp(0.2, 10.0);
                if last_rejected {
                    fac = fac.min(1.0);
                }
                h = (h * fac).min(self.h_max);
                last_rejected = false;
            } else {
                let fac = (0.9 * en.powf(-0.2)).max(0.2);
                h *= fac;
                last_rejected = true;
            }
        }
    }

    /// Integrates from `t0` to `t1` and keeps every dense step.
    pub fn solve<T, F>(&self, f: F, t0: f64, y0: &[T], t1: f64) -> Result<Trajectory<T>>
    where
        T: Scalar,
        F: FnMut(f64, &[T], &mut [T]),
    {
        let mut steps = Vec::new();
        self.solve_with(f, t0, y0, t1, |s| {
            steps.push(s.clone());
            Ok(Control::Continue)
        })?;
        Ok(Trajectory { t0, y0: y0.to_vec(), steps })
    }

    /// Integrates `dy/dz = f(z, y)` along the polyline `path`, one straight segment at a time.
    pub fn solve_path<F>(&self, mut f: F, path: &[Complex64], y0: &[Complex64]) -> Result<Vec<Complex64>>
    where
        F: FnMut(Complex64, &[Complex64], &mut [Complex64]),
    {
        let mut y = y0.to_vec();
        for seg in path.windows(2) {
            y = self.solve_segment(&mut f, seg[0], seg[1], &y)?.y_end().to_vec();
        }
        Ok(y)
    }

    /// Dense trajectory along the segment `a -> b`, parametrized by arclength `s ∈ [0, |b - a|]`.
    pub fn solve_segment<F>(&self, f: &mut F, a: Complex64, b: Complex64, y0: &[Complex64]) -> Result<Trajectory<Complex64>>
    where
        F: FnMut(Complex64, &[Complex64], &mut [Complex64]),
    {
        let len = (b - a).norm();
        if len == 0.0 {
            return Ok(Trajectory { t0: 0.0, y0: y0.to_vec(), steps: Vec::new() });
        }
        let dir = (b - a) / len;
        self.solve(
            |s, y: &[Complex64], dy: &mut [Complex64]| {
                f(a + dir * s, y, dy);
                for v in dy.iter_mut() {
                    *v *= dir;
                }
            },
            0.0,
            y0,
            len,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let solver = Dopri5::new(Tolerance::uniform(1e-12));
        let traj = solver.solve(|_, y: &[f64], dy: &mut [f64]| dy[0] = -y[0], 0.0, &[1.0], 5.0).unwrap();
        assert!((traj.y_end()[0] - (-5.0f64).exp()).abs() < 1e-11);
        for t in [0.3, 1.7, 4.99] {
            assert!((traj.sample(t)[0] - (-t).exp()).abs() < 1e-10, "dense output at {t}");
        }
    }

    #[test]
    fn backward_integration() {
        let solver = Dopri5::new(Tolerance::uniform(1e-12));
        let traj = solver.solve(|_, y: &[f64], dy: &mut [f64]| dy[0] = y[0], 0.0, &[1.0], -2.0).unwrap();
        assert!((traj.y_end()[0] - (-2.0f64).exp()).abs() < 1e-12);
        assert!((traj.sample(-1.0)[0] - (-1.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn zero_span_is_identity() {
        let solver = Dopri5::new(Tolerance::uniform(1e-10));
        let y0 = [0.1, -3.0];
        let traj = solver.solve(|_, _: &[f64], dy: &mut [f64]| dy.fill(1.0), 2.0, &y0, 2.0).unwrap();
        assert_eq!(traj.y_end(), &y0);
    }

    #[test]
    fn harmonic_oscillator_dense_output_is_smooth() {
        let solver = Dopri5::new(Tolerance::uniform(1e-11));
        let traj = solver
            .solve(|_, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -y[0];
            }, 0.0, &[0.0, 1.0], 20.0)
            .unwrap();
        for i in 0..200 {
            let t = i as f64 * 0.1;
            let y = traj.sample(t);
            assert!((y[0] - t.sin()).abs() < 1e-9);
            assert!((y[1] - t.cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn complex_path_around_pole_picks_up_residue() {
        // y' = y / z around the origin multiplies y by exp(2πi) = 1; the log z = ∫dz/z picks up 2πi.
        let solver = Dopri5::new(Tolerance::uniform(1e-12));
        let n = 64;
        let path: Vec<Complex64> = (0..=n)
            .map(|j| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / n as f64))
            .collect();
        let y = solver
            .solve_path(|z, _y: &[Complex64], dy: &mut [Complex64]| dy[0] = 1.0 / z, &path, &[Complex64::new(0.0, 0.0)])
            .unwrap();
        assert!((y[0] - Complex64::new(0.0, 2.0 * std::f64::consts::PI)).norm() < 1e-10);
    }

    #[test]
    fn stiff_blowup_reports_step_failure() {
        let solver = Dopri5::new(Tolerance::uniform(1e-10));
        let res = solver.solve(|_, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0], 0.0, &[1.0], 2.0);
        assert!(matches!(res, Err(Error::StepFailure { .. })));
    }
}
