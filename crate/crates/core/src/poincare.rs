//! Poincaré sections of the reduced two-degree-of-freedom system on the plane
//! q₂ = π/2, crossed with p₂ > 0.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{Control, DenseStep, Dopri5, Tolerance};
use crate::reduction::{ReducedState, ReducedSystem};

/// |p₁| beyond this marks a seed as escaping.
pub const ESCAPE_P1: f64 = 1e3;
/// Crossings are refined until |q₂ − π/2| is below this.
pub const SECTION_TOL: f64 = 1e-10;
/// Seeds whose energy discriminant is within this of zero start with p₂ = 0.
const PLANAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Seed {
    pub q1: f64,
    pub p1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionSpec {
    #[serde(rename = "C")]
    pub c: f64,
    pub xi: f64,
    pub h: f64,
    pub seeds: Vec<Seed>,
    pub max_crossings: usize,
    pub t_max: f64,
    /// Sampling interval for seeds that start in the invariant plane.
    pub planar_dt: f64,
}

impl SectionSpec {
    /// Seeds spread along p₁ = 1 over the q₁ values that reach energy `h`.
    pub fn with_line_seeds(c: f64, xi: f64, h: f64, n: usize) -> Self {
        let seeds = (0..n)
            .map(|j| Seed { q1: -1.4 + 2.8 * (j as f64 + 0.5) / n as f64, p1: 1.0 })
            .filter(|s| energy_discriminant(c, h, s) > PLANAR_TOL)
            .collect();
        Self { c, xi, h, seeds, max_crossings: 200, t_max: 5000.0, planar_dt: 0.1 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0 && self.xi.is_finite() && self.h.is_finite()) {
            return Err(Error::InvalidParams("section needs finite C > 0, xi and h".into()));
        }
        if !(self.t_max > 0.0 && self.planar_dt > 0.0) {
            return Err(Error::InvalidParams("t_max and planar_dt must be positive".into()));
        }
        Ok(())
    }
}

/// 2(h − ½p₁² + p₁ − (3/2)(C−1)sin²q₁), the value of p₂² on the section.
fn energy_discriminant(c: f64, h: f64, s: &Seed) -> f64 {
    let s1 = s.q1.sin();
    2.0 * (h - 0.5 * s.p1 * s.p1 + s.p1 - 1.5 * (c - 1.0) * s1 * s1)
}

/// p₂ ≥ 0 placing the seed on the energy level at q₂ = π/2. ξ drops out there.
pub fn seed_momentum(seed: &Seed, spec: &SectionSpec) -> Result<f64> {
    let d = energy_discriminant(spec.c, spec.h, seed);
    if d < -PLANAR_TOL {
        return Err(Error::EnergyInfeasible { h: spec.h, discriminant: d });
    }
    Ok(if d <= PLANAR_TOL { 0.0 } else { d.sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub index: usize,
    pub t: f64,
    pub q1: f64,
    pub p1: f64,
    pub q2: f64,
    pub p2: f64,
    pub energy_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedOrbit {
    pub seed_id: usize,
    pub seed: Seed,
    /// True when the seed starts in the invariant plane p₂ = 0; its points are time samples.
    pub planar: bool,
    pub points: Vec<Crossing>,
    pub escaped: Option<(f64, f64)>,
    /// Largest |q₂ − π/2| + |p₂| seen on a planar orbit.
    pub planar_deviation: f64,
}

fn wrap(q: f64) -> f64 {
    let w = (q + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI { PI } else { w }
}

fn refine(step: &DenseStep<f64>) -> f64 {
    let g = |t: f64| step.eval(t)[1] - FRAC_PI_2;
    let (mut a, mut b) = (step.t0, step.t1());
    let mut t = 0.5 * (a + b);
    for _ in 0..200 {
        t = 0.5 * (a + b);
        let v = g(t);
        if v.abs() < 0.1 * SECTION_TOL || b - a < 1e-15 * t.abs().max(1.0) {
            break;
        }
        if (v < 0.0) == (g(a) < 0.0) { a = t } else { b = t }
    }
    // Newton polish on the interpolant: q̇₂ = p₂
    for _ in 0..3 {
        let y = step.eval(t);
        if y[3] == 0.0 {
            break;
        }
        let next = t - (y[1] - FRAC_PI_2) / y[3];
        if next < step.t0 || next > step.t1() {
            break;
        }
        if (step.eval(next)[1] - FRAC_PI_2).abs() <= (y[1] - FRAC_PI_2).abs() {
            t = next;
        } else {
            break;
        }
    }
    t
}

fn point(sys: &ReducedSystem, h: f64, index: usize, t: f64, y: &[f64]) -> Crossing {
    let x = ReducedState::from_slice(y);
    let energy_residual = sys.hamiltonian(&x).map_or(f64::INFINITY, |e| e - h);
    Crossing { index, t, q1: wrap(x.q1), p1: x.p1, q2: x.q2, p2: x.p2, energy_residual }
}

/// Integrates one seed, collecting upward crossings of q₂ = π/2 (or time samples for planar seeds).
pub fn run_seed(spec: &SectionSpec, seed_id: usize, tol: f64) -> Result<SeedOrbit> {
    let seed = spec.seeds[seed_id];
    let p2 = seed_momentum(&seed, spec)?;
    let planar = p2 == 0.0;
    let sys = ReducedSystem::new(spec.c, spec.xi);
    let y0 = [seed.q1, FRAC_PI_2, seed.p1, p2];
    let solver = Dopri5::new(Tolerance::uniform(tol)).with_max_step(if planar { spec.planar_dt } else { f64::INFINITY });
    let mut points = Vec::new();
    let mut escaped = None;
    let mut planar_deviation: f64 = 0.0;
    let mut next_sample = spec.planar_dt;
    let mut fail = None;
    let f = |_: f64, y: &[f64], dy: &mut [f64]| match sys.rhs(&ReducedState::from_slice(y)) {
        Ok(v) => dy.copy_from_slice(&v),
        Err(_) => dy.fill(f64::NAN),
    };
    let run = solver.solve_with(f, 0.0, &y0, spec.t_max, |step| {
        let y1 = step.y1();
        if y1.iter().any(|v| !v.is_finite()) {
            fail = Some(Error::CoordinateSingularity(step.y0()[1].sin().abs()));
            return Ok(Control::Stop);
        }
        if y1[2].abs() > ESCAPE_P1 {
            escaped = Some((step.t1(), y1[2]));
            return Ok(Control::Stop);
        }
        if planar {
            while next_sample <= step.t1() && points.len() < spec.max_crossings {
                let y = step.eval(next_sample);
                planar_deviation = planar_deviation.max((y[1] - FRAC_PI_2).abs() + y[3].abs());
                points.push(point(&sys, spec.h, points.len(), next_sample, &y));
                next_sample += spec.planar_dt;
            }
        } else {
            let (g0, g1) = (step.y0()[1] - FRAC_PI_2, y1[1] - FRAC_PI_2);
            if g0 < 0.0 && g1 >= 0.0 {
                let t = refine(step);
                let y = step.eval(t);
                if y[3] > 0.0 {
                    points.push(point(&sys, spec.h, points.len(), t, &y));
                }
            }
        }
        Ok(if points.len() >= spec.max_crossings { Control::Stop } else { Control::Continue })
    });
    if let Some(e) = fail {
        return Err(e);
    }
    run?;
    Ok(SeedOrbit { seed_id, seed, planar, points, escaped, planar_deviation })
}

/// All seeds, processed concurrently; output is in seed order.
pub fn run_section(spec: &SectionSpec, tol: f64) -> Result<Vec<SeedOrbit>> {
    spec.validate()?;
    (0..spec.seeds.len()).into_par_iter().map(|i| run_seed(spec, i, tol)).collect()
}

/// `seed_id,crossing_index,q1,p1,t` rows after a `# {json}` header line carrying the spec.
pub fn write_csv<W: Write>(mut w: W, spec: &SectionSpec, orbits: &[SeedOrbit]) -> std::io::Result<()> {
    writeln!(w, "# {}", serde_json::to_string(spec).map_err(std::io::Error::other)?)?;
    writeln!(w, "seed_id,crossing_index,q1,p1,t")?;
    for o in orbits {
        for p in &o.points {
            writeln!(w, "{},{},{:.16e},{:.16e},{:.16e}", o.seed_id, p.index, p.q1, p.p1, p.t)?;
        }
    }
    Ok(())
}
