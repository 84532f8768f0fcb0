//! Boundary components, boundary data `g`, and their sampled mesh.

use alloc::vec::Vec;

use crate::geometry::{BoundaryCurve, CurveFrame};
use crate::math::{cos, sin, TAU};
use crate::Error;

/// Boundary data along one component as a function of the curve parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Constant(f64),
    /// `mean + amplitude * sin(frequency * theta + phase)`.
    Harmonic { mean: f64, amplitude: f64, frequency: u32, phase: f64 },
    /// Values at `theta_k = 2 pi k / n`, interpolated by a periodic
    /// Catmull-Rom spline.
    Tabulated(Vec<f64>),
}

impl Profile {
    pub fn validate(&self) -> Result<(), Error> {
        let ok = match self {
            Profile::Constant(c) => c.is_finite(),
            Profile::Harmonic { mean, amplitude, phase, .. } => {
                mean.is_finite() && amplitude.is_finite() && phase.is_finite()
            }
            Profile::Tabulated(v) => v.len() >= 4 && v.iter().all(|x| x.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument("boundary data must be finite (tabulated needs >= 4 values)"))
        }
    }

    /// `(g, dg/dtheta, d^2g/dtheta^2)`.
    pub fn eval(&self, theta: f64) -> (f64, f64, f64) {
        match self {
            Profile::Constant(c) => (*c, 0.0, 0.0),
            Profile::Harmonic { mean, amplitude, frequency, phase } => {
                let k = *frequency as f64;
                let arg = k * theta + phase;
                (mean + amplitude * sin(arg), amplitude * k * cos(arg), -amplitude * k * k * sin(arg))
            }
            Profile::Tabulated(values) => catmull_rom(values, theta),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Profile::Constant(_))
    }
}

fn catmull_rom(values: &[f64], theta: f64) -> (f64, f64, f64) {
    let n = values.len();
    let h = TAU / n as f64;
    let r = theta / h;
    let x = r - crate::math::floor(r / n as f64) * n as f64;
    let i = (x as usize).min(n - 1);
    let u = x - i as f64;
    let at = |k: isize| values[k.rem_euclid(n as isize) as usize];
    let (p0, p1, p2, p3) = (at(i as isize - 1), at(i as isize), at(i as isize + 1), at(i as isize + 2));
    let m1 = 0.5 * (p2 - p0);
    let m2 = 0.5 * (p3 - p1);
    let (u2, u3) = (u * u, u * u * u);
    let val = (2.0 * u3 - 3.0 * u2 + 1.0) * p1 + (u3 - 2.0 * u2 + u) * m1 + (-2.0 * u3 + 3.0 * u2) * p2 + (u3 - u2) * m2;
    let d1 = (6.0 * u2 - 6.0 * u) * p1 + (3.0 * u2 - 4.0 * u + 1.0) * m1 + (-6.0 * u2 + 6.0 * u) * p2 + (3.0 * u2 - 2.0 * u) * m2;
    let d2 = (12.0 * u - 6.0) * p1 + (6.0 * u - 4.0) * m1 + (-12.0 * u + 6.0) * p2 + (6.0 * u - 2.0) * m2;
    (val, d1 / h, d2 / (h * h))
}

/// Boundary data on every component plus per-component constant offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub profiles: Vec<Profile>,
    pub offsets: Vec<f64>,
}

impl BoundaryData {
    pub fn zero(components: usize) -> Self {
        BoundaryData { profiles: alloc::vec![Profile::Constant(0.0); components], offsets: alloc::vec![0.0; components] }
    }

    pub fn new(profiles: Vec<Profile>) -> Self {
        let n = profiles.len();
        BoundaryData { profiles, offsets: alloc::vec![0.0; n] }
    }

    /// `(g, dg/dtheta, d^2g/dtheta^2)` on component `c`, offset included.
    pub fn eval(&self, c: usize, theta: f64) -> (f64, f64, f64) {
        let (g, d1, d2) = self.profiles[c].eval(theta);
        (g + self.offsets[c], d1, d2)
    }

    pub fn value(&self, c: usize, theta: f64) -> f64 {
        self.eval(c, theta).0
    }
}

/// One sample of the boundary mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySample {
    pub component: usize,
    pub index: usize,
    pub theta: f64,
    pub frame: CurveFrame,
    /// Boundary value `g(z)` (offsets included).
    pub value: f64,
    /// `dg/ds` along the unit tangent.
    pub slope: f64,
    /// Cumulative arclength from `theta = 0`.
    pub arclength: f64,
}

/// Closed, ordered samples per boundary component.
#[derive(Debug, Clone)]
pub struct BoundaryMesh {
    pub curves: Vec<BoundaryCurve>,
    pub components: Vec<Vec<BoundarySample>>,
}

impl BoundaryMesh {
    pub fn new(curves: &[BoundaryCurve], data: &BoundaryData, samples: usize) -> Result<Self, Error> {
        if samples < 8 {
            return Err(Error::InvalidArgument("at least 8 boundary samples per component"));
        }
        if data.profiles.len() != curves.len() || data.offsets.len() != curves.len() {
            return Err(Error::InvalidArgument("boundary data must have one profile per component"));
        }
        for p in &data.profiles {
            p.validate()?;
        }
        let mut components = Vec::with_capacity(curves.len());
        for (c, curve) in curves.iter().enumerate() {
            let mut comp = Vec::with_capacity(samples);
            let mut arclength = 0.0;
            let dtheta = TAU / samples as f64;
            let mut prev_speed = 0.0;
            for k in 0..samples {
                let theta = dtheta * k as f64;
                let frame = curve.frame(theta);
                if k > 0 {
                    arclength += 0.5 * (prev_speed + frame.speed) * dtheta;
                }
                prev_speed = frame.speed;
                let (value, dtheta_g, _) = data.eval(c, theta);
                comp.push(BoundarySample {
                    component: c,
                    index: k,
                    theta,
                    frame,
                    value,
                    slope: dtheta_g / frame.speed,
                    arclength,
                });
            }
            components.push(comp);
        }
        Ok(BoundaryMesh { curves: curves.to_vec(), components })
    }

    pub fn samples_per_component(&self) -> usize {
        self.components.first().map_or(0, |c| c.len())
    }

    pub fn dtheta(&self) -> f64 {
        TAU / self.samples_per_component() as f64
    }

    pub fn iter(&self) -> impl Iterator<Item = &BoundarySample> {
        self.components.iter().flat_map(|c| c.iter())
    }

    /// Arclength between sample `k` and `k + 1` (cyclic) on component `c`.
    pub fn gap(&self, c: usize, k: usize) -> f64 {
        let comp = &self.components[c];
        let n = comp.len();
        let a = comp[k].frame.speed;
        let b = comp[(k + 1) % n].frame.speed;
        0.5 * (a + b) * self.dtheta()
    }
}
