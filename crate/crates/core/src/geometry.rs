//! Hamiltonian/Finsler duality on the built-in two-dimensional charts.
//!
//! A [`Hamiltonian`] is a positively 1-homogeneous, strictly convex function
//! on covectors. Its dual norm `phi_p(v) = sup { <v, a> : H(p, a) = 1 }` is the
//! Finsler metric whose geodesics are the projected characteristics.
//! Distances `d(p, q)` are lengths of paths travelled *from* `p` *to* `q`; for
//! the asymmetric (Randers) norm the order matters.

use crate::math::{fabs, floor, sqrt, vec2, Mat2, Vec2};
use crate::Error;

/// The closed catalog of Hamiltonians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Hamiltonian {
    /// `H(x, a) = |a|`.
    Euclidean,
    /// `H(x, a) = |a| + <b, a>` with a constant drift covector `|b| < 1`.
    Randers { drift: Vec2 },
}

impl Hamiltonian {
    pub fn randers(drift: Vec2) -> Result<Self, Error> {
        if !drift.is_finite() {
            return Err(Error::InvalidArgument("randers drift must be finite"));
        }
        if drift.norm() >= 1.0 {
            return Err(Error::InvalidArgument("randers drift must satisfy |b| < 1"));
        }
        Ok(Hamiltonian::Randers { drift })
    }

    fn drift(&self) -> Vec2 {
        match *self {
            Hamiltonian::Euclidean => Vec2::ZERO,
            Hamiltonian::Randers { drift } => drift,
        }
    }

    /// Every catalog Hamiltonian is translation invariant, so its
    /// characteristics project to straight lines.
    pub fn is_position_independent(&self) -> bool {
        true
    }

    pub fn value(&self, _x: Vec2, alpha: Vec2) -> f64 {
        alpha.norm() + self.drift().dot(alpha)
    }

    /// `dH/da`: the velocity of the characteristic carrying covector `a`.
    pub fn grad_alpha(&self, _x: Vec2, alpha: Vec2) -> Vec2 {
        let n = alpha.norm();
        if n == 0.0 {
            return self.drift();
        }
        alpha / n + self.drift()
    }

    pub fn grad_x(&self, _x: Vec2, _alpha: Vec2) -> Vec2 {
        Vec2::ZERO
    }

    /// `d^2H/da^2`, singular along `a` by homogeneity.
    pub fn hess_alpha(&self, _x: Vec2, alpha: Vec2) -> Mat2 {
        let n = alpha.norm();
        if n == 0.0 {
            return Mat2::ZERO;
        }
        let u = alpha / n;
        (Mat2::IDENTITY - Mat2::outer(u, u)) * (1.0 / n)
    }

    /// Mixed derivative `d^2H/(da dx)`; entry `(i, j)` is `d^2H/da_i dx_j`.
    pub fn hess_alpha_x(&self, _x: Vec2, _alpha: Vec2) -> Mat2 {
        Mat2::ZERO
    }

    pub fn hess_x(&self, _x: Vec2, _alpha: Vec2) -> Mat2 {
        Mat2::ZERO
    }

    /// The Finsler norm `phi_p(v)` dual to `H(p, .)`.
    pub fn dual_norm(&self, p: Vec2, v: Vec2) -> Result<f64, Error> {
        if !v.is_finite() || !p.is_finite() {
            return Err(Error::InvalidArgument("non-finite vector"));
        }
        Ok(self.phi(v))
    }

    /// Unchecked dual norm for hot loops.
    #[inline]
    pub(crate) fn phi(&self, v: Vec2) -> f64 {
        match *self {
            Hamiltonian::Euclidean => v.norm(),
            Hamiltonian::Randers { drift } => {
                // Support function of the ellipse |a| + <b, a> = 1.
                let s = 1.0 - drift.norm_sq();
                let bv = drift.dot(v);
                (sqrt(s * v.norm_sq() + bv * bv) - bv) / s
            }
        }
    }

    /// Gradient of `phi` in the vector argument.
    pub(crate) fn phi_grad(&self, v: Vec2) -> Vec2 {
        match *self {
            Hamiltonian::Euclidean => v.normalized(),
            Hamiltonian::Randers { drift } => {
                let s = 1.0 - drift.norm_sq();
                let bv = drift.dot(v);
                let q = sqrt(s * v.norm_sq() + bv * bv);
                ((v * s + drift * bv) / q - drift) / s
            }
        }
    }

    /// Hessian of `phi` in the vector argument (degenerate along `v`).
    pub(crate) fn phi_hessian(&self, v: Vec2) -> Mat2 {
        match *self {
            Hamiltonian::Euclidean => {
                let n = v.norm();
                let u = v / n;
                (Mat2::IDENTITY - Mat2::outer(u, u)) * (1.0 / n)
            }
            Hamiltonian::Randers { drift } => {
                let s = 1.0 - drift.norm_sq();
                let bv = drift.dot(v);
                let q = sqrt(s * v.norm_sq() + bv * bv);
                let w = v * s + drift * bv;
                let m = (Mat2::IDENTITY * s + Mat2::outer(drift, drift)) * (1.0 / q)
                    - Mat2::outer(w, w) * (1.0 / (q * q * q));
                m * (1.0 / s)
            }
        }
    }

    /// The covector `w` with `w(X) = phi(X)^2` that annihilates the tangent
    /// line of the indicatrix through `X`; equals `phi(X) dphi_X`.
    pub fn dual_one_form(&self, p: Vec2, x: Vec2) -> Result<Vec2, Error> {
        if !x.is_finite() || !p.is_finite() {
            return Err(Error::InvalidArgument("non-finite vector"));
        }
        if x.norm() == 0.0 {
            return Err(Error::DegenerateVector);
        }
        Ok(self.phi_grad(x) * self.phi(x))
    }

    /// The fundamental tensor at `(p, v)`: Hessian of `phi^2 / 2`.
    pub fn fundamental_tensor(&self, p: Vec2, v: Vec2) -> Result<Mat2, Error> {
        if !v.is_finite() || !p.is_finite() {
            return Err(Error::InvalidArgument("non-finite vector"));
        }
        if v.norm() == 0.0 {
            return Err(Error::DegenerateVector);
        }
        let g = self.phi_grad(v);
        Ok(Mat2::outer(g, g) + self.phi_hessian(v) * self.phi(v))
    }
}

/// Curve parameterisation of one boundary component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCurve {
    /// `center + radius (cos t, sin t)`; `hole` when the domain lies outside.
    Circle { center: Vec2, radius: f64, hole: bool },
    /// `(a cos t, b sin t)`, domain inside.
    Ellipse { a: f64, b: f64 },
}

/// Position and derivatives of a boundary curve at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveFrame {
    pub point: Vec2,
    /// `dgamma/dtheta`.
    pub d1: Vec2,
    /// `d^2gamma/dtheta^2`.
    pub d2: Vec2,
    /// Unit tangent in the direction of increasing parameter.
    pub tangent: Vec2,
    /// Unit normal pointing into the domain.
    pub inward: Vec2,
    /// `|dgamma/dtheta|`.
    pub speed: f64,
}

impl BoundaryCurve {
    pub fn frame(&self, theta: f64) -> CurveFrame {
        let (s, c) = (crate::math::sin(theta), crate::math::cos(theta));
        let (point, d1, d2) = match *self {
            BoundaryCurve::Circle { center, radius, .. } => (
                center + vec2(c, s) * radius,
                vec2(-s, c) * radius,
                vec2(-c, -s) * radius,
            ),
            BoundaryCurve::Ellipse { a, b } => (vec2(a * c, b * s), vec2(-a * s, b * c), vec2(-a * c, -b * s)),
        };
        let speed = d1.norm();
        let tangent = d1 / speed;
        // Counterclockwise parameterisation: the interior of the curve is on the left.
        let left = tangent.perp();
        let inward = match *self {
            BoundaryCurve::Circle { hole: true, .. } => -left,
            _ => left,
        };
        CurveFrame { point, d1, d2, tangent, inward, speed }
    }

    /// Position only; cheaper than [`BoundaryCurve::frame`].
    #[inline]
    pub fn point(&self, theta: f64) -> Vec2 {
        let (s, c) = (crate::math::sin(theta), crate::math::cos(theta));
        match *self {
            BoundaryCurve::Circle { center, radius, .. } => center + vec2(c, s) * radius,
            BoundaryCurve::Ellipse { a, b } => vec2(a * c, b * s),
        }
    }

    /// Circumscribing disk `(center, radius)`.
    pub fn bounding_circle(&self) -> (Vec2, f64) {
        match *self {
            BoundaryCurve::Circle { center, radius, .. } => (center, radius),
            BoundaryCurve::Ellipse { a, b } => (Vec2::ZERO, a.max(b)),
        }
    }
}

/// A single global coordinate patch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Chart {
    /// `r_in < |x| < r_out`.
    Annulus { r_in: f64, r_out: f64 },
    /// `|x| < radius`.
    Disk { radius: f64 },
    /// `(x/a)^2 + (y/b)^2 < 1`.
    Ellipse { a: f64, b: f64 },
    /// Unit flat torus (coordinates mod 1) with the disk of `radius` around
    /// `source` removed.
    Torus { source: Vec2, radius: f64 },
}

impl Chart {
    pub fn validate(&self) -> Result<(), Error> {
        let ok = match *self {
            Chart::Annulus { r_in, r_out } => r_in > 0.0 && r_in < r_out && r_out.is_finite(),
            Chart::Disk { radius } => radius > 0.0 && radius.is_finite(),
            Chart::Ellipse { a, b } => a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite(),
            Chart::Torus { source, radius } => source.is_finite() && radius > 0.0 && radius < 0.25,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidChart)
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Chart::Torus { .. })
    }

    /// Boundary components; for the annulus the inner circle comes first.
    pub fn boundary_curves(&self) -> alloc::vec::Vec<BoundaryCurve> {
        match *self {
            Chart::Annulus { r_in, r_out } => alloc::vec![
                BoundaryCurve::Circle { center: Vec2::ZERO, radius: r_in, hole: true },
                BoundaryCurve::Circle { center: Vec2::ZERO, radius: r_out, hole: false },
            ],
            Chart::Disk { radius } => {
                alloc::vec![BoundaryCurve::Circle { center: Vec2::ZERO, radius, hole: false }]
            }
            Chart::Ellipse { a, b } => alloc::vec![BoundaryCurve::Ellipse { a, b }],
            Chart::Torus { source, radius } => {
                alloc::vec![BoundaryCurve::Circle { center: source, radius, hole: true }]
            }
        }
    }

    /// Reduces torus coordinates into the fundamental square centred on the
    /// source; identity on planar charts.
    pub fn reduce(&self, p: Vec2) -> Vec2 {
        match *self {
            Chart::Torus { source, .. } => {
                let d = p - source;
                source + vec2(d.x - floor(d.x + 0.5), d.y - floor(d.y + 0.5))
            }
            _ => p,
        }
    }

    /// Axis-aligned bounding box `(min, max)` of the chart domain.
    pub fn bounds(&self) -> (Vec2, Vec2) {
        match *self {
            Chart::Annulus { r_out, .. } => (vec2(-r_out, -r_out), vec2(r_out, r_out)),
            Chart::Disk { radius } => (vec2(-radius, -radius), vec2(radius, radius)),
            Chart::Ellipse { a, b } => (vec2(-a, -b), vec2(a, b)),
            Chart::Torus { source, .. } => (source - vec2(0.5, 0.5), source + vec2(0.5, 0.5)),
        }
    }

    /// Open domain membership (torus points are reduced first).
    pub fn contains(&self, p: Vec2) -> bool {
        if !p.is_finite() {
            return false;
        }
        match *self {
            Chart::Annulus { r_in, r_out } => {
                let r = p.norm();
                r > r_in && r < r_out
            }
            Chart::Disk { radius } => p.norm() < radius,
            Chart::Ellipse { a, b } => (p.x / a) * (p.x / a) + (p.y / b) * (p.y / b) < 1.0,
            Chart::Torus { source, radius } => (self.reduce(p) - source).norm() > radius,
        }
    }

    /// Length of the straight path from `p` to `q` under `H`; on the torus
    /// the shortest over lattice translates of `q`.
    pub fn distance(&self, h: &Hamiltonian, p: Vec2, q: Vec2) -> Result<f64, Error> {
        if !p.is_finite() || !q.is_finite() {
            return Err(Error::InvalidArgument("non-finite point"));
        }
        Ok(self.distance_unchecked(h, p, q))
    }

    pub(crate) fn distance_unchecked(&self, h: &Hamiltonian, p: Vec2, q: Vec2) -> f64 {
        match *self {
            Chart::Torus { .. } => {
                let d = q - p;
                let base = vec2(d.x - floor(d.x + 0.5), d.y - floor(d.y + 0.5));
                let mut best = f64::INFINITY;
                for i in -2..=2 {
                    for j in -2..=2 {
                        best = best.min(h.phi(base + vec2(i as f64, j as f64)));
                    }
                }
                best
            }
            _ => h.phi(q - p),
        }
    }

    /// First time `t > t_min` at which the straight ray `z + t v` (unwrapped
    /// on the torus) leaves the domain.
    pub fn ray_exit(&self, z: Vec2, v: Vec2, t_min: f64) -> f64 {
        match *self {
            Chart::Annulus { r_in, r_out } => {
                let a = circle_hit(z, v, Vec2::ZERO, r_in, t_min);
                let b = circle_hit(z, v, Vec2::ZERO, r_out, t_min);
                a.min(b)
            }
            Chart::Disk { radius } => circle_hit(z, v, Vec2::ZERO, radius, t_min),
            Chart::Ellipse { a, b } => {
                // Scale to the unit circle.
                let zs = vec2(z.x / a, z.y / b);
                let vs = vec2(v.x / a, v.y / b);
                circle_hit(zs, vs, Vec2::ZERO, 1.0, t_min)
            }
            Chart::Torus { source, radius } => {
                let mut best = f64::INFINITY;
                let speed = v.norm();
                let reach = 4.0;
                let steps = (reach / 1.0) as i32 + 1;
                for i in -steps..=steps {
                    for j in -steps..=steps {
                        let c = source + vec2(i as f64, j as f64);
                        // Skip translates the ray cannot reach within `reach`.
                        if (c - z).norm() > reach * speed + radius {
                            continue;
                        }
                        best = best.min(circle_hit(z, v, c, radius, t_min));
                    }
                }
                best
            }
        }
    }
}

/// Smallest `t > t_min` with `|z + t v - c| = r`, or infinity.
fn circle_hit(z: Vec2, v: Vec2, c: Vec2, r: f64, t_min: f64) -> f64 {
    let w = z - c;
    let a = v.norm_sq();
    let b = 2.0 * w.dot(v);
    let cc = w.norm_sq() - r * r;
    let disc = b * b - 4.0 * a * cc;
    if disc < 0.0 || a == 0.0 {
        return f64::INFINITY;
    }
    let sq = sqrt(disc);
    // Numerically stable pair of roots.
    let q = -0.5 * (b + if b >= 0.0 { sq } else { -sq });
    let mut r1 = q / a;
    let mut r2 = if q != 0.0 { cc / q } else { -r1 };
    if r1 > r2 {
        core::mem::swap(&mut r1, &mut r2);
    }
    if r1 > t_min {
        r1
    } else if r2 > t_min {
        r2
    } else {
        f64::INFINITY
    }
}

/// Quadratic helper shared by characteristic-vector solves: larger root of
/// `a x^2 + b x + c = 0`, if real.
pub(crate) fn larger_root(a: f64, b: f64, c: f64) -> Option<f64> {
    if fabs(a) < 1e-300 {
        if fabs(b) < 1e-300 {
            return None;
        }
        return Some(-c / b);
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = sqrt(disc);
    let r1 = (-b + sq) / (2.0 * a);
    let r2 = (-b - sq) / (2.0 * a);
    Some(r1.max(r2))
}
