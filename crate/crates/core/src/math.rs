//! Small fixed-size linear algebra and scalar solvers used throughout the crate.

use core::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

pub use libm::{atan2, cos, fabs, floor, hypot, sin, sqrt};

pub const PI: f64 = core::f64::consts::PI;
pub const TAU: f64 = core::f64::consts::TAU;

/// A point, tangent vector or covector in chart coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

#[inline]
pub const fn vec2(x: f64, y: f64) -> Vec2 {
    Vec2 { x, y }
}

impl Vec2 {
    pub const ZERO: Vec2 = vec2(0.0, 0.0);

    #[inline]
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        sqrt(self.x * self.x + self.y * self.y)
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n > 0.0 {
            self / n
        } else {
            self
        }
    }

    /// Counterclockwise rotation by a quarter turn.
    #[inline]
    pub fn perp(self) -> Vec2 {
        vec2(-self.y, self.x)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn angle(self) -> f64 {
        atan2(self.y, self.x)
    }

    pub fn from_angle(theta: f64) -> Vec2 {
        vec2(cos(theta), sin(theta))
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        vec2(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        vec2(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        vec2(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn div(self, s: f64) -> Vec2 {
        vec2(self.x / s, self.y / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        vec2(-self.x, -self.y)
    }
}

/// Row-major 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };
    pub const ZERO: Mat2 = Mat2 { a: 0.0, b: 0.0, c: 0.0, d: 0.0 };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Mat2 {
        Mat2 { a, b, c, d }
    }

    pub fn from_cols(c0: Vec2, c1: Vec2) -> Mat2 {
        Mat2 { a: c0.x, b: c1.x, c: c0.y, d: c1.y }
    }

    pub fn outer(u: Vec2, v: Vec2) -> Mat2 {
        Mat2 { a: u.x * v.x, b: u.x * v.y, c: u.y * v.x, d: u.y * v.y }
    }

    pub fn col0(&self) -> Vec2 {
        vec2(self.a, self.c)
    }

    pub fn col1(&self) -> Vec2 {
        vec2(self.b, self.d)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2 { a: self.a, b: self.c, c: self.b, d: self.d }
    }

    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        vec2(self.a * v.x + self.b * v.y, self.c * v.x + self.d * v.y)
    }

    /// Bilinear form `u^T M v`.
    pub fn form(&self, u: Vec2, v: Vec2) -> f64 {
        u.dot(self.mul_vec(v))
    }

    pub fn solve(&self, rhs: Vec2) -> Option<Vec2> {
        let det = self.det();
        let scale = self.frobenius().max(f64::MIN_POSITIVE);
        if fabs(det) <= 1e-300 || fabs(det) < 1e-15 * scale * scale {
            return None;
        }
        Some(vec2(
            (self.d * rhs.x - self.b * rhs.y) / det,
            (self.a * rhs.y - self.c * rhs.x) / det,
        ))
    }

    pub fn frobenius(&self) -> f64 {
        sqrt(self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        fabs(self.b - self.c) <= tol * self.frobenius().max(1.0)
    }

    /// Singular values, largest first.
    pub fn singular_values(&self) -> (f64, f64) {
        // Closed form from the invariants of M^T M.
        let f = self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d;
        let det = fabs(self.det());
        let disc = sqrt((f * f - 4.0 * det * det).max(0.0));
        let s1 = sqrt(((f + disc) * 0.5).max(0.0));
        let s2 = if s1 > 0.0 { det / s1 } else { 0.0 };
        (s1, s2)
    }

    /// Eigenvalues of a symmetric matrix, smallest first.
    pub fn sym_eigenvalues(&self) -> (f64, f64) {
        let off = 0.5 * (self.b + self.c);
        let mean = 0.5 * (self.a + self.d);
        let half_diff = 0.5 * (self.a - self.d);
        let r = hypot(half_diff, off);
        (mean - r, mean + r)
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2 { a: self.a + o.a, b: self.b + o.b, c: self.c + o.c, d: self.d + o.d }
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2 { a: self.a - o.a, b: self.b - o.b, c: self.c - o.c, d: self.d - o.d }
    }
}

impl Mul<f64> for Mat2 {
    type Output = Mat2;
    fn mul(self, s: f64) -> Mat2 {
        Mat2 { a: self.a * s, b: self.b * s, c: self.c * s, d: self.d * s }
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2 {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta % TAU;
    if t <= -PI {
        t += TAU;
    } else if t > PI {
        t -= TAU;
    }
    t
}

/// Unsigned angle between two nonzero vectors.
pub fn angle_between(u: Vec2, v: Vec2) -> f64 {
    fabs(atan2(u.cross(v), u.dot(v)))
}

/// Golden-section minimisation of a unimodal function on `[lo, hi]`.
/// Returns `(argmin, min)`.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iter = 0;
    while hi - lo > tol && iter < 200 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
        iter += 1;
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Bracketed root of `f` on `[lo, hi]` (signs must differ) by bisection
/// blended with secant steps. Returns the root to absolute tolerance `tol`.
pub fn bracketed_root<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return lo;
    }
    if fhi == 0.0 {
        return hi;
    }
    let mut fh = fhi;
    let mut iter = 0;
    while hi - lo > tol && iter < 200 {
        // Illinois-free safeguarded secant: fall back to the midpoint if the
        // secant point is outside the middle 80% of the bracket.
        let mut x = lo - flo * (hi - lo) / (fh - flo);
        let w = hi - lo;
        if !(x > lo + 0.1 * w && x < hi - 0.1 * w) || iter % 3 == 2 {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if (fx < 0.0) == (flo < 0.0) {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fh = fx;
        }
        iter += 1;
    }
    0.5 * (lo + hi)
}
