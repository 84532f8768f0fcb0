//! Characteristic vector field, geodesic flow with its variational system,
//! and conjugate times.
//!
//! The boundary coordinate of `V` is the curve parameter `theta` of each
//! boundary component, so `dF = [dF/dt, dF/dtheta]`.

use alloc::vec::Vec;

use crate::math::{fabs, Mat2, Vec2};
use crate::scenario::Problem;
use crate::Error;

/// Initial data of the characteristic through one boundary point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicVector {
    /// `Gamma(z)`, unit for the Finsler norm and pointing inwards.
    pub velocity: Vec2,
    /// Its dual one-form; restricted to the boundary tangent it equals `dg`.
    pub covector: Vec2,
}

/// A characteristic of a position-independent Hamiltonian in closed form:
/// `F(t, theta) = origin + t * velocity`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub component: usize,
    pub theta: f64,
    pub origin: Vec2,
    pub velocity: Vec2,
    pub covector: Vec2,
    /// `d origin / d theta`.
    pub d_origin: Vec2,
    /// `d velocity / d theta`.
    pub d_velocity: Vec2,
    /// `d covector / d theta`.
    pub d_covector: Vec2,
    /// `g(z)`, offsets included.
    pub value: f64,
    /// Time at which the ray leaves the domain.
    pub exit: f64,
}

impl Ray {
    #[inline]
    pub fn at(&self, t: f64) -> Vec2 {
        self.origin + self.velocity * t
    }

    /// `dF_(t, theta)` as columns `[dF/dt, dF/dtheta]`.
    pub fn jacobian(&self, t: f64) -> Mat2 {
        Mat2::from_cols(self.velocity, self.d_origin + self.d_velocity * t)
    }

    /// `det dF` is affine in `t` for straight characteristics; its positive
    /// root inside the flow domain, if any.
    pub fn first_conjugate_time(&self) -> Option<f64> {
        let a = self.velocity.cross(self.d_origin);
        let b = self.velocity.cross(self.d_velocity);
        if b == 0.0 {
            return None;
        }
        let t = -a / b;
        (t > 0.0 && t <= self.exit).then_some(t)
    }

    /// Whether `dF` is singular at time `t` (relative singular-value test).
    pub fn is_conjugate_at(&self, t: f64, sigma_tol: f64) -> bool {
        let (s1, s2) = self.jacobian(t).singular_values();
        s2 <= sigma_tol * s1
    }
}

/// One sample of an integrated characteristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharState {
    pub t: f64,
    /// Unwrapped position (use [`crate::geometry::Chart::reduce`] on the torus).
    pub position: Vec2,
    pub momentum: Vec2,
    /// `dF_(t, theta)`.
    pub jacobian: Mat2,
}

/// An integrated characteristic.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub component: usize,
    pub theta: f64,
    pub states: Vec<CharState>,
    /// `det dF` at every state.
    pub det_history: Vec<f64>,
    /// The trajectory left the domain before the requested end time.
    pub truncated: bool,
}

impl Trajectory {
    pub fn last(&self) -> &CharState {
        self.states.last().expect("trajectory has at least the initial state")
    }
}

/// Kind of zero of `det dF` along a characteristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugatePoint {
    pub t: f64,
    /// `dim ker dF` from the singular-value test.
    pub order: usize,
    /// Found as a sign-preserving (tangential) zero.
    pub tangential: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateRecord {
    pub component: usize,
    pub theta: f64,
    pub points: Vec<ConjugatePoint>,
}

impl ConjugateRecord {
    /// `lambda_j` (1-based), counting multiplicity; infinite if absent.
    pub fn lambda(&self, j: usize) -> f64 {
        let mut count = 0;
        for p in &self.points {
            count += p.order.max(1);
            if count >= j {
                return p.t;
            }
        }
        f64::INFINITY
    }
}

/// Result of a Lipschitz estimate over the boundary mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzEstimate {
    pub constant: f64,
    /// Fraction of samples where the function was finite.
    pub coverage: f64,
    pub samples: usize,
}

impl LipschitzEstimate {
    /// Maximum slope between cyclically adjacent finite samples.
    pub fn from_values(values: &[f64], gaps: &[f64]) -> Self {
        let n = values.len();
        let mut constant: f64 = 0.0;
        let finite = values.iter().filter(|v| v.is_finite()).count();
        for k in 0..n {
            let (a, b) = (values[k], values[(k + 1) % n]);
            if a.is_finite() && b.is_finite() && gaps[k] > 0.0 {
                constant = constant.max(fabs(b - a) / gaps[k]);
            }
        }
        LipschitzEstimate { constant, coverage: finite as f64 / n.max(1) as f64, samples: n }
    }

    /// Refinement stability: the constants differ by less than a factor 2.
    /// Constants below `floor` on both levels count as the same zero.
    pub fn stable_against(&self, finer: &LipschitzEstimate, floor: f64) -> bool {
        let (a, b) = (self.constant, finer.constant);
        if a <= floor && b <= floor {
            return true;
        }
        if a <= floor || b <= floor {
            return false;
        }
        let r = a / b;
        r < 2.0 && r > 0.5
    }
}

// 8-dimensional state: position, momentum, and their theta-derivatives.
#[derive(Clone, Copy)]
struct FlowState {
    x: Vec2,
    a: Vec2,
    dx: Vec2,
    da: Vec2,
}

impl FlowState {
    fn axpy(&self, k: &FlowState, h: f64) -> FlowState {
        FlowState { x: self.x + k.x * h, a: self.a + k.a * h, dx: self.dx + k.dx * h, da: self.da + k.da * h }
    }
}

impl Problem {
    /// Solves `phi(X) = 1`, `X^|_{T boundary} = dg`, `X` inward at the
    /// boundary point with parameter `theta` on component `c`.
    pub fn characteristic_vector(&self, c: usize, theta: f64) -> Result<CharacteristicVector, Error> {
        let (cv, _) = self.characteristic_vector_with_index(c, theta, usize::MAX)?;
        Ok(cv)
    }

    fn characteristic_vector_with_index(
        &self,
        c: usize,
        theta: f64,
        index: usize,
    ) -> Result<(CharacteristicVector, Vec2), Error> {
        let frame = self.mesh.curves[c].frame(theta);
        let (_, g1, _) = self.scenario.data.eval(c, theta);
        let slope = g1 / frame.speed;
        let h = &self.scenario.hamiltonian;
        let tau = frame.tangent;
        let nu = frame.inward;
        let incompatible = Error::IncompatibleBoundary { component: c, sample: index, theta };
        // covector = slope * tau + mu * nu with |covector| = 1 - <b, covector>.
        let drift = match *h {
            crate::geometry::Hamiltonian::Euclidean => Vec2::ZERO,
            crate::geometry::Hamiltonian::Randers { drift } => drift,
        };
        let c0 = 1.0 - slope * drift.dot(tau);
        let c1 = drift.dot(nu);
        let mu = crate::geometry::larger_root(1.0 - c1 * c1, 2.0 * c0 * c1, slope * slope - c0 * c0)
            .ok_or(incompatible.clone())?;
        let covector = tau * slope + nu * mu;
        let velocity = h.grad_alpha(frame.point, covector);
        if c0 - c1 * mu < 0.0 || fabs(h.value(frame.point, covector) - 1.0) > 1e-9 || velocity.dot(nu) <= 0.0 {
            return Err(incompatible);
        }
        Ok((CharacteristicVector { velocity, covector }, tau))
    }

    /// The characteristic from `(c, theta)` with its theta-derivatives.
    pub fn ray(&self, c: usize, theta: f64) -> Result<Ray, Error> {
        self.ray_indexed(c, theta, usize::MAX)
    }

    /// As [`Problem::ray`], reporting failures against mesh sample `index`.
    pub(crate) fn ray_indexed(&self, c: usize, theta: f64, index: usize) -> Result<Ray, Error> {
        let frame = self.mesh.curves[c].frame(theta);
        let (cv, tau) = self.characteristic_vector_with_index(c, theta, index)?;
        let h = &self.scenario.hamiltonian;
        let (value, g1, g2) = self.scenario.data.eval(c, theta);
        let speed = frame.speed;
        let dspeed = frame.d1.dot(frame.d2) / speed;
        let dslope = g2 / speed - g1 * dspeed / (speed * speed);
        let dtau = (frame.d2 - tau * tau.dot(frame.d2)) / speed;
        // Differentiate <covector, tau> = slope and H(covector) = 1 along theta.
        let rows = Mat2::new(tau.x, tau.y, cv.velocity.x, cv.velocity.y);
        let rhs = crate::math::vec2(
            dslope - cv.covector.dot(dtau),
            -h.grad_x(frame.point, cv.covector).dot(frame.d1),
        );
        let d_covector = rows.solve(rhs).ok_or(Error::DegenerateVector)?;
        let d_velocity = h.hess_alpha(frame.point, cv.covector).mul_vec(d_covector)
            + h.hess_alpha_x(frame.point, cv.covector).mul_vec(frame.d1);
        let exit = self.scenario.chart.ray_exit(frame.point, cv.velocity, 1e-9);
        Ok(Ray {
            component: c,
            theta,
            origin: frame.point,
            velocity: cv.velocity,
            covector: cv.covector,
            d_origin: frame.d1,
            d_velocity,
            d_covector,
            value,
            exit,
        })
    }

    fn flow_rhs(&self, s: &FlowState) -> FlowState {
        let h = &self.scenario.hamiltonian;
        let haa = h.hess_alpha(s.x, s.a);
        let hax = h.hess_alpha_x(s.x, s.a);
        let hxx = h.hess_x(s.x, s.a);
        FlowState {
            x: h.grad_alpha(s.x, s.a),
            a: -h.grad_x(s.x, s.a),
            dx: hax.mul_vec(s.dx) + haa.mul_vec(s.da),
            da: -(hxx.mul_vec(s.dx) + hax.transpose().mul_vec(s.da)),
        }
    }

    fn rk4(&self, s: &FlowState, h: f64) -> FlowState {
        let k1 = self.flow_rhs(s);
        let k2 = self.flow_rhs(&s.axpy(&k1, 0.5 * h));
        let k3 = self.flow_rhs(&s.axpy(&k2, 0.5 * h));
        let k4 = self.flow_rhs(&s.axpy(&k3, h));
        FlowState {
            x: s.x + (k1.x + k2.x * 2.0 + k3.x * 2.0 + k4.x) * (h / 6.0),
            a: s.a + (k1.a + k2.a * 2.0 + k3.a * 2.0 + k4.a) * (h / 6.0),
            dx: s.dx + (k1.dx + k2.dx * 2.0 + k3.dx * 2.0 + k4.dx) * (h / 6.0),
            da: s.da + (k1.da + k2.da * 2.0 + k3.da * 2.0 + k4.da) * (h / 6.0),
        }
    }

    fn char_state(&self, t: f64, s: &FlowState) -> CharState {
        let v = self.scenario.hamiltonian.grad_alpha(s.x, s.a);
        CharState { t, position: s.x, momentum: s.a, jacobian: Mat2::from_cols(v, s.dx) }
    }

    fn initial_state(&self, c: usize, theta: f64) -> Result<(FlowState, f64), Error> {
        let ray = self.ray(c, theta)?;
        Ok((FlowState { x: ray.origin, a: ray.covector, dx: ray.d_origin, da: ray.d_covector }, ray.exit))
    }

    // Fixed-step RK4 on [0, t_max], stopping before the first step that
    // leaves the domain.
    fn integrate(&self, c: usize, theta: f64, t_max: f64, dt: f64) -> Result<(Vec<(f64, FlowState)>, bool), Error> {
        if !(t_max > 0.0) || !(dt > 0.0) || !t_max.is_finite() {
            return Err(Error::InvalidArgument("flow needs finite t_max > 0 and dt > 0"));
        }
        let (mut s, _) = self.initial_state(c, theta)?;
        let chart = &self.scenario.chart;
        let mut out = alloc::vec![(0.0, s)];
        let mut t = 0.0;
        let mut truncated = false;
        let steps = libm::ceil(t_max / dt - 1e-9) as usize;
        for k in 1..=steps {
            let target = if k == steps { t_max } else { k as f64 * dt };
            let next = self.rk4(&s, target - t);
            if !chart.contains(next.x) {
                truncated = true;
                break;
            }
            s = next;
            t = target;
            out.push((t, s));
        }
        Ok((out, truncated))
    }

    /// Integrates Hamilton's equations and the variational system with
    /// fixed-step RK4 on `[0, t_max]`, stopping early if the trajectory
    /// leaves the domain.
    pub fn flow(&self, c: usize, theta: f64, t_max: f64, dt: f64) -> Result<Trajectory, Error> {
        let (raw, truncated) = self.integrate(c, theta, t_max, dt)?;
        let states: Vec<CharState> = raw.iter().map(|(t, s)| self.char_state(*t, s)).collect();
        let det_history = states.iter().map(|s| s.jacobian.det()).collect();
        Ok(Trajectory { component: c, theta, states, det_history, truncated })
    }

    /// `F(t, theta)` by RK4 integration.
    pub fn exponential(&self, t: f64, c: usize, theta: f64) -> Result<Vec2, Error> {
        Ok(self.flow_state_at(t, c, theta)?.position)
    }

    /// The full state at time `t`, integrated with the scenario step.
    pub fn flow_state_at(&self, t: f64, c: usize, theta: f64) -> Result<CharState, Error> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument("time must be finite and non-negative"));
        }
        let (mut s, exit) = self.initial_state(c, theta)?;
        if t > exit {
            return Err(Error::BeyondExit { exit });
        }
        let dt = self.scenario.tolerances.dt;
        let mut now = 0.0;
        while now < t {
            let h = dt.min(t - now);
            s = self.rk4(&s, h);
            now += h;
        }
        Ok(self.char_state(t, &s))
    }

    /// Zeros of `det dF(t, theta)` on `(0, min(t_max, exit))`, located by
    /// sign changes (bisection) and by small local minima of `|det|`.
    /// Characteristics that never exit (torus) are searched only up to the
    /// length of the longest minimizing characteristic.
    pub fn conjugate_times(&self, c: usize, theta: f64, t_max: f64) -> Result<ConjugateRecord, Error> {
        let tol = self.scenario.tolerances;
        let (_, exit) = self.initial_state(c, theta)?;
        let horizon = t_max.min(exit).min(self.cache.max_length);
        let mut points = Vec::new();
        if !(horizon > 0.0) {
            return Ok(ConjugateRecord { component: c, theta, points });
        }
        let (raw, _) = self.integrate(c, theta, horizon, tol.dt)?;
        let det_from = |k: usize, tau: f64| -> Mat2 {
            let (_, s) = raw[k];
            let s = if tau > 0.0 { self.rk4(&s, tau) } else { s };
            self.char_state(0.0, &s).jacobian
        };
        let order_of = |j: Mat2| -> usize {
            let (s1, s2) = j.singular_values();
            if s1 == 0.0 {
                2
            } else {
                usize::from(s2 <= tol.sigma_tol * s1)
            }
        };
        let det: Vec<f64> = (0..raw.len()).map(|k| det_from(k, 0.0).det()).collect();
        let scale = det.iter().fold(0.0_f64, |m, d| m.max(fabs(*d))).max(1e-300);
        for k in 1..det.len() {
            let (a, b) = (det[k - 1], det[k]);
            let span = raw[k].0 - raw[k - 1].0;
            if a != 0.0 && (b == 0.0 || (a < 0.0) != (b < 0.0)) {
                let tau = crate::math::bracketed_root(|x| det_from(k - 1, x).det(), 0.0, span, tol.bisection_tol);
                let order = order_of(det_from(k - 1, tau)).max(1);
                points.push(ConjugatePoint { t: raw[k - 1].0 + tau, order, tangential: false });
            } else if k + 1 < det.len() {
                let (m0, m1, m2) = (fabs(a), fabs(b), fabs(det[k + 1]));
                let same_sign = (a < 0.0) == (det[k + 1] < 0.0);
                if m1 <= m0 && m1 < m2 && m1 < 1e-9 * scale && same_sign {
                    let span2 = raw[k + 1].0 - raw[k - 1].0;
                    let (tau, _) = crate::math::golden_min(|x| fabs(det_from(k - 1, x).det()), 0.0, span2, 1e-12);
                    let order = order_of(det_from(k - 1, tau)).max(1);
                    points.push(ConjugatePoint { t: raw[k - 1].0 + tau, order, tangential: true });
                }
            }
        }
        Ok(ConjugateRecord { component: c, theta, points })
    }

    /// Degree of vanishing of `det dF(., theta)` at `t`, from finite
    /// differences of a local polynomial fit.
    pub fn det_vanishing_order(&self, c: usize, theta: f64, t: f64, step: f64) -> Result<usize, Error> {
        let mut vals = [0.0; 5];
        for (j, v) in vals.iter_mut().enumerate() {
            let tj = t + step * (j as f64 - 2.0);
            *v = self.flow_state_at(tj, c, theta)?.jacobian.det();
        }
        let d0 = vals[2];
        let d1 = (vals[3] - vals[1]) / (2.0 * step);
        let d2 = (vals[3] - 2.0 * vals[2] + vals[1]) / (step * step);
        let d3 = (vals[4] - 2.0 * vals[3] + 2.0 * vals[1] - vals[0]) / (2.0 * step * step * step);
        let scale = vals.iter().fold(0.0_f64, |m, v| m.max(fabs(*v))).max(1e-300) / step;
        if fabs(d0) > 1e-6 * scale * step {
            Ok(0)
        } else if fabs(d1) > 1e-6 * scale {
            Ok(1)
        } else if fabs(d2) > 1e-6 * scale / step {
            Ok(2)
        } else if fabs(d3) > 0.0 {
            Ok(3)
        } else {
            Ok(4)
        }
    }

    /// `lambda_j` at every mesh sample of component `c` (infinite where absent).
    pub fn lambda_profile(&self, j: usize, c: usize) -> Result<Vec<f64>, Error> {
        self.mesh.components[c]
            .iter()
            .map(|s| Ok(self.conjugate_times(c, s.theta, f64::INFINITY)?.lambda(j)))
            .collect()
    }

    /// Lipschitz constant of `lambda_j` over every component, restricted to
    /// samples where it is finite.
    pub fn lambda_lipschitz_estimate(&self, j: usize) -> Result<LipschitzEstimate, Error> {
        let mut worst = LipschitzEstimate { constant: 0.0, coverage: 0.0, samples: 0 };
        let mut finite = 0.0;
        for c in 0..self.components() {
            let values = self.lambda_profile(j, c)?;
            let gaps: Vec<f64> = (0..values.len()).map(|k| self.mesh.gap(c, k)).collect();
            let est = LipschitzEstimate::from_values(&values, &gaps);
            worst.constant = worst.constant.max(est.constant);
            finite += est.coverage * est.samples as f64;
            worst.samples += est.samples;
        }
        worst.coverage = finite / worst.samples.max(1) as f64;
        Ok(worst)
    }
}
