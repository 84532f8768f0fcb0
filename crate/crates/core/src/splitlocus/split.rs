//! Characteristics stopped at a candidate locus: hitting times, preimages,
//! limit vectors, the associated function `h`, and the split / split-locus /
//! balanced predicates.

use alloc::vec::Vec;

use super::locus::CandidateLocus;
use super::solution::{Lift, SourceKey};
use crate::characteristics::LipschitzEstimate;
use crate::exec::{Executor, Sequential};
use crate::math::{angle_between, bracketed_root, Vec2};
use crate::scenario::Problem;
use crate::Error;

/// One characteristic reaching a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub key: SourceKey,
    pub theta: f64,
    pub t: f64,
    /// Launch point, translated by the lift.
    pub origin: Vec2,
    /// Velocity (unit for the Finsler norm).
    pub velocity: Vec2,
    /// `t + g(z) + <a, m>`.
    pub value: f64,
    /// `t + g(z)` with every offset removed.
    pub base_value: f64,
}

/// `Q_p`: all admissible arrivals at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct PreimageSet {
    pub point: Vec2,
    pub arrivals: Vec<Arrival>,
    /// A whole arc of boundary samples reaches the point.
    pub continuum: bool,
}

/// One cluster of incoming directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitVector {
    pub direction: Vec2,
    pub multiplicity: usize,
    /// Some member arrives at a conjugate point.
    pub conjugate: bool,
    /// Largest `dim ker dF` among the members.
    pub order: usize,
    /// The member's value `t + g(z) + <a, m>`.
    pub value: f64,
    /// The member's value with offsets removed.
    pub base_value: f64,
    pub key: SourceKey,
}

/// `R_p`, clustered with angular radius `cluster_tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitSet {
    pub point: Vec2,
    pub vectors: Vec<LimitVector>,
    pub continuum: bool,
}

impl LimitSet {
    /// Number of distinct limit vectors; a continuum counts as unbounded.
    pub fn count(&self) -> usize {
        if self.continuum {
            usize::MAX
        } else {
            self.vectors.len()
        }
    }
}

/// Hitting time of one characteristic with the locus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoSample {
    /// First hit, or the exit time if the characteristic misses the locus.
    pub rho: f64,
    pub hit: bool,
    pub exit: f64,
}

/// Value of `h` at a point.
#[derive(Debug, Clone, PartialEq)]
pub enum HValue {
    /// Off the locus: the unique admissible arrival.
    Unique(f64),
    /// On the locus: one value per limit vector.
    Sides(Vec<f64>),
}

/// Grid point covered a wrong number of times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageWitness {
    pub point: Vec2,
    pub arrivals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitReport {
    pub passed: bool,
    pub checked: usize,
    /// Grid points within `match_tol` of the locus.
    pub skipped: usize,
    pub failures: usize,
    pub witness: Option<CoverageWitness>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitLocusReport {
    pub passed: bool,
    pub split: SplitReport,
    pub samples: usize,
    /// Samples with at least two limit vectors.
    pub multi: usize,
    pub dense_radius: f64,
    /// A sample farther than `dense_radius` from every multi-arrival sample.
    pub witness: Option<Vec2>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalancedWitness {
    pub point: Vec2,
    /// Approach direction `v` (the sequence is `p - eps v`).
    pub direction: Vec2,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalancedReport {
    pub passed: bool,
    pub split_locus: SplitLocusReport,
    pub checked: usize,
    /// Samples exempt from the directional test (continuum of arrivals).
    pub exempt: usize,
    pub worst: f64,
    pub witness: Option<BalancedWitness>,
}

impl BalancedReport {
    /// A point demonstrating failure, from whichever check failed first.
    pub fn witness_point(&self) -> Option<Vec2> {
        if let Some(w) = self.split_locus.split.witness {
            return Some(w.point);
        }
        if let Some(p) = self.split_locus.witness {
            return Some(p);
        }
        self.witness.map(|w| w.point)
    }
}

// Raw arrivals of component `c` seen through `lift`, admitted by `admit`.
fn lift_arrivals<A: FnMut(usize, f64, f64, f64) -> bool>(
    problem: &Problem,
    p: Vec2,
    c: usize,
    lift: Lift,
    weight: f64,
    admit: &mut A,
    out: &mut Vec<Arrival>,
) -> bool {
    let q = p - lift.shift();
    let rays = &problem.rays[c];
    let n = rays.len();
    let f: Vec<(f64, f64, f64)> = rays
        .iter()
        .map(|r| {
            let w = q - r.origin;
            (r.velocity.cross(w), r.velocity.dot(w), w.norm_sq() * r.velocity.norm_sq())
        })
        .collect();
    let is_zero = |k: usize| f[k].0 * f[k].0 <= 1e-26 * f[k].2 && f[k].1 > 0.0;
    let zeros = (0..n).filter(|k| is_zero(*k)).count();
    let continuum = zeros >= 8;
    let mut roots: Vec<f64> = Vec::new();
    let dtheta = problem.mesh.dtheta();
    for k in 0..n {
        if is_zero(k) {
            roots.push(problem.mesh.components[c][k].theta);
            continue;
        }
        let j = (k + 1) % n;
        if is_zero(j) {
            continue;
        }
        let (a, b) = (f[k].0, f[j].0);
        if (a < 0.0) == (b < 0.0) || (f[k].1 <= 0.0 && f[j].1 <= 0.0) {
            continue;
        }
        let lo = problem.mesh.components[c][k].theta;
        let hi = lo + dtheta;
        let cross_at = |theta: f64| -> f64 {
            match problem.launch(c, theta) {
                Ok((z, v)) => v.cross(q - z),
                Err(_) => f64::NAN,
            }
        };
        roots.push(bracketed_root(cross_at, lo, hi, 1e-14));
    }
    for theta in roots {
        let Ok((z, v)) = problem.launch(c, theta) else { continue };
        let w = q - z;
        let t = w.dot(v) / v.norm_sq();
        if !(t > 0.0) || (z + v * t).distance(q) > 1e-7 * (1.0 + t) {
            continue;
        }
        if admit(c, theta, t, weight) {
            let g = problem.scenario.data.value(c, theta);
            let base_value = t + g - problem.scenario.data.offsets[c];
            let value = t + g + weight;
            out.push(Arrival { key: SourceKey { component: c, lift }, theta, t, origin: z + lift.shift(), velocity: v, value, base_value });
        }
    }
    continuum
}

impl Problem {
    /// Launch point and velocity of the characteristic from `(c, theta)`.
    pub(crate) fn launch(&self, c: usize, theta: f64) -> Result<(Vec2, Vec2), Error> {
        let cv = self.characteristic_vector(c, theta)?;
        Ok((self.mesh.curves[c].point(theta), cv.velocity))
    }

    /// `min { t + g(z) : F(t, z) = p }` over all characteristics (up to their
    /// exit) reaching `p`.
    pub fn minimal_selection(&self, p: Vec2) -> Result<f64, Error> {
        if !self.scenario.chart.contains(p) {
            return Err(Error::OutsideDomain);
        }
        let mut best = f64::INFINITY;
        let mut found = Vec::new();
        self.for_each_lift(p, &mut best, 0.0, |lift, weight, best| {
            for c in 0..self.components() {
                let mut admit = |c: usize, theta: f64, t: f64, _w: f64| {
                    let exit = self.scenario.chart.ray_exit(self.mesh.curves[c].point(theta), self.launch(c, theta).map(|x| x.1).unwrap_or(Vec2::ZERO), 1e-12);
                    t <= exit * (1.0 + 1e-12)
                };
                found.clear();
                lift_arrivals(self, p, c, lift, weight, &mut admit, &mut found);
                for a in &found {
                    *best = best.min(a.value);
                }
            }
        });
        if best.is_finite() {
            Ok(best)
        } else {
            Err(Error::NoPreimage)
        }
    }
}

/// A problem paired with a candidate locus: the characteristics are stopped
/// at their first hit with the locus.
#[derive(Debug, Clone)]
pub struct SplitContext<'a> {
    pub problem: &'a Problem,
    pub locus: &'a CandidateLocus,
    rho: Vec<Vec<RhoSample>>,
    reach: f64,
}

const CLOSURE_STEP: f64 = 1e-7;
const STRICT_ARRIVAL: f64 = 1e-12;

impl<'a> SplitContext<'a> {
    pub fn new(problem: &'a Problem, locus: &'a CandidateLocus) -> Self {
        Self::new_with(problem, locus, &Sequential)
    }

    pub fn new_with<E: Executor>(problem: &'a Problem, locus: &'a CandidateLocus, exec: &E) -> Self {
        let mut ctx = SplitContext { problem, locus, rho: Vec::new(), reach: 0.0 };
        let n = problem.mesh.samples_per_component();
        let flat = exec.map(problem.components() * n, |i| {
            let ray = &problem.rays[i / n][i % n];
            ctx.rho_along(ray.origin, ray.velocity, ray.exit)
        });
        ctx.rho = flat.chunks(n).map(|c| c.to_vec()).collect();
        let longest = ctx.rho.iter().flatten().map(|r| r.rho).filter(|r| r.is_finite()).fold(0.0, f64::max);
        ctx.reach = (longest * 1.1 + 0.05) * problem.cache.speed_max;
        ctx
    }

    fn rho_along(&self, z: Vec2, v: Vec2, exit: f64) -> RhoSample {
        let t_max = if exit.is_finite() { exit } else { 2.0 * self.problem.cache.max_length };
        match self.locus.first_hit(z, v, 1e-12, t_max) {
            Some(t) => RhoSample { rho: t, hit: true, exit },
            None => RhoSample { rho: t_max, hit: false, exit },
        }
    }

    /// `rho_S` at the mesh samples, per component.
    pub fn rho_samples(&self) -> &[Vec<RhoSample>] {
        &self.rho
    }

    /// `rho_S(theta)` on component `c`.
    pub fn rho(&self, c: usize, theta: f64) -> Result<RhoSample, Error> {
        let (z, v) = self.problem.launch(c, theta)?;
        let exit = self.problem.scenario.chart.ray_exit(z, v, 1e-12);
        Ok(self.rho_along(z, v, exit))
    }

    // Upper limit of rho at theta (closure of the stopped domain).
    fn rho_closure(&self, c: usize, theta: f64) -> f64 {
        [theta - CLOSURE_STEP, theta, theta + CLOSURE_STEP]
            .iter()
            .filter_map(|th| self.rho(c, *th).ok())
            .map(|r| r.rho)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Lipschitz constant of `rho_S` over the mesh where the locus is hit.
    pub fn rho_lipschitz_estimate(&self) -> LipschitzEstimate {
        let mut worst = LipschitzEstimate { constant: 0.0, coverage: 0.0, samples: 0 };
        let mut finite = 0.0;
        for (c, row) in self.rho.iter().enumerate() {
            let values: Vec<f64> = row.iter().map(|r| if r.hit { r.rho } else { f64::INFINITY }).collect();
            let gaps: Vec<f64> = (0..values.len()).map(|k| self.problem.mesh.gap(c, k)).collect();
            let est = LipschitzEstimate::from_values(&values, &gaps);
            worst.constant = worst.constant.max(est.constant);
            finite += est.coverage * est.samples as f64;
            worst.samples += est.samples;
        }
        worst.coverage = finite / worst.samples.max(1) as f64;
        worst
    }

    /// `Q_p`: characteristics reaching `p` no later than their hitting time.
    pub fn preimages(&self, p: Vec2) -> PreimageSet {
        self.preimages_within(p, self.problem.scenario.tolerances.arrival_tol)
    }

    /// `Q_p` with arrivals admitted up to `tol` past the hitting time.
    pub fn preimages_within(&self, p: Vec2, tol: f64) -> PreimageSet {
        let problem = self.problem;
        let mut arrivals = Vec::new();
        let mut continuum = false;
        let mut lifts: Vec<(Lift, f64)> = Vec::new();
        match problem.scenario.chart {
            crate::geometry::Chart::Torus { source, radius } => {
                let d = p - source;
                let (cx, cy) = (libm::round(d.x) as i32, libm::round(d.y) as i32);
                let span = libm::ceil(self.reach + radius) as i32 + 1;
                for i in -span..=span {
                    for j in -span..=span {
                        let m = Lift(cx + i, cy + j);
                        if (p - source - m.shift()).norm() - radius <= self.reach {
                            lifts.push((m, problem.scenario.lattice_offset.dot(m.shift())));
                        }
                    }
                }
            }
            _ => lifts.push((Lift::ZERO, 0.0)),
        }
        let mut admit = |c: usize, theta: f64, t: f64, _w: f64| {
            let Ok(r) = self.rho(c, theta) else { return false };
            t <= r.rho.min(r.exit) + tol || t <= self.rho_closure(c, theta).min(r.exit) + tol
        };
        for (lift, weight) in lifts {
            for c in 0..problem.components() {
                continuum |= lift_arrivals(problem, p, c, lift, weight, &mut admit, &mut arrivals);
            }
        }
        arrivals.sort_by(|a, b| a.key.cmp(&b.key).then(a.theta.total_cmp(&b.theta)));
        PreimageSet { point: p, arrivals, continuum }
    }

    /// `R_p`: incoming directions at `p`, clustered.
    pub fn limit_vectors(&self, p: Vec2) -> LimitSet {
        let q = self.preimages(p);
        self.cluster(&q)
    }

    pub(crate) fn cluster(&self, q: &PreimageSet) -> LimitSet {
        let tol = self.problem.scenario.tolerances;
        let mut items: Vec<(f64, &Arrival)> = q.arrivals.iter().map(|a| (a.velocity.angle(), a)).collect();
        items.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = items.len();
        let mut vectors = Vec::new();
        if n > 0 {
            // Start a cluster after the widest cyclic gap so none wraps.
            let mut start = 0;
            let mut widest = -1.0;
            for k in 0..n {
                let next = if k + 1 < n { items[k + 1].0 } else { items[0].0 + crate::math::TAU };
                let gap = next - items[k].0;
                if gap > widest {
                    widest = gap;
                    start = (k + 1) % n;
                }
            }
            let mut groups: Vec<Vec<&Arrival>> = alloc::vec![alloc::vec![items[start].1]];
            for s in 1..n {
                let k = (start + s) % n;
                let prev = (start + s - 1) % n;
                let a = items[prev].1.velocity;
                let b = items[k].1.velocity;
                if angle_between(a, b) > tol.cluster_tol {
                    groups.push(Vec::new());
                }
                groups.last_mut().unwrap().push(items[k].1);
            }
            for g in groups {
                let rep = *g.iter().min_by(|a, b| a.value.total_cmp(&b.value)).unwrap();
                let mut conjugate = false;
                let mut order = 0;
                for a in &g {
                    if let Ok(ray) = self.problem.ray(a.key.component, a.theta) {
                        let (s1, s2) = ray.jacobian(a.t).singular_values();
                        if s2 <= tol.sigma_tol * s1 {
                            conjugate = true;
                            order = order.max(if s1 == 0.0 { 2 } else { 1 });
                        }
                    }
                }
                vectors.push(LimitVector {
                    direction: rep.velocity,
                    multiplicity: g.len(),
                    conjugate,
                    order,
                    value: rep.value,
                    base_value: rep.base_value,
                    key: rep.key,
                });
            }
        }
        LimitSet { point: q.point, vectors, continuum: q.continuum }
    }

    /// `h(p) = t + g(z)` from the admissible arrival(s) at `p`.
    pub fn h_value(&self, p: Vec2) -> Result<HValue, Error> {
        if !self.problem.scenario.chart.contains(p) {
            return Err(Error::OutsideDomain);
        }
        let on_locus = self.locus.distance(p) <= self.problem.scenario.tolerances.match_tol;
        let q = self.preimages(p);
        if on_locus {
            let r = self.cluster(&q);
            if r.vectors.is_empty() {
                return Err(Error::NoPreimage);
            }
            return Ok(HValue::Sides(r.vectors.iter().map(|v| v.value).collect()));
        }
        match q.arrivals.len() {
            0 => Err(Error::NoPreimage),
            1 => Ok(HValue::Unique(q.arrivals[0].value)),
            count => Err(Error::AmbiguousPreimage { count }),
        }
    }

    /// The audit grid: cell centres of an `n x n` grid over the chart bounds
    /// lying inside the domain.
    pub fn audit_grid(&self) -> Vec<Vec2> {
        audit_grid(self.problem, self.problem.scenario.tolerances.audit_grid)
    }

    /// Every audit-grid point off the locus is reached by exactly one
    /// admissible characteristic.
    pub fn is_split(&self) -> SplitReport {
        self.is_split_with(&Sequential)
    }

    pub fn is_split_with<E: Executor>(&self, exec: &E) -> SplitReport {
        let tol = self.problem.scenario.tolerances;
        if self.locus.fills_domain {
            return SplitReport { passed: true, checked: 0, skipped: 0, failures: 0, witness: None };
        }
        let grid = self.audit_grid();
        let counts: Vec<Option<usize>> = exec.map(grid.len(), |i| {
            let p = grid[i];
            if self.locus.distance(p) <= tol.match_tol {
                return None;
            }
            let q = self.preimages(p);
            Some(if q.continuum { usize::MAX } else { q.arrivals.len() })
        });
        let mut report = SplitReport { passed: true, checked: 0, skipped: 0, failures: 0, witness: None };
        for (p, c) in grid.iter().zip(counts) {
            match c {
                None => report.skipped += 1,
                Some(k) => {
                    report.checked += 1;
                    if k != 1 {
                        report.failures += 1;
                        if report.witness.is_none() {
                            report.witness = Some(CoverageWitness { point: *p, arrivals: k });
                        }
                    }
                }
            }
        }
        report.passed = report.failures == 0;
        report
    }

    fn sample_points(&self) -> Vec<Vec2> {
        if self.locus.fills_domain {
            self.audit_grid()
        } else {
            self.locus.vertices().map(|(_, _, p)| p).collect()
        }
    }

    /// Split, and the samples with at least two limit vectors are dense.
    pub fn is_split_locus(&self) -> SplitLocusReport {
        self.is_split_locus_with(&Sequential)
    }

    pub fn is_split_locus_with<E: Executor>(&self, exec: &E) -> SplitLocusReport {
        let split = self.is_split_with(exec);
        let samples = self.sample_points();
        let multi: Vec<bool> = exec.map(samples.len(), |i| self.limit_vectors(samples[i]).count() >= 2);
        let tol = self.problem.scenario.tolerances;
        let step = if self.locus.fills_domain {
            let (lo, hi) = self.problem.scenario.chart.bounds();
            (hi.x - lo.x).max(hi.y - lo.y) / tol.audit_grid as f64
        } else {
            self.locus.max_step()
        };
        let dense_radius = tol.dense_factor * step;
        let periodic = self.locus.periodic;
        let gap = |a: Vec2, b: Vec2| {
            let d = a - b;
            if periodic {
                crate::math::vec2(d.x - libm::round(d.x), d.y - libm::round(d.y)).norm()
            } else {
                d.norm()
            }
        };
        let anchors: Vec<Vec2> = samples.iter().zip(&multi).filter(|(_, m)| **m).map(|(p, _)| *p).collect();
        let mut witness = None;
        for (p, m) in samples.iter().zip(&multi) {
            if *m {
                continue;
            }
            if !anchors.iter().any(|a| gap(*a, *p) <= dense_radius) {
                witness = Some(*p);
                break;
            }
        }
        let passed = split.passed && witness.is_none() && !samples.is_empty();
        if witness.is_none() && samples.is_empty() {
            witness = None;
        }
        SplitLocusReport {
            passed,
            split,
            samples: samples.len(),
            multi: anchors.len(),
            dense_radius,
            witness,
        }
    }

    /// The directional balance test at every locus sample: approaching `p`
    /// along `p - eps v`, every incoming vector `X` satisfies
    /// `w_X(v) >= max { w_R(v) : R in R_p } - tol`.
    pub fn is_balanced(&self) -> BalancedReport {
        self.is_balanced_with(&Sequential)
    }

    pub fn is_balanced_with<E: Executor>(&self, exec: &E) -> BalancedReport {
        let split_locus = self.is_split_locus_with(exec);
        if !split_locus.passed {
            return BalancedReport { passed: false, split_locus, checked: 0, exempt: 0, worst: f64::INFINITY, witness: None };
        }
        let samples: Vec<(Vec2, Vec2)> = self
            .locus
            .chains
            .iter()
            .flat_map(|ch| (0..ch.len()).map(move |k| (ch.points[k], ch.tangent(k))))
            .collect();
        let results: Vec<Option<Option<BalancedWitness>>> = exec.map(samples.len(), |i| {
            let (p, tangent) = samples[i];
            self.balance_at(p, tangent)
        });
        let mut report = BalancedReport { passed: true, split_locus, checked: 0, exempt: 0, worst: f64::NEG_INFINITY, witness: None };
        for r in results {
            match r {
                None => report.exempt += 1,
                Some(w) => {
                    report.checked += 1;
                    if let Some(w) = w {
                        if w.violation > report.worst {
                            report.worst = w.violation;
                            report.witness = Some(w);
                        }
                    }
                }
            }
        }
        let tol = self.problem.scenario.tolerances.balanced_tol;
        report.passed = report.worst <= tol;
        if report.passed {
            report.witness = None;
        }
        report
    }

    /// Worst directional violation at one sample; `None` if exempt.
    pub fn balance_at(&self, p: Vec2, tangent: Vec2) -> Option<Option<BalancedWitness>> {
        let problem = self.problem;
        let tol = problem.scenario.tolerances;
        let h = &problem.scenario.hamiltonian;
        let r = self.limit_vectors(p);
        if r.continuum {
            return None;
        }
        let duals: Vec<Vec2> = r.vectors.iter().filter_map(|v| h.dual_one_form(p, v.direction).ok()).collect();
        let mut dirs: Vec<Vec2> = (0..8).map(|k| Vec2::from_angle(crate::math::TAU * k as f64 / 8.0)).collect();
        // Two-sided points: the exact tangent annihilates the jump of du,
        // which beats a difference quotient on unevenly spaced vertices.
        let tangent = match duals.as_slice() {
            [a, b] if (*a - *b).norm() > 0.0 => (*a - *b).perp().normalized(),
            _ => tangent,
        };
        if tangent.norm() > 0.0 {
            dirs.push(tangent);
            dirs.push(-tangent);
        }
        let mut worst: Option<BalancedWitness> = None;
        for v in dirs {
            let pi = p - v * tol.approach_eps;
            if !problem.scenario.chart.contains(pi) {
                continue;
            }
            let rhs = duals.iter().map(|w| w.dot(v)).fold(f64::NEG_INFINITY, f64::max);
            if !rhs.is_finite() {
                continue;
            }
            // Strict admission: the approach point must lie on the arrival's side.
            for a in self.preimages_within(pi, STRICT_ARRIVAL).arrivals {
                let Ok(w) = h.dual_one_form(pi, a.velocity) else { continue };
                let violation = rhs - w.dot(v);
                if worst.map_or(true, |x| violation > x.violation) {
                    worst = Some(BalancedWitness { point: p, direction: v, violation });
                }
            }
        }
        Some(worst)
    }
}

/// Cell centres of an `n x n` grid over the chart bounds, inside the domain.
pub fn audit_grid(problem: &Problem, n: usize) -> Vec<Vec2> {
    let (lo, hi) = problem.scenario.chart.bounds();
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let p = crate::math::vec2(
                lo.x + (hi.x - lo.x) * (i as f64 + 0.5) / n as f64,
                lo.y + (hi.y - lo.y) * (j as f64 + 0.5) / n as f64,
            );
            if problem.scenario.chart.contains(p) {
                out.push(p);
            }
        }
    }
    out
}
