//! Lax-Oleinik evaluation of the viscosity solution and extraction of its
//! singular set along the characteristics.

use alloc::vec::Vec;

use super::locus::{CandidateLocus, Chain, Partner, Provenance};
use crate::exec::{Executor, Sequential};
use crate::math::{angle_between, golden_min, vec2, Vec2};
use crate::scenario::Problem;
use crate::Error;

/// Lattice translate of the boundary (always zero on planar charts).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Lift(pub i32, pub i32);

impl Lift {
    pub const ZERO: Lift = Lift(0, 0);

    pub fn shift(self) -> Vec2 {
        vec2(self.0 as f64, self.1 as f64)
    }
}

/// A boundary component together with the lattice translate it is seen through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SourceKey {
    pub component: usize,
    pub lift: Lift,
}

/// A (local) minimizer of the Lax-Oleinik functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimizer {
    pub key: SourceKey,
    pub theta: f64,
    /// Boundary point, translated by the lift.
    pub origin: Vec2,
    /// `phi(p - origin)`.
    pub length: f64,
    /// `g(theta) + <a, m> + length`.
    pub value: f64,
}

impl Minimizer {
    /// Unit incoming velocity at the evaluation point.
    pub fn direction(&self, p: Vec2) -> Vec2 {
        (p - self.origin) / self.length
    }
}

/// `u(p)` together with its near-minimizers.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub point: Vec2,
    pub value: f64,
    /// Minimizers within `value_gap` of the minimum, best first.
    pub minimizers: Vec<Minimizer>,
}

impl Evaluation {
    /// Whether two minimizers arrive from directions more than `dir_tol` apart.
    pub fn is_singular(&self, dir_tol: f64) -> bool {
        let p = self.point;
        self.minimizers.iter().enumerate().any(|(i, a)| {
            self.minimizers[i + 1..]
                .iter()
                .any(|b| angle_between(a.direction(p), b.direction(p)) > dir_tol)
        })
    }
}

impl Problem {
    /// Visits lattice translates in shells of growing radius, skipping those
    /// whose lower bound exceeds `*best + slack`. `visit` may lower `*best`.
    pub(crate) fn for_each_lift<F: FnMut(Lift, f64, &mut f64)>(&self, p: Vec2, best: &mut f64, slack: f64, mut visit: F) {
        let (source, radius) = match self.scenario.chart {
            crate::geometry::Chart::Torus { source, radius } => (source, radius),
            _ => {
                visit(Lift::ZERO, 0.0, best);
                return;
            }
        };
        let a = self.scenario.lattice_offset;
        let cache = &self.cache;
        let d = p - source;
        let (cx, cy) = (libm::round(d.x) as i32, libm::round(d.y) as i32);
        let bound = |m: Lift| -> f64 {
            let dist = ((p - source - m.shift()).norm() - radius).max(0.0);
            cache.g_min + a.dot(m.shift()) + cache.c_phi * dist
        };
        // Every translate in shell s or beyond is at least this far off.
        let centre_weight = a.dot(vec2(cx as f64, cy as f64));
        let growth = cache.c_phi - a.norm();
        let beyond = |s: i32| -> f64 {
            cache.g_min + centre_weight + growth * s as f64 - cache.c_phi * (0.7072 + radius)
        };
        const MAX_SHELL: i32 = 8;
        for shell in 0..=MAX_SHELL {
            let mut members: Vec<(f64, Lift)> = Vec::new();
            for i in -shell..=shell {
                for j in -shell..=shell {
                    if i.abs().max(j.abs()) == shell {
                        let m = Lift(cx + i, cy + j);
                        members.push((bound(m), m));
                    }
                }
            }
            members.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            for (lb, m) in members {
                if lb <= *best + slack {
                    visit(m, a.dot(m.shift()), best);
                }
            }
            if growth > 0.0 && beyond(shell + 1) > *best + slack {
                break;
            }
        }
    }

    fn lift_minima(&self, q: Vec2, c: usize, lift: Lift, weight: f64, best: &mut f64, slack: f64, out: &mut Vec<Minimizer>) {
        let comp = &self.mesh.components[c];
        let n = comp.len();
        let h = &self.scenario.hamiltonian;
        let curve = self.mesh.curves[c];
        let dtheta = self.mesh.dtheta();
        let lip = self.cache.lipschitz[c];
        let stride = self.cache.stride;
        let f = |k: usize| -> f64 {
            let s = &comp[k % n];
            s.value + weight + h.phi(q - s.frame.point)
        };
        // Coarse pass.
        let nc = n.div_ceil(stride);
        let mut coarse = Vec::with_capacity(nc);
        let mut best_c = f64::INFINITY;
        for j in 0..nc {
            let v = f(j * stride);
            best_c = best_c.min(v);
            coarse.push(v);
        }
        let coarse_margin = lip * dtheta * stride as f64 * 0.5;
        if best_c - coarse_margin > *best + slack {
            return;
        }
        let limit = best_c.min(*best + slack) + coarse_margin;
        // Fine pass around every coarse candidate.
        let mut marked = alloc::vec![false; n];
        for (j, v) in coarse.iter().enumerate() {
            if *v <= limit {
                let centre = (j * stride) as isize;
                for off in -(stride as isize)..=(stride as isize) {
                    marked[(centre + off).rem_euclid(n as isize) as usize] = true;
                }
            }
        }
        let mut fine: Vec<(usize, f64)> = Vec::new();
        let mut vals = alloc::vec![f64::NAN; n];
        let get = |k: usize, vals: &mut Vec<f64>| -> f64 {
            if vals[k].is_nan() {
                vals[k] = f(k);
            }
            vals[k]
        };
        let mut best_f = f64::INFINITY;
        for k in 0..n {
            if marked[k] {
                let v = get(k, &mut vals);
                best_f = best_f.min(v);
                fine.push((k, v));
            }
        }
        let fine_margin = lip * dtheta * 0.5;
        let limit = best_f.min(*best + slack) + fine_margin;
        let g = |theta: f64| -> f64 {
            self.scenario.data.value(c, theta) + weight + h.phi(q - curve.point(theta))
        };
        for (k, v) in fine {
            if v > limit {
                continue;
            }
            let prev = get((k + n - 1) % n, &mut vals);
            let next = get((k + 1) % n, &mut vals);
            if v > prev || v > next {
                continue;
            }
            let theta_k = comp[k].theta;
            let (theta, value) = golden_min(g, theta_k - dtheta, theta_k + dtheta, 1e-9);
            let (theta, value) = if value <= v { (theta, value) } else { (theta_k, v) };
            if value <= *best + slack {
                let origin = curve.point(theta) + lift.shift();
                let length = h.phi(q + lift.shift() - origin);
                out.push(Minimizer { key: SourceKey { component: c, lift }, theta, origin, length, value });
                if value < *best {
                    *best = value;
                }
            }
        }
    }

    /// `u(p)` and its near-minimizers within `gap`, without domain checks.
    pub(crate) fn evaluate_with_gap(&self, p: Vec2, gap: f64) -> Evaluation {
        let mut best = f64::INFINITY;
        let mut found = Vec::new();
        self.for_each_lift(p, &mut best, gap, |lift, weight, best| {
            let q = p - lift.shift();
            for c in 0..self.components() {
                self.lift_minima(q, c, lift, weight, best, gap, &mut found);
            }
        });
        found.retain(|m| m.value <= best + gap);
        found.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.key.cmp(&b.key)).then(a.theta.total_cmp(&b.theta)));
        let mut minimizers: Vec<Minimizer> = Vec::with_capacity(found.len());
        for m in found {
            let dup = minimizers.iter().any(|o| {
                o.key == m.key && crate::math::fabs(crate::math::wrap_angle(o.theta - m.theta)) < 1e-7
            });
            if !dup {
                minimizers.push(m);
            }
        }
        Evaluation { point: p, value: best, minimizers }
    }

    /// Lax-Oleinik evaluation with the scenario's value gap.
    pub fn evaluate(&self, p: Vec2) -> Result<Evaluation, Error> {
        if !p.is_finite() {
            return Err(Error::InvalidArgument("non-finite point"));
        }
        if !self.scenario.chart.contains(p) {
            return Err(Error::OutsideDomain);
        }
        Ok(self.evaluate_with_gap(p, self.scenario.tolerances.value_gap))
    }

    /// `u(p) = min_q d(q, p) + g(q)`, with lattice translates on the torus.
    pub fn viscosity_solution(&self, p: Vec2) -> Result<f64, Error> {
        Ok(self.evaluate(p)?.value)
    }

    /// Whether the Lax-Oleinik minimum at `p` is attained from two
    /// directions more than `dir_tol` apart.
    pub fn is_singular_point(&self, p: Vec2) -> Result<bool, Error> {
        Ok(self.evaluate(p)?.is_singular(self.scenario.tolerances.dir_tol))
    }

    #[inline]
    fn u_fast(&self, p: Vec2) -> f64 {
        self.evaluate_with_gap(p, 0.0).value
    }

    /// Cut time of the characteristic from `(c, theta)`: the first time its
    /// value `t + g(z)` exceeds `u`. `None` if it reaches the boundary uncut.
    pub fn cut_time(&self, c: usize, theta: f64) -> Result<Option<f64>, Error> {
        let ray = self.ray(c, theta)?;
        Ok(self.cut_time_of(&ray))
    }

    fn cut_time_of(&self, ray: &crate::characteristics::Ray) -> Option<f64> {
        const THRESHOLD: f64 = 1e-11;
        let tol = self.scenario.tolerances.bisection_tol;
        let chart = &self.scenario.chart;
        let cap = self.cache.max_length.min(ray.exit);
        let mut hi = if cap == ray.exit { ray.exit * (1.0 - 1e-9) } else { cap };
        while hi > 0.0 && !chart.contains(ray.at(hi)) {
            hi *= 1.0 - 1e-9;
        }
        let gap = |t: f64| t + ray.value - self.u_fast(ray.at(t));
        if !(gap(hi) > THRESHOLD) {
            return None;
        }
        let mut lo = 0.0;
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if gap(mid) > THRESHOLD {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// The locus point contributed by the characteristic from `(c, theta)`:
    /// its cut point, or its first conjugate point if that comes first.
    pub fn cut_vertex(&self, c: usize, theta: f64) -> Result<Option<(Vec2, Provenance)>, Error> {
        let ray = self.ray(c, theta)?;
        let Some(cut) = self.cut_time_of(&ray) else {
            return Ok(None);
        };
        let lambda = ray.first_conjugate_time().unwrap_or(f64::INFINITY);
        let t = cut.min(lambda);
        let p = ray.at(t);
        let tol = self.scenario.tolerances;
        let clamped = lambda <= cut + 2.0 * tol.bisection_tol;
        let eval = self.evaluate_with_gap(p, tol.value_gap);
        let own = ray.velocity;
        let partner = eval
            .minimizers
            .iter()
            .filter(|m| m.length > 0.0 && angle_between(m.direction(p), own) > tol.dir_tol)
            .min_by(|a, b| a.value.total_cmp(&b.value))
            .map(|m| Partner { key: m.key, theta: m.theta });
        Ok(Some((p, Provenance { component: c, theta, t, clamped, partner })))
    }
}

// Every cleave vertex is found twice, once from each side. Keeps the side
// whose partner comes later in a fixed order, so that each piece of the locus
// is a single polyline; unpartnered and conjugate vertices are always kept.
fn one_side(points: Vec<Vec2>, prov: Vec<Provenance>, closed: bool) -> Vec<Chain> {
    let n = points.len();
    let keep: Vec<bool> = prov
        .iter()
        .map(|p| match p.partner {
            None => true,
            Some(_) if p.clamped => true,
            Some(q) if q.key.lift != Lift::ZERO => q.key.lift > Lift::ZERO,
            Some(q) => (q.key.component, q.theta) > (p.component, p.theta),
        })
        .collect();
    let whole = Chain::with_provenance(points.clone(), closed, prov.clone());
    if whole.len() <= 1 || keep.iter().all(|k| *k) {
        return alloc::vec![whole];
    }
    // Start right after a dropped vertex so no run wraps past the end.
    let start = if closed { (0..n).find(|k| !keep[*k]).map_or(0, |k| (k + 1) % n) } else { 0 };
    let mut out = Vec::new();
    let mut run = Vec::new();
    let mut sides = Vec::new();
    for s in 0..n {
        let k = (start + s) % n;
        if keep[k] {
            run.push(points[k]);
            sides.push(prov[k]);
        } else if !run.is_empty() {
            out.push(Chain::with_provenance(core::mem::take(&mut run), false, core::mem::take(&mut sides)));
        }
    }
    if !run.is_empty() {
        out.push(Chain::with_provenance(run, false, sides));
    }
    out
}

/// Extracts the closure of the singular set of `u` as polylines carrying
/// the provenance of their vertices, sequentially.
pub fn singular_set(problem: &Problem) -> Result<CandidateLocus, Error> {
    singular_set_with(problem, &Sequential)
}

/// As [`singular_set`], distributing the per-characteristic work.
pub fn singular_set_with<E: Executor>(problem: &Problem, exec: &E) -> Result<CandidateLocus, Error> {
    let comps = problem.components();
    let n = problem.mesh.samples_per_component();
    let raw: Vec<Result<Option<(Vec2, Provenance)>, Error>> =
        exec.map(comps * n, |i| problem.cut_vertex(i / n, problem.mesh.components[i / n][i % n].theta));
    let mut per_comp: Vec<Vec<(Vec2, Provenance)>> = alloc::vec![Vec::new(); comps];
    for (i, r) in raw.into_iter().enumerate() {
        if let Some(v) = r? {
            per_comp[i / n].push(v);
        }
    }
    // Partner switches between consecutive samples are refined in theta.
    let mut tasks = Vec::new();
    for (c, verts) in per_comp.iter().enumerate() {
        let m = verts.len();
        for k in 0..m {
            let (a, b) = (&verts[k].1, &verts[(k + 1) % m].1);
            if let (Some(pa), Some(pb)) = (a.partner, b.partner) {
                if pa.key != pb.key {
                    let mut tb = b.theta;
                    if tb <= a.theta {
                        tb += crate::math::TAU;
                    }
                    tasks.push((c, k, a.theta, tb, pa.key));
                }
            }
        }
    }
    let tol = problem.scenario.tolerances.bisection_tol;
    let refined: Vec<Result<Vec<(Vec2, Provenance)>, Error>> = exec.map(tasks.len(), |i| {
        let (c, _, mut lo, mut hi, key) = tasks[i];
        let mut lo_v = None;
        let mut hi_v = None;
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            match problem.cut_vertex(c, mid)? {
                Some(v) if v.1.partner.map(|p| p.key) == Some(key) => {
                    lo = mid;
                    lo_v = Some(v);
                }
                v => {
                    hi = mid;
                    hi_v = v;
                }
            }
        }
        Ok(lo_v.into_iter().chain(hi_v).collect())
    });
    let mut inserts: Vec<Vec<Vec<(Vec2, Provenance)>>> = per_comp.iter().map(|v| alloc::vec![Vec::new(); v.len()]).collect();
    for (task, r) in tasks.iter().zip(refined) {
        inserts[task.0][task.1] = r?;
    }
    let mut chains = Vec::new();
    for (c, verts) in per_comp.into_iter().enumerate() {
        if verts.is_empty() {
            continue;
        }
        let mut points = Vec::new();
        let mut prov = Vec::new();
        for (k, v) in verts.into_iter().enumerate() {
            points.push(v.0);
            prov.push(v.1);
            for extra in core::mem::take(&mut inserts[c][k]) {
                points.push(extra.0);
                prov.push(extra.1);
            }
        }
        chains.extend(one_side(points, prov, true));
    }
    Ok(CandidateLocus::new(chains, problem.scenario.chart.is_periodic()))
}
