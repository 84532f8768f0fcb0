//! Classification of locus points by their incoming vectors, the jump of
//! `h` across cleave components, and the current `T` carried by a locus.

use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exec::{Executor, Sequential};
use crate::math::{vec2, Vec2};
use crate::scenario::Problem;
use crate::splitlocus::{LimitSet, Provenance, SourceKey, SplitContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Cleave,
    DegenerateCleave,
    Edge,
    Crossing,
    Remainder,
}

impl Label {
    pub const ALL: [Label; 5] = [Label::Cleave, Label::DegenerateCleave, Label::Edge, Label::Crossing, Label::Remainder];

    pub fn name(self) -> &'static str {
        match self {
            Label::Cleave => "cleave",
            Label::DegenerateCleave => "degenerate-cleave",
            Label::Edge => "edge",
            Label::Crossing => "crossing",
            Label::Remainder => "remainder",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Tolerance on the singular values of the dual differences when deciding
/// the dimension of their affine span.
pub const DUAL_SPAN_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedPoint {
    pub point: Vec2,
    pub label: Label,
    /// `#R_p`; `usize::MAX` for a continuum.
    pub arrivals: usize,
    /// Conjugacy order per limit vector (0 when not conjugate).
    pub orders: Vec<usize>,
    /// Dimension of the affine span of the duals of `R_p`.
    pub dual_dim: usize,
    /// `h1 - h2` across a cleave point, ordered by incoming angle.
    pub jump: Option<f64>,
    pub diagnostic: Option<&'static str>,
}

/// Dimension (0, 1 or 2) of the affine span of `points`.
pub fn affine_dimension(points: &[Vec2], tol: f64) -> usize {
    let Some(&base) = points.first() else { return 0 };
    let diffs: Vec<Vec2> = points[1..].iter().map(|p| *p - base).collect();
    let scale = points.iter().map(|p| p.norm()).fold(1.0, f64::max);
    if diffs.iter().all(|d| d.norm() <= tol * scale) {
        return 0;
    }
    let spans_plane = diffs.iter().enumerate().any(|(i, a)| {
        diffs[i + 1..].iter().any(|b| libm::fabs(a.cross(*b)) > tol * a.norm() * b.norm().max(tol * scale))
    });
    if spans_plane {
        2
    } else {
        1
    }
}

/// Labels a point from its limit set.
pub fn classify_limits(problem: &Problem, r: &LimitSet) -> ClassifiedPoint {
    let h = &problem.scenario.hamiltonian;
    let mut out = ClassifiedPoint {
        point: r.point,
        label: Label::Remainder,
        arrivals: r.count(),
        orders: r.vectors.iter().map(|v| if v.conjugate { v.order.max(1) } else { 0 }).collect(),
        dual_dim: 0,
        jump: None,
        diagnostic: None,
    };
    let duals: Vec<Vec2> = r.vectors.iter().filter_map(|v| h.dual_one_form(r.point, v.direction).ok()).collect();
    out.dual_dim = affine_dimension(&duals, DUAL_SPAN_TOL);
    if r.continuum {
        out.diagnostic = Some("continuum of incoming vectors");
        return out;
    }
    let conjugate = out.orders.iter().filter(|o| **o > 0).count();
    let order_one = out.orders.iter().all(|o| *o <= 1);
    out.label = match r.vectors.len() {
        0 => {
            out.diagnostic = Some("no incoming vector resolved");
            Label::Remainder
        }
        1 if conjugate == 1 && order_one => Label::Edge,
        // Distinct characteristics arriving within the cluster tolerance,
        // e.g. cleave points just short of an edge.
        1 if conjugate == 0 && r.vectors[0].multiplicity >= 2 => {
            out.diagnostic = Some("incoming vectors closer than the cluster tolerance");
            Label::Remainder
        }
        2 if conjugate == 0 => {
            let (a, b) = (&r.vectors[0], &r.vectors[1]);
            out.jump = Some(a.base_value - b.base_value);
            Label::Cleave
        }
        2 if order_one => Label::DegenerateCleave,
        n if n >= 3 && out.dual_dim == 2 => Label::Crossing,
        _ => Label::Remainder,
    };
    out
}

pub fn classify_point(ctx: &SplitContext<'_>, p: Vec2) -> ClassifiedPoint {
    classify_limits(ctx.problem, &ctx.limit_vectors(p))
}

/// Spatial cluster of non-cleave samples, reported as one feature.
#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub label: Label,
    pub center: Vec2,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Census {
    pub points: Vec<ClassifiedPoint>,
    /// Sample counts in the order of [`Label::ALL`].
    pub counts: [usize; 5],
    pub features: Vec<Feature>,
}

impl Census {
    pub fn count(&self, label: Label) -> usize {
        self.counts[label.index()]
    }

    pub fn cleave_fraction(&self) -> f64 {
        self.count(Label::Cleave) as f64 / self.points.len().max(1) as f64
    }

    /// Number of features carrying `label`.
    pub fn features_labelled(&self, label: Label) -> usize {
        self.features.iter().filter(|f| f.label == label).count()
    }
}

// A feature takes the most specific label among its samples.
fn feature_rank(l: Label) -> u8 {
    match l {
        Label::Crossing => 4,
        Label::Edge => 3,
        Label::Remainder => 2,
        Label::DegenerateCleave => 1,
        Label::Cleave => 0,
    }
}

pub fn census(ctx: &SplitContext<'_>) -> Census {
    census_with(ctx, &Sequential)
}

/// Classifies every locus vertex and groups non-cleave samples lying within
/// `cluster_tol` of each other into features.
pub fn census_with<E: Executor>(ctx: &SplitContext<'_>, exec: &E) -> Census {
    let verts: Vec<Vec2> = ctx.locus.vertices().map(|(_, _, p)| p).collect();
    let points = exec.map(verts.len(), |i| classify_point(ctx, verts[i]));
    let mut counts = [0; 5];
    for p in &points {
        counts[p.label.index()] += 1;
    }
    let radius = ctx.problem.scenario.tolerances.cluster_tol;
    let periodic = ctx.locus.periodic;
    let gap = |a: Vec2, b: Vec2| {
        let d = a - b;
        if periodic {
            vec2(d.x - libm::round(d.x), d.y - libm::round(d.y)).norm()
        } else {
            d.norm()
        }
    };
    let special: Vec<&ClassifiedPoint> = points.iter().filter(|p| p.label != Label::Cleave).collect();
    // Union-find over the special samples.
    let mut parent: Vec<usize> = (0..special.len()).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..special.len() {
        for j in i + 1..special.len() {
            if gap(special[i].point, special[j].point) <= radius {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut features: Vec<(usize, Feature)> = Vec::new();
    for i in 0..special.len() {
        let r = root(&mut parent, i);
        let p = special[i];
        match features.iter_mut().find(|(k, _)| *k == r) {
            Some((_, f)) => {
                if feature_rank(p.label) > feature_rank(f.label) {
                    f.label = p.label;
                    f.center = p.point;
                }
                f.samples += 1;
            }
            None => features.push((r, Feature { label: p.label, center: p.point, samples: 1 })),
        }
    }
    Census { points, counts, features: features.into_iter().map(|(_, f)| f).collect() }
}

fn base_data(problem: &Problem, c: usize, theta: f64) -> f64 {
    problem.scenario.data.value(c, theta) - problem.scenario.data.offsets[c]
}

/// `h_own - h_partner` at a provenance vertex, offsets removed.
pub fn vertex_jump(problem: &Problem, p: Vec2, prov: &Provenance) -> Option<f64> {
    let partner = prov.partner?;
    let own = prov.t + base_data(problem, prov.component, prov.theta);
    let c = partner.key.component;
    let origin = problem.mesh.curves[c].point(partner.theta) + partner.key.lift.shift();
    let other = problem.scenario.hamiltonian.phi(p - origin) + base_data(problem, c, partner.theta);
    Some(own - other)
}

/// Maximal run of vertices on one chain separating the same two sources.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpRun {
    pub chain: usize,
    pub start: usize,
    pub vertices: usize,
    pub arclength: f64,
    pub own: SourceKey,
    pub partner: SourceKey,
    pub mean: f64,
    /// Largest `|jump - mean|` along the run.
    pub max_deviation: f64,
}

impl JumpRun {
    /// Deviation relative to the mean, floored at unit scale so that zero
    /// jumps are measured absolutely.
    pub fn relative_deviation(&self) -> f64 {
        self.max_deviation / libm::fabs(self.mean).max(1.0)
    }
}

/// Splits the chains carrying provenance into runs of constant source pair
/// and reports the jump along each.
pub fn jump_runs(ctx: &SplitContext<'_>) -> Vec<JumpRun> {
    let problem = ctx.problem;
    let mut runs = Vec::new();
    for (ci, chain) in ctx.locus.chains.iter().enumerate() {
        let Some(prov) = &chain.provenance else { continue };
        let own_key = |p: &Provenance| SourceKey { component: p.component, lift: crate::splitlocus::Lift::ZERO };
        let mut current: Option<(JumpRun, Vec<f64>)> = None;
        let flush = |cur: Option<(JumpRun, Vec<f64>)>, runs: &mut Vec<JumpRun>| {
            if let Some((mut run, js)) = cur {
                run.mean = js.iter().sum::<f64>() / js.len() as f64;
                run.max_deviation = js.iter().map(|j| libm::fabs(j - run.mean)).fold(0.0, f64::max);
                runs.push(run);
            }
        };
        for (k, (p, pv)) in chain.points.iter().zip(prov).enumerate() {
            let (Some(partner), Some(j)) = (pv.partner, vertex_jump(problem, *p, pv)) else {
                flush(current.take(), &mut runs);
                continue;
            };
            match &mut current {
                Some((run, js)) if run.partner == partner.key && run.own == own_key(pv) => {
                    run.arclength += chain.points[k - 1].distance(*p);
                    run.vertices += 1;
                    js.push(j);
                }
                _ => {
                    flush(current.take(), &mut runs);
                    let run = JumpRun {
                        chain: ci,
                        start: k,
                        vertices: 1,
                        arclength: 0.0,
                        own: own_key(pv),
                        partner: partner.key,
                        mean: 0.0,
                        max_deviation: 0.0,
                    };
                    current = Some((run, alloc::vec![j]));
                }
            }
        }
        flush(current.take(), &mut runs);
        // Merge a run wrapping around the end of a closed chain.
        let first = runs.iter().position(|r| r.chain == ci);
        if let (true, Some(f)) = (chain.closed, first) {
            let last = runs.len() - 1;
            if last == f && runs[f].vertices == chain.len() {
                runs[f].arclength += chain.points[chain.len() - 1].distance(chain.points[0]);
            }
            if last > f && runs[f].start == 0 && runs[last].own == runs[f].own && runs[last].partner == runs[f].partner {
                let tail = runs.pop().unwrap();
                let head = &mut runs[f];
                let n = (head.vertices + tail.vertices) as f64;
                let mean = (head.mean * head.vertices as f64 + tail.mean * tail.vertices as f64) / n;
                let dev = (head.max_deviation + libm::fabs(head.mean - mean)).max(tail.max_deviation + libm::fabs(tail.mean - mean));
                head.mean = mean;
                head.max_deviation = dev;
                head.vertices += tail.vertices;
                head.arclength += tail.arclength + chain.points[chain.len() - 1].distance(chain.points[0]);
                head.start = tail.start;
            }
        }
    }
    runs
}

/// A `C^2` bump `A (1 - u^2)^3 (1 - v^2)^3`, `(u, v) = (x - c) / s`,
/// periodised on the torus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestForm {
    pub center: Vec2,
    pub scale: f64,
    pub amplitude: f64,
}

fn bump(u: f64) -> (f64, f64) {
    if libm::fabs(u) >= 1.0 {
        return (0.0, 0.0);
    }
    let w = 1.0 - u * u;
    (w * w * w, -6.0 * u * w * w)
}

impl TestForm {
    fn translates(&self, periodic: bool) -> impl Iterator<Item = Vec2> {
        let r = if periodic { 1 } else { 0 };
        (-r..=r).flat_map(move |i| (-r..=r).map(move |j| vec2(i as f64, j as f64)))
    }

    pub fn value(&self, x: Vec2, periodic: bool) -> f64 {
        self.translates(periodic)
            .map(|m| {
                let d = (x + m - self.center) / self.scale;
                self.amplitude * bump(d.x).0 * bump(d.y).0
            })
            .sum()
    }

    pub fn gradient(&self, x: Vec2, periodic: bool) -> Vec2 {
        self.translates(periodic)
            .map(|m| {
                let d = (x + m - self.center) / self.scale;
                let (bx, dbx) = bump(d.x);
                let (by, dby) = bump(d.y);
                vec2(dbx * by, bx * dby) * (self.amplitude / self.scale)
            })
            .fold(Vec2::ZERO, |a, b| a + b)
    }

    pub fn sup_norm(&self) -> f64 {
        libm::fabs(self.amplitude)
    }
}

/// Scales of the test-form suite.
pub const FORM_SCALES: [f64; 3] = [0.05, 0.15, 0.4];

/// `count` bumps cycling through [`FORM_SCALES`], alternately centred on a
/// random locus vertex and a random point of the domain.
pub fn test_form_suite(ctx: &SplitContext<'_>, count: usize, seed: u64) -> Vec<TestForm> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = move || (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    let verts: Vec<Vec2> = ctx.locus.vertices().map(|(_, _, p)| p).collect();
    let chart = ctx.problem.scenario.chart;
    let (lo, hi) = chart.bounds();
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let center = if k % 2 == 0 && !verts.is_empty() {
            verts[((unit() * verts.len() as f64) as usize).min(verts.len() - 1)]
        } else {
            let mut p;
            loop {
                p = vec2(lo.x + (hi.x - lo.x) * unit(), lo.y + (hi.y - lo.y) * unit());
                if chart.contains(p) {
                    break;
                }
            }
            p
        };
        let amplitude = 0.5 + 1.5 * unit();
        out.push(TestForm { center, scale: FORM_SCALES[k % 3], amplitude });
    }
    out
}

/// `T(phi)` together with the number of segments that could not be oriented.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurrentValue {
    pub value: f64,
    pub skipped: usize,
}

const GAUSS: [(f64, f64); 3] = [(-0.774_596_669_241_483_4, 5.0 / 9.0), (0.0, 8.0 / 9.0), (0.774_596_669_241_483_4, 5.0 / 9.0)];

/// `T(phi) = sum over cleave components of the integral of (h1 - h2) phi`,
/// oriented so that (tangent, incoming vector) is positive.
pub fn current_t<F: Fn(Vec2) -> Vec2>(ctx: &SplitContext<'_>, phi: F) -> CurrentValue {
    let problem = ctx.problem;
    let mut value = 0.0;
    let mut skipped = 0;
    for chain in &ctx.locus.chains {
        let Some(prov) = &chain.provenance else {
            skipped += chain.segment_count();
            continue;
        };
        let n = chain.len();
        for s in 0..chain.segment_count() {
            let (i, j) = (s, (s + 1) % n);
            let (a, b) = (chain.points[i], chain.points[j]);
            let (Some(ja), Some(jb)) = (vertex_jump(problem, a, &prov[i]), vertex_jump(problem, b, &prov[j])) else {
                skipped += 1;
                continue;
            };
            let incoming = |k: usize| {
                let pv = &prov[k];
                let z = problem.mesh.curves[pv.component].point(pv.theta);
                (chain.points[k] - z).normalized()
            };
            let v = incoming(i) + incoming(j);
            let d = b - a;
            let len = d.norm();
            if len == 0.0 {
                continue;
            }
            let side = d.cross(v);
            if side == 0.0 {
                skipped += 1;
                continue;
            }
            let t = if side > 0.0 { d / len } else { -(d / len) };
            let mut seg = 0.0;
            for (x, w) in GAUSS {
                let u = 0.5 * (x + 1.0);
                seg += w * (ja + (jb - ja) * u) * phi(a + d * u).dot(t);
            }
            value += 0.5 * seg * len;
        }
    }
    CurrentValue { value, skipped }
}

/// `T(d sigma)` for a test function.
pub fn boundary_t(ctx: &SplitContext<'_>, sigma: &TestForm) -> CurrentValue {
    let periodic = ctx.problem.scenario.chart.is_periodic();
    current_t(ctx, |x| sigma.gradient(x, periodic))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormResult {
    pub form: TestForm,
    pub value: f64,
    /// `|T(d sigma)| / (1 + |sigma|_inf)`.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurrentReport {
    pub runs: Vec<JumpRun>,
    pub forms: Vec<FormResult>,
    pub skipped: usize,
    pub worst: f64,
}

pub fn current_report<E: Executor>(ctx: &SplitContext<'_>, forms: &[TestForm], exec: &E) -> CurrentReport {
    let results = exec.map(forms.len(), |i| boundary_t(ctx, &forms[i]));
    let mut skipped = 0;
    let forms: Vec<FormResult> = forms
        .iter()
        .zip(results)
        .map(|(f, r)| {
            skipped = skipped.max(r.skipped);
            FormResult { form: *f, value: r.value, normalized: libm::fabs(r.value) / (1.0 + f.sup_norm()) }
        })
        .collect();
    let worst = forms.iter().map(|f| f.normalized).fold(0.0, f64::max);
    CurrentReport { runs: jump_runs(ctx), forms, skipped, worst }
}
