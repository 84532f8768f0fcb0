//! Candidate split loci as polylines, with ray intersection and distance
//! queries (lattice-periodic on the torus).

use alloc::vec::Vec;

use super::solution::SourceKey;
use crate::math::{cos, fabs, floor, sin, vec2, Vec2, TAU};

/// The other side of a locus vertex extracted from characteristics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partner {
    pub key: SourceKey,
    pub theta: f64,
}

/// Where a vertex of an extracted locus came from: the characteristic
/// `(component, theta)` stopped at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provenance {
    pub component: usize,
    pub theta: f64,
    pub t: f64,
    /// Stopped at its first conjugate point rather than at the cut point.
    pub clamped: bool,
    pub partner: Option<Partner>,
}

/// One polyline component.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub points: Vec<Vec2>,
    pub closed: bool,
    /// Per-vertex origin, present for loci extracted from characteristics.
    pub provenance: Option<Vec<Provenance>>,
}

impl Chain {
    pub fn new(points: Vec<Vec2>, closed: bool) -> Self {
        let mut chain = Chain { points, closed, provenance: None };
        chain.dedup();
        chain
    }

    pub fn with_provenance(points: Vec<Vec2>, closed: bool, provenance: Vec<Provenance>) -> Self {
        assert_eq!(points.len(), provenance.len());
        let mut chain = Chain { points, closed, provenance: Some(provenance) };
        chain.dedup();
        chain
    }

    // Drops consecutive vertices closer than 1e-9 (cyclically when closed).
    // Twin vertices at a junction, whose partners differ, both stay.
    fn dedup(&mut self) {
        const EPS: f64 = 1e-9;
        let partner = |k: usize| self.provenance.as_ref().and_then(|p| p[k].partner.map(|q| q.key));
        let mut keep = alloc::vec![true; self.points.len()];
        let mut last = 0;
        for k in 1..self.points.len() {
            if self.points[k].distance(self.points[last]) < EPS && partner(k) == partner(last) {
                keep[k] = false;
            } else {
                last = k;
            }
        }
        if self.closed && self.points.len() > 1 && keep.iter().filter(|k| **k).count() > 1 {
            let first = self.points[0];
            for k in (1..self.points.len()).rev() {
                if !keep[k] {
                    continue;
                }
                if self.points[k].distance(first) < EPS && partner(k) == partner(0) {
                    keep[k] = false;
                } else {
                    break;
                }
            }
        }
        let mut it = keep.iter();
        self.points.retain(|_| *it.next().unwrap());
        if let Some(p) = self.provenance.as_mut() {
            let mut it = keep.iter();
            p.retain(|_| *it.next().unwrap());
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of segments.
    pub fn segment_count(&self) -> usize {
        let n = self.points.len();
        if n < 2 {
            0
        } else if self.closed && n > 2 {
            n
        } else {
            n - 1
        }
    }

    pub fn segment(&self, i: usize) -> (Vec2, Vec2) {
        let n = self.points.len();
        (self.points[i], self.points[(i + 1) % n])
    }

    /// Unit tangent at vertex `k` from its neighbours.
    pub fn tangent(&self, k: usize) -> Vec2 {
        let n = self.points.len();
        if n < 2 {
            return Vec2::ZERO;
        }
        let prev = if k > 0 {
            self.points[k - 1]
        } else if self.closed {
            self.points[n - 1]
        } else {
            self.points[0]
        };
        let next = if k + 1 < n {
            self.points[k + 1]
        } else if self.closed {
            self.points[0]
        } else {
            self.points[n - 1]
        };
        (next - prev).normalized()
    }

    pub fn length(&self) -> f64 {
        (0..self.segment_count()).map(|i| {
            let (a, b) = self.segment(i);
            a.distance(b)
        }).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Chunk {
    chain: usize,
    first: usize,
    end: usize,
    min: Vec2,
    max: Vec2,
}

const CHUNK: usize = 32;

/// A closed candidate set `S`: finitely many polylines, or the whole domain.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateLocus {
    pub chains: Vec<Chain>,
    /// `S` is all of the domain.
    pub fills_domain: bool,
    /// Chains are in unwrapped torus coordinates and stand for all their
    /// integer translates.
    pub periodic: bool,
    chunks: Vec<Chunk>,
}

impl CandidateLocus {
    pub fn new(chains: Vec<Chain>, periodic: bool) -> Self {
        let chains: Vec<Chain> = chains.into_iter().filter(|c| !c.is_empty()).collect();
        let mut chunks = Vec::new();
        for (ci, chain) in chains.iter().enumerate() {
            let segs = chain.segment_count();
            if segs == 0 {
                let p = chain.points[0];
                chunks.push(Chunk { chain: ci, first: 0, end: 0, min: p, max: p });
                continue;
            }
            let mut first = 0;
            while first < segs {
                let end = (first + CHUNK).min(segs);
                let mut min = vec2(f64::INFINITY, f64::INFINITY);
                let mut max = vec2(f64::NEG_INFINITY, f64::NEG_INFINITY);
                for i in first..end {
                    let (a, b) = chain.segment(i);
                    for q in [a, b] {
                        min = vec2(min.x.min(q.x), min.y.min(q.y));
                        max = vec2(max.x.max(q.x), max.y.max(q.y));
                    }
                }
                chunks.push(Chunk { chain: ci, first, end, min, max });
                first = end;
            }
        }
        CandidateLocus { chains, fills_domain: false, periodic, chunks }
    }

    /// `S = Omega`.
    pub fn whole_domain(periodic: bool) -> Self {
        let mut s = CandidateLocus::new(Vec::new(), periodic);
        s.fills_domain = true;
        s
    }

    /// Circle sampled at `samples` points.
    pub fn circle(center: Vec2, radius: f64, samples: usize) -> Self {
        let pts = (0..samples).map(|k| center + Vec2::from_angle(TAU * k as f64 / samples as f64) * radius).collect();
        CandidateLocus::new(alloc::vec![Chain::new(pts, true)], false)
    }

    /// Circle with the arc `[gap_start, gap_start + gap_len]` removed.
    pub fn circle_with_gap(center: Vec2, radius: f64, gap_start: f64, gap_len: f64, samples: usize) -> Self {
        let span = TAU - gap_len;
        let pts = (0..=samples)
            .map(|k| {
                let a = gap_start + gap_len + span * k as f64 / samples as f64;
                center + vec2(cos(a), sin(a)) * radius
            })
            .collect();
        CandidateLocus::new(alloc::vec![Chain::new(pts, false)], false)
    }

    pub fn segment(a: Vec2, b: Vec2, samples: usize) -> Self {
        let samples = samples.max(1);
        let pts = (0..=samples).map(|k| a + (b - a) * (k as f64 / samples as f64)).collect();
        CandidateLocus::new(alloc::vec![Chain::new(pts, false)], false)
    }

    pub fn point(p: Vec2) -> Self {
        CandidateLocus::new(alloc::vec![Chain::new(alloc::vec![p], false)], false)
    }

    pub fn is_empty(&self) -> bool {
        !self.fills_domain && self.chains.is_empty()
    }

    pub fn vertex_count(&self) -> usize {
        self.chains.iter().map(Chain::len).sum()
    }

    /// `(chain, index, point)` for every vertex.
    pub fn vertices(&self) -> impl Iterator<Item = (usize, usize, Vec2)> + '_ {
        self.chains.iter().enumerate().flat_map(|(c, ch)| ch.points.iter().enumerate().map(move |(k, p)| (c, k, *p)))
    }

    /// Longest segment.
    pub fn max_step(&self) -> f64 {
        self.chains
            .iter()
            .flat_map(|c| (0..c.segment_count()).map(move |i| {
                let (a, b) = c.segment(i);
                a.distance(b)
            }))
            .fold(0.0, f64::max)
    }

    pub fn length(&self) -> f64 {
        self.chains.iter().map(Chain::length).sum()
    }

    // Integer translates of a box that can come within `reach` of `[lo, hi]`.
    fn translates(&self, min: Vec2, max: Vec2, lo: Vec2, hi: Vec2, reach: f64) -> (i32, i32, i32, i32) {
        if !self.periodic {
            return (0, 0, 0, 0);
        }
        let ix0 = floor(lo.x - reach - max.x) as i32;
        let ix1 = floor(hi.x + reach - min.x) as i32 + 1;
        let iy0 = floor(lo.y - reach - max.y) as i32;
        let iy1 = floor(hi.y + reach - min.y) as i32 + 1;
        (ix0, ix1, iy0, iy1)
    }

    /// Distance from `p` to the locus (to its nearest translate on the torus).
    pub fn distance(&self, p: Vec2) -> f64 {
        if self.fills_domain {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        if self.periodic {
            if let Some(v) = self.chains.first().and_then(|c| c.points.first()) {
                let d = p - *v;
                best = vec2(d.x - libm::round(d.x), d.y - libm::round(d.y)).norm();
            }
        }
        for chunk in &self.chunks {
            let reach = if best.is_finite() { best } else { 0.0 };
            let (ix0, ix1, iy0, iy1) = if best.is_finite() {
                self.translates(chunk.min, chunk.max, p, p, reach)
            } else {
                (0, 0, 0, 0)
            };
            for i in ix0..=ix1 {
                for j in iy0..=iy1 {
                    let m = vec2(i as f64, j as f64);
                    let (lo, hi) = (chunk.min + m, chunk.max + m);
                    let dx = (lo.x - p.x).max(p.x - hi.x).max(0.0);
                    let dy = (lo.y - p.y).max(p.y - hi.y).max(0.0);
                    if vec2(dx, dy).norm() >= best {
                        continue;
                    }
                    let chain = &self.chains[chunk.chain];
                    if chunk.first == chunk.end {
                        best = best.min(p.distance(chain.points[0] + m));
                    }
                    for s in chunk.first..chunk.end {
                        let (a, b) = chain.segment(s);
                        best = best.min(point_segment_distance(p, a + m, b + m));
                    }
                }
            }
        }
        best
    }

    /// The vertex nearest to `p`, translated next to `p` on the torus.
    pub fn nearest_vertex(&self, p: Vec2) -> Option<Vec2> {
        let periodic = self.periodic;
        self.vertices()
            .map(|(_, _, v)| {
                if periodic {
                    let d = p - v;
                    v + vec2(libm::round(d.x), libm::round(d.y))
                } else {
                    v
                }
            })
            .min_by(|a, b| a.distance(p).total_cmp(&b.distance(p)))
    }

    /// First `t` in `(t_min, t_max]` with `z + t v` on the locus.
    pub fn first_hit(&self, z: Vec2, v: Vec2, t_min: f64, t_max: f64) -> Option<f64> {
        if self.fills_domain {
            return Some(t_min.max(0.0));
        }
        let end = z + v * t_max;
        let lo = vec2(z.x.min(end.x), z.y.min(end.y));
        let hi = vec2(z.x.max(end.x), z.y.max(end.y));
        let mut best = f64::INFINITY;
        for chunk in &self.chunks {
            let (ix0, ix1, iy0, iy1) = self.translates(chunk.min, chunk.max, lo, hi, 1e-9);
            for i in ix0..=ix1 {
                for j in iy0..=iy1 {
                    let m = vec2(i as f64, j as f64);
                    let (bmin, bmax) = (chunk.min + m, chunk.max + m);
                    if bmax.x < lo.x - 1e-9 || bmin.x > hi.x + 1e-9 || bmax.y < lo.y - 1e-9 || bmin.y > hi.y + 1e-9 {
                        continue;
                    }
                    if !ray_meets_box(z, v, t_min, best.min(t_max), bmin, bmax) {
                        continue;
                    }
                    let chain = &self.chains[chunk.chain];
                    if chunk.first == chunk.end {
                        if let Some(t) = ray_point(z, v, chain.points[0] + m) {
                            if t > t_min && t <= t_max {
                                best = best.min(t);
                            }
                        }
                        continue;
                    }
                    for s in chunk.first..chunk.end {
                        let (a, b) = chain.segment(s);
                        if let Some(t) = ray_segment(z, v, a + m, b + m) {
                            if t > t_min && t <= t_max {
                                best = best.min(t);
                            }
                        }
                    }
                }
            }
        }
        best.is_finite().then_some(best)
    }

    /// Symmetric Hausdorff distance between vertex sets and polylines.
    pub fn hausdorff(&self, other: &CandidateLocus) -> f64 {
        let a = self.vertices().map(|(_, _, p)| other.distance(p)).fold(0.0, f64::max);
        let b = other.vertices().map(|(_, _, p)| self.distance(p)).fold(0.0, f64::max);
        a.max(b)
    }
}

pub(crate) fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let e = b - a;
    let l2 = e.norm_sq();
    if l2 == 0.0 {
        return p.distance(a);
    }
    let s = ((p - a).dot(e) / l2).clamp(0.0, 1.0);
    p.distance(a + e * s)
}

// Slab test for the parameter range [t0, t1] of z + t v against a box.
fn ray_meets_box(z: Vec2, v: Vec2, t0: f64, t1: f64, min: Vec2, max: Vec2) -> bool {
    let (mut lo, mut hi) = (t0, t1);
    for (zc, vc, mn, mx) in [(z.x, v.x, min.x, max.x), (z.y, v.y, min.y, max.y)] {
        let (mn, mx) = (mn - 1e-9, mx + 1e-9);
        if vc == 0.0 {
            if zc < mn || zc > mx {
                return false;
            }
            continue;
        }
        let (mut a, mut b) = ((mn - zc) / vc, (mx - zc) / vc);
        if a > b {
            core::mem::swap(&mut a, &mut b);
        }
        lo = lo.max(a);
        hi = hi.min(b);
        if lo > hi {
            return false;
        }
    }
    true
}

/// Parameter `t` at which `z + t v` crosses the closed segment `[a, b]`.
fn ray_segment(z: Vec2, v: Vec2, a: Vec2, b: Vec2) -> Option<f64> {
    let e = b - a;
    let denom = v.cross(e);
    let w = a - z;
    let scale = v.norm() * e.norm();
    if fabs(denom) <= 1e-14 * scale {
        // Parallel: only touching endpoints count.
        return [a, b].iter().filter_map(|q| ray_point(z, v, *q)).reduce(f64::min);
    }
    let t = w.cross(e) / denom;
    let s = w.cross(v) / denom;
    if (-1e-12..=1.0 + 1e-12).contains(&s) {
        return Some(t);
    }
    // Near-miss at an endpoint still counts; open chains meet end to end.
    ray_point(z, v, if s < 0.0 { a } else { b })
}

fn ray_point(z: Vec2, v: Vec2, q: Vec2) -> Option<f64> {
    let vv = v.norm_sq();
    let t = (q - z).dot(v) / vv;
    let off = fabs(v.cross(q - z)) / libm::sqrt(vv);
    (off <= 1e-9).then_some(t)
}
