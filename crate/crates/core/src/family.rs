//! The family of balanced split loci: constant offsets per boundary
//! component, lattice-equivariant offsets on the torus, and the homology
//! coordinate that labels each member.

use alloc::vec::Vec;

use crate::exec::{Executor, Sequential};
use crate::geometry::Chart;
use crate::math::{vec2, Vec2, TAU};
use crate::scenario::Problem;
use crate::splitlocus::{singular_set_with, CandidateLocus, Lift, SplitContext};
use crate::Error;

/// Offsets selecting a member of the family.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilyParam {
    /// One constant per boundary component, added to the data.
    ComponentOffsets(Vec<f64>),
    /// Weight `a` of the lattice: the translate by `m` carries `g + <a, m>`.
    TorusLattice(Vec2),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyMode {
    ComponentOffsets,
    TorusLattice,
}

impl FamilyParam {
    pub fn mode(&self) -> FamilyMode {
        match self {
            FamilyParam::ComponentOffsets(_) => FamilyMode::ComponentOffsets,
            FamilyParam::TorusLattice(_) => FamilyMode::TorusLattice,
        }
    }

    /// The coordinates the homology class is expected to reproduce.
    pub fn coordinates(&self) -> Vec<f64> {
        match self {
            FamilyParam::ComponentOffsets(a) => a.iter().skip(1).zip(a).map(|(hi, lo)| lo - hi).collect(),
            FamilyParam::TorusLattice(a) => alloc::vec![a.x, a.y],
        }
    }
}

/// A family member: the offset problem and its singular set.
#[derive(Debug, Clone)]
pub struct FamilyMember {
    pub param: FamilyParam,
    pub problem: Problem,
    pub locus: CandidateLocus,
}

impl FamilyMember {
    pub fn context(&self) -> SplitContext<'_> {
        SplitContext::new(&self.problem, &self.locus)
    }

    pub fn context_with<E: Executor>(&self, exec: &E) -> SplitContext<'_> {
        SplitContext::new_with(&self.problem, &self.locus, exec)
    }
}

/// Applies the offsets to `base` (replacing any it already carries).
pub fn offset_problem(base: &Problem, param: &FamilyParam) -> Result<Problem, Error> {
    let (offsets, lattice) = match param {
        FamilyParam::ComponentOffsets(a) => (a.clone(), base.scenario.lattice_offset),
        FamilyParam::TorusLattice(a) => {
            if !base.scenario.chart.is_periodic() {
                return Err(Error::InvalidArgument("lattice offsets only apply to the torus"));
            }
            (base.scenario.data.offsets.clone(), *a)
        }
    };
    base.with_offsets(&offsets, lattice).map_err(|e| match e {
        Error::IncompatiblePair { to, excess, .. } => Error::IncompatibleOffset { component: to.0, sample: to.1, excess },
        other => other,
    })
}

/// `S[a]`: the singular set of the offset problem.
pub fn family_member(base: &Problem, param: &FamilyParam) -> Result<FamilyMember, Error> {
    family_member_with(base, param, &Sequential)
}

pub fn family_member_with<E: Executor>(base: &Problem, param: &FamilyParam, exec: &E) -> Result<FamilyMember, Error> {
    let problem = offset_problem(base, param)?;
    let locus = singular_set_with(&problem, exec)?;
    Ok(FamilyMember { param: param.clone(), problem, locus })
}

/// Bound on `a_j - a_i` from the data on components `i` and `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairBound {
    pub i: usize,
    pub j: usize,
    /// `a_j - a_i` must lie strictly between these.
    pub lower: f64,
    pub upper: f64,
}

/// Result of an admissibility scan at one lattice weight.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub a: Vec2,
    pub admissible: bool,
    /// Why a point was rejected.
    pub reason: Option<ScanFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScanFailure {
    Incompatible(Error),
    NotSplit(Vec2),
    NotBalanced(Option<Vec2>),
}

/// Empirical description of the admissible parameter set.
#[derive(Debug, Clone, PartialEq)]
pub enum AdmissibleRange {
    /// Component offsets: one open interval per ordered pair.
    Pairwise(Vec<PairBound>),
    /// Lattice weights: grid verdicts. No convexity is implied.
    Scan { points: Vec<ScanPoint>, symmetric: bool },
}

impl AdmissibleRange {
    /// Whether `param` lies in the range (scans answer only at grid points).
    pub fn contains(&self, param: &FamilyParam) -> Option<bool> {
        match (self, param) {
            (AdmissibleRange::Pairwise(bounds), FamilyParam::ComponentOffsets(a)) => Some(
                bounds.iter().all(|b| {
                    let d = a[b.j] - a[b.i];
                    b.lower < d && d < b.upper
                }),
            ),
            (AdmissibleRange::Scan { points, .. }, FamilyParam::TorusLattice(a)) => points
                .iter()
                .find(|s| (s.a - *a).norm() <= 1e-12)
                .map(|s| s.admissible),
            _ => None,
        }
    }
}

/// Open bounds on differences of component offsets, from
/// `g(y) + a_j - g(z) - a_i < d(z, y)` over sampled pairs.
pub fn component_bounds(base: &Problem) -> Vec<PairBound> {
    let h = &base.scenario.hamiltonian;
    let data = &base.scenario.data;
    let n = base.components();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            // upper: a_j - a_i < d(z_i, y_j) - (g_j(y) - g_i(z)), lower from the reverse.
            let mut upper = f64::INFINITY;
            let mut lower = f64::NEG_INFINITY;
            for z in &base.mesh.components[i] {
                for y in &base.mesh.components[j] {
                    let gz = z.value - data.offsets[i];
                    let gy = y.value - data.offsets[j];
                    upper = upper.min(h.phi(y.frame.point - z.frame.point) - (gy - gz));
                    lower = lower.max(-(h.phi(z.frame.point - y.frame.point) - (gz - gy)));
                }
            }
            out.push(PairBound { i, j, lower, upper });
        }
    }
    out
}

/// Admissible parameters: pairwise bounds for component offsets, a scan of
/// `grid` (checking split and balanced members) for lattice weights.
pub fn admissible_range<E: Executor>(base: &Problem, mode: FamilyMode, grid: &[Vec2], exec: &E) -> AdmissibleRange {
    match mode {
        FamilyMode::ComponentOffsets => AdmissibleRange::Pairwise(component_bounds(base)),
        FamilyMode::TorusLattice => {
            let points: Vec<ScanPoint> = grid.iter().map(|a| scan_point(base, *a, exec)).collect();
            let symmetric = points.iter().all(|p| {
                points
                    .iter()
                    .find(|q| (q.a + p.a).norm() <= 1e-12)
                    .map_or(true, |q| q.admissible == p.admissible)
            });
            AdmissibleRange::Scan { points, symmetric }
        }
    }
}

fn scan_point<E: Executor>(base: &Problem, a: Vec2, exec: &E) -> ScanPoint {
    let reject = |reason| ScanPoint { a, admissible: false, reason: Some(reason) };
    let member = match family_member_with(base, &FamilyParam::TorusLattice(a), exec) {
        Ok(m) => m,
        Err(e) => return reject(ScanFailure::Incompatible(e)),
    };
    let ctx = member.context_with(exec);
    let report = ctx.is_balanced_with(exec);
    if let Some(w) = report.split_locus.split.witness {
        return reject(ScanFailure::NotSplit(w.point));
    }
    if !report.passed {
        return reject(ScanFailure::NotBalanced(report.witness_point()));
    }
    ScanPoint { a, admissible: true, reason: None }
}

/// A run of locus vertices separating the same two lattice translates.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub own: Lift,
    pub partner: Lift,
    pub vertices: usize,
    /// Largest `| d(x, own) + <a, own> - d(x, partner) - <a, partner> |`.
    pub max_residual: f64,
}

/// Fit of the torus locus against the weighted bisectors (hyperbola
/// branches for the Euclidean norm) of its provenance pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchFit {
    pub branches: Vec<Branch>,
    pub max_residual: f64,
    /// Vertices without a partner (none expected on the torus).
    pub unmatched: usize,
}

pub fn branch_fit(member: &FamilyMember) -> Result<BranchFit, Error> {
    let Chart::Torus { source, radius } = member.problem.scenario.chart else {
        return Err(Error::InvalidArgument("branch fit needs a torus chart"));
    };
    let h = &member.problem.scenario.hamiltonian;
    let a = member.problem.scenario.lattice_offset;
    let dist = |x: Vec2, m: Lift| h.phi(x - source - m.shift()) - radius + a.dot(m.shift());
    let mut fit = BranchFit { branches: Vec::new(), max_residual: 0.0, unmatched: 0 };
    for chain in &member.locus.chains {
        let Some(prov) = &chain.provenance else { continue };
        for (x, p) in chain.points.iter().zip(prov) {
            let Some(partner) = p.partner else {
                fit.unmatched += 1;
                continue;
            };
            let own = Lift::ZERO;
            let r = libm::fabs(dist(*x, own) - dist(*x, partner.key.lift));
            fit.max_residual = fit.max_residual.max(r);
            match fit.branches.last_mut() {
                Some(b) if b.partner == partner.key.lift => {
                    b.vertices += 1;
                    b.max_residual = b.max_residual.max(r);
                }
                _ => fit.branches.push(Branch { own, partner: partner.key.lift, vertices: 1, max_residual: r }),
            }
        }
    }
    // The closed chain may start in the middle of a branch.
    if fit.branches.len() > 1 && fit.branches[0].partner == fit.branches.last().unwrap().partner {
        let last = fit.branches.pop().unwrap();
        fit.branches[0].vertices += last.vertices;
        fit.branches[0].max_residual = fit.branches[0].max_residual.max(last.max_residual);
    }
    Ok(fit)
}

/// Coordinates of a locus in relative cohomology, one per generator.
#[derive(Debug, Clone, PartialEq)]
pub struct HomologyCoordinate {
    pub coords: Vec<f64>,
    /// The value along each representative path, per generator.
    pub path_values: Vec<Vec<f64>>,
    /// Largest disagreement between representatives of one generator.
    pub spread: f64,
    /// Paths that had to be perturbed off a non-cleave crossing.
    pub retries: usize,
}

/// Representative paths `(start, end)` for each generator.
fn generator_paths(chart: &Chart) -> Vec<Vec<(Vec2, Vec2)>> {
    match *chart {
        Chart::Annulus { r_in, r_out } => {
            let paths = [0.3, 2.1, 4.4]
                .iter()
                .map(|ang| {
                    let u = Vec2::from_angle(*ang);
                    (u * (r_out * (1.0 - 1e-9)), u * (r_in * (1.0 + 1e-9)))
                })
                .collect();
            alloc::vec![paths]
        }
        Chart::Torus { source, .. } => {
            let ys = [0.23, 0.61, 0.87];
            let along = |e: Vec2, n: Vec2| -> Vec<(Vec2, Vec2)> {
                ys.iter()
                    .map(|y| {
                        let start = source + n * *y + e * 0.137;
                        (start, start + e)
                    })
                    .collect()
            };
            alloc::vec![along(vec2(1.0, 0.0), vec2(0.0, 1.0)), along(vec2(0.0, 1.0), vec2(1.0, 0.0))]
        }
        Chart::Disk { .. } | Chart::Ellipse { .. } => Vec::new(),
    }
}

/// Parameters along `z + s v` (`0 < s < len`) where the path meets the locus.
fn path_hits(locus: &CandidateLocus, z: Vec2, v: Vec2, len: f64) -> Vec<f64> {
    let mut hits = Vec::new();
    let mut t = 0.0;
    while let Some(s) = locus.first_hit(z, v, t, len) {
        hits.push(s);
        t = s + 1e-9;
    }
    hits.dedup_by(|b, a| *b - *a <= 1e-6);
    hits
}

// Offset from a crossing to the points whose (unique) arrivals name the sides.
const SIDE_STEP: f64 = 1e-5;
// Admission slack at a locus vertex; covers the chord error of the polyline.
const VERTEX_SLACK: f64 = 1e-5;

/// Sum over crossings of `h(behind) - h(ahead)`, or `None` if some crossing
/// is not a clean two-sided one.
fn path_jump(ctx: &SplitContext<'_>, start: Vec2, end: Vec2) -> Option<f64> {
    let d = end - start;
    let len = d.norm();
    let v = d / len;
    let mut total = 0.0;
    for s in path_hits(ctx.locus, start, v, len) {
        let c = start + v * s;
        let side = |p: Vec2| {
            let q = ctx.preimages(p);
            (q.arrivals.len() == 1 && !q.continuum).then(|| q.arrivals[0].key)
        };
        let behind = side(c - v * SIDE_STEP)?;
        let ahead = side(c + v * SIDE_STEP)?;
        if behind == ahead {
            return None;
        }
        // Both sides are read off at a vertex, which lies on the true locus.
        let p = ctx.locus.nearest_vertex(c)?;
        let q = ctx.preimages_within(p, VERTEX_SLACK);
        let value = |key| {
            q.arrivals.iter().filter(|a| a.key == key).map(|a| a.base_value).min_by(f64::total_cmp)
        };
        total += value(behind)? - value(ahead)?;
    }
    Some(total)
}

/// The homology coordinate of the locus: for each generator, the signed
/// jumps of `h` accumulated along representative paths.
pub fn homology_class(ctx: &SplitContext<'_>) -> Result<HomologyCoordinate, Error> {
    let chart = ctx.problem.scenario.chart;
    let mut out = HomologyCoordinate { coords: Vec::new(), path_values: Vec::new(), spread: 0.0, retries: 0 };
    for (g, paths) in generator_paths(&chart).into_iter().enumerate() {
        let mut values = Vec::new();
        for (start, end) in paths {
            let mut value = None;
            for attempt in 0..=5 {
                let (s, e) = perturb(&chart, g, start, end, attempt);
                value = path_jump(ctx, s, e);
                if value.is_some() {
                    break;
                }
                out.retries += 1;
            }
            values.push(value.ok_or(Error::ObstructedPath { generator: g })?);
        }
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        out.spread = out.spread.max(hi - lo);
        out.coords.push(values.iter().sum::<f64>() / values.len() as f64);
        out.path_values.push(values);
    }
    Ok(out)
}

fn perturb(chart: &Chart, generator: usize, start: Vec2, end: Vec2, attempt: usize) -> (Vec2, Vec2) {
    if attempt == 0 {
        return (start, end);
    }
    let k = attempt as f64;
    match *chart {
        Chart::Annulus { .. } => {
            let rot = |p: Vec2| Vec2::from_angle(p.angle() + 0.0123 * k * TAU / 6.0) * p.norm();
            (rot(start), rot(end))
        }
        _ => {
            let n = if generator == 0 { vec2(0.0, 1.0) } else { vec2(1.0, 0.0) };
            (start + n * (0.0071 * k), end + n * (0.0071 * k))
        }
    }
}
