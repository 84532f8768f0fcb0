//! Scenario description and the precomputed characteristic field.

use alloc::vec::Vec;

use crate::boundary::{BoundaryData, BoundaryMesh};
use crate::characteristics::Ray;
use crate::geometry::{BoundaryCurve, Chart, Hamiltonian};
use crate::math::{vec2, Vec2};
use crate::Error;

/// Numerical tolerances, all overridable from scenario files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// RK4 step for characteristic flows.
    pub dt: f64,
    /// Relative singular-value threshold deciding conjugacy.
    pub sigma_tol: f64,
    /// Value gap of the epsilon-argmin when testing for singular points.
    pub value_gap: f64,
    /// Minimal angle between incoming directions of two minimizers.
    pub dir_tol: f64,
    /// Points closer than this to a candidate locus count as lying on it.
    pub match_tol: f64,
    /// Slack in `t <= rho_S(z)` when deciding whether an arrival is admissible.
    pub arrival_tol: f64,
    /// Angular radius for clustering incoming vectors.
    pub cluster_tol: f64,
    /// Density radius for split-locus checks, in units of the locus sampling step.
    pub dense_factor: f64,
    /// Allowed violation in the balanced inequality.
    pub balanced_tol: f64,
    /// Step used to approach a locus sample from a given direction.
    pub approach_eps: f64,
    /// Bisection resolution for hitting and cut times.
    pub bisection_tol: f64,
    /// Audit grid resolution per axis.
    pub audit_grid: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            dt: 1e-3,
            sigma_tol: 1e-6,
            value_gap: 1e-6,
            dir_tol: 1e-3,
            match_tol: 1e-6,
            arrival_tol: 1e-7,
            cluster_tol: 1e-2,
            dense_factor: 3.0,
            balanced_tol: 1e-3,
            approach_eps: 1e-5,
            bisection_tol: 1e-10,
            audit_grid: 100,
        }
    }
}

/// Chart, Hamiltonian, boundary data and discretisation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub chart: Chart,
    pub hamiltonian: Hamiltonian,
    pub data: BoundaryData,
    /// Boundary mesh samples per component.
    pub samples: usize,
    /// Equivariant offset `<a, m>` added to the lattice translate `m` of the
    /// boundary (torus only).
    pub lattice_offset: Vec2,
    pub tolerances: Tolerances,
}

impl Scenario {
    pub fn new(chart: Chart) -> Self {
        let components = chart.boundary_curves().len();
        Scenario {
            chart,
            hamiltonian: Hamiltonian::Euclidean,
            data: BoundaryData::zero(components),
            samples: 1024,
            lattice_offset: Vec2::ZERO,
            tolerances: Tolerances::default(),
        }
    }

    /// Ring between circles of radius `r_in < r_out`, `g = 0`.
    pub fn annulus(r_in: f64, r_out: f64) -> Self {
        Scenario::new(Chart::Annulus { r_in, r_out })
    }

    pub fn disk(radius: f64) -> Self {
        Scenario::new(Chart::Disk { radius })
    }

    pub fn ellipse(a: f64, b: f64) -> Self {
        Scenario::new(Chart::Ellipse { a, b })
    }

    /// Unit flat torus with a small circle of `radius` around `source`.
    pub fn torus(source: Vec2, radius: f64) -> Self {
        Scenario::new(Chart::Torus { source, radius })
    }

    /// The four catalog scenarios used throughout the test suites.
    pub fn catalog() -> [(&'static str, Scenario); 4] {
        [
            ("annulus", Scenario::annulus(1.0, 2.0)),
            ("disk", Scenario::disk(1.0)),
            ("ellipse", Scenario::ellipse(1.5, 1.0)),
            ("torus", Scenario::torus(vec2(0.0, 0.0), 0.1)),
        ]
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_hamiltonian(mut self, h: Hamiltonian) -> Self {
        self.hamiltonian = h;
        self
    }

    pub fn with_data(mut self, data: BoundaryData) -> Self {
        self.data = data;
        self
    }

    /// Doubles the boundary mesh density `levels` times.
    pub fn refined(&self, levels: u32) -> Self {
        let mut s = self.clone();
        s.samples <<= levels;
        s
    }

    pub fn component_count(&self) -> usize {
        self.chart.boundary_curves().len()
    }
}

/// A validated scenario together with its boundary mesh and the
/// characteristic launched from every mesh sample.
#[derive(Debug, Clone)]
pub struct Problem {
    pub scenario: Scenario,
    pub mesh: BoundaryMesh,
    /// `rays[c][k]` starts at mesh sample `k` of component `c`.
    pub rays: Vec<Vec<Ray>>,
    pub(crate) cache: SolverCache,
}

/// Bounds used to prune boundary scans, derived once per problem.
#[derive(Debug, Clone, Default)]
pub(crate) struct SolverCache {
    /// Coarse scan stride in mesh samples.
    pub stride: usize,
    /// Lipschitz bound of `theta -> g(theta) + phi(p - gamma(theta))` per component.
    pub lipschitz: Vec<f64>,
    pub g_min: f64,
    /// `phi(v) >= c_phi |v|`.
    pub c_phi: f64,
    /// Largest Euclidean speed of a characteristic.
    pub speed_max: f64,
    /// Upper bound on the length of any minimizing characteristic.
    pub max_length: f64,
}

impl Problem {
    pub fn new(scenario: Scenario) -> Result<Self, Error> {
        scenario.chart.validate()?;
        let curves: Vec<BoundaryCurve> = scenario.chart.boundary_curves();
        if !scenario.lattice_offset.is_finite() {
            return Err(Error::InvalidArgument("lattice offset must be finite"));
        }
        if !scenario.chart.is_periodic() && scenario.lattice_offset != Vec2::ZERO {
            return Err(Error::InvalidArgument("lattice offsets only apply to the torus"));
        }
        let mesh = BoundaryMesh::new(&curves, &scenario.data, scenario.samples)?;
        let mut problem = Problem { scenario, mesh, rays: Vec::new(), cache: SolverCache::default() };
        let mut rays = Vec::with_capacity(curves.len());
        for (c, comp) in problem.mesh.components.iter().enumerate() {
            let mut row = Vec::with_capacity(comp.len());
            for s in comp {
                row.push(problem.ray_indexed(c, s.theta, s.index)?);
            }
            rays.push(row);
        }
        problem.rays = rays;
        problem.check_compatibility()?;
        problem.cache = problem.build_cache();
        Ok(problem)
    }

    fn build_cache(&self) -> SolverCache {
        let n = self.mesh.samples_per_component();
        let drift = match self.scenario.hamiltonian {
            Hamiltonian::Euclidean => 0.0,
            Hamiltonian::Randers { drift } => drift.norm(),
        };
        let phi_max = 1.0 / (1.0 - drift);
        let c_phi = 1.0 / (1.0 + drift);
        let mut g_min = f64::INFINITY;
        let mut g_max = f64::NEG_INFINITY;
        let mut lipschitz = Vec::with_capacity(self.components());
        for c in 0..self.components() {
            let mut l: f64 = 0.0;
            // Oversample the data so tabulated profiles are bounded too.
            for j in 0..4 * n {
                let theta = crate::math::TAU * j as f64 / (4 * n) as f64;
                let (g, g1, _) = self.scenario.data.eval(c, theta);
                g_min = g_min.min(g);
                g_max = g_max.max(g);
                let speed = self.mesh.curves[c].frame(theta).speed;
                l = l.max(speed * phi_max + crate::math::fabs(g1));
            }
            lipschitz.push(1.25 * l + 1e-12);
        }
        let slack = 0.05 * (g_max - g_min) + 1e-9;
        let speed_max = self.rays.iter().flatten().fold(0.0_f64, |m, r| m.max(r.velocity.norm()));
        let (lo, hi) = self.scenario.chart.bounds();
        let diameter = match self.scenario.chart {
            Chart::Torus { .. } => 1.5 + 2.0 * self.scenario.lattice_offset.norm(),
            _ => (hi - lo).norm(),
        };
        SolverCache {
            stride: (n / 256).max(1),
            lipschitz,
            g_min: g_min - slack,
            c_phi,
            speed_max,
            max_length: diameter * phi_max + (g_max - g_min) + 2.0 * slack,
        }
    }

    pub fn chart(&self) -> &Chart {
        &self.scenario.chart
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.scenario.hamiltonian
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.scenario.tolerances
    }

    pub fn components(&self) -> usize {
        self.mesh.curves.len()
    }

    /// Boundary value `g(theta)` on component `c` (offsets included).
    pub fn boundary_value(&self, c: usize, theta: f64) -> f64 {
        self.scenario.data.value(c, theta)
    }

    /// Same geometry and data with different constant offsets.
    pub fn with_offsets(&self, component_offsets: &[f64], lattice_offset: Vec2) -> Result<Problem, Error> {
        if component_offsets.len() != self.components() {
            return Err(Error::InvalidArgument("one offset per boundary component"));
        }
        let mut scenario = self.scenario.clone();
        scenario.data.offsets = component_offsets.to_vec();
        scenario.lattice_offset = lattice_offset;
        Problem::new(scenario)
    }

    /// Compatibility `g(y) - g(z) < d(z, y)` on sampled boundary pairs,
    /// including lattice translates on the torus.
    pub fn check_compatibility(&self) -> Result<(), Error> {
        let chart = &self.scenario.chart;
        let h = &self.scenario.hamiltonian;
        let stride = (self.mesh.samples_per_component() / 256).max(1);
        let samples: Vec<_> = self.mesh.iter().filter(|s| s.index % stride == 0).collect();
        let shifts: Vec<(Vec2, f64)> = if chart.is_periodic() {
            let mut v = Vec::new();
            for i in -2..=2 {
                for j in -2..=2 {
                    let m = vec2(i as f64, j as f64);
                    v.push((m, self.scenario.lattice_offset.dot(m)));
                }
            }
            v
        } else {
            alloc::vec![(Vec2::ZERO, 0.0)]
        };
        for y in &samples {
            for z in &samples {
                for &(m, am) in &shifts {
                    let same = y.component == z.component && y.index == z.index && m == Vec2::ZERO;
                    if same {
                        continue;
                    }
                    // z translated by m carries data g(z) + <a, m>.
                    let zp = z.frame.point + m;
                    let d = h.phi(y.frame.point - zp);
                    let excess = (y.value - (z.value + am)) - d;
                    if excess >= 0.0 {
                        return Err(Error::IncompatiblePair {
                            from: (z.component, z.index),
                            to: (y.component, y.index),
                            excess,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}
