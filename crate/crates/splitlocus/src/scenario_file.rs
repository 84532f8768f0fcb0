//! Scenario files: TOML with one table per concern. Every key is optional
//! except the chart; unknown keys are rejected and every error carries the
//! line it refers to.
//!
//! ```toml
//! seed = 7
//!
//! [chart]
//! kind = "annulus"
//! r_in = 1.0
//! r_out = 2.0
//!
//! [boundary]
//! samples = 1024
//! g = 0.0                 # or one constant per component: g = [0.0, 0.5]
//! offsets = [0.4, 0.0]
//!
//! [family]
//! mode = "component-offsets"
//! values = [-0.8, -0.4, 0.0, 0.4, 0.8]
//!
//! [tolerances]
//! balanced_tol = 1e-3
//! ```

use std::fmt;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use splitlocus_core::family::FamilyParam;
use splitlocus_core::{vec2, BoundaryData, Chart, Hamiltonian, Profile, Scenario, Tolerances};

/// A scenario file that failed to parse or validate.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    seed: Option<u64>,
    chart: ChartSpec,
    hamiltonian: Option<HamiltonianSpec>,
    boundary: Option<BoundarySpec>,
    family: Option<FamilySpec>,
    tolerances: Option<TolerancesSpec>,
    output: Option<OutputSpec>,
}

// Tables are flat structs (not tagged enums) so that unknown keys keep
// their own line in parse errors.

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ChartKind {
    Annulus,
    Disk,
    Ellipse,
    Torus,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChartSpec {
    kind: ChartKind,
    r_in: Option<f64>,
    r_out: Option<f64>,
    radius: Option<f64>,
    a: Option<f64>,
    b: Option<f64>,
    source: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum HamiltonianKind {
    Euclidean,
    Randers,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HamiltonianSpec {
    kind: HamiltonianKind,
    drift: Option<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ConstantSpec {
    All(f64),
    PerComponent(Vec<f64>),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ProfileKind {
    Constant,
    Harmonic,
    Tabulated,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileSpec {
    kind: ProfileKind,
    value: Option<f64>,
    mean: Option<f64>,
    amplitude: Option<f64>,
    frequency: Option<u32>,
    phase: Option<f64>,
    values: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundarySpec {
    samples: Option<usize>,
    g: Option<ConstantSpec>,
    profile: Option<Vec<ProfileSpec>>,
    offsets: Option<Vec<f64>>,
    lattice_offset: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum FamilyKind {
    ComponentOffsets,
    TorusLattice,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilySpec {
    mode: FamilyKind,
    component: Option<usize>,
    values: Option<Vec<f64>>,
    check_balanced: Option<bool>,
    x: Option<[f64; 2]>,
    y: Option<[f64; 2]>,
    steps: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TolerancesSpec {
    dt: Option<f64>,
    sigma_tol: Option<f64>,
    value_gap: Option<f64>,
    dir_tol: Option<f64>,
    match_tol: Option<f64>,
    arrival_tol: Option<f64>,
    cluster_tol: Option<f64>,
    dense_factor: Option<f64>,
    balanced_tol: Option<f64>,
    approach_eps: Option<f64>,
    bisection_tol: Option<f64>,
    audit_grid: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSpec {
    grid: Option<usize>,
    forms: Option<usize>,
    characteristics: Option<bool>,
}

/// Parameter grid for the `family` command.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyGrid {
    pub params: Vec<FamilyParam>,
    /// Also run the split and balanced checks on admissible members.
    pub check_balanced: bool,
}

/// A parsed scenario together with run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub scenario: Scenario,
    pub seed: u64,
    pub family: Option<FamilyGrid>,
    /// Resolution per axis of `u_grid.csv`.
    pub grid: usize,
    /// Size of the test-form suite.
    pub forms: usize,
    /// Draw characteristics in `figure.svg`.
    pub characteristics: bool,
    /// SHA-256 of the file contents.
    pub digest: String,
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

/// Validation errors name the first header line of their table
/// (`[table]`, `[table.sub]` or `[[table.sub]]`).
fn at(src: &str, table: &str, message: impl Into<String>) -> ScenarioError {
    let line = src.lines().position(|l| {
        let l = l.trim_start().trim_start_matches('[').trim_start();
        l.strip_prefix(table).is_some_and(|rest| rest.starts_with(']') || rest.starts_with('.'))
    });
    ScenarioError { line: line.map(|l| l + 1), message: message.into() }
}

fn finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

pub fn read(path: &Path) -> Result<ScenarioFile, ScenarioError> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| ScenarioError { line: None, message: format!("cannot read {}: {e}", path.display()) })?;
    parse(&src)
}

pub fn parse(src: &str) -> Result<ScenarioFile, ScenarioError> {
    let raw: RawFile = toml::from_str(src).map_err(|e| ScenarioError {
        line: e.span().map(|s| line_of(src, s.start)),
        message: e.message().to_string(),
    })?;

    let chart = chart(src, &raw.chart)?;
    let mut scenario = Scenario::new(chart);
    let components = scenario.component_count();

    if let Some(h) = &raw.hamiltonian {
        scenario.hamiltonian = match (h.kind, h.drift) {
            (HamiltonianKind::Euclidean, None) => Hamiltonian::Euclidean,
            (HamiltonianKind::Euclidean, Some(_)) => return Err(at(src, "hamiltonian", "drift only applies to a randers hamiltonian")),
            (HamiltonianKind::Randers, None) => return Err(at(src, "hamiltonian", "randers needs drift = [bx, by]")),
            (HamiltonianKind::Randers, Some([x, y])) => Hamiltonian::randers(vec2(x, y))
                .map_err(|e| at(src, "hamiltonian", format!("randers: {e} (need |drift| < 1)")))?,
        };
    }

    if let Some(spec) = &raw.boundary {
        let b = "boundary";
        if let Some(n) = spec.samples {
            if n < 16 {
                return Err(at(src, b, "samples must be at least 16"));
            }
            scenario.samples = n;
        }
        let profiles: Vec<Profile> = match (&spec.g, &spec.profile) {
            (Some(_), Some(_)) => return Err(at(src, b, "give either g or profile, not both")),
            (None, None) => vec![Profile::Constant(0.0); components],
            (Some(ConstantSpec::All(v)), None) => vec![Profile::Constant(*v); components],
            (Some(ConstantSpec::PerComponent(v)), None) => v.iter().map(|c| Profile::Constant(*c)).collect(),
            (None, Some(list)) => list.iter().map(|p| profile(src, p)).collect::<Result<_, _>>()?,
        };
        if profiles.len() != components {
            return Err(at(src, b, format!("boundary data has {} entries, the chart has {components} components", profiles.len())));
        }
        for p in &profiles {
            p.validate().map_err(|e| at(src, b, e.to_string()))?;
        }
        let mut data = BoundaryData::new(profiles);
        if let Some(offsets) = &spec.offsets {
            if offsets.len() != components || !finite(offsets) {
                return Err(at(src, b, format!("offsets needs {components} finite values")));
            }
            data.offsets = offsets.clone();
        }
        scenario.data = data;
        if let Some([x, y]) = spec.lattice_offset {
            if !chart.is_periodic() {
                return Err(at(src, b, "lattice_offset only applies to a torus chart"));
            }
            if !finite(&[x, y]) {
                return Err(at(src, b, "lattice_offset must be finite"));
            }
            scenario.lattice_offset = vec2(x, y);
        }
    }

    let family = match &raw.family {
        None => None,
        Some(f) => Some(family(src, f, &chart, components)?),
    };

    if let Some(t) = &raw.tolerances {
        scenario.tolerances = tolerances(src, t)?;
    }
    let output = raw.output.unwrap_or_default();
    let grid = output.grid.unwrap_or(100);
    if !(2..=2000).contains(&grid) {
        return Err(ScenarioError { line: None, message: format!("output grid {grid} outside 2..=2000") });
    }

    Ok(ScenarioFile {
        scenario,
        seed: raw.seed.unwrap_or(0),
        family,
        grid,
        forms: output.forms.unwrap_or(50),
        characteristics: output.characteristics.unwrap_or(true),
        digest: format!("{:x}", Sha256::digest(src.as_bytes())),
    })
}

fn chart(src: &str, c: &ChartSpec) -> Result<Chart, ScenarioError> {
    let err = |m: &str| Err(at(src, "chart", m));
    let given = |name: &str, v: &Option<f64>| v.map(|_| name.to_string());
    // Keys that belong to another chart kind.
    let stray: Vec<String> = match c.kind {
        ChartKind::Annulus => [given("radius", &c.radius), given("a", &c.a), given("b", &c.b)].into_iter().flatten().collect(),
        ChartKind::Disk => [given("r_in", &c.r_in), given("r_out", &c.r_out), given("a", &c.a), given("b", &c.b)].into_iter().flatten().collect(),
        ChartKind::Ellipse => [given("r_in", &c.r_in), given("r_out", &c.r_out), given("radius", &c.radius)].into_iter().flatten().collect(),
        ChartKind::Torus => [given("r_in", &c.r_in), given("r_out", &c.r_out), given("a", &c.a), given("b", &c.b)].into_iter().flatten().collect(),
    };
    let stray = stray.into_iter().chain((c.source.is_some() && !matches!(c.kind, ChartKind::Torus)).then(|| "source".to_string()));
    if let Some(k) = stray.into_iter().next() {
        return err(&format!("`{k}` does not apply to this chart kind"));
    }
    match c.kind {
        ChartKind::Annulus => match (c.r_in, c.r_out) {
            (Some(r_in), Some(r_out)) if finite(&[r_in, r_out]) && 0.0 < r_in && r_in < r_out => Ok(Chart::Annulus { r_in, r_out }),
            _ => err("annulus needs 0 < r_in < r_out"),
        },
        ChartKind::Disk => match c.radius {
            Some(radius) if radius.is_finite() && radius > 0.0 => Ok(Chart::Disk { radius }),
            _ => err("disk needs a positive radius"),
        },
        ChartKind::Ellipse => match (c.a, c.b) {
            (Some(a), Some(b)) if finite(&[a, b]) && a > 0.0 && b > 0.0 => Ok(Chart::Ellipse { a, b }),
            _ => err("ellipse needs positive semi-axes a and b"),
        },
        ChartKind::Torus => {
            let [x, y] = c.source.unwrap_or([0.0, 0.0]);
            match c.radius {
                Some(radius) if finite(&[x, y, radius]) && radius > 0.0 && radius < 0.5 => {
                    Ok(Chart::Torus { source: vec2(x, y), radius })
                }
                _ => err("torus needs a finite source and 0 < radius < 0.5"),
            }
        }
    }
}

fn profile(src: &str, p: &ProfileSpec) -> Result<Profile, ScenarioError> {
    let err = |m: &str| Err(at(src, "boundary", m));
    match p.kind {
        ProfileKind::Constant => match p.value {
            Some(v) => Ok(Profile::Constant(v)),
            None => err("constant profile needs value"),
        },
        ProfileKind::Harmonic => match (p.amplitude, p.frequency) {
            (Some(amplitude), Some(frequency)) => Ok(Profile::Harmonic {
                mean: p.mean.unwrap_or(0.0),
                amplitude,
                frequency,
                phase: p.phase.unwrap_or(0.0),
            }),
            _ => err("harmonic profile needs amplitude and frequency"),
        },
        ProfileKind::Tabulated => match &p.values {
            Some(v) => Ok(Profile::Tabulated(v.clone())),
            None => err("tabulated profile needs values"),
        },
    }
}

fn family(src: &str, f: &FamilySpec, chart: &Chart, components: usize) -> Result<FamilyGrid, ScenarioError> {
    let err = |m: String| Err(at(src, "family", m));
    match f.mode {
        FamilyKind::ComponentOffsets => {
            if chart.is_periodic() || components < 2 {
                return err("component offsets need a chart with several boundary components".into());
            }
            if f.x.is_some() || f.y.is_some() || f.steps.is_some() {
                return err("x, y and steps belong to the torus-lattice mode".into());
            }
            let c = f.component.unwrap_or(0);
            if c >= components {
                return err(format!("component {c} out of range (chart has {components})"));
            }
            let values = match &f.values {
                Some(v) if !v.is_empty() && finite(v) => v,
                _ => return err("values must be a non-empty list of finite numbers".into()),
            };
            let params = values
                .iter()
                .map(|v| {
                    let mut a = vec![0.0; components];
                    a[c] = *v;
                    FamilyParam::ComponentOffsets(a)
                })
                .collect();
            Ok(FamilyGrid { params, check_balanced: f.check_balanced.unwrap_or(true) })
        }
        FamilyKind::TorusLattice => {
            if !chart.is_periodic() {
                return err("torus-lattice family needs a torus chart".into());
            }
            if f.component.is_some() || f.values.is_some() {
                return err("component and values belong to the component-offsets mode".into());
            }
            let (Some(x), Some(y), Some(steps)) = (f.x, f.y, f.steps) else {
                return err("torus-lattice needs x, y and steps".into());
            };
            if steps < 1 || !finite(&x) || !finite(&y) {
                return err("steps must be positive and the ranges finite".into());
            }
            let axis = |r: [f64; 2], k: usize| {
                if steps == 1 {
                    r[0]
                } else {
                    let s = k as f64 / (steps - 1) as f64;
                    r[0] * (1.0 - s) + r[1] * s
                }
            };
            let params = (0..steps)
                .flat_map(|j| (0..steps).map(move |i| (i, j)))
                .map(|(i, j)| FamilyParam::TorusLattice(vec2(axis(x, i), axis(y, j))))
                .collect();
            Ok(FamilyGrid { params, check_balanced: f.check_balanced.unwrap_or(true) })
        }
    }
}

fn tolerances(src: &str, t: &TolerancesSpec) -> Result<Tolerances, ScenarioError> {
    let d = Tolerances::default();
    let tol = Tolerances {
        dt: t.dt.unwrap_or(d.dt),
        sigma_tol: t.sigma_tol.unwrap_or(d.sigma_tol),
        value_gap: t.value_gap.unwrap_or(d.value_gap),
        dir_tol: t.dir_tol.unwrap_or(d.dir_tol),
        match_tol: t.match_tol.unwrap_or(d.match_tol),
        arrival_tol: t.arrival_tol.unwrap_or(d.arrival_tol),
        cluster_tol: t.cluster_tol.unwrap_or(d.cluster_tol),
        dense_factor: t.dense_factor.unwrap_or(d.dense_factor),
        balanced_tol: t.balanced_tol.unwrap_or(d.balanced_tol),
        approach_eps: t.approach_eps.unwrap_or(d.approach_eps),
        bisection_tol: t.bisection_tol.unwrap_or(d.bisection_tol),
        audit_grid: t.audit_grid.unwrap_or(d.audit_grid),
    };
    let values = [
        tol.dt, tol.sigma_tol, tol.value_gap, tol.dir_tol, tol.match_tol, tol.arrival_tol,
        tol.cluster_tol, tol.dense_factor, tol.balanced_tol, tol.approach_eps, tol.bisection_tol,
    ];
    if !values.iter().all(|v| v.is_finite() && *v > 0.0) {
        return Err(at(src, "tolerances", "tolerances must be positive and finite"));
    }
    if !(2..=2000).contains(&tol.audit_grid) {
        return Err(at(src, "tolerances", format!("audit_grid {} outside 2..=2000", tol.audit_grid)));
    }
    Ok(tol)
}
