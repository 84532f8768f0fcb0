//! Command orchestration: each command computes its results, writes the
//! artifacts into the output directory and returns the run report.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use splitlocus_core::analysis::{self, Census, Label};
use splitlocus_core::family::{self, AdmissibleRange, FamilyMode, FamilyParam};
use splitlocus_core::splitlocus::{singular_set_with, CandidateLocus, HValue, SplitContext};
use splitlocus_core::exec::Executor;
use splitlocus_core::{Error as CoreError, Problem, Vec2};

use crate::exec::Rayon;
use crate::output;
use crate::scenario_file::{ScenarioError, ScenarioFile};

/// `|T(d sigma)| / (1 + |sigma|_inf)` must stay below this.
pub const BOUNDARY_TOL: f64 = 1e-3;
/// Relative spread of the jump along one cleave component.
pub const JUMP_TOL: f64 = 1e-6;
/// Sup gap between the viscosity solution and `h`.
pub const SOLVER_TOL: f64 = 5e-4;
/// Slack allowed in `rho <= lambda_1`.
pub const RHO_SLACK: f64 = 1e-8;
/// Round-trip tolerance of the homology coordinate.
pub const HOMOLOGY_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Family,
    Verify,
    Classify,
    Current,
    Plot,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub refine: u32,
    pub seed: Option<u64>,
}

#[derive(Debug)]
pub enum RunError {
    /// The scenario cannot be run (exit code 2).
    Scenario(ScenarioError),
    Io(std::io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Scenario(e) => write!(f, "invalid scenario: {e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Io(e.into())
    }
}

fn invalid(e: CoreError) -> RunError {
    RunError::Scenario(ScenarioError { line: None, message: e.to_string() })
}

/// One pass/fail check with the evidence behind it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<serde_json::Value>,
}

impl Check {
    fn new(name: &str, passed: bool, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), passed, value, tolerance, witness: None }
    }

    fn with_witness(mut self, w: serde_json::Value) -> Self {
        if !self.passed {
            self.witness = Some(w);
        }
        self
    }
}

/// Contents of `report.json`: everything is a function of the scenario
/// file, the seed and the refinement level. Timings go to `timing.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: Command,
    pub digest: String,
    pub seed: u64,
    pub refine: u32,
    pub samples: usize,
    pub checks: Vec<Check>,
    pub summary: serde_json::Value,
    pub outputs: Vec<String>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Serialize)]
struct Timing<'a> {
    command: Command,
    stages: &'a [(String, f64)],
    total_seconds: f64,
}

struct Stopwatch {
    start: Instant,
    last: Instant,
    stages: Vec<(String, f64)>,
}

impl Stopwatch {
    fn new() -> Self {
        let now = Instant::now();
        Stopwatch { start: now, last: now, stages: Vec::new() }
    }

    fn lap(&mut self, name: &str) {
        let now = Instant::now();
        self.stages.push((name.into(), (now - self.last).as_secs_f64()));
        self.last = now;
    }
}

fn vec_json(p: Vec2) -> serde_json::Value {
    serde_json::json!([p.x, p.y])
}

/// Runs `command` on `file`, writing artifacts and `report.json` into
/// `opts.out`.
pub fn run(command: Command, file: &ScenarioFile, opts: &RunOptions) -> Result<RunReport, RunError> {
    fs::create_dir_all(&opts.out)?;
    let mut clock = Stopwatch::new();
    let scenario = file.scenario.refined(opts.refine);
    let seed = opts.seed.unwrap_or(file.seed);
    let problem = Problem::new(scenario).map_err(invalid)?;
    clock.lap("characteristics");
    let locus = singular_set_with(&problem, &Rayon).map_err(invalid)?;
    clock.lap("singular set");

    let mut outputs = Vec::new();
    let (checks, summary) = match command {
        Command::Solve => solve(file, &problem, &locus, &opts.out, &mut outputs, &mut clock)?,
        Command::Family => family_scan(file, &problem, &opts.out, &mut outputs, &mut clock)?,
        Command::Verify => verify(file, &problem, &locus, seed, &mut clock),
        Command::Classify => classify(&problem, &locus, &opts.out, &mut outputs, &mut clock)?,
        Command::Current => current(file, &problem, &locus, seed, &mut clock),
        Command::Plot => plot(file, &problem, &locus, &opts.out, &mut outputs, &mut clock)?,
    };
    outputs.push("report.json".into());
    let report = RunReport {
        command,
        digest: file.digest.clone(),
        seed,
        refine: opts.refine,
        samples: problem.scenario.samples,
        checks,
        summary,
        outputs,
    };
    write_json(&opts.out.join("report.json"), &report)?;
    let timing = Timing { command, stages: &clock.stages, total_seconds: clock.start.elapsed().as_secs_f64() };
    write_json(&opts.out.join("timing.json"), &timing)?;
    Ok(report)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| RunError::Io(e.into()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

type Outcome = (Vec<Check>, serde_json::Value);

fn solve(
    file: &ScenarioFile,
    problem: &Problem,
    locus: &CandidateLocus,
    out: &Path,
    outputs: &mut Vec<String>,
    clock: &mut Stopwatch,
) -> Result<Outcome, RunError> {
    let grid = output::write_u_grid(&out.join("u_grid.csv"), problem, file.grid)?;
    clock.lap("u grid");
    let ctx = SplitContext::new_with(problem, locus, &Rayon);
    let census = analysis::census_with(&ctx, &Rayon);
    output::write_locus(&out.join("locus.csv"), locus, &census)?;
    clock.lap("census");
    outputs.extend(["u_grid.csv".to_string(), "locus.csv".to_string()]);
    let summary = serde_json::json!({
        "grid_points": grid.points,
        "u_min": grid.min,
        "u_max": grid.max,
        "locus_vertices": locus.vertex_count(),
        "locus_chains": locus.chains.len(),
        "census": census_json(&census),
    });
    Ok((Vec::new(), summary))
}

fn census_json(c: &Census) -> serde_json::Value {
    let counts: serde_json::Map<String, serde_json::Value> =
        Label::ALL.iter().map(|l| (l.name().to_string(), c.count(*l).into())).collect();
    let features: Vec<serde_json::Value> = c
        .features
        .iter()
        .map(|f| serde_json::json!({ "label": f.label.name(), "center": vec_json(f.center), "samples": f.samples }))
        .collect();
    serde_json::json!({
        "samples": c.points.len(),
        "counts": counts,
        "cleave_fraction": c.cleave_fraction(),
        "features": features,
    })
}

fn classify(
    problem: &Problem,
    locus: &CandidateLocus,
    out: &Path,
    outputs: &mut Vec<String>,
    clock: &mut Stopwatch,
) -> Result<Outcome, RunError> {
    let ctx = SplitContext::new_with(problem, locus, &Rayon);
    let census = analysis::census_with(&ctx, &Rayon);
    clock.lap("census");
    output::write_locus(&out.join("locus.csv"), locus, &census)?;
    outputs.push("locus.csv".into());
    // Every label must satisfy its defining predicate on the stored data.
    let bad = census.points.iter().find(|p| {
        let conj = p.orders.iter().filter(|o| **o > 0).count();
        !match p.label {
            Label::Cleave => p.arrivals == 2 && conj == 0,
            Label::DegenerateCleave => p.arrivals == 2 && conj >= 1,
            Label::Edge => p.arrivals == 1 && conj == 1,
            Label::Crossing => p.arrivals >= 3 && p.dual_dim == 2,
            Label::Remainder => true,
        }
    });
    let check = Check::new("labels consistent", bad.is_none(), bad.is_some() as u8 as f64, 0.0)
        .with_witness(bad.map(|p| vec_json(p.point)).unwrap_or_default());
    Ok((vec![check], census_json(&census)))
}

fn current_checks(file: &ScenarioFile, ctx: &SplitContext<'_>, seed: u64) -> (Vec<Check>, serde_json::Value) {
    let forms = analysis::test_form_suite(ctx, file.forms, seed);
    let report = analysis::current_report(ctx, &forms, &Rayon);
    let worst_form = report.forms.iter().max_by(|a, b| a.normalized.total_cmp(&b.normalized));
    let boundary = Check::new("boundary of current", report.worst < BOUNDARY_TOL, report.worst, BOUNDARY_TOL)
        .with_witness(
            worst_form
                .map(|f| {
                    serde_json::json!({
                        "center": vec_json(f.form.center),
                        "scale": f.form.scale,
                        "amplitude": f.form.amplitude,
                        "value": f.value,
                    })
                })
                .unwrap_or_default(),
        );
    let worst_run = report.runs.iter().max_by(|a, b| a.relative_deviation().total_cmp(&b.relative_deviation()));
    let dev = worst_run.map_or(0.0, |r| r.relative_deviation());
    let jumps = Check::new("jump constant per component", dev < JUMP_TOL, dev, JUMP_TOL).with_witness(
        worst_run
            .map(|r| serde_json::json!({ "chain": r.chain, "start": r.start, "mean": r.mean, "deviation": r.max_deviation }))
            .unwrap_or_default(),
    );
    let runs: Vec<serde_json::Value> = report
        .runs
        .iter()
        .map(|r| {
            serde_json::json!({
                "chain": r.chain,
                "start": r.start,
                "vertices": r.vertices,
                "arclength": r.arclength,
                "own": [r.own.component, r.own.lift.0, r.own.lift.1],
                "partner": [r.partner.component, r.partner.lift.0, r.partner.lift.1],
                "mean_jump": r.mean,
                "jump_deviation": r.max_deviation,
            })
        })
        .collect();
    let forms: Vec<serde_json::Value> = report
        .forms
        .iter()
        .map(|f| serde_json::json!({ "center": vec_json(f.form.center), "scale": f.form.scale, "value": f.value }))
        .collect();
    let summary = serde_json::json!({
        "runs": runs,
        "forms": forms,
        "skipped_segments": report.skipped,
        "worst_normalized": report.worst,
    });
    (vec![boundary, jumps], summary)
}

fn current(file: &ScenarioFile, problem: &Problem, locus: &CandidateLocus, seed: u64, clock: &mut Stopwatch) -> Outcome {
    let ctx = SplitContext::new_with(problem, locus, &Rayon);
    let out = current_checks(file, &ctx, seed);
    clock.lap("current");
    out
}

/// The parameter the scenario's own offsets select.
fn own_param(problem: &Problem) -> Option<FamilyParam> {
    let s = &problem.scenario;
    if s.chart.is_periodic() {
        Some(FamilyParam::TorusLattice(s.lattice_offset))
    } else if s.component_count() > 1 {
        Some(FamilyParam::ComponentOffsets(s.data.offsets.clone()))
    } else {
        None
    }
}

fn verify(file: &ScenarioFile, problem: &Problem, locus: &CandidateLocus, seed: u64, clock: &mut Stopwatch) -> Outcome {
    let ctx = SplitContext::new_with(problem, locus, &Rayon);
    let mut checks = Vec::new();

    let balanced = ctx.is_balanced_with(&Rayon);
    let split = &balanced.split_locus.split;
    checks.push(
        Check::new("split", split.passed, split.failures as f64, 0.0).with_witness(
            split.witness.map(|w| serde_json::json!({ "point": vec_json(w.point), "arrivals": w.arrivals })).unwrap_or_default(),
        ),
    );
    let sl = &balanced.split_locus;
    checks.push(
        Check::new("split locus", sl.passed, sl.multi as f64, sl.samples as f64)
            .with_witness(sl.witness.map(vec_json).unwrap_or_default()),
    );
    checks.push(
        Check::new("balanced", balanced.passed, balanced.worst, problem.tolerances().balanced_tol).with_witness(
            balanced
                .witness
                .map(|w| {
                    serde_json::json!({
                        "point": vec_json(w.point),
                        "direction": vec_json(w.direction),
                        "violation": w.violation,
                    })
                })
                .or_else(|| balanced.witness_point().map(|p| serde_json::json!({ "point": vec_json(p) })))
                .unwrap_or_default(),
        ),
    );
    clock.lap("split and balanced");

    // Lax-Oleinik against the characteristic solution h off the locus.
    let grid = ctx.audit_grid();
    let gaps = par_points(&grid, |x| {
        if locus.distance(x) <= problem.tolerances().match_tol {
            return Some(0.0);
        }
        match (ctx.h_value(x), problem.viscosity_solution(x)) {
            (Ok(HValue::Unique(h)), Ok(u)) => Some((h - u).abs()),
            _ => None,
        }
    });
    let mut worst = (0.0, None);
    for (x, g) in grid.iter().zip(&gaps) {
        let g = g.unwrap_or(f64::INFINITY);
        if g > worst.0 || (g.is_infinite() && worst.1.is_none()) {
            worst = (g, Some(*x));
        }
    }
    checks.push(
        Check::new("h equals u", worst.0 < SOLVER_TOL, worst.0, SOLVER_TOL)
            .with_witness(worst.1.map(vec_json).unwrap_or_default()),
    );
    clock.lap("solver cross-check");

    // rho <= lambda_1 at every boundary sample.
    let mut slack = (f64::INFINITY, None);
    for (c, row) in ctx.rho_samples().iter().enumerate() {
        for (k, r) in row.iter().enumerate() {
            let theta = problem.mesh.components[c][k].theta;
            if let Ok(rec) = problem.conjugate_times(c, theta, r.rho * (1.0 + 1e-9) + 1e-9) {
                let s = rec.lambda(1) - r.rho;
                if s < slack.0 {
                    slack = (s, Some((c, theta)));
                }
            }
        }
    }
    checks.push(
        Check::new("rho below lambda_1", slack.0 >= -RHO_SLACK, slack.0, -RHO_SLACK).with_witness(
            slack.1.map(|(c, th)| serde_json::json!({ "component": c, "theta": th })).unwrap_or_default(),
        ),
    );
    clock.lap("rho against lambda");

    let (current, _) = current_checks(file, &ctx, seed);
    checks.extend(current);
    clock.lap("current");

    if let Some(param) = own_param(problem) {
        match family::homology_class(&ctx) {
            Ok(h) => {
                let expected = param.coordinates();
                let err = h.coords.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                checks.push(
                    Check::new("homology round trip", err < HOMOLOGY_TOL, err, HOMOLOGY_TOL)
                        .with_witness(serde_json::json!({ "coords": h.coords, "expected": expected })),
                );
            }
            Err(e) => checks.push(
                Check::new("homology round trip", false, f64::INFINITY, HOMOLOGY_TOL)
                    .with_witness(serde_json::json!({ "error": e.to_string() })),
            ),
        }
        clock.lap("homology");
    }

    let summary = serde_json::json!({
        "locus_vertices": locus.vertex_count(),
        "audit_points": grid.len(),
        "balanced_worst": balanced.worst,
        "min_rho_slack": slack.0,
    });
    (checks, summary)
}

fn par_points<T: Send>(points: &[Vec2], f: impl Fn(Vec2) -> T + Sync + Send) -> Vec<T> {
    Rayon.map(points.len(), |i| f(points[i]))
}

/// One row of `family.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyRow {
    pub param: Vec<f64>,
    pub admissible: bool,
    pub homology: Vec<f64>,
    pub note: String,
}

fn family_scan(
    file: &ScenarioFile,
    base: &Problem,
    out: &Path,
    outputs: &mut Vec<String>,
    clock: &mut Stopwatch,
) -> Result<Outcome, RunError> {
    let Some(grid) = &file.family else {
        return Err(RunError::Scenario(ScenarioError { line: None, message: "the family command needs a [family] table".into() }));
    };
    let mode = grid.params[0].mode();
    let lattice: Vec<Vec2> = grid
        .params
        .iter()
        .filter_map(|p| match p {
            FamilyParam::TorusLattice(a) => Some(*a),
            FamilyParam::ComponentOffsets(_) => None,
        })
        .collect();
    let range = family::admissible_range(base, mode, &lattice, &Rayon);
    clock.lap("admissible range");

    let rows: Vec<FamilyRow> = grid
        .params
        .iter()
        .map(|param| family_row(base, param, &range, grid.check_balanced && mode == FamilyMode::ComponentOffsets))
        .collect();
    clock.lap("members");
    output::write_family(&out.join("family.csv"), &rows)?;
    outputs.push("family.csv".into());

    let mut checks = Vec::new();
    let worst = rows
        .iter()
        .filter(|r| r.admissible)
        .map(|r| {
            let expected = FamilyParam::coordinates(&param_of(mode, &r.param));
            let err = r.homology.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            (err, r)
        })
        .max_by(|a, b| a.0.total_cmp(&b.0));
    let err = worst.map_or(0.0, |w| w.0);
    checks.push(
        Check::new("homology round trip", err < HOMOLOGY_TOL, err, HOMOLOGY_TOL)
            .with_witness(worst.map(|(_, r)| serde_json::json!({ "param": r.param, "homology": r.homology })).unwrap_or_default()),
    );
    let zero = rows.iter().find(|r| r.param.iter().all(|v| *v == 0.0));
    if let Some(z) = zero {
        checks.push(Check::new("zero admissible", z.admissible, z.admissible as u8 as f64, 1.0).with_witness(z.note.clone().into()));
    }

    let range_json = match &range {
        AdmissibleRange::Pairwise(bounds) => serde_json::json!({
            "pairwise": bounds
                .iter()
                .map(|b| serde_json::json!({ "i": b.i, "j": b.j, "lower": b.lower, "upper": b.upper }))
                .collect::<Vec<_>>(),
        }),
        AdmissibleRange::Scan { points, symmetric } => {
            let symmetric_check = Check::new("symmetric scan", *symmetric, *symmetric as u8 as f64, 1.0);
            checks.push(symmetric_check);
            serde_json::json!({
                "admissible": points.iter().filter(|p| p.admissible).count(),
                "scanned": points.len(),
                "symmetric": symmetric,
            })
        }
    };
    let admissible: Vec<&FamilyRow> = rows.iter().filter(|r| r.admissible).collect();
    let summary = serde_json::json!({
        "mode": match mode { FamilyMode::ComponentOffsets => "component-offsets", FamilyMode::TorusLattice => "torus-lattice" },
        "range": range_json,
        "members": rows.len(),
        "admissible": admissible.len(),
    });
    Ok((checks, summary))
}

fn param_of(mode: FamilyMode, v: &[f64]) -> FamilyParam {
    match mode {
        FamilyMode::ComponentOffsets => FamilyParam::ComponentOffsets(v.to_vec()),
        FamilyMode::TorusLattice => FamilyParam::TorusLattice(Vec2 { x: v[0], y: v[1] }),
    }
}

fn family_row(base: &Problem, param: &FamilyParam, range: &AdmissibleRange, check_balanced: bool) -> FamilyRow {
    let values = match param {
        FamilyParam::ComponentOffsets(a) => a.clone(),
        FamilyParam::TorusLattice(a) => vec![a.x, a.y],
    };
    let mut row = FamilyRow { param: values, admissible: range.contains(param) == Some(true), homology: Vec::new(), note: String::new() };
    if !row.admissible {
        row.note = "outside the admissible range".into();
        return row;
    }
    let member = match family::family_member_with(base, param, &Rayon) {
        Ok(m) => m,
        Err(e) => {
            row.admissible = false;
            row.note = e.to_string();
            return row;
        }
    };
    let ctx = member.context_with(&Rayon);
    if check_balanced {
        let report = ctx.is_balanced_with(&Rayon);
        if !report.passed {
            row.admissible = false;
            row.note = match report.witness_point() {
                Some(p) => format!("not balanced near ({}, {})", p.x, p.y),
                None => "not balanced".into(),
            };
            return row;
        }
    }
    match family::homology_class(&ctx) {
        Ok(h) => row.homology = h.coords,
        Err(e) => row.note = e.to_string(),
    }
    row
}

fn plot(
    file: &ScenarioFile,
    problem: &Problem,
    locus: &CandidateLocus,
    out: &Path,
    outputs: &mut Vec<String>,
    clock: &mut Stopwatch,
) -> Result<Outcome, RunError> {
    let ctx = SplitContext::new_with(problem, locus, &Rayon);
    let census = analysis::census_with(&ctx, &Rayon);
    clock.lap("census");
    let svg = output::figure(problem, locus, &census, file.characteristics);
    fs::write(out.join("figure.svg"), svg)?;
    outputs.push("figure.svg".into());
    clock.lap("figure");
    Ok((Vec::new(), census_json(&census)))
}
