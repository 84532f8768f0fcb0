//! CSV artifacts and the SVG figure.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use splitlocus_core::analysis::{Census, Label};
use splitlocus_core::exec::Executor;
use splitlocus_core::math::TAU;
use splitlocus_core::splitlocus::CandidateLocus;
use splitlocus_core::{vec2, Chart, Problem, Vec2};

use crate::exec::Rayon;
use crate::run::{FamilyRow, RunError};

#[derive(Serialize)]
struct GridRow {
    x: f64,
    y: f64,
    u: f64,
}

/// Range of the values written to `u_grid.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSummary {
    pub points: usize,
    pub min: f64,
    pub max: f64,
}

/// Cell-centred `n x n` grid over the chart's bounding box; points outside
/// the domain are left out.
pub fn grid_points(chart: &Chart, n: usize) -> Vec<Vec2> {
    let (lo, hi) = chart.bounds();
    let step = (hi - lo) / n as f64;
    (0..n)
        .flat_map(|j| (0..n).map(move |i| lo + vec2((i as f64 + 0.5) * step.x, (j as f64 + 0.5) * step.y)))
        .filter(|p| chart.contains(*p))
        .collect()
}

pub fn write_u_grid(path: &Path, problem: &Problem, n: usize) -> Result<GridSummary, RunError> {
    let points = grid_points(problem.chart(), n);
    let values = Rayon.map(points.len(), |i| problem.viscosity_solution(points[i]).ok());
    let mut w = csv::Writer::from_path(path)?;
    let mut summary = GridSummary { points: 0, min: f64::INFINITY, max: f64::NEG_INFINITY };
    for (p, u) in points.iter().zip(values) {
        let Some(u) = u else { continue };
        w.serialize(GridRow { x: p.x, y: p.y, u })?;
        summary.points += 1;
        summary.min = summary.min.min(u);
        summary.max = summary.max.max(u);
    }
    w.flush()?;
    Ok(summary)
}

#[derive(Serialize)]
struct LocusRow {
    x: f64,
    y: f64,
    label: &'static str,
    jump: Option<f64>,
}

/// One row per locus vertex, in chain order, with its census label.
pub fn write_locus(path: &Path, locus: &CandidateLocus, census: &Census) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path)?;
    for ((_, _, p), c) in locus.vertices().zip(&census.points) {
        w.serialize(LocusRow { x: p.x, y: p.y, label: c.label.name(), jump: c.jump })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_family(path: &Path, rows: &[FamilyRow]) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path)?;
    let dims = rows.first().map_or(0, |r| r.param.len());
    let gens = rows.iter().map(|r| r.homology.len()).max().unwrap_or(0);
    let mut header: Vec<String> = (0..dims).map(|k| format!("a{k}")).collect();
    header.push("admissible".into());
    header.extend((0..gens).map(|k| format!("homology{k}")));
    header.push("note".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec: Vec<String> = r.param.iter().map(f64::to_string).collect();
        rec.push(r.admissible.to_string());
        rec.extend((0..gens).map(|k| r.homology.get(k).map(f64::to_string).unwrap_or_default()));
        rec.push(r.note.clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn color(label: Label) -> &'static str {
    match label {
        Label::Cleave => "#1f77b4",
        Label::DegenerateCleave => "#9467bd",
        Label::Edge => "#d62728",
        Label::Crossing => "#2ca02c",
        Label::Remainder => "#ff7f0e",
    }
}

const SIZE: f64 = 600.0;

/// SVG of the domain, optionally some characteristics up to their cut
/// points, and the locus coloured by label. The viewBox depends only on
/// the chart.
pub fn figure(problem: &Problem, locus: &CandidateLocus, census: &Census, characteristics: bool) -> String {
    let chart = problem.chart();
    let (lo, hi) = chart.bounds();
    let margin = 0.05 * (hi - lo).norm();
    let (lo, hi) = (lo - vec2(margin, margin), hi + vec2(margin, margin));
    let scale = SIZE / (hi.x - lo.x).max(hi.y - lo.y);
    // y grows upwards in the chart, downwards in SVG.
    let px = |p: Vec2| ((p.x - lo.x) * scale, (hi.y - p.y) * scale);
    let (w, h) = ((hi.x - lo.x) * scale, (hi.y - lo.y) * scale);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w:.1} {h:.1}" width="{w:.0}" height="{h:.0}">"#);
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);

    let polyline = |pts: &[Vec2], style: &str| {
        let coords: Vec<String> = pts.iter().map(|p| {
            let (x, y) = px(*p);
            format!("{x:.2},{y:.2}")
        }).collect();
        format!(r#"<polyline points="{}" {style}/>"#, coords.join(" "))
    };

    if let Chart::Torus { source, .. } = *chart {
        let corners = [vec2(-0.5, -0.5), vec2(0.5, -0.5), vec2(0.5, 0.5), vec2(-0.5, 0.5), vec2(-0.5, -0.5)];
        let cell: Vec<Vec2> = corners.iter().map(|c| source + *c).collect();
        let _ = writeln!(s, "{}", polyline(&cell, r##"fill="none" stroke="#999999" stroke-dasharray="4 3""##));
    }
    for curve in &problem.mesh.curves {
        let pts: Vec<Vec2> = (0..=256).map(|k| curve.point(TAU * k as f64 / 256.0)).collect();
        let _ = writeln!(s, "{}", polyline(&pts, r##"fill="none" stroke="#000000" stroke-width="1.5""##));
    }

    if characteristics {
        let _ = writeln!(s, r##"<g stroke="#bbbbbb" stroke-width="0.5">"##);
        for (c, row) in problem.mesh.components.iter().enumerate() {
            let stride = (row.len() / 48).max(1);
            for sample in row.iter().step_by(stride) {
                let Ok(Some(t)) = problem.cut_time(c, sample.theta) else { continue };
                let Ok(end) = problem.exponential(t, c, sample.theta) else { continue };
                let (x1, y1) = px(sample.frame.point);
                let (x2, y2) = px(end);
                let _ = writeln!(s, r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}"/>"#);
            }
        }
        let _ = writeln!(s, "</g>");
    }

    for chain in &locus.chains {
        let mut pts = chain.points.clone();
        if chain.closed && pts.len() > 2 {
            pts.push(pts[0]);
        }
        let _ = writeln!(s, "{}", polyline(&pts, r##"fill="none" stroke="#1f77b4" stroke-width="1""##));
    }
    for ((_, _, p), c) in locus.vertices().zip(&census.points) {
        if c.label == Label::Cleave {
            continue;
        }
        let (x, y) = px(p);
        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="{}"><title>{}</title></circle>"#, color(c.label), c.label.name());
    }
    let _ = writeln!(s, "</svg>");
    s
}
