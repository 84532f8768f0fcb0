use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn splitlocus(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splitlocus")).args(args).output().unwrap()
}

fn run_in(cmd: &str, scn: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--scenario", scn.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    splitlocus(&args)
}

fn report(out: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn solve_writes_the_middle_circle() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in("solve", &scenario("annulus.scn"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rows = csv::Reader::from_path(dir.path().join("locus.csv")).unwrap();
    assert_eq!(rows.headers().unwrap(), vec!["x", "y", "label", "jump"]);
    let mut n = 0;
    for r in rows.records() {
        let r = r.unwrap();
        let (x, y): (f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        assert!(((x * x + y * y).sqrt() - 1.5).abs() < 1e-4);
        assert_eq!(&r[2], "cleave");
        n += 1;
    }
    assert_eq!(n, 1024);
    let mut grid = csv::Reader::from_path(dir.path().join("u_grid.csv")).unwrap();
    for r in grid.records() {
        let r = r.unwrap();
        let (x, y, u): (f64, f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap());
        let rho = (x * x + y * y).sqrt();
        assert!((u - (rho - 1.0).min(2.0 - rho)).abs() < 1e-9);
    }
    assert!(dir.path().join("timing.json").exists());
}

#[test]
fn family_scan_finds_the_unit_interval() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in("family", &scenario("annulus.scn"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(dir.path());
    let b = &r["summary"]["range"]["pairwise"][0];
    assert!((b["lower"].as_f64().unwrap() + 1.0).abs() < 1e-6);
    assert!((b["upper"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    let mut rows = csv::Reader::from_path(dir.path().join("family.csv")).unwrap();
    for rec in rows.records() {
        let rec = rec.unwrap();
        let a: f64 = rec[0].parse().unwrap();
        assert_eq!(&rec[2] == "true", a.abs() < 1.0, "{rec:?}");
    }
}

#[test]
fn torus_census_is_cleave_dominant() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in("classify", &scenario("torus.scn"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let s = &report(dir.path())["summary"];
    assert!(s["cleave_fraction"].as_f64().unwrap() > 0.95);
    let features = s["features"].as_array().unwrap();
    assert!(!features.is_empty() && features.len() <= 4, "{features:?}");
}

#[test]
fn outputs_are_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        for cmd in ["solve", "current", "plot"] {
            assert_eq!(run_in(cmd, &scenario("ellipse.scn"), d.path(), &[]).status.code(), Some(0));
        }
    }
    for f in ["u_grid.csv", "locus.csv", "report.json", "figure.svg"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn flags_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in("current", &scenario("annulus_offset.scn"), dir.path(), &["--refine", "1", "--seed", "11"]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path());
    assert_eq!(r["seed"], 11);
    assert_eq!(r["refine"], 1);
    assert_eq!(r["samples"], 2048);
}

#[test]
fn invalid_scenario_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.scn");
    fs::write(&bad, "[chart]\nkind = \"disk\"\nradius = 1.0\ncolour = \"red\"\n").unwrap();
    let o = run_in("solve", &bad, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4") && err.contains("colour"), "{err}");

    // The family command needs a [family] table.
    let o = run_in("family", &scenario("disk.scn"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));

    // Offsets beyond the compatibility bound.
    fs::write(&bad, "[chart]\nkind = \"annulus\"\nr_in = 1.0\nr_out = 2.0\n[boundary]\noffsets = [1.5, 0.0]\n").unwrap();
    assert_eq!(run_in("solve", &bad, dir.path(), &[]).status.code(), Some(2));
}

#[test]
fn failed_check_exits_with_one_and_a_witness() {
    let dir = tempfile::tempdir().unwrap();
    let strict = dir.path().join("strict.scn");
    let mut text = fs::read_to_string(scenario("torus_weighted.scn")).unwrap();
    text.push_str("\n[tolerances]\nbalanced_tol = 1e-9\n");
    fs::write(&strict, text).unwrap();
    let o = run_in("verify", &strict, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("FAIL balanced") && stdout.contains("witness"), "{stdout}");
    let r = report(dir.path());
    let check = r["checks"].as_array().unwrap().iter().find(|c| c["name"] == "balanced").unwrap();
    assert_eq!(check["passed"], false);
    assert!(check["witness"]["point"].is_array());
}

#[test]
fn plot_emits_svg() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in("plot", &scenario("ellipse.scn"), dir.path(), &[]).status.code(), Some(0));
    let svg = fs::read_to_string(dir.path().join("figure.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    // The two segment ends are marked as edge points.
    assert_eq!(svg.matches("<title>edge</title>").count() >= 2, true);
}
