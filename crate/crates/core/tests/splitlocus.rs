use proptest::prelude::*;
use splitlocus_core::math::{PI, TAU};
use splitlocus_core::splitlocus::*;
use splitlocus_core::*;

fn problem(s: Scenario) -> Problem {
    Problem::new(s).unwrap()
}

fn annulus() -> Problem {
    problem(Scenario::annulus(1.0, 2.0))
}

fn torus() -> Problem {
    problem(Scenario::torus(Vec2::ZERO, 0.1))
}

// Distance to the nearest lattice copy of the source circle.
fn torus_oracle(p: Vec2) -> f64 {
    let mut best = f64::INFINITY;
    for i in -3..=3 {
        for j in -3..=3 {
            best = best.min((p - vec2(i as f64, j as f64)).norm() - 0.1);
        }
    }
    best
}

#[test]
fn annulus_viscosity_values() {
    let p = annulus();
    assert!((p.viscosity_solution(vec2(1.2, 0.0)).unwrap() - 0.2).abs() < 1e-12);
    let e = p.evaluate(vec2(1.5, 0.0)).unwrap();
    assert!((e.value - 0.5).abs() < 1e-12);
    let mut comps: Vec<usize> = e.minimizers.iter().map(|m| m.key.component).collect();
    comps.dedup();
    assert_eq!(comps.len(), 2, "{e:?}");
    assert!(e.is_singular(p.tolerances().dir_tol));
    assert_eq!(p.viscosity_solution(vec2(2.5, 0.0)), Err(Error::OutsideDomain));
}

#[test]
fn annulus_singular_set_is_the_middle_circle() {
    let p = annulus();
    let sing = singular_set(&p).unwrap();
    let circle = CandidateLocus::circle(Vec2::ZERO, 1.5, 4096);
    assert!(sing.hausdorff(&circle) < 1e-4);
}

#[test]
fn disk_singular_set_is_the_centre() {
    let p = problem(Scenario::disk(1.0));
    let sing = singular_set(&p).unwrap();
    assert_eq!(sing.vertex_count(), 1);
    assert!(sing.vertices().next().unwrap().2.norm() < 1e-9);
}

#[test]
fn torus_singular_set_is_the_voronoi_boundary() {
    let p = torus();
    let sing = singular_set(&p).unwrap();
    // Two of the four cell edges represent the whole boundary modulo the lattice.
    let edges = CandidateLocus::new(
        vec![
            Chain::new((0..=200).map(|k| vec2(0.5, -0.5 + k as f64 / 200.0)).collect(), false),
            Chain::new((0..=200).map(|k| vec2(-0.5 + k as f64 / 200.0, 0.5)).collect(), false),
        ],
        true,
    );
    assert!(sing.periodic);
    assert!(sing.hausdorff(&edges) < 1e-4);
}

#[test]
fn rho_on_concentric_circles() {
    let p = annulus();
    // Chord sag of the polygon stays below the tolerance.
    let s = CandidateLocus::circle(Vec2::ZERO, 1.5, 8192);
    let ctx = SplitContext::new(&p, &s);
    assert!((ctx.rho(1, 0.3).unwrap().rho - 0.5).abs() < 1e-6);
    let s = CandidateLocus::circle(Vec2::ZERO, 1.3, 8192);
    let ctx = SplitContext::new(&p, &s);
    let r = ctx.rho(0, 2.0).unwrap();
    assert!(r.hit);
    assert!((r.rho - 0.3).abs() < 1e-6);
}

#[test]
fn rho_on_the_torus_matches_first_bisector() {
    let p = torus();
    let sing = singular_set(&p).unwrap();
    let ctx = SplitContext::new(&p, &sing);
    for theta in [0.1, 0.9, 2.0, 3.3, 5.0] {
        let u = Vec2::from_angle(theta);
        let oracle = (0.5 / u.x.abs()).min(0.5 / u.y.abs()) - 0.1;
        let r = ctx.rho(0, theta).unwrap();
        assert!((r.rho - oracle).abs() < 1e-6, "theta {theta}: {} vs {oracle}", r.rho);
    }
}

#[test]
fn rho_lipschitz_examples() {
    let p = annulus();
    let s = CandidateLocus::circle(Vec2::ZERO, 1.5, 4096);
    assert!(SplitContext::new(&p, &s).rho_lipschitz_estimate().constant < 1e-6);
    for scenario in [Scenario::torus(Vec2::ZERO, 0.1), Scenario::ellipse(1.5, 1.0)] {
        let coarse = problem(scenario.clone().with_samples(512));
        let fine = problem(scenario.with_samples(1024));
        let (sc, sf) = (singular_set(&coarse).unwrap(), singular_set(&fine).unwrap());
        let a = SplitContext::new(&coarse, &sc).rho_lipschitz_estimate();
        let b = SplitContext::new(&fine, &sf).rho_lipschitz_estimate();
        assert!(a.constant.is_finite() && a.constant > 0.0);
        assert!(a.stable_against(&b, 1e-9), "{a:?} vs {b:?}");
    }
}

#[test]
fn limit_vectors_examples() {
    let p = annulus();
    let sing = singular_set(&p).unwrap();
    let ctx = SplitContext::new(&p, &sing);
    let r = ctx.limit_vectors(vec2(1.5, 0.0));
    assert_eq!(r.count(), 2);
    let mut dirs: Vec<Vec2> = r.vectors.iter().map(|v| v.direction).collect();
    dirs.sort_by(|a, b| a.x.total_cmp(&b.x));
    assert!((dirs[0] - vec2(-1.0, 0.0)).norm() < 1e-6);
    assert!((dirs[1] - vec2(1.0, 0.0)).norm() < 1e-6);

    let t = torus();
    let sing = singular_set(&t).unwrap();
    let ctx = SplitContext::new(&t, &sing);
    let r = ctx.limit_vectors(vec2(0.5, 0.3));
    assert_eq!(r.count(), 2);
    let mut lifts: Vec<Lift> = r.vectors.iter().map(|v| v.key.lift).collect();
    lifts.sort();
    assert_eq!(lifts, vec![Lift(0, 0), Lift(1, 0)]);
    for v in &r.vectors {
        let source = v.key.lift.shift();
        assert!((v.direction - (vec2(0.5, 0.3) - source).normalized()).norm() < 1e-6);
    }

    let d = problem(Scenario::disk(1.0));
    let centre = CandidateLocus::point(Vec2::ZERO);
    let ctx = SplitContext::new(&d, &centre);
    let r = ctx.limit_vectors(Vec2::ZERO);
    assert!(r.continuum);
    assert_eq!(r.count(), usize::MAX);
}

#[test]
fn preimages_respect_the_hitting_time() {
    let p = annulus();
    let s = CandidateLocus::circle(Vec2::ZERO, 1.3, 2048);
    let ctx = SplitContext::new(&p, &s);
    let q = ctx.preimages(vec2(0.0, 1.6));
    assert_eq!(q.arrivals.len(), 1);
    let a = q.arrivals[0];
    assert_eq!(a.key.component, 1);
    assert!(a.t <= ctx.rho(a.key.component, a.theta).unwrap().rho + p.tolerances().match_tol);
    assert!((p.scenario.data.value(1, a.theta) + a.t - 0.4).abs() < 1e-9);
}

#[test]
fn middle_circle_is_a_balanced_split_locus() {
    let p = annulus();
    let s = CandidateLocus::circle(Vec2::ZERO, 1.5, 2048);
    let report = SplitContext::new(&p, &s).is_balanced();
    assert!(report.split_locus.split.passed);
    assert!(report.split_locus.passed);
    assert!(report.passed, "{:?}", report.witness);
}

#[test]
fn gap_in_the_circle_breaks_the_split() {
    let p = annulus();
    let s = CandidateLocus::circle_with_gap(Vec2::ZERO, 1.5, 0.5, 0.6, 2048);
    let report = SplitContext::new(&p, &s).is_split();
    assert!(!report.passed);
    let w = report.witness.unwrap();
    assert_ne!(w.arrivals, 1);
    assert!(p.chart().contains(w.point));
}

#[test]
fn circle_near_the_outer_edge_still_splits() {
    // r = 1.99 is the member with offset -0.98, inside (-1, 1).
    let p = annulus();
    let s = CandidateLocus::circle(Vec2::ZERO, 1.99, 4096);
    let ctx = SplitContext::new(&p, &s);
    assert!(ctx.is_split().passed);
}

#[test]
fn whole_domain_splits_but_is_not_a_split_locus() {
    let p = annulus();
    let s = CandidateLocus::whole_domain(false);
    let ctx = SplitContext::new(&p, &s);
    assert!(ctx.is_split().passed);
    let report = ctx.is_split_locus();
    assert!(!report.passed);
    assert!(report.witness.is_some());
}

#[test]
fn offset_circle_is_balanced_only_with_its_offset() {
    let p = annulus().with_offsets(&[0.4, 0.0], Vec2::ZERO).unwrap();
    let s = CandidateLocus::circle(Vec2::ZERO, 1.3, 2048);
    assert!(SplitContext::new(&p, &s).is_balanced().passed);
    let shifted = CandidateLocus::circle(vec2(0.1, 0.0), 1.5, 2048);
    let base = annulus();
    let report = SplitContext::new(&base, &shifted).is_balanced();
    assert!(!report.passed);
    assert!(report.witness_point().is_some());
}

#[test]
fn lattice_weighted_locus_is_balanced() {
    let p = torus().with_offsets(&[0.0], vec2(0.1, 0.0)).unwrap();
    let s = singular_set(&p).unwrap();
    let report = SplitContext::new(&p, &s).is_balanced();
    assert!(report.passed, "{:?}", report.witness);
}

#[test]
fn h_values_on_an_unbalanced_circle() {
    let p = annulus();
    let s = CandidateLocus::circle(Vec2::ZERO, 1.3, 4096);
    let ctx = SplitContext::new(&p, &s);
    match ctx.h_value(vec2(1.6, 0.0)).unwrap() {
        HValue::Unique(h) => assert!((h - 0.4).abs() < 1e-9),
        other => panic!("{other:?}"),
    }
    let eps = 1e-3;
    match ctx.h_value(vec2(1.3 - eps, 0.0)).unwrap() {
        HValue::Unique(h) => assert!((h - (0.3 - eps)).abs() < 1e-9),
        other => panic!("{other:?}"),
    }
    match ctx.h_value(vec2(1.3, 0.0)).unwrap() {
        HValue::Sides(mut v) => {
            v.sort_by(f64::total_cmp);
            assert_eq!(v.len(), 2);
            assert!((v[0] - 0.3).abs() < 1e-6 && (v[1] - 0.7).abs() < 1e-6, "{v:?}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn h_of_the_singular_set_is_the_viscosity_solution() {
    for (name, scenario) in Scenario::catalog() {
        let p = problem(scenario);
        let sing = singular_set(&p).unwrap();
        let ctx = SplitContext::new(&p, &sing);
        let mut worst: f64 = 0.0;
        for x in audit_grid(&p, 24) {
            if sing.distance(x) <= p.tolerances().match_tol {
                continue;
            }
            let HValue::Unique(h) = ctx.h_value(x).unwrap() else { panic!("{name}: sides off the locus") };
            worst = worst.max((h - p.viscosity_solution(x).unwrap()).abs());
        }
        assert!(worst < 5e-4, "{name}: {worst}");
    }
}

#[test]
fn rho_never_passes_the_first_conjugate_time() {
    for scenario in [Scenario::disk(1.0), Scenario::ellipse(1.5, 1.0)] {
        let p = problem(scenario.with_samples(256));
        let sing = singular_set(&p).unwrap();
        let ctx = SplitContext::new(&p, &sing);
        for (c, row) in ctx.rho_samples().iter().enumerate() {
            for (k, r) in row.iter().enumerate() {
                let lam = p.conjugate_times(c, p.mesh.components[c][k].theta, f64::INFINITY).unwrap().lambda(1);
                assert!(lam - r.rho >= -1e-8, "sample {k}: rho {} lambda {lam}", r.rho);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn torus_values_match_lattice_oracle(x in -0.5..0.5f64, y in -0.5..0.5f64) {
        let p = torus();
        let q = vec2(x, y);
        prop_assume!(q.norm() > 0.1);
        prop_assert!((p.viscosity_solution(q).unwrap() - torus_oracle(q)).abs() < 1e-9);
    }

    #[test]
    fn viscosity_solution_is_lipschitz(r1 in 1.01..1.99f64, a1 in 0.0..TAU, r2 in 1.01..1.99f64, a2 in 0.0..TAU) {
        let p = annulus();
        let (x, y) = (Vec2::from_angle(a1) * r1, Vec2::from_angle(a2) * r2);
        let (u, v) = (p.viscosity_solution(x).unwrap(), p.viscosity_solution(y).unwrap());
        prop_assert!((u - v).abs() <= x.distance(y) + 1e-12);
    }

    #[test]
    fn annulus_solution_is_distance_to_nearer_circle(r in 1.0..2.0f64, a in -PI..PI) {
        let p = annulus();
        let x = Vec2::from_angle(a) * r;
        prop_assume!(p.chart().contains(x));
        prop_assert!((p.viscosity_solution(x).unwrap() - (r - 1.0).min(2.0 - r)).abs() < 1e-9);
    }
}
