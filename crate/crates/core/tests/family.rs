use proptest::prelude::*;
use splitlocus_core::exec::Sequential;
use splitlocus_core::family::*;
use splitlocus_core::splitlocus::*;
use splitlocus_core::*;

fn annulus() -> Problem {
    Problem::new(Scenario::annulus(1.0, 2.0)).unwrap()
}

fn torus() -> Problem {
    Problem::new(Scenario::torus(Vec2::ZERO, 0.1)).unwrap()
}

fn inner(a: f64) -> FamilyParam {
    FamilyParam::ComponentOffsets(vec![a, 0.0])
}

#[test]
fn annulus_members_are_concentric_circles() {
    let base = annulus();
    for a in [0.4, 0.0] {
        let m = family_member(&base, &inner(a)).unwrap();
        let circle = CandidateLocus::circle(Vec2::ZERO, (3.0 - a) / 2.0, 4096);
        assert!(m.locus.hausdorff(&circle) < 1e-4, "a = {a}");
    }
}

#[test]
fn annulus_admissible_interval() {
    let bounds = component_bounds(&annulus());
    assert_eq!(bounds.len(), 1);
    // a_outer - a_inner lies in (-1, 1).
    assert!((bounds[0].lower + 1.0).abs() < 1e-9 && (bounds[0].upper - 1.0).abs() < 1e-9, "{bounds:?}");
    let range = admissible_range(&annulus(), FamilyMode::ComponentOffsets, &[], &Sequential);
    assert_eq!(range.contains(&inner(0.0)), Some(true));
    assert_eq!(range.contains(&inner(0.99)), Some(true));
    assert_eq!(range.contains(&inner(1.01)), Some(false));
}

#[test]
fn incompatible_offset_is_rejected() {
    let err = family_member(&annulus(), &inner(1.2)).unwrap_err();
    assert!(matches!(err, Error::IncompatibleOffset { .. }), "{err:?}");
    let err = family_member(&annulus(), &FamilyParam::TorusLattice(Vec2::ZERO)).unwrap_err();
    assert!(matches!(err, Error::InvalidArgument(_)));
}

#[test]
fn annulus_homology_coordinate() {
    let base = annulus();
    let m = family_member(&base, &inner(0.4)).unwrap();
    let h = homology_class(&m.context()).unwrap();
    assert_eq!(h.coords.len(), 1);
    assert!((h.coords[0] - 0.4).abs() < 1e-4, "{h:?}");
    assert_eq!(h.path_values[0].len(), 3);
    assert!(h.spread < 1e-4);

    let sing = singular_set(&base).unwrap();
    let h = homology_class(&SplitContext::new(&base, &sing)).unwrap();
    assert!(h.coords[0].abs() < 1e-6, "{h:?}");
}

#[test]
fn distinct_offsets_give_distinct_loci() {
    let base = annulus();
    let a = family_member(&base, &inner(0.0)).unwrap();
    let b = family_member(&base, &inner(0.05)).unwrap();
    assert!(a.locus.hausdorff(&b.locus) > 1e-3);
}

#[test]
fn torus_member_fits_hyperbolas() {
    let base = torus();
    let m = family_member(&base, &FamilyParam::TorusLattice(vec2(0.2, 0.0))).unwrap();
    let fit = branch_fit(&m).unwrap();
    assert_eq!(fit.unmatched, 0);
    assert!(fit.max_residual < 1e-3, "{fit:?}");
    assert!(fit.branches.len() >= 2);
}

#[test]
fn torus_homology_round_trip() {
    let base = torus();
    let a = vec2(0.2, 0.1);
    let m = family_member(&base, &FamilyParam::TorusLattice(a)).unwrap();
    let h = homology_class(&m.context()).unwrap();
    assert_eq!(h.coords.len(), 2);
    assert!((h.coords[0] - a.x).abs() < 1e-3 && (h.coords[1] - a.y).abs() < 1e-3, "{h:?}");
}

#[test]
fn torus_scan_is_symmetric_and_contains_zero() {
    let base = torus();
    let grid = [vec2(-0.1, 0.0), Vec2::ZERO, vec2(0.1, 0.0)];
    let range = admissible_range(&base, FamilyMode::TorusLattice, &grid, &Sequential);
    let AdmissibleRange::Scan { points, symmetric } = &range else { panic!("{range:?}") };
    assert!(*symmetric);
    assert!(points.iter().all(|p| p.admissible), "{points:?}");
    assert_eq!(range.contains(&FamilyParam::TorusLattice(Vec2::ZERO)), Some(true));
    assert_eq!(range.contains(&FamilyParam::TorusLattice(vec2(0.05, 0.0))), None);
}

#[test]
fn disk_has_a_single_balanced_locus() {
    let base = Problem::new(Scenario::disk(1.0)).unwrap();
    assert!(component_bounds(&base).is_empty());
    // A constant offset on the only component does not move the locus.
    let m = family_member(&base, &FamilyParam::ComponentOffsets(vec![0.3])).unwrap();
    assert!(m.locus.hausdorff(&CandidateLocus::point(Vec2::ZERO)) < 1e-9);
    for candidate in [
        CandidateLocus::circle(Vec2::ZERO, 0.2, 1024),
        CandidateLocus::segment(vec2(-0.3, 0.0), vec2(0.3, 0.0), 256),
        CandidateLocus::point(vec2(0.1, 0.0)),
    ] {
        let report = SplitContext::new(&base, &candidate).is_balanced();
        assert!(!report.passed, "{candidate:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn annulus_round_trip(a in -0.9..0.9f64) {
        let base = annulus();
        let m = family_member(&base, &inner(a)).unwrap();
        let circle = CandidateLocus::circle(Vec2::ZERO, (3.0 - a) / 2.0, 4096);
        prop_assert!(m.locus.hausdorff(&circle) < 1e-4);
        let h = homology_class(&m.context()).unwrap();
        prop_assert!((h.coords[0] - a).abs() < 1e-3, "{:?}", h);
        prop_assert_eq!(inner(a).coordinates().len(), 1);
    }

    #[test]
    fn annulus_members_split(a in -0.9..0.9f64) {
        let m = family_member(&annulus(), &inner(a)).unwrap();
        prop_assert!(m.context().is_split_locus().passed);
    }
}
