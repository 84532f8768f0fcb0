use proptest::prelude::*;
use splitlocus_core::math::TAU;
use splitlocus_core::*;

const FD: f64 = 1e-5;

fn randers() -> Hamiltonian {
    Hamiltonian::randers(vec2(0.3, 0.0)).unwrap()
}

// sup <v, a> over the indicatrix H = 1, sampled densely. For Randers the
// indicatrix is the ellipse |a| + <b, a> = 1, i.e. |a| = 1 / (1 + <b, u>).
fn indicatrix_support(b: Vec2, v: Vec2, samples: usize) -> f64 {
    (0..samples)
        .map(|k| {
            let u = Vec2::from_angle(TAU * k as f64 / samples as f64);
            let a = u / (1.0 + b.dot(u));
            v.dot(a)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn randers_norm_matches_indicatrix_support() {
    let h = randers();
    for v in [vec2(1.0, 0.0), vec2(-1.0, 0.0), vec2(0.3, -0.8), vec2(0.0, 2.0)] {
        let phi = h.dual_norm(Vec2::ZERO, v).unwrap();
        let brute = indicatrix_support(vec2(0.3, 0.0), v, 100_000);
        assert!((phi - brute).abs() < 1e-8 * (1.0 + phi), "v={v:?}: {phi} vs {brute}");
    }
    // Closed form along the drift: 1/(1+b) forwards, 1/(1-b) backwards.
    assert!((h.dual_norm(Vec2::ZERO, vec2(1.0, 0.0)).unwrap() - 1.0 / 1.3).abs() < 1e-14);
    assert!((h.dual_norm(Vec2::ZERO, vec2(-1.0, 0.0)).unwrap() - 1.0 / 0.7).abs() < 1e-14);
}

fn phi(h: &Hamiltonian, v: Vec2) -> f64 {
    h.dual_norm(Vec2::ZERO, v).unwrap()
}

fn fd_gradient(h: &Hamiltonian, v: Vec2) -> Vec2 {
    let ex = vec2(FD, 0.0);
    let ey = vec2(0.0, FD);
    vec2((phi(h, v + ex) - phi(h, v - ex)) / (2.0 * FD), (phi(h, v + ey) - phi(h, v - ey)) / (2.0 * FD))
}

#[test]
fn randers_dual_form_matches_finite_differences() {
    let h = randers();
    let x = vec2(1.0, 0.0);
    let w = h.dual_one_form(Vec2::ZERO, x).unwrap();
    let oracle = fd_gradient(&h, x) * phi(&h, x);
    assert!((w - oracle).norm() < 1e-9, "{w:?} vs {oracle:?}");
    assert!((w.dot(x) - phi(&h, x).powi(2)).abs() < 1e-14);
}

#[test]
fn randers_fundamental_tensor_matches_hessian() {
    let h = randers();
    let v = vec2(1.0, 0.0);
    let half_sq = |u: Vec2| 0.5 * phi(&h, u).powi(2);
    let e = [vec2(FD, 0.0), vec2(0.0, FD)];
    let mut hess = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            hess[i][j] = (half_sq(v + e[i] + e[j]) - half_sq(v + e[i] - e[j]) - half_sq(v - e[i] + e[j])
                + half_sq(v - e[i] - e[j]))
                / (4.0 * FD * FD);
        }
    }
    let g = h.fundamental_tensor(Vec2::ZERO, v).unwrap();
    let oracle = Mat2::new(hess[0][0], hess[0][1], hess[1][0], hess[1][1]);
    assert!((g - oracle).frobenius() < 1e-5, "{g:?} vs {oracle:?}");
    assert!(g.is_symmetric(1e-14));
}

#[test]
fn torus_wraparound_distance() {
    let torus = Chart::Torus { source: Vec2::ZERO, radius: 0.1 };
    let d = torus.distance(&Hamiltonian::Euclidean, vec2(0.1, 0.1), vec2(0.9, 0.1)).unwrap();
    assert!((d - 0.2).abs() < 1e-12);
}

fn lattice_oracle(h: &Hamiltonian, p: Vec2, q: Vec2) -> f64 {
    let mut best = f64::INFINITY;
    for i in -3..=3 {
        for j in -3..=3 {
            best = best.min(phi(h, q + vec2(i as f64, j as f64) - p));
        }
    }
    best
}

fn hamiltonians() -> impl Strategy<Value = Hamiltonian> {
    prop_oneof![
        Just(Hamiltonian::Euclidean),
        (0.0..0.6f64, 0.0..TAU).prop_map(|(r, a)| Hamiltonian::randers(Vec2::from_angle(a) * r).unwrap()),
    ]
}

fn unit_square() -> impl Strategy<Value = Vec2> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(|(x, y)| vec2(x, y))
}

fn nonzero() -> impl Strategy<Value = Vec2> {
    (0.05..3.0f64, 0.0..TAU).prop_map(|(r, a)| Vec2::from_angle(a) * r)
}

proptest! {
    #[test]
    fn torus_distance_is_lattice_minimum(h in hamiltonians(), p in unit_square(), q in unit_square()) {
        let torus = Chart::Torus { source: Vec2::ZERO, radius: 0.1 };
        let d = torus.distance(&h, p, q).unwrap();
        prop_assert!((d - lattice_oracle(&h, p, q)).abs() < 1e-12);
    }

    #[test]
    fn torus_distance_translation_invariant(p in unit_square(), q in unit_square(), i in -3i32..3, j in -3i32..3, k in -3i32..3) {
        let torus = Chart::Torus { source: Vec2::ZERO, radius: 0.1 };
        let h = Hamiltonian::Euclidean;
        let d = torus.distance(&h, p, q).unwrap();
        let m = vec2(i as f64, j as f64);
        let n = vec2(k as f64, -j as f64);
        prop_assert!((torus.distance(&h, p + m, q + n).unwrap() - d).abs() < 1e-12);
    }

    #[test]
    fn distance_triangle_inequality(h in hamiltonians(), p in unit_square(), q in unit_square(), r in unit_square(), torus in any::<bool>()) {
        let chart = if torus { Chart::Torus { source: Vec2::ZERO, radius: 0.1 } } else { Chart::Disk { radius: 2.0 } };
        let d = |a, b| chart.distance(&h, a, b).unwrap();
        prop_assert!(d(p, r) <= d(p, q) + d(q, r) + 1e-12);
    }

    #[test]
    fn dual_norm_homogeneous(h in hamiltonians(), v in nonzero()) {
        let base = phi(&h, v);
        prop_assert!(base > 0.0);
        for lambda in [0.5, 2.0, 10.0] {
            let scaled = phi(&h, v * lambda);
            prop_assert!((scaled - lambda * base).abs() <= 1e-10 * lambda * base);
        }
    }

    #[test]
    fn duality_round_trip(h in hamiltonians(), v in nonzero()) {
        let x = v / phi(&h, v);
        let w = h.dual_one_form(Vec2::ZERO, x).unwrap();
        prop_assert!((h.value(Vec2::ZERO, w) - 1.0).abs() < 1e-8);
        // Dualising the unit covector gives back the velocity.
        prop_assert!((h.grad_alpha(Vec2::ZERO, w) - x).norm() < 1e-8);
    }

    #[test]
    fn dual_form_is_tensor_contraction(h in hamiltonians(), x in nonzero(), u in nonzero()) {
        let w = h.dual_one_form(Vec2::ZERO, x).unwrap();
        let g = h.fundamental_tensor(Vec2::ZERO, x).unwrap();
        prop_assert!((w.dot(u) - g.form(x, u)).abs() < 1e-8 * (1.0 + x.norm() * u.norm()));
        prop_assert!((w.dot(x) - phi(&h, x).powi(2)).abs() < 1e-10 * phi(&h, x).powi(2));
    }

    #[test]
    fn dual_form_annihilates_indicatrix_tangent(h in hamiltonians(), a in 0.0..TAU) {
        let x = Vec2::from_angle(a);
        let x = x / phi(&h, x);
        let w = h.dual_one_form(Vec2::ZERO, x).unwrap();
        // Tangent to {phi = 1} at x by a centred difference of the unit sphere.
        let at = |s: f64| { let y = Vec2::from_angle(a + s); y / phi(&h, y) };
        let tangent = (at(1e-6) - at(-1e-6)) / 2e-6;
        prop_assert!(w.dot(tangent).abs() < 1e-6 * tangent.norm());
    }

    #[test]
    fn fundamental_tensor_positive_definite(h in hamiltonians(), p in unit_square(), v in nonzero()) {
        let g = h.fundamental_tensor(p, v).unwrap();
        let (l1, l2) = g.sym_eigenvalues();
        prop_assert!(l1 > 0.0 && l2 > 0.0, "eigenvalues {l1} {l2}");
    }
}
