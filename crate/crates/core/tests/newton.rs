use std::f64::consts::PI;

use num_rational::Rational64;
use proptest::prelude::*;
use surfdos::appendix::{appendix_check, j_variation, resolvent_coefficients};
use surfdos::fluctuation::reduced_symbol;
use surfdos::newton::{
    exterior_convex_hull, lifshitz_exponent, lifshitz_exponent_of, minimized_exponent_of,
    newton_decay_exponent, taylor_coefficients, taylor_coefficients_of, FamilySpec, FnSymbol,
    NewtonPolygon, Point, DEFAULT_ZERO_THRESHOLD,
};
use surfdos::symbol::{make_free_laplacian, LatticeDims};
use surfdos::Error;

fn r(n: i64) -> Rational64 {
    Rational64::from_integer(n)
}

fn pts(v: &[(i64, i64)]) -> Vec<Point> {
    v.iter().map(|&(a, b)| (r(a), r(b))).collect()
}

fn q(t: f64) -> f64 {
    2.0 * (1.0 - t.cos())
}

fn coeffs_of(f: impl Fn([f64; 2]) -> f64 + Sync) -> Vec<((u32, u32), f64)> {
    let t = taylor_coefficients_of(&FnSymbol { f, floor: 0.0 }, [0.0, 0.0], 4, DEFAULT_ZERO_THRESHOLD).unwrap();
    t.coeffs.into_iter().collect()
}

#[test]
fn polynomial_taylor_data() {
    let c = coeffs_of(|t| t[0] * t[0] + t[1] * t[1]);
    assert_eq!(c.len(), 2);
    assert_eq!((c[0].0, c[1].0), ((0, 2), (2, 0)));
    assert!(c.iter().all(|x| (x.1 - 1.0).abs() < 1e-9));
    let c = coeffs_of(|t| t[0] * t[0] + t[1].powi(4));
    assert_eq!(c.iter().map(|x| x.0).collect::<Vec<_>>(), vec![(0, 4), (2, 0)]);
    assert!(c.iter().all(|x| (x.1 - 1.0).abs() < 1e-8));
}

#[test]
fn reduced_symbol_hessian() {
    let sym = make_free_laplacian(LatticeDims::new(2, 1).unwrap());
    let red = reduced_symbol(&sym, -0.5, 8).unwrap();
    let t = taylor_coefficients(&red, [PI, PI], 4, DEFAULT_ZERO_THRESHOLD).unwrap();
    // h̃ = √((h₁ + 1.5)² − 1) − 0.5 with h₁ ≈ |φ|²/2
    let want = 1.5 / (2.0 * 1.25f64.sqrt());
    assert!((t.coeffs[&(2, 0)] - want).abs() < 1e-6);
    assert!((t.coeffs[&(0, 2)] - want).abs() < 1e-6);
    assert!(!t.coeffs.contains_key(&(1, 1)));
    assert!(!t.coeffs.contains_key(&(1, 0)));
    assert!(matches!(taylor_coefficients(&red, [0.0, PI], 4, DEFAULT_ZERO_THRESHOLD), Err(Error::NotOnZeroSet(_))));
    assert!(matches!(taylor_coefficients(&red, [PI, PI], 14, DEFAULT_ZERO_THRESHOLD), Err(Error::OrderTooHigh(_))));
    let one_dim = reduced_symbol(&make_free_laplacian(LatticeDims::new(1, 1).unwrap()), -0.5, 8).unwrap();
    assert!(taylor_coefficients(&one_dim, [PI, PI], 4, DEFAULT_ZERO_THRESHOLD).is_err());
}

#[test]
fn hull_examples() {
    let h = exterior_convex_hull(&pts(&[(2, 0), (0, 2), (1, 1)])).unwrap();
    assert_eq!(h.hull_vertices, pts(&[(0, 2), (2, 0)]));
    assert_eq!(h.decay_exponent, r(1));
    let h = exterior_convex_hull(&pts(&[(2, 0), (0, 4)])).unwrap();
    assert_eq!(h.hull_vertices, pts(&[(0, 4), (2, 0)]));
    assert_eq!(newton_decay_exponent(&h), Rational64::new(3, 4));
    let h = exterior_convex_hull(&pts(&[(3, 0), (1, 1), (0, 3)])).unwrap();
    assert_eq!(h.hull_vertices, pts(&[(0, 3), (1, 1), (3, 0)]));
    assert_eq!(h.diagram_segments.len(), 2);
    assert_eq!(h.decay_exponent.recip().to_integer() as f64, diagonal_entry(&pts(&[(3, 0), (1, 1), (0, 3)])));
    assert_eq!(exterior_convex_hull(&[]), Err(Error::EmptySupport));
    assert!(exterior_convex_hull(&pts(&[(0, 0), (1, 2)])).is_err());
    // a lone vertex: the diagonal meets its quadrant at max(i, j)
    assert_eq!(exterior_convex_hull(&pts(&[(2, 3)])).unwrap().decay_exponent, Rational64::new(1, 3));
    // the diagonal can cross the vertical ray rather than a segment
    let h = exterior_convex_hull(&pts(&[(3, 2), (4, 0)])).unwrap();
    assert_eq!(h.decay_exponent, Rational64::new(1, 3));
}

/// min t with (t, t) dominating a convex combination of the support, by
/// brute force over pairs: optimal mixtures use at most two points in 2-D.
fn diagonal_entry(points: &[Point]) -> f64 {
    let f: Vec<(f64, f64)> =
        points.iter().map(|p| (*p.0.numer() as f64 / *p.0.denom() as f64, *p.1.numer() as f64 / *p.1.denom() as f64)).collect();
    let mut best = f64::INFINITY;
    for a in &f {
        for b in &f {
            let mut cands = vec![0.0, 1.0];
            let den = (a.0 - b.0) - (a.1 - b.1);
            if den.abs() > 1e-15 {
                let l = (b.1 - b.0) / den;
                if (0.0..=1.0).contains(&l) {
                    cands.push(l);
                }
            }
            for l in cands {
                let x = l * a.0 + (1.0 - l) * b.0;
                let y = l * a.1 + (1.0 - l) * b.1;
                best = best.min(x.max(y));
            }
        }
    }
    best
}

#[test]
fn full_pipeline_quadratic_is_exactly_one() {
    let t = taylor_coefficients_of(
        &FnSymbol { f: |t: [f64; 2]| q(t[0]) + 0.5 * (t[0] - t[1]).sin().powi(2) + q(t[1]), floor: 0.0 },
        [0.0, 0.0],
        4,
        DEFAULT_ZERO_THRESHOLD,
    )
    .unwrap();
    assert_eq!(NewtonPolygon::from_taylor(&t).unwrap().decay_exponent, r(1));
}

#[test]
fn shear_family_minimum() {
    let fam = FamilySpec::default();
    let quad = FnSymbol { f: |t: [f64; 2]| q(t[0]) + q(t[1]) + 0.3 * t[0].sin() * t[1].sin(), floor: 0.0 };
    let m = minimized_exponent_of(&quad, [0.0, 0.0], &fam, 4).unwrap();
    assert_eq!((m.alpha, m.identity_alpha), (r(1), r(1)));
    let quartic = FnSymbol { f: |t: [f64; 2]| t[0] * t[0] + t[1].powi(4), floor: 0.0 };
    let m = minimized_exponent_of(&quartic, [0.0, 0.0], &fam, 4).unwrap();
    assert_eq!(m.alpha, Rational64::new(3, 4));
    let tilted = FnSymbol { f: |t: [f64; 2]| (t[0] + t[1]).powi(2) + t[1].powi(4), floor: 0.0 };
    let m = minimized_exponent_of(&tilted, [0.0, 0.0], &fam, 4).unwrap();
    assert_eq!(m.identity_alpha, r(1));
    assert_eq!(m.alpha, Rational64::new(3, 4));
    assert!(m.alpha <= m.identity_alpha);
}

#[test]
fn lifshitz_exponent_over_zero_sets() {
    let fam = FamilySpec { k_max: 2, max_length: 1 };
    let red = reduced_symbol(&make_free_laplacian(LatticeDims::new(2, 1).unwrap()), -0.5, 8).unwrap();
    let l = lifshitz_exponent(&red, 24, &fam).unwrap();
    assert_eq!(l.alpha, r(1));
    assert_eq!(l.witnesses.len(), 1);
    assert!((l.witnesses[0].0[0] - PI).abs() < 1e-5 && (l.witnesses[0].0[1] - PI).abs() < 1e-5);

    // quadratic zero at the origin, quartic direction at (π, π)
    let two = FnSymbol {
        f: |t: [f64; 2]| (q(t[0]) + q(t[1])) * (q(t[0] - PI) + q(t[1] - PI).powi(2)),
        floor: 0.0,
    };
    let l = lifshitz_exponent_of(&two, 24, &fam).unwrap();
    assert_eq!(l.witnesses.len(), 2);
    let mut ws: Vec<Rational64> = l.witnesses.iter().map(|w| w.1).collect();
    ws.sort();
    assert_eq!(ws, vec![Rational64::new(3, 4), r(1)]);
    assert_eq!(l.alpha, Rational64::new(3, 4));

    let quartic = FnSymbol { f: |t: [f64; 2]| q(t[0]) + q(t[1]).powi(2), floor: 0.0 };
    assert_eq!(lifshitz_exponent_of(&quartic, 24, &fam).unwrap().alpha, Rational64::new(3, 4));

    let line = FnSymbol { f: |t: [f64; 2]| q(t[0]), floor: 0.0 };
    assert!(matches!(lifshitz_exponent_of(&line, 24, &fam), Err(Error::ZeroSetNotFinite)));
}

#[test]
fn appendix_positivity() {
    let id = vec![vec![1, 0], vec![0, 1]];
    let shear = vec![vec![1, 1], vec![0, 1]];
    for g in [&id, &shear] {
        let rep = appendix_check(g, -1.0, 8).unwrap();
        assert!(rep.all_positive && rep.min_coefficient > 0.0);
        assert!(rep.j_variation > 1e-3);
    }
    // n_max = 0: the mean of 1/(3 − cos a − cos b)
    let c = resolvent_coefficients(2, -1.0, 0).unwrap();
    let g = 4000;
    let want: f64 = (0..g)
        .map(|k| {
            let a = 2.0 * PI * (k as f64 + 0.5) / g as f64;
            1.0 / ((3.0 - a.cos()).powi(2) - 1.0).sqrt()
        })
        .sum::<f64>()
        / g as f64;
    assert_eq!(c.len(), 1);
    assert!((c[0].1 - want).abs() < 1e-12);
    // separable J(θ¹) = 1/√((3 − cos θ¹)² − 1)
    let v = j_variation(&id, -1.0).unwrap();
    assert!((v - (1.0 / 3f64.sqrt() - 1.0 / 15f64.sqrt())).abs() < 1e-9);
    assert!(matches!(appendix_check(&id, 0.5, 4), Err(Error::EnergyInSpectrum(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn hull_invariants(raw in prop::collection::vec((0i64..7, 0i64..7), 1..8)) {
        let raw: Vec<(i64, i64)> = raw.into_iter().filter(|p| *p != (0, 0)).collect();
        prop_assume!(!raw.is_empty());
        let p = pts(&raw);
        let h = exterior_convex_hull(&p).unwrap();
        let swapped: Vec<Point> = p.iter().map(|&(a, b)| (b, a)).collect();
        prop_assert_eq!(exterior_convex_hull(&swapped).unwrap().decay_exponent, h.decay_exponent);
        prop_assert!(h.decay_exponent > r(0));
        let again = exterior_convex_hull(&h.hull_vertices).unwrap();
        prop_assert_eq!(&again.hull_vertices, &h.hull_vertices);
        let mut more = p.clone();
        more.push((h.hull_vertices[0].0 + r(1), h.hull_vertices[0].1 + r(2)));
        prop_assert_eq!(&exterior_convex_hull(&more).unwrap().hull_vertices, &h.hull_vertices);
        let oracle = diagonal_entry(&p);
        let got = h.decay_exponent.recip();
        prop_assert!((*got.numer() as f64 / *got.denom() as f64 - oracle).abs() < 1e-12);
    }
}
