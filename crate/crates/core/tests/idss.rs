use std::f64::consts::PI;

use surfdos::disorder::DisorderSpec;
use surfdos::idss::{
    check_bounds, doubling_flags, estimate_idss, idss_constant, normalized_idss, CurveKind,
    DosCurve, IdssParams, Reference,
};
use surfdos::symbol::{make_free_laplacian, LatticeDims, SymbolCoefficients};
use surfdos::Error;

fn free11() -> SymbolCoefficients {
    make_free_laplacian(LatticeDims::new(1, 1).unwrap())
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

const KINDS: [CurveKind; 2] = [CurveKind::CountDifference, CurveKind::IntegratedShift];

#[test]
fn zero_potential_gives_zero_curve() {
    let e = grid(-0.5, 2.0, 9);
    for kind in KINDS {
        let c = idss_constant(&free11(), 0.0, &e, 6, kind).unwrap();
        assert!(c.values.iter().all(|&v| v == 0.0));
        assert!(c.stderr.iter().all(|&s| s == 0.0));
    }
}

#[test]
fn constant_disorder_is_idss_constant() {
    let e = grid(0.01, 1.0, 6);
    for kind in KINDS {
        let a = estimate_idss(&free11(), &DisorderSpec::constant(0.7), &e, &IdssParams::new(8, 5, 3).kind(kind))
            .unwrap();
        let b = idss_constant(&free11(), 0.7, &e, 8, kind).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.meta.realizations, 1);
    }
}

#[test]
fn surface_branch_measure() {
    // bound state of the fiber over θ₁ sits at 2 + cos θ₁ − √2 for t = −1
    let e = -0.2;
    let c = idss_constant(&free11(), -1.0, &[e], 60, CurveKind::CountDifference).unwrap();
    let c0 = 2f64.sqrt() - 2.0 + e;
    let g = 100_000;
    let measure = (0..g)
        .filter(|&k| (2.0 * PI * (k as f64 + 0.5) / g as f64).cos() <= c0)
        .count() as f64
        / g as f64;
    assert!(c.values[0] > 0.0);
    assert!((c.values[0] - measure).abs() < 0.02, "{} vs {measure}", c.values[0]);
}

#[test]
fn step_route_agrees_with_fiber_route() {
    // nearly constant disorder goes through the random-potential code path
    let e = grid(0.02, 0.6, 5);
    let exact = idss_constant(&free11(), 1.0, &e, 10, CurveKind::IntegratedShift).unwrap();
    let near = estimate_idss(
        &free11(),
        &DisorderSpec::uniform(1.0 - 1e-12, 1.0).unwrap(),
        &e,
        &IdssParams::new(10, 2, 1),
    )
    .unwrap();
    for k in 0..e.len() {
        assert!(
            (exact.values[k] - near.values[k]).abs() < 1e-7,
            "E={}: {} vs {}",
            e[k],
            exact.values[k],
            near.values[k]
        );
    }
    // the lowest level of the N=10 cell is ≈ 0.022
    assert!(exact.values[0] == 0.0 && exact.values[1..].iter().all(|&v| v > 0.0));
}

#[test]
fn sandwich_and_negative_control() {
    let sym = free11();
    let e = grid(0.05, 1.0, 6);
    let dis = DisorderSpec::uniform(0.0, 1.0).unwrap();
    for kind in KINDS {
        let p = IdssParams::new(6, 6, 11).kind(kind);
        let c = estimate_idss(&sym, &dis, &e, &p).unwrap();
        let c0 = idss_constant(&sym, 0.0, &e, 6, kind).unwrap();
        let c1 = idss_constant(&sym, 1.0, &e, 6, kind).unwrap();
        let (lo, hi) = match kind {
            CurveKind::IntegratedShift => (&c0, &c1),
            // counts decrease as the potential grows
            CurveKind::CountDifference => (&c1, &c0),
            CurveKind::Ids => unreachable!(),
        };
        assert!(check_bounds(&c, lo, hi).unwrap().passed(), "{kind}");
        assert!(check_bounds(&c, &c, &c).unwrap().passed());
        if kind == CurveKind::IntegratedShift {
            assert!(!check_bounds(&c, hi, lo).unwrap().passed());
        }
    }
    let t02 = idss_constant(&sym, 0.2, &e, 6, CurveKind::IntegratedShift).unwrap();
    let t0 = idss_constant(&sym, 0.0, &e, 6, CurveKind::IntegratedShift).unwrap();
    let t1 = idss_constant(&sym, 1.0, &e, 6, CurveKind::IntegratedShift).unwrap();
    assert!(check_bounds(&t02, &t0, &t1).unwrap().passed());
    let other = idss_constant(&sym, 0.2, &e[..3], 6, CurveKind::IntegratedShift).unwrap();
    assert_eq!(check_bounds(&other, &t0, &t1), Err(Error::GridMismatch));
    // the plain IDS is the reduced-operator curve, not a surface estimate
    assert!(estimate_idss(&sym, &dis, &e, &IdssParams::new(6, 6, 11).kind(CurveKind::Ids)).is_err());
}

#[test]
fn normalization_identity() {
    let sym = free11();
    let e = grid(-0.4, 1.2, 7);
    let dis = DisorderSpec::uniform(-0.5, 1.0).unwrap();
    for kind in KINDS {
        let p = IdssParams::new(5, 4, 2).kind(kind);
        let vs_free = estimate_idss(&sym, &dis, &e, &p).unwrap();
        let norm = normalized_idss(&sym, &dis, &e, &p).unwrap();
        let a = idss_constant(&sym, -0.5, &e, 5, kind).unwrap();
        for k in 0..e.len() {
            let lhs = vs_free.values[k];
            let rhs = norm.values[k] + a.values[k];
            assert!((lhs - rhs).abs() < 1e-7, "{kind} E={}: {lhs} vs {rhs}", e[k]);
        }
    }
    let z = normalized_idss(&sym, &DisorderSpec::constant(0.3), &e, &IdssParams::new(5, 3, 0)).unwrap();
    assert!(z.values.iter().all(|&v| v == 0.0));
}

#[test]
fn vanishing_disorder_normalized_curve() {
    let e = grid(0.0, 2.0, 5);
    let mut prev = f64::INFINITY;
    for eps in [0.5, 0.05, 0.005] {
        let dis = DisorderSpec::uniform(0.5, 0.5 + eps).unwrap();
        let c = normalized_idss(&free11(), &dis, &e, &IdssParams::new(4, 3, 5)).unwrap();
        let size = c.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(size <= prev);
        prev = size;
    }
    assert!(prev < 5e-3);
}

#[test]
fn quantized_bounded_and_deterministic() {
    let sym = make_free_laplacian(LatticeDims::new(1, 2).unwrap());
    let e = grid(-0.5, 3.0, 8);
    let dis = DisorderSpec::uniform(-1.0, 1.0).unwrap();
    let p = IdssParams::new(2, 1, 42).kind(CurveKind::CountDifference).bz_grid(2);
    let a = estimate_idss(&sym, &dis, &e, &p).unwrap();
    let b = estimate_idss(&sym, &dis, &e, &p).unwrap();
    assert_eq!(a, b);
    let q = (8 * 5) as f64;
    for &v in &a.values {
        assert!((v * q - (v * q).round()).abs() < 1e-9);
        assert!(v.abs() <= 1.0);
    }
}

#[test]
fn doubling_flags_detect_change() {
    let e = grid(0.1, 1.0, 4);
    let a = idss_constant(&free11(), 1.0, &e, 4, CurveKind::IntegratedShift).unwrap();
    assert!(doubling_flags(&a, &a).unwrap().is_empty());
    let mut b = a.clone();
    b.values[2] += 1.0;
    assert_eq!(doubling_flags(&a, &b).unwrap(), vec![e[2]]);
}

#[test]
fn csv_file_round_trip() {
    let e = grid(0.1, 1.0, 4);
    let c = estimate_idss(&free11(), &DisorderSpec::uniform(0.0, 1.0).unwrap(), &e, &IdssParams::new(3, 3, 9))
        .unwrap();
    let mut buf = Vec::new();
    c.write_csv(&mut buf, &[]).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.lines().any(|l| l == "E,value,stderr"));
    let back = DosCurve::read_csv(&buf[..]).unwrap();
    assert_eq!(back.meta, c.meta);
    assert_eq!(back.values, c.values);
    assert_eq!(back.meta.reference, Reference::Free);
}

#[test]
fn rejects_bad_input() {
    let sym = free11();
    assert_eq!(idss_constant(&sym, 1.0, &[0.2, 0.1], 3, CurveKind::IntegratedShift), Err(Error::BadGrid));
    assert!(estimate_idss(&sym, &DisorderSpec::constant(1.0), &[0.1], &IdssParams::new(0, 1, 0)).is_err());
}
