use num_rational::Rational64;
use serde_json::json;
use wasm_bindgen::prelude::*;

use surfdos::constant_surface::theorem3_constant;
use surfdos::disorder::DisorderSpec;
use surfdos::idss::{idss_constant, CurveKind};
use surfdos::newton::{exterior_convex_hull, rational_string, Point};
use surfdos::surface::classify_edge;
use surfdos::symbol::{make_free_laplacian, LatticeDims, SymbolCoefficients};

// The exported functions wrap plain ones so the logic runs natively in tests.

fn free(d1: usize, d2: usize) -> Result<SymbolCoefficients, String> {
    LatticeDims::new(d1, d2).map(make_free_laplacian).map_err(|e| e.to_string())
}

pub fn classify_json(d1: usize, d2: usize, a: f64, b: f64) -> Result<String, String> {
    let sym = free(d1, d2)?;
    let dis = DisorderSpec::uniform(a, b).map_err(|e| e.to_string())?;
    let c = classify_edge(&sym, &dis).map_err(|e| e.to_string())?;
    Ok(serde_json::to_string(&c).expect("classification serializes"))
}

/// Constant-potential curve on a log grid plus the small-E law when it applies.
pub fn constant_curve_json(d1: usize, d2: usize, t: f64, n: usize, lo: f64, hi: f64, count: usize) -> Result<String, String> {
    if n == 0 || n > 400 {
        return Err("N must be in 1..=400".into());
    }
    if !(lo > 0.0 && lo < hi) || count < 2 || count > 200 {
        return Err("need 0 < lo < hi and 2..=200 points".into());
    }
    let sym = free(d1, d2)?;
    let energies: Vec<f64> =
        (0..count).map(|k| (lo.ln() + (hi / lo).ln() * k as f64 / (count - 1) as f64).exp()).collect();
    let curve = idss_constant(&sym, t, &energies, n, CurveKind::IntegratedShift).map_err(|e| e.to_string())?;
    let law = theorem3_constant(&sym, t).ok();
    Ok(json!({
        "energies": curve.energies,
        "values": curve.values,
        "law": law.as_ref().map(|l| energies.iter().map(|&e| l.predict(e)).collect::<Vec<_>>()),
        "prefactor": law.as_ref().map(|l| l.prefactor),
    })
    .to_string())
}

fn rational(s: &str) -> Result<Rational64, String> {
    let bad = || format!("bad number {s:?}");
    match s.split_once('/') {
        Some((p, q)) => {
            let q: i64 = q.trim().parse().map_err(|_| bad())?;
            if q == 0 {
                return Err(bad());
            }
            Ok(Rational64::new(p.trim().parse().map_err(|_| bad())?, q))
        }
        None => Ok(Rational64::from_integer(s.trim().parse().map_err(|_| bad())?)),
    }
}

/// Points as "i j" pairs separated by newlines, commas or semicolons.
pub fn newton_json(points: &str) -> Result<String, String> {
    let pts = points
        .split(['\n', ';', ','])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let f: Vec<&str> = s.split_whitespace().collect();
            match f[..] {
                [i, j] => Ok((rational(i)?, rational(j)?)),
                _ => Err(format!("expected two numbers in {s:?}")),
            }
        })
        .collect::<Result<Vec<Point>, String>>()?;
    let poly = exterior_convex_hull(&pts).map_err(|e| e.to_string())?;
    let pt = |p: &Point| [rational_string(&p.0), rational_string(&p.1)];
    let f = |r: &Rational64| *r.numer() as f64 / *r.denom() as f64;
    Ok(json!({
        "hull": poly.hull_vertices.iter().map(pt).collect::<Vec<_>>(),
        "hull_xy": poly.hull_vertices.iter().map(|p| [f(&p.0), f(&p.1)]).collect::<Vec<_>>(),
        "points_xy": pts.iter().map(|p| [f(&p.0), f(&p.1)]).collect::<Vec<_>>(),
        "decay_exponent": rational_string(&poly.decay_exponent),
        "diagonal_hit": f(&poly.decay_exponent.recip()),
    })
    .to_string())
}

#[wasm_bindgen]
pub fn classify(d1: usize, d2: usize, a: f64, b: f64) -> Result<String, JsError> {
    classify_json(d1, d2, a, b).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn constant_curve(d1: usize, d2: usize, t: f64, n: usize, lo: f64, hi: f64, count: usize) -> Result<String, JsError> {
    constant_curve_json(d1, d2, t, n, lo, hi, count).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn newton_polygon(points: &str) -> Result<String, JsError> {
    newton_json(points).map_err(|e| JsError::new(&e))
}
