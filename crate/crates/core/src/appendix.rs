//! Non-constancy of the reduced symbol for rotated sublattices: Fourier
//! coefficients of (h₀ − E)⁻¹ with h₀ = d − Σ cos θᵢ are positive (Neumann
//! series in Σ cos θᵢ / (d − E)), and J(θ¹) = ∫ dθ′ / (h₀(G′θ) − E) varies.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::symbol::{apply_lattice_transform, LatticeDims, SymbolCoefficients};

const GRID: usize = 64;
const J_POINTS: usize = 32;

/// d − Σ cos θᵢ: the free Laplacian normalized to minimum 0 at θ = 0.
pub fn normalized_h0(d: usize) -> Result<SymbolCoefficients> {
    let dims = LatticeDims::new(1, d.checked_sub(1).ok_or(Error::Dimension("d >= 2"))?)?;
    let mut entries = BTreeMap::new();
    for i in 0..d {
        for s in [-1i64, 1] {
            let mut g = vec![0; d];
            g[i] = s;
            entries.insert(g, Complex64::new(-0.5, 0.0));
        }
    }
    SymbolCoefficients::new(dims, entries, d as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppendixReport {
    pub d: usize,
    pub energy: f64,
    pub n_max: usize,
    pub all_positive: bool,
    pub min_coefficient: f64,
    pub min_index: Vec<i64>,
    #[serde(rename = "J_variation")]
    pub j_variation: f64,
}

/// Coefficients ĉ_n = (2π)^{-d} ∫ e^{-in·θ} / (h₀(θ) − E) dθ for |n|_∞ ≤ n_max,
/// by the rectangle rule (exponentially accurate for this analytic integrand).
pub fn resolvent_coefficients(d: usize, e: f64, n_max: usize) -> Result<Vec<(Vec<i64>, f64)>> {
    if !(e < 0.0) {
        return Err(Error::EnergyInSpectrum(e));
    }
    if n_max >= GRID / 4 {
        return Err(Error::Dimension("n_max < 16"));
    }
    let h0 = normalized_h0(d)?;
    let total = GRID.pow(d as u32);
    let theta = |mut k: usize| -> Vec<f64> {
        let mut t = vec![0.0; d];
        for a in (0..d).rev() {
            t[a] = 2.0 * PI * (k % GRID) as f64 / GRID as f64;
            k /= GRID;
        }
        t
    };
    // axis-by-axis partial transforms: keep only the wanted frequencies
    let mut data: Vec<Complex64> = (0..total).map(|k| Complex64::new(1.0 / (h0.value(&theta(k)) - e), 0.0)).collect();
    let nf = 2 * n_max + 1;
    let mut shape: Vec<usize> = vec![GRID; d];
    for axis in 0..d {
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let mut next = vec![Complex64::new(0.0, 0.0); outer * nf * inner];
        for o in 0..outer {
            for f in 0..nf {
                let n = f as i64 - n_max as i64;
                for x in 0..GRID {
                    let w = Complex64::from_polar(1.0 / GRID as f64, -2.0 * PI * (n * x as i64) as f64 / GRID as f64);
                    for i in 0..inner {
                        next[(o * nf + f) * inner + i] += w * data[(o * GRID + x) * inner + i];
                    }
                }
            }
        }
        shape[axis] = nf;
        data = next;
    }
    Ok(data
        .iter()
        .enumerate()
        .map(|(mut k, c)| {
            let mut n = vec![0i64; d];
            for a in (0..d).rev() {
                n[a] = (k % nf) as i64 - n_max as i64;
                k /= nf;
            }
            (n, c.re)
        })
        .collect())
}

/// max − min of J(θ¹) for h = h₀ ∘ G′ on a θ¹ grid.
pub fn j_variation(g: &[Vec<i64>], e: f64) -> Result<f64> {
    let d = g.len();
    let h = apply_lattice_transform(&normalized_h0(d)?, g)?;
    let inner = GRID.pow(d as u32 - 1);
    let js: Vec<f64> = (0..J_POINTS)
        .map(|a| {
            let t1 = 2.0 * PI * a as f64 / J_POINTS as f64;
            let mut s = 0.0;
            for mut k in 0..inner {
                let mut t = vec![t1; d];
                for x in t[1..].iter_mut().rev() {
                    *x = 2.0 * PI * ((k % GRID) as f64 + 0.5) / GRID as f64;
                    k /= GRID;
                }
                s += 1.0 / (h.value(&t) - e);
            }
            s / inner as f64
        })
        .collect();
    let (lo, hi) = js.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    Ok(hi - lo)
}

pub fn appendix_check(g: &[Vec<i64>], e: f64, n_max: usize) -> Result<AppendixReport> {
    let d = g.len();
    let coeffs = resolvent_coefficients(d, e, n_max)?;
    let (min_index, min_coefficient) = coeffs
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(n, c)| (n.clone(), *c))
        .expect("at least one coefficient");
    Ok(AppendixReport {
        d,
        energy: e,
        n_max,
        all_positive: min_coefficient > 0.0,
        min_coefficient,
        min_index,
        j_variation: j_variation(g, e)?,
    })
}
