//! Surface Green integral I(θ₁, z) = ∫_{T^{d2}} dθ₂ / (h(θ₁,θ₂) − z), the
//! threshold I_∞ = sup I(·, 0), edge classification and the ground energy
//! E₀ of H + t·δ_surface.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::disorder::DisorderSpec;
use crate::error::{Error, Result};
use crate::numerics::{
    bisect_root, extrapolate_to_zero, integrate_torus, integrate_torus_shifted,
    polynomial_roots, QuadratureResult,
};
use crate::symbol::{extremum, fiber_min, find_global_minimum, SymbolCoefficients};

const CAP_NODES: usize = 1 << 22;

/// Rectangle-rule evaluation of I with grid doubling until the relative
/// change drops below 1e-8 (or the node cap is hit).
pub fn surface_integral_i(
    sym: &SymbolCoefficients,
    theta1: &[f64],
    z: Complex64,
    grid: usize,
) -> Result<QuadratureResult<Complex64>> {
    let d2 = sym.dims().d2;
    if z.im == 0.0 {
        let h2 = fiber_min(sym, theta1);
        if z.re >= h2 - 1e-13 {
            if z.re > h2 + 1e-13 {
                return Err(Error::PoleOnGrid);
            }
            if d2 <= 2 {
                return Err(Error::Divergence);
            }
            return green_at_fiber_bottom(sym, theta1, z.re);
        }
    }
    let mut g = grid.max(4);
    let mut prev: Option<Complex64> = None;
    loop {
        let r = integrate_torus(
            |t2: &[f64]| {
                let mut p = theta1.to_vec();
                p.extend_from_slice(t2);
                let den = sym.value(&p) - z;
                if den.norm() < 1e-14 {
                    Complex64::new(f64::NAN, 0.0)
                } else {
                    1.0 / den
                }
            },
            d2,
            g,
        )
        .map_err(|e| if e == Error::NonFinite { Error::PoleOnGrid } else { e })?;
        let scale = r.value.norm().max(1e-300);
        let change = prev.map_or(f64::INFINITY, |p| (r.value - p).norm());
        if change <= 1e-8 * scale || (prev.is_none() && r.estimated_error <= 1e-10 * scale) {
            let err = if change.is_finite() { change } else { r.estimated_error };
            return Ok(QuadratureResult { estimated_error: err, ..r });
        }
        if (2 * g).pow(d2 as u32) > CAP_NODES {
            let err = if change.is_finite() { change } else { r.estimated_error };
            return Ok(QuadratureResult { estimated_error: err, ..r });
        }
        prev = Some(r.value);
        g *= 2;
    }
}

/// ∮ dw/(2πi w (Σ_k c_k w^k − z)) over |w| = 1 by residues; `c` holds
/// c_{−K..K}. Exact for trigonometric polynomials in the last variable.
pub fn laurent_resolvent(c: &[Complex64], z: Complex64) -> Complex64 {
    let mut k = (c.len() - 1) / 2;
    let scale = c.iter().fold(z.norm(), |m, x| m.max(x.norm()));
    let mut lo = 0;
    while k > 0 && c[lo].norm() <= 1e-15 * scale && c[c.len() - 1 - lo].norm() <= 1e-15 * scale {
        lo += 1;
        k -= 1;
    }
    let c = &c[lo..c.len() - lo];
    if k == 0 {
        return 1.0 / (c[0] - z);
    }
    let mut a = c.to_vec();
    a[k] -= z;
    let roots = polynomial_roots(&a);
    let deriv = |w: Complex64| {
        let mut dp = Complex64::new(0.0, 0.0);
        for j in (1..a.len()).rev() {
            dp = dp * w + a[j] * j as f64;
        }
        dp
    };
    roots
        .into_iter()
        .filter(|r| r.norm() < 1.0)
        .map(|r| r.powi(k as i32 - 1) / deriv(r))
        .sum()
}

/// I(θ₁, z) with the innermost θ₂ coordinate done by residues and the
/// remaining d2−1 coordinates by the (shifted) rectangle rule on `grid`.
pub fn green_residue(
    sym: &SymbolCoefficients,
    theta1: &[f64],
    z: Complex64,
    grid: usize,
    shift: f64,
) -> Complex64 {
    let d2 = sym.dims().d2;
    if d2 == 1 {
        return laurent_resolvent(&sym.laurent_last(theta1).1, z);
    }
    integrate_torus_shifted(
        |t: &[f64]| {
            let mut p = theta1.to_vec();
            p.extend_from_slice(t);
            laurent_resolvent(&sym.laurent_last(&p).1, z)
        },
        d2 - 1,
        grid,
        shift,
    )
    .map(|r| r.value)
    .unwrap_or(Complex64::new(f64::NAN, f64::NAN))
}

/// I at a real energy strictly below the fiber bottom; the outer grid is
/// doubled until the relative change is below 1e-11 (node cap 2^18).
pub fn green_below_fiber(sym: &SymbolCoefficients, theta1: &[f64], e: f64) -> f64 {
    let z = Complex64::new(e, 0.0);
    let outer = sym.dims().d2 as u32 - 1;
    if outer == 0 {
        return green_residue(sym, theta1, z, 1, 0.0).re;
    }
    let mut g = 16;
    let mut prev = green_residue(sym, theta1, z, g, 0.0).re;
    loop {
        g *= 2;
        let v = green_residue(sym, theta1, z, g, 0.0).re;
        if (v - prev).abs() <= 1e-11 * v.abs() || (2 * g).pow(outer) > 1 << 18 {
            return v;
        }
        prev = v;
    }
}

// d2 ≥ 3 at the bottom of the fiber: the outer integrand has an integrable
// point singularity; midpoint grids 64, 128, 256 extrapolated in 1/grid.
fn green_at_fiber_bottom(
    sym: &SymbolCoefficients,
    theta1: &[f64],
    e: f64,
) -> Result<QuadratureResult<Complex64>> {
    let z = Complex64::new(e, 0.0);
    let outer = sym.dims().d2 - 1;
    let base: usize = if outer <= 2 { 64 } else { 16 };
    let samples: Vec<(f64, f64)> = (0..3)
        .map(|k| {
            let g = base << k;
            (1.0 / g as f64, green_residue(sym, theta1, z, g, 0.5).re)
        })
        .collect();
    if samples.iter().any(|s| !s.1.is_finite()) {
        return Err(Error::PoleOnGrid);
    }
    let ex = extrapolate_to_zero(&samples)?;
    Ok(QuadratureResult {
        value: Complex64::new(ex.value, 0.0),
        estimated_error: ex.error,
        grid_used: base << 2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value")]
pub enum IInfinity {
    Finite(f64),
    Divergent,
}

/// sup_{θ₁} I(θ₁, 0). Divergent for d2 ≤ 2 by the quadratic-minimum rule.
pub fn sup_i_infinity(sym: &SymbolCoefficients, grid1: usize) -> Result<IInfinity> {
    let dims = sym.dims();
    if dims.d2 <= 2 {
        return Ok(IInfinity::Divergent);
    }
    let min = find_global_minimum(sym, 16, 1e-12)?;
    let star = min.theta1_star().to_vec();
    let at_star = green_at_fiber_bottom(sym, &star, fiber_min(sym, &star))?.value.re;
    let f = |t1: &[f64]| -> f64 {
        let h2 = fiber_min(sym, t1);
        if h2 <= 1e-9 {
            return f64::NEG_INFINITY;
        }
        green_below_fiber(sym, t1, 0.0)
    };
    let (_, best) = maximize_torus(&f, dims.d1, grid1.max(4), &[], false);
    Ok(IInfinity::Finite(at_star.max(best)))
}

/// Coarse grid (plus seeds) followed by cyclic golden-section refinement
/// of each coordinate; `refine` = false skips the polish.
pub(crate) fn maximize_torus(
    f: &dyn Fn(&[f64]) -> f64,
    n: usize,
    grid: usize,
    seeds: &[Vec<f64>],
    refine: bool,
) -> (Vec<f64>, f64) {
    let h = 2.0 * PI / grid as f64;
    let mut best: (Vec<f64>, f64) = (vec![0.0; n], f64::NEG_INFINITY);
    let total = grid.pow(n as u32);
    for idx in 0..total {
        let mut rem = idx;
        let mut p = vec![0.0; n];
        for ax in (0..n).rev() {
            p[ax] = (rem % grid) as f64 * h;
            rem /= grid;
        }
        let v = f(&p);
        if v > best.1 {
            best = (p, v);
        }
    }
    for s in seeds {
        let v = f(s);
        if v >= best.1 {
            best = (s.clone(), v);
        }
    }
    if !refine {
        return best;
    }
    let (mut x, mut fx) = best;
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _sweep in 0..30 {
        let before = fx;
        for ax in 0..n {
            let (mut a, mut b) = (x[ax] - h, x[ax] + h);
            let eval_at = |t: f64, x: &[f64]| {
                let mut p = x.to_vec();
                p[ax] = t;
                f(&p)
            };
            let mut c = b - g * (b - a);
            let mut d = a + g * (b - a);
            let (mut fc, mut fd) = (eval_at(c, &x), eval_at(d, &x));
            while b - a > 1e-11 {
                if fc > fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - g * (b - a);
                    fc = eval_at(c, &x);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + g * (b - a);
                    fd = eval_at(d, &x);
                }
            }
            let t = 0.5 * (a + b);
            let ft = eval_at(t, &x);
            if ft > fx {
                x[ax] = t;
                fx = ft;
            }
        }
        if fx - before <= 1e-15 * fx.abs().max(1.0) {
            break;
        }
    }
    (x, fx)
}

/// max_{θ₁} I(θ₁, E) for real E below the whole spectrum of H.
pub fn max_green(sym: &SymbolCoefficients, e: f64, seeds: &[Vec<f64>]) -> f64 {
    let d1 = sym.dims().d1;
    let grid = match d1 {
        1 => 32,
        2 => 12,
        _ => 6,
    };
    maximize_torus(&|t1: &[f64]| green_below_fiber(sym, t1, e), d1, grid, seeds, true).1
}

pub(crate) fn criterion(iinf: IInfinity, t: f64) -> f64 {
    match iinf {
        IInfinity::Finite(v) => 1.0 + t * v,
        IInfinity::Divergent if t < 0.0 => f64::NEG_INFINITY,
        IInfinity::Divergent => 1.0,
    }
}

/// Unique root E₀ < 0 of 1 + t·max_{θ₁} I(θ₁, E) (fluctuating case only).
pub fn ground_energy(sym: &SymbolCoefficients, t: f64, tol: f64) -> Result<f64> {
    let iinf = sup_i_infinity(sym, 32)?;
    let crit = criterion(iinf, t);
    if crit >= 0.0 {
        return Err(Error::NotFluctuating(crit));
    }
    let min = find_global_minimum(sym, 16, 1e-12)?;
    let seeds = vec![min.theta1_star().to_vec()];
    let (_, max_h) = extremum(sym, &[], 16, 1e-12, true);
    let lo = t - max_h.abs() - 1.0;
    // for finite I_∞ the criterion itself is F(0)
    let hi = if matches!(iinf, IInfinity::Finite(_)) { 0.0 } else { -tol };
    let f = |e: f64| if e == 0.0 { crit } else { 1.0 + t * max_green(sym, e, &seeds) };
    if f(hi) >= 0.0 {
        // the edge sits within tol of 0
        return Ok(hi);
    }
    bisect_root(f, lo, hi, tol)
}

/// Bound state of the fiber problem at θ₁: root of 1 + t·I(θ₁, E) below
/// the fiber bottom, if any (t < 0 only).
pub fn fiber_bound_state(sym: &SymbolCoefficients, t: f64, theta1: &[f64]) -> Option<f64> {
    if t >= 0.0 {
        return None;
    }
    let h2 = fiber_min(sym, theta1);
    let f = |e: f64| 1.0 + t * green_below_fiber(sym, theta1, e);
    let hi = h2 - 1e-13;
    if sym.dims().d2 >= 3 && f(hi) >= 0.0 {
        return None;
    }
    bisect_root(f, h2 + t - 1.0, hi, 1e-13).ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LowerEdge {
    Stable,
    Fluctuating { e0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeClassification {
    pub lower_edge: LowerEdge,
    pub i_infinity: IInfinity,
    /// 1 + ω₋·I_∞ when I_∞ is finite.
    pub criterion_value: Option<f64>,
}

pub fn classify_edge(sym: &SymbolCoefficients, dis: &DisorderSpec) -> Result<EdgeClassification> {
    let wm = dis.omega_minus();
    let iinf = sup_i_infinity(sym, 32)?;
    let crit = criterion(iinf, wm);
    let lower_edge = if crit >= 0.0 {
        LowerEdge::Stable
    } else {
        LowerEdge::Fluctuating { e0: ground_energy(sym, wm, 1e-12)? }
    };
    Ok(EdgeClassification {
        lower_edge,
        i_infinity: iinf,
        criterion_value: match iinf {
            IInfinity::Finite(_) => Some(crit),
            IInfinity::Divergent => None,
        },
    })
}

/// Desk-scale Σ = ∪_t σ(H_t) for t on a grid over [ω₋, ω₊]; the upper
/// edge comes from the mirrored problem max h − h with t → −t.
pub fn almost_sure_spectrum_edges(
    sym: &SymbolCoefficients,
    dis: &DisorderSpec,
    t_grid: usize,
) -> Result<Vec<(f64, f64)>> {
    if let crate::disorder::DisorderKind::TwoPoint { .. } = dis.kind() {
        return Err(Error::UnsupportedDistribution("two-point support is disconnected"));
    }
    let (wm, wp) = (dis.omega_minus(), dis.omega_plus());
    let (_, max_h) = extremum(sym, &[], 32, 1e-13, true);
    let mirror = sym.mirrored(max_h);
    let n = if wm == wp { 1 } else { t_grid.max(2) };
    let mut intervals = Vec::with_capacity(n);
    for k in 0..n {
        let t = if n == 1 { wm } else { wm + (wp - wm) * k as f64 / (n - 1) as f64 };
        let lower = match ground_energy(sym, t, 1e-12) {
            Ok(e0) => e0,
            Err(Error::NotFluctuating(_)) => 0.0,
            Err(e) => return Err(e),
        };
        let upper = match ground_energy(&mirror, -t, 1e-12) {
            Ok(e0) => max_h - e0,
            Err(Error::NotFluctuating(_)) => max_h,
            Err(e) => return Err(e),
        };
        intervals.push((lower, upper));
    }
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in intervals {
        match merged.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => merged.push((lo, hi)),
        }
    }
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::{make_free_laplacian, LatticeDims};

    fn free(d1: usize, d2: usize) -> SymbolCoefficients {
        make_free_laplacian(LatticeDims::new(d1, d2).unwrap())
    }

    #[test]
    fn closed_form_fiber_integral() {
        let h = free(1, 1);
        let r = surface_integral_i(&h, &[0.0], Complex64::new(-1.0, 0.0), 16).unwrap();
        assert!((r.value.re - 1.0 / 15f64.sqrt()).abs() < 1e-10);
        let exact = green_residue(&h, &[0.0], Complex64::new(-1.0, 0.0), 1, 0.0);
        assert!((exact.re - 1.0 / 15f64.sqrt()).abs() < 1e-14);
        let far = surface_integral_i(&h, &[PI], Complex64::new(-1e6, 0.0), 16).unwrap();
        assert!(far.value.re > 0.0 && (far.value.re - 1e-6).abs() < 1e-11);
    }

    #[test]
    fn low_codimension_diverges() {
        assert_eq!(sup_i_infinity(&free(1, 1), 16).unwrap(), IInfinity::Divergent);
        assert_eq!(sup_i_infinity(&free(1, 2), 16).unwrap(), IInfinity::Divergent);
        let r = surface_integral_i(&free(1, 1), &[PI], Complex64::new(0.0, 0.0), 16);
        assert_eq!(r.unwrap_err(), Error::Divergence);
    }

    #[test]
    fn ground_energy_closed_forms() {
        let h = free(1, 1);
        let e = ground_energy(&h, -1.0, 1e-12).unwrap();
        assert!((e - (1.0 - 2f64.sqrt())).abs() < 1e-8);
        let e = ground_energy(&h, -2.0, 1e-12).unwrap();
        assert!((e - (1.0 - 5f64.sqrt())).abs() < 1e-8);
        assert!(matches!(ground_energy(&h, 1.0, 1e-12), Err(Error::NotFluctuating(_))));
    }

    #[test]
    fn classification_examples() {
        let h = free(1, 1);
        let c = classify_edge(&h, &DisorderSpec::uniform(0.0, 1.0).unwrap()).unwrap();
        assert_eq!(c.lower_edge, LowerEdge::Stable);
        let c = classify_edge(&h, &DisorderSpec::uniform(-1.0, 1.0).unwrap()).unwrap();
        match c.lower_edge {
            LowerEdge::Fluctuating { e0 } => assert!((e0 - (1.0 - 2f64.sqrt())).abs() < 1e-8),
            LowerEdge::Stable => panic!("expected fluctuation edge"),
        }
    }

    #[test]
    fn spectrum_edges() {
        let h = free(1, 1);
        let s = almost_sure_spectrum_edges(&h, &DisorderSpec::constant(0.0), 3).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s[0].0.abs() < 1e-12 && (s[0].1 - 4.0).abs() < 1e-12);
        let s = almost_sure_spectrum_edges(&h, &DisorderSpec::uniform(-1.0, 0.0).unwrap(), 3).unwrap();
        assert!((s[0].0 - (1.0 - 2f64.sqrt())).abs() < 1e-8 && (s[0].1 - 4.0).abs() < 1e-12);
        let s = almost_sure_spectrum_edges(&h, &DisorderSpec::uniform(0.0, 1.0).unwrap(), 3).unwrap();
        assert!(s[0].0.abs() < 1e-12 && (s[0].1 - (3.0 + 2f64.sqrt())).abs() < 1e-8);
        let tp = DisorderSpec::two_point(0.0, 1.0, 0.5).unwrap();
        assert!(matches!(
            almost_sure_spectrum_edges(&h, &tp, 3),
            Err(Error::UnsupportedDistribution(_))
        ));
    }
}
