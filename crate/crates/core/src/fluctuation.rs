//! Schur reduction at a fluctuation edge: the resonance function
//! G_s(E) = H_ss + V − H_sb (H_bb − E)⁻¹ H_bs − E on finite boxes, its
//! frozen-energy variant G̃_s, the reduced symbol
//! h̃(θ₁) = 1/I(θ₁, E₀) + E₀ and Lifshitz-exponent fits.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::constant_surface::linear_fit;
use crate::disorder::DisorderSpec;
use crate::error::{Error, Result};
use crate::idss::{check_grid, mean_stderr, symbol_id, CurveKind, CurveMeta, DosCurve, Reference};
use crate::numerics::{count_below_periodic_band, count_eigenvalues_below, HermitianMatrix};
use crate::par;
use crate::surface::green_below_fiber;
use crate::symbol::{extremum, LatticeDims, SymbolCoefficients};

const BULK_MARGIN: f64 = 1e-12;

/// H_{ω,L}: the operator restricted to [−L, L]^d, zero outside.
#[derive(Debug, Clone)]
pub struct BoxOperator {
    pub l: usize,
    pub dims: LatticeDims,
    h: HermitianMatrix,
    surface: Vec<usize>,
    bulk: Vec<usize>,
}

impl BoxOperator {
    /// `omegas` has one entry per surface site, in lexicographic order of γ₁.
    pub fn new(sym: &SymbolCoefficients, l: usize, omegas: &[f64]) -> Result<Self> {
        let dims = sym.dims();
        let (d, d1) = (dims.d(), dims.d1);
        let side = 2 * l + 1;
        let n = side.pow(d as u32);
        let surface_sites = side.pow(d1 as u32);
        if omegas.len() != surface_sites {
            return Err(Error::Dimension("one potential value per surface site"));
        }
        let coords = |mut idx: usize| -> Vec<i64> {
            let mut c = vec![0i64; d];
            for k in (0..d).rev() {
                c[k] = (idx % side) as i64 - l as i64;
                idx /= side;
            }
            c
        };
        let index = |c: &[i64]| -> Option<usize> {
            let mut idx = 0;
            for &x in c {
                if x.unsigned_abs() as usize > l {
                    return None;
                }
                idx = idx * side + (x + l as i64) as usize;
            }
            Some(idx)
        };
        let mut h = HermitianMatrix::zeros(n);
        let (mut surface, mut bulk) = (Vec::with_capacity(surface_sites), Vec::new());
        for y in 0..n {
            let cy = coords(y);
            h.add_at(y, y, Complex64::new(sym.offset(), 0.0));
            for (g, &v) in sym.entries() {
                let cx: Vec<i64> = cy.iter().zip(g).map(|(a, b)| a + b).collect();
                if let Some(x) = index(&cx) {
                    h.add_at(x, y, v);
                }
            }
            if cy[d1..].iter().all(|&x| x == 0) {
                surface.push(y);
            } else {
                bulk.push(y);
            }
        }
        for (&s, &w) in surface.iter().zip(omegas) {
            h.add_at(s, s, Complex64::new(w, 0.0));
        }
        Ok(Self { l, dims, h, surface, bulk })
    }

    pub fn random(sym: &SymbolCoefficients, l: usize, dis: &DisorderSpec, seed: u64, index: u64) -> Result<Self> {
        let sites = (2 * l + 1).pow(sym.dims().d1 as u32);
        Self::new(sym, l, &dis.sample_n(sites, seed, index))
    }

    /// Arbitrary Hermitian matrix with a designated surface set (toy models).
    pub fn from_matrix(h: HermitianMatrix, surface: Vec<usize>) -> Self {
        let bulk = (0..h.dim()).filter(|i| !surface.contains(i)).collect();
        Self { l: 0, dims: LatticeDims { d1: 1, d2: 1 }, h, surface, bulk }
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.h
    }

    pub fn surface_indices(&self) -> &[usize] {
        &self.surface
    }

    pub fn bulk_indices(&self) -> &[usize] {
        &self.bulk
    }

    fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<Complex64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.h.get(rows[i], cols[j]))
    }

    fn bulk_matrix(&self) -> HermitianMatrix {
        HermitianMatrix::from_fn(self.bulk.len(), |i, j| self.h.get(self.bulk[i], self.bulk[j]))
    }

    /// H_sb (H_bb − E)⁻¹ H_bs, after checking H_bb − E > 0.
    fn coupling_term(&self, e: f64) -> Result<DMatrix<Complex64>> {
        let ns = self.surface.len();
        if self.bulk.is_empty() {
            return Ok(DMatrix::zeros(ns, ns));
        }
        let hbb = self.bulk_matrix();
        if count_eigenvalues_below(&hbb, e + BULK_MARGIN) > 0 {
            return Err(Error::BulkNotInvertible(hbb.eigenvalues()[0] - e));
        }
        let mut a = hbb.to_dmatrix();
        for i in 0..a.nrows() {
            a[(i, i)] -= Complex64::new(e, 0.0);
        }
        let chol = a.cholesky().ok_or(Error::BulkNotInvertible(0.0))?;
        let hbs = self.block(&self.bulk, &self.surface);
        let x = chol.solve(&hbs);
        Ok(hbs.adjoint() * x)
    }

    fn surface_block(&self) -> DMatrix<Complex64> {
        self.block(&self.surface, &self.surface)
    }
}

fn to_hermitian(m: &DMatrix<Complex64>) -> HermitianMatrix {
    let n = m.nrows();
    HermitianMatrix::from_fn(n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()))
}

fn shift(m: &mut DMatrix<Complex64>, s: f64) {
    for i in 0..m.nrows() {
        m[(i, i)] += Complex64::new(s, 0.0);
    }
}

/// G_s(E) on the surface block (the surface potential is already in H_ss).
pub fn schur_gs(bx: &BoxOperator, e: f64) -> Result<HermitianMatrix> {
    let mut g = bx.surface_block() - bx.coupling_term(e)?;
    shift(&mut g, -e);
    Ok(to_hermitian(&g))
}

/// G̃_s(E): the bulk resolvent frozen at E₀.
pub fn schur_gs_tilde(bx: &BoxOperator, e0: f64, e: f64) -> Result<HermitianMatrix> {
    let mut g = bx.surface_block() - bx.coupling_term(e0)?;
    shift(&mut g, -e);
    Ok(to_hermitian(&g))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CountIdentity {
    pub lhs: usize,
    pub rhs: usize,
    pub equal: bool,
}

/// #{eigenvalues of H_box below E} against #{negative eigenvalues of G_s(E)}.
pub fn count_identity_check(bx: &BoxOperator, e: f64) -> Result<CountIdentity> {
    let lhs = count_eigenvalues_below(&bx.h, e);
    let rhs = count_eigenvalues_below(&schur_gs(bx, e)?, 0.0);
    Ok(CountIdentity { lhs, rhs, equal: lhs == rhs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Bracket {
    pub lower: usize,
    pub upper: usize,
    pub count: usize,
}

fn bracket_counts(gt: &HermitianMatrix, e0: f64, e: f64, c: f64) -> (usize, usize) {
    let lower = count_eigenvalues_below(gt, 0.0);
    let mut up = gt.clone();
    up.shift_diagonal(-c * (e - e0));
    (lower, count_eigenvalues_below(&up, 0.0))
}

/// N(G̃_s(E), 0) ≤ N(H, E) ≤ N(G̃_s(E) − C(E − E₀), 0).
pub fn gtilde_bracket(bx: &BoxOperator, e0: f64, e: f64, c: f64) -> Result<Bracket> {
    if !(e0 <= e && e <= e0 / 2.0 && e0 < 0.0) {
        return Err(Error::Dimension("E0 <= E <= E0/2 < 0"));
    }
    let gt = schur_gs_tilde(bx, e0, e)?;
    let count = count_eigenvalues_below(&bx.h, e);
    let (lower, upper) = bracket_counts(&gt, e0, e, c);
    if lower <= count && count <= upper {
        return Ok(Bracket { lower, upper, count });
    }
    let mut cc = c.max(1e-6);
    for _ in 0..80 {
        cc *= 2.0;
        let (l2, u2) = bracket_counts(&gt, e0, e, cc);
        if l2 <= count && count <= u2 {
            return Err(Error::BracketViolation { lower, upper, count, minimal_c: cc });
        }
    }
    Err(Error::BracketViolation { lower, upper, count, minimal_c: f64::INFINITY })
}

/// ‖H_sb (H_bb − E₁)⁻¹ (H_bb − E₀)⁻¹ H_bs‖ with E₁ = E₀/2.
pub fn lemma_w4_constant(bx: &BoxOperator, e0: f64) -> Result<f64> {
    if bx.bulk.is_empty() {
        return Ok(0.0);
    }
    let e1 = e0 / 2.0;
    let hbb = bx.bulk_matrix();
    if count_eigenvalues_below(&hbb, e1 + BULK_MARGIN) > 0 {
        return Err(Error::BulkNotInvertible(hbb.eigenvalues()[0] - e1));
    }
    let resolvent = |e: f64| -> Result<nalgebra::Cholesky<Complex64, nalgebra::Dyn>> {
        let mut a = hbb.to_dmatrix();
        shift(&mut a, -e);
        a.cholesky().ok_or(Error::BulkNotInvertible(0.0))
    };
    let hbs = bx.block(&bx.bulk, &bx.surface);
    let x = resolvent(e0)?.solve(&hbs);
    let y = resolvent(e1)?.solve(&x);
    // the two resolvents commute, so this is Hermitian positive semi-definite
    let m = to_hermitian(&(hbs.adjoint() * y));
    Ok(m.eigenvalues().last().copied().unwrap_or(0.0).max(0.0))
}

/// θ₁ ↦ 1/I(θ₁, E₀) + E₀, with values memoized on a `grid`^{d1} node set
/// θ₁ = 2πk/grid.
#[derive(Debug, Clone)]
pub struct ReducedSymbol {
    pub base: SymbolCoefficients,
    pub e0: f64,
    grid: usize,
    values: Vec<f64>,
}

pub fn reduced_symbol(sym: &SymbolCoefficients, e0: f64, grid: usize) -> Result<ReducedSymbol> {
    let (_, min) = extremum(sym, &[], 32, 1e-12, false);
    if !(e0 < 0.0 && e0 < min) {
        return Err(Error::EnergyInSpectrum(e0));
    }
    if grid == 0 {
        return Err(Error::Dimension("grid >= 1"));
    }
    let values = grid_eval(sym, e0, grid)?;
    Ok(ReducedSymbol { base: sym.clone(), e0, grid, values })
}

fn grid_nodes(d1: usize, grid: usize) -> Vec<Vec<f64>> {
    let total = grid.pow(d1 as u32);
    (0..total)
        .map(|mut k| {
            let mut t = vec![0.0; d1];
            for a in (0..d1).rev() {
                t[a] = 2.0 * PI * (k % grid) as f64 / grid as f64;
                k /= grid;
            }
            t
        })
        .collect()
}

fn grid_eval(sym: &SymbolCoefficients, e0: f64, grid: usize) -> Result<Vec<f64>> {
    let nodes = grid_nodes(sym.dims().d1, grid);
    let vals = par::map_indexed(nodes.len(), |k| reduced_value(sym, e0, &nodes[k]));
    vals.into_iter().collect()
}

fn reduced_value(sym: &SymbolCoefficients, e0: f64, theta1: &[f64]) -> Result<f64> {
    let i = green_below_fiber(sym, theta1, e0);
    if !(i.is_finite() && i > 0.0) {
        return Err(Error::NonFinite);
    }
    Ok(1.0 / i + e0)
}

impl ReducedSymbol {
    pub fn d1(&self) -> usize {
        self.base.dims().d1
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    /// Memoized values, lexicographic in the node index.
    pub fn grid_values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, theta1: &[f64]) -> Result<f64> {
        let g = self.grid as f64;
        let on_grid: Option<usize> = theta1.iter().try_fold(0usize, |acc, &t| {
            let k = t.rem_euclid(2.0 * PI) * g / (2.0 * PI);
            let r = k.round();
            ((k - r).abs() < 1e-12).then(|| acc * self.grid + (r as usize % self.grid))
        });
        match on_grid {
            Some(k) => Ok(self.values[k]),
            None => reduced_value(&self.base, self.e0, theta1),
        }
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Fourier coefficients c_k (h̃ = Σ c_k e^{ik·θ}) from a `g`^{d1} sample grid;
    /// entries below `drop` relative to the largest are discarded.
    pub fn fourier_coefficients(&self, g: usize, drop: f64) -> Result<Vec<(Vec<i64>, Complex64)>> {
        let d1 = self.d1();
        let owned;
        let samples: &[f64] = if g == self.grid {
            &self.values
        } else {
            owned = grid_eval(&self.base, self.e0, g)?;
            &owned
        };
        let freqs: Vec<i64> = (0..g as i64).map(|k| if k > g as i64 / 2 { k - g as i64 } else { k }).collect();
        let total = g.pow(d1 as u32);
        let multi = |mut k: usize| -> Vec<usize> {
            let mut v = vec![0; d1];
            for a in (0..d1).rev() {
                v[a] = k % g;
                k /= g;
            }
            v
        };
        let coeffs: Vec<(Vec<i64>, Complex64)> = par::map_indexed(total, |kf| {
            let kk = multi(kf);
            let mut s = Complex64::new(0.0, 0.0);
            for (j, &v) in samples.iter().enumerate() {
                let jj = multi(j);
                let phase: usize = kk.iter().zip(&jj).map(|(a, b)| a * b).sum::<usize>() % g;
                s += v * Complex64::from_polar(1.0, -2.0 * PI * phase as f64 / g as f64);
            }
            (kk.iter().map(|&a| freqs[a]).collect(), s / total as f64)
        });
        let max = coeffs.iter().fold(0.0f64, |m, c| m.max(c.1.norm()));
        Ok(coeffs.into_iter().filter(|c| c.1.norm() >= drop * max).collect())
    }
}

/// h̃ on the dual grid θ₁ = 2πk/n of a periodic cell with n = 2N+1, read off
/// [((H − E₀)⁻¹)_ss]⁻¹ + E₀ built densely on the cell.
pub fn box_reduced_symbol(sym: &SymbolCoefficients, e0: f64, n_half: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    let dims = sym.dims();
    let (d, d1) = (dims.d(), dims.d1);
    let n = 2 * n_half + 1;
    let total = n.pow(d as u32);
    if total > 6000 {
        return Err(Error::DimensionCap { dim: total, cap: 6000 });
    }
    let coords = |mut idx: usize| -> Vec<usize> {
        let mut c = vec![0; d];
        for k in (0..d).rev() {
            c[k] = idx % n;
            idx /= n;
        }
        c
    };
    let index = |c: &[i64]| c.iter().fold(0usize, |acc, &x| acc * n + x.rem_euclid(n as i64) as usize);
    let mut a = DMatrix::from_element(total, total, Complex64::new(0.0, 0.0));
    for y in 0..total {
        let cy = coords(y);
        a[(y, y)] += Complex64::new(sym.offset() - e0, 0.0);
        for (g, &v) in sym.entries() {
            let cx: Vec<i64> = cy.iter().zip(g).map(|(&p, q)| p as i64 + q).collect();
            a[(index(&cx), y)] += v;
        }
    }
    let inv = a.try_inverse().ok_or(Error::EnergyInSpectrum(e0))?;
    let surf: Vec<usize> = (0..total).filter(|&i| coords(i)[d1..].iter().all(|&x| x == 0)).collect();
    let ss = DMatrix::from_fn(surf.len(), surf.len(), |i, j| inv[(surf[i], surf[j])]);
    let s = ss.try_inverse().ok_or(Error::EnergyInSpectrum(e0))?;
    // translation invariant: column of the origin gives the coefficients
    let offsets: Vec<Vec<i64>> = surf
        .iter()
        .map(|&i| coords(i)[..d1].iter().map(|&x| if x > n / 2 { x as i64 - n as i64 } else { x as i64 }).collect())
        .collect();
    let origin = offsets.iter().position(|o| o.iter().all(|&x| x == 0)).expect("origin on the surface");
    Ok(grid_nodes(d1, n)
        .into_iter()
        .map(|theta| {
            let mut v = Complex64::new(0.0, 0.0);
            for (i, o) in offsets.iter().enumerate() {
                let phase: f64 = o.iter().zip(&theta).map(|(&a, &b)| a as f64 * b).sum();
                v += s[(i, origin)] * Complex64::from_polar(1.0, phase);
            }
            (theta, v.re + e0)
        })
        .collect())
}

/// IDS per site of H̃ + Ṽ_ω on periodic boxes of side 2L+1 in Z^{d1}.
pub fn reduced_ids(
    red: &ReducedSymbol,
    dis: &DisorderSpec,
    energies: &[f64],
    l: usize,
    realizations: usize,
    seed: u64,
) -> Result<DosCurve> {
    check_grid(energies)?;
    if realizations == 0 {
        return Err(Error::Dimension("at least one realization"));
    }
    let d1 = red.d1();
    let side = 2 * l + 1;
    let sites = side.pow(d1 as u32);
    if sites > 20_000 {
        return Err(Error::DimensionCap { dim: sites, cap: 20_000 });
    }
    let coeffs = red.fourier_coefficients(4 * side, 1e-12)?;
    let real = coeffs.iter().all(|c| c.1.im.abs() < 1e-13);
    let reach = coeffs.iter().map(|c| c.0.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0)).max().unwrap_or(0) as usize;
    let banded = d1 == 1 && real && 4 * reach < side;
    let band: Vec<f64> = if banded {
        let mut b = vec![0.0; reach + 1];
        for (k, c) in &coeffs {
            if k[0] >= 0 {
                b[k[0] as usize] = c.re;
            }
        }
        b
    } else {
        Vec::new()
    };
    let folded = if banded { None } else { Some(fold_periodic(&coeffs, d1, side)) };
    let m = if dis.as_constant().is_some() { 1 } else { realizations };
    let samples: Vec<Vec<f64>> = par::map_indexed(m, |r| {
        let omegas = dis.sample_n(sites, seed, r as u64);
        match &folded {
            None => energies
                .iter()
                .map(|&e| count_below_periodic_band(&band, &omegas, e) as f64 / sites as f64)
                .collect(),
            Some(h) => {
                let mut h = h.clone();
                for (i, &w) in omegas.iter().enumerate() {
                    h.add_at(i, i, Complex64::new(w, 0.0));
                }
                energies.iter().map(|&e| count_eigenvalues_below(&h, e) as f64 / sites as f64).collect()
            }
        }
    });
    let (mut values, mut stderr) = (Vec::new(), Vec::new());
    for k in 0..energies.len() {
        let (v, s) = mean_stderr(&samples, k);
        values.push(v);
        stderr.push(s);
    }
    Ok(DosCurve {
        energies: energies.to_vec(),
        values,
        stderr,
        meta: CurveMeta {
            n_half: l,
            realizations: m,
            bz_grid: 1,
            seed,
            reference: Reference::Free,
            kind: CurveKind::Ids,
            symbol_id: format!("reduced[E0={}]:{}", red.e0, symbol_id(&red.base)),
        },
    })
}

fn fold_periodic(coeffs: &[(Vec<i64>, Complex64)], d1: usize, side: usize) -> HermitianMatrix {
    let sites = side.pow(d1 as u32);
    let mut h = HermitianMatrix::zeros(sites);
    let coords = |mut idx: usize| -> Vec<i64> {
        let mut c = vec![0; d1];
        for k in (0..d1).rev() {
            c[k] = (idx % side) as i64;
            idx /= side;
        }
        c
    };
    for y in 0..sites {
        let cy = coords(y);
        for (g, v) in coeffs {
            let x = cy.iter().zip(g).fold(0usize, |acc, (&a, &b)| acc * side + (a + b).rem_euclid(side as i64) as usize);
            h.add_at(x, y, *v);
        }
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LifshitzFit {
    pub exponent_hat: f64,
    pub slope: f64,
    pub r2: f64,
    /// (E, ln|ln N(E)| / ln(E − E₀))
    pub per_point: Vec<(f64, f64)>,
}

/// Default window E − E₀ ∈ [1e-2, 3e-1]·|E₀|.
pub fn default_lifshitz_window(e0: f64) -> (f64, f64) {
    (e0 + 1e-2 * e0.abs(), e0 + 0.3 * e0.abs())
}

/// Fits the double-log statistic against 1/ln(E − E₀); the intercept is the
/// E → E₀ limit.
pub fn lifshitz_fit(curve: &DosCurve, e0: f64, window: (f64, f64)) -> Result<LifshitzFit> {
    if !(e0 < window.0) {
        return Err(Error::Dimension("E0 below the fit window"));
    }
    let mut per_point = Vec::new();
    let mut pts = Vec::new();
    for (&e, &v) in curve.energies.iter().zip(&curve.values) {
        if e < window.0 || e > window.1 {
            continue;
        }
        if !(v > 0.0) {
            return Err(Error::NonPositiveValue { energy: e, value: v });
        }
        let x = (e - e0).ln();
        let stat = v.ln().abs().ln() / x;
        per_point.push((e, stat));
        pts.push((1.0 / x, stat));
    }
    if pts.len() < 3 {
        return Err(Error::InsufficientData(pts.len()));
    }
    let (slope, intercept, r2) = linear_fit(&pts);
    Ok(LifshitzFit { exponent_hat: intercept, slope, r2, per_point })
}
