//! Integrated density of surface states from periodic approximants.
//!
//! Two curve kinds are produced from the same Floquet cells:
//! - `CountDifference`: Δ(E) = [count(M_ω < E) − count(M_ref < E)] per
//!   surface site, averaged over the reduced zone;
//! - `IntegratedShift`: N(E) = ∫_{−∞}^E [count_ref − count_ω](e) de per
//!   surface site, the counting function whose small-E asymptotics are
//!   the constant-surface laws. It is non-negative when ω ≥ ref.
//!
//! Both are linear in the pair (ω, ref), so vs-free = normalized + (ω₋ vs
//! free) holds curve by curve.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::disorder::DisorderSpec;
use crate::error::{Error, Result};
use crate::floquet::{FloquetSpec, Realization, SurfaceReduction};
use crate::par;
use crate::symbol::SymbolCoefficients;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    Free,
    ConstantOmegaMinus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    CountDifference,
    IntegratedShift,
    /// plain integrated density of states per site
    Ids,
}

impl fmt::Display for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reference::Free => "free",
            Reference::ConstantOmegaMinus => "constant_omega_minus",
        })
    }
}

impl fmt::Display for CurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CurveKind::CountDifference => "count_difference",
            CurveKind::IntegratedShift => "integrated_shift",
            CurveKind::Ids => "ids",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMeta {
    pub n_half: usize,
    pub realizations: usize,
    pub bz_grid: usize,
    pub seed: u64,
    pub reference: Reference,
    pub kind: CurveKind,
    pub symbol_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DosCurve {
    pub energies: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub meta: CurveMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdssParams {
    pub n_half: usize,
    pub realizations: usize,
    pub bz_grid: usize,
    pub seed: u64,
    pub reference: Reference,
    pub kind: CurveKind,
}

impl IdssParams {
    pub fn new(n_half: usize, realizations: usize, seed: u64) -> Self {
        Self {
            n_half,
            realizations,
            bz_grid: 1,
            seed,
            reference: Reference::Free,
            kind: CurveKind::IntegratedShift,
        }
    }

    pub fn reference(mut self, r: Reference) -> Self {
        self.reference = r;
        self
    }

    pub fn kind(mut self, k: CurveKind) -> Self {
        self.kind = k;
        self
    }

    pub fn bz_grid(mut self, b: usize) -> Self {
        self.bz_grid = b;
        self
    }
}

pub fn symbol_id(sym: &SymbolCoefficients) -> String {
    let dims = sym.dims();
    format!("d=({},{});terms={};offset={}", dims.d1, dims.d2, sym.entries().len(), sym.offset())
}

pub(crate) fn check_grid(energies: &[f64]) -> Result<()> {
    if energies.is_empty()
        || energies.iter().any(|e| !e.is_finite())
        || energies.windows(2).any(|w| !(w[0] < w[1]))
    {
        return Err(Error::BadGrid);
    }
    Ok(())
}

pub(crate) fn mean_stderr(samples: &[Vec<f64>], k: usize) -> (f64, f64) {
    let m = samples.len() as f64;
    let mean = samples.iter().map(|s| s[k]).sum::<f64>() / m;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s[k] - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

pub fn estimate_idss(
    sym: &SymbolCoefficients,
    dis: &DisorderSpec,
    energies: &[f64],
    params: &IdssParams,
) -> Result<DosCurve> {
    check_grid(energies)?;
    if params.kind == CurveKind::Ids {
        return Err(Error::Dimension("a surface curve kind (count_difference or integrated_shift)"));
    }
    if params.n_half == 0 || params.realizations == 0 || params.bz_grid == 0 {
        return Err(Error::Dimension("N, realizations and bz_grid must be at least 1"));
    }
    let reference = match params.reference {
        Reference::Free => 0.0,
        Reference::ConstantOmegaMinus => {
            let a = dis.omega_minus();
            if !a.is_finite() {
                return Err(Error::ReferenceMismatch);
            }
            a
        }
    };
    let spec = FloquetSpec::new(sym.clone(), params.n_half).with_bz_grid(params.bz_grid);
    let nodes = spec.bz_nodes();
    let norm = (nodes.len() * spec.surface_sites()) as f64;
    let reductions: Vec<SurfaceReduction> =
        par::map_indexed(nodes.len(), |k| SurfaceReduction::new(&spec, &nodes[k]));

    let (samples, realizations): (Vec<Vec<f64>>, usize) = if let Some(t) = dis.as_constant() {
        let curve = match params.kind {
            CurveKind::CountDifference => energies
                .iter()
                .map(|&e| {
                    let c: i64 = reductions
                        .iter()
                        .map(|r| {
                            let e = r.regular_energy(e);
                            r.surface_negativity(&[t], e) - r.surface_negativity(&[reference], e)
                        })
                        .sum();
                    c as f64 / norm
                })
                .collect(),
            CurveKind::IntegratedShift | CurveKind::Ids => {
                let a = constant_shift_sums(&reductions, t, energies);
                let b = constant_shift_sums(&reductions, reference, energies);
                a.iter().zip(&b).map(|(x, y)| (x - y) / norm).collect()
            }
        };
        (vec![curve], 1)
    } else {
        let m = params.realizations;
        let samples = par::map_indexed(m, |r| {
            let real = Realization::draw(&spec, dis, params.seed, r as u64);
            let ref_diag = vec![reference; spec.surface_sites()];
            let mut acc = vec![0.0; energies.len()];
            for red in &reductions {
                let vals = match params.kind {
                    CurveKind::CountDifference => energies
                        .iter()
                        .map(|&e| red.count_shift(&real.omegas, &ref_diag, e) as f64)
                        .collect(),
                    CurveKind::IntegratedShift | CurveKind::Ids => {
                        let lo = red.bottom() + real.omegas.iter().fold(reference.min(0.0), |a, &b| a.min(b));
                        let lo = lo - 1e-9 * lo.abs().max(1.0);
                        integrated_steps(|e| red.count_shift(&ref_diag, &real.omegas, e), lo, energies)
                    }
                };
                for (a, v) in acc.iter_mut().zip(vals) {
                    *a += v;
                }
            }
            acc.into_iter().map(|v| v / norm).collect::<Vec<f64>>()
        });
        (samples, m)
    };

    let mut values = Vec::with_capacity(energies.len());
    let mut stderr = Vec::with_capacity(energies.len());
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
            n_half: params.n_half,
            realizations,
            bz_grid: params.bz_grid,
            seed: params.seed,
            reference: params.reference,
            kind: params.kind,
            symbol_id: symbol_id(sym),
        },
    })
}

/// Σ over zone nodes and fibers of ∫_{−∞}^E [count₀ − count_t], exactly
/// from the moved eigenvalues of each rank-one fiber problem.
fn constant_shift_sums(reductions: &[SurfaceReduction], t: f64, energies: &[f64]) -> Vec<f64> {
    let emax = *energies.last().unwrap();
    let per_node = par::map_indexed(reductions.len(), |k| {
        let mut acc = vec![0.0; energies.len()];
        if t == 0.0 {
            return acc;
        }
        for f in reductions[k].fibers() {
            let roots = f.secular_roots_below(t, emax);
            for (a, &e) in acc.iter_mut().zip(energies) {
                *a += f.integrated_shift(&roots, e);
            }
        }
        acc
    });
    let mut out = vec![0.0; energies.len()];
    for v in per_node {
        for (o, x) in out.iter_mut().zip(v) {
            *o += x;
        }
    }
    out
}

const COARSE_CELLS: usize = 256;

/// ∫_{lo}^{E_k} f for an integer step function f with f(lo) = 0. Jumps are
/// located by bisection between coarse nodes whose values differ; a cell
/// whose end values agree is taken as constant (an up- and down-jump both
/// inside one cell is not resolved).
pub fn integrated_steps(f: impl Fn(f64) -> i64, lo: f64, energies: &[f64]) -> Vec<f64> {
    let emax = *energies.last().unwrap();
    if emax <= lo {
        return vec![0.0; energies.len()];
    }
    let mut nodes: Vec<f64> = (0..=COARSE_CELLS)
        .map(|k| lo + (emax - lo) * k as f64 / COARSE_CELLS as f64)
        .chain(energies.iter().copied().filter(|&e| e > lo))
        .collect();
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let tol = 1e-9 * (emax - lo).max(emax.abs());
    // piecewise-constant representation: (start, value)
    let mut steps: Vec<(f64, i64)> = vec![(lo, 0)];
    let mut prev = (nodes[0], 0i64);
    for &x in &nodes[1..] {
        let v = f(x);
        locate(&f, prev, (x, v), tol, &mut steps);
        prev = (x, v);
    }
    let mut out = Vec::with_capacity(energies.len());
    let mut k = 0;
    let mut acc = 0.0;
    for &e in energies {
        if e <= lo {
            out.push(0.0);
            continue;
        }
        while k + 1 < steps.len() && steps[k + 1].0 <= e {
            acc += steps[k].1 as f64 * (steps[k + 1].0 - steps[k].0);
            k += 1;
        }
        out.push(acc + steps[k].1 as f64 * (e - steps[k].0));
    }
    out
}

fn locate(f: &impl Fn(f64) -> i64, a: (f64, i64), b: (f64, i64), tol: f64, steps: &mut Vec<(f64, i64)>) {
    if a.1 == b.1 {
        return;
    }
    if b.0 - a.0 <= tol {
        steps.push((0.5 * (a.0 + b.0), b.1));
        return;
    }
    let m = 0.5 * (a.0 + b.0);
    let mv = f(m);
    locate(f, a, (m, mv), tol, steps);
    locate(f, (m, mv), b, tol, steps);
}

pub fn idss_constant(
    sym: &SymbolCoefficients,
    t: f64,
    energies: &[f64],
    n_half: usize,
    kind: CurveKind,
) -> Result<DosCurve> {
    estimate_idss(sym, &DisorderSpec::constant(t), energies, &IdssParams::new(n_half, 1, 0).kind(kind))
}

pub fn normalized_idss(
    sym: &SymbolCoefficients,
    dis: &DisorderSpec,
    energies: &[f64],
    params: &IdssParams,
) -> Result<DosCurve> {
    estimate_idss(sym, dis, energies, &params.clone().reference(Reference::ConstantOmegaMinus))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundViolation {
    pub energy: f64,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub checked: usize,
    pub violations: Vec<BoundViolation>,
}

impl BoundsReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// lower − 2σ ≤ value ≤ upper + 2σ per energy, σ combining the standard
/// errors of the curve and the bound in quadrature.
pub fn check_bounds(curve: &DosCurve, lower: &DosCurve, upper: &DosCurve) -> Result<BoundsReport> {
    if curve.energies != lower.energies || curve.energies != upper.energies {
        return Err(Error::GridMismatch);
    }
    let mut violations = Vec::new();
    for k in 0..curve.energies.len() {
        let v = curve.values[k];
        let s_lo = curve.stderr[k].hypot(lower.stderr[k]);
        let s_hi = curve.stderr[k].hypot(upper.stderr[k]);
        let slack = 1e-12 * (1.0 + v.abs());
        if v < lower.values[k] - 2.0 * s_lo - slack || v > upper.values[k] + 2.0 * s_hi + slack {
            violations.push(BoundViolation {
                energy: curve.energies[k],
                value: v,
                lower: lower.values[k],
                upper: upper.values[k],
            });
        }
    }
    Ok(BoundsReport { checked: curve.energies.len(), violations })
}

/// Energies where curves at N and 2N differ by more than 3 combined σ.
pub fn doubling_flags(coarse: &DosCurve, fine: &DosCurve) -> Result<Vec<f64>> {
    if coarse.energies != fine.energies {
        return Err(Error::GridMismatch);
    }
    Ok((0..coarse.energies.len())
        .filter(|&k| {
            let s = coarse.stderr[k].hypot(fine.stderr[k]);
            (coarse.values[k] - fine.values[k]).abs() > 3.0 * s + 1e-12
        })
        .map(|k| coarse.energies[k])
        .collect())
}

/// Estimate at N and 2N; returns both curves and the flagged energies.
pub fn doubling_check(
    sym: &SymbolCoefficients,
    dis: &DisorderSpec,
    energies: &[f64],
    params: &IdssParams,
) -> Result<(DosCurve, DosCurve, Vec<f64>)> {
    let a = estimate_idss(sym, dis, energies, params)?;
    let mut p2 = params.clone();
    p2.n_half *= 2;
    let b = estimate_idss(sym, dis, energies, &p2)?;
    let flags = doubling_flags(&a, &b)?;
    Ok((a, b, flags))
}

impl DosCurve {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// Pointwise a − b (same grid); errors add in quadrature.
    pub fn difference(&self, other: &DosCurve) -> Result<DosCurve> {
        if self.energies != other.energies {
            return Err(Error::GridMismatch);
        }
        Ok(DosCurve {
            energies: self.energies.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
            stderr: self.stderr.iter().zip(&other.stderr).map(|(a, b)| a.hypot(*b)).collect(),
            meta: self.meta.clone(),
        })
    }

    pub fn write_csv<W: Write>(&self, mut w: W, extra: &[(&str, String)]) -> std::io::Result<()> {
        let m = &self.meta;
        writeln!(w, "# N={}", m.n_half)?;
        writeln!(w, "# realizations={}", m.realizations)?;
        writeln!(w, "# bz_grid={}", m.bz_grid)?;
        writeln!(w, "# seed={}", m.seed)?;
        writeln!(w, "# reference={}", m.reference)?;
        writeln!(w, "# kind={}", m.kind)?;
        writeln!(w, "# symbol={}", m.symbol_id)?;
        for (k, v) in extra {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "E,value,stderr")?;
        for k in 0..self.len() {
            writeln!(w, "{:e},{:e},{:e}", self.energies[k], self.values[k], self.stderr[k])?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<DosCurve> {
        let bad = |s: &str| Error::Parse(s.to_string());
        let mut meta = CurveMeta {
            n_half: 0,
            realizations: 0,
            bz_grid: 1,
            seed: 0,
            reference: Reference::Free,
            kind: CurveKind::IntegratedShift,
            symbol_id: String::new(),
        };
        let (mut energies, mut values, mut stderr) = (vec![], vec![], vec![]);
        let mut header = false;
        for line in r.lines() {
            let line = line.map_err(|e| bad(&e.to_string()))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(kv) = line.strip_prefix('#') {
                let Some((k, v)) = kv.trim().split_once('=') else { continue };
                let num = |v: &str| v.parse::<u64>().map_err(|_| bad(line));
                match k {
                    "N" => meta.n_half = num(v)? as usize,
                    "realizations" => meta.realizations = num(v)? as usize,
                    "bz_grid" => meta.bz_grid = num(v)? as usize,
                    "seed" => meta.seed = num(v)?,
                    "reference" => {
                        meta.reference = match v {
                            "free" => Reference::Free,
                            "constant_omega_minus" => Reference::ConstantOmegaMinus,
                            _ => return Err(bad(line)),
                        }
                    }
                    "kind" => {
                        meta.kind = match v {
                            "count_difference" => CurveKind::CountDifference,
                            "integrated_shift" => CurveKind::IntegratedShift,
                            "ids" => CurveKind::Ids,
                            _ => return Err(bad(line)),
                        }
                    }
                    "symbol" => meta.symbol_id = v.to_string(),
                    _ => {}
                }
                continue;
            }
            if !header {
                if line != "E,value,stderr" {
                    return Err(bad(line));
                }
                header = true;
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|_| bad(line)))
                .collect::<Result<_>>()?;
            if cols.len() != 3 {
                return Err(bad(line));
            }
            energies.push(cols[0]);
            values.push(cols[1]);
            stderr.push(cols[2]);
        }
        if !header {
            return Err(bad("missing header"));
        }
        check_grid(&energies)?;
        Ok(DosCurve { energies, values, stderr, meta })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_integration_exact_on_known_steps() {
        let f = |e: f64| -> i64 { (e > 0.3) as i64 + 2 * (e > 0.71) as i64 - (e > 0.9) as i64 };
        let out = integrated_steps(f, 0.0, &[0.5, 0.8, 1.0]);
        let want = [0.2, 0.5 + 2.0 * 0.09, 0.7 + 2.0 * 0.29 - 0.1];
        for (a, b) in out.iter().zip(want) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn csv_round_trip() {
        let c = DosCurve {
            energies: vec![0.001, 0.002],
            values: vec![1.5e-5, -2.0],
            stderr: vec![0.0, 1e-3],
            meta: CurveMeta {
                n_half: 10,
                realizations: 4,
                bz_grid: 1,
                seed: 7,
                reference: Reference::ConstantOmegaMinus,
                kind: CurveKind::CountDifference,
                symbol_id: "d=(1,1);terms=5;offset=0".into(),
            },
        };
        let mut buf = Vec::new();
        c.write_csv(&mut buf, &[("config", "abc".into())]).unwrap();
        let back = DosCurve::read_csv(&buf[..]).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn grid_validation() {
        assert_eq!(check_grid(&[0.1, 0.1]), Err(Error::BadGrid));
        assert_eq!(check_grid(&[]), Err(Error::BadGrid));
        assert!(check_grid(&[-1.0, 0.0, 2.0]).is_ok());
    }
}
