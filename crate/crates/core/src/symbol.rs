//! Torus symbols h(θ) = Σ_γ h_γ e^{iγ·θ} + offset of translation-invariant
//! Jacobi operators on Z^{d1} × Z^{d2}. Coordinates are ordered surface
//! first: θ = (θ₁, θ₂).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeDims {
    pub d1: usize,
    pub d2: usize,
}

impl LatticeDims {
    pub fn new(d1: usize, d2: usize) -> Result<Self> {
        if d1 == 0 || d2 == 0 {
            return Err(Error::InvalidDims { d1, d2 });
        }
        Ok(Self { d1, d2 })
    }

    pub fn d(&self) -> usize {
        self.d1 + self.d2
    }
}

const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolCoefficients {
    dims: LatticeDims,
    entries: BTreeMap<Vec<i64>, Complex64>,
    decay_constant: f64,
    offset: f64,
    // one representative γ of each ±γ pair (γ ≠ 0) for real evaluation
    half: Vec<(Vec<i64>, Complex64)>,
    constant: f64,
}

impl SymbolCoefficients {
    /// Validated constructor: Hermitian symmetry within 1e-12 and at least
    /// one non-constant coefficient.
    pub fn new(
        dims: LatticeDims,
        entries: BTreeMap<Vec<i64>, Complex64>,
        offset: f64,
    ) -> Result<Self> {
        for (g, &v) in &entries {
            assert_eq!(g.len(), dims.d(), "coefficient index has wrong length");
            let mg: Vec<i64> = g.iter().map(|x| -x).collect();
            let partner = entries.get(&mg).copied().unwrap_or_default();
            if (partner - v.conj()).norm() > HERMITIAN_TOL {
                return Err(Error::NotHermitian(g.clone()));
            }
        }
        let sym = Self::from_entries_unchecked(dims, entries, offset);
        if sym.half.is_empty() {
            return Err(Error::ConstantSymbol);
        }
        Ok(sym)
    }

    /// No symmetry check; `eval` will report an imaginary residue on broken
    /// tables, `value` silently uses the γ ≥ 0 half.
    pub fn from_entries_unchecked(
        dims: LatticeDims,
        entries: BTreeMap<Vec<i64>, Complex64>,
        offset: f64,
    ) -> Self {
        let mut entries = entries;
        entries.retain(|_, v| v.norm() > 0.0);
        let zero = vec![0i64; dims.d()];
        let constant = entries.get(&zero).map_or(0.0, |v| v.re) + offset;
        let half = entries
            .iter()
            .filter(|(g, _)| is_positive(g))
            .map(|(g, &v)| (g.clone(), v))
            .collect();
        Self { dims, entries, decay_constant: 1.0, offset, half, constant }
    }

    /// Σ_j w_j (1 + cos θ_j); minimum 0 at (π,…,π).
    pub fn separable(dims: LatticeDims, weights: &[f64]) -> Result<Self> {
        assert_eq!(weights.len(), dims.d(), "one weight per axis");
        let d = dims.d();
        let mut entries = BTreeMap::new();
        entries.insert(vec![0; d], Complex64::new(weights.iter().sum(), 0.0));
        for (j, &w) in weights.iter().enumerate() {
            for s in [-1, 1] {
                let mut g = vec![0; d];
                g[j] = s;
                entries.insert(g, Complex64::new(0.5 * w, 0.0));
            }
        }
        Self::new(dims, entries, 0.0)
    }

    /// Parse `γ_1 … γ_d re im` lines (`#` comments). The table is
    /// symmetrized; asymmetries above 1e-12 are returned as warnings.
    pub fn from_coefficient_text(dims: LatticeDims, text: &str) -> Result<(Self, Vec<String>)> {
        let d = dims.d();
        let mut raw: BTreeMap<Vec<i64>, Complex64> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let tok: Vec<&str> = line.split_whitespace().collect();
            if tok.len() != d + 2 {
                return Err(Error::Parse(format!(
                    "line {}: expected {} fields, found {}",
                    lineno + 1,
                    d + 2,
                    tok.len()
                )));
            }
            let bad = |s: &str| Error::Parse(format!("line {}: bad number {s:?}", lineno + 1));
            let g = tok[..d]
                .iter()
                .map(|s| s.parse::<i64>().map_err(|_| bad(s)))
                .collect::<Result<Vec<_>>>()?;
            let re: f64 = tok[d].parse().map_err(|_| bad(tok[d]))?;
            let im: f64 = tok[d + 1].parse().map_err(|_| bad(tok[d + 1]))?;
            *raw.entry(g).or_default() += Complex64::new(re, im);
        }
        let mut warnings = Vec::new();
        let mut sym = BTreeMap::new();
        for (g, &v) in &raw {
            let mg: Vec<i64> = g.iter().map(|x| -x).collect();
            let partner = raw.get(&mg).copied().unwrap_or_default();
            let defect = (v - partner.conj()).norm();
            if defect > HERMITIAN_TOL {
                let msg = format!("coefficient {g:?} asymmetric by {defect:e}; symmetrized");
                log::warn!("{msg}");
                warnings.push(msg);
            }
            let s = 0.5 * (v + partner.conj());
            sym.insert(g.clone(), s);
            sym.insert(mg, s.conj());
        }
        Ok((Self::new(dims, sym, 0.0)?, warnings))
    }

    pub fn dims(&self) -> LatticeDims {
        self.dims
    }

    pub fn d(&self) -> usize {
        self.dims.d()
    }

    pub fn entries(&self) -> &BTreeMap<Vec<i64>, Complex64> {
        &self.entries
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn decay_constant(&self) -> f64 {
        self.decay_constant
    }

    pub fn with_decay_constant(mut self, c: f64) -> Self {
        self.decay_constant = c;
        self
    }

    pub fn with_offset(&self, offset: f64) -> Self {
        Self::from_entries_unchecked(self.dims, self.entries.clone(), offset)
            .with_decay_constant(self.decay_constant)
    }

    /// Shift the offset so that min h = 0.
    pub fn normalized(&self) -> Result<Self> {
        let (_, min) = extremum(self, &[], 32, 1e-12, false);
        Ok(self.with_offset(self.offset - min))
    }

    /// max h − h: same operator class, minimum 0 at the old maximizer.
    pub fn mirrored(&self, max_value: f64) -> Self {
        let entries = self.entries.iter().map(|(g, v)| (g.clone(), -v)).collect();
        Self::from_entries_unchecked(self.dims, entries, max_value - self.offset)
            .with_decay_constant(self.decay_constant)
    }

    /// Full complex sum; errors if the imaginary part reaches 1e-10.
    pub fn eval(&self, theta: &[f64]) -> Result<f64> {
        let z = self.eval_complex(theta);
        if z.im.abs() >= 1e-10 {
            return Err(Error::ImaginaryResidue(z.im));
        }
        Ok(z.re)
    }

    pub fn eval_complex(&self, theta: &[f64]) -> Complex64 {
        debug_assert_eq!(theta.len(), self.d());
        let mut s = Complex64::new(self.offset, 0.0);
        for (g, &v) in &self.entries {
            s += v * Complex64::from_polar(1.0, dot(g, theta));
        }
        s
    }

    /// Fast real evaluation relying on Hermitian symmetry.
    #[inline]
    pub fn value(&self, theta: &[f64]) -> f64 {
        let mut s = self.constant;
        for (g, v) in &self.half {
            let (sn, cs) = dot(g, theta).sin_cos();
            s += 2.0 * (v.re * cs - v.im * sn);
        }
        s
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d()];
        for (g, v) in &self.half {
            let (sn, cs) = dot(g, theta).sin_cos();
            // d/dθ_j 2Re(v e^{iγθ}) = −2γ_j (v.re sin + v.im cos)
            let c = -2.0 * (v.re * sn + v.im * cs);
            for (o, &gj) in out.iter_mut().zip(g) {
                *o += c * gj as f64;
            }
        }
        out
    }

    /// Exact Hessian of the trigonometric series.
    pub fn hessian(&self, theta: &[f64]) -> DMatrix<f64> {
        let d = self.d();
        let mut h = DMatrix::zeros(d, d);
        for (g, v) in &self.half {
            let (sn, cs) = dot(g, theta).sin_cos();
            let c = -2.0 * (v.re * cs - v.im * sn);
            for i in 0..d {
                for j in 0..d {
                    h[(i, j)] += c * (g[i] * g[j]) as f64;
                }
            }
        }
        h
    }

    /// Largest |γ_axis| in the table.
    pub fn max_degree(&self, axis: usize) -> i64 {
        self.entries.keys().map(|g| g[axis].abs()).max().unwrap_or(0)
    }

    /// Laurent coefficients c_k, k = −K..K, of w ↦ h(θ', w) in w = e^{iθ_last},
    /// with θ' the first d−1 coordinates. Offset is included in c_0.
    pub fn laurent_last(&self, theta_rest: &[f64]) -> (usize, Vec<Complex64>) {
        let d = self.d();
        debug_assert_eq!(theta_rest.len(), d - 1);
        let k = self.max_degree(d - 1) as usize;
        let mut c = vec![Complex64::new(0.0, 0.0); 2 * k + 1];
        for (g, &v) in &self.entries {
            let phase = dot(&g[..d - 1], theta_rest);
            c[(g[d - 1] + k as i64) as usize] += v * Complex64::from_polar(1.0, phase);
        }
        c[k] += self.offset;
        (k, c)
    }
}

fn is_positive(g: &[i64]) -> bool {
    g.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0)
}

#[inline]
pub(crate) fn dot(g: &[i64], theta: &[f64]) -> f64 {
    g.iter().zip(theta).map(|(&a, &b)| a as f64 * b).sum()
}

pub fn make_free_laplacian(dims: LatticeDims) -> SymbolCoefficients {
    SymbolCoefficients::separable(dims, &vec![1.0; dims.d()]).expect("free Laplacian is valid")
}

pub fn eval_symbol(sym: &SymbolCoefficients, theta: &[f64]) -> Result<f64> {
    sym.eval(theta)
}

fn int_det(m: &[Vec<i64>]) -> i64 {
    // Bareiss fraction-free elimination
    let n = m.len();
    let mut a: Vec<Vec<i128>> = m.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&i| a[i][k] != 0) {
                Some(p) => {
                    a.swap(k, p);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    if n == 0 {
        return 1;
    }
    (sign * a[n - 1][n - 1]) as i64
}

/// Exact inverse of a unimodular integer matrix.
pub fn unimodular_inverse(g: &[Vec<i64>]) -> Result<Vec<Vec<i64>>> {
    let n = g.len();
    assert!(g.iter().all(|r| r.len() == n), "matrix must be square");
    let det = int_det(g);
    if det.abs() != 1 {
        return Err(Error::NotUnimodular(det));
    }
    let mut inv = vec![vec![0i64; n]; n];
    for i in 0..n {
        for j in 0..n {
            let minor: Vec<Vec<i64>> = g
                .iter()
                .enumerate()
                .filter(|&(r, _)| r != j)
                .map(|(_, row)| {
                    row.iter().enumerate().filter(|&(c, _)| c != i).map(|(_, &x)| x).collect()
                })
                .collect();
            let cof = if (i + j) % 2 == 0 { 1 } else { -1 } * int_det(&minor);
            inv[i][j] = cof * det;
        }
    }
    Ok(inv)
}

/// Coefficients of θ ↦ h(G′θ), G′ = (Gᵀ)⁻¹: h_γ moves to G⁻¹γ.
pub fn apply_lattice_transform(
    sym: &SymbolCoefficients,
    g: &[Vec<i64>],
) -> Result<SymbolCoefficients> {
    let d = sym.d();
    assert_eq!(g.len(), d, "transform must be d×d");
    let inv = unimodular_inverse(g)?;
    let entries = sym
        .entries
        .iter()
        .map(|(gamma, &v)| {
            let image: Vec<i64> =
                (0..d).map(|i| (0..d).map(|j| inv[i][j] * gamma[j]).sum()).collect();
            (image, v)
        })
        .collect();
    Ok(SymbolCoefficients::from_entries_unchecked(sym.dims, entries, sym.offset)
        .with_decay_constant(sym.decay_constant))
}

/// G′ = (Gᵀ)⁻¹ as a real matrix, for evaluating h(G′θ).
pub fn transpose_inverse(g: &[Vec<i64>]) -> Result<Vec<Vec<f64>>> {
    let inv = unimodular_inverse(g)?;
    let n = g.len();
    Ok((0..n).map(|i| (0..n).map(|j| inv[j][i] as f64).collect()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimumReport {
    pub theta_star: Vec<f64>,
    pub value: f64,
    pub hessian: DMatrix<f64>,
    pub q1: DMatrix<f64>,
    pub q2: DMatrix<f64>,
    /// d2 × d1 off-diagonal block.
    pub r: DMatrix<f64>,
    pub unique: bool,
}

impl MinimumReport {
    /// Q1 − R*Q2⁻¹R.
    pub fn schur_block(&self) -> DMatrix<f64> {
        let q2inv = self.q2.clone().try_inverse().expect("Q2 positive definite");
        &self.q1 - self.r.transpose() * q2inv * &self.r
    }

    pub fn theta1_star(&self) -> &[f64] {
        &self.theta_star[..self.q1.nrows()]
    }
}

pub fn find_global_minimum(
    sym: &SymbolCoefficients,
    grid_per_axis: usize,
    refine_tol: f64,
) -> Result<MinimumReport> {
    let d = sym.d();
    let candidates = local_extrema(sym, &[], grid_per_axis.max(16), refine_tol, false);
    let best = candidates
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("grid has at least one node")
        .clone();
    let ties = candidates.iter().filter(|c| c.1 <= best.1 + 1e-6).count();
    let hessian = sym.hessian(&best.0);
    let hessian = 0.5 * (&hessian + hessian.transpose());
    let min_eig = hessian.clone().symmetric_eigenvalues().min();
    if min_eig < 1e-8 {
        return Err(Error::DegenerateMinimum(min_eig));
    }
    let d1 = sym.dims.d1;
    Ok(MinimumReport {
        q1: hessian.view((0, 0), (d1, d1)).into_owned(),
        q2: hessian.view((d1, d1), (d - d1, d - d1)).into_owned(),
        r: hessian.view((d1, 0), (d - d1, d1)).into_owned(),
        theta_star: best.0,
        value: best.1,
        hessian,
        unique: ties == 1,
    })
}

/// Global min (or max) over the coordinates following `fixed`:
/// returns (argument of the free coordinates, value).
pub fn extremum(
    sym: &SymbolCoefficients,
    fixed: &[f64],
    grid_per_axis: usize,
    tol: f64,
    maximize: bool,
) -> (Vec<f64>, f64) {
    let c = local_extrema(sym, fixed, grid_per_axis, tol, maximize);
    let best = if maximize {
        c.into_iter().max_by(|a, b| a.1.total_cmp(&b.1))
    } else {
        c.into_iter().min_by(|a, b| a.1.total_cmp(&b.1))
    };
    let (theta, v) = best.expect("non-empty grid");
    (theta[fixed.len()..].to_vec(), v)
}

/// Fiber minimum h₂(θ₁) = min over θ₂ of h(θ₁, θ₂).
pub fn fiber_min(sym: &SymbolCoefficients, theta1: &[f64]) -> f64 {
    extremum(sym, theta1, fiber_grid(sym), 1e-12, false).1
}

pub fn fiber_max(sym: &SymbolCoefficients, theta1: &[f64]) -> f64 {
    extremum(sym, theta1, fiber_grid(sym), 1e-12, true).1
}

fn fiber_grid(sym: &SymbolCoefficients) -> usize {
    match sym.dims.d2 {
        1 => 24,
        2 => 16,
        _ => 10,
    }
}

// Grid scan for discrete local extrema followed by damped Newton polish.
// Returns the distinct refined candidates as (full θ, h).
fn local_extrema(
    sym: &SymbolCoefficients,
    fixed: &[f64],
    grid: usize,
    tol: f64,
    maximize: bool,
) -> Vec<(Vec<f64>, f64)> {
    let d = sym.d();
    let m = d - fixed.len();
    let sign = if maximize { -1.0 } else { 1.0 };
    let total = grid.pow(m as u32);
    let h = 2.0 * PI / grid as f64;
    let point = |idx: usize| -> Vec<f64> {
        let mut theta = fixed.to_vec();
        let mut rem = idx;
        let mut free = vec![0.0; m];
        for ax in (0..m).rev() {
            free[ax] = (rem % grid) as f64 * h;
            rem /= grid;
        }
        theta.extend(free);
        theta
    };
    let vals: Vec<f64> = (0..total).map(|i| sign * sym.value(&point(i))).collect();
    let strides: Vec<usize> = (0..m).map(|ax| grid.pow((m - 1 - ax) as u32)).collect();
    let mut cands: Vec<usize> = Vec::new();
    'node: for i in 0..total {
        let digits: Vec<usize> = (0..m).map(|ax| (i / strides[ax]) % grid).collect();
        for nb in 1..3usize.pow(m as u32) {
            let mut j = 0;
            let mut code = nb;
            for ax in 0..m {
                let off = code % 3;
                code /= 3;
                let dgt = (digits[ax] + grid + off - 1) % grid;
                j += dgt * strides[ax];
            }
            if vals[j] < vals[i] {
                continue 'node;
            }
        }
        cands.push(i);
    }
    cands.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    cands.truncate(64);

    let mut out: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in cands {
        let theta = polish(sym, point(c), fixed.len(), sign, tol);
        let v = sym.value(&theta);
        if out.iter().all(|(t, _)| torus_distance(t, &theta) > 1e-5) {
            out.push((theta, v));
        }
    }
    out
}

fn polish(sym: &SymbolCoefficients, mut theta: Vec<f64>, skip: usize, sign: f64, tol: f64) -> Vec<f64> {
    let d = theta.len();
    let m = d - skip;
    let f = |t: &[f64]| sign * sym.value(t);
    for _ in 0..200 {
        let g: Vec<f64> = sym.gradient(&theta)[skip..].iter().map(|x| sign * x).collect();
        let gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if gnorm < tol {
            break;
        }
        let hfull = sym.hessian(&theta);
        let hs = DMatrix::from_fn(m, m, |i, j| sign * hfull[(skip + i, skip + j)]);
        let gv = nalgebra::DVector::from_vec(g.clone());
        let step = match hs.cholesky() {
            Some(ch) => -ch.solve(&gv),
            None => -gv.clone(),
        };
        let slope = gv.dot(&step);
        let f0 = f(&theta);
        let mut alpha = 1.0;
        let mut moved = false;
        while alpha > 1e-14 {
            let trial: Vec<f64> = theta
                .iter()
                .enumerate()
                .map(|(i, &t)| if i < skip { t } else { t + alpha * step[i - skip] })
                .collect();
            if f(&trial) <= f0 + 1e-4 * alpha * slope {
                theta = trial;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
    }
    for t in theta.iter_mut().skip(skip) {
        *t = t.rem_euclid(2.0 * PI);
    }
    theta
}

pub fn torus_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let r = (x - y).rem_euclid(2.0 * PI);
            r.min(2.0 * PI - r).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}
