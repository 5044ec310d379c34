//! Floquet matrices of the (2N+1)-periodic approximants, their fiber
//! decomposition for constant surface coupling, and the surface Schur
//! reduction used to count eigenvalues of large cells.
//!
//! Conventions: cell index β ∈ Z_n^d (n = 2N+1), lexicographic with the
//! surface coordinates first; M_{ββ'}(θ) = Σ_m h_{β−β'−nm} e^{−inθ·m}, whose
//! eigenvectors are e^{−iφ·β} with eigenvalue h(φ), φ = θ + 2πγ/n.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{bisect_root, count_eigenvalues_below, HermitianMatrix};
use crate::symbol::SymbolCoefficients;

pub const DEFAULT_DIMENSION_CAP: usize = 20_000;

#[derive(Debug, Clone)]
pub struct FloquetSpec {
    pub sym: SymbolCoefficients,
    pub n_half: usize,
    pub bz_grid: usize,
    pub cap: usize,
}

impl FloquetSpec {
    pub fn new(sym: SymbolCoefficients, n_half: usize) -> Self {
        Self { sym, n_half, bz_grid: 1, cap: DEFAULT_DIMENSION_CAP }
    }

    pub fn with_bz_grid(mut self, bz_grid: usize) -> Self {
        self.bz_grid = bz_grid.max(1);
        self
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    /// Period n = 2N+1.
    pub fn period(&self) -> usize {
        2 * self.n_half + 1
    }

    pub fn surface_sites(&self) -> usize {
        self.period().pow(self.sym.dims().d1 as u32)
    }

    pub fn dimension(&self) -> usize {
        self.period().pow(self.sym.d() as u32)
    }

    /// Midpoint nodes of the reduced cell [−π/n, π/n]^d.
    pub fn bz_nodes(&self) -> Vec<Vec<f64>> {
        let d = self.sym.d();
        let n = self.period() as f64;
        let b = self.bz_grid;
        let axis: Vec<f64> =
            (0..b).map(|k| -PI / n + (k as f64 + 0.5) * (2.0 * PI / n) / b as f64).collect();
        let mut nodes = vec![vec![]];
        for _ in 0..d {
            nodes = nodes
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&a| {
                        let mut q = p.clone();
                        q.push(a);
                        q
                    })
                })
                .collect();
        }
        nodes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub n_half: usize,
    /// One value per surface site of the cell, lexicographic in Z_n^{d1}.
    pub omegas: Vec<f64>,
    pub seed: u64,
}

impl Realization {
    pub fn constant(spec: &FloquetSpec, t: f64) -> Self {
        Self { n_half: spec.n_half, omegas: vec![t; spec.surface_sites()], seed: 0 }
    }

    pub fn draw(spec: &FloquetSpec, dis: &crate::disorder::DisorderSpec, seed: u64, index: u64) -> Self {
        Self {
            n_half: spec.n_half,
            omegas: dis.sample_n(spec.surface_sites(), seed, index),
            seed,
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        let first = *self.omegas.first()?;
        self.omegas.iter().all(|&w| w == first).then_some(first)
    }
}

pub fn build_floquet_matrix(
    spec: &FloquetSpec,
    real: &Realization,
    theta: &[f64],
) -> Result<HermitianMatrix> {
    let dim = spec.dimension();
    if dim > spec.cap {
        return Err(Error::DimensionCap { dim, cap: spec.cap });
    }
    let n = spec.period();
    let dims = spec.sym.dims();
    let d = dims.d();
    assert_eq!(real.omegas.len(), spec.surface_sites(), "realization does not match the cell");
    assert_eq!(theta.len(), d);
    let n_i = n as i64;
    let mut m = HermitianMatrix::zeros(dim);
    let mut beta_p = vec![0i64; d];
    for col in 0..dim {
        let mut rem = col;
        for ax in (0..d).rev() {
            beta_p[ax] = (rem % n) as i64;
            rem /= n;
        }
        for (gamma, &hg) in spec.sym.entries() {
            let mut row = 0usize;
            let mut phase = 0.0;
            for ax in 0..d {
                let raw = beta_p[ax] + gamma[ax];
                let b = raw.rem_euclid(n_i);
                // s = β − β' − γ, a multiple of n
                phase -= theta[ax] * (b - raw) as f64;
                row = row * n + b as usize;
            }
            m.add_at(row, col, hg * Complex64::from_polar(1.0, phase));
        }
        m.add_at(col, col, Complex64::new(spec.sym.offset(), 0.0));
    }
    let bulk = n.pow(dims.d2 as u32);
    for (s, &w) in real.omegas.iter().enumerate() {
        m.add_at(s * bulk, s * bulk, Complex64::new(w, 0.0));
    }
    Ok(m)
}

/// Per-site integrated density of states of the periodic approximant.
pub fn floquet_ids(spec: &FloquetSpec, real: &Realization, e: f64) -> Result<f64> {
    let nodes = spec.bz_nodes();
    let mut total = 0usize;
    for theta in &nodes {
        total += count_eigenvalues_below(&build_floquet_matrix(spec, real, theta)?, e);
    }
    Ok(total as f64 / (nodes.len() * spec.dimension()) as f64)
}

/// Spectrum of one fiber of a constant-coupling cell: the distinct values
/// h(θ₁′, θ₂ + 2πγ₂/n) with weights multiplicity / n^{d2} (= |⟨δ₀, u⟩|²
/// summed over the eigenspace).
#[derive(Debug, Clone, PartialEq)]
pub struct FiberLevels {
    levels: Vec<f64>,
    weights: Vec<f64>,
}

impl FiberLevels {
    pub fn new(sym: &SymbolCoefficients, theta1: &[f64], theta2: &[f64], n: usize) -> Self {
        let d2 = sym.dims().d2;
        let total = n.pow(d2 as u32);
        let mut p = theta1.to_vec();
        p.extend_from_slice(theta2);
        let d1 = theta1.len();
        let mut values = Vec::with_capacity(total);
        for idx in 0..total {
            let mut rem = idx;
            for ax in (0..d2).rev() {
                p[d1 + ax] = theta2[ax] + 2.0 * PI * (rem % n) as f64 / n as f64;
                rem /= n;
            }
            values.push(sym.value(&p));
        }
        Self::from_values(values)
    }

    pub fn from_values(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        let w = 1.0 / values.len() as f64;
        let mut levels: Vec<f64> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for v in values {
            match levels.last() {
                Some(&l) if v - l <= 1e-12 * l.abs().max(1.0) => *weights.last_mut().unwrap() += w,
                _ => {
                    levels.push(v);
                    weights.push(w);
                }
            }
        }
        Self { levels, weights }
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// g(E) = ⟨δ₀, (M̃₀ − E)⁻¹ δ₀⟩ = Σ_k w_k / (λ_k − E).
    pub fn green(&self, e: f64) -> f64 {
        self.levels.iter().zip(&self.weights).map(|(l, w)| w / (l - e)).sum()
    }

    fn hits_level(&self, e: f64) -> bool {
        self.levels.binary_search_by(|l| l.total_cmp(&e)).is_ok()
    }

    /// count(M̃_t < E) − count(M̃₀ < E) ∈ {−1, 0, 1}.
    pub fn count_shift(&self, t: f64, e: f64) -> i64 {
        if t == 0.0 {
            return 0;
        }
        let e = if self.hits_level(e) { e + 1e-13 * e.abs().max(1.0) } else { e };
        let phi = 1.0 + t * self.green(e);
        if t > 0.0 {
            -((phi <= 0.0) as i64)
        } else {
            (phi < 0.0) as i64
        }
    }

    /// Perturbed eigenvalues of M̃_t that move (one per distinct level),
    /// restricted to those below `emax`.
    pub fn secular_roots_below(&self, t: f64, emax: f64) -> Vec<f64> {
        let k = self.levels.len();
        let phi = |e: f64| 1.0 + t * self.green(e);
        let mut out = Vec::new();
        if t == 0.0 || k == 0 {
            return out;
        }
        let root_in = |a: f64, b: f64| -> f64 {
            let (mut a, mut b) = (a, b);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                // φ increases on each gap for t > 0 and decreases for t < 0
                if (phi(m) < 0.0) == (t > 0.0) {
                    a = m;
                } else {
                    b = m;
                }
            }
            0.5 * (a + b)
        };
        if t > 0.0 {
            for i in 0..k {
                if self.levels[i] >= emax {
                    break;
                }
                let hi = if i + 1 < k {
                    self.levels[i + 1]
                } else {
                    self.levels[i] + t + 1.0
                };
                out.push(root_in(self.levels[i], hi));
            }
        } else {
            let lo = self.levels[0] + t - 1.0;
            if lo < emax {
                out.push(root_in(lo, self.levels[0]));
            }
            for i in 1..k {
                if self.levels[i - 1] >= emax {
                    break;
                }
                out.push(root_in(self.levels[i - 1], self.levels[i]));
            }
        }
        out
    }

    /// ∫_{−∞}^E [count(M̃₀ < e) − count(M̃_t < e)] de given the moved
    /// eigenvalues (from `secular_roots_below` with emax ≥ E).
    pub fn integrated_shift(&self, roots: &[f64], e: f64) -> f64 {
        let a: f64 = self.levels.iter().map(|&l| (e - l).max(0.0)).sum();
        let b: f64 = roots.iter().map(|&m| (e - m).max(0.0)).sum();
        a - b
    }
}

/// Rank-one secular root in `bracket` for the fiber over θ₁ (bulk Bloch
/// momentum θ₂ = 0).
pub fn secular_rank_one(
    spec: &FloquetSpec,
    theta1: &[f64],
    t: f64,
    bracket: (f64, f64),
) -> Result<f64> {
    let d2 = spec.sym.dims().d2;
    let fiber = FiberLevels::new(&spec.sym, theta1, &vec![0.0; d2], spec.period());
    let (lo, hi) = bracket;
    let g = |e: f64| t * (-fiber.green(e)) - 1.0;
    bisect_root(g, lo, hi, 1e-14 * lo.abs().max(hi.abs()).max(1.0))
        .map_err(|_| Error::NoRoot { lo, hi })
}

/// Surface Schur reduction of a Floquet cell at one Bloch momentum θ.
///
/// With A = M₀(θ) − E and surface block P, inertia additivity gives
/// neg(M₀ + PDP* − E) = neg(A_bb) + neg(S₀(E) + D) where S₀ = [(A⁻¹)_ss]⁻¹
/// is diagonal in the surface Fourier basis with entries 1/g_p(E). Count
/// differences between two surface potentials therefore only need
/// n^{d1}-dimensional factorizations.
#[derive(Debug, Clone)]
pub struct SurfaceReduction {
    n: usize,
    d1: usize,
    theta1: Vec<f64>,
    fibers: Vec<FiberLevels>,
}

impl SurfaceReduction {
    pub fn new(spec: &FloquetSpec, theta: &[f64]) -> Self {
        let dims = spec.sym.dims();
        let n = spec.period();
        let (t1, t2) = theta.split_at(dims.d1);
        let n1 = spec.surface_sites();
        let fibers = (0..n1)
            .map(|p| FiberLevels::new(&spec.sym, &surface_momentum(t1, p, n), t2, n))
            .collect();
        Self { n, d1: dims.d1, theta1: t1.to_vec(), fibers }
    }

    pub fn fibers(&self) -> &[FiberLevels] {
        &self.fibers
    }

    pub fn surface_sites(&self) -> usize {
        self.fibers.len()
    }

    /// E nudged off fiber levels and zeros of g_p so S₀(E) is finite.
    pub fn regular_energy(&self, e: f64) -> f64 {
        let mut e = e;
        for _ in 0..8 {
            let ok = self.fibers.iter().all(|f| {
                let g = f.green(e);
                g.is_finite() && g.abs() > 1e-300 && !f.hits_level(e)
            });
            if ok {
                break;
            }
            e += 1e-13 * e.abs().max(1.0);
        }
        e
    }

    /// neg(S₀(E) + t) summed directly in the Fourier basis.
    fn neg_constant(&self, t: f64, e: f64) -> i64 {
        self.fibers.iter().filter(|f| 1.0 / f.green(e) + t < 0.0).count() as i64
    }

    /// S₀(E) in the site basis.
    pub fn surface_matrix(&self, e: f64) -> HermitianMatrix {
        let n = self.n;
        let n1 = self.fibers.len();
        let s: Vec<f64> = self.fibers.iter().map(|f| 1.0 / f.green(e)).collect();
        // c(δ) = (1/n1) Σ_p s_p e^{−2πi p·δ/n}, δ ∈ Z_n^{d1}
        let digits = |i: usize| -> Vec<usize> {
            let mut r = i;
            let mut out = vec![0; self.d1];
            for ax in (0..self.d1).rev() {
                out[ax] = r % n;
                r /= n;
            }
            out
        };
        let twiddle: Vec<Complex64> =
            (0..n).map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64)).collect();
        let all_digits: Vec<Vec<usize>> = (0..n1).map(digits).collect();
        let mut c = vec![Complex64::new(0.0, 0.0); n1];
        for (di, cd) in c.iter_mut().enumerate() {
            let dd = &all_digits[di];
            let mut acc = Complex64::new(0.0, 0.0);
            for (p, &sp) in s.iter().enumerate() {
                let k = all_digits[p].iter().zip(dd).map(|(a, b)| a * b).sum::<usize>() % n;
                acc += twiddle[k] * sp;
            }
            *cd = acc / n1 as f64;
        }
        let scale = c.iter().fold(0.0f64, |m, z| m.max(z.re.abs()));
        let theta_zero = self.theta1.iter().all(|&t| t == 0.0);
        if theta_zero && c.iter().all(|z| z.im.abs() <= 1e-13 * scale) {
            for z in c.iter_mut() {
                z.im = 0.0;
            }
        }
        let mut m = HermitianMatrix::zeros(n1);
        for x in 0..n1 {
            for y in 0..n1 {
                let (dx, dy) = (&all_digits[x], &all_digits[y]);
                let mut idx = 0;
                let mut phase = 0.0;
                for ax in 0..self.d1 {
                    let diff = dx[ax] as i64 - dy[ax] as i64;
                    idx = idx * n + diff.rem_euclid(n as i64) as usize;
                    phase -= self.theta1[ax] * diff as f64;
                }
                let v = if phase == 0.0 { c[idx] } else { c[idx] * Complex64::from_polar(1.0, phase) };
                m.set(x, y, v);
            }
        }
        m
    }

    /// neg(S₀(E) + D); `e` should already be regular. Constant D is
    /// handled without factorization.
    pub fn surface_negativity(&self, diag: &[f64], e: f64) -> i64 {
        if let Some(&t) = diag.first().filter(|&&t| diag.iter().all(|&x| x == t)) {
            return self.neg_constant(t, e);
        }
        let mut m = self.surface_matrix(e);
        for (i, &w) in diag.iter().enumerate() {
            m.add_at(i, i, Complex64::new(w, 0.0));
        }
        count_eigenvalues_below(&m, 0.0) as i64
    }

    /// neg(M_D − E) − neg(M_ref − E) for surface potentials D and D_ref.
    pub fn count_shift(&self, diag: &[f64], reference: &[f64], e: f64) -> i64 {
        let e = self.regular_energy(e);
        self.surface_negativity(diag, e) - self.surface_negativity(reference, e)
    }

    /// Smallest unperturbed level over all fibers.
    pub fn bottom(&self) -> f64 {
        self.fibers.iter().map(|f| f.levels()[0]).fold(f64::INFINITY, f64::min)
    }

    /// Σ over fibers for a constant coupling t against the free cell.
    pub fn count_shift_constant(&self, t: f64, e: f64) -> i64 {
        self.fibers.iter().map(|f| f.count_shift(t, e)).sum()
    }
}

/// θ₁ + 2πp/n for the p-th surface Fourier index (lexicographic).
pub fn surface_momentum(theta1: &[f64], p: usize, n: usize) -> Vec<f64> {
    let d1 = theta1.len();
    let mut out = theta1.to_vec();
    let mut rem = p;
    for ax in (0..d1).rev() {
        out[ax] += 2.0 * PI * (rem % n) as f64 / n as f64;
        rem /= n;
    }
    out
}
