use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Dense Hermitian matrix, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(n);
        for j in 0..n {
            for i in 0..n {
                m.data[j * n + i] = f(i, j);
            }
        }
        m
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, Complex64::new(d, 0.0));
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[j * self.n + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[j * self.n + i] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[j * self.n + i] += v;
    }

    pub fn shift_diagonal(&mut self, s: f64) {
        for i in 0..self.n {
            self.data[i * self.n + i].re += s;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// max|A − A*|.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for j in 0..self.n {
            for i in 0..=j {
                d = d.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        d
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect() <= 1e-10 * self.max_abs().max(f64::MIN_POSITIVE)
    }

    /// Replace A by (A + A*)/2.
    pub fn hermitize(&mut self) {
        let n = self.n;
        for j in 0..n {
            for i in j..n {
                let v = 0.5 * (self.get(i, j) + self.get(j, i).conj());
                self.set(i, j, v);
                self.set(j, i, v.conj());
            }
        }
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    pub fn to_dmatrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_column_slice(self.n, self.n, &self.data)
    }

    pub fn from_dmatrix(m: &DMatrix<Complex64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        Self { n: m.nrows(), data: m.as_slice().to_vec() }
    }

    /// Sorted eigenvalues (dense solver).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = if self.is_real() {
            let re: Vec<f64> = self.data.iter().map(|z| z.re).collect();
            DMatrix::from_column_slice(self.n, self.n, &re)
                .symmetric_eigenvalues()
                .iter()
                .copied()
                .collect()
        } else {
            self.to_dmatrix().symmetric_eigenvalues().iter().copied().collect()
        };
        ev.sort_by(f64::total_cmp);
        ev
    }
}

trait Field: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> {
    fn conj(self) -> Self;
    fn modulus(self) -> f64;
    fn norm_sqr(self) -> f64;
    fn re(self) -> f64;
    fn scale(self, s: f64) -> Self;
    fn is_zero(self) -> bool;
}

impl Field for f64 {
    fn conj(self) -> Self {
        self
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn norm_sqr(self) -> f64 {
        self * self
    }
    fn re(self) -> f64 {
        self
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn is_zero(self) -> bool {
        self == 0.0
    }
}

impl Field for Complex64 {
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn is_zero(self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
}

/// Number of negative eigenvalues of the Hermitian matrix stored in `a`
/// (column-major, lower triangle used, destroyed) by Bunch–Kaufman
/// symmetric pivoting. `None` when a pivot falls below `tol`.
fn negative_inertia<T: Field>(a: &mut [T], n: usize, tol: f64) -> Option<usize> {
    let alpha = (1.0 + 17f64.sqrt()) / 8.0;
    let mut neg = 0;
    let mut k = 0;
    while k < n {
        let akk = a[k * n + k].re().abs();
        let (mut lambda, mut r) = (0.0, k);
        for i in k + 1..n {
            let v = a[k * n + i].modulus();
            if v > lambda {
                lambda = v;
                r = i;
            }
        }
        if akk.max(lambda) <= tol {
            return None;
        }
        let mut two = false;
        if akk < alpha * lambda {
            let mut sigma: f64 = 0.0;
            for j in k..r {
                sigma = sigma.max(a[j * n + r].modulus());
            }
            for i in r + 1..n {
                sigma = sigma.max(a[r * n + i].modulus());
            }
            if akk * sigma >= alpha * lambda * lambda {
                // keep the 1x1 pivot at k
            } else if a[r * n + r].re().abs() >= alpha * sigma {
                swap_sym(a, n, k, k, r);
            } else {
                swap_sym(a, n, k, k + 1, r);
                two = true;
            }
        }

        if !two {
            let d = a[k * n + k].re();
            if d.abs() <= tol {
                return None;
            }
            if d < 0.0 {
                neg += 1;
            }
            let inv = 1.0 / d;
            let (left, right) = a.split_at_mut((k + 1) * n);
            let colk = &left[k * n..];
            for j in k + 1..n {
                let f = colk[j].conj().scale(inv);
                if f.is_zero() {
                    continue;
                }
                let colj = &mut right[(j - k - 1) * n..(j - k) * n];
                for i in j..n {
                    colj[i] = colj[i] - colk[i] * f;
                }
            }
            k += 1;
        } else {
            let d11 = a[k * n + k].re();
            let d22 = a[(k + 1) * n + k + 1].re();
            let d21 = a[k * n + k + 1];
            let det = d11 * d22 - d21.norm_sqr();
            let half_tr = 0.5 * (d11 + d22);
            let rad = (0.25 * (d11 - d22).powi(2) + d21.norm_sqr()).sqrt();
            let (l1, l2) = (half_tr - rad, half_tr + rad);
            if l1.abs().min(l2.abs()) <= tol {
                return None;
            }
            neg += (l1 < 0.0) as usize + (l2 < 0.0) as usize;
            let inv = 1.0 / det;
            let (left, right) = a.split_at_mut((k + 2) * n);
            let (colk, colk1) = left[k * n..].split_at(n);
            for j in k + 2..n {
                let c1 = colk[j].conj();
                let c2 = colk1[j].conj();
                let w1 = (c1.scale(d22) - d21.conj() * c2).scale(inv);
                let w2 = (c2.scale(d11) - d21 * c1).scale(inv);
                let colj = &mut right[(j - k - 2) * n..(j - k - 1) * n];
                for i in j..n {
                    colj[i] = colj[i] - (colk[i] * w1 + colk1[i] * w2);
                }
            }
            k += 2;
        }
    }
    Some(neg)
}

// Symmetric row/column interchange p < q inside the active lower triangle.
// Columns before `from` are already eliminated.
fn swap_sym<T: Field>(a: &mut [T], n: usize, from: usize, p: usize, q: usize) {
    if p == q {
        return;
    }
    let (p, q) = (p.min(q), p.max(q));
    a.swap(p * n + p, q * n + q);
    for j in from..p {
        a.swap(j * n + p, j * n + q);
    }
    for j in p + 1..q {
        let t = a[p * n + j];
        a[p * n + j] = a[j * n + q].conj();
        a[j * n + q] = t.conj();
    }
    a[p * n + q] = a[p * n + q].conj();
    for i in q + 1..n {
        a.swap(p * n + i, q * n + i);
    }
}

fn relative_tol(scale: f64) -> f64 {
    1e-12 * scale.max(f64::MIN_POSITIVE)
}

/// Number of eigenvalues of `a` strictly below `e`.
pub fn count_eigenvalues_below(a: &HermitianMatrix, e: f64) -> usize {
    let n = a.n;
    if n == 0 {
        return 0;
    }
    let tol = relative_tol(a.max_abs().max(e.abs()));
    let fast = if a.is_real() {
        let mut m: Vec<f64> = a.data.iter().map(|z| z.re).collect();
        for i in 0..n {
            m[i * n + i] -= e;
        }
        negative_inertia(&mut m, n, tol)
    } else {
        let mut m = a.data.clone();
        for i in 0..n {
            m[i * n + i].re -= e;
        }
        negative_inertia(&mut m, n, tol)
    };
    match fast {
        Some(c) => c,
        None => a.eigenvalues().iter().filter(|&&l| l < e).count(),
    }
}

/// Real symmetric variant on a column-major slice.
pub fn count_eigenvalues_below_real(a: &[f64], n: usize, e: f64) -> usize {
    assert_eq!(a.len(), n * n);
    if n == 0 {
        return 0;
    }
    let scale = a.iter().fold(e.abs(), |m, x| m.max(x.abs()));
    let mut m = a.to_vec();
    for i in 0..n {
        m[i * n + i] -= e;
    }
    match negative_inertia(&mut m, n, relative_tol(scale)) {
        Some(c) => c,
        None => DMatrix::from_column_slice(n, n, a)
            .symmetric_eigenvalues()
            .iter()
            .filter(|&&l| l < e)
            .count(),
    }
}

/// Count of eigenvalues below `e` for the real symmetric periodic band matrix
/// `A_ij = band[d(i,j)] + δ_ij diag[i]`, `d` the circular distance (zero past the band).
///
/// O(n·b²): banded LDLᵀ on the first n−b sites, then a b×b Schur border for the wrap.
pub fn count_below_periodic_band(band: &[f64], diag: &[f64], e: f64) -> usize {
    let n = diag.len();
    let b = band.len().saturating_sub(1);
    if b == 0 || n <= 4 * b {
        let a = dense_periodic_band(band, diag, n);
        return count_eigenvalues_below_real(&a, n, e);
    }
    let scale = band.iter().chain(diag).fold(e.abs().max(1.0), |m, x| m.max(x.abs()));
    // a tiny pivot means e sits (numerically) on an eigenvalue of the interior block
    for k in 0..8 {
        let ek = e + k as f64 * 1e-13 * scale;
        if let Some(c) = band_inertia(band, diag, ek, scale) {
            return c;
        }
    }
    let a = dense_periodic_band(band, diag, n);
    count_eigenvalues_below_real(&a, n, e)
}

fn dense_periodic_band(band: &[f64], diag: &[f64], n: usize) -> Vec<f64> {
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        a[i * n + i] += diag[i];
        for (d, &c) in band.iter().enumerate() {
            if d == 0 {
                a[i * n + i] += c;
            } else if d <= n / 2 {
                let j = (i + d) % n;
                a[j * n + i] += c;
                // at d = n/2 both directions reach the same site; j's own pass fills (i, j)
                if 2 * d != n {
                    a[i * n + j] += c;
                }
            }
        }
    }
    a
}

fn band_inertia(band: &[f64], diag: &[f64], e: f64, scale: f64) -> Option<usize> {
    let n = diag.len();
    let b = band.len() - 1;
    let m = n - b;
    let w = b + 1;
    let tol = 1e-13 * scale;
    let entry = |i: usize, j: usize| -> f64 {
        let d = i.abs_diff(j);
        let d = d.min(n - d);
        let mut v = if d <= b { band[d] } else { 0.0 };
        if i == j {
            v += diag[i] - e;
        }
        v
    };
    // l[i*w + (i-j)] = L_ij for 0 < i-j ≤ b
    let mut l = vec![0.0; m * w];
    let mut d = vec![0.0; m];
    let mut neg = 0;
    for i in 0..m {
        let lo = i.saturating_sub(b);
        for j in lo..i {
            let mut s = entry(i, j);
            for k in lo.max(j.saturating_sub(b))..j {
                s -= l[i * w + (i - k)] * l[j * w + (j - k)] * d[k];
            }
            l[i * w + (i - j)] = s / d[j];
        }
        let mut s = entry(i, i);
        for k in lo..i {
            let lik = l[i * w + (i - k)];
            s -= lik * lik * d[k];
        }
        if s.abs() < tol {
            return None;
        }
        d[i] = s;
        neg += (s < 0.0) as usize;
    }
    // border columns q = m..n; solve A_II x = A_Iq
    let mut border = vec![0.0; b * b];
    let mut cols = Vec::with_capacity(b);
    for q in m..n {
        let v: Vec<f64> = (0..m).map(|i| entry(i, q)).collect();
        let mut x = v.clone();
        for i in 0..m {
            let mut s = x[i];
            for k in i.saturating_sub(b)..i {
                s -= l[i * w + (i - k)] * x[k];
            }
            x[i] = s;
        }
        for i in 0..m {
            x[i] /= d[i];
        }
        for i in (0..m).rev() {
            let mut s = x[i];
            for k in i + 1..(i + w).min(m) {
                s -= l[k * w + (k - i)] * x[k];
            }
            x[i] = s;
        }
        cols.push((v, x));
    }
    for (a, qa) in (m..n).enumerate() {
        for (c, qc) in (m..n).enumerate() {
            let dot: f64 = cols[a].0.iter().zip(&cols[c].1).map(|(p, r)| p * r).sum();
            border[c * b + a] = entry(qa, qc) - dot;
        }
    }
    // symmetrize against round-off before the dense count
    for a in 0..b {
        for c in 0..a {
            let s = 0.5 * (border[c * b + a] + border[a * b + c]);
            border[c * b + a] = s;
            border[a * b + c] = s;
        }
    }
    Some(neg + count_eigenvalues_below_real(&border, b, 0.0))
}
