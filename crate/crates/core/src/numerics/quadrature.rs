use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::par;

/// Values the torus rule can integrate.
pub trait Scalar:
    Copy + Send + Sync + Zero + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn magnitude(self) -> f64;
    fn finite(self) -> bool;
}

impl Scalar for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
    fn finite(self) -> bool {
        self.is_finite()
    }
}

impl Scalar for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
    fn finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult<T> {
    pub value: T,
    pub estimated_error: f64,
    pub grid_used: usize,
}

const BLOCK: usize = 1024;

pub fn pairwise_sum<T: Scalar>(xs: &[T]) -> T {
    if xs.len() <= 8 {
        return xs.iter().fold(T::zero(), |acc, &x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Rectangle rule on T^n with normalized Haar measure, nodes 2πk/grid.
/// Odd grids are bumped to the next even size so the half-resolution
/// estimate reuses a subset of the nodes.
pub fn integrate_torus<T, F>(f: F, n: usize, grid_per_axis: usize) -> Result<QuadratureResult<T>>
where
    T: Scalar,
    F: Fn(&[f64]) -> T + Sync + Send,
{
    integrate_torus_shifted(f, n, grid_per_axis, 0.0)
}

/// Same rule with nodes at 2π(k + shift)/grid; shift = 0.5 keeps symmetric
/// singular points (0, π) off the grid.
pub fn integrate_torus_shifted<T, F>(
    f: F,
    n: usize,
    grid_per_axis: usize,
    shift: f64,
) -> Result<QuadratureResult<T>>
where
    T: Scalar,
    F: Fn(&[f64]) -> T + Sync + Send,
{
    let g = grid_per_axis.max(2);
    let g = g + (g % 2);
    if n == 0 {
        let v = f(&[]);
        if !v.finite() {
            return Err(Error::NonFinite);
        }
        return Ok(QuadratureResult { value: v, estimated_error: 0.0, grid_used: g });
    }
    let total = g.checked_pow(n as u32).expect("quadrature grid overflows usize");
    let h = 2.0 * PI / g as f64;
    let nblocks = total.div_ceil(BLOCK);

    let blocks = par::map_indexed(nblocks, |b| -> Result<(T, T)> {
        let start = b * BLOCK;
        let end = (start + BLOCK).min(total);
        let mut full = Vec::with_capacity(end - start);
        let mut half = Vec::with_capacity((end - start) / 2 + 1);
        let mut theta = vec![0.0; n];
        let mut digits = vec![0usize; n];
        let mut rem = start;
        for ax in (0..n).rev() {
            digits[ax] = rem % g;
            rem /= g;
        }
        for _ in start..end {
            for ax in 0..n {
                theta[ax] = (digits[ax] as f64 + shift) * h;
            }
            let v = f(&theta);
            if !v.finite() {
                return Err(Error::NonFinite);
            }
            full.push(v);
            if digits.iter().all(|d| d % 2 == 0) {
                half.push(v);
            }
            for ax in (0..n).rev() {
                digits[ax] += 1;
                if digits[ax] < g {
                    break;
                }
                digits[ax] = 0;
            }
        }
        Ok((pairwise_sum(&full), pairwise_sum(&half)))
    });

    let mut fulls = Vec::with_capacity(nblocks);
    let mut halves = Vec::with_capacity(nblocks);
    for r in blocks {
        let (a, b) = r?;
        fulls.push(a);
        halves.push(b);
    }
    let value = pairwise_sum(&fulls) * (1.0 / total as f64);
    let coarse = pairwise_sum(&halves) * (1.0 / (total >> n) as f64);
    Ok(QuadratureResult {
        value,
        estimated_error: (value - coarse).magnitude(),
        grid_used: g,
    })
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}
