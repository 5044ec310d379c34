use num_complex::Complex64;

use crate::error::{Error, Result};

/// Bisection for a sign change of `f` on [lo, hi].
pub fn bisect_root(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let fa = f(a);
    if fa == 0.0 {
        return Ok(a);
    }
    let fb = f(b);
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa * fb < 0.0) {
        return Err(Error::NoSignChange { lo: a, hi: b });
    }
    let neg_at_a = fa < 0.0;
    while b - a > 2.0 * tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm < 0.0) == neg_at_a {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrapolated {
    pub value: f64,
    pub error: f64,
}

/// Neville–Richardson extrapolation of samples (ε_k, v_k) to ε = 0.
pub fn extrapolate_to_zero(samples: &[(f64, f64)]) -> Result<Extrapolated> {
    let n = samples.len();
    if n < 3 {
        return Err(Error::TooFewSamples(n));
    }
    let x: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let mut p: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let mut prev = (p[0], p[1]);
    for m in 1..n {
        if m == n - 1 {
            prev = (p[0], p[1]);
        }
        for i in 0..n - m {
            p[i] = (x[i + m] * p[i] - x[i] * p[i + 1]) / (x[i + m] - x[i]);
        }
    }
    Ok(Extrapolated { value: p[0], error: (prev.0 - prev.1).abs() })
}

/// Roots of Σ a_j w^j (ascending coefficients, a_n ≠ 0): closed form up to
/// degree 2, Aberth–Ehrlich iteration above.
pub fn polynomial_roots(a: &[Complex64]) -> Vec<Complex64> {
    let n = a.len() - 1;
    assert!(n >= 1 && a[n].norm() > 0.0, "leading coefficient must be non-zero");
    match n {
        1 => return vec![-a[0] / a[1]],
        2 => {
            let disc = (a[1] * a[1] - 4.0 * a[2] * a[0]).sqrt();
            let q = if (a[1].conj() * disc).re >= 0.0 {
                -0.5 * (a[1] + disc)
            } else {
                -0.5 * (a[1] - disc)
            };
            if q.norm() == 0.0 {
                return vec![Complex64::new(0.0, 0.0); 2];
            }
            return vec![q / a[2], a[0] / q];
        }
        _ => {}
    }
    let eval = |z: Complex64| {
        let mut p = a[n];
        let mut dp = Complex64::new(0.0, 0.0);
        for j in (0..n).rev() {
            dp = dp * z + p;
            p = p * z + a[j];
        }
        (p, dp)
    };
    let radius = (a[0].norm() / a[n].norm()).powf(1.0 / n as f64).max(1e-3);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4))
        .collect();
    for _ in 0..500 {
        let mut worst: f64 = 0.0;
        for k in 0..n {
            let (p, dp) = eval(z[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let s: Complex64 = (0..n).filter(|&j| j != k).map(|j| 1.0 / (z[k] - z[j])).sum();
            let w = ratio / (1.0 - ratio * s);
            z[k] -= w;
            worst = worst.max(w.norm() / z[k].norm().max(1e-300));
        }
        if worst < 1e-15 {
            break;
        }
    }
    for zk in z.iter_mut() {
        for _ in 0..2 {
            let (p, dp) = eval(*zk);
            if dp.norm() > 0.0 {
                *zk -= p / dp;
            }
        }
    }
    z
}
