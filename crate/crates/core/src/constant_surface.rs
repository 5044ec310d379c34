//! Constant surface coupling t: Stieltjes transform of N_s^t, its boundary
//! phase, the inversion route to ∫₀^E dN_s^t, and the small-E laws.
//!
//! Energies are measured on the symbol's own scale; the laws assume the
//! global minimum of h is 0. The quadratic form Q in the constants is the
//! one with h(θ) ≈ ⟨Qθ, θ⟩ near the minimum, i.e. half the Hessian; this
//! is what the fiber-bottom expansion h₂(θ₁) ≈ ⟨(Q₁ − R*Q₂⁻¹R)θ₁, θ₁⟩
//! requires.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::idss::DosCurve;
use crate::numerics::{extrapolate_to_zero, gauss_legendre, integrate_torus, integrate_torus_shifted};
use crate::surface::{criterion, fiber_bound_state, green_residue, surface_integral_i, sup_i_infinity};
use crate::symbol::{fiber_max, fiber_min, find_global_minimum, SymbolCoefficients};

/// I(θ₁, z) off the real axis. The last θ₂ coordinate is done by residues;
/// any remaining ones by a rectangle rule doubled until stable.
pub fn green_complex(sym: &SymbolCoefficients, theta1: &[f64], z: Complex64) -> Complex64 {
    let outer = sym.dims().d2 - 1;
    if outer == 0 {
        return green_residue(sym, theta1, z, 1, 0.0);
    }
    let mut g = 32;
    let mut prev = green_residue(sym, theta1, z, g, 0.5);
    loop {
        g *= 2;
        let v = green_residue(sym, theta1, z, g, 0.5);
        if (v - prev).norm() <= 1e-8 * v.norm() || g.pow(outer as u32) >= 1 << 16 {
            return v;
        }
        prev = v;
    }
}

/// ∫_{T^{d1}} log(1 + t·I(θ₁, z)) dθ₁ (normalized measure, principal log).
pub fn stieltjes_transform(sym: &SymbolCoefficients, t: f64, z: Complex64, grid1: usize) -> Result<Complex64> {
    if z.im == 0.0 {
        return Err(Error::Dimension("stieltjes_transform needs Im z ≠ 0"));
    }
    if t == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let d1 = sym.dims().d1;
    let side = (t * z.im).signum();
    let r = integrate_torus(
        |th: &[f64]| {
            let w = 1.0 + t * green_complex(sym, th, z);
            // Im(1 + tI) keeps the sign of t·Im z; a flip means the log
            // branch cut was crossed numerically
            if w.im * side < 0.0 && w.re < 0.0 {
                Complex64::new(f64::NAN, 0.0)
            } else {
                w.ln()
            }
        },
        d1,
        grid1,
    )
    .map_err(|e| if e == Error::NonFinite { Error::BranchCrossing } else { e })?;
    Ok(r.value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsSchedule(pub Vec<f64>);

impl EpsSchedule {
    /// Geometric ε ladder: exact residues make tiny ε usable for d2 = 1.
    pub fn default_for(d2: usize) -> Self {
        if d2 == 1 {
            Self(vec![1e-8, 5e-9, 2.5e-9])
        } else {
            Self(vec![1e-2, 5e-3, 2.5e-3])
        }
    }
}

/// f(θ₁, e) = lim_{ε→0⁺} (1/π) Arg(1 + t·I(θ₁, e + iε)), clamped to [−1, 1].
pub fn boundary_phase(
    sym: &SymbolCoefficients,
    t: f64,
    theta1: &[f64],
    e: f64,
    eps: &EpsSchedule,
) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    let samples: Vec<(f64, f64)> = eps
        .0
        .iter()
        .map(|&ep| {
            let w = 1.0 + t * green_complex(sym, theta1, Complex64::new(e, ep));
            (ep, w.arg() / PI)
        })
        .collect();
    if samples.iter().any(|s| !s.1.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(extrapolate_to_zero(&samples)?.value.clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionGrids {
    /// Rectangle nodes per θ₁ axis.
    pub theta1: usize,
    /// Gauss–Legendre nodes in √(e − h₂) on each fiber band.
    pub gauss: usize,
    pub eps: EpsSchedule,
}

impl InversionGrids {
    pub fn default_for(sym: &SymbolCoefficients) -> Self {
        let dims = sym.dims();
        Self {
            theta1: match dims.d1 {
                1 => 8192,
                2 => 128,
                _ => 24,
            },
            gauss: 48,
            eps: EpsSchedule::default_for(dims.d2),
        }
    }
}

fn stability(sym: &SymbolCoefficients, t: f64) -> Result<()> {
    if t >= 0.0 {
        return Ok(());
    }
    let crit = criterion(sup_i_infinity(sym, 32)?, t);
    if crit < 0.0 {
        return Err(Error::NotStable(crit));
    }
    Ok(())
}

/// Level above the fiber band where 1 + t·I = 0 (t > 0), via the mirrored
/// symbol: I(θ₁, e) = −I'(θ₁, M − e) with h' = M − h.
fn bound_state_above(sym: &SymbolCoefficients, t: f64, theta1: &[f64], hmax: f64) -> Option<f64> {
    let mirror = sym.mirrored(hmax);
    fiber_bound_state(&mirror, -t, theta1).map(|e| hmax - e)
}

/// ∫₀^E dN_s^t: per θ₁, the band part ∫ f de with e = h₂ + s² and
/// Gauss–Legendre in s, plus the rank-one levels that leave the band
/// (above it for t > 0, below it for t < 0), which count with weight ∓1.
pub fn idss_via_inversion(sym: &SymbolCoefficients, t: f64, e: f64, grids: &InversionGrids) -> Result<f64> {
    if t == 0.0 || e <= 0.0 {
        return Ok(0.0);
    }
    stability(sym, t)?;
    let d1 = sym.dims().d1;
    let (x, w) = gauss_legendre(grids.gauss);
    let r = integrate_torus_shifted(
        |th: &[f64]| -> f64 {
            let h2 = fiber_min(sym, th);
            if h2 >= e && t > 0.0 {
                return 0.0;
            }
            let hmax = fiber_max(sym, th);
            let mut acc = 0.0;
            let (a, b) = (h2.max(0.0), e.min(hmax));
            if b > a {
                let (s0, s1) = ((a - h2).sqrt(), (b - h2).sqrt());
                let half = 0.5 * (s1 - s0);
                for (xi, wi) in x.iter().zip(&w) {
                    let s = s0 + half * (xi + 1.0);
                    let f = boundary_phase(sym, t, th, h2 + s * s, &grids.eps).unwrap_or(f64::NAN);
                    acc += wi * half * f * 2.0 * s;
                }
            }
            if t > 0.0 && e > hmax {
                if let Some(eb) = bound_state_above(sym, t, th, hmax) {
                    acc += (e.min(eb) - hmax.max(0.0)).max(0.0);
                }
            }
            if t < 0.0 {
                if let Some(eb) = fiber_bound_state(sym, t, th) {
                    acc -= (e.min(h2) - eb.max(0.0)).max(0.0);
                }
            }
            acc
        },
        d1,
        grids.theta1,
        0.5,
    )?;
    Ok(r.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LawCase {
    D2_1,
    D2_2,
    D2Ge3Nonresonant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawIngredients {
    /// det(Q₁ − R*Q₂⁻¹R) with Q = Hessian/2.
    pub det_block: f64,
    pub det_q: f64,
    /// I at (θ₁*, min h), d2 ≥ 3 only.
    pub i00: Option<f64>,
    pub c_d1_d2: Option<f64>,
    pub s_exponent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticLaw {
    pub case: LawCase,
    pub d1: usize,
    pub d2: usize,
    pub prefactor: f64,
    pub ingredients: LawIngredients,
}

impl AsymptoticLaw {
    /// Shape f(E): E^{1+d1/2}, E^{1+d1/2}/|log E| or s(E)·E^{1+d1/2}.
    pub fn shape(&self, e: f64) -> f64 {
        let base = e.powf(1.0 + self.d1 as f64 / 2.0);
        match self.case {
            LawCase::D2_1 => base,
            LawCase::D2_2 => base / e.ln().abs(),
            LawCase::D2Ge3Nonresonant => 0.5 * e.abs().powf((self.d2 as f64 - 2.0) / 2.0) * base,
        }
    }

    pub fn predict(&self, e: f64) -> f64 {
        self.prefactor * self.shape(e)
    }

    /// (C′, p) with C·f(E) = C′·E^p (for D2_2 after removing 1/|log E|).
    pub fn power_law(&self) -> (f64, f64) {
        let p = 1.0 + self.d1 as f64 / 2.0;
        match self.case {
            LawCase::D2_1 | LawCase::D2_2 => (self.prefactor, p),
            LawCase::D2Ge3Nonresonant => (0.5 * self.prefactor, p + (self.d2 as f64 - 2.0) / 2.0),
        }
    }
}

/// Vol(S^{n−1}) = 2π^{n/2}/Γ(n/2) by the two-step recursion.
pub fn sphere_volume(n: usize) -> f64 {
    match n {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI / (n as f64 - 2.0) * sphere_volume(n - 2),
    }
}

/// c(d1, d2) = ∫₀¹ r^{d1−1}(1 − r²)^{(d2−2)/2} dr, computed as
/// ∫₀^{π/2} sin^{d1−1}φ cos^{d2−1}φ dφ (smooth integrand).
pub fn c_d1_d2(d1: usize, d2: usize) -> f64 {
    let (x, w) = gauss_legendre(64);
    let h = PI / 4.0;
    x.iter()
        .zip(&w)
        .map(|(xi, wi)| {
            let p = h * (xi + 1.0);
            wi * h * p.sin().powi(d1 as i32 - 1) * p.cos().powi(d2 as i32 - 1)
        })
        .sum()
}

pub fn theorem3_constant(sym: &SymbolCoefficients, t: f64) -> Result<AsymptoticLaw> {
    let dims = sym.dims();
    let (d1, d2) = (dims.d1, dims.d2);
    if d2 <= 2 {
        stability(sym, t)?;
    }
    let min = find_global_minimum(sym, 16, 1e-12)?;
    let q = 0.5 * &min.hessian;
    let det_q = q.determinant();
    let det_block = (0.5 * min.schur_block()).determinant();
    let two_pi = 2.0 * PI;
    let base = sphere_volume(d1) / (d1 as f64 * (d1 as f64 + 2.0) * two_pi.powi(d1 as i32) * det_block.sqrt());
    let law = |case, prefactor, i00, c, s| AsymptoticLaw {
        case,
        d1,
        d2,
        prefactor,
        ingredients: LawIngredients { det_block, det_q, i00, c_d1_d2: c, s_exponent: s },
    };
    match d2 {
        1 => Ok(law(LawCase::D2_1, base, None, None, None)),
        2 => Ok(law(LawCase::D2_2, 2.0 * base, None, None, None)),
        _ => {
            let th1 = min.theta1_star().to_vec();
            let i00 = surface_integral_i(sym, &th1, Complex64::new(min.value, 0.0), 64)?.value.re;
            let denom = 1.0 + t * i00;
            if denom.abs() < 1e-9 {
                return Err(Error::BorderlineCase(denom));
            }
            stability(sym, t)?;
            if denom < 0.0 {
                return Err(Error::NotStable(denom));
            }
            let c = c_d1_d2(d1, d2);
            let d = (d1 + d2) as f64;
            let pref = c * sphere_volume(d2) * sphere_volume(d1)
                / (d * two_pi.powi((d1 + d2) as i32) * det_q.sqrt())
                * t
                / denom;
            Ok(law(LawCase::D2Ge3Nonresonant, pref, Some(i00), Some(c), Some((d2 as f64 - 2.0) / 2.0)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub prefactor_hat: f64,
    pub exponent_hat: f64,
    pub r2: f64,
    pub points: usize,
}

/// Least squares of log value on log E over the window (values > 0 only);
/// in the D2_2 case the 1/|log E| factor is divided out first.
pub fn asymptote_fit(curve: &DosCurve, law: Option<&AsymptoticLaw>, window: (f64, f64)) -> Result<FitResult> {
    let pts: Vec<(f64, f64)> = curve
        .energies
        .iter()
        .zip(&curve.values)
        .filter(|(e, v)| **e >= window.0 && **e <= window.1 && **v > 0.0 && **e > 0.0)
        .map(|(&e, &v)| {
            let v = match law.map(|l| l.case) {
                Some(LawCase::D2_2) => v * e.ln().abs(),
                _ => v,
            };
            (e.ln(), v.ln())
        })
        .collect();
    if pts.len() < 5 {
        return Err(Error::InsufficientData(pts.len()));
    }
    let (slope, intercept, r2) = linear_fit(&pts);
    Ok(FitResult { prefactor_hat: intercept.exp(), exponent_hat: slope, r2, points: pts.len() })
}

/// (slope, intercept, r²) of ordinary least squares.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}
