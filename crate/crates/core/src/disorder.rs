use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Single-site law P₀ of the surface potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisorderKind {
    Constant { t: f64 },
    Uniform { a: f64, b: f64 },
    TwoPoint { v0: f64, v1: f64, p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    kind: DisorderKind,
    /// k in P₀([ω₋, ω₋ + ε]) ≍ ε^k; recorded, not used numerically.
    h3_exponent: u32,
}

impl DisorderSpec {
    pub fn constant(t: f64) -> Self {
        Self { kind: DisorderKind::Constant { t }, h3_exponent: 0 }
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidDistribution(format!("uniform needs a < b, got [{a}, {b}]")));
        }
        Ok(Self { kind: DisorderKind::Uniform { a, b }, h3_exponent: 1 })
    }

    pub fn two_point(v0: f64, v1: f64, p: f64) -> Result<Self> {
        if v0 == v1 || !(p > 0.0 && p < 1.0) || !v0.is_finite() || !v1.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "two-point needs v0 != v1 and 0 < p < 1, got ({v0}, {v1}, {p})"
            )));
        }
        Ok(Self { kind: DisorderKind::TwoPoint { v0, v1, p }, h3_exponent: 0 })
    }

    pub fn from_kind(kind: DisorderKind) -> Result<Self> {
        match kind {
            DisorderKind::Constant { t } => Ok(Self::constant(t)),
            DisorderKind::Uniform { a, b } => Self::uniform(a, b),
            DisorderKind::TwoPoint { v0, v1, p } => Self::two_point(v0, v1, p),
        }
    }

    pub fn kind(&self) -> DisorderKind {
        self.kind
    }

    pub fn h3_exponent(&self) -> u32 {
        self.h3_exponent
    }

    pub fn omega_minus(&self) -> f64 {
        match self.kind {
            DisorderKind::Constant { t } => t,
            DisorderKind::Uniform { a, .. } => a,
            DisorderKind::TwoPoint { v0, v1, .. } => v0.min(v1),
        }
    }

    pub fn omega_plus(&self) -> f64 {
        match self.kind {
            DisorderKind::Constant { t } => t,
            DisorderKind::Uniform { b, .. } => b,
            DisorderKind::TwoPoint { v0, v1, .. } => v0.max(v1),
        }
    }

    pub fn omega_bar(&self) -> f64 {
        match self.kind {
            DisorderKind::Constant { t } => t,
            DisorderKind::Uniform { a, b } => 0.5 * (a + b),
            DisorderKind::TwoPoint { v0, v1, p } => (1.0 - p) * v0 + p * v1,
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self.kind {
            DisorderKind::Constant { t } => Some(t),
            _ => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            DisorderKind::Constant { t } => t,
            DisorderKind::Uniform { a, b } => a + (b - a) * rng.random::<f64>(),
            DisorderKind::TwoPoint { v0, v1, p } => {
                if rng.random::<f64>() < p {
                    v1
                } else {
                    v0
                }
            }
        }
    }

    pub fn sample_n(&self, n: usize, seed: u64, realization: u64) -> Vec<f64> {
        let mut rng = realization_rng(seed, realization);
        (0..n).map(|_| self.sample(&mut rng)).collect()
    }
}

/// Independent stream per realization index: results do not depend on
/// which worker draws which realization.
pub fn realization_rng(seed: u64, realization: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(realization);
    rng
}
