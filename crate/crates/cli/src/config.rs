use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};
use surfdos::disorder::{DisorderKind, DisorderSpec};
use surfdos::idss::{CurveKind, IdssParams, Reference};
use surfdos::symbol::{apply_lattice_transform, make_free_laplacian, LatticeDims, SymbolCoefficients};

/// One experiment per file. Every knob has an explicit default and the seed
/// defaults to 0, so a config fully determines its outputs.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub symbol: Option<SymbolSection>,
    pub disorder: Option<DisorderKind>,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub asymptotics: AsymSection,
    #[serde(default)]
    pub lifshitz: LifshitzSection,
    #[serde(default)]
    pub newton: NewtonSection,
    #[serde(default)]
    pub prop_w1: PropW1Section,
    #[serde(default)]
    pub appendix: AppendixSection,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SymbolSection {
    Free { d1: usize, d2: usize },
    Separable { d1: usize, d2: usize, weights: Vec<f64> },
    /// `γ_1 … γ_d re im` lines; path relative to the config file
    Coefficients { d1: usize, d2: usize, file: PathBuf },
    /// free Laplacian composed with the unimodular G
    Transform { d1: usize, d2: usize, g: Vec<Vec<i64>> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "spacing", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnergyGrid {
    Linear { lo: f64, hi: f64, count: usize },
    Log { lo: f64, hi: f64, count: usize },
    List { values: Vec<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub n: usize,
    pub l: usize,
    pub m: usize,
    pub bz_grid: usize,
    pub reference: Reference,
    pub curve: CurveKind,
    pub energies: Option<EnergyGrid>,
    pub output: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            n: 20,
            l: 4,
            m: 8,
            bz_grid: 1,
            reference: Reference::Free,
            curve: CurveKind::IntegratedShift,
            energies: None,
            output: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymSection {
    /// fit window; the whole energy grid when absent
    pub window: Option<[f64; 2]>,
    pub exponent_tol: f64,
    pub prefactor_tol: f64,
}

impl Default for AsymSection {
    fn default() -> Self {
        Self { window: None, exponent_tol: 0.05, prefactor_tol: 0.15 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LifshitzSection {
    /// skips the edge search when set
    pub e0: Option<f64>,
    /// θ₁ quadrature grid of the reduced symbol
    pub grid: usize,
    /// E − E₀ range, log spaced; default [1e-2, 3e-1]·|E₀|
    pub offsets: Option<[f64; 2]>,
    pub points: usize,
    pub l: Option<usize>,
    pub m: Option<usize>,
    pub scan_grid: usize,
    /// fit a precomputed curve instead of sampling one
    pub curve: Option<PathBuf>,
}

impl Default for LifshitzSection {
    fn default() -> Self {
        Self { e0: None, grid: 64, offsets: None, points: 12, l: None, m: None, scan_grid: 32, curve: None }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonSection {
    pub e0: Option<f64>,
    pub grid: usize,
    /// expansion point; the located zero set when absent
    pub theta0: Option<[f64; 2]>,
    pub max_order: u32,
    pub zero_threshold: f64,
    pub k_max: i64,
    pub max_length: usize,
    pub scan_grid: usize,
}

impl Default for NewtonSection {
    fn default() -> Self {
        Self {
            e0: None,
            grid: 32,
            theta0: None,
            max_order: 4,
            zero_threshold: surfdos::newton::DEFAULT_ZERO_THRESHOLD,
            k_max: 3,
            max_length: 2,
            scan_grid: 32,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropW1Section {
    pub l: usize,
    pub boxes: usize,
    pub energies: Vec<f64>,
}

impl Default for PropW1Section {
    fn default() -> Self {
        Self { l: 3, boxes: 50, energies: vec![-0.5, -0.1] }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppendixSection {
    pub g: Vec<Vec<i64>>,
    pub energy: f64,
    pub n_max: usize,
}

impl Default for AppendixSection {
    fn default() -> Self {
        Self { g: vec![vec![1, 0], vec![0, 1]], energy: -1.0, n_max: 8 }
    }
}

/// A parsed config together with what is needed to reproduce it.
pub struct Loaded {
    pub cfg: ExperimentConfig,
    pub sha256: String,
    pub dir: PathBuf,
}

pub fn load(path: &Path) -> Result<Loaded, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| format!("{}: {e}", path.display()))?;
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| format!("{}: {e}", path.display()))?;
    let digest = Sha256::digest(&bytes);
    Ok(Loaded {
        cfg,
        sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
    })
}

impl Loaded {
    pub fn symbol(&self) -> Result<SymbolCoefficients, String> {
        let s = self.cfg.symbol.as_ref().ok_or("missing [symbol] section")?;
        let dims = |d1, d2| LatticeDims::new(d1, d2).map_err(|e| e.to_string());
        match s {
            SymbolSection::Free { d1, d2 } => Ok(make_free_laplacian(dims(*d1, *d2)?)),
            SymbolSection::Separable { d1, d2, weights } => {
                if weights.len() != d1 + d2 {
                    return Err(format!("separable symbol needs {} weights, got {}", d1 + d2, weights.len()));
                }
                SymbolCoefficients::separable(dims(*d1, *d2)?, weights).map_err(|e| e.to_string())
            }
            SymbolSection::Coefficients { d1, d2, file } => {
                let path = self.dir.join(file);
                let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                let (sym, warnings) =
                    SymbolCoefficients::from_coefficient_text(dims(*d1, *d2)?, &text).map_err(|e| e.to_string())?;
                for w in warnings {
                    eprintln!("warning: {w}");
                }
                Ok(sym)
            }
            SymbolSection::Transform { d1, d2, g } => {
                let d = d1 + d2;
                if g.len() != d || g.iter().any(|r| r.len() != d) {
                    return Err(format!("transform must be {d}x{d}"));
                }
                apply_lattice_transform(&make_free_laplacian(dims(*d1, *d2)?), g).map_err(|e| e.to_string())
            }
        }
    }

    pub fn disorder(&self) -> Result<DisorderSpec, String> {
        let k = self.cfg.disorder.ok_or("missing [disorder] section")?;
        DisorderSpec::from_kind(k).map_err(|e| e.to_string())
    }

    pub fn energies(&self) -> Result<Vec<f64>, String> {
        let g = self.cfg.run.energies.as_ref().ok_or("missing [run.energies]")?;
        g.values()
    }

    pub fn idss_params(&self) -> IdssParams {
        let r = &self.cfg.run;
        IdssParams::new(r.n, r.m, self.cfg.seed).reference(r.reference).kind(r.curve).bz_grid(r.bz_grid)
    }
}

impl EnergyGrid {
    pub fn values(&self) -> Result<Vec<f64>, String> {
        let v = match *self {
            EnergyGrid::Linear { lo, hi, count } => spaced(lo, hi, count)?,
            EnergyGrid::Log { lo, hi, count } => {
                if !(lo > 0.0) {
                    return Err("log spacing needs lo > 0".into());
                }
                spaced(lo.ln(), hi.ln(), count)?.into_iter().map(f64::exp).collect()
            }
            EnergyGrid::List { ref values } => values.clone(),
        };
        if v.is_empty() || v.windows(2).any(|w| !(w[0] < w[1])) || v.iter().any(|e| !e.is_finite()) {
            return Err("energy grid must be non-empty, finite and strictly increasing".into());
        }
        Ok(v)
    }
}

fn spaced(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>, String> {
    if count == 0 || (count > 1 && !(lo < hi)) {
        return Err(format!("bad grid [{lo}, {hi}] with {count} points"));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect())
}

pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>, String> {
    EnergyGrid::Log { lo, hi, count }.values()
}
