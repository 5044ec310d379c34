use std::io::BufReader;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Value};
use surfdos::appendix::appendix_check;
use surfdos::constant_surface::{asymptote_fit, theorem3_constant};
use surfdos::disorder::DisorderSpec;
use surfdos::fluctuation::{
    count_identity_check, default_lifshitz_window, lifshitz_fit, reduced_ids, reduced_symbol, BoxOperator,
    ReducedSymbol,
};
use surfdos::idss::{estimate_idss, CurveKind, DosCurve};
use surfdos::newton::{
    lifshitz_exponent, minimized_exponent, rational_string, taylor_coefficients, FamilySpec, NewtonPolygon,
    NewtonReport,
};
use surfdos::surface::{classify_edge, LowerEdge};
use surfdos::symbol::SymbolCoefficients;
use surfdos::Error;

use crate::config::{log_spaced, Loaded};

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numeric(Error),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numeric(_) => 3,
            Failure::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Numeric(e) => write!(f, "numerical error: {e}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Numeric(e)
    }
}

/// What a command produced: the main artifact, side files and a one-line
/// summary for stderr.
pub struct Outcome {
    pub body: String,
    pub side: Vec<(PathBuf, String)>,
    pub summary: String,
}

#[derive(Serialize)]
struct Meta<'a> {
    command: &'a str,
    config_sha256: &'a str,
    seed: u64,
    surfdos: &'static str,
    surfdos_cli: &'static str,
}

fn meta<'a>(cmd: &'a str, ld: &'a Loaded) -> Meta<'a> {
    Meta {
        command: cmd,
        config_sha256: &ld.sha256,
        seed: ld.cfg.seed,
        surfdos: surfdos::VERSION,
        surfdos_cli: env!("CARGO_PKG_VERSION"),
    }
}

fn json_body(cmd: &str, ld: &Loaded, report: impl Serialize) -> String {
    let mut v = serde_json::to_value(report).expect("reports serialize");
    if let Value::Object(m) = &mut v {
        m.insert("meta".into(), serde_json::to_value(meta(cmd, ld)).expect("meta serializes"));
    }
    let mut s = serde_json::to_string_pretty(&v).expect("json");
    s.push('\n');
    s
}

fn csv_body(cmd: &str, ld: &Loaded, curve: &DosCurve) -> String {
    let m = meta(cmd, ld);
    let mut buf = Vec::new();
    curve
        .write_csv(
            &mut buf,
            &[
                ("command", m.command.to_string()),
                ("config_sha256", m.config_sha256.to_string()),
                ("surfdos", m.surfdos.to_string()),
                ("surfdos_cli", m.surfdos_cli.to_string()),
            ],
        )
        .expect("writing to memory");
    String::from_utf8(buf).expect("csv is ascii")
}

fn inputs(ld: &Loaded) -> Result<(SymbolCoefficients, DisorderSpec), Failure> {
    Ok((ld.symbol().map_err(Failure::Config)?, ld.disorder().map_err(Failure::Config)?))
}

fn surface_curve(ld: &Loaded, sym: &SymbolCoefficients, dis: &DisorderSpec) -> Result<DosCurve, Failure> {
    if ld.cfg.run.curve == CurveKind::Ids {
        return Err(Failure::Config("run.curve = \"ids\" is not a surface curve".into()));
    }
    let energies = ld.energies().map_err(Failure::Config)?;
    Ok(estimate_idss(sym, dis, &energies, &ld.idss_params())?)
}

fn value_range(c: &DosCurve) -> (f64, f64) {
    c.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
}

pub fn classify(ld: &Loaded) -> Result<Outcome, Failure> {
    let (sym, dis) = inputs(ld)?;
    let c = classify_edge(&sym, &dis)?;
    let summary = match c.lower_edge {
        LowerEdge::Stable => "classify: lower edge 0 is stable".to_string(),
        LowerEdge::Fluctuating { e0 } => format!("classify: fluctuating lower edge, E0 = {e0}"),
    };
    Ok(Outcome { body: json_body("classify", ld, c), side: vec![], summary })
}

pub fn idss(ld: &Loaded) -> Result<Outcome, Failure> {
    let (sym, dis) = inputs(ld)?;
    let curve = surface_curve(ld, &sym, &dis)?;
    let (lo, hi) = value_range(&curve);
    let summary = format!(
        "idss: {} energies, N={}, M={}, {} in [{lo:e}, {hi:e}]",
        curve.len(),
        curve.meta.n_half,
        curve.meta.realizations,
        curve.meta.kind
    );
    Ok(Outcome { body: csv_body("idss", ld, &curve), side: vec![], summary })
}

pub fn const_asym(ld: &Loaded, curve_out: Option<PathBuf>) -> Result<Outcome, Failure> {
    let (sym, dis) = inputs(ld)?;
    let a = &ld.cfg.asymptotics;
    // the constant law at ω̄; d2 ≤ 2 laws do not depend on it
    let law = theorem3_constant(&sym, dis.omega_bar())?;
    let edge = classify_edge(&sym, &dis)?;
    if let LowerEdge::Fluctuating { .. } = edge.lower_edge {
        return Err(Error::NotStable(edge.criterion_value.unwrap_or(f64::NEG_INFINITY)).into());
    }
    let curve = surface_curve(ld, &sym, &dis)?;
    let window = match a.window {
        Some([lo, hi]) => (lo, hi),
        None => (curve.energies[0], *curve.energies.last().expect("non-empty grid")),
    };
    let (pref, expo) = law.power_law();
    let degenerate = dis.omega_minus() == 0.0 && dis.omega_plus() == 0.0;
    let (fit, verdict) = if degenerate {
        (None, "skip")
    } else {
        let fit = asymptote_fit(&curve, Some(&law), window)?;
        let ok = (fit.exponent_hat - expo).abs() <= a.exponent_tol
            && (fit.prefactor_hat / pref - 1.0).abs() <= a.prefactor_tol;
        (Some(fit), if ok { "pass" } else { "fail" })
    };
    let summary = match &fit {
        Some(f) => format!(
            "const-asym: exponent {:.4} (law {expo}), prefactor {:.6} (law {pref:.6}) -> {verdict}",
            f.exponent_hat, f.prefactor_hat
        ),
        None => "const-asym: zero potential, curve vanishes -> skip".to_string(),
    };
    let report = json!({
        "law": law,
        "expected": { "prefactor": pref, "exponent": expo },
        "window": [window.0, window.1],
        "fit": fit,
        "tolerances": { "exponent": a.exponent_tol, "prefactor_relative": a.prefactor_tol },
        "verdict": verdict,
    });
    let side = curve_out.map(|p| (p, csv_body("const-asym", ld, &curve))).into_iter().collect();
    Ok(Outcome { body: json_body("const-asym", ld, report), side, summary })
}

/// E₀ from the config override or from the edge classification.
fn edge_energy(ld: &Loaded, given: Option<f64>) -> Result<f64, Failure> {
    if let Some(e0) = given {
        return Ok(e0);
    }
    let (sym, dis) = inputs(ld)?;
    let c = classify_edge(&sym, &dis)?;
    match c.lower_edge {
        LowerEdge::Fluctuating { e0 } => Ok(e0),
        LowerEdge::Stable => Err(Error::NotFluctuating(c.criterion_value.unwrap_or(1.0)).into()),
    }
}

fn reduced(ld: &Loaded, e0: f64, grid: usize) -> Result<ReducedSymbol, Failure> {
    Ok(reduced_symbol(&ld.symbol().map_err(Failure::Config)?, e0, grid)?)
}

pub fn lifshitz(ld: &Loaded, curve_out: Option<PathBuf>) -> Result<Outcome, Failure> {
    let c = &ld.cfg.lifshitz;
    let e0 = edge_energy(ld, c.e0)?;
    let (lo, hi) = match c.offsets {
        Some([a, b]) => (e0 + a, e0 + b),
        None => default_lifshitz_window(e0),
    };
    let mut red = None;
    let curve = match &c.curve {
        Some(p) => {
            let path = ld.dir.join(p);
            let f = std::fs::File::open(&path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            DosCurve::read_csv(BufReader::new(f)).map_err(|e| Failure::Config(e.to_string()))?
        }
        None => {
            let dis = ld.disorder().map_err(Failure::Config)?;
            let r = reduced(ld, e0, c.grid)?;
            let energies: Vec<f64> =
                log_spaced(lo - e0, hi - e0, c.points).map_err(Failure::Config)?.iter().map(|x| e0 + x).collect();
            let curve =
                reduced_ids(&r, &dis, &energies, c.l.unwrap_or(ld.cfg.run.l), c.m.unwrap_or(ld.cfg.run.m), ld.cfg.seed)?;
            red = Some(r);
            curve
        }
    };
    let fit = lifshitz_fit(&curve, e0, (lo, hi))?;
    let newton = match &red {
        Some(r) if r.d1() == 2 => Some(match lifshitz_exponent(r, c.scan_grid, &FamilySpec::default()) {
            Ok(l) => json!({
                "alpha": rational_string(&l.alpha),
                "witnesses": l.witnesses.iter().map(|(p, a)| json!({"theta": p, "alpha": rational_string(a)})).collect::<Vec<_>>(),
                "family_used": FamilySpec::default().to_string(),
            }),
            Err(e) => json!({ "error": e.to_string() }),
        }),
        _ => None,
    };
    let summary = format!(
        "lifshitz: E0 = {e0}, double-log exponent {:.4} over {} points (limit law -d1/2)",
        fit.exponent_hat,
        fit.per_point.len()
    );
    let report = json!({
        "E0": e0,
        "window": [lo, hi],
        "exponent_hat": fit.exponent_hat,
        "slope": fit.slope,
        "r2": fit.r2,
        "per_point": fit.per_point,
        "newton_alpha": newton,
    });
    let side = curve_out.map(|p| (p, csv_body("lifshitz", ld, &curve))).into_iter().collect();
    Ok(Outcome { body: json_body("lifshitz", ld, report), side, summary })
}

pub fn newton(ld: &Loaded) -> Result<Outcome, Failure> {
    let c = &ld.cfg.newton;
    let family = FamilySpec { k_max: c.k_max, max_length: c.max_length };
    let e0 = edge_energy(ld, c.e0)?;
    let red = reduced(ld, e0, c.grid)?;
    let centers: Vec<[f64; 2]> = match c.theta0 {
        Some(t) => vec![t],
        None => lifshitz_exponent(&red, c.scan_grid, &family)?.witnesses.into_iter().map(|w| w.0).collect(),
    };
    let mut points = Vec::new();
    let mut alpha = None;
    for t0 in centers {
        let t = taylor_coefficients(&red, t0, c.max_order, c.zero_threshold)?;
        let poly = NewtonPolygon::from_taylor(&t)?;
        let m = minimized_exponent(&red, t0, &family)?;
        alpha = Some(match alpha {
            Some(a) if a < m.alpha => a,
            _ => m.alpha,
        });
        points.push(NewtonReport::new(&t, &poly, &m, &family));
    }
    let alpha = alpha.map(|a| rational_string(&a)).unwrap_or_default();
    let summary = format!("newton: E0 = {e0}, alpha = {alpha} over {} point(s)", points.len());
    let report = json!({ "E0": e0, "alpha": alpha, "points": points });
    Ok(Outcome { body: json_body("newton", ld, report), side: vec![], summary })
}

pub fn prop_w1(ld: &Loaded) -> Result<Outcome, Failure> {
    let (sym, dis) = inputs(ld)?;
    let c = &ld.cfg.prop_w1;
    let seed = ld.cfg.seed;
    let mut checks = Vec::new();
    for b in 0..c.boxes {
        let bx = BoxOperator::random(&sym, c.l, &dis, seed, b as u64)?;
        for &e in &c.energies {
            let r = count_identity_check(&bx, e)?;
            checks.push(json!({ "box": b, "E": e, "lhs": r.lhs, "rhs": r.rhs, "equal": r.equal, "seed": seed }));
        }
    }
    let failures = checks.iter().filter(|v| v["equal"] == false).count();
    let summary = format!("prop-w1-check: {} comparisons, {failures} mismatches", checks.len());
    let report = json!({ "L": c.l, "checks": checks, "failures": failures });
    Ok(Outcome { body: json_body("prop-w1-check", ld, report), side: vec![], summary })
}

pub fn appendix(ld: &Loaded) -> Result<Outcome, Failure> {
    let c = &ld.cfg.appendix;
    let d = c.g.len();
    if d < 2 || c.g.iter().any(|r| r.len() != d) {
        return Err(Failure::Config("appendix.g must be a square matrix of size >= 2".into()));
    }
    let r = appendix_check(&c.g, c.energy, c.n_max)?;
    let summary = format!(
        "appendix-check: min coefficient {:e} at {:?}, J variation {:e}",
        r.min_coefficient, r.min_index, r.j_variation
    );
    Ok(Outcome { body: json_body("appendix-check", ld, r), side: vec![], summary })
}
