//! Newton-polygon exponents of a two-dimensional reduced symbol: Taylor
//! data at a zero, exterior convex hull (exact rationals), decay exponent,
//! a finite shear-family minimum and the overall Lifshitz exponent α.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use num_rational::Rational64;
use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fluctuation::ReducedSymbol;
use crate::par;

pub const DEFAULT_ZERO_THRESHOLD: f64 = 1e-7;
const ZERO_SET_TOL: f64 = 1e-8;
const STEPS: [f64; 3] = [0.2, 0.1, 0.05];

/// A real function on T² with a known floor (its minimum).
pub trait PlaneSymbol: Sync {
    fn value_at(&self, theta: [f64; 2]) -> f64;
    fn floor(&self) -> f64;
    /// Absolute evaluation noise, used to decide which orders are resolvable.
    fn noise(&self) -> f64 {
        1e-15
    }
}

impl PlaneSymbol for ReducedSymbol {
    fn value_at(&self, theta: [f64; 2]) -> f64 {
        self.eval(&theta).unwrap_or(f64::NAN)
    }

    fn floor(&self) -> f64 {
        self.min_value()
    }

    fn noise(&self) -> f64 {
        1e-14 * self.min_value().abs().max(1.0)
    }
}

/// Closure-backed symbol (tests, constructed examples).
pub struct FnSymbol<F> {
    pub f: F,
    pub floor: f64,
}

impl<F: Fn([f64; 2]) -> f64 + Sync> PlaneSymbol for FnSymbol<F> {
    fn value_at(&self, theta: [f64; 2]) -> f64 {
        (self.f)(theta)
    }

    fn floor(&self) -> f64 {
        self.floor
    }
}

/// h(θ₀ + Tφ) as a function of φ.
struct Sheared<'a, S: ?Sized> {
    base: &'a S,
    center: [f64; 2],
    t: [[i64; 2]; 2],
}

impl<S: PlaneSymbol + ?Sized> PlaneSymbol for Sheared<'_, S> {
    fn value_at(&self, p: [f64; 2]) -> f64 {
        let t = &self.t;
        self.base.value_at([
            self.center[0] + t[0][0] as f64 * p[0] + t[0][1] as f64 * p[1],
            self.center[1] + t[1][0] as f64 * p[0] + t[1][1] as f64 * p[1],
        ])
    }

    fn floor(&self) -> f64 {
        self.base.floor()
    }

    fn noise(&self) -> f64 {
        self.base.noise()
    }
}

pub fn require_plane(red: &ReducedSymbol) -> Result<()> {
    if red.d1() != 2 {
        return Err(Error::Dimension("d1 = 2 for Newton polygons"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaylorGrid {
    pub center: [f64; 2],
    /// retained coefficients of θ₁^i θ₂^j
    pub coeffs: BTreeMap<(u32, u32), f64>,
    pub max_order: u32,
    pub dropped: Vec<((u32, u32), f64)>,
}

impl TaylorGrid {
    pub fn support(&self) -> Vec<(u32, u32)> {
        self.coeffs.keys().copied().collect()
    }

    pub fn rational(&self, key: (u32, u32)) -> Option<Rational64> {
        self.coeffs.get(&key).and_then(|&v| Rational64::approximate_float(v))
    }
}

/// Central-difference weights for the n-th derivative on offsets −p..=p.
fn stencil(n: usize, p: usize) -> Vec<f64> {
    let m = 2 * p + 1;
    let mut a = nalgebra::DMatrix::<f64>::zeros(m, m);
    for (col, k) in (-(p as i64)..=p as i64).enumerate() {
        let mut pw = 1.0;
        for row in 0..m {
            a[(row, col)] = pw;
            pw *= k as f64;
        }
    }
    let mut rhs = nalgebra::DVector::<f64>::zeros(m);
    rhs[n] = (1..=n).map(|x| x as f64).product();
    a.lu().solve(&rhs).expect("Vandermonde on distinct nodes").iter().copied().collect()
}

/// Leading error order of the central (2p+1)-point n-th derivative stencil.
fn accuracy(n: usize, p: usize) -> i32 {
    (2 * p + 2 - n - n % 2) as i32
}

/// Richardson table on step halvings with error orders q, q+2, ….
fn richardson(ests: &[f64], q: i32) -> f64 {
    let mut t = ests.to_vec();
    for m in 1..t.len() {
        let f = 2f64.powi(q + 2 * (m as i32 - 1));
        for k in (m..t.len()).rev() {
            t[k] = t[k] + (t[k] - t[k - 1]) / (f - 1.0);
        }
    }
    t[t.len() - 1]
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Taylor coefficients of h(θ₀ + φ) − h(θ₀) up to total degree `max_order`.
pub fn taylor_coefficients_of<S: PlaneSymbol + ?Sized>(
    sym: &S,
    theta0: [f64; 2],
    max_order: u32,
    zero_threshold: f64,
) -> Result<TaylorGrid> {
    let v0 = sym.value_at(theta0);
    if !v0.is_finite() {
        return Err(Error::NonFinite);
    }
    if v0 - sym.floor() > ZERO_SET_TOL {
        return Err(Error::NotOnZeroSet(v0 - sym.floor()));
    }
    let p = max_order as usize / 2 + 1;
    let w = 2 * p + 1;
    // full-width stencils: error starts at h^(2p+2−n), Neville removes two more orders
    let stencils: Vec<Vec<f64>> = (0..=max_order as usize).map(|n| stencil(n, p)).collect();
    let levels: Vec<Vec<f64>> = STEPS
        .iter()
        .map(|&h| {
            let mut g = vec![0.0; w * w];
            for a in 0..w {
                for b in 0..w {
                    let off = [(a as f64 - p as f64) * h, (b as f64 - p as f64) * h];
                    g[a * w + b] = sym.value_at([theta0[0] + off[0], theta0[1] + off[1]]) - v0;
                }
            }
            g
        })
        .collect();
    if levels.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let fmax = levels.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(v0.abs());
    let mut raw = BTreeMap::new();
    let mut noise = vec![0.0f64; max_order as usize + 1];
    for i in 0..=max_order {
        for j in 0..=(max_order - i) {
            if i + j == 0 {
                continue;
            }
            let (si, sj) = (&stencils[i as usize], &stencils[j as usize]);
            let ests: Vec<f64> = levels
                .iter()
                .zip(STEPS)
                .map(|(g, h)| {
                    let mut s = 0.0;
                    for a in 0..w {
                        for b in 0..w {
                            s += si[a] * sj[b] * g[a * w + b];
                        }
                    }
                    s / h.powi((i + j) as i32)
                })
                .collect();
            let order = accuracy(i as usize, p).min(accuracy(j as usize, p));
            let d = richardson(&ests, order);
            raw.insert((i, j), d / (factorial(i) * factorial(j)));
            let wsum: f64 = si.iter().map(|x| x.abs()).sum::<f64>() * sj.iter().map(|x| x.abs()).sum::<f64>();
            let hmin = STEPS[STEPS.len() - 1];
            // the Richardson table amplifies the finest level by ≈ 1.1
            let nz = 1.5 * (sym.noise() + 1e-16 * fmax) * wsum / hmin.powi((i + j) as i32)
                / (factorial(i) * factorial(j));
            let deg = (i + j) as usize;
            noise[deg] = noise[deg].max(nz);
        }
    }
    let global = raw.values().copied().fold(0.0f64, |m: f64, v: f64| m.max(v.abs()));
    let cut = zero_threshold * global;
    if let Some(deg) = (1..=max_order as usize).find(|&d| noise[d] > cut) {
        return Err(Error::OrderTooHigh(deg));
    }
    let (mut coeffs, mut dropped) = (BTreeMap::new(), Vec::new());
    for (k, v) in raw {
        if v.abs() < cut {
            if v != 0.0 {
                log::debug!("dropping Taylor coefficient {k:?} = {v:e}");
            }
            dropped.push((k, v));
        } else {
            coeffs.insert(k, v);
        }
    }
    Ok(TaylorGrid { center: theta0, coeffs, max_order, dropped })
}

pub fn taylor_coefficients(
    red: &ReducedSymbol,
    theta0: [f64; 2],
    max_order: u32,
    zero_threshold: f64,
) -> Result<TaylorGrid> {
    require_plane(red)?;
    taylor_coefficients_of(red, theta0, max_order, zero_threshold)
}

pub type Point = (Rational64, Rational64);

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonPolygon {
    pub support_points: Vec<Point>,
    pub hull_vertices: Vec<Point>,
    pub diagram_segments: Vec<(Point, Point)>,
    pub decay_exponent: Rational64,
}

fn cross(o: &Point, a: &Point, b: &Point) -> Rational64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Lower-left boundary of the union of the quadrants [x,∞)×[y,∞).
pub fn exterior_convex_hull(points: &[Point]) -> Result<NewtonPolygon> {
    if points.is_empty() {
        return Err(Error::EmptySupport);
    }
    if points.iter().any(|p| p.0.is_negative() || p.1.is_negative()) {
        return Err(Error::Dimension("non-negative support points"));
    }
    if points.iter().any(|p| p.0.is_zero() && p.1.is_zero()) {
        return Err(Error::Dimension("support without the origin"));
    }
    let mut sorted = points.to_vec();
    sorted.sort();
    sorted.dedup();
    // Pareto-minimal points: increasing i, strictly decreasing j
    let mut pareto: Vec<Point> = Vec::new();
    for p in sorted {
        if pareto.last().is_none_or(|q| p.1 < q.1) {
            pareto.push(p);
        }
    }
    let mut hull: Vec<Point> = Vec::new();
    for p in pareto {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], &p) <= Rational64::zero() {
            hull.pop();
        }
        hull.push(p);
    }
    let segments: Vec<(Point, Point)> = hull.windows(2).map(|w| (w[0], w[1])).collect();
    let mut poly = NewtonPolygon {
        support_points: points.to_vec(),
        hull_vertices: hull,
        diagram_segments: segments,
        decay_exponent: Rational64::zero(),
    };
    poly.decay_exponent = newton_decay_exponent(&poly);
    Ok(poly)
}

/// 1/max a over the boundary lines, each line meeting the diagonal at (a, a).
/// The vertical ray above the first vertex and the horizontal ray right of
/// the last are part of the boundary; for a single vertex they are all of it.
pub fn newton_decay_exponent(poly: &NewtonPolygon) -> Rational64 {
    let first = poly.hull_vertices[0];
    let last = *poly.hull_vertices.last().expect("non-empty hull");
    if poly.hull_vertices.len() == 1 {
        log::debug!("single-vertex Newton diagram at {first:?}; using the quadrant limit");
    }
    let mut a = first.0.max(last.1);
    for (p, q) in &poly.diagram_segments {
        let dx = q.0 - p.0;
        let dy = q.1 - p.1;
        let hit = (dy * p.0 - dx * p.1) / (dy - dx);
        a = a.max(hit);
    }
    a.recip()
}

impl NewtonPolygon {
    pub fn from_taylor(t: &TaylorGrid) -> Result<Self> {
        let pts: Vec<Point> = t
            .coeffs
            .keys()
            .map(|&(i, j)| (Rational64::from_integer(i as i64), Rational64::from_integer(j as i64)))
            .collect();
        exterior_convex_hull(&pts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FamilySpec {
    pub k_max: i64,
    pub max_length: usize,
}

impl Default for FamilySpec {
    fn default() -> Self {
        Self { k_max: 3, max_length: 2 }
    }
}

impl std::fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "integer shears |k|<={} products of length <={}", self.k_max, self.max_length)
    }
}

type Mat = [[i64; 2]; 2];
const IDENTITY: Mat = [[1, 0], [0, 1]];

fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let mut c = [[0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

impl FamilySpec {
    /// Identity first, then shear words, without repeats.
    pub fn members(&self) -> Vec<Mat> {
        let mut gens = Vec::new();
        for k in -self.k_max..=self.k_max {
            if k != 0 {
                gens.push([[1, k], [0, 1]]);
                gens.push([[1, 0], [k, 1]]);
            }
        }
        let mut out = vec![IDENTITY];
        let mut frontier = vec![IDENTITY];
        for _ in 0..self.max_length {
            let mut next = Vec::new();
            for m in &frontier {
                for g in &gens {
                    let p = mat_mul(m, g);
                    if !out.contains(&p) {
                        out.push(p);
                        next.push(p);
                    }
                }
            }
            frontier = next;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizedExponent {
    pub alpha: Rational64,
    pub transform: Mat,
    pub identity_alpha: Rational64,
}

pub fn minimized_exponent_of<S: PlaneSymbol + ?Sized>(
    sym: &S,
    theta0: [f64; 2],
    family: &FamilySpec,
    max_order: u32,
) -> Result<MinimizedExponent> {
    let members = family.members();
    let alphas: Vec<Result<Rational64>> = par::map_indexed(members.len(), |k| {
        let sh = Sheared { base: sym, center: theta0, t: members[k] };
        let t = taylor_coefficients_of(&sh, [0.0, 0.0], max_order, DEFAULT_ZERO_THRESHOLD)?;
        Ok(NewtonPolygon::from_taylor(&t)?.decay_exponent)
    });
    let mut best: Option<(Rational64, Mat)> = None;
    let mut identity_alpha = None;
    for (m, a) in members.iter().zip(alphas) {
        let a = a?;
        if *m == IDENTITY {
            identity_alpha = Some(a);
        }
        if best.is_none_or(|(b, _)| a < b) {
            best = Some((a, *m));
        }
    }
    let (alpha, transform) = best.expect("family contains the identity");
    Ok(MinimizedExponent { alpha, transform, identity_alpha: identity_alpha.expect("identity member") })
}

pub fn minimized_exponent(red: &ReducedSymbol, theta0: [f64; 2], family: &FamilySpec) -> Result<MinimizedExponent> {
    require_plane(red)?;
    minimized_exponent_of(red, theta0, family, 4)
}

fn wrap(t: f64) -> f64 {
    t.rem_euclid(2.0 * PI)
}

/// Gradient and Hessian by 5-point central differences.
fn derivatives<S: PlaneSymbol + ?Sized>(sym: &S, x: [f64; 2], h: f64) -> (Vector2<f64>, Matrix2<f64>) {
    let f = |a: f64, b: f64| sym.value_at([x[0] + a, x[1] + b]);
    let d1 = |e: [f64; 2]| {
        (-f(2.0 * h * e[0], 2.0 * h * e[1]) + 8.0 * f(h * e[0], h * e[1]) - 8.0 * f(-h * e[0], -h * e[1])
            + f(-2.0 * h * e[0], -2.0 * h * e[1]))
            / (12.0 * h)
    };
    let f0 = f(0.0, 0.0);
    let d2 = |e: [f64; 2]| {
        (-f(2.0 * h * e[0], 2.0 * h * e[1]) + 16.0 * f(h * e[0], h * e[1]) - 30.0 * f0
            + 16.0 * f(-h * e[0], -h * e[1])
            - f(-2.0 * h * e[0], -2.0 * h * e[1]))
            / (12.0 * h * h)
    };
    let g = Vector2::new(d1([1.0, 0.0]), d1([0.0, 1.0]));
    let (hxx, hyy) = (d2([1.0, 0.0]), d2([0.0, 1.0]));
    let hxy = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
    (g, Matrix2::new(hxx, hxy, hxy, hyy))
}

/// Damped Newton on the gradient; slow but steady along quartic directions.
fn refine<S: PlaneSymbol + ?Sized>(sym: &S, start: [f64; 2]) -> [f64; 2] {
    let mut x = start;
    let mut fx = sym.value_at(x);
    for _ in 0..400 {
        let (g, hess) = derivatives(sym, x, 1e-2);
        let scale = hess.norm().max(1e-12);
        let mut mu = 1e-10 * scale;
        let mut moved = false;
        for _ in 0..30 {
            let m = hess + Matrix2::identity() * mu;
            let step = match m.try_inverse() {
                Some(inv) => -(inv * g),
                None => -g / scale,
            };
            let y = [x[0] + step[0], x[1] + step[1]];
            let fy = sym.value_at(y);
            if fy <= fx {
                let small = step.norm() < 1e-14;
                x = y;
                fx = fy;
                moved = !small;
                break;
            }
            mu = mu.max(1e-8 * scale) * 10.0;
        }
        if !moved {
            break;
        }
    }
    [wrap(x[0]), wrap(x[1])]
}

fn torus_gap(a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = |x: f64, y: f64| {
        let t = (x - y).abs() % (2.0 * PI);
        t.min(2.0 * PI - t)
    };
    d(a[0], b[0]).hypot(d(a[1], b[1]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifshitzExponent {
    pub alpha: Rational64,
    pub floor: f64,
    pub witnesses: Vec<([f64; 2], Rational64)>,
}

/// Zero set of h − min h by grid scan and refinement, then α = min over it.
pub fn lifshitz_exponent_of<S: PlaneSymbol + ?Sized>(
    sym: &S,
    scan_grid: usize,
    family: &FamilySpec,
) -> Result<LifshitzExponent> {
    let g = scan_grid.max(8);
    let node = |a: usize, b: usize| [2.0 * PI * a as f64 / g as f64, 2.0 * PI * b as f64 / g as f64];
    let vals: Vec<f64> = par::map_indexed(g * g, |k| sym.value_at(node(k / g, k % g)));
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let (vmin, vmax) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let band = vmin + 0.05 * (vmax - vmin);
    let mut starts = Vec::new();
    for a in 0..g {
        for b in 0..g {
            let v = vals[a * g + b];
            let local = (-1i64..=1).all(|da| {
                (-1i64..=1).all(|db| {
                    let (x, y) = ((a as i64 + da).rem_euclid(g as i64) as usize, (b as i64 + db).rem_euclid(g as i64) as usize);
                    vals[x * g + y] >= v
                })
            });
            if local && v <= band {
                starts.push(node(a, b));
            }
        }
    }
    if starts.len() > g * g / 16 {
        return Err(Error::ZeroSetNotFinite);
    }
    let refined: Vec<([f64; 2], f64)> = par::map_indexed(starts.len(), |k| {
        let x = refine(sym, starts[k]);
        (x, sym.value_at(x))
    });
    let floor = refined.iter().fold(f64::INFINITY, |m, r| m.min(r.1)).min(vmin);
    let mut zeros: Vec<[f64; 2]> = Vec::new();
    for (x, v) in &refined {
        if v - floor <= ZERO_SET_TOL && zeros.iter().all(|z| torus_gap(*z, *x) > 1e-3) {
            zeros.push(*x);
        }
    }
    // a flat direction means a curve of minima rather than isolated points
    for z in &zeros {
        for k in 0..16 {
            let a = PI * k as f64 / 16.0;
            let y = [z[0] + 0.05 * a.cos(), z[1] + 0.05 * a.sin()];
            if sym.value_at(y) - floor < 1e-13 * floor.abs().max(1.0) {
                return Err(Error::ZeroSetNotFinite);
            }
        }
    }
    let floored = Floored { base: sym, floor };
    let mut witnesses = Vec::new();
    for z in zeros {
        let m = minimized_exponent_of(&floored, z, family, 4)?;
        witnesses.push((z, m.alpha));
    }
    let alpha = witnesses.iter().map(|w| w.1).min().ok_or(Error::EmptySupport)?;
    Ok(LifshitzExponent { alpha, floor, witnesses })
}

pub fn lifshitz_exponent(red: &ReducedSymbol, scan_grid: usize, family: &FamilySpec) -> Result<LifshitzExponent> {
    require_plane(red)?;
    lifshitz_exponent_of(red, scan_grid, family)
}

/// Same function with the refined minimum as floor.
struct Floored<'a, S: ?Sized> {
    base: &'a S,
    floor: f64,
}

impl<S: PlaneSymbol + ?Sized> PlaneSymbol for Floored<'_, S> {
    fn value_at(&self, t: [f64; 2]) -> f64 {
        self.base.value_at(t)
    }

    fn floor(&self) -> f64 {
        self.floor
    }

    fn noise(&self) -> f64 {
        self.base.noise()
    }
}

pub fn rational_string(r: &Rational64) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NewtonReport {
    pub center: [f64; 2],
    pub support: Vec<(u32, u32)>,
    pub hull: Vec<(String, String)>,
    pub segments: Vec<[(String, String); 2]>,
    pub alpha: String,
    pub identity_alpha: String,
    pub transform: Mat,
    pub family_used: String,
}

impl NewtonReport {
    pub fn new(t: &TaylorGrid, poly: &NewtonPolygon, m: &MinimizedExponent, family: &FamilySpec) -> Self {
        let pt = |p: &Point| (rational_string(&p.0), rational_string(&p.1));
        Self {
            center: t.center,
            support: t.support(),
            hull: poly.hull_vertices.iter().map(pt).collect(),
            segments: poly.diagram_segments.iter().map(|(a, b)| [pt(a), pt(b)]).collect(),
            alpha: rational_string(&m.alpha),
            identity_alpha: rational_string(&m.identity_alpha),
            transform: m.transform,
            family_used: family.to_string(),
        }
    }
}
