//! Newton solvers for postcritically finite parameters and the matching of
//! bicritical odd centers to unicritical centers by orbit portrait.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::family::{BicriticalOdd, FamilyError, MonicOdd, PolyMap, Unicritical};
use crate::loci::{select_branch, LociError};
use crate::rays::{locate_beta, side_classify, RayError, RayParams, Separatrix, Side};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PcfError {
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Ray(#[from] RayError),
    #[error(transparent)]
    Loci(#[from] LociError),
    #[error("period must be at least {min}, got {got}")]
    InvalidPeriod { min: u32, got: u32 },
    #[error("Newton did not converge after {iters} iterations (residual {residual:e})")]
    NewtonFailed { iters: usize, residual: f64 },
    #[error("the orbit already returns after {divisor} steps")]
    PeriodNotMinimal { divisor: u32 },
    #[error("the orbit is already periodic after {preperiod} steps")]
    PreperiodNotMinimal { preperiod: u32 },
    #[error("iterate {index} of the critical orbit is at 0")]
    DegenerateOrbit { index: u32 },
    #[error("the right critical orbit is not periodic within {0} steps")]
    NotPeriodic(u32),
    #[error("no unicritical center of period {period} has portrait {coding}")]
    NoMatch { period: u32, coding: String },
    #[error("{count} unicritical centers of period {period} share portrait {coding}")]
    Ambiguous { period: u32, coding: String, count: usize },
}

pub type PcfResult<T> = Result<T, PcfError>;

/// Newton iteration cap for every solver.
pub const NEWTON_MAX: usize = 50;
/// Return residual required of unicritical centers.
pub const UNICRITICAL_TOL: f64 = 1e-12;
/// Return residual required of bicritical centers and cut points.
pub const BICRITICAL_TOL: f64 = 1e-10;
/// A proper divisor returning within this distance breaks minimality.
pub const MINIMALITY_TOL: f64 = 1e-6;
/// Intermediate cut-point iterates must stay this far from 0.
pub const DEGENERACY_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Unicritical,
    BicriticalOdd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterKind {
    /// The critical orbit is periodic.
    Center,
    /// The critical orbit reaches 0 after `period` steps.
    CutPoint,
    /// The critical orbit lands on a cycle of `period` after `preperiod` steps.
    Misiurewicz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterSpec {
    pub family: FamilyKind,
    pub kind: CenterKind,
    pub d: u32,
    pub period: u32,
    /// Steps before the critical orbit enters its cycle; 0 for centers.
    #[serde(default)]
    pub preperiod: u32,
    pub seed: Complex64,
    pub found: Option<Complex64>,
    pub residual: f64,
    pub newton_iters: usize,
}

/// `f_c^n(0)` for `z^D + c` and its derivative in `c`.
pub fn unicritical_return(degree: u32, n: u32, c: Complex64) -> (Complex64, Complex64) {
    let mut z = Complex64::new(0.0, 0.0);
    let mut dz = Complex64::new(0.0, 0.0);
    for _ in 0..n {
        dz = crate::scalar::powu(z, degree - 1) * dz * degree as f64 + 1.0;
        z = crate::scalar::powu(z, degree) + c;
    }
    (z, dz)
}

/// `p_a^n(√d)` and its derivative in `a`.
pub fn bicritical_iterate(d: u32, n: u32, a: Complex64) -> PcfResult<(Vec<Complex64>, Complex64)> {
    let p = BicriticalOdd::new(d, a)?;
    let mut z = Complex64::new(p.sqrt_d(), 0.0);
    let mut dz = Complex64::new(0.0, 0.0);
    let mut orbit = Vec::with_capacity(n as usize + 1);
    orbit.push(z);
    for _ in 0..n {
        let (v, dv) = p.eval_with_derivative(z);
        dz = dv * dz + p.parameter_derivative(z);
        z = v;
        orbit.push(z);
    }
    Ok((orbit, dz))
}

/// `p_a^n(√d) - √d` and its derivative in `a`.
pub fn bicritical_return(d: u32, n: u32, a: Complex64) -> PcfResult<(Complex64, Complex64)> {
    let (orbit, dz) = bicritical_iterate(d, n, a)?;
    Ok((orbit[n as usize] - orbit[0], dz))
}

fn proper_divisors(n: u32) -> impl Iterator<Item = u32> {
    (1..n).filter(move |m| n % m == 0)
}

fn newton<F>(seed: Complex64, tol: f64, mut f: F) -> PcfResult<(Complex64, f64, usize)>
where
    F: FnMut(Complex64) -> PcfResult<(Complex64, Complex64)>,
{
    let mut x = seed;
    let mut residual = f64::INFINITY;
    for iter in 1..=NEWTON_MAX {
        let (v, dv) = f(x)?;
        residual = v.norm();
        let step = v / dv;
        if !(step.re.is_finite() && step.im.is_finite()) {
            return Err(PcfError::NewtonFailed { iters: iter, residual });
        }
        x -= step;
        if step.norm() <= 1e-15 * (1.0 + x.norm()) {
            let (v, _) = f(x)?;
            residual = v.norm();
            if residual <= tol {
                return Ok((x, residual, iter));
            }
            break;
        }
    }
    let (v, _) = f(x)?;
    let final_residual = v.norm();
    if final_residual <= tol {
        // Converged to tolerance even though the step did not settle.
        return Ok((x, final_residual, NEWTON_MAX));
    }
    Err(PcfError::NewtonFailed { iters: NEWTON_MAX, residual: residual.min(final_residual) })
}

/// Center of `z^D + c` with the critical point periodic of exact `period`.
pub fn solve_center_unicritical(degree: u32, period: u32, seed: Complex64) -> PcfResult<CenterSpec> {
    if degree < 2 {
        return Err(PcfError::Family(FamilyError::InvalidDegree(degree)));
    }
    if period < 1 {
        return Err(PcfError::InvalidPeriod { min: 1, got: period });
    }
    let (c, residual, iters) = newton(seed, UNICRITICAL_TOL, |c| Ok(unicritical_return(degree, period, c)))?;
    for m in proper_divisors(period) {
        if unicritical_return(degree, m, c).0.norm() <= MINIMALITY_TOL {
            return Err(PcfError::PeriodNotMinimal { divisor: m });
        }
    }
    Ok(CenterSpec {
        family: FamilyKind::Unicritical,
        kind: CenterKind::Center,
        d: degree - 1,
        period,
        preperiod: 0,
        seed,
        found: Some(c),
        residual,
        newton_iters: iters,
    })
}

/// Orbit `f_c^n(0)`, `n = 0..=len`, with derivatives in `c`.
fn unicritical_orbit(degree: u32, len: u32, c: Complex64) -> Vec<(Complex64, Complex64)> {
    let mut z = Complex64::new(0.0, 0.0);
    let mut dz = Complex64::new(0.0, 0.0);
    let mut out = vec![(z, dz)];
    for _ in 0..len {
        dz = crate::scalar::powu(z, degree - 1) * dz * degree as f64 + 1.0;
        z = crate::scalar::powu(z, degree) + c;
        out.push((z, dz));
    }
    out
}

/// Misiurewicz parameter of `z^D + c`: `f^(l+p)(0) = f^l(0)` with exact
/// preperiod `l ≥ 2` and exact period `p`.
pub fn solve_misiurewicz_unicritical(
    degree: u32,
    preperiod: u32,
    period: u32,
    seed: Complex64,
) -> PcfResult<CenterSpec> {
    if degree < 2 {
        return Err(PcfError::Family(FamilyError::InvalidDegree(degree)));
    }
    if period < 1 {
        return Err(PcfError::InvalidPeriod { min: 1, got: period });
    }
    if preperiod < 2 {
        return Err(PcfError::InvalidPeriod { min: 2, got: preperiod });
    }
    let (l, p) = (preperiod as usize, period as usize);
    let value = |c: Complex64| -> PcfResult<(Complex64, Complex64)> {
        let orbit = unicritical_orbit(degree, preperiod + period, c);
        Ok((orbit[l + p].0 - orbit[l].0, orbit[l + p].1 - orbit[l].1))
    };
    let (c, residual, iters) = newton(seed, UNICRITICAL_TOL, value)?;
    let orbit = unicritical_orbit(degree, preperiod + period, c);
    if (orbit[l - 1 + p].0 - orbit[l - 1].0).norm() <= MINIMALITY_TOL {
        return Err(PcfError::PreperiodNotMinimal { preperiod: preperiod - 1 });
    }
    for m in proper_divisors(period) {
        if (orbit[l + m as usize].0 - orbit[l].0).norm() <= MINIMALITY_TOL {
            return Err(PcfError::PeriodNotMinimal { divisor: m });
        }
    }
    Ok(CenterSpec {
        family: FamilyKind::Unicritical,
        kind: CenterKind::Misiurewicz,
        d: degree - 1,
        period,
        preperiod,
        seed,
        found: Some(c),
        residual,
        newton_iters: iters,
    })
}

/// Parameter `a` whose right critical point `√d` is periodic of exact
/// `period` under `p_a`.
pub fn solve_center_bicritical(d: u32, period: u32, seed: Complex64) -> PcfResult<CenterSpec> {
    if period < 1 {
        return Err(PcfError::InvalidPeriod { min: 1, got: period });
    }
    let (a, residual, iters) = newton(seed, BICRITICAL_TOL, |a| bicritical_return(d, period, a))?;
    for m in proper_divisors(period) {
        if bicritical_return(d, m, a)?.0.norm() <= MINIMALITY_TOL {
            return Err(PcfError::PeriodNotMinimal { divisor: m });
        }
    }
    Ok(CenterSpec {
        family: FamilyKind::BicriticalOdd,
        kind: CenterKind::Center,
        d,
        period,
        preperiod: 0,
        seed,
        found: Some(a),
        residual,
        newton_iters: iters,
    })
}

/// Parameter `a` with `p_a^k(√d) = 0` and no earlier iterate at 0.
pub fn solve_cut_point(d: u32, k: u32, seed: Complex64) -> PcfResult<CenterSpec> {
    if k < 2 {
        return Err(PcfError::InvalidPeriod { min: 2, got: k });
    }
    let value = |a: Complex64| -> PcfResult<(Complex64, Complex64)> {
        let (orbit, dz) = bicritical_iterate(d, k, a)?;
        Ok((orbit[k as usize], dz))
    };
    let (a, residual, iters) = newton(seed, BICRITICAL_TOL, value)?;
    let (orbit, _) = bicritical_iterate(d, k, a)?;
    for (j, z) in orbit.iter().enumerate().take(k as usize).skip(1) {
        if z.norm() <= DEGENERACY_TOL {
            return Err(PcfError::DegenerateOrbit { index: j as u32 });
        }
    }
    Ok(CenterSpec {
        family: FamilyKind::BicriticalOdd,
        kind: CenterKind::CutPoint,
        d,
        period: k,
        preperiod: 0,
        seed,
        found: Some(a),
        residual,
        newton_iters: iters,
    })
}

/// Minimal `n ≤ limit` with `p_a^n(√d)` back at `√d` within `1e-8`.
pub fn right_orbit_period(d: u32, a: Complex64, limit: u32) -> PcfResult<u32> {
    let p = BicriticalOdd::new(d, a)?;
    let start = Complex64::new(p.sqrt_d(), 0.0);
    let mut z = start;
    for n in 1..=limit {
        z = p.eval(z);
        if (z - start).norm() <= 1e-8 {
            return Ok(n);
        }
    }
    Err(PcfError::NotPeriodic(limit))
}

/// All centers of exact `period` for `z^D + c` found by Newton from a
/// 64 × 64 seed grid over `[-2,2]²`, deduplicated at `1e-8`.
pub fn unicritical_centers(degree: u32, period: u32) -> Vec<Complex64> {
    const GRID: usize = 64;
    let mut found: Vec<Complex64> = Vec::new();
    for i in 0..GRID {
        for j in 0..GRID {
            let seed = Complex64::new(
                -2.0 + 4.0 * (i as f64 + 0.5) / GRID as f64,
                -2.0 + 4.0 * (j as f64 + 0.5) / GRID as f64,
            );
            if let Ok(spec) = solve_center_unicritical(degree, period, seed) {
                let c = spec.found.unwrap();
                if !found.iter().any(|f| (f - c).norm() <= 1e-8) {
                    found.push(c);
                }
            }
        }
    }
    found.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    found
}

/// Cyclic order of a periodic orbit and a marker point around a reference
/// fixed point, read counterclockwise from the first orbit point.
///
/// Points on a common ray from `xi` (within `1e-6` rad) share a bracket
/// and are listed by distance. The marker prints as `B`.
pub fn portrait_coding(cycle: &[Complex64], marker: Complex64, xi: Complex64) -> String {
    let base = (cycle[0] - xi).arg();
    let rel = |z: Complex64| ((z - xi).arg() - base).rem_euclid(2.0 * PI);
    let mut items: Vec<(f64, f64, String)> = cycle
        .iter()
        .enumerate()
        .map(|(k, &z)| (rel(z), (z - xi).norm(), k.to_string()))
        .collect();
    items.push((rel(marker), (marker - xi).norm(), "B".to_string()));
    for item in items.iter_mut() {
        // Angles just below a full turn belong with the starting ray.
        if 2.0 * PI - item.0 <= 1e-6 {
            item.0 = 0.0;
        }
    }
    items.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out = String::new();
    let mut group_angle = f64::NAN;
    for (angle, _, label) in items {
        if group_angle.is_nan() || angle - group_angle > 1e-6 {
            if !out.is_empty() {
                out.push(']');
            }
            out.push('[');
            group_angle = angle;
        } else {
            out.push(',');
        }
        out.push_str(&label);
    }
    out.push(']');
    out
}

/// Portrait coding of the critical cycle of `z^D + c` around the
/// non-β fixed point of smallest multiplier, with β as marker.
pub fn unicritical_coding(degree: u32, period: u32, c: Complex64, params: &RayParams) -> PcfResult<String> {
    if period == 1 {
        return Ok("[0]".into());
    }
    let u = Unicritical::new(degree - 1, c)?;
    let beta = locate_beta(&u, params)?;
    let xi = u
        .fixed_points()
        .into_iter()
        .filter(|z| (z - beta).norm() > 1e-8)
        .min_by(|a, b| {
            let ma = u.eval_with_derivative(*a).1.norm();
            let mb = u.eval_with_derivative(*b).1.norm();
            ma.total_cmp(&mb)
        })
        .expect("degree at least 2 has a second fixed point");
    let mut cycle = Vec::with_capacity(period as usize);
    let mut z = Complex64::new(0.0, 0.0);
    for _ in 0..period {
        cycle.push(z);
        z = u.eval(z);
    }
    Ok(portrait_coding(&cycle, beta, xi))
}

/// Portrait coding of the right critical cycle of `p_a` around the nonzero
/// right-side fixed point of smallest multiplier, with 0 as marker.
pub fn bicritical_coding(d: u32, period: u32, a: Complex64, params: &RayParams) -> PcfResult<String> {
    if period == 1 {
        return Ok("[0]".into());
    }
    let p = BicriticalOdd::new(d, a)?;
    let s = select_branch(a, d, params)?.ok_or(PcfError::Loci(LociError::InvalidParams(
        "no branch has rays 0 and 1/2 landing at 0".into(),
    )))?;
    let m = MonicOdd::from_root(d, a, s)?;
    let sep = Separatrix::for_monic_odd(&m, params)?;
    let eps = sep.default_eps();
    let mut right = Vec::new();
    for x in p.nonzero_fixed_points() {
        if side_classify(m.to_monic_plane(x), &sep, eps)? == Side::Right {
            right.push(x);
        }
    }
    let xi = right
        .into_iter()
        .min_by(|a, b| p.derivative(*a).norm().total_cmp(&p.derivative(*b).norm()))
        .ok_or(PcfError::Ray(RayError::SeparatrixIncomplete))?;
    let mut cycle = Vec::with_capacity(period as usize);
    let mut z = Complex64::new(p.sqrt_d(), 0.0);
    for _ in 0..period {
        cycle.push(z);
        z = p.eval(z);
    }
    Ok(portrait_coding(&cycle, Complex64::new(0.0, 0.0), xi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterMatch {
    pub period: u32,
    pub c: Complex64,
    pub coding: String,
}

/// The unicritical center of degree `d + 1` whose critical portrait matches
/// the right critical cycle of the superattracting `p_a`.
pub fn match_center(a: Complex64, d: u32, params: &RayParams) -> PcfResult<CenterMatch> {
    let period = right_orbit_period(d, a, 64)?;
    let coding = bicritical_coding(d, period, a, params)?;
    let degree = d + 1;
    let mut hits = Vec::new();
    for c in unicritical_centers(degree, period) {
        if unicritical_coding(degree, period, c, params)? == coding {
            hits.push(c);
        }
    }
    match hits.len() {
        0 => Err(PcfError::NoMatch { period, coding }),
        1 => Ok(CenterMatch { period, c: hits[0], coding }),
        count => Err(PcfError::Ambiguous { period, coding, count }),
    }
}
