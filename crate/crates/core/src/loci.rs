//! Parameter-space classification: Multibrot membership, connectedness of
//! the bicritical odd family, the branch `s(a)` and the two-sided membership
//! test, plus the parameter Böttcher value on the `s`-plane.

use num_complex::Complex64;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{bottcher, bottcher_radius, escape_time, in_connectedness_locus, MEMBERSHIP_MAX_ITER};
use crate::family::{monic_roots, BicriticalOdd, FamilyError, MonicOdd, PolyMap, Unicritical};
use crate::rays::{ray_point, side_classify, trace_ray, Angle, RayError, RayParams, RayStatus, Separatrix, Side};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LociError {
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Ray(#[from] RayError),
    #[error("invalid membership parameters: {0}")]
    InvalidParams(String),
    #[error("the marked critical value stays bounded for {0} iterations")]
    NotEscaping(usize),
}

pub type LociResult<T> = Result<T, LociError>;

/// Half-width of the band around `|a| = 1` treated as undecided.
pub const UNIT_BAND: f64 = 1e-9;
/// Distance from 0 at which a ray counts as landing there.
pub const ZERO_LANDING_TOL: f64 = 1e-6;

/// Critical orbit of 0 under `z^D + c` bounded within `budget` steps.
pub fn in_multibrot(c: Complex64, degree: u32, budget: usize) -> bool {
    assert!(degree >= 2, "Multibrot degree must be at least 2");
    let u = Unicritical::new(degree - 1, c).expect("degree checked");
    let r = u.escape_radius();
    escape_time(&u, c, budget.saturating_sub(1), r).is_none()
}

/// Critical orbits of `p_a` bounded within `budget` steps.
pub fn in_cbo(a: Complex64, d: u32, budget: usize) -> LociResult<bool> {
    let p = BicriticalOdd::new(d, a)?;
    Ok(in_connectedness_locus(&p, budget, p.escape_radius()).map_err(|e| LociError::InvalidParams(e.to_string()))?)
}

/// Critical orbits of `P_s` bounded within `budget` steps.
pub fn in_mbo(s: Complex64, d: u32, budget: usize) -> LociResult<bool> {
    let m = MonicOdd::from_s(d, s)?;
    Ok(in_connectedness_locus(&m, budget, m.escape_radius()).map_err(|e| LociError::InvalidParams(e.to_string()))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmParams {
    pub rays: RayParams,
    /// Orbit points closer than this to 0 end the orbit.
    pub eps0: f64,
    pub orbit_len: usize,
    pub max_iter: usize,
    /// Overrides the separatrix resolution band when set.
    pub eps_sep: Option<f64>,
}

impl Default for PmParams {
    fn default() -> Self {
        PmParams {
            rays: RayParams::default(),
            eps0: 1e-8,
            orbit_len: 200,
            max_iter: MEMBERSHIP_MAX_ITER,
            eps_sep: None,
        }
    }
}

impl PmParams {
    pub fn validate(&self) -> LociResult<()> {
        self.rays.validate()?;
        if !(self.eps0 > 0.0) || self.orbit_len == 0 || self.max_iter == 0 {
            return Err(LociError::InvalidParams("eps0, orbit_len and max_iter must be positive".into()));
        }
        if let Some(e) = self.eps_sep {
            if !(e >= 0.0) {
                return Err(LociError::InvalidParams("eps_sep must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

/// Result of tracing the rays 0 and 1/2 for one monic branch.
#[derive(Debug, Clone)]
pub enum BranchOutcome {
    /// Both rays land at 0.
    Lands(Separatrix),
    /// Both rays landed, somewhere other than 0.
    Elsewhere,
    /// A ray did not finish within budget or Newton failed.
    Unknown(RayStatus),
}

#[derive(Debug, Clone)]
pub struct BranchReport {
    pub s: Complex64,
    pub outcome: BranchOutcome,
}

/// Traces the rays 0 and 1/2 for the first `d` monic roots. The remaining
/// roots are the negatives of these and give the same maps.
pub fn branch_reports(a: Complex64, d: u32, params: &RayParams) -> LociResult<Vec<BranchReport>> {
    let roots = monic_roots(d, a)?;
    let mut out = Vec::with_capacity(d as usize);
    for &s in roots.iter().take(d as usize) {
        let m = MonicOdd::from_root(d, a, s)?;
        let ray0 = trace_ray(&m, &Angle::zero(), params)?;
        let ray_half = trace_ray(&m, &Angle::half(), params)?;
        let outcome = match (ray0.status, ray_half.status) {
            (RayStatus::Landed, RayStatus::Landed) => {
                let at_zero = |t: &crate::rays::RayTrace| t.landing.map_or(false, |l| l.norm() <= ZERO_LANDING_TOL);
                if at_zero(&ray0) && at_zero(&ray_half) {
                    BranchOutcome::Lands(Separatrix::from_traces(ray0, ray_half, m.right_critical_point()))
                } else {
                    BranchOutcome::Elsewhere
                }
            }
            (RayStatus::Landed, other) | (other, _) => BranchOutcome::Unknown(other),
        };
        out.push(BranchReport { s, outcome });
    }
    Ok(out)
}

/// The branch `s(a)` whose rays 0 and 1/2 both land at 0, if exactly one
/// does.
pub fn select_branch(a: Complex64, d: u32, params: &RayParams) -> LociResult<Option<Complex64>> {
    let reports = branch_reports(a, d, params)?;
    let landing: Vec<Complex64> = reports
        .iter()
        .filter(|r| matches!(r.outcome, BranchOutcome::Lands(_)))
        .map(|r| r.s)
        .collect();
    Ok(if landing.len() == 1 { Some(landing[0]) } else { None })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Accept,
    Reject,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reason {
    Escaped,
    ZeroNotRepelling,
    NoBranchLands,
    SideViolation,
    NearSeparatrix,
    BudgetExhausted,
    /// More than one branch has both rays landing at 0.
    AmbiguousBranch,
    /// Newton failed while tracing a ray.
    RayFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub index: usize,
    /// In the coordinates of `p_a`.
    pub point: Complex64,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmVerdict {
    pub a: Complex64,
    pub d: u32,
    pub outcome: Outcome,
    pub reason: Option<Reason>,
    pub s: Option<Complex64>,
    pub witness: Option<Witness>,
    pub orbit_len: usize,
}

impl PmVerdict {
    fn new(a: Complex64, d: u32, outcome: Outcome, reason: Option<Reason>) -> Self {
        PmVerdict { a, d, outcome, reason, s: None, witness: None, orbit_len: 0 }
    }
}

/// Orbit prefix to classify: stops at the first point within `eps0` of 0
/// and after a cycle is detected (Floyd, tolerance `1e-12`).
fn orbit_prefix(m: &MonicOdd<f64>, start: Complex64, params: &PmParams) -> Vec<Complex64> {
    let mut orbit = Vec::with_capacity(params.orbit_len);
    let mut z = start;
    for _ in 0..params.orbit_len {
        orbit.push(z);
        if z.norm() < params.eps0 {
            break;
        }
        z = m.eval(z);
    }
    let tol = 1e-12;
    let mut end = orbit.len();
    for i in 1..orbit.len() {
        if 2 * i >= orbit.len() {
            break;
        }
        if (orbit[i] - orbit[2 * i]).norm() <= tol * (1.0 + orbit[i].norm()) {
            end = 2 * i + 1;
            break;
        }
    }
    orbit.truncate(end);
    orbit
}

/// Semi-decision for the two-sided membership criterion: both critical
/// orbits bounded, 0 repelling, a unique branch `s` whose rays 0 and 1/2
/// land at 0, and each critical orbit confined to its own side of those
/// rays (passing through 0 is allowed).
pub fn membership_pm(a: Complex64, d: u32, params: &PmParams) -> LociResult<PmVerdict> {
    params.validate()?;
    let p = BicriticalOdd::new(d, a)?;
    if !in_connectedness_locus(&p, params.max_iter, p.escape_radius()).map_err(|e| LociError::InvalidParams(e.to_string()))? {
        return Ok(PmVerdict::new(a, d, Outcome::Reject, Some(Reason::Escaped)));
    }
    let modulus = a.norm();
    if modulus < 1.0 - UNIT_BAND {
        return Ok(PmVerdict::new(a, d, Outcome::Reject, Some(Reason::ZeroNotRepelling)));
    }
    if modulus <= 1.0 + UNIT_BAND {
        return Ok(PmVerdict::new(a, d, Outcome::Indeterminate, Some(Reason::ZeroNotRepelling)));
    }

    let reports = branch_reports(a, d, &params.rays)?;
    let mut landing = reports.iter().filter_map(|r| match &r.outcome {
        BranchOutcome::Lands(sep) => Some((r.s, sep)),
        _ => None,
    });
    let first = landing.next();
    if landing.next().is_some() {
        log::warn!("two branches land at 0 for a = {a}, d = {d}");
        return Ok(PmVerdict::new(a, d, Outcome::Indeterminate, Some(Reason::AmbiguousBranch)));
    }
    let (s, sep) = match first {
        Some(x) => x,
        None => {
            let unknown = reports.iter().find_map(|r| match r.outcome {
                BranchOutcome::Unknown(st) => Some(st),
                _ => None,
            });
            return Ok(match unknown {
                Some(RayStatus::NewtonFailed) => PmVerdict::new(a, d, Outcome::Indeterminate, Some(Reason::RayFailed)),
                Some(_) => PmVerdict::new(a, d, Outcome::Indeterminate, Some(Reason::BudgetExhausted)),
                None => PmVerdict::new(a, d, Outcome::Reject, Some(Reason::NoBranchLands)),
            });
        }
    };

    let m = MonicOdd::from_root(d, a, s)?;
    let eps_sep = params.eps_sep.unwrap_or_else(|| sep.default_eps());
    let crit = m.right_critical_point();
    let mut violation: Option<Witness> = None;
    let mut near = false;
    let mut examined = 0;
    for (start, want) in [(crit, Side::Right), (-crit, Side::Left)] {
        let orbit = orbit_prefix(&m, start, params);
        examined = examined.max(orbit.len());
        for (k, &z) in orbit.iter().enumerate() {
            if z.norm() < params.eps0 {
                break;
            }
            match side_classify(z, sep, eps_sep)? {
                Side::Near => near = true,
                side if side != want => {
                    if violation.map_or(true, |w| k < w.index) {
                        violation = Some(Witness { index: k, point: m.from_monic_plane(z), side });
                    }
                    break;
                }
                _ => {}
            }
        }
    }
    let mut verdict = match (violation, near) {
        (Some(w), _) => PmVerdict {
            witness: Some(w),
            ..PmVerdict::new(a, d, Outcome::Reject, Some(Reason::SideViolation))
        },
        (None, true) => PmVerdict::new(a, d, Outcome::Indeterminate, Some(Reason::NearSeparatrix)),
        (None, false) => PmVerdict::new(a, d, Outcome::Accept, None),
    };
    verdict.s = Some(s);
    verdict.orbit_len = examined;
    Ok(verdict)
}

/// `φ_s(P_s(-s√d))`, the Böttcher coordinate of the marked critical value.
///
/// Inside the Böttcher domain this is the direct product. Otherwise the
/// orbit is pushed out, and each `D`-th root on the way back is the one
/// whose ray at the matching potential passes closest to the orbit point.
pub fn parameter_bottcher(s: Complex64, d: u32, params: &PmParams) -> LociResult<Complex64> {
    params.validate()?;
    let m = MonicOdd::from_s(d, s)?;
    let v = m.eval(-m.right_critical_point());
    let radius = bottcher_radius(&m);
    let mut orbit = vec![v];
    let mut z = v;
    while z.norm() < radius {
        if orbit.len() > params.max_iter {
            return Err(LociError::NotEscaping(params.max_iter));
        }
        z = m.eval(z);
        orbit.push(z);
    }
    let mut w = bottcher(&m, z).expect("orbit point is in the domain");
    let degree = m.degree() as f64;
    for &target in orbit.iter().rev().skip(1) {
        let modulus = w.norm().powf(1.0 / degree);
        let potential = w.norm().ln() / degree;
        let mut best: Option<(f64, Complex64)> = None;
        for k in 0..m.degree() {
            let arg = (w.arg() + 2.0 * std::f64::consts::PI * k as f64) / degree;
            let cand = Complex64::from_polar(modulus, arg);
            let turns = (arg / (2.0 * std::f64::consts::PI)).rem_euclid(1.0);
            let theta = Angle::from_rational(BigRational::from_float(turns).expect("finite angle"));
            if let Some(p) = ray_point(&m, &theta, potential, &params.rays)? {
                let dist = (p - target).norm();
                if best.map_or(true, |(b, _)| dist < b) {
                    best = Some((dist, cand));
                }
            }
        }
        w = match best {
            Some((_, c)) => c,
            None => return Err(LociError::Ray(RayError::InvalidParams("ray descent failed".into()))),
        };
    }
    Ok(w)
}

/// Winding number of `s ↦ parameter_bottcher(s)` along `|s| = radius`.
pub fn parameter_winding(d: u32, radius: f64, samples: usize, params: &PmParams) -> LociResult<i64> {
    let mut total = 0.0;
    let at = |k: usize| {
        let s = Complex64::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / samples as f64);
        parameter_bottcher(s, d, params)
    };
    let first = at(0)?;
    let mut prev = first;
    for k in 1..=samples {
        let cur = if k == samples { first } else { at(k)? };
        total += (cur / prev).arg();
        prev = cur;
    }
    Ok((total / (2.0 * std::f64::consts::PI)).round() as i64)
}
