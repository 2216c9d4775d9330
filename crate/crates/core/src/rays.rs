//! Exact angle dynamics, dynamical rays, the β fixed point and the
//! two-sided separatrix built from the rays at angles 0 and 1/2.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::dynamics::{bottcher_inverse, bottcher_radius};
use crate::family::{MonicMap, MonicOdd, PolyMap, Unicritical};
use crate::scalar::rational_to_f64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AngleError {
    #[error("angle denominator is zero")]
    ZeroDenominator,
    #[error("cannot parse angle {0:?}; expected p/q")]
    Parse(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RayError {
    #[error("invalid ray parameters: {0}")]
    InvalidParams(String),
    #[error("separatrix rays did not both land")]
    SeparatrixIncomplete,
    #[error("two fixed points lie within {0} of the ray end")]
    LandingAmbiguous(f64),
}

/// A reduced rational angle in `[0, 1)`, measured in turns.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Angle(BigRational);

impl Angle {
    pub fn new(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Result<Self, AngleError> {
        let den = den.into();
        if den.is_zero() {
            return Err(AngleError::ZeroDenominator);
        }
        Ok(Self::from_rational(BigRational::new(num.into(), den)))
    }

    /// Reduces any rational modulo 1.
    pub fn from_rational(r: BigRational) -> Self {
        let floor = r.floor();
        Angle(r - floor)
    }

    pub fn zero() -> Self {
        Angle(BigRational::zero())
    }

    pub fn half() -> Self {
        Angle(BigRational::new(BigInt::one(), BigInt::from(2)))
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn as_rational(&self) -> &BigRational {
        &self.0
    }

    pub fn to_f64(&self) -> f64 {
        rational_to_f64(&self.0)
    }

    /// `kθ mod 1`.
    pub fn mul_mod(&self, k: &BigInt) -> Self {
        Self::from_rational(&self.0 * BigRational::from_integer(k.clone()))
    }

    /// `θ + φ mod 1`.
    pub fn add(&self, other: &Angle) -> Self {
        Self::from_rational(&self.0 + &other.0)
    }

    /// Preperiod and period of the angle under multiplication by `degree`,
    /// or `None` when the orbit is longer than `limit`.
    pub fn preperiod_period(&self, degree: u32, limit: usize) -> Option<(usize, usize)> {
        let k = BigInt::from(degree);
        let mut seen: HashMap<Angle, usize> = HashMap::new();
        let mut cur = self.clone();
        for n in 0..=limit {
            if let Some(&first) = seen.get(&cur) {
                return Some((first, n - first));
            }
            seen.insert(cur.clone(), n);
            cur = cur.mul_mod(&k);
        }
        None
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl FromStr for Angle {
    type Err = AngleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || AngleError::Parse(s.to_string());
        let (p, q) = s.trim().split_once('/').ok_or_else(bad)?;
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_negative() {
            return Err(bad());
        }
        Angle::new(p, q)
    }
}

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `Dθ mod 1`.
pub fn angle_map(theta: &Angle, degree: u32) -> Angle {
    assert!(degree >= 2, "angle_map needs degree at least 2");
    theta.mul_mod(&BigInt::from(degree))
}

/// `θ + j/(2d) mod 1`: relabelling of rays between the monic branches.
pub fn rotate_label(theta: &Angle, j: i64, d: u32) -> Angle {
    let shift = BigRational::new(BigInt::from(j), BigInt::from(2 * d));
    Angle::from_rational(theta.as_rational() + shift)
}

/// Angles with `(2d+1)^(k-1) θ ≡ 0` and `≡ 1/2`, both sorted.
pub fn cut_point_angles(d: u32, k: u32) -> (Vec<Angle>, Vec<Angle>) {
    assert!(k >= 1, "k must be at least 1");
    let n = BigInt::from(2 * d + 1).pow(k - 1);
    let count = n.to_u64().expect("cut point enumeration too large");
    let mut zero = Vec::with_capacity(count as usize);
    let mut half = Vec::with_capacity(count as usize);
    for i in 0..count {
        zero.push(Angle::new(BigInt::from(i), n.clone()).unwrap());
        half.push(Angle::new(BigInt::from(2 * i + 1), &n * 2).unwrap());
    }
    zero.sort();
    half.sort();
    (zero, half)
}

/// Angles `i/d^n` in `(0,1)` not already of the form `i'/d^(n-1)`.
pub fn tip_angles(d: u32, n: u32) -> Vec<Angle> {
    assert!(n >= 1, "n must be at least 1");
    if d < 2 {
        return Vec::new();
    }
    let den = BigInt::from(d).pow(n);
    let coarse = BigInt::from(d).pow(n - 1);
    let count = den.to_u64().expect("tip enumeration too large");
    (1..count)
        .map(|i| Angle::new(BigInt::from(i), den.clone()).unwrap())
        .filter(|a| !(a.as_rational() * BigRational::from_integer(coarse.clone())).is_integer())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayParams {
    pub eta: f64,
    pub step_ratio: f64,
    pub max_levels: usize,
    pub newton_tol: f64,
    pub newton_max: usize,
}

impl Default for RayParams {
    fn default() -> Self {
        RayParams { eta: 8.0, step_ratio: 0.5, max_levels: 200, newton_tol: 1e-9, newton_max: 64 }
    }
}

impl RayParams {
    pub fn validate(&self) -> Result<(), RayError> {
        let bad = |m: &str| Err(RayError::InvalidParams(m.to_string()));
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta must be positive");
        }
        if !(self.step_ratio > 0.0 && self.step_ratio < 1.0) {
            return bad("step_ratio must lie in (0,1)");
        }
        if self.max_levels == 0 || self.newton_max == 0 {
            return bad("max_levels and newton_max must be positive");
        }
        if !(self.newton_tol > 0.0) {
            return bad("newton_tol must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RayStatus {
    #[serde(rename = "landed")]
    Landed,
    #[serde(rename = "budget")]
    BudgetExhausted,
    #[serde(rename = "newton_failed")]
    NewtonFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayTrace {
    pub angle: Angle,
    pub points: Vec<Complex64>,
    pub landing: Option<Complex64>,
    pub status: RayStatus,
    /// Potential of each point.
    #[serde(skip)]
    pub potentials: Vec<f64>,
}

impl RayTrace {
    pub fn landed(&self) -> bool {
        self.status == RayStatus::Landed
    }

    pub fn end(&self) -> Complex64 {
        *self.points.last().expect("trace has a starting point")
    }
}

/// Internal substeps per recorded level.
const SUBSTEPS: usize = 4;
/// Halvings allowed when Newton fails on a substep.
const MAX_SUBDIVISION: u32 = 12;
/// A substep may move at most this many times the previous one.
const JUMP_FACTOR: f64 = 4.0;
/// Distance between the ray end and its refined landing point.
const LANDING_TOL: f64 = 1e-6;

struct Tracer<'a, M: MonicMap<f64> + ?Sized> {
    map: &'a M,
    degree: f64,
    theta: &'a Angle,
    angles: Vec<f64>,
    min_log: f64,
    params: &'a RayParams,
}

impl<'a, M: MonicMap<f64> + ?Sized> Tracer<'a, M> {
    fn depth_for(&self, t: f64) -> usize {
        let mut n = 0;
        let mut v = t;
        while v < self.min_log {
            v *= self.degree;
            n += 1;
        }
        n
    }

    /// Fractional part of `D^n θ`, cached.
    fn angle_at(&mut self, n: usize) -> f64 {
        let k = BigInt::from(self.map.degree());
        while self.angles.len() <= n {
            let depth = self.angles.len() as u32;
            let a = self.theta.mul_mod(&k.pow(depth));
            self.angles.push(a.to_f64());
        }
        self.angles[n]
    }

    fn target(&mut self, t: f64) -> (usize, Complex64) {
        let n = self.depth_for(t);
        let phase = 2.0 * std::f64::consts::PI * self.angle_at(n);
        let w = Complex64::from_polar((t * self.degree.powi(n as i32)).exp(), phase);
        (n, bottcher_inverse(self.map, w))
    }

    /// Solves `P^n(z) = w` by Newton from `seed`.
    fn newton(&self, seed: Complex64, n: usize, w: Complex64) -> Option<Complex64> {
        let mut z = seed;
        for _ in 0..self.params.newton_max {
            let (v, dv) = iterate_with_derivative(self.map, z, n);
            let step = (v - w) / dv;
            if !(step.re.is_finite() && step.im.is_finite()) {
                return None;
            }
            z -= step;
            if step.norm() <= 1e-14 * (1.0 + z.norm()) {
                return Some(z);
            }
        }
        None
    }

    fn solve(&mut self, seed: Complex64, t: f64) -> Option<Complex64> {
        let (n, w) = self.target(t);
        if n == 0 {
            return Some(w);
        }
        self.newton(seed, n, w)
    }

    /// Moves the point `z` at potential `from` down to potential `to`.
    fn descend(&mut self, z: Complex64, prev_step: Option<f64>, from: f64, to: f64, depth: u32) -> Option<(Complex64, Option<f64>)> {
        let pieces = if depth == 0 { SUBSTEPS } else { 2 };
        let ratio = (to / from).powf(1.0 / pieces as f64);
        let mut cur = z;
        let mut t = from;
        let mut last = prev_step;
        for k in 0..pieces {
            let next_t = if k + 1 == pieces { to } else { t * ratio };
            let candidate = self.solve(cur, next_t);
            let ok = match (candidate, last) {
                (Some(c), Some(len)) => (c - cur).norm() <= JUMP_FACTOR * len + 1e-12,
                (Some(_), None) => true,
                (None, _) => false,
            };
            if ok {
                let c = candidate.unwrap();
                last = Some((c - cur).norm());
                cur = c;
            } else if depth < MAX_SUBDIVISION {
                let (c, l) = self.descend(cur, last.map(|x| x / 2.0), t, next_t, depth + 1)?;
                cur = c;
                last = l;
            } else {
                let c = candidate?;
                last = Some((c - cur).norm());
                cur = c;
            }
            t = next_t;
        }
        Some((cur, last))
    }
}

fn iterate_with_derivative<M: PolyMap<f64> + ?Sized>(map: &M, z: Complex64, n: usize) -> (Complex64, Complex64) {
    let mut w = z;
    let mut dw = Complex64::new(1.0, 0.0);
    for _ in 0..n {
        let (p, dp) = map.eval_with_derivative(w);
        dw *= dp;
        w = p;
    }
    (w, dw)
}

/// Newton on `P^(l+p)(z) - P^l(z)` for the landing point of a ray whose
/// angle has preperiod `l` and period `p`.
fn refine_landing<M: PolyMap<f64> + ?Sized>(
    map: &M,
    seed: Complex64,
    preperiod: usize,
    period: usize,
    newton_max: usize,
) -> Option<Complex64> {
    let mut z = seed;
    for _ in 0..newton_max {
        let (a, da) = iterate_with_derivative(map, z, preperiod);
        let (b, db) = {
            let (v, dv) = iterate_with_derivative(map, a, period);
            (v, dv * da)
        };
        let step = (b - a) / (db - da);
        if !(step.re.is_finite() && step.im.is_finite()) {
            return None;
        }
        z -= step;
        if step.norm() <= 1e-15 * (1.0 + z.norm()) {
            return Some(z);
        }
    }
    // Multiple roots converge only linearly; accept a stalled iterate.
    let (a, _) = iterate_with_derivative(map, z, preperiod);
    let (b, _) = iterate_with_derivative(map, a, period);
    ((b - a).norm() <= 1e-12 * (1.0 + a.norm())).then_some(z)
}

/// Traces the dynamical ray of angle `theta` by potential descent.
///
/// The point at potential `t` solves `P^n(z) = φ⁻¹(exp(D^n t + 2πi D^n θ))`
/// with `n` the least depth putting the right side inside the Böttcher
/// domain. Recorded points sit at potentials `η·step_ratio^k`.
pub fn trace_ray<M: MonicMap<f64> + ?Sized>(map: &M, theta: &Angle, params: &RayParams) -> Result<RayTrace, RayError> {
    params.validate()?;
    let radius = bottcher_radius(map);
    let mut tracer = Tracer {
        map,
        degree: map.degree() as f64,
        theta,
        angles: Vec::new(),
        min_log: (2.0 * radius).ln().max(4.0),
        params,
    };
    let portrait = theta.preperiod_period(map.degree(), 10_000);

    let top = params.eta.max(tracer.min_log);
    let (_, mut z) = tracer.target(top);
    let mut last_step = None;
    if top > params.eta {
        match tracer.descend(z, None, top, params.eta, 0) {
            Some((c, l)) => {
                z = c;
                last_step = l;
            }
            None => {
                return Ok(RayTrace {
                    angle: theta.clone(),
                    points: vec![z],
                    landing: None,
                    status: RayStatus::NewtonFailed,
                    potentials: vec![top],
                })
            }
        }
    }

    let mut points = vec![z];
    let mut potentials = vec![params.eta];
    let mut t = params.eta;
    for _ in 0..params.max_levels {
        let next = t * params.step_ratio;
        match tracer.descend(z, last_step, t, next, 0) {
            Some((c, l)) => {
                z = c;
                last_step = l;
            }
            None => {
                return Ok(RayTrace {
                    angle: theta.clone(),
                    points,
                    landing: None,
                    status: RayStatus::NewtonFailed,
                    potentials,
                })
            }
        }
        t = next;
        points.push(z);
        potentials.push(t);
        if let Some(landing) = check_landing(map, &points, portrait, params) {
            return Ok(RayTrace {
                angle: theta.clone(),
                points,
                landing: Some(landing),
                status: RayStatus::Landed,
                potentials,
            });
        }
    }
    Ok(RayTrace { angle: theta.clone(), points, landing: None, status: RayStatus::BudgetExhausted, potentials })
}

/// The point at potential `t` on the ray of angle `theta`, reached by the
/// same descent as [`trace_ray`]. `None` when Newton fails on the way.
pub fn ray_point<M: MonicMap<f64> + ?Sized>(
    map: &M,
    theta: &Angle,
    t: f64,
    params: &RayParams,
) -> Result<Option<Complex64>, RayError> {
    params.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(RayError::InvalidParams("potential must be positive".into()));
    }
    let radius = bottcher_radius(map);
    let mut tracer = Tracer {
        map,
        degree: map.degree() as f64,
        theta,
        angles: Vec::new(),
        min_log: (2.0 * radius).ln().max(4.0),
        params,
    };
    let mut cur = tracer.min_log.max(t);
    let (_, mut z) = tracer.target(cur);
    let mut last = None;
    while cur > t {
        let next = (cur * params.step_ratio).max(t);
        match tracer.descend(z, last, cur, next, 0) {
            Some((c, l)) => {
                z = c;
                last = l;
            }
            None => return Ok(None),
        }
        cur = next;
    }
    Ok(Some(z))
}

fn check_landing<M: PolyMap<f64> + ?Sized>(
    map: &M,
    points: &[Complex64],
    portrait: Option<(usize, usize)>,
    params: &RayParams,
) -> Option<Complex64> {
    let n = points.len();
    if n < 3 {
        return None;
    }
    let tail = &points[n - 3..];
    let tol = params.newton_tol;
    let close = |a: Complex64, b: Complex64| (a - b).norm() < tol;
    if !(close(tail[0], tail[1]) && close(tail[1], tail[2]) && close(tail[0], tail[2])) {
        return None;
    }
    let (pre, per) = portrait?;
    let landing = refine_landing(map, tail[2], pre, per, params.newton_max)?;
    if (landing - tail[2]).norm() > LANDING_TOL {
        return None;
    }
    tail.iter().all(|&p| close(p, landing)).then_some(landing)
}

/// The β fixed point: the fixed point at the end of the ray of angle 0.
pub fn locate_beta(u: &Unicritical<f64>, params: &RayParams) -> Result<Complex64, RayError> {
    let trace = trace_ray(u, &Angle::zero(), params)?;
    let end = trace.landing.unwrap_or_else(|| trace.end());
    let mut fixed = u.fixed_points();
    fixed.sort_by(|a, b| (a - end).norm().partial_cmp(&(b - end).norm()).unwrap());
    if fixed.len() > 1 && (fixed[1] - end).norm() < LANDING_TOL {
        return Err(RayError::LandingAmbiguous(LANDING_TOL));
    }
    // Polish the root against the map itself.
    let mut beta = fixed[0];
    for _ in 0..8 {
        let (v, dv) = u.eval_with_derivative(beta);
        let step = (v - beta) / (dv - 1.0);
        if !(step.re.is_finite() && step.im.is_finite()) {
            break;
        }
        beta -= step;
        if step.norm() <= 1e-16 * (1.0 + beta.norm()) {
            break;
        }
    }
    Ok(beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "R")]
    Right,
    #[serde(rename = "near")]
    Near,
}

/// The rays at angles 0 and 1/2 joined at their common landing point.
#[derive(Debug, Clone)]
pub struct Separatrix {
    pub ray0: RayTrace,
    pub ray_half: RayTrace,
    pub pivot: Complex64,
    polygon: Vec<Complex64>,
    right_parity: bool,
}

/// Points in the closing arc beyond the outer ends of the rays.
const ARC_POINTS: usize = 64;

impl Separatrix {
    /// Joins two traces. `right_reference` is a point declared to be on the
    /// right side (the critical point `+s√d` for `P_s`).
    pub fn from_traces(ray0: RayTrace, ray_half: RayTrace, right_reference: Complex64) -> Self {
        let pivot = ray0.landing.unwrap_or_else(|| ray0.end());
        let mut polygon: Vec<Complex64> = ray0.points.clone();
        polygon.push(pivot);
        polygon.extend(ray_half.points.iter().rev());
        let start = *ray_half.points.first().unwrap();
        let end = *ray0.points.first().unwrap();
        let r = 2.0 * start.norm().max(end.norm());
        let a0 = start.arg();
        let mut a1 = end.arg();
        while a1 <= a0 {
            a1 += 2.0 * std::f64::consts::PI;
        }
        for k in 0..=ARC_POINTS {
            let a = a0 + (a1 - a0) * k as f64 / ARC_POINTS as f64;
            polygon.push(Complex64::from_polar(r, a));
        }
        let right_parity = crossing_parity(&polygon, right_reference);
        Separatrix { ray0, ray_half, pivot, polygon, right_parity }
    }

    /// Traces both rays for `map` and joins them.
    pub fn trace<M: MonicMap<f64> + ?Sized>(
        map: &M,
        right_reference: Complex64,
        params: &RayParams,
    ) -> Result<Self, RayError> {
        let ray0 = trace_ray(map, &Angle::zero(), params)?;
        let ray_half = trace_ray(map, &Angle::half(), params)?;
        Ok(Self::from_traces(ray0, ray_half, right_reference))
    }

    /// The separatrix of `P_s`, with `+s√d` on the right.
    pub fn for_monic_odd(m: &MonicOdd<f64>, params: &RayParams) -> Result<Self, RayError> {
        Self::trace(m, m.right_critical_point(), params)
    }

    pub fn is_complete(&self) -> bool {
        self.ray0.landed() && self.ray_half.landed()
    }

    /// Twice the widest gap between consecutive points over the last five
    /// points of each ray.
    pub fn default_eps(&self) -> f64 {
        let gap = |pts: &[Complex64]| {
            let start = pts.len().saturating_sub(5);
            pts[start..].windows(2).map(|w| (w[1] - w[0]).norm()).fold(0.0, f64::max)
        };
        2.0 * gap(&self.ray0.points).max(gap(&self.ray_half.points))
    }

    /// Distance to the rays and pivot (not the closing arc).
    pub fn distance(&self, z: Complex64) -> f64 {
        let mut best = (z - self.pivot).norm();
        for pts in [&self.ray0.points, &self.ray_half.points] {
            for w in pts.windows(2) {
                best = best.min(segment_distance(z, w[0], w[1]));
            }
            if let Some(&last) = pts.last() {
                best = best.min(segment_distance(z, last, self.pivot));
            }
        }
        best
    }
}

fn segment_distance(z: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (z - a).norm();
    }
    let t = (((z - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (z - (a + ab * t)).norm()
}

/// Even-odd rule with a horizontal probe toward `+∞`.
fn crossing_parity(polygon: &[Complex64], z: Complex64) -> bool {
    let mut inside = false;
    let n = polygon.len();
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        if (a.im > z.im) != (b.im > z.im) {
            let x = a.re + (z.im - a.im) * (b.re - a.re) / (b.im - a.im);
            if x > z.re {
                inside = !inside;
            }
        }
    }
    inside
}

/// Which complementary component of the separatrix contains `z`.
pub fn side_classify(z: Complex64, sep: &Separatrix, eps_sep: f64) -> Result<Side, RayError> {
    if !sep.is_complete() {
        return Err(RayError::SeparatrixIncomplete);
    }
    if sep.distance(z) < eps_sep {
        return Ok(Side::Near);
    }
    if crossing_parity(&sep.polygon, z) == sep.right_parity {
        Ok(Side::Right)
    } else {
        Ok(Side::Left)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::green;
    use crate::family::monic_roots;
    use num_integer::Integer;

    fn ang(p: i64, q: i64) -> Angle {
        Angle::new(p, q).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn monic(d: u32, a: f64) -> MonicOdd<f64> {
        let roots = monic_roots(d, c(a, 0.0)).unwrap();
        MonicOdd::from_root(d, c(a, 0.0), roots[0]).unwrap()
    }

    #[test]
    fn angle_parsing_and_display() {
        assert_eq!("3/6".parse::<Angle>().unwrap(), ang(1, 2));
        assert_eq!(ang(0, 5).to_string(), "0/1");
        assert_eq!(ang(7, 4).to_string(), "3/4");
        assert_eq!(ang(-1, 4).to_string(), "3/4");
        assert_eq!("1/0".parse::<Angle>().unwrap_err(), AngleError::ZeroDenominator);
        assert!("half".parse::<Angle>().is_err());
        assert!("1/-2".parse::<Angle>().is_err());
    }

    #[test]
    fn angle_map_examples() {
        assert_eq!(angle_map(&Angle::zero(), 5), Angle::zero());
        assert_eq!(angle_map(&Angle::half(), 3), Angle::half());
        let mut t = ang(1, 8);
        let mut orbit = vec![t.clone()];
        for _ in 0..4 {
            t = angle_map(&t, 2);
            orbit.push(t.clone());
        }
        assert_eq!(orbit, vec![ang(1, 8), ang(1, 4), ang(1, 2), ang(0, 1), ang(0, 1)]);
        assert_eq!(ang(1, 8).preperiod_period(2, 100), Some((3, 1)));
        assert_eq!(ang(1, 7).preperiod_period(2, 100), Some((0, 3)));
    }

    #[test]
    fn image_denominator_divides() {
        for q in 1..60i64 {
            for p in 0..q {
                let t = ang(p, q);
                for d in [2u32, 3, 5] {
                    assert!(t.denom().is_multiple_of(angle_map(&t, d).denom()));
                }
            }
        }
    }

    #[test]
    fn rotate_label_examples() {
        assert_eq!(rotate_label(&Angle::zero(), 3, 3), Angle::half());
        assert_eq!(rotate_label(&ang(1, 5), 1, 2), ang(9, 20));
        assert_eq!(rotate_label(&ang(2, 7), 6, 3), ang(2, 7));
    }

    #[test]
    fn cut_point_examples() {
        assert_eq!(cut_point_angles(4, 1), (vec![Angle::zero()], vec![Angle::half()]));
        let (z, h) = cut_point_angles(1, 2);
        assert_eq!(z, vec![ang(0, 1), ang(1, 3), ang(2, 3)]);
        assert_eq!(h, vec![ang(1, 6), ang(1, 2), ang(5, 6)]);
        let (z, h) = cut_point_angles(2, 2);
        assert!(z.iter().skip(1).all(|a| a.denom() == &BigInt::from(5)));
        assert!(h.iter().all(|a| a.denom() == &BigInt::from(10) || a == &Angle::half()));
    }

    #[test]
    fn tip_examples() {
        assert_eq!(tip_angles(2, 1), vec![ang(1, 2)]);
        assert_eq!(tip_angles(2, 2), vec![ang(1, 4), ang(3, 4)]);
        assert_eq!(tip_angles(3, 1), vec![ang(1, 3), ang(2, 3)]);
        assert_eq!(tip_angles(3, 2).len(), 6);
    }

    #[test]
    fn ray_of_z_squared() {
        let sq = Unicritical::new(1, c(0.0, 0.0)).unwrap();
        let trace = trace_ray(&sq, &Angle::zero(), &RayParams::default()).unwrap();
        assert!(trace.landed());
        assert!((trace.landing.unwrap() - c(1.0, 0.0)).norm() < 1e-9);
        for p in &trace.points {
            assert!(p.im.abs() < 1e-9 && p.re > 1.0 - 1e-9);
        }
    }

    #[test]
    fn rays_of_superattracting_odd_map_land_at_zero() {
        let m = monic(1, 1.5);
        let params = RayParams::default();
        let r0 = trace_ray(&m, &Angle::zero(), &params).unwrap();
        let r1 = trace_ray(&m, &Angle::half(), &params).unwrap();
        assert!(r0.landed() && r1.landed());
        assert!(r0.landing.unwrap().norm() < 1e-6);
        assert!(r1.landing.unwrap().norm() < 1e-6);
    }

    #[test]
    fn ray_oddness_and_potentials() {
        let m = monic(2, 15.0 / 8.0);
        let params = RayParams::default();
        for (p, q) in [(0, 1), (1, 10), (1, 7)] {
            let a = trace_ray(&m, &ang(p, q), &params).unwrap();
            let b = trace_ray(&m, &ang(p, q).add(&Angle::half()), &params).unwrap();
            assert_eq!(a.points.len(), b.points.len());
            for (x, y) in a.points.iter().zip(&b.points) {
                assert!((x + y).norm() <= 1e-6 * x.norm().max(1e-300) + 1e-12);
            }
            for (k, (z, t)) in a.points.iter().zip(&a.potentials).enumerate().take(30) {
                let want = params.eta * params.step_ratio.powi(k as i32);
                assert!((t - want).abs() <= 1e-12 * want);
                let g = green(&m, *z, 100_000, m.escape_radius()).unwrap().g;
                assert!((g - want).abs() <= 1e-6 * want, "level {k}: {g} vs {want}");
            }
        }
    }

    #[test]
    fn beta_examples() {
        let params = RayParams::default();
        let beta = |c0: Complex64| locate_beta(&Unicritical::new(1, c0).unwrap(), &params).unwrap();
        assert!((beta(c(0.0, 0.0)) - c(1.0, 0.0)).norm() < 1e-10);
        assert!((beta(c(-2.0, 0.0)) - c(2.0, 0.0)).norm() < 1e-10);
        let b = beta(c(0.0, 1.0));
        assert!(b.re > 0.0);
        assert!((b * b + c(0.0, 1.0) - b).norm() < 1e-10);
    }

    #[test]
    fn separatrix_sides() {
        let m = monic(1, 1.5);
        let sep = Separatrix::for_monic_odd(&m, &RayParams::default()).unwrap();
        assert!(sep.is_complete());
        let eps = sep.default_eps();
        let r = m.right_critical_point();
        assert_eq!(side_classify(r, &sep, eps).unwrap(), Side::Right);
        assert_eq!(side_classify(-r, &sep, eps).unwrap(), Side::Left);
        assert_eq!(side_classify(sep.pivot + c(eps / 2.0, 0.0), &sep, eps).unwrap(), Side::Near);
        for k in 0..200 {
            let z = Complex64::from_polar(0.05 + 0.02 * k as f64, 0.3 * k as f64);
            let a = side_classify(z, &sep, eps).unwrap();
            let b = side_classify(-z, &sep, eps).unwrap();
            match a {
                Side::Left => assert_eq!(b, Side::Right),
                Side::Right => assert_eq!(b, Side::Left),
                Side::Near => {}
            }
        }
    }

    #[test]
    fn incomplete_separatrix_is_an_error() {
        let m = monic(1, 1.5);
        let params = RayParams { max_levels: 2, ..RayParams::default() };
        let sep = Separatrix::for_monic_odd(&m, &params).unwrap();
        assert_eq!(side_classify(c(0.0, 0.0), &sep, 1e-3).unwrap_err(), RayError::SeparatrixIncomplete);
    }

    #[test]
    fn ray_json_shape() {
        let sq = Unicritical::new(1, c(0.0, 0.0)).unwrap();
        let params = RayParams { max_levels: 1, ..RayParams::default() };
        let trace = trace_ray(&sq, &Angle::zero(), &params).unwrap();
        let json = serde_json::to_string(&trace).unwrap();
        assert!(json.starts_with("{\"angle\":\"0/1\",\"points\":[["));
        assert!(json.ends_with(",\"landing\":null,\"status\":\"budget\"}"));
    }
}
