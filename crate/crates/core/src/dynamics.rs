//! Orbits, escape, the Green's function and Böttcher coordinates.

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::family::{MonicMap, PolyMap};
use crate::scalar::{is_finite, norm_sqr, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("starting point is not finite")]
    NonFiniteInput,
    #[error("iteration budget must be at least 1")]
    ZeroBudget,
    #[error("escape radius {given} is below the certified bound {required}")]
    EscapeRadiusTooSmall { given: f64, required: f64 },
    #[error("|z| = {modulus} is inside the Böttcher domain radius {radius}")]
    OutsideBottcherDomain { modulus: f64, radius: f64 },
}

pub type DynamicsResult<T> = Result<T, DynamicsError>;

/// Defaults for iteration budgets.
pub const MEMBERSHIP_MAX_ITER: usize = 500;
pub const RENDER_MAX_ITER: usize = 2000;

/// Points beyond this modulus are used for the Green's function tail so the
/// truncation error is far below double precision.
const GREEN_BAILOUT: f64 = 1e12;

/// Truncation threshold for the Böttcher product.
const BOTTCHER_FACTOR_TOL: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord<T: Real> {
    pub points: Vec<Complex<T>>,
    pub escaped_at: Option<usize>,
    pub final_modulus: T,
}

impl<T: Real> OrbitRecord<T> {
    pub fn escaped(&self) -> bool {
        self.escaped_at.is_some()
    }

    pub fn last(&self) -> Complex<T> {
        *self.points.last().expect("orbit has at least the starting point")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialValue<T: Real> {
    pub g: T,
    pub iterations_used: usize,
}

fn check_inputs<T: Real, M: PolyMap<T> + ?Sized>(
    map: &M,
    z0: Complex<T>,
    max_iter: usize,
    escape_radius: T,
) -> DynamicsResult<()> {
    if !is_finite(z0) {
        return Err(DynamicsError::NonFiniteInput);
    }
    if max_iter == 0 {
        return Err(DynamicsError::ZeroBudget);
    }
    let required = map.escape_radius();
    // The bound itself is computed in floating point; allow rounding slack.
    if escape_radius < required * (T::one() - T::lit(1e-12)) {
        return Err(DynamicsError::EscapeRadiusTooSmall {
            given: escape_radius.as_f64(),
            required: required.as_f64(),
        });
    }
    Ok(())
}

/// Iterates until `|z| ≥ escape_radius` or `max_iter` steps have been taken.
pub fn iterate<T: Real, M: PolyMap<T> + ?Sized>(
    map: &M,
    z0: Complex<T>,
    max_iter: usize,
    escape_radius: T,
) -> DynamicsResult<OrbitRecord<T>> {
    check_inputs(map, z0, max_iter, escape_radius)?;
    let r2 = escape_radius * escape_radius;
    let mut points = Vec::with_capacity(max_iter.min(4096) + 1);
    let mut z = z0;
    points.push(z);
    if norm_sqr(z) >= r2 {
        return Ok(OrbitRecord { points, escaped_at: Some(0), final_modulus: z.norm() });
    }
    for n in 1..=max_iter {
        z = map.eval(z);
        points.push(z);
        if !(norm_sqr(z) < r2) {
            return Ok(OrbitRecord { points, escaped_at: Some(n), final_modulus: z.norm() });
        }
    }
    Ok(OrbitRecord { points, escaped_at: None, final_modulus: z.norm() })
}

/// Escape-only variant of [`iterate`] without the orbit allocation.
/// Returns the escape index, if any.
pub fn escape_time<T: Real, M: PolyMap<T> + ?Sized>(
    map: &M,
    z0: Complex<T>,
    max_iter: usize,
    escape_radius: T,
) -> Option<usize> {
    let r2 = escape_radius * escape_radius;
    let mut z = z0;
    if !(norm_sqr(z) < r2) {
        return Some(0);
    }
    for n in 1..=max_iter {
        z = map.eval(z);
        if !(norm_sqr(z) < r2) {
            return Some(n);
        }
    }
    None
}

/// Green's function `G(z) = lim log|z_n| / D^n`.
///
/// For a leading coefficient `L` the limit is corrected by
/// `log|L| / (D - 1)`, so `G(P(z)) = D G(z)` for every map. Iteration goes
/// past the escape radius to a large bailout so the tail error is below
/// double precision.
pub fn green<T: Real, M: PolyMap<T> + ?Sized>(
    map: &M,
    z: Complex<T>,
    max_iter: usize,
    escape_radius: T,
) -> DynamicsResult<PotentialValue<T>> {
    check_inputs(map, z, max_iter, escape_radius)?;
    let bailout = escape_radius.max(T::lit(GREEN_BAILOUT));
    let b2 = bailout * bailout;
    let r2 = escape_radius * escape_radius;
    let degree = T::from_u32(map.degree()).unwrap();
    let lead_log = map.leading_coefficient().norm().ln() / (degree - T::one());

    let mut w = z;
    let mut escaped = norm_sqr(w) >= r2;
    let mut scale = T::one();
    let mut n = 0usize;
    // Extra steps past the escape radius do not count against the budget.
    let mut extra = 0usize;
    while norm_sqr(w) < b2 {
        if !escaped && n >= max_iter {
            return Ok(PotentialValue { g: T::zero(), iterations_used: n });
        }
        w = map.eval(w);
        scale = scale / degree;
        if escaped {
            extra += 1;
            if extra > 64 {
                break;
            }
        } else {
            n += 1;
        }
        if norm_sqr(w) >= r2 {
            escaped = true;
        }
    }
    let g = (w.norm().ln() + lead_log) * scale;
    Ok(PotentialValue { g: g.max(T::zero()), iterations_used: n })
}

/// Bound on `|P(z)/z^D - 1|` at modulus `r` from the coefficients.
fn tail_bound<T: Real, M: PolyMap<T> + ?Sized>(map: &M, r: T) -> T {
    let c = map.coefficients();
    let deg = c.len() - 1;
    c[..deg]
        .iter()
        .enumerate()
        .map(|(k, x)| x.norm() * r.powi(k as i32 - deg as i32))
        .fold(T::zero(), |a, b| a + b)
}

/// Radius of the certified Böttcher domain: twice the smallest radius where
/// `|P(z)/z^D - 1| ≤ 1/2`, and at least 2.
///
/// The coefficient bound is used in place of sampling; it dominates the
/// sampled maximum, so the domain is never larger than the sampled one.
pub fn bottcher_radius<T: Real, M: PolyMap<T> + ?Sized>(map: &M) -> T {
    let half = T::lit(0.5);
    let mut hi = T::one();
    while tail_bound(map, hi) > half {
        hi = hi * T::lit(2.0);
    }
    let mut lo = T::zero();
    for _ in 0..80 {
        let mid = (lo + hi) * half;
        if mid > T::zero() && tail_bound(map, mid) <= half {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (hi * T::lit(2.0)).max(T::lit(2.0))
}

/// `P(z)/z^D` evaluated through `w = 1/z`, which cannot overflow.
#[inline]
fn ratio_at<T: Real>(coeffs: &[Complex<T>], w: Complex<T>) -> Complex<T> {
    let mut acc = Complex::new(T::zero(), T::zero());
    for &c in coeffs.iter() {
        acc = acc * w + c;
    }
    acc
}

/// `log φ(z) - log z`, the convergent sum of the telescoping product.
fn bottcher_log_correction<T: Real, M: MonicMap<T> + ?Sized>(map: &M, z: Complex<T>) -> Complex<T> {
    let coeffs = map.coefficients();
    let degree = T::from_u32(map.degree()).unwrap();
    let d = map.degree() as i32;
    let mut w = z.inv();
    let mut weight = T::one();
    let mut sum = Complex::new(T::zero(), T::zero());
    for _ in 0..200 {
        let ratio = ratio_at(coeffs, w);
        weight = weight / degree;
        let delta = ratio - Complex::new(T::one(), T::zero());
        if delta.norm() <= T::lit(BOTTCHER_FACTOR_TOL) {
            break;
        }
        sum = sum + ratio.ln() * weight;
        // 1/P(z) = w^D / ratio
        w = w.powi(d) / ratio;
        if norm_sqr(w) == T::zero() {
            break;
        }
    }
    sum
}

/// Böttcher coordinate `φ(z) = z Π (P(z_n)/z_n^D)^(D^-(n+1))` for
/// `|z| ≥ bottcher_radius`.
pub fn bottcher<T: Real, M: MonicMap<T> + ?Sized>(map: &M, z: Complex<T>) -> DynamicsResult<Complex<T>> {
    if !is_finite(z) {
        return Err(DynamicsError::NonFiniteInput);
    }
    let radius = bottcher_radius(map);
    if z.norm() < radius {
        return Err(DynamicsError::OutsideBottcherDomain {
            modulus: z.norm().as_f64(),
            radius: radius.as_f64(),
        });
    }
    Ok(z * bottcher_log_correction(map, z).exp())
}

/// Inverse of [`bottcher`] on its domain: solves `φ(z) = w` by the fixed
/// point iteration `z ← z · w/φ(z)`, which contracts there.
pub fn bottcher_inverse<T: Real, M: MonicMap<T> + ?Sized>(map: &M, w: Complex<T>) -> Complex<T> {
    let mut z = w;
    for _ in 0..50 {
        let corr = bottcher_log_correction(map, z).exp();
        let next = w / corr;
        let step = (next - z).norm();
        z = next;
        if step <= T::epsilon() * T::lit(4.0) * z.norm() {
            break;
        }
    }
    z
}

/// `true` iff every critical orbit stays below `escape_radius` for
/// `max_iter` steps (a semi-decision: bounded within budget).
pub fn in_connectedness_locus<T: Real, M: PolyMap<T> + ?Sized>(
    map: &M,
    max_iter: usize,
    escape_radius: T,
) -> DynamicsResult<bool> {
    for crit in map.critical_orbit_representatives() {
        check_inputs(map, crit, max_iter, escape_radius)?;
        if escape_time(map, crit, max_iter, escape_radius).is_some() {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{monic_roots, BicriticalOdd, MonicOdd, Unicritical};
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn iterate_examples() {
        let sq = Unicritical::new(1, c(0.0, 0.0)).unwrap();
        let orbit = iterate(&sq, c(2.0, 0.0), 10, 4.0).unwrap();
        assert_eq!(orbit.escaped_at, Some(1));
        assert_eq!(orbit.points, vec![c(2.0, 0.0), c(4.0, 0.0)]);

        let basilica = Unicritical::new(1, c(-1.0, 0.0)).unwrap();
        let orbit = iterate(&basilica, c(0.0, 0.0), 50, 4.0).unwrap();
        assert!(!orbit.escaped());
        assert_eq!(orbit.points[1], c(-1.0, 0.0));
        assert_eq!(orbit.points[2], c(0.0, 0.0));

        let p3 = BicriticalOdd::new(1, c(3.0, 0.0)).unwrap();
        let r = p3.escape_radius();
        let orbit = iterate(&p3, c(1.0, 0.0), 100, r).unwrap();
        assert!(!orbit.escaped());
        let tail = &orbit.points[orbit.points.len() - 2..];
        assert!((tail[0] + tail[1]).norm() < 1e-9 && (tail[0].norm() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn iterate_errors() {
        let sq = Unicritical::new(1, c(0.0, 0.0)).unwrap();
        assert_eq!(
            iterate(&sq, c(f64::NAN, 0.0), 10, 4.0).unwrap_err(),
            DynamicsError::NonFiniteInput
        );
        assert_eq!(iterate(&sq, c(0.0, 0.0), 0, 4.0).unwrap_err(), DynamicsError::ZeroBudget);
        assert!(matches!(
            iterate(&sq, c(0.0, 0.0), 10, 1.5),
            Err(DynamicsError::EscapeRadiusTooSmall { .. })
        ));
    }

    #[test]
    fn escape_radius_certificate() {
        let maps: Vec<Box<dyn PolyMap<f64>>> = vec![
            Box::new(Unicritical::new(1, c(-2.0, 0.0)).unwrap()),
            Box::new(Unicritical::new(3, c(0.3, 1.1)).unwrap()),
            Box::new(BicriticalOdd::new(1, c(3.0, 0.0)).unwrap()),
            Box::new(BicriticalOdd::new(2, c(0.01, 0.02)).unwrap()),
            Box::new(BicriticalOdd::new(5, c(-4.0, 2.0)).unwrap()),
            Box::new(MonicOdd::from_s(2, c(0.6, 0.2)).unwrap()),
        ];
        for map in &maps {
            let r = map.escape_radius();
            for k in 0..10_000 {
                let z = Complex64::from_polar(r, k as f64 * 2.0 * std::f64::consts::PI / 10_000.0);
                assert!(map.eval(z).norm() >= 2.0 * r * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn green_examples() {
        let sq = Unicritical::new(1, c(0.0, 0.0)).unwrap();
        let g = green(&sq, c(4.0, 0.0), 100, 4.0).unwrap();
        assert!((g.g - 4f64.ln()).abs() < 1e-14);
        let basilica = Unicritical::new(1, c(-1.0, 0.0)).unwrap();
        let g = green(&basilica, c(0.0, 0.0), 100, 4.0).unwrap();
        assert_eq!(g.g, 0.0);
    }

    #[test]
    fn green_functional_equation_nonmonic() {
        let p = BicriticalOdd::new(2, c(1.2, -0.7)).unwrap();
        let r = p.escape_radius();
        for k in 0..40 {
            let z = Complex64::from_polar(0.5 + 0.1 * k as f64, 0.37 * k as f64);
            let g0 = green(&p, z, 500, r).unwrap();
            if g0.g == 0.0 {
                continue;
            }
            let g1 = green(&p, p.eval(z), 500, r).unwrap();
            assert!((g1.g - 5.0 * g0.g).abs() <= 1e-9 * g1.g, "{} vs {}", g1.g, 5.0 * g0.g);
        }
    }

    #[test]
    fn bottcher_normalisation() {
        let s = monic_roots(1, c(1.5, 0.0)).unwrap()[1];
        let m = MonicOdd::from_root(1, c(1.5, 0.0), s).unwrap();
        for turns in [0.0, 1.0 / 7.0, 2.0 / 5.0] {
            let z = Complex64::from_polar(1e6, turns * 2.0 * std::f64::consts::PI);
            let phi = bottcher(&m, z).unwrap();
            assert!((phi / z - 1.0).norm() <= 1e-4);
        }
        let err = bottcher(&m, c(0.1, 0.0)).unwrap_err();
        assert!(matches!(err, DynamicsError::OutsideBottcherDomain { .. }));
    }

    #[test]
    fn bottcher_functional_equation_and_oddness() {
        for (d, s) in [(1u32, c(0.4, 0.3)), (2, c(0.3, -0.5))] {
            let m = MonicOdd::from_s(d, s).unwrap();
            let r = bottcher_radius(&m);
            let deg = 2 * d + 1;
            for k in 0..50 {
                let z = Complex64::from_polar(r * (1.0 + 9.0 * k as f64 / 49.0), 0.71 * k as f64);
                let phi = bottcher(&m, z).unwrap();
                let lhs = bottcher(&m, m.eval(z)).unwrap();
                let rhs = crate::scalar::powu(phi, deg);
                assert!((lhs - rhs).norm() <= 1e-6 * rhs.norm());
                let neg = bottcher(&m, -z).unwrap();
                assert!((neg + phi).norm() <= 1e-9 * phi.norm());
            }
        }
    }

    #[test]
    fn bottcher_of_z_squared_is_identity() {
        let sq = Unicritical::new(1, c(0.0, 0.0)).unwrap();
        let z = c(3.0, 4.0);
        assert!((bottcher(&sq, z).unwrap() - z).norm() < 1e-15);
    }

    #[test]
    fn bottcher_inverse_round_trip() {
        let m = MonicOdd::from_s(2, c(0.3, 0.5)).unwrap();
        let r = bottcher_radius(&m);
        let z = Complex64::from_polar(r * 1.5, 0.8);
        let w = bottcher(&m, z).unwrap();
        assert!((bottcher_inverse(&m, w) - z).norm() < 1e-12 * z.norm());
    }

    #[test]
    fn connectedness_examples() {
        let check = |c0: Complex64| {
            let u = Unicritical::new(1, c0).unwrap();
            in_connectedness_locus(&u, 500, u.escape_radius()).unwrap()
        };
        assert!(check(c(-2.0, 0.0)));
        assert!(!check(c(1.0, 0.0)));
        let bic = |a: f64| {
            let p = BicriticalOdd::new(1, c(a, 0.0)).unwrap();
            in_connectedness_locus(&p, 500, p.escape_radius()).unwrap()
        };
        assert!(bic(3.0));
        assert!(!bic(10.0));
    }
}
