//! The polynomial families and the algebraic maps between them.
//!
//! * [`Unicritical`]: `z^(d+1) + c`.
//! * [`BicriticalOdd`]: `p_a(z) = a ∫_0^z (1 - w²/d)^d dw`, expanded as
//!   `a Σ r_k z^(2k+1)` with exact `r_k = C(d,k) (-1)^k / (d^k (2k+1))`.
//! * [`MonicOdd`]: `P_s(z) = s · p_a(z / s)` with `s^(2d) = T(a)`, where
//!   `T(a) = (-1)^d a / (d^d (2d+1))` is the leading coefficient of `p_a`.
//! * [`QuotientPoly`]: the polynomial `Q` with `Q(z²) = p_a(z)²`.

use num_bigint::BigInt;
use num_complex::Complex;
use num_integer::binomial;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly;
use crate::scalar::{is_finite, norm_sqr, powu, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FamilyError {
    #[error("parameter must be nonzero")]
    ZeroParameter,
    #[error("degree parameter d must be at least 1 (got {0})")]
    InvalidDegree(u32),
    #[error("operation only defined for d = 1 (got d = {0})")]
    DegreeUnsupported(u32),
    #[error("no affine conjugacy found; best residual {residual:e}")]
    ConjugacyNotFound { residual: f64 },
    #[error("not a bicritical odd polynomial: {0}")]
    NotBicriticalOdd(String),
    #[error("parameter is not finite")]
    NonFinite,
}

pub type FamilyResult<T> = Result<T, FamilyError>;

fn check_degree(d: u32) -> FamilyResult<()> {
    if d == 0 {
        Err(FamilyError::InvalidDegree(d))
    } else {
        Ok(())
    }
}

/// Exact `r_k`, `k = 0..=d`.
pub fn odd_ratios(d: u32) -> Vec<BigRational> {
    let dd = BigInt::from(d);
    (0..=d)
        .map(|k| {
            let num: BigInt = binomial(dd.clone(), BigInt::from(k));
            let sign = if k % 2 == 0 { BigInt::one() } else { -BigInt::one() };
            let den = num_traits::pow(dd.clone(), k as usize) * BigInt::from(2 * k + 1);
            BigRational::new(num * sign, den)
        })
        .collect()
}

/// `T(1) = (-1)^d / (d^d (2d+1))`.
pub fn leading_ratio_exact(d: u32) -> BigRational {
    let dd = BigInt::from(d);
    let den = num_traits::pow(dd, d as usize) * BigInt::from(2 * d + 1);
    let sign = if d % 2 == 0 { BigInt::one() } else { -BigInt::one() };
    BigRational::new(sign, den)
}

/// Exact `T(a)` for rational `a`.
pub fn leading_coeff_exact(d: u32, a: &BigRational) -> FamilyResult<BigRational> {
    check_degree(d)?;
    if a.is_zero() {
        return Err(FamilyError::ZeroParameter);
    }
    Ok(leading_ratio_exact(d) * a)
}

/// Exact expanded coefficients `a·r_k` of `z^(2k+1)`.
pub fn expanded_coefficients_exact(d: u32, a: &BigRational) -> Vec<BigRational> {
    odd_ratios(d).into_iter().map(|r| r * a).collect()
}

/// `T(a)` in floating point.
pub fn leading_coeff<T: Real>(d: u32, a: Complex<T>) -> FamilyResult<Complex<T>> {
    check_degree(d)?;
    if norm_sqr(a) == T::zero() {
        return Err(FamilyError::ZeroParameter);
    }
    Ok(a * T::from_rational(&leading_ratio_exact(d)))
}

/// All `2d` solutions of `s^(2d) = T(a)`, sorted by principal argument.
pub fn monic_roots<T: Real>(d: u32, a: Complex<T>) -> FamilyResult<Vec<Complex<T>>> {
    let t = leading_coeff(d, a)?;
    let n = T::from_u32(2 * d).unwrap();
    let r = t.norm().powf(T::one() / n);
    let base = t.arg() / n;
    let step = T::PI() / T::from_u32(d).unwrap();
    let mut out: Vec<(T, Complex<T>)> = (0..2 * d)
        .map(|k| {
            let mut th = base + step * T::from_u32(k).unwrap();
            if th > T::PI() {
                th = th - T::PI() - T::PI();
            }
            (th, Complex::from_polar(r, th))
        })
        .collect();
    out.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    Ok(out.into_iter().map(|(_, s)| s).collect())
}

/// A polynomial self-map of the plane.
pub trait PolyMap<T: Real>: Sync {
    /// Degree `D` of the map.
    fn degree(&self) -> u32;
    fn eval(&self, z: Complex<T>) -> Complex<T>;
    fn eval_with_derivative(&self, z: Complex<T>) -> (Complex<T>, Complex<T>);
    /// Dense coefficients in ascending powers, length `D + 1`.
    fn coefficients(&self) -> &[Complex<T>];
    fn critical_points(&self) -> Vec<Complex<T>>;

    /// Critical points whose orbits have to be followed; odd maps only need
    /// one of the symmetric pair.
    fn critical_orbit_representatives(&self) -> Vec<Complex<T>> {
        self.critical_points()
    }

    fn leading_coefficient(&self) -> Complex<T> {
        *self.coefficients().last().expect("nonempty coefficients")
    }

    /// Radius beyond which `|P(z)| ≥ 2|z|`:
    /// `max(4, 2(1 + M), (4 / |lead|)^(1/(D-1)))` with `M = max |c_k / lead|`.
    fn escape_radius(&self) -> T {
        let c = self.coefficients();
        escape_bound(&c[..c.len() - 1], self.leading_coefficient(), self.degree())
    }
}

/// `max(4, 2(1 + M), (4 / |lead|)^(1/(D-1)))` with `M = max |c_k / lead|`
/// over the non-leading coefficients.
#[inline]
pub fn escape_bound<T: Real>(lower: &[Complex<T>], lead: Complex<T>, degree: u32) -> T {
    let m = lower.iter().map(|x| (*x / lead).norm()).fold(T::zero(), T::max);
    let dm1 = T::from_u32(degree - 1).unwrap();
    let growth = (T::lit(4.0) / lead.norm()).powf(T::one() / dm1);
    T::lit(4.0).max(T::lit(2.0) * (T::one() + m)).max(growth)
}

/// Maps with leading coefficient one; the Böttcher chart is tangent to the
/// identity at infinity for these.
pub trait MonicMap<T: Real>: PolyMap<T> {}

/// `f_c(z) = z^(d+1) + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Unicritical<T: Real> {
    d: u32,
    c: Complex<T>,
    coeffs: Vec<Complex<T>>,
}

impl<T: Real> Unicritical<T> {
    pub fn new(d: u32, c: Complex<T>) -> FamilyResult<Self> {
        check_degree(d)?;
        if !is_finite(c) {
            return Err(FamilyError::NonFinite);
        }
        let mut coeffs = vec![Complex::new(T::zero(), T::zero()); d as usize + 2];
        coeffs[0] = c;
        coeffs[d as usize + 1] = Complex::new(T::one(), T::zero());
        Ok(Self { d, c, coeffs })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn c(&self) -> Complex<T> {
        self.c
    }

    /// Fixed points, roots of `z^(d+1) - z + c`.
    pub fn fixed_points(&self) -> Vec<Complex<T>> {
        let mut p = self.coeffs.clone();
        p[1] = p[1] - Complex::new(T::one(), T::zero());
        poly::roots(&p)
    }
}

impl<T: Real> PolyMap<T> for Unicritical<T> {
    fn degree(&self) -> u32 {
        self.d + 1
    }

    #[inline]
    fn eval(&self, z: Complex<T>) -> Complex<T> {
        powu(z, self.d + 1) + self.c
    }

    fn eval_with_derivative(&self, z: Complex<T>) -> (Complex<T>, Complex<T>) {
        let zd = powu(z, self.d);
        (zd * z + self.c, zd * T::from_u32(self.d + 1).unwrap())
    }

    fn coefficients(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    fn critical_points(&self) -> Vec<Complex<T>> {
        vec![Complex::new(T::zero(), T::zero())]
    }
}

impl<T: Real> MonicMap<T> for Unicritical<T> {}

/// Evaluates `z · Σ odd[k] · (z²)^k`. Exactly odd in floating point.
#[inline]
pub fn eval_odd<T: Real>(odd: &[Complex<T>], z: Complex<T>) -> Complex<T> {
    let u = z * z;
    let mut acc = Complex::new(T::zero(), T::zero());
    for &c in odd.iter().rev() {
        acc = acc * u + c;
    }
    acc * z
}

#[inline]
fn eval_odd_with_derivative<T: Real>(
    odd: &[Complex<T>],
    z: Complex<T>,
) -> (Complex<T>, Complex<T>) {
    let u = z * z;
    let zero = Complex::new(T::zero(), T::zero());
    let mut q = zero;
    let mut dq = zero;
    for &c in odd.iter().rev() {
        dq = dq * u + q;
        q = q * u + c;
    }
    // P = z q(u), P' = q(u) + 2 u q'(u)
    (q * z, q + dq * u * T::lit(2.0))
}

fn dense_from_odd<T: Real>(odd: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut dense = vec![Complex::new(T::zero(), T::zero()); 2 * odd.len()];
    for (k, &c) in odd.iter().enumerate() {
        dense[2 * k + 1] = c;
    }
    dense
}

/// `p_a` for fixed `d`, the bicritical odd normal form.
#[derive(Debug, Clone, PartialEq)]
pub struct BicriticalOdd<T: Real> {
    d: u32,
    a: Complex<T>,
    ratios: Vec<BigRational>,
    odd: Vec<Complex<T>>,
    dense: Vec<Complex<T>>,
}

impl<T: Real> BicriticalOdd<T> {
    pub fn new(d: u32, a: Complex<T>) -> FamilyResult<Self> {
        check_degree(d)?;
        if !is_finite(a) {
            return Err(FamilyError::NonFinite);
        }
        if norm_sqr(a) == T::zero() {
            return Err(FamilyError::ZeroParameter);
        }
        let ratios = odd_ratios(d);
        let odd: Vec<Complex<T>> = ratios.iter().map(|r| a * T::from_rational(r)).collect();
        let dense = dense_from_odd(&odd);
        Ok(Self { d, a, ratios, odd, dense })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn a(&self) -> Complex<T> {
        self.a
    }

    /// Exact `r_k`.
    pub fn ratios(&self) -> &[BigRational] {
        &self.ratios
    }

    /// Floating coefficients `a·r_k` of `z^(2k+1)`.
    pub fn odd_coefficients(&self) -> &[Complex<T>] {
        &self.odd
    }

    pub fn sqrt_d(&self) -> T {
        T::from_u32(self.d).unwrap().sqrt()
    }

    /// `p_a'(z) = a (1 - z²/d)^d` from the closed form.
    pub fn derivative(&self, z: Complex<T>) -> Complex<T> {
        let one = Complex::new(T::one(), T::zero());
        self.a * powu(one - z * z / T::from_u32(self.d).unwrap(), self.d)
    }

    /// `∂p_a(z)/∂a = p_1(z)`.
    pub fn parameter_derivative(&self, z: Complex<T>) -> Complex<T> {
        self.eval(z) / self.a
    }

    /// Nonzero preimages of zero, `±x_ℓ`.
    pub fn zero_preimages(&self) -> Vec<Complex<T>> {
        let us = poly::roots(&self.odd);
        us.into_iter()
            .flat_map(|u| {
                let x = u.sqrt();
                [x, -x]
            })
            .collect()
    }

    /// Fixed points other than zero.
    pub fn nonzero_fixed_points(&self) -> Vec<Complex<T>> {
        let mut q = self.odd.clone();
        q[0] = q[0] - Complex::new(T::one(), T::zero());
        poly::roots(&q)
            .into_iter()
            .flat_map(|u| {
                let x = u.sqrt();
                [x, -x]
            })
            .collect()
    }

    /// Coefficients of `z ↦ λ p_a(z/λ)`, the conjugate by `z ↦ λz`.
    pub fn conjugated_odd_coefficients(&self, lambda: Complex<T>) -> Vec<Complex<T>> {
        let l2inv = (lambda * lambda).inv();
        let mut scale = Complex::new(T::one(), T::zero());
        self.odd
            .iter()
            .map(|&c| {
                let out = c * scale;
                scale = scale * l2inv;
                out
            })
            .collect()
    }
}

impl<T: Real> PolyMap<T> for BicriticalOdd<T> {
    fn degree(&self) -> u32 {
        2 * self.d + 1
    }

    #[inline]
    fn eval(&self, z: Complex<T>) -> Complex<T> {
        eval_odd(&self.odd, z)
    }

    fn eval_with_derivative(&self, z: Complex<T>) -> (Complex<T>, Complex<T>) {
        eval_odd_with_derivative(&self.odd, z)
    }

    fn coefficients(&self) -> &[Complex<T>] {
        &self.dense
    }

    fn critical_points(&self) -> Vec<Complex<T>> {
        let x = Complex::new(self.sqrt_d(), T::zero());
        vec![x, -x]
    }

    fn critical_orbit_representatives(&self) -> Vec<Complex<T>> {
        vec![Complex::new(self.sqrt_d(), T::zero())]
    }
}

/// `P_s(z) = s · p_a(z/s)`, monic when `s^(2d) = T(a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonicOdd<T: Real> {
    d: u32,
    s: Complex<T>,
    a: Complex<T>,
    odd: Vec<Complex<T>>,
    dense: Vec<Complex<T>>,
}

impl<T: Real> MonicOdd<T> {
    /// Builds `P_s` from `s` alone; `a` is the unique value with `T(a) = s^(2d)`.
    pub fn from_s(d: u32, s: Complex<T>) -> FamilyResult<Self> {
        check_degree(d)?;
        if !is_finite(s) {
            return Err(FamilyError::NonFinite);
        }
        if norm_sqr(s) == T::zero() {
            return Err(FamilyError::ZeroParameter);
        }
        let inv_t = T::from_rational(&leading_ratio_exact(d).recip());
        let a = powu(s, 2 * d) * inv_t;
        Self::build(d, s, a)
    }

    /// Builds `P_s` for a given `p_a` and one of its [`monic_roots`].
    pub fn from_root(d: u32, a: Complex<T>, s: Complex<T>) -> FamilyResult<Self> {
        check_degree(d)?;
        if norm_sqr(a) == T::zero() || norm_sqr(s) == T::zero() {
            return Err(FamilyError::ZeroParameter);
        }
        Self::build(d, s, a)
    }

    fn build(d: u32, s: Complex<T>, a: Complex<T>) -> FamilyResult<Self> {
        let s2inv = (s * s).inv();
        let mut scale = Complex::new(T::one(), T::zero());
        let mut odd: Vec<Complex<T>> = odd_ratios(d)
            .iter()
            .map(|r| {
                let c = a * T::from_rational(r) * scale;
                scale = scale * s2inv;
                c
            })
            .collect();
        // Normalised exactly; the computed value differs from 1 by rounding only.
        odd[d as usize] = Complex::new(T::one(), T::zero());
        let dense = dense_from_odd(&odd);
        Ok(Self { d, s, a, odd, dense })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn s(&self) -> Complex<T> {
        self.s
    }

    pub fn a(&self) -> Complex<T> {
        self.a
    }

    /// `+s√d`, the critical point lying in the right-hand region.
    pub fn right_critical_point(&self) -> Complex<T> {
        self.s * T::from_u32(self.d).unwrap().sqrt()
    }

    pub fn odd_coefficients(&self) -> &[Complex<T>] {
        &self.odd
    }

    /// Maps a point of the `p_a` plane into the `P_s` plane.
    pub fn to_monic_plane(&self, x: Complex<T>) -> Complex<T> {
        x * self.s
    }

    pub fn from_monic_plane(&self, z: Complex<T>) -> Complex<T> {
        z / self.s
    }

    /// Fixed points of `P_s` (including zero).
    pub fn fixed_points(&self) -> Vec<Complex<T>> {
        let mut q = self.odd.clone();
        q[0] = q[0] - Complex::new(T::one(), T::zero());
        let mut out = vec![Complex::new(T::zero(), T::zero())];
        for u in poly::roots(&q) {
            let x = u.sqrt();
            out.push(x);
            out.push(-x);
        }
        out
    }
}

impl<T: Real> PolyMap<T> for MonicOdd<T> {
    fn degree(&self) -> u32 {
        2 * self.d + 1
    }

    #[inline]
    fn eval(&self, z: Complex<T>) -> Complex<T> {
        eval_odd(&self.odd, z)
    }

    fn eval_with_derivative(&self, z: Complex<T>) -> (Complex<T>, Complex<T>) {
        eval_odd_with_derivative(&self.odd, z)
    }

    fn coefficients(&self) -> &[Complex<T>] {
        &self.dense
    }

    fn critical_points(&self) -> Vec<Complex<T>> {
        let x = self.right_critical_point();
        vec![x, -x]
    }

    fn critical_orbit_representatives(&self) -> Vec<Complex<T>> {
        vec![self.right_critical_point()]
    }

    fn leading_coefficient(&self) -> Complex<T> {
        Complex::new(T::one(), T::zero())
    }
}

impl<T: Real> MonicMap<T> for MonicOdd<T> {}

/// The polynomial `Q_a` with `Q_a(z²) = p_a(z)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientPoly<T: Real> {
    pub d: u32,
    pub a: Complex<T>,
    /// Coefficients of `u^0 ..= u^(2d+1)`.
    pub coeffs: Vec<Complex<T>>,
}

impl<T: Real> QuotientPoly<T> {
    pub fn eval(&self, u: Complex<T>) -> Complex<T> {
        poly::horner(&self.coeffs, u)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Roots of the derivative: `d` and the squares `x_ℓ²`.
    pub fn critical_points(&self) -> Vec<Complex<T>> {
        poly::roots(&poly::derivative(&self.coeffs))
    }
}

/// Exact coefficients of the quotient for `a = 1`; scale by `a²` for general `a`.
pub fn quotient_ratios(d: u32) -> Vec<BigRational> {
    let r = odd_ratios(d);
    let mut out = vec![BigRational::zero(); 2 * d as usize + 2];
    for (k, rk) in r.iter().enumerate() {
        for (l, rl) in r.iter().enumerate() {
            out[k + l + 1] += rk * rl;
        }
    }
    out
}

pub fn quotient_poly<T: Real>(d: u32, a: Complex<T>) -> FamilyResult<QuotientPoly<T>> {
    check_degree(d)?;
    if norm_sqr(a) == T::zero() {
        return Err(FamilyError::ZeroParameter);
    }
    let a2 = a * a;
    let coeffs = quotient_ratios(d).iter().map(|r| a2 * T::from_rational(r)).collect();
    Ok(QuotientPoly { d, a, coeffs })
}

/// `Q_{ã,b}(z) = z³ - 3ã²z + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicBD<T: Real> {
    pub a_tilde: Complex<T>,
    pub b: Complex<T>,
}

impl<T: Real> CubicBD<T> {
    pub fn eval(&self, z: Complex<T>) -> Complex<T> {
        z * z * z - self.a_tilde * self.a_tilde * z * T::lit(3.0) + self.b
    }

    pub fn derivative(&self, z: Complex<T>) -> Complex<T> {
        (z * z - self.a_tilde * self.a_tilde) * T::lit(3.0)
    }

    pub fn critical_points(&self) -> [Complex<T>; 2] {
        [self.a_tilde, -self.a_tilde]
    }
}

/// `z ↦ αz + β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap<T: Real> {
    pub scale: Complex<T>,
    pub offset: Complex<T>,
}

impl<T: Real> AffineMap<T> {
    pub fn new(scale: Complex<T>, offset: Complex<T>) -> FamilyResult<Self> {
        if norm_sqr(scale) == T::zero() {
            return Err(FamilyError::ZeroParameter);
        }
        Ok(Self { scale, offset })
    }

    pub fn identity() -> Self {
        Self {
            scale: Complex::new(T::one(), T::zero()),
            offset: Complex::new(T::zero(), T::zero()),
        }
    }

    pub fn scaling(k: Complex<T>) -> FamilyResult<Self> {
        Self::new(k, Complex::new(T::zero(), T::zero()))
    }

    #[inline]
    pub fn apply(&self, z: Complex<T>) -> Complex<T> {
        self.scale * z + self.offset
    }

    pub fn inverse(&self) -> Self {
        let inv = self.scale.inv();
        Self { scale: inv, offset: -self.offset * inv }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            scale: self.scale * other.scale,
            offset: self.scale * other.offset + self.offset,
        }
    }
}

/// An affine conjugacy from the `d = 1` quotient polynomial to a cubic of the
/// form `Q_{ã, 2ã³-2ã}`, with its measured residual.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicConjugacy<T: Real> {
    pub cubic: CubicBD<T>,
    pub map: AffineMap<T>,
    pub residual: T,
}

pub const BD_RESIDUAL_TOL: f64 = 1e-8;

/// 50 fixed sample points spread over the disk of radius 2.
pub fn disk_samples<T: Real>(n: usize, radius: T) -> Vec<Complex<T>> {
    let golden = T::PI() * (T::lit(3.0) - T::lit(5.0).sqrt());
    (0..n)
        .map(|j| {
            let jf = T::from_usize(j).unwrap();
            let r = radius * ((jf + T::lit(0.5)) / T::from_usize(n).unwrap()).sqrt();
            Complex::from_polar(r, golden * jf)
        })
        .collect()
}

/// `max |ψ(Q_a(z)) - C(ψ(z))|` over the samples.
pub fn conjugacy_residual<T: Real>(
    quotient: &QuotientPoly<T>,
    cubic: &CubicBD<T>,
    map: &AffineMap<T>,
    samples: &[Complex<T>],
) -> T {
    samples
        .iter()
        .map(|&z| (map.apply(quotient.eval(z)) - cubic.eval(map.apply(z))).norm())
        .fold(T::zero(), T::max)
}

/// Best affine map `ψ` conjugating the `d = 1` quotient to the given cubic.
///
/// Matching the cubic's leading coefficient forces `α² = a²/9`; the offset is
/// fixed by sending one critical point of the quotient (`1` or `3`) to one
/// of `±ã`. All eight choices are tried and the smallest residual wins.
pub fn fit_cubic_conjugacy<T: Real>(
    a: Complex<T>,
    cubic: CubicBD<T>,
) -> FamilyResult<CubicConjugacy<T>> {
    let quotient = quotient_poly(1, a)?;
    let samples = disk_samples(50, T::lit(2.0));
    let alpha = a / T::lit(3.0);
    let mut best: Option<CubicConjugacy<T>> = None;
    for scale in [alpha, -alpha] {
        for crit in [T::one(), T::lit(3.0)] {
            for target in cubic.critical_points() {
                let map = AffineMap::new(scale, target - scale * crit)?;
                let residual = conjugacy_residual(&quotient, &cubic, &map, &samples);
                if best.as_ref().map_or(true, |b| residual < b.residual) {
                    best = Some(CubicConjugacy { cubic, map, residual });
                }
            }
        }
    }
    Ok(best.expect("eight candidates"))
}

/// The Branner–Douady correspondence with the stated parametrisation
/// `ã = 9a²`, `b = 2ã³ - 2ã`.
///
/// Returns [`FamilyError::ConjugacyNotFound`] when no candidate map reaches
/// [`BD_RESIDUAL_TOL`]. Fixed-point multipliers show that `Q_a` is
/// conjugate to `Q_{ã,b}` only for `ã = ±a/3`, so for generic `a` this
/// reports the residual and fails; see [`cubic_normal_form`].
pub fn branner_douady<T: Real>(d: u32, a: Complex<T>) -> FamilyResult<CubicConjugacy<T>> {
    if d != 1 {
        return Err(FamilyError::DegreeUnsupported(d));
    }
    if norm_sqr(a) == T::zero() {
        return Err(FamilyError::ZeroParameter);
    }
    let a_tilde = a * a * T::lit(9.0);
    let b = a_tilde * a_tilde * a_tilde * T::lit(2.0) - a_tilde * T::lit(2.0);
    let fit = fit_cubic_conjugacy(a, CubicBD { a_tilde, b })?;
    if fit.residual.as_f64() > BD_RESIDUAL_TOL {
        return Err(FamilyError::ConjugacyNotFound { residual: fit.residual.as_f64() });
    }
    Ok(fit)
}

/// The member of `{Q_{ã, 2ã³-2ã}}` that is affinely conjugate to the `d = 1`
/// quotient `Q_a`: `ã = a/3`, realised by `ψ(u) = (a/3)(u - 2)`.
///
/// `ψ` sends the critical point `3 = x_1²` (a preimage of the fixed point 0)
/// to `ã` and 0 to `-2ã`, which is the defining condition `Q(ã) = -2ã`.
pub fn cubic_normal_form<T: Real>(d: u32, a: Complex<T>) -> FamilyResult<CubicConjugacy<T>> {
    if d != 1 {
        return Err(FamilyError::DegreeUnsupported(d));
    }
    if norm_sqr(a) == T::zero() {
        return Err(FamilyError::ZeroParameter);
    }
    let a_tilde = a / T::lit(3.0);
    let b = a_tilde * a_tilde * a_tilde * T::lit(2.0) - a_tilde * T::lit(2.0);
    fit_cubic_conjugacy(a, CubicBD { a_tilde, b })
}

/// Result of [`normalize_bicritical`].
#[derive(Debug, Clone, PartialEq)]
pub struct NormalForm<T: Real> {
    pub d: u32,
    pub a: Complex<T>,
    /// `φ(z) = (√d/x) z`, with `φ ∘ f ∘ φ⁻¹ = p_a`.
    pub map: AffineMap<T>,
}

pub const NORMALIZE_TOL: f64 = 1e-8;

/// Recovers `(d, a)` and the scaling conjugating an odd polynomial (given by
/// its coefficients of `z, z³, …, z^(2d+1)`) to `p_a`.
///
/// The derivative, as a polynomial `g(u)` in `u = z²`, must be
/// `A (1 - u/x²)^d`; `x²` is read off as the mean of the roots of `g` and the
/// whole coefficient vector is compared against that factorisation.
pub fn normalize_bicritical<T: Real>(odd_coeffs: &[Complex<T>]) -> FamilyResult<NormalForm<T>> {
    if odd_coeffs.len() < 2 {
        return Err(FamilyError::NotBicriticalOdd("degree must be at least 3".into()));
    }
    if odd_coeffs.iter().any(|c| !is_finite(*c)) {
        return Err(FamilyError::NonFinite);
    }
    let d = (odd_coeffs.len() - 1) as u32;
    let lead = odd_coeffs[d as usize];
    if norm_sqr(lead) == T::zero() {
        return Err(FamilyError::NotBicriticalOdd("vanishing leading coefficient".into()));
    }
    let g: Vec<Complex<T>> = odd_coeffs
        .iter()
        .enumerate()
        .map(|(k, &c)| c * T::from_usize(2 * k + 1).unwrap())
        .collect();
    let a = odd_coeffs[0];
    if norm_sqr(a) == T::zero() {
        return Err(FamilyError::NotBicriticalOdd(
            "derivative vanishes at 0, so the critical points are not ±x with x ≠ 0".into(),
        ));
    }
    let gd = g[d as usize];
    let dn = T::from_u32(d).unwrap();
    let u0 = -g[d as usize - 1] / (gd * dn);
    if norm_sqr(u0) == T::zero() || !is_finite(u0) {
        return Err(FamilyError::NotBicriticalOdd("critical points collapse to 0".into()));
    }
    // Compare g/g_d with (u - u0)^d coefficientwise.
    let tol = T::lit(NORMALIZE_TOL);
    for k in 0..=d {
        let binom = T::from_rational(&BigRational::from_integer(binomial(
            BigInt::from(d),
            BigInt::from(k),
        )));
        let expected = powu(-u0, d - k) * binom;
        let got = g[k as usize] / gd;
        let scale = binom * u0.norm().powi((d - k) as i32);
        if (got - expected).norm() > tol * scale.max(T::min_positive_value()) {
            return Err(FamilyError::NotBicriticalOdd(format!(
                "derivative does not factor as A(1 - z²/x²)^{d} (coefficient {k})"
            )));
        }
    }
    let x = u0.sqrt();
    let k = Complex::new(dn.sqrt(), T::zero()) / x;
    Ok(NormalForm { d, a, map: AffineMap::scaling(k)? })
}

/// `p_1(√d) = ∫_0^√d (1 - w²/d)^d dw`, the critical value of `p_1`.
pub fn critical_integral(d: u32) -> f64 {
    let r = odd_ratios(d);
    // p_1(√d) = √d Σ r_k d^k
    let dd = BigRational::from_integer(BigInt::from(d));
    let weighted: BigRational = r
        .iter()
        .enumerate()
        .fold(BigRational::zero(), |acc, (k, x)| acc + x * num_traits::pow(dd.clone(), k));
    (d as f64).sqrt() * crate::scalar::rational_to_f64(&weighted)
}

/// Exact sign of the leading ratio, used by tests and the CLI.
pub fn leading_ratio_is_positive(d: u32) -> bool {
    leading_ratio_exact(d).is_positive()
}
