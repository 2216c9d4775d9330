//! Dense complex polynomials in ascending-power order and a simultaneous
//! root finder (Aberth–Ehrlich) used for fixed points, critical points and
//! the normal-form checks.

use num_complex::Complex;

use crate::scalar::{norm_sqr, Real};

/// Evaluates `Σ c_k z^k` by Horner's rule.
pub fn horner<T: Real>(coeffs: &[Complex<T>], z: Complex<T>) -> Complex<T> {
    coeffs
        .iter()
        .rev()
        .fold(Complex::new(T::zero(), T::zero()), |acc, &c| acc * z + c)
}

/// Value and first derivative in one pass.
pub fn horner_with_derivative<T: Real>(
    coeffs: &[Complex<T>],
    z: Complex<T>,
) -> (Complex<T>, Complex<T>) {
    let zero = Complex::new(T::zero(), T::zero());
    let mut p = zero;
    let mut dp = zero;
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

pub fn derivative<T: Real>(coeffs: &[Complex<T>]) -> Vec<Complex<T>> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| c * T::from_usize(k).unwrap())
        .collect()
}

/// Strips trailing (highest-power) zero coefficients.
pub fn trim<T: Real>(coeffs: &[Complex<T>]) -> &[Complex<T>] {
    let mut n = coeffs.len();
    while n > 0 && coeffs[n - 1].re == T::zero() && coeffs[n - 1].im == T::zero() {
        n -= 1;
    }
    &coeffs[..n]
}

/// All complex roots of a polynomial, with multiplicity.
///
/// Aberth–Ehrlich iteration from points on a circle of the Cauchy radius,
/// followed by a few plain Newton polishing steps per root. Roots of
/// multiplicity `m` are only accurate to about `eps^(1/m)`.
pub fn roots<T: Real>(coeffs: &[Complex<T>]) -> Vec<Complex<T>> {
    let coeffs = trim(coeffs);
    let n = coeffs.len().saturating_sub(1);
    if n == 0 {
        return Vec::new();
    }
    let lead = coeffs[n];
    let monic: Vec<Complex<T>> = coeffs.iter().map(|&c| c / lead).collect();
    if n == 1 {
        return vec![-monic[0]];
    }
    let dmonic = derivative(&monic);

    let radius = monic[..n]
        .iter()
        .map(|c| c.norm())
        .fold(T::zero(), T::max)
        + T::one();
    let two_pi = T::PI() + T::PI();
    let nn = T::from_usize(n).unwrap();
    // Offset angle so symmetric polynomials do not start on a symmetry axis.
    let phase = T::lit(0.4);
    let mut z: Vec<Complex<T>> = (0..n)
        .map(|k| {
            let t = two_pi * T::from_usize(k).unwrap() / nn + phase;
            Complex::from_polar(radius * T::lit(0.5), t)
        })
        .collect();

    let tol = T::epsilon() * T::lit(4.0);
    for _ in 0..500 {
        let mut max_step = T::zero();
        for i in 0..n {
            let p = horner(&monic, z[i]);
            let dp = horner(&dmonic, z[i]);
            if norm_sqr(p) == T::zero() {
                continue;
            }
            let ratio = p / dp;
            let mut sum = Complex::new(T::zero(), T::zero());
            for j in 0..n {
                if j != i {
                    let diff = z[i] - z[j];
                    if norm_sqr(diff) > T::zero() {
                        sum = sum + Complex::new(T::one(), T::zero()) / diff;
                    }
                }
            }
            let denom = Complex::new(T::one(), T::zero()) - ratio * sum;
            let step = if norm_sqr(denom) > T::zero() { ratio / denom } else { ratio };
            if is_usable(step) {
                z[i] = z[i] - step;
                let rel = step.norm() / (T::one() + z[i].norm());
                max_step = max_step.max(rel);
            }
        }
        if max_step <= tol {
            break;
        }
    }
    for zi in z.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = horner_with_derivative(&monic, *zi);
            if norm_sqr(dp) == T::zero() {
                break;
            }
            let step = p / dp;
            if !is_usable(step) || step.norm() > T::lit(1e-6) * (T::one() + zi.norm()) {
                break;
            }
            *zi = *zi - step;
        }
    }
    z
}

fn is_usable<T: Real>(z: Complex<T>) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Multiplies two polynomials.
pub fn mul<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Vec<Complex<T>> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Complex::new(T::zero(), T::zero()); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = out[i + j] + x * y;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        v
    }

    #[test]
    fn horner_and_derivative() {
        // 1 + 2z + 3z^2 at z = 2: 17, derivative 2 + 6z = 14
        let p = [c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)];
        let (v, dv) = horner_with_derivative(&p, c(2.0, 0.0));
        assert_eq!(v, c(17.0, 0.0));
        assert_eq!(dv, c(14.0, 0.0));
        assert_eq!(horner(&p, c(2.0, 0.0)), v);
    }

    #[test]
    fn roots_of_cubic() {
        // (z-1)(z-2)(z+3) = z^3 - 7z + 6
        let r = sorted(roots(&[c(6.0, 0.0), c(-7.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]));
        let want = [c(-3.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)];
        for (a, b) in r.iter().zip(want.iter()) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn roots_of_unity() {
        let mut p = vec![c(0.0, 0.0); 8];
        p[0] = c(-1.0, 0.0);
        p[7] = c(1.0, 0.0);
        for z in roots(&p) {
            assert!((z.norm() - 1.0).abs() < 1e-13);
            assert!((crate::scalar::powu(z, 7) - c(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn trailing_zeros_ignored() {
        let r = roots(&[c(-2.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(r.len(), 1);
        assert!((r[0] - c(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn product_matches_expansion() {
        let a = [c(1.0, 0.0), c(1.0, 0.0)];
        let b = [c(-1.0, 0.0), c(1.0, 0.0)];
        assert_eq!(mul(&a, &b), vec![c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
    }
}
