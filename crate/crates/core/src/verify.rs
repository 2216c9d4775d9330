//! Invariant suite run by `cbo verify`. Sampling is deterministic.

use num_complex::Complex64;
use serde::Serialize;

use crate::dynamics::bottcher;
use crate::family::{disk_samples, leading_coeff_exact, odd_ratios, quotient_poly, BicriticalOdd, MonicOdd, PolyMap};
use crate::loci::{membership_pm, select_branch, PmParams};
use crate::pcf::{bicritical_return, unicritical_return};
use crate::rays::{trace_ray, Angle, RayParams};
use crate::render::{render_with_threads, Coloring, Plane, RenderJob, Viewport};

#[derive(Debug, Clone, Serialize)]
pub struct InvariantReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Outcome = Result<String, String>;

fn within(value: f64, tol: f64, what: &str) -> Outcome {
    if value <= tol {
        Ok(format!("{what} {value:.1e} <= {tol:.0e}"))
    } else {
        Err(format!("{what} {value:.3e} > {tol:.0e}"))
    }
}

fn parameters(n: usize) -> Vec<Complex64> {
    disk_samples(n, 3.0).into_iter().filter(|a| a.norm() > 0.05).collect()
}

fn leading_coefficient() -> Outcome {
    for d in 1..=6 {
        let a = num_rational::BigRational::new(7.into(), 3.into());
        let lead = odd_ratios(d).last().unwrap() * &a;
        if lead != leading_coeff_exact(d, &a).unwrap() {
            return Err(format!("d={d}"));
        }
    }
    Ok("d = 1..6 exact".into())
}

fn oddness_and_conjugation() -> Outcome {
    let zs = disk_samples::<f64>(40, 2.0);
    for d in 1..=5 {
        for &a in &parameters(20) {
            let p = BicriticalOdd::new(d, a).unwrap();
            let q = BicriticalOdd::new(d, a.conj()).unwrap();
            for &z in &zs {
                if p.eval(-z) != -p.eval(z) || q.eval(z.conj()) != p.eval(z).conj() {
                    return Err(format!("d={d} a={a} z={z}"));
                }
            }
        }
    }
    Ok("exact on 4000 samples".into())
}

fn semiconjugacy() -> Outcome {
    let mut worst: f64 = 0.0;
    for d in 1..=5 {
        for &a in &parameters(20) {
            let p = BicriticalOdd::new(d, a).unwrap();
            let q = quotient_poly(d, a).unwrap();
            for z in disk_samples::<f64>(20, 2.0) {
                let pz = p.eval(z);
                worst = worst.max((q.eval(z * z) - pz * pz).norm() / (1.0 + pz.norm_sqr()));
            }
        }
    }
    within(worst, 1e-9, "scaled residual")
}

fn bottcher_equation() -> Outcome {
    let (mut eq, mut odd): (f64, f64) = (0.0, 0.0);
    for d in 1..=2 {
        for s in [Complex64::new(1.1, 0.3), Complex64::new(-0.4, 0.9)] {
            let m = MonicOdd::from_s(d, s).unwrap();
            let r = crate::dynamics::bottcher_radius(&m);
            for z in disk_samples::<f64>(50, 3.0 * r) {
                if z.norm() <= 1.01 * r {
                    continue;
                }
                let phi = bottcher(&m, z).map_err(|e| e.to_string())?;
                let image = bottcher(&m, m.eval(z)).map_err(|e| e.to_string())?;
                let power = phi.powu(m.degree());
                eq = eq.max((image - power).norm() / power.norm());
                odd = odd.max((bottcher(&m, -z).map_err(|e| e.to_string())? + phi).norm());
            }
        }
    }
    let eq = within(eq, 1e-6, "functional equation")?;
    Ok(format!("{eq}, {}", within(odd, 1e-9, "oddness")?))
}

fn ray_symmetry() -> Outcome {
    let params = RayParams::default();
    let mut worst: f64 = 0.0;
    for (d, a) in [(1, Complex64::new(1.5, 0.0)), (2, Complex64::new(15.0 / 8.0, 0.0))] {
        let s = select_branch(a, d, &params)
            .map_err(|e| e.to_string())?
            .ok_or_else(|| format!("no branch for a={a}"))?;
        let m = MonicOdd::from_root(d, a, s).map_err(|e| e.to_string())?;
        let r0 = trace_ray(&m, &Angle::zero(), &params).map_err(|e| e.to_string())?;
        let rh = trace_ray(&m, &Angle::half(), &params).map_err(|e| e.to_string())?;
        if r0.points.len() != rh.points.len() {
            return Err(format!("d={d}: point counts differ"));
        }
        for (p, q) in r0.points.iter().zip(&rh.points) {
            worst = worst.max((p + q).norm() / p.norm().max(f64::MIN_POSITIVE));
        }
    }
    within(worst, 1e-6, "relative deviation")
}

fn membership_symmetry() -> Outcome {
    let params = PmParams::default();
    for a in disk_samples::<f64>(24, 3.0).into_iter().filter(|a| a.norm() > 1.1 && a.im.abs() > 1e-3) {
        let v = membership_pm(a, 1, &params).map_err(|e| e.to_string())?;
        let w = membership_pm(a.conj(), 1, &params).map_err(|e| e.to_string())?;
        if (v.outcome, v.reason) != (w.outcome, w.reason) {
            return Err(format!("a={a}: {:?} vs {:?}", v.outcome, w.outcome));
        }
    }
    Ok("conjugate verdicts agree".into())
}

fn render_invariants() -> Outcome {
    let vp = Viewport::new(Complex64::new(0.0, 0.0), 6.0, 128, 128).map_err(|e| e.to_string())?;
    let job = RenderJob { max_iter: 200, ..RenderJob::new(Plane::ParameterCbo { d: 2 }, vp, Coloring::Binary) };
    let one = render_with_threads(&job, 1).map_err(|e| e.to_string())?.image;
    let many = render_with_threads(&job, 3).map_err(|e| e.to_string())?.image;
    if one != many {
        return Err("worker count changed the bytes".into());
    }
    let rot = one.differing_pixels(&one.rotated_half_turn());
    let mirror = one.differing_pixels(&one.flipped_vertically());
    if rot + mirror > 0 {
        return Err(format!("{rot} rotated, {mirror} mirrored pixels differ"));
    }
    Ok("deterministic and symmetric".into())
}

fn newton_derivatives() -> Outcome {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let rel = |f: &dyn Fn(Complex64) -> (Complex64, Complex64), x: Complex64| {
        let fd = (f(x + h).0 - f(x - h).0) / (2.0 * h);
        let exact = f(x).1;
        (fd - exact).norm() / exact.norm().max(1e-300)
    };
    for (k, x) in disk_samples::<f64>(20, 1.0).into_iter().enumerate() {
        let n = 1 + (k % 3) as u32;
        worst = worst.max(rel(&|c| unicritical_return(2 + (k % 3) as u32, n, c), x * 0.8));
        let a = x + x / x.norm().max(1e-3) * 1.2;
        worst = worst.max(rel(&|a| bicritical_return(1 + (k % 2) as u32, n, a).unwrap(), a));
    }
    within(worst, 1e-4, "relative derivative error")
}

/// Runs every invariant and reports each one.
pub fn run_invariants() -> Vec<InvariantReport> {
    let checks: [(&'static str, fn() -> Outcome); 8] = [
        ("leading coefficient", leading_coefficient),
        ("oddness and conjugation", oddness_and_conjugation),
        ("quotient semiconjugacy", semiconjugacy),
        ("bottcher equation", bottcher_equation),
        ("ray symmetry", ray_symmetry),
        ("membership conjugation symmetry", membership_symmetry),
        ("render determinism and symmetry", render_invariants),
        ("newton derivatives", newton_derivatives),
    ];
    checks
        .iter()
        .map(|&(name, check)| {
            let (passed, detail) = match check() {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            InvariantReport { name, passed, detail }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for r in run_invariants() {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
