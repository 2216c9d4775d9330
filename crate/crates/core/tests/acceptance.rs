//! Exit criteria. Prints one line per criterion and exits non-zero if any
//! criterion fails.
//!
//! Run with `cargo test -p cbo-core --test acceptance`. Set
//! `UPDATE_GOLDEN=1` to rewrite `tests/data/golden_renders.json`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cbo_core::dynamics::bottcher;
use cbo_core::dynamics::bottcher_radius;
use cbo_core::family::{
    branner_douady, expanded_coefficients_exact, leading_coeff, leading_coeff_exact, quotient_poly, BicriticalOdd, MonicOdd,
    PolyMap,
};
use cbo_core::loci::{membership_pm, parameter_winding, select_branch, Outcome, PmParams};
use cbo_core::pcf::{
    bicritical_coding, bicritical_iterate, bicritical_return, match_center, solve_center_bicritical,
    solve_cut_point, unicritical_coding, unicritical_return,
};
use cbo_core::rays::{trace_ray, Angle, RayParams};
use cbo_core::render::{ppm_bytes, render_with_threads, Coloring, Plane, RenderJob, Viewport};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

type Check = Result<String, String>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Coefficients of `a ∫₀^z (1 - t²/d)^d dt`, expanded by repeated
/// multiplication.
fn integrated_power(d: u32, a: &BigRational) -> Vec<BigRational> {
    let factor = [BigRational::one(), BigRational::zero(), -BigRational::new(BigInt::one(), BigInt::from(d))];
    let mut poly = vec![BigRational::one()];
    for _ in 0..d {
        let mut next = vec![BigRational::zero(); poly.len() + 2];
        for (i, p) in poly.iter().enumerate() {
            for (j, f) in factor.iter().enumerate() {
                next[i + j] += p * f;
            }
        }
        poly = next;
    }
    let mut out = vec![BigRational::zero()];
    for (k, p) in poly.iter().enumerate() {
        out.push(p * a / BigRational::from_integer(BigInt::from(k + 1)));
    }
    out
}

fn leading_coefficient() -> Check {
    let samples = [(1, 1), (3, 2), (-7, 5), (22, 7), (-1, 9), (5, 1)];
    let mut checked = 0;
    for d in 1..=6u32 {
        for &(p, q) in &samples {
            let a = BigRational::new(BigInt::from(p), BigInt::from(q));
            let expanded = integrated_power(d, &a);
            ensure(expanded.len() == 2 * d as usize + 2, || format!("d={d}: degree {}", expanded.len() - 1))?;
            let sign = if d % 2 == 0 { BigRational::one() } else { -BigRational::one() };
            let want = sign * &a / BigRational::from_integer(BigInt::from(d).pow(d) * BigInt::from(2 * d + 1));
            let lead = expanded.last().unwrap();
            ensure(*lead == want, || format!("d={d} a={a}: lead {lead} != {want}"))?;
            ensure(leading_coeff_exact(d, &a).unwrap() == want, || format!("d={d}: leading_coeff_exact"))?;
            let odd = expanded_coefficients_exact(d, &a);
            let interleaved: Vec<_> = expanded.iter().skip(1).step_by(2).cloned().collect();
            ensure(odd == interleaved, || format!("d={d}: odd coefficients differ"))?;
            ensure(expanded.iter().step_by(2).all(Zero::is_zero), || format!("d={d}: even coefficient"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} exact cases"))
}

fn semiconjugacy() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = rng.gen_range(1..=5u32);
        let a = Complex64::from_polar(rng.gen_range(0.2..3.0), rng.gen_range(0.0..2.0 * PI));
        let z = Complex64::from_polar(rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0 * PI));
        let p = BicriticalOdd::new(d, a).unwrap();
        let q = quotient_poly(d, a).unwrap();
        let pz = p.eval(z);
        let err = (q.eval(z * z) - pz * pz).norm() / (1.0 + pz.norm_sqr());
        worst = worst.max(err);
    }
    ensure(worst <= 1e-9, || format!("scaled residual {worst:e}"))?;
    Ok(format!("max scaled residual {worst:.1e}"))
}

fn quotient_critical_points() -> Check {
    let q = quotient_poly(1, c(1.0, 0.0)).unwrap();
    let mut crit = q.critical_points();
    crit.sort_by(|x, y| x.re.total_cmp(&y.re));
    ensure(crit.len() == 2, || format!("{} critical points", crit.len()))?;
    let err = (crit[0] - 1.0).norm().max((crit[1] - 3.0).norm());
    ensure(err <= 1e-10, || format!("critical points {crit:?}"))?;
    Ok(format!("{{1, 3}} to {err:.1e}"))
}

fn cubic_correspondence() -> Check {
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for a in [c(1.0 / 3.0, 0.0), c(0.5, 0.0), c(0.4, 0.1)] {
        match branner_douady(1, a) {
            Ok(fit) => worst = worst.max(fit.residual),
            Err(e) => failures.push(format!("a={a}: {e}")),
        }
    }
    ensure(failures.is_empty(), || failures.join("; "))?;
    Ok(format!("max residual {worst:.1e}"))
}

fn monic_for(d: u32, a: Complex64) -> MonicOdd<f64> {
    let s = select_branch(a, d, &RayParams::default()).unwrap().expect("a landing branch");
    MonicOdd::from_root(d, a, s).unwrap()
}

fn bottcher_equation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut eq_err, mut odd_err): (f64, f64) = (0.0, 0.0);
    for (d, a) in [(1, c(1.5, 0.0)), (2, c(15.0 / 8.0, 0.0))] {
        let m = monic_for(d, a);
        let r = bottcher_radius(&m);
        let degree = m.degree();
        for _ in 0..50 {
            let z = Complex64::from_polar(rng.gen_range(1.01 * r..3.0 * r), rng.gen_range(0.0..2.0 * PI));
            let phi = bottcher(&m, z).map_err(|e| e.to_string())?;
            let image = bottcher(&m, m.eval(z)).map_err(|e| e.to_string())?;
            let power = phi.powu(degree);
            eq_err = eq_err.max((image - power).norm() / power.norm());
            let neg = bottcher(&m, -z).map_err(|e| e.to_string())?;
            odd_err = odd_err.max((neg + phi).norm());
        }
    }
    ensure(eq_err <= 1e-6 && odd_err <= 1e-9, || format!("equation {eq_err:e}, oddness {odd_err:e}"))?;
    Ok(format!("equation {eq_err:.1e} rel, oddness {odd_err:.1e}"))
}

fn ray_symmetry() -> Check {
    let params = RayParams::default();
    let mut worst: f64 = 0.0;
    for (d, a) in [(1, c(1.5, 0.0)), (2, c(15.0 / 8.0, 0.0))] {
        let m = monic_for(d, a);
        let r0 = trace_ray(&m, &Angle::zero(), &params).map_err(|e| e.to_string())?;
        let rh = trace_ray(&m, &Angle::half(), &params).map_err(|e| e.to_string())?;
        ensure(r0.points.len() == rh.points.len(), || {
            format!("d={d}: {} vs {} points", r0.points.len(), rh.points.len())
        })?;
        for (p, q) in r0.points.iter().zip(&rh.points) {
            worst = worst.max((p + q).norm() / p.norm().max(f64::MIN_POSITIVE));
        }
    }
    ensure(worst <= 1e-6, || format!("relative deviation {worst:e}"))?;
    Ok(format!("relative deviation {worst:.1e}"))
}

fn membership_battery() -> Check {
    let params = PmParams::default();
    let verdict = |a: Complex64, d: u32| membership_pm(a, d, &params).map_err(|e| e.to_string());
    let v = verdict(c(1.5, 0.0), 1)?;
    ensure(v.outcome == Outcome::Accept, || format!("a=3/2 d=1: {:?}", v.outcome))?;
    let v = verdict(c(15.0 / 8.0, 0.0), 2)?;
    ensure(v.outcome == Outcome::Accept, || format!("a=15/8 d=2: {:?}", v.outcome))?;
    let v = verdict(c(3.0, 0.0), 1)?;
    let index = v.witness.as_ref().map(|w| w.index);
    ensure(v.outcome == Outcome::Reject && index == Some(2), || {
        format!("a=3 d=1: {:?} witness {index:?}", v.outcome)
    })?;
    let v = verdict(c(-1.5, 0.0), 1)?;
    ensure(v.outcome == Outcome::Reject, || format!("a=-3/2 d=1: {:?}", v.outcome))?;
    for d in 1..=3 {
        let v = verdict(c(-1.0, 0.0), d)?;
        ensure(v.outcome != Outcome::Accept, || format!("a=-1 d={d}: Accept"))?;
    }
    let v = verdict(c(0.5, 0.0), 1)?;
    ensure(v.outcome != Outcome::Accept, || "a=1/2 d=1: Accept".to_string())?;
    Ok("8 verdicts".into())
}

fn cut_point() -> Check {
    let spec = solve_cut_point(1, 2, c(2.5, 0.0)).map_err(|e| e.to_string())?;
    let a = spec.found.unwrap();
    let want = 1.5 * 3f64.sqrt();
    ensure((a - want).norm() <= 1e-8, || format!("found {a}"))?;
    let (orbit, _) = bicritical_iterate(1, 2, a).map_err(|e| e.to_string())?;
    let err = (orbit[0] - 1.0).norm().max((orbit[1] - 3f64.sqrt()).norm()).max(orbit[2].norm());
    ensure(err <= 1e-8, || format!("orbit {orbit:?}"))?;
    Ok(format!("a = {:.12} in {} steps", a.re, spec.newton_iters))
}

fn center_correspondence() -> Check {
    let params = RayParams::default();
    let period_two = solve_center_bicritical(1, 2, c(2.2, 0.0)).map_err(|e| e.to_string())?.found.unwrap();
    let cases = [(c(1.5, 0.0), 1, c(0.0, 0.0)), (period_two, 2, c(-1.0, 0.0))];
    for (a, period, want) in cases {
        let m = match_center(a, 1, &params).map_err(|e| e.to_string())?;
        ensure(m.period == period && (m.c - want).norm() <= 1e-10, || {
            format!("a={a}: period {} c={}", m.period, m.c)
        })?;
        let left = bicritical_coding(1, period, a, &params).map_err(|e| e.to_string())?;
        let right = unicritical_coding(2, period, m.c, &params).map_err(|e| e.to_string())?;
        ensure(left == right, || format!("codings {left} vs {right}"))?;
    }
    Ok("periods 1 and 2 matched".into())
}

/// `|s|` on the circle `|a| = 3`, which bounds the rendered loci.
fn mbo_locus_radius(d: u32) -> f64 {
    let lead = leading_coeff(d, c(3.0, 0.0)).unwrap();
    lead.norm().powf(1.0 / (2 * d) as f64)
}

fn parameter_degree() -> Check {
    let params = PmParams::default();
    let mut measured = Vec::new();
    for d in 1..=2u32 {
        let w = parameter_winding(d, 10.0 * mbo_locus_radius(d), 4096, &params).map_err(|e| e.to_string())?;
        measured.push((d, w));
    }
    let report = measured.iter().map(|(d, w)| format!("d={d}: {w}")).collect::<Vec<_>>().join(", ");
    ensure(measured.iter().all(|&(d, w)| w == 2 * d as i64), || format!("winding {report}, expected 2d"))?;
    Ok(format!("winding {report}"))
}

struct Figure {
    name: &'static str,
    plane: Plane,
    width: f64,
}

const FIGURES: [Figure; 6] = [
    Figure { name: "cbo_1", plane: Plane::ParameterCbo { d: 1 }, width: 6.0 },
    Figure { name: "cbo_2", plane: Plane::ParameterCbo { d: 2 }, width: 6.0 },
    Figure { name: "cbo_3", plane: Plane::ParameterCbo { d: 3 }, width: 6.0 },
    Figure { name: "cbo_4", plane: Plane::ParameterCbo { d: 4 }, width: 6.0 },
    Figure { name: "cbo_5", plane: Plane::ParameterCbo { d: 5 }, width: 6.0 },
    Figure { name: "multibrot_3", plane: Plane::ParameterMultibrot { degree: 3 }, width: 4.5 },
];

const FIGURE_PX: u32 = 1024;
const FIGURE_ITER: usize = 500;
/// Whole-figure budget. Stated for four workers and met with fewer.
const FIGURE_BUDGET: Duration = Duration::from_secs(60);
/// Single `CBO_2` render budget.
const CBO2_BUDGET: Duration = Duration::from_secs(5);
const BUDGET_THREADS: usize = 4;

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden_renders.json")
}

fn figure_job(f: &Figure) -> RenderJob {
    let viewport = Viewport::new(c(0.0, 0.0), f.width, FIGURE_PX, FIGURE_PX).unwrap();
    RenderJob { max_iter: FIGURE_ITER, ..RenderJob::new(f.plane, viewport, Coloring::Binary) }
}

fn figure_reproduction() -> Check {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let threads = cores.min(BUDGET_THREADS);
    let mut hashes = BTreeMap::new();
    let mut cbo2_time = Duration::ZERO;
    let start = Instant::now();
    for f in &FIGURES {
        let job = figure_job(f);
        let t = Instant::now();
        let img = render_with_threads(&job, threads).map_err(|e| e.to_string())?.image;
        if f.name == "cbo_2" {
            cbo2_time = t.elapsed();
        }
        if matches!(f.plane, Plane::ParameterCbo { .. }) {
            let rot = img.differing_pixels(&img.rotated_half_turn());
            let mirror = img.differing_pixels(&img.flipped_vertically());
            ensure(rot == 0 && mirror == 0, || format!("{}: {rot} rotated, {mirror} mirrored pixels differ", f.name))?;
        }
        hashes.insert(f.name.to_string(), hex::encode(Sha256::digest(ppm_bytes(&img))));
    }
    let total = start.elapsed();

    // Rerun one figure on a different worker count.
    let rerun = render_with_threads(&figure_job(&FIGURES[0]), if threads == 1 { 3 } else { 1 })
        .map_err(|e| e.to_string())?
        .image;
    let rerun_hash = hex::encode(Sha256::digest(ppm_bytes(&rerun)));
    ensure(rerun_hash == hashes["cbo_1"], || "cbo_1 hash changed with the worker count".into())?;

    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(golden_path().parent().unwrap()).map_err(|e| e.to_string())?;
        let text = serde_json::to_string_pretty(&hashes).unwrap();
        std::fs::write(golden_path(), text + "\n").map_err(|e| e.to_string())?;
    }
    let golden: BTreeMap<String, String> =
        serde_json::from_str(&std::fs::read_to_string(golden_path()).map_err(|e| format!("golden file: {e}"))?)
            .map_err(|e| e.to_string())?;
    ensure(golden == hashes, || {
        let bad: Vec<_> = hashes.keys().filter(|k| golden.get(*k) != hashes.get(*k)).collect();
        format!("hash mismatch for {bad:?}")
    })?;

    let timing = format!("{:.1}s total, cbo_2 {:.2}s on {threads} worker(s)", total.as_secs_f64(), cbo2_time.as_secs_f64());
    ensure(total <= FIGURE_BUDGET && cbo2_time <= CBO2_BUDGET, || format!("over budget: {timing}"))?;
    Ok(timing)
}

fn gradient_check() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let rel = |f: &dyn Fn(Complex64) -> (Complex64, Complex64), x: Complex64| {
        let fd = (f(x + h).0 - f(x - h).0) / (2.0 * h);
        let exact = f(x).1;
        (fd - exact).norm() / exact.norm().max(1e-300)
    };
    for _ in 0..20 {
        let degree = rng.gen_range(2..=4u32);
        let n = rng.gen_range(1..=3u32);
        let cu = Complex64::from_polar(rng.gen_range(0.1..1.0), rng.gen_range(0.0..2.0 * PI));
        worst = worst.max(rel(&|x| unicritical_return(degree, n, x), cu));

        let d = rng.gen_range(1..=3u32);
        let a = Complex64::from_polar(rng.gen_range(1.0..2.5), rng.gen_range(0.0..2.0 * PI));
        worst = worst.max(rel(&|x| bicritical_return(d, n, x).unwrap(), a));
        let k = n.max(2);
        worst = worst.max(rel(
            &|x| {
                let (orbit, dz) = bicritical_iterate(d, k, x).unwrap();
                (orbit[k as usize], dz)
            },
            a,
        ));
    }
    ensure(worst <= 1e-4, || format!("relative error {worst:e}"))?;
    Ok(format!("60 derivatives, max relative error {worst:.1e}"))
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn() -> Check,
}

const CRITERIA: [Criterion; 12] = [
    Criterion { id: 1, name: "leading coefficient", limit: Duration::from_secs(1), run: leading_coefficient },
    Criterion { id: 2, name: "semiconjugacy", limit: Duration::from_secs(1), run: semiconjugacy },
    Criterion { id: 3, name: "quotient critical points", limit: Duration::from_secs(1), run: quotient_critical_points },
    Criterion { id: 4, name: "cubic correspondence", limit: Duration::from_secs(1), run: cubic_correspondence },
    Criterion { id: 5, name: "bottcher equation", limit: Duration::from_secs(2), run: bottcher_equation },
    Criterion { id: 6, name: "ray symmetry", limit: Duration::from_secs(5), run: ray_symmetry },
    Criterion { id: 7, name: "membership battery", limit: Duration::from_secs(30), run: membership_battery },
    Criterion { id: 8, name: "cut point", limit: Duration::from_secs(1), run: cut_point },
    Criterion { id: 9, name: "center correspondence", limit: Duration::from_secs(10), run: center_correspondence },
    Criterion { id: 10, name: "parameter map degree", limit: Duration::from_secs(30), run: parameter_degree },
    // Timed inside against the four-worker budget.
    Criterion { id: 11, name: "figure reproduction", limit: Duration::MAX, run: figure_reproduction },
    Criterion { id: 12, name: "gradient check", limit: Duration::from_secs(1), run: gradient_check },
];

fn main() -> ExitCode {
    let only: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = Vec::new();
    for crit in CRITERIA.iter().filter(|c| only.map_or(true, |id| c.id == id)) {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(crit.run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if elapsed > crit.limit => Err(format!("{msg}; took {:.2}s over {:?}", elapsed.as_secs_f64(), crit.limit)),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("criterion {:>2} PASS {} ({msg}) [{:.2}s]", crit.id, crit.name, elapsed.as_secs_f64()),
            Err(msg) => {
                println!("criterion {:>2} FAIL {} ({msg}) [{:.2}s]", crit.id, crit.name, elapsed.as_secs_f64());
                failed.push(crit.id);
            }
        }
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
