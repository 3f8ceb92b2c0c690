//! Acceptance suite: one pass/fail line per criterion, nonzero exit on any failure.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use slopebound_core::bounds::{event_functionals, interpolated_lq_bound};
use slopebound_core::harness::monte_carlo::SimulationReport;
use slopebound_core::harness::{
    monte_carlo, rate_sweep, DesignKind, DesignSpec, SignalSpec, SweepAxis, SweepConfig, TrialConfig,
};
use slopebound_core::norms::{
    best_s_term_error_star, lq_norm, lr_compressibility_bound, NormOrder, WeightSchedule,
};
use slopebound_core::prox::prox_sorted_l1;
use slopebound_core::re::{check_prop2_containment, check_prop3_containment, check_sre_in_wre, ConeSpec};
use slopebound_core::solver::{lasso_fit, slope_fit, ProblemInstance, SolverConfig};
use slopebound_core::weights::{
    capital_lambda_q, lasso_lambda_min, slope_weights, SlopeWeightConfig, DEFAULT_SLOPE_A,
};
use slopebound_core::Estimator;

const PROX_TOL: f64 = 1e-5;
const PROX_BUDGET: Duration = Duration::from_secs(10);
const BEST_APPROX_TOL: f64 = 1e-12;
const BEST_APPROX_BUDGET: Duration = Duration::from_secs(30);
const OBJECTIVE_TOL: f64 = 1e-8;
/// Relative rounding slack for inequalities that hold exactly in real arithmetic.
const ROUNDING: f64 = 1e-12;
const COVERAGE_MIN: f64 = 0.95;
const SIMULATION_BUDGET: Duration = Duration::from_secs(300);
const RATE_SLOPE: (f64, f64) = (0.7, 1.3);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn sorted_weights(rng: &mut ChaCha8Rng, p: usize, hi: f64) -> Vec<f64> {
    let mut w: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..hi)).collect();
    w.sort_by(|a, b| b.total_cmp(a));
    w
}

/// `½‖x − v‖² + Σ w_j x♯_j` straight from the definition.
fn prox_objective(x: &[f64], v: &[f64], w: &[f64]) -> f64 {
    let mut a: Vec<f64> = x.iter().map(|e| e.abs()).collect();
    a.sort_by(|p, q| q.total_cmp(p));
    0.5 * x.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        + a.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Exact line searches along every direction in `{−1,0,1}^p` until none helps.
/// The kinks of the objective lie on hyperplanes `x_i = 0` and `x_i = ±x_j`,
/// whose arrangement has all its extreme rays in that direction set.
fn prox_brute_force(v: &[f64], w: &[f64]) -> Vec<f64> {
    let p = v.len();
    let dirs: Vec<Vec<f64>> = (0..3usize.pow(p as u32))
        .map(|code| (0..p).map(|k| (code / 3usize.pow(k as u32) % 3) as f64 - 1.0).collect::<Vec<f64>>())
        .filter(|d| d.iter().any(|&e| e != 0.0))
        .collect();
    let span = 2.0 * (v.iter().map(|e| e.abs()).sum::<f64>() + w.iter().sum::<f64>() + 1.0);
    let mut x = vec![0.0; p];
    let mut fx = prox_objective(&x, v, w);
    for _ in 0..10_000 {
        let before = fx;
        for d in &dirs {
            let along = |t: f64| {
                let y: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + t * b).collect();
                prox_objective(&y, v, w)
            };
            let t = golden_section(along, -span, span);
            let ft = along(t);
            if ft < fx {
                x.iter_mut().zip(d).for_each(|(a, b)| *a += t * b);
                fx = ft;
            }
        }
        if before - fx <= 1e-16 * (1.0 + fx.abs()) {
            break;
        }
    }
    x
}

fn criterion_prox() -> Outcome {
    let start = Instant::now();
    let mut r = rng(101);
    let mut worst: f64 = 0.0;
    for k in 0..200 {
        let p = 1 + k % 3;
        let v: Vec<f64> = (0..p).map(|_| r.random_range(-4.0..4.0)).collect();
        let w = sorted_weights(&mut r, p, 3.0);
        let fast = prox_sorted_l1(&v, &WeightSchedule::new(w.clone()).unwrap()).unwrap();
        let slow = prox_brute_force(&v, &w);
        for (a, b) in fast.iter().zip(&slow) {
            worst = worst.max((a - b).abs());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= PROX_TOL && elapsed < PROX_BUDGET,
        format!("200 draws, max |diff| = {worst:.2e} (tol {PROX_TOL:.0e}), {:.2}s", elapsed.as_secs_f64()),
    )
}

fn sorted_norm(v: &[f64], w: &[f64]) -> f64 {
    let mut a: Vec<f64> = v.iter().map(|e| e.abs()).collect();
    a.sort_by(|p, q| q.total_cmp(p));
    a.iter().zip(w).map(|(x, y)| x * y).sum()
}

fn criterion_best_approx() -> Outcome {
    let start = Instant::now();
    let mut r = rng(102);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for _ in 0..500 {
        let p = r.random_range(1..=8);
        let w = sorted_weights(&mut r, p, 2.0);
        let mut beta: Vec<f64> = (0..p).map(|_| r.sample(StandardNormal)).collect();
        if r.random_bool(0.3) && p > 1 {
            beta[1] = -beta[0];
        }
        let ws = WeightSchedule::new(w.clone()).unwrap();
        for s in 0..=p {
            let mut exhaustive = f64::INFINITY;
            for mask in 0u32..(1 << p) {
                if mask.count_ones() as usize != s {
                    continue;
                }
                let resid: Vec<f64> = (0..p).map(|j| if mask & (1 << j) != 0 { 0.0 } else { beta[j] }).collect();
                exhaustive = exhaustive.min(sorted_norm(&resid, &w));
            }
            let fast = best_s_term_error_star(&beta, &ws, s).unwrap();
            worst = worst.max((fast - exhaustive).abs() / (1.0 + exhaustive));
            cases += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= BEST_APPROX_TOL && elapsed < BEST_APPROX_BUDGET,
        format!("{cases} (beta, w, s) cases, max rel diff = {worst:.2e}, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn criterion_slope_lasso() -> Outcome {
    let mut r = rng(103);
    let mut worst: f64 = 0.0;
    let cfg = SolverConfig::default();
    for _ in 0..50 {
        let (n, p) = (30, 10);
        let x: Array2<f64> = Array2::from_shape_simple_fn((n, p), || r.sample(StandardNormal));
        let y: Array1<f64> = Array1::from_shape_simple_fn(n, || r.sample(StandardNormal));
        let lambda = r.random_range(0.01..1.0);
        let inst = ProblemInstance::new(x, y, 1.0).unwrap();
        let lasso = lasso_fit(&inst, lambda, &cfg).unwrap();
        let slope = slope_fit(&inst, &WeightSchedule::constant(p, lambda).unwrap(), &cfg).unwrap();
        worst = worst.max((lasso.objective - slope.objective).abs());
    }
    outcome(worst <= OBJECTIVE_TOL, format!("50 instances (30,10), max |objective diff| = {worst:.2e}"))
}

fn q_draw(r: &mut ChaCha8Rng) -> NormOrder {
    if r.random_bool(0.2) {
        NormOrder::Infinity
    } else {
        NormOrder::Finite(r.random_range(2.0..12.0))
    }
}

fn random_u(r: &mut ChaCha8Rng, p: usize) -> Vec<f64> {
    let sparse = r.random_bool(0.5);
    let mut u: Vec<f64> = (0..p)
        .map(|_| if sparse && r.random_bool(0.7) { 0.0 } else { r.sample(StandardNormal) })
        .collect();
    if u.iter().all(|&v| v == 0.0) {
        u[0] = 1.0;
    }
    u
}

fn criterion_chain() -> Outcome {
    let mut r = rng(104);
    let mut violations = 0;
    for _ in 0..10_000 {
        let n = r.random_range(5..60);
        let p = r.random_range(2..120);
        let s = r.random_range(1..=p);
        let sigma = r.random_range(0.1..3.0);
        let gamma = r.random_range(0.1..0.9);
        let q = q_draw(&mut r);
        let x: Array2<f64> = Array2::from_shape_simple_fn((n, p), || r.sample(StandardNormal));
        let f = Array1::zeros(n);
        let y: Array1<f64> = Array1::from_shape_simple_fn(n, || sigma * r.sample::<f64, _>(StandardNormal));
        let inst = ProblemInstance::new(x, y, sigma).unwrap().with_mean(f).unwrap();
        let lambda = lasso_lambda_min(gamma, sigma, n, p, s).unwrap();
        let u = random_u(&mut r, p);
        let e = event_functionals(&u, &inst, s, q, lambda, gamma, 0.1).unwrap();
        if e.h > e.h_tilde * (1.0 + ROUNDING) || e.h_tilde > e.f * (1.0 + ROUNDING) {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("10000 draws, {violations} violations of H <= H~ <= F"))
}

fn criterion_interpolation() -> Outcome {
    let mut r = rng(105);
    let mut violations = 0;
    for _ in 0..10_000 {
        let p = r.random_range(1..40);
        let u = random_u(&mut r, p);
        let q = r.random_range(1.0..=2.0);
        let lhs = lq_norm(&u, NormOrder::Finite(q));
        let rhs = interpolated_lq_bound(lq_norm(&u, NormOrder::ONE), lq_norm(&u, NormOrder::TWO), q).unwrap();
        if lhs > rhs * (1.0 + ROUNDING) {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("10000 draws, {violations} violations"))
}

fn compressible_beta(r: &mut ChaCha8Rng, p: usize) -> Vec<f64> {
    match r.random_range(0..3) {
        0 => (0..p).map(|_| r.sample(StandardNormal)).collect(),
        1 => {
            let decay = r.random_range(0.5..4.0);
            (0..p)
                .map(|j| r.random_range(-1.0..1.0) * ((j + 1) as f64).powf(-decay))
                .collect()
        }
        _ => (0..p).map(|_| if r.random_bool(0.2) { r.random_range(-5.0..5.0) } else { 0.0 }).collect(),
    }
}

fn criterion_compressibility() -> Outcome {
    let mut r = rng(106);
    let mut violations = 0;
    let mut steep_violations = 0;
    for k in 0..1000 {
        let p = r.random_range(2..60);
        let w = if k % 2 == 0 {
            let cfg = SlopeWeightConfig::new(p, r.random_range(1..500), r.random_range(0.1..3.0))
                .with_a(r.random_range(1.0..20.0));
            slope_weights(&cfg).unwrap()
        } else {
            WeightSchedule::constant(p, r.random_range(0.01..5.0)).unwrap()
        };
        let beta = compressible_beta(&mut r, p);
        let s = r.random_range(1..=p);
        let rr = r.random_range(0.05..0.95);
        let (lhs, rhs) = lr_compressibility_bound(&beta, &w, s, rr).unwrap();
        if lhs > rhs * (1.0 + ROUNDING) {
            violations += 1;
        }
        let steep = WeightSchedule::new(sorted_weights(&mut r, p, 1.0).iter().enumerate()
            .map(|(j, v)| if j == 0 { 50.0 } else { *v }).collect()).unwrap();
        let (l2, r2) = lr_compressibility_bound(&beta, &steep, s, rr).unwrap();
        if l2 > r2 * (1.0 + ROUNDING) {
            steep_violations += 1;
        }
    }
    outcome(
        violations == 0,
        format!(
            "1000 draws (Slope-schedule and equal weights), {violations} violations; \
             info: arbitrary steep weights violate in {steep_violations}/1000"
        ),
    )
}

fn cone_vector(r: &mut ChaCha8Rng, p: usize, s: usize) -> Vec<f64> {
    let noise = 10f64.powf(r.random_range(-3.0..0.5));
    let mut d: Vec<f64> = (0..p).map(|_| noise * r.sample::<f64, _>(StandardNormal)).collect();
    for _ in 0..s {
        let j = r.random_range(0..p);
        d[j] += r.random_range(-3.0..3.0);
    }
    if d.iter().all(|&v| v == 0.0) {
        d[0] = 1.0;
    }
    d
}

fn criterion_cones() -> Outcome {
    let mut r = rng(107);
    let mut violations = [0usize; 3];
    let mut active = [0usize; 3];
    for _ in 0..10_000 {
        let p = r.random_range(5..50);
        let s = r.random_range(1..=p / 2);
        let q = q_draw(&mut r);
        let c0 = r.random_range(0.2..10.0);
        let w = slope_weights(&SlopeWeightConfig::new(p, r.random_range(10..400), r.random_range(0.2..3.0))).unwrap();
        let d = cone_vector(&mut r, p, s);

        let sre = ConeSpec::sre(q, s, c0).unwrap();
        let wre = ConeSpec::wre(q, s, c0, w.clone()).unwrap();
        let in_sre = slopebound_core::re::cone_member(&d, &sre).unwrap();
        let in_wre = slopebound_core::re::cone_member(&d, &wre).unwrap();
        active[0] += usize::from(in_sre);
        active[1] += usize::from(in_sre);
        active[2] += usize::from(in_wre);
        violations[0] += usize::from(!check_sre_in_wre(&d, &w, q, s, c0).unwrap());
        violations[1] += usize::from(!check_prop2_containment(&d, q, s, c0).unwrap());
        violations[2] += usize::from(!check_prop3_containment(&d, &w, q, s, c0).unwrap());
    }
    outcome(
        violations.iter().all(|&v| v == 0) && active.iter().all(|&a| a >= 1000),
        format!(
            "10000 vectors per containment; violations SRE->WRE {}, SRE(q)->SRE(2) {}, WRE->SRE(s_q) {}; \
             antecedent hits {:?}",
            violations[0], violations[1], violations[2], active
        ),
    )
}

fn criterion_capital_lambda() -> Outcome {
    let (n, sigma, a) = (100, 1.0, DEFAULT_SLOPE_A);
    let mut violations = 0;
    let mut checked = 0;
    for p in [10usize, 50, 100, 500, 1000] {
        let w = slope_weights(&SlopeWeightConfig::new(p, n, sigma).with_a(a)).unwrap();
        for s in [1usize, 2, 3, 5, 10] {
            for q in [
                NormOrder::Finite(2.0),
                NormOrder::Finite(3.0),
                NormOrder::Finite(4.0),
                NormOrder::Finite(8.0),
                NormOrder::Infinity,
            ] {
                let value = capital_lambda_q(&w, s, q).unwrap();
                let sf = s as f64;
                let bound = a * sigma * sf.powf(1.0 - q.reciprocal())
                    * ((2.0 * std::f64::consts::E * p as f64 / sf).ln() / n as f64).sqrt();
                violations += usize::from(value > bound * (1.0 + ROUNDING));
                checked += 1;
            }
        }
    }
    outcome(violations == 0, format!("{checked} grid points, {violations} violations"))
}

fn simulation_config() -> TrialConfig {
    TrialConfig::new(
        DesignSpec::new(DesignKind::IidGaussian, 100, 50),
        SignalSpec::exact_sparse(50, 5, 1.0),
        1.0,
    )
}

fn criterion_event(report: &SimulationReport) -> Outcome {
    let pass = report.events.len() == 2 && report.events.iter().all(|e| e.meets_target);
    let parts: Vec<String> = report
        .events
        .iter()
        .map(|e| {
            format!(
                "{:?} {}/{} = {:.3} (need >= {:.3})",
                e.estimator,
                e.holds,
                e.trials,
                e.frequency,
                e.target - 3.0 * e.standard_error
            )
        })
        .collect();
    outcome(pass, format!("{}; checked at realized u only", parts.join(", ")))
}

fn criterion_coverage(report: &SimulationReport, elapsed: Duration) -> Outcome {
    let wanted = [
        "lasso_l1",
        "lasso_lq_sparse",
        "lasso_lq_compressible",
        "slope_sorted",
        "slope_lq_sparse",
        "slope_lq_compressible",
    ];
    let mut pass = elapsed < SIMULATION_BUDGET;
    let mut parts = Vec::new();
    for name in wanted {
        match report.coverage.iter().find(|c| c.name == name) {
            Some(c) => {
                pass &= c.applicable == report.trials && c.fraction >= COVERAGE_MIN;
                parts.push(format!("{name} {}/{} (re-sensitive {})", c.holds, c.applicable, c.re_sensitive));
            }
            None => {
                pass = false;
                parts.push(format!("{name} missing"));
            }
        }
    }
    let re = report.re.as_ref().map_or(String::new(), |re| {
        format!("; estimated theta {:.3}, nu {:.3}", re.theta, re.nu)
    });
    outcome(pass, format!("{}{re}; {:.1}s", parts.join(", "), elapsed.as_secs_f64()))
}

fn criterion_rate() -> Outcome {
    let base = TrialConfig::new(
        DesignSpec::new(DesignKind::IidGaussian, 400, 200),
        // well above the largest weight, so the fits are not shrunk to zero
        SignalSpec::exact_sparse(200, 2, 5.0),
        1.0,
    );
    let cfg = SweepConfig {
        axis: SweepAxis::S,
        grid: vec![2, 4, 8, 16],
        base,
        trials_per_point: 50,
        estimator: Estimator::Slope,
    };
    let table = rate_sweep(&cfg, 11).unwrap();
    let points: Vec<String> = table
        .points
        .iter()
        .map(|p| format!("s={} err={:.4} psi={:.4} zero fits {}", p.s, p.median_l2_error, p.predictor, p.zero_fits))
        .collect();
    match table.slope {
        Some(slope) => outcome(
            (RATE_SLOPE.0..=RATE_SLOPE.1).contains(&slope) && table.flags.is_empty(),
            format!("fitted slope {slope:.3} in [{}, {}]; {}", RATE_SLOPE.0, RATE_SLOPE.1, points.join(", ")),
        ),
        None => outcome(false, format!("no slope: {:?}", table.flags)),
    }
}

fn run_simulate(config: &Path, out: &Path) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_slopebound"))
        .args(["simulate", "--seed", "7", "--trials", "20", "--config"])
        .arg(config)
        .arg("--out-dir")
        .arg(out)
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("simulate exited with {status}"));
    }
    std::fs::read(out.join("trials.csv")).map_err(|e| e.to_string())
}

fn criterion_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sim.json");
    std::fs::write(&config, serde_json::to_string(&simulation_config()).unwrap()).unwrap();
    let a = run_simulate(&config, &dir.path().join("a"));
    let b = run_simulate(&config, &dir.path().join("b"));
    match (a, b) {
        (Ok(a), Ok(b)) => outcome(a == b && !a.is_empty(), format!("two runs, {} bytes each, identical: {}", a.len(), a == b)),
        (Err(e), _) | (_, Err(e)) => outcome(false, e),
    }
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut record = |id, name, o: Outcome| {
        println!("[{}] {id:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o));
    };
    record(1, "prox matches brute-force minimization", criterion_prox());
    record(2, "best s-term error matches support enumeration", criterion_best_approx());
    record(3, "Slope with equal weights matches the Lasso", criterion_slope_lasso());
    record(4, "noise functional chain H <= H~ <= F", criterion_chain());
    record(5, "norm interpolation inequality", criterion_interpolation());
    record(6, "l_r compressibility bound", criterion_compressibility());
    record(7, "cone containments", criterion_cones());
    record(8, "Lambda_q(s) upper bound", criterion_capital_lambda());

    let start = Instant::now();
    let sim = monte_carlo(&simulation_config(), 200, 2024);
    let elapsed = start.elapsed();
    match sim {
        Ok(report) => {
            record(9, "noise event frequency", criterion_event(&report));
            record(10, "oracle inequality coverage", criterion_coverage(&report, elapsed));
        }
        Err(e) => {
            record(9, "noise event frequency", outcome(false, e.to_string()));
            record(10, "oracle inequality coverage", outcome(false, e.to_string()));
        }
    }
    record(11, "l2 error rate scaling", criterion_rate());
    record(12, "simulate output is deterministic", criterion_determinism());

    let failed = results.iter().filter(|(_, _, o)| !o.pass).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
