//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use enet_oracle::basis::DesignMatrix;
use enet_oracle::harness::{run_study, ExperimentConfig, RunOptions, StudyOutcome};
use enet_oracle::linalg::min_eigenvalue;
use enet_oracle::loss::{logistic_margin_c, LossModel, MarginSpec};
use enet_oracle::oracle_lab::{adaptive_restricted_eigenvalue, AreOptions, ConjugateSpec};
use enet_oracle::rng;
use enet_oracle::solver::{PenaltyConfig, Problem, SolverOptions};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn config(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn study(name: &str, opts: RunOptions) -> Result<StudyOutcome, String> {
    run_study(&config(name), &opts).map_err(|e| format!("{name}: {e}"))
}

fn random_design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0))
}

fn response(rng: &mut ChaCha8Rng, x: &DMatrix<f64>, noise: f64) -> DVector<f64> {
    let beta = DVector::from_fn(x.ncols(), |_, _| rng.random_range(-1.0..1.0));
    let mut y = x * beta;
    for v in y.iter_mut() {
        *v += noise * rng.random_range(-1.0..1.0);
    }
    y
}

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// Objective computed from scratch on the residuals.
fn enet_objective(x: &DMatrix<f64>, y: &DVector<f64>, b: &DVector<f64>, l1: f64, l2: f64) -> f64 {
    let r = y - x * b;
    r.norm_squared() / x.nrows() as f64 + l1 * b.iter().map(|v| v.abs()).sum::<f64>() + l2 * b.norm_squared()
}

fn c1_brute_force() -> Outcome {
    let grid = [0.0, 0.05, 0.2];
    let mut rng = rng::stream(101);
    let mut worst = f64::NEG_INFINITY;
    for inst in 0..20 {
        let (l1, l2) = (grid[inst % 3], grid[(inst / 3) % 3]);
        let x = random_design(&mut rng, 20, 2);
        let y = response(&mut rng, &x, 0.3);
        let design = DesignMatrix::from_matrix(x.clone()).unwrap();
        let fit = Problem::new(&design, &y, LossModel::quadratic())
            .unwrap()
            .fit(&PenaltyConfig::new(l1, l2), &SolverOptions::default(), None)
            .unwrap();
        let n = 20.0;
        let g = x.tr_mul(&x) / n;
        let c = x.tr_mul(&y) / n;
        let yy = y.norm_squared() / n;
        let mut best = f64::INFINITY;
        for i in 0..=4000 {
            let a = -2.0 + 1e-3 * i as f64;
            for j in 0..=4000 {
                let b = -2.0 + 1e-3 * j as f64;
                let v = g[(0, 0)] * a * a + 2.0 * g[(0, 1)] * a * b + g[(1, 1)] * b * b - 2.0 * (c[0] * a + c[1] * b)
                    + yy
                    + l1 * (a.abs() + b.abs())
                    + l2 * (a * a + b * b);
                best = best.min(v);
            }
        }
        let obj = enet_objective(&x, &y, &fit.beta_hat, l1, l2);
        worst = worst.max(obj - best);
    }
    check(worst <= 1e-4, format!("max(fit - grid min) = {worst:.3e} <= 1e-4 over 20 instances"))
}

fn c2_normal_equations() -> Outcome {
    let mut rng = rng::stream(102);
    let x = random_design(&mut rng, 100, 5);
    let y = response(&mut rng, &x, 0.5);
    let exact = (x.tr_mul(&x)).cholesky().expect("full rank").solve(&x.tr_mul(&y));
    let design = DesignMatrix::from_matrix(x).unwrap();
    let fit = Problem::new(&design, &y, LossModel::quadratic())
        .unwrap()
        .fit(&PenaltyConfig::new(0.0, 0.0), &SolverOptions::default(), None)
        .unwrap();
    let rel = (&fit.beta_hat - &exact).norm() / exact.norm();
    check(rel <= 1e-8, format!("relative error {rel:.3e} <= 1e-8"))
}

fn c3_augmented_design() -> Outcome {
    let mut rng = rng::stream(103);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let (n, p) = (40, 8);
        let x = random_design(&mut rng, n, p);
        let y = response(&mut rng, &x, 0.3);
        let l1 = rng.random_range(0.01..0.2);
        let l2 = rng.random_range(0.01..0.5);
        let design = DesignMatrix::from_matrix(x.clone()).unwrap();
        let enet = Problem::new(&design, &y, LossModel::quadratic())
            .unwrap()
            .fit(&PenaltyConfig::new(l1, l2), &SolverOptions::default(), None)
            .unwrap();
        // (1/n)|y - Xb|^2 + l2|b|^2 = (1/n)|y~ - X~b|^2 with X~ = [X; sqrt(n l2) I];
        // the solver scales by 1/(n+p), so the l1 level becomes l1 n/(n+p).
        let na = n + p;
        let mut xa = DMatrix::zeros(na, p);
        xa.rows_mut(0, n).copy_from(&x);
        for j in 0..p {
            xa[(n + j, j)] = (n as f64 * l2).sqrt();
        }
        let mut ya = DVector::zeros(na);
        ya.rows_mut(0, n).copy_from(&y);
        let aug = DesignMatrix::from_matrix(xa).unwrap();
        let lasso = Problem::new(&aug, &ya, LossModel::quadratic())
            .unwrap()
            .fit(&PenaltyConfig::new(l1 * n as f64 / na as f64, 0.0), &SolverOptions::default(), None)
            .unwrap();
        worst = worst.max((&enet.beta_hat - &lasso.beta_hat).amax());
    }
    check(worst <= 1e-6, format!("max l_inf gap {worst:.3e} <= 1e-6 over 20 instances"))
}

fn independent_kkt(x: &DMatrix<f64>, y: &DVector<f64>, b: &DVector<f64>, l1: f64, l2: f64) -> f64 {
    let n = x.nrows() as f64;
    let g = -(x.tr_mul(&(y - x * b))) * (2.0 / n) + b * (2.0 * l2);
    (0..b.len())
        .map(|j| {
            if b[j] != 0.0 {
                (g[j] + l1 * b[j].signum()).abs()
            } else {
                (g[j].abs() - l1).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

fn c4_kkt_certificate() -> Outcome {
    let mut rng = rng::stream(104);
    let opts = SolverOptions::default();
    let (mut fits, mut worst_res, mut worst_gap) = (0, 0.0_f64, 0.0_f64);
    for inst in 0..30 {
        let (n, p) = if inst % 2 == 0 { (60, 10) } else { (30, 60) };
        let x = random_design(&mut rng, n, p);
        let y = response(&mut rng, &x, 0.5);
        let design = DesignMatrix::from_matrix(x.clone()).unwrap();
        let problem = Problem::new(&design, &y, LossModel::quadratic()).unwrap();
        let l1 = problem.lambda_max() * rng.random_range(0.05..0.9);
        let l2 = rng.random_range(0.0..0.3);
        let fit = problem.fit(&PenaltyConfig::new(l1, l2), &opts, None).unwrap();
        if !fit.converged {
            continue;
        }
        fits += 1;
        worst_res = worst_res.max(fit.kkt_residual);
        worst_gap = worst_gap.max((fit.kkt_residual - independent_kkt(&x, &y, &fit.beta_hat, l1, l2)).abs());
    }
    check(
        fits > 0 && worst_res <= opts.tol && worst_gap <= 1e-10,
        format!("{fits} converged fits: max residual {worst_res:.2e} <= {:.0e}, recompute gap {worst_gap:.2e} <= 1e-10", opts.tol),
    )
}

fn c5_conjugate() -> Outcome {
    let mut worst = 0.0_f64;
    for c in [1.0, 1.0 / 36.0] {
        let margin = MarginSpec::quadratic(c, 1.0).unwrap();
        let numeric = ConjugateSpec::numeric(margin.clone(), 200.0, 0.01);
        for i in 0..100 {
            let v = 2.0 * i as f64 / 99.0;
            worst = worst.max((numeric.value(v).unwrap() - v * v / (4.0 * c)).abs());
        }
    }
    let mut rng = rng::stream(105);
    let mut fenchel_ok = true;
    for _ in 0..10_000 {
        let c = rng.random_range(0.01..2.0);
        let spec = ConjugateSpec::closed_form(MarginSpec::quadratic(c, 1.0).unwrap());
        let (u, v) = (rng.random_range(0.0..10.0), rng.random_range(0.0..10.0));
        fenchel_ok &= u * v <= c * u * u + spec.value(v).unwrap() + 1e-12;
    }
    let spec = ConjugateSpec::numeric(MarginSpec::quadratic(0.3, 1.0).unwrap(), 100.0, 0.01);
    let h: Vec<f64> = (0..200).map(|i| spec.value(0.05 * i as f64).unwrap()).collect();
    let nonneg = h.iter().all(|v| *v >= 0.0);
    let monotone = h.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let convex = h.windows(3).all(|w| w[2] - 2.0 * w[1] + w[0] >= -1e-9);
    check(
        worst <= 1e-6 && fenchel_ok && nonneg && monotone && convex,
        format!(
            "max |H - v^2/4c| = {worst:.2e}; Fenchel on 1e4 pairs: {fenchel_ok}; H >= 0: {nonneg}, non-decreasing: {monotone}, convex: {convex}"
        ),
    )
}

fn quad(sigma: &DMatrix<f64>, b: &[f64]) -> f64 {
    let v = DVector::from_column_slice(b);
    v.dot(&(sigma * &v))
}

// Dense search over the cone at p = 3, refined around the best point.
fn cone_grid_min(sigma: &DMatrix<f64>, support: &[usize], l: f64) -> f64 {
    let rest: Vec<usize> = (0..3).filter(|j| !support.contains(j)).collect();
    let mut best = f64::INFINITY;
    if support.len() == 1 {
        let eval = |a: f64, b: f64| {
            if a.abs() + b.abs() > l {
                return f64::INFINITY;
            }
            let mut v = [0.0; 3];
            v[support[0]] = 1.0;
            v[rest[0]] = a;
            v[rest[1]] = b;
            quad(sigma, &v)
        };
        let (mut ca, mut cb, mut half) = (0.0, 0.0, l);
        for _ in 0..5 {
            let k = 400;
            let (mut ba, mut bb) = (ca, cb);
            for i in 0..=k {
                for j in 0..=k {
                    let a = ca - half + 2.0 * half * i as f64 / k as f64;
                    let b = cb - half + 2.0 * half * j as f64 / k as f64;
                    // also try the projection onto the ball boundary
                    let s = a.abs() + b.abs();
                    for (a, b) in [(a, b), if s > 0.0 { (a * l / s, b * l / s) } else { (a, b) }] {
                        let v = eval(a, b);
                        if v < best {
                            best = v;
                            (ba, bb) = (a, b);
                        }
                    }
                }
            }
            (ca, cb, half) = (ba, bb, half / 20.0);
        }
    } else {
        let eval = |t: f64, w: f64| {
            let mut v = [0.0; 3];
            v[support[0]] = t.cos();
            v[support[1]] = t.sin();
            v[rest[0]] = w.clamp(-l, l);
            quad(sigma, &v)
        };
        let (mut ct, mut cw, mut ht, mut hw) = (std::f64::consts::PI, 0.0, std::f64::consts::PI, l);
        for _ in 0..5 {
            let k = 400;
            let (mut bt, mut bw) = (ct, cw);
            for i in 0..=k {
                for j in 0..=k {
                    let t = ct - ht + 2.0 * ht * i as f64 / k as f64;
                    let w = (cw - hw + 2.0 * hw * j as f64 / k as f64).clamp(-l, l);
                    let v = eval(t, w);
                    if v < best {
                        best = v;
                        (bt, bw) = (t, w);
                    }
                }
            }
            (ct, cw, ht, hw) = (bt, bw, ht / 20.0, hw / 20.0);
        }
    }
    best
}

fn random_psd(rng: &mut ChaCha8Rng, p: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
    let mut s = &a * a.transpose() / p as f64;
    if rng.random_bool(0.3) {
        // rank-deficient case
        let v = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0));
        s = &v * v.transpose();
    }
    s
}

fn c6_restricted_eigenvalue() -> Outcome {
    let mut rng = rng::stream(106);
    let opts = AreOptions::default();
    let mut identity_gap = 0.0_f64;
    for _ in 0..10 {
        let p = rng.random_range(4..30);
        let k = rng.random_range(1..p);
        let mut idx: Vec<usize> = (0..p).collect();
        for i in 0..k {
            let j = rng.random_range(i..p);
            idx.swap(i, j);
        }
        let l_n = rng.random_range(0.1..20.0);
        let r = adaptive_restricted_eigenvalue(&DMatrix::identity(p, p), &idx[..k], l_n, &opts).unwrap();
        identity_gap = identity_gap.max((r.estimate - 1.0).abs());
    }
    let mut lower_ok = true;
    for _ in 0..50 {
        let p = rng.random_range(2..12);
        let sigma = random_psd(&mut rng, p);
        let k = rng.random_range(1..=p);
        let support: Vec<usize> = (0..k).collect();
        let r = adaptive_restricted_eigenvalue(&sigma, &support, rng.random_range(0.0..10.0), &opts).unwrap();
        lower_ok &= min_eigenvalue(&sigma) <= r.estimate + 1e-9;
    }
    let mut grid_gap = 0.0_f64;
    for _ in 0..6 {
        let sigma = random_psd(&mut rng, 3) + DMatrix::identity(3, 3) * 0.05;
        let k = rng.random_range(1..=2);
        let support: Vec<usize> = (0..k).collect();
        let l = rng.random_range(0.3..3.0);
        let est = adaptive_restricted_eigenvalue(&sigma, &support, l, &opts).unwrap().estimate;
        grid_gap = grid_gap.max((est - cone_grid_min(&sigma, &support, l)).abs());
    }
    check(
        identity_gap <= 1e-6 && lower_ok && grid_gap <= 1e-3,
        format!("identity |phi2 - 1| <= {identity_gap:.1e}; lambda_min bound on 50 PSD: {lower_ok}; p=3 grid gap {grid_gap:.2e}"),
    )
}

fn c7_theorem1() -> Outcome {
    let t = Instant::now();
    let out = study("theorem1.toml", RunOptions::default())?;
    let secs = t.elapsed().as_secs_f64();
    let s = &out.summary;
    check(
        s.violations == 0 && s.aborted == 0 && secs < 300.0,
        format!(
            "{} records, {} on tau, {} violations, {:.1}s (< 300s)",
            s.records, s.tau_member.count, s.violations, secs
        ),
    )
}

fn c8_tau_frequency() -> Outcome {
    let out = study("tau-frequency.toml", RunOptions::default())?;
    let f = out.summary.tau_member;
    let p = out.records[0].fit.as_ref().map(|fit| fit.beta_hat.len()).unwrap_or(1) as f64;
    let floor = 1.0 - 1.0 / p - 2.0 * f.se;
    check(
        f.total > 0 && f.fraction >= floor,
        format!("P(tau) = {:.4} ({}/{}) >= {floor:.4} (p = {p})", f.fraction, f.count, f.total),
    )
}

fn c9_corollary_linear() -> Outcome {
    let out = study("corollary-linear.toml", RunOptions::default())?;
    let (mut on_tau, mut ok) = (0, 0);
    for r in &out.records {
        if r.tau_member != Some(true) {
            continue;
        }
        on_tau += 1;
        let fit = r.fit.as_ref().ok_or("missing fit")?;
        let oracle = r.oracle.as_ref().ok_or("missing oracle")?;
        let b0 = &oracle.beta_star;
        let s0 = b0.iter().filter(|v| **v != 0.0).count() as f64;
        let l1_dist: f64 = fit.beta_hat.iter().zip(b0.iter()).map(|(a, b)| (a - b).abs()).sum();
        // quadratic margin c = 1: H(v) = v^2 / 4
        let v = 6.0 * r.lambda1 * s0.sqrt() / oracle.phi_star;
        let rhs = 4.0 / r.lambda1 * v * v / 4.0;
        if l1_dist <= rhs * (1.0 + 1e-12) {
            ok += 1;
        }
    }
    check(on_tau > 0 && ok == on_tau, format!("l1 bound holds on {ok} of {on_tau} tau replications"))
}

fn c10_logistic_margin() -> Outcome {
    let (eps0, eta) = (0.1_f64, 0.5_f64);
    let c = logistic_margin_c(eps0, eta).unwrap();
    let logit = |p: f64| (p / (1.0 - p)).ln();
    let mut floor = f64::INFINITY;
    for a in 0..=2000 {
        let pi = eps0 + (1.0 - 2.0 * eps0) * a as f64 / 2000.0;
        for b in 0..=200 {
            let f = logit(pi) - eta + 2.0 * eta * b as f64 / 200.0;
            let e = f.exp();
            floor = floor.min(e / (1.0 + e).powi(2));
        }
    }
    let out = study("logit-margin.toml", RunOptions::default())?;
    let s = &out.summary;
    check(
        floor >= 2.0 * c && s.violations == 0 && s.aborted == 0,
        format!(
            "curvature floor {floor:.4e} >= 2c = {:.4e}; logistic study: {} on tau, {} violations",
            2.0 * c,
            s.tau_member.count,
            s.violations
        ),
    )
}

fn c11_series_rate() -> Outcome {
    let t = Instant::now();
    let out = study("series-rate.toml", RunOptions { parallel: 4, ..Default::default() })?;
    let secs = t.elapsed().as_secs_f64();
    let table = out.rate.ok_or("no rate table")?;
    let means: Vec<f64> = table.rows.iter().map(|r| r.mse).collect();
    let strictly = means.windows(2).all(|w| w[1] < w[0]);
    check(
        strictly && table.spearman == -1.0 && (-1.05..=-0.35).contains(&table.slope) && secs < 900.0,
        format!(
            "slope {:.3} (se {:.3}) in [-1.05, -0.35], spearman {}, strictly decreasing: {strictly}, {secs:.1}s (< 900s)",
            table.slope, table.slope_se, table.spearman
        ),
    )
}

fn c12_gic() -> Outcome {
    let out = study("gic-selection.toml", RunOptions::default())?;
    let (mut screen, mut exact) = (0, 0);
    for r in &out.records {
        if let Some(sel) = &r.selection {
            screen += usize::from(sel.screening.screening);
            exact += usize::from(sel.thresholded.exact);
        }
    }
    check(
        out.records.len() == 100 && screen >= 80 && exact >= 60,
        format!("screening {screen}/100 (>= 80), exact after threshold {exact}/100 (>= 60)"),
    )
}

fn payloads(out: &StudyOutcome) -> Vec<String> {
    out.records.iter().map(|r| r.payload().unwrap()).collect()
}

fn c13_reproducible() -> Outcome {
    let mut detail = Vec::new();
    for (name, reps) in [
        ("theorem1.toml", 20),
        ("logit-margin.toml", 4),
        ("gic-selection.toml", 10),
        ("series-rate.toml", 2),
    ] {
        let serial = |r| RunOptions { parallel: 1, replications: Some(r), ..Default::default() };
        let a = payloads(&study(name, serial(reps))?);
        let b = payloads(&study(name, serial(reps))?);
        let c = payloads(&study(name, RunOptions { parallel: 4, replications: Some(reps), ..Default::default() })?);
        if a != b || a != c {
            return Err(format!("{name}: payloads differ between reruns"));
        }
        detail.push(format!("{name} x{}", a.len()));
    }
    Ok(format!("byte-identical serial/serial/parallel payloads: {}", detail.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 13] = [
        ("solver vs brute-force grid", c1_brute_force),
        ("closed form at zero penalty", c2_normal_equations),
        ("augmented-design equivalence", c3_augmented_design),
        ("KKT certificate", c4_kkt_certificate),
        ("conjugate and Fenchel", c5_conjugate),
        ("adaptive restricted eigenvalue", c6_restricted_eigenvalue),
        ("oracle inequality on tau", c7_theorem1),
        ("tau frequency", c8_tau_frequency),
        ("linear-truth l1 bound", c9_corollary_linear),
        ("logistic margin floor", c10_logistic_margin),
        ("series-estimator rate", c11_series_rate),
        ("GIC selection", c12_gic),
        ("reproducibility", c13_reproducible),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let res = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match res {
            Ok(d) => println!("criterion {:>2}: PASS  {name} — {d} [{secs:.1}s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2}: FAIL  {name} — {d} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
