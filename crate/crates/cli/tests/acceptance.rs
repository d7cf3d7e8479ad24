//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use blowuplab_core::functionals::{coercivity_report, lemma31_ratio, residual_f, DEFAULT_COERCIVITY_ONSET, RESIDUAL_TOLERANCE};
use blowuplab_core::lifespan::{compare_to_theory, fit_for_bound, sweep, RowOutcome, SweepConfig, SweepResult};
use blowuplab_core::specfun::{bessel_k, phi_helmholtz_residual, rho_ode_residual};
use blowuplab_core::{BesselEvalConfig, ModelParams, SimConfig, Solver, TestFunctionContext};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

/// Adaptive Simpson, used as a brute-force oracle.
fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    step(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 30)
}

/// `K_nu(t)` from its integral representation, with `e^{-t}` factored out.
fn bessel_oracle(nu: f64, t: f64) -> f64 {
    let f = |s: f64| (-t * (s.cosh() - 1.0)).exp() * (nu * s).cosh();
    // Beyond this point the scaled integrand is below e^{-60}.
    let upper = (1.0 + 60.0 / t).acosh() + 1.0;
    // Split at the bulk so the adaptive rule sees the peak.
    let knee = (1.0 + 1.0 / t).acosh().min(upper);
    (simpson(&f, 0.0, knee, 1e-12) + simpson(&f, knee, upper, 1e-12)) * (-t).exp()
}

fn criterion_1() -> Verdict {
    let cfg = BesselEvalConfig::default();
    let mut worst = 0.0f64;
    for nu in [0.0, 0.5, -0.5, 1.0, 2.0] {
        for t in [0.1, 0.5, 1.0, 5.0, 10.0, 30.0] {
            let value = bessel_k(nu, t, &cfg).unwrap();
            worst = worst.max((value / bessel_oracle(nu, t) - 1.0).abs());
        }
    }
    let mut half = 0.0f64;
    for t in [0.1, 0.5, 1.0, 5.0, 10.0, 30.0] {
        let exact = (PI / (2.0 * t)).sqrt() * (-t).exp();
        half = half.max((bessel_k(0.5, t, &cfg).unwrap() / exact - 1.0).abs());
    }
    verdict(
        worst <= 1e-8 && half <= 1e-10,
        format!("bessel_k vs quadrature oracle max rel {worst:.2e} (tol 1e-8), K_1/2 closed form {half:.2e} (tol 1e-10)"),
    )
}

fn criterion_2() -> Verdict {
    let mut worst = 0.0f64;
    for mu in [0.5, 1.0, 2.0, 3.0] {
        let ctx = TestFunctionContext::new(1, mu, 1.0).unwrap();
        for i in 0..=80 {
            let t = 0.25 * i as f64;
            worst = worst.max(rho_ode_residual(&ctx, t, 1e-3).unwrap());
        }
    }
    verdict(worst < 1e-6, format!("rho ODE max relative residual {worst:.2e} on t in [0, 20] (tol 1e-6)"))
}

fn criterion_3() -> Verdict {
    let mut worst = 0.0f64;
    for n in 1..=3 {
        for i in 0..=99 {
            let r = 0.1 + 0.1 * i as f64;
            worst = worst.max(phi_helmholtz_residual(n, r, 1e-3).unwrap());
        }
    }
    verdict(worst < 1e-5, format!("phi Helmholtz max relative residual {worst:.2e} on r in [0.1, 10] (tol 1e-5)"))
}

fn criterion_4() -> Verdict {
    let mut worst = 1.0f64;
    for n in 1..=3 {
        let ctx = TestFunctionContext::new(n, 0.5, 1.0).unwrap();
        let reference = lemma31_ratio(&ctx, 5.0, 2.0).unwrap();
        for i in 0..=60 {
            let v = lemma31_ratio(&ctx, 0.5 * i as f64, 2.0).unwrap() / reference;
            worst = worst.max(v).max(1.0 / v);
        }
    }
    verdict(worst <= 10.0, format!("lemma ratio stays within a factor {worst:.3} of its t=5 value (band 10)"))
}

fn mms_error(n: u32, nr: usize) -> f64 {
    let length = 2.0;
    let t_end = 1.0;
    let mu = 0.7;
    let k = PI / (2.0 * length);
    let params = ModelParams { n, mu, p: 2.0, q: 2.0, a: 0, b: 0 };
    let cfg = SimConfig { domain_length: length, nr, t_max: t_end, ..SimConfig::with_spacing(params, 1.0, 0.5, 0.1) };
    let exact = move |r: f64, t: f64| (-t).exp() * (k * r).cos();
    let nf = (n - 1) as f64;
    let forcing = move |r: f64, t: f64| {
        let e = (-t).exp();
        let sinc = if r == 0.0 { k } else { (k * r).sin() / r };
        let u = e * (k * r).cos();
        let lap = -e * (k * k * (k * r).cos() + nf * k * sinc);
        u - lap - mu / (1.0 + t) * u
    };
    let h = length / nr as f64;
    let solver = Solver::new(&cfg).unwrap().with_forcing(Box::new(forcing)).full_domain().with_fixed_dt(0.25 * h);
    let radii = solver.grid().radii().to_vec();
    let u0: Vec<f64> = radii.iter().map(|&r| exact(r, 0.0)).collect();
    let v0: Vec<f64> = u0.iter().map(|u| -u).collect();
    let mut state = solver.initial_state_from(&u0, &v0);
    while state.t < t_end * (1.0 - 1e-12) {
        solver.step(&mut state).unwrap();
    }
    let w = solver.grid().trapezoid_weights();
    radii.iter().enumerate().map(|(i, &r)| w[i] * (state.u[i] - exact(r, state.t)).powi(2)).sum::<f64>().sqrt()
}

fn energy_monotone(n: u32, mu: f64) -> bool {
    let params = ModelParams { n, mu, p: 2.0, q: 2.0, a: 0, b: 0 };
    let cfg = SimConfig::with_spacing(params, 0.5, 12.0, 0.05);
    let solver = Solver::new(&cfg).unwrap();
    let mut state = solver.initial_state();
    let mut last = f64::INFINITY;
    // The last step is clipped onto t_max; only uniform steps are compared.
    while cfg.t_max - state.t > 2.0 * state.dt.max(1e-3) {
        solver.step(&mut state).unwrap();
        let e = solver.grid().staggered_energy(&state.u_prev, &state.u, state.dt);
        if e > last * (1.0 + 1e-12) {
            return false;
        }
        last = e;
    }
    true
}

fn criterion_5() -> Verdict {
    let mut rates = Vec::new();
    for n in 1..=3 {
        let e: Vec<f64> = [64usize, 128, 256].iter().map(|&nr| mms_error(n, nr)).collect();
        rates.extend(e.windows(2).map(|w| (w[0] / w[1]).log2()));
    }
    let rates_ok = rates.iter().all(|r| (r - 2.0).abs() <= 0.3);
    let energy_ok = (1..=3).all(|n| [0.5, 2.0].iter().all(|&mu| energy_monotone(n, mu)));
    let shown: Vec<String> = rates.iter().map(|r| format!("{r:.3}")).collect();
    verdict(
        rates_ok && energy_ok,
        format!("MMS rates [{}] (2 +/- 0.3), linear energy nonincreasing: {energy_ok}", shown.join(", ")),
    )
}

fn subcritical_sweep() -> SweepConfig {
    let params = ModelParams { n: 1, mu: 0.5, p: 2.0, q: 2.0, a: 1, b: 0 };
    let mut base = SimConfig::with_spacing(params, 0.4, 15.0, 0.00625);
    base.domain_length = 20.0;
    base.nr = 3200;
    SweepConfig {
        base,
        eps_list: vec![0.4, 0.283, 0.2, 0.141, 0.1],
        refine: 3,
        tau: 0.25,
        horizon_factor: 3.0,
        t_max_cap: None,
    }
}

fn criterion_6(result: &SweepResult) -> Verdict {
    let all_blow_up = result.rows.iter().all(|r| r.outcome == RowOutcome::BlowUp);
    match fit_for_bound(result) {
        Ok(fit) => {
            let target = -4.0 / 3.0;
            let dev = (fit.slope - target).abs() / target.abs();
            let times: Vec<String> = result.rows.iter().map(|r| format!("{:.3}", r.t_est.unwrap_or(f64::NAN))).collect();
            verdict(
                all_blow_up && dev <= 0.2 && fit.r_squared >= 0.98,
                format!(
                    "T = [{}], slope {:.4} vs -4/3 (deviation {:.1}%, tol 20%), r^2 {:.5} (min 0.98)",
                    times.join(", "),
                    fit.slope,
                    100.0 * dev,
                    fit.r_squared
                ),
            )
        }
        Err(e) => verdict(false, format!("fit failed: {e}")),
    }
}

fn criterion_7() -> Verdict {
    let params = ModelParams { n: 3, mu: 0.5, p: 1.9, q: 2.2, a: 1, b: 1 };
    let mut base = SimConfig::with_spacing(params, 2.8, 5.0, 0.0125);
    base.domain_length = 10.0;
    base.nr = 800;
    let cfg = SweepConfig {
        base,
        eps_list: vec![2.8, 1.4, 0.7],
        refine: 2,
        tau: 0.35,
        horizon_factor: 3.0,
        t_max_cap: None,
    };
    let result = match sweep(&cfg) {
        Ok(r) => r,
        Err(e) => return verdict(false, format!("sweep failed: {e}")),
    };
    let all_blow_up = result.rows.iter().all(|r| r.outcome == RowOutcome::BlowUp);
    let t: Vec<f64> = result.rows.iter().map(|r| r.t_est.unwrap_or(f64::NAN)).collect();
    let ratios: Vec<f64> = t.windows(2).map(|w| w[1] / w[0]).collect();
    let decreasing_in_eps = t.windows(2).all(|w| w[1] > w[0]);
    let steep = ratios.iter().all(|&r| r >= 4.0);
    let stretch = fit_for_bound(&result)
        .and_then(|fit| compare_to_theory(&fit, &result.bound, cfg.tau))
        .map(|v| format!("{:?} (measured {:.3}, k {:.4}, tau 0.35)", v.verdict, v.measured_exponent, v.theoretical_exponent))
        .unwrap_or_else(|e| format!("unavailable: {e}"));
    let shown: Vec<String> = t.iter().map(|v| format!("{v:.3}")).collect();
    let shown_ratios: Vec<String> = ratios.iter().map(|v| format!("{v:.2}")).collect();
    verdict(
        all_blow_up && decreasing_in_eps && steep,
        format!(
            "eps [2.8, 1.4, 0.7]: T = [{}], halving ratios [{}] (min 4); stretch verdict {}",
            shown.join(", "),
            shown_ratios.join(", "),
            stretch
        ),
    )
}

fn criterion_8(result: &SweepResult) -> Verdict {
    let mut g1 = Vec::new();
    let mut g2 = Vec::new();
    for row in &result.rows {
        let Some(series) = row.monitors.last() else {
            return verdict(false, format!("eps {}: no monitors", row.eps));
        };
        match coercivity_report(series, row.eps, DEFAULT_COERCIVITY_ONSET) {
            Ok(rep) => {
                g1.push(rep.min_g1_over_eps);
                g2.push(rep.min_g2_over_eps);
            }
            Err(e) => return verdict(false, format!("eps {}: {e}", row.eps)),
        }
    }
    let spread = |v: &[f64]| v.iter().cloned().fold(f64::MIN, f64::max) / v.iter().cloned().fold(f64::MAX, f64::min);
    let positive = g1.iter().chain(&g2).all(|&x| x > 0.0);
    let (s1, s2) = (spread(&g1), spread(&g2));
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ");
    verdict(
        positive && s1 < 2.0 && s2 < 2.0,
        format!("min G1/eps [{}] spread {s1:.3}, min G2/eps [{}] spread {s2:.3} (max 2)", fmt(&g1), fmt(&g2)),
    )
}

fn criterion_9(result: &SweepResult) -> Verdict {
    let row = &result.rows[0];
    let params = result.base.params;
    let mut maxima = Vec::new();
    for (series, t_num) in row.monitors.iter().zip(&row.levels) {
        let rel = match residual_f(series, &params) {
            Ok(r) => r,
            Err(e) => return verdict(false, format!("residual failed: {e}")),
        };
        let worst = series
            .snapshots
            .iter()
            .zip(rel)
            .filter(|(s, _)| s.t <= 0.8 * t_num)
            .fold(0.0f64, |m, (_, r)| m.max(r));
        maxima.push(worst);
    }
    let finest = *maxima.last().unwrap_or(&f64::INFINITY);
    let decreasing = maxima.windows(2).all(|w| w[1] < w[0]);
    let shown: Vec<String> = maxima.iter().map(|m| format!("{:.3}%", 100.0 * m)).collect();
    verdict(
        maxima.len() >= 2 && finest < RESIDUAL_TOLERANCE && decreasing,
        format!("eps {} residual by level [{}], finest below 5%, decreasing: {decreasing}", row.eps, shown.join(", ")),
    )
}

fn blowuplab(out: &Path, args: &[&str]) -> Result<String, String> {
    let output = Command::new(env!("CARGO_BIN_EXE_blowuplab"))
        .arg("--quiet")
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !output.status.success() {
        return Err(String::from_utf8_lossy(&output.stderr).into_owned());
    }
    Ok(String::from_utf8_lossy(&output.stdout).into_owned())
}

/// Every artifact in `dir` except the wall-clock record.
fn artifact_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<(PathBuf, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().is_some_and(|n| n != "timing.json"))
        .map(|p| {
            let bytes = fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    files.sort();
    files
}

fn criterion_10() -> Verdict {
    let tmp = std::env::temp_dir().join(format!("blowuplab-acceptance-{}", std::process::id()));
    let _ = fs::remove_dir_all(&tmp);
    fs::create_dir_all(&tmp).unwrap();
    let run_cfg = tmp.join("run.json");
    let sweep_cfg = tmp.join("sweep.json");
    let params = ModelParams { n: 1, mu: 0.5, p: 2.0, q: 2.0, a: 1, b: 0 };
    let base = SimConfig::with_spacing(params, 0.4, 10.0, 0.02);
    fs::write(&run_cfg, serde_json::to_string(&base).unwrap()).unwrap();
    let sweep = SweepConfig {
        base: base.clone(),
        eps_list: vec![0.4, 0.2, 0.1],
        refine: 2,
        tau: 0.25,
        horizon_factor: 3.0,
        t_max_cap: Some(200.0),
    };
    fs::write(&sweep_cfg, serde_json::to_string(&sweep).unwrap()).unwrap();

    let mut snapshots = Vec::new();
    for (i, out) in [tmp.join("a"), tmp.join("b")].iter().enumerate() {
        let mut files = Vec::new();
        for (cmd, cfg, key) in [("solve", &run_cfg, "run_dir"), ("sweep", &sweep_cfg, "sweep_dir")] {
            let stdout = match blowuplab(out, &[cmd, "--config", cfg.to_str().unwrap()]) {
                Ok(s) => s,
                Err(e) => return verdict(false, format!("run {i} {cmd} failed: {e}")),
            };
            let value: serde_json::Value = serde_json::from_str(&stdout).unwrap();
            let dir = PathBuf::from(value[key].as_str().unwrap());
            let rel = dir.strip_prefix(out).unwrap().to_path_buf();
            files.extend(artifact_bytes(&dir).into_iter().map(|(p, b)| (rel.join(p.file_name().unwrap()), b)));
        }
        // Re-running into the same directory must also leave identical bytes.
        if let Err(e) = blowuplab(out, &["solve", "--config", run_cfg.to_str().unwrap()]) {
            return verdict(false, format!("repeat solve failed: {e}"));
        }
        snapshots.push(files);
    }
    let identical = snapshots[0] == snapshots[1];
    let count = snapshots[0].len();
    let _ = fs::remove_dir_all(&tmp);
    verdict(identical && count >= 5, format!("{count} artifacts from two solve+sweep invocations, byte-identical: {identical}"))
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, Verdict, f64)> = Vec::new();
    let mut timed = |id: u32, f: &dyn Fn() -> Verdict| {
        let start = Instant::now();
        let v = f();
        let secs = start.elapsed().as_secs_f64();
        println!("criterion {id:>2} {} ({secs:.1}s)  {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((id, v, secs));
    };
    timed(1, &criterion_1);
    timed(2, &criterion_2);
    timed(3, &criterion_3);
    timed(4, &criterion_4);
    timed(5, &criterion_5);

    let start = Instant::now();
    let subcritical = sweep(&subcritical_sweep());
    let sweep_secs = start.elapsed().as_secs_f64();
    match &subcritical {
        Ok(result) => {
            timed(6, &|| criterion_6(result));
            timed(8, &|| criterion_8(result));
            timed(9, &|| criterion_9(result));
        }
        Err(e) => {
            for id in [6, 8, 9] {
                timed(id, &|| verdict(false, format!("subcritical sweep failed: {e}")));
            }
        }
    }
    println!("(subcritical sweep shared by criteria 6, 8, 9 took {sweep_secs:.1}s)");
    timed(7, &criterion_7);
    timed(10, &criterion_10);

    let failed: Vec<u32> = results.iter().filter(|(_, v, _)| !v.pass).map(|(id, _, _)| *id).collect();
    println!("acceptance: {} of {} criteria passed", results.len() - failed.len(), results.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
