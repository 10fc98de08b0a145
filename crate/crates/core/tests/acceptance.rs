//! Acceptance criteria. Runs as a plain binary and prints one line per
//! criterion; exits non-zero if any criterion fails.

use std::f64::consts::FRAC_PI_2;
use std::time::{Duration, Instant};

use gqfi_core::dynamics::{linear_slope, run_trajectory, IntegratorConfig};
use gqfi_core::fock::{self, FockConfig};
use gqfi_core::gaussian::{assemble_generators, ClassTag, GaussianState};
use gqfi_core::linalg;
use gqfi_core::models::{build_named, ModelName, ModelParams};
use gqfi_core::spectral::{self, BoundPoint, PositionBlockDecomposition};
use gqfi_core::{ModelSpec, Result};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn model(name: ModelName, m: usize) -> ModelSpec {
    build_named(name, m, &ModelParams::defaults_for(name)).unwrap()
}

fn model_with(name: ModelName, m: usize, f: impl Fn(&mut ModelParams)) -> ModelSpec {
    let mut p = ModelParams::defaults_for(name);
    f(&mut p);
    build_named(name, m, &p).unwrap()
}

/// Largest relative deviation from the mean.
fn flatness(v: &[f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x / mean - 1.0).abs()).fold(0.0, f64::max)
}

fn loglog_slope(ms: &[usize], y: &[f64]) -> f64 {
    let lx: Vec<f64> = ms.iter().map(|&m| (m as f64).ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_slope(&lx, &ly)
}

fn exp_rate(ms: &[usize], y: &[f64]) -> f64 {
    let x: Vec<f64> = ms.iter().map(|&m| m as f64).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_slope(&x, &ly)
}

fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

fn reports(name: ModelName, ms: &[usize]) -> Result<Vec<spectral::AsymptoticReport>> {
    ms.iter().map(|&m| spectral::asymptotic_report(&model(name, m))).collect()
}

fn c1() -> Result<Outcome> {
    let m = model_with(ModelName::CavityLocal, 1, |p| p.zeta = 0.3);
    let traj = run_trajectory(&m, &IntegratorConfig::new(1e-3, 10.0).with_stride(usize::MAX))?;
    let g = traj.last().unwrap();
    let q = fock::fidelity_qfis(&m, m.theta(), 1e-3, 10.0, &FockConfig::default())?;
    let (eg, ee) = ((q.i_g - g.i_g).abs() / g.i_g, (q.i_e - g.i_e).abs() / g.i_e);
    Ok(outcome(eg < 0.01 && ee < 0.01, format!("rel err I_G {eg:.2e}, I_E {ee:.2e}")))
}

fn c2() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for (name, want) in [(ModelName::CavityHybrid, ClassTag::Dissipative), (ModelName::TrappedNonreciprocal, ClassTag::ZeroDamping)] {
        for m in [1, 4, 8] {
            let model = model(name, m);
            let gen = assemble_generators(&model)?;
            let spec = spectral::decompose_drift(&gen)?;
            let g0 = GaussianState::vacuum(m).covariance;
            let cfg = IntegratorConfig::new(1e-3, 100.0).with_stride(1000);
            let traj = run_trajectory(&model, &cfg)?;
            for target in [1.0, 10.0, 100.0] {
                let s = traj.iter().find(|s| (s.t - target).abs() < 1e-6).expect("recorded time");
                let closed = match want {
                    ClassTag::Dissipative => spectral::dissipative_solution(&gen, &spec, &g0, s.t)?,
                    _ => spectral::zero_damping_solution(&gen, &spec, &g0, s.t)?,
                };
                worst = worst.max(linalg::max_abs(&(closed - &s.gamma)));
            }
        }
    }
    Ok(outcome(worst < 1e-8, format!("max-abs {worst:.2e}")))
}

fn c3() -> Result<Outcome> {
    let m = model(ModelName::CavityLocal, 60);
    let dt = 1e-2;
    let traj = run_trajectory(&m, &IntegratorConfig::new(dt, 500.0).with_stride(100))?;
    let tail: Vec<_> = traj.iter().filter(|s| s.t >= 480.0 - 1e-9).collect();
    let t: Vec<f64> = tail.iter().map(|s| s.t).collect();
    let sg = linear_slope(&t, &tail.iter().map(|s| s.i_g).collect::<Vec<_>>());
    let se = linear_slope(&t, &tail.iter().map(|s| s.i_e).collect::<Vec<_>>());
    let rel = (sg - se).abs() / sg;
    Ok(outcome(rel < 1e-3, format!("slopes I_G {sg:.6}, I_E {se:.6}, rel diff {rel:.2e}")))
}

fn dissipative_row(name: ModelName, target: f64, tol: f64) -> Result<Outcome> {
    let ms: Vec<usize> = (8..=60).collect();
    let r = reports(name, &ms)?;
    let slope = loglog_slope(&ms, &r.iter().map(|r| r.rate_ig).collect::<Vec<_>>());
    let nbar = flatness(&r.iter().map(|r| r.nbar).collect::<Vec<_>>());
    Ok(outcome(
        (slope - target).abs() <= tol && nbar <= 0.05,
        format!("slope {slope:.4} (target {target} +/- {tol}), nbar flatness {nbar:.4}"),
    ))
}

fn c4() -> Result<Outcome> {
    dissipative_row(ModelName::CavityLocal, 1.0, 0.05)
}

fn c5() -> Result<Outcome> {
    dissipative_row(ModelName::CavityHybrid, 2.0, 0.1)
}

fn c6() -> Result<Outcome> {
    let ms: Vec<usize> = (8..=60).collect();
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, target, tol) in [(ModelName::TrappedLocal, 1.0, 0.05), (ModelName::TrappedGlobal, 2.0, 0.1)] {
        let r = reports(name, &ms)?;
        let sg = loglog_slope(&ms, &r.iter().map(|r| r.rate_ig).collect::<Vec<_>>());
        let se = loglog_slope(&ms, &r.iter().map(|r| r.rate_ie).collect::<Vec<_>>());
        let fl = flatness(&r.iter().map(|r| r.nbar).collect::<Vec<_>>());
        pass &= (sg - target).abs() <= tol && (se - target).abs() <= tol && fl <= 0.05;
        detail.push(format!("{name}: slopes {sg:.4}/{se:.4}, nbar rate flatness {fl:.4}"));
    }
    Ok(outcome(pass, detail.join("; ")))
}

fn c7() -> Result<Outcome> {
    let ms: Vec<usize> = (30..=60).collect();
    let r = reports(ModelName::TrappedNonreciprocal, &ms)?;
    let two_over_xi = (1.1f64 / 0.9).ln();
    let rn = exp_rate(&ms, &r.iter().map(|r| r.nbar).collect::<Vec<_>>());
    let rg = exp_rate(&ms, &r.iter().map(|r| r.rate_ig).collect::<Vec<_>>());
    let se = loglog_slope(&ms, &r.iter().map(|r| r.rate_ie).collect::<Vec<_>>());
    let ok = |v: f64| (v / two_over_xi - 1.0).abs() <= 0.10;
    Ok(outcome(
        ok(rn) && ok(rg) && (se - 1.0).abs() <= 0.1,
        format!("nbar rate exp {rn:.4}, I_G exp {rg:.4} (target {two_over_xi:.4} +/- 10%), I_E slope {se:.4}"),
    ))
}

fn c8() -> Result<Outcome> {
    let p = ModelParams::defaults_for(ModelName::TrappedNonreciprocalUniformDiag);
    let (t_r, t_l) = (p.k + p.gamma * p.dphi.sin(), p.k - p.gamma * p.dphi.sin());
    let mut err: f64 = 0.0;
    let mut fit: f64 = 0.0;
    for l in [10usize, 40] {
        let s = spectral::skin_spectrum(t_r, t_l, p.omega + 2.0 * p.k, l)?;
        err = err.max(s.max_abs_error);
        // modes away from the band edges
        let bulk = &s.fitted_exponents[l / 8..l - l / 8];
        let mean = bulk.iter().sum::<f64>() / bulk.len() as f64;
        fit = fit.max((mean / s.profile_exponent - 1.0).abs());
    }
    Ok(outcome(err < 1e-10 && fit < 0.01, format!("eigenvalue max-abs {err:.2e}, localization length rel err {fit:.2e}")))
}

fn c9() -> Result<Outcome> {
    let ms: Vec<usize> = (10..=60).collect();
    let x: Vec<f64> = ms.iter().map(|&m| m as f64).collect();
    let t_star = |dphi: f64| -> Result<Vec<f64>> {
        ms.iter()
            .map(|&m| {
                let model = model_with(ModelName::TrappedNonreciprocal, m, |p| p.dphi = dphi);
                let gen = assemble_generators(&model)?;
                let spec = spectral::decompose_drift(&gen)?;
                Ok(spectral::dephasing_time(&gen, &spec)?.t_star)
            })
            .collect()
    };
    let t0 = t_star(0.0)?;
    let s0 = linear_slope(&x, &t0);
    let limit = 0.05 * t0[0] / 10.0;
    let t2 = t_star(-FRAC_PI_2)?;
    let s2 = linear_slope(&x, &t2);
    let r2 = r_squared(&x, &t2);
    Ok(outcome(
        s0.abs() < limit && s2 > 0.0 && r2 > 0.99,
        format!("dphi=0 slope {s0:.4} (limit {limit:.4}); dphi=-pi/2 slope {s2:.4}, R^2 {r2:.5}"),
    ))
}

fn c10() -> Result<Outcome> {
    let ms: Vec<usize> = (8..=60).step_by(4).collect();
    let mut pass = true;
    let mut detail = Vec::new();
    for name in ModelName::ALL {
        let local = !matches!(name, ModelName::CavityHybrid | ModelName::TrappedGlobal);
        let r = reports(name, &ms)?;
        let mut series: Vec<(&str, Vec<BoundPoint>)> = Vec::new();
        if name.is_cavity() {
            series.push(("G", ms.iter().zip(&r).map(|(&m, r)| BoundPoint { modes: m, optimized_rate: r.optimized.rate_ig, resource: r.nbar }).collect()));
        } else {
            series.push(("G", ms.iter().zip(&r).map(|(&m, r)| BoundPoint { modes: m, optimized_rate: r.optimized.rate_ig, resource: r.nbar }).collect()));
            series.push(("E", ms.iter().zip(&r).map(|(&m, r)| BoundPoint { modes: m, optimized_rate: r.optimized.rate_ie, resource: 1.0 }).collect()));
        }
        for (tag, pts) in series {
            // flatness is judged on the large-M half of the sweep
            let tail: Vec<BoundPoint> = pts.into_iter().filter(|p| p.modes >= 32).collect();
            let b = spectral::check_bounds(&tail);
            let (ratios, constant) = if local { (&b.lower_ratios, b.lower_constant) } else { (&b.upper_ratios, b.upper_constant) };
            let fl = flatness(ratios);
            let ok = constant > 0.0 && constant.is_finite() && fl <= 0.10;
            pass &= ok;
            detail.push(format!("{name}/{tag} {} flatness {fl:.3}", if local { "lower" } else { "upper" }));
        }
    }
    Ok(outcome(pass, detail.join("; ")))
}

fn c11() -> Result<Outcome> {
    let mut runner = TestRunner::new(Config { cases: 96, failure_persistence: None, ..Config::default() });
    let strategy = (0..ModelName::ALL.len(), 1usize..=20, 0.05f64..0.5, -2.0f64..2.0, 0.5f64..6.0);
    let res = runner.run(&strategy, |(idx, m, g, theta, t)| {
        let name = ModelName::ALL[idx];
        let model = model_with(name, m, |p| {
            p.gamma = if name == ModelName::CavityLocal { 0.0 } else { g };
            p.zeta = g;
        })
        .with_theta(theta);
        let cfg = IntegratorConfig::new(5e-3, t).with_stride(100);
        let traj = run_trajectory(&model, &cfg).map_err(|e| TestCaseError::fail(format!("{name} M={m}: {e}")))?;
        for s in &traj {
            let margin = GaussianState { mean: s.phi.clone(), covariance: s.gamma.clone() }.check_uncertainty(s.t);
            prop_assert!(margin.is_ok(), "{name} M={m} t={}", s.t);
            let tol = 1e-10 * s.i_g.abs().max(1.0);
            prop_assert!(s.i_e >= -tol && s.i_e <= s.i_g + tol, "{name} M={m}: I_E {} I_G {}", s.i_e, s.i_g);
        }
        let other = run_trajectory(&model.with_theta(theta + 0.7), &cfg).unwrap();
        for (a, b) in traj.iter().zip(&other) {
            prop_assert!(a.i_g.to_bits() == b.i_g.to_bits() && a.delta_i.to_bits() == b.delta_i.to_bits());
            prop_assert!(a.gamma == b.gamma && a.w == b.w);
        }
        if !name.is_cavity() {
            let gen = assemble_generators(&model).unwrap();
            let pbd = PositionBlockDecomposition::new(&model, &gen).unwrap();
            let (a, b) = (pbd.retained_matrix(), pbd.retained_matrix_via_inverse());
            prop_assert!(linalg::max_abs(&(&a - &b)) <= 1e-8 * linalg::max_abs(&a), "{name} M={m}");
        }
        Ok(())
    });
    Ok(match res {
        Ok(()) => outcome(true, "96 cases"),
        Err(e) => outcome(false, e.to_string()),
    })
}

fn main() {
    type Check = fn() -> Result<Outcome>;
    let criteria: [(Check, Duration); 11] = [
        (c1, Duration::from_secs(30)),
        (c2, Duration::from_secs(60)),
        (c3, Duration::from_secs(600)),
        (c4, Duration::from_secs(60)),
        (c5, Duration::from_secs(120)),
        (c6, Duration::from_secs(120)),
        (c7, Duration::from_secs(180)),
        (c8, Duration::from_secs(60)),
        (c9, Duration::from_secs(600)),
        (c10, Duration::from_secs(600)),
        (c11, Duration::from_secs(120)),
    ];
    let mut failed = 0;
    for (i, (check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let res = check();
        let elapsed = start.elapsed();
        let (pass, detail) = match res {
            Ok(o) => (o.pass && elapsed <= *budget, o.detail),
            Err(e) => (false, format!("error {}: {e}", e.name())),
        };
        if !pass {
            failed += 1;
        }
        println!("criterion {}: {} {detail} [{:.1}s]", i + 1, if pass { "PASS" } else { "FAIL" }, elapsed.as_secs_f64());
    }
    println!("{} of 11 criteria passed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
