//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line
//! with the measured values, then asserts. Tolerances come from the bundled
//! thresholds file.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use limitshape::curve::{ConvexCurve, CurveSpec, Preset};
use limitshape::harness::{
    calibration_slopes, compare_with_sampler, emit_report, exact_conditional_oracle, run, run_lclt_study,
    run_limit_shape_study, run_moment_study, ExperimentConfig, LcltSettings, Mode, Thresholds, CALIBRATION_GRID,
};
use limitshape::lattice::{coprime_sum, mobius_inverted_sum, MobiusTable};
use limitshape::measure::{calibration_residual, delta, kappa, MeasureParams, KAPPA_REFERENCE};
use limitshape::sum::CompensatedSum;

fn th() -> Thresholds {
    Thresholds::pinned()
}

fn preset(p: Preset) -> ConvexCurve {
    ConvexCurve::preset(p).unwrap()
}

fn parabola() -> ConvexCurve {
    preset(Preset::Parabola { c: 1.0 })
}

/// `g(u) = (e^u − 1)/(e − 1)` on 257 samples.
fn exponential() -> ConvexCurve {
    let n = 257;
    let d = std::f64::consts::E - 1.0;
    let pts: Vec<[f64; 2]> = (0..n).map(|i| i as f64 / (n - 1) as f64).map(|u| [u, u.exp_m1() / d]).collect();
    ConvexCurve::tabulated(&pts, 0.01).unwrap()
}

fn verdict(n: u32, passed: bool, elapsed: Duration, budget: Duration, detail: &str) {
    let ok = passed && elapsed <= budget;
    // straight to the process stdout so the line shows without --nocapture
    let _ = writeln!(
        std::io::stdout().lock(),
        "criterion {n}: {} ({:.1} s of {:.0} s) {detail}",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    assert!(passed, "criterion {n} failed: {detail}");
    assert!(elapsed <= budget, "criterion {n} over its runtime budget");
}

fn decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn non_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] >= w[0])
}

#[test]
fn criterion_01_calibration_identity() {
    let start = Instant::now();
    let tol = th().calibration_residual;
    let presets =
        [Preset::Parabola { c: 1.0 }, Preset::Parabola { c: 2.0 }, Preset::Power { p: 2.0 }, Preset::CircleArc];
    let mut worst = Vec::new();
    for p in presets {
        let c = preset(p);
        let w = calibration_slopes(&c, CALIBRATION_GRID)
            .into_iter()
            .map(|t| calibration_residual(&c, t).unwrap().abs())
            .fold(0.0, f64::max);
        worst.push(w);
    }
    let passed = worst.iter().all(|&w| w < tol);
    verdict(
        1,
        passed,
        start.elapsed(),
        Duration::from_secs(1),
        &format!("max |residual| per preset {worst:?} < {tol:e}"),
    );
}

#[test]
fn criterion_02_parabola_degeneracy() {
    let start = Instant::now();
    let tol = th().parabola_constancy;
    let kappa_ok = (kappa() - KAPPA_REFERENCE).abs() <= 4.0 * f64::EPSILON;
    let mut spreads = Vec::new();
    for c in [0.5, 1.0, 2.0] {
        let curve = preset(Preset::Parabola { c });
        let expect = KAPPA_REFERENCE * (c / 2.0).cbrt();
        let s = calibration_slopes(&curve, CALIBRATION_GRID)
            .into_iter()
            .map(|t| (delta(&curve, t).0 - expect).abs())
            .fold(0.0, f64::max);
        spreads.push(s);
    }
    let passed = kappa_ok && spreads.iter().all(|&s| s < tol);
    verdict(
        2,
        passed,
        start.elapsed(),
        Duration::from_secs(1),
        &format!(
            "kappa {} vs reference {KAPPA_REFERENCE}; max |delta1 - kappa (c/2)^(1/3)| for c = 0.5, 1, 2: {spreads:?}",
            kappa()
        ),
    );
}

#[test]
fn criterion_03_mobius_machinery() {
    let start = Instant::now();
    let t = th();
    let table = MobiusTable::sieve(1_000_000).unwrap();
    type F = Box<dyn Fn(f64, f64) -> f64>;
    let cases: Vec<(&str, F, f64, f64)> = vec![
        ("exp(-|y|_1)", Box::new(|a, b| (-(a + b)).exp()), 1.0, 60.0),
        ("y1 exp(-|y|_1)", Box::new(|a, b| a * (-(a + b)).exp()), 0.5, 120.0),
        ("y2^2 exp(-|y|_1)", Box::new(|a, b| b * b * (-(a + b)).exp()), 0.25, 260.0),
        ("exp(-|y|_2)", Box::new(|a: f64, b: f64| (-a.hypot(b)).exp()), 0.2, 300.0),
        ("exp(-y1 - 2 y2)", Box::new(|a, b| (-a - 2.0 * b).exp()), 0.1, 700.0),
        (
            "geometric mean",
            Box::new(|a, b| {
                let e = (-(a + b)).exp();
                e / (1.0 - e).max(1e-300)
            }),
            0.3,
            200.0,
        ),
        ("(1+|y|^2)^-3", Box::new(|a, b| (1.0 + a * a + b * b).powi(-3)), 1.0, 2000.0),
        ("indicator |y|_1 <= 40", Box::new(|a, b| if a + b <= 40.0 { 1.0 } else { 0.0 }), 1.0, 50.0),
        ("cos(y1) exp(-|y|_1)", Box::new(|a, b| a.cos() * (-(a + b)).exp()), 0.7, 100.0),
        ("zero", Box::new(|_, _| 0.0), 1.0, 10.0),
    ];
    let mut worst = 0.0f64;
    for (name, f, h, r) in &cases {
        let direct = coprime_sum(f, *h, *r);
        let inverted = mobius_inverted_sum(f, *h, *r, 1e-8 * direct.abs().max(1e-300), &table)
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        let rel = if direct == 0.0 { inverted.abs() } else { ((direct - inverted) / direct).abs() };
        worst = worst.max(rel);
    }
    let s: CompensatedSum = (1..=1_000_000usize).map(|m| table.mu(m) as f64 / (m as f64 * m as f64)).collect();
    let zeta_gap = (s.value() - 6.0 / std::f64::consts::PI.powi(2)).abs();
    let passed = worst <= t.mobius_relative && zeta_gap <= t.inverse_zeta2;
    verdict(
        3,
        passed,
        start.elapsed(),
        Duration::from_secs(10),
        &format!("{} functions, worst relative gap {worst:e}; |sum mu(m)/m^2 - 6/pi^2| = {zeta_gap:e}", cases.len()),
    );
}

#[test]
fn criterion_04_mean_length_calibration() {
    let start = Instant::now();
    let tol = th().mean_length_gap;
    let endpoints: Vec<[u64; 2]> = [1_000u64, 10_000, 100_000, 1_000_000].iter().map(|&n| [n, n]).collect();
    let m = run_moment_study(&parabola(), &endpoints).unwrap();
    let gaps = &m.sup_length_gap;
    let passed = decreasing(gaps) && *gaps.last().unwrap() < tol;
    verdict(4, passed, start.elapsed(), Duration::from_secs(300), &format!("sup gaps {gaps:?}, last < {tol}"));
}

#[test]
fn criterion_05_endpoint_bias() {
    let start = Instant::now();
    let tol = th().endpoint_bias_slope;
    let endpoints: Vec<[u64; 2]> = [1_000u64, 10_000, 100_000].iter().map(|&n| [n, n]).collect();
    let m = run_moment_study(&parabola(), &endpoints).unwrap();
    let passed = m.bias_slopes.iter().all(|&s| s <= tol);
    verdict(
        5,
        passed,
        start.elapsed(),
        Duration::from_secs(120),
        &format!("bias/n1^(2/3) {:?}, log-log slopes {:?} <= {tol}", m.endpoint_bias, m.bias_slopes),
    );
}

#[test]
fn criterion_06_covariance_asymptotics() {
    let start = Instant::now();
    let [lo, hi] = th().covariance_ratio;
    let mut ratios = Vec::new();
    for curve in [parabola(), preset(Preset::Power { p: 2.0 })] {
        let n2 = (curve.c_gamma() * 1e5).round() as u64;
        let p = MeasureParams::new(&curve, 100_000, n2).unwrap();
        let k = p.covariance_matrix().unwrap();
        let a = p.covariance_asymptote().unwrap();
        ratios.push([k[0][0] / a[0][0], k[0][1] / a[0][1], k[1][1] / a[1][1]]);
    }
    let passed = ratios.iter().flatten().all(|&r| r >= lo && r <= hi);
    verdict(
        6,
        passed,
        start.elapsed(),
        Duration::from_secs(120),
        &format!("K/asymptote (11, 12, 22) for parabola, power(2): {ratios:?}"),
    );
}

#[test]
fn criterion_07_local_clt() {
    let start = Instant::now();
    let t = th();
    let [lo, hi] = t.lclt_ratio;
    let c = parabola();
    let mut studies = Vec::new();
    for (i, n1) in [200u64, 400].into_iter().enumerate() {
        let s = LcltSettings { n1, replicates: 10_000_000, half_width: 2 };
        studies.push(run_lclt_study(&c, &s, 7 + i as u64, t.lclt_min_expected_hits).unwrap());
    }
    let ratio = studies[0].at_n.frequency / studies[0].at_n.density;
    let scaling = studies[0].at_n.frequency / studies[1].at_n.frequency;
    let expect = 2f64.powf(4.0 / 3.0);
    let passed = ratio >= lo && ratio <= hi && ((scaling / expect) - 1.0).abs() <= t.lclt_scaling_tolerance;
    verdict(
        7,
        passed,
        start.elapsed(),
        Duration::from_secs(1200),
        &format!(
            "P(xi=n)/f(n) at n1=200: {} / {} = {ratio:.3} in [{lo}, {hi}]; P(200)/P(400) = {scaling:.3} vs 2^(4/3) = {expect:.3}; chi2/cell {:.2}, {:.2}",
            studies[0].at_n.frequency, studies[0].at_n.density, studies[0].chi2_per_cell, studies[1].chi2_per_cell
        ),
    );
}

#[test]
fn criterion_08_limit_shape() {
    let start = Instant::now();
    let t = th();
    let eps = t.limit_shape_epsilon;
    let seed = 42;
    let n1s = [1_000u64, 10_000, 100_000];
    let mut lines = Vec::new();
    let mut passed = true;
    for (name, curve) in [("parabola(1)", parabola()), ("exponential", exponential())] {
        let ends: Vec<[u64; 2]> = n1s.iter().map(|&n| [n, (curve.c_gamma() * n as f64).round() as u64]).collect();
        let s = run_limit_shape_study(&curve, &ends, 200, seed, &[eps], false, 1).unwrap();
        let fr: Vec<f64> = s.fractions.iter().map(|f| f[0]).collect();
        let ok = non_decreasing(&fr) && *fr.last().unwrap() >= t.limit_shape_fraction;
        passed &= ok;
        lines.push(format!("{name} unconditioned fractions {fr:?}"));
    }
    let ends = [[100u64, 100], [200, 200]];
    let s = run_limit_shape_study(&parabola(), &ends, 200, seed, &[0.2, eps], true, 10_000_000).unwrap();
    let fr: Vec<Vec<f64>> = s.fractions.clone();
    let ok = s.accepted.iter().all(|&k| k >= t.conditioned_min_accepted)
        && non_decreasing(&fr.iter().map(|f| f[0]).collect::<Vec<_>>())
        && non_decreasing(&fr.iter().map(|f| f[1]).collect::<Vec<_>>());
    passed &= ok;
    lines.push(format!("conditioned accepted {:?}, fractions at eps 0.2 and {eps} {fr:?}", s.accepted));
    verdict(8, passed, start.elapsed(), Duration::from_secs(1800), &lines.join("; "));
}

#[test]
fn criterion_09_oracle_equivalence() {
    let start = Instant::now();
    let sigma = th().oracle_sigma;
    let instances: [(Preset, [u64; 2]); 6] = [
        (Preset::Parabola { c: 1.0 }, [1, 1]),
        (Preset::Parabola { c: 1.0 }, [2, 2]),
        (Preset::Parabola { c: 2.0 }, [1, 2]),
        (Preset::CircleArc, [2, 2]),
        (Preset::Power { p: 2.0 }, [2, 2]),
        (Preset::CircleArc, [3, 1]),
    ];
    let mut details = Vec::new();
    let mut passed = true;
    for (i, (p, n)) in instances.iter().enumerate() {
        let params = MeasureParams::new(&preset(*p), n[0], n[1]).unwrap();
        let target = [n[0] as i64, n[1] as i64];
        let o = exact_conditional_oracle(&params, 4, 4, target).unwrap();
        let cmp = compare_with_sampler(&params, &o, 20_000, 100 + i as u64).unwrap();
        passed &= o.covers_target && !o.is_empty() && cmp.within(sigma);
        details.push(format!("{n:?}: {} lines, max |z| {:.2}", cmp.rows.len(), cmp.max_abs_sigma));
    }
    verdict(
        9,
        passed,
        start.elapsed(),
        Duration::from_secs(300),
        &format!("{}; band {sigma} sigma", details.join(", ")),
    );
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn criterion_10_determinism() {
    let start = Instant::now();
    let t = th();
    let base = ExperimentConfig {
        curve: CurveSpec::Preset(Preset::Parabola { c: 1.0 }),
        n1: vec![100, 200],
        replicates: 16,
        seed: 2024,
        lclt: vec![LcltSettings { n1: 20, replicates: 200_000, half_width: 2 }],
        oracle: vec![limitshape::harness::OracleInstance {
            curve: CurveSpec::Preset(Preset::Parabola { c: 1.0 }),
            n: [2, 1],
            cap_radius: 3,
            nu_cap: 3,
        }],
        oracle_draws: Some(500),
        max_attempts: 1_000_000,
        ..ExperimentConfig::from_json(r#"{"curve": {"preset": {"name": "circle_arc"}}, "n1": [1], "replicates": 1}"#)
            .unwrap()
    };
    let modes = [Mode::Calibrate, Mode::Sample, Mode::Condition, Mode::Verify, Mode::Profile, Mode::Oracle];
    let root = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (k, workers) in [1usize, 4, 16, 4].into_iter().enumerate() {
        let dir = root.path().join(format!("run{k}"));
        let cfg = ExperimentConfig { workers, ..base.clone() };
        for mode in modes {
            let r = run(&cfg, mode, &t).unwrap();
            emit_report(&r, &dir.join(mode.name())).unwrap();
        }
        let files: Vec<_> = modes.iter().flat_map(|m| csv_files(&dir.join(m.name()))).collect();
        outputs.push(files);
    }
    let count = outputs[0].len();
    let passed = count > 0 && outputs.iter().all(|o| *o == outputs[0]);
    verdict(
        10,
        passed,
        start.elapsed(),
        Duration::from_secs(600),
        &format!("{count} CSV files per run, byte-identical under 1, 4, 16 workers and a repeat at 4"),
    );
}
