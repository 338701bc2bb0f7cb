//! Experiment driver: configs, convergence studies, the exact-enumeration
//! oracle and report emission.

pub mod config;
pub mod oracle;
pub mod report;
pub mod studies;

use serde_json::json;

use crate::curve::{ConvexCurve, CurveSpec, Preset};
use crate::error::{Error, Result};
use crate::measure::{calibration_residual, delta, kappa, MeasureParams};
use crate::metrics::curve_polyline;

pub use config::{AspectRule, ExperimentConfig, LcltSettings, Mode, OracleInstance, Thresholds};
pub use oracle::{compare_with_sampler, exact_conditional_oracle, OracleComparison, OracleDistribution};
pub use report::{emit_report, Check, Plot, PolylineRecord, Report, Table};
pub use studies::{
    lclt_rows, run_lclt_study, run_limit_shape_study, run_moment_study, ConvergenceRow, LcltStudy, LimitShapeStudy,
    MomentStudy,
};

/// Slope grid size of the calibration table.
pub const CALIBRATION_GRID: usize = 64;

/// Accepted draws per oracle instance when the config does not say.
pub const DEFAULT_ORACLE_DRAWS: u64 = 20_000;

/// Runs `mode` (or the config's own mode) on a pool of `cfg.workers` threads.
pub fn run(cfg: &ExperimentConfig, mode: Mode, thresholds: &Thresholds) -> Result<Report> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {} workers: {e}", cfg.workers)))?;
    pool.install(|| match mode {
        Mode::Calibrate => calibrate(cfg, thresholds),
        Mode::Sample => limit_shape(cfg, thresholds, false),
        Mode::Condition => limit_shape(cfg, thresholds, true),
        Mode::Verify => verify(cfg),
        Mode::Profile => profile(cfg, thresholds),
        Mode::Oracle => oracle_mode(cfg, thresholds),
    })
}

/// Slopes strictly inside the curve's range, uniform in tangent angle.
pub fn calibration_slopes(curve: &ConvexCurve, points: usize) -> Vec<f64> {
    let th0 = curve.t0().atan();
    let th1 = if curve.t1().is_infinite() { std::f64::consts::FRAC_PI_2 } else { curve.t1().atan() };
    (1..=points).map(|i| (th0 + (th1 - th0) * i as f64 / (points + 1) as f64).tan()).collect()
}

fn calibrate(cfg: &ExperimentConfig, th: &Thresholds) -> Result<Report> {
    let curve = cfg.curve.build()?;
    let mut r = Report::new(Mode::Calibrate.name());
    let mut t = Table::new("calibration", &["t", "delta1", "delta2", "residual"]);
    let mut worst = 0.0f64;
    let (mut d_min, mut d_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in calibration_slopes(&curve, CALIBRATION_GRID) {
        let (d1, d2) = delta(&curve, s);
        let res = calibration_residual(&curve, s)?;
        worst = worst.max(res.abs());
        d_min = d_min.min(d1);
        d_max = d_max.max(d1);
        t.push(vec![report::num(s), report::num(d1), report::num(d2), report::num(res)]);
    }
    r.tables.push(t);
    let tol = if curve.is_analytic() { th.calibration_residual } else { th.tabulated_calibration_residual };
    r.checks.push(Check::new("calibration_residual", worst < tol, format!("max |residual| {worst:e} < {tol:e}")));
    if let CurveSpec::Preset(Preset::Parabola { c }) = cfg.curve {
        let expect = kappa() * (c / 2.0).cbrt();
        let spread = (d_max - d_min).max((d_max - expect).abs()).max((d_min - expect).abs());
        r.checks.push(Check::new(
            "parabola_constant_tilt",
            spread < th.parabola_constancy,
            format!("delta1 within {spread:e} of kappa (c/2)^(1/3) = {expect}"),
        ));
    }
    let mut reports = Vec::new();
    for [n1, n2] in cfg.endpoints(curve.c_gamma()) {
        let p = MeasureParams::new(&curve, n1, n2)?;
        reports.push(json!({ "n": [n1, n2], "alpha": p.alpha(), "lattice_radius": p.lattice_radius(), "report": p.moment_report()? }));
    }
    r.documents.push(("moment_report".into(), json!({ "kappa": kappa(), "endpoints": reports })));
    Ok(r)
}

fn is_non_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] >= w[0])
}

fn is_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn shape_study(cfg: &ExperimentConfig, curve: &ConvexCurve, conditioned: bool) -> Result<LimitShapeStudy> {
    run_limit_shape_study(
        curve,
        &cfg.endpoints(curve.c_gamma()),
        cfg.replicates,
        cfg.seed,
        &cfg.epsilons,
        conditioned,
        cfg.max_attempts,
    )
}

fn replicate_table(study: &LimitShapeStudy) -> Table {
    let mut t = Table::new("verify", &["replicate", "n1", "d_hausdorff", "d_length", "argmax_t"]);
    for row in &study.replicates {
        t.push(vec![
            row.replicate.to_string(),
            row.n1.to_string(),
            report::num(row.d_hausdorff),
            report::num(row.d_length),
            report::num(row.argmax_t),
        ]);
    }
    t
}

fn add_lines(r: &mut Report, study: &LimitShapeStudy, curve: &ConvexCurve, prefix: &str) -> Result<()> {
    let poly = curve_polyline(curve)?;
    let mut records = Vec::new();
    for (n, lines) in &study.examples {
        let scale = 1.0 / n[0] as f64;
        r.plots.push(Plot {
            name: format!("{prefix}_n1_{}", n[0]),
            title: format!("{} scaled lines at n = ({}, {})", lines.len(), n[0], n[1]),
            curve: poly.clone(),
            lines: lines.iter().map(|(_, l)| l.scale(scale)).collect(),
        });
        records.extend(lines.iter().map(|(i, l)| PolylineRecord {
            label: format!("{prefix}_n1_{}", n[0]),
            n: *n,
            replicate: *i,
            vertices: l.vertices.clone(),
            endpoint: l.endpoint,
            length: l.length(),
        }));
    }
    r.polylines.push((format!("{prefix}_lines"), records));
    Ok(())
}

fn limit_shape(cfg: &ExperimentConfig, th: &Thresholds, conditioned: bool) -> Result<Report> {
    let curve = cfg.curve.build()?;
    let mode = if conditioned { Mode::Condition } else { Mode::Sample };
    let study = shape_study(cfg, &curve, conditioned)?;
    let mut r = Report::new(mode.name());
    r.tables.push(Table::convergence("limit_shape", &study.rows));
    r.tables.push(replicate_table(&study));
    add_lines(&mut r, &study, &curve, mode.name())?;
    let eps = th.limit_shape_epsilon;
    let fr: Vec<f64> = match cfg.epsilons.iter().position(|&e| e == eps) {
        Some(j) => study.fractions.iter().map(|f| f[j]).collect(),
        None => {
            r.notes.push(format!("epsilon {eps} is not in the configured grid; no limit-shape check"));
            return Ok(r);
        }
    };
    r.checks.push(Check::new(
        "fraction_non_decreasing",
        is_non_decreasing(&fr),
        format!("fraction with d_L <= {eps} by n1: {fr:?}"),
    ));
    if conditioned {
        let min = *study.accepted.iter().min().unwrap_or(&0);
        r.checks.push(Check::new(
            "accepted_lines",
            min >= th.conditioned_min_accepted,
            format!("accepted lines by n1: {:?}, need {}", study.accepted, th.conditioned_min_accepted),
        ));
    } else {
        let last = fr.last().copied().unwrap_or(f64::NAN);
        r.checks.push(Check::new(
            "fraction_at_largest_n1",
            last >= th.limit_shape_fraction,
            format!("{last} >= {}", th.limit_shape_fraction),
        ));
    }
    Ok(r)
}

fn verify(cfg: &ExperimentConfig) -> Result<Report> {
    let curve = cfg.curve.build()?;
    let study = shape_study(cfg, &curve, cfg.conditioned)?;
    let mut r = Report::new(Mode::Verify.name());
    r.tables.push(replicate_table(&study));
    r.tables.push(Table::convergence("verify_summary", &study.rows));
    let med = |name: &str| -> Vec<f64> {
        study.rows.iter().filter(|row| row.statistic == name).map(|row| row.empirical).collect()
    };
    let (ml, mh) = (med("median_d_length"), med("median_d_hausdorff"));
    r.checks.push(Check::new(
        "medians_decrease",
        is_decreasing(&ml) && is_decreasing(&mh),
        format!("median d_L {ml:?}, median d_H {mh:?}"),
    ));
    Ok(r)
}

fn profile(cfg: &ExperimentConfig, th: &Thresholds) -> Result<Report> {
    let curve = cfg.curve.build()?;
    let mut r = Report::new(Mode::Profile.name());
    let endpoints = cfg.endpoints(curve.c_gamma());
    if !endpoints.is_empty() {
        let m = run_moment_study(&curve, &endpoints)?;
        r.tables.push(Table::convergence("moments", &m.rows));
        let last = m.sup_length_gap.last().copied().unwrap_or(f64::NAN);
        r.checks.push(Check::new(
            "length_gap_decreasing",
            is_decreasing(&m.sup_length_gap) && last < th.mean_length_gap,
            format!("sup gaps {:?}, last < {}", m.sup_length_gap, th.mean_length_gap),
        ));
        if endpoints.len() >= 2 {
            let s = m.bias_slopes;
            r.checks.push(Check::new(
                "endpoint_bias_bounded",
                s.iter().all(|&x| x <= th.endpoint_bias_slope),
                format!("log-log slopes {s:?} <= {}", th.endpoint_bias_slope),
            ));
        }
        let [lo, hi] = th.covariance_ratio;
        let k = m.covariance_ratio.last().copied().unwrap_or([f64::NAN; 3]);
        r.checks.push(Check::new(
            "covariance_ratio",
            k.iter().all(|&x| x >= lo && x <= hi),
            format!("entry ratios {k:?} at the largest n1 in [{lo}, {hi}]"),
        ));
    }
    if !cfg.lclt.is_empty() {
        let mut studies = Vec::new();
        for (i, s) in cfg.lclt.iter().enumerate() {
            studies.push(run_lclt_study(&curve, s, cfg.seed.wrapping_add(i as u64), th.lclt_min_expected_hits)?);
        }
        let mut t = Table::new("lclt_cells", &["n1", "m1", "m2", "hits", "frequency", "density", "std_error"]);
        for s in &studies {
            for c in &s.cells {
                t.push(vec![
                    s.n[0].to_string(),
                    c.m[0].to_string(),
                    c.m[1].to_string(),
                    c.hits.to_string(),
                    report::num(c.frequency),
                    report::num(c.density),
                    report::num(c.std_error),
                ]);
            }
        }
        r.tables.push(t);
        let rows = lclt_rows(&studies);
        let [lo, hi] = th.lclt_ratio;
        for s in &studies {
            let ratio = s.at_n.frequency / s.at_n.density;
            r.checks.push(Check::new(
                format!("lclt_ratio_n1_{}", s.n[0]),
                ratio >= lo && ratio <= hi,
                format!("P(xi = n) {} over density {} = {ratio} in [{lo}, {hi}]", s.at_n.frequency, s.at_n.density),
            ));
        }
        for row in rows.iter().filter(|row| row.statistic.starts_with("p_at_n_ratio")) {
            r.checks.push(Check::new(
                format!("lclt_scaling_n1_{}", row.n1),
                (row.ratio - 1.0).abs() <= th.lclt_scaling_tolerance,
                format!("ratio {} vs {} (within {})", row.empirical, row.theoretical, th.lclt_scaling_tolerance),
            ));
        }
        r.tables.push(Table::convergence("lclt", &rows));
    }
    Ok(r)
}

fn oracle_mode(cfg: &ExperimentConfig, th: &Thresholds) -> Result<Report> {
    let mut r = Report::new(Mode::Oracle.name());
    let mut t = Table::new("oracle", &["instance", "n1", "n2", "line", "probability", "expected", "observed", "sigma"]);
    let draws = cfg.oracle_draws.unwrap_or(DEFAULT_ORACLE_DRAWS);
    for (i, inst) in cfg.oracle.iter().enumerate() {
        let curve = inst.curve.build()?;
        let params = MeasureParams::new(&curve, inst.n[0], inst.n[1])?;
        let n = [inst.n[0] as i64, inst.n[1] as i64];
        let dist = exact_conditional_oracle(&params, inst.cap_radius, inst.nu_cap, n)?;
        if dist.is_empty() || !dist.covers_target {
            r.checks.push(Check::new(
                format!("oracle_{i}"),
                false,
                format!("caps ({}, {}) do not cover every line to {n:?}", inst.cap_radius, inst.nu_cap),
            ));
            continue;
        }
        let cmp = compare_with_sampler(&params, &dist, draws, cfg.seed.wrapping_add(i as u64))?;
        for row in &cmp.rows {
            t.push(vec![
                i.to_string(),
                n[0].to_string(),
                n[1].to_string(),
                row.line.clone(),
                report::num(row.probability),
                report::num(row.expected),
                row.observed.to_string(),
                report::num(row.sigma),
            ]);
        }
        r.checks.push(Check::new(
            format!("oracle_{i}"),
            cmp.within(th.oracle_sigma),
            format!(
                "{} lines, max |sigma| {:.3} <= {}, {} unexpected",
                cmp.rows.len(),
                cmp.max_abs_sigma,
                th.oracle_sigma,
                cmp.unexpected
            ),
        ));
    }
    r.tables.push(t);
    Ok(r)
}
