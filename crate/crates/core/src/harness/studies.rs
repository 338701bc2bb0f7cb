use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::ConvexCurve;
use crate::error::{Error, Result};
use crate::measure::MeasureParams;
use crate::metrics::{curve_polyline, path_distance, step_profile_distance, PathDistanceReport, REFINEMENT_POINTS};
use crate::sampler::{assemble, replicate_rng, Conditioner, PolygonalLine, Sampler, SamplingStrategy};

use super::config::LcltSettings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n1: u64,
    pub statistic: String,
    pub empirical: f64,
    pub theoretical: f64,
    pub ratio: f64,
    pub std_error: f64,
}

impl ConvergenceRow {
    pub fn new(n1: u64, statistic: impl Into<String>, empirical: f64, theoretical: f64, std_error: f64) -> Self {
        let ratio = if theoretical != 0.0 { empirical / theoretical } else { f64::NAN };
        Self { n1, statistic: statistic.into(), empirical, theoretical, ratio, std_error }
    }
}

/// RNG stream for replicate `r` at the `level`-th endpoint of a study.
pub fn stream_id(level: usize, r: u64) -> u64 {
    ((level as u64) << 40) | r
}

/// Standard error of a proportion `k/n`, Agresti–Coull adjusted so it stays
/// positive at 0 and 1.
pub fn proportion_se(k: u64, n: u64) -> f64 {
    let p = (k as f64 + 2.0) / (n as f64 + 4.0);
    (p * (1.0 - p) / (n as f64 + 4.0)).sqrt()
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Least-squares slope of `y` on `x` and its standard error propagated from
/// per-point standard errors of `y`.
pub fn fitted_slope(x: &[f64], y: &[f64], y_se: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let slope = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / sxx;
    let var: f64 = x.iter().zip(y_se).map(|(a, s)| ((a - mx) / sxx).powi(2) * s * s).sum();
    (slope, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub replicate: u64,
    pub n1: u64,
    pub d_hausdorff: f64,
    pub d_length: f64,
    pub argmax_t: f64,
}

#[derive(Debug, Clone)]
pub struct LimitShapeStudy {
    pub rows: Vec<ConvergenceRow>,
    pub replicates: Vec<ReplicateRow>,
    /// First few lines per endpoint, for plotting.
    pub examples: Vec<([u64; 2], Vec<(u64, PolygonalLine)>)>,
    /// Fraction within the `epsilons` per endpoint, in config order.
    pub fractions: Vec<Vec<f64>>,
    /// Accepted lines per endpoint (all replicates when unconditioned).
    pub accepted: Vec<u64>,
}

/// Lines per endpoint kept for plots.
pub const PLOTTED_LINES: usize = 3;

/// Distances of `replicates` scaled lines from the curve at each endpoint,
/// under the multiplicative measure or (when `conditioned`) under the
/// endpoint-conditioned measure.
pub fn run_limit_shape_study(
    curve: &ConvexCurve,
    endpoints: &[[u64; 2]],
    replicates: u64,
    seed: u64,
    epsilons: &[f64],
    conditioned: bool,
    max_attempts: u64,
) -> Result<LimitShapeStudy> {
    let poly = curve_polyline(curve)?;
    let total = curve.length()?;
    let mut out =
        LimitShapeStudy { rows: vec![], replicates: vec![], examples: vec![], fractions: vec![], accepted: vec![] };
    let mut log_n = Vec::new();
    let mut log_med = Vec::new();
    let mut log_se = Vec::new();
    for (level, &[n1, n2]) in endpoints.iter().enumerate() {
        let params = MeasureParams::new(curve, n1, n2)?;
        let scale = 1.0 / n1 as f64;
        let draws: Vec<Result<Option<(PolygonalLine, u64)>>> = if conditioned {
            let cond = Conditioner::new(&params)?;
            (0..replicates)
                .into_par_iter()
                .map(|r| {
                    let mut rng = replicate_rng(seed, stream_id(level, r));
                    match cond.draw([n1 as i64, n2 as i64], max_attempts, &mut rng) {
                        Ok(d) => Ok(Some((d.line, d.attempts))),
                        Err(Error::Exhausted { .. }) => Ok(None),
                        Err(e) => Err(e),
                    }
                })
                .collect()
        } else {
            let sampler = Sampler::new(&params, SamplingStrategy::Thinned);
            (0..replicates)
                .into_par_iter()
                .map(|r| {
                    let mut rng = replicate_rng(seed, stream_id(level, r));
                    Ok(Some((assemble(&sampler.sample_configuration(&mut rng)), 1)))
                })
                .collect()
        };
        let mut lines = Vec::new();
        let mut attempts = 0u64;
        for (r, d) in draws.into_iter().enumerate() {
            if let Some((line, a)) = d? {
                lines.push((r as u64, line));
                attempts += a;
            }
        }
        let reports: Vec<Result<PathDistanceReport>> =
            lines.par_iter().map(|(_, line)| path_distance(line, scale, curve, &poly)).collect();
        let mut dl = Vec::with_capacity(lines.len());
        let mut dh = Vec::with_capacity(lines.len());
        let mut lengths = Vec::with_capacity(lines.len());
        for ((r, line), rep) in lines.iter().zip(reports) {
            let rep = rep?;
            out.replicates.push(ReplicateRow {
                replicate: *r,
                n1,
                d_hausdorff: rep.d_hausdorff,
                d_length: rep.d_length,
                argmax_t: rep.argmax_t,
            });
            dl.push(rep.d_length);
            dh.push(rep.d_hausdorff);
            lengths.push(line.length() * scale);
        }
        let k = lines.len() as u64;
        out.accepted.push(k);
        out.examples.push(([n1, n2], lines.iter().take(PLOTTED_LINES).cloned().collect()));
        out.rows.push(ConvergenceRow::new(
            n1,
            "accepted_lines",
            k as f64,
            replicates as f64,
            proportion_se(k, replicates),
        ));
        if conditioned && k > 0 {
            let rate = k as f64 / attempts as f64;
            out.rows.push(ConvergenceRow::new(
                n1,
                "acceptance_rate",
                rate,
                params.moment_report()?.density_at_n,
                (rate * (1.0 - rate) / attempts as f64).sqrt(),
            ));
        }
        let mut fr = Vec::new();
        for &eps in epsilons {
            let within = dl.iter().filter(|&&d| d <= eps).count() as u64;
            let f = if k > 0 { within as f64 / k as f64 } else { f64::NAN };
            fr.push(f);
            out.rows.push(ConvergenceRow::new(
                n1,
                format!("fraction_d_length_le_{eps}"),
                f,
                1.0,
                proportion_se(within, k),
            ));
        }
        out.fractions.push(fr);
        if k == 0 {
            continue;
        }
        let sd_l = sample_sd(&dl);
        let sd_h = sample_sd(&dh);
        let se_med = |sd: f64| (std::f64::consts::PI / 2.0).sqrt() * sd / (k as f64).sqrt();
        dl.sort_by(f64::total_cmp);
        dh.sort_by(f64::total_cmp);
        let (ml, mh) = (median(&dl), median(&dh));
        out.rows.push(ConvergenceRow::new(n1, "median_d_length", ml, 0.0, se_med(sd_l)));
        out.rows.push(ConvergenceRow::new(n1, "median_d_hausdorff", mh, 0.0, se_med(sd_h)));
        let mean_len = lengths.iter().sum::<f64>() / k as f64;
        out.rows.push(ConvergenceRow::new(
            n1,
            "mean_scaled_length",
            mean_len,
            total,
            sample_sd(&lengths) / (k as f64).sqrt(),
        ));
        if ml > 0.0 {
            log_n.push((n1 as f64).ln());
            log_med.push(ml.ln());
            log_se.push(se_med(sd_l) / ml);
        }
    }
    if log_n.len() >= 2 {
        let (slope, se) = fitted_slope(&log_n, &log_med, &log_se);
        let last = endpoints.last().map_or(0, |e| e[0]);
        out.rows.push(ConvergenceRow::new(last, "median_d_length_decay_exponent", slope, f64::NAN, se));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct MomentStudy {
    pub rows: Vec<ConvergenceRow>,
    pub sup_length_gap: Vec<f64>,
    /// `(E ξ_j − n_j) / n1^{2/3}`.
    pub endpoint_bias: Vec<[f64; 2]>,
    pub bias_slopes: [f64; 2],
    /// `K_z` over its asymptote, entries 11, 12, 22.
    pub covariance_ratio: Vec<[f64; 3]>,
}

/// Points of the position grid compared against `u_γ(t)`.
pub const POSITION_GRID: usize = 32;

/// Exact moment sums against their limits at each endpoint.
pub fn run_moment_study(curve: &ConvexCurve, endpoints: &[[u64; 2]]) -> Result<MomentStudy> {
    let mut out = MomentStudy {
        rows: vec![],
        sup_length_gap: vec![],
        endpoint_bias: vec![],
        bias_slopes: [f64::NAN; 2],
        covariance_ratio: vec![],
    };
    let th0 = curve.t0().atan();
    let th1 = if curve.t1().is_infinite() { std::f64::consts::FRAC_PI_2 } else { curve.t1().atan() };
    let grid: Vec<f64> =
        (1..=POSITION_GRID).map(|i| (th0 + (th1 - th0) * i as f64 / (POSITION_GRID + 1) as f64).tan()).collect();
    let mut log_bias: [Vec<f64>; 2] = [vec![], vec![]];
    let mut log_n = vec![];
    for &[n1, n2] in endpoints {
        let params = MeasureParams::new(curve, n1, n2)?;
        let scale = 1.0 / n1 as f64;
        let profiles = params.expected_profiles()?;
        // truncation error of the exact sums, in the units of each row
        let numeric = (params.tail_tolerance() * params.lattice_radius() as f64 * scale).max(f64::EPSILON);
        let (gap, _) = step_profile_distance(profiles.jumps(), scale, curve, REFINEMENT_POINTS)?;
        out.sup_length_gap.push(gap);
        out.rows.push(ConvergenceRow::new(n1, "sup_length_gap", gap, 0.0, numeric));
        let mut pos_gap = 0.0f64;
        for &t in &grid {
            let e = profiles.endpoint(t);
            pos_gap = pos_gap.max((e[0] * scale - curve.slope_inverse(t)?).abs());
        }
        out.rows.push(ConvergenceRow::new(n1, "max_position_gap", pos_gap, 0.0, numeric));
        let a = params.expected_endpoint()?;
        let norm = (n1 as f64).powf(2.0 / 3.0);
        let bias = [(a[0] - n1 as f64) / norm, (a[1] - n2 as f64) / norm];
        out.endpoint_bias.push(bias);
        out.rows.push(ConvergenceRow::new(n1, "endpoint_bias_1", bias[0], f64::NAN, numeric));
        out.rows.push(ConvergenceRow::new(n1, "endpoint_bias_2", bias[1], f64::NAN, numeric));
        log_n.push((n1 as f64).ln());
        log_bias[0].push(bias[0].abs().max(f64::MIN_POSITIVE).ln());
        log_bias[1].push(bias[1].abs().max(f64::MIN_POSITIVE).ln());
        let k = params.covariance_matrix()?;
        let asym = params.covariance_asymptote()?;
        let ratio = [k[0][0] / asym[0][0], k[0][1] / asym[0][1], k[1][1] / asym[1][1]];
        out.covariance_ratio.push(ratio);
        for (name, r) in ["covariance_ratio_11", "covariance_ratio_12", "covariance_ratio_22"].iter().zip(ratio) {
            out.rows.push(ConvergenceRow::new(n1, *name, r, 1.0, numeric));
        }
        let report = params.moment_report()?;
        out.rows.push(ConvergenceRow::new(
            n1,
            "density_at_n_times_n1_4_3",
            report.density_at_n * (n1 as f64).powf(4.0 / 3.0),
            f64::NAN,
            numeric,
        ));
    }
    if log_n.len() >= 2 {
        let zeros = vec![0.0; log_n.len()];
        for j in 0..2 {
            out.bias_slopes[j] = fitted_slope(&log_n, &log_bias[j], &zeros).0;
            let last = endpoints.last().map_or(0, |e| e[0]);
            out.rows.push(ConvergenceRow::new(
                last,
                format!("endpoint_bias_{}_loglog_slope", j + 1),
                out.bias_slopes[j],
                0.0,
                f64::EPSILON,
            ));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcltCell {
    pub m: [i64; 2],
    pub hits: u64,
    pub frequency: f64,
    pub density: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcltStudy {
    pub n: [u64; 2],
    pub replicates: u64,
    pub cells: Vec<LcltCell>,
    /// Empirical `P{ξ = n}` and the Gaussian density at `n`.
    pub at_n: LcltCell,
    /// `Σ (observed − expected)² / expected` over the cells, per cell.
    pub chi2_per_cell: f64,
}

/// Largest `n1` the hit-frequency study accepts.
pub const LCLT_MAX_N1: u64 = 500;

/// Replicates per RNG block of the hit counter.
const LCLT_BLOCK: u64 = 1 << 14;

/// Empirical endpoint frequencies on a grid of cells around the mean against
/// the Gaussian density.
pub fn run_lclt_study(
    curve: &ConvexCurve,
    settings: &LcltSettings,
    seed: u64,
    min_expected_hits: f64,
) -> Result<LcltStudy> {
    let n1 = settings.n1;
    if n1 == 0 || n1 > LCLT_MAX_N1 {
        return Err(Error::ParameterOutOfRange(format!("local-CLT study needs 1 <= n1 <= {LCLT_MAX_N1}, got {n1}")));
    }
    let n2 = ((curve.c_gamma() * n1 as f64).round() as u64).max(1);
    let params = MeasureParams::new(curve, n1, n2)?;
    let report = params.moment_report()?;
    let centre = [report.a_z[0].round() as i64, report.a_z[1].round() as i64];
    let h = settings.half_width.max(0);
    let side = (2 * h + 1) as usize;
    let mut cells: Vec<[i64; 2]> = Vec::with_capacity(side * side);
    for dx in -h..=h {
        for dy in -h..=h {
            cells.push([centre[0] + dx, centre[1] + dy]);
        }
    }
    let densities: Vec<f64> = cells.iter().map(|&m| report.gaussian_density_at(m)).collect::<Result<_>>()?;
    let reps = settings.replicates;
    let min_expected = densities.iter().fold(f64::INFINITY, |a, &d| a.min(d)) * reps as f64;
    if min_expected < min_expected_hits {
        return Err(Error::InsufficientReplicates(format!(
            "{reps} replicates give {min_expected:.1} expected hits in the sparsest cell, need {min_expected_hits}"
        )));
    }
    let sampler = Sampler::new(&params, SamplingStrategy::Thinned);
    let target = [n1 as i64, n2 as i64];
    let blocks = reps.div_ceil(LCLT_BLOCK);
    let counts: Vec<Vec<u64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut local = vec![0u64; side * side + 1];
            let mut buf = Vec::new();
            let mut rng = replicate_rng(seed, b);
            for _ in (b * LCLT_BLOCK)..((b + 1) * LCLT_BLOCK).min(reps) {
                let xi = sampler.sample_endpoint(&mut rng, &mut buf);
                let (dx, dy) = (xi[0] - centre[0], xi[1] - centre[1]);
                if dx.abs() <= h && dy.abs() <= h {
                    local[((dx + h) * (2 * h + 1) + (dy + h)) as usize] += 1;
                }
                if xi == target {
                    local[side * side] += 1;
                }
            }
            local
        })
        .collect();
    let mut total = vec![0u64; side * side + 1];
    for c in counts {
        for (t, v) in total.iter_mut().zip(c) {
            *t += v;
        }
    }
    let cell = |m: [i64; 2], hits: u64, density: f64| {
        let f = hits as f64 / reps as f64;
        LcltCell { m, hits, frequency: f, density, std_error: proportion_se(hits, reps) }
    };
    let out_cells: Vec<LcltCell> =
        cells.iter().zip(&densities).zip(&total).map(|((&m, &d), &k)| cell(m, k, d)).collect();
    let chi2 = out_cells
        .iter()
        .map(|c| {
            let e = c.density * reps as f64;
            (c.hits as f64 - e).powi(2) / e
        })
        .sum::<f64>()
        / out_cells.len() as f64;
    Ok(LcltStudy {
        n: [n1, n2],
        replicates: reps,
        cells: out_cells,
        at_n: cell(target, total[side * side], report.density_at_n),
        chi2_per_cell: chi2,
    })
}

/// Convergence rows of one or more local-CLT runs, including the scaling of
/// `P{ξ = n}` between consecutive runs against `(n1'/n1)^{4/3}`.
pub fn lclt_rows(studies: &[LcltStudy]) -> Vec<ConvergenceRow> {
    let mut rows = Vec::new();
    for s in studies {
        let n1 = s.n[0];
        rows.push(ConvergenceRow::new(n1, "p_at_n", s.at_n.frequency, s.at_n.density, s.at_n.std_error));
        rows.push(ConvergenceRow::new(n1, "chi2_per_cell", s.chi2_per_cell, 1.0, (2.0 / s.cells.len() as f64).sqrt()));
    }
    for w in studies.windows(2) {
        let (a, b) = (&w[0].at_n, &w[1].at_n);
        let ratio = a.frequency / b.frequency;
        let se = ratio * ((a.std_error / a.frequency).powi(2) + (b.std_error / b.frequency).powi(2)).sqrt();
        let expect = (w[1].n[0] as f64 / w[0].n[0] as f64).powf(4.0 / 3.0);
        rows.push(ConvergenceRow::new(w[1].n[0], format!("p_at_n_ratio_vs_{}", w[0].n[0]), ratio, expect, se));
    }
    rows
}
