//! Exhaustive enumeration of capped configurations, the ground truth for
//! the rejection sampler on tiny endpoints.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::enumerate_directions;
use crate::measure::{MeasureParams, WeightedDirection};
use crate::sampler::{assemble, replicate_rng, Conditioner, Configuration, PolygonalLine};

/// Largest number of capped configurations enumerated.
pub const STATE_LIMIT: u128 = 2_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleDistribution {
    pub n: [i64; 2],
    /// Lines ending at `n` with their conditional probabilities, in a fixed
    /// order (by edge list).
    pub lines: Vec<(PolygonalLine, f64)>,
    /// True when the caps cannot exclude any line ending at `n`, so the
    /// capped conditional law equals the uncapped one.
    pub covers_target: bool,
}

impl OracleDistribution {
    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

/// Conditional law of the line given `ξ = n` over all configurations on
/// directions with `x1 + x2 <= cap_radius` and multiplicities `<= nu_cap`,
/// weighted by `Π z^{x ν(x)} (1 − z^x)`.
pub fn exact_conditional_oracle(
    params: &MeasureParams,
    cap_radius: u32,
    nu_cap: u32,
    n: [i64; 2],
) -> Result<OracleDistribution> {
    let dirs: Vec<WeightedDirection> = enumerate_directions(0.0, f64::INFINITY, cap_radius as f64)
        .map(|dir| WeightedDirection { dir, exponent: params.exponent_at(dir.x1 as f64, dir.x2 as f64) })
        .filter(|w| w.exponent.is_finite())
        .collect();
    let size = (nu_cap as u128 + 1).checked_pow(dirs.len() as u32).unwrap_or(u128::MAX);
    if size > STATE_LIMIT {
        return Err(Error::StateSpaceTooLarge { size, limit: STATE_LIMIT });
    }
    let mut nu = vec![0u32; dirs.len()];
    let mut found: Vec<(Vec<u32>, f64)> = Vec::new();
    loop {
        let mut e = [0i64, 0i64];
        let mut a = 0.0;
        for (w, &k) in dirs.iter().zip(&nu) {
            e[0] += w.dir.x1 as i64 * k as i64;
            e[1] += w.dir.x2 as i64 * k as i64;
            a += w.exponent * k as f64;
        }
        // the Π(1 − z^x) factor is common to every configuration
        if e == n {
            found.push((nu.clone(), (-a).exp()));
        }
        // odometer step
        let mut i = 0;
        while i < nu.len() && nu[i] == nu_cap {
            nu[i] = 0;
            i += 1;
        }
        if i == nu.len() {
            break;
        }
        nu[i] += 1;
    }
    let total: f64 = found.iter().map(|f| f.1).sum();
    let mut lines: Vec<(PolygonalLine, f64)> = found
        .into_iter()
        .map(|(nu, w)| {
            let c: Configuration =
                dirs.iter().zip(&nu).filter(|(_, &k)| k > 0).map(|(d, &k)| (d.dir, k as u64)).collect();
            (assemble(&c), w / total)
        })
        .collect();
    lines.sort_by_key(|l| edge_key(&l.0));
    let covers_target =
        n[0] >= 0 && n[1] >= 0 && (n[0] + n[1]) as u64 <= cap_radius as u64 && n[0].max(n[1]) as u64 <= nu_cap as u64;
    Ok(OracleDistribution { n, lines, covers_target })
}

fn edge_key(line: &PolygonalLine) -> Vec<(u32, u32, u64)> {
    line.edges.iter().map(|(d, k)| (d.x1, d.x2, *k)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub line: String,
    pub probability: f64,
    pub expected: f64,
    pub observed: u64,
    /// `(observed − expected) / sqrt(N p (1 − p))`.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleComparison {
    pub n: [i64; 2],
    pub draws: u64,
    pub attempts: u64,
    pub rows: Vec<OracleRow>,
    /// Accepted lines that the enumeration does not contain.
    pub unexpected: u64,
    pub max_abs_sigma: f64,
}

impl OracleComparison {
    pub fn within(&self, sigma: f64) -> bool {
        self.unexpected == 0 && self.max_abs_sigma <= sigma
    }
}

/// Compact label of a line's edges, e.g. `(1,0)x2 (0,1)x1`.
pub fn line_label(line: &PolygonalLine) -> String {
    if line.edges.is_empty() {
        return "empty".into();
    }
    line.edges.iter().map(|(d, k)| format!("({},{})x{}", d.x1, d.x2, k)).collect::<Vec<_>>().join(" ")
}

/// Draws `draws` conditioned lines (draw `i` uses RNG stream `i`) and
/// tallies them against the oracle.
pub fn compare_with_sampler(
    params: &MeasureParams,
    oracle: &OracleDistribution,
    draws: u64,
    seed: u64,
) -> Result<OracleComparison> {
    let conditioner = Conditioner::new(params)?;
    let results: Vec<Result<(PolygonalLine, u64)>> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i);
            conditioner.draw(oracle.n, 100_000_000, &mut rng).map(|d| (d.line, d.attempts))
        })
        .collect();
    let mut counts = vec![0u64; oracle.lines.len()];
    let mut unexpected = 0;
    let mut attempts = 0;
    for r in results {
        let (line, a) = r?;
        attempts += a;
        match oracle.lines.binary_search_by(|(l, _)| edge_key(l).cmp(&edge_key(&line))) {
            Ok(i) => counts[i] += 1,
            Err(_) => unexpected += 1,
        }
    }
    let rows: Vec<OracleRow> = oracle
        .lines
        .iter()
        .zip(&counts)
        .map(|((line, p), &c)| {
            let expected = draws as f64 * p;
            let sd = (draws as f64 * p * (1.0 - p)).sqrt();
            let sigma = if sd > 0.0 {
                (c as f64 - expected) / sd
            } else if c as f64 == expected {
                0.0
            } else {
                f64::INFINITY
            };
            OracleRow { line: line_label(line), probability: *p, expected, observed: c, sigma }
        })
        .collect();
    let max_abs_sigma = rows.iter().map(|r| r.sigma.abs()).fold(0.0, f64::max);
    Ok(OracleComparison { n: oracle.n, draws, attempts, rows, unexpected, max_abs_sigma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{ConvexCurve, Preset};
    use crate::lattice::LatticeDirection;

    fn params(n1: u64, n2: u64) -> MeasureParams {
        MeasureParams::new(&ConvexCurve::preset(Preset::Parabola { c: 1.0 }).unwrap(), n1, n2).unwrap()
    }

    #[test]
    fn two_lines_through_one_one() {
        let p = params(1, 1);
        let o = exact_conditional_oracle(&p, 2, 2, [1, 1]).unwrap();
        assert_eq!(o.lines.len(), 2);
        assert!(o.covers_target);
        let (h, v, d) =
            (LatticeDirection::HORIZONTAL, LatticeDirection::VERTICAL, LatticeDirection::new(1, 1).unwrap());
        let w_diag = p.z_pow(d);
        let w_pair = p.z_pow(h) * p.z_pow(v);
        let total: f64 = o.lines.iter().map(|l| l.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for (line, prob) in &o.lines {
            let expect = if line.edges.len() == 1 { w_diag } else { w_pair } / (w_diag + w_pair);
            assert!((prob - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn unreachable_target_is_empty() {
        let o = exact_conditional_oracle(&params(1, 1), 2, 1, [5, 5]).unwrap();
        assert!(o.is_empty());
        assert!(!o.covers_target);
    }

    #[test]
    fn state_space_limit() {
        let r = exact_conditional_oracle(&params(1, 1), 12, 4, [1, 1]);
        assert!(matches!(r, Err(Error::StateSpaceTooLarge { .. })));
    }

    #[test]
    fn sampler_agrees_on_small_instance() {
        let p = params(2, 1);
        let o = exact_conditional_oracle(&p, 3, 3, [2, 1]).unwrap();
        assert!(o.covers_target);
        let cmp = compare_with_sampler(&p, &o, 20_000, 77).unwrap();
        assert!(cmp.within(4.0), "{cmp:?}");
    }
}
