//! Draws from the multiplicative measure and from its endpoint-conditioned
//! version, and converts between configurations and polygonal lines.
//!
//! Multiplicities are independent geometric variables. Directions with a
//! large `z` are drawn one by one by inversion, `ν = ⌊E / a⌋` with `E`
//! standard exponential. The many directions with tiny `z` are grouped into
//! buckets whose `z` lie within a factor 2 of the bucket maximum `p̄`;
//! inside a bucket candidates are visited by geometric skips with success
//! probability `p̄` and accepted with probability `z/p̄`, after which
//! `ν − 1` is drawn by inversion. Both routes give exactly the geometric law.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeDirection;
use crate::measure::{MeasureParams, WeightedDirection};

/// Directions with `z` at least this large are drawn individually.
const DENSE_THRESHOLD: f64 = 0.2;

/// Independent RNG stream for one replicate of a run.
pub fn replicate_rng(master_seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replicate);
    rng
}

/// Finite support map `x ↦ ν(x) >= 1`, kept in slope order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Configuration {
    support: BTreeMap<LatticeDirection, u64>,
}

impl Configuration {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `ν(x)`; zero removes the direction.
    pub fn set(&mut self, x: LatticeDirection, nu: u64) {
        if nu == 0 {
            self.support.remove(&x);
        } else {
            self.support.insert(x, nu);
        }
    }

    pub fn get(&self, x: LatticeDirection) -> u64 {
        self.support.get(&x).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (LatticeDirection, u64)> + '_ {
        self.support.iter().map(|(&d, &n)| (d, n))
    }

    /// `ξ = Σ x ν(x)`.
    pub fn endpoint(&self) -> [i64; 2] {
        self.iter().fold([0, 0], |e, (d, n)| [e[0] + d.x1 as i64 * n as i64, e[1] + d.x2 as i64 * n as i64])
    }
}

impl FromIterator<(LatticeDirection, u64)> for Configuration {
    fn from_iter<I: IntoIterator<Item = (LatticeDirection, u64)>>(iter: I) -> Self {
        let mut c = Configuration::new();
        for (d, n) in iter {
            c.set(d, c.get(d) + n);
        }
        c
    }
}

/// Convex lattice polygonal line from the origin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolygonalLine {
    pub vertices: Vec<[i64; 2]>,
    pub edges: Vec<(LatticeDirection, u64)>,
    pub endpoint: [i64; 2],
}

/// Lays the edges out in increasing slope order.
pub fn assemble(config: &Configuration) -> PolygonalLine {
    let mut vertices = Vec::with_capacity(config.len() + 1);
    let mut at = [0i64, 0i64];
    vertices.push(at);
    let edges: Vec<_> = config.iter().collect();
    for &(d, n) in &edges {
        at = [at[0] + d.x1 as i64 * n as i64, at[1] + d.x2 as i64 * n as i64];
        vertices.push(at);
    }
    PolygonalLine { vertices, edges, endpoint: at }
}

impl PolygonalLine {
    pub fn disassemble(&self) -> Configuration {
        self.edges.iter().copied().collect()
    }

    /// Euclidean length.
    pub fn length(&self) -> f64 {
        self.edges.iter().map(|(d, n)| d.norm() * *n as f64).sum()
    }

    /// Strictly increasing edge slopes, endpoint equal to the last vertex.
    pub fn is_convex(&self) -> bool {
        self.edges.windows(2).all(|w| w[0].0 < w[1].0)
            && self.vertices.last() == Some(&self.endpoint)
            && self.vertices.iter().all(|v| v[0] >= 0 && v[1] >= 0)
    }

    /// Vertices multiplied by `factor`.
    pub fn scale(&self, factor: f64) -> Vec<[f64; 2]> {
        scale(self, factor)
    }
}

/// `ℓ_Γ(t)`, the length of the edges with slope `<= t`, on an ascending grid.
pub fn length_profile(line: &PolygonalLine, t_grid: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(t_grid.len());
    let mut acc = 0.0;
    let mut edges = line.edges.iter().peekable();
    for &t in t_grid {
        while let Some((d, n)) = edges.peek() {
            if d.tau() > t {
                break;
            }
            acc += d.norm() * *n as f64;
            edges.next();
        }
        out.push(acc);
    }
    out
}

pub fn scale(line: &PolygonalLine, factor: f64) -> Vec<[f64; 2]> {
    line.vertices.iter().map(|v| [v[0] as f64 * factor, v[1] as f64 * factor]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplingStrategy {
    /// Bucketed thinning for small `z`.
    #[default]
    Thinned,
    /// One inversion per direction.
    Direct,
}

#[derive(Debug, Clone)]
struct Bucket {
    envelope: f64,
    // ln(1 − envelope)
    ln_miss: f64,
    members: Vec<u32>,
}

/// Reusable sampler over one measure's direction table.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    table: &'a [WeightedDirection],
    strategy: SamplingStrategy,
    dense: Vec<u32>,
    buckets: Vec<Bucket>,
}

fn exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // 1 − U lies in (0, 1]
    -(1.0 - rng.gen::<f64>()).ln()
}

impl<'a> Sampler<'a> {
    pub fn new(params: &'a MeasureParams, strategy: SamplingStrategy) -> Self {
        Self::from_table(params.directions(), strategy)
    }

    pub fn from_table(table: &'a [WeightedDirection], strategy: SamplingStrategy) -> Self {
        let mut order: Vec<u32> = (0..table.len() as u32).collect();
        order.sort_by(|&i, &j| table[i as usize].exponent.total_cmp(&table[j as usize].exponent).then(i.cmp(&j)));
        let mut dense = Vec::new();
        let mut buckets: Vec<Bucket> = Vec::new();
        for i in order {
            let z = table[i as usize].z();
            if strategy == SamplingStrategy::Direct || z >= DENSE_THRESHOLD {
                dense.push(i);
                continue;
            }
            if z <= 0.0 {
                continue;
            }
            match buckets.last_mut() {
                Some(b) if z >= 0.5 * b.envelope => b.members.push(i),
                _ => buckets.push(Bucket { envelope: z, ln_miss: (-z).ln_1p(), members: vec![i] }),
            }
        }
        Self { table, strategy, dense, buckets }
    }

    pub fn strategy(&self) -> SamplingStrategy {
        self.strategy
    }

    pub fn table(&self) -> &'a [WeightedDirection] {
        self.table
    }

    /// Appends `(table index, ν)` for every direction with `ν >= 1`.
    pub fn sample_support<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<(u32, u64)>) {
        for &i in &self.dense {
            let nu = (exponential(rng) / self.table[i as usize].exponent).floor();
            if nu >= 1.0 {
                out.push((i, nu as u64));
            }
        }
        for b in &self.buckets {
            let mut pos = 0usize;
            loop {
                // failures before the next envelope success
                let skip = (-exponential(rng) / b.ln_miss).floor();
                if skip >= (b.members.len() - pos) as f64 {
                    break;
                }
                pos += skip as usize;
                let i = b.members[pos];
                let w = &self.table[i as usize];
                if rng.gen::<f64>() * b.envelope < w.z() {
                    let extra = (exponential(rng) / w.exponent).floor();
                    out.push((i, 1 + extra as u64));
                }
                pos += 1;
                if pos >= b.members.len() {
                    break;
                }
            }
        }
    }

    pub fn sample_configuration<R: Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        let mut buf = Vec::new();
        self.sample_support(rng, &mut buf);
        self.configuration_of(&buf)
    }

    pub fn configuration_of(&self, support: &[(u32, u64)]) -> Configuration {
        support.iter().map(|&(i, n)| (self.table[i as usize].dir, n)).collect()
    }

    /// `ξ` of a fresh draw, without building the configuration.
    pub fn sample_endpoint<R: Rng + ?Sized>(&self, rng: &mut R, buf: &mut Vec<(u32, u64)>) -> [i64; 2] {
        buf.clear();
        self.sample_support(rng, buf);
        self.endpoint_of(buf)
    }

    pub fn endpoint_of(&self, support: &[(u32, u64)]) -> [i64; 2] {
        support.iter().fold([0, 0], |e, &(i, n)| {
            let d = self.table[i as usize].dir;
            [e[0] + d.x1 as i64 * n as i64, e[1] + d.x2 as i64 * n as i64]
        })
    }
}

/// One draw from the multiplicative measure.
pub fn sample_configuration<R: Rng + ?Sized>(params: &MeasureParams, rng: &mut R) -> Configuration {
    Sampler::new(params, SamplingStrategy::Thinned).sample_configuration(rng)
}

/// A line drawn from the endpoint-conditioned measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedDraw {
    pub line: PolygonalLine,
    pub attempts: u64,
}

impl ConditionedDraw {
    pub fn acceptance_rate(&self) -> f64 {
        1.0 / self.attempts as f64
    }
}

/// Rejection sampler for `Q_z{· | ξ = n}`. `n` is usually the calibration
/// endpoint of the measure but any target is accepted.
#[derive(Debug, Clone)]
pub struct Conditioner<'a> {
    sampler: Sampler<'a>,
    // K^{-1} for miss diagnostics
    precision: [[f64; 2]; 2],
}

/// Miss-distance histogram bins, in units of Mahalanobis distance.
pub const MISS_BINS: usize = 8;

impl<'a> Conditioner<'a> {
    pub fn new(params: &'a MeasureParams) -> Result<Self> {
        let k = params.covariance_matrix()?;
        let det = k[0][0] * k[1][1] - k[0][1] * k[1][0];
        if !(det > 0.0) {
            return Err(Error::SingularCovariance { det });
        }
        let precision = [[k[1][1] / det, -k[0][1] / det], [-k[1][0] / det, k[0][0] / det]];
        Ok(Self { sampler: Sampler::new(params, SamplingStrategy::Thinned), precision })
    }

    pub fn sampler(&self) -> &Sampler<'a> {
        &self.sampler
    }

    fn mahalanobis(&self, d: [i64; 2]) -> f64 {
        let (a, b) = (d[0] as f64, d[1] as f64);
        let p = &self.precision;
        (p[0][0] * a * a + (p[0][1] + p[1][0]) * a * b + p[1][1] * b * b).max(0.0).sqrt()
    }

    pub fn draw<R: Rng + ?Sized>(&self, n: [i64; 2], max_attempts: u64, rng: &mut R) -> Result<ConditionedDraw> {
        let mut buf = Vec::new();
        let mut closest = ([0i64, 0i64], f64::INFINITY);
        let mut histogram = vec![0u64; MISS_BINS + 1];
        for attempt in 1..=max_attempts {
            let xi = self.sampler.sample_endpoint(rng, &mut buf);
            if xi == n {
                let line = assemble(&self.sampler.configuration_of(&buf));
                return Ok(ConditionedDraw { line, attempts: attempt });
            }
            let miss = [xi[0] - n[0], xi[1] - n[1]];
            let dist = self.mahalanobis(miss);
            histogram[(dist.floor() as usize).min(MISS_BINS)] += 1;
            if dist < closest.1 {
                closest = (miss, dist);
            }
        }
        Err(Error::Exhausted {
            attempts: max_attempts,
            closest_miss: closest.0,
            closest_distance: closest.1,
            miss_histogram: histogram,
        })
    }
}

/// Exact draw from `P_n`, by rejection from the multiplicative measure.
pub fn condition_on_endpoint<R: Rng + ?Sized>(
    params: &MeasureParams,
    n: [i64; 2],
    max_attempts: u64,
    rng: &mut R,
) -> Result<ConditionedDraw> {
    Conditioner::new(params)?.draw(n, max_attempts, rng)
}
