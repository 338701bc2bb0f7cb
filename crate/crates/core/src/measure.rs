//! The tilted multiplicative measure: tilt functions, per-direction geometric
//! laws and their exact (truncated) and asymptotic moments.
//!
//! Every direction `x` carries an independent multiplicity
//! `ν(x) ~ Geometric` with `P{ν = k} = z^{kx}(1 − z^x)`, where
//! `z^x = exp(−a(x))` and `a(x) = α⟨x̃, δ(τ(x̃))⟩` is the direction's
//! exponent. Moments are summed in closed form per direction,
//! `E ν = 1/expm1(a)`, over all directions with `x1 + x2 <= R`; the omitted
//! tail is bounded through `a(x) >= α δ* min(1, ρ) (x1 + x2)`.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::ConvexCurve;
use crate::error::{Error, Result};
use crate::lattice::{enumerate_directions, LatticeDirection};
use crate::sum::CompensatedSum;

pub const ZETA2: f64 = PI * PI / 6.0;
pub const ZETA3: f64 = 1.202_056_903_159_594_285_399_738_161_511_449_990_764_986_292;

/// `(2ζ(3)/ζ(2))^{1/3}` evaluated independently to 30 digits.
pub const KAPPA_REFERENCE: f64 = 1.134_842_284_049_690_4;

/// The constant `κ = (2ζ(3)/ζ(2))^{1/3}`.
pub fn kappa() -> f64 {
    (2.0 * ZETA3 / ZETA2).cbrt()
}

/// Expected omitted edges the default truncation may leave out.
pub const MISSED_EDGE_BUDGET: f64 = 1e-9;
/// Default relative budget for the tails of moment sums.
pub const RELATIVE_TAIL_BUDGET: f64 = 1e-9;
/// Relative tail a moment is allowed to carry before it is rejected.
pub const MOMENT_TAIL_TOLERANCE: f64 = 1e-6;

const DELTA_GRID: usize = 1024;

/// Tilt functions `(δ₁(t), δ₂(t))`, `+∞` outside the slope range.
pub fn delta(curve: &ConvexCurve, t: f64) -> (f64, f64) {
    match delta1(curve, t) {
        Some(d1) => (d1, d1 / curve.c_gamma()),
        None => (f64::INFINITY, f64::INFINITY),
    }
}

fn delta1(curve: &ConvexCurve, t: f64) -> Option<f64> {
    if t.is_nan() || t < curve.t0() || t > curve.t1() {
        return None;
    }
    let c = curve.c_gamma();
    let k = curve.curvature_at_slope(t).ok()?;
    // sqrt(1 + t²)/(c + t) tends to 1 at a vertical end
    let ratio = if t.is_infinite() { 1.0 } else { 1.0_f64.hypot(t) / (c + t) };
    Some(kappa() * k.cbrt() * c * ratio)
}

/// `δ₁(t) + t δ₂(t) − κ g''(u(t))^{1/3}`, zero for an exactly calibrated tilt.
pub fn calibration_residual(curve: &ConvexCurve, t: f64) -> Result<f64> {
    if !(t > curve.t0() && t < curve.t1()) || t.is_infinite() {
        return Err(Error::SlopeOutOfRange { slope: t, t0: curve.t0(), t1: curve.t1() });
    }
    let (d1, d2) = delta(curve, t);
    Ok(d1 + t * d2 - kappa() * curve.g2_at_slope(t)?.cbrt())
}

/// `(E ν, Var ν)` of the geometric law with parameter `z`.
pub fn nu_moments(z: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&z) {
        return Err(Error::ParameterOutOfRange(format!("geometric parameter must lie in [0, 1), got {z}")));
    }
    let m = z / (1.0 - z);
    Ok((m, m / (1.0 - z)))
}

/// Same moments parameterized by the exponent `a = −ln z`, accurate for
/// `z` close to 1.
pub fn nu_moments_from_exponent(a: f64) -> (f64, f64) {
    if a == f64::INFINITY {
        return (0.0, 0.0);
    }
    let m = 1.0 / a.exp_m1();
    (m, m * (1.0 + m))
}

/// A direction together with its exponent `a(x) = −ln z^x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedDirection {
    pub dir: LatticeDirection,
    pub exponent: f64,
}

impl WeightedDirection {
    pub fn z(&self) -> f64 {
        (-self.exponent).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Tails {
    /// bound on `Σ E ν` over omitted directions
    count: f64,
    /// bound on `Σ |x| E ν`
    first: f64,
    /// bound on `Σ |x|² Var ν`
    second: f64,
}

/// Everything that defines the measure for one endpoint `n`.
#[derive(Debug, Clone)]
pub struct MeasureParams {
    curve: ConvexCurve,
    n1: u64,
    n2: u64,
    rho: f64,
    alpha: f64,
    delta_star: f64,
    radius: u64,
    tails: Tails,
    table: OnceLock<Arc<Vec<WeightedDirection>>>,
}

impl MeasureParams {
    /// Parameters with the default truncation radius.
    pub fn new(curve: &ConvexCurve, n1: u64, n2: u64) -> Result<Self> {
        let mut p = Self::bare(curve, n1, n2)?;
        p.radius = default_radius(p.tail_rate(), p.alpha);
        p.tails = tails_at(p.tail_rate(), p.radius);
        Ok(p)
    }

    /// Parameters truncated at `x1 + x2 <= radius / α`.
    pub fn with_truncation(curve: &ConvexCurve, n1: u64, n2: u64, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::ParameterOutOfRange(format!("truncation radius must be positive, got {radius}")));
        }
        let mut p = Self::bare(curve, n1, n2)?;
        p.radius = ((radius / p.alpha).floor() as u64).max(1);
        p.tails = tails_at(p.tail_rate(), p.radius);
        Ok(p)
    }

    fn bare(curve: &ConvexCurve, n1: u64, n2: u64) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::ParameterOutOfRange(format!("endpoint must be positive, got ({n1}, {n2})")));
        }
        let rho = curve.c_gamma() * n1 as f64 / n2 as f64;
        let alpha = 1.0 / (rho * n1 as f64).cbrt();
        let delta_star = delta_floor(curve);
        if !(delta_star > 0.0 && delta_star.is_finite()) {
            return Err(Error::InvalidCurve(format!("tilt floor δ* = {delta_star} is not positive")));
        }
        Ok(Self {
            curve: curve.clone(),
            n1,
            n2,
            rho,
            alpha,
            delta_star,
            radius: 0,
            tails: Tails { count: f64::INFINITY, first: f64::INFINITY, second: f64::INFINITY },
            table: OnceLock::new(),
        })
    }

    // guaranteed lower bound of a(x) / (x1 + x2)
    fn tail_rate(&self) -> f64 {
        self.alpha * self.delta_star * self.rho.min(1.0) * (1.0 - 1e-3)
    }

    pub fn curve(&self) -> &ConvexCurve {
        &self.curve
    }
    pub fn n(&self) -> [u64; 2] {
        [self.n1, self.n2]
    }
    pub fn n1(&self) -> u64 {
        self.n1
    }
    pub fn n2(&self) -> u64 {
        self.n2
    }
    pub fn c_n(&self) -> f64 {
        self.n2 as f64 / self.n1 as f64
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn delta_star(&self) -> f64 {
        self.delta_star
    }
    /// Largest `x1 + x2` kept.
    pub fn lattice_radius(&self) -> u64 {
        self.radius
    }
    /// Truncation radius in units of `1/α`.
    pub fn truncation_radius(&self) -> f64 {
        self.radius as f64 * self.alpha
    }
    /// Certified bound on the expected number of edges beyond the truncation.
    pub fn tail_tolerance(&self) -> f64 {
        self.tails.count
    }

    /// Exponent `α⟨ỹ, δ(τ(ỹ))⟩` at a real point `y`, `+∞` when the slope of
    /// `ỹ = (y1, ρ y2)` is outside the curve's range. Homogeneous of degree 1.
    pub fn exponent_at(&self, y1: f64, y2: f64) -> f64 {
        let t = if y1 == 0.0 { f64::INFINITY } else { self.rho * y2 / y1 };
        match delta1(&self.curve, t) {
            Some(d1) => self.alpha * d1 * (y1 + self.rho * y2 / self.curve.c_gamma()),
            None => f64::INFINITY,
        }
    }

    /// `(z₁(x), z₂(x))` with the `ρ` of `x̃` folded into `z₂`, so that
    /// `z₁^{x1} z₂^{x2} = z^x`.
    pub fn z_of(&self, x: LatticeDirection) -> (f64, f64) {
        let (d1, d2) = delta(&self.curve, self.rho * x.tau());
        ((-self.alpha * d1).exp(), (-self.alpha * self.rho * d2).exp())
    }

    /// `z^x = exp(−α⟨x̃, δ(τ(x̃))⟩)`, 0 for excluded directions.
    pub fn z_pow(&self, x: LatticeDirection) -> f64 {
        (-self.exponent_at(x.x1 as f64, x.x2 as f64)).exp()
    }

    /// All directions inside the truncation with positive `z`, ordered by slope.
    pub fn directions(&self) -> &[WeightedDirection] {
        self.table.get_or_init(|| Arc::new(self.build_table()))
    }

    fn build_table(&self) -> Vec<WeightedDirection> {
        let lo = self.curve.t0() / self.rho;
        let hi = self.curve.t1() / self.rho;
        let dirs: Vec<LatticeDirection> = enumerate_directions(lo, hi, self.radius as f64).collect();
        dirs.par_iter()
            .map(|&dir| WeightedDirection { dir, exponent: self.exponent_at(dir.x1 as f64, dir.x2 as f64) })
            .collect::<Vec<_>>()
            .into_iter()
            .filter(|w| w.exponent.is_finite())
            .collect()
    }

    fn check_tail(&self, what: &str, tail: f64, value: f64) -> Result<()> {
        if tail > MOMENT_TAIL_TOLERANCE * value.abs() {
            return Err(Error::TailBoundViolated(format!(
                "{what}: omitted tail up to {tail:e} against value {value:e} at truncation {:.3}/α",
                self.truncation_radius()
            )));
        }
        Ok(())
    }

    /// Cumulative expected length and endpoint profiles over slope.
    pub fn expected_profiles(&self) -> Result<ExpectedProfiles> {
        let table = self.directions();
        let mut slopes = Vec::with_capacity(table.len());
        let mut increments = Vec::with_capacity(table.len());
        let (mut len, mut e1, mut e2) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
        let mut length = Vec::with_capacity(table.len());
        let mut endpoint = Vec::with_capacity(table.len());
        for w in table {
            let (m, _) = nu_moments_from_exponent(w.exponent);
            let inc = w.dir.norm() * m;
            len.add(inc);
            e1.add(w.dir.x1 as f64 * m);
            e2.add(w.dir.x2 as f64 * m);
            slopes.push(w.dir.tau());
            increments.push(inc);
            length.push(len.value());
            endpoint.push([e1.value(), e2.value()]);
        }
        let total = length.last().copied().unwrap_or(0.0);
        self.check_tail("expected length", self.tails.first, total)?;
        Ok(ExpectedProfiles { slopes, increments, length, endpoint })
    }

    /// `E_z[ℓ_Γ(t)]`.
    pub fn expected_length_profile(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::ParameterOutOfRange(format!("slope must be non-negative, got {t}")));
        }
        Ok(self.expected_profiles()?.length(t))
    }

    /// `a_z = E_z ξ`.
    pub fn expected_endpoint(&self) -> Result<[f64; 2]> {
        let (mut e1, mut e2) = (CompensatedSum::new(), CompensatedSum::new());
        for w in self.directions() {
            let (m, _) = nu_moments_from_exponent(w.exponent);
            e1.add(w.dir.x1 as f64 * m);
            e2.add(w.dir.x2 as f64 * m);
        }
        let a = [e1.value(), e2.value()];
        self.check_tail("expected endpoint", self.tails.first, a[0].min(a[1]))?;
        Ok(a)
    }

    /// `K_z = Cov ξ`.
    pub fn covariance_matrix(&self) -> Result<[[f64; 2]; 2]> {
        let (mut k11, mut k12, mut k22) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
        for w in self.directions() {
            let (_, v) = nu_moments_from_exponent(w.exponent);
            let (x1, x2) = (w.dir.x1 as f64, w.dir.x2 as f64);
            k11.add(x1 * x1 * v);
            k12.add(x1 * x2 * v);
            k22.add(x2 * x2 * v);
        }
        let k = [[k11.value(), k12.value()], [k12.value(), k22.value()]];
        self.check_tail("covariance", self.tails.second, k[0][0].min(k[1][1]))?;
        Ok(k)
    }

    /// `ln Π (1 − z^x)` over the kept directions, the log-probability of the
    /// empty configuration.
    pub fn log_normalizer(&self) -> f64 {
        self.directions().iter().map(|w| (-(-w.exponent).exp_m1()).ln()).collect::<CompensatedSum>().value()
    }

    /// `E_z[ℓ_Γ(∞)]` by Möbius inversion of full-lattice sums over the
    /// multiplicity scale `k`, using the same lattice truncation as the
    /// direct route.
    pub fn expected_length_mobius(&self, t: f64, table: &crate::lattice::MobiusTable) -> Result<f64> {
        let f = |y1: f64, y2: f64| {
            let tau = if y1 == 0.0 { f64::INFINITY } else { y2 / y1 };
            if tau > t || (y1 == 0.0 && y2 == 0.0) {
                return 0.0;
            }
            let a = self.exponent_at(y1, y2);
            if a.is_infinite() {
                0.0
            } else {
                y1.hypot(y2) * (-a).exp()
            }
        };
        let a_min = self.tail_rate();
        let mut acc = CompensatedSum::new();
        let mut k = 1u64;
        loop {
            // every point contributes at most k R exp(−k a_min) at scale k
            let r = self.radius as f64;
            let bound = k as f64 * r * r * r * (-(k as f64) * a_min).exp();
            if k > 1 && bound < 1e-12 * acc.value() {
                break;
            }
            let tail_bound = (-(k as f64) * a_min * (self.radius + 1) as f64).exp()
                * k as f64
                * ((self.radius + 2) as f64).powi(2)
                * 2.0;
            let s = crate::lattice::mobius_inverted_sum(f, k as f64, self.radius as f64, tail_bound, table)?;
            acc.add(s / k as f64);
            k += 1;
        }
        Ok(acc.value())
    }

    /// All moment quantities at the calibration point.
    pub fn moment_report(&self) -> Result<MomentReport> {
        let a_z = self.expected_endpoint()?;
        let k = self.covariance_matrix()?;
        let b = b_matrix(&self.curve)?;
        MomentReport::new(a_z, k, b, [self.n1 as i64, self.n2 as i64])
    }

    /// `3κ^{−1} n1^{4/3} B`, the leading asymptotics of `K_z`.
    pub fn covariance_asymptote(&self) -> Result<[[f64; 2]; 2]> {
        let b = b_matrix(&self.curve)?;
        let s = 3.0 / kappa() * (self.n1 as f64).powf(4.0 / 3.0);
        Ok([[s * b[0][0], s * b[0][1]], [s * b[1][0], s * b[1][1]]])
    }
}

/// Cumulative sums of `|x| E ν` and `x E ν` over directions sorted by slope.
#[derive(Debug, Clone)]
pub struct ExpectedProfiles {
    slopes: Vec<f64>,
    increments: Vec<f64>,
    length: Vec<f64>,
    endpoint: Vec<[f64; 2]>,
}

impl ExpectedProfiles {
    fn count_le(&self, t: f64) -> usize {
        self.slopes.partition_point(|&s| s <= t)
    }

    pub fn length(&self, t: f64) -> f64 {
        match self.count_le(t) {
            0 => 0.0,
            i => self.length[i - 1],
        }
    }

    /// `E_z[ξ(t)]`, the expected position of the last vertex with slope `<= t`.
    pub fn endpoint(&self, t: f64) -> [f64; 2] {
        match self.count_le(t) {
            0 => [0.0, 0.0],
            i => self.endpoint[i - 1],
        }
    }

    pub fn total_length(&self) -> f64 {
        self.length.last().copied().unwrap_or(0.0)
    }

    /// `(slope, jump)` pairs of the length profile, slopes strictly increasing.
    pub fn jumps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.slopes.iter().copied().zip(self.increments.iter().copied())
    }
}

/// Asymptotic covariance shape `B_{ij} = ∫₀¹ g'^{i+j−2} / g''^{1/3} du`.
pub fn b_matrix(curve: &ConvexCurve) -> Result<[[f64; 2]; 2]> {
    let th0 = curve.t0().atan();
    let th1 = if curve.t1().is_infinite() { PI / 2.0 } else { curve.t1().atan() };
    let entry = |k: i32| -> Result<f64> {
        curve.angle_integral(th0, th1, |th| {
            let (s, c) = th.sin_cos();
            s.powi(k) * c.powi(2 - k) / curve.curvature_at_angle(th).cbrt()
        })
    };
    let (b11, b12, b22) = (entry(0)?, entry(1)?, entry(2)?);
    Ok([[b11, b12], [b12, b22]])
}

/// Mean, covariance and the local-CLT density at the target endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub a_z: [f64; 2],
    pub k: [[f64; 2]; 2],
    pub b: [[f64; 2]; 2],
    pub det_k: f64,
    pub density_at_n: f64,
}

impl MomentReport {
    pub fn new(a_z: [f64; 2], k: [[f64; 2]; 2], b: [[f64; 2]; 2], n: [i64; 2]) -> Result<Self> {
        let det_k = k[0][0] * k[1][1] - k[0][1] * k[1][0];
        let mut r = Self { a_z, k, b, det_k, density_at_n: 0.0 };
        r.density_at_n = r.gaussian_density_at(n)?;
        Ok(r)
    }

    /// `f_{a_z,K_z}(m)`, evaluated through `K^{-1}`.
    pub fn gaussian_density_at(&self, m: [i64; 2]) -> Result<f64> {
        gaussian_density(self.a_z, self.k, [m[0] as f64, m[1] as f64])
    }
}

/// Bivariate normal density with mean `a` and covariance `k` at `m`.
pub fn gaussian_density(a: [f64; 2], k: [[f64; 2]; 2], m: [f64; 2]) -> Result<f64> {
    let det = k[0][0] * k[1][1] - k[0][1] * k[1][0];
    if !(det > 0.0 && k[0][0] > 0.0) || !det.is_finite() {
        return Err(Error::SingularCovariance { det });
    }
    let d = [m[0] - a[0], m[1] - a[1]];
    let q = (k[1][1] * d[0] * d[0] - (k[0][1] + k[1][0]) * d[0] * d[1] + k[0][0] * d[1] * d[1]) / det;
    Ok((-0.5 * q).exp() / (2.0 * PI * det.sqrt()))
}

/// Minimum of `min(δ₁, δ₂)` over a uniform grid in tangent angle.
fn delta_floor(curve: &ConvexCurve) -> f64 {
    let th0 = curve.t0().atan();
    let th1 = if curve.t1().is_infinite() { PI / 2.0 } else { curve.t1().atan() };
    (0..=DELTA_GRID)
        .map(|i| {
            let th = th0 + (th1 - th0) * i as f64 / DELTA_GRID as f64;
            let t = if i == DELTA_GRID {
                curve.t1()
            } else if i == 0 {
                curve.t0()
            } else {
                th.tan()
            };
            let (d1, d2) = delta(curve, t);
            d1.min(d2)
        })
        .fold(f64::INFINITY, f64::min)
}

// Tail bounds beyond lattice radius `r` for exponent rate `q` per unit of
// x1 + x2: at most s + 1 directions on the shell x1 + x2 = s, each with
// E ν <= e^{-qs}/(1 − e^{-qs}) and Var ν <= e^{-qs}/(1 − e^{-qs})².
fn shell_terms(q: f64, s: u64) -> (f64, f64, f64) {
    let sf = s as f64;
    let e = (-q * sf).exp();
    let m = e / (-(-q * sf).exp_m1());
    let v = m / (-(-q * sf).exp_m1());
    let count = sf + 1.0;
    (count * m, count * sf * m, count * sf * sf * v)
}

fn tail_end(q: f64) -> u64 {
    (800.0 / q).ceil() as u64 + 16
}

fn tails_at(q: f64, r: u64) -> Tails {
    let end = tail_end(q).max(r + 16);
    let (mut c, mut f, mut s) = (0.0, 0.0, 0.0);
    for shell in (r + 1..=end).rev() {
        let (a, b, d) = shell_terms(q, shell);
        c += a;
        f += b;
        s += d;
    }
    Tails { count: c, first: f, second: s }
}

fn default_radius(q: f64, alpha: f64) -> u64 {
    let end = tail_end(q);
    let first_budget = RELATIVE_TAIL_BUDGET * alpha.powi(-3);
    let second_budget = RELATIVE_TAIL_BUDGET * alpha.powi(-4);
    let (mut c, mut f, mut s) = (0.0, 0.0, 0.0);
    // walk inwards while the accumulated tail stays within budget
    let mut r = end;
    while r > 1 {
        let (a, b, d) = shell_terms(q, r);
        if c + a > MISSED_EDGE_BUDGET || f + b > first_budget || s + d > second_budget {
            break;
        }
        c += a;
        f += b;
        s += d;
        r -= 1;
    }
    r
}
