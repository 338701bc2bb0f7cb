//! Target arcs: graphs of strictly convex increasing functions on `[0, 1]`.
//!
//! Besides the graph function and its derivatives, every curve is available
//! in the tangent-slope parameterization: `slope_inverse(t)` is the abscissa
//! where the tangent slope equals `t`. Slope-domain integrals are taken over
//! the tangent angle `θ = atan t`, where the arc-length element is
//! `dθ / curvature`, so the unbounded slope range of arcs with a vertical end
//! maps onto a compact interval with a bounded integrand.

mod spline;

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, QuadOptions};

pub use spline::CubicSpline;

/// Grid used to check the construction invariants.
const VALIDATION_GRID: usize = 1024;

/// Curve descriptor as it appears in experiment configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveSpec {
    Preset(Preset),
    Tabulated { points: Vec<[f64; 2]>, k0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Preset {
    /// `sqrt(c (1 - x)) + sqrt(y) = sqrt(c)`, the classical limit shape.
    Parabola { c: f64 },
    /// Quarter of the unit circle from `(0, 0)` to `(1, 1)`.
    CircleArc,
    /// `g(u) = u^p`, valid for `1 < p <= 2`.
    Power { p: f64 },
}

impl CurveSpec {
    pub fn build(&self) -> Result<ConvexCurve> {
        match self {
            CurveSpec::Preset(p) => ConvexCurve::preset(*p),
            CurveSpec::Tabulated { points, k0 } => ConvexCurve::tabulated(points, *k0),
        }
    }
}

#[derive(Debug, Clone)]
enum Shape {
    Parabola { c: f64 },
    CircleArc,
    Power { p: f64 },
    Tabulated(CubicSpline),
}

#[derive(Debug, Clone)]
pub struct ConvexCurve {
    shape: Shape,
    c_gamma: f64,
    t0: f64,
    t1: f64,
    k0: f64,
}

impl ConvexCurve {
    pub fn preset(preset: Preset) -> Result<Self> {
        let shape = match preset {
            Preset::Parabola { c } => {
                if !(c.is_finite() && c > 0.0) {
                    return Err(Error::InvalidPresetParameter(format!("parabola needs c > 0, got {c}")));
                }
                Shape::Parabola { c }
            }
            Preset::CircleArc => Shape::CircleArc,
            Preset::Power { p } => {
                if !(p > 1.0 && p <= 2.0) {
                    return Err(Error::InvalidPresetParameter(format!(
                        "power needs 1 < p <= 2 (curvature vanishes at the origin otherwise), got {p}"
                    )));
                }
                Shape::Power { p }
            }
        };
        let mut curve = ConvexCurve { shape, c_gamma: 0.0, t0: 0.0, t1: 0.0, k0: 0.0 };
        curve.c_gamma = curve.g(1.0);
        curve.t0 = curve.g1(0.0);
        curve.t1 = curve.g1(1.0);
        // Presets know their curvature in closed form; the floor is its
        // minimum over a fine angle grid, shaved slightly.
        let (th0, th1) = (curve.t0.atan(), curve.t1.atan());
        let k_min = (0..=4096)
            .map(|i| th0 + (th1 - th0) * i as f64 / 4096.0)
            .map(|th| curve.curvature_unchecked(angle_to_slope(th)))
            .fold(f64::INFINITY, f64::min);
        curve.k0 = k_min * (1.0 - 1e-4);
        curve.validate()?;
        Ok(curve)
    }

    /// Builds a curve from samples `(u, g(u))` through a clamped cubic spline.
    pub fn tabulated(points: &[[f64; 2]], k0: f64) -> Result<Self> {
        const MIN_SAMPLES: usize = 8;
        if points.len() < MIN_SAMPLES {
            return Err(Error::InsufficientSamples { required: MIN_SAMPLES, got: points.len() });
        }
        if !(k0.is_finite() && k0 > 0.0) {
            return Err(Error::InvalidCurve(format!("curvature floor must be positive, got {k0}")));
        }
        let n = points.len();
        if points.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
            return Err(Error::InvalidCurve("non-finite sample".into()));
        }
        if points[0][0].abs() > 1e-12 || (points[n - 1][0] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidCurve("abscissae must run from 0 to 1".into()));
        }
        if points[0][1].abs() > 1e-12 {
            return Err(Error::InvalidCurve(format!("g(0) must be 0, got {}", points[0][1])));
        }
        for (i, w) in points.windows(2).enumerate() {
            if w[1][0] <= w[0][0] {
                return Err(Error::NotMonotone(format!("abscissa decreases at sample {}", i + 1)));
            }
            if w[1][1] <= w[0][1] {
                return Err(Error::NotMonotone(format!("value decreases at sample {}", i + 1)));
            }
        }
        let secants: Vec<f64> = points.windows(2).map(|w| (w[1][1] - w[0][1]) / (w[1][0] - w[0][0])).collect();
        for (i, s) in secants.windows(2).enumerate() {
            if s[1] <= s[0] {
                return Err(Error::NotConvex(format!("secant slope does not increase at sample {}", i + 1)));
            }
        }
        let mut knots: Vec<f64> = points.iter().map(|p| p[0]).collect();
        knots[0] = 0.0;
        knots[n - 1] = 1.0;
        let mut values: Vec<f64> = points.iter().map(|p| p[1]).collect();
        values[0] = 0.0;
        let spline = CubicSpline::convex(knots, values)
            .ok_or_else(|| Error::NotConvex("no convex C² interpolant through the samples".into()))?;
        let t0 = spline.eval(0.0).1;
        if t0 < 0.0 {
            return Err(Error::NotMonotone(format!("interpolant slope at u = 0 is negative ({t0})")));
        }
        let t1 = spline.eval(1.0).1;
        let curve = ConvexCurve { shape: Shape::Tabulated(spline), c_gamma: points[n - 1][1], t0, t1, k0 };
        curve.validate()?;
        Ok(curve)
    }

    fn validate(&self) -> Result<()> {
        if self.g(0.0).abs() > 1e-12 {
            return Err(Error::InvalidCurve(format!("g(0) = {} != 0", self.g(0.0))));
        }
        if !(self.c_gamma.is_finite() && self.c_gamma > 0.0) {
            return Err(Error::InvalidCurve(format!("c_gamma = {} must be positive", self.c_gamma)));
        }
        if !(self.t0 >= 0.0 && self.t0 < self.t1) {
            return Err(Error::InvalidCurve(format!("slope range [{}, {}] is empty", self.t0, self.t1)));
        }
        // dense grid: 8 points per spline interval for tabulated curves
        let grid: Vec<f64> = match &self.shape {
            Shape::Tabulated(s) => s
                .knots()
                .windows(2)
                .flat_map(|w| (0..8).map(move |j| w[0] + (w[1] - w[0]) * j as f64 / 8.0))
                .chain(std::iter::once(1.0))
                .collect(),
            _ => (0..=VALIDATION_GRID).map(|i| i as f64 / VALIDATION_GRID as f64).collect(),
        };
        let mut prev = f64::NEG_INFINITY;
        for &u in &grid {
            let d1 = self.g1(u);
            if d1 <= prev {
                return Err(Error::NotConvex(format!("derivative is not increasing at u = {u}")));
            }
            prev = d1;
            let curvature = if d1.is_infinite() {
                self.curvature_unchecked(f64::INFINITY)
            } else {
                self.g2(u) / (1.0 + d1 * d1).powf(1.5)
            };
            if !(curvature >= self.k0) {
                return Err(Error::CurvatureFloorViolated { u, curvature, floor: self.k0 });
            }
        }
        Ok(())
    }

    pub fn c_gamma(&self) -> f64 {
        self.c_gamma
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    /// `true` for closed-form curves; tabulated ones are only C².
    pub fn is_analytic(&self) -> bool {
        !matches!(self.shape, Shape::Tabulated(_))
    }

    pub fn g(&self, u: f64) -> f64 {
        match &self.shape {
            Shape::Parabola { c } => {
                let r = 1.0 - (1.0 - u).max(0.0).sqrt();
                c * r * r
            }
            Shape::CircleArc => 1.0 - (1.0 - u * u).max(0.0).sqrt(),
            Shape::Power { p } => u.powf(*p),
            Shape::Tabulated(s) => s.eval(u).0,
        }
    }

    pub fn g1(&self, u: f64) -> f64 {
        match &self.shape {
            Shape::Parabola { c } => c * (1.0 / (1.0 - u).max(0.0).sqrt() - 1.0),
            Shape::CircleArc => u / (1.0 - u * u).max(0.0).sqrt(),
            Shape::Power { p } => p * u.powf(p - 1.0),
            Shape::Tabulated(s) => s.eval(u).1,
        }
    }

    pub fn g2(&self, u: f64) -> f64 {
        match &self.shape {
            Shape::Parabola { c } => 0.5 * c * (1.0 - u).max(0.0).powf(-1.5),
            Shape::CircleArc => (1.0 - u * u).max(0.0).powf(-1.5),
            Shape::Power { p } => p * (p - 1.0) * u.powf(p - 2.0),
            Shape::Tabulated(s) => s.eval(u).2,
        }
    }

    /// Generalized inverse of `g'`: 0 below `t0`, 1 above `t1`.
    pub fn slope_inverse(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::SlopeOutOfRange { slope: t, t0: self.t0, t1: self.t1 });
        }
        if t <= self.t0 {
            return Ok(0.0);
        }
        if t >= self.t1 {
            return Ok(1.0);
        }
        if let Shape::Tabulated(s) = &self.shape {
            return s.slope_inverse(t).ok_or(Error::NonMonotoneDerivative { slope: t });
        }
        self.newton_slope_inverse(t)
    }

    fn newton_slope_inverse(&self, t: f64) -> Result<f64> {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        if !(self.g1(lo) <= t && self.g1(hi) >= t) {
            return Err(Error::NonMonotoneDerivative { slope: t });
        }
        let mut u = 0.5;
        for _ in 0..400 {
            let residual = self.g1(u) - t;
            if residual.abs() <= 4.0 * f64::EPSILON * t.max(1.0) {
                return Ok(u);
            }
            if residual < 0.0 {
                lo = u;
            } else {
                hi = u;
            }
            if hi - lo <= 2.0 * f64::EPSILON {
                return Ok(0.5 * (lo + hi));
            }
            let step = residual / self.g2(u);
            let mut next = u - step;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if next == u {
                return Ok(u);
            }
            u = next;
        }
        Err(Error::NonMonotoneDerivative { slope: t })
    }

    /// `g''` evaluated where the tangent slope equals `t`.
    pub fn g2_at_slope(&self, t: f64) -> Result<f64> {
        self.check_slope(t)?;
        Ok(match &self.shape {
            Shape::Parabola { c } => {
                let r = 1.0 + t / c;
                0.5 * c * r * r * r
            }
            Shape::CircleArc => (1.0 + t * t).powf(1.5),
            Shape::Power { p } => p * (p - 1.0) * (t / p).powf((p - 2.0) / (p - 1.0)),
            Shape::Tabulated(_) => self.g2(self.slope_inverse(t)?),
        })
    }

    fn check_slope(&self, t: f64) -> Result<()> {
        // tolerate rounding at the ends of the slope range
        let slack = 1e-12 * self.t1.clamp(1.0, 1e12);
        if t.is_nan() || t < self.t0 - slack || t > self.t1 + slack {
            return Err(Error::SlopeOutOfRange { slope: t, t0: self.t0, t1: self.t1 });
        }
        Ok(())
    }

    /// Curvature of the arc at the point with tangent slope `t ∈ [t0, t1]`.
    pub fn curvature_at_slope(&self, t: f64) -> Result<f64> {
        self.check_slope(t)?;
        Ok(self.curvature_unchecked(t.clamp(self.t0, self.t1)))
    }

    fn curvature_unchecked(&self, t: f64) -> f64 {
        match &self.shape {
            Shape::Parabola { c } => {
                if t.is_infinite() {
                    0.5 / (c * c)
                } else {
                    let r = (1.0 + t / c) / 1.0_f64.hypot(t);
                    0.5 * c * r * r * r
                }
            }
            Shape::CircleArc => 1.0,
            _ => {
                let g2 = match &self.shape {
                    Shape::Power { p } => p * (p - 1.0) * (t / p).powf((p - 2.0) / (p - 1.0)),
                    _ => self.g2(self.slope_inverse(t).unwrap_or(if t <= self.t0 { 0.0 } else { 1.0 })),
                };
                g2 / 1.0_f64.hypot(t).powi(3)
            }
        }
    }

    /// Length of the part of the arc whose tangent slope does not exceed `t`.
    pub fn arc_length_profile(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::SlopeOutOfRange { slope: t, t0: self.t0, t1: self.t1 });
        }
        if t <= self.t0 {
            return Ok(0.0);
        }
        let upper = slope_to_angle(t.min(self.t1));
        self.angle_integral(slope_to_angle(self.t0), upper, |_| 1.0)
    }

    /// `arc_length_profile` at every entry of an ascending slope list,
    /// integrating only between consecutive entries.
    pub fn arc_length_profile_sorted(&self, ts: &[f64]) -> Result<Vec<f64>> {
        let th0 = slope_to_angle(self.t0);
        let th1 = slope_to_angle(self.t1);
        let mut out = Vec::with_capacity(ts.len());
        let mut acc = 0.0;
        let mut last = th0;
        let opts = QuadOptions { rel_tol: 1e-12, abs_tol: 1e-15, ..QuadOptions::default() };
        for &t in ts {
            if t.is_nan() || t < 0.0 {
                return Err(Error::SlopeOutOfRange { slope: t, t0: self.t0, t1: self.t1 });
            }
            let th = slope_to_angle(t).clamp(th0, th1);
            if th < last {
                return Err(Error::InvalidConfig("slope list must be ascending".into()));
            }
            if th > last {
                acc += quadrature::integrate(|a| 1.0 / self.curvature_unchecked(angle_to_slope(a)), last, th, opts)?;
                last = th;
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// `∫ weight(θ) / curvature(tan θ) dθ` over an angle interval inside the
    /// slope range.
    pub(crate) fn angle_integral<W: Fn(f64) -> f64>(&self, th_lo: f64, th_hi: f64, weight: W) -> Result<f64> {
        quadrature::integrate(
            |a| weight(a) / self.curvature_unchecked(angle_to_slope(a)),
            th_lo,
            th_hi,
            QuadOptions { rel_tol: 1e-11, abs_tol: 1e-15, ..QuadOptions::default() },
        )
    }

    pub(crate) fn curvature_at_angle(&self, th: f64) -> f64 {
        self.curvature_unchecked(angle_to_slope(th))
    }

    /// Point `(u, g(u))` of the arc with tangent slope `t`.
    pub fn point_at_slope(&self, t: f64) -> Result<[f64; 2]> {
        let u = self.slope_inverse(t)?;
        Ok([u, self.g(u)])
    }

    /// Total arc length.
    pub fn length(&self) -> Result<f64> {
        self.arc_length_profile(f64::INFINITY)
    }

    /// Polyline through the arc with vertices spaced uniformly in arc length,
    /// consecutive vertices at most `max_spacing` apart.
    pub fn discretize(&self, max_spacing: f64) -> Result<Vec<[f64; 2]>> {
        if !(max_spacing > 0.0) {
            return Err(Error::ParameterOutOfRange(format!("spacing must be positive, got {max_spacing}")));
        }
        let th0 = slope_to_angle(self.t0);
        let th1 = slope_to_angle(self.t1);
        let total = self.length()?;
        let pieces = (total / max_spacing).ceil().max(1.0) as usize;
        // Fine table of (θ, length, u, v) built by fixed Kronrod steps on the
        // angle; positions come from integrating (cos θ, sin θ) / curvature.
        let fine = 8 * pieces;
        let mut table = Vec::with_capacity(fine + 1);
        let (mut ell, mut u, mut v) = (0.0, 0.0, 0.0);
        table.push([ell, u, v]);
        let step = (th1 - th0) / fine as f64;
        for k in 0..fine {
            let a = th0 + step * k as f64;
            let b = if k + 1 == fine { th1 } else { a + step };
            let radius = |x: f64| 1.0 / self.curvature_unchecked(angle_to_slope(x));
            ell += quadrature::gauss_kronrod_15(&radius, a, b).0;
            u += quadrature::gauss_kronrod_15(&|x: f64| x.cos() * radius(x), a, b).0;
            v += quadrature::gauss_kronrod_15(&|x: f64| x.sin() * radius(x), a, b).0;
            table.push([ell, u, v]);
        }
        // pin the far end to the exact endpoint
        let end = [1.0, self.c_gamma];
        let mut out = Vec::with_capacity(pieces + 1);
        out.push([0.0, 0.0]);
        let mut j = 0;
        for k in 1..pieces {
            let target = ell * k as f64 / pieces as f64;
            while j + 1 < table.len() && table[j + 1][0] < target {
                j += 1;
            }
            let (p, q) = (table[j], table[(j + 1).min(fine)]);
            let w = if q[0] > p[0] { (target - p[0]) / (q[0] - p[0]) } else { 0.0 };
            out.push([p[1] + w * (q[1] - p[1]), p[2] + w * (q[2] - p[2])]);
        }
        out.push(end);
        Ok(out)
    }
}

pub(crate) fn slope_to_angle(t: f64) -> f64 {
    if t.is_infinite() {
        FRAC_PI_2
    } else {
        t.atan()
    }
}

pub(crate) fn angle_to_slope(th: f64) -> f64 {
    if th >= FRAC_PI_2 {
        f64::INFINITY
    } else {
        th.tan()
    }
}

/// Length of the graph of a function with derivative `g1` over `[0, u_end]`,
/// integrated directly in the abscissa.
pub fn graph_arc_length<F: Fn(f64) -> f64>(g1: F, u_end: f64) -> Result<f64> {
    quadrature::integrate(|u| (1.0 + g1(u).powi(2)).sqrt(), 0.0, u_end, QuadOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parabola(c: f64) -> ConvexCurve {
        ConvexCurve::preset(Preset::Parabola { c }).unwrap()
    }

    fn tabulate(curve: &ConvexCurve, n: usize) -> Vec<[f64; 2]> {
        (0..n).map(|i| i as f64 / (n - 1) as f64).map(|u| [u, curve.g(u)]).collect()
    }

    #[test]
    fn parabola_slope_inverse_closed_form() {
        let c = parabola(1.0);
        assert!((c.slope_inverse(1.0).unwrap() - 0.75).abs() < 1e-12);
        for &t in &[0.01, 0.3, 1.0, 4.0, 50.0] {
            for &cc in &[0.5, 1.0, 2.0] {
                let curve = parabola(cc);
                let closed = 1.0 - cc * cc / ((t + cc) * (t + cc));
                let u = curve.slope_inverse(t).unwrap();
                assert!((u - closed).abs() < 1e-12, "c={cc} t={t}: {u} vs {closed}");
                assert!((curve.g1(closed) - t).abs() < 1e-9 * t.max(1.0));
            }
        }
    }

    #[test]
    fn slope_inverse_boundaries() {
        let c = parabola(1.0);
        assert_eq!(c.slope_inverse(0.0).unwrap(), 0.0);
        assert_eq!(c.slope_inverse(f64::INFINITY).unwrap(), 1.0);
        let p = ConvexCurve::preset(Preset::Power { p: 2.0 }).unwrap();
        assert_eq!(p.slope_inverse(3.0).unwrap(), 1.0);
        assert!(matches!(c.slope_inverse(-1.0), Err(Error::SlopeOutOfRange { .. })));
    }

    #[test]
    fn presets_have_expected_shape() {
        let c = parabola(1.0);
        assert_eq!(c.g(0.0), 0.0);
        assert!((c.g(1.0) - 1.0).abs() < 1e-15);
        assert!((c.g(0.75) - 0.25).abs() < 1e-15);
        assert_eq!(parabola(2.0).c_gamma(), 2.0);
        let p = ConvexCurve::preset(Preset::Power { p: 2.0 }).unwrap();
        assert_eq!((p.t0(), p.t1(), p.c_gamma()), (0.0, 2.0, 1.0));
        assert!((p.g(0.3) - 0.09).abs() < 1e-15);
        assert!(c.t1().is_infinite());
    }

    #[test]
    fn invalid_presets_rejected() {
        for preset in [
            Preset::Parabola { c: 0.0 },
            Preset::Parabola { c: -1.0 },
            Preset::Power { p: 1.0 },
            Preset::Power { p: 3.0 },
        ] {
            assert!(matches!(ConvexCurve::preset(preset), Err(Error::InvalidPresetParameter(_))));
        }
    }

    #[test]
    fn parabola_curvature_values() {
        let c = parabola(1.0);
        assert!((c.curvature_at_slope(0.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((c.curvature_at_slope(1.0).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        assert!((c.curvature_at_slope(f64::INFINITY).unwrap() - 0.5).abs() < 1e-15);
        let p = ConvexCurve::preset(Preset::Power { p: 2.0 }).unwrap();
        assert!(matches!(p.curvature_at_slope(2.5), Err(Error::SlopeOutOfRange { .. })));
    }

    #[test]
    fn circle_has_unit_curvature() {
        let c = ConvexCurve::preset(Preset::CircleArc).unwrap();
        for i in 0..=20 {
            let t = (i as f64 * 0.07).tan();
            let k = c.curvature_at_slope(t).unwrap();
            assert!((k - 1.0).abs() < 1e-12);
            let u = c.slope_inverse(t).unwrap();
            let via_u = c.g2(u) / (1.0 + t * t).powf(1.5);
            assert!((via_u - 1.0).abs() < 1e-9, "t={t}: {via_u}");
        }
        assert!((c.length().unwrap() - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn arc_length_oracles() {
        // independent oracle: composite Simpson in the angle of
        // 2 sqrt(1+t^2)/(1+t)^3 dt, t = tan θ
        let f = |th: f64| {
            let t = th.tan();
            2.0 * (1.0 + t * t).sqrt() / (1.0 + t).powi(3) * (1.0 + t * t)
        };
        let n = 20000;
        let h = FRAC_PI_2 / n as f64;
        let mut s = f(0.0) + 2.0; // integrand tends to 2 at θ = π/2
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let simpson = s * h / 3.0;
        const L_STAR: f64 = 1.623_225_240_140_230_5;
        assert!((simpson - L_STAR).abs() < 1e-9);
        let c = parabola(1.0);
        assert!((c.length().unwrap() - L_STAR).abs() < 1e-10);
        assert_eq!(c.arc_length_profile(0.0).unwrap(), 0.0);
        // rectifiability bound
        assert!(c.length().unwrap() <= 1.0 + c.c_gamma());
        // straight segment in the abscissa route
        let seg = graph_arc_length(|_| 1.0, 1.0).unwrap();
        assert!((seg - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn arc_length_matches_abscissa_route() {
        let p = ConvexCurve::preset(Preset::Power { p: 2.0 }).unwrap();
        for &t in &[0.3, 1.0, 1.9, 5.0] {
            let u = p.slope_inverse(t).unwrap();
            let direct = graph_arc_length(|x| 2.0 * x, u).unwrap();
            assert!((p.arc_length_profile(t).unwrap() - direct).abs() < 1e-10);
        }
        let p15 = ConvexCurve::preset(Preset::Power { p: 1.5 }).unwrap();
        let u = p15.slope_inverse(1.2).unwrap();
        let direct = graph_arc_length(|x| 1.5 * x.sqrt(), u).unwrap();
        assert!((p15.arc_length_profile(1.2).unwrap() - direct).abs() < 1e-9);
    }

    #[test]
    fn sorted_profile_agrees_with_pointwise() {
        let c = parabola(1.0);
        let ts = [0.0, 0.1, 0.5, 0.5, 2.0, 30.0, f64::INFINITY];
        let many = c.arc_length_profile_sorted(&ts).unwrap();
        for (t, v) in ts.iter().zip(&many) {
            assert!((c.arc_length_profile(*t).unwrap() - v).abs() < 1e-11);
        }
    }

    #[test]
    fn tabulated_parabola_tracks_preset() {
        let pre = parabola(1.0);
        let tab = ConvexCurve::tabulated(&tabulate(&pre, 64), 0.01).unwrap();
        // interpolation error grows toward the vertical end of the parabola;
        // at t = 1 it is about 2e-6 with 64 samples
        for &t in &[0.1, 0.25, 0.5, 0.75] {
            let a = pre.slope_inverse(t).unwrap();
            let b = tab.slope_inverse(t).unwrap();
            assert!((a - b).abs() < 1e-6, "t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn tabulated_rejections() {
        let pre = parabola(1.0);
        let pts = tabulate(&pre, 64);
        assert!(matches!(ConvexCurve::tabulated(&pts[..2], 0.1), Err(Error::InsufficientSamples { .. })));
        let mut bad = pts.clone();
        bad[10][1] = bad[9][1] - 1e-3;
        assert!(matches!(ConvexCurve::tabulated(&bad, 0.1), Err(Error::NotMonotone(_))));
        let mut kinked = pts.clone();
        kinked[30][1] += 0.002;
        let r = ConvexCurve::tabulated(&kinked, 0.01);
        assert!(matches!(r, Err(Error::NotConvex(_))), "{r:?}");
        assert!(matches!(ConvexCurve::tabulated(&pts, 10.0), Err(Error::CurvatureFloorViolated { .. })));
    }

    #[test]
    fn discretization_is_arc_length_uniform() {
        let c = parabola(1.0);
        let pts = c.discretize(1e-3).unwrap();
        assert_eq!(pts[0], [0.0, 0.0]);
        assert_eq!(*pts.last().unwrap(), [1.0, 1.0]);
        let chords: Vec<f64> = pts.windows(2).map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1])).collect();
        let max = chords.iter().cloned().fold(0.0, f64::max);
        let min = chords.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max <= 1e-3 && min > 0.9 * max, "{min} {max}");
        // vertices lie on the curve
        for p in pts.iter().step_by(97) {
            assert!((c.g(p[0]) - p[1]).abs() < 1e-7, "{p:?}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn inverse_consistency(th in 0.0f64..1.55, which in 0usize..4) {
                let curve = match which {
                    0 => parabola(1.0),
                    1 => parabola(2.5),
                    2 => ConvexCurve::preset(Preset::CircleArc).unwrap(),
                    _ => ConvexCurve::preset(Preset::Power { p: 1.7 }).unwrap(),
                };
                let t = th.tan().clamp(curve.t0(), curve.t1().min(1e3));
                let u = curve.slope_inverse(t).unwrap();
                prop_assert!((curve.g1(u) - t).abs() <= 1e-9 * t.max(1.0));
                let k = curve.curvature_at_slope(t).unwrap();
                let g2 = curve.g2(u);
                prop_assert!((k * (1.0 + t * t).powf(1.5) - g2).abs() <= 1e-9 * g2.max(1.0));
                prop_assert!(k >= curve.k0());
            }

            #[test]
            fn profiles_are_monotone(a in 0.0f64..1.57, b in 0.0f64..1.57) {
                let curve = parabola(1.0);
                let (lo, hi) = if a <= b { (a.tan(), b.tan()) } else { (b.tan(), a.tan()) };
                prop_assert!(curve.slope_inverse(lo).unwrap() <= curve.slope_inverse(hi).unwrap());
                prop_assert!(curve.arc_length_profile(lo).unwrap() <= curve.arc_length_profile(hi).unwrap() + 1e-12);
            }
        }
    }
}
