//! Hausdorff and length-profile distances between paths.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::curve::ConvexCurve;
use crate::error::{Error, Result};
use crate::sampler::PolygonalLine;

/// Uniform angle refinement added to the slope knots of `d_L`.
pub const REFINEMENT_POINTS: usize = 256;

/// Curve discretization used for `d_H`, relative to the curve's length.
pub const CURVE_RESOLUTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathDistanceReport {
    pub d_hausdorff: f64,
    pub d_length: f64,
    /// Slope at which the `d_L` supremum is attained (as a one-sided limit
    /// when it sits at a jump).
    pub argmax_t: f64,
}

type P = [f64; 2];

fn dist(a: P, b: P) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn point_segment(p: P, a: P, b: P) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    if len2 == 0.0 {
        return dist(p, a);
    }
    let s = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + s * d[0], a[1] + s * d[1]])
}

/// Nearest-distance queries against a fixed polyline.
struct Target<'a> {
    pts: &'a [P],
    monotone: bool,
}

impl<'a> Target<'a> {
    fn new(pts: &'a [P]) -> Self {
        let monotone = pts.windows(2).all(|w| w[1][0] >= w[0][0] && w[1][1] >= w[0][1]);
        Self { pts, monotone }
    }

    fn distance(&self, p: P) -> f64 {
        self.nearest(p).0
    }

    fn segment_distance(&self, p: P, seg: usize) -> f64 {
        if self.pts.len() == 1 {
            dist(p, self.pts[0])
        } else {
            point_segment(p, self.pts[seg], self.pts[seg + 1])
        }
    }

    /// Distance to the polyline and the index of a nearest segment.
    fn nearest(&self, p: P) -> (f64, usize) {
        let pts = self.pts;
        if pts.len() == 1 {
            return (dist(p, pts[0]), 0);
        }
        let mut best = (f64::INFINITY, 0);
        let offer = |seg: usize, best: &mut (f64, usize)| {
            let d = point_segment(p, pts[seg], pts[seg + 1]);
            if d < best.0 {
                *best = (d, seg);
            }
        };
        if !self.monotone {
            for seg in 0..pts.len() - 1 {
                offer(seg, &mut best);
            }
            return best;
        }
        // Coordinatewise non-decreasing vertices: every segment before
        // vertex j lies in the quadrant below-left of it, every segment after
        // it above-right, which bounds their distance from below.
        let segs = pts.len() - 1;
        let start = pts.partition_point(|v| v[0] < p[0]).clamp(1, segs) - 1;
        offer(start, &mut best);
        let mut j = start;
        while j > 0 {
            let v = pts[j];
            if (p[0] - v[0]).max(0.0).hypot((p[1] - v[1]).max(0.0)) >= best.0 {
                break;
            }
            offer(j - 1, &mut best);
            j -= 1;
        }
        let mut j = start + 1;
        while j < segs {
            let v = pts[j];
            if (v[0] - p[0]).max(0.0).hypot((v[1] - p[1]).max(0.0)) >= best.0 {
                break;
            }
            offer(j, &mut best);
            j += 1;
        }
        best
    }
}

/// `max_{x∈a} min_{y∈b} |x − y|` over the continuous polylines.
fn directed(a: &[P], b: &Target) -> f64 {
    if a.len() == 1 {
        return b.distance(a[0]);
    }
    // Along a segment the distance to the polyline is 1-Lipschitz, and the
    // distance to any one fixed segment is convex, so over [p, q] it is at
    // most min((d_p + d_q + |pq|) / 2, max over s of d_s(p), d_s(q)) for the
    // nearest segments s of either end.
    let bound = |p: P, q: P, np: (f64, usize), nq: (f64, usize)| {
        let lip = 0.5 * (np.0 + nq.0 + dist(p, q));
        let via_p = np.0.max(b.segment_distance(q, np.1));
        let via_q = nq.0.max(b.segment_distance(p, nq.1));
        lip.min(via_p).min(via_q)
    };
    let mut best = 0.0f64;
    let mut stack: Vec<(P, P, (f64, usize), (f64, usize))> = Vec::new();
    for w in a.windows(2) {
        let (np, nq) = (b.nearest(w[0]), b.nearest(w[1]));
        best = best.max(np.0).max(nq.0);
        stack.push((w[0], w[1], np, nq));
    }
    let tol = 1e-12 * (1.0 + best);
    while let Some((p, q, np, nq)) = stack.pop() {
        if bound(p, q, np, nq) <= best + tol {
            continue;
        }
        let m = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
        if m == p || m == q {
            continue;
        }
        let nm = b.nearest(m);
        best = best.max(nm.0);
        stack.push((p, m, np, nm));
        stack.push((m, q, nm, nq));
    }
    best
}

/// Hausdorff distance between two polylines (a single vertex is a point).
pub fn hausdorff(a: &[P], b: &[P]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyPath);
    }
    let (ta, tb) = (Target::new(a), Target::new(b));
    Ok(directed(a, &tb).max(directed(b, &ta)))
}

/// Hausdorff distance between a scaled line and a curve discretized at
/// [`CURVE_RESOLUTION`] of its length.
pub fn hausdorff_to_curve(line: &PolygonalLine, scale: f64, curve_polyline: &[P]) -> Result<f64> {
    hausdorff(&line.scale(scale), curve_polyline)
}

/// Polyline approximation of the curve used by [`hausdorff_to_curve`].
pub fn curve_polyline(curve: &ConvexCurve) -> Result<Vec<P>> {
    curve.discretize(CURVE_RESOLUTION * curve.length()?)
}

/// Slope knots of the refinement grid, uniform in tangent angle over the
/// curve's slope range.
pub fn refinement_grid(curve: &ConvexCurve, points: usize) -> Vec<f64> {
    let th0 = curve.t0().atan();
    let th1 = if curve.t1().is_infinite() { FRAC_PI_2 } else { curve.t1().atan() };
    (0..=points)
        .map(|i| th0 + (th1 - th0) * i as f64 / points.max(1) as f64)
        .map(|th| if th >= FRAC_PI_2 { f64::INFINITY } else { th.tan() })
        .collect()
}

/// `sup_t |scale·P(t) − ℓ_γ(t)|` for a right-continuous step profile `P`
/// given by its `(slope, jump)` pairs in increasing slope order.
///
/// Returns the supremum and the slope where it is attained. Between
/// consecutive knots `P` is constant and `ℓ_γ` is monotone, so the
/// supremum over each gap is attained at one of its ends.
pub fn step_profile_distance<I>(jumps: I, scale: f64, curve: &ConvexCurve, refinement: usize) -> Result<(f64, f64)>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let jumps: Vec<(f64, f64)> = jumps.into_iter().collect();
    let mut knots: Vec<f64> = Vec::with_capacity(jumps.len() + refinement + 4);
    knots.push(0.0);
    knots.push(curve.t0());
    knots.push(curve.t1());
    knots.push(f64::INFINITY);
    knots.extend(jumps.iter().map(|j| j.0));
    knots.extend(refinement_grid(curve, refinement));
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let ell = curve.arc_length_profile_sorted(&knots)?;
    let mut best = (f64::NEG_INFINITY, 0.0);
    let mut level = 0.0;
    let mut next_jump = 0;
    for (i, &t) in knots.iter().enumerate() {
        while next_jump < jumps.len() && jumps[next_jump].0 <= t {
            level += scale * jumps[next_jump].1;
            next_jump += 1;
        }
        let here = (level - ell[i]).abs();
        if here > best.0 {
            best = (here, t);
        }
        if let Some(&right) = ell.get(i + 1) {
            let there = (level - right).abs();
            if there > best.0 {
                best = (there, knots[i + 1]);
            }
        }
    }
    Ok(best)
}

/// `d_L(scale·Γ, γ)` and the slope of the supremum.
pub fn length_distance(line: &PolygonalLine, scale: f64, curve: &ConvexCurve) -> Result<(f64, f64)> {
    length_distance_refined(line, scale, curve, REFINEMENT_POINTS)
}

pub fn length_distance_refined(
    line: &PolygonalLine,
    scale: f64,
    curve: &ConvexCurve,
    refinement: usize,
) -> Result<(f64, f64)> {
    let jumps = line.edges.iter().map(|(d, n)| (d.tau(), d.norm() * *n as f64));
    step_profile_distance(jumps, scale, curve, refinement)
}

/// `d_L` between two scaled lines; both profiles are step functions, so the
/// supremum is a maximum over the union of their edge slopes.
pub fn line_length_distance(a: &PolygonalLine, sa: f64, b: &PolygonalLine, sb: f64) -> f64 {
    let mut knots: Vec<f64> = a.edges.iter().chain(&b.edges).map(|e| e.0.tau()).collect();
    knots.push(0.0);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let pa = crate::sampler::length_profile(a, &knots);
    let pb = crate::sampler::length_profile(b, &knots);
    pa.iter().zip(&pb).map(|(x, y)| (sa * x - sb * y).abs()).fold(0.0, f64::max)
}

/// Both distances between `scale·Γ` and the curve.
pub fn path_distance(
    line: &PolygonalLine,
    scale: f64,
    curve: &ConvexCurve,
    curve_polyline: &[P],
) -> Result<PathDistanceReport> {
    let (d_length, argmax_t) = length_distance(line, scale, curve)?;
    let d_hausdorff = hausdorff_to_curve(line, scale, curve_polyline)?;
    Ok(PathDistanceReport { d_hausdorff, d_length, argmax_t })
}
