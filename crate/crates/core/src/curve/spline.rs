//! Convexity-preserving C² interpolation for tabulated arcs.
//!
//! A spline in tension: on each interval `s''` is a combination of
//! `sinh(p·a)` and `sinh(p·b)` (with `a`, `b` the barycentric coordinates and
//! `p` the dimensionless tension). With `p = 0` the interval is an ordinary
//! cubic. Tension is raised only on intervals next to knots where the cubic
//! spline would lose convexity, which happens near steep ends of the data.

const TENSION_START: f64 = 0.5;
const TENSION_MAX: f64 = 300.0;

#[derive(Debug, Clone)]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    /// Second derivative at the knots.
    second: Vec<f64>,
    tension: Vec<f64>,
}

impl CubicSpline {
    /// Interpolates strictly convex data. Returns `None` if no admissible
    /// tension keeps every knot curvature positive.
    pub fn convex(knots: Vec<f64>, values: Vec<f64>) -> Option<Self> {
        let n = knots.len();
        assert!(n >= 4 && values.len() == n);
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let secant: Vec<f64> = (0..n - 1).map(|i| (values[i + 1] - values[i]) / h[i]).collect();

        // End slopes from the cubic through the outer four samples, falling
        // back to the three-point quadratic when the cubic estimate would not
        // be compatible with a convex interpolant.
        let mut d0 = lagrange_slope(&knots[..4], &values[..4], knots[0]);
        if !(d0 < secant[0]) {
            d0 = lagrange_slope(&knots[..3], &values[..3], knots[0]);
        }
        let mut dn = lagrange_slope(&knots[n - 4..], &values[n - 4..], knots[n - 1]);
        if !(dn > secant[n - 2]) {
            dn = lagrange_slope(&knots[n - 3..], &values[n - 3..], knots[n - 1]);
        }

        let mut tension = vec![0.0; n - 1];
        for _ in 0..64 {
            let second = solve_second_derivatives(&h, &secant, &tension, d0, dn);
            let bad: Vec<usize> = (0..n).filter(|&j| !(second[j] > 0.0)).collect();
            if bad.is_empty() {
                return Some(Self { knots, values, second, tension });
            }
            let mut changed = false;
            for j in bad {
                for i in [j.wrapping_sub(1), j] {
                    if i < n - 1 && tension[i] < TENSION_MAX {
                        tension[i] =
                            if tension[i] == 0.0 { TENSION_START } else { (2.0 * tension[i]).min(TENSION_MAX) };
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        None
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn second_derivatives(&self) -> &[f64] {
        &self.second
    }

    pub fn tensions(&self) -> &[f64] {
        &self.tension
    }

    fn interval(&self, u: f64) -> usize {
        let n = self.knots.len();
        let idx = self.knots.partition_point(|&k| k <= u);
        idx.clamp(1, n - 1) - 1
    }

    /// Value, first and second derivative at `u`.
    pub fn eval(&self, u: f64) -> (f64, f64, f64) {
        self.eval_on(self.interval(u), u)
    }

    fn eval_on(&self, i: usize, u: f64) -> (f64, f64, f64) {
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let h = x1 - x0;
        let a = (x1 - u) / h;
        let b = (u - x0) / h;
        let (z0, z1) = (self.second[i], self.second[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let p = self.tension[i];
        if p == 0.0 {
            let value = a * y0 + b * y1 + ((a * a * a - a) * z0 + (b * b * b - b) * z1) * h * h / 6.0;
            let slope = (y1 - y0) / h - (3.0 * a * a - 1.0) / 6.0 * h * z0 + (3.0 * b * b - 1.0) / 6.0 * h * z1;
            return (value, slope, a * z0 + b * z1);
        }
        let (sa, ca) = sinh_cosh_ratio(p, a);
        let (sb, cb) = sinh_cosh_ratio(p, b);
        let p2 = p * p;
        let value = a * y0 + b * y1 + h * h * (z0 * (sa - a) + z1 * (sb - b)) / p2;
        // cosh(p·a) / (p sinh p) = ca / p
        let slope = (y1 - y0) / h + h * (z0 * (1.0 / p2 - ca / p) + z1 * (cb / p - 1.0 / p2));
        (value, slope, z0 * sa + z1 * sb)
    }

    /// Solves `g'(u) = t`. Returns `None` when `t` is outside the range of
    /// the derivative.
    pub fn slope_inverse(&self, t: f64) -> Option<f64> {
        let n = self.knots.len();
        let first = self.eval_on(0, self.knots[0]).1;
        let last = self.eval_on(n - 2, self.knots[n - 1]).1;
        if !(first..=last).contains(&t) {
            return None;
        }
        let mut lo = 0;
        let mut hi = n - 2;
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.eval_on(mid, self.knots[mid + 1]).1 < t {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        let i = lo;
        let (mut a, mut b) = (self.knots[i], self.knots[i + 1]);
        let mut u = 0.5 * (a + b);
        for _ in 0..100 {
            let (_, d1, d2) = self.eval_on(i, u);
            let r = d1 - t;
            if r.abs() <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
                break;
            }
            if r < 0.0 {
                a = u;
            } else {
                b = u;
            }
            let mut next = u - r / d2;
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            if next == u || b - a <= 2.0 * f64::EPSILON {
                break;
            }
            u = next;
        }
        Some(u)
    }
}

/// `(sinh(p·x) / sinh(p), p·cosh(p·x) / sinh(p) / p)` evaluated without
/// overflow for large `p`; the second entry is `cosh(p·x) / sinh(p)`.
fn sinh_cosh_ratio(p: f64, x: f64) -> (f64, f64) {
    if p < 20.0 {
        let s = p.sinh();
        ((p * x).sinh() / s, (p * x).cosh() / s)
    } else {
        let e = (p * (x - 1.0)).exp();
        let denom = 1.0 - (-2.0 * p).exp();
        let em = (-2.0 * p * x).exp();
        (e * (1.0 - em) / denom, e * (1.0 + em) / denom)
    }
}

/// Interval coefficients `(α, β)` with `s'(x0) = S − α z0 − β z1` and
/// `s'(x1) = S + β z0 + α z1`.
fn end_coefficients(h: f64, p: f64) -> (f64, f64) {
    if p == 0.0 {
        return (h / 3.0, h / 6.0);
    }
    let p2 = p * p;
    let coth = 1.0 / p.tanh();
    let csch = if p < 20.0 { 1.0 / p.sinh() } else { 2.0 * (-p).exp() };
    (h * (coth / p - 1.0 / p2), h * (1.0 / p2 - csch / p))
}

fn solve_second_derivatives(h: &[f64], secant: &[f64], tension: &[f64], d0: f64, dn: f64) -> Vec<f64> {
    let n = h.len() + 1;
    let coef: Vec<(f64, f64)> = h.iter().zip(tension).map(|(&h, &p)| end_coefficients(h, p)).collect();
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    diag[0] = coef[0].0;
    sup[0] = coef[0].1;
    rhs[0] = secant[0] - d0;
    for i in 1..n - 1 {
        sub[i] = coef[i - 1].1;
        diag[i] = coef[i - 1].0 + coef[i].0;
        sup[i] = coef[i].1;
        rhs[i] = secant[i] - secant[i - 1];
    }
    sub[n - 1] = coef[n - 2].1;
    diag[n - 1] = coef[n - 2].0;
    rhs[n - 1] = dn - secant[n - 2];
    solve_tridiagonal(&sub, &diag, &sup, &rhs)
}

fn lagrange_slope(xs: &[f64], ys: &[f64], at: f64) -> f64 {
    let mut total = 0.0;
    for j in 0..xs.len() {
        let mut denom = 1.0;
        for m in 0..xs.len() {
            if m != j {
                denom *= xs[j] - xs[m];
            }
        }
        let mut numer = 0.0;
        for k in 0..xs.len() {
            if k == j {
                continue;
            }
            let mut prod = 1.0;
            for m in 0..xs.len() {
                if m != j && m != k {
                    prod *= at - xs[m];
                }
            }
            numer += prod;
        }
        total += ys[j] * numer / denom;
    }
    total
}

fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / m } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}
