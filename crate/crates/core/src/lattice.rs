//! Primitive lattice directions and Möbius-inverted lattice sums.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

/// Largest Möbius table the sieve will allocate.
pub const MOBIUS_BUDGET: usize = 200_000_000;

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// A coprime pair `(x1, x2)` of non-negative integers, i.e. a possible edge
/// direction of a convex lattice polygonal line. Ordered by slope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeDirection {
    pub x1: u32,
    pub x2: u32,
}

impl LatticeDirection {
    pub const HORIZONTAL: LatticeDirection = LatticeDirection { x1: 1, x2: 0 };
    pub const VERTICAL: LatticeDirection = LatticeDirection { x1: 0, x2: 1 };

    /// `None` unless the pair is coprime (which excludes `(0, 0)`).
    pub fn new(x1: u32, x2: u32) -> Option<Self> {
        (gcd(x1 as u64, x2 as u64) == 1).then_some(Self { x1, x2 })
    }

    /// Slope `x2 / x1`, `+∞` for the vertical direction.
    pub fn tau(&self) -> f64 {
        if self.x1 == 0 {
            f64::INFINITY
        } else {
            self.x2 as f64 / self.x1 as f64
        }
    }

    pub fn norm(&self) -> f64 {
        (self.x1 as f64).hypot(self.x2 as f64)
    }

    /// `x1 + x2`.
    pub fn l1(&self) -> u64 {
        self.x1 as u64 + self.x2 as u64
    }
}

impl Ord for LatticeDirection {
    fn cmp(&self, other: &Self) -> Ordering {
        // x2/x1 < y2/y1  <=>  x2*y1 < y2*x1 for non-negative entries
        let lhs = self.x2 as u64 * other.x1 as u64;
        let rhs = other.x2 as u64 * self.x1 as u64;
        lhs.cmp(&rhs)
    }
}

impl PartialOrd for LatticeDirection {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy)]
struct Vec2 {
    x1: u64,
    x2: u64,
}

impl Vec2 {
    fn add(self, o: Vec2) -> Vec2 {
        Vec2 { x1: self.x1 + o.x1, x2: self.x2 + o.x2 }
    }
    fn slope_le(self, t: f64) -> bool {
        t.is_infinite() || (self.x2 as f64) <= t * self.x1 as f64
    }
    fn slope_ge(self, t: f64) -> bool {
        self.x1 == 0 || (self.x2 as f64) >= t * self.x1 as f64
    }
}

/// In-order Stern–Brocot traversal: primitive directions with
/// `t_lo <= τ <= t_hi` and `x1 + x2 <= radius`, in strictly increasing slope.
#[derive(Debug, Clone)]
pub struct DirectionIter {
    t_lo: f64,
    t_hi: f64,
    radius: u64,
    stack: Vec<(Vec2, Vec2)>,
    descend: Option<(Vec2, Vec2)>,
    emit_horizontal: bool,
    emit_vertical: bool,
}

pub fn enumerate_directions(t_lo: f64, t_hi: f64, radius: f64) -> DirectionIter {
    let radius = if radius.is_finite() { radius.max(0.0).floor() as u64 } else { u64::MAX / 4 };
    let valid = t_lo >= 0.0 && t_lo <= t_hi && radius >= 1;
    DirectionIter {
        t_lo,
        t_hi,
        radius,
        stack: Vec::new(),
        descend: valid.then_some((Vec2 { x1: 1, x2: 0 }, Vec2 { x1: 0, x2: 1 })),
        emit_horizontal: valid && t_lo <= 0.0,
        emit_vertical: valid && t_hi.is_infinite(),
    }
}

impl DirectionIter {
    fn prune(&self, l: Vec2, r: Vec2) -> bool {
        let m = l.add(r);
        // descendants have larger coordinate sums and slopes strictly
        // between those of `l` and `r`
        let below = r.x1 != 0 && (r.x2 as f64) <= self.t_lo * r.x1 as f64;
        let above = self.t_hi.is_finite() && (l.x2 as f64) >= self.t_hi * l.x1 as f64;
        m.x1 + m.x2 > self.radius || below || above
    }
}

impl Iterator for DirectionIter {
    type Item = LatticeDirection;

    fn next(&mut self) -> Option<LatticeDirection> {
        if self.emit_horizontal {
            self.emit_horizontal = false;
            return Some(LatticeDirection::HORIZONTAL);
        }
        loop {
            while let Some((l, r)) = self.descend.take() {
                if self.prune(l, r) {
                    break;
                }
                self.stack.push((l, r));
                self.descend = Some((l, l.add(r)));
            }
            match self.stack.pop() {
                Some((l, r)) => {
                    let m = l.add(r);
                    self.descend = Some((m, r));
                    if m.slope_ge(self.t_lo) && m.slope_le(self.t_hi) {
                        return Some(LatticeDirection { x1: m.x1 as u32, x2: m.x2 as u32 });
                    }
                }
                None => {
                    if self.emit_vertical {
                        self.emit_vertical = false;
                        return Some(LatticeDirection::VERTICAL);
                    }
                    return None;
                }
            }
        }
    }
}

/// μ(1..=limit) from a linear sieve.
#[derive(Debug, Clone)]
pub struct MobiusTable {
    values: Vec<i8>,
}

impl MobiusTable {
    pub fn sieve(limit: usize) -> Result<Self> {
        Self::sieve_with_budget(limit, MOBIUS_BUDGET)
    }

    pub fn sieve_with_budget(limit: usize, budget: usize) -> Result<Self> {
        if limit > budget {
            return Err(Error::LimitTooLarge { limit, budget });
        }
        let limit = limit.max(1);
        let mut mu = vec![0i8; limit + 1];
        let mut composite = vec![false; limit + 1];
        let mut primes: Vec<usize> = Vec::new();
        mu[1] = 1;
        for i in 2..=limit {
            if !composite[i] {
                primes.push(i);
                mu[i] = -1;
            }
            for &p in &primes {
                let ip = i * p;
                if ip > limit {
                    break;
                }
                composite[ip] = true;
                if i % p == 0 {
                    mu[ip] = 0;
                    break;
                }
                mu[ip] = -mu[i];
            }
        }
        Ok(Self { values: mu })
    }

    pub fn limit(&self) -> usize {
        self.values.len() - 1
    }

    /// μ(m) for `1 <= m <= limit`.
    pub fn mu(&self, m: usize) -> i8 {
        assert!(m >= 1 && m <= self.limit(), "μ({m}) outside the table");
        self.values[m]
    }
}

/// `Σ_{x ∈ X, x1+x2 <= radius} f(h·x)` summed over primitive directions.
pub fn coprime_sum<F: Fn(f64, f64) -> f64>(f: F, h: f64, radius: f64) -> f64 {
    enumerate_directions(0.0, f64::INFINITY, radius)
        .map(|d| f(h * d.x1 as f64, h * d.x2 as f64))
        .collect::<CompensatedSum>()
        .value()
}

/// `Σ_{y ∈ Z+² \ 0, y1+y2 <= radius} f(h·y)` over the full quadrant.
pub fn full_lattice_sum<F: Fn(f64, f64) -> f64>(f: &F, h: f64, radius: u64) -> f64 {
    let mut acc = CompensatedSum::new();
    for s in 1..=radius {
        for y1 in 0..=s {
            acc.add(f(h * y1 as f64, h * (s - y1) as f64));
        }
    }
    acc.value()
}

/// The primitive-direction sum `F♯(h) = Σ_{x∈X} f(h x)` obtained by Möbius
/// inversion of full-lattice sums, `F♯(h) = Σ_m μ(m) F(h m)`, all truncated
/// at `x1 + x2 <= radius`. With a common truncation the identity is exact, so
/// this agrees with [`coprime_sum`] up to rounding.
///
/// `tail_bound` is the caller's bound on the magnitude of the omitted terms;
/// it is rejected when the first omitted shell alone already exceeds it.
pub fn mobius_inverted_sum<F: Fn(f64, f64) -> f64>(
    f: F,
    h: f64,
    radius: f64,
    tail_bound: f64,
    table: &MobiusTable,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::ParameterOutOfRange(format!("scale h must be positive, got {h}")));
    }
    let r = radius.max(0.0).floor() as u64;
    if r as usize > table.limit() {
        return Err(Error::ParameterOutOfRange(format!("Möbius table covers m <= {}, radius is {r}", table.limit())));
    }
    let shell: f64 = (0..=r + 1).map(|y1| f(h * y1 as f64, h * (r + 1 - y1) as f64).abs()).sum();
    if shell > tail_bound {
        return Err(Error::TailBoundViolated(format!(
            "first omitted shell x1+x2 = {} contributes {shell:e} > bound {tail_bound:e}",
            r + 1
        )));
    }
    let mut acc = CompensatedSum::new();
    for m in 1..=r {
        let mu = table.mu(m as usize);
        if mu == 0 {
            continue;
        }
        let inner = full_lattice_sum(&f, h * m as f64, r / m);
        acc.add(mu as f64 * inner);
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn brute(t_lo: f64, t_hi: f64, radius: u32) -> Vec<LatticeDirection> {
        let mut v: Vec<LatticeDirection> = (0..=radius)
            .flat_map(|x1| (0..=radius - x1).map(move |x2| (x1, x2)))
            .filter_map(|(a, b)| LatticeDirection::new(a, b))
            .filter(|d| d.tau() >= t_lo && d.tau() <= t_hi)
            .collect();
        v.sort();
        v
    }

    #[test]
    fn small_radius_examples() {
        let d: Vec<_> = enumerate_directions(0.0, f64::INFINITY, 2.0).map(|d| (d.x1, d.x2)).collect();
        assert_eq!(d, vec![(1, 0), (1, 1), (0, 1)]);
        let d: Vec<_> = enumerate_directions(0.0, f64::INFINITY, 3.0).map(|d| (d.x1, d.x2)).collect();
        assert_eq!(d, vec![(1, 0), (2, 1), (1, 1), (1, 2), (0, 1)]);
    }

    #[test]
    fn matches_brute_force_on_slope_windows() {
        for &(lo, hi) in &[(0.0, f64::INFINITY), (0.5, 2.0), (1.0, 1.0), (0.3, 0.31), (2.0, f64::INFINITY), (0.0, 0.0)]
        {
            for r in [1, 5, 17, 40] {
                let got: Vec<_> = enumerate_directions(lo, hi, r as f64).collect();
                assert_eq!(got, brute(lo, hi, r), "window [{lo}, {hi}] radius {r}");
            }
        }
        assert_eq!(enumerate_directions(2.0, 1.0, 10.0).count(), 0);
    }

    #[test]
    fn count_at_radius_1000() {
        // gcd-sieve oracle: pairs with x1+x2 = s are coprime iff gcd(x1, s) = 1,
        // so there are φ(s) of them for s >= 2, plus (1,0), (0,1) at s = 1
        let r = 1000u64;
        let oracle: u64 = 2 + (2..=r).map(|s| (1..s).filter(|&a| gcd(a, s) == 1).count() as u64).sum::<u64>();
        let n = enumerate_directions(0.0, f64::INFINITY, r as f64).count() as u64;
        assert_eq!(n, oracle);
        let asymptotic = 3.0 / std::f64::consts::PI.powi(2) * (r * r) as f64;
        assert!((n as f64 / asymptotic - 1.0).abs() < 0.02);
    }

    #[test]
    fn mobius_values() {
        let t = MobiusTable::sieve(100).unwrap();
        assert_eq!((t.mu(1), t.mu(2), t.mu(6), t.mu(12), t.mu(30), t.mu(49)), (1, -1, 1, 0, -1, 0));
        assert!(matches!(MobiusTable::sieve_with_budget(11, 10), Err(Error::LimitTooLarge { .. })));
    }

    #[test]
    fn divisor_sum_identity() {
        let t = MobiusTable::sieve(10_000).unwrap();
        for m in 1..=10_000usize {
            let s: i64 = (1..=m).filter(|d| m % d == 0).map(|d| t.mu(d) as i64).sum();
            assert_eq!(s, (m == 1) as i64, "m = {m}");
        }
    }

    #[test]
    fn squarefree_characterisation() {
        let t = MobiusTable::sieve(5000).unwrap();
        for m in 1..=5000usize {
            let square = (2..).take_while(|p| p * p <= m).any(|p| m % (p * p) == 0);
            assert_eq!(t.mu(m) == 0, square, "m = {m}");
        }
    }

    #[test]
    fn partition_into_multiples_of_primitive_directions() {
        let r = 200u32;
        let dirs: Vec<_> = enumerate_directions(0.0, f64::INFINITY, r as f64).collect();
        let mut seen = BTreeSet::new();
        for d in &dirs {
            for m in 1..=r {
                let (a, b) = (d.x1 * m, d.x2 * m);
                if a + b > r {
                    break;
                }
                assert!(seen.insert((a, b)), "({a},{b}) represented twice");
            }
        }
        let total = (1..=r).map(|s| s + 1).sum::<u32>() as usize;
        assert_eq!(seen.len(), total);
    }

    #[test]
    fn dual_evaluation_agrees() {
        let table = MobiusTable::sieve(2000).unwrap();
        let cases: Vec<(Box<dyn Fn(f64, f64) -> f64>, f64, f64)> = vec![
            (Box::new(|a: f64, b: f64| (-(a + b)).exp()), 1.0, 60.0),
            (Box::new(|a: f64, b: f64| a * (-(a + b)).exp()), 0.5, 120.0),
            (Box::new(|_: f64, _: f64| 0.0), 1.0, 10.0),
        ];
        for (f, h, r) in &cases {
            let direct = coprime_sum(f, *h, *r);
            let inverted = mobius_inverted_sum(f, *h, *r, 1e-12, &table).unwrap();
            let scale = direct.abs().max(1e-300);
            assert!((direct - inverted).abs() <= 1e-8 * scale, "{direct} vs {inverted}");
        }
        assert_eq!(mobius_inverted_sum(|_, _| 0.0, 1.0, 10.0, 0.0, &table).unwrap(), 0.0);
    }

    #[test]
    fn inconsistent_tail_bound_rejected() {
        let table = MobiusTable::sieve(100).unwrap();
        let r = mobius_inverted_sum(|a, b| (-(a + b) * 0.01).exp(), 1.0, 20.0, 1e-6, &table);
        assert!(matches!(r, Err(Error::TailBoundViolated(_))));
    }

    #[test]
    fn inverse_zeta_two() {
        let t = MobiusTable::sieve(1_000_000).unwrap();
        let s: CompensatedSum = (1..=1_000_000usize).map(|m| t.mu(m) as f64 / (m as f64 * m as f64)).collect();
        assert!((s.value() - 6.0 / std::f64::consts::PI.powi(2)).abs() < 1e-6);
    }
}
