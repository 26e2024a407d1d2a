use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::problem::{ConstraintFunction, LinearLosses, ProblemInstance, QuadraticConstraints, SimpleSet};
use crate::rng::{streams, Stream};

/// Default sub-intervals of `[0, 1]`, as fractions of `T`, on which the
/// drift component of the cost is drawn from `[−1, 0]`.
pub const DEFAULT_INTERVALS: [(f64, f64); 3] = [(0.0, 0.3), (0.4, 0.7), (0.8, 1.0)];

/// Regeneration cap for [`generate_instance`].
pub const MAX_GENERATION_ATTEMPTS: usize = 100;

/// Adversarial linear costs `c(t) = c¹(t) + c²(t) + c³(t)`:
///
/// - `c¹` uniform on `[−t^{1/10}, t^{1/10}]` per component,
/// - `c²` uniform on `[−1, 0]` when `t` lies in one of the intervals and on
///   `[0, 1]` otherwise,
/// - `c³ = (−1)^{μ(t)}` in every component for a random permutation `μ` of `1..=T`.
///
/// Draws are addressed by position, so `cost_at` is a pure function of
/// `(seed, t)`. Round 0 is drawn from a reserved stream with round 1's law.
#[derive(Debug, Clone, PartialEq)]
pub struct CostGenerator {
    seed: u64,
    horizon: usize,
    n: usize,
    mu: Vec<u32>,
    intervals: [(f64, f64); 3],
    /// Inclusive round ranges derived from `intervals`.
    ranges: [(usize, usize); 3],
}

impl CostGenerator {
    pub fn new(seed: u64, horizon: usize, n: usize) -> Result<Self> {
        Self::with_intervals(seed, horizon, n, DEFAULT_INTERVALS)
    }

    pub fn with_intervals(seed: u64, horizon: usize, n: usize, intervals: [(f64, f64); 3]) -> Result<Self> {
        if n == 0 {
            return Err(invalid("dimension must be positive"));
        }
        if u32::try_from(horizon).is_err() {
            return Err(invalid("horizon too large"));
        }
        for (lo, hi) in intervals {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
                return Err(invalid("interval fractions must satisfy 0 ≤ lo ≤ hi ≤ 1"));
            }
        }
        let t = horizon as f64;
        let ranges = intervals.map(|(lo, hi)| (((lo * t).round() as usize).max(1), (hi * t).round() as usize));
        Ok(Self {
            seed,
            horizon,
            n,
            mu: permutation(seed, horizon),
            intervals,
            ranges,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `μ(1), …, μ(T)`.
    pub fn permutation(&self) -> &[u32] {
        &self.mu
    }

    pub fn intervals(&self) -> [(f64, f64); 3] {
        self.intervals
    }

    /// Whether round `t` draws its drift component from `[−1, 0]`.
    pub fn in_negative_interval(&self, t: usize) -> bool {
        self.ranges.iter().any(|(lo, hi)| (*lo..=*hi).contains(&t))
    }

    /// `√n (T^{1/10} + 2)`, a bound on every `‖c(t)‖`.
    pub fn gradient_bound(&self) -> f64 {
        (self.n as f64).sqrt() * ((self.horizon.max(1) as f64).powf(0.1) + 2.0)
    }

    /// `c(t)` for `0 ≤ t ≤ T`.
    pub fn cost_at(&self, t: usize) -> Result<DVector<f64>> {
        if t > self.horizon {
            return Err(invalid(format!("round {t} is past the horizon {}", self.horizon)));
        }
        let n = self.n;
        if t == 0 {
            let mut s = Stream::new(self.seed, streams::BOOTSTRAP);
            let negative = self.in_negative_interval(1);
            let bounded: Vec<f64> = (0..n).map(|_| s.uniform_in(-1.0, 1.0)).collect();
            let drift: Vec<f64> = (0..n).map(|_| drift_draw(&mut s, negative)).collect();
            let sign = if s.next_u64() & 1 == 0 { 1.0 } else { -1.0 };
            return Ok(DVector::from_fn(n, |i, _| bounded[i] + drift[i] + sign));
        }
        let scale = (t as f64).powf(0.1);
        let base = ((t - 1) * n) as u64;
        let mut bounded = Stream::at(self.seed, streams::COST_BOUNDED, base);
        let mut drift = Stream::at(self.seed, streams::COST_DRIFT, base);
        let negative = self.in_negative_interval(t);
        let sign = if self.mu[t - 1].is_multiple_of(2) { 1.0 } else { -1.0 };
        Ok(DVector::from_fn(n, |_, _| {
            bounded.uniform_in(-scale, scale) + drift_draw(&mut drift, negative) + sign
        }))
    }

    /// `c(0), …, c(T)` as loss functions.
    pub fn losses(&self) -> Result<LinearLosses> {
        let costs = (0..=self.horizon).map(|t| self.cost_at(t)).collect::<Result<Vec<_>>>()?;
        LinearLosses::new(costs)
    }
}

fn drift_draw(s: &mut Stream, negative: bool) -> f64 {
    let u = s.uniform();
    if negative {
        -u
    } else {
        u
    }
}

/// Fisher–Yates shuffle of `1..=T` on the permutation stream.
fn permutation(seed: u64, horizon: usize) -> Vec<u32> {
    let mut mu: Vec<u32> = (1..=horizon as u32).collect();
    let mut s = Stream::new(seed, streams::COST_PERMUTATION);
    for i in (1..mu.len()).rev() {
        let j = s.below(i as u64 + 1) as usize;
        mu.swap(i, j);
    }
    mu
}

/// A random instance: `A` uniform on `[0,1]^{m×n}`, `b` uniform on
/// `[0,2]^m`, `X₀ = [−1,1]^n`, with constants derived.
#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub instance: ProblemInstance,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Draws needed before the Slater margin cleared its floor.
    pub attempts: usize,
}

/// Draws `A` and `b` from the instance stream, redrawing while the Slater
/// margin is below its floor.
pub fn generate_instance(seed: u64, n: usize, m: usize) -> Result<GeneratedInstance> {
    if n == 0 || m == 0 {
        return Err(invalid("n and m must be positive"));
    }
    let mut s = Stream::new(seed, streams::INSTANCE);
    let mut last_err = None;
    for attempt in 1..=MAX_GENERATION_ATTEMPTS {
        let a = DMatrix::from_fn(m, n, |_, _| s.uniform());
        let b = DVector::from_fn(m, |_, _| s.uniform_in(0.0, 2.0));
        let g = ConstraintFunction::linear(a.clone(), b.clone())?;
        let inst = ProblemInstance::new(SimpleSet::cube(n, -1.0, 1.0)?, g)?;
        match inst.prepared(None) {
            Ok(instance) => {
                return Ok(GeneratedInstance {
                    instance,
                    a,
                    b,
                    attempts: attempt,
                })
            }
            Err(e @ Error::SlaterViolation { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(Error::Generation(format!(
        "no instance with a usable Slater margin in {MAX_GENERATION_ATTEMPTS} draws ({})",
        last_err.map(|e| e.to_string()).unwrap_or_default()
    )))
}

/// A random instance with ball constraints `w_k‖x − c_k‖² − w_kρ_k² ≤ 0`
/// on `X₀ = [−1,1]^n`: `w_k ∈ [½, 2]`, `c_k ∈ [−0.2, 0.2]^n`, `ρ_k ∈ [0.6, 1.5]`.
/// The origin is always strictly feasible.
pub fn generate_quadratic_instance(seed: u64, n: usize, m: usize) -> Result<ProblemInstance> {
    if n == 0 || m == 0 {
        return Err(invalid("n and m must be positive"));
    }
    let mut s = Stream::new(seed, streams::INSTANCE);
    let mut weights = Vec::with_capacity(m);
    let mut centers = Vec::with_capacity(m);
    let mut offsets = Vec::with_capacity(m);
    for _ in 0..m {
        let w = s.uniform_in(0.5, 2.0);
        let c = DVector::from_fn(n, |_, _| s.uniform_in(-0.2, 0.2));
        let rho = s.uniform_in(0.6, 1.5);
        weights.push(w);
        centers.push(c);
        offsets.push(w * rho * rho);
    }
    let q = QuadraticConstraints::new(weights, centers, offsets)?;
    let g = ConstraintFunction::generic(Arc::new(q))?;
    ProblemInstance::new(SimpleSet::cube(n, -1.0, 1.0)?, g)?.prepared(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_is_valid() {
        for t in [0usize, 1, 2, 17, 5000] {
            let g = CostGenerator::new(3, t, 2).unwrap();
            let mut mu = g.permutation().to_vec();
            mu.sort_unstable();
            assert_eq!(mu, (1..=t as u32).collect::<Vec<_>>());
        }
    }

    #[test]
    fn interval_breakpoints_at_5000() {
        let g = CostGenerator::new(1, 5000, 2).unwrap();
        for (t, neg) in [(1, true), (100, true), (1500, true), (1501, false), (1999, false), (2000, true), (3500, true), (3501, false), (4000, true), (5000, true)] {
            assert_eq!(g.in_negative_interval(t), neg, "t={t}");
        }
    }

    #[test]
    fn components_respect_their_ranges() {
        let g = CostGenerator::new(9, 5000, 3).unwrap();
        for t in [1usize, 2, 100, 1700, 2500, 4999, 5000] {
            let c = g.cost_at(t).unwrap();
            let sign = if g.permutation()[t - 1].is_multiple_of(2) { 1.0 } else { -1.0 };
            let scale = (t as f64).powf(0.1);
            for v in c.iter() {
                let rest = v - sign;
                if g.in_negative_interval(t) {
                    assert!(rest >= -scale - 1.0 && rest <= scale);
                } else {
                    assert!(rest >= -scale && rest <= scale + 1.0);
                }
            }
        }
        // t = 1: c¹ ∈ [−1, 1] and c² ∈ [−1, 0]
        let c = g.cost_at(1).unwrap();
        let sign = if g.permutation()[0].is_multiple_of(2) { 1.0 } else { -1.0 };
        assert!(c.iter().all(|v| (v - sign) >= -2.0 && (v - sign) <= 1.0));
    }

    #[test]
    fn costs_are_deterministic_and_bounded() {
        let g = CostGenerator::new(42, 300, 2).unwrap();
        let h = CostGenerator::new(42, 300, 2).unwrap();
        let d = g.gradient_bound();
        for t in 0..=300 {
            let c = g.cost_at(t).unwrap();
            assert_eq!(c, g.cost_at(t).unwrap());
            assert_eq!(c, h.cost_at(t).unwrap());
            assert!(c.norm() <= d);
        }
        assert!(g.cost_at(301).is_err());
        assert_ne!(g.cost_at(5).unwrap(), CostGenerator::new(43, 300, 2).unwrap().cost_at(5).unwrap());
    }

    #[test]
    fn generated_instances_follow_the_recipe() {
        for seed in 0..20 {
            let gi = generate_instance(seed, 2, 3).unwrap();
            assert!(gi.a.iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(gi.b.iter().all(|v| (0.0..=2.0).contains(v)));
            let corner = gi.instance.constraint_values(&DVector::from_element(2, -1.0));
            assert!(corner.iter().all(|v| *v <= 0.0));
            let x_hat = gi.instance.slater_point().unwrap();
            let eps = gi.instance.constants().epsilon.unwrap();
            assert!(gi.instance.constraint_values(x_hat).iter().all(|v| *v <= -eps));
        }
        let a = generate_instance(42, 2, 3).unwrap();
        let b = generate_instance(42, 2, 3).unwrap();
        assert_eq!((a.a, a.b), (b.a, b.b));
    }
}
