//! Problem instances: the simple set X₀, the long-term constraint function
//! g, and the constants (D, β, G, R, ε, x̂) the guarantees are stated in.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{all_finite, max_entry, spectral_norm};
use crate::rng::{streams, Stream};

/// Slater margins at or below this are refused.
pub const SLATER_FLOOR: f64 = 1e-6;

/// Largest dimension for which box vertices are enumerated.
pub const MAX_VERTEX_DIM: usize = 20;

/// A convex set with a closed-form Euclidean projection.
#[derive(Debug, Clone, PartialEq)]
pub enum SimpleSet {
    Box {
        lower: DVector<f64>,
        upper: DVector<f64>,
    },
    Ball {
        center: DVector<f64>,
        radius: f64,
    },
}

impl SimpleSet {
    pub fn new_box(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(invalid("box bounds must be nonempty and of equal length"));
        }
        if !all_finite(&lower) || !all_finite(&upper) {
            return Err(invalid("box bounds must be finite"));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| l >= u) {
            return Err(invalid("box requires lower < upper in every coordinate"));
        }
        Ok(SimpleSet::Box { lower, upper })
    }

    /// The cube `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new_box(DVector::from_element(n, lo), DVector::from_element(n, hi))
    }

    pub fn new_ball(center: DVector<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || !all_finite(&center) {
            return Err(invalid("ball center must be nonempty and finite"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("ball radius must be positive"));
        }
        Ok(SimpleSet::Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            SimpleSet::Box { lower, .. } => lower.len(),
            SimpleSet::Ball { center, .. } => center.len(),
        }
    }

    pub fn center(&self) -> DVector<f64> {
        match self {
            SimpleSet::Box { lower, upper } => (lower + upper) * 0.5,
            SimpleSet::Ball { center, .. } => center.clone(),
        }
    }

    /// Euclidean diameter.
    pub fn diameter(&self) -> f64 {
        match self {
            SimpleSet::Box { lower, upper } => (upper - lower).norm(),
            SimpleSet::Ball { radius, .. } => 2.0 * radius,
        }
    }

    /// Exact projection; the caller guarantees a finite point of matching dimension.
    pub(crate) fn project_unchecked(&self, p: &DVector<f64>) -> DVector<f64> {
        match self {
            SimpleSet::Box { lower, upper } => {
                DVector::from_fn(p.len(), |i, _| p[i].clamp(lower[i], upper[i]))
            }
            SimpleSet::Ball { center, radius } => {
                let offset = p - center;
                let dist = offset.norm();
                if dist <= *radius {
                    p.clone()
                } else {
                    // shrink past rounding so the result projects to itself
                    let mut scale = *radius / dist;
                    loop {
                        let y = center + &offset * scale;
                        if (&y - center).norm() <= *radius {
                            break y;
                        }
                        scale *= 1.0 - f64::EPSILON;
                    }
                }
            }
        }
    }

    /// `min_{x in the set} cᵀx`.
    pub fn min_linear(&self, c: &DVector<f64>) -> f64 {
        match self {
            SimpleSet::Box { lower, upper } => (0..c.len())
                .map(|i| if c[i] >= 0.0 { c[i] * lower[i] } else { c[i] * upper[i] })
                .sum(),
            SimpleSet::Ball { center, radius } => c.dot(center) - radius * c.norm(),
        }
    }

    /// Distance from `p` to the set.
    pub fn distance(&self, p: &DVector<f64>) -> f64 {
        (p - self.project_unchecked(p)).norm()
    }

    pub fn contains(&self, p: &DVector<f64>, tol: f64) -> bool {
        p.len() == self.dim() && self.distance(p) <= tol
    }

    /// Box corners, for boxes of dimension at most [`MAX_VERTEX_DIM`].
    pub fn vertices(&self) -> Option<Vec<DVector<f64>>> {
        match self {
            SimpleSet::Box { lower, upper } if lower.len() <= MAX_VERTEX_DIM => {
                let n = lower.len();
                Some(
                    (0u32..(1u32 << n))
                        .map(|mask| {
                            DVector::from_fn(n, |i, _| {
                                if mask >> i & 1 == 1 {
                                    upper[i]
                                } else {
                                    lower[i]
                                }
                            })
                        })
                        .collect(),
                )
            }
            _ => None,
        }
    }

    /// A point of the set drawn from `stream`. Uniform for boxes; for balls
    /// the radius is uniform-in-volume and the direction is a normalized
    /// cube sample.
    pub fn sample(&self, stream: &mut Stream) -> DVector<f64> {
        match self {
            SimpleSet::Box { lower, upper } => {
                DVector::from_fn(lower.len(), |i, _| stream.uniform_in(lower[i], upper[i]))
            }
            SimpleSet::Ball { center, radius } => {
                let n = center.len();
                let dir = loop {
                    let d = DVector::from_fn(n, |_, _| stream.uniform_in(-1.0, 1.0));
                    let norm = d.norm();
                    if norm > 1e-12 {
                        break d / norm;
                    }
                };
                let r = radius * stream.uniform().powf(1.0 / n as f64);
                center + dir * r
            }
        }
    }

    /// Distance from `c` to the farthest point of the set.
    pub(crate) fn farthest_distance(&self, c: &DVector<f64>) -> f64 {
        match self {
            SimpleSet::Box { lower, upper } => (0..c.len())
                .map(|i| {
                    let d = (lower[i] - c[i]).abs().max((upper[i] - c[i]).abs());
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
            SimpleSet::Ball { center, radius } => (c - center).norm() + radius,
        }
    }
}

/// Projects `point` onto `set`.
pub fn project_simple(set: &SimpleSet, point: &DVector<f64>) -> Result<DVector<f64>> {
    if point.len() != set.dim() {
        return Err(invalid(format!(
            "point has dimension {}, set has {}",
            point.len(),
            set.dim()
        )));
    }
    if !all_finite(point) {
        return Err(invalid("point must be finite"));
    }
    Ok(set.project_unchecked(point))
}

/// Analytic Lipschitz modulus and magnitude bound of a constraint map over a set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintBounds {
    pub lipschitz: f64,
    pub magnitude: f64,
}

/// A black-box convex constraint map `g: ℝⁿ → ℝᵐ`.
///
/// Implementations must be convex in each component on the simple set and
/// deterministic.
pub trait ConstraintOracle: Send + Sync + fmt::Debug {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn eval(&self, x: &DVector<f64>) -> DVector<f64>;
    /// `m × n` matrix whose k-th row is a subgradient of `g_k` at `x`.
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;
    /// Certified β and G over `set`, when the oracle can provide them.
    fn bounds_on(&self, _set: &SimpleSet) -> Option<ConstraintBounds> {
        None
    }
}

/// `g_k(x) = w_k ‖x − c_k‖² − r_k` with `w_k > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticConstraints {
    weights: Vec<f64>,
    centers: Vec<DVector<f64>>,
    offsets: Vec<f64>,
}

impl QuadraticConstraints {
    pub fn new(weights: Vec<f64>, centers: Vec<DVector<f64>>, offsets: Vec<f64>) -> Result<Self> {
        let m = weights.len();
        if m == 0 || centers.len() != m || offsets.len() != m {
            return Err(invalid("quadratic constraints need matching nonempty weights, centers, offsets"));
        }
        let n = centers[0].len();
        if n == 0 || centers.iter().any(|c| c.len() != n) {
            return Err(invalid("quadratic constraint centers must share a nonzero dimension"));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(invalid("quadratic constraint weights must be positive"));
        }
        Ok(Self {
            weights,
            centers,
            offsets,
        })
    }
}

impl ConstraintOracle for QuadraticConstraints {
    fn input_dim(&self) -> usize {
        self.centers[0].len()
    }

    fn output_dim(&self) -> usize {
        self.weights.len()
    }

    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.weights.len(), |k, _| {
            self.weights[k] * (x - &self.centers[k]).norm_squared() - self.offsets[k]
        })
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = x.len();
        DMatrix::from_fn(self.weights.len(), n, |k, i| {
            2.0 * self.weights[k] * (x[i] - self.centers[k][i])
        })
    }

    fn bounds_on(&self, set: &SimpleSet) -> Option<ConstraintBounds> {
        // ‖J(x)‖₂ ≤ ‖J(x)‖_F ≤ sqrt(Σ (2 w_k far_k)²) bounds the Lipschitz modulus.
        let mut lip2 = 0.0;
        let mut mag2 = 0.0;
        for k in 0..self.weights.len() {
            let c = &self.centers[k];
            let far = set.farthest_distance(c);
            let near = set.distance(c);
            let w = self.weights[k];
            lip2 += (2.0 * w * far).powi(2);
            let hi = (w * far * far - self.offsets[k]).abs();
            let lo = (w * near * near - self.offsets[k]).abs();
            mag2 += hi.max(lo).powi(2);
        }
        Some(ConstraintBounds {
            lipschitz: lip2.sqrt(),
            magnitude: mag2.sqrt(),
        })
    }
}

/// The constraint map g of the long-term constraints `g(x) ≤ 0`.
#[derive(Debug, Clone)]
pub enum ConstraintFunction {
    /// `g(x) = A x − b`.
    Linear { a: DMatrix<f64>, b: DVector<f64> },
    Generic(Arc<dyn ConstraintOracle>),
}

impl ConstraintFunction {
    pub fn linear(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(invalid("constraint matrix must be nonempty"));
        }
        if a.nrows() != b.len() {
            return Err(invalid("constraint offset length must equal the number of rows"));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("constraint data must be finite"));
        }
        Ok(ConstraintFunction::Linear { a, b })
    }

    pub fn generic(oracle: Arc<dyn ConstraintOracle>) -> Result<Self> {
        if oracle.input_dim() == 0 || oracle.output_dim() == 0 {
            return Err(invalid("constraint oracle must have n ≥ 1 and m ≥ 1"));
        }
        Ok(ConstraintFunction::Generic(oracle))
    }

    pub fn input_dim(&self) -> usize {
        match self {
            ConstraintFunction::Linear { a, .. } => a.ncols(),
            ConstraintFunction::Generic(o) => o.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            ConstraintFunction::Linear { a, .. } => a.nrows(),
            ConstraintFunction::Generic(o) => o.output_dim(),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, ConstraintFunction::Linear { .. })
    }

    pub fn as_linear(&self) -> Option<(&DMatrix<f64>, &DVector<f64>)> {
        match self {
            ConstraintFunction::Linear { a, b } => Some((a, b)),
            ConstraintFunction::Generic(_) => None,
        }
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            ConstraintFunction::Linear { a, b } => a * x - b,
            ConstraintFunction::Generic(o) => o.eval(x),
        }
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match self {
            ConstraintFunction::Linear { a, .. } => a.clone(),
            ConstraintFunction::Generic(o) => o.jacobian(x),
        }
    }
}

/// The constants of the standing assumptions. `None` means not yet known.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    /// Bound on loss gradients over X₀.
    pub d: Option<f64>,
    /// Lipschitz modulus of g.
    pub beta: Option<f64>,
    /// Bound on ‖g(x)‖ over X₀.
    pub g: Option<f64>,
    /// Diameter of X₀.
    pub r: Option<f64>,
    /// Slater margin.
    pub epsilon: Option<f64>,
}

/// Fully resolved constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnownConstants {
    pub d: f64,
    pub beta: f64,
    pub g: f64,
    pub r: f64,
    pub epsilon: f64,
}

impl Constants {
    pub fn resolve(&self) -> Result<KnownConstants> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::MissingConstants(format!("{name} is not set")))
        };
        let epsilon = self.epsilon.ok_or(Error::SlaterViolation {
            epsilon: 0.0,
            floor: SLATER_FLOOR,
        })?;
        if epsilon <= SLATER_FLOOR {
            return Err(Error::SlaterViolation {
                epsilon,
                floor: SLATER_FLOOR,
            });
        }
        Ok(KnownConstants {
            d: need(self.d, "D")?,
            beta: need(self.beta, "beta")?,
            g: need(self.g, "G")?,
            r: need(self.r, "R")?,
            epsilon,
        })
    }
}

/// X₀, g, and the constants. Immutable once built; the `with_*` methods
/// return modified copies.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    set: SimpleSet,
    constraints: ConstraintFunction,
    constants: Constants,
    slater_point: Option<DVector<f64>>,
}

impl ProblemInstance {
    pub fn new(set: SimpleSet, constraints: ConstraintFunction) -> Result<Self> {
        if set.dim() != constraints.input_dim() {
            return Err(invalid(format!(
                "set dimension {} does not match constraint input dimension {}",
                set.dim(),
                constraints.input_dim()
            )));
        }
        Ok(Self {
            set,
            constraints,
            constants: Constants::default(),
            slater_point: None,
        })
    }

    pub fn set(&self) -> &SimpleSet {
        &self.set
    }

    pub fn constraints(&self) -> &ConstraintFunction {
        &self.constraints
    }

    pub fn constants(&self) -> &Constants {
        &self.constants
    }

    pub fn slater_point(&self) -> Option<&DVector<f64>> {
        self.slater_point.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.output_dim()
    }

    /// Replaces every constant that is `Some` in `overrides`.
    pub fn with_constants(mut self, overrides: Constants) -> Self {
        let c = &mut self.constants;
        c.d = overrides.d.or(c.d);
        c.beta = overrides.beta.or(c.beta);
        c.g = overrides.g.or(c.g);
        c.r = overrides.r.or(c.r);
        c.epsilon = overrides.epsilon.or(c.epsilon);
        self
    }

    pub fn with_gradient_bound(mut self, d: f64) -> Self {
        self.constants.d = Some(d);
        self
    }

    /// Records a Slater point after checking it lies in X₀ and certifies `epsilon`.
    pub fn with_slater(mut self, point: DVector<f64>, epsilon: f64) -> Result<Self> {
        if !self.set.contains(&point, 1e-9) {
            return Err(invalid("slater point must lie in the simple set"));
        }
        let worst = max_entry(&self.constraints.eval(&point));
        if worst > -epsilon + 1e-12 {
            return Err(invalid(format!(
                "slater point has max constraint {worst}, not ≤ −{epsilon}"
            )));
        }
        if epsilon <= SLATER_FLOOR {
            return Err(Error::SlaterViolation {
                epsilon,
                floor: SLATER_FLOOR,
            });
        }
        self.constants.epsilon = Some(epsilon);
        self.slater_point = Some(point);
        Ok(self)
    }

    /// g(x).
    pub fn constraint_values(&self, x: &DVector<f64>) -> DVector<f64> {
        self.constraints.eval(x)
    }

    pub fn beta(&self) -> Result<f64> {
        self.constants
            .beta
            .ok_or_else(|| Error::MissingConstants("beta is not set".into()))
    }

    /// Fills β, G and R (see [`derive_constants`]) and then x̂, ε (see
    /// [`estimate_slater`]) where they are not already set.
    pub fn prepared(self, sampling_budget: Option<usize>) -> Result<Self> {
        let inst = derive_constants(&self, sampling_budget)?;
        if inst.slater_point.is_some() {
            return Ok(inst);
        }
        let (x, eps) = estimate_slater(&inst)?;
        inst.with_slater(x, eps)
    }
}

/// Per-round losses `f^t`, revealed to an algorithm only after its round-`t`
/// decision is committed.
pub trait LossOracle: Sync {
    fn value(&self, t: usize, x: &DVector<f64>) -> f64;
    /// A (sub)gradient of `f^t` at `x`.
    fn gradient(&self, t: usize, x: &DVector<f64>) -> DVector<f64>;
    /// Last round index the oracle can serve.
    fn last_round(&self) -> usize;
}

/// Linear losses `f^t(x) = c(t)ᵀx` for rounds `0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLosses {
    costs: Vec<DVector<f64>>,
}

impl LinearLosses {
    /// `costs[t]` is `c(t)`; index 0 is the bootstrap round.
    pub fn new(costs: Vec<DVector<f64>>) -> Result<Self> {
        if costs.is_empty() {
            return Err(invalid("at least the bootstrap cost is required"));
        }
        let n = costs[0].len();
        if costs.iter().any(|c| c.len() != n || !all_finite(c)) {
            return Err(invalid("costs must be finite and share one dimension"));
        }
        Ok(Self { costs })
    }

    pub fn cost(&self, t: usize) -> &DVector<f64> {
        &self.costs[t]
    }

    pub fn costs(&self) -> &[DVector<f64>] {
        &self.costs
    }

    /// `Σ_{t=1}^{T} c(t)`.
    pub fn cost_sum(&self, horizon: usize) -> DVector<f64> {
        let mut sum = DVector::zeros(self.costs[0].len());
        for c in &self.costs[1..=horizon] {
            sum += c;
        }
        sum
    }

    /// `max_t ‖c(t)‖` over rounds `0..=T`.
    pub fn max_gradient_norm(&self) -> f64 {
        self.costs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

impl LossOracle for LinearLosses {
    fn value(&self, t: usize, x: &DVector<f64>) -> f64 {
        self.costs[t].dot(x)
    }

    fn gradient(&self, t: usize, _x: &DVector<f64>) -> DVector<f64> {
        self.costs[t].clone()
    }

    fn last_round(&self) -> usize {
        self.costs.len() - 1
    }
}

/// `γ g(x)`.
pub fn scaled_constraints(
    instance: &ProblemInstance,
    gamma: f64,
    point: &DVector<f64>,
) -> Result<DVector<f64>> {
    if !(gamma > 0.0) {
        return Err(invalid("gamma must be positive"));
    }
    if point.len() != instance.dim() {
        return Err(invalid("point dimension mismatch"));
    }
    Ok(instance.constraint_values(point) * gamma)
}

const SLATER_SUBGRADIENT_ITERS: usize = 5000;

/// Approximates `x̂ = argmin_{x ∈ X₀} max_k g_k(x)` and returns `(x̂, ε)` with
/// `ε = −max_k g_k(x̂)`.
///
/// Runs projected subgradient descent with step `R/(‖s‖√j)` and iterate
/// averaging, then polishes with a smoothed (log-sum-exp) projected gradient
/// continuation. The better point by direct evaluation is returned, so the
/// reported ε is always certified by evaluation.
pub fn estimate_slater(instance: &ProblemInstance) -> Result<(DVector<f64>, f64)> {
    let set = instance.set();
    let g = instance.constraints();
    let worst = |x: &DVector<f64>| max_entry(&g.eval(x));
    let radius = set.diameter();

    let mut x = set.center();
    let mut best = x.clone();
    let mut best_val = worst(&x);
    let mut avg = DVector::zeros(x.len());
    let mut count = 0usize;
    for j in 1..=SLATER_SUBGRADIENT_ITERS {
        let vals = g.eval(&x);
        let k = argmax(&vals);
        let sub = g.jacobian(&x).row(k).transpose();
        let norm = sub.norm();
        if norm == 0.0 {
            break;
        }
        x = set.project_unchecked(&(&x - sub * (radius / (norm * (j as f64).sqrt()))));
        avg += &x;
        count += 1;
        let v = worst(&x);
        if v < best_val {
            best_val = v;
            best = x.clone();
        }
    }
    if count > 0 {
        let averaged = avg / count as f64;
        let v = worst(&averaged);
        if v < best_val {
            best_val = v;
            best = averaged;
        }
    }

    let polished = smoothed_minimax(set, g, &best);
    let v = worst(&polished);
    if v < best_val {
        best_val = v;
        best = polished;
    }

    let epsilon = -best_val;
    if epsilon <= SLATER_FLOOR {
        return Err(Error::SlaterViolation {
            epsilon,
            floor: SLATER_FLOOR,
        });
    }
    Ok((best, epsilon))
}

fn argmax(v: &DVector<f64>) -> usize {
    let mut k = 0;
    for i in 1..v.len() {
        if v[i] > v[k] {
            k = i;
        }
    }
    k
}

/// Log-sum-exp smoothing of `max_k g_k` with decreasing temperature.
fn smoothed_minimax(set: &SimpleSet, g: &ConstraintFunction, start: &DVector<f64>) -> DVector<f64> {
    let lse = |x: &DVector<f64>, mu: f64| -> (f64, DVector<f64>) {
        let vals = g.eval(x);
        let top = max_entry(&vals);
        let weights = vals.map(|v| ((v - top) / mu).exp());
        let total: f64 = weights.sum();
        let value = top + mu * total.ln();
        let grad = g.jacobian(x).transpose() * (weights / total);
        (value, grad)
    };
    let scale = max_entry(&g.eval(start).abs()).max(1e-3);
    let mut x = start.clone();
    let mut mu = 0.1 * scale;
    while mu >= 1e-9 * scale {
        let mut lip = 1.0;
        for _ in 0..500 {
            let (fx, grad) = lse(&x, mu);
            let mut next;
            loop {
                next = set.project_unchecked(&(&x - &grad * (1.0 / lip)));
                let step = &next - &x;
                let (fn_, _) = lse(&next, mu);
                if fn_ <= fx + grad.dot(&step) + 0.5 * lip * step.norm_squared() + 1e-15 * fx.abs()
                    || lip > 1e18
                {
                    break;
                }
                lip *= 2.0;
            }
            let moved = (&next - &x).norm();
            x = next;
            if moved <= 1e-13 * (1.0 + x.norm()) {
                break;
            }
        }
        mu *= 0.1;
    }
    x
}

/// Fills β, G and R where they are unset.
///
/// Linear g: β is the spectral norm of A; G is the largest ‖Ax − b‖ over the
/// box vertices (n ≤ 20), an interval bound for larger boxes, and
/// `‖Ac − b‖ + βr` on a ball. Generic g: the oracle's analytic bounds, or a
/// sampling estimate when `sampling_budget` is given.
pub fn derive_constants(
    instance: &ProblemInstance,
    sampling_budget: Option<usize>,
) -> Result<ProblemInstance> {
    let set = instance.set();
    let mut c = instance.constants;
    if c.r.is_none() {
        c.r = Some(set.diameter());
    }
    if c.beta.is_none() || c.g.is_none() {
        let (beta, g) = match instance.constraints() {
            ConstraintFunction::Linear { a, b } => {
                let beta = spectral_norm(a);
                (beta, linear_magnitude(set, a, b, beta))
            }
            ConstraintFunction::Generic(oracle) => match oracle.bounds_on(set) {
                Some(bounds) => (bounds.lipschitz, bounds.magnitude),
                None => match sampling_budget {
                    Some(budget) if budget > 0 => sampled_bounds(set, instance.constraints(), budget),
                    _ => {
                        return Err(Error::MissingConstants(
                            "generic constraints need user-supplied beta and G or a sampling budget".into(),
                        ))
                    }
                },
            },
        };
        c.beta = c.beta.or(Some(beta));
        c.g = c.g.or(Some(g));
    }
    Ok(ProblemInstance {
        constants: c,
        ..instance.clone()
    })
}

fn linear_magnitude(set: &SimpleSet, a: &DMatrix<f64>, b: &DVector<f64>, beta: f64) -> f64 {
    match set {
        SimpleSet::Box { lower, upper } => match set.vertices() {
            Some(vertices) => vertices
                .iter()
                .map(|v| (a * v - b).norm())
                .fold(0.0, f64::max),
            None => {
                // Per-row interval bound on |a_k·x − b_k|.
                let mut total = 0.0;
                for k in 0..a.nrows() {
                    let (mut lo, mut hi) = (-b[k], -b[k]);
                    for i in 0..a.ncols() {
                        let (p, q) = (a[(k, i)] * lower[i], a[(k, i)] * upper[i]);
                        lo += p.min(q);
                        hi += p.max(q);
                    }
                    total += lo.abs().max(hi.abs()).powi(2);
                }
                total.sqrt()
            }
        },
        SimpleSet::Ball { center, radius } => (a * center - b).norm() + beta * radius,
    }
}

fn sampled_bounds(set: &SimpleSet, g: &ConstraintFunction, budget: usize) -> (f64, f64) {
    let mut stream = Stream::new(0, streams::SAMPLING);
    let mut points: Vec<DVector<f64>> = set.vertices().filter(|v| v.len() <= 1024).unwrap_or_default();
    points.push(set.center());
    points.extend((0..budget).map(|_| set.sample(&mut stream)));
    let mut beta = 0.0_f64;
    let mut mag = 0.0_f64;
    for p in &points {
        beta = beta.max(spectral_norm(&g.jacobian(p)));
        mag = mag.max(g.eval(p).norm());
    }
    (beta, mag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn box_projection_examples() {
        let set = SimpleSet::cube(2, -1.0, 1.0).unwrap();
        assert_eq!(project_simple(&set, &v(&[0.3, -0.2])).unwrap(), v(&[0.3, -0.2]));
        assert_eq!(project_simple(&set, &v(&[2.0, -5.0])).unwrap(), v(&[1.0, -1.0]));
    }

    #[test]
    fn ball_projection_scales_radially() {
        let set = SimpleSet::new_ball(v(&[0.0, 0.0]), 1.0).unwrap();
        let p = project_simple(&set, &v(&[3.0, 4.0])).unwrap();
        assert_relative_eq!(p, v(&[0.6, 0.8]), epsilon = 1e-15);
    }

    #[test]
    fn projection_rejects_non_finite() {
        let set = SimpleSet::cube(2, -1.0, 1.0).unwrap();
        assert!(matches!(
            project_simple(&set, &v(&[f64::NAN, 0.0])),
            Err(Error::InvalidArgument(_))
        ));
        assert!(project_simple(&set, &v(&[0.0])).is_err());
    }

    #[test]
    fn degenerate_sets_rejected() {
        assert!(SimpleSet::new_box(v(&[0.0, 1.0]), v(&[1.0, 1.0])).is_err());
        assert!(SimpleSet::new_ball(v(&[0.0]), 0.0).is_err());
    }

    #[test]
    fn scaled_constraint_examples() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let g = ConstraintFunction::linear(a, v(&[-0.3, 0.1])).unwrap();
        let inst = ProblemInstance::new(SimpleSet::cube(1, -1.0, 1.0).unwrap(), g).unwrap();
        let x = v(&[0.0]);
        // g(0) = (0.3, -0.1)
        assert_relative_eq!(scaled_constraints(&inst, 2.0, &x).unwrap(), v(&[0.6, -0.2]), epsilon = 1e-15);
        assert_eq!(scaled_constraints(&inst, 1.0, &x).unwrap(), inst.constraint_values(&x));
        assert!(scaled_constraints(&inst, 0.0, &x).is_err());
        assert!(scaled_constraints(&inst, -1.0, &x).is_err());

        let one = ConstraintFunction::linear(DMatrix::zeros(1, 1), v(&[-1.0])).unwrap();
        let inst = ProblemInstance::new(SimpleSet::cube(1, -1.0, 1.0).unwrap(), one).unwrap();
        let gamma = 16f64.powf(0.25);
        assert_eq!(scaled_constraints(&inst, gamma, &x).unwrap(), v(&[2.0]));
    }

    #[test]
    fn slater_for_monotone_linear_constraint() {
        let g = ConstraintFunction::linear(DMatrix::from_element(1, 1, 1.0), v(&[0.5])).unwrap();
        let inst = ProblemInstance::new(SimpleSet::cube(1, -1.0, 1.0).unwrap(), g).unwrap();
        let (x, eps) = estimate_slater(&inst).unwrap();
        assert_relative_eq!(x[0], -1.0, epsilon = 1e-9);
        assert_relative_eq!(eps, 1.5, epsilon = 1e-9);
    }

    #[test]
    fn slater_for_symmetric_quadratic() {
        let q = QuadraticConstraints::new(vec![1.0], vec![v(&[0.0])], vec![1.0]).unwrap();
        let g = ConstraintFunction::generic(Arc::new(q)).unwrap();
        let inst = ProblemInstance::new(SimpleSet::cube(1, -1.0, 1.0).unwrap(), g).unwrap();
        let (x, eps) = estimate_slater(&inst).unwrap();
        assert!(x[0].abs() < 1e-6);
        assert_relative_eq!(eps, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn slater_refused_without_interior() {
        // x ≤ -1 on [-1, 1]: margin is zero
        let g = ConstraintFunction::linear(DMatrix::from_element(1, 1, 1.0), v(&[-1.0])).unwrap();
        let inst = ProblemInstance::new(SimpleSet::cube(1, -1.0, 1.0).unwrap(), g).unwrap();
        assert!(matches!(estimate_slater(&inst), Err(Error::SlaterViolation { .. })));
    }

    #[test]
    fn with_slater_checks_certificate() {
        let g = ConstraintFunction::linear(DMatrix::from_element(1, 1, 1.0), v(&[0.5])).unwrap();
        let inst = ProblemInstance::new(SimpleSet::cube(1, -1.0, 1.0).unwrap(), g).unwrap();
        assert!(inst.clone().with_slater(v(&[0.0]), 1.0).is_err());
        assert!(inst.clone().with_slater(v(&[2.0]), 0.1).is_err());
        assert!(inst.with_slater(v(&[-1.0]), 1.5).is_ok());
    }

    #[test]
    fn linear_constants_closed_form() {
        let g = ConstraintFunction::linear(DMatrix::identity(2, 2), v(&[0.0, 0.0])).unwrap();
        let inst = ProblemInstance::new(SimpleSet::cube(2, -1.0, 1.0).unwrap(), g).unwrap();
        let c = *derive_constants(&inst, None).unwrap().constants();
        assert_relative_eq!(c.beta.unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(c.g.unwrap(), 2f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(c.r.unwrap(), 2.0 * 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn ball_diameter() {
        let g = ConstraintFunction::linear(DMatrix::identity(2, 2), v(&[0.0, 0.0])).unwrap();
        let inst = ProblemInstance::new(SimpleSet::new_ball(v(&[1.0, 1.0]), 3.0).unwrap(), g).unwrap();
        assert_eq!(derive_constants(&inst, None).unwrap().constants().r, Some(6.0));
    }

    #[test]
    fn user_constants_are_kept() {
        let g = ConstraintFunction::linear(DMatrix::identity(2, 2), v(&[0.0, 0.0])).unwrap();
        let inst = ProblemInstance::new(SimpleSet::cube(2, -1.0, 1.0).unwrap(), g)
            .unwrap()
            .with_constants(Constants {
                beta: Some(5.0),
                g: Some(7.0),
                ..Default::default()
            });
        let c = *derive_constants(&inst, None).unwrap().constants();
        assert_eq!((c.beta, c.g), (Some(5.0), Some(7.0)));
    }

    #[derive(Debug)]
    struct Opaque;
    impl ConstraintOracle for Opaque {
        fn input_dim(&self) -> usize {
            1
        }
        fn output_dim(&self) -> usize {
            1
        }
        fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
            v(&[x[0] * x[0] - 0.5])
        }
        fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_element(1, 1, 2.0 * x[0])
        }
    }

    #[test]
    fn generic_without_bounds_needs_budget() {
        let g = ConstraintFunction::generic(Arc::new(Opaque)).unwrap();
        let inst = ProblemInstance::new(SimpleSet::cube(1, -1.0, 1.0).unwrap(), g).unwrap();
        assert!(matches!(derive_constants(&inst, None), Err(Error::MissingConstants(_))));
        let c = *derive_constants(&inst, Some(100)).unwrap().constants();
        // vertices ±1 are sampled: |g'| = 2, |g| = 0.5
        assert_relative_eq!(c.beta.unwrap(), 2.0, epsilon = 1e-12);
        assert_relative_eq!(c.g.unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn large_box_uses_interval_bound() {
        let n = 25;
        let a = DMatrix::from_fn(2, n, |k, i| if (k + i) % 2 == 0 { 1.0 } else { -0.5 });
        let g = ConstraintFunction::linear(a.clone(), v(&[0.3, -0.2])).unwrap();
        let inst = ProblemInstance::new(SimpleSet::cube(n, -1.0, 1.0).unwrap(), g).unwrap();
        let c = *derive_constants(&inst, None).unwrap().constants();
        // every row's |a·x − b| is maximized at a sign vertex, so the interval bound is exact here
        let row_max = |k: usize| a.row(k).iter().map(|x| x.abs()).sum::<f64>() + [0.3f64, 0.2][k];
        let expect = (row_max(0).powi(2) + row_max(1).powi(2)).sqrt();
        assert_relative_eq!(c.g.unwrap(), expect, epsilon = 1e-12);
    }
}
