//! Reference algorithms: online gradient descent with exact projection onto
//! the full feasible set, and a regularized primal-dual method.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algorithm::{RoundTrace, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::problem::{LossOracle, ProblemInstance, SimpleSet};

/// Sweep cap for [`project_polyhedron`].
pub const DYKSTRA_MAX_SWEEPS: usize = 50_000;

/// Euclidean projection of `point` onto `X₀ ∩ {x : Ax ≤ b}` by Dykstra's
/// alternating projections.
///
/// Halfspaces are visited first and `X₀` last, so the result always lies in
/// `X₀`. Stops when a sweep moves the iterate and every correction term by
/// less than `tol/10` and the halfspace violation is below `tol`.
pub fn project_polyhedron(
    set: &SimpleSet,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    point: &DVector<f64>,
    tol: f64,
) -> Result<DVector<f64>> {
    let (m, n) = (a.nrows(), a.ncols());
    if n != set.dim() || point.len() != n || b.len() != m {
        return Err(invalid("polyhedron dimensions do not match"));
    }
    if !(tol > 0.0) || point.iter().any(|v| !v.is_finite()) {
        return Err(invalid("tolerance must be positive and the point finite"));
    }
    let rows: Vec<DVector<f64>> = (0..m).map(|k| a.row(k).transpose()).collect();
    let sq: Vec<f64> = rows.iter().map(|r| r.norm_squared()).collect();
    for k in 0..m {
        if sq[k] == 0.0 && b[k] < 0.0 {
            return Err(Error::Infeasible(format!("row {k} reads 0 ≤ {}", b[k])));
        }
    }

    let halfspace = |k: usize, y: &DVector<f64>| -> DVector<f64> {
        let excess = rows[k].dot(y) - b[k];
        if sq[k] == 0.0 || excess <= 0.0 {
            y.clone()
        } else {
            y - &rows[k] * (excess / sq[k])
        }
    };
    let violation = |y: &DVector<f64>| -> f64 {
        (0..m)
            .filter(|k| sq[*k] > 0.0)
            .map(|k| (rows[k].dot(y) - b[k]) / sq[k].sqrt())
            .fold(0.0, f64::max)
    };

    let mut x = set.project_unchecked(point);
    if violation(&x) <= 0.0 && x == *point {
        return Ok(x);
    }
    x = point.clone();
    // corrections: one per halfspace, then X₀
    let mut corr = vec![DVector::zeros(n); m + 1];

    for sweep in 1..=DYKSTRA_MAX_SWEEPS {
        let start = x.clone();
        let mut max_corr_change: f64 = 0.0;
        for (k, ck) in corr.iter_mut().enumerate() {
            let shifted = &x + &*ck;
            let y = if k < m {
                halfspace(k, &shifted)
            } else {
                set.project_unchecked(&shifted)
            };
            let next_corr = &shifted - &y;
            max_corr_change = max_corr_change.max((&next_corr - &*ck).norm());
            *ck = next_corr;
            x = y;
        }
        let moved = (&x - &start).norm();
        if moved <= 0.1 * tol && max_corr_change <= 0.1 * tol && violation(&x) <= tol {
            return Ok(x);
        }
        if sweep % FARKAS_CHECK_EVERY == 0 || sweep == DYKSTRA_MAX_SWEEPS {
            if let Some(gap) = farkas_gap(set, &rows, &sq, b, &corr[..m]) {
                return Err(Error::Infeasible(format!(
                    "the halfspace multipliers certify an empty intersection (gap {gap:.3e})"
                )));
            }
        }
    }
    Err(Error::Convergence {
        solver: "Dykstra projection",
        iterations: DYKSTRA_MAX_SWEEPS,
        residual: violation(&x),
        best: x,
    })
}

/// Sweeps between emptiness checks.
const FARKAS_CHECK_EVERY: usize = 1000;

/// Each halfspace correction is `λ_k a_k` with `λ_k ≥ 0`. When
/// `min_{x ∈ X₀} Σ_k λ_k (a_kᵀx − b_k) > 0` no point of `X₀` satisfies every
/// halfspace; returns that minimum, scaled by `1/‖λ‖₁`, in that case.
fn farkas_gap(
    set: &SimpleSet,
    rows: &[DVector<f64>],
    sq: &[f64],
    b: &DVector<f64>,
    corr: &[DVector<f64>],
) -> Option<f64> {
    let lambda: Vec<f64> = (0..rows.len())
        .map(|k| if sq[k] > 0.0 { (rows[k].dot(&corr[k]) / sq[k]).max(0.0) } else { 0.0 })
        .collect();
    let total: f64 = lambda.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut c = DVector::zeros(set.dim());
    let mut offset = 0.0;
    for (k, l) in lambda.iter().enumerate() {
        c += &rows[k] * (l / total);
        offset += l / total * b[k];
    }
    let gap = set.min_linear(&c) - offset;
    // demand a margin above rounding in the combined row
    (gap > 1e-12 * (1.0 + offset.abs() + c.norm() * set.diameter())).then_some(gap)
}

/// `P_X[x(t) − step·∇f^t(x(t))]` with `X = X₀ ∩ {Ax ≤ b}`.
pub fn ogd_step(
    set: &SimpleSet,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    x_t: &DVector<f64>,
    grad_t: &DVector<f64>,
    step: f64,
    tol: f64,
) -> Result<DVector<f64>> {
    if !(step > 0.0) {
        return Err(invalid("step must be positive"));
    }
    if grad_t.len() != x_t.len() {
        return Err(invalid("gradient dimension mismatch"));
    }
    project_polyhedron(set, a, b, &(x_t - grad_t * step), tol)
}

/// Dual variables of the primal-dual baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub lambda: DVector<f64>,
    /// Trade-off exponent θ ∈ (0, 1) that sets the step sizes.
    pub theta_exp: f64,
}

impl DualState {
    pub fn new(m: usize, theta_exp: f64) -> Result<Self> {
        if !(theta_exp > 0.0 && theta_exp < 1.0) {
            return Err(invalid("theta_exp must lie in (0, 1)"));
        }
        Ok(Self {
            lambda: DVector::zeros(m),
            theta_exp,
        })
    }
}

/// One round of the regularized primal-dual method:
///
/// `x⁺ = P_{X₀}[x − ηₚ(∇f + Jᵀλ)]`, `λ⁺ = max{0, λ + η_d(g(x) − reg·λ)}`.
pub fn primal_dual_step(
    instance: &ProblemInstance,
    state: &DualState,
    x_t: &DVector<f64>,
    grad_t: &DVector<f64>,
    step_primal: f64,
    step_dual: f64,
    reg: f64,
) -> Result<(DVector<f64>, DualState)> {
    if !(step_primal > 0.0 && step_dual > 0.0 && reg >= 0.0) {
        return Err(invalid("steps must be positive and reg nonnegative"));
    }
    let (n, m) = (instance.dim(), instance.num_constraints());
    if x_t.len() != n || grad_t.len() != n || state.lambda.len() != m {
        return Err(invalid("primal-dual dimension mismatch"));
    }
    let g = instance.constraints();
    let direction = grad_t + g.jacobian(x_t).transpose() * &state.lambda;
    let x_next = instance.set().project_unchecked(&(x_t - direction * step_primal));
    let gx = g.eval(x_t);
    let lambda = DVector::from_fn(m, |k, _| {
        (state.lambda[k] + step_dual * (gx[k] - reg * state.lambda[k])).max(0.0)
    });
    Ok((
        x_next,
        DualState {
            lambda,
            theta_exp: state.theta_exp,
        },
    ))
}

/// Settings for [`run_ogd`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OgdOptions {
    /// Defaults to `R/(D√T)`.
    pub step: Option<f64>,
    pub tol: f64,
}

impl Default for OgdOptions {
    fn default() -> Self {
        Self { step: None, tol: 1e-9 }
    }
}

impl OgdOptions {
    pub fn resolved_step(&self, instance: &ProblemInstance, horizon: usize) -> Result<f64> {
        match self.step {
            Some(s) => Ok(s),
            None => {
                let c = instance.constants();
                let (r, d) = (c.r.unwrap_or(instance.set().diameter()), gradient_bound(instance)?);
                Ok(r / (d * (horizon.max(1) as f64).sqrt()))
            }
        }
    }
}

/// Settings for [`run_primal_dual`]. Unset steps follow
/// `ηₚ = R/(D·T^{max(θ,1−θ)})`, `η_d = T^{−θ/2}/G` and `reg = η_d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimalDualOptions {
    pub theta_exp: f64,
    pub step_primal: Option<f64>,
    pub step_dual: Option<f64>,
    pub reg: Option<f64>,
}

impl PrimalDualOptions {
    pub fn new(theta_exp: f64) -> Self {
        Self {
            theta_exp,
            step_primal: None,
            step_dual: None,
            reg: None,
        }
    }

    /// `(ηₚ, η_d, reg)` for `horizon` rounds.
    pub fn resolved(&self, instance: &ProblemInstance, horizon: usize) -> Result<(f64, f64, f64)> {
        let th = self.theta_exp;
        if !(th > 0.0 && th < 1.0) {
            return Err(invalid("theta_exp must lie in (0, 1)"));
        }
        let t = horizon.max(1) as f64;
        let c = instance.constants();
        let r = c.r.unwrap_or(instance.set().diameter());
        let g = c.g.filter(|g| *g > 0.0).unwrap_or(1.0);
        let primal = match self.step_primal {
            Some(s) => s,
            None => r / (gradient_bound(instance)? * t.powf(th.max(1.0 - th))),
        };
        let dual = self.step_dual.unwrap_or(t.powf(-th / 2.0) / g);
        Ok((primal, dual, self.reg.unwrap_or(dual)))
    }
}

fn gradient_bound(instance: &ProblemInstance) -> Result<f64> {
    match instance.constants().d {
        Some(d) if d > 0.0 => Ok(d),
        _ => Err(Error::MissingConstants("gradient bound D".into())),
    }
}

/// Online gradient descent projected onto the full feasible set each round.
/// Requires linear constraints. Queue columns are zero.
pub fn run_ogd(
    instance: &ProblemInstance,
    losses: &dyn LossOracle,
    horizon: usize,
    options: &OgdOptions,
) -> Result<Trajectory> {
    let (a, b) = instance.constraints().as_linear().ok_or(Error::WrongPath)?;
    check_losses(losses, horizon)?;
    let step = options.resolved_step(instance, horizon)?;
    let set = instance.set();
    let mut x = project_polyhedron(set, a, b, &set.center(), options.tol)?;
    let zeros = DVector::zeros(instance.num_constraints());
    let mut rounds = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        let grad = losses.gradient(t, &x);
        let next = ogd_step(set, a, b, &x, &grad, step, options.tol)?;
        let g_vals = instance.constraint_values(&x);
        rounds.push(RoundTrace {
            t,
            loss: losses.value(t, &x),
            x,
            grad,
            gtil_vals: g_vals.clone(),
            g_vals,
            queue_after: zeros.clone(),
            drift: 0.0,
            direction: None,
        });
        x = next;
    }
    Ok(Trajectory {
        rounds,
        next_decision: x,
        periods: Vec::new(),
    })
}

/// The primal-dual baseline. Queue columns carry `λ(t+1)` and drift is the
/// change of `½‖λ‖²`.
pub fn run_primal_dual(
    instance: &ProblemInstance,
    losses: &dyn LossOracle,
    horizon: usize,
    options: &PrimalDualOptions,
) -> Result<Trajectory> {
    check_losses(losses, horizon)?;
    let (sp, sd, reg) = options.resolved(instance, horizon)?;
    let mut state = DualState::new(instance.num_constraints(), options.theta_exp)?;
    let mut x = instance.set().project_unchecked(&instance.set().center());
    let mut rounds = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        let grad = losses.gradient(t, &x);
        let (next, next_state) = primal_dual_step(instance, &state, &x, &grad, sp, sd, reg)?;
        let g_vals = instance.constraint_values(&x);
        let drift = 0.5 * (next_state.lambda.norm_squared() - state.lambda.norm_squared());
        rounds.push(RoundTrace {
            t,
            loss: losses.value(t, &x),
            x,
            grad,
            gtil_vals: g_vals.clone(),
            g_vals,
            queue_after: next_state.lambda.clone(),
            drift,
            direction: None,
        });
        x = next;
        state = next_state;
    }
    Ok(Trajectory {
        rounds,
        next_decision: x,
        periods: Vec::new(),
    })
}

fn check_losses(losses: &dyn LossOracle, horizon: usize) -> Result<()> {
    if losses.last_round() < horizon {
        return Err(invalid(format!(
            "losses cover rounds up to {}, need {horizon}",
            losses.last_round()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{ConstraintFunction, LinearLosses};
    use approx::assert_relative_eq;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn square() -> SimpleSet {
        SimpleSet::cube(2, -1.0, 1.0).unwrap()
    }

    fn row(a: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, a.len(), a)
    }

    #[test]
    fn dykstra_examples() {
        let p = project_polyhedron(&square(), &row(&[1.0, 0.0]), &v(&[0.5]), &v(&[2.0, 0.0]), 1e-9).unwrap();
        assert_relative_eq!(p, v(&[0.5, 0.0]), epsilon = 1e-8);
        let p = project_polyhedron(&square(), &row(&[1.0, 1.0]), &v(&[1.0]), &v(&[2.0, 2.0]), 1e-9).unwrap();
        assert_relative_eq!(p, v(&[0.5, 0.5]), epsilon = 1e-8);
    }

    #[test]
    fn dykstra_matches_grid() {
        let (a, b, q) = (row(&[1.0, -1.0]), v(&[1.0]), v(&[1.5, -2.0]));
        let tol = 1e-6;
        let p = project_polyhedron(&square(), &a, &b, &q, tol).unwrap();
        let mut best = (f64::INFINITY, v(&[0.0, 0.0]));
        for i in 0..=2000 {
            for j in 0..=2000 {
                let y = v(&[-1.0 + i as f64 * 1e-3, -1.0 + j as f64 * 1e-3]);
                if y[0] - y[1] <= 1.0 + 1e-12 {
                    let d = (&y - &q).norm_squared();
                    if d < best.0 {
                        best = (d, y);
                    }
                }
            }
        }
        assert!((&p - &best.1).norm() <= 2e-3);
        assert!(p[0] - p[1] <= 1.0 + tol);
    }

    #[test]
    fn dykstra_detects_empty_intersection() {
        // x₁ ≤ −2 misses the box
        let r = project_polyhedron(&square(), &row(&[1.0, 0.0]), &v(&[-2.0]), &v(&[0.0, 0.0]), 1e-9);
        assert!(matches!(r, Err(Error::Infeasible(_))), "{r:?}");
        let r = project_polyhedron(&square(), &row(&[0.0, 0.0]), &v(&[-1.0]), &v(&[0.0, 0.0]), 1e-9);
        assert!(matches!(r, Err(Error::Infeasible(_))));
        // two halfspaces that only miss each other inside the unit ball
        let ball = SimpleSet::new_ball(v(&[0.0, 0.0]), 1.0).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, -1.0, 0.0]);
        let r = project_polyhedron(&ball, &a, &v(&[-1.5, 0.0]), &v(&[0.0, 0.0]), 1e-9);
        assert!(matches!(r, Err(Error::Infeasible(_))), "{r:?}");
    }

    #[test]
    fn slow_thin_wedge_is_not_reported_empty() {
        // 0.002 x₁ ≤ x₂ ≤ 0.001 x₁ is a thin nonempty wedge for x₁ < 0
        let a = DMatrix::from_row_slice(2, 2, &[-0.001, 1.0, 0.002, -1.0]);
        let r = project_polyhedron(&square(), &a, &v(&[0.0, 0.0]), &v(&[-0.5, 0.8]), 1e-9);
        assert!(matches!(r, Ok(_) | Err(Error::Convergence { .. })), "{r:?}");
    }

    #[test]
    fn ogd_fixed_point_and_free_step() {
        let (a, b) = (row(&[1.0, 1.0]), v(&[1.0]));
        let x = v(&[0.1, -0.3]);
        let y = ogd_step(&square(), &a, &b, &x, &v(&[0.0, 0.0]), 0.5, 1e-10).unwrap();
        assert_relative_eq!(y, x, epsilon = 1e-10);
        let y = ogd_step(&square(), &a, &b, &x, &v(&[0.2, 0.2]), 0.5, 1e-10).unwrap();
        assert_relative_eq!(y, v(&[0.0, -0.4]), epsilon = 1e-10);
    }

    fn linear_instance() -> ProblemInstance {
        let g = ConstraintFunction::linear(DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.3, 0.9]), v(&[0.4, 1.2])).unwrap();
        ProblemInstance::new(square(), g).unwrap().prepared(None).unwrap()
    }

    #[test]
    fn dual_rests_when_feasible() {
        let inst = linear_instance();
        let st = DualState::new(2, 0.5).unwrap();
        let x = v(&[-1.0, -1.0]);
        let (_, next) = primal_dual_step(&inst, &st, &x, &v(&[1.0, 0.0]), 0.1, 0.1, 0.0).unwrap();
        assert_eq!(next.lambda, v(&[0.0, 0.0]));
    }

    #[test]
    fn zero_dual_gives_projected_gradient_step() {
        let inst = linear_instance();
        let st = DualState::new(2, 0.5).unwrap();
        let x = v(&[0.9, 0.0]);
        let (y, _) = primal_dual_step(&inst, &st, &x, &v(&[-1.0, 2.0]), 0.25, 0.1, 0.1).unwrap();
        assert_relative_eq!(y, v(&[1.0, -0.5]), epsilon = 1e-15);
    }

    #[test]
    fn dual_stays_nonnegative() {
        let inst = linear_instance();
        let mut st = DualState::new(2, 2.0 / 3.0).unwrap();
        let mut x = v(&[0.0, 0.0]);
        for t in 0..200 {
            let c = v(&[((t * 13) % 7) as f64 - 3.0, ((t * 5) % 3) as f64 - 1.0]);
            let (nx, ns) = primal_dual_step(&inst, &st, &x, &c, 0.05, 0.3, 0.01).unwrap();
            assert!(ns.lambda.iter().all(|l| *l >= 0.0));
            x = nx;
            st = ns;
        }
    }

    #[test]
    fn ogd_run_stays_feasible() {
        let inst = linear_instance().with_gradient_bound(3.0);
        let costs: Vec<_> = (0..=100).map(|t| v(&[(t as f64).cos(), -1.0])).collect();
        let l = LinearLosses::new(costs).unwrap();
        let tr = run_ogd(&inst, &l, 100, &OgdOptions::default()).unwrap();
        for r in &tr.rounds {
            assert!(r.g_vals.iter().all(|g| *g <= 1e-8));
        }
        let pd = run_primal_dual(&inst, &l, 100, &PrimalDualOptions::new(0.5)).unwrap();
        assert_eq!(pd.rounds.len(), 101);
        assert!(run_primal_dual(&inst, &l, 100, &PrimalDualOptions::new(1.0)).is_err());
    }
}
