use nalgebra::DVector;

use super::AlgorithmParams;
use crate::error::{invalid, Error, Result};
use crate::problem::{ConstraintFunction, ProblemInstance};

/// How the next decision is computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum StepRule {
    /// Closed form for linear constraints, inner solver otherwise.
    #[default]
    Auto,
    ClosedForm,
    InnerSolver,
}

/// Stopping rules for the projected-gradient inner solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerSolverOptions {
    /// Target optimality gap on the subproblem objective.
    pub tol: f64,
    /// Stop once the gradient-mapping norm is below this.
    pub grad_map_tol: f64,
    /// Stop once one iteration decreases the objective by less than this
    /// and the gap estimate is below `tol`.
    pub decrease_tol: f64,
    pub max_iter: usize,
}

impl Default for InnerSolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            grad_map_tol: 1e-8,
            decrease_tol: 1e-12,
            max_iter: 10_000,
        }
    }
}

/// The per-round subproblem
///
/// `φ(x) = ∇f^t(x(t))ᵀ(x − x(t)) + wᵀ γ g(x) + α‖x − x(t)‖²`, `w = Q(t+1) + γ g(x(t))`,
///
/// minimized over the simple set. φ is strongly convex with modulus 2α.
#[derive(Debug, Clone)]
pub struct ProximalSubproblem<'a> {
    constraints: &'a ConstraintFunction,
    gamma: f64,
    alpha: f64,
    center: DVector<f64>,
    grad: DVector<f64>,
    weights: DVector<f64>,
}

impl<'a> ProximalSubproblem<'a> {
    pub fn new(
        instance: &'a ProblemInstance,
        params: &AlgorithmParams,
        x_t: &DVector<f64>,
        grad_t: &DVector<f64>,
        queue_next: &DVector<f64>,
        gtil_t: &DVector<f64>,
    ) -> Result<Self> {
        let (n, m) = (instance.dim(), instance.num_constraints());
        if x_t.len() != n || grad_t.len() != n {
            return Err(invalid("decision or gradient dimension mismatch"));
        }
        if queue_next.len() != m || gtil_t.len() != m {
            return Err(invalid("queue or constraint vector dimension mismatch"));
        }
        let weights = queue_next + gtil_t;
        if let Some(k) = weights.iter().position(|w| *w < -1e-12) {
            return Err(invalid(format!(
                "Q(t+1) + g̃(x(t)) must be nonnegative, component {k} is {}",
                weights[k]
            )));
        }
        Ok(Self {
            constraints: instance.constraints(),
            gamma: params.gamma,
            alpha: params.alpha,
            center: x_t.clone(),
            grad: grad_t.clone(),
            weights: weights.map(|w| w.max(0.0)),
        })
    }

    /// `w = Q(t+1) + g̃(x(t))`.
    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        let offset = x - &self.center;
        self.grad.dot(&offset)
            + self.gamma * self.weights.dot(&self.constraints.eval(x))
            + self.alpha * offset.norm_squared()
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let jt_w = self.constraints.jacobian(x).transpose() * &self.weights;
        &self.grad + jt_w * self.gamma + (x - &self.center) * (2.0 * self.alpha)
    }
}

/// Closed-form update for linear `g(x) = Ax − b`:
/// `x(t+1) = P[x(t) − d(t)/(2α)]` with `d(t) = ∇f^t(x(t)) + γ Aᵀ(Q(t+1) + g̃(x(t)))`.
///
/// Returns `(x(t+1), d(t))`.
pub fn step_fast_linear(
    instance: &ProblemInstance,
    params: &AlgorithmParams,
    x_t: &DVector<f64>,
    grad_t: &DVector<f64>,
    queue_next: &DVector<f64>,
    gtil_t: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let (a, _) = instance.constraints().as_linear().ok_or(Error::WrongPath)?;
    if x_t.len() != instance.dim() || grad_t.len() != instance.dim() {
        return Err(invalid("decision or gradient dimension mismatch"));
    }
    if queue_next.len() != a.nrows() || gtil_t.len() != a.nrows() {
        return Err(invalid("queue or constraint vector dimension mismatch"));
    }
    let weights = queue_next + gtil_t;
    let direction = grad_t + a.transpose() * weights * params.gamma;
    let target = x_t - &direction * (0.5 / params.alpha);
    Ok((instance.set().project_unchecked(&target), direction))
}

/// Result of the inner solver.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    pub x: DVector<f64>,
    pub iterations: usize,
    /// Final gradient-mapping norm.
    pub residual: f64,
}

/// Minimizes the round's [`ProximalSubproblem`] by projected gradient descent.
///
/// The step is `1/L` with `L` found by backtracking from the strong-convexity
/// modulus `2α`; iteration stops on a small gradient map or a stalled
/// objective with a small gap estimate.
pub fn step_inner_solver(
    instance: &ProblemInstance,
    params: &AlgorithmParams,
    x_t: &DVector<f64>,
    grad_t: &DVector<f64>,
    queue_next: &DVector<f64>,
    gtil_t: &DVector<f64>,
    options: &InnerSolverOptions,
) -> Result<InnerSolution> {
    let sub = ProximalSubproblem::new(instance, params, x_t, grad_t, queue_next, gtil_t)?;
    let set = instance.set();
    let modulus = 2.0 * params.alpha;
    let mut lip = modulus;
    let mut x = set.project_unchecked(x_t);
    let mut fx = sub.objective(&x);
    let mut residual = f64::INFINITY;

    for iter in 1..=options.max_iter {
        let grad = sub.gradient(&x);
        let (next, f_next) = loop {
            let cand = set.project_unchecked(&(&x - &grad * (1.0 / lip)));
            let step = &cand - &x;
            let f_cand = sub.objective(&cand);
            let model = fx + grad.dot(&step) + 0.5 * lip * step.norm_squared();
            if f_cand <= model + 1e-14 * fx.abs().max(1.0) || lip > 1e20 {
                break (cand, f_cand);
            }
            lip *= 2.0;
        };
        residual = lip * (&next - &x).norm();
        let decrease = fx - f_next;
        x = next;
        fx = f_next;
        // gap ≤ ‖G‖²/(2μ) for the gradient map G of a μ-strongly convex function
        let gap_estimate = residual * residual / (2.0 * modulus);
        if residual <= options.grad_map_tol
            || (decrease.abs() <= options.decrease_tol && gap_estimate <= options.tol)
        {
            return Ok(InnerSolution {
                x,
                iterations: iter,
                residual,
            });
        }
    }
    Err(Error::Convergence {
        solver: "inner solver",
        iterations: options.max_iter,
        residual,
        best: x,
    })
}
