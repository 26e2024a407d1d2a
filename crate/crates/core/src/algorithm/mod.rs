//! The virtual-queue algorithm: parameters and schedules, the per-round
//! decision update, full runs, and the doubling-trick wrapper.

mod run;
mod step;

pub use run::{run, run_doubling, run_with, Period, RunOptions, Trajectory};
pub use step::{
    step_fast_linear, step_inner_solver, InnerSolution, InnerSolverOptions, ProximalSubproblem,
    StepRule,
};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::problem::{KnownConstants, ProblemInstance};

/// Relative slack allowed when checking `α ≥ ½(γ²β² + η)`, so that the
/// default schedule (where the two sides agree analytically) is accepted.
const VALIDITY_RTOL: f64 = 1e-12;

/// `γ` (constraint scaling), `α` (proximal weight), `η` (analysis
/// parameter) and the horizon they were chosen for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmParams {
    pub gamma: f64,
    pub alpha: f64,
    pub eta: f64,
    pub horizon: usize,
}

impl AlgorithmParams {
    pub fn new(gamma: f64, alpha: f64, eta: f64, horizon: usize) -> Result<Self> {
        for (name, v) in [("gamma", gamma), ("alpha", alpha), ("eta", eta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive and finite")));
            }
        }
        Ok(Self {
            gamma,
            alpha,
            eta,
            horizon,
        })
    }

    /// `½(γ²β² + η)`, the smallest admissible α.
    pub fn alpha_threshold(&self, beta: f64) -> f64 {
        0.5 * (self.gamma * self.gamma * beta * beta + self.eta)
    }

    pub fn is_valid_for(&self, beta: f64) -> bool {
        self.alpha >= self.alpha_threshold(beta) * (1.0 - VALIDITY_RTOL)
    }

    pub fn validate_for(&self, beta: f64) -> Result<()> {
        if self.is_valid_for(beta) {
            Ok(())
        } else {
            Err(Error::Validity(format!(
                "alpha = {} is below ½(γ²β² + η) = {}",
                self.alpha,
                self.alpha_threshold(beta)
            )))
        }
    }
}

/// `γ = T^{1/4}`, `η = √T`, `α = ½(β² + 1)√T`.
pub fn default_schedule(horizon: usize, beta: f64) -> AlgorithmParams {
    let t = horizon.max(1) as f64;
    let sqrt_t = t.sqrt();
    AlgorithmParams {
        gamma: t.powf(0.25),
        alpha: 0.5 * (beta * beta + 1.0) * sqrt_t,
        eta: sqrt_t,
        horizon,
    }
}

/// Certified bound values for one parameter choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifiedBounds {
    /// `αR² + 2γ²G² + D²T/(2η)`, the constant the regret argument establishes.
    pub regret: f64,
    /// `αR² + ½γ²G² + D²T/(2η)`, the constant as usually stated.
    pub regret_stated: f64,
    /// `2G + (αR² + 2DR + 2γ²G²)/(γ²ε)`, for every `Σ_{t≤T} g_k(x(t))`.
    pub violation: f64,
    /// `2γG + (αR² + 2DR + 2γ²G²)/(γε)`, for every `‖Q(t)‖`.
    pub queue: f64,
}

/// Bounds computed from already-resolved constants.
pub fn bounds_from_constants(
    c: &KnownConstants,
    gamma: f64,
    alpha: f64,
    eta: f64,
    rounds: usize,
) -> CertifiedBounds {
    let t = rounds as f64;
    let (d, g, r, eps) = (c.d, c.g, c.r, c.epsilon);
    let g2 = gamma * gamma;
    let shared = alpha * r * r + 2.0 * d * r + 2.0 * g2 * g * g;
    CertifiedBounds {
        regret: alpha * r * r + 2.0 * g2 * g * g + d * d * t / (2.0 * eta),
        regret_stated: alpha * r * r + 0.5 * g2 * g * g + d * d * t / (2.0 * eta),
        violation: 2.0 * g + shared / (g2 * eps),
        queue: 2.0 * gamma * g + shared / (gamma * eps),
    }
}

/// Regret and violation bounds for `instance` run `rounds` rounds with `params`.
pub fn certified_bounds(
    instance: &ProblemInstance,
    params: &AlgorithmParams,
    rounds: usize,
) -> Result<CertifiedBounds> {
    let c = instance.constants().resolve()?;
    Ok(bounds_from_constants(
        &c,
        params.gamma,
        params.alpha,
        params.eta,
        rounds,
    ))
}

/// One recorded round of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    pub t: usize,
    /// Decision `x(t)`.
    pub x: DVector<f64>,
    /// `f^t(x(t))`.
    pub loss: f64,
    /// `∇f^t(x(t))`.
    pub grad: DVector<f64>,
    /// `g(x(t))`.
    pub g_vals: DVector<f64>,
    /// `γ g(x(t))`.
    pub gtil_vals: DVector<f64>,
    /// `Q(t+1)`, or the dual vector for primal-dual baselines.
    pub queue_after: DVector<f64>,
    /// `L(t+1) − L(t)`.
    pub drift: f64,
    /// `d(t)` when the closed-form update was used.
    pub direction: Option<DVector<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Constants;
    use approx::assert_relative_eq;

    #[test]
    fn schedule_t16() {
        let p = default_schedule(16, 1.0);
        assert_eq!((p.gamma, p.eta, p.alpha), (2.0, 4.0, 4.0));
        assert_eq!(p.alpha_threshold(1.0), 4.0);
        assert!(p.is_valid_for(1.0));
    }

    #[test]
    fn schedule_t5000() {
        let p = default_schedule(5000, 1.0);
        assert_relative_eq!(p.gamma, 5000f64.powf(0.25), epsilon = 1e-15);
        assert_relative_eq!(p.alpha, 5000f64.sqrt(), epsilon = 1e-12);
        assert!(p.is_valid_for(1.0));
    }

    #[test]
    fn schedule_unit_horizon() {
        let p = default_schedule(1, 2.0);
        assert_eq!((p.gamma, p.eta, p.alpha), (1.0, 1.0, 2.5));
    }

    #[test]
    fn schedule_valid_for_many_horizons_and_betas() {
        for t in [1usize, 2, 3, 7, 100, 1023, 5000, 123_457] {
            for beta in [0.1, 0.7, 1.0, 1.9, 3.3] {
                assert!(default_schedule(t, beta).is_valid_for(beta), "T={t} beta={beta}");
            }
        }
    }

    #[test]
    fn boundary_triple_is_valid() {
        let p = AlgorithmParams::new(1.0, 1.0, 1.0, 1).unwrap();
        assert!(p.is_valid_for(1.0));
        let p = AlgorithmParams::new(1.0, 0.99, 1.0, 1).unwrap();
        assert!(p.validate_for(1.0).is_err());
    }

    fn known(d: f64, g: f64, r: f64, eps: f64) -> KnownConstants {
        KnownConstants {
            d,
            beta: 1.0,
            g,
            r,
            epsilon: eps,
        }
    }

    #[test]
    fn bound_formula_example() {
        let b = bounds_from_constants(&known(1.0, 1.0, 2.0, 0.5), 2.0, 4.0, 4.0, 16);
        assert_eq!(b.regret, 26.0);
        assert_eq!(b.regret_stated, 20.0);
        assert_eq!(b.violation, 16.0);
    }

    #[test]
    fn bound_formula_zero_g() {
        let b = bounds_from_constants(&known(1.0, 0.0, 2.0, 0.5), 2.0, 4.0, 4.0, 16);
        assert_eq!(b.violation, (4.0 * 4.0 + 2.0 * 1.0 * 2.0) / (4.0 * 0.5));
    }

    #[test]
    fn default_schedule_violation_limit() {
        let c = KnownConstants {
            d: 1.3,
            beta: 1.7,
            g: 2.1,
            r: 2.5,
            epsilon: 0.4,
        };
        let stated = 2.0 * c.g
            + (0.5 * (c.beta * c.beta + 1.0) * c.r * c.r + 2.0 * c.g * c.g + 2.0 * c.d * c.r) / c.epsilon;
        let limit = 2.0 * c.g + (0.5 * (c.beta * c.beta + 1.0) * c.r * c.r + 2.0 * c.g * c.g) / c.epsilon;
        let at = |t: usize| {
            let p = default_schedule(t, c.beta);
            bounds_from_constants(&c, p.gamma, p.alpha, p.eta, t).violation
        };
        assert_relative_eq!(at(1), stated, max_relative = 1e-12);
        for t in [2, 10, 1000, 100_000] {
            assert!(at(t) <= stated + 1e-9);
        }
        assert_relative_eq!(at(1usize << 40), limit, max_relative = 1e-5);
    }

    #[test]
    fn certified_bounds_need_epsilon() {
        use crate::problem::{ConstraintFunction, SimpleSet};
        let g = ConstraintFunction::linear(nalgebra::DMatrix::identity(1, 1), DVector::from_element(1, 0.5)).unwrap();
        let inst = ProblemInstance::new(SimpleSet::cube(1, -1.0, 1.0).unwrap(), g)
            .unwrap()
            .with_constants(Constants {
                d: Some(1.0),
                beta: Some(1.0),
                g: Some(1.0),
                r: Some(2.0),
                epsilon: None,
            });
        let p = default_schedule(16, 1.0);
        assert!(matches!(certified_bounds(&inst, &p, 16), Err(Error::SlaterViolation { .. })));
    }
}
