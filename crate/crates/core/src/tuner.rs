//! Parameter selection for a known, moderate horizon.
//!
//! With `α` fixed at its lower limit `½(β²γ² + η)` the regret and violation
//! bounds become posynomials in `(γ, η)`, so every objective below is convex
//! in `(log γ, log η)` and nested golden-section search finds its minimum.

use serde::{Deserialize, Serialize};

use crate::algorithm::AlgorithmParams;
use crate::error::{invalid, Error, Result};
use crate::problem::KnownConstants;

/// Relative slack on caps, so a cap met with equality is not lost to rounding.
const CAP_RTOL: f64 = 1e-12;
/// Search range, in natural-log units, for both `γ` and `η`.
const LOG_RANGE: (f64, f64) = (-30.0, 30.0);
const GOLDEN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum TunerMode {
    /// Minimize the larger of the regret and violation bounds.
    Minimax,
    /// Minimize the regret bound with the violation bound capped at `z0`.
    RegretSubjectToViolation { z0: f64 },
    /// Minimize the violation bound with the regret bound capped at `r0`.
    ViolationSubjectToRegret { r0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunerProblem {
    pub mode: TunerMode,
    pub constants: KnownConstants,
    pub horizon: usize,
}

/// Bound values for one parameter triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundValues {
    /// `αR² + ½γ²G² + D²T/(2η)`, the constant the tuner optimizes.
    pub regret_stated: f64,
    /// `αR² + 2γ²G² + D²T/(2η)`.
    pub regret_proof: f64,
    /// `2G + (αR² + 2DR + 2γ²G²)/(γ²ε)`.
    pub violation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunerSolution {
    pub params: AlgorithmParams,
    pub objective: f64,
    pub bounds: BoundValues,
}

/// Both bounds for `(γ, η, α)`; errors when `α < ½(β²γ² + η)`.
pub fn evaluate_bounds(
    gamma: f64,
    eta: f64,
    alpha: f64,
    constants: &KnownConstants,
    horizon: usize,
) -> Result<BoundValues> {
    let params = AlgorithmParams::new(gamma, alpha, eta, horizon)?;
    params.validate_for(constants.beta)?;
    Ok(raw_bounds(gamma, eta, alpha, constants, horizon))
}

fn raw_bounds(gamma: f64, eta: f64, alpha: f64, c: &KnownConstants, horizon: usize) -> BoundValues {
    let t = horizon as f64;
    let g2 = gamma * gamma;
    let base = alpha * c.r * c.r + c.d * c.d * t / (2.0 * eta);
    BoundValues {
        regret_stated: base + 0.5 * g2 * c.g * c.g,
        regret_proof: base + 2.0 * g2 * c.g * c.g,
        violation: 2.0 * c.g + (alpha * c.r * c.r + 2.0 * c.d * c.r + 2.0 * g2 * c.g * c.g) / (g2 * c.epsilon),
    }
}

fn binding_alpha(gamma: f64, eta: f64, beta: f64) -> f64 {
    0.5 * (beta * beta * gamma * gamma + eta)
}

impl TunerProblem {
    fn validate(&self) -> Result<()> {
        let c = &self.constants;
        for (name, v) in [("D", c.d), ("beta", c.beta), ("G", c.g), ("R", c.r), ("epsilon", c.epsilon)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive and finite")));
            }
        }
        if self.horizon == 0 {
            return Err(invalid("horizon must be positive"));
        }
        match self.mode {
            TunerMode::RegretSubjectToViolation { z0 } if !(z0 > 2.0 * c.g) => Err(Error::Infeasible(format!(
                "violation cap {z0} does not exceed 2G = {}",
                2.0 * c.g
            ))),
            TunerMode::ViolationSubjectToRegret { r0 } if !(r0 > 0.0) => {
                Err(invalid("regret cap must be positive"))
            }
            _ => Ok(()),
        }
    }

    /// Bounds at `(γ, η)` with `α` binding.
    pub fn bounds_at(&self, gamma: f64, eta: f64) -> BoundValues {
        let alpha = binding_alpha(gamma, eta, self.constants.beta);
        raw_bounds(gamma, eta, alpha, &self.constants, self.horizon)
    }

    /// Objective at `(γ, η)`, `+∞` where a cap is violated.
    pub fn objective_at(&self, gamma: f64, eta: f64) -> f64 {
        let b = self.bounds_at(gamma, eta);
        match self.mode {
            TunerMode::Minimax => b.regret_stated.max(b.violation),
            TunerMode::RegretSubjectToViolation { z0 } => {
                if b.violation <= z0 * (1.0 + CAP_RTOL) {
                    b.regret_stated
                } else {
                    f64::INFINITY
                }
            }
            TunerMode::ViolationSubjectToRegret { r0 } => {
                if b.regret_stated <= r0 * (1.0 + CAP_RTOL) {
                    b.violation
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Best `η` for a given `γ` with the objective there, or `None` when no
    /// `η` satisfies the cap.
    fn best_eta(&self, gamma: f64) -> Option<(f64, f64)> {
        let c = &self.constants;
        let t = self.horizon as f64;
        let (r2, dr) = (c.r * c.r, c.d * c.r);
        // η minimizing the regret bound alone
        let eta_regret = c.d * t.sqrt() / c.r;
        let eta = match self.mode {
            TunerMode::Minimax => {
                let f = |le: f64| self.objective_at(gamma, le.exp());
                golden(f, LOG_RANGE.0, LOG_RANGE.1).exp()
            }
            TunerMode::RegretSubjectToViolation { z0 } => {
                // violation ≤ z0  ⇔  ½ηR² + 2DR ≤ (z0 − floor)γ²ε
                let floor = 2.0 * c.g + (0.5 * c.beta * c.beta * r2 + 2.0 * c.g * c.g) / c.epsilon;
                let room = (z0 - floor) * gamma * gamma * c.epsilon - 2.0 * dr;
                if room <= 0.0 {
                    return None;
                }
                eta_regret.min(2.0 * room / r2)
            }
            TunerMode::ViolationSubjectToRegret { r0 } => {
                // regret ≤ r0  ⇔  ½R²η² − sη + ½D²T ≤ 0; violation grows with η
                let s = r0 - 0.5 * gamma * gamma * (c.beta * c.beta * r2 + c.g * c.g);
                let disc = s * s - r2 * c.d * c.d * t;
                if s <= 0.0 || disc < 0.0 {
                    return None;
                }
                c.d * c.d * t / (s + disc.sqrt())
            }
        };
        let value = self.objective_at(gamma, eta);
        value.is_finite().then_some((eta, value))
    }
}

/// Golden-section minimization of a convex function of one variable on `[lo, hi]`.
fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > GOLDEN_TOL {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = f(b);
        }
    }
    if fa <= fb {
        a
    } else {
        b
    }
}

/// Solves the parameter-selection program for `problem`.
pub fn tune(problem: &TunerProblem) -> Result<TunerSolution> {
    problem.validate()?;
    let outer = |lg: f64| problem.best_eta(lg.exp()).map_or(f64::INFINITY, |(_, v)| v);
    let (lo, hi) = feasible_log_gamma_range(problem)?;
    let lg = golden(outer, lo, hi);
    let gamma = lg.exp();
    let (eta, objective) = problem.best_eta(gamma).ok_or_else(|| {
        Error::Infeasible("no parameters satisfy the cap".into())
    })?;
    let alpha = binding_alpha(gamma, eta, problem.constants.beta);
    Ok(TunerSolution {
        params: AlgorithmParams::new(gamma, alpha, eta, problem.horizon)?,
        objective,
        bounds: problem.bounds_at(gamma, eta),
    })
}

/// Range of `log γ` on which the constrained modes have a feasible `η`.
/// Golden-section search needs a finite objective at its probes, so the
/// range is located before searching.
fn feasible_log_gamma_range(problem: &TunerProblem) -> Result<(f64, f64)> {
    let c = &problem.constants;
    let t = problem.horizon as f64;
    let (r2, dr) = (c.r * c.r, c.d * c.r);
    match problem.mode {
        TunerMode::Minimax => Ok(LOG_RANGE),
        TunerMode::RegretSubjectToViolation { z0 } => {
            let floor = 2.0 * c.g + (0.5 * c.beta * c.beta * r2 + 2.0 * c.g * c.g) / c.epsilon;
            if z0 <= floor {
                return Err(Error::Infeasible(format!(
                    "violation cap {z0} is not above the bound's floor {floor} reached as γ → ∞"
                )));
            }
            let lo = 0.5 * (2.0 * dr / ((z0 - floor) * c.epsilon)).ln();
            Ok((lo + 1e-9, LOG_RANGE.1.max(lo + 1.0)))
        }
        TunerMode::ViolationSubjectToRegret { r0 } => {
            let need = c.r * c.d * t.sqrt();
            if r0 <= need {
                return Err(Error::Infeasible(format!(
                    "regret cap {r0} is not above RD√T = {need}"
                )));
            }
            let hi = 0.5 * (2.0 * (r0 - need) / (c.beta * c.beta * r2 + c.g * c.g)).ln();
            Ok((LOG_RANGE.0.min(hi - 1.0), hi - 1e-9))
        }
    }
}

/// Best objective over a `points × points` grid, log-spaced on `[lo, hi]` in
/// both `γ` and `η`, with `α` binding. Returns `(γ, η, objective)`.
pub fn grid_reference(problem: &TunerProblem, points: usize, lo: f64, hi: f64) -> (f64, f64, f64) {
    let (llo, lhi) = (lo.ln(), hi.ln());
    let at = |i: usize| (llo + (lhi - llo) * i as f64 / (points - 1) as f64).exp();
    let mut best = (f64::NAN, f64::NAN, f64::INFINITY);
    for i in 0..points {
        for j in 0..points {
            let (g, e) = (at(i), at(j));
            let v = problem.objective_at(g, e);
            if v < best.2 {
                best = (g, e, v);
            }
        }
    }
    best
}

/// Twenty minimax problems spanning several orders of magnitude in each
/// constant and in the horizon.
pub fn battery() -> Vec<TunerProblem> {
    let ds = [0.5, 1.0, 3.0, 6.0];
    let betas = [0.3, 1.0, 1.7, 4.0, 0.8];
    let gs = [0.2, 1.0, 2.5];
    let rs = [1.0, 2.828, 6.0, 0.5];
    let eps = [0.05, 0.5, 1.0, 2.0, 0.2];
    let horizons = [16usize, 256, 1000, 5000, 100_000];
    (0..20)
        .map(|i| TunerProblem {
            mode: TunerMode::Minimax,
            constants: KnownConstants {
                d: ds[i % 4],
                beta: betas[i % 5],
                g: gs[i % 3],
                r: rs[(i / 2) % 4],
                epsilon: eps[(i / 3) % 5],
            },
            horizon: horizons[(i / 4) % 5],
        })
        .collect()
}
