//! Runtime checks of the inequalities the analysis rests on.
//!
//! Each field is the worst excess over all checked rounds: the amount by
//! which the left side exceeds the right side. A property holds within
//! tolerance `tol` when its excess is at most `tol`.

use nalgebra::DVector;

use crate::algorithm::{bounds_from_constants, RoundTrace, Trajectory};
use crate::error::{invalid, Result};
use crate::problem::{LossOracle, ProblemInstance};
use crate::vqueue::{queue_update, QueueState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Audit {
    /// `−Q_k(t)`.
    pub queue_nonnegative: f64,
    /// `−(Q_k(t+1) + g̃_k(x(t)))`.
    pub queue_plus_constraint: f64,
    /// `‖g̃(x(t))‖ − ‖Q(t+1)‖`.
    pub queue_dominates_constraint: f64,
    /// `‖Q(t+1)‖ − ‖Q(t)‖ − ‖g̃(x(t))‖`.
    pub queue_growth: f64,
    /// `Δ(t) − Q(t)ᵀg̃(x(t)) − ‖g̃(x(t))‖²`.
    pub drift: f64,
    /// `Σ_t g_k(x(t)) − Q_k(T+1)/γ`, per period.
    pub violation_certificate: f64,
    /// `‖Q(t)‖` minus its a-priori bound; `None` without a Slater margin or D.
    pub queue_bound: Option<f64>,
    /// Drift-plus-penalty inequality against the comparator; `None` when no
    /// comparator was given.
    pub drift_plus_penalty: Option<f64>,
}

impl Audit {
    /// Whether every checked property holds: queue properties within `tol`,
    /// the drift-plus-penalty and queue bounds within `tol_bounds`.
    pub fn holds(&self, tol: f64, tol_bounds: f64) -> bool {
        [
            self.queue_nonnegative,
            self.queue_plus_constraint,
            self.queue_dominates_constraint,
            self.queue_growth,
            self.drift,
            self.violation_certificate,
        ]
        .iter()
        .all(|e| *e <= tol)
            && self.queue_bound.is_none_or(|e| e <= tol_bounds)
            && self.drift_plus_penalty.is_none_or(|e| e <= tol_bounds)
    }
}

/// A loss oracle with a fixed feasible comparator.
pub struct Comparator<'a> {
    pub losses: &'a dyn LossOracle,
    pub x_star: &'a DVector<f64>,
}

/// Checks the queue, drift and bound inequalities on every period of `trajectory`.
pub fn audit(instance: &ProblemInstance, trajectory: &Trajectory, comparator: Option<Comparator<'_>>) -> Result<Audit> {
    if trajectory.periods.is_empty() {
        return Err(invalid("only queue-based trajectories can be audited"));
    }
    let constants = instance.constants().resolve().ok();
    let mut out = Audit {
        queue_nonnegative: f64::NEG_INFINITY,
        queue_plus_constraint: f64::NEG_INFINITY,
        queue_dominates_constraint: f64::NEG_INFINITY,
        queue_growth: f64::NEG_INFINITY,
        drift: f64::NEG_INFINITY,
        violation_certificate: f64::NEG_INFINITY,
        queue_bound: constants.map(|_| f64::NEG_INFINITY),
        drift_plus_penalty: comparator.as_ref().map(|_| f64::NEG_INFINITY),
    };
    let last_period = trajectory.periods.len() - 1;

    for (pi, period) in trajectory.periods.iter().enumerate() {
        let p = period.params;
        let mut seq: Vec<&RoundTrace> = vec![&period.bootstrap];
        seq.extend(&trajectory.rounds[period.first_round + 1..=period.last_round]);

        let queue_limit = constants.map(|c| bounds_from_constants(&c, p.gamma, p.alpha, p.eta, period.horizon).queue);
        let mut q_prev = DVector::zeros(instance.num_constraints());
        let mut sum = DVector::zeros(instance.num_constraints());
        for (i, r) in seq.iter().enumerate() {
            let q = &r.queue_after;
            let gt = &r.gtil_vals;
            out.queue_nonnegative = out.queue_nonnegative.max(-q.min());
            out.queue_plus_constraint = out.queue_plus_constraint.max(-(q + gt).min());
            out.queue_dominates_constraint = out.queue_dominates_constraint.max(gt.norm() - q.norm());
            out.queue_growth = out.queue_growth.max(q.norm() - q_prev.norm() - gt.norm());
            out.drift = out.drift.max(r.drift - q_prev.dot(gt) - gt.norm_squared());
            if let (Some(limit), Some(worst)) = (queue_limit, out.queue_bound.as_mut()) {
                *worst = worst.max(q.norm() - limit);
            }
            if i > 0 {
                sum += &r.g_vals;
            }
            q_prev = q.clone();
        }
        let q_final = &seq.last().expect("nonempty").queue_after;
        out.violation_certificate = out.violation_certificate.max((&sum - q_final / p.gamma).max());

        if let (Some(cmp), Some(worst)) = (comparator.as_ref(), out.drift_plus_penalty.as_mut()) {
            let d = instance.constants().d.ok_or_else(|| invalid("drift-plus-penalty check needs D"))?;
            // successor record of each counted round, including x(T+1) for the last period
            let tail = if pi == last_period {
                let x = trajectory.next_decision.clone();
                let gtil = instance.constraint_values(&x) * p.gamma;
                let q = QueueState::from_backlog(q_final.clone())?;
                let next = queue_update(&q, &gtil)?;
                Some((x, gtil, next.last_drift()))
            } else {
                None
            };
            for i in 1..seq.len() {
                let r = seq[i];
                let (x_next, gtil_next, drift_next) = match seq.get(i + 1) {
                    Some(n) => (n.x.clone(), n.gtil_vals.clone(), n.drift),
                    None => match &tail {
                        Some(t) => t.clone(),
                        None => continue,
                    },
                };
                let lhs = drift_next + r.loss;
                let rhs = cmp.losses.value(r.t, cmp.x_star)
                    + p.alpha * ((cmp.x_star - &r.x).norm_squared() - (cmp.x_star - &x_next).norm_squared())
                    + 0.5 * (gtil_next.norm_squared() - r.gtil_vals.norm_squared())
                    + d * d / (2.0 * p.eta);
                *worst = worst.max(lhs - rhs);
            }
        }
    }
    Ok(out)
}
