use nalgebra::DVector;

use crate::algorithm::Trajectory;
use crate::error::{Error, Result};
use crate::problem::LossOracle;

/// Cumulative regret and violation series of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// `Σ_{t≤τ} f^t(x(t)) − Σ_{t≤τ} f^t(x*)` for `τ = 1..=T` (index `τ − 1`).
    pub cumulative_regret: Vec<f64>,
    /// `Σ_{t≤τ} g(x(t))` for `τ = 1..=T`.
    pub cumulative_violation: Vec<DVector<f64>>,
    /// `Σ_{t=1}^{T} f^t(x*)`.
    pub hindsight_value: f64,
}

impl Metrics {
    pub fn final_regret(&self) -> f64 {
        self.cumulative_regret.last().copied().unwrap_or(0.0)
    }

    /// `max_k Σ_{t≤T} g_k(x(t))`, or 0 for an empty run.
    pub fn final_max_violation(&self) -> f64 {
        self.cumulative_violation
            .last()
            .map(|v| v.max())
            .unwrap_or(0.0)
    }
}

/// Prefix sums of loss gaps against the fixed comparator `x_star` and of
/// constraint values. Round 0 is excluded.
pub fn compute_metrics(trajectory: &Trajectory, losses: &dyn LossOracle, x_star: &DVector<f64>) -> Result<Metrics> {
    let rounds = &trajectory.rounds;
    if rounds.is_empty() {
        return Err(Error::IncompleteTrace("no rounds recorded".into()));
    }
    for (i, r) in rounds.iter().enumerate() {
        if r.t != i {
            return Err(Error::IncompleteTrace(format!("expected round {i}, found {}", r.t)));
        }
    }
    let horizon = rounds.len() - 1;
    if losses.last_round() < horizon {
        return Err(Error::IncompleteTrace(format!("losses stop at round {}", losses.last_round())));
    }
    let m = rounds[0].g_vals.len();
    let mut cumulative_regret = Vec::with_capacity(horizon);
    let mut cumulative_violation = Vec::with_capacity(horizon);
    let (mut regret, mut hindsight_value) = (0.0, 0.0);
    let mut viol = DVector::zeros(m);
    for r in &rounds[1..] {
        let best = losses.value(r.t, x_star);
        regret += r.loss - best;
        hindsight_value += best;
        viol += &r.g_vals;
        cumulative_regret.push(regret);
        cumulative_violation.push(viol.clone());
    }
    Ok(Metrics {
        cumulative_regret,
        cumulative_violation,
        hindsight_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithm::RoundTrace;
    use crate::problem::LinearLosses;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn record(t: usize, x: f64, c: f64, g: f64) -> RoundTrace {
        RoundTrace {
            t,
            x: v(&[x]),
            loss: c * x,
            grad: v(&[c]),
            g_vals: v(&[g]),
            gtil_vals: v(&[g]),
            queue_after: v(&[0.0]),
            drift: 0.0,
            direction: None,
        }
    }

    fn trajectory(rounds: Vec<RoundTrace>) -> Trajectory {
        Trajectory {
            next_decision: rounds.last().unwrap().x.clone(),
            rounds,
            periods: Vec::new(),
        }
    }

    #[test]
    fn single_round() {
        // f¹(x(1)) = 0.5, f¹(x*) = 0.2
        let l = LinearLosses::new(vec![v(&[0.0]), v(&[1.0])]).unwrap();
        let tr = trajectory(vec![record(0, 0.0, 0.0, 0.0), record(1, 0.5, 1.0, 0.3)]);
        let m = compute_metrics(&tr, &l, &v(&[0.2])).unwrap();
        assert!((m.final_regret() - 0.3).abs() <= 1e-15);
        assert_eq!(m.final_max_violation(), 0.3);
    }

    #[test]
    fn playing_the_comparator_has_zero_regret() {
        let costs: Vec<_> = (0..6).map(|t| v(&[t as f64 - 2.5])).collect();
        let l = LinearLosses::new(costs.clone()).unwrap();
        let tr = trajectory((0..6).map(|t| record(t, 0.4, costs[t][0], -0.1)).collect());
        let m = compute_metrics(&tr, &l, &v(&[0.4])).unwrap();
        assert!(m.cumulative_regret.iter().all(|r| *r == 0.0));
        assert_eq!(m.cumulative_regret.len(), 5);
    }

    #[test]
    fn gaps_are_reported() {
        let l = LinearLosses::new(vec![v(&[0.0]); 3]).unwrap();
        let tr = trajectory(vec![record(0, 0.0, 0.0, 0.0), record(2, 0.0, 0.0, 0.0)]);
        assert!(matches!(compute_metrics(&tr, &l, &v(&[0.0])), Err(Error::IncompleteTrace(_))));
    }

    #[test]
    fn bootstrap_only() {
        let l = LinearLosses::new(vec![v(&[1.0])]).unwrap();
        let tr = trajectory(vec![record(0, 0.3, 1.0, 0.0)]);
        let m = compute_metrics(&tr, &l, &v(&[0.0])).unwrap();
        assert!(m.cumulative_regret.is_empty());
        assert_eq!(m.final_regret(), 0.0);
    }
}
