use nalgebra::DVector;

use super::step::{step_fast_linear, step_inner_solver, InnerSolverOptions, StepRule};
use super::{default_schedule, AlgorithmParams, RoundTrace};
use crate::error::{invalid, Error, Result};
use crate::problem::{LossOracle, ProblemInstance};
use crate::vqueue::{queue_update, QueueState};

/// Knobs that do not change the algorithm's definition.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    pub step_rule: StepRule,
    pub inner: InnerSolverOptions,
}

/// A stretch of rounds run with one parameter set and one queue.
///
/// A plain run is a single period with `index = 0`. Doubling-trick periods
/// are numbered from 1 and have `horizon = 2^index`.
#[derive(Debug, Clone, PartialEq)]
pub struct Period {
    pub index: u32,
    pub horizon: usize,
    /// Round whose decision and loss seed the period (its local round 0).
    pub first_round: usize,
    pub last_round: usize,
    pub params: AlgorithmParams,
    /// The period's local round 0. Its queue and next decision belong to
    /// this period even when the decision was made by the previous one.
    pub bootstrap: RoundTrace,
}

impl Period {
    /// Rounds counted toward this period's sums: `first_round+1 ..= last_round`.
    pub fn rounds(&self) -> usize {
        self.last_round - self.first_round
    }
}

/// Decisions and per-round records of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// One record per global round `0..=T`; round 0 is the bootstrap.
    pub rounds: Vec<RoundTrace>,
    /// `x(T+1)`, computed but never played.
    pub next_decision: DVector<f64>,
    pub periods: Vec<Period>,
}

impl Trajectory {
    /// Number of counted rounds `T`.
    pub fn horizon(&self) -> usize {
        self.rounds.len() - 1
    }

    /// The period that counts round `t` (round 0 belongs to the first).
    /// Baseline trajectories have no periods.
    pub fn period_of(&self, t: usize) -> Option<&Period> {
        self.periods.iter().find(|p| t <= p.last_round)
    }
}

/// Runs the algorithm for rounds `0..=horizon` with the default options.
pub fn run(
    instance: &ProblemInstance,
    params: &AlgorithmParams,
    losses: &dyn LossOracle,
    horizon: usize,
) -> Result<Trajectory> {
    run_with(instance, params, losses, horizon, &RunOptions::default())
}

/// Runs the algorithm for rounds `0..=horizon`.
///
/// `x(0)` is the projection of the set's center. `params` must satisfy
/// `α ≥ ½(γ²β² + η)` for the instance's β.
pub fn run_with(
    instance: &ProblemInstance,
    params: &AlgorithmParams,
    losses: &dyn LossOracle,
    horizon: usize,
    options: &RunOptions,
) -> Result<Trajectory> {
    params.validate_for(instance.beta()?)?;
    check_losses(losses, horizon)?;
    let x0 = instance.set().project_unchecked(&instance.set().center());
    let (mut rounds, next_decision) = run_segment(instance, params, losses, x0, 0, horizon, options)?;
    let period = Period {
        index: 0,
        horizon,
        first_round: 0,
        last_round: horizon,
        params: *params,
        bootstrap: rounds[0].clone(),
    };
    rounds.shrink_to_fit();
    Ok(Trajectory {
        rounds,
        next_decision,
        periods: vec![period],
    })
}

/// Runs with an unknown horizon by restarting in periods of `2^i` rounds,
/// `i = 1, 2, …`, each with `default_schedule(2^i, beta)`, until `stop_round`.
///
/// Every period starts with a zero queue. Its local round 0 replays the
/// previous period's last decision and loss, so no round is counted twice.
pub fn run_doubling(
    instance: &ProblemInstance,
    losses: &dyn LossOracle,
    beta: f64,
    stop_round: usize,
    options: &RunOptions,
) -> Result<Trajectory> {
    if stop_round == 0 {
        return Err(invalid("stop_round must be positive"));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(invalid("beta must be positive and finite"));
    }
    check_losses(losses, stop_round)?;
    let mut x = instance.set().project_unchecked(&instance.set().center());
    let mut rounds: Vec<RoundTrace> = Vec::with_capacity(stop_round + 1);
    let mut periods = Vec::new();
    let mut first = 0usize;
    let mut index = 1u32;
    let mut next_decision = x.clone();

    while first < stop_round {
        let horizon = 1usize
            .checked_shl(index)
            .ok_or_else(|| invalid("period horizon overflow"))?;
        let last = stop_round.min(first + horizon);
        let params = default_schedule(horizon, beta);
        let (mut seg, next) = run_segment(instance, &params, losses, x, first, last - first, options)?;
        let bootstrap = seg.remove(0);
        if rounds.is_empty() {
            rounds.push(bootstrap.clone());
        }
        x = seg.last().map(|r| r.x.clone()).unwrap_or_else(|| bootstrap.x.clone());
        rounds.extend(seg);
        next_decision = next;
        periods.push(Period {
            index,
            horizon,
            first_round: first,
            last_round: last,
            params,
            bootstrap,
        });
        first = last;
        index += 1;
    }
    Ok(Trajectory {
        rounds,
        next_decision,
        periods,
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

/// Local rounds `0..=rounds` mapped to global rounds `first..=first+rounds`,
/// starting from `x0` and an empty queue. Returns the records and the
/// decision for the round after the last.
fn run_segment(
    instance: &ProblemInstance,
    params: &AlgorithmParams,
    losses: &dyn LossOracle,
    x0: DVector<f64>,
    first: usize,
    rounds: usize,
    options: &RunOptions,
) -> Result<(Vec<RoundTrace>, DVector<f64>)> {
    let closed_form = match options.step_rule {
        StepRule::Auto => instance.constraints().is_linear(),
        StepRule::ClosedForm => {
            if !instance.constraints().is_linear() {
                return Err(Error::WrongPath);
            }
            true
        }
        StepRule::InnerSolver => false,
    };
    let mut queue = QueueState::zeros(instance.num_constraints());
    let mut x = x0;
    let mut out = Vec::with_capacity(rounds + 1);

    for t in first..=first + rounds {
        let loss = losses.value(t, &x);
        let grad = losses.gradient(t, &x);
        let g_vals = instance.constraint_values(&x);
        let gtil_vals = &g_vals * params.gamma;
        let next_queue = queue_update(&queue, &gtil_vals)?;
        let (next, direction) = if closed_form {
            let (next, d) = step_fast_linear(instance, params, &x, &grad, next_queue.backlog(), &gtil_vals)?;
            (next, Some(d))
        } else {
            let sol = step_inner_solver(
                instance,
                params,
                &x,
                &grad,
                next_queue.backlog(),
                &gtil_vals,
                &options.inner,
            )?;
            (sol.x, None)
        };
        out.push(RoundTrace {
            t,
            x,
            loss,
            grad,
            g_vals,
            gtil_vals,
            queue_after: next_queue.backlog().clone(),
            drift: next_queue.last_drift(),
            direction,
        });
        queue = next_queue;
        x = next;
    }
    Ok((out, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{ConstraintFunction, LinearLosses, SimpleSet};
    use nalgebra::DMatrix;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn one_dim(b: f64) -> ProblemInstance {
        let g = ConstraintFunction::linear(DMatrix::from_element(1, 1, 1.0), v(&[b])).unwrap();
        ProblemInstance::new(SimpleSet::cube(1, -1.0, 1.0).unwrap(), g)
            .unwrap()
            .prepared(None)
            .unwrap()
    }

    fn losses(costs: &[f64]) -> LinearLosses {
        LinearLosses::new(costs.iter().map(|c| v(&[*c])).collect()).unwrap()
    }

    #[test]
    fn zero_horizon_keeps_bootstrap_only() {
        let inst = one_dim(0.0);
        let p = default_schedule(1, 1.0);
        let tr = run(&inst, &p, &losses(&[1.0]), 0).unwrap();
        assert_eq!(tr.rounds.len(), 1);
        assert_eq!(tr.rounds[0].t, 0);
        assert_eq!(tr.rounds[0].x, v(&[0.0]));
        assert_eq!(tr.horizon(), 0);
    }

    #[test]
    fn zero_loss_drifts_nonpositive_and_violation_certified() {
        // g(x) = x on [−1, 1], f = 0
        let inst = one_dim(0.0);
        let t = 50;
        let p = default_schedule(t, 1.0);
        let tr = run(&inst, &p, &losses(&vec![0.0; t + 1]), t).unwrap();
        let mut sum = 0.0;
        for r in &tr.rounds[1..] {
            assert!(r.x[0] <= 1e-12);
            sum += r.g_vals[0];
        }
        assert!(sum <= tr.rounds[t].queue_after[0] / p.gamma + 1e-9);
    }

    #[test]
    fn invalid_alpha_rejected() {
        let inst = one_dim(0.5);
        let p = AlgorithmParams::new(2.0, 0.1, 1.0, 4).unwrap();
        assert!(matches!(run(&inst, &p, &losses(&[0.0; 5]), 4), Err(Error::Validity(_))));
    }

    #[test]
    fn too_few_losses_rejected() {
        let inst = one_dim(0.5);
        let p = default_schedule(4, 1.0);
        assert!(run(&inst, &p, &losses(&[0.0; 3]), 4).is_err());
    }

    #[test]
    fn step_rules_agree_on_linear_instances() {
        let inst = one_dim(0.25);
        let costs: Vec<f64> = (0..=40).map(|t| ((t * 7 % 11) as f64 - 5.0) / 3.0).collect();
        let p = default_schedule(40, 1.0);
        let fast = run(&inst, &p, &losses(&costs), 40).unwrap();
        let opts = RunOptions {
            step_rule: StepRule::InnerSolver,
            ..Default::default()
        };
        let slow = run_with(&inst, &p, &losses(&costs), 40, &opts).unwrap();
        for (a, b) in fast.rounds.iter().zip(&slow.rounds) {
            assert!((&a.x - &b.x).norm() <= 1e-6);
            assert!(a.direction.is_some() && b.direction.is_none());
        }
    }

    #[test]
    fn doubling_layout() {
        let inst = one_dim(0.25);
        let l = losses(&[0.3; 11]);
        let tr = run_doubling(&inst, &l, 1.0, 10, &RunOptions::default()).unwrap();
        let layout: Vec<_> = tr
            .periods
            .iter()
            .map(|p| (p.index, p.horizon, p.first_round + 1, p.last_round))
            .collect();
        assert_eq!(layout, vec![(1, 2, 1, 2), (2, 4, 3, 6), (3, 8, 7, 10)]);
        assert_eq!(tr.rounds.len(), 11);
        for (t, r) in tr.rounds.iter().enumerate() {
            assert_eq!(r.t, t);
        }
        // decision carries over into the next period's bootstrap
        assert_eq!(tr.periods[1].bootstrap.x, tr.rounds[2].x);
        assert_eq!(tr.periods[1].bootstrap.t, 2);
        assert_eq!(tr.period_of(5).unwrap().index, 2);

        let tr = run_doubling(&inst, &l, 1.0, 2, &RunOptions::default()).unwrap();
        assert_eq!(tr.periods.len(), 1);
        assert_eq!(tr.periods[0].rounds(), 2);
    }

    #[test]
    fn doubling_period_count_for_5000() {
        let inst = one_dim(0.25);
        let l = losses(&vec![0.1; 5001]);
        let tr = run_doubling(&inst, &l, 1.0, 5000, &RunOptions::default()).unwrap();
        assert_eq!(tr.periods.len(), 12);
        assert_eq!(tr.periods[10].last_round, 4094);
        assert_eq!(tr.periods[11].rounds(), 906);
        assert!(run_doubling(&inst, &l, 1.0, 0, &RunOptions::default()).is_err());
    }

    #[test]
    fn runs_are_bitwise_deterministic() {
        let inst = one_dim(0.25);
        let costs: Vec<f64> = (0..=30).map(|t| (t as f64).sin()).collect();
        let p = default_schedule(30, 1.0);
        let a = run(&inst, &p, &losses(&costs), 30).unwrap();
        let b = run(&inst, &p, &losses(&costs), 30).unwrap();
        assert_eq!(a, b);
    }
}
