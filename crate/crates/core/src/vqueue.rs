//! Virtual queues, the quadratic Lyapunov function and its drift.

use nalgebra::DVector;

use crate::error::{invalid, Result};

/// Queue backlogs `Q(t)` with the cached Lyapunov value `L = ½‖Q‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueState {
    backlog: DVector<f64>,
    lyapunov: f64,
    last_drift: f64,
}

impl QueueState {
    /// `Q(0) = 0`.
    pub fn zeros(m: usize) -> Self {
        Self {
            backlog: DVector::zeros(m),
            lyapunov: 0.0,
            last_drift: 0.0,
        }
    }

    /// A state holding `backlog`, which must be componentwise nonnegative.
    pub fn from_backlog(backlog: DVector<f64>) -> Result<Self> {
        if backlog.iter().any(|q| !(*q >= 0.0)) {
            return Err(invalid("queue backlogs must be nonnegative"));
        }
        let lyapunov = 0.5 * backlog.norm_squared();
        Ok(Self {
            backlog,
            lyapunov,
            last_drift: 0.0,
        })
    }

    pub fn backlog(&self) -> &DVector<f64> {
        &self.backlog
    }

    pub fn lyapunov(&self) -> f64 {
        self.lyapunov
    }

    pub fn last_drift(&self) -> f64 {
        self.last_drift
    }

    pub fn len(&self) -> usize {
        self.backlog.len()
    }

    pub fn is_empty(&self) -> bool {
        self.backlog.is_empty()
    }
}

/// `Q_k(t+1) = max{−g̃_k, Q_k(t) + g̃_k}` for the committed decision's `g̃ = γ g(x(t))`.
pub fn queue_update(state: &QueueState, gtil: &DVector<f64>) -> Result<QueueState> {
    if gtil.len() != state.len() {
        return Err(invalid(format!(
            "constraint vector has length {}, queue has {}",
            gtil.len(),
            state.len()
        )));
    }
    let backlog = DVector::from_fn(gtil.len(), |k, _| {
        (-gtil[k]).max(state.backlog[k] + gtil[k])
    });
    let lyapunov = 0.5 * backlog.norm_squared();
    Ok(QueueState {
        last_drift: lyapunov - state.lyapunov,
        backlog,
        lyapunov,
    })
}

/// `½(‖Q_after‖² − ‖Q_before‖²)`.
pub fn drift(before: &QueueState, after: &QueueState) -> Result<f64> {
    if before.len() != after.len() {
        return Err(invalid("queue states have different lengths"));
    }
    Ok(0.5 * (after.backlog.norm_squared() - before.backlog.norm_squared()))
}

/// `Q(T+1)/γ`, componentwise upper bounds on `Σ_{t=1}^{T} g_k(x(t))`.
pub fn violation_from_queue(final_backlog: &DVector<f64>, gamma: f64) -> Result<DVector<f64>> {
    if !(gamma > 0.0) {
        return Err(invalid("gamma must be positive"));
    }
    Ok(final_backlog / gamma)
}
