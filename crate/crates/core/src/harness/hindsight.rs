use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::linalg::max_entry;
use crate::problem::{ConstraintFunction, ProblemInstance, SimpleSet};

/// Largest dimension solved by vertex enumeration.
pub const VERTEX_ENUMERATION_MAX_DIM: usize = 3;

const FEAS_TOL: f64 = 1e-9;

/// Best fixed decision in hindsight for linear losses:
/// `x* = argmin { cᵀx : x ∈ X₀, g(x) ≤ 0 }` with `c = Σ_t c(t)`.
///
/// Boxes with linear constraints in up to three dimensions are solved exactly
/// by enumerating vertices, breaking ties toward the lexicographically
/// smallest vertex. Everything else goes through an augmented Lagrangian
/// method whose result is pulled back toward the Slater point until it is
/// feasible.
pub fn hindsight_optimum(instance: &ProblemInstance, cost_sum: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    if cost_sum.len() != instance.dim() {
        return Err(invalid("cost dimension mismatch"));
    }
    match (instance.set(), instance.constraints()) {
        (SimpleSet::Box { lower, upper }, ConstraintFunction::Linear { a, b })
            if instance.dim() <= VERTEX_ENUMERATION_MAX_DIM =>
        {
            vertex_enumeration(lower, upper, a, b, cost_sum)
        }
        _ => augmented_lagrangian(instance, cost_sum),
    }
}

fn vertex_enumeration(
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
) -> Result<(DVector<f64>, f64)> {
    let n = lower.len();
    // halfspaces h·x ≤ r: functional rows, then x_i ≤ u_i and −x_i ≤ −l_i
    let mut rows: Vec<(DVector<f64>, f64)> = (0..a.nrows()).map(|k| (a.row(k).transpose(), b[k])).collect();
    for i in 0..n {
        let e = DVector::from_fn(n, |j, _| if j == i { 1.0 } else { 0.0 });
        rows.push((e.clone(), upper[i]));
        rows.push((-e, -lower[i]));
    }
    let feasible = |x: &DVector<f64>| {
        rows.iter()
            .all(|(h, r)| h.dot(x) - r <= FEAS_TOL * (1.0 + r.abs()))
    };

    let mut best: Option<(DVector<f64>, f64)> = None;
    for subset in combinations(rows.len(), n) {
        let m = DMatrix::from_fn(n, n, |i, j| rows[subset[i]].0[j]);
        let r = DVector::from_fn(n, |i, _| rows[subset[i]].1);
        let Some(x) = m.lu().solve(&r) else { continue };
        if !x.iter().all(|v| v.is_finite()) || !feasible(&x) {
            continue;
        }
        // snap to the box so vertices on its faces compare exactly
        let x = DVector::from_fn(n, |i, _| x[i].clamp(lower[i], upper[i]));
        let value = c.dot(&x);
        best = match best {
            None => Some((x, value)),
            Some((bx, bv)) => {
                let tie = 1e-12 * (1.0 + bv.abs());
                if value < bv - tie || (value <= bv + tie && lex_less(&x, &bx)) {
                    Some((x, value))
                } else {
                    Some((bx, bv))
                }
            }
        };
    }
    best.ok_or_else(|| Error::Infeasible("no vertex satisfies the constraints".into()))
}

fn lex_less(x: &DVector<f64>, y: &DVector<f64>) -> bool {
    for (a, b) in x.iter().zip(y.iter()) {
        if (a - b).abs() > 1e-12 {
            return a < b;
        }
    }
    false
}

fn combinations(total: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k > total {
        return out;
    }
    loop {
        out.push(idx.clone());
        let mut i = k;
        while i > 0 && idx[i - 1] == total - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Minimizes `cᵀx` over `X₀ ∩ {g ≤ 0}` with multiplier updates
/// `λ ← max{0, λ + ρ g(x)}` around projected-gradient inner solves.
fn augmented_lagrangian(instance: &ProblemInstance, c: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let set = instance.set();
    let g = instance.constraints();
    let m = instance.num_constraints();
    let anchor = match instance.slater_point() {
        Some(p) => p.clone(),
        None => crate::problem::estimate_slater(instance)
            .map(|(p, _)| p)
            .map_err(|_| Error::Infeasible("no strictly feasible point found".into()))?,
    };
    if max_entry(&g.eval(&anchor)) > 0.0 {
        return Err(Error::Infeasible("the reference point violates the constraints".into()));
    }

    let scale = c.norm().max(1.0);
    let mut rho = 10.0 * scale;
    let mut lambda = DVector::zeros(m);
    let mut x = anchor.clone();

    let lagrangian = |x: &DVector<f64>, lambda: &DVector<f64>, rho: f64| -> (f64, DVector<f64>) {
        let gx = g.eval(x);
        let shifted = DVector::from_fn(m, |k, _| (lambda[k] + rho * gx[k]).max(0.0));
        let value = c.dot(x) + (shifted.norm_squared() - lambda.norm_squared()) / (2.0 * rho);
        let grad = c + g.jacobian(x).transpose() * &shifted;
        (value, grad)
    };

    for _outer in 0..60 {
        let mut lip: f64 = 1.0;
        for _ in 0..5000 {
            let (fx, grad) = lagrangian(&x, &lambda, rho);
            let next = loop {
                let cand = set.project_unchecked(&(&x - &grad * (1.0 / lip)));
                let step = &cand - &x;
                let (fc, _) = lagrangian(&cand, &lambda, rho);
                if fc <= fx + grad.dot(&step) + 0.5 * lip * step.norm_squared() + 1e-15 * fx.abs().max(1.0)
                    || lip > 1e16
                {
                    break cand;
                }
                lip *= 2.0;
            };
            let moved = (&next - &x).norm();
            x = next;
            lip = (lip * 0.5).max(1e-8);
            if moved <= 1e-12 * (1.0 + x.norm()) {
                break;
            }
        }
        let gx = g.eval(&x);
        let prev = lambda.clone();
        lambda = DVector::from_fn(m, |k, _| (lambda[k] + rho * gx[k]).max(0.0));
        let viol = max_entry(&gx).max(0.0);
        if viol <= 1e-10 && (&lambda - &prev).norm() <= 1e-9 * (1.0 + lambda.norm()) {
            break;
        }
        if viol > 1e-8 {
            rho = (rho * 2.0).min(1e8 * scale);
        }
    }

    let x = restore_feasibility(g, &anchor, &x);
    let value = c.dot(&x);
    Ok((x, value))
}

/// The point on the segment from `anchor` (feasible) to `x` closest to `x`
/// that still satisfies `g ≤ 0`.
fn restore_feasibility(g: &ConstraintFunction, anchor: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
    let at = |s: f64| anchor + (x - anchor) * s;
    if max_entry(&g.eval(x)) <= 0.0 {
        return x.clone();
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if max_entry(&g.eval(&at(mid))) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::QuadraticConstraints;
    use std::sync::Arc;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn square_with(a: &[f64], b: &[f64]) -> ProblemInstance {
        let m = b.len();
        let g = ConstraintFunction::linear(DMatrix::from_row_slice(m, 2, a), v(b)).unwrap();
        ProblemInstance::new(SimpleSet::cube(2, -1.0, 1.0).unwrap(), g).unwrap()
    }

    #[test]
    fn sign_rule_without_binding_constraints() {
        let inst = square_with(&[0.0, 0.0], &[1.0]);
        let (x, val) = hindsight_optimum(&inst, &v(&[1.0, 1.0])).unwrap();
        assert_eq!(x, v(&[-1.0, -1.0]));
        assert_eq!(val, -2.0);
    }

    #[test]
    fn binding_line() {
        // −x₁ − x₂ − 1 ≤ 0
        let inst = square_with(&[-1.0, -1.0], &[1.0]);
        let (x, val) = hindsight_optimum(&inst, &v(&[1.0, 1.0])).unwrap();
        assert!((val + 1.0).abs() <= 1e-12);
        assert!((x[0] + x[1] + 1.0).abs() <= 1e-12);
        // lexicographic tie-break picks (−1, 0) over (0, −1)
        assert_eq!(x, v(&[-1.0, 0.0]));
    }

    #[test]
    fn zero_cost_returns_smallest_vertex() {
        let inst = square_with(&[1.0, 0.0], &[0.5]);
        let (x, val) = hindsight_optimum(&inst, &v(&[0.0, 0.0])).unwrap();
        assert_eq!(val, 0.0);
        assert_eq!(x, v(&[-1.0, -1.0]));
    }

    #[test]
    fn infeasible_polygon() {
        let inst = square_with(&[1.0, 0.0], &[-2.0]);
        assert!(matches!(hindsight_optimum(&inst, &v(&[1.0, 0.0])), Err(Error::Infeasible(_))));
    }

    #[test]
    fn generic_path_agrees_with_closed_form() {
        // unit disc constraint inside [−2, 2]²: optimum of (1, 1)ᵀx is −√2
        let q = QuadraticConstraints::new(vec![1.0], vec![v(&[0.0, 0.0])], vec![1.0]).unwrap();
        let g = ConstraintFunction::generic(Arc::new(q)).unwrap();
        let inst = ProblemInstance::new(SimpleSet::cube(2, -2.0, 2.0).unwrap(), g)
            .unwrap()
            .prepared(None)
            .unwrap();
        let (x, val) = hindsight_optimum(&inst, &v(&[1.0, 1.0])).unwrap();
        assert!((val + 2f64.sqrt()).abs() <= 1e-6, "{val}");
        assert!(inst.constraint_values(&x)[0] <= 0.0);
    }

    #[test]
    fn generic_path_matches_vertex_enumeration() {
        let a = [0.3, 0.8, 0.9, 0.1, 0.5, 0.5];
        let b = [0.4, 0.2, 0.3];
        let inst = square_with(&a, &b).prepared(None).unwrap();
        let c = v(&[-1.3, -0.4]);
        let (_, exact) = hindsight_optimum(&inst, &c).unwrap();
        let (x, approx) = augmented_lagrangian(&inst, &c).unwrap();
        assert!((exact - approx).abs() <= 1e-6, "{exact} {approx}");
        assert!(inst.constraint_values(&x).iter().all(|g| *g <= 0.0));
    }

    #[test]
    fn combinations_count() {
        assert_eq!(combinations(7, 2).len(), 21);
        assert_eq!(combinations(3, 3).len(), 1);
        assert!(combinations(2, 3).is_empty());
    }
}
