//! Small dense helpers that nalgebra does not provide directly.

use nalgebra::{DMatrix, DVector};

/// Largest singular value of `a`, by power iteration on `aᵀa`.
///
/// Several deterministic start vectors are tried so that a start vector
/// orthogonal to the leading eigenvector cannot produce a zero estimate.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return 0.0;
    }
    let ata = a.transpose() * a;
    let mut starts: Vec<DVector<f64>> = Vec::with_capacity(n + 1);
    starts.push(DVector::from_fn(n, |i, _| 1.0 + 0.618_033_988_75 * i as f64));
    for j in 0..n {
        starts.push(DVector::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 }));
    }
    let mut best = 0.0_f64;
    for start in starts {
        best = best.max(power_iteration(&ata, start));
    }
    best.sqrt()
}

fn power_iteration(m: &DMatrix<f64>, mut v: DVector<f64>) -> f64 {
    let norm = v.norm();
    if norm == 0.0 {
        return 0.0;
    }
    v /= norm;
    let mut lambda = 0.0_f64;
    for _ in 0..10_000 {
        let w = m * &v;
        let wn = w.norm();
        if wn == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / wn;
        if (next - lambda).abs() <= 1e-15 * next.abs().max(1e-300) {
            return next.max(lambda);
        }
        lambda = next;
    }
    lambda
}

/// `max_k v_k`, or `-inf` for an empty vector.
pub fn max_entry(v: &DVector<f64>) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub(crate) fn all_finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_has_unit_norm() {
        assert_relative_eq!(spectral_norm(&DMatrix::identity(3, 3)), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn start_vector_in_null_space() {
        // ones lies in the null space of [1 -1]
        let a = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        assert_relative_eq!(spectral_norm(&a), 2f64.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn matches_svd() {
        let a = DMatrix::from_row_slice(3, 2, &[0.3, 0.9, 0.1, 0.5, 0.7, 0.2]);
        let svd = a.clone().singular_values().max();
        assert_relative_eq!(spectral_norm(&a), svd, epsilon = 1e-10);
    }
}
