//! Early-terminating evaluation of the dual derivative psi(sigma).
//!
//! psi(sigma) = p^T (Q+sigma I)^{-2} p - r^2 equals the optimal value of the
//! concave maximization
//!
//!   max_z  -z^T (Q+sigma I)^2 z + 2 p^T z - r^2,
//!
//! and conjugate-gradient ascent on it is monotone, so every iterate's
//! objective is a certified lower bound on psi(sigma). The probe exits with
//! `ProvedPositive` the moment that bound crosses the threshold, which is
//! what makes scanning near the pole affordable: no accurate solve is ever
//! needed left of the root.

use thiserror::Error;

use crate::matrix::{MatrixError, SymMatrix};
use crate::vecops::{axpy, dot, norm};

#[derive(Debug, Clone, PartialEq)]
pub enum ProbeResult {
    /// The ascent objective exceeded the threshold: psi(sigma) > threshold.
    ProvedPositive,
    /// Converged; the carried value is psi(sigma) up to the solve tolerance.
    Value(f64),
}

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("non-finite arithmetic at sigma = {sigma}; evaluation too close to the pole")]
    PoleProximity { sigma: f64 },
    #[error("probe did not converge in {max_iter} iterations at sigma = {sigma} (objective bound {best:.3e})")]
    IterationCap { sigma: f64, max_iter: usize, best: f64 },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Probe psi(sigma) for the problem data `(q, p, r)`.
///
/// Runs CG on `(Q+sigma I)^2 z = p`, tracking the ascent objective. Returns
/// `ProvedPositive` once the objective exceeds `threshold` (>= 0), otherwise
/// converges and returns `Value(psi)` with the value recomputed from the
/// final iterate.
pub fn psi_probe(
    q: &SymMatrix,
    sigma: f64,
    p: &[f64],
    r: f64,
    threshold: f64,
    tol: f64,
    max_iter: usize,
) -> Result<ProbeResult, ProbeError> {
    let n = q.n();
    if p.len() != n {
        return Err(MatrixError::DimensionMismatch { got: p.len(), want: n }.into());
    }
    let b_norm = norm(p);
    if b_norm == 0.0 {
        return Ok(ProbeResult::Value(-r * r));
    }
    let target = tol * b_norm;

    let apply = |v: &[f64], tmp: &mut Vec<f64>, out: &mut Vec<f64>| -> Result<(), MatrixError> {
        q.shifted_matvec_into(sigma, v, tmp)?;
        q.shifted_matvec_into(sigma, tmp, out)
    };

    let mut z = vec![0.0; n];
    let mut res = p.to_vec();
    let mut d = res.clone();
    let mut rr = dot(&res, &res);
    let mut tmp = vec![0.0; n];
    let mut ad = vec![0.0; n];

    // Objective m(z) = -z^T A z + 2 p^T z - r^2 tracked incrementally:
    // each CG step raises it by alpha * ||res||^2.
    let mut objective = -r * r;

    for _ in 0..max_iter {
        apply(&d, &mut tmp, &mut ad)?;
        let curvature = dot(&d, &ad);
        if !curvature.is_finite() {
            return Err(ProbeError::PoleProximity { sigma });
        }
        if curvature <= 0.0 {
            // A = G^2 is positive semidefinite; a nonpositive curvature means
            // d is numerically in the null space. The iterate cannot improve.
            return finish(q, sigma, &z, p, r, &mut tmp, &mut ad);
        }
        let alpha = rr / curvature;
        axpy(alpha, &d, &mut z);
        axpy(-alpha, &ad, &mut res);
        objective += alpha * rr;

        if !objective.is_finite() {
            return Err(ProbeError::PoleProximity { sigma });
        }
        if objective > threshold {
            return Ok(ProbeResult::ProvedPositive);
        }
        let rr_next = dot(&res, &res);
        if rr_next.sqrt() <= target {
            return finish(q, sigma, &z, p, r, &mut tmp, &mut ad);
        }
        let beta = rr_next / rr;
        rr = rr_next;
        for i in 0..n {
            d[i] = res[i] + beta * d[i];
        }
    }

    Err(ProbeError::IterationCap {
        sigma,
        max_iter,
        best: objective,
    })
}

/// Recompute the objective exactly from the final iterate.
fn finish(
    q: &SymMatrix,
    sigma: f64,
    z: &[f64],
    p: &[f64],
    r: f64,
    tmp: &mut Vec<f64>,
    gz: &mut Vec<f64>,
) -> Result<ProbeResult, ProbeError> {
    q.shifted_matvec_into(sigma, z, tmp)?;
    gz.copy_from_slice(tmp);
    let value = -dot(gz, gz) + 2.0 * dot(p, z) - r * r;
    if !value.is_finite() {
        return Err(ProbeError::PoleProximity { sigma });
    }
    Ok(ProbeResult::Value(value))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_matrix() -> SymMatrix {
        SymMatrix::from_diagonal(&[-1.0, 1.0]).unwrap()
    }

    #[test]
    fn converged_value_left_of_pole_block() {
        // p has no component on the troublesome eigendirection, so the probe
        // converges on the complement even though sigma < -lambda_1.
        let q = example_matrix();
        let r = psi_probe(&q, 0.5, &[0.0, -3.0], 1.0, f64::INFINITY, 1e-13, 50).unwrap();
        match r {
            ProbeResult::Value(v) => assert!((v - 3.0).abs() < 1e-9, "psi = {v}"),
            other => panic!("expected a value, got {other:?}"),
        }
    }

    #[test]
    fn converged_value_at_the_root() {
        let q = example_matrix();
        let r = psi_probe(&q, 2.0, &[0.0, -3.0], 1.0, f64::INFINITY, 1e-13, 50).unwrap();
        match r {
            ProbeResult::Value(v) => assert!(v.abs() < 1e-9, "psi = {v}"),
            other => panic!("expected a value, got {other:?}"),
        }
    }

    #[test]
    fn pole_proximity_proves_positive() {
        let q = example_matrix();
        let r = psi_probe(&q, 1.0 + 1e-8, &[0.5, -1.8], 1.0, 0.0, 1e-13, 50).unwrap();
        assert_eq!(r, ProbeResult::ProvedPositive);
    }

    #[test]
    fn zero_rhs_value_is_minus_r_squared() {
        let q = example_matrix();
        let r = psi_probe(&q, 5.0, &[0.0, 0.0], 2.0, 0.0, 1e-13, 50).unwrap();
        assert_eq!(r, ProbeResult::Value(-4.0));
    }

    #[test]
    fn value_matches_two_solve_route() {
        // Cross-check the probe against psi computed from (Q+sigma I)^{-1} p.
        use crate::cg::shifted_solve;
        use crate::vecops::norm_sq;
        use rand::{Rng, SeedableRng};
        for seed in 0..10u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(2..25usize);
            let mut entries = Vec::new();
            for i in 0..n {
                for j in 0..=i {
                    entries.push((i, j, rng.gen_range(-1.0..1.0)));
                }
            }
            let q = SymMatrix::from_triplets(n, &entries).unwrap();
            let sigma = q.gershgorin_bound() + rng.gen_range(0.5..2.0);
            let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let r = rng.gen_range(0.5..3.0);
            let tol = 1e-12;
            let probe = psi_probe(&q, sigma, &p, r, f64::INFINITY, tol, 10 * n + 100).unwrap();
            let x = shifted_solve(&q, sigma, &p, tol, 10 * n + 100).unwrap();
            let direct = norm_sq(&x) - r * r;
            match probe {
                ProbeResult::Value(v) => {
                    assert!(
                        (v - direct).abs() <= 10.0 * tol * (1.0 + direct.abs()),
                        "probe {v} vs direct {direct}"
                    );
                }
                other => panic!("expected value, got {other:?}"),
            }
        }
    }
}
