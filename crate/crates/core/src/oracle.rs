//! Exact small-scale reference path through a full eigendecomposition.
//!
//! Everything the matrix-free solver estimates, this module computes
//! exactly (at dense cost): the diagonalized dual, the existence condition,
//! the unique secular root when it exists, and the full global solution set
//! including the hard-case family. It exists to certify the solver, not to
//! compete with it.

use thiserror::Error;

use crate::matrix::SymMatrix;
use crate::solver::perturbation_bound;
use crate::vecops::{dot, norm};

/// Largest dimension the oracle will decompose by default.
pub const DEFAULT_ORACLE_LIMIT: usize = 2000;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("dimension {n} exceeds the oracle limit {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("Jacobi sweep budget exhausted before the off-diagonal vanished")]
    NoConvergence,
}

/// Full eigendecomposition Q = U diag(lambdas) U^T with eigenvalues sorted
/// nondecreasing and `k` the multiplicity of the smallest one.
#[derive(Debug, Clone)]
pub struct OracleDecomposition {
    pub lambdas: Vec<f64>,
    /// Row-major n x n matrix whose columns are the eigenvectors.
    u: Vec<f64>,
    n: usize,
    /// Multiplicity of lambda_1 under the relative grouping tolerance.
    pub k: usize,
}

impl OracleDecomposition {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Column `j` of U (the j-th eigenvector).
    pub fn eigenvector(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.u[i * self.n + j]).collect()
    }

    /// Rotate a vector into the eigenbasis: returns U^T v.
    pub fn rotate(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.u[i * self.n + j] * v[i]).sum())
            .collect()
    }

    /// Rotate back: returns U w.
    pub fn rotate_back(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.n);
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.u[i * self.n + j] * w[j]).sum())
            .collect()
    }

    /// max |U^T U - I|, for the orthogonality invariant.
    pub fn orthogonality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..self.n {
            for b in a..self.n {
                let mut s = 0.0;
                for i in 0..self.n {
                    s += self.u[i * self.n + a] * self.u[i * self.n + b];
                }
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }

    /// max |U diag(lambdas) U^T - Q|, for the reconstruction invariant.
    pub fn reconstruction_defect(&self, q: &SymMatrix) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..=i {
                let mut s = 0.0;
                for m in 0..n {
                    s += self.lambdas[m] * self.u[i * n + m] * self.u[j * n + m];
                }
                worst = worst.max((s - q.get(i, j)).abs());
            }
        }
        worst
    }
}

/// Full symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn eig_full(q: &SymMatrix) -> Result<OracleDecomposition, OracleError> {
    eig_full_limited(q, DEFAULT_ORACLE_LIMIT)
}

/// As [`eig_full`] with an explicit size limit.
pub fn eig_full_limited(q: &SymMatrix, limit: usize) -> Result<OracleDecomposition, OracleError> {
    let n = q.n();
    if n > limit {
        return Err(OracleError::TooLarge { n, limit });
    }

    // Dense working copy (full square) and accumulated rotations.
    let mut a = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = q.get(i, j);
        }
    }
    let mut u = vec![0.0f64; n * n];
    for i in 0..n {
        u[i * n + i] = 1.0;
    }

    let scale = (0..n)
        .map(|i| (0..n).map(|j| a[i * n + j].abs()).fold(0.0, f64::max))
        .fold(1.0f64, f64::max);
    let stop = 1e-14 * scale;

    let max_sweeps = 64;
    let mut converged = false;
    for _ in 0..max_sweeps {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(a[i * n + j].abs());
            }
        }
        if off <= stop {
            converged = true;
            break;
        }
        for p in 0..n {
            for q_idx in (p + 1)..n {
                let apq = a[p * n + q_idx];
                if apq.abs() <= stop * 1e-2 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q_idx * n + q_idx];
                // Classic stable rotation angle.
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for i in 0..n {
                    let aip = a[i * n + p];
                    let aiq = a[i * n + q_idx];
                    a[i * n + p] = c * aip - s * aiq;
                    a[i * n + q_idx] = s * aip + c * aiq;
                }
                for j in 0..n {
                    let apj = a[p * n + j];
                    let aqj = a[q_idx * n + j];
                    a[p * n + j] = c * apj - s * aqj;
                    a[q_idx * n + j] = s * apj + c * aqj;
                }
                for i in 0..n {
                    let uip = u[i * n + p];
                    let uiq = u[i * n + q_idx];
                    u[i * n + p] = c * uip - s * uiq;
                    u[i * n + q_idx] = s * uip + c * uiq;
                }
            }
        }
    }
    if !converged {
        // One final check; tiny matrices can land exactly on the budget.
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(a[i * n + j].abs());
            }
        }
        if off > stop * 10.0 {
            return Err(OracleError::NoConvergence);
        }
    }

    // Sort eigenpairs ascending.
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    order.sort_by(|&x, &y| diag[x].partial_cmp(&diag[y]).expect("finite eigenvalues"));
    let lambdas: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut u_sorted = vec![0.0f64; n * n];
    for (new_col, &old_col) in order.iter().enumerate() {
        for i in 0..n {
            u_sorted[i * n + new_col] = u[i * n + old_col];
        }
    }

    let group_tol = 1e-10 * (1.0 + lambdas[0].abs());
    let k = lambdas
        .iter()
        .take_while(|&&l| (l - lambdas[0]).abs() <= group_tol)
        .count();

    Ok(OracleDecomposition {
        lambdas,
        u: u_sorted,
        n,
        k,
    })
}

/// The exact existence condition for a dual critical point right of the pole.
///
/// Returns (holds, head sum of squares, tail sum), where
/// head = sum_{i<=k} fhat_i^2 and tail = sum_{i>k} fhat_i^2/(lambda_i-lambda_1)^2;
/// the condition holds iff head != 0 or tail > r^2.
pub fn existence_condition(
    dec: &OracleDecomposition,
    f: &[f64],
    r: f64,
) -> (bool, f64, f64) {
    let fhat = dec.rotate(f);
    let head: f64 = fhat[..dec.k].iter().map(|v| v * v).sum();
    let lam1 = dec.lambdas[0];
    let tail: f64 = (dec.k..dec.n)
        .map(|i| {
            let gap = dec.lambdas[i] - lam1;
            (fhat[i] / gap) * (fhat[i] / gap)
        })
        .sum();
    let holds = head > 1e-20 || tail > r * r;
    (holds, head, tail)
}

/// Dual function evaluated termwise in the eigenbasis.
pub fn dual_diag(dec: &OracleDecomposition, f: &[f64], r: f64, sigma: f64) -> f64 {
    let fhat = dec.rotate(f);
    let head: f64 = fhat[..dec.k].iter().map(|v| v * v).sum();
    let mut value = -head / (dec.lambdas[0] + sigma);
    for i in dec.k..dec.n {
        value -= fhat[i] * fhat[i] / (dec.lambdas[i] + sigma);
    }
    value - r * r * sigma
}

/// psi in the eigenbasis: sum_i fhat_i^2/(lambda_i+sigma)^2 - r^2.
pub fn psi_diag(dec: &OracleDecomposition, fhat: &[f64], r: f64, sigma: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..dec.n {
        let d = dec.lambdas[i] + sigma;
        s += (fhat[i] / d) * (fhat[i] / d);
    }
    s - r * r
}

/// Unique root of psi in (-lambda_1, +inf) when the existence condition
/// holds; `None` otherwise. Safeguarded bisection to 1e-14 interval width.
pub fn secular_solve(dec: &OracleDecomposition, f: &[f64], r: f64) -> Option<f64> {
    let (holds, _, _) = existence_condition(dec, f, r);
    if !holds {
        return None;
    }
    let fhat = dec.rotate(f);
    let pole = -dec.lambdas[0];

    // Left end: at the pole itself when the head vanishes (psi is finite
    // there), else just right of it, shrinking until psi is positive.
    let mut lo = pole;
    if psi_diag(dec, &fhat, r, lo).is_nan() || psi_diag(dec, &fhat, r, lo) <= 0.0 {
        let mut off = 1e-8 * (1.0 + pole.abs());
        for _ in 0..600 {
            if psi_diag(dec, &fhat, r, pole + off) > 0.0 {
                break;
            }
            off *= 0.5;
            if off < f64::MIN_POSITIVE {
                return Some(pole);
            }
        }
        lo = pole + off;
    }
    let mut hi = pole + norm(&fhat) / r + 1e-8 * (1.0 + pole.abs());
    debug_assert!(psi_diag(dec, &fhat, r, hi) < 0.0);

    let width_tol = 1e-14 * (1.0 + hi.abs());
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if psi_diag(dec, &fhat, r, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= width_tol {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// One member of the global solution set.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub x: Vec<f64>,
    pub sigma: f64,
    pub value: f64,
}

/// The exact global solution set.
#[derive(Debug, Clone)]
pub struct GlobalSolutions {
    pub sigma: f64,
    pub value: f64,
    /// One entry for interior/easy cases; the hard-case family is reported
    /// through its representatives plus the family record below.
    pub representatives: Vec<OracleSolution>,
    /// Hard case only: (x0, tau, lambda_1-eigenbasis columns); the solution
    /// set is { x0 + tau w : w unit, w in span(basis) }.
    pub family: Option<HardFamily>,
}

#[derive(Debug, Clone)]
pub struct HardFamily {
    pub x0: Vec<f64>,
    pub tau: f64,
    pub basis: Vec<Vec<f64>>,
}

impl GlobalSolutions {
    /// Distance from `x` to the nearest global solution.
    pub fn distance_to_nearest(&self, x: &[f64]) -> f64 {
        match &self.family {
            None => self
                .representatives
                .iter()
                .map(|s| dist(x, &s.x))
                .fold(f64::INFINITY, f64::min),
            Some(fam) => {
                // Nearest point on { x0 + tau w : w in span(basis), |w| = 1 }.
                let d: Vec<f64> = x.iter().zip(&fam.x0).map(|(a, b)| a - b).collect();
                let mut in_span = vec![0.0; d.len()];
                for b in &fam.basis {
                    let c = dot(&d, b);
                    for i in 0..in_span.len() {
                        in_span[i] += c * b[i];
                    }
                }
                let span_norm = norm(&in_span);
                if span_norm == 0.0 {
                    // Equidistant from the whole family.
                    let off: f64 = norm(&d);
                    return (off * off + fam.tau * fam.tau).sqrt();
                }
                let mut residual = 0.0;
                for i in 0..d.len() {
                    let perp = d[i] - in_span[i];
                    residual += perp * perp;
                }
                let radial = span_norm - fam.tau;
                (residual + radial * radial).sqrt()
            }
        }
    }
}

/// Exact global solutions by case analysis on the diagonalized problem.
pub fn global_solutions(dec: &OracleDecomposition, f: &[f64], r: f64) -> GlobalSolutions {
    let fhat = dec.rotate(f);
    let lam1 = dec.lambdas[0];

    // Interior: Q positive definite and the unconstrained minimizer inside.
    if lam1 > 0.0 {
        let psi0 = psi_diag(dec, &fhat, r, 0.0);
        if psi0 <= 0.0 {
            let xhat: Vec<f64> = (0..dec.n).map(|i| fhat[i] / dec.lambdas[i]).collect();
            let x = dec.rotate_back(&xhat);
            let value = value_diag(dec, &fhat, &xhat);
            return GlobalSolutions {
                sigma: 0.0,
                value,
                representatives: vec![OracleSolution { x, sigma: 0.0, value }],
                family: None,
            };
        }
    }

    if let Some(sigma) = secular_solve(dec, f, r) {
        if sigma >= 0.0 {
            let xhat: Vec<f64> = (0..dec.n)
                .map(|i| fhat[i] / (dec.lambdas[i] + sigma))
                .collect();
            let x = dec.rotate_back(&xhat);
            let value = value_diag(dec, &fhat, &xhat);
            return GlobalSolutions {
                sigma,
                value,
                representatives: vec![OracleSolution { x, sigma, value }],
                family: None,
            };
        }
        // Root left of zero: the KKT multiplier clamps to zero (interior).
        let xhat: Vec<f64> = (0..dec.n).map(|i| fhat[i] / dec.lambdas[i]).collect();
        let x = dec.rotate_back(&xhat);
        let value = value_diag(dec, &fhat, &xhat);
        return GlobalSolutions {
            sigma: 0.0,
            value,
            representatives: vec![OracleSolution { x, sigma: 0.0, value }],
            family: None,
        };
    }

    // Hard case: sigma = -lambda_1, base point through the pseudo-inverse
    // (lambda_1-eigenspace zeroed), free radius on that eigenspace.
    let sigma = -lam1;
    let mut xhat = vec![0.0; dec.n];
    for i in dec.k..dec.n {
        xhat[i] = fhat[i] / (dec.lambdas[i] + sigma);
    }
    let x0 = dec.rotate_back(&xhat);
    let x0_norm_sq: f64 = xhat.iter().map(|v| v * v).sum();
    let tau = (r * r - x0_norm_sq).max(0.0).sqrt();
    let basis: Vec<Vec<f64>> = (0..dec.k).map(|j| dec.eigenvector(j)).collect();

    let mut plus_hat = xhat.clone();
    plus_hat[0] += tau;
    let mut minus_hat = xhat;
    minus_hat[0] -= tau;
    let value = value_diag(dec, &fhat, &plus_hat);
    let reps = vec![
        OracleSolution {
            x: dec.rotate_back(&plus_hat),
            sigma,
            value,
        },
        OracleSolution {
            x: dec.rotate_back(&minus_hat),
            sigma,
            value,
        },
    ];
    let x0_for_family = x0;
    GlobalSolutions {
        sigma,
        value,
        representatives: reps,
        family: Some(HardFamily {
            x0: x0_for_family,
            tau,
            basis,
        }),
    }
}

/// Theorem-4.1 bound fed with exact spectral data.
pub fn theorem41_bound(dec: &OracleDecomposition, f: &[f64], r: f64, eps: f64) -> f64 {
    let (_, _, tail) = existence_condition(dec, f, r);
    let lambda2 = if dec.k < dec.n {
        dec.lambdas[dec.k]
    } else {
        dec.lambdas[dec.n - 1]
    };
    perturbation_bound(dec.lambdas[0], lambda2, tail, r, eps)
}

/// Objective in the eigenbasis: xhat^T diag(lambdas) xhat - 2 fhat.xhat.
fn value_diag(dec: &OracleDecomposition, fhat: &[f64], xhat: &[f64]) -> f64 {
    let mut v = 0.0;
    for i in 0..dec.n {
        v += dec.lambdas[i] * xhat[i] * xhat[i] - 2.0 * fhat[i] * xhat[i];
    }
    v
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
