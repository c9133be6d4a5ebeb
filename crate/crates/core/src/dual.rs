//! The one-dimensional canonical dual of the ball-constrained quadratic
//! program, its derivatives, primal recovery, and KKT residuals.
//!
//! For problem data (Q, f, r) and a (possibly perturbed) linear term p, the
//! dual function is
//!
//!   d(sigma) = -p^T (Q+sigma I)^{-1} p - r^2 sigma,
//!
//! concave right of the pole at -lambda_1. Its derivative
//! psi(sigma) = ||(Q+sigma I)^{-1} p||^2 - r^2 is strictly decreasing and
//! strictly convex there, so the critical point is the unique zero of psi.
//! Everything here reduces to shifted conjugate-gradient solves; no inverse
//! or factorization is ever formed.

use serde::Serialize;
use thiserror::Error;

use crate::cg::{shifted_solve_with, CgError, CgSettings};
use crate::lanczos::SpectralEstimate;
use crate::matrix::SymMatrix;
use crate::vecops::{all_finite, dot, norm, norm_sq};

/// The problem data: minimize x^T Q x - 2 f^T x over ||x|| <= r.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    q: SymMatrix,
    f: Vec<f64>,
    r: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("linear term has a non-finite entry")]
    NonFiniteLinear,
    #[error("linear term length {got} does not match dimension {want}")]
    DimensionMismatch { got: usize, want: usize },
}

impl ProblemInstance {
    pub fn new(q: SymMatrix, f: Vec<f64>, r: f64) -> Result<Self, ProblemError> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(ProblemError::BadRadius(r));
        }
        if f.len() != q.n() {
            return Err(ProblemError::DimensionMismatch {
                got: f.len(),
                want: q.n(),
            });
        }
        if !all_finite(&f) {
            return Err(ProblemError::NonFiniteLinear);
        }
        Ok(Self { q, f, r })
    }

    pub fn q(&self) -> &SymMatrix {
        &self.q
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn dim(&self) -> usize {
        self.q.n()
    }
}

/// A psi evaluation together with the solve vector that produced it, so the
/// final bisection iterate hands back the primal point for free.
#[derive(Debug, Clone)]
pub struct PsiValue {
    pub value: f64,
    /// x(sigma) = (Q + sigma I)^{-1} p
    pub x: Vec<f64>,
}

/// Residuals of the KKT system at (x, sigma).
#[derive(Debug, Clone, Serialize)]
pub struct KktReport {
    /// ||(Q + sigma I) x - f||
    pub stationarity: f64,
    /// max(0, ||x|| - r)
    pub feasibility: f64,
    /// max(0, -sigma)
    pub dual_feas_sigma: f64,
    /// lambda1_est + sigma; nonnegative up to tolerance certifies
    /// Q + sigma I positive semidefinite without a factorization.
    pub curvature_cert: f64,
    /// |sigma * (||x|| - r)|
    pub complementarity: f64,
}

/// Evaluate the dual function at sigma via one shifted solve.
pub fn eval_dual(
    prob: &ProblemInstance,
    p: &[f64],
    sigma: f64,
    cg: &CgSettings,
) -> Result<f64, CgError> {
    let x = shifted_solve_with(prob.q(), sigma, p, cg)?;
    Ok(-dot(p, &x) - prob.r() * prob.r() * sigma)
}

/// Evaluate psi(sigma), keeping the solve vector.
pub fn eval_psi_with_vector(
    prob: &ProblemInstance,
    p: &[f64],
    sigma: f64,
    cg: &CgSettings,
) -> Result<PsiValue, CgError> {
    let x = shifted_solve_with(prob.q(), sigma, p, cg)?;
    let value = norm_sq(&x) - prob.r() * prob.r();
    Ok(PsiValue { value, x })
}

/// Evaluate psi(sigma) alone.
pub fn eval_psi(
    prob: &ProblemInstance,
    p: &[f64],
    sigma: f64,
    cg: &CgSettings,
) -> Result<f64, CgError> {
    Ok(eval_psi_with_vector(prob, p, sigma, cg)?.value)
}

/// First and second derivatives of psi:
/// psi'  = -2 p^T G^{-3} p  (negative for p != 0),
/// psi'' =  6 p^T G^{-4} p  (positive for p != 0),
/// computed from two shifted solves as -2 x1.x2 and 6 ||x2||^2.
pub fn eval_psi_derivs(
    prob: &ProblemInstance,
    p: &[f64],
    sigma: f64,
    cg: &CgSettings,
) -> Result<(f64, f64), CgError> {
    if norm(p) == 0.0 {
        return Ok((0.0, 0.0));
    }
    let x1 = shifted_solve_with(prob.q(), sigma, p, cg)?;
    let x2 = shifted_solve_with(prob.q(), sigma, &x1, cg)?;
    Ok((-2.0 * dot(&x1, &x2), 6.0 * norm_sq(&x2)))
}

/// Recover the primal candidate x = (Q + sigma I)^{-1} p.
pub fn recover_primal(
    prob: &ProblemInstance,
    p: &[f64],
    sigma: f64,
    cg: &CgSettings,
) -> Result<Vec<f64>, CgError> {
    shifted_solve_with(prob.q(), sigma, p, cg)
}

/// Primal objective x^T Q x - 2 f^T x under the instance's own linear term.
pub fn primal_value(prob: &ProblemInstance, x: &[f64]) -> f64 {
    primal_value_with(prob, prob.f(), x)
}

/// Primal objective under an explicit linear term (the perturbed p).
pub fn primal_value_with(prob: &ProblemInstance, p: &[f64], x: &[f64]) -> f64 {
    let qx = prob.q().matvec(x).expect("dimension checked at construction");
    dot(x, &qx) - 2.0 * dot(p, x)
}

/// |P_p(x) - d(sigma)| under the same linear term p on both sides.
pub fn duality_gap(
    prob: &ProblemInstance,
    p: &[f64],
    sigma: f64,
    x: &[f64],
    cg: &CgSettings,
) -> Result<f64, CgError> {
    let primal = primal_value_with(prob, p, x);
    let dual = eval_dual(prob, p, sigma, cg)?;
    Ok((primal - dual).abs())
}

/// KKT residuals of (x, sigma) for the unperturbed problem.
pub fn kkt_report(
    prob: &ProblemInstance,
    sigma: f64,
    x: &[f64],
    spectral: &SpectralEstimate,
) -> KktReport {
    let mut gx = vec![0.0; prob.dim()];
    prob.q()
        .shifted_matvec_into(sigma, x, &mut gx)
        .expect("dimension checked at construction");
    let mut resid = 0.0;
    for i in 0..prob.dim() {
        let d = gx[i] - prob.f()[i];
        resid += d * d;
    }
    let x_norm = norm(x);
    KktReport {
        stationarity: resid.sqrt(),
        feasibility: (x_norm - prob.r()).max(0.0),
        dual_feas_sigma: (-sigma).max(0.0),
        curvature_cert: spectral.lambda1_est + sigma,
        complementarity: (sigma * (x_norm - prob.r())).abs(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example2() -> ProblemInstance {
        let q = SymMatrix::from_diagonal(&[-1.0, 1.0]).unwrap();
        ProblemInstance::new(q, vec![0.0, -3.0], 1.0).unwrap()
    }

    fn cg() -> CgSettings {
        CgSettings::default()
    }

    #[test]
    fn rejects_bad_radius() {
        let q = SymMatrix::identity(2);
        assert_eq!(
            ProblemInstance::new(q.clone(), vec![0.0, 0.0], 0.0).unwrap_err(),
            ProblemError::BadRadius(0.0)
        );
        assert!(ProblemInstance::new(q, vec![0.0, 0.0], -1.0).is_err());
    }

    #[test]
    fn dual_value_example2() {
        let prob = example2();
        let d = eval_dual(&prob, &[0.0, -3.0], 2.0, &cg()).unwrap();
        assert!((d + 5.0).abs() < 1e-10, "dual = {d}");
    }

    #[test]
    fn dual_value_zero_linear_term() {
        let q = SymMatrix::identity(3);
        let prob = ProblemInstance::new(q, vec![0.0; 3], 1.0).unwrap();
        let d = eval_dual(&prob, &[0.0; 3], 3.0, &cg()).unwrap();
        assert_eq!(d, -3.0);
    }

    #[test]
    fn dual_equals_primal_at_perturbed_critical_point() {
        // Critical point of the perturbed dual for p = (0.5, -1.8).
        let q = SymMatrix::from_diagonal(&[-1.0, 1.0]).unwrap();
        let prob = ProblemInstance::new(q, vec![0.0, -1.8], 1.0).unwrap();
        let p = [0.5, -1.8];
        let sigma = 1.676;
        let d = eval_dual(&prob, &p, sigma, &cg()).unwrap();
        let x = recover_primal(&prob, &p, sigma, &cg()).unwrap();
        assert!((x[0] - 0.74).abs() < 1e-3 && (x[1] + 0.673).abs() < 1e-3);
        let pv = primal_value_with(&prob, &p, &x);
        assert!((d - pv).abs() < 1e-3, "gap {}", (d - pv).abs());
    }

    #[test]
    fn psi_root_example2() {
        let prob = example2();
        let psi = eval_psi(&prob, &[0.0, -3.0], 2.0, &cg()).unwrap();
        assert!(psi.abs() < 1e-10);
    }

    #[test]
    fn psi_at_critical_point_of_perturbed_example1() {
        let q = SymMatrix::from_diagonal(&[-1.0, 1.0]).unwrap();
        let prob = ProblemInstance::new(q, vec![0.0, -1.8], 1.0).unwrap();
        let psi = eval_psi(&prob, &[0.5, -1.8], 1.676, &cg()).unwrap();
        assert!(psi.abs() < 1e-3, "psi = {psi}");
    }

    #[test]
    fn psi_zero_linear_term_is_minus_r_squared() {
        let q = SymMatrix::identity(2);
        let prob = ProblemInstance::new(q, vec![0.0, 0.0], 1.0).unwrap();
        for sigma in [0.0, 0.5, 3.0] {
            let psi = eval_psi(&prob, &[0.0, 0.0], sigma, &cg()).unwrap();
            assert_eq!(psi, -1.0);
        }
    }

    #[test]
    fn psi_derivs_closed_form_example2() {
        let prob = example2();
        let (d1, d2) = eval_psi_derivs(&prob, &[0.0, -3.0], 2.0, &cg()).unwrap();
        assert!((d1 + 2.0 / 3.0).abs() < 1e-10, "psi' = {d1}");
        assert!((d2 - 2.0 / 3.0).abs() < 1e-10, "psi'' = {d2}");
    }

    #[test]
    fn psi_derivs_zero_vector() {
        let prob = example2();
        let (d1, d2) = eval_psi_derivs(&prob, &[0.0, 0.0], 2.0, &cg()).unwrap();
        assert_eq!((d1, d2), (0.0, 0.0));
    }

    #[test]
    fn psi_deriv_matches_finite_difference() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 8;
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..=i {
                entries.push((i, j, rng.gen_range(-1.0..1.0)));
            }
        }
        let q = SymMatrix::from_triplets(n, &entries).unwrap();
        let shift = q.gershgorin_bound() + 1.0;
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let prob = ProblemInstance::new(q, f.clone(), 1.5).unwrap();
        let sigma = shift + 1.0;
        let h = 1e-5;
        let (d1, _) = eval_psi_derivs(&prob, &f, sigma, &cg()).unwrap();
        let hi = eval_psi(&prob, &f, sigma + h, &cg()).unwrap();
        let lo = eval_psi(&prob, &f, sigma - h, &cg()).unwrap();
        let fd = (hi - lo) / (2.0 * h);
        assert!(
            (d1 - fd).abs() <= 1e-5 * (1.0 + d1.abs()),
            "psi' {d1} vs fd {fd}"
        );
    }

    #[test]
    fn recover_primal_examples() {
        let q = SymMatrix::from_diagonal(&[-1.0, 1.0]).unwrap();
        let prob = ProblemInstance::new(q, vec![0.0, -1.8], 1.0).unwrap();
        let x = recover_primal(&prob, &[0.5, -1.8], 1.676, &cg()).unwrap();
        assert!((x[0] - 0.74).abs() < 1e-3 && (x[1] + 0.673).abs() < 1e-3);
        let x = recover_primal(&prob, &[0.01, -1.8], 1.022, &cg()).unwrap();
        assert!((x[0] - 0.456).abs() < 1e-3 && (x[1] + 0.89).abs() < 1e-3);
        let x = recover_primal(&prob, &[0.0, -3.0], 2.0, &cg()).unwrap();
        assert!(x[0].abs() < 1e-12 && (x[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn gap_and_kkt_at_analytic_solution() {
        let prob = example2();
        let x = [0.0, -1.0];
        let gap = duality_gap(&prob, &[0.0, -3.0], 2.0, &x, &cg()).unwrap();
        assert!(gap < 1e-10);
        let spectral = SpectralEstimate {
            lambda1_est: -1.0,
            u1_est: vec![1.0, 0.0],
            residual: 0.0,
            iterations: 2,
        };
        let report = kkt_report(&prob, 2.0, &x, &spectral);
        assert!(report.stationarity < 1e-10);
        assert!(report.feasibility < 1e-10);
        assert_eq!(report.dual_feas_sigma, 0.0);
        assert!(report.complementarity < 1e-10);
        assert!((report.curvature_cert - 1.0).abs() < 1e-12);
    }

    #[test]
    fn origin_optimum_of_homogeneous_convex_case() {
        let q = SymMatrix::identity(2);
        let prob = ProblemInstance::new(q, vec![0.0, 0.0], 1.0).unwrap();
        let x = [0.0, 0.0];
        let gap = duality_gap(&prob, &[0.0, 0.0], 0.0, &x, &cg()).unwrap();
        assert_eq!(gap, 0.0);
        let spectral = SpectralEstimate {
            lambda1_est: 1.0,
            u1_est: vec![1.0, 0.0],
            residual: 0.0,
            iterations: 2,
        };
        let report = kkt_report(&prob, 0.0, &x, &spectral);
        assert_eq!(report.stationarity, 0.0);
        assert_eq!(report.feasibility, 0.0);
        assert_eq!(report.dual_feas_sigma, 0.0);
        assert_eq!(report.complementarity, 0.0);
    }

    #[test]
    fn example1_unperturbed_gap_at_boundary_solution() {
        // A true hard-case solution: x = (sqrt(0.19), -0.9), sigma = 1.
        let q = SymMatrix::from_diagonal(&[-1.0, 1.0]).unwrap();
        let prob = ProblemInstance::new(q, vec![0.0, -1.8], 1.0).unwrap();
        let x = [0.19f64.sqrt(), -0.9];
        let pv = primal_value(&prob, &x);
        assert!((pv + 2.62).abs() < 1e-12);
        let spectral = SpectralEstimate {
            lambda1_est: -1.0,
            u1_est: vec![1.0, 0.0],
            residual: 0.0,
            iterations: 2,
        };
        let report = kkt_report(&prob, 1.0, &x, &spectral);
        assert!(report.stationarity < 1e-12);
        assert!(report.complementarity < 1e-3);
    }
}
