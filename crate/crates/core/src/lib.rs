//! Global minimization of a quadratic over a Euclidean ball (the trust-region
//! subproblem) through its one-dimensional concave dual.
//!
//! The dual function d(sigma) = -f^T (Q + sigma I)^{-1} f - r^2 sigma has a
//! unique critical point right of the pole at -lambda_1 whenever an existence
//! condition on f holds; the solver locates it by bisection on the derivative
//! psi(sigma) = ||(Q + sigma I)^{-1} f||^2 - r^2 and recovers the primal
//! minimizer from the final solve vector. When the condition fails (the hard
//! case, f orthogonal to the bottom eigenspace), a small perturbation along
//! the estimated lowest eigenvector restores it with a quantified accuracy
//! cost. Everything is matrix-free: the only access to Q is the symmetric
//! matrix-vector product.
//!
//! Modules:
//! - [`matrix`], [`cg`], [`probe`], [`lanczos`]: storage and the heavy kernels;
//! - [`dual`]: the dual function, derivatives, recovery, KKT residuals;
//! - [`solver`]: classification, perturbation, bracketing, bisection;
//! - [`oracle`]: exact small-scale reference via a full eigendecomposition;
//! - [`problems`]: seeded generators and the on-disk formats.
//!
//! With the `parallel` feature (default), matrix-vector products over large
//! matrices and batch solves fan out via rayon; results are bitwise identical
//! to the sequential fallback.

pub mod cg;
pub mod dual;
pub mod lanczos;
pub mod matrix;
pub mod oracle;
pub mod probe;
pub mod problems;
pub mod solver;
pub mod vecops;

pub use cg::{shifted_solve, shifted_solve_with, CgError, CgSettings};
pub use dual::{
    duality_gap, eval_dual, eval_psi, eval_psi_derivs, eval_psi_with_vector, kkt_report,
    primal_value, primal_value_with, recover_primal, KktReport, ProblemError, ProblemInstance,
};
pub use lanczos::{lanczos_smallest, LanczosError, SpectralEstimate};
pub use matrix::{MatrixError, SymMatrix};
pub use probe::{psi_probe, ProbeError, ProbeResult};
pub use solver::{
    bisect, bracket, classify_and_perturb, perturbation_bound, solve, solve_many, CaseHint,
    Perturbation, Solution, SolveCase, SolveError, SolverConfig,
};
