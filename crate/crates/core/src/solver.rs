//! End-to-end solver: spectral estimate, existence classification,
//! hard-case perturbation, uncertainty-interval scan, bisection on the dual
//! derivative, and solution assembly.
//!
//! The dual derivative psi is strictly decreasing right of the pole, so its
//! zero is found by plain bisection; Newton-type acceleration is
//! deliberately avoided because psi is ill-conditioned near the pole. Left
//! of the root, psi is never evaluated accurately: the ascent probe either
//! certifies positivity early or hands back a converged value.

use serde::Serialize;
use thiserror::Error;

use crate::cg::{CgError, CgSettings};
use crate::dual::{
    duality_gap, eval_psi_with_vector, kkt_report, primal_value, KktReport, ProblemInstance,
    PsiValue,
};
use crate::lanczos::{lanczos_smallest, LanczosError, SpectralEstimate};
use crate::probe::{psi_probe, ProbeError, ProbeResult};
use crate::vecops::{axpy, dot, norm};

const LANCZOS_TOL: f64 = 1e-10;
const LANCZOS_MAX_ITER: usize = 300;
/// Residual gate above which the spectral estimate is recomputed with a
/// doubled iteration budget before classification relies on it.
const SPECTRAL_RESIDUAL_GATE: f64 = 1e-6;

/// Tunable knobs of the solve pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    /// Termination tolerance on |psi(sigma)|.
    pub psi_tol: f64,
    /// Perturbation magnitude applied along the unit eigenvector estimate.
    pub alpha: f64,
    /// Seed step of the bracketing scan; `None` picks 5% of the scan range.
    pub scan_step_init: Option<f64>,
    /// Early-exit threshold of the ascent probe (>= 0).
    pub probe_threshold: f64,
    /// Relative placement of the scan start right of the pole.
    pub pole_offset_rel: f64,
    /// Relative residual tolerance of the inner conjugate-gradient solves.
    pub cg_tol: f64,
    pub max_bisect: usize,
    pub max_scan: usize,
    pub seed: u64,
    /// Scale alpha by ||f|| instead of using it as an absolute magnitude.
    pub alpha_relative: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            psi_tol: 1e-8,
            alpha: 1e-4,
            scan_step_init: None,
            probe_threshold: 0.0,
            pole_offset_rel: 1e-8,
            cg_tol: 1e-12,
            max_bisect: 200,
            max_scan: 64,
            seed: 42,
            alpha_relative: false,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<(), SolveError> {
        if !(self.psi_tol > 0.0) || !(self.alpha >= 0.0) || self.max_bisect == 0 || self.max_scan == 0
        {
            return Err(SolveError::BadConfig);
        }
        Ok(())
    }

    fn cg_settings(&self, n: usize) -> CgSettings {
        CgSettings {
            tol: self.cg_tol,
            max_iter: 1_000.max(10 * n),
            jacobi: false,
        }
    }
}

/// What the classification stage concluded before any root finding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseHint {
    /// Smallest eigenvalue estimate is positive; the minimizer may be interior.
    PossiblyInterior,
    /// Existence condition verified numerically; solve for f directly.
    EasyBoundary,
    /// Existence condition violated (or f = 0); linear term was perturbed.
    Hard,
}

/// Final classification of the returned solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveCase {
    Interior,
    BoundaryEasy,
    BoundaryHardPerturbed,
}

/// Record of the applied hard-case perturbation.
#[derive(Debug, Clone, Serialize)]
pub struct Perturbation {
    pub alpha: f64,
    /// Unit eigenvector estimate the perturbation was applied along.
    pub direction: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Classification {
    /// Effective linear term: f itself, or its perturbed version.
    pub p: Vec<f64>,
    pub hint: CaseHint,
    pub perturbation: Option<Perturbation>,
}

/// Assembled result of a solve.
#[derive(Debug, Clone, Serialize)]
pub struct Solution {
    pub x: Vec<f64>,
    pub sigma: f64,
    /// Objective under the instance's own linear term f.
    pub primal_value: f64,
    /// Dual value at sigma under the effective linear term p.
    pub dual_value: f64,
    /// |P_p(x) - d_p(sigma)|: the gap of the problem actually solved.
    pub gap: f64,
    pub kkt: KktReport,
    pub case: SolveCase,
    pub perturbation: Option<Perturbation>,
    pub iterations_bisect: usize,
    pub iterations_scan: usize,
    pub psi_final: f64,
    /// | ||x|| - r |
    pub dist_boundary: f64,
}

/// Outcome of the uncertainty-interval scan.
#[derive(Debug, Clone)]
pub enum BracketOutcome {
    /// psi(lo) > 0 certified (probe or value) and psi(hi) <= 0.
    Bracketed { lo: f64, hi: f64, scans: usize },
    /// psi was already nonpositive at the scan start.
    BelowStart {
        sigma_start: f64,
        psi_at_start: f64,
        scans: usize,
    },
}

/// Bisection result with the evaluation trace for invariant checks.
#[derive(Debug, Clone)]
pub struct BisectResult {
    pub sigma: f64,
    pub x: Vec<f64>,
    pub iterations: usize,
    pub psi_final: f64,
    /// Exact (sigma, psi) evaluations in order; probe-certified midpoints
    /// are not recorded here.
    pub trace: Vec<(f64, f64)>,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid solver configuration")]
    BadConfig,
    #[error("spectral stage: {0}")]
    Spectral(#[from] LanczosError),
    #[error("classification stage: {0}")]
    ClassifyProbe(#[source] ProbeError),
    #[error("classification stage: probe failed even after perturbation: {0}")]
    UnsolvableInstance(#[source] ProbeError),
    #[error("bracket stage: {0}")]
    ScanProbe(#[source] ProbeError),
    #[error("bracket stage: scan budget of {scans} evaluations exhausted")]
    ScanExhausted { scans: usize },
    #[error("bracket stage: psi({sigma_cap}) = {psi:.3e} exceeds the tolerance at the safe upper bound; inner solves are too loose")]
    CapViolation { sigma_cap: f64, psi: f64 },
    #[error("interior check: {0}")]
    InteriorSolve(#[source] CgError),
    #[error("bisect stage at sigma = {sigma}: {source}")]
    BisectEval {
        sigma: f64,
        #[source]
        source: CgError,
    },
    #[error("bisect stage at sigma = {sigma}: probe fallback failed: {source}")]
    BisectProbe {
        sigma: f64,
        #[source]
        source: ProbeError,
    },
    #[error("bisect stage: {max_bisect} iterations exhausted (best |psi| = {psi:.3e} at sigma = {sigma})")]
    MaxBisect {
        max_bisect: usize,
        sigma: f64,
        psi: f64,
    },
    #[error("converged by interval width but |psi| = {psi:.3e} exceeds the tolerance {tol:.3e}")]
    Tolerance {
        psi: f64,
        tol: f64,
        solution: Box<Solution>,
    },
    #[error("assembly stage: {0}")]
    Assembly(#[source] CgError),
}

/// Theorem-4.1 style bound on the squared perturbation magnitude that keeps
/// the perturbed optimum within `eps` of a true optimum.
///
/// Returns `+inf` when `eps` is so large that the denominator term
/// 1/sqrt(2(1-cos(eps/r))) does not exceed 1 (no constraint on alpha).
pub fn perturbation_bound(lambda1: f64, lambda2: f64, tail_sum: f64, r: f64, eps: f64) -> f64 {
    let gap = lambda2 - lambda1;
    let core = 1.0 / (2.0 * (1.0 - (eps / r).cos())).sqrt();
    if core <= 1.0 {
        return f64::INFINITY;
    }
    gap * gap * (r * r - tail_sum) / ((core - 1.0) * (core - 1.0))
}

/// Decide the effective linear term and the case hint.
///
/// Decision tree: f numerically zero perturbs outright; a positive
/// eigenvalue estimate defers to the interior check; otherwise psi is probed
/// just right of the pole and a nonpositive value triggers the perturbation.
pub fn classify_and_perturb(
    prob: &ProblemInstance,
    spectral: &SpectralEstimate,
    cfg: &SolverConfig,
) -> Result<Classification, SolveError> {
    let f = prob.f();
    let n = prob.dim();
    let cg = cfg.cg_settings(n);
    let f_norm = norm(f);

    let alpha_eff = if cfg.alpha_relative {
        cfg.alpha * f_norm.max(1.0)
    } else {
        cfg.alpha
    };
    let perturbed = |alpha: f64| -> (Vec<f64>, Option<Perturbation>) {
        let mut p = f.to_vec();
        axpy(alpha, &spectral.u1_est, &mut p);
        (
            p,
            Some(Perturbation {
                alpha,
                direction: spectral.u1_est.clone(),
            }),
        )
    };

    if f_norm < 1e-14 * n as f64 {
        let (p, perturbation) = perturbed(alpha_eff);
        return Ok(Classification {
            p,
            hint: CaseHint::Hard,
            perturbation,
        });
    }

    if spectral.lambda1_est > 0.0 {
        return Ok(Classification {
            p: f.to_vec(),
            hint: CaseHint::PossiblyInterior,
            perturbation: None,
        });
    }

    let lambda = spectral.lambda1_est;
    let delta = cfg.pole_offset_rel * (1.0 + lambda.abs());
    let sigma_probe = -lambda + delta;
    match psi_probe(
        prob.q(),
        sigma_probe,
        f,
        prob.r(),
        cfg.probe_threshold,
        cfg.cg_tol,
        cg.max_iter,
    ) {
        Ok(ProbeResult::ProvedPositive) => Ok(Classification {
            p: f.to_vec(),
            hint: CaseHint::EasyBoundary,
            perturbation: None,
        }),
        Ok(ProbeResult::Value(v)) if v > 0.0 => Ok(Classification {
            p: f.to_vec(),
            hint: CaseHint::EasyBoundary,
            perturbation: None,
        }),
        Ok(ProbeResult::Value(_)) => {
            let (p, perturbation) = perturbed(alpha_eff);
            Ok(Classification {
                p,
                hint: CaseHint::Hard,
                perturbation,
            })
        }
        Err(first_err) => {
            // The unperturbed probe can stall when f sits in the span of
            // near-singular modes; retry with the perturbation in place.
            let (p, perturbation) = perturbed(alpha_eff);
            match psi_probe(
                prob.q(),
                sigma_probe,
                &p,
                prob.r(),
                cfg.probe_threshold,
                cfg.cg_tol,
                cg.max_iter,
            ) {
                Ok(_) => Ok(Classification {
                    p,
                    hint: CaseHint::Hard,
                    perturbation,
                }),
                Err(_) => Err(SolveError::UnsolvableInstance(first_err)),
            }
        }
    }
}

/// Scan right of the pole for an interval with psi(lo) > 0 >= psi(hi).
///
/// Starts at max(0, -lambda1_est + delta), grows the step geometrically, and
/// caps the sweep at ||p||/r + max(0, -lambda1_est) + delta, which bounds the
/// root whenever the eigenvalue estimate is sound.
pub fn bracket(
    prob: &ProblemInstance,
    p: &[f64],
    spectral: &SpectralEstimate,
    cfg: &SolverConfig,
) -> Result<BracketOutcome, SolveError> {
    let lambda = spectral.lambda1_est;
    let delta = cfg.pole_offset_rel * (1.0 + lambda.abs());
    let sigma_start = (-lambda + delta).max(0.0);
    let sigma_cap = norm(p) / prob.r() + (-lambda).max(0.0) + delta;
    let cg = cfg.cg_settings(prob.dim());

    let range = (sigma_cap - sigma_start).max(0.0);
    let mut step = cfg.scan_step_init.unwrap_or(0.05 * range);
    let mut scans = 0usize;
    let mut lo: Option<f64> = None;
    let mut sigma = sigma_start;

    loop {
        if scans >= cfg.max_scan {
            return Err(SolveError::ScanExhausted { scans });
        }
        let result = psi_probe(
            prob.q(),
            sigma,
            p,
            prob.r(),
            cfg.probe_threshold,
            cfg.cg_tol,
            cg.max_iter,
        )
        .map_err(SolveError::ScanProbe)?;
        scans += 1;

        let positive = match result {
            ProbeResult::ProvedPositive => true,
            ProbeResult::Value(v) => v > 0.0,
        };
        if positive {
            lo = Some(sigma);
        } else {
            match lo {
                Some(lo) => {
                    return Ok(BracketOutcome::Bracketed {
                        lo,
                        hi: sigma,
                        scans,
                    })
                }
                None => {
                    let psi_at_start = match result {
                        ProbeResult::Value(v) => v,
                        ProbeResult::ProvedPositive => unreachable!("positive handled above"),
                    };
                    return Ok(BracketOutcome::BelowStart {
                        sigma_start,
                        psi_at_start,
                        scans,
                    });
                }
            }
        }

        let next = sigma + step;
        step *= 2.0;
        if !(next < sigma_cap) || step == 0.0 {
            // Evaluate the cap exactly; it must sit at or below the root.
            let pv = eval_psi_with_vector(prob, p, sigma_cap, &cg).map_err(|e| {
                SolveError::BisectEval {
                    sigma: sigma_cap,
                    source: e,
                }
            })?;
            scans += 1;
            if pv.value > cfg.psi_tol {
                return Err(SolveError::CapViolation {
                    sigma_cap,
                    psi: pv.value,
                });
            }
            return Ok(BracketOutcome::Bracketed {
                lo: lo.unwrap_or(sigma),
                hi: sigma_cap,
                scans,
            });
        }
        sigma = next;
    }
}

/// Classic bisection on psi over a bracketing interval.
///
/// Midpoints are evaluated exactly (keeping the solve vector); if an inner
/// solve hits its iteration cap near the pole, the ascent probe decides the
/// side soundly instead. Stops on |psi| < psi_tol, or on interval collapse
/// with the best iterate seen.
pub fn bisect(
    prob: &ProblemInstance,
    p: &[f64],
    sigma_l: f64,
    sigma_u: f64,
    cfg: &SolverConfig,
) -> Result<BisectResult, SolveError> {
    let cg = cfg.cg_settings(prob.dim());
    let mut lo = sigma_l;
    let mut hi = sigma_u;
    let mut trace: Vec<(f64, f64)> = Vec::new();
    let mut best: Option<(f64, PsiValue)> = None;

    for iter in 1..=cfg.max_bisect {
        let mid = 0.5 * (lo + hi);
        let pv = match eval_psi_with_vector(prob, p, mid, &cg) {
            Ok(pv) => pv,
            Err(CgError::IterationCap { .. }) | Err(CgError::NegativeCurvature { .. }) => {
                // Too close to the pole for an accurate solve; let the probe
                // certify the side. A positivity certificate is rigorous
                // (the ascent lower-bounds psi), and nonpositive converged
                // values are trustworthy because they only occur right of
                // the root where the operator is well conditioned.
                let side = psi_probe(
                    prob.q(),
                    mid,
                    p,
                    prob.r(),
                    cfg.probe_threshold,
                    cfg.cg_tol,
                    cg.max_iter,
                )
                .map_err(|e| SolveError::BisectProbe {
                    sigma: mid,
                    source: e,
                })?;
                let positive = match side {
                    ProbeResult::ProvedPositive => true,
                    ProbeResult::Value(v) => v > 0.0,
                };
                if positive {
                    lo = mid;
                } else {
                    hi = mid;
                }
                continue;
            }
            Err(e) => return Err(SolveError::BisectEval { sigma: mid, source: e }),
        };
        trace.push((mid, pv.value));

        let better = best
            .as_ref()
            .map_or(true, |(_, b)| pv.value.abs() < b.value.abs());
        if better {
            best = Some((mid, pv.clone()));
        }

        if pv.value.abs() < cfg.psi_tol {
            return Ok(BisectResult {
                sigma: mid,
                x: pv.x,
                iterations: iter,
                psi_final: pv.value,
                trace,
            });
        }
        if pv.value > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }

        if hi - lo < 1e-15 * (1.0 + hi) {
            let (sigma, pv) = best.expect("at least one evaluation recorded");
            return Ok(BisectResult {
                sigma,
                x: pv.x,
                iterations: iter,
                psi_final: pv.value,
                trace,
            });
        }
    }

    let (sigma, pv) = best.ok_or(SolveError::MaxBisect {
        max_bisect: cfg.max_bisect,
        sigma: 0.5 * (lo + hi),
        psi: f64::NAN,
    })?;
    Err(SolveError::MaxBisect {
        max_bisect: cfg.max_bisect,
        sigma,
        psi: pv.value,
    })
}

/// Full pipeline; see the module docs for the stage order.
pub fn solve(prob: &ProblemInstance, cfg: &SolverConfig) -> Result<Solution, SolveError> {
    cfg.validate()?;
    let n = prob.dim();
    let cg = cfg.cg_settings(n);

    let mut spectral = lanczos_smallest(prob.q(), LANCZOS_TOL, LANCZOS_MAX_ITER.min(n), cfg.seed)?;
    if spectral.residual > SPECTRAL_RESIDUAL_GATE * (1.0 + spectral.lambda1_est.abs()) {
        // Misclassification risk; spend a doubled budget before deciding.
        spectral = lanczos_smallest(
            prob.q(),
            LANCZOS_TOL,
            (2 * LANCZOS_MAX_ITER).min(n),
            cfg.seed,
        )?;
    }

    let classification = classify_and_perturb(prob, &spectral, cfg)?;
    let p = classification.p;
    let hint = classification.hint;
    let perturbation = classification.perturbation;

    // Interior check: for a positive eigenvalue estimate, and for the corner
    // where the estimate is nonpositive only within its own residual.
    let near_zero_corner =
        spectral.lambda1_est <= 0.0 && spectral.lambda1_est > -spectral.residual;
    if hint == CaseHint::PossiblyInterior || near_zero_corner {
        let pv =
            eval_psi_with_vector(prob, &p, 0.0, &cg).map_err(SolveError::InteriorSolve)?;
        if pv.value <= 0.0 {
            return assemble(
                prob,
                &p,
                &spectral,
                SolveCase::Interior,
                perturbation,
                0.0,
                pv,
                0,
                0,
                cfg,
            );
        }
    }

    let outcome = bracket(prob, &p, &spectral, cfg)?;
    let (lo, hi, scans) = match outcome {
        BracketOutcome::Bracketed { lo, hi, scans } => (lo, hi, scans),
        BracketOutcome::BelowStart {
            sigma_start,
            psi_at_start,
            scans,
        } => {
            if sigma_start <= 0.0 {
                // Scan started at zero: the dual maximizer is sigma = 0.
                let pv = eval_psi_with_vector(prob, &p, 0.0, &cg)
                    .map_err(SolveError::InteriorSolve)?;
                return assemble(
                    prob,
                    &p,
                    &spectral,
                    SolveCase::Interior,
                    perturbation,
                    0.0,
                    pv,
                    scans,
                    0,
                    cfg,
                );
            }
            // Root sits between the pole and the offset start.
            let _ = psi_at_start;
            ((-spectral.lambda1_est).max(0.0), sigma_start, scans)
        }
    };

    let bis = bisect(prob, &p, lo, hi, cfg)?;
    let case = if hint == CaseHint::Hard {
        SolveCase::BoundaryHardPerturbed
    } else {
        SolveCase::BoundaryEasy
    };
    let psi_final = bis.psi_final;
    let solution = assemble(
        prob,
        &p,
        &spectral,
        case,
        perturbation,
        bis.sigma,
        PsiValue {
            value: bis.psi_final,
            x: bis.x,
        },
        scans,
        bis.iterations,
        cfg,
    )?;
    if psi_final.abs() > cfg.psi_tol {
        return Err(SolveError::Tolerance {
            psi: psi_final,
            tol: cfg.psi_tol,
            solution: Box::new(solution),
        });
    }
    Ok(solution)
}

/// Solve a batch of instances; parallel across instances when the
/// `parallel` feature is on. Each solve is independently deterministic.
pub fn solve_many(
    probs: &[ProblemInstance],
    cfg: &SolverConfig,
) -> Vec<Result<Solution, SolveError>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        probs.par_iter().map(|p| solve(p, cfg)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        probs.iter().map(|p| solve(p, cfg)).collect()
    }
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    prob: &ProblemInstance,
    p: &[f64],
    spectral: &SpectralEstimate,
    case: SolveCase,
    perturbation: Option<Perturbation>,
    sigma: f64,
    psi: PsiValue,
    scans: usize,
    bisect_iters: usize,
    cfg: &SolverConfig,
) -> Result<Solution, SolveError> {
    let cg = cfg.cg_settings(prob.dim());
    let x = psi.x;
    let r = prob.r();
    // Dual value from the cached solve vector: d(sigma) = -p.x - r^2 sigma.
    let dual_value = -dot(p, &x) - r * r * sigma;
    let gap = duality_gap(prob, p, sigma, &x, &cg).map_err(SolveError::Assembly)?;
    let kkt = kkt_report(prob, sigma, &x, spectral);
    let dist_boundary = (norm(&x) - r).abs();
    Ok(Solution {
        primal_value: primal_value(prob, &x),
        dual_value,
        gap,
        kkt,
        case,
        perturbation,
        iterations_bisect: bisect_iters,
        iterations_scan: scans,
        psi_final: psi.value,
        dist_boundary,
        sigma,
        x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SymMatrix;

    fn example1() -> ProblemInstance {
        let q = SymMatrix::from_diagonal(&[-1.0, 1.0]).unwrap();
        ProblemInstance::new(q, vec![0.0, -1.8], 1.0).unwrap()
    }

    fn example2() -> ProblemInstance {
        let q = SymMatrix::from_diagonal(&[-1.0, 1.0]).unwrap();
        ProblemInstance::new(q, vec![0.0, -3.0], 1.0).unwrap()
    }

    fn spectral_exact() -> SpectralEstimate {
        SpectralEstimate {
            lambda1_est: -1.0,
            u1_est: vec![1.0, 0.0],
            residual: 0.0,
            iterations: 2,
        }
    }

    #[test]
    fn classify_example1_is_hard() {
        let prob = example1();
        let cfg = SolverConfig::default();
        let c = classify_and_perturb(&prob, &spectral_exact(), &cfg).unwrap();
        assert_eq!(c.hint, CaseHint::Hard);
        assert!((c.p[0].abs() - 1e-4).abs() < 1e-18);
        assert!((c.p[1] + 1.8).abs() < 1e-15);
        assert!(c.perturbation.is_some());
    }

    #[test]
    fn classify_example2_is_easy() {
        let prob = example2();
        let cfg = SolverConfig::default();
        let c = classify_and_perturb(&prob, &spectral_exact(), &cfg).unwrap();
        assert_eq!(c.hint, CaseHint::EasyBoundary);
        assert_eq!(c.p, vec![0.0, -3.0]);
        assert!(c.perturbation.is_none());
    }

    #[test]
    fn classify_spd_small_f_is_possibly_interior() {
        let q = SymMatrix::identity(2);
        let prob = ProblemInstance::new(q, vec![0.1, 0.0], 1.0).unwrap();
        let spectral = SpectralEstimate {
            lambda1_est: 1.0,
            u1_est: vec![1.0, 0.0],
            residual: 0.0,
            iterations: 2,
        };
        let c = classify_and_perturb(&prob, &spectral, &SolverConfig::default()).unwrap();
        assert_eq!(c.hint, CaseHint::PossiblyInterior);
        assert_eq!(c.p, vec![0.1, 0.0]);
    }

    #[test]
    fn bracket_example2_contains_root() {
        let prob = example2();
        let cfg = SolverConfig::default();
        match bracket(&prob, &[0.0, -3.0], &spectral_exact(), &cfg).unwrap() {
            BracketOutcome::Bracketed { lo, hi, .. } => {
                assert!(lo <= 2.0 && 2.0 <= hi, "bracket [{lo}, {hi}]");
                assert!(hi <= 3.0 / 1.0 + 1.0 + 1e-6);
            }
            other => panic!("expected a bracket, got {other:?}"),
        }
    }

    #[test]
    fn bracket_example1_perturbed_contains_root() {
        let prob = example1();
        let cfg = SolverConfig::default();
        match bracket(&prob, &[0.5, -1.8], &spectral_exact(), &cfg).unwrap() {
            BracketOutcome::Bracketed { lo, hi, .. } => {
                assert!(lo <= 1.6758 && 1.6758 <= hi, "bracket [{lo}, {hi}]");
            }
            other => panic!("expected a bracket, got {other:?}"),
        }
    }

    #[test]
    fn bracket_detects_interior_candidate() {
        let q = SymMatrix::identity(2);
        let prob = ProblemInstance::new(q, vec![0.1, 0.0], 1.0).unwrap();
        let spectral = SpectralEstimate {
            lambda1_est: 1.0,
            u1_est: vec![1.0, 0.0],
            residual: 0.0,
            iterations: 2,
        };
        match bracket(&prob, &[0.1, 0.0], &spectral, &SolverConfig::default()).unwrap() {
            BracketOutcome::BelowStart {
                sigma_start,
                psi_at_start,
                ..
            } => {
                assert_eq!(sigma_start, 0.0);
                assert!((psi_at_start + 0.99).abs() < 1e-9);
            }
            other => panic!("expected below-start, got {other:?}"),
        }
    }

    #[test]
    fn bisect_example2_from_given_bracket() {
        let prob = example2();
        let cfg = SolverConfig::default();
        let res = bisect(&prob, &[0.0, -3.0], 1.5, 4.0, &cfg).unwrap();
        assert!((res.sigma - 2.0).abs() < 1e-7, "sigma = {}", res.sigma);
        assert!(res.x[0].abs() < 1e-6 && (res.x[1] + 1.0).abs() < 1e-6);
        // Bracket invariant over the recorded exact evaluations.
        for window in res.trace.windows(1) {
            let (s, v) = window[0];
            if v > 0.0 {
                assert!(s <= res.sigma + 1e-12);
            }
        }
    }

    #[test]
    fn bisect_example1_perturbed() {
        let prob = example1();
        let cfg = SolverConfig::default();
        let res = bisect(&prob, &[0.5, -1.8], 1.0 + 1e-6, 4.0, &cfg).unwrap();
        assert!((res.sigma - 1.6757583683388796).abs() < 1e-3);
    }

    #[test]
    fn solve_interior_instance() {
        let q = SymMatrix::from_diagonal(&[2.0, 3.0]).unwrap();
        let prob = ProblemInstance::new(q, vec![1.0, 1.0], 10.0).unwrap();
        let sol = solve(&prob, &SolverConfig::default()).unwrap();
        assert_eq!(sol.case, SolveCase::Interior);
        assert_eq!(sol.sigma, 0.0);
        assert!((sol.x[0] - 0.5).abs() < 1e-10);
        assert!((sol.x[1] - 1.0 / 3.0).abs() < 1e-10);
        assert!(sol.dist_boundary > 9.0);
    }

    #[test]
    fn solve_example1_hard_case() {
        let prob = example1();
        let cfg = SolverConfig::default();
        let sol = solve(&prob, &cfg).unwrap();
        assert_eq!(sol.case, SolveCase::BoundaryHardPerturbed);
        assert!(sol.perturbation.is_some());
        let tau = 0.19f64.sqrt();
        let d_plus = ((sol.x[0] - tau).powi(2) + (sol.x[1] + 0.9).powi(2)).sqrt();
        let d_minus = ((sol.x[0] + tau).powi(2) + (sol.x[1] + 0.9).powi(2)).sqrt();
        assert!(d_plus.min(d_minus) < 1e-2, "x = {:?}", sol.x);
        assert!((sol.primal_value + 2.62).abs() < 1e-3);
        assert!(sol.gap <= 1e-6);
    }

    #[test]
    fn solve_example2_easy_case() {
        let prob = example2();
        let cfg = SolverConfig {
            psi_tol: 1e-9,
            ..SolverConfig::default()
        };
        let sol = solve(&prob, &cfg).unwrap();
        assert_eq!(sol.case, SolveCase::BoundaryEasy);
        assert!((sol.sigma - 2.0).abs() < 1e-7);
        assert!(sol.x[0].abs() < 1e-6 && (sol.x[1] + 1.0).abs() < 1e-6);
        assert!(sol.gap <= 1e-8);
        assert!(sol.psi_final.abs() <= 1e-9);
    }

    #[test]
    fn solve_zero_f_spd_is_interior() {
        let q = SymMatrix::identity(3);
        let prob = ProblemInstance::new(q, vec![0.0; 3], 1.0).unwrap();
        let sol = solve(&prob, &SolverConfig::default()).unwrap();
        assert_eq!(sol.case, SolveCase::Interior);
        assert!(norm(&sol.x) < 1e-3);
        assert!(sol.perturbation.is_some());
    }

    #[test]
    fn solve_zero_f_indefinite_lands_on_boundary() {
        let q = SymMatrix::from_diagonal(&[-2.0, 1.0, 3.0]).unwrap();
        let prob = ProblemInstance::new(q, vec![0.0; 3], 1.5).unwrap();
        let sol = solve(&prob, &SolverConfig::default()).unwrap();
        assert_eq!(sol.case, SolveCase::BoundaryHardPerturbed);
        assert!(sol.dist_boundary < 1e-6);
        // Solution aligns with the lowest eigendirection.
        assert!((sol.x[0].abs() - 1.5).abs() < 1e-4, "x = {:?}", sol.x);
        assert!((sol.sigma - 2.0).abs() < 1e-3);
    }

    #[test]
    fn perturbation_bound_frozen_example() {
        let b = perturbation_bound(-1.0, 1.0, 0.81, 1.0, 0.1);
        assert!(
            (b - 9.374031847676895e-3).abs() <= 1e-12,
            "bound = {b:.15e}"
        );
    }

    #[test]
    fn perturbation_bound_zero_numerator() {
        assert_eq!(perturbation_bound(-1.0, 1.0, 1.0, 1.0, 0.1), 0.0);
    }

    #[test]
    fn perturbation_bound_vanishes_with_eps() {
        let mut last = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5] {
            let b = perturbation_bound(-1.0, 1.0, 0.81, 1.0, eps);
            assert!(b < last);
            last = b;
        }
        assert!(last < 1e-12);
    }

    #[test]
    fn perturbation_bound_unbounded_sentinel() {
        // eps/r >= pi/3 makes the denominator term <= 1.
        let b = perturbation_bound(-1.0, 1.0, 0.81, 1.0, 3.0);
        assert!(b.is_infinite());
    }

    #[test]
    fn solve_is_bitwise_deterministic() {
        let prob = example1();
        let cfg = SolverConfig::default();
        let a = solve(&prob, &cfg).unwrap();
        let b = solve(&prob, &cfg).unwrap();
        assert_eq!(a.sigma.to_bits(), b.sigma.to_bits());
        assert_eq!(a.psi_final.to_bits(), b.psi_final.to_bits());
        assert_eq!(a.primal_value.to_bits(), b.primal_value.to_bits());
        assert!(a
            .x
            .iter()
            .zip(&b.x)
            .all(|(u, v)| u.to_bits() == v.to_bits()));
    }
}
