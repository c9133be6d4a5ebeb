//! Seeded instance generation for the benchmark protocol.
//!
//! General instances follow the integer-coefficient recipe: Q is the
//! symmetrized average of an integer matrix, f and r are integer draws.
//! Hard instances are built spectrally so that the existence condition is
//! violated by construction, with a certificate for test use.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::dual::ProblemInstance;
use crate::matrix::SymMatrix;
use crate::vecops::{dot, norm, scale};

/// Radius factor of the hard-case construction: r = RADIUS_FACTOR * sqrt(tail),
/// so tail/r^2 = 1/RADIUS_FACTOR^2 < 1 violates the existence condition with
/// margin. The factor also controls how tightly the perturbed optimum tracks
/// the true family (the tracking ratio grows like 1/sqrt(RADIUS_FACTOR^2-1)),
/// so it is kept at 2 rather than just above 1.
pub const RADIUS_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenCase {
    General,
    Hard,
}

/// What to generate.
#[derive(Debug, Clone)]
pub struct GenSpec {
    pub dim: usize,
    pub case: GenCase,
    pub seed: u64,
    /// Inclusive integer range of the general-case coefficients.
    pub coeff_range: (i64, i64),
}

impl GenSpec {
    pub fn new(dim: usize, case: GenCase, seed: u64) -> Self {
        Self {
            dim,
            case,
            seed,
            coeff_range: (-100, 100),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("hard case needs dim >= 2, got {0}")]
    DimTooSmall(usize),
    #[error("coefficient range is empty")]
    EmptyRange,
    #[error("wrong generator for case {0:?}")]
    WrongCase(GenCase),
    #[error("degenerate draws exhausted the retry budget")]
    DegenerateDraw,
}

/// Exact data underpinning a hard instance, for test assertions.
#[derive(Debug, Clone)]
pub struct HardCertificate {
    /// Unit eigenvector of the simple smallest eigenvalue.
    pub u1: Vec<f64>,
    pub lambda1: f64,
    /// sum_{i>1} fhat_i^2/(lambda_i - lambda_1)^2 of the constructed data.
    pub tail_sum: f64,
    pub r: f64,
}

/// Integer-coefficient general instance: Q = (A + A^T)/2, f integer, r a
/// positive integer, all drawn from `coeff_range` under the given seed.
pub fn gen_general(spec: &GenSpec) -> Result<ProblemInstance, GenError> {
    if spec.case != GenCase::General {
        return Err(GenError::WrongCase(spec.case));
    }
    let (lo, hi) = spec.coeff_range;
    if lo > hi {
        return Err(GenError::EmptyRange);
    }
    let n = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Full integer matrix A drawn row-major, then symmetrized on the fly:
    // Q_ij = (A_ij + A_ji)/2 stays on the half-integer grid.
    let mut a = vec![0i64; n * n];
    for v in a.iter_mut() {
        *v = rng.gen_range(lo..=hi);
    }
    let q = SymMatrix::dense_from_fn(n, |i, j| 0.5 * (a[i * n + j] + a[j * n + i]) as f64)
        .expect("n >= 1");

    let f: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..=hi) as f64).collect();
    let r_lo = lo.max(1);
    let r_hi = hi.max(1);
    let r = rng.gen_range(r_lo..=r_hi) as f64;
    Ok(ProblemInstance::new(q, f, r).expect("generated data is valid"))
}

/// Hard-case instance: Q = V diag(lambda) V^T with a simple negative smallest
/// eigenvalue, f drawn on the unit sphere and projected off the lowest
/// eigenvector (twice), r = RADIUS_FACTOR * sqrt(tail).
pub fn gen_hard(spec: &GenSpec) -> Result<(ProblemInstance, HardCertificate), GenError> {
    if spec.case != GenCase::Hard {
        return Err(GenError::WrongCase(spec.case));
    }
    let n = spec.dim;
    if n < 2 {
        return Err(GenError::DimTooSmall(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Spectrum: simple lambda_1 in [-100, -1], the rest in [lambda_1 + 1, 100]
    // sorted, so the gap to lambda_2 is at least 1.
    let lambda1 = rng.gen_range(-100.0..-1.0);
    let mut rest: Vec<f64> = (0..n - 1)
        .map(|_| rng.gen_range(lambda1 + 1.0..100.0))
        .collect();
    rest.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mut lambdas = Vec::with_capacity(n);
    lambdas.push(lambda1);
    lambdas.extend(rest);

    // Orthogonal V from twice-reorthogonalized Gram-Schmidt on Gaussians.
    let v = random_orthogonal(n, &mut rng);

    // Q = V diag(lambda) V^T, stored as the lower triangle.
    let q = SymMatrix::dense_from_fn(n, |i, j| {
        let mut s = 0.0;
        for m in 0..n {
            s += lambdas[m] * v[m][i] * v[m][j];
        }
        s
    })
    .expect("n >= 1");

    // f: unit-sphere draw, projected off V_1 twice so V_1^T f = 0 exactly
    // to roundoff.
    let mut f = Vec::new();
    let mut ok = false;
    for _ in 0..16 {
        let mut g: Vec<f64> = (0..n)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let gn = norm(&g);
        if gn < 1e-12 {
            continue;
        }
        scale(&mut g, 1.0 / gn);
        for _ in 0..2 {
            let c = dot(&g, &v[0]);
            for i in 0..n {
                g[i] -= c * v[0][i];
            }
        }
        if norm(&g) > 1e-8 {
            f = g;
            ok = true;
            break;
        }
    }
    if !ok {
        return Err(GenError::DegenerateDraw);
    }

    // tail in the constructed eigenbasis: fhat_i = V_i . f.
    let mut tail = 0.0;
    for m in 1..n {
        let fm = dot(&v[m], &f);
        let gap = lambdas[m] - lambda1;
        tail += (fm / gap) * (fm / gap);
    }
    let r = RADIUS_FACTOR * tail.sqrt();

    let prob = ProblemInstance::new(q, f, r).expect("generated data is valid");
    let cert = HardCertificate {
        u1: v[0].clone(),
        lambda1,
        tail_sum: tail,
        r,
    };
    Ok((prob, cert))
}

/// Rows are orthonormal vectors (each row is one basis vector).
fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&g, b);
                for i in 0..n {
                    g[i] -= c * b[i];
                }
            }
        }
        let gn = norm(&g);
        if gn < 1e-10 {
            continue;
        }
        scale(&mut g, 1.0 / gn);
        basis.push(g);
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{eig_full, existence_condition};

    #[test]
    fn general_is_deterministic() {
        let spec = GenSpec::new(6, GenCase::General, 123);
        let a = gen_general(&spec).unwrap();
        let b = gen_general(&spec).unwrap();
        assert_eq!(a.r(), b.r());
        assert_eq!(a.f(), b.f());
        for i in 0..6 {
            for j in 0..=i {
                assert_eq!(a.q().get(i, j).to_bits(), b.q().get(i, j).to_bits());
            }
        }
    }

    #[test]
    fn general_properties_over_seeds() {
        for seed in 0..10u64 {
            let spec = GenSpec::new(12, GenCase::General, seed);
            let prob = gen_general(&spec).unwrap();
            assert!(prob.r() >= 1.0);
            assert_eq!(prob.r().fract(), 0.0);
            for i in 0..12 {
                for j in 0..=i {
                    let v = prob.q().get(i, j);
                    // Halves grid from the symmetrized average.
                    assert_eq!((2.0 * v).fract(), 0.0);
                    assert!(v.abs() <= 100.0);
                }
                assert_eq!(prob.f()[i].fract(), 0.0);
            }
        }
    }

    #[test]
    fn general_degenerate_range() {
        let mut spec = GenSpec::new(3, GenCase::General, 0);
        spec.coeff_range = (5, 5);
        let prob = gen_general(&spec).unwrap();
        for i in 0..3 {
            assert_eq!(prob.f()[i], 5.0);
            for j in 0..=i {
                assert_eq!(prob.q().get(i, j), 5.0);
            }
        }
        assert_eq!(prob.r(), 5.0);
    }

    #[test]
    fn hard_violates_existence_and_is_orthogonal() {
        for seed in 0..8u64 {
            let spec = GenSpec::new(10, GenCase::Hard, seed);
            let (prob, cert) = gen_hard(&spec).unwrap();
            assert!(dot(&cert.u1, prob.f()).abs() <= 1e-12 * norm(prob.f()));
            let dec = eig_full(prob.q()).unwrap();
            let (holds, head, tail) = existence_condition(&dec, prob.f(), prob.r());
            assert!(!holds, "existence must fail (seed {seed})");
            assert!(head <= 1e-20);
            assert!((tail - cert.tail_sum).abs() <= 1e-8 * (1.0 + tail));
            assert!(
                (prob.r() - RADIUS_FACTOR * cert.tail_sum.sqrt()).abs() <= 1e-12 * prob.r()
            );
        }
    }

    #[test]
    fn hard_dim_one_rejected() {
        let spec = GenSpec::new(1, GenCase::Hard, 0);
        assert_eq!(gen_hard(&spec).unwrap_err(), GenError::DimTooSmall(1));
    }

    #[test]
    fn hard_two_dimensional_shape() {
        // dim = 2 reduces to the diag(-|a|, b) family up to rotation.
        let spec = GenSpec::new(2, GenCase::Hard, 5);
        let (prob, cert) = gen_hard(&spec).unwrap();
        let dec = eig_full(prob.q()).unwrap();
        assert!((dec.lambdas[0] - cert.lambda1).abs() <= 1e-8 * (1.0 + cert.lambda1.abs()));
        assert_eq!(dec.k, 1);
        assert!(dec.lambdas[1] - dec.lambdas[0] >= 1.0 - 1e-8);
    }

    #[test]
    fn wrong_case_is_rejected() {
        let spec = GenSpec::new(4, GenCase::General, 0);
        assert_eq!(gen_hard(&spec).unwrap_err(), GenError::WrongCase(GenCase::General));
        let spec = GenSpec::new(4, GenCase::Hard, 0);
        assert_eq!(
            gen_general(&spec).unwrap_err(),
            GenError::WrongCase(GenCase::Hard)
        );
    }
}
