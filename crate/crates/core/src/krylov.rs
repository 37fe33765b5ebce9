//! Hermitian Lanczos machinery shared by the dense and tensor-network solvers.
//!
//! Two closely related algorithms live here, both driven by a caller-supplied
//! matrix-vector product so they work equally well on explicit sector matrices
//! and on implicitly contracted effective Hamiltonians:
//!
//! * [`expm_multiply_hermitian`] — `exp(tau * H) v` for Hermitian `H` via a
//!   Krylov subspace with full reorthogonalization.  With `tau = -i * dt` this
//!   is the unitary propagator used by every time-evolution backend.
//! * [`lanczos_lowest`] — the few lowest eigenpairs of a real symmetric
//!   operator, used for sector-restricted ground-state searches.
//! * [`lowest_eigenpair_hermitian`] — warm-started lowest eigenpair of a
//!   complex Hermitian operator, used for the local solves inside variational
//!   sweeps where the start vector carries the symmetry sector.
//!
//! All of them diagonalize the small projected tridiagonal matrix with LAPACK
//! and use the standard `beta_m * |last component|` residual estimates.

use crate::C64;
use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Errors from Krylov iterations.
#[derive(Debug, Error)]
pub enum KrylovError {
    #[error("cannot propagate a zero vector")]
    ZeroVector,
    #[error("Krylov propagation did not reach tolerance {tol:e} within {max_basis} vectors (estimate {estimate:e})")]
    PropagationNotConverged { tol: f64, max_basis: usize, estimate: f64 },
    #[error("Lanczos eigensolve did not converge within {max_basis} vectors (worst residual {residual:e})")]
    EigensolveNotConverged { max_basis: usize, residual: f64 },
    #[error("requested {requested} eigenpairs from an operator of dimension {dim}")]
    TooManyPairs { requested: usize, dim: usize },
}

fn dot_c(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm_c(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn dot_r(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dense eigendecomposition of the symmetric tridiagonal Lanczos matrix.
fn tridiag_eigh(alphas: &[f64], betas: &[f64]) -> (Array1<f64>, Array2<f64>) {
    let m = alphas.len();
    let mut t = Array2::<f64>::zeros((m, m));
    for (i, &a) in alphas.iter().enumerate() {
        t[(i, i)] = a;
    }
    for (i, &b) in betas.iter().enumerate() {
        t[(i, i + 1)] = b;
        t[(i + 1, i)] = b;
    }
    t.eigh(UPLO::Lower).expect("tridiagonal eigendecomposition failed")
}

/// `exp(tau * T) e1` for the tridiagonal matrix defined by `alphas`/`betas`.
fn expm_tridiag_e1(alphas: &[f64], betas: &[f64], tau: C64) -> Vec<C64> {
    let (lam, q) = tridiag_eigh(alphas, betas);
    let m = alphas.len();
    let phases: Vec<C64> = lam.iter().map(|&l| (tau * l).exp()).collect();
    (0..m)
        .map(|j| (0..m).map(|k| q[(j, k)] * phases[k] * q[(0, k)]).sum())
        .collect()
}

/// Computes `exp(tau * H) v` for Hermitian `H` given through `apply`.
///
/// `apply(x, y)` must write `H x` into `y`.  The Krylov basis is grown with
/// full reorthogonalization until the standard residual estimate drops below
/// `tol * |v|` or `max_basis` vectors are reached.  When the subspace becomes
/// exactly invariant (happy breakdown) the result is exact and returned early.
///
/// For `tau` on the imaginary axis the result preserves the norm of `v` up to
/// the requested tolerance, since the projected propagator is unitary.
pub fn expm_multiply_hermitian<F>(
    mut apply: F,
    v: &[C64],
    tau: C64,
    tol: f64,
    max_basis: usize,
) -> Result<Vec<C64>, KrylovError>
where
    F: FnMut(&[C64], &mut [C64]),
{
    let dim = v.len();
    let beta0 = norm_c(v);
    if beta0 == 0.0 {
        return Err(KrylovError::ZeroVector);
    }
    let max_basis = max_basis.min(dim).max(1);

    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(max_basis);
    basis.push(v.iter().map(|x| x / beta0).collect());
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![C64::new(0.0, 0.0); dim];
    let mut last_estimate = f64::INFINITY;

    for j in 0..max_basis {
        apply(&basis[j], &mut w);
        // Hermitian H makes the diagonal projection real.
        let alpha = dot_c(&basis[j], &w).re;
        alphas.push(alpha);
        for (wi, vi) in w.iter_mut().zip(&basis[j]) {
            *wi -= alpha * vi;
        }
        if j > 0 {
            let beta_prev = betas[j - 1];
            for (wi, vi) in w.iter_mut().zip(&basis[j - 1]) {
                *wi -= beta_prev * vi;
            }
        }
        // Full reorthogonalization keeps the basis orthonormal to machine
        // precision, which is what makes the norm-preservation guarantee real.
        for u in &basis {
            let overlap = dot_c(u, &w);
            if overlap.norm_sqr() > 0.0 {
                for (wi, ui) in w.iter_mut().zip(u) {
                    *wi -= overlap * ui;
                }
            }
        }
        let beta = norm_c(&w);
        let scale = alphas
            .iter()
            .map(|a| a.abs())
            .chain(betas.iter().copied())
            .fold(1e-300, f64::max);

        let y = expm_tridiag_e1(&alphas, &betas, tau);
        last_estimate = beta * y.last().map(|c| c.norm()).unwrap_or(0.0);
        let breakdown = beta <= 1e-14 * scale;
        if last_estimate <= tol || breakdown || alphas.len() == dim {
            let mut out = vec![C64::new(0.0, 0.0); dim];
            for (coeff, vec) in y.iter().zip(&basis) {
                let c = beta0 * coeff;
                for (oi, vi) in out.iter_mut().zip(vec) {
                    *oi += c * vi;
                }
            }
            return Ok(out);
        }
        betas.push(beta);
        basis.push(w.iter().map(|x| x / beta).collect());
    }
    Err(KrylovError::PropagationNotConverged { tol, max_basis, estimate: last_estimate })
}

/// Result of a Lanczos lowest-eigenpair solve.
#[derive(Debug, Clone)]
pub struct GroundSolve {
    /// The lowest eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Matching orthonormal eigenvectors.
    pub eigenvectors: Vec<Vec<f64>>,
    /// Residual norms `|H x - lambda x|` actually achieved.
    pub residuals: Vec<f64>,
    /// Krylov basis size used.
    pub basis_size: usize,
}

/// Lowest `n_pairs` eigenpairs of a real symmetric operator of size `dim`.
///
/// The start vector is drawn from a seeded deterministic generator so repeated
/// runs (and parallel sweeps) produce bit-identical results.  Convergence
/// requires every requested pair to reach a residual below
/// `tol * max(1, |eigenvalue|)`.  Small operators (`dim <= 32`) are
/// diagonalized densely by applying `apply` to unit vectors, which also makes
/// one-dimensional symmetry sectors exact.
pub fn lanczos_lowest<F>(
    mut apply: F,
    dim: usize,
    n_pairs: usize,
    tol: f64,
    max_basis: usize,
    seed: u64,
) -> Result<GroundSolve, KrylovError>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if n_pairs == 0 || n_pairs > dim {
        return Err(KrylovError::TooManyPairs { requested: n_pairs, dim });
    }

    if dim <= 32 {
        // Dense fallback: assemble the matrix column by column.
        let mut mat = Array2::<f64>::zeros((dim, dim));
        let mut col = vec![0.0; dim];
        let mut unit = vec![0.0; dim];
        for j in 0..dim {
            unit[j] = 1.0;
            apply(&unit, &mut col);
            unit[j] = 0.0;
            for i in 0..dim {
                mat[(i, j)] = col[i];
            }
        }
        let (vals, vecs) = mat.eigh(UPLO::Lower).expect("dense eigendecomposition failed");
        let eigenvalues: Vec<f64> = vals.iter().take(n_pairs).copied().collect();
        let eigenvectors: Vec<Vec<f64>> =
            (0..n_pairs).map(|k| vecs.column(k).to_vec()).collect();
        return Ok(GroundSolve {
            residuals: vec![0.0; n_pairs],
            basis_size: dim,
            eigenvalues,
            eigenvectors,
        });
    }

    let max_basis = max_basis.min(dim).max(2 * n_pairs + 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v0: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
    let n0 = dot_r(&v0, &v0).sqrt();
    v0.iter_mut().for_each(|x| *x /= n0);

    let mut basis: Vec<Vec<f64>> = vec![v0];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; dim];
    let mut worst = f64::INFINITY;

    for j in 0..max_basis {
        apply(&basis[j], &mut w);
        let alpha = dot_r(&basis[j], &w);
        alphas.push(alpha);
        for (wi, vi) in w.iter_mut().zip(&basis[j]) {
            *wi -= alpha * vi;
        }
        if j > 0 {
            let beta_prev = betas[j - 1];
            for (wi, vi) in w.iter_mut().zip(&basis[j - 1]) {
                *wi -= beta_prev * vi;
            }
        }
        for u in &basis {
            let overlap = dot_r(u, &w);
            for (wi, ui) in w.iter_mut().zip(u) {
                *wi -= overlap * ui;
            }
        }
        let beta = dot_r(&w, &w).sqrt();

        // Checking convergence costs an O(m^3) eigendecomposition, so do it
        // every few iterations and always on the final one.
        let m = alphas.len();
        let check = m >= n_pairs && (m % 5 == 0 || m == max_basis || m == dim || beta < 1e-13);
        if check {
            let (lam, q) = tridiag_eigh(&alphas, &betas);
            worst = (0..n_pairs)
                .map(|k| beta * q[(m - 1, k)].abs() / lam[k].abs().max(1.0))
                .fold(0.0, f64::max);
            if worst <= tol || m == dim {
                let eigenvalues: Vec<f64> = lam.iter().take(n_pairs).copied().collect();
                let mut eigenvectors = Vec::with_capacity(n_pairs);
                let mut residuals = Vec::with_capacity(n_pairs);
                for k in 0..n_pairs {
                    let mut x = vec![0.0; dim];
                    for (i, vec) in basis.iter().enumerate() {
                        let c = q[(i, k)];
                        for (xi, vi) in x.iter_mut().zip(vec) {
                            *xi += c * vi;
                        }
                    }
                    residuals.push(beta * q[(m - 1, k)].abs());
                    eigenvectors.push(x);
                }
                return Ok(GroundSolve { eigenvalues, eigenvectors, residuals, basis_size: m });
            }
        }
        if beta < 1e-300 {
            // Invariant subspace smaller than n_pairs targets: should have
            // been caught by the dim == m check above; treat as failure.
            return Err(KrylovError::EigensolveNotConverged { max_basis, residual: worst });
        }
        betas.push(beta);
        basis.push(w.iter().map(|x| x / beta).collect());
    }
    Err(KrylovError::EigensolveNotConverged { max_basis, residual: worst })
}

/// Result of a warm-started Hermitian lowest-eigenpair solve.
#[derive(Debug, Clone)]
pub struct LocalGround {
    /// Best eigenvalue estimate (Rayleigh quotient of the returned vector).
    pub eigenvalue: f64,
    /// Normalized eigenvector estimate.
    pub eigenvector: Vec<C64>,
    /// Residual estimate `beta_m * |last component|` actually achieved.
    pub residual: f64,
    /// Krylov basis size used.
    pub basis_size: usize,
}

/// Lowest eigenpair of a complex Hermitian operator, warm-started at `v0`.
///
/// Built for sweep algorithms that repeatedly refine a local tensor: the
/// iteration starts from the caller's current tensor, which keeps the iterate
/// inside any symmetry sector that tensor lives in (Krylov spaces of a
/// sector-preserving operator never leave the start vector's sector).  Unlike
/// [`lanczos_lowest`] this returns the best estimate reached even when the
/// residual target is missed, because the caller's outer sweep loop supplies
/// the real convergence control; inspect [`LocalGround::residual`] if needed.
pub fn lowest_eigenpair_hermitian<F>(
    mut apply: F,
    v0: &[C64],
    tol: f64,
    max_basis: usize,
) -> Result<LocalGround, KrylovError>
where
    F: FnMut(&[C64], &mut [C64]),
{
    let dim = v0.len();
    let beta0 = norm_c(v0);
    if beta0 == 0.0 {
        return Err(KrylovError::ZeroVector);
    }
    let max_basis = max_basis.min(dim).max(1);

    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(max_basis);
    basis.push(v0.iter().map(|x| x / beta0).collect());
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![C64::new(0.0, 0.0); dim];

    for j in 0..max_basis {
        apply(&basis[j], &mut w);
        let alpha = dot_c(&basis[j], &w).re;
        alphas.push(alpha);
        for (wi, vi) in w.iter_mut().zip(&basis[j]) {
            *wi -= alpha * vi;
        }
        if j > 0 {
            let beta_prev = betas[j - 1];
            for (wi, vi) in w.iter_mut().zip(&basis[j - 1]) {
                *wi -= beta_prev * vi;
            }
        }
        for u in &basis {
            let overlap = dot_c(u, &w);
            if overlap.norm_sqr() > 0.0 {
                for (wi, ui) in w.iter_mut().zip(u) {
                    *wi -= overlap * ui;
                }
            }
        }
        let beta = norm_c(&w);
        let scale = alphas
            .iter()
            .map(|a| a.abs())
            .chain(betas.iter().copied())
            .fold(1e-300, f64::max);

        let m = alphas.len();
        let breakdown = beta <= 1e-14 * scale;
        let (lam, q) = tridiag_eigh(&alphas, &betas);
        let residual = beta * q[(m - 1, 0)].abs();
        if residual <= tol * lam[0].abs().max(1.0) || breakdown || m == dim || m == max_basis {
            let mut x = vec![C64::new(0.0, 0.0); dim];
            for (i, vec) in basis.iter().enumerate() {
                let c = q[(i, 0)];
                for (xi, vi) in x.iter_mut().zip(vec) {
                    *xi += c * vi;
                }
            }
            return Ok(LocalGround {
                eigenvalue: lam[0],
                eigenvector: x,
                residual,
                basis_size: m,
            });
        }
        betas.push(beta);
        basis.push(w.iter().map(|x| x / beta).collect());
    }
    unreachable!("loop always returns at m == max_basis");
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense symmetric test matrix with known structure.
    fn test_matrix(dim: usize) -> Array2<f64> {
        let mut m = Array2::<f64>::zeros((dim, dim));
        for i in 0..dim {
            m[(i, i)] = (i as f64) - 0.3;
            if i + 1 < dim {
                m[(i, i + 1)] = 0.7;
                m[(i + 1, i)] = 0.7;
            }
            if i + 3 < dim {
                m[(i, i + 3)] = -0.2;
                m[(i + 3, i)] = -0.2;
            }
        }
        m
    }

    fn apply_dense_c(m: &Array2<f64>) -> impl FnMut(&[C64], &mut [C64]) + '_ {
        move |x, y| {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = x
                    .iter()
                    .enumerate()
                    .map(|(j, xj)| m[(i, j)] * xj)
                    .sum();
            }
        }
    }

    #[test]
    fn exponential_matches_dense_diagonalization() {
        let dim = 40;
        let m = test_matrix(dim);
        let (lam, q) = m.clone().eigh(UPLO::Lower).unwrap();
        let mut v: Vec<C64> = (0..dim)
            .map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let n = norm_c(&v);
        v.iter_mut().for_each(|x| *x /= n);

        let tau = C64::new(0.0, -0.45);
        let got = expm_multiply_hermitian(apply_dense_c(&m), &v, tau, 1e-13, 60).unwrap();

        // Reference: exp(tau M) v through the dense eigendecomposition.
        let mut want = vec![C64::new(0.0, 0.0); dim];
        for k in 0..dim {
            let proj: C64 = (0..dim).map(|i| q[(i, k)] * v[i]).sum();
            let phase = (tau * lam[k]).exp();
            for i in 0..dim {
                want[i] += q[(i, k)] * phase * proj;
            }
        }
        let err = got
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err <= 1e-11, "Krylov exponential off by {err}");
        let drift = (norm_c(&got) - 1.0).abs();
        assert!(drift <= 1e-12, "unitary propagation drifted by {drift}");
    }

    #[test]
    fn eigenstate_propagation_is_exact_phase() {
        let dim = 24;
        let m = test_matrix(dim);
        let (lam, q) = m.clone().eigh(UPLO::Lower).unwrap();
        let v: Vec<C64> = (0..dim).map(|i| C64::new(q[(i, 0)], 0.0)).collect();
        let tau = C64::new(0.0, -2.0);
        let got = expm_multiply_hermitian(apply_dense_c(&m), &v, tau, 1e-12, 30).unwrap();
        let phase = (tau * lam[0]).exp();
        let err = got
            .iter()
            .zip(&v)
            .map(|(g, vi)| (g - phase * vi).norm())
            .fold(0.0, f64::max);
        assert!(err <= 1e-12, "eigenstate picked up more than a phase: {err}");
    }

    #[test]
    fn zero_vector_is_rejected() {
        let m = test_matrix(4);
        let v = vec![C64::new(0.0, 0.0); 4];
        let r = expm_multiply_hermitian(apply_dense_c(&m), &v, C64::new(0.0, -1.0), 1e-10, 10);
        assert!(matches!(r, Err(KrylovError::ZeroVector)));
    }

    #[test]
    fn lowest_pairs_match_dense_solver() {
        let dim = 120;
        let m = test_matrix(dim);
        let apply = |x: &[f64], y: &mut [f64]| {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = (0..dim).map(|j| m[(i, j)] * x[j]).sum();
            }
        };
        let solve = lanczos_lowest(apply, dim, 2, 1e-11, 200, 7).unwrap();
        let (lam, _) = m.eigh(UPLO::Lower).unwrap();
        assert!((solve.eigenvalues[0] - lam[0]).abs() <= 1e-9);
        assert!((solve.eigenvalues[1] - lam[1]).abs() <= 1e-9);
        assert!(solve.eigenvalues[0] <= solve.eigenvalues[1]);
    }

    #[test]
    fn tiny_operators_are_solved_exactly() {
        // A 1x1 "sector" must not confuse the iteration.
        let apply = |x: &[f64], y: &mut [f64]| y[0] = -2.5 * x[0];
        let solve = lanczos_lowest(apply, 1, 1, 1e-12, 10, 3).unwrap();
        assert_eq!(solve.eigenvalues[0], -2.5);
        assert_eq!(solve.eigenvectors[0].len(), 1);
    }

    #[test]
    fn warm_started_solve_matches_dense_ground_state() {
        let dim = 60;
        let m = test_matrix(dim);
        let (lam, q) = m.clone().eigh(UPLO::Lower).unwrap();
        // A deliberately poor but nonzero start vector.
        let v0: Vec<C64> = (0..dim)
            .map(|i| C64::new(1.0 + (i as f64 * 0.21).sin(), 0.3 * (i as f64 * 0.53).cos()))
            .collect();
        let solve = lowest_eigenpair_hermitian(apply_dense_c(&m), &v0, 1e-12, 120).unwrap();
        assert!(
            (solve.eigenvalue - lam[0]).abs() <= 1e-9,
            "eigenvalue {} vs dense {}",
            solve.eigenvalue,
            lam[0]
        );
        // The eigenvector matches up to a global phase.
        let overlap: C64 = (0..dim).map(|i| q[(i, 0)] * solve.eigenvector[i]).sum();
        assert!((overlap.norm() - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn warm_start_at_an_eigenvector_returns_it_unchanged() {
        let dim = 24;
        let m = test_matrix(dim);
        let (lam, q) = m.clone().eigh(UPLO::Lower).unwrap();
        // Start exactly at the *third* eigenvector: the Krylov space is
        // one-dimensional, so the solve must return that eigenpair (it cannot
        // tunnel to the true ground state), mirroring how a sweep solver
        // stays in the symmetry sector of its start tensor.
        let v0: Vec<C64> = (0..dim).map(|i| C64::new(q[(i, 2)], 0.0)).collect();
        let solve = lowest_eigenpair_hermitian(apply_dense_c(&m), &v0, 1e-12, 40).unwrap();
        assert_eq!(solve.basis_size, 1);
        assert!((solve.eigenvalue - lam[2]).abs() <= 1e-10);
    }
}
