use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::amg::{Jacobi, Preconditioner};
use super::csr::{dot, norm2, CsrMatrix, CHUNK};
use super::SolveError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    pub rel_tol: f64,
    /// Defaults to 10 * sqrt(n) + 1000 when unset.
    pub max_iter: Option<usize>,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            rel_tol: 1e-8,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SolveResult {
    #[serde(skip)]
    pub u: Vec<f64>,
    pub iterations: usize,
    pub rel_residual: f64,
    pub seconds: f64,
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.par_chunks_mut(CHUNK).zip(x.par_chunks(CHUNK)).for_each(|(yc, xc)| {
        for (yi, xi) in yc.iter_mut().zip(xc) {
            *yi += alpha * xi;
        }
    });
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// definite `k`. Converged when the true residual satisfies
/// ||f - K u|| <= rel_tol ||f||.
pub fn solve_cg(k: &CsrMatrix, f: &[f64], options: &CgOptions) -> Result<SolveResult, SolveError> {
    let start = Instant::now();
    let jacobi = Jacobi::new(k)?;
    let mut result = solve_pcg(k, f, options, &jacobi)?;
    result.seconds = start.elapsed().as_secs_f64();
    Ok(result)
}

/// Preconditioned conjugate gradients with the same stopping rule as
/// [`solve_cg`].
pub fn solve_pcg(
    k: &CsrMatrix,
    f: &[f64],
    options: &CgOptions,
    precond: &dyn Preconditioner,
) -> Result<SolveResult, SolveError> {
    let start = Instant::now();
    let n = k.nrows();
    assert_eq!(f.len(), n);
    let max_iter = options
        .max_iter
        .unwrap_or_else(|| (10.0 * (n as f64).sqrt()) as usize + 1000);

    let f_norm = norm2(f);
    let mut u = vec![0.0; n];
    if f_norm == 0.0 {
        return Ok(SolveResult {
            u,
            iterations: 0,
            rel_residual: 0.0,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    let target = options.rel_tol * f_norm;

    let mut r = f.to_vec();
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut history: Vec<f64> = Vec::new();
    let mut iterations = 0;

    loop {
        // (re)start from the true residual r = f - K u
        precond.apply(&r, &mut z);
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        let mut rnorm = norm2(&r);
        while rnorm > target && iterations < max_iter {
            k.mul_vec_into(&p, &mut q);
            let pq = dot(&p, &q);
            if !(pq > 0.0) {
                return Err(SolveError::SolverDiverged {
                    iterations,
                    rel_residual: rnorm / f_norm,
                    history_tail: tail(&history),
                });
            }
            let alpha = rz / pq;
            axpy(alpha, &p, &mut u);
            axpy(-alpha, &q, &mut r);
            precond.apply(&r, &mut z);
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            p.par_chunks_mut(CHUNK).zip(z.par_chunks(CHUNK)).for_each(|(pc, zc)| {
                for (pi, zi) in pc.iter_mut().zip(zc) {
                    *pi = zi + beta * *pi;
                }
            });
            rnorm = norm2(&r);
            iterations += 1;
            history.push(rnorm / f_norm);
        }

        k.mul_vec_into(&u, &mut q);
        r.par_chunks_mut(CHUNK)
            .zip(f.par_chunks(CHUNK).zip(q.par_chunks(CHUNK)))
            .for_each(|(rc, (fc, qc))| {
                for (ri, (fi, qi)) in rc.iter_mut().zip(fc.iter().zip(qc)) {
                    *ri = fi - qi;
                }
            });
        let true_res = norm2(&r);
        if true_res <= target {
            return Ok(SolveResult {
                u,
                iterations,
                rel_residual: true_res / f_norm,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
        if iterations >= max_iter {
            return Err(SolveError::SolverDiverged {
                iterations,
                rel_residual: true_res / f_norm,
                history_tail: tail(&history),
            });
        }
    }
}

fn tail(history: &[f64]) -> Vec<f64> {
    history[history.len().saturating_sub(10)..].to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn identity_converges_in_one_iteration() {
        let k = CsrMatrix::identity(5);
        let f = vec![1.0, -2.0, 3.0, 0.5, 4.0];
        let r = solve_cg(&k, &f, &CgOptions::default()).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.u, f);
    }

    #[test]
    fn diagonal_system() {
        let k = CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 4.0)]);
        let r = solve_cg(&k, &[1.0, 2.0, 4.0], &CgOptions::default()).unwrap();
        assert!(r.iterations <= 3);
        for v in &r.u {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn random_spd_matches_dense_cholesky() {
        let n = 50;
        let mut s = 99u64;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let a = DMatrix::from_fn(n, n, |_, _| next());
        let spd = a.transpose() * &a + DMatrix::identity(n, n);
        let b = DVector::from_fn(n, |_, _| next());
        let exact = spd.clone().cholesky().unwrap().solve(&b);
        let mut trip = Vec::new();
        for i in 0..n {
            for j in 0..n {
                trip.push((i, j, spd[(i, j)]));
            }
        }
        let k = CsrMatrix::from_triplets(n, n, &trip);
        let r = solve_cg(&k, b.as_slice(), &CgOptions::default()).unwrap();
        let err = (DVector::from_vec(r.u) - &exact).norm() / exact.norm();
        assert!(err < 1e-7, "relative error {err}");
        assert!(r.rel_residual <= 1e-8);
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let r = solve_cg(&CsrMatrix::identity(3), &[0.0; 3], &CgOptions::default()).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.u, vec![0.0; 3]);
    }

    #[test]
    fn zero_diagonal_is_reported() {
        let k = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0)]);
        assert!(matches!(
            solve_cg(&k, &[1.0, 1.0], &CgOptions::default()),
            Err(SolveError::ZeroDiagonal { dof: 1 })
        ));
    }

    #[test]
    fn iteration_cap_reports_divergence() {
        let n = 30;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 2.0));
            if i + 1 < n {
                trip.push((i, i + 1, -1.0));
                trip.push((i + 1, i, -1.0));
            }
        }
        let k = CsrMatrix::from_triplets(n, n, &trip);
        let opts = CgOptions {
            rel_tol: 1e-12,
            max_iter: Some(3),
        };
        match solve_cg(&k, &vec![1.0; n], &opts) {
            Err(SolveError::SolverDiverged {
                iterations,
                history_tail,
                ..
            }) => {
                assert_eq!(iterations, 3);
                assert_eq!(history_tail.len(), 3);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
