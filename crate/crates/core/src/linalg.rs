//! Dense real symmetric eigensolver.
//!
//! Householder reduction to tridiagonal form followed by the implicit QL
//! iteration with Wilkinson-type shifts. Eigenvectors are accumulated only on
//! request; the eigenvalue-only path is what large spectra use.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const MAX_QL_SWEEPS: usize = 64;

#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in the order of `values`.
    pub vectors: Option<DMatrix<f64>>,
}

impl SymmetricEigen {
    /// `sum_i (v_i . x)^2 f(lambda_i)` for a scalar function of the spectrum.
    pub fn quadratic_form<T, F>(&self, x: &[f64], f: F) -> T
    where
        T: std::iter::Sum<T>,
        F: Fn(f64, f64) -> T,
    {
        let vectors = self
            .vectors
            .as_ref()
            .expect("quadratic_form requires eigenvectors");
        self.values
            .iter()
            .enumerate()
            .map(|(i, &lambda)| {
                let proj: f64 = vectors.column(i).iter().zip(x).map(|(v, x)| v * x).sum();
                f(lambda, proj * proj)
            })
            .sum()
    }
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    decompose(m, false).map(|e| e.values)
}

/// Eigenvalues and eigenvectors of a symmetric matrix.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen> {
    decompose(m, true)
}

fn decompose(m: &DMatrix<f64>, want_vectors: bool) -> Result<SymmetricEigen> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::domain(format!(
            "eigensolver needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if n == 0 {
        return Ok(SymmetricEigen {
            values: Vec::new(),
            vectors: want_vectors.then(|| DMatrix::zeros(0, 0)),
        });
    }
    if let Some(bad) = m.iter().find(|v| !v.is_finite()) {
        return Err(Error::numerical(
            "symmetric eigensolver",
            format!("non-finite matrix entry {bad} in {n}x{n} input"),
        ));
    }

    // Row-major working copy of the symmetrized input.
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (m[(i, j)] + m[(j, i)]);
        }
    }

    let (mut diag, mut off, betas) = tridiagonalize(&mut a, n);
    let mut z = want_vectors.then(|| accumulate_reflectors(&a, &betas, n));
    implicit_ql(&mut diag, &mut off, z.as_deref_mut(), n).map_err(|detail| {
        let norm = m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        Error::numerical(
            "symmetric eigensolver",
            format!("{detail} (n = {n}, max |entry| = {norm:.6e})"),
        )
    })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = z.map(|z| DMatrix::from_fn(n, n, |r, col| z[r * n + order[col]]));
    Ok(SymmetricEigen { values, vectors })
}

/// Reduces the row-major symmetric matrix `a` to tridiagonal form in place.
///
/// Returns the diagonal, the off-diagonal (`off[k]` couples `k` and `k+1`,
/// `off[n-1] = 0`) and the reflector scales. The Householder vector for step
/// `k` is left in row `k`, columns `k+1..n`.
fn tridiagonalize(a: &mut [f64], n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    let mut betas = vec![0.0; n];
    let mut p = vec![0.0; n];

    for k in 0..n.saturating_sub(2) {
        diag[k] = a[k * n + k];
        let start = k + 1;
        let x0 = a[k * n + start];
        let tail: f64 = a[k * n + start + 1..(k + 1) * n]
            .iter()
            .map(|v| v * v)
            .sum();
        if tail == 0.0 {
            off[k] = x0;
            for j in start..n {
                a[k * n + j] = 0.0;
            }
            continue;
        }
        let norm = (x0 * x0 + tail).sqrt();
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        let v0 = x0 - alpha;
        a[k * n + start] = v0;
        let beta = 2.0 / (v0 * v0 + tail);
        off[k] = alpha;
        betas[k] = beta;

        let v: Vec<f64> = a[k * n + start..(k + 1) * n].to_vec();
        // p = beta * A22 v
        for (i, pi) in (start..n).zip(p.iter_mut()) {
            let row = &a[i * n + start..(i + 1) * n];
            *pi = beta * row.iter().zip(&v).map(|(r, v)| r * v).sum::<f64>();
        }
        let m = n - start;
        let pv: f64 = p[..m].iter().zip(&v).map(|(p, v)| p * v).sum();
        let kappa = 0.5 * beta * pv;
        for (pi, vi) in p[..m].iter_mut().zip(&v) {
            *pi -= kappa * vi;
        }
        // A22 -= v w^T + w v^T, with w stored in p.
        for (ii, i) in (start..n).enumerate() {
            let (vi, wi) = (v[ii], p[ii]);
            let row = &mut a[i * n + start..(i + 1) * n];
            for ((r, vj), wj) in row.iter_mut().zip(&v).zip(&p[..m]) {
                *r -= vi * wj + wi * vj;
            }
        }
    }
    if n >= 2 {
        diag[n - 2] = a[(n - 2) * n + n - 2];
        off[n - 2] = a[(n - 2) * n + n - 1];
    }
    diag[n - 1] = a[(n - 1) * n + n - 1];
    off[n - 1] = 0.0;
    (diag, off, betas)
}

/// Forms Q = H_0 H_1 ... H_{n-3} (row-major) from the stored reflectors.
fn accumulate_reflectors(a: &[f64], betas: &[f64], n: usize) -> Vec<f64> {
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        q[i * n + i] = 1.0;
    }
    let mut scratch = vec![0.0; n];
    for k in (0..n.saturating_sub(2)).rev() {
        let beta = betas[k];
        if beta == 0.0 {
            continue;
        }
        let start = k + 1;
        let v = &a[k * n + start..(k + 1) * n];
        // scratch_j = sum_i v_i Q[i][j]
        scratch[start..].iter_mut().for_each(|s| *s = 0.0);
        for (ii, i) in (start..n).enumerate() {
            let vi = v[ii];
            for j in start..n {
                scratch[j] += vi * q[i * n + j];
            }
        }
        for (ii, i) in (start..n).enumerate() {
            let scale = beta * v[ii];
            for j in start..n {
                q[i * n + j] -= scale * scratch[j];
            }
        }
    }
    q
}

/// Implicit QL iteration on a symmetric tridiagonal matrix. On success `diag`
/// holds the eigenvalues and the columns of `z` (if given) have been rotated
/// into the corresponding eigenvectors.
fn implicit_ql(
    diag: &mut [f64],
    off: &mut [f64],
    mut z: Option<&mut [f64]>,
    n: usize,
) -> std::result::Result<(), String> {
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let scale = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * scale {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_QL_SWEEPS {
                return Err(format!(
                    "QL iteration did not converge for eigenvalue {l} after {MAX_QL_SWEEPS} sweeps (residual coupling {:.3e})",
                    off[l]
                ));
            }

            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for row in z.chunks_exact_mut(n) {
                        let f = row[i + 1];
                        row[i + 1] = s * row[i] + c * f;
                        row[i] = c * row[i] - s * f;
                    }
                }
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &g + g.transpose()
    }

    fn max_residual(m: &DMatrix<f64>, e: &SymmetricEigen) -> f64 {
        let v = e.vectors.as_ref().unwrap();
        (0..m.nrows())
            .map(|i| {
                let col = v.column(i);
                (m * col - col * e.values[i]).norm()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn diagonal_matrix() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, -1.0, 2.0]));
        let e = symmetric_eigen(&m).unwrap();
        assert_eq!(e.values, vec![-1.0, 2.0, 3.0]);
        assert!(max_residual(&m, &e) < 1e-14);
    }

    #[test]
    fn tiny_sizes() {
        let one = DMatrix::from_element(1, 1, 5.0);
        assert_eq!(symmetric_eigenvalues(&one).unwrap(), vec![5.0]);
        let two = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = symmetric_eigen(&two).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-15 && (e.values[1] - 3.0).abs() < 1e-15);
        assert!(max_residual(&two, &e) < 1e-14);
        assert!(symmetric_eigenvalues(&DMatrix::zeros(0, 0))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn residuals_and_orthogonality_on_random_matrices() {
        for (n, seed) in [(3, 1), (7, 2), (20, 3), (64, 4), (150, 5)] {
            let m = random_symmetric(n, seed);
            let e = symmetric_eigen(&m).unwrap();
            let scale = m.norm();
            assert!(max_residual(&m, &e) <= 1e-12 * scale.max(1.0), "n = {n}");
            let v = e.vectors.as_ref().unwrap();
            let gram = v.transpose() * v;
            assert!((gram - DMatrix::identity(n, n)).amax() < 1e-12);
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
            let values_only = symmetric_eigenvalues(&m).unwrap();
            for (a, b) in values_only.iter().zip(&e.values) {
                assert!((a - b).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn trace_is_preserved() {
        let m = random_symmetric(40, 9);
        let vals = symmetric_eigenvalues(&m).unwrap();
        let sum: f64 = vals.iter().sum();
        assert!((sum - m.trace()).abs() < 1e-11);
    }

    #[test]
    fn repeated_eigenvalues() {
        // Rank-one plus identity: eigenvalue 1 with multiplicity n-1.
        let n = 12;
        let u = nalgebra::DVector::from_fn(n, |i, _| (i + 1) as f64);
        let m = DMatrix::identity(n, n) + &u * u.transpose();
        let e = symmetric_eigen(&m).unwrap();
        for v in &e.values[..n - 1] {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!((e.values[n - 1] - (1.0 + u.norm_squared())).abs() < 1e-10);
        assert!(max_residual(&m, &e) < 1e-11);
    }

    #[test]
    fn rejects_non_square_and_non_finite() {
        assert!(symmetric_eigenvalues(&DMatrix::zeros(2, 3)).is_err());
        let mut m = DMatrix::identity(3, 3);
        m[(1, 1)] = f64::NAN;
        assert!(matches!(
            symmetric_eigenvalues(&m),
            Err(Error::Numerical { .. })
        ));
    }
}
