//! Small dense positive-definite matrices.
//!
//! Everything here targets the regime the policies live in (dimension below
//! ten, thousands of rank-one updates): matrices are stored row-major in a
//! flat `Vec<f64>`, and inverse-metric norms and Gaussian draws go through a
//! cached Cholesky factor rather than an explicit inverse. The cache is
//! invalidated on every mutation and rebuilt lazily on the next read.

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::CabError;

/// Symmetric positive-definite matrix with a lazily cached Cholesky factor.
#[derive(Debug)]
pub struct PsdMatrix {
    dim: usize,
    data: Vec<f64>,
    // Lower-triangular factor L with L L^T = self; `None` inside the cell
    // records a failed factorization so it is not retried.
    chol: OnceLock<Option<Vec<f64>>>,
}

impl Clone for PsdMatrix {
    fn clone(&self) -> Self {
        PsdMatrix {
            dim: self.dim,
            data: self.data.clone(),
            chol: OnceLock::new(),
        }
    }
}

impl PsdMatrix {
    /// `scale * I`, the usual `λ₀ I` seed for design matrices.
    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = scale;
        }
        PsdMatrix {
            dim,
            data,
            chol: OnceLock::new(),
        }
    }

    /// All-zero matrix, useful as an accumulator before adding a diagonal.
    pub fn zeros(dim: usize) -> Self {
        PsdMatrix {
            dim,
            data: vec![0.0; dim * dim],
            chol: OnceLock::new(),
        }
    }

    /// Builds from a row-major buffer, checking symmetry to 1e-12.
    pub fn from_rows(dim: usize, data: Vec<f64>) -> Result<Self, CabError> {
        if data.len() != dim * dim {
            return Err(CabError::DimensionMismatch {
                context: "PsdMatrix::from_rows",
                expected: dim * dim,
                actual: data.len(),
            });
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let a = data[i * dim + j];
                let b = data[j * dim + i];
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(CabError::invalid(
                        "data",
                        format!("asymmetric entry at ({i},{j}): {a} vs {b}"),
                    ));
                }
            }
        }
        Ok(PsdMatrix {
            dim,
            data,
            chol: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    /// `self += x x^T`. Invalidates the cached factor.
    pub fn rank_one_add(&mut self, x: &[f64]) -> Result<(), CabError> {
        self.check_dim("rank_one_add", x)?;
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.data[i * self.dim + j] += x[i] * x[j];
            }
        }
        self.chol = OnceLock::new();
        Ok(())
    }

    /// `self += weight * x x^T`. Invalidates the cached factor.
    pub fn rank_one_add_scaled(&mut self, x: &[f64], weight: f64) -> Result<(), CabError> {
        self.check_dim("rank_one_add_scaled", x)?;
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.data[i * self.dim + j] += weight * x[i] * x[j];
            }
        }
        self.chol = OnceLock::new();
        Ok(())
    }

    /// `self += c * I`. Invalidates the cached factor.
    pub fn add_scaled_identity(&mut self, c: f64) {
        for i in 0..self.dim {
            self.data[i * self.dim + i] += c;
        }
        self.chol = OnceLock::new();
    }

    /// `√(x^T self⁻¹ x)`, via one triangular solve against the Cholesky
    /// factor; the inverse is never formed.
    pub fn mahalanobis_inv_norm(&self, x: &[f64]) -> Result<f64, CabError> {
        self.check_dim("mahalanobis_inv_norm", x)?;
        let l = self.cholesky()?;
        // Solve L z = x; then x^T A^{-1} x = ||z||^2.
        let z = forward_solve(l, self.dim, x);
        Ok(z.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// Solves `self * y = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, CabError> {
        self.check_dim("solve", b)?;
        let l = self.cholesky()?;
        let z = forward_solve(l, self.dim, b);
        Ok(back_solve_transpose(l, self.dim, &z))
    }

    /// Solves `L^T w = z` for the cached factor `L`, i.e. `w = L^{-T} z`.
    ///
    /// If `z` is standard normal, `w` has covariance `self⁻¹`.
    pub fn inv_transpose_apply(&self, z: &[f64]) -> Result<Vec<f64>, CabError> {
        self.check_dim("inv_transpose_apply", z)?;
        let l = self.cholesky()?;
        Ok(back_solve_transpose(l, self.dim, z))
    }

    /// Draws from `N(0, scale² · self⁻¹)` as `scale · L^{-T} z` with
    /// `z ~ N(0, I)`. Deterministic given the generator state.
    pub fn sample_scaled_inverse_gaussian<R: Rng + ?Sized>(
        &self,
        scale: f64,
        rng: &mut R,
    ) -> Result<Vec<f64>, CabError> {
        let z: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
        let mut w = self.inv_transpose_apply(&z)?;
        for v in &mut w {
            *v *= scale;
        }
        Ok(w)
    }

    /// The lower-triangular Cholesky factor, computed on first use.
    pub fn cholesky(&self) -> Result<&[f64], CabError> {
        let cached = self
            .chol
            .get_or_init(|| factorize(&self.data, self.dim).ok());
        match cached {
            Some(l) => Ok(l),
            None => {
                // Refactor once more purely to surface the pivot diagnostics.
                Err(factorize(&self.data, self.dim).expect_err("cached failure must reproduce"))
            }
        }
    }

    fn check_dim(&self, context: &'static str, x: &[f64]) -> Result<(), CabError> {
        if x.len() != self.dim {
            return Err(CabError::DimensionMismatch {
                context,
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok(())
    }
}

fn factorize(a: &[f64], dim: usize) -> Result<Vec<f64>, CabError> {
    let mut l = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut sum = a[i * dim + j];
            for k in 0..j {
                sum -= l[i * dim + k] * l[j * dim + k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(CabError::NotPositiveDefinite {
                        index: i,
                        pivot: sum,
                    });
                }
                l[i * dim + i] = sum.sqrt();
            } else {
                l[i * dim + j] = sum / l[j * dim + j];
            }
        }
    }
    Ok(l)
}

/// Solves `L z = b` for lower-triangular `L`.
fn forward_solve(l: &[f64], dim: usize, b: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; dim];
    for i in 0..dim {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * dim + k] * z[k];
        }
        z[i] = sum / l[i * dim + i];
    }
    z
}

/// Solves `L^T w = z` for lower-triangular `L`.
fn back_solve_transpose(l: &[f64], dim: usize, z: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; dim];
    for i in (0..dim).rev() {
        let mut sum = z[i];
        for k in (i + 1)..dim {
            sum -= l[k * dim + i] * w[k];
        }
        w[i] = sum / l[i * dim + i];
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit(dim: usize, k: usize) -> Vec<f64> {
        let mut e = vec![0.0; dim];
        e[k] = 1.0;
        e
    }

    /// Independent reference: full Gauss-Jordan inversion with partial
    /// pivoting, deliberately avoiding the Cholesky code path.
    fn gauss_jordan_inverse(a: &[f64], dim: usize) -> Vec<f64> {
        let mut aug = vec![0.0; dim * 2 * dim];
        for i in 0..dim {
            for j in 0..dim {
                aug[i * 2 * dim + j] = a[i * dim + j];
            }
            aug[i * 2 * dim + dim + i] = 1.0;
        }
        for col in 0..dim {
            let pivot_row = (col..dim)
                .max_by(|&r, &s| {
                    aug[r * 2 * dim + col]
                        .abs()
                        .partial_cmp(&aug[s * 2 * dim + col].abs())
                        .unwrap()
                })
                .unwrap();
            if pivot_row != col {
                for j in 0..2 * dim {
                    aug.swap(col * 2 * dim + j, pivot_row * 2 * dim + j);
                }
            }
            let pivot = aug[col * 2 * dim + col];
            assert!(pivot.abs() > 1e-14, "singular matrix in reference inverse");
            for j in 0..2 * dim {
                aug[col * 2 * dim + j] /= pivot;
            }
            for r in 0..dim {
                if r == col {
                    continue;
                }
                let factor = aug[r * 2 * dim + col];
                for j in 0..2 * dim {
                    aug[r * 2 * dim + j] -= factor * aug[col * 2 * dim + j];
                }
            }
        }
        let mut inv = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                inv[i * dim + j] = aug[i * 2 * dim + dim + j];
            }
        }
        inv
    }

    fn random_pd(dim: usize, rng: &mut ChaCha8Rng) -> PsdMatrix {
        let mut m = PsdMatrix::scaled_identity(dim, 0.5);
        for _ in 0..(3 * dim) {
            let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            m.rank_one_add(&x).unwrap();
        }
        m
    }

    #[test]
    fn rank_one_add_on_identity() {
        let mut v = PsdMatrix::scaled_identity(2, 1.0);
        v.rank_one_add(&unit(2, 0)).unwrap();
        assert_eq!(v.entry(0, 0), 2.0);
        assert_eq!(v.entry(1, 1), 1.0);
        assert_eq!(v.entry(0, 1), 0.0);
    }

    #[test]
    fn rank_one_add_zero_vector_is_noop() {
        let mut v = PsdMatrix::scaled_identity(3, 1.0);
        let before = v.data.clone();
        v.rank_one_add(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(v.data, before);
    }

    #[test]
    fn rank_one_adds_match_direct_summation() {
        let dim = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();

        let mut v = PsdMatrix::scaled_identity(dim, 1.0);
        for x in &xs {
            v.rank_one_add(x).unwrap();
        }

        // Direct oracle: I + sum of outer products in one pass.
        let mut direct = vec![0.0; dim * dim];
        for i in 0..dim {
            direct[i * dim + i] = 1.0;
        }
        for x in &xs {
            for i in 0..dim {
                for j in 0..dim {
                    direct[i * dim + j] += x[i] * x[j];
                }
            }
        }
        for (got, expected) in v.data.iter().zip(direct.iter()) {
            assert!((got - expected).abs() <= 1e-12);
        }
    }

    #[test]
    fn factor_reconstructs_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_pd(5, &mut rng);
        let l = m.cholesky().unwrap().to_vec();
        let mut frob = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                let mut rec = 0.0;
                for k in 0..5 {
                    rec += l[i * 5 + k] * l[j * 5 + k];
                }
                frob += (rec - m.entry(i, j)).powi(2);
            }
        }
        assert!(frob.sqrt() < 1e-10);
    }

    #[test]
    fn mahalanobis_identity_and_scaling() {
        let v = PsdMatrix::scaled_identity(3, 1.0);
        assert!((v.mahalanobis_inv_norm(&unit(3, 0)).unwrap() - 1.0).abs() < 1e-14);

        let v4 = PsdMatrix::scaled_identity(3, 4.0);
        assert!((v4.mahalanobis_inv_norm(&unit(3, 0)).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn mahalanobis_squared_equals_norm_over_lambda_for_scaled_identity() {
        let lambda = 3.7;
        let v = PsdMatrix::scaled_identity(4, lambda);
        let x = [0.3, -1.2, 2.0, 0.5];
        let n = v.mahalanobis_inv_norm(&x).unwrap();
        let direct = x.iter().map(|v| v * v).sum::<f64>() / lambda;
        assert!((n * n - direct).abs() < 1e-12);
    }

    #[test]
    fn mahalanobis_matches_explicit_inverse_oracle() {
        let dim = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let m = random_pd(dim, &mut rng);
            let inv = gauss_jordan_inverse(&m.data, dim);
            let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let mut quad = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    quad += x[i] * inv[i * dim + j] * x[j];
                }
            }
            let expected = quad.sqrt();
            let got = m.mahalanobis_inv_norm(&x).unwrap();
            assert!(
                (got - expected).abs() < 1e-10,
                "got {got}, expected {expected}"
            );
        }
    }

    #[test]
    fn non_pd_matrix_is_rejected() {
        let m = PsdMatrix::from_rows(2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(
            m.mahalanobis_inv_norm(&[1.0, 0.0]),
            Err(CabError::NotPositiveDefinite { .. })
        ));
        // A second call hits the cached failure and must report the same error.
        assert!(matches!(
            m.solve(&[1.0, 0.0]),
            Err(CabError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn sampler_zero_scale_gives_zero() {
        let h = PsdMatrix::scaled_identity(3, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = h.sample_scaled_inverse_gaussian(0.0, &mut rng).unwrap();
        assert!(s.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sampler_identity_returns_raw_normals() {
        let h = PsdMatrix::scaled_identity(3, 1.0);
        let mut rng_a = ChaCha8Rng::seed_from_u64(5);
        let mut rng_b = rng_a.clone();
        let s = h.sample_scaled_inverse_gaussian(1.0, &mut rng_a).unwrap();
        let raw: Vec<f64> = (0..3)
            .map(|_| rng_b.sample::<f64, _>(StandardNormal))
            .collect();
        for (a, b) in s.iter().zip(raw.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn sampler_covariance_matches_scaled_inverse() {
        // H = diag(4, 1), a = 2  =>  covariance a^2 H^{-1} = diag(1, 4).
        let mut h = PsdMatrix::zeros(2);
        h.add_scaled_identity(1.0);
        h.rank_one_add_scaled(&[1.0, 0.0], 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let mut sums = [0.0f64; 2];
        let mut cov = [0.0f64; 4];
        for _ in 0..n {
            let s = h.sample_scaled_inverse_gaussian(2.0, &mut rng).unwrap();
            sums[0] += s[0];
            sums[1] += s[1];
            cov[0] += s[0] * s[0];
            cov[1] += s[0] * s[1];
            cov[2] += s[1] * s[0];
            cov[3] += s[1] * s[1];
        }
        let nf = n as f64;
        for c in &mut cov {
            *c /= nf;
        }
        let target = [1.0, 0.0, 0.0, 4.0];
        let diff_frob: f64 = cov
            .iter()
            .zip(target.iter())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let target_frob: f64 = target.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(
            diff_frob / target_frob < 0.05,
            "relative error {}",
            diff_frob / target_frob
        );

        // Mean within 0.02 * a * sqrt(lambda_max(H^{-1})) of zero per coordinate:
        // lambda_max(H^{-1}) = 1 here, a = 2.
        for s in sums {
            assert!((s / nf).abs() < 0.02 * 2.0);
        }
    }

    #[test]
    fn trace_accumulates_unit_norm_adds() {
        let dim = 5;
        let lambda0 = 2.0;
        let mut v = PsdMatrix::scaled_identity(dim, lambda0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let adds = 250;
        for _ in 0..adds {
            let mut x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            for xi in &mut x {
                *xi /= norm;
            }
            v.rank_one_add(&x).unwrap();
        }
        let expected = lambda0 * dim as f64 + adds as f64;
        assert!((v.trace() - expected).abs() < 1e-9);
    }

    #[test]
    fn solve_matches_inverse_oracle() {
        let dim = 6;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let m = random_pd(dim, &mut rng);
        let inv = gauss_jordan_inverse(&m.data, dim);
        let b: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y = m.solve(&b).unwrap();
        for i in 0..dim {
            let mut expected = 0.0;
            for j in 0..dim {
                expected += inv[i * dim + j] * b[j];
            }
            assert!((y[i] - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let v = PsdMatrix::scaled_identity(3, 1.0);
        assert!(matches!(
            v.mahalanobis_inv_norm(&[1.0, 2.0]),
            Err(CabError::DimensionMismatch { .. })
        ));
    }
}
