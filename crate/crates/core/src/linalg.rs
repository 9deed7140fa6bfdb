//! Dense symmetric positive-definite solves and the diagonal of an SPD inverse.
//!
//! Everything here operates on well-scaled matrices (standardized covariates,
//! safeguarded Hessians). Factorization is an unpivoted Cholesky with a
//! relative pivot check; callers decide whether to jitter and retry on
//! [`Error::NotSpd`].

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

pub type DenseMatrix = Array2<f64>;
pub type DenseVector = Array1<f64>;

/// Symmetry tolerance relative to the largest absolute entry.
const SYMMETRY_RTOL: f64 = 1e-10;
/// A pivot below this fraction of the largest diagonal entry is rejected.
const PIVOT_RTOL: f64 = 1e-12;

/// Lower-triangular Cholesky factor, stored row-major in a full square buffer.
struct CholeskyFactor {
    l: Vec<f64>,
    n: usize,
}

fn check_square_symmetric(m: &DenseMatrix) -> Result<usize> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "spd matrix",
            expected: n,
            got: m.ncols(),
        });
    }
    let max_abs = m.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let tol = SYMMETRY_RTOL * max_abs;
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[[i, j]] - m[[j, i]]).abs() > tol {
                return Err(Error::NotSpd(format!(
                    "asymmetry at ({i},{j}): {} vs {}",
                    m[[i, j]],
                    m[[j, i]]
                )));
            }
        }
    }
    Ok(n)
}

fn factorize(m: &DenseMatrix) -> Result<CholeskyFactor> {
    let n = check_square_symmetric(m)?;
    let max_diag = (0..n).fold(0.0f64, |a, i| a.max(m[[i, i]]));
    if n > 0 && max_diag <= 0.0 {
        return Err(Error::NotSpd("no positive diagonal entry".into()));
    }
    let pivot_floor = PIVOT_RTOL * max_diag;

    let mut l = vec![0.0f64; n * n];
    // Copy the lower triangle; the factorization only reads below the diagonal.
    for i in 0..n {
        for j in 0..=i {
            l[i * n + j] = m[[i, j]];
        }
    }
    for j in 0..n {
        let (head, tail) = l.split_at_mut((j + 1) * n);
        let row_j = &mut head[j * n..j * n + j + 1];
        let pivot = row_j[j] - dot(&row_j[..j], &row_j[..j]);
        if pivot < pivot_floor {
            return Err(Error::NotSpd(format!(
                "pivot {pivot:.3e} below floor {pivot_floor:.3e} at column {j}"
            )));
        }
        let diag = pivot.sqrt();
        row_j[j] = diag;
        let row_j = &head[j * n..j * n + j + 1];
        for chunk in tail.chunks_exact_mut(n) {
            let s = chunk[j] - dot(&chunk[..j], &row_j[..j]);
            chunk[j] = s / diag;
        }
    }
    Ok(CholeskyFactor { l, n })
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl CholeskyFactor {
    /// Solve L Lᵀ x = b.
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = vec![0.0f64; n];
        // Forward: L y = b.
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            x[i] = (b[i] - dot(row, &x[..i])) / self.l[i * n + i];
        }
        // Backward: Lᵀ x = y, column-oriented so row accesses stay contiguous.
        for i in (0..n).rev() {
            x[i] /= self.l[i * n + i];
            let xi = x[i];
            let row = &self.l[i * n..i * n + i];
            for (xk, lik) in x[..i].iter_mut().zip(row) {
                *xk -= lik * xi;
            }
        }
        x
    }

    /// Diagonal of (L Lᵀ)⁻¹ via forward solves against unit vectors.
    fn inverse_diagonal(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0f64; n];
        let mut y = vec![0.0f64; n];
        for d in 0..n {
            y[d] = 1.0 / self.l[d * n + d];
            let mut acc = y[d] * y[d];
            for i in (d + 1)..n {
                let row = &self.l[i * n + d..i * n + i];
                let s = -dot(row, &y[d..i]) / self.l[i * n + i];
                y[i] = s;
                acc += s * s;
            }
            out[d] = acc;
        }
        out
    }
}

/// Solve M x = b for symmetric positive-definite M without forming M⁻¹.
pub fn spd_solve(m: &DenseMatrix, b: &DenseVector) -> Result<DenseVector> {
    if b.len() != m.nrows() {
        return Err(Error::DimensionMismatch {
            what: "spd_solve rhs",
            expected: m.nrows(),
            got: b.len(),
        });
    }
    let f = factorize(m)?;
    let b_slice = b.as_slice().expect("contiguous rhs");
    Ok(Array1::from_vec(f.solve(b_slice)))
}

/// Diagonal of M⁻¹ for symmetric positive-definite M.
pub fn spd_inverse_diagonal(m: &DenseMatrix) -> Result<DenseVector> {
    let f = factorize(m)?;
    Ok(Array1::from_vec(f.inverse_diagonal()))
}

/// Solve M x = b and return diag(M⁻¹) from a single factorization.
pub(crate) fn spd_solve_and_inverse_diagonal(
    m: &DenseMatrix,
    b: &DenseVector,
) -> Result<(DenseVector, DenseVector)> {
    if b.len() != m.nrows() {
        return Err(Error::DimensionMismatch {
            what: "spd_solve rhs",
            expected: m.nrows(),
            got: b.len(),
        });
    }
    let f = factorize(m)?;
    let x = f.solve(b.as_slice().expect("contiguous rhs"));
    let d = f.inverse_diagonal();
    Ok((Array1::from_vec(x), Array1::from_vec(d)))
}

/// Whether the factorization accepts `m` as SPD under the pivot rule.
pub(crate) fn is_spd(m: &DenseMatrix) -> bool {
    factorize(m).is_ok()
}

/// Run `op` on `m`; on a NotSpd failure add `1e-10 · trace/D` to the diagonal
/// once and retry. The second failure is propagated to the caller.
pub(crate) fn with_jitter_retry<T>(
    m: &DenseMatrix,
    op: impl Fn(&DenseMatrix) -> Result<T>,
) -> Result<T> {
    match op(m) {
        Err(Error::NotSpd(_)) => {
            let n = m.nrows();
            let trace: f64 = (0..n).map(|i| m[[i, i]]).sum();
            let jitter = 1e-10 * trace / n as f64;
            let mut jittered = m.clone();
            for i in 0..n {
                jittered[[i, i]] += jitter;
            }
            op(&jittered)
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Naive Gauss-Jordan inverse with partial pivoting. Test oracle only,
    /// independent of the Cholesky path.
    fn elimination_inverse(m: &DenseMatrix) -> DenseMatrix {
        let n = m.nrows();
        let mut a = m.clone();
        let mut inv = Array2::<f64>::eye(n);
        for col in 0..n {
            let mut piv = col;
            for r in (col + 1)..n {
                if a[[r, col]].abs() > a[[piv, col]].abs() {
                    piv = r;
                }
            }
            if piv != col {
                for j in 0..n {
                    a.swap([col, j], [piv, j]);
                    inv.swap([col, j], [piv, j]);
                }
            }
            let d = a[[col, col]];
            assert!(d.abs() > 1e-14, "oracle: singular matrix");
            for j in 0..n {
                a[[col, j]] /= d;
                inv[[col, j]] /= d;
            }
            for r in 0..n {
                if r != col {
                    let f = a[[r, col]];
                    for j in 0..n {
                        a[[r, j]] -= f * a[[col, j]];
                        inv[[r, j]] -= f * inv[[col, j]];
                    }
                }
            }
        }
        inv
    }

    fn random_spd(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let g = Array2::from_shape_fn((n, n), |_| StandardNormal.sample(&mut rng));
        g.t().dot(&g) + Array2::<f64>::eye(n)
    }

    #[test]
    fn solve_identity() {
        let m = Array2::<f64>::eye(3);
        let b = array![1.0, 2.0, 3.0];
        let x = spd_solve(&m, &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn solve_diagonal() {
        let m = Array2::from_diag(&array![2.0, 4.0]);
        let x = spd_solve(&m, &array![2.0, 8.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15);
        assert!((x[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn solve_matches_elimination_oracle() {
        let m = random_spd(5, 7);
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let b = Array1::from_shape_fn(5, |_| StandardNormal.sample(&mut rng));
        let x = spd_solve(&m, &b).unwrap();

        let oracle = elimination_inverse(&m).dot(&b);
        for (a, o) in x.iter().zip(oracle.iter()) {
            assert!((a - o).abs() < 1e-9, "{a} vs {o}");
        }
        // Residual bound from the contract.
        let resid = &m.dot(&x) - &b;
        let binf = b.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let rinf = resid.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        assert!(rinf <= 1e-8 * (1.0 + binf), "residual {rinf}");
    }

    #[test]
    fn inverse_diagonal_trivial_cases() {
        let d = spd_inverse_diagonal(&Array2::from_diag(&array![2.0, 4.0])).unwrap();
        assert!((d[0] - 0.5).abs() < 1e-15);
        assert!((d[1] - 0.25).abs() < 1e-15);
        let i = spd_inverse_diagonal(&Array2::<f64>::eye(4)).unwrap();
        assert_eq!(i, Array1::<f64>::ones(4));
    }

    #[test]
    fn inverse_diagonal_matches_full_inverse_oracle() {
        let m = random_spd(4, 21);
        let d = spd_inverse_diagonal(&m).unwrap();
        let inv = elimination_inverse(&m);
        for i in 0..4 {
            assert!((d[i] - inv[[i, i]]).abs() < 1e-10);
            assert!(d[i] > 0.0);
        }
    }

    #[test]
    fn inverse_diagonal_consistent_with_unit_solves() {
        let m = random_spd(6, 33);
        let d = spd_inverse_diagonal(&m).unwrap();
        for i in 0..6 {
            let mut e = Array1::zeros(6);
            e[i] = 1.0;
            let x = spd_solve(&m, &e).unwrap();
            assert!((d[i] - x[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        let indef = array![[1.0, 0.0], [0.0, -1.0]];
        assert!(matches!(spd_solve(&indef, &array![1.0, 1.0]), Err(Error::NotSpd(_))));

        let asym = array![[1.0, 0.5], [0.0, 1.0]];
        assert!(matches!(spd_inverse_diagonal(&asym), Err(Error::NotSpd(_))));

        let m = Array2::<f64>::eye(3);
        assert!(matches!(
            spd_solve(&m, &array![1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_near_singular_pivot() {
        // Second pivot collapses to ~0 after elimination.
        let m = array![[1.0, 1.0], [1.0, 1.0 + 1e-16]];
        assert!(matches!(spd_solve(&m, &array![1.0, 1.0]), Err(Error::NotSpd(_))));
    }

    #[test]
    fn deterministic_bitwise() {
        let m = random_spd(5, 99);
        let mut rng = ChaCha12Rng::seed_from_u64(100);
        let b = Array1::from_shape_fn(5, |_| StandardNormal.sample(&mut rng));
        let x1 = spd_solve(&m, &b).unwrap();
        let x2 = spd_solve(&m, &b).unwrap();
        assert_eq!(x1, x2);
        assert_eq!(
            spd_inverse_diagonal(&m).unwrap(),
            spd_inverse_diagonal(&m).unwrap()
        );
    }
}
