//! Small dense linear algebra helpers: symmetric eigendecomposition by
//! cyclic Jacobi rotations, Cholesky factorization and triangular solves.
//! Everything here targets the small matrices this crate works with
//! (R x R Gram matrices, quadratic test problems up to n = 200).

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{CpdError, Result};

/// Eigendecomposition of a symmetric matrix via cyclic Jacobi sweeps.
/// Returns (eigenvalues, eigenvectors) with eigenvectors in columns,
/// so `m = V diag(w) V^T`. Eigenvalues are not sorted.
pub fn sym_eigen(m: &ArrayView2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    let mut a = m.to_owned();
    let mut v = Array2::<f64>::eye(n);
    let max_sweeps = 64;
    for _ in 0..max_sweeps {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[[i, j]] * a[[i, j]];
            }
        }
        let scale: f64 = a.iter().map(|x| x * x).sum();
        if off <= f64::EPSILON * f64::EPSILON * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let app = a[[p, p]];
                let aqq = a[[q, q]];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let w = Array1::from_iter((0..n).map(|i| a[[i, i]]));
    (w, v)
}

/// Lower-triangular Cholesky factor of an SPD matrix, or None if the
/// matrix is not positive definite.
pub fn cholesky(m: &ArrayView2<f64>) -> Option<Array2<f64>> {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = m[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// Solves `L L^T x = b` given a lower-triangular Cholesky factor.
pub fn cholesky_solve(l: &ArrayView2<f64>, b: &ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = b.to_owned();
    for i in 0..n {
        for k in 0..i {
            let t = l[[i, k]] * y[k];
            y[i] -= t;
        }
        y[i] /= l[[i, i]];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let t = l[[k, i]] * y[k];
            y[i] -= t;
        }
        y[i] /= l[[i, i]];
    }
    y
}

/// Orthonormal basis for the column span of `a` via modified Gram-Schmidt
/// with one re-orthogonalization pass. Columns must be independent.
pub fn orthonormal_columns(a: &ArrayView2<f64>) -> Result<Array2<f64>> {
    let (m, n) = (a.nrows(), a.ncols());
    if n > m {
        return Err(CpdError::ShapeMismatch(format!(
            "cannot orthonormalize {n} columns in dimension {m}"
        )));
    }
    let mut q = a.to_owned();
    for j in 0..n {
        for _pass in 0..2 {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let qi = q.column(i).to_owned();
                q.column_mut(j).zip_mut_with(&qi, |x, &y| *x -= proj * y);
            }
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(CpdError::InvalidParameter(
                "rank-deficient matrix in orthonormalization".into(),
            ));
        }
        q.column_mut(j).mapv_inplace(|x| x / norm);
    }
    Ok(q)
}

/// Largest absolute asymmetry |m - m^T| relative to the largest entry.
pub fn relative_asymmetry(m: &ArrayView2<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            scale = scale.max(m[[i, j]].abs());
            if j > i {
                worst = worst.max((m[[i, j]] - m[[j, i]]).abs());
            }
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_spd(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut m = Array2::<f64>::zeros((n, n));
        m.mapv_inplace(|_| rng.random::<f64>() - 0.5);
        let mt = m.t().to_owned();
        let mut spd = mt.dot(&m);
        for i in 0..n {
            spd[[i, i]] += n as f64;
        }
        // exact symmetry
        for i in 0..n {
            for j in 0..i {
                let v = spd[[i, j]];
                spd[[j, i]] = v;
            }
        }
        spd
    }

    #[test]
    fn jacobi_reconstructs_matrix() {
        let m = random_spd(7, 1);
        let (w, v) = sym_eigen(&m.view());
        let mut rebuilt = Array2::<f64>::zeros((7, 7));
        for i in 0..7 {
            for j in 0..7 {
                let mut acc = 0.0;
                for k in 0..7 {
                    acc += v[[i, k]] * w[k] * v[[j, k]];
                }
                rebuilt[[i, j]] = acc;
            }
        }
        for (a, b) in m.iter().zip(rebuilt.iter()) {
            assert!((a - b).abs() < 1e-10 * m[[0, 0]].abs().max(1.0));
        }
    }

    #[test]
    fn jacobi_diagonal_matrix() {
        let m = array![[3.0, 0.0], [0.0, -1.0]];
        let (w, _) = sym_eigen(&m.view());
        let mut vals: Vec<f64> = w.to_vec();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((vals[0] + 1.0).abs() < 1e-14);
        assert!((vals[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn cholesky_solve_round_trip() {
        let m = random_spd(9, 2);
        let l = cholesky(&m.view()).expect("spd");
        let b = Array1::from_iter((0..9).map(|i| (i as f64) - 4.0));
        let x = cholesky_solve(&l.view(), &b.view());
        let r = m.dot(&x) - &b;
        assert!(r.dot(&r).sqrt() < 1e-10);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(cholesky(&m.view()).is_none());
    }

    #[test]
    fn orthonormalization_is_orthonormal() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut a = Array2::<f64>::zeros((12, 5));
        a.mapv_inplace(|_| rng.random::<f64>() - 0.5);
        let q = orthonormal_columns(&a.view()).unwrap();
        let g = q.t().dot(&q);
        for i in 0..5 {
            for j in 0..5 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g[[i, j]] - expect).abs() < 1e-12);
            }
        }
    }
}
