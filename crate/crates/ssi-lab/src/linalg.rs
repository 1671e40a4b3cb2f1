//! Small dense linear-algebra helpers: cyclic Jacobi eigendecomposition and
//! Cholesky factorization. Everything here targets matrices of side at most
//! a few dozen (quadrature Jacobi matrices, 2L-dimensional covariances), so
//! simplicity and determinism win over asymptotics.

use ndarray::{Array1, Array2};

use crate::{Error, Result};

/// Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
///
/// Returns eigenvalues sorted ascending and the matching eigenvectors as
/// columns. Converges to machine precision for the small matrices used here.
pub fn symmetric_eigen(mat: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = mat.nrows();
    if mat.ncols() != n {
        return Err(Error::ShapeMismatch(format!(
            "symmetric_eigen expects a square matrix, got {}x{}",
            n,
            mat.ncols()
        )));
    }
    let mut a = mat.clone();
    let mut v = Array2::<f64>::eye(n);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[[i, j]] * a[[i, j]];
            }
        }
        if off.sqrt() < 1e-15 * (1.0 + frobenius(&a)) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[[p, p]];
                let aqq = a[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                // stable rotation: t = sign(theta) / (|theta| + sqrt(theta^2 + 1))
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
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

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[i, i]].partial_cmp(&a[[j, j]]).unwrap());
    let values = Array1::from_iter(order.iter().map(|&i| a[[i, i]]));
    let mut vectors = Array2::<f64>::zeros((n, n));
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vectors[[k, new]] = v[[k, old]];
        }
    }
    Ok((values, vectors))
}

fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Lower-triangular Cholesky factor `T` with `mat = T·Tᵀ`.
///
/// Fails on matrices that are not positive definite to working precision;
/// callers apply their own jitter policy before giving up.
pub fn cholesky_lower(mat: &Array2<f64>) -> Result<Array2<f64>> {
    let n = mat.nrows();
    if mat.ncols() != n {
        return Err(Error::ShapeMismatch(format!(
            "cholesky expects a square matrix, got {}x{}",
            n,
            mat.ncols()
        )));
    }
    let mut t = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = mat[[i, j]];
            for k in 0..j {
                sum -= t[[i, k]] * t[[j, k]];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::NotPsd(format!(
                        "pivot {sum:.3e} at index {i} is not positive"
                    )));
                }
                t[[i, j]] = sum.sqrt();
            } else {
                t[[i, j]] = sum / t[[j, j]];
            }
        }
    }
    Ok(t)
}

/// Least-squares slope and intercept of `y` on `x`, with the standard error
/// of the slope. Used by the scaling fits in the harness.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch("linear_fit: x/y length".into()));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "linear_fit needs at least two points".into(),
        ));
    }
    let nf = n as f64;
    let xbar = x.iter().sum::<f64>() / nf;
    let ybar = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|xi| (xi - xbar) * (xi - xbar)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "linear_fit: x values are all equal".into(),
        ));
    }
    let sxy: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (xi - xbar) * (yi - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let r = yi - (intercept + slope * xi);
            r * r
        })
        .sum();
    let ss_tot: f64 = y.iter().map(|yi| (yi - ybar) * (yi - ybar)).sum();
    let stderr = if n > 2 {
        (ss_res / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr: stderr,
        r_squared,
    })
}

/// Result of [`linear_fit`].
#[derive(Debug, Clone, Copy)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn eigen_of_diagonal() {
        let m = array![[3.0, 0.0], [0.0, -1.0]];
        let (vals, _) = symmetric_eigen(&m).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14);
        assert!((vals[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn eigen_reconstructs() {
        let m = array![
            [2.0, 1.0, 0.5],
            [1.0, 3.0, -0.25],
            [0.5, -0.25, 1.5],
        ];
        let (vals, vecs) = symmetric_eigen(&m).unwrap();
        // V diag(vals) V^T == m
        let mut rec = Array2::<f64>::zeros((3, 3));
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    rec[[i, j]] += vecs[[i, k]] * vals[k] * vecs[[j, k]];
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                assert!((rec[[i, j]] - m[[i, j]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_roundtrip() {
        let m = array![[4.0, 2.0], [2.0, 5.0]];
        let t = cholesky_lower(&m).unwrap();
        let rec = t.dot(&t.t());
        for i in 0..2 {
            for j in 0..2 {
                assert!((rec[[i, j]] - m[[i, j]]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(cholesky_lower(&m).is_err());
    }

    #[test]
    fn fit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.1, 4.1, 6.1, 8.1];
        let fit = linear_fit(&x, &y).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 0.1).abs() < 1e-12);
        assert!(fit.r_squared > 0.999999);
    }
}
