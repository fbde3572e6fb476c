//! Small dense linear-algebra kernels: Householder QR, least squares with
//! coefficient standard errors, and orthogonal matrix generation.
//!
//! Everything here targets the tall-and-skinny systems that show up in the
//! unit-root regressions (a few hundred rows, < 20 columns), so plain
//! `Array2<f64>` loops are plenty.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("design matrix is rank deficient (column {0})")]
    RankDeficient(usize),
    #[error("dimension mismatch: {0}")]
    Shape(String),
}

/// Least-squares fit of `y ≈ X·beta` with per-coefficient standard errors.
#[derive(Debug, Clone)]
pub struct LeastSquaresFit {
    pub beta: Array1<f64>,
    pub std_errors: Array1<f64>,
    /// Sum of squared residuals.
    pub ssr: f64,
    /// Residual degrees of freedom (rows − columns).
    pub dof: usize,
}

/// Householder QR factorization stored in compact form.
///
/// `qr` holds R in its upper triangle and the reflector vectors below the
/// diagonal; `tau` holds the reflector scaling factors.
struct HouseholderQr {
    qr: Array2<f64>,
    tau: Vec<f64>,
}

impl HouseholderQr {
    fn factor(a: ArrayView2<f64>) -> Result<Self, LinalgError> {
        let (m, n) = a.dim();
        if m < n {
            return Err(LinalgError::Shape(format!(
                "need at least as many rows as columns, got {m}x{n}"
            )));
        }
        let mut qr = a.to_owned();
        let mut tau = vec![0.0; n];
        // rank tolerance relative to the matrix scale
        let scale = qr.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let tol = 1e-12 * scale * (m as f64).sqrt();
        for k in 0..n {
            // norm of the k-th column below the diagonal
            let mut norm = 0.0;
            for i in k..m {
                norm += qr[[i, k]] * qr[[i, k]];
            }
            norm = norm.sqrt();
            if norm <= tol {
                return Err(LinalgError::RankDeficient(k));
            }
            let alpha = if qr[[k, k]] >= 0.0 { -norm } else { norm };
            // v = x - alpha*e1, normalized so v[0] = 1
            let v0 = qr[[k, k]] - alpha;
            tau[k] = -v0 / alpha;
            for i in (k + 1)..m {
                qr[[i, k]] /= v0;
            }
            qr[[k, k]] = alpha;
            // apply reflector to remaining columns
            for j in (k + 1)..n {
                let mut dot = qr[[k, j]];
                for i in (k + 1)..m {
                    dot += qr[[i, k]] * qr[[i, j]];
                }
                dot *= tau[k];
                qr[[k, j]] -= dot;
                for i in (k + 1)..m {
                    let vik = qr[[i, k]];
                    qr[[i, j]] -= dot * vik;
                }
            }
        }
        Ok(Self { qr, tau })
    }

    /// Applies Qᵀ to a vector in place.
    fn apply_qt(&self, y: &mut Array1<f64>) {
        let (m, n) = self.qr.dim();
        for k in 0..n {
            let mut dot = y[k];
            for i in (k + 1)..m {
                dot += self.qr[[i, k]] * y[i];
            }
            dot *= self.tau[k];
            y[k] -= dot;
            for i in (k + 1)..m {
                y[i] -= dot * self.qr[[i, k]];
            }
        }
    }

    /// Solves R·x = b for the leading n×n upper triangle.
    fn solve_r(&self, b: ArrayView1<f64>) -> Result<Array1<f64>, LinalgError> {
        let n = self.qr.ncols();
        let mut x = b.slice(ndarray::s![..n]).to_owned();
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let xj = x[j];
                x[i] -= self.qr[[i, j]] * xj;
            }
            let r = self.qr[[i, i]];
            if r.abs() < 1e-300 {
                return Err(LinalgError::RankDeficient(i));
            }
            x[i] /= r;
        }
        Ok(x)
    }

    /// Inverse of R (upper triangular), used for (XᵀX)⁻¹ = R⁻¹·R⁻ᵀ.
    fn inv_r(&self) -> Result<Array2<f64>, LinalgError> {
        let n = self.qr.ncols();
        let mut inv = Array2::zeros((n, n));
        for col in 0..n {
            let mut e = Array1::zeros(n);
            e[col] = 1.0;
            let x = self.solve_r(e.view())?;
            for row in 0..n {
                inv[[row, col]] = x[row];
            }
        }
        Ok(inv)
    }
}

/// Ordinary least squares via Householder QR.
///
/// Returns coefficients, conventional standard errors computed from
/// s²·diag((XᵀX)⁻¹), the residual sum of squares, and the degrees of
/// freedom. Rank-deficient designs are rejected.
pub fn least_squares(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<LeastSquaresFit, LinalgError> {
    let (m, n) = x.dim();
    if y.len() != m {
        return Err(LinalgError::Shape(format!(
            "X has {m} rows but y has {} entries",
            y.len()
        )));
    }
    if m <= n {
        return Err(LinalgError::Shape(format!(
            "need more rows than columns for standard errors, got {m}x{n}"
        )));
    }
    let qr = HouseholderQr::factor(x)?;
    let mut qty = y.to_owned();
    qr.apply_qt(&mut qty);
    let beta = qr.solve_r(qty.view())?;

    // SSR from the tail of Qᵀy (numerically cleaner than re-forming residuals)
    let ssr: f64 = (n..m).map(|i| qty[i] * qty[i]).sum();
    let dof = m - n;
    let s2 = ssr / dof as f64;

    let rinv = qr.inv_r()?;
    let mut std_errors = Array1::zeros(n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in i..n {
            diag += rinv[[i, j]] * rinv[[i, j]];
        }
        std_errors[i] = (s2 * diag).sqrt();
    }

    Ok(LeastSquaresFit {
        beta,
        std_errors,
        ssr,
        dof,
    })
}

/// Orthogonalizes a square matrix in place via QR, with the sign convention
/// that R's diagonal is non-negative (makes the result unique).
pub fn orthogonalize(a: &mut Array2<f64>) -> Result<(), LinalgError> {
    let (m, n) = a.dim();
    if m != n {
        return Err(LinalgError::Shape(format!("expected square matrix, got {m}x{n}")));
    }
    let qr = HouseholderQr::factor(a.view())?;
    // form Q explicitly by applying reflectors to the identity
    let mut q: Array2<f64> = Array2::eye(n);
    for col in 0..n {
        let mut e = q.column(col).to_owned();
        // Q·e_col = H_0·…·H_{n-1}·e_col, reflectors applied in reverse order
        for k in (0..n).rev() {
            let mut dot = e[k];
            for i in (k + 1)..n {
                dot += qr.qr[[i, k]] * e[i];
            }
            dot *= qr.tau[k];
            e[k] -= dot;
            for i in (k + 1)..n {
                e[i] -= dot * qr.qr[[i, k]];
            }
        }
        for row in 0..n {
            q[[row, col]] = e[row];
        }
    }
    // flip columns where R's diagonal is negative
    for j in 0..n {
        if qr.qr[[j, j]] < 0.0 {
            for i in 0..n {
                q[[i, j]] = -q[[i, j]];
            }
        }
    }
    *a = q;
    Ok(())
}
