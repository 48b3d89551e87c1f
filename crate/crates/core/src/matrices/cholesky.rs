use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;

/// Lower factor `L` of a Hermitian positive definite `M = L L*`, kept as
/// split real/imaginary planes.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    lre: Vec<f64>,
    lim: Vec<f64>,
    log_det: f64,
}

impl Cholesky {
    /// A non-positive pivot is reported as a singular matrix; nothing is
    /// regularized.
    pub fn factor(m: &ComplexMatrix) -> Result<Self> {
        if !m.is_square() || m.rows() == 0 {
            return Err(Error::DimensionMismatch {
                op: "cholesky",
                detail: format!("need a non-empty square matrix, got {}x{}", m.rows(), m.cols()),
            });
        }
        let n = m.rows();
        let mut lre = vec![0.0f64; n * n];
        let mut lim = vec![0.0f64; n * n];
        let mut log_det = 0.0;
        // pivots at roundoff level of the diagonal count as singular
        let max_diag = (0..n).map(|i| m[(i, i)].re.abs()).fold(0.0, f64::max);
        let pivot_floor = n as f64 * f64::EPSILON * max_diag;

        for j in 0..n {
            let (row_re, row_im) = (&lre[j * n..j * n + j], &lim[j * n..j * n + j]);
            let norm_sq: f64 =
                row_re.iter().map(|x| x * x).sum::<f64>() + row_im.iter().map(|x| x * x).sum::<f64>();
            let pivot = m[(j, j)].re - norm_sq;
            if !(pivot > pivot_floor) || !pivot.is_finite() {
                return Err(Error::SingularMatrix(format!(
                    "Cholesky pivot {pivot:e} at index {j} of {n}"
                )));
            }
            let ljj = pivot.sqrt();
            log_det += 2.0 * ljj.ln();
            lre[j * n + j] = ljj;

            let inv = 1.0 / ljj;
            for i in j + 1..n {
                // L_ij = (M_ij - sum_k L_ik conj(L_jk)) / L_jj
                let (ai_re, ai_im) = (&lre[i * n..i * n + j], &lim[i * n..i * n + j]);
                let (aj_re, aj_im) = (&lre[j * n..j * n + j], &lim[j * n..j * n + j]);
                let mut sr = 0.0;
                let mut si = 0.0;
                for k in 0..j {
                    sr += ai_re[k] * aj_re[k] + ai_im[k] * aj_im[k];
                    si += ai_im[k] * aj_re[k] - ai_re[k] * aj_im[k];
                }
                let v = (m[(i, j)] - Complex64::new(sr, si)) * inv;
                lre[i * n + j] = v.re;
                lim[i * n + j] = v.im;
            }
        }
        Ok(Cholesky { n, lre, lim, log_det })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Solves `L Y = B` by forward substitution.
    pub fn solve_lower(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        let n = self.n;
        if b.rows() != n {
            return Err(Error::DimensionMismatch {
                op: "solve_lower",
                detail: format!("factor is {n}x{n}, right-hand side has {} rows", b.rows()),
            });
        }
        let mut y = b.clone();
        for col in 0..b.cols() {
            for i in 0..n {
                let mut acc = y[(i, col)];
                for k in 0..i {
                    let l = Complex64::new(self.lre[i * n + k], self.lim[i * n + k]);
                    acc -= l * y[(k, col)];
                }
                y.as_mut_slice()[i * b.cols() + col] = acc / self.lre[i * n + i];
            }
        }
        Ok(y)
    }
}

/// `log det M` for Hermitian positive definite `M` via `M = L L*`.
pub fn log_det_psd(m: &ComplexMatrix) -> Result<f64> {
    Ok(Cholesky::factor(m)?.log_det())
}
