//! Eigenvalues of dense Hermitian matrices.
//!
//! Householder reflections reduce the matrix to Hermitian tridiagonal form;
//! the off-diagonal phases do not affect the spectrum, so only their moduli
//! are kept and the resulting real symmetric tridiagonal matrix is
//! diagonalized with implicit QL sweeps (Wilkinson shift).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;

/// Relative tolerance on `max |M - M*|` accepted as Hermitian.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

const MAX_QL_SWEEPS: usize = 60;

/// Real eigenvalues sorted in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSpectrum {
    values: Vec<f64>,
    source_dim: usize,
}

impl EigenSpectrum {
    /// Builds a spectrum from arbitrary values (sorted on construction).
    pub fn from_values(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        let source_dim = values.len();
        EigenSpectrum { values, source_dim }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn source_dim(&self) -> usize {
        self.source_dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn largest(&self) -> Option<f64> {
        self.values.first().copied()
    }

    pub fn smallest(&self) -> Option<f64> {
        self.values.last().copied()
    }

    pub fn sum(&self) -> f64 {
        crate::stats::pairwise_sum(&self.values)
    }

    /// The `k` largest eigenvalues.
    pub fn top(&self, k: usize) -> &[f64] {
        &self.values[..k.min(self.values.len())]
    }

    /// Spectrum with the `k` largest eigenvalues removed.
    pub fn without_top(&self, k: usize) -> EigenSpectrum {
        EigenSpectrum {
            values: self.values[k.min(self.values.len())..].to_vec(),
            source_dim: self.source_dim,
        }
    }
}

/// Eigenvalues of a Hermitian matrix, largest first.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<EigenSpectrum> {
    if !m.is_square() || m.rows() == 0 {
        return Err(Error::DimensionMismatch {
            op: "hermitian_eigenvalues",
            detail: format!("need a non-empty square matrix, got {}x{}", m.rows(), m.cols()),
        });
    }
    let scale = m.max_abs();
    let tolerance = HERMITIAN_TOLERANCE * scale.max(f64::MIN_POSITIVE);
    let asymmetry = m.hermitian_defect();
    if !(asymmetry <= tolerance) {
        return Err(Error::NotHermitian {
            asymmetry,
            tolerance,
        });
    }
    let (mut diag, mut off) = tridiagonalize(m);
    tridiagonal_ql(&mut diag, &mut off)?;
    let mut spectrum = EigenSpectrum::from_values(diag);
    spectrum.source_dim = m.rows();
    Ok(spectrum)
}

/// Returns the diagonal and off-diagonal moduli of a unitarily similar
/// tridiagonal matrix. `off[k]` couples rows `k` and `k + 1`.
fn tridiagonalize(m: &ComplexMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = m.rows();
    let mut a: Vec<Complex64> = m.as_slice().to_vec();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    let mut u = vec![Complex64::new(0.0, 0.0); n];
    let mut p = vec![Complex64::new(0.0, 0.0); n];

    for k in 0..n.saturating_sub(1) {
        diag[k] = a[k * n + k].re;
        let m_len = n - k - 1;
        let first = k + 1;
        // column below the diagonal
        for (t, i) in (first..n).enumerate() {
            u[t] = a[i * n + k];
        }
        let tail_sq: f64 = u[1..m_len].iter().map(|z| z.norm_sqr()).sum();
        let x0 = u[0];
        let norm = (x0.norm_sqr() + tail_sq).sqrt();
        off[k] = norm;
        if tail_sq == 0.0 {
            // already tridiagonal in this column; the phase of x0 is harmless
            continue;
        }
        let phase = if x0.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        // H x = beta e1 with beta = -phase * norm, u = x - beta e1
        u[0] = x0 + phase * norm;
        let u_sq = u[0].norm_sqr() + tail_sq;
        let tau = 2.0 / u_sq;

        // p = tau * A22 u
        for (t, i) in (first..n).enumerate() {
            let row = &a[i * n + first..i * n + n];
            let mut acc = Complex64::new(0.0, 0.0);
            for (aij, uj) in row.iter().zip(&u[..m_len]) {
                acc += aij * uj;
            }
            p[t] = acc * tau;
        }
        // K = tau/2 * u^H p (real for Hermitian A22)
        let uhp: Complex64 = u[..m_len].iter().zip(&p[..m_len]).map(|(ui, pi)| ui.conj() * pi).sum();
        let kk = 0.5 * tau * uhp.re;
        for t in 0..m_len {
            p[t] -= u[t] * kk;
        }
        // A22 -= u q^H + q u^H
        for (t, i) in (first..n).enumerate() {
            let ut = u[t];
            let qt = p[t];
            let row = &mut a[i * n + first..i * n + n];
            for ((aij, uj), qj) in row.iter_mut().zip(&u[..m_len]).zip(&p[..m_len]) {
                *aij -= ut * qj.conj() + qt * uj.conj();
            }
        }
    }
    if n > 0 {
        diag[n - 1] = a[(n - 1) * n + (n - 1)].re;
    }
    (diag, off)
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.
/// On return `diag` holds the eigenvalues (unsorted).
fn tridiagonal_ql(diag: &mut [f64], off: &mut [f64]) -> Result<()> {
    let n = diag.len();
    if n <= 1 {
        return Ok(());
    }
    // e[i] couples i and i+1; e[n-1] = 0 sentinel
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            if iter == MAX_QL_SWEEPS {
                return Err(Error::NoConvergence {
                    index: l,
                    iterations: iter,
                    residual: e[l].abs(),
                });
            }
            iter += 1;

            let mut g = (diag[l + 1] - diag[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            diag[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
