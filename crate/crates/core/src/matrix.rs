//! Dense row-major complex matrix.

use num_complex::Complex64;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Dense complex matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

/// Operand transform applied inside [`ComplexMatrix::product`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    /// Use the matrix as stored.
    Plain,
    /// Use the conjugate transpose.
    Adjoint,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                op: "from_vec",
                detail: format!("{} entries for a {rows}x{cols} matrix", data.len()),
            });
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Sum of squared moduli of all entries.
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j].conj();
            }
        }
        out
    }

    pub fn scale(&mut self, factor: f64) {
        for z in &mut self.data {
            *z *= factor;
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.scale(factor);
        out
    }

    /// Multiplies column `j` by `factor`.
    pub fn scale_col(&mut self, j: usize, factor: f64) {
        for i in 0..self.rows {
            self.data[i * self.cols + j] *= factor;
        }
    }

    pub fn scale_row(&mut self, i: usize, factor: f64) {
        for z in self.row_mut(i) {
            *z *= factor;
        }
    }

    pub fn add_assign_scaled(&mut self, other: &ComplexMatrix, factor: f64) -> Result<()> {
        self.check_same_shape(other, "add")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * factor;
        }
        Ok(())
    }

    pub fn sub(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        let mut out = self.clone();
        out.add_assign_scaled(other, -1.0)?;
        Ok(out)
    }

    fn check_same_shape(&self, other: &ComplexMatrix, op: &'static str) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                op,
                detail: format!(
                    "{}x{} vs {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            });
        }
        Ok(())
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest entrywise `|M_ij - conj(M_ji)|`; infinite for non-square input.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..=i {
                let d = (self[(i, j)] - self[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Replaces `M` by `(M + M*)/2`.
    pub fn symmetrize(&mut self) {
        assert!(self.is_square(), "symmetrize needs a square matrix");
        let n = self.rows;
        for i in 0..n {
            let d = self.data[i * n + i].re;
            self.data[i * n + i] = Complex64::new(d, 0.0);
            for j in 0..i {
                let avg = (self.data[i * n + j] + self.data[j * n + i].conj()) * 0.5;
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg.conj();
            }
        }
    }

    /// Returns `op_a(self) * op_b(other)`.
    pub fn product(&self, op_a: Op, other: &ComplexMatrix, op_b: Op) -> Result<ComplexMatrix> {
        let (m, k) = match op_a {
            Op::Plain => (self.rows, self.cols),
            Op::Adjoint => (self.cols, self.rows),
        };
        let (k2, n) = match op_b {
            Op::Plain => (other.rows, other.cols),
            Op::Adjoint => (other.cols, other.rows),
        };
        if k != k2 {
            return Err(Error::DimensionMismatch {
                op: "product",
                detail: format!("inner dimensions {k} and {k2}"),
            });
        }
        let mut out = ComplexMatrix::zeros(m, n);
        if m == 0 || n == 0 || k == 0 {
            return Ok(out);
        }
        let a = SplitView::new(self, op_a);
        let b = SplitView::new(other, op_b);

        let mut re = vec![0.0f64; m * n];
        let mut im = vec![0.0f64; m * n];
        // C = (Ar + i sa Ai)(Br + i sb Bi)
        a.gemm_into(&b, Part::Re, Part::Re, 1.0, &mut re, m, k, n);
        a.gemm_into(&b, Part::Im, Part::Im, -a.sign * b.sign, &mut re, m, k, n);
        a.gemm_into(&b, Part::Re, Part::Im, b.sign, &mut im, m, k, n);
        a.gemm_into(&b, Part::Im, Part::Re, a.sign, &mut im, m, k, n);

        for (z, (r, i)) in out.data.iter_mut().zip(re.into_iter().zip(im)) {
            *z = Complex64::new(r, i);
        }
        Ok(out)
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.product(Op::Plain, other, Op::Plain)
    }

    /// Columns `start..end` as a new matrix.
    pub fn columns(&self, start: usize, end: usize) -> ComplexMatrix {
        assert!(start <= end && end <= self.cols);
        let width = end - start;
        let mut data = Vec::with_capacity(self.rows * width);
        for i in 0..self.rows {
            data.extend_from_slice(&self.row(i)[start..end]);
        }
        ComplexMatrix {
            rows: self.rows,
            cols: width,
            data,
        }
    }
}

#[derive(Clone, Copy)]
enum Part {
    Re,
    Im,
}

/// Real and imaginary planes of an operand with the strides of `op(M)`.
struct SplitView {
    re: Vec<f64>,
    im: Vec<f64>,
    row_stride: isize,
    col_stride: isize,
    sign: f64,
}

impl SplitView {
    fn new(m: &ComplexMatrix, op: Op) -> Self {
        let re = m.data.iter().map(|z| z.re).collect();
        let im = m.data.iter().map(|z| z.im).collect();
        let stored_cols = m.cols as isize;
        match op {
            Op::Plain => SplitView {
                re,
                im,
                row_stride: stored_cols,
                col_stride: 1,
                sign: 1.0,
            },
            Op::Adjoint => SplitView {
                re,
                im,
                row_stride: 1,
                col_stride: stored_cols,
                sign: -1.0,
            },
        }
    }

    fn part(&self, p: Part) -> &[f64] {
        match p {
            Part::Re => &self.re,
            Part::Im => &self.im,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn gemm_into(
        &self,
        rhs: &SplitView,
        pa: Part,
        pb: Part,
        alpha: f64,
        out: &mut [f64],
        m: usize,
        k: usize,
        n: usize,
    ) {
        let a = self.part(pa);
        let b = rhs.part(pb);
        // SAFETY: strides describe in-bounds m x k and k x n views of `a` and
        // `b`; `out` is a distinct, contiguous m x n row-major buffer.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                alpha,
                a.as_ptr(),
                self.row_stride,
                self.col_stride,
                b.as_ptr(),
                rhs.row_stride,
                rhs.col_stride,
                1.0,
                out.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}
