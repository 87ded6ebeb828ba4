use std::fmt;

use crate::error::{Error, Result};

/// Dense row-major 2-D array of `f64`. Rows are nodes, columns channels.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor({}x{})", self.rows, self.cols)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {rows}x{cols} tensor",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::ShapeMismatch("ragged rows".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn expect_shape(&self, rows: usize, cols: usize, what: &str) -> Result<()> {
        if self.shape() != (rows, cols) {
            return Err(Error::ShapeMismatch(format!(
                "{what}: expected {rows}x{cols}, got {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(())
    }

    pub fn check_finite(&self, what: &str) -> Result<()> {
        if self.data.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Adds `bias` (length = cols) to every row.
    pub fn add_row(&mut self, bias: &[f64]) {
        debug_assert_eq!(bias.len(), self.cols);
        for r in self.data.chunks_exact_mut(self.cols.max(1)) {
            for (x, b) in r.iter_mut().zip(bias) {
                *x += b;
            }
        }
    }

    /// Column sums, accumulated into `out`.
    pub fn sum_rows_into(&self, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.cols);
        for r in self.data.chunks_exact(self.cols.max(1)) {
            for (o, x) in out.iter_mut().zip(r) {
                *o += x;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `self * other^T`: (n x k) * (m x k)^T -> n x m.
    pub fn matmul_nt(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.cols, other.cols, "matmul_nt inner dims");
        let (n, m, k) = (self.rows, other.rows, self.cols);
        let mut out = Tensor::zeros(n, m);
        gemm(
            n,
            k,
            m,
            (&self.data, k as isize, 1),
            (&other.data, 1, k as isize),
            0.0,
            (&mut out.data, m as isize),
        );
        out
    }

    /// `self * other`: (n x k) * (k x m) -> n x m.
    pub fn matmul(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.cols, other.rows, "matmul inner dims");
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = Tensor::zeros(n, m);
        gemm(
            n,
            k,
            m,
            (&self.data, k as isize, 1),
            (&other.data, m as isize, 1),
            0.0,
            (&mut out.data, m as isize),
        );
        out
    }

    /// `self^T * other`, accumulated into `out`: (n x a)^T * (n x b) -> a x b.
    pub fn matmul_tn_into(&self, other: &Tensor, out: &mut Tensor) {
        assert_eq!(self.rows, other.rows, "matmul_tn outer dims");
        let (n, a, b) = (self.rows, self.cols, other.cols);
        assert_eq!(out.shape(), (a, b));
        gemm(
            a,
            n,
            b,
            (&self.data, 1, a as isize),
            (&other.data, b as isize, 1),
            1.0,
            (&mut out.data, b as isize),
        );
    }

    /// Index of the largest entry in each row; ties go to the lowest index.
    pub fn argmax_rows(&self) -> Vec<usize> {
        (0..self.rows)
            .map(|r| {
                let row = self.row(r);
                let mut best = 0;
                for (i, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }
}

/// `c = a * b + beta * c` for an m x k by k x n product. Operands are
/// `(data, row stride, col stride)`; `c` is row-major with the given row stride.
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: (&[f64], isize, isize),
    b: (&[f64], isize, isize),
    beta: f64,
    c: (&mut [f64], isize),
) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.0.iter_mut().for_each(|v| *v *= beta);
        return;
    }
    assert!(a.0.len() >= m * k && b.0.len() >= k * n && c.0.len() >= m * n);
    // SAFETY: strides describe in-bounds views of the asserted sizes, and `c`
    // is an exclusive borrow that does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.0.as_ptr(),
            a.1,
            a.2,
            b.0.as_ptr(),
            b.1,
            b.2,
            beta,
            c.0.as_mut_ptr(),
            c.1,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: usize, cols: usize, d: &[f64]) -> Tensor {
        Tensor::from_vec(rows, cols, d.to_vec()).unwrap()
    }

    #[test]
    fn matmul_variants_agree() {
        let a = t(2, 3, &[1., 2., 3., 4., 5., 6.]);
        let b = t(3, 2, &[7., 8., 9., 10., 11., 12.]);
        let ab = a.matmul(&b);
        assert_eq!(ab.data(), &[58., 64., 139., 154.]);
        let bt = t(2, 3, &[7., 9., 11., 8., 10., 12.]);
        assert_eq!(a.matmul_nt(&bt), ab);
        let mut atb = Tensor::zeros(3, 3);
        a.matmul_tn_into(&a, &mut atb);
        assert_eq!(atb.get(0, 0), 17.0);
        assert_eq!(atb.get(1, 2), 2. * 3. + 5. * 6.);
    }

    #[test]
    fn shape_and_finiteness_checks() {
        assert!(Tensor::from_vec(2, 2, vec![0.0; 3]).is_err());
        let mut x = Tensor::zeros(1, 2);
        assert!(x.check_finite("x").is_ok());
        x.set(0, 1, f64::NAN);
        assert!(matches!(x.check_finite("x"), Err(Error::NonFinite(_))));
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        let x = t(2, 3, &[1., 1., 0., -1., 2., 2.]);
        assert_eq!(x.argmax_rows(), vec![0, 1]);
    }
}
