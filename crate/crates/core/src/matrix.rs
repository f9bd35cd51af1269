//! Small dense row-major matrices and the matrix exponential.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::invalid("matrix rows must form a square"));
            }
            m.row_mut(i).copy_from_slice(row);
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }

    pub fn add_assign(&mut self, other: &DenseMatrix) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = DenseMatrix::zeros(n);
        for i in 0..n {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for (k, &a) in self.data[i * n..(i + 1) * n].iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * n..(k + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Compressed sparse rows, enough for `T * X` with dense `X`.
#[derive(Debug, Clone)]
pub struct SparseRows {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseRows {
    pub fn from_dense(m: &DenseMatrix) -> Self {
        let n = m.dim();
        let mut offsets = vec![0];
        let (mut cols, mut vals) = (Vec::new(), Vec::new());
        for i in 0..n {
            for (j, &x) in m.row(i).iter().enumerate() {
                if x != 0.0 {
                    cols.push(j);
                    vals.push(x);
                }
            }
            offsets.push(cols.len());
        }
        SparseRows {
            n,
            offsets,
            cols,
            vals,
        }
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.vals[self.offsets[i]..self.offsets[i + 1]].iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `factor * self * x`.
    fn mul_dense(&self, x: &DenseMatrix, factor: f64) -> DenseMatrix {
        let n = self.n;
        let mut out = DenseMatrix::zeros(n);
        for i in 0..n {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for idx in self.offsets[i]..self.offsets[i + 1] {
                let a = self.vals[idx] * factor;
                let x_row = &x.data[self.cols[idx] * n..(self.cols[idx] + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(x_row) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

const SERIES_TOL: f64 = 1e-18;
const MAX_TERMS: usize = 200;

/// Squaring count that brings the scaled norm to at most 1/2.
fn squarings_for(norm: f64) -> u32 {
    if norm <= 0.5 {
        0
    } else {
        (norm / 0.5).log2().ceil() as u32
    }
}

/// Matrix exponential by scaling and squaring with a Taylor kernel.
pub fn expm(a: &DenseMatrix) -> Result<DenseMatrix> {
    expm_with(a.dim(), a.norm_inf(), |x, f| a.matmul(x).scaled(f))
}

/// [`expm`] for a sparse operand; the kernel only multiplies by the sparse
/// matrix, the dense work is limited to the final squarings.
pub fn expm_sparse(a: &SparseRows) -> Result<DenseMatrix> {
    expm_with(a.n, a.norm_inf(), |x, f| a.mul_dense(x, f))
}

fn expm_with<F>(n: usize, norm: f64, mul: F) -> Result<DenseMatrix>
where
    F: Fn(&DenseMatrix, f64) -> DenseMatrix,
{
    if !norm.is_finite() {
        return Err(Error::Numeric("matrix exponential of a non-finite matrix".into()));
    }
    let s = squarings_for(norm);
    let scale = 0.5f64.powi(s as i32);
    let mut sum = DenseMatrix::identity(n);
    let mut term = DenseMatrix::identity(n);
    let mut converged = false;
    for k in 1..=MAX_TERMS {
        term = mul(&term, scale / k as f64);
        sum.add_assign(&term);
        if term.norm_inf() <= SERIES_TOL * sum.norm_inf() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numeric(format!(
            "Taylor series did not converge in {MAX_TERMS} terms"
        )));
    }
    for _ in 0..s {
        sum = sum.matmul(&sum);
    }
    if sum.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("matrix exponential overflowed".into()));
    }
    Ok(sum)
}

impl DenseMatrix {
    fn scaled(mut self, factor: f64) -> Self {
        self.scale(factor);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Unscaled truncated series, independent of the scaling-and-squaring path.
    fn series_oracle(a: &DenseMatrix, terms: usize) -> DenseMatrix {
        let mut sum = DenseMatrix::identity(a.dim());
        let mut term = DenseMatrix::identity(a.dim());
        for k in 1..terms {
            term = a.matmul(&term);
            term.scale(1.0 / k as f64);
            sum.add_assign(&term);
        }
        sum
    }

    #[test]
    fn exp_of_zero_and_diagonal() {
        assert_eq!(expm(&DenseMatrix::zeros(3)).unwrap(), DenseMatrix::identity(3));
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -2.0]]).unwrap();
        let e = expm(&a).unwrap();
        assert!((e[(0, 0)] - 1f64.exp()).abs() < 1e-14);
        assert!((e[(1, 1)] - (-2f64).exp()).abs() < 1e-15);
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn swap_matrix_closed_form() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let e = expm(&a).unwrap();
        assert!((e[(0, 0)] - 1f64.cosh()).abs() < 1e-14);
        assert!((e[(0, 1)] - 1f64.sinh()).abs() < 1e-14);
        let s = expm_sparse(&SparseRows::from_dense(&a)).unwrap();
        assert!(s.max_abs_diff(&e) < 1e-15);
    }

    #[test]
    fn scaled_path_matches_plain_series() {
        let mut state = 0x2545_f491_4f6c_dd1du64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for n in [3, 8, 20] {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| if next() < 0.3 { 3.0 * next() - 1.0 } else { 0.0 }).collect())
                .collect();
            let a = DenseMatrix::from_rows(&rows).unwrap();
            let oracle = series_oracle(&a, 120);
            let dense = expm(&a).unwrap();
            let sparse = expm_sparse(&SparseRows::from_dense(&a)).unwrap();
            let scale = oracle.norm_inf();
            assert!(dense.max_abs_diff(&oracle) < 1e-12 * scale);
            assert!(sparse.max_abs_diff(&oracle) < 1e-12 * scale);
        }
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let a = DenseMatrix::from_rows(&[vec![f64::NAN]]).unwrap();
        assert!(matches!(expm(&a), Err(Error::Numeric(_))));
    }
}
