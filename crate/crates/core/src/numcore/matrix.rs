use crate::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
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
                return Err(Error::Shape("ragged rows".into()));
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
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
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

    /// Gathers the listed rows into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    /// `self · rhs`, where `rhs` is given as a row-major slice of shape
    /// `self.cols × out_cols`.
    pub fn matmul_slice(&self, rhs: &[f64], out_cols: usize) -> Result<Matrix> {
        if rhs.len() != self.cols * out_cols {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {} values as {}x{out_cols}",
                self.rows,
                self.cols,
                rhs.len(),
                self.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, out_cols);
        for r in 0..self.rows {
            let a = self.row(r);
            let o = out.row_mut(r);
            for (k, &av) in a.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                let b = &rhs[k * out_cols..(k + 1) * out_cols];
                for (ov, &bv) in o.iter_mut().zip(b) {
                    *ov += av * bv;
                }
            }
        }
        Ok(out)
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        self.matmul_slice(&rhs.data, rhs.cols)
    }

    /// `selfᵀ · rhs` accumulated into a flat `self.cols × rhs.cols` buffer.
    pub fn tmatmul_into(&self, rhs: &Matrix, out: &mut [f64]) -> Result<()> {
        if self.rows != rhs.rows || out.len() != self.cols * rhs.cols {
            return Err(Error::Shape(format!(
                "cannot form ({}x{})ᵀ·({}x{}) into {} values",
                self.rows,
                self.cols,
                rhs.rows,
                rhs.cols,
                out.len()
            )));
        }
        let n = rhs.cols;
        for r in 0..self.rows {
            let a = self.row(r);
            let b = rhs.row(r);
            for (k, &av) in a.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                let o = &mut out[k * n..(k + 1) * n];
                for (ov, &bv) in o.iter_mut().zip(b) {
                    *ov += av * bv;
                }
            }
        }
        Ok(())
    }

    /// `self · rhsᵀ`, where `rhs` is a row-major slice of shape `out_cols × self.cols`.
    pub fn matmul_t_slice(&self, rhs: &[f64], out_cols: usize) -> Result<Matrix> {
        if rhs.len() != self.cols * out_cols {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by transpose of {} values",
                self.rows,
                self.cols,
                rhs.len()
            )));
        }
        let mut out = Matrix::zeros(self.rows, out_cols);
        for r in 0..self.rows {
            let a = self.row(r);
            for j in 0..out_cols {
                let b = &rhs[j * self.cols..(j + 1) * self.cols];
                out.set(r, j, a.iter().zip(b).map(|(x, y)| x * y).sum());
            }
        }
        Ok(out)
    }

    pub fn add_row_vector(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.cols {
            return Err(Error::Shape(format!(
                "row vector of length {} added to {} columns",
                v.len(),
                self.cols
            )));
        }
        for r in 0..self.rows {
            for (x, &b) in self.row_mut(r).iter_mut().zip(v) {
                *x += b;
            }
        }
        Ok(())
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (o, &x) in out.iter_mut().zip(self.row(r)) {
                *o += x;
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Index of the largest entry in each row; ties resolve to the lowest index.
    pub fn argmax_rows(&self) -> Vec<usize> {
        (0..self.rows)
            .map(|r| {
                let row = self.row(r);
                let mut best = 0;
                for (i, &v) in row.iter().enumerate().skip(1) {
                    if v > row[best] {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    #[test]
    fn products_agree_with_triple_loop() {
        let a = Matrix::from_vec(2, 3, vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.5]).unwrap();
        let b = Matrix::from_vec(3, 2, vec![0.3, 1.0, -1.0, 2.0, 4.0, 0.0]).unwrap();
        let expect = naive(&a, &b);
        let got = a.matmul(&b).unwrap();
        for (x, y) in got.as_slice().iter().zip(expect.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }

        let bt = b.transpose();
        let got = a.matmul_t_slice(bt.as_slice(), 2).unwrap();
        for (x, y) in got.as_slice().iter().zip(expect.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }

        let mut buf = vec![0.0; 3 * 3];
        a.tmatmul_into(&a, &mut buf).unwrap();
        let ata = naive(&a.transpose(), &a);
        for (x, y) in buf.iter().zip(ata.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_errors() {
        let a = Matrix::zeros(2, 3);
        assert!(matches!(a.matmul(&Matrix::zeros(2, 2)), Err(Error::Shape(_))));
        assert!(Matrix::from_vec(2, 2, vec![0.0; 3]).is_err());
        assert!(Matrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn argmax_ties_pick_lowest() {
        let m = Matrix::from_vec(2, 3, vec![1.0, 1.0, 0.0, -1.0, 2.0, 2.0]).unwrap();
        assert_eq!(m.argmax_rows(), vec![0, 1]);
    }
}
