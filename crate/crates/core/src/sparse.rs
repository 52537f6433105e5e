//! Compressed sparse row storage for complex Hermitian matrices.

use std::io::{self, Write};

use num_complex::Complex64;

#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<Complex64>,
}

impl CsrMatrix {
    /// Build from unsorted triplets, summing duplicates.
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, Complex64)>) -> Self {
        t.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(t.len());
        let mut last = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn from_dense(a: &[Vec<Complex64>]) -> Self {
        let n = a.len();
        let t = (0..n)
            .flat_map(|r| (0..n).map(move |c| (r, c)))
            .filter(|&(r, c)| a[r][c] != Complex64::new(0.0, 0.0))
            .map(|(r, c)| (r, c, a[r][c]))
            .collect();
        Self::from_triplets(n, t)
    }

    pub fn diagonal(d: &[f64]) -> Self {
        Self::from_triplets(d.len(), d.iter().enumerate().map(|(i, &v)| (i, i, Complex64::new(v, 0.0))).collect())
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |p| (self.cols[p], self.vals[p]))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(Complex64::new(0.0, 0.0), |(_, v)| v)
    }

    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let mut s = Complex64::new(0.0, 0.0);
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[p] * x[self.cols[p]];
            }
            *yr = s;
        }
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.n];
        self.matvec(x, &mut y);
        y
    }

    /// `max |M_rc − conj(M_cr)|`.
    pub fn hermitian_deviation(&self) -> f64 {
        let mut dev = 0.0f64;
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                dev = dev.max((v - self.get(c, r).conj()).norm());
            }
        }
        dev
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Replace every pair by its Hermitian mean, which makes the stored matrix exactly Hermitian.
    pub fn hermitize(&mut self) {
        let mut vals = self.vals.clone();
        for r in 0..self.n {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[p];
                vals[p] = if r == c {
                    Complex64::new(self.vals[p].re, 0.0)
                } else {
                    0.5 * (self.vals[p] + self.get(c, r).conj())
                };
            }
        }
        self.vals = vals;
    }

    pub fn scale(&mut self, s: f64) {
        self.vals.iter_mut().for_each(|v| *v *= s);
    }

    pub fn to_dense(&self) -> faer::Mat<faer::c64> {
        let mut m = faer::Mat::<faer::c64>::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                m[(r, c)] = faer::c64::new(v.re, v.im);
            }
        }
        m
    }

    /// Matrix Market coordinate format, lower triangle of a Hermitian matrix.
    pub fn write_matrix_market(&self, mut w: impl Write) -> io::Result<()> {
        let lower: Vec<(usize, usize, Complex64)> = (0..self.n)
            .flat_map(|r| self.row(r).filter(move |&(c, _)| c <= r).map(move |(c, v)| (r, c, v)))
            .collect();
        writeln!(w, "%%MatrixMarket matrix coordinate complex hermitian")?;
        writeln!(w, "{} {} {}", self.n, self.n, lower.len())?;
        for (r, c, v) in lower {
            writeln!(w, "{} {} {:.17e} {:.17e}", r + 1, c + 1, v.re, v.im)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_coalesce_and_multiply() {
        let i = Complex64::new(0.0, 1.0);
        let m = CsrMatrix::from_triplets(2, vec![(0, 1, i), (1, 0, -i), (0, 0, 1.0.into()), (0, 0, 1.0.into())]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 0), Complex64::new(2.0, 0.0));
        assert_eq!(m.hermitian_deviation(), 0.0);
        let y = m.apply(&[1.0.into(), 1.0.into()]);
        assert_eq!(y, vec![Complex64::new(2.0, 1.0), -i]);
        let mut out = Vec::new();
        m.write_matrix_market(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate complex hermitian\n2 2 2\n"));
    }
}
