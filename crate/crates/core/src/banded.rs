//! Band matrices and an LU factorization with partial pivoting.
//!
//! Every operator in this crate is tridiagonal once the unknowns are
//! interleaved (boundary velocity, slope, velocity, slope, ...), so the time
//! stepper and the resolvent sweep both factor band matrices instead of
//! dense ones.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

/// Field scalars the band solver works over.
pub trait Scalar:
    Copy
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + std::fmt::Debug
{
    fn zero() -> Self;
    fn from_real(x: f64) -> Self;
    fn modulus(self) -> f64;
    fn conj(self) -> Self;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn conj(self) -> Self {
        self
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BandError {
    #[error("zero pivot in column {0}")]
    SingularPivot(usize),
    #[error("right-hand side has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Square matrix with `kl` sub- and `ku` super-diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    // row i holds columns i-kl ..= i+ku
    data: Vec<T>,
}

impl<T: Scalar> BandMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![T::zero(); n * (kl + ku + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if i >= self.n || j >= self.n || !self.in_band(i, j) {
            return T::zero();
        }
        self.data[i * self.width() + j + self.kl - i]
    }

    /// Adds `value` to entry (i, j).
    ///
    /// Panics when (i, j) lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, value: T) {
        assert!(
            i < self.n && j < self.n && self.in_band(i, j),
            "entry ({i}, {j}) outside band"
        );
        let w = self.width();
        let slot = &mut self.data[i * w + j + self.kl - i];
        *slot = *slot + value;
    }

    /// Nonzero pattern in row `i` as `(column, value)` pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let lo = i.saturating_sub(self.kl);
        let hi = (i + self.ku).min(self.n - 1);
        (lo..=hi).map(move |j| (j, self.get(i, j)))
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                self.row(i)
                    .fold(T::zero(), |acc, (j, a)| acc + a * x[j])
            })
            .collect()
    }

    /// `alpha * self + beta * I` with the same band.
    pub fn scaled_shift(&self, alpha: T, beta: T) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = alpha * *v;
        }
        for i in 0..self.n {
            out.add(i, i, beta);
        }
        out
    }

    /// Conjugate transpose; swaps the bandwidths.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.n, self.ku, self.kl);
        for i in 0..self.n {
            for (j, a) in self.row(i) {
                out.add(j, i, a.conj());
            }
        }
        out
    }

    /// Row and column diagonal scaling: `diag(left) * self * diag(right)`.
    pub fn diag_scale(&self, left: &[f64], right: &[f64]) -> Self {
        let mut out = Self::zeros(self.n, self.kl, self.ku);
        for i in 0..self.n {
            for (j, a) in self.row(i) {
                out.add(i, j, T::from_real(left[i] * right[j]) * a);
            }
        }
        out
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> BandMatrix<U> {
        BandMatrix {
            n: self.n,
            kl: self.kl,
            ku: self.ku,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn lu(&self) -> Result<BandLu<T>, BandError> {
        BandLu::factor(self)
    }
}

/// LU factors of a band matrix, row interchanges applied column by column.
#[derive(Debug, Clone)]
pub struct BandLu<T> {
    n: usize,
    kl: usize,
    // row i holds columns i-kl ..= i+kl+ku; U gains kl extra super-diagonals from pivoting
    upper: usize,
    rows: Vec<T>,
    pivots: Vec<usize>,
}

impl<T: Scalar> BandLu<T> {
    fn width(&self) -> usize {
        self.kl + self.upper + 1
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width() + j + self.kl - i
    }

    fn factor(a: &BandMatrix<T>) -> Result<Self, BandError> {
        let n = a.n;
        let kl = a.kl;
        let upper = a.kl + a.ku;
        let mut lu = Self {
            n,
            kl,
            upper,
            rows: vec![T::zero(); n * (kl + upper + 1)],
            pivots: vec![0; n],
        };
        for i in 0..n {
            for (j, v) in a.row(i) {
                let k = lu.idx(i, j);
                lu.rows[k] = v;
            }
        }
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.rows[lu.idx(k, k)].modulus();
            for i in k + 1..=last_row {
                let m = lu.rows[lu.idx(i, k)].modulus();
                if m > best {
                    best = m;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(BandError::SingularPivot(k));
            }
            lu.pivots[k] = p;
            let last_col = (k + upper).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let (a_idx, b_idx) = (lu.idx(k, j), lu.idx(p, j));
                    lu.rows.swap(a_idx, b_idx);
                }
            }
            let pivot = lu.rows[lu.idx(k, k)];
            for i in k + 1..=last_row {
                let ik = lu.idx(i, k);
                let l = lu.rows[ik] / pivot;
                lu.rows[ik] = l;
                if l == T::zero() {
                    continue;
                }
                for j in k + 1..=last_col {
                    let (ij, kj) = (lu.idx(i, j), lu.idx(k, j));
                    lu.rows[ij] = lu.rows[ij] - l * lu.rows[kj];
                }
            }
        }
        Ok(lu)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [T]) -> Result<(), BandError> {
        let n = self.n;
        if b.len() != n {
            return Err(BandError::LengthMismatch {
                expected: n,
                got: b.len(),
            });
        }
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                b[i] = b[i] - self.rows[self.idx(i, k)] * bk;
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + self.upper).min(n - 1) {
                s = s - self.rows[self.idx(k, j)] * b[j];
            }
            b[k] = s / self.rows[self.idx(k, k)];
        }
        Ok(())
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>, BandError> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense(a: &BandMatrix<f64>) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(a.dim(), a.dim(), |i, j| a.get(i, j))
    }

    #[test]
    fn tridiagonal_solve_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 40;
        let mut a = BandMatrix::<f64>::zeros(n, 1, 1);
        for i in 0..n {
            for j in i.saturating_sub(1)..=(i + 1).min(n - 1) {
                a.add(i, j, rng.random_range(-1.0..1.0));
            }
        }
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = a.lu().unwrap().solve(&b).unwrap();
        let x_ref = dense(&a).lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
        for i in 0..n {
            assert!((x[i] - x_ref[i]).abs() < 1e-9 * (1.0 + x_ref[i].abs()));
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        // [[0, 1], [1, 0]] needs a row swap
        let mut a = BandMatrix::<f64>::zeros(2, 1, 1);
        a.add(0, 1, 1.0);
        a.add(1, 0, 1.0);
        let x = a.lu().unwrap().solve(&[3.0, 5.0]).unwrap();
        assert_eq!(x, vec![5.0, 3.0]);
    }

    #[test]
    fn singular_matrix_reports_pivot() {
        let a = BandMatrix::<f64>::zeros(3, 1, 1);
        assert!(matches!(a.lu(), Err(BandError::SingularPivot(0))));
    }

    #[test]
    fn complex_wider_band_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 25;
        let mut a = BandMatrix::<Complex64>::zeros(n, 2, 3);
        for i in 0..n {
            for j in i.saturating_sub(2)..=(i + 3).min(n - 1) {
                a.add(
                    i,
                    j,
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                );
            }
        }
        let x_true: Vec<Complex64> = (0..n)
            .map(|k| Complex64::new(k as f64, 1.0 - k as f64 * 0.5))
            .collect();
        let b = a.mul_vec(&x_true);
        let x = a.lu().unwrap().solve(&b).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).norm() < 1e-8 * (1.0 + v.norm()));
        }
        let ah = a.adjoint();
        assert_eq!(ah.lower_bandwidth(), 3);
        assert_eq!(ah.get(4, 2), a.get(2, 4).conj());
    }
}
