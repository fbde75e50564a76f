//! Matrix exponential of small dense matrices by scaling and squaring with a
//! diagonal Padé approximant.

use nalgebra::SMatrix;

const PADE_DEGREE: usize = 6;

fn pade_coefficients() -> [f64; PADE_DEGREE + 1] {
    // c_k = (2q-k)! q! / ((2q)! k! (q-k)!)
    let q = PADE_DEGREE;
    let mut c = [0.0; PADE_DEGREE + 1];
    c[0] = 1.0;
    for k in 1..=q {
        c[k] = c[k - 1] * (q + 1 - k) as f64 / (k * (2 * q + 1 - k)) as f64;
    }
    c
}

pub fn expm<const D: usize>(a: &SMatrix<f64, D, D>) -> SMatrix<f64, D, D> {
    let norm = (0..D)
        .map(|i| (0..D).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if norm == 0.0 {
        return SMatrix::identity();
    }
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings);

    let c = pade_coefficients();
    let id = SMatrix::<f64, D, D>::identity();
    let mut power = id;
    let mut num = id * c[0];
    let mut den = id * c[0];
    for (k, ck) in c.iter().enumerate().skip(1) {
        power *= scaled;
        num += power * *ck;
        if k % 2 == 0 {
            den += power * *ck;
        } else {
            den -= power * *ck;
        }
    }
    let solved = nalgebra::DMatrix::from_column_slice(D, D, den.as_slice())
        .lu()
        .solve(&nalgebra::DMatrix::from_column_slice(D, D, num.as_slice()))
        .expect("Padé denominator is nonsingular for scaled norm <= 1/2");
    let mut result = SMatrix::<f64, D, D>::from_column_slice(solved.as_slice());
    for _ in 0..squarings {
        result = result * result;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix2, Matrix3};

    /// Plain Taylor series without scaling; only trustworthy for small norms.
    fn taylor_reference<const D: usize>(a: &SMatrix<f64, D, D>) -> SMatrix<f64, D, D> {
        let mut term = SMatrix::<f64, D, D>::identity();
        let mut sum = term;
        for k in 1..80 {
            term = term * a / k as f64;
            sum += term;
        }
        sum
    }

    #[test]
    fn zero_matrix_is_identity() {
        assert_eq!(expm(&Matrix3::<f64>::zeros()), Matrix3::identity());
    }

    #[test]
    fn diagonal_matches_scalar_exponentials() {
        let a = Matrix3::from_diagonal(&nalgebra::Vector3::new(-1.0, 0.3, -7.5));
        let e = expm(&a);
        for (i, x) in [-1.0f64, 0.3, -7.5].iter().enumerate() {
            assert!((e[(i, i)] - x.exp()).abs() < 1e-13 * x.exp().max(1.0));
        }
    }

    #[test]
    fn damped_oscillator_block_matches_series() {
        let a = Matrix2::new(0.0, 1.0, -1.0, -1.0);
        for dt in [1e-3, 0.01, 0.25, 1.0] {
            let e = expm(&(a * dt));
            let r = taylor_reference(&(a * dt));
            assert!((e - r).abs().max() < 1e-12, "dt = {dt}");
        }
    }

    #[test]
    fn damped_oscillator_closed_form() {
        // eigenvalues -1/2 +- i w, w = sqrt(3)/2
        let a = Matrix2::new(0.0, 1.0, -1.0, -1.0);
        let t = 3.7f64;
        let w = 3f64.sqrt() / 2.0;
        let decay = (-0.5 * t).exp();
        let (s, c) = (w * t).sin_cos();
        // e^{At} = e^{-t/2} [ cI + (s/w)(A + I/2) ]
        let expected = (Matrix2::identity() * c + (a + Matrix2::identity() * 0.5) * (s / w)) * decay;
        assert!((expm(&(a * t)) - expected).abs().max() < 1e-13);
    }

    #[test]
    fn repeated_eigenvalue_jordan_block() {
        // alpha1 = 1, alpha2 = 2 gives a double eigenvalue at -1
        let a = Matrix2::new(0.0, 1.0, -1.0, -2.0);
        let t = 2.0f64;
        let e = (-t).exp();
        let expected = Matrix2::new((1.0 + t) * e, t * e, -t * e, (1.0 - t) * e);
        assert!((expm(&(a * t)) - expected).abs().max() < 1e-14);
    }

    #[test]
    fn semigroup_property() {
        let a = Matrix3::new(0.0, 1.0, 0.0, -2.0, -0.5, 0.0, 0.0, 0.0, -3.0);
        let lhs = expm(&(a * 1.3));
        let rhs = expm(&(a * 0.4)) * expm(&(a * 0.9));
        assert!((lhs - rhs).abs().max() < 1e-13);
    }
}
