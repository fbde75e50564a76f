//! Spectrum, resolvent norms and dissipativity of the discrete generator.
//!
//! The generator is the matrix of [`SemiDiscrete`] in the layout
//! `(g_0..g_{N-1}, v_1..v_{N-1}, eta1, eta2, zeta1)`. Norms are taken in the
//! weighted inner product `<U, V>_W = sum W_k U_k V_k`, i.e. operator norms of
//! `W^{1/2} A W^{-1/2}` in the Euclidean sense.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::banded::{BandLu, BandMatrix};
use crate::model::CoefficientSet;
use crate::semidiscrete::{BoundaryModel, SemiDiscrete};

/// Eigenvalues with real part at or above this count as imaginary-axis hits.
pub const AXIS_TOLERANCE: f64 = -1e-10;
/// Smallest singular value treated as an exact singularity.
pub const SINGULAR_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error("grid with {0} cells is too coarse (need at least 8)")]
    GridTooCoarse(usize),
    #[error("coefficients live on {coeffs} cells, requested {requested}")]
    GridMismatch { coeffs: usize, requested: usize },
    #[error("dimension {0} exceeds the dense eigensolver budget")]
    TooLarge(usize),
    #[error("eigenvalue iteration did not converge")]
    EigensolverFailure,
    #[error("iλ - A is numerically singular at λ = {lambda} (σ_min = {sigma_min:e})")]
    SingularAtLambda { lambda: f64, sigma_min: f64 },
    #[error("invalid generator: {0}")]
    InvalidGenerator(String),
}

const MAX_DENSE_DIM: usize = 5000;

/// Dense generator with its Gram weights; keeps the tridiagonal form when assembled from coefficients.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    pub matrix: DMatrix<f64>,
    pub gram_weights: Vec<f64>,
    /// Symmetric matrix of the dissipation form `Q(U) = U^T Q U`.
    pub dissipation: DMatrix<f64>,
    banded: Option<SemiDiscrete>,
}

impl GeneratorMatrix {
    pub fn from_dense(
        matrix: DMatrix<f64>,
        gram_weights: Vec<f64>,
        dissipation: DMatrix<f64>,
    ) -> Result<Self, SpectralError> {
        let n = matrix.nrows();
        if matrix.ncols() != n || gram_weights.len() != n || dissipation.shape() != (n, n) {
            return Err(SpectralError::InvalidGenerator("shape mismatch".into()));
        }
        if gram_weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(SpectralError::InvalidGenerator("Gram weights must be positive".into()));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(SpectralError::InvalidGenerator("non-finite entry".into()));
        }
        Ok(Self {
            matrix,
            gram_weights,
            dissipation,
            banded: None,
        })
    }

    pub fn from_semidiscrete(sd: SemiDiscrete) -> Self {
        Self {
            matrix: sd.to_dense(),
            gram_weights: sd.dense_weights(),
            dissipation: sd.dense_dissipation(),
            banded: Some(sd),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `<A U, U>_W`.
    pub fn weighted_form(&self, u: &[f64]) -> f64 {
        let au = &self.matrix * DVector::from_column_slice(u);
        au.iter().zip(u).zip(&self.gram_weights).map(|((a, x), w)| w * a * x).sum()
    }

    pub fn weighted_norm_sq(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.gram_weights).map(|(x, w)| w * x * x).sum()
    }

    pub fn dissipation_form(&self, u: &[f64]) -> f64 {
        let x = DVector::from_column_slice(u);
        x.dot(&(&self.dissipation * &x))
    }

    /// `W^{1/2} A W^{-1/2}`.
    pub fn symmetrized(&self) -> DMatrix<f64> {
        let s: Vec<f64> = self.gram_weights.iter().map(|w| w.sqrt()).collect();
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| s[i] * self.matrix[(i, j)] / s[j])
    }
}

/// Generator of the main system on `coeffs`' grid.
pub fn assemble_generator(coeffs: &CoefficientSet, n_cells: usize) -> Result<GeneratorMatrix, SpectralError> {
    assemble_generator_for(coeffs, n_cells, BoundaryModel::Wentzell)
}

pub fn assemble_generator_for(
    coeffs: &CoefficientSet,
    n_cells: usize,
    model: BoundaryModel,
) -> Result<GeneratorMatrix, SpectralError> {
    if n_cells < 8 {
        return Err(SpectralError::GridTooCoarse(n_cells));
    }
    if coeffs.n_cells() != n_cells {
        return Err(SpectralError::GridMismatch {
            coeffs: coeffs.n_cells(),
            requested: n_cells,
        });
    }
    Ok(GeneratorMatrix::from_semidiscrete(SemiDiscrete::assemble(coeffs, model)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolventSweep {
    /// `(lambda, ||(i lambda - A)^{-1}||_W)`.
    pub samples: Vec<(f64, f64)>,
    pub sup: f64,
    pub argmax: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Dissipativity {
    /// `max |<A U, U>_W + Q(U)| / ||U||_W^2` over the samples.
    pub residual: f64,
    /// `max <A U, U>_W / ||U||_W^2`; never positive for a dissipative generator.
    pub max_form: f64,
    /// Largest eigenvalue of the symmetric part of `W^{1/2} A W^{-1/2}`.
    pub symmetric_part_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralReport {
    pub eigenvalues: Vec<Complex64>,
    pub abscissa: f64,
    /// Eigenvalues with `Re >= -1e-10`.
    pub axis_hits: usize,
    pub resolvent: Option<ResolventSweep>,
    pub dissipativity: Option<Dissipativity>,
}

impl SpectralReport {
    pub fn h1_holds(&self) -> bool {
        self.axis_hits == 0
    }
}

/// All eigenvalues from a real Schur decomposition.
pub fn spectrum(gen: &GeneratorMatrix) -> Result<SpectralReport, SpectralError> {
    if gen.dim() > MAX_DENSE_DIM {
        return Err(SpectralError::TooLarge(gen.dim()));
    }
    let schur = nalgebra::Schur::try_new(gen.matrix.clone(), f64::EPSILON, 100 * gen.dim().max(10))
        .ok_or(SpectralError::EigensolverFailure)?;
    let eigenvalues: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    let abscissa = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let axis_hits = eigenvalues.iter().filter(|z| z.re >= AXIS_TOLERANCE).count();
    Ok(SpectralReport {
        eigenvalues,
        abscissa,
        axis_hits,
        resolvent: None,
        dissipativity: None,
    })
}

/// `count` equispaced points on `[lo, hi]`.
pub fn lambda_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..count)
            .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// `1 / sigma_min(W^{1/2} (i lambda - A) W^{-1/2})`.
pub fn resolvent_norm(gen: &GeneratorMatrix, lambda: f64) -> Result<f64, SpectralError> {
    let sigma_min = match &gen.banded {
        Some(sd) => banded_sigma_min(sd, lambda),
        None => dense_sigma_min(gen, lambda),
    }?;
    if !(sigma_min >= SINGULAR_THRESHOLD) {
        return Err(SpectralError::SingularAtLambda { lambda, sigma_min });
    }
    Ok(1.0 / sigma_min)
}

fn shifted_dense(gen: &GeneratorMatrix, lambda: f64) -> DMatrix<Complex64> {
    let s = gen.symmetrized();
    DMatrix::from_fn(gen.dim(), gen.dim(), |i, j| {
        let diag = if i == j { Complex64::new(0.0, lambda) } else { Complex64::new(0.0, 0.0) };
        diag - Complex64::new(s[(i, j)], 0.0)
    })
}

/// Reference route through a dense complex SVD.
pub fn dense_sigma_min(gen: &GeneratorMatrix, lambda: f64) -> Result<f64, SpectralError> {
    let svd = shifted_dense(gen, lambda)
        .try_svd(false, false, f64::EPSILON, 0)
        .ok_or(SpectralError::EigensolverFailure)?;
    Ok(svd.singular_values.min())
}

const LANCZOS_MAX_STEPS: usize = 80;
const LANCZOS_TOL: f64 = 1e-10;

/// Largest eigenvalue of `(M^H M)^{-1}` by Lanczos with full reorthogonalization,
/// each product applied through the band factors of `M` and `M^H`.
fn banded_sigma_min(sd: &SemiDiscrete, lambda: f64) -> Result<f64, SpectralError> {
    let s: Vec<f64> = sd.weights().iter().map(|w| w.sqrt()).collect();
    let inv: Vec<f64> = s.iter().map(|x| 1.0 / x).collect();
    let m: BandMatrix<Complex64> = sd
        .matrix()
        .diag_scale(&s, &inv)
        .map(|a| Complex64::new(-a, 0.0))
        .scaled_shift(Complex64::new(1.0, 0.0), Complex64::new(0.0, lambda));
    let singular = |_| SpectralError::SingularAtLambda { lambda, sigma_min: 0.0 };
    let lu: BandLu<Complex64> = m.lu().map_err(singular)?;
    let lu_h: BandLu<Complex64> = m.adjoint().lu().map_err(singular)?;
    let apply = |x: &[Complex64]| -> Result<Vec<Complex64>, SpectralError> {
        let y = lu_h.solve(x).map_err(singular)?;
        lu.solve(&y).map_err(singular)
    };

    let n = sd.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    normalize(&mut q);
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    let (mut alphas, mut betas) = (Vec::new(), Vec::new());
    let mut estimate = 0.0;
    for step in 0..LANCZOS_MAX_STEPS.min(n) {
        let mut w = apply(&q)?;
        let alpha = dot(&q, &w).re;
        for (k, v) in w.iter_mut().enumerate() {
            *v -= q[k] * alpha;
        }
        if let (Some(prev), Some(&beta)) = (basis.last(), betas.last()) {
            let prev: &Vec<Complex64> = prev;
            for (k, v) in w.iter_mut().enumerate() {
                *v -= prev[k] * beta;
            }
        }
        basis.push(q.clone());
        alphas.push(alpha);
        for b in &basis {
            let c = dot(b, &w);
            for (k, v) in w.iter_mut().enumerate() {
                *v -= b[k] * c;
            }
        }
        let beta = norm(&w);
        let t = DMatrix::from_fn(alphas.len(), alphas.len(), |i, j| {
            if i == j {
                alphas[i]
            } else if i + 1 == j {
                betas[i]
            } else if j + 1 == i {
                betas[j]
            } else {
                0.0
            }
        });
        let top = t.symmetric_eigenvalues().max();
        let converged = step > 2 && (top - estimate).abs() <= LANCZOS_TOL * top;
        estimate = top;
        if converged || beta <= 1e-14 * top {
            break;
        }
        betas.push(beta);
        q = w.iter().map(|v| v / beta).collect();
    }
    Ok(1.0 / estimate.sqrt())
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(a: &mut [Complex64]) {
    let n = norm(a);
    for x in a {
        *x /= n;
    }
}

/// Resolvent norms on `lambdas`, then golden-section refinement around the three largest local maxima.
pub fn resolvent_sweep(gen: &GeneratorMatrix, lambdas: &[f64]) -> Result<ResolventSweep, SpectralError> {
    let mut samples: Vec<(f64, f64)> = lambdas
        .par_iter()
        .map(|&l| resolvent_norm(gen, l).map(|r| (l, r)))
        .collect::<Result<_, _>>()?;
    let mut peaks: Vec<usize> = (0..samples.len())
        .filter(|&i| {
            let left = i == 0 || samples[i - 1].1 <= samples[i].1;
            let right = i + 1 == samples.len() || samples[i + 1].1 <= samples[i].1;
            left && right
        })
        .collect();
    peaks.sort_by(|&a, &b| samples[b].1.total_cmp(&samples[a].1));
    peaks.truncate(3);
    let refined: Vec<(f64, f64)> = peaks
        .par_iter()
        .map(|&i| {
            let lo = samples[i.saturating_sub(1)].0;
            let hi = samples[(i + 1).min(samples.len() - 1)].0;
            golden_max(gen, lo, hi)
        })
        .collect::<Result<_, _>>()?;
    samples.extend(refined);
    let (argmax, sup) = samples
        .iter()
        .copied()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0.0, 0.0));
    Ok(ResolventSweep { samples, sup, argmax })
}

fn golden_max(gen: &GeneratorMatrix, mut lo: f64, mut hi: f64) -> Result<(f64, f64), SpectralError> {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = resolvent_norm(gen, x1)?;
    let mut f2 = resolvent_norm(gen, x2)?;
    for _ in 0..40 {
        if f1 >= f2 {
            hi = x2;
            (x2, f2) = (x1, f1);
            x1 = hi - ratio * (hi - lo);
            f1 = resolvent_norm(gen, x1)?;
        } else {
            lo = x1;
            (x1, f1) = (x2, f2);
            x2 = lo + ratio * (hi - lo);
            f2 = resolvent_norm(gen, x2)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

/// Checks `<A U, U>_W = -Q(U)` on `n_samples` random vectors and the sign of the symmetric part.
pub fn dissipativity_residual(gen: &GeneratorMatrix, n_samples: usize, seed: u64) -> Dissipativity {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = gen.dim();
    let mut residual: f64 = 0.0;
    let mut max_form = f64::NEG_INFINITY;
    for _ in 0..n_samples {
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = gen.weighted_norm_sq(&u);
        let form = gen.weighted_form(&u);
        residual = residual.max((form + gen.dissipation_form(&u)).abs() / norm);
        max_form = max_form.max(form / norm);
    }
    let s = gen.symmetrized();
    let sym = (&s + s.transpose()) * 0.5;
    Dissipativity {
        residual,
        max_form,
        symmetric_part_max: sym.symmetric_eigenvalues().max(),
    }
}
