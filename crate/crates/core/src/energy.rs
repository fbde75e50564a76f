//! Energy functionals, dissipation, decay fitting and the integral and
//! pointwise estimates built on them.

use serde::{Deserialize, Serialize};

use crate::model::{trapezoid, CoefficientSet};
use crate::solver_fd::{BoundaryState, WaveState};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnergyError {
    #[error("exponent p = {0} outside the admissible range")]
    InvalidExponent(f64),
    #[error("epsilon = {0} must lie in (0, 2)")]
    InvalidEpsilon(f64),
    #[error("fit window [{0}, {1}] holds fewer than 10 samples")]
    WindowEmpty(f64, f64),
    #[error("energy sample {value} at t = {t} is not positive")]
    NonpositiveEnergyInWindow { t: f64, value: f64 },
    #[error("series starts at zero energy")]
    ZeroEnergyStart,
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// Interior and boundary parts of `E_p` at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub p: f64,
    pub e_total: f64,
    pub e_interior: f64,
    pub e_boundary: f64,
    /// Energy rate `dE/dt` (nonpositive); only meaningful for `p = 2`.
    pub dissipation: Option<f64>,
}

fn check_exponent(p: f64) -> Result<(), EnergyError> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(EnergyError::InvalidExponent(p))
    }
}

/// `E_p` of a finite-difference state.
///
/// The velocity part uses the trapezoid rule on nodes (wall velocities are the
/// boundary velocities), the slope part the midpoint rule on cells, so that
/// for `p = 2` this is exactly the quadratic form the scheme dissipates.
pub fn energy(state: &WaveState, coeffs: &CoefficientSet, p: f64) -> Result<EnergyBreakdown, EnergyError> {
    check_exponent(p)?;
    let n = coeffs.n_cells();
    let dx = 1.0 / n as f64;
    let vel: Vec<f64> = state.v.iter().map(|v| v.abs().powf(p)).collect();
    let slope: f64 = (0..n)
        .map(|i| coeffs.a_face(i) * ((state.u[i + 1] - state.u[i]) / dx).abs().powf(p))
        .sum::<f64>()
        * dx;
    let e_interior = (trapezoid(&vel, dx) + slope) / p;
    let e_boundary = match state.boundary {
        BoundaryState::Wentzell { eta1, eta2, zeta1 } => {
            let [c1, c2, c3] = coeffs.boundary_weights();
            (c1 * eta1.abs().powf(p) + c2 * eta2.abs().powf(p) + c3 * zeta1.abs().powf(p)) / p
        }
        BoundaryState::Related { eta, zeta } => {
            (coeffs.a_right() * eta.abs().powf(p) + coeffs.a_left() * zeta.abs().powf(p)) / p
        }
        BoundaryState::Pinned => 0.0,
    };
    Ok(EnergyBreakdown {
        p,
        e_total: e_interior + e_boundary,
        e_interior,
        e_boundary,
        dissipation: (p == 2.0).then(|| dissipation(state, coeffs)),
    })
}

/// Right-hand side of the `p = 2` energy identity; never positive.
pub fn dissipation(state: &WaveState, coeffs: &CoefficientSet) -> f64 {
    let dx = 1.0 / coeffs.n_cells() as f64;
    let qv2: Vec<f64> = state
        .v
        .iter()
        .zip(coeffs.q_samples())
        .map(|(v, q)| q * v * v)
        .collect();
    let interior = trapezoid(&qv2, dx);
    let boundary = match state.boundary {
        BoundaryState::Wentzell { eta1, zeta1, .. } => {
            let g = coeffs.gains();
            let [c1, _, c3] = coeffs.boundary_weights();
            c1 * g.alpha1 * eta1 * eta1 + c3 * g.gamma1 * zeta1 * zeta1
        }
        BoundaryState::Related { eta, zeta } => {
            let r = coeffs.related().expect("related gains");
            coeffs.a_right() * r.q1 * eta * eta + coeffs.a_left() * r.q0 * zeta * zeta
        }
        BoundaryState::Pinned => 0.0,
    };
    -(interior + boundary)
}

/// `int (|rho|^p + |xi|^p) dx` by the trapezoid rule.
pub fn characteristic_energy(rho: &[f64], xi: &[f64], dx: f64, p: f64) -> Result<f64, EnergyError> {
    check_exponent(p)?;
    if rho.len() != xi.len() {
        return Err(EnergyError::LengthMismatch(rho.len(), xi.len()));
    }
    let f: Vec<f64> = rho
        .iter()
        .zip(xi)
        .map(|(r, x)| r.abs().powf(p) + x.abs().powf(p))
        .collect();
    Ok(trapezoid(&f, dx))
}

/// Least-squares fit of `log E = log_M - nu t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub nu: f64,
    pub log_m: f64,
    pub r2: f64,
    pub window: (f64, f64),
}

impl DecayFit {
    pub fn m(&self) -> f64 {
        self.log_m.exp()
    }
}

pub fn fit_decay(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<DecayFit, EnergyError> {
    if times.len() != values.len() {
        return Err(EnergyError::LengthMismatch(times.len(), values.len()));
    }
    let (t0, t1) = window;
    let eps = 1e-9 * (1.0 + t1.abs());
    let mut pts = Vec::new();
    for (&t, &e) in times.iter().zip(values) {
        if t < t0 - eps || t > t1 + eps {
            continue;
        }
        if !(e > 0.0) {
            return Err(EnergyError::NonpositiveEnergyInWindow { t, value: e });
        }
        pts.push((t, e.ln()));
    }
    if pts.len() < 10 {
        return Err(EnergyError::WindowEmpty(t0, t1));
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - ym).powi(2)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(DecayFit {
        nu: -slope,
        log_m: intercept,
        r2,
        window,
    })
}

/// Smallest `C` with `int_S^T E dt <= C E(S)` over all sample times `S`.
pub fn komornik_ratio(times: &[f64], values: &[f64]) -> Result<f64, EnergyError> {
    if times.len() != values.len() {
        return Err(EnergyError::LengthMismatch(times.len(), values.len()));
    }
    if values.first().is_none_or(|&e| !(e > 0.0)) {
        return Err(EnergyError::ZeroEnergyStart);
    }
    let mut tail = 0.0;
    let mut best: f64 = 0.0;
    for k in (0..values.len()).rev() {
        if k + 1 < values.len() {
            tail += 0.5 * (times[k + 1] - times[k]) * (values[k] + values[k + 1]);
        }
        if values[k] > 0.0 {
            best = best.max(tail / values[k]);
        }
    }
    Ok(best)
}

pub fn sup_deviation(u: &[f64], u_star: f64) -> f64 {
    u.iter().map(|v| (v - u_star).abs()).fold(0.0, f64::max)
}

/// Squared pointwise bound `(4/a_lo) E + 2 eta2^2` on `max |u - u_*|^2`.
pub fn sup_bound_squared(coeffs: &CoefficientSet, e_total: f64, eta2: f64) -> f64 {
    4.0 / coeffs.a_lo() * e_total + 2.0 * eta2 * eta2
}

/// Constant `C` with `max |u - u_*|^2 <= C E` once `eta2^2 <= 2E/c2` is used.
pub fn sup_energy_constant(coeffs: &CoefficientSet) -> f64 {
    let [_, c2, _] = coeffs.boundary_weights();
    4.0 / coeffs.a_lo() + 4.0 / c2
}

/// Constant in `|a + b|^p <= (1 + eps)|a|^p + C eps^{1-p} |b|^p`.
///
/// `max(2^p, p 2^{p(p-1)})` covers both `|b| >= |a|` and the Young split for `|b| < |a|`.
pub fn young_constant(p: f64, eps: f64) -> Result<f64, EnergyError> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(EnergyError::InvalidExponent(p));
    }
    if !(eps > 0.0 && eps < 2.0) {
        return Err(EnergyError::InvalidEpsilon(eps));
    }
    Ok(2f64.powf(p).max(p * 2f64.powf(p * (p - 1.0))))
}

pub fn young_holds(p: f64, eps: f64, a: f64, b: f64, c: f64) -> bool {
    let lhs = (a + b).abs().powf(p);
    let rhs = (1.0 + eps) * a.abs().powf(p) + c / eps.powf(p - 1.0) * b.abs().powf(p);
    lhs <= rhs * (1.0 + 1e-12) + 1e-300
}

/// Discrete L1 norm over `[t_start, t_end]` of `(E_{n+1} - E_{n-1})/(2 dt) - D_n`.
pub fn dissipation_identity_residual(
    times: &[f64],
    energies: &[f64],
    dissipations: &[f64],
    window: (f64, f64),
) -> Result<f64, EnergyError> {
    if times.len() != energies.len() {
        return Err(EnergyError::LengthMismatch(times.len(), energies.len()));
    }
    if times.len() != dissipations.len() {
        return Err(EnergyError::LengthMismatch(times.len(), dissipations.len()));
    }
    let mut total = 0.0;
    for k in 1..times.len().saturating_sub(1) {
        if times[k] < window.0 || times[k] > window.1 {
            continue;
        }
        let h = 0.5 * (times[k + 1] - times[k - 1]);
        let rate = (energies[k + 1] - energies[k - 1]) / (2.0 * h);
        total += (rate - dissipations[k]).abs() * h;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_coefficients, CoefficientDescription, FunctionSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_coeffs(n: usize) -> CoefficientSet {
        let mut d = CoefficientDescription::new(FunctionSpec::constant(1.0), FunctionSpec::constant(0.0));
        d.require_interior_damping = false;
        validate_coefficients(&d, n).unwrap()
    }

    fn state(u: Vec<f64>, v: Vec<f64>, boundary: BoundaryState) -> WaveState {
        WaveState {
            t: 0.0,
            u,
            v,
            boundary,
        }
    }

    fn wentzell(eta1: f64, eta2: f64, zeta1: f64) -> BoundaryState {
        BoundaryState::Wentzell { eta1, eta2, zeta1 }
    }

    #[test]
    fn zero_state_has_zero_energy() {
        let c = unit_coeffs(8);
        let s = state(vec![0.0; 9], vec![0.0; 9], wentzell(0.0, 0.0, 0.0));
        let e = energy(&s, &c, 2.0).unwrap();
        assert_eq!((e.e_total, e.e_interior, e.e_boundary), (0.0, 0.0, 0.0));
        assert_eq!(e.dissipation, Some(-0.0));
    }

    #[test]
    fn linear_displacement_interior_energy() {
        let c = unit_coeffs(16);
        let u: Vec<f64> = (0..=16).map(|i| i as f64 / 16.0).collect();
        let s = state(u, vec![0.0; 17], wentzell(0.0, 0.0, 0.0));
        let e = energy(&s, &c, 2.0).unwrap();
        assert!((e.e_interior - 0.5).abs() < 1e-14);
    }

    #[test]
    fn boundary_energy_with_unit_gains() {
        let c = unit_coeffs(8);
        let mut v = vec![0.0; 9];
        v[0] = 1.0;
        v[8] = 1.0;
        let s = state(vec![0.0; 9], v, wentzell(1.0, 1.0, 1.0));
        let e = energy(&s, &c, 2.0).unwrap();
        assert!((e.e_boundary - 1.5).abs() < 1e-15);
    }

    #[test]
    fn invalid_exponent() {
        let c = unit_coeffs(4);
        let s = state(vec![0.0; 5], vec![0.0; 5], BoundaryState::Pinned);
        assert_eq!(energy(&s, &c, 0.5), Err(EnergyError::InvalidExponent(0.5)));
    }

    #[test]
    fn boundary_dissipation_value() {
        let c = unit_coeffs(8);
        let s = state(vec![0.0; 9], vec![0.0; 9], wentzell(1.0, 0.0, 0.0));
        assert_eq!(dissipation(&s, &c), -1.0);
        let s = state(vec![0.0; 9], vec![0.0; 9], wentzell(0.0, 0.0, 0.0));
        assert_eq!(dissipation(&s, &c), 0.0);
    }

    #[test]
    fn dissipation_is_nonpositive() {
        let c = validate_coefficients(
            &CoefficientDescription::new(FunctionSpec::constant(1.0), FunctionSpec::indicator(0.3, 0.5, 5.0)),
            10,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let v: Vec<f64> = (0..11).map(|_| rng.random_range(-5.0..5.0)).collect();
            let b = wentzell(v[10], rng.random_range(-1.0..1.0), v[0]);
            let s = state(vec![0.0; 11], v, b);
            assert!(dissipation(&s, &c) <= 0.0);
        }
    }

    #[test]
    fn energy_is_homogeneous() {
        let c = unit_coeffs(12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in [1.0, 1.5, 2.0, 3.0, 4.5] {
            let u: Vec<f64> = (0..13).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..13).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b = wentzell(v[12], 0.3, v[0]);
            let s = state(u.clone(), v.clone(), b);
            let lam = -1.7f64;
            let scaled = state(
                u.iter().map(|x| lam * x).collect(),
                v.iter().map(|x| lam * x).collect(),
                wentzell(lam * v[12], lam * 0.3, lam * v[0]),
            );
            let e = energy(&s, &c, p).unwrap();
            let es = energy(&scaled, &c, p).unwrap();
            assert!((es.e_total - lam.abs().powf(p) * e.e_total).abs() < 1e-12 * es.e_total);
            assert!((e.e_total - e.e_interior - e.e_boundary).abs() <= 1e-15 * e.e_total);
            assert!(e.e_interior >= 0.0 && e.e_boundary >= 0.0);
        }
    }

    #[test]
    fn fit_exact_exponentials() {
        let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let e: Vec<f64> = t.iter().map(|t| (-3.0 * t).exp()).collect();
        let f = fit_decay(&t, &e, (0.0, 5.0)).unwrap();
        assert!((f.nu - 3.0).abs() < 1e-12);
        assert!(f.log_m.abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);

        let e: Vec<f64> = t.iter().map(|t| 5.0 * (-0.7 * t).exp()).collect();
        let f = fit_decay(&t, &e, (0.0, 5.0)).unwrap();
        assert!((f.nu - 0.7).abs() < 1e-12);
        assert!((f.m() - 5.0).abs() < 1e-10);
        let shifted = fit_decay(&t, &e, (2.0, 4.5)).unwrap();
        assert!((shifted.nu - f.nu).abs() < 1e-12);
    }

    #[test]
    fn fit_errors() {
        let t: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let mut e: Vec<f64> = t.iter().map(|t| (-t).exp()).collect();
        assert!(matches!(fit_decay(&t, &e, (0.0, 5.0)), Err(EnergyError::WindowEmpty(..))));
        e[12] = 0.0;
        assert!(matches!(
            fit_decay(&t, &e, (0.0, 19.0)),
            Err(EnergyError::NonpositiveEnergyInWindow { .. })
        ));
    }

    #[test]
    fn komornik_ratio_of_exponential() {
        let nu = 0.8;
        let t: Vec<f64> = (0..=20000).map(|k| k as f64 * 0.005).collect();
        let e: Vec<f64> = t.iter().map(|t| (-nu * t).exp()).collect();
        let c = komornik_ratio(&t, &e).unwrap();
        assert!((c - 1.0 / nu).abs() < 1e-4);
        assert_eq!(komornik_ratio(&t, &vec![0.0; t.len()]), Err(EnergyError::ZeroEnergyStart));
    }

    #[test]
    fn komornik_ratio_plateau_is_large() {
        let t: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.1).collect();
        let e: Vec<f64> = t
            .iter()
            .map(|&t| if t < 50.0 { 1.0 } else { (-(t - 50.0)).exp() })
            .collect();
        assert!(komornik_ratio(&t, &e).unwrap() > 50.0);
    }

    #[test]
    fn sup_deviation_examples() {
        assert_eq!(sup_deviation(&[2.0; 7], 2.0), 0.0);
        let u: Vec<f64> = (0..=8)
            .map(|i| 1.0 + (std::f64::consts::PI * i as f64 / 8.0).sin())
            .collect();
        assert!((sup_deviation(&u, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn young_cauchy_schwarz_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10000 {
            let (a, b) = (rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
            let eps = rng.random_range(1e-6..2.0);
            assert!(young_holds(2.0, eps, a, b, 3.0));
            assert!(young_holds(2.0, eps.min(1.0), 0.0, b, 1.0));
        }
        assert!(young_constant(2.0, 1.0).unwrap() >= 3.0);
    }

    #[test]
    fn young_constant_dominates_grid_supremum() {
        // sup over b of (|1+b|^3 - (1+eps)) eps^2 / |b|^3 on a dense grid (a = 1 by homogeneity)
        let p = 3.0;
        let mut worst: f64 = 0.0;
        for ie in 1..1000 {
            let eps = 2.0 * ie as f64 / 1000.0;
            for ib in 1..=1000 {
                for b in [ib as f64 / 1000.0 * 4.0, -(ib as f64) / 1000.0 * 4.0] {
                    let need = ((1.0 + b).abs().powf(p) - (1.0 + eps)) * eps.powf(p - 1.0) / b.abs().powf(p);
                    worst = worst.max(need);
                }
            }
        }
        let c = young_constant(p, 1.0).unwrap();
        assert!(worst > 20.0 && worst < c, "grid sup {worst}, constant {c}");
    }

    #[test]
    fn young_argument_checks() {
        assert_eq!(young_constant(1.0, 1.0), Err(EnergyError::InvalidExponent(1.0)));
        assert_eq!(young_constant(2.0, 2.0), Err(EnergyError::InvalidEpsilon(2.0)));
    }

    #[test]
    fn residual_vanishes_for_consistent_series() {
        let t: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.01).collect();
        let e: Vec<f64> = t.iter().map(|t| (-t).exp()).collect();
        let d: Vec<f64> = t.iter().map(|t| -(-t).exp()).collect();
        let r = dissipation_identity_residual(&t, &e, &d, (0.0, 10.0)).unwrap();
        assert!(r < 1e-4);
    }
}
