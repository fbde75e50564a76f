//! Reference solutions and comparison utilities.

use serde::{Deserialize, Serialize};

use crate::solver_fd::Trajectory;
use crate::solver_riemann::{from_riemann, RiemannTrajectory};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("series are not comparable: {0}")]
    GridMismatch(String),
    #[error("initial energy is zero")]
    ZeroInitialEnergy,
    #[error("trajectory carries no field records")]
    MissingFields,
    #[error("reference needs at least two samples")]
    TooFewSamples,
}

/// Solution of `w_tt = w_xx` on `[0, 1]` with `w = 0` at both ends, built
/// from sampled initial data by odd 2-periodic reflection.
///
/// Samples are interpolated linearly; the `w1` integral is the exact
/// integral of that interpolant.
#[derive(Debug, Clone)]
pub struct DalembertReference {
    w0: Vec<f64>,
    w1: Vec<f64>,
    // W(x_k) = int_0^{x_k} w1
    cumulative: Vec<f64>,
    dx: f64,
}

impl DalembertReference {
    pub fn new(w0: &[f64], w1: &[f64]) -> Result<Self, OracleError> {
        if w0.len() != w1.len() {
            return Err(OracleError::GridMismatch(format!("{} vs {} samples", w0.len(), w1.len())));
        }
        if w0.len() < 2 {
            return Err(OracleError::TooFewSamples);
        }
        let dx = 1.0 / (w0.len() - 1) as f64;
        let mut cumulative = Vec::with_capacity(w1.len());
        cumulative.push(0.0);
        for k in 1..w1.len() {
            cumulative.push(cumulative[k - 1] + 0.5 * dx * (w1[k - 1] + w1[k]));
        }
        Ok(Self {
            w0: w0.to_vec(),
            w1: w1.to_vec(),
            cumulative,
            dx,
        })
    }

    /// `(cell, offset)` for `x` in `[0, 1]`; points within rounding of a node snap to it.
    fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.w0.len() - 1;
        let s = x / self.dx;
        let nearest = s.round();
        if (s - nearest).abs() < 1e-9 {
            let node = nearest as usize;
            return if node >= n { (n - 1, self.dx) } else { (node, 0.0) };
        }
        let k = (s.floor() as usize).min(n - 1);
        (k, x - k as f64 * self.dx)
    }

    fn interp(&self, f: &[f64], x: f64) -> f64 {
        match self.locate(x) {
            (k, 0.0) => f[k],
            (k, h) if h == self.dx => f[k + 1],
            (k, h) => f[k] + (f[k + 1] - f[k]) * h / self.dx,
        }
    }

    /// Odd 2-periodic extension of `w0`.
    fn w0_ext(&self, s: f64) -> f64 {
        let r = s.rem_euclid(2.0);
        if r <= 1.0 {
            self.interp(&self.w0, r)
        } else {
            -self.interp(&self.w0, 2.0 - r)
        }
    }

    /// Antiderivative of the odd extension of `w1`; even and 2-periodic.
    fn w1_primitive(&self, s: f64) -> f64 {
        let mut r = s.rem_euclid(2.0);
        if r > 1.0 {
            r = 2.0 - r;
        }
        let (k, h) = self.locate(r);
        let slope = (self.w1[k + 1] - self.w1[k]) / self.dx;
        self.cumulative[k] + h * (self.w1[k] + 0.5 * slope * h)
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        0.5 * (self.w0_ext(x + t) + self.w0_ext(x - t))
            + 0.5 * (self.w1_primitive(x + t) - self.w1_primitive(x - t))
    }
}

/// Single-point convenience wrapper around [`DalembertReference`].
pub fn dalembert_reference(w0: &[f64], w1: &[f64], t: f64, x: f64) -> Result<f64, OracleError> {
    Ok(DalembertReference::new(w0, w1)?.eval(t, x))
}

/// Nodal `(u_t, u_x)` and quadratic energy at common record times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSeries {
    pub times: Vec<f64>,
    pub ut: Vec<Vec<f64>>,
    pub ux: Vec<Vec<f64>>,
    pub energy: Vec<f64>,
}

impl FieldSeries {
    pub fn from_fd(traj: &Trajectory) -> Result<Self, OracleError> {
        if traj.fields.len() != traj.times.len() {
            return Err(OracleError::MissingFields);
        }
        Ok(Self {
            times: traj.times.clone(),
            ut: traj.fields.iter().map(|f| f.ut.clone()).collect(),
            ux: traj.fields.iter().map(|f| f.ux.clone()).collect(),
            energy: traj.total_energy(),
        })
    }

    pub fn from_riemann(traj: &RiemannTrajectory) -> Result<Self, OracleError> {
        if traj.states.len() != traj.times.len() {
            return Err(OracleError::MissingFields);
        }
        let mut ut = Vec::with_capacity(traj.states.len());
        let mut ux = Vec::with_capacity(traj.states.len());
        for s in &traj.states {
            let (v, w) = from_riemann(&s.rho, &s.xi).map_err(|e| OracleError::GridMismatch(e.to_string()))?;
            ut.push(v);
            ux.push(w);
        }
        Ok(Self {
            times: traj.times.clone(),
            ut,
            ux,
            energy: traj.energy.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub max_abs_error: f64,
    /// Largest spatial L2 norm of the difference over the records.
    pub l2_error: f64,
    /// `max_t |E_a - E_b| / E_a(t)`.
    pub energy_rel_error: f64,
    /// Error at the coarser resolution over error at the finer one, when known.
    pub convergence_ratio: Option<f64>,
}

impl ComparisonReport {
    /// Fills in `convergence_ratio` from the report of the refined comparison.
    pub fn refined_by(self, fine: &ComparisonReport) -> Self {
        Self {
            convergence_ratio: Some(self.max_abs_error / fine.max_abs_error),
            ..self
        }
    }
}

fn l2(diff: &[f64]) -> f64 {
    let n = diff.len() - 1;
    let dx = 1.0 / n as f64;
    let sq: Vec<f64> = diff.iter().map(|d| d * d).collect();
    crate::model::trapezoid(&sq, dx).sqrt()
}

/// Differences of `(u_t, u_x)` and of the energy series of two runs on the same grid and record times.
pub fn cross_validate(a: &FieldSeries, b: &FieldSeries) -> Result<ComparisonReport, OracleError> {
    if a.times.len() != b.times.len() {
        return Err(OracleError::GridMismatch(format!(
            "{} vs {} records",
            a.times.len(),
            b.times.len()
        )));
    }
    let mut report = ComparisonReport {
        max_abs_error: 0.0,
        l2_error: 0.0,
        energy_rel_error: 0.0,
        convergence_ratio: None,
    };
    for k in 0..a.times.len() {
        if (a.times[k] - b.times[k]).abs() > 1e-9 * (1.0 + a.times[k].abs()) {
            return Err(OracleError::GridMismatch(format!(
                "record {k} at t = {} vs {}",
                a.times[k], b.times[k]
            )));
        }
        for (fa, fb) in [(&a.ut[k], &b.ut[k]), (&a.ux[k], &b.ux[k])] {
            if fa.len() != fb.len() || fa.len() < 2 {
                return Err(OracleError::GridMismatch(format!("{} vs {} nodes", fa.len(), fb.len())));
            }
            let diff: Vec<f64> = fa.iter().zip(fb).map(|(x, y)| x - y).collect();
            report.max_abs_error = report.max_abs_error.max(diff.iter().fold(0.0, |m, d| m.max(d.abs())));
            report.l2_error = report.l2_error.max(l2(&diff));
        }
        let scale = a.energy[k].abs();
        let gap = (a.energy[k] - b.energy[k]).abs();
        if scale > 0.0 {
            report.energy_rel_error = report.energy_rel_error.max(gap / scale);
        } else if gap > 0.0 {
            report.energy_rel_error = f64::INFINITY;
        }
    }
    Ok(report)
}

/// Displacement error of a finite-difference run against an exact solution `u(t, x)`.
pub fn compare_to_reference(traj: &Trajectory, exact: impl Fn(f64, f64) -> f64) -> Result<ComparisonReport, OracleError> {
    if traj.fields.is_empty() {
        return Err(OracleError::MissingFields);
    }
    let mut report = ComparisonReport {
        max_abs_error: 0.0,
        l2_error: 0.0,
        energy_rel_error: 0.0,
        convergence_ratio: None,
    };
    for rec in &traj.fields {
        let u = rec.u.as_ref().ok_or(OracleError::MissingFields)?;
        let n = u.len() - 1;
        let diff: Vec<f64> = u
            .iter()
            .enumerate()
            .map(|(i, v)| v - exact(rec.t, i as f64 / n as f64))
            .collect();
        report.max_abs_error = report.max_abs_error.max(diff.iter().fold(0.0, |m, d| m.max(d.abs())));
        report.l2_error = report.l2_error.max(l2(&diff));
    }
    Ok(report)
}

/// `max_t |E(t) - E(0)| / E(0)`.
pub fn conservation_check(traj: &Trajectory) -> Result<f64, OracleError> {
    let e = traj.total_energy();
    let e0 = *e.first().ok_or(OracleError::ZeroInitialEnergy)?;
    if !(e0 > 0.0) {
        return Err(OracleError::ZeroInitialEnergy);
    }
    Ok(e.iter().map(|x| (x - e0).abs() / e0).fold(0.0, f64::max))
}
