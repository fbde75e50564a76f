//! Coefficients, grids, initial data and the steady states they select.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("wave speed a(x) = {value} at node {index} must be positive and finite (assumption A1)")]
    NonPositiveWaveSpeed { index: usize, value: f64 },
    #[error("damping q(x) = {value} at node {index} must be nonnegative and finite (assumption A2)")]
    NegativeDamping { index: usize, value: f64 },
    #[error("damping support is empty or q is not bounded below on it (assumption A2): {0}")]
    EmptySupport(String),
    #[error("boundary gain {name} = {value} must be positive (assumption A3)")]
    NonPositiveGain { name: &'static str, value: f64 },
    #[error("unknown function preset `{0}`")]
    UnknownPreset(String),
    #[error("table abscissae must increase strictly from 0 to 1: {0}")]
    TableNotOnUnitInterval(String),
    #[error("array length {got} does not match grid ({expected} nodes)")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("related-system gains q0, q1 are required")]
    MissingRelatedGains,
    #[error("attractor denominator vanishes")]
    ZeroDenominator,
}

/// Closed subinterval of [0, 1]; serialized as `[left, right]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub left: f64,
    pub right: f64,
}

impl Interval {
    pub fn new(left: f64, right: f64) -> Self {
        Self { left, right }
    }

    pub fn length(&self) -> f64 {
        self.right - self.left
    }

    /// Node index range covering the interval, snapped outward.
    pub fn node_range(&self, n_cells: usize) -> std::ops::RangeInclusive<usize> {
        let n = n_cells as f64;
        let lo = (self.left * n + 1e-9).floor().max(0.0) as usize;
        let hi = ((self.right * n - 1e-9).ceil() as usize).min(n_cells);
        lo..=hi
    }
}

impl From<[f64; 2]> for Interval {
    fn from(v: [f64; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.left, i.right]
    }
}

fn default_center() -> f64 {
    0.5
}
fn default_width() -> f64 {
    0.1
}
fn default_amplitude() -> f64 {
    1.0
}

/// A scalar profile on [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FunctionSpec {
    Constant {
        value: f64,
    },
    Linear {
        at0: f64,
        at1: f64,
    },
    GaussianBump {
        #[serde(default = "default_center")]
        center: f64,
        #[serde(default = "default_width")]
        width: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    SineMode {
        k: u32,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    /// Piecewise-linear interpolation of `(x, y)` pairs.
    Table { x: Vec<f64>, y: Vec<f64> },
    /// `level` on `[left, right]`, zero elsewhere; snapped outward to nodes.
    Indicator { left: f64, right: f64, level: f64 },
}

impl FunctionSpec {
    pub fn constant(value: f64) -> Self {
        Self::Constant { value }
    }

    pub fn gaussian_bump() -> Self {
        Self::GaussianBump {
            center: default_center(),
            width: default_width(),
            amplitude: default_amplitude(),
        }
    }

    pub fn indicator(left: f64, right: f64, level: f64) -> Self {
        Self::Indicator { left, right, level }
    }

    fn check(&self) -> Result<(), ModelError> {
        if let Self::Table { x, y } = self {
            if x.len() != y.len() || x.len() < 2 {
                return Err(ModelError::TableNotOnUnitInterval(format!(
                    "{} abscissae for {} values",
                    x.len(),
                    y.len()
                )));
            }
            let ends_ok = x[0] == 0.0 && x[x.len() - 1] == 1.0;
            let increasing = x.windows(2).all(|w| w[1] > w[0]);
            if !ends_ok || !increasing {
                return Err(ModelError::TableNotOnUnitInterval(format!("{x:?}")));
            }
        }
        Ok(())
    }

    /// Pointwise value; indicator snapping only applies in [`sample_function`].
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Linear { at0, at1 } => at0 + (at1 - at0) * x,
            Self::GaussianBump {
                center,
                width,
                amplitude,
            } => amplitude * (-((x - center) / width).powi(2)).exp(),
            Self::SineMode { k, amplitude } => amplitude * (*k as f64 * std::f64::consts::PI * x).sin(),
            Self::Table { x: xs, y: ys } => {
                let j = match xs.partition_point(|&xi| xi <= x) {
                    0 => 0,
                    p if p >= xs.len() => xs.len() - 2,
                    p => p - 1,
                };
                let s = (x - xs[j]) / (xs[j + 1] - xs[j]);
                ys[j] + s * (ys[j + 1] - ys[j])
            }
            Self::Indicator { left, right, level } => {
                if (*left..=*right).contains(&x) {
                    *level
                } else {
                    0.0
                }
            }
        }
    }

    /// Support interval of indicator profiles.
    pub fn indicator_support(&self) -> Option<Interval> {
        match self {
            Self::Indicator { left, right, .. } => Some(Interval::new(*left, *right)),
            _ => None,
        }
    }
}

impl FromStr for FunctionSpec {
    type Err = ModelError;

    /// Parses `"constant c"`, `"linear a0 a1"`, `"gaussian-bump [center width amplitude]"`,
    /// `"sine-mode k [amplitude]"` and `"indicator left right level"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split_whitespace();
        let name = parts.next().unwrap_or_default();
        let args: Vec<f64> = parts
            .map(|p| p.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| ModelError::UnknownPreset(s.to_string()))?;
        let bad = || ModelError::UnknownPreset(s.to_string());
        let spec = match (name, args.as_slice()) {
            ("constant", [c]) => Self::Constant { value: *c },
            ("linear", [a0, a1]) => Self::Linear { at0: *a0, at1: *a1 },
            ("gaussian-bump", []) => Self::gaussian_bump(),
            ("gaussian-bump", [c, w]) => Self::GaussianBump {
                center: *c,
                width: *w,
                amplitude: 1.0,
            },
            ("gaussian-bump", [c, w, amp]) => Self::GaussianBump {
                center: *c,
                width: *w,
                amplitude: *amp,
            },
            ("sine-mode", [k]) if *k >= 1.0 && k.fract() == 0.0 => Self::SineMode {
                k: *k as u32,
                amplitude: 1.0,
            },
            ("sine-mode", [k, amp]) if *k >= 1.0 && k.fract() == 0.0 => Self::SineMode {
                k: *k as u32,
                amplitude: *amp,
            },
            ("indicator", [l, r, level]) => Self::Indicator {
                left: *l,
                right: *r,
                level: *level,
            },
            _ => return Err(bad()),
        };
        Ok(spec)
    }
}

/// Nodal samples of `spec` on the uniform grid with `n_cells` cells.
pub fn sample_function(spec: &FunctionSpec, n_cells: usize) -> Result<Vec<f64>, ModelError> {
    spec.check()?;
    if n_cells == 0 {
        return Err(ModelError::InvalidGrid("zero cells".into()));
    }
    if let FunctionSpec::Indicator { left, right, level } = spec {
        let mut out = vec![0.0; n_cells + 1];
        if right > left {
            for i in Interval::new(*left, *right).node_range(n_cells) {
                out[i] = *level;
            }
        }
        return Ok(out);
    }
    Ok((0..=n_cells)
        .map(|i| spec.eval(i as f64 / n_cells as f64))
        .collect())
}

/// Composite trapezoid rule for nodal samples with spacing `dx`.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    match values {
        [] | [_] => 0.0,
        [first, inner @ .., last] => dx * (0.5 * (first + last) + inner.iter().sum::<f64>()),
    }
}

/// Uniform space-time grid on [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n_cells: usize,
    dx: f64,
    dt: f64,
    cfl: f64,
}

impl Grid {
    /// `dt = cfl * dx / sqrt(a_hi)`.
    pub fn new(n_cells: usize, cfl: f64, a_hi: f64) -> Result<Self, ModelError> {
        if n_cells == 0 {
            return Err(ModelError::InvalidGrid("n_cells must be positive".into()));
        }
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(ModelError::InvalidGrid(format!("cfl = {cfl} not in (0, 1]")));
        }
        if !(a_hi > 0.0 && a_hi.is_finite()) {
            return Err(ModelError::InvalidGrid(format!("a_hi = {a_hi}")));
        }
        let dx = 1.0 / n_cells as f64;
        Ok(Self {
            n_cells,
            dx,
            dt: cfl * dx / a_hi.sqrt(),
            cfl,
        })
    }

    /// Grid with `dt = dx`, as required by exact characteristic transport.
    pub fn unit_cfl(n_cells: usize) -> Result<Self, ModelError> {
        Self::new(n_cells, 1.0, 1.0)
    }

    /// Grid with an explicit time step; the Courant number is recorded relative to `a_hi`.
    pub fn with_dt(n_cells: usize, dt: f64, a_hi: f64) -> Result<Self, ModelError> {
        if n_cells == 0 || !(dt > 0.0) {
            return Err(ModelError::InvalidGrid(format!("n_cells = {n_cells}, dt = {dt}")));
        }
        let dx = 1.0 / n_cells as f64;
        Ok(Self {
            n_cells,
            dx,
            dt,
            cfl: dt * a_hi.sqrt() / dx,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }
    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn cfl(&self) -> f64 {
        self.cfl
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.n_cells as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_cells).map(|i| self.node(i))
    }
}

/// Gains of the main system's boundary dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGains {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub gamma1: f64,
    pub mu1: f64,
}

impl BoundaryGains {
    pub fn unit() -> Self {
        Self {
            alpha1: 1.0,
            alpha2: 1.0,
            beta1: 1.0,
            gamma1: 1.0,
            mu1: 1.0,
        }
    }

    fn named(&self) -> [(&'static str, f64); 5] {
        [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("beta1", self.beta1),
            ("gamma1", self.gamma1),
            ("mu1", self.mu1),
        ]
    }
}

impl Default for BoundaryGains {
    fn default() -> Self {
        Self::unit()
    }
}

/// Gains of the related system without the integrator state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelatedGains {
    pub q0: f64,
    pub q1: f64,
}

fn default_true() -> bool {
    true
}

/// User-facing coefficient description, validated into a [`CoefficientSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientDescription {
    pub a: FunctionSpec,
    pub q: FunctionSpec,
    /// Damping support; inferred from an indicator `q` or from the nodes where `q > 0`.
    #[serde(default)]
    pub omega: Option<Interval>,
    #[serde(default)]
    pub gains: BoundaryGains,
    #[serde(default)]
    pub related: Option<RelatedGains>,
    /// When false, `q` may vanish identically (boundary damping only).
    #[serde(default = "default_true")]
    pub require_interior_damping: bool,
}

impl CoefficientDescription {
    pub fn new(a: FunctionSpec, q: FunctionSpec) -> Self {
        Self {
            a,
            q,
            omega: None,
            gains: BoundaryGains::unit(),
            related: None,
            require_interior_damping: true,
        }
    }
}

/// Validated nodal coefficients on a fixed grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientSet {
    a_samples: Vec<f64>,
    a_lo: f64,
    a_hi: f64,
    a_slope_bound: f64,
    q_samples: Vec<f64>,
    omega: Option<Interval>,
    q_lo: f64,
    q_hi: f64,
    gains: BoundaryGains,
    related: Option<RelatedGains>,
}

pub fn validate_coefficients(
    desc: &CoefficientDescription,
    n_cells: usize,
) -> Result<CoefficientSet, ModelError> {
    let a = sample_function(&desc.a, n_cells)?;
    let q = sample_function(&desc.q, n_cells)?;
    CoefficientSet::from_samples(
        a,
        q,
        desc.omega.or_else(|| desc.q.indicator_support()),
        desc.gains,
        desc.related,
        desc.require_interior_damping,
    )
}

impl CoefficientSet {
    pub fn from_samples(
        a: Vec<f64>,
        q: Vec<f64>,
        omega: Option<Interval>,
        gains: BoundaryGains,
        related: Option<RelatedGains>,
        require_interior_damping: bool,
    ) -> Result<Self, ModelError> {
        if a.len() < 2 {
            return Err(ModelError::InvalidGrid("need at least one cell".into()));
        }
        if q.len() != a.len() {
            return Err(ModelError::LengthMismatch {
                expected: a.len(),
                got: q.len(),
            });
        }
        let n_cells = a.len() - 1;
        for (index, &value) in a.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ModelError::NonPositiveWaveSpeed { index, value });
            }
        }
        for (index, &value) in q.iter().enumerate() {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(ModelError::NegativeDamping { index, value });
            }
        }
        for (name, value) in gains.named() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ModelError::NonPositiveGain { name, value });
            }
        }
        if let Some(r) = related {
            for (name, value) in [("q0", r.q0), ("q1", r.q1)] {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(ModelError::NonPositiveGain { name, value });
                }
            }
        }

        let omega = omega.or_else(|| {
            let first = q.iter().position(|&v| v > 0.0)?;
            let last = q.iter().rposition(|&v| v > 0.0)?;
            Some(Interval::new(
                first as f64 / n_cells as f64,
                last as f64 / n_cells as f64,
            ))
        });
        let (q_lo, q_hi) = match omega {
            Some(w) => {
                if !(0.0 <= w.left && w.left < w.right && w.right <= 1.0) {
                    return Err(ModelError::EmptySupport(format!(
                        "omega = [{}, {}] is not a nondegenerate subinterval of [0, 1]",
                        w.left, w.right
                    )));
                }
                let on_support = &q[w.node_range(n_cells)];
                let lo = on_support.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = on_support.iter().copied().fold(0.0, f64::max);
                if require_interior_damping && !(lo > 0.0) {
                    return Err(ModelError::EmptySupport(format!(
                        "q vanishes somewhere on omega = [{}, {}]",
                        w.left, w.right
                    )));
                }
                (lo, hi)
            }
            None if require_interior_damping => {
                return Err(ModelError::EmptySupport("q vanishes identically".into()))
            }
            None => (0.0, 0.0),
        };

        let a_lo = a.iter().copied().fold(f64::INFINITY, f64::min);
        let a_hi = a.iter().copied().fold(0.0, f64::max);
        let dx = 1.0 / n_cells as f64;
        let a_slope_bound = a
            .windows(2)
            .map(|w| (w[1] - w[0]).abs() / dx)
            .fold(0.0, f64::max);

        Ok(Self {
            a_samples: a,
            a_lo,
            a_hi,
            a_slope_bound,
            q_samples: q,
            omega,
            q_lo,
            q_hi,
            gains,
            related,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.a_samples.len() - 1
    }
    pub fn a_samples(&self) -> &[f64] {
        &self.a_samples
    }
    pub fn q_samples(&self) -> &[f64] {
        &self.q_samples
    }
    pub fn a_lo(&self) -> f64 {
        self.a_lo
    }
    pub fn a_hi(&self) -> f64 {
        self.a_hi
    }
    /// Largest finite-difference slope of `a`, the discrete Lipschitz constant.
    pub fn a_slope_bound(&self) -> f64 {
        self.a_slope_bound
    }
    pub fn q_lo(&self) -> f64 {
        self.q_lo
    }
    pub fn q_hi(&self) -> f64 {
        self.q_hi
    }
    pub fn omega(&self) -> Option<Interval> {
        self.omega
    }
    pub fn gains(&self) -> &BoundaryGains {
        &self.gains
    }
    pub fn related(&self) -> Option<&RelatedGains> {
        self.related.as_ref()
    }

    pub fn a_left(&self) -> f64 {
        self.a_samples[0]
    }
    pub fn a_right(&self) -> f64 {
        self.a_samples[self.n_cells()]
    }

    /// Cell-face value `a_{i+1/2}`.
    pub fn a_face(&self, cell: usize) -> f64 {
        0.5 * (self.a_samples[cell] + self.a_samples[cell + 1])
    }

    pub fn is_constant_speed(&self, value: f64) -> bool {
        self.a_samples.iter().all(|&a| (a - value).abs() <= 1e-12)
    }

    /// Boundary energy weights `(a(1)/beta1, a(1) alpha2/beta1, a(0)/mu1)`.
    pub fn boundary_weights(&self) -> [f64; 3] {
        let g = &self.gains;
        [
            self.a_right() / g.beta1,
            self.a_right() * g.alpha2 / g.beta1,
            self.a_left() / g.mu1,
        ]
    }

    /// Same coefficients with the interior damping removed.
    pub fn without_interior_damping(&self) -> Self {
        Self {
            q_samples: vec![0.0; self.q_samples.len()],
            omega: None,
            q_lo: 0.0,
            q_hi: 0.0,
            ..self.clone()
        }
    }
}

/// Nodal initial data for both boundary models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
    pub eta1_0: f64,
    pub eta2_0: f64,
    pub zeta1_0: f64,
    pub eta_0: f64,
    pub zeta_0: f64,
}

/// Initial data as profiles plus boundary scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDescription {
    pub u0: FunctionSpec,
    pub u1: FunctionSpec,
    #[serde(default)]
    pub eta1: f64,
    #[serde(default)]
    pub eta2: f64,
    #[serde(default)]
    pub zeta1: f64,
    #[serde(default)]
    pub eta: f64,
    #[serde(default)]
    pub zeta: f64,
}

impl InitialDescription {
    pub fn at_rest(u0: FunctionSpec) -> Self {
        Self {
            u0,
            u1: FunctionSpec::constant(0.0),
            eta1: 0.0,
            eta2: 0.0,
            zeta1: 0.0,
            eta: 0.0,
            zeta: 0.0,
        }
    }

    pub fn sample(&self, n_cells: usize) -> Result<InitialData, ModelError> {
        Ok(InitialData {
            u0: sample_function(&self.u0, n_cells)?,
            u1: sample_function(&self.u1, n_cells)?,
            eta1_0: self.eta1,
            eta2_0: self.eta2,
            zeta1_0: self.zeta1,
            eta_0: self.eta,
            zeta_0: self.zeta,
        })
    }
}

impl InitialData {
    pub fn new(u0: Vec<f64>, u1: Vec<f64>) -> Result<Self, ModelError> {
        if u0.len() != u1.len() {
            return Err(ModelError::LengthMismatch {
                expected: u0.len(),
                got: u1.len(),
            });
        }
        if u0.len() < 2 {
            return Err(ModelError::InvalidGrid("need at least one cell".into()));
        }
        Ok(Self {
            u0,
            u1,
            eta1_0: 0.0,
            eta2_0: 0.0,
            zeta1_0: 0.0,
            eta_0: 0.0,
            zeta_0: 0.0,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.u0.len() - 1
    }

    /// Velocity traces agree with the boundary velocities of the main system.
    pub fn is_compatible(&self, tol: f64) -> bool {
        let n = self.n_cells();
        (self.u1[n] - self.eta1_0).abs() <= tol && (self.u1[0] - self.zeta1_0).abs() <= tol
    }
}

/// Limit displacement of the main system, `u0(1) - eta2(0)`.
pub fn attractor_main(init: &InitialData) -> f64 {
    init.u0[init.n_cells()] - init.eta2_0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttractorVariant {
    /// Denominator `a(0) q0 + a(1) q1`.
    AsPrinted,
    /// Denominator `a(0) q0 + a(1) q1 + int q`, exact on constant steady states.
    Corrected,
}

impl fmt::Display for AttractorVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::AsPrinted => write!(f, "as-printed"),
            Self::Corrected => write!(f, "corrected"),
        }
    }
}

/// Limit displacement of the related system (second-order boundary dynamics at both ends).
pub fn attractor_related(
    init: &InitialData,
    coeffs: &CoefficientSet,
    variant: AttractorVariant,
) -> Result<f64, ModelError> {
    let gains = coeffs.related().ok_or(ModelError::MissingRelatedGains)?;
    let n = coeffs.n_cells();
    if init.n_cells() != n {
        return Err(ModelError::LengthMismatch {
            expected: n + 1,
            got: init.u0.len(),
        });
    }
    let dx = 1.0 / n as f64;
    let q = coeffs.q_samples();
    let integrand: Vec<f64> = (0..=n).map(|i| init.u1[i] + q[i] * init.u0[i]).collect();
    let (a0, a1) = (coeffs.a_left(), coeffs.a_right());
    let numerator = trapezoid(&integrand, dx)
        + a0 * (init.zeta_0 + gains.q0 * init.u0[0])
        + a1 * (init.eta_0 + gains.q1 * init.u0[n]);
    let mut denominator = a0 * gains.q0 + a1 * gains.q1;
    if variant == AttractorVariant::Corrected {
        denominator += trapezoid(q, dx);
    }
    if denominator == 0.0 {
        return Err(ModelError::ZeroDenominator);
    }
    Ok(numerator / denominator)
}
