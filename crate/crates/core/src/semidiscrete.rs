//! Method-of-lines operator shared by the time stepper and the generator.
//!
//! Unknowns are cell slopes `g_i = (u_{i+1} - u_i)/dx`, interior nodal
//! velocities `v_i`, and the boundary states. Boundary velocities double as
//! the nodal velocities at the walls (`v_0 = zeta1`, `v_N = eta1`), and the
//! boundary rows carry the lumped half-cell mass `dx/2` of the wall node.
//! With the weights returned by [`SemiDiscrete::weights`] the operator
//! satisfies `W A + A^T W = -2 Q` exactly, where `Q` is the damping form.
//!
//! A fourth-order hyperviscosity `-eps dx^4 v_xxxx` acts on interior
//! velocities only. It is invisible to resolved modes (relative size
//! `O((k dx)^4)`) but damps the zero-group-velocity modes at the grid cutoff,
//! which otherwise get trapped outside the damping region and leave the
//! discrete spectrum with eigenvalues arbitrarily close to the imaginary axis.
//! Its quadratic form is part of `Q`.
//!
//! Internally the unknowns are interleaved so that the operator is banded
//! (tridiagonal without hyperviscosity, bandwidth 4 with it):
//!
//! ```text
//! wentzell: [zeta1, g0, v1, g1, ..., v_{N-1}, g_{N-1}, eta1, eta2]
//! related:  [zeta,  g0, v1, g1, ..., v_{N-1}, g_{N-1}, eta]
//! pinned:   [g0, v1, g1, ..., v_{N-1}, g_{N-1}]
//! ```

use serde::{Deserialize, Serialize};

use crate::banded::BandMatrix;
use crate::model::CoefficientSet;

/// Which boundary dynamics close the wave equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryModel {
    /// `u_t = eta1` at x = 1 with the integrator state `eta2`, `u_t = zeta1` at x = 0.
    Wentzell,
    /// Second-order dynamics at both ends without integrator: `u_t = eta` at 1, `u_t = zeta` at 0.
    Related,
    /// Homogeneous velocity data at both walls.
    Pinned,
}

impl BoundaryModel {
    pub fn boundary_slots(&self) -> usize {
        match self {
            Self::Wentzell => 3,
            Self::Related => 2,
            Self::Pinned => 0,
        }
    }
}

/// Positions of each unknown in the interleaved (banded) ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub model: BoundaryModel,
    pub n_cells: usize,
}

impl Layout {
    fn offset(&self) -> usize {
        usize::from(self.model == BoundaryModel::Pinned)
    }

    pub fn dim(&self) -> usize {
        2 * self.n_cells - 1 + self.model.boundary_slots()
    }

    pub fn slope(&self, cell: usize) -> usize {
        2 * cell + 1 - self.offset()
    }

    /// Slot of the nodal velocity; wall nodes map to the boundary velocity slots.
    pub fn velocity(&self, node: usize) -> Option<usize> {
        let pinned_wall = self.model == BoundaryModel::Pinned && (node == 0 || node == self.n_cells);
        (!pinned_wall).then(|| 2 * node - self.offset())
    }

    /// Integrator state `eta2` (main system only).
    pub fn eta2(&self) -> Option<usize> {
        (self.model == BoundaryModel::Wentzell).then_some(2 * self.n_cells + 1)
    }

    /// Map to the documented dense layout
    /// `(g_0..g_{N-1}, v_1..v_{N-1}, boundary slots)` where the boundary slots are
    /// `(eta1, eta2, zeta1)` or `(eta, zeta)`.
    pub fn dense_index(&self, pos: usize) -> usize {
        let n = self.n_cells;
        let off = self.offset();
        if self.model != BoundaryModel::Pinned {
            if pos == 0 {
                return if self.model == BoundaryModel::Wentzell { 2 * n + 1 } else { 2 * n };
            }
            if pos == 2 * n {
                return 2 * n - 1;
            }
            if pos == 2 * n + 1 {
                return 2 * n;
            }
        }
        let p = pos + off;
        if p % 2 == 1 {
            (p - 1) / 2
        } else {
            n + p / 2 - 1
        }
    }
}

/// Default `eps` of the cutoff-mode hyperviscosity `-eps dx^4 v_xxxx`.
pub const HYPERVISCOSITY: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct SemiDiscrete {
    layout: Layout,
    dx: f64,
    op: BandMatrix<f64>,
    weights: Vec<f64>,
    damping: Vec<f64>,
    /// `kappa` in `Q_h(U) = kappa sum_j (v_{j+1} - 2 v_j + v_{j-1})^2` over interior stencils.
    kappa: f64,
}

impl SemiDiscrete {
    pub fn assemble(coeffs: &CoefficientSet, model: BoundaryModel) -> Self {
        Self::assemble_with(coeffs, model, HYPERVISCOSITY)
    }

    pub fn assemble_with(coeffs: &CoefficientSet, model: BoundaryModel, hyperviscosity: f64) -> Self {
        let n = coeffs.n_cells();
        let layout = Layout { model, n_cells: n };
        let dx = 1.0 / n as f64;
        let dim = layout.dim();
        let q = coeffs.q_samples();
        let viscous = hyperviscosity > 0.0 && n >= 4;
        let band = if viscous { 4 } else { 1 };
        let mut op = BandMatrix::zeros(dim, band, band);
        let mut weights = vec![0.0; dim];
        let mut damping = vec![0.0; dim];

        for cell in 0..n {
            let row = layout.slope(cell);
            weights[row] = coeffs.a_face(cell) * dx;
            if let Some(c) = layout.velocity(cell + 1) {
                op.add(row, c, 1.0 / dx);
            }
            if let Some(c) = layout.velocity(cell) {
                op.add(row, c, -1.0 / dx);
            }
        }
        for node in 1..n {
            let row = layout.velocity(node).expect("interior velocity");
            weights[row] = dx;
            damping[row] = q[node] * dx;
            op.add(row, layout.slope(node), coeffs.a_face(node) / dx);
            op.add(row, layout.slope(node - 1), -coeffs.a_face(node - 1) / dx);
            op.add(row, row, -q[node]);
        }

        // eps dx^4 * int (v_xx)^2 with second differences over dx^2 gives kappa = eps dx
        let kappa = if viscous { hyperviscosity * dx } else { 0.0 };
        if viscous {
            for j in 2..n - 1 {
                let stencil = [(j - 1, 1.0), (j, -2.0), (j + 1, 1.0)];
                for &(a, ca) in &stencil {
                    let row = layout.velocity(a).expect("interior velocity");
                    for &(b, cb) in &stencil {
                        let col = layout.velocity(b).expect("interior velocity");
                        op.add(row, col, -kappa * ca * cb / weights[row]);
                    }
                }
            }
        }

        // Wall rows: weight * d/dt v_wall = -(boundary damping + half-cell damping) v_wall -/+ flux.
        let mut wall = |row: usize, weight: f64, gain: f64, q_wall: f64, flux_col: usize, flux: f64| {
            weights[row] = weight;
            damping[row] = gain + 0.5 * dx * q_wall;
            op.add(row, row, -damping[row] / weight);
            op.add(row, flux_col, flux / weight);
        };
        match model {
            BoundaryModel::Wentzell => {
                let g = coeffs.gains();
                let [c1, c2, c3] = coeffs.boundary_weights();
                let right = layout.velocity(n).unwrap();
                let left = layout.velocity(0).unwrap();
                let eta2 = layout.eta2().unwrap();
                wall(right, c1 + 0.5 * dx, c1 * g.alpha1, q[n], layout.slope(n - 1), -coeffs.a_face(n - 1));
                wall(left, c3 + 0.5 * dx, c3 * g.gamma1, q[0], layout.slope(0), coeffs.a_face(0));
                op.add(right, eta2, -c2 / weights[right]);
                weights[eta2] = c2;
                op.add(eta2, right, 1.0);
            }
            BoundaryModel::Related => {
                let r = *coeffs.related().expect("related-system gains validated by caller");
                let (a0, a1) = (coeffs.a_left(), coeffs.a_right());
                let right = layout.velocity(n).unwrap();
                let left = layout.velocity(0).unwrap();
                wall(right, a1 + 0.5 * dx, a1 * r.q1, q[n], layout.slope(n - 1), -coeffs.a_face(n - 1));
                wall(left, a0 + 0.5 * dx, a0 * r.q0, q[0], layout.slope(0), coeffs.a_face(0));
            }
            BoundaryModel::Pinned => {}
        }

        Self {
            layout,
            dx,
            op,
            weights,
            damping,
            kappa,
        }
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn matrix(&self) -> &BandMatrix<f64> {
        &self.op
    }

    /// Gram weights of the discrete energy inner product (interleaved order).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Diagonal part `D` of the dissipation form (physical damping).
    pub fn damping(&self) -> &[f64] {
        &self.damping
    }

    pub fn hyperviscosity_weight(&self) -> f64 {
        self.kappa
    }

    fn viscous_stencils(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let n = self.layout.n_cells;
        let active = self.kappa > 0.0;
        (2..n.saturating_sub(1)).filter(move |_| active).map(move |j| {
            [j - 1, j, j + 1].map(|node| self.layout.velocity(node).expect("interior velocity"))
        })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.op.mul_vec(x)
    }

    /// `1/2 <U, U>_W`, the discrete quadratic energy.
    pub fn quadratic_energy(&self, x: &[f64]) -> f64 {
        0.5 * x.iter().zip(&self.weights).map(|(u, w)| w * u * u).sum::<f64>()
    }

    /// `Q(U) = sum_k D_k U_k^2 + Q_h(U)`, so that `<A U, U>_W = -Q(U)`.
    pub fn dissipation_form(&self, x: &[f64]) -> f64 {
        let physical: f64 = x.iter().zip(&self.damping).map(|(u, d)| d * u * u).sum();
        let viscous: f64 = self
            .viscous_stencils()
            .map(|[a, b, c]| (x[a] - 2.0 * x[b] + x[c]).powi(2))
            .sum();
        physical + self.kappa * viscous
    }

    /// Symmetric matrix of `Q` in the documented layout.
    pub fn dense_dissipation(&self) -> nalgebra::DMatrix<f64> {
        let dim = self.dim();
        let mut m = nalgebra::DMatrix::zeros(dim, dim);
        for (pos, &d) in self.damping.iter().enumerate() {
            let k = self.layout.dense_index(pos);
            m[(k, k)] += d;
        }
        let coeff = [1.0, -2.0, 1.0];
        for stencil in self.viscous_stencils() {
            for (a, ca) in stencil.iter().zip(coeff) {
                for (b, cb) in stencil.iter().zip(coeff) {
                    m[(self.layout.dense_index(*a), self.layout.dense_index(*b))] += self.kappa * ca * cb;
                }
            }
        }
        m
    }

    /// Dense copy in the documented layout.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let dim = self.dim();
        let mut m = nalgebra::DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for (j, v) in self.op.row(i) {
                if v != 0.0 {
                    m[(self.layout.dense_index(i), self.layout.dense_index(j))] = v;
                }
            }
        }
        m
    }

    /// Weights permuted to the documented layout.
    pub fn dense_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.dim()];
        for (pos, &v) in self.weights.iter().enumerate() {
            w[self.layout.dense_index(pos)] = v;
        }
        w
    }

}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_coefficients, CoefficientDescription, FunctionSpec, RelatedGains};

    fn coeffs(n: usize) -> CoefficientSet {
        let mut d = CoefficientDescription::new(
            FunctionSpec::Linear { at0: 1.0, at1: 1.5 },
            FunctionSpec::indicator(0.3, 0.5, 5.0),
        );
        d.gains.alpha2 = 2.0;
        d.gains.mu1 = 0.7;
        d.related = Some(RelatedGains { q0: 1.3, q1: 0.4 });
        validate_coefficients(&d, n).unwrap()
    }

    #[test]
    fn dense_index_is_a_permutation() {
        for model in [BoundaryModel::Wentzell, BoundaryModel::Related, BoundaryModel::Pinned] {
            let layout = Layout { model, n_cells: 9 };
            let mut seen: Vec<usize> = (0..layout.dim()).map(|p| layout.dense_index(p)).collect();
            seen.sort_unstable();
            assert_eq!(seen, (0..layout.dim()).collect::<Vec<_>>(), "{model:?}");
        }
        let w = Layout {
            model: BoundaryModel::Wentzell,
            n_cells: 8,
        };
        assert_eq!(w.dim(), 18);
        assert_eq!(w.dense_index(w.slope(0)), 0);
        assert_eq!(w.dense_index(w.velocity(1).unwrap()), 8);
        assert_eq!(w.dense_index(w.velocity(8).unwrap()), 15);
        assert_eq!(w.dense_index(w.eta2().unwrap()), 16);
        assert_eq!(w.dense_index(w.velocity(0).unwrap()), 17);
    }

    #[test]
    fn weighted_symmetric_part_is_damping() {
        for model in [BoundaryModel::Wentzell, BoundaryModel::Related, BoundaryModel::Pinned] {
            let sd = SemiDiscrete::assemble(&coeffs(12), model);
            let a = sd.to_dense();
            let w = sd.dense_weights();
            let q = sd.dense_dissipation();
            for i in 0..sd.dim() {
                for j in 0..sd.dim() {
                    let s = w[i] * a[(i, j)] + a[(j, i)] * w[j];
                    assert!((s + 2.0 * q[(i, j)]).abs() < 1e-10, "{model:?} ({i},{j}): {s}");
                }
            }
        }
    }

    #[test]
    fn dissipation_form_matches_matrix() {
        let sd = SemiDiscrete::assemble(&coeffs(15), BoundaryModel::Wentzell);
        let q = sd.dense_dissipation();
        let x: Vec<f64> = (0..sd.dim()).map(|k| (k as f64 * 1.3).sin()).collect();
        let mut dense = vec![0.0; sd.dim()];
        for (pos, &v) in x.iter().enumerate() {
            dense[sd.layout().dense_index(pos)] = v;
        }
        let d = nalgebra::DVector::from_vec(dense);
        assert!((sd.dissipation_form(&x) - d.dot(&(&q * &d))).abs() < 1e-12);
    }

    #[test]
    fn hyperviscosity_leaves_walls_and_smooth_data_alone() {
        let c = coeffs(40);
        let sd = SemiDiscrete::assemble(&c, BoundaryModel::Wentzell);
        let plain = SemiDiscrete::assemble_with(&c, BoundaryModel::Wentzell, 0.0);
        let l = sd.layout();
        for wall in [l.velocity(0).unwrap(), l.velocity(40).unwrap(), l.eta2().unwrap()] {
            for col in 0..sd.dim() {
                assert_eq!(sd.matrix().get(wall, col), plain.matrix().get(wall, col));
            }
        }
        // quadratic velocity profile: the fourth difference vanishes in the interior
        let mut x = vec![0.0; sd.dim()];
        for node in 0..=40 {
            x[l.velocity(node).unwrap()] = (node as f64 / 40.0).powi(2);
        }
        let (a, b) = (sd.apply(&x), plain.apply(&x));
        for node in 3..38 {
            let p = l.velocity(node).unwrap();
            assert!((a[p] - b[p]).abs() < 1e-9);
        }
    }

    #[test]
    fn constants_are_steady() {
        // zero slopes and velocities with eta2 = 0 is an equilibrium
        let sd = SemiDiscrete::assemble(&coeffs(10), BoundaryModel::Wentzell);
        let x = vec![0.0; sd.dim()];
        assert!(sd.apply(&x).iter().all(|&v| v == 0.0));
    }
}
