//! Design-field pipeline: element volume fractions `z`, Helmholtz-filtered
//! bilinear field `ζ`, its values at cell quadrature points and the
//! thresholded density `ζ̄ = H_{β,η}(ζ)` that enters the material model.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::SparseColMatRef;
use faer::MatMut;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{quadrature, shape_eval, ElementBasis, FESpace, MeshGrid, QuadratureKind, SpaceKind};
use crate::nlsolve::sparse::{SparseMatrix, SparsePattern};

/// Per-element volume fractions with a mask of entries the optimizer may
/// not change.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignField {
    pub z: Vec<f64>,
    pub frozen: Vec<bool>,
}

impl DesignField {
    pub fn uniform(n: usize, value: f64) -> Self {
        Self {
            z: vec![value; n],
            frozen: vec![false; n],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.z.len() != self.frozen.len() {
            return Err(Error::invalid("design field and frozen mask differ in length"));
        }
        if let Some(e) = self.z.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid(format!("volume fraction {} at element {e} outside [0, 1]", self.z[e])));
        }
        Ok(())
    }

    /// Indices of the optimization variables.
    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.z.len()).filter(|&e| !self.frozen[e]).collect()
    }

    pub fn free_values(&self) -> Vec<f64> {
        self.free_indices().iter().map(|&e| self.z[e]).collect()
    }

    /// Writes optimizer variables back into the free entries.
    pub fn set_free_values(&mut self, x: &[f64]) -> Result<()> {
        let free = self.free_indices();
        if free.len() != x.len() {
            return Err(Error::invalid(format!("expected {} design variables, got {}", free.len(), x.len())));
        }
        for (&e, &v) in free.iter().zip(x) {
            self.z[e] = v;
        }
        Ok(())
    }
}

/// Screened-Poisson filter on the bilinear space with natural boundary
/// conditions: `(l² K + M) ζ = T z`.
pub struct HelmholtzFilter {
    radius: f64,
    num_nodes: usize,
    element_nodes: Vec<[usize; 4]>,
    element_area: f64,
    matrix: SparseMatrix,
    llt: Llt<usize, f64>,
}

impl std::fmt::Debug for HelmholtzFilter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HelmholtzFilter")
            .field("radius", &self.radius)
            .field("num_nodes", &self.num_nodes)
            .finish()
    }
}

impl HelmholtzFilter {
    /// Radius `2 l_e / (2√3)` with `l_e` the smaller element edge.
    pub fn default_radius(mesh: &MeshGrid) -> f64 {
        let (hx, hy) = mesh.element_size();
        hx.min(hy) / 3f64.sqrt()
    }

    pub fn new(mesh: &MeshGrid, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("filter radius must be positive, got {radius}")));
        }
        let space = FESpace::new(mesh, SpaceKind::ScalarBilinear);
        let rule = quadrature(QuadratureKind::Gauss3x3);
        let det = 0.25 * mesh.element_area();
        let mut local = [[0.0; 4]; 4];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let s = shape_eval(mesh, &space, 0, *p)?;
            for a in 0..4 {
                for b in 0..4 {
                    let grad = s.gradients[a][0] * s.gradients[b][0] + s.gradients[a][1] * s.gradients[b][1];
                    local[a][b] += w * det * (radius * radius * grad + s.values[a] * s.values[b]);
                }
            }
        }
        let element_nodes: Vec<[usize; 4]> = (0..mesh.num_elements()).map(|e| mesh.bilinear_nodes(e)).collect();
        let n = mesh.num_bilinear_nodes();
        let entries = element_nodes
            .iter()
            .flat_map(|nodes| nodes.iter().flat_map(move |&r| nodes.iter().map(move |&c| (r, c))));
        let pattern = Arc::new(SparsePattern::from_entries(n, entries)?);
        let mut matrix = SparseMatrix::zeros(pattern.clone());
        for nodes in &element_nodes {
            for a in 0..4 {
                for b in 0..4 {
                    matrix.add(nodes[a], nodes[b], local[a][b]);
                }
            }
        }
        let singular = |e: String| Error::Singular {
            reason: format!("filter factorization failed: {e}"),
        };
        let symbolic =
            SymbolicLlt::try_new(pattern.symbolic(), faer::Side::Lower).map_err(|e| singular(format!("{e:?}")))?;
        let mat = SparseColMatRef::new(pattern.symbolic(), &matrix.values);
        let llt = Llt::try_new_with_symbolic(symbolic, mat, faer::Side::Lower).map_err(|e| singular(format!("{e:?}")))?;
        Ok(Self {
            radius,
            num_nodes: n,
            element_nodes,
            element_area: mesh.element_area(),
            matrix,
            llt,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// The assembled filter matrix `l² K + M`.
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        let n = x.len();
        self.llt.solve_in_place(MatMut::from_column_major_slice_mut(&mut x, n, 1));
        x
    }

    /// Filtered nodal field `ζ` of element values `z`.
    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.element_nodes.len() {
            return Err(Error::invalid(format!(
                "filter input has {} entries, expected {}",
                z.len(),
                self.element_nodes.len()
            )));
        }
        let mut rhs = vec![0.0; self.num_nodes];
        let share = 0.25 * self.element_area;
        for (nodes, &ze) in self.element_nodes.iter().zip(z) {
            for &n in nodes {
                rhs[n] += share * ze;
            }
        }
        Ok(self.solve(&rhs))
    }

    /// Filter adjoint `μ_ζ` solving `(l² K + M) μ_ζ = −∂C/∂ζ`.
    pub fn adjoint(&self, dc_dzeta: &[f64]) -> Result<Vec<f64>> {
        if dc_dzeta.len() != self.num_nodes {
            return Err(Error::invalid("filter adjoint rhs has the wrong length"));
        }
        Ok(self.solve(dc_dzeta).into_iter().map(|v| -v).collect())
    }

    /// Element gradient `−∫_e μ_ζ dV` of the `−∫ z δζ` coupling.
    pub fn element_gradient(&self, mu: &[f64]) -> Vec<f64> {
        let share = 0.25 * self.element_area;
        self.element_nodes
            .iter()
            .map(|nodes| -share * nodes.iter().map(|&n| mu[n]).sum::<f64>())
            .collect()
    }

    /// Transpose of [`apply`](Self::apply): maps `∂C/∂ζ` to `∂C/∂z`.
    pub fn apply_transpose(&self, dc_dzeta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.element_gradient(&self.adjoint(dc_dzeta)?))
    }

    /// `∫ ζ dV` of a nodal bilinear field.
    pub fn integrate(&self, zeta: &[f64]) -> f64 {
        let share = 0.25 * self.element_area;
        self.element_nodes
            .iter()
            .map(|nodes| share * nodes.iter().map(|&n| zeta[n]).sum::<f64>())
            .sum()
    }
}

/// Smoothed Heaviside `H_{β,η}(ζ)` and its derivative.
pub fn heaviside(zeta: f64, beta: f64, eta: f64) -> (f64, f64) {
    let a = (beta * eta).tanh();
    let den = a + (beta * (1.0 - eta)).tanh();
    let t = (beta * (zeta - eta)).tanh();
    ((a + t) / den, beta * (1.0 - t * t) / den)
}

/// β continuation: constant up to `start`, then doubled at `start` and every
/// `period` iterations after it, capped at `beta_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BetaSchedule {
    pub beta_ini: f64,
    pub beta_max: f64,
    pub start: usize,
    pub period: usize,
}

impl Default for BetaSchedule {
    fn default() -> Self {
        Self {
            beta_ini: 2.0,
            beta_max: 16.0,
            start: 300,
            period: 50,
        }
    }
}

impl BetaSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_ini > 0.0 && self.beta_max >= self.beta_ini) || self.period == 0 {
            return Err(Error::invalid("beta schedule needs 0 < beta_ini <= beta_max and a positive period"));
        }
        Ok(())
    }

    pub fn beta(&self, iteration: usize) -> f64 {
        if iteration < self.start {
            return self.beta_ini;
        }
        let doublings = 1 + (iteration - self.start) / self.period;
        let mut beta = self.beta_ini;
        for _ in 0..doublings {
            beta *= 2.0;
            if beta >= self.beta_max {
                return self.beta_max;
            }
        }
        beta
    }

    /// First iteration at which `beta_max` is reached.
    pub fn saturation_iteration(&self) -> usize {
        let mut it = self.start;
        while self.beta(it) < self.beta_max {
            it += self.period;
        }
        it
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectionParams {
    pub eta: f64,
    /// Threshold of the dilated field used in the volume constraint.
    pub eta_dilated: f64,
    pub schedule: BetaSchedule,
}

impl Default for ProjectionParams {
    fn default() -> Self {
        Self {
            eta: 0.5,
            eta_dilated: 0.4,
            schedule: BetaSchedule::default(),
        }
    }
}

impl ProjectionParams {
    pub fn validate(&self) -> Result<()> {
        for eta in [self.eta, self.eta_dilated] {
            if !(eta > 0.0 && eta < 1.0) {
                return Err(Error::invalid(format!("projection threshold {eta} outside (0, 1)")));
            }
        }
        self.schedule.validate()
    }
}

/// Design fields evaluated for one `z`.
#[derive(Debug, Clone)]
pub struct DesignFields {
    /// Nodal filtered field; `None` for a sharp (unfiltered) pipeline.
    pub zeta_nodes: Option<Vec<f64>>,
    /// `ζ` at every cell quadrature point.
    pub zeta_points: Vec<f64>,
    /// Density entering the material model at every quadrature point.
    pub rho: Vec<f64>,
    /// `dρ/dζ` at every quadrature point.
    pub drho: Vec<f64>,
}

/// Maps `z` to quadrature-point densities and pulls point sensitivities
/// back to `z`.
pub struct DesignPipeline {
    pub basis: Arc<ElementBasis>,
    pub filter: Option<HelmholtzFilter>,
    bilinear_nodes: Vec<[usize; 4]>,
}

impl DesignPipeline {
    pub fn new(mesh: &MeshGrid, basis: Arc<ElementBasis>, filter: Option<HelmholtzFilter>) -> Self {
        Self {
            basis,
            filter,
            bilinear_nodes: (0..mesh.num_elements()).map(|e| mesh.bilinear_nodes(e)).collect(),
        }
    }

    /// Filtered pipeline with radius `l`.
    pub fn filtered(mesh: &MeshGrid, basis: Arc<ElementBasis>, radius: f64) -> Result<Self> {
        Ok(Self::new(mesh, basis, Some(HelmholtzFilter::new(mesh, radius)?)))
    }

    /// Unfiltered pipeline: `ζ` is the element value itself.
    pub fn sharp(mesh: &MeshGrid, basis: Arc<ElementBasis>) -> Self {
        Self::new(mesh, basis, None)
    }

    pub fn num_elements(&self) -> usize {
        self.bilinear_nodes.len()
    }

    pub fn num_points(&self) -> usize {
        self.num_elements() * self.basis.num_points
    }

    /// `ζ` at the quadrature points, plus the nodal field when filtered.
    pub fn zeta_points(&self, z: &[f64]) -> Result<(Option<Vec<f64>>, Vec<f64>)> {
        if z.len() != self.num_elements() {
            return Err(Error::invalid(format!(
                "design has {} entries, expected {}",
                z.len(),
                self.num_elements()
            )));
        }
        let nq = self.basis.num_points;
        match &self.filter {
            None => Ok((None, z.iter().flat_map(|&v| std::iter::repeat(v).take(nq)).collect())),
            Some(f) => {
                let nodal = f.apply(z)?;
                let mut pts = Vec::with_capacity(self.num_points());
                for nodes in &self.bilinear_nodes {
                    for q in 0..nq {
                        let n = &self.basis.bilinear[q];
                        pts.push((0..4).map(|k| n[k] * nodal[nodes[k]]).sum());
                    }
                }
                Ok((Some(nodal), pts))
            }
        }
    }

    /// Evaluates the pipeline; `projection = Some((β, η))` applies the
    /// Heaviside threshold, `None` uses `ρ = ζ`.
    pub fn evaluate(&self, z: &[f64], projection: Option<(f64, f64)>) -> Result<DesignFields> {
        let (zeta_nodes, zeta_points) = self.zeta_points(z)?;
        let (rho, drho) = match projection {
            Some((beta, eta)) => zeta_points.iter().map(|&v| heaviside(v, beta, eta)).unzip(),
            None => (zeta_points.clone(), vec![1.0; zeta_points.len()]),
        };
        Ok(DesignFields {
            zeta_nodes,
            zeta_points,
            rho,
            drho,
        })
    }

    /// Pulls `∂C/∂ζ_q` (one entry per quadrature point) back to `∂C/∂z`.
    pub fn pullback(&self, dc_dzeta_points: &[f64]) -> Result<Vec<f64>> {
        if dc_dzeta_points.len() != self.num_points() {
            return Err(Error::invalid("point sensitivity has the wrong length"));
        }
        let nq = self.basis.num_points;
        match &self.filter {
            None => Ok(dc_dzeta_points.chunks(nq).map(|c| c.iter().sum()).collect()),
            Some(f) => {
                let mut nodal = vec![0.0; f.num_nodes()];
                for (nodes, chunk) in self.bilinear_nodes.iter().zip(dc_dzeta_points.chunks(nq)) {
                    for (q, g) in chunk.iter().enumerate() {
                        let n = &self.basis.bilinear[q];
                        for k in 0..4 {
                            nodal[nodes[k]] += n[k] * g;
                        }
                    }
                }
                f.apply_transpose(&nodal)
            }
        }
    }

    /// Chain rule from `∂C/∂ρ_q` to `∂C/∂z` through the projection.
    pub fn chain(&self, fields: &DesignFields, dc_drho: &[f64]) -> Result<Vec<f64>> {
        if dc_drho.len() != fields.drho.len() {
            return Err(Error::invalid("density sensitivity has the wrong length"));
        }
        let d: Vec<f64> = dc_drho.iter().zip(&fields.drho).map(|(a, b)| a * b).collect();
        self.pullback(&d)
    }

    /// `∫ H_{β,η}(ζ) dV` by cell quadrature and its gradient w.r.t. `z`.
    pub fn projected_volume(&self, fields: &DesignFields, beta: f64, eta: f64) -> Result<(f64, Vec<f64>)> {
        let nq = self.basis.num_points;
        let mut value = 0.0;
        let mut d = Vec::with_capacity(fields.zeta_points.len());
        for (k, &zeta) in fields.zeta_points.iter().enumerate() {
            let w = self.basis.weights[k % nq];
            let (h, dh) = heaviside(zeta, beta, eta);
            value += w * h;
            d.push(w * dh);
        }
        Ok((value, self.pullback(&d)?))
    }

    /// Discreteness `∫ 4 ρ (1 − ρ) dV / |Ω|` of the projected density.
    pub fn discreteness(&self, fields: &DesignFields) -> f64 {
        let nq = self.basis.num_points;
        let mut num = 0.0;
        let mut area = 0.0;
        for (k, &r) in fields.rho.iter().enumerate() {
            let w = self.basis.weights[k % nq];
            num += w * 4.0 * r * (1.0 - r);
            area += w;
        }
        num / area
    }
}
