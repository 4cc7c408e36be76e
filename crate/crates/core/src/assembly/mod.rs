//! Global residual and tangent of the coupled thermo-mechanical problem.
//!
//! Unknowns are the displacement `u`, the temperature `θ`, nodal traction
//! multipliers `λ_u`, nodal flux multipliers `λ_θ` and scalar multipliers of
//! average constraints. Residual blocks:
//!
//! * `R_u = ∫ P : ∇δu + k_r ∫ ℍu ⋮ ℍδu + ∫ λ_u·δu + μ ∫ δu_c`
//! * `R_θ = −∫ ∇δθ·q + ∫ λ_θ δθ + ∫ h (θ − θ_∞) δθ`
//! * `R_λu = ∫ (u − ū) δλ_u`, `R_λθ = ∫ (θ − θ_o − θ̄) δλ_θ`, `R_μ = ∫ u_c`
//!
//! With this sign of the conduction term, `λ_θ = n·q` on Dirichlet
//! boundaries and convection enters as `q·n = h (θ − θ_∞)`.

pub mod bcs;

use std::ops::Range;
use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;

pub use bcs::{AverageBc, BoundaryConditions, ConvectionBc, DisplacementBc, DofMap, Ramp, TemperatureBc};

use crate::error::{DofBlock, Error, Result};
use crate::material::{
    deformation_gradient, heat_flux, interpolate, material_tangents, pk1_stress, regularization_matrix,
    BaseMaterial, ErsatzScaling,
};
use crate::mesh::{facet_shape, quadrature, ElementBasis, MeshGrid, QuadratureKind};
use crate::nlsolve::sparse::{SparseMatrix, SparsePattern};
use crate::nlsolve::NonlinearSystem;

/// Facet mass matrix `∫ φ_a φ_b ds` on a unit-length quadratic facet.
pub fn reference_facet_mass() -> [[f64; 3]; 3] {
    let rule = quadrature(QuadratureKind::Gauss3);
    let mut m = [[0.0; 3]; 3];
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let phi = facet_shape(p[0]);
        for a in 0..3 {
            for b in 0..3 {
                // ds = (L/2) dξ with L = 1
                m[a][b] += 0.5 * w * phi[a] * phi[b];
            }
        }
    }
    m
}

/// `∫ φ_a ds` on a unit-length facet.
pub fn reference_facet_load() -> [f64; 3] {
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]
}

struct LocalSystem {
    residual: Vec<f64>,
    matrix: Vec<f64>,
}

pub struct Assembler {
    pub mesh: Arc<MeshGrid>,
    pub basis: Arc<ElementBasis>,
    pub base: BaseMaterial,
    pub ersatz: ErsatzScaling,
    pub bcs: BoundaryConditions,
    pub dofs: DofMap,
    pattern: Arc<SparsePattern>,
    /// Value positions of the local element matrices, row-major per element.
    positions: Vec<u32>,
    regularization: Vec<f64>,
    /// Linear boundary couplings `(row, col, value)`; both orders included.
    linear: Vec<(usize, usize, f64)>,
    linear_positions: Vec<usize>,
    load_fixed: Vec<f64>,
    load_scaled: Vec<f64>,
}

impl Assembler {
    pub fn new(
        mesh: Arc<MeshGrid>,
        base: BaseMaterial,
        ersatz: ErsatzScaling,
        bcs: BoundaryConditions,
    ) -> Result<Self> {
        let basis = Arc::new(ElementBasis::new(&mesh, &quadrature(QuadratureKind::GaussLobatto3x3)));
        Self::with_basis(mesh, basis, base, ersatz, bcs)
    }

    pub fn with_basis(
        mesh: Arc<MeshGrid>,
        basis: Arc<ElementBasis>,
        base: BaseMaterial,
        ersatz: ErsatzScaling,
        bcs: BoundaryConditions,
    ) -> Result<Self> {
        base.validate()?;
        ersatz.validate()?;
        bcs.validate(&mesh)?;
        let dofs = DofMap::new(&mesh, &bcs)?;
        let n = dofs.total();
        let mref = reference_facet_mass();
        let wref = reference_facet_load();
        let theta_ref = base.reference_temperature;

        let mut linear = Vec::new();
        let mut load_fixed = vec![0.0; n];
        let mut load_scaled = vec![0.0; n];
        let mut load = |ramp: Ramp, dof: usize, v: f64| match ramp {
            Ramp::Fixed => load_fixed[dof] += v,
            Ramp::Scaled => load_scaled[dof] += v,
        };
        for bc in &bcs.displacement {
            for f in mesh.facets_with_tag(&bc.tag)? {
                for (c, value) in bc.values.iter().enumerate() {
                    let Some(value) = value else { continue };
                    for a in 0..3 {
                        let m = dofs.traction_dof(f.nodes[a], c).expect("traction multiplier");
                        for b in 0..3 {
                            let v = f.length * mref[a][b];
                            let u = dofs.u(f.nodes[b], c);
                            linear.push((m, u, v));
                            linear.push((u, m, v));
                        }
                        load(bc.ramp, m, f.length * wref[a] * value);
                    }
                }
            }
        }
        for bc in &bcs.temperature {
            for f in mesh.facets_with_tag(&bc.tag)? {
                for a in 0..3 {
                    let m = dofs.flux_dof(f.nodes[a]).expect("flux multiplier");
                    for b in 0..3 {
                        let v = f.length * mref[a][b];
                        let th = dofs.theta(f.nodes[b]);
                        linear.push((m, th, v));
                        linear.push((th, m, v));
                    }
                    load(Ramp::Fixed, m, f.length * wref[a] * theta_ref);
                    load(bc.ramp, m, f.length * wref[a] * bc.rise);
                }
            }
        }
        for bc in &bcs.convection {
            for f in mesh.facets_with_tag(&bc.tag)? {
                for a in 0..3 {
                    let ta = dofs.theta(f.nodes[a]);
                    for b in 0..3 {
                        linear.push((ta, dofs.theta(f.nodes[b]), bc.h * f.length * mref[a][b]));
                    }
                    load(Ramp::Fixed, ta, bc.h * f.length * wref[a] * bc.ambient);
                }
            }
        }
        for (k, bc) in bcs.average.iter().enumerate() {
            let mu = dofs.average_dof(k);
            for f in mesh.facets_with_tag(&bc.tag)? {
                for a in 0..3 {
                    let u = dofs.u(f.nodes[a], bc.component);
                    let v = f.length * wref[a];
                    linear.push((mu, u, v));
                    linear.push((u, mu, v));
                }
            }
        }

        let npe = mesh.kind.nodes_per_element();
        let nd = 3 * npe;
        let element_dofs: Vec<Vec<usize>> = (0..mesh.num_elements())
            .map(|e| Self::element_dofs_of(&mesh, &dofs, e))
            .collect();
        let mut entries = Vec::with_capacity(element_dofs.len() * nd * nd + linear.len());
        for ed in &element_dofs {
            for &r in ed {
                for &c in ed {
                    entries.push((r, c));
                }
            }
        }
        entries.extend(linear.iter().map(|&(r, c, _)| (r, c)));
        let pattern = Arc::new(SparsePattern::from_entries(n, entries)?);
        if pattern.nnz() >= u32::MAX as usize {
            return Err(Error::invalid("sparsity pattern too large"));
        }
        let mut positions = Vec::with_capacity(element_dofs.len() * nd * nd);
        for ed in &element_dofs {
            for &r in ed {
                for &c in ed {
                    positions.push(pattern.position(r, c).expect("element entry in pattern") as u32);
                }
            }
        }
        let linear_positions = linear
            .iter()
            .map(|&(r, c, _)| pattern.position(r, c).expect("boundary entry in pattern"))
            .collect();
        let regularization = regularization_matrix(
            &basis.hessians,
            &basis.weights,
            ersatz.regularization_stiffness(&base),
        );
        Ok(Self {
            mesh,
            basis,
            base,
            ersatz,
            bcs,
            dofs,
            pattern,
            positions,
            regularization,
            linear,
            linear_positions,
            load_fixed,
            load_scaled,
        })
    }

    fn element_dofs_of(mesh: &MeshGrid, dofs: &DofMap, e: usize) -> Vec<usize> {
        let nodes = mesh.element_nodes(e);
        let mut out = Vec::with_capacity(3 * nodes.len());
        for &n in nodes {
            out.push(dofs.u(n, 0));
            out.push(dofs.u(n, 1));
        }
        out.extend(nodes.iter().map(|&n| dofs.theta(n)));
        out
    }

    /// Global dof indices of element `e`: `[u_x0, u_y0, u_x1, ..., θ_0, θ_1, ...]`.
    pub fn element_dofs(&self, e: usize) -> Vec<usize> {
        Self::element_dofs_of(&self.mesh, &self.dofs, e)
    }

    pub fn num_dofs(&self) -> usize {
        self.dofs.total()
    }

    pub fn pattern(&self) -> &Arc<SparsePattern> {
        &self.pattern
    }

    /// Number of density samples expected by the residual (one per cell
    /// quadrature point).
    pub fn num_density_points(&self) -> usize {
        self.mesh.num_elements() * self.basis.num_points
    }

    /// Reference state: zero displacement, `θ = θ_o`, zero multipliers.
    pub fn initial_state(&self) -> Vec<f64> {
        let mut a = vec![0.0; self.num_dofs()];
        for n in 0..self.dofs.num_nodes {
            a[self.dofs.theta(n)] = self.base.reference_temperature;
        }
        a
    }

    fn check_inputs(&self, state: &[f64], rho: &[f64]) -> Result<()> {
        if state.len() != self.num_dofs() {
            return Err(Error::invalid(format!(
                "state has {} entries, expected {}",
                state.len(),
                self.num_dofs()
            )));
        }
        if rho.len() != self.num_density_points() {
            return Err(Error::invalid(format!(
                "density has {} entries, expected {}",
                rho.len(),
                self.num_density_points()
            )));
        }
        Ok(())
    }

    /// Element residual (and tangent when `tangent` is set).
    fn element(&self, e: usize, state: &[f64], rho: &[f64], tangent: bool) -> Result<LocalSystem> {
        let b = &*self.basis;
        let npe = b.num_basis;
        let nd = 3 * npe;
        let ed = self.element_dofs(e);
        let ue: Vec<f64> = ed[..2 * npe].iter().map(|&d| state[d]).collect();
        let te: Vec<f64> = ed[2 * npe..].iter().map(|&d| state[d]).collect();
        let mut res = vec![0.0; nd];
        let mut mat = if tangent { vec![0.0; nd * nd] } else { Vec::new() };
        let theta_ref = self.base.reference_temperature;

        for q in 0..b.num_points {
            let w = b.weights[q];
            let dn = &b.gradients[q];
            let nv = &b.values[q];
            let mut gu = Matrix2::zeros();
            let mut gt = Vector2::zeros();
            let mut theta = 0.0;
            for a in 0..npe {
                for c in 0..2 {
                    for j in 0..2 {
                        gu[(c, j)] += ue[2 * a + c] * dn[a][j];
                    }
                }
                gt[0] += te[a] * dn[a][0];
                gt[1] += te[a] * dn[a][1];
                theta += te[a] * nv[a];
            }
            let f = deformation_gradient(&gu);
            let at = |err: Error| match err {
                Error::InvertedElement { jacobian, .. } => Error::InvertedElement {
                    element: e,
                    point: q,
                    jacobian,
                },
                other => other,
            };
            let rho_q = rho[e * b.num_points + q];
            let (mp, _) = interpolate(rho_q.clamp(0.0, 1.0), &self.base, &self.ersatz)?;
            let dtheta = theta - theta_ref;
            let p = pk1_stress(&f, dtheta, &mp).map_err(at)?;
            let hf = heat_flux(&f, &gt, &mp).map_err(at)?;
            for a in 0..npe {
                for c in 0..2 {
                    res[2 * a + c] += w * (p[(c, 0)] * dn[a][0] + p[(c, 1)] * dn[a][1]);
                }
                res[2 * npe + a] -= w * (dn[a][0] * hf.q[0] + dn[a][1] * hf.q[1]);
            }
            if !tangent {
                continue;
            }
            let tg = material_tangents(&f, dtheta, &mp).map_err(at)?;
            for a in 0..npe {
                for c in 0..2 {
                    let row = 2 * a + c;
                    // ∂P_cJ/∂F_dL contracted with ∇N_a on J
                    let mut ad = [[0.0; 2]; 2];
                    for (d, adr) in ad.iter_mut().enumerate() {
                        for (l, v) in adr.iter_mut().enumerate() {
                            *v = w * (tg.a(c, 0, d, l) * dn[a][0] + tg.a(c, 1, d, l) * dn[a][1]);
                        }
                    }
                    let pt = w * (tg.dp_dtheta[(c, 0)] * dn[a][0] + tg.dp_dtheta[(c, 1)] * dn[a][1]);
                    for bb in 0..npe {
                        for d in 0..2 {
                            mat[row * nd + 2 * bb + d] += ad[d][0] * dn[bb][0] + ad[d][1] * dn[bb][1];
                        }
                        mat[row * nd + 2 * npe + bb] += pt * nv[bb];
                    }
                }
                let row = 2 * npe + a;
                let mut qd = [[0.0; 2]; 2];
                for (d, qdr) in qd.iter_mut().enumerate() {
                    for (l, v) in qdr.iter_mut().enumerate() {
                        *v = -w * (dn[a][0] * hf.dq_df[0][d][l] + dn[a][1] * hf.dq_df[1][d][l]);
                    }
                }
                let qg = [
                    -w * (dn[a][0] * hf.dq_dgrad[(0, 0)] + dn[a][1] * hf.dq_dgrad[(1, 0)]),
                    -w * (dn[a][0] * hf.dq_dgrad[(0, 1)] + dn[a][1] * hf.dq_dgrad[(1, 1)]),
                ];
                for bb in 0..npe {
                    for d in 0..2 {
                        mat[row * nd + 2 * bb + d] += qd[d][0] * dn[bb][0] + qd[d][1] * dn[bb][1];
                    }
                    mat[row * nd + 2 * npe + bb] += qg[0] * dn[bb][0] + qg[1] * dn[bb][1];
                }
            }
        }

        let kr = &self.regularization;
        for a in 0..npe {
            for bb in 0..npe {
                let k = kr[a * npe + bb];
                if k == 0.0 {
                    continue;
                }
                for c in 0..2 {
                    res[2 * a + c] += k * ue[2 * bb + c];
                    if tangent {
                        mat[(2 * a + c) * nd + 2 * bb + c] += k;
                    }
                }
            }
        }
        Ok(LocalSystem { residual: res, matrix: mat })
    }

    fn boundary_residual(&self, state: &[f64], t: f64, r: &mut [f64]) {
        for &(row, col, v) in &self.linear {
            r[row] += v * state[col];
        }
        for (ri, (f, s)) in r.iter_mut().zip(self.load_fixed.iter().zip(&self.load_scaled)) {
            *ri -= f + t * s;
        }
    }

    pub fn residual(&self, state: &[f64], rho: &[f64], t: f64) -> Result<Vec<f64>> {
        self.check_inputs(state, rho)?;
        let locals: Vec<LocalSystem> = (0..self.mesh.num_elements())
            .into_par_iter()
            .map(|e| self.element(e, state, rho, false))
            .collect::<Result<_>>()?;
        let mut r = vec![0.0; self.num_dofs()];
        for (e, loc) in locals.iter().enumerate() {
            for (&d, v) in self.element_dofs(e).iter().zip(&loc.residual) {
                r[d] += v;
            }
        }
        self.boundary_residual(state, t, &mut r);
        Ok(r)
    }

    pub fn residual_and_tangent(&self, state: &[f64], rho: &[f64], t: f64) -> Result<(Vec<f64>, SparseMatrix)> {
        self.check_inputs(state, rho)?;
        let locals: Vec<LocalSystem> = (0..self.mesh.num_elements())
            .into_par_iter()
            .map(|e| self.element(e, state, rho, true))
            .collect::<Result<_>>()?;
        let mut r = vec![0.0; self.num_dofs()];
        let mut m = SparseMatrix::zeros(self.pattern.clone());
        let nd = 3 * self.basis.num_basis;
        for (e, loc) in locals.iter().enumerate() {
            for (&d, v) in self.element_dofs(e).iter().zip(&loc.residual) {
                r[d] += v;
            }
            let pos = &self.positions[e * nd * nd..(e + 1) * nd * nd];
            for (&p, v) in pos.iter().zip(&loc.matrix) {
                m.values[p as usize] += v;
            }
        }
        for (&p, &(_, _, v)) in self.linear_positions.iter().zip(&self.linear) {
            m.values[p] += v;
        }
        self.boundary_residual(state, t, &mut r);
        Ok((r, m))
    }

    /// `μᵀ ∂R/∂ρ_q` for every density sample, with the state fixed.
    pub fn design_derivative(&self, state: &[f64], rho: &[f64], mu: &[f64]) -> Result<Vec<f64>> {
        self.check_inputs(state, rho)?;
        let b = &*self.basis;
        let npe = b.num_basis;
        let theta_ref = self.base.reference_temperature;
        let per_element: Vec<Vec<f64>> = (0..self.mesh.num_elements())
            .into_par_iter()
            .map(|e| -> Result<Vec<f64>> {
                let ed = self.element_dofs(e);
                let ue: Vec<f64> = ed[..2 * npe].iter().map(|&d| state[d]).collect();
                let te: Vec<f64> = ed[2 * npe..].iter().map(|&d| state[d]).collect();
                let me: Vec<f64> = ed.iter().map(|&d| mu[d]).collect();
                let mut out = vec![0.0; b.num_points];
                for (q, o) in out.iter_mut().enumerate() {
                    let dn = &b.gradients[q];
                    let mut gu = Matrix2::zeros();
                    let mut gt = Vector2::zeros();
                    let mut theta = 0.0;
                    for a in 0..npe {
                        for c in 0..2 {
                            for j in 0..2 {
                                gu[(c, j)] += ue[2 * a + c] * dn[a][j];
                            }
                        }
                        gt[0] += te[a] * dn[a][0];
                        gt[1] += te[a] * dn[a][1];
                        theta += te[a] * b.values[q][a];
                    }
                    let f = deformation_gradient(&gu);
                    let (_, dmp) = interpolate(rho[e * b.num_points + q].clamp(0.0, 1.0), &self.base, &self.ersatz)?;
                    // stress and flux are linear in the coefficients
                    let dp = pk1_stress(&f, theta - theta_ref, &dmp)?;
                    let dq = heat_flux(&f, &gt, &dmp)?.q;
                    let mut acc = 0.0;
                    for a in 0..npe {
                        for c in 0..2 {
                            acc += me[2 * a + c] * (dp[(c, 0)] * dn[a][0] + dp[(c, 1)] * dn[a][1]);
                        }
                        acc -= me[2 * npe + a] * (dn[a][0] * dq[0] + dn[a][1] * dq[1]);
                    }
                    *o = b.weights[q] * acc;
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        Ok(per_element.concat())
    }

    /// Dof weights `w` with `∫_tag λ_θ dS = Σ w_k a_k`.
    pub fn flux_weights(&self, tag: &str) -> Result<Vec<(usize, f64)>> {
        let wref = reference_facet_load();
        let mut acc: std::collections::BTreeMap<usize, f64> = Default::default();
        let mut any = false;
        for f in self.mesh.facets_with_tag(tag)? {
            for a in 0..3 {
                let dof = self
                    .dofs
                    .flux_dof(f.nodes[a])
                    .ok_or_else(|| Error::invalid(format!("tag '{tag}' carries no flux multipliers")))?;
                *acc.entry(dof).or_insert(0.0) += f.length * wref[a];
                any = true;
            }
        }
        if !any {
            return Err(Error::invalid(format!("tag '{tag}' has no facets")));
        }
        Ok(acc.into_iter().collect())
    }

    /// Entries of the facet mass on the flux multipliers of a tag, so that
    /// `∫_tag λ_θ² dS = Σ M_ij a_i a_j`.
    pub fn flux_mass(&self, tag: &str) -> Result<Vec<(usize, usize, f64)>> {
        let mref = reference_facet_mass();
        let mut out = Vec::new();
        for f in self.mesh.facets_with_tag(tag)? {
            let dofs: Vec<usize> = f
                .nodes
                .iter()
                .map(|&n| self.dofs.flux_dof(n))
                .collect::<Option<_>>()
                .ok_or_else(|| Error::invalid(format!("tag '{tag}' carries no flux multipliers")))?;
            for a in 0..3 {
                for b in 0..3 {
                    out.push((dofs[a], dofs[b], f.length * mref[a][b]));
                }
            }
        }
        Ok(out)
    }

    /// Total `Q = ∫ λ_θ dS` (W/m) and average `Q/|tag|` (W/m²) on a tag.
    pub fn reaction_flux(&self, state: &[f64], tag: &str) -> Result<(f64, f64)> {
        let total: f64 = self.flux_weights(tag)?.iter().map(|(d, w)| w * state[*d]).sum();
        Ok((total, total / self.mesh.tag_length(tag)?))
    }

    /// Heat leaving through a convective tag, `∫ h (θ − θ_∞) dS`.
    pub fn convection_heat(&self, state: &[f64], tag: &str) -> Result<f64> {
        let bc = self
            .bcs
            .convection
            .iter()
            .find(|c| c.tag == tag)
            .ok_or_else(|| Error::invalid(format!("tag '{tag}' is not convective")))?;
        let wref = reference_facet_load();
        let mut q = 0.0;
        for f in self.mesh.facets_with_tag(tag)? {
            for a in 0..3 {
                q += bc.h * f.length * wref[a] * (state[self.dofs.theta(f.nodes[a])] - bc.ambient);
            }
        }
        Ok(q)
    }

    /// Resultant `∫ λ_u dS` on a tag (N/m).
    pub fn traction_resultant(&self, state: &[f64], tag: &str) -> Result<[f64; 2]> {
        let wref = reference_facet_load();
        let mut out = [0.0; 2];
        for f in self.mesh.facets_with_tag(tag)? {
            for a in 0..3 {
                for (c, o) in out.iter_mut().enumerate() {
                    if let Some(d) = self.dofs.traction_dof(f.nodes[a], c) {
                        *o += f.length * wref[a] * state[d];
                    }
                }
            }
        }
        Ok(out)
    }

    /// `∫_tag u_c dS` for average constraint `k`.
    pub fn average_value(&self, state: &[f64], k: usize) -> Result<f64> {
        let bc = self
            .bcs
            .average
            .get(k)
            .ok_or_else(|| Error::invalid(format!("no average constraint {k}")))?;
        let wref = reference_facet_load();
        let mut v = 0.0;
        for f in self.mesh.facets_with_tag(&bc.tag)? {
            for a in 0..3 {
                v += f.length * wref[a] * state[self.dofs.u(f.nodes[a], bc.component)];
            }
        }
        Ok(v)
    }

    /// Dof blocks with absolute residual scales for Newton convergence.
    pub fn block_scales(&self) -> Vec<(DofBlock, Range<usize>, f64)> {
        let (hx, hy) = self.mesh.element_size();
        let le = hx.min(hy);
        let k0 = self.base.bulk_modulus();
        // W/m scale of the heat balance: conductivity times the applied span
        let theta_o = self.base.reference_temperature;
        let span = self
            .bcs
            .temperature
            .iter()
            .map(|b| b.rise.abs())
            .chain(self.bcs.convection.iter().map(|c| (c.ambient - theta_o).abs()))
            .fold(1.0, f64::max);
        let c0 = self.base.conductivity * span;
        let d = &self.dofs;
        let n = d.num_nodes;
        vec![
            (DofBlock::Displacement, 0..2 * n, k0 * le),
            (DofBlock::Temperature, 2 * n..3 * n, c0),
            (DofBlock::TractionMultiplier, d.traction_offset()..d.flux_offset(), le * le),
            (DofBlock::FluxMultiplier, d.flux_offset()..d.average_offset(), le),
            (DofBlock::AverageMultiplier, d.average_offset()..d.total(), le * le),
        ]
    }

    /// Smallest Jacobian determinant of `F` over all quadrature points.
    pub fn min_jacobian(&self, state: &[f64]) -> f64 {
        let b = &*self.basis;
        let npe = b.num_basis;
        let mut jmin = f64::INFINITY;
        for e in 0..self.mesh.num_elements() {
            let ed = self.element_dofs(e);
            for q in 0..b.num_points {
                let mut gu = Matrix2::zeros();
                for a in 0..npe {
                    for c in 0..2 {
                        for j in 0..2 {
                            gu[(c, j)] += state[ed[2 * a + c]] * b.gradients[q][a][j];
                        }
                    }
                }
                jmin = jmin.min((Matrix2::identity() + gu).determinant());
            }
        }
        jmin
    }
}

/// An assembler bound to a fixed density field.
pub struct CaseSystem<'a> {
    pub assembler: &'a Assembler,
    pub rho: &'a [f64],
}

impl NonlinearSystem for CaseSystem<'_> {
    fn num_dofs(&self) -> usize {
        self.assembler.num_dofs()
    }

    fn residual(&self, state: &[f64], t: f64) -> Result<Vec<f64>> {
        self.assembler.residual(state, self.rho, t)
    }

    fn residual_and_tangent(&self, state: &[f64], t: f64) -> Result<(Vec<f64>, SparseMatrix)> {
        self.assembler.residual_and_tangent(state, self.rho, t)
    }

    fn blocks(&self) -> Vec<(DofBlock, Range<usize>, f64)> {
        self.assembler.block_scales()
    }
}
