//! The compressed-rod contact benchmark: a 1D analytical model with a
//! contact resistance and the matching 2D third-medium finite-element rod.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assembly::{
    Assembler, AverageBc, BoundaryConditions, ConvectionBc, DisplacementBc, Ramp, TemperatureBc,
};
use crate::error::{Error, Result};
use crate::material::{BaseMaterial, ErsatzScaling};
use crate::mesh::{build_structured_mesh, quadrature, ElementBasis, QuadratureKind, Side, TagRule};
use crate::regularize::{DesignFields, DesignPipeline, HelmholtzFilter};

/// Steady 1D conduction over `[0, L_c]` with convection at `X = 0`, a fixed
/// temperature at `X = L_c` and a contact resistance at `X = L_c/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rod1DParams {
    /// Deformed rod length `L_c` (m).
    pub length: f64,
    pub conductivity: f64,
    /// Convection coefficient at `X = 0` (W/m²K).
    pub h: f64,
    pub ambient: f64,
    /// Prescribed temperature at `X = L_c` (°C).
    pub end_temperature: f64,
    /// Contact resistance `R_th` (m²K/W).
    pub contact_resistance: f64,
}

/// `θ(X) = −(A X + B)/κ` with `B = B1` left of the contact and `B2` right of it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rod1DSolution {
    pub params: Rod1DParams,
    pub a: f64,
    pub b1: f64,
    pub b2: f64,
}

impl Rod1DSolution {
    pub fn temperature(&self, x: f64) -> f64 {
        let b = if x <= 0.5 * self.params.length { self.b1 } else { self.b2 };
        -(self.a * x + b) / self.params.conductivity
    }

    /// Heat flux `q = −κ dθ/dX`, uniform along the rod.
    pub fn flux(&self) -> f64 {
        self.a
    }

    /// Temperature jump `θ(L_c/2⁺) − θ(L_c/2⁻) = −R_th q`.
    pub fn jump(&self) -> f64 {
        -self.params.contact_resistance * self.a
    }
}

pub fn solve_rod_1d(p: &Rod1DParams) -> Result<Rod1DSolution> {
    if !(p.length > 0.0 && p.conductivity > 0.0 && p.h > 0.0) {
        return Err(Error::invalid("rod length, conductivity and h must be positive"));
    }
    if !(p.contact_resistance >= 0.0) {
        return Err(Error::invalid("contact resistance must be non-negative"));
    }
    let k = p.conductivity;
    let a = (p.ambient - p.end_temperature) / (p.length / k + p.contact_resistance + 1.0 / p.h);
    Ok(Rod1DSolution {
        params: *p,
        a,
        b1: k * (a / p.h - p.ambient),
        b2: -k * p.end_temperature - a * p.length,
    })
}

/// Resistance `R_th = L_c^v / (δ_κ κ)` of a compressed void layer.
pub fn contact_resistance(void_length: f64, delta_kappa: f64, conductivity: f64) -> Result<f64> {
    if !(void_length > 0.0 && delta_kappa > 0.0 && conductivity > 0.0) {
        return Err(Error::invalid("void length, contrast and conductivity must be positive"));
    }
    Ok(void_length / (delta_kappa * conductivity))
}

/// Undeformed rod: solid, void, solid along `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RodGeometry {
    pub length: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    pub void_start: f64,
    pub void_end: f64,
}

impl Default for RodGeometry {
    fn default() -> Self {
        Self {
            length: 0.06,
            height: 0.01,
            nx: 120,
            ny: 20,
            void_start: 0.02,
            void_end: 0.04,
        }
    }
}

impl RodGeometry {
    pub fn validate(&self) -> Result<()> {
        let ok = self.length > 0.0
            && self.height > 0.0
            && self.nx > 0
            && self.ny > 0
            && 0.0 < self.void_start
            && self.void_start < self.void_end
            && self.void_end < self.length;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("invalid rod geometry"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RodLoading {
    /// Convection coefficient on the left end (W/m²K).
    pub h: f64,
    pub ambient: f64,
    /// Temperature of the right end (°C).
    pub end_temperature: f64,
    /// Final axial displacement of the right end (m).
    pub displacement: f64,
}

impl Default for RodLoading {
    fn default() -> Self {
        Self {
            h: 1000.0,
            ambient: 20.0,
            end_temperature: 200.0,
            displacement: -0.03,
        }
    }
}

/// How the solid-void interface is represented.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum Interface {
    /// Element-wise densities, no filter.
    Sharp,
    /// Helmholtz-filtered densities (no projection).
    Diffuse { radius: f64 },
}

impl Interface {
    pub fn label(&self) -> String {
        match self {
            Interface::Sharp => "sharp".into(),
            Interface::Diffuse { radius } => format!("diffuse-{radius:.4e}"),
        }
    }
}

pub const ROD_COLD: &str = "cold";
pub const ROD_HOT: &str = "hot";

pub struct RodModel {
    pub geometry: RodGeometry,
    pub loading: RodLoading,
    pub interface: Interface,
    pub assembler: Assembler,
    pub pipeline: DesignPipeline,
    pub z: Vec<f64>,
    pub fields: DesignFields,
    /// Quadratic nodes on the centerline, ordered by `X`.
    pub centerline: Vec<usize>,
}

/// Same material as the solids everywhere, with `α = 0`.
pub fn rod_material(base: &BaseMaterial) -> BaseMaterial {
    BaseMaterial {
        expansion: 0.0,
        ..*base
    }
}

pub fn build_rod(
    geometry: RodGeometry,
    loading: RodLoading,
    base: &BaseMaterial,
    delta_kappa: f64,
    ersatz: &ErsatzScaling,
    interface: Interface,
) -> Result<RodModel> {
    geometry.validate()?;
    let tags = [
        TagRule::whole_side(ROD_COLD, Side::Left),
        TagRule::whole_side(ROD_HOT, Side::Right),
    ];
    let mesh = Arc::new(build_structured_mesh(
        geometry.nx,
        geometry.ny,
        geometry.length,
        geometry.height,
        &tags,
    )?);
    let base = rod_material(base);
    let ersatz = ErsatzScaling {
        delta_kappa,
        h_char: geometry.height,
        ..*ersatz
    };
    let bcs = BoundaryConditions {
        displacement: vec![
            DisplacementBc {
                tag: ROD_COLD.into(),
                values: [Some(0.0), None],
                ramp: Ramp::Fixed,
            },
            DisplacementBc {
                tag: ROD_HOT.into(),
                values: [Some(loading.displacement), Some(0.0)],
                ramp: Ramp::Scaled,
            },
        ],
        temperature: vec![TemperatureBc {
            tag: ROD_HOT.into(),
            rise: loading.end_temperature - base.reference_temperature,
            ramp: Ramp::Fixed,
        }],
        convection: vec![ConvectionBc {
            tag: ROD_COLD.into(),
            h: loading.h,
            ambient: loading.ambient,
        }],
        average: vec![AverageBc {
            tag: ROD_COLD.into(),
            component: 1,
        }],
    };
    let basis = Arc::new(ElementBasis::new(&mesh, &quadrature(QuadratureKind::GaussLobatto3x3)));
    let pipeline = match interface {
        Interface::Sharp => DesignPipeline::sharp(&mesh, basis.clone()),
        Interface::Diffuse { radius } => {
            DesignPipeline::new(&mesh, basis.clone(), Some(HelmholtzFilter::new(&mesh, radius)?))
        }
    };
    let z: Vec<f64> = (0..mesh.num_elements())
        .map(|e| {
            let x = mesh.element_center(e)[0];
            if x > geometry.void_start && x < geometry.void_end {
                0.0
            } else {
                1.0
            }
        })
        .collect();
    let fields = pipeline.evaluate(&z, None)?;
    let centerline = mesh.nodes_on_horizontal_line(0.5 * geometry.height);
    let assembler = Assembler::with_basis(mesh, basis, base, ersatz, bcs)?;
    Ok(RodModel {
        geometry,
        loading,
        interface,
        assembler,
        pipeline,
        z,
        fields,
        centerline,
    })
}

/// One centerline sample: undeformed `X`, deformed `x`, temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub reference_x: f64,
    pub x: f64,
    pub theta: f64,
}

impl RodModel {
    pub fn centerline_profile(&self, state: &[f64]) -> Vec<ProfilePoint> {
        let mesh = &self.assembler.mesh;
        let d = &self.assembler.dofs;
        self.centerline
            .iter()
            .map(|&n| {
                let xr = mesh.coords[n][0];
                ProfilePoint {
                    reference_x: xr,
                    x: xr + state[d.u(n, 0)],
                    theta: state[d.theta(n)],
                }
            })
            .collect()
    }

    /// Undeformed positions of the solid-void interfaces on the centerline:
    /// the material interfaces when sharp, the `ζ = 0.5` crossings when diffuse.
    pub fn interface_positions(&self) -> Result<(f64, f64)> {
        let g = &self.geometry;
        let Some(zeta) = &self.fields.zeta_nodes else {
            return Ok((g.void_start, g.void_end));
        };
        let mesh = &self.assembler.mesh;
        let (_, hy) = mesh.element_size();
        let mut line: Vec<(f64, f64)> = (0..mesh.num_bilinear_nodes())
            .filter_map(|n| {
                let [x, y] = mesh.bilinear_coords(n);
                ((y - 0.5 * g.height).abs() < 0.25 * hy).then_some((x, zeta[n]))
            })
            .collect();
        line.sort_by(|a, b| a.0.total_cmp(&b.0));
        let crossing = |w: &[(f64, f64)]| {
            let ((x0, z0), (x1, z1)) = (w[0], w[1]);
            x0 + (0.5 - z0) / (z1 - z0) * (x1 - x0)
        };
        let left = line
            .windows(2)
            .find(|w| w[0].1 >= 0.5 && w[1].1 < 0.5)
            .map(crossing);
        let right = line
            .windows(2)
            .rev()
            .find(|w| w[0].1 < 0.5 && w[1].1 >= 0.5)
            .map(crossing);
        match (left, right) {
            (Some(l), Some(r)) if l < r => Ok((l, r)),
            _ => Err(Error::invalid("filtered rod has no void on the centerline")),
        }
    }

    /// Deformed length of the void along the centerline.
    pub fn void_length(&self, state: &[f64]) -> Result<f64> {
        let (a, b) = self.interface_positions()?;
        let profile = self.centerline_profile(state);
        let x_at = |xr: f64| {
            let k = profile
                .windows(2)
                .position(|w| w[0].reference_x <= xr && xr <= w[1].reference_x)
                .unwrap_or(0);
            let (p, q) = (profile[k], profile[k + 1]);
            let s = (xr - p.reference_x) / (q.reference_x - p.reference_x);
            p.x + s * (q.x - p.x)
        };
        Ok(x_at(b) - x_at(a))
    }

    /// Average normal flux `∫ λ_θ dS / |∂Ω|` on the heated end (negative for inflow).
    pub fn end_flux(&self, state: &[f64]) -> Result<f64> {
        Ok(self.assembler.reaction_flux(state, ROD_HOT)?.1)
    }

    /// Average `|λ_u · n|` on the loaded end.
    pub fn end_pressure(&self, state: &[f64]) -> Result<f64> {
        let r = self.assembler.traction_resultant(state, ROD_HOT)?;
        Ok(r[0].abs() / self.assembler.mesh.tag_length(ROD_HOT)?)
    }

    /// 1D model for a state: deformed length `L + ū(t)` and the given resistance.
    pub fn analytic(&self, t: f64, contact_resistance: f64) -> Result<Rod1DSolution> {
        solve_rod_1d(&Rod1DParams {
            length: self.geometry.length + t * self.loading.displacement,
            conductivity: self.assembler.base.conductivity,
            h: self.loading.h,
            ambient: self.loading.ambient,
            end_temperature: self.loading.end_temperature,
            contact_resistance,
        })
    }
}
