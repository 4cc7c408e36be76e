//! Thermal switch, diode and triode problem definitions.
//!
//! Terminals are boundary segments with a prescribed temperature and a
//! clamped displacement. All other boundaries are insulated and traction
//! free, except for the optional symmetry plane at `y = 0`.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assembly::{Assembler, BoundaryConditions, DisplacementBc, Ramp, TemperatureBc};
use crate::error::{Error, Result};
use crate::material::{BaseMaterial, ErsatzScaling};
use crate::mesh::{build_structured_mesh, quadrature, ElementBasis, MeshGrid, QuadratureKind, Side, TagRule};
use crate::nlsolve::{ContinuationPath, NewtonSettings};
use crate::regularize::{DesignField, DesignPipeline, HelmholtzFilter, ProjectionParams};

pub const ANODE: &str = "anode";
pub const CATHODE: &str = "cathode";
pub const GATE: &str = "gate";
pub const SYMMETRY: &str = "symmetry";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegulatorKind {
    Switch,
    Diode,
    Triode,
}

impl RegulatorKind {
    pub fn name(self) -> &'static str {
        match self {
            RegulatorKind::Switch => "switch",
            RegulatorKind::Diode => "diode",
            RegulatorKind::Triode => "triode",
        }
    }
}

/// Axis-aligned block of elements (selected by their centers) with an
/// initial volume fraction; frozen blocks keep it during optimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub value: f64,
    #[serde(default)]
    pub frozen: bool,
}

impl Region {
    fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegulatorGeometry {
    pub width: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    /// The bottom edge is a symmetry plane (zero normal displacement, zero flux).
    pub symmetry: bool,
    pub terminals: Vec<TagRule>,
    /// Later regions override earlier ones.
    pub regions: Vec<Region>,
    /// Volume fraction outside every region.
    pub initial: f64,
}

const MM: f64 = 1e-3;

impl RegulatorGeometry {
    /// Lower half of the 10 mm x 10 mm switch/diode domain: anode and cathode
    /// on the left and right edges next to the symmetry plane, solid pads
    /// behind them and an initial void gap in the middle.
    pub fn switch() -> Self {
        let (w, h, t, pad) = (10.0 * MM, 5.0 * MM, 2.5 * MM, 0.5 * MM);
        Self {
            width: w,
            height: h,
            nx: 160,
            ny: 80,
            symmetry: true,
            terminals: vec![
                TagRule::segment(ANODE, Side::Left, 0.0, t),
                TagRule::segment(CATHODE, Side::Right, 0.0, t),
            ],
            regions: vec![
                Region { x0: 4.75 * MM, x1: 5.25 * MM, y0: 0.0, y1: h, value: 1e-4, frozen: false },
                Region { x0: 0.0, x1: pad, y0: 0.0, y1: t, value: 1.0, frozen: true },
                Region { x0: w - pad, x1: w, y0: 0.0, y1: t, value: 1.0, frozen: true },
            ],
            initial: 0.3,
        }
    }

    /// 10 mm x 5 mm triode domain with the gate centered on the bottom edge.
    pub fn triode() -> Self {
        let (w, h, pad) = (10.0 * MM, 5.0 * MM, 0.5 * MM);
        let (t0, t1) = (1.25 * MM, 3.75 * MM);
        let (g0, g1) = (3.75 * MM, 6.25 * MM);
        Self {
            width: w,
            height: h,
            nx: 160,
            ny: 80,
            symmetry: false,
            terminals: vec![
                TagRule::segment(ANODE, Side::Left, t0, t1),
                TagRule::segment(CATHODE, Side::Right, t0, t1),
                TagRule::segment(GATE, Side::Bottom, g0, g1),
            ],
            regions: vec![
                Region { x0: 0.0, x1: pad, y0: t0, y1: t1, value: 1.0, frozen: true },
                Region { x0: w - pad, x1: w, y0: t0, y1: t1, value: 1.0, frozen: true },
                Region { x0: g0, x1: g1, y0: 0.0, y1: pad, value: 1.0, frozen: true },
            ],
            initial: 0.3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.height > 0.0) || self.nx == 0 || self.ny == 0 {
            return Err(Error::invalid("regulator domain needs positive extents and element counts"));
        }
        if !(0.0..=1.0).contains(&self.initial) {
            return Err(Error::invalid("initial volume fraction outside [0, 1]"));
        }
        for r in &self.regions {
            if !(r.x0 <= r.x1 && r.y0 <= r.y1) || !(0.0..=1.0).contains(&r.value) {
                return Err(Error::invalid(format!("invalid design region {r:?}")));
            }
        }
        if self.terminals.is_empty() {
            return Err(Error::invalid("regulator needs at least one terminal"));
        }
        if self.terminals.iter().any(|t| t.name == SYMMETRY) {
            return Err(Error::invalid(format!("'{SYMMETRY}' is reserved for the symmetry plane")));
        }
        Ok(())
    }

    pub fn tag_rules(&self) -> Vec<TagRule> {
        let mut rules = self.terminals.clone();
        if self.symmetry {
            rules.push(TagRule::whole_side(SYMMETRY, Side::Bottom));
        }
        rules
    }

    pub fn build_mesh(&self) -> Result<MeshGrid> {
        self.validate()?;
        let mesh = build_structured_mesh(self.nx, self.ny, self.width, self.height, &self.tag_rules())?;
        for t in &self.terminals {
            if mesh.facets_with_tag(&t.name)?.next().is_none() {
                return Err(Error::invalid(format!("terminal '{}' selects no boundary facets", t.name)));
            }
        }
        Ok(mesh)
    }

    pub fn initial_design(&self, mesh: &MeshGrid) -> DesignField {
        let mut field = DesignField::uniform(mesh.num_elements(), self.initial);
        for e in 0..mesh.num_elements() {
            let c = mesh.element_center(e);
            for r in self.regions.iter().filter(|r| r.contains(c)) {
                field.z[e] = r.value;
                field.frozen[e] = r.frozen;
            }
        }
        field
    }

    pub fn terminal_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for t in &self.terminals {
            if !names.contains(&t.name) {
                names.push(t.name.clone());
            }
        }
        names
    }
}

/// Terminal temperatures of one target point, in K above `θ_o`. Terminals
/// not listed are held at `θ_o`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadCase {
    pub rises: BTreeMap<String, f64>,
}

impl LoadCase {
    pub fn new(rises: &[(&str, f64)]) -> Self {
        Self {
            rises: rises.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    pub fn rise(&self, terminal: &str) -> f64 {
        self.rises.get(terminal).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegulatorProblem {
    pub kind: RegulatorKind,
    pub geometry: RegulatorGeometry,
    pub material: BaseMaterial,
    pub ersatz: ErsatzScaling,
    /// Target points, in the order the objective refers to them.
    pub cases: Vec<LoadCase>,
    /// `(w₁, w₂)`; the diode uses `w₁` only.
    pub weights: [f64; 2],
    /// `V*/|Ω|`.
    pub volume_fraction: f64,
    pub projection: ProjectionParams,
    /// Helmholtz filter radius; `None` uses `l_e/√3`.
    pub filter_radius: Option<f64>,
    pub newton: NewtonSettings,
    /// Load path of every case; stops are replaced by `[1]`.
    pub continuation: ContinuationPath,
    /// Retries of a failed case solve, each halving the continuation steps.
    pub case_retries: u32,
}

fn regulator_path() -> ContinuationPath {
    ContinuationPath {
        stops: vec![1.0],
        initial_step: 0.25,
        max_step: 0.25,
        min_step: 1.0 / 512.0,
        ..Default::default()
    }
}

impl RegulatorProblem {
    pub fn switch() -> Self {
        let geometry = RegulatorGeometry::switch();
        Self {
            kind: RegulatorKind::Switch,
            ersatz: ErsatzScaling {
                h_char: geometry.height,
                ..Default::default()
            },
            geometry,
            material: BaseMaterial::default(),
            cases: vec![
                LoadCase::new(&[(ANODE, 200.0), (CATHODE, 0.0)]),
                LoadCase::new(&[(ANODE, 400.0), (CATHODE, 0.0)]),
            ],
            weights: [2e3, 1e3],
            volume_fraction: 0.4,
            projection: ProjectionParams::default(),
            filter_radius: None,
            newton: NewtonSettings::default(),
            continuation: regulator_path(),
            case_retries: 2,
        }
    }

    pub fn diode() -> Self {
        Self {
            kind: RegulatorKind::Diode,
            cases: vec![
                LoadCase::new(&[(ANODE, 400.0), (CATHODE, 0.0)]),
                LoadCase::new(&[(ANODE, 0.0), (CATHODE, 400.0)]),
            ],
            weights: [1e3, 0.0],
            ..Self::switch()
        }
    }

    /// Triode design 1 penalizes the gate flux (`w₂ = 10³`), design 2 does not.
    pub fn triode(gate_penalty: bool) -> Self {
        let geometry = RegulatorGeometry::triode();
        let mut projection = ProjectionParams::default();
        projection.schedule.beta_max = 8.0;
        Self {
            kind: RegulatorKind::Triode,
            ersatz: ErsatzScaling {
                h_char: geometry.height,
                ..Default::default()
            },
            geometry,
            material: BaseMaterial::default(),
            cases: vec![
                LoadCase::new(&[(ANODE, 380.0), (CATHODE, 0.0), (GATE, 50.0)]),
                LoadCase::new(&[(ANODE, 380.0), (CATHODE, 0.0), (GATE, 100.0)]),
            ],
            weights: [1e3, if gate_penalty { 1e3 } else { 0.0 }],
            volume_fraction: 0.4,
            projection,
            filter_radius: None,
            newton: NewtonSettings::default(),
            continuation: regulator_path(),
            case_retries: 2,
        }
    }

    pub fn defaults(kind: RegulatorKind) -> Self {
        match kind {
            RegulatorKind::Switch => Self::switch(),
            RegulatorKind::Diode => Self::diode(),
            RegulatorKind::Triode => Self::triode(true),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.material.validate()?;
        self.ersatz.validate()?;
        self.projection.validate()?;
        self.newton.validate()?;
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::invalid("objective weights must be non-negative"));
        }
        if !(self.volume_fraction > 0.0 && self.volume_fraction < 1.0) {
            return Err(Error::invalid("volume fraction V*/|Ω| must lie in (0, 1)"));
        }
        if self.cases.len() != 2 {
            return Err(Error::invalid(format!(
                "{} objective needs exactly two load cases, got {}",
                self.kind.name(),
                self.cases.len()
            )));
        }
        let names = self.geometry.terminal_names();
        for required in [ANODE, CATHODE] {
            if !names.iter().any(|n| n == required) {
                return Err(Error::invalid(format!("missing terminal '{required}'")));
            }
        }
        if self.kind == RegulatorKind::Triode && !names.iter().any(|n| n == GATE) {
            return Err(Error::invalid("triode needs a 'gate' terminal"));
        }
        for case in &self.cases {
            for (tag, v) in &case.rises {
                if !names.contains(tag) {
                    return Err(Error::invalid(format!("load case refers to unknown terminal '{tag}'")));
                }
                if !v.is_finite() {
                    return Err(Error::invalid(format!("non-finite temperature on '{tag}'")));
                }
            }
        }
        if let Some(r) = self.filter_radius {
            if !(r > 0.0) {
                return Err(Error::invalid("filter radius must be positive"));
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<RegulatorModel> {
        self.validate()?;
        let mesh = Arc::new(self.geometry.build_mesh()?);
        let basis = Arc::new(ElementBasis::new(&mesh, &quadrature(QuadratureKind::GaussLobatto3x3)));
        let radius = self.filter_radius.unwrap_or_else(|| HelmholtzFilter::default_radius(&mesh));
        let pipeline = DesignPipeline::filtered(&mesh, basis.clone(), radius)?;
        let design = self.geometry.initial_design(&mesh);
        let mut model = RegulatorModel {
            problem: self.clone(),
            mesh,
            basis,
            pipeline,
            design,
            assemblers: Vec::new(),
        };
        model.assemblers = self
            .cases
            .iter()
            .map(|c| {
                let rises: Vec<(String, f64, Ramp)> =
                    c.rises.iter().map(|(k, v)| (k.clone(), *v, Ramp::Scaled)).collect();
                model.assembler(&rises)
            })
            .collect::<Result<_>>()?;
        Ok(model)
    }
}

pub struct RegulatorModel {
    pub problem: RegulatorProblem,
    pub mesh: Arc<MeshGrid>,
    pub basis: Arc<ElementBasis>,
    pub pipeline: DesignPipeline,
    /// Initial design with the frozen mask.
    pub design: DesignField,
    /// One assembler per load case, temperatures ramped from `θ_o`.
    pub assemblers: Vec<Assembler>,
}

impl RegulatorModel {
    /// Assembler with the given terminal temperatures; unlisted terminals
    /// are held at `θ_o`.
    pub fn assembler(&self, rises: &[(String, f64, Ramp)]) -> Result<Assembler> {
        let names = self.problem.geometry.terminal_names();
        let mut bcs = BoundaryConditions::default();
        for name in &names {
            bcs.displacement.push(DisplacementBc::clamped(name));
            let (rise, ramp) = rises
                .iter()
                .find(|(k, _, _)| k == name)
                .map_or((0.0, Ramp::Fixed), |(_, v, r)| (*v, *r));
            bcs.temperature.push(TemperatureBc {
                tag: name.clone(),
                rise,
                ramp,
            });
        }
        if let Some((k, _, _)) = rises.iter().find(|(k, _, _)| !names.contains(k)) {
            return Err(Error::invalid(format!("unknown terminal '{k}'")));
        }
        if self.problem.geometry.symmetry {
            bcs.displacement.push(DisplacementBc::symmetry(SYMMETRY, Side::Bottom));
        }
        Assembler::with_basis(
            self.mesh.clone(),
            self.basis.clone(),
            self.problem.material,
            self.problem.ersatz,
            bcs,
        )
    }

    /// Absolute volume budget `V*`.
    pub fn volume_budget(&self) -> f64 {
        self.problem.volume_fraction * self.mesh.area()
    }

    /// Path of one case solve; `refinement` halves the steps that many times.
    pub fn case_path(&self, refinement: u32) -> ContinuationPath {
        let f = 0.5f64.powi(refinement as i32);
        let p = &self.problem.continuation;
        ContinuationPath {
            stops: vec![1.0],
            initial_step: p.initial_step * f,
            max_step: p.max_step * f,
            min_step: p.min_step * f,
            ..p.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coarse(mut p: RegulatorProblem) -> RegulatorProblem {
        p.geometry.nx = 40;
        p.geometry.ny = 20;
        p
    }

    #[test]
    fn switch_defaults_follow_the_tables() {
        let p = RegulatorProblem::switch();
        assert_eq!(p.weights, [2e3, 1e3]);
        assert_eq!(p.cases[0].rise(ANODE), 200.0);
        assert_eq!(p.cases[1].rise(ANODE), 400.0);
        assert_eq!(p.volume_fraction, 0.4);
        assert_eq!((p.projection.schedule.beta_ini, p.projection.schedule.beta_max), (2.0, 16.0));
        assert_eq!((p.ersatz.delta_e, p.ersatz.kr_bar, p.ersatz.penalty), (1e-6, 1e-6, 3.0));
        assert_eq!((p.geometry.nx, p.geometry.ny), (160, 80));
        // element side 0.0625 mm
        assert!((p.geometry.width / p.geometry.nx as f64 - 0.0625e-3).abs() < 1e-15);
        p.validate().unwrap();
    }

    #[test]
    fn diode_and_triode_defaults() {
        let d = RegulatorProblem::diode();
        assert_eq!(d.weights[0], 1e3);
        assert_eq!(d.cases[1].rise(CATHODE), 400.0);
        assert_eq!(d.cases[1].rise(ANODE), 0.0);
        let t1 = RegulatorProblem::triode(true);
        let t2 = RegulatorProblem::triode(false);
        assert_eq!(t1.weights, [1e3, 1e3]);
        assert_eq!(t2.weights, [1e3, 0.0]);
        assert_eq!(t1.projection.schedule.beta_max, 8.0);
        assert_eq!(t1.cases[0].rise(GATE), 50.0);
        assert_eq!(t1.cases[1].rise(GATE), 100.0);
        assert_eq!(t1.cases[1].rise(ANODE), 380.0);
        t1.validate().unwrap();
    }

    #[test]
    fn initial_design_regions() {
        let m = coarse(RegulatorProblem::switch()).build().unwrap();
        let d = &m.design;
        let frozen = d.frozen.iter().filter(|f| **f).count();
        // two 2 x 10 solid pads
        assert_eq!(frozen, 2 * 2 * 10);
        assert!(d.z.iter().zip(&d.frozen).all(|(z, f)| !*f || *z == 1.0));
        assert_eq!(d.z.iter().filter(|z| **z == 1e-4).count(), 2 * 20);
        assert_eq!(d.z.iter().filter(|z| **z == 0.3).count(), 800 - 40 - 40);
        assert!((m.volume_budget() - 0.4 * 5e-5).abs() < 1e-18);
        assert_eq!(m.assemblers.len(), 2);
    }

    #[test]
    fn rejects_bad_problems() {
        let mut p = RegulatorProblem::switch();
        p.weights[0] = -1.0;
        assert!(p.validate().is_err());
        let mut p = RegulatorProblem::switch();
        p.cases.pop();
        assert!(p.validate().is_err());
        let mut p = RegulatorProblem::switch();
        p.cases[0].rises.insert("nowhere".into(), 1.0);
        assert!(p.validate().is_err());
        let mut p = RegulatorProblem::switch();
        p.volume_fraction = 1.0;
        assert!(p.validate().is_err());
        let mut p = RegulatorProblem::triode(true);
        p.geometry.terminals.retain(|t| t.name != GATE);
        assert!(p.validate().is_err());
    }
}
