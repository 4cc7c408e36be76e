//! Rod contact study: displacement sweeps of the 2D rod compared against the
//! 1D conduction model with a contact resistance taken from the measured
//! void thickness.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::CaseSystem;
use crate::error::{Error, Result};
use crate::material::{BaseMaterial, ErsatzScaling};
use crate::nlsolve::sparse::LinearSolver;
use crate::nlsolve::{continuation_solve, ContinuationPath, NewtonSettings, NonlinearSystem};
use crate::problems::rod::{build_rod, contact_resistance, Interface, ProfilePoint, RodGeometry, RodLoading, RodModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RodStudyConfig {
    pub delta_kappas: Vec<f64>,
    pub interfaces: Vec<Interface>,
    pub geometry: RodGeometry,
    pub loading: RodLoading,
    pub material: BaseMaterial,
    pub ersatz: ErsatzScaling,
    /// Number of equally spaced reporting stops on `ū ∈ [0, ū_max]`.
    pub stops: usize,
    pub newton: NewtonSettings,
    pub continuation: ContinuationPath,
}

impl Default for RodStudyConfig {
    fn default() -> Self {
        Self {
            delta_kappas: vec![1e-4, 1e-3, 1e-2],
            interfaces: vec![Interface::Sharp],
            geometry: RodGeometry::default(),
            loading: RodLoading::default(),
            material: BaseMaterial::default(),
            // the rod void closes to a thin sliver; a stiffer regularization
            // than the regulator default keeps Newton converging through contact
            ersatz: ErsatzScaling {
                kr_bar: 1.0e-5,
                ..Default::default()
            },
            stops: 12,
            newton: NewtonSettings::default(),
            continuation: ContinuationPath {
                initial_step: 1.0 / 24.0,
                max_step: 1.0 / 12.0,
                min_step: 1e-4,
                ..Default::default()
            },
        }
    }
}

impl RodStudyConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.material.validate()?;
        self.ersatz.validate()?;
        self.newton.validate()?;
        if self.delta_kappas.is_empty() || self.delta_kappas.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) {
            return Err(Error::invalid("delta_kappas must be a non-empty list in (0, 1]"));
        }
        if self.interfaces.is_empty() {
            return Err(Error::invalid("at least one interface mode is required"));
        }
        if self.stops == 0 {
            return Err(Error::invalid("rod study needs at least one stop"));
        }
        let u = self.loading.displacement;
        if !(u <= 0.0 && u >= -0.5 * self.geometry.length) {
            return Err(Error::invalid("rod displacement must lie in [-L/2, 0]"));
        }
        Ok(())
    }

    /// Continuation parameters of the reporting stops.
    pub fn stop_parameters(&self) -> Vec<f64> {
        (1..=self.stops).map(|k| k as f64 / self.stops as f64).collect()
    }
}

/// Measurements at one reporting stop.
#[derive(Debug, Clone)]
pub struct RodStop {
    pub t: f64,
    pub displacement: f64,
    /// Average normal flux on the heated end (W/m²); negative for inflow.
    pub flux: f64,
    pub pressure: f64,
    pub void_length: f64,
    /// `R_th` from the measured void length; `None` once the void has vanished.
    pub contact_resistance: Option<f64>,
    /// Flux of the 1D model with that resistance.
    pub analytic_flux: Option<f64>,
    pub profile: Vec<ProfilePoint>,
    /// Analytical temperature at every profile point, when available.
    pub analytic_profile: Option<Vec<f64>>,
    /// Largest deviation at solid centerline nodes, relative to the span.
    pub profile_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RodCurve {
    pub delta_kappa: f64,
    pub interface: Interface,
    pub stops: Vec<RodStop>,
    /// `(ū, flux)` at every accepted continuation step, starting at 0.
    pub samples: Vec<(f64, f64)>,
    /// Newton failure with the last converged displacement.
    pub failure: Option<(f64, String)>,
}

impl RodCurve {
    pub fn stop_at(&self, displacement: f64) -> Option<&RodStop> {
        self.stops
            .iter()
            .find(|s| (s.displacement - displacement).abs() <= 1e-9 * displacement.abs().max(1e-12))
    }
}

#[derive(Debug, Clone)]
pub struct RodStudy {
    pub curves: Vec<RodCurve>,
}

impl RodStudy {
    pub fn curve(&self, delta_kappa: f64, interface: &Interface) -> Option<&RodCurve> {
        self.curves
            .iter()
            .find(|c| c.delta_kappa == delta_kappa && &c.interface == interface)
    }
}

fn measure(model: &RodModel, t: f64, state: &[f64], delta_kappa: f64) -> Result<RodStop> {
    let profile = model.centerline_profile(state);
    let void_length = model.void_length(state)?;
    let (a, b) = model.interface_positions()?;
    let mut stop = RodStop {
        t,
        displacement: t * model.loading.displacement,
        flux: model.end_flux(state)?,
        pressure: model.end_pressure(state)?,
        void_length,
        contact_resistance: None,
        analytic_flux: None,
        analytic_profile: None,
        profile_error: None,
        profile: Vec::new(),
    };
    if void_length > 0.0 {
        let r = contact_resistance(void_length, delta_kappa, model.assembler.base.conductivity)?;
        let sol = model.analytic(t, r)?;
        let theta: Vec<f64> = profile.iter().map(|p| sol.temperature(p.x)).collect();
        let span = (model.loading.end_temperature - model.loading.ambient).abs();
        let err = profile
            .iter()
            .zip(&theta)
            .filter(|(p, _)| p.reference_x <= a || p.reference_x >= b)
            .map(|(p, th)| (p.theta - th).abs() / span)
            .fold(0.0, f64::max);
        stop.contact_resistance = Some(r);
        stop.analytic_flux = Some(sol.flux());
        stop.analytic_profile = Some(theta);
        stop.profile_error = Some(err);
    }
    stop.profile = profile;
    Ok(stop)
}

/// Sweeps one rod; Newton failure ends the sweep and is recorded.
pub fn run_rod_case(cfg: &RodStudyConfig, delta_kappa: f64, interface: Interface) -> Result<RodCurve> {
    let model = build_rod(cfg.geometry, cfg.loading, &cfg.material, delta_kappa, &cfg.ersatz, interface)?;
    let system = CaseSystem {
        assembler: &model.assembler,
        rho: &model.fields.rho,
    };
    let path = ContinuationPath {
        stops: cfg.stop_parameters(),
        ..cfg.continuation.clone()
    };
    let stop_ts = path.stops.clone();
    let mut solver = LinearSolver::new(model.assembler.dofs.block_map());
    let mut curve = RodCurve {
        delta_kappa,
        interface,
        stops: Vec::new(),
        samples: Vec::new(),
        failure: None,
    };
    let mut measure_err: Option<Error> = None;
    let mut observe = |t: f64, state: &[f64]| -> Vec<f64> {
        let flux = model.end_flux(state).unwrap_or(f64::NAN);
        curve.samples.push((t * cfg.loading.displacement, flux));
        if stop_ts.contains(&t) {
            match measure(&model, t, state, delta_kappa) {
                Ok(s) => curve.stops.push(s),
                Err(e) => measure_err = Some(e),
            }
        }
        vec![flux]
    };
    let result = continuation_solve(
        &system,
        &model.assembler.initial_state(),
        &path,
        &cfg.newton,
        &mut solver,
        &mut observe,
    );
    if let Some(e) = measure_err {
        return Err(e);
    }
    match result {
        Ok(_) => {}
        Err(Error::StepUnderflow { last_good_t, source, .. }) => {
            let u = last_good_t * cfg.loading.displacement;
            log::warn!("rod sweep (delta_kappa = {delta_kappa:e}) stopped at u = {u:.5e}: {source}");
            curve.failure = Some((u, source.to_string()));
        }
        Err(e) => return Err(e),
    }
    debug_assert_eq!(system.num_dofs(), model.assembler.num_dofs());
    Ok(curve)
}

/// Runs every `(δ_κ, interface)` combination concurrently.
pub fn run_rod_study(cfg: &RodStudyConfig) -> Result<RodStudy> {
    cfg.validate()?;
    let jobs: Vec<(f64, Interface)> = cfg
        .interfaces
        .iter()
        .flat_map(|i| cfg.delta_kappas.iter().map(move |d| (*d, *i)))
        .collect();
    let curves = jobs
        .par_iter()
        .map(|(d, i)| run_rod_case(cfg, *d, *i))
        .collect::<Result<Vec<_>>>()?;
    Ok(RodStudy { curves })
}

/// `delta_kappa,interface,u_bar,avg_flux`
pub fn write_flux_curves(study: &RodStudy, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "delta_kappa,interface,u_bar,avg_flux")?;
    for c in &study.curves {
        for (u, q) in &c.samples {
            writeln!(w, "{:e},{},{:.10e},{:.10e}", c.delta_kappa, c.interface.label(), u, q)?;
        }
    }
    Ok(())
}

/// `delta_kappa,interface,u_bar,X,x,theta_fem,theta_analytic`
pub fn write_profiles(study: &RodStudy, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "delta_kappa,interface,u_bar,X,x,theta_fem,theta_analytic")?;
    for c in &study.curves {
        for s in &c.stops {
            for (k, p) in s.profile.iter().enumerate() {
                let an = s
                    .analytic_profile
                    .as_ref()
                    .map_or(String::from("nan"), |v| format!("{:.10e}", v[k]));
                writeln!(
                    w,
                    "{:e},{},{:.10e},{:.10e},{:.10e},{:.10e},{}",
                    c.delta_kappa,
                    c.interface.label(),
                    s.displacement,
                    p.reference_x,
                    p.x,
                    p.theta,
                    an
                )?;
            }
        }
    }
    Ok(())
}

/// `delta_kappa,interface,u_bar,pressure,void_length,r_th,conductance,avg_flux,analytic_flux,profile_error`
pub fn write_conductance(study: &RodStudy, mut w: impl Write) -> std::io::Result<()> {
    writeln!(
        w,
        "delta_kappa,interface,u_bar,pressure,void_length,r_th,conductance,avg_flux,analytic_flux,profile_error"
    )?;
    let opt = |v: Option<f64>| v.map_or(String::from("nan"), |x| format!("{x:.10e}"));
    for c in &study.curves {
        for s in &c.stops {
            writeln!(
                w,
                "{:e},{},{:.10e},{:.10e},{:.10e},{},{},{:.10e},{},{}",
                c.delta_kappa,
                c.interface.label(),
                s.displacement,
                s.pressure,
                s.void_length,
                opt(s.contact_resistance),
                opt(s.contact_resistance.map(|r| 1.0 / r)),
                s.flux,
                opt(s.analytic_flux),
                opt(s.profile_error)
            )?;
        }
    }
    Ok(())
}
