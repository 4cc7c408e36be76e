//! Staggered optimization loop: filter and project the design, solve every
//! target point by load continuation, evaluate objective and volume
//! constraint, solve the adjoints and update the free volume fractions
//! with MMA.

use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::CaseSystem;
use crate::error::{Error, Result};
use crate::mma::{Mma, MmaSettings};
use crate::nlsolve::sparse::LinearSolver;
use crate::nlsolve::{continuation_solve, converged_tangent};
use crate::regularize::{DesignField, DesignFields};
use crate::sensitivity::{adjoint_solve, design_gradient, fd_gradient_check, CaseAdjoint, GradCheckReport};

use super::objective::{evaluate_objective, volume_constraint};
use super::regulator::{RegulatorModel, ANODE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSettings {
    pub max_iterations: usize,
    /// Stop once `β = β_max` and the largest design change falls below this.
    pub min_change: f64,
    pub mma: MmaSettings,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            min_change: 1e-3,
            mma: MmaSettings::default(),
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || !(self.min_change >= 0.0) {
            return Err(Error::invalid("optimizer needs a positive iteration budget and min_change >= 0"));
        }
        self.mma.validate()
    }
}

/// Everything computed for one design.
#[derive(Debug, Clone)]
pub struct DesignResponse {
    pub beta: f64,
    pub fields: DesignFields,
    /// Converged state of every target point.
    pub states: Vec<Vec<f64>>,
    pub objective: f64,
    /// `dC/dz` over all elements, when requested.
    pub objective_gradient: Option<Vec<f64>>,
    /// `g = ∫ H_{β,η_d}(ζ) dV − V*`.
    pub volume: f64,
    pub volume_gradient: Vec<f64>,
    /// Average normal flux on the anode per target point.
    pub anode_flux: Vec<f64>,
}

/// Linear solvers kept across design iterations, one per load case.
pub struct CaseSolvers(Vec<Mutex<LinearSolver>>);

impl CaseSolvers {
    pub fn new(model: &RegulatorModel) -> Self {
        Self(
            model
                .assemblers
                .iter()
                .map(|a| Mutex::new(LinearSolver::new(a.dofs.block_map())))
                .collect(),
        )
    }
}

impl RegulatorModel {
    /// Solves case `k` from the reference state to `t = 1`, retrying with
    /// halved continuation steps on failure.
    pub fn solve_case(&self, k: usize, rho: &[f64], solver: &mut LinearSolver, max_refinements: u32) -> Result<Vec<f64>> {
        let assembler = &self.assemblers[k];
        let system = CaseSystem { assembler, rho };
        let mut last = None;
        for refinement in 0..=max_refinements {
            let path = self.case_path(refinement);
            match continuation_solve(
                &system,
                &assembler.initial_state(),
                &path,
                &self.problem.newton,
                solver,
                &mut |_, _| Vec::new(),
            ) {
                Ok(mut res) => return Ok(res.stops.pop().expect("stop at t = 1").1),
                Err(e @ Error::StepUnderflow { .. }) => {
                    log::warn!("case {} failed (refinement {refinement}): {e}", k + 1);
                    last = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    /// Solves all cases for `z` at projection sharpness `beta` and evaluates
    /// objective, volume constraint and optionally the adjoint gradient.
    pub fn respond(&self, z: &[f64], beta: f64, gradient: bool, solvers: &CaseSolvers) -> Result<DesignResponse> {
        let proj = &self.problem.projection;
        let fields = self.pipeline.evaluate(z, Some((beta, proj.eta)))?;
        let refinements = self.problem.case_retries;
        let states: Vec<Vec<f64>> = (0..self.assemblers.len())
            .into_par_iter()
            .map(|k| {
                let mut solver = solvers.0[k].lock().expect("solver lock");
                self.solve_case(k, &fields.rho, &mut solver, refinements)
            })
            .collect::<Result<_>>()?;
        let asm: Vec<_> = self.assemblers.iter().collect();
        let refs: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
        let obj = evaluate_objective(self.problem.kind, self.problem.weights, &asm, &refs)?;
        let (volume, volume_gradient) =
            volume_constraint(&self.pipeline, &fields, beta, proj.eta_dilated, self.volume_budget())?;
        let anode_flux = self
            .assemblers
            .iter()
            .zip(&states)
            .map(|(a, s)| a.reaction_flux(s, ANODE).map(|r| r.1))
            .collect::<Result<_>>()?;

        let objective_gradient = if gradient {
            let adjoints: Vec<Vec<f64>> = (0..self.assemblers.len())
                .into_par_iter()
                .map(|k| {
                    let system = CaseSystem {
                        assembler: &self.assemblers[k],
                        rho: &fields.rho,
                    };
                    let mut solver = solvers.0[k].lock().expect("solver lock");
                    let tangent = converged_tangent(&system, &mut solver, &states[k], 1.0)?;
                    adjoint_solve(&tangent, &obj.partials[k])
                })
                .collect::<Result<_>>()?;
            let cases: Vec<CaseAdjoint<'_>> = (0..self.assemblers.len())
                .map(|k| CaseAdjoint {
                    assembler: &self.assemblers[k],
                    state: &states[k],
                    adjoint: &adjoints[k],
                })
                .collect();
            Some(design_gradient(&self.pipeline, &fields, &cases, None)?)
        } else {
            None
        };

        Ok(DesignResponse {
            beta,
            fields,
            states,
            objective: obj.value,
            objective_gradient,
            volume,
            volume_gradient,
            anode_flux,
        })
    }
}

/// One row of the optimization log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub objective: f64,
    /// `g / |Ω|`.
    pub volume: f64,
    pub beta: f64,
    /// Largest change of the free volume fractions in the update that
    /// produced this design (0 at the start).
    pub change: f64,
    /// `∫ 4 ζ̄ (1 − ζ̄) dV / |Ω|`.
    pub discreteness: f64,
    /// Average anode flux per target point.
    pub anode_flux: Vec<f64>,
}

pub fn write_history(history: &[IterationLog], mut w: impl std::io::Write) -> std::io::Result<()> {
    let ncases = history.first().map_or(0, |h| h.anode_flux.len());
    let flux_cols: String = (1..=ncases).map(|i| format!(",anode_flux_{i}")).collect();
    writeln!(w, "iteration,objective,volume,beta,change,discreteness{flux_cols}")?;
    for h in history {
        write!(
            w,
            "{},{:.10e},{:.10e},{},{:.6e},{:.6e}",
            h.iteration, h.objective, h.volume, h.beta, h.change, h.discreteness
        )?;
        for q in &h.anode_flux {
            write!(w, ",{q:.10e}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Passed to the per-iteration callback.
pub struct IterationReport<'a> {
    pub log: &'a IterationLog,
    pub design: &'a DesignField,
    pub response: &'a DesignResponse,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    /// Last evaluated design.
    pub design: DesignField,
    /// Projection sharpness of the last evaluation.
    pub beta: f64,
    pub history: Vec<IterationLog>,
    /// Set when a primal solve failed for good; the history stays valid.
    pub aborted: Option<String>,
    /// True when the design-change criterion ended the loop.
    pub converged: bool,
}

/// Runs the optimization loop from the model's initial design.
pub fn optimize(
    model: &RegulatorModel,
    settings: &OptimizerSettings,
    on_iteration: &mut dyn FnMut(&IterationReport<'_>),
) -> Result<OptimizationResult> {
    optimize_from(model, model.design.clone(), settings, on_iteration)
}

pub fn optimize_from(
    model: &RegulatorModel,
    mut design: DesignField,
    settings: &OptimizerSettings,
    on_iteration: &mut dyn FnMut(&IterationReport<'_>),
) -> Result<OptimizationResult> {
    settings.validate()?;
    design.validate()?;
    if design.z.len() != model.mesh.num_elements() {
        return Err(Error::invalid("design does not match the mesh"));
    }
    let schedule = model.problem.projection.schedule;
    let free = design.free_indices();
    let n = free.len();
    if n == 0 {
        return Err(Error::invalid("design has no free elements"));
    }
    let mut mma = Mma::new(n, 1, vec![0.0; n], vec![1.0; n], settings.mma)?;
    let solvers = CaseSolvers::new(model);
    let area = model.mesh.area();
    let budget = model.volume_budget();
    let mut result = OptimizationResult {
        design: design.clone(),
        beta: schedule.beta(0),
        history: Vec::new(),
        aborted: None,
        converged: false,
    };
    let mut change = 0.0;
    for it in 0..settings.max_iterations {
        let beta = schedule.beta(it);
        let response = match model.respond(&design.z, beta, true, &solvers) {
            Ok(r) => r,
            Err(e) if e.is_recoverable() || matches!(e, Error::StepUnderflow { .. }) => {
                log::error!("iteration {it}: primal solve failed, stopping: {e}");
                result.aborted = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        };
        let entry = IterationLog {
            iteration: it,
            objective: response.objective,
            volume: response.volume / area,
            beta,
            change,
            discreteness: model.pipeline.discreteness(&response.fields),
            anode_flux: response.anode_flux.clone(),
        };
        log::info!(
            "iter {it:4}  C = {:+.6e}  g/|Ω| = {:+.3e}  β = {beta:>4}  change = {change:.3e}",
            entry.objective,
            entry.volume
        );
        on_iteration(&IterationReport {
            log: &entry,
            design: &design,
            response: &response,
        });
        result.history.push(entry);
        result.design = design.clone();
        result.beta = beta;

        if beta >= schedule.beta_max && it > 0 && change < settings.min_change {
            result.converged = true;
            break;
        }
        if it + 1 == settings.max_iterations {
            break;
        }
        let grad = response.objective_gradient.as_ref().expect("gradient requested");
        let df0: Vec<f64> = free.iter().map(|&e| grad[e]).collect();
        let dg: Vec<f64> = free.iter().map(|&e| response.volume_gradient[e] / budget).collect();
        let x = design.free_values();
        let step = mma.update(&x, &df0, &[response.volume / budget], &[dg])?;
        change = step.x.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        design.set_free_values(&step.x)?;
    }
    Ok(result)
}

/// Compares the adjoint design gradient of `model` at `z` with central
/// differences of the objective at the `probes` elements.
pub fn check_gradient(
    model: &RegulatorModel,
    z: &[f64],
    beta: f64,
    probes: &[usize],
    step: f64,
) -> Result<GradCheckReport> {
    let solvers = CaseSolvers::new(model);
    let response = model.respond(z, beta, true, &solvers)?;
    let gradient = response.objective_gradient.expect("gradient requested");
    let mut objective = |x: &[f64]| model.respond(x, beta, false, &solvers).map(|r| r.objective);
    fd_gradient_check(&mut objective, z, &gradient, probes, step)
}
