//! Response curves of a fixed design: terminal heat flows while one
//! terminal temperature is swept.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::assembly::{Assembler, CaseSystem, Ramp};
use crate::error::{Error, Result};
use crate::nlsolve::sparse::LinearSolver;
use crate::nlsolve::{continuation_solve, ContinuationPath, NewtonSettings};

use super::regulator::{RegulatorKind, RegulatorModel, ANODE, CATHODE, GATE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    /// Number of equal increments of the swept temperature.
    pub points: usize,
    /// Largest swept rise (K above `θ_o`); `None` uses the kind's default.
    pub max_rise: Option<f64>,
    /// Anode temperature held during a triode sweep.
    pub triode_anode: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            points: 20,
            max_rise: None,
            triode_anode: 380.0,
        }
    }
}

impl SweepSettings {
    fn max_rise(&self, kind: RegulatorKind) -> f64 {
        self.max_rise.unwrap_or(match kind {
            RegulatorKind::Switch => 600.0,
            RegulatorKind::Diode => 400.0,
            RegulatorKind::Triode => 100.0,
        })
    }
}

/// Table with one row per converged sweep point.
///
/// Columns: the swept parameter, then `Q_<terminal>` (W/m) and
/// `q_<terminal>` (W/m², average) for every terminal, then `Q_sum`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseCurve {
    pub parameter: String,
    pub terminals: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Failure message when a sweep stopped early.
    pub failures: Vec<String>,
}

impl ResponseCurve {
    pub fn columns(&self) -> Vec<String> {
        let mut c = vec![self.parameter.clone()];
        c.extend(self.terminals.iter().map(|t| format!("Q_{t}")));
        c.extend(self.terminals.iter().map(|t| format!("q_{t}")));
        c.push("Q_sum".into());
        c
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns().iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Row whose parameter equals `p` (to 1e-9 relative).
    pub fn row_at(&self, p: f64) -> Option<&[f64]> {
        self.rows
            .iter()
            .find(|r| (r[0] - p).abs() <= 1e-9 * p.abs().max(1.0))
            .map(|r| r.as_slice())
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{}", self.columns().join(","))?;
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:.10e}")).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        for f in &self.failures {
            writeln!(w, "# sweep stopped: {f}")?;
        }
        Ok(())
    }
}

fn measure(asm: &Assembler, state: &[f64], terminals: &[String], parameter: f64) -> Result<Vec<f64>> {
    let mut totals = Vec::new();
    let mut averages = Vec::new();
    for t in terminals {
        let (q, avg) = asm.reaction_flux(state, t)?;
        totals.push(q);
        averages.push(avg);
    }
    let sum = totals.iter().sum();
    let mut row = vec![parameter];
    row.extend(totals);
    row.extend(averages);
    row.push(sum);
    Ok(row)
}

struct Sweeper<'a> {
    model: &'a RegulatorModel,
    rho: &'a [f64],
    newton: NewtonSettings,
    terminals: Vec<String>,
}

impl Sweeper<'_> {
    /// Ramps the `held` terminals to their values (others at `θ_o`), then
    /// sweeps `swept` from 0 to `target` in `points` increments. Rows carry
    /// `sign · rise` as parameter.
    fn run(
        &self,
        held: &[(&str, f64)],
        swept: &str,
        target: f64,
        points: usize,
        sign: f64,
        curve: &mut ResponseCurve,
    ) -> Result<()> {
        let mut state = self.model.assemblers[0].initial_state();
        if held.iter().any(|(_, v)| *v != 0.0) {
            let rises: Vec<(String, f64, Ramp)> =
                held.iter().map(|(k, v)| (k.to_string(), *v, Ramp::Scaled)).collect();
            let asm = self.model.assembler(&rises)?;
            let mut solver = LinearSolver::new(asm.dofs.block_map());
            let path = ContinuationPath {
                stops: vec![1.0],
                ..self.model.problem.continuation.clone()
            };
            let sys = CaseSystem { assembler: &asm, rho: self.rho };
            match continuation_solve(&sys, &state, &path, &self.newton, &mut solver, &mut |_, _| Vec::new()) {
                Ok(mut r) => state = r.stops.pop().expect("final stop").1,
                Err(e @ Error::StepUnderflow { .. }) => {
                    curve.failures.push(format!("ramping held terminals: {e}"));
                    return Ok(());
                }
                Err(e) => return Err(e),
            }
        }
        let mut rises: Vec<(String, f64, Ramp)> =
            held.iter().map(|(k, v)| (k.to_string(), *v, Ramp::Fixed)).collect();
        rises.push((swept.to_string(), target, Ramp::Scaled));
        let asm = self.model.assembler(&rises)?;
        let mut solver = LinearSolver::new(asm.dofs.block_map());
        let dt = 1.0 / points as f64;
        let stops: Vec<f64> = (0..=points).map(|k| k as f64 / points as f64).collect();
        let path = ContinuationPath {
            stops: stops.clone(),
            initial_step: dt,
            max_step: dt,
            min_step: self.model.problem.continuation.min_step.min(dt),
            ..self.model.problem.continuation.clone()
        };
        let sys = CaseSystem { assembler: &asm, rho: self.rho };
        let mut err = None;
        let mut observe = |t: f64, s: &[f64]| -> Vec<f64> {
            if stops.contains(&t) {
                match measure(&asm, s, &self.terminals, sign * t * target) {
                    Ok(row) => curve.rows.push(row),
                    Err(e) => err = Some(e),
                }
            }
            Vec::new()
        };
        let res = continuation_solve(&sys, &state, &path, &self.newton, &mut solver, &mut observe);
        if let Some(e) = err {
            return Err(e);
        }
        match res {
            Ok(_) => Ok(()),
            Err(e @ Error::StepUnderflow { .. }) => {
                curve.failures.push(format!("sweeping '{swept}': {e}"));
                Ok(())
            }
            Err(e) => Err(e),
        }
    }
}

/// Sweeps the kind's control temperature for the density field `rho`:
/// the anode (switch), the terminal temperature difference with both
/// polarities (diode) or the gate at a held anode temperature (triode).
pub fn response_curve(model: &RegulatorModel, rho: &[f64], settings: &SweepSettings) -> Result<ResponseCurve> {
    if settings.points == 0 {
        return Err(Error::invalid("sweep needs at least one increment"));
    }
    let kind = model.problem.kind;
    let top = settings.max_rise(kind);
    if !(top > 0.0) {
        return Err(Error::invalid("sweep range must be positive"));
    }
    // one extra iteration after convergence keeps the heat balance at roundoff
    let newton = NewtonSettings {
        extra_iterations: model.problem.newton.extra_iterations.max(1),
        ..model.problem.newton
    };
    let sweeper = Sweeper {
        model,
        rho,
        newton,
        terminals: model.problem.geometry.terminal_names(),
    };
    let parameter = match kind {
        RegulatorKind::Switch => "theta_1",
        RegulatorKind::Diode => "delta_theta",
        RegulatorKind::Triode => "theta_3",
    };
    let mut curve = ResponseCurve {
        parameter: parameter.into(),
        terminals: sweeper.terminals.clone(),
        rows: Vec::new(),
        failures: Vec::new(),
    };
    let n = settings.points;
    match kind {
        RegulatorKind::Switch => sweeper.run(&[], ANODE, top, n, 1.0, &mut curve)?,
        RegulatorKind::Diode => {
            sweeper.run(&[], CATHODE, top, n, -1.0, &mut curve)?;
            // the reverse sweep also recorded ΔΘ = 0
            curve.rows.retain(|r| r[0] != 0.0);
            sweeper.run(&[], ANODE, top, n, 1.0, &mut curve)?;
            curve.rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
        }
        RegulatorKind::Triode => sweeper.run(&[(ANODE, settings.triode_anode)], GATE, top, n, 1.0, &mut curve)?,
    }
    Ok(curve)
}
