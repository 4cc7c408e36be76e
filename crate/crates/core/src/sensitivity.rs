//! Adjoint sensitivities of state-dependent functionals and a central
//! finite-difference checker.

use std::io::Write;

use rand::seq::index::sample;
use rand::Rng;

use crate::assembly::Assembler;
use crate::error::{Error, Result};
use crate::nlsolve::sparse::Factorization;
use crate::regularize::{DesignFields, DesignPipeline};

/// Solves `Jᵀ μ = −∂C/∂a` with the factorized tangent at the converged state.
pub fn adjoint_solve(tangent: &Factorization, dc_da: &[f64]) -> Result<Vec<f64>> {
    if dc_da.iter().all(|v| *v == 0.0) {
        return Ok(vec![0.0; dc_da.len()]);
    }
    let rhs: Vec<f64> = dc_da.iter().map(|v| -v).collect();
    tangent.solve_transpose(&rhs)
}

/// One load case's contribution to the design gradient.
pub struct CaseAdjoint<'a> {
    pub assembler: &'a Assembler,
    pub state: &'a [f64],
    pub adjoint: &'a [f64],
}

/// `dC/dz` from the explicit density dependence (if any) and the adjoint
/// terms `μᵀ ∂R/∂ρ` of every case, chained through projection and filter.
pub fn design_gradient(
    pipeline: &DesignPipeline,
    fields: &DesignFields,
    cases: &[CaseAdjoint<'_>],
    explicit_dc_drho: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let mut dc_drho = match explicit_dc_drho {
        Some(d) => d.to_vec(),
        None => vec![0.0; fields.rho.len()],
    };
    // summed in case order for reproducibility
    for case in cases {
        let d = case.assembler.design_derivative(case.state, &fields.rho, case.adjoint)?;
        dc_drho.iter_mut().zip(&d).for_each(|(a, b)| *a += b);
    }
    pipeline.chain(fields, &dc_drho)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckRow {
    pub element: usize,
    pub finite_difference: f64,
    pub adjoint: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub step: f64,
    pub rows: Vec<GradCheckRow>,
    /// Probes whose perturbed solves failed, with the reason.
    pub skipped: Vec<(usize, String)>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.rows.iter().map(|r| r.rel_error).fold(0.0, f64::max)
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "element,fd,adjoint,rel_err")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{:.12e},{:.12e},{:.6e}",
                r.element, r.finite_difference, r.adjoint, r.rel_error
            )?;
        }
        for (e, reason) in &self.skipped {
            writeln!(w, "# skipped element {e}: {reason}")?;
        }
        Ok(())
    }
}

/// Relative difference with the larger magnitude as reference.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Picks `n` distinct probe elements among `candidates`.
pub fn pick_probes(candidates: &[usize], n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let n = n.min(candidates.len());
    let mut picked: Vec<usize> = sample(rng, candidates.len(), n).into_iter().map(|k| candidates[k]).collect();
    picked.sort_unstable();
    picked
}

/// Central differences `(C(z + Δz e) − C(z − Δz e)) / 2Δz` at the probe
/// elements, compared against `gradient`. A failed evaluation skips the probe.
pub fn fd_gradient_check(
    objective: &mut dyn FnMut(&[f64]) -> Result<f64>,
    z: &[f64],
    gradient: &[f64],
    probes: &[usize],
    step: f64,
) -> Result<GradCheckReport> {
    if !(step > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    if z.len() != gradient.len() {
        return Err(Error::invalid("design and gradient differ in length"));
    }
    let mut report = GradCheckReport {
        step,
        ..Default::default()
    };
    for &e in probes {
        if e >= z.len() {
            return Err(Error::invalid(format!("probe element {e} out of range")));
        }
        let mut eval = |s: f64| {
            let mut p = z.to_vec();
            p[e] += s;
            objective(&p)
        };
        match (eval(step), eval(-step)) {
            (Ok(fp), Ok(fm)) => {
                let fd = (fp - fm) / (2.0 * step);
                report.rows.push(GradCheckRow {
                    element: e,
                    finite_difference: fd,
                    adjoint: gradient[e],
                    rel_error: relative_error(fd, gradient[e]),
                });
            }
            (Err(err), _) | (_, Err(err)) => {
                log::warn!("gradient probe at element {e} skipped: {err}");
                report.skipped.push((e, err.to_string()));
            }
        }
    }
    Ok(report)
}
