//! Newton's method with adaptive load continuation.

pub mod sparse;

use std::io::Write;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{DofBlock, Error, Result};
use sparse::{norm, BlockMap, Factorization, LinearSolver, SparseMatrix};

/// A parameterized nonlinear system `R(a; t) = 0`.
pub trait NonlinearSystem {
    fn num_dofs(&self) -> usize;
    fn residual(&self, state: &[f64], t: f64) -> Result<Vec<f64>>;
    fn residual_and_tangent(&self, state: &[f64], t: f64) -> Result<(Vec<f64>, SparseMatrix)>;
    /// Dof blocks with the absolute residual scale used for convergence.
    fn blocks(&self) -> Vec<(DofBlock, Range<usize>, f64)>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonSettings {
    pub tol_rel: f64,
    pub tol_abs: f64,
    pub max_iterations: usize,
    /// Abort once the residual exceeds this multiple of the largest residual
    /// seen in the first iteration.
    pub divergence_factor: f64,
    /// Additional iterations after convergence (tightens states for
    /// finite-difference checks).
    pub extra_iterations: usize,
    /// Backtrack on the scaled residual norm.
    pub line_search: bool,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            tol_rel: 1e-8,
            tol_abs: 1e-8,
            max_iterations: 25,
            divergence_factor: 1e8,
            extra_iterations: 0,
            line_search: true,
        }
    }
}

impl NewtonSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_rel > 0.0 && self.tol_abs > 0.0) || self.max_iterations == 0 {
            return Err(Error::invalid("newton tolerances and iteration limit must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct NewtonReport {
    /// Number of linear solves performed.
    pub iterations: usize,
    /// Global residual norm before every iteration and at the end.
    pub residuals: Vec<f64>,
    /// Step-length halvings.
    pub backtracks: usize,
}

/// Shortest fraction of a Newton correction tried before giving up.
const MIN_STEP_LENGTH: f64 = 1.0 / 1024.0;

fn block_norms(r: &[f64], blocks: &[(DofBlock, Range<usize>, f64)]) -> Vec<f64> {
    blocks.iter().map(|(_, range, _)| norm(&r[range.clone()])).collect()
}

/// Scaled residual merit `Σ_b (‖R_b‖ / scale_b)²`.
fn merit(r: &[f64], blocks: &[(DofBlock, Range<usize>, f64)]) -> f64 {
    blocks
        .iter()
        .map(|(_, range, scale)| (norm(&r[range.clone()]) / scale).powi(2))
        .sum()
}

/// Newton iteration `a ← a − α da`. With `line_search` the step length is
/// halved until the scaled residual decreases; inverted trial states are
/// always rejected. When no tried length decreases the residual, the
/// shortest admissible one is taken.
pub fn newton_solve(
    system: &dyn NonlinearSystem,
    solver: &mut LinearSolver,
    state: &mut Vec<f64>,
    t: f64,
    settings: &NewtonSettings,
) -> Result<NewtonReport> {
    if state.len() != system.num_dofs() {
        return Err(Error::invalid("state length does not match the system"));
    }
    let blocks = system.blocks();
    let mut report = NewtonReport::default();
    let mut peak = vec![0.0f64; blocks.len()];
    let mut first_norm = None;
    let mut extra = 0;
    loop {
        let (r, jac) = system.residual_and_tangent(state, t)?;
        let rn = norm(&r);
        report.residuals.push(rn);
        if !rn.is_finite() {
            return Err(Error::Diverged {
                iteration: report.iterations,
                residual: rn,
            });
        }
        let first = *first_norm.get_or_insert(rn);
        if rn > settings.divergence_factor * first.max(f64::MIN_POSITIVE) && report.iterations > 0 {
            return Err(Error::Diverged {
                iteration: report.iterations,
                residual: rn,
            });
        }
        let norms = block_norms(&r, &blocks);
        for (p, n) in peak.iter_mut().zip(&norms) {
            *p = p.max(*n);
        }
        let converged = norms
            .iter()
            .zip(&peak)
            .zip(&blocks)
            .all(|((n, p), (_, _, scale))| *n <= settings.tol_rel * p + settings.tol_abs * scale);
        if converged {
            if extra >= settings.extra_iterations {
                return Ok(report);
            }
            extra += 1;
        }
        if report.iterations >= settings.max_iterations + extra {
            return Err(Error::NotConverged {
                iterations: report.iterations,
                residual: rn,
            });
        }
        let fact = solver.factorize(&jac)?;
        let da = fact.solve(&r)?;
        let m0 = merit(&r, &blocks);
        let mut alpha = 1.0;
        let mut fallback: Option<Vec<f64>> = None;
        let mut accepted: Option<Vec<f64>> = None;
        let mut inverted = None;
        while alpha >= MIN_STEP_LENGTH {
            let trial: Vec<f64> = state.iter().zip(&da).map(|(a, d)| a - alpha * d).collect();
            match system.residual(&trial, t) {
                Ok(rt) => {
                    if !settings.line_search || merit(&rt, &blocks) <= (1.0 - 1e-4 * alpha) * m0 {
                        accepted = Some(trial);
                        break;
                    }
                    fallback = Some(trial);
                }
                Err(e @ Error::InvertedElement { .. }) => inverted = Some(e),
                Err(e) => return Err(e),
            }
            alpha *= 0.5;
            report.backtracks += 1;
        }
        match accepted.or(fallback) {
            Some(next) => *state = next,
            None => return Err(inverted.expect("no admissible step implies an inverted trial")),
        }
        report.iterations += 1;
    }
}

/// Solves at `t` and returns the factorization of the tangent at the
/// converged state, for adjoint solves.
pub fn converged_tangent(
    system: &dyn NonlinearSystem,
    solver: &mut LinearSolver,
    state: &[f64],
    t: f64,
) -> Result<Factorization> {
    let (_, jac) = system.residual_and_tangent(state, t)?;
    solver.factorize(&jac)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuationPath {
    /// Requested output stops in `(0, 1]`, sorted.
    pub stops: Vec<f64>,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// Step growth factor after an easy step.
    pub growth: f64,
    /// Steps converging within this many iterations count as easy.
    pub easy_iterations: usize,
}

impl Default for ContinuationPath {
    fn default() -> Self {
        Self {
            stops: vec![1.0],
            initial_step: 0.05,
            min_step: 1e-4,
            max_step: 0.25,
            growth: 1.5,
            easy_iterations: 4,
        }
    }
}

impl ContinuationPath {
    pub fn with_stops(stops: Vec<f64>) -> Self {
        Self {
            stops,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stops.is_empty() {
            return Err(Error::invalid("continuation needs at least one stop"));
        }
        if self.stops.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("continuation stops must be strictly increasing"));
        }
        if self.stops.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::invalid("continuation stops must lie in [0, 1]"));
        }
        if !(self.min_step > 0.0 && self.initial_step >= self.min_step && self.max_step >= self.initial_step) {
            return Err(Error::invalid("continuation steps must satisfy 0 < min <= initial <= max"));
        }
        if !(self.growth >= 1.0) {
            return Err(Error::invalid("continuation growth factor must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub step: usize,
    pub t: f64,
    pub iteration: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ContinuationResult {
    /// `(t, state)` at every requested stop.
    pub stops: Vec<(f64, Vec<f64>)>,
    /// `(t, observed quantities)` at every accepted step, including `t = 0`.
    pub samples: Vec<(f64, Vec<f64>)>,
    pub log: Vec<IterationRecord>,
    pub rejected_steps: usize,
}

/// Advances `t` from 0 through all stops, halving the step on recoverable
/// Newton failures. `observe` is called at every accepted state.
pub fn continuation_solve(
    system: &dyn NonlinearSystem,
    state0: &[f64],
    path: &ContinuationPath,
    settings: &NewtonSettings,
    solver: &mut LinearSolver,
    observe: &mut dyn FnMut(f64, &[f64]) -> Vec<f64>,
) -> Result<ContinuationResult> {
    path.validate()?;
    let mut out = ContinuationResult::default();
    let mut state = state0.to_vec();
    let mut step_no = 0;
    let record = |out: &mut ContinuationResult, step: usize, t: f64, rep: &NewtonReport| {
        for (k, r) in rep.residuals.iter().enumerate() {
            out.log.push(IterationRecord {
                step,
                t,
                iteration: k,
                residual: *r,
            });
        }
    };

    let rep = newton_solve(system, solver, &mut state, 0.0, settings).map_err(|e| Error::StepUnderflow {
        last_good_t: 0.0,
        step: 0.0,
        source: Box::new(e),
    })?;
    record(&mut out, step_no, 0.0, &rep);
    out.samples.push((0.0, observe(0.0, &state)));
    let mut stops = path.stops.iter().copied().peekable();
    if stops.peek() == Some(&0.0) {
        out.stops.push((0.0, state.clone()));
        stops.next();
    }

    let mut t = 0.0;
    let mut dt = path.initial_step;
    while let Some(&target) = stops.peek() {
        let next = (t + dt).min(target);
        // snap tiny remainders onto the stop
        let next = if target - next < 1e-12 { target } else { next };
        let mut trial = state.clone();
        match newton_solve(system, solver, &mut trial, next, settings) {
            Ok(rep) => {
                step_no += 1;
                record(&mut out, step_no, next, &rep);
                state = trial;
                t = next;
                out.samples.push((t, observe(t, &state)));
                if t == target {
                    out.stops.push((t, state.clone()));
                    stops.next();
                }
                if rep.iterations <= path.easy_iterations {
                    dt = (dt * path.growth).min(path.max_step);
                }
            }
            Err(e) if e.is_recoverable() => {
                out.rejected_steps += 1;
                log::debug!("continuation step to t = {next:.5} rejected: {e}");
                dt = 0.5 * (next - t);
                if dt < path.min_step {
                    return Err(Error::StepUnderflow {
                        last_good_t: t,
                        step: dt,
                        source: Box::new(e),
                    });
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Writes an iteration log as CSV (`step,t,iteration,residual`).
pub fn write_iteration_log(log: &[IterationRecord], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "step,t,iteration,residual")?;
    for r in log {
        writeln!(w, "{},{:.10e},{},{:.10e}", r.step, r.t, r.iteration, r.residual)?;
    }
    Ok(())
}

/// Convergence-rate estimate `log(r_{k+1}/r_k) / log(r_k/r_{k-1})` over the
/// last three residuals of a Newton history.
pub fn convergence_order(residuals: &[f64]) -> Option<f64> {
    let n = residuals.len();
    if n < 3 {
        return None;
    }
    let (a, b, c) = (residuals[n - 3], residuals[n - 2], residuals[n - 1]);
    if !(a > 0.0 && b > 0.0 && c > 0.0) {
        return None;
    }
    Some((c / b).ln() / (b / a).ln())
}

pub fn block_map(blocks: &[(DofBlock, Range<usize>, f64)]) -> BlockMap {
    BlockMap {
        blocks: blocks.iter().map(|(b, r, _)| (*b, r.clone())).collect(),
    }
}
