//! The four subcommands.

use std::fmt;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use thermoreg::oracle1d::{run_rod_study, write_conductance, write_flux_curves, write_profiles};
use thermoreg::persist::DesignFile;
use thermoreg::problems::optimize::DesignResponse;
use thermoreg::problems::{check_gradient, optimize_from, response_curve, write_history, RegulatorModel};
use thermoreg::regularize::DesignField;
use thermoreg::sensitivity::pick_probes;
use thermoreg::vtk::Snapshot;

use crate::config::{ConfigError, ResolvedConfig};
use crate::output::OutputDir;

/// A solve that produced partial output before failing (exit code 3).
#[derive(Debug)]
pub struct SolverFailure(pub String);

impl fmt::Display for SolverFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for SolverFailure {}

pub fn write_config(cfg: &ResolvedConfig, out: &OutputDir) -> anyhow::Result<()> {
    out.write("config.toml", |w| w.write_all(cfg.text.as_bytes()))
}

pub fn rod_study(cfg: &ResolvedConfig, out: &OutputDir) -> anyhow::Result<()> {
    let study = run_rod_study(&cfg.file.rod)?;
    out.write("rod_flux.csv", |w| write_flux_curves(&study, w))?;
    out.write("rod_profiles.csv", |w| write_profiles(&study, w))?;
    out.write("rod_conductance.csv", |w| write_conductance(&study, w))?;
    let failures: Vec<String> = study
        .curves
        .iter()
        .filter_map(|c| {
            c.failure.as_ref().map(|(u, msg)| {
                format!("δκ = {:e} ({}): stopped after ū = {u:e}: {msg}", c.delta_kappa, c.interface.label())
            })
        })
        .collect();
    for c in &study.curves {
        println!(
            "delta_kappa {:e} {}: {} samples, final flux {:.6e} W/m²",
            c.delta_kappa,
            c.interface.label(),
            c.samples.len(),
            c.samples.last().map_or(f64::NAN, |s| s.1)
        );
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(SolverFailure(failures.join("; ")).into())
    }
}

fn load_design(model: &RegulatorModel, path: &Path) -> anyhow::Result<(DesignField, f64)> {
    let file = DesignFile::load(path).with_context(|| format!("reading design {}", path.display()))?;
    file.check_mesh(&model.mesh).map_err(|e| ConfigError(e.to_string()))?;
    let design = file.design().map_err(|e| ConfigError(e.to_string()))?;
    Ok((design, file.beta))
}

fn write_snapshots(out: &OutputDir, model: &RegulatorModel, stem: &str, z: &[f64], r: &DesignResponse) -> anyhow::Result<()> {
    let eta = model.problem.projection.eta;
    for (k, (asm, state)) in model.assemblers.iter().zip(&r.states).enumerate() {
        let title = format!("{} | beta {} | case {}", out.title(), r.beta, k + 1);
        let snap = Snapshot {
            mesh: &model.mesh,
            title: &title,
            z,
            zeta_nodes: r.fields.zeta_nodes.as_deref(),
            projection: Some((r.beta, eta)),
            state: Some((&asm.dofs, state)),
        };
        out.write_raw(&format!("{stem}_case{}.vtk", k + 1), |w| snap.write(w))?;
    }
    Ok(())
}

pub fn optimize(cfg: &ResolvedConfig, out: &OutputDir, initial: Option<&Path>) -> anyhow::Result<()> {
    let model = cfg.file.problem().build()?;
    let design = match initial {
        Some(p) => load_design(&model, p)?.0,
        None => model.design.clone(),
    };
    let every = cfg.file.optimizer.snapshot_every;
    let mut last: Option<(Vec<f64>, DesignResponse)> = None;
    let mut io_error = None;
    let result = optimize_from(&model, design, &cfg.file.optimizer_settings(), &mut |rep| {
        let it = rep.log.iteration;
        if every > 0 && it % every == 0 && io_error.is_none() {
            if let Err(e) = write_snapshots(out, &model, &format!("snapshots/iter_{it:04}"), &rep.design.z, rep.response) {
                io_error = Some(e);
            }
        }
        last = Some((rep.design.z.clone(), rep.response.clone()));
    })?;
    if let Some(e) = io_error {
        return Err(e);
    }
    out.write("history.csv", |w| write_history(&result.history, w))?;
    let file = DesignFile::new(&model.mesh, &result.design, result.beta);
    out.write("design.toml", |w| w.write_all(file.to_toml().as_bytes()))?;
    if let Some((z, response)) = &last {
        write_snapshots(out, &model, "final", z, response)?;
    }
    if let Some(h) = result.history.last() {
        println!(
            "{} iterations, objective {:.6e}, g/|Ω| {:.3e}, beta {}, converged {}",
            result.history.len(),
            h.objective,
            h.volume,
            h.beta,
            result.converged
        );
    }
    match result.aborted {
        Some(msg) => Err(SolverFailure(format!("optimization aborted: {msg}")).into()),
        None => Ok(()),
    }
}

pub fn evaluate(cfg: &ResolvedConfig, out: &OutputDir, design: Option<&Path>) -> anyhow::Result<()> {
    let model = cfg.file.problem().build()?;
    let (design, beta) = match design {
        Some(p) => load_design(&model, p)?,
        None => (model.design.clone(), model.problem.projection.schedule.beta(0)),
    };
    let fields = model.pipeline.evaluate(&design.z, Some((beta, model.problem.projection.eta)))?;
    let curve = response_curve(&model, &fields.rho, &cfg.file.sweep)?;
    out.write("response.csv", |w| curve.write_csv(w))?;
    println!("{} sweep points written", curve.rows.len());
    if curve.failures.is_empty() {
        Ok(())
    } else {
        Err(SolverFailure(curve.failures.join("; ")).into())
    }
}

pub fn grad_check(cfg: &ResolvedConfig, out: &OutputDir) -> anyhow::Result<()> {
    let gc = &cfg.file.grad_check;
    let mut problem = cfg.file.problem();
    for case in &mut problem.cases {
        for v in case.rises.values_mut() {
            *v *= gc.load_scale;
        }
    }
    // converge to roundoff so differences of the objective are meaningful
    problem.newton.extra_iterations = problem.newton.extra_iterations.max(2);
    let model = problem.build()?;
    let mut rng = StdRng::seed_from_u64(gc.seed);
    let mut z = model.design.z.clone();
    let free = model.design.free_indices();
    let [lo, hi] = gc.z_range;
    if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(ConfigError("grad_check.z_range must satisfy 0 <= lo <= hi <= 1".into()).into());
    }
    for &e in &free {
        z[e] = rng.gen_range(lo..=hi);
    }
    let probes = pick_probes(&free, gc.probes, &mut rng);
    let report = check_gradient(&model, &z, gc.beta, &probes, gc.step)?;
    out.write("gradcheck.csv", |w| report.write_csv(w))?;
    println!(
        "{} probes, {} skipped, max relative error {:.3e}",
        report.rows.len(),
        report.skipped.len(),
        report.max_rel_error()
    );
    Ok(())
}
