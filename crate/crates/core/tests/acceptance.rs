//! Acceptance criteria. Prints one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` are reported but do not fail the
//! run; any other FAIL exits non-zero. `ACCEPTANCE_ONLY=1,5,9` restricts
//! the run to the listed criteria.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use nalgebra::{Matrix2, Matrix3};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use thermoreg::assembly::{Assembler, AverageBc, BoundaryConditions, ConvectionBc, DisplacementBc, Ramp, TemperatureBc};
use thermoreg::material::{deformation_gradient, interpolate, material_tangents, pk1_stress, strain_energy};
use thermoreg::material::{BaseMaterial, ErsatzScaling};
use thermoreg::mesh::{build_structured_mesh, quadrature, ElementBasis, QuadratureKind, Side, TagRule};
use thermoreg::nlsolve::sparse::norm;
use thermoreg::oracle1d::{run_rod_case, RodCurve, RodStudyConfig};
use thermoreg::problems::optimize::DesignResponse;
use thermoreg::problems::rod::Interface;
use thermoreg::problems::{
    check_gradient, optimize, response_curve, OptimizationResult, OptimizerSettings, RegulatorModel, RegulatorProblem,
    SweepSettings,
};
use thermoreg::regularize::{heaviside, BetaSchedule, DesignPipeline, HelmholtzFilter};
use thermoreg::sensitivity::pick_probes;

/// Criteria that fail for reasons recorded in the decisions ledger.
const KNOWN_FAILURES: [u32; 2] = [2, 4];

// Rod benchmark constants (perfect-contact oracle and profile comparison).
const KAPPA: f64 = 10.0;
const H_CONV: f64 = 1000.0;
const THETA_INF: f64 = 20.0;
const THETA_END: f64 = 200.0;
const SPAN: f64 = THETA_END - THETA_INF;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Independent evaluation of the piecewise-linear 1D rod solution:
/// `(A, θ(x))` for deformed length `l` and contact resistance `r`.
fn rod_oracle(l: f64, r: f64) -> (f64, impl Fn(f64) -> f64) {
    let a = (THETA_INF - THETA_END) / (l / KAPPA + r + 1.0 / H_CONV);
    let b1 = KAPPA * (a / H_CONV - THETA_INF);
    let b2 = -KAPPA * THETA_END - a * l;
    (a, move |x: f64| {
        let b = if x <= 0.5 * l { b1 } else { b2 };
        -(a * x + b) / KAPPA
    })
}

struct RodRuns {
    cfg: RodStudyConfig,
    curves: BTreeMap<String, (RodCurve, Duration)>,
}

impl RodRuns {
    fn new() -> Self {
        Self {
            cfg: RodStudyConfig::default(),
            curves: BTreeMap::new(),
        }
    }

    fn curve(&mut self, delta_kappa: f64, interface: Interface) -> &(RodCurve, Duration) {
        let key = format!("{delta_kappa:e} {interface:?}");
        let cfg = &self.cfg;
        self.curves.entry(key).or_insert_with(|| {
            let t = Instant::now();
            let c = run_rod_case(cfg, delta_kappa, interface).expect("rod sweep runs");
            (c, t.elapsed())
        })
    }

    fn element_size(&self) -> f64 {
        self.cfg.geometry.length / self.cfg.geometry.nx as f64
    }
}

fn criterion_1(rods: &mut RodRuns) -> Outcome {
    let g = rods.cfg.geometry;
    assert_eq!((g.nx, g.ny), (120, 20));
    let u = -0.02;
    let mut worst = 0.0f64;
    let mut time = Duration::ZERO;
    let mut notes = Vec::new();
    for dk in [1e-4, 1e-3] {
        let (curve, dt) = rods.curve(dk, Interface::Sharp);
        time += *dt;
        let Some(stop) = curve.stop_at(u) else {
            return check(false, format!("δκ = {dk:e}: no converged stop at ū = {u}"));
        };
        let l = g.length + u;
        let r = stop.void_length / (dk * KAPPA);
        let (_, theta) = rod_oracle(l, r);
        let err = stop
            .profile
            .iter()
            .filter(|p| p.reference_x <= g.void_start || p.reference_x >= g.void_end)
            .map(|p| (p.theta - theta(p.x)).abs() / SPAN)
            .fold(0.0, f64::max);
        worst = worst.max(err);
        notes.push(format!("δκ={dk:e}: L_c={l:.3} m, R_th={r:.3e}, max err {:.3}% of span", 100.0 * err));
    }
    check(
        worst <= 0.02 && time <= Duration::from_secs(300),
        format!("{} ({:.0} s, limits 2% / 300 s)", notes.join("; "), time.as_secs_f64()),
    )
}

fn criterion_2(rods: &mut RodRuns) -> Outcome {
    let length = rods.cfg.geometry.length;
    let u = -0.5 * length;
    let (a, _) = rod_oracle(length + u, 0.0);
    let (curve, dt) = rods.curve(1.0, Interface::Sharp);
    let Some(stop) = curve.stop_at(u) else {
        return check(false, format!("no converged stop at ū = {u}"));
    };
    let rel = (stop.flux.abs() - a.abs()).abs() / a.abs();
    check(
        rel <= 0.05 && *dt <= Duration::from_secs(300),
        format!(
            "flux {:.1} W/m² vs |A| = {:.1} W/m², deviation {:.1}% ({:.0} s, limits 5% / 300 s)",
            stop.flux,
            a.abs(),
            100.0 * rel,
            dt.as_secs_f64()
        ),
    )
}

fn criterion_3(rods: &mut RodRuns) -> Outcome {
    let mut first = Vec::new();
    let mut last = Vec::new();
    for dk in [1e-4, 1e-3, 1e-2] {
        let (curve, _) = rods.curve(dk, Interface::Sharp);
        if curve.failure.is_some() {
            return check(false, format!("δκ = {dk:e} sweep stopped early"));
        }
        let s0 = curve.samples.first().expect("sample at ū = 0");
        assert_eq!(s0.0, 0.0);
        first.push(s0.1.abs());
        last.push(curve.samples.last().unwrap().1.abs());
    }
    let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
    check(
        increasing(&first) && increasing(&last),
        format!("|q| at ū=0: {first:.3?}; at full compression: {last:.1?} (δκ = 1e-4, 1e-3, 1e-2)"),
    )
}

fn criterion_4(rods: &mut RodRuns) -> Outcome {
    let dk = 1e-3;
    let le = rods.element_size();
    let sharp = rods.curve(dk, Interface::Sharp).0.stops.clone();
    let mut pass = true;
    let mut notes = Vec::new();
    for factor in [1.0, 2.0] {
        let radius = factor * le / 3f64.sqrt();
        let (diffuse, _) = rods.curve(dk, Interface::Diffuse { radius });
        let mut violations = Vec::new();
        let mut compared = 0;
        for s in &sharp {
            if let Some(d) = diffuse.stop_at(s.displacement) {
                compared += 1;
                if d.flux.abs() > s.flux.abs() {
                    violations.push(format!("ū={:.4}: {:.0} > {:.0}", s.displacement, d.flux.abs(), s.flux.abs()));
                }
            }
        }
        pass &= violations.is_empty() && compared == sharp.len();
        notes.push(format!(
            "r = {factor}·l_e/√3: {}/{compared} points with |q_diffuse| > |q_sharp| [{}]",
            violations.len(),
            violations.join(", ")
        ));
    }
    check(pass, notes.join("; "))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let base = BaseMaterial::default();
    let ersatz = ErsatzScaling::default();
    let mut rng = StdRng::seed_from_u64(2024);
    let mut worst_p = 0.0f64;
    let mut worst_a = 0.0f64;
    for _ in 0..100 {
        let rho: f64 = rng.gen_range(0.0..=1.0);
        let (mp, _) = interpolate(rho, &base, &ersatz).unwrap();
        let f = loop {
            let g = Matrix2::from_fn(|_, _| rng.gen_range(-0.3..0.3));
            let f = deformation_gradient(&g);
            if f.determinant() > 0.3 {
                break f;
            }
        };
        let dtheta = rng.gen_range(-100.0..100.0);
        let p = pk1_stress(&f, dtheta, &mp).unwrap();
        let h = 1e-6;
        let fd = Matrix3::from_fn(|i, j| {
            let mut fp = f;
            let mut fm = f;
            fp[(i, j)] += h;
            fm[(i, j)] -= h;
            (strain_energy(&fp, dtheta, &mp).unwrap() - strain_energy(&fm, dtheta, &mp).unwrap()) / (2.0 * h)
        });
        worst_p = worst_p.max((fd - p).norm() / p.norm());
        // dP/dF against differences of P
        let t = material_tangents(&f, dtheta, &mp).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..3 {
            for l in 0..3 {
                let mut fp = f;
                let mut fm = f;
                fp[(k, l)] += h;
                fm[(k, l)] -= h;
                let d = (pk1_stress(&fp, dtheta, &mp).unwrap() - pk1_stress(&fm, dtheta, &mp).unwrap()) / (2.0 * h);
                for i in 0..3 {
                    for j in 0..3 {
                        num += (d[(i, j)] - t.a(i, j, k, l)).powi(2);
                        den += t.a(i, j, k, l).powi(2);
                    }
                }
            }
        }
        worst_a = worst_a.max((num / den).sqrt());
    }

    // assembled tangent and design derivative on a 4x2 mesh with every
    // boundary condition kind
    let (w, hgt) = (0.01, 0.005);
    let tags = [
        TagRule::whole_side("left", Side::Left),
        TagRule::whole_side("right", Side::Right),
        TagRule::whole_side("bottom", Side::Bottom),
        TagRule::segment("top_a", Side::Top, 0.0, 0.5 * w),
    ];
    let mesh = std::sync::Arc::new(build_structured_mesh(4, 2, w, hgt, &tags).unwrap());
    let bcs = BoundaryConditions {
        displacement: vec![
            DisplacementBc::clamped("left"),
            DisplacementBc::symmetry("bottom", Side::Bottom),
            DisplacementBc {
                tag: "top_a".into(),
                values: [Some(2e-5), None],
                ramp: Ramp::Scaled,
            },
        ],
        temperature: vec![TemperatureBc {
            tag: "left".into(),
            rise: 50.0,
            ramp: Ramp::Scaled,
        }],
        convection: vec![ConvectionBc {
            tag: "right".into(),
            h: 1000.0,
            ambient: 25.0,
        }],
        average: vec![AverageBc {
            tag: "right".into(),
            component: 1,
        }],
    };
    let ersatz = ErsatzScaling {
        kr_bar: 1e-2,
        h_char: hgt,
        ..Default::default()
    };
    let asm = Assembler::new(mesh, base, ersatz, bcs).unwrap();
    let n = asm.dofs.num_nodes;
    let random_state = |rng: &mut StdRng| {
        let mut a = asm.initial_state();
        for (i, v) in a.iter_mut().enumerate() {
            *v += if i < 2 * n {
                rng.gen_range(-1e-4..1e-4)
            } else if i < 3 * n {
                rng.gen_range(-30.0..30.0)
            } else {
                rng.gen_range(-1e3..1e3)
            };
        }
        a
    };
    let t = 0.7;
    let mut worst_k = 0.0f64;
    let mut worst_d = 0.0f64;
    for _ in 0..3 {
        let a = random_state(&mut rng);
        let rho: Vec<f64> = (0..asm.num_density_points()).map(|_| rng.gen_range(0.05..0.95)).collect();
        let (_, jac) = asm.residual_and_tangent(&a, &rho, t).unwrap();
        let v: Vec<f64> = random_state(&mut rng)
            .iter()
            .zip(asm.initial_state())
            .map(|(x, x0)| x - x0)
            .collect();
        let jv = jac.matvec(&v);
        let eps = 1e-4;
        let shifted = |s: f64| {
            let p: Vec<f64> = a.iter().zip(&v).map(|(x, d)| x + s * d).collect();
            asm.residual(&p, &rho, t).unwrap()
        };
        let (rp, rm) = (shifted(eps), shifted(-eps));
        for (_, range, _) in asm.block_scales() {
            if range.is_empty() {
                continue;
            }
            let diff: Vec<f64> = range.clone().map(|i| (rp[i] - rm[i]) / (2.0 * eps) - jv[i]).collect();
            worst_k = worst_k.max(norm(&diff) / norm(&jv[range]));
        }
        // μᵀ ∂R/∂ρ · δρ
        let mu: Vec<f64> = (0..asm.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let drho: Vec<f64> = (0..rho.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dd = asm.design_derivative(&a, &rho, &mu).unwrap();
        let an: f64 = dd.iter().zip(&drho).map(|(x, y)| x * y).sum();
        let e = 1e-5;
        let at = |s: f64| {
            let r: Vec<f64> = rho.iter().zip(&drho).map(|(x, d)| x + s * d).collect();
            let res = asm.residual(&a, &r, t).unwrap();
            res.iter().zip(&mu).map(|(x, y)| x * y).sum::<f64>()
        };
        worst_d = worst_d.max(rel((at(e) - at(-e)) / (2.0 * e), an));
    }
    let time = start.elapsed();
    let worst = worst_p.max(worst_a).max(worst_k).max(worst_d);
    check(
        worst <= 1e-6 && time <= Duration::from_secs(60),
        format!(
            "P vs dΨ/dF {worst_p:.1e}, dP/dF {worst_a:.1e}, assembled tangent {worst_k:.1e}, dR/dρ {worst_d:.1e} ({:.1} s, limits 1e-6 / 60 s)",
            time.as_secs_f64()
        ),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut p = RegulatorProblem::switch();
    p.geometry.nx = 24;
    p.geometry.ny = 12;
    // a quarter of the target temperatures keeps the gap open
    for case in &mut p.cases {
        for v in case.rises.values_mut() {
            *v *= 0.25;
        }
    }
    p.newton.extra_iterations = 2;
    let model = p.build().unwrap();
    let mut rng = StdRng::seed_from_u64(6);
    let mut z = model.design.z.clone();
    let free = model.design.free_indices();
    for &e in &free {
        z[e] = rng.gen_range(0.2..0.8);
    }
    let probes = pick_probes(&free, 10, &mut rng);
    let report = check_gradient(&model, &z, 2.0, &probes, 1e-4).unwrap();
    let time = start.elapsed();
    let worst = report.max_rel_error();
    check(
        report.rows.len() == 10 && worst <= 1e-4 && time <= Duration::from_secs(600),
        format!(
            "{} probes, {} skipped, max rel. error {worst:.2e} ({:.0} s, limits 1e-4 / 600 s)",
            report.rows.len(),
            report.skipped.len(),
            time.as_secs_f64()
        ),
    )
}

/// Coarse optimization with the β continuation compressed into 100 iterations.
fn coarse_run(mut p: RegulatorProblem) -> (RegulatorModel, OptimizationResult, DesignResponse, Duration) {
    let start = Instant::now();
    p.geometry.nx = 40;
    p.geometry.ny = 20;
    p.projection.schedule = BetaSchedule {
        start: 40,
        period: 15,
        ..p.projection.schedule
    };
    let model = p.build().unwrap();
    let settings = OptimizerSettings {
        max_iterations: 100,
        ..Default::default()
    };
    let mut last = None;
    let result = optimize(&model, &settings, &mut |r| last = Some(r.response.clone())).unwrap();
    (model, result, last.expect("at least one iteration"), start.elapsed())
}

fn criterion_7() -> Outcome {
    let (model, result, last, time) = coarse_run(RegulatorProblem::switch());
    let h = &result.history;
    let fin = h.last().unwrap();
    let beta_max = model.problem.projection.schedule.beta_max;
    let a = fin.volume <= 1e-6;
    let b = fin.beta == beta_max && fin.discreteness <= 0.15;
    let c = fin.objective < h[0].objective;
    let d = last.anode_flux[1].abs() > last.anode_flux[0].abs();
    check(
        result.aborted.is_none() && a && b && c && d && time <= Duration::from_secs(3600),
        format!(
            "{} iterations{}: (a) g/|Ω| = {:.2e} (b) β = {} discreteness {:.3} (c) C {:.4e} -> {:.4e} (d) |q2| = {:.4e} vs |q1| = {:.4e} ({:.0} s)",
            h.len(),
            result.aborted.as_ref().map_or(String::new(), |m| format!(" ABORTED: {m}")),
            fin.volume,
            fin.beta,
            fin.discreteness,
            h[0].objective,
            fin.objective,
            last.anode_flux[1].abs(),
            last.anode_flux[0].abs(),
            time.as_secs_f64()
        ),
    )
}

fn criterion_8_diode() -> Outcome {
    let (_, result, last, time) = coarse_run(RegulatorProblem::diode());
    // case 1 heats the anode (forward), case 2 the cathode (reverse)
    let forward = last.anode_flux[0].abs();
    let reverse = last.anode_flux[1].abs();
    check(
        result.aborted.is_none() && forward >= reverse && time <= Duration::from_secs(3600),
        format!(
            "|q_forward| = {forward:.4e} vs |q_reverse| = {reverse:.4e} at |Δθ| = 400 K, ratio {:.2} ({} iterations, {:.0} s)",
            forward / reverse,
            result.history.len(),
            time.as_secs_f64()
        ),
    )
}

fn criterion_8_triode() -> Outcome {
    let start = Instant::now();
    let sweep = SweepSettings {
        points: 4,
        max_rise: Some(100.0),
        triode_anode: 380.0,
    };
    let mut gate_loss = Vec::new();
    let mut worst_balance = 0.0f64;
    let mut notes = Vec::new();
    let mut ok = true;
    for design in [true, false] {
        let (model, result, last, _) = coarse_run(RegulatorProblem::triode(design));
        ok &= result.aborted.is_none();
        let curve = response_curve(&model, &last.fields.rho, &sweep).unwrap();
        ok &= curve.failures.is_empty() && curve.rows.len() == 5;
        let q = |name: &str| curve.column(name).unwrap();
        let (q1, q2, q3) = (q("Q_anode"), q("Q_cathode"), q("Q_gate"));
        for k in 0..q1.len() {
            let m = q1[k].abs().max(q2[k].abs()).max(q3[k].abs());
            worst_balance = worst_balance.max((q1[k] + q2[k] + q3[k]).abs() / m);
        }
        let at = |t: f64| curve.row_at(t).map(|r| r[3].abs());
        gate_loss.push([at(50.0), at(100.0)]);
        notes.push(format!(
            "design {}: |Q3| = {:.3e} / {:.3e} W/m at θ3 = 50 / 100",
            if design { 1 } else { 2 },
            at(50.0).unwrap_or(f64::NAN),
            at(100.0).unwrap_or(f64::NAN)
        ));
    }
    let time = start.elapsed();
    let ordered = (0..2).all(|k| match (gate_loss[0][k], gate_loss[1][k]) {
        (Some(d1), Some(d2)) => d1 <= d2,
        _ => false,
    });
    check(
        ok && ordered && worst_balance <= 1e-6 && time <= Duration::from_secs(7200),
        format!(
            "{}; max |Q1+Q2+Q3|/max|Qj| = {worst_balance:.1e} ({:.0} s for both designs)",
            notes.join("; "),
            time.as_secs_f64()
        ),
    )
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let mesh = build_structured_mesh(12, 8, 0.012, 0.008, &[]).unwrap();
    let basis = std::sync::Arc::new(ElementBasis::new(&mesh, &quadrature(QuadratureKind::GaussLobatto3x3)));
    let filter = HelmholtzFilter::new(&mesh, HelmholtzFilter::default_radius(&mesh) * 2.0).unwrap();
    let mut notes = Vec::new();
    let mut ok = true;

    let c = 0.37;
    let zeta = filter.apply(&vec![c; mesh.num_elements()]).unwrap();
    let e_const = zeta.iter().map(|v| (v - c).abs()).fold(0.0, f64::max);
    ok &= e_const <= 1e-12;
    notes.push(format!("constant field {e_const:.1e}"));

    let mut rng = StdRng::seed_from_u64(9);
    let z: Vec<f64> = (0..mesh.num_elements()).map(|_| rng.gen_range(0.0..1.0)).collect();
    let zeta = filter.apply(&z).unwrap();
    let mass_in: f64 = z.iter().sum::<f64>() * mesh.element_area();
    let e_mass = rel(filter.integrate(&zeta), mass_in);
    ok &= e_mass <= 1e-12;
    notes.push(format!("mass {e_mass:.1e}"));

    let y: Vec<f64> = (0..filter.num_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let lhs: f64 = y.iter().zip(&zeta).map(|(a, b)| a * b).sum();
    let ty = filter.apply_transpose(&y).unwrap();
    let rhs: f64 = ty.iter().zip(&z).map(|(a, b)| a * b).sum();
    let e_t = rel(lhs, rhs);
    ok &= e_t <= 1e-12;
    notes.push(format!("transpose {e_t:.1e}"));

    let mut endpoints = true;
    for beta in [1.0, 2.0, 8.0, 16.0, 64.0] {
        for eta in [0.3, 0.4, 0.5] {
            endpoints &= heaviside(0.0, beta, eta).0 == 0.0 && heaviside(1.0, beta, eta).0 == 1.0;
        }
    }
    ok &= endpoints;
    notes.push(format!("Heaviside endpoints exact {endpoints}"));

    let s = BetaSchedule::default();
    let got = [s.beta(0), s.beta(300), s.beta(400), s.beta(10_000)];
    let sched = got == [2.0, 4.0, 16.0, 16.0];
    ok &= sched;
    notes.push(format!("β(0, 300, 400, 10000) = {got:?}"));

    // the projected pipeline keeps a constant field constant too
    let pipe = DesignPipeline::filtered(&mesh, basis, HelmholtzFilter::default_radius(&mesh)).unwrap();
    let f = pipe.evaluate(&vec![c; mesh.num_elements()], Some((8.0, 0.5))).unwrap();
    let expect = heaviside(c, 8.0, 0.5).0;
    let e_pipe = f.rho.iter().map(|r| (r - expect).abs()).fold(0.0, f64::max);
    ok &= e_pipe <= 1e-12;
    notes.push(format!("projected constant {e_pipe:.1e}"));

    let time = start.elapsed();
    check(ok && time <= Duration::from_secs(30), format!("{} ({:.2} s)", notes.join(", "), time.as_secs_f64()))
}

fn main() {
    // `cargo test` passes harness flags; only listing needs a reply
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |id: u32| only.as_ref().map_or(true, |o| o.contains(&id));

    let mut rods = RodRuns::new();
    let mut criteria: Vec<(u32, &str, Box<dyn FnMut(&mut RodRuns) -> Outcome>)> = vec![
        (1, "rod analytical agreement", Box::new(criterion_1)),
        (2, "perfect-contact flux limit", Box::new(criterion_2)),
        (3, "contrast ordering", Box::new(criterion_3)),
        (4, "diffuse-interface resistance", Box::new(criterion_4)),
        (5, "constitutive consistency", Box::new(|_: &mut RodRuns| criterion_5())),
        (6, "adjoint correctness", Box::new(|_: &mut RodRuns| criterion_6())),
        (7, "switch optimization smoke test", Box::new(|_: &mut RodRuns| criterion_7())),
        (8, "diode property", Box::new(|_: &mut RodRuns| criterion_8_diode())),
        (8, "triode properties", Box::new(|_: &mut RodRuns| criterion_8_triode())),
        (9, "filter/projection unit suite", Box::new(|_: &mut RodRuns| criterion_9())),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria.iter_mut() {
        if !wanted(*id) {
            continue;
        }
        let out = run(&mut rods);
        let tag = if out.pass { "PASS" } else { "FAIL" };
        let known = !out.pass && KNOWN_FAILURES.contains(id);
        println!(
            "{tag} [{id}] {name}: {}{}",
            out.detail,
            if known { " (known, see decisions ledger)" } else { "" }
        );
        if !out.pass && !known {
            unexpected.push(format!("[{id}] {name}"));
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {}", unexpected.join(", "));
        std::process::exit(1);
    }
}
