//! Regulator objectives on the flux multipliers and the dilated volume
//! constraint.
//!
//! Every objective is a function of the converged states of the two target
//! points. Boundary integrals of `λ_θ` are exact quadratures of the nodal
//! multiplier fields (see [`Assembler::flux_weights`] and
//! [`Assembler::flux_mass`]), so the partial derivatives are exact too.

use crate::assembly::Assembler;
use crate::error::{Error, Result};
use crate::regularize::{DesignFields, DesignPipeline};

use super::regulator::{RegulatorKind, ANODE, GATE};

/// Objective value and `∂C/∂a` for every case (dense, state-sized).
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveValue {
    pub value: f64,
    pub partials: Vec<Vec<f64>>,
}

fn check_cases(assemblers: &[&Assembler], states: &[&[f64]]) -> Result<()> {
    if assemblers.len() != 2 || states.len() != 2 {
        return Err(Error::invalid(format!(
            "objective needs two target states, got {}",
            states.len()
        )));
    }
    for (a, s) in assemblers.iter().zip(states) {
        if a.num_dofs() != s.len() {
            return Err(Error::invalid("state length does not match its assembler"));
        }
    }
    Ok(())
}

/// `Σ_i c_i ∫_tag λ_θ^{(i)} dS`.
fn linear_flux_term(
    assemblers: &[&Assembler],
    states: &[&[f64]],
    tag: &str,
    coefficients: [f64; 2],
    partials: &mut [Vec<f64>],
) -> Result<f64> {
    let mut value = 0.0;
    for i in 0..2 {
        for (dof, w) in assemblers[i].flux_weights(tag)? {
            value += coefficients[i] * w * states[i][dof];
            partials[i][dof] += coefficients[i] * w;
        }
    }
    Ok(value)
}

/// `c Σ_i ∫_tag (λ_θ^{(i)})² dS`.
fn quadratic_flux_term(
    assemblers: &[&Assembler],
    states: &[&[f64]],
    tag: &str,
    c: f64,
    partials: &mut [Vec<f64>],
) -> Result<f64> {
    let mut value = 0.0;
    for i in 0..2 {
        for (r, col, m) in assemblers[i].flux_mass(tag)? {
            value += c * m * states[i][r] * states[i][col];
            partials[i][r] += c * m * states[i][col];
            partials[i][col] += c * m * states[i][r];
        }
    }
    Ok(value)
}

fn zero_partials(assemblers: &[&Assembler]) -> Vec<Vec<f64>> {
    assemblers.iter().map(|a| vec![0.0; a.num_dofs()]).collect()
}

/// `C = ∫_anode (−w₁ λ_θ⁽¹⁾ + w₂ λ_θ⁽²⁾) dS`.
pub fn objective_switch(assemblers: &[&Assembler], states: &[&[f64]], w: [f64; 2]) -> Result<ObjectiveValue> {
    check_cases(assemblers, states)?;
    let mut partials = zero_partials(assemblers);
    let value = linear_flux_term(assemblers, states, ANODE, [-w[0], w[1]], &mut partials)?;
    Ok(ObjectiveValue { value, partials })
}

/// `C = w₁ ∫_anode (λ_θ⁽¹⁾ + λ_θ⁽²⁾) dS`.
pub fn objective_diode(assemblers: &[&Assembler], states: &[&[f64]], w1: f64) -> Result<ObjectiveValue> {
    check_cases(assemblers, states)?;
    let mut partials = zero_partials(assemblers);
    let value = linear_flux_term(assemblers, states, ANODE, [w1, w1], &mut partials)?;
    Ok(ObjectiveValue { value, partials })
}

/// `C = w₁/|anode| ∫_anode (−λ_θ⁽¹⁾ + λ_θ⁽²⁾) dS + w₂/|gate| ∫_gate ((λ_θ⁽¹⁾)² + (λ_θ⁽²⁾)²) dS`.
pub fn objective_triode(assemblers: &[&Assembler], states: &[&[f64]], w: [f64; 2]) -> Result<ObjectiveValue> {
    check_cases(assemblers, states)?;
    let mesh = &assemblers[0].mesh;
    let a = w[0] / mesh.tag_length(ANODE)?;
    let mut partials = zero_partials(assemblers);
    let mut value = linear_flux_term(assemblers, states, ANODE, [-a, a], &mut partials)?;
    if w[1] != 0.0 {
        let g = w[1] / mesh.tag_length(GATE)?;
        value += quadratic_flux_term(assemblers, states, GATE, g, &mut partials)?;
    }
    Ok(ObjectiveValue { value, partials })
}

pub fn evaluate_objective(
    kind: RegulatorKind,
    weights: [f64; 2],
    assemblers: &[&Assembler],
    states: &[&[f64]],
) -> Result<ObjectiveValue> {
    match kind {
        RegulatorKind::Switch => objective_switch(assemblers, states, weights),
        RegulatorKind::Diode => objective_diode(assemblers, states, weights[0]),
        RegulatorKind::Triode => objective_triode(assemblers, states, weights),
    }
}

/// `g = ∫ H_{β,η_d}(ζ) dV − V*` and `∂g/∂z`.
pub fn volume_constraint(
    pipeline: &DesignPipeline,
    fields: &DesignFields,
    beta: f64,
    eta_dilated: f64,
    budget: f64,
) -> Result<(f64, Vec<f64>)> {
    let (v, dv) = pipeline.projected_volume(fields, beta, eta_dilated)?;
    Ok((v - budget, dv))
}
