pub mod evaluate;
pub mod objective;
pub mod optimize;
pub mod regulator;
pub mod rod;

pub use evaluate::{response_curve, ResponseCurve, SweepSettings};
pub use objective::{
    evaluate_objective, objective_diode, objective_switch, objective_triode, volume_constraint, ObjectiveValue,
};
pub use optimize::{check_gradient, optimize, optimize_from, write_history, DesignResponse, IterationLog, OptimizationResult, OptimizerSettings};
pub use regulator::{LoadCase, Region, RegulatorGeometry, RegulatorKind, RegulatorModel, RegulatorProblem};
pub use rod::{contact_resistance, solve_rod_1d, Rod1DParams, Rod1DSolution};
