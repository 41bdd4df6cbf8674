use thiserror::Error;

use crate::model::Violation;

/// Failure modes shared by every module of the lab.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid impedance is zero (l_g = r_g = 0); SCR is unbounded")]
    ZeroImpedance,

    #[error("SCR {scr} is infeasible: r_g = {r_g} ohm already exceeds the required impedance {required} ohm")]
    InfeasibleScr { scr: f64, r_g: f64, required: f64 },

    #[error("no equilibrium: driving term exceeds grid voltage by {margin} V")]
    NoEquilibrium { margin: f64 },

    #[error("equivalent inertia is singular (k_ppll * l_g * i_dref = 1)")]
    SingularInertia,

    #[error("degenerate operating angle: cos(delta_0) = {cos_delta} is not positive")]
    DegenerateAngle { cos_delta: f64 },

    #[error("equivalent inertia {j_e} is not positive")]
    NonPositiveInertia { j_e: f64 },

    #[error("damping envelope is empty")]
    EmptyEnvelope,

    #[error("root not bracketed: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    NotBracketed {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("invalid parameters: {}", join(.0))]
    Validation(Vec<Violation>),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("insufficient oscillation: {found} extrema above the noise floor, need 3")]
    InsufficientOscillation { found: usize },

    #[error("plot has no series, or a series with fewer than two points")]
    EmptySeries,

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("empty input")]
    EmptyInput,
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
