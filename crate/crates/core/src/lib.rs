//! Synchronization stability lab for grid-following inverters.
//!
//! Two phase-locked loops are modelled side by side: the traditional PI-type
//! PLL and a pure-integral PLL (IPLL) with a damping feedback branch. Both
//! reduce to a swing-like second-order equation
//!
//! ```text
//! d(delta)/dt = omega - omega_g
//! J_e d(omega)/dt = omega_g L_g I_dref + R_g I_qref - U_g sin(delta) - D_e (omega - omega_g)
//! ```
//!
//! whose equivalent damping `D_e` depends on the operating angle for the
//! PI-PLL but not for the IPLL. The crate provides:
//!
//! * [`model`]: parameter and state types, SCR conversions, validation.
//! * [`analysis`]: equilibria, equivalent coefficients, eigenvalues, damping
//!   bounds, PI/IPLL gain mapping, impedance sweeps and critical impedance.
//! * [`dynamics`]: right-hand sides of the reduced and signal-level models.
//! * [`simulator`]: fixed-step RK4 runs with parameter events, verdicts and
//!   damping estimates from waveforms.
//! * [`io`]: JSON study configs, CSV and SVG output, text reports.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod model;
pub mod simulator;

pub use analysis::{
    critical_impedance, critical_impedance_ipll, damping_bounds, damping_sweep, eigenvalues,
    ipll_coefficients, map_ipll_to_pll, pll_coefficients, second_order_characteristics,
    solve_equilibrium, CriticalImpedance, DampingBounds, SecondOrder, SweepRow,
};
pub use dynamics::{ModelKind, StateDerivative};
pub use error::{Error, Result};
pub use model::{
    grid_from_scr, scr_from_grid, validate, Eigenpair, EquivalentCoefficients, Gains, GridParams,
    InverterSetpoint, IpllGains, OperatingPoint, PiPllGains, SignalPllState, SyncState, Violation,
    NOMINAL_OMEGA,
};
pub use simulator::{
    detect_instability, integrate, measure_damping, DampingEstimate, Event, EventTarget, Scenario,
    StabilityVerdict, Trajectory, TrajectoryRow,
};
