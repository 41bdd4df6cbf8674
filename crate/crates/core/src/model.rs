//! Parameter and state types shared across the lab.
//!
//! Electrical quantities are peak per-phase values (a 220 V RMS phase grid is
//! `u_g = 311 V`). All other units are SI: henry, ohm, rad/s, seconds.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 50 Hz nominal angular frequency.
pub const NOMINAL_OMEGA: f64 = 100.0 * PI;

/// `|1 - k_ppll * l_g * i_dref|` below this is treated as a singular inertia.
pub const SINGULARITY_TOL: f64 = 1e-12;

/// Thevenin grid seen from the PCC: source amplitude, frequency and series R-L.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    /// Grid voltage amplitude, peak phase [V].
    pub u_g: f64,
    /// Actual grid angular frequency [rad/s].
    pub omega_g: f64,
    /// Nominal angular frequency used by the controller [rad/s].
    pub omega_0: f64,
    /// Grid inductance [H].
    pub l_g: f64,
    /// Grid resistance [ohm].
    pub r_g: f64,
}

impl GridParams {
    /// 311 V, 50 Hz, 4.1 mH, lossless.
    pub fn baseline() -> Self {
        Self {
            u_g: 311.0,
            omega_g: NOMINAL_OMEGA,
            omega_0: NOMINAL_OMEGA,
            l_g: 4.1e-3,
            r_g: 0.0,
        }
    }

    pub fn with_l_g(self, l_g: f64) -> Self {
        Self { l_g, ..self }
    }

    /// Magnitude of the grid impedance at the actual grid frequency [ohm].
    pub fn impedance(&self) -> f64 {
        self.r_g.hypot(self.omega_g * self.l_g)
    }

    /// Driving term `omega_g * l_g * i_dref + r_g * i_qref` [V].
    pub fn p_in(&self, setpoint: &InverterSetpoint) -> f64 {
        self.omega_g * self.l_g * setpoint.i_dref + self.r_g * setpoint.i_qref
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (field, value) in [
            ("u_g", self.u_g),
            ("omega_g", self.omega_g),
            ("omega_0", self.omega_0),
        ] {
            check_positive(&mut out, field, value);
        }
        for (field, value) in [("l_g", self.l_g), ("r_g", self.r_g)] {
            check_non_negative(&mut out, field, value);
        }
        out
    }
}

/// Current references tracked by the (ideal) inner current loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverterSetpoint {
    /// d-axis current reference, peak [A]. Positive exports power.
    pub i_dref: f64,
    /// q-axis current reference, peak [A].
    pub i_qref: f64,
}

impl InverterSetpoint {
    pub fn baseline() -> Self {
        Self {
            i_dref: 80.0,
            i_qref: 0.0,
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (field, value) in [("i_dref", self.i_dref), ("i_qref", self.i_qref)] {
            if !value.is_finite() {
                out.push(Violation::NonFinite { field });
            }
        }
        out
    }
}

/// Gains of the traditional PI-type PLL.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiPllGains {
    pub k_ppll: f64,
    pub k_ipll: f64,
}

/// Gains of the pure-integral PLL with damping branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IpllGains {
    /// Integral gain; its reciprocal is the equivalent inertia.
    pub j: f64,
    /// Damping-branch feedback gain.
    pub d: f64,
}

impl IpllGains {
    pub fn baseline() -> Self {
        Self { j: 20.0, d: 2.0 }
    }
}

/// Either controller's gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Gains {
    Pll(PiPllGains),
    Ipll(IpllGains),
}

/// State of the reduced models: angle and PLL frequency.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SyncState {
    pub delta_pll: f64,
    pub omega_pll: f64,
}

/// State of the signal-level PI-PLL: angle and integrator output.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SignalPllState {
    pub delta_pll: f64,
    /// `k_ipll * integral(u_q)` [rad/s].
    pub x_int: f64,
}

/// Coefficients of `j_e * d(omega)/dt = p_in - u_g sin(delta) - d_e * (omega - omega_g)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalentCoefficients {
    pub j_e: f64,
    pub d_e: f64,
    /// Positive damping component.
    pub d_e1: f64,
    /// Negative damping component, `l_g * i_dref`.
    pub d_e2: f64,
}

impl EquivalentCoefficients {
    pub(crate) fn new(j_e: f64, d_e1: f64, d_e2: f64) -> Self {
        Self {
            j_e,
            d_e: d_e1 - d_e2,
            d_e1,
            d_e2,
        }
    }
}

/// Steady-state operating point on the principal branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    /// Equilibrium power angle [rad], in `[-pi/2, pi/2]`.
    pub delta_0: f64,
    /// Driving term [V].
    pub p_in: f64,
    /// Short-circuit ratio at `i_dref`; infinite when undefined.
    pub scr: f64,
    /// Set when `|p_in| = u_g`, i.e. the existence boundary.
    pub marginal: bool,
}

/// Roots of `j_e s^2 + d_e s + u_g cos(delta_0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenpair {
    pub lambda_1: Complex64,
    pub lambda_2: Complex64,
    pub is_conjugate: bool,
}

impl Eigenpair {
    pub fn max_real(&self) -> f64 {
        self.lambda_1.re.max(self.lambda_2.re)
    }

    pub fn is_stable(&self) -> bool {
        self.max_real() < 0.0
    }
}

/// A single broken invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonFinite {
        field: &'static str,
    },
    NonPositive {
        field: &'static str,
        value: f64,
    },
    Negative {
        field: &'static str,
        value: f64,
    },
    /// `k_ppll * l_g * i_dref` hit 1.
    SingularInertia {
        product: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite { field } => write!(f, "{field} must be finite"),
            Violation::NonPositive { field, value } => {
                write!(f, "{field} must be > 0 (got {value})")
            }
            Violation::Negative { field, value } => write!(f, "{field} must be >= 0 (got {value})"),
            Violation::SingularInertia { product } => write!(
                f,
                "singular inertia: k_ppll * l_g * i_dref = {product} makes J_e unbounded"
            ),
        }
    }
}

impl From<Vec<Violation>> for Error {
    fn from(v: Vec<Violation>) -> Self {
        Error::Validation(v)
    }
}

fn check_positive(out: &mut Vec<Violation>, field: &'static str, value: f64) {
    if !value.is_finite() {
        out.push(Violation::NonFinite { field });
    } else if value <= 0.0 {
        out.push(Violation::NonPositive { field, value });
    }
}

fn check_non_negative(out: &mut Vec<Violation>, field: &'static str, value: f64) {
    if !value.is_finite() {
        out.push(Violation::NonFinite { field });
    } else if value < 0.0 {
        out.push(Violation::Negative { field, value });
    }
}

pub(crate) fn is_singular_inertia(k_ppll: f64, l_g: f64, i_dref: f64) -> bool {
    (1.0 - k_ppll * l_g * i_dref).abs() < SINGULARITY_TOL
}

/// Collects every invariant violation of a parameter set. Never panics.
pub fn validate(
    grid: &GridParams,
    setpoint: &InverterSetpoint,
    gains: &Gains,
) -> std::result::Result<(), Vec<Violation>> {
    let mut out = grid.violations();
    out.extend(setpoint.violations());
    match gains {
        Gains::Pll(g) => {
            check_positive(&mut out, "k_ipll", g.k_ipll);
            check_non_negative(&mut out, "k_ppll", g.k_ppll);
            let product = g.k_ppll * grid.l_g * setpoint.i_dref;
            if product.is_finite() && is_singular_inertia(g.k_ppll, grid.l_g, setpoint.i_dref) {
                out.push(Violation::SingularInertia { product });
            }
        }
        Gains::Ipll(g) => {
            check_positive(&mut out, "j", g.j);
            check_non_negative(&mut out, "d", g.d);
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Short-circuit ratio `u_g / (|Z_g| * rated_current)`.
pub fn scr_from_grid(grid: &GridParams, rated_current: f64) -> Result<f64> {
    if !(rated_current > 0.0) {
        return Err(vec![Violation::NonPositive {
            field: "rated_current",
            value: rated_current,
        }]
        .into());
    }
    let z = grid.impedance();
    if z == 0.0 {
        return Err(Error::ZeroImpedance);
    }
    Ok(grid.u_g / (z * rated_current))
}

/// Grid whose inductance realizes `scr` at `rated_current`, given a fixed `r_g`.
/// `omega_0` is set to `omega_g`.
pub fn grid_from_scr(
    scr: f64,
    u_g: f64,
    omega_g: f64,
    rated_current: f64,
    r_g: f64,
) -> Result<GridParams> {
    let mut bad = Vec::new();
    check_positive(&mut bad, "scr", scr);
    check_positive(&mut bad, "rated_current", rated_current);
    if !bad.is_empty() {
        return Err(bad.into());
    }
    let required = u_g / (scr * rated_current);
    if r_g > required {
        return Err(Error::InfeasibleScr { scr, r_g, required });
    }
    let x = (required * required - r_g * r_g).sqrt();
    Ok(GridParams {
        u_g,
        omega_g,
        omega_0: omega_g,
        l_g: x / omega_g,
        r_g,
    })
}
