//! Plain-text stability report for one operating point.

use std::fmt;

use crate::analysis::{
    damping_bounds, eigenvalues, ipll_coefficients, pll_coefficients, second_order_characteristics,
    solve_equilibrium, DampingBounds, SecondOrder,
};
use crate::error::Result;
use crate::model::{
    Eigenpair, EquivalentCoefficients, GridParams, InverterSetpoint, IpllGains, OperatingPoint,
    PiPllGains,
};

#[derive(Debug, Clone, PartialEq)]
pub struct LoopReport {
    pub name: &'static str,
    pub coefficients: EquivalentCoefficients,
    pub eigen: Eigenpair,
    /// `None` when the linearization has no oscillator form (non-positive inertia).
    pub second_order: Option<SecondOrder>,
}

impl LoopReport {
    pub fn stable(&self) -> bool {
        self.eigen.is_stable()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub grid: GridParams,
    pub setpoint: InverterSetpoint,
    pub equilibrium: OperatingPoint,
    pub pll: LoopReport,
    pub ipll: LoopReport,
    pub bounds: DampingBounds,
    /// Largest IPLL `D` that keeps this point underdamped.
    pub d_max_underdamped: f64,
}

/// Analyses both loops at the equilibrium of `grid`.
pub fn build_report(
    grid: &GridParams,
    setpoint: &InverterSetpoint,
    pll: &PiPllGains,
    ipll: &IpllGains,
    k_fluct: f64,
) -> Result<Report> {
    let op = solve_equilibrium(grid, setpoint)?;
    let loop_report = |name, c: EquivalentCoefficients| LoopReport {
        name,
        coefficients: c,
        eigen: eigenvalues(&c, grid, op.delta_0),
        second_order: second_order_characteristics(&c, grid, op.delta_0).ok(),
    };
    let pll = loop_report("PI-PLL", pll_coefficients(grid, setpoint, pll, op.delta_0)?);
    let ipll_r = loop_report("IPLL", ipll_coefficients(grid, setpoint, ipll));
    let bounds = damping_bounds(grid, setpoint, ipll, &[(*grid, *setpoint)], k_fluct)?;
    Ok(Report {
        grid: *grid,
        setpoint: *setpoint,
        equilibrium: op,
        pll,
        ipll: ipll_r,
        d_max_underdamped: bounds.max_underdamped_d(grid, setpoint),
        bounds,
    })
}

impl fmt::Display for LoopReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.coefficients;
        writeln!(f, "[{}]", self.name)?;
        writeln!(f, "  J_e        = {:.6} V*s^2/rad", c.j_e)?;
        writeln!(f, "  D_e        = {:.6} V*s/rad", c.d_e)?;
        writeln!(f, "  D_e1       = {:.6} V*s/rad", c.d_e1)?;
        writeln!(f, "  D_e2       = {:.6} V*s/rad", c.d_e2)?;
        let (l1, l2) = (self.eigen.lambda_1, self.eigen.lambda_2);
        writeln!(f, "  lambda_1   = {:.4} {:+.4}j 1/s", l1.re, l1.im)?;
        writeln!(f, "  lambda_2   = {:.4} {:+.4}j 1/s", l2.re, l2.im)?;
        if let Some(so) = self.second_order {
            writeln!(f, "  omega_n    = {:.4} rad/s", so.omega_n)?;
            writeln!(f, "  zeta       = {:.4} (dimensionless)", so.zeta)?;
            match so.omega_d {
                Some(wd) => writeln!(f, "  omega_d    = {wd:.4} rad/s")?,
                None => writeln!(f, "  omega_d    = none (zeta >= 1)")?,
            }
        }
        writeln!(
            f,
            "  verdict    = {} (small-signal)",
            if self.stable() { "stable" } else { "unstable" }
        )
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = &self.equilibrium;
        writeln!(f, "[equilibrium]")?;
        writeln!(f, "  L_g        = {:.6e} H", self.grid.l_g)?;
        writeln!(f, "  SCR        = {:.4} (dimensionless)", op.scr)?;
        writeln!(f, "  p_in       = {:.4} V", op.p_in)?;
        writeln!(
            f,
            "  delta_0    = {:.6} rad ({:.3} deg){}",
            op.delta_0,
            op.delta_0.to_degrees(),
            if op.marginal { " marginal" } else { "" }
        )?;
        write!(f, "{}", self.pll)?;
        write!(f, "{}", self.ipll)?;
        let b = &self.bounds;
        writeln!(f, "[damping bounds]")?;
        writeln!(
            f,
            "  D > L_g*I_dref          = {:.6} V*s/rad",
            b.lower_exact
        )?;
        writeln!(
            f,
            "  D = k*U_g/omega_0       = {:.6} V*s/rad (k = {})",
            b.lower_conservative, b.k_fluct
        )?;
        writeln!(f, "  D_e < 2*sqrt(J_e*U_g*cos) = {:.6} V*s/rad", b.upper)?;
        writeln!(
            f,
            "  D < (underdamped)       = {:.6} V*s/rad",
            self.d_max_underdamped
        )
    }
}
