//! Right-hand sides of the four synchronization models.
//!
//! The reduced models are swing-like second-order equations in
//! `(delta_pll, omega_pll)`. The signal-level models follow the controller
//! block diagrams: the loop is driven by the PCC q-axis voltage `u_q` and the
//! current loop is ideal. Parameters are passed per call so the simulator can
//! step them between integration steps.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analysis::{pll_coefficients, solve_equilibrium};
use crate::error::{Error, Result};
use crate::model::{
    is_singular_inertia, Gains, GridParams, InverterSetpoint, IpllGains, PiPllGains,
    SignalPllState, SyncState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    PllReduced,
    IpllReduced,
    PllSignal,
    IpllSignal,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::PllReduced,
        ModelKind::IpllReduced,
        ModelKind::PllSignal,
        ModelKind::IpllSignal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::PllReduced => "pll_reduced",
            ModelKind::IpllReduced => "ipll_reduced",
            ModelKind::PllSignal => "pll_signal",
            ModelKind::IpllSignal => "ipll_signal",
        }
    }

    pub fn is_pll(self) -> bool {
        matches!(self, ModelKind::PllReduced | ModelKind::PllSignal)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown model `{s}`"))
    }
}

/// Time derivative of a model's state pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    /// `d(delta_pll)/dt` [rad/s].
    pub d_delta: f64,
    /// `d(omega_pll)/dt`, or `d(x_int)/dt` for the signal-level PI-PLL [rad/s^2].
    pub d_second: f64,
}

impl StateDerivative {
    pub fn to_array(self) -> [f64; 2] {
        [self.d_delta, self.d_second]
    }
}

/// PCC q-axis voltage seen by the PLL.
pub fn pcc_uq(grid: &GridParams, setpoint: &InverterSetpoint, delta: f64, omega_pll: f64) -> f64 {
    omega_pll * grid.l_g * setpoint.i_dref + grid.r_g * setpoint.i_qref - grid.u_g * delta.sin()
}

/// Reduced PI-PLL swing equation with angle-dependent damping.
pub fn pll_reduced_rhs(
    grid: &GridParams,
    setpoint: &InverterSetpoint,
    gains: &PiPllGains,
    state: SyncState,
) -> Result<StateDerivative> {
    let c = pll_coefficients(grid, setpoint, gains, state.delta_pll)?;
    let slip = state.omega_pll - grid.omega_g;
    let accel = grid.p_in(setpoint) - grid.u_g * state.delta_pll.sin() - c.d_e * slip;
    Ok(StateDerivative {
        d_delta: slip,
        d_second: accel / c.j_e,
    })
}

/// Reduced IPLL swing equation; the damping factor does not depend on state.
pub fn ipll_reduced_rhs(
    grid: &GridParams,
    setpoint: &InverterSetpoint,
    gains: &IpllGains,
    state: SyncState,
) -> StateDerivative {
    let slip = state.omega_pll - grid.omega_g;
    let d_e = gains.d - grid.l_g * setpoint.i_dref;
    let accel = grid.p_in(setpoint) - grid.u_g * state.delta_pll.sin() - d_e * slip;
    StateDerivative {
        d_delta: slip,
        d_second: gains.j * accel,
    }
}

/// PLL output frequency of the signal-level PI-PLL.
///
/// `omega = omega_0 + k_ppll * u_q(omega) + x_int` is an algebraic loop through
/// the grid inductance; it is solved in closed form.
pub fn pll_signal_omega(
    grid: &GridParams,
    setpoint: &InverterSetpoint,
    gains: &PiPllGains,
    state: SignalPllState,
) -> Result<f64> {
    if is_singular_inertia(gains.k_ppll, grid.l_g, setpoint.i_dref) {
        return Err(Error::SingularInertia);
    }
    let num = grid.omega_0
        + state.x_int
        + gains.k_ppll * (grid.r_g * setpoint.i_qref - grid.u_g * state.delta_pll.sin());
    Ok(num / (1.0 - gains.k_ppll * grid.l_g * setpoint.i_dref))
}

/// Signal-level PI-PLL: `omega = omega_0 + k_ppll u_q + x_int`, `x_int' = k_ipll u_q`.
pub fn pll_signal_rhs(
    grid: &GridParams,
    setpoint: &InverterSetpoint,
    gains: &PiPllGains,
    state: SignalPllState,
) -> Result<StateDerivative> {
    let omega = pll_signal_omega(grid, setpoint, gains, state)?;
    let u_q = pcc_uq(grid, setpoint, state.delta_pll, omega);
    Ok(StateDerivative {
        d_delta: omega - grid.omega_g,
        d_second: gains.k_ipll * u_q,
    })
}

/// Signal-level IPLL: `omega' = j (u_q - d (omega - omega_0))`.
///
/// The damping branch references the nominal frequency; it coincides with the
/// reduced model when `omega_g = omega_0`.
pub fn ipll_signal_rhs(
    grid: &GridParams,
    setpoint: &InverterSetpoint,
    gains: &IpllGains,
    state: SyncState,
) -> StateDerivative {
    let u_q = pcc_uq(grid, setpoint, state.delta_pll, state.omega_pll);
    StateDerivative {
        d_delta: state.omega_pll - grid.omega_g,
        d_second: gains.j * (u_q - gains.d * (state.omega_pll - grid.omega_0)),
    }
}

fn pll_gains(kind: ModelKind, gains: &Gains) -> Result<&PiPllGains> {
    match gains {
        Gains::Pll(g) => Ok(g),
        Gains::Ipll(_) => Err(mismatch(kind)),
    }
}

fn ipll_gains(kind: ModelKind, gains: &Gains) -> Result<&IpllGains> {
    match gains {
        Gains::Ipll(g) => Ok(g),
        Gains::Pll(_) => Err(mismatch(kind)),
    }
}

fn mismatch(kind: ModelKind) -> Error {
    Error::InvalidScenario(format!("gains do not match model {kind}"))
}

/// Checks that `gains` is the controller type `kind` expects.
pub fn check_gains(kind: ModelKind, gains: &Gains) -> Result<()> {
    if kind.is_pll() {
        pll_gains(kind, gains).map(|_| ())
    } else {
        ipll_gains(kind, gains).map(|_| ())
    }
}

/// Array-form dispatch used by the integrator.
pub fn rhs(
    kind: ModelKind,
    grid: &GridParams,
    setpoint: &InverterSetpoint,
    gains: &Gains,
    state: [f64; 2],
) -> Result<[f64; 2]> {
    let [a, b] = state;
    let sync = SyncState {
        delta_pll: a,
        omega_pll: b,
    };
    let d = match kind {
        ModelKind::PllReduced => pll_reduced_rhs(grid, setpoint, pll_gains(kind, gains)?, sync)?,
        ModelKind::IpllReduced => ipll_reduced_rhs(grid, setpoint, ipll_gains(kind, gains)?, sync),
        ModelKind::PllSignal => pll_signal_rhs(
            grid,
            setpoint,
            pll_gains(kind, gains)?,
            SignalPllState {
                delta_pll: a,
                x_int: b,
            },
        )?,
        ModelKind::IpllSignal => ipll_signal_rhs(grid, setpoint, ipll_gains(kind, gains)?, sync),
    };
    Ok(d.to_array())
}

/// PLL frequency implied by a state array.
pub fn omega_pll(
    kind: ModelKind,
    grid: &GridParams,
    setpoint: &InverterSetpoint,
    gains: &Gains,
    state: [f64; 2],
) -> Result<f64> {
    match kind {
        ModelKind::PllSignal => pll_signal_omega(
            grid,
            setpoint,
            pll_gains(kind, gains)?,
            SignalPllState {
                delta_pll: state[0],
                x_int: state[1],
            },
        ),
        _ => Ok(state[1]),
    }
}

/// Fixed point of a model, as a state array.
///
/// For the signal-level IPLL the damping branch shifts the angle when
/// `omega_g != omega_0`: `u_g sin(delta) = p_in - d (omega_g - omega_0)`.
pub fn equilibrium_state(
    kind: ModelKind,
    grid: &GridParams,
    setpoint: &InverterSetpoint,
    gains: &Gains,
) -> Result<[f64; 2]> {
    check_gains(kind, gains)?;
    match kind {
        ModelKind::PllReduced | ModelKind::IpllReduced => {
            let op = solve_equilibrium(grid, setpoint)?;
            Ok([op.delta_0, grid.omega_g])
        }
        ModelKind::PllSignal => {
            let op = solve_equilibrium(grid, setpoint)?;
            Ok([op.delta_0, grid.omega_g - grid.omega_0])
        }
        ModelKind::IpllSignal => {
            let g = ipll_gains(kind, gains)?;
            let p = grid.p_in(setpoint) - g.d * (grid.omega_g - grid.omega_0);
            if p.abs() > grid.u_g {
                return Err(Error::NoEquilibrium {
                    margin: p.abs() - grid.u_g,
                });
            }
            Ok([(p / grid.u_g).asin(), grid.omega_g])
        }
    }
}

/// Central finite-difference Jacobian of a model at `state`.
pub fn jacobian(
    kind: ModelKind,
    grid: &GridParams,
    setpoint: &InverterSetpoint,
    gains: &Gains,
    state: [f64; 2],
    step: f64,
) -> Result<[[f64; 2]; 2]> {
    let mut jac = [[0.0; 2]; 2];
    for col in 0..2 {
        let mut plus = state;
        let mut minus = state;
        plus[col] += step;
        minus[col] -= step;
        let fp = rhs(kind, grid, setpoint, gains, plus)?;
        let fm = rhs(kind, grid, setpoint, gains, minus)?;
        for row in 0..2 {
            jac[row][col] = (fp[row] - fm[row]) / (2.0 * step);
        }
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{eigenvalues, ipll_coefficients, map_ipll_to_pll};
    use crate::model::NOMINAL_OMEGA;

    fn base() -> (GridParams, InverterSetpoint, PiPllGains, IpllGains) {
        let g = GridParams::baseline();
        let s = InverterSetpoint::baseline();
        let ip = IpllGains::baseline();
        let pll = map_ipll_to_pll(&ip, &g, &s).unwrap();
        (g, s, pll, ip)
    }

    #[test]
    fn uq_examples() {
        let (g, s, ..) = base();
        let op = solve_equilibrium(&g, &s).unwrap();
        assert!(pcc_uq(&g, &s, op.delta_0, g.omega_g).abs() < 1e-12);
        let v = pcc_uq(&g, &s, 0.0, g.omega_g);
        assert!((v - NOMINAL_OMEGA * 4.1e-3 * 80.0).abs() < 1e-12);
        assert!((v - 103.04).abs() < 5e-3);
    }

    #[test]
    fn reduced_models_vanish_at_equilibrium() {
        let (g, s, pll, ip) = base();
        let op = solve_equilibrium(&g, &s).unwrap();
        let eq = SyncState {
            delta_pll: op.delta_0,
            omega_pll: g.omega_g,
        };
        let d = pll_reduced_rhs(&g, &s, &pll, eq).unwrap();
        assert!(d.d_delta.abs() < 1e-12 && d.d_second.abs() < 1e-12, "{d:?}");
        let d = ipll_reduced_rhs(&g, &s, &ip, eq);
        assert!(d.d_delta.abs() < 1e-12 && d.d_second.abs() < 1e-12, "{d:?}");
    }

    #[test]
    fn pll_restoring_term() {
        let (g, s, pll, _) = base();
        let op = solve_equilibrium(&g, &s).unwrap();
        let d = pll_reduced_rhs(
            &g,
            &s,
            &pll,
            SyncState {
                delta_pll: op.delta_0 + 0.01,
                omega_pll: g.omega_g,
            },
        )
        .unwrap();
        let h = 1e-6;
        let slope = -g.u_g * ((op.delta_0 + h).sin() - (op.delta_0 - h).sin()) / (2.0 * h) / 0.05;
        assert!(
            (d.d_second - slope * 0.01).abs() < 0.01 * slope.abs(),
            "{d:?}"
        );
        assert!((d.d_second - -58.67).abs() < 0.6);
    }

    #[test]
    fn ipll_slip_response() {
        let (g, s, _, ip) = base();
        let op = solve_equilibrium(&g, &s).unwrap();
        let d = ipll_reduced_rhs(
            &g,
            &s,
            &ip,
            SyncState {
                delta_pll: op.delta_0,
                omega_pll: g.omega_g + 1.0,
            },
        );
        assert!((d.d_second - -20.0 * 1.672).abs() < 1e-9, "{d:?}");
    }

    #[test]
    fn signal_pll_fixed_point() {
        let (g, s, pll, _) = base();
        let op = solve_equilibrium(&g, &s).unwrap();
        let st = SignalPllState {
            delta_pll: op.delta_0,
            x_int: g.omega_g - g.omega_0,
        };
        let d = pll_signal_rhs(&g, &s, &pll, st).unwrap();
        assert!(d.d_delta.abs() < 1e-12 && d.d_second.abs() < 1e-9, "{d:?}");
    }

    #[test]
    fn signal_pll_singular() {
        let (g, s, ..) = base();
        let pll = PiPllGains {
            k_ppll: 1.0 / (g.l_g * s.i_dref),
            k_ipll: 1.0,
        };
        assert_eq!(
            pll_signal_rhs(&g, &s, &pll, SignalPllState::default()),
            Err(Error::SingularInertia)
        );
    }

    #[test]
    fn signal_pll_without_proportional_is_undamped_ipll() {
        let (g, s, ..) = base();
        let pll = PiPllGains {
            k_ppll: 0.0,
            k_ipll: 20.0,
        };
        let ip = IpllGains { j: 20.0, d: 0.0 };
        for (delta, x) in [(0.3, 0.5), (-0.2, -1.0), (1.0, 0.0)] {
            let ps = pll_signal_rhs(
                &g,
                &s,
                &pll,
                SignalPllState {
                    delta_pll: delta,
                    x_int: x,
                },
            )
            .unwrap();
            let omega = g.omega_0 + x;
            let is = ipll_signal_rhs(
                &g,
                &s,
                &ip,
                SyncState {
                    delta_pll: delta,
                    omega_pll: omega,
                },
            );
            assert_eq!(ps.d_delta, is.d_delta);
            // x' = k_ipll u_q equals omega' = j u_q when d = 0
            assert!((ps.d_second - is.d_second).abs() < 1e-9);
        }
    }

    #[test]
    fn ipll_signal_matches_reduced_at_nominal_frequency() {
        let (g, s, _, ip) = base();
        let op = solve_equilibrium(&g, &s).unwrap();
        let eq = SyncState {
            delta_pll: op.delta_0,
            omega_pll: g.omega_g,
        };
        let d = ipll_signal_rhs(&g, &s, &ip, eq);
        assert!(d.d_delta.abs() < 1e-12 && d.d_second.abs() < 1e-12);
        let st = SyncState {
            delta_pll: 0.7,
            omega_pll: g.omega_g - 3.0,
        };
        let a = ipll_signal_rhs(&g, &s, &ip, st);
        let b = ipll_reduced_rhs(&g, &s, &ip, st);
        assert_eq!(a.d_delta, b.d_delta);
        assert!((a.d_second - b.d_second).abs() <= 1e-12 * b.d_second.abs().max(1.0));
    }

    #[test]
    fn ipll_signal_shifted_equilibrium() {
        let (g, s, _, ip) = base();
        let g = GridParams {
            omega_g: NOMINAL_OMEGA + 0.5,
            ..g
        };
        let eq = equilibrium_state(ModelKind::IpllSignal, &g, &s, &Gains::Ipll(ip)).unwrap();
        let d = rhs(ModelKind::IpllSignal, &g, &s, &Gains::Ipll(ip), eq).unwrap();
        assert!(d[0].abs() < 1e-12 && d[1].abs() < 1e-9, "{d:?}");
        let u_q = pcc_uq(&g, &s, eq[0], eq[1]);
        assert!((u_q - ip.d * 0.5).abs() < 1e-9);
    }

    #[test]
    fn jacobian_eigenvalues_match_closed_form() {
        let (g, s, pll, ip) = base();
        let op = solve_equilibrium(&g, &s).unwrap();
        let want = eigenvalues(&ipll_coefficients(&g, &s, &ip), &g, op.delta_0);
        for kind in ModelKind::ALL {
            let gains = if kind.is_pll() {
                Gains::Pll(pll)
            } else {
                Gains::Ipll(ip)
            };
            let eq = equilibrium_state(kind, &g, &s, &gains).unwrap();
            let j = jacobian(kind, &g, &s, &gains, eq, 1e-6).unwrap();
            let tr = j[0][0] + j[1][1];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            assert!(
                (tr - 2.0 * want.lambda_1.re).abs() < 1e-6 * want.lambda_1.norm(),
                "{kind}"
            );
            assert!((det - want.lambda_1.norm_sqr()).abs() < 1e-6 * want.lambda_1.norm_sqr());
        }
    }

    #[test]
    fn gains_must_match_model() {
        let (g, s, pll, _) = base();
        assert!(rhs(ModelKind::IpllReduced, &g, &s, &Gains::Pll(pll), [0.0, 0.0]).is_err());
        assert_eq!("pll_signal".parse::<ModelKind>(), Ok(ModelKind::PllSignal));
        assert!("pll".parse::<ModelKind>().is_err());
    }
}
