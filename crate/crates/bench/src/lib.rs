//! Shared fixtures for the criterion benches.

use ipll_core::{map_ipll_to_pll, GridParams, InverterSetpoint, IpllGains, PiPllGains};

pub fn baseline() -> (GridParams, InverterSetpoint, IpllGains, PiPllGains) {
    let grid = GridParams::baseline();
    let setpoint = InverterSetpoint::baseline();
    let ipll = IpllGains::baseline();
    let pll = map_ipll_to_pll(&ipll, &grid, &setpoint).expect("baseline has an equilibrium");
    (grid, setpoint, ipll, pll)
}
