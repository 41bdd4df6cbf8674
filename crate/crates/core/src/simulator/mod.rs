//! Fixed-step time-domain simulation with scheduled parameter steps.

mod rk4;
mod suite;
mod verdict;

use serde::{Deserialize, Serialize};

pub use rk4::rk4_step;
pub use suite::{
    run_design_point_comparison, run_weak_grid_suite, sup_norm_difference, DesignPointComparison,
    SuiteRun, SuiteTemplate, WEAK_GRID_L_G,
};
pub use verdict::{
    detect_instability, measure_damping, DampingEstimate, DivergenceReason, StabilityVerdict,
    GROWTH_FACTOR, NOISE_FLOOR, SETTLE_BAND, SETTLE_RESIDUAL_FRACTION,
};

use crate::dynamics::{self, check_gains, pcc_uq, ModelKind};
use crate::error::{Error, Result};
use crate::model::{validate, Gains, GridParams, InverterSetpoint};

pub const DEFAULT_DT: f64 = 50e-6;
pub const DEFAULT_DECIMATION: usize = 10;

/// Parameter that an [`Event`] overwrites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventTarget {
    LG,
    UG,
    OmegaG,
    IDref,
    IQref,
}

impl EventTarget {
    fn apply(self, grid: &mut GridParams, setpoint: &mut InverterSetpoint, value: f64) {
        match self {
            EventTarget::LG => grid.l_g = value,
            EventTarget::UG => grid.u_g = value,
            EventTarget::OmegaG => grid.omega_g = value,
            EventTarget::IDref => setpoint.i_dref = value,
            EventTarget::IQref => setpoint.i_qref = value,
        }
    }
}

/// A step change of one parameter at `time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    #[serde(rename = "time_s")]
    pub time: f64,
    pub target: EventTarget,
    pub value: f64,
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub model: ModelKind,
    pub grid: GridParams,
    pub setpoint: InverterSetpoint,
    pub gains: Gains,
    /// `(delta_pll, omega_pll)`, or `(delta_pll, x_int)` for the signal-level PI-PLL.
    pub initial: [f64; 2],
    pub duration: f64,
    pub dt: f64,
    /// Sorted by time, unique times.
    pub events: Vec<Event>,
    /// Record every `decimation`-th step.
    pub decimation: usize,
}

impl Scenario {
    /// Run starting at the model's equilibrium with the angle offset by
    /// `delta_offset`. Uses the default step and decimation and a 1 s horizon.
    pub fn perturbed(
        model: ModelKind,
        grid: GridParams,
        setpoint: InverterSetpoint,
        gains: Gains,
        delta_offset: f64,
    ) -> Result<Self> {
        let mut initial = dynamics::equilibrium_state(model, &grid, &setpoint, &gains)?;
        initial[0] += delta_offset;
        Ok(Self {
            model,
            grid,
            setpoint,
            gains,
            initial,
            duration: 1.0,
            dt: DEFAULT_DT,
            events: Vec::new(),
            decimation: DEFAULT_DECIMATION,
        })
    }

    pub fn with_timing(mut self, duration: f64, dt: f64, decimation: usize) -> Self {
        self.duration = duration;
        self.dt = dt;
        self.decimation = decimation;
        self
    }

    fn steps_for(&self, time: f64) -> Option<usize> {
        let n = (time / self.dt).round();
        ((n * self.dt - time).abs() <= 1e-9 * self.dt.max(time)).then_some(n as usize)
    }

    /// Checks every scenario invariant, including parameter validity after
    /// each event.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return bad(format!("duration must be > 0 (got {})", self.duration));
        }
        if !(self.dt > 0.0 && self.dt <= self.duration) {
            return bad(format!("dt must be in (0, duration] (got {})", self.dt));
        }
        if self.steps_for(self.duration).is_none() {
            return bad(format!(
                "dt {} does not divide duration {}",
                self.dt, self.duration
            ));
        }
        if self.decimation == 0 {
            return bad("decimation must be >= 1".into());
        }
        if !self.initial.iter().all(|v| v.is_finite()) {
            return bad("initial state must be finite".into());
        }
        check_gains(self.model, &self.gains)?;
        validate(&self.grid, &self.setpoint, &self.gains)?;

        let (mut grid, mut setpoint) = (self.grid, self.setpoint);
        let mut last = f64::NEG_INFINITY;
        for ev in &self.events {
            if !(ev.time >= 0.0) || ev.time > self.duration {
                return bad(format!("event time {} outside [0, duration]", ev.time));
            }
            if ev.time <= last {
                return bad("events must be sorted with unique times".into());
            }
            if self.steps_for(ev.time).is_none() {
                return bad(format!(
                    "dt {} does not divide event time {}",
                    self.dt, ev.time
                ));
            }
            last = ev.time;
            ev.target.apply(&mut grid, &mut setpoint, ev.value);
            validate(&grid, &setpoint, &self.gains)?;
        }
        Ok(())
    }
}

/// One recorded sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub delta_pll: f64,
    pub omega_pll: f64,
    pub u_q: f64,
    /// Grid inductance active at `t`.
    pub l_g: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub model: ModelKind,
    pub rows: Vec<TrajectoryRow>,
    pub verdict: StabilityVerdict,
    /// Parameters in force at the end of the run.
    pub final_grid: GridParams,
    pub final_setpoint: InverterSetpoint,
}

impl Trajectory {
    pub fn deltas(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.delta_pll)
    }
}

/// Integrates a scenario with fixed-step RK4.
///
/// Stops early (at the next recording boundary) once `|delta| > pi`, and
/// immediately if the state becomes non-finite.
pub fn integrate(scenario: &Scenario) -> Result<Trajectory> {
    scenario.validate()?;
    let n_steps = scenario
        .steps_for(scenario.duration)
        .expect("validated above");
    let mut events = scenario
        .events
        .iter()
        .map(|e| (scenario.steps_for(e.time).expect("validated above"), e))
        .peekable();

    let (model, gains, dt, dec) = (
        scenario.model,
        scenario.gains,
        scenario.dt,
        scenario.decimation,
    );
    let (mut grid, mut setpoint) = (scenario.grid, scenario.setpoint);
    let mut state = scenario.initial;
    let mut rows = Vec::with_capacity(n_steps / dec + 1);
    let mut lost_sync = false;
    let mut non_finite_at = None;

    for k in 0..=n_steps {
        while let Some((_, ev)) = events.next_if(|(step, _)| *step == k) {
            ev.target.apply(&mut grid, &mut setpoint, ev.value);
        }
        let t = k as f64 * dt;
        if k % dec == 0 {
            let omega = dynamics::omega_pll(model, &grid, &setpoint, &gains, state)?;
            rows.push(TrajectoryRow {
                t,
                delta_pll: state[0],
                omega_pll: omega,
                u_q: pcc_uq(&grid, &setpoint, state[0], omega),
                l_g: grid.l_g,
            });
            if lost_sync {
                break;
            }
        }
        if k == n_steps {
            break;
        }
        let mut f = |y| dynamics::rhs(model, &grid, &setpoint, &gains, y);
        state = rk4_step(&mut f, state, dt)?;
        if !state.iter().all(|v| v.is_finite()) {
            non_finite_at = Some(t + dt);
            break;
        }
        lost_sync |= state[0].abs() > std::f64::consts::PI;
    }

    let mut traj = Trajectory {
        model,
        rows,
        verdict: StabilityVerdict::Marginal,
        final_grid: grid,
        final_setpoint: setpoint,
    };
    traj.verdict = match non_finite_at {
        Some(t) => StabilityVerdict::Diverged {
            detect_time: t,
            reason: DivergenceReason::NonFiniteState,
        },
        None => detect_instability(&traj, grid.p_in(&setpoint), grid.u_g),
    };
    Ok(traj)
}
