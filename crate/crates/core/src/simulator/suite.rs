//! Canned reproductions: equal-coefficient comparison at the design grid and
//! the weak-grid sequence.

use rayon::prelude::*;

use super::{integrate, Scenario, Trajectory, DEFAULT_DECIMATION, DEFAULT_DT};
use crate::analysis::map_ipll_to_pll;
use crate::dynamics::ModelKind;
use crate::error::Result;
use crate::model::{Gains, GridParams, InverterSetpoint, IpllGains, PiPllGains};

/// Grid inductances of the weak-grid sequence [H].
pub const WEAK_GRID_L_G: [f64; 4] = [8.8e-3, 9.5e-3, 10.3e-3, 11.25e-3];

/// Shared settings for the canned runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteTemplate {
    /// Design grid: the PI gains are mapped from `ipll` at this inductance.
    pub grid: GridParams,
    pub setpoint: InverterSetpoint,
    pub ipll: IpllGains,
    /// Overrides the mapped PI gains when set.
    pub pll: Option<PiPllGains>,
    /// Initial angle offset from the target equilibrium [rad].
    pub delta_offset: f64,
    pub duration: f64,
    pub dt: f64,
    pub decimation: usize,
    /// Use the signal-level models instead of the reduced ones.
    pub signal_level: bool,
}

impl Default for SuiteTemplate {
    fn default() -> Self {
        Self {
            grid: GridParams::baseline(),
            setpoint: InverterSetpoint::baseline(),
            ipll: IpllGains::baseline(),
            pll: None,
            delta_offset: 0.1,
            duration: 10.0,
            dt: DEFAULT_DT,
            decimation: DEFAULT_DECIMATION,
            signal_level: false,
        }
    }
}

impl SuiteTemplate {
    pub fn pll_gains(&self) -> Result<PiPllGains> {
        match self.pll {
            Some(g) => Ok(g),
            None => map_ipll_to_pll(&self.ipll, &self.grid, &self.setpoint),
        }
    }

    pub fn models(&self) -> [ModelKind; 2] {
        if self.signal_level {
            [ModelKind::PllSignal, ModelKind::IpllSignal]
        } else {
            [ModelKind::PllReduced, ModelKind::IpllReduced]
        }
    }

    /// Perturbed-equilibrium scenario for `model` on a grid with inductance `l_g`.
    pub fn scenario(&self, model: ModelKind, l_g: f64) -> Result<Scenario> {
        let gains = if model.is_pll() {
            Gains::Pll(self.pll_gains()?)
        } else {
            Gains::Ipll(self.ipll)
        };
        Ok(Scenario::perturbed(
            model,
            self.grid.with_l_g(l_g),
            self.setpoint,
            gains,
            self.delta_offset,
        )?
        .with_timing(self.duration, self.dt, self.decimation))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRun {
    pub l_g: f64,
    pub model: ModelKind,
    pub trajectory: Trajectory,
}

fn run_all(template: &SuiteTemplate, jobs: &[(f64, ModelKind)]) -> Result<Vec<SuiteRun>> {
    jobs.par_iter()
        .map(|&(l_g, model)| {
            let trajectory = integrate(&template.scenario(model, l_g)?)?;
            Ok(SuiteRun {
                l_g,
                model,
                trajectory,
            })
        })
        .collect()
}

/// Both loops at each of [`WEAK_GRID_L_G`], ordered by inductance then PLL before IPLL.
pub fn run_weak_grid_suite(template: &SuiteTemplate) -> Result<Vec<SuiteRun>> {
    let jobs: Vec<_> = WEAK_GRID_L_G
        .iter()
        .flat_map(|&l| template.models().map(|m| (l, m)))
        .collect();
    run_all(template, &jobs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignPointComparison {
    pub pll: SuiteRun,
    pub ipll: SuiteRun,
    /// Sup-norm angle difference over the peak angle deviation of the IPLL run.
    pub relative_difference: f64,
}

/// Both loops at the design grid from the same perturbation.
pub fn run_design_point_comparison(template: &SuiteTemplate) -> Result<DesignPointComparison> {
    let [pm, im] = template.models();
    let l_g = template.grid.l_g;
    let mut runs = run_all(template, &[(l_g, pm), (l_g, im)])?;
    let ipll = runs.pop().expect("two runs");
    let pll = runs.pop().expect("two runs");
    let start = ipll.trajectory.rows[0].delta_pll - template.delta_offset;
    let peak = ipll
        .trajectory
        .deltas()
        .map(|d| (d - start).abs())
        .fold(0.0, f64::max);
    let relative_difference = sup_norm_difference(&pll.trajectory, &ipll.trajectory) / peak;
    Ok(DesignPointComparison {
        pll,
        ipll,
        relative_difference,
    })
}

/// `max |delta_a - delta_b|` over the common rows of two trajectories.
pub fn sup_norm_difference(a: &Trajectory, b: &Trajectory) -> f64 {
    a.deltas()
        .zip(b.deltas())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
