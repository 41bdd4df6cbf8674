//! JSON study configuration.
//!
//! A flat object whose keys carry their SI unit (`l_g_henry`, `dt_s`, ...).
//! Every key is optional; omitted keys take the baseline value and the
//! parsed [`StudyConfig`] serializes back with all values resolved.
//!
//! ```json
//! { "u_g_volt": 311.0, "l_g_henry": 4.1e-3, "i_dref_amp": 80.0, "j_ipll": 20.0, "d_ipll": 2.0 }
//! ```

use serde::{Deserialize, Serialize};

use crate::analysis::{map_ipll_to_pll, DEFAULT_K_FLUCT};
use crate::dynamics::ModelKind;
use crate::error::{Error, Result};
use crate::model::{
    validate, Gains, GridParams, InverterSetpoint, IpllGains, PiPllGains, Violation, NOMINAL_OMEGA,
};
use crate::simulator::{Event, Scenario, SuiteTemplate, DEFAULT_DECIMATION, DEFAULT_DT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub u_g_volt: f64,
    pub omega_g_rad_s: f64,
    pub omega_0_rad_s: f64,
    pub l_g_henry: f64,
    pub r_g_ohm: f64,
    pub i_dref_amp: f64,
    pub i_qref_amp: f64,

    /// PI-PLL gains; when either is absent both are mapped from the IPLL
    /// gains at `design_l_g_henry`.
    pub k_ppll: Option<f64>,
    pub k_ipll: Option<f64>,
    pub j_ipll: f64,
    pub d_ipll: f64,
    /// Inductance at which PI gains are mapped to match the IPLL.
    pub design_l_g_henry: f64,
    pub k_fluct: f64,

    pub model: ModelKind,
    pub signal_level: bool,
    pub delta_offset_rad: f64,
    pub duration_s: f64,
    pub dt_s: f64,
    pub decimation: usize,
    pub events: Vec<Event>,

    pub sweep_l_g_min_henry: f64,
    pub sweep_l_g_max_henry: f64,
    pub sweep_points: usize,
    pub critical_l_g_min_henry: f64,
    pub critical_l_g_max_henry: f64,

    pub csv_path: Option<String>,
    pub svg_path: Option<String>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        let grid = GridParams::baseline();
        let setpoint = InverterSetpoint::baseline();
        let ipll = IpllGains::baseline();
        Self {
            u_g_volt: grid.u_g,
            omega_g_rad_s: NOMINAL_OMEGA,
            omega_0_rad_s: NOMINAL_OMEGA,
            l_g_henry: grid.l_g,
            r_g_ohm: 0.0,
            i_dref_amp: setpoint.i_dref,
            i_qref_amp: 0.0,
            k_ppll: None,
            k_ipll: None,
            j_ipll: ipll.j,
            d_ipll: ipll.d,
            design_l_g_henry: grid.l_g,
            k_fluct: DEFAULT_K_FLUCT,
            model: ModelKind::IpllReduced,
            signal_level: false,
            delta_offset_rad: 0.1,
            duration_s: SuiteTemplate::default().duration,
            dt_s: DEFAULT_DT,
            decimation: DEFAULT_DECIMATION,
            events: Vec::new(),
            sweep_l_g_min_henry: 1e-3,
            sweep_l_g_max_henry: 12e-3,
            sweep_points: 111,
            critical_l_g_min_henry: 4.1e-3,
            critical_l_g_max_henry: 12.3e-3,
            csv_path: None,
            svg_path: None,
        }
    }
}

/// Parses and validates a study configuration.
pub fn parse_config(text: &str) -> Result<StudyConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: StudyConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let location = if path.is_empty() || path == "." {
            format!("line {}, column {}", inner.line(), inner.column())
        } else {
            format!(
                "line {}, column {}, key `{path}`",
                inner.line(),
                inner.column()
            )
        };
        Error::Parse {
            location,
            message: inner.to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl StudyConfig {
    pub fn grid(&self) -> GridParams {
        GridParams {
            u_g: self.u_g_volt,
            omega_g: self.omega_g_rad_s,
            omega_0: self.omega_0_rad_s,
            l_g: self.l_g_henry,
            r_g: self.r_g_ohm,
        }
    }

    pub fn design_grid(&self) -> GridParams {
        self.grid().with_l_g(self.design_l_g_henry)
    }

    pub fn setpoint(&self) -> InverterSetpoint {
        InverterSetpoint {
            i_dref: self.i_dref_amp,
            i_qref: self.i_qref_amp,
        }
    }

    pub fn ipll(&self) -> IpllGains {
        IpllGains {
            j: self.j_ipll,
            d: self.d_ipll,
        }
    }

    /// Explicit PI gains, or gains mapped from the IPLL at the design grid.
    pub fn pll(&self) -> Result<PiPllGains> {
        match (self.k_ppll, self.k_ipll) {
            (Some(k_ppll), Some(k_ipll)) => Ok(PiPllGains { k_ppll, k_ipll }),
            _ => map_ipll_to_pll(&self.ipll(), &self.design_grid(), &self.setpoint()),
        }
    }

    /// Same config with `pll()` written out, so the echo is self-describing.
    pub fn resolved(&self) -> Result<StudyConfig> {
        let pll = self.pll()?;
        Ok(StudyConfig {
            k_ppll: Some(pll.k_ppll),
            k_ipll: Some(pll.k_ipll),
            ..self.clone()
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config is always serializable")
    }

    pub fn gains_for(&self, model: ModelKind) -> Result<Gains> {
        Ok(if model.is_pll() {
            Gains::Pll(self.pll()?)
        } else {
            Gains::Ipll(self.ipll())
        })
    }

    /// Perturbed-equilibrium scenario for `self.model`.
    pub fn scenario(&self) -> Result<Scenario> {
        let mut s = Scenario::perturbed(
            self.model,
            self.grid(),
            self.setpoint(),
            self.gains_for(self.model)?,
            self.delta_offset_rad,
        )?
        .with_timing(self.duration_s, self.dt_s, self.decimation);
        s.events = self.events.clone();
        Ok(s)
    }

    pub fn suite_template(&self) -> Result<SuiteTemplate> {
        Ok(SuiteTemplate {
            grid: self.design_grid(),
            setpoint: self.setpoint(),
            ipll: self.ipll(),
            pll: Some(self.pll()?),
            delta_offset: self.delta_offset_rad,
            duration: self.duration_s,
            dt: self.dt_s,
            decimation: self.decimation,
            signal_level: self.signal_level,
        })
    }

    /// Checks all parameter invariants before any computation.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid();
        let setpoint = self.setpoint();
        let mut v = match validate(&grid, &setpoint, &Gains::Ipll(self.ipll())) {
            Ok(()) => Vec::new(),
            Err(v) => v,
        };
        if let (Some(k_ppll), Some(k_ipll)) = (self.k_ppll, self.k_ipll) {
            if let Err(more) =
                validate(&grid, &setpoint, &Gains::Pll(PiPllGains { k_ppll, k_ipll }))
            {
                v.extend(more.into_iter().filter(|x| {
                    matches!(
                        x,
                        Violation::SingularInertia { .. }
                            | Violation::NonPositive {
                                field: "k_ipll",
                                ..
                            }
                            | Violation::Negative {
                                field: "k_ppll",
                                ..
                            }
                            | Violation::NonFinite {
                                field: "k_ppll" | "k_ipll"
                            }
                    )
                }));
            }
        }
        for (field, value) in [
            ("design_l_g_henry", self.design_l_g_henry),
            ("k_fluct", self.k_fluct),
            ("sweep_l_g_min_henry", self.sweep_l_g_min_henry),
            ("critical_l_g_min_henry", self.critical_l_g_min_henry),
        ] {
            if !(value >= 0.0) || !value.is_finite() {
                v.push(Violation::Negative { field, value });
            }
        }
        for (field, value) in [
            ("duration_s", self.duration_s),
            ("dt_s", self.dt_s),
            ("sweep_l_g_max_henry", self.sweep_l_g_max_henry),
            ("critical_l_g_max_henry", self.critical_l_g_max_henry),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                v.push(Violation::NonPositive { field, value });
            }
        }
        for (field, value) in [
            ("decimation", self.decimation),
            ("sweep_points", self.sweep_points),
        ] {
            if value == 0 {
                v.push(Violation::NonPositive { field, value: 0.0 });
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }
}
