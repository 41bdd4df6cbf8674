//! Stability verdicts and damping estimates read off recorded waveforms.

use std::f64::consts::PI;

use super::{Trajectory, TrajectoryRow};
use crate::error::{Error, Result};

/// Peaks and swings smaller than this are ignored [rad].
pub const NOISE_FLOOR: f64 = 1e-9;
/// Settled runs stay within this band of the final angle over the tail [rad].
pub const SETTLE_BAND: f64 = 1e-3;
/// Fraction of the run treated as the tail.
pub const SETTLE_TAIL: f64 = 0.1;
/// Allowed `|u_g sin(delta_final) - p_in|` as a fraction of `u_g`.
pub const SETTLE_RESIDUAL_FRACTION: f64 = 1e-2;
/// Consecutive swing ratio above which an oscillation counts as growing.
pub const GROWTH_FACTOR: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceReason {
    /// `|delta|` exceeded pi.
    LossOfSynchronism,
    /// Three consecutive peak-to-peak swings each grew by more than 1 %.
    GrowingOscillation,
    NonFiniteState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StabilityVerdict {
    Settled {
        settle_time: f64,
        final_delta: f64,
    },
    Diverged {
        detect_time: f64,
        reason: DivergenceReason,
    },
    Marginal,
}

impl StabilityVerdict {
    pub fn is_settled(&self) -> bool {
        matches!(self, StabilityVerdict::Settled { .. })
    }

    pub fn is_diverged(&self) -> bool {
        matches!(self, StabilityVerdict::Diverged { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            StabilityVerdict::Settled { .. } => "settled",
            StabilityVerdict::Diverged { .. } => "diverged",
            StabilityVerdict::Marginal => "marginal",
        }
    }
}

/// Classifies a recorded run.
///
/// Divergence is checked first: loss of synchronism, then a growing swing
/// train. A run is settled when its tail stays inside [`SETTLE_BAND`] of the
/// final angle and that angle balances the driving term.
pub fn detect_instability(traj: &Trajectory, p_in: f64, u_g: f64) -> StabilityVerdict {
    let rows = &traj.rows;
    let Some(last) = rows.last() else {
        return StabilityVerdict::Marginal;
    };
    if let Some(r) = rows.iter().find(|r| r.delta_pll.abs() > PI) {
        return StabilityVerdict::Diverged {
            detect_time: r.t,
            reason: DivergenceReason::LossOfSynchronism,
        };
    }
    if let Some(t) = growing_swings(rows) {
        return StabilityVerdict::Diverged {
            detect_time: t,
            reason: DivergenceReason::GrowingOscillation,
        };
    }

    let final_delta = last.delta_pll;
    let t0 = rows[0].t;
    let tail_start = last.t - SETTLE_TAIL * (last.t - t0);
    let outside = |r: &TrajectoryRow| (r.delta_pll - final_delta).abs() > SETTLE_BAND;
    let tail_ok = !rows.iter().filter(|r| r.t >= tail_start).any(outside);
    let residual_ok = (u_g * final_delta.sin() - p_in).abs() < SETTLE_RESIDUAL_FRACTION * u_g;
    if tail_ok && residual_ok {
        let settle_time = match rows.iter().rposition(outside) {
            Some(i) => rows[i + 1].t,
            None => t0,
        };
        StabilityVerdict::Settled {
            settle_time,
            final_delta,
        }
    } else {
        StabilityVerdict::Marginal
    }
}

/// Time at which three consecutive peak-to-peak swings have each grown by
/// more than [`GROWTH_FACTOR`], if ever.
fn growing_swings(rows: &[TrajectoryRow]) -> Option<f64> {
    let mut swings: Vec<(f64, f64)> = Vec::new();
    let mut pending_max: Option<f64> = None;
    for w in rows.windows(3) {
        let (a, b, c) = (w[0].delta_pll, w[1].delta_pll, w[2].delta_pll);
        if b > a && b >= c {
            pending_max = Some(b);
        } else if b < a && b <= c {
            if let Some(max) = pending_max.take() {
                let swing = max - b;
                if swing > NOISE_FLOOR {
                    swings.push((w[1].t, swing));
                }
            }
        }
    }
    swings.windows(3).find_map(|s| {
        (s[1].1 > GROWTH_FACTOR * s[0].1 && s[2].1 > GROWTH_FACTOR * s[1].1).then_some(s[2].0)
    })
}

/// Damped frequency and damping ratio estimated from the extrema of
/// `delta - delta_final`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingEstimate {
    /// [rad/s]
    pub omega_d_est: f64,
    pub zeta_est: f64,
    /// Envelope decay rate `zeta * omega_n` [1/s]; negative when growing.
    pub decay_rate_est: f64,
    pub n_peaks_used: usize,
}

/// Refined extremum `(t, value)` from a parabola through three samples.
fn refine(t: f64, h: f64, y0: f64, y1: f64, y2: f64) -> (f64, f64) {
    let curv = y0 - 2.0 * y1 + y2;
    if curv == 0.0 {
        return (t, y1);
    }
    let p = 0.5 * (y0 - y2) / curv;
    (t + p * h, y1 - 0.25 * (y0 - y2) * p)
}

pub fn measure_damping(traj: &Trajectory) -> Result<DampingEstimate> {
    let rows = &traj.rows;
    let Some(last) = rows.last() else {
        return Err(Error::InsufficientOscillation { found: 0 });
    };
    let reference = last.delta_pll;
    let mut extrema: Vec<(f64, f64)> = Vec::new();
    for w in rows.windows(3) {
        let (y0, y1, y2) = (
            w[0].delta_pll - reference,
            w[1].delta_pll - reference,
            w[2].delta_pll - reference,
        );
        let is_max = y1 > y0 && y1 >= y2;
        let is_min = y1 < y0 && y1 <= y2;
        if is_max || is_min {
            extrema.push(refine(w[1].t, w[2].t - w[1].t, y0, y1, y2));
        }
    }
    // Tail extrema are swamped by the offset between delta_final and the true centre.
    let largest = extrema.iter().map(|e| e.1.abs()).fold(0.0, f64::max);
    let floor = NOISE_FLOOR.max(1e-6 * largest);
    extrema.retain(|e| e.1.abs() > floor);
    let n = extrema.len();
    if n < 3 {
        return Err(Error::InsufficientOscillation { found: n });
    }

    let span = extrema[n - 1].0 - extrema[0].0;
    let omega_d_est = PI * (n - 1) as f64 / span;

    let mut weighted = 0.0;
    let mut weight = 0.0;
    for sign in [1.0, -1.0] {
        let train: Vec<f64> = extrema
            .iter()
            .filter(|e| e.1 * sign > 0.0)
            .map(|e| e.1.abs())
            .collect();
        if train.len() >= 2 {
            let pairs = (train.len() - 1) as f64;
            weighted += (train[0] / train[train.len() - 1]).ln();
            weight += pairs;
        }
    }
    let log_dec = weighted / weight;
    let zeta_est = log_dec / (4.0 * PI * PI + log_dec * log_dec).sqrt();
    Ok(DampingEstimate {
        omega_d_est,
        zeta_est,
        decay_rate_est: log_dec * omega_d_est / (2.0 * PI),
        n_peaks_used: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ModelKind;
    use crate::model::{GridParams, InverterSetpoint};

    fn synthetic(f: impl Fn(f64) -> f64, dt: f64, n: usize) -> Trajectory {
        Trajectory {
            model: ModelKind::IpllReduced,
            rows: (0..n)
                .map(|i| {
                    let t = i as f64 * dt;
                    TrajectoryRow {
                        t,
                        delta_pll: f(t),
                        omega_pll: 0.0,
                        u_q: 0.0,
                        l_g: 0.0,
                    }
                })
                .collect(),
            verdict: StabilityVerdict::Marginal,
            final_grid: GridParams::baseline(),
            final_setpoint: InverterSetpoint::baseline(),
        }
    }

    const D0: f64 = 0.337_74;

    fn p_in() -> f64 {
        311.0 * D0.sin()
    }

    #[test]
    fn decaying_ring_settles() {
        let tr = synthetic(
            |t| D0 + 0.1 * (-16.72 * t).exp() * (74.76 * t).cos(),
            5e-4,
            2001,
        );
        let v = detect_instability(&tr, p_in(), 311.0);
        match v {
            StabilityVerdict::Settled {
                settle_time,
                final_delta,
            } => {
                assert!(settle_time > 0.1 && settle_time < 0.5, "{settle_time}");
                assert!((final_delta - D0).abs() < 1e-6);
            }
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn growing_sinusoid_diverges() {
        let tr = synthetic(
            |t| D0 + 0.01 * (0.2 * t).exp() * (53.0 * t).sin(),
            5e-4,
            20001,
        );
        assert!(matches!(
            detect_instability(&tr, p_in(), 311.0),
            StabilityVerdict::Diverged {
                reason: DivergenceReason::GrowingOscillation,
                ..
            }
        ));
    }

    #[test]
    fn constant_settles_immediately() {
        let tr = synthetic(|_| D0, 5e-4, 100);
        assert_eq!(
            detect_instability(&tr, p_in(), 311.0),
            StabilityVerdict::Settled {
                settle_time: 0.0,
                final_delta: D0
            }
        );
    }

    #[test]
    fn wrong_equilibrium_is_marginal() {
        let tr = synthetic(|_| 0.8, 5e-4, 100);
        assert_eq!(
            detect_instability(&tr, p_in(), 311.0),
            StabilityVerdict::Marginal
        );
    }

    #[test]
    fn slow_decay_is_marginal() {
        let tr = synthetic(
            |t| D0 + 0.1 * (-0.05 * t).exp() * (50.0 * t).sin(),
            5e-4,
            2001,
        );
        assert_eq!(
            detect_instability(&tr, p_in(), 311.0),
            StabilityVerdict::Marginal
        );
    }

    #[test]
    fn angle_past_pi_is_loss_of_sync() {
        let tr = synthetic(|t| D0 + 5.0 * t, 1e-2, 101);
        match detect_instability(&tr, p_in(), 311.0) {
            StabilityVerdict::Diverged {
                detect_time,
                reason,
            } => {
                assert_eq!(reason, DivergenceReason::LossOfSynchronism);
                assert!((detect_time - 0.57).abs() < 1e-9, "{detect_time}");
            }
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn measures_constructed_ring() {
        let tr = synthetic(
            |t| D0 + (-16.72 * t).exp() * (74.76 * t).cos(),
            50e-6,
            20001,
        );
        let est = measure_damping(&tr).unwrap();
        let zeta = 16.72 / (16.72_f64.powi(2) + 74.76_f64.powi(2)).sqrt();
        assert!((est.omega_d_est / 74.76 - 1.0).abs() < 5e-3, "{est:?}");
        assert!((est.zeta_est / zeta - 1.0).abs() < 2e-2, "{est:?}");
        assert!((zeta - 0.218).abs() < 1e-3);
        assert!((est.decay_rate_est / 16.72 - 1.0).abs() < 2e-2);
        assert!(est.n_peaks_used >= 3);
    }

    #[test]
    fn overdamped_decay_has_no_oscillation() {
        let tr = synthetic(
            |t| D0 + 0.1 * (-5.0 * t).exp() - 0.05 * (-20.0 * t).exp(),
            5e-4,
            4001,
        );
        assert!(matches!(
            measure_damping(&tr),
            Err(Error::InsufficientOscillation { .. })
        ));
    }
}
