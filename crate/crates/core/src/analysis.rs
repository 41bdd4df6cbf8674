//! Closed-form small-signal analysis of both synchronization loops.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    is_singular_inertia, scr_from_grid, Eigenpair, EquivalentCoefficients, GridParams,
    InverterSetpoint, IpllGains, OperatingPoint, PiPllGains,
};

/// Default voltage fluctuation coefficient for the conservative damping rule.
pub const DEFAULT_K_FLUCT: f64 = 2.0;

/// `cos(delta_0)` at or below this counts as a right-angle operating point.
pub const DEGENERATE_COS: f64 = 1e-12;

/// Bisection stops once the bracket is this narrow (in the search variable)...
pub const BISECT_TOL: f64 = 1e-9;
/// ...and the residual is below this.
pub const BISECT_RESIDUAL: f64 = 1e-10;

/// Equilibrium on the principal branch `delta_0 = asin(p_in / u_g)`.
///
/// `|p_in| = u_g` (to a few ulps) is returned as a marginal point at `±pi/2`.
pub fn solve_equilibrium(grid: &GridParams, setpoint: &InverterSetpoint) -> Result<OperatingPoint> {
    let p_in = grid.p_in(setpoint);
    let excess = p_in.abs() - grid.u_g;
    let marginal = excess.abs() <= 4.0 * f64::EPSILON * grid.u_g;
    if excess > 0.0 && !marginal {
        return Err(Error::NoEquilibrium { margin: excess });
    }
    let delta_0 = if marginal {
        FRAC_PI_2.copysign(p_in)
    } else {
        (p_in / grid.u_g).asin()
    };
    let scr = if setpoint.i_dref > 0.0 {
        scr_from_grid(grid, setpoint.i_dref).unwrap_or(f64::INFINITY)
    } else {
        f64::INFINITY
    };
    Ok(OperatingPoint {
        delta_0,
        p_in,
        scr,
        marginal,
    })
}

/// Equivalent inertia and damping of the PI-PLL loop at angle `delta`.
pub fn pll_coefficients(
    grid: &GridParams,
    setpoint: &InverterSetpoint,
    gains: &PiPllGains,
    delta: f64,
) -> Result<EquivalentCoefficients> {
    if is_singular_inertia(gains.k_ppll, grid.l_g, setpoint.i_dref) {
        return Err(Error::SingularInertia);
    }
    let j_e = (1.0 - gains.k_ppll * grid.l_g * setpoint.i_dref) / gains.k_ipll;
    let d_e1 = gains.k_ppll * grid.u_g * delta.cos() / gains.k_ipll;
    let d_e2 = grid.l_g * setpoint.i_dref;
    Ok(EquivalentCoefficients::new(j_e, d_e1, d_e2))
}

/// Equivalent inertia and damping of the IPLL loop. Takes no angle: the
/// damping does not depend on the operating point.
pub fn ipll_coefficients(
    grid: &GridParams,
    setpoint: &InverterSetpoint,
    gains: &IpllGains,
) -> EquivalentCoefficients {
    EquivalentCoefficients::new(1.0 / gains.j, gains.d, grid.l_g * setpoint.i_dref)
}

/// Roots of the characteristic polynomial `j_e s^2 + d_e s + u_g cos(delta_0)`.
pub fn eigenvalues(coeffs: &EquivalentCoefficients, grid: &GridParams, delta_0: f64) -> Eigenpair {
    let a = coeffs.j_e;
    let b = coeffs.d_e;
    let c = grid.u_g * delta_0.cos();
    let disc = b * b - 4.0 * a * c;
    let is_conjugate = b * b < 4.0 * a * c;
    if is_conjugate {
        let re = -b / (2.0 * a);
        let im = (-disc).sqrt() / (2.0 * a);
        let l1 = Complex64::new(re, im.abs());
        return Eigenpair {
            lambda_1: l1,
            lambda_2: l1.conj(),
            is_conjugate,
        };
    }
    // Real roots: avoid cancellation via q = -(b + sgn(b) sqrt(disc)) / 2.
    let root = disc.sqrt();
    let q = -0.5 * (b + root.copysign(if b == 0.0 { 1.0 } else { b }));
    let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    let (hi, lo) = if r1 >= r2 { (r1, r2) } else { (r2, r1) };
    Eigenpair {
        lambda_1: Complex64::new(hi, 0.0),
        lambda_2: Complex64::new(lo, 0.0),
        is_conjugate,
    }
}

/// Admissible range for the IPLL damping gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingBounds {
    /// Largest `l_g * i_dref` over the operating envelope; `D` must exceed it.
    pub lower_exact: f64,
    /// `k_fluct * u_g / omega_0`.
    pub lower_conservative: f64,
    /// Largest equivalent damping `d_e` that keeps the roots complex at the
    /// queried operating point.
    pub upper: f64,
    pub k_fluct: f64,
}

impl DampingBounds {
    /// Largest `D` for which the queried point stays underdamped.
    pub fn max_underdamped_d(&self, grid: &GridParams, setpoint: &InverterSetpoint) -> f64 {
        self.upper + grid.l_g * setpoint.i_dref
    }
}

pub fn damping_bounds(
    grid: &GridParams,
    setpoint: &InverterSetpoint,
    gains: &IpllGains,
    envelope: &[(GridParams, InverterSetpoint)],
    k_fluct: f64,
) -> Result<DampingBounds> {
    if envelope.is_empty() {
        return Err(Error::EmptyEnvelope);
    }
    let mut lower_exact = f64::NEG_INFINITY;
    for (g, s) in envelope {
        solve_equilibrium(g, s)?;
        lower_exact = lower_exact.max(g.l_g * s.i_dref);
    }
    let op = solve_equilibrium(grid, setpoint)?;
    let j_e = ipll_coefficients(grid, setpoint, gains).j_e;
    Ok(DampingBounds {
        lower_exact,
        lower_conservative: k_fluct * grid.u_g / grid.omega_0,
        upper: critical_damping(j_e, grid.u_g * op.delta_0.cos()),
        k_fluct,
    })
}

fn critical_damping(j_e: f64, restoring: f64) -> f64 {
    2.0 * (j_e * restoring).sqrt()
}

/// PI gains giving the same equivalent inertia and damping as `ipll` at the
/// equilibrium of `grid`.
pub fn map_ipll_to_pll(
    ipll: &IpllGains,
    grid: &GridParams,
    setpoint: &InverterSetpoint,
) -> Result<PiPllGains> {
    let op = solve_equilibrium(grid, setpoint)?;
    let c = grid.u_g * op.delta_0.cos();
    if !(op.delta_0.cos() > DEGENERATE_COS) || op.marginal {
        return Err(Error::DegenerateAngle {
            cos_delta: op.delta_0.cos(),
        });
    }
    let k_ipll = ipll.j * c / (c + ipll.j * ipll.d * grid.l_g * setpoint.i_dref);
    let k_ppll = ipll.d * k_ipll / c;
    Ok(PiPllGains { k_ppll, k_ipll })
}

/// One grid-impedance point of a damping sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub l_g: f64,
    pub scr: f64,
    /// NaN when no equilibrium exists.
    pub delta_0: f64,
    /// NaN when no equilibrium exists.
    pub d_e_pll: f64,
    pub d_e_ipll: f64,
    pub j_e_pll: f64,
    pub j_e_ipll: f64,
    pub equilibrium_exists: bool,
}

/// Equivalent damping of both loops over a uniform grid of inductances, with
/// gains held fixed.
pub fn damping_sweep(
    grid_template: &GridParams,
    setpoint: &InverterSetpoint,
    pll: &PiPllGains,
    ipll: &IpllGains,
    l_g_range: (f64, f64),
    n_points: usize,
) -> Result<Vec<SweepRow>> {
    if n_points < 2 {
        return Err(Error::InvalidScenario(format!(
            "sweep needs at least 2 points, got {n_points}"
        )));
    }
    let (lo, hi) = l_g_range;
    let step = (hi - lo) / (n_points - 1) as f64;
    (0..n_points)
        .into_par_iter()
        .map(|i| {
            let l_g = lo + step * i as f64;
            sweep_row(&grid_template.with_l_g(l_g), setpoint, pll, ipll)
        })
        .collect()
}

fn sweep_row(
    grid: &GridParams,
    setpoint: &InverterSetpoint,
    pll: &PiPllGains,
    ipll: &IpllGains,
) -> Result<SweepRow> {
    let scr = if setpoint.i_dref > 0.0 {
        scr_from_grid(grid, setpoint.i_dref).unwrap_or(f64::INFINITY)
    } else {
        f64::INFINITY
    };
    let ic = ipll_coefficients(grid, setpoint, ipll);
    let (delta_0, exists) = match solve_equilibrium(grid, setpoint) {
        Ok(op) => (op.delta_0, true),
        Err(Error::NoEquilibrium { .. }) => (f64::NAN, false),
        Err(e) => return Err(e),
    };
    let pc = pll_coefficients(grid, setpoint, pll, delta_0)?;
    Ok(SweepRow {
        l_g: grid.l_g,
        scr,
        delta_0,
        d_e_pll: pc.d_e,
        d_e_ipll: ic.d_e,
        j_e_pll: pc.j_e,
        j_e_ipll: ic.j_e,
        equilibrium_exists: exists,
    })
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
///
/// Narrows until the bracket is below [`BISECT_TOL`] and `|f| <`
/// [`BISECT_RESIDUAL`], or until the bracket cannot shrink further.
pub fn bisect<F>(mut f: F, lo: f64, hi: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let (mut fa, fb) = (f(a)?, f(b)?);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::NotBracketed {
            lo: a,
            hi: b,
            f_lo: fa,
            f_hi: fb,
        });
    }
    loop {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if fm == 0.0 || (b - a < BISECT_TOL && fm.abs() < BISECT_RESIDUAL) || m <= a || m >= b {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
}

/// Inductance at which a loop's equivalent damping crosses zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalImpedance {
    pub l_g: f64,
    /// False when the crossing lies past the equilibrium existence boundary.
    pub equilibrium_exists: bool,
}

/// Zero crossing of the PI-PLL damping `d_e(l_g)` evaluated at each
/// inductance's own equilibrium.
pub fn critical_impedance(
    grid_template: &GridParams,
    setpoint: &InverterSetpoint,
    pll: &PiPllGains,
    l_g_range: (f64, f64),
) -> Result<CriticalImpedance> {
    let l_g = bisect(
        |l| {
            let g = grid_template.with_l_g(l);
            let op = solve_equilibrium(&g, setpoint)?;
            Ok(pll_coefficients(&g, setpoint, pll, op.delta_0)?.d_e)
        },
        l_g_range.0,
        l_g_range.1,
    )?;
    Ok(CriticalImpedance {
        l_g,
        equilibrium_exists: true,
    })
}

/// Zero crossing of the IPLL damping `D - l_g * i_dref`.
pub fn critical_impedance_ipll(
    grid_template: &GridParams,
    setpoint: &InverterSetpoint,
    ipll: &IpllGains,
    l_g_range: (f64, f64),
) -> Result<CriticalImpedance> {
    let l_g = bisect(
        |l| Ok(ipll_coefficients(&grid_template.with_l_g(l), setpoint, ipll).d_e),
        l_g_range.0,
        l_g_range.1,
    )?;
    let equilibrium_exists = solve_equilibrium(&grid_template.with_l_g(l_g), setpoint).is_ok();
    Ok(CriticalImpedance {
        l_g,
        equilibrium_exists,
    })
}

/// Natural frequency, damping ratio and damped frequency of the linearized loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondOrder {
    pub omega_n: f64,
    pub zeta: f64,
    /// `None` when `zeta >= 1`.
    pub omega_d: Option<f64>,
}

pub fn second_order_characteristics(
    coeffs: &EquivalentCoefficients,
    grid: &GridParams,
    delta_0: f64,
) -> Result<SecondOrder> {
    let cos_delta = delta_0.cos();
    if !(cos_delta > DEGENERATE_COS) {
        return Err(Error::DegenerateAngle { cos_delta });
    }
    if !(coeffs.j_e > 0.0) {
        return Err(Error::NonPositiveInertia { j_e: coeffs.j_e });
    }
    let c = grid.u_g * cos_delta;
    let omega_n = (c / coeffs.j_e).sqrt();
    let zeta = coeffs.d_e / critical_damping(coeffs.j_e, c);
    let omega_d = (zeta.abs() < 1.0).then(|| omega_n * (1.0 - zeta * zeta).sqrt());
    Ok(SecondOrder {
        omega_n,
        zeta,
        omega_d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NOMINAL_OMEGA;

    fn base() -> (GridParams, InverterSetpoint) {
        (GridParams::baseline(), InverterSetpoint::baseline())
    }

    fn reference_pll() -> PiPllGains {
        let (g, s) = base();
        map_ipll_to_pll(&IpllGains::baseline(), &g, &s).unwrap()
    }

    /// Independent root oracle for `u_g sin(d) = p_in` on `(0, pi/2)`.
    fn bisect_angle(u_g: f64, p_in: f64) -> f64 {
        let (mut a, mut b) = (0.0_f64, FRAC_PI_2);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if u_g * m.sin() - p_in > 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn equilibrium_matches_bisection_oracle() {
        let s = InverterSetpoint::baseline();
        for (l_g, expect) in [(4.1e-3, 0.33774), (11.25e-3, 1.14122)] {
            let g = GridParams::baseline().with_l_g(l_g);
            let op = solve_equilibrium(&g, &s).unwrap();
            let oracle = bisect_angle(g.u_g, g.p_in(&s));
            assert!((op.delta_0 - oracle).abs() < 1e-12);
            assert!((op.delta_0 - expect).abs() < 5e-5, "{}", op.delta_0);
            assert!((g.u_g * op.delta_0.sin() - op.p_in).abs() < 1e-12 * g.u_g);
            assert!(!op.marginal);
        }
    }

    #[test]
    fn no_equilibrium_past_boundary() {
        let (g, s) = base();
        let err = solve_equilibrium(&g.with_l_g(13e-3), &s).unwrap_err();
        match err {
            Error::NoEquilibrium { margin } => {
                let p_in = NOMINAL_OMEGA * 13e-3 * 80.0;
                assert!((margin - (p_in - 311.0)).abs() < 1e-9);
                assert!((p_in - 326.7).abs() < 0.05);
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn boundary_is_marginal() {
        let (g, s) = base();
        let l_star = g.u_g / (g.omega_g * s.i_dref);
        let op = solve_equilibrium(&g.with_l_g(l_star), &s).unwrap();
        assert!(op.marginal);
        assert_eq!(op.delta_0, FRAC_PI_2);
    }

    #[test]
    fn pll_coefficients_at_design_point() {
        let (g, s) = base();
        let op = solve_equilibrium(&g, &s).unwrap();
        let c = pll_coefficients(&g, &s, &reference_pll(), op.delta_0).unwrap();
        assert!((c.j_e - 0.05).abs() < 1e-12);
        assert!((c.d_e - 1.672).abs() < 1e-12);
        assert_eq!(c.d_e, c.d_e1 - c.d_e2);
    }

    #[test]
    fn pll_damping_negative_at_11_25_mh() {
        let (g, s) = base();
        let g = g.with_l_g(11.25e-3);
        let op = solve_equilibrium(&g, &s).unwrap();
        let c = pll_coefficients(&g, &s, &reference_pll(), op.delta_0).unwrap();
        assert!((c.d_e - -0.0171).abs() < 2e-4, "{}", c.d_e);
        assert!((c.j_e - 0.046101).abs() < 1e-6, "{}", c.j_e);
    }

    #[test]
    fn pll_damping_at_right_angle() {
        let (g, s) = base();
        let c = pll_coefficients(&g, &s, &reference_pll(), FRAC_PI_2).unwrap();
        assert!(c.d_e1.abs() < 1e-15);
        assert!((c.d_e + g.l_g * s.i_dref).abs() < 1e-15);
    }

    #[test]
    fn pll_singular_inertia() {
        let (g, s) = base();
        let gains = PiPllGains {
            k_ppll: 1.0 / (g.l_g * s.i_dref),
            k_ipll: 1.0,
        };
        assert_eq!(
            pll_coefficients(&g, &s, &gains, 0.3),
            Err(Error::SingularInertia)
        );
    }

    #[test]
    fn ipll_coefficients_examples() {
        let (g, s) = base();
        let ip = IpllGains::baseline();
        let c = ipll_coefficients(&g, &s, &ip);
        assert!((c.j_e - 0.05).abs() < 1e-15);
        assert!((c.d_e - 1.672).abs() < 1e-12);
        let c = ipll_coefficients(&g.with_l_g(11.25e-3), &s, &ip);
        assert!((c.d_e - 1.1).abs() < 1e-12);
        let idle = InverterSetpoint {
            i_dref: 0.0,
            i_qref: 0.0,
        };
        assert_eq!(ipll_coefficients(&g, &idle, &ip).d_e, ip.d);
    }

    #[test]
    fn baseline_eigenvalues() {
        let (g, s) = base();
        let op = solve_equilibrium(&g, &s).unwrap();
        let c = ipll_coefficients(&g, &s, &IpllGains::baseline());
        let e = eigenvalues(&c, &g, op.delta_0);
        assert!(e.is_conjugate);
        assert!((e.lambda_1.re - -16.72).abs() < 1e-9);
        assert!((e.lambda_1.im - 74.76).abs() < 5e-3, "{}", e.lambda_1);
        assert_eq!(e.lambda_2, e.lambda_1.conj());
    }

    #[test]
    fn unstable_eigenvalues_at_11_25_mh() {
        let (g, s) = base();
        let g = g.with_l_g(11.25e-3);
        let op = solve_equilibrium(&g, &s).unwrap();
        let c = pll_coefficients(&g, &s, &reference_pll(), op.delta_0).unwrap();
        let e = eigenvalues(&c, &g, op.delta_0);
        assert!((e.lambda_1.re - 0.185).abs() < 5e-3, "{}", e.lambda_1);
        assert!((e.lambda_1.im - 53.0).abs() < 0.1, "{}", e.lambda_1);
        assert!(!e.is_stable());
    }

    #[test]
    fn undamped_oscillator_is_purely_imaginary() {
        let (g, _) = base();
        let c = EquivalentCoefficients::new(0.05, 0.0, 0.0);
        let e = eigenvalues(&c, &g, 0.0);
        assert_eq!(e.lambda_1.re, 0.0);
        assert!((e.lambda_1.im - (311.0_f64 / 0.05).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn overdamped_roots_are_accurate() {
        let (g, _) = base();
        let c = EquivalentCoefficients::new(1e-4, 1e3, 0.0);
        let e = eigenvalues(&c, &g, 0.2);
        assert!(!e.is_conjugate);
        let sum = e.lambda_1 + e.lambda_2;
        let prod = e.lambda_1 * e.lambda_2;
        assert!((sum.re + c.d_e / c.j_e).abs() < 1e-9 * (c.d_e / c.j_e));
        let p = g.u_g * 0.2_f64.cos() / c.j_e;
        assert!((prod.re - p).abs() < 1e-9 * p);
    }

    #[test]
    fn damping_bounds_examples() {
        let (g, s) = base();
        let ip = IpllGains::baseline();
        let b = damping_bounds(&g, &s, &ip, &[(g, s)], 2.0).unwrap();
        assert!((b.lower_conservative - 1.980).abs() < 1e-3);
        assert!((b.upper - 7.661).abs() < 1e-3, "{}", b.upper);
        assert!((b.lower_exact - 0.328).abs() < 1e-12);

        let edge = g.with_l_g(12.374e-3);
        let b = damping_bounds(&g, &s, &ip, &[(edge, s)], 2.0).unwrap();
        assert!((b.lower_exact - 0.98995).abs() < 1e-4, "{}", b.lower_exact);
        assert!((b.lower_exact - g.u_g / g.omega_0).abs() < 1e-4);
    }

    #[test]
    fn conjugate_flag_flips_at_upper_bound() {
        let (g, s) = base();
        let ip = IpllGains::baseline();
        let b = damping_bounds(&g, &s, &ip, &[(g, s)], 2.0).unwrap();
        let op = solve_equilibrium(&g, &s).unwrap();
        let at =
            |d_e: f64| eigenvalues(&EquivalentCoefficients::new(0.05, d_e, 0.0), &g, op.delta_0);
        assert!(at(b.upper * (1.0 - 1e-9)).is_conjugate);
        assert!(!at(b.upper * (1.0 + 1e-9)).is_conjugate);
    }

    #[test]
    fn damping_bounds_errors() {
        let (g, s) = base();
        let ip = IpllGains::baseline();
        assert_eq!(
            damping_bounds(&g, &s, &ip, &[], 2.0),
            Err(Error::EmptyEnvelope)
        );
        let far = g.with_l_g(13e-3);
        assert!(matches!(
            damping_bounds(&g, &s, &ip, &[(far, s)], 2.0),
            Err(Error::NoEquilibrium { .. })
        ));
    }

    #[test]
    fn map_gains_reproduces_reported_values() {
        let p = reference_pll();
        assert!((p.k_ppll - 0.1305).abs() < 5e-4, "{}", p.k_ppll);
        assert!((p.k_ipll - 19.144).abs() < 1e-2, "{}", p.k_ipll);
    }

    #[test]
    fn map_gains_without_damping() {
        let (g, s) = base();
        let p = map_ipll_to_pll(&IpllGains { j: 20.0, d: 0.0 }, &g, &s).unwrap();
        assert_eq!(p.k_ppll, 0.0);
        assert!((p.k_ipll - 20.0).abs() < 1e-12);
    }

    #[test]
    fn map_gains_degenerate_at_boundary() {
        let (g, s) = base();
        let edge = g.with_l_g(g.u_g / (g.omega_g * s.i_dref));
        assert!(matches!(
            map_ipll_to_pll(&IpllGains::baseline(), &edge, &s),
            Err(Error::DegenerateAngle { .. })
        ));
    }

    #[test]
    fn sweep_flags_infeasible_rows() {
        let (g, s) = base();
        let rows = damping_sweep(
            &g,
            &s,
            &reference_pll(),
            &IpllGains::baseline(),
            (1e-3, 14e-3),
            14,
        )
        .unwrap();
        assert_eq!(rows.len(), 14);
        assert!(rows.windows(2).all(|w| w[0].l_g < w[1].l_g));
        for r in &rows {
            assert_eq!(r.equilibrium_exists, r.l_g < 12.374e-3);
            if r.equilibrium_exists {
                assert!(r.d_e_pll.is_finite());
            } else {
                assert!(r.delta_0.is_nan() && r.d_e_pll.is_nan());
            }
            assert_eq!(r.d_e_ipll, 2.0 - r.l_g * 80.0);
        }
    }

    #[test]
    fn sweep_needs_two_points() {
        let (g, s) = base();
        assert!(damping_sweep(
            &g,
            &s,
            &reference_pll(),
            &IpllGains::baseline(),
            (1e-3, 2e-3),
            1
        )
        .is_err());
    }

    #[test]
    fn critical_impedance_for_reference_gains() {
        let (g, s) = base();
        let pll = reference_pll();
        let c = critical_impedance(&g, &s, &pll, (4.1e-3, 12.3e-3)).unwrap();
        assert!((c.l_g - 11.21e-3).abs() < 0.02e-3, "{}", c.l_g);
        let gg = g.with_l_g(c.l_g);
        let op = solve_equilibrium(&gg, &s).unwrap();
        let d_e = pll_coefficients(&gg, &s, &pll, op.delta_0).unwrap().d_e;
        assert!(d_e.abs() < 1e-10, "{d_e}");
    }

    #[test]
    fn critical_impedance_ipll_is_linear_root() {
        let (g, s) = base();
        let c = critical_impedance_ipll(&g, &s, &IpllGains::baseline(), (1e-3, 40e-3)).unwrap();
        assert!((c.l_g - 25e-3).abs() < 1e-9);
        assert!(!c.equilibrium_exists);
    }

    #[test]
    fn critical_impedance_not_bracketed() {
        let (g, s) = base();
        assert!(matches!(
            critical_impedance(&g, &s, &reference_pll(), (1e-3, 7e-3)),
            Err(Error::NotBracketed { .. })
        ));
    }

    #[test]
    fn second_order_baseline() {
        let (g, s) = base();
        let op = solve_equilibrium(&g, &s).unwrap();
        let c = ipll_coefficients(&g, &s, &IpllGains::baseline());
        let so = second_order_characteristics(&c, &g, op.delta_0).unwrap();
        assert!((so.omega_n - 76.60).abs() < 0.01, "{}", so.omega_n);
        assert!((so.zeta - 0.2183).abs() < 1e-4, "{}", so.zeta);
        assert!((so.omega_d.unwrap() - 74.76).abs() < 0.01);

        // modulus / argument of the eigenvalues
        let e = eigenvalues(&c, &g, op.delta_0);
        assert!((e.lambda_1.norm() - so.omega_n).abs() < 1e-9);
        assert!((-e.lambda_1.re / e.lambda_1.norm() - so.zeta).abs() < 1e-12);
    }

    #[test]
    fn second_order_edge_cases() {
        let (g, s) = base();
        let op = solve_equilibrium(&g, &s).unwrap();
        let undamped = EquivalentCoefficients::new(0.05, 0.0, 0.0);
        let so = second_order_characteristics(&undamped, &g, op.delta_0).unwrap();
        assert_eq!(so.zeta, 0.0);
        assert_eq!(so.omega_d, Some(so.omega_n));

        let ip = IpllGains::baseline();
        let b = damping_bounds(&g, &s, &ip, &[(g, s)], 2.0).unwrap();
        let crit = EquivalentCoefficients::new(1.0 / ip.j, b.upper, 0.0);
        let so = second_order_characteristics(&crit, &g, op.delta_0).unwrap();
        assert_eq!(so.zeta, 1.0);
        assert_eq!(so.omega_d, None);

        assert!(matches!(
            second_order_characteristics(&undamped, &g, FRAC_PI_2),
            Err(Error::DegenerateAngle { .. })
        ));
    }
}
