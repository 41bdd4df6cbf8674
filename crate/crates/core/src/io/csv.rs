//! CSV emission for trajectories and sweeps.
//!
//! Floats use Rust's shortest round-trip scientific form, so parsing the
//! output returns bit-identical values.

use std::fmt::Write;

use crate::analysis::SweepRow;
use crate::dynamics::ModelKind;
use crate::error::{Error, Result};
use crate::simulator::{Trajectory, TrajectoryRow};

pub const TRAJECTORY_HEADER: &str = "t_s,delta_pll_rad,omega_pll_rad_s,u_q_v,l_g_henry,model";
pub const SWEEP_HEADER: &str =
    "l_g_henry,scr,delta0_rad,d_e_pll,d_e_ipll,j_e_pll,j_e_ipll,equilibrium_exists";

pub fn emit_trajectory_csv(traj: &Trajectory) -> String {
    emit_trajectories_csv(std::slice::from_ref(traj))
}

/// Several trajectories stacked under one header, told apart by `model`.
pub fn emit_trajectories_csv(trajs: &[Trajectory]) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for traj in trajs {
        for r in &traj.rows {
            writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e},{}",
                r.t, r.delta_pll, r.omega_pll, r.u_q, r.l_g, traj.model
            )
            .expect("writing to a String");
        }
    }
    out
}

pub fn emit_sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
            r.l_g,
            r.scr,
            r.delta_0,
            r.d_e_pll,
            r.d_e_ipll,
            r.j_e_pll,
            r.j_e_ipll,
            r.equilibrium_exists
        )
        .expect("writing to a String");
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        location: format!("line {line}"),
        message: message.into(),
    }
}

fn split_body<'a>(
    text: &'a str,
    header: &str,
    width: usize,
) -> Result<impl Iterator<Item = (usize, Vec<&'a str>)>> {
    // leading `#` lines carry run metadata and are skipped
    let mut lines = text
        .lines()
        .enumerate()
        .skip_while(|(_, l)| l.starts_with('#'));
    match lines.next() {
        Some((_, l)) if l == header => {}
        other => {
            return Err(parse_err(
                other.map_or(1, |(i, _)| i + 1),
                "unexpected header",
            ))
        }
    }
    let rows: Vec<_> = lines
        .map(|(i, l)| (i + 1, l.split(',').collect::<Vec<_>>()))
        .collect();
    if let Some((line, f)) = rows.iter().find(|(_, f)| f.len() != width) {
        return Err(parse_err(
            *line,
            format!("expected {width} fields, got {}", f.len()),
        ));
    }
    Ok(rows.into_iter())
}

fn num(line: usize, s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| parse_err(line, format!("not a number: `{s}`")))
}

/// Reads back [`emit_trajectories_csv`] output.
pub fn parse_trajectory_csv(text: &str) -> Result<Vec<(ModelKind, TrajectoryRow)>> {
    split_body(text, TRAJECTORY_HEADER, 6)?
        .map(|(line, f)| {
            let model = f[5].parse().map_err(|e: String| parse_err(line, e))?;
            Ok((
                model,
                TrajectoryRow {
                    t: num(line, f[0])?,
                    delta_pll: num(line, f[1])?,
                    omega_pll: num(line, f[2])?,
                    u_q: num(line, f[3])?,
                    l_g: num(line, f[4])?,
                },
            ))
        })
        .collect()
}

/// Reads back [`emit_sweep_csv`] output.
pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    split_body(text, SWEEP_HEADER, 8)?
        .map(|(line, f)| {
            Ok(SweepRow {
                l_g: num(line, f[0])?,
                scr: num(line, f[1])?,
                delta_0: num(line, f[2])?,
                d_e_pll: num(line, f[3])?,
                d_e_ipll: num(line, f[4])?,
                j_e_pll: num(line, f[5])?,
                j_e_ipll: num(line, f[6])?,
                equilibrium_exists: f[7]
                    .parse()
                    .map_err(|_| parse_err(line, format!("not a bool: `{}`", f[7])))?,
            })
        })
        .collect()
}
