//! Command dispatch for the `ipll` binary.
//!
//! Every subcommand first prints the fully resolved study configuration as a
//! `# config {...}` line so its output can be reproduced from itself. Exit
//! codes: 0 success, 1 invalid input, 2 runtime failure. A diverged
//! simulation is a result, not a failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ipll_core::io::{
    build_report, emit_sweep_csv, emit_trajectories_csv, emit_trajectory_csv, parse_config,
    render_svg_panels, AxesSpec, Panel, Series, StudyConfig,
};
use ipll_core::simulator::{run_design_point_comparison, run_weak_grid_suite};
use ipll_core::{
    critical_impedance, critical_impedance_ipll, damping_bounds, damping_sweep, integrate,
    map_ipll_to_pll, measure_damping, solve_equilibrium, Error, ModelKind, Trajectory,
};

#[derive(Debug, Parser)]
#[command(
    name = "ipll",
    version,
    about = "Synchronization stability lab for PLL and IPLL inverters"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Overrides,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Equilibrium, coefficients, eigenvalues and damping bounds at one grid.
    Analyze,
    /// Equivalent damping of both loops over a range of grid inductances.
    Sweep,
    /// Time-domain run of one model from a perturbed equilibrium.
    Simulate,
    /// Both loops at the design grid from the same perturbation.
    Fig5,
    /// Both loops at 8.8, 9.5, 10.3 and 11.25 mH with a verdict table.
    Fig6,
    /// PI gains equivalent to the IPLL gains at the given grid.
    MapGains,
    /// Admissible IPLL damping gain and a recommended value.
    DesignDamping,
    /// Grid inductance at which the PI-PLL damping changes sign.
    FindCritical,
}

/// Flags override the values loaded from `--config`.
#[derive(Debug, Default, Args)]
struct Overrides {
    /// JSON study configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Grid voltage amplitude [V].
    #[arg(long, global = true, allow_negative_numbers = true)]
    ug: Option<f64>,
    /// Grid frequency [rad/s].
    #[arg(long = "omega-g", global = true, allow_negative_numbers = true)]
    omega_g: Option<f64>,
    /// PLL nominal frequency [rad/s].
    #[arg(long = "omega-0", global = true, allow_negative_numbers = true)]
    omega_0: Option<f64>,
    /// Grid inductance [H].
    #[arg(long, global = true, allow_negative_numbers = true)]
    lg: Option<f64>,
    /// Grid resistance [ohm].
    #[arg(long, global = true, allow_negative_numbers = true)]
    rg: Option<f64>,
    /// d-axis current reference [A].
    #[arg(long, global = true, allow_negative_numbers = true)]
    idref: Option<f64>,
    /// q-axis current reference [A].
    #[arg(long, global = true, allow_negative_numbers = true)]
    iqref: Option<f64>,
    /// PI-PLL proportional gain; needs --ki as well.
    #[arg(long, global = true, allow_negative_numbers = true)]
    kp: Option<f64>,
    /// PI-PLL integral gain; needs --kp as well.
    #[arg(long, global = true, allow_negative_numbers = true)]
    ki: Option<f64>,
    /// IPLL integral gain.
    #[arg(long, global = true, allow_negative_numbers = true)]
    j: Option<f64>,
    /// IPLL damping gain.
    #[arg(long, global = true, allow_negative_numbers = true)]
    d: Option<f64>,
    /// Grid inductance at which PI gains are mapped from the IPLL [H].
    #[arg(long = "design-lg", global = true, allow_negative_numbers = true)]
    design_lg: Option<f64>,
    /// Frequency fluctuation factor for the conservative damping bound.
    #[arg(long = "k-fluct", global = true, allow_negative_numbers = true)]
    k_fluct: Option<f64>,
    /// Model for `simulate`: pll_reduced, ipll_reduced, pll_signal, ipll_signal.
    #[arg(long, global = true)]
    model: Option<ModelKind>,
    /// Use signal-level models in fig5/fig6.
    #[arg(long = "signal-level", global = true)]
    signal_level: bool,
    /// Initial angle offset from equilibrium [rad].
    #[arg(long, global = true, allow_negative_numbers = true)]
    offset: Option<f64>,
    /// Simulated time [s].
    #[arg(long, global = true, allow_negative_numbers = true)]
    duration: Option<f64>,
    /// Integration step [s].
    #[arg(long, global = true, allow_negative_numbers = true)]
    dt: Option<f64>,
    /// Record every n-th step.
    #[arg(long, global = true)]
    decimation: Option<usize>,
    /// Lower inductance of the sweep or search range [H].
    #[arg(long = "lg-min", global = true, allow_negative_numbers = true)]
    lg_min: Option<f64>,
    /// Upper inductance of the sweep or search range [H].
    #[arg(long = "lg-max", global = true, allow_negative_numbers = true)]
    lg_max: Option<f64>,
    /// Number of sweep points.
    #[arg(long, global = true)]
    points: Option<usize>,
    /// CSV output file (stdout when omitted).
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    /// SVG plot output file.
    #[arg(long, global = true, value_name = "FILE")]
    svg: Option<PathBuf>,
}

enum Failure {
    Input(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Validation(_)
            | Error::Parse { .. }
            | Error::InvalidScenario(_)
            | Error::EmptyInput => Failure::Input(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

/// Parses `args` (program name first), runs the subcommand and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                1
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => 0,
        Err(Failure::Input(m)) => {
            let _ = writeln!(err, "error: {m}");
            1
        }
        Err(Failure::Runtime(m)) => {
            let _ = writeln!(err, "error: {m}");
            2
        }
    }
}

fn load(o: &Overrides) -> Outcome<StudyConfig> {
    let mut c = match &o.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None => StudyConfig::default(),
    };
    macro_rules! set {
        ($($flag:ident => $field:ident),* $(,)?) => {
            $(if let Some(v) = o.$flag { c.$field = v; })*
        };
    }
    set!(
        ug => u_g_volt, omega_g => omega_g_rad_s, omega_0 => omega_0_rad_s, lg => l_g_henry,
        rg => r_g_ohm, idref => i_dref_amp, iqref => i_qref_amp, j => j_ipll, d => d_ipll,
        design_lg => design_l_g_henry, k_fluct => k_fluct, model => model,
        offset => delta_offset_rad, duration => duration_s, dt => dt_s,
        decimation => decimation, points => sweep_points,
    );
    match (o.kp, o.ki) {
        (Some(kp), Some(ki)) => {
            c.k_ppll = Some(kp);
            c.k_ipll = Some(ki);
        }
        (None, None) => {}
        _ => {
            return Err(Failure::Input(
                "--kp and --ki must be given together".into(),
            ))
        }
    }
    if o.signal_level {
        c.signal_level = true;
    }
    if let Some(v) = o.lg_min {
        c.sweep_l_g_min_henry = v;
        c.critical_l_g_min_henry = v;
    }
    if let Some(v) = o.lg_max {
        c.sweep_l_g_max_henry = v;
        c.critical_l_g_max_henry = v;
    }
    if let Some(p) = &o.out {
        c.csv_path = Some(p.display().to_string());
    }
    if let Some(p) = &o.svg {
        c.svg_path = Some(p.display().to_string());
    }
    c.validate()?;
    Ok(c)
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Outcome {
    let cfg = load(&cli.opts)?;
    // explicit PI gains are echoed as given; otherwise the mapped pair is shown
    let echo = cfg.resolved().unwrap_or_else(|_| cfg.clone()).to_json();
    emit(out, &format!("# config {echo}\n"))?;
    match cli.command {
        Command::Analyze => analyze(&cfg, out),
        Command::Sweep => sweep(&cfg, &echo, out),
        Command::Simulate => simulate(&cfg, &echo, out),
        Command::Fig5 => fig5(&cfg, &echo, out),
        Command::Fig6 => fig6(&cfg, &echo, out),
        Command::MapGains => map_gains(&cfg, out),
        Command::DesignDamping => design_damping(&cfg, out),
        Command::FindCritical => find_critical(&cfg, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Outcome {
    out.write_all(text.as_bytes())
        .map_err(|e| Failure::Runtime(format!("cannot write output: {e}")))
}

fn write_file(path: &str, text: &str) -> Outcome {
    std::fs::write(path, text).map_err(|e| Failure::Runtime(format!("cannot write {path}: {e}")))
}

/// CSV goes to the configured file, or to stdout after the config line.
fn emit_csv(cfg: &StudyConfig, out: &mut dyn Write, csv: &str) -> Outcome {
    match &cfg.csv_path {
        Some(path) => {
            write_file(path, csv)?;
            emit(out, &format!("# csv written to {path}\n"))
        }
        None => emit(out, csv),
    }
}

fn emit_svg(cfg: &StudyConfig, out: &mut dyn Write, panels: &[Panel], echo: &str) -> Outcome {
    if let Some(path) = &cfg.svg_path {
        let svg = render_svg_panels(panels, Some(&format!("config {echo}")))?;
        write_file(path, &svg)?;
        emit(out, &format!("# svg written to {path}\n"))?;
    }
    Ok(())
}

fn angle_series(label: &str, traj: &Trajectory) -> Series {
    Series::new(
        label,
        traj.rows.iter().map(|r| (r.t, r.delta_pll)).collect(),
    )
}

fn angle_axes(title: String) -> AxesSpec {
    AxesSpec {
        title,
        x_label: "t [s]".into(),
        y_label: "delta_pll [rad]".into(),
    }
}

fn verdict_line(label: &str, traj: &Trajectory) -> String {
    let decay = measure_damping(traj)
        .map(|e| format!("{:.4}", e.decay_rate_est))
        .unwrap_or_else(|_| "n/a".into());
    format!(
        "{label} verdict = {} ({:?}), decay_rate = {decay} 1/s\n",
        traj.verdict.label(),
        traj.verdict
    )
}

fn analyze(cfg: &StudyConfig, out: &mut dyn Write) -> Outcome {
    let report = build_report(
        &cfg.grid(),
        &cfg.setpoint(),
        &cfg.pll()?,
        &cfg.ipll(),
        cfg.k_fluct,
    )?;
    emit(out, &report.to_string())
}

fn sweep(cfg: &StudyConfig, echo: &str, out: &mut dyn Write) -> Outcome {
    let rows = damping_sweep(
        &cfg.grid(),
        &cfg.setpoint(),
        &cfg.pll()?,
        &cfg.ipll(),
        (cfg.sweep_l_g_min_henry, cfg.sweep_l_g_max_henry),
        cfg.sweep_points,
    )?;
    emit_csv(cfg, out, &emit_sweep_csv(&rows))?;
    let curve = |label: &str, f: fn(&ipll_core::SweepRow) -> f64| {
        Series::new(label, rows.iter().map(|r| (r.l_g * 1e3, f(r))).collect())
    };
    let panel = Panel {
        axes: AxesSpec {
            title: "Equivalent damping versus grid inductance".into(),
            x_label: "L_g [mH]".into(),
            y_label: "D_e [V*s/rad]".into(),
        },
        series: vec![
            curve("PI-PLL", |r| r.d_e_pll),
            curve("IPLL", |r| r.d_e_ipll),
        ],
    };
    emit_svg(cfg, out, &[panel], echo)
}

fn simulate(cfg: &StudyConfig, echo: &str, out: &mut dyn Write) -> Outcome {
    let traj = integrate(&cfg.scenario()?)?;
    emit(out, &format!("# {}", verdict_line(cfg.model.name(), &traj)))?;
    emit_csv(cfg, out, &emit_trajectory_csv(&traj))?;
    let panel = Panel {
        axes: angle_axes(format!(
            "{} at L_g = {:.3} mH",
            cfg.model,
            cfg.l_g_henry * 1e3
        )),
        series: vec![angle_series(cfg.model.name(), &traj)],
    };
    emit_svg(cfg, out, &[panel], echo)
}

fn fig5(cfg: &StudyConfig, echo: &str, out: &mut dyn Write) -> Outcome {
    let r = run_design_point_comparison(&cfg.suite_template()?)?;
    emit(out, &verdict_line(r.pll.model.name(), &r.pll.trajectory))?;
    emit(out, &verdict_line(r.ipll.model.name(), &r.ipll.trajectory))?;
    emit(
        out,
        &format!(
            "relative sup-norm difference = {:.6} (dimensionless)\n",
            r.relative_difference
        ),
    )?;
    if cfg.csv_path.is_some() {
        emit_csv(
            cfg,
            out,
            &emit_trajectories_csv(&[r.pll.trajectory.clone(), r.ipll.trajectory.clone()]),
        )?;
    }
    let panel = Panel {
        axes: angle_axes(format!("Both loops at L_g = {:.3} mH", r.pll.l_g * 1e3)),
        series: vec![
            angle_series(r.pll.model.name(), &r.pll.trajectory),
            angle_series(r.ipll.model.name(), &r.ipll.trajectory),
        ],
    };
    emit_svg(cfg, out, &[panel], echo)
}

fn fig6(cfg: &StudyConfig, echo: &str, out: &mut dyn Write) -> Outcome {
    let runs = run_weak_grid_suite(&cfg.suite_template()?)?;
    emit(out, "l_g_henry model verdict decay_rate_1_s\n")?;
    for r in &runs {
        let decay = measure_damping(&r.trajectory)
            .map(|e| format!("{:.4}", e.decay_rate_est))
            .unwrap_or_else(|_| "n/a".into());
        emit(
            out,
            &format!(
                "{:e} {} {} {decay}\n",
                r.l_g,
                r.model,
                r.trajectory.verdict.label()
            ),
        )?;
    }
    if cfg.csv_path.is_some() {
        let trajs: Vec<Trajectory> = runs.iter().map(|r| r.trajectory.clone()).collect();
        emit_csv(cfg, out, &emit_trajectories_csv(&trajs))?;
    }
    let panels: Vec<Panel> = runs
        .chunks(2)
        .map(|pair| Panel {
            axes: angle_axes(format!("L_g = {:.2} mH", pair[0].l_g * 1e3)),
            series: pair
                .iter()
                .map(|r| angle_series(r.model.name(), &r.trajectory))
                .collect(),
        })
        .collect();
    emit_svg(cfg, out, &panels, echo)
}

fn map_gains(cfg: &StudyConfig, out: &mut dyn Write) -> Outcome {
    let grid = cfg.grid();
    let g = map_ipll_to_pll(&cfg.ipll(), &grid, &cfg.setpoint())?;
    emit(
        out,
        &format!(
            "mapped at L_g = {:e} H\nK_ppll = {:.4} ({:e})\nK_ipll = {:.3} ({:e})\n",
            grid.l_g, g.k_ppll, g.k_ppll, g.k_ipll, g.k_ipll
        ),
    )
}

fn design_damping(cfg: &StudyConfig, out: &mut dyn Write) -> Outcome {
    let grid = cfg.grid();
    let setpoint = cfg.setpoint();
    let n = cfg.sweep_points.max(2);
    let (lo, hi) = (cfg.sweep_l_g_min_henry, cfg.sweep_l_g_max_henry);
    let envelope: Vec<_> = (0..n)
        .map(|i| grid.with_l_g(lo + (hi - lo) * i as f64 / (n - 1) as f64))
        .filter(|g| solve_equilibrium(g, &setpoint).is_ok())
        .map(|g| (g, setpoint))
        .collect();
    let b = damping_bounds(&grid, &setpoint, &cfg.ipll(), &envelope, cfg.k_fluct)?;
    let d_max = b.max_underdamped_d(&grid, &setpoint);
    let l_max = envelope.last().map_or(f64::NAN, |(g, _)| g.l_g);
    let recommended = b.lower_exact.max(b.lower_conservative);
    emit(
        out,
        &format!(
            "envelope L_g up to {l_max:e} H ({} points with an equilibrium)\n\
             D lower bound (exact)        = {:.6} V*s/rad\n\
             D lower bound (conservative) = {:.6} V*s/rad (k = {})\n\
             D upper bound (underdamped)  = {d_max:.6} V*s/rad\n\
             recommended D                = {recommended:.6} V*s/rad\n",
            envelope.len(),
            b.lower_exact,
            b.lower_conservative,
            b.k_fluct
        ),
    )?;
    if recommended > d_max {
        emit(
            out,
            "warning: recommended D exceeds the underdamped limit at this grid\n",
        )?;
    }
    Ok(())
}

fn find_critical(cfg: &StudyConfig, out: &mut dyn Write) -> Outcome {
    let range = (cfg.critical_l_g_min_henry, cfg.critical_l_g_max_henry);
    let grid = cfg.grid();
    let setpoint = cfg.setpoint();
    let c = critical_impedance(&grid, &setpoint, &cfg.pll()?, range)?;
    let scr = ipll_core::scr_from_grid(&grid.with_l_g(c.l_g), setpoint.i_dref)?;
    emit(
        out,
        &format!("PI-PLL L_g* = {:.4e} H (SCR = {scr:.4})\n", c.l_g),
    )?;
    match critical_impedance_ipll(&grid, &setpoint, &cfg.ipll(), range) {
        Ok(ci) => emit(
            out,
            &format!(
                "IPLL L_g* = {:.4e} H (equilibrium {})\n",
                ci.l_g,
                if ci.equilibrium_exists {
                    "exists"
                } else {
                    "does not exist"
                }
            ),
        ),
        Err(Error::NotBracketed { .. }) => {
            emit(out, "IPLL damping keeps its sign over the range\n")
        }
        Err(e) => Err(e.into()),
    }
}
