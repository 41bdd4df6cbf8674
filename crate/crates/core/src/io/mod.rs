//! Config files, CSV/SVG artifacts and text reports.

pub mod config;
pub mod csv;
pub mod report;
pub mod svg;

pub use config::{parse_config, StudyConfig};
pub use csv::{
    emit_sweep_csv, emit_trajectories_csv, emit_trajectory_csv, parse_sweep_csv,
    parse_trajectory_csv, SWEEP_HEADER, TRAJECTORY_HEADER,
};
pub use report::{build_report, LoopReport, Report};
pub use svg::{render_svg_panels, render_svg_plot, AxesSpec, Panel, Series};
