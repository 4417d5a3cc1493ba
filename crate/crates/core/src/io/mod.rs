//! File formats: newline-delimited detection and ground-truth records, TOML
//! simulator configs, sweep CSV and report rendering.

mod config;
mod lines;
mod report;

pub use config::{apply_override, load_sim_config, parse_override, parse_sim_config};
pub use lines::{
    read_detections, read_ground_truths, write_detections, write_lines, DetectionLine,
    GroundTruthLine,
};
pub use report::{render_report, write_sweep_csv, SWEEP_HEADER};
