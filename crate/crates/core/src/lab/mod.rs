//! Convergence studies, diagnostics and reports.

pub mod config;
pub mod diagnostics;
pub mod report;
pub mod study;
pub mod trend;

pub use config::{config_hash, load_config, parse_config};
pub use diagnostics::{
    difference_quotient_field, difference_quotient_norm, error_outside_layer, layer_oscillation, near_hole_gradient,
    time_derivative_norm, LayerError,
};
pub use report::{emit_report, load_report, ReportFormat, Row, StudyKind, StudyReport, Verdict};
pub use study::{run_study, InitialData, StudyConfig};
