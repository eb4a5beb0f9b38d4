// SPDX-License-Identifier: MIT OR Apache-2.0

//! Structural break detection for high-dimensional piecewise-stationary
//! vector autoregressions.
//!
//! Detection runs in two stages. A total-variation lasso over coefficient
//! increments ([`stage1`]) proposes an over-complete set of candidate
//! breaks; an information criterion over segment-wise lasso refits
//! ([`stage2`]) then screens them down to the final set. [`sim`] generates
//! piecewise VAR data and benchmark scenarios, and [`pipeline`] ties the
//! stages together with evaluation metrics and a replicate harness.

#![forbid(unsafe_code)]

pub mod error;
pub mod io;
mod linalg;
pub mod model;
pub mod pipeline;
pub mod plot;
pub mod sim;
pub mod stage1;
pub mod stage2;

pub use error::{Result, VarsegError};
pub use model::{
    companion_spectral_radius, default_schedule, validate_model, SegmentedVarModel, TimeSeries,
    TuningSchedule, ValidationReport,
};
pub use pipeline::{detect, hausdorff, run_replicates, stage1_coverage_check, DetectOptions, DetectionResult};
pub use sim::{make_scenario, simulate, ScenarioId, ScenarioPreset, SimulationConfig};
pub use stage1::{bcd_solve, build_stage1, extract_candidates, kkt_check, soft_threshold, BcdOptions};
pub use stage2::{evaluate_subset, fit_segment, select_breaks, Strategy};
