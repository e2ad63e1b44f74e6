//! Design and simulation of multi-outcome go/no-go trials.
//!
//! Group-sequential designs with an m-of-K stopping rule, composite-endpoint
//! designs and two-stage drop-the-loser designs are all evaluated on one
//! simulated block of null statistics, shifted for each effect scenario.

pub mod analysis;
pub mod dtl;
pub mod error;
pub mod gs;
pub mod matrix;
pub mod model;
pub mod normal;
pub mod optimize;
mod par;
pub mod sim;

pub use dtl::{
    conditional_power, estimate_dtl_oc, evaluate_dtl_row, invert_cp_boundaries, realise_dtl_design, search_dtl_design, DtlDecision,
    DtlDesignSpec, DtlOperatingCharacteristics, DtlRealisation, DtlSearchOptions,
};
pub use error::{DesignError, Result};
pub use gs::{
    calibrate_c, estimate_gs_oc, evaluate_gs_row, realise_gs_design, search_composite_design, search_gs_design, Decision,
    GsOperatingCharacteristics, GsRealisation, GsSearchOptions, TrialPath,
};
pub use matrix::Matrix;
pub use model::{
    assemble_covariance, covariance_entry, lfc_effects, wang_tsiatis_boundaries, Boundaries, GsDesignSpec, LfcMode,
    OutcomeModel, StageSchedule,
};
pub use optimize::CalibrationOptions;
pub use sim::{apply_mean_shift, simulate_null_block, SimConfig, StatisticBlock};
