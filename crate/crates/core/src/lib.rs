//! Equal circle packing, decision version: place `n` unit circles without
//! overlap inside a circular container of radius `R`.
//!
//! Overlaps are scored by an elastic energy that vanishes exactly on feasible
//! layouts. The energy is minimized by BFGS over randomly drawn groups of
//! circles whose size doubles round by round ([`sidm`]), and local minima are
//! escaped by squeezing the layout into a smaller container and relaxing it
//! again ([`search`]).

pub mod bench;
pub mod bfgs;
pub mod check;
pub mod energy;
pub mod error;
pub mod instance;
pub mod layout_file;
pub mod radii;
pub mod search;
pub mod sidm;
pub mod svg;

pub use bfgs::{
    bfgs_update, line_search, local_bfgs, BfgsState, LineSearchSpec, LocalBfgsOptions, LocalBfgsResult, StopReason,
    ENERGY_THRESHOLD, GRADIENT_THRESHOLD,
};
pub use check::{check_centers, check_layout, CheckReport};
pub use energy::{
    circle_overlap_depth, container_overlap_depth, subset_energy, subset_gradient, total_energy, EnergyReport,
};
pub use error::{Error, Result};
pub use instance::{GroupSelection, Instance, Layout, Point};
pub use layout_file::LayoutFile;
pub use radii::RadiusTable;
pub use search::{global_search, random_initial_layout, shrink_factor, SearchConfig, SearchOutcome};
pub use sidm::{make_schedule, random_partition, sidm_descent, sidm_descent_observed, RoundSchedule, SidmConfig};
