//! Version age of gossip on ring networks with jammed links.
//!
//! * [`model`]: rates, segments, partitions and jammer placements.
//! * [`analytic`]: exact ages from the contiguous-set recursion and its
//!   closed forms.
//! * [`placement`]: jammer strategies and the whole-system objective.
//! * [`sim`]: event-driven Monte-Carlo simulation of the protocol.
//! * [`experiment`]: scaling sweeps, exponent fits, CSV and SVG output.
//! * [`par`]: rayon-backed map with a sequential fallback.

pub mod analytic;
pub mod experiment;
pub mod model;
pub mod par;
pub mod placement;
pub mod sim;

pub use analytic::{
    contiguous_set_age, gaussian_bounds, line_ages, line_corner_age_closed_form, line_total_age, product_sum,
    product_term, ring_node_age, ring_total_age, sandwich_check, AgeVector, AnalyticError, ContiguousSet, LineSetTable,
    Sandwich,
};
pub use experiment::{
    fit_exponent, jammer_count, run_sweep, Engine, ExponentFit, Model, ScalingRecord, SweepOutcome, SweepSpec,
};
pub use model::{JammerPlacement, ModelError, Partition, Rates, Segment, SegmentKind};
pub use par::Execution;
pub use placement::{
    place, ring_total_age_difference, split_total_age, system_age, PlacementError, PlacementKind, PlacementStrategy,
};
pub use sim::{simulate, SimConfig, SimError, SimResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
