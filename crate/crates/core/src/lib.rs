//! Simulation and analysis for satellite-based clock comparison at the
//! 1e-16 level: two-way carrier-phase (TWCP) links, integer-PPP batch
//! stitching, stability statistics and an optical-clock frequency-ratio
//! pipeline with uncertainty budget.

pub mod clock_models;
pub mod decimal;
pub mod epoch;
pub mod error;
pub mod io;
pub mod ionex;
pub mod ippp_stitch;
pub mod link_sim;
pub mod ratio_pipeline;
pub mod series;
pub mod stats;
pub mod twcp;

pub use epoch::Epoch;
pub use error::{Error, Result};
pub use series::{Flags, PhaseSeries, Tag, Technique, TimeDiffSeries};
