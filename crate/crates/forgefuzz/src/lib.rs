//! Social-workload synthesis and fuzz testing for Git forges.
//!
//! The pipeline: ingest an archive of forge events into an edge list,
//! derive follow arcs from interaction similarity, embed every user as a
//! point in the unit cube (degree centrality, PageRank, event-type code),
//! evolve the event list to spread those points evenly (minimising star
//! discrepancy), and replay the result through a forge backend while
//! collecting per-user resource metrics.

pub mod analysis;
pub mod baselines;
pub mod dataset;
pub mod discrepancy;
pub mod error;
pub mod evolve;
pub mod features;
pub mod followgraph;
pub mod replay;
pub mod simforge;
pub mod synth;

pub use error::{Error, Result};
