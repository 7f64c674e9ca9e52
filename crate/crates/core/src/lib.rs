//! Default cascades on weighted directed financial networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`network`] and [`measures`] hold the data model and its empirical
//!   degree/threshold statistics, [`io`] their file formats;
//! * [`cascade`] runs the round-based default process on a concrete network;
//! * [`configmodel`] samples configuration-model multigraphs and runs the
//!   sequential half-edge construction and its counter chain;
//! * [`asymptotics`] evaluates the large-network limit formulas;
//! * [`generators`] and [`percolation`] build random instances and study the
//!   skeleton of contagious links;
//! * [`experiments`] wires everything into reproducible numerical studies.
//!
//! All randomness flows through [`rng`], keyed by a master seed and a purpose
//! tag, so every result is reproducible bit for bit.

pub mod asymptotics;
pub mod cascade;
pub mod configmodel;
pub mod error;
pub mod experiments;
pub mod generators;
pub mod io;
pub mod measures;
pub mod network;
pub mod percolation;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use measures::{EmpiricalMeasures, LimitModel};
pub use network::{build_network, DegreeSequence, Exposure, FinancialNetwork, NodeId};
