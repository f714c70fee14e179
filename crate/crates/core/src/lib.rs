//! Simulation of the Ginzburg–Landau gradient interface model on planar
//! lattice domains.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dgff;
pub mod error;
pub mod experiments;
pub mod gibbs;
pub mod harmonic;
pub mod hswalk;
pub mod langevin;
pub mod lattice;
pub mod linalg;
pub mod potential;
pub mod rng;
pub mod stats;

pub use dgff::DgffSampler;
pub use error::{Error, Result};
pub use harmonic::{Beta, BondWeights, GreensTable};
pub use langevin::{CouplingState, FieldState};
pub use lattice::{Bond, BondIndex, BondSet, LatticeDomain, Orientation, Site, Slot, TorusDomain};
pub use potential::Potential;
