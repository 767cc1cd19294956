//! Balanced, compact, convex districts from population-weighted points.
//!
//! The engine computes a balanced centroidal power diagram by capacitated
//! Lloyd iteration. Each assignment step is an exact minimum-cost
//! transshipment; the optimal duals on the district side are the power
//! weights that make every district the intersection of the population with
//! a convex polygon.

pub mod assignment;
pub mod cli;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod ingest_io;
pub mod lloyd;
pub mod model;
pub mod oracle;

pub use error::{Error, Result};
pub use model::{
    assignment_cost, balanced_capacities, squared_distance, BalancedAssignment, Block, CenterSet,
    Instance, Point2, PowerWeights, RunTrace,
};
