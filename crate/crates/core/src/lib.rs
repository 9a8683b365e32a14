//! Demand strip packing: schedule width/height tasks on a path of `W` edges
//! so that the largest total demand on any edge (the peak) is small.

pub mod baseline;
pub mod bounds;
pub mod cli;
pub mod containers;
pub mod error;
pub mod exact;
pub mod fixtures;
pub mod geom;
pub mod model;
pub mod profile;
pub mod ptas;
pub mod ratio;
pub mod square;

pub use error::{DspError, Result};
pub use model::{Instance, Schedule, SolveReport, Task, TaskId};
