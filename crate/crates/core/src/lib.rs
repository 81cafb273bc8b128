pub mod autodiff;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod gnn;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod params;
pub mod sampling;
pub mod stein;

pub use error::{Error, Result};
pub use graph::{GraphSample, UpperTriCoords};
