//! Dimension bounds for attractors of retarded functional differential
//! equations, and the numerical machinery to check their ingredients.

pub mod bounds;
pub mod boxdim;
pub mod charroots;
pub mod commands;
pub mod config;
pub mod covering;
pub mod error;
pub mod history;
pub mod sim;
pub mod spectral;
pub mod stats;

pub use error::{Error, ErrorClass, Result};
pub use history::{GridSpec, HistorySegment, ValueNorm};
