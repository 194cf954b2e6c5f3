pub mod error;
pub mod evaluate;
pub mod forecast;
pub mod geo;
pub mod grid;
pub mod io;
pub mod network;
pub mod pipeline;
pub mod scan;
pub mod simulate;

pub use error::{Error, Result};
