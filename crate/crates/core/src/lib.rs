pub mod error;
pub mod mesh;
pub mod poly;
pub mod ddr;
pub mod cw;
pub mod export;
pub mod lift;
pub mod verify;

pub use error::{Error, Result};
