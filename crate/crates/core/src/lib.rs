pub mod audit;
pub mod base;
pub mod doeblin;
pub mod error;
pub mod fiber;
pub mod gibbs;
pub mod jet;
pub mod limits;
pub mod linalg;
pub mod rpf;
pub mod seed;
pub mod system;
pub mod transfer;

pub use error::{Error, Result};
