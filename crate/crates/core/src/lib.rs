pub mod appendix;
pub mod constant_surface;
pub mod disorder;
pub mod error;
pub mod floquet;
pub mod fluctuation;
pub mod idss;
pub mod newton;
pub mod numerics;
mod par;
pub mod surface;
pub mod symbol;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
